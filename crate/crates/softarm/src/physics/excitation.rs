use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Top-edge excitation waveform: amplitude and the three drive frequencies.
///
/// The default frequencies give the waveform a 100 s period, long enough to
/// cover a whole dataset without the signal repeating.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitationParams {
    /// Amplitude in metres.
    pub amplitude: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

impl Default for ExcitationParams {
    fn default() -> Self {
        ExcitationParams {
            amplitude: 0.03,
            f1: 2.11,
            f2: 3.73,
            f3: 4.33,
        }
    }
}

/// Horizontal displacement of the driven row at time `t`:
/// `A · sin(2π f1 t) · sin(2π f2 t) · sin(2π f3 t)`.
pub fn excitation(t: f64, p: &ExcitationParams) -> f64 {
    p.amplitude * (TAU * p.f1 * t).sin() * (TAU * p.f2 * t).sin() * (TAU * p.f3 * t).sin()
}

// Central-difference step for the prescribed-path velocity.
const FD_DELTA: f64 = 1e-6;

/// Velocity of the prescribed path, by central finite difference.
pub fn excitation_velocity(t: f64, p: &ExcitationParams) -> f64 {
    (excitation(t + FD_DELTA, p) - excitation(t - FD_DELTA, p)) / (2.0 * FD_DELTA)
}
