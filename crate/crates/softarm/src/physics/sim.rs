use super::body::{BodyModel, BodyState};
use super::excitation::{excitation, excitation_velocity, ExcitationParams};
use super::trajectory::Trajectory;
use crate::vec2::Vec2;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Simulation schedule: total duration, recording step and internal substeps.
///
/// The recording step is 0.01 s; with the default stiffness and mass the
/// natural frequency is √(k/m) ≈ 316 rad/s, so the integrator runs at
/// `record_dt / substeps` (1e-4 s by default) and only every `record_dt`
/// state is kept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub duration: f64,
    pub record_dt: f64,
    pub substeps: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            duration: 100.0,
            record_dt: 0.01,
            substeps: 100,
        }
    }
}

/// Scratch buffers for RK4 over the flat `[positions, velocities]` state.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

/// Flat state layout: positions then velocities, xy interleaved per node.
fn pack(state: &BodyState, out: &mut [f64]) {
    let n = state.positions.len();
    for (i, p) in state.positions.iter().enumerate() {
        out[2 * i] = p.x;
        out[2 * i + 1] = p.y;
    }
    for (i, v) in state.velocities.iter().enumerate() {
        out[2 * n + 2 * i] = v.x;
        out[2 * n + 2 * i + 1] = v.y;
    }
}

fn unpack(buf: &[f64], state: &mut BodyState) {
    let n = state.positions.len();
    for i in 0..n {
        state.positions[i] = Vec2::new(buf[2 * i], buf[2 * i + 1]);
        state.velocities[i] = Vec2::new(buf[2 * n + 2 * i], buf[2 * n + 2 * i + 1]);
    }
}

/// Overwrite driven-node slots with the prescribed path at time `t`.
fn enforce_constraints(model: &BodyModel, params: &ExcitationParams, t: f64, buf: &mut [f64]) {
    let n = model.nodes.len();
    let dx = excitation(t, params);
    let vx = excitation_velocity(t, params);
    for (i, node) in model.nodes.iter().enumerate() {
        if node.driven {
            buf[2 * i] = node.rest.x + dx;
            buf[2 * i + 1] = node.rest.y;
            buf[2 * n + 2 * i] = vx;
            buf[2 * n + 2 * i + 1] = 0.0;
        }
    }
}

/// Time derivative of the constrained state. Driven slots are overwritten from
/// the prescribed path before forces are evaluated, so stage states stay on
/// the constraint manifold.
fn derivative(
    model: &BodyModel,
    params: &ExcitationParams,
    t: f64,
    buf: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    enforce_constraints(model, params, t, buf);
    let n = model.nodes.len();
    let (pos, vel) = buf.split_at(2 * n);

    out[..2 * n].copy_from_slice(vel);
    let acc = &mut out[2 * n..];
    for (i, node) in model.nodes.iter().enumerate() {
        acc[2 * i] = 0.0;
        acc[2 * i + 1] = if node.driven { 0.0 } else { -model.gravity };
    }
    for e in &model.elements {
        let pa = Vec2::new(pos[2 * e.a], pos[2 * e.a + 1]);
        let pb = Vec2::new(pos[2 * e.b], pos[2 * e.b + 1]);
        let d = pb - pa;
        let length = d.norm();
        if length <= 0.0 {
            return Err(Error::DegenerateElement { a: e.a, b: e.b });
        }
        let inv = 1.0 / length;
        let axis = d * inv;
        let va = Vec2::new(vel[2 * e.a], vel[2 * e.a + 1]);
        let vb = Vec2::new(vel[2 * e.b], vel[2 * e.b + 1]);
        let magnitude =
            e.stiffness * (length - e.rest_length) + e.damping * (vb - va).dot(axis);
        let fx = axis.x * magnitude;
        let fy = axis.y * magnitude;
        let inv_ma = 1.0 / model.nodes[e.a].mass;
        let inv_mb = 1.0 / model.nodes[e.b].mass;
        acc[2 * e.a] += fx * inv_ma;
        acc[2 * e.a + 1] += fy * inv_ma;
        acc[2 * e.b] -= fx * inv_mb;
        acc[2 * e.b + 1] -= fy * inv_mb;
    }
    // Driven nodes follow the path exactly; their stage derivatives are unused.
    for (i, node) in model.nodes.iter().enumerate() {
        if node.driven {
            acc[2 * i] = 0.0;
            acc[2 * i + 1] = 0.0;
        }
    }
    Ok(())
}

fn rk4_step(
    model: &BodyModel,
    params: &ExcitationParams,
    t: f64,
    h: f64,
    y: &mut [f64],
    rk: &mut Rk4,
) -> Result<()> {
    let dim = y.len();
    rk.tmp.copy_from_slice(y);
    derivative(model, params, t, &mut rk.tmp, &mut rk.k1)?;

    for i in 0..dim {
        rk.tmp[i] = y[i] + 0.5 * h * rk.k1[i];
    }
    derivative(model, params, t + 0.5 * h, &mut rk.tmp, &mut rk.k2)?;

    for i in 0..dim {
        rk.tmp[i] = y[i] + 0.5 * h * rk.k2[i];
    }
    derivative(model, params, t + 0.5 * h, &mut rk.tmp, &mut rk.k3)?;

    for i in 0..dim {
        rk.tmp[i] = y[i] + h * rk.k3[i];
    }
    derivative(model, params, t + h, &mut rk.tmp, &mut rk.k4)?;

    for i in 0..dim {
        y[i] += h / 6.0 * (rk.k1[i] + 2.0 * rk.k2[i] + 2.0 * rk.k3[i] + rk.k4[i]);
    }
    Ok(())
}

fn check_finite(state: &BodyState) -> Result<()> {
    for (i, (p, v)) in state.positions.iter().zip(&state.velocities).enumerate() {
        if !p.is_finite() || !v.is_finite() {
            return Err(Error::Diverged { node: i, t: state.t });
        }
    }
    Ok(())
}

/// Advance the state by `dt_internal` with one RK4 step. Driven nodes end the
/// step exactly on the prescribed path; their velocity comes from a central
/// finite difference of the path.
pub fn step(
    model: &BodyModel,
    params: &ExcitationParams,
    state: &BodyState,
    dt_internal: f64,
) -> Result<BodyState> {
    if dt_internal <= 0.0 {
        return Err(Error::Config(format!(
            "internal step must be > 0, got {dt_internal}"
        )));
    }
    let dim = 4 * model.nodes.len();
    let mut y = vec![0.0; dim];
    let mut rk = Rk4::new(dim);
    pack(state, &mut y);
    rk4_step(model, params, state.t, dt_internal, &mut y, &mut rk)?;
    let t_next = state.t + dt_internal;
    enforce_constraints(model, params, t_next, &mut y);
    let mut next = state.clone();
    next.t = t_next;
    unpack(&y, &mut next);
    check_finite(&next)?;
    Ok(next)
}

/// Run the full simulation from rest and record `1 + duration/record_dt`
/// states spaced `record_dt` apart. Bitwise deterministic for fixed inputs.
pub fn simulate(model: &BodyModel, params: &ExcitationParams, sim: &SimParams) -> Result<Trajectory> {
    if sim.substeps == 0 {
        return Err(Error::Config("substeps must be >= 1".into()));
    }
    if sim.record_dt <= 0.0 || sim.duration <= 0.0 {
        return Err(Error::Config(format!(
            "duration and record_dt must be > 0, got {} and {}",
            sim.duration, sim.record_dt
        )));
    }
    let steps_f = sim.duration / sim.record_dt;
    let steps = steps_f.round() as usize;
    if (sim.duration - steps as f64 * sim.record_dt).abs() > 1e-9 * sim.duration.max(1.0) {
        return Err(Error::Config(format!(
            "duration {} is not an integral multiple of record_dt {}",
            sim.duration, sim.record_dt
        )));
    }

    let n = model.nodes.len();
    let dim = 4 * n;
    let mut rk = Rk4::new(dim);
    let mut y = vec![0.0; dim];
    let mut state = model.rest_state();
    enforce_constraints_state(model, params, 0.0, &mut state);
    check_finite(&state)?;

    let mut states = Vec::with_capacity(steps + 1);
    states.push(state.clone());

    let h = sim.record_dt / sim.substeps as f64;
    pack(&state, &mut y);
    for i in 0..steps {
        let t_base = i as f64 * sim.record_dt;
        for j in 0..sim.substeps {
            let t = t_base + j as f64 * h;
            rk4_step(model, params, t, h, &mut y, &mut rk)?;
        }
        let t_rec = (i + 1) as f64 * sim.record_dt;
        enforce_constraints(model, params, t_rec, &mut y);
        state.t = t_rec;
        unpack(&y, &mut state);
        check_finite(&state)?;
        states.push(state.clone());
    }

    Ok(Trajectory {
        record_dt: sim.record_dt,
        states,
    })
}

fn enforce_constraints_state(
    model: &BodyModel,
    params: &ExcitationParams,
    t: f64,
    state: &mut BodyState,
) {
    let dx = excitation(t, params);
    let vx = excitation_velocity(t, params);
    for (i, node) in model.nodes.iter().enumerate() {
        if node.driven {
            state.positions[i] = Vec2::new(node.rest.x + dx, node.rest.y);
            state.velocities[i] = Vec2::new(vx, 0.0);
        }
    }
}

/// Kinetic plus elastic energy of a state: `Σ ½ m v² + Σ ½ k (length − rest)²`.
pub fn mechanical_energy(model: &BodyModel, state: &BodyState) -> f64 {
    let kinetic: f64 = model
        .nodes
        .iter()
        .zip(&state.velocities)
        .map(|(n, v)| 0.5 * n.mass * v.dot(*v))
        .sum();
    let elastic: f64 = model
        .elements
        .iter()
        .map(|e| {
            let length = (state.positions[e.b] - state.positions[e.a]).norm();
            0.5 * e.stiffness * (length - e.rest_length) * (length - e.rest_length)
        })
        .sum();
    kinetic + elastic
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::body::{build_body, BodyConfig};

    fn still_params() -> ExcitationParams {
        ExcitationParams {
            amplitude: 0.0,
            ..ExcitationParams::default()
        }
    }

    /// One free mass hanging on a single vertical spring below a driven anchor.
    fn oscillator(damping: f64) -> (BodyModel, ExcitationParams) {
        let cfg = BodyConfig {
            nodes: 2,
            rows: 2,
            cols: 1,
            spacing: 0.1,
            mass: 0.01,
            stiffness: 1000.0,
            damping,
            gravity: 0.0,
        };
        (build_body(&cfg).unwrap(), still_params())
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let params = still_params();
        let sim = SimParams {
            duration: 10.0,
            record_dt: 0.01,
            substeps: 10,
        };
        let traj = simulate(&model, &params, &sim).unwrap();
        let rest = model.rest_state();
        let mut max_disp = 0.0f64;
        for s in &traj.states {
            for (p, r) in s.positions.iter().zip(&rest.positions) {
                max_disp = max_disp.max((*p - *r).norm());
            }
        }
        assert!(max_disp < 1e-9, "max displacement {max_disp}");
    }

    #[test]
    fn undamped_oscillator_period_matches_analytic() {
        let (model, params) = oscillator(0.0);
        // Displace the free node axially (vertically) and time zero crossings.
        let mut state = model.rest_state();
        state.positions[1].y -= 0.01;
        let h = 1e-5;
        let expected = 2.0 * std::f64::consts::PI * (0.01f64 / 1000.0).sqrt();

        let mut crossings = Vec::new();
        let mut prev = state.positions[1].y - model.nodes[1].rest.y;
        let mut t = 0.0;
        for _ in 0..20_000 {
            state = step(&model, &params, &state, h).unwrap();
            t += h;
            let disp = state.positions[1].y - model.nodes[1].rest.y;
            if prev < 0.0 && disp >= 0.0 {
                // Linear interpolation of the crossing instant.
                let frac = prev / (prev - disp);
                crossings.push(t - h + frac * h);
            }
            prev = disp;
        }
        assert!(crossings.len() >= 3, "too few crossings: {}", crossings.len());
        let period = crossings[2] - crossings[1];
        assert!(
            (period - expected).abs() / expected < 0.01,
            "period {period} vs {expected}"
        );
    }

    #[test]
    fn damped_oscillator_envelope_decays_as_expected() {
        let (model, params) = oscillator(0.9);
        let mut state = model.rest_state();
        state.positions[1].y -= 0.01;
        let h = 1e-5;

        // Successive displacement maxima should shrink by exp(-b/(2m) * T_d).
        let gamma = 0.9 / (2.0 * 0.01);
        let omega_d = (1000.0f64 / 0.01 - gamma * gamma).sqrt();
        let expected_ratio = (-gamma * 2.0 * std::f64::consts::PI / omega_d).exp();

        let mut peaks = Vec::new();
        let mut prev2 = 0.0f64;
        let mut prev1 = 0.0f64;
        for i in 0..10_000 {
            state = step(&model, &params, &state, h).unwrap();
            let disp = (state.positions[1].y - model.nodes[1].rest.y).abs();
            if i >= 2 && prev1 > prev2 && prev1 > disp {
                peaks.push(prev1);
            }
            prev2 = prev1;
            prev1 = disp;
        }
        // |disp| peaks twice per damped period.
        assert!(peaks.len() > 6);
        let ratio = peaks[4] / peaks[2];
        assert!(
            (ratio - expected_ratio).abs() / expected_ratio < 0.05,
            "ratio {ratio} vs {expected_ratio}"
        );
    }

    #[test]
    fn simulate_records_expected_state_count() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let sim = SimParams {
            duration: 1.0,
            record_dt: 0.01,
            substeps: 20,
        };
        let traj = simulate(&model, &ExcitationParams::default(), &sim).unwrap();
        assert_eq!(traj.states.len(), 101);
        for (i, s) in traj.states.iter().enumerate() {
            assert!((s.t - i as f64 * 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_amplitude_keeps_rest_state() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let sim = SimParams {
            duration: 0.5,
            record_dt: 0.01,
            substeps: 10,
        };
        let traj = simulate(&model, &still_params(), &sim).unwrap();
        let rest = model.rest_state();
        for s in &traj.states {
            assert_eq!(s.positions, rest.positions);
        }
    }

    #[test]
    fn non_integral_duration_rejected() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let sim = SimParams {
            duration: 0.505,
            record_dt: 0.01,
            substeps: 10,
        };
        assert!(matches!(
            simulate(&model, &ExcitationParams::default(), &sim),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn energy_non_increasing_without_drive() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let params = still_params();
        // Perturb, then let the damped mesh ring down.
        let mut state = model.rest_state();
        for (i, p) in state.positions.iter_mut().enumerate() {
            if !model.nodes[i].driven {
                p.x += 0.004 * ((i % 5) as f64 - 2.0);
                p.y += 0.003 * ((i % 7) as f64 - 3.0);
            }
        }
        let h = 1e-4;
        let mut prev_energy = mechanical_energy(&model, &state);
        for i in 0..5000 {
            state = step(&model, &params, &state, h).unwrap();
            if i % 100 == 0 {
                let e = mechanical_energy(&model, &state);
                assert!(
                    e <= prev_energy * (1.0 + 1e-6),
                    "energy rose: {prev_energy} -> {e}"
                );
                prev_energy = e;
            }
        }
        assert!(prev_energy < 1e-3);
    }

    #[test]
    fn determinism_bitwise() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let sim = SimParams {
            duration: 0.2,
            record_dt: 0.01,
            substeps: 50,
        };
        let a = simulate(&model, &ExcitationParams::default(), &sim).unwrap();
        let b = simulate(&model, &ExcitationParams::default(), &sim).unwrap();
        for (sa, sb) in a.states.iter().zip(&b.states) {
            for (pa, pb) in sa.positions.iter().zip(&sb.positions) {
                assert_eq!(pa.x.to_bits(), pb.x.to_bits());
                assert_eq!(pa.y.to_bits(), pb.y.to_bits());
            }
        }
    }

    #[test]
    fn substep_halving_converges() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let params = ExcitationParams::default();
        let coarse = simulate(
            &model,
            &params,
            &SimParams {
                duration: 2.0,
                record_dt: 0.01,
                substeps: 100,
            },
        )
        .unwrap();
        let fine = simulate(
            &model,
            &params,
            &SimParams {
                duration: 2.0,
                record_dt: 0.01,
                substeps: 200,
            },
        )
        .unwrap();
        let tip = model.tip_index();
        let pa = coarse.states.last().unwrap().positions[tip];
        let pb = fine.states.last().unwrap().positions[tip];
        assert!((pa - pb).norm() < 1e-4, "tip drift {}", (pa - pb).norm());
    }
}
