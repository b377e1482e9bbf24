//! Proprioceptive stretch sensors.
//!
//! A sensor spans two nodes; its reading is the signed change of the Euclidean
//! distance between them relative to the rest geometry. Four sensors along one
//! lateral edge of the arm are the default, each covering a distinct segment.

use crate::physics::{BodyModel, BodyState, Trajectory};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Stretch sensor attached to a pair of nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StretchSensor {
    pub node_a: usize,
    pub node_b: usize,
    /// Distance between the attachment nodes in the rest geometry, metres.
    pub rest_distance: f64,
}

/// Default sensor placement: four spans along the left edge of the grid,
/// covering rows (2,5), (6,9), (10,13), (14,17).
pub const DEFAULT_SENSOR_ROWS: [(usize, usize); 4] = [(2, 5), (6, 9), (10, 13), (14, 17)];

/// Build sensors from node-index pairs, capturing rest distances from the
/// model's rest geometry.
pub fn attach_sensors(model: &BodyModel, pairs: &[(usize, usize)]) -> Result<Vec<StretchSensor>> {
    let n = model.node_count();
    pairs
        .iter()
        .map(|&(a, b)| {
            if a == b {
                return Err(Error::Config(format!("sensor endpoints equal: {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Config(format!(
                    "sensor nodes ({a}, {b}) out of range for {n} nodes"
                )));
            }
            let rest_distance = (model.nodes[b].rest - model.nodes[a].rest).norm();
            if rest_distance <= 0.0 {
                return Err(Error::Config(format!(
                    "sensor nodes ({a}, {b}) coincide at rest"
                )));
            }
            Ok(StretchSensor {
                node_a: a,
                node_b: b,
                rest_distance,
            })
        })
        .collect()
}

/// Default sensor node pairs for a given grid, on the left edge (column 0).
pub fn default_sensor_pairs(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    DEFAULT_SENSOR_ROWS
        .iter()
        .filter(|&&(a, b)| a < rows && b < rows)
        .map(|&(a, b)| (a * cols, b * cols))
        .collect()
}

/// Signed stretch: current distance minus rest distance.
pub fn read_sensor(sensor: &StretchSensor, state: &BodyState) -> f64 {
    let d = state.positions[sensor.node_b] - state.positions[sensor.node_a];
    d.norm() - sensor.rest_distance
}

/// Time series of all sensor readings, one row per recorded state.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorTrace {
    pub record_dt: f64,
    pub n_sensors: usize,
    data: Vec<f64>,
}

impl SensorTrace {
    /// Build a trace from explicit rows; rows must all have `n_sensors` values.
    pub fn from_rows(record_dt: f64, n_sensors: usize, rows: Vec<Vec<f64>>) -> SensorTrace {
        let mut data = Vec::with_capacity(rows.len() * n_sensors);
        for row in rows {
            assert_eq!(row.len(), n_sensors, "ragged sensor rows");
            data.extend_from_slice(&row);
        }
        SensorTrace {
            record_dt,
            n_sensors,
            data,
        }
    }

    pub fn len(&self) -> usize {
        if self.n_sensors == 0 {
            0
        } else {
            self.data.len() / self.n_sensors
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_sensors..(i + 1) * self.n_sensors]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_sensors)
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> SensorTrace {
        SensorTrace {
            record_dt: self.record_dt,
            n_sensors: self.n_sensors,
            data: self.data[start * self.n_sensors..end * self.n_sensors].to_vec(),
        }
    }
}

/// Sample every sensor at every recorded state. Column order follows sensor
/// order; deterministic.
pub fn sample_sensors(trajectory: &Trajectory, sensors: &[StretchSensor]) -> Result<SensorTrace> {
    if sensors.is_empty() {
        return Err(Error::Config("sensor list is empty".into()));
    }
    let n_nodes = trajectory
        .states
        .first()
        .map_or(0, |s| s.positions.len());
    for s in sensors {
        if s.node_a >= n_nodes || s.node_b >= n_nodes {
            return Err(Error::Config(format!(
                "sensor nodes ({}, {}) out of range for {n_nodes} nodes",
                s.node_a, s.node_b
            )));
        }
    }
    let mut data = Vec::with_capacity(trajectory.states.len() * sensors.len());
    for state in &trajectory.states {
        for s in sensors {
            data.push(read_sensor(s, state));
        }
    }
    Ok(SensorTrace {
        record_dt: trajectory.record_dt,
        n_sensors: sensors.len(),
        data,
    })
}

/// CSV export: header `t,s1,...,sN`, one row per state, 9 significant digits.
pub fn write_sensor_csv(trace: &SensorTrace, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push('t');
    for i in 1..=trace.n_sensors {
        let _ = write!(out, ",s{i}");
    }
    out.push('\n');
    for (i, row) in trace.rows().enumerate() {
        let _ = write!(out, "{:.8e}", i as f64 * trace.record_dt);
        for v in row {
            let _ = write!(out, ",{v:.8e}");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{build_body, simulate, BodyConfig, ExcitationParams, SimParams};
    use crate::vec2::Vec2;

    fn default_setup() -> (BodyModel, Vec<StretchSensor>) {
        let model = build_body(&BodyConfig::default()).unwrap();
        let pairs = default_sensor_pairs(19, 3);
        let sensors = attach_sensors(&model, &pairs).unwrap();
        (model, sensors)
    }

    use crate::physics::BodyModel;

    #[test]
    fn four_default_sensors_with_rest_distances() {
        let (_, sensors) = default_setup();
        assert_eq!(sensors.len(), 4);
        for s in &sensors {
            assert!((s.rest_distance - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_at_rest() {
        let (model, sensors) = default_setup();
        let rest = model.rest_state();
        for s in &sensors {
            assert_eq!(read_sensor(s, &rest), 0.0);
        }
    }

    #[test]
    fn three_four_five_scaling() {
        let sensor = StretchSensor {
            node_a: 0,
            node_b: 1,
            rest_distance: 5.0,
        };
        let state = BodyState {
            t: 0.0,
            positions: vec![Vec2::new(0.0, 0.0), Vec2::new(6.0, 8.0)],
            velocities: vec![Vec2::default(); 2],
        };
        assert!((read_sensor(&sensor, &state) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn constant_trajectory_gives_zero_trace() {
        let (model, sensors) = default_setup();
        let sim = SimParams {
            duration: 0.2,
            record_dt: 0.01,
            substeps: 10,
        };
        let params = ExcitationParams {
            amplitude: 0.0,
            ..ExcitationParams::default()
        };
        let traj = simulate(&model, &params, &sim).unwrap();
        let trace = sample_sensors(&traj, &sensors).unwrap();
        assert!(trace.rows().all(|r| r.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn trace_shape_and_recompute_oracle() {
        let (model, sensors) = default_setup();
        let sim = SimParams {
            duration: 1.0,
            record_dt: 0.01,
            substeps: 50,
        };
        let traj = simulate(&model, &ExcitationParams::default(), &sim).unwrap();
        let trace = sample_sensors(&traj, &sensors).unwrap();
        assert_eq!(trace.len(), traj.states.len());
        assert_eq!(trace.n_sensors, 4);

        // Independent recomputation from the stored positions.
        for (i, state) in traj.states.iter().enumerate() {
            for (j, s) in sensors.iter().enumerate() {
                let pa = state.positions[s.node_a];
                let pb = state.positions[s.node_b];
                let expect = ((pb.x - pa.x).powi(2) + (pb.y - pa.y).powi(2)).sqrt()
                    - s.rest_distance;
                assert!((trace.row(i)[j] - expect).abs() < 1e-12);
            }
        }

        // Geometric bound: |reading| can never exceed the trajectory-wide
        // bounding-box diagonal.
        let (mut min, mut max) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
        for state in &traj.states {
            for p in &state.positions {
                min.x = min.x.min(p.x);
                min.y = min.y.min(p.y);
                max.x = max.x.max(p.x);
                max.y = max.y.max(p.y);
            }
        }
        let diag = (max - min).norm();
        for row in trace.rows() {
            for v in row {
                assert!(v.abs() <= diag);
            }
        }
    }

    #[test]
    fn rigid_motion_invariance_and_symmetry() {
        let (model, sensors) = default_setup();
        let sim = SimParams {
            duration: 0.1,
            record_dt: 0.01,
            substeps: 20,
        };
        let traj = simulate(&model, &ExcitationParams::default(), &sim).unwrap();
        let state = traj.states.last().unwrap();

        let (c, s) = (0.6f64.cos(), 0.6f64.sin());
        let shift = Vec2::new(1.7, -2.3);
        let moved = BodyState {
            t: state.t,
            positions: state
                .positions
                .iter()
                .map(|p| Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y) + shift)
                .collect(),
            velocities: state.velocities.clone(),
        };
        for sensor in &sensors {
            let a = read_sensor(sensor, state);
            let b = read_sensor(sensor, &moved);
            assert!((a - b).abs() < 1e-12);
            let swapped = StretchSensor {
                node_a: sensor.node_b,
                node_b: sensor.node_a,
                rest_distance: sensor.rest_distance,
            };
            assert_eq!(read_sensor(&swapped, state), a);
        }
    }

    #[test]
    fn csv_export_shape() {
        let (model, sensors) = default_setup();
        let sim = SimParams {
            duration: 0.05,
            record_dt: 0.01,
            substeps: 10,
        };
        let traj = simulate(&model, &ExcitationParams::default(), &sim).unwrap();
        let trace = sample_sensors(&traj, &sensors).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sensors.csv");
        write_sensor_csv(&trace, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,s1,s2,s3,s4");
        assert_eq!(lines.len(), 1 + traj.states.len());
    }

    #[test]
    fn invalid_sensor_pairs_rejected() {
        let (model, _) = default_setup();
        assert!(attach_sensors(&model, &[(3, 3)]).is_err());
        assert!(attach_sensors(&model, &[(0, 99)]).is_err());
    }
}
