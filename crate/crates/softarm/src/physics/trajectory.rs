use super::body::BodyState;
use super::excitation::ExcitationParams;
use crate::ioutil::{expect_magic, read_f64, read_u32, read_u64, write_f64, write_u32, write_u64};
use crate::vec2::Vec2;
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8] = b"SSTJ1";

/// Recorded simulation output: states equally spaced by `record_dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub record_dt: f64,
    pub states: Vec<BodyState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Copy of the first `n` states; used to drop the trailing endpoint state
    /// before frames and sensor rows are aligned downstream.
    pub fn truncated(&self, n: usize) -> Trajectory {
        Trajectory {
            record_dt: self.record_dt,
            states: self.states[..n.min(self.states.len())].to_vec(),
        }
    }

    /// Write the `SSTJ1` container: header, then per state the node positions
    /// followed by node velocities as little-endian f64 pairs.
    pub fn save(
        &self,
        path: &Path,
        excitation: &ExcitationParams,
        body_hash: &[u8; 32],
    ) -> Result<()> {
        let node_count = self.states.first().map_or(0, |s| s.positions.len());
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        write_u32(&mut w, node_count as u32)?;
        write_u64(&mut w, self.states.len() as u64)?;
        write_f64(&mut w, self.record_dt)?;
        write_f64(&mut w, excitation.amplitude)?;
        write_f64(&mut w, excitation.f1)?;
        write_f64(&mut w, excitation.f2)?;
        write_f64(&mut w, excitation.f3)?;
        w.write_all(body_hash)?;
        for state in &self.states {
            for p in &state.positions {
                write_f64(&mut w, p.x)?;
                write_f64(&mut w, p.y)?;
            }
            for v in &state.velocities {
                write_f64(&mut w, v.x)?;
                write_f64(&mut w, v.y)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read a container written by [`Trajectory::save`]. Returns the
    /// trajectory together with the stored excitation parameters and body hash.
    pub fn load(path: &Path) -> Result<(Trajectory, ExcitationParams, [u8; 32])> {
        let mut r = BufReader::new(File::open(path)?);
        expect_magic(&mut r, MAGIC, "trajectory container")?;
        let node_count = read_u32(&mut r)? as usize;
        let state_count = read_u64(&mut r)? as usize;
        let record_dt = read_f64(&mut r)?;
        let excitation = ExcitationParams {
            amplitude: read_f64(&mut r)?,
            f1: read_f64(&mut r)?,
            f2: read_f64(&mut r)?,
            f3: read_f64(&mut r)?,
        };
        let mut body_hash = [0u8; 32];
        r.read_exact(&mut body_hash)?;

        if node_count == 0 || state_count == 0 {
            return Err(Error::Format("trajectory container is empty".into()));
        }
        let mut states = Vec::with_capacity(state_count);
        for i in 0..state_count {
            let mut state = BodyState {
                t: i as f64 * record_dt,
                positions: Vec::with_capacity(node_count),
                velocities: Vec::with_capacity(node_count),
            };
            for _ in 0..node_count {
                let x = read_f64(&mut r)?;
                let y = read_f64(&mut r)?;
                state.positions.push(Vec2::new(x, y));
            }
            for _ in 0..node_count {
                let x = read_f64(&mut r)?;
                let y = read_f64(&mut r)?;
                state.velocities.push(Vec2::new(x, y));
            }
            states.push(state);
        }
        Ok((Trajectory { record_dt, states }, excitation, body_hash))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::body::{build_body, BodyConfig};
    use crate::physics::sim::{simulate, SimParams};

    #[test]
    fn container_round_trip_is_exact() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let params = ExcitationParams::default();
        let sim = SimParams {
            duration: 0.1,
            record_dt: 0.01,
            substeps: 20,
        };
        let traj = simulate(&model, &params, &sim).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.sstj");
        let hash = [7u8; 32];
        traj.save(&path, &params, &hash).unwrap();
        let (loaded, p2, h2) = Trajectory::load(&path).unwrap();
        assert_eq!(p2, params);
        assert_eq!(h2, hash);
        assert_eq!(loaded.states.len(), traj.states.len());
        for (a, b) in loaded.states.iter().zip(&traj.states) {
            for (pa, pb) in a.positions.iter().zip(&b.positions) {
                assert_eq!(pa.x.to_bits(), pb.x.to_bits());
                assert_eq!(pa.y.to_bits(), pb.y.to_bits());
            }
            for (va, vb) in a.velocities.iter().zip(&b.velocities) {
                assert_eq!(va.x.to_bits(), vb.x.to_bits());
                assert_eq!(va.y.to_bits(), vb.y.to_bits());
            }
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.sstj");
        std::fs::write(&path, b"NOPE!xxxxxxxxxxxxxxxxxxxxxxxx").unwrap();
        assert!(matches!(Trajectory::load(&path), Err(Error::Format(_))));
    }
}
