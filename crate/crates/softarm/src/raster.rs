//! Binary silhouette rendering of body states.
//!
//! Each frame is the union of the mesh's quadrilateral cells, filled by an
//! even-odd scanline pass sampled at pixel centers with a half-open boundary
//! rule. The world-to-image mapping (viewport) is computed once per dataset
//! from the whole trajectory so every state stays in frame.

use crate::ioutil::{expect_magic, read_f64, read_u32, read_u64, write_f64, write_u32, write_u64};
use crate::physics::{BodyModel, BodyState, Trajectory};
use crate::vec2::Vec2;
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const DEFAULT_WIDTH: usize = 84;
pub const DEFAULT_HEIGHT: usize = 52;

const CONTAINER_MAGIC: &[u8] = b"SSIM1";

/// Fixed world-to-image mapping for a whole dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewport {
    pub min_x: f64,
    pub min_y: f64,
    pub world_width: f64,
    pub world_height: f64,
    pub width: usize,
    pub height: usize,
}

impl Viewport {
    /// World point to continuous pixel coordinates. Row 0 is the top of the
    /// image, so the world y axis is flipped.
    pub fn to_pixel(&self, p: Vec2) -> (f64, f64) {
        let fx = (p.x - self.min_x) / self.world_width * self.width as f64;
        let fy = (self.min_y + self.world_height - p.y) / self.world_height * self.height as f64;
        (fx, fy)
    }
}

/// Axis-aligned bounding box of all node positions over the whole trajectory,
/// inflated by `margin_fraction` per side.
pub fn compute_viewport(
    trajectory: &Trajectory,
    margin_fraction: f64,
    width: usize,
    height: usize,
) -> Result<Viewport> {
    if trajectory.states.is_empty() {
        return Err(Error::Config("cannot compute viewport of an empty trajectory".into()));
    }
    if margin_fraction < 0.0 {
        return Err(Error::Config(format!(
            "margin fraction must be >= 0, got {margin_fraction}"
        )));
    }
    let mut min = Vec2::new(f64::MAX, f64::MAX);
    let mut max = Vec2::new(f64::MIN, f64::MIN);
    for state in &trajectory.states {
        for p in &state.positions {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
    }
    let bbox_w = max.x - min.x;
    let bbox_h = max.y - min.y;
    if bbox_w <= 0.0 || bbox_h <= 0.0 {
        return Err(Error::Config("degenerate trajectory bounding box".into()));
    }
    Ok(Viewport {
        min_x: min.x - margin_fraction * bbox_w,
        min_y: min.y - margin_fraction * bbox_h,
        world_width: bbox_w * (1.0 + 2.0 * margin_fraction),
        world_height: bbox_h * (1.0 + 2.0 * margin_fraction),
        width,
        height,
    })
}

/// One binary frame; pixel value 1 marks the body, row-major from the top row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl BinaryImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        BinaryImage {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn body_pixel_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 1).count()
    }

    /// Threshold probabilities (or 0/1 floats) at 0.5 into a binary image.
    pub fn from_probabilities(width: usize, height: usize, probs: &[f32]) -> BinaryImage {
        debug_assert_eq!(probs.len(), width * height);
        BinaryImage {
            width,
            height,
            pixels: probs.iter().map(|&p| u8::from(p >= 0.5)).collect(),
        }
    }

    /// Binary PGM (P5): background 0, body 255.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().map(|&p| if p == 1 { 255 } else { 0 }).collect();
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }
}

/// Fill pixels whose centers fall inside the polygon, given vertices in
/// continuous pixel coordinates. Even-odd rule; boundaries are half-open
/// (an edge crossing exactly on a pixel center includes the pixel on the
/// top/left side only), which makes shared cell borders fill exactly once.
fn fill_polygon(poly: &[(f64, f64)], image: &mut BinaryImage) {
    let mut min_fy = f64::MAX;
    let mut max_fy = f64::MIN;
    for &(_, fy) in poly {
        min_fy = min_fy.min(fy);
        max_fy = max_fy.max(fy);
    }
    let row_start = ((min_fy - 0.5).ceil().max(0.0)) as usize;
    let row_end = ((max_fy - 0.5).ceil().max(0.0) as usize).min(image.height);

    let mut crossings: Vec<f64> = Vec::with_capacity(4);
    for row in row_start..row_end {
        let yc = row as f64 + 0.5;
        crossings.clear();
        for i in 0..poly.len() {
            let (x0, y0) = poly[i];
            let (x1, y1) = poly[(i + 1) % poly.len()];
            let spans = (y0 <= yc && yc < y1) || (y1 <= yc && yc < y0);
            if spans {
                crossings.push(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in crossings.chunks_exact(2) {
            let (enter, exit) = (pair[0], pair[1]);
            let c0 = ((enter - 0.5).ceil().max(0.0)) as usize;
            let c1 = ((exit - 0.5).ceil().max(0.0) as usize).min(image.width);
            for col in c0..c1 {
                image.pixels[row * image.width + col] = 1;
            }
        }
    }
}

fn shoelace_area(quad: &[Vec2; 4]) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        let a = quad[i];
        let b = quad[(i + 1) % 4];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

/// Render one state as the filled silhouette of the mesh cells.
///
/// A cell whose signed area collapses or flips relative to the rest geometry
/// is reported as degenerate.
pub fn render_frame(state: &BodyState, model: &BodyModel, viewport: &Viewport) -> Result<BinaryImage> {
    let mut image = BinaryImage::zeros(viewport.width, viewport.height);
    let area_floor = 1e-12;
    for r in 0..model.rows.saturating_sub(1) {
        for c in 0..model.cols.saturating_sub(1) {
            let corners = [
                model.node_index(r, c),
                model.node_index(r, c + 1),
                model.node_index(r + 1, c + 1),
                model.node_index(r + 1, c),
            ];
            let quad = [
                state.positions[corners[0]],
                state.positions[corners[1]],
                state.positions[corners[2]],
                state.positions[corners[3]],
            ];
            let rest = [
                model.nodes[corners[0]].rest,
                model.nodes[corners[1]].rest,
                model.nodes[corners[2]].rest,
                model.nodes[corners[3]].rest,
            ];
            let area = shoelace_area(&quad);
            let rest_area = shoelace_area(&rest);
            if area.abs() < area_floor || area.signum() != rest_area.signum() {
                return Err(Error::DegenerateCell { row: r, col: c });
            }
            let poly: Vec<(f64, f64)> = quad.iter().map(|&p| viewport.to_pixel(p)).collect();
            fill_polygon(&poly, &mut image);
        }
    }
    Ok(image)
}

/// Ordered frames rendered from every state of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub record_dt: f64,
    pub viewport: Viewport,
    pub frames: Vec<BinaryImage>,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frames flattened to f32 rows (0.0 / 1.0), one row per frame.
    pub fn to_f32_rows(&self) -> Vec<f32> {
        let dim = self.viewport.width * self.viewport.height;
        let mut out = Vec::with_capacity(self.frames.len() * dim);
        for f in &self.frames {
            out.extend(f.pixels.iter().map(|&p| p as f32));
        }
        out
    }

    /// Write the `SSIM1` container: header plus one byte per pixel per frame
    /// (values 0 and 1), frame-major.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CONTAINER_MAGIC)?;
        write_u64(&mut w, self.frames.len() as u64)?;
        write_u32(&mut w, self.viewport.width as u32)?;
        write_u32(&mut w, self.viewport.height as u32)?;
        write_f64(&mut w, self.record_dt)?;
        write_f64(&mut w, self.viewport.min_x)?;
        write_f64(&mut w, self.viewport.min_y)?;
        write_f64(&mut w, self.viewport.world_width)?;
        write_f64(&mut w, self.viewport.world_height)?;
        for f in &self.frames {
            w.write_all(&f.pixels)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FrameSequence> {
        let mut r = BufReader::new(File::open(path)?);
        expect_magic(&mut r, CONTAINER_MAGIC, "frame container")?;
        let count = read_u64(&mut r)? as usize;
        let width = read_u32(&mut r)? as usize;
        let height = read_u32(&mut r)? as usize;
        let record_dt = read_f64(&mut r)?;
        let viewport = Viewport {
            min_x: read_f64(&mut r)?,
            min_y: read_f64(&mut r)?,
            world_width: read_f64(&mut r)?,
            world_height: read_f64(&mut r)?,
            width,
            height,
        };
        if width == 0 || height == 0 {
            return Err(Error::Format("frame container with zero dimensions".into()));
        }
        let mut frames = Vec::with_capacity(count);
        for _ in 0..count {
            let mut pixels = vec![0u8; width * height];
            r.read_exact(&mut pixels)?;
            if pixels.iter().any(|&p| p > 1) {
                return Err(Error::Format("frame pixel outside {0,1}".into()));
            }
            frames.push(BinaryImage {
                width,
                height,
                pixels,
            });
        }
        Ok(FrameSequence {
            record_dt,
            viewport,
            frames,
        })
    }
}

/// Render every state of the trajectory in order.
pub fn render_sequence(
    trajectory: &Trajectory,
    model: &BodyModel,
    viewport: &Viewport,
) -> Result<FrameSequence> {
    let mut frames = Vec::with_capacity(trajectory.states.len());
    for state in &trajectory.states {
        frames.push(render_frame(state, model, viewport)?);
    }
    Ok(FrameSequence {
        record_dt: trajectory.record_dt,
        viewport: *viewport,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{build_body, simulate, BodyConfig, BodyState, ExcitationParams, SimParams};

    fn unit_viewport(width: usize, height: usize) -> Viewport {
        Viewport {
            min_x: 0.0,
            min_y: 0.0,
            world_width: width as f64,
            world_height: height as f64,
            width,
            height,
        }
    }

    /// Independent containment oracle: even-odd ray cast along +x.
    fn point_in_polygon(px: f64, py: f64, poly: &[(f64, f64)]) -> bool {
        let mut inside = false;
        for i in 0..poly.len() {
            let (x0, y0) = poly[i];
            let (x1, y1) = poly[(i + 1) % poly.len()];
            if (y0 <= py && py < y1) || (y1 <= py && py < y0) {
                let x_cross = x0 + (py - y0) * (x1 - x0) / (y1 - y0);
                if px < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    #[test]
    fn viewport_margin_arithmetic() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let traj = Trajectory {
            record_dt: 0.01,
            states: vec![model.rest_state()],
        };
        let tight = compute_viewport(&traj, 0.0, 84, 52).unwrap();
        assert!((tight.world_width - 0.2).abs() < 1e-12);
        assert!((tight.world_height - 1.8).abs() < 1e-12);
        let padded = compute_viewport(&traj, 0.05, 84, 52).unwrap();
        assert!((padded.world_width - 0.2 * 1.10).abs() < 1e-12);
        assert!((padded.world_height - 1.8 * 1.10).abs() < 1e-12);
    }

    #[test]
    fn empty_trajectory_rejected() {
        let traj = Trajectory {
            record_dt: 0.01,
            states: vec![],
        };
        assert!(compute_viewport(&traj, 0.0, 84, 52).is_err());
    }

    #[test]
    fn moving_trajectory_stays_inside_image() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let sim = SimParams {
            duration: 2.0,
            record_dt: 0.01,
            substeps: 100,
        };
        let traj = simulate(&model, &ExcitationParams::default(), &sim).unwrap();
        let vp = compute_viewport(&traj, 0.05, 84, 52).unwrap();
        for state in &traj.states {
            for p in &state.positions {
                let (fx, fy) = vp.to_pixel(*p);
                assert!(fx >= 0.0 && fx <= 84.0);
                assert!(fy >= 0.0 && fy <= 52.0);
            }
        }
    }

    #[test]
    fn frame_always_has_4368_pixels() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let traj = Trajectory {
            record_dt: 0.01,
            states: vec![model.rest_state()],
        };
        let vp = compute_viewport(&traj, 0.05, 84, 52).unwrap();
        let img = render_frame(&model.rest_state(), &model, &vp).unwrap();
        assert_eq!(img.pixels.len(), 4368);
        assert_eq!(img.width, 84);
        assert_eq!(img.height, 52);
    }

    #[test]
    fn body_outside_viewport_renders_empty() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let vp = Viewport {
            min_x: 100.0,
            min_y: 100.0,
            world_width: 1.0,
            world_height: 1.0,
            width: 84,
            height: 52,
        };
        let img = render_frame(&model.rest_state(), &model, &vp).unwrap();
        assert_eq!(img.body_pixel_count(), 0);
    }

    #[test]
    fn filled_pixels_match_point_in_polygon_oracle() {
        // One 2x2 grid cell placed at an awkward offset inside a 20x20 image.
        let cfg = BodyConfig {
            nodes: 4,
            rows: 2,
            cols: 2,
            spacing: 7.3,
            ..BodyConfig::default()
        };
        let model = build_body(&cfg).unwrap();
        let mut state = model.rest_state();
        for p in &mut state.positions {
            p.x += 4.21;
            p.y += 11.9;
            // Shear so edges are not axis-aligned.
            p.x += 0.13 * p.y;
        }
        let vp = unit_viewport(20, 20);
        let img = render_frame(&state, &model, &vp).unwrap();
        assert!(img.body_pixel_count() > 0);

        let poly: Vec<(f64, f64)> = [0usize, 1, 3, 2]
            .iter()
            .map(|&i| vp.to_pixel(state.positions[i]))
            .collect();
        for y in 0..20 {
            for x in 0..20 {
                let expect = point_in_polygon(x as f64 + 0.5, y as f64 + 0.5, &poly);
                assert_eq!(
                    img.get(x, y) == 1,
                    expect,
                    "pixel ({x},{y}) disagreement"
                );
            }
        }
    }

    #[test]
    fn axis_aligned_unit_cell_fills_expected_block() {
        let cfg = BodyConfig {
            nodes: 4,
            rows: 2,
            cols: 2,
            spacing: 4.0,
            ..BodyConfig::default()
        };
        let model = build_body(&cfg).unwrap();
        let mut state = model.rest_state();
        // Cell spans [2,6)x[3,7) in world units; viewport is identity.
        for p in &mut state.positions {
            p.x += 2.0;
            p.y += 7.0;
        }
        let vp = unit_viewport(10, 10);
        let img = render_frame(&state, &model, &vp).unwrap();
        assert_eq!(img.body_pixel_count(), 16);
        for y in 0..10 {
            for x in 0..10 {
                let inside = (2..6).contains(&x) && (3..7).contains(&y);
                assert_eq!(img.get(x, y) == 1, inside, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn shrinking_cells_never_add_pixels() {
        let cfg = BodyConfig {
            nodes: 4,
            rows: 2,
            cols: 2,
            spacing: 11.0,
            ..BodyConfig::default()
        };
        let model = build_body(&cfg).unwrap();
        let mut state = model.rest_state();
        for p in &mut state.positions {
            p.x += 5.2;
            p.y += 13.7;
            p.x += 0.21 * p.y;
        }
        let vp = unit_viewport(24, 24);
        let big = render_frame(&state, &model, &vp).unwrap();

        let cx = state.positions.iter().map(|p| p.x).sum::<f64>() / 4.0;
        let cy = state.positions.iter().map(|p| p.y).sum::<f64>() / 4.0;
        for scale in [0.8, 0.5, 0.25] {
            let mut small_state = state.clone();
            for p in &mut small_state.positions {
                p.x = cx + (p.x - cx) * scale;
                p.y = cy + (p.y - cy) * scale;
            }
            let small = render_frame(&small_state, &model, &vp).unwrap();
            for (a, b) in small.pixels.iter().zip(&big.pixels) {
                assert!(*a <= *b, "shrunk cell added a pixel");
            }
        }
    }

    #[test]
    fn inverted_cell_reported() {
        let cfg = BodyConfig {
            nodes: 4,
            rows: 2,
            cols: 2,
            spacing: 1.0,
            ..BodyConfig::default()
        };
        let model = build_body(&cfg).unwrap();
        let mut state = model.rest_state();
        // Mirror the cell horizontally: flips orientation.
        state.positions.swap(0, 1);
        state.positions.swap(2, 3);
        let vp = unit_viewport(10, 10);
        match render_frame(&state, &model, &vp) {
            Err(Error::DegenerateCell { row: 0, col: 0 }) => {}
            other => panic!("expected degenerate cell, got {other:?}"),
        }
    }

    #[test]
    fn render_sequence_counts_and_determinism() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let sim = SimParams {
            duration: 0.3,
            record_dt: 0.01,
            substeps: 100,
        };
        let traj = simulate(&model, &ExcitationParams::default(), &sim).unwrap();
        let vp = compute_viewport(&traj, 0.05, 84, 52).unwrap();
        let a = render_sequence(&traj, &model, &vp).unwrap();
        let b = render_sequence(&traj, &model, &vp).unwrap();
        assert_eq!(a.len(), traj.states.len());
        assert_eq!(a, b);

        // Constant trajectory renders identical frames.
        let still = Trajectory {
            record_dt: 0.01,
            states: vec![model.rest_state(), model.rest_state(), model.rest_state()],
        };
        let vp2 = compute_viewport(&still, 0.05, 84, 52).unwrap();
        let seq = render_sequence(&still, &model, &vp2).unwrap();
        assert!(seq.frames.iter().all(|f| *f == seq.frames[0]));
    }

    #[test]
    fn default_arm_frames_are_8_connected() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let sim = SimParams {
            duration: 1.0,
            record_dt: 0.05,
            substeps: 500,
        };
        let traj = simulate(&model, &ExcitationParams::default(), &sim).unwrap();
        let vp = compute_viewport(&traj, 0.05, 84, 52).unwrap();
        let seq = render_sequence(&traj, &model, &vp).unwrap();
        for (i, frame) in seq.frames.iter().enumerate() {
            let total = frame.body_pixel_count();
            assert!(total > 0, "frame {i} empty");
            // Flood fill from the first body pixel over 8-neighbours.
            let start = frame.pixels.iter().position(|&p| p == 1).unwrap();
            let mut seen = vec![false; frame.pixels.len()];
            let mut stack = vec![start];
            seen[start] = true;
            let mut count = 0usize;
            while let Some(idx) = stack.pop() {
                count += 1;
                let (x, y) = (idx % 84, idx / 84);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= 84 || ny >= 52 {
                            continue;
                        }
                        let nidx = ny as usize * 84 + nx as usize;
                        if frame.pixels[nidx] == 1 && !seen[nidx] {
                            seen[nidx] = true;
                            stack.push(nidx);
                        }
                    }
                }
            }
            assert_eq!(count, total, "frame {i} disconnected");
        }
    }

    #[test]
    fn container_round_trip() {
        let model = build_body(&BodyConfig::default()).unwrap();
        let sim = SimParams {
            duration: 0.1,
            record_dt: 0.01,
            substeps: 50,
        };
        let traj = simulate(&model, &ExcitationParams::default(), &sim).unwrap();
        let vp = compute_viewport(&traj, 0.05, 84, 52).unwrap();
        let seq = render_sequence(&traj, &model, &vp).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frames.ssim");
        seq.save(&path).unwrap();
        let loaded = FrameSequence::load(&path).unwrap();
        assert_eq!(loaded, seq);
    }

    #[test]
    fn pgm_export() {
        let mut img = BinaryImage::zeros(4, 3);
        img.pixels[5] = 1;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        img.write_pgm(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n4 3\n255\n";
        assert!(bytes.starts_with(header));
        assert_eq!(bytes.len(), header.len() + 12);
        assert_eq!(bytes[header.len() + 5], 255);
        assert_eq!(bytes[header.len()], 0);
    }
}
