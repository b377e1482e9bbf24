use crate::vec2::Vec2;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Geometry and material constants of the arm grid.
///
/// The defaults are the paper-scale arm: a slender 19×3 grid (57 nodes) at
/// 0.1 m spacing with m = 0.01 kg, k = 1000 N/m and b = 0.9 N·s/m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyConfig {
    /// Expected node count; must equal `rows * cols`.
    pub nodes: usize,
    pub rows: usize,
    pub cols: usize,
    /// Rest spacing between grid neighbours, metres.
    pub spacing: f64,
    /// Node mass, kg.
    pub mass: f64,
    /// Spring stiffness, N/m.
    pub stiffness: f64,
    /// Axial damping coefficient, N·s/m.
    pub damping: f64,
    /// Vertical gravitational acceleration, m/s² (positive pulls down).
    pub gravity: f64,
}

impl Default for BodyConfig {
    fn default() -> Self {
        BodyConfig {
            nodes: 57,
            rows: 19,
            cols: 3,
            spacing: 0.1,
            mass: 0.01,
            stiffness: 1000.0,
            damping: 0.9,
            gravity: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub mass: f64,
    pub rest: Vec2,
    pub driven: bool,
}

/// Viscous-elastic element between two nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Element {
    pub a: usize,
    pub b: usize,
    pub rest_length: f64,
    pub stiffness: f64,
    pub damping: f64,
}

/// Static description of the body: nodes plus the element graph.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyModel {
    pub nodes: Vec<Node>,
    pub elements: Vec<Element>,
    pub rows: usize,
    pub cols: usize,
    pub gravity: f64,
}

/// Positions and velocities of every node at one time instant.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyState {
    pub t: f64,
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
}

impl BodyModel {
    /// Index of node at grid coordinates (row, col). Row 0 is the driven top row.
    pub fn node_index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// State with every node at rest and zero velocity.
    pub fn rest_state(&self) -> BodyState {
        BodyState {
            t: 0.0,
            positions: self.nodes.iter().map(|n| n.rest).collect(),
            velocities: vec![Vec2::default(); self.nodes.len()],
        }
    }

    /// Index of the free tip node (bottom row, middle column).
    pub fn tip_index(&self) -> usize {
        self.node_index(self.rows - 1, self.cols / 2)
    }
}

/// Build the grid body: nodes at rest spacing, elements along rows and columns
/// plus both diagonals of every cell, rest lengths from the rest geometry.
/// The top row is flagged as driven.
pub fn build_body(cfg: &BodyConfig) -> Result<BodyModel> {
    if cfg.rows < 2 || cfg.cols < 1 {
        return Err(Error::Config(format!(
            "grid must be at least 2x1, got {}x{}",
            cfg.rows, cfg.cols
        )));
    }
    if cfg.rows * cfg.cols != cfg.nodes {
        return Err(Error::Config(format!(
            "node count {} does not equal rows*cols = {}",
            cfg.nodes,
            cfg.rows * cfg.cols
        )));
    }
    if cfg.spacing <= 0.0 {
        return Err(Error::Config(format!("spacing must be > 0, got {}", cfg.spacing)));
    }
    if cfg.mass <= 0.0 {
        return Err(Error::Config(format!("mass must be > 0, got {}", cfg.mass)));
    }
    if cfg.stiffness <= 0.0 {
        return Err(Error::Config(format!(
            "stiffness must be > 0, got {}",
            cfg.stiffness
        )));
    }
    if cfg.damping < 0.0 {
        return Err(Error::Config(format!(
            "damping must be >= 0, got {}",
            cfg.damping
        )));
    }

    let mut nodes = Vec::with_capacity(cfg.rows * cfg.cols);
    for r in 0..cfg.rows {
        for c in 0..cfg.cols {
            nodes.push(Node {
                mass: cfg.mass,
                // Arm hangs downward from the driven top row at y = 0.
                rest: Vec2::new(c as f64 * cfg.spacing, -(r as f64) * cfg.spacing),
                driven: r == 0,
            });
        }
    }

    let idx = |r: usize, c: usize| r * cfg.cols + c;
    let mut elements = Vec::new();
    let mut push = |a: usize, b: usize| {
        let rest_length = (nodes[b].rest - nodes[a].rest).norm();
        elements.push(Element {
            a,
            b,
            rest_length,
            stiffness: cfg.stiffness,
            damping: cfg.damping,
        });
    };
    for r in 0..cfg.rows {
        for c in 0..cfg.cols {
            if c + 1 < cfg.cols {
                push(idx(r, c), idx(r, c + 1));
            }
            if r + 1 < cfg.rows {
                push(idx(r, c), idx(r + 1, c));
            }
            if r + 1 < cfg.rows && c + 1 < cfg.cols {
                push(idx(r, c), idx(r + 1, c + 1));
                push(idx(r, c + 1), idx(r + 1, c));
            }
        }
    }

    Ok(BodyModel {
        nodes,
        elements,
        rows: cfg.rows,
        cols: cfg.cols,
        gravity: cfg.gravity,
    })
}

/// Axial spring-damper force exerted on node `a`; node `b` receives the
/// negation. Positive elongation pulls `a` toward `b`; the damper acts on the
/// elongation rate.
pub fn element_force(
    elem: &Element,
    pos_a: Vec2,
    pos_b: Vec2,
    vel_a: Vec2,
    vel_b: Vec2,
) -> Result<Vec2> {
    let d = pos_b - pos_a;
    let length = d.norm();
    if length <= 0.0 {
        return Err(Error::DegenerateElement { a: elem.a, b: elem.b });
    }
    let axis = d * (1.0 / length);
    let elongation_rate = (vel_b - vel_a).dot(axis);
    let magnitude = elem.stiffness * (length - elem.rest_length) + elem.damping * elongation_rate;
    Ok(axis * magnitude)
}
