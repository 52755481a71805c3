//! Grid LQ problem instances: data model, validation, layout and generators.
//!
//! Indices are zero-based throughout: subsystem `(i, j)` sits in grid row
//! `i ∈ 0..K` and column `j ∈ 0..N`. The dynamics of `(i, j)` are
//!
//! ```text
//! x[i,j,t+1] = A x[i,j,t] + B u[i,j,t]
//!            + E x[i,j-1,t] + F x[i,j+1,t] + G x[i-1,j,t] + H x[i+1,j,t]
//! ```
//!
//! where a neighbour outside the grid is replaced by the corresponding
//! boundary trajectory.

mod generators;
pub mod io;
mod layout;
mod validate;

use serde::{Deserialize, Serialize};

use crate::block_linalg::DenseMat;

pub use generators::{generate_case1_msd, generate_case2_irrigation, CASE1_STEP, CASE2_COUPLING_GAIN};
pub use layout::{state_offsets, GridLayout, PairLayout};
pub use validate::{validate, ValidationReport, Violation, ViolationKind};

/// Neighbour direction of a coupling block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Coupling {
    /// `E`, multiplies the state of `(i, j-1)`.
    Left,
    /// `F`, multiplies the state of `(i, j+1)`.
    Right,
    /// `G`, multiplies the state of `(i-1, j)`.
    Up,
    /// `H`, multiplies the state of `(i+1, j)`.
    Down,
}

impl Coupling {
    pub const ALL: [Coupling; 4] = [Coupling::Left, Coupling::Right, Coupling::Up, Coupling::Down];

    pub fn symbol(self) -> &'static str {
        match self {
            Coupling::Left => "E",
            Coupling::Right => "F",
            Coupling::Up => "G",
            Coupling::Down => "H",
        }
    }

    /// Neighbour of `(i, j)` in this direction, if it lies inside a `K x N` grid.
    pub fn neighbor(self, i: usize, j: usize, k: usize, n: usize) -> Option<(usize, usize)> {
        match self {
            Coupling::Left => j.checked_sub(1).map(|j| (i, j)),
            Coupling::Right => (j + 1 < n).then_some((i, j + 1)),
            Coupling::Up => i.checked_sub(1).map(|i| (i, j)),
            Coupling::Down => (i + 1 < k).then_some((i + 1, j)),
        }
    }
}

/// Per-subsystem dynamics and cost data.
///
/// Time-indexed lists have length `T` except `q`, which has `T + 1` entries
/// (there is no input at the final stage).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsystemData {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<DenseMat>,
    #[serde(rename = "B")]
    pub b: Vec<DenseMat>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<DenseMat>>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<DenseMat>>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<DenseMat>>,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<DenseMat>>,
    #[serde(rename = "Q")]
    pub q: Vec<DenseMat>,
    #[serde(rename = "R")]
    pub r: Vec<DenseMat>,
}

impl SubsystemData {
    pub fn coupling(&self, dir: Coupling) -> Option<&Vec<DenseMat>> {
        match dir {
            Coupling::Left => self.e.as_ref(),
            Coupling::Right => self.f.as_ref(),
            Coupling::Up => self.g.as_ref(),
            Coupling::Down => self.h.as_ref(),
        }
    }

    pub fn coupling_mut(&mut self, dir: Coupling) -> &mut Option<Vec<DenseMat>> {
        match dir {
            Coupling::Left => &mut self.e,
            Coupling::Right => &mut self.f,
            Coupling::Up => &mut self.g,
            Coupling::Down => &mut self.h,
        }
    }

    /// Coupling block at time `t`; absent blocks read as `None`.
    pub fn coupling_at(&self, dir: Coupling, t: usize) -> Option<&DenseMat> {
        self.coupling(dir).and_then(|v| v.get(t))
    }
}

/// Boundary state trajectory: one vector per time step `0..=T`.
pub type Trajectory = Vec<Vec<f64>>;

/// Spatial boundary trajectories and initial states.
///
/// `alpha_under[j]` is the state above row 0 in column `j`, `alpha_over[j]`
/// the state below row `K-1`; `beta_under[i]` lies left of column 0 and
/// `beta_over[i]` right of column `N-1`. A missing trajectory reads as zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    #[serde(default)]
    pub alpha_under: Vec<Option<Trajectory>>,
    #[serde(default)]
    pub alpha_over: Vec<Option<Trajectory>>,
    #[serde(default)]
    pub beta_under: Vec<Option<Trajectory>>,
    #[serde(default)]
    pub beta_over: Vec<Option<Trajectory>>,
    /// Initial states, indexed `[i][j]`.
    pub gamma: Vec<Vec<Vec<f64>>>,
}

impl BoundaryData {
    /// Boundary trajectory seen by `(i, j)` in direction `dir` when the
    /// neighbour lies outside the grid.
    pub fn trajectory(&self, dir: Coupling, i: usize, j: usize) -> Option<&Trajectory> {
        let slot = match dir {
            Coupling::Left => self.beta_under.get(i),
            Coupling::Right => self.beta_over.get(i),
            Coupling::Up => self.alpha_under.get(j),
            Coupling::Down => self.alpha_over.get(j),
        };
        slot.and_then(|t| t.as_ref())
    }
}

/// A complete grid LQ optimal control instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridLQProblem {
    /// Grid rows `K`.
    #[serde(rename = "K")]
    pub k: usize,
    /// Grid columns `N`.
    #[serde(rename = "N")]
    pub n: usize,
    /// Horizon length `T`.
    #[serde(rename = "T")]
    pub t: usize,
    /// Subsystems indexed `[i][j]`.
    pub subsystems: Vec<Vec<SubsystemData>>,
    pub boundary: BoundaryData,
}

impl GridLQProblem {
    pub fn subsystem(&self, i: usize, j: usize) -> &SubsystemData {
        &self.subsystems[i][j]
    }

    pub fn subsystem_mut(&mut self, i: usize, j: usize) -> &mut SubsystemData {
        &mut self.subsystems[i][j]
    }

    /// Signal multiplied by the `dir` coupling of `(i, j)` at time `t`: the
    /// neighbour state from `states` or the boundary trajectory (zero when
    /// not supplied). `states` is indexed `[i][j]`.
    pub fn coupled_signal(&self, dir: Coupling, i: usize, j: usize, t: usize, states: &[Vec<Vec<f64>>]) -> Vec<f64> {
        match dir.neighbor(i, j, self.k, self.n) {
            Some((ni, nj)) => states[ni][nj].clone(),
            None => {
                let cols = self.subsystems[i][j].coupling_at(dir, t).map_or(0, |m| m.cols());
                self.boundary
                    .trajectory(dir, i, j)
                    .and_then(|tr| tr.get(t).cloned())
                    .unwrap_or_else(|| vec![0.0; cols])
            }
        }
    }

    /// Sets every boundary trajectory and initial state to zero.
    pub fn clear_boundary_and_initial(&mut self) {
        let b = &mut self.boundary;
        b.alpha_under.clear();
        b.alpha_over.clear();
        b.beta_under.clear();
        b.beta_over.clear();
        for row in &mut b.gamma {
            for g in row {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    /// Total number of scalar multipliers (rows of the Schur system).
    pub fn num_multipliers(&self) -> usize {
        let n_hat: usize = self.subsystems.iter().flatten().map(|s| s.n).sum();
        n_hat * (self.t + 1)
    }
}
