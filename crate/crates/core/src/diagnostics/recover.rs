use serde::Serialize;

use crate::block_linalg::dot;
use crate::grid_problem::{Coupling, GridLQProblem, GridLayout};
use crate::kkt_assembly::StackedSystem;
use crate::vector::{norm_inf, StageBlockVector};

/// Primal trajectory recovered from the multipliers.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySolution {
    /// `x[i][j][t]`, `t ∈ 0..=T`.
    pub x: Vec<Vec<Vec<Vec<f64>>>>,
    /// `u[i][j][t]`, `t ∈ 0..T`.
    pub u: Vec<Vec<Vec<Vec<f64>>>>,
    pub delta: StageBlockVector,
    pub objective_value: f64,
}

impl TrajectorySolution {
    /// Builds the solution from stacked `x̃`, `ũ` in the layout order.
    pub fn from_stacked(layout: &GridLayout, x: &[f64], u: &[f64], delta: StageBlockVector, objective: f64) -> Self {
        let (k, n, horizon) = (layout.rows(), layout.cols(), layout.horizon());
        let mut xs = vec![vec![Vec::with_capacity(horizon + 1); n]; k];
        let mut us = vec![vec![Vec::with_capacity(horizon); n]; k];
        for i in 0..k {
            for j in 0..n {
                let nx = layout.state_dim(i, j);
                let nu = layout.input_dim(i, j);
                for t in 0..=horizon {
                    let o = layout.state_offset(i, j, t);
                    xs[i][j].push(x[o..o + nx].to_vec());
                    if let Some(o) = layout.input_offset(i, j, t) {
                        us[i][j].push(u[o..o + nu].to_vec());
                    }
                }
            }
        }
        Self { x: xs, u: us, delta, objective_value: objective }
    }

    /// Stacked `x̃` in the layout order.
    pub fn stacked_x(&self, layout: &GridLayout) -> Vec<f64> {
        let mut out = vec![0.0; layout.n_tilde()];
        for i in 0..layout.rows() {
            for j in 0..layout.cols() {
                for t in 0..=layout.horizon() {
                    let o = layout.state_offset(i, j, t);
                    out[o..o + layout.state_dim(i, j)].copy_from_slice(&self.x[i][j][t]);
                }
            }
        }
        out
    }

    /// Stacked `ũ` in the layout order.
    pub fn stacked_u(&self, layout: &GridLayout) -> Vec<f64> {
        let mut out = vec![0.0; layout.m_tilde()];
        for i in 0..layout.rows() {
            for j in 0..layout.cols() {
                for t in 0..layout.horizon() {
                    let o = layout.input_offset(i, j, t).unwrap();
                    out[o..o + layout.input_dim(i, j)].copy_from_slice(&self.u[i][j][t]);
                }
            }
        }
        out
    }
}

/// `x̃ = -Q̃⁻¹ Ãᵀ δ̃`, `ũ = -R̃⁻¹ B̃ᵀ δ̃` and the objective `½ Σ (x'Qx + u'Ru)`.
pub fn recover_solution(s: &StackedSystem, delta: &StageBlockVector) -> TrajectorySolution {
    let d = delta.as_slice();
    let mut x = s.apply_q_inv(&s.apply_a_t(d));
    x.iter_mut().for_each(|v| *v = -*v);
    let mut u = s.apply_r_inv(&s.apply_b_t(d));
    u.iter_mut().for_each(|v| *v = -*v);
    let objective = 0.5 * (dot(&x, &s.apply_q(&x)) + dot(&u, &s.apply_r(&u)));
    TrajectorySolution::from_stacked(s.layout(), &x, &u, delta.clone(), objective)
}

/// ∞-norms of the three optimality residuals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KktResiduals {
    /// `Q̃ x̃ + Ãᵀ δ̃`.
    pub stationarity_x: f64,
    /// `R̃ ũ + B̃ᵀ δ̃`.
    pub stationarity_u: f64,
    /// `Ã x̃ + B̃ ũ + ω̃`.
    pub primal: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity_x.max(self.stationarity_u).max(self.primal)
    }
}

pub fn kkt_residual(s: &StackedSystem, sol: &TrajectorySolution) -> KktResiduals {
    let l = s.layout();
    let x = sol.stacked_x(l);
    let u = sol.stacked_u(l);
    let d = sol.delta.as_slice();
    let add = |a: Vec<f64>, b: Vec<f64>| a.into_iter().zip(b).map(|(p, q)| p + q).collect::<Vec<_>>();
    let rx = add(s.apply_q(&x), s.apply_a_t(d));
    let ru = add(s.apply_r(&u), s.apply_b_t(d));
    let rp = add(add(s.apply_a(&x), s.apply_b(&u)), s.omega().as_slice().to_vec());
    KktResiduals { stationarity_x: norm_inf(&rx), stationarity_u: norm_inf(&ru), primal: norm_inf(&rp) }
}

/// Simulates the recovered inputs through the subsystem dynamics from the
/// initial states; returns the simulated `x[i][j][t]`.
pub fn forward_simulate(p: &GridLQProblem, u: &[Vec<Vec<Vec<f64>>>]) -> Vec<Vec<Vec<Vec<f64>>>> {
    let mut x: Vec<Vec<Vec<Vec<f64>>>> =
        (0..p.k).map(|i| (0..p.n).map(|j| vec![p.boundary.gamma[i][j].clone()]).collect()).collect();
    for t in 0..p.t {
        let current: Vec<Vec<Vec<f64>>> =
            (0..p.k).map(|i| (0..p.n).map(|j| x[i][j][t].clone()).collect()).collect();
        for i in 0..p.k {
            for j in 0..p.n {
                let s = p.subsystem(i, j);
                let mut next = s.a[t].mul_vec(&current[i][j]);
                let bu = s.b[t].mul_vec(&u[i][j][t]);
                next.iter_mut().zip(&bu).for_each(|(a, b)| *a += b);
                for dir in Coupling::ALL {
                    if let Some(c) = s.coupling_at(dir, t) {
                        let sig = p.coupled_signal(dir, i, j, t, &current);
                        let cv = c.mul_vec(&sig);
                        next.iter_mut().zip(&cv).for_each(|(a, b)| *a += b);
                    }
                }
                x[i][j].push(next);
            }
        }
    }
    x
}

/// Largest ∞-norm gap between two `x[i][j][t]` trajectories.
pub fn trajectory_gap(a: &[Vec<Vec<Vec<f64>>>], b: &[Vec<Vec<Vec<f64>>>]) -> f64 {
    let mut gap: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (ca, cb) in ra.iter().zip(rb) {
            for (va, vb) in ca.iter().zip(cb) {
                for (x, y) in va.iter().zip(vb) {
                    gap = gap.max((x - y).abs());
                }
            }
        }
    }
    gap
}
