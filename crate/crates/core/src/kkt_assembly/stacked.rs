use std::sync::Arc;

use super::grid_op::{add_node_block, new_grid_op, GridBlockMat};
use crate::block_linalg::{Block, DenseMat};
use crate::grid_problem::{validate, Coupling, GridLQProblem, GridLayout};
use crate::vector::StageBlockVector;
use crate::Error;

/// Stacked form of a grid problem.
///
/// The equality constraints read `Ã x̃ + B̃ ũ + ω̃ = 0`, where stage row 0
/// is `-x̂_0 + γ̂` and stage row `t + 1` is
/// `-x̂_{t+1} + Â_t x̂_t + B̂_t û_t + (boundary terms at t)`.
#[derive(Clone, Debug)]
pub struct StackedSystem {
    layout: Arc<GridLayout>,
    a_hat: Vec<GridBlockMat>,
    /// `B̂_t` per node, block diagonal.
    b_hat: Vec<Vec<DenseMat>>,
    q_hat: Vec<Vec<DenseMat>>,
    r_hat: Vec<Vec<DenseMat>>,
    q_inv: Vec<Vec<DenseMat>>,
    r_inv: Vec<Vec<DenseMat>>,
    omega: StageBlockVector,
}

/// Validates `p` and assembles its stacked operators.
pub fn build_stacked(p: &GridLQProblem) -> Result<StackedSystem, Error> {
    let report = validate(p);
    if !report.is_valid() {
        return Err(Error::Validation(report));
    }
    let layout = Arc::new(GridLayout::new(p));
    let l = &*layout;
    let nodes = l.num_nodes();
    let sub = |node: usize| {
        let (i, j) = l.node_coords(node);
        p.subsystem(i, j)
    };

    let mut a_hat = Vec::with_capacity(p.t);
    for t in 0..p.t {
        let mut op = new_grid_op(l, 1, false);
        for node in 0..nodes {
            let (i, j) = l.node_coords(node);
            let s = sub(node);
            add_node_block(&mut op, l, 1, node, node, 1.0, &s.a[t]);
            for dir in Coupling::ALL {
                if let (Some((ni, nj)), Some(c)) = (dir.neighbor(i, j, p.k, p.n), s.coupling_at(dir, t)) {
                    add_node_block(&mut op, l, 1, node, l.node(ni, nj), 1.0, c);
                }
            }
        }
        a_hat.push(op);
    }

    let per_node = |f: &dyn Fn(usize) -> DenseMat| (0..nodes).map(f).collect::<Vec<_>>();
    let b_hat: Vec<_> = (0..p.t).map(|t| per_node(&|n| sub(n).b[t].clone())).collect();
    let q_hat: Vec<_> = (0..=p.t).map(|t| per_node(&|n| sub(n).q[t].clone())).collect();
    let r_hat: Vec<_> = (0..p.t).map(|t| per_node(&|n| sub(n).r[t].clone())).collect();
    let invert = |blocks: &Vec<Vec<DenseMat>>| -> Result<Vec<Vec<DenseMat>>, Error> {
        blocks.iter().map(|stage| stage.iter().map(|m| Ok(m.spd_inverse()?)).collect()).collect()
    };
    let q_inv = invert(&q_hat)?;
    let r_inv = invert(&r_hat)?;

    let mut omega = StageBlockVector::zeros(layout.clone());
    {
        let w = omega.as_mut_slice();
        for i in 0..p.k {
            for j in 0..p.n {
                let off = l.state_offset(i, j, 0);
                let g = &p.boundary.gamma[i][j];
                w[off..off + g.len()].copy_from_slice(g);
            }
        }
        for t in 0..p.t {
            for i in 0..p.k {
                for j in 0..p.n {
                    let s = p.subsystem(i, j);
                    let off = l.state_offset(i, j, t + 1);
                    for dir in Coupling::ALL {
                        if dir.neighbor(i, j, p.k, p.n).is_some() {
                            continue;
                        }
                        let (Some(c), Some(tr)) = (s.coupling_at(dir, t), p.boundary.trajectory(dir, i, j)) else {
                            continue;
                        };
                        c.gemv(1.0, &tr[t], &mut w[off..off + s.n]);
                    }
                }
            }
        }
    }

    Ok(StackedSystem { layout, a_hat, b_hat, q_hat, r_hat, q_inv, r_inv, omega })
}

impl StackedSystem {
    pub fn layout(&self) -> &Arc<GridLayout> {
        &self.layout
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon()
    }

    /// `Â_t`.
    pub fn a_hat(&self, t: usize) -> &GridBlockMat {
        &self.a_hat[t]
    }

    /// `B̂_t` block of `node`.
    pub fn b_block(&self, t: usize, node: usize) -> &DenseMat {
        &self.b_hat[t][node]
    }

    pub fn q_block(&self, t: usize, node: usize) -> &DenseMat {
        &self.q_hat[t][node]
    }

    pub fn r_block(&self, t: usize, node: usize) -> &DenseMat {
        &self.r_hat[t][node]
    }

    pub fn q_inv_block(&self, t: usize, node: usize) -> &DenseMat {
        &self.q_inv[t][node]
    }

    pub fn r_inv_block(&self, t: usize, node: usize) -> &DenseMat {
        &self.r_inv[t][node]
    }

    /// `ω̃`.
    pub fn omega(&self) -> &StageBlockVector {
        &self.omega
    }

    fn stage<'a>(&self, v: &'a [f64], t: usize) -> &'a [f64] {
        &v[self.layout.stage_range(t)]
    }

    /// `Ã x̃`.
    pub fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut y: Vec<f64> = x.iter().map(|v| -v).collect();
        for t in 0..self.horizon() {
            let r = l.stage_range(t + 1);
            self.a_hat[t].gemv_add(1.0, self.stage(x, t), &mut y[r]);
        }
        y
    }

    /// `Ãᵀ δ̃`: stage `t` is `-δ_t + Â_tᵀ δ_{t+1}`.
    pub fn apply_a_t(&self, delta: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut y: Vec<f64> = delta.iter().map(|v| -v).collect();
        for t in 0..self.horizon() {
            let r = l.stage_range(t);
            self.a_hat[t].gemv_t_add(1.0, self.stage(delta, t + 1), &mut y[r]);
        }
        y
    }

    /// `B̃ ũ`, a vector over the multiplier layout.
    pub fn apply_b(&self, u: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut y = vec![0.0; l.n_tilde()];
        for t in 0..self.horizon() {
            let base = (t + 1) * l.n_hat();
            let ubase = t * l.m_hat();
            for node in 0..l.num_nodes() {
                let (xr, ur) = (l.node_state_range(node), l.node_input_range(node));
                self.b_hat[t][node].gemv(
                    1.0,
                    &u[ubase + ur.start..ubase + ur.end],
                    &mut y[base + xr.start..base + xr.end],
                );
            }
        }
        y
    }

    /// `B̃ᵀ δ̃`: stage `t` is `B̂_tᵀ δ_{t+1}`.
    pub fn apply_b_t(&self, delta: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut y = vec![0.0; l.m_tilde()];
        for t in 0..self.horizon() {
            let base = (t + 1) * l.n_hat();
            let ubase = t * l.m_hat();
            for node in 0..l.num_nodes() {
                let (xr, ur) = (l.node_state_range(node), l.node_input_range(node));
                self.b_hat[t][node].gemv_t(
                    1.0,
                    &delta[base + xr.start..base + xr.end],
                    &mut y[ubase + ur.start..ubase + ur.end],
                );
            }
        }
        y
    }

    fn apply_state_diag(&self, blocks: &[Vec<DenseMat>], x: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut y = vec![0.0; x.len()];
        for (t, stage) in blocks.iter().enumerate() {
            let base = t * l.n_hat();
            for (node, m) in stage.iter().enumerate() {
                let r = l.node_state_range(node);
                m.gemv(1.0, &x[base + r.start..base + r.end], &mut y[base + r.start..base + r.end]);
            }
        }
        y
    }

    fn apply_input_diag(&self, blocks: &[Vec<DenseMat>], u: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut y = vec![0.0; u.len()];
        for (t, stage) in blocks.iter().enumerate() {
            let base = t * l.m_hat();
            for (node, m) in stage.iter().enumerate() {
                let r = l.node_input_range(node);
                m.gemv(1.0, &u[base + r.start..base + r.end], &mut y[base + r.start..base + r.end]);
            }
        }
        y
    }

    pub fn apply_q(&self, x: &[f64]) -> Vec<f64> {
        self.apply_state_diag(&self.q_hat, x)
    }

    pub fn apply_q_inv(&self, x: &[f64]) -> Vec<f64> {
        self.apply_state_diag(&self.q_inv, x)
    }

    pub fn apply_r(&self, u: &[f64]) -> Vec<f64> {
        self.apply_input_diag(&self.r_hat, u)
    }

    pub fn apply_r_inv(&self, u: &[f64]) -> Vec<f64> {
        self.apply_input_diag(&self.r_inv, u)
    }

    /// Dense `Â_t` (tests and diagnostics).
    pub fn densify_a_hat(&self, t: usize) -> DenseMat {
        self.a_hat[t].to_dense()
    }
}
