//! Dense KKT oracle built directly from the problem data, independent of
//! the structured assembly.

use std::sync::Arc;

use crate::block_linalg::{cholesky_solve_in_place, dense_cholesky, DenseMat};
use crate::grid_problem::{validate, Coupling, GridLQProblem, GridLayout};
use crate::kkt_assembly::check_guard;
use crate::vector::StageBlockVector;
use crate::Error;

use super::TrajectorySolution;

/// Dense `Ã`, `B̃`, `Q̃`, `R̃`, `ω̃` of a problem.
#[derive(Clone, Debug)]
pub struct DenseKkt {
    pub a: DenseMat,
    pub b: DenseMat,
    pub q: DenseMat,
    pub r: DenseMat,
    pub omega: Vec<f64>,
}

struct Offsets {
    node_state: Vec<usize>,
    node_input: Vec<usize>,
    n_hat: usize,
    m_hat: usize,
}

fn offsets(p: &GridLQProblem) -> Offsets {
    let (mut node_state, mut node_input) = (Vec::new(), Vec::new());
    let (mut ns, mut nu) = (0, 0);
    for j in 0..p.n {
        for i in 0..p.k {
            node_state.push(ns);
            node_input.push(nu);
            ns += p.subsystem(i, j).n;
            nu += p.subsystem(i, j).m;
        }
    }
    Offsets { node_state, node_input, n_hat: ns, m_hat: nu }
}

/// Assembles the dense constraint `Ã x̃ + B̃ ũ + ω̃ = 0` and cost matrices.
pub fn dense_kkt(p: &GridLQProblem, guard: usize) -> Result<DenseKkt, Error> {
    let report = validate(p);
    if !report.is_valid() {
        return Err(Error::Validation(report));
    }
    let o = offsets(p);
    let nt = o.n_hat * (p.t + 1);
    let mt = o.m_hat * p.t;
    check_guard(nt, guard)?;
    let xo = |i: usize, j: usize, t: usize| t * o.n_hat + o.node_state[j * p.k + i];
    let uo = |i: usize, j: usize, t: usize| t * o.m_hat + o.node_input[j * p.k + i];

    let mut a = DenseMat::zeros(nt, nt);
    let mut b = DenseMat::zeros(nt, mt);
    let mut q = DenseMat::zeros(nt, nt);
    let mut r = DenseMat::zeros(mt, mt);
    let mut omega = vec![0.0; nt];
    for i in 0..p.k {
        for j in 0..p.n {
            let s = p.subsystem(i, j);
            for t in 0..=p.t {
                let row = xo(i, j, t);
                a.set_submatrix(row, row, &DenseMat::identity(s.n).scaled(-1.0));
                q.set_submatrix(row, row, &s.q[t]);
            }
            omega[xo(i, j, 0)..xo(i, j, 0) + s.n].copy_from_slice(&p.boundary.gamma[i][j]);
            for t in 0..p.t {
                let row = xo(i, j, t + 1);
                a.add_submatrix(row, xo(i, j, t), 1.0, &s.a[t]);
                b.set_submatrix(row, uo(i, j, t), &s.b[t]);
                r.set_submatrix(uo(i, j, t), uo(i, j, t), &s.r[t]);
                for dir in Coupling::ALL {
                    let Some(c) = s.coupling_at(dir, t) else { continue };
                    match dir.neighbor(i, j, p.k, p.n) {
                        Some((ni, nj)) => a.add_submatrix(row, xo(ni, nj, t), 1.0, c),
                        None => {
                            if let Some(tr) = p.boundary.trajectory(dir, i, j) {
                                let v = c.mul_vec(&tr[t]);
                                for (k, val) in v.into_iter().enumerate() {
                                    omega[row + k] += val;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(DenseKkt { a, b, q, r, omega })
}

impl DenseKkt {
    /// `Ã Q̃⁻¹ Ãᵀ + B̃ R̃⁻¹ B̃ᵀ`.
    pub fn schur(&self) -> Result<DenseMat, Error> {
        let qi = self.q.spd_inverse()?;
        let ri = self.r.spd_inverse()?;
        let mut d = self.a.matmul(&qi).matmul_transposed(&self.a);
        d.axpy(1.0, &self.b.matmul(&ri).matmul_transposed(&self.b));
        Ok(d)
    }
}

/// Direct solve of the dense KKT system through its Schur complement.
pub fn dense_reference_solve(p: &GridLQProblem, guard: usize) -> Result<TrajectorySolution, Error> {
    let kkt = dense_kkt(p, guard)?;
    let delta_mat = kkt.schur()?;
    let l = dense_cholesky(&delta_mat)?;
    let mut delta = kkt.omega.clone();
    cholesky_solve_in_place(&l, &mut delta);

    let qi = kkt.q.spd_inverse()?;
    let ri = kkt.r.spd_inverse()?;
    let atd = kkt.a.transpose().mul_vec(&delta);
    let btd = kkt.b.transpose().mul_vec(&delta);
    let x: Vec<f64> = qi.mul_vec(&atd).into_iter().map(|v| -v).collect();
    let u: Vec<f64> = ri.mul_vec(&btd).into_iter().map(|v| -v).collect();
    let qx = kkt.q.mul_vec(&x);
    let ru = kkt.r.mul_vec(&u);
    let objective = 0.5
        * (x.iter().zip(&qx).map(|(a, b)| a * b).sum::<f64>() + u.iter().zip(&ru).map(|(a, b)| a * b).sum::<f64>());

    let layout = Arc::new(GridLayout::new(p));
    let delta = StageBlockVector::from_vec(layout.clone(), delta)?;
    Ok(TrajectorySolution::from_stacked(&layout, &x, &u, delta, objective))
}
