use std::fmt;

use serde::Serialize;

use super::{Coupling, GridLQProblem};
use crate::block_linalg::{dense_cholesky, DenseMat};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// A cost matrix is not symmetric positive definite.
    NotPositiveDefinite,
    /// A matrix or vector has the wrong shape or a list the wrong length.
    Dimension,
    /// Grid-level structural problem (sizes, boundary data without coupling).
    Structure,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Zero-based `(i, j)` of the offending subsystem, if any.
    pub subsystem: Option<(usize, usize)>,
    pub time: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.kind)?;
        if let Some((i, j)) = self.subsystem {
            write!(f, " at ({i}, {j})")?;
        }
        if let Some(t) = self.time {
            write!(f, " t={t}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Every invariant violation found in a problem; empty means valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, subsystem: Option<(usize, usize)>, time: Option<usize>, detail: String) {
        self.violations.push(Violation { kind, subsystem, time, detail });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

fn check_shape(
    rep: &mut ValidationReport,
    at: (usize, usize),
    t: usize,
    name: &str,
    m: &DenseMat,
    rows: usize,
    cols: usize,
) -> bool {
    if m.rows() != rows || m.cols() != cols || m.as_slice().len() != rows * cols {
        rep.push(
            ViolationKind::Dimension,
            Some(at),
            Some(t),
            format!("{name} is {}x{}, expected {rows}x{cols}", m.rows(), m.cols()),
        );
        return false;
    }
    true
}

fn check_spd(rep: &mut ValidationReport, at: (usize, usize), t: usize, name: &str, m: &DenseMat) {
    if !m.is_symmetric(SYMMETRY_TOL) {
        rep.push(ViolationKind::NotPositiveDefinite, Some(at), Some(t), format!("{name} is not symmetric"));
    } else if m.rows() > 0 && dense_cholesky(m).is_err() {
        rep.push(ViolationKind::NotPositiveDefinite, Some(at), Some(t), format!("{name} is not positive definite"));
    }
}

fn check_list_len(rep: &mut ValidationReport, at: (usize, usize), name: &str, len: usize, expected: usize) -> bool {
    if len != expected {
        rep.push(ViolationKind::Dimension, Some(at), None, format!("{name} has {len} time entries, expected {expected}"));
        return false;
    }
    true
}

/// Checks every structural, dimensional and definiteness assumption of a
/// grid problem and reports all violations found.
pub fn validate(p: &GridLQProblem) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if p.k == 0 || p.n == 0 || p.t == 0 {
        rep.push(
            ViolationKind::Structure,
            None,
            None,
            format!("grid sizes must be positive (K={}, N={}, T={})", p.k, p.n, p.t),
        );
        return rep;
    }
    if p.subsystems.len() != p.k || p.subsystems.iter().any(|row| row.len() != p.n) {
        rep.push(ViolationKind::Structure, None, None, format!("subsystem table is not {}x{}", p.k, p.n));
        return rep;
    }
    let horizon = p.t;

    for i in 0..p.k {
        for j in 0..p.n {
            let s = &p.subsystems[i][j];
            let at = (i, j);
            let (n, m) = (s.n, s.m);
            if check_list_len(&mut rep, at, "A", s.a.len(), horizon) {
                for (t, a) in s.a.iter().enumerate() {
                    check_shape(&mut rep, at, t, "A", a, n, n);
                }
            }
            if check_list_len(&mut rep, at, "B", s.b.len(), horizon) {
                for (t, b) in s.b.iter().enumerate() {
                    check_shape(&mut rep, at, t, "B", b, n, m);
                }
            }
            if check_list_len(&mut rep, at, "Q", s.q.len(), horizon + 1) {
                for (t, q) in s.q.iter().enumerate() {
                    if check_shape(&mut rep, at, t, "Q", q, n, n) {
                        check_spd(&mut rep, at, t, "Q", q);
                    }
                }
            }
            if check_list_len(&mut rep, at, "R", s.r.len(), horizon) {
                for (t, r) in s.r.iter().enumerate() {
                    if check_shape(&mut rep, at, t, "R", r, m, m) {
                        check_spd(&mut rep, at, t, "R", r);
                    }
                }
            }

            for dir in Coupling::ALL {
                let neighbor = dir.neighbor(i, j, p.k, p.n);
                let boundary = p.boundary.trajectory(dir, i, j);
                let Some(blocks) = s.coupling(dir) else {
                    if neighbor.is_none() && boundary.is_some() {
                        rep.push(
                            ViolationKind::Structure,
                            Some(at),
                            None,
                            format!("boundary trajectory supplied for {} but no coupling block", dir.symbol()),
                        );
                    }
                    continue;
                };
                if !check_list_len(&mut rep, at, dir.symbol(), blocks.len(), horizon) {
                    continue;
                }
                let cols = match neighbor {
                    Some((ni, nj)) => p.subsystems[ni][nj].n,
                    None => blocks.first().map_or(0, |b| b.cols()),
                };
                for (t, blk) in blocks.iter().enumerate() {
                    check_shape(&mut rep, at, t, dir.symbol(), blk, n, cols);
                }
                if let (None, Some(tr)) = (neighbor, boundary) {
                    if tr.len() != horizon + 1 {
                        rep.push(
                            ViolationKind::Dimension,
                            Some(at),
                            None,
                            format!("boundary trajectory for {} spans {} steps, expected {}", dir.symbol(), tr.len(), horizon + 1),
                        );
                    }
                    for (t, v) in tr.iter().enumerate() {
                        if v.len() != cols {
                            rep.push(
                                ViolationKind::Dimension,
                                Some(at),
                                Some(t),
                                format!("boundary vector for {} has length {}, expected {cols}", dir.symbol(), v.len()),
                            );
                        }
                    }
                }
            }
        }
    }

    let b = &p.boundary;
    for (name, len, expected) in [
        ("alpha_under", b.alpha_under.len(), p.n),
        ("alpha_over", b.alpha_over.len(), p.n),
        ("beta_under", b.beta_under.len(), p.k),
        ("beta_over", b.beta_over.len(), p.k),
    ] {
        if len != 0 && len != expected {
            rep.push(
                ViolationKind::Dimension,
                None,
                None,
                format!("{name} has {len} entries, expected 0 or {expected}"),
            );
        }
    }
    if b.gamma.len() != p.k || b.gamma.iter().any(|row| row.len() != p.n) {
        rep.push(ViolationKind::Dimension, None, None, format!("gamma is not {}x{}", p.k, p.n));
    } else {
        for i in 0..p.k {
            for j in 0..p.n {
                let expected = p.subsystems[i][j].n;
                if b.gamma[i][j].len() != expected {
                    rep.push(
                        ViolationKind::Dimension,
                        Some((i, j)),
                        Some(0),
                        format!("gamma has length {}, expected {expected}", b.gamma[i][j].len()),
                    );
                }
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_problem::generate_case1_msd;

    #[test]
    fn generated_case_is_valid() {
        let p = generate_case1_msd(2, 2, 2, 0);
        let rep = validate(&p);
        assert!(rep.is_valid(), "{rep}");
    }

    #[test]
    fn negative_q_is_reported() {
        let mut p = generate_case1_msd(2, 2, 2, 0);
        p.subsystems[1][0].q[1] = DenseMat::identity(4).scaled(-1.0);
        let rep = validate(&p);
        assert_eq!(rep.len(), 1);
        let v = &rep.violations[0];
        assert_eq!(v.kind, ViolationKind::NotPositiveDefinite);
        assert_eq!(v.subsystem, Some((1, 0)));
        assert_eq!(v.time, Some(1));
    }

    #[test]
    fn wrong_coupling_columns_reported() {
        // One-based (1,2) is zero-based (0,1); its E couples to (0,0).
        let mut p = generate_case1_msd(2, 2, 2, 0);
        p.subsystems[0][1].e.as_mut().unwrap()[0] = DenseMat::zeros(4, 3);
        let rep = validate(&p);
        assert!(rep
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::Dimension && v.subsystem == Some((0, 1)) && v.detail.starts_with('E')));
    }

    #[test]
    fn asymmetric_r_reported() {
        let mut p = generate_case1_msd(1, 1, 1, 0);
        p.subsystems[0][0].r[0][(0, 1)] = 0.5;
        assert_eq!(validate(&p).violations[0].kind, ViolationKind::NotPositiveDefinite);
    }

    #[test]
    fn boundary_without_coupling_reported() {
        let mut p = generate_case1_msd(1, 1, 1, 0);
        p.boundary.beta_under = vec![Some(vec![vec![0.0; 4]; 2])];
        let rep = validate(&p);
        assert!(rep.violations.iter().any(|v| v.kind == ViolationKind::Structure));
    }

    #[test]
    fn zero_sizes_rejected() {
        let mut p = generate_case1_msd(1, 1, 1, 0);
        p.t = 0;
        assert_eq!(validate(&p).violations[0].kind, ViolationKind::Structure);
    }
}
