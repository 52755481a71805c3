//! Dense eigenvalue oracles. All paths run sequentially and are deterministic.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use serde::Serialize;

use crate::block_linalg::DenseMat;
use crate::kkt_assembly::{check_guard, SchurOperator, SplitOperator};
use crate::nbjm::{materialize_preconditioner_inverse, NbjmPreconditioner};
use crate::Error;

fn to_faer(m: &DenseMat) -> Mat<f64> {
    Mat::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn from_faer(m: &Mat<f64>) -> DenseMat {
    DenseMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn symmetrized(m: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

fn eigen_err(e: impl std::fmt::Debug) -> Error {
    Error::Eigen(format!("{e:?}"))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DenseMat) -> Result<Vec<f64>, Error> {
    symmetrized(&to_faer(m)).self_adjoint_eigenvalues(Side::Lower).map_err(eigen_err)
}

/// Largest eigenvalue modulus of a general square matrix.
pub fn spectral_radius_dense(m: &DenseMat) -> Result<f64, Error> {
    if m.rows() == 0 {
        return Ok(0.0);
    }
    let ev = to_faer(m).eigenvalues().map_err(eigen_err)?;
    Ok(ev.iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max))
}

/// Densifies `apply` column by column.
pub fn densify_operator(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    dim: usize,
    guard: usize,
) -> Result<DenseMat, Error> {
    check_guard(dim, guard)?;
    let mut m = DenseMat::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    let mut col = vec![0.0; dim];
    for k in 0..dim {
        e[k] = 1.0;
        col.fill(0.0);
        apply(&e, &mut col);
        e[k] = 0.0;
        for (i, &v) in col.iter().enumerate() {
            m[(i, k)] = v;
        }
    }
    Ok(m)
}

/// Spectral radius of the linear map `apply` via its dense eigenvalues.
pub fn spectral_radius(apply: impl FnMut(&[f64], &mut [f64]), dim: usize, guard: usize) -> Result<f64, Error> {
    spectral_radius_dense(&densify_operator(apply, dim, guard)?)
}

/// Spectral radius by power iteration on `M²` from the normalised all-ones
/// vector; squaring keeps a dominant `±λ` pair from oscillating.
pub fn spectral_radius_power(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    dim: usize,
    guard: usize,
    max_iter: usize,
) -> Result<f64, Error> {
    check_guard(dim, guard)?;
    if dim == 0 {
        return Ok(0.0);
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut y = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    let mut prev = f64::INFINITY;
    for _ in 0..max_iter {
        y.fill(0.0);
        apply(&x, &mut y);
        z.fill(0.0);
        apply(&y, &mut z);
        let nz = norm(&z);
        if nz == 0.0 {
            return Ok(0.0);
        }
        let est = nz.sqrt();
        if (est - prev).abs() <= 1e-10 * est {
            return Ok(est);
        }
        prev = est;
        x.iter_mut().zip(&z).for_each(|(a, b)| *a = b / nz);
    }
    Err(Error::PowerIterationStall { iterations: max_iter })
}

/// `ρ(M⁻¹ N)` for symmetric positive definite `M` and symmetric `N`,
/// computed from the symmetric matrix `C⁻¹ N C⁻ᵀ` with `M = C Cᵀ`.
pub fn splitting_radius(m: &DenseMat, n: &DenseMat) -> Result<f64, Error> {
    let c = lower_cholesky(&to_faer(m))?;
    let mut x = to_faer(n);
    c.solve_lower_triangular_in_place(x.as_mut());
    let mut y = x.transpose().to_owned();
    c.solve_lower_triangular_in_place(y.as_mut());
    let ev = symmetrized(&y).self_adjoint_eigenvalues(Side::Lower).map_err(eigen_err)?;
    Ok(ev.iter().fold(0.0, |a: f64, v| a.max(v.abs())))
}

fn lower_cholesky(m: &Mat<f64>) -> Result<Mat<f64>, Error> {
    let llt = symmetrized(m)
        .llt(Side::Lower)
        .map_err(|e| Error::Eigen(format!("matrix is not positive definite: {e:?}")))?;
    Ok(llt.L().to_owned())
}

/// Dense inverse of a symmetric positive definite matrix.
pub fn spd_inverse_dense(m: &DenseMat) -> Result<DenseMat, Error> {
    let llt = symmetrized(&to_faer(m))
        .llt(Side::Lower)
        .map_err(|e| Error::Eigen(format!("matrix is not positive definite: {e:?}")))?;
    Ok(from_faer(&llt.inverse()))
}

/// `Υ_L = Σ_{l<L} (Φ⁻¹ Ω)^l Φ⁻¹`.
pub fn upsilon_dense(phi: &DenseMat, omega: &DenseMat, inner_l: usize) -> Result<DenseMat, Error> {
    let phi_inv = to_faer(&spd_inverse_dense(phi)?);
    let m = &phi_inv * to_faer(omega);
    let mut term = phi_inv.clone();
    let mut sum = Mat::<f64>::zeros(phi.rows(), phi.cols());
    for l in 0..inner_l {
        sum += &term;
        if l + 1 < inner_l {
            term = &m * &term;
        }
    }
    Ok(from_faer(&sum))
}

/// `∇_S = Σ_{s<S} (Υ_L Ξ̃)^s Υ_L`.
pub fn nabla_dense(upsilon: &DenseMat, xi: &DenseMat, outer_s: usize) -> DenseMat {
    let u = to_faer(upsilon);
    let m = &u * to_faer(xi);
    let mut term = u.clone();
    let mut sum = Mat::<f64>::zeros(u.nrows(), u.ncols());
    for s in 0..outer_s {
        sum += &term;
        if s + 1 < outer_s {
            term = &m * &term;
        }
    }
    from_faer(&sum)
}

/// Eigenvalue extremes and condition numbers of `Δ` and of `∇_S Δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditioningReport {
    pub lambda_min_delta: f64,
    pub lambda_max_delta: f64,
    pub kappa_delta: f64,
    pub lambda_min_preconditioned: f64,
    pub lambda_max_preconditioned: f64,
    pub kappa_preconditioned: f64,
}

fn extremes(ev: &[f64]) -> (f64, f64) {
    (ev.iter().copied().fold(f64::INFINITY, f64::min), ev.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Condition numbers of `Δ` and of the preconditioned operator.
///
/// `∇_S Δ` is similar to the symmetric `Cᵀ ∇_S C` with `Δ = C Cᵀ`, whose
/// spectrum is computed instead. Without a preconditioner both reports
/// coincide.
pub fn condition_numbers(
    sop: &SchurOperator,
    p: Option<&NbjmPreconditioner>,
    guard: usize,
) -> Result<ConditioningReport, Error> {
    let delta = sop.densify_delta(guard)?;
    let ev = symmetric_eigenvalues(&delta)?;
    let (lmin, lmax) = extremes(&ev);
    let (pmin, pmax) = match p {
        None => (lmin, lmax),
        Some(p) => {
            let nabla = to_faer(&materialize_preconditioner_inverse(p, guard)?);
            let c = lower_cholesky(&to_faer(&delta))?;
            let m = c.transpose() * &nabla * &c;
            extremes(&symmetrized(&m).self_adjoint_eigenvalues(Side::Lower).map_err(eigen_err)?)
        }
    };
    Ok(ConditioningReport {
        lambda_min_delta: lmin,
        lambda_max_delta: lmax,
        kappa_delta: lmax / lmin,
        lambda_min_preconditioned: pmin,
        lambda_max_preconditioned: pmax,
        kappa_preconditioned: pmax / pmin,
    })
}

/// `ρ(Φ̃⁻¹ Ω̃)` and `ρ(Ψ̃⁻¹ Ξ̃)` from the dense splittings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplittingRadii {
    pub inner: f64,
    pub outer: f64,
}

pub fn splitting_radii(sop: &SchurOperator, split: &SplitOperator, guard: usize) -> Result<SplittingRadii, Error> {
    let inner = splitting_radius(&split.densify_phi(guard)?, &split.densify_omega(guard)?)?;
    let outer = splitting_radius(&sop.densify_psi(guard)?, &sop.densify_xi_split(guard)?)?;
    Ok(SplittingRadii { inner, outer })
}
