mod common;

use std::sync::Arc;

use common::{identity_problem, max_abs_diff, random_problem, rel_inf, seeded_vec, GUARD};
use gridlq::block_linalg::DenseMat;
use gridlq::diagnostics::{nabla_dense, spd_inverse_dense, symmetric_eigenvalues, upsilon_dense};
use gridlq::grid_problem::GridLQProblem;
use gridlq::kkt_assembly::{build_schur, build_stacked, SchurOperator};
use gridlq::nbjm::{
    inner_sweep, materialize_preconditioner_inverse, nbjm_solve, precondition_apply, NbjmConfig, NbjmPreconditioner,
};
use gridlq::{generate_case1_msd, generate_case2_irrigation, Error, Exec, StageBlockVector};
use proptest::prelude::*;

fn schur_of(p: &GridLQProblem) -> Arc<SchurOperator> {
    Arc::new(build_schur(&build_stacked(p).unwrap()))
}

fn precond(p: &GridLQProblem, l: usize, s: usize) -> NbjmPreconditioner {
    NbjmPreconditioner::new(schur_of(p), NbjmConfig::preconditioner(l, s)).unwrap()
}

fn vector(sop: &SchurOperator, seed: u64) -> StageBlockVector {
    StageBlockVector::from_vec(sop.layout().clone(), seeded_vec(sop.dim(), seed)).unwrap()
}

/// Single column with no dynamics coupling: `Ξ̃ = 0` and `Ω̃ = 0`.
fn decoupled_problem() -> GridLQProblem {
    let mut p = identity_problem(3, 1, 2);
    for row in &mut p.subsystems {
        for s in row {
            for b in &mut s.b {
                *b = DenseMat::from_rows(&[&[1.0], &[0.5], &[0.0], &[-0.3]]);
            }
            for q in &mut s.q {
                *q = DenseMat::from_diagonal(&[2.0, 1.0, 0.5, 4.0]);
            }
        }
    }
    p
}

fn dense_parts(nb: &NbjmPreconditioner) -> (DenseMat, DenseMat, DenseMat) {
    let split = nb.split();
    (
        split.densify_phi(GUARD).unwrap(),
        split.densify_omega(GUARD).unwrap(),
        nb.schur().densify_xi_split(GUARD).unwrap(),
    )
}

#[test]
fn decoupled_preconditioner_is_exact_inverse() {
    let p = decoupled_problem();
    let nb = precond(&p, 2, 2);
    let r = vector(nb.schur(), 1);
    let out = precondition_apply(&nb, &r).unwrap();
    let back = nb.schur().apply_delta(&out).unwrap();
    assert!(rel_inf(back.as_slice(), r.as_slice()) < 1e-13);
    let m = materialize_preconditioner_inverse(&nb, GUARD).unwrap();
    let phi_inv = spd_inverse_dense(&nb.split().densify_phi(GUARD).unwrap()).unwrap();
    assert!(max_abs_diff(&m, &phi_inv) < 1e-13 * phi_inv.max_abs());
}

#[test]
fn one_outer_step_matches_two_term_neumann_sum() {
    let p = generate_case1_msd(2, 4, 2, 4);
    let nb = precond(&p, 2, 1);
    let (phi, omega, _) = dense_parts(&nb);
    let phi_inv = spd_inverse_dense(&phi).unwrap();
    let expected = phi_inv.add(&phi_inv.matmul(&omega).matmul(&phi_inv));
    let r = vector(nb.schur(), 2);
    let out = precondition_apply(&nb, &r).unwrap();
    let dense = expected.mul_vec(r.as_slice());
    let diff = out.as_slice().iter().zip(&dense).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(diff < 1e-11, "{diff}");
}

#[test]
fn inner_sweep_examples() {
    let p = generate_case1_msd(3, 4, 2, 6);
    let nb = precond(&p, 2, 2);
    let n = nb.dim();
    let mut out = vec![1.0; n];
    inner_sweep(nb.split(), nb.factors(), &vec![0.0; n], 2, Exec::Sequential, &mut out);
    assert_eq!(out, vec![0.0; n]);

    let rhs = seeded_vec(n, 3);
    let (phi, omega, _) = dense_parts(&nb);
    let expected = upsilon_dense(&phi, &omega, 2).unwrap().mul_vec(&rhs);
    inner_sweep(nb.split(), nb.factors(), &rhs, 2, Exec::Sequential, &mut out);
    assert!(out.iter().zip(&expected).all(|(a, b)| (a - b).abs() < 1e-11));

    // Without pair coupling the sweep count is irrelevant.
    let q = decoupled_problem();
    let nb = precond(&q, 2, 1);
    let rhs = seeded_vec(nb.dim(), 4);
    let mut one = vec![0.0; nb.dim()];
    let mut four = vec![0.0; nb.dim()];
    inner_sweep(nb.split(), nb.factors(), &rhs, 1, Exec::Sequential, &mut one);
    inner_sweep(nb.split(), nb.factors(), &rhs, 4, Exec::Sequential, &mut four);
    assert_eq!(one, four);
}

#[test]
fn materialized_inverse_on_case1_is_spd() {
    let p = generate_case1_msd(2, 2, 2, 0);
    let nb = precond(&p, 2, 2);
    let m = materialize_preconditioner_inverse(&nb, GUARD).unwrap();
    assert!(max_abs_diff(&m, &m.transpose()) <= 1e-10);
    assert!(symmetric_eigenvalues(&m).unwrap()[0] > 0.0);
    assert!(matches!(materialize_preconditioner_inverse(&nb, 10), Err(Error::DimensionGuard { .. })));
}

#[test]
fn odd_inner_count_is_standalone_only() {
    let p = generate_case1_msd(2, 2, 2, 0);
    let err = NbjmPreconditioner::new(schur_of(&p), NbjmConfig::preconditioner(1, 2));
    assert!(matches!(err, Err(Error::Config(_))));
    assert!(NbjmPreconditioner::new(schur_of(&p), NbjmConfig::standalone(1, 1e-9, 10)).is_ok());
}

#[test]
fn standalone_on_identity_takes_one_step() {
    let p = identity_problem(2, 3, 2);
    let nb = NbjmPreconditioner::new(schur_of(&p), NbjmConfig::standalone(2, 1e-9, 100)).unwrap();
    let r = vector(nb.schur(), 5);
    let (x, rep) = nbjm_solve(&nb, &r, 1e-9, 100).unwrap();
    assert_eq!(rep.steps, 1);
    assert_eq!(x.as_slice(), r.as_slice());
}

#[test]
fn standalone_converges_to_the_schur_solution() {
    let p = generate_case1_msd(3, 3, 3, 0);
    let st = build_stacked(&p).unwrap();
    let sop = Arc::new(build_schur(&st));
    let nb = NbjmPreconditioner::new(sop.clone(), NbjmConfig::standalone(2, 1e-9, 100_000)).unwrap();
    let r = st.omega();
    let (x, rep) = nbjm_solve(&nb, r, 1e-9, 100_000).unwrap();
    assert!(rep.converged);
    let res = sop.apply_delta(&x).unwrap().sub(r);
    assert!(res.norm_inf() / r.norm_inf() < 1e-7, "{}", res.norm_inf());
}

#[test]
fn standalone_iteration_cap() {
    let p = generate_case1_msd(3, 3, 3, 0);
    let st = build_stacked(&p).unwrap();
    let nb = NbjmPreconditioner::new(Arc::new(build_schur(&st)), NbjmConfig::standalone(2, 1e-9, 1)).unwrap();
    match nbjm_solve(&nb, st.omega(), 1e-9, 1) {
        Err(Error::MaxIterationsExceeded(partial)) => {
            assert!(!partial.report.converged);
            assert_eq!(partial.iterate.len(), nb.dim());
        }
        other => panic!("expected MaxIterationsExceeded, got {other:?}"),
    }
}

#[test]
fn parallel_sweeps_are_bitwise_identical() {
    let p = generate_case2_irrigation(4, 5, 3);
    let st = build_stacked(&p).unwrap();
    let seq = NbjmPreconditioner::new(Arc::new(build_schur(&st)), NbjmConfig::default()).unwrap();
    let par =
        NbjmPreconditioner::new(Arc::new(build_schur(&st).with_exec(Exec::Parallel)), NbjmConfig::default()).unwrap();
    let r = vector(seq.schur(), 8);
    let a = precondition_apply(&seq, &r).unwrap();
    let b = precondition_apply(&par, &r).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
}

#[test]
fn apply_cost_is_linear_in_grid_size() {
    let flops = |k: usize, n: usize, t: usize| {
        let nb = precond(&generate_case1_msd(k, n, t, 0), 2, 2);
        let r = seeded_vec(nb.dim(), 1);
        let mut out = vec![0.0; nb.dim()];
        nb.apply_into(&r, &mut out) as f64
    };
    let base = flops(4, 4, 4);
    for (ratio, expected) in [
        (flops(8, 8, 8) / base, 4.0 * 9.0 / 5.0),
        (flops(8, 4, 4) / base, 2.0),
        (flops(4, 8, 4) / base, 2.0),
        (flops(4, 4, 8) / base, 9.0 / 5.0),
    ] {
        assert!((0.8..=1.3).contains(&(ratio / expected)), "{ratio} vs {expected}");
    }
}

fn small_problems() -> impl Strategy<Value = GridLQProblem> {
    prop_oneof![
        (1usize..=3, 1usize..=4, 1usize..=3, any::<u64>()).prop_map(|(k, n, t, s)| random_problem(k, n, t, s)),
        (2usize..=3, any::<u64>()).prop_map(|(m, s)| generate_case1_msd(m, m, m, s)),
        (2usize..=3).prop_map(|m| generate_case2_irrigation(m, m, m)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn preconditioner_is_linear_and_symmetric(p in small_problems(), seed in any::<u64>()) {
        let nb = precond(&p, 2, 2);
        let r1 = vector(nb.schur(), seed);
        let r2 = vector(nb.schur(), seed ^ 0xabc);
        let a1 = precondition_apply(&nb, &r1).unwrap();
        let a2 = precondition_apply(&nb, &r2).unwrap();
        let sum = precondition_apply(&nb, &r1.add(&r2)).unwrap();
        let scale = a1.norm_inf().max(a2.norm_inf()).max(1.0);
        prop_assert!(sum.sub(&a1.add(&a2)).norm_inf() <= 1e-12 * scale);
        let (x, y) = (a1.dot(&r2), r1.dot(&a2));
        prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1.0));
    }

    #[test]
    fn nabla_closed_form_and_spd(p in small_problems(), l in prop::sample::select(vec![2usize, 4]), s in 1usize..=3) {
        let nb = precond(&p, l, s);
        let m = materialize_preconditioner_inverse(&nb, GUARD).unwrap();
        prop_assert!(max_abs_diff(&m, &m.transpose()) <= 1e-10 * m.max_abs().max(1.0));
        prop_assert!(symmetric_eigenvalues(&m).unwrap()[0] > 0.0);
        let (phi, omega, xi) = dense_parts(&nb);
        let expected = nabla_dense(&upsilon_dense(&phi, &omega, l).unwrap(), &xi, s);
        prop_assert!(max_abs_diff(&m, &expected) <= 1e-10 * expected.max_abs());
    }

    #[test]
    fn psi_inverse_dominates_truncated_sum(p in small_problems(), l in prop::sample::select(vec![2usize, 4, 6])) {
        let nb = precond(&p, l, 1);
        let (phi, omega, _) = dense_parts(&nb);
        let psi_inv = spd_inverse_dense(&phi.sub(&omega)).unwrap();
        let gap = psi_inv.sub(&upsilon_dense(&phi, &omega, l).unwrap());
        prop_assert!(symmetric_eigenvalues(&gap).unwrap()[0] >= -1e-9 * psi_inv.max_abs());
    }
}
