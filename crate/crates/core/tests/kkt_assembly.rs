mod common;

use common::{max_abs_diff, random_problem, GUARD};
use gridlq::block_linalg::DenseMat;
use gridlq::diagnostics::{dense_kkt, symmetric_eigenvalues};
use gridlq::grid_problem::GridLQProblem;
use gridlq::kkt_assembly::{build_schur, build_splitting, build_stacked, closed_form_blocks, SchurOperator};
use gridlq::{generate_case1_msd, generate_case2_irrigation, StageBlockVector};
use proptest::prelude::*;

fn schur_of(p: &GridLQProblem) -> SchurOperator {
    build_schur(&build_stacked(p).unwrap())
}

fn min_eig(m: &DenseMat) -> f64 {
    symmetric_eigenvalues(m).unwrap()[0]
}

/// `Λ M Λ` for the diagonal sign matrix `Λ`.
fn sign_flip(m: &DenseMat, sign: &[f64]) -> DenseMat {
    DenseMat::from_fn(m.rows(), m.cols(), |i, j| sign[i] * m[(i, j)] * sign[j])
}

/// `+1` on even blocks, `-1` on odd ones; `block_of[k]` is the block of entry `k`.
fn parity_signs(block_of: impl Iterator<Item = usize>) -> Vec<f64> {
    block_of.map(|b| if b % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

#[test]
fn case1_delta_matches_dense_oracle() {
    let p = generate_case1_msd(3, 3, 3, 0);
    let d = schur_of(&p).densify_delta(GUARD).unwrap();
    let oracle = dense_kkt(&p, GUARD).unwrap().schur().unwrap();
    assert!(max_abs_diff(&d, &oracle) <= 1e-12 * oracle.max_abs());
    assert_eq!(d, d.transpose());
}

#[test]
fn apply_delta_reconstructs_dense_columns() {
    let p = random_problem(2, 3, 2, 17);
    let sop = schur_of(&p);
    let d = sop.densify_delta(GUARD).unwrap();
    for k in 0..sop.dim() {
        let e = StageBlockVector::unit(sop.layout().clone(), k);
        let col = sop.apply_delta(&e).unwrap();
        for i in 0..sop.dim() {
            assert_eq!(col.as_slice()[i], d[(i, k)]);
        }
    }
}

#[test]
fn splitting_single_column() {
    let p = generate_case1_msd(3, 1, 2, 1);
    let sop = schur_of(&p);
    let split = build_splitting(&sop);
    assert_eq!(sop.layout().num_pairs(), 1);
    let psi = sop.densify_psi(GUARD).unwrap();
    let n = sop.layout().n_hat();
    for t in 0..=2 {
        assert!(split.omega(0, t).is_none());
        assert_eq!(split.phi_dense_column_order(0, t), psi.submatrix(t * n, t * n, n, n));
    }
}

#[test]
fn splitting_four_columns_has_no_distance_three_block() {
    let p = generate_case1_msd(2, 4, 2, 2);
    let sop = schur_of(&p);
    let split = build_splitting(&sop);
    let l = sop.layout();
    assert_eq!(l.num_pairs(), 2);
    let psi = sop.densify_psi(GUARD).unwrap();
    for t in 1..=2 {
        let w = split.omega(1, t).unwrap();
        assert!(w.blocks[1][0].is_none());
        assert!(w.blocks[0][0].is_some() && w.blocks[0][1].is_some() && w.blocks[1][1].is_some());
        let dense = split.omega_dense(1, t).unwrap();
        // Rows over columns {2, 3}, columns over {0, 1}.
        let r3 = l.column_range(3).start - l.pair(1).stage_range.start;
        let c0 = l.column_range(0).len();
        for r in r3..dense.rows() {
            for c in 0..c0 {
                assert_eq!(dense[(r, c)], 0.0);
            }
        }
        let off = t * l.n_hat();
        for r in 0..dense.rows() {
            for c in 0..dense.cols() {
                let pr = off + l.pair(1).stage_range.start + r;
                let pc = off + l.pair(0).stage_range.start + c;
                assert_eq!(dense[(r, c)], -psi[(pr, pc)]);
            }
        }
    }
}

#[test]
fn splitting_odd_columns_ends_in_singleton() {
    let p = generate_case1_msd(3, 3, 2, 3);
    let sop = schur_of(&p);
    let split = build_splitting(&sop);
    let l = sop.layout();
    assert_eq!(l.num_pairs(), 2);
    assert_eq!(l.pair(1).columns, 2..3);
    let psi = sop.densify_psi(GUARD).unwrap();
    for t in 0..=2 {
        let phi = split.phi_dense_column_order(1, t);
        let r = t * l.n_hat() + l.column_range(2).start;
        let n = l.n_bar(2);
        assert_eq!(phi, psi.submatrix(r, r, n, n));
        let w = split.omega(1, t).unwrap();
        assert!(w.blocks[1][0].is_none() && w.blocks[1][1].is_none());
    }
}

#[test]
fn closed_form_matches_extracted_blocks() {
    let p = generate_case1_msd(3, 3, 3, 5);
    let s = build_stacked(&p).unwrap();
    let sop = build_schur(&s);
    let split = build_splitting(&sop);
    let l = sop.layout().clone();
    for t in 0..3 {
        let cf = closed_form_blocks(&s, 2, t);
        // Column 2 is pair 1; its coupling reaches back to columns 0 and 1.
        let w = split.omega_dense(1, t + 1).unwrap();
        let n2 = l.n_bar(2);
        let (n0, n1) = (l.n_bar(0), l.n_bar(1));
        let v = w.submatrix(0, 0, n2, n0).scaled(-1.0);
        let y = w.submatrix(0, n0, n2, n1).scaled(-1.0);
        let tol = 1e-12 * cf.z.max_abs();
        assert!(max_abs_diff(&v, cf.v.as_ref().unwrap()) < tol);
        assert!(max_abs_diff(&y, cf.y.as_ref().unwrap()) < tol);
        assert!(max_abs_diff(&split.phi_dense_column_order(1, t + 1), &cf.z) < tol);
    }
}

fn small_problems() -> impl Strategy<Value = GridLQProblem> {
    (1usize..=3, 1usize..=4, 1usize..=3, any::<u64>()).prop_map(|(k, n, t, seed)| random_problem(k, n, t, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn delta_matches_oracle_and_is_spd(p in small_problems()) {
        let sop = schur_of(&p);
        let d = sop.densify_delta(GUARD).unwrap();
        let oracle = dense_kkt(&p, GUARD).unwrap().schur().unwrap();
        prop_assert!(max_abs_diff(&d, &oracle) <= 1e-12 * oracle.max_abs().max(1.0));
        prop_assert_eq!(&d, &d.transpose());
        prop_assert!(min_eig(&d) > 0.0);
    }

    #[test]
    fn splittings_are_consistent(p in small_problems()) {
        let sop = schur_of(&p);
        let split = build_splitting(&sop);
        let psi = sop.densify_psi(GUARD).unwrap();
        let xi = sop.densify_xi_split(GUARD).unwrap();
        let delta = sop.densify_delta(GUARD).unwrap();
        let phi = split.densify_phi(GUARD).unwrap();
        let omega = split.densify_omega(GUARD).unwrap();
        prop_assert_eq!(&phi.sub(&omega), &psi);
        prop_assert!(max_abs_diff(&psi.sub(&xi), &delta) == 0.0);
        for v in 0..sop.layout().num_pairs() {
            for t in 0..sop.layout().num_stages() {
                prop_assert!(min_eig(&split.phi_dense_column_order(v, t)) > 0.0);
            }
        }
    }

    #[test]
    fn sign_similarities_hold(p in small_problems()) {
        let sop = schur_of(&p);
        let l = sop.layout().clone();
        let split = build_splitting(&sop);
        let psi = sop.densify_psi(GUARD).unwrap();
        let xi = sop.densify_xi_split(GUARD).unwrap();
        let delta = sop.densify_delta(GUARD).unwrap();
        // Alternating signs over time stages turn Ψ̃ - Ξ̃ into Ψ̃ + Ξ̃.
        let by_stage = parity_signs((0..l.n_tilde()).map(|k| k / l.n_hat()));
        prop_assert!(max_abs_diff(&sign_flip(&delta, &by_stage), &psi.add(&xi)) == 0.0);
        prop_assert!(min_eig(&psi.add(&xi)) > 0.0);
        // Alternating signs over pairs turn Φ̃ - Ω̃ into Φ̃ + Ω̃.
        let by_pair = parity_signs((0..l.n_tilde()).map(|k| {
            let pos = k % l.n_hat();
            l.pairs().iter().position(|pr| pr.stage_range.contains(&pos)).unwrap()
        }));
        let phi_plus = split.densify_phi(GUARD).unwrap().add(&split.densify_omega(GUARD).unwrap());
        prop_assert!(max_abs_diff(&sign_flip(&psi, &by_pair), &phi_plus) == 0.0);
        prop_assert!(min_eig(&phi_plus) > 0.0);
    }

    #[test]
    fn apply_delta_matches_dense(p in small_problems(), seed in any::<u64>()) {
        let sop = schur_of(&p);
        let d = sop.densify_delta(GUARD).unwrap();
        let x = common::seeded_vec(sop.dim(), seed);
        let xs = StageBlockVector::from_vec(sop.layout().clone(), x.clone()).unwrap();
        let y = sop.apply_delta(&xs).unwrap();
        let dense = d.mul_vec(&x);
        prop_assert!(common::rel_inf(y.as_slice(), &dense) < 1e-12);
    }
}

#[test]
fn case2_schur_is_spd() {
    let p = generate_case2_irrigation(3, 3, 3);
    let d = schur_of(&p).densify_delta(GUARD).unwrap();
    assert!(min_eig(&d) > 0.0);
}
