#![allow(dead_code)]

use gridlq::block_linalg::DenseMat;
use gridlq::grid_problem::{BoundaryData, Coupling, GridLQProblem, SubsystemData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GUARD: usize = 2000;

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMat {
    DenseMat::from_fn(rows, cols, |_, _| scale * rng.gen_range(-1.0..1.0))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DenseMat {
    let g = random_mat(rng, n, n, 0.7);
    let mut m = g.matmul_transposed(&g);
    m.axpy(0.5, &DenseMat::identity(n));
    m
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Heterogeneous random instance: node state dims in 1..=3, input dims in
/// 1..=2, every in-grid coupling present, some edge couplings fed by random
/// boundary trajectories.
pub fn random_problem(k: usize, n: usize, t: usize, seed: u64) -> GridLQProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx: Vec<Vec<usize>> = (0..k).map(|_| (0..n).map(|_| rng.gen_range(1..=3)).collect()).collect();
    let nu: Vec<Vec<usize>> = (0..k).map(|_| (0..n).map(|_| rng.gen_range(1..=2)).collect()).collect();
    let edge_dim = 2;
    let mut boundary = BoundaryData {
        alpha_under: vec![None; n],
        alpha_over: vec![None; n],
        beta_under: vec![None; k],
        beta_over: vec![None; k],
        gamma: Vec::new(),
    };
    let mut subsystems = Vec::with_capacity(k);
    for i in 0..k {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let (ni, mi) = (nx[i][j], nu[i][j]);
            let mut s = SubsystemData {
                n: ni,
                m: mi,
                a: (0..t).map(|_| random_mat(&mut rng, ni, ni, 0.8)).collect(),
                b: (0..t).map(|_| random_mat(&mut rng, ni, mi, 1.0)).collect(),
                e: None,
                f: None,
                g: None,
                h: None,
                q: (0..=t).map(|_| random_spd(&mut rng, ni)).collect(),
                r: (0..t).map(|_| random_spd(&mut rng, mi)).collect(),
            };
            for dir in Coupling::ALL {
                let cols = match dir.neighbor(i, j, k, n) {
                    Some((a, b)) => nx[a][b],
                    None if rng.gen_bool(0.5) => {
                        let traj: Vec<Vec<f64>> = (0..=t).map(|_| random_vec(&mut rng, edge_dim)).collect();
                        let slot = match dir {
                            Coupling::Left => &mut boundary.beta_under[i],
                            Coupling::Right => &mut boundary.beta_over[i],
                            Coupling::Up => &mut boundary.alpha_under[j],
                            Coupling::Down => &mut boundary.alpha_over[j],
                        };
                        *slot = Some(traj);
                        edge_dim
                    }
                    None => continue,
                };
                *s.coupling_mut(dir) = Some((0..t).map(|_| random_mat(&mut rng, ni, cols, 0.4)).collect());
            }
            row.push(s);
        }
        subsystems.push(row);
    }
    boundary.gamma = (0..k).map(|i| (0..n).map(|j| random_vec(&mut rng, nx[i][j])).collect()).collect();
    GridLQProblem { k, n, t, subsystems, boundary }
}

/// Scalar-state instance with `A = B = 0`, `Q = I`, so that `Δ = I`.
pub fn identity_problem(k: usize, n: usize, t: usize) -> GridLQProblem {
    let mut p = gridlq::generate_case2_irrigation(k, n, t);
    for row in &mut p.subsystems {
        for s in row {
            for a in &mut s.a {
                *a = DenseMat::zeros(4, 4);
            }
            for b in &mut s.b {
                *b = DenseMat::zeros(4, 1);
            }
            for dir in Coupling::ALL {
                *s.coupling_mut(dir) = None;
            }
        }
    }
    p.boundary.gamma = (0..k).map(|i| (0..n).map(|j| vec![1.0 + i as f64, -(j as f64), 0.5, 2.0]).collect()).collect();
    p
}

pub fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

pub fn max_abs_diff(a: &DenseMat, b: &DenseMat) -> f64 {
    a.sub(b).max_abs()
}

pub fn seeded_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_vec(&mut rng, n)
}
