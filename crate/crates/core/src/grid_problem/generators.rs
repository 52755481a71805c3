//! The two benchmark families.
//!
//! Case I is a planar mass-spring-damper grid: every mass has states
//! `(px, vx, py, vy)` and force inputs `(fx, fy)`, and is tied by a spring and
//! damper to each of its four grid neighbours (a fixed wall at the grid
//! edge), acting on both axes. Parameters are drawn uniformly from
//! `[0.8, 1.5]` and the continuous model is discretised by forward Euler.
//!
//! Case II is a stand-in irrigation network. Row 0 is the primary channel,
//! column `j` below it a secondary channel. Pool `(0, j)` is coupled to its
//! primary neighbour `(0, j-1)` through `E`; pool `(i, j)` is coupled to the
//! next pool of its secondary channel `(i+1, j)` through `H`. `F` and `G`
//! are never present, so the coupling graph is a comb-shaped tree rooted at
//! `(0, 0)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BoundaryData, Coupling, GridLQProblem, SubsystemData};
use crate::block_linalg::DenseMat;

/// Forward Euler step of the Case I discretisation.
pub const CASE1_STEP: f64 = 0.1;
/// Gain of the single upstream column in the Case II couplings.
pub const CASE2_COUPLING_GAIN: f64 = 0.2;

const CASE1_PARAM_RANGE: (f64, f64) = (0.8, 1.5);

/// Physical parameters of one Case I mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MsdParams {
    pub mass: f64,
    pub spring: f64,
    pub damping: f64,
}

/// Parameters and initial positions drawn for a Case I grid, indexed `[i][j]`.
///
/// Draw order is row-major over `(i, j)`: mass, spring, damping for every
/// subsystem, then `(px, py)` initial positions in `[-1, 1]` per subsystem.
pub fn case1_draws(k: usize, n: usize, seed: u64) -> (Vec<Vec<MsdParams>>, Vec<Vec<[f64; 2]>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = CASE1_PARAM_RANGE;
    let params = (0..k)
        .map(|_| {
            (0..n)
                .map(|_| MsdParams {
                    mass: rng.gen_range(lo..=hi),
                    spring: rng.gen_range(lo..=hi),
                    damping: rng.gen_range(lo..=hi),
                })
                .collect()
        })
        .collect();
    let positions = (0..k)
        .map(|_| (0..n).map(|_| [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)]).collect())
        .collect();
    (params, positions)
}

/// Continuous-time self dynamics of a Case I mass with four attached links.
pub fn case1_continuous_a(p: MsdParams) -> DenseMat {
    let mut a = DenseMat::zeros(4, 4);
    for axis in 0..2 {
        let (pos, vel) = (2 * axis, 2 * axis + 1);
        a[(pos, vel)] = 1.0;
        a[(vel, pos)] = -4.0 * p.spring / p.mass;
        a[(vel, vel)] = -4.0 * p.damping / p.mass;
    }
    a
}

fn case1_continuous_coupling(p: MsdParams) -> DenseMat {
    let mut c = DenseMat::zeros(4, 4);
    for axis in 0..2 {
        let (pos, vel) = (2 * axis, 2 * axis + 1);
        c[(vel, pos)] = p.spring / p.mass;
        c[(vel, vel)] = p.damping / p.mass;
    }
    c
}

fn case1_continuous_b(p: MsdParams) -> DenseMat {
    let mut b = DenseMat::zeros(4, 2);
    b[(1, 0)] = 1.0 / p.mass;
    b[(3, 1)] = 1.0 / p.mass;
    b
}

fn repeat(m: &DenseMat, times: usize) -> Vec<DenseMat> {
    vec![m.clone(); times]
}

/// Case I: `K x N` mass-spring-damper grid over horizon `T`, walls at the edges.
pub fn generate_case1_msd(k: usize, n: usize, t: usize, seed: u64) -> GridLQProblem {
    assert!(k >= 1 && n >= 1 && t >= 1, "grid sizes must be positive");
    let h = CASE1_STEP;
    let (params, positions) = case1_draws(k, n, seed);
    let mut subsystems = Vec::with_capacity(k);
    for i in 0..k {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let p = params[i][j];
            let mut a = DenseMat::identity(4);
            a.axpy(h, &case1_continuous_a(p));
            let b = case1_continuous_b(p).scaled(h);
            let coupling = case1_continuous_coupling(p).scaled(h);
            let mut s = SubsystemData {
                n: 4,
                m: 2,
                a: repeat(&a, t),
                b: repeat(&b, t),
                e: None,
                f: None,
                g: None,
                h: None,
                q: repeat(&DenseMat::identity(4), t + 1),
                r: repeat(&DenseMat::identity(2).scaled(2.0), t),
            };
            for dir in Coupling::ALL {
                if dir.neighbor(i, j, k, n).is_some() {
                    *s.coupling_mut(dir) = Some(repeat(&coupling, t));
                }
            }
            row.push(s);
        }
        subsystems.push(row);
    }
    let gamma = positions
        .iter()
        .map(|row| row.iter().map(|&[px, py]| vec![px, 0.0, py, 0.0]).collect())
        .collect();
    GridLQProblem { k, n, t, subsystems, boundary: BoundaryData { gamma, ..Default::default() } }
}

/// Per-pool dynamics of the Case II stand-in: states are the level error,
/// its running integral and a two-stage low-pass actuator driven by the
/// scalar gate-flow input.
pub fn case2_pool_dynamics() -> (DenseMat, DenseMat) {
    let a = DenseMat::from_rows(&[
        &[1.0, 0.0, 0.0, 0.3],
        &[0.1, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.7, 0.0],
        &[0.0, 0.0, 0.3, 0.7],
    ]);
    let b = DenseMat::from_rows(&[&[0.0], &[0.0], &[0.3], &[0.0]]);
    (a, b)
}

/// Upstream coupling: the neighbour's delivered flow (actuator output)
/// enters this pool's level error.
pub fn case2_coupling() -> DenseMat {
    let mut c = DenseMat::zeros(4, 4);
    c[(0, 3)] = CASE2_COUPLING_GAIN;
    c
}

/// Case II: irrigation network with `N` primary pools and `K - 1` further
/// pools in each secondary channel, horizon `T`.
pub fn generate_case2_irrigation(k: usize, n: usize, t: usize) -> GridLQProblem {
    assert!(k >= 1 && n >= 1 && t >= 1, "grid sizes must be positive");
    let (a, b) = case2_pool_dynamics();
    let coupling = case2_coupling();
    let mut subsystems = Vec::with_capacity(k);
    for i in 0..k {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let mut s = SubsystemData {
                n: 4,
                m: 1,
                a: repeat(&a, t),
                b: repeat(&b, t),
                e: None,
                f: None,
                g: None,
                h: None,
                q: repeat(&DenseMat::identity(4), t + 1),
                r: repeat(&DenseMat::identity(1), t),
            };
            if i == 0 && j > 0 {
                s.e = Some(repeat(&coupling, t));
            }
            if i + 1 < k {
                s.h = Some(repeat(&coupling, t));
            }
            row.push(s);
        }
        subsystems.push(row);
    }
    let gamma = vec![vec![vec![1.0, 0.0, 0.0, 0.0]; n]; k];
    GridLQProblem { k, n, t, subsystems, boundary: BoundaryData { gamma, ..Default::default() } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_problem::validate;

    #[test]
    fn single_mass_matches_euler_discretisation() {
        let p = generate_case1_msd(1, 1, 1, 0);
        let s = p.subsystem(0, 0);
        assert!(s.e.is_none() && s.f.is_none() && s.g.is_none() && s.h.is_none());
        let (params, _) = case1_draws(1, 1, 0);
        let MsdParams { mass, spring, damping } = params[0][0];
        for v in [mass, spring, damping] {
            assert!((0.8..=1.5).contains(&v));
        }
        let h = CASE1_STEP;
        // Independent closed form per axis.
        let axis = [[1.0, h], [-4.0 * h * spring / mass, 1.0 - 4.0 * h * damping / mass]];
        for ax in 0..2 {
            for r in 0..2 {
                for c in 0..2 {
                    assert_eq!(s.a[0][(2 * ax + r, 2 * ax + c)], axis[r][c]);
                }
            }
        }
        assert_eq!(s.a[0][(0, 2)], 0.0);
        assert_eq!(s.b[0][(1, 0)], h / mass);
        assert_eq!(s.r[0], DenseMat::identity(2).scaled(2.0));
    }

    #[test]
    fn case1_is_deterministic() {
        assert_eq!(generate_case1_msd(3, 2, 2, 11), generate_case1_msd(3, 2, 2, 11));
        assert_ne!(generate_case1_msd(3, 2, 2, 11), generate_case1_msd(3, 2, 2, 12));
    }

    #[test]
    fn two_by_two_has_two_neighbours_each() {
        let p = generate_case1_msd(2, 2, 2, 7);
        for i in 0..2 {
            for j in 0..2 {
                let count = Coupling::ALL.iter().filter(|&&d| p.subsystem(i, j).coupling(d).is_some()).count();
                assert_eq!(count, 2);
            }
        }
        assert!(validate(&p).is_valid());
    }

    #[test]
    fn case2_has_no_f_or_g() {
        for (k, n) in [(1, 1), (3, 4), (4, 2)] {
            let p = generate_case2_irrigation(k, n, 2);
            assert!(validate(&p).is_valid());
            for row in &p.subsystems {
                for s in row {
                    assert!(s.f.is_none() && s.g.is_none());
                    assert_eq!((s.n, s.m), (4, 1));
                }
            }
        }
        let single = generate_case2_irrigation(1, 1, 1);
        let s = single.subsystem(0, 0);
        assert!(s.e.is_none() && s.h.is_none());
    }

    #[test]
    fn case2_coupling_graph_is_tree_rooted_at_origin() {
        let (k, n) = (2, 2);
        let p = generate_case2_irrigation(k, n, 2);
        let mut edges = Vec::new();
        for i in 0..k {
            for j in 0..n {
                for dir in Coupling::ALL {
                    let present = p.subsystem(i, j).coupling(dir).is_some_and(|b| b.iter().any(|m| !m.is_zero()));
                    if present {
                        edges.push(((i, j), dir.neighbor(i, j, k, n).unwrap()));
                    }
                }
            }
        }
        assert_eq!(edges.len(), k * n - 1);
        let mut reached = vec![(0usize, 0usize)];
        let mut frontier = vec![(0usize, 0usize)];
        while let Some(node) = frontier.pop() {
            for &(a, b) in &edges {
                for (from, to) in [(a, b), (b, a)] {
                    if from == node && !reached.contains(&to) {
                        reached.push(to);
                        frontier.push(to);
                    }
                }
            }
        }
        assert_eq!(reached.len(), k * n);
    }
}
