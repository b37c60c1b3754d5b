//! Randomized and property-based invariant batteries: margin
//! conservation, oracle equivalence of the exact solver, homophily
//! optimality, metric structure, move-algebra round trips, and
//! diagonal-filling guarantees.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otmoves::annealing::{anneal, AnnealConfig, Schedule};
use otmoves::homophily::{connect, homophily_coupling};
use otmoves::moves::{
    decompose_simple, express_in_basis, is_cyclically_monotone, make_basic, move_cost,
    permutation_of_simple, reconstruct_from_basis, simple_from_permutation, Move,
    SimpleMove,
};
use otmoves::tables::{
    cost_of, product_coupling, support, validate_coupling, Coupling, CostMatrix, Matrix,
    ProbabilityVector,
};
use otmoves::transport::{exact_kcost, fill_diagonal, geodesic_coupling};

fn pv(v: &[f64]) -> ProbabilityVector {
    ProbabilityVector::new(v.to_vec()).unwrap()
}

fn random_margin(n: usize, rng: &mut ChaCha8Rng) -> ProbabilityVector {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = v.iter().sum();
    pv(&v.iter().map(|x| x / s).collect::<Vec<_>>())
}

/// Random coupling: the independence table pushed through a few random
/// admissible basic moves.
fn random_coupling(mu: &ProbabilityVector, nu: &ProbabilityVector, rng: &mut ChaCha8Rng) -> Coupling {
    let n = mu.len();
    let mut t = product_coupling(mu, nu).unwrap().into_table();
    for _ in 0..4 * n {
        let i1 = rng.gen_range(0..n);
        let i2 = rng.gen_range(0..n);
        let j1 = rng.gen_range(0..n);
        let j2 = rng.gen_range(0..n);
        if i1 == i2 || j1 == j2 {
            continue;
        }
        // applying γ - uM drains the +1 cells (i1,j1), (i2,j2)
        let alpha = t.get(i1, j1).min(t.get(i2, j2));
        if alpha <= 0.0 {
            continue;
        }
        let u = alpha * rng.gen_range(0.0..1.0);
        let mv = make_basic(i1, i2, j1, j2).unwrap();
        mv.apply(&mut t, u);
    }
    t.clamp_tiny_negatives(1e-12);
    validate_coupling(t, mu, nu).unwrap()
}

// ---------------------------------------------------------------------
// brute-force vertex oracle: enumerate supports of size <= 2n-1, solve
// the margin equations by peeling degree-one rows/columns, keep the
// cheapest consistent solution
// ---------------------------------------------------------------------

fn solve_on_support(
    support: &[(usize, usize)],
    mu: &[f64],
    nu: &[f64],
) -> Option<Vec<((usize, usize), f64)>> {
    let n = mu.len();
    let mut cells: Vec<(usize, usize)> = support.to_vec();
    let mut row = mu.to_vec();
    let mut col = nu.to_vec();
    let mut out = Vec::new();
    loop {
        if cells.is_empty() {
            // all margins must be exhausted
            let ok = row.iter().chain(col.iter()).all(|&r| r.abs() <= 1e-9);
            return ok.then_some(out);
        }
        // find a row or column meeting exactly one remaining cell
        let mut peeled = false;
        for i in 0..n {
            let hits: Vec<usize> = (0..cells.len()).filter(|&k| cells[k].0 == i).collect();
            if hits.len() == 1 {
                let (x, y) = cells.swap_remove(hits[0]);
                let v = row[x];
                if v < -1e-9 {
                    return None;
                }
                row[x] -= v;
                col[y] -= v;
                out.push(((x, y), v.max(0.0)));
                peeled = true;
                break;
            }
        }
        if peeled {
            continue;
        }
        for j in 0..n {
            let hits: Vec<usize> = (0..cells.len()).filter(|&k| cells[k].1 == j).collect();
            if hits.len() == 1 {
                let (x, y) = cells.swap_remove(hits[0]);
                let v = col[y];
                if v < -1e-9 {
                    return None;
                }
                row[x] -= v;
                col[y] -= v;
                out.push(((x, y), v.max(0.0)));
                peeled = true;
                break;
            }
        }
        if !peeled {
            // remaining cells contain a cycle: not a vertex support
            return None;
        }
    }
}

fn brute_force_value(mu: &ProbabilityVector, nu: &ProbabilityVector, c: &CostMatrix) -> f64 {
    let n = mu.len();
    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .collect();
    let max_size = 2 * n - 1;
    let mut best = f64::INFINITY;
    // enumerate all cell subsets of size <= 2n-1
    for mask in 1u32..(1 << cells.len()) {
        if mask.count_ones() as usize > max_size {
            continue;
        }
        let sub: Vec<(usize, usize)> = (0..cells.len())
            .filter(|&k| mask & (1 << k) != 0)
            .map(|k| cells[k])
            .collect();
        if let Some(assignment) = solve_on_support(&sub, mu.as_slice(), nu.as_slice()) {
            let mut feasible = true;
            let mut value = 0.0;
            for &((i, j), v) in &assignment {
                if v < -1e-9 {
                    feasible = false;
                    break;
                }
                value += v * c.value(i, j);
            }
            if feasible && value < best {
                best = value;
            }
        }
    }
    best
}

// ---------------------------------------------------------------------
// batteries
// ---------------------------------------------------------------------

#[test]
fn margins_conserved_along_long_annealing_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let n = 6;
    let mu = random_margin(n, &mut rng);
    let nu = random_margin(n, &mut rng);
    let cfg = AnnealConfig {
        tau0: 0.1,
        steps: 100_000,
        schedule: Schedule::Geometric { rho: 0.99 },
        seed: 77,
        cost: CostMatrix::sqrt_euclidean(n),
        log_temperature: false,
    };
    let rep = anneal(&mu, &nu, &cfg).unwrap();
    // the final coupling re-validated against the inputs
    for i in 0..n {
        let r: f64 = (0..n).map(|j| rep.final_coupling.get(i, j)).sum();
        let c: f64 = (0..n).map(|j| rep.final_coupling.get(j, i)).sum();
        assert!((r - mu.get(i)).abs() <= 1e-9);
        assert!((c - nu.get(i)).abs() <= 1e-9);
    }
}

#[test]
fn margins_conserved_along_all_path_prefixes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let n = rng.gen_range(2..=7usize);
        let mu = random_margin(n, &mut rng);
        let nu = random_margin(n, &mut rng);
        let start = random_coupling(&mu, &nu, &mut rng);
        let target = random_coupling(&mu, &nu, &mut rng);
        let path = connect(&start, &target).unwrap();
        for table in path.prefixes() {
            let mut t = table;
            t.clamp_tiny_negatives(1e-12);
            validate_coupling(t, &mu, &nu).unwrap();
        }
        assert!(path.end.table().max_abs_diff(target.table()) <= 1e-9);
    }
}

#[test]
fn exact_solver_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let n = rng.gen_range(2..=4usize);
        let mu = random_margin(n, &mut rng);
        let nu = random_margin(n, &mut rng);
        // alternate between the two ground distances
        let c = if case % 2 == 0 {
            CostMatrix::euclidean(n)
        } else {
            CostMatrix::sqrt_euclidean(n)
        };
        let sol = exact_kcost(&mu, &nu, &c).unwrap();
        let oracle = brute_force_value(&mu, &nu, &c);
        assert!(
            (sol.value - oracle).abs() <= 1e-6,
            "case {case}: solver {} vs oracle {}",
            sol.value,
            oracle
        );
        assert!(sol.certified);
    }
}

#[test]
fn homophily_optimal_for_euclidean_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let n = rng.gen_range(2..=12usize);
        let mu = random_margin(n, &mut rng);
        let nu = random_margin(n, &mut rng);
        let d = CostMatrix::euclidean(n);
        let gh = homophily_coupling(&mu, &nu).unwrap();
        let sol = exact_kcost(&mu, &nu, &d).unwrap();
        let gap = cost_of(&gh, &d).unwrap() - sol.value;
        assert!(gap.abs() <= 1e-9, "gap {gap}");
    }
}

#[test]
fn metric_extension_triangle_and_geodesic() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    // extension of the ground distance on Dirac margins
    for n in 2..=6usize {
        let d = CostMatrix::sqrt_euclidean(n);
        for x in 0..n {
            for y in 0..n {
                let v = exact_kcost(
                    &ProbabilityVector::dirac(n, x),
                    &ProbabilityVector::dirac(n, y),
                    &d,
                )
                .unwrap()
                .value;
                assert!((v - d.value(x, y)).abs() <= 1e-9);
            }
        }
    }
    // triangle inequality on random triples
    for _ in 0..100 {
        let n = rng.gen_range(2..=8usize);
        let d = CostMatrix::sqrt_euclidean(n);
        let mu = random_margin(n, &mut rng);
        let xi = random_margin(n, &mut rng);
        let nu = random_margin(n, &mut rng);
        let k_mx = exact_kcost(&mu, &xi, &d).unwrap().value;
        let k_xn = exact_kcost(&xi, &nu, &d).unwrap().value;
        let k_mn = exact_kcost(&mu, &nu, &d).unwrap().value;
        assert!(k_mx + k_xn >= k_mn - 1e-9);
    }
    // geodesic (t-s)-scaling
    for _ in 0..30 {
        let n = rng.gen_range(2..=6usize);
        let d = CostMatrix::euclidean(n);
        let mu = random_margin(n, &mut rng);
        let nu = random_margin(n, &mut rng);
        let sol = exact_kcost(&mu, &nu, &d).unwrap();
        let s = rng.gen_range(0.0..0.5);
        let t = rng.gen_range(0.5..1.0);
        let seg = geodesic_coupling(&sol.coupling, &mu, &nu, s, t).unwrap();
        assert!((cost_of(&seg, &d).unwrap() - (t - s) * sol.value).abs() <= 1e-9);
        let indep = exact_kcost(&mu.mix(&nu, s).unwrap(), &mu.mix(&nu, t).unwrap(), &d)
            .unwrap()
            .value;
        assert!((indep - (t - s) * sol.value).abs() <= 1e-9);
    }
}

#[test]
fn fill_diagonal_battery() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for _ in 0..50 {
        let n = rng.gen_range(2..=8usize);
        let d = CostMatrix::sqrt_euclidean(n);
        let mu = random_margin(n, &mut rng);
        let nu = random_margin(n, &mut rng);
        let sol = exact_kcost(&mu, &nu, &d).unwrap();
        let filled = fill_diagonal(&sol.coupling, &d).unwrap();
        assert!(
            (cost_of(&filled, &d).unwrap() - sol.value).abs() <= 1e-9,
            "cost must be unchanged"
        );
        for x in 0..n {
            assert!(filled.get(x, x) >= sol.coupling.get(x, x) - 1e-12);
        }
    }
    // dissimilarity rejection
    let dis = CostMatrix::new(
        Matrix::from_rows(vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ])
        .unwrap(),
    )
    .unwrap();
    let mu = pv(&[0.5, 0.2, 0.3]);
    let nu = pv(&[0.3, 0.2, 0.5]);
    let g = product_coupling(&mu, &nu).unwrap();
    assert!(fill_diagonal(&g, &dis).is_err());
}

#[test]
fn annealing_cost_never_below_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for seed in 0..10u64 {
        let n = rng.gen_range(3..=6usize);
        let mu = random_margin(n, &mut rng);
        let nu = random_margin(n, &mut rng);
        let d = CostMatrix::sqrt_euclidean(n);
        let exact = exact_kcost(&mu, &nu, &d).unwrap().value;
        let cfg = AnnealConfig {
            tau0: 0.05,
            steps: 2000,
            schedule: Schedule::Geometric { rho: 0.95 },
            seed,
            cost: d,
            log_temperature: false,
        };
        let rep = anneal(&mu, &nu, &cfg).unwrap();
        assert!(rep.final_cost >= exact - 1e-9);
        // the improvement trajectory is strictly decreasing
        for w in rep.best_trajectory.windows(2) {
            assert!(w[1].1 < w[0].1);
        }
    }
}

// ---------------------------------------------------------------------
// proptest round trips of the move algebra
// ---------------------------------------------------------------------

fn arb_move(n: usize) -> impl Strategy<Value = Move> {
    // integer tables with zero margins, built from random basic moves
    proptest::collection::vec((0..n, 0..n, 0..n, 0..n, -3i32..=3), 1..8).prop_filter_map(
        "degenerate or zero",
        move |cells| {
            let mut t = Matrix::zeros(n);
            for (i1, i2, j1, j2, w) in cells {
                if i1 == i2 || j1 == j2 {
                    continue;
                }
                t.add_at(i1, j1, w as f64);
                t.add_at(i2, j2, w as f64);
                t.add_at(i1, j2, -w as f64);
                t.add_at(i2, j1, -w as f64);
            }
            Move::new(t).ok().filter(|m| !m.is_zero())
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pivotal_basis_round_trip(m in arb_move(5)) {
        let coeffs = express_in_basis(&m, 4, 4);
        let back = reconstruct_from_basis(&coeffs, 4, 4);
        prop_assert!(back.table().max_abs_diff(m.table()) <= 1e-9);
    }

    #[test]
    fn averaged_basis_identity(m in arb_move(4)) {
        // N * M = Σ_{(u,v)} reconstruct(express(M, u, v)) over all pivots
        let n = 4usize;
        let mut acc = Matrix::zeros(n);
        for u in 0..n {
            for v in 0..n {
                let back = reconstruct_from_basis(&express_in_basis(&m, u, v), u, v);
                for ((i, j), x) in back.table().entries() {
                    acc.add_at(i, j, x);
                }
            }
        }
        acc.scale(1.0 / (n * n) as f64);
        prop_assert!(acc.max_abs_diff(m.table()) <= 1e-9);
    }

    #[test]
    fn simple_decomposition_round_trip(m in arb_move(5)) {
        // clamp to a simple move if possible, else skip
        let mut t = Matrix::zeros(5);
        let mut simple = true;
        for ((i, j), v) in m.table().entries() {
            if v.abs() > 1.5 {
                simple = false;
                break;
            }
            t.set(i, j, v.round());
        }
        prop_assume!(simple);
        let Ok(f) = SimpleMove::from_table(t) else { return Ok(()); };
        let d = decompose_simple(&f.as_move()).unwrap();
        prop_assert!(d.reconstruct(5).max_abs_diff(f.as_move().table()) <= 1e-9);
    }
}

#[test]
fn permutation_round_trip_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let n = rng.gen_range(2..=6usize);
        let count = rng.gen_range(2..=n);
        // distinct points on distinct rows and columns
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..n).collect();
        for v in [&mut rows, &mut cols] {
            for k in (1..v.len()).rev() {
                let j = rng.gen_range(0..=k);
                v.swap(k, j);
            }
        }
        let points: Vec<(usize, usize)> =
            (0..count).map(|k| (rows[k], cols[k])).collect();
        let mut sigma: Vec<usize> = (0..count).collect();
        for k in (1..count).rev() {
            let j = rng.gen_range(0..=k);
            sigma.swap(k, j);
        }
        let Ok(f) = simple_from_permutation(&points, &sigma) else {
            continue;
        };
        if f.plus_set().is_empty() {
            continue; // identity permutation yields the zero move
        }
        let (points2, sigma2) = permutation_of_simple(&f).unwrap();
        let g = simple_from_permutation(&points2, &sigma2).unwrap();
        // the rebuilt move may live on a smaller index range (fixed points of
        // sigma drop out), so compare the signed supports rather than tables
        let sets = |h: &otmoves::SimpleMove| {
            let mut p = h.plus_set().to_vec();
            let mut m = h.minus_set().to_vec();
            p.sort_unstable();
            m.sort_unstable();
            (p, m)
        };
        assert_eq!(sets(&g), sets(&f), "support-level round trip");
    }
}

#[test]
fn certified_solutions_admit_no_improving_move() {
    // cross-check the certificate against the admissible-move definition
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..30 {
        let n = rng.gen_range(2..=6usize);
        let d = CostMatrix::sqrt_euclidean(n);
        let mu = random_margin(n, &mut rng);
        let nu = random_margin(n, &mut rng);
        let sol = exact_kcost(&mu, &nu, &d).unwrap();
        let (mono, witness) = is_cyclically_monotone(&support(&sol.coupling), &d, None);
        assert!(mono);
        assert!(witness.is_none());
        // every admissible basic move has non-positive cost
        for i1 in 0..n {
            for i2 in 0..n {
                for j1 in 0..n {
                    for j2 in 0..n {
                        if i1 == i2 || j1 == j2 {
                            continue;
                        }
                        let mv = make_basic(i1, i2, j1, j2).unwrap();
                        let alpha = sol.coupling.get(i1, j1).min(sol.coupling.get(i2, j2));
                        if alpha > 1e-9 {
                            assert!(move_cost(&mv.as_simple(n), &d) <= 1e-9);
                        }
                    }
                }
            }
        }
    }
}
