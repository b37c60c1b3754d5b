//! Exact Kantorovich solver with cyclical-monotonicity certificates,
//! dual bounds, metric geodesics, diagonal filling, and cycle reduction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::homophily::homophily_coupling;
use crate::moves::{is_cyclically_monotone, negative_exchange_cycle, SimpleMove};
use crate::tables::{
    cost_of, support, Coupling, CostMatrix, Matrix, ProbabilityVector, SUPPORT_THRESHOLD,
};

/// Result of the exact solver: an optimal coupling, its cost, the
/// optimality certificate, and the number of cancellations performed.
#[derive(Debug, Clone, Serialize)]
pub struct TransportSolution {
    pub value: f64,
    pub coupling: Coupling,
    pub certified: bool,
    pub iterations: usize,
}

/// Dual potentials (φ, ψ) of the Kantorovich linear program.
#[derive(Debug, Clone, Serialize)]
pub struct DualPair {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Feasibility of the dual pair: `φ(x) + ψ(y) ≤ c(x,y)` everywhere,
/// within 1e-12.
pub fn dual_feasible(phi: &[f64], psi: &[f64], c: &CostMatrix) -> bool {
    let n = c.n();
    if phi.len() != n || psi.len() != n {
        return false;
    }
    (0..n).all(|x| (0..n).all(|y| phi[x] + psi[y] <= c.value(x, y) + 1e-12))
}

/// Dual objective `Σ φ μ + Σ ψ ν`; a lower bound on the exact value
/// whenever the pair is feasible.
pub fn dual_value(phi: &[f64], psi: &[f64], mu: &ProbabilityVector, nu: &ProbabilityVector) -> f64 {
    let a: f64 = phi.iter().zip(mu.as_slice()).map(|(p, m)| p * m).sum();
    let b: f64 = psi.iter().zip(nu.as_slice()).map(|(p, m)| p * m).sum();
    a + b
}

/// Tightening step `φ(x) ← min_y c(x,y) − ψ(y)`; never breaks feasibility
/// and never lowers φ when the pair was feasible.
pub fn tighten_phi(psi: &[f64], c: &CostMatrix) -> Vec<f64> {
    let n = c.n();
    (0..n)
        .map(|x| {
            (0..n)
                .map(|y| c.value(x, y) - psi[y])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn apply_simple(gamma: &Coupling, f: &SimpleMove, alpha: f64) -> Result<Coupling> {
    let mut t = gamma.table().clone();
    for &(i, j) in f.plus_set() {
        t.add_at(i, j, -alpha);
    }
    for &(i, j) in f.minus_set() {
        t.add_at(i, j, alpha);
    }
    Coupling::rewrap(t, gamma)
}

/// Exact Kantorovich cost by cycle canceling: start at the maximal
/// homophily coupling, then repeatedly subtract an admissible simple move
/// of positive c-cost (a negative cycle of the exchange graph) at its
/// maximal step, until the support is cyclically monotone.
pub fn exact_kcost(
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
    c: &CostMatrix,
) -> Result<TransportSolution> {
    let n = c.n();
    if mu.len() != n || nu.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mu.len().max(nu.len()),
        });
    }
    let mut gamma = homophily_coupling(mu, nu)?;
    let cap = 10 * n * n * n * n;
    let mut iterations = 0usize;
    let mut value = cost_of(&gamma, c)?;
    loop {
        let g = support(&gamma);
        let Some(f) = negative_exchange_cycle(&g, c, None) else {
            break;
        };
        if iterations >= cap {
            return Err(Error::NonConvergence(cap));
        }
        // the plus cells are support cells, so the maximal step is positive
        let alpha = f
            .plus_set()
            .iter()
            .map(|&(i, j)| gamma.get(i, j))
            .fold(f64::INFINITY, f64::min);
        if alpha <= SUPPORT_THRESHOLD {
            break;
        }
        let next = apply_simple(&gamma, &f, alpha)?;
        let next_value = cost_of(&next, c)?;
        debug_assert!(next_value <= value + 1e-9, "cost must not increase");
        gamma = next;
        value = next_value;
        iterations += 1;
    }
    let (certified, _) = is_cyclically_monotone(&support(&gamma), c, None);
    Ok(TransportSolution {
        value,
        coupling: gamma,
        certified,
        iterations,
    })
}

/// The interpolated optimal coupling of the mixture geodesic
/// `μ(r) = (1−r)μ + rν`:
/// `γ̃(x,y;s,t) = [(1−t)μ(x) + sν(y)]·1(x=y) + (t−s)·γ̃(x,y)`.
/// It couples μ(s) with μ(t) and costs `(t−s)·K_d(μ,ν)`.
pub fn geodesic_coupling(
    gamma_opt: &Coupling,
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
    s: f64,
    t: f64,
) -> Result<Coupling> {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) || s > t {
        return Err(Error::InvalidInterval { s, t });
    }
    let n = gamma_opt.n();
    let table = Matrix::from_fn(n, |x, y| {
        let diag = if x == y {
            (1.0 - t) * mu.get(x) + s * nu.get(y)
        } else {
            0.0
        };
        diag + (t - s) * gamma_opt.get(x, y)
    });
    let mu_s = mu.mix(nu, s)?;
    let mu_t = mu.mix(nu, t)?;
    crate::tables::validate_coupling(table, &mu_s, &mu_t)
}

/// Moves diagonal mass onto the diagonal without changing cost: sweeps
/// the basic moves with index patterns `i1 < i2 = j1 < j2` and
/// `j1 < j2 = i1 < i2`, each applied at the full step of its two donor
/// cells, only when the cost change is ≤ 1e-12; repeats to fixpoint.
pub fn fill_diagonal(gamma: &Coupling, d: &CostMatrix) -> Result<Coupling> {
    if !d.metric_flag() {
        d.check_metric()?;
    }
    let n = gamma.n();
    let mut t = gamma.table().clone();
    for _pass in 0..n * n {
        let mut changed = false;
        for x in 0..n {
            // i1 < x = j1 < j2: drains (i1, x) and (x, j2), fills (x, x)
            // and (i1, j2)
            for i1 in 0..x {
                for j2 in x + 1..n {
                    let alpha = t.get(i1, x).min(t.get(x, j2));
                    if alpha <= SUPPORT_THRESHOLD {
                        continue;
                    }
                    let delta = -alpha * (d.value(i1, x) + d.value(x, j2) - d.value(i1, j2));
                    if delta > 1e-12 {
                        continue;
                    }
                    t.add_at(i1, x, -alpha);
                    t.add_at(x, j2, -alpha);
                    t.add_at(x, x, alpha);
                    t.add_at(i1, j2, alpha);
                    changed = true;
                }
            }
            // j1 < x = i1 < i2: drains (x, j1) and (i2, x), fills (x, x)
            // and (i2, j1)
            for j1 in 0..x {
                for i2 in x + 1..n {
                    let alpha = t.get(x, j1).min(t.get(i2, x));
                    if alpha <= SUPPORT_THRESHOLD {
                        continue;
                    }
                    let delta = -alpha * (d.value(x, j1) + d.value(i2, x) - d.value(i2, j1));
                    if delta > 1e-12 {
                        continue;
                    }
                    t.add_at(x, j1, -alpha);
                    t.add_at(i2, x, -alpha);
                    t.add_at(x, x, alpha);
                    t.add_at(i2, j1, alpha);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Coupling::rewrap(t, gamma)
}

// an undirected walk around a support cycle: (from, to, forward) where
// `forward` means the cell is (from, to), else (to, from)
type CycleWalk = Vec<(usize, usize, bool)>;

fn find_support_cycle(t: &Matrix) -> Option<CycleWalk> {
    let n = t.n();
    // undirected multigraph on X; each off-diagonal support cell (x, y)
    // is an edge {x, y}
    let mut adj: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); n]; // (other, edge_id, forward)
    let mut id = 0usize;
    for x in 0..n {
        for y in 0..n {
            if x != y && t.get(x, y) > SUPPORT_THRESHOLD {
                adj[x].push((y, id, true));
                adj[y].push((x, id, false));
                id += 1;
            }
        }
    }
    // DFS keeping the edge path; a back edge closes a cycle
    let mut state = vec![0u8; n]; // 0 unseen, 1 on stack, 2 done
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, usize::MAX)]; // (node, incoming edge id)
        let mut path: Vec<(usize, usize, bool)> = Vec::new(); // (from, to, forward)
        let mut on_path: Vec<usize> = vec![start];
        // iterative DFS with explicit child iterators
        let mut iters: Vec<usize> = vec![0];
        while let Some(&(v, in_edge)) = stack.last() {
            let i = *iters.last().unwrap();
            if i >= adj[v].len() {
                state[v] = 2;
                stack.pop();
                iters.pop();
                on_path.pop();
                path.pop();
                continue;
            }
            *iters.last_mut().unwrap() += 1;
            let (w, eid, forward) = adj[v][i];
            if eid == in_edge {
                continue;
            }
            if state[w] == 1 {
                // close the cycle at w
                let pos = on_path.iter().position(|&u| u == w).unwrap();
                let mut walk: CycleWalk = path[pos..].to_vec();
                walk.push((v, w, forward));
                return Some(walk);
            }
            if state[w] == 0 {
                state[w] = 1;
                stack.push((w, eid));
                iters.push(0);
                on_path.push(w);
                path.push((v, w, forward));
            }
        }
    }
    // mark the start as visited even when isolated
    None
}

/// Removes cycles from the support without increasing cost, following the
/// three cases of the cycle-reduction argument: 2-cycles, concordant
/// consecutive arcs, and fully discordant (alternating) cycles.
pub fn reduce_cycles(gamma: &Coupling, d: &CostMatrix) -> Result<Coupling> {
    if !d.metric_flag() {
        d.check_metric()?;
    }
    let mut t = gamma.table().clone();
    let n = t.n();
    let cap = 10 * n * n * n * n;
    for _ in 0..cap {
        let Some(walk) = find_support_cycle(&t) else {
            return Coupling::rewrap(t, gamma);
        };
        apply_cycle_reduction(&mut t, &walk, d);
        t.clamp_tiny_negatives(SUPPORT_THRESHOLD);
    }
    Err(Error::NonConvergence(cap))
}

fn apply_cycle_reduction(t: &mut Matrix, walk: &CycleWalk, d: &CostMatrix) {
    let k = walk.len();
    let cell = |e: &(usize, usize, bool)| if e.2 { (e.0, e.1) } else { (e.1, e.0) };
    if k == 2 {
        // 2-cycle x1 ⇄ x2: drain both off-diagonal cells, fill the
        // two diagonal cells
        let (x1, x2) = cell(&walk[0]);
        let alpha = t.get(x1, x2).min(t.get(x2, x1));
        t.add_at(x1, x2, -alpha);
        t.add_at(x2, x1, -alpha);
        t.add_at(x1, x1, alpha);
        t.add_at(x2, x2, alpha);
        return;
    }
    // look for concordant consecutive arcs x1 -> x2 -> x3
    for i in 0..k {
        let e1 = &walk[i];
        let e2 = &walk[(i + 1) % k];
        let (x1, x2, x3) = if e1.2 && e2.2 {
            (e1.0, e1.1, e2.1)
        } else if !e1.2 && !e2.2 {
            // both reversed: the arcs run x3 -> x2 -> x1 along the walk
            (e2.1, e2.0, e1.0)
        } else {
            continue;
        };
        if x1 == x3 {
            continue;
        }
        let alpha = t.get(x1, x2).min(t.get(x2, x3));
        t.add_at(x1, x2, -alpha);
        t.add_at(x2, x3, -alpha);
        t.add_at(x1, x3, alpha);
        t.add_at(x2, x2, alpha);
        return;
    }
    // fully discordant (alternating) cycle: even length; the forward
    // cells and backward cells form the alternating integer move
    let mut fwd = Vec::new();
    let mut bwd = Vec::new();
    for e in walk {
        if e.2 {
            fwd.push(cell(e));
        } else {
            bwd.push(cell(e));
        }
    }
    let cost = |cells: &[(usize, usize)]| -> f64 {
        cells.iter().map(|&(i, j)| d.value(i, j)).sum()
    };
    // choose the sign of non-increasing cost: drain the costlier side
    let (plus, minus) = if cost(&fwd) >= cost(&bwd) {
        (fwd, bwd)
    } else {
        (bwd, fwd)
    };
    let alpha = plus
        .iter()
        .map(|&(i, j)| t.get(i, j))
        .fold(f64::INFINITY, f64::min);
    for &(i, j) in &plus {
        t.add_at(i, j, -alpha);
    }
    for &(i, j) in &minus {
        t.add_at(i, j, alpha);
    }
}
