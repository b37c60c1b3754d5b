//! The vector space of table moves: bases, admissibility, decomposition,
//! permutation correspondence and cyclical monotonicity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tables::{
    CostMatrix, Coupling, Matrix, ProbabilityVector, SupportGraph, EXACT_TOL, MARGIN_TOL,
    SUPPORT_THRESHOLD,
};

/// Real table with all row and column sums zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Move {
    table: Matrix,
}

impl Move {
    pub fn new(table: Matrix) -> Result<Self> {
        let worst = table
            .row_sums()
            .iter()
            .chain(table.col_sums().iter())
            .fold(0.0_f64, |a, &s| a.max(s.abs()));
        if worst > EXACT_TOL {
            return Err(Error::NotAMove { residual: worst });
        }
        Ok(Move { table })
    }

    /// Difference `a - b` of two tables sharing margins.
    pub fn between(a: &Coupling, b: &Coupling) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::DimensionMismatch {
                expected: a.n(),
                got: b.n(),
            });
        }
        Move::new(Matrix::from_fn(a.n(), |i, j| a.get(i, j) - b.get(i, j)))
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.table.get(i, j)
    }

    pub fn table(&self) -> &Matrix {
        &self.table
    }

    pub fn is_zero(&self) -> bool {
        self.table.max_abs() <= EXACT_TOL
    }

    pub fn scaled(&self, s: f64) -> Move {
        let mut t = self.table.clone();
        t.scale(s);
        Move { table: t }
    }

    /// Sparse (i, j, value) triplets of the nonzero cells.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.table
            .entries()
            .filter(|&(_, v)| v.abs() > EXACT_TOL)
            .map(|((i, j), v)| (i, j, v))
            .collect()
    }
}

/// Move with values in `{-1, 0, +1}`; its support is a union of
/// alternating cycles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimpleMove {
    table: Matrix,
    plus: Vec<(usize, usize)>,
    minus: Vec<(usize, usize)>,
}

impl SimpleMove {
    pub fn from_sets(n: usize, plus: &[(usize, usize)], minus: &[(usize, usize)]) -> Result<Self> {
        let mut table = Matrix::zeros(n);
        for &(i, j) in plus {
            table.add_at(i, j, 1.0);
        }
        for &(i, j) in minus {
            table.add_at(i, j, -1.0);
        }
        SimpleMove::from_table(table)
    }

    pub fn from_table(table: Matrix) -> Result<Self> {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for ((i, j), v) in table.entries() {
            if (v - 1.0).abs() <= EXACT_TOL {
                plus.push((i, j));
            } else if (v + 1.0).abs() <= EXACT_TOL {
                minus.push((i, j));
            } else if v.abs() > EXACT_TOL {
                return Err(Error::NotSimple(format!("entry {v} at ({i},{j})")));
            }
        }
        if plus.len() != minus.len() {
            return Err(Error::NotSimple(
                "plus and minus sets differ in size".into(),
            ));
        }
        // zero-margin check
        let mv = Move::new(table)?;
        Ok(SimpleMove {
            table: mv.table,
            plus,
            minus,
        })
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn plus_set(&self) -> &[(usize, usize)] {
        &self.plus
    }

    pub fn minus_set(&self) -> &[(usize, usize)] {
        &self.minus
    }

    pub fn as_move(&self) -> Move {
        Move {
            table: self.table.clone(),
        }
    }

    pub fn negated(&self) -> SimpleMove {
        let mut t = self.table.clone();
        t.scale(-1.0);
        SimpleMove {
            table: t,
            plus: self.minus.clone(),
            minus: self.plus.clone(),
        }
    }
}

/// The four-cell move `(δ_x1 - δ_x2) ⊗ (δ_y1 - δ_y2)`:
/// `+1` at `(x1,y1), (x2,y2)` and `-1` at `(x1,y2), (x2,y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BasicMove {
    pub x1: usize,
    pub x2: usize,
    pub y1: usize,
    pub y2: usize,
}

/// Constructs a basic move; the indices must be non-degenerate.
pub fn make_basic(x1: usize, x2: usize, y1: usize, y2: usize) -> Result<BasicMove> {
    if x1 == x2 || y1 == y2 {
        return Err(Error::DegenerateIndices);
    }
    Ok(BasicMove { x1, x2, y1, y2 })
}

impl BasicMove {
    pub fn as_simple(&self, n: usize) -> SimpleMove {
        SimpleMove::from_sets(
            n,
            &[(self.x1, self.y1), (self.x2, self.y2)],
            &[(self.x1, self.y2), (self.x2, self.y1)],
        )
        .expect("basic move is always simple")
    }

    pub fn as_move(&self, n: usize) -> Move {
        self.as_simple(n).as_move()
    }

    /// The sign-flipped move (swaps the diagonals).
    pub fn negated(&self) -> BasicMove {
        BasicMove {
            x1: self.x1,
            x2: self.x2,
            y1: self.y2,
            y2: self.y1,
        }
    }

    /// Applies `table <- table - alpha * M` in place.
    pub fn apply(&self, table: &mut Matrix, alpha: f64) {
        table.add_at(self.x1, self.y1, -alpha);
        table.add_at(self.x2, self.y2, -alpha);
        table.add_at(self.x1, self.y2, alpha);
        table.add_at(self.x2, self.y1, alpha);
    }

    /// c-cost `c(x1,y1) + c(x2,y2) - c(x1,y2) - c(x2,y1)`.
    pub fn cost(&self, c: &CostMatrix) -> f64 {
        c.value(self.x1, self.y1) + c.value(self.x2, self.y2)
            - c.value(self.x1, self.y2)
            - c.value(self.x2, self.y1)
    }
}

/// The `(n-1)^2` basic moves `(δ_x - δ_u) ⊗ (δ_y - δ_v)`, `x != u`,
/// `y != v`, which form a basis of the move space.
pub fn pivotal_basis(u: usize, v: usize, n: usize) -> Vec<BasicMove> {
    let mut basis = Vec::with_capacity((n - 1) * (n - 1));
    for x in 0..n {
        if x == u {
            continue;
        }
        for y in 0..n {
            if y == v {
                continue;
            }
            basis.push(BasicMove {
                x1: x,
                x2: u,
                y1: y,
                y2: v,
            });
        }
    }
    basis
}

/// Coefficients of `M` in the pivotal basis around `(u, v)`: the
/// coefficient of `(δ_x - δ_u) ⊗ (δ_y - δ_v)` is `M(x, y)` itself.
/// Returned as a full matrix with zeros in the pivot row and column.
pub fn express_in_basis(m: &Move, u: usize, v: usize) -> Matrix {
    Matrix::from_fn(m.n(), |x, y| {
        if x == u || y == v {
            0.0
        } else {
            m.get(x, y)
        }
    })
}

/// Rebuilds the move from its pivotal-basis coefficients.
pub fn reconstruct_from_basis(coeffs: &Matrix, u: usize, v: usize) -> Move {
    let n = coeffs.n();
    let mut t = Matrix::zeros(n);
    for x in 0..n {
        for y in 0..n {
            let a = coeffs.get(x, y);
            if a == 0.0 || x == u || y == v {
                continue;
            }
            t.add_at(x, y, a);
            t.add_at(u, v, a);
            t.add_at(x, v, -a);
            t.add_at(u, y, -a);
        }
    }
    Move { table: t }
}

/// Largest step `alpha >= 0` with `gamma - alpha * M >= 0`:
/// `min over {M > 0} of gamma / M`. Zero when a positive cell of `M`
/// sits outside the support of `gamma`.
pub fn max_step(m: &Move, gamma: &Coupling) -> f64 {
    let mut alpha = f64::INFINITY;
    let mut any = false;
    for ((i, j), v) in m.table().entries() {
        if v > EXACT_TOL {
            any = true;
            let g = gamma.get(i, j);
            if g <= SUPPORT_THRESHOLD {
                return 0.0;
            }
            alpha = alpha.min(g / v);
        }
    }
    if any {
        alpha
    } else {
        0.0
    }
}

/// A move is admissible for `gamma` iff `{M > 0} ⊆ supp(gamma)`.
pub fn is_admissible(m: &Move, gamma: &Coupling) -> bool {
    max_step(m, gamma) > 0.0
}

/// North-West greedy table for arbitrary non-negative margins with equal
/// sums; each cell gets the largest value compatible with both margins.
pub(crate) fn northwest_table(row: &[f64], col: &[f64]) -> Matrix {
    let n = row.len();
    let mut rem_row = row.to_vec();
    let mut rem_col = col.to_vec();
    let mut t = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let v = rem_row[i].min(rem_col[j]).max(0.0);
            t.set(i, j, v);
            rem_row[i] -= v;
            rem_col[j] -= v;
        }
    }
    t
}

/// Two-couplings criterion: `M` is the difference of two couplings of
/// `(mu, nu)` iff `Σ_y |M(x,y)| <= 2 mu(x)` and `Σ_x |M(x,y)| <= 2 nu(y)`.
/// On success returns the witness pair `(M⁺ + M*, M⁻ + M*)`.
pub fn difference_criterion(
    m: &Move,
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
) -> Result<Option<(Coupling, Coupling)>> {
    let n = m.n();
    if mu.len() != n || nu.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mu.len().max(nu.len()),
        });
    }
    let mut a = vec![0.0; n]; // row sums of M⁺
    let mut b = vec![0.0; n]; // col sums of M⁺
    for ((i, j), v) in m.table().entries() {
        if v > 0.0 {
            a[i] += v;
            b[j] += v;
        }
    }
    // With zero margins, Σ_y |M(x,y)| = 2 a(x) and Σ_x |M(x,y)| = 2 b(y).
    for i in 0..n {
        if a[i] > mu.get(i) + MARGIN_TOL {
            return Ok(None);
        }
    }
    for j in 0..n {
        if b[j] > nu.get(j) + MARGIN_TOL {
            return Ok(None);
        }
    }
    let rest_row: Vec<f64> = (0..n).map(|i| (mu.get(i) - a[i]).max(0.0)).collect();
    let rest_col: Vec<f64> = (0..n).map(|j| (nu.get(j) - b[j]).max(0.0)).collect();
    let star = northwest_table(&rest_row, &rest_col);
    let plus = Matrix::from_fn(n, |i, j| m.get(i, j).max(0.0) + star.get(i, j));
    let minus = Matrix::from_fn(n, |i, j| (-m.get(i, j)).max(0.0) + star.get(i, j));
    let g1 = crate::tables::validate_coupling(plus, mu, nu)?;
    let g2 = crate::tables::validate_coupling(minus, mu, nu)?;
    Ok(Some((g1, g2)))
}

/// Positive combination of simple moves reproducing a move, with nested
/// remainder supports.
#[derive(Debug, Clone, Serialize)]
pub struct CycleDecomposition {
    pub terms: Vec<(f64, SimpleMove)>,
}

impl CycleDecomposition {
    pub fn reconstruct(&self, n: usize) -> Matrix {
        let mut t = Matrix::zeros(n);
        for (alpha, f) in &self.terms {
            for &(i, j) in f.plus_set() {
                t.add_at(i, j, *alpha);
            }
            for &(i, j) in f.minus_set() {
                t.add_at(i, j, -*alpha);
            }
        }
        t
    }
}

/// Shortest alternating cycle on the signed support of `m`, found by BFS
/// from the lexicographically first positive cell that closes a cycle.
/// Returns the cycle's positive and negative cells.
fn find_alternating_cycle(m: &Matrix) -> Option<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for ((i, j), v) in m.entries() {
        if v > SUPPORT_THRESHOLD {
            plus.push((i, j));
        } else if v < -SUPPORT_THRESHOLD {
            minus.push((i, j));
        }
    }
    if plus.is_empty() {
        return None;
    }
    // Nodes: plus cells then minus cells. Arcs: plus -> minus same row,
    // minus -> plus same column.
    let np = plus.len();
    let cells: Vec<(usize, usize)> = plus.iter().chain(minus.iter()).copied().collect();
    let arcs = |k: usize| -> Vec<usize> {
        let (x, y) = cells[k];
        if k < np {
            minus
                .iter()
                .enumerate()
                .filter(|(_, &(mx, _))| mx == x)
                .map(|(t, _)| np + t)
                .collect()
        } else {
            plus.iter()
                .enumerate()
                .filter(|(_, &(_, py))| py == y)
                .map(|(t, _)| t)
                .collect()
        }
    };
    for start in 0..np {
        // BFS from `start`; neighbors expanded in lexicographic cell order.
        let mut parent = vec![usize::MAX; cells.len()];
        let mut queue = std::collections::VecDeque::new();
        parent[start] = start;
        queue.push_back(start);
        let mut closed = None;
        'bfs: while let Some(k) = queue.pop_front() {
            for t in arcs(k) {
                if t == start && k != start {
                    closed = Some(k);
                    break 'bfs;
                }
                if parent[t] == usize::MAX {
                    parent[t] = k;
                    queue.push_back(t);
                }
            }
        }
        if let Some(last) = closed {
            let mut path = vec![last];
            let mut k = last;
            while k != start {
                k = parent[k];
                path.push(k);
            }
            let mut cyc_plus = Vec::new();
            let mut cyc_minus = Vec::new();
            for &k in &path {
                if k < np {
                    cyc_plus.push(cells[k]);
                } else {
                    cyc_minus.push(cells[k]);
                }
            }
            return Some((cyc_plus, cyc_minus));
        }
    }
    None
}

/// Decomposes a move into `Σ alpha_i F_i` with simple moves supported on
/// alternating cycles; remainder supports shrink strictly at every step.
pub fn decompose_simple(m: &Move) -> Result<CycleDecomposition> {
    if m.is_zero() {
        return Err(Error::NotAMove { residual: 0.0 });
    }
    let n = m.n();
    let mut work = m.table().clone();
    let mut terms = Vec::new();
    let cap = work
        .entries()
        .filter(|&(_, v)| v.abs() > SUPPORT_THRESHOLD)
        .count();
    for _ in 0..cap {
        let Some((cyc_plus, cyc_minus)) = find_alternating_cycle(&work) else {
            break;
        };
        let alpha = cyc_plus
            .iter()
            .chain(cyc_minus.iter())
            .map(|&(i, j)| work.get(i, j).abs())
            .fold(f64::INFINITY, f64::min);
        let f = SimpleMove::from_sets(n, &cyc_plus, &cyc_minus)?;
        for &(i, j) in &cyc_plus {
            let v = work.get(i, j) - alpha;
            work.set(i, j, if v.abs() <= SUPPORT_THRESHOLD { 0.0 } else { v });
        }
        for &(i, j) in &cyc_minus {
            let v = work.get(i, j) + alpha;
            work.set(i, j, if v.abs() <= SUPPORT_THRESHOLD { 0.0 } else { v });
        }
        terms.push((alpha, f));
    }
    if work.max_abs() > MARGIN_TOL {
        return Err(Error::NotAMove {
            residual: work.max_abs(),
        });
    }
    Ok(CycleDecomposition { terms })
}

/// Builds `Σ δ_(x_i, y_i) - Σ δ_(x_i, y_σ(i))` from distinct points and a
/// permutation; fails when cancellations push an entry outside `{-1,0,1}`.
pub fn simple_from_permutation(points: &[(usize, usize)], sigma: &[usize]) -> Result<SimpleMove> {
    if points.is_empty() || sigma.len() != points.len() {
        return Err(Error::NotSimple("points/permutation size mismatch".into()));
    }
    let mut seen = vec![false; sigma.len()];
    for &s in sigma {
        if s >= sigma.len() || seen[s] {
            return Err(Error::NotSimple("not a permutation".into()));
        }
        seen[s] = true;
    }
    let n = points
        .iter()
        .map(|&(x, y)| x.max(y) + 1)
        .max()
        .unwrap_or(1);
    let mut table = Matrix::zeros(n);
    for (i, &(x, y)) in points.iter().enumerate() {
        table.add_at(x, y, 1.0);
        table.add_at(x, points[sigma[i]].1, -1.0);
    }
    SimpleMove::from_table(table)
}

/// Canonical `(points, sigma)` representation of a simple move: the plus
/// cells in lexicographic order, with minus cells matched row by row.
/// The representation is not unique; round-trips are guaranteed at the
/// table level only.
pub fn permutation_of_simple(f: &SimpleMove) -> Result<(Vec<(usize, usize)>, Vec<usize>)> {
    let mut points: Vec<(usize, usize)> = f.plus_set().to_vec();
    points.sort_unstable();
    let mut minus: Vec<(usize, usize)> = f.minus_set().to_vec();
    minus.sort_unstable();
    let k = points.len();
    let mut sigma = vec![usize::MAX; k];
    let mut used_minus = vec![false; k];
    let mut used_target = vec![false; k];
    for (i, &(x, _)) in points.iter().enumerate() {
        // lexicographically first unused minus cell in the same row
        let Some(mi) = (0..k).find(|&t| !used_minus[t] && minus[t].0 == x) else {
            return Err(Error::NotSimple(
                "minus set does not match plus rows".into(),
            ));
        };
        used_minus[mi] = true;
        let target_y = minus[mi].1;
        // smallest unused point index carrying that y value
        let Some(j) = (0..k).find(|&t| !used_target[t] && points[t].1 == target_y) else {
            return Err(Error::NotSimple(format!(
                "no plus cell with second coordinate {target_y}"
            )));
        };
        used_target[j] = true;
        sigma[i] = j;
    }
    Ok((points, sigma))
}

/// c-cost of a simple move: `Σ_{F=+1} c - Σ_{F=-1} c`.
pub fn move_cost(f: &SimpleMove, c: &CostMatrix) -> f64 {
    let plus: f64 = f.plus_set().iter().map(|&(i, j)| c.value(i, j)).sum();
    let minus: f64 = f.minus_set().iter().map(|&(i, j)| c.value(i, j)).sum();
    plus - minus
}

/// Cyclical-monotonicity verdict for an edge set: true iff no simple move
/// with positive cells inside `g` has positive c-cost. Implemented as a
/// Bellman-Ford negative-cycle search on the bipartite exchange graph; a
/// violating simple move is returned as witness when one exists.
pub fn is_cyclically_monotone(
    g: &SupportGraph,
    c: &CostMatrix,
    k_max: Option<usize>,
) -> (bool, Option<SimpleMove>) {
    match negative_exchange_cycle(g, c, k_max) {
        Some(f) => (false, Some(f)),
        None => (true, None),
    }
}

/// Finds a simple move with `{F > 0} ⊆ g` and `c(F) > 0`, or `None`.
/// Nodes `0..n` are rows, `n..2n` are columns. Arcs `col y -> row x` with
/// weight `-c(x,y)` exist for `(x,y)` in `g` (cells to drain); arcs
/// `row x -> col y` with weight `+c(x,y)` exist for every pair (cells to
/// fill). A negative cycle is exactly a positive-cost admissible move.
pub(crate) fn negative_exchange_cycle(
    g: &SupportGraph,
    c: &CostMatrix,
    k_max: Option<usize>,
) -> Option<SimpleMove> {
    let n = g.n;
    if n != c.n() {
        return None;
    }
    let nv = 2 * n;
    let rounds = k_max.unwrap_or(nv).min(nv).max(1);
    let mut dist = vec![0.0_f64; nv];
    let mut parent = vec![usize::MAX; nv];
    let mut relaxed_node = usize::MAX;
    for round in 0..=rounds {
        relaxed_node = usize::MAX;
        // support arcs: col -> row, weight -c
        for &(x, y) in &g.edges {
            let u = n + y;
            let w = -c.value(x, y);
            if dist[u] + w < dist[x] - 1e-12 {
                dist[x] = dist[u] + w;
                parent[x] = u;
                relaxed_node = x;
            }
        }
        // fill arcs: row -> col, weight +c
        for x in 0..n {
            for y in 0..n {
                let v = n + y;
                let w = c.value(x, y);
                if dist[x] + w < dist[v] - 1e-12 {
                    dist[v] = dist[x] + w;
                    parent[v] = x;
                    relaxed_node = v;
                }
            }
        }
        if relaxed_node == usize::MAX {
            return None; // converged, no negative cycle
        }
        let _ = round;
    }
    // A node was still relaxed after `rounds` sweeps: walk parents into
    // the cycle.
    let mut v = relaxed_node;
    for _ in 0..nv {
        v = parent[v];
    }
    let mut cycle = vec![v];
    let mut u = parent[v];
    while u != v {
        cycle.push(u);
        u = parent[u];
    }
    cycle.reverse(); // now follows arc direction
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for k in 0..cycle.len() {
        let a = cycle[k];
        let b = cycle[(k + 1) % cycle.len()];
        if a >= n && b < n {
            plus.push((b, a - n)); // support cell, drained
        } else if a < n && b >= n {
            minus.push((a, b - n)); // filled cell
        }
    }
    SimpleMove::from_sets(n, &plus, &minus).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::{product_coupling, support, validate_coupling};

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn basic_move_on_n2() {
        let m = make_basic(0, 1, 0, 1).unwrap().as_move(2);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 1.0);
    }

    #[test]
    fn degenerate_basic_move_rejected() {
        assert!(matches!(make_basic(1, 1, 0, 2), Err(Error::DegenerateIndices)));
    }

    #[test]
    fn basic_move_count_up_to_sign() {
        // distinct index pairs {x1,x2} x {y1,y2}: C(3,2)^2 = 9
        let n = 3;
        let mut count = 0;
        for x1 in 0..n {
            for x2 in (x1 + 1)..n {
                for y1 in 0..n {
                    for y2 in (y1 + 1)..n {
                        make_basic(x1, x2, y1, y2).unwrap();
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 9);
    }

    #[test]
    fn pivotal_basis_expresses_basic_move() {
        // M = basic(0,1,0,1) on n=3, pivot (0,0): single coefficient +1 at (1,1)
        let m = make_basic(0, 1, 0, 1).unwrap().as_move(3);
        let coeffs = express_in_basis(&m, 0, 0);
        for ((i, j), v) in coeffs.entries() {
            if (i, j) == (1, 1) {
                assert!((v - 1.0).abs() < 1e-15);
            } else {
                assert!(v.abs() < 1e-15);
            }
        }
        let back = reconstruct_from_basis(&coeffs, 0, 0);
        assert!(back.table().max_abs_diff(m.table()) <= 1e-12);
    }

    #[test]
    fn averaged_basis_identity_for_simple_move() {
        // Eq. form: M = (1/#{M>0}) Σ_{x,y} M(x,y) Σ_{M(u,v)>0} (δx-δu)⊗(δy-δv)
        let f = SimpleMove::from_sets(4, &[(0, 1), (1, 2), (2, 0)], &[(0, 2), (1, 0), (2, 1)])
            .unwrap();
        let m = f.as_move();
        let n = m.n();
        let mut acc = Matrix::zeros(n);
        let positives: Vec<(usize, usize)> = m
            .table()
            .entries()
            .filter(|&(_, v)| v > 0.0)
            .map(|(ij, _)| ij)
            .collect();
        for ((x, y), v) in m.table().entries() {
            if v == 0.0 {
                continue;
            }
            for &(u, vv) in &positives {
                acc.add_at(x, y, v);
                acc.add_at(u, vv, v);
                acc.add_at(x, vv, -v);
                acc.add_at(u, y, -v);
            }
        }
        acc.scale(1.0 / positives.len() as f64);
        assert!(acc.max_abs_diff(m.table()) <= 1e-12);
    }

    #[test]
    fn admissibility_on_example_2_2() {
        let mu = pv(&[0.5, 0.5]);
        let nu = pv(&[2.0 / 3.0, 1.0 / 3.0]);
        let g1 = validate_coupling(
            Matrix::from_rows(vec![vec![1.0 / 6.0, 1.0 / 3.0], vec![0.5, 0.0]]).unwrap(),
            &mu,
            &nu,
        )
        .unwrap();
        // drains (0,1) and (1,0); the opposite orientation would drain the
        // empty cell (1,1) and is inadmissible
        let m = make_basic(0, 1, 1, 0).unwrap().as_move(2);
        let alpha = max_step(&m, &g1);
        assert!((alpha - 1.0 / 3.0).abs() <= 1e-12);
        assert!(is_admissible(&m, &g1));
        let mut t = g1.table().clone();
        for ((i, j), v) in m.table().entries() {
            t.add_at(i, j, -alpha * v);
        }
        t.clamp_tiny_negatives(1e-12);
        validate_coupling(t, &mu, &nu).unwrap();
    }

    #[test]
    fn inadmissible_when_positive_cell_outside_support() {
        let mu = pv(&[1.0, 0.0]);
        let g = product_coupling(&mu, &mu).unwrap();
        let m = make_basic(0, 1, 1, 0).unwrap().as_move(2); // +1 at (0,1)
        assert_eq!(max_step(&m, &g), 0.0);
        assert!(!is_admissible(&m, &g));
    }

    #[test]
    fn difference_criterion_on_example_2_2() {
        let mu = pv(&[0.5, 0.5]);
        let nu = pv(&[2.0 / 3.0, 1.0 / 3.0]);
        let g1 = validate_coupling(
            Matrix::from_rows(vec![vec![1.0 / 6.0, 1.0 / 3.0], vec![0.5, 0.0]]).unwrap(),
            &mu,
            &nu,
        )
        .unwrap();
        let g2 = validate_coupling(
            Matrix::from_rows(vec![vec![0.5, 0.0], vec![1.0 / 6.0, 1.0 / 3.0]]).unwrap(),
            &mu,
            &nu,
        )
        .unwrap();
        let m = Move::between(&g1, &g2).unwrap();
        let witnesses = difference_criterion(&m, &mu, &nu).unwrap();
        let (w1, w2) = witnesses.expect("criterion holds for an actual difference");
        let back = Move::between(&w1, &w2).unwrap();
        assert!(back.table().max_abs_diff(m.table()) <= 1e-9);
        // scaled far beyond the bound it must fail
        let big = m.scaled(10.0);
        assert!(difference_criterion(&big, &mu, &nu).unwrap().is_none());
    }

    #[test]
    fn decompose_basic_move_is_single_term() {
        let m = make_basic(0, 1, 0, 1).unwrap().as_move(3);
        let d = decompose_simple(&m).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert!((d.terms[0].0 - 1.0).abs() < 1e-12);
        assert!(d.reconstruct(3).max_abs_diff(m.table()) <= 1e-9);
    }

    #[test]
    fn decompose_combined_move() {
        let n = 3;
        let mut t = Matrix::zeros(n);
        for ((i, j), v) in make_basic(0, 1, 0, 1).unwrap().as_move(n).table().entries() {
            t.add_at(i, j, 2.0 * v);
        }
        for ((i, j), v) in make_basic(1, 2, 1, 2).unwrap().as_move(n).table().entries() {
            t.add_at(i, j, v);
        }
        let m = Move::new(t).unwrap();
        let d = decompose_simple(&m).unwrap();
        assert!(d.reconstruct(n).max_abs_diff(m.table()) <= 1e-9);
        // supports nest strictly
        let mut prev = m.table().clone();
        for (alpha, f) in &d.terms {
            let mut next = prev.clone();
            for &(i, j) in f.plus_set() {
                next.add_at(i, j, -alpha);
            }
            for &(i, j) in f.minus_set() {
                next.add_at(i, j, *alpha);
            }
            let count = |m: &Matrix| {
                m.entries()
                    .filter(|&(_, v)| v.abs() > SUPPORT_THRESHOLD)
                    .count()
            };
            assert!(count(&next) < count(&prev));
            prev = next;
        }
    }

    #[test]
    fn permutation_transposition_is_basic_move() {
        let points = [(0, 0), (1, 1)];
        let f = simple_from_permutation(&points, &[1, 0]).unwrap();
        let b = make_basic(0, 1, 0, 1).unwrap().as_simple(2);
        assert_eq!(f.as_move().table(), b.as_move().table());
    }

    #[test]
    fn permutation_identity_is_zero() {
        let points = [(0, 1), (2, 0)];
        let err = simple_from_permutation(&points, &[0, 1]);
        // all terms cancel: the zero table is simple with empty sets
        let f = err.unwrap();
        assert!(f.plus_set().is_empty());
        assert!(f.as_move().is_zero());
    }

    #[test]
    fn permutation_round_trip_three_cycle() {
        let points = [(0, 0), (1, 1), (2, 2)];
        let sigma = [1, 2, 0];
        let f = simple_from_permutation(&points, &sigma).unwrap();
        let (pts, sg) = permutation_of_simple(&f).unwrap();
        let f2 = simple_from_permutation(&pts, &sg).unwrap();
        assert_eq!(f.as_move().table(), f2.as_move().table());
    }

    #[test]
    fn move_cost_of_wide_basic() {
        // basic (0,2,0,2) under |i-j| on n=3: 0 + 0 - 2 - 2 = -4
        let c = CostMatrix::euclidean(3);
        let f = make_basic(0, 2, 0, 2).unwrap().as_simple(3);
        assert_eq!(move_cost(&f, &c), -4.0);
        assert_eq!(move_cost(&f.negated(), &c), 4.0);
    }

    #[test]
    fn single_edge_is_monotone() {
        let g = SupportGraph {
            n: 3,
            edges: vec![(0, 2)],
        };
        let (ok, w) = is_cyclically_monotone(&g, &CostMatrix::euclidean(3), None);
        assert!(ok);
        assert!(w.is_none());
    }

    #[test]
    fn independence_coupling_support_is_not_monotone() {
        let mu = pv(&[0.25, 0.25, 0.25, 0.25]);
        let nu = pv(&[0.1, 0.2, 0.3, 0.4]);
        let g = product_coupling(&mu, &nu).unwrap();
        let c = CostMatrix::sqrt_euclidean(4);
        let (ok, witness) = is_cyclically_monotone(&support(&g), &c, None);
        assert!(!ok);
        let f = witness.unwrap();
        assert!(move_cost(&f, &c) > 0.0);
        // the witness is admissible: positive cells inside the support
        assert!(max_step(&f.as_move(), &g) > 0.0);
    }
}
