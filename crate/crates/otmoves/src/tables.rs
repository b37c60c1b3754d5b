//! Core data types: margins, cost matrices, couplings and support graphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual tolerance on margin equations.
pub const MARGIN_TOL: f64 = 1e-9;
/// Absolute threshold below which a table entry is not part of the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
/// Margins whose sum deviates from 1 by at most this are renormalized;
/// larger deviations are rejected.
pub const RENORM_TOL: f64 = 1e-3;
/// Tolerance for metric axioms and move-margin checks.
pub const EXACT_TOL: f64 = 1e-12;

/// Dense square matrix, row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                s[j] += self.data[i * self.n + j];
            }
        }
        s
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        let n = self.n;
        self.data
            .iter()
            .enumerate()
            .map(move |(k, &v)| ((k / n, k % n), v))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
    }

    /// Entrywise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |a, (&x, &y)| a.max((x - y).abs()))
    }

    /// Clamps entries in (-eps, 0) to exactly zero.
    pub fn clamp_tiny_negatives(&mut self, eps: f64) {
        for v in &mut self.data {
            if *v < 0.0 && *v > -eps {
                *v = 0.0;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        (0..m.n)
            .map(|i| m.data[i * m.n..(i + 1) * m.n].to_vec())
            .collect()
    }
}

/// Non-negative vector summing to one (after renormalization of drifts
/// up to [`RENORM_TOL`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("empty probability vector".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NegativeEntry {
                    index: (i, 0),
                    value: v,
                });
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > RENORM_TOL {
            return Err(Error::NotNormalized { sum });
        }
        let values = values.iter().map(|v| v / sum).collect();
        Ok(ProbabilityVector(values))
    }

    /// Dirac mass at `x`.
    pub fn dirac(n: usize, x: usize) -> Self {
        let mut v = vec![0.0; n];
        v[x] = 1.0;
        ProbabilityVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Pointwise mixture `(1-t)*self + t*other`.
    pub fn mix(&self, other: &ProbabilityVector, t: f64) -> Result<ProbabilityVector> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        ProbabilityVector::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| (1.0 - t) * a + t * b)
                .collect(),
        )
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbabilityVector::new(v)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

/// Non-negative ground cost, optionally certified as a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    entries: Matrix,
    metric: bool,
}

impl CostMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        Self::check_nonneg(&entries)?;
        Ok(CostMatrix {
            entries,
            metric: false,
        })
    }

    /// Builds a cost certified as a metric; fails when any axiom is
    /// violated beyond [`EXACT_TOL`].
    pub fn new_metric(entries: Matrix) -> Result<Self> {
        Self::check_nonneg(&entries)?;
        let c = CostMatrix {
            entries,
            metric: true,
        };
        c.check_metric()?;
        Ok(c)
    }

    fn check_nonneg(entries: &Matrix) -> Result<()> {
        for ((i, j), v) in entries.entries() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NegativeEntry {
                    index: (i, j),
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// Zero diagonal, symmetry and triangle inequality within [`EXACT_TOL`].
    pub fn check_metric(&self) -> Result<()> {
        let n = self.n();
        for x in 0..n {
            if self.value(x, x).abs() > EXACT_TOL {
                return Err(Error::NotMetric(format!("nonzero diagonal at {x}")));
            }
        }
        for x in 0..n {
            for y in 0..n {
                if (self.value(x, y) - self.value(y, x)).abs() > EXACT_TOL {
                    return Err(Error::NotMetric(format!("asymmetric at ({x},{y})")));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if self.value(x, y) > self.value(x, z) + self.value(z, y) + EXACT_TOL {
                        return Err(Error::NotMetric(format!(
                            "triangle inequality fails for ({x},{z},{y})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `d(i,j) = |i - j|` on `{0, .., n-1}`.
    pub fn euclidean(n: usize) -> Self {
        CostMatrix {
            entries: Matrix::from_fn(n, |i, j| (i as f64 - j as f64).abs()),
            metric: true,
        }
    }

    /// `d(i,j) = sqrt(|i - j|)` on `{0, .., n-1}`.
    pub fn sqrt_euclidean(n: usize) -> Self {
        CostMatrix {
            entries: Matrix::from_fn(n, |i, j| (i as f64 - j as f64).abs().sqrt()),
            metric: true,
        }
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.entries.get(x, y)
    }

    pub fn n(&self) -> usize {
        self.entries.n()
    }

    pub fn metric_flag(&self) -> bool {
        self.metric
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }
}

/// A point of the transportation polytope: non-negative table with
/// prescribed margins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    #[serde(rename = "table")]
    table: Matrix,
    #[serde(rename = "mu")]
    row_margin: ProbabilityVector,
    #[serde(rename = "nu")]
    col_margin: ProbabilityVector,
}

#[derive(Deserialize)]
struct CouplingRaw {
    table: Matrix,
    mu: ProbabilityVector,
    nu: ProbabilityVector,
}

impl<'de> Deserialize<'de> for Coupling {
    fn deserialize<D>(de: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = CouplingRaw::deserialize(de)?;
        validate_coupling(raw.table, &raw.mu, &raw.nu).map_err(serde::de::Error::custom)
    }
}

impl Coupling {
    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn table(&self) -> &Matrix {
        &self.table
    }

    pub fn row_margin(&self) -> &ProbabilityVector {
        &self.row_margin
    }

    pub fn col_margin(&self) -> &ProbabilityVector {
        &self.col_margin
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.table.get(i, j)
    }

    pub fn into_table(self) -> Matrix {
        self.table
    }

    /// Re-wraps a table produced by margin-preserving operations,
    /// clamping float noise in `(-MARGIN_TOL, 0)` before validation.
    pub(crate) fn rewrap(mut table: Matrix, like: &Coupling) -> Result<Coupling> {
        table.clamp_tiny_negatives(MARGIN_TOL);
        validate_coupling(table, &like.row_margin, &like.col_margin)
    }
}

/// Checks non-negativity and both margin equations within [`MARGIN_TOL`].
pub fn validate_coupling(
    table: Matrix,
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
) -> Result<Coupling> {
    let n = table.n();
    if mu.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mu.len(),
        });
    }
    if nu.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: nu.len(),
        });
    }
    for ((i, j), v) in table.entries() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NegativeEntry {
                index: (i, j),
                value: v,
            });
        }
    }
    check_margin(&table.row_sums(), mu.as_slice(), 0)?;
    check_margin(&table.col_sums(), nu.as_slice(), 1)?;
    Ok(Coupling {
        table,
        row_margin: mu.clone(),
        col_margin: nu.clone(),
    })
}

fn check_margin(sums: &[f64], target: &[f64], axis: usize) -> Result<()> {
    let mut worst = 0.0_f64;
    let mut worst_idx = 0;
    for (i, (&s, &t)) in sums.iter().zip(target).enumerate() {
        let r = (s - t).abs();
        if r > worst {
            worst = r;
            worst_idx = i;
        }
    }
    if worst > MARGIN_TOL {
        return Err(Error::MarginMismatch {
            axis,
            index: worst_idx,
            residual: worst,
        });
    }
    Ok(())
}

/// Independence coupling `mu ⊗ nu`.
pub fn product_coupling(mu: &ProbabilityVector, nu: &ProbabilityVector) -> Result<Coupling> {
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: nu.len(),
        });
    }
    let table = Matrix::from_fn(mu.len(), |i, j| mu.get(i) * nu.get(j));
    validate_coupling(table, mu, nu)
}

/// Expected cost of a coupling.
pub fn cost_of(gamma: &Coupling, c: &CostMatrix) -> Result<f64> {
    if gamma.n() != c.n() {
        return Err(Error::DimensionMismatch {
            expected: gamma.n(),
            got: c.n(),
        });
    }
    Ok(gamma
        .table()
        .entries()
        .map(|((i, j), v)| c.value(i, j) * v)
        .sum())
}

/// Strict-positivity set of a table, as a directed graph on `{0..n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

pub fn support(gamma: &Coupling) -> SupportGraph {
    support_of_table(gamma.table())
}

pub fn support_of_table(table: &Matrix) -> SupportGraph {
    let edges = table
        .entries()
        .filter(|&(_, v)| v > SUPPORT_THRESHOLD)
        .map(|(ij, _)| ij)
        .collect();
    SupportGraph {
        n: table.n(),
        edges,
    }
}

/// One weakly-connected component of a support graph, with the marginal
/// mass it carries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub vertices: Vec<usize>,
    pub mu_mass: f64,
    pub nu_mass: f64,
}

/// Weakly-connected components of the support graph; isolated vertices
/// form singleton components.
pub fn support_components(gamma: &Coupling) -> Vec<Component> {
    let g = support(gamma);
    let n = g.n;
    let mut adj = vec![Vec::new(); n];
    for &(x, y) in &g.edges {
        adj[x].push(y);
        adj[y].push(x);
    }
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut verts = Vec::new();
        seen[start] = true;
        while let Some(v) = stack.pop() {
            verts.push(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        verts.sort_unstable();
        let mu_mass = verts.iter().map(|&v| gamma.row_margin().get(v)).sum();
        let nu_mass = verts.iter().map(|&v| gamma.col_margin().get(v)).sum();
        components.push(Component {
            vertices: verts,
            mu_mass,
            nu_mass,
        });
    }
    components
}

/// True iff the support has at most `2n - 1` edges, the vertex bound of
/// the coupling polytope.
pub fn vertex_support_check(gamma: &Coupling) -> bool {
    support(gamma).edges.len() <= 2 * gamma.n() - 1
}
