//! Gini co-graduation machinery: the index, the maximal-homophily
//! (North-West) coupling, and basic-move connectivity paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moves::{make_basic, northwest_table, BasicMove};
use crate::tables::{validate_coupling, Coupling, Matrix, ProbabilityVector, SUPPORT_THRESHOLD};

/// Paired real observations `(x_i, y_i)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BivariateSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl BivariateSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Invalid(
                "sample needs equal-length non-empty coordinate vectors".into(),
            ));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("sample values must be finite".into()));
        }
        Ok(BivariateSample { x, y })
    }

    /// Expands a table of counts over values `1..=n` into a sample.
    pub fn from_counts(counts: &Matrix) -> Result<Self> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for ((i, j), v) in counts.entries() {
            let c = v.round() as usize;
            for _ in 0..c {
                x.push((i + 1) as f64);
                y.push((j + 1) as f64);
            }
        }
        BivariateSample::new(x, y)
    }
}

/// Gini's co-graduation index: `(M_min, M_max)` where `M_min` pairs both
/// sequences ascending and `M_max` pairs them counter-graduated.
pub fn cograduation_index(sample: &BivariateSample) -> (f64, f64) {
    let mut xs = sample.x.clone();
    let mut ys = sample.y.clone();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let n = xs.len();
    let m_min = xs.iter().zip(&ys).map(|(a, b)| (a - b).abs()).sum();
    let m_max = (0..n).map(|i| (xs[i] - ys[n - 1 - i]).abs()).sum();
    (m_min, m_max)
}

/// The homophily (North-West) coupling: lexicographic recursion
/// `γ_H(i,j) = min{ mu(i) - Σ_{k<j} γ_H(i,k), nu(j) - Σ_{h<i} γ_H(h,j) }`.
pub fn homophily_coupling(
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
) -> Result<Coupling> {
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: nu.len(),
        });
    }
    let table = northwest_table(mu.as_slice(), nu.as_slice());
    validate_coupling(table, mu, nu)
}

/// A basic-move path through the coupling polytope; applying the moves in
/// order as `γ <- γ - α M` stays inside the polytope at every prefix.
#[derive(Debug, Clone, Serialize)]
pub struct MovePath {
    pub start: Coupling,
    pub steps: Vec<(BasicMove, f64)>,
    pub end: Coupling,
}

impl MovePath {
    /// Replays the path from `start`, returning every intermediate table.
    pub fn prefixes(&self) -> Vec<Matrix> {
        let mut t = self.start.table().clone();
        let mut out = vec![t.clone()];
        for (mv, alpha) in &self.steps {
            mv.apply(&mut t, *alpha);
            out.push(t.clone());
        }
        out
    }
}

/// Basic-move path from `gamma` to the homophily coupling of its margins,
/// by lexicographic table scan. Witnesses are the smallest `i1 > i`, then
/// smallest `j1 > j`, carrying positive mass.
pub fn path_to_homophily(gamma: &Coupling) -> Result<MovePath> {
    let n = gamma.n();
    let mu = gamma.row_margin().clone();
    let nu = gamma.col_margin().clone();
    let mut t = gamma.table().clone();
    let mut steps = Vec::new();
    for i in 0..n {
        for j in 0..n {
            loop {
                let placed_row: f64 = (0..j).map(|k| t.get(i, k)).sum();
                let placed_col: f64 = (0..i).map(|h| t.get(h, j)).sum();
                let bound = (mu.get(i) - placed_row).min(nu.get(j) - placed_col);
                if t.get(i, j) >= bound - SUPPORT_THRESHOLD {
                    break;
                }
                let Some(i1) = ((i + 1)..n).find(|&h| t.get(h, j) > SUPPORT_THRESHOLD) else {
                    break;
                };
                let Some(j1) = ((j + 1)..n).find(|&k| t.get(i, k) > SUPPORT_THRESHOLD) else {
                    break;
                };
                // +1 at (i,j1),(i1,j); -1 at (i,j),(i1,j1); applied as γ - αM
                let mv = make_basic(i, i1, j1, j)?;
                let alpha = t.get(i, j1).min(t.get(i1, j));
                mv.apply(&mut t, alpha);
                t.clamp_tiny_negatives(SUPPORT_THRESHOLD);
                steps.push((mv, alpha));
            }
        }
    }
    let end = Coupling::rewrap(t, gamma)?;
    Ok(MovePath {
        start: gamma.clone(),
        steps,
        end,
    })
}

/// Basic-move path between two couplings with the same margins: the path
/// to the homophily coupling followed by the reversed path from the
/// target.
pub fn connect(gamma: &Coupling, target: &Coupling) -> Result<MovePath> {
    if gamma.n() != target.n() {
        return Err(Error::DimensionMismatch {
            expected: gamma.n(),
            got: target.n(),
        });
    }
    for i in 0..gamma.n() {
        let dr = (gamma.row_margin().get(i) - target.row_margin().get(i)).abs();
        let dc = (gamma.col_margin().get(i) - target.col_margin().get(i)).abs();
        if dr > crate::tables::MARGIN_TOL || dc > crate::tables::MARGIN_TOL {
            return Err(Error::MarginMismatch {
                axis: if dr > dc { 0 } else { 1 },
                index: i,
                residual: dr.max(dc),
            });
        }
    }
    let down = path_to_homophily(gamma)?;
    let up = path_to_homophily(target)?;
    let mut steps = down.steps;
    for (mv, alpha) in up.steps.into_iter().rev() {
        steps.push((mv.negated(), alpha));
    }
    // replay for the exact end table
    let mut t = gamma.table().clone();
    for (mv, alpha) in &steps {
        mv.apply(&mut t, *alpha);
    }
    let end = Coupling::rewrap(t, target)?;
    Ok(MovePath {
        start: gamma.clone(),
        steps,
        end,
    })
}
