//! Three-margin extension: maximal homophily table, T1/T2 basic moves,
//! and connectivity paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moves::northwest_table;
use crate::tables::{Matrix, ProbabilityVector, MARGIN_TOL, SUPPORT_THRESHOLD};

/// Dense cubic table, lexicographic (i, j, k) storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Vec<f64>>>", into = "Vec<Vec<Vec<f64>>>")]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] += v;
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |a, (&x, &y)| a.max((x - y).abs()))
    }

    /// The three one-dimensional margins.
    pub fn margins(&self) -> [Vec<f64>; 3] {
        let n = self.n;
        let mut m0 = vec![0.0; n];
        let mut m1 = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.get(i, j, k);
                    m0[i] += v;
                    m1[j] += v;
                    m2[k] += v;
                }
            }
        }
        [m0, m1, m2]
    }

    /// The n slices `z = k`, each as an n by n matrix.
    pub fn slices(&self) -> Vec<Matrix> {
        (0..self.n)
            .map(|k| Matrix::from_fn(self.n, |i, j| self.get(i, j, k)))
            .collect()
    }

    pub fn clamp_tiny_negatives(&mut self, eps: f64) {
        for v in &mut self.data {
            if *v < 0.0 && *v > -eps {
                *v = 0.0;
            }
        }
    }
}

impl TryFrom<Vec<Vec<Vec<f64>>>> for Tensor3 {
    type Error = Error;
    fn try_from(v: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = v.len();
        let mut t = Tensor3::zeros(n);
        for (i, plane) in v.iter().enumerate() {
            if plane.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: plane.len(),
                });
            }
            for (j, row) in plane.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: row.len(),
                    });
                }
                for (k, &x) in row.iter().enumerate() {
                    t.set(i, j, k, x);
                }
            }
        }
        Ok(t)
    }
}

impl From<Tensor3> for Vec<Vec<Vec<f64>>> {
    fn from(t: Tensor3) -> Self {
        let n = t.n;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| t.get(i, j, k)).collect())
                    .collect()
            })
            .collect()
    }
}

/// Non-negative cubic table with three prescribed margins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling3 {
    table: Tensor3,
    margins: [ProbabilityVector; 3],
}

impl Coupling3 {
    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn table(&self) -> &Tensor3 {
        &self.table
    }

    pub fn margins(&self) -> &[ProbabilityVector; 3] {
        &self.margins
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.table.get(i, j, k)
    }
}

/// Checks non-negativity and the three margin equations within 1e-9.
pub fn validate_coupling3(
    table: Tensor3,
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
    zeta: &ProbabilityVector,
) -> Result<Coupling3> {
    let n = table.n();
    for m in [mu, nu, zeta] {
        if m.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.len(),
            });
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = table.get(i, j, k);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NegativeEntry {
                        index: (i, j * n + k),
                        value: v,
                    });
                }
            }
        }
    }
    let sums = table.margins();
    for (axis, (sum, target)) in sums.iter().zip([mu, nu, zeta]).enumerate() {
        for (idx, (&s, &t)) in sum.iter().zip(target.as_slice()).enumerate() {
            if (s - t).abs() > MARGIN_TOL {
                return Err(Error::MarginMismatch {
                    axis,
                    index: idx,
                    residual: (s - t).abs(),
                });
            }
        }
    }
    Ok(Coupling3 {
        table,
        margins: [mu.clone(), nu.clone(), zeta.clone()],
    })
}

/// Independence table `mu ⊗ nu ⊗ zeta`.
pub fn product_coupling3(
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
    zeta: &ProbabilityVector,
) -> Result<Coupling3> {
    let n = mu.len();
    let mut t = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                t.set(i, j, k, mu.get(i) * nu.get(j) * zeta.get(k));
            }
        }
    }
    validate_coupling3(t, mu, nu, zeta)
}

/// Tri-variate maximal-homophily table: the lexicographic recursion over
/// (i, j, k) where each cell receives the minimum of the three remaining
/// marginal masses.
pub fn homophily3(
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
    zeta: &ProbabilityVector,
) -> Result<Coupling3> {
    let n = mu.len();
    if nu.len() != n || zeta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: nu.len().max(zeta.len()),
        });
    }
    let mut rem_mu: Vec<f64> = mu.as_slice().to_vec();
    let mut rem_nu: Vec<f64> = nu.as_slice().to_vec();
    let mut rem_ze: Vec<f64> = zeta.as_slice().to_vec();
    let mut t = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = rem_mu[i].min(rem_nu[j]).min(rem_ze[k]).max(0.0);
                t.set(i, j, k, v);
                rem_mu[i] -= v;
                rem_nu[j] -= v;
                rem_ze[k] -= v;
            }
        }
    }
    validate_coupling3(t, mu, nu, zeta)
}

/// The bivariate lifting route: North-West rule applied to the (i, j)
/// homophily coupling flattened lexicographically, against `zeta`.
/// Agrees with [`homophily3`]; kept as an independent computation.
pub fn homophily3_lifted(
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
    zeta: &ProbabilityVector,
) -> Result<Tensor3> {
    let n = mu.len();
    let g2 = crate::homophily::homophily_coupling(mu, nu)?;
    // flatten to a length n^2 margin, pad zeta to the same length
    let flat: Vec<f64> = (0..n * n).map(|c| g2.get(c / n, c % n)).collect();
    let mut z = vec![0.0; n * n];
    z[..n].copy_from_slice(zeta.as_slice());
    let nw = northwest_table(&flat, &z);
    let mut t = Tensor3::zeros(n);
    for c in 0..n * n {
        for k in 0..n {
            t.set(c / n, c % n, k, nw.get(c, k));
        }
    }
    Ok(t)
}

/// Kind of tri-variate basic move: T1 has its two `+1` cells sharing one
/// index; T2's `+1` cells differ in all indices; the six-cell move of the
/// connectivity proof is composite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TriMoveKind {
    T1,
    T2,
    Composite,
}

/// Sparse integer table with all three margins zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriMove {
    pub cells: Vec<(usize, usize, usize, i32)>,
    pub kind: TriMoveKind,
}

impl TriMove {
    /// Builds a tri-variate move from (index, coefficient) cells, checking
    /// the zero-margin invariant and classifying the kind.
    pub fn new(n: usize, raw: &[(usize, usize, usize, i32)]) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for &(i, j, k, c) in raw {
            *map.entry((i, j, k)).or_insert(0) += c;
        }
        map.retain(|_, c| *c != 0);
        let cells: Vec<(usize, usize, usize, i32)> =
            map.into_iter().map(|((i, j, k), c)| (i, j, k, c)).collect();
        let mut m0 = vec![0i64; n];
        let mut m1 = vec![0i64; n];
        let mut m2 = vec![0i64; n];
        for &(i, j, k, c) in &cells {
            m0[i] += c as i64;
            m1[j] += c as i64;
            m2[k] += c as i64;
        }
        if m0.iter().chain(&m1).chain(&m2).any(|&s| s != 0) {
            return Err(Error::NotAMove { residual: 1.0 });
        }
        let plus: Vec<_> = cells.iter().filter(|c| c.3 > 0).collect();
        let kind = if cells.len() > 4 || plus.len() > 2 {
            TriMoveKind::Composite
        } else if plus.len() == 2 {
            let a = plus[0];
            let b = plus[1];
            if a.0 == b.0 || a.1 == b.1 || a.2 == b.2 {
                TriMoveKind::T1
            } else {
                TriMoveKind::T2
            }
        } else {
            TriMoveKind::Composite
        };
        Ok(TriMove { cells, kind })
    }

    pub fn apply(&self, t: &mut Tensor3, alpha: f64) {
        for &(i, j, k, c) in &self.cells {
            t.add_at(i, j, k, -alpha * c as f64);
        }
    }
}

/// Path of tri-variate basic moves from `gamma` to the maximal-homophily
/// table, by lexicographic scan; every prefix keeps the three margins.
pub fn path_to_homophily3(gamma: &Coupling3) -> Result<Vec<(TriMove, f64)>> {
    let n = gamma.n();
    let [mu, nu, zeta] = gamma.margins().clone();
    let mut t = gamma.table().clone();
    let mut steps = Vec::new();
    // remaining masses before the lexicographic position (i, j, k)
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                loop {
                    let rem_mu =
                        mu.get(i) - lex_sum(&t, n, |jj, kk| (jj, kk) < (j, k), Axis::Mu(i));
                    let rem_nu =
                        nu.get(j) - lex_sum(&t, n, |ii, kk| (ii, kk) < (i, k), Axis::Nu(j));
                    let rem_ze =
                        zeta.get(k) - lex_sum(&t, n, |ii, jj| (ii, jj) < (i, j), Axis::Zeta(k));
                    let bound = rem_mu.min(rem_nu).min(rem_ze);
                    if t.get(i, j, k) >= bound - SUPPORT_THRESHOLD {
                        break;
                    }
                    // witnesses, lexicographically smallest
                    let w1 = find_lex(n, |jj, kk| {
                        (jj, kk) > (j, k) && t.get(i, jj, kk) > SUPPORT_THRESHOLD
                    });
                    let w2 = find_lex(n, |ii, kk| {
                        (ii, kk) > (i, k) && t.get(ii, j, kk) > SUPPORT_THRESHOLD
                    });
                    let w3 = find_lex(n, |ii, jj| {
                        (ii, jj) > (i, j) && t.get(ii, jj, k) > SUPPORT_THRESHOLD
                    });
                    let (Some((j1, k1)), Some((i2, k2)), Some((i3, j3))) = (w1, w2, w3) else {
                        break;
                    };
                    let alpha = t
                        .get(i, j1, k1)
                        .min(t.get(i2, j, k2))
                        .min(t.get(i3, j3, k));
                    // composite move: -1 at the target and the two carry
                    // cells, +1 at the three witnesses
                    let raw = [
                        (i, j, k, -1),
                        (i2, j1, k1, -1),
                        (i3, j3, k2, -1),
                        (i, j1, k1, 1),
                        (i2, j, k2, 1),
                        (i3, j3, k, 1),
                    ];
                    let composite = TriMove::new(n, &raw)?;
                    if composite.cells.len() <= 4 {
                        composite.apply(&mut t, alpha);
                        t.clamp_tiny_negatives(SUPPORT_THRESHOLD);
                        steps.push((composite, alpha));
                    } else {
                        // split into two basic moves; the second factor is
                        // applied first so that every prefix stays valid
                        let m2 = TriMove::new(
                            n,
                            &[
                                (i2, j, k, -1),
                                (i3, j3, k2, -1),
                                (i2, j, k2, 1),
                                (i3, j3, k, 1),
                            ],
                        )?;
                        let m1 = TriMove::new(
                            n,
                            &[
                                (i, j, k, -1),
                                (i2, j1, k1, -1),
                                (i, j1, k1, 1),
                                (i2, j, k, 1),
                            ],
                        )?;
                        for m in [m2, m1] {
                            if m.cells.is_empty() {
                                continue;
                            }
                            m.apply(&mut t, alpha);
                            t.clamp_tiny_negatives(SUPPORT_THRESHOLD);
                            steps.push((m, alpha));
                        }
                    }
                }
            }
        }
    }
    // the scan terminates at the maximal-homophily table
    let target = homophily3(&mu, &nu, &zeta)?;
    if t.max_abs_diff(target.table()) > MARGIN_TOL {
        return Err(Error::Invalid(
            "tri-variate scan did not reach the homophily table".into(),
        ));
    }
    Ok(steps)
}

enum Axis {
    Mu(usize),
    Nu(usize),
    Zeta(usize),
}

fn lex_sum(t: &Tensor3, n: usize, pred: impl Fn(usize, usize) -> bool, axis: Axis) -> f64 {
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            if !pred(a, b) {
                continue;
            }
            s += match axis {
                Axis::Mu(i) => t.get(i, a, b),
                Axis::Nu(j) => t.get(a, j, b),
                Axis::Zeta(k) => t.get(a, b, k),
            };
        }
    }
    s
}

fn find_lex(n: usize, pred: impl Fn(usize, usize) -> bool) -> Option<(usize, usize)> {
    for a in 0..n {
        for b in 0..n {
            if pred(a, b) {
                return Some((a, b));
            }
        }
    }
    None
}
