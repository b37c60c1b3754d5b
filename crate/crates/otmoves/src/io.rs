//! Problem-file parsing (JSON), CSV emission, and canonical rounding for
//! machine-readable outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tables::{CostMatrix, Matrix, ProbabilityVector};

/// Cost field of a problem file: either a named generator or an explicit
/// square matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Named(String),
    Entries(Vec<Vec<f64>>),
}

impl CostSpec {
    /// Materializes the cost for a ground set of size `n`. The named
    /// generators are `euclidean` (|i−j|) and `sqrt` (√|i−j|).
    pub fn build(&self, n: usize) -> Result<CostMatrix> {
        match self {
            CostSpec::Named(name) => match name.as_str() {
                "euclidean" => Ok(CostMatrix::euclidean(n)),
                "sqrt" => Ok(CostMatrix::sqrt_euclidean(n)),
                other => Err(Error::Parse(format!(
                    "unknown cost generator {other:?}; expected \"euclidean\" or \"sqrt\""
                ))),
            },
            CostSpec::Entries(rows) => {
                let m = Matrix::from_rows(rows.clone())?;
                if m.n() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: m.n(),
                    });
                }
                // prefer the metric-flagged wrapper when the axioms hold
                CostMatrix::new_metric(m.clone()).or_else(|_| CostMatrix::new(m))
            }
        }
    }
}

fn default_cost_spec() -> CostSpec {
    CostSpec::Named("euclidean".into())
}

/// On-disk problem: two (or three) margins and a cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<Vec<f64>>,
    #[serde(default = "default_cost_spec")]
    pub cost: CostSpec,
}

/// Parsed, validated problem.
pub struct Problem {
    pub mu: ProbabilityVector,
    pub nu: ProbabilityVector,
    pub zeta: Option<ProbabilityVector>,
    pub cost: CostMatrix,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<ProblemFile> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("problem file: {e}")))
    }

    pub fn validate(&self) -> Result<Problem> {
        let mu = ProbabilityVector::new(self.mu.clone())?;
        let nu = ProbabilityVector::new(self.nu.clone())?;
        if nu.len() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                got: nu.len(),
            });
        }
        let zeta = match &self.zeta {
            None => None,
            Some(z) => {
                let z = ProbabilityVector::new(z.clone())?;
                if z.len() != mu.len() {
                    return Err(Error::DimensionMismatch {
                        expected: mu.len(),
                        got: z.len(),
                    });
                }
                Some(z)
            }
        };
        let cost = self.cost.build(mu.len())?;
        Ok(Problem { mu, nu, zeta, cost })
    }
}

/// Rounds to 12 significant digits, the canonical output precision.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor();
    let scale = 10f64.powf(11.0 - mag);
    (x * scale).round() / scale
}

/// Serializes rows of an already-serializable record type as CSV with the
/// given header; numbers are emitted at canonical precision.
pub fn to_csv<T: Serialize>(header: &[&str], rows: &[T]) -> Result<String> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let value =
            serde_json::to_value(row).map_err(|e| Error::Parse(format!("csv encode: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("csv rows must be flat records".into()))?;
        let fields: Vec<String> = header
            .iter()
            .map(|key| match obj.get(*key) {
                Some(serde_json::Value::Number(n)) => {
                    format_number(n.as_f64().unwrap_or(f64::NAN))
                }
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(other) => other.to_string(),
                None => String::new(),
            })
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn format_number(x: f64) -> String {
    format!("{}", round_sig(x))
}

/// Parses a CSV of floats (no header) into a square matrix.
pub fn matrix_from_csv(text: &str) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("csv line {}: {e}", ln + 1)))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    Matrix::from_rows(rows)
}

/// Emits a matrix as CSV at canonical precision.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.n() {
        let row: Vec<String> = (0..m.n()).map(|j| format_number(m.get(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
