//! Simulated annealing over the coupling polytope with basic-move
//! proposals, plus the replicate harness behind the first-move-acceptance
//! and convergence-profile grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::replicate_map;
use crate::tables::{cost_of, product_coupling, Coupling, CostMatrix, Matrix, ProbabilityVector};
use crate::transport::fill_diagonal;

/// Cooling schedule; `b` is the 1-based iteration index, so every
/// schedule starts at `tau0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Geometric { rho: f64 },
    Harmonic,
    Logarithmic,
}

impl Schedule {
    pub fn temperature(&self, tau0: f64, b: u64) -> f64 {
        match *self {
            Schedule::Geometric { rho } => tau0 * rho.powi(b.saturating_sub(1).min(1 << 30) as i32),
            Schedule::Harmonic => tau0 / b.max(1) as f64,
            Schedule::Logarithmic => tau0 / (1.0 + b.max(1) as f64).ln(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Schedule::Geometric { rho } = *self {
            if !(0.0 < rho && rho < 1.0) {
                return Err(Error::Invalid(format!("geometric ratio {rho} not in (0,1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub tau0: f64,
    pub steps: u64,
    pub schedule: Schedule,
    pub seed: u64,
    #[serde(skip, default = "default_cost")]
    pub cost: CostMatrix,
    #[serde(default)]
    pub log_temperature: bool,
}

fn default_cost() -> CostMatrix {
    CostMatrix::euclidean(1)
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0) {
            return Err(Error::Invalid(format!("tau0 {} must be > 0", self.tau0)));
        }
        if self.steps < 1 {
            return Err(Error::Invalid("steps must be >= 1".into()));
        }
        self.schedule.validate()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnealReport {
    pub final_cost: f64,
    pub final_coupling: Coupling,
    /// (iteration, cost) at every strict improvement of the running cost;
    /// entry 0 is the starting cost.
    pub best_trajectory: Vec<(u64, f64)>,
    pub accepted: u64,
    pub proposals: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperatures: Option<Vec<f64>>,
}

/// Proposal retries per chain step before giving up (only relevant for
/// margins whose polytope is a single point, where no move is admissible).
const MAX_PROPOSAL_RETRIES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StepOutcome {
    Inadmissible,
    Rejected,
    Accepted,
}

/// One SA chain over the polytope of couplings of (μ, ν).
struct Chain {
    table: Matrix,
    n: usize,
    cost: CostMatrix,
    k: f64,
    rng: ChaCha8Rng,
    b: u64,
    tau0: f64,
    schedule: Schedule,
    accepted: u64,
    proposals: u64,
}

impl Chain {
    fn new(
        mu: &ProbabilityVector,
        nu: &ProbabilityVector,
        cost: CostMatrix,
        tau0: f64,
        schedule: Schedule,
        seed: u64,
    ) -> Result<Self> {
        let n = cost.n();
        if mu.len() != n || nu.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mu.len().max(nu.len()),
            });
        }
        let gamma = product_coupling(mu, nu)?;
        let k = cost_of(&gamma, &cost)?;
        Ok(Chain {
            table: gamma.into_table(),
            n,
            cost,
            k,
            rng: ChaCha8Rng::seed_from_u64(seed),
            b: 0,
            tau0,
            schedule,
            accepted: 0,
            proposals: 0,
        })
    }

    /// One raw proposal at temperature `tau`: four indices drawn
    /// independently; a degenerate draw (equal rows or columns) or a
    /// drained cell at zero is an inadmissible proposal. The proposed
    /// move drains `(i1,j2)` and `(i2,j1)`; swapping the index labels
    /// covers the opposite orientation with equal probability. The
    /// Metropolis test uses `u ~ Uniform(0, alpha]`, while an accepted
    /// move is applied with the full coefficient `alpha`, so one drained
    /// cell hits exactly zero — this is what lets the chain settle on
    /// the (sparse) faces of the polytope.
    fn step_at(&mut self, tau: f64) -> StepOutcome {
        self.proposals += 1;
        let i1 = self.rng.gen_range(0..self.n);
        let i2 = self.rng.gen_range(0..self.n);
        let j1 = self.rng.gen_range(0..self.n);
        let j2 = self.rng.gen_range(0..self.n);
        if i1 == i2 || j1 == j2 {
            return StepOutcome::Inadmissible;
        }
        let drain = [(i1, j2), (i2, j1)];
        let fill = [(i1, j1), (i2, j2)];
        let alpha = self.table.get(drain[0].0, drain[0].1).min(self.table.get(drain[1].0, drain[1].1));
        if alpha <= 0.0 {
            return StepOutcome::Inadmissible;
        }
        // u uniform in (0, alpha]
        let u = alpha * (1.0 - self.rng.gen::<f64>());
        let dc = self.cost.value(fill[0].0, fill[0].1) + self.cost.value(fill[1].0, fill[1].1)
            - self.cost.value(drain[0].0, drain[0].1)
            - self.cost.value(drain[1].0, drain[1].1);
        let delta = u * dc;
        let p = if delta <= 0.0 {
            1.0
        } else if tau <= f64::MIN_POSITIVE {
            0.0
        } else {
            (-delta / tau).exp()
        };
        let v: f64 = self.rng.gen();
        if p > v {
            for &(i, j) in &drain {
                let cur = self.table.get(i, j);
                self.table.set(i, j, (cur - alpha).max(0.0));
            }
            for &(i, j) in &fill {
                self.table.add_at(i, j, alpha);
            }
            self.k += alpha * dc;
            self.accepted += 1;
            if self.accepted % 10_000 == 0 {
                self.resync();
            }
            StepOutcome::Accepted
        } else {
            StepOutcome::Rejected
        }
    }

    /// One chain step: proposals are retried until an admissible basic
    /// move comes up; the temperature decreases once per chain step.
    fn step(&mut self) -> StepOutcome {
        self.b += 1;
        let tau = self.schedule.temperature(self.tau0, self.b);
        for _ in 0..MAX_PROPOSAL_RETRIES {
            match self.step_at(tau) {
                StepOutcome::Inadmissible => continue,
                out => return out,
            }
        }
        // no admissible move found (e.g. a point-mass coupling)
        StepOutcome::Inadmissible
    }

    /// Repairs float drift: rescales the table to total mass one and
    /// recomputes the running cost.
    fn resync(&mut self) {
        self.table.clamp_tiny_negatives(1e-15);
        let total = self.table.total();
        if total > 0.0 {
            self.table.scale(1.0 / total);
        }
        self.k = self
            .table
            .entries()
            .map(|((i, j), v)| v * self.cost.value(i, j))
            .sum();
    }

    /// Retries proposals at the initial temperature until the first
    /// admissible one; reports whether it was accepted.
    fn first_admissible(&mut self) -> bool {
        loop {
            match self.step_at(self.tau0) {
                StepOutcome::Inadmissible => continue,
                StepOutcome::Accepted => return true,
                StepOutcome::Rejected => return false,
            }
        }
    }
}

/// Runs the annealing chain from the independence coupling, followed by
/// the diagonal-filling sweep when the cost is a metric.
pub fn anneal(
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
    cfg: &AnnealConfig,
) -> Result<AnnealReport> {
    cfg.validate()?;
    let base = product_coupling(mu, nu)?;
    let mut chain = Chain::new(mu, nu, cfg.cost.clone(), cfg.tau0, cfg.schedule, cfg.seed)?;
    let mut temperatures = cfg.log_temperature.then(Vec::new);
    let mut best = chain.k;
    let mut trajectory = vec![(0u64, best)];
    for b in 1..=cfg.steps {
        if let Some(ts) = &mut temperatures {
            ts.push(cfg.schedule.temperature(cfg.tau0, b));
        }
        let _ = chain.step();
        if chain.k < best {
            best = chain.k;
            trajectory.push((b, best));
        }
    }
    chain.resync();
    let mut coupling = Coupling::rewrap(chain.table, &base)?;
    if cfg.cost.metric_flag() {
        coupling = fill_diagonal(&coupling, &cfg.cost)?;
    }
    let final_cost = cost_of(&coupling, &cfg.cost)?;
    Ok(AnnealReport {
        final_cost,
        final_coupling: coupling,
        best_trajectory: trajectory,
        accepted: chain.accepted,
        proposals: chain.proposals,
        temperatures,
    })
}

/// Grid harness parameters for the acceptance / convergence experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub ns: Vec<usize>,
    pub tau0_grid: Vec<f64>,
    pub b_grid: Vec<u64>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_window() -> usize {
    100
}

impl ExperimentSpec {
    fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.tau0_grid.is_empty() || self.b_grid.is_empty() {
            return Err(Error::Invalid("experiment grids must be non-empty".into()));
        }
        if self.replicates < 1 {
            return Err(Error::Invalid("replicate count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AcceptanceCell {
    pub n: usize,
    pub tau0: f64,
    pub acceptance: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceCell {
    pub n: usize,
    pub steps: u64,
    pub proportion: f64,
}

/// Margin with i.i.d. uniform(0,1) entries, normalized.
pub fn uniform_margin(n: usize, rng: &mut ChaCha8Rng) -> ProbabilityVector {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            if let Ok(pv) = ProbabilityVector::new(v.iter().map(|x| x / s).collect()) {
                return pv;
            }
        }
    }
}

fn mix_seed(base: u64, salt: &[u64]) -> u64 {
    // splitmix64 over the salted base, for independent replicate streams
    let mut z = base;
    for &s in salt {
        z ^= s.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Acceptance probability of the first admissible proposal, averaged
/// over replicate margin pairs, for each (n, τ0) of the grid. Uses the
/// metric √|i−j| on {1..n}.
pub fn first_move_acceptance(spec: &ExperimentSpec) -> Result<Vec<AcceptanceCell>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &n in &spec.ns {
        for (ti, &tau0) in spec.tau0_grid.iter().enumerate() {
            let hits = replicate_map(spec.replicates, |r| {
                let s = mix_seed(spec.seed, &[1, n as u64, ti as u64, r as u64]);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let mu = uniform_margin(n, &mut rng);
                let nu = uniform_margin(n, &mut rng);
                let mut chain = Chain::new(
                    &mu,
                    &nu,
                    CostMatrix::sqrt_euclidean(n),
                    tau0,
                    Schedule::Geometric { rho: 0.95 },
                    mix_seed(s, &[2]),
                )
                .expect("dimensions match by construction");
                u64::from(chain.first_admissible())
            });
            let acceptance = hits.iter().sum::<u64>() as f64 / spec.replicates as f64;
            cells.push(AcceptanceCell { n, tau0, acceptance });
        }
    }
    Ok(cells)
}

/// Smallest τ0 of the grid whose first-move acceptance reaches `target`;
/// falls back to the largest grid value.
pub fn calibrate_tau0(
    n: usize,
    grid: &[f64],
    replicates: usize,
    seed: u64,
    target: f64,
) -> Result<f64> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let spec = ExperimentSpec {
        ns: vec![n],
        tau0_grid: sorted.clone(),
        b_grid: vec![1],
        replicates,
        seed,
        window: 100,
    };
    let cells = first_move_acceptance(&spec)?;
    for cell in &cells {
        if cell.acceptance >= target {
            return Ok(cell.tau0);
        }
    }
    Ok(*sorted.last().unwrap())
}

/// Proportion of accepted proposals in a window of further steps after
/// chains of length B, averaged over replicates, for each (n, B). The
/// initial temperature per n is calibrated to 0.95 first-move acceptance
/// over the spec's τ0 grid.
pub fn convergence_profile(spec: &ExperimentSpec) -> Result<Vec<ConvergenceCell>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &n in &spec.ns {
        let tau0 = calibrate_tau0(
            n,
            &spec.tau0_grid,
            spec.replicates.max(1000),
            mix_seed(spec.seed, &[3, n as u64]),
            0.95,
        )?;
        for &steps in &spec.b_grid {
            let props = replicate_map(spec.replicates, |r| {
                let s = mix_seed(spec.seed, &[4, n as u64, steps, r as u64]);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let mu = uniform_margin(n, &mut rng);
                let nu = uniform_margin(n, &mut rng);
                let mut chain = Chain::new(
                    &mu,
                    &nu,
                    CostMatrix::sqrt_euclidean(n),
                    tau0,
                    Schedule::Geometric { rho: 0.95 },
                    mix_seed(s, &[5]),
                )
                .expect("dimensions match by construction");
                for _ in 0..steps {
                    chain.step();
                }
                // the window counts raw proposals (no admissibility
                // retries), with the cooling clock still advancing
                let mut acc = 0usize;
                for _ in 0..spec.window {
                    chain.b += 1;
                    let tau = chain.schedule.temperature(chain.tau0, chain.b);
                    if chain.step_at(tau) == StepOutcome::Accepted {
                        acc += 1;
                    }
                }
                acc as f64 / spec.window as f64
            });
            let proportion = props.iter().sum::<f64>() / spec.replicates as f64;
            cells.push(ConvergenceCell { n, steps, proportion });
        }
    }
    Ok(cells)
}
