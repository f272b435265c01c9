//! Brute-force reference computations.
//!
//! Everything here enumerates the joint change-state space directly, with
//! per-stream likelihood tables built by literal per-state products. None of
//! it shares code with the message-passing path beyond the model layer, so
//! agreement between the two is a real cross-check and not a tautology.
//! Costs are exponential in the node count; every entry point takes or
//! applies an evaluation budget and refuses instances over it.

use crate::logsum::{normalize_log_weights, LogSumAccumulator};
use crate::model::{
    normalize_subset, sample_change_points, sample_observations, ModelError, NetworkModel,
    ObservationPanel, Phase,
};
use rand::Rng;
use thiserror::Error;

/// Default cap on `node_count * cells` evaluations for exact enumeration.
pub const DEFAULT_CELL_BUDGET: u64 = 10_000_000;

/// Attempt cap for rejection sampling of conditioned change configurations.
const MAX_CONDITIONING_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("exact enumeration needs {required} evaluations, over the budget of {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("panel shape ({nodes} nodes, {edges} edges) does not match the model ({model_nodes} nodes, {model_edges} edges)")]
    PanelShapeMismatch {
        nodes: usize,
        edges: usize,
        model_nodes: usize,
        model_edges: usize,
    },
    #[error("panel horizon {horizon} is shorter than the requested n = {n}")]
    HorizonTooShort { horizon: usize, n: usize },
    #[error("change hypotheses place the change at time >= 1")]
    ZeroChangeTime,
    #[error("diagnostic grid is empty")]
    EmptyGrid,
    #[error("diagnostic grid contains n = {n} before the conditioned change at {k}")]
    GridBeforeChange { n: usize, k: u64 },
    #[error("rejection sampler missed the conditioning event {attempts} times in a row")]
    ConditioningTooRare { attempts: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_panel(
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
) -> Result<(), OracleError> {
    if panel.node_count() != model.node_count() || panel.edge_count() != model.edge_count() {
        return Err(OracleError::PanelShapeMismatch {
            nodes: panel.node_count(),
            edges: panel.edge_count(),
            model_nodes: model.node_count(),
            model_edges: model.edge_count(),
        });
    }
    if panel.horizon() < n {
        return Err(OracleError::HorizonTooShort {
            horizon: panel.horizon(),
            n,
        });
    }
    Ok(())
}

/// Guard `node_count * width^node_count` against the budget and return the
/// cell count.
fn guarded_cells(d: usize, width: usize, budget: u64) -> Result<usize, OracleError> {
    let required = (width as u128)
        .checked_pow(d as u32)
        .and_then(|cells| cells.checked_mul(d as u128))
        .unwrap_or(u128::MAX);
    if required > budget as u128 {
        return Err(OracleError::BudgetExceeded { required, budget });
    }
    Ok((required / d as u128) as usize)
}

/// Log likelihood of the first `n` observations for every change state in
/// 0..width, where state s < width - 1 means a switch at time s + 1 and the
/// last state means the switch happens after any represented time. Literal
/// per-state product, quadratic on purpose.
fn direct_log_lik_table(
    density: &crate::model::TwoPhaseDensity,
    stream: &[f64],
    n: usize,
    width: usize,
) -> Result<Vec<f64>, OracleError> {
    (0..width)
        .map(|s| {
            let mut total = 0.0;
            for (t, &x) in stream.iter().enumerate().take(n) {
                let phase = if s + 1 < width && t >= s {
                    Phase::Post
                } else {
                    Phase::Pre
                };
                total += density.log_density(phase, x)?;
            }
            Ok(total)
        })
        .collect()
}

/// Log prior mass for every change state in 0..width: exact times 1..width-1
/// then the lumped tail.
fn direct_log_prior_table(prior: &crate::model::GeometricPrior, width: usize) -> Vec<f64> {
    let mut table: Vec<f64> = (0..width - 1)
        .map(|s| prior.pmf(s as u64 + 1).ln())
        .collect();
    table.push(prior.survival(width - 1).ln());
    table
}

// ---------------------------------------------------------------------------
// Exact joint posterior
// ---------------------------------------------------------------------------

/// Exact joint posterior over all (n + 1)^d lumped change-state cells.
/// Cell digits follow node order, first node most significant.
#[derive(Debug, Clone)]
pub struct JointPosteriorTable {
    n: usize,
    node_count: usize,
    probs: Vec<f64>,
}

impl JointPosteriorTable {
    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn stride(&self, j: usize) -> usize {
        (self.n + 1).pow((self.node_count - 1 - j) as u32)
    }

    fn digit(&self, idx: usize, j: usize) -> usize {
        idx / self.stride(j) % (self.n + 1)
    }

    pub fn prob(&self, states: &[usize]) -> f64 {
        assert_eq!(states.len(), self.node_count);
        let idx = states
            .iter()
            .enumerate()
            .map(|(j, &s)| s * self.stride(j))
            .sum::<usize>();
        self.probs[idx]
    }

    pub fn node_marginal(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n + 1];
        for (idx, &p) in self.probs.iter().enumerate() {
            out[self.digit(idx, j)] += p;
        }
        out
    }

    /// Joint marginal of (state_i, state_j), row-major in state_i. The pair
    /// need not be adjacent.
    pub fn pair_marginal(&self, i: usize, j: usize) -> Vec<f64> {
        let width = self.n + 1;
        let mut out = vec![0.0; width * width];
        for (idx, &p) in self.probs.iter().enumerate() {
            out[self.digit(idx, i) * width + self.digit(idx, j)] += p;
        }
        out
    }

    /// P(min change time over `subset` <= n | data).
    pub fn subset_min_cdf(&self, subset: &[usize]) -> Result<f64, ModelError> {
        let subset = normalize_subset(self.node_count, subset)?;
        let mut beyond = 0.0;
        for (idx, &p) in self.probs.iter().enumerate() {
            if subset.iter().all(|&j| self.digit(idx, j) == self.n) {
                beyond += p;
            }
        }
        Ok((1.0 - beyond).clamp(0.0, 1.0))
    }
}

/// Enumerate the exact joint posterior over lumped change states. Cost is
/// d * (n + 1)^d table lookups, guarded by `budget`.
pub fn enumerate_joint_posterior(
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
    budget: u64,
) -> Result<JointPosteriorTable, OracleError> {
    check_panel(model, panel, n)?;
    let d = model.node_count();
    let width = n + 1;
    let cells = guarded_cells(d, width, budget)?;

    let node_tables: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut table =
                direct_log_lik_table(model.node_density(j), panel.node_stream(j), n, width)?;
            for (entry, prior) in table
                .iter_mut()
                .zip(direct_log_prior_table(model.node_prior(j), width))
            {
                *entry += prior;
            }
            Ok(table)
        })
        .collect::<Result<_, OracleError>>()?;
    let edge_tables: Vec<Vec<f64>> = (0..model.edge_count())
        .map(|e| direct_log_lik_table(model.edge_density(e), panel.edge_stream(e), n, width))
        .collect::<Result<_, OracleError>>()?;

    let strides: Vec<usize> = (0..d).map(|j| width.pow((d - 1 - j) as u32)).collect();
    let mut log_weights = vec![0.0; cells];
    for (idx, w) in log_weights.iter_mut().enumerate() {
        let mut total = 0.0;
        for j in 0..d {
            total += node_tables[j][idx / strides[j] % width];
        }
        for (e, &(a, b)) in model.graph().edges().iter().enumerate() {
            let sa = idx / strides[a] % width;
            let sb = idx / strides[b] % width;
            total += edge_tables[e][sa.min(sb)];
        }
        *w = total;
    }
    let probs = normalize_log_weights(&log_weights);
    Ok(JointPosteriorTable {
        n,
        node_count: d,
        probs,
    })
}

// ---------------------------------------------------------------------------
// Beyond-horizon constancy
// ---------------------------------------------------------------------------

/// Verify on an extended exact state space that the posterior-to-prior
/// ratio of "every node in `subset` changes at k" is the same for every
/// k past the horizon. Change times are represented exactly up to n + 5
/// and k is probed over n+1 ..= n+4; the data cannot distinguish those
/// hypotheses, so the ratios must agree to floating-point accuracy.
/// Returns true when the largest relative spread is below 1e-10.
pub fn beyond_horizon_constancy_check(
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
    subset: &[usize],
    budget: u64,
) -> Result<bool, OracleError> {
    check_panel(model, panel, n)?;
    let subset = normalize_subset(model.node_count(), subset)?;
    let d = model.node_count();
    let exact_times = n + 5;
    let width = exact_times + 1;
    let cells = guarded_cells(d, width, budget)?;

    let node_tables: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut table =
                direct_log_lik_table(model.node_density(j), panel.node_stream(j), n, width)?;
            for (entry, prior) in table
                .iter_mut()
                .zip(direct_log_prior_table(model.node_prior(j), width))
            {
                *entry += prior;
            }
            Ok(table)
        })
        .collect::<Result<_, OracleError>>()?;
    let edge_tables: Vec<Vec<f64>> = (0..model.edge_count())
        .map(|e| direct_log_lik_table(model.edge_density(e), panel.edge_stream(e), n, width))
        .collect::<Result<_, OracleError>>()?;

    let strides: Vec<usize> = (0..d).map(|j| width.pow((d - 1 - j) as u32)).collect();
    let probes: Vec<usize> = (n + 1..=n + 4).collect();
    let mut masses = vec![LogSumAccumulator::new(); probes.len()];
    for idx in 0..cells {
        let mut total = 0.0;
        for j in 0..d {
            total += node_tables[j][idx / strides[j] % width];
        }
        for (e, &(a, b)) in model.graph().edges().iter().enumerate() {
            let sa = idx / strides[a] % width;
            let sb = idx / strides[b] % width;
            total += edge_tables[e][sa.min(sb)];
        }
        for (probe, mass) in probes.iter().zip(&mut masses) {
            // State probe - 1 encodes an exact change at time `probe`.
            if subset.iter().all(|&j| idx / strides[j] % width == probe - 1) {
                mass.add(total);
            }
        }
    }

    let ratios: Vec<f64> = probes
        .iter()
        .zip(&masses)
        .map(|(&k, mass)| {
            let log_prior: f64 = subset
                .iter()
                .map(|&j| model.node_prior(j).pmf(k as u64).ln())
                .sum();
            mass.value() - log_prior
        })
        .collect();
    let reference = ratios[0];
    Ok(ratios
        .iter()
        .all(|r| ((r - reference).exp() - 1.0).abs() <= 1e-10))
}

// ---------------------------------------------------------------------------
// Marginal likelihood ratios
// ---------------------------------------------------------------------------

/// Where the earliest change over a subset is hypothesized to sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeHypothesis {
    /// Earliest change over the subset happens exactly at this time (>= 1).
    At(u64),
    /// No node of the subset ever changes.
    Never,
}

/// Log marginal likelihood ratio of the data under "earliest change over
/// `subset` at the hypothesized time" against "no change in `subset` within
/// the horizon". Likelihood contributions enter as post/pre density ratios,
/// so hypotheses at k > n (indistinguishable from never within n steps)
/// give exactly 0.
pub fn marginal_lr(
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
    subset: &[usize],
    hypothesis: ChangeHypothesis,
) -> Result<f64, OracleError> {
    check_panel(model, panel, n)?;
    let subset = normalize_subset(model.node_count(), subset)?;
    if hypothesis == ChangeHypothesis::At(0) {
        return Err(OracleError::ZeroChangeTime);
    }
    let pinned_state = match hypothesis {
        ChangeHypothesis::At(k) if k <= n as u64 => Some(k as usize - 1),
        _ => None,
    };
    let numerator = log_conditional_lr_mass(model, panel, n, &subset, pinned_state)?;
    let denominator = log_conditional_lr_mass(model, panel, n, &subset, None)?;
    Ok(numerator - denominator)
}

/// log E[ product of stream likelihood ratios | conditioning event ], where
/// the event is "min change state over subset == pinned_state" (None: all of
/// the subset beyond the horizon). The expectation is over the prior
/// restricted to the event.
fn log_conditional_lr_mass(
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
    subset: &[usize],
    pinned_state: Option<usize>,
) -> Result<f64, OracleError> {
    let d = model.node_count();
    let width = n + 1;
    let cells = guarded_cells(d, width, DEFAULT_CELL_BUDGET)?;

    // Log post/pre ratio of the step products from each change state on.
    let lr_table = |density: &crate::model::TwoPhaseDensity,
                    stream: &[f64]|
     -> Result<Vec<f64>, OracleError> {
        let mut table = vec![0.0; width];
        for s in (0..n).rev() {
            table[s] = table[s + 1] + density.log_lr(stream[s])?;
        }
        Ok(table)
    };
    let node_priors: Vec<Vec<f64>> = (0..d)
        .map(|j| direct_log_prior_table(model.node_prior(j), width))
        .collect();
    let node_lrs: Vec<Vec<f64>> = (0..d)
        .map(|j| lr_table(model.node_density(j), panel.node_stream(j)))
        .collect::<Result<_, _>>()?;
    let edge_lrs: Vec<Vec<f64>> = (0..model.edge_count())
        .map(|e| lr_table(model.edge_density(e), panel.edge_stream(e)))
        .collect::<Result<_, _>>()?;

    let in_event = |state: usize| -> (bool, bool) {
        // (allowed, hits the pinned state exactly)
        match pinned_state {
            Some(pin) => (state >= pin, state == pin),
            None => (state == n, true),
        }
    };

    let strides: Vec<usize> = (0..d).map(|j| width.pow((d - 1 - j) as u32)).collect();
    let mut mass = LogSumAccumulator::new();
    'cells: for idx in 0..cells {
        let mut hit = false;
        for &j in subset {
            let (allowed, exact) = in_event(idx / strides[j] % width);
            if !allowed {
                continue 'cells;
            }
            hit |= exact;
        }
        if !hit {
            continue;
        }
        let mut total = 0.0;
        for j in 0..d {
            let s = idx / strides[j] % width;
            total += node_priors[j][s] + node_lrs[j][s];
        }
        for (e, &(a, b)) in model.graph().edges().iter().enumerate() {
            let sa = idx / strides[a] % width;
            let sb = idx / strides[b] % width;
            total += edge_lrs[e][sa.min(sb)];
        }
        mass.add(total);
    }

    // Prior mass of the event, in log form. c = sum of log survival-per-step
    // over the subset, so P(min = k) = exp((k-1) c) - exp(k c).
    let log_event_prior = match pinned_state {
        Some(pin) => {
            let c: f64 = subset
                .iter()
                .map(|&j| (1.0 - model.node_prior(j).rho()).ln())
                .sum();
            pin as f64 * c + (-c.exp()).ln_1p()
        }
        None => subset
            .iter()
            .map(|&j| model.node_prior(j).survival(n).ln())
            .sum(),
    };
    Ok(mass.value() - log_event_prior)
}

// ---------------------------------------------------------------------------
// Concentration diagnostic
// ---------------------------------------------------------------------------

/// Samples of the per-step log marginal likelihood ratio under a conditioned
/// change, across a horizon grid.
#[derive(Debug, Clone)]
pub struct ConcentrationSummary {
    pub n_grid: Vec<usize>,
    /// samples[g][r]: rep r's log LR at horizon n_grid[g], divided by the
    /// number of post-change steps n - k + 1.
    pub samples: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
}

/// Simulate `reps` trajectories conditioned (by rejection) on the earliest
/// change over `subset` landing exactly at `k`, and measure how fast the
/// per-step log marginal likelihood ratio settles at each horizon in
/// `n_grid`. The long-run limit is the information functional of the subset.
pub fn concentration_diagnostic<R: Rng + ?Sized>(
    model: &NetworkModel,
    subset: &[usize],
    k: u64,
    n_grid: &[usize],
    reps: usize,
    rng: &mut R,
) -> Result<ConcentrationSummary, OracleError> {
    let subset = normalize_subset(model.node_count(), subset)?;
    if k == 0 {
        return Err(OracleError::ZeroChangeTime);
    }
    if n_grid.is_empty() {
        return Err(OracleError::EmptyGrid);
    }
    if let Some(&n) = n_grid.iter().find(|&&n| (n as u64) < k) {
        return Err(OracleError::GridBeforeChange { n, k });
    }
    let max_n = *n_grid.iter().max().expect("nonempty");

    let mut samples = vec![vec![0.0; reps]; n_grid.len()];
    for rep in 0..reps {
        let mut attempts = 0u64;
        let assignment = loop {
            attempts += 1;
            if attempts > MAX_CONDITIONING_ATTEMPTS {
                return Err(OracleError::ConditioningTooRare { attempts });
            }
            let candidate = sample_change_points(model, rng);
            if candidate.subset_min(&subset) == k {
                break candidate;
            }
        };
        let panel = sample_observations(model, &assignment, max_n, rng);
        for (g, &n) in n_grid.iter().enumerate() {
            let log_d = marginal_lr(model, &panel, n, &subset, ChangeHypothesis::At(k))?;
            let steps = n as u64 - k + 1;
            samples[g][rep] = log_d / steps as f64;
        }
    }
    let medians = samples.iter().map(|row| median(row)).collect();
    Ok(ConcentrationSummary {
        n_grid: n_grid.to_vec(),
        samples,
        medians,
    })
}

fn median(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}
