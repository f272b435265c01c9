//! Sequential stopping rules on the running change posterior.
//!
//! The joint rule stops the first time the posterior probability that the
//! monitored subset's earliest change has already happened reaches 1 -
//! alpha; by construction its false-alarm probability is at most alpha.
//! The private-data baseline runs one single-node detector per monitored
//! node on that node's own stream and stops at the earliest individual
//! crossing. Observations are fed one step at a time, so rules run online
//! and trials can stream data lazily.

use crate::inference::{subset_min_cdf, InferenceError};
use crate::model::{
    normalize_subset, sample_step, ChangePointAssignment, ModelError, NetworkModel,
    ObservationPanel, StepObservations,
};
use crate::theory::{info_functional, prior_exponent};
use rand::Rng;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Full message-passing posterior over the subset's earliest change.
    Mp,
    /// Per-node detectors on private data, stopping at the first crossing.
    Single,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Mp => "MP",
            Rule::Single => "SINGLE",
        })
    }
}

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("the private-data rule supports subsets of size 1 or 2, got {0}")]
    SingleSubsetTooLarge(usize),
    #[error("spec asks for the {expected} rule but {invoked} was invoked")]
    RuleMismatch { expected: Rule, invoked: Rule },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// Horizon cap when none is given: a generous multiple of the predicted
/// time to change (1/rho over the subset) plus the predicted delay.
pub fn auto_n_max(
    model: &NetworkModel,
    subset: &[usize],
    alpha: f64,
) -> Result<usize, DetectionError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DetectionError::InvalidAlpha(alpha));
    }
    let subset = normalize_subset(model.node_count(), subset)?;
    let rho_min = subset
        .iter()
        .map(|&j| model.node_prior(j).rho())
        .fold(f64::INFINITY, f64::min);
    let rate = prior_exponent(model, &subset)? + info_functional(model, &subset)?;
    let predicted_delay = alpha.ln().abs() / rate;
    Ok(50 + (20.0 * (1.0 / rho_min + predicted_delay)).ceil() as usize)
}

/// What to monitor and when to declare.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRuleSpec {
    /// Monitored nodes (0-based): the rule detects their earliest change.
    pub subset: Vec<usize>,
    /// False-alarm budget; the threshold is 1 - alpha, crossed inclusively.
    pub alpha: f64,
    pub rule: Rule,
    /// Hard horizon; None resolves to `auto_n_max`.
    pub n_max: Option<usize>,
}

impl StoppingRuleSpec {
    pub fn resolved_n_max(&self, model: &NetworkModel) -> Result<usize, DetectionError> {
        match self.n_max {
            Some(cap) => Ok(cap),
            None => auto_n_max(model, &self.subset, self.alpha),
        }
    }
}

/// How one trial ended, scored against the true change times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingOutcome {
    /// Declaration step; None when the horizon cap was hit first.
    pub stop_time: Option<u64>,
    /// True earliest change over the monitored subset.
    pub change_time: u64,
    /// (stop - change)+; zero for false alarms and censored trials.
    pub delay: u64,
    /// Declared strictly before the true change. Stopping exactly at the
    /// change counts as a detection with zero delay: the posterior the rule
    /// thresholds is the probability the change has already happened, so
    /// its guarantee bounds early declarations only.
    pub false_alarm: bool,
    pub censored: bool,
    /// Posterior value that triggered the declaration.
    pub posterior_at_stop: Option<f64>,
}

/// Posterior state reported after every advance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionStatus {
    pub horizon: usize,
    /// Latest monitored posterior value (for the private-data rule, the
    /// largest per-node value, which is what the threshold is compared to).
    pub gamma: f64,
    pub stop_time: Option<u64>,
    pub posterior_at_stop: Option<f64>,
    pub censored: bool,
}

enum Monitor {
    Joint(Vec<usize>),
    /// (node, one-node model) per monitored node.
    PerNode(Vec<(usize, NetworkModel)>),
}

impl Monitor {
    fn build(model: &NetworkModel, subset: &[usize], rule: Rule) -> Result<Self, DetectionError> {
        let subset = normalize_subset(model.node_count(), subset)?;
        match rule {
            Rule::Mp => Ok(Monitor::Joint(subset)),
            Rule::Single => {
                if subset.len() > 2 {
                    return Err(DetectionError::SingleSubsetTooLarge(subset.len()));
                }
                Ok(Monitor::PerNode(
                    subset
                        .iter()
                        .map(|&j| (j, model.isolate_node(j)))
                        .collect(),
                ))
            }
        }
    }

    fn subset(&self) -> Vec<usize> {
        match self {
            Monitor::Joint(subset) => subset.clone(),
            Monitor::PerNode(nodes) => nodes.iter().map(|&(j, _)| j).collect(),
        }
    }

    fn gamma(
        &self,
        model: &NetworkModel,
        panel: &ObservationPanel,
        n: usize,
    ) -> Result<f64, DetectionError> {
        match self {
            Monitor::Joint(subset) => Ok(subset_min_cdf(model, panel, n, subset)?),
            Monitor::PerNode(nodes) => {
                let mut best = f64::NEG_INFINITY;
                for (j, one_node) in nodes {
                    let private = panel.isolate_node(*j);
                    best = best.max(subset_min_cdf(one_node, &private, n, &[0])?);
                }
                Ok(best)
            }
        }
    }
}

/// Online driver for one rule on one growing data stream.
pub struct DetectionSession {
    model: NetworkModel,
    monitor: Monitor,
    threshold: f64,
    n_max: usize,
    panel: ObservationPanel,
    gammas: Vec<f64>,
    stop: Option<(u64, f64)>,
    censored: bool,
}

impl DetectionSession {
    pub fn new(model: &NetworkModel, spec: &StoppingRuleSpec) -> Result<Self, DetectionError> {
        if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
            return Err(DetectionError::InvalidAlpha(spec.alpha));
        }
        let monitor = Monitor::build(model, &spec.subset, spec.rule)?;
        let n_max = spec.resolved_n_max(model)?;
        Ok(Self {
            model: model.clone(),
            monitor,
            threshold: 1.0 - spec.alpha,
            n_max,
            panel: ObservationPanel::empty(model.node_count(), model.edge_count()),
            gammas: Vec::new(),
            stop: None,
            censored: false,
        })
    }

    /// Stopped or censored: no further observations change the decision.
    pub fn terminal(&self) -> bool {
        self.stop.is_some() || self.censored
    }

    /// Feed observations in order. Steps after the decision are validated
    /// for shape but do not alter it; an empty slice is a pure query.
    pub fn advance(&mut self, steps: &[StepObservations]) -> Result<SessionStatus, DetectionError> {
        for step in steps {
            if self.terminal() {
                if step.node_values.len() != self.model.node_count()
                    || step.edge_values.len() != self.model.edge_count()
                {
                    return Err(DetectionError::Model(ModelError::LengthMismatch {
                        kind: "node observation",
                        expected: self.model.node_count(),
                        got: step.node_values.len(),
                    }));
                }
                continue;
            }
            self.panel.push_step(step)?;
            let n = self.panel.horizon();
            let gamma = self.monitor.gamma(&self.model, &self.panel, n)?;
            self.gammas.push(gamma);
            if gamma >= self.threshold {
                self.stop = Some((n as u64, gamma));
            } else if n >= self.n_max {
                self.censored = true;
            }
        }
        Ok(self.status())
    }

    pub fn status(&self) -> SessionStatus {
        SessionStatus {
            horizon: self.panel.horizon(),
            gamma: self.gammas.last().copied().unwrap_or(0.0),
            stop_time: self.stop.map(|(t, _)| t),
            posterior_at_stop: self.stop.map(|(_, g)| g),
            censored: self.censored,
        }
    }

    /// Monitored posterior value after each step so far.
    pub fn gamma_trace(&self) -> &[f64] {
        &self.gammas
    }

    /// Score the finished session against the truth; None while running.
    pub fn outcome(&self, assignment: &ChangePointAssignment) -> Option<StoppingOutcome> {
        if !self.terminal() {
            return None;
        }
        let change_time = assignment.subset_min(&self.monitor.subset());
        Some(match self.stop {
            Some((tau, gamma)) => StoppingOutcome {
                stop_time: Some(tau),
                change_time,
                delay: tau.saturating_sub(change_time),
                false_alarm: tau < change_time,
                censored: false,
                posterior_at_stop: Some(gamma),
            },
            None => StoppingOutcome {
                stop_time: None,
                change_time,
                delay: 0,
                false_alarm: false,
                censored: true,
                posterior_at_stop: None,
            },
        })
    }
}

fn run_rule<R: Rng + ?Sized>(
    model: &NetworkModel,
    assignment: &ChangePointAssignment,
    spec: &StoppingRuleSpec,
    rng: &mut R,
) -> Result<StoppingOutcome, DetectionError> {
    let mut session = DetectionSession::new(model, spec)?;
    let mut t = 0u64;
    while !session.terminal() {
        t += 1;
        let step = sample_step(model, assignment, t, rng);
        session.advance(std::slice::from_ref(&step))?;
    }
    Ok(session.outcome(assignment).expect("session is terminal"))
}

/// Run the joint posterior-threshold rule over lazily sampled observations.
pub fn run_mp_rule<R: Rng + ?Sized>(
    model: &NetworkModel,
    assignment: &ChangePointAssignment,
    spec: &StoppingRuleSpec,
    rng: &mut R,
) -> Result<StoppingOutcome, DetectionError> {
    if spec.rule != Rule::Mp {
        return Err(DetectionError::RuleMismatch {
            expected: spec.rule,
            invoked: Rule::Mp,
        });
    }
    run_rule(model, assignment, spec, rng)
}

/// Run the private-data baseline (subset size 1 or 2) over lazily sampled
/// observations.
pub fn run_single_rule<R: Rng + ?Sized>(
    model: &NetworkModel,
    assignment: &ChangePointAssignment,
    spec: &StoppingRuleSpec,
    rng: &mut R,
) -> Result<StoppingOutcome, DetectionError> {
    if spec.rule != Rule::Single {
        return Err(DetectionError::RuleMismatch {
            expected: spec.rule,
            invoked: Rule::Single,
        });
    }
    run_rule(model, assignment, spec, rng)
}

// ---------------------------------------------------------------------------
// Shared-trajectory grid runner
// ---------------------------------------------------------------------------

/// One alpha level of a threshold grid, with its own horizon cap.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GridEntry {
    pub alpha: f64,
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GridStop {
    pub stop_time: Option<u64>,
    pub posterior_at_stop: Option<f64>,
}

/// Scan one posterior trajectory once and read off the stop time of every
/// alpha level. `extend` must append exactly one observation step to the
/// panel; the panel may already hold data from earlier scans of the same
/// trial and is grown only as far as the slowest level needs.
pub(crate) fn run_threshold_grid(
    model: &NetworkModel,
    rule: Rule,
    subset: &[usize],
    entries: &[GridEntry],
    panel: &mut ObservationPanel,
    mut extend: impl FnMut(&mut ObservationPanel),
) -> Result<Vec<GridStop>, DetectionError> {
    for entry in entries {
        if !(entry.alpha > 0.0 && entry.alpha < 1.0) {
            return Err(DetectionError::InvalidAlpha(entry.alpha));
        }
    }
    let monitor = Monitor::build(model, subset, rule)?;
    let mut stops = vec![
        GridStop {
            stop_time: None,
            posterior_at_stop: None,
        };
        entries.len()
    ];
    let mut pending: Vec<usize> = (0..entries.len()).collect();
    let mut n = 0usize;
    while !pending.is_empty() {
        n += 1;
        while panel.horizon() < n {
            extend(panel);
        }
        let gamma = monitor.gamma(model, panel, n)?;
        pending.retain(|&i| {
            if gamma >= 1.0 - entries[i].alpha {
                stops[i] = GridStop {
                    stop_time: Some(n as u64),
                    posterior_at_stop: Some(gamma),
                };
                false
            } else {
                // Censoring leaves the default empty stop in place.
                n < entries[i].n_max
            }
        });
    }
    Ok(stops)
}

/// Score a grid stop against the truth, mirroring session outcomes.
pub(crate) fn score_grid_stop(
    stop: GridStop,
    subset: &[usize],
    assignment: &ChangePointAssignment,
) -> StoppingOutcome {
    let change_time = assignment.subset_min(subset);
    match stop.stop_time {
        Some(tau) => StoppingOutcome {
            stop_time: Some(tau),
            change_time,
            delay: tau.saturating_sub(change_time),
            false_alarm: tau < change_time,
            censored: false,
            posterior_at_stop: stop.posterior_at_stop,
        },
        None => StoppingOutcome {
            stop_time: None,
            change_time,
            delay: 0,
            false_alarm: false,
            censored: true,
            posterior_at_stop: None,
        },
    }
}
