//! The generative model: per-node geometric change-point priors, two-phase
//! observation densities on nodes and edges, and seeded samplers for change
//! points and observation panels.
//!
//! Time is 1-based. A change time of k means observations at times 1..k-1
//! follow the pre-change density and observations at times k, k+1, ... follow
//! the post-change density. An edge changes at the earlier of its endpoints'
//! change times.

use crate::graph::StatisticalGraph;
use rand::Rng;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("change probability must lie strictly inside (0, 1), got {0}")]
    InvalidRho(f64),
    #[error("variance must be positive, got {0}")]
    InvalidVariance(f64),
    #[error("Bernoulli parameter must lie strictly inside (0, 1), got {0}")]
    InvalidBernoulliParam(f64),
    #[error("value {0} is outside the Bernoulli support {{0, 1}}")]
    OutsideBernoulliSupport(f64),
    #[error("expected {expected} {kind} entries, got {got}")]
    LengthMismatch {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("subset is empty")]
    EmptySubset,
    #[error("subset contains node {node}, but the graph has {nodes} nodes")]
    SubsetOutOfRange { node: usize, nodes: usize },
    #[error("subset contains node {0} more than once")]
    SubsetDuplicate(usize),
}

// ---------------------------------------------------------------------------
// Priors
// ---------------------------------------------------------------------------

/// Geometric change-time prior on {1, 2, ...}: P(k) = rho (1 - rho)^(k-1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricPrior {
    rho: f64,
}

impl GeometricPrior {
    pub fn new(rho: f64) -> Result<Self, ModelError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(ModelError::InvalidRho(rho));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn pmf(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.rho * (1.0 - self.rho).powi((k - 1) as i32)
    }

    /// P(change time > n).
    pub fn survival(&self, n: usize) -> f64 {
        (1.0 - self.rho).powi(n as i32)
    }

    /// Inverse-CDF draw from {1, 2, ...}.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        // 1 - u is in (0, 1]; the floor is 0 exactly when u < rho.
        let k = 1.0 + ((1.0 - u).ln() / (1.0 - self.rho).ln()).floor();
        k as u64
    }
}

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

/// Which side of the change point an observation is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pre,
    Post,
}

/// An observation family with a pre-change and a post-change member.
///
/// Gaussian pairs share one variance; Bernoulli values are encoded as the
/// reals 0.0 and 1.0 so panels stay plain f64 streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TwoPhaseDensity {
    Gaussian {
        mean_pre: f64,
        mean_post: f64,
        variance: f64,
    },
    Bernoulli {
        p_pre: f64,
        p_post: f64,
    },
}

impl TwoPhaseDensity {
    pub fn gaussian(mean_pre: f64, mean_post: f64, variance: f64) -> Result<Self, ModelError> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(ModelError::InvalidVariance(variance));
        }
        Ok(Self::Gaussian {
            mean_pre,
            mean_post,
            variance,
        })
    }

    pub fn bernoulli(p_pre: f64, p_post: f64) -> Result<Self, ModelError> {
        for p in [p_pre, p_post] {
            if !(p > 0.0 && p < 1.0) {
                return Err(ModelError::InvalidBernoulliParam(p));
            }
        }
        Ok(Self::Bernoulli { p_pre, p_post })
    }

    pub fn log_density(&self, phase: Phase, x: f64) -> Result<f64, ModelError> {
        match *self {
            Self::Gaussian {
                mean_pre,
                mean_post,
                variance,
            } => {
                let mean = match phase {
                    Phase::Pre => mean_pre,
                    Phase::Post => mean_post,
                };
                let z = x - mean;
                Ok(-0.5 * (z * z / variance + variance.ln() + (2.0 * PI).ln()))
            }
            Self::Bernoulli { p_pre, p_post } => {
                let p = match phase {
                    Phase::Pre => p_pre,
                    Phase::Post => p_post,
                };
                if x == 1.0 {
                    Ok(p.ln())
                } else if x == 0.0 {
                    Ok((1.0 - p).ln())
                } else {
                    Err(ModelError::OutsideBernoulliSupport(x))
                }
            }
        }
    }

    /// Log likelihood ratio log(post(x) / pre(x)).
    pub fn log_lr(&self, x: f64) -> Result<f64, ModelError> {
        match *self {
            Self::Gaussian {
                mean_pre,
                mean_post,
                variance,
            } => {
                let dpre = x - mean_pre;
                let dpost = x - mean_post;
                Ok((dpre * dpre - dpost * dpost) / (2.0 * variance))
            }
            Self::Bernoulli { p_pre, p_post } => {
                if x == 1.0 {
                    Ok((p_post / p_pre).ln())
                } else if x == 0.0 {
                    Ok(((1.0 - p_post) / (1.0 - p_pre)).ln())
                } else {
                    Err(ModelError::OutsideBernoulliSupport(x))
                }
            }
        }
    }

    /// Supremum of |log_lr| over the support, when finite. Gaussian ratios
    /// are unbounded; Bernoulli ratios are bounded by max of the two point
    /// ratios.
    pub fn max_abs_log_lr(&self) -> Option<f64> {
        match *self {
            Self::Gaussian { .. } => None,
            Self::Bernoulli { p_pre, p_post } => {
                let at_one = (p_post / p_pre).ln().abs();
                let at_zero = (((1.0 - p_post) / (1.0 - p_pre)).ln()).abs();
                Some(at_one.max(at_zero))
            }
        }
    }

    /// One draw from the indicated phase. Consumes a fixed number of uniform
    /// draws regardless of phase or parameters (two for Gaussian via
    /// Box-Muller, one for Bernoulli), so panels regenerated under a
    /// different assignment stay positionally aligned.
    pub fn sample<R: Rng + ?Sized>(&self, phase: Phase, rng: &mut R) -> f64 {
        match *self {
            Self::Gaussian {
                mean_pre,
                mean_post,
                variance,
            } => {
                let mean = match phase {
                    Phase::Pre => mean_pre,
                    Phase::Post => mean_post,
                };
                let u1: f64 = rng.random();
                let u2: f64 = rng.random();
                // Box-Muller; 1 - u1 keeps the log argument strictly positive.
                let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos();
                mean + variance.sqrt() * z
            }
            Self::Bernoulli { p_pre, p_post } => {
                let p = match phase {
                    Phase::Pre => p_pre,
                    Phase::Post => p_post,
                };
                let u: f64 = rng.random();
                if u < p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Network model
// ---------------------------------------------------------------------------

/// A graph together with per-node priors and per-node / per-edge two-phase
/// densities. Edge densities are aligned with `graph.edges()`.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    graph: StatisticalGraph,
    node_priors: Vec<GeometricPrior>,
    node_densities: Vec<TwoPhaseDensity>,
    edge_densities: Vec<TwoPhaseDensity>,
}

pub fn build_model(
    graph: StatisticalGraph,
    node_priors: Vec<GeometricPrior>,
    node_densities: Vec<TwoPhaseDensity>,
    edge_densities: Vec<TwoPhaseDensity>,
) -> Result<NetworkModel, ModelError> {
    if node_priors.len() != graph.node_count() {
        return Err(ModelError::LengthMismatch {
            kind: "node prior",
            expected: graph.node_count(),
            got: node_priors.len(),
        });
    }
    if node_densities.len() != graph.node_count() {
        return Err(ModelError::LengthMismatch {
            kind: "node density",
            expected: graph.node_count(),
            got: node_densities.len(),
        });
    }
    if edge_densities.len() != graph.edge_count() {
        return Err(ModelError::LengthMismatch {
            kind: "edge density",
            expected: graph.edge_count(),
            got: edge_densities.len(),
        });
    }
    Ok(NetworkModel {
        graph,
        node_priors,
        node_densities,
        edge_densities,
    })
}

impl NetworkModel {
    pub fn graph(&self) -> &StatisticalGraph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn node_prior(&self, node: usize) -> &GeometricPrior {
        &self.node_priors[node]
    }

    pub fn node_density(&self, node: usize) -> &TwoPhaseDensity {
        &self.node_densities[node]
    }

    pub fn edge_density(&self, edge: usize) -> &TwoPhaseDensity {
        &self.edge_densities[edge]
    }

    /// The one-node model seen by a detector that only reads `node`'s
    /// private stream.
    pub fn isolate_node(&self, node: usize) -> NetworkModel {
        NetworkModel {
            graph: StatisticalGraph::new(1, &[]).expect("one-node graph"),
            node_priors: vec![self.node_priors[node]],
            node_densities: vec![self.node_densities[node]],
            edge_densities: Vec::new(),
        }
    }
}

/// Checks a node subset: nonempty, in range, no duplicates. Returns a sorted
/// copy.
pub fn normalize_subset(node_count: usize, subset: &[usize]) -> Result<Vec<usize>, ModelError> {
    if subset.is_empty() {
        return Err(ModelError::EmptySubset);
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    for pair in sorted.windows(2) {
        if pair[0] == pair[1] {
            return Err(ModelError::SubsetDuplicate(pair[0]));
        }
    }
    if let Some(&node) = sorted.last() {
        if node >= node_count {
            return Err(ModelError::SubsetOutOfRange {
                node,
                nodes: node_count,
            });
        }
    }
    Ok(sorted)
}

// ---------------------------------------------------------------------------
// Change points and observations
// ---------------------------------------------------------------------------

/// One change time (>= 1) per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangePointAssignment {
    times: Vec<u64>,
}

impl ChangePointAssignment {
    pub fn new(times: Vec<u64>) -> Self {
        debug_assert!(times.iter().all(|&k| k >= 1));
        Self { times }
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn node_change(&self, node: usize) -> u64 {
        self.times[node]
    }

    /// An edge switches when its first endpoint does.
    pub fn edge_change(&self, graph: &StatisticalGraph, edge: usize) -> u64 {
        let (a, b) = graph.endpoints(edge);
        self.times[a].min(self.times[b])
    }

    /// Earliest change over a node subset.
    pub fn subset_min(&self, subset: &[usize]) -> u64 {
        subset
            .iter()
            .map(|&j| self.times[j])
            .min()
            .expect("nonempty subset")
    }
}

pub fn sample_change_points<R: Rng + ?Sized>(
    model: &NetworkModel,
    rng: &mut R,
) -> ChangePointAssignment {
    let times = (0..model.node_count())
        .map(|j| model.node_prior(j).sample(rng))
        .collect();
    ChangePointAssignment::new(times)
}

/// One time step of observations: a value per node then per edge, in graph
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct StepObservations {
    pub node_values: Vec<f64>,
    pub edge_values: Vec<f64>,
}

/// Column-oriented observation streams up to some horizon.
#[derive(Debug, Clone, Default)]
pub struct ObservationPanel {
    node_streams: Vec<Vec<f64>>,
    edge_streams: Vec<Vec<f64>>,
    horizon: usize,
}

impl ObservationPanel {
    pub fn empty(node_count: usize, edge_count: usize) -> Self {
        Self {
            node_streams: vec![Vec::new(); node_count],
            edge_streams: vec![Vec::new(); edge_count],
            horizon: 0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn node_count(&self) -> usize {
        self.node_streams.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_streams.len()
    }

    pub fn node_stream(&self, node: usize) -> &[f64] {
        &self.node_streams[node]
    }

    pub fn edge_stream(&self, edge: usize) -> &[f64] {
        &self.edge_streams[edge]
    }

    pub fn push_step(&mut self, step: &StepObservations) -> Result<(), ModelError> {
        if step.node_values.len() != self.node_streams.len() {
            return Err(ModelError::LengthMismatch {
                kind: "node observation",
                expected: self.node_streams.len(),
                got: step.node_values.len(),
            });
        }
        if step.edge_values.len() != self.edge_streams.len() {
            return Err(ModelError::LengthMismatch {
                kind: "edge observation",
                expected: self.edge_streams.len(),
                got: step.edge_values.len(),
            });
        }
        for (stream, &value) in self.node_streams.iter_mut().zip(&step.node_values) {
            stream.push(value);
        }
        for (stream, &value) in self.edge_streams.iter_mut().zip(&step.edge_values) {
            stream.push(value);
        }
        self.horizon += 1;
        Ok(())
    }

    /// Restriction of node `j`'s data to a one-node panel (for detectors
    /// that ignore the rest of the network).
    pub fn isolate_node(&self, node: usize) -> ObservationPanel {
        ObservationPanel {
            node_streams: vec![self.node_streams[node].clone()],
            edge_streams: Vec::new(),
            horizon: self.horizon,
        }
    }
}

fn phase_at(change_time: u64, t: u64) -> Phase {
    if t >= change_time {
        Phase::Post
    } else {
        Phase::Pre
    }
}

/// Observations for time step t (1-based) under the given assignment.
/// Draw order is fixed: nodes in index order, then edges in index order.
pub fn sample_step<R: Rng + ?Sized>(
    model: &NetworkModel,
    assignment: &ChangePointAssignment,
    t: u64,
    rng: &mut R,
) -> StepObservations {
    let node_values = (0..model.node_count())
        .map(|j| {
            model
                .node_density(j)
                .sample(phase_at(assignment.node_change(j), t), rng)
        })
        .collect();
    let edge_values = (0..model.edge_count())
        .map(|e| {
            model
                .edge_density(e)
                .sample(phase_at(assignment.edge_change(model.graph(), e), t), rng)
        })
        .collect();
    StepObservations {
        node_values,
        edge_values,
    }
}

pub fn sample_observations<R: Rng + ?Sized>(
    model: &NetworkModel,
    assignment: &ChangePointAssignment,
    horizon: usize,
    rng: &mut R,
) -> ObservationPanel {
    let mut panel = ObservationPanel::empty(model.node_count(), model.edge_count());
    for t in 1..=horizon as u64 {
        let step = sample_step(model, assignment, t, rng);
        panel.push_step(&step).expect("samples match model shape");
    }
    panel
}
