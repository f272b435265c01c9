//! Posterior inference over change-point configurations.
//!
//! The change time of each node is a variable on {1, ..., n, beyond-n}: all
//! change times past the observation horizon n are lumped into one state,
//! because every stream's likelihood is the all-pre-change product for any
//! of them; the lumped state carries the prior tail mass. On that finite
//! state space the joint posterior factorizes over the graph, node and edge
//! marginals come from exact belief propagation when the graph has no
//! cycles, and a synchronous damped message-passing fallback covers cyclic
//! graphs (flagged approximate).
//!
//! State indexing convention used everywhere in this module: state s in
//! 0..=n means "change at time s + 1" for s < n, and s = n is the lumped
//! beyond-horizon state.

use crate::graph::StatisticalGraph;
use crate::logsum::{
    log_add_exp, log_sum_exp, normalize_log_weights, prefix_log_sums, suffix_log_sums_exclusive,
};
use crate::model::{
    normalize_subset, GeometricPrior, ModelError, NetworkModel, ObservationPanel, Phase,
    TwoPhaseDensity,
};
use std::io::Write;
use thiserror::Error;

/// Convergence threshold for the loopy fallback, on the sup-norm change of
/// normalized log messages per iteration.
pub const LOOPY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("graph has a cycle; exact tree belief propagation does not apply, use run_loopy_bp")]
    CyclicGraph,
    #[error("panel horizon {horizon} is shorter than the requested n = {n}")]
    HorizonTooShort { horizon: usize, n: usize },
    #[error("panel shape ({nodes} nodes, {edges} edges) does not match the model ({model_nodes} nodes, {model_edges} edges)")]
    PanelShapeMismatch {
        nodes: usize,
        edges: usize,
        model_nodes: usize,
        model_edges: usize,
    },
    #[error("message table was built for horizon {table_n}, used at horizon {n}")]
    TableHorizonMismatch { table_n: usize, n: usize },
    #[error("message table shape does not match the model")]
    TableShapeMismatch,
    #[error("nodes {i} and {j} are not adjacent")]
    NotAdjacent { i: usize, j: usize },
    #[error("root {root} is not a node of the graph (node count {nodes})")]
    RootOutOfRange { root: usize, nodes: usize },
    #[error("damping must lie in [0, 1), got {0}")]
    InvalidDamping(f64),
    #[error("max_iters must be positive")]
    ZeroIterations,
    #[error(transparent)]
    Model(#[from] ModelError),
}

// ---------------------------------------------------------------------------
// Tail-augmented prior
// ---------------------------------------------------------------------------

/// Geometric prior restricted to the horizon-n state space: entries for
/// change times 1..=n plus the lumped tail state with mass (1 - rho)^n.
#[derive(Debug, Clone)]
pub struct TailAugmentedPrior {
    entries: Vec<f64>,
    log_entries: Vec<f64>,
}

impl TailAugmentedPrior {
    pub fn new(prior: &GeometricPrior, n: usize) -> Self {
        let rho = prior.rho();
        let log_rho = rho.ln();
        let log_keep = (1.0 - rho).ln();
        let mut entries = Vec::with_capacity(n + 1);
        let mut log_entries = Vec::with_capacity(n + 1);
        let mut running = rho;
        for s in 0..n {
            entries.push(running);
            log_entries.push(log_rho + s as f64 * log_keep);
            running *= 1.0 - rho;
        }
        entries.push(prior.survival(n));
        log_entries.push(n as f64 * log_keep);
        Self {
            entries,
            log_entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn log_entries(&self) -> &[f64] {
        &self.log_entries
    }

    pub fn tail(&self) -> f64 {
        *self.entries.last().expect("nonempty")
    }
}

// ---------------------------------------------------------------------------
// Likelihood profiles
// ---------------------------------------------------------------------------

/// Log likelihood of one stream under every change-state hypothesis:
/// entry s is the log likelihood of the first n observations when the
/// switch happens at time s + 1 (s = n: no switch within the horizon).
#[derive(Debug, Clone)]
pub struct LikelihoodProfile {
    log_values: Vec<f64>,
}

impl LikelihoodProfile {
    pub fn for_stream(
        density: &TwoPhaseDensity,
        stream: &[f64],
        n: usize,
    ) -> Result<Self, InferenceError> {
        if stream.len() < n {
            return Err(InferenceError::HorizonTooShort {
                horizon: stream.len(),
                n,
            });
        }
        let mut pre_prefix = vec![0.0; n + 1];
        for u in 0..n {
            pre_prefix[u + 1] = pre_prefix[u] + density.log_density(Phase::Pre, stream[u])?;
        }
        let mut post_suffix = vec![0.0; n + 1];
        for u in (0..n).rev() {
            post_suffix[u] = post_suffix[u + 1] + density.log_density(Phase::Post, stream[u])?;
        }
        let log_values = (0..=n)
            .map(|s| pre_prefix[s] + post_suffix[s])
            .collect();
        Ok(Self { log_values })
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn len(&self) -> usize {
        self.log_values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// Shared per-invocation context
// ---------------------------------------------------------------------------

/// Everything the message updates read: lumped priors and per-stream
/// profiles at one horizon.
struct BpContext<'a> {
    model: &'a NetworkModel,
    n: usize,
    tail_logs: Vec<Vec<f64>>,
    node_profiles: Vec<Vec<f64>>,
    edge_profiles: Vec<Vec<f64>>,
}

impl<'a> BpContext<'a> {
    fn new(
        model: &'a NetworkModel,
        panel: &ObservationPanel,
        n: usize,
    ) -> Result<Self, InferenceError> {
        if panel.node_count() != model.node_count() || panel.edge_count() != model.edge_count() {
            return Err(InferenceError::PanelShapeMismatch {
                nodes: panel.node_count(),
                edges: panel.edge_count(),
                model_nodes: model.node_count(),
                model_edges: model.edge_count(),
            });
        }
        if panel.horizon() < n {
            return Err(InferenceError::HorizonTooShort {
                horizon: panel.horizon(),
                n,
            });
        }
        let tail_logs = (0..model.node_count())
            .map(|j| TailAugmentedPrior::new(model.node_prior(j), n).log_entries.clone())
            .collect();
        let node_profiles = (0..model.node_count())
            .map(|j| {
                LikelihoodProfile::for_stream(model.node_density(j), panel.node_stream(j), n)
                    .map(|p| p.log_values)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let edge_profiles = (0..model.edge_count())
            .map(|e| {
                LikelihoodProfile::for_stream(model.edge_density(e), panel.edge_stream(e), n)
                    .map(|p| p.log_values)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            model,
            n,
            tail_logs,
            node_profiles,
            edge_profiles,
        })
    }

    /// Log weight vector a node contributes to the sum in an outgoing
    /// message: lumped prior, own stream profile, incoming messages from
    /// every neighbor except `exclude`, and the pin mask (a pinned node is
    /// restricted to the beyond-horizon state).
    fn source_vector(
        &self,
        node: usize,
        exclude: Option<usize>,
        messages: &[Option<Vec<f64>>],
        pinned: Option<&[bool]>,
    ) -> Vec<f64> {
        let mut a: Vec<f64> = self.tail_logs[node]
            .iter()
            .zip(&self.node_profiles[node])
            .map(|(p, l)| p + l)
            .collect();
        if let Some(mask) = pinned {
            if mask[node] {
                for entry in a.iter_mut().take(self.n) {
                    *entry = f64::NEG_INFINITY;
                }
            }
        }
        for &(nb, edge) in self.model.graph().neighbors(node) {
            if Some(nb) == exclude {
                continue;
            }
            let id = directed_id(self.model.graph(), edge, nb);
            let incoming = messages[id]
                .as_ref()
                .expect("schedule provides incoming messages before they are read");
            for (entry, m) in a.iter_mut().zip(incoming) {
                *entry += m;
            }
        }
        a
    }
}

/// Identifier of the directed message sent along `edge` out of `from`.
fn directed_id(graph: &StatisticalGraph, edge: usize, from: usize) -> usize {
    let (lo, _) = graph.endpoints(edge);
    2 * edge + usize::from(from != lo)
}

/// m[s] = sum over source states s' of a[s'] * exp(edge_profile[min(s, s')]),
/// in log domain and in O(n): terms with s' <= s keep their own edge factor,
/// terms with s' > s share edge_profile[s].
fn combine_min_sum(a: &[f64], edge_profile: &[f64]) -> Vec<f64> {
    let joint: Vec<f64> = a
        .iter()
        .zip(edge_profile)
        .map(|(x, e)| x + e)
        .collect();
    let prefix = prefix_log_sums(&joint);
    let suffix = suffix_log_sums_exclusive(a);
    (0..a.len())
        .map(|s| log_add_exp(prefix[s], edge_profile[s] + suffix[s]))
        .collect()
}

// ---------------------------------------------------------------------------
// Message table
// ---------------------------------------------------------------------------

/// All 2|E| directed messages at one horizon, each normalized so its largest
/// log entry is zero; the subtracted normalizer is kept per message.
#[derive(Debug, Clone)]
pub struct MessageTable {
    n: usize,
    edge_count: usize,
    log_messages: Vec<Vec<f64>>,
    log_scales: Vec<f64>,
    approximate: bool,
    converged: bool,
    iterations: usize,
}

impl MessageTable {
    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// True for the loopy fallback, whose fixed point is not an exact
    /// posterior on cyclic graphs.
    pub fn approximate(&self) -> bool {
        self.approximate
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// The message sent along `edge` out of node `from` (normalized, log
    /// domain).
    pub fn log_message_along(&self, graph: &StatisticalGraph, edge: usize, from: usize) -> &[f64] {
        &self.log_messages[directed_id(graph, edge, from)]
    }

    pub fn log_scale_along(&self, graph: &StatisticalGraph, edge: usize, from: usize) -> f64 {
        self.log_scales[directed_id(graph, edge, from)]
    }

    #[cfg(test)]
    pub(crate) fn rescale_for_test(&mut self, id: usize, shift: f64) {
        for entry in &mut self.log_messages[id] {
            *entry += shift;
        }
        self.log_scales[id] -= shift;
    }
}

fn normalize_message(mut raw: Vec<f64>) -> (Vec<f64>, f64) {
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.is_finite() {
        for entry in &mut raw {
            *entry -= hi;
        }
    }
    (raw, hi)
}

// ---------------------------------------------------------------------------
// Exact propagation on forests
// ---------------------------------------------------------------------------

/// Breadth-first orders and parent links for every component; `root_override`
/// re-roots the component containing it, the others start at their
/// smallest-index node.
fn forest_schedule(
    graph: &StatisticalGraph,
    root_override: Option<usize>,
) -> (Vec<Vec<usize>>, Vec<Option<usize>>) {
    let mut components = graph.components();
    if let Some(root) = root_override {
        for comp in &mut components {
            if comp.contains(&root) && comp[0] != root {
                // Re-walk this component from the requested root.
                let mut seen = vec![false; graph.node_count()];
                let mut order = vec![root];
                seen[root] = true;
                let mut head = 0;
                while head < order.len() {
                    let v = order[head];
                    head += 1;
                    for &(nb, _) in graph.neighbors(v) {
                        if !seen[nb] && comp.contains(&nb) {
                            seen[nb] = true;
                            order.push(nb);
                        }
                    }
                }
                *comp = order;
            }
        }
    }
    let mut parent = vec![None; graph.node_count()];
    for comp in &components {
        let mut placed = vec![false; graph.node_count()];
        for &v in comp {
            placed[v] = true;
        }
        let mut visited = vec![false; graph.node_count()];
        for &v in comp {
            visited[v] = true;
            for &(nb, _) in graph.neighbors(v) {
                if placed[nb] && !visited[nb] {
                    parent[nb] = Some(v);
                }
            }
        }
    }
    (components, parent)
}

/// Exact two-sweep message passing on a forest, rooted at the
/// smallest-index node of every component.
pub fn run_tree_bp(
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
) -> Result<MessageTable, InferenceError> {
    run_tree_bp_impl(model, panel, n, None)
}

/// Same as `run_tree_bp` with an explicit root for its component; the
/// resulting posteriors do not depend on the root choice.
pub fn run_tree_bp_rooted(
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
    root: usize,
) -> Result<MessageTable, InferenceError> {
    if root >= model.node_count() {
        return Err(InferenceError::RootOutOfRange {
            root,
            nodes: model.node_count(),
        });
    }
    run_tree_bp_impl(model, panel, n, Some(root))
}

fn run_tree_bp_impl(
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
    root_override: Option<usize>,
) -> Result<MessageTable, InferenceError> {
    if model.graph().has_cycle() {
        return Err(InferenceError::CyclicGraph);
    }
    let ctx = BpContext::new(model, panel, n)?;
    let graph = model.graph();
    let (components, parent) = forest_schedule(graph, root_override);
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; 2 * graph.edge_count()];
    let mut scales = vec![0.0; 2 * graph.edge_count()];

    let send = |from: usize, to: usize, slots: &mut Vec<Option<Vec<f64>>>, scales: &mut Vec<f64>| {
        let edge = graph.edge_index(from, to).expect("neighbors share an edge");
        let a = ctx.source_vector(from, Some(to), slots, None);
        let raw = combine_min_sum(&a, &ctx.edge_profiles[edge]);
        let (normalized, scale) = normalize_message(raw);
        let id = directed_id(graph, edge, from);
        slots[id] = Some(normalized);
        scales[id] = scale;
    };

    for comp in &components {
        // Upward: every node sends to its parent once its subtree is done.
        for &v in comp.iter().rev() {
            if let Some(p) = parent[v] {
                send(v, p, &mut slots, &mut scales);
            }
        }
        // Downward: parents reply, using the upward messages just computed.
        for &v in comp {
            if let Some(p) = parent[v] {
                send(p, v, &mut slots, &mut scales);
            }
        }
    }

    let log_messages = slots
        .into_iter()
        .map(|m| m.expect("both directions of every edge are covered"))
        .collect();
    Ok(MessageTable {
        n,
        edge_count: graph.edge_count(),
        log_messages,
        log_scales: scales,
        approximate: false,
        converged: true,
        iterations: 2,
    })
}

// ---------------------------------------------------------------------------
// Posteriors
// ---------------------------------------------------------------------------

fn check_table(
    table: &MessageTable,
    model: &NetworkModel,
    n: usize,
) -> Result<(), InferenceError> {
    if table.n != n {
        return Err(InferenceError::TableHorizonMismatch { table_n: table.n, n });
    }
    if table.edge_count != model.edge_count() {
        return Err(InferenceError::TableShapeMismatch);
    }
    Ok(())
}

/// Posterior distribution of node `j`'s change state: probabilities over
/// states 0..=n (s = n is beyond-horizon), summing to one.
pub fn node_posterior(
    table: &MessageTable,
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
    j: usize,
) -> Result<Vec<f64>, InferenceError> {
    check_table(table, model, n)?;
    let ctx = BpContext::new(model, panel, n)?;
    let a = ctx.source_vector(j, None, &slots_from_table(table), None);
    Ok(normalize_log_weights(&a))
}

fn slots_from_table(table: &MessageTable) -> Vec<Option<Vec<f64>>> {
    table
        .log_messages
        .iter()
        .map(|m| Some(m.clone()))
        .collect()
}

/// Joint posterior of the change states of an adjacent pair.
#[derive(Debug, Clone)]
pub struct PairPosterior {
    pub i: usize,
    pub j: usize,
    n: usize,
    probs: Vec<f64>,
}

impl PairPosterior {
    pub fn horizon(&self) -> usize {
        self.n
    }

    /// P(state_i = s1, state_j = s2 | data).
    pub fn prob(&self, s1: usize, s2: usize) -> f64 {
        self.probs[s1 * (self.n + 1) + s2]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// P(min of the pair's change times <= n | data).
    pub fn min_cdf_at_horizon(&self) -> f64 {
        1.0 - self.prob(self.n, self.n)
    }

    pub fn marginal_i(&self) -> Vec<f64> {
        let w = self.n + 1;
        (0..w)
            .map(|s1| (0..w).map(|s2| self.prob(s1, s2)).sum())
            .collect()
    }

    pub fn marginal_j(&self) -> Vec<f64> {
        let w = self.n + 1;
        (0..w)
            .map(|s2| (0..w).map(|s1| self.prob(s1, s2)).sum())
            .collect()
    }
}

/// Joint posterior over the change states of the adjacent pair (i, j).
pub fn pair_posterior(
    table: &MessageTable,
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
    i: usize,
    j: usize,
) -> Result<PairPosterior, InferenceError> {
    check_table(table, model, n)?;
    let edge = model
        .graph()
        .edge_index(i, j)
        .ok_or(InferenceError::NotAdjacent { i, j })?;
    let ctx = BpContext::new(model, panel, n)?;
    let slots = slots_from_table(table);
    let a_i = ctx.source_vector(i, Some(j), &slots, None);
    let a_j = ctx.source_vector(j, Some(i), &slots, None);
    let edge_profile = &ctx.edge_profiles[edge];
    let width = n + 1;
    let mut log_weights = vec![0.0; width * width];
    for s1 in 0..width {
        for s2 in 0..width {
            log_weights[s1 * width + s2] = a_i[s1] + a_j[s2] + edge_profile[s1.min(s2)];
        }
    }
    let probs = normalize_log_weights(&log_weights);
    Ok(PairPosterior { i, j, n, probs })
}

// ---------------------------------------------------------------------------
// Subset functionals
// ---------------------------------------------------------------------------

/// One upward sweep accumulating the total log weight of all change-state
/// configurations; `pinned` nodes are restricted to the beyond-horizon
/// state. Messages here stay unnormalized (log domain absorbs the range).
fn log_partition(ctx: &BpContext, pinned: &[bool]) -> f64 {
    let graph = ctx.model.graph();
    let (components, parent) = forest_schedule(graph, None);
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; 2 * graph.edge_count()];
    let mut total = 0.0;
    for comp in &components {
        for &v in comp.iter().rev() {
            if let Some(p) = parent[v] {
                let edge = graph.edge_index(v, p).expect("parent is adjacent");
                let a = ctx.source_vector(v, Some(p), &slots, Some(pinned));
                let raw = combine_min_sum(&a, &ctx.edge_profiles[edge]);
                slots[directed_id(graph, edge, v)] = Some(raw);
            }
        }
        let root = comp[0];
        let a_root = ctx.source_vector(root, None, &slots, Some(pinned));
        total += log_sum_exp(&a_root);
    }
    total
}

/// P(min change time over `subset` <= n | data), via the ratio of the
/// all-beyond-horizon-constrained partition function to the full one.
pub fn subset_min_cdf(
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
    subset: &[usize],
) -> Result<f64, InferenceError> {
    if model.graph().has_cycle() {
        return Err(InferenceError::CyclicGraph);
    }
    let subset = normalize_subset(model.node_count(), subset)?;
    let ctx = BpContext::new(model, panel, n)?;
    let no_pin = vec![false; model.node_count()];
    let mut pin = vec![false; model.node_count()];
    for &j in &subset {
        pin[j] = true;
    }
    let log_full = log_partition(&ctx, &no_pin);
    let log_tail = log_partition(&ctx, &pin);
    let survivor = (log_tail - log_full).exp();
    Ok((1.0 - survivor).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Loopy fallback
// ---------------------------------------------------------------------------

/// Synchronous damped message passing for graphs with cycles. Runs until the
/// pre-damping sup-norm residual drops below `LOOPY_TOLERANCE` or `max_iters`
/// is hit; the result is always flagged approximate and records whether it
/// converged. On forests the fixed point coincides with the exact messages.
pub fn run_loopy_bp(
    model: &NetworkModel,
    panel: &ObservationPanel,
    n: usize,
    max_iters: usize,
    damping: f64,
) -> Result<MessageTable, InferenceError> {
    if max_iters == 0 {
        return Err(InferenceError::ZeroIterations);
    }
    if !(0.0..1.0).contains(&damping) {
        return Err(InferenceError::InvalidDamping(damping));
    }
    let ctx = BpContext::new(model, panel, n)?;
    let graph = model.graph();
    let width = n + 1;
    let mut current: Vec<Option<Vec<f64>>> = vec![Some(vec![0.0; width]); 2 * graph.edge_count()];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let mut next = vec![None; 2 * graph.edge_count()];
        let mut residual = 0.0f64;
        for edge in 0..graph.edge_count() {
            let (a, b) = graph.endpoints(edge);
            for (from, to) in [(a, b), (b, a)] {
                let source = ctx.source_vector(from, Some(to), &current, None);
                let raw = combine_min_sum(&source, &ctx.edge_profiles[edge]);
                let (fresh, _) = normalize_message(raw);
                let id = directed_id(graph, edge, from);
                let old = current[id].as_ref().expect("initialized");
                for (x, y) in fresh.iter().zip(old) {
                    residual = residual.max((x - y).abs());
                }
                let damped: Vec<f64> = fresh
                    .iter()
                    .zip(old)
                    .map(|(x, y)| (1.0 - damping) * x + damping * y)
                    .collect();
                let (damped, _) = normalize_message(damped);
                next[id] = Some(damped);
            }
        }
        current = next;
        if residual < LOOPY_TOLERANCE {
            converged = true;
            break;
        }
    }
    let log_messages: Vec<Vec<f64>> = current
        .into_iter()
        .map(|m| m.expect("initialized"))
        .collect();
    let log_scales = vec![0.0; log_messages.len()];
    Ok(MessageTable {
        n,
        edge_count: graph.edge_count(),
        log_messages,
        log_scales,
        approximate: true,
        converged,
        iterations,
    })
}

// ---------------------------------------------------------------------------
// Posterior bundles
// ---------------------------------------------------------------------------

/// Every marginal the detection layer reads at one horizon, plus requested
/// subset functionals. Exact (forest) computation only.
#[derive(Debug, Clone)]
pub struct PosteriorSet {
    pub n: usize,
    pub node_marginals: Vec<Vec<f64>>,
    pub edge_marginals: Vec<PairPosterior>,
    /// P(node change <= n | data), per node.
    pub node_cdf_at_horizon: Vec<f64>,
    /// P(edge change <= n | data), per edge.
    pub edge_cdf_at_horizon: Vec<f64>,
    /// (subset, P(min change over subset <= n | data)).
    pub subset_cdfs: Vec<(Vec<usize>, f64)>,
    pub approximate: bool,
}

impl PosteriorSet {
    pub fn compute(
        model: &NetworkModel,
        panel: &ObservationPanel,
        n: usize,
        subsets: &[Vec<usize>],
    ) -> Result<Self, InferenceError> {
        let table = run_tree_bp(model, panel, n)?;
        let node_marginals = (0..model.node_count())
            .map(|j| node_posterior(&table, model, panel, n, j))
            .collect::<Result<Vec<_>, _>>()?;
        let edge_marginals = (0..model.edge_count())
            .map(|e| {
                let (i, j) = model.graph().endpoints(e);
                pair_posterior(&table, model, panel, n, i, j)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let node_cdf_at_horizon = node_marginals.iter().map(|m| 1.0 - m[n]).collect();
        let edge_cdf_at_horizon = edge_marginals
            .iter()
            .map(|z| z.min_cdf_at_horizon())
            .collect();
        let subset_cdfs = subsets
            .iter()
            .map(|s| Ok((s.clone(), subset_min_cdf(model, panel, n, s)?)))
            .collect::<Result<Vec<_>, InferenceError>>()?;
        Ok(Self {
            n,
            node_marginals,
            edge_marginals,
            node_cdf_at_horizon,
            edge_cdf_at_horizon,
            subset_cdfs,
            approximate: false,
        })
    }

    /// Flat CSV dump for debugging. Node rows: `node,<label>,<k>,,<prob>`;
    /// edge rows: `edge,<a>-<b>,<k1>,<k2>,<prob>`. Labels are 1-based and
    /// k = n + 1 denotes the beyond-horizon state.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kind,entity,k1,k2,value")?;
        for (j, marginal) in self.node_marginals.iter().enumerate() {
            for (s, p) in marginal.iter().enumerate() {
                writeln!(w, "node,{},{},,{}", j + 1, s + 1, p)?;
            }
        }
        for pair in &self.edge_marginals {
            let width = self.n + 1;
            for s1 in 0..width {
                for s2 in 0..width {
                    writeln!(
                        w,
                        "edge,{}-{},{},{},{}",
                        pair.i + 1,
                        pair.j + 1,
                        s1 + 1,
                        s2 + 1,
                        pair.prob(s1, s2)
                    )?;
                }
            }
        }
        Ok(())
    }
}
