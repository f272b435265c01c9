//! Experiment configuration: strict TOML with four sections.
//!
//! ```toml
//! [graph]
//! nodes = 4
//! edges = [[1, 2], [2, 3], [2, 4]]        # 1-based endpoints
//!
//! [priors]
//! rho = 0.1                               # scalar or per-node array
//!
//! [densities]
//! node_default = { family = "gaussian", mean_pre = 1.0, mean_post = 0.0, variance = 1.0 }
//! edge_default = { family = "gaussian", mean_pre = 1.0, mean_post = 0.0, variance = 1.0 }
//! # optional per-entity overrides:
//! # [[densities.node]]
//! # node = 2
//! # family = "bernoulli"
//! # p_pre = 0.3
//! # p_post = 0.7
//!
//! [experiment]
//! trials = 1000
//! seed = 42
//! rules = ["mp", "single"]
//! neg_log_alpha_grid = [1, 2, 3]          # or alpha_grid = [0.1, 0.01]
//! n_max = "auto"                          # or a fixed step count
//! output = "results.csv"                  # optional; CLI --out overrides
//!
//! [[experiment.functional]]
//! label = "center"
//! subset = [2]                            # 1-based node labels
//! ```
//!
//! Unknown keys anywhere are hard errors, as are out-of-range values; node
//! and edge labels are 1-based in files and mapped to 0-based indices here.

use crate::detection::Rule;
use crate::graph::StatisticalGraph;
use crate::model::{build_model, normalize_subset, GeometricPrior, NetworkModel, TwoPhaseDensity};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

// --- raw deserialization layer -------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    graph: RawGraph,
    priors: RawPriors,
    densities: RawDensities,
    experiment: RawExperiment,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    nodes: usize,
    edges: Vec<[usize; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPriors {
    rho: RhoSpec,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RhoSpec {
    Scalar(f64),
    PerNode(Vec<f64>),
}

#[derive(Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct RawDensity {
    family: String,
    mean_pre: Option<f64>,
    mean_post: Option<f64>,
    variance: Option<f64>,
    p_pre: Option<f64>,
    p_post: Option<f64>,
}

// serde's deny_unknown_fields does not compose with flatten, so the
// override tables repeat the density fields instead of embedding them.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNodeOverride {
    node: usize,
    family: String,
    mean_pre: Option<f64>,
    mean_post: Option<f64>,
    variance: Option<f64>,
    p_pre: Option<f64>,
    p_post: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdgeOverride {
    edge: [usize; 2],
    family: String,
    mean_pre: Option<f64>,
    mean_post: Option<f64>,
    variance: Option<f64>,
    p_pre: Option<f64>,
    p_post: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDensities {
    node_default: Option<RawDensity>,
    edge_default: Option<RawDensity>,
    #[serde(default)]
    node: Vec<RawNodeOverride>,
    #[serde(default)]
    edge: Vec<RawEdgeOverride>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NMaxSpec {
    Fixed(usize),
    Policy(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    trials: u64,
    seed: u64,
    rules: Vec<String>,
    alpha_grid: Option<Vec<f64>>,
    neg_log_alpha_grid: Option<Vec<f64>>,
    n_max: Option<NMaxSpec>,
    output: Option<String>,
    functional: Vec<RawFunctional>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunctional {
    label: String,
    subset: Vec<usize>,
}

// --- validated configuration ----------------------------------------------

/// A labeled monitored subset (0-based, sorted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Functional {
    pub label: String,
    pub subset: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NMaxPolicy {
    /// Per-(subset, alpha) cap from `detection::auto_n_max`.
    Auto,
    Fixed(usize),
}

/// A fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: NetworkModel,
    pub functionals: Vec<Functional>,
    pub rules: Vec<Rule>,
    /// False-alarm levels, in file order.
    pub alpha_grid: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub n_max: NMaxPolicy,
    /// Default CSV destination; the CLI's --out flag takes precedence.
    pub output: Option<PathBuf>,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    let model = build_network(&raw)?;
    let experiment = raw.experiment;

    let functionals = validate_functionals(&model, &experiment.functional)?;
    let rules = validate_rules(&experiment.rules, &functionals)?;
    let alpha_grid = validate_alpha_grid(
        experiment.alpha_grid.as_deref(),
        experiment.neg_log_alpha_grid.as_deref(),
    )?;
    let n_max = match experiment.n_max {
        None => NMaxPolicy::Auto,
        Some(NMaxSpec::Fixed(0)) => {
            return Err(invalid("experiment.n_max must be at least 1"));
        }
        Some(NMaxSpec::Fixed(cap)) => NMaxPolicy::Fixed(cap),
        Some(NMaxSpec::Policy(word)) if word == "auto" => NMaxPolicy::Auto,
        Some(NMaxSpec::Policy(word)) => {
            return Err(invalid(format!(
                "experiment.n_max must be a positive integer or \"auto\", got \"{word}\""
            )));
        }
    };

    Ok(ExperimentConfig {
        model,
        functionals,
        rules,
        alpha_grid,
        trials: experiment.trials,
        seed: experiment.seed,
        n_max,
        output: experiment.output.map(PathBuf::from),
    })
}

fn build_network(raw: &RawConfig) -> Result<NetworkModel, ConfigError> {
    let nodes = raw.graph.nodes;
    if nodes == 0 {
        return Err(invalid("graph.nodes must be at least 1"));
    }
    let mut edges = Vec::with_capacity(raw.graph.edges.len());
    for &[a, b] in &raw.graph.edges {
        edges.push((node_index(nodes, a, "graph.edges")?, node_index(nodes, b, "graph.edges")?));
    }
    let graph = StatisticalGraph::new(nodes, &edges)
        .map_err(|e| invalid(format!("graph.edges: {e}")))?;

    let rhos = match &raw.priors.rho {
        RhoSpec::Scalar(rho) => vec![*rho; nodes],
        RhoSpec::PerNode(list) => {
            if list.len() != nodes {
                return Err(invalid(format!(
                    "priors.rho lists {} values for {} nodes",
                    list.len(),
                    nodes
                )));
            }
            list.clone()
        }
    };
    let mut priors = Vec::with_capacity(nodes);
    for (j, &rho) in rhos.iter().enumerate() {
        priors.push(
            GeometricPrior::new(rho)
                .map_err(|e| invalid(format!("priors.rho for node {}: {e}", j + 1)))?,
        );
    }

    let node_densities = resolve_densities(
        nodes,
        raw.densities.node_default.as_ref(),
        "densities.node_default",
        raw.densities.node.iter().map(|o| {
            (
                node_index(nodes, o.node, "densities.node")
                    .map(|j| (j, format!("densities.node for node {}", o.node))),
                RawDensity {
                    family: o.family.clone(),
                    mean_pre: o.mean_pre,
                    mean_post: o.mean_post,
                    variance: o.variance,
                    p_pre: o.p_pre,
                    p_post: o.p_post,
                },
            )
        }),
    )?;
    let edge_densities = resolve_densities(
        graph.edge_count(),
        raw.densities.edge_default.as_ref(),
        "densities.edge_default",
        raw.densities.edge.iter().map(|o| {
            let key = (
                node_index(nodes, o.edge[0], "densities.edge"),
                node_index(nodes, o.edge[1], "densities.edge"),
            );
            let resolved = match key {
                (Ok(a), Ok(b)) => match graph.edge_index(a, b) {
                    Some(e) => Ok((e, format!("densities.edge for edge [{}, {}]", o.edge[0], o.edge[1]))),
                    None => Err(invalid(format!(
                        "densities.edge names [{}, {}], which is not an edge of the graph",
                        o.edge[0], o.edge[1]
                    ))),
                },
                (Err(e), _) | (_, Err(e)) => Err(e),
            };
            (
                resolved,
                RawDensity {
                    family: o.family.clone(),
                    mean_pre: o.mean_pre,
                    mean_post: o.mean_post,
                    variance: o.variance,
                    p_pre: o.p_pre,
                    p_post: o.p_post,
                },
            )
        }),
    )?;

    build_model(graph, priors, node_densities, edge_densities)
        .map_err(|e| invalid(format!("model assembly: {e}")))
}

/// Map a 1-based label from the file to a 0-based index.
fn node_index(nodes: usize, label: usize, key: &str) -> Result<usize, ConfigError> {
    if label == 0 || label > nodes {
        return Err(invalid(format!(
            "{key}: node label {label} outside 1..={nodes}"
        )));
    }
    Ok(label - 1)
}

fn resolve_densities(
    count: usize,
    default: Option<&RawDensity>,
    default_key: &str,
    overrides: impl Iterator<Item = (Result<(usize, String), ConfigError>, RawDensity)>,
) -> Result<Vec<TwoPhaseDensity>, ConfigError> {
    let mut slots: Vec<Option<TwoPhaseDensity>> = vec![None; count];
    for (target, density) in overrides {
        let (index, key) = target?;
        if slots[index].is_some() {
            return Err(invalid(format!("{key}: duplicate override")));
        }
        slots[index] = Some(parse_density(&density, &key)?);
    }
    let default = match default {
        Some(raw) => Some(parse_density(raw, default_key)?),
        None => None,
    };
    slots
        .into_iter()
        .enumerate()
        .map(|(index, slot)| {
            slot.or(default).ok_or_else(|| {
                invalid(format!(
                    "{default_key} is required (entry {} has no override)",
                    index + 1
                ))
            })
        })
        .collect()
}

fn parse_density(raw: &RawDensity, key: &str) -> Result<TwoPhaseDensity, ConfigError> {
    let require = |name: &str, value: Option<f64>| {
        value.ok_or_else(|| invalid(format!("{key}: family \"{}\" needs {name}", raw.family)))
    };
    let forbid = |name: &str, value: Option<f64>| {
        if value.is_some() {
            Err(invalid(format!(
                "{key}: {name} does not apply to family \"{}\"",
                raw.family
            )))
        } else {
            Ok(())
        }
    };
    match raw.family.as_str() {
        "gaussian" => {
            forbid("p_pre", raw.p_pre)?;
            forbid("p_post", raw.p_post)?;
            TwoPhaseDensity::gaussian(
                require("mean_pre", raw.mean_pre)?,
                require("mean_post", raw.mean_post)?,
                require("variance", raw.variance)?,
            )
            .map_err(|e| invalid(format!("{key}: {e}")))
        }
        "bernoulli" => {
            forbid("mean_pre", raw.mean_pre)?;
            forbid("mean_post", raw.mean_post)?;
            forbid("variance", raw.variance)?;
            TwoPhaseDensity::bernoulli(require("p_pre", raw.p_pre)?, require("p_post", raw.p_post)?)
                .map_err(|e| invalid(format!("{key}: {e}")))
        }
        other => Err(invalid(format!(
            "{key}: unknown family \"{other}\" (expected \"gaussian\" or \"bernoulli\")"
        ))),
    }
}

fn validate_functionals(
    model: &NetworkModel,
    raw: &[RawFunctional],
) -> Result<Vec<Functional>, ConfigError> {
    if raw.is_empty() {
        return Err(invalid("at least one [[experiment.functional]] is required"));
    }
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(raw.len());
    for f in raw {
        if f.label.is_empty() {
            return Err(invalid("experiment.functional labels must be nonempty"));
        }
        if !seen.insert(f.label.clone()) {
            return Err(invalid(format!(
                "duplicate functional label \"{}\"",
                f.label
            )));
        }
        let mut zero_based = Vec::with_capacity(f.subset.len());
        for &label in &f.subset {
            zero_based.push(node_index(
                model.node_count(),
                label,
                &format!("functional \"{}\"", f.label),
            )?);
        }
        let subset = normalize_subset(model.node_count(), &zero_based)
            .map_err(|e| invalid(format!("functional \"{}\": {e}", f.label)))?;
        out.push(Functional {
            label: f.label.clone(),
            subset,
        });
    }
    Ok(out)
}

fn validate_rules(raw: &[String], functionals: &[Functional]) -> Result<Vec<Rule>, ConfigError> {
    if raw.is_empty() {
        return Err(invalid("experiment.rules must name at least one rule"));
    }
    let mut rules = Vec::with_capacity(raw.len());
    for word in raw {
        let rule = match word.to_ascii_lowercase().as_str() {
            "mp" => Rule::Mp,
            "single" => Rule::Single,
            other => {
                return Err(invalid(format!(
                    "experiment.rules: unknown rule \"{other}\" (expected \"mp\" or \"single\")"
                )));
            }
        };
        if rules.contains(&rule) {
            return Err(invalid(format!("experiment.rules repeats \"{word}\"")));
        }
        rules.push(rule);
    }
    if rules.contains(&Rule::Single) {
        for f in functionals {
            if f.subset.len() > 2 {
                return Err(invalid(format!(
                    "rule \"single\" supports subsets of size 1 or 2, but functional \"{}\" has {} nodes",
                    f.label,
                    f.subset.len()
                )));
            }
        }
    }
    Ok(rules)
}

fn validate_alpha_grid(
    alphas: Option<&[f64]>,
    neg_logs: Option<&[f64]>,
) -> Result<Vec<f64>, ConfigError> {
    let grid: Vec<f64> = match (alphas, neg_logs) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                "give either experiment.alpha_grid or experiment.neg_log_alpha_grid, not both",
            ));
        }
        (None, None) => {
            return Err(invalid(
                "one of experiment.alpha_grid or experiment.neg_log_alpha_grid is required",
            ));
        }
        (Some(list), None) => list.to_vec(),
        (None, Some(list)) => list.iter().map(|&x| (-x).exp()).collect(),
    };
    if grid.is_empty() {
        return Err(invalid("the alpha grid must be nonempty"));
    }
    for &alpha in &grid {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!(
                "alpha values must lie strictly between 0 and 1, got {alpha}"
            )));
        }
    }
    for (i, &a) in grid.iter().enumerate() {
        if grid[..i].contains(&a) {
            return Err(invalid(format!("alpha grid repeats the value {a}")));
        }
    }
    Ok(grid)
}

// --- resolved echo ----------------------------------------------------------

fn describe_density(density: &TwoPhaseDensity) -> String {
    match *density {
        TwoPhaseDensity::Gaussian {
            mean_pre,
            mean_post,
            variance,
        } => format!("gaussian(mean_pre={mean_pre}, mean_post={mean_post}, variance={variance})"),
        TwoPhaseDensity::Bernoulli { p_pre, p_post } => {
            format!("bernoulli(p_pre={p_pre}, p_post={p_post})")
        }
    }
}

/// 1-based "+"-joined subset label, e.g. `{1, 2}` prints as `1+2`.
pub fn subset_display(subset: &[usize]) -> String {
    subset
        .iter()
        .map(|&j| (j + 1).to_string())
        .collect::<Vec<_>>()
        .join("+")
}

impl fmt::Display for ExperimentConfig {
    /// The "resolved config" block: every default expanded.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "resolved config:")?;
        let graph = self.model.graph();
        let edge_list = graph
            .edges()
            .iter()
            .map(|&(a, b)| format!("({},{})", a + 1, b + 1))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            f,
            "  graph: {} nodes, {} edges{}{}",
            graph.node_count(),
            graph.edge_count(),
            if graph.edge_count() > 0 { ": " } else { "" },
            edge_list
        )?;
        let rhos = (0..self.model.node_count())
            .map(|j| self.model.node_prior(j).rho().to_string())
            .collect::<Vec<_>>()
            .join(", ");
        writeln!(f, "  rho: [{rhos}]")?;
        for j in 0..self.model.node_count() {
            writeln!(
                f,
                "  node {} density: {}",
                j + 1,
                describe_density(self.model.node_density(j))
            )?;
        }
        for e in 0..self.model.edge_count() {
            let (a, b) = graph.edges()[e];
            writeln!(
                f,
                "  edge ({},{}) density: {}",
                a + 1,
                b + 1,
                describe_density(self.model.edge_density(e))
            )?;
        }
        for func in &self.functionals {
            writeln!(
                f,
                "  functional {}: nodes {}",
                func.label,
                subset_display(&func.subset)
            )?;
        }
        let rules = self
            .rules
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        writeln!(f, "  rules: {rules}")?;
        let alphas = self
            .alpha_grid
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        writeln!(f, "  alpha grid: [{alphas}]")?;
        writeln!(f, "  trials: {}", self.trials)?;
        writeln!(f, "  seed: {}", self.seed)?;
        match self.n_max {
            NMaxPolicy::Auto => {
                writeln!(f, "  n_max: auto")?;
                for func in &self.functionals {
                    let caps: Result<Vec<usize>, _> = self
                        .alpha_grid
                        .iter()
                        .map(|&a| crate::detection::auto_n_max(&self.model, &func.subset, a))
                        .collect();
                    if let Ok(caps) = caps {
                        let caps = caps
                            .iter()
                            .map(|c| c.to_string())
                            .collect::<Vec<_>>()
                            .join(", ");
                        writeln!(f, "    caps for {}: [{caps}]", func.label)?;
                    }
                }
            }
            NMaxPolicy::Fixed(cap) => writeln!(f, "  n_max: {cap}")?,
        }
        match &self.output {
            Some(path) => writeln!(f, "  output: {}", path.display())?,
            None => writeln!(f, "  output: (none, pass --out)")?,
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STAR: &str = r#"
[graph]
nodes = 4
edges = [[1, 2], [2, 3], [2, 4]]

[priors]
rho = 0.1

[densities]
node_default = { family = "gaussian", mean_pre = 1.0, mean_post = 0.0, variance = 1.0 }
edge_default = { family = "gaussian", mean_pre = 1.0, mean_post = 0.0, variance = 1.0 }

[experiment]
trials = 1000
seed = 42
rules = ["mp", "single"]
neg_log_alpha_grid = [1, 2, 3]
n_max = "auto"
output = "star.csv"

[[experiment.functional]]
label = "center"
subset = [2]

[[experiment.functional]]
label = "pair"
subset = [1, 2]
"#;

    #[test]
    fn star_config_resolves() {
        let config = parse_config_str(STAR).unwrap();
        assert_eq!(config.model.node_count(), 4);
        assert_eq!(config.model.edge_count(), 3);
        assert_eq!(config.model.graph().edges(), &[(0, 1), (1, 2), (1, 3)]);
        for j in 0..4 {
            assert_eq!(config.model.node_prior(j).rho(), 0.1);
            assert_eq!(
                *config.model.node_density(j),
                TwoPhaseDensity::gaussian(1.0, 0.0, 1.0).unwrap()
            );
        }
        assert_eq!(config.functionals.len(), 2);
        assert_eq!(config.functionals[0].label, "center");
        assert_eq!(config.functionals[0].subset, vec![1]);
        assert_eq!(config.functionals[1].subset, vec![0, 1]);
        assert_eq!(config.rules, vec![Rule::Mp, Rule::Single]);
        assert_eq!(config.alpha_grid.len(), 3);
        assert!((config.alpha_grid[0] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(config.trials, 1000);
        assert_eq!(config.n_max, NMaxPolicy::Auto);
        assert_eq!(config.output.as_deref(), Some(Path::new("star.csv")));
        let echo = config.to_string();
        assert!(echo.contains("resolved config:"));
        assert!(echo.contains("rho: [0.1, 0.1, 0.1, 0.1]"));
        assert!(echo.contains("functional pair: nodes 1+2"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let with_typo = STAR.replace("seed = 42", "seed = 42\nseeed = 7");
        let err = parse_config_str(&with_typo).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax(_)), "got: {err}");
        let graph_typo = STAR.replace("nodes = 4", "nodes = 4\ncolor = \"red\"");
        assert!(parse_config_str(&graph_typo).is_err());
    }

    #[test]
    fn missing_required_keys_are_rejected() {
        let no_trials = STAR.replace("trials = 1000\n", "");
        assert!(parse_config_str(&no_trials).is_err());
        let no_functional = STAR
            .replace("[[experiment.functional]]", "[[experiment.functionals_gone]]");
        assert!(parse_config_str(&no_functional).is_err());
    }

    #[test]
    fn alpha_grid_validation() {
        let boundary = STAR.replace(
            "neg_log_alpha_grid = [1, 2, 3]",
            "alpha_grid = [0.5, 1.0]",
        );
        let err = parse_config_str(&boundary).unwrap_err();
        assert!(err.to_string().contains("strictly between"), "got: {err}");

        let duplicate = STAR.replace(
            "neg_log_alpha_grid = [1, 2, 3]",
            "alpha_grid = [0.5, 0.5]",
        );
        assert!(parse_config_str(&duplicate).is_err());

        let both = STAR.replace(
            "neg_log_alpha_grid = [1, 2, 3]",
            "neg_log_alpha_grid = [1]\nalpha_grid = [0.5]",
        );
        assert!(parse_config_str(&both).is_err());

        let neither = STAR.replace("neg_log_alpha_grid = [1, 2, 3]\n", "");
        assert!(parse_config_str(&neither).is_err());
    }

    #[test]
    fn rho_array_must_match_node_count() {
        let short = STAR.replace("rho = 0.1", "rho = [0.1, 0.2]");
        let err = parse_config_str(&short).unwrap_err();
        assert!(err.to_string().contains("2 values for 4 nodes"), "got: {err}");
        let per_node = STAR.replace("rho = 0.1", "rho = [0.1, 0.2, 0.3, 0.4]");
        let config = parse_config_str(&per_node).unwrap();
        assert_eq!(config.model.node_prior(3).rho(), 0.4);
    }

    #[test]
    fn density_family_fields_are_strict() {
        let wrong_param = STAR.replace(
            "node_default = { family = \"gaussian\", mean_pre = 1.0, mean_post = 0.0, variance = 1.0 }",
            "node_default = { family = \"gaussian\", mean_pre = 1.0, mean_post = 0.0, variance = 1.0, p_pre = 0.3 }",
        );
        let err = parse_config_str(&wrong_param).unwrap_err();
        assert!(err.to_string().contains("does not apply"), "got: {err}");

        let missing_param = STAR.replace(
            "edge_default = { family = \"gaussian\", mean_pre = 1.0, mean_post = 0.0, variance = 1.0 }",
            "edge_default = { family = \"bernoulli\", p_pre = 0.3 }",
        );
        let err = parse_config_str(&missing_param).unwrap_err();
        assert!(err.to_string().contains("needs p_post"), "got: {err}");

        let bad_family = STAR.replace("family = \"gaussian\", mean_pre = 1.0, mean_post = 0.0, variance = 1.0 }\nedge_default", "family = \"poisson\" }\nedge_default");
        assert!(parse_config_str(&bad_family).is_err());
    }

    #[test]
    fn overrides_apply_per_entity() {
        let with_overrides = STAR.replace(
            "[experiment]",
            r#"[[densities.node]]
node = 3
family = "bernoulli"
p_pre = 0.3
p_post = 0.7

[[densities.edge]]
edge = [2, 4]
family = "bernoulli"
p_pre = 0.2
p_post = 0.9

[experiment]"#,
        );
        let config = parse_config_str(&with_overrides).unwrap();
        assert_eq!(
            *config.model.node_density(2),
            TwoPhaseDensity::bernoulli(0.3, 0.7).unwrap()
        );
        assert_eq!(
            *config.model.edge_density(2),
            TwoPhaseDensity::bernoulli(0.2, 0.9).unwrap()
        );
        // Unchanged entities keep the default.
        assert_eq!(
            *config.model.node_density(0),
            TwoPhaseDensity::gaussian(1.0, 0.0, 1.0).unwrap()
        );

        let bogus_edge = with_overrides.replace("edge = [2, 4]", "edge = [1, 4]");
        let err = parse_config_str(&bogus_edge).unwrap_err();
        assert!(err.to_string().contains("not an edge"), "got: {err}");
    }

    #[test]
    fn single_rule_restricts_subset_size() {
        let wide = STAR.replace("subset = [1, 2]", "subset = [1, 2, 3]");
        let err = parse_config_str(&wide).unwrap_err();
        assert!(err.to_string().contains("size 1 or 2"), "got: {err}");
        // Dropping the single rule lifts the restriction.
        let mp_only = wide.replace("rules = [\"mp\", \"single\"]", "rules = [\"mp\"]");
        assert!(parse_config_str(&mp_only).is_ok());
    }

    #[test]
    fn labels_and_subsets_validate() {
        let dup_label = STAR.replace("label = \"pair\"", "label = \"center\"");
        assert!(parse_config_str(&dup_label).is_err());
        let bad_node = STAR.replace("subset = [1, 2]", "subset = [0, 2]");
        let err = parse_config_str(&bad_node).unwrap_err();
        assert!(err.to_string().contains("outside 1..=4"), "got: {err}");
        let too_big = STAR.replace("subset = [1, 2]", "subset = [2, 5]");
        assert!(parse_config_str(&too_big).is_err());
    }

    #[test]
    fn n_max_policy_parses() {
        let fixed = STAR.replace("n_max = \"auto\"", "n_max = 800");
        assert_eq!(
            parse_config_str(&fixed).unwrap().n_max,
            NMaxPolicy::Fixed(800)
        );
        let absent = STAR.replace("n_max = \"auto\"\n", "");
        assert_eq!(parse_config_str(&absent).unwrap().n_max, NMaxPolicy::Auto);
        let zero = STAR.replace("n_max = \"auto\"", "n_max = 0");
        assert!(parse_config_str(&zero).is_err());
        let bogus = STAR.replace("n_max = \"auto\"", "n_max = \"forever\"");
        assert!(parse_config_str(&bogus).is_err());
    }

    #[test]
    fn trials_zero_is_allowed() {
        let zero = STAR.replace("trials = 1000", "trials = 0");
        assert_eq!(parse_config_str(&zero).unwrap().trials, 0);
    }
}
