//! Randomized self-checks behind the `validate` subcommand.
//!
//! The heart of the suite compares message passing against brute-force
//! enumeration of the joint change-state table on random trees: the two
//! paths share no code beyond the model containers, so agreement pins both.
//! The remaining checks exercise structural facts that must hold exactly:
//! tail lumping, the classical single-node recursion, flat-likelihood
//! degeneration to the prior, monotonicity in the monitored subset, and
//! round-trip agreement between the dedicated pair and subset routines.

use crate::graph::StatisticalGraph;
use crate::inference::{
    node_posterior, pair_posterior, run_loopy_bp, run_tree_bp, subset_min_cdf,
    TailAugmentedPrior,
};
use crate::model::{
    build_model, sample_change_points, sample_observations, GeometricPrior, NetworkModel,
    ObservationPanel, Phase, TwoPhaseDensity,
};
use crate::oracle::{beyond_horizon_constancy_check, enumerate_joint_posterior};
use crate::rng::trial_rng;
use rand::Rng;
use std::io::Write;

/// Relative tolerance for enumeration-vs-message-passing agreement.
const EQ_REL_TOL: f64 = 1e-9;
/// Cells below this mass are compared absolutely; relative error on
/// underflow-range probabilities measures rounding noise, not correctness.
const EQ_ABS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for check in &self.checks {
            writeln!(
                w,
                "{} {} - {}",
                if check.passed { "PASS" } else { "FAIL" },
                check.name,
                check.detail
            )?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        if failed == 0 {
            writeln!(w, "all {} checks passed", self.checks.len())
        } else {
            writeln!(w, "{failed} of {} checks FAILED", self.checks.len())
        }
    }
}

/// Worst-case comparison state shared by the equivalence checks.
#[derive(Default)]
struct Deviation {
    max_rel: f64,
    failures: usize,
}

impl Deviation {
    fn compare(&mut self, got: f64, want: f64) {
        let scale = got.abs().max(want.abs());
        let diff = (got - want).abs();
        if scale > EQ_ABS_FLOOR {
            let rel = diff / scale;
            self.max_rel = self.max_rel.max(rel);
            if rel > EQ_REL_TOL {
                self.failures += 1;
            }
        } else if diff > EQ_ABS_FLOOR {
            self.failures += 1;
        }
    }

    fn compare_all(&mut self, got: &[f64], want: &[f64]) {
        assert_eq!(got.len(), want.len(), "comparing tables of equal shape");
        for (&g, &w) in got.iter().zip(want) {
            self.compare(g, w);
        }
    }
}

fn random_density<R: Rng + ?Sized>(rng: &mut R) -> TwoPhaseDensity {
    if rng.random::<bool>() {
        let mean_pre = rng.random_range(-1.0..1.0);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let shift = sign * rng.random_range(0.4..1.6);
        let variance = rng.random_range(0.5..2.0);
        TwoPhaseDensity::gaussian(mean_pre, mean_pre + shift, variance)
            .expect("positive variance")
    } else {
        let p_pre = rng.random_range(0.1..0.45);
        let p_post = rng.random_range(0.55..0.9);
        TwoPhaseDensity::bernoulli(p_pre, p_post).expect("interior probabilities")
    }
}

/// Random labeled tree with random priors, mixed density families, and a
/// panel sampled from the model itself.
fn random_tree_instance<R: Rng + ?Sized>(
    rng: &mut R,
    nodes: std::ops::RangeInclusive<usize>,
    horizons: std::ops::RangeInclusive<usize>,
) -> (NetworkModel, ObservationPanel, usize) {
    let d = rng.random_range(nodes);
    let mut edges = Vec::with_capacity(d.saturating_sub(1));
    for v in 1..d {
        edges.push((rng.random_range(0..v), v));
    }
    let graph = StatisticalGraph::new(d, &edges).expect("attachment edges form a tree");
    let priors: Vec<GeometricPrior> = (0..d)
        .map(|_| GeometricPrior::new(rng.random_range(0.05..0.6)).expect("rho in range"))
        .collect();
    let node_densities: Vec<TwoPhaseDensity> = (0..d).map(|_| random_density(rng)).collect();
    let edge_densities: Vec<TwoPhaseDensity> =
        (0..edges.len()).map(|_| random_density(rng)).collect();
    let model =
        build_model(graph, priors, node_densities, edge_densities).expect("consistent shapes");
    let n = rng.random_range(horizons);
    let assignment = sample_change_points(&model, rng);
    let panel = sample_observations(&model, &assignment, n, rng);
    (model, panel, n)
}

fn random_nonempty_subset<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<usize> {
    loop {
        let subset: Vec<usize> = (0..d).filter(|_| rng.random::<bool>()).collect();
        if !subset.is_empty() {
            return subset;
        }
    }
}

/// Message passing vs enumeration on random trees: node marginals, adjacent
/// pair tables, and earliest-change probabilities for full, singleton,
/// random, and non-adjacent subsets.
pub fn check_oracle_equivalence(instances: usize, seed: u64, budget: u64) -> CheckOutcome {
    let name = "oracle-equivalence";
    let mut dev = Deviation::default();
    for k in 0..instances {
        let mut rng = trial_rng(seed, k as u64);
        let (model, panel, n) = random_tree_instance(&mut rng, 2..=5, 1..=6);
        let d = model.node_count();
        let outcome: Result<(), String> = (|| {
            let exact =
                enumerate_joint_posterior(&model, &panel, n, budget).map_err(|e| e.to_string())?;
            let table = run_tree_bp(&model, &panel, n).map_err(|e| e.to_string())?;
            for j in 0..d {
                let got =
                    node_posterior(&table, &model, &panel, n, j).map_err(|e| e.to_string())?;
                dev.compare_all(&got, &exact.node_marginal(j));
            }
            for &(i, j) in model.graph().edges() {
                let got =
                    pair_posterior(&table, &model, &panel, n, i, j).map_err(|e| e.to_string())?;
                dev.compare_all(got.probs(), &exact.pair_marginal(i, j));
            }
            let mut subsets: Vec<Vec<usize>> = vec![(0..d).collect()];
            subsets.extend((0..d).map(|j| vec![j]));
            subsets.push(random_nonempty_subset(&mut rng, d));
            if let Some(pair) = (0..d)
                .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
                .find(|&(i, j)| model.graph().edge_index(i, j).is_none())
            {
                subsets.push(vec![pair.0, pair.1]);
            }
            for subset in &subsets {
                let got = subset_min_cdf(&model, &panel, n, subset).map_err(|e| e.to_string())?;
                let want = exact.subset_min_cdf(subset).map_err(|e| e.to_string())?;
                dev.compare(got, want);
            }
            Ok(())
        })();
        if let Err(message) = outcome {
            return CheckOutcome {
                name,
                passed: false,
                detail: format!("instance {k}: {message}"),
            };
        }
    }
    CheckOutcome {
        name,
        passed: dev.failures == 0,
        detail: format!(
            "{instances} random trees, max relative deviation {:.3e}{}",
            dev.max_rel,
            if dev.failures > 0 {
                format!(", {} comparisons beyond tolerance", dev.failures)
            } else {
                String::new()
            }
        ),
    }
}

/// The data cannot distinguish change times beyond the horizon: posterior
/// over prior must be constant over probe times n+1..n+4 for every
/// conditioned subset.
pub fn check_tail_constancy(instances: usize, seed: u64, budget: u64) -> CheckOutcome {
    let name = "beyond-horizon-constancy";
    for k in 0..instances {
        let mut rng = trial_rng(seed, k as u64);
        let (model, panel, n) = random_tree_instance(&mut rng, 2..=3, 1..=4);
        let subset = random_nonempty_subset(&mut rng, model.node_count());
        match beyond_horizon_constancy_check(&model, &panel, n, &subset, budget) {
            Ok(true) => {}
            Ok(false) => {
                return CheckOutcome {
                    name,
                    passed: false,
                    detail: format!("instance {k}: tail ratios differ beyond 1e-10"),
                };
            }
            Err(e) => {
                return CheckOutcome {
                    name,
                    passed: false,
                    detail: format!("instance {k}: {e}"),
                };
            }
        }
    }
    CheckOutcome {
        name,
        passed: true,
        detail: format!("{instances} instances, tail ratios constant within 1e-10"),
    }
}

/// On one node the posterior admits the textbook sequential recursion;
/// the graph machinery must reproduce it step for step.
pub fn check_single_node_recursion(instances: usize, seed: u64) -> CheckOutcome {
    let name = "single-node-recursion";
    let mut max_diff = 0.0f64;
    for k in 0..instances {
        let mut rng = trial_rng(seed, k as u64);
        let rho = rng.random_range(0.05..0.6);
        let density = random_density(&mut rng);
        let model = build_model(
            StatisticalGraph::new(1, &[]).expect("singleton graph"),
            vec![GeometricPrior::new(rho).expect("rho in range")],
            vec![density],
            vec![],
        )
        .expect("one-node model");
        let horizon = 30;
        let assignment = sample_change_points(&model, &mut rng);
        let panel = sample_observations(&model, &assignment, horizon, &mut rng);

        let mut pi = 0.0f64;
        for t in 1..=horizon {
            let x = panel.node_stream(0)[t - 1];
            let f = model
                .node_density(0)
                .log_density(Phase::Post, x)
                .expect("in-support observation")
                .exp();
            let g = model
                .node_density(0)
                .log_density(Phase::Pre, x)
                .expect("in-support observation")
                .exp();
            let predicted = pi + (1.0 - pi) * rho;
            pi = predicted * f / (predicted * f + (1.0 - predicted) * g);
            match subset_min_cdf(&model, &panel, t, &[0]) {
                Ok(gamma) => {
                    let diff = (gamma - pi).abs();
                    max_diff = max_diff.max(diff);
                    if diff > 1e-9 {
                        return CheckOutcome {
                            name,
                            passed: false,
                            detail: format!(
                                "instance {k}, step {t}: recursion {pi} vs graph {gamma}"
                            ),
                        };
                    }
                }
                Err(e) => {
                    return CheckOutcome {
                        name,
                        passed: false,
                        detail: format!("instance {k}: {e}"),
                    };
                }
            }
        }
    }
    CheckOutcome {
        name,
        passed: true,
        detail: format!("{instances} single-node streams, max deviation {max_diff:.3e}"),
    }
}

/// With identical pre- and post-change densities the data are worthless:
/// every posterior must collapse to its prior.
pub fn check_flat_likelihood(instances: usize, seed: u64) -> CheckOutcome {
    let name = "flat-likelihood-prior";
    let mut max_diff = 0.0f64;
    for k in 0..instances {
        let mut rng = trial_rng(seed, k as u64);
        let d = rng.random_range(2..=5);
        let mut edges = Vec::new();
        for v in 1..d {
            edges.push((rng.random_range(0..v), v));
        }
        let flat = TwoPhaseDensity::gaussian(0.3, 0.3, 1.0).expect("positive variance");
        let priors: Vec<GeometricPrior> = (0..d)
            .map(|_| GeometricPrior::new(rng.random_range(0.05..0.6)).expect("rho in range"))
            .collect();
        let model = build_model(
            StatisticalGraph::new(d, &edges).expect("attachment edges form a tree"),
            priors,
            vec![flat; d],
            vec![flat; edges.len()],
        )
        .expect("consistent shapes");
        let n = rng.random_range(1..=8);
        let assignment = sample_change_points(&model, &mut rng);
        let panel = sample_observations(&model, &assignment, n, &mut rng);
        let outcome: Result<(), String> = (|| {
            let table = run_tree_bp(&model, &panel, n).map_err(|e| e.to_string())?;
            for j in 0..d {
                let got =
                    node_posterior(&table, &model, &panel, n, j).map_err(|e| e.to_string())?;
                let want = TailAugmentedPrior::new(model.node_prior(j), n);
                for (&g, &w) in got.iter().zip(want.entries()) {
                    max_diff = max_diff.max((g - w).abs());
                }
            }
            let subset = random_nonempty_subset(&mut rng, d);
            let got = subset_min_cdf(&model, &panel, n, &subset).map_err(|e| e.to_string())?;
            let want = 1.0
                - subset
                    .iter()
                    .map(|&j| model.node_prior(j).survival(n))
                    .product::<f64>();
            max_diff = max_diff.max((got - want).abs());
            Ok(())
        })();
        if let Err(message) = outcome {
            return CheckOutcome {
                name,
                passed: false,
                detail: format!("instance {k}: {message}"),
            };
        }
    }
    CheckOutcome {
        name,
        passed: max_diff <= 1e-12,
        detail: format!("{instances} flat instances, max deviation from prior {max_diff:.3e}"),
    }
}

/// Adding nodes to the monitored subset can only make its earliest change
/// earlier: the posterior probability is monotone under containment.
pub fn check_containment_monotonicity(instances: usize, seed: u64) -> CheckOutcome {
    let name = "containment-monotonicity";
    for k in 0..instances {
        let mut rng = trial_rng(seed, k as u64);
        let (model, panel, n) = random_tree_instance(&mut rng, 3..=5, 2..=8);
        let d = model.node_count();
        // A random nested chain of subsets.
        let mut order: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut previous = -1.0f64;
        for len in 1..=d {
            match subset_min_cdf(&model, &panel, n, &order[..len]) {
                Ok(gamma) => {
                    if gamma < previous - 1e-12 {
                        return CheckOutcome {
                            name,
                            passed: false,
                            detail: format!(
                                "instance {k}: subset of size {len} dropped from {previous} to {gamma}"
                            ),
                        };
                    }
                    previous = gamma;
                }
                Err(e) => {
                    return CheckOutcome {
                        name,
                        passed: false,
                        detail: format!("instance {k}: {e}"),
                    };
                }
            }
        }
    }
    CheckOutcome {
        name,
        passed: true,
        detail: format!("{instances} nested chains, no monotonicity violation beyond 1e-12"),
    }
}

/// Flooding with zero damping on a tree must reproduce the exact sweep.
pub fn check_loopy_tree_agreement(instances: usize, seed: u64) -> CheckOutcome {
    let name = "loopy-tree-agreement";
    let mut max_diff = 0.0f64;
    for k in 0..instances {
        let mut rng = trial_rng(seed, k as u64);
        let (model, panel, n) = random_tree_instance(&mut rng, 2..=5, 1..=6);
        let outcome: Result<(), String> = (|| {
            let exact = run_tree_bp(&model, &panel, n).map_err(|e| e.to_string())?;
            let loopy = run_loopy_bp(&model, &panel, n, 500, 0.0).map_err(|e| e.to_string())?;
            if !loopy.approximate() {
                return Err("flooding schedule must be flagged approximate".to_string());
            }
            if !loopy.converged() {
                return Err("flooding failed to converge on a tree".to_string());
            }
            for j in 0..model.node_count() {
                let want =
                    node_posterior(&exact, &model, &panel, n, j).map_err(|e| e.to_string())?;
                let got =
                    node_posterior(&loopy, &model, &panel, n, j).map_err(|e| e.to_string())?;
                for (&g, &w) in got.iter().zip(&want) {
                    max_diff = max_diff.max((g - w).abs());
                }
            }
            Ok(())
        })();
        if let Err(message) = outcome {
            return CheckOutcome {
                name,
                passed: false,
                detail: format!("instance {k}: {message}"),
            };
        }
    }
    CheckOutcome {
        name,
        passed: max_diff <= 1e-7,
        detail: format!("{instances} trees, max node-marginal gap {max_diff:.3e}"),
    }
}

/// The dedicated pair table and the generic subset routine must agree, and
/// a pair's earliest change is at least as probable as either node's own.
pub fn check_pair_subset_consistency(instances: usize, seed: u64) -> CheckOutcome {
    let name = "pair-subset-consistency";
    let mut max_diff = 0.0f64;
    for k in 0..instances {
        let mut rng = trial_rng(seed, k as u64);
        let (model, panel, n) = random_tree_instance(&mut rng, 2..=5, 1..=6);
        let outcome: Result<(), String> = (|| {
            let table = run_tree_bp(&model, &panel, n).map_err(|e| e.to_string())?;
            for &(i, j) in model.graph().edges() {
                let pair =
                    pair_posterior(&table, &model, &panel, n, i, j).map_err(|e| e.to_string())?;
                let via_subset =
                    subset_min_cdf(&model, &panel, n, &[i, j]).map_err(|e| e.to_string())?;
                max_diff = max_diff.max((pair.min_cdf_at_horizon() - via_subset).abs());
                for node in [i, j] {
                    let single =
                        subset_min_cdf(&model, &panel, n, &[node]).map_err(|e| e.to_string())?;
                    if via_subset < single - 1e-12 {
                        return Err(format!(
                            "pair ({},{}) below its own node {}: {via_subset} < {single}",
                            i + 1,
                            j + 1,
                            node + 1
                        ));
                    }
                }
            }
            Ok(())
        })();
        if let Err(message) = outcome {
            return CheckOutcome {
                name,
                passed: false,
                detail: format!("instance {k}: {message}"),
            };
        }
    }
    CheckOutcome {
        name,
        passed: max_diff <= 1e-12,
        detail: format!("{instances} trees, max pair-vs-subset gap {max_diff:.3e}"),
    }
}

/// The full suite at the sizes the acceptance gate uses.
pub fn run_validation(budget: u64) -> ValidationReport {
    ValidationReport {
        checks: vec![
            check_oracle_equivalence(100, 11_000, budget),
            check_tail_constancy(20, 12_000, budget),
            check_single_node_recursion(20, 13_000),
            check_flat_likelihood(5, 14_000),
            check_containment_monotonicity(20, 15_000),
            check_loopy_tree_agreement(10, 16_000),
            check_pair_subset_consistency(20, 17_000),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::DEFAULT_CELL_BUDGET;

    #[test]
    fn equivalence_check_passes_on_a_small_sample() {
        let outcome = check_oracle_equivalence(8, 11_000, DEFAULT_CELL_BUDGET);
        assert!(outcome.passed, "{}", outcome.detail);
    }

    #[test]
    fn constancy_check_passes_on_a_small_sample() {
        let outcome = check_tail_constancy(4, 12_000, DEFAULT_CELL_BUDGET);
        assert!(outcome.passed, "{}", outcome.detail);
    }

    #[test]
    fn recursion_check_passes_on_a_small_sample() {
        let outcome = check_single_node_recursion(4, 13_000);
        assert!(outcome.passed, "{}", outcome.detail);
    }

    #[test]
    fn structural_checks_pass_on_small_samples() {
        for outcome in [
            check_flat_likelihood(2, 14_000),
            check_containment_monotonicity(4, 15_000),
            check_loopy_tree_agreement(3, 16_000),
            check_pair_subset_consistency(4, 17_000),
        ] {
            assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
        }
    }

    #[test]
    fn budget_errors_surface_as_failures() {
        let outcome = check_oracle_equivalence(2, 11_000, 3);
        assert!(!outcome.passed);
        assert!(outcome.detail.contains("budget"), "got: {}", outcome.detail);
    }

    #[test]
    fn report_formats_pass_and_fail_lines() {
        let report = ValidationReport {
            checks: vec![
                CheckOutcome {
                    name: "a",
                    passed: true,
                    detail: "fine".into(),
                },
                CheckOutcome {
                    name: "b",
                    passed: false,
                    detail: "broken".into(),
                },
            ],
        };
        assert!(!report.all_passed());
        let mut buf = Vec::new();
        report.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("PASS a - fine"));
        assert!(text.contains("FAIL b - broken"));
        assert!(text.contains("1 of 2 checks FAILED"));
    }
}
