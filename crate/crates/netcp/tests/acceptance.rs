//! Acceptance checklist for the crate, one test per numbered criterion:
//!
//! 1. tree inference matches brute-force enumeration on random instances
//! 2. the likelihood is constant over change times beyond the horizon
//! 3. closed-form slope constants on the reference star
//! 4. empirical false-alarm rate respects the threshold guarantee
//! 5. the joint rule beats the single-stream rule on a paired functional
//! 6. normalized delay slope decreases toward its predicted limit
//! 7. the per-step log likelihood ratio concentrates at the information rate
//! 8. aggregate CSV is byte-identical across worker thread counts
//! 9. per-step message-passing cost is linear in the horizon
//!
//! Each test prints one PASS/FAIL line with its wall time; run
//! `cargo test --test acceptance -- --nocapture` to see the report.

use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, PoisonError};
use std::time::{Duration, Instant};

use netcp::validate::{check_oracle_equivalence, check_tail_constancy};
use netcp::{
    asymptotic_slope, build_model, concentration_diagnostic, emit_csv, info_functional,
    parse_config, parse_config_str, run_experiment, run_tree_bp, sample_change_points,
    sample_observations, trial_rng, AggregateRow, GeometricPrior, Rule, StatisticalGraph,
    TwoPhaseDensity, DEFAULT_CELL_BUDGET,
};

/// The box may have a single core; running bodies one at a time keeps the
/// reported wall times honest.
static GATE: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(PoisonError::into_inner)
}

fn report(criterion: u32, label: &str, passed: bool, elapsed: Duration, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!(
        "{verdict} criterion {criterion} [{label}] {detail} ({:.2}s)",
        elapsed.as_secs_f64()
    );
    assert!(passed, "criterion {criterion} [{label}] {detail}");
}

fn shipped_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

/// Reference star: node 2 in the center, every stream Gaussian mean 1 -> 0
/// with unit variance, rho = 0.1. `grid_line` picks the alpha grid and
/// `functionals` appends the monitored subsets.
fn star_toml(trials: u64, rules: &str, grid_line: &str, functionals: &str) -> String {
    format!(
        r#"
[graph]
nodes = 4
edges = [[1, 2], [2, 3], [2, 4]]

[priors]
rho = 0.1

[densities]
node_default = {{ family = "gaussian", mean_pre = 1.0, mean_post = 0.0, variance = 1.0 }}
edge_default = {{ family = "gaussian", mean_pre = 1.0, mean_post = 0.0, variance = 1.0 }}

[experiment]
trials = {trials}
seed = 20260819
rules = {rules}
{grid_line}
n_max = "auto"
{functionals}
"#
    )
}

const CENTER: &str = "[[experiment.functional]]\nlabel = \"center\"\nsubset = [2]\n";
const PAIR: &str = "[[experiment.functional]]\nlabel = \"pair\"\nsubset = [1, 2]\n";

fn cell<'a>(rows: &'a [AggregateRow], functional: &str, rule: Rule, alpha: f64) -> &'a AggregateRow {
    rows.iter()
        .find(|r| r.functional == functional && r.rule == rule && (r.alpha - alpha).abs() < 1e-12)
        .expect("grid cell present")
}

#[test]
fn criterion_1_inference_matches_enumeration() {
    let _gate = serial();
    let started = Instant::now();
    let outcome = check_oracle_equivalence(100, 90_001, DEFAULT_CELL_BUDGET);
    let elapsed = started.elapsed();
    let in_time = elapsed < Duration::from_secs(60);
    report(
        1,
        "inference vs enumeration",
        outcome.passed && in_time,
        elapsed,
        &outcome.detail,
    );
}

#[test]
fn criterion_2_beyond_horizon_constancy() {
    let _gate = serial();
    let started = Instant::now();
    let outcome = check_tail_constancy(20, 90_002, DEFAULT_CELL_BUDGET);
    let elapsed = started.elapsed();
    let in_time = elapsed < Duration::from_secs(10);
    report(
        2,
        "beyond-horizon constancy",
        outcome.passed && in_time,
        elapsed,
        &outcome.detail,
    );
}

#[test]
fn criterion_3_closed_form_slope_constants() {
    let _gate = serial();
    let started = Instant::now();
    let config = parse_config(&shipped_config("star.toml")).expect("shipped star config parses");
    let leaf = asymptotic_slope(&config.model, &[0]).expect("leaf slope");
    let pair = asymptotic_slope(&config.model, &[0, 1]).expect("center+leaf slope");
    let ok = (leaf - 1.6519).abs() <= 5e-5 && (pair - 0.5845).abs() <= 5e-5;
    report(
        3,
        "slope constants",
        ok,
        started.elapsed(),
        &format!("single-node slope {leaf:.7} (want 1.6519 +- 5e-5), adjacent-pair slope {pair:.7} (want 0.5845 +- 5e-5)"),
    );
}

#[test]
fn criterion_4_false_alarm_rate_within_bound() {
    let _gate = serial();
    let started = Instant::now();
    let config = parse_config_str(&star_toml(
        2000,
        r#"["mp"]"#,
        "alpha_grid = [0.1, 0.01]",
        &format!("{CENTER}\n{PAIR}"),
    ))
    .expect("config parses");
    let result = run_experiment(&config, None).expect("experiment runs");
    let mut ok = true;
    let mut detail = String::new();
    for row in &result.rows {
        let bound = row.alpha + 3.0 * (row.alpha * (1.0 - row.alpha) / row.trials as f64).sqrt();
        ok &= row.false_alarm_rate <= bound && row.censored == 0;
        detail.push_str(&format!(
            "{} a={}: rate {:.4} <= {:.4}; ",
            row.functional, row.alpha, row.false_alarm_rate, bound
        ));
    }
    let elapsed = started.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    report(4, "false-alarm bound", ok, elapsed, detail.trim_end());
}

#[test]
fn criterion_5_joint_rule_beats_single_rule_on_pair() {
    let _gate = serial();
    let started = Instant::now();
    let alpha = (-5.0f64).exp();
    let config = parse_config_str(&star_toml(
        1000,
        r#"["mp", "single"]"#,
        "neg_log_alpha_grid = [5]",
        PAIR,
    ))
    .expect("config parses");
    let result = run_experiment(&config, None).expect("experiment runs");
    let mp = cell(&result.rows, "pair", Rule::Mp, alpha);
    let single = cell(&result.rows, "pair", Rule::Single, alpha);
    let gap = single.mean_cond_delay - mp.mean_cond_delay;
    let sep = (mp.se_delay.powi(2) + single.se_delay.powi(2)).sqrt();
    let elapsed = started.elapsed();
    let ok = gap > 2.0 * sep
        && mp.censored == 0
        && single.censored == 0
        && elapsed < Duration::from_secs(600);
    report(
        5,
        "joint vs single-stream delay",
        ok,
        elapsed,
        &format!(
            "MP {:.3} vs SINGLE {:.3}, gap {gap:.3} > 2 x combined se {sep:.3}",
            mp.mean_cond_delay, single.mean_cond_delay
        ),
    );
}

/// Paired per-trial difference of normalized delay between two grid cells,
/// over trials completed in both: mean and standard error. The pairing
/// (every alpha level sees the same realization) makes this the right
/// yardstick for whether one cell's slope sits above another's.
fn paired_slope_diff(
    records: &[netcp::TrialRecord],
    a: usize,
    b: usize,
    xa: f64,
    xb: f64,
) -> (f64, f64) {
    let diffs: Vec<f64> = records
        .iter()
        .filter_map(|rec| {
            let oa = &rec.outcomes[a];
            let ob = &rec.outcomes[b];
            let both = !oa.false_alarm && !oa.censored && !ob.false_alarm && !ob.censored;
            both.then(|| ob.delay as f64 / xb - oa.delay as f64 / xa)
        })
        .collect();
    let m = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / m;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[test]
fn criterion_6_slope_decreases_toward_limit() {
    let _gate = serial();
    let started = Instant::now();
    let config = parse_config_str(&star_toml(
        1000,
        r#"["mp"]"#,
        "neg_log_alpha_grid = [2, 4, 6, 8]",
        CENTER,
    ))
    .expect("config parses");
    let result = run_experiment(&config, None).expect("experiment runs");
    let xs = [2.0f64, 4.0, 6.0, 8.0];
    for (k, row) in result.rows.iter().enumerate() {
        assert!((row.alpha - (-xs[k]).exp()).abs() < 1e-12, "rows follow grid order");
        assert_eq!(row.censored, 0, "acceptance run must not censor");
    }
    let slopes: Vec<f64> = result.rows.iter().map(|r| r.slope).collect();
    // Decreasing trend, judged at Monte Carlo resolution: the slope must
    // fall significantly across the grid, and no adjacent step may rise by
    // more than twice the paired-difference standard error. Strict pairwise
    // decrease is not checkable from finite trials once the curve flattens
    // near its limit.
    let mut no_significant_rise = true;
    for k in 0..3 {
        let (_, se) = paired_slope_diff(&result.records, k, k + 1, xs[k], xs[k + 1]);
        no_significant_rise &= slopes[k + 1] - slopes[k] <= 2.0 * se;
    }
    let (net, net_se) = paired_slope_diff(&result.records, 0, 3, xs[0], xs[3]);
    let net_decrease = slopes[0] - slopes[3] > 2.0 * net_se && net < 0.0;
    let last = *slopes.last().expect("four grid points");
    let within = (last - 1.6519).abs() <= 0.35 * 1.6519;
    let elapsed = started.elapsed();
    let ok = no_significant_rise && net_decrease && within && elapsed < Duration::from_secs(1200);
    report(
        6,
        "slope trend",
        ok,
        elapsed,
        &format!(
            "slopes {slopes:.3?} trend down (net {:.3} +- {net_se:.3}), final within 35% of 1.6519",
            slopes[0] - slopes[3]
        ),
    );
}

#[test]
fn criterion_7_log_lr_concentrates_at_information_rate() {
    let _gate = serial();
    let started = Instant::now();
    let config =
        parse_config(&shipped_config("chain_bernoulli.toml")).expect("shipped chain config parses");
    let subset = [0usize, 1];
    let info = info_functional(&config.model, &subset).expect("information functional");
    let mut rng = trial_rng(20260819, 0);
    let summary = concentration_diagnostic(&config.model, &subset, 1, &[2000], 50, &mut rng)
        .expect("diagnostic runs");
    let median = summary.medians[0];
    let rel = (median - info).abs() / info;
    let elapsed = started.elapsed();
    let ok = rel <= 0.10 && elapsed < Duration::from_secs(300);
    report(
        7,
        "log-LR concentration",
        ok,
        elapsed,
        &format!("median per-step log LR {median:.5} vs rate {info:.5} (rel dev {rel:.4})"),
    );
}

#[test]
fn criterion_8_csv_identical_across_thread_counts() {
    let _gate = serial();
    let started = Instant::now();
    let config = parse_config_str(&star_toml(
        2000,
        r#"["mp"]"#,
        "alpha_grid = [0.1, 0.01]",
        &format!("{CENTER}\n{PAIR}"),
    ))
    .expect("config parses");
    let serial_run = run_experiment(&config, Some(1)).expect("1-thread run");
    let parallel_run = run_experiment(&config, Some(8)).expect("8-thread run");
    let mut a = Vec::new();
    emit_csv(&serial_run.rows, &mut a).expect("csv");
    let mut b = Vec::new();
    emit_csv(&parallel_run.rows, &mut b).expect("csv");
    let ok = a == b && !a.is_empty();
    report(
        8,
        "thread-count determinism",
        ok,
        started.elapsed(),
        &format!("{} CSV bytes, 1 vs 8 worker threads", a.len()),
    );
}

#[test]
fn criterion_9_bp_cost_linear_in_horizon() {
    let _gate = serial();
    let started = Instant::now();
    // Fixed 24-node random attachment tree, large enough that one message
    // pass dwarfs timer noise.
    let nodes = 24;
    let mut rng = trial_rng(90_009, 0);
    let mut edges = Vec::new();
    for v in 1..nodes {
        edges.push((rand::Rng::random_range(&mut rng, 0..v), v));
    }
    let graph = StatisticalGraph::new(nodes, &edges).expect("tree");
    let priors = vec![GeometricPrior::new(0.1).expect("rho"); nodes];
    let density = TwoPhaseDensity::gaussian(1.0, 0.0, 1.0).expect("gaussian");
    let model = build_model(
        graph,
        priors,
        vec![density.clone(); nodes],
        vec![density; edges.len()],
    )
    .expect("model");
    let assignment = sample_change_points(&model, &mut rng);
    let panel = sample_observations(&model, &assignment, 1600, &mut rng);

    let sizes = [200usize, 400, 800, 1600];
    let mut per_call = Vec::new();
    for &n in &sizes {
        run_tree_bp(&model, &panel, n).expect("warmup pass");
        // Equal work per size: reps * n is constant, so every point gets the
        // same aggregate measurement window.
        let reps = 19_200 / n;
        let clock = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(run_tree_bp(&model, &panel, n).expect("timed pass"));
        }
        per_call.push(clock.elapsed().as_secs_f64() / reps as f64);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = per_call.iter().map(|&t| t.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let den: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let slope = num / den;
    let ok = (0.8..=1.3).contains(&slope);
    let millis: Vec<f64> = per_call.iter().map(|t| t * 1e3).collect();
    report(
        9,
        "per-step cost scaling",
        ok,
        started.elapsed(),
        &format!("log-log slope {slope:.3} over n = {sizes:?} (per-pass ms {millis:.3?})"),
    );
}
