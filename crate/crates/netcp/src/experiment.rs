//! Seeded Monte Carlo grids over (functional, rule, alpha).
//!
//! Every trial draws its randomness from a counter-derived substream of the
//! experiment seed, so results do not depend on the number of worker
//! threads or on scheduling: trials are collected in index order and all
//! statistics are folded serially over that order. Within a trial, one
//! observation stream is shared by every functional, rule, and alpha
//! level; each (functional, rule) pair scans its posterior trajectory once
//! and reads off the stop times of the whole alpha grid.

use crate::config::{ExperimentConfig, NMaxPolicy};
use crate::detection::{
    auto_n_max, run_threshold_grid, score_grid_stop, DetectionError, GridEntry, Rule,
    StoppingOutcome,
};
use crate::model::{sample_change_points, sample_step, ObservationPanel};
use crate::rng::trial_rng;
use crate::theory::asymptotic_slope;
use rayon::prelude::*;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error("thread pool: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

/// One cell of the experiment grid.
#[derive(Debug, Clone)]
struct CellPlan {
    functional: usize,
    rule: Rule,
    entries: Vec<GridEntry>,
}

/// Aggregated statistics for one (functional, rule, alpha) cell.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub functional: String,
    pub rule: Rule,
    pub alpha: f64,
    pub trials: u64,
    /// Trials that stopped at or after the change.
    pub completed: u64,
    /// Trials that hit the horizon cap without stopping.
    pub censored: u64,
    /// Trials that stopped strictly before the change.
    pub false_alarms: u64,
    /// false_alarms / trials.
    pub false_alarm_rate: f64,
    /// Mean of tau - phi over completed trials only (tau >= phi).
    pub mean_cond_delay: f64,
    /// Sample standard deviation of those delays over sqrt(completed).
    pub se_delay: f64,
    /// mean_cond_delay / |ln alpha|.
    pub slope: f64,
    /// Predicted limit of `slope` for this functional.
    pub theory_slope: f64,
    /// Mean of (tau - phi)+ over all non-censored trials (false alarms
    /// contribute zero). Reported in the text summary, not the CSV.
    pub mean_uncond_delay: f64,
}

/// Everything one trial produced, for the audit log.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: u64,
    /// True change time of every node, in node order.
    pub change_times: Vec<u64>,
    /// One outcome per grid cell, functional-major then rule then alpha.
    pub outcomes: Vec<StoppingOutcome>,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub rows: Vec<AggregateRow>,
    pub records: Vec<TrialRecord>,
}

impl ExperimentResult {
    pub fn total_censored(&self) -> u64 {
        self.rows.iter().map(|r| r.censored).sum()
    }
}

fn build_plans(config: &ExperimentConfig) -> Result<Vec<CellPlan>, ExperimentError> {
    let mut plans = Vec::new();
    for (functional, f) in config.functionals.iter().enumerate() {
        for &rule in &config.rules {
            let mut entries = Vec::with_capacity(config.alpha_grid.len());
            for &alpha in &config.alpha_grid {
                let n_max = match config.n_max {
                    NMaxPolicy::Fixed(cap) => cap,
                    NMaxPolicy::Auto => auto_n_max(&config.model, &f.subset, alpha)?,
                };
                entries.push(GridEntry { alpha, n_max });
            }
            plans.push(CellPlan {
                functional,
                rule,
                entries,
            });
        }
    }
    Ok(plans)
}

fn run_trial(
    config: &ExperimentConfig,
    plans: &[CellPlan],
    trial: u64,
) -> Result<TrialRecord, ExperimentError> {
    let model = &config.model;
    let mut rng = trial_rng(config.seed, trial);
    let assignment = sample_change_points(model, &mut rng);
    let mut panel = ObservationPanel::empty(model.node_count(), model.edge_count());
    let mut outcomes = Vec::new();
    for plan in plans {
        let subset = &config.functionals[plan.functional].subset;
        let stops = run_threshold_grid(
            model,
            plan.rule,
            subset,
            &plan.entries,
            &mut panel,
            |panel| {
                let t = (panel.horizon() + 1) as u64;
                let step = sample_step(model, &assignment, t, &mut rng);
                panel
                    .push_step(&step)
                    .expect("sampled step matches the model shape");
            },
        )?;
        outcomes.extend(
            stops
                .into_iter()
                .map(|stop| score_grid_stop(stop, subset, &assignment)),
        );
    }
    Ok(TrialRecord {
        trial,
        change_times: assignment.times().to_vec(),
        outcomes,
    })
}

/// Run the full grid. `threads = None` uses one worker per CPU; any value
/// yields identical results.
pub fn run_experiment(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentResult, ExperimentError> {
    let plans = build_plans(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()?;
    let records: Vec<TrialRecord> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|trial| run_trial(config, &plans, trial))
            .collect::<Result<_, _>>()
    })?;
    let rows = aggregate(config, &plans, &records)?;
    Ok(ExperimentResult { rows, records })
}

fn aggregate(
    config: &ExperimentConfig,
    plans: &[CellPlan],
    records: &[TrialRecord],
) -> Result<Vec<AggregateRow>, ExperimentError> {
    if config.trials == 0 {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for (cell_base, plan) in plans.iter().enumerate() {
        let f = &config.functionals[plan.functional];
        let theory_slope = asymptotic_slope(&config.model, &f.subset)?;
        for (offset, entry) in plan.entries.iter().enumerate() {
            let cell = cell_base * config.alpha_grid.len() + offset;
            debug_assert_eq!(cell, rows.len());
            let mut completed = 0u64;
            let mut censored = 0u64;
            let mut false_alarms = 0u64;
            let mut delays: Vec<f64> = Vec::new();
            let mut uncond_sum = 0.0f64;
            for record in records {
                let outcome = &record.outcomes[cell];
                if outcome.censored {
                    censored += 1;
                } else if outcome.false_alarm {
                    false_alarms += 1;
                } else {
                    completed += 1;
                    delays.push(outcome.delay as f64);
                }
                if !outcome.censored {
                    uncond_sum += outcome.delay as f64;
                }
            }
            let trials = records.len() as u64;
            debug_assert_eq!(completed + censored + false_alarms, trials);
            let m = delays.len() as f64;
            let mean_cond_delay = delays.iter().sum::<f64>() / m;
            let se_delay = if delays.len() >= 2 {
                let var = delays
                    .iter()
                    .map(|&x| (x - mean_cond_delay).powi(2))
                    .sum::<f64>()
                    / (m - 1.0);
                (var / m).sqrt()
            } else {
                f64::NAN
            };
            let non_censored = (trials - censored) as f64;
            rows.push(AggregateRow {
                functional: f.label.clone(),
                rule: plan.rule,
                alpha: entry.alpha,
                trials,
                completed,
                censored,
                false_alarms,
                false_alarm_rate: false_alarms as f64 / trials as f64,
                mean_cond_delay,
                se_delay,
                slope: mean_cond_delay / entry.alpha.ln().abs(),
                theory_slope,
                mean_uncond_delay: uncond_sum / non_censored,
            });
        }
    }
    Ok(rows)
}

/// Format with 6 significant digits, shortest decimal spelling.
pub fn format_stat(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.5e}");
    let rounded: f64 = sci.parse().expect("formatter emits valid literals");
    format!("{rounded}")
}

pub const AGGREGATE_HEADER: &str = "functional,rule,alpha,neg_log_alpha,trials,completed,\
censored,false_alarm_rate,mean_cond_delay,se_delay,slope,theory_slope";

/// Aggregate CSV: exact header above, one line per row, newline-terminated.
/// `alpha` and `neg_log_alpha` keep full precision so they round-trip; the
/// statistics columns carry 6 significant digits.
pub fn emit_csv<W: Write>(rows: &[AggregateRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.functional,
            row.rule,
            row.alpha,
            -row.alpha.ln(),
            row.trials,
            row.completed,
            row.censored,
            format_stat(row.false_alarm_rate),
            format_stat(row.mean_cond_delay),
            format_stat(row.se_delay),
            format_stat(row.slope),
            format_stat(row.theory_slope),
        )?;
    }
    Ok(())
}

/// Per-trial audit log: one line per (cell, trial). `lambda_star` joins the
/// node change times with ';'; `tau` is empty on censored trials; booleans
/// are 0/1.
pub fn emit_trial_log<W: Write>(
    config: &ExperimentConfig,
    result: &ExperimentResult,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(
        w,
        "functional,rule,alpha,trial,lambda_star,tau,phi,delay,false_alarm,censored"
    )?;
    let plans: Vec<(&str, Rule)> = config
        .functionals
        .iter()
        .flat_map(|f| config.rules.iter().map(move |&r| (f.label.as_str(), r)))
        .collect();
    for record in &result.records {
        let lambda_star = record
            .change_times
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(";");
        for (cell, outcome) in record.outcomes.iter().enumerate() {
            let (label, rule) = plans[cell / config.alpha_grid.len()];
            let alpha = config.alpha_grid[cell % config.alpha_grid.len()];
            let tau = outcome
                .stop_time
                .map(|t| t.to_string())
                .unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                label,
                rule,
                alpha,
                record.trial,
                lambda_star,
                tau,
                outcome.change_time,
                outcome.delay,
                u8::from(outcome.false_alarm),
                u8::from(outcome.censored),
            )?;
        }
    }
    Ok(())
}

/// Human-readable closing summary; the only place the unconditional delay
/// E[(tau - phi)+] is reported.
pub fn write_summary<W: Write>(rows: &[AggregateRow], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "{:<12} {:<7} {:>12} {:>10} {:>12} {:>12} {:>9} {:>9}",
        "functional", "rule", "alpha", "fa_rate", "cond_delay", "uncond_delay", "slope", "censored"
    )?;
    for row in rows {
        writeln!(
            w,
            "{:<12} {:<7} {:>12} {:>10} {:>12} {:>12} {:>9} {:>9}",
            row.functional,
            row.rule.to_string(),
            format_stat(row.alpha),
            format_stat(row.false_alarm_rate),
            format_stat(row.mean_cond_delay),
            format_stat(row.mean_uncond_delay),
            format_stat(row.slope),
            row.censored,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn small_config(trials: u64) -> ExperimentConfig {
        let text = format!(
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
seed = 7
rules = ["mp", "single"]
alpha_grid = [0.3, 0.05]
n_max = "auto"

[[experiment.functional]]
label = "center"
subset = [2]

[[experiment.functional]]
label = "pair"
subset = [1, 2]
"#
        );
        parse_config_str(&text).unwrap()
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let config = small_config(24);
        let serial = run_experiment(&config, Some(1)).unwrap();
        let parallel = run_experiment(&config, Some(4)).unwrap();

        let mut csv_serial = Vec::new();
        emit_csv(&serial.rows, &mut csv_serial).unwrap();
        let mut csv_parallel = Vec::new();
        emit_csv(&parallel.rows, &mut csv_parallel).unwrap();
        assert_eq!(csv_serial, csv_parallel);

        let mut log_serial = Vec::new();
        emit_trial_log(&config, &serial, &mut log_serial).unwrap();
        let mut log_parallel = Vec::new();
        emit_trial_log(&config, &parallel, &mut log_parallel).unwrap();
        assert_eq!(log_serial, log_parallel);
    }

    #[test]
    fn rows_conserve_trials_and_order() {
        let config = small_config(16);
        let result = run_experiment(&config, Some(2)).unwrap();
        // functional-major, then rule, then alpha.
        assert_eq!(result.rows.len(), 2 * 2 * 2);
        assert_eq!(result.rows[0].functional, "center");
        assert_eq!(result.rows[0].rule, Rule::Mp);
        assert_eq!(result.rows[0].alpha, 0.3);
        assert_eq!(result.rows[1].alpha, 0.05);
        assert_eq!(result.rows[2].rule, Rule::Single);
        assert_eq!(result.rows[4].functional, "pair");
        for row in &result.rows {
            assert_eq!(row.completed + row.censored + row.false_alarms, row.trials);
            assert_eq!(row.trials, 16);
            assert!(row.theory_slope > 0.0);
        }
    }

    #[test]
    fn aggregates_match_trial_log_recomputation() {
        let config = small_config(40);
        let result = run_experiment(&config, None).unwrap();
        let cells = result.rows.len();
        for (cell, row) in result.rows.iter().enumerate() {
            let mut delays = Vec::new();
            let mut false_alarms = 0u64;
            let mut censored = 0u64;
            for record in &result.records {
                assert_eq!(record.outcomes.len(), cells);
                let outcome = &record.outcomes[cell];
                if outcome.censored {
                    censored += 1;
                } else if outcome.false_alarm {
                    false_alarms += 1;
                    assert_eq!(outcome.delay, 0);
                } else {
                    delays.push(outcome.delay as f64);
                }
            }
            assert_eq!(row.false_alarms, false_alarms);
            assert_eq!(row.censored, censored);
            assert_eq!(row.completed as usize, delays.len());
            let mean = delays.iter().sum::<f64>() / delays.len() as f64;
            assert!((row.mean_cond_delay - mean).abs() < 1e-12);
            assert!((row.slope - mean / row.alpha.ln().abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_trials_yield_header_only_csv() {
        let config = small_config(0);
        let result = run_experiment(&config, Some(1)).unwrap();
        assert!(result.rows.is_empty());
        let mut csv = Vec::new();
        emit_csv(&result.rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text, format!("{AGGREGATE_HEADER}\n"));
    }

    #[test]
    fn csv_round_trips_and_neg_log_alpha_is_exact() {
        let config = small_config(12);
        let result = run_experiment(&config, Some(1)).unwrap();
        let mut buf = Vec::new();
        emit_csv(&result.rows, &mut buf).unwrap();
        let mut reader = csv::Reader::from_reader(buf.as_slice());
        let headers = reader.headers().unwrap().clone();
        assert_eq!(
            headers.iter().collect::<Vec<_>>().join(","),
            AGGREGATE_HEADER
        );
        let mut count = 0;
        for (record, row) in reader.records().map(|r| r.unwrap()).zip(&result.rows) {
            count += 1;
            assert_eq!(&record[0], row.functional.as_str());
            assert_eq!(&record[1], row.rule.to_string().as_str());
            let alpha: f64 = record[2].parse().unwrap();
            assert_eq!(alpha, row.alpha, "alpha column must round-trip exactly");
            let neg_log: f64 = record[3].parse().unwrap();
            assert!((neg_log - (-row.alpha.ln())).abs() < 1e-9);
            let trials: u64 = record[4].parse().unwrap();
            assert_eq!(trials, row.trials);
            let fa: f64 = record[7].parse().unwrap();
            assert!((fa - row.false_alarm_rate).abs() <= 1e-6 * fa.abs().max(1.0));
        }
        assert_eq!(count, result.rows.len());
    }

    #[test]
    fn six_significant_digit_formatting() {
        assert_eq!(format_stat(0.0), "0");
        assert_eq!(format_stat(-0.0), "0");
        assert_eq!(format_stat(2.302585092994046), "2.30259");
        assert_eq!(format_stat(1234.56789), "1234.57");
        assert_eq!(format_stat(0.000123456789), "0.000123457");
        assert_eq!(format_stat(-7.5), "-7.5");
        assert_eq!(format_stat(123456789.0), "123457000");
        assert_eq!(format_stat(f64::NAN), "NaN");
        assert_eq!(format_stat(0.1), "0.1");
    }

    #[test]
    fn trial_log_format() {
        let config = small_config(3);
        let result = run_experiment(&config, Some(1)).unwrap();
        let mut buf = Vec::new();
        emit_trial_log(&config, &result, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "functional,rule,alpha,trial,lambda_star,tau,phi,delay,false_alarm,censored"
        );
        // 3 trials x 8 cells.
        assert_eq!(lines.count(), 24);
        let second = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = second.split(',').collect();
        assert_eq!(fields.len(), 10);
        assert_eq!(fields[0], "center");
        assert_eq!(fields[1], "MP");
        assert_eq!(fields[3], "0");
        assert_eq!(fields[4].split(';').count(), 4);
    }
}
