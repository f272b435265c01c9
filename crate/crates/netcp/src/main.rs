//! Command-line front end: simulate, posterior, theory, validate.

use clap::{Parser, Subcommand};
use netcp::config::{parse_config, subset_display, NMaxPolicy};
use netcp::detection::{DetectionSession, Rule, StoppingRuleSpec};
use netcp::experiment::{emit_csv, emit_trial_log, run_experiment, write_summary};
use netcp::model::{sample_change_points, sample_step};
use netcp::oracle::DEFAULT_CELL_BUDGET;
use netcp::rng::trial_rng;
use netcp::theory::InformationSummary;
use netcp::validate::run_validation;
use std::error::Error;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "netcp",
    version,
    about = "Sequential change detection on sensor networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded Monte Carlo grid and write the aggregate CSV.
    Simulate {
        /// Experiment description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Aggregate CSV destination; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; results are identical for any value.
        #[arg(long)]
        threads: Option<usize>,
        /// Optional per-trial audit log (CSV).
        #[arg(long)]
        trial_log: Option<PathBuf>,
    },
    /// Print one seeded trial's posterior trajectory as CSV (n,gamma,stopped).
    Posterior {
        /// Experiment description (TOML); supplies the model and horizon cap.
        #[arg(long)]
        config: PathBuf,
        /// Monitored nodes, 1-based, comma-separated (e.g. "1,2").
        #[arg(long)]
        subset: String,
        /// False-alarm budget in (0,1); the rule stops at gamma >= 1 - alpha.
        #[arg(long)]
        alpha: f64,
        /// Trial seed.
        #[arg(long)]
        seed: u64,
    },
    /// Print information constants and predicted delay slopes.
    Theory {
        /// Experiment description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Extra subsets (1-based, comma-separated), on top of the config's
        /// functionals. Repeatable.
        #[arg(long)]
        subset: Vec<String>,
    },
    /// Run the randomized self-check suite (enumeration vs message passing).
    Validate {
        /// Cell budget for brute-force enumeration.
        #[arg(long, default_value_t = DEFAULT_CELL_BUDGET)]
        budget: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprint!("error: {e}");
            let mut source = e.source();
            while let Some(cause) = source {
                eprint!(": {cause}");
                source = cause.source();
            }
            eprintln!();
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Box<dyn Error>> {
    match command {
        Command::Simulate {
            config,
            out,
            threads,
            trial_log,
        } => simulate(&config, out, threads, trial_log),
        Command::Posterior {
            config,
            subset,
            alpha,
            seed,
        } => posterior(&config, &subset, alpha, seed),
        Command::Theory { config, subset } => theory(&config, &subset),
        Command::Validate { budget } => validate(budget),
    }
}

fn simulate(
    config_path: &PathBuf,
    out: Option<PathBuf>,
    threads: Option<usize>,
    trial_log: Option<PathBuf>,
) -> Result<ExitCode, Box<dyn Error>> {
    let config = parse_config(config_path)?;
    print!("{config}");
    let out = out
        .or_else(|| config.output.clone())
        .ok_or("no output path: pass --out or set experiment.output in the config")?;

    let result = run_experiment(&config, threads)?;

    let file = std::fs::File::create(&out)
        .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    emit_csv(&result.rows, std::io::BufWriter::new(file))?;
    println!("wrote {} rows to {}", result.rows.len(), out.display());

    if let Some(log_path) = trial_log {
        let file = std::fs::File::create(&log_path)
            .map_err(|e| format!("cannot write {}: {e}", log_path.display()))?;
        emit_trial_log(&config, &result, std::io::BufWriter::new(file))?;
        println!("wrote per-trial log to {}", log_path.display());
    }

    if !result.rows.is_empty() {
        println!();
        write_summary(&result.rows, std::io::stdout().lock())?;
    }

    let censored = result.total_censored();
    if censored > 0 {
        eprintln!(
            "WARNING: {censored} censored trial outcome(s) hit the horizon cap; \
             delay statistics for the affected rows are biased low. \
             Raise experiment.n_max before quoting them."
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn posterior(
    config_path: &PathBuf,
    subset_arg: &str,
    alpha: f64,
    seed: u64,
) -> Result<ExitCode, Box<dyn Error>> {
    let config = parse_config(config_path)?;
    // The trajectory CSV owns stdout; the resolved echo goes to stderr.
    eprint!("{config}");
    let subset = parse_subset_arg(subset_arg, config.model.node_count())?;
    let spec = StoppingRuleSpec {
        subset: subset.clone(),
        alpha,
        rule: Rule::Mp,
        n_max: match config.n_max {
            NMaxPolicy::Fixed(cap) => Some(cap),
            NMaxPolicy::Auto => None,
        },
    };
    let mut session = DetectionSession::new(&config.model, &spec)?;
    let mut rng = trial_rng(seed, 0);
    let assignment = sample_change_points(&config.model, &mut rng);
    let mut t = 0u64;
    while !session.terminal() {
        t += 1;
        let step = sample_step(&config.model, &assignment, t, &mut rng);
        session.advance(std::slice::from_ref(&step))?;
    }
    let status = session.status();

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "n,gamma,stopped")?;
    for (i, gamma) in session.gamma_trace().iter().enumerate() {
        let n = (i + 1) as u64;
        writeln!(
            w,
            "{},{},{}",
            n,
            gamma,
            u8::from(status.stop_time == Some(n))
        )?;
    }
    drop(w);

    let phi = assignment.subset_min(&subset);
    match status.stop_time {
        Some(tau) => eprintln!(
            "stopped at n={tau} with gamma={} (true change of {} at {phi})",
            status.posterior_at_stop.expect("stopped sessions carry the crossing value"),
            subset_display(&subset),
        ),
        None => eprintln!(
            "censored at the horizon cap of {} steps (true change of {} at {phi})",
            status.horizon,
            subset_display(&subset),
        ),
    }
    Ok(ExitCode::SUCCESS)
}

fn theory(config_path: &PathBuf, extra: &[String]) -> Result<ExitCode, Box<dyn Error>> {
    let config = parse_config(config_path)?;
    let mut entries: Vec<(String, Vec<usize>)> = config
        .functionals
        .iter()
        .map(|f| (f.label.clone(), f.subset.clone()))
        .collect();
    for arg in extra {
        let subset = parse_subset_arg(arg, config.model.node_count())?;
        let label = subset_display(&subset);
        if !entries.iter().any(|(l, _)| *l == label) {
            entries.push((label, subset));
        }
    }
    let summary = InformationSummary::compute(&config.model, &entries)?;
    print!("{summary}");
    println!();
    summary.write_csv(std::io::stdout().lock())?;
    Ok(ExitCode::SUCCESS)
}

fn validate(budget: u64) -> Result<ExitCode, Box<dyn Error>> {
    let report = run_validation(budget);
    report.write(std::io::stdout().lock())?;
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// "2,4" (1-based labels) -> vec![1, 3] (0-based indices).
fn parse_subset_arg(arg: &str, node_count: usize) -> Result<Vec<usize>, String> {
    let mut subset = Vec::new();
    for piece in arg.split(',') {
        let piece = piece.trim();
        let label: usize = piece
            .parse()
            .map_err(|_| format!("--subset: \"{piece}\" is not a node label"))?;
        if label == 0 || label > node_count {
            return Err(format!(
                "--subset: node label {label} outside 1..={node_count}"
            ));
        }
        subset.push(label - 1);
    }
    if subset.is_empty() {
        return Err("--subset: at least one node label is required".to_string());
    }
    Ok(subset)
}
