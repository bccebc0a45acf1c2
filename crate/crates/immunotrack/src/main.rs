//! Command-line front end.
//!
//! Subcommands: `run`, `evaluate`, `forecast`, `inspect`, `gen-synthetic`.
//! Configuration comes from an optional flat config file, `--set key=value`
//! overrides, then the dedicated flags; `IMMUNOTRACK_SEED` is the
//! lowest-priority seed source. All file outputs are written atomically.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use immunotrack::config::{parse_config, ConfigError, RunConfig};
use immunotrack::forecast::{evaluate, forecast, run_online};
use immunotrack::ingest::{load_series, synth_series, to_movements, PriceSeries};
use immunotrack::affinity::scale_for;
use immunotrack::report::{build_report, load_report, to_json, write_atomic};

#[derive(Parser)]
#[command(
    name = "immunotrack",
    about = "Immune-inspired trend tracking and forecasting for price series",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key=value config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Input CSV (header `label,price`).
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,

    /// Output file (JSON report, forecast, or CSV).
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Master RNG seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Forecast horizon in periods.
    #[arg(long, global = true, value_name = "N")]
    horizon: Option<usize>,

    /// Override any config key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the online loop and write the full artifact report.
    Run,
    /// Walk-forward evaluation against the baselines.
    Evaluate,
    /// Forecast ahead from a saved run artifact plus recent data.
    Forecast {
        /// Saved report from `run` or `evaluate`.
        artifact: PathBuf,
    },
    /// Print pool / sequence / pattern summaries from a saved artifact.
    Inspect {
        /// Saved report from `run` or `evaluate`.
        artifact: PathBuf,
    },
    /// Write a synthetic CSV from the synth_* config keys.
    #[command(name = "gen-synthetic")]
    GenSynthetic,
}

fn main() -> ExitCode {
    // Die quietly when a pager closes the pipe instead of panicking.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn env_seed() -> Result<Option<u64>, immunotrack::Error> {
    match std::env::var("IMMUNOTRACK_SEED") {
        Ok(raw) => {
            let seed = raw.parse::<u64>().map_err(|e| ConfigError::BadValue {
                key: "IMMUNOTRACK_SEED".into(),
                reason: format!("'{raw}': {e}"),
            })?;
            Ok(Some(seed))
        }
        Err(_) => Ok(None),
    }
}

/// Fold the dedicated flags into `--set`-style overrides, after the
/// explicit ones so flags win.
fn collected_overrides(cli: &Cli) -> Vec<String> {
    let mut overrides = cli.set.clone();
    if let Some(path) = &cli.input {
        overrides.push(format!("input={}", path.display()));
    }
    if let Some(path) = &cli.output {
        overrides.push(format!("output={}", path.display()));
    }
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(horizon) = cli.horizon {
        overrides.push(format!("horizon={horizon}"));
    }
    overrides
}

fn read_text(path: &Path) -> Result<String, immunotrack::Error> {
    std::fs::read_to_string(path).map_err(|e| {
        ConfigError::BadValue {
            key: "input".into(),
            reason: format!("{}: {e}", path.display()),
        }
        .into()
    })
}

fn effective_config(cli: &Cli) -> Result<RunConfig, immunotrack::Error> {
    let file_text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| ConfigError::BadValue {
            key: "config".into(),
            reason: format!("{}: {e}", path.display()),
        })?,
        None => String::new(),
    };
    Ok(parse_config(&file_text, &collected_overrides(cli), env_seed()?)?)
}

fn load_input(config: &RunConfig) -> Result<PriceSeries, immunotrack::Error> {
    if let Some(path) = &config.input {
        let text = read_text(Path::new(path))?;
        return Ok(load_series(&text)?);
    }
    if let Some(spec) = config.synth_spec() {
        return Ok(synth_series(&spec, config.seed)?);
    }
    Err(ConfigError::BadValue {
        key: "input".into(),
        reason: "no input path or synth_kind configured".into(),
    }
    .into())
}

fn required_output(config: &RunConfig) -> Result<PathBuf, immunotrack::Error> {
    config.output.as_ref().map(PathBuf::from).ok_or_else(|| {
        ConfigError::BadValue {
            key: "output".into(),
            reason: "required for this command (use --output)".into(),
        }
        .into()
    })
}

fn dispatch(cli: Cli) -> Result<(), immunotrack::Error> {
    match &cli.command {
        Command::Run => {
            let config = effective_config(&cli)?;
            let out = required_output(&config)?;
            let series = load_input(&config)?;
            let artifacts = run_online(&series, &config)?;
            let report = build_report(&config, &artifacts.resolved, None, &artifacts, true);
            write_atomic(&out, &to_json(&report)?)?;
            println!(
                "wrote {} (generations={}, sequence entries={}, patterns={})",
                out.display(),
                artifacts.reports.len(),
                artifacts.sequence.entries.len(),
                artifacts.sequence.patterns.len()
            );
            Ok(())
        }
        Command::Evaluate => {
            let config = effective_config(&cli)?;
            let out = required_output(&config)?;
            let series = load_input(&config)?;
            let (eval, artifacts) = evaluate(&series, &config)?;
            let report = build_report(&config, &artifacts.resolved, Some(&eval), &artifacts, false);
            write_atomic(&out, &to_json(&report)?)?;
            println!(
                "wrote {} (steps={}, tracker dir_acc={:.4}, persistence dir_acc={:.4})",
                out.display(),
                eval.steps,
                eval.tracker.dir_acc,
                eval.persistence.dir_acc
            );
            Ok(())
        }
        Command::Forecast { artifact } => {
            let saved = load_report(artifact)?;
            // The artifact's config acts as the base; its io fields describe
            // the original run, not this invocation, so they are dropped
            // before the CLI overrides land.
            let mut config = saved.config.clone();
            config.input = None;
            config.output = None;
            config.synth_kind = None;
            immunotrack::config::apply_overrides(&mut config, &collected_overrides(&cli))?;
            let series = load_input(&config)?;
            let movements = to_movements(&series);
            let scale = scale_for(&movements, config.scale());
            let sequence = saved.sequence_view();
            let fc = forecast(
                &sequence,
                &movements,
                config.horizon,
                config.forecast_threshold,
                scale,
            );
            let json = to_json(&fc)?;
            match &config.output {
                Some(path) => {
                    let path = PathBuf::from(path);
                    write_atomic(&path, &json)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{json}"),
            }
            Ok(())
        }
        Command::Inspect { artifact } => {
            let saved = load_report(artifact)?;
            print_inspection(&saved);
            Ok(())
        }
        Command::GenSynthetic => {
            let config = effective_config(&cli)?;
            let out = required_output(&config)?;
            let spec = config.synth_spec().ok_or_else(|| ConfigError::BadValue {
                key: "synth_kind".into(),
                reason: "required for gen-synthetic".into(),
            })?;
            let series = synth_series(&spec, config.seed)?;
            write_atomic(&out, &series.to_csv())?;
            println!("wrote {} ({} rows)", out.display(), series.len());
            Ok(())
        }
    }
}

fn print_inspection(report: &immunotrack::report::Report) {
    let c = &report.config;
    println!(
        "config: seed={} pool_cap={} window={} lengths=[{},{}] bind_threshold={} warmup={}",
        c.seed, c.pool_cap, c.window, c.len_min, c.len_max, c.bind_threshold, c.warmup
    );

    let pool = &report.pool_summary;
    let histogram: Vec<String> = pool
        .length_histogram
        .iter()
        .map(|(len, count)| format!("{len}:{count}"))
        .collect();
    println!("pool: size={} length histogram {{{}}}", pool.size, histogram.join(", "));
    for t in pool.top_by_stimulation.iter().take(5) {
        println!(
            "  tracker id={} lineage={} len={} stimulation={} misses={} born={}",
            t.id,
            t.lineage_id,
            t.movements.len(),
            t.stimulation,
            t.consecutive_misses,
            t.birth_generation
        );
    }

    match (report.sequence.first(), report.sequence.last()) {
        (Some(first), Some(last)) => {
            println!(
                "sequence: {} entries over generations [{}, {}]",
                report.sequence.len(),
                first.start,
                last.end
            );
            for e in report.sequence.iter().rev().take(3) {
                println!(
                    "  [{}..{}] signature {:?} dominance {}",
                    e.start, e.end, e.signature.0, e.dominance
                );
            }
        }
        _ => println!("sequence: empty"),
    }

    println!("patterns: {}", report.patterns.len());
    for p in report.patterns.iter().take(5) {
        let sigs: Vec<String> = p.signature_tuples.iter().map(|s| format!("{:?}", s.0)).collect();
        println!("  len={} x{} at {:?}: {}", p.signature_tuples.len(), p.count, p.starts, sigs.join(" "));
    }

    if let Some(m) = &report.metrics {
        println!("metrics over {} steps:", m.steps);
        for (name, e) in [
            ("tracker", &m.tracker),
            ("persistence", &m.persistence),
            ("drift", &m.drift),
            ("last_movement", &m.last_movement),
        ] {
            println!(
                "  {name}: mae={:.6} rmse={:.6} dir_acc={:.4}",
                e.mae, e.rmse, e.dir_acc
            );
        }
    }

    if let Some(forecasts) = &report.forecasts {
        if let Some(last) = forecasts.last() {
            println!(
                "latest forecast at t={}: predicted {:?} confidence {:?}",
                last.anchor, last.predicted, last.confidence
            );
        }
    }
}
