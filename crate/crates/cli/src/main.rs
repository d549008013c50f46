use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use gaitguide::harness::{
    apply_override, emit_artifacts, metrics_from_trace, parse_scenario, parse_seed_range, run_batch, run_scenario,
    seed_sweep, steer_suite, BatchReport, BatchRun, HarnessError, RunOutcome, ScenarioConfig, ScenarioKind, Trace,
    WalkerKind,
};

#[derive(Parser)]
#[command(name = "gaitguide", version, about = "Run, batch, replay and summarize guidance scenarios")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "GAITGUIDE_OUT", default_value = "gaitguide-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// `section.key=value`, applied after the file; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a scenario over a seed range and check the acceptance rules.
    Batch {
        scenario: PathBuf,
        /// `A..B` (B excluded) or `A..=B`.
        #[arg(long)]
        seeds: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Walkers to run; defaults to the one in the file. Repeatable.
        #[arg(long = "walker")]
        walkers: Vec<String>,
        /// For SteerToAngle, run every target of the steering suite.
        #[arg(long)]
        suite: bool,
        /// Also write every run's artifacts under `<out>/runs/`.
        #[arg(long)]
        artifacts: bool,
    },
    /// Rescore a trace and rerun its scenario to confirm it reproduces.
    Replay { trace: PathBuf },
    /// Summarize every trace found under a directory.
    Report { dir: PathBuf },
}

fn load(path: &Path, seed: Option<u64>, overrides: &[String]) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse_scenario(&text).with_context(|| path.display().to_string())?;
    for o in overrides {
        apply_override(&mut cfg, o)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run_id(cfg: &ScenarioConfig) -> String {
    format!("{}-{}-s{}", cfg.name, cfg.walker.name().to_lowercase(), cfg.seed)
}

/// Runs `cfg`; a run that hits its cap still yields its outcome.
fn outcome_of(cfg: &ScenarioConfig) -> Result<(RunOutcome, bool)> {
    match run_scenario(cfg) {
        Ok(o) => Ok((o, false)),
        Err(HarnessError::TimedOut(o)) => Ok((*o, true)),
        Err(e) => Err(e.into()),
    }
}

fn cmd_run(out: &Path, scenario: &Path, seed: Option<u64>, overrides: &[String]) -> Result<ExitCode> {
    let cfg = load(scenario, seed, overrides)?;
    let (outcome, timed_out) = outcome_of(&cfg)?;
    let dir = out.join(run_id(&cfg));
    emit_artifacts(&outcome, &dir)?;
    print!("{}", outcome.metrics.to_text());
    println!("artifacts: {}", dir.display());
    if timed_out {
        eprintln!("run reached its duration cap of {} s", cfg.duration_cap);
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn print_acceptance(report: &BatchReport) -> bool {
    let mut all = true;
    for (rule, pass, detail) in report.acceptance() {
        println!("{} {rule}: {detail}", if pass { "PASS" } else { "FAIL" });
        all &= pass;
    }
    all
}

fn cmd_batch(
    out: &Path,
    scenario: &Path,
    seeds: &str,
    overrides: &[String],
    walkers: &[String],
    suite: bool,
    artifacts: bool,
) -> Result<ExitCode> {
    let base = load(scenario, None, overrides)?;
    let range = parse_seed_range(seeds).ok_or_else(|| anyhow!("bad seed range '{seeds}', expected A..B"))?;
    let walkers = if walkers.is_empty() {
        vec![base.walker]
    } else {
        walkers
            .iter()
            .map(|w| WalkerKind::from_name(w).ok_or_else(|| anyhow!("unknown walker '{w}'")))
            .collect::<Result<_>>()?
    };
    let mut cfgs = Vec::new();
    for w in walkers {
        let c = base.with_walker(w);
        if suite && c.kind == ScenarioKind::SteerToAngle {
            cfgs.extend(steer_suite(&c, range.clone()));
        } else {
            cfgs.extend(seed_sweep(&c, range.clone()));
        }
    }
    let report = run_batch(&cfgs);
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    fs::write(out.join("runs.csv"), report.runs_csv())?;
    fs::write(out.join("summary.csv"), report.summary_csv())?;
    if artifacts {
        for (i, cfg) in cfgs.iter().enumerate() {
            let (outcome, _) = outcome_of(cfg)?;
            emit_artifacts(&outcome, &out.join("runs").join(format!("{i:04}-{}", run_id(cfg))))?;
        }
    }
    print!("{}", report.table());
    let pass = print_acceptance(&report);
    println!("wrote {}", out.display());
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn read_trace(path: &Path) -> Result<Trace> {
    let f = fs::File::open(path).with_context(|| path.display().to_string())?;
    Trace::from_csv(BufReader::new(f)).with_context(|| path.display().to_string())
}

fn cmd_replay(trace_path: &Path) -> Result<ExitCode> {
    let trace = read_trace(trace_path)?;
    let metrics = metrics_from_trace(&trace);
    print!("{}", metrics.to_text());
    let dir = trace_path.parent().unwrap_or(Path::new("."));
    let mut ok = true;

    let saved = dir.join("metrics.txt");
    if saved.exists() {
        let same = fs::read_to_string(&saved)? == metrics.to_text();
        println!("metrics.txt: {}", if same { "matches" } else { "DIFFERS" });
        ok &= same;
    }

    let scn = dir.join("scenario.scn");
    if scn.exists() {
        let cfg = load(&scn, None, &[])?;
        let (outcome, _) = outcome_of(&cfg)?;
        let fresh = outcome.trace.to_csv();
        let original = fs::read_to_string(trace_path)?;
        match fresh.lines().zip(original.lines()).position(|(a, b)| a != b) {
            None if fresh.len() == original.len() => println!("rerun: byte-identical trace"),
            None => {
                println!("rerun: trace lengths differ");
                ok = false;
            }
            Some(i) => {
                println!("rerun: trace differs at line {}", i + 1);
                ok = false;
            }
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn find_traces(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir).with_context(|| dir.display().to_string())?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            find_traces(&p, found)?;
        } else if p.file_name().map_or(false, |n| n == "trace.csv") {
            found.push(p);
        }
    }
    Ok(())
}

fn cmd_report(out: &Path, dir: &Path) -> Result<ExitCode> {
    let mut traces = Vec::new();
    find_traces(dir, &mut traces)?;
    if traces.is_empty() {
        bail!("no trace.csv files under {}", dir.display());
    }
    let mut runs = Vec::new();
    for (index, path) in traces.iter().enumerate() {
        let trace = read_trace(path)?;
        let m = metrics_from_trace(&trace);
        let last_t = trace.rows.last().map_or(0.0, |r| r.t);
        let meta = &trace.meta;
        runs.push(BatchRun {
            index,
            name: meta.scenario.clone(),
            kind: meta.kind,
            walker: meta.walker,
            seed: meta.seed,
            timed_out: !meta.kind.is_heading_task() && last_t >= meta.duration_cap - 0.5 * meta.dt,
            result: Ok(m),
        });
    }
    let report = BatchReport { runs };
    print!("{}", report.table());
    print_acceptance(&report);
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    fs::write(out.join("report.csv"), report.summary_csv())?;
    println!("{} traces; wrote {}", traces.len(), out.join("report.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, seed, overrides } => cmd_run(&cli.out, scenario, *seed, overrides),
        Command::Batch { scenario, seeds, overrides, walkers, suite, artifacts } => {
            cmd_batch(&cli.out, scenario, seeds, overrides, walkers, *suite, *artifacts)
        }
        Command::Replay { trace } => cmd_replay(trace),
        Command::Report { dir } => cmd_report(&cli.out, dir),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
