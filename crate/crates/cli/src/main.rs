use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use e2r::engine::{run, RunOutput, Strategy};
use e2r::error::Error;
use e2r::io::{self, Repertoire, SvgFrames};
use e2r::metrics::{aggregate_runs, approach_coverage, grasp_coverage, CoverageGrid, SurfaceDiscretization};
use e2r::model::{validate_config, Individual, RunConfig, Trajectory};
use e2r::env::{rollout, EnvConfig};
use rayon::prelude::*;

const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_VERIFY: u8 = 5;
const EXIT_INPUT: u8 = 6;

#[derive(Parser)]
#[command(name = "e2r", version, about = "Grasp repertoire generation with novelty search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy with one seed.
    Run(RunArgs),
    /// Run every strategy/seed pair and aggregate the results.
    Batch(BatchArgs),
    /// Re-simulate one repertoire entry and write its trace.
    Replay(ReplayArgs),
    /// Recompute coverage metrics by replaying a repertoire.
    Metrics(MetricsArgs),
    /// Print the default configuration as TOML.
    Config,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "e2r")]
    strategy: Strategy,
    #[arg(long)]
    seed: Option<u64>,
    /// Rollout budget override.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for rollouts.
    #[arg(long)]
    threads: Option<usize>,
    /// Record elapsed seconds in the metrics file.
    #[arg(long)]
    wall_time: bool,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated strategies.
    #[arg(long, value_delimiter = ',', default_value = "e2r,ns,random,multibd")]
    strategies: Vec<Strategy>,
    /// Comma-separated seeds or inclusive ranges, e.g. `1-5,9`.
    #[arg(long, default_value = "1-5")]
    seeds: String,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    repertoire: PathBuf,
    /// Zero-based position in the repertoire.
    #[arg(long, conflicts_with = "id", required_unless_present = "id")]
    index: Option<usize>,
    /// Individual id.
    #[arg(long)]
    id: Option<u64>,
    /// Run configuration whose environment must match the repertoire's.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fail when the replayed outcome differs from the stored one.
    #[arg(long)]
    verify: bool,
    /// Also render SVG frames.
    #[arg(long)]
    svg: bool,
    #[arg(long, default_value_t = 10)]
    frame_stride: usize,
    /// Output directory for the trace and frames.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    repertoire: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Metrics file to write; defaults next to the repertoire.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidConfig(_) | Error::ConfigHashMismatch { .. } => EXIT_CONFIG,
            Error::Parse { path, .. } if path.extension().is_some_and(|x| x == "toml") => EXIT_CONFIG,
            Error::Io { .. } => EXIT_IO,
            _ => EXIT_INPUT,
        };
        let message = match &e {
            Error::InvalidConfig(v) => format!("invalid configuration:\n  {}", v.join("\n  ")),
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

type CmdResult = Result<(), Failure>;

fn load(config: Option<&Path>) -> Result<RunConfig, Failure> {
    match config {
        Some(p) => Ok(io::load_config(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn check(cfg: &RunConfig) -> CmdResult {
    Ok(validate_config(cfg).into_result()?)
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn write_run(out: &RunOutput, cfg: &RunConfig, dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    io::write_repertoire(&out.success_archive, &cfg.env, &cfg.metrics, dir.join("repertoire.jsonl"))?;
    io::write_metrics(&out.logs, dir.join("metrics.csv"))?;
    io::save_config(cfg, dir.join("config.toml"))?;
    Ok(())
}

fn summary(out: &RunOutput) -> String {
    let last = out.logs.last();
    format!(
        "generations={} rollouts={} successes={} approach_coverage={} grasp_coverage={}",
        out.logs.len(),
        last.map_or(0, |l| l.rollouts),
        out.success_archive.len(),
        last.map_or(0.0, |l| l.approach_coverage),
        last.map_or(0.0, |l| l.grasp_coverage),
    )
}

fn cmd_run(a: RunArgs) -> CmdResult {
    let mut cfg = load(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(b) = a.budget {
        cfg.budget = b;
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    cfg.record_wall_time |= a.wall_time;
    check(&cfg)?;
    let out = run(&cfg, a.strategy)?;
    write_run(&out, &cfg, &a.out)?;
    println!(
        "strategy={} seed={} {} out={}",
        a.strategy,
        cfg.seed,
        summary(&out),
        a.out.display()
    );
    Ok(())
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, Failure> {
    let bad = |s: &str| Failure::new(EXIT_INPUT, format!("invalid seed list entry `{s}`"));
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|_| bad(part))?;
                let hi: u64 = hi.trim().parse().map_err(|_| bad(part))?;
                if lo > hi {
                    return Err(bad(part));
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    if seeds.is_empty() {
        return Err(Failure::new(EXIT_INPUT, "empty seed list"));
    }
    Ok(seeds)
}

fn cmd_batch(a: BatchArgs) -> CmdResult {
    let mut base = load(a.config.as_deref())?;
    if let Some(b) = a.budget {
        base.budget = b;
    }
    base.threads = Some(1);
    check(&base)?;
    let seeds = parse_seeds(&a.seeds)?;
    let mut strategies = Vec::new();
    for s in a.strategies {
        if !strategies.contains(&s) {
            strategies.push(s);
        }
    }
    let pairs: Vec<(Strategy, u64)> = strategies
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&k| (s, k)))
        .collect();

    let results: Vec<Result<RunOutput, Failure>> = pairs
        .par_iter()
        .map(|&(strategy, seed)| {
            let cfg = RunConfig { seed, ..base.clone() };
            let out = run(&cfg, strategy)?;
            write_run(&out, &cfg, &a.out.join(format!("{strategy}_seed{seed}")))?;
            Ok(out)
        })
        .collect();

    let mut failed = 0;
    let mut table = String::from("strategy,rollouts,metric,n,mean,ci95\n");
    for &strategy in &strategies {
        let mut series = Vec::new();
        for (&(s, seed), res) in pairs.iter().zip(&results) {
            if s != strategy {
                continue;
            }
            match res {
                Ok(out) => {
                    println!("strategy={s} seed={seed} {}", summary(out));
                    series.push(out.logs.clone());
                }
                Err(f) => {
                    failed += 1;
                    eprintln!("error: strategy={s} seed={seed}: {}", f.message);
                }
            }
        }
        for row in aggregate_runs(&series) {
            let _ = writeln!(
                table,
                "{strategy},{},{},{},{},{}",
                row.rollouts,
                row.metric,
                row.n,
                row.mean,
                row.ci95.map_or(String::new(), |c| c.to_string())
            );
        }
    }
    let summary_path = a.out.join("summary.csv");
    fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    fs::write(&summary_path, table).map_err(|e| Error::Io {
        path: summary_path.clone(),
        source: e,
    })?;
    println!(
        "runs={} failed={failed} summary={}",
        pairs.len(),
        summary_path.display()
    );
    if failed > 0 {
        let code = results
            .iter()
            .filter_map(|r| r.as_ref().err().map(|f| f.code))
            .next()
            .unwrap_or(EXIT_IO);
        return Err(Failure::new(code, format!("{failed} of {} runs failed", pairs.len())));
    }
    Ok(())
}

/// Loads a repertoire and the environment to replay it in.
fn open_repertoire(path: &Path, config: Option<&Path>) -> Result<(Repertoire, EnvConfig), Failure> {
    let rep = io::read_repertoire(path)?;
    let env = match config {
        Some(c) => {
            let cfg = load(Some(c))?;
            rep.header.check_env(&cfg.env).map_err(|e| {
                Failure::new(
                    EXIT_CONFIG,
                    format!("refusing to replay {} under {}: {e}", path.display(), c.display()),
                )
            })?;
            cfg.env
        }
        None => {
            rep.header.check_env(&rep.header.env)?;
            rep.header.env.clone()
        }
    };
    Ok((rep, env))
}

fn select(rep: &Repertoire, index: Option<usize>, id: Option<u64>) -> Result<&Individual, Failure> {
    let entries = rep.archive.entries();
    if let Some(i) = index {
        return entries.get(i).ok_or_else(|| {
            let range = if entries.is_empty() {
                "the repertoire is empty".to_string()
            } else {
                format!("valid range is 0..={}", entries.len() - 1)
            };
            Failure::new(EXIT_INPUT, format!("index {i} out of range: {range}"))
        });
    }
    let id = id.expect("clap requires --index or --id");
    entries
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Failure::new(EXIT_INPUT, format!("no entry with id {id}")))
}

fn cmd_replay(a: ReplayArgs) -> CmdResult {
    let (rep, env) = open_repertoire(&a.repertoire, a.config.as_deref())?;
    let ind = select(&rep, a.index, a.id)?;
    let frames = a.svg.then(|| SvgFrames {
        dir: a.out.join("frames"),
        stride: a.frame_stride,
    });
    let trace = a.out.join("trace.csv");
    let traj = io::replay_trace(&ind.genome, &env, &trace, frames.as_ref())?;
    println!(
        "id={} success={} stored_success={} t_touch={} t_close={} rows={} trace={}",
        ind.id,
        traj.success,
        ind.success,
        fmt_opt(traj.t_touch),
        traj.t_close,
        traj.len(),
        trace.display()
    );
    if a.verify && traj.success != ind.success {
        return Err(Failure::new(
            EXIT_VERIFY,
            format!(
                "verification failed: entry {} replayed to success={} but was stored with success={}",
                ind.id, traj.success, ind.success
            ),
        ));
    }
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> CmdResult {
    let (rep, env) = open_repertoire(&a.repertoire, a.config.as_deref())?;
    let metrics_cfg = match &a.config {
        Some(c) => load(Some(c))?.metrics,
        None => rep.header.metrics.clone(),
    };
    let trajs: Vec<Trajectory> = rep
        .archive
        .entries()
        .par_iter()
        .map(|i| rollout(&i.genome, &env))
        .collect();
    let replayed = trajs.iter().filter(|t| t.success).count();
    let ac = approach_coverage(&trajs, &CoverageGrid::for_env(&env, &metrics_cfg));
    let gc = grasp_coverage(&trajs, &SurfaceDiscretization::for_env(&env, &metrics_cfg))?;
    let out = a.out.clone().unwrap_or_else(|| {
        a.repertoire
            .parent()
            .unwrap_or(Path::new("."))
            .join("replay_metrics.csv")
    });
    let table = format!(
        "entries,successes,approach_coverage,grasp_coverage\n{},{replayed},{ac},{gc}\n",
        trajs.len()
    );
    fs::write(&out, table).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let distinct: HashSet<Vec<u64>> = rep
        .archive
        .entries()
        .iter()
        .map(|i| i.genome.genes().iter().map(|g| g.to_bits()).collect())
        .collect();
    println!(
        "entries={} distinct={} successes={replayed} approach_coverage={ac} grasp_coverage={gc} out={}",
        trajs.len(),
        distinct.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Config => {
            print!("{}", io::config_to_toml(&RunConfig::default()));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
