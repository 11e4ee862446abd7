use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use varexplore::harness::{
    atari_game, atari_table, compare, normalized_score, read_csv, run_experiment, write_reports,
    ExperimentSpec, METHODS,
};
use varexplore::par::Execution;
use varexplore::stats::{mean, quantile};
use varexplore::varcore::{
    read_returns_csv, replay_sequence, write_trajectory_csv, ReturnSequence,
};
use varexplore::{Error, Result};

/// Variance-estimation exploration experiments.
#[derive(Parser)]
#[command(name = "varexplore", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded experiment and write its evaluation reports as CSV.
    Run(RunArgs),
    /// Replay a return sequence through the sigma recurrence.
    ReplaySigma(ReplayArgs),
    /// Human-normalized Atari scores.
    Score(ScoreArgs),
    /// Line up report CSVs and compute episodes-to-threshold statistics.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Run seeds one after another on the calling thread.
    #[arg(long)]
    sequential: bool,
    /// `key=value` settings applied after the config file.
    overrides: Vec<String>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    alpha: f64,
    /// One return per line, optional header (stdin when omitted).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Game from the bundled raw-score table.
    #[arg(long, conflicts_with_all = ["random", "human", "summary"])]
    game: Option<String>,
    /// Restrict `--game` output to one method (ddqn, vdqn, tddqn).
    #[arg(long, requires = "game")]
    method: Option<String>,
    /// Raw agent score; with `--game` it replaces the table's method scores.
    #[arg(long, allow_hyphen_values = true)]
    agent: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires_all = ["human", "agent"])]
    random: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires_all = ["random", "agent"])]
    human: Option<f64>,
    /// Median and mean normalized score of every method over all games.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value_t = 450.0)]
    threshold: f64,
    /// Report CSVs as `name=path` or bare paths (named by file stem); the
    /// first is the reference.
    #[arg(required = true, num_args = 2..)]
    runs: Vec<String>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::io(p, e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(args: RunArgs) -> Result<()> {
    let spec = match &args.config {
        Some(path) => {
            let f = File::open(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentSpec::parse(BufReader::new(f))?.with_overrides(&args.overrides)?
        }
        None => ExperimentSpec::from_pairs(
            args.overrides
                .iter()
                .map(|o| {
                    o.split_once('=')
                        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                        .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))
                })
                .collect::<Result<Vec<_>>>()?,
        )?,
    };
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let reports = run_experiment(&spec, exec)?;
    let out = args.out.as_deref();
    write_reports(output(out)?, &reports)
        .map_err(|e| Error::io(out.unwrap_or(Path::new("<stdout>")), e))
}

fn replay_sigma(args: ReplayArgs) -> Result<()> {
    let returns = match &args.input {
        Some(p) => read_returns_csv(BufReader::new(File::open(p).map_err(|e| Error::io(p, e))?))?,
        None => read_returns_csv(io::stdin().lock())?,
    };
    let traj = replay_sequence(&ReturnSequence::new(returns, args.alpha)?)?;
    let out = args.out.as_deref();
    write_trajectory_csv(output(out)?, &traj)
        .map_err(|e| Error::io(out.unwrap_or(Path::new("<stdout>")), e))
}

fn score(args: ScoreArgs) -> Result<()> {
    let mut out = output(None)?;
    let mut emit = |line: String| writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e));
    if args.summary {
        emit("method,median,mean".into())?;
        let table = atari_table();
        for m in METHODS {
            let mut scores = table
                .iter()
                .map(|r| normalized_score(r.method(m).expect("known method"), r.random, r.human))
                .collect::<Result<Vec<_>>>()?;
            scores.sort_by(f64::total_cmp);
            emit(format!(
                "{m},{:.0}%,{:.0}%",
                quantile(&scores, 0.5),
                mean(&scores)
            ))?;
        }
        return Ok(());
    }
    if let Some(game) = &args.game {
        let row =
            atari_game(game).ok_or_else(|| Error::Config(format!("unknown game `{game}`")))?;
        let methods: Vec<(String, f64)> = match (args.agent, &args.method) {
            (Some(a), _) => vec![("agent".into(), a)],
            (None, Some(m)) => {
                let raw = row
                    .method(m)
                    .ok_or_else(|| Error::Config(format!("unknown method `{m}`")))?;
                vec![(m.clone(), raw)]
            }
            (None, None) => METHODS
                .iter()
                .map(|m| (m.to_string(), row.method(m).unwrap()))
                .collect(),
        };
        emit("game,method,raw,normalized".into())?;
        for (name, raw) in methods {
            let s = normalized_score(raw, row.random, row.human)?;
            emit(format!("{},{name},{raw},{:.0}%", row.game, s))?;
        }
        return Ok(());
    }
    match (args.agent, args.random, args.human) {
        (Some(a), Some(r), Some(h)) => emit(format!("{:.0}%", normalized_score(a, r, h)?)),
        _ => Err(Error::Config(
            "score needs --game, --summary, or --agent with --random and --human".into(),
        )),
    }
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let mut runs = Vec::with_capacity(args.runs.len());
    for r in &args.runs {
        let (name, path) = match r.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(r);
                let stem = p
                    .file_stem()
                    .map_or_else(|| r.clone(), |s| s.to_string_lossy().into_owned());
                (stem, p)
            }
        };
        runs.push((name, read_csv(&path)?));
    }
    let table = compare(&runs, args.threshold)?;
    let mut out = output(None)?;
    write!(out, "{table}")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::ReplaySigma(a) => replay_sigma(a),
        Command::Score(a) => score(a),
        Command::Compare(a) => compare_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
