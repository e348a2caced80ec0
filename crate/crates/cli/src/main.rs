//! `srcomp` command-line tool.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use srcomp::datagen::{generate, read_dataset, write_dataset, Difficulty, Task, TaskSpec};
use srcomp::engine::{GpConfig, ModelRecord, SelectionPolicy};
use srcomp::expr::parse;
use srcomp::harness::{
    fit_algorithm, realworld_candidates, run_qualification, run_synthetic, score_realworld, score_run,
    write_candidates, write_qualification, write_realworld, write_synthetic, AlgorithmSpec, Candidate, CandidateSet,
    HarnessError, RunOutcome, TrackConfig, TrackKind,
};
use srcomp::realworld::{chunk_split, prepare, read_ratings, SeriesFrame, TrustRating, DEFAULT_ALPHA};
use srcomp::scoring::{aggregate_track, records_csv, AggregateOptions, AggregationOrder, ScoreRecord};

#[derive(Parser)]
#[command(name = "srcomp", version, about = "Symbolic regression competition toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/test pair in PMLB format.
    Gen {
        #[arg(long)]
        task: String,
        #[arg(long)]
        difficulty: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write gzip-compressed files.
        #[arg(long)]
        gz: bool,
    },
    /// Fit one algorithm to a dataset and write the model record as JSON.
    Fit {
        #[arg(long)]
        dataset: PathBuf,
        /// Test split, used for reporting and test-based model selection.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Algo::Gp)]
        algo: Algo,
        /// GP settings as JSON (same fields as in a track config).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 60.0)]
        budget_seconds: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a model on a dataset and print (or write) a score record.
    Score {
        /// Model record JSON from `fit`, or an infix expression.
        #[arg(long)]
        model: String,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "model")]
        algorithm: String,
        #[arg(long, default_value_t = 0)]
        run: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate score records (JSON files) into a rank report.
    Rank {
        #[arg(long)]
        runs_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Order::MedianThenRank)]
        order: Order,
    },
    /// Real-world track helpers.
    Covid {
        #[command(subcommand)]
        action: Covid,
    },
    /// Run a whole track from a JSON config.
    Track {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Covid {
    /// Clean, smooth and featurize a daily series CSV into PMLB files.
    Prep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Record trust ratings for candidate models.
    Rate {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        rater: String,
        /// `model_id=rating` pairs; prompts on stdin for the rest.
        #[arg(long = "rating")]
        given: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Gp,
    Linear,
    Constant,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    MedianThenRank,
    RankThenMedian,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Quali,
    Synthetic,
    Realworld,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn other(message: impl ToString) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<srcomp::datagen::DataError> for Failure {
    fn from(e: srcomp::datagen::DataError) -> Self {
        HarnessError::from(e).into()
    }
}

impl From<srcomp::realworld::RealWorldError> for Failure {
    fn from(e: srcomp::realworld::RealWorldError) -> Self {
        HarnessError::from(e).into()
    }
}

impl From<srcomp::scoring::ScoreError> for Failure {
    fn from(e: srcomp::scoring::ScoreError) -> Self {
        HarnessError::from(e).into()
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| HarnessError::io(path, e).into()
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io(dir))?;
            }
            std::fs::write(p, text).map_err(io(p))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(task: &str, difficulty: &str, seed: u64, out: &Path, gz: bool) -> Result<(), Failure> {
    let task = Task::from_name(task).ok_or_else(|| Failure::config(format!("unknown task {task}")))?;
    let difficulty =
        Difficulty::from_name(difficulty).ok_or_else(|| Failure::config(format!("unknown difficulty {difficulty}")))?;
    let spec = TaskSpec::new(task, difficulty, seed).map_err(|e| Failure::config(e.to_string()))?;
    let (train, test) = generate(&spec)?;
    let ext = if gz { "tsv.gz" } else { "tsv" };
    for ds in [&train, &test] {
        let path = out.join(format!("{}.{ext}", ds.name));
        write_dataset(ds, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn algorithm_spec(algo: Algo, config: Option<&Path>) -> Result<AlgorithmSpec, Failure> {
    Ok(match algo {
        Algo::Gp => {
            let config: GpConfig = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(io(p))?;
                    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?
                }
                None => GpConfig::default(),
            };
            config.validate().map_err(|e| Failure::config(e.to_string()))?;
            AlgorithmSpec::Gp {
                config,
                selection: SelectionPolicy::default(),
            }
        }
        Algo::Linear => AlgorithmSpec::Linear,
        Algo::Constant => AlgorithmSpec::Constant { value: None },
        Algo::Oracle => AlgorithmSpec::Oracle,
    })
}

fn algo_name(algo: Algo) -> &'static str {
    match algo {
        Algo::Gp => "gp",
        Algo::Linear => "linear",
        Algo::Constant => "constant",
        Algo::Oracle => "oracle",
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    dataset: &Path,
    test: Option<&Path>,
    algo: Algo,
    config: Option<&Path>,
    budget: f64,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Failure::config(format!("budget must be positive, got {budget}")));
    }
    let spec = algorithm_spec(algo, config)?;
    let train = read_dataset(dataset)?;
    let test = test.map(read_dataset).transpose()?;
    let start = std::time::Instant::now();
    let expr = fit_algorithm(&spec, &train, test.as_ref(), seed, budget).map_err(Failure::other)?;
    let rec = ModelRecord::new(
        algo_name(algo),
        seed,
        &expr,
        &train,
        test.as_ref(),
        start.elapsed().as_secs_f64(),
    );
    let json = serde_json::to_string_pretty(&rec).map_err(Failure::other)? + "\n";
    emit(&json, out)
}

fn cmd_score(model: &str, dataset: &Path, algorithm: &str, run: usize, out: Option<&Path>) -> Result<(), Failure> {
    let text = if Path::new(model).is_file() {
        let rec: ModelRecord = serde_json::from_str(&std::fs::read_to_string(model).map_err(io(Path::new(model)))?)
            .map_err(|e| Failure::config(format!("{model}: {e}")))?;
        rec.expression
    } else {
        model.to_string()
    };
    let expr = parse(&text).map_err(|e| Failure::config(format!("cannot parse model: {e}")))?;
    let ds = read_dataset(dataset)?;
    let outcome = RunOutcome {
        model: Some(expr),
        failure: None,
        wall_seconds: 0.0,
    };
    let mut rec = score_run(algorithm, run, &outcome, &ds);
    rec.wall_seconds = None;
    let json = serde_json::to_string_pretty(&rec).map_err(Failure::other)? + "\n";
    emit(&json, out)
}

fn read_records(dir: &Path) -> Result<Vec<ScoreRecord>, Failure> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(io(&p))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
        let parsed = if value.is_array() {
            serde_json::from_value::<Vec<ScoreRecord>>(value)
        } else {
            serde_json::from_value::<ScoreRecord>(value).map(|r| vec![r])
        };
        out.extend(parsed.map_err(|e| Failure::config(format!("{}: {e}", p.display())))?);
    }
    Ok(out)
}

fn cmd_rank(runs_dir: &Path, out: &Path, order: Order) -> Result<(), Failure> {
    let records = read_records(runs_dir)?;
    if records.is_empty() {
        return Err(Failure::config(format!("no score records in {}", runs_dir.display())));
    }
    let opts = AggregateOptions {
        order: match order {
            Order::MedianThenRank => AggregationOrder::MedianThenRank,
            Order::RankThenMedian => AggregationOrder::RankThenMedian,
        },
        ..AggregateOptions::default()
    };
    let report = aggregate_track(&records, opts)?;
    std::fs::create_dir_all(out).map_err(io(out))?;
    let json = serde_json::to_string_pretty(&report).map_err(Failure::other)? + "\n";
    let write = |name: &str, text: &str| {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(io(&p))
    };
    write("report.json", &json)?;
    write("records.csv", &records_csv(&records))?;
    write("summary.md", &report.to_markdown("Ranking"))?;
    write("cd.csv", &report.cd_csv())?;
    println!("winner: {}", report.winner);
    Ok(())
}

fn cmd_prep(input: &Path, out: &Path, alpha: f64) -> Result<(), Failure> {
    let frame = SeriesFrame::read_csv(input)?;
    for (series, table) in prepare(&frame, alpha)? {
        let (tr, te) = chunk_split(table.len(), 5, 3);
        for (idx, split) in [(&tr, "train"), (&te, "test")] {
            let ds = table.to_dataset(idx, format!("{}_{split}", series.name()));
            let path = out.join(format!("{}.tsv", ds.name));
            write_dataset(&ds, &path)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn append_rating(path: &Path, r: &TrustRating) -> Result<(), Failure> {
    let new = !path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io(path))?;
    if new {
        writeln!(f, "model_id,rating,rater,timestamp").map_err(io(path))?;
    }
    writeln!(f, "{},{},{},{}", r.model_id, r.rating, r.rater, r.timestamp).map_err(io(path))
}

fn cmd_rate(candidates: &Path, ratings: &Path, rater: &str, given: &[String]) -> Result<(), Failure> {
    let text = std::fs::read_to_string(candidates).map_err(io(candidates))?;
    let cands: Vec<Candidate> = CandidateSet::from_csv(&text)?;
    let existing = if ratings.exists() {
        read_ratings(ratings)?
    } else {
        vec![]
    };
    let mut preset = std::collections::BTreeMap::new();
    for g in given {
        let (id, v) = g
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("expected model_id=rating, got {g}")))?;
        let v: i64 = v
            .trim()
            .parse()
            .map_err(|_| Failure::config(format!("bad rating in {g}")))?;
        preset.insert(id.trim().to_string(), v);
    }
    let pred_dir = candidates.parent().unwrap_or(Path::new(".")).join("predictions");
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    for c in cands {
        if existing.iter().any(|r| r.model_id == c.model_id && r.rater == rater) {
            continue;
        }
        let value = match preset.get(&c.model_id) {
            Some(v) => *v,
            None => {
                println!("model {} ({})", c.model_id, c.series.name());
                println!("  expression: {}", c.expression);
                println!("  test R2: {}  simplicity: {}", c.r2_test, c.simplicity);
                println!(
                    "  predictions: {}",
                    pred_dir.join(format!("{}.csv", c.model_id)).display()
                );
                print!("rating 1-5: ");
                std::io::stdout().flush().map_err(Failure::other)?;
                let Some(line) = lines.next() else {
                    return Err(Failure::config("ratings input ended early"));
                };
                let line = line.map_err(Failure::other)?;
                line.trim()
                    .parse()
                    .map_err(|_| Failure::config(format!("not a rating: {}", line.trim())))?
            }
        };
        let stamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        let r = TrustRating::new(c.model_id.clone(), value, rater, stamp)?;
        append_rating(ratings, &r)?;
    }
    Ok(())
}

fn cmd_track(kind: Kind, config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = TrackConfig::from_json_file(config)?;
    let expected = match kind {
        Kind::Quali => TrackKind::Qualification,
        Kind::Synthetic => TrackKind::Synthetic,
        Kind::Realworld => TrackKind::Realworld,
    };
    if cfg.track != expected {
        return Err(Failure::config(format!("config describes the {:?} track", cfg.track)));
    }
    if out.is_some() {
        cfg.output_dir = out;
    }
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    match kind {
        Kind::Quali => {
            let rep = run_qualification(&cfg)?;
            write_qualification(&dir, &rep)?;
            println!("disqualified: {}", rep.disqualified.join(", "));
        }
        Kind::Synthetic => {
            let rep = run_synthetic(&cfg)?;
            write_synthetic(&dir, &rep)?;
            println!("winner: {}", rep.overall.winner);
        }
        Kind::Realworld => {
            let set = realworld_candidates(&cfg)?;
            write_candidates(&dir, &set)?;
            let ratings = match &cfg.ratings {
                Some(p) if p.exists() => read_ratings(p)?,
                _ => vec![],
            };
            let rep = score_realworld(&set.candidates, &ratings)?;
            write_realworld(&dir, &rep)?;
            println!("winner: {}", rep.winner);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen {
            task,
            difficulty,
            seed,
            out,
            gz,
        } => cmd_gen(&task, &difficulty, seed, &out, gz),
        Command::Fit {
            dataset,
            test,
            algo,
            config,
            budget_seconds,
            seed,
            out,
        } => cmd_fit(
            &dataset,
            test.as_deref(),
            algo,
            config.as_deref(),
            budget_seconds,
            seed,
            out.as_deref(),
        ),
        Command::Score {
            model,
            dataset,
            algorithm,
            run,
            out,
        } => cmd_score(&model, &dataset, &algorithm, run, out.as_deref()),
        Command::Rank { runs_dir, out, order } => cmd_rank(&runs_dir, &out, order),
        Command::Covid { action } => match action {
            Covid::Prep { input, out, alpha } => cmd_prep(&input, &out, alpha),
            Covid::Rate {
                candidates,
                ratings,
                rater,
                given,
            } => cmd_rate(&candidates, &ratings, &rater, &given),
        },
        Command::Track { kind, config, out } => cmd_track(kind, &config, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
