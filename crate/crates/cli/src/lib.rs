//! The `sda2e` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 runtime error.

pub mod config;
mod eval_table;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use sda2e_core::active::{combined_report, run_session, Journal, SessionConfig, SimulatedOracle, Strategy};
use sda2e_core::data::{
    generate_synthetic, load_csv, load_labels, split_indices, summary, BinaryDataset, LabelMap, SyntheticSpec,
};
use sda2e_core::eval::{RelevanceLabels, RunReport};
use sda2e_core::sda2e::{load_checkpoint, save_checkpoint, train_rows, Sda2eConfig, TrainOptions};
use sda2e_core::simsearch::SimilarityMetric;
use sda2e_core::Error;

pub use config::Overrides;
pub use eval_table::{compare_reports, Comparison};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Parse { .. }
            | Error::Data(_)
            | Error::UndefinedMetric(_)
            | Error::Io { .. }
            | Error::Json(_)
            | Error::Checkpoint(_) => 3,
            _ => 4,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "sda2e", version, about = "Anomaly detection with an attention-gated adversarial autoencoder and active learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Extra `key=value` override, repeatable; applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset and its labels.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        anomaly_fraction: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a model and write a checkpoint plus the per-epoch loss table.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Labels used to stratify the holdout split.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Fraction of rows held out for validation; 0 disables the holdout.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Score every row of a dataset with a checkpoint.
    Score {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run simulated-oracle active-learning sessions.
    Active {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_strategy, conflicts_with = "all_strategies")]
        strategy: Option<Strategy>,
        /// Run s1, s2 and hybrid.
        #[arg(long)]
        all_strategies: bool,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Percentile for both the score threshold and the similarity thresholds.
        #[arg(long)]
        percentile: Option<f64>,
        #[arg(long, value_parser = parse_metric)]
        metric: Option<SimilarityMetric>,
        #[arg(long)]
        ndcg_at: Option<usize>,
        /// Training epochs per (re)train.
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare report files: per-dataset winner and average ranks.
    Eval {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API and the triage UI.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory with the built UI assets.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Upload size limit in bytes.
        #[arg(long)]
        max_upload_bytes: Option<usize>,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<SimilarityMetric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Entry point used by the binary: parses `args`, runs, and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Runs one command and returns what it prints on success.
pub fn run(command: Command) -> CliResult<String> {
    match command {
        Command::Synth { out, n, d, anomaly_fraction, common } => {
            let mut o = common_overrides(&common)?;
            if let Some(n) = n {
                o.set("n", n);
            }
            if let Some(d) = d {
                o.set("d", d);
            }
            if let Some(f) = anomaly_fraction {
                o.set("anomaly_fraction", f);
            }
            cmd_synth(&out, &o)
        }
        Command::Train { dataset, labels, out, epochs, holdout, common } => {
            let mut o = common_overrides(&common)?;
            if let Some(e) = epochs {
                o.set("epochs", e);
            }
            cmd_train(&dataset, labels.as_deref(), &out, holdout, &o)
        }
        Command::Score { dataset, model, out } => cmd_score(&dataset, &model, out.as_deref()),
        Command::Active {
            dataset,
            labels,
            out,
            strategy,
            all_strategies,
            budget,
            iterations,
            percentile,
            metric,
            ndcg_at,
            epochs,
            common,
        } => {
            let mut o = common_overrides(&common)?;
            if let Some(s) = strategy {
                o.set("strategy", s);
            }
            if let Some(b) = budget {
                o.set("budget", b);
            }
            if let Some(t) = iterations {
                o.set("iterations", t);
            }
            if let Some(p) = percentile {
                o.set("error_percentile", p);
                o.set("sim_percentile", p);
            }
            if let Some(m) = metric {
                o.set("metric", m);
            }
            if let Some(k) = ndcg_at {
                o.set("ndcg_cutoff", k);
            }
            if let Some(e) = epochs {
                o.set("epochs", e);
            }
            let strategies = all_strategies.then(|| vec![Strategy::S1, Strategy::S2, Strategy::Hybrid]);
            cmd_active(&dataset, &labels, &out, strategies, &o)
        }
        Command::Eval { reports, out } => cmd_eval(&reports, out.as_deref()),
        Command::Serve { addr, static_dir, max_upload_bytes } => cmd_serve(&addr, static_dir, max_upload_bytes),
    }
}

fn common_overrides(common: &Common) -> CliResult<Overrides> {
    let mut o = match &common.config {
        Some(path) => Overrides::load(path)?,
        None => Overrides::default(),
    };
    for item in &common.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
        o.push(k.trim(), v.trim())?;
    }
    if let Some(seed) = common.seed {
        o.set("seed", seed);
    }
    Ok(o)
}

fn session_and_model(o: &Overrides, d: usize) -> CliResult<(SessionConfig, Sda2eConfig)> {
    let session_base = SessionConfig::default();
    let model_base = Sda2eConfig::for_dimension(d);
    o.check_known(&[&to_value(&session_base), &to_value(&model_base)])?;
    let session: SessionConfig = o.apply(&session_base, "session")?;
    let model: Sda2eConfig = o.apply(&model_base, "model")?;
    session.validate()?;
    model.validate()?;
    Ok((session, model))
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn cmd_synth(out: &Path, o: &Overrides) -> CliResult<String> {
    let base = SyntheticSpec::default();
    o.check_known(&[&to_value(&base)])?;
    let spec: SyntheticSpec = o.apply(&base, "synthetic")?;
    spec.validate()?;
    let (ds, labels) = generate_synthetic(&spec)?;
    create_dir(out)?;
    let data_path = out.join("data.csv");
    let labels_path = out.join("labels.csv");
    write(&data_path, &ds.to_csv_string())?;
    write(&labels_path, &labels.to_csv_string(&ds))?;
    let mut text = format!("# config {}\n", serde_json::to_string(&spec).expect("spec serializes"));
    let _ = writeln!(text, "{}", summary(&ds, Some(&labels)));
    let _ = writeln!(text, "wrote {} (sha256 {})", data_path.display(), ds.checksum());
    let _ = writeln!(text, "wrote {}", labels_path.display());
    Ok(text)
}

pub fn cmd_train(dataset: &Path, labels: Option<&Path>, out: &Path, holdout: f64, o: &Overrides) -> CliResult<String> {
    if !(0.0..1.0).contains(&holdout) {
        return Err(CliError::usage(format!("--holdout must be in [0, 1), got {holdout}")));
    }
    let ds = load_csv(dataset)?;
    let labels = labels.map(|p| load_labels(p, &ds, true)).transpose()?;
    let base = Sda2eConfig::for_dimension(ds.d());
    o.check_known(&[&to_value(&base)])?;
    let cfg: Sda2eConfig = o.apply(&base, "model")?;
    cfg.validate()?;

    let (train_idx, hold_idx) = if holdout > 0.0 {
        split_indices(ds.len(), labels.as_ref(), 1.0 - holdout, cfg.seed, labels.is_some())?
    } else {
        ((0..ds.len()).collect(), Vec::new())
    };
    let train: Vec<Vec<f64>> = train_idx.iter().map(|&i| ds.row_f64(i)).collect();
    let hold: Vec<Vec<f64>> = hold_idx.iter().map(|&i| ds.row_f64(i)).collect();
    let options = TrainOptions {
        holdout: (!hold.is_empty()).then_some(hold.as_slice()),
    };
    let trained = train_rows(&train, &cfg, options)?;

    create_dir(out)?;
    let ckpt = out.join("model.ckpt");
    save_checkpoint(&trained.model, &ckpt)?;
    let mut table = format!("# config {}\n", serde_json::to_string(&cfg).expect("config serializes"));
    table.push_str("epoch,train_mse,holdout_mse\n");
    for e in &trained.history.epochs {
        let hold = e.holdout_mse.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(table, "{},{},{}", e.epoch, e.train_mse, hold);
    }
    write(&out.join("losses.csv"), &table)?;
    let last = trained.history.epochs.last();
    Ok(format!(
        "trained {} epochs on {} rows ({} held out); final train_mse {}\nwrote {}\nwrote {}\n",
        trained.history.epochs.len(),
        train.len(),
        hold.len(),
        last.map_or_else(|| "-".to_string(), |e| format!("{:.6}", e.train_mse)),
        ckpt.display(),
        out.join("losses.csv").display()
    ))
}

pub fn cmd_score(dataset: &Path, model: &Path, out: Option<&Path>) -> CliResult<String> {
    let ds = load_csv(dataset)?;
    let model = load_checkpoint(model)?;
    let scores = model.score_all(&ds)?;
    let mut text = format!("# config {}\nid,score\n", serde_json::to_string(&model.config).expect("config serializes"));
    for (i, s) in scores.iter().enumerate() {
        let _ = writeln!(text, "{},{}", ds.id(i), s);
    }
    match out {
        Some(path) => {
            write(path, &text)?;
            Ok(format!("scored {} rows, wrote {}\n", ds.len(), path.display()))
        }
        None => Ok(text),
    }
}

/// Runs one session per strategy and writes `report-<s>.json`,
/// `report-<s>.csv`, `journal-<s>.jsonl` and `summary.txt` under `out`.
pub fn cmd_active(
    dataset_path: &Path,
    labels_path: &Path,
    out: &Path,
    strategies: Option<Vec<Strategy>>,
    o: &Overrides,
) -> CliResult<String> {
    let ds = Arc::new(load_csv(dataset_path)?);
    let labels = load_labels(labels_path, &ds, false)?;
    if labels.anomaly_count() == 0 {
        return Err(CliError::data("labels contain no anomaly, so nDCG is undefined; refusing to run"));
    }
    let (session_cfg, model_cfg) = session_and_model(o, ds.d())?;
    let strategies = strategies.unwrap_or_else(|| vec![session_cfg.strategy]);
    let name = dataset_name(dataset_path);
    create_dir(out)?;
    let sessions = run_all(&ds, &labels, &strategies, &session_cfg, &model_cfg, out)?;

    let mut text = String::new();
    for s in &sessions {
        let report = s.report(&name);
        let strategy = s.config().strategy.name();
        report.save(out.join(format!("report-{strategy}.json")))?;
        write(&out.join(format!("report-{strategy}.csv")), &report.to_csv())?;
        let values: Vec<String> = s
            .records()
            .iter()
            .map(|r| r.ndcg.map_or_else(|| "-".into(), |v| format!("{v:.4}")))
            .collect();
        let _ = writeln!(text, "{strategy}: {}", values.join(" "));
    }
    let refs: Vec<_> = sessions.iter().collect();
    let merged = combined_report(&name, &refs)?;
    let summary_text = summary_lines(&merged);
    write(&out.join("summary.txt"), &summary_text)?;
    text.push_str(&summary_text);
    Ok(text)
}

fn run_all(
    ds: &Arc<BinaryDataset>,
    labels: &LabelMap,
    strategies: &[Strategy],
    session_cfg: &SessionConfig,
    model_cfg: &Sda2eConfig,
    out: &Path,
) -> CliResult<Vec<sda2e_core::active::Session>> {
    let relevance = RelevanceLabels::from_labels(labels);
    let mut sessions = Vec::new();
    for &strategy in strategies {
        let cfg = SessionConfig { strategy, ..session_cfg.clone() };
        let journal = Journal::create(out.join(format!("journal-{strategy}.jsonl")))?;
        let mut oracle = SimulatedOracle::new(labels.clone());
        let outcome = run_session(ds.clone(), &mut oracle, Some(relevance.clone()), cfg, model_cfg.clone(), journal)?;
        sessions.push(outcome.session);
    }
    Ok(sessions)
}

fn summary_lines(report: &RunReport) -> String {
    let mut text = format!(
        "# session {}\n# model {}\nstrategy,max,mean,median\n",
        report.session_config, report.model_config
    );
    for run in &report.runs {
        if let Some(series) = run.series() {
            if let (Ok(max), Ok(mean), Ok(median)) = (series.max(), series.mean(), series.median()) {
                let _ = writeln!(text, "{},{max:.6},{mean:.6},{median:.6}", run.strategy);
            }
        }
    }
    if let Some(s) = &report.summary {
        let _ = writeln!(
            text,
            "Max_Max={:.6} Max_Mean={:.6} Max_Median={:.6}",
            s.max_max, s.max_mean, s.max_median
        );
    }
    text
}

pub fn cmd_eval(paths: &[PathBuf], out: Option<&Path>) -> CliResult<String> {
    let reports = paths
        .iter()
        .map(|p| RunReport::load(p).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    let comparison = compare_reports(&reports)?;
    let text = comparison.to_table();
    if let Some(path) = out {
        write(path, &text)?;
    }
    Ok(text)
}

fn cmd_serve(addr: &str, static_dir: Option<PathBuf>, max_upload_bytes: Option<usize>) -> CliResult<String> {
    let mut options = sda2e_service::ServiceOptions::default();
    if let Some(dir) = static_dir {
        options.static_dir = Some(dir);
    }
    if let Some(limit) = max_upload_bytes {
        options.max_upload_bytes = limit;
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::runtime(e.to_string()))?;
    runtime
        .block_on(sda2e_service::serve(addr, options))
        .map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(String::new())
}
