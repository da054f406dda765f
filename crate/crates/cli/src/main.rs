//! `d2s`: dataset generation, training, evaluation, inference, ablation
//! sweeps and the oracle suite for the synthetic describe-to-score lab.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use d2s_core::config::RunConfig;
use d2s_core::metrics::{MetricsReport, RademacherEstimate};
use d2s_core::synthdata::{decile_histogram, read_dataset, write_dataset, SyntheticSample, N_BUCKETS};
use d2s_core::trainer::{
    ablate, evaluate, infer, visual_features, Case, Checkpoint, IterationLog, Trainer, D_EFF_THRESHOLD,
};
use d2s_core::verify::run_verify;
use d2s_core::{Error, Result};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

const DEFAULT_SEEDS: [u64; 3] = [42, 826, 1215];

#[derive(Parser)]
#[command(name = "d2s", version, about = "Describe-to-score image complexity laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write train/test JSONL splits and a manifest.
    GenData(Common),
    /// Train one model and write a self-describing run directory.
    Train(Common),
    /// Score a checkpoint on the configured test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Predict scores for every image in a dataset file.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// JSONL dataset whose images are scored.
        #[arg(long)]
        data: PathBuf,
    },
    /// Train each ablation case under each seed.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of a,b,c,d,e.
        #[arg(long, default_value = "a,b,c,d,e")]
        cases: String,
        /// Run the case × seed jobs on the rayon pool.
        #[arg(long)]
        parallel: bool,
    },
    /// Run the oracle suite; exits 0 iff every check passes.
    Verify,
}

#[derive(Args)]
struct Common {
    /// TOML run config; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; repeatable for ablate.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Dotted-path override such as train.optim.lr0=3e-4; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let text = match &self.config {
            Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        RunConfig::parse_with_overrides(&text, &self.overrides)
    }

    fn out_dir(&self) -> Result<Option<&Path>> {
        match &self.out {
            Some(p) => {
                fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
                Ok(Some(p))
            }
            None => Ok(None),
        }
    }

    fn require_out(&self) -> Result<&Path> {
        self.out_dir()?
            .ok_or_else(|| Error::Config("--out is required for this command".into()))
    }

    fn single_seed(&self) -> Result<Option<u64>> {
        match self.seeds.as_slice() {
            [] => Ok(None),
            [s] => Ok(Some(*s)),
            _ => Err(Error::Config("this command takes at most one --seed".into())),
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

#[derive(Serialize)]
struct SplitManifest {
    count: usize,
    decile_histogram: [usize; N_BUCKETS],
}

impl SplitManifest {
    fn of(samples: &[SyntheticSample]) -> Self {
        SplitManifest {
            count: samples.len(),
            decile_histogram: decile_histogram(samples),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    generator: &'a d2s_core::synthdata::GenConfig,
    train: SplitManifest,
    test: SplitManifest,
}

fn gen_data(common: &Common) -> Result<()> {
    let mut config = common.load()?;
    if let Some(s) = common.single_seed()? {
        config.data.seed = s;
    }
    config.data.train_path = None;
    config.data.test_path = None;
    let out = common.require_out()?;
    let train = config.data.train_split()?;
    let test = config.data.test_split()?;
    for (name, split) in [("train", &train), ("test", &test)] {
        if split.is_empty() {
            log::warn!("{name} split is empty");
        }
        write_dataset(split, &out.join(format!("{name}.jsonl")))?;
    }
    let manifest = Manifest {
        seed: config.data.seed,
        generator: &config.data.generator,
        train: SplitManifest::of(&train),
        test: SplitManifest::of(&test),
    };
    write(&out.join("manifest.json"), to_json(&manifest))?;
    log::info!(
        "wrote {} train and {} test samples to {}",
        train.len(),
        test.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct CaptionCache<'a> {
    text_seed: u64,
    features: &'a [Vec<f64>],
}

#[derive(Serialize)]
struct TrainMetrics {
    test: MetricsReport,
    rademacher: RademacherEstimate,
    energy_first: Option<f64>,
    energy_final: Option<f64>,
}

fn metrics_csv(m: &MetricsReport) -> String {
    format!("{}\n{}\n", MetricsReport::CSV_HEADER, m.csv_row())
}

fn train(common: &Common) -> Result<()> {
    let mut config = common.load()?;
    if let Some(s) = common.single_seed()? {
        config.train.seed = s;
    }
    let out = common.require_out()?;
    write(&out.join("config.toml"), config.to_toml())?;
    let train_set = config.data.train_split()?;
    let test_set = config.data.test_split()?;

    let trainer = Trainer::new(config.train.clone(), &train_set)?;
    let cache = CaptionCache {
        text_seed: config.train.text_seed,
        features: trainer.text_features(),
    };
    write(&out.join("captions.json"), serde_json::to_string(&cache).expect("cache serializes"))?;
    log::info!("training {} steps", trainer.total_steps());
    let outcome = match trainer.run() {
        Ok(o) => o,
        Err(Error::NumericalAbort {
            iteration,
            reason,
            last_good,
        }) => {
            last_good.save(&out.join("checkpoint.last_good.json"))?;
            return Err(Error::NumericalAbort {
                iteration,
                reason,
                last_good,
            });
        }
        Err(e) => return Err(e),
    };

    let mut log_csv = String::from(IterationLog::CSV_HEADER);
    log_csv.push('\n');
    for row in &outcome.log {
        log_csv.push_str(&row.csv_row());
        log_csv.push('\n');
    }
    write(&out.join("iterations.csv"), log_csv)?;
    let mut align_csv = String::from("iter,energy_distance\n");
    for p in &outcome.alignment {
        align_csv.push_str(&format!("{},{}\n", p.iter, p.energy_distance));
    }
    write(&out.join("alignment.csv"), align_csv)?;
    outcome.checkpoint.save(&out.join("checkpoint.json"))?;

    let report = evaluate(&outcome.checkpoint, &test_set)?;
    let images: Vec<&[f64]> = test_set.iter().map(|s| s.image.as_slice()).collect();
    let rademacher = RademacherEstimate::from_features(&visual_features(&outcome.checkpoint, &images)?, D_EFF_THRESHOLD)?;
    write(&out.join("metrics.csv"), metrics_csv(&report))?;
    write(
        &out.join("metrics.json"),
        to_json(&TrainMetrics {
            test: report,
            rademacher,
            energy_first: outcome.alignment.first().map(|p| p.energy_distance),
            energy_final: outcome.alignment.last().map(|p| p.energy_distance),
        }),
    )?;
    print!("{}", metrics_csv(&report));
    Ok(())
}

fn eval(common: &Common, checkpoint: &Path) -> Result<()> {
    let config = common.load()?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let test_set = config.data.test_split()?;
    let report = evaluate(&ckpt, &test_set)?;
    if let Some(out) = common.out_dir()? {
        write(&out.join("metrics.csv"), metrics_csv(&report))?;
        write(&out.join("metrics.json"), to_json(&report))?;
    }
    print!("{}", metrics_csv(&report));
    Ok(())
}

fn run_infer(common: &Common, checkpoint: &Path, data: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let samples = read_dataset(data)?;
    let images: Vec<&[f64]> = samples.iter().map(|s| s.image.as_slice()).collect();
    let scores = infer(&ckpt, &images)?;
    let mut csv = String::from("index,seed,score\n");
    for (i, (s, score)) in samples.iter().zip(&scores).enumerate() {
        csv.push_str(&format!("{i},{},{score}\n", s.seed));
    }
    match common.out_dir()? {
        Some(out) => write(&out.join("scores.csv"), csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_ablate(common: &Common, cases: &str, parallel: bool) -> Result<()> {
    let config = common.load()?;
    let cases = Case::parse_list(cases)?;
    let seeds = if common.seeds.is_empty() {
        DEFAULT_SEEDS.to_vec()
    } else {
        common.seeds.clone()
    };
    let out = common.require_out()?;
    write(&out.join("config.toml"), config.to_toml())?;
    let train_set = config.data.train_split()?;
    let test_set = config.data.test_split()?;
    log::info!("ablating cases {cases:?} over seeds {seeds:?}");
    let report = ablate(&config.train, &train_set, &test_set, &cases, &seeds, parallel)?;
    write(&out.join("ablation_rows.csv"), report.rows_csv())?;
    write(&out.join("ablation_summary.csv"), report.summary_csv())?;
    write(&out.join("ablation.json"), to_json(&report))?;
    print!("{}", report.summary_csv());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::MalformedRecord { .. } | Error::MalformedCheckpoint(_) => EXIT_IO,
        Error::NumericalAbort { .. }
        | Error::NonFiniteInput
        | Error::NonFiniteGradient
        | Error::NonFiniteComponent(_) => EXIT_NUMERICAL,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("D2S_LOG_LEVEL", "info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(c) => gen_data(c),
        Command::Train(c) => train(c),
        Command::Eval { common, checkpoint } => eval(common, checkpoint),
        Command::Infer {
            common,
            checkpoint,
            data,
        } => run_infer(common, checkpoint, data),
        Command::Ablate {
            common,
            cases,
            parallel,
        } => run_ablate(common, cases, *parallel),
        Command::Verify => {
            let report = run_verify();
            println!("{report}");
            return if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILURE)
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
