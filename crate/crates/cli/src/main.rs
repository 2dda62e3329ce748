//! `hoiset`: synthetic data, toy training, prediction, matching, losses and
//! HOI evaluation from the command line.
//!
//! Exit codes: 0 success, 1 validation failure, 2 numeric failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numeric(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<hoiset_core::Error> for Failure {
    fn from(e: hoiset_core::Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "hoiset", version, about = "Pairwise HOI set prediction toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Random seed (synthetic data, model init, batch order, gradcheck instances).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Profile name (paper, desk, tiny) or TOML config file.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Primary output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Secondary report path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic rectangle dataset into --out.
    GenSynth {
        #[arg(long)]
        images: Option<usize>,
        #[arg(long)]
        obj_classes: Option<usize>,
        /// Square image side in pixels.
        #[arg(long)]
        image_size: Option<usize>,
    },
    /// Train the toy model on a dataset and write a checkpoint to --out.
    TrainToy {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        grad_clip: Option<f64>,
    },
    /// Run a checkpoint over a dataset and write detections to --out.
    Predict {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Also write raw per-query outputs here.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Dump cost matrices and optimal assignments.
    Match {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        queries: PathBuf,
    },
    /// Print the loss breakdown of query outputs against ground truth.
    Loss {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        queries: PathBuf,
    },
    /// HICO-DET style mAP (default / known-object x full / rare / non-rare).
    EvalHico {
        #[command(flatten)]
        eval: EvalArgs,
        /// Dataset holding the training class counts (defaults to --gt).
        #[arg(long)]
        counts: Option<PathBuf>,
        #[arg(long)]
        rare_threshold: Option<usize>,
    },
    /// V-COCO style per-action AP for scenarios 1 and 2.
    EvalVcoco {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        /// Comma-separated action classes left out of the mean.
        #[arg(long, value_delimiter = ',')]
        exclude: Option<Vec<usize>>,
    },
    /// mAP per distance or area bin, as CSV.
    BinAnalysis {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_enum, default_value = "distance")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.1)]
        bin_width: f64,
        #[arg(long)]
        min_count: Option<usize>,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        /// Relative tolerance.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1)]
        instances: usize,
    },
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    iou: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Distance,
    Area,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = config::load(cli.common.config.as_deref())?;
    let c = &cli.common;
    match cli.command {
        Command::GenSynth {
            images,
            obj_classes,
            image_size,
        } => {
            set(&mut cfg.synth.seed, c.seed);
            set(&mut cfg.synth.n_images, images);
            set(&mut cfg.synth.n_obj_classes, obj_classes);
            if let Some(s) = image_size {
                cfg.synth.image_h = s;
                cfg.synth.image_w = s;
            }
            commands::gen_synth(c, &cfg)
        }
        Command::TrainToy {
            data,
            steps,
            lr,
            batch_size,
            grad_clip,
        } => {
            set(&mut cfg.train.seed, c.seed);
            set(&mut cfg.model.seed, c.seed);
            set(&mut cfg.train.steps, steps);
            set(&mut cfg.train.learning_rate, lr);
            set(&mut cfg.train.batch_size, batch_size);
            if grad_clip.is_some() {
                cfg.train.grad_clip = grad_clip;
            }
            commands::train_toy(c, &cfg, &data)
        }
        Command::Predict {
            data,
            checkpoint,
            queries,
            top_k,
        } => {
            set(&mut cfg.eval.top_k, top_k);
            commands::predict(c, &cfg, &data, &checkpoint, queries.as_deref())
        }
        Command::Match { gt, queries } => commands::match_cmd(c, &cfg, &gt, &queries),
        Command::Loss { gt, queries } => commands::loss(c, &cfg, &gt, &queries),
        Command::EvalHico {
            eval,
            counts,
            rare_threshold,
        } => {
            eval.apply(&mut cfg);
            set(&mut cfg.eval.rare_threshold, rare_threshold);
            commands::eval_hico(c, &cfg, &eval, counts.as_deref())
        }
        Command::EvalVcoco {
            eval,
            scenario,
            exclude,
        } => {
            eval.apply(&mut cfg);
            set(&mut cfg.eval.excluded_actions, exclude);
            commands::eval_vcoco(c, &cfg, &eval, scenario)
        }
        Command::BinAnalysis {
            eval,
            mode,
            bin_width,
            min_count,
        } => {
            eval.apply(&mut cfg);
            set(&mut cfg.eval.min_bin_count, min_count);
            commands::bin_analysis(c, &cfg, &eval, mode, bin_width)
        }
        Command::Gradcheck { tol, step, instances } => commands::gradcheck(c, &cfg, tol, step, instances),
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

impl EvalArgs {
    fn apply(&self, cfg: &mut config::RunConfig) {
        set(&mut cfg.eval.iou_threshold, self.iou);
        set(&mut cfg.eval.top_k, self.top_k);
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
