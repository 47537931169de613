//! Command-line front end.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_dump_layer, cmd_eval, cmd_explain, cmd_gen_data, cmd_train, load_model, report_path, EXPLAIN_OUTPUTS,
};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const SEED_ENV: &str = "MORPHLENS_SEED";

#[derive(Debug, Parser)]
#[command(name = "morphlens", version, about = "Morph attack detection with visual explanations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic bona fide / morph corpus.
    GenData(Overrides),
    /// Train on the training split and write a checkpoint.
    Train(Overrides),
    /// Score the checkpoint on the test split.
    Eval(Overrides),
    /// Write saliency, CAM, Grad-CAM and ensemble maps for one image.
    Explain {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        class: Option<usize>,
        /// Activation index for Grad-CAM (default: last conv block).
        #[arg(long)]
        layer: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a grayscale grid of one layer's activations.
    DumpLayer {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        layer: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Config file plus per-key overrides; flags take precedence.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long = "base_depth", alias = "base-depth")]
    pub base_depth: Option<String>,
    #[arg(long = "base_width", alias = "base-width")]
    pub base_width: Option<String>,
    #[arg(long = "base_resolution", alias = "base-resolution")]
    pub base_resolution: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long = "batch_size", alias = "batch-size")]
    pub batch_size: Option<String>,
    #[arg(long = "learning_rate", alias = "learning-rate")]
    pub learning_rate: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long = "n_bonafide", alias = "n-bonafide")]
    pub n_bonafide: Option<String>,
    #[arg(long = "n_morphed", alias = "n-morphed")]
    pub n_morphed: Option<String>,
    #[arg(long = "split_ratio", alias = "split-ratio")]
    pub split_ratio: Option<String>,
    #[arg(long = "ensemble_weights", alias = "ensemble-weights")]
    pub ensemble_weights: Option<String>,
    #[arg(long = "overlay_alpha", alias = "overlay-alpha")]
    pub overlay_alpha: Option<String>,
    #[arg(long = "corpus_dir", alias = "corpus-dir")]
    pub corpus_dir: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<String>,
    #[arg(long = "output_dir", alias = "output-dir")]
    pub output_dir: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> [(&'static str, &Option<String>); 20] {
        [
            ("phi", &self.phi),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("tau", &self.tau),
            ("base_depth", &self.base_depth),
            ("base_width", &self.base_width),
            ("base_resolution", &self.base_resolution),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("learning_rate", &self.learning_rate),
            ("seed", &self.seed),
            ("n_bonafide", &self.n_bonafide),
            ("n_morphed", &self.n_morphed),
            ("split_ratio", &self.split_ratio),
            ("ensemble_weights", &self.ensemble_weights),
            ("overlay_alpha", &self.overlay_alpha),
            ("corpus_dir", &self.corpus_dir),
            ("checkpoint", &self.checkpoint),
            ("output_dir", &self.output_dir),
        ]
    }

    /// Defaults, then the config file, then `env_seed`, then flags.
    pub fn resolve(&self, env_seed: Option<&str>) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = env_seed {
            config.set("seed", seed.trim()).map_err(|e| Error::Config(format!("{SEED_ENV}: {e}")))?;
        }
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        Ok(config)
    }
}

/// Run a parsed command line; returns the text to print on success.
pub fn run(cli: Cli, env_seed: Option<&str>) -> Result<String> {
    match cli.command {
        Command::GenData(o) => cmd_gen_data(&o.resolve(env_seed)?),
        Command::Train(o) => cmd_train(&o.resolve(env_seed)?),
        Command::Eval(o) => cmd_eval(&o.resolve(env_seed)?),
        Command::Explain { image, class, layer, overrides } => {
            cmd_explain(&overrides.resolve(env_seed)?, &image, class, layer)
        }
        Command::DumpLayer { image, layer, overrides } => cmd_dump_layer(&overrides.resolve(env_seed)?, &image, layer),
    }
}
