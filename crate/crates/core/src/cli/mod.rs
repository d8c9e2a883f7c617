//! The `mmsldl` command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

pub mod commands;
pub mod config;
pub mod grid;
pub mod pipeline;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{GridSpec, OcclusionSpec, RunConfig, SourceSpec, SplitSpec, CONFIG_FILE};
pub use pipeline::DataSource;

use crate::data::archive::MANIFEST_NAME;
use crate::data::Geometry;
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "mmsldl", version, about = "Multi-modal structured low-rank dictionary learning")]
pub struct Cli {
    /// Run configuration (TOML). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Image tree (`root/<class>/<image>`) or a dump written by `synth`.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on split 0 and save the model.
    Train(TrainArgs),
    /// Report recognition rates over repeated random splits.
    Eval(EvalArgs),
    /// Render test samples next to their low-rank part and sparse error.
    Decompose(DecomposeArgs),
    /// Write the raw and illumination-invariant planes of images.
    Transform(TransformArgs),
    /// Generate a synthetic two-modality dataset with ground truth.
    Synth(SynthArgs),
    /// Cross-validated search over alpha, beta and lambda.
    Gridsearch(GridArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub ridge_lambda: Option<f64>,
    #[arg(long)]
    pub train_per_class: Option<usize>,
    /// Fraction of every training image covered by an occluding block.
    #[arg(long, allow_negative_numbers = true)]
    pub occlusion: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Evaluate this saved model on the split-0 test set instead of
    /// training one per repeat.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Test-set sample indices, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub samples: Vec<usize>,
    /// Which split's test set to draw from.
    #[arg(long, default_value_t = 0)]
    pub repeat: usize,
    #[arg(long)]
    pub train_per_class: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TransformArgs {
    /// Image files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Resize to this width before transforming (with --height).
    #[arg(long, requires = "height")]
    pub width: Option<usize>,
    #[arg(long, requires = "width")]
    pub height: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub corruption: Option<f64>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub view_noise: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Candidate values, comma separated.
    #[arg(long = "alphas", value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long = "betas", value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long = "lambdas", value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidParameter(_) => 2,
        Error::Numerical(_) | Error::InvalidState(_) => 4,
        Error::InvalidInput(_)
        | Error::InvalidDataset(_)
        | Error::MissingFile(_)
        | Error::Decode { .. }
        | Error::Version { .. }
        | Error::Checksum(_)
        | Error::Truncated { .. }
        | Error::Format(_)
        | Error::Io(_) => 3,
    }
}

impl HyperArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let h = &mut cfg.train.hyper;
        if let Some(v) = self.alpha {
            h.alpha = v;
        }
        if let Some(v) = self.beta {
            h.beta = v;
        }
        if let Some(v) = self.lambda {
            h.lambda = v;
        }
        if let Some(v) = self.gamma {
            h.gamma = v;
        }
        if let Some(v) = self.ridge_lambda {
            cfg.train.ridge_lambda = v;
        }
        if let Some(v) = self.train_per_class {
            cfg.split.train_per_class = v;
        }
        if let Some(f) = self.occlusion {
            let patches = cfg.occlusion.take().and_then(|o| o.patches);
            cfg.occlusion = Some(OcclusionSpec { fraction: f, patches });
        }
    }
}

/// A `--dataset` path: a directory holding an archive manifest is a dump,
/// anything else an image tree.
fn dataset_source(path: PathBuf, current: &SourceSpec) -> SourceSpec {
    if path.join(MANIFEST_NAME).is_file() {
        return SourceSpec::Dump { path };
    }
    let geometry = match current {
        SourceSpec::Images { geometry, .. } => *geometry,
        _ => Geometry::default(),
    };
    SourceSpec::Images { root: path, geometry }
}

impl Cli {
    /// The configuration this invocation runs with: file, then flags.
    pub fn effective_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(d) = &self.dataset {
            cfg.source = dataset_source(d.clone(), &cfg.source);
        }
        match &self.command {
            Command::Train(a) => a.hyper.apply(&mut cfg),
            Command::Eval(a) => {
                a.hyper.apply(&mut cfg);
                if let Some(r) = a.repeats {
                    cfg.split.repeats = r;
                }
            }
            Command::Gridsearch(a) => {
                a.hyper.apply(&mut cfg);
                if let Some(f) = a.folds {
                    cfg.grid.folds = f;
                }
                if let Some(v) = &a.alphas {
                    cfg.grid.alpha = v.clone();
                }
                if let Some(v) = &a.betas {
                    cfg.grid.beta = v.clone();
                }
                if let Some(v) = &a.lambdas {
                    cfg.grid.lambda = v.clone();
                }
            }
            Command::Synth(a) => {
                let mut spec = match &cfg.source {
                    SourceSpec::Synthetic(s) => s.clone(),
                    _ => Default::default(),
                };
                let set = |dst: &mut usize, v: Option<usize>| {
                    if let Some(v) = v {
                        *dst = v;
                    }
                };
                set(&mut spec.classes, a.classes);
                set(&mut spec.per_class, a.per_class);
                set(&mut spec.dim, a.dim);
                set(&mut spec.rank, a.rank);
                if let Some(v) = a.corruption {
                    spec.corruption = v;
                }
                if let Some(v) = a.overlap {
                    spec.modality2_overlap = v;
                }
                if let Some(v) = a.view_noise {
                    spec.view_noise = v;
                }
                if let Some(s) = self.seed {
                    spec.seed = s;
                }
                cfg.source = SourceSpec::Synthetic(spec);
            }
            Command::Decompose(a) => {
                if let Some(v) = a.train_per_class {
                    cfg.split.train_per_class = v;
                }
            }
            Command::Transform(_) => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Caps the worker pool at `MMSLDL_THREADS` when set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("MMSLDL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("MMSLDL_THREADS must be a positive integer, got '{v}'")))?;
    if n == 0 {
        return Err(Error::InvalidConfig("MMSLDL_THREADS must be at least 1".into()));
    }
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses nothing; runs an already parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    let cfg = cli.effective_config()?;
    cfg.write_to(&cfg.out)?;
    match &cli.command {
        Command::Train(_) => commands::run_train(&cfg).map(|_| ()),
        Command::Eval(a) => commands::run_eval(&cfg, a.model.as_deref()).map(|_| ()),
        Command::Decompose(a) => commands::run_decompose(&cfg, &a.model, &a.samples, a.repeat),
        Command::Transform(a) => {
            let size = a.width.zip(a.height);
            commands::run_transform(&cfg, &a.inputs, size)
        }
        Command::Synth(_) => commands::run_synth(&cfg).map(|_| ()),
        Command::Gridsearch(_) => commands::run_gridsearch(&cfg).map(|_| ()),
    }
}

/// Entry point of the binary: parses `std::env::args`, runs, and returns
/// the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
