mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Saliency prediction from an ensemble of per-image extreme learning machines.
#[derive(Debug, Parser)]
#[command(name = "iseel", version, about)]
pub struct Cli {
    /// Worker threads for batch work (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one unit per training image and write a scene bank.
    BuildBank(BuildBankArgs),
    /// Predict saliency maps for an image or a directory of images.
    Predict(PredictArgs),
    /// Fit the spatial prior from training fixations.
    FitPrior(FitPriorArgs),
    /// Score saliency maps against fixations.
    Evaluate(EvaluateArgs),
    /// Grid-search ensemble size, alpha and smoothing by mean KL.
    Tune(TuneArgs),
    /// Compare fixation transfer between similar and dissimilar image pairs.
    SimilarityExperiment(SimilarityArgs),
    /// Write a synthetic blob corpus with planted fixations.
    GenSynthetic(GenSyntheticArgs),
}

/// Where per-cell features come from.
#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// Directory of precomputed `<id>.iseelfeat` (and optional `<id>.iseeldesc`) files;
    /// without it the built-in filter bank is used.
    #[arg(long, value_name = "DIR")]
    pub features: Option<PathBuf>,

    /// Pyramid levels of the built-in filter bank [default: 3, or the bank's own].
    #[arg(long, value_name = "N")]
    pub scales: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildBankArgs {
    /// Directory of training images (PNG or PNM).
    #[arg(long, value_name = "DIR")]
    pub images: PathBuf,
    /// Fixation CSV with header image_id,x,y[,observer].
    #[arg(long, value_name = "CSV")]
    pub fixations: PathBuf,
    #[command(flatten)]
    pub feature: FeatureArgs,
    /// Hidden nodes per unit.
    #[arg(long, default_value_t = 20)]
    pub hidden: usize,
    /// Base seed for hidden-layer weights.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ground-truth blur in pixels [default: 3% of the longer side].
    #[arg(long, value_name = "PX")]
    pub sigma_gt: Option<f64>,
    /// Output bank file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Number of retrieved units (capped at the bank size).
    #[arg(long, default_value_t = 697)]
    pub n: usize,
    /// Attenuation of the summed unit outputs.
    #[arg(long, default_value_t = 6.0)]
    pub alpha: f64,
    /// Gaussian smoothing sigma in pixels; 0 disables smoothing.
    #[arg(long, default_value_t = 13.0)]
    pub sigma: f64,
    /// Skip the spatial prior even when one is given.
    #[arg(long)]
    pub no_prior: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Scene bank file.
    #[arg(long, value_name = "FILE")]
    pub bank: PathBuf,
    /// An image file or a directory of images.
    #[arg(long, value_name = "PATH")]
    pub images: PathBuf,
    /// Spatial prior file.
    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub feature: FeatureArgs,
    /// Also write an 8-bit PGM preview next to each map.
    #[arg(long)]
    pub pgm: bool,
    /// Output directory; maps are written as `<id>.iseelmap`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitPriorArgs {
    /// Directory of training images, used for their sizes.
    #[arg(long, value_name = "DIR")]
    pub images: PathBuf,
    /// Fixation CSV with header image_id,x,y[,observer].
    #[arg(long, value_name = "CSV")]
    pub fixations: PathBuf,
    /// Output prior file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of `<id>.iseelmap` files.
    #[arg(long, value_name = "DIR")]
    pub maps: PathBuf,
    /// Fixation CSV with header image_id,x,y[,observer].
    #[arg(long, value_name = "CSV")]
    pub fixations: PathBuf,
    /// Directory of the source images; fixations are rescaled from their
    /// size to the map size. Without it maps are assumed to be at image size.
    #[arg(long, value_name = "DIR")]
    pub images: Option<PathBuf>,
    /// Comma-separated metrics.
    #[arg(long, value_delimiter = ',', default_value = "nss,sauc,auc-judd,auc-borji,sim,cc,kl,emd")]
    pub metrics: Vec<iseel::metrics::Metric>,
    /// Random splits for sampled AUC variants.
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    /// Seed for the sampled AUC negatives.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ground-truth blur in pixels [default: 3% of the longer side].
    #[arg(long, value_name = "PX")]
    pub sigma_gt: Option<f64>,
    /// Also score the uniform map and this prior alone as baselines.
    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,
    /// Per-image CSV; a JSON summary is written alongside with a `.json` extension.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Scene bank file.
    #[arg(long, value_name = "FILE")]
    pub bank: PathBuf,
    /// Directory of validation images.
    #[arg(long, value_name = "DIR")]
    pub images: PathBuf,
    /// Fixation CSV with header image_id,x,y[,observer].
    #[arg(long, value_name = "CSV")]
    pub fixations: PathBuf,
    /// Spatial prior file.
    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,
    /// Candidate ensemble sizes.
    #[arg(long, value_delimiter = ',', default_value = "1,3,10,30,100,697")]
    pub n: Vec<usize>,
    /// Candidate attenuations.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,6,8")]
    pub alpha: Vec<f64>,
    /// Candidate smoothing sigmas in pixels.
    #[arg(long, value_delimiter = ',', default_value = "0,5,9,13,17")]
    pub sigma: Vec<f64>,
    /// Tune without the spatial prior.
    #[arg(long)]
    pub no_prior: bool,
    /// Ground-truth blur in pixels [default: 3% of the longer side].
    #[arg(long, value_name = "PX")]
    pub sigma_gt: Option<f64>,
    #[command(flatten)]
    pub feature: FeatureArgs,
    /// JSON report with the best configuration and the full table.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    /// Directory of images.
    #[arg(long, value_name = "DIR")]
    pub images: PathBuf,
    /// Fixation CSV with header image_id,x,y[,observer].
    #[arg(long, value_name = "CSV")]
    pub fixations: PathBuf,
    /// Random splits for sampled AUC variants.
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    /// Seed for the sampled AUC negatives.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ground-truth blur in pixels [default: 3% of the longer side].
    #[arg(long, value_name = "PX")]
    pub sigma_gt: Option<f64>,
    #[command(flatten)]
    pub feature: FeatureArgs,
    /// JSON report.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    /// Output directory; `train/` and `test/` are created inside.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Training images.
    #[arg(long, default_value_t = 30)]
    pub count: usize,
    /// Test images.
    #[arg(long, default_value_t = 10)]
    pub test_count: usize,
    /// Seed for image content and fixations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Image families sharing a layout; 0 draws every image independently.
    #[arg(long, default_value_t = 0)]
    pub families: usize,
    /// Image width in pixels.
    #[arg(long, default_value_t = 96)]
    pub width: usize,
    /// Image height in pixels.
    #[arg(long, default_value_t = 72)]
    pub height: usize,
    /// Planted fixations per image.
    #[arg(long, default_value_t = 24)]
    pub fixations_per_image: usize,
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Exit code for a failure: numerical breakdowns are told apart from bad input.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<iseel::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        EXIT_NUMERICAL
    } else if err.chain().any(|e| e.downcast_ref::<commands::UsageError>().is_some()) {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ISEEL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
