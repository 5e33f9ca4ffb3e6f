//! Flag parsing, config-file merging and resolved run configurations.
//!
//! Precedence is total and simple: explicit flags beat profile presets,
//! profile presets beat config-file values, config-file values beat
//! built-in defaults. Every resolved config serializes into the emitted
//! files, and the seed is always printed.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hsn_core::model::HybridWeights;
use hsn_core::optim::{Algorithm, TruncationSchedule};
use hsn_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "hsn",
    version,
    about = "Streaming second-order logistic-regression benchmarks and diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Declarative TOML config file; flags override file values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (default: $HSN_OUTPUT_DIR, then ./out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for replications; outputs are identical for any value.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthetic-stream mean-squared-error curves.
    Synth(SynthArgs),
    /// Real-dataset excess-risk curves against a batch Newton reference.
    Real(RealArgs),
    /// Central-limit-theorem diagnostic (scaled-error covariance).
    Clt(CltArgs),
    /// Quadratic strong law and cumulative excess risk diagnostic.
    Qsl(QslArgs),
    /// Parameter-error rate check: curve, log-log slope, decay ratio.
    Rates(RatesArgs),
    /// Curvature-matrix convergence rates, with a truncated baseline.
    Hessian(HessianArgs),
    /// All five algorithms on one synthetic spec, aligned curves.
    Compare(CompareArgs),
    /// Run the built-in invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoTag {
    Hsn,
    Ons,
    Sn,
    Tsn,
    Sgd,
}

/// Synthetic-protocol presets: (dimension, alpha, beta).
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Profile {
    #[value(name = "synth-d10")]
    #[serde(rename = "synth-d10")]
    SynthD10,
    #[value(name = "synth-d50")]
    #[serde(rename = "synth-d50")]
    SynthD50,
    #[value(name = "synth-d100")]
    #[serde(rename = "synth-d100")]
    SynthD100,
    #[value(name = "synth-d200")]
    #[serde(rename = "synth-d200")]
    SynthD200,
}

impl Profile {
    pub fn settings(self) -> (usize, f64, f64) {
        match self {
            Profile::SynthD10 => (10, 1e-10, 1.0 - 1e-10),
            Profile::SynthD50 => (50, 1e-10, 1.0 - 1e-10),
            Profile::SynthD100 => (100, 0.25, 0.75),
            Profile::SynthD200 => (200, 0.9, 0.1),
        }
    }

    /// Preset weights for a dimension, when one matches.
    pub fn for_dim(dim: usize) -> Option<Profile> {
        match dim {
            10 => Some(Profile::SynthD10),
            50 => Some(Profile::SynthD50),
            100 => Some(Profile::SynthD100),
            200 => Some(Profile::SynthD200),
            _ => None,
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct SynthArgs {
    #[arg(long)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub algo: Option<AlgoTag>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tsn_floor_scale: Option<f64>,
    #[arg(long)]
    pub tsn_exponent: Option<f64>,
    #[arg(long)]
    pub sgd_step_scale: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct RealArgs {
    /// Training CSV (header row required).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Held-out test CSV; omit to split the training file.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub split_fraction: Option<f64>,
    #[arg(long)]
    pub label_column: Option<String>,
    /// Value of the label column mapped to class 1.
    #[arg(long)]
    pub positive_label: Option<String>,
    /// Comma-separated categorical columns to one-hot expand.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    /// Field delimiter (single character).
    #[arg(long)]
    pub delimiter: Option<char>,
    #[arg(long)]
    pub algo: Option<AlgoTag>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub newton_tol: Option<f64>,
    #[arg(long)]
    pub newton_max_iter: Option<usize>,
    #[arg(long)]
    pub tsn_floor_scale: Option<f64>,
    #[arg(long)]
    pub tsn_exponent: Option<f64>,
    #[arg(long)]
    pub sgd_step_scale: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct CltArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub oracle_samples: Option<u64>,
    #[arg(long)]
    pub eval_samples: Option<u64>,
    #[arg(long)]
    pub null_sims: Option<u64>,
}

#[derive(Args, Debug, Default)]
pub struct QslArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub oracle_samples: Option<u64>,
    #[arg(long)]
    pub eval_samples: Option<u64>,
    #[arg(long)]
    pub null_sims: Option<u64>,
}

#[derive(Args, Debug, Default)]
pub struct RatesArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
pub struct HessianArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub algo: Option<AlgoTag>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub oracle_samples: Option<u64>,
    /// Also run the truncated baseline and report the slope gap.
    #[arg(long)]
    pub tsn_baseline: Option<bool>,
    #[arg(long)]
    pub tsn_floor_scale: Option<f64>,
    #[arg(long)]
    pub tsn_exponent: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct CompareArgs {
    #[arg(long)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
pub struct SelftestArgs {
    /// Random cases for the matrix-kernel checks.
    #[arg(long)]
    pub cases: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Config-file counterpart: one optional table per subcommand, with the
/// same field names as the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub synth: SynthFile,
    #[serde(default)]
    pub real: RealFile,
    #[serde(default)]
    pub clt: StatFile,
    #[serde(default)]
    pub qsl: StatFile,
    #[serde(default)]
    pub rates: StatFile,
    #[serde(default)]
    pub hessian: HessianFile,
    #[serde(default)]
    pub compare: SynthFile,
    #[serde(default)]
    pub selftest: SelftestFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    pub profile: Option<Profile>,
    pub dim: Option<usize>,
    pub algo: Option<AlgoTag>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub n: Option<u64>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub tsn_floor_scale: Option<f64>,
    pub tsn_exponent: Option<f64>,
    pub sgd_step_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealFile {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub split_fraction: Option<f64>,
    pub label_column: Option<String>,
    pub positive_label: Option<String>,
    pub categorical: Option<Vec<String>>,
    pub delimiter: Option<char>,
    pub algo: Option<AlgoTag>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub tsn_floor_scale: Option<f64>,
    pub tsn_exponent: Option<f64>,
    pub sgd_step_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatFile {
    pub dim: Option<usize>,
    pub n: Option<u64>,
    pub reps: Option<u64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    pub oracle_samples: Option<u64>,
    pub eval_samples: Option<u64>,
    pub null_sims: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HessianFile {
    pub dim: Option<usize>,
    pub n: Option<u64>,
    pub reps: Option<u64>,
    pub algo: Option<AlgoTag>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    pub oracle_samples: Option<u64>,
    pub tsn_baseline: Option<bool>,
    pub tsn_floor_scale: Option<f64>,
    pub tsn_exponent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestFile {
    pub cases: Option<u64>,
    pub seed: Option<u64>,
}

pub fn load_file_config(path: Option<&PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("config file {}: {e}", p.display())))
        }
    }
}

/// Serializable algorithm description embedded in resolved configs.
#[derive(Clone, Debug, Serialize)]
pub struct AlgoConfig {
    pub algo: AlgoTag,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tsn_floor_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tsn_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sgd_step_scale: Option<f64>,
}

impl AlgoConfig {
    pub fn build(&self) -> Result<Algorithm> {
        Ok(match self.algo {
            AlgoTag::Hsn => Algorithm::Hsn {
                weights: HybridWeights::new(
                    self.alpha.unwrap_or(0.5),
                    self.beta.unwrap_or(0.5),
                )?,
            },
            AlgoTag::Ons => Algorithm::Ons,
            AlgoTag::Sn => Algorithm::Sn,
            AlgoTag::Tsn => Algorithm::Tsn {
                schedule: TruncationSchedule::new(
                    self.tsn_floor_scale.unwrap_or(1.0),
                    self.tsn_exponent.unwrap_or(0.49),
                )?,
            },
            AlgoTag::Sgd => Algorithm::Sgd {
                step_scale: self.sgd_step_scale.unwrap_or(1.0),
            },
        })
    }
}

pub fn algo_config(
    tag: AlgoTag,
    alpha: Option<f64>,
    beta: Option<f64>,
    tsn_floor_scale: Option<f64>,
    tsn_exponent: Option<f64>,
    sgd_step_scale: Option<f64>,
) -> AlgoConfig {
    AlgoConfig {
        algo: tag,
        alpha: matches!(tag, AlgoTag::Hsn).then(|| alpha.unwrap_or(0.5)),
        beta: matches!(tag, AlgoTag::Hsn).then(|| beta.unwrap_or(0.5)),
        tsn_floor_scale: matches!(tag, AlgoTag::Tsn).then(|| tsn_floor_scale.unwrap_or(1.0)),
        tsn_exponent: matches!(tag, AlgoTag::Tsn).then(|| tsn_exponent.unwrap_or(0.49)),
        sgd_step_scale: matches!(tag, AlgoTag::Sgd).then(|| sgd_step_scale.unwrap_or(1.0)),
    }
}
