use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_PRECISION_BITS: u32 = 256;

#[derive(Parser, Debug)]
#[command(
    name = "subres",
    version,
    about = "Precision limits for generalized moments of sub-diffraction incoherent objects"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Quantum lower bound on the variance of a moment estimator.
    Bound,
    /// Monte Carlo SPADE experiment with moment estimators.
    Spade,
    /// Direct-imaging Fisher information and Cramér–Rao bound.
    Direct,
    /// Scaling exponents of all three quantities side by side.
    Demo,
    /// Δ-sweep of one evaluator with a log-log fit.
    Sweep,
}

/// Command-line overrides; every value also has a config-file key.
#[derive(Args, Debug, Default)]
pub struct Flags {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Working precision in bits (at least 64).
    #[arg(long, global = true, env = "SUBRES_PRECISION_BITS")]
    pub precision_bits: Option<u32>,
    /// Print the JSON report on stdout and skip CSV outputs.
    #[arg(long, global = true)]
    pub json: bool,
    /// Compare fitted exponents and Monte Carlo summaries with theory; exit 4 on failure.
    #[arg(long, global = true)]
    pub check: bool,

    /// Object measure: uniform, quadratic, truncated-gaussian[:σ/Δ], two-point, csv:PATH.
    #[arg(long, global = true)]
    pub p0: Option<String>,
    /// Object half-width Δ.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Frequency measure: gaussian[:variance] or uniform:K.
    #[arg(long, global = true)]
    pub q: Option<String>,
    /// Moment order μ ≥ 1.
    #[arg(long, global = true)]
    pub mu: Option<usize>,
    /// Expected photon number N.
    #[arg(long, global = true)]
    pub n: Option<f64>,
    /// Truncation of the purified score: adaptive or fixed:J.
    #[arg(long, global = true)]
    pub truncation: Option<String>,
    /// Geometric Δ grid lo:hi:n.
    #[arg(long, global = true)]
    pub sweep: Option<String>,

    /// SPADE projection: even:n (PAD, β₂ₙ) or odd:n (iPAD pair, β₂ₙ₊₁).
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Number of temporal modes M.
    #[arg(long, global = true)]
    pub m: Option<f64>,
    /// Photon probability per temporal mode ε.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub replicates: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// PSF: gaussian[:σ], super-gaussian:d2:p, lorentzian:d2:p, sinc2:K.
    #[arg(long, global = true)]
    pub psf: Option<String>,
    /// Allow the unvalidated sinc² PSF.
    #[arg(long, global = true)]
    pub experimental: bool,

    /// Sweep evaluator: bound, gram, spade-variance, fisher, crb, moment.
    #[arg(long, global = true)]
    pub evaluator: Option<String>,
    /// Largest μ in the demo table.
    #[arg(long, global = true)]
    pub mu_max: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub p0: Option<String>,
    pub delta: Option<f64>,
    pub q: Option<String>,
    pub mu: Option<usize>,
    pub n: Option<f64>,
    pub truncation: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpadeSection {
    pub mode: Option<String>,
    pub m: Option<f64>,
    pub eps: Option<f64>,
    pub replicates: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectSection {
    pub psf: Option<String>,
    pub experimental: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub grid: Option<String>,
    pub evaluator: Option<String>,
    pub mu_max: Option<usize>,
}

/// Layout of the TOML config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub precision_bits: Option<u32>,
    pub json: Option<bool>,
    pub check: Option<bool>,
    pub model: ModelSection,
    pub spade: SpadeSection,
    pub direct: DirectSection,
    pub sweep: SweepSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved configuration: defaults, then the config file, then flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub out: PathBuf,
    pub precision_bits: u32,
    pub json: bool,
    pub check: bool,
    pub p0: String,
    pub delta: f64,
    pub q: String,
    pub mu: usize,
    pub n: Option<f64>,
    pub truncation: String,
    pub sweep: Option<String>,
    pub mode: String,
    pub m: Option<f64>,
    pub eps: Option<f64>,
    pub replicates: u64,
    pub seed: Option<u64>,
    pub psf: Option<String>,
    pub experimental: bool,
    pub evaluator: String,
    pub mu_max: usize,
}

impl RunConfig {
    pub fn resolve(command: Command, flags: Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let cfg = Self {
            command,
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            precision_bits: flags
                .precision_bits
                .or(file.precision_bits)
                .unwrap_or(DEFAULT_PRECISION_BITS),
            json: flags.json || file.json.unwrap_or(false),
            check: flags.check || file.check.unwrap_or(false),
            p0: flags.p0.or(file.model.p0).unwrap_or_else(|| "uniform".into()),
            delta: flags.delta.or(file.model.delta).unwrap_or(0.05),
            q: flags.q.or(file.model.q).unwrap_or_else(|| "gaussian".into()),
            mu: flags.mu.or(file.model.mu).unwrap_or(2),
            n: flags.n.or(file.model.n),
            truncation: flags
                .truncation
                .or(file.model.truncation)
                .unwrap_or_else(|| "adaptive".into()),
            sweep: flags.sweep.or(file.sweep.grid),
            mode: flags.mode.or(file.spade.mode).unwrap_or_else(|| "even:1".into()),
            m: flags.m.or(file.spade.m),
            eps: flags.eps.or(file.spade.eps),
            replicates: flags.replicates.or(file.spade.replicates).unwrap_or(1000),
            seed: flags.seed.or(file.spade.seed),
            psf: flags.psf.or(file.direct.psf),
            experimental: flags.experimental || file.direct.experimental.unwrap_or(false),
            evaluator: flags.evaluator.or(file.sweep.evaluator).unwrap_or_else(|| "bound".into()),
            mu_max: flags.mu_max.or(file.sweep.mu_max).unwrap_or(4),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("{field}: {msg}")));
        if self.precision_bits < 64 {
            return bad("precision_bits", format!("must be at least 64, got {}", self.precision_bits));
        }
        if self.mu == 0 {
            return bad("mu", "the moment order must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta", format!("must be positive, got {}", self.delta));
        }
        if let Some(n) = self.n {
            if !(n > 0.0 && n.is_finite()) {
                return bad("n", format!("must be positive, got {n}"));
            }
        }
        if let Some(m) = self.m {
            if !(m >= 1.0 && m.fract() == 0.0 && m <= u64::MAX as f64) {
                return bad("m", format!("must be a positive integer, got {m}"));
            }
        }
        if let Some(eps) = self.eps {
            if !(eps > 0.0 && eps <= 1.0) {
                return bad("eps", format!("must lie in (0, 1], got {eps}"));
            }
        }
        if let (Some(n), Some(m), Some(eps)) = (self.n, self.m, self.eps) {
            if (n - m * eps).abs() > 1e-12 * n {
                return bad("n", format!("N = {n} disagrees with M·ε = {}", m * eps));
            }
        }
        if self.replicates == 0 {
            return bad("replicates", "must be at least 1".into());
        }
        if self.command == Command::Spade && self.seed.is_none() {
            return bad("seed", "spade needs an explicit --seed".into());
        }
        if self.mu_max == 0 {
            return bad("mu_max", "must be at least 1".into());
        }
        Ok(())
    }

    /// `N` as given, else `M·ε`, else 1.
    pub fn photons(&self) -> f64 {
        self.n.unwrap_or_else(|| match (self.m, self.eps) {
            (Some(m), Some(eps)) => m * eps,
            _ => 1.0,
        })
    }
}
