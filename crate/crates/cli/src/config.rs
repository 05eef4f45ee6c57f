//! Experiment config: one TOML file, one optional table per subcommand.

use std::path::Path;

use serde::Deserialize;

use kfp_core::coefficients::{CoefficientField, CoefficientKind, SmoothFamily};
use kfp_core::maximal::CylinderFamily;
use kfp_core::norms::MixedNormSpec;
use kfp_core::solver::{AnalyticSource, QuadratureOptions};
use kfp_core::weights::IntervalFamily;
use kfp_core::GridSpec;

use crate::failure::Failure;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Root seed; every random stream is derived from it.
    #[serde(default)]
    pub seed: u64,
    /// Thread count; unset means all available cores.
    #[serde(default)]
    pub workers: Option<usize>,
    pub solve: Option<SolveSection>,
    pub verify_estimate: Option<VerifySection>,
    pub geometry_test: Option<GeometrySection>,
    pub weights_ap: Option<WeightsSection>,
    pub maximal_bench: Option<MaximalSection>,
    pub vmo: Option<VmoSection>,
    pub report: Option<ReportSection>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config("config.read", format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::config("config.parse", e.to_string()))
    }
}

/// `a = value·I` and friends; `delta` is the declared ellipticity.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Scalar { value: f64 },
    SinV { eps: f64, delta: f64 },
    Holder { eps: f64, kappa: f64, delta: f64 },
    TimeSin { eps: f64, delta: f64 },
    LandauLike { mu1: f64, mu2: f64, delta: f64 },
}

impl CoefficientConfig {
    pub fn build(&self, d: usize) -> kfp_core::Result<CoefficientField> {
        let smooth = |family, delta| CoefficientField::new(d, CoefficientKind::SmoothVariable(family), delta);
        match *self {
            Self::Scalar { value } => CoefficientField::scalar(d, value),
            Self::SinV { eps, delta } => smooth(SmoothFamily::SinV { eps }, delta),
            Self::Holder { eps, kappa, delta } => smooth(SmoothFamily::Holder { eps, kappa }, delta),
            Self::TimeSin { eps, delta } => smooth(SmoothFamily::TimeSin { eps }, delta),
            Self::LandauLike { mu1, mu2, delta } => CoefficientField::new(d, CoefficientKind::LandauLike { mu1, mu2 }, delta),
        }
    }
}

fn default_dump() -> String {
    "solution.kfpd".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub grid: GridSpec,
    pub lambda: f64,
    pub coefficient: CoefficientConfig,
    pub source: AnalyticSource,
    #[serde(default)]
    pub quadrature: QuadratureOptions,
    /// File name inside the output directory.
    #[serde(default = "default_dump")]
    pub output: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub id: String,
    pub source: AnalyticSource,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    /// Number of sources drawn from the standard random corpus.
    #[serde(default)]
    pub standard: u64,
    #[serde(default)]
    pub cases: Vec<CaseConfig>,
}

fn unit() -> String {
    "unit".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub grid: GridSpec,
    pub lambda: f64,
    pub coefficient: CoefficientConfig,
    /// Defaults to unweighted `L_2`.
    #[serde(default)]
    pub norm: Option<MixedNormSpec>,
    #[serde(default = "unit")]
    pub weight_id: String,
    #[serde(default)]
    pub corpus: CorpusConfig,
    /// Scalar coefficients `δ·I` to sweep.
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// Frozen cap on the ratio; any row above it fails the run.
    #[serde(default)]
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub d: usize,
    pub triples: usize,
    pub sandwich: usize,
    pub doubling_configs: usize,
    pub doubling_samples: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            d: 1,
            triples: 100_000,
            sandwich: 10_000,
            doubling_configs: 200,
            doubling_samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticSection {
    pub alpha: f64,
    pub p: f64,
    pub configs: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    100_000
}

fn default_classes() -> Vec<f64> {
    vec![2.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    /// Exponents of `|x|^α` weights.
    pub alphas: Vec<f64>,
    #[serde(default = "default_classes")]
    pub classes: Vec<f64>,
    #[serde(default)]
    pub family: IntervalFamily,
    #[serde(default)]
    pub kinetic: Option<KineticSection>,
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaximalSection {
    pub grid: GridSpec,
    pub family: CylinderFamily,
    pub fields: u64,
    #[serde(default = "three")]
    pub max_mode: usize,
    #[serde(default = "three")]
    pub bumps: usize,
    #[serde(default)]
    pub norm: Option<MixedNormSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub t: f64,
    pub h: f64,
    pub m: i64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { t: 0.0, h: 0.5, m: 2 }
    }
}

fn one() -> usize {
    1
}

fn r_range() -> (f64, f64) {
    (1e-3, 10.0)
}

fn forty() -> usize {
    40
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmoSection {
    #[serde(default = "one")]
    pub d: usize,
    pub coefficient: CoefficientConfig,
    pub radii: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub probes: ProbeConfig,
    /// Thresholds for the radius search.
    #[serde(default)]
    pub gamma0: Vec<f64>,
    #[serde(default = "r_range")]
    pub r_range: (f64, f64),
    #[serde(default = "forty")]
    pub iters: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// CSV files, relative to the output directory unless absolute.
    pub inputs: Vec<String>,
}
