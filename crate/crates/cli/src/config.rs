//! Run configurations. Each subcommand's flags deserialize into one of these,
//! and every JSON report echoes the configuration it came from, so a report can
//! be replayed with `needlet run <file>`.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use needlet_core::correlation::{DEFAULT_FIT_POINTS, DEFAULT_LEMMA_SAMPLES, DEFAULT_SLOPE_TOLERANCE};
use needlet_core::frame::{COVERAGE_FLOOR, DEFAULT_WINDOW_FLOOR, GRID_C0, ILL_CONDITIONED};
use needlet_core::kernel::{
    DEFAULT_CALDERON_SAMPLES, DEFAULT_EPS_TAIL, DEFAULT_THETA_SAMPLES, DEFAULT_UNIFORMITY_RATIO, MIN_LMAX,
};
use needlet_core::numeric::degree_cap;
use needlet_core::simulate::MIN_REPLICAS;
use needlet_core::spectrum::{DEFAULT_ENVELOPE_RATIO_CAP, DEFAULT_GROWTH_TOLERANCE};
use needlet_core::{NeedletProfile, PowerSpectrum, ProfileFamily};

use crate::CliError;

/// Alpha used when neither `--alpha` nor `--spectrum` is given.
pub const DEFAULT_ALPHA: f64 = 3.0;

/// Smallest colatitude emitted by `kernel`; the pole itself is replaced by it.
pub const THETA_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProfileArgs {
    /// Exponent r of the window f(s) = s^r f0(s)
    #[arg(long, default_value_t = 1)]
    pub r: u32,
    /// Base function f0: exp (Mexican, e^-s) or gauss (e^-s^2)
    #[arg(long, default_value = "exp")]
    pub f0: String,
}

impl ProfileArgs {
    pub fn build(&self) -> Result<NeedletProfile, CliError> {
        Ok(NeedletProfile::new(self.r, ProfileFamily::parse(&self.f0)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    /// Power-law spectrum c_l = l^-alpha (3 when no file is given)
    #[arg(long, conflicts_with = "spectrum")]
    pub alpha: Option<f64>,
    /// Spectrum file: JSON family definition or CSV table of l,c_l
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Decay exponent declared for a tabulated CSV spectrum
    #[arg(long, requires = "spectrum")]
    pub spectrum_alpha: Option<f64>,
}

impl SpectrumArgs {
    pub fn build(&self) -> Result<PowerSpectrum, CliError> {
        Ok(match &self.spectrum {
            Some(path) => PowerSpectrum::load(path, self.spectrum_alpha)?,
            None => PowerSpectrum::power_law(self.alpha.unwrap_or(DEFAULT_ALPHA))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct KernelConfig {
    #[command(flatten)]
    #[serde(flatten)]
    pub profile: ProfileArgs,
    /// Scales t (comma separated)
    #[arg(long, value_delimiter = ',', required = true)]
    pub t: Vec<f64>,
    /// Colatitude grid start:stop:count in radians
    #[arg(long, default_value = "0:3.14159:256")]
    pub theta: String,
    /// Relative tail bound used to truncate the kernel series
    #[arg(long, default_value_t = DEFAULT_EPS_TAIL)]
    pub eps_tail: f64,
    /// Write the table here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CorrelationConfig {
    #[command(flatten)]
    #[serde(flatten)]
    pub profile: ProfileArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub spectrum: SpectrumArgs,
    /// Scales t (comma separated)
    #[arg(long, value_delimiter = ',', required = true)]
    pub t: Vec<f64>,
    /// Inner products x.y (comma separated)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub cos_gamma: Vec<f64>,
    /// Geodesic distances d(x, y) in radians (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub distance: Vec<f64>,
    /// Fit the decay in t at every separation and append the reports as JSON
    #[arg(long)]
    pub fit: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateConfig {
    #[command(flatten)]
    #[serde(flatten)]
    pub profile: ProfileArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub spectrum: SpectrumArgs,
    /// Scales t (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub t: Vec<f64>,
    /// Distances along the equator from (pi/2, 0), in radians (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub distance: Vec<f64>,
    /// Explicit point pair theta_x:phi_x:theta_y:phi_y (repeatable)
    #[arg(long)]
    pub pair: Vec<String>,
    /// Independent fields per configuration
    #[arg(long, default_value_t = 4000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (results do not depend on this)
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyConfig {
    #[command(flatten)]
    #[serde(flatten)]
    pub profile: ProfileArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub spectrum: SpectrumArgs,
    /// Decay exponent mu of the lemma coefficients (default 4r - alpha)
    #[arg(long, allow_hyphen_values = true)]
    pub lemma_mu: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1,0.05")]
    pub lemma_t: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
    pub denominator_t: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1,0.05")]
    pub localization_t: Vec<f64>,
    /// Order N of the localization bound
    #[arg(long, default_value_t = 3)]
    pub localization_n: u32,
    #[arg(long, default_value_t = 2000)]
    pub envelope_lmax: usize,
    #[arg(long, default_value_t = 10)]
    pub derivative_lmin: usize,
    #[arg(long, default_value_t = 2000)]
    pub derivative_lmax: usize,
    #[arg(long, default_value_t = 4)]
    pub derivative_kmax: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FrameConfig {
    #[command(flatten)]
    #[serde(flatten)]
    pub profile: ProfileArgs,
    /// Dilations a > 1 (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub a: Vec<f64>,
    /// Band limits L (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "16")]
    pub band_limit: Vec<usize>,
    /// Oversampling factors >= 1 (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub oversample: Vec<f64>,
    /// Finest scale index (default: where the top degree leaves the window)
    #[arg(long, allow_hyphen_values = true)]
    pub j_min: Option<i32>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
    pub j_max: i32,
    /// Write the point set of one level as CSV (first a and oversample)
    #[arg(long)]
    pub export_grid: Option<PathBuf>,
    /// Level to export (default: j_min)
    #[arg(long, allow_hyphen_values = true, requires = "export_grid")]
    pub export_j: Option<i32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A complete, replayable run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Kernel(KernelConfig),
    Correlation(CorrelationConfig),
    Simulate(SimulateConfig),
    Verify(VerifyConfig),
    Frame(FrameConfig),
}

impl RunConfig {
    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            RunConfig::Kernel(c) => c.out.as_ref(),
            RunConfig::Correlation(c) => c.out.as_ref(),
            RunConfig::Simulate(c) => c.out.as_ref(),
            RunConfig::Verify(c) => c.out.as_ref(),
            RunConfig::Frame(c) => c.out.as_ref(),
        }
    }
}

/// Numerical defaults, echoed into every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct Defaults {
    pub eps_tail: f64,
    pub theta_min: f64,
    pub min_lmax: usize,
    pub degree_cap: usize,
    pub fit_points: usize,
    pub slope_tolerance: f64,
    pub uniformity_ratio: f64,
    pub lemma_samples: usize,
    pub theta_samples: usize,
    pub calderon_samples: usize,
    pub envelope_ratio_cap: f64,
    pub growth_tolerance: f64,
    pub min_replicas: usize,
    pub grid_c0: f64,
    pub coverage_floor: f64,
    pub window_floor: f64,
    pub ill_conditioned: f64,
}

impl Defaults {
    pub fn current() -> Self {
        Self {
            eps_tail: DEFAULT_EPS_TAIL,
            theta_min: THETA_MIN,
            min_lmax: MIN_LMAX,
            degree_cap: degree_cap(),
            fit_points: DEFAULT_FIT_POINTS,
            slope_tolerance: DEFAULT_SLOPE_TOLERANCE,
            uniformity_ratio: DEFAULT_UNIFORMITY_RATIO,
            lemma_samples: DEFAULT_LEMMA_SAMPLES,
            theta_samples: DEFAULT_THETA_SAMPLES,
            calderon_samples: DEFAULT_CALDERON_SAMPLES,
            envelope_ratio_cap: DEFAULT_ENVELOPE_RATIO_CAP,
            growth_tolerance: DEFAULT_GROWTH_TOLERANCE,
            min_replicas: MIN_REPLICAS,
            grid_c0: GRID_C0,
            coverage_floor: COVERAGE_FLOOR,
            window_floor: DEFAULT_WINDOW_FLOOR,
            ill_conditioned: ILL_CONDITIONED,
        }
    }
}
