//! Run configuration. Files are TOML: `key = value` lines under `[section]`
//! headers. Every field has a default, unknown keys are rejected, and the
//! resolved configuration (all defaults filled in) is what gets written to
//! run manifests.

use std::path::{Path, PathBuf};

use compact_tik::experiment::DeltaSpacing;
use compact_tik::mlp::DEFAULT_LEAKY_SLOPE;
use compact_tik::radon::RadonGeometry;
use compact_tik::{CgOptions, MlpArchitecture, NnReconstructionConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed; every random stream of a run is derived from it.
    pub seed: u64,
    pub grid: GridSection,
    pub geometry: GeometrySection,
    pub noise: NoiseSection,
    pub tikhonov: TikhonovSection,
    pub nn: NnSection,
    pub sweep: SweepSection,
    pub oracle: OracleSection,
    pub plot: PlotSection,
    pub input: InputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Image is `n x n` on `[-1, 1]^2`.
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub n_angles: usize,
    /// Detector covers `[-det_halfwidth, det_halfwidth]`.
    pub det_halfwidth: f64,
    /// Defaults to `ceil(n * det_halfwidth)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_bins: Option<usize>,
    /// Line sampling step; defaults to the pixel width `2 / n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self { n_angles: 50, det_halfwidth: std::f64::consts::SQRT_2, n_bins: None, step: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// Standard deviation of the additive white noise.
    pub delta: f64,
    /// Target data SNR in dB; replaced by the matching `delta` on resolve.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TikhonovSection {
    pub alpha: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for TikhonovSection {
    fn default() -> Self {
        let cg = CgOptions::default();
        Self { alpha: 1e-2, cg_tol: cg.tol, cg_max_iter: cg.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnSection {
    pub hidden_widths: Vec<usize>,
    pub leaky_slope: f64,
    /// Entrywise bound on weights and biases; `inf` trains unconstrained.
    pub weight_bound: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub restarts: usize,
}

impl Default for NnSection {
    fn default() -> Self {
        let d = NnReconstructionConfig::default();
        Self {
            hidden_widths: d.architecture.hidden_widths.clone(),
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            weight_bound: f64::INFINITY,
            alpha: d.alpha,
            iterations: d.iterations,
            learning_rate: d.learning_rate,
            restarts: d.restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub methods: Vec<String>,
    /// Explicit noise levels, strictly decreasing. When empty they are
    /// derived from the SNR range and written back on resolve.
    pub deltas: Vec<f64>,
    pub snr_low: f64,
    pub snr_high: f64,
    pub n_deltas: usize,
    pub spacing: String,
    pub n_realizations: usize,
    pub n_alphas: usize,
    /// Half-width of the alpha grid around `alpha = delta`, in decades.
    pub alpha_decades: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            methods: vec!["tikhonov".into(), "nn".into()],
            deltas: Vec::new(),
            snr_low: 16.58,
            snr_high: 42.60,
            n_deltas: 10,
            spacing: DeltaSpacing::Linear.to_string(),
            n_realizations: 5,
            n_alphas: 20,
            alpha_decades: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub mu: f64,
    pub n_dim: usize,
    pub delta_min: f64,
    pub delta_max: f64,
    pub n_deltas: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { mu: 1.0, n_dim: 200, delta_min: 1e-6, delta_max: 1e-2, n_deltas: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSection {
    pub reference_exponent: f64,
}

impl Default for PlotSection {
    fn default() -> Self {
        Self { reference_exponent: 2.0 / 3.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    /// Sinogram file for `tikhonov` / `nn-reconstruct`; synthesized from
    /// the phantom when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sinogram: Option<PathBuf>,
    /// Results or aggregate table for `rate-fit` / `plot`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Invalid(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fills in the size-dependent geometry defaults.
    pub fn resolve_geometry(&mut self) {
        let n = self.grid.n;
        let h = self.geometry.det_halfwidth;
        self.geometry.n_bins.get_or_insert_with(|| (n as f64 * h).ceil().max(1.0) as usize);
        self.geometry.step.get_or_insert(2.0 / n.max(1) as f64);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid.n == 0 {
            return Err(CliError::Invalid("grid.n must be at least 1".into()));
        }
        if !(self.noise.delta >= 0.0 && self.noise.delta.is_finite()) {
            return Err(CliError::Invalid(format!("noise.delta must be nonnegative, got {}", self.noise.delta)));
        }
        if !(self.tikhonov.alpha > 0.0) || !(self.tikhonov.cg_tol > 0.0) || self.tikhonov.cg_max_iter == 0 {
            return Err(CliError::Invalid("tikhonov.alpha, cg_tol and cg_max_iter must be positive".into()));
        }
        if self.sweep.methods.is_empty() {
            return Err(CliError::Invalid("sweep.methods must not be empty".into()));
        }
        for m in &self.sweep.methods {
            if m != "tikhonov" && m != "nn" {
                return Err(CliError::Invalid(format!("unknown method {m:?}, expected tikhonov or nn")));
            }
        }
        self.spacing()?;
        if !(self.nn.weight_bound > 0.0) {
            return Err(CliError::Invalid(format!("nn.weight_bound must be positive, got {}", self.nn.weight_bound)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> Result<DeltaSpacing, CliError> {
        self.sweep.spacing.parse().map_err(|e: compact_tik::error::Error| CliError::Invalid(e.to_string()))
    }

    pub fn geometry(&self) -> Result<RadonGeometry, CliError> {
        let mut c = self.clone();
        c.resolve_geometry();
        let g = &c.geometry;
        Ok(RadonGeometry::new(g.n_angles, g.n_bins.unwrap(), g.det_halfwidth, g.step.unwrap())?)
    }

    pub fn cg(&self) -> CgOptions {
        CgOptions { tol: self.tikhonov.cg_tol, max_iter: self.tikhonov.cg_max_iter }
    }

    /// NN settings; the initialization seed is supplied by the caller.
    pub fn nn_config(&self, seed: u64) -> Result<NnReconstructionConfig, CliError> {
        let arch = MlpArchitecture::new(2, self.nn.hidden_widths.clone(), self.nn.leaky_slope)?;
        let bound = self.nn.weight_bound;
        let cfg = NnReconstructionConfig {
            architecture: arch,
            weight_bound: if bound.is_finite() { Some(bound) } else { None },
            alpha: self.nn.alpha,
            iterations: self.nn.iterations,
            learning_rate: self.nn.learning_rate,
            seed,
            restarts: self.nn.restarts,
            trace_path: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
