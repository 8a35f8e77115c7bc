//! Command-line surface. Flags override values from `--config`, which in
//! turn override the built-in defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "compact-tik", version, about = "Tikhonov and coordinate-network reconstruction for parallel-beam CT")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the Shepp-Logan phantom.
    Phantom(PhantomArgs),
    /// Forward project the phantom, optionally adding noise.
    Sinogram(SinogramArgs),
    /// Single Tikhonov reconstruction.
    Tikhonov(TikhonovArgs),
    /// Single coordinate-network reconstruction.
    NnReconstruct(NnReconstructArgs),
    /// Noise-level sweep with oracle alpha selection and rate fits.
    Sweep(SweepArgs),
    /// Convergence-rate check on a diagonal operator with a known source condition.
    OracleLinear(OracleArgs),
    /// Fit log-log rates to a results or aggregate table.
    RateFit(RateFitArgs),
    /// Error-versus-delta SVG from a results or aggregate table.
    Plot(PlotArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Phantom(_) => "phantom",
            Command::Sinogram(_) => "sinogram",
            Command::Tikhonov(_) => "tikhonov",
            Command::NnReconstruct(_) => "nn-reconstruct",
            Command::Sweep(_) => "sweep",
            Command::OracleLinear(_) => "oracle-linear",
            Command::RateFit(_) => "rate-fit",
            Command::Plot(_) => "plot",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Phantom(a) => &a.common,
            Command::Sinogram(a) => &a.common,
            Command::Tikhonov(a) => &a.common,
            Command::NnReconstruct(a) => &a.common,
            Command::Sweep(a) => &a.common,
            Command::OracleLinear(a) => &a.common,
            Command::RateFit(a) => &a.common,
            Command::Plot(a) => &a.common,
        }
    }

    /// Applies the subcommand's flags on top of `cfg`.
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.common().seed {
            cfg.seed = seed;
        }
        match self {
            Command::Phantom(a) => a.grid.apply(cfg),
            Command::Sinogram(a) => {
                a.grid.apply(cfg);
                a.geometry.apply(cfg);
                a.noise.apply(cfg);
            }
            Command::Tikhonov(a) => {
                a.grid.apply(cfg);
                a.geometry.apply(cfg);
                a.noise.apply(cfg);
                a.cg.apply(cfg);
                set(&mut cfg.tikhonov.alpha, a.alpha);
                if a.sinogram.is_some() {
                    cfg.input.sinogram.clone_from(&a.sinogram);
                }
            }
            Command::NnReconstruct(a) => {
                a.grid.apply(cfg);
                a.geometry.apply(cfg);
                a.noise.apply(cfg);
                a.nn.apply(cfg);
                set(&mut cfg.nn.alpha, a.alpha);
                if a.sinogram.is_some() {
                    cfg.input.sinogram.clone_from(&a.sinogram);
                }
            }
            Command::Sweep(a) => {
                a.grid.apply(cfg);
                a.geometry.apply(cfg);
                a.cg.apply(cfg);
                a.nn.apply(cfg);
                a.sweep.apply(cfg);
            }
            Command::OracleLinear(a) => {
                set(&mut cfg.oracle.mu, a.mu);
                set(&mut cfg.oracle.n_dim, a.n_dim);
                set(&mut cfg.oracle.delta_min, a.delta_min);
                set(&mut cfg.oracle.delta_max, a.delta_max);
                set(&mut cfg.oracle.n_deltas, a.n_deltas);
            }
            Command::RateFit(a) => {
                if a.table.is_some() {
                    cfg.input.table.clone_from(&a.table);
                }
            }
            Command::Plot(a) => {
                if a.table.is_some() {
                    cfg.input.table.clone_from(&a.table);
                }
                set(&mut cfg.plot.reference_exponent, a.reference_exponent);
            }
        }
    }
}

fn set<T: Clone>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file (a previous run's manifest works too).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed for all random streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to COMPACT_TIK_THREADS, then all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GridOpts {
    /// Image size (n x n pixels).
    #[arg(long)]
    pub n: Option<usize>,
}

impl GridOpts {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.grid.n, self.n);
    }
}

#[derive(Debug, Args)]
pub struct GeometryOpts {
    /// Number of projection angles in [0, pi).
    #[arg(long)]
    pub angles: Option<usize>,
    /// Detector bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Detector half-width.
    #[arg(long)]
    pub det_halfwidth: Option<f64>,
    /// Line sampling step.
    #[arg(long)]
    pub step: Option<f64>,
}

impl GeometryOpts {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.geometry.n_angles, self.angles);
        set(&mut cfg.geometry.det_halfwidth, self.det_halfwidth);
        if self.bins.is_some() {
            cfg.geometry.n_bins = self.bins;
        }
        if self.step.is_some() {
            cfg.geometry.step = self.step;
        }
    }
}

#[derive(Debug, Args)]
pub struct NoiseOpts {
    /// Noise standard deviation.
    #[arg(long, conflicts_with = "snr")]
    pub delta: Option<f64>,
    /// Target data SNR in dB instead of --delta.
    #[arg(long)]
    pub snr: Option<f64>,
}

impl NoiseOpts {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = self.delta {
            cfg.noise.delta = d;
            cfg.noise.snr_db = None;
        }
        if self.snr.is_some() {
            cfg.noise.snr_db = self.snr;
        }
    }
}

#[derive(Debug, Args)]
pub struct CgOpts {
    /// Relative residual tolerance of conjugate gradients.
    #[arg(long)]
    pub cg_tol: Option<f64>,
    #[arg(long)]
    pub cg_max_iter: Option<usize>,
}

impl CgOpts {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.tikhonov.cg_tol, self.cg_tol);
        set(&mut cfg.tikhonov.cg_max_iter, self.cg_max_iter);
    }
}

#[derive(Debug, Args)]
pub struct NnOpts {
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub leaky_slope: Option<f64>,
    /// Entrywise weight bound; `inf` for none.
    #[arg(long)]
    pub weight_bound: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

impl NnOpts {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.nn.hidden_widths, self.hidden.clone());
        set(&mut cfg.nn.leaky_slope, self.leaky_slope);
        set(&mut cfg.nn.weight_bound, self.weight_bound);
        set(&mut cfg.nn.iterations, self.iterations);
        set(&mut cfg.nn.learning_rate, self.lr);
        set(&mut cfg.nn.restarts, self.restarts);
    }
}

#[derive(Debug, Args)]
pub struct SweepOpts {
    /// Methods to run, comma separated (tikhonov, nn).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Explicit noise levels, comma separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub snr_low: Option<f64>,
    #[arg(long)]
    pub snr_high: Option<f64>,
    #[arg(long)]
    pub n_deltas: Option<usize>,
    /// linear or log
    #[arg(long)]
    pub spacing: Option<String>,
    #[arg(long)]
    pub realizations: Option<usize>,
    #[arg(long)]
    pub n_alphas: Option<usize>,
    #[arg(long)]
    pub alpha_decades: Option<f64>,
}

impl SweepOpts {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.sweep.methods, self.methods.clone());
        set(&mut cfg.sweep.deltas, self.deltas.clone());
        set(&mut cfg.sweep.snr_low, self.snr_low);
        set(&mut cfg.sweep.snr_high, self.snr_high);
        set(&mut cfg.sweep.n_deltas, self.n_deltas);
        set(&mut cfg.sweep.spacing, self.spacing.clone());
        set(&mut cfg.sweep.n_realizations, self.realizations);
        set(&mut cfg.sweep.n_alphas, self.n_alphas);
        set(&mut cfg.sweep.alpha_decades, self.alpha_decades);
        if self.snr_low.is_some() || self.snr_high.is_some() || self.n_deltas.is_some() || self.spacing.is_some() {
            // the range flags only take effect when deltas are derived
            if self.deltas.is_none() {
                cfg.sweep.deltas.clear();
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridOpts,
}

#[derive(Debug, Args)]
pub struct SinogramArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridOpts,
    #[command(flatten)]
    pub geometry: GeometryOpts,
    #[command(flatten)]
    pub noise: NoiseOpts,
}

#[derive(Debug, Args)]
pub struct TikhonovArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridOpts,
    #[command(flatten)]
    pub geometry: GeometryOpts,
    #[command(flatten)]
    pub noise: NoiseOpts,
    #[command(flatten)]
    pub cg: CgOpts,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Reconstruct from this sinogram instead of synthesizing data.
    #[arg(long)]
    pub sinogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NnReconstructArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridOpts,
    #[command(flatten)]
    pub geometry: GeometryOpts,
    #[command(flatten)]
    pub noise: NoiseOpts,
    #[command(flatten)]
    pub nn: NnOpts,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Reconstruct from this sinogram instead of synthesizing data.
    #[arg(long)]
    pub sinogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridOpts,
    #[command(flatten)]
    pub geometry: GeometryOpts,
    #[command(flatten)]
    pub cg: CgOpts,
    #[command(flatten)]
    pub nn: NnOpts,
    #[command(flatten)]
    pub sweep: SweepOpts,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Source-condition exponent in [1/2, 1].
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub n_dim: Option<usize>,
    #[arg(long)]
    pub delta_min: Option<f64>,
    #[arg(long)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub n_deltas: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RateFitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Results or aggregate table.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub common: Common,
    /// Results or aggregate table.
    pub table: Option<PathBuf>,
    /// Exponent of the dashed reference line.
    #[arg(long)]
    pub reference_exponent: Option<f64>,
}
