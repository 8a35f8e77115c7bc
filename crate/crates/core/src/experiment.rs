//! Noise generation, SNR bookkeeping, noise-level sweeps with oracle
//! parameter selection, log-log rate fits and the diagonal-operator oracle.
//!
//! Randomness: every stream is a ChaCha8 generator seeded from a base seed
//! mixed with cell indices by [`substream_seed`] (SplitMix64 finalizer).
//! Standard normals come from the Box-Muller transform of two uniforms.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::shepp_logan;
use crate::linop::{CgOptions, DiagonalOperator, LinearOperator};
use crate::nnsolver::{reconstruct_nn, NnReconstructionConfig};
use crate::norm;
use crate::radon::{RadonGeometry, RadonOperator};
use crate::tikhonov::{solve_tikhonov, TikhonovProblem};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and cell indices.
pub fn substream_seed(base: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(splitmix64(base), |h, &i| splitmix64(h ^ splitmix64(i.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// Standard normal variates by Box-Muller over a seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn fill(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

/// `y + delta n` with `n` i.i.d. standard normal.
pub fn add_noise(y: &[f64], spec: NoiseSpec) -> Result<Vec<f64>> {
    if !(spec.delta >= 0.0 && spec.delta.is_finite()) {
        return Err(Error::invalid(format!("noise level must be non-negative, got {}", spec.delta)));
    }
    if spec.delta == 0.0 {
        return Ok(y.to_vec());
    }
    let mut normals = NormalStream::new(spec.seed);
    Ok(y.iter().map(|v| v + spec.delta * normals.sample()).collect())
}

/// `20 log10(||y|| / (sqrt(M) delta))`.
pub fn snr_db(y: &[f64], delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    let n = norm(y);
    if !(n > 0.0) {
        return Err(Error::invalid("signal has zero norm"));
    }
    Ok(20.0 * (n / ((y.len() as f64).sqrt() * delta)).log10())
}

/// Noise level at which `y` has the given SNR in decibels.
pub fn delta_for_snr(y: &[f64], target_db: f64) -> Result<f64> {
    let n = norm(y);
    if !(n > 0.0) {
        return Err(Error::invalid("signal has zero norm"));
    }
    Ok(n / ((y.len() as f64).sqrt() * 10f64.powf(target_db / 20.0)))
}

/// How noise levels are placed between the two SNR endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaSpacing {
    /// Equispaced in `delta`.
    Linear,
    /// Equispaced in `log delta`, i.e. in decibels.
    Log,
}

impl std::str::FromStr for DeltaSpacing {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "log" => Ok(Self::Log),
            other => Err(Error::invalid(format!("unknown delta spacing `{other}` (linear|log)"))),
        }
    }
}

impl std::fmt::Display for DeltaSpacing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Log => "log",
        })
    }
}

/// `n` strictly decreasing noise levels spanning SNRs `[snr_low, snr_high]`.
pub fn deltas_for_snr_range(
    y: &[f64],
    snr_low: f64,
    snr_high: f64,
    n: usize,
    spacing: DeltaSpacing,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("need at least one noise level"));
    }
    if !(snr_low < snr_high) && n > 1 {
        return Err(Error::invalid(format!("SNR range [{snr_low}, {snr_high}] is empty")));
    }
    let hi = delta_for_snr(y, snr_low)?;
    let lo = delta_for_snr(y, snr_high)?;
    if n == 1 {
        return Ok(vec![hi]);
    }
    let last = (n - 1) as f64;
    Ok((0..n)
        .map(|k| {
            let t = k as f64 / last;
            match spacing {
                DeltaSpacing::Linear => hi + t * (lo - hi),
                DeltaSpacing::Log => (hi.ln() + t * (lo.ln() - hi.ln())).exp(),
            }
        })
        .collect())
}

/// `n` log-spaced values `center * 10^e`, `e` uniform in `[-decades, decades]`.
pub fn alpha_grid(center: f64, n: usize, decades: f64) -> Result<Vec<f64>> {
    if !(center > 0.0) || n == 0 || !(decades >= 0.0) {
        return Err(Error::invalid("alpha grid needs center > 0, n >= 1 and decades >= 0"));
    }
    if n == 1 {
        return Ok(vec![center]);
    }
    let last = (n - 1) as f64;
    Ok((0..n).map(|i| center * 10f64.powf(decades * (2.0 * i as f64 / last - 1.0))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Tikhonov,
    Nn(NnReconstructionConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Tikhonov => "tikhonov",
            Method::Nn(_) => "nn",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n: usize,
    pub geometry: RadonGeometry,
    /// Strictly decreasing noise levels.
    pub deltas: Vec<f64>,
    pub n_realizations: usize,
    pub n_alphas: usize,
    /// Half-width of the alpha grid around `alpha = delta`, in decades.
    pub alpha_decades: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub cg: CgOptions,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() || self.n_realizations == 0 || self.n_alphas == 0 || self.methods.is_empty() {
            return Err(Error::invalid("sweep needs nonempty deltas, realizations, alphas and methods"));
        }
        if self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::invalid("noise levels must be positive"));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("noise levels must be strictly decreasing"));
        }
        for m in &self.methods {
            if let Method::Nn(c) = m {
                c.validate()?;
            }
        }
        Ok(())
    }
}

/// One `(method, delta, realization)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub method: String,
    pub delta_index: usize,
    pub delta: f64,
    pub realization: usize,
    pub seed: u64,
    pub snr_db: f64,
    pub alphas: Vec<f64>,
    /// `||x_true - x_hat||` per alpha, or the failure message.
    pub errors: Vec<std::result::Result<f64, String>>,
    pub best_alpha: Option<f64>,
    pub best_error: Option<f64>,
}

impl ExperimentRecord {
    fn finish(mut self) -> Self {
        let mut best: Option<(f64, f64)> = None;
        for (a, e) in self.alphas.iter().zip(&self.errors) {
            if let Ok(e) = e {
                // strict comparison keeps the smallest alpha on ties
                if best.is_none_or(|(_, b)| *e < b) {
                    best = Some((*a, *e));
                }
            }
        }
        self.best_alpha = best.map(|b| b.0);
        self.best_error = best.map(|b| b.1);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub delta: f64,
    pub mean_error: f64,
    /// Population standard deviation across realizations.
    pub std_error: f64,
    pub n_ok: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual: f64,
    pub n_points: usize,
}

impl RateFit {
    /// `exp(intercept) * delta^slope`.
    pub fn predict(&self, delta: f64) -> f64 {
        self.intercept.exp() * delta.powf(self.slope)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<ExperimentRecord>,
    pub aggregates: Vec<AggregateRow>,
    /// Per method; `None` when fewer than two noise levels survived.
    pub fits: Vec<(String, Option<RateFit>)>,
    /// `(method, delta)` rows with no successful reconstruction.
    pub failed_deltas: Vec<(String, f64)>,
}

/// `mean` and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Ordinary least squares of `ln(error)` on `ln(delta)`.
pub fn fit_rate(deltas: &[f64], errors: &[f64]) -> Result<RateFit> {
    if deltas.len() != errors.len() {
        return Err(Error::invalid("deltas and errors differ in length"));
    }
    if deltas.len() < 2 {
        return Err(Error::invalid("rate fit needs at least two points"));
    }
    if deltas.iter().chain(errors).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("rate fit needs positive finite deltas and errors"));
    }
    let xs: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs at least two distinct deltas"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>().sqrt();
    Ok(RateFit { slope, intercept, residual, n_points: xs.len() })
}

/// Runs the noise-level sweep on the Shepp-Logan phantom.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let truth = shepp_logan(cfg.n, cfg.n)?;
    let op = RadonOperator::new(cfg.geometry.clone(), cfg.n, cfg.n)?;
    run_sweep_on(cfg, &op, truth.values(), cfg.n, cfg.n)
}

/// Sweep against an arbitrary operator and ground truth. Data are
/// `op(truth)` plus noise; a failed reconstruction is recorded in its cell
/// and the sweep carries on.
pub fn run_sweep_on(
    cfg: &SweepConfig,
    op: &dyn LinearOperator,
    truth: &[f64],
    nx: usize,
    ny: usize,
) -> Result<SweepResult> {
    cfg.validate()?;
    let y = op.apply(truth)?;
    let n_alpha = cfg.n_alphas;

    struct Cell {
        delta_index: usize,
        realization: usize,
        seed: u64,
        data: Vec<f64>,
        alphas: Vec<f64>,
    }
    let mut cells = Vec::new();
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let alphas = alpha_grid(delta, n_alpha, cfg.alpha_decades)?;
        for r in 0..cfg.n_realizations {
            let seed = substream_seed(cfg.seed, &[di as u64, r as u64]);
            let data = add_noise(&y, NoiseSpec { delta, seed })?;
            cells.push(Cell { delta_index: di, realization: r, seed, data, alphas: alphas.clone() });
        }
    }

    let mut records = Vec::new();
    for method in &cfg.methods {
        let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..n_alpha).map(move |a| (c, a))).collect();
        let errors: Vec<std::result::Result<f64, String>> = jobs
            .par_iter()
            .map(|&(c, a)| {
                let cell = &cells[c];
                reconstruct(method, op, &cell.data, cell.alphas[a], nx, ny, &cfg.cg)
                    .and_then(|x| {
                        let err = x.iter().zip(truth).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
                        if err.is_finite() {
                            Ok(err)
                        } else {
                            Err(Error::numerical("non-finite error"))
                        }
                    })
                    .map_err(|e| e.to_string())
            })
            .collect();
        for (c, cell) in cells.iter().enumerate() {
            let delta = cfg.deltas[cell.delta_index];
            let rec = ExperimentRecord {
                method: method.name().to_string(),
                delta_index: cell.delta_index,
                delta,
                realization: cell.realization,
                seed: cell.seed,
                snr_db: snr_db(&y, delta)?,
                alphas: cell.alphas.clone(),
                errors: errors[c * n_alpha..(c + 1) * n_alpha].to_vec(),
                best_alpha: None,
                best_error: None,
            };
            records.push(rec.finish());
        }
    }
    Ok(summarize(cfg, records))
}

fn reconstruct(
    method: &Method,
    op: &dyn LinearOperator,
    data: &[f64],
    alpha: f64,
    nx: usize,
    ny: usize,
    cg: &CgOptions,
) -> Result<Vec<f64>> {
    match method {
        Method::Tikhonov => {
            let p = TikhonovProblem::new(op, data, alpha)?.with_cg(*cg);
            Ok(solve_tikhonov(&p)?.x)
        }
        Method::Nn(template) => {
            let nn = NnReconstructionConfig { alpha, trace_path: None, ..template.clone() };
            Ok(reconstruct_nn(&nn, op, data, nx, ny)?.image.into_values())
        }
    }
}

fn summarize(cfg: &SweepConfig, records: Vec<ExperimentRecord>) -> SweepResult {
    let mut aggregates = Vec::new();
    let mut fits = Vec::new();
    let mut failed_deltas = Vec::new();
    for method in &cfg.methods {
        let name = method.name();
        let mut fit_d = Vec::new();
        let mut fit_e = Vec::new();
        for (di, &delta) in cfg.deltas.iter().enumerate() {
            let best: Vec<f64> = records
                .iter()
                .filter(|r| r.method == name && r.delta_index == di)
                .filter_map(|r| r.best_error)
                .collect();
            if best.is_empty() {
                failed_deltas.push((name.to_string(), delta));
                continue;
            }
            let (mean, std) = mean_std(&best);
            aggregates.push(AggregateRow {
                method: name.to_string(),
                delta,
                mean_error: mean,
                std_error: std,
                n_ok: best.len(),
            });
            fit_d.push(delta);
            fit_e.push(mean);
        }
        fits.push((name.to_string(), fit_rate(&fit_d, &fit_e).ok()));
    }
    SweepResult { records, aggregates, fits, failed_deltas }
}

/// `delta,seed,alpha,error,snr_db,method`, one row per reconstruction.
pub fn results_table(records: &[ExperimentRecord]) -> String {
    let mut s = String::from("delta,seed,alpha,error,snr_db,method\n");
    for r in records {
        for (a, e) in r.alphas.iter().zip(&r.errors) {
            let err = match e {
                Ok(v) => v.to_string(),
                Err(_) => "NaN".to_string(),
            };
            writeln!(s, "{},{},{},{},{},{}", r.delta, r.seed, a, err, r.snr_db, r.method).unwrap();
        }
    }
    s
}

/// `delta,mean_error,std_error,method`.
pub fn aggregate_table(rows: &[AggregateRow]) -> String {
    let mut s = String::from("delta,mean_error,std_error,method\n");
    for r in rows {
        writeln!(s, "{},{},{},{}", r.delta, r.mean_error, r.std_error, r.method).unwrap();
    }
    s
}

/// `method,slope,intercept,residual`.
pub fn fits_table(fits: &[(String, Option<RateFit>)]) -> String {
    let mut s = String::from("method,slope,intercept,residual\n");
    for (m, f) in fits {
        match f {
            Some(f) => writeln!(s, "{m},{},{},{}", f.slope, f.intercept, f.residual).unwrap(),
            None => writeln!(s, "{m},NaN,NaN,NaN").unwrap(),
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOracleResult {
    pub mu: f64,
    pub deltas: Vec<f64>,
    pub alphas: Vec<f64>,
    /// `||x_hat - x_dagger||` per noise level.
    pub errors: Vec<f64>,
    /// `||x_alpha(y) - x_dagger||` with noise-free data, per noise level.
    pub noise_free_errors: Vec<f64>,
    /// `||y_delta - y||` per noise level.
    pub noise_norms: Vec<f64>,
    pub fit: RateFit,
}

/// Tikhonov on `A = diag(1/k)` with an exact source condition
/// `x_dagger = (A^T A)^mu v`, `alpha = delta^(2/(2mu+1))`.
pub fn linear_oracle(mu: f64, n_dim: usize, deltas: &[f64], seed: u64) -> Result<LinearOracleResult> {
    if !(0.5..=1.0).contains(&mu) {
        return Err(Error::invalid(format!("mu must lie in [1/2, 1], got {mu}")));
    }
    if n_dim < 10 {
        return Err(Error::invalid("oracle dimension must be at least 10"));
    }
    if deltas.len() < 2 || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::invalid("oracle needs at least two positive noise levels"));
    }
    let (lo, hi) = deltas.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &d| (l.min(d), h.max(d)));
    if hi / lo < 1e3 * (1.0 - 1e-12) {
        return Err(Error::invalid("oracle noise levels must span at least three decades"));
    }

    let op = DiagonalOperator::harmonic(n_dim)?;
    let mut v = NormalStream::new(substream_seed(seed, &[u64::MAX])).fill(n_dim);
    let vn = norm(&v);
    v.iter_mut().for_each(|x| *x /= vn);
    let x_dagger: Vec<f64> = op.singular_values().iter().zip(&v).map(|(s, vk)| s.powf(2.0 * mu) * vk).collect();
    let y = op.apply(&x_dagger)?;
    let cg = CgOptions { tol: 1e-13, max_iter: 20 * n_dim };

    let mut alphas = Vec::new();
    let mut errors = Vec::new();
    let mut noise_free_errors = Vec::new();
    let mut noise_norms = Vec::new();
    for (i, &delta) in deltas.iter().enumerate() {
        let alpha = crate::rules::alpha_of_delta(delta, crate::rules::AlphaRule::Holder { mu }, 1.0)?;
        let y_delta = add_noise(&y, NoiseSpec { delta, seed: substream_seed(seed, &[i as u64]) })?;
        let x_hat = solve_tikhonov(&TikhonovProblem::new(&op, &y_delta, alpha)?.with_cg(cg))?.x;
        let x_clean = solve_tikhonov(&TikhonovProblem::new(&op, &y, alpha)?.with_cg(cg))?.x;
        let dist = |a: &[f64]| a.iter().zip(&x_dagger).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        alphas.push(alpha);
        errors.push(dist(&x_hat));
        noise_free_errors.push(dist(&x_clean));
        noise_norms.push(y_delta.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
    }
    let fit = fit_rate(deltas, &errors)?;
    Ok(LinearOracleResult { mu, deltas: deltas.to_vec(), alphas, errors, noise_free_errors, noise_norms, fit })
}

/// `n` log-spaced values from `lo` to `hi`, descending.
pub fn log_spaced_desc(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    (0..n).map(|k| (hi.ln() + (lo.ln() - hi.ln()) * k as f64 / (n - 1) as f64).exp()).collect()
}
