//! Regularized reconstruction on the compact set of bounded-weight networks.
//!
//! The unknown image is the network evaluated at the pixel centers. The
//! weights are fitted by full-batch Adam on
//! `J(w) = ||A x_w - y||^2 + alpha ||x_w||^2`, where the image-space
//! cotangent `2 A^T (A x_w - y) + 2 alpha x_w` is pulled back through the
//! network. With a finite weight bound every Adam step is followed by a
//! projection onto the weight box.

use std::io::Write;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::experiment::substream_seed;
use crate::grid::{pixel_centers, ImageGrid};
use crate::linop::LinearOperator;
use crate::mlp::{
    backward_cached, coords_matrix, forward_cached, mlp_forward, AdamConfig, AdamState, MlpArchitecture, MlpParams,
};

/// Stream index for redrawing dead initializations.
const REDRAW_STREAM: u64 = 0xDEAD;
const MAX_REDRAWS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct NnReconstructionConfig {
    pub architecture: MlpArchitecture,
    /// `None` trains without the weight box.
    pub weight_bound: Option<f64>,
    pub alpha: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Independent initializations; the best final objective wins.
    pub restarts: usize,
    pub trace_path: Option<PathBuf>,
}

impl Default for NnReconstructionConfig {
    fn default() -> Self {
        Self {
            architecture: MlpArchitecture::coordinate(vec![100; 4]).expect("valid default"),
            weight_bound: None,
            alpha: 1e-2,
            iterations: 5000,
            learning_rate: 1e-3,
            seed: 0,
            restarts: 1,
            trace_path: None,
        }
    }
}

impl NnReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if let Some(c) = self.weight_bound {
            if !(c > 0.0) {
                return Err(Error::invalid(format!("weight bound must be positive, got {c}")));
            }
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnReconstruction {
    /// Network image at the best iterate.
    pub image: ImageGrid,
    pub params: MlpParams,
    /// `J` at every iterate, starting with the initialization.
    pub objective_trace: Vec<f64>,
    pub best_iteration: usize,
    pub final_objective: f64,
    /// Initializations discarded because the output was zero on the whole grid.
    pub init_redraws: usize,
}

/// Fits the network to `data` through `op`, whose domain must be the
/// `nx * ny` pixel grid. Returns the best iterate, not the last one.
pub fn reconstruct_nn(
    cfg: &NnReconstructionConfig,
    op: &dyn LinearOperator,
    data: &[f64],
    nx: usize,
    ny: usize,
) -> Result<NnReconstruction> {
    cfg.validate()?;
    if op.domain_dim() != nx * ny {
        return Err(Error::invalid(format!("operator domain {} does not match {nx}x{ny} grid", op.domain_dim())));
    }
    if data.len() != op.range_dim() {
        return Err(Error::invalid(format!("data has length {}, operator range is {}", data.len(), op.range_dim())));
    }
    let coords = coords_matrix(&pixel_centers(nx, ny)?);

    let mut best: Option<NnReconstruction> = None;
    for restart in 0..cfg.restarts {
        let seed = if restart == 0 { cfg.seed } else { substream_seed(cfg.seed, &[restart as u64]) };
        let run = fit_once(cfg, seed, op, data, &coords, nx, ny)?;
        if best.as_ref().is_none_or(|b| run.final_objective < b.final_objective) {
            best = Some(run);
        }
    }
    let rec = best.expect("at least one restart");
    if let Some(path) = &cfg.trace_path {
        write_trace(path, &rec.objective_trace)?;
    }
    Ok(rec)
}

fn fit_once(
    cfg: &NnReconstructionConfig,
    seed: u64,
    op: &dyn LinearOperator,
    data: &[f64],
    coords: &ndarray::Array2<f64>,
    nx: usize,
    ny: usize,
) -> Result<NnReconstruction> {
    let (mut params, init_redraws) = live_init(cfg, seed, coords)?;
    let mut adam = AdamState::new(&params, AdamConfig::with_learning_rate(cfg.learning_rate));

    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let mut best_obj = f64::INFINITY;
    let mut best_iter = 0;
    let mut best_params = params.clone();
    let mut best_image = Vec::new();

    for it in 0..=cfg.iterations {
        let cache = forward_cached(&params, coords.view())?;
        let x = cache.output();
        let residual: Vec<f64> = op.apply(x)?.iter().zip(data).map(|(a, y)| a - y).collect();
        let fit: f64 = residual.iter().map(|r| r * r).sum();
        let pen: f64 = x.iter().map(|v| v * v).sum();
        let obj = fit + cfg.alpha * pen;
        if !obj.is_finite() {
            return Err(Error::Diverged { iteration: it, message: format!("objective is {obj}") });
        }
        trace.push(obj);
        if obj < best_obj {
            best_obj = obj;
            best_iter = it;
            best_params.clone_from(&params);
            best_image = x.to_vec();
        }
        if it == cfg.iterations {
            break;
        }

        let mut cot = op.apply_adjoint(&residual)?;
        for (c, v) in cot.iter_mut().zip(x) {
            *c = 2.0 * *c + 2.0 * cfg.alpha * v;
        }
        let grads = backward_cached(&params, &cache, &cot)?;
        adam.step(&mut params, &grads).map_err(|e| match e {
            Error::NumericalFailure(message) => Error::Diverged { iteration: it, message },
            other => other,
        })?;
        params.project();
    }

    Ok(NnReconstruction {
        image: ImageGrid::new(nx, ny, best_image)?,
        params: best_params,
        objective_trace: trace,
        best_iteration: best_iter,
        final_objective: best_obj,
        init_redraws,
    })
}

/// Glorot draw whose ReLU output is positive somewhere on the grid. With
/// zero biases a sizeable fraction of deep draws output 0 everywhere, and
/// then every gradient vanishes; those are redrawn from derived seeds.
fn live_init(cfg: &NnReconstructionConfig, seed: u64, coords: &ndarray::Array2<f64>) -> Result<(MlpParams, usize)> {
    for k in 0..=MAX_REDRAWS {
        let s = if k == 0 { seed } else { substream_seed(seed, &[REDRAW_STREAM, k as u64]) };
        let mut params = MlpParams::init(cfg.architecture.clone(), s)?.with_bound(cfg.weight_bound)?;
        params.project();
        if mlp_forward(&params, coords.view())?.iter().any(|v| *v > 0.0) {
            return Ok((params, k));
        }
    }
    Err(Error::numerical(format!("every one of {} initializations outputs zero on the grid", MAX_REDRAWS + 1)))
}

/// Two-column `iteration objective` table.
pub fn write_trace(path: &std::path::Path, trace: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iteration objective")?;
    for (i, v) in trace.iter().enumerate() {
        writeln!(out, "{i} {v:e}")?;
    }
    out.flush()?;
    Ok(())
}
