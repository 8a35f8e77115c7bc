//! Coordinate MLP with leaky-ReLU hidden layers and a ReLU output.
//!
//! The network maps a point of the domain to one non-negative value.
//! Bounding every weight and bias by `c` in absolute value gives the
//! compact family of functions the regularized problem is posed on;
//! [`project_weights`] enforces that bound.
//!
//! At activation kinks the derivative is the negative-side slope: 0 for the
//! output ReLU and the leak slope for hidden layers.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub leaky_slope: f64,
}

impl MlpArchitecture {
    /// Two coordinate inputs, the given hidden widths, default leak.
    pub fn coordinate(hidden_widths: Vec<usize>) -> Result<Self> {
        Self::new(2, hidden_widths, DEFAULT_LEAKY_SLOPE)
    }

    pub fn new(input_dim: usize, hidden_widths: Vec<usize>, leaky_slope: f64) -> Result<Self> {
        let arch = Self { input_dim, hidden_widths, leaky_slope };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input dimension must be at least 1"));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::invalid(format!("hidden widths must be positive: {:?}", self.hidden_widths)));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::invalid(format!("leaky slope must lie in (0, 1), got {}", self.leaky_slope)));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        1
    }

    /// `[input, hidden..., 1]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden_widths.len() + 2);
        s.push(self.input_dim);
        s.extend(&self.hidden_widths);
        s.push(1);
        s
    }

    /// Total number of weights and biases.
    pub fn param_count(&self) -> usize {
        self.layer_sizes().windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

/// One affine layer: `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl LayerParams {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { weights: Array2::zeros((rows, cols)), biases: Array1::zeros(rows) }
    }

    fn slices(&self) -> [&[f64]; 2] {
        [self.weights.as_slice().expect("standard layout"), self.biases.as_slice().expect("standard layout")]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 2] {
        [self.weights.as_slice_mut().expect("standard layout"), self.biases.as_slice_mut().expect("standard layout")]
    }
}

/// Gradient with the same layout as [`MlpParams::layers`].
pub type MlpGradient = Vec<LayerParams>;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub arch: MlpArchitecture,
    pub layers: Vec<LayerParams>,
    /// Infinity-norm bound on every weight and bias; `None` is unbounded.
    pub weight_bound: Option<f64>,
}

impl MlpParams {
    pub fn zeros(arch: MlpArchitecture) -> Result<Self> {
        arch.validate()?;
        let layers = arch.layer_sizes().windows(2).map(|w| LayerParams::zeros(w[1], w[0])).collect();
        Ok(Self { arch, layers, weight_bound: None })
    }

    /// Glorot-uniform weights on `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(arch: MlpArchitecture, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut params.layers {
            let (fan_out, fan_in) = layer.weights.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            layer.weights.mapv_inplace(|_| rng.random_range(-limit..=limit));
        }
        Ok(params)
    }

    pub fn with_bound(mut self, bound: Option<f64>) -> Result<Self> {
        if let Some(c) = bound {
            if !(c > 0.0) {
                return Err(Error::invalid(format!("weight bound must be positive, got {c}")));
            }
        }
        self.weight_bound = bound;
        Ok(self)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Largest absolute weight or bias.
    pub fn max_abs(&self) -> f64 {
        self.layers.iter().flat_map(|l| l.slices()).flat_map(|s| s.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn to_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.slices()).flat_map(|s| s.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::invalid(format!("expected {} parameters, got {}", self.param_count(), flat.len())));
        }
        let mut offset = 0;
        for s in self.layers.iter_mut().flat_map(|l| l.slices_mut()) {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(())
    }

    /// Clamps onto the stored bound, if any.
    pub fn project(&mut self) {
        if let Some(c) = self.weight_bound {
            clamp_in_place(self, c);
        }
    }

    fn check_shapes(&self) -> Result<()> {
        let sizes = self.arch.layer_sizes();
        if self.layers.len() + 1 != sizes.len() {
            return Err(Error::invalid("layer count does not match architecture"));
        }
        for (l, w) in self.layers.iter().zip(sizes.windows(2)) {
            if l.weights.dim() != (w[1], w[0]) || l.biases.len() != w[1] {
                return Err(Error::invalid("layer shape does not match architecture"));
            }
        }
        Ok(())
    }
}

fn clamp_in_place(params: &mut MlpParams, c: f64) {
    for s in params.layers.iter_mut().flat_map(|l| l.slices_mut()) {
        for v in s.iter_mut() {
            *v = v.clamp(-c, c);
        }
    }
}

/// Entrywise clamp of every weight and bias to `[-c, c]`.
pub fn project_weights(params: &MlpParams, c: f64) -> Result<MlpParams> {
    if !(c > 0.0) {
        return Err(Error::invalid(format!("projection bound must be positive, got {c}")));
    }
    let mut out = params.clone();
    clamp_in_place(&mut out, c);
    Ok(out)
}

/// Packs `(xi1, xi2)` pairs into an `N x 2` input matrix.
pub fn coords_matrix(coords: &[(f64, f64)]) -> Array2<f64> {
    let mut m = Array2::zeros((coords.len(), 2));
    for (mut row, &(x, y)) in m.rows_mut().into_iter().zip(coords) {
        row[0] = x;
        row[1] = y;
    }
    m
}

/// Activations kept from a forward pass for reuse in the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of each layer; `inputs[0]` is the coordinate matrix.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn into_output(self) -> Vec<f64> {
        self.output
    }
}

fn check_coords(params: &MlpParams, coords: &ArrayView2<'_, f64>) -> Result<()> {
    params.check_shapes()?;
    if coords.nrows() == 0 {
        return Err(Error::invalid("no coordinates to evaluate"));
    }
    if coords.ncols() != params.arch.input_dim {
        return Err(Error::invalid(format!(
            "coordinates have {} columns, network expects {}",
            coords.ncols(),
            params.arch.input_dim
        )));
    }
    Ok(())
}

pub fn forward_cached(params: &MlpParams, coords: ArrayView2<'_, f64>) -> Result<ForwardCache> {
    check_coords(params, &coords)?;
    let slope = params.arch.leaky_slope;
    let n_layers = params.layers.len();
    let mut inputs = Vec::with_capacity(n_layers);
    let mut pre = Vec::with_capacity(n_layers);
    let mut current = coords.to_owned();
    for (k, layer) in params.layers.iter().enumerate() {
        let mut z = current.dot(&layer.weights.t());
        z += &layer.biases;
        let act =
            if k + 1 == n_layers { z.mapv(|v| v.max(0.0)) } else { z.mapv(|v| if v > 0.0 { v } else { slope * v }) };
        inputs.push(std::mem::replace(&mut current, act));
        pre.push(z);
    }
    let output = current.column(0).to_vec();
    Ok(ForwardCache { inputs, pre, output })
}

/// Network values at each row of `coords`; all outputs are `>= 0`.
pub fn mlp_forward(params: &MlpParams, coords: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    Ok(forward_cached(params, coords)?.into_output())
}

/// Gradient of `sum_k cotangent_k * output_k` with respect to the parameters.
pub fn backward_cached(params: &MlpParams, cache: &ForwardCache, cotangent: &[f64]) -> Result<MlpGradient> {
    if cotangent.len() != cache.output.len() {
        return Err(Error::invalid(format!(
            "cotangent has {} entries for {} outputs",
            cotangent.len(),
            cache.output.len()
        )));
    }
    let slope = params.arch.leaky_slope;
    let n_layers = params.layers.len();
    let mut grads: Vec<LayerParams> = Vec::with_capacity(n_layers);

    // output ReLU
    let z_out = &cache.pre[n_layers - 1];
    let mut delta =
        Array2::from_shape_fn((cotangent.len(), 1), |(i, _)| if z_out[[i, 0]] > 0.0 { cotangent[i] } else { 0.0 });
    for k in (0..n_layers).rev() {
        let weights = delta.t().dot(&cache.inputs[k]);
        let biases = delta.sum_axis(Axis(0));
        if k > 0 {
            let mut back = delta.dot(&params.layers[k].weights);
            back.zip_mut_with(&cache.pre[k - 1], |d, &z| {
                if z <= 0.0 {
                    *d *= slope;
                }
            });
            delta = back;
        }
        grads.push(LayerParams { weights, biases });
    }
    grads.reverse();
    Ok(grads)
}

pub fn mlp_backward(params: &MlpParams, coords: ArrayView2<'_, f64>, cotangent: &[f64]) -> Result<MlpGradient> {
    let cache = forward_cached(params, coords)?;
    backward_cached(params, &cache, cotangent)
}

/// Flattens a gradient in the same order as [`MlpParams::to_flat`].
pub fn gradient_to_flat(grad: &MlpGradient) -> Vec<f64> {
    grad.iter().flat_map(|l| l.slices()).flat_map(|s| s.iter().copied()).collect()
}

/// Recursive sup-norm bound on the output of any network of this
/// architecture whose entries are bounded by `c`, for inputs with
/// `|xi|_inf <= input_sup`.
pub fn output_bound(arch: &MlpArchitecture, c: f64, input_sup: f64) -> f64 {
    arch.layer_sizes().windows(2).fold(input_sup, |m, w| c * (w[0] as f64 * m + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self { learning_rate, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<LayerParams>,
    pub second_moment: Vec<LayerParams>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        let zeros: Vec<LayerParams> =
            params.layers.iter().map(|l| LayerParams::zeros(l.weights.nrows(), l.weights.ncols())).collect();
        Self { config, first_moment: zeros.clone(), second_moment: zeros, t: 0 }
    }

    /// One bias-corrected Adam update of `params` in place. The step
    /// counter is incremented before it is used.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpGradient) -> Result<()> {
        let shapes_match = grads.len() == params.layers.len()
            && self.first_moment.len() == params.layers.len()
            && grads
                .iter()
                .zip(&params.layers)
                .all(|(g, p)| g.weights.dim() == p.weights.dim() && g.biases.len() == p.biases.len())
            && self
                .first_moment
                .iter()
                .zip(&params.layers)
                .all(|(m, p)| m.weights.dim() == p.weights.dim() && m.biases.len() == p.biases.len());
        if !shapes_match {
            return Err(Error::invalid("gradient or optimizer state shape does not match parameters"));
        }
        if grads.iter().flat_map(|l| l.slices()).flatten().any(|g| !g.is_finite()) {
            return Err(Error::numerical("non-finite gradient entry"));
        }

        self.t += 1;
        let AdamConfig { learning_rate, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let layers =
            params.layers.iter_mut().zip(grads).zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()));
        for ((p, g), (m, v)) in layers {
            for (((ps, gs), ms), vs) in
                p.slices_mut().into_iter().zip(g.slices()).zip(m.slices_mut()).zip(v.slices_mut())
            {
                for i in 0..ps.len() {
                    let gi = gs[i];
                    ms[i] = beta1 * ms[i] + (1.0 - beta1) * gi;
                    vs[i] = beta2 * vs[i] + (1.0 - beta2) * gi * gi;
                    let m_hat = ms[i] / bc1;
                    let v_hat = vs[i] / bc2;
                    ps[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(params: &MlpParams, grads: &MlpGradient, state: &AdamState) -> Result<(MlpParams, AdamState)> {
    let (mut p, mut s) = (params.clone(), state.clone());
    s.step(&mut p, grads)?;
    Ok((p, s))
}
