//! Parallel-beam Radon transform on `[-1, 1]^2`.
//!
//! The forward projector integrates the bilinear interpolant of the pixel
//! samples along each line `{s * n(theta) + t * n(theta)^perp}` with the
//! trapezoid rule on equispaced points clipped to the square's bounding
//! circle. The adjoint scatters exactly the same weights, so the pair is an
//! algebraic transpose up to rounding.
//!
//! Sinogram layout is angle-major: `values[q * n_bins + p]` is bin `p` of
//! angle `q`, so every projection profile is contiguous.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::linop::LinearOperator;

/// Radius of the circle circumscribing `[-1, 1]^2`.
const SUPPORT_RADIUS: f64 = SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub struct RadonGeometry {
    n_angles: usize,
    n_bins: usize,
    det_halfwidth: f64,
    step: f64,
}

impl RadonGeometry {
    pub fn new(n_angles: usize, n_bins: usize, det_halfwidth: f64, step: f64) -> Result<Self> {
        if n_angles == 0 {
            return Err(Error::invalid("n_angles must be at least 1"));
        }
        if n_bins == 0 {
            return Err(Error::invalid("n_bins must be at least 1"));
        }
        if !(det_halfwidth > 0.0 && det_halfwidth.is_finite()) {
            return Err(Error::invalid(format!("det_halfwidth must be positive, got {det_halfwidth}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("step must be positive, got {step}")));
        }
        Ok(Self { n_angles, n_bins, det_halfwidth, step })
    }

    /// Default geometry for an `nx`-wide image: detector `[-sqrt 2, sqrt 2]`
    /// with `ceil(nx * sqrt 2)` bins and a one-pixel sampling step.
    pub fn for_grid(nx: usize, n_angles: usize) -> Result<Self> {
        if nx == 0 {
            return Err(Error::invalid("image width must be at least 1"));
        }
        Self::new(n_angles, default_bins(nx), SQRT_2, 2.0 / nx as f64)
    }

    /// Detector restricted to `[-1, 1]` with one bin per pixel column.
    pub fn for_grid_unit_detector(nx: usize, n_angles: usize) -> Result<Self> {
        if nx == 0 {
            return Err(Error::invalid("image width must be at least 1"));
        }
        Self::new(n_angles, nx, 1.0, 2.0 / nx as f64)
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn det_halfwidth(&self) -> f64 {
        self.det_halfwidth
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of sinogram entries.
    pub fn len(&self) -> usize {
        self.n_angles * self.n_bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn angle(&self, q: usize) -> f64 {
        q as f64 * PI / self.n_angles as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_angles).map(|q| self.angle(q)).collect()
    }

    /// Signed detector offset of bin `p` (bin centers).
    pub fn offset(&self, p: usize) -> f64 {
        let h = self.det_halfwidth;
        -h + (p as f64 + 0.5) * (2.0 * h / self.n_bins as f64)
    }

    pub fn offsets(&self) -> Vec<f64> {
        (0..self.n_bins).map(|p| self.offset(p)).collect()
    }
}

pub fn default_bins(nx: usize) -> usize {
    (nx as f64 * SQRT_2).ceil() as usize
}

/// Radon data on `[0, pi) x [-h, h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinogramGrid {
    geometry: RadonGeometry,
    values: Vec<f64>,
}

impl SinogramGrid {
    pub fn new(geometry: RadonGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::invalid(format!("sinogram needs {} values, got {}", geometry.len(), values.len())));
        }
        Ok(Self { geometry, values })
    }

    pub fn zeros(geometry: RadonGeometry) -> Self {
        let values = vec![0.0; geometry.len()];
        Self { geometry, values }
    }

    pub fn geometry(&self) -> &RadonGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.values[q * self.geometry.n_bins + p]
    }

    /// Projection profile of angle `q`.
    pub fn profile(&self, q: usize) -> &[f64] {
        let n = self.geometry.n_bins;
        &self.values[q * n..(q + 1) * n]
    }
}

/// The discretized Radon transform as a linear map from `nx * ny` pixel
/// vectors to `n_bins * n_angles` sinogram vectors.
///
/// The ray weights produced by the line sampler are generated once at
/// construction and stored row by row (one row per sinogram entry, pixel
/// indices sorted and merged). Both passes read the same rows, so the
/// adjoint is the exact transpose of the forward map.
#[derive(Debug, Clone)]
pub struct RadonOperator {
    geometry: RadonGeometry,
    nx: usize,
    ny: usize,
    rows: RayRows,
}

#[derive(Debug, Clone, Default)]
struct RayRows {
    /// `start[r]..start[r + 1]` indexes row `r` of `pixels` / `weights`.
    start: Vec<usize>,
    pixels: Vec<u32>,
    weights: Vec<f64>,
}

impl RadonOperator {
    pub fn new(geometry: RadonGeometry, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(format!("empty grid {nx}x{ny}")));
        }
        if nx.checked_mul(ny).is_none_or(|n| n > u32::MAX as usize) {
            return Err(Error::invalid(format!("grid {nx}x{ny} is too large")));
        }
        let mut op = Self { geometry, nx, ny, rows: RayRows::default() };
        op.rows = op.build_rows();
        Ok(op)
    }

    fn build_rows(&self) -> RayRows {
        let n_bins = self.geometry.n_bins;
        let per_angle: Vec<Vec<Vec<(u32, f64)>>> = (0..self.geometry.n_angles)
            .into_par_iter()
            .map(|q| {
                let (sin, cos) = self.geometry.angle(q).sin_cos();
                (0..n_bins)
                    .map(|p| {
                        let mut entries: Vec<(u32, f64)> = Vec::new();
                        self.for_each_weight(cos, sin, p, |idx, w| entries.push((idx as u32, w)));
                        entries.sort_by_key(|e| e.0);
                        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
                        for (idx, w) in entries {
                            match merged.last_mut() {
                                Some(last) if last.0 == idx => last.1 += w,
                                _ => merged.push((idx, w)),
                            }
                        }
                        merged
                    })
                    .collect()
            })
            .collect();
        let mut rows = RayRows { start: vec![0], ..Default::default() };
        for entries in per_angle.into_iter().flatten() {
            for (idx, w) in entries {
                rows.pixels.push(idx);
                rows.weights.push(w);
            }
            rows.start.push(rows.pixels.len());
        }
        rows
    }

    /// Number of stored nonzero weights.
    pub fn nnz(&self) -> usize {
        self.rows.weights.len()
    }

    pub fn geometry(&self) -> &RadonGeometry {
        &self.geometry
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Visits every `(pixel index, weight)` pair contributing to bin `p` of
    /// the projection with direction `(cos, sin)`. The cached rows are built
    /// from exactly these visits.
    #[inline]
    fn for_each_weight(&self, cos: f64, sin: f64, p: usize, mut visit: impl FnMut(usize, f64)) {
        let s = self.geometry.offset(p);
        let half_sq = SUPPORT_RADIUS * SUPPORT_RADIUS - s * s;
        if half_sq <= 0.0 {
            return;
        }
        let half = half_sq.sqrt();
        let n_int = ((2.0 * half / self.geometry.step).ceil() as usize).max(1);
        let h = 2.0 * half / n_int as f64;

        let (nx, ny) = (self.nx, self.ny);
        let (dx, dy) = (2.0 / nx as f64, 2.0 / ny as f64);
        for k in 0..=n_int {
            let t = -half + k as f64 * h;
            let x = s * cos - t * sin;
            let y = s * sin + t * cos;
            if x.abs() > 1.0 || y.abs() > 1.0 {
                continue;
            }
            let w = if k == 0 || k == n_int { 0.5 * h } else { h };

            let u = (x + 1.0) / dx - 0.5;
            let v = (y + 1.0) / dy - 0.5;
            let (i0, j0) = (u.floor(), v.floor());
            let (fu, fv) = (u - i0, v - j0);
            let (i0, j0) = (i0 as isize, j0 as isize);
            for (dj, wy) in [(0isize, 1.0 - fv), (1, fv)] {
                let j = j0 + dj;
                if j < 0 || j >= ny as isize || wy == 0.0 {
                    continue;
                }
                for (di, wx) in [(0isize, 1.0 - fu), (1, fu)] {
                    let i = i0 + di;
                    if i < 0 || i >= nx as isize || wx == 0.0 {
                        continue;
                    }
                    visit(j as usize * nx + i as usize, w * wx * wy);
                }
            }
        }
    }

    fn check_domain(&self, len: usize) -> Result<()> {
        if len != self.nx * self.ny {
            return Err(Error::invalid(format!("image has {len} pixels, operator expects {}", self.nx * self.ny)));
        }
        Ok(())
    }

    fn check_range(&self, len: usize) -> Result<()> {
        if len != self.geometry.len() {
            return Err(Error::invalid(format!(
                "sinogram has {len} entries, operator expects {}",
                self.geometry.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, image: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(image.len())?;
        let n_bins = self.geometry.n_bins;
        let mut out = vec![0.0; self.geometry.len()];
        let rows = &self.rows;
        out.par_chunks_mut(n_bins).enumerate().for_each(|(q, profile)| {
            for (p, slot) in profile.iter_mut().enumerate() {
                let r = q * n_bins + p;
                let span = rows.start[r]..rows.start[r + 1];
                *slot = rows.pixels[span.clone()]
                    .iter()
                    .zip(&rows.weights[span])
                    .map(|(&idx, w)| w * image[idx as usize])
                    .sum();
            }
        });
        Ok(out)
    }

    pub fn adjoint(&self, sino: &[f64]) -> Result<Vec<f64>> {
        self.check_range(sino.len())?;
        // sequential scatter in row order keeps the summation order fixed
        let mut out = vec![0.0; self.nx * self.ny];
        let rows = &self.rows;
        for (r, &val) in sino.iter().enumerate() {
            if val == 0.0 {
                continue;
            }
            let span = rows.start[r]..rows.start[r + 1];
            for (&idx, w) in rows.pixels[span.clone()].iter().zip(&rows.weights[span]) {
                out[idx as usize] += w * val;
            }
        }
        Ok(out)
    }
}

impl LinearOperator for RadonOperator {
    fn domain_dim(&self) -> usize {
        self.nx * self.ny
    }

    fn range_dim(&self) -> usize {
        self.geometry.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x)
    }

    fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.adjoint(y)
    }
}

pub fn radon_forward(image: &ImageGrid, geometry: &RadonGeometry) -> Result<SinogramGrid> {
    let op = RadonOperator::new(geometry.clone(), image.nx(), image.ny())?;
    SinogramGrid::new(geometry.clone(), op.forward(image.values())?)
}

pub fn radon_adjoint(sino: &SinogramGrid, nx: usize, ny: usize) -> Result<ImageGrid> {
    let op = RadonOperator::new(sino.geometry().clone(), nx, ny)?;
    ImageGrid::new(nx, ny, op.adjoint(sino.values())?)
}
