//! Pixel grids on the square `[-1, 1]^2` and the Shepp-Logan phantom.
//!
//! Pixels are stored row-major with the first coordinate varying fastest:
//! `values[j * nx + i]` holds the sample at `(xi1_i, xi2_j)`, where the
//! centers are `-1 + (i + 0.5) * 2 / nx`. Samples are point evaluations at
//! the centers, never area averages.

use crate::error::{Error, Result};

/// A discretized function on `[-1, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(format!("empty grid {nx}x{ny}")));
        }
        if values.len() != nx * ny {
            return Err(Error::invalid(format!("grid {nx}x{ny} needs {} values, got {}", nx * ny, values.len())));
        }
        Ok(Self { nx, ny, values })
    }

    pub fn zeros(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, vec![0.0; nx * ny])
    }

    /// Samples `f` at every pixel center.
    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = pixel_centers(nx, ny)?.into_iter().map(|(x, y)| f(x, y)).collect();
        Self::new(nx, ny, values)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
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

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn pixel_width(&self) -> f64 {
        2.0 / self.nx as f64
    }

    pub fn pixel_height(&self) -> f64 {
        2.0 / self.ny as f64
    }

    pub fn centers(&self) -> Vec<(f64, f64)> {
        // nx, ny are nonzero by construction
        pixel_centers(self.nx, self.ny).expect("validated grid")
    }

    /// Euclidean norm of the pixel vector.
    pub fn l2_norm(&self) -> f64 {
        crate::norm(&self.values)
    }

    /// Euclidean distance between pixel vectors of equal shape.
    pub fn distance(&self, other: &ImageGrid) -> Result<f64> {
        if self.nx != other.nx || self.ny != other.ny {
            return Err(Error::invalid(format!(
                "grid shapes differ: {}x{} vs {}x{}",
                self.nx, self.ny, other.nx, other.ny
            )));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Center coordinate of cell `index` when `[-1, 1]` is split into `n` cells.
#[inline]
pub fn cell_center(index: usize, n: usize) -> f64 {
    -1.0 + (index as f64 + 0.5) * (2.0 / n as f64)
}

/// Pixel-center coordinates of an `nx` by `ny` grid, first axis fastest.
pub fn pixel_centers(nx: usize, ny: usize) -> Result<Vec<(f64, f64)>> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!("empty grid {nx}x{ny}")));
    }
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = cell_center(j, ny);
        for i in 0..nx {
            out.push((cell_center(i, nx), y));
        }
    }
    Ok(out)
}

/// An ellipse with constant additive intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub semi_axes: (f64, f64),
    /// Counter-clockwise rotation of the first semi-axis, radians.
    pub rotation: f64,
    pub intensity: f64,
}

impl Ellipse {
    pub fn new(center: (f64, f64), semi_axes: (f64, f64), rotation: f64, intensity: f64) -> Result<Self> {
        if !(semi_axes.0 > 0.0 && semi_axes.1 > 0.0) {
            return Err(Error::invalid(format!("ellipse semi-axes must be positive, got {semi_axes:?}")));
        }
        Ok(Self { center, semi_axes, rotation, intensity })
    }

    /// Closed-interior membership test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (s, c) = self.rotation.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        let (a, b) = self.semi_axes;
        (u / a).powi(2) + (v / b).powi(2) <= 1.0
    }
}

/// The classical ten-ellipse Shepp-Logan head phantom, as tabulated by
/// Shepp & Logan (1974) and reproduced in Kak & Slaney, "Principles of
/// Computerized Tomographic Imaging", Table 3.1. Columns are
/// `(x0, y0, a, b, rotation in degrees, intensity)`.
///
/// This is the original contrast table, not the "modified" variant with
/// enlarged intensities.
pub const SHEPP_LOGAN_TABLE: [(f64, f64, f64, f64, f64, f64); 10] = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 2.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.02),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.02),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
    (0.0, -0.606, 0.023, 0.023, 0.0, 0.01),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
];

pub fn shepp_logan_ellipses() -> Vec<Ellipse> {
    SHEPP_LOGAN_TABLE
        .iter()
        .map(|&(x0, y0, a, b, deg, rho)| Ellipse {
            center: (x0, y0),
            semi_axes: (a, b),
            rotation: deg.to_radians(),
            intensity: rho,
        })
        .collect()
}

/// Sum of the intensities of every ellipse containing `(x, y)`.
pub fn evaluate_ellipses(ellipses: &[Ellipse], x: f64, y: f64) -> f64 {
    ellipses.iter().filter(|e| e.contains(x, y)).fold(0.0, |acc, e| acc + e.intensity)
}

pub fn shepp_logan_value(x: f64, y: f64) -> f64 {
    evaluate_ellipses(&shepp_logan_ellipses(), x, y)
}

pub fn shepp_logan(nx: usize, ny: usize) -> Result<ImageGrid> {
    let ellipses = shepp_logan_ellipses();
    ImageGrid::from_fn(nx, ny, |x, y| evaluate_ellipses(&ellipses, x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_is_centered() {
        assert_eq!(pixel_centers(1, 1).unwrap(), vec![(0.0, 0.0)]);
    }

    #[test]
    fn two_by_two_centers() {
        assert_eq!(pixel_centers(2, 2).unwrap(), vec![(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)]);
    }

    #[test]
    fn first_center_at_128() {
        let c = pixel_centers(128, 128).unwrap();
        assert_eq!(c.len(), 16384);
        assert_eq!(c[0], (-0.9921875, -0.9921875));
        assert!(c.iter().all(|&(x, y)| x.abs() < 1.0 && y.abs() < 1.0));
    }

    #[test]
    fn zero_size_grid_rejected() {
        assert!(matches!(pixel_centers(0, 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(shepp_logan(3, 0), Err(Error::InvalidArgument(_))));
        assert!(ImageGrid::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn ellipse_rejects_degenerate_axes() {
        assert!(Ellipse::new((0.0, 0.0), (0.0, 1.0), 0.0, 1.0).is_err());
        assert!(Ellipse::new((0.0, 0.0), (1.0, -1.0), 0.0, 1.0).is_err());
    }

    #[test]
    fn rotated_ellipse_membership() {
        let e = Ellipse::new((0.0, 0.0), (0.5, 0.1), std::f64::consts::FRAC_PI_2, 1.0).unwrap();
        assert!(e.contains(0.0, 0.45));
        assert!(!e.contains(0.45, 0.0));
    }

    #[test]
    fn phantom_corner_is_empty() {
        assert_eq!(shepp_logan_value(0.95, 0.95), 0.0);
    }

    #[test]
    fn phantom_is_deterministic_and_bounded() {
        let a = shepp_logan(64, 64).unwrap();
        let b = shepp_logan(64, 64).unwrap();
        assert_eq!(a, b);
        let (lo, hi) = a.min_max();
        assert!(lo >= 0.0 && hi <= 2.1, "range [{lo}, {hi}]");
    }

    #[test]
    fn doubling_resolution_keeps_pointwise_values() {
        // Centers of an n-grid coincide with no centers of the 2n-grid, but
        // the 3n-grid contains every n-grid center.
        let coarse = shepp_logan(32, 32).unwrap();
        let fine = shepp_logan(96, 96).unwrap();
        for j in 0..32 {
            for i in 0..32 {
                assert_eq!(coarse.get(i, j), fine.get(3 * i + 1, 3 * j + 1));
            }
        }
    }
}
