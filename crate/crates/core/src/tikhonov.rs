//! Classical Tikhonov regularization for linear operators.
//!
//! The regularized solution minimizes `||Ax - y||^2 + alpha ||x - x*||^2`
//! and is computed from the normal equations
//! `(A^T A + alpha I) x = A^T y + alpha x*` with conjugate gradients.

use crate::error::{Error, Result};
use crate::linop::{cg_solve, CgOptions, LinearOperator};
use crate::norm;

#[derive(Clone, Copy)]
pub struct TikhonovProblem<'a> {
    pub op: &'a dyn LinearOperator,
    pub data: &'a [f64],
    pub alpha: f64,
    /// Prior element; `None` means the zero vector.
    pub x_star: Option<&'a [f64]>,
    pub cg: CgOptions,
}

impl<'a> TikhonovProblem<'a> {
    pub fn new(op: &'a dyn LinearOperator, data: &'a [f64], alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if data.len() != op.range_dim() {
            return Err(Error::invalid(format!(
                "data has length {}, operator range is {}",
                data.len(),
                op.range_dim()
            )));
        }
        Ok(Self { op, data, alpha, x_star: None, cg: CgOptions::default() })
    }

    pub fn with_prior(mut self, x_star: &'a [f64]) -> Result<Self> {
        if x_star.len() != self.op.domain_dim() {
            return Err(Error::invalid(format!(
                "prior has length {}, operator domain is {}",
                x_star.len(),
                self.op.domain_dim()
            )));
        }
        self.x_star = Some(x_star);
        Ok(self)
    }

    pub fn with_cg(mut self, cg: CgOptions) -> Self {
        self.cg = cg;
        self
    }

    /// `A^T y + alpha x*`.
    pub fn normal_rhs(&self) -> Result<Vec<f64>> {
        let mut rhs = self.op.apply_adjoint(self.data)?;
        if let Some(xs) = self.x_star {
            for (r, x) in rhs.iter_mut().zip(xs) {
                *r += self.alpha * x;
            }
        }
        Ok(rhs)
    }

    /// The Tikhonov functional at `x`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        objective(self.op, x, self.data, self.alpha, self.x_star)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TikhonovSolution {
    pub x: Vec<f64>,
    pub cg_iterations: usize,
    pub converged: bool,
    /// `||(A^T A + alpha I) x - A^T y - alpha x*||`.
    pub normal_residual: f64,
}

pub fn solve_tikhonov(p: &TikhonovProblem<'_>) -> Result<TikhonovSolution> {
    let rhs = p.normal_rhs()?;
    let sol = cg_solve(|x| p.op.apply_normal(x, p.alpha), &rhs, &p.cg)?;
    Ok(TikhonovSolution {
        x: sol.x,
        cg_iterations: sol.iterations,
        converged: sol.converged,
        normal_residual: sol.residual_norm,
    })
}

/// `||Ax - y||^2 + alpha ||x - x*||^2`.
pub fn objective(op: &dyn LinearOperator, x: &[f64], data: &[f64], alpha: f64, x_star: Option<&[f64]>) -> Result<f64> {
    let ax = op.apply(x)?;
    if ax.len() != data.len() {
        return Err(Error::invalid("data length does not match operator range"));
    }
    let fit: f64 = ax.iter().zip(data).map(|(a, y)| (a - y) * (a - y)).sum();
    let pen: f64 = match x_star {
        Some(xs) => x.iter().zip(xs).map(|(a, b)| (a - b) * (a - b)).sum(),
        None => x.iter().map(|a| a * a).sum(),
    };
    Ok(fit + alpha * pen)
}

/// `z_alpha = x_dagger - alpha (A^T A + alpha I)^{-1} A^T w`.
pub fn z_alpha(op: &dyn LinearOperator, x_dagger: &[f64], w: &[f64], alpha: f64, cg: &CgOptions) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if x_dagger.len() != op.domain_dim() || w.len() != op.range_dim() {
        return Err(Error::invalid("z_alpha: dimensions do not match the operator"));
    }
    let rhs = op.apply_adjoint(w)?;
    let u = cg_solve(|x| op.apply_normal(x, alpha), &rhs, cg)?.x;
    Ok(x_dagger.iter().zip(&u).map(|(x, u)| x - alpha * u).collect())
}

/// Relative normal-equation residual, for reporting.
pub fn relative_normal_residual(p: &TikhonovProblem<'_>, sol: &TikhonovSolution) -> Result<f64> {
    let rhs = p.normal_rhs()?;
    let n = norm(&rhs);
    Ok(if n == 0.0 { sol.normal_residual } else { sol.normal_residual / n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{DenseMatrix, DiagonalOperator};
    use crate::radon::{RadonGeometry, RadonOperator};

    #[test]
    fn zero_operator_returns_prior() {
        let a = DenseMatrix::zeros(3, 4);
        let y = [1.0, 2.0, 3.0];
        let xs = [0.5, -1.0, 2.0, 0.0];
        for alpha in [1e-3, 1.0, 100.0] {
            let p = TikhonovProblem::new(&a, &y, alpha).unwrap().with_prior(&xs).unwrap();
            let sol = solve_tikhonov(&p).unwrap();
            for (x, e) in sol.x.iter().zip(xs) {
                assert!((x - e).abs() <= 1e-12, "{x} vs {e}");
            }
        }
    }

    #[test]
    fn identity_scalar_closed_form() {
        let a = DenseMatrix::identity(5);
        let c = 3.0;
        let y = [c; 5];
        let alpha = 0.25;
        let sol = solve_tikhonov(&TikhonovProblem::new(&a, &y, alpha).unwrap()).unwrap();
        for x in sol.x {
            assert!((x - c / (1.0 + alpha)).abs() <= 1e-12);
        }
    }

    #[test]
    fn radon_normal_residual_small() {
        let g = RadonGeometry::for_grid(32, 20).unwrap();
        let op = RadonOperator::new(g, 32, 32).unwrap();
        let phantom = crate::grid::shepp_logan(32, 32).unwrap();
        let y = op.forward(phantom.values()).unwrap();
        let p = TikhonovProblem::new(&op, &y, 0.1).unwrap();
        let sol = solve_tikhonov(&p).unwrap();
        let aty = norm(&op.apply_adjoint(&y).unwrap());
        assert!(sol.normal_residual <= 1e-8 * aty);
        assert!(relative_normal_residual(&p, &sol).unwrap() <= 1e-8);
    }

    #[test]
    fn rejects_bad_alpha_and_shapes() {
        let a = DenseMatrix::identity(2);
        assert!(TikhonovProblem::new(&a, &[1.0, 2.0], 0.0).is_err());
        assert!(TikhonovProblem::new(&a, &[1.0, 2.0], -1.0).is_err());
        assert!(TikhonovProblem::new(&a, &[1.0], 1.0).is_err());
        let p = TikhonovProblem::new(&a, &[1.0, 2.0], 1.0).unwrap();
        assert!(p.with_prior(&[0.0; 3]).is_err());
    }

    #[test]
    fn z_alpha_identity() {
        let a = DenseMatrix::identity(3);
        let xd = [1.0, 2.0, 3.0];
        let w = [0.5, -0.5, 2.0];
        for alpha in [1e-12, 0.3, 7.0] {
            let z = z_alpha(&a, &xd, &w, alpha, &CgOptions::default()).unwrap();
            for k in 0..3 {
                let expect = xd[k] - alpha / (1.0 + alpha) * w[k];
                assert!((z[k] - expect).abs() <= 1e-12, "alpha={alpha}");
            }
        }
    }

    #[test]
    fn z_alpha_diagonal_componentwise() {
        let op = DiagonalOperator::new(vec![2.0, 1.0, 0.5, 0.1]).unwrap();
        let xd = [1.0, -1.0, 0.5, 0.25];
        let w = [0.3, 0.7, -1.1, 2.0];
        let alpha = 0.05;
        let z = z_alpha(&op, &xd, &w, alpha, &CgOptions { tol: 1e-14, max_iter: 100 }).unwrap();
        for (k, s) in op.singular_values().iter().enumerate() {
            let expect = xd[k] - alpha * s * w[k] / (s * s + alpha);
            assert!((z[k] - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn z_alpha_rejects_nonpositive_alpha() {
        let a = DenseMatrix::identity(2);
        assert!(z_alpha(&a, &[0.0; 2], &[0.0; 2], 0.0, &CgOptions::default()).is_err());
    }
}
