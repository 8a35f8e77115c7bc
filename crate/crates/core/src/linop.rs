//! Matrix-free linear operators and a conjugate-gradient solver.

use crate::error::{Error, Result};
use crate::{dot, norm};

/// A bounded linear map between finite-dimensional spaces together with its
/// transpose. Implementations must satisfy `<Ax, y> = <x, A^T y>`.
pub trait LinearOperator: Sync {
    fn domain_dim(&self) -> usize;
    fn range_dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>>;

    /// `x -> A^T A x + alpha x`, the Tikhonov normal-equation operator.
    fn apply_normal(&self, x: &[f64], alpha: f64) -> Result<Vec<f64>> {
        let mut out = self.apply_adjoint(&self.apply(x)?)?;
        for (o, xi) in out.iter_mut().zip(x) {
            *o += alpha * xi;
        }
        Ok(out)
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::invalid(format!("{what}: expected length {want}, got {got}")));
    }
    Ok(())
}

/// Square diagonal operator with positive, nonincreasing entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    singular_values: Vec<f64>,
}

impl DiagonalOperator {
    pub fn new(singular_values: Vec<f64>) -> Result<Self> {
        if singular_values.is_empty() {
            return Err(Error::invalid("diagonal operator needs at least one entry"));
        }
        if let Some(bad) = singular_values.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!("singular values must be positive, got {bad}")));
        }
        if singular_values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("singular values must be nonincreasing"));
        }
        Ok(Self { singular_values })
    }

    /// `sigma_k = 1 / k` for `k = 1..=n`.
    pub fn harmonic(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|k| 1.0 / k as f64).collect())
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }
}

impl LinearOperator for DiagonalOperator {
    fn domain_dim(&self) -> usize {
        self.singular_values.len()
    }

    fn range_dim(&self) -> usize {
        self.singular_values.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("diagonal apply", x.len(), self.domain_dim())?;
        Ok(x.iter().zip(&self.singular_values).map(|(a, s)| a * s).collect())
    }

    fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.apply(y)
    }
}

/// Row-major dense matrix. Used to materialize small operators and as a
/// generic explicit operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("dense matrix data", data.len(), rows * cols)?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }
}

impl LinearOperator for DenseMatrix {
    fn domain_dim(&self) -> usize {
        self.cols
    }

    fn range_dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("dense apply", x.len(), self.cols)?;
        Ok(self.data.chunks(self.cols).map(|row| dot(row, x)).collect())
    }

    fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("dense adjoint", y.len(), self.rows)?;
        let mut out = vec![0.0; self.cols];
        for (row, &yr) in self.data.chunks(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yr;
            }
        }
        Ok(out)
    }
}

/// Builds the explicit matrix of `op` column by column from unit vectors.
pub fn materialize(op: &dyn LinearOperator) -> Result<DenseMatrix> {
    let (m, n) = (op.range_dim(), op.domain_dim());
    let mut dense = DenseMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = op.apply(&e)?;
        e[c] = 0.0;
        for (r, v) in col.into_iter().enumerate() {
            dense.data[r * n + c] = v;
        }
    }
    Ok(dense)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual target `||Mx - b|| <= tol ||b||`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True residual `||Mx - b||` of the returned iterate.
    pub residual_norm: f64,
    pub converged: bool,
}

/// Conjugate gradients for `Mx = b` with `M` symmetric positive definite,
/// started from zero. Hitting `max_iter` is not an error; inspect
/// `converged`. The recursive residual is re-checked against the true one
/// before declaring convergence.
pub fn cg_solve<F>(mut apply: F, rhs: &[f64], opts: &CgOptions) -> Result<CgSolution>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::invalid(format!("cg tolerance must be positive, got {}", opts.tol)));
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite right-hand side"));
    }
    let n = rhs.len();
    let b_norm = norm(rhs);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgSolution { x, iterations: 0, residual_norm: 0.0, converged: true });
    }
    let target = opts.tol * b_norm;

    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let mp = apply(&p)?;
        check_len("cg operator output", mp.len(), n)?;
        let pmp = dot(&p, &mp);
        if !pmp.is_finite() {
            return Err(Error::numerical(format!("non-finite curvature at cg iteration {iterations}")));
        }
        if pmp <= 0.0 {
            return Err(Error::numerical(format!(
                "operator not positive definite (p'Mp = {pmp:e}) at cg iteration {iterations}"
            )));
        }
        let step = rr / pmp;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * mp[i];
        }
        iterations += 1;
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::numerical(format!("non-finite residual at cg iteration {iterations}")));
        }
        if rr_new.sqrt() <= target {
            let true_r = true_residual(&mut apply, &x, rhs)?;
            let true_norm = norm(&true_r);
            if true_norm <= target {
                return Ok(CgSolution { x, iterations, residual_norm: true_norm, converged: true });
            }
            // recursive residual drifted; restart from the true one
            r = true_r;
            p = r.clone();
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }

    let residual_norm = norm(&true_residual(&mut apply, &x, rhs)?);
    Ok(CgSolution { x, iterations, residual_norm, converged: residual_norm <= target })
}

fn true_residual<F>(apply: &mut F, x: &[f64], rhs: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mx = apply(x)?;
    check_len("cg operator output", mx.len(), rhs.len())?;
    Ok(rhs.iter().zip(&mx).map(|(b, m)| b - m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radon::{RadonGeometry, RadonOperator};

    #[test]
    fn identity_converges_in_one_iteration() {
        let rhs = vec![1.0, -2.0, 3.5];
        let sol = cg_solve(|x| Ok(x.to_vec()), &rhs, &CgOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.converged);
        assert_eq!(sol.x, rhs);
    }

    #[test]
    fn diagonal_three_by_three() {
        let d = [1.0, 2.0, 3.0];
        let apply = |x: &[f64]| Ok(x.iter().zip(&d).map(|(a, b)| a * b).collect());
        let sol = cg_solve(apply, &[1.0, 1.0, 1.0], &CgOptions::default()).unwrap();
        let expect = [1.0, 0.5, 1.0 / 3.0];
        for (x, e) in sol.x.iter().zip(expect) {
            assert!((x - e).abs() <= 1e-10);
        }
        assert!(sol.iterations <= 3);
    }

    #[test]
    fn radon_normal_equations_reach_tolerance() {
        let g = RadonGeometry::for_grid(16, 12).unwrap();
        let op = RadonOperator::new(g, 16, 16).unwrap();
        let rhs: Vec<f64> = (0..256).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let sol = cg_solve(|x| op.apply_normal(x, 0.1), &rhs, &CgOptions::default()).unwrap();
        assert!(sol.converged);
        let r = op.apply_normal(&sol.x, 0.1).unwrap();
        let res: Vec<f64> = r.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        assert!(norm(&res) <= 1e-10 * norm(&rhs));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let sol = cg_solve(|x| Ok(x.to_vec()), &[0.0; 4], &CgOptions::default()).unwrap();
        assert_eq!(sol.x, vec![0.0; 4]);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn non_finite_is_numerical_failure() {
        let err =
            cg_solve(|x| Ok(x.iter().map(|_| f64::NAN).collect()), &[1.0, 2.0], &CgOptions::default()).unwrap_err();
        assert!(err.is_numerical());
        let err = cg_solve(|x| Ok(x.to_vec()), &[f64::INFINITY], &CgOptions::default()).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn max_iter_reported_not_raised() {
        let d: Vec<f64> = (1..=20).map(|k| k as f64 * k as f64).collect();
        let apply = |x: &[f64]| Ok(x.iter().zip(&d).map(|(a, b)| a * b).collect());
        let rhs = vec![1.0; 20];
        let sol = cg_solve(apply, &rhs, &CgOptions { tol: 1e-12, max_iter: 2 }).unwrap();
        assert_eq!(sol.iterations, 2);
        assert!(!sol.converged);
        assert!(sol.residual_norm > 0.0);
    }

    #[test]
    fn diagonal_operator_validation() {
        assert!(DiagonalOperator::new(vec![]).is_err());
        assert!(DiagonalOperator::new(vec![1.0, 0.0]).is_err());
        assert!(DiagonalOperator::new(vec![0.5, 1.0]).is_err());
        let h = DiagonalOperator::harmonic(4).unwrap();
        assert_eq!(h.singular_values(), &[1.0, 0.5, 1.0 / 3.0, 0.25]);
    }

    #[test]
    fn materialized_dense_round_trip() {
        let m = DenseMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(materialize(&m).unwrap(), m);
        assert_eq!(m.apply_adjoint(&[1.0, 1.0]).unwrap(), vec![5.0, 7.0, 9.0]);
        assert_eq!(m.transpose().apply(&[1.0, 1.0]).unwrap(), vec![5.0, 7.0, 9.0]);
    }
}
