use compact_tik::experiment::NormalStream;
use compact_tik::linop::materialize;
use compact_tik::tikhonov::objective;
use compact_tik::{
    solve_tikhonov, z_alpha, CgOptions, DiagonalOperator, LinearOperator, RadonGeometry, RadonOperator, TikhonovProblem,
};
use nalgebra::{DMatrix, DVector};

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn small_radon() -> RadonOperator {
    RadonOperator::new(RadonGeometry::for_grid(16, 12).unwrap(), 16, 16).unwrap()
}

fn dense(op: &dyn LinearOperator) -> DMatrix<f64> {
    let m = materialize(op).unwrap();
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

/// Direct solve of `(A^T A + alpha I) x = A^T y + alpha x_star`.
fn direct(a: &DMatrix<f64>, y: &[f64], alpha: f64, x_star: Option<&[f64]>) -> Vec<f64> {
    let n = a.ncols();
    let normal = a.transpose() * a + DMatrix::identity(n, n) * alpha;
    let mut rhs = a.transpose() * DVector::from_column_slice(y);
    if let Some(xs) = x_star {
        rhs += DVector::from_column_slice(xs) * alpha;
    }
    normal.cholesky().expect("positive definite").solve(&rhs).as_slice().to_vec()
}

fn tight() -> CgOptions {
    CgOptions { tol: 1e-12, max_iter: 5000 }
}

#[test]
fn cg_matches_dense_solve() {
    let op = small_radon();
    let a = dense(&op);
    let truth = compact_tik::grid::shepp_logan(16, 16).unwrap();
    let y = op.forward(truth.values()).unwrap();
    for alpha in [1e-3, 1e-1, 10.0] {
        let sol = solve_tikhonov(&TikhonovProblem::new(&op, &y, alpha).unwrap()).unwrap();
        assert!(sol.converged);
        let x = direct(&a, &y, alpha, None);
        let rel = dist(&sol.x, &x) / norm(&x);
        assert!(rel <= 1e-6, "alpha {alpha}: relative error {rel}");
    }
}

#[test]
fn prior_shifts_the_solution() {
    let op = small_radon();
    let a = dense(&op);
    let mut rng = NormalStream::new(3);
    let y = rng.fill(op.range_dim());
    let x_star = rng.fill(op.domain_dim());
    let p = TikhonovProblem::new(&op, &y, 0.3).unwrap().with_prior(&x_star).unwrap().with_cg(tight());
    let sol = solve_tikhonov(&p).unwrap();
    let x = direct(&a, &y, 0.3, Some(&x_star));
    assert!(dist(&sol.x, &x) / norm(&x) <= 1e-9);
}

#[test]
fn stability_bound_on_random_pairs() {
    let op = small_radon();
    let mut rng = NormalStream::new(77);
    for k in 0..20 {
        let alpha = 10f64.powf(-3.0 + 4.0 * k as f64 / 19.0);
        let y1 = rng.fill(op.range_dim());
        let y2 = rng.fill(op.range_dim());
        let s = |y: &[f64]| solve_tikhonov(&TikhonovProblem::new(&op, y, alpha).unwrap().with_cg(tight())).unwrap().x;
        let lhs = dist(&s(&y1), &s(&y2));
        let rhs = dist(&y1, &y2) / (2.0 * alpha.sqrt());
        assert!(lhs <= rhs * (1.0 + 1e-9), "alpha {alpha}: {lhs} > {rhs}");
    }
}

#[test]
fn solution_norm_and_residual_monotone_in_alpha() {
    let op = small_radon();
    let y = NormalStream::new(8).fill(op.range_dim());
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..12 {
        let alpha = 10f64.powf(-3.0 + 0.5 * k as f64);
        let x = solve_tikhonov(&TikhonovProblem::new(&op, &y, alpha).unwrap().with_cg(tight())).unwrap().x;
        let xn = norm(&x);
        let res = dist(&op.apply(&x).unwrap(), &y);
        if let Some((pxn, pres)) = prev {
            assert!(xn <= pxn * (1.0 + 1e-9));
            assert!(res >= pres * (1.0 - 1e-9));
        }
        prev = Some((xn, res));
    }
}

#[test]
fn minimizer_beats_perturbations() {
    let op = small_radon();
    let mut rng = NormalStream::new(4);
    let y = rng.fill(op.range_dim());
    let alpha = 0.05;
    let x = solve_tikhonov(&TikhonovProblem::new(&op, &y, alpha).unwrap().with_cg(tight())).unwrap().x;
    let j0 = objective(&op, &x, &y, alpha, None).unwrap();
    for _ in 0..20 {
        let d = rng.fill(x.len());
        for eps in [1e-3, 1e-1] {
            let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
            assert!(objective(&op, &xp, &y, alpha, None).unwrap() >= j0);
        }
    }
}

#[test]
fn z_alpha_matches_dense_formula() {
    let op = DiagonalOperator::harmonic(30).unwrap();
    let a = dense(&op);
    let mut rng = NormalStream::new(19);
    let x_dagger = rng.fill(30);
    let w = rng.fill(30);
    let alpha = 0.02;
    let z = z_alpha(&op, &x_dagger, &w, alpha, &tight()).unwrap();
    let corr = direct(&a, &w, alpha, None);
    for i in 0..30 {
        let expect = x_dagger[i] - alpha * corr[i];
        assert!((z[i] - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
    }
}

#[test]
fn diagonal_solution_is_spectral_filter() {
    // x_k = s_k y_k / (s_k^2 + alpha)
    let op = DiagonalOperator::harmonic(50).unwrap();
    let y = NormalStream::new(6).fill(50);
    let alpha = 1e-3;
    let x = solve_tikhonov(&TikhonovProblem::new(&op, &y, alpha).unwrap().with_cg(tight())).unwrap().x;
    for (k, (&xk, &yk)) in x.iter().zip(&y).enumerate() {
        let s = 1.0 / (k + 1) as f64;
        let expect = s * yk / (s * s + alpha);
        assert!((xk - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
    }
}
