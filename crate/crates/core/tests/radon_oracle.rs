use compact_tik::experiment::NormalStream;
use compact_tik::linop::materialize;
use compact_tik::{ImageGrid, LinearOperator, RadonGeometry, RadonOperator};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn hat(t: f64) -> f64 {
    (1.0 - t.abs()).max(0.0)
}

/// Independent dense build: every entry is the trapezoid sum of the
/// tensor-product hat basis function of one pixel along one line.
fn dense_radon(n: usize, g: &RadonGeometry) -> Vec<Vec<f64>> {
    let dx = 2.0 / n as f64;
    let center = |i: usize| -1.0 + (i as f64 + 0.5) * dx;
    let r = std::f64::consts::SQRT_2;
    let mut rows = Vec::new();
    for q in 0..g.n_angles() {
        let theta = q as f64 * std::f64::consts::PI / g.n_angles() as f64;
        for p in 0..g.n_bins() {
            let s = -g.det_halfwidth() + (p as f64 + 0.5) * 2.0 * g.det_halfwidth() / g.n_bins() as f64;
            let mut row = vec![0.0; n * n];
            if s.abs() < r {
                let half = (r * r - s * s).sqrt();
                let m = ((2.0 * half / g.step()).ceil() as usize).max(1);
                let h = 2.0 * half / m as f64;
                for k in 0..=m {
                    let t = -half + k as f64 * h;
                    let x = s * theta.cos() - t * theta.sin();
                    let y = s * theta.sin() + t * theta.cos();
                    if x.abs() > 1.0 || y.abs() > 1.0 {
                        continue;
                    }
                    let w = if k == 0 || k == m { h / 2.0 } else { h };
                    for j in 0..n {
                        let by = hat((y - center(j)) / dx);
                        if by == 0.0 {
                            continue;
                        }
                        for i in 0..n {
                            row[j * n + i] += w * hat((x - center(i)) / dx) * by;
                        }
                    }
                }
            }
            rows.push(row);
        }
    }
    rows
}

#[test]
fn dense_equivalence_8x8_10_angles() {
    let n = 8;
    let g = RadonGeometry::for_grid(n, 10).unwrap();
    let op = RadonOperator::new(g.clone(), n, n).unwrap();
    let dense = dense_radon(n, &g);
    let m = materialize(&op).unwrap();
    assert_eq!((m.rows(), m.cols()), (dense.len(), n * n));
    for (r, row) in dense.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            assert!((m.get(r, c) - v).abs() <= 1e-12, "entry ({r},{c}): {} vs {v}", m.get(r, c));
        }
    }
    // adjoint columns against the transpose
    let mt = m.transpose();
    for r in 0..dense.len() {
        let mut e = vec![0.0; dense.len()];
        e[r] = 1.0;
        let col = op.apply_adjoint(&e).unwrap();
        for (c, v) in col.iter().enumerate() {
            assert!((v - mt.get(c, r)).abs() <= 1e-12);
        }
    }
    let mut rng = NormalStream::new(11);
    let x = rng.fill(n * n);
    let fx = op.apply(&x).unwrap();
    for (r, row) in dense.iter().enumerate() {
        assert!((fx[r] - dot(row, &x)).abs() <= 1e-12);
    }
}

#[test]
fn adjoint_defect_64x64_30_angles() {
    let n = 64;
    let op = RadonOperator::new(RadonGeometry::for_grid(n, 30).unwrap(), n, n).unwrap();
    let mut rng = NormalStream::new(2024);
    for _ in 0..20 {
        let x = rng.fill(op.domain_dim());
        let y = rng.fill(op.range_dim());
        let rx = op.apply(&x).unwrap();
        let rty = op.apply_adjoint(&y).unwrap();
        let defect = (dot(&rx, &y) - dot(&x, &rty)).abs() / (norm(&rx) * norm(&y));
        assert!(defect <= 1e-12, "defect {defect}");
    }
}

#[test]
fn smooth_bump_matches_analytic_projection() {
    // f = (1 - rho^2 / a^2)^2 on rho < a projects to (16 / 15) (a^2 - s^2)^(5/2) / a^4
    let a: f64 = 0.8;
    let n = 128;
    let img = ImageGrid::from_fn(n, n, |x, y| {
        let r2 = (x * x + y * y) / (a * a);
        if r2 < 1.0 {
            (1.0 - r2).powi(2)
        } else {
            0.0
        }
    })
    .unwrap();
    let g = RadonGeometry::for_grid(n, 7).unwrap();
    let op = RadonOperator::new(g.clone(), n, n).unwrap();
    let sino = op.forward(img.values()).unwrap();
    let exact: Vec<f64> = (0..g.n_angles())
        .flat_map(|_| {
            (0..g.n_bins()).map(|p| {
                let s = g.offset(p);
                let w = a * a - s * s;
                if w > 0.0 {
                    16.0 / 15.0 * w.powf(2.5) / a.powi(4)
                } else {
                    0.0
                }
            })
        })
        .collect();
    let diff: Vec<f64> = sino.iter().zip(&exact).map(|(u, v)| u - v).collect();
    let rel = norm(&diff) / norm(&exact);
    assert!(rel < 2e-3, "relative projection error {rel}");
}

#[test]
fn rotating_the_image_shifts_the_angles() {
    // a quarter turn of the image shifts the angle index by n_angles / 2
    let n = 32;
    let n_angles = 8;
    let g = RadonGeometry::for_grid(n, n_angles).unwrap();
    let op = RadonOperator::new(g.clone(), n, n).unwrap();
    let mut rng = NormalStream::new(5);
    let x = rng.fill(n * n);
    // rot(xi1, xi2) = x(xi2, -xi1), i.e. x turned by +90 degrees
    let mut rot = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            rot[j * n + i] = x[(n - 1 - i) * n + j];
        }
    }
    let a = op.forward(&x).unwrap();
    let b = op.forward(&rot).unwrap();
    let nb = g.n_bins();
    for q in 0..n_angles / 2 {
        for p in 0..nb {
            let lhs = b[(q + n_angles / 2) * nb + p];
            let rhs = a[q * nb + p];
            assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "q={q} p={p}: {lhs} vs {rhs}");
        }
    }
}
