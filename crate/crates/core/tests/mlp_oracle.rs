use compact_tik::mlp::{
    coords_matrix, gradient_to_flat, mlp_backward, mlp_forward, output_bound, project_weights, AdamConfig, AdamState,
    LayerParams,
};
use compact_tik::{MlpArchitecture, MlpParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain-loop forward pass. Returns the output and the smallest
/// |pre-activation| seen, which measures the distance to a kink.
fn reference_forward(params: &MlpParams, x: &[f64]) -> (f64, f64) {
    let slope = params.arch.leaky_slope;
    let mut a = x.to_vec();
    let mut closest = f64::INFINITY;
    let last = params.layers.len() - 1;
    for (k, layer) in params.layers.iter().enumerate() {
        let mut z = vec![0.0; layer.biases.len()];
        for (r, zr) in z.iter_mut().enumerate() {
            let mut acc = layer.biases[r];
            for (c, ac) in a.iter().enumerate() {
                acc += layer.weights[[r, c]] * ac;
            }
            *zr = acc;
            closest = closest.min(acc.abs());
        }
        a = if k == last {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            z.iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect()
        };
    }
    (a[0], closest)
}

fn random_params(arch: MlpArchitecture, rng: &mut ChaCha8Rng) -> MlpParams {
    let mut p = MlpParams::init(arch, rng.random()).unwrap();
    for layer in &mut p.layers {
        layer.biases.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    p
}

#[test]
fn gradient_matches_central_differences() {
    let arch = MlpArchitecture::coordinate(vec![16, 16]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let h = 1e-5;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 20 {
        let params = random_params(arch.clone(), &mut rng);
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let (out, closest) = reference_forward(&params, &x);
        // perturbations of size h must not cross a kink, and a dead output has no gradient to check
        if closest < 1e-3 || out <= 1e-3 {
            continue;
        }
        let coords = coords_matrix(&[(x[0], x[1])]);
        let analytic = gradient_to_flat(&mlp_backward(&params, coords.view(), &[1.0]).unwrap());
        let flat = params.to_flat();
        let mut probe = params.clone();
        for (k, g) in analytic.iter().enumerate() {
            let mut w = flat.clone();
            w[k] = flat[k] + h;
            probe.set_flat(&w).unwrap();
            let up = reference_forward(&probe, &x).0;
            w[k] = flat[k] - h;
            probe.set_flat(&w).unwrap();
            let down = reference_forward(&probe, &x).0;
            let fd = (up - down) / (2.0 * h);
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        checked += 1;
    }
    assert!(worst <= 1e-4, "max relative gradient error {worst}");
}

#[test]
fn batched_forward_matches_reference() {
    let arch = MlpArchitecture::coordinate(vec![7, 5, 3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = random_params(arch, &mut rng);
    let pts: Vec<(f64, f64)> = (0..40).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let out = mlp_forward(&params, coords_matrix(&pts).view()).unwrap();
    for (o, p) in out.iter().zip(&pts) {
        assert!((o - reference_forward(&params, &[p.0, p.1]).0).abs() <= 1e-13);
    }
}

#[test]
fn batch_gradient_is_weighted_sum_of_point_gradients() {
    let arch = MlpArchitecture::coordinate(vec![6, 6]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = random_params(arch, &mut rng);
    let pts: Vec<(f64, f64)> = (0..10).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let cot: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
    let batch = gradient_to_flat(&mlp_backward(&params, coords_matrix(&pts).view(), &cot).unwrap());
    let mut sum = vec![0.0; batch.len()];
    for (p, c) in pts.iter().zip(&cot) {
        let g = gradient_to_flat(&mlp_backward(&params, coords_matrix(&[*p]).view(), &[*c]).unwrap());
        sum.iter_mut().zip(&g).for_each(|(s, v)| *s += v);
    }
    for (a, b) in batch.iter().zip(&sum) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn adam_first_steps_by_hand() {
    let arch = MlpArchitecture::coordinate(vec![3]).unwrap();
    let mut params = MlpParams::init(arch.clone(), 4).unwrap();
    let cfg = AdamConfig::with_learning_rate(0.01);
    let mut state = AdamState::new(&params, cfg);
    let grads_seq: Vec<Vec<LayerParams>> = (0..3)
        .map(|s| {
            let mut g = MlpParams::init(arch.clone(), 100 + s).unwrap();
            for l in &mut g.layers {
                l.biases.mapv_inplace(|_| 0.3 - 0.1 * s as f64);
            }
            g.layers
        })
        .collect();
    let mut w = params.to_flat();
    let (mut m, mut v) = (vec![0.0; w.len()], vec![0.0; w.len()]);
    for (t, g) in grads_seq.iter().enumerate() {
        state.step(&mut params, g).unwrap();
        let g = gradient_to_flat(g);
        let t = (t + 1) as i32;
        for k in 0..w.len() {
            m[k] = 0.9 * m[k] + 0.1 * g[k];
            v[k] = 0.999 * v[k] + 0.001 * g[k] * g[k];
            let mh = m[k] / (1.0 - 0.9f64.powi(t));
            let vh = v[k] / (1.0 - 0.999f64.powi(t));
            w[k] -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        for (a, b) in params.to_flat().iter().zip(&w) {
            assert!((a - b).abs() <= 1e-14);
        }
    }
}

fn arch_strategy() -> impl Strategy<Value = (Vec<usize>, u64, f64)> {
    (prop::collection::vec(1usize..6, 1..4), any::<u64>(), 0.05f64..3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_idempotent_and_bounded((widths, seed, c) in arch_strategy()) {
        let arch = MlpArchitecture::coordinate(widths).unwrap();
        let mut p = MlpParams::init(arch, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &mut p.layers {
            l.weights.mapv_inplace(|_| rng.random_range(-5.0..5.0));
            l.biases.mapv_inplace(|_| rng.random_range(-5.0..5.0));
        }
        let once = project_weights(&p, c).unwrap();
        let twice = project_weights(&once, c).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.max_abs() <= c);
        // entries already inside the box are untouched
        for (a, b) in p.to_flat().iter().zip(once.to_flat()) {
            if a.abs() <= c {
                prop_assert_eq!(*a, b);
            }
        }
    }

    #[test]
    fn outputs_nonnegative_and_within_compactness_bound((widths, seed, c) in arch_strategy()) {
        let arch = MlpArchitecture::coordinate(widths).unwrap();
        let mut p = MlpParams::init(arch.clone(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        for l in &mut p.layers {
            l.weights.mapv_inplace(|_| rng.random_range(-4.0..4.0));
            l.biases.mapv_inplace(|_| rng.random_range(-4.0..4.0));
        }
        let p = project_weights(&p, c).unwrap();
        let pts: Vec<(f64, f64)> = (0..25).map(|_| (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))).collect();
        let out = mlp_forward(&p, coords_matrix(&pts).view()).unwrap();
        let bound = output_bound(&arch, c, 1.0);
        for v in out {
            prop_assert!(v >= 0.0);
            prop_assert!(v <= bound * (1.0 + 1e-12));
        }
    }
}
