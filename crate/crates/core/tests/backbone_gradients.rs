mod common;

use common::{max_model_gradient_error, random_dataset, rel_err, seeded, FD_STEP};
use ordinal_clm::backbone::{BackboneParams, BackboneSpec};
use ordinal_clm::model::{HeadKind, OrdinalModel};
use ordinal_clm::LinkFunction;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_backbone(rng: &mut ChaCha8Rng) -> BackboneParams {
    let input_dim = rng.random_range(1..6);
    let depth = rng.random_range(0..4);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..7)).collect();
    let output_dim = rng.random_range(1..4);
    let mut params = BackboneParams::init(BackboneSpec::new(input_dim, hidden, output_dim).unwrap(), rng).unwrap();
    for layer in &mut params.layers {
        for b in &mut layer.bias {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    params
}

fn naive_forward(params: &BackboneParams, x: &[f64]) -> Vec<f64> {
    let last = params.layers.len() - 1;
    let mut h = x.to_vec();
    for (k, layer) in params.layers.iter().enumerate() {
        let mut next = vec![0.0; layer.out_dim];
        for o in 0..layer.out_dim {
            let mut z = layer.bias[o];
            for i in 0..layer.in_dim {
                z += layer.weights[o * layer.in_dim + i] * h[i];
            }
            next[o] = if k == last || z > 0.0 { z } else { z.exp_m1() };
        }
        h = next;
    }
    h
}

#[test]
fn forward_matches_naive_evaluation() {
    let mut rng = seeded(21);
    for _ in 0..200 {
        let params = random_backbone(&mut rng);
        let x: Vec<f64> = (0..params.spec().input_dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (out, _) = params.forward(&x).unwrap();
        let expected = naive_forward(&params, &x);
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn backward_matches_finite_differences() {
    let mut rng = seeded(22);
    for config in 0..50 {
        let params = random_backbone(&mut rng);
        let spec = params.spec().clone();
        let x: Vec<f64> = (0..spec.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let u: Vec<f64> = (0..spec.output_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let contract = |p: &BackboneParams, x: &[f64]| -> f64 {
            p.forward(x).unwrap().0.iter().zip(&u).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = params.forward(&x).unwrap();
        let grads = params.backward(&cache, &u).unwrap();
        let mut analytic = Vec::new();
        grads.flatten_into(&mut analytic);
        let mut base = Vec::new();
        params.flatten_into(&mut base);
        let mut probe = params.clone();
        for i in 0..base.len() {
            let mut v = base.clone();
            v[i] += FD_STEP;
            probe.load_flat(&v);
            let up = contract(&probe, &x);
            v[i] -= 2.0 * FD_STEP;
            probe.load_flat(&v);
            let down = contract(&probe, &x);
            let numeric = (up - down) / (2.0 * FD_STEP);
            assert!(rel_err(analytic[i], numeric) < 1e-5, "config {config} param {i}");
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += FD_STEP;
            let up = contract(&params, &xp);
            xp[i] -= 2.0 * FD_STEP;
            let down = contract(&params, &xp);
            let numeric = (up - down) / (2.0 * FD_STEP);
            assert!(rel_err(grads.input[i], numeric) < 1e-5, "config {config} input {i}");
        }
    }
}

#[test]
fn accumulated_gradients_sum_over_samples() {
    let mut rng = seeded(23);
    let params = random_backbone(&mut rng);
    let spec = params.spec().clone();
    let mut total = ordinal_clm::backbone::BackboneGradients::zeros(&spec);
    let mut separate = vec![0.0; params.n_params()];
    for _ in 0..5 {
        let x: Vec<f64> = (0..spec.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let u: Vec<f64> = (0..spec.output_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, cache) = params.forward(&x).unwrap();
        params.backward_accumulate(&cache, &u, &mut total).unwrap();
        let mut one = Vec::new();
        params.backward(&cache, &u).unwrap().flatten_into(&mut one);
        for (s, g) in separate.iter_mut().zip(one) {
            *s += g;
        }
    }
    let mut flat = Vec::new();
    total.flatten_into(&mut flat);
    for (a, b) in flat.iter().zip(&separate) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let mut rng = seeded(24);
    let kinds = [
        HeadKind::Clm(LinkFunction::Logit),
        HeadKind::Clm(LinkFunction::Probit),
        HeadKind::Clm(LinkFunction::CLogLog),
        HeadKind::Nominal,
    ];
    for (k, kind) in kinds.into_iter().enumerate() {
        for q in [2, 3, 5] {
            let data = random_dataset(&mut rng, 8, 3, q);
            let model = OrdinalModel::init(kind, 3, vec![4, 3], q, &mut rng).unwrap();
            let indices: Vec<usize> = (0..8).collect();
            let err = max_model_gradient_error(&model, &data, &indices);
            assert!(err < 1e-4, "{kind} Q={q} case {k}: relative error {err}");
        }
    }
}
