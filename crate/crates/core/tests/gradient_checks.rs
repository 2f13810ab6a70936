//! Gradient correctness against central finite differences, and the
//! collapsed-product oracle for DLN forward passes.

use llc_core::datagen::{gen_realizable, Targets};
use llc_core::models::{
    collapsed_product, forward, nll_loss, nll_loss_grad, rescale_layers, ModelKind, ModelSpec,
    ParamVector, Task,
};
use llc_core::{Dataset, Rng};

fn finite_difference_check(spec: &ModelSpec, data: &Dataset, seed: u64) {
    let mut rng = Rng::seed_from_u64(seed);
    let mut w = ParamVector::init_gaussian(spec, &mut rng);
    // Keep parameters modest so losses stay O(1..1e3) and the finite
    // difference is well conditioned.
    for v in w.as_mut_slice() {
        *v *= 0.3;
    }
    let batch: Vec<usize> = (0..data.n).collect();
    let mut grad = vec![0.0; spec.param_count()];
    nll_loss_grad(spec, &w, data, &batch, &mut grad).unwrap();

    let h = 1e-4;
    let mut checked = 0;
    for i in (0..spec.param_count()).step_by(1 + spec.param_count() / 60) {
        let mut wp = w.clone();
        wp.as_mut_slice()[i] += h;
        let mut wm = w.clone();
        wm.as_mut_slice()[i] -= h;
        let fd = (nll_loss(spec, &wp, data, &batch).unwrap()
            - nll_loss(spec, &wm, data, &batch).unwrap())
            / (2.0 * h);
        let denom = grad[i].abs().max(fd.abs()).max(1e-6);
        assert!(
            (grad[i] - fd).abs() / denom < 1e-5,
            "coordinate {i}: analytic {} vs finite difference {fd}",
            grad[i]
        );
        checked += 1;
    }
    assert!(checked > 5);
}

#[test]
fn dln_gradients_match_finite_differences() {
    let spec = ModelSpec::dln(vec![4, 6, 3]).unwrap();
    let mut rng = Rng::seed_from_u64(7);
    let (w_true, _) = llc_core::datagen::random_true_dln(&spec, &mut rng).unwrap();
    let data = gen_realizable(&spec, &w_true, 24, &mut rng).unwrap();
    finite_difference_check(&spec, &data, 81);
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let spec = ModelSpec::relu_mlp(vec![3, 10, 2]).unwrap();
    let mut rng = Rng::seed_from_u64(9);
    let w_true = ParamVector::init_gaussian(&spec, &mut rng);
    let data = gen_realizable(&spec, &w_true, 24, &mut rng).unwrap();
    finite_difference_check(&spec, &data, 82);
}

#[test]
fn classification_gradients_match_finite_differences() {
    let spec = ModelSpec::new(
        ModelKind::ReluMlp,
        vec![4, 8, 5],
        true,
        1.0,
        Task::Classification,
    )
    .unwrap();
    let mut rng = Rng::seed_from_u64(11);
    let n = 20;
    let inputs: Vec<f64> = (0..n * 4).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
    let classes: Vec<usize> = (0..n).map(|_| rng.uniform_usize(5)).collect();
    let data = Dataset {
        inputs,
        targets: Targets::Classes(classes),
        n,
        input_dim: 4,
        output_dim: 5,
    };
    finite_difference_check(&spec, &data, 83);
}

#[test]
fn dln_forward_equals_collapsed_product() {
    let mut rng = Rng::seed_from_u64(17);
    for _ in 0..20 {
        let depth = rng.uniform_range_usize(1, 5);
        let widths: Vec<usize> = (0..=depth).map(|_| rng.uniform_range_usize(1, 9)).collect();
        let spec = ModelSpec::dln(widths).unwrap();
        let w = ParamVector::init_gaussian(&spec, &mut rng);
        let prod = collapsed_product(&spec, &w).unwrap();
        for _ in 0..5 {
            let x: Vec<f64> = (0..spec.input_dim())
                .map(|_| rng.uniform_in(-10.0, 10.0))
                .collect();
            let layered = forward(&spec, &w, &x).unwrap();
            let direct = prod.matvec(&x).unwrap();
            for (a, b) in layered.iter().zip(&direct) {
                let scale = a.abs().max(b.abs()).max(1e-12);
                assert!((a - b).abs() / scale < 1e-10, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn rescale_preserves_nll_on_batches() {
    let spec = ModelSpec::relu_mlp(vec![4, 12, 6, 3]).unwrap();
    let mut rng = Rng::seed_from_u64(23);
    let w_true = ParamVector::init_gaussian(&spec, &mut rng);
    let data = gen_realizable(&spec, &w_true, 64, &mut rng).unwrap();
    let w = ParamVector::init_gaussian(&spec, &mut rng);
    let batch: Vec<usize> = (0..data.n).collect();
    let base = nll_loss(&spec, &w, &data, &batch).unwrap();
    for (layer, alpha) in [(1usize, 1e3), (2, 3.7e-2), (1, 12.0)] {
        let scaled = rescale_layers(&spec, &w, layer, alpha).unwrap();
        let loss = nll_loss(&spec, &scaled, &data, &batch).unwrap();
        assert!(
            (loss - base).abs() / base.abs().max(1e-12) < 1e-8,
            "layer {layer} alpha {alpha}: {loss} vs {base}"
        );
    }
}
