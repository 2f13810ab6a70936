use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use llc_core::datagen::{gen_realizable, random_true_dln};
use llc_core::theory::mc_volume;
use llc_core::{
    dln_lambda, potential_by_name, sgld_chain, ModelObjective, ModelSpec, PotentialObjective,
    Rng, SamplerConfig,
};

fn bench_forward_grad(c: &mut Criterion) {
    let spec = ModelSpec::dln(vec![30, 30, 30, 30]).unwrap();
    let mut rng = Rng::seed_from_u64(1);
    let (w_true, _) = random_true_dln(&spec, &mut rng).unwrap();
    let data = gen_realizable(&spec, &w_true, 2_000, &mut rng).unwrap();
    let batch: Vec<usize> = (0..500).collect();
    let mut grad = vec![0.0; spec.param_count()];
    c.bench_function("dln_minibatch_loss_grad_500x2.7k", |b| {
        b.iter(|| {
            llc_core::models::nll_loss_grad(
                black_box(&spec),
                black_box(&w_true),
                black_box(&data),
                &batch,
                &mut grad,
            )
            .unwrap()
        })
    });

    let mlp = ModelSpec::relu_mlp(vec![10, 20, 20, 10]).unwrap();
    let w = llc_core::ParamVector::init_gaussian(&mlp, &mut rng);
    let mdata = gen_realizable(&mlp, &w, 1_000, &mut rng).unwrap();
    let mbatch: Vec<usize> = (0..32).collect();
    let mut mgrad = vec![0.0; mlp.param_count()];
    c.bench_function("mlp_minibatch_loss_grad_32x850", |b| {
        b.iter(|| {
            llc_core::models::nll_loss_grad(
                black_box(&mlp),
                black_box(&w),
                black_box(&mdata),
                &mbatch,
                &mut mgrad,
            )
            .unwrap()
        })
    });
}

fn bench_sgld_steps(c: &mut Criterion) {
    let spec = ModelSpec::dln(vec![25, 25, 25]).unwrap();
    let mut rng = Rng::seed_from_u64(2);
    let (w_true, _) = random_true_dln(&spec, &mut rng).unwrap();
    let data = gen_realizable(&spec, &w_true, 5_000, &mut rng).unwrap();
    let obj = ModelObjective::new(&spec, &data).unwrap();
    let cfg = SamplerConfig {
        mala_probe_stride: 0,
        ..SamplerConfig::new(1e-12, 1.0, 200, 500, 3)
    };
    c.bench_function("sgld_200_steps_batch500_d1.3k", |b| {
        b.iter(|| sgld_chain(&obj, black_box(w_true.as_slice()), &cfg, 0).unwrap())
    });

    let pot = potential_by_name("quad2d").unwrap();
    let pobj = PotentialObjective {
        potential: &pot,
        nominal_n: 100_000,
    };
    let pcfg = SamplerConfig {
        mala_probe_stride: 0,
        ..SamplerConfig::new(1e-6, 1.0, 10_000, 1, 4)
    };
    c.bench_function("sgld_10k_steps_quad2d", |b| {
        b.iter(|| sgld_chain(&pobj, &[0.0, 0.0], &pcfg, 0).unwrap())
    });
}

fn bench_theory(c: &mut Criterion) {
    c.bench_function("dln_lambda_depth40", |b| {
        let widths: Vec<usize> = (0..=40).map(|i| 500 + (i * 37) % 1500).collect();
        b.iter(|| dln_lambda(black_box(&widths), black_box(400)).unwrap())
    });
    let pot = potential_by_name("w2w4").unwrap();
    c.bench_function("mc_volume_w2w4_100k", |b| {
        b.iter(|| {
            let mut rng = Rng::seed_from_u64(9);
            mc_volume(black_box(&pot), 1e-3, 100_000, &mut rng).unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_forward_grad, bench_sgld_steps, bench_theory
}
criterion_main!(benches);
