//! Acceptance suite: one test per exit criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see them stream).
//!
//! Budgets assume an 8-core workstation; on smaller machines the heavy
//! sweeps (criteria 1 and 2) scale wall time accordingly.

use std::path::PathBuf;
use std::time::Instant;

use llc_cli::commands::{rescale_test, sweep, volume};
use llc_core::datagen::{gen_realizable, random_true_dln, MinibatchSchedule};
use llc_core::models::{nll_loss, nll_loss_grad};
use llc_core::numerics::stats::mean_and_stderr;
use llc_core::theory::dln_lambda_brute_force;
use llc_core::{
    dln_lambda, estimate_llc, idealized_llc, potential_by_name, run_chains, tune_step_size,
    ModelObjective, ModelSpec, ParamVector, PotentialObjective, Rng, SamplerConfig, SamplerKind,
};

fn out_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("llc_lab_acceptance").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn report(num: u32, name: &str, pass: bool, details: &str) {
    println!(
        "ACCEPTANCE {num} ({name}): {} - {details}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {num} ({name}) failed: {details}");
}

fn tier_pass(summary: &sweep::SweepSummary) -> (bool, String) {
    let bad_runs = summary.runs_total - summary.ok_runs;
    let pass = summary.median_rel_error <= 0.15
        && summary.p90_rel_error <= 0.35
        && (bad_runs as f64) <= 0.10 * summary.runs_total as f64;
    (
        pass,
        format!(
            "tier {}: median rel err {:.3}, p90 {:.3}, {}OK of {} runs, {:.0}s",
            summary.tier,
            summary.median_rel_error,
            summary.p90_rel_error,
            summary.ok_runs,
            summary.runs_total,
            summary.wallclock_s
        ),
    )
}

/// Criterion 1: DLN estimator accuracy at desk scale, evaluated at the true
/// parameter, tiers 1k (99 runs) and 10k (50 runs). Stock tier step sizes
/// destabilize this loss normalization, so the sweep tunes the step per run
/// with the acceptance-probe pilots; everything else is the tier default.
#[test]
fn criterion_1_dln_accuracy_true_parameter() {
    let mut settings = sweep::SweepSettings::new(sweep::Tier::T1k, out_dir("c1_1k"));
    settings.auto_tune = true;
    settings.seed = 42;
    let s1 = sweep::run(&settings).unwrap();
    let (p1, d1) = tier_pass(&s1);

    let mut settings = sweep::SweepSettings::new(sweep::Tier::T10k, out_dir("c1_10k"));
    settings.runs = Some(50);
    settings.auto_tune = true;
    settings.seed = 43;
    let s2 = sweep::run(&settings).unwrap();
    let (p2, d2) = tier_pass(&s2);

    report(1, "DLN accuracy, true parameter", p1 && p2, &format!("{d1}; {d2}"));
}

/// Criterion 2: the same accuracy bars hold when the LLC is evaluated at an
/// SGD-found minimum (lr 0.01, momentum 0.9, 50k steps; the learning rate
/// backs off by 10x when a run's training blows up, which this loss scale
/// makes routine).
#[test]
fn criterion_2_dln_accuracy_sgd_parameter() {
    let mut settings = sweep::SweepSettings::new(sweep::Tier::T1k, out_dir("c2"));
    settings.runs = Some(30);
    settings.evaluate_at = sweep::EvaluateAt::SgdParam;
    settings.auto_tune = true;
    settings.seed = 44;
    let summary = sweep::run(&settings).unwrap();
    let (pass, details) = tier_pass(&summary);
    let trained: Vec<&sweep::RunRecord> = summary
        .records
        .iter()
        .filter(|r| r.train_lr.is_some())
        .collect();
    let lr_note = format!(
        "{} trained runs, learning rates used: {:?}",
        trained.len(),
        {
            let mut lrs: Vec<f64> = trained.iter().filter_map(|r| r.train_lr).collect();
            lrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            lrs.dedup();
            lrs
        }
    );
    report(2, "DLN accuracy, SGD parameter", pass, &format!("{details}; {lr_note}"));
}

/// Criterion 3: Monte-Carlo volume scaling recovers the known exponents of
/// the cataloged potentials at 10^6 samples per tolerance.
#[test]
fn criterion_3_volume_scaling_oracles() {
    let t0 = Instant::now();
    let cases = [("quad2d", 1.0), ("w2w4", 0.25), ("w2w2", 0.5)];
    let mut details = Vec::new();
    let mut pass = true;
    for (name, known) in cases {
        let scaling = volume::run(name, 1_000_000, 13, 1234, Some(&out_dir("c3"))).unwrap();
        let ok = (scaling.fit.lambda - known).abs() <= 0.05;
        pass &= ok;
        if name == "w2w2" {
            pass &= scaling.fit.multiplicity == 2;
        }
        details.push(format!(
            "{name}: lambda {:.3} (known {known}), m {}",
            scaling.fit.lambda, scaling.fit.multiplicity
        ));
    }
    details.push(format!("{:.0}s", t0.elapsed().as_secs_f64()));
    report(3, "volume-scaling oracles", pass, &details.join("; "));
}

/// Criterion 4: the sampling estimator and the idealized quadrature
/// estimator agree on analytic potentials at n = 10^6, and both sit near
/// the known exponent for the quadratic 1-2D cases. Step sizes here are
/// pinned below the acceptance-band values because on 1-2 parameter targets
/// the 0.90-0.95 band corresponds to a coarse discretization with a
/// visible upward bias.
#[test]
fn criterion_4_idealized_vs_sgld_consistency() {
    let t0 = Instant::now();
    let n = 1_000_000usize;
    let cases: [(&str, f64, usize); 3] = [
        ("quad1d", 2.8e-7, 300_000),
        ("quad2d", 2.8e-7, 300_000),
        ("w2w4", 1.0e-6, 4_000_000),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (name, eps, steps) in cases {
        let pot = potential_by_name(name).unwrap();
        let obj = PotentialObjective {
            potential: &pot,
            nominal_n: n,
        };
        let cfg = SamplerConfig {
            chains: 8,
            mala_probe_stride: 0,
            ..SamplerConfig::new(eps, 1.0, steps, 1, 5)
        };
        let traces = run_chains(&obj, &pot.center, &cfg, SamplerKind::Sgld).unwrap();
        let est = estimate_llc(&traces, &obj, &pot.center, &cfg).unwrap();
        let ideal = idealized_llc(&pot, n as f64, None).unwrap();
        let gap = (est.lambda_hat - ideal).abs();
        let mut ok = gap < 0.1;
        if let Some(known) = pot.known_lambda {
            if name.starts_with("quad") {
                ok &= (est.lambda_hat - known).abs() < 0.1 && (ideal - known).abs() < 0.1;
            }
        }
        pass &= ok;
        details.push(format!(
            "{name}: sgld {:.3}, idealized {:.3}, gap {:.3}",
            est.lambda_hat, ideal, gap
        ));
    }
    details.push(format!("{:.0}s", t0.elapsed().as_secs_f64()));
    report(4, "idealized vs SGLD consistency", pass, &details.join("; "));
}

/// Criterion 5: full-batch SGLD and MALA reproduce the exact Gaussian Gibbs
/// expectation on quad2d within three standard errors over 8 chains, and
/// the MALA acceptance rate after step-size tuning lies in [0.90, 0.95].
#[test]
fn criterion_5_gaussian_gibbs_exactness() {
    let t0 = Instant::now();
    let pot = potential_by_name("quad2d").unwrap();
    let n = 100_000usize;
    let obj = PotentialObjective {
        potential: &pot,
        nominal_n: n,
    };
    let n_beta = n as f64 / (n as f64).ln();
    let gamma = 1.0;
    let expected = 2.0 / (2.0 * (n_beta + gamma));

    let tail_stats = |traces: &[llc_core::ChainTrace]| {
        let means: Vec<f64> = traces
            .iter()
            .map(|t| {
                let tail = &t.losses[(t.losses.len() as f64 * 0.9) as usize..];
                tail.iter().sum::<f64>() / tail.len() as f64
            })
            .collect();
        mean_and_stderr(&means).unwrap()
    };

    // SGLD at a step size whose Euler bias is ~0.5%, well under the band.
    let sgld_cfg = SamplerConfig {
        chains: 8,
        mala_probe_stride: 0,
        ..SamplerConfig::new(1.15e-6, gamma, 50_000, 1, 9)
    };
    let sgld = run_chains(&obj, &pot.center, &sgld_cfg, SamplerKind::Sgld).unwrap();
    let (sgld_mean, sgld_se) = tail_stats(&sgld);
    let sgld_ok = (sgld_mean - expected).abs() < 3.0 * sgld_se;

    // MALA at the tuned step size; exactness is independent of the step.
    let base = SamplerConfig::new(1e-5, gamma, 100, 1, 9);
    let (eps, _) = tune_step_size(&obj, &pot.center, &base).unwrap();
    let mala_cfg = SamplerConfig {
        chains: 8,
        mala_probe_stride: 0,
        ..SamplerConfig::new(eps, gamma, 50_000, 1, 10)
    };
    let mala = run_chains(&obj, &pot.center, &mala_cfg, SamplerKind::Mala).unwrap();
    let (mala_mean, mala_se) = tail_stats(&mala);
    let mala_ok = (mala_mean - expected).abs() < 3.0 * mala_se;
    let rates: Vec<f64> = mala.iter().filter_map(|t| t.acceptance_rate()).collect();
    let rate = rates.iter().sum::<f64>() / rates.len() as f64;
    let rate_ok = (0.90..=0.95).contains(&rate);

    let details = format!(
        "E[L] exact {expected:.4e}; SGLD {sgld_mean:.4e} (se {sgld_se:.1e}), MALA {mala_mean:.4e} \
         (se {mala_se:.1e}); tuned eps {eps:.2e}, MALA acceptance {rate:.3}; {:.0}s",
        t0.elapsed().as_secs_f64()
    );
    report(
        5,
        "Gaussian Gibbs exactness",
        sgld_ok && mala_ok && rate_ok,
        &details,
    );
}

/// Criterion 6: SGLD and MALA agree on a realizable two-hidden-layer ReLU
/// network (10-20-20-10) at n = 10^2, 10^3, 10^4, and minibatch SGLD is
/// faster than full-batch MALA at n = 10^4.
#[test]
fn criterion_6_mala_vs_sgld_agreement() {
    let t0 = Instant::now();
    let spec = ModelSpec::relu_mlp(vec![10, 20, 20, 10]).unwrap();
    let w_star = ParamVector::init_gaussian(&spec, &mut Rng::seed_from_u64(6001));
    let mut pass = true;
    let mut details = Vec::new();
    for (i, n) in [100usize, 1_000, 10_000].into_iter().enumerate() {
        let mut rng = Rng::seed_from_u64(6100 + i as u64);
        let data = gen_realizable(&spec, &w_star, n, &mut rng).unwrap();
        let obj = ModelObjective::new(&spec, &data).unwrap();
        let batch = 32.min(n);
        let base = SamplerConfig {
            chains: 1,
            ..SamplerConfig::new(1e-5, 1.0, 100, batch, 6200 + i as u64)
        };
        let (eps, _) = tune_step_size(&obj, w_star.as_slice(), &base).unwrap();

        // SGLD carries an O(eps) discretization bias that MALA's rejection
        // step removes, so the comparison runs SGLD well below the tuned
        // step with a proportionally longer chain; minibatch steps are
        // cheap enough that this costs little.
        let sgld_cfg = SamplerConfig {
            chains: 4,
            mala_probe_stride: 0,
            ..SamplerConfig::new(eps / 8.0, 1.0, 160_000, batch, 6300 + i as u64)
        };
        let t_sgld = Instant::now();
        let sgld = run_chains(&obj, w_star.as_slice(), &sgld_cfg, SamplerKind::Sgld).unwrap();
        let sgld_wall = t_sgld.elapsed().as_secs_f64();
        let est_s = estimate_llc(&sgld, &obj, w_star.as_slice(), &sgld_cfg).unwrap();

        let mala_cfg = SamplerConfig {
            chains: 4,
            mala_probe_stride: 0,
            ..SamplerConfig::new(eps, 1.0, 20_000, batch, 6400 + i as u64)
        };
        let t_mala = Instant::now();
        let mala = run_chains(&obj, w_star.as_slice(), &mala_cfg, SamplerKind::Mala).unwrap();
        let mala_wall = t_mala.elapsed().as_secs_f64();
        let est_m = estimate_llc(&mala, &obj, w_star.as_slice(), &mala_cfg).unwrap();

        let pooled = (est_s.stderr.powi(2) + est_m.stderr.powi(2)).sqrt();
        let gap = (est_s.lambda_hat - est_m.lambda_hat).abs();
        let ok = gap < 2.0 * pooled;
        pass &= ok;
        if n == 10_000 {
            pass &= sgld_wall < mala_wall;
            details.push(format!("wallclock sgld {sgld_wall:.1}s vs mala {mala_wall:.1}s"));
        }
        details.push(format!(
            "n={n}: sgld {:.2}+-{:.2}, mala {:.2}+-{:.2}, gap {:.2} vs 2x pooled {:.2}",
            est_s.lambda_hat,
            est_s.stderr,
            est_m.lambda_hat,
            est_m.stderr,
            gap,
            2.0 * pooled
        ));
    }
    details.push(format!("{:.0}s", t0.elapsed().as_secs_f64()));
    report(6, "MALA vs SGLD agreement", pass, &details.join("; "));
}

/// Criterion 7: the estimate is invariant under function-preserving layer
/// rescaling across eight orders of magnitude when the SGLD preconditioner
/// is applied consistently (drift, noise covariance, localizer metric).
#[test]
fn criterion_7_rescaling_invariance() {
    let t0 = Instant::now();
    let mut settings = rescale_test::RescaleSettings::new(out_dir("c7"));
    settings.seed = 7;
    settings.demo_unpreconditioned = true;
    let out = rescale_test::run(&settings).unwrap();
    let pass = out.spread < 3.0 * out.pooled_stderr && out.pooled_stderr > 0.0;
    let details = format!(
        "spread {:.4} vs 3x pooled stderr {:.4} over {} alphas; {}; {:.0}s",
        out.spread,
        3.0 * out.pooled_stderr,
        out.points.len(),
        out.demo_outcome.as_deref().unwrap_or("no demo"),
        t0.elapsed().as_secs_f64()
    );
    report(7, "rescaling invariance", pass, &details);
}

/// Criterion 8: the closed-form DLN learning coefficient is self-consistent:
/// exhaustive subset search agrees for every signature with depth <= 5 and
/// widths <= 6, regular signatures give d/2, the two worked singular cases
/// give 1/2 and 3/2, and lambda never exceeds d/2 over 10^3 random draws.
#[test]
fn criterion_8_theory_oracle_self_consistency() {
    let t0 = Instant::now();
    let mut pass = true;
    let mut checked = 0usize;

    for depth in 1..=5usize {
        let mut widths = vec![1usize; depth + 1];
        'odometer: loop {
            for rank in 0..=*widths.iter().min().unwrap() {
                let (lambda, _) = dln_lambda(&widths, rank).unwrap();
                let brute = dln_lambda_brute_force(&widths, rank).unwrap();
                pass &= !brute.is_empty() && brute.iter().all(|b| (b - lambda).abs() < 1e-10);
                checked += 1;
            }
            let mut i = 0;
            loop {
                if i == widths.len() {
                    break 'odometer;
                }
                widths[i] += 1;
                if widths[i] <= 6 {
                    break;
                }
                widths[i] = 1;
                i += 1;
            }
        }
    }

    for h in 1..8usize {
        let widths = vec![h; 3];
        let (lambda, _) = dln_lambda(&widths, h).unwrap();
        let expect = (-(h as f64).powi(2) + h as f64 * (2 * h) as f64) / 2.0;
        pass &= (lambda - expect).abs() < 1e-12;
    }
    let (l1, _) = dln_lambda(&[1, 1, 1], 0).unwrap();
    let (l2, _) = dln_lambda(&[2, 1, 2], 1).unwrap();
    pass &= (l1 - 0.5).abs() < 1e-12 && (l2 - 1.5).abs() < 1e-12;

    let mut rng = Rng::seed_from_u64(800);
    for _ in 0..1_000 {
        let depth = rng.uniform_range_usize(1, 8);
        let widths: Vec<usize> = (0..=depth)
            .map(|_| rng.uniform_range_usize(1, 40))
            .collect();
        let rank = rng.uniform_usize(*widths.iter().min().unwrap() + 1);
        let (lambda, sig) = dln_lambda(&widths, rank).unwrap();
        pass &= lambda <= sig.param_count() as f64 / 2.0 + 1e-9;
    }

    let details = format!(
        "{checked} exhaustive signatures, worked cases 0.5/1.5 ok, d/2 bound over 1000 draws; {:.1}s",
        t0.elapsed().as_secs_f64()
    );
    report(8, "theory oracle self-consistency", pass, &details);
}

/// Criterion 9: the property suite in one sweep: finite-difference gradient
/// agreement, determinism by seed, minibatch epoch coverage, rescale
/// function invariance, and the estimator's arithmetic identity.
#[test]
fn criterion_9_property_suite() {
    let t0 = Instant::now();
    let mut pass = true;
    let mut notes: Vec<String> = Vec::new();

    // Gradient finite differences on a DLN and a biased MLP.
    for (spec, seed) in [
        (ModelSpec::dln(vec![3, 5, 2]).unwrap(), 901u64),
        (ModelSpec::relu_mlp(vec![3, 7, 2]).unwrap(), 902),
    ] {
        let mut rng = Rng::seed_from_u64(seed);
        let mut w = ParamVector::init_gaussian(&spec, &mut rng);
        for v in w.as_mut_slice() {
            *v *= 0.3;
        }
        let w_data = ParamVector::init_gaussian(&spec, &mut rng);
        let data = gen_realizable(&spec, &w_data, 16, &mut rng).unwrap();
        let batch: Vec<usize> = (0..16).collect();
        let mut grad = vec![0.0; spec.param_count()];
        nll_loss_grad(&spec, &w, &data, &batch, &mut grad).unwrap();
        let h = 1e-4;
        for i in 0..spec.param_count() {
            let mut wp = w.clone();
            wp.as_mut_slice()[i] += h;
            let mut wm = w.clone();
            wm.as_mut_slice()[i] -= h;
            let fd = (nll_loss(&spec, &wp, &data, &batch).unwrap()
                - nll_loss(&spec, &wm, &data, &batch).unwrap())
                / (2.0 * h);
            let denom = grad[i].abs().max(fd.abs()).max(1e-6);
            pass &= (grad[i] - fd).abs() / denom < 1e-5;
        }
    }
    notes.push("gradients".into());

    // Determinism by seed for chains.
    {
        let pot = potential_by_name("quad2d").unwrap();
        let obj = PotentialObjective {
            potential: &pot,
            nominal_n: 10_000,
        };
        let cfg = SamplerConfig {
            chains: 2,
            ..SamplerConfig::new(1e-5, 1.0, 500, 1, 903)
        };
        let a = run_chains(&obj, &pot.center, &cfg, SamplerKind::Sgld).unwrap();
        let b = run_chains(&obj, &pot.center, &cfg, SamplerKind::Sgld).unwrap();
        pass &= a
            .iter()
            .zip(&b)
            .all(|(x, y)| x.losses == y.losses && x.final_params == y.final_params);
        notes.push("determinism".into());
    }

    // Epoch coverage.
    {
        let mut rng = Rng::seed_from_u64(904);
        for (n, m) in [(10usize, 3usize), (64, 8), (7, 7), (5, 2)] {
            let mut schedule = MinibatchSchedule::new(n, m, &mut rng).unwrap();
            let mut seen = Vec::new();
            for _ in 0..schedule.batches_per_epoch() {
                seen.extend_from_slice(schedule.next_batch());
            }
            seen.sort_unstable();
            pass &= seen == (0..n).collect::<Vec<_>>();
        }
        notes.push("epoch coverage".into());
    }

    // Rescale function invariance.
    {
        let spec = ModelSpec::relu_mlp(vec![3, 9, 2]).unwrap();
        let mut rng = Rng::seed_from_u64(905);
        let w = ParamVector::init_gaussian(&spec, &mut rng);
        let scaled = llc_core::models::rescale_layers(&spec, &w, 1, 1e3).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.uniform_in(-10.0, 10.0)).collect();
            let a = llc_core::models::forward(&spec, &w, &x).unwrap();
            let b = llc_core::models::forward(&spec, &scaled, &x).unwrap();
            let scale = a.iter().fold(1e-9f64, |m, v| m.max(v.abs()));
            pass &= a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-6 * scale);
        }
        notes.push("rescale invariance".into());
    }

    // Arithmetic identity of the estimator.
    {
        let spec = ModelSpec::dln(vec![2, 3, 2]).unwrap();
        let mut rng = Rng::seed_from_u64(906);
        let (w_true, _) = random_true_dln(&spec, &mut rng).unwrap();
        let data = gen_realizable(&spec, &w_true, 2_000, &mut rng).unwrap();
        let obj = ModelObjective::new(&spec, &data).unwrap();
        let cfg = SamplerConfig {
            chains: 2,
            mala_probe_stride: 0,
            ..SamplerConfig::new(1e-8, 1.0, 2_000, 100, 907)
        };
        let traces = run_chains(&obj, w_true.as_slice(), &cfg, SamplerKind::Sgld).unwrap();
        let est = estimate_llc(&traces, &obj, w_true.as_slice(), &cfg).unwrap();
        let n_beta = data.n as f64 * cfg.beta_for(data.n);
        let l_init = nll_loss(&spec, &w_true, &data, &data.all_indices()).unwrap();
        let burnin = cfg.burnin_len();
        let manual: Vec<f64> = traces
            .iter()
            .map(|t| {
                let tail = &t.losses[burnin..];
                n_beta * (tail.iter().sum::<f64>() / tail.len() as f64 - l_init)
            })
            .collect();
        let manual_mean = manual.iter().sum::<f64>() / manual.len() as f64;
        pass &= (est.lambda_hat - manual_mean).abs() <= 1e-12 * manual_mean.abs().max(1.0);
        pass &= est
            .per_chain
            .iter()
            .zip(&manual)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
        notes.push("lambda identity".into());
    }

    let details = format!("{}; {:.0}s", notes.join(", "), t0.elapsed().as_secs_f64());
    report(9, "property suite", pass, &details);
}
