//! Random-DLN sweep: draw architectures and true parameters, compute the
//! theoretical learning coefficient, generate realizable data, optionally
//! train with SGD first, run SGLD chains, and compare the estimate against
//! theory. One CSV row per run plus a summary.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use llc_core::datagen::{gen_realizable, random_true_dln};
use llc_core::numerics::stats::{median, percentile};
use llc_core::{
    dln_lambda, estimate_llc, models, run_chains, sgd_train, tune_step_size, Error,
    ModelObjective, ModelSpec, ParamVector, Result, Rng, SamplerConfig, SamplerKind, TrainConfig,
};

use crate::plot::{Plot, Series};
use crate::report;

/// Order-of-magnitude experiment batches with their stock settings
/// (architecture ranges, SGLD step size/steps, dataset size, run count).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tier {
    T1k,
    T10k,
    T100k,
    T1M,
    T10M,
    T100M,
}

pub struct TierDefaults {
    pub name: &'static str,
    pub depth_range: (usize, usize),
    pub width_range: (usize, usize),
    pub epsilon: f64,
    pub steps: usize,
    pub n: usize,
    pub runs: usize,
    /// Batches beyond desk scale; accepted but expect hours of wall time.
    pub long_running: bool,
}

impl Tier {
    pub fn parse(s: &str) -> Result<Tier> {
        match s {
            "1k" => Ok(Tier::T1k),
            "10k" => Ok(Tier::T10k),
            "100k" => Ok(Tier::T100k),
            "1m" | "1M" => Ok(Tier::T1M),
            "10m" | "10M" => Ok(Tier::T10M),
            "100m" | "100M" => Ok(Tier::T100M),
            other => Err(Error::InvalidArgument(format!(
                "unknown tier `{other}` (expected 1k, 10k, 100k, 1M, 10M, 100M)"
            ))),
        }
    }

    pub fn defaults(self) -> TierDefaults {
        match self {
            Tier::T1k => TierDefaults {
                name: "1k",
                depth_range: (2, 5),
                width_range: (5, 50),
                epsilon: 5e-7,
                steps: 10_000,
                n: 100_000,
                runs: 99,
                long_running: false,
            },
            Tier::T10k => TierDefaults {
                name: "10k",
                depth_range: (2, 10),
                width_range: (5, 100),
                epsilon: 5e-7,
                steps: 10_000,
                n: 100_000,
                runs: 100,
                long_running: false,
            },
            Tier::T100k => TierDefaults {
                name: "100k",
                depth_range: (2, 10),
                width_range: (50, 500),
                epsilon: 1e-7,
                steps: 50_000,
                n: 1_000_000,
                runs: 100,
                long_running: true,
            },
            Tier::T1M => TierDefaults {
                name: "1M",
                depth_range: (5, 20),
                width_range: (100, 1000),
                epsilon: 5e-8,
                steps: 50_000,
                n: 1_000_000,
                runs: 99,
                long_running: true,
            },
            Tier::T10M => TierDefaults {
                name: "10M",
                depth_range: (2, 20),
                width_range: (500, 2000),
                epsilon: 2e-8,
                steps: 50_000,
                n: 1_000_000,
                runs: 93,
                long_running: true,
            },
            Tier::T100M => TierDefaults {
                name: "100M",
                depth_range: (2, 40),
                width_range: (500, 3000),
                epsilon: 2e-8,
                steps: 50_000,
                n: 1_000_000,
                runs: 54,
                long_running: true,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvaluateAt {
    TrueParam,
    SgdParam,
}

pub struct SweepSettings {
    pub tier: Tier,
    pub runs: Option<usize>,
    pub evaluate_at: EvaluateAt,
    /// Tune the step size per run with acceptance-probe pilots instead of
    /// trusting the tier's stock value.
    pub auto_tune: bool,
    pub chains: usize,
    pub probe_stride: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub epsilon: Option<f64>,
    pub steps: Option<usize>,
    pub n: Option<usize>,
    pub batch_size: usize,
    pub gamma: f64,
    pub train: TrainConfig,
    /// Divide the training learning rate by 10 and retry when SGD blows up.
    pub train_backoff: bool,
}

impl SweepSettings {
    pub fn new(tier: Tier, out: PathBuf) -> Self {
        SweepSettings {
            tier,
            runs: None,
            evaluate_at: EvaluateAt::TrueParam,
            auto_tune: false,
            chains: 1,
            probe_stride: 0,
            seed: 0,
            out,
            epsilon: None,
            steps: None,
            n: None,
            batch_size: 500,
            gamma: 1.0,
            train: TrainConfig {
                learning_rate: 0.01,
                momentum: 0.9,
                batch_size: 500,
                steps: 50_000,
                seed: 0,
            },
            train_backoff: true,
        }
    }
}

pub struct RunRecord {
    pub index: usize,
    pub seed: u64,
    pub param_count: usize,
    pub depth: usize,
    pub widths: Vec<usize>,
    pub rank: usize,
    pub lambda_true: f64,
    pub lambda_hat: Option<f64>,
    pub stderr: f64,
    pub rel_error: Option<f64>,
    pub flags: Vec<String>,
    pub wallclock_s: f64,
    pub tuned_epsilon: Option<f64>,
    pub train_lr: Option<f64>,
    pub train_residual: Option<f64>,
    pub failure: Option<String>,
}

pub struct SweepSummary {
    pub tier: &'static str,
    pub runs_total: usize,
    pub ok_runs: usize,
    pub diverged_runs: usize,
    pub failed_runs: usize,
    pub median_rel_error: f64,
    pub p90_rel_error: f64,
    pub records: Vec<RunRecord>,
    pub wallclock_s: f64,
}

fn train_with_backoff(
    spec: &ModelSpec,
    data: &llc_core::Dataset,
    base: &TrainConfig,
    init_seed: u64,
    backoff: bool,
) -> std::result::Result<(ParamVector, f64), String> {
    let w0 = ParamVector::init_gaussian(spec, &mut Rng::seed_from_u64(init_seed));
    let mut lr = base.learning_rate;
    for _ in 0..8 {
        let cfg = TrainConfig {
            learning_rate: lr,
            ..base.clone()
        };
        match sgd_train(spec, &w0, data, &cfg) {
            Ok((w, _curve)) => return Ok((w, lr)),
            Err(Error::TrainingDiverged { .. }) if backoff => lr /= 10.0,
            Err(e) => return Err(format!("training failed: {e}")),
        }
    }
    Err("training diverged at every learning rate down to 1e-9".into())
}

fn one_run(settings: &SweepSettings, tier: &TierDefaults, index: usize) -> RunRecord {
    let t0 = Instant::now();
    let run_seed = Rng::derive_seed(settings.seed, index as u64);
    let mut rng = Rng::seed_from_u64(run_seed);
    let depth = rng.uniform_range_usize(tier.depth_range.0, tier.depth_range.1);
    let widths: Vec<usize> = (0..=depth)
        .map(|_| rng.uniform_range_usize(tier.width_range.0, tier.width_range.1))
        .collect();
    let n = settings.n.unwrap_or(tier.n);

    let mut record = RunRecord {
        index,
        seed: run_seed,
        param_count: 0,
        depth,
        widths: widths.clone(),
        rank: 0,
        lambda_true: f64::NAN,
        lambda_hat: None,
        stderr: f64::NAN,
        rel_error: None,
        flags: Vec::new(),
        wallclock_s: 0.0,
        tuned_epsilon: None,
        train_lr: None,
        train_residual: None,
        failure: None,
    };
    let fail = |record: &mut RunRecord, reason: String| {
        record.failure = Some(reason.clone());
        record.flags.push(format!("run_failed:{reason}"));
        record.wallclock_s = t0.elapsed().as_secs_f64();
    };

    let outcome = (|| -> Result<()> {
        let spec = ModelSpec::dln(widths.clone())?;
        record.param_count = spec.param_count();
        let (w_true, rank) = random_true_dln(&spec, &mut rng)?;
        record.rank = rank;
        let (lambda, _sig) = dln_lambda(&spec.widths, rank)?;
        record.lambda_true = lambda;
        let data = gen_realizable(&spec, &w_true, n, &mut rng)?;

        let w_star = match settings.evaluate_at {
            EvaluateAt::TrueParam => w_true,
            EvaluateAt::SgdParam => {
                let train = TrainConfig {
                    seed: Rng::derive_seed(run_seed, 2),
                    ..settings.train.clone()
                };
                let (w, lr) = train_with_backoff(
                    &spec,
                    &data,
                    &train,
                    Rng::derive_seed(run_seed, 3),
                    settings.train_backoff,
                )
                .map_err(Error::Estimation)?;
                record.train_lr = Some(lr);
                let constant = 0.5
                    * spec.output_dim() as f64
                    * (2.0 * std::f64::consts::PI * spec.noise_variance).ln();
                let full = models::nll_loss(&spec, &w, &data, &data.all_indices())?;
                record.train_residual = Some(full - constant);
                w
            }
        };

        let obj = ModelObjective::new(&spec, &data)?;
        let mut cfg = SamplerConfig {
            epsilon: settings.epsilon.unwrap_or(tier.epsilon),
            gamma: settings.gamma,
            beta: None,
            steps: settings.steps.unwrap_or(tier.steps),
            burnin_frac: 0.9,
            batch_size: settings.batch_size.min(n),
            chains: settings.chains,
            seed: Rng::derive_seed(run_seed, 1),
            preconditioner: None,
            precondition_noise: false,
            precondition_localizer: true,
            mala_probe_stride: settings.probe_stride,
            record_full_batch_loss: false,
            state_record_stride: 0,
        };
        if settings.auto_tune {
            let (eps, _report) = tune_step_size(&obj, w_star.as_slice(), &cfg)?;
            record.tuned_epsilon = Some(eps);
            cfg.epsilon = eps;
        }
        let traces = run_chains(&obj, w_star.as_slice(), &cfg, SamplerKind::Sgld)?;
        let mut est = estimate_llc(&traces, &obj, w_star.as_slice(), &cfg)?;
        if settings.auto_tune && est.flags.insufficient_burnin {
            // Tuned steps sit orders below the stock value, so the stock
            // chain length can leave the loss trace still climbing; when the
            // diagnostic says so, rerun once with a 4x longer chain.
            cfg.steps *= 4;
            record.flags.push("extended_steps".into());
            let traces = run_chains(&obj, w_star.as_slice(), &cfg, SamplerKind::Sgld)?;
            est = estimate_llc(&traces, &obj, w_star.as_slice(), &cfg)?;
        }
        record.lambda_hat = Some(est.lambda_hat);
        record.stderr = est.stderr;
        record.rel_error = Some((est.lambda_hat - lambda).abs() / lambda.abs().max(1e-12));
        record.flags.extend(est.flags.as_strings());
        Ok(())
    })();

    match outcome {
        Ok(()) => record.wallclock_s = t0.elapsed().as_secs_f64(),
        Err(Error::AllChainsDiverged) => fail(&mut record, "all_chains_diverged".into()),
        Err(Error::Tuning(_)) => fail(&mut record, "tune_failed".into()),
        Err(e) => fail(&mut record, format!("{e}").replace([',', '\n'], ";")),
    }
    record
}

pub fn run(settings: &SweepSettings) -> Result<SweepSummary> {
    let t0 = Instant::now();
    let tier = settings.tier.defaults();
    let runs = settings.runs.unwrap_or(tier.runs);
    if tier.long_running {
        eprintln!(
            "tier {} is a long-running batch (dataset of {} rows per run); expect hours",
            tier.name, tier.n
        );
    }
    report::ensure_out_dir(&settings.out)?;

    // Stream finished rows through a single writer, flushing in run order
    // so an interrupted sweep leaves a valid CSV prefix while reruns stay
    // byte-identical.
    let config = config_echo(settings, &tier, runs);
    let csv_name = format!("sweep_{}.csv", tier.name);
    let mut file = std::io::BufWriter::new(std::fs::File::create(report::out_file(
        &settings.out,
        &csv_name,
    ))?);
    writeln!(file, "# llc-lab sweep")?;
    for (k, v) in &config {
        writeln!(file, "# {k} = {v}")?;
    }
    writeln!(
        file,
        "seed,d,M,widths,r,lambda_true,lambda_hat,stderr,rel_error,flags,wallclock"
    )?;
    file.flush()?;
    let writer = Mutex::new((file, BTreeMap::<usize, String>::new(), 0usize));

    let records: Vec<RunRecord> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let r = one_run(settings, &tier, i);
            eprintln!(
                "  run {:>3}/{runs}: d={} lambda={:.1} lambda_hat={} rel={} eps={} {} ({:.0}s)",
                i + 1,
                r.param_count,
                r.lambda_true,
                r.lambda_hat.map_or("-".into(), |l| format!("{l:.1}")),
                r.rel_error.map_or("-".into(), |e| format!("{e:.2}")),
                r.tuned_epsilon.map_or("table".into(), |e| format!("{e:.1e}")),
                r.failure
                    .as_deref()
                    .unwrap_or(if r.flags.is_empty() { "ok" } else { "ok(flags)" }),
                r.wallclock_s
            );
            let mut guard = writer.lock().unwrap();
            let (file, pending, next) = &mut *guard;
            pending.insert(i, csv_row(&r));
            while let Some(row) = pending.remove(next) {
                let _ = writeln!(file, "{row}");
                *next += 1;
            }
            let _ = file.flush();
            r
        })
        .collect();
    drop(writer);

    // lambda_hat against lambda with the identity reference, as in the
    // scalability comparison plots.
    let mut plot = Plot::new(
        &format!("estimated vs theoretical learning coefficient (tier {})", tier.name),
        "theoretical lambda",
        "estimated lambda",
    );
    plot.logx = true;
    plot.logy = true;
    plot.identity_line = true;
    plot.series.push(Series::points(
        "runs",
        records
            .iter()
            .filter_map(|r| r.lambda_hat.map(|l| (r.lambda_true.max(1e-3), l.max(1e-3))))
            .collect(),
    ));
    plot.render_to(&report::out_file(
        &settings.out,
        &format!("sweep_{}.svg", tier.name),
    ))?;

    let rel_errors: Vec<f64> = records.iter().filter_map(|r| r.rel_error).collect();
    let diverged_runs = records
        .iter()
        .filter(|r| {
            r.failure.as_deref() == Some("all_chains_diverged")
                || r.flags.iter().any(|f| f.starts_with("diverged_chains"))
        })
        .count();
    let failed_runs = records.iter().filter(|r| r.failure.is_some()).count();
    let summary = SweepSummary {
        tier: tier.name,
        runs_total: runs,
        ok_runs: records.iter().filter(|r| r.failure.is_none()).count(),
        diverged_runs,
        failed_runs,
        median_rel_error: if rel_errors.is_empty() {
            f64::NAN
        } else {
            median(&rel_errors)
        },
        p90_rel_error: if rel_errors.is_empty() {
            f64::NAN
        } else {
            percentile(&rel_errors, 90.0)
        },
        records,
        wallclock_s: t0.elapsed().as_secs_f64(),
    };
    write_summary_json(settings, &tier, &summary, &config)?;
    Ok(summary)
}

fn csv_row(r: &RunRecord) -> String {
    [
        r.seed.to_string(),
        r.param_count.to_string(),
        r.depth.to_string(),
        r.widths
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join("x"),
        r.rank.to_string(),
        format!("{:.6}", r.lambda_true),
        r.lambda_hat.map_or("nan".into(), |l| format!("{l:.6}")),
        if r.stderr.is_nan() {
            "nan".into()
        } else {
            format!("{:.6}", r.stderr)
        },
        r.rel_error.map_or("nan".into(), |e| format!("{e:.6}")),
        if r.flags.is_empty() {
            "-".into()
        } else {
            r.flags.join(";")
        },
        format!("{:.2}", r.wallclock_s),
    ]
    .join(",")
}

fn config_echo(
    settings: &SweepSettings,
    tier: &TierDefaults,
    runs: usize,
) -> Vec<(String, String)> {
    let mut kv = vec![
        ("tier".into(), tier.name.to_string()),
        ("runs".into(), runs.to_string()),
        (
            "evaluate_at".into(),
            match settings.evaluate_at {
                EvaluateAt::TrueParam => "true_param".to_string(),
                EvaluateAt::SgdParam => "sgd_param".to_string(),
            },
        ),
        ("depth_range".into(), format!("{}..{}", tier.depth_range.0, tier.depth_range.1)),
        ("width_range".into(), format!("{}..{}", tier.width_range.0, tier.width_range.1)),
        (
            "epsilon".into(),
            format!("{:e}", settings.epsilon.unwrap_or(tier.epsilon)),
        ),
        ("steps".into(), settings.steps.unwrap_or(tier.steps).to_string()),
        ("n".into(), settings.n.unwrap_or(tier.n).to_string()),
        ("batch_size".into(), settings.batch_size.to_string()),
        ("gamma".into(), settings.gamma.to_string()),
        ("beta".into(), "auto".into()),
        ("burnin_frac".into(), "0.9".into()),
        ("chains".into(), settings.chains.to_string()),
        ("auto_tune".into(), settings.auto_tune.to_string()),
        ("probe_stride".into(), settings.probe_stride.to_string()),
        ("seed".into(), settings.seed.to_string()),
    ];
    if settings.evaluate_at == EvaluateAt::SgdParam {
        kv.push(("train_learning_rate".into(), settings.train.learning_rate.to_string()));
        kv.push(("train_momentum".into(), settings.train.momentum.to_string()));
        kv.push(("train_steps".into(), settings.train.steps.to_string()));
        kv.push(("train_batch_size".into(), settings.train.batch_size.to_string()));
        kv.push(("train_backoff".into(), settings.train_backoff.to_string()));
        kv.push((
            "double_use_note".into(),
            "w* from SGD reuses the dataset for estimation".into(),
        ));
    }
    kv
}

fn write_summary_json(
    settings: &SweepSettings,
    tier: &TierDefaults,
    summary: &SweepSummary,
    config: &[(String, String)],
) -> Result<()> {
    let value = serde_json::json!({
        "tier": summary.tier,
        "runs_total": summary.runs_total,
        "ok_runs": summary.ok_runs,
        "diverged_runs": summary.diverged_runs,
        "failed_runs": summary.failed_runs,
        "median_rel_error": summary.median_rel_error,
        "p90_rel_error": summary.p90_rel_error,
        "wallclock_s": summary.wallclock_s,
        "config": config
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect::<serde_json::Map<String, serde_json::Value>>(),
        "runs": summary
            .records
            .iter()
            .map(|r| {
                serde_json::json!({
                    "index": r.index,
                    "seed": r.seed,
                    "d": r.param_count,
                    "widths": r.widths,
                    "rank": r.rank,
                    "lambda_true": r.lambda_true,
                    "lambda_hat": r.lambda_hat,
                    "stderr": r.stderr,
                    "rel_error": r.rel_error,
                    "flags": r.flags,
                    "tuned_epsilon": r.tuned_epsilon,
                    "train_lr": r.train_lr,
                    "train_residual": r.train_residual,
                    "failure": r.failure,
                    "wallclock_s": r.wallclock_s,
                })
            })
            .collect::<Vec<_>>(),
    });
    report::write_json(
        &report::out_file(&settings.out, &format!("sweep_{}_summary.json", tier.name)),
        &value,
    )
}

pub fn print(summary: &SweepSummary) {
    println!(
        "tier {}: {} runs, {} ok, {} diverged, {} failed",
        summary.tier,
        summary.runs_total,
        summary.ok_runs,
        summary.diverged_runs,
        summary.failed_runs
    );
    println!(
        "relative error: median {:.4}, 90th percentile {:.4} (wallclock {:.0}s)",
        summary.median_rel_error, summary.p90_rel_error, summary.wallclock_s
    );
}
