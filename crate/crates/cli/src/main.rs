use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use llc_cli::commands::{
    depth_study, estimate, free_energy, rescale_test, sweep, target, theory, train, tune, volume,
};
use llc_cli::config::{self, SectionView};
use llc_core::{Error, ModelKind, Result, SamplerConfig, SamplerKind};

/// Learning-coefficient laboratory: theory oracles, localized tempered
/// samplers, estimators, and experiment sweeps.
#[derive(Parser)]
#[command(name = "llc-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SamplerArgs {
    /// Step size (also the injected noise variance).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Localization strength toward w*.
    #[arg(long)]
    gamma: Option<f64>,
    /// Inverse temperature: `auto` for 1/log n, or a number.
    #[arg(long)]
    beta: Option<String>,
    /// Chain length.
    #[arg(long)]
    steps: Option<usize>,
    /// Fraction of each chain discarded as burn-in.
    #[arg(long)]
    burnin_frac: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `none` or comma-separated positive diagonal entries.
    #[arg(long)]
    preconditioner: Option<String>,
    /// Probe the MALA acceptance every k SGLD steps (0 = off).
    #[arg(long)]
    mala_probe_stride: Option<usize>,
    /// Tally full-batch losses instead of minibatch records.
    #[arg(long)]
    record_full_batch_loss: bool,
}

impl SamplerArgs {
    fn build(&self, config_file: Option<&PathBuf>) -> Result<SamplerConfig> {
        let sections = match config_file {
            Some(path) => Some(config::parse_file(path)?),
            None => None,
        };
        let mut view = SectionView::new("sampler", sections.as_ref());
        view.set_override("epsilon", self.epsilon.map(|v| v.to_string()));
        view.set_override("gamma", self.gamma.map(|v| v.to_string()));
        view.set_override("beta", self.beta.clone());
        view.set_override("steps", self.steps.map(|v| v.to_string()));
        view.set_override("burnin_frac", self.burnin_frac.map(|v| v.to_string()));
        view.set_override("batch_size", self.batch_size.map(|v| v.to_string()));
        view.set_override("chains", self.chains.map(|v| v.to_string()));
        view.set_override("seed", self.seed.map(|v| v.to_string()));
        view.set_override("preconditioner", self.preconditioner.clone());
        view.set_override(
            "mala_probe_stride",
            self.mala_probe_stride.map(|v| v.to_string()),
        );
        if self.record_full_batch_loss {
            view.set_override("record_full_batch_loss", Some("true".into()));
        }
        config::sampler_from_view(&view)
    }
}

#[derive(Args, Clone)]
struct TargetArgs {
    /// Analytic potential from the catalog (quad1d, quad2d, w2w4, w2w2).
    #[arg(long)]
    potential: Option<String>,
    /// Nominal sample size for analytic targets; dataset size when
    /// generating data.
    #[arg(long, value_parser = parse_count)]
    n: Option<usize>,
    /// Parameter checkpoint for model targets.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dataset file for model targets.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Generate a realizable dataset from the checkpoint (needs --n).
    #[arg(long)]
    gen_data: bool,
    /// Seed for generated data.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Export the generated dataset here.
    #[arg(long)]
    save_dataset: Option<PathBuf>,
}

impl TargetArgs {
    fn build(&self) -> Result<target::Target> {
        match (&self.potential, &self.checkpoint) {
            (Some(name), None) => {
                let n = self
                    .n
                    .ok_or_else(|| Error::InvalidArgument("analytic targets need --n".into()))?;
                target::Target::from_potential(name, n)
            }
            (None, Some(ckpt)) => {
                let source = if let Some(data) = &self.dataset {
                    target::DataSource::File(data.clone())
                } else if self.gen_data {
                    target::DataSource::Generate {
                        n: self
                            .n
                            .ok_or_else(|| Error::InvalidArgument("--gen-data needs --n".into()))?,
                        seed: self.data_seed,
                        save_to: self.save_dataset.clone(),
                    }
                } else {
                    return Err(Error::InvalidArgument(
                        "model targets need --dataset or --gen-data".into(),
                    ));
                };
                target::Target::from_checkpoint(ckpt, source)
            }
            _ => Err(Error::InvalidArgument(
                "specify exactly one of --potential or --checkpoint".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form DLN learning coefficient for a width/rank signature.
    Theory {
        /// Layer widths H_0..H_M, comma separated.
        #[arg(long, value_parser = parse_usize_list)]
        widths: std::vec::Vec<usize>,
        /// Rank of the true linear map.
        #[arg(long)]
        rank: usize,
    },
    /// Learning coefficient across random signatures of increasing depth.
    DepthStudy {
        #[arg(long, value_parser = parse_usize_pair, default_value = "100,2000")]
        width_range: (usize, usize),
        #[arg(long, value_parser = parse_usize_pair, default_value = "2,800")]
        depth_range: (usize, usize),
        #[arg(long, default_value_t = 200)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo volume scaling of a cataloged potential, with the
    /// fitted exponent and multiplicity.
    Volume {
        #[arg(long)]
        potential: String,
        #[arg(long, value_parser = parse_count, default_value = "1000000")]
        samples: usize,
        #[arg(long, default_value_t = 13)]
        max_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quadrature free energy and the idealized estimator on a potential.
    FreeEnergy {
        #[arg(long)]
        potential: String,
        /// One or more sample sizes, comma separated (scientific ok).
        #[arg(long, value_parser = parse_f64_list, default_value = "1e6")]
        n: std::vec::Vec<f64>,
        /// Override the integration region radius.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the learning coefficient at a checkpoint (or potential
    /// minimum) by localized tempered sampling.
    Estimate {
        #[command(flatten)]
        target: TargetArgs,
        /// Sampler: sgld (minibatch) or mala (full batch with rejection).
        #[arg(long, default_value = "sgld")]
        sampler: String,
        /// Config file with a [sampler] section.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        sampler_args: SamplerArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Annotate the estimate record with where w* came from.
        #[arg(long)]
        w_star_source: Option<String>,
    },
    /// SGD with momentum to produce a trained parameter checkpoint.
    Train {
        /// Start from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Or build a fresh model: layer widths, comma separated.
        #[arg(long, value_parser = parse_usize_list)]
        widths: Option<std::vec::Vec<usize>>,
        /// dln or mlp (with --widths).
        #[arg(long, default_value = "dln")]
        kind: String,
        /// Seed for the standard-normal initialization (with --widths).
        #[arg(long, default_value_t = 0)]
        init_seed: u64,
        /// Train on this dataset file.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Or generate realizable data from a random true DLN.
        #[arg(long)]
        gen_true_dln: bool,
        /// Or generate realizable data from this checkpoint's parameters.
        #[arg(long)]
        gen_from: Option<PathBuf>,
        #[arg(long, value_parser = parse_count)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
        /// Export the generated dataset.
        #[arg(long)]
        save_dataset: Option<PathBuf>,
        /// Config file with a [train] section.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        momentum: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Random-DLN accuracy sweep against the theoretical learning
    /// coefficient (order-of-magnitude tiers).
    Sweep {
        /// 1k, 10k, 100k, 1M, 10M, or 100M. Tiers above 10k are
        /// long-running.
        #[arg(long)]
        tier: String,
        #[arg(long)]
        runs: Option<usize>,
        /// true-param or sgd-param.
        #[arg(long, default_value = "true-param")]
        evaluate_at: String,
        /// Tune the step size per run from acceptance-probe pilots.
        #[arg(long)]
        auto_tune: bool,
        #[arg(long, default_value_t = 1)]
        chains: usize,
        #[arg(long, default_value_t = 0)]
        probe_stride: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_parser = parse_count)]
        n: Option<usize>,
        #[arg(long, default_value_t = 500)]
        batch_size: usize,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.01)]
        train_lr: f64,
        #[arg(long, default_value_t = 0.9)]
        train_momentum: f64,
        #[arg(long, default_value_t = 50_000)]
        train_steps: usize,
        #[arg(long, default_value_t = 500)]
        train_batch_size: usize,
        /// Fail a run instead of retrying with a smaller learning rate when
        /// SGD diverges.
        #[arg(long)]
        no_train_backoff: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Invariance of the estimate under function-preserving layer
    /// rescaling, using preconditioned SGLD.
    RescaleTest {
        #[arg(long, value_parser = parse_usize_list, default_value = "4,16,4")]
        widths: std::vec::Vec<usize>,
        #[arg(long, value_parser = parse_count, default_value = "1000")]
        n: usize,
        /// Rescale factors, comma separated.
        #[arg(long, value_parser = parse_f64_list, default_value = "1e-4,1e-3,1e-2,1e-1,1,1e1,1e2,1e3,1e4")]
        alphas: std::vec::Vec<f64>,
        #[arg(long, default_value_t = 1.2e-8)]
        epsilon: f64,
        #[arg(long, default_value_t = 30_000)]
        steps: usize,
        #[arg(long, default_value_t = 4)]
        chains: usize,
        #[arg(long, default_value_t = 250)]
        batch_size: usize,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also demonstrate the unpreconditioned failure at alpha = 1e3.
        #[arg(long)]
        demo: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Bisect the step size until the MALA acceptance probe lands in
    /// [0.90, 0.95].
    Tune {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        sampler_args: SamplerArgs,
        /// Length of the confirmation chain run at the recommended step
        /// size (0 to skip).
        #[arg(long, default_value_t = 2_000)]
        confirm_steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_usize_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',')
        .map(|tok| tok.trim().parse::<usize>().map_err(|e| e.to_string()))
        .collect()
}

fn parse_f64_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|tok| tok.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}

fn parse_usize_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let v = parse_usize_list(s)?;
    if v.len() != 2 {
        return Err("expected two comma-separated integers".into());
    }
    Ok((v[0], v[1]))
}

/// Counts accept scientific notation ("1e6").
fn parse_count(s: &str) -> std::result::Result<usize, String> {
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    let f: f64 = s
        .parse()
        .map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if f < 1.0 || f.fract() != 0.0 || f > 1e15 {
        return Err(format!("not a positive integer count: {s}"));
    }
    Ok(f as usize)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Theory { widths, rank } => {
            let out = theory::run(&widths, rank)?;
            theory::print(&out);
        }
        Command::DepthStudy {
            width_range,
            depth_range,
            draws,
            seed,
            out,
        } => {
            let res = depth_study::run(width_range, depth_range, draws, seed, out.as_deref())?;
            println!(
                "{} draws; Kendall tau(depth, lambda) = {:.3}",
                res.rows.len(),
                res.depth_lambda_tau
            );
        }
        Command::Volume {
            potential,
            samples,
            max_points,
            seed,
            out,
        } => {
            let scaling = volume::run(&potential, samples, max_points, seed, out.as_deref())?;
            volume::print(&potential, &scaling);
        }
        Command::FreeEnergy {
            potential,
            n,
            radius,
            out,
        } => {
            let rows = free_energy::run(&potential, &n, radius, out.as_deref())?;
            free_energy::print(&potential, &rows);
        }
        Command::Estimate {
            target,
            sampler,
            config,
            sampler_args,
            out,
            w_star_source,
        } => {
            let kind = match sampler.as_str() {
                "sgld" => SamplerKind::Sgld,
                "mala" => SamplerKind::Mala,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown sampler `{other}` (sgld or mala)"
                    )))
                }
            };
            let tgt = target.build()?;
            let cfg = sampler_args.build(config.as_ref())?;
            let res = estimate::run(&tgt, &cfg, kind, out.as_deref(), w_star_source.as_deref())?;
            estimate::print(&res);
        }
        Command::Train {
            checkpoint,
            widths,
            kind,
            init_seed,
            dataset,
            gen_true_dln,
            gen_from,
            n,
            data_seed,
            save_dataset,
            config,
            learning_rate,
            momentum,
            batch_size,
            steps,
            seed,
            out,
        } => {
            let init = match (checkpoint, widths) {
                (Some(c), None) => train::InitSource::Checkpoint(c),
                (None, Some(w)) => train::InitSource::Random {
                    kind: match kind.as_str() {
                        "dln" => ModelKind::Dln,
                        "mlp" => ModelKind::ReluMlp,
                        other => {
                            return Err(Error::InvalidArgument(format!(
                                "unknown kind `{other}` (dln or mlp)"
                            )))
                        }
                    },
                    widths: w,
                    seed: init_seed,
                },
                _ => {
                    return Err(Error::InvalidArgument(
                        "specify exactly one of --checkpoint or --widths".into(),
                    ))
                }
            };
            let data = if let Some(path) = dataset {
                train::TrainData::File(path)
            } else if gen_true_dln {
                train::TrainData::GenTrueDln {
                    n: n.ok_or_else(|| {
                        Error::InvalidArgument("--gen-true-dln needs --n".into())
                    })?,
                    seed: data_seed,
                }
            } else if let Some(ckpt) = gen_from {
                train::TrainData::GenFrom {
                    checkpoint: ckpt,
                    n: n.ok_or_else(|| Error::InvalidArgument("--gen-from needs --n".into()))?,
                    seed: data_seed,
                }
            } else {
                return Err(Error::InvalidArgument(
                    "specify --dataset, --gen-true-dln, or --gen-from".into(),
                ));
            };
            let sections = match config {
                Some(path) => Some(llc_cli::config::parse_file(&path)?),
                None => None,
            };
            let mut view = SectionView::new("train", sections.as_ref());
            view.set_override("learning_rate", learning_rate.map(|v| v.to_string()));
            view.set_override("momentum", momentum.map(|v| v.to_string()));
            view.set_override("batch_size", batch_size.map(|v| v.to_string()));
            view.set_override("steps", steps.map(|v| v.to_string()));
            view.set_override("seed", seed.map(|v| v.to_string()));
            let cfg = llc_cli::config::train_from_view(&view)?;
            let res = train::run(init, data, &cfg, &out, save_dataset.as_deref())?;
            train::print(&res);
        }
        Command::Sweep {
            tier,
            runs,
            evaluate_at,
            auto_tune,
            chains,
            probe_stride,
            seed,
            epsilon,
            steps,
            n,
            batch_size,
            gamma,
            train_lr,
            train_momentum,
            train_steps,
            train_batch_size,
            no_train_backoff,
            out,
        } => {
            let mut settings = sweep::SweepSettings::new(sweep::Tier::parse(&tier)?, out);
            settings.runs = runs;
            settings.evaluate_at = match evaluate_at.as_str() {
                "true-param" | "true_param" => sweep::EvaluateAt::TrueParam,
                "sgd-param" | "sgd_param" => sweep::EvaluateAt::SgdParam,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown evaluate-at `{other}`"
                    )))
                }
            };
            settings.auto_tune = auto_tune;
            settings.chains = chains;
            settings.probe_stride = probe_stride;
            settings.seed = seed;
            settings.epsilon = epsilon;
            settings.steps = steps;
            settings.n = n;
            settings.batch_size = batch_size;
            settings.gamma = gamma;
            settings.train.learning_rate = train_lr;
            settings.train.momentum = train_momentum;
            settings.train.steps = train_steps;
            settings.train.batch_size = train_batch_size;
            settings.train_backoff = !no_train_backoff;
            let summary = sweep::run(&settings)?;
            sweep::print(&summary);
        }
        Command::RescaleTest {
            widths,
            n,
            alphas,
            epsilon,
            steps,
            chains,
            batch_size,
            gamma,
            seed,
            demo,
            out,
        } => {
            let mut settings = rescale_test::RescaleSettings::new(out);
            settings.widths = widths;
            settings.n = n;
            settings.alphas = alphas;
            settings.epsilon = epsilon;
            settings.steps = steps;
            settings.chains = chains;
            settings.batch_size = batch_size;
            settings.gamma = gamma;
            settings.seed = seed;
            settings.demo_unpreconditioned = demo;
            let res = rescale_test::run(&settings)?;
            rescale_test::print(&res);
        }
        Command::Tune {
            target,
            config,
            sampler_args,
            confirm_steps,
            out,
        } => {
            let tgt = target.build()?;
            let cfg = sampler_args.build(config.as_ref())?;
            let res = tune::run(&tgt, &cfg, confirm_steps, out.as_deref())?;
            tune::print(&res);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    llc_cli::init_thread_pool();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
