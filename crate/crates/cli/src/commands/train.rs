use std::path::Path;

use llc_core::datagen::{gen_realizable, load_dataset, random_true_dln, save_dataset};
use llc_core::models::{load_checkpoint, nll_loss, save_checkpoint};
use llc_core::{
    sgd_train, Dataset, Error, ModelKind, ModelSpec, ParamVector, Result, Rng, TrainConfig,
};

use crate::report;

pub enum InitSource {
    /// Load architecture and starting parameters from a checkpoint.
    Checkpoint(std::path::PathBuf),
    /// Fresh architecture with i.i.d. standard-normal entries.
    Random {
        kind: ModelKind,
        widths: Vec<usize>,
        seed: u64,
    },
}

pub enum TrainData {
    File(std::path::PathBuf),
    /// Realizable data from a freshly drawn random true DLN (rank-truncated
    /// layers included); only meaningful for DLN architectures.
    GenTrueDln { n: usize, seed: u64 },
    /// Realizable data from the parameters stored in a checkpoint.
    GenFrom {
        checkpoint: std::path::PathBuf,
        n: usize,
        seed: u64,
    },
}

pub struct TrainOutput {
    pub spec: ModelSpec,
    pub w_final: ParamVector,
    pub curve: Vec<f64>,
    pub final_full_loss: f64,
}

pub fn run(
    init: InitSource,
    data_src: TrainData,
    cfg: &TrainConfig,
    out: &Path,
    save_dataset_to: Option<&Path>,
) -> Result<TrainOutput> {
    let (spec, w_init) = match init {
        InitSource::Checkpoint(path) => load_checkpoint(&path)?,
        InitSource::Random { kind, widths, seed } => {
            let spec = match kind {
                ModelKind::Dln => ModelSpec::dln(widths)?,
                ModelKind::ReluMlp => ModelSpec::relu_mlp(widths)?,
            };
            let w = ParamVector::init_gaussian(&spec, &mut Rng::seed_from_u64(seed));
            (spec, w)
        }
    };
    let data: Dataset = match data_src {
        TrainData::File(path) => load_dataset(&path)?,
        TrainData::GenTrueDln { n, seed } => {
            if spec.kind != ModelKind::Dln {
                return Err(Error::InvalidArgument(
                    "--gen-true-dln draws a random true DLN; use --gen-from for MLPs".into(),
                ));
            }
            let mut rng = Rng::seed_from_u64(seed);
            let (w_true, _rank) = random_true_dln(&spec, &mut rng)?;
            gen_realizable(&spec, &w_true, n, &mut rng)?
        }
        TrainData::GenFrom { checkpoint, n, seed } => {
            let (tspec, w_true) = load_checkpoint(&checkpoint)?;
            if tspec.widths != spec.widths {
                return Err(Error::DimensionMismatch(
                    "data-generating checkpoint widths differ from the trained model".into(),
                ));
            }
            gen_realizable(&tspec, &w_true, n, &mut Rng::seed_from_u64(seed))?
        }
    };
    if let Some(path) = save_dataset_to {
        save_dataset(path, &data)?;
    }

    report::ensure_out_dir(out)?;
    let run = sgd_train(&spec, &w_init, &data, cfg);
    let config_echo = vec![
        ("learning_rate".into(), format!("{:e}", cfg.learning_rate)),
        ("momentum".into(), cfg.momentum.to_string()),
        ("batch_size".into(), cfg.batch_size.to_string()),
        ("steps".into(), cfg.steps.to_string()),
        ("seed".into(), cfg.seed.to_string()),
    ];
    let write_curve = |curve: &[f64]| -> Result<()> {
        let rows: Vec<Vec<String>> = curve
            .iter()
            .enumerate()
            .map(|(i, l)| vec![i.to_string(), format!("{l:.10e}")])
            .collect();
        report::write_csv(
            &report::out_file(out, "train_curve.csv"),
            "train",
            &config_echo,
            &["step", "minibatch_loss"],
            &rows,
        )
    };
    match run {
        Ok((w_final, curve)) => {
            write_curve(&curve)?;
            save_checkpoint(&report::out_file(out, "trained.ckpt"), &spec, &w_final)?;
            let full = nll_loss(&spec, &w_final, &data, &data.all_indices())?;
            Ok(TrainOutput {
                spec,
                w_final,
                curve,
                final_full_loss: full,
            })
        }
        Err(Error::TrainingDiverged {
            step,
            partial_curve,
        }) => {
            write_curve(&partial_curve)?;
            Err(Error::TrainingDiverged {
                step,
                partial_curve,
            })
        }
        Err(e) => Err(e),
    }
}

pub fn print(outcome: &TrainOutput) {
    let constant = 0.5
        * outcome.spec.output_dim() as f64
        * (2.0 * std::f64::consts::PI * outcome.spec.noise_variance).ln();
    println!(
        "trained {} parameters for {} steps",
        outcome.w_final.len(),
        outcome.curve.len()
    );
    println!(
        "final minibatch loss {:.6e}; full-batch loss {:.6e} (residual above likelihood constant {:.3e})",
        outcome.curve.last().copied().unwrap_or(f64::NAN),
        outcome.final_full_loss,
        outcome.final_full_loss - constant
    );
}
