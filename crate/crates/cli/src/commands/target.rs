//! Shared resolution of "what are we sampling": an analytic potential at a
//! nominal sample size, or a model checkpoint plus a dataset.

use std::path::{Path, PathBuf};

use llc_core::datagen::{gen_realizable, load_dataset, save_dataset};
use llc_core::models::load_checkpoint;
use llc_core::{
    potential_by_name, Dataset, Error, ModelObjective, ModelSpec, Objective, ParamVector,
    Potential, PotentialObjective, Result, Rng,
};

/// Where the dataset for a model target comes from.
pub enum DataSource {
    File(PathBuf),
    /// Generate a realizable dataset from the checkpoint parameter itself.
    Generate {
        n: usize,
        seed: u64,
        save_to: Option<PathBuf>,
    },
}

pub enum Target {
    Potential { potential: Potential, n: usize },
    Model {
        spec: ModelSpec,
        w_star: ParamVector,
        data: Dataset,
    },
}

impl Target {
    pub fn from_potential(name: &str, n: usize) -> Result<Self> {
        let potential = potential_by_name(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown potential `{name}`")))?;
        Ok(Target::Potential { potential, n })
    }

    pub fn from_checkpoint(checkpoint: &Path, data: DataSource) -> Result<Self> {
        let (spec, w_star) = load_checkpoint(checkpoint)?;
        let data = match data {
            DataSource::File(path) => load_dataset(&path)?,
            DataSource::Generate { n, seed, save_to } => {
                let mut rng = Rng::seed_from_u64(seed);
                let data = gen_realizable(&spec, &w_star, n, &mut rng)?;
                if let Some(path) = save_to {
                    save_dataset(&path, &data)?;
                }
                data
            }
        };
        Ok(Target::Model { spec, w_star, data })
    }

    pub fn n(&self) -> usize {
        match self {
            Target::Potential { n, .. } => *n,
            Target::Model { data, .. } => data.n,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Target::Potential { potential, .. } => potential.dim,
            Target::Model { spec, .. } => spec.param_count(),
        }
    }

    pub fn w_star(&self) -> Vec<f64> {
        match self {
            Target::Potential { potential, .. } => potential.center.clone(),
            Target::Model { w_star, .. } => w_star.as_slice().to_vec(),
        }
    }

    /// Run `f` with a borrowed objective over this target.
    pub fn with_objective<R>(
        &self,
        f: impl FnOnce(&dyn Objective, &[f64]) -> Result<R>,
    ) -> Result<R> {
        match self {
            Target::Potential { potential, n } => {
                let obj = PotentialObjective {
                    potential,
                    nominal_n: *n,
                };
                f(&obj, &potential.center)
            }
            Target::Model { spec, w_star, data } => {
                let obj = ModelObjective::new(spec, data)?;
                f(&obj, w_star.as_slice())
            }
        }
    }
}
