//! Estimation of the local learning coefficient of a trained model via
//! localized, tempered stochastic-gradient MCMC, together with the exact
//! oracles used to validate the estimator: the closed-form deep-linear-
//! network learning coefficient, Monte-Carlo volume-scaling exponents of
//! analytic potentials, and quadrature free energy in low dimension.

pub mod datagen;
pub mod error;
pub mod estimator;
pub mod models;
pub mod numerics;
pub mod samplers;
pub mod theory;
pub mod training;

pub use datagen::{Dataset, MinibatchSchedule, Targets};
pub use error::{Error, Result};
pub use estimator::{
    burnin_diagnostic, estimate_llc, tune_step_size, BurninVerdict, EstimateFlags, LlcEstimate,
};
pub use models::{ModelKind, ModelSpec, ParamVector, Task};
pub use numerics::{Matrix, Rng};
pub use samplers::{
    mala_acceptance_probe, mala_chain, run_chains, sgld_chain, ChainTrace, ModelObjective,
    Objective, PotentialObjective, SamplerConfig, SamplerKind,
};
pub use theory::{
    catalog, dln_lambda, idealized_llc, mc_volume, potential_by_name, quadrature_free_energy,
    DlnSignature, Domain, Potential, PotentialKind,
};
pub use training::{sgd_train, TrainConfig};
