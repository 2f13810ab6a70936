use std::path::Path;

use llc_core::estimator::TuneReport;
use llc_core::{run_chains, tune_step_size, Result, SamplerConfig, SamplerKind};

use crate::commands::target::Target;
use crate::report;

pub struct TuneOutput {
    pub recommended: f64,
    pub report: TuneReport,
    /// Mean probe acceptance of a confirmation chain at the recommended step.
    pub confirmation_acceptance: Option<f64>,
}

pub fn run(
    target: &Target,
    base: &SamplerConfig,
    confirm_steps: usize,
    out: Option<&Path>,
) -> Result<TuneOutput> {
    let (recommended, rep) = target.with_objective(|obj, w_star| tune_step_size(obj, w_star, base))?;
    let confirmation_acceptance = if confirm_steps > 0 {
        let cfg = SamplerConfig {
            epsilon: recommended,
            steps: confirm_steps,
            chains: 1,
            mala_probe_stride: 20,
            ..base.clone()
        };
        let traces = target
            .with_objective(|obj, w_star| run_chains(obj, w_star, &cfg, SamplerKind::Sgld))?;
        traces[0].mean_probe_acceptance()
    } else {
        None
    };
    if let Some(out) = out {
        report::ensure_out_dir(out)?;
        let record = serde_json::json!({
            "recommended_epsilon": recommended,
            "pilots": rep
                .tried
                .iter()
                .map(|(e, a)| serde_json::json!({"epsilon": e, "acceptance": a}))
                .collect::<Vec<_>>(),
            "confirmation_acceptance": confirmation_acceptance,
        });
        report::write_json(&report::out_file(out, "tune.json"), &record)?;
    }
    Ok(TuneOutput {
        recommended,
        report: rep,
        confirmation_acceptance,
    })
}

pub fn print(out: &TuneOutput) {
    println!("{:>14}  {:>10}", "epsilon", "acceptance");
    for (eps, acc) in &out.report.tried {
        println!("{eps:>14.4e}  {acc:>10.4}");
    }
    println!("recommended epsilon: {:.4e}", out.recommended);
    if let Some(a) = out.confirmation_acceptance {
        println!("confirmation chain mean acceptance: {a:.4}");
    }
}
