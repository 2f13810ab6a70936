use std::path::Path;

use llc_core::{estimate_llc, run_chains, ChainTrace, LlcEstimate, Result, SamplerConfig, SamplerKind};

use crate::commands::target::Target;
use crate::config::sampler_echo;
use crate::report;

pub struct EstimateOutput {
    pub estimate: LlcEstimate,
    pub traces: Vec<ChainTrace>,
}

pub fn run(
    target: &Target,
    cfg: &SamplerConfig,
    kind: SamplerKind,
    out: Option<&Path>,
    source_note: Option<&str>,
) -> Result<EstimateOutput> {
    let (estimate, traces) = target.with_objective(|obj, w_star| {
        let traces = run_chains(obj, w_star, cfg, kind)?;
        let estimate = estimate_llc(&traces, obj, w_star, cfg)?;
        Ok((estimate, traces))
    })?;

    if let Some(out) = out {
        report::ensure_out_dir(out)?;
        let mut extra: Vec<(&str, serde_json::Value)> = vec![(
            "sampler",
            serde_json::Value::String(
                match kind {
                    SamplerKind::Sgld => "sgld",
                    SamplerKind::Mala => "mala",
                }
                .to_string(),
            ),
        )];
        if let Some(note) = source_note {
            extra.push(("w_star_source", serde_json::Value::String(note.into())));
        }
        if let Some(rate) = traces.first().and_then(|t| t.acceptance_rate()) {
            extra.push((
                "acceptance_rate",
                serde_json::Value::from(rate),
            ));
        }
        report::write_json(
            &report::out_file(out, "estimate.json"),
            &report::estimate_record(&estimate, &extra),
        )?;
        let echo = sampler_echo(cfg);
        report::write_trace_csv(&report::out_file(out, "trace.csv"), "estimate", &echo, &traces)?;
        report::trace_plot(
            &report::out_file(out, "trace.svg"),
            &format!(
                "loss trace, lambda_hat = {:.3} +- {:.3}",
                estimate.lambda_hat, estimate.stderr
            ),
            &traces,
        )?;
    }
    Ok(EstimateOutput { estimate, traces })
}

pub fn print(out: &EstimateOutput) {
    let e = &out.estimate;
    println!(
        "lambda_hat = {:.4} +- {:.4}  (n = {}, beta = {:.5}, gamma = {}, epsilon = {:.3e})",
        e.lambda_hat, e.stderr, e.n, e.beta, e.gamma, e.epsilon
    );
    println!(
        "L_init = {:.6}, wbic_hat = {:.4}, chains used = {}",
        e.l_init,
        e.wbic_hat,
        e.per_chain.len()
    );
    if !e.flags.as_strings().is_empty() {
        println!("flags: {}", e.flags.as_strings().join(", "));
    }
    if let Some(hint) = e.hint() {
        println!("hint: {hint}");
    }
    if let Some(rate) = out.traces.first().and_then(|t| t.acceptance_rate()) {
        println!("acceptance rate: {rate:.4}");
    } else if let Some(mean) = out.traces.first().and_then(|t| t.mean_probe_acceptance()) {
        println!("mean probe acceptance: {mean:.4}");
    }
}
