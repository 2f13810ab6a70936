use std::path::Path;

use llc_core::theory::{volume_scaling_study, VolumeScaling};
use llc_core::{potential_by_name, Error, Result};

use crate::plot::{Plot, Series};
use crate::report;

pub fn run(
    potential: &str,
    samples: usize,
    max_points: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<VolumeScaling> {
    let pot = potential_by_name(potential).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "unknown potential `{potential}`; catalog: {}",
            llc_core::catalog()
                .iter()
                .map(|p| p.name.clone())
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })?;
    let scaling = volume_scaling_study(&pot, samples, max_points, seed)?;

    if let Some(out) = out {
        report::ensure_out_dir(out)?;
        let config = vec![
            ("potential".into(), potential.to_string()),
            ("samples_per_eps".into(), samples.to_string()),
            ("max_points".into(), max_points.to_string()),
            ("seed".into(), seed.to_string()),
            ("fitted_lambda".into(), format!("{:.6}", scaling.fit.lambda)),
            ("fitted_m".into(), scaling.fit.multiplicity.to_string()),
        ];
        let rows: Vec<Vec<String>> = scaling
            .eps_grid
            .iter()
            .zip(&scaling.volumes)
            .zip(&scaling.stderrs)
            .map(|((e, v), s)| {
                vec![format!("{e:.8e}"), format!("{v:.8e}"), format!("{s:.8e}")]
            })
            .collect();
        report::write_csv(
            &report::out_file(out, &format!("volume_{potential}.csv")),
            "volume",
            &config,
            &["eps", "volume", "stderr"],
            &rows,
        )?;

        let mut plot = Plot::new(
            &format!(
                "volume scaling of {potential}: lambda = {:.3}, m = {}",
                scaling.fit.lambda, scaling.fit.multiplicity
            ),
            "tolerance eps",
            "V(eps)",
        );
        plot.logx = true;
        plot.logy = true;
        plot.series.push(Series::points(
            "measured",
            scaling
                .eps_grid
                .iter()
                .zip(&scaling.volumes)
                .map(|(&e, &v)| (e, v))
                .collect(),
        ));
        let fit = &scaling.fit;
        plot.series.push(Series::line(
            "fit",
            scaling
                .eps_grid
                .iter()
                .map(|&e| {
                    (
                        e,
                        fit.c * e.powf(fit.lambda)
                            * (-e.ln()).powi(fit.multiplicity as i32 - 1),
                    )
                })
                .collect(),
        ));
        plot.render_to(&report::out_file(out, &format!("volume_{potential}.svg")))?;
    }
    Ok(scaling)
}

pub fn print(potential: &str, scaling: &VolumeScaling) {
    println!(
        "{potential}: lambda = {:.4}, m = {}, c = {:.4e} over {} grid points (residual {:.3e})",
        scaling.fit.lambda,
        scaling.fit.multiplicity,
        scaling.fit.c,
        scaling.eps_grid.len(),
        scaling.fit.residual
    );
    if let Some(known) = llc_core::potential_by_name(potential).and_then(|p| p.known_lambda) {
        println!(
            "known lambda = {known}; deviation {:+.4}",
            scaling.fit.lambda - known
        );
    }
}
