use std::path::Path;

use llc_core::numerics::stats::kendall_tau;
use llc_core::theory::{dln_depth_study, DepthStudyRow};
use llc_core::{Result, Rng};

use crate::plot::{Plot, Series};
use crate::report;

pub struct DepthStudyOutput {
    pub rows: Vec<DepthStudyRow>,
    /// Kendall rank correlation between depth and lambda across draws.
    pub depth_lambda_tau: f64,
}

pub fn run(
    width_range: (usize, usize),
    depth_range: (usize, usize),
    draws: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<DepthStudyOutput> {
    let mut rng = Rng::seed_from_u64(seed);
    let rows = dln_depth_study(width_range, depth_range, draws, &mut rng)?;
    let depths: Vec<f64> = rows.iter().map(|r| r.depth as f64).collect();
    let lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let tau = kendall_tau(&depths, &lambdas);

    if let Some(out) = out {
        report::ensure_out_dir(out)?;
        let config = vec![
            ("width_range".into(), format!("{}..{}", width_range.0, width_range.1)),
            ("depth_range".into(), format!("{}..{}", depth_range.0, depth_range.1)),
            ("draws".into(), draws.to_string()),
            ("seed".into(), seed.to_string()),
        ];
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.depth.to_string(),
                    r.param_count.to_string(),
                    r.rank.to_string(),
                    format!("{:.6}", r.lambda),
                ]
            })
            .collect();
        report::write_csv(
            &report::out_file(out, "depth_study.csv"),
            "depth-study",
            &config,
            &["depth", "param_count", "rank", "lambda"],
            &csv_rows,
        )?;
        let mut plot = Plot::new(
            "learning coefficient vs depth (random DLN signatures)",
            "hidden layers",
            "lambda",
        );
        plot.logy = true;
        plot.series.push(Series::points(
            "draws",
            rows.iter()
                .map(|r| (r.depth as f64, r.lambda.max(1e-3)))
                .collect(),
        ));
        plot.render_to(&report::out_file(out, "depth_study.svg"))?;
    }
    Ok(DepthStudyOutput {
        rows,
        depth_lambda_tau: tau,
    })
}
