use std::path::Path;

use llc_core::{idealized_llc, potential_by_name, quadrature_free_energy, Error, Result};

use crate::report;

pub struct FreeEnergyRow {
    pub n: f64,
    pub free_energy: f64,
    pub idealized_lambda: f64,
}

pub fn run(
    potential: &str,
    n_values: &[f64],
    radius: Option<f64>,
    out: Option<&Path>,
) -> Result<Vec<FreeEnergyRow>> {
    let pot = potential_by_name(potential)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown potential `{potential}`")))?;
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        rows.push(FreeEnergyRow {
            n,
            free_energy: quadrature_free_energy(&pot, n, radius)?,
            idealized_lambda: idealized_llc(&pot, n, radius)?,
        });
    }
    if let Some(out) = out {
        report::ensure_out_dir(out)?;
        let config = vec![
            ("potential".into(), potential.to_string()),
            (
                "radius".into(),
                radius.map_or("domain default".into(), |r| r.to_string()),
            ),
        ];
        let csv: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    format!("{:.6e}", r.n),
                    format!("{:.10}", r.free_energy),
                    format!("{:.8}", r.idealized_lambda),
                ]
            })
            .collect();
        report::write_csv(
            &report::out_file(out, &format!("free_energy_{potential}.csv")),
            "free-energy",
            &config,
            &["n", "free_energy", "idealized_lambda"],
            &csv,
        )?;
    }
    Ok(rows)
}

pub fn print(potential: &str, rows: &[FreeEnergyRow]) {
    let known = potential_by_name(potential).and_then(|p| p.known_lambda);
    for r in rows {
        let tail = known
            .map(|k| format!(" (known lambda {k})"))
            .unwrap_or_default();
        println!(
            "n = {:>10.0}: F_n = {:>12.4}, idealized lambda = {:.4}{tail}",
            r.n, r.free_energy, r.idealized_lambda
        );
    }
}
