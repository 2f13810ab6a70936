//! CSV and JSON artifact emission. Every file begins with `#`-prefixed
//! comment lines that echo the resolved configuration, followed by a header
//! row; rows are plain comma-separated values with no quoting (fields are
//! numeric or use `;`/`x` as internal separators).

use std::io::Write as _;
use std::path::{Path, PathBuf};

use llc_core::{Error, LlcEstimate, Result};

pub fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

pub fn write_csv(
    path: &Path,
    command: &str,
    config: &[(String, String)],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# llc-lab {command}")?;
    for (k, v) in config {
        writeln!(f, "# {k} = {v}")?;
    }
    writeln!(f, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Invariant(format!(
                "csv row with {} fields against {} columns",
                row.len(),
                header.len()
            )));
        }
        for field in row {
            debug_assert!(
                !field.contains(',') && !field.contains('\n'),
                "csv fields must not contain separators: {field}"
            );
        }
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("json encoding: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// The structured estimate record emitted by estimation commands.
pub fn estimate_record(est: &LlcEstimate, extra: &[(&str, serde_json::Value)]) -> serde_json::Value {
    let mut obj = serde_json::json!({
        "lambda_hat": est.lambda_hat,
        "stderr": est.stderr,
        "per_chain": est.per_chain,
        "n": est.n,
        "beta": est.beta,
        "gamma": est.gamma,
        "epsilon": est.epsilon,
        "steps": est.steps,
        "burnin_frac": est.burnin_frac,
        "L_init": est.l_init,
        "wbic_hat": est.wbic_hat,
        "flags": est.flags.as_strings(),
        "seed": est.seed,
    });
    if let Some(hint) = est.hint() {
        obj["hint"] = serde_json::Value::String(hint);
    }
    for (k, v) in extra {
        obj[*k] = v.clone();
    }
    obj
}

/// Trace CSV with the pinned schema (chain, step, minibatch_loss,
/// accept_prob_or_blank).
pub fn write_trace_csv(
    path: &Path,
    command: &str,
    config: &[(String, String)],
    traces: &[llc_core::ChainTrace],
) -> Result<()> {
    let mut rows = Vec::new();
    for (ci, t) in traces.iter().enumerate() {
        let mut probe_iter = t.probes.iter().peekable();
        for (si, loss) in t.losses.iter().enumerate() {
            let accept = match probe_iter.peek() {
                Some(&&(step, alpha)) if step == si => {
                    probe_iter.next();
                    format!("{alpha:.6}")
                }
                _ => String::new(),
            };
            rows.push(vec![
                ci.to_string(),
                si.to_string(),
                format!("{loss:.12e}"),
                accept,
            ]);
        }
    }
    write_csv(
        path,
        command,
        config,
        &["chain", "step", "minibatch_loss", "accept_prob_or_blank"],
        &rows,
    )
}

pub fn out_file(out: &Path, name: &str) -> PathBuf {
    out.join(name)
}

/// Render a loss-trace plot with the acceptance probes overlaid on a right
/// axis, one series per chain (first chain only for the probes to keep the
/// plot readable).
pub fn trace_plot(
    path: &Path,
    title: &str,
    traces: &[llc_core::ChainTrace],
) -> Result<()> {
    use crate::plot::{Plot, Series, SeriesStyle};
    let mut plot = Plot::new(title, "step", "recorded loss");
    for (ci, t) in traces.iter().enumerate().take(4) {
        let stride = (t.losses.len() / 2_000).max(1);
        let pts: Vec<(f64, f64)> = t
            .losses
            .iter()
            .enumerate()
            .step_by(stride)
            .map(|(i, &l)| (i as f64, l))
            .collect();
        plot.series.push(Series::line(&format!("chain {ci}"), pts));
    }
    if let Some(t) = traces.first() {
        if !t.probes.is_empty() {
            plot.right_ylabel = Some("MALA acceptance probe".into());
            plot.series.push(Series {
                label: "acceptance".into(),
                points: t
                    .probes
                    .iter()
                    .map(|&(s, a)| (s as f64, a))
                    .collect(),
                style: SeriesStyle::RightAxisPoints,
                bars: None,
            });
        }
    }
    plot.render_to(path)
}
