use crate::error::{Error, Result};

/// Arithmetic mean and standard error (sample std / sqrt(count)).
pub fn mean_and_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "mean_and_stderr: empty input".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Ordinary least squares y = slope*x + intercept. Returns
/// (slope, intercept, sum of squared residuals).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "linear_fit: need >= 2 paired points".into(),
        ));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "linear_fit: degenerate x values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    Ok((slope, intercept, rss))
}

/// Result of fitting the volume scaling law
/// V(eps) = c * eps^lambda * (-log eps)^(m-1).
#[derive(Clone, Debug)]
pub struct ScalingFit {
    pub lambda: f64,
    pub multiplicity: u32,
    pub c: f64,
    pub residual: f64,
}

/// Multiplicity candidates are capped at 4; every worked example in this
/// domain has small m and a larger grid would make the fit ill-conditioned.
pub const MAX_MULTIPLICITY: u32 = 4;

/// Least-squares fit of log V = lambda*log(eps) + (m-1)*log(-log eps) + log c,
/// with the integer multiplicity m selected over 1..=4 by minimum residual.
pub fn fit_scaling_law(eps_grid: &[f64], volumes: &[f64]) -> Result<ScalingFit> {
    if eps_grid.len() != volumes.len() {
        return Err(Error::InvalidArgument(
            "fit_scaling_law: grids differ in length".into(),
        ));
    }
    if eps_grid.len() < 4 {
        return Err(Error::InvalidArgument(
            "fit_scaling_law: need at least 4 grid points".into(),
        ));
    }
    for &e in eps_grid {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fit_scaling_law: eps must lie in (0,1), got {e}"
            )));
        }
    }
    for &v in volumes {
        if !(v > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "fit_scaling_law: volumes must be positive, got {v}"
            )));
        }
    }
    let log_eps: Vec<f64> = eps_grid.iter().map(|e| e.ln()).collect();
    let log_log: Vec<f64> = eps_grid.iter().map(|e| (-e.ln()).ln()).collect();
    let log_v: Vec<f64> = volumes.iter().map(|v| v.ln()).collect();

    let mut best: Option<ScalingFit> = None;
    for m in 1..=MAX_MULTIPLICITY {
        let ys: Vec<f64> = log_v
            .iter()
            .zip(&log_log)
            .map(|(lv, ll)| lv - f64::from(m - 1) * ll)
            .collect();
        let (slope, intercept, rss) = linear_fit(&log_eps, &ys)?;
        let candidate = ScalingFit {
            lambda: slope,
            multiplicity: m,
            c: intercept.exp(),
            residual: rss,
        };
        if best.as_ref().is_none_or(|b| rss < b.residual) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one multiplicity candidate"))
}

/// Median of a sample (averages the middle pair for even counts).
pub fn median(values: &[f64]) -> f64 {
    percentile(values, 50.0)
}

/// Percentile by linear interpolation between order statistics.
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = rank - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Kendall rank correlation between paired samples; used to check
/// monotone trends without assuming a functional form.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let dx = xs[j] - xs[i];
            let dy = ys[j] - ys[i];
            let s = dx * dy;
            if s > 0.0 {
                concordant += 1;
            } else if s < 0.0 {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    (concordant - discordant) as f64 / pairs
}
