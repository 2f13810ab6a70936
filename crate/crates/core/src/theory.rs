//! Exact and semi-exact oracles: the closed-form deep-linear-network
//! learning coefficient, analytic toy potentials with known scaling
//! exponents, Monte-Carlo volume scaling, and low-dimensional quadrature
//! free energy for the idealized estimator.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::rng::Rng;
use crate::numerics::stats::{fit_scaling_law, ScalingFit};

// ---------------------------------------------------------------------------
// DLN learning coefficient
// ---------------------------------------------------------------------------

/// Width/rank signature of a deep linear network together with the index set
/// used by the closed-form learning coefficient.
#[derive(Clone, Debug)]
pub struct DlnSignature {
    /// Layer widths H_0..H_M.
    pub widths: Vec<usize>,
    /// Rank of the product W_M ... W_1.
    pub rank: usize,
    /// Deficiencies Delta_j = H_j - rank.
    pub deltas: Vec<usize>,
    /// Indices in the selected set Sigma (ascending by Delta).
    pub sigma: Vec<usize>,
    /// ell = |Sigma| - 1.
    pub ell: usize,
    /// Integer residue a = (sum of Delta over Sigma) mod ell (0 when ell = 0).
    pub a: usize,
    /// The learning coefficient.
    pub lambda: f64,
}

impl DlnSignature {
    /// Total parameter count of the architecture.
    pub fn param_count(&self) -> usize {
        (1..self.widths.len())
            .map(|j| self.widths[j] * self.widths[j - 1])
            .sum()
    }
}

fn check_sigma_conditions(in_set: &[usize], out_set: &[usize]) -> bool {
    let ell = in_set.len() - 1;
    let max_in = *in_set.iter().max().unwrap();
    let sum_in: usize = in_set.iter().sum();
    let min_out = out_set.iter().min().copied();
    let cond1 = match min_out {
        None => true,
        Some(mo) => max_in < mo,
    };
    let cond2 = sum_in >= ell * max_in;
    let cond3 = match min_out {
        None => true,
        Some(mo) => sum_in < ell * mo,
    };
    cond1 && cond2 && cond3
}

fn lambda_from_sigma(widths: &[usize], rank: usize, sigma_deltas: &[usize]) -> f64 {
    let h0 = widths[0] as f64;
    let hm = *widths.last().unwrap() as f64;
    let r = rank as f64;
    let leading = (-r * r + r * (h0 + hm)) / 2.0;
    let ell = sigma_deltas.len() - 1;
    if ell == 0 {
        return leading;
    }
    let ellf = ell as f64;
    let sum: usize = sigma_deltas.iter().sum();
    let sum_sq: usize = sigma_deltas.iter().map(|&d| d * d).sum();
    let a = (sum % ell) as f64;
    let residue_term = a * (ellf - a) / (4.0 * ellf);
    let mean_term = ellf * (ellf - 1.0) / 4.0 * (sum as f64 / ellf).powi(2);
    // sum over pairs i < j of Delta_i * Delta_j = (S^2 - sum of squares)/2
    let pair_term = 0.5 * ((sum * sum - sum_sq) as f64) / 2.0;
    leading + residue_term - mean_term + pair_term
}

/// Closed-form learning coefficient of a biasless DLN with the given widths
/// whose true map has the given rank.
///
/// The index set Sigma is found by sorting the deficiencies ascending and
/// testing each prefix against the three selection conditions; exactly one
/// prefix is expected to pass (an empty complement makes conditions involving
/// its minimum vacuous).
pub fn dln_lambda(widths: &[usize], rank: usize) -> Result<(f64, DlnSignature)> {
    if widths.len() < 2 {
        return Err(Error::InvalidArgument(
            "a DLN needs at least input and output widths".into(),
        ));
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(Error::InvalidArgument("zero layer width".into()));
    }
    let min_width = *widths.iter().min().unwrap();
    if rank > min_width {
        return Err(Error::InvalidArgument(format!(
            "rank {rank} exceeds the narrowest width {min_width}"
        )));
    }
    let deltas: Vec<usize> = widths.iter().map(|&h| h - rank).collect();
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by_key(|&i| deltas[i]);
    let sorted: Vec<usize> = order.iter().map(|&i| deltas[i]).collect();

    let mut found: Option<usize> = None;
    for k in 1..=sorted.len() {
        if check_sigma_conditions(&sorted[..k], &sorted[k..]) {
            if let Some(prev) = found {
                return Err(Error::Invariant(format!(
                    "two prefixes ({prev} and {k}) satisfy the Sigma conditions for \
                     widths {widths:?}, rank {rank}"
                )));
            }
            found = Some(k);
        }
    }
    let k = found.ok_or_else(|| {
        Error::Invariant(format!(
            "no prefix satisfies the Sigma conditions for widths {widths:?}, rank {rank}"
        ))
    })?;
    let sigma_deltas = &sorted[..k];
    let ell = k - 1;
    let sum: usize = sigma_deltas.iter().sum();
    let a = if ell == 0 { 0 } else { sum % ell };
    let lambda = lambda_from_sigma(widths, rank, sigma_deltas);
    let sig = DlnSignature {
        widths: widths.to_vec(),
        rank,
        deltas,
        sigma: order[..k].to_vec(),
        ell,
        a,
        lambda,
    };
    Ok((lambda, sig))
}

/// Every subset of indices passing the Sigma conditions, with its lambda.
/// Exponential in the depth; the reference the prefix search is checked
/// against in tests.
pub fn dln_lambda_brute_force(widths: &[usize], rank: usize) -> Result<Vec<f64>> {
    let deltas: Vec<usize> = widths.iter().map(|&h| h - rank).collect();
    let m = deltas.len();
    if m > 20 {
        return Err(Error::InvalidArgument(
            "brute force limited to small depth".into(),
        ));
    }
    let mut lambdas = Vec::new();
    for mask in 1u32..(1 << m) {
        let in_set: Vec<usize> = (0..m)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| deltas[i])
            .collect();
        let out_set: Vec<usize> = (0..m)
            .filter(|&i| mask & (1 << i) == 0)
            .map(|i| deltas[i])
            .collect();
        if check_sigma_conditions(&in_set, &out_set) {
            lambdas.push(lambda_from_sigma(widths, rank, &in_set));
        }
    }
    Ok(lambdas)
}

/// One draw of the random-architecture depth study.
#[derive(Clone, Debug)]
pub struct DepthStudyRow {
    pub depth: usize,
    pub param_count: usize,
    pub rank: usize,
    pub lambda: f64,
}

/// Random DLN signatures with depth and widths drawn uniformly from the
/// given ranges and rank uniform on 0..=min(widths); reports the learning
/// coefficient and parameter count per draw.
pub fn dln_depth_study(
    width_range: (usize, usize),
    depth_range: (usize, usize),
    draws: usize,
    rng: &mut Rng,
) -> Result<Vec<DepthStudyRow>> {
    let (w_lo, w_hi) = width_range;
    let (d_lo, d_hi) = depth_range;
    if w_lo == 0 || w_lo > w_hi || d_lo == 0 || d_lo > d_hi {
        return Err(Error::InvalidArgument("empty study range".into()));
    }
    let mut rows = Vec::with_capacity(draws);
    for _ in 0..draws {
        let depth = rng.uniform_range_usize(d_lo, d_hi);
        let widths: Vec<usize> = (0..=depth)
            .map(|_| rng.uniform_range_usize(w_lo, w_hi))
            .collect();
        let max_rank = *widths.iter().min().unwrap();
        let rank = rng.uniform_range_usize(0, max_rank);
        let (lambda, sig) = dln_lambda(&widths, rank)?;
        rows.push(DepthStudyRow {
            depth,
            param_count: sig.param_count(),
            rank,
            lambda,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Analytic potentials
// ---------------------------------------------------------------------------

/// Evaluation rule of an analytic population loss.
#[derive(Clone, Debug)]
pub enum PotentialKind {
    /// L(w) = scale * ||w - c||^2
    SumSquares { scale: f64 },
    /// L(w) = prod_i (w_i - c_i)^{e_i}; exponents are even so L >= 0.
    Monomial { exponents: Vec<u32> },
    /// L(w) = value everywhere.
    Constant { value: f64 },
    /// L(w) = (w^2 - 1)^2 in one dimension; two symmetric wells.
    DoubleWell,
}

/// Integration/sampling region around the minimum.
#[derive(Clone, Copy, Debug)]
pub enum Domain {
    /// Euclidean ball of the given radius.
    Ball { radius: f64 },
    /// Axis-aligned cube [-half_width, half_width]^d.
    Cube { half_width: f64 },
}

impl Domain {
    pub fn volume(&self, dim: usize) -> f64 {
        match *self {
            Domain::Ball { radius } => match dim {
                1 => 2.0 * radius,
                2 => std::f64::consts::PI * radius * radius,
                3 => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
                _ => panic!("ball volume implemented for d <= 3"),
            },
            Domain::Cube { half_width } => (2.0 * half_width).powi(dim as i32),
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            Domain::Ball { radius } => radius,
            Domain::Cube { half_width } => half_width,
        }
    }
}

/// Analytic population loss with a known minimum, the region used for
/// volume/free-energy oracles, and (when known) the scaling exponent and
/// multiplicity the oracles should recover.
#[derive(Clone, Debug)]
pub struct Potential {
    pub name: String,
    pub dim: usize,
    pub kind: PotentialKind,
    pub domain: Domain,
    pub center: Vec<f64>,
    pub known_lambda: Option<f64>,
    pub known_multiplicity: Option<u32>,
}

impl Potential {
    pub fn sum_squares(name: &str, dim: usize, scale: f64, domain: Domain) -> Self {
        Potential {
            name: name.to_string(),
            dim,
            kind: PotentialKind::SumSquares { scale },
            domain,
            center: vec![0.0; dim],
            known_lambda: Some(dim as f64 / 2.0),
            known_multiplicity: Some(1),
        }
    }

    pub fn monomial(
        name: &str,
        exponents: Vec<u32>,
        domain: Domain,
        known_lambda: f64,
        known_multiplicity: u32,
    ) -> Self {
        let dim = exponents.len();
        Potential {
            name: name.to_string(),
            dim,
            kind: PotentialKind::Monomial { exponents },
            domain,
            center: vec![0.0; dim],
            known_lambda: Some(known_lambda),
            known_multiplicity: Some(known_multiplicity),
        }
    }

    pub fn constant(name: &str, dim: usize, value: f64, domain: Domain) -> Self {
        Potential {
            name: name.to_string(),
            dim,
            kind: PotentialKind::Constant { value },
            domain,
            center: vec![0.0; dim],
            known_lambda: None,
            known_multiplicity: None,
        }
    }

    pub fn double_well(domain_radius: f64) -> Self {
        Potential {
            name: "dwell1d".to_string(),
            dim: 1,
            kind: PotentialKind::DoubleWell,
            domain: Domain::Ball {
                radius: domain_radius,
            },
            center: vec![0.0],
            known_lambda: None,
            known_multiplicity: None,
        }
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.dim);
        match &self.kind {
            PotentialKind::SumSquares { scale } => {
                scale
                    * w.iter()
                        .zip(&self.center)
                        .map(|(x, c)| (x - c) * (x - c))
                        .sum::<f64>()
            }
            PotentialKind::Monomial { exponents } => w
                .iter()
                .zip(&self.center)
                .zip(exponents)
                .map(|((x, c), &e)| (x - c).powi(e as i32))
                .product(),
            PotentialKind::Constant { value } => *value,
            PotentialKind::DoubleWell => {
                let x = w[0];
                let t = x * x - 1.0;
                t * t
            }
        }
    }

    pub fn grad(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.dim);
        match &self.kind {
            PotentialKind::SumSquares { scale } => w
                .iter()
                .zip(&self.center)
                .map(|(x, c)| 2.0 * scale * (x - c))
                .collect(),
            PotentialKind::Monomial { exponents } => {
                let shifted: Vec<f64> = w.iter().zip(&self.center).map(|(x, c)| x - c).collect();
                (0..self.dim)
                    .map(|j| {
                        let mut g = f64::from(exponents[j]);
                        for (i, &x) in shifted.iter().enumerate() {
                            let e = if i == j {
                                exponents[i] as i32 - 1
                            } else {
                                exponents[i] as i32
                            };
                            g *= x.powi(e);
                        }
                        g
                    })
                    .collect()
            }
            PotentialKind::Constant { .. } => vec![0.0; self.dim],
            PotentialKind::DoubleWell => {
                let x = w[0];
                vec![4.0 * x * (x * x - 1.0)]
            }
        }
    }

    /// Loss at the recorded minimum.
    pub fn min_loss(&self) -> f64 {
        self.eval(&self.center)
    }

    /// True when the loss is a function of the distance to the center only.
    pub fn is_radial(&self) -> bool {
        matches!(
            self.kind,
            PotentialKind::SumSquares { .. } | PotentialKind::Constant { .. }
        )
    }

    fn radial_eval(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::SumSquares { scale } => scale * r * r,
            PotentialKind::Constant { value } => *value,
            _ => unreachable!("radial_eval only for radial potentials"),
        }
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        match self.domain {
            Domain::Ball { radius } => {
                w.iter()
                    .zip(&self.center)
                    .map(|(x, c)| (x - c) * (x - c))
                    .sum::<f64>()
                    <= radius * radius
            }
            Domain::Cube { half_width } => w
                .iter()
                .zip(&self.center)
                .all(|(x, c)| (x - c).abs() <= half_width),
        }
    }

    /// Uniform draw from the domain (rejection from the enclosing cube for
    /// balls; fine for d <= 3).
    pub fn sample_domain(&self, rng: &mut Rng) -> Vec<f64> {
        let r = self.domain.radius();
        loop {
            let w: Vec<f64> = self
                .center
                .iter()
                .map(|c| c + rng.uniform_in(-r, r))
                .collect();
            if self.contains(&w) {
                return w;
            }
        }
    }
}

/// The four named potentials exposed on the command line.
pub fn catalog() -> Vec<Potential> {
    vec![
        Potential::sum_squares("quad1d", 1, 1.0, Domain::Ball { radius: 1.0 }),
        Potential::sum_squares("quad2d", 2, 1.0, Domain::Ball { radius: 1.0 }),
        Potential::monomial("w2w4", vec![2, 4], Domain::Cube { half_width: 1.0 }, 0.25, 1),
        Potential::monomial("w2w2", vec![2, 2], Domain::Cube { half_width: 1.0 }, 0.5, 2),
    ]
}

pub fn potential_by_name(name: &str) -> Option<Potential> {
    catalog().into_iter().find(|p| p.name == name)
}

// ---------------------------------------------------------------------------
// Monte-Carlo volume scaling
// ---------------------------------------------------------------------------

/// Rejection-sampling estimate of Vol{w in domain : L(w) - L(w*) < eps}.
#[derive(Clone, Copy, Debug)]
pub struct McVolume {
    pub volume: f64,
    pub stderr: f64,
    pub hits: usize,
    pub samples: usize,
}

impl McVolume {
    /// No sample landed below the tolerance; the tolerance is too small for
    /// this sample budget.
    pub fn starved(&self) -> bool {
        self.hits == 0
    }
}

pub fn mc_volume(pot: &Potential, eps: f64, samples: usize, rng: &mut Rng) -> Result<McVolume> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {eps}"
        )));
    }
    if samples < 1_000 {
        return Err(Error::InvalidArgument(
            "mc_volume needs at least 10^3 samples".into(),
        ));
    }
    let l_min = pot.min_loss();
    let mut hits = 0usize;
    for _ in 0..samples {
        let w = pot.sample_domain(rng);
        if pot.eval(&w) - l_min < eps {
            hits += 1;
        }
    }
    let vol_domain = pot.domain.volume(pot.dim);
    let p = hits as f64 / samples as f64;
    Ok(McVolume {
        volume: p * vol_domain,
        stderr: vol_domain * (p * (1.0 - p) / samples as f64).sqrt(),
        hits,
        samples,
    })
}

/// A volume-scaling measurement across a geometric tolerance grid.
#[derive(Clone, Debug)]
pub struct VolumeScaling {
    pub eps_grid: Vec<f64>,
    pub volumes: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub fit: ScalingFit,
}

/// Measure volumes over a geometric grid eps_0 * 2^-k and fit the scaling
/// law. eps_0 is lowered until the largest hit fraction is at most 1/2 and
/// grid points are dropped once the hit fraction falls below 10^-4, keeping
/// the Monte-Carlo relative error under control at both ends.
pub fn volume_scaling_study(
    pot: &Potential,
    samples_per_eps: usize,
    max_points: usize,
    seed: u64,
) -> Result<VolumeScaling> {
    let pilot_samples = 20_000.max(samples_per_eps / 50);
    let mut eps0 = 1.0_f64;
    for _ in 0..60 {
        let mut rng = Rng::seed_from_u64(Rng::derive_seed(seed, 0xDEAD));
        let v = mc_volume(pot, eps0, pilot_samples, &mut rng)?;
        if (v.hits as f64) <= 0.5 * v.samples as f64 {
            break;
        }
        eps0 *= 0.5;
    }
    let measurements: Vec<Result<McVolume>> = (0..max_points)
        .into_par_iter()
        .map(|k| {
            let eps = eps0 * 0.5f64.powi(k as i32);
            let mut rng = Rng::seed_from_u64(Rng::derive_seed(seed, k as u64 + 1));
            mc_volume(pot, eps, samples_per_eps, &mut rng)
        })
        .collect();
    let mut eps_grid = Vec::new();
    let mut volumes = Vec::new();
    let mut stderrs = Vec::new();
    for (k, m) in measurements.into_iter().enumerate() {
        let m = m?;
        if (m.hits as f64) < 1e-4 * m.samples as f64 {
            break;
        }
        eps_grid.push(eps0 * 0.5f64.powi(k as i32));
        volumes.push(m.volume);
        stderrs.push(m.stderr);
    }
    if eps_grid.len() < 4 {
        return Err(Error::Estimation(format!(
            "volume scaling for {} kept only {} usable grid points",
            pot.name,
            eps_grid.len()
        )));
    }
    let fit = fit_scaling_law(&eps_grid, &volumes)?;
    Ok(VolumeScaling {
        eps_grid,
        volumes,
        stderrs,
        fit,
    })
}

// ---------------------------------------------------------------------------
// Quadrature free energy and the idealized estimator
// ---------------------------------------------------------------------------

fn simpson_nodes(lo: f64, hi: f64, intervals: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / intervals as f64;
    let mut xs = Vec::with_capacity(intervals + 1);
    let mut ws = Vec::with_capacity(intervals + 1);
    for i in 0..=intervals {
        xs.push(lo + h * i as f64);
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        ws.push(w * h / 3.0);
    }
    (xs, ws)
}

/// One composite-Simpson tensor-grid pass of exp(-n (L - L*)) over the
/// domain, at the given per-dimension interval count.
fn shifted_partition_pass(pot: &Potential, n: f64, region: Domain, intervals: usize) -> f64 {
    let l_min = pot.min_loss();
    let c = &pot.center;
    match region {
        Domain::Ball { radius } => {
            // Radial reduction; the potential is radially symmetric here.
            let (xs, ws) = simpson_nodes(0.0, radius, intervals);
            let surface = match pot.dim {
                1 => 2.0,
                2 => 2.0 * std::f64::consts::PI,
                3 => 4.0 * std::f64::consts::PI,
                _ => unreachable!("dim checked by caller"),
            };
            let mut total = 0.0;
            for (x, w) in xs.iter().zip(&ws) {
                let g = (-n * (pot.radial_eval(*x) - l_min)).exp()
                    * x.powi(pot.dim as i32 - 1);
                total += w * g;
            }
            surface * total
        }
        Domain::Cube { half_width } => {
            let (xs, ws) = simpson_nodes(-half_width, half_width, intervals);
            match pot.dim {
                1 => xs
                    .iter()
                    .zip(&ws)
                    .map(|(x, w)| w * (-n * (pot.eval(&[c[0] + x]) - l_min)).exp())
                    .sum(),
                2 => {
                    let mut total = 0.0;
                    for (x, wx) in xs.iter().zip(&ws) {
                        let mut inner = 0.0;
                        for (y, wy) in xs.iter().zip(&ws) {
                            inner +=
                                wy * (-n * (pot.eval(&[c[0] + x, c[1] + y]) - l_min)).exp();
                        }
                        total += wx * inner;
                    }
                    total
                }
                3 => {
                    let mut total = 0.0;
                    for (x, wx) in xs.iter().zip(&ws) {
                        for (y, wy) in xs.iter().zip(&ws) {
                            let mut inner = 0.0;
                            for (z, wz) in xs.iter().zip(&ws) {
                                inner += wz
                                    * (-n
                                        * (pot.eval(&[c[0] + x, c[1] + y, c[2] + z]) - l_min))
                                        .exp();
                            }
                            total += wx * wy * inner;
                        }
                    }
                    total
                }
                _ => unreachable!("dim checked by caller"),
            }
        }
    }
}

/// F_n = -log integral over the region of exp(-n L(w)) dw (flat unnormalized
/// prior), by tensor-grid composite Simpson refined until the change between
/// successive levels is below a 10^-5 relative tolerance.
///
/// `region` defaults to the potential's own domain; passing a radius
/// overrides its size while keeping its shape. Ball regions are integrated
/// in radial coordinates and therefore require a radially symmetric loss.
pub fn quadrature_free_energy(pot: &Potential, n: f64, region_radius: Option<f64>) -> Result<f64> {
    if pot.dim > 3 {
        return Err(Error::InvalidArgument(
            "tensor-grid quadrature supports d <= 3".into(),
        ));
    }
    if !(n >= 10.0) {
        return Err(Error::InvalidArgument(format!(
            "free energy needs n >= 10, got {n}"
        )));
    }
    let region = match (pot.domain, region_radius) {
        (Domain::Ball { .. }, Some(r)) => Domain::Ball { radius: r },
        (Domain::Cube { .. }, Some(r)) => Domain::Cube { half_width: r },
        (d, None) => d,
    };
    if matches!(region, Domain::Ball { .. }) && !pot.is_radial() {
        return Err(Error::InvalidArgument(
            "ball-domain quadrature requires a radially symmetric loss".into(),
        ));
    }
    // Ball regions integrate radially, giving a one-dimensional grid
    // whatever the ambient dimension.
    let max_intervals: usize = if matches!(region, Domain::Ball { .. }) {
        1 << 20
    } else {
        match pot.dim {
            1 => 1 << 20,
            2 => 1 << 13,
            _ => 1 << 9,
        }
    };
    let mut intervals = 16;
    let mut prev: Option<f64> = None;
    while intervals <= max_intervals {
        let integral = shifted_partition_pass(pot, n, region, intervals);
        if integral > 0.0 && integral.is_finite() {
            let f = n * pot.min_loss() - integral.ln();
            if let Some(p) = prev {
                if (f - p).abs() <= 1e-5 * f.abs().max(1.0) {
                    return Ok(f);
                }
            }
            prev = Some(f);
        }
        intervals *= 2;
    }
    Err(Error::Convergence(format!(
        "free energy of {} did not stabilize within {} intervals per dimension",
        pot.name, max_intervals
    )))
}

/// Idealized estimator: (F_n - n L(w*)) / log n with the free energy taken
/// over the region under a flat prior normalized to the region volume, and
/// the analytic population loss standing in for the sample loss.
pub fn idealized_llc(pot: &Potential, n: f64, region_radius: Option<f64>) -> Result<f64> {
    let f_lebesgue = quadrature_free_energy(pot, n, region_radius)?;
    let region_vol = match (pot.domain, region_radius) {
        (Domain::Ball { .. }, Some(r)) => Domain::Ball { radius: r }.volume(pot.dim),
        (Domain::Cube { .. }, Some(r)) => Domain::Cube { half_width: r }.volume(pot.dim),
        (d, None) => d.volume(pot.dim),
    };
    // Normalizing the flat prior adds log(volume) to the free energy.
    Ok((f_lebesgue + region_vol.ln() - n * pot.min_loss()) / n.ln())
}
