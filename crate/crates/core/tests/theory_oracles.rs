//! Cross-validation of the theory layer: the prefix-search learning
//! coefficient against exhaustive subset search, the d/2 bound, Monte-Carlo
//! volume scaling against the cataloged exponents, and the idealized
//! estimator's convergence toward them.

use llc_core::numerics::stats::kendall_tau;
use llc_core::theory::{
    dln_depth_study, dln_lambda, dln_lambda_brute_force, idealized_llc, volume_scaling_study,
};
use llc_core::{catalog, potential_by_name, Rng};

/// Exhaustive check over every signature with depth <= 5 and widths <= 6:
/// the sorted-prefix search agrees with brute-force subset enumeration, and
/// every passing subset yields the same lambda.
#[test]
fn prefix_search_matches_exhaustive_subsets_depth_up_to_5() {
    let mut checked = 0usize;
    for depth in 1..=5usize {
        let mut widths = vec![1usize; depth + 1];
        loop {
            for rank in 0..=*widths.iter().min().unwrap() {
                let (lambda, _) = dln_lambda(&widths, rank).unwrap();
                let brute = dln_lambda_brute_force(&widths, rank).unwrap();
                assert!(
                    !brute.is_empty(),
                    "no subset passed for {widths:?} rank {rank}"
                );
                for b in &brute {
                    assert!(
                        (b - lambda).abs() < 1e-10,
                        "widths {widths:?} rank {rank}: prefix {lambda} vs subset {b}"
                    );
                }
                checked += 1;
            }
            // odometer over widths in 1..=6
            let mut i = 0;
            loop {
                if i == widths.len() {
                    break;
                }
                widths[i] += 1;
                if widths[i] <= 6 {
                    break;
                }
                widths[i] = 1;
                i += 1;
            }
            if i == widths.len() {
                break;
            }
        }
    }
    assert!(checked > 100_000, "only {checked} signatures checked");
}

/// lambda never exceeds d/2 across random signatures.
#[test]
fn lambda_bounded_by_half_parameter_count() {
    let mut rng = Rng::seed_from_u64(99);
    for _ in 0..1_000 {
        let depth = rng.uniform_range_usize(1, 8);
        let widths: Vec<usize> = (0..=depth)
            .map(|_| rng.uniform_range_usize(1, 40))
            .collect();
        let rank = rng.uniform_usize(*widths.iter().min().unwrap() + 1);
        let (lambda, sig) = dln_lambda(&widths, rank).unwrap();
        let bound = sig.param_count() as f64 / 2.0;
        assert!(
            lambda <= bound + 1e-9,
            "lambda {lambda} exceeds d/2 = {bound} for {widths:?} rank {rank}"
        );
    }
}

/// Random deep signatures trend toward lower lambda as depth grows.
#[test]
fn depth_study_shows_nonincreasing_lambda_trend() {
    let mut rng = Rng::seed_from_u64(5);
    let rows = dln_depth_study((100, 2000), (2, 800), 150, &mut rng).unwrap();
    let depths: Vec<f64> = rows.iter().map(|r| r.depth as f64).collect();
    let lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let tau = kendall_tau(&depths, &lambdas);
    assert!(tau < 0.0, "Kendall tau {tau} not negative over 150 draws");
}

/// The DLN signature (1,1,1) at rank 0 and the w2w2 potential describe the
/// same singular structure; their lambdas agree.
#[test]
fn chain_dln_agrees_with_w2w2() {
    let (lambda, _) = dln_lambda(&[1, 1, 1], 0).unwrap();
    let w2w2 = potential_by_name("w2w2").unwrap();
    assert_eq!(Some(lambda), w2w2.known_lambda);
}

/// Monte-Carlo volume scaling recovers (lambda, m) for every cataloged
/// potential within +-0.05 at 10^6 samples per grid point.
#[test]
fn volume_scaling_recovers_catalog_exponents() {
    for pot in catalog() {
        let scaling = volume_scaling_study(&pot, 1_000_000, 13, 1234).unwrap();
        let known = pot.known_lambda.unwrap();
        assert!(
            (scaling.fit.lambda - known).abs() < 0.05,
            "{}: fitted {} vs known {known}",
            pot.name,
            scaling.fit.lambda
        );
        assert_eq!(
            scaling.fit.multiplicity,
            pot.known_multiplicity.unwrap(),
            "{}: multiplicity",
            pot.name
        );
    }
}

/// The idealized estimator approaches the known exponent as n grows through
/// 10^3..10^6 (one inversion tolerated for the log log term).
#[test]
fn idealized_llc_converges_with_n() {
    for pot in catalog() {
        let known = pot.known_lambda.unwrap();
        let devs: Vec<f64> = [1e3, 1e4, 1e5, 1e6]
            .iter()
            .map(|&n| (idealized_llc(&pot, n, None).unwrap() - known).abs())
            .collect();
        let inversions = devs.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
        assert!(
            inversions <= 1,
            "{}: deviations not shrinking: {devs:?}",
            pot.name
        );
        // The multiplicity-2 potential converges only at log log n speed,
        // so a final-deviation bound is meaningful for m = 1 alone.
        if pot.known_multiplicity == Some(1) {
            assert!(
                devs.last().unwrap() < &0.06,
                "{}: deviation at n=1e6 is {}",
                pot.name,
                devs.last().unwrap()
            );
        }
    }
}
