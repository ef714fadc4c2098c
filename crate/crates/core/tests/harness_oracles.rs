mod common;

use common::*;
use exact_fpt::harness::{
    delta_compare, em_fpt_oracle, expected_iterations, histogram, ig_pdf, ks_statistic,
    poisson_count_check, rho_distance_bound, sample_batch, CostUnit,
};
use exact_fpt::{DriftModel, Variant};

#[test]
fn em_oracle_reproduces_drifted_brownian_motion() {
    let m = DriftModel::Constant { mu: 1.0 };
    let em = em_fpt_oracle(&m, 0.0, 2.0, 40.0, 1e-4, 100_000, 501, 1).unwrap();
    assert!(em.censored_fraction() < 1e-3);
    let mass = drifted_bm_cdf(40.0, 2.0, 1.0);
    let d = ks_statistic(&em.crossed, |t| drifted_bm_cdf(t, 2.0, 1.0) / mass).unwrap();
    assert!(d < 0.015, "KS = {d}");
}

#[test]
fn em_oracle_reproduces_brownian_motion() {
    let m = DriftModel::Constant { mu: 0.0 };
    let t_max = 2.0;
    let em = em_fpt_oracle(&m, 0.0, 1.0, t_max, 1e-4, 100_000, 502, 1).unwrap();
    let mass = bm_cdf(t_max, 1.0);
    assert!((1.0 - em.censored_fraction() - mass).abs() < 0.01);
    let d = ks_statistic(&em.crossed, |t| bm_cdf(t.min(t_max), 1.0) / mass).unwrap();
    assert!(d < 0.015, "KS = {d}");
}

#[test]
fn em_oracle_refines_with_the_step() {
    let m = DriftModel::Constant { mu: 1.0 };
    let ks = |step: f64| {
        let em = em_fpt_oracle(&m, 0.0, 2.0, 40.0, step, 20_000, 503, 1).unwrap();
        ks_statistic(&em.crossed, |t| drifted_bm_cdf(t, 2.0, 1.0)).unwrap()
    };
    let (coarse, fine) = (ks(0.1), ks(0.0125));
    // a trend, not a strict ordering: noise at this n is about 0.01
    assert!(fine <= coarse + 0.01, "{coarse} -> {fine}");
}

#[test]
fn histogram_tracks_the_density() {
    let cfg = config(DriftModel::Constant { mu: 1.0 }, 0.0, 2.0, 0.5, Variant::A1);
    let n = 10_000;
    let set = sample_batch(&cfg, n, 504, 1).unwrap();
    let bins = histogram(&set.values, 60).unwrap();
    // the range comes from the sample, so the two edge bins are conditioned
    // to hold the extremes; the interior bins are free
    for b in &bins[1..bins.len() - 1] {
        let width = b.right - b.left;
        let p = drifted_bm_cdf(b.right, 2.0, 1.0) - drifted_bm_cdf(b.left, 2.0, 1.0);
        let expect = p / width;
        let se = (p * (1.0 - p) / n as f64).sqrt() / width;
        assert!(
            (b.density - expect).abs() <= 3.0 * se + 1e-12,
            "[{}, {}]: {} vs {} (se {se})",
            b.left,
            b.right,
            b.density,
            expect
        );
    }
    // midpoint density agrees with the library's pdf to second order
    let b = bins[5];
    let mid = 0.5 * (b.left + b.right);
    let p = drifted_bm_cdf(b.right, 2.0, 1.0) - drifted_bm_cdf(b.left, 2.0, 1.0);
    assert!((ig_pdf(mid, 2.0, 1.0) - p / (b.right - b.left)).abs() < 1e-2);
}

#[test]
fn delta_vanishes_without_thinning() {
    let cfg = config(DriftModel::Constant { mu: 0.0 }, 0.0, 1.0, 0.0, Variant::A1);
    for unit in [CostUnit::Points, CostUnit::Variates] {
        let r = delta_compare(&cfg, 1000, 505, 1, unit).unwrap();
        assert_eq!(r.mean_delta, 0.0);
        assert_eq!(r.std_delta, 0.0);
    }
}

#[test]
fn delta_replicates_share_their_points() {
    // With a constant field every tested point is accepted, so both
    // readings walk the full rectangle and examine the same number of
    // candidates on every iteration.
    let cfg = config(DriftModel::Constant { mu: 1.0 }, 0.0, 0.5, 0.5, Variant::A1);
    let r = delta_compare(&cfg, 2000, 506, 1, CostUnit::Points).unwrap();
    assert_eq!(r.mean_delta, 0.0);
    assert_eq!(r.std_delta, 0.0);
}

#[test]
fn expected_iteration_examples() {
    let one = DriftModel::Constant { mu: 1.0 };
    assert!((expected_iterations(&one, 0.0, 2.0, 0.0, 1).unwrap() - 2f64.exp()).abs() < 1e-12);
    assert!((expected_iterations(&one, 0.0, 2.0, 0.5, 1).unwrap() - 1.0).abs() < 1e-12);
    // beta(2) - beta(0) = 4 + 1 - cos 2 for b = 2 + sin
    let sine = DriftModel::Sine { offset: 2.0 };
    let want = (5.0 - 2f64.cos()).exp();
    let got = expected_iterations(&sine, 0.0, 2.0, 0.0, 1).unwrap();
    assert!((got - want).abs() < 1e-9 * want);
    assert!((got - 225.01).abs() < 0.1, "{got}");
    // shift ratio exp(-2 sqrt(0.5))
    let shifted = expected_iterations(&sine, 0.0, 2.0, 0.25, 1).unwrap();
    assert!((shifted / got - 0.2431).abs() < 1e-4);
}

#[test]
fn poisson_points_in_both_orders() {
    for (ceiling, horizon) in [(5.0, 0.4), (0.5, 9.0), (3.3, 3.0)] {
        let r = poisson_count_check(ceiling, horizon, 20_000, 507).unwrap();
        assert!(r.time_ordered.passes(0.01), "{:?}", r.time_ordered);
        assert!(r.height_ordered.passes(0.01), "{:?}", r.height_ordered);
    }
}

#[test]
fn rho_bound_decreases() {
    let ou = DriftModel::OrnsteinUhlenbeck {
        alpha: 0.3,
        beta: 1.0,
    };
    let bounds: Vec<f64> = [2.0, 3.0, 5.0, 8.0]
        .iter()
        .map(|&r| rho_distance_bound(&ou, 0.0, 1.0, r).unwrap())
        .collect();
    assert!(bounds.windows(2).all(|w| w[1] < w[0]), "{bounds:?}");
    assert!(bounds[3] < 1e-6);
}
