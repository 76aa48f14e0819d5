use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use gravpanel_core::unitroot::tables::{
    simulate_all, write_moments_csv, write_pvalue_csv, MOMENTS_CSV, PVALUE_CSV, REPLICATIONS, SEED,
};
use gravpanel_core::unitroot::{
    adf_p_value, adf_regression, adf_test, fisher_combine, fisher_from_series, ips_from_series,
    Deterministics, P_FLOOR,
};

fn ar1(seed: u64, len: usize, phi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(len);
    let mut level = 0.0;
    for _ in 0..len {
        let e: f64 = StandardNormal.sample(&mut rng);
        level = phi * level + e;
        y.push(level);
    }
    y
}

/// t statistic on y_{t-1} in Δy_t = γ y_{t-1} + c [+ δ t] + Σ φ_j Δy_{t-j},
/// solved through (X'X)⁻¹.
fn adf_t_oracle(y: &[f64], lags: usize, trend: bool) -> f64 {
    let dy: Vec<f64> = (1..y.len()).map(|i| y[i] - y[i - 1]).collect();
    let mut rows = Vec::new();
    let mut lhs = Vec::new();
    for t in lags..dy.len() {
        let mut row = vec![y[t], 1.0];
        if trend {
            row.push((t - lags + 1) as f64);
        }
        for j in 1..=lags {
            row.push(dy[t - j]);
        }
        rows.push(row);
        lhs.push(dy[t]);
    }
    let n = rows.len();
    let k = rows[0].len();
    let x = DMatrix::from_fn(n, k, |r, c| rows[r][c]);
    let v = DVector::from_vec(lhs);
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    let b = &xtx_inv * x.transpose() * &v;
    let e = &v - &x * &b;
    let s2 = e.norm_squared() / (n - k) as f64;
    b[0] / (s2 * xtx_inv[(0, 0)]).sqrt()
}

#[test]
fn adf_t_matches_normal_equations() {
    for (seed, lags, trend) in [(1, 0, false), (2, 1, false), (3, 2, true), (4, 1, true)] {
        let y = ar1(seed, 50, 0.7);
        let det = if trend {
            Deterministics::ConstantTrend
        } else {
            Deterministics::Constant
        };
        let got = adf_regression(&y, lags, det).unwrap().t_stat;
        let want = adf_t_oracle(&y, lags, trend);
        assert!(
            (got - want).abs() < 1e-8,
            "lags {lags}, trend {trend}: {got} vs {want}"
        );
    }
}

#[test]
fn random_walk_t_centres_on_the_dickey_fuller_mean() {
    let seeds = 1000;
    let mean: f64 = (0..seeds)
        .map(|s| {
            adf_regression(&ar1(50_000 + s, 200, 1.0), 0, Deterministics::Constant)
                .unwrap()
                .t_stat
        })
        .sum::<f64>()
        / seeds as f64;
    assert!((-1.8..=-1.2).contains(&mean), "mean t = {mean}");
}

#[test]
fn tabulated_p_values_at_known_points() {
    let (p, clamped) = adf_p_value(-2.86, Deterministics::Constant, 500);
    assert!((p - 0.05).abs() <= 0.01, "p(-2.86) = {p}");
    assert!(!clamped);
    let (p, _) = adf_p_value(0.0, Deterministics::Constant, 100);
    assert!(p > 0.9, "p(0) = {p}");
    let (p, clamped) = adf_p_value(-10.0, Deterministics::Constant, 100);
    assert_eq!(p, P_FLOOR);
    assert!(clamped);
}

#[test]
fn p_value_is_monotone_in_t() {
    for det in [Deterministics::Constant, Deterministics::ConstantTrend] {
        for n in [20, 49, 200] {
            let mut prev = 0.0;
            for i in 0..100 {
                let t = -6.0 + 0.08 * i as f64;
                let (p, _) = adf_p_value(t, det, n);
                assert!(p >= prev, "{det} n={n}: p({t}) = {p} below {prev}");
                prev = p;
            }
        }
    }
}

fn white_noise_panel(n: usize, len: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    (0..n)
        .map(|i| (format!("E{i:02}"), ar1(seed * 1000 + i as u64, len, 0.0)))
        .collect()
}

#[test]
fn identical_series_average_to_their_own_t() {
    let y = ar1(9, 40, 0.5);
    let series = vec![("A".to_string(), y.clone()), ("B".to_string(), y.clone())];
    let ips = ips_from_series("y", &series, 1, Deterministics::Constant).unwrap();
    let single = adf_test(&y, 1, Deterministics::Constant).unwrap();
    assert!((ips.t_bar - single.t_stat).abs() < 1e-12);
}

#[test]
fn strong_individual_rejections_carry_to_the_panel() {
    let series = white_noise_panel(8, 50, 4);
    for (label, y) in &series {
        let p = adf_test(y, 1, Deterministics::Constant)
            .unwrap()
            .p_value
            .unwrap();
        assert!(p < 0.01, "{label}: p = {p}");
    }
    let ips = ips_from_series("y", &series, 1, Deterministics::Constant).unwrap();
    let fisher = fisher_from_series("y", &series, 1, Deterministics::Constant).unwrap();
    assert!(ips.p_value < 0.01);
    assert!(fisher.p_value < 0.01);
}

#[test]
#[ignore = "regenerates the full tables; takes several minutes"]
fn shipped_tables_regenerate_bit_for_bit() {
    let cells = simulate_all(REPLICATIONS, SEED, |_| {});
    let mut pv = Vec::new();
    write_pvalue_csv(&cells, &mut pv).unwrap();
    let mut mo = Vec::new();
    write_moments_csv(&cells, &mut mo).unwrap();
    assert!(String::from_utf8(pv).unwrap() == PVALUE_CSV);
    assert!(String::from_utf8(mo).unwrap() == MOMENTS_CSV);
}

proptest! {
    #[test]
    fn panel_tests_ignore_series_order(
        seed in 0u64..1000,
        order in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let series = white_noise_panel(6, 30, seed);
        let shuffled: Vec<_> = order.iter().map(|&i| series[i].clone()).collect();
        let det = Deterministics::Constant;
        let a = ips_from_series("y", &series, 1, det).unwrap();
        let b = ips_from_series("y", &shuffled, 1, det).unwrap();
        prop_assert_eq!(a.w_stat, b.w_stat);
        prop_assert_eq!(a.p_value, b.p_value);
        let a = fisher_from_series("y", &series, 1, det).unwrap();
        let b = fisher_from_series("y", &shuffled, 1, det).unwrap();
        prop_assert_eq!(a.statistic, b.statistic);
        prop_assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn fisher_statistic_is_additive(
        left in prop::collection::vec(1e-6f64..1.0, 1..20),
        right in prop::collection::vec(1e-6f64..1.0, 1..20),
    ) {
        let joined: Vec<f64> = left.iter().chain(&right).copied().collect();
        let (a, da, _) = fisher_combine(&left);
        let (b, db, _) = fisher_combine(&right);
        let (ab, dab, _) = fisher_combine(&joined);
        prop_assert_eq!(ab, a + b);
        prop_assert_eq!(dab, da + db);
    }

    #[test]
    fn small_individual_p_values_give_small_fisher_p(
        ps in prop::collection::vec(1e-6f64..0.0099, 1..30),
    ) {
        let (_, _, p) = fisher_combine(&ps);
        prop_assert!(p < 0.01, "{:?} -> {}", ps, p);
    }
}
