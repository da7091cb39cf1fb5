use std::sync::Arc;

use proptest::prelude::*;

use karlin_core::analytic::{
    frechet_cdf, logistic_fdd_cdf, product_tail, product_tail_quadrature, regime_classify, Regime,
};
use karlin_core::environment::SignalEnvironment;
use karlin_core::geometry::UnitBox;
use karlin_core::karlin_process::{
    empirical_sup_measure, occupancy_stats, simulate_path, stream_box_maxima, ModelParams,
};
use karlin_core::limit_measures::{
    sample_critical_limit_rsm, sample_is_rsm, sample_karlin_rsm, sample_noise_limit_rsm, sample_signal_limit_rsm,
    SignalNoise, TruncatedRSM, TruncationPolicy,
};
use karlin_core::poisson_karlin::{poisson_karlin_sup_measure, simulate_marked_points};
use karlin_core::samplers::{sibuya_from_uniform, ParetoParam, SibuyaParam, TailLaw, ZetaLabelLaw};
use karlin_core::stats::ks_statistic;
use karlin_core::RngStream;

fn iv(lo: f64, hi: f64) -> UnitBox {
    UnitBox::interval(lo, hi).unwrap()
}

/// Three cut points `a < b < c` in `[0, 1]` with pieces of length at least `gap`.
fn cuts(gap: f64) -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(move |(x, y, z)| {
        let room = 1.0 - 2.0 * gap;
        let mut v = [x * room, y * room, z * room];
        v.sort_by(f64::total_cmp);
        (v[0], v[1] + gap, v[2] + 2.0 * gap)
    })
}

fn check_axioms(eval: impl Fn(&[UnitBox]) -> Vec<f64>, (a, b, c): (f64, f64, f64)) -> Result<(), TestCaseError> {
    let v = eval(&[iv(a, b), iv(b, c), iv(a, c), iv(0.0, 1.0)]);
    // finite union is the max, nested boxes are ordered
    prop_assert_eq!(v[2], v[0].max(v[1]));
    prop_assert!(v[0] <= v[2] && v[1] <= v[2] && v[2] <= v[3]);
    prop_assert!(v.iter().all(|x| *x >= 0.0));
    Ok(())
}

fn rsm_of(kind: usize, seed: u64, policy: &TruncationPolicy) -> TruncatedRSM {
    let rng = &mut RngStream::new(seed, 0);
    match kind {
        0 => sample_is_rsm(1.5, policy, rng),
        1 => sample_karlin_rsm(1.0, 0.5, policy, rng),
        2 => sample_signal_limit_rsm(0.5, 0.5, SignalNoise::Pareto(ParetoParam::standard(2.0).unwrap()), policy, rng),
        3 => sample_critical_limit_rsm(2.0, 0.5, policy, rng),
        _ => {
            let labels = Arc::new(ZetaLabelLaw::new(0.5).unwrap());
            let env = SignalEnvironment::pareto(ParetoParam::standard(3.0).unwrap(), labels, seed, 9);
            sample_noise_limit_rsm(1.0, &env, policy, rng)
        }
    }
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn limit_measures_are_sup_measures(kind in 0usize..5, seed in any::<u64>(), c in cuts(0.05)) {
        let policy = TruncationPolicy::new(0.05, 1e-3, 1).unwrap();
        let rsm = rsm_of(kind, seed, &policy);
        prop_assert!(rsm.truncation_bound() <= 1e-3);
        check_axioms(|b| rsm.evaluate_values(b).unwrap(), c)?;
        prop_assert_eq!(rsm.evaluate_values(&[iv(0.0, 1.0)]).unwrap()[0], rsm.full_space_value());
    }

    #[test]
    fn path_sup_measure_axioms(seed in any::<u64>(), n in 1u64..3000, c in cuts(0.0)) {
        let params = ModelParams::pareto(1.0, 2.0, 0.5).unwrap();
        let path = simulate_path(&params, n, &mut RngStream::new(seed, 0)).unwrap();
        check_axioms(|b| empirical_sup_measure(&path, b).unwrap(), c)?;
    }

    #[test]
    fn streamed_maxima_agree_with_stored_path(seed in any::<u64>(), n in 1u64..3000, c in cuts(0.0)) {
        let params = ModelParams::pareto(3.0, 1.0, 0.3).unwrap();
        let boxes = [iv(c.0, c.1), iv(c.1, c.2), iv(0.0, 1.0)];
        let path = simulate_path(&params, n, &mut RngStream::new(seed, 4)).unwrap();
        let stored = empirical_sup_measure(&path, &boxes).unwrap();
        let streamed = stream_box_maxima(&params, n, &boxes, &mut RngStream::new(seed, 4)).unwrap();
        prop_assert_eq!(stored, streamed);
    }

    #[test]
    fn poisson_sup_measure_axioms(seed in any::<u64>(), lambda in 1.0..2000.0f64, c in cuts(0.0)) {
        let params = ModelParams::pareto(0.5, 2.0, 0.5).unwrap();
        let pts = simulate_marked_points(&params, lambda, 1, &mut RngStream::new(seed, 0)).unwrap();
        check_axioms(|b| poisson_karlin_sup_measure(&pts, b, true).unwrap(), c)?;
        let no_noise = poisson_karlin_sup_measure(&pts, &[iv(0.0, 1.0)], false).unwrap()[0];
        let noisy = poisson_karlin_sup_measure(&pts, &[iv(0.0, 1.0)], true).unwrap()[0];
        // noise is at least 1, so it can only raise the maximum
        prop_assert!(noisy >= no_noise);
    }

    #[test]
    fn occupancy_conservation(seed in any::<u64>(), n in 1u64..5000, beta in 0.05..0.95f64) {
        let params = ModelParams::pareto(1.0, 2.0, beta).unwrap();
        let path = simulate_path(&params, n, &mut RngStream::new(seed, 1)).unwrap();
        let occ = occupancy_stats(&path);
        prop_assert!(occ.check_conservation(n).is_ok());
        prop_assert!(occ.k_n >= 1 && occ.k_n <= n);
        prop_assert_eq!(occ.k_n as usize, path.signal_values().len());
    }

    #[test]
    fn same_seed_same_path(seed in any::<u64>(), stream in any::<u64>(), n in 1u64..500) {
        let params = ModelParams::pareto(0.5, 2.0, 0.5).unwrap();
        let a = simulate_path(&params, n, &mut RngStream::new(seed, stream)).unwrap();
        let b = simulate_path(&params, n, &mut RngStream::new(seed, stream)).unwrap();
        prop_assert_eq!(a.labels(), b.labels());
        prop_assert_eq!(a.products(), b.products());
    }

    #[test]
    fn nu_is_monotone(beta in 0.05..0.95f64, x in 1.0..1e9f64, f in 1.0..10.0f64) {
        let law = ZetaLabelLaw::new(beta).unwrap();
        prop_assert!(law.nu(x) <= law.nu(x * f));
        let k = law.nu(x);
        if k > 0 {
            // ν counts exactly the labels with 1/p_k <= x
            prop_assert!(law.inverse_pmf(k) <= x);
            prop_assert!(law.inverse_pmf(k + 1) > x);
        }
    }

    #[test]
    fn product_tail_bounds(alpha in 0.2..5.0f64, x in 1.0..1e6f64, f in 1.0..100.0f64) {
        let t = product_tail(alpha, x).unwrap();
        prop_assert!(t <= 1.0 + 1e-15 && t >= x.powf(-alpha));
        prop_assert!(product_tail(alpha, x * f).unwrap() <= t);
    }

    #[test]
    fn product_tail_matches_quadrature(alpha in 0.3..4.0f64, x in 1.0..1e4f64) {
        let law = TailLaw::Pareto(ParetoParam::standard(alpha).unwrap());
        let w = move |y: f64| if y <= 1.0 { 1.0 } else { y.powf(-alpha) };
        let q = product_tail_quadrature(&law, &w, x);
        let exact = product_tail(alpha, x).unwrap();
        prop_assert!((q - exact).abs() <= 1e-6 * exact, "{} vs {}", q, exact);
    }

    #[test]
    fn logistic_cdf_is_a_cdf(
        ap in 0.3..4.0f64,
        beta in 0.05..1.0f64,
        m1 in 0.01..0.5f64,
        m2 in 0.01..0.5f64,
        z1 in 0.01..50.0f64,
        z2 in 0.01..50.0f64,
        f in 1.0..10.0f64,
    ) {
        let p = logistic_fdd_cdf(&[m1, m2], &[z1, z2], ap, beta).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(logistic_fdd_cdf(&[m1, m2], &[z1 * f, z2], ap, beta).unwrap() >= p);
        prop_assert!(logistic_fdd_cdf(&[m1, m2], &[z1, z2 * f], ap, beta).unwrap() >= p);
        // between comonotone and independent
        let f1 = logistic_fdd_cdf(&[m1], &[z1], ap, beta).unwrap();
        let f2 = logistic_fdd_cdf(&[m2], &[z2], ap, beta).unwrap();
        prop_assert!(p <= f1.min(f2) + 1e-12);
        prop_assert!(p >= f1 * f2 - 1e-12);
        // one box is Fréchet with scale μ^β
        prop_assert!((f1 - frechet_cdf(m1.powf(beta), ap * beta, z1)).abs() < 1e-12);
    }

    #[test]
    fn regime_depends_on_ratio(alpha in 0.1..5.0f64, ap in 0.1..5.0f64, beta in 0.05..0.95f64, c in 0.2..5.0f64) {
        let r = regime_classify(alpha, ap, beta);
        prop_assert_eq!(r, regime_classify(alpha * c, ap * c, beta));
        let expect = if alpha > ap * beta { Regime::NoiseDominance } else if alpha < ap * beta { Regime::SignalDominance } else { Regime::Critical };
        prop_assert_eq!(r, expect);
    }

    #[test]
    fn sibuya_inversion_is_monotone(beta in 0.05..0.95f64, u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let p = SibuyaParam::new(beta).unwrap();
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        // larger uniforms are deeper in the tail
        prop_assert!(sibuya_from_uniform(&p, lo) >= sibuya_from_uniform(&p, hi));
        prop_assert!(sibuya_from_uniform(&p, hi) >= 1);
    }

    #[test]
    fn ks_statistic_range(xs in prop::collection::vec(0.0..10.0f64, 1..200)) {
        let d = ks_statistic(&xs, |z| (z / 10.0).clamp(0.0, 1.0)).unwrap();
        prop_assert!(d > 0.0 && d <= 1.0);
        prop_assert!(d >= 0.5 / xs.len() as f64);
    }
}
