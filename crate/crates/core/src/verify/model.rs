use std::sync::Arc;

use super::report::{EcdfCurve, ReportBuilder, VerificationReport};
use super::{check_suite, fmt_param, par_reps, tag, ExperimentConfig, Suite};
use crate::analytic::{
    frechet_cdf, logistic_fdd_cdf, solve_normalizer, Normalizer, NormalizerContext,
    NormalizerKind, Regime,
};
use crate::environment::SignalEnvironment;
use crate::error::{Error, Result};
use crate::geometry::UnitBox;
use crate::karlin_process::{
    stream_box_maxima, stream_box_maxima_quenched, stream_clusters, ModelParams,
};
use crate::limit_measures::{
    sample_critical_limit_rsm, sample_noise_limit_rsm, SignalLimitSampler, SignalNoise, TruncationPolicy,
};
use crate::poisson_karlin;
use crate::samplers::{ParetoParam, SibuyaParam, ZetaLabelLaw};
use crate::special::gamma;
use crate::stats::{chi_square_gof, ecdf, ks_statistic, mean_stderr, pool_cells, two_sample_ks};

const RSM_TOL: f64 = 1e-4;
/// Clusters with the largest signal values whose sizes enter the Sibuya test.
const TOP_CLUSTERS: usize = 10;
const SIZE_CELLS: u64 = 30;

/// `E K_n = Σ_k 1 − (1 − p_k)^n`, summed until `n p_k < 1e-4` and closed
/// with the integral of `n p_k` over the rest.
fn expected_distinct(labels: &ZetaLabelLaw, n: u64) -> f64 {
    let nf = n as f64;
    let s = labels.exponent();
    let mut total = 0.0;
    let mut k = 1u64;
    loop {
        let p = labels.pmf(k);
        if nf * p < 1e-4 {
            let kf = k as f64 - 0.5;
            return total + nf / labels.zeta_s() * kf.powf(1.0 - s) / (s - 1.0);
        }
        total += -(nf * (-p).ln_1p()).exp_m1();
        k += 1;
    }
}

/// `K_n / ν(n) → Γ(1−β)` and the Sibuya law of extremal cluster sizes.
pub fn run_occupancy_experiment(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let cfg = check_suite(cfg, Suite::Occupancy)?;
    let betas = cfg.betas_or(&[0.3, 0.5, 0.7])?;
    let n = cfg.n.unwrap_or(1_000_000);
    let reps = cfg.reps.unwrap_or(100);
    let tol = cfg.tolerances;
    let mut rb = ReportBuilder::new(cfg.clone());

    // The limit constant must already describe E K_n / ν(n) at this n.
    rb.calibration(true);
    let mut laws = Vec::new();
    for &beta in &betas {
        let labels = Arc::new(ZetaLabelLaw::new(beta)?);
        let nu = labels.nu(n as f64) as f64;
        if nu < 1.0 {
            return Err(Error::Config(format!("nu({n}) = 0 for beta = {beta}; increase n")));
        }
        let target = gamma(1.0 - beta);
        rb.within(
            &format!("calibration/beta={}/expected_ratio", fmt_param(beta)),
            "ratio",
            expected_distinct(&labels, n) / nu,
            target,
            tol.ratio_rel * target,
        );
        laws.push(labels);
    }
    rb.calibration(false);
    if !rb.calibration_ok() {
        rb.note("calibration failed; occupancy not simulated");
        return Ok(rb.finish(rayon::current_num_threads()));
    }

    for (i, (beta, labels)) in betas.iter().zip(&laws).enumerate() {
        let beta = *beta;
        let params = ModelParams::with_laws(
            1.0,
            1.0,
            crate::samplers::TailLaw::Pareto(ParetoParam::standard(1.0)?),
            crate::samplers::TailLaw::Pareto(ParetoParam::standard(1.0)?),
            labels.clone(),
        )?;
        let nu = labels.nu(n as f64) as f64;
        let runs = par_reps(cfg.seed, tag::MODEL + 16 * i as u64, reps, |_, rng| {
            let (k, clusters) = stream_clusters(&params, n, rng)?;
            let sizes: Vec<u64> = clusters.iter().take(TOP_CLUSTERS).map(|c| c.size).collect();
            Ok((k, sizes))
        })?;
        let ratios: Vec<f64> = runs.iter().map(|(k, _)| *k as f64 / nu).collect();
        let (m, se) = mean_stderr(&ratios)?;
        let target = gamma(1.0 - beta);
        rb.within_se(
            &format!("beta={}/distinct_ratio", fmt_param(beta)),
            "mean_ratio",
            m,
            target,
            tol.ratio_rel * target,
            se,
        );

        let sib = SibuyaParam::new(beta)?;
        let mut counts = vec![0u64; SIZE_CELLS as usize + 1];
        let mut total = 0u64;
        for (_, sizes) in &runs {
            for &s in sizes {
                counts[(s.min(SIZE_CELLS + 1) - 1) as usize] += 1;
                total += 1;
            }
        }
        let mut probs: Vec<f64> = (1..=SIZE_CELLS).map(|k| sib.pmf(k)).collect();
        probs.push(sib.survival(SIZE_CELLS));
        let (obs, pr) = pool_cells(&counts, &probs, total, 5.0);
        let c = chi_square_gof(&obs, &pr)?;
        rb.chi2(&format!("beta={}/cluster_size_chi2", fmt_param(beta)), &c);
    }
    Ok(rb.finish(rayon::current_num_threads()))
}

fn normalizer_for(params: &ModelParams, n: u64) -> Result<Normalizer> {
    let kind = NormalizerKind::for_regime(params.regime());
    let ctx = NormalizerContext {
        signal: &params.signal_law,
        noise: &params.noise_law,
        labels: &params.label_law,
    };
    solve_normalizer(kind, n, &ctx)
}

fn pareto_of(law: &crate::samplers::TailLaw) -> Result<ParetoParam> {
    law.as_pareto()
        .copied()
        .ok_or_else(|| Error::Config("verification needs Pareto signal and noise laws".into()))
}

/// The limit law of the scaled box maxima.
enum Oracle {
    /// `P(M(B) <= z) = exp(-θ(B) z^(-a))` with `θ(B) = c μ(B)^p`.
    Frechet { c: f64, power: f64, alpha: f64 },
    /// Logistic: the critical regime.
    Logistic { alpha_prime: f64, beta: f64 },
    /// Annealed noise limit: `E exp(-μ(B) m z^(-α′))` over environment moments `m`.
    Mixture { alpha_prime: f64, moments: Vec<f64> },
}

impl Oracle {
    fn cdf(&self, mu: f64, z: f64) -> f64 {
        match self {
            Oracle::Frechet { c, power, alpha } => frechet_cdf(c * mu.powf(*power), *alpha, z),
            Oracle::Logistic { alpha_prime, beta } => {
                logistic_fdd_cdf(&[mu], &[z], *alpha_prime, *beta).unwrap_or(f64::NAN)
            }
            Oracle::Mixture { alpha_prime, moments } => {
                if z <= 0.0 {
                    return 0.0;
                }
                let t = mu * z.powf(-alpha_prime);
                moments.iter().map(|m| (-m * t).exp()).sum::<f64>() / moments.len() as f64
            }
        }
    }
}

fn box_columns(rows: &[Vec<f64>], nboxes: usize) -> Vec<Vec<f64>> {
    (0..nboxes).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

fn min_measure(boxes: &[UnitBox]) -> f64 {
    boxes.iter().map(UnitBox::measure).fold(1.0, f64::min)
}

/// Scaled box maxima of the discrete model against the regime's limit law.
pub fn run_regime_experiment(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let cfg = check_suite(cfg, Suite::Regime)?;
    let params = cfg.model_params()?;
    let regime = params.regime();
    let n = cfg.n.unwrap_or(100_000);
    let reps = cfg.reps.unwrap_or(2000);
    let boxes = cfg.box_list()?;
    let tol = cfg.tolerances;
    let seed = cfg.seed;
    let policy = TruncationPolicy::new(min_measure(&boxes), RSM_TOL, 1)?;
    let (alpha, ap, beta) = (params.alpha, params.alpha_prime, params.beta);
    let noise = pareto_of(&params.noise_law)?;
    let signal = pareto_of(&params.signal_law)?;
    let mut rb = ReportBuilder::new(cfg.clone());
    rb.note(format!("regime: {regime}"));

    let norm = normalizer_for(&params, n)?;
    rb.normalizer(norm);
    rb.below(
        &format!("normalizer/{}/residual", norm.kind),
        "abs_residual",
        norm.residual.abs(),
        tol.residual,
    );

    // Oracle and its calibration against a direct sample of the limit measure.
    rb.calibration(true);
    let calib_reps = reps.max(2000);
    let oracle = match regime {
        Regime::SignalDominance => {
            let sampler = SignalLimitSampler::new(alpha, beta, SignalNoise::Pareto(noise), &policy)?;
            let c = sampler.moment();
            let rows = par_reps(seed, tag::CALIBRATION, calib_reps, |_, rng| {
                sampler.sample(rng)?.evaluate_values(&boxes)
            })?;
            let o = Oracle::Frechet { c, power: beta, alpha };
            calibrate(&mut rb, &boxes, &box_columns(&rows, boxes.len()), &o)?;
            o
        }
        Regime::Critical => {
            let rows = par_reps(seed, tag::CALIBRATION, calib_reps, |_, rng| {
                sample_critical_limit_rsm(ap, beta, &policy, rng)?.evaluate_values(&boxes)
            })?;
            let o = Oracle::Logistic { alpha_prime: ap, beta };
            calibrate(&mut rb, &boxes, &box_columns(&rows, boxes.len()), &o)?;
            o
        }
        Regime::NoiseDominance => {
            let labels = params.label_law.clone();
            let env_count = (4 * reps).max(4000);
            let moments = par_reps(seed, tag::ENVIRONMENT, env_count, |k, _| {
                SignalEnvironment::pareto(signal, labels.clone(), seed, (tag::ENVIRONMENT << 32) + k as u64).moment(ap)
            })?;
            let o = Oracle::Mixture {
                alpha_prime: ap,
                moments,
            };
            // Limit measures drawn under fresh environments, independent of
            // the ones that built the mixture.
            let rows = par_reps(seed, tag::CALIBRATION, calib_reps, |k, rng| {
                let env = SignalEnvironment::pareto(signal, labels.clone(), seed, (tag::CALIBRATION << 32) + k as u64);
                sample_noise_limit_rsm(ap, &env, &policy, rng)?.evaluate_values(&boxes)
            })?;
            calibrate(&mut rb, &boxes, &box_columns(&rows, boxes.len()), &o)?;
            o
        }
    };
    rb.calibration(false);
    if !rb.calibration_ok() {
        rb.note("calibration failed; model not tested");
        return Ok(rb.finish(rayon::current_num_threads()));
    }

    let rows = par_reps(seed, tag::MODEL, reps, |_, rng| {
        let m = stream_box_maxima(&params, n, &boxes, rng)?;
        Ok(m.into_iter().map(|x| x / norm.value).collect::<Vec<f64>>())
    })?;
    let cols = box_columns(&rows, boxes.len());
    let ks_tol = tol.ks_for(regime);
    for (b, col) in boxes.iter().zip(&cols) {
        let mu = b.measure();
        let d = ks_statistic(col, |z| oracle.cdf(mu, z))?;
        rb.ks_fixed(&format!("box={b}/ks"), d, ks_tol, col.len() as f64);
        rb.curve(EcdfCurve::from_sample(format!("box{b}"), col, |z| oracle.cdf(mu, z)));
    }

    if regime == Regime::NoiseDominance {
        // Quenched spot check: one frozen environment, its own moment.
        let env = SignalEnvironment::pareto(signal, params.label_law.clone(), seed, tag::EXTRA);
        let m = env.moment(ap)?;
        rb.note(format!("quenched environment moment {m}"));
        let q_reps = (reps / 4).max(100);
        let rows = par_reps(seed, tag::EXTRA, q_reps, |_, rng| {
            let m = stream_box_maxima_quenched(&params, &env, n, &boxes, rng)?;
            Ok(m.into_iter().map(|x| x / norm.value).collect::<Vec<f64>>())
        })?;
        for (b, col) in boxes.iter().zip(box_columns(&rows, boxes.len())) {
            let mu = b.measure();
            let d = ks_statistic(&col, |z| frechet_cdf(mu * m, ap, z))?;
            rb.ks_one(&format!("quenched/box={b}/ks"), d, col.len());
        }
    }
    Ok(rb.finish(rayon::current_num_threads()))
}

fn calibrate(rb: &mut ReportBuilder, boxes: &[UnitBox], cols: &[Vec<f64>], oracle: &Oracle) -> Result<()> {
    for (b, col) in boxes.iter().zip(cols) {
        let mu = b.measure();
        let d = ks_statistic(col, |z| oracle.cdf(mu, z))?;
        rb.ks_one(&format!("calibration/limit_sample/box={b}/ks"), d, col.len());
    }
    Ok(())
}

/// Discrete-time model against its Poissonized version with the same normalizer.
pub fn run_poissonization_experiment(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let cfg = check_suite(cfg, Suite::Poissonization)?;
    let params = cfg.model_params()?;
    let n = cfg.n.unwrap_or(100_000);
    let lambda = cfg.lambda.unwrap_or(n as f64);
    let reps = cfg.reps.unwrap_or(2000);
    let boxes = cfg.box_list()?;
    let tol = cfg.tolerances;
    let seed = cfg.seed;
    let mut rb = ReportBuilder::new(cfg.clone());
    rb.note(format!("regime: {}", params.regime()));

    let norm = normalizer_for(&params, n)?;
    rb.normalizer(norm);
    rb.below(
        &format!("normalizer/{}/residual", norm.kind),
        "abs_residual",
        norm.residual.abs(),
        tol.residual,
    );

    // Calibration: two independent Poisson runs at the same intensity must agree.
    rb.calibration(true);
    let poisson = |stream_tag: u64, lam: f64, count: usize| -> Result<Vec<Vec<f64>>> {
        let rows = par_reps(seed, stream_tag, count, |_, rng| {
            let (_, m) = poisson_karlin::stream_box_maxima(&params, lam, &boxes, true, rng)?;
            Ok(m.into_iter().map(|x| x / norm.value).collect::<Vec<f64>>())
        })?;
        Ok(box_columns(&rows, boxes.len()))
    };
    let calib_reps = (reps / 4).max(100);
    let c1 = poisson(tag::CALIBRATION, lambda, calib_reps)?;
    let c2 = poisson(tag::CALIBRATION + 1, lambda, calib_reps)?;
    for (b, (x, y)) in boxes.iter().zip(c1.iter().zip(&c2)) {
        let d = two_sample_ks(x, y)?;
        rb.ks_two(&format!("calibration/poisson_self/box={b}/ks2"), d, x.len(), y.len());
    }
    rb.calibration(false);
    if !rb.calibration_ok() {
        rb.note("calibration failed; model not tested");
        return Ok(rb.finish(rayon::current_num_threads()));
    }

    let rows = par_reps(seed, tag::MODEL, reps, |_, rng| {
        let m = stream_box_maxima(&params, n, &boxes, rng)?;
        Ok(m.into_iter().map(|x| x / norm.value).collect::<Vec<f64>>())
    })?;
    let discrete = box_columns(&rows, boxes.len());
    let poissonized = poisson(tag::POISSON, lambda, reps)?;
    let ks_tol = tol.ks.unwrap_or(0.05);
    for (b, (x, y)) in boxes.iter().zip(discrete.iter().zip(&poissonized)) {
        let d = two_sample_ks(x, y)?;
        rb.ks_fixed(&format!("box={b}/ks2"), d, ks_tol, (x.len() * y.len()) as f64 / (x.len() + y.len()) as f64);
        let mut sorted_y = y.clone();
        sorted_y.sort_by(f64::total_cmp);
        rb.curve(EcdfCurve::from_sample(format!("box{b}"), x, |z| ecdf(&sorted_y, z)));
    }

    if cfg.sandwich.unwrap_or(true) {
        let delta = tol.delta;
        let k = tol.stderr_k;
        let mut gaps = Vec::new();
        for (di, d) in [delta, delta / 2.0].into_iter().enumerate() {
            let t = tag::EXTRA + 4 * di as u64;
            let upper = poisson(t, (1.0 + d) * lambda, reps)?;
            let lower = poisson(t + 1, (1.0 - d) * lambda, reps)?;
            for (j, b) in boxes.iter().enumerate() {
                let mut x = discrete[j].clone();
                x.sort_by(f64::total_cmp);
                let mut up = upper[j].clone();
                up.sort_by(f64::total_cmp);
                let mut lo = lower[j].clone();
                lo.sort_by(f64::total_cmp);
                gaps.push((j, d, two_sample_ks(&up, &lo)?));
                if di > 0 {
                    continue;
                }
                // More points give larger maxima: F_{(1+δ)λ} <= F_n <= F_{(1-δ)λ}.
                let (mut worst_hi, mut worst_lo) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for q in 1..10 {
                    let z = x[(q * (x.len() - 1)) / 10];
                    let (fx, fu, fl) = (ecdf(&x, z), ecdf(&up, z), ecdf(&lo, z));
                    let se = |f: f64, m: usize| f * (1.0 - f) / m as f64;
                    let s_hi = (se(fx, x.len()) + se(fu, up.len())).sqrt().max(1e-12);
                    let s_lo = (se(fx, x.len()) + se(fl, lo.len())).sqrt().max(1e-12);
                    worst_hi = worst_hi.max((fu - fx) / s_hi);
                    worst_lo = worst_lo.max((fx - fl) / s_lo);
                }
                rb.below(
                    &format!("sandwich/delta={}/box={b}/upper_intensity", fmt_param(d)),
                    "max_z_violation",
                    worst_hi,
                    k,
                );
                rb.below(
                    &format!("sandwich/delta={}/box={b}/lower_intensity", fmt_param(d)),
                    "max_z_violation",
                    worst_lo,
                    k,
                );
            }
        }
        for (j, b) in boxes.iter().enumerate() {
            let g: Vec<f64> = gaps.iter().filter(|(jj, _, _)| *jj == j).map(|(_, _, g)| *g).collect();
            // Halving δ must not widen the gap beyond sampling noise.
            let slack = crate::stats::ks_threshold_two(reps, reps, tol.level);
            rb.below(
                &format!("sandwich/box={b}/gap_shrinks"),
                "gap_half_minus_gap",
                g[1] - g[0],
                slack,
            );
        }
    }
    Ok(rb.finish(rayon::current_num_threads()))
}
