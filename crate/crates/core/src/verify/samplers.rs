use super::report::{ReportBuilder, VerificationReport};
use super::{check_suite, fmt_param, par_draws, tag, ExperimentConfig, Suite};
use crate::error::Result;
use crate::samplers::{
    ppp_threshold_for_sd, sibuya_sample, stable_ppp_sum, stable_sample, SibuyaParam, StableParam,
};
use crate::stats::{chi_square_gof, mean_stderr, pool_cells, two_sample_ks};

/// Atoms tested individually; larger values share one cell.
pub const SIBUYA_CELLS: u64 = 50;
const PPP_SD: f64 = 1e-3;

/// Chi-square goodness of fit of the Sibuya sampler on its first 50 atoms.
pub fn run_sibuya_experiment(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let cfg = check_suite(cfg, Suite::Sibuya)?;
    let betas = cfg.betas_or(&[0.3, 0.5, 0.8])?;
    let samples = cfg.samples.unwrap_or(1_000_000);
    let mut rb = ReportBuilder::new(cfg.clone());

    rb.calibration(true);
    for &beta in &betas {
        let p = SibuyaParam::new(beta)?;
        // 1 − (1 − z)^β = Σ_k P(Q = k) z^k
        let z = 0.5f64;
        let series: f64 = (1..=200u64).rev().map(|k| p.pmf(k) * z.powi(k as i32)).sum();
        rb.within(
            &format!("calibration/beta={}/generating_function", fmt_param(beta)),
            "abs_diff",
            series,
            1.0 - (1.0 - z).powf(beta),
            1e-12,
        );
        let head: f64 = (1..=SIBUYA_CELLS).rev().map(|k| p.pmf(k)).sum();
        rb.within(
            &format!("calibration/beta={}/total_mass", fmt_param(beta)),
            "abs_diff",
            head + p.survival(SIBUYA_CELLS),
            1.0,
            1e-12,
        );
    }
    rb.calibration(false);
    if !rb.calibration_ok() {
        rb.note("calibration failed; sampler not tested");
        return Ok(rb.finish(rayon::current_num_threads()));
    }

    for (i, &beta) in betas.iter().enumerate() {
        let p = SibuyaParam::new(beta)?;
        let draws = par_draws(cfg.seed, tag::MODEL + 16 * i as u64, samples, |rng| sibuya_sample(&p, rng));
        let mut counts = vec![0u64; SIBUYA_CELLS as usize + 1];
        for k in draws {
            counts[(k.min(SIBUYA_CELLS + 1) - 1) as usize] += 1;
        }
        let mut probs: Vec<f64> = (1..=SIBUYA_CELLS).map(|k| p.pmf(k)).collect();
        probs.push(p.survival(SIBUYA_CELLS));
        let (obs, pr) = pool_cells(&counts, &probs, samples as u64, 5.0);
        let c = chi_square_gof(&obs, &pr)?;
        rb.chi2(&format!("beta={}/chi2", fmt_param(beta)), &c);
    }
    Ok(rb.finish(rayon::current_num_threads()))
}

/// Laplace transform and distribution checks of the positive stable sampler.
pub fn run_stable_experiment(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let cfg = check_suite(cfg, Suite::Stable)?;
    let betas = cfg.betas_or(&[0.3, 0.5, 0.8])?;
    let samples = cfg.samples.unwrap_or(1_000_000);
    let ks_samples = (samples / 10).max(100);
    let calib_samples = (samples / 100).max(1000);
    let s_grid = [0.5, 1.0, 2.0];
    let mut rb = ReportBuilder::new(cfg.clone());

    // The series oracle must reproduce the Laplace transform before it is
    // used as a reference distribution.
    rb.calibration(true);
    for (i, &beta) in betas.iter().enumerate() {
        let p = StableParam::new(beta)?;
        let eps = ppp_threshold_for_sd(&p, PPP_SD);
        let draws = par_draws(cfg.seed, tag::CALIBRATION + 16 * i as u64, calib_samples, |rng| {
            (-stable_ppp_sum(&p, eps, rng)).exp()
        });
        let (m, se) = mean_stderr(&draws)?;
        rb.stderr(
            &format!("calibration/beta={}/ppp_laplace_s=1", fmt_param(beta)),
            "mean_exp",
            m,
            (-1.0f64).exp(),
            se,
        );
    }
    rb.calibration(false);
    if !rb.calibration_ok() {
        rb.note("calibration failed; sampler not tested");
        return Ok(rb.finish(rayon::current_num_threads()));
    }

    for (i, &beta) in betas.iter().enumerate() {
        let p = StableParam::new(beta)?;
        let draws = par_draws(cfg.seed, tag::MODEL + 16 * i as u64, samples, |rng| stable_sample(&p, rng));
        for &s in &s_grid {
            let v: Vec<f64> = draws.iter().map(|x| (-s * x).exp()).collect();
            let (m, se) = mean_stderr(&v)?;
            rb.stderr(
                &format!("beta={}/laplace_s={}", fmt_param(beta), fmt_param(s)),
                "mean_exp",
                m,
                (-s.powf(beta)).exp(),
                se,
            );
        }
        let eps = ppp_threshold_for_sd(&p, PPP_SD);
        let oracle = par_draws(cfg.seed, tag::ORACLE + 16 * i as u64, ks_samples, |rng| {
            stable_ppp_sum(&p, eps, rng)
        });
        let d = two_sample_ks(&draws[..ks_samples.min(draws.len())], &oracle)?;
        rb.ks_two(&format!("beta={}/ks_vs_series", fmt_param(beta)), d, ks_samples.min(draws.len()), oracle.len());
    }
    Ok(rb.finish(rayon::current_num_threads()))
}
