//! Sibuya law: `P(Q = k) = β Γ(k-β) / (Γ(1-β) Γ(k+1))`, `k >= 1`,
//! with generating function `1 - (1-z)^β`.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::{ln_gamma, ln_gamma_shift};

/// Number of sequential survival factors tried before switching to tail inversion.
pub const SEQUENTIAL_LIMIT: u64 = 10_000;

/// Beyond this, the discrete correction on a tail inversion is below f64 resolution.
const INTEGER_RESOLUTION: f64 = 9.0e15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SibuyaParam {
    beta: f64,
    ln_gamma_1mb: f64,
}

impl SibuyaParam {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::domain(format!("sibuya beta must lie in (0,1), got {beta}")));
        }
        Ok(Self {
            beta,
            ln_gamma_1mb: ln_gamma(1.0 - beta),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `ln P(Q > k)`.
    pub fn ln_survival(&self, k: u64) -> f64 {
        ln_gamma_shift(k as f64, self.beta) - self.ln_gamma_1mb
    }

    pub fn survival(&self, k: u64) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.ln_survival(k).exp()
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        // β Γ(k-β)/(Γ(1-β) Γ(k+1)) = β/(k Γ(1-β)) · Γ(k-β)/Γ(k)
        let kf = k as f64;
        (self.beta.ln() - self.ln_gamma_1mb + ln_gamma_shift(kf - 1.0, self.beta) - kf.ln()).exp()
    }
}

/// Sibuya probability mass, evaluated in log space.
pub fn sibuya_pmf(beta: f64, k: u64) -> Result<f64> {
    if k < 1 {
        return Err(Error::domain("sibuya support starts at k = 1"));
    }
    Ok(SibuyaParam::new(beta)?.pmf(k))
}

/// One Sibuya draw.
///
/// A single uniform `U` is compared against the running survival
/// `P(Q > k) = Π_{j<=k} (1 - β/j)`; the first `k` with `P(Q > k) <= U` is
/// returned. Past [`SEQUENTIAL_LIMIT`] the same inequality is solved by
/// bisection on the closed-form survival.
pub fn sibuya_sample(param: &SibuyaParam, rng: &mut RngStream) -> u64 {
    sibuya_from_uniform(param, rng.uniform())
}

pub fn sibuya_from_uniform(param: &SibuyaParam, u: f64) -> u64 {
    let beta = param.beta;
    let mut surv = 1.0;
    for k in 1..=SEQUENTIAL_LIMIT {
        surv *= 1.0 - beta / k as f64;
        if surv <= u {
            return k;
        }
    }
    tail_inversion(param, u)
}

fn tail_inversion(param: &SibuyaParam, u: f64) -> u64 {
    let target = u.ln();
    let beta = param.beta;
    // P(Q > k) ≈ k^{-β}/Γ(1-β)
    let guess = (-(target + param.ln_gamma_1mb) / beta).exp();
    if !(guess < INTEGER_RESOLUTION) {
        return if guess.is_finite() {
            guess.round() as u64
        } else {
            u64::MAX
        };
    }
    let mut lo = SEQUENTIAL_LIMIT; // ln_survival(lo) > target
    let mut hi = (guess as u64).max(lo + 1);
    while param.ln_survival(hi) > target {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi as f64 >= INTEGER_RESOLUTION {
            return hi;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if param.ln_survival(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_examples() {
        assert!((sibuya_pmf(0.5, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((sibuya_pmf(0.5, 2).unwrap() - 0.125).abs() < 1e-15);
        assert!((sibuya_pmf(0.5, 3).unwrap() - 0.0625).abs() < 1e-15);
        assert!((sibuya_pmf(1.0 - 1e-12, 1).unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn pmf_domain_errors() {
        assert!(sibuya_pmf(0.0, 1).is_err());
        assert!(sibuya_pmf(1.0, 1).is_err());
        assert!(sibuya_pmf(0.5, 0).is_err());
        assert!(SibuyaParam::new(f64::NAN).is_err());
    }

    #[test]
    fn pmf_ratio_recursion() {
        for b in 1..10 {
            let p = SibuyaParam::new(b as f64 / 10.0).unwrap();
            for k in [2u64, 3, 10, 15, 16, 17, 100, 9_999, 10_000, 99_999] {
                let ratio = p.pmf(k + 1) / p.pmf(k);
                let want = (k as f64 - p.beta()) / (k as f64 + 1.0);
                assert!(((ratio - want) / want).abs() < 1e-12, "beta={} k={k}", p.beta());
            }
        }
    }

    #[test]
    fn pmf_sums_close_to_one() {
        for b in 1..10 {
            let p = SibuyaParam::new(b as f64 / 10.0).unwrap();
            let kmax = 100_000u64;
            let total: f64 = (1..=kmax).rev().map(|k| p.pmf(k)).sum();
            // the survival at kmax is what is missing
            let gap = total + p.survival(kmax) - 1.0;
            assert!(gap.abs() < 1e-12, "beta={} gap={gap}", p.beta());
            assert!(total <= 1.0 + 1e-15);
            // Missing mass is exactly (k-β) pmf(k) / β, so the cruder floor
            // 1 - 2k pmf(k) only holds for β > 1/2.
            let k = kmax as f64;
            let missing = (k - p.beta()) * p.pmf(kmax) / p.beta();
            assert!(((1.0 - total) - missing).abs() < 1e-12);
            if p.beta() > 0.5 {
                assert!(total > 1.0 - 2.0 * k * p.pmf(kmax), "beta={}", p.beta());
            }
        }
    }

    #[test]
    fn survival_consistent_with_product() {
        let p = SibuyaParam::new(0.37).unwrap();
        let mut surv = 1.0;
        for k in 1..=200u64 {
            surv *= 1.0 - 0.37 / k as f64;
            assert!(((p.survival(k) - surv) / surv).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_inversion_boundary_is_exact() {
        let p = SibuyaParam::new(0.5).unwrap();
        for &u in &[1e-3, 1e-4, 3.3e-5, 1e-7] {
            let k = sibuya_from_uniform(&p, u);
            assert!(k > SEQUENTIAL_LIMIT);
            assert!(p.survival(k) <= u);
            assert!(p.survival(k - 1) > u);
        }
    }

    #[test]
    fn sequential_and_tail_agree_on_threshold() {
        // U just below the survival at SEQUENTIAL_LIMIT lands just past it.
        let p = SibuyaParam::new(0.6).unwrap();
        let s = p.survival(SEQUENTIAL_LIMIT);
        assert_eq!(sibuya_from_uniform(&p, s * 1.000_000_1), SEQUENTIAL_LIMIT);
        assert_eq!(sibuya_from_uniform(&p, s * 0.999_999), SEQUENTIAL_LIMIT + 1);
    }

    #[test]
    fn draws_are_positive() {
        let p = SibuyaParam::new(0.2).unwrap();
        let mut rng = RngStream::new(11, 0);
        assert!((0..10_000).all(|_| sibuya_sample(&p, &mut rng) >= 1));
    }
}
