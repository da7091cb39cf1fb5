//! Zeta label law `p_k = k^(-1/β) / ζ(1/β)`.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::{power_tail_sum, zeta};

pub const DEFAULT_K_MAX: usize = 1_000_000;
const GUIDE_BITS: u32 = 16;

/// Labels past this are not representable one-to-one; see [`ZetaLabelLaw::from_uniform`].
const LABEL_CAP: f64 = 9.223_372_036_854_775_808e18; // 2^63

#[derive(Clone, Debug)]
pub struct ZetaLabelLaw {
    beta: f64,
    s: f64,
    zeta_s: f64,
    /// `sf[k] = P(Y > k)` for `k = 0..=k_max`.
    sf: Vec<f64>,
    /// `guide[j] = min{k : sf[k] < j / G}` for `j = 1..=G`.
    guide: Vec<u32>,
}

impl ZetaLabelLaw {
    pub fn new(beta: f64) -> Result<Self> {
        Self::with_cutoff(beta, DEFAULT_K_MAX)
    }

    pub fn with_cutoff(beta: f64, k_max: usize) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::domain(format!("label law beta must lie in (0,1), got {beta}")));
        }
        if k_max < 2 || k_max > u32::MAX as usize {
            return Err(Error::domain(format!("label law cutoff {k_max} out of range")));
        }
        let s = 1.0 / beta;
        let zeta_s = zeta(s);
        // Built from the tail end so the small survival values keep full relative precision.
        let mut sf = vec![0.0; k_max + 1];
        sf[k_max] = power_tail_sum(k_max as u64, s) / zeta_s;
        for k in (1..=k_max).rev() {
            sf[k - 1] = sf[k] + (k as f64).powf(-s) / zeta_s;
        }
        if (sf[0] - 1.0).abs() > 1e-12 {
            return Err(Error::Internal(format!(
                "zeta table inconsistent: prefix and tail total {} (beta={beta})",
                sf[0]
            )));
        }
        sf[0] = 1.0;

        let g = 1usize << GUIDE_BITS;
        let mut guide = vec![0u32; g + 1];
        let mut k = 0usize;
        for j in (1..=g).rev() {
            let level = j as f64 / g as f64;
            while k < k_max && sf[k] >= level {
                k += 1;
            }
            guide[j] = k as u32;
        }
        Ok(Self {
            beta,
            s,
            zeta_s,
            sf,
            guide,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Exponent `1/β` of the pmf.
    pub fn exponent(&self) -> f64 {
        self.s
    }

    pub fn zeta_s(&self) -> f64 {
        self.zeta_s
    }

    pub fn k_max(&self) -> u64 {
        (self.sf.len() - 1) as u64
    }

    pub fn pmf(&self, k: u64) -> f64 {
        if k == 0 {
            0.0
        } else {
            (k as f64).powf(-self.s) / self.zeta_s
        }
    }

    /// `P(Y > k)`.
    pub fn sf(&self, k: u64) -> f64 {
        match self.sf.get(k as usize) {
            Some(&v) => v,
            None => power_tail_sum(k, self.s) / self.zeta_s,
        }
    }

    /// `1/p_k`.
    pub fn inverse_pmf(&self, k: u64) -> f64 {
        self.zeta_s * (k as f64).powf(self.s)
    }

    /// Occupancy function `ν(x) = max{k : 1/p_k <= x}`, zero when the set is empty.
    pub fn nu(&self, x: f64) -> u64 {
        if !(x >= self.zeta_s) {
            return 0;
        }
        let mut k = (x / self.zeta_s).powf(self.beta).floor().max(1.0) as u64;
        while self.inverse_pmf(k + 1) <= x {
            k += 1;
        }
        while k > 0 && self.inverse_pmf(k) > x {
            k -= 1;
        }
        k
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> u64 {
        self.from_uniform(rng.uniform())
    }

    /// The label `k` with `P(Y > k) < u <= P(Y > k-1)`.
    ///
    /// Past `2^63` a label is replaced by a tag built from the bits of `u`,
    /// which keeps draws distinct; two such draws sharing a true label has
    /// probability far below double precision.
    pub fn from_uniform(&self, u: f64) -> u64 {
        let g = (1usize << GUIDE_BITS) as f64;
        let j = (u * g) as usize;
        let k_max = self.sf.len() - 1;
        let (mut lo, mut hi) = if j >= 1 {
            // sf[guide[j+1]] < (j+1)/G would be a valid lower end; the answer
            // lies in [guide[j+1], guide[j]].
            let lo = if j + 1 < self.guide.len() {
                self.guide[j + 1] as usize
            } else {
                1
            };
            (lo.max(1), self.guide[j] as usize)
        } else {
            (self.guide[1] as usize, k_max)
        };
        if self.sf[hi] >= u {
            debug_assert_eq!(hi, k_max);
            return self.tail_from_uniform(u);
        }
        // Invariant: sf[hi] < u, and either lo == 1 or sf[lo-1] >= u.
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.sf[mid] < u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        hi as u64
    }

    fn tail_from_uniform(&self, u: f64) -> u64 {
        let target = u * self.zeta_s; // want T(k) < target <= T(k-1)
        let s = self.s;
        // Leading-order inverse of T(x) ≈ x^(1-s)/(s-1).
        let x0 = (target * (s - 1.0)).powf(-1.0 / (s - 1.0));
        if !(x0 < LABEL_CAP) {
            return (1u64 << 63) | (u.to_bits() & ((1u64 << 63) - 1));
        }
        let t = |k: f64| power_tail_sum(k as u64, s);
        let k_max = self.k_max() as f64;
        let mut lo = k_max; // T(lo) >= target
        let mut hi = (x0.ceil() + 1.0).max(k_max + 1.0);
        while t(hi) >= target {
            lo = hi;
            hi *= 2.0;
            if hi >= LABEL_CAP {
                return (1u64 << 63) | (u.to_bits() & ((1u64 << 63) - 1));
            }
        }
        // Narrow around the asymptotic guess first when it is a valid lower end.
        let guess = (x0 - 2.0).floor();
        if guess > lo && guess < hi && t(guess) >= target {
            lo = guess;
        }
        let (mut lo, mut hi) = (lo as u64, hi as u64);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if t(mid as f64) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// One label draw.
pub fn zeta_label_sample(law: &ZetaLabelLaw, rng: &mut RngStream) -> u64 {
    law.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn law(beta: f64) -> ZetaLabelLaw {
        ZetaLabelLaw::with_cutoff(beta, 20_000).unwrap()
    }

    #[test]
    fn pmf_examples() {
        let l = law(0.5);
        assert!((l.pmf(1) - 6.0 / (PI * PI)).abs() < 1e-14);
        assert!((l.pmf(2) - 0.25 * 6.0 / (PI * PI)).abs() < 1e-14);
    }

    #[test]
    fn nu_examples() {
        let l = law(0.5);
        assert_eq!(l.nu(1000.0), 24);
        // enumerate 1/p_k directly
        let direct = (1..100u64).filter(|&k| PI * PI / 6.0 * (k * k) as f64 <= 1000.0).count();
        assert_eq!(direct, 24);
        assert_eq!(l.nu(1.0), 0);
        assert_eq!(l.nu(1.6), 0);
        assert_eq!(l.nu(1.7), 1);
        let mut prev = 0;
        for i in 1..5000 {
            let v = l.nu(i as f64 * 3.7);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn inversion_is_exact_on_table() {
        let l = law(0.6);
        let mut rng = RngStream::new(5, 0);
        for _ in 0..20_000 {
            let u = rng.uniform();
            let k = l.from_uniform(u);
            assert!(k >= 1);
            assert!(l.sf(k) < u, "u={u} k={k}");
            assert!(l.sf(k - 1) >= u, "u={u} k={k}");
        }
    }

    #[test]
    fn inversion_is_exact_in_tail() {
        for &beta in &[0.3, 0.5, 0.8] {
            let l = law(beta);
            let edge = l.sf(l.k_max());
            for &f in &[0.9, 0.5, 1e-2, 1e-4] {
                let u = edge * f;
                let k = l.from_uniform(u);
                assert!(k > l.k_max());
                if k < 1 << 52 {
                    assert!(l.sf(k) < u && l.sf(k - 1) >= u, "beta={beta} f={f} k={k}");
                }
            }
        }
    }

    #[test]
    fn guide_boundaries() {
        let l = law(0.5);
        for j in [1usize, 2, 100, 65_535, 65_536] {
            let u = j as f64 / 65_536.0;
            for v in [u, u * (1.0 - 1e-15), u * (1.0 + 1e-15)] {
                if v < 1.0 {
                    let k = l.from_uniform(v);
                    assert!(l.sf(k) < v && l.sf(k - 1) >= v);
                }
            }
        }
    }

    #[test]
    fn huge_labels_get_distinct_tags() {
        let l = law(0.95);
        let a = l.from_uniform(1e-300);
        let b = l.from_uniform(2e-300);
        assert!(a >= 1 << 63 && b >= 1 << 63 && a != b);
    }

    #[test]
    fn rejects_bad_beta() {
        assert!(ZetaLabelLaw::new(1.0).is_err());
        assert!(ZetaLabelLaw::new(0.0).is_err());
    }
}
