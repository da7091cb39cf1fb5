//! A frozen signal environment `(ε_ℓ)_{ℓ>=1}` attached to the label law.
//!
//! Values are generated on demand from a random-access uniform source, so an
//! environment is a pure function of its seed and never needs to be fully
//! materialized. The labels carrying non-negligible probability are cached.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::IndexedUniforms;
use crate::samplers::{ParetoParam, ZetaLabelLaw};

/// Labels with `p_ℓ` at or above this are cached and enter moments exactly.
pub const PREFIX_FLOOR: f64 = 1e-8;
pub const PREFIX_CAP: u64 = 100_000;

#[derive(Clone, Debug)]
enum Source {
    Constant(f64),
    Pareto {
        law: ParetoParam,
        scale: f64,
        uniforms: IndexedUniforms,
    },
}

#[derive(Clone, Debug)]
pub struct SignalEnvironment {
    labels: Arc<ZetaLabelLaw>,
    source: Source,
    prefix: Vec<f64>,
    /// `Σ_{ℓ > K} p_ℓ` beyond the cached prefix.
    tail_mass: f64,
}

fn prefix_len(labels: &ZetaLabelLaw) -> u64 {
    // p_k >= floor  <=>  k <= (floor ζ)^(-β)
    let k = (PREFIX_FLOOR * labels.zeta_s()).powf(-labels.beta()).floor() as u64;
    let mut k = k.clamp(1, PREFIX_CAP);
    while k > 1 && labels.pmf(k) < PREFIX_FLOOR {
        k -= 1;
    }
    k
}

impl SignalEnvironment {
    /// I.i.d. Pareto values, fixed by `(seed, stream)`.
    pub fn pareto(law: ParetoParam, labels: Arc<ZetaLabelLaw>, seed: u64, stream: u64) -> Self {
        let mut uniforms = IndexedUniforms::new(seed, stream);
        let k = prefix_len(&labels);
        let mut prefix = vec![0.0; k as usize];
        uniforms.fill_from(0, &mut prefix);
        for v in prefix.iter_mut() {
            *v = law.tail_quantile(*v);
        }
        let tail_mass = labels.sf(k);
        Self {
            labels,
            source: Source::Pareto {
                law,
                scale: 1.0,
                uniforms,
            },
            prefix,
            tail_mass,
        }
    }

    /// `ε_ℓ = c` for every label.
    pub fn constant(c: f64, labels: Arc<ZetaLabelLaw>) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Environment(format!("constant environment needs c > 0, got {c}")));
        }
        let k = prefix_len(&labels);
        let tail_mass = labels.sf(k);
        Ok(Self {
            labels,
            source: Source::Constant(c),
            prefix: vec![c; k as usize],
            tail_mass,
        })
    }

    /// The environment `c ε`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Environment(format!("scale must be positive, got {c}")));
        }
        let mut out = self.clone();
        out.source = match &self.source {
            Source::Constant(v) => Source::Constant(v * c),
            Source::Pareto { law, scale, uniforms } => Source::Pareto {
                law: *law,
                scale: scale * c,
                uniforms: uniforms.clone(),
            },
        };
        for v in out.prefix.iter_mut() {
            *v *= c;
        }
        Ok(out)
    }

    pub fn labels(&self) -> &Arc<ZetaLabelLaw> {
        &self.labels
    }

    pub fn prefix_len(&self) -> u64 {
        self.prefix.len() as u64
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `ε_ℓ`.
    pub fn value(&self, label: u64) -> f64 {
        debug_assert!(label >= 1);
        if let Some(&v) = self.prefix.get((label - 1) as usize) {
            return v;
        }
        match &self.source {
            Source::Constant(c) => *c,
            Source::Pareto { law, scale, uniforms } => {
                let mut u = uniforms.clone();
                scale * law.tail_quantile(u.at(label - 1))
            }
        }
    }

    /// Cached values `ε_1..ε_K`.
    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    /// `Σ_{ℓ <= K} p_ℓ ε_ℓ^p` over the cached labels.
    pub fn known_moment(&self, p: f64) -> f64 {
        self.prefix
            .iter()
            .enumerate()
            .rev()
            .map(|(i, e)| self.labels.pmf(i as u64 + 1) * e.powf(p))
            .sum()
    }

    /// `E ε^p` for a value not yet looked at.
    pub fn fresh_moment(&self, p: f64) -> f64 {
        match &self.source {
            Source::Constant(c) => c.powf(p),
            Source::Pareto { law, scale, .. } => scale.powf(p) * law.moment(p),
        }
    }

    /// Plug-in `E_ε ε_Y^p = Σ_ℓ p_ℓ ε_ℓ^p`: exact over the cached labels plus the
    /// expected contribution of the rest.
    pub fn moment(&self, p: f64) -> Result<f64> {
        let fresh = self.fresh_moment(p);
        if !fresh.is_finite() && self.tail_mass > 0.0 {
            return Err(Error::Environment(format!(
                "cannot certify E ε_Y^{p}: the signal's {p}-th moment is infinite"
            )));
        }
        Ok(self.known_moment(p) + self.tail_mass * fresh)
    }

    /// `E (D ε^p - G)_+` for a value not yet looked at.
    pub(crate) fn fresh_excess(&self, p: f64, d: f64, g: f64) -> Result<f64> {
        match &self.source {
            Source::Constant(c) => Ok((d * c.powf(p) - g).max(0.0)),
            Source::Pareto { law, scale, .. } => {
                // ε^p is Pareto with index r = α/p and scale (scale x_min)^p.
                let r = law.alpha / p;
                if r <= 1.0 {
                    return Err(Error::Environment(format!(
                        "truncation certificate needs α > α′ (α = {}, α′ = {p})",
                        law.alpha
                    )));
                }
                let x0 = (scale * law.x_min).powf(p);
                let t = g / d;
                Ok(if t <= x0 {
                    d * (x0 * r / (r - 1.0) - t)
                } else {
                    d * x0.powf(r) * t.powf(1.0 - r) / (r - 1.0)
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Arc<ZetaLabelLaw> {
        Arc::new(ZetaLabelLaw::with_cutoff(0.5, 100_000).unwrap())
    }

    #[test]
    fn values_are_reproducible_past_the_prefix() {
        let law = ParetoParam::standard(3.0).unwrap();
        let a = SignalEnvironment::pareto(law, labels(), 4, 1);
        let b = SignalEnvironment::pareto(law, labels(), 4, 1);
        let k = a.prefix_len();
        assert!(k > 1000);
        for l in [1, 2, k, k + 1, k + 500, 1 << 40] {
            assert_eq!(a.value(l).to_bits(), b.value(l).to_bits());
        }
        // prefix and random access agree
        let mut u = IndexedUniforms::new(4, 1);
        assert_eq!(a.value(7), law.tail_quantile(u.at(6)));
    }

    #[test]
    fn prefix_respects_floor() {
        let e = SignalEnvironment::constant(1.0, labels()).unwrap();
        let k = e.prefix_len();
        assert!(e.labels().pmf(k) >= PREFIX_FLOOR);
        assert!(e.labels().pmf(k + 1) < PREFIX_FLOOR);
        assert!((e.moment(1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_multiplies_values() {
        let law = ParetoParam::standard(3.0).unwrap();
        let a = SignalEnvironment::pareto(law, labels(), 1, 0);
        let b = a.scaled(2.5).unwrap();
        for l in [1, 50, a.prefix_len() + 3] {
            assert!((b.value(l) - 2.5 * a.value(l)).abs() < 1e-12 * b.value(l));
        }
        let ma = a.moment(1.0).unwrap();
        let mb = b.moment(1.0).unwrap();
        assert!((mb - 2.5 * ma).abs() < 1e-12 * mb);
    }

    #[test]
    fn fresh_excess_matches_integral() {
        let law = ParetoParam::standard(3.0).unwrap();
        let e = SignalEnvironment::pareto(law, labels(), 1, 0);
        // ε Pareto(3), p=1: E(Dε - G)_+ = D ∫_{G/D}^∞ x^-3 dx = D (G/D)^-2 / 2 for G/D >= 1
        let (d, g) = (2.0f64, 10.0f64);
        let want = d * (g / d).powi(-2) / 2.0;
        assert!((e.fresh_excess(1.0, d, g).unwrap() - want).abs() < 1e-14);
        // below x_min the excess is D E ε - G
        assert!((e.fresh_excess(1.0, 2.0, 1.0).unwrap() - (2.0 * 1.5 - 1.0)).abs() < 1e-14);
        let heavy = SignalEnvironment::pareto(ParetoParam::standard(0.8).unwrap(), labels(), 1, 0);
        assert!(heavy.fresh_excess(1.0, d, g).is_err());
        assert!(heavy.moment(1.0).is_err());
    }
}
