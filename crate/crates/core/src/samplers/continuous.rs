use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Pareto law with tail `P(X > x) = (x / x_min)^(-alpha)` on `[x_min, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoParam {
    pub alpha: f64,
    #[serde(default = "one")]
    pub x_min: f64,
}

fn one() -> f64 {
    1.0
}

impl ParetoParam {
    pub fn new(alpha: f64, x_min: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("pareto alpha must be positive, got {alpha}")));
        }
        if !(x_min > 0.0 && x_min.is_finite()) {
            return Err(Error::domain(format!("pareto x_min must be positive, got {x_min}")));
        }
        Ok(Self { alpha, x_min })
    }

    pub fn standard(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0)
    }

    #[inline]
    pub fn survival(&self, x: f64) -> f64 {
        if x <= self.x_min {
            1.0
        } else {
            (x / self.x_min).powf(-self.alpha)
        }
    }

    /// Upper-tail quantile: the `x` with `P(X > x) = v`.
    #[inline]
    pub fn tail_quantile(&self, v: f64) -> f64 {
        self.x_min * inv_root(v, self.alpha)
    }

    /// `E X^p`, infinite when `p >= alpha`.
    pub fn moment(&self, p: f64) -> f64 {
        if p >= self.alpha {
            f64::INFINITY
        } else {
            self.x_min.powf(p) * self.alpha / (self.alpha - p)
        }
    }
}

/// `v^(-1/alpha)` with the common exponents special-cased.
#[inline]
fn inv_root(v: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        1.0 / v
    } else if alpha == 2.0 {
        1.0 / v.sqrt()
    } else if alpha == 0.5 {
        1.0 / (v * v)
    } else {
        v.powf(-1.0 / alpha)
    }
}

/// User-supplied continuous law on `(0, ∞)`.
pub trait TailDistribution: Send + Sync {
    fn name(&self) -> &str;
    /// `P(X > x)`.
    fn survival(&self, x: f64) -> f64;
    /// Inverse CDF on (0,1).
    fn quantile(&self, u: f64) -> f64;
}

/// Marginal law of the signal or noise variables.
#[derive(Clone)]
pub enum TailLaw {
    Pareto(ParetoParam),
    Custom(Arc<dyn TailDistribution>),
}

impl fmt::Debug for TailLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailLaw::Pareto(p) => f.debug_tuple("Pareto").field(p).finish(),
            TailLaw::Custom(c) => f.debug_tuple("Custom").field(&c.name()).finish(),
        }
    }
}

impl TailLaw {
    #[inline]
    pub fn survival(&self, x: f64) -> f64 {
        match self {
            TailLaw::Pareto(p) => p.survival(x),
            TailLaw::Custom(c) => c.survival(x),
        }
    }

    /// Draws from the law by inversion of one open uniform.
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.from_uniform(rng.uniform())
    }

    #[inline]
    pub fn from_uniform(&self, u: f64) -> f64 {
        match self {
            // 1 - U and U have the same law; use U directly as the tail mass.
            TailLaw::Pareto(p) => p.tail_quantile(u),
            TailLaw::Custom(c) => c.quantile(u),
        }
    }

    pub fn as_pareto(&self) -> Option<&ParetoParam> {
        match self {
            TailLaw::Pareto(p) => Some(p),
            TailLaw::Custom(_) => None,
        }
    }

    /// Lower end of the support, where `survival` starts dropping below one.
    pub fn lower_bound(&self) -> f64 {
        match self {
            TailLaw::Pareto(p) => p.x_min,
            TailLaw::Custom(c) => {
                // Smallest value the quantile produces, approximately.
                c.quantile(f64::EPSILON).max(f64::MIN_POSITIVE)
            }
        }
    }
}

pub fn pareto_sample(param: &ParetoParam, rng: &mut RngStream) -> f64 {
    pareto_from_uniform(param, rng.uniform())
}

/// `x_min · u^(-1/alpha)`.
pub fn pareto_from_uniform(param: &ParetoParam, u: f64) -> f64 {
    param.tail_quantile(u)
}

fn check_frechet(alpha: f64, scale: f64) -> Result<()> {
    if !(alpha > 0.0) || !(scale > 0.0) {
        return Err(Error::domain(format!(
            "frechet parameters must be positive (alpha={alpha}, scale={scale})"
        )));
    }
    Ok(())
}

/// Draws `X` with `P(X <= z) = exp(-scale · z^(-alpha))`.
pub fn frechet_sample(alpha: f64, scale: f64, rng: &mut RngStream) -> Result<f64> {
    frechet_from_uniform(alpha, scale, rng.uniform())
}

pub fn frechet_from_uniform(alpha: f64, scale: f64, u: f64) -> Result<f64> {
    check_frechet(alpha, scale)?;
    Ok((scale / -u.ln()).powf(1.0 / alpha))
}

/// First `count` arrival times of a unit-rate Poisson process.
pub fn poisson_arrivals(count: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::domain("poisson_arrivals needs count >= 1"));
    }
    let mut t = 0.0;
    Ok((0..count)
        .map(|_| {
            t += rng.exp1();
            t
        })
        .collect())
}
