//! Positive (totally skewed) β-stable law with `E exp(-s S) = exp(-s^β)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::ln_gamma;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StableParam {
    beta: f64,
}

impl StableParam {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::domain(format!("stable beta must lie in (0,1), got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Kanter's representation: with `U` uniform on (0,1) and `E` unit exponential,
/// `S = (A(U)/E)^((1-β)/β)` where
/// `A(u) = [sin(βπu)^β sin((1-β)πu)^(1-β) / sin(πu)]^(1/(1-β))`.
pub fn stable_sample(param: &StableParam, rng: &mut RngStream) -> f64 {
    let u = rng.uniform();
    let e = rng.exp1();
    stable_from_parts(param.beta, u, e)
}

pub(crate) fn stable_from_parts(beta: f64, u: f64, e: f64) -> f64 {
    let b1 = 1.0 - beta;
    // sin(πu) = sin(π(1-u)); use the closer end for accuracy.
    let sin_pi_u = if u < 0.5 { (PI * u).sin() } else { (PI * (1.0 - u)).sin() };
    let ln_a = (beta * (beta * PI * u).sin().ln() + b1 * (b1 * PI * u).sin().ln() - sin_pi_u.ln()) / b1;
    (b1 / beta * (ln_a - e.ln())).exp()
}

/// Truncated series for `S_β` as the sum of jumps of a standard β-stable
/// subordinator at time one. Jumps above `eps` are `(Γ_ℓ Γ(1-β))^(-1/β)`;
/// the jumps below `eps` are replaced by their mean
/// `β eps^(1-β) / ((1-β) Γ(1-β))`.
///
/// Used as an independent check of [`stable_sample`], not for production draws.
pub fn stable_ppp_sum(param: &StableParam, eps: f64, rng: &mut RngStream) -> f64 {
    let beta = param.beta;
    let g = ln_gamma(1.0 - beta).exp();
    let stop = eps.powf(-beta) / g; // Γ_ℓ beyond this gives a jump below eps
    let mut gam = rng.exp1();
    let mut sum = 0.0;
    while gam <= stop {
        sum += (gam * g).powf(-1.0 / beta);
        gam += rng.exp1();
    }
    sum + beta * eps.powf(1.0 - beta) / ((1.0 - beta) * g)
}

/// Jump threshold for which the omitted small-jump fluctuation has standard
/// deviation `sd`.
pub fn ppp_threshold_for_sd(param: &StableParam, sd: f64) -> f64 {
    let beta = param.beta;
    let g = ln_gamma(1.0 - beta).exp();
    // variance of small jumps = β eps^(2-β) / ((2-β) Γ(1-β))
    (sd * sd * (2.0 - beta) * g / beta).powf(1.0 / (2.0 - beta))
}
