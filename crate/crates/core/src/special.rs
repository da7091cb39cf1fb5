//! Special functions: log-gamma ratios and power sums.

pub use statrs::function::gamma::{gamma, ln_gamma};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Tail of the Stirling series for ln Γ(z) beyond `(z-1/2)ln z - z + ln√(2π)`.
fn stirling_tail(z: f64) -> f64 {
    let z2 = z * z;
    let inv = 1.0 / z;
    let inv2 = 1.0 / z2;
    inv * (1.0 / 12.0
        - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))))
}

/// `ln Γ(x + 1 - b) - ln Γ(x + 1)` for `x >= 0`, `0 <= b < 1`, without the
/// cancellation that a direct difference of log-gammas suffers for large `x`.
pub fn ln_gamma_shift(x: f64, b: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    if x < 16.0 {
        return ln_gamma(x + 1.0 - b) - ln_gamma(x + 1.0);
    }
    let z1 = x + 1.0 - b;
    let z2 = x + 1.0;
    (z1 - 0.5) * (-b / z2).ln_1p() - b * z2.ln() + b + stirling_tail(z1) - stirling_tail(z2)
}

#[allow(dead_code)]
pub(crate) fn ln_gamma_stirling(z: f64) -> f64 {
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + stirling_tail(z)
}

const EM_START: u64 = 40;

/// `Σ_{j > k} j^{-s}` for `s > 1`, via direct summation up to a fixed index and
/// an Euler–Maclaurin remainder beyond it.
pub fn power_tail_sum(k: u64, s: f64) -> f64 {
    debug_assert!(s > 1.0);
    if k >= EM_START {
        return euler_maclaurin_tail(k as f64, s);
    }
    let mut acc = 0.0;
    // Small terms first.
    let tail = euler_maclaurin_tail(EM_START as f64, s);
    for j in (k + 1..=EM_START).rev() {
        acc += (j as f64).powf(-s);
    }
    acc + tail
}

/// Riemann zeta for real `s > 1`.
pub fn zeta(s: f64) -> f64 {
    power_tail_sum(0, s)
}

/// `Σ_{j > n} j^{-s}` for real `n >= 1`, asymptotic in `n`.
fn euler_maclaurin_tail(n: f64, s: f64) -> f64 {
    let ns = n.powf(-s);
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    // Derivative products s(s+1)...(s+m).
    let d1 = s;
    let d3 = d1 * (s + 1.0) * (s + 2.0);
    let d5 = d3 * (s + 3.0) * (s + 4.0);
    let d7 = d5 * (s + 5.0) * (s + 6.0);
    let corr = d1 * inv / 12.0 - d3 * inv * inv2 / 720.0 + d5 * inv * inv2 * inv2 / 30_240.0
        - d7 * inv * inv2 * inv2 * inv2 / 1_209_600.0;
    ns * (n / (s - 1.0) - 0.5 + corr)
}
