//! Closed-form limit laws, moments, tails and normalizing sequences.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::{ParetoParam, TailLaw, ZetaLabelLaw};
use crate::special::gamma;

/// Relative tolerance for the floating-point critical test.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    NoiseDominance,
    SignalDominance,
    Critical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::NoiseDominance => "noise",
            Regime::SignalDominance => "signal",
            Regime::Critical => "critical",
        })
    }
}

/// Noise dominance iff `α > α′β`, signal dominance iff `α < α′β`, critical on equality
/// (up to [`CRITICAL_TOL`] relative to `max(1, α)`).
pub fn regime_classify(alpha: f64, alpha_prime: f64, beta: f64) -> Regime {
    let d = alpha - alpha_prime * beta;
    if d.abs() <= CRITICAL_TOL * alpha.abs().max(1.0) {
        Regime::Critical
    } else if d > 0.0 {
        Regime::NoiseDominance
    } else {
        Regime::SignalDominance
    }
}

/// Exact version of [`regime_classify`].
pub fn regime_classify_exact(alpha: Rational, alpha_prime: Rational, beta: Rational) -> Regime {
    match alpha.cmp(&alpha_prime.mul(beta)) {
        Ordering::Greater => Regime::NoiseDominance,
        Ordering::Less => Regime::SignalDominance,
        Ordering::Equal => Regime::Critical,
    }
}

/// Reduced fraction with positive denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i128,
    den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Rational {
    pub fn new(num: i128, den: i128) -> Result<Self> {
        if den == 0 {
            return Err(Error::domain("zero denominator"));
        }
        let g = gcd(num, den).max(1);
        let sign = if den < 0 { -1 } else { 1 };
        Ok(Self {
            num: sign * num / g,
            den: sign * den / g,
        })
    }

    pub fn numer(&self) -> i128 {
        self.num
    }

    pub fn denom(&self) -> i128 {
        self.den
    }

    pub fn mul(self, o: Self) -> Self {
        // Cross-reduce first to keep the products small.
        let g1 = gcd(self.num, o.den).max(1);
        let g2 = gcd(o.num, self.den).max(1);
        Self {
            num: (self.num / g1) * (o.num / g2),
            den: (self.den / g2) * (o.den / g1),
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Rational {
    type Err = Error;

    /// Accepts `p/q`, integers and plain decimals such as `0.25`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("not a rational number: {s:?}"));
        if let Some((p, q)) = s.split_once('/') {
            let p: i128 = p.trim().parse().map_err(|_| bad())?;
            let q: i128 = q.trim().parse().map_err(|_| bad())?;
            return Rational::new(p, q).map_err(|_| bad());
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if (int.is_empty() && frac.is_empty())
            || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
            || frac.len() > 30
        {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let num: i128 = digits.parse().map_err(|_| bad())?;
        let den = 10i128.pow(frac.len() as u32);
        Rational::new(if neg { -num } else { num }, den)
    }
}

/// A parameter given either as a JSON number or as an exact string (`"1/2"`, `"0.5"`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Exact(String),
}

impl ParamValue {
    pub fn to_f64(&self) -> Result<f64> {
        match self {
            ParamValue::Number(x) => Ok(*x),
            ParamValue::Exact(s) => Ok(s.parse::<Rational>()?.to_f64()),
        }
    }

    pub fn to_rational(&self) -> Option<Rational> {
        match self {
            ParamValue::Number(_) => None,
            ParamValue::Exact(s) => s.parse().ok(),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(x: f64) -> Self {
        ParamValue::Number(x)
    }
}

/// `exp(-θ z^(-α))`; equals 1 when `θ = 0`.
pub fn frechet_cdf(theta: f64, alpha: f64, z: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    if z <= 0.0 {
        return 0.0;
    }
    (-theta * z.powf(-alpha)).exp()
}

/// Multivariate logistic law `exp(-(Σ μ_i x_i^(-α′))^β)`.
pub fn logistic_fdd_cdf(mus: &[f64], xs: &[f64], alpha_prime: f64, beta: f64) -> Result<f64> {
    if mus.len() != xs.len() {
        return Err(Error::LengthMismatch(format!(
            "{} measures but {} thresholds",
            mus.len(),
            xs.len()
        )));
    }
    if xs.iter().any(|&x| x <= 0.0) {
        return Ok(0.0);
    }
    let s: f64 = mus.iter().zip(xs).map(|(m, x)| m * x.powf(-alpha_prime)).sum();
    Ok((-s.powf(beta)).exp())
}

/// `P(Z̃ > x) = min(1, F̄_Z(x))^β`, the tail of the largest of Sibuya-many copies of `Z`.
pub fn ztilde_tail(noise: &ParetoParam, beta: f64, x: f64) -> f64 {
    noise.survival(x).min(1.0).powf(beta)
}

/// `E Z̃^α` for Pareto noise: `x_min^α (1 + α/(α′β − α))`.
pub fn ztilde_alpha_moment(noise: &ParetoParam, beta: f64, alpha: f64) -> Result<f64> {
    let ab = noise.alpha * beta;
    if ab <= alpha {
        return Err(Error::param(format!(
            "E Z̃^α diverges: α′β = {ab} <= α = {alpha}"
        )));
    }
    Ok(noise.x_min.powf(alpha) * (1.0 + alpha / (ab - alpha)))
}

/// `P(ε Z̃ > x) = x^(-α)(1 + α ln x)` for independent standard Pareto(α) factors.
pub fn product_tail(alpha: f64, x: f64) -> Result<f64> {
    if !(x >= 1.0) {
        return Err(Error::domain(format!("product tail needs x >= 1, got {x}")));
    }
    Ok(x.powf(-alpha) * (1.0 + alpha * x.ln()))
}

/// `P(ε W > x)` for independent `ε ~ signal` and `W` with tail `w_tail`,
/// by quadrature of `∫_0^1 F̄_W(x / ε(v)) dv` where `ε(v)` has tail mass `v`.
pub fn product_tail_quadrature(signal: &TailLaw, w_tail: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    // v = e^{-t}: ∫_0^∞ F̄_W(x/ε(e^{-t})) e^{-t} dt. The part beyond T is at
    // most e^{-T}, so T grows with the size of the answer.
    let f = |t: f64| {
        let eps = signal.from_uniform((-t).exp());
        w_tail(x / eps) * (-t).exp()
    };
    // Unit panels: a kink of F̄_W (at ε = x for Pareto W) can fool the Simpson
    // error estimate on a wide interval.
    let panels = |end: f64, tol: f64, depth: u32| -> f64 {
        let count = end.ceil() as usize;
        (0..count)
            .map(|k| adaptive_simpson(&f, k as f64, (k as f64 + 1.0).min(end), tol / count as f64, depth))
            .sum()
    };
    let rough = panels(40.0, 1e-10, 30);
    let end = (30.0 - rough.max(1e-290).ln()).clamp(40.0, 700.0);
    panels(end, (rough * 1e-13).max(1e-300), 50)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalizerKind {
    /// `Γ(1-β) ν(n) F̄_ε(a_n) = 1`.
    #[serde(rename = "a_n")]
    A,
    /// `Γ(1-β) ν(n) F̄_{εZ̃}(b_n) = 1`.
    #[serde(rename = "b_n")]
    B,
    /// `n F̄_Z(c_n) = 1`.
    #[serde(rename = "c_n")]
    C,
}

impl NormalizerKind {
    /// The sequence that scales the maxima in a given regime.
    pub fn for_regime(r: Regime) -> Self {
        match r {
            Regime::SignalDominance => NormalizerKind::A,
            Regime::Critical => NormalizerKind::B,
            Regime::NoiseDominance => NormalizerKind::C,
        }
    }
}

impl fmt::Display for NormalizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizerKind::A => "a_n",
            NormalizerKind::B => "b_n",
            NormalizerKind::C => "c_n",
        })
    }
}

/// Laws entering the defining equations.
#[derive(Clone, Debug)]
pub struct NormalizerContext<'a> {
    pub signal: &'a TailLaw,
    pub noise: &'a TailLaw,
    pub labels: &'a ZetaLabelLaw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub kind: NormalizerKind,
    pub n: u64,
    pub value: f64,
    /// Left side minus right side of the defining equation at `value`.
    pub residual: f64,
}

/// Root of the defining equation of `kind`, by bisection on `[x_min, X_hi]`
/// with `X_hi` doubled until the root is bracketed.
pub fn solve_normalizer(kind: NormalizerKind, n: u64, ctx: &NormalizerContext<'_>) -> Result<Normalizer> {
    if n == 0 {
        return Err(Error::domain("normalizer needs n >= 1"));
    }
    let beta = ctx.labels.beta();
    let occupancy = gamma(1.0 - beta) * ctx.labels.nu(n as f64) as f64;
    let lhs: Box<dyn Fn(f64) -> f64 + '_> = match kind {
        NormalizerKind::A => Box::new(move |x| occupancy * ctx.signal.survival(x)),
        NormalizerKind::C => {
            let nf = n as f64;
            Box::new(move |x| nf * ctx.noise.survival(x))
        }
        NormalizerKind::B => {
            let closed = match (ctx.signal.as_pareto(), ctx.noise.as_pareto()) {
                (Some(s), Some(z))
                    if s.x_min == 1.0
                        && z.x_min == 1.0
                        && regime_classify(s.alpha, z.alpha, beta) == Regime::Critical =>
                {
                    Some(s.alpha)
                }
                _ => None,
            };
            match closed {
                Some(alpha) => Box::new(move |x: f64| {
                    occupancy * if x <= 1.0 { 1.0 } else { x.powf(-alpha) * (1.0 + alpha * x.ln()) }
                }),
                None => {
                    let noise = ctx.noise.clone();
                    let w_tail = move |w: f64| noise.survival(w).min(1.0).powf(beta);
                    Box::new(move |x| occupancy * product_tail_quadrature(ctx.signal, &w_tail, x))
                }
            }
        }
    };
    let lo0 = match kind {
        NormalizerKind::A => ctx.signal.lower_bound(),
        NormalizerKind::C => ctx.noise.lower_bound(),
        NormalizerKind::B => ctx.signal.lower_bound() * ctx.noise.lower_bound(),
    };
    let value = bisect_decreasing(&*lhs, lo0, kind)?;
    Ok(Normalizer {
        kind,
        n,
        value,
        residual: lhs(value) - 1.0,
    })
}

/// Finds `x >= lo` with `g(x) = 1` for decreasing `g`.
fn bisect_decreasing(g: &dyn Fn(f64) -> f64, lo: f64, kind: NormalizerKind) -> Result<f64> {
    if !(g(lo) >= 1.0) {
        return Err(Error::Bracketing(format!(
            "{kind}: defining function is {} < 1 at the lower end {lo}; no root",
            g(lo)
        )));
    }
    let mut lo = lo;
    let mut hi = lo.max(1.0) * 2.0;
    while g(hi) >= 1.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Bracketing(format!("{kind}: no upper bracket found")));
        }
    }
    // g(lo) >= 1 > g(hi)
    loop {
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { lo + 0.5 * (hi - lo) };
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if (g(lo) - 1.0).abs() <= (g(hi) - 1.0).abs() { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ln_gamma;
    use std::f64::consts::E;

    fn pareto(a: f64) -> TailLaw {
        TailLaw::Pareto(ParetoParam::standard(a).unwrap())
    }

    #[test]
    fn regime_examples() {
        assert_eq!(regime_classify(3.0, 1.0, 0.5), Regime::NoiseDominance);
        assert_eq!(regime_classify(0.5, 2.0, 0.5), Regime::SignalDominance);
        assert_eq!(regime_classify(1.0, 2.0, 0.5), Regime::Critical);
        // 0.1 * 3 is not exactly 0.3 in binary; the tolerance absorbs it.
        assert_eq!(regime_classify(0.3, 3.0, 0.1), Regime::Critical);
        let r = |s: &str| s.parse::<Rational>().unwrap();
        assert_eq!(regime_classify_exact(r("3/10"), r("3"), r("0.1")), Regime::Critical);
        assert_eq!(
            regime_classify_exact(r("3/10"), r("3"), r("100000000000001/1000000000000000")),
            Regime::SignalDominance
        );
    }

    #[test]
    fn rational_parsing() {
        let r: Rational = "0.25".parse().unwrap();
        assert_eq!((r.numer(), r.denom()), (1, 4));
        let r: Rational = "-6/4".parse().unwrap();
        assert_eq!((r.numer(), r.denom()), (-3, 2));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("abc".parse::<Rational>().is_err());
        assert!(".".parse::<Rational>().is_err());
    }

    #[test]
    fn frechet_and_logistic() {
        assert!((frechet_cdf(1.0, 1.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(frechet_cdf(0.0, 2.0, 0.3), 1.0);
        for &z in &[0.3, 1.0, 4.0] {
            let a = frechet_cdf(1.0, 1.0, z);
            let b = logistic_fdd_cdf(&[1.0], &[z], 2.0, 0.5).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
        let p = logistic_fdd_cdf(&[0.5, 0.5], &[1.0, 2.0], 2.0, 1.0).unwrap();
        let q = frechet_cdf(0.5, 2.0, 1.0) * frechet_cdf(0.5, 2.0, 2.0);
        assert!((p - q).abs() < 1e-15);
        assert!(logistic_fdd_cdf(&[1.0], &[1.0, 2.0], 2.0, 0.5).is_err());
        assert!(logistic_fdd_cdf(&[0.5, 0.5], &[1e300, 1e300], 2.0, 0.5).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn ztilde_examples() {
        let z = ParetoParam::standard(2.0).unwrap();
        assert!((ztilde_tail(&z, 0.5, 4.0) - 0.25).abs() < 1e-15);
        assert_eq!(ztilde_tail(&z, 0.5, 0.5), 1.0);
        assert!((ztilde_alpha_moment(&z, 0.5, 0.5).unwrap() - 2.0).abs() < 1e-15);
        let z4 = ParetoParam::standard(4.0).unwrap();
        assert!((ztilde_alpha_moment(&z4, 0.5, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(ztilde_alpha_moment(&z, 0.5, 1.0).is_err());
    }

    #[test]
    fn ztilde_moment_matches_integral() {
        // E W^α = 1 + ∫_1^∞ α x^(α-1) P(W > x) dx, evaluated by substitution x = e^t.
        let z = ParetoParam::standard(2.0).unwrap();
        for &(beta, alpha) in &[(0.5, 0.5), (0.8, 1.0), (0.3, 0.2)] {
            let f = |t: f64| alpha * (alpha * t).exp() * ztilde_tail(&z, beta, t.exp());
            let integral = adaptive_simpson(&f, 0.0, 400.0, 1e-12, 50);
            let want = ztilde_alpha_moment(&z, beta, alpha).unwrap();
            assert!(((1.0 + integral) - want).abs() < 1e-8, "beta={beta} alpha={alpha}");
        }
    }

    #[test]
    fn product_tail_examples() {
        assert!((product_tail(1.0, E).unwrap() - 2.0 / E).abs() < 1e-15);
        assert_eq!(product_tail(1.0, 1.0).unwrap(), 1.0);
        assert!((product_tail(1.0, 100.0).unwrap() - 0.01 * (1.0 + 100f64.ln())).abs() < 1e-15);
        assert!(product_tail(1.0, 0.5).is_err());
    }

    #[test]
    fn product_tail_quadrature_matches_closed_form() {
        for &alpha in &[0.5, 1.0, 2.0] {
            let signal = pareto(alpha);
            let w = move |x: f64| if x <= 1.0 { 1.0 } else { x.powf(-alpha) };
            for &x in &[1.5, E, 10.0, 1e4] {
                let q = product_tail_quadrature(&signal, &w, x);
                let c = product_tail(alpha, x).unwrap();
                assert!(((q - c) / c).abs() < 1e-9, "alpha={alpha} x={x} q={q} c={c}");
            }
        }
    }

    #[test]
    fn normalizers_small_grid() {
        let labels = ZetaLabelLaw::with_cutoff(0.5, 1000).unwrap();
        let (s, z) = (pareto(1.0), pareto(2.0));
        let ctx = NormalizerContext {
            signal: &s,
            noise: &z,
            labels: &labels,
        };
        for n in [100u64, 10_000, 1_000_000_000] {
            let c = solve_normalizer(NormalizerKind::C, n, &ctx).unwrap();
            assert!(c.residual.abs() < 1e-10);
            assert!(((c.value - (n as f64).sqrt()) / c.value).abs() < 1e-14);
            let a = solve_normalizer(NormalizerKind::A, n, &ctx).unwrap();
            let want = ln_gamma(0.5).exp() * labels.nu(n as f64) as f64;
            assert!(((a.value - want) / want).abs() < 1e-13);
            let b = solve_normalizer(NormalizerKind::B, n, &ctx).unwrap();
            assert!(b.residual.abs() < 1e-10 && b.value > a.value);
        }
    }

    #[test]
    fn normalizer_without_root_is_bracketing_error() {
        let labels = ZetaLabelLaw::with_cutoff(0.5, 1000).unwrap();
        let (s, z) = (pareto(1.0), pareto(2.0));
        let ctx = NormalizerContext {
            signal: &s,
            noise: &z,
            labels: &labels,
        };
        // ν(1) = 0.
        assert!(matches!(
            solve_normalizer(NormalizerKind::A, 1, &ctx),
            Err(Error::Bracketing(_))
        ));
    }
}
