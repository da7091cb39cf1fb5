//! Truncated series representations of the limiting random sup-measures.
//!
//! Every realization is a finite list of atoms `(weight, locations)` sorted by
//! weight, largest first. Its value on a box is the weight of the first atom
//! with a location in the box. Omitted atoms can only matter on a box of
//! measure at least `m_min` with probability at most `truncation_bound`.

use std::io::Write;

use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analytic::ztilde_alpha_moment;
use crate::environment::SignalEnvironment;
use crate::error::{Error, Result};
use crate::geometry::UnitBox;
use crate::rng::RngStream;
use crate::samplers::{sibuya_sample, stable_sample, ParetoParam, SibuyaParam, StableParam};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RsmKind {
    Is,
    Karlin,
    Signal,
    Critical,
    Noise,
}

impl std::str::FromStr for RsmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "is" => RsmKind::Is,
            "karlin" => RsmKind::Karlin,
            "signal" => RsmKind::Signal,
            "critical" => RsmKind::Critical,
            "noise" => RsmKind::Noise,
            _ => return Err(Error::Config(format!("unknown limit kind {s:?}"))),
        })
    }
}

/// Where the truncation certificate applies and how strong it is.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Smallest box measure the certificate covers.
    pub m_min: f64,
    /// Bound on the probability that truncation changes a value.
    pub tol: f64,
    pub dim: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            m_min: 1e-3,
            tol: 1e-4,
            dim: 1,
        }
    }
}

impl TruncationPolicy {
    pub fn new(m_min: f64, tol: f64, dim: usize) -> Result<Self> {
        if !(m_min > 0.0 && m_min <= 1.0) || !(tol > 0.0 && tol < 1.0) || dim == 0 {
            return Err(Error::domain(format!(
                "truncation policy needs 0 < m_min <= 1, 0 < tol < 1, dim >= 1 (got {m_min}, {tol}, {dim})"
            )));
        }
        Ok(Self { m_min, tol, dim })
    }

    /// Threshold `q` with `exp(-θ_min q^(-α)) = tol/2`.
    fn weight_floor(&self, theta_min: f64, alpha: f64) -> f64 {
        (theta_min / (2.0 / self.tol).ln()).powf(1.0 / alpha)
    }

    /// Locations kept for the `ℓ`-th cluster (one-based). The miss
    /// probabilities `(1-m_min)^cap_ℓ` sum to at most `tol/2` over all `ℓ`.
    fn location_cap(&self, ell: u64) -> u64 {
        if self.m_min >= 1.0 {
            return 1;
        }
        let l = ell as f64;
        let need = (2.0 / self.tol).ln() + (l * (l + 1.0)).ln();
        (need / -(-self.m_min).ln_1p()).ceil().max(1.0) as u64
    }

    fn cap_miss(&self, cap: u64) -> f64 {
        (1.0 - self.m_min).powf(cap as f64)
    }
}

/// Noise law inside the signal-dominance limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SignalNoise {
    Pareto(ParetoParam),
    /// `Z ≡ 1`.
    Unit,
}

#[derive(Clone, Debug)]
pub struct TruncatedRSM {
    kind: RsmKind,
    params: serde_json::Value,
    dim: usize,
    weights: Vec<f64>,
    /// `locs[starts[j]..starts[j+1]]` holds atom `j`'s points, `dim` coordinates each.
    starts: Vec<usize>,
    locs: Vec<f64>,
    truncation_bound: f64,
    policy: TruncationPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RsmEvaluation {
    #[serde(rename = "box")]
    pub region: UnitBox,
    pub value: f64,
}

struct Builder {
    dim: usize,
    atoms: Vec<(f64, usize, usize)>,
    locs: Vec<f64>,
}

impl Builder {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            atoms: Vec::new(),
            locs: Vec::new(),
        }
    }

    /// Appends an atom with `count` uniform locations.
    fn push_uniform(&mut self, w: f64, count: u64, rng: &mut RngStream) {
        let start = self.locs.len();
        for _ in 0..count * self.dim as u64 {
            self.locs.push(rng.uniform());
        }
        self.atoms.push((w, start, self.locs.len()));
    }

    fn finish(mut self, kind: RsmKind, params: serde_json::Value, bound: f64, policy: TruncationPolicy) -> TruncatedRSM {
        // Stable sort keeps generation order among equal weights.
        self.atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut weights = Vec::with_capacity(self.atoms.len());
        let mut starts = Vec::with_capacity(self.atoms.len() + 1);
        let mut locs = Vec::with_capacity(self.locs.len());
        for &(w, s, e) in &self.atoms {
            weights.push(w);
            starts.push(locs.len());
            locs.extend_from_slice(&self.locs[s..e]);
        }
        starts.push(locs.len());
        TruncatedRSM {
            kind,
            params,
            dim: self.dim,
            weights,
            starts,
            locs,
            truncation_bound: bound,
            policy,
        }
    }
}

fn check_alpha(name: &str, a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain(format!("{name} must be positive, got {a}")));
    }
    Ok(())
}

fn check_beta(b: f64) -> Result<()> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::domain(format!("beta must lie in (0,1), got {b}")));
    }
    Ok(())
}

/// Independently scattered α-Fréchet sup-measure: atoms `(Γ_ℓ^(-1/α), U_ℓ)`.
pub fn sample_is_rsm(alpha: f64, policy: &TruncationPolicy, rng: &mut RngStream) -> Result<TruncatedRSM> {
    check_alpha("alpha", alpha)?;
    let q = policy.weight_floor(policy.m_min, alpha);
    let stop = q.powf(-alpha);
    let mut b = Builder::new(policy.dim);
    let mut gam = rng.exp1();
    loop {
        b.push_uniform(gam.powf(-1.0 / alpha), 1, rng);
        gam += rng.exp1();
        if gam > stop {
            break;
        }
    }
    let params = json!({ "alpha": alpha, "dim": policy.dim, "m_min": policy.m_min });
    Ok(b.finish(RsmKind::Is, params, policy.tol / 2.0, *policy))
}

/// Karlin sup-measure: atom `ℓ` has weight `Γ_ℓ^(-1/α)` and `Q_ℓ ~ Sibuya(β)` uniform locations.
pub fn sample_karlin_rsm(alpha: f64, beta: f64, policy: &TruncationPolicy, rng: &mut RngStream) -> Result<TruncatedRSM> {
    check_alpha("alpha", alpha)?;
    check_beta(beta)?;
    let sib = SibuyaParam::new(beta)?;
    // θ(B) = μ(B)^β
    let q = policy.weight_floor(policy.m_min.powf(beta), alpha);
    let stop = q.powf(-alpha);
    let mut b = Builder::new(policy.dim);
    let mut bound = policy.tol / 2.0;
    let mut gam = rng.exp1();
    let mut ell = 0u64;
    loop {
        ell += 1;
        let size = sibuya_sample(&sib, rng);
        let cap = policy.location_cap(ell);
        if size > cap {
            bound += policy.cap_miss(cap);
        }
        b.push_uniform(gam.powf(-1.0 / alpha), size.min(cap), rng);
        gam += rng.exp1();
        if gam > stop {
            break;
        }
    }
    let params = json!({ "alpha": alpha, "beta": beta, "dim": policy.dim, "m_min": policy.m_min });
    Ok(b.finish(RsmKind::Karlin, params, bound, *policy))
}

/// Signal-dominance limit `⋁_ℓ Γ_ℓ^(-1/α) max_{i<=Q_ℓ} Z_{ℓ,i} 1{U_{ℓ,i} ∈ ·}`, one atom per `(ℓ, i)`.
///
/// Clusters are generated in decreasing order of their largest weight
/// `V_ℓ = (E Z̃^α / Γ_ℓ)^(1/α)`, where `Z̃ = max_i Z_{ℓ,i}`. Given `V_ℓ`, the
/// cluster follows the law of `(Q, Z_1..Z_Q)` tilted by `Z̃^α`: `Z̃` is Pareto
/// with index `α′β − α`, `Q − 1` given `Z̃ = z` is negative binomial with
/// shape `1 − β` and success probability `F_Z(z)`, and the remaining `Z`s are
/// i.i.d. `Z | Z <= z`.
pub fn sample_signal_limit_rsm(
    alpha: f64,
    beta: f64,
    noise: SignalNoise,
    policy: &TruncationPolicy,
    rng: &mut RngStream,
) -> Result<TruncatedRSM> {
    SignalLimitSampler::new(alpha, beta, noise, policy)?.sample(rng)
}

/// [`sample_signal_limit_rsm`] with the cluster moment computed once.
#[derive(Clone, Debug)]
pub struct SignalLimitSampler {
    alpha: f64,
    beta: f64,
    noise: SignalNoise,
    policy: TruncationPolicy,
    sib: SibuyaParam,
    tilt: Option<ParetoParam>,
    c: f64,
    stop: f64,
}

impl SignalLimitSampler {
    pub fn new(alpha: f64, beta: f64, noise: SignalNoise, policy: &TruncationPolicy) -> Result<Self> {
        check_alpha("alpha", alpha)?;
        check_beta(beta)?;
        let (c, x_min, tilt) = match noise {
            SignalNoise::Pareto(z) => (
                ztilde_alpha_moment(&z, beta, alpha)?,
                z.x_min,
                Some(ParetoParam::new(z.alpha * beta - alpha, z.x_min)?),
            ),
            SignalNoise::Unit => (1.0, 1.0, None),
        };
        // θ(B) >= P(cluster hits B) x_min^α = μ(B)^β x_min^α
        let q = policy.weight_floor(policy.m_min.powf(beta) * x_min.powf(alpha), alpha);
        Ok(Self {
            alpha,
            beta,
            noise,
            policy: *policy,
            sib: SibuyaParam::new(beta)?,
            tilt,
            c,
            stop: c * q.powf(-alpha),
        })
    }

    /// `E Z̃^α`, the scale of the cluster maxima.
    pub fn moment(&self) -> f64 {
        self.c
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<TruncatedRSM> {
        let (alpha, beta, c) = (self.alpha, self.beta, self.c);
        let policy = &self.policy;
        let mut b = Builder::new(policy.dim);
        let mut bound = policy.tol / 2.0;
        let mut gam = rng.exp1();
        let mut ell = 0u64;
        loop {
            ell += 1;
            let v = (c / gam).powf(1.0 / alpha);
            let cap = policy.location_cap(ell);
            match (self.noise, self.tilt) {
                (SignalNoise::Pareto(zp), Some(tilt)) => {
                    let z = tilt.tail_quantile(rng.uniform());
                    let others = negbin_others(1.0 - beta, (z / zp.x_min).powf(zp.alpha) - 1.0, rng)?;
                    if others + 1.0 > cap as f64 {
                        bound += policy.cap_miss(cap);
                    }
                    b.push_uniform(v, 1, rng);
                    // Largest of the others first, in survival space on [F̄(z), 1].
                    let mut s = zp.survival(z);
                    let mut left = others;
                    let keep = (cap - 1).min(others as u64);
                    for _ in 0..keep {
                        let u = rng.uniform();
                        s += (1.0 - s) * -(u.ln() / left).exp_m1();
                        left -= 1.0;
                        let zi = zp.tail_quantile(s).min(z);
                        b.push_uniform(v * zi / z, 1, rng);
                    }
                }
                _ => {
                    let size = sibuya_sample(&self.sib, rng);
                    if size > cap {
                        bound += policy.cap_miss(cap);
                    }
                    for _ in 0..size.min(cap) {
                        b.push_uniform(v, 1, rng);
                    }
                }
            }
            gam += rng.exp1();
            if gam > self.stop {
                break;
            }
        }
        let mut params = json!({ "alpha": alpha, "beta": beta, "dim": policy.dim, "m_min": policy.m_min, "ztilde_moment": c });
        if let SignalNoise::Pareto(z) = self.noise {
            params["alpha_prime"] = json!(z.alpha);
        }
        Ok(b.finish(RsmKind::Signal, params, bound, *policy))
    }
}

/// Negative binomial draw with shape `r` and odds `odds = p/(1-p)`, as a
/// Poisson mixture over `Gamma(r, odds)`. Returned as a float since it can
/// exceed the exact integer range.
fn negbin_others(r: f64, odds: f64, rng: &mut RngStream) -> Result<f64> {
    if odds <= 0.0 {
        return Ok(0.0);
    }
    let g = Gamma::new(r, odds).map_err(|e| Error::Internal(format!("gamma({r}, {odds}): {e}")))?;
    let lambda: f64 = g.sample(rng);
    if !(lambda > 0.0) {
        return Ok(0.0);
    }
    if lambda > 1e15 {
        let n: f64 = StandardNormal.sample(rng);
        return Ok((lambda + lambda.sqrt() * n).round().max(0.0));
    }
    let p = Poisson::new(lambda).map_err(|e| Error::Internal(format!("poisson({lambda}): {e}")))?;
    Ok(p.sample(rng))
}

/// Critical-regime logistic limit `S_β^(1/α′) 𝓜^is_α′`: one stable draw `S`,
/// then atoms `(S^(1/α′) Γ_ℓ^(-1/α′), U_ℓ)`.
pub fn sample_critical_limit_rsm(
    alpha_prime: f64,
    beta: f64,
    policy: &TruncationPolicy,
    rng: &mut RngStream,
) -> Result<TruncatedRSM> {
    check_alpha("alpha_prime", alpha_prime)?;
    check_beta(beta)?;
    let s = stable_sample(&StableParam::new(beta)?, rng);
    // Conditionally on S the measure is IS with θ(B) = S μ(B).
    let q = policy.weight_floor(s * policy.m_min, alpha_prime);
    let stop = s * q.powf(-alpha_prime);
    let mut b = Builder::new(policy.dim);
    let mut gam = rng.exp1();
    loop {
        b.push_uniform((s / gam).powf(1.0 / alpha_prime), 1, rng);
        gam += rng.exp1();
        if gam > stop {
            break;
        }
    }
    let params = json!({
        "alpha_prime": alpha_prime, "beta": beta, "dim": policy.dim, "m_min": policy.m_min, "stable": s
    });
    Ok(b.finish(RsmKind::Critical, params, policy.tol / 2.0, *policy))
}

/// Noise-dominance limit with a frozen signal environment: atoms
/// `(ε_{Y_ℓ} Γ_ℓ^(-1/α′), U_ℓ)` with fresh labels `Y_ℓ`.
///
/// Conditionally on the environment this is α′-Fréchet with scale
/// `m = Σ_ℓ p_ℓ ε_ℓ^α′`. Atoms with `Γ_ℓ > G` are omitted, where `G` makes the
/// expected number of omitted atoms above `q`,
/// `Σ_ℓ p_ℓ (ε_ℓ^α′ q^(-α′) − G)_+`, at most `tol/2`; labels outside the
/// cached prefix enter that sum through their expectation.
pub fn sample_noise_limit_rsm(
    alpha_prime: f64,
    env: &SignalEnvironment,
    policy: &TruncationPolicy,
    rng: &mut RngStream,
) -> Result<TruncatedRSM> {
    Ok(NoiseLimitSampler::new(alpha_prime, env, policy)?.sample(rng))
}

/// [`sample_noise_limit_rsm`] with the environment-dependent truncation
/// computed once, for repeated draws under one environment.
#[derive(Clone, Debug)]
pub struct NoiseLimitSampler<'a> {
    alpha_prime: f64,
    env: &'a SignalEnvironment,
    policy: TruncationPolicy,
    moment: f64,
    g_stop: f64,
}

impl<'a> NoiseLimitSampler<'a> {
    pub fn new(alpha_prime: f64, env: &'a SignalEnvironment, policy: &TruncationPolicy) -> Result<Self> {
        check_alpha("alpha_prime", alpha_prime)?;
        let m = env.moment(alpha_prime)?;
        let q = policy.weight_floor(m * policy.m_min, alpha_prime);
        let d = q.powf(-alpha_prime);
        let g_stop = noise_cutoff(alpha_prime, env, d, policy.tol / 2.0)?;
        Ok(Self {
            alpha_prime,
            env,
            policy: *policy,
            moment: m,
            g_stop,
        })
    }

    /// `Σ_ℓ p_ℓ ε_ℓ^α′` of the environment.
    pub fn moment(&self) -> f64 {
        self.moment
    }

    pub fn sample(&self, rng: &mut RngStream) -> TruncatedRSM {
        let labels = self.env.labels();
        let mut b = Builder::new(self.policy.dim);
        let mut gam = rng.exp1();
        loop {
            let y = labels.sample(rng);
            b.push_uniform(self.env.value(y) * gam.powf(-1.0 / self.alpha_prime), 1, rng);
            gam += rng.exp1();
            if gam > self.g_stop {
                break;
            }
        }
        let params = json!({
            "alpha_prime": self.alpha_prime, "beta": labels.beta(), "dim": self.policy.dim,
            "m_min": self.policy.m_min, "moment": self.moment
        });
        b.finish(RsmKind::Noise, params, self.policy.tol, self.policy)
    }
}

/// Smallest `G` (up to bisection accuracy) with expected omitted exceedances below `budget`.
fn noise_cutoff(alpha_prime: f64, env: &SignalEnvironment, d: f64, budget: f64) -> Result<f64> {
    let powered: Vec<(f64, f64)> = env
        .prefix()
        .iter()
        .enumerate()
        .map(|(i, e)| (env.labels().pmf(i as u64 + 1), e.powf(alpha_prime)))
        .collect();
    let tail = env.tail_mass();
    let excess = |g: f64| -> Result<f64> {
        let known: f64 = powered.iter().map(|&(p, e)| p * (d * e - g).max(0.0)).sum();
        let fresh = if tail > 0.0 { tail * env.fresh_excess(alpha_prime, d, g)? } else { 0.0 };
        Ok(known + fresh)
    };
    let mut hi = 1.0f64;
    while excess(hi)? > budget {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Environment(
                "truncation certificate would need more than 1e12 atoms".into(),
            ));
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

impl TruncatedRSM {
    pub fn kind(&self) -> RsmKind {
        self.kind
    }

    pub fn params(&self) -> &serde_json::Value {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truncation_bound(&self) -> f64 {
        self.truncation_bound
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Atom `j`: weight and flattened location coordinates.
    pub fn atom(&self, j: usize) -> (f64, &[f64]) {
        (self.weights[j], &self.locs[self.starts[j]..self.starts[j + 1]])
    }

    /// Value on the whole cube: the largest weight.
    pub fn full_space_value(&self) -> f64 {
        self.weights.first().copied().unwrap_or(0.0)
    }

    /// The stable variable shared by all atoms of a critical realization.
    pub fn stable_factor(&self) -> Option<f64> {
        self.params.get("stable").and_then(serde_json::Value::as_f64)
    }

    fn value_on(&self, b: &UnitBox) -> f64 {
        for j in 0..self.weights.len() {
            let pts = &self.locs[self.starts[j]..self.starts[j + 1]];
            if pts.chunks_exact(self.dim).any(|p| b.contains(p)) {
                return self.weights[j];
            }
        }
        0.0
    }

    fn check_box(&self, b: &UnitBox) -> Result<()> {
        b.check_dim(self.dim)?;
        let m = b.measure();
        if m < self.policy.m_min * (1.0 - 1e-12) {
            return Err(Error::CertificateViolation {
                measure: m,
                m_min: self.policy.m_min,
            });
        }
        Ok(())
    }

    pub fn evaluate_values(&self, boxes: &[UnitBox]) -> Result<Vec<f64>> {
        boxes
            .iter()
            .map(|b| {
                self.check_box(b)?;
                Ok(self.value_on(b))
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let atoms: Vec<serde_json::Value> = (0..self.len())
            .map(|j| {
                let (w, pts) = self.atom(j);
                let locs: Vec<&[f64]> = pts.chunks_exact(self.dim).collect();
                json!({ "w": w, "locs": locs })
            })
            .collect();
        json!({
            "kind": self.kind,
            "params": self.params,
            "atoms": atoms,
            "truncation_bound": self.truncation_bound,
        })
    }

    pub fn write_json<W: Write + ?Sized>(&self, w: &mut W) -> Result<()> {
        serde_json::to_writer(w, &self.to_json())?;
        Ok(())
    }
}

/// Per-box values of a realization.
pub fn evaluate(rsm: &TruncatedRSM, boxes: &[UnitBox]) -> Result<Vec<RsmEvaluation>> {
    Ok(rsm
        .evaluate_values(boxes)?
        .into_iter()
        .zip(boxes)
        .map(|(value, b)| RsmEvaluation {
            region: b.clone(),
            value,
        })
        .collect())
}
