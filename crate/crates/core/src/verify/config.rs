use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analytic::{ParamValue, Regime};
use crate::error::{Error, Result};
use crate::geometry::{parse_boxes, UnitBox};
use crate::karlin_process::ModelParams;
use crate::limit_measures::RsmKind;
use crate::samplers::{ParetoParam, TailLaw, ZetaLabelLaw};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Suite {
    Sibuya,
    Stable,
    Occupancy,
    Rsm,
    Regime,
    Poissonization,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "sibuya" => Suite::Sibuya,
            "stable" => Suite::Stable,
            "occupancy" => Suite::Occupancy,
            "rsm" => Suite::Rsm,
            "regime" => Suite::Regime,
            "poissonization" => Suite::Poissonization,
            _ => return Err(Error::Config(format!("unknown suite {s:?}"))),
        })
    }
}

/// Tolerances and test levels. Every field can be overridden from the config.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Fixed KS tolerance for model-vs-limit comparisons. When absent,
    /// 0.05 is used, or 0.1 in the critical regime.
    pub ks: Option<f64>,
    /// Level of the KS threshold tests.
    pub level: f64,
    /// Smallest acceptable chi-square p-value.
    pub chi2_p_min: f64,
    /// Relative tolerance of the occupancy ratio.
    pub ratio_rel: f64,
    /// Multiplier on the Monte Carlo standard error.
    pub stderr_k: f64,
    /// Bound on normalizer residuals.
    pub residual: f64,
    /// Poissonization sandwich half-width `δ`.
    pub delta: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ks: None,
            level: 0.01,
            chi2_p_min: 1e-3,
            ratio_rel: 0.02,
            stderr_k: 3.0,
            residual: 1e-10,
            delta: 0.05,
        }
    }
}

impl Tolerances {
    pub fn ks_for(&self, regime: Regime) -> f64 {
        self.ks.unwrap_or(match regime {
            Regime::Critical => 0.1,
            _ => 0.05,
        })
    }
}

/// One verification run, as read from JSON. Unset fields take suite defaults;
/// [`ExperimentConfig::resolved`] fills them in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Suite,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_prime: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<ParamValue>,
    /// Expected regime; a mismatch with the parameters is a configuration error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Draws per distribution for the sampler and limit-measure suites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Box list in the `lo:hi,lo:hi` syntax.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<String>,
    /// Restricts the RSM suite to one kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<RsmKind>,
    /// Poissonization: also run the `(1±δ)λ` sandwich.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sandwich: Option<bool>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_seed() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn new(suite: Suite) -> Self {
        Self {
            suite,
            alpha: None,
            alpha_prime: None,
            beta: None,
            regime: None,
            n: None,
            lambda: None,
            reps: None,
            samples: None,
            boxes: None,
            kind: None,
            sandwich: None,
            seed: default_seed(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn with_params(mut self, alpha: f64, alpha_prime: f64, beta: f64) -> Self {
        self.alpha = Some(alpha.into());
        self.alpha_prime = Some(alpha_prime.into());
        self.beta = Some(beta.into());
        self
    }

    /// Canonical parameter triple of a regime.
    pub fn canonical_params(regime: Regime) -> (f64, f64, f64) {
        match regime {
            Regime::NoiseDominance => (3.0, 1.0, 0.5),
            Regime::SignalDominance => (0.5, 2.0, 0.5),
            Regime::Critical => (1.0, 2.0, 0.5),
        }
    }

    /// Copy with suite defaults filled in and basic invariants checked.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        match c.suite {
            Suite::Regime | Suite::Poissonization => {
                if c.alpha.is_none() && c.alpha_prime.is_none() && c.beta.is_none() {
                    let (a, ap, b) = Self::canonical_params(c.regime.unwrap_or(Regime::SignalDominance));
                    c = c.with_params(a, ap, b);
                }
                let params = c.model_params()?;
                let regime = params.regime();
                if let Some(want) = c.regime {
                    if want != regime {
                        return Err(Error::Config(format!(
                            "requested {want} regime but (alpha, alpha_prime, beta) = ({}, {}, {}) is {regime}",
                            params.alpha, params.alpha_prime, params.beta
                        )));
                    }
                }
                c.regime = Some(regime);
                let default_n = if regime == Regime::Critical && c.suite == Suite::Regime { 1_000_000 } else { 100_000 };
                if c.suite == Suite::Poissonization {
                    let n = c.n.or(c.lambda.map(|l| l.round() as u64)).unwrap_or(default_n);
                    c.n = Some(n);
                    c.lambda = Some(c.lambda.unwrap_or(n as f64));
                } else {
                    c.n = Some(c.n.unwrap_or(default_n));
                }
                c.reps = Some(c.reps.unwrap_or(2000));
                c.boxes = Some(c.boxes.unwrap_or_else(|| "0:1".into()));
                if c.suite == Suite::Poissonization {
                    c.sandwich = Some(c.sandwich.unwrap_or(true));
                }
            }
            Suite::Occupancy => {
                c.n = Some(c.n.unwrap_or(1_000_000));
                c.reps = Some(c.reps.unwrap_or(100));
            }
            Suite::Sibuya => {
                c.samples = Some(c.samples.unwrap_or(1_000_000));
            }
            Suite::Stable => {
                c.samples = Some(c.samples.unwrap_or(1_000_000));
            }
            Suite::Rsm => {
                c.samples = Some(c.samples.unwrap_or(100_000));
                c.boxes = Some(c.boxes.unwrap_or_else(|| "0:0.25,0:0.5,0:1".into()));
            }
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("tolerance {name} must be positive, got {v}")))
            }
        };
        pos("level", t.level)?;
        pos("chi2_p_min", t.chi2_p_min)?;
        pos("ratio_rel", t.ratio_rel)?;
        pos("stderr_k", t.stderr_k)?;
        pos("residual", t.residual)?;
        if let Some(ks) = t.ks {
            pos("ks", ks)?;
        }
        if !(t.delta > 0.0 && t.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0,1), got {}", t.delta)));
        }
        if let Some(r) = self.reps {
            let distributional = matches!(self.suite, Suite::Regime | Suite::Poissonization);
            if distributional && r < 100 {
                return Err(Error::Config(format!("distributional tests need reps >= 100, got {r}")));
            }
            if r == 0 {
                return Err(Error::Config("reps must be positive".into()));
            }
        }
        if let Some(s) = self.samples {
            if s < 100 {
                return Err(Error::Config(format!("samples must be at least 100, got {s}")));
            }
        }
        if self.n == Some(0) {
            return Err(Error::Config("n must be positive".into()));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("lambda must be positive, got {l}")));
            }
        }
        if matches!(self.suite, Suite::Rsm | Suite::Regime | Suite::Poissonization) {
            let boxes = self.box_list()?;
            if boxes.is_empty() {
                return Err(Error::Config("box list must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn box_list(&self) -> Result<Vec<UnitBox>> {
        match &self.boxes {
            Some(s) => parse_boxes(s, 1).map_err(|e| Error::Config(e.to_string())),
            None => Ok(Vec::new()),
        }
    }

    fn param(v: &Option<ParamValue>, name: &str) -> Result<f64> {
        v.as_ref()
            .ok_or_else(|| Error::Config(format!("missing parameter {name}")))?
            .to_f64()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn alpha(&self) -> Result<f64> {
        Self::param(&self.alpha, "alpha")
    }

    pub fn alpha_prime(&self) -> Result<f64> {
        Self::param(&self.alpha_prime, "alpha_prime")
    }

    pub fn beta(&self) -> Result<f64> {
        Self::param(&self.beta, "beta")
    }

    /// Betas to sweep: the configured one, or the given defaults.
    pub fn betas_or(&self, defaults: &[f64]) -> Result<Vec<f64>> {
        Ok(match self.beta {
            Some(_) => vec![self.beta()?],
            None => defaults.to_vec(),
        })
    }

    /// Standard Pareto model. Exact string parameters make the regime decision exact.
    pub fn model_params(&self) -> Result<ModelParams> {
        let exact = match (&self.alpha, &self.alpha_prime, &self.beta) {
            (Some(a), Some(ap), Some(b)) => match (a.to_rational(), ap.to_rational(), b.to_rational()) {
                (Some(a), Some(ap), Some(b)) => Some([a, ap, b]),
                _ => None,
            },
            _ => None,
        };
        let (a, ap, b) = (self.alpha()?, self.alpha_prime()?, self.beta()?);
        let labels = Arc::new(ZetaLabelLaw::new(b).map_err(|e| Error::Config(e.to_string()))?);
        let signal = ParetoParam::standard(a).map_err(|e| Error::Config(e.to_string()))?;
        let noise = ParetoParam::standard(ap).map_err(|e| Error::Config(e.to_string()))?;
        let mut p = ModelParams::with_laws(a, ap, TailLaw::Pareto(signal), TailLaw::Pareto(noise), labels)
            .map_err(|e| Error::Config(e.to_string()))?;
        p.exact = exact;
        Ok(p)
    }
}
