use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::{ExperimentConfig, Suite};
use crate::analytic::Normalizer;
use crate::error::Result;
use crate::stats::{ks_p_value, ks_threshold, ks_threshold_two, ChiSquare};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of the compact JSON form of `v`.
pub fn config_hash<T: Serialize>(v: &T) -> String {
    let s = serde_json::to_string(v).unwrap_or_default();
    let d = Sha256::digest(s.as_bytes());
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// How a record's pass flag is decided.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// `|empirical − target| <= tolerance`.
    Within,
    /// `empirical <= tolerance`.
    Below,
    /// One-sample KS distance below the threshold at `level`.
    KsOne { n: usize, level: f64 },
    /// Two-sample KS distance below the threshold at `level`.
    KsTwo { n: usize, m: usize, level: f64 },
    /// `p_value >= tolerance`.
    PAbove,
    /// `|empirical − target| <= k · mc_stderr`.
    Stderr { k: f64 },
}

impl Rule {
    fn is_test(&self) -> bool {
        !matches!(self, Rule::Within | Rule::Below)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub name: String,
    pub statistic: String,
    pub empirical: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub mc_stderr: Option<f64>,
    pub p_value: Option<f64>,
    #[serde(flatten)]
    pub rule: Rule,
    /// True for oracle self-checks run before the model is tested.
    pub calibration: bool,
    /// Tolerance after the Bonferroni correction over all test-type records.
    pub adjusted_tolerance: f64,
    pub adjusted_passed: bool,
}

impl TestRecord {
    fn decide(&self, tol: f64) -> bool {
        let ok = match self.rule {
            Rule::Within | Rule::Stderr { .. } => (self.empirical - self.target).abs() <= tol,
            Rule::Below | Rule::KsOne { .. } | Rule::KsTwo { .. } => self.empirical <= tol,
            Rule::PAbove => self.p_value.is_some_and(|p| p >= tol),
        };
        ok && self.empirical.is_finite()
    }

    fn adjusted(&self, m: usize) -> f64 {
        let m = m.max(1) as f64;
        match self.rule {
            Rule::Within | Rule::Below => self.tolerance,
            Rule::KsOne { n, level } => ks_threshold(n, level / m),
            Rule::KsTwo { n, m: n2, level } => ks_threshold_two(n, n2, level / m),
            Rule::PAbove => self.tolerance / m,
            Rule::Stderr { k } => {
                let z = Normal::standard();
                let level = 2.0 * z.sf(k) / m;
                z.inverse_cdf(1.0 - level / 2.0) * self.mc_stderr.unwrap_or(0.0)
            }
        }
    }
}

/// Empirical and target CDF of one compared quantity on a grid of its sample quantiles.
#[derive(Clone, Debug, PartialEq)]
pub struct EcdfCurve {
    pub name: String,
    pub points: Vec<(f64, f64, f64)>,
}

impl EcdfCurve {
    /// Grid at the 1%,..,99% sample quantiles, plus both extremes.
    pub fn from_sample(name: impl Into<String>, sample: &[f64], target: impl Fn(f64) -> f64) -> Self {
        let mut v = sample.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mut idx: Vec<usize> = (0..=100).map(|k| ((k * (n - 1)) as f64 / 100.0).round() as usize).collect();
        idx.dedup();
        let points = idx
            .into_iter()
            .map(|i| {
                let z = v[i];
                (z, crate::stats::ecdf(&v, z), target(z))
            })
            .collect();
        Self {
            name: name.into(),
            points,
        }
    }

    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "z,F_emp,F_target")?;
        for (z, e, t) in &self.points {
            writeln!(w, "{z},{e},{t}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub runtime_s: f64,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: Suite,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub records: Vec<TestRecord>,
    pub normalizers: Vec<Normalizer>,
    pub notes: Vec<String>,
    pub calibration_passed: bool,
    /// Every record passes at its own tolerance.
    pub passed: bool,
    /// Every record passes after the Bonferroni correction.
    pub bonferroni_passed: bool,
    #[serde(skip)]
    pub curves: Vec<EcdfCurve>,
    /// The only run-dependent part; excluded from [`VerificationReport::canonical_json`].
    pub timing: Timing,
}

impl VerificationReport {
    pub fn record(&self, name: &str) -> Option<&TestRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON without the timing block: identical for identical config and seed.
    pub fn canonical_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(o) = v.as_object_mut() {
            o.remove("timing");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    /// Writes one `z,F_emp,F_target` CSV per curve next to `base`, named
    /// `<stem>.<curve>.csv`. Returns the paths written.
    pub fn write_curves(&self, base: &Path) -> Result<Vec<PathBuf>> {
        let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        let dir = base.parent().unwrap_or(Path::new("."));
        let mut out = Vec::new();
        for c in &self.curves {
            let safe: String = c
                .name
                .chars()
                .map(|ch| if ch.is_ascii_alphanumeric() || ch == '.' || ch == '-' { ch } else { '_' })
                .collect();
            let path = dir.join(format!("{stem}.{safe}.csv"));
            let mut f = io::BufWriter::new(std::fs::File::create(&path)?);
            c.write_csv(&mut f)?;
            f.flush()?;
            out.push(path);
        }
        Ok(out)
    }
}

pub(crate) struct ReportBuilder {
    config: ExperimentConfig,
    records: Vec<TestRecord>,
    normalizers: Vec<Normalizer>,
    notes: Vec<String>,
    curves: Vec<EcdfCurve>,
    calibrating: bool,
    start: Instant,
}

impl ReportBuilder {
    pub(crate) fn new(config: ExperimentConfig) -> Self {
        Self {
            config,
            records: Vec::new(),
            normalizers: Vec::new(),
            notes: Vec::new(),
            curves: Vec::new(),
            calibrating: false,
            start: Instant::now(),
        }
    }

    pub(crate) fn calibration(&mut self, on: bool) {
        self.calibrating = on;
    }

    /// True if every calibration record so far passes, Bonferroni-corrected
    /// over the calibration records.
    pub(crate) fn calibration_ok(&self) -> bool {
        let cal: Vec<&TestRecord> = self.records.iter().filter(|r| r.calibration).collect();
        let m = cal.iter().filter(|r| r.rule.is_test()).count();
        cal.iter().all(|r| r.decide(r.adjusted(m)))
    }

    pub(crate) fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub(crate) fn normalizer(&mut self, n: Normalizer) {
        self.normalizers.push(n);
    }

    pub(crate) fn curve(&mut self, c: EcdfCurve) {
        self.curves.push(c);
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        name: &str,
        statistic: &str,
        empirical: f64,
        target: f64,
        tolerance: f64,
        rule: Rule,
        mc_stderr: Option<f64>,
        p_value: Option<f64>,
    ) -> bool {
        let mut r = TestRecord {
            name: name.to_string(),
            statistic: statistic.to_string(),
            empirical,
            target,
            tolerance,
            passed: false,
            mc_stderr,
            p_value,
            rule,
            calibration: self.calibrating,
            adjusted_tolerance: tolerance,
            adjusted_passed: false,
        };
        r.passed = r.decide(tolerance);
        let ok = r.passed;
        self.records.push(r);
        ok
    }

    pub(crate) fn within(&mut self, name: &str, statistic: &str, emp: f64, target: f64, tol: f64) -> bool {
        self.push(name, statistic, emp, target, tol, Rule::Within, None, None)
    }

    /// Fixed tolerance, with the Monte Carlo error of `emp` recorded alongside.
    pub(crate) fn within_se(&mut self, name: &str, statistic: &str, emp: f64, target: f64, tol: f64, se: f64) -> bool {
        self.push(name, statistic, emp, target, tol, Rule::Within, Some(se), None)
    }

    pub(crate) fn below(&mut self, name: &str, statistic: &str, emp: f64, tol: f64) -> bool {
        self.push(name, statistic, emp, 0.0, tol, Rule::Below, None, None)
    }

    /// KS distance against a fixed tolerance; the p-value is informational.
    pub(crate) fn ks_fixed(&mut self, name: &str, d: f64, tol: f64, n_eff: f64) -> bool {
        let p = ks_p_value(d, n_eff);
        self.push(name, "ks", d, 0.0, tol, Rule::Below, None, Some(p))
    }

    pub(crate) fn ks_one(&mut self, name: &str, d: f64, n: usize) -> bool {
        let level = self.config.tolerances.level;
        let tol = ks_threshold(n, level);
        self.push(name, "ks", d, 0.0, tol, Rule::KsOne { n, level }, None, Some(ks_p_value(d, n as f64)))
    }

    pub(crate) fn ks_two(&mut self, name: &str, d: f64, n: usize, m: usize) -> bool {
        let level = self.config.tolerances.level;
        let tol = ks_threshold_two(n, m, level);
        let n_eff = (n * m) as f64 / (n + m) as f64;
        self.push(name, "ks2", d, 0.0, tol, Rule::KsTwo { n, m, level }, None, Some(ks_p_value(d, n_eff)))
    }

    pub(crate) fn chi2(&mut self, name: &str, c: &ChiSquare) -> bool {
        let p_min = self.config.tolerances.chi2_p_min;
        self.push(name, "chi2", c.statistic, c.dof as f64, p_min, Rule::PAbove, None, Some(c.p_value))
    }

    pub(crate) fn stderr(&mut self, name: &str, statistic: &str, emp: f64, target: f64, se: f64) -> bool {
        let k = self.config.tolerances.stderr_k;
        let z = if se > 0.0 { (emp - target).abs() / se } else { f64::INFINITY };
        let p = 2.0 * Normal::standard().sf(z);
        self.push(name, statistic, emp, target, k * se, Rule::Stderr { k }, Some(se), Some(p))
    }

    pub(crate) fn finish(self, threads: usize) -> VerificationReport {
        let mut records = self.records;
        let m = records.iter().filter(|r| r.rule.is_test()).count();
        for r in records.iter_mut() {
            r.adjusted_tolerance = r.adjusted(m);
            r.adjusted_passed = r.decide(r.adjusted_tolerance);
        }
        let calibration_passed = records.iter().filter(|r| r.calibration).all(|r| r.adjusted_passed);
        let nonempty = !records.is_empty();
        VerificationReport {
            suite: self.config.suite,
            version: VERSION.to_string(),
            seed: self.config.seed,
            passed: nonempty && records.iter().all(|r| r.passed),
            bonferroni_passed: nonempty && calibration_passed && records.iter().all(|r| r.adjusted_passed),
            calibration_passed,
            records,
            normalizers: self.normalizers,
            notes: self.notes,
            curves: self.curves,
            timing: Timing {
                runtime_s: self.start.elapsed().as_secs_f64(),
                threads,
            },
            config_hash: config_hash(&self.config),
            config: self.config,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builder() -> ReportBuilder {
        ReportBuilder::new(ExperimentConfig::new(Suite::Sibuya))
    }

    #[test]
    fn rules_decide_pass_flags() {
        let mut b = builder();
        assert!(b.within("w", "x", 1.0, 1.01, 0.02));
        assert!(!b.within("w2", "x", 1.0, 1.05, 0.02));
        assert!(b.ks_one("k", 0.001, 10_000));
        assert!(!b.ks_one("k2", 0.05, 10_000));
        assert!(b.stderr("s", "m", 1.0, 1.02, 0.01));
        assert!(!b.stderr("s2", "m", 1.0, 1.05, 0.01));
        let r = b.finish(1);
        assert!(!r.passed);
        assert_eq!(r.records.len(), 6);
    }

    #[test]
    fn bonferroni_widens_test_tolerances_only() {
        let mut b = builder();
        b.within("w", "x", 0.0, 0.0, 0.1);
        b.ks_one("k", 0.0, 1000);
        b.ks_one("k2", 0.0, 1000);
        b.stderr("s", "m", 0.0, 0.0, 1.0);
        let r = b.finish(1);
        assert_eq!(r.records[0].adjusted_tolerance, 0.1);
        assert!(r.records[1].adjusted_tolerance > r.records[1].tolerance);
        assert!((r.records[1].adjusted_tolerance - ks_threshold(1000, 0.01 / 3.0)).abs() < 1e-15);
        assert!(r.records[3].adjusted_tolerance > 3.0);
        assert!(r.passed && r.bonferroni_passed);
    }

    #[test]
    fn borderline_case_rescued_by_correction() {
        let mut b = builder();
        for i in 0..10 {
            b.stderr(&format!("s{i}"), "m", 0.0, 0.0, 1.0);
        }
        b.stderr("edge", "m", 3.2, 0.0, 1.0);
        let r = b.finish(1);
        assert!(!r.passed);
        assert!(r.bonferroni_passed);
    }

    #[test]
    fn canonical_json_drops_timing() {
        let mut b = builder();
        b.within("w", "x", 1.0, 1.0, 0.1);
        let r = b.finish(4);
        let c = r.canonical_json().unwrap();
        assert!(!c.contains("runtime_s"));
        assert!(r.to_json().unwrap().contains("runtime_s"));
        let v: serde_json::Value = serde_json::from_str(&c).unwrap();
        assert_eq!(v["records"][0]["rule"], "within");
    }

    #[test]
    fn curve_csv_shape() {
        let c = EcdfCurve::from_sample("x", &[3.0, 1.0, 2.0], |z| z / 3.0);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("z,F_emp,F_target\n1,"));
        assert_eq!(c.points.last().unwrap(), &(3.0, 1.0, 1.0));
    }
}
