//! Discrete-time perturbed Karlin model `X_i = ε_{Y_i} Z_i`.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};
use std::sync::Arc;

use crate::analytic::{regime_classify, regime_classify_exact, Rational, Regime};
use crate::environment::SignalEnvironment;
use crate::error::{Error, Result};
use crate::geometry::UnitBox;
use crate::rng::RngStream;
use crate::samplers::{ParetoParam, TailLaw, ZetaLabelLaw};

/// Default cap on the number of simulated points; `KARLIN_MAX_N` overrides it.
pub const DEFAULT_MAX_N: u64 = 50_000_000;

/// Current resource limit.
pub fn max_n() -> u64 {
    std::env::var("KARLIN_MAX_N")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_N)
}

pub(crate) fn check_size(requested: u64) -> Result<()> {
    let max = max_n();
    if requested > max {
        return Err(Error::Resource { requested, max });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ModelParams {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
    pub signal_law: TailLaw,
    pub noise_law: TailLaw,
    pub label_law: Arc<ZetaLabelLaw>,
    /// Exact values of `(α, α′, β)` when they were given as rationals.
    pub exact: Option<[Rational; 3]>,
}

impl ModelParams {
    /// Standard Pareto signal and noise with the zeta label law.
    pub fn pareto(alpha: f64, alpha_prime: f64, beta: f64) -> Result<Self> {
        let labels = Arc::new(ZetaLabelLaw::new(beta)?);
        Self::with_laws(
            alpha,
            alpha_prime,
            TailLaw::Pareto(ParetoParam::standard(alpha)?),
            TailLaw::Pareto(ParetoParam::standard(alpha_prime)?),
            labels,
        )
    }

    pub fn with_laws(
        alpha: f64,
        alpha_prime: f64,
        signal_law: TailLaw,
        noise_law: TailLaw,
        label_law: Arc<ZetaLabelLaw>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && alpha_prime > 0.0 && alpha_prime.is_finite()) {
            return Err(Error::domain(format!(
                "tail indices must be positive (alpha={alpha}, alpha_prime={alpha_prime})"
            )));
        }
        Ok(Self {
            alpha,
            alpha_prime,
            beta: label_law.beta(),
            signal_law,
            noise_law,
            label_law,
            exact: None,
        })
    }

    /// Pareto model from exact rationals; the regime is then decided exactly.
    pub fn pareto_exact(alpha: Rational, alpha_prime: Rational, beta: Rational) -> Result<Self> {
        let mut p = Self::pareto(alpha.to_f64(), alpha_prime.to_f64(), beta.to_f64())?;
        p.exact = Some([alpha, alpha_prime, beta]);
        Ok(p)
    }

    pub fn regime(&self) -> Regime {
        match self.exact {
            Some([a, ap, b]) => regime_classify_exact(a, ap, b),
            None => regime_classify(self.alpha, self.alpha_prime, self.beta),
        }
    }

    /// `min(α, α′)`.
    pub fn gamma(&self) -> f64 {
        self.alpha.min(self.alpha_prime)
    }
}

const DENSE_LABELS: usize = 1 << 16;

/// Per-label signal values and visit counts: a flat array for small labels, a
/// hash map above.
#[derive(Clone, Debug)]
pub(crate) struct LabelTable {
    dense_eps: Vec<f64>,
    dense_cnt: Vec<u64>,
    sparse: HashMap<u64, (f64, u64)>,
    distinct: u64,
}

impl LabelTable {
    pub(crate) fn new() -> Self {
        Self {
            dense_eps: vec![f64::NAN; DENSE_LABELS],
            dense_cnt: vec![0; DENSE_LABELS],
            sparse: HashMap::new(),
            distinct: 0,
        }
    }

    /// Signal value of `label`, drawn from `law` on the first visit.
    #[inline]
    pub(crate) fn visit(&mut self, label: u64, law: &TailLaw, rng: &mut RngStream) -> f64 {
        if (label as usize) < DENSE_LABELS {
            let l = label as usize;
            self.dense_cnt[l] += 1;
            if self.dense_cnt[l] == 1 {
                self.distinct += 1;
                self.dense_eps[l] = law.sample(rng);
            }
            self.dense_eps[l]
        } else {
            let distinct = &mut self.distinct;
            let e = self.sparse.entry(label).or_insert_with(|| {
                *distinct += 1;
                (law.sample(rng), 0)
            });
            e.1 += 1;
            e.0
        }
    }

    pub(crate) fn distinct(&self) -> u64 {
        self.distinct
    }

    /// `(label, ε, count)` for every visited label, in increasing label order
    /// for the dense part followed by the sparse part in label order.
    pub(crate) fn entries(&self) -> Vec<(u64, f64, u64)> {
        let mut out: Vec<(u64, f64, u64)> = self
            .dense_cnt
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(l, &c)| (l as u64, self.dense_eps[l], c))
            .collect();
        let mut sparse: Vec<_> = self.sparse.iter().map(|(&l, &(e, c))| (l, e, c)).collect();
        sparse.sort_unstable_by_key(|t| t.0);
        out.extend(sparse);
        out
    }
}

/// Runs the model for `n` steps, calling `visit(i, label, sigma, z)` at each.
/// Per step the draws are: label, then the signal value if the label is new, then the noise.
#[inline]
pub(crate) fn drive(
    params: &ModelParams,
    n: u64,
    rng: &mut RngStream,
    table: &mut LabelTable,
    mut visit: impl FnMut(u64, u64, f64, f64),
) {
    let labels = &*params.label_law;
    for i in 1..=n {
        let label = labels.sample(rng);
        let sigma = table.visit(label, &params.signal_law, rng);
        let z = params.noise_law.sample(rng);
        visit(i, label, sigma, z);
    }
}

/// A simulated trajectory.
#[derive(Clone, Debug)]
pub struct LabeledPath {
    labels: Vec<u64>,
    signal_values: HashMap<u64, f64>,
    noise: Vec<f64>,
    products: Vec<f64>,
}

impl LabeledPath {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn signal_values(&self) -> &HashMap<u64, f64> {
        &self.signal_values
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    pub fn products(&self) -> &[f64] {
        &self.products
    }

    /// `σ_i = ε_{Y_i}`, zero-based.
    pub fn sigma(&self, idx: usize) -> f64 {
        self.signal_values[&self.labels[idx]]
    }

    /// Writes `i,label,sigma,z,x` rows, `i` starting at 1.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "i,label,sigma,z,x")?;
        for (k, ((&l, &z), &x)) in self.labels.iter().zip(&self.noise).zip(&self.products).enumerate() {
            writeln!(w, "{},{},{},{},{}", k + 1, l, self.signal_values[&l], z, x)?;
        }
        Ok(())
    }
}

pub fn simulate_path(params: &ModelParams, n: u64, rng: &mut RngStream) -> Result<LabeledPath> {
    if n == 0 {
        return Err(Error::domain("path length must be at least 1"));
    }
    check_size(n)?;
    let cap = n as usize;
    let mut labels = Vec::with_capacity(cap);
    let mut noise = Vec::with_capacity(cap);
    let mut products = Vec::with_capacity(cap);
    let mut table = LabelTable::new();
    drive(params, n, rng, &mut table, |_, l, s, z| {
        labels.push(l);
        noise.push(z);
        products.push(s * z);
    });
    let signal_values = table.entries().into_iter().map(|(l, e, _)| (l, e)).collect();
    Ok(LabeledPath {
        labels,
        signal_values,
        noise,
        products,
    })
}

/// Box maxima of a path of length `n` without storing it. Consumes the random
/// stream exactly as [`simulate_path`] does, so the results agree with
/// [`empirical_sup_measure`] on the simulated path.
pub fn stream_box_maxima(
    params: &ModelParams,
    n: u64,
    boxes: &[UnitBox],
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("path length must be at least 1"));
    }
    check_size(n)?;
    let ranges = index_ranges(boxes, n)?;
    let mut out = vec![0.0f64; boxes.len()];
    let mut table = LabelTable::new();
    if let [Some((lo, hi))] = ranges[..] {
        // single box: no per-box loop
        let m = &mut out[0];
        drive(params, n, rng, &mut table, |i, _, s, z| {
            if i >= lo && i <= hi {
                let x = s * z;
                if x > *m {
                    *m = x;
                }
            }
        });
    } else {
        drive(params, n, rng, &mut table, |i, _, s, z| {
            let x = s * z;
            for (m, r) in out.iter_mut().zip(&ranges) {
                if let Some((lo, hi)) = *r {
                    if i >= lo && i <= hi && x > *m {
                        *m = x;
                    }
                }
            }
        });
    }
    Ok(out)
}

/// Box maxima of a path under a frozen signal environment: `σ_i = ε_{Y_i}` is
/// read from `env` instead of being drawn. Per step the draws are the label,
/// then the noise.
pub fn stream_box_maxima_quenched(
    params: &ModelParams,
    env: &SignalEnvironment,
    n: u64,
    boxes: &[UnitBox],
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("path length must be at least 1"));
    }
    if (env.labels().beta() - params.beta).abs() > 0.0 {
        return Err(Error::Environment(format!(
            "environment built for beta={} but model has beta={}",
            env.labels().beta(),
            params.beta
        )));
    }
    check_size(n)?;
    let ranges = index_ranges(boxes, n)?;
    let mut out = vec![0.0f64; boxes.len()];
    let labels = &*params.label_law;
    for i in 1..=n {
        let label = labels.sample(rng);
        let x = env.value(label) * params.noise_law.sample(rng);
        for (m, r) in out.iter_mut().zip(&ranges) {
            if let Some((lo, hi)) = *r {
                if i >= lo && i <= hi && x > *m {
                    *m = x;
                }
            }
        }
    }
    Ok(out)
}

/// One label cluster seen on a path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterRecord {
    pub label: u64,
    pub signal: f64,
    pub size: u64,
}

/// Distinct-label count and clusters of a path of length `n` without storing it;
/// same stream consumption as [`simulate_path`]. Clusters are sorted by signal
/// value, largest first.
pub fn stream_clusters(params: &ModelParams, n: u64, rng: &mut RngStream) -> Result<(u64, Vec<ClusterRecord>)> {
    if n == 0 {
        return Err(Error::domain("path length must be at least 1"));
    }
    check_size(n)?;
    let mut table = LabelTable::new();
    drive(params, n, rng, &mut table, |_, _, _, _| {});
    let mut clusters: Vec<ClusterRecord> = table
        .entries()
        .into_iter()
        .map(|(label, signal, size)| ClusterRecord { label, signal, size })
        .collect();
    clusters.sort_by(|a, b| b.signal.total_cmp(&a.signal).then(a.label.cmp(&b.label)));
    Ok((table.distinct(), clusters))
}

fn index_ranges(boxes: &[UnitBox], n: u64) -> Result<Vec<Option<(u64, u64)>>> {
    boxes
        .iter()
        .map(|b| {
            b.check_dim(1)?;
            Ok(b.sides[0].index_range(n))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyStats {
    /// Number of distinct labels.
    pub k_n: u64,
    /// Visits per label.
    pub k_n_ell: HashMap<u64, u64>,
    /// Number of labels visited exactly `k` times.
    pub j_n_k: BTreeMap<u64, u64>,
}

impl OccupancyStats {
    /// Checks `Σ_k J_{n,k} = K_n`, `Σ_k k J_{n,k} = n` and `Σ_ℓ K_{n,ℓ} = n`.
    pub fn check_conservation(&self, n: u64) -> Result<()> {
        let sum_j: u64 = self.j_n_k.values().sum();
        let sum_kj: u64 = self.j_n_k.iter().map(|(k, j)| k * j).sum();
        let sum_l: u64 = self.k_n_ell.values().sum();
        if sum_j != self.k_n || sum_kj != n || sum_l != n || self.k_n_ell.len() as u64 != self.k_n {
            return Err(Error::Internal(format!(
                "occupancy identities broken: ΣJ={sum_j} K={} ΣkJ={sum_kj} ΣK_l={sum_l} n={n}",
                self.k_n
            )));
        }
        Ok(())
    }
}

pub fn occupancy_stats(path: &LabeledPath) -> OccupancyStats {
    occupancy_from_labels(path.labels())
}

pub(crate) fn occupancy_from_labels(labels: &[u64]) -> OccupancyStats {
    let mut k_n_ell: HashMap<u64, u64> = HashMap::new();
    for &l in labels {
        *k_n_ell.entry(l).or_insert(0) += 1;
    }
    let mut j_n_k = BTreeMap::new();
    for &c in k_n_ell.values() {
        *j_n_k.entry(c).or_insert(0) += 1;
    }
    OccupancyStats {
        k_n: k_n_ell.len() as u64,
        k_n_ell,
        j_n_k,
    }
}

/// `ν(x)` for the label law.
pub fn nu(x: f64, law: &ZetaLabelLaw) -> u64 {
    law.nu(x)
}

/// `max{X_i : i/n ∈ box}` per box, zero for boxes holding no location.
pub fn empirical_sup_measure(path: &LabeledPath, boxes: &[UnitBox]) -> Result<Vec<f64>> {
    let n = path.n() as u64;
    Ok(index_ranges(boxes, n)?
        .into_iter()
        .map(|r| match r {
            None => 0.0,
            Some((lo, hi)) => path.products[(lo - 1) as usize..hi as usize]
                .iter()
                .fold(0.0, |m, &x| if x > m { x } else { m }),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Located {
    /// One-based observation index.
    pub index: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopLocations {
    pub x: Vec<Located>,
    pub sigma: Vec<Located>,
    pub z: Vec<Located>,
}

/// Largest `k` values of `X`, `σ` and `Z`, ties going to the smaller index.
pub fn top_locations(path: &LabeledPath, k: usize) -> Result<TopLocations> {
    if k == 0 || k > path.n() {
        return Err(Error::domain(format!("top-k needs 1 <= k <= n, got k={k}, n={}", path.n())));
    }
    let sig: Vec<f64> = path.labels.iter().map(|l| path.signal_values[l]).collect();
    Ok(TopLocations {
        x: top_k(&path.products, k),
        sigma: top_k(&sig, k),
        z: top_k(&path.noise, k),
    })
}

fn top_k(values: &[f64], k: usize) -> Vec<Located> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx.into_iter()
        .map(|i| Located {
            index: i as u64 + 1,
            value: values[i],
        })
        .collect()
}

/// Writes `rank,i,value` rows.
pub fn write_top_csv<W: Write + ?Sized>(items: &[Located], w: &mut W) -> io::Result<()> {
    writeln!(w, "rank,i,value")?;
    for (r, it) in items.iter().enumerate() {
        writeln!(w, "{},{},{}", r + 1, it.index, it.value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Interval;

    fn params() -> ModelParams {
        let labels = Arc::new(ZetaLabelLaw::with_cutoff(0.5, 10_000).unwrap());
        ModelParams::with_laws(
            1.0,
            2.0,
            TailLaw::Pareto(ParetoParam::standard(1.0).unwrap()),
            TailLaw::Pareto(ParetoParam::standard(2.0).unwrap()),
            labels,
        )
        .unwrap()
    }

    fn path_from(labels: Vec<u64>, eps: &[(u64, f64)], noise: Vec<f64>) -> LabeledPath {
        let signal_values: HashMap<u64, f64> = eps.iter().copied().collect();
        let products = labels.iter().zip(&noise).map(|(l, z)| signal_values[l] * z).collect();
        LabeledPath {
            labels,
            signal_values,
            noise,
            products,
        }
    }

    #[test]
    fn quenched_constant_environment() {
        let p = params();
        let env = SignalEnvironment::constant(2.0, p.label_law.clone()).unwrap();
        let boxes = [UnitBox::full(1), UnitBox::interval(0.0, 0.5).unwrap()];
        let got = stream_box_maxima_quenched(&p, &env, 1000, &boxes, &mut RngStream::new(5, 1)).unwrap();
        let mut rng = RngStream::new(5, 1);
        let mut want = [0.0f64; 2];
        for i in 1..=1000u64 {
            p.label_law.sample(&mut rng);
            let x = 2.0 * p.noise_law.sample(&mut rng);
            want[0] = want[0].max(x);
            if i <= 500 {
                want[1] = want[1].max(x);
            }
        }
        assert_eq!(got, want);
        let other = SignalEnvironment::constant(1.0, Arc::new(ZetaLabelLaw::with_cutoff(0.3, 100).unwrap())).unwrap();
        assert!(stream_box_maxima_quenched(&p, &other, 10, &boxes, &mut rng).is_err());
    }

    #[test]
    fn single_step_path() {
        let p = params();
        let path = simulate_path(&p, 1, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(path.signal_values().len(), 1);
        assert_eq!(path.products()[0], path.sigma(0) * path.noise()[0]);
    }

    #[test]
    fn products_and_signal_table_consistent() {
        let p = params();
        let path = simulate_path(&p, 5000, &mut RngStream::new(2, 0)).unwrap();
        for i in 0..path.n() {
            assert_eq!(path.products()[i], path.sigma(i) * path.noise()[i]);
        }
        let st = occupancy_stats(&path);
        st.check_conservation(5000).unwrap();
        assert_eq!(st.k_n as usize, path.signal_values().len());
    }

    #[test]
    fn deterministic_per_stream() {
        let p = params();
        let a = simulate_path(&p, 1000, &mut RngStream::new(9, 4)).unwrap();
        let b = simulate_path(&p, 1000, &mut RngStream::new(9, 4)).unwrap();
        assert_eq!(a.products(), b.products());
        assert_eq!(a.labels(), b.labels());
    }

    #[test]
    fn occupancy_examples() {
        let path = path_from(vec![1, 1, 2], &[(1, 2.0), (2, 3.0)], vec![1.0, 1.5, 2.0]);
        let st = occupancy_stats(&path);
        assert_eq!(st.k_n, 2);
        assert_eq!(st.j_n_k[&1], 1);
        assert_eq!(st.j_n_k[&2], 1);
        let path = path_from(vec![4, 5, 6], &[(4, 1.0), (5, 1.0), (6, 1.0)], vec![1.0; 3]);
        let st = occupancy_stats(&path);
        assert_eq!((st.k_n, st.j_n_k[&1]), (3, 3));
    }

    #[test]
    fn sup_measure_examples() {
        let path = path_from(vec![1, 2], &[(1, 2.0), (2, 3.0)], vec![1.0, 1.0]);
        let b = |lo, hi| UnitBox::interval(lo, hi).unwrap();
        let v = empirical_sup_measure(&path, &[b(0.0, 0.5), b(0.0, 1.0), b(0.5, 1.0)]).unwrap();
        assert_eq!(v, vec![0.0, 3.0, 3.0]);
        let two_d = UnitBox::new(vec![Interval::unit(), Interval::unit()]).unwrap();
        assert!(empirical_sup_measure(&path, &[two_d]).is_err());
    }

    #[test]
    fn streaming_matches_materialized() {
        let p = params();
        let boxes = vec![
            UnitBox::interval(0.0, 1.0).unwrap(),
            UnitBox::interval(0.0, 0.3).unwrap(),
            UnitBox::interval(0.3, 0.9).unwrap(),
        ];
        let path = simulate_path(&p, 3000, &mut RngStream::new(5, 1)).unwrap();
        let want = empirical_sup_measure(&path, &boxes).unwrap();
        let got = stream_box_maxima(&p, 3000, &boxes, &mut RngStream::new(5, 1)).unwrap();
        assert_eq!(want, got);
        let single = stream_box_maxima(&p, 3000, &boxes[..1], &mut RngStream::new(5, 1)).unwrap();
        assert_eq!(single[0], want[0]);
        let (k, clusters) = stream_clusters(&p, 3000, &mut RngStream::new(5, 1)).unwrap();
        let st = occupancy_stats(&path);
        assert_eq!(k, st.k_n);
        for c in &clusters {
            assert_eq!(st.k_n_ell[&c.label], c.size);
            assert_eq!(path.signal_values()[&c.label], c.signal);
        }
        assert!(clusters.windows(2).all(|w| w[0].signal >= w[1].signal));
    }

    #[test]
    fn top_locations_ties_and_order() {
        let path = path_from(vec![1, 2, 1, 3], &[(1, 5.0), (2, 1.0), (3, 2.0)], vec![1.0, 9.0, 1.0, 1.0]);
        let t = top_locations(&path, 2).unwrap();
        assert_eq!(t.x[0], Located { index: 2, value: 9.0 });
        assert_eq!(t.sigma.iter().map(|l| l.index).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(t.sigma[0].value, t.sigma[1].value);
        assert!(top_locations(&path, 5).is_err());
    }

    #[test]
    fn csv_shape() {
        let path = path_from(vec![1, 2], &[(1, 2.0), (2, 3.0)], vec![1.0, 0.5]);
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "i,label,sigma,z,x\n1,1,2,1,2\n2,2,3,0.5,1.5\n");
    }

    #[test]
    fn resource_limit() {
        let p = params();
        let r = simulate_path(&p, DEFAULT_MAX_N + 1, &mut RngStream::new(1, 0));
        if std::env::var("KARLIN_MAX_N").is_err() {
            assert!(matches!(r, Err(Error::Resource { .. })));
        }
        assert!(simulate_path(&p, 0, &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn regime_uses_exact_values_when_given() {
        let r = |s: &str| s.parse::<Rational>().unwrap();
        let p = ModelParams::pareto_exact(r("3/10"), r("3"), r("1/10")).unwrap();
        assert_eq!(p.regime(), Regime::Critical);
    }
}
