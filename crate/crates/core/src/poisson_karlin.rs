//! Poisson–Karlin model on the unit cube: `N(λ)` uniform points, each carrying a
//! label, the label's signal value and an independent noise value.

use std::collections::HashMap;
use std::io::{self, Write};

use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::geometry::UnitBox;
use crate::karlin_process::{check_size, LabelTable, ModelParams};
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct MarkedPointSet {
    lambda: f64,
    dim: usize,
    /// Row-major, `count × dim`.
    locations: Vec<f64>,
    labels: Vec<u64>,
    signal_values: HashMap<u64, f64>,
    noise: Vec<f64>,
}

impl MarkedPointSet {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.locations[i * self.dim..(i + 1) * self.dim]
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

    pub fn sigma(&self, i: usize) -> f64 {
        self.signal_values[&self.labels[i]]
    }

    /// Writes `u_1,..,u_d,label,sigma,z,x` rows.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        for d in 1..=self.dim {
            write!(w, "u_{d},")?;
        }
        writeln!(w, "label,sigma,z,x")?;
        for i in 0..self.count() {
            for u in self.location(i) {
                write!(w, "{u},")?;
            }
            let s = self.sigma(i);
            writeln!(w, "{},{},{},{}", self.labels[i], s, self.noise[i], s * self.noise[i])?;
        }
        Ok(())
    }
}

fn draw_count(lambda: f64, rng: &mut RngStream) -> Result<u64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    let pois = Poisson::new(lambda).map_err(|e| Error::domain(format!("poisson({lambda}): {e}")))?;
    let count = pois.sample(rng) as u64;
    check_size(count)?;
    Ok(count)
}

/// Draws the count, then per point: `dim` location coordinates, label, the
/// signal value if the label is new, noise.
fn drive(
    params: &ModelParams,
    lambda: f64,
    dim: usize,
    rng: &mut RngStream,
    table: &mut LabelTable,
    mut visit: impl FnMut(&[f64], u64, f64, f64),
) -> Result<u64> {
    if dim == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    // Cheap guard before the draw so absurd λ fail without sampling.
    check_size((lambda - 10.0 * lambda.sqrt()).max(0.0) as u64)?;
    let count = draw_count(lambda, rng)?;
    let mut loc = vec![0.0; dim];
    let labels = &*params.label_law;
    for _ in 0..count {
        for u in loc.iter_mut() {
            *u = rng.uniform();
        }
        let label = labels.sample(rng);
        let sigma = table.visit(label, &params.signal_law, rng);
        let z = params.noise_law.sample(rng);
        visit(&loc, label, sigma, z);
    }
    Ok(count)
}

pub fn simulate_marked_points(
    params: &ModelParams,
    lambda: f64,
    dim: usize,
    rng: &mut RngStream,
) -> Result<MarkedPointSet> {
    let mut locations = Vec::new();
    let mut labels = Vec::new();
    let mut noise = Vec::new();
    let mut table = LabelTable::new();
    drive(params, lambda, dim, rng, &mut table, |u, l, _, z| {
        locations.extend_from_slice(u);
        labels.push(l);
        noise.push(z);
    })?;
    Ok(MarkedPointSet {
        lambda,
        dim,
        locations,
        labels,
        signal_values: table.entries().into_iter().map(|(l, e, _)| (l, e)).collect(),
        noise,
    })
}

/// Box maxima of one realization without storing it; same stream use as
/// [`simulate_marked_points`]. Also returns the realized count.
pub fn stream_box_maxima(
    params: &ModelParams,
    lambda: f64,
    boxes: &[UnitBox],
    with_noise: bool,
    rng: &mut RngStream,
) -> Result<(u64, Vec<f64>)> {
    let dim = boxes.first().map(UnitBox::dim).unwrap_or(1);
    for b in boxes {
        b.check_dim(dim)?;
    }
    let mut out = vec![0.0f64; boxes.len()];
    let mut table = LabelTable::new();
    let count = drive(params, lambda, dim, rng, &mut table, |u, _, s, z| {
        let x = if with_noise { s * z } else { s };
        for (m, b) in out.iter_mut().zip(boxes) {
            if x > *m && b.contains(u) {
                *m = x;
            }
        }
    })?;
    Ok((count, out))
}

/// Points sharing one label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelCluster {
    pub label: u64,
    pub signal: f64,
    pub locations: Vec<Vec<f64>>,
}

impl LabelCluster {
    pub fn size(&self) -> usize {
        self.locations.len()
    }
}

/// One cluster per distinct label, largest signal value first.
pub fn extract_clusters(points: &MarkedPointSet) -> Vec<LabelCluster> {
    let mut by_label: HashMap<u64, Vec<Vec<f64>>> = HashMap::new();
    for i in 0..points.count() {
        by_label
            .entry(points.labels[i])
            .or_default()
            .push(points.location(i).to_vec());
    }
    let mut out: Vec<LabelCluster> = by_label
        .into_iter()
        .map(|(label, locations)| LabelCluster {
            label,
            signal: points.signal_values[&label],
            locations,
        })
        .collect();
    out.sort_by(|a, b| b.signal.total_cmp(&a.signal).then(a.label.cmp(&b.label)));
    out
}

/// Per-box maximum of `ε_{Y_i}` (or `ε_{Y_i} Z_i` with noise) over the points in the box.
pub fn poisson_karlin_sup_measure(
    points: &MarkedPointSet,
    boxes: &[UnitBox],
    with_noise: bool,
) -> Result<Vec<f64>> {
    for b in boxes {
        b.check_dim(points.dim)?;
    }
    let mut out = vec![0.0f64; boxes.len()];
    for i in 0..points.count() {
        let s = points.sigma(i);
        let x = if with_noise { s * points.noise[i] } else { s };
        let u = points.location(i);
        for (m, b) in out.iter_mut().zip(boxes) {
            if x > *m && b.contains(u) {
                *m = x;
            }
        }
    }
    Ok(out)
}
