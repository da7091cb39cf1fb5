//! Axis-aligned boxes in the unit cube.
//!
//! Intervals are half-open `[lo, hi)` except that an upper end of exactly 1 is
//! closed, so a partition of `[0,1]` counts every point once.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi <= 1.0 && lo < hi) {
            return Err(Error::MalformedBox(format!(
                "interval [{lo}, {hi}) must satisfy 0 <= lo < hi <= 1"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && (x < self.hi || (self.hi == 1.0 && x <= 1.0))
    }

    /// Observation indices `i` in `1..=n` whose location `i/n` lies in the interval,
    /// as an inclusive range; `None` when there are none.
    pub fn index_range(&self, n: u64) -> Option<(u64, u64)> {
        let nf = n as f64;
        let at = |i: u64| i as f64 / nf;
        let mut first = ((self.lo * nf).ceil() as u64).max(1);
        while first > 1 && self.contains(at(first - 1)) {
            first -= 1;
        }
        while first <= n && at(first) < self.lo {
            first += 1;
        }
        let mut last = ((self.hi * nf).floor() as u64).min(n);
        while last < n && self.contains(at(last + 1)) {
            last += 1;
        }
        while last >= first && last >= 1 && !self.contains(at(last)) {
            last -= 1;
        }
        if first > n || last < first {
            None
        } else {
            Some((first, last))
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::MalformedBox(format!("expected lo:hi, got {s:?}")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::MalformedBox(format!("bad number {t:?} in {s:?}")))
        };
        Interval::new(parse(a)?, parse(b)?)
    }
}

/// Product of intervals, one per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitBox {
    pub sides: Vec<Interval>,
}

impl UnitBox {
    pub fn new(sides: Vec<Interval>) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::MalformedBox("box needs at least one side".into()));
        }
        Ok(Self { sides })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Ok(Self {
            sides: vec![Interval::new(lo, hi)?],
        })
    }

    pub fn full(dim: usize) -> Self {
        Self {
            sides: vec![Interval::unit(); dim.max(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.sides.iter().map(Interval::length).product()
    }

    #[inline]
    pub fn contains(&self, p: &[f64]) -> bool {
        self.sides.iter().zip(p).all(|(s, &x)| s.contains(x))
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::MalformedBox(format!(
                "box has dimension {}, expected {dim}",
                self.dim()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for UnitBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sides.iter().enumerate() {
            if i > 0 {
                f.write_str("x")?;
            }
            write!(f, "[{},{}", s.lo, s.hi)?;
            f.write_str(if s.hi == 1.0 { "]" } else { ")" })?;
        }
        Ok(())
    }
}

/// Parses a box list.
///
/// One dimension: `"0:0.5,0.5:1"`. Several dimensions: one comma-separated
/// group per axis, groups separated by `;`, and box `j` takes the `j`-th
/// interval of every group. A group holding a single interval applies to all
/// boxes.
pub fn parse_boxes(spec: &str, dim: usize) -> Result<Vec<UnitBox>> {
    if dim == 0 {
        return Err(Error::MalformedBox("dimension must be at least 1".into()));
    }
    let groups: Vec<Vec<Interval>> = spec
        .split(';')
        .map(|g| {
            g.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(str::parse)
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    if groups.len() != dim {
        return Err(Error::MalformedBox(format!(
            "{} interval groups given for dimension {dim}",
            groups.len()
        )));
    }
    let count = groups.iter().map(Vec::len).max().unwrap_or(0);
    if count == 0 {
        return Err(Error::MalformedBox("empty box list".into()));
    }
    for g in &groups {
        if g.len() != count && g.len() != 1 {
            return Err(Error::MalformedBox(format!(
                "interval groups have {} and {count} entries",
                g.len()
            )));
        }
    }
    Ok((0..count)
        .map(|j| UnitBox {
            sides: groups
                .iter()
                .map(|g| if g.len() == 1 { g[0] } else { g[j] })
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_open_with_closed_top() {
        let a = Interval::new(0.0, 0.5).unwrap();
        let b = Interval::new(0.5, 1.0).unwrap();
        assert!(a.contains(0.0) && !a.contains(0.5));
        assert!(b.contains(0.5) && b.contains(1.0));
    }

    #[test]
    fn rejects_malformed() {
        assert!(Interval::new(0.5, 0.5).is_err());
        assert!(Interval::new(-0.1, 0.5).is_err());
        assert!(Interval::new(0.2, 1.1).is_err());
        assert!(Interval::new(f64::NAN, 0.5).is_err());
        assert!("0.3".parse::<Interval>().is_err());
        assert!("a:1".parse::<Interval>().is_err());
    }

    #[test]
    fn index_ranges_follow_i_over_n() {
        let a = Interval::new(0.0, 0.5).unwrap();
        assert_eq!(a.index_range(2), None);
        assert_eq!(Interval::unit().index_range(2), Some((1, 2)));
        assert_eq!(Interval::new(0.5, 1.0).unwrap().index_range(2), Some((1, 2)));
        assert_eq!(Interval::new(0.3, 0.7).unwrap().index_range(10), Some((3, 6)));
        for n in [1u64, 3, 7, 10, 97, 1000] {
            for &(lo, hi) in &[(0.0, 0.25), (0.1, 0.3), (0.25, 1.0), (0.3, 0.7), (0.999, 1.0)] {
                let iv = Interval::new(lo, hi).unwrap();
                let brute: Vec<u64> = (1..=n).filter(|&i| iv.contains(i as f64 / n as f64)).collect();
                match iv.index_range(n) {
                    None => assert!(brute.is_empty()),
                    Some((f, l)) => assert_eq!(brute, (f..=l).collect::<Vec<_>>()),
                }
            }
        }
    }

    #[test]
    fn parse_one_and_two_dims() {
        let b = parse_boxes("0:0.5,0.5:1", 1).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[1].measure(), 0.5);
        let b = parse_boxes("0:0.5,0.5:1;0:0.5", 2).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].measure(), 0.25);
        assert!(b[1].contains(&[0.7, 0.2]));
        assert!(parse_boxes("0:0.5,0.5:1;0:0.2,0.2:0.4,0.4:1", 2).is_err());
        assert!(parse_boxes("0:1", 2).is_err());
        assert!(parse_boxes("", 1).is_err());
    }
}
