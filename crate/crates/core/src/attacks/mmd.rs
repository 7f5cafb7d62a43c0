//! Maximum mean discrepancy between sets of prediction vectors, using a
//! Gaussian-type kernel `exp(-||y - y'||^e / (2 sigma^2))`.
//!
//! `e = 2` is the standard (characteristic) Gaussian kernel; `e = 1` keeps
//! the unsquared norm inside the exponential.

use accurate::sum::OnlineExactSum;
use accurate::traits::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::nn::PredictionVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median pairwise distance over the pooled inputs (1 if that is 0).
    MedianHeuristic,
}

impl Serialize for Bandwidth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bandwidth::Fixed(v) => s.serialize_f64(*v),
            Bandwidth::MedianHeuristic => s.serialize_str("median_heuristic"),
        }
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Bandwidth::Fixed(v)),
            Raw::Name(n) if n == "median_heuristic" => Ok(Bandwidth::MedianHeuristic),
            Raw::Name(n) => Err(serde::de::Error::custom(format!(
                "sigma must be a positive number or \"median_heuristic\", got {n:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmdConfig {
    pub sigma: Bandwidth,
    /// Power applied to the distance inside the exponential: 1 or 2.
    pub kernel_exponent: u8,
}

impl Default for MmdConfig {
    fn default() -> Self {
        MmdConfig { sigma: Bandwidth::MedianHeuristic, kernel_exponent: 2 }
    }
}

impl MmdConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.kernel_exponent, 1 | 2) {
            return Err(Error::arg(format!("kernel exponent must be 1 or 2, got {}", self.kernel_exponent)));
        }
        if let Bandwidth::Fixed(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::arg("sigma must be positive"));
            }
        }
        Ok(())
    }

    /// Resolves the bandwidth against the given pooled sets.
    pub fn kernel(&self, pools: &[&[PredictionVector]]) -> Result<GaussianKernel> {
        self.validate()?;
        let sigma = match self.sigma {
            Bandwidth::Fixed(s) => s,
            Bandwidth::MedianHeuristic => {
                let pooled: Vec<&PredictionVector> = pools.iter().flat_map(|p| p.iter()).collect();
                let m = median_pairwise_distance(&pooled);
                if m > 0.0 {
                    m
                } else {
                    1.0
                }
            }
        };
        Ok(GaussianKernel { sigma, exponent: self.kernel_exponent })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub sigma: f64,
    pub exponent: u8,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl GaussianKernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2 = sq_dist(a, b);
        let dist_term = if self.exponent == 2 { d2 } else { d2.sqrt() };
        (-dist_term / (2.0 * self.sigma * self.sigma)).exp()
    }

    fn sum_between(&self, a: &[PredictionVector], b: &[PredictionVector]) -> f64 {
        let mut acc = OnlineExactSum::zero();
        for x in a {
            for y in b {
                acc += self.eval(x.probs(), y.probs());
            }
        }
        acc.sum()
    }

    /// Sum of `k(x, x')` over all ordered pairs, diagonal included. Each
    /// off-diagonal value enters twice so the correctly rounded result
    /// equals `sum_between(a, a)` bit for bit.
    fn sum_within(&self, a: &[PredictionVector]) -> f64 {
        let mut acc = OnlineExactSum::zero();
        for i in 0..a.len() {
            acc += self.eval(a[i].probs(), a[i].probs());
            for j in (i + 1)..a.len() {
                let k = self.eval(a[i].probs(), a[j].probs());
                acc += k;
                acc += k;
            }
        }
        acc.sum()
    }
}

/// Median Euclidean distance over all unordered pairs; 0 with fewer than
/// two points.
pub fn median_pairwise_distance(points: &[&PredictionVector]) -> f64 {
    let mut d = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            d.push(sq_dist(points[i].probs(), points[j].probs()).sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, &mut upper, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if d.len() % 2 == 1 {
        upper
    } else {
        let lower = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Biased (V-statistic) squared MMD via the kernel trick:
/// `mean k(a,a) + mean k(b,b) - 2 mean k(a,b)`. The three kernel sums are
/// correctly rounded, so equal multisets give exactly 0 regardless of
/// order; otherwise the value can dip slightly below 0 from rounding.
pub fn mmd_squared(a: &[PredictionVector], b: &[PredictionVector], kernel: &GaussianKernel) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    kernel.sum_within(a) / (n * n) + kernel.sum_within(b) / (m * m) - 2.0 * kernel.sum_between(a, b) / (n * m)
}

/// `sqrt(max(0, MMD^2))`, bandwidth resolved over `a ∪ b`.
pub fn mmd(a: &[PredictionVector], b: &[PredictionVector], cfg: &MmdConfig) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::arg("mmd needs two nonempty sets"));
    }
    let kernel = cfg.kernel(&[a, b])?;
    Ok(mmd_squared(a, b, &kernel).max(0.0).sqrt())
}

/// Cached kernel sums for a fixed pair `(a, b)`, so that the distance after
/// appending one extra point to `a` costs `O(|a| + |b|)`.
#[derive(Debug, Clone)]
pub struct MmdReference<'a> {
    a: &'a [PredictionVector],
    b: &'a [PredictionVector],
    kernel: GaussianKernel,
    sum_aa: f64,
    sum_bb: f64,
    sum_ab: f64,
}

impl<'a> MmdReference<'a> {
    pub fn new(a: &'a [PredictionVector], b: &'a [PredictionVector], kernel: GaussianKernel) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::arg("mmd reference needs two nonempty sets"));
        }
        Ok(MmdReference {
            a,
            b,
            kernel,
            sum_aa: kernel.sum_within(a),
            sum_bb: kernel.sum_within(b),
            sum_ab: kernel.sum_between(a, b),
        })
    }

    fn combine(&self, saa: f64, sab: f64, n: f64) -> f64 {
        let m = self.b.len() as f64;
        let sq = saa / (n * n) + self.sum_bb / (m * m) - 2.0 * sab / (n * m);
        sq.max(0.0).sqrt()
    }

    pub fn distance(&self) -> f64 {
        self.combine(self.sum_aa, self.sum_ab, self.a.len() as f64)
    }

    /// MMD between `a ∪ {y}` and `b`.
    pub fn distance_with(&self, y: &PredictionVector) -> f64 {
        let k = &self.kernel;
        let ya: f64 = self.a.iter().map(|x| k.eval(x.probs(), y.probs())).sum();
        let yb: f64 = self.b.iter().map(|x| k.eval(x.probs(), y.probs())).sum();
        let saa = self.sum_aa + 2.0 * ya + k.eval(y.probs(), y.probs());
        self.combine(saa, self.sum_ab + yb, (self.a.len() + 1) as f64)
    }
}
