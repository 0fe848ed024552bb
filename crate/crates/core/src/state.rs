//! Quantile states, mass functions, histograms and the distances between them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::MassKernel;

/// Quantile function sampled at the midpoint grid `u_i = (i + ½)/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileState {
    pub values: Vec<f64>,
    pub monotone: bool,
}

impl QuantileState {
    pub fn new(values: Vec<f64>) -> Self {
        let monotone = values.windows(2).all(|w| w[0] <= w[1]);
        Self { values, monotone }
    }

    /// Samples `g` at the grid nodes.
    pub fn from_fn(n: usize, g: impl Fn(f64) -> f64) -> Self {
        Self::new((0..n).map(|i| g(grid_node(i, n))).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn u(&self, i: usize) -> f64 {
        grid_node(i, self.n())
    }

    /// `y(u_{n−1}) − y(u_0)`.
    pub fn spread(&self) -> f64 {
        match (self.values.first(), self.values.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn grid_node(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// `m_i = (1/n) Σ_l φ(y_i − y_l)`. Tabulated kernels clamp beyond their last sample.
pub fn mass_function(y: &[f64], kernel: &MassKernel) -> Vec<f64> {
    let n = y.len();
    if kernel.is_constant() {
        return vec![1.0; n];
    }
    let (self_term, _) = kernel.value_and_slope(0.0);
    let mut m = vec![self_term; n];
    for i in 0..n {
        for l in (i + 1)..n {
            let (v, _) = kernel.value_and_slope(y[i] - y[l]);
            m[i] += v;
            m[l] += v;
        }
    }
    let inv = 1.0 / n as f64;
    m.iter_mut().for_each(|v| *v *= inv);
    m
}

/// Mass and its spatial slope `m_i` and `(1/n) Σ_l φ'(y_i − y_l)`.
pub fn mass_and_slope(y: &[f64], kernel: &MassKernel) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    if kernel.is_constant() {
        return (vec![1.0; n], vec![0.0; n]);
    }
    let (self_term, _) = kernel.value_and_slope(0.0);
    let mut m = vec![self_term; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        for l in (i + 1)..n {
            let (v, s) = kernel.value_and_slope(y[i] - y[l]);
            m[i] += v;
            m[l] += v;
            // φ' is odd
            d[i] += s;
            d[l] -= s;
        }
    }
    let inv = 1.0 / n as f64;
    m.iter_mut().for_each(|v| *v *= inv);
    d.iter_mut().for_each(|v| *v *= inv);
    (m, d)
}

/// `((1/n) Σ (a_i − b_i)²)^{1/2}`, the W₂ distance of the two quantile states.
pub fn w2_distance(a: &QuantileState, b: &QuantileState) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::Grid(format!("quantile states of size {} and {}", a.n(), b.n())));
    }
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((s / a.n() as f64).sqrt())
}

/// Adjacent inversions `y_{i+1} < y_i`: their count and largest size.
pub fn monotonicity_report(y: &[f64]) -> (usize, f64) {
    y.windows(2).fold((0, 0.0), |(c, m), w| {
        let gap = w[0] - w[1];
        if gap > 0.0 {
            (c + 1, f64::max(m, gap))
        } else {
            (c, m)
        }
    })
}

/// Pool-adjacent-violators: the closest non-decreasing vector in equal-weight L₂.
pub fn isotonic_project(y: &QuantileState) -> QuantileState {
    let mut v = y.values.clone();
    isotonic_in_place(&mut v);
    QuantileState { values: v, monotone: true }
}

/// In-place PAV; a no-op on sorted input.
pub fn isotonic_in_place(y: &mut [f64]) {
    if y.windows(2).all(|w| w[0] <= w[1]) {
        return;
    }
    // blocks of (sum, count)
    let mut sums: Vec<f64> = Vec::with_capacity(y.len());
    let mut counts: Vec<usize> = Vec::with_capacity(y.len());
    for &v in y.iter() {
        sums.push(v);
        counts.push(1);
        while sums.len() > 1 {
            let k = sums.len();
            if sums[k - 2] / counts[k - 2] as f64 > sums[k - 1] / counts[k - 1] as f64 {
                let s = sums.pop().unwrap();
                let c = counts.pop().unwrap();
                sums[k - 2] += s;
                counts[k - 2] += c;
            } else {
                break;
            }
        }
    }
    let mut i = 0;
    for (s, c) in sums.iter().zip(&counts) {
        let mean = s / *c as f64;
        y[i..i + c].iter_mut().for_each(|v| *v = mean);
        i += c;
    }
}

/// Shared bin partition of `[x_min, x_max]`; values outside land in the end bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinLayout {
    pub x_min: f64,
    pub x_max: f64,
    pub bins: usize,
}

impl BinLayout {
    pub fn new(x_min: f64, x_max: f64, bins: usize) -> Self {
        Self { x_min, x_max, bins }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max) || self.bins == 0 {
            return Err(Error::Config(format!(
                "bin layout needs x_min < x_max and bins > 0, got [{}, {}] with {}",
                self.x_min, self.x_max, self.bins
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.x_max - self.x_min) / self.bins as f64
    }

    #[inline]
    pub fn index(&self, x: f64) -> usize {
        let t = ((x - self.x_min) / self.width()).floor();
        if t < 0.0 || t.is_nan() {
            0
        } else {
            (t as usize).min(self.bins - 1)
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins).map(|b| self.x_min + b as f64 * self.width()).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|b| self.x_min + (b as f64 + 0.5) * self.width()).collect()
    }
}

/// Probability vector on a fixed partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramMeasure {
    pub edges: Vec<f64>,
    pub probs: Vec<f64>,
}

impl HistogramMeasure {
    pub fn from_probs(edges: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if edges.len() != probs.len() + 1 {
            return Err(Error::Grid(format!("{} edges for {} bins", edges.len(), probs.len())));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Domain("negative bin probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("bin probabilities sum to {total}")));
        }
        Ok(Self { edges, probs })
    }

    /// Empirical histogram of equally weighted samples.
    pub fn from_samples(layout: &BinLayout, samples: &[f64]) -> Self {
        let mut counts = vec![0usize; layout.bins];
        for &x in samples {
            counts[layout.index(x)] += 1;
        }
        let w = 1.0 / samples.len().max(1) as f64;
        Self { edges: layout.edges(), probs: counts.iter().map(|&c| c as f64 * w).collect() }
    }

    /// Uniform probabilities over the layout's bins.
    pub fn uniform(layout: &BinLayout) -> Self {
        Self { edges: layout.edges(), probs: vec![1.0 / layout.bins as f64; layout.bins] }
    }

    /// All mass in bin `b`.
    pub fn point_mass(layout: &BinLayout, b: usize) -> Self {
        let mut probs = vec![0.0; layout.bins];
        probs[b] = 1.0;
        Self { edges: layout.edges(), probs }
    }

    /// `(1 − w)·self + w·other`.
    pub fn mix(&self, other: &HistogramMeasure, w: f64) -> HistogramMeasure {
        let probs = self.probs.iter().zip(&other.probs).map(|(a, b)| (1.0 - w) * a + w * b).collect();
        HistogramMeasure { edges: self.edges.clone(), probs }
    }

    pub fn bins(&self) -> usize {
        self.probs.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    fn same_bins(&self, other: &HistogramMeasure) -> Result<()> {
        if self.edges.len() != other.edges.len() || self.edges.iter().zip(&other.edges).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs())) {
            return Err(Error::Grid("histograms live on different bins".into()));
        }
        Ok(())
    }
}

/// `Σ_b |p_b − q_b|`. This is the factor-2 convention: disjoint measures are at
/// distance 2, and the maximal-coupling mismatch probability is half of it.
pub fn tv_distance(p: &HistogramMeasure, q: &HistogramMeasure) -> Result<f64> {
    p.same_bins(q)?;
    Ok(p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).sum())
}

/// Piecewise-linear CDF through `(y_i, u_i)` with half-cell tails, and its
/// piecewise-constant derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    /// Breakpoints `e_left, y_0, …, y_{n−1}, e_right`.
    pub x: Vec<f64>,
    /// Density on each of the `n + 1` intervals between breakpoints.
    pub p: Vec<f64>,
    /// CDF at each breakpoint: `0, u_0, …, u_{n−1}, 1`.
    pub cdf: Vec<f64>,
}

impl DensityEstimate {
    /// `Σ p·Δx`; one up to rounding by construction.
    pub fn integral(&self) -> f64 {
        self.p.iter().zip(self.x.windows(2)).map(|(p, w)| p * (w[1] - w[0])).sum()
    }

    pub fn density_at(&self, x: f64) -> f64 {
        if x < self.x[0] || x > *self.x.last().unwrap() {
            return 0.0;
        }
        let i = self.x.partition_point(|v| *v <= x).clamp(1, self.p.len());
        self.p[i - 1]
    }

    pub fn cdf_at(&self, x: f64) -> f64 {
        if x <= self.x[0] {
            return 0.0;
        }
        if x >= *self.x.last().unwrap() {
            return 1.0;
        }
        let i = self.x.partition_point(|v| *v <= x);
        let (x0, x1) = (self.x[i - 1], self.x[i]);
        let (f0, f1) = (self.cdf[i - 1], self.cdf[i]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }
}

/// Density of `Leb ∘ y⁻¹`: `1/∂_u y` by finite differences between nodes.
pub fn density_from_quantile(y: &QuantileState) -> Result<DensityEstimate> {
    let n = y.n();
    if n < 2 {
        return Err(Error::DegenerateQuantile { index: 0 });
    }
    let v = &y.values;
    for i in 0..n - 1 {
        if !(v[i + 1] > v[i]) {
            return Err(Error::DegenerateQuantile { index: i + 1 });
        }
    }
    let mut x = Vec::with_capacity(n + 2);
    x.push(v[0] - 0.5 * (v[1] - v[0]));
    x.extend_from_slice(v);
    x.push(v[n - 1] + 0.5 * (v[n - 1] - v[n - 2]));
    let mut cdf = Vec::with_capacity(n + 2);
    cdf.push(0.0);
    cdf.extend((0..n).map(|i| grid_node(i, n)));
    cdf.push(1.0);
    let p = x.windows(2).zip(cdf.windows(2)).map(|(xw, fw)| (fw[1] - fw[0]) / (xw[1] - xw[0])).collect();
    Ok(DensityEstimate { x, p, cdf })
}

/// Read access to a probability measure on ℝ carried by weighted atoms.
pub trait MeasureView {
    /// Calls `visit(x, weight)` for every atom; weights sum to one.
    fn for_each_atom(&self, visit: &mut dyn FnMut(f64, f64));

    /// `∫ g dμ`.
    fn expect(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_atom(&mut |x, w| acc += w * g(x));
        acc
    }

    /// `μ([lo, hi))`.
    fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.expect(&|x| if x >= lo && x < hi { 1.0 } else { 0.0 })
    }

    fn histogram(&self, layout: &BinLayout) -> HistogramMeasure {
        let mut probs = vec![0.0; layout.bins];
        self.for_each_atom(&mut |x, w| probs[layout.index(x)] += w);
        HistogramMeasure { edges: layout.edges(), probs }
    }

    fn mean(&self) -> f64 {
        self.expect(&|x| x)
    }

    fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(&|x| (x - m) * (x - m))
    }
}

impl MeasureView for [f64] {
    fn for_each_atom(&self, visit: &mut dyn FnMut(f64, f64)) {
        let w = 1.0 / self.len() as f64;
        for &x in self {
            visit(x, w);
        }
    }

    fn expect(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        self.iter().map(|&x| g(x)).sum::<f64>() / self.len() as f64
    }

    fn histogram(&self, layout: &BinLayout) -> HistogramMeasure {
        HistogramMeasure::from_samples(layout, self)
    }
}

impl<T: MeasureView + ?Sized> MeasureView for &T {
    fn for_each_atom(&self, visit: &mut dyn FnMut(f64, f64)) {
        (**self).for_each_atom(visit)
    }

    fn expect(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        (**self).expect(g)
    }

    fn histogram(&self, layout: &BinLayout) -> HistogramMeasure {
        (**self).histogram(layout)
    }
}

impl MeasureView for QuantileState {
    fn for_each_atom(&self, visit: &mut dyn FnMut(f64, f64)) {
        self.values.for_each_atom(visit)
    }

    fn expect(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        self.values.expect(g)
    }

    fn histogram(&self, layout: &BinLayout) -> HistogramMeasure {
        self.values.histogram(layout)
    }
}

/// Bins act as point masses at their centers.
impl MeasureView for HistogramMeasure {
    fn for_each_atom(&self, visit: &mut dyn FnMut(f64, f64)) {
        for (w, p) in self.edges.windows(2).zip(&self.probs) {
            visit(0.5 * (w[0] + w[1]), *p);
        }
    }
}
