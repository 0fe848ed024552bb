//! Symmetric Fourier pair on uniform grids:
//! `𝓕B(k) = (2π)^{-1/2} ∫ e^{-ikx} B(x) dx` and `𝓕⁻¹B(k) = (2π)^{-1/2} ∫ e^{ikx} B(x) dx`.
//!
//! Sums are direct (no FFT): grids here are a few thousand nodes at most and the
//! node sets need not be FFT-compatible. Phases are advanced by complex rotation
//! and re-seeded with exact trig every [`RESEED`] nodes to bound drift.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

const RESEED: usize = 256;

/// Equispaced nodes `start + i·step`, `i < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Self {
        Self { start, step, len }
    }

    /// Midpoint grid with `len` cells covering `[lo, hi]`.
    pub fn midpoints(lo: f64, hi: f64, len: usize) -> Self {
        let step = (hi - lo) / len as f64;
        Self { start: lo + 0.5 * step, step, len }
    }

    /// Grid on `[lo, hi]` with spacing at most `max_step`, nodes at cell midpoints.
    pub fn covering(lo: f64, hi: f64, max_step: f64) -> Self {
        let len = ((hi - lo) / max_step).ceil().max(1.0) as usize;
        Self::midpoints(lo, hi, len)
    }

    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.at(i)).collect()
    }

    pub fn first(&self) -> f64 {
        self.start
    }

    pub fn last(&self) -> f64 {
        self.at(self.len.saturating_sub(1))
    }

    /// The grid dual under the discrete transform: `len` nodes, spacing
    /// `2π/(len·step)`, centered on zero at cell midpoints.
    pub fn dual(&self) -> UniformGrid {
        let dk = 2.0 * PI / (self.len as f64 * self.step);
        UniformGrid::midpoints(-0.5 * self.len as f64 * dk, 0.5 * self.len as f64 * dk, self.len)
    }
}

/// Writes `cos(k_j x)` and `sin(k_j x)` for `k_j = k0 + j·dk` into the buffers.
pub fn fill_phases(k0: f64, dk: f64, x: f64, cos_out: &mut [f64], sin_out: &mut [f64]) {
    debug_assert_eq!(cos_out.len(), sin_out.len());
    let (sd, cd) = (dk * x).sin_cos();
    let n = cos_out.len();
    let mut j = 0;
    while j < n {
        let (mut s, mut c) = ((k0 + j as f64 * dk) * x).sin_cos();
        let end = (j + RESEED).min(n);
        for jj in j..end {
            cos_out[jj] = c;
            sin_out[jj] = s;
            let c2 = c * cd - s * sd;
            s = s * cd + c * sd;
            c = c2;
        }
        j = end;
    }
}

/// `(2π)^{-1/2} Σ_l e^{σ i k x_l} B(x_l) dx` at each node of `k`, as (re, im) parts,
/// with `σ = sign`.
fn transform(values: &[f64], x: &UniformGrid, k: &UniformGrid, sign: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(values.len(), x.len, "values must live on the x-grid");
    let mut re = vec![0.0; k.len];
    let mut im = vec![0.0; k.len];
    let mut c = vec![0.0; k.len];
    let mut s = vec![0.0; k.len];
    for (l, &b) in values.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        fill_phases(k.start, k.step, x.at(l), &mut c, &mut s);
        for j in 0..k.len {
            re[j] += b * c[j];
            im[j] += b * s[j];
        }
    }
    let norm = x.step / (2.0 * PI).sqrt();
    for j in 0..k.len {
        re[j] *= norm;
        im[j] *= sign * norm;
    }
    (re, im)
}

/// Forward transform `𝓕B` of real samples.
pub fn forward(values: &[f64], x: &UniformGrid, k: &UniformGrid) -> (Vec<f64>, Vec<f64>) {
    transform(values, x, k, -1.0)
}

/// Inverse transform `𝓕⁻¹B` of real samples.
pub fn inverse(values: &[f64], x: &UniformGrid, k: &UniformGrid) -> (Vec<f64>, Vec<f64>) {
    transform(values, x, k, 1.0)
}

/// `Σ |B|² dx`.
pub fn l2_norm_sq(values: &[f64], step: f64) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>() * step
}

/// `Σ (re² + im²) dk`.
pub fn l2_norm_sq_complex(re: &[f64], im: &[f64], step: f64) -> f64 {
    re.iter().zip(im).map(|(a, b)| a * a + b * b).sum::<f64>() * step
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn phases_match_direct_trig() {
        let n = 1000;
        let mut c = vec![0.0; n];
        let mut s = vec![0.0; n];
        fill_phases(-12.3, 0.025, 3.7, &mut c, &mut s);
        for j in 0..n {
            let k = -12.3 + j as f64 * 0.025;
            assert!((c[j] - (k * 3.7).cos()).abs() < 1e-13);
            assert!((s[j] - (k * 3.7).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn gaussian_is_self_dual() {
        // 𝓕 e^{-x²/2} = e^{-k²/2} under the symmetric convention.
        let x = UniformGrid::midpoints(-12.0, 12.0, 600);
        let k = UniformGrid::midpoints(-6.0, 6.0, 121);
        let b: Vec<f64> = x.points().iter().map(|x| (-0.5 * x * x).exp()).collect();
        let (re, im) = forward(&b, &x, &k);
        for (j, kk) in k.points().iter().enumerate() {
            assert!((re[j] - (-0.5 * kk * kk).exp()).abs() < 1e-12);
            assert!(im[j].abs() < 1e-12);
        }
    }

    #[test]
    fn plancherel_on_dual_grids() {
        let x = UniformGrid::midpoints(-4.0, 4.0, 256);
        let k = x.dual();
        let b: Vec<f64> = x.points().iter().map(|x| (3.0 * x).sin() * (-x * x).exp() + 0.2 * x).collect();
        let (re, im) = forward(&b, &x, &k);
        assert_relative_eq!(l2_norm_sq(&b, x.step), l2_norm_sq_complex(&re, &im, k.step), max_relative = 1e-12);
    }

    #[test]
    fn covering_respects_max_step() {
        let g = UniformGrid::covering(-1.0, 2.0, 0.07);
        assert!(g.step <= 0.07);
        assert_relative_eq!(g.first() - 0.5 * g.step, -1.0, epsilon = 1e-14);
        assert_relative_eq!(g.last() + 0.5 * g.step, 2.0, epsilon = 1e-14);
    }
}
