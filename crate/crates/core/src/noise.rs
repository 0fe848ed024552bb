//! Spectral Brownian-sheet increments and the stochastic integral they drive.
//!
//! Each spectral node carries two independent scalar Brownian increments (real
//! and imaginary part of the sheet) of variance `dk·dt`. Randomness is
//! counter-based: the increment for `(seed, lane, path, counter)` is always the
//! same, regardless of scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::fourier::fill_phases;
use crate::kernels::SpectralGrid;

/// Independent sub-streams of one path.
pub mod lane {
    pub const SHEET: u32 = 0;
    pub const IDIO: u32 = 1;
    pub const INIT: u32 = 2;
    pub const ARRATIA: u32 = 3;
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Replayable source of Gaussian draws for one path and lane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
    pub path_index: u64,
    pub counter: u64,
    pub lane: u32,
    pub antithetic: bool,
}

impl NoiseStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        Self { seed, path_index, counter: 0, lane: lane::SHEET, antithetic: false }
    }

    pub fn on_lane(mut self, lane: u32) -> Self {
        self.lane = lane;
        self
    }

    pub fn antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    /// Generator for the current counter, without advancing.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = splitmix(self.seed);
        h = splitmix(h ^ self.lane as u64);
        h = splitmix(h ^ self.path_index);
        h = splitmix(h ^ self.counter);
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            h = splitmix(h.wrapping_add(i as u64));
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Fills `out` with i.i.d. `N(0, 1)` draws and advances the counter.
    pub fn standard_normals(&mut self, out: &mut [f64]) {
        let mut rng = self.rng();
        let sign = if self.antithetic { -1.0 } else { 1.0 };
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = sign * z;
        }
        self.counter += 1;
    }

    /// One uniform `u64` for the current counter; advances the counter.
    pub fn next_u64(&mut self) -> u64 {
        let v = self.rng().next_u64();
        self.counter += 1;
        v
    }
}

/// One time step of sheet increments on the spectral grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetIncrement {
    pub dw_re: Vec<f64>,
    pub dw_im: Vec<f64>,
    pub dt: f64,
}

impl SheetIncrement {
    pub fn zeros(nodes: usize, dt: f64) -> Self {
        Self { dw_re: vec![0.0; nodes], dw_im: vec![0.0; nodes], dt }
    }

    pub fn len(&self) -> usize {
        self.dw_re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dw_re.is_empty()
    }
}

/// Draws one increment, real parts first then imaginary parts, and advances the stream.
pub fn sample_increment(stream: &mut NoiseStream, grid: &SpectralGrid, dt: f64) -> SheetIncrement {
    let mut inc = SheetIncrement::zeros(grid.len(), dt);
    sample_increment_into(stream, grid.dk, dt, &mut inc);
    inc
}

/// Allocation-free form of [`sample_increment`]; `inc` fixes the node count.
pub fn sample_increment_into(stream: &mut NoiseStream, dk: f64, dt: f64, inc: &mut SheetIncrement) {
    inc.dt = dt;
    let sd = (dk * dt).sqrt();
    let mut rng = stream.rng();
    let sign = if stream.antithetic { -sd } else { sd };
    for v in inc.dw_re.iter_mut().chain(inc.dw_im.iter_mut()) {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = sign * z;
    }
    stream.counter += 1;
}

/// `Δy_i = m_i^{-1/2} Σ_j f(k_j)[cos(k_j y_i) dW^re_j + sin(k_j y_i) dW^im_j]`.
pub fn apply_martingale_increment(y: &[f64], m: &[f64], grid: &SpectralGrid, inc: &SheetIncrement) -> Result<Vec<f64>> {
    if y.len() != m.len() {
        return Err(Error::Grid(format!("{} positions but {} masses", y.len(), m.len())));
    }
    if inc.len() != grid.len() {
        return Err(Error::Grid(format!("increment has {} nodes, grid has {}", inc.len(), grid.len())));
    }
    let mut out = vec![0.0; y.len()];
    let mut c = vec![0.0; grid.len()];
    let mut s = vec![0.0; grid.len()];
    for (i, (&yi, &mi)) in y.iter().zip(m).enumerate() {
        if !(mi > 0.0) {
            return Err(Error::MassDegeneracy { index: i, mass: mi });
        }
        if grid.is_empty() {
            continue;
        }
        fill_phases(grid.k0(), grid.dk, yi, &mut c, &mut s);
        let mut acc = 0.0;
        for j in 0..grid.len() {
            acc += grid.f[j] * (c[j] * inc.dw_re[j] + s[j] * inc.dw_im[j]);
        }
        out[i] = acc / mi.sqrt();
    }
    Ok(out)
}

/// Closed-form covariance of the increment at frozen `(y, m)`:
/// `dt · Σ_j f²(k_j) cos(k_j (y_i − y_l)) dk / √(m_i m_l)`.
pub fn increment_covariance(y: &[f64], m: &[f64], grid: &SpectralGrid, dt: f64) -> Vec<Vec<f64>> {
    let n = y.len();
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        for l in i..n {
            let v = dt * grid.covariance_kernel(y[i] - y[l]) / (m[i] * m[l]).sqrt();
            cov[i][l] = v;
            cov[l][i] = v;
        }
    }
    cov
}

/// Coefficient rows of the increment as a linear form in the `2·nodes`
/// independent Gaussians `(dW^re, dW^im)`, each of variance `dk·dt`.
pub fn increment_coefficients(y: &[f64], m: &[f64], grid: &SpectralGrid) -> Vec<Vec<f64>> {
    let nk = grid.len();
    y.iter()
        .zip(m)
        .map(|(&yi, &mi)| {
            let mut row = vec![0.0; 2 * nk];
            let w = mi.sqrt().recip();
            for j in 0..nk {
                let (s, c) = (grid.k[j] * yi).sin_cos();
                row[j] = w * grid.f[j] * c;
                row[nk + j] = w * grid.f[j] * s;
            }
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::SpectralDecay;
    use approx::assert_relative_eq;

    fn grid() -> SpectralGrid {
        SpectralDecay::new(2.0, 4.0, 0.5).grid()
    }

    #[test]
    fn zero_dt_gives_zero_increment() {
        let mut s = NoiseStream::new(1, 0);
        let inc = sample_increment(&mut s, &grid(), 0.0);
        assert!(inc.dw_re.iter().chain(&inc.dw_im).all(|v| *v == 0.0));
        assert_eq!(s.counter, 1);
    }

    #[test]
    fn replay_is_bit_exact() {
        let g = grid();
        let mut a = NoiseStream::new(42, 7);
        let mut b = NoiseStream::new(42, 7);
        for _ in 0..5 {
            assert_eq!(sample_increment(&mut a, &g, 0.01), sample_increment(&mut b, &g, 0.01));
        }
        let mut c = NoiseStream::new(42, 8);
        let mut d = NoiseStream::new(42, 7);
        assert_ne!(sample_increment(&mut c, &g, 0.01), sample_increment(&mut d, &g, 0.01));
    }

    #[test]
    fn lanes_are_distinct_and_antithetic_negates() {
        let g = grid();
        let base = NoiseStream::new(3, 1);
        let a = sample_increment(&mut base.clone(), &g, 0.1);
        let b = sample_increment(&mut base.clone().on_lane(lane::IDIO), &g, 0.1);
        assert_ne!(a, b);
        let c = sample_increment(&mut base.clone().antithetic(true), &g, 0.1);
        for (x, y) in a.dw_re.iter().zip(&c.dw_re) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn increment_moments() {
        let g = SpectralDecay::new(2.0, 1.0, 0.5).grid();
        let dt = 0.01;
        let draws = 100_000;
        let mut s = NoiseStream::new(11, 0);
        let nk = g.len();
        let mut sum = vec![0.0; 2 * nk];
        let mut sq = vec![0.0; 2 * nk];
        let mut inc = SheetIncrement::zeros(nk, dt);
        for _ in 0..draws {
            sample_increment_into(&mut s, g.dk, dt, &mut inc);
            for (j, v) in inc.dw_re.iter().chain(&inc.dw_im).enumerate() {
                sum[j] += v;
                sq[j] += v * v;
            }
        }
        let var = g.dk * dt;
        for j in 0..2 * nk {
            let mean = sum[j] / draws as f64;
            assert!(mean.abs() < 4.0 * (var / draws as f64).sqrt());
            assert_relative_eq!(sq[j] / draws as f64, var, max_relative = 0.05);
        }
    }

    #[test]
    fn empty_grid_gives_zero_martingale() {
        let g = SpectralDecay::silent().grid();
        let inc = SheetIncrement::zeros(0, 0.1);
        let d = apply_martingale_increment(&[0.0, 1.0], &[1.0, 1.0], &g, &inc).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
    }

    #[test]
    fn equal_particles_move_together() {
        let g = grid();
        let inc = sample_increment(&mut NoiseStream::new(5, 0), &g, 0.1);
        let d = apply_martingale_increment(&[0.3, 0.3, 1.0], &[0.7, 0.7, 0.7], &g, &inc).unwrap();
        assert_eq!(d[0], d[1]);
    }

    #[test]
    fn non_positive_mass_is_rejected() {
        let g = grid();
        let inc = SheetIncrement::zeros(g.len(), 0.1);
        let err = apply_martingale_increment(&[0.0, 1.0], &[1.0, 0.0], &g, &inc).unwrap_err();
        assert!(matches!(err, Error::MassDegeneracy { index: 1, .. }));
    }

    #[test]
    fn linear_form_matches_kernel_sum() {
        let g = SpectralDecay::new(2.5, 6.0, 0.1).grid();
        let y = [-0.4, 0.1, 0.35, 1.2];
        let m = [0.8, 1.1, 0.95, 0.6];
        let dt = 0.003;
        let rows = increment_coefficients(&y, &m, &g);
        let cov = increment_covariance(&y, &m, &g, dt);
        for i in 0..4 {
            for l in 0..4 {
                let direct: f64 = rows[i].iter().zip(&rows[l]).map(|(a, b)| a * b).sum::<f64>() * g.dk * dt;
                assert!((direct - cov[i][l]).abs() < 1e-13 * cov[i][i]);
            }
        }
    }
}
