//! Spectral decay `f_α`, mass kernels `φ`/`φ_M`, the smooth cutoff `η_{a,b}`,
//! and the covariance kernel `Re 𝓕(f²)`.
//!
//! Two Fourier conventions coexist in this crate and are kept apart on purpose:
//!
//! - the covariance kernel [`fourier_f_squared`] is the raw integral
//!   `∫ f²(k) cos(kx) dk` with no normalization;
//! - the transform pair in [`fourier`] is symmetric, with a `1/√(2π)` factor in
//!   both directions, so that Plancherel holds with constant one.
//!
//! Hence `fourier_f_squared(x) = √(2π) · Re 𝓕_sym(f²)(x)`.

pub mod fourier;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Japanese bracket `⟨k⟩ = (1 + k²)^{1/2}`.
#[inline]
pub fn bracket(k: f64) -> f64 {
    (1.0 + k * k).sqrt()
}

/// Spectral kernel `f(k) = scale · (1 + k²)^{-α/2}` truncated to `[-k_max, k_max]`
/// and discretized on the midpoint grid `k_j = -k_max + (j + ½)·dk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralDecay {
    pub alpha: f64,
    pub k_max: f64,
    pub dk: f64,
    /// Overall amplitude of `f`; `0` switches the noise off.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl SpectralDecay {
    pub fn new(alpha: f64, k_max: f64, dk: f64) -> Self {
        Self { alpha, k_max, dk, scale: 1.0 }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// `f ≡ 0`: an empty spectral grid.
    pub fn silent() -> Self {
        Self { alpha: 2.0, k_max: 0.0, dk: 1.0, scale: 1.0 }
    }

    pub fn node_count(&self) -> usize {
        if self.k_max <= 0.0 {
            return 0;
        }
        (2.0 * self.k_max / self.dk).round() as usize
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|j| -self.k_max + (j as f64 + 0.5) * self.dk)
            .collect()
    }

    /// Checks the grid invariants. `alpha > 3/2` is required only by
    /// [`SpectralDecay::validate_for_dynamics`].
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.dk > 0.0) || !self.dk.is_finite() {
            return Err(Error::Config(format!("dk must be positive, got {}", self.dk)));
        }
        if self.k_max < 0.0 || !self.k_max.is_finite() {
            return Err(Error::Config(format!("k_max must be non-negative, got {}", self.k_max)));
        }
        if !(self.scale >= 0.0) || !self.scale.is_finite() {
            return Err(Error::Config(format!("scale must be non-negative, got {}", self.scale)));
        }
        if self.k_max > 0.0 {
            let ratio = self.k_max / self.dk;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                return Err(Error::Config(format!(
                    "k_max/dk must be an integer, got {} / {} = {ratio}",
                    self.k_max, self.dk
                )));
            }
        }
        Ok(())
    }

    pub fn validate_for_dynamics(&self) -> Result<()> {
        self.validate()?;
        if self.node_count() > 0 && self.scale > 0.0 && self.alpha <= 1.5 {
            return Err(Error::Config(format!(
                "alpha must exceed 3/2 to drive the dynamics, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Fraction of `∫ f²` lying outside `[-k_max, k_max]`, by adaptive quadrature
    /// of the tail after the substitution `k = k_max / s`.
    pub fn tail_fraction(&self) -> f64 {
        let a = self.alpha;
        let f2 = |k: f64| (1.0 + k * k).powf(-a);
        let total = 2.0 * simpson(&|s: f64| f2(s.tan()) / s.cos().powi(2), 0.0, std::f64::consts::FRAC_PI_2, 1e-12);
        let km = self.k_max;
        if km <= 0.0 {
            return 1.0;
        }
        // ∫_{km}^∞ f²(k) dk = ∫_0^1 f²(km/s) km/s² ds
        let tail = 2.0 * simpson(
            &|s: f64| {
                if s <= 0.0 {
                    0.0
                } else {
                    f2(km / s) * km / (s * s)
                }
            },
            0.0,
            1.0,
            1e-14,
        );
        tail / total
    }

    /// Smallest `k_max` (a multiple of `dk`) whose tail fraction is below `tol`.
    pub fn k_max_for_tail(alpha: f64, dk: f64, tol: f64) -> f64 {
        let mut k = dk;
        loop {
            let d = SpectralDecay::new(alpha, k, dk);
            if d.tail_fraction() < tol || k > 1e6 {
                return k;
            }
            k += dk * (k / dk / 8.0).ceil();
        }
    }

    pub fn grid(&self) -> SpectralGrid {
        SpectralGrid::new(self)
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `f_α(k)` including the amplitude.
pub fn eval_f(decay: &SpectralDecay, k: f64) -> f64 {
    decay.scale * (1.0 + k * k).powf(-0.5 * decay.alpha)
}

/// Precomputed spectral nodes and kernel values.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    pub k: Vec<f64>,
    pub f: Vec<f64>,
    pub dk: f64,
}

impl SpectralGrid {
    pub fn new(decay: &SpectralDecay) -> Self {
        let k = if decay.scale == 0.0 { Vec::new() } else { decay.nodes() };
        let f = k.iter().map(|&k| eval_f(decay, k)).collect();
        Self { k, f, dk: decay.dk }
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// First node, or 0 on an empty grid.
    pub fn k0(&self) -> f64 {
        self.k.first().copied().unwrap_or(0.0)
    }

    /// Discrete `‖f‖² = Σ f²(k_j) dk`.
    pub fn f_norm_sq(&self) -> f64 {
        self.f.iter().map(|f| f * f).sum::<f64>() * self.dk
    }

    /// `Σ k_j² f²(k_j) dk`, the Lipschitz scale of the diffusion coefficient.
    pub fn k2_f_norm_sq(&self) -> f64 {
        self.k.iter().zip(&self.f).map(|(k, f)| k * k * f * f).sum::<f64>() * self.dk
    }

    /// Discrete covariance kernel `Σ_j f²(k_j) cos(k_j x) dk`.
    pub fn covariance_kernel(&self, x: f64) -> f64 {
        self.k
            .iter()
            .zip(&self.f)
            .map(|(k, f)| f * f * (k * x).cos())
            .sum::<f64>()
            * self.dk
    }

    /// Stability heuristic `dt ≤ 0.1 / Σ k² f² dk`.
    pub fn max_stable_dt(&self) -> f64 {
        let s = self.k2_f_norm_sq();
        if s > 0.0 {
            0.1 / s
        } else {
            f64::INFINITY
        }
    }
}

/// `Re 𝓕(f²)(x)` by the midpoint Riemann sum on the truncated grid (raw convention).
pub fn fourier_f_squared(decay: &SpectralDecay, x: f64) -> f64 {
    SpectralGrid::new(decay).covariance_kernel(x)
}

/// Mass kernel `φ`: even, positive, non-increasing on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum MassKernel {
    Constant,
    /// Centered Gaussian density with standard deviation `scale`.
    Gaussian { scale: f64 },
    /// `φ_M(x) = φ(min(|x|, M))` for the Gaussian of the given scale.
    TruncatedGaussian {
        scale: f64,
        #[serde(alias = "M")]
        m: f64,
    },
    /// Samples `(x_i, φ(x_i))` on `x ≥ 0`, linearly interpolated and reflected.
    Tabulated { samples: Vec<(f64, f64)> },
}

impl MassKernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            MassKernel::Constant => Ok(()),
            MassKernel::Gaussian { scale } => positive("phi.scale", *scale),
            MassKernel::TruncatedGaussian { scale, m } => {
                positive("phi.scale", *scale)?;
                positive("phi.M", *m)
            }
            MassKernel::Tabulated { samples } => {
                if samples.len() < 2 {
                    return Err(Error::Config("tabulated kernel needs at least two samples".into()));
                }
                if samples[0].0 != 0.0 {
                    return Err(Error::Config("tabulated kernel must start at x = 0".into()));
                }
                for w in samples.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::Config("tabulated abscissae must increase".into()));
                    }
                    if w[1].1 > w[0].1 {
                        return Err(Error::Config("tabulated kernel must be non-increasing".into()));
                    }
                }
                if samples.iter().any(|s| !(s.1 > 0.0)) {
                    return Err(Error::Config("tabulated kernel must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// True when `φ ≡ 1`, which lets callers skip the O(n²) mass sum.
    pub fn is_constant(&self) -> bool {
        matches!(self, MassKernel::Constant)
    }

    /// The same kernel truncated at `M`: `φ_M(x) = φ(min(|x|, M))`.
    pub fn truncated(&self, m: f64) -> MassKernel {
        match self {
            MassKernel::Gaussian { scale } => MassKernel::TruncatedGaussian { scale: *scale, m },
            MassKernel::TruncatedGaussian { scale, m: m0 } => MassKernel::TruncatedGaussian { scale: *scale, m: m.min(*m0) },
            MassKernel::Constant => MassKernel::Constant,
            MassKernel::Tabulated { samples } => {
                let mut out: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.0 < m).collect();
                let at_m = tabulated(samples, m.min(samples.last().unwrap().0));
                out.push((m, at_m));
                out.push((m + 1e12, at_m));
                MassKernel::Tabulated { samples: out }
            }
        }
    }

    /// `φ(x)`; errors only for tabulated kernels queried outside their range.
    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            MassKernel::Tabulated { samples } => {
                let ax = x.abs();
                let last = samples.last().map(|s| s.0).unwrap_or(0.0);
                if !(ax <= last) {
                    return Err(Error::Domain(format!("tabulated kernel queried at |x| = {ax} beyond {last}")));
                }
                Ok(tabulated(samples, ax))
            }
            _ => Ok(self.eval_closed(x)),
        }
    }

    #[inline]
    fn eval_closed(&self, x: f64) -> f64 {
        match self {
            MassKernel::Constant => 1.0,
            MassKernel::Gaussian { scale } => gaussian(x, *scale),
            MassKernel::TruncatedGaussian { scale, m } => {
                let ax = x.abs();
                gaussian(if ax < *m { x } else { *m }, *scale)
            }
            MassKernel::Tabulated { samples } => tabulated(samples, x.abs()),
        }
    }

    /// `(φ(x), φ'(x))`. Tabulated kernels clamp to their last sample here.
    #[inline]
    pub fn value_and_slope(&self, x: f64) -> (f64, f64) {
        match self {
            MassKernel::Constant => (1.0, 0.0),
            MassKernel::Gaussian { scale } => {
                let v = gaussian(x, *scale);
                (v, -x / (scale * scale) * v)
            }
            MassKernel::TruncatedGaussian { scale, m } => {
                if x.abs() < *m {
                    let v = gaussian(x, *scale);
                    (v, -x / (scale * scale) * v)
                } else {
                    (gaussian(*m, *scale), 0.0)
                }
            }
            MassKernel::Tabulated { samples } => {
                let ax = x.abs();
                let v = tabulated(samples, ax);
                let slope = match samples.windows(2).find(|w| ax >= w[0].0 && ax < w[1].0) {
                    Some(w) => (w[1].1 - w[0].1) / (w[1].0 - w[0].0),
                    None => 0.0,
                };
                (v, slope * x.signum())
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

#[inline]
fn gaussian(x: f64, scale: f64) -> f64 {
    let z = x / scale;
    (-0.5 * z * z).exp() / (scale * (2.0 * std::f64::consts::PI).sqrt())
}

fn tabulated(samples: &[(f64, f64)], ax: f64) -> f64 {
    let idx = samples.partition_point(|s| s.0 <= ax);
    if idx == 0 {
        return samples[0].1;
    }
    if idx >= samples.len() {
        return samples[samples.len() - 1].1;
    }
    let (x0, y0) = samples[idx - 1];
    let (x1, y1) = samples[idx];
    y0 + (y1 - y0) * (ax - x0) / (x1 - x0)
}

/// `φ(x)` for any kernel variant.
pub fn eval_phi(kernel: &MassKernel, x: f64) -> Result<f64> {
    kernel.eval(x)
}

/// The C² ramp `Ψ(t) = 6t⁵ − 15t⁴ + 10t³` clamped to `[0, 1]`.
#[inline]
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        (t * t * t * (t * (6.0 * t - 15.0) + 10.0)).clamp(0.0, 1.0)
    }
}

/// Lipschitz constant of [`smoothstep`] (its maximal slope, at `t = ½`).
pub const SMOOTHSTEP_LIPSCHITZ: f64 = 1.875;

/// Cutoff `η_{a,b}`: one on `[a, b]`, zero outside `(a − 1, b + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub a: f64,
    pub b: f64,
}

impl CutoffProfile {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Domain(format!("cutoff needs a < b, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    /// Support `[a − 1, b + 1]`.
    pub fn support(&self) -> (f64, f64) {
        (self.a - 1.0, self.b + 1.0)
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        if y >= self.a && y <= self.b {
            1.0
        } else if y > self.a - 1.0 && y < self.a {
            smoothstep(y - (self.a - 1.0))
        } else if y > self.b && y < self.b + 1.0 {
            smoothstep(self.b + 1.0 - y)
        } else {
            0.0
        }
    }
}

pub fn eval_cutoff(profile: &CutoffProfile, y: f64) -> f64 {
    profile.eval(y)
}
