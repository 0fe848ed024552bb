//! Inversion of a drift into a sheet perturbation `h` and the Girsanov weights
//! that turn the driftless flow into the drifted one.
//!
//! With the symmetric transform, `h(k) = 𝓕⁻¹Φ(k) / (√(2π) f(k))` satisfies
//! `Φ(x) = ∫ f(k) [cos(kx) h^re(k) + sin(kx) h^im(k)] dk`, which is exactly the
//! drift produced by shifting the sheet increments by `h dk dt`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::drift::{DriftSpec, PreparedDrift, RegularizedSpectral};
use crate::dynamics::{EulerStepper, RunOptions, SimConfig, Trajectory};
use crate::error::{Error, Result};
use crate::kernels::fourier::{fill_phases, inverse, UniformGrid};
use crate::kernels::{bracket, eval_f, CutoffProfile, MassKernel, SpectralDecay, SpectralGrid};
use crate::noise::SheetIncrement;
use crate::state::{mass_function, HistogramMeasure, QuantileState};

/// Smallest admissible `f(k)` on the grid.
pub const F_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub h_re: Vec<f64>,
    pub h_im: Vec<f64>,
    /// `Σ (h_re² + h_im²) dk`
    pub l2_norm_sq: f64,
    /// Largest reconstruction error on the support.
    pub residual_sup: f64,
}

impl InversionResult {
    pub fn zero(nodes: usize) -> Self {
        Self { h_re: vec![0.0; nodes], h_im: vec![0.0; nodes], l2_norm_sq: 0.0, residual_sup: 0.0 }
    }

    fn from_parts(h_re: Vec<f64>, h_im: Vec<f64>, dk: f64) -> Self {
        let l2 = h_re.iter().zip(&h_im).map(|(a, b)| a * a + b * b).sum::<f64>() * dk;
        Self { h_re, h_im, l2_norm_sq: l2, residual_sup: 0.0 }
    }
}

/// Fixed spectral and spatial grids for repeated inversions.
#[derive(Debug, Clone)]
pub struct Inverter {
    pub grid: SpectralGrid,
    pub x: UniformGrid,
}

impl Inverter {
    /// Rejects grids where `f` falls below [`F_FLOOR`].
    pub fn new(decay: &SpectralDecay, x: UniformGrid) -> Result<Self> {
        decay.validate()?;
        let grid = decay.grid();
        if let Some((k, f)) = grid.k.iter().zip(&grid.f).find(|(_, f)| **f < F_FLOOR) {
            return Err(Error::IllConditioned { k: *k, value: *f });
        }
        if x.len == 0 || !(x.step > 0.0) {
            return Err(Error::Grid("empty x-grid".into()));
        }
        Ok(Self { grid, x })
    }

    /// Default x-grid on `[lo, hi]` with `dx ≤ π/(2 k_max)`.
    pub fn covering(decay: &SpectralDecay, lo: f64, hi: f64) -> Result<Self> {
        let dx = if decay.k_max > 0.0 { std::f64::consts::FRAC_PI_2 / decay.k_max } else { (hi - lo) / 64.0 };
        Self::new(decay, UniformGrid::covering(lo, hi, dx))
    }

    /// `h` for samples of `Φ` on the x-grid; `residual_sup` is left at zero.
    pub fn invert_values(&self, values: &[f64]) -> InversionResult {
        let k = UniformGrid::new(self.grid.k0(), self.grid.dk, self.grid.len());
        let (mut re, mut im) = inverse(values, &self.x, &k);
        let c = (2.0 * PI).sqrt();
        for j in 0..self.grid.len() {
            let w = 1.0 / (c * self.grid.f[j]);
            re[j] *= w;
            im[j] *= w;
        }
        InversionResult::from_parts(re, im, self.grid.dk)
    }

    /// `Σ f(k)[cos(kx) h^re + sin(kx) h^im] dk`.
    pub fn reconstruct(&self, h: &InversionResult, x: f64) -> f64 {
        reconstruct(&self.grid, h, x)
    }

    fn covers(&self, lo: f64, hi: f64) -> Result<()> {
        let (g0, g1) = (self.x.first() - 0.5 * self.x.step, self.x.last() + 0.5 * self.x.step);
        if lo < g0 - 1e-12 || hi > g1 + 1e-12 {
            return Err(Error::Grid(format!("x-grid [{g0}, {g1}] does not cover [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Constant-mass inversion of `B` sampled by `b` on the x-grid. The residual
    /// is measured at the x-grid nodes inside `support`.
    pub fn invert_constant_mass(&self, b: &dyn Fn(f64) -> f64, support: (f64, f64)) -> InversionResult {
        let xs = self.x.points();
        let values: Vec<f64> = xs.iter().map(|&x| b(x)).collect();
        let mut h = self.invert_values(&values);
        h.residual_sup = xs
            .iter()
            .zip(&values)
            .filter(|(x, _)| **x >= support.0 && **x <= support.1)
            .map(|(&x, &v)| (v - self.reconstruct(&h, x)).abs())
            .fold(0.0, f64::max);
        h
    }

    /// General-mass inversion of `B(·, μ)` with target `Φ = B · η · m^{1/2}`,
    /// where `η` is the cutoff on `[y_0, y_{n−1}]` and `m(x) = (1/n) Σ φ(x − y_l)`.
    /// The residual is `sup_i |B(y_i) − m_i^{-1/2} Σ f Re(e^{−ik y_i} h) dk|`.
    pub fn invert_general(&self, drift: &PreparedDrift, y: &QuantileState, kernel: &MassKernel, profile: &CutoffProfile) -> Result<InversionResult> {
        let (lo, hi) = profile.support();
        self.covers(lo, hi)?;
        let xs = self.x.points();
        let mut values = Vec::with_capacity(xs.len());
        for &x in &xs {
            let eta = profile.eval(x);
            if eta == 0.0 {
                values.push(0.0);
                continue;
            }
            let m = point_mass(x, &y.values, kernel);
            values.push(drift.eval(x) * eta * m.sqrt());
        }
        let mut h = self.invert_values(&values);
        let m = mass_function(&y.values, kernel);
        h.residual_sup = y
            .values
            .iter()
            .zip(&m)
            .map(|(&yi, &mi)| (drift.eval(yi) - self.reconstruct(&h, yi) / mi.sqrt()).abs())
            .fold(0.0, f64::max);
        Ok(h)
    }
}

fn point_mass(x: f64, y: &[f64], kernel: &MassKernel) -> f64 {
    if kernel.is_constant() {
        return 1.0;
    }
    y.iter().map(|&yl| kernel.value_and_slope(x - yl).0).sum::<f64>() / y.len() as f64
}

fn reconstruct(grid: &SpectralGrid, h: &InversionResult, x: f64) -> f64 {
    let nk = grid.len();
    if nk == 0 {
        return 0.0;
    }
    let mut c = vec![0.0; nk];
    let mut s = vec![0.0; nk];
    fill_phases(grid.k0(), grid.dk, x, &mut c, &mut s);
    let mut acc = 0.0;
    for j in 0..nk {
        acc += grid.f[j] * (c[j] * h.h_re[j] + s[j] * h.h_im[j]);
    }
    acc * grid.dk
}

/// Constant-mass inversion of samples of `B` given on `x`.
pub fn invert_constant_mass(values: &[f64], x: &UniformGrid, decay: &SpectralDecay) -> Result<InversionResult> {
    if values.len() != x.len {
        return Err(Error::Grid(format!("{} values on a grid of {}", values.len(), x.len)));
    }
    let inv = Inverter::new(decay, *x)?;
    let mut h = inv.invert_values(values);
    h.residual_sup = x
        .points()
        .iter()
        .zip(values)
        .map(|(&xx, &v)| (v - inv.reconstruct(&h, xx)).abs())
        .fold(0.0, f64::max);
    Ok(h)
}

/// General-mass inversion on an x-grid covering the cutoff support automatically.
pub fn invert_general(
    drift: &DriftSpec,
    y: &QuantileState,
    kernel: &MassKernel,
    profile: &CutoffProfile,
    decay: &SpectralDecay,
) -> Result<InversionResult> {
    let (lo, hi) = profile.support();
    let inv = Inverter::covering(decay, lo, hi)?;
    inv.invert_general(&drift.prepare(y), y, kernel, profile)
}

/// `h(k) = ⟨k⟩^{−η}(λ(k, μ) − λ̃(k, μ)) / f(k)` on the spectral drift's grid.
/// `residual_sup` compares `b − b̃` with the reconstruction on `[-1, 1]`.
pub fn invert_interpolation_split(reg: &RegularizedSpectral, mu: &HistogramMeasure) -> Result<InversionResult> {
    let spec = &reg.spec;
    let nodes = spec.nodes();
    let (lt_re, lt_im) = reg.lambda_tilde(mu)?;
    let mut h_re = Vec::with_capacity(nodes.len());
    let mut h_im = Vec::with_capacity(nodes.len());
    for (j, &k) in nodes.iter().enumerate() {
        let f = eval_f(&spec.decay, k);
        if f < F_FLOOR {
            return Err(Error::IllConditioned { k, value: f });
        }
        let (l_re, l_im) = spec.lambda(k, mu);
        let w = bracket(k).powf(-spec.eta) / f;
        h_re.push(w * (l_re - lt_re[j]));
        h_im.push(w * (l_im - lt_im[j]));
    }
    let mut h = InversionResult::from_parts(h_re, h_im, spec.decay.dk);
    let grid = spec.decay.grid();
    let b = DriftSpec::Spectral(Box::new(spec.clone())).prepare(mu);
    h.residual_sup = (0..=20)
        .map(|i| -1.0 + 0.1 * i as f64)
        .map(|x| {
            let target = b.eval(x) - reg.drift(x, mu).unwrap_or(f64::NAN);
            (target - reconstruct(&grid, &h, x)).abs()
        })
        .fold(0.0, f64::max);
    Ok(h)
}

/// A priori bound on `∫₀ᵀ Σ |h|² dk dt` for every inversion `run_reweighted`
/// can perform with `inverter`, from `sup |b|`, `sup φ = φ(0)` and the grid:
/// `|h_j| ≤ sup|b| · φ(0)^{1/2} · L / (2π f_j)` with `L` the x-grid length.
/// `None` when the drift has no closed-form sup bound.
pub fn novikov_bound(drift: &DriftSpec, inverter: &Inverter, kernel: &MassKernel, horizon: f64) -> Option<f64> {
    let sup_b = drift.sup_bound()?;
    let phi0 = if kernel.is_constant() { 1.0 } else { kernel.value_and_slope(0.0).0 };
    let length = inverter.x.len as f64 * inverter.x.step;
    let c = sup_b * phi0.sqrt() * length / (2.0 * PI);
    let inv_f_sq: f64 = inverter.grid.f.iter().map(|f| 1.0 / (f * f)).sum::<f64>() * inverter.grid.dk;
    Some(horizon * c * c * inv_f_sq)
}

/// Running change of measure for one path.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GirsanovLedger {
    /// `Σ [h·dW − ½ |h|² dt]`
    pub log_weight: f64,
    /// `∫ |h|² dk dt`
    pub int_h_sq: f64,
    /// Declared bound on `int_h_sq`.
    pub novikov_bound: Option<f64>,
    pub bound_violated: bool,
}

impl GirsanovLedger {
    pub fn new(novikov_bound: Option<f64>) -> Self {
        Self { novikov_bound, ..Self::default() }
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    /// Adds one step. Returns `false` when the declared bound is exceeded; the
    /// ledger keeps accumulating either way.
    pub fn accumulate(&mut self, h: &InversionResult, inc: &SheetIncrement) -> Result<bool> {
        if h.h_re.len() != inc.len() || h.h_im.len() != inc.len() {
            return Err(Error::Grid(format!("h has {} nodes, increment {}", h.h_re.len(), inc.len())));
        }
        let mut lin = 0.0;
        for j in 0..inc.len() {
            lin += h.h_re[j] * inc.dw_re[j] + h.h_im[j] * inc.dw_im[j];
        }
        self.log_weight += lin - 0.5 * h.l2_norm_sq * inc.dt;
        self.int_h_sq += h.l2_norm_sq * inc.dt;
        if let Some(bound) = self.novikov_bound {
            if self.int_h_sq > bound {
                self.bound_violated = true;
            }
        }
        Ok(!self.bound_violated)
    }
}

/// Functional form of [`GirsanovLedger::accumulate`].
pub fn accumulate(ledger: &GirsanovLedger, h: &InversionResult, inc: &SheetIncrement) -> Result<GirsanovLedger> {
    let mut out = *ledger;
    out.accumulate(h, inc)?;
    Ok(out)
}

/// Driftless path that carries the Girsanov weight of `drift`.
///
/// Each step inverts `b(·, μ_t)` at the current state (constant mass: plain
/// inversion; otherwise the cutoff-and-mass target) and charges the ledger with
/// the same increments that move the particles. Under the reweighted law the
/// increments are shifted by `h dk dt`, which adds the reconstructed drift.
/// Without an explicit `novikov_bound` the ledger uses [`novikov_bound`].
pub fn run_reweighted(
    cfg: &SimConfig,
    initial: &QuantileState,
    drift: &DriftSpec,
    x: UniformGrid,
    path: u64,
    novikov_bound: Option<f64>,
    opts: RunOptions,
) -> Result<Trajectory> {
    cfg.validate()?;
    let inverter = Inverter::new(&cfg.decay, x)?;
    let steps = cfg.steps();
    let mut st = EulerStepper::new(cfg);
    let mut stream = cfg.stream(path);
    let mut y = initial.values.clone();
    let n = y.len();
    let bound = novikov_bound.or_else(|| self::novikov_bound(drift, &inverter, &cfg.effective_kernel(), cfg.horizon));
    let mut ledger = GirsanovLedger::new(bound);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![initial.clone()],
        exit_time: None,
        girsanov: None,
        qv_realized: vec![0.0; n],
        qv_predicted: vec![0.0; n],
        max_inversion: 0.0,
    };
    let constant = st.kernel.is_constant();
    let zero = PreparedDrift::Uniform(0.0);
    for step in 1..=steps {
        let t = step as f64 * cfg.dt;
        let state = QuantileState::new(y.clone());
        let prepared = drift.prepare(&state);
        let h = if constant {
            let xs = inverter.x.points();
            let values: Vec<f64> = xs.iter().map(|&xx| prepared.eval(xx)).collect();
            inverter.invert_values(&values)
        } else {
            let profile = CutoffProfile::new(y[0], y[n - 1])?;
            inverter.invert_general(&prepared, &state, &st.kernel, &profile)?
        };
        st.update_mass(&y)?;
        st.draw(&mut stream);
        ledger.accumulate(&h, &st.inc)?;
        st.martingale_part(&y);
        let report = st.advance(&mut y, &zero, t)?;
        traj.max_inversion = traj.max_inversion.max(report.max_inversion);
        if step == steps || (opts.record_stride > 0 && step % opts.record_stride == 0) {
            traj.times.push(t);
            traj.states.push(QuantileState::new(y.clone()));
        }
    }
    traj.girsanov = Some(ledger);
    Ok(traj)
}
