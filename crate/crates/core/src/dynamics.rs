//! Euler–Maruyama time stepping of the particle system, the truncated flow
//! with its exit time, the derivative flow and the interpolation model.
//!
//! The scheme has no monotonicity guarantee, so every step reports adjacent
//! inversions before optionally repairing them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{DriftSpec, PreparedDrift};
use crate::error::{Error, Result};
use crate::girsanov::GirsanovLedger;
use crate::kernels::fourier::fill_phases;
use crate::kernels::{MassKernel, SpectralDecay, SpectralGrid};
use crate::noise::{sample_increment_into, NoiseStream, SheetIncrement};
use crate::state::{isotonic_in_place, mass_and_slope, mass_function, monotonicity_report, MeasureView, QuantileState};

/// What to do with adjacent inversions produced by a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneRepair {
    Off,
    #[default]
    Project,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    #[serde(rename = "n")]
    pub particles: usize,
    pub decay: SpectralDecay,
    #[serde(rename = "phi")]
    pub kernel: MassKernel,
    #[serde(default, rename = "truncation_M")]
    pub truncation_m: Option<f64>,
    #[serde(default)]
    pub monotone_repair: MonotoneRepair,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_path")]
    pub paths: usize,
    /// Odd paths replay the increments of the preceding even path, negated.
    #[serde(default)]
    pub antithetic: bool,
}

fn one_path() -> usize {
    1
}

impl SimConfig {
    pub fn new(horizon: f64, dt: f64, particles: usize, decay: SpectralDecay, kernel: MassKernel) -> Self {
        Self {
            horizon,
            dt,
            particles,
            decay,
            kernel,
            truncation_m: None,
            monotone_repair: MonotoneRepair::Project,
            seed: 0,
            paths: 1,
            antithetic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::Config(format!("T must be non-negative, got {}", self.horizon)));
        }
        if self.horizon > 0.0 && self.dt > self.horizon {
            return Err(Error::Config(format!("dt = {} exceeds T = {}", self.dt, self.horizon)));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::Config(format!("T/dt must be an integer, got {steps}")));
        }
        if self.particles < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.particles)));
        }
        if self.paths == 0 {
            return Err(Error::Config("paths must be positive".into()));
        }
        if let Some(m) = self.truncation_m {
            if !(m > 0.0) {
                return Err(Error::Config(format!("truncation_M must be positive, got {m}")));
            }
        }
        self.decay.validate_for_dynamics()?;
        self.kernel.validate()
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// The mass kernel actually used, `φ_M` when a truncation is set.
    pub fn effective_kernel(&self) -> MassKernel {
        match self.truncation_m {
            Some(m) => self.kernel.truncated(m),
            None => self.kernel.clone(),
        }
    }

    /// Noise stream of path `p`, honoring the antithetic pairing.
    pub fn stream(&self, path: u64) -> NoiseStream {
        if self.antithetic {
            NoiseStream::new(self.seed, path / 2).antithetic(path % 2 == 1)
        } else {
            NoiseStream::new(self.seed, path)
        }
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub inversions: usize,
    pub max_inversion: f64,
}

/// Reusable buffers for stepping one path.
#[derive(Debug, Clone)]
pub struct EulerStepper {
    pub grid: SpectralGrid,
    pub kernel: MassKernel,
    pub dt: f64,
    pub repair: MonotoneRepair,
    pub inc: SheetIncrement,
    pub mass: Vec<f64>,
    /// Martingale part of the last step.
    pub dm: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl EulerStepper {
    pub fn new(cfg: &SimConfig) -> Self {
        let grid = cfg.decay.grid();
        let nk = grid.len();
        Self {
            inc: SheetIncrement::zeros(nk, cfg.dt),
            grid,
            kernel: cfg.effective_kernel(),
            dt: cfg.dt,
            repair: cfg.monotone_repair,
            mass: Vec::new(),
            dm: Vec::new(),
            cos: vec![0.0; nk],
            sin: vec![0.0; nk],
        }
    }

    /// Computes `m` for `y` into `self.mass`, rejecting non-positive values.
    pub fn update_mass(&mut self, y: &[f64]) -> Result<()> {
        self.mass = mass_function(y, &self.kernel);
        check_mass(&self.mass)
    }

    /// Draws the next sheet increment.
    pub fn draw(&mut self, stream: &mut NoiseStream) {
        sample_increment_into(stream, self.grid.dk, self.dt, &mut self.inc);
    }

    /// `self.dm_i = m_i^{-1/2} Σ f(k)[cos(k y_i) dW^re + sin(k y_i) dW^im]` for the current increment.
    pub fn martingale_part(&mut self, y: &[f64]) {
        self.dm.resize(y.len(), 0.0);
        if self.grid.is_empty() {
            self.dm.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let (k0, dk) = (self.grid.k0(), self.grid.dk);
        for (i, &yi) in y.iter().enumerate() {
            fill_phases(k0, dk, yi, &mut self.cos, &mut self.sin);
            let mut acc = 0.0;
            for j in 0..self.grid.len() {
                acc += self.grid.f[j] * (self.cos[j] * self.inc.dw_re[j] + self.sin[j] * self.inc.dw_im[j]);
            }
            self.dm[i] = acc / self.mass[i].sqrt();
        }
    }

    /// Applies `y += b dt + dm`, checks finiteness and repairs per policy.
    pub fn advance(&mut self, y: &mut [f64], drift: &PreparedDrift, t: f64) -> Result<StepReport> {
        let dt = self.dt;
        let zero = drift.is_zero();
        for (i, yi) in y.iter_mut().enumerate() {
            let b = if zero { 0.0 } else { drift.eval(*yi) };
            *yi += b * dt + self.dm[i];
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup { t, detail: format!("particle {i} is not finite") });
        }
        let (inversions, max_inversion) = monotonicity_report(y);
        match self.repair {
            MonotoneRepair::Off => {}
            MonotoneRepair::Project => isotonic_in_place(y),
            MonotoneRepair::Reject if inversions > 0 => {
                return Err(Error::MonotoneReject { t, count: inversions, magnitude: max_inversion })
            }
            MonotoneRepair::Reject => {}
        }
        Ok(StepReport { inversions, max_inversion })
    }

    /// One full step: mass, increment, martingale part, drift, repair.
    pub fn step(&mut self, y: &mut [f64], drift: &DriftSpec, stream: &mut NoiseStream, t: f64) -> Result<StepReport> {
        self.update_mass(y)?;
        self.draw(stream);
        self.martingale_part(y);
        let prepared = drift.prepare(&&*y);
        self.advance(y, &prepared, t)
    }
}

fn check_mass(m: &[f64]) -> Result<()> {
    match m.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        Some(index) => Err(Error::MassDegeneracy { index, mass: m[index] }),
        None => Ok(()),
    }
}

/// One Euler step of a single state.
pub fn step_euler(y: &QuantileState, cfg: &SimConfig, drift: Option<&DriftSpec>, stream: &mut NoiseStream) -> Result<QuantileState> {
    let mut stepper = EulerStepper::new(cfg);
    let mut v = y.values.clone();
    stepper.step(&mut v, drift.unwrap_or(&DriftSpec::Zero), stream, cfg.dt)?;
    Ok(QuantileState::new(v))
}

/// Options for [`run_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Record every `stride`-th state (the final state is always recorded); `0` keeps only the endpoints.
    pub record_stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_stride: 1 }
    }
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QuantileState>,
    /// First grid time with `y(u_{n−1}) − y(u_0) ≥ M`.
    pub exit_time: Option<f64>,
    pub girsanov: Option<GirsanovLedger>,
    /// Realized `Σ (Δm_i)²` of the martingale part.
    pub qv_realized: Vec<f64>,
    /// `Σ dt · Σ_j f²(k_j) dk / m_i`, its predictable counterpart.
    pub qv_predicted: Vec<f64>,
    /// Largest adjacent inversion produced by any step, before repair.
    pub max_inversion: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &QuantileState {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}

fn should_record(step: usize, steps: usize, stride: usize) -> bool {
    step == steps || (stride > 0 && step % stride == 0)
}

/// Simulates one path with the stream of `path`.
pub fn run_with(cfg: &SimConfig, initial: &QuantileState, drift: &DriftSpec, path: u64, opts: RunOptions) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(cfg, initial)?;
    let steps = cfg.steps();
    let mut stepper = EulerStepper::new(cfg);
    let mut stream = cfg.stream(path);
    let mut y = initial.values.clone();
    let n = y.len();
    let fnorm = stepper.grid.f_norm_sq();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![initial.clone()],
        exit_time: None,
        girsanov: None,
        qv_realized: vec![0.0; n],
        qv_predicted: vec![0.0; n],
        max_inversion: 0.0,
    };
    for step in 1..=steps {
        let t = step as f64 * cfg.dt;
        if traj.exit_time.is_none() {
            let report = stepper.step(&mut y, drift, &mut stream, t)?;
            traj.max_inversion = traj.max_inversion.max(report.max_inversion);
            for i in 0..n {
                traj.qv_realized[i] += stepper.dm[i] * stepper.dm[i];
                traj.qv_predicted[i] += cfg.dt * fnorm / stepper.mass[i];
            }
            if let Some(m) = cfg.truncation_m {
                if y[n - 1] - y[0] >= m {
                    traj.exit_time = Some(t);
                }
            }
        }
        if should_record(step, steps, opts.record_stride) {
            traj.times.push(t);
            traj.states.push(QuantileState::new(y.clone()));
        }
    }
    Ok(traj)
}

fn check_initial(cfg: &SimConfig, initial: &QuantileState) -> Result<()> {
    if initial.n() != cfg.particles {
        return Err(Error::Grid(format!("initial state has {} particles, config says {}", initial.n(), cfg.particles)));
    }
    if !initial.is_finite() {
        return Err(Error::Domain("initial state is not finite".into()));
    }
    if let Some(i) = initial.values.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::DegenerateQuantile { index: i + 1 });
    }
    if let Some(m) = cfg.truncation_m {
        if !(m > initial.spread()) {
            return Err(Error::Config(format!("truncation_M = {m} must exceed the initial spread {}", initial.spread())));
        }
    }
    Ok(())
}

/// Simulates one path per stream index `0..cfg.paths`, in path order.
pub fn run(cfg: &SimConfig, initial: &QuantileState, drift: Option<&DriftSpec>) -> Result<Trajectory> {
    run_with(cfg, initial, drift.unwrap_or(&DriftSpec::Zero), 0, RunOptions::default())
}

/// All `cfg.paths` paths, computed in parallel and returned in path order.
pub fn run_ensemble(cfg: &SimConfig, initial: &QuantileState, drift: &DriftSpec, opts: RunOptions) -> Result<Vec<Trajectory>> {
    (0..cfg.paths as u64).into_par_iter().map(|p| run_with(cfg, initial, drift, p, opts)).collect()
}

/// Base path and the exponential-form derivative `z ≈ ∂_u y` on the same increments.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeFlow {
    pub times: Vec<f64>,
    pub base: Vec<QuantileState>,
    pub z: Vec<Vec<f64>>,
    /// Running stochastic exponent per particle.
    pub log_integrand: Vec<f64>,
}

/// Runs the driftless flow together with
/// `z_t = g' · exp(∫φ^re f dw^re + ∫φ^im f dw^im − ½∫(φ^re² + φ^im²) f² dk ds)`, where
/// `φ^re = −k sin(ky)/√m − cos(ky)·a`, `φ^im = k cos(ky)/√m − sin(ky)·a` and
/// `a = (∫φ'(y − y(v)) dv) / (2 m^{3/2})`.
pub fn run_derivative_flow(
    cfg: &SimConfig,
    initial: &QuantileState,
    g_prime: &[f64],
    stream: &mut NoiseStream,
    opts: RunOptions,
) -> Result<DerivativeFlow> {
    cfg.validate()?;
    check_initial(cfg, initial)?;
    if g_prime.len() != initial.n() {
        return Err(Error::Grid(format!("{} derivative values for {} particles", g_prime.len(), initial.n())));
    }
    if let Some(i) = g_prime.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("g' must be positive, got {} at {i}", g_prime[i])));
    }
    let steps = cfg.steps();
    let mut st = EulerStepper::new(cfg);
    let grid = st.grid.clone();
    let nk = grid.len();
    let fk: Vec<f64> = grid.k.iter().zip(&grid.f).map(|(k, f)| k * f).collect();
    let f2 = grid.f_norm_sq();
    let k2f2 = grid.k2_f_norm_sq();
    let mut y = initial.values.clone();
    let n = y.len();
    let mut log_z = vec![0.0; n];
    let mut out = DerivativeFlow { times: vec![0.0], base: vec![initial.clone()], z: vec![g_prime.to_vec()], log_integrand: vec![0.0; n] };
    let mut c = vec![0.0; nk];
    let mut s = vec![0.0; nk];
    let mut dm = vec![0.0; n];
    for step in 1..=steps {
        let t = step as f64 * cfg.dt;
        let (m, dphi) = mass_and_slope(&y, &st.kernel);
        check_mass(&m)?;
        st.draw(stream);
        for i in 0..n {
            if nk == 0 {
                dm[i] = 0.0;
                continue;
            }
            fill_phases(grid.k0(), grid.dk, y[i], &mut c, &mut s);
            let (mut mart, mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in 0..nk {
                let (wr, wi) = (st.inc.dw_re[j], st.inc.dw_im[j]);
                mart += grid.f[j] * (c[j] * wr + s[j] * wi);
                s1 += grid.f[j] * c[j] * wr;
                s2 += grid.f[j] * s[j] * wi;
                s3 += fk[j] * s[j] * wr;
                s4 += fk[j] * c[j] * wi;
            }
            let root = m[i].sqrt();
            let a = dphi[i] / (2.0 * m[i] * root);
            dm[i] = mart / root;
            log_z[i] += (s4 - s3) / root - a * (s1 + s2) - 0.5 * (k2f2 / m[i] + a * a * f2) * cfg.dt;
        }
        st.mass = m;
        st.dm.clone_from(&dm);
        st.advance(&mut y, &PreparedDrift::Uniform(0.0), t)?;
        if should_record(step, steps, opts.record_stride) {
            out.times.push(t);
            out.base.push(QuantileState::new(y.clone()));
            out.z.push(g_prime.iter().zip(&log_z).map(|(g, l)| g * l.exp()).collect());
        }
    }
    out.log_integrand = log_z;
    Ok(out)
}

/// One step of the constant-mass interpolation model:
/// `z'_j = z_j + b(z_j, μ) dt + Σ f(k)[cos(k z_j) dW^re + sin(k z_j) dW^im] + idio_j`.
pub fn step_interpolation(
    z: &[f64],
    mu: &dyn MeasureView,
    drift: &DriftSpec,
    grid: &SpectralGrid,
    common: &SheetIncrement,
    idio: &[f64],
) -> Result<Vec<f64>> {
    let prepared = drift.prepare(mu);
    let mut out = z.to_vec();
    step_interpolation_prepared(&mut out, &prepared, grid, common, idio)?;
    Ok(out)
}

/// In-place form of [`step_interpolation`] with the drift's measure already frozen.
pub fn step_interpolation_prepared(
    z: &mut [f64],
    drift: &PreparedDrift,
    grid: &SpectralGrid,
    common: &SheetIncrement,
    idio: &[f64],
) -> Result<()> {
    if idio.len() != z.len() {
        return Err(Error::Grid(format!("{} idiosyncratic draws for {} copies", idio.len(), z.len())));
    }
    if common.len() != grid.len() {
        return Err(Error::Grid(format!("increment has {} nodes, grid has {}", common.len(), grid.len())));
    }
    let nk = grid.len();
    let mut c = vec![0.0; nk];
    let mut s = vec![0.0; nk];
    let dt = common.dt;
    let zero = drift.is_zero();
    for (j, zj) in z.iter_mut().enumerate() {
        let mut acc = 0.0;
        if nk > 0 {
            fill_phases(grid.k0(), grid.dk, *zj, &mut c, &mut s);
            for l in 0..nk {
                acc += grid.f[l] * (c[l] * common.dw_re[l] + s[l] * common.dw_im[l]);
            }
        }
        let b = if zero { 0.0 } else { drift.eval(*zj) };
        *zj += b * dt + acc + idio[j];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::ScalarFn;
    use approx::assert_relative_eq;

    fn cfg(decay: SpectralDecay) -> SimConfig {
        SimConfig::new(0.1, 0.01, 8, decay, MassKernel::Gaussian { scale: 1.0 })
    }

    fn g(n: usize) -> QuantileState {
        QuantileState::from_fn(n, |u| u - 0.5)
    }

    #[test]
    fn no_noise_no_drift_is_stationary() {
        let c = cfg(SpectralDecay::silent());
        let y = g(8);
        let y1 = step_euler(&y, &c, None, &mut NoiseStream::new(0, 0)).unwrap();
        assert_eq!(y1, y);
    }

    #[test]
    fn no_noise_constant_drift_translates() {
        let c = cfg(SpectralDecay::silent());
        let y = g(8);
        let drift = DriftSpec::B2 { a: ScalarFn::Constant { value: 1.5 } };
        let y1 = step_euler(&y, &c, Some(&drift), &mut NoiseStream::new(0, 0)).unwrap();
        for (a, b) in y1.values.iter().zip(&y.values) {
            assert_relative_eq!(*a, b + 1.5 * 0.01, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_horizon_keeps_initial() {
        let mut c = cfg(SpectralDecay::new(3.0, 8.0, 0.25));
        c.horizon = 0.0;
        let t = run(&c, &g(8), None).unwrap();
        assert_eq!(t.times, vec![0.0]);
        assert_eq!(t.states, vec![g(8)]);
        assert!(t.exit_time.is_none());
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(SpectralDecay::new(3.0, 8.0, 0.25));
        c.dt = 0.03;
        assert!(c.validate().is_err());
        let mut c = cfg(SpectralDecay::new(3.0, 8.0, 0.25));
        c.particles = 1;
        assert!(c.validate().is_err());
        let mut c = cfg(SpectralDecay::new(3.0, 8.0, 0.25));
        c.truncation_m = Some(0.5);
        assert!(matches!(run(&c, &g(8), None), Err(Error::Config(_))));
    }

    #[test]
    fn replay_is_deterministic() {
        let c = cfg(SpectralDecay::new(3.0, 8.0, 0.25));
        let a = run_with(&c, &g(8), &DriftSpec::Zero, 3, RunOptions::default()).unwrap();
        let b = run_with(&c, &g(8), &DriftSpec::Zero, 3, RunOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exit_freezes_state() {
        let mut c = SimConfig::new(2.0, 0.01, 6, SpectralDecay::new(2.0, 6.0, 0.25).with_scale(3.0), MassKernel::Gaussian { scale: 1.0 });
        c.truncation_m = Some(1.3);
        let mut exited = 0;
        for p in 0..20 {
            let t = run_with(&c, &g(6), &DriftSpec::Zero, p, RunOptions::default()).unwrap();
            if let Some(te) = t.exit_time {
                exited += 1;
                let idx = t.times.iter().position(|&s| (s - te).abs() < 1e-12).unwrap();
                assert!(t.states[idx].spread() >= 1.3);
                assert!(t.states[..idx].iter().all(|s| s.spread() < 1.3));
                for s in &t.states[idx..] {
                    assert_eq!(s, &t.states[idx]);
                }
            }
        }
        assert!(exited > 0);
    }

    #[test]
    fn truncations_agree_until_exit() {
        let base = SimConfig::new(1.0, 0.01, 8, SpectralDecay::new(2.0, 6.0, 0.25).with_scale(2.0), MassKernel::Gaussian { scale: 0.5 });
        for p in 0..10 {
            let mut small = base.clone();
            small.truncation_m = Some(1.5);
            let mut large = base.clone();
            large.truncation_m = Some(4.0);
            let a = run_with(&small, &g(8), &DriftSpec::Zero, p, RunOptions::default()).unwrap();
            let b = run_with(&large, &g(8), &DriftSpec::Zero, p, RunOptions::default()).unwrap();
            let stop = a.exit_time.map(|t| (t / base.dt).round() as usize).unwrap_or(a.states.len() - 1);
            for i in 0..=stop {
                assert_eq!(a.states[i], b.states[i], "path {p} step {i}");
            }
        }
    }

    #[test]
    fn reject_mode_reports_inversions() {
        let mut c = SimConfig::new(1.0, 0.05, 32, SpectralDecay::new(2.0, 10.0, 0.25).with_scale(4.0), MassKernel::Constant);
        c.monotone_repair = MonotoneRepair::Reject;
        let r = (0..10).map(|p| run_with(&c, &g(32), &DriftSpec::Zero, p, RunOptions::default())).find(|r| r.is_err());
        assert!(matches!(r, Some(Err(Error::MonotoneReject { .. }))));
    }

    #[test]
    fn derivative_flow_without_noise_is_g_prime() {
        let c = cfg(SpectralDecay::silent());
        let gp = vec![1.0; 8];
        let d = run_derivative_flow(&c, &g(8), &gp, &mut NoiseStream::new(0, 0), RunOptions::default()).unwrap();
        for z in &d.z {
            assert_eq!(z, &gp);
        }
    }

    #[test]
    fn derivative_flow_is_positive_and_uses_base_increments() {
        let c = cfg(SpectralDecay::new(3.0, 8.0, 0.25).with_scale(2.0));
        let gp = vec![1.0; 8];
        let d = run_derivative_flow(&c, &g(8), &gp, &mut c.stream(5), RunOptions::default()).unwrap();
        assert!(d.z.iter().flatten().all(|v| *v > 0.0));
        let t = run_with(&c, &g(8), &DriftSpec::Zero, 5, RunOptions::default()).unwrap();
        assert_eq!(d.base, t.states);
    }

    #[test]
    fn interpolation_step_examples() {
        let grid = SpectralDecay::silent().grid();
        let inc = SheetIncrement::zeros(0, 0.1);
        let z = [0.0, 1.0];
        let out = step_interpolation(&z, &&z[..], &DriftSpec::Zero, &grid, &inc, &[0.3, -0.2]).unwrap();
        assert_eq!(out, vec![0.3, 0.8]);
        let grid = SpectralDecay::new(2.0, 5.0, 0.5).grid();
        let mut s = NoiseStream::new(1, 0);
        let inc = crate::noise::sample_increment(&mut s, &grid, 0.1);
        let out = step_interpolation(&[0.4, 0.4], &&[0.4, 0.4][..], &DriftSpec::Zero, &grid, &inc, &[0.0, 0.0]).unwrap();
        assert_eq!(out[0], out[1]);
    }
}
