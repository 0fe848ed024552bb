//! Conditional-law map at a frozen common-noise path and its Picard iteration.
//!
//! `J` copies follow the constant-mass interpolation model with drift read
//! from a candidate flow `ν`. All copies see the same sheet increments and
//! their own idiosyncratic Brownian increments; the cross-copy histogram at
//! each time is the ensemble estimate of the conditional law given the sheet.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::DriftSpec;
use crate::dynamics::step_interpolation_prepared;
use crate::error::{Error, Result};
use crate::kernels::SpectralDecay;
use crate::noise::{lane, sample_increment_into, NoiseStream, SheetIncrement};
use crate::state::{tv_distance, BinLayout, HistogramMeasure};

/// Per-time histograms on a shared layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFlow {
    pub times: Vec<f64>,
    pub hists: Vec<HistogramMeasure>,
}

impl MeasureFlow {
    /// The same histogram at every time.
    pub fn constant(times: Vec<f64>, h: HistogramMeasure) -> Self {
        let hists = vec![h; times.len()];
        Self { times, hists }
    }

    /// `sup_t d_TV(self_t, other_t)`, the surrogate for path-space distance.
    pub fn sup_tv(&self, other: &MeasureFlow) -> Result<f64> {
        if self.hists.len() != other.hists.len() {
            return Err(Error::Grid(format!("flows with {} and {} times", self.hists.len(), other.hists.len())));
        }
        self.hists.iter().zip(&other.hists).try_fold(0.0, |m, (a, b)| Ok(f64::max(m, tv_distance(a, b)?)))
    }
}

/// Law of the initial positions `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    Point { x: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl InitialLaw {
    pub fn sample(&self, stream: &mut NoiseStream, count: usize) -> Vec<f64> {
        match *self {
            InitialLaw::Point { x } => vec![x; count],
            InitialLaw::Normal { mean, sd } => {
                let mut z = vec![0.0; count];
                stream.standard_normals(&mut z);
                z.iter().map(|v| mean + sd * v).collect()
            }
            InitialLaw::Uniform { lo, hi } => {
                let mut rng = stream.rng();
                stream.counter += 1;
                (0..count).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldConfig {
    pub copies: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub decay: SpectralDecay,
    pub layout: BinLayout,
    pub initial: InitialLaw,
    /// Seed of the initial draws and idiosyncratic increments.
    #[serde(default)]
    pub seed: u64,
    /// Selects an independent family of idiosyncratic streams.
    #[serde(default)]
    pub idio_key: u64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_iterations() -> usize {
    30
}

fn default_tol() -> f64 {
    1e-3
}

impl MeanFieldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.copies == 0 {
            return Err(Error::Config("copies must be positive".into()));
        }
        if !(self.dt > 0.0) || !(self.horizon >= 0.0) {
            return Err(Error::Config(format!("need dt > 0 and T >= 0, got dt = {}, T = {}", self.dt, self.horizon)));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::Config(format!("T/dt must be an integer, got {steps}")));
        }
        self.decay.validate()?;
        self.layout.validate()
    }

    /// Non-fatal problems with the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.copies < 100 {
            w.push(format!("ensemble of {} copies is too small for reliable histograms", self.copies));
        }
        let per_bin = self.copies as f64 / self.layout.bins as f64;
        if per_bin < 20.0 {
            w.push(format!("about {per_bin:.1} copies per bin; histograms will be noisy"));
        }
        w
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|s| s as f64 * self.dt).collect()
    }

    /// Flow that freezes the initial law over the whole horizon.
    pub fn initial_flow(&self) -> MeasureFlow {
        let xi = self.initial.sample(&mut self.init_stream(), self.copies);
        MeasureFlow::constant(self.times(), HistogramMeasure::from_samples(&self.layout, &xi))
    }

    fn init_stream(&self) -> NoiseStream {
        NoiseStream::new(self.seed, 0).on_lane(lane::INIT)
    }

    fn idio_stream(&self, step: usize) -> NoiseStream {
        let mut s = NoiseStream::new(self.seed, self.idio_key).on_lane(lane::IDIO);
        s.counter = step as u64;
        s
    }
}

/// Replays the sheet increments of `common` over the horizon.
pub fn common_increments(common: &NoiseStream, cfg: &MeanFieldConfig) -> Vec<SheetIncrement> {
    let grid = cfg.decay.grid();
    let mut stream = common.clone();
    (0..cfg.steps())
        .map(|_| {
            let mut inc = SheetIncrement::zeros(grid.len(), cfg.dt);
            sample_increment_into(&mut stream, grid.dk, cfg.dt, &mut inc);
            inc
        })
        .collect()
}

/// `φ(ν)`: the ensemble histogram flow of copies driven by `b(·, ν_t)`.
pub fn phi_map(nu: &MeasureFlow, common: &NoiseStream, drift: &DriftSpec, cfg: &MeanFieldConfig) -> Result<MeasureFlow> {
    phi_map_with_increments(nu, &common_increments(common, cfg), drift, cfg)
}

/// [`phi_map`] with the common increments given explicitly.
pub fn phi_map_with_increments(nu: &MeasureFlow, common: &[SheetIncrement], drift: &DriftSpec, cfg: &MeanFieldConfig) -> Result<MeasureFlow> {
    cfg.validate()?;
    let steps = cfg.steps();
    if nu.hists.len() != steps + 1 {
        return Err(Error::Grid(format!("flow has {} times, horizon needs {}", nu.hists.len(), steps + 1)));
    }
    if common.len() != steps {
        return Err(Error::Grid(format!("{} common increments for {steps} steps", common.len())));
    }
    let grid = cfg.decay.grid();
    let mut z = cfg.initial.sample(&mut cfg.init_stream(), cfg.copies);
    let mut out = MeasureFlow { times: cfg.times(), hists: Vec::with_capacity(steps + 1) };
    out.hists.push(HistogramMeasure::from_samples(&cfg.layout, &z));
    let mut idio = vec![0.0; cfg.copies];
    let sd = cfg.dt.sqrt();
    const CHUNK: usize = 256;
    for s in 0..steps {
        cfg.idio_stream(s).standard_normals(&mut idio);
        idio.iter_mut().for_each(|v| *v *= sd);
        let prepared = drift.prepare(&nu.hists[s]);
        z.par_chunks_mut(CHUNK)
            .zip(idio.par_chunks(CHUNK))
            .try_for_each(|(zc, ic)| step_interpolation_prepared(zc, &prepared, &grid, &common[s], ic))?;
        if let Some(j) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup { t: (s + 1) as f64 * cfg.dt, detail: format!("copy {j} is not finite") });
        }
        out.hists.push(HistogramMeasure::from_samples(&cfg.layout, &z));
    }
    Ok(out)
}

/// Per-iteration record of the Picard scheme.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PicardDiagnostics {
    /// `gaps[n] = sup_t d_TV(ν^{n+1}_t, ν^n_t)`
    pub gaps: Vec<f64>,
    /// `max_t H(ν^{n+1}_t | ν^n_t)`
    pub entropy_max: Vec<f64>,
    /// Index `n` of the first gap below tolerance.
    pub converged_at: Option<usize>,
}

/// Iterates `ν ← φ(ν)` from `initial` until the gap drops below `cfg.tol`.
pub fn picard_iterate(
    initial: MeasureFlow,
    common: &NoiseStream,
    drift: &DriftSpec,
    cfg: &MeanFieldConfig,
) -> Result<(MeasureFlow, PicardDiagnostics)> {
    let (nu, diag) = picard_trace(initial, common, drift, cfg)?;
    if diag.converged_at.is_none() {
        return Err(Error::Divergence { iterations: cfg.max_iterations, last_gap: diag.gaps.last().copied().unwrap_or(f64::NAN) });
    }
    Ok((nu, diag))
}

/// [`picard_iterate`] that returns the last iterate and its diagnostics even
/// without convergence.
pub fn picard_trace(
    initial: MeasureFlow,
    common: &NoiseStream,
    drift: &DriftSpec,
    cfg: &MeanFieldConfig,
) -> Result<(MeasureFlow, PicardDiagnostics)> {
    let incs = common_increments(common, cfg);
    let mut diag = PicardDiagnostics::default();
    let mut nu = initial;
    for n in 0..cfg.max_iterations {
        let next = phi_map_with_increments(&nu, &incs, drift, cfg)?;
        let gap = next.sup_tv(&nu)?;
        let ent = next
            .hists
            .iter()
            .zip(&nu.hists)
            .map(|(p, q)| entropy_estimate(p, q))
            .fold(0.0, f64::max);
        diag.gaps.push(gap);
        diag.entropy_max.push(ent);
        nu = next;
        if gap < cfg.tol {
            diag.converged_at = Some(n);
            break;
        }
    }
    Ok((nu, diag))
}

/// `Σ p_b ln(p_b / q_b)` with `0 ln 0 = 0`; `+∞` when `p` charges a bin `q` does not.
pub fn entropy_estimate(p: &HistogramMeasure, q: &HistogramMeasure) -> f64 {
    let mut h = 0.0;
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return f64::INFINITY;
        }
        h += a * (a / b).ln();
    }
    h
}
