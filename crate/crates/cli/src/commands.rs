//! One function per subcommand; each writes its CSVs into the output directory.

use rayon::prelude::*;

use wfl_core::acceptance::{holder_sweep, loglog_slope};
use wfl_core::arratia::{covariation_profile, run_arratia, CoalescingSystem};
use wfl_core::drift::DriftSpec;
use wfl_core::dynamics::{run_ensemble, run_with, RunOptions, SimConfig};
use wfl_core::girsanov::Inverter;
use wfl_core::kernels::{CutoffProfile, MassKernel, SpectralDecay};
use wfl_core::meanfield::picard_trace;
use wfl_core::noise::NoiseStream;
use wfl_core::state::{mass_function, tv_distance, HistogramMeasure, QuantileState};
use wfl_core::{Error, Result};

use crate::config::RunConfig;
use crate::output::{close, row, Output};

fn blank(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Advisory checks on the spectral truncation and the step size.
fn warn_sim(sim: &SimConfig) {
    let tail = sim.decay.tail_fraction();
    if tail > 1e-6 {
        eprintln!("warning: spectral tail beyond k_max carries {tail:.2e} of ||f||^2 (> 1e-6)");
    }
    let dt_max = sim.decay.grid().max_stable_dt();
    if sim.dt > dt_max {
        eprintln!("warning: dt = {} exceeds the stability heuristic {dt_max:.3e}", sim.dt);
    }
}

pub fn simulate(run: &RunConfig, out: &Output) -> Result<()> {
    let sim = run.sim()?;
    warn_sim(&sim);
    let g = run.initial_state(sim.particles)?;
    let runs = run_ensemble(&sim, &g, &run.drift(), RunOptions { record_stride: run.stride })?;
    let mut traj = out.table("trajectory.csv", &["path", "t", "i", "u", "y"])?;
    let mut summary = out.table("summary.csv", &["path", "i", "u", "y_T", "qv_realized", "qv_predicted", "exit_time", "max_inversion"])?;
    for (p, t) in runs.iter().enumerate() {
        for (time, state) in t.times.iter().zip(&t.states) {
            for (i, y) in state.values.iter().enumerate() {
                row(&mut traj, &[&p, time, &i, &state.u(i), y])?;
            }
        }
        let last = t.final_state();
        for i in 0..last.n() {
            let exit = blank(t.exit_time);
            row(&mut summary, &[&p, &i, &last.u(i), &last.values[i], &t.qv_realized[i], &t.qv_predicted[i], &exit, &t.max_inversion])?;
        }
    }
    close(traj)?;
    close(summary)
}

/// Realized `Σ Δy_i Δy_j` and predictable `Σ dt C(y_i − y_j)/√(m_i m_j)` per pair.
fn path_covariations(sim: &SimConfig, states: &[QuantileState]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = sim.particles;
    let grid = sim.decay.grid();
    let kernel = sim.effective_kernel();
    let mut realized = vec![vec![0.0; n]; n];
    let mut predicted = vec![vec![0.0; n]; n];
    for w in states.windows(2) {
        let (a, b) = (&w[0].values, &w[1].values);
        let m = mass_function(a, &kernel);
        for i in 0..n {
            for j in i..n {
                realized[i][j] += (b[i] - a[i]) * (b[j] - a[j]);
                predicted[i][j] += sim.dt * grid.covariance_kernel(a[i] - a[j]) / (m[i] * m[j]).sqrt();
            }
        }
    }
    (realized, predicted)
}

pub fn covariance(run: &RunConfig, out: &Output) -> Result<()> {
    let sim = run.sim()?;
    warn_sim(&sim);
    let g = run.initial_state(sim.particles)?;
    let drift = run.drift();
    let n = sim.particles;
    let per_path: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = (0..sim.paths as u64)
        .into_par_iter()
        .map(|p| {
            let t = run_with(&sim, &g, &drift, p, RunOptions { record_stride: 1 })?;
            Ok(path_covariations(&sim, &t.states))
        })
        .collect::<Result<_>>()?;
    let grid = sim.decay.grid();
    let m0 = mass_function(&g.values, &sim.effective_kernel());
    let paths = sim.paths as f64;
    let mut w = out.table("covariance.csv", &["i", "j", "u_i", "u_j", "lag0", "kernel", "empirical", "predicted"])?;
    for i in 0..n {
        for j in i..n {
            let lag = g.values[j] - g.values[i];
            let kernel = sim.horizon * grid.covariance_kernel(lag) / (m0[i] * m0[j]).sqrt();
            let emp = per_path.iter().map(|(r, _)| r[i][j]).sum::<f64>() / paths;
            let pred = per_path.iter().map(|(_, q)| q[i][j]).sum::<f64>() / paths;
            row(&mut w, &[&i, &j, &g.u(i), &g.u(j), &lag, &kernel, &emp, &pred])?;
        }
    }
    close(w)
}

pub fn invert(run: &RunConfig, out: &Output) -> Result<()> {
    let b = run.invert.as_ref().ok_or_else(|| Error::Config("missing [invert]".into()))?;
    let (lo, hi) = (b.support[0], b.support[1]);
    let mut levels = out.table("invert.csv", &["level", "k_max", "dk", "nodes", "residual_sup", "l2_norm_sq"])?;
    let mut finest = None;
    for (l, lv) in b.levels.iter().enumerate() {
        let inv = Inverter::covering(&SpectralDecay::new(b.alpha, lv[0], lv[1]), lo - b.margin, hi + b.margin)?;
        let h = inv.invert_constant_mass(&|x| b.target.eval(x), (lo, hi));
        row(&mut levels, &[&l, &lv[0], &lv[1], &inv.grid.len(), &h.residual_sup, &h.l2_norm_sq])?;
        finest = Some((inv, h));
    }
    close(levels)?;
    let (inv, h) = finest.expect("validated: at least one level");
    let mut hw = out.table("h.csv", &["k", "f", "h_re", "h_im"])?;
    for j in 0..inv.grid.len() {
        row(&mut hw, &[&inv.grid.k[j], &inv.grid.f[j], &h.h_re[j], &h.h_im[j]])?;
    }
    close(hw)?;
    let mut rw = out.table("reconstruction.csv", &["x", "target", "reconstructed"])?;
    for x in inv.x.points() {
        row(&mut rw, &[&x, &b.target.eval(x), &inv.reconstruct(&h, x)])?;
    }
    close(rw)?;
    if let Some(gi) = &b.general {
        let y = gi.initial.state(gi.particles)?;
        let profile = CutoffProfile::new(y.values[0], y.values[gi.particles - 1])?;
        let (a, c) = profile.support();
        let inv = Inverter::covering(&SpectralDecay::new(b.alpha, gi.k_max, gi.dk), a, c)?;
        let h = inv.invert_general(&gi.drift.prepare(&y), &y, &gi.kernel, &profile)?;
        let mut gw = out.table("general.csv", &["particles", "k_max", "dk", "residual_sup", "l2_norm_sq"])?;
        row(&mut gw, &[&gi.particles, &gi.k_max, &gi.dk, &h.residual_sup, &h.l2_norm_sq])?;
        close(gw)?;
    }
    Ok(())
}

pub fn regularize(run: &RunConfig, out: &Output) -> Result<()> {
    let b = run.regularize.as_ref().ok_or_else(|| Error::Config("missing [regularize]".into()))?;
    let eps: Vec<f64> = b.eps_exponents.iter().map(|&j| 2f64.powi(-j)).collect();
    let s_grid: Vec<f64> = (0..=b.s_steps)
        .map(|i| b.s_range[0] + (b.s_range[1] - b.s_range[0]) * i as f64 / b.s_steps as f64)
        .collect();
    let (gaps, lips) = holder_sweep(b.delta, b.coef, b.weights, &eps, &s_grid)?;
    let mut w = out.table("regularize.csv", &["eps", "gap", "lipschitz"])?;
    for k in 0..eps.len() {
        row(&mut w, &[&eps[k], &gaps[k], &lips[k]])?;
    }
    close(w)?;
    let mut f = out.table("fit.csv", &["quantity", "slope", "target"])?;
    let d = b.delta;
    row(&mut f, &[&"gap", &loglog_slope(&eps, &gaps), &(d / (2.0 - d))])?;
    row(&mut f, &[&"lipschitz", &loglog_slope(&eps, &lips), &((d - 1.0) / (2.0 - d))])?;
    close(f)
}

pub fn picard(run: &RunConfig, out: &Output) -> Result<()> {
    let b = run.picard.as_ref().ok_or_else(|| Error::Config("missing [picard]".into()))?;
    let cfg = run.ensemble()?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let common = NoiseStream::new(run.seed, b.common_path);
    let (nu, diag) = picard_trace(cfg.initial_flow(), &common, &b.drift, &cfg)?;
    let mut g = out.table("picard.csv", &["iteration", "gap", "entropy_max"])?;
    for (n, (gap, ent)) in diag.gaps.iter().zip(&diag.entropy_max).enumerate() {
        row(&mut g, &[&n, gap, ent])?;
    }
    close(g)?;
    let mut f = out.table("fixed_point.csv", &["t", "bin", "lo", "hi", "prob"])?;
    for (t, h) in nu.times.iter().zip(&nu.hists) {
        for (k, p) in h.probs.iter().enumerate() {
            row(&mut f, &[t, &k, &h.edges[k], &h.edges[k + 1], p])?;
        }
    }
    close(f)?;
    match diag.converged_at {
        Some(_) => Ok(()),
        None => Err(Error::Divergence { iterations: cfg.max_iterations, last_gap: diag.gaps.last().copied().unwrap_or(f64::NAN) }),
    }
}

pub fn peano(run: &RunConfig, out: &Output) -> Result<()> {
    let b = run.peano.as_ref().ok_or_else(|| Error::Config("missing [peano]".into()))?;
    let n = b.particles;
    let start = |s: f64| QuantileState::from_fn(n, move |u| u - 0.5 + s);
    let mean = |q: &QuantileState| q.values.iter().sum::<f64>() / n as f64;
    let eps = b.perturbation;

    let mut det = SimConfig::new(b.horizon, b.dt, n, SpectralDecay::silent(), MassKernel::Constant);
    det.seed = run.seed;
    let opts = RunOptions { record_stride: run.stride };
    let up = run_with(&det, &start(eps), &DriftSpec::Peano, 0, opts)?;
    let down = run_with(&det, &start(-eps), &DriftSpec::Peano, 0, opts)?;
    let mut w = out.table("peano_deterministic.csv", &["t", "mean_plus", "mean_minus"])?;
    for k in 0..up.times.len() {
        row(&mut w, &[&up.times[k], &mean(&up.states[k]), &mean(&down.states[k])])?;
    }
    close(w)?;
    let split = (mean(up.final_state()) - mean(down.final_state())).abs();

    let mut noisy = SimConfig::new(b.horizon, b.dt, n, b.decay, MassKernel::Constant);
    noisy.seed = run.seed;
    noisy.paths = run.paths;
    let pooled = |s: f64| -> Result<HistogramMeasure> {
        let runs = run_ensemble(&noisy, &start(s), &DriftSpec::Peano, RunOptions { record_stride: 0 })?;
        let all: Vec<f64> = runs.iter().flat_map(|t| t.final_state().values.clone()).collect();
        Ok(HistogramMeasure::from_samples(&b.layout, &all))
    };
    let (p, q) = (pooled(eps)?, pooled(-eps)?);
    let tv = tv_distance(&p, &q)?;
    let mut h = out.table("peano_noisy.csv", &["bin", "lo", "hi", "p_plus", "p_minus"])?;
    for k in 0..p.bins() {
        row(&mut h, &[&k, &p.edges[k], &p.edges[k + 1], &p.probs[k], &q.probs[k]])?;
    }
    close(h)?;
    let mut s = out.table("peano_summary.csv", &["quantity", "value"])?;
    row(&mut s, &[&"deterministic_split", &split])?;
    row(&mut s, &[&"noisy_tv", &tv])?;
    close(s)
}

pub fn arratia(run: &RunConfig, out: &Output) -> Result<()> {
    let b = run.arratia.as_ref().ok_or_else(|| Error::Config("missing [arratia]".into()))?;
    let n = b.particles;
    let g = b.initial.state(n)?;
    let init = CoalescingSystem::new(&g.values)?;
    let steps = (b.horizon / b.dt).round() as usize;
    let pairs: Vec<(usize, usize)> = (0..n).map(|j| (0, j)).collect();
    let runs: Vec<_> = (0..run.paths as u64)
        .into_par_iter()
        .map(|p| run_arratia(&init, b.dt, steps, run.seed, p, run.stride, &pairs))
        .collect::<Result<_>>()?;

    let mut w = out.table("arratia.csv", &["t", "cluster_id", "position", "mass"])?;
    for (t, clusters) in &runs[0].snapshots {
        for c in clusters {
            row(&mut w, &[t, &c.first, &c.position, &(c.count as f64 / n as f64)])?;
        }
    }
    close(w)?;

    let paths = run.paths as f64;
    let grid = b.decay.grid();
    let m0 = mass_function(&g.values, &b.kernel);
    let mut cov = out.table("covariation.csv", &["u", "u_prime", "value"])?;
    let mut cmp = out.table("comparison.csv", &["u", "u_prime", "lag", "spectral", "arratia_realized", "arratia_predicted"])?;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let predicted = runs.iter().map(|r| covariation_profile(&r.last, i, j)).sum::<f64>() / paths;
        let realized = runs.iter().map(|r| r.realized[k]).sum::<f64>() / paths;
        let lag = g.values[j] - g.values[i];
        let spectral = b.horizon * grid.covariance_kernel(lag) / (m0[i] * m0[j]).sqrt();
        row(&mut cov, &[&g.u(i), &g.u(j), &predicted])?;
        row(&mut cmp, &[&g.u(i), &g.u(j), &lag, &spectral, &realized, &predicted])?;
    }
    close(cov)?;
    close(cmp)
}
