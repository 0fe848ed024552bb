use wfl_core::drift::DriftSpec;
use wfl_core::dynamics::{run_ensemble, MonotoneRepair, RunOptions, SimConfig};
use wfl_core::kernels::{MassKernel, SpectralDecay};
use wfl_core::noise::increment_covariance;
use wfl_core::state::{mass_function, monotonicity_report, QuantileState};

fn frobenius(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn covariance_converges_under_k_refinement() {
    let y = QuantileState::from_fn(12, |u| 3.0 * u - 1.5);
    let m = mass_function(&y.values, &MassKernel::Gaussian { scale: 0.7 });
    let cov = |dk: f64| increment_covariance(&y.values, &m, &SpectralDecay::new(2.0, 8.0, dk).grid(), 1.0);
    let reference = cov(0.0025);
    let d: Vec<f64> = [0.4, 0.2, 0.1].iter().map(|&dk| frobenius(&cov(dk), &reference)).collect();
    for (w, dk) in d.windows(2).zip([0.4, 0.2]) {
        assert!(w[1] <= 0.6 * w[0], "{d:?}");
        assert!(w[0] <= dk, "{d:?}");
    }
}

#[test]
fn adjacent_inversions_stay_small_without_repair() {
    let mut cfg = SimConfig::new(0.1, 1e-4, 128, SpectralDecay::new(3.0, 6.0, 0.25), MassKernel::Constant);
    cfg.monotone_repair = MonotoneRepair::Off;
    cfg.paths = 1000;
    cfg.seed = 17;
    let g = QuantileState::from_fn(128, |u| u - 0.5);
    let runs = run_ensemble(&cfg, &g, &DriftSpec::Zero, RunOptions { record_stride: 0 }).unwrap();
    let good = runs.iter().filter(|t| t.max_inversion < 1e-3).count();
    assert!(good * 100 >= 99 * runs.len(), "{good}");
    assert!(runs.iter().all(|t| monotonicity_report(&t.final_state().values).1 < 1e-3));
}

#[test]
fn realized_quadratic_variation_matches_predictable_part() {
    let mut cfg = SimConfig::new(1.0, 1e-3, 8, SpectralDecay::new(2.0, 10.0, 0.1), MassKernel::Gaussian { scale: 1.0 });
    cfg.paths = 200;
    cfg.seed = 5;
    let g = QuantileState::from_fn(8, |u| 2.0 * u - 1.0);
    let runs = run_ensemble(&cfg, &g, &DriftSpec::Zero, RunOptions { record_stride: 0 }).unwrap();
    for i in 0..8 {
        let real: f64 = runs.iter().map(|t| t.qv_realized[i]).sum::<f64>() / runs.len() as f64;
        let pred: f64 = runs.iter().map(|t| t.qv_predicted[i]).sum::<f64>() / runs.len() as f64;
        assert!((real - pred).abs() < 0.1 * pred, "{i}: {real} vs {pred}");
    }

    let mut flat = cfg.clone();
    flat.kernel = MassKernel::Constant;
    let runs = run_ensemble(&flat, &g, &DriftSpec::Zero, RunOptions { record_stride: 0 }).unwrap();
    let want = flat.horizon * flat.decay.grid().f_norm_sq();
    for t in &runs {
        for &p in &t.qv_predicted {
            assert!((p - want).abs() < 1e-9 * want);
        }
    }
}
