use wfl_core::drift::{DriftSpec, ScalarFn};
use wfl_core::dynamics::{RunOptions, SimConfig};
use wfl_core::girsanov::{invert_constant_mass, novikov_bound, run_reweighted, Inverter};
use wfl_core::kernels::fourier::UniformGrid;
use wfl_core::kernels::{bracket, eval_f, MassKernel, SpectralDecay};
use wfl_core::state::QuantileState;

#[test]
fn h_norm_is_path_independent_for_frozen_measure() {
    let decay = SpectralDecay::new(2.0, 10.0, 0.1);
    let mut cfg = SimConfig::new(0.05, 0.01, 8, decay, MassKernel::Constant);
    cfg.seed = 3;
    let g = QuantileState::from_fn(8, |u| u - 0.5);
    let drift = DriftSpec::B3 {
        a_x: ScalarFn::Gaussian { amplitude: 0.8, scale: 0.6 },
        a_s: ScalarFn::Constant { value: 1.0 },
        psi: ScalarFn::Constant { value: 0.0 },
    };
    let x = UniformGrid::covering(-8.0, 8.0, std::f64::consts::FRAC_PI_2 / decay.k_max);
    let a = run_reweighted(&cfg, &g, &drift, x, 0, None, RunOptions::default()).unwrap().girsanov.unwrap();
    let b = run_reweighted(&cfg, &g, &drift, x, 7, None, RunOptions::default()).unwrap().girsanov.unwrap();
    assert_eq!(a.int_h_sq, b.int_h_sq);
    assert_ne!(a.log_weight, b.log_weight);
    let derived = a.novikov_bound.expect("bounded drift has a derived bound");
    assert!(a.int_h_sq <= derived && !a.bound_violated);

    let values: Vec<f64> = x.points().iter().map(|&t| 0.8 * (-0.5 * (t / 0.6f64).powi(2)).exp()).collect();
    let h = invert_constant_mass(&values, &x, &decay).unwrap();
    assert!((a.int_h_sq - cfg.horizon * h.l2_norm_sq).abs() < 1e-9 * a.int_h_sq);

    let bounded = run_reweighted(&cfg, &g, &drift, x, 0, Some(0.5 * a.int_h_sq), RunOptions::default()).unwrap();
    assert!(bounded.girsanov.unwrap().bound_violated);
}

/// `Σ |⟨k⟩^{−η} ⟨k⟩^{−1/2} / f(k)|² dk` on `[−K, K]`.
fn spectral_h_norm(alpha: f64, eta: f64, k_max: f64) -> f64 {
    let decay = SpectralDecay::new(alpha, k_max, 0.05);
    decay.nodes().iter().map(|&k| (bracket(k).powf(-eta - 0.5) / eval_f(&decay, k)).powi(2)).sum::<f64>() * decay.dk
}

#[test]
fn h_norm_is_finite_only_when_eta_dominates_alpha() {
    let ks = [25.0, 50.0, 100.0, 200.0];
    let above: Vec<f64> = ks.iter().map(|&k| spectral_h_norm(2.0, 2.3, k)).collect();
    let below: Vec<f64> = ks.iter().map(|&k| spectral_h_norm(2.0, 1.7, k)).collect();
    for w in above.windows(2) {
        assert!(w[1] - w[0] < 0.05 * w[0], "{above:?}");
    }
    for w in below.windows(2) {
        assert!(w[1] > 1.3 * w[0], "{below:?}");
    }
}

#[test]
fn interpolation_split_reconstructs_the_irregular_part() {
    use wfl_core::drift::{regularize_lambda, Envelope, FamilySpec, MeasureFunctional, SpectralDriftSpec};
    use wfl_core::girsanov::invert_interpolation_split;
    use wfl_core::state::{BinLayout, HistogramMeasure};

    let layout = BinLayout::new(-2.0, 2.0, 4);
    let spec = SpectralDriftSpec {
        eta: 2.0,
        delta: 2.0 / 3.0,
        decay: SpectralDecay::new(2.0, 5.0, 0.1),
        envelope: Envelope { amplitude: 1.0, decay: 1.0 },
        u_re: MeasureFunctional::HolderMass { lo: 0.0, hi: 1.0, center: 0.5, coef: 0.5, delta: 2.0 / 3.0 },
        u_im: MeasureFunctional::Constant { value: 0.3 },
        layout,
        family: FamilySpec { weights: 33 },
    };
    let reg = regularize_lambda(&spec).unwrap();
    let mu = HistogramMeasure::from_probs(layout.edges(), vec![0.1, 0.2, 0.45, 0.25]).unwrap();
    let h = invert_interpolation_split(&reg, &mu).unwrap();
    assert!(h.residual_sup < 1e-12, "{}", h.residual_sup);
    assert!(h.l2_norm_sq > 0.0);
    assert!(h.h_im.iter().all(|v| *v == 0.0));
}

#[test]
fn derived_novikov_bound_needs_a_bounded_drift() {
    let decay = SpectralDecay::new(2.0, 10.0, 0.1);
    let inv = Inverter::covering(&decay, -4.0, 4.0).unwrap();
    let linear = DriftSpec::B1 { a: ScalarFn::Linear { slope: 1.0, intercept: 0.0 } };
    assert!(novikov_bound(&linear, &inv, &MassKernel::Constant, 1.0).is_none());

    let bump = DriftSpec::B1 { a: ScalarFn::Gaussian { amplitude: 1.0, scale: 0.5 } };
    let flat = novikov_bound(&bump, &inv, &MassKernel::Constant, 1.0).unwrap();
    let wide = novikov_bound(&bump, &inv, &MassKernel::Gaussian { scale: 0.1 }, 2.0).unwrap();
    let phi0 = 1.0 / (0.1 * (2.0 * std::f64::consts::PI).sqrt());
    assert!((wide / flat - 2.0 * phi0).abs() < 1e-9 * wide);

    let values: Vec<f64> = inv.x.points().iter().map(|&t| (-2.0 * t * t).exp()).collect();
    assert!(inv.invert_values(&values).l2_norm_sq <= flat);
}
