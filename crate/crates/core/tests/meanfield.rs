use wfl_core::drift::{DriftSpec, ScalarFn};
use wfl_core::kernels::SpectralDecay;
use wfl_core::meanfield::{phi_map, picard_iterate, InitialLaw, MeanFieldConfig};
use wfl_core::noise::NoiseStream;
use wfl_core::state::BinLayout;

#[test]
fn fixed_point_is_self_consistent_across_idiosyncratic_streams() {
    let cfg = MeanFieldConfig {
        copies: 4000,
        horizon: 0.3,
        dt: 0.02,
        decay: SpectralDecay::new(2.0, 6.0, 0.2),
        layout: BinLayout::new(-4.0, 4.0, 16),
        initial: InitialLaw::Uniform { lo: -1.0, hi: 2.0 },
        seed: 11,
        idio_key: 0,
        max_iterations: 30,
        tol: 1e-9,
    };
    let drift = DriftSpec::B3 {
        a_x: ScalarFn::Tanh { amplitude: 1.0, scale: 1.0 },
        a_s: ScalarFn::Linear { slope: -1.0, intercept: 0.5 },
        psi: ScalarFn::Indicator { lo: 0.0, hi: f64::INFINITY },
    };
    let common = NoiseStream::new(2, 0);
    let (fixed, diag) = picard_iterate(cfg.initial_flow(), &common, &drift, &cfg).unwrap();
    assert!(diag.converged_at.is_some());
    let fresh = |key| phi_map(&fixed, &common, &drift, &MeanFieldConfig { idio_key: key, ..cfg.clone() }).unwrap();
    let (b, c) = (fresh(1), fresh(2));
    let floor = b.sup_tv(&c).unwrap();
    assert!(b.sup_tv(&fixed).unwrap() <= 2.0 * floor, "{} vs floor {floor}", b.sup_tv(&fixed).unwrap());
}
