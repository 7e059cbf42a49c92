use ipmsm_observer::filters::{LowPassState, SampledLowPass};
use proptest::prelude::*;

proptest! {
    #[test]
    fn zoh_step_is_exact(alpha in 1.0..5000.0f64, dt in 1e-6..1e-3f64, z0 in -5.0..5.0f64, u in -5.0..5.0f64) {
        let mut f = LowPassState::new(alpha, dt).unwrap().with_state(z0);
        let y = f.h2_step(u);
        let exact = u + (z0 - u) * (-alpha * dt).exp();
        prop_assert!((y - exact).abs() < 1e-13);
    }

    #[test]
    fn decay_factor_in_unit_interval(alpha in 1e-3..1e5f64, dt in 1e-7..1e-2f64) {
        match LowPassState::new(alpha, dt) {
            Ok(f) => prop_assert!(f.decay() > 0.0 && f.decay() < 1.0),
            Err(_) => prop_assert!(alpha * dt > 700.0),
        }
    }

    #[test]
    fn h2_output_stays_in_input_hull(u in prop::collection::vec(-3.0..3.0f64, 1..200)) {
        let mut f = LowPassState::new(700.0, 1e-4).unwrap();
        let (lo, hi) = u.iter().fold((0.0f64, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        for &v in &u {
            let y = f.h2_step(v);
            prop_assert!(y >= lo - 1e-15 && y <= hi + 1e-15);
        }
    }

    #[test]
    fn h1_plus_h2_reconstructs_input(u in prop::collection::vec(-3.0..3.0f64, 1..200)) {
        let alpha = 628.0;
        let mut f = LowPassState::new(alpha, 1e-4).unwrap();
        let mut g = f;
        for &v in &u {
            let h2 = f.h2_step(v);
            let h1 = g.h1_step(v);
            prop_assert!((h1 / alpha + h2 - v).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_filter_is_linear(u in prop::collection::vec(-3.0..3.0f64, 8..100),
                                w in prop::collection::vec(-3.0..3.0f64, 8..100),
                                a in -2.0..2.0f64, order in 0usize..=5) {
        let n = u.len().min(w.len());
        let mk = || SampledLowPass::<f64>::new(628.0, 1e-4, order).unwrap();
        let (mut fu, mut fw, mut fs) = (mk(), mk(), mk());
        for k in 0..n {
            let yu = fu.step(u[k]);
            let yw = fw.step(w[k]);
            let ys = fs.step(a * u[k] + w[k]);
            prop_assert!((ys - (a * yu + yw)).abs() < 1e-12);
        }
    }
}
