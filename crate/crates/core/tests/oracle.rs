mod common;

use common::{fgh_oracle, phi_oracle};
use proptest::prelude::*;
use si_age::equilibria::{eval_fgh, eval_phi};
use si_age::{presets, Model};

const ORACLE_CELLS: usize = 4002;

fn preset(ix: usize) -> si_age::ModelSpec {
    [presets::choices(), presets::plus(34.0), presets::choices_stab(), presets::choices2(), presets::choices3()][ix].clone()
}

#[test]
fn fgh_against_trapezoid_at_fixed_points() {
    for (ix, alpha, w) in [(0, 10.0, 0.0), (0, 10.0, 3.2), (2, 0.0, 5.045), (3, 0.9, 10.8), (4, 12.0, 0.42)] {
        let spec = preset(ix);
        let m = Model::new(spec.clone()).unwrap();
        let got = eval_fgh(&m, alpha, w).unwrap();
        let (f, g, h) = fgh_oracle(&spec, alpha, w, ORACLE_CELLS);
        for (x, y) in [(got.f, f), (got.g, g), (got.h, h)] {
            assert!((x - y).abs() < 1e-7 * (1.0 + y.abs()), "preset {ix}, alpha {alpha}, W {w}: {x} vs {y}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn phi_matches_trapezoid_oracle(ix in 0usize..5, alpha in 0.0f64..25.0, w in 0.0f64..30.0) {
        let spec = preset(ix);
        let m = Model::new(spec.clone()).unwrap();
        let got = eval_phi(&m, alpha, w).unwrap();
        let want = phi_oracle(&spec, alpha, w, ORACLE_CELLS);
        prop_assert!((got - want).abs() < 1e-6, "preset {}, alpha {}, W {}: {} vs {}", ix, alpha, w, got, want);
    }
}
