use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;

use kirchhoff_core::model::{validate_params, validate_params_with};
use kirchhoff_core::scenarios::reference_scenarios;
use kirchhoff_core::{GFunction, ProblemParams, ScenarioConfig};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_match_builtins() {
    let builtins = reference_scenarios();
    let mut on_disk = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        on_disk += 1;
        let parsed = ScenarioConfig::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
        let stem = path.file_stem().unwrap().to_str().unwrap();
        let builtin = builtins.iter().find(|s| s.name.as_deref() == Some(stem)).unwrap_or_else(|| panic!("{stem}"));
        assert_eq!(&parsed, builtin, "{stem}");
    }
    assert_eq!(on_disk, builtins.len());
}

#[test]
fn config_json_round_trips() {
    for s in reference_scenarios() {
        assert_eq!(ScenarioConfig::from_json(&s.to_json_pretty()).unwrap(), s);
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&reference_scenarios()[0].to_json_pretty()).unwrap();
    v["bogus"] = serde_json::json!(1);
    assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
}

#[test]
fn validation_is_deterministic_and_idempotent() {
    let l1 = std::f64::consts::PI.powi(2);
    let cases = [
        (ProblemParams::new(20.0, 0.0, 2.0, 2.0), GFunction::Saturating { alpha: 1.0, beta: 1.0 }),
        (ProblemParams::new(-1.0, 0.0, 2.0, 2.0), GFunction::Constant { g0: 1.0 }),
        (ProblemParams::new(5.0, 2.0, 0.5, 1.0), GFunction::Decaying { alpha: 0.0 }),
    ];
    for (p, g) in &cases {
        let first = validate_params(p, g);
        assert_eq!(first, validate_params(p, g));
        assert_eq!(validate_params_with(p, g, l1), validate_params_with(p, g, l1));
    }
    assert!(validate_params(&cases[0].0, &cases[0].1).is_ok());
    assert!(!validate_params(&cases[1].0, &cases[1].1).is_ok());
    assert!(!validate_params(&cases[2].0, &cases[2].1).is_ok());
}

proptest! {
    #[test]
    fn saturating_bounds_and_monotone(
        alpha in 0.01f64..10.0,
        beta in 0.0f64..10.0,
        s in 0.0f64..1e6,
        ds in 0.0f64..1e3,
    ) {
        let g = GFunction::Saturating { alpha, beta };
        let (g0, g1) = (g.eval(s).unwrap(), g.eval(s + ds).unwrap());
        prop_assert!(alpha <= g0);
        prop_assert!(g0 < alpha + beta || beta == 0.0);
        prop_assert!(g1 >= g0);
    }

    #[test]
    fn decaying_bounds_and_monotone(alpha in 0.01f64..10.0, s in 0.0f64..1e6, ds in 0.0f64..1e3) {
        let g = GFunction::Decaying { alpha };
        let (g0, g1) = (g.eval(s).unwrap(), g.eval(s + ds).unwrap());
        prop_assert!(g0 > 0.0 && g0 <= alpha);
        prop_assert!(g1 <= g0);
    }

    #[test]
    fn decaying_range_on_interval(alpha in 0.01f64..10.0, big_s in 0.0f64..1e3) {
        let g = GFunction::Decaying { alpha };
        let samples: Vec<f64> = (0..=200).map(|k| g.eval(big_s * k as f64 / 200.0).unwrap()).collect();
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((hi - alpha).abs() <= 1e-15 * alpha);
        prop_assert!((lo - alpha / (1.0 + big_s)).abs() <= 1e-12 * alpha);
    }

    #[test]
    fn range_contains_sampled_values(alpha in 0.01f64..10.0, beta in 0.0f64..10.0, s in 0.0f64..1e6) {
        for g in [GFunction::Saturating { alpha, beta }, GFunction::Decaying { alpha }, GFunction::Constant { g0: alpha }] {
            prop_assert!(g.range().contains(g.eval(s).unwrap()), "{:?}", g);
        }
    }
}
