//! Built-in reference scenarios, one per theorem regime plus the numerical
//! checks (bifurcation location, vertical branch, fold, logistic case).
//! Copies live in `configs/*.json`.

use std::path::PathBuf;

use crate::continuation::{BranchContext, ContinuationSettings};
use crate::elliptic::{principal_eigenpair, EigenPair, Mesh1D};
use crate::error::{Error, Result};
use crate::model::{Coefficient, GFunction, ParamsSpec, ProblemParams, Regime, ScenarioConfig, ToleranceSettings};

pub const REFERENCE_MESH_N: usize = 511;

fn lit(x: f64) -> Coefficient {
    Coefficient::Value(x)
}

fn l1(k: f64) -> Coefficient {
    Coefficient::TimesLambda1 { factor: k }
}

fn scenario(name: &str, regime: Option<Regime>, a: Coefficient, b: Coefficient, p: f64, r: f64, g: GFunction) -> ScenarioConfig {
    ScenarioConfig {
        name: Some(name.to_owned()),
        regime,
        params: ParamsSpec { a, b, p, r },
        g,
        mesh_n: REFERENCE_MESH_N,
        lambda_window: None,
        continuation: ContinuationSettings::default(),
        tolerances: ToleranceSettings::default(),
        output_dir: PathBuf::from("out").join(name),
    }
}

/// All reference scenarios, in a fixed order.
pub fn reference_scenarios() -> Vec<ScenarioConfig> {
    let sat = GFunction::Saturating { alpha: 1.0, beta: 1.0 };
    let dec = GFunction::Decaying { alpha: 1.0 };
    let one = GFunction::Constant { g0: 1.0 };

    // The fold sits near λ = 3.2, beyond the default window, and the root
    // lies on the large-norm return branch.
    let b_ii = ScenarioConfig {
        lambda_window: Some((0.003, 10.0)),
        continuation: ContinuationSettings { norm_cap: 300.0, ..ContinuationSettings::default() },
        ..scenario("theorem_b_ii", Some(Regime::BII), lit(27.0), lit(1.0), 3.0, 2.0, GFunction::Constant { g0: 3.0 })
    };
    let vertical = ScenarioConfig {
        continuation: ContinuationSettings { norm_cap: 150.0, ds_max: 5.0, ..ContinuationSettings::default() },
        ..scenario("vertical_branch", Some(Regime::C), lit(5.0), l1(1.0), 1.5, 1.5, one.clone())
    };
    let capped = |s: ScenarioConfig| ScenarioConfig {
        continuation: ContinuationSettings { norm_cap: 100.0, ..ContinuationSettings::default() },
        ..s
    };
    vec![
        scenario("theorem_a_i", Some(Regime::AI), lit(20.0), lit(0.0), 2.0, 2.0, sat.clone()),
        scenario("theorem_a_ii", Some(Regime::AII), lit(20.0), l1(0.5), 2.0, 2.0, sat.clone()),
        scenario("theorem_a_iii", Some(Regime::AIII), lit(20.0), lit(2.0), 2.0, 3.0, sat),
        capped(scenario("theorem_b_i", Some(Regime::BI), l1(0.5), l1(2.0), 2.0, 2.0, dec.clone())),
        b_ii,
        capped(scenario("theorem_c_solvable", Some(Regime::C), l1(0.5), l1(1.0), 1.5, 1.5, dec.clone())),
        capped(scenario("theorem_c_unsolvable", None, l1(2.0), l1(1.0), 1.5, 1.5, dec)),
        vertical,
        scenario("bifurcation_location", Some(Regime::AI), lit(20.0), lit(0.0), 2.0, 2.0, one.clone()),
        scenario("multiplicity", None, l1(1.0), lit(2.0), 2.0, 3.0, one.clone()),
        scenario("logistic_negative_b", Some(Regime::AI), l1(2.0), lit(-1.0), 2.0, 2.0, one),
    ]
}

pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    reference_scenarios().into_iter().find(|s| s.name.as_deref() == Some(name))
}

/// Mesh, discrete eigenpair and resolved parameters of a scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub mesh: Mesh1D,
    pub eig: EigenPair,
    pub params: ProblemParams,
    pub window: (f64, f64),
}

impl Prepared {
    /// Builds the mesh and eigenpair and validates the scenario against them.
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let structural = config.violations();
        if !structural.is_empty() {
            return Err(Error::Config(structural.join("; ")));
        }
        let mesh = Mesh1D::new(config.mesh_n)?;
        let eig = principal_eigenpair(&mesh, config.tolerances.eig_tol)?;
        let outcome = config.validate(eig.lambda1);
        if !outcome.is_ok() {
            return Err(Error::Config(outcome.violations.join("; ")));
        }
        let params = config.resolve_params(eig.lambda1);
        let window = config.lambda_window(&params, eig.lambda1);
        Ok(Self { config, mesh, eig, params, window })
    }

    pub fn context(&self) -> BranchContext<'_> {
        BranchContext::new(&self.mesh, &self.params, &self.eig, &self.config.tolerances)
    }
}
