//! Problem parameters, the catalogue of nonlocal coefficients `g`, scenario
//! configuration and validation.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::continuation::ContinuationSettings;
use crate::error::{domain, Error, Result};
use crate::qmap::phi_smax;

/// Relative tolerance used when a scenario asks whether `b == lambda_1` or
/// `r == p`.
pub const EQUALITY_RTOL: f64 = 1e-9;

pub(crate) fn approx_eq(x: f64, y: f64, rtol: f64) -> bool {
    (x - y).abs() <= rtol * x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

/// Constants `a, b, p, r` of the equation `-(g u + u^r)'' = a u + b u^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub r: f64,
}

impl ProblemParams {
    pub fn new(a: f64, b: f64, p: f64, r: f64) -> Self {
        Self { a, b, p, r }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [("a", self.a), ("b", self.b), ("p", self.p), ("r", self.r)] {
            if !x.is_finite() {
                v.push(format!("{name} must be finite"));
            }
        }
        if !(self.p > 1.0) {
            v.push("p>1 required".to_owned());
        }
        if !(self.r > 1.0) {
            v.push("r>1 required".to_owned());
        }
        if !(self.a > 0.0) {
            v.push("a>0 required".to_owned());
        }
        v
    }

    pub fn r_equals_p(&self) -> bool {
        approx_eq(self.r, self.p, 1e-12)
    }
}

/// Closed catalogue of nonlocal coefficients `g : [0, inf) -> [0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GFunction {
    /// `g(s) = g0`.
    Constant { g0: f64 },
    /// `g(s) = alpha + beta s / (1 + s)`.
    Saturating { alpha: f64, beta: f64 },
    /// `g(s) = alpha / (1 + s)`.
    Decaying { alpha: f64 },
    /// Piecewise linear through `(s, g)` knots, constant past the last knot.
    /// The first knot must sit at `s = 0`.
    TableLinear { knots: Vec<(f64, f64)> },
}

/// An interval of reals with open or closed ends, used for the range `R[g]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x, lo_closed: true, hi_closed: true }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    /// True when `x` lies within `rtol` (relative) of one of the endpoints.
    pub fn near_boundary(&self, x: f64, rtol: f64) -> bool {
        approx_eq(x, self.lo, rtol) || approx_eq(x, self.hi, rtol)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi && self.lo_closed && self.hi_closed {
            return write!(f, "{{{}}}", self.lo);
        }
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

impl GFunction {
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(domain(format!("g evaluated at s = {s}; need finite s >= 0")));
        }
        Ok(match self {
            GFunction::Constant { g0 } => *g0,
            GFunction::Saturating { alpha, beta } => alpha + beta * s / (1.0 + s),
            GFunction::Decaying { alpha } => alpha / (1.0 + s),
            GFunction::TableLinear { knots } => table_eval(knots, s),
        })
    }

    /// `g(0)`.
    pub fn at_zero(&self) -> f64 {
        self.eval(0.0).unwrap_or(f64::NAN)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match self {
            GFunction::Constant { g0 } => {
                if !(*g0 > 0.0 && g0.is_finite()) {
                    v.push("Constant g requires g0>0".to_owned());
                }
            }
            GFunction::Saturating { alpha, beta } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    v.push("Saturating g requires alpha>0".to_owned());
                }
                if !(*beta >= 0.0 && beta.is_finite()) {
                    v.push("Saturating g requires beta>=0".to_owned());
                }
            }
            GFunction::Decaying { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    v.push("Decaying g requires alpha>0".to_owned());
                }
            }
            GFunction::TableLinear { knots } => {
                if knots.is_empty() {
                    v.push("TableLinear g requires at least one knot".to_owned());
                } else {
                    if knots[0].0 != 0.0 {
                        v.push("TableLinear g: first knot must be at s=0".to_owned());
                    }
                    if knots.windows(2).any(|k| !(k[1].0 > k[0].0)) {
                        v.push("TableLinear g: knots must be strictly increasing in s".to_owned());
                    }
                    if knots.iter().any(|k| !(k.1 >= 0.0) || !k.0.is_finite() || !k.1.is_finite()) {
                        v.push("TableLinear g: values must be finite and nonnegative".to_owned());
                    }
                }
            }
        }
        v
    }

    /// `inf_{s>0} g(s)`.
    pub fn infimum(&self) -> f64 {
        match self {
            GFunction::Constant { g0 } => *g0,
            GFunction::Saturating { alpha, beta } => alpha.min(alpha + beta),
            GFunction::Decaying { .. } => 0.0,
            GFunction::TableLinear { knots } => {
                knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// `sup_{s>=0} g(s)`.
    pub fn supremum(&self) -> f64 {
        match self {
            GFunction::Constant { g0 } => *g0,
            GFunction::Saturating { alpha, beta } => alpha.max(alpha + beta),
            GFunction::Decaying { alpha } => *alpha,
            GFunction::TableLinear { knots } => {
                knots.iter().map(|k| k.1).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Positive lower bound on `g` over `(0, inf)`.
    pub fn satisfies_g1(&self) -> bool {
        self.violations().is_empty() && self.infimum() > 0.0
    }

    /// Bounded with `g(0) > 0`.
    pub fn satisfies_g2(&self) -> bool {
        self.violations().is_empty() && self.supremum().is_finite() && self.at_zero() > 0.0
    }

    /// `g(s) > 0` for every `s >= 0`.
    pub fn is_positive(&self) -> bool {
        self.violations().is_empty()
            && match self {
                GFunction::Decaying { alpha } => *alpha > 0.0,
                _ => self.infimum() > 0.0,
            }
    }

    /// The range `R[g] = { g(s) : s >= 0 }`.
    pub fn range(&self) -> Interval {
        match self {
            GFunction::Constant { g0 } => Interval::point(*g0),
            GFunction::Saturating { alpha, beta } => {
                if *beta == 0.0 {
                    Interval::point(*alpha)
                } else {
                    Interval { lo: *alpha, hi: alpha + beta, lo_closed: true, hi_closed: false }
                }
            }
            GFunction::Decaying { alpha } => {
                Interval { lo: 0.0, hi: *alpha, lo_closed: false, hi_closed: true }
            }
            GFunction::TableLinear { .. } => Interval {
                lo: self.infimum(),
                hi: self.supremum(),
                lo_closed: true,
                hi_closed: true,
            },
        }
    }

    /// Smallest `s >= 0` with `g(s) = target`, if any. A constant `g` has no
    /// distinguished preimage and returns `None` here; callers handle that
    /// degenerate case themselves.
    pub fn invert(&self, target: f64) -> Option<f64> {
        if !self.range().contains(target) {
            return None;
        }
        match self {
            GFunction::Constant { .. } => None,
            GFunction::Saturating { alpha, beta } => {
                if *beta == 0.0 {
                    return Some(0.0);
                }
                Some((target - alpha) / (alpha + beta - target))
            }
            GFunction::Decaying { alpha } => Some(alpha / target - 1.0),
            GFunction::TableLinear { knots } => {
                if knots[0].1 == target {
                    return Some(0.0);
                }
                knots.windows(2).find_map(|k| {
                    let (s0, v0) = k[0];
                    let (s1, v1) = k[1];
                    let lo = v0.min(v1);
                    let hi = v0.max(v1);
                    if target >= lo && target <= hi && v1 != v0 {
                        Some(s0 + (target - v0) * (s1 - s0) / (v1 - v0))
                    } else if v1 == target {
                        Some(s1)
                    } else {
                        None
                    }
                })
            }
        }
    }
}

fn table_eval(knots: &[(f64, f64)], s: f64) -> f64 {
    let last = knots[knots.len() - 1];
    if s >= last.0 {
        return last.1;
    }
    if s <= knots[0].0 {
        return knots[0].1;
    }
    let i = knots.partition_point(|k| k.0 <= s);
    let (s0, v0) = knots[i - 1];
    let (s1, v1) = knots[i];
    v0 + (v1 - v0) * (s - s0) / (s1 - s0)
}

/// Standalone evaluation of `g`; negative `s` is a domain error.
pub fn g_eval(g: &GFunction, s: f64) -> Result<f64> {
    g.eval(s)
}

/// Theorem hypotheses a scenario may invoke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "A(i)")]
    AI,
    #[serde(rename = "A(ii)")]
    AII,
    #[serde(rename = "A(iii)")]
    AIII,
    #[serde(rename = "B(i)")]
    BI,
    #[serde(rename = "B(ii)")]
    BII,
    #[serde(rename = "C")]
    C,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::AI => "A(i)",
            Regime::AII => "A(ii)",
            Regime::AIII => "A(iii)",
            Regime::BI => "B(i)",
            Regime::BII => "B(ii)",
            Regime::C => "C",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationOutcome {
    pub violations: Vec<String>,
    pub g1: bool,
    pub g2: bool,
    pub regimes: Vec<Regime>,
}

impl ValidationOutcome {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the parameter and `g` invariants and classifies the scenario
/// against the theorem hypotheses, using the continuum eigenvalue `pi^2`.
pub fn validate_params(params: &ProblemParams, g: &GFunction) -> ValidationOutcome {
    validate_params_with(params, g, std::f64::consts::PI.powi(2))
}

/// As [`validate_params`], with an explicit principal eigenvalue (typically
/// the discrete one).
pub fn validate_params_with(params: &ProblemParams, g: &GFunction, lambda1: f64) -> ValidationOutcome {
    let mut violations = params.violations();
    violations.extend(g.violations());
    let g1 = g.satisfies_g1();
    let g2 = g.satisfies_g2();
    let regimes = if violations.is_empty() {
        classify_regimes(params, g, lambda1)
    } else {
        Vec::new()
    };
    ValidationOutcome { violations, g1, g2, regimes }
}

/// Regimes whose hypotheses hold. `b == lambda1` and `r == p` are compared
/// with [`EQUALITY_RTOL`].
pub fn classify_regimes(params: &ProblemParams, g: &GFunction, lambda1: f64) -> Vec<Regime> {
    let ProblemParams { a, b, p, r } = *params;
    let g_zero = g.at_zero();
    let r_eq_p = params.r_equals_p();
    let b_eq_l1 = approx_eq(b, lambda1, EQUALITY_RTOL);
    let mut out = Vec::new();

    if g.satisfies_g1() && a > g_zero * lambda1 {
        if b <= 0.0 {
            out.push(Regime::AI);
        } else if r_eq_p && b < lambda1 && !b_eq_l1 {
            out.push(Regime::AII);
        } else if r > p && !r_eq_p {
            out.push(Regime::AIII);
        }
    }
    if g.satisfies_g2() && a < g_zero * lambda1 {
        if r_eq_p && b > lambda1 && !b_eq_l1 {
            out.push(Regime::BI);
        }
        // The Sobolev-critical bound on p/r is vacuous in one dimension.
        if b > 0.0 && r < p && !r_eq_p {
            if let Ok((_, phi_s0)) = phi_smax(lambda1, params) {
                if g_zero * lambda1 > phi_s0 && a > phi_s0 {
                    out.push(Regime::BII);
                }
            }
        }
    }
    if g.is_positive() && b_eq_l1 && r_eq_p && r < 2.0 {
        out.push(Regime::C);
    }
    out
}

/// A coefficient given either literally or as a multiple of the discrete
/// principal eigenvalue, e.g. `{"times_lambda1": 0.5}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Value(f64),
    TimesLambda1 {
        #[serde(rename = "times_lambda1")]
        factor: f64,
    },
}

impl Coefficient {
    pub fn resolve(&self, lambda1: f64) -> f64 {
        match *self {
            Coefficient::Value(v) => v,
            Coefficient::TimesLambda1 { factor } => factor * lambda1,
        }
    }
}

impl From<f64> for Coefficient {
    fn from(v: f64) -> Self {
        Coefficient::Value(v)
    }
}

/// Parameter block of a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub a: Coefficient,
    pub b: Coefficient,
    pub p: f64,
    pub r: f64,
}

impl ParamsSpec {
    pub fn resolve(&self, lambda1: f64) -> ProblemParams {
        ProblemParams {
            a: self.a.resolve(lambda1),
            b: self.b.resolve(lambda1),
            p: self.p,
            r: self.r,
        }
    }
}

impl From<ProblemParams> for ParamsSpec {
    fn from(p: ProblemParams) -> Self {
        Self { a: p.a.into(), b: p.b.into(), p: p.p, r: p.r }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSettings {
    /// Threshold on the sup norm of `w - (-Δ)^{-1} f(λ, w)`.
    pub newton_tol: f64,
    /// Relative tolerance of the scalar inversion `q_λ`.
    pub qmap_tol: f64,
    /// Accepted `|h|` at a reported root of `h` along the branch.
    pub bisection_tol: f64,
    pub eig_tol: f64,
    /// Target `|h|` the root refinement keeps bisecting towards.
    pub h_tol: f64,
}

impl Default for ToleranceSettings {
    fn default() -> Self {
        Self { newton_tol: 1e-10, qmap_tol: 1e-12, bisection_tol: 1e-8, eig_tol: 1e-12, h_tol: 1e-12 }
    }
}

impl ToleranceSettings {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [
            ("newton_tol", self.newton_tol),
            ("qmap_tol", self.qmap_tol),
            ("bisection_tol", self.bisection_tol),
            ("eig_tol", self.eig_tol),
            ("h_tol", self.h_tol),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} must be strictly positive"));
            }
        }
        v
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One run of the solver, as read from a JSON scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Expected theorem regime; cross-checked against the classification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    pub params: ParamsSpec,
    pub g: GFunction,
    pub mesh_n: usize,
    /// `(lambda_min, lambda_max)`; derived from the parameters when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_window: Option<(f64, f64)>,
    #[serde(default)]
    pub continuation: ContinuationSettings,
    #[serde(default)]
    pub tolerances: ToleranceSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn resolve_params(&self, lambda1: f64) -> ProblemParams {
        self.params.resolve(lambda1)
    }

    /// Structural violations (mesh, window, settings), independent of the
    /// theorem classification.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.mesh_n < 15 {
            v.push("mesh_n>=15 required".to_owned());
        }
        if let Some((lo, hi)) = self.lambda_window {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                v.push("lambda_window requires 0<lambda_min<lambda_max".to_owned());
            }
        }
        v.extend(self.continuation.violations());
        v.extend(self.tolerances.violations());
        v
    }

    /// Full validation: structure, parameters, `g`, and the regime tag.
    pub fn validate(&self, lambda1: f64) -> ValidationOutcome {
        let params = self.resolve_params(lambda1);
        let mut out = validate_params_with(&params, &self.g, lambda1);
        out.violations.extend(self.violations());
        if let Some(tag) = self.regime {
            if out.violations.is_empty() && !out.regimes.contains(&tag) {
                out.violations.push(format!(
                    "declared regime {tag} does not hold; classified as {:?}",
                    out.regimes.iter().map(ToString::to_string).collect::<Vec<_>>()
                ));
            }
        }
        out
    }

    /// The configured window, or the default: `lambda_max = max(2/g0,
    /// 4 lambda_1/a)` when `g` has a positive infimum `g0`, otherwise
    /// `4 lambda_1/a`; `lambda_min = lambda_1/(100 a)`.
    pub fn lambda_window(&self, params: &ProblemParams, lambda1: f64) -> (f64, f64) {
        if let Some(w) = self.lambda_window {
            return w;
        }
        default_lambda_window(params, &self.g, lambda1)
    }
}

pub fn default_lambda_window(params: &ProblemParams, g: &GFunction, lambda1: f64) -> (f64, f64) {
    let bif = lambda1 / params.a;
    let hi = if g.satisfies_g1() { (2.0 / g.infimum()).max(4.0 * bif) } else { 4.0 * bif };
    (bif / 100.0, hi)
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: None,
            regime: None,
            params: ProblemParams::new(1.0, 0.0, 2.0, 2.0).into(),
            g: GFunction::Constant { g0: 1.0 },
            mesh_n: 255,
            lambda_window: None,
            continuation: ContinuationSettings::default(),
            tolerances: ToleranceSettings::default(),
            output_dir: default_output_dir(),
        }
    }
}

impl std::str::FromStr for ScenarioConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::from_json(s)
    }
}
