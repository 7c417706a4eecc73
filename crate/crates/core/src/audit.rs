//! Checks of computed solutions against the necessary conditions for
//! existence, the integral identity obtained by testing with `φ₁`, and the
//! a priori bounds.
//!
//! Everything here uses the discrete eigenpair `(λ₁ʰ, φ₁ʰ)`: the identity is
//! then exact for discrete solutions up to the solver residual, so failures
//! indicate logic errors rather than discretization error.

use serde::Serialize;

use crate::continuation::{Branch, BranchPoint};
use crate::elliptic::{EigenPair, Mesh1D};
use crate::error::Result;
use crate::kirchhoff::{formulation_residuals, h_eval, P1Solution};
use crate::model::{approx_eq, GFunction, ProblemParams, ToleranceSettings};
use crate::qmap::phi_smax;

/// Relative slack on region boundaries in the necessary conditions.
pub const REGION_RTOL: f64 = 1e-9;
/// Relative tolerance for `λ = λ₁/a` on the vertical branch.
pub const VERTICAL_RTOL: f64 = 1e-6;
/// Absolute slack on the `b < 0` sup-norm bounds.
pub const BOUND_ATOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Pass,
    Fail,
    Skipped,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditCheck {
    pub name: String,
    pub clause: String,
    pub status: AuditStatus,
    pub value: f64,
    pub threshold: f64,
}

impl AuditCheck {
    fn new(name: &str, clause: &str, pass: bool, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_owned(),
            clause: clause.to_owned(),
            status: if pass { AuditStatus::Pass } else { AuditStatus::Fail },
            value,
            threshold,
        }
    }

    fn inactive(name: &str, clause: &str, status: AuditStatus) -> Self {
        Self { name: name.to_owned(), clause: clause.to_owned(), status, value: f64::NAN, threshold: f64::NAN }
    }

    pub fn failed(&self) -> bool {
        self.status == AuditStatus::Fail
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.failed()).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &AuditCheck> {
        self.checks.iter().filter(|c| c.failed())
    }

    pub fn extend(&mut self, other: AuditReport) {
        self.checks.extend(other.checks);
    }

    /// Folds per-point checks into one per `(name, clause)`: the first failure
    /// if any, else the last pass, else the last inactive entry.
    fn merged(checks: Vec<AuditCheck>) -> AuditReport {
        let mut out: Vec<AuditCheck> = Vec::new();
        for c in checks {
            match out.iter_mut().find(|o| o.name == c.name && o.clause == c.clause) {
                None => out.push(c),
                Some(o) => {
                    let keep = o.failed()
                        || (o.status == AuditStatus::Pass && !c.failed() && c.status != AuditStatus::Pass);
                    if !keep {
                        *o = c;
                    }
                }
            }
        }
        AuditReport { checks: out }
    }
}

/// `h Σ u φ₁ [λ₁ u^{r-1} - b u^{p-1} - (a - λ₁/λ)]`, in absolute value.
pub fn integral_identity_residual(eig: &EigenPair, mesh: &Mesh1D, params: &ProblemParams, lambda: f64, u: &[f64]) -> Result<f64> {
    mesh.check(u)?;
    let l1 = eig.lambda1;
    let shift = params.a - l1 / lambda;
    let sum: f64 = u
        .iter()
        .zip(eig.phi1.iter())
        .filter(|(x, _)| **x > 0.0)
        .map(|(&x, &phi)| x * phi * (l1 * x.powf(params.r - 1.0) - params.b * x.powf(params.p - 1.0) - shift))
        .sum();
    Ok((sum * mesh.h()).abs())
}

/// Sup of the size of the identity's integrand terms; scales its tolerance.
pub fn integral_identity_scale(eig: &EigenPair, params: &ProblemParams, lambda: f64, u: &[f64]) -> f64 {
    let l1 = eig.lambda1;
    let shift = (params.a - l1 / lambda).abs();
    u.iter()
        .zip(eig.phi1.iter())
        .filter(|(x, _)| **x > 0.0)
        .map(|(&x, &phi)| x * phi * (l1 * x.powf(params.r - 1.0) + params.b.abs() * x.powf(params.p - 1.0) + shift))
        .fold(1.0, f64::max)
}

fn identity_check(eig: &EigenPair, mesh: &Mesh1D, params: &ProblemParams, tol: &ToleranceSettings, lambda: f64, u: &[f64]) -> Result<AuditCheck> {
    let value = integral_identity_residual(eig, mesh, params, lambda, u)?;
    let threshold = 10.0 * tol.newton_tol * integral_identity_scale(eig, params, lambda, u);
    Ok(AuditCheck::new("integral_identity", "identity", value <= threshold, value, threshold))
}

/// `(a/λ₁)(b/λ₁)^{1/(r-p)} + (b/λ₁)^{r/(r-p)}`, the small-norm threshold in
/// the transformed variable.
pub fn w_norm_threshold(params: &ProblemParams, lambda1: f64) -> f64 {
    let ratio = params.b / lambda1;
    let e = 1.0 / (params.r - params.p);
    params.a / lambda1 * ratio.powf(e) + ratio.powf(params.r * e)
}

/// `(b/λ₁)^{1/(r-p)}`, the small-norm threshold for `u`.
pub fn u_norm_threshold(params: &ProblemParams, lambda1: f64) -> f64 {
    (params.b / lambda1).powf(1.0 / (params.r - params.p))
}

/// Which necessary-condition clauses `(λ, ‖u‖_∞)` violates. Each applicable
/// clause yields a pass (allowed) or fail (forbidden) check.
pub fn necessary_conditions(params: &ProblemParams, lambda: f64, u_sup: f64, lambda1: f64) -> AuditReport {
    let ProblemParams { a, b, p, r } = *params;
    let l0 = lambda1 / a;
    let below = |x: f64, t: f64| x < t * (1.0 - REGION_RTOL);
    let above = |x: f64, t: f64| x > t * (1.0 + REGION_RTOL);
    let mut checks = Vec::new();
    let name = "necessary_condition";
    let r_eq_p = params.r_equals_p();

    if b <= 0.0 {
        checks.push(AuditCheck::new(name, "a", above(lambda, l0), lambda, l0));
    } else {
        checks.push(AuditCheck::inactive(name, "a", AuditStatus::NotApplicable));
    }

    if b > 0.0 && r > p && !r_eq_p {
        let phi_s0 = phi_smax(lambda1, params).map(|x| x.1).unwrap_or(f64::NAN);
        let t = lambda1 / (a - phi_s0);
        checks.push(AuditCheck::new(name, "b.lambda", !below(lambda, t), lambda, t));
        let ut = u_norm_threshold(params, lambda1);
        let forbidden = above(lambda, l0) && below(u_sup, ut);
        checks.push(AuditCheck::new(name, "b.norm", !forbidden, u_sup, ut));
    } else {
        checks.push(AuditCheck::inactive(name, "b", AuditStatus::NotApplicable));
    }

    if b > 0.0 && r_eq_p {
        if (b - lambda1).abs() <= VERTICAL_RTOL * lambda1 {
            let ok = approx_eq(lambda, l0, VERTICAL_RTOL);
            checks.push(AuditCheck::new(name, "c.equal", ok, lambda, l0));
        } else if b < lambda1 {
            checks.push(AuditCheck::new(name, "c.below", !below(lambda, l0), lambda, l0));
        } else {
            checks.push(AuditCheck::new(name, "c.above", !above(lambda, l0), lambda, l0));
        }
    } else {
        checks.push(AuditCheck::inactive(name, "c", AuditStatus::NotApplicable));
    }

    if b > 0.0 && r < p && !r_eq_p {
        let phi_s0 = phi_smax(lambda1, params).map(|x| x.1).unwrap_or(f64::NAN);
        if a > phi_s0 {
            let t = lambda1 / (a - phi_s0);
            checks.push(AuditCheck::new(name, "d.lambda", !above(lambda, t), lambda, t));
            let ut = u_norm_threshold(params, lambda1);
            let forbidden = below(lambda, l0) && below(u_sup, ut);
            checks.push(AuditCheck::new(name, "d.norm", !forbidden, u_sup, ut));
        } else {
            checks.push(AuditCheck::inactive(name, "d", AuditStatus::NotApplicable));
        }
    } else {
        checks.push(AuditCheck::inactive(name, "d", AuditStatus::NotApplicable));
    }
    AuditReport { checks }
}

/// Explicit bounds along a branch: the sup bounds for `b < 0`, and the
/// small-norm exclusion in `w` for `b > 0`, `r ≠ p`.
pub fn apriori_bounds(params: &ProblemParams, lambda1: f64, branch: &Branch) -> AuditReport {
    let ProblemParams { a, b, p, r } = *params;
    let l0 = lambda1 / a;
    let mut checks = Vec::new();
    if b < 0.0 {
        let c = (-a / b).powf(1.0 / (p - 1.0));
        for pt in &branch.points {
            let wt = c / pt.lambda + c.powf(r);
            checks.push(AuditCheck::new("apriori_bound", "w_sup", pt.w_sup <= wt + BOUND_ATOL, pt.w_sup, wt));
            checks.push(AuditCheck::new("apriori_bound", "u_sup", pt.u_sup <= c + BOUND_ATOL, pt.u_sup, c));
        }
    } else {
        checks.push(AuditCheck::inactive("apriori_bound", "sup", AuditStatus::Skipped));
    }

    let side = if b > 0.0 && r > p && !params.r_equals_p() {
        Some(1.0)
    } else if b > 0.0 && r < p && !params.r_equals_p() && phi_smax(lambda1, params).is_ok_and(|(_, m)| a > m) {
        Some(-1.0)
    } else {
        None
    };
    match side {
        Some(s) => {
            let wt = w_norm_threshold(params, lambda1);
            let mut any = false;
            for pt in &branch.points {
                if s * (pt.lambda - l0) > REGION_RTOL * l0 {
                    any = true;
                    let ok = pt.w_sup >= wt * (1.0 - REGION_RTOL);
                    checks.push(AuditCheck::new("w_norm_threshold", "small_norm", ok, pt.w_sup, wt));
                }
            }
            if !any {
                checks.push(AuditCheck::inactive("w_norm_threshold", "small_norm", AuditStatus::Skipped));
            }
        }
        None => checks.push(AuditCheck::inactive("w_norm_threshold", "small_norm", AuditStatus::NotApplicable)),
    }
    AuditReport::merged(checks)
}

fn point_checks(eig: &EigenPair, mesh: &Mesh1D, params: &ProblemParams, tol: &ToleranceSettings, pt: &BranchPoint) -> Result<Vec<AuditCheck>> {
    let mut checks = vec![identity_check(eig, mesh, params, tol, pt.lambda, &pt.u)?];
    checks.push(AuditCheck::new("positivity", "u>0", pt.u.min() > 0.0, pt.u.min(), 0.0));
    checks.extend(necessary_conditions(params, pt.lambda, pt.u_sup, eig.lambda1).checks);
    Ok(checks)
}

/// Every check on every point of a branch, merged per clause.
pub fn audit_branch(eig: &EigenPair, mesh: &Mesh1D, params: &ProblemParams, tol: &ToleranceSettings, branch: &Branch) -> Result<AuditReport> {
    let mut checks = Vec::new();
    for pt in &branch.points {
        checks.extend(point_checks(eig, mesh, params, tol, pt)?);
    }
    let mut report = AuditReport::merged(checks);
    report.extend(apriori_bounds(params, eig.lambda1, branch));
    Ok(report)
}

/// Acceptance threshold for the residual of a nonlocal solution, as a
/// multiple of `newton_tol`.
pub const P1_RESIDUAL_FACTOR: f64 = 1e3;
/// Agreement required between the two formulations, as a multiple of
/// `newton_tol`.
pub const FORMULATION_FACTOR: f64 = 100.0;

/// `max(1, ‖w‖_∞)` with `w = u/λ + u^r`. Applying the discrete Laplacian to
/// `w` has a rounding floor proportional to `‖w‖_∞`, so absolute residual
/// thresholds are scaled by it.
pub fn residual_scale(params: &ProblemParams, lambda: f64, u_sup: f64) -> f64 {
    (u_sup / lambda + u_sup.powf(params.r)).max(1.0)
}

/// Checks on a solution of the nonlocal problem.
pub fn audit_p1(
    eig: &EigenPair,
    mesh: &Mesh1D,
    params: &ProblemParams,
    g: &GFunction,
    tol: &ToleranceSettings,
    sol: &P1Solution,
) -> Result<AuditReport> {
    let mut checks = vec![identity_check(eig, mesh, params, tol, sol.lambda_star, &sol.u)?];
    checks.push(AuditCheck::new("positivity", "u>0", sol.u.min() > 0.0, sol.u.min(), 0.0));
    checks.extend(necessary_conditions(params, sol.lambda_star, sol.u_sup(), eig.lambda1).checks);
    let h = h_eval(sol.lambda_star, sol.gamma, g)?.abs();
    checks.push(AuditCheck::new("h_root", "|h|", h <= tol.bisection_tol, h, tol.bisection_tol));
    let scale = residual_scale(params, sol.lambda_star, sol.u_sup());
    let accept = P1_RESIDUAL_FACTOR * tol.newton_tol * scale;
    checks.push(AuditCheck::new("p1_residual", "sup", sol.residual_sup <= accept, sol.residual_sup, accept));
    let (pa1, pa2) = formulation_residuals(mesh, params, sol.lambda_star, &sol.u)?;
    let ft = FORMULATION_FACTOR * tol.newton_tol * scale;
    checks.push(AuditCheck::new("formulation", "u-form", pa1 <= ft, pa1, ft));
    checks.push(AuditCheck::new("formulation", "w-form", pa2 <= ft, pa2, ft));
    Ok(AuditReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    const L1: f64 = 9.869604401089358;

    fn fails(r: &AuditReport, clause: &str) -> bool {
        r.checks.iter().any(|c| c.clause == clause && c.failed())
    }

    #[test]
    fn clause_a_forbids_small_lambda() {
        let params = ProblemParams::new(20.0, -1.0, 2.0, 2.0);
        let r = necessary_conditions(&params, 0.5 * L1 / 20.0, 1.0, L1);
        assert!(fails(&r, "a"));
        let r = necessary_conditions(&params, 2.0 * L1 / 20.0, 1.0, L1);
        assert!(r.passed());
    }

    #[test]
    fn clause_b_examples() {
        let params = ProblemParams::new(20.0, 2.0, 2.0, 3.0);
        let (_, phi) = phi_smax(L1, &params).unwrap();
        let r = necessary_conditions(&params, 0.9 * L1 / (20.0 - phi), 10.0, L1);
        assert!(fails(&r, "b.lambda"));
        let small = 0.5 * (2.0 / L1);
        let r = necessary_conditions(&params, 1.1 * L1 / 20.0, small, L1);
        assert!(fails(&r, "b.norm"));
        assert!(!fails(&r, "b.lambda"));
    }

    #[test]
    fn clause_c_equal_case() {
        let params = ProblemParams::new(5.0, L1, 1.5, 1.5);
        assert!(necessary_conditions(&params, L1 / 5.0, 3.0, L1).passed());
        assert!(fails(&necessary_conditions(&params, 1.01 * L1 / 5.0, 3.0, L1), "c.equal"));
    }

    #[test]
    fn clause_d_not_applicable_below_phi() {
        let params = ProblemParams::new(1.0, 1.0, 3.0, 2.0);
        let (_, phi) = phi_smax(L1, &params).unwrap();
        assert!(1.0 < phi);
        let r = necessary_conditions(&params, 100.0, 1.0, L1);
        assert!(r.checks.iter().any(|c| c.clause == "d" && c.status == AuditStatus::NotApplicable));
    }

    #[test]
    fn identity_of_zero_is_zero() {
        let mesh = Mesh1D::new(15).unwrap();
        let eig = crate::elliptic::principal_eigenpair(&mesh, 1e-12).unwrap();
        let params = ProblemParams::new(20.0, 0.0, 2.0, 2.0);
        assert_eq!(integral_identity_residual(&eig, &mesh, &params, 1.0, &[0.0; 15]).unwrap(), 0.0);
    }

    #[test]
    fn merge_keeps_first_failure() {
        let checks = vec![
            AuditCheck::new("x", "y", true, 1.0, 2.0),
            AuditCheck::new("x", "y", false, 3.0, 2.0),
            AuditCheck::new("x", "y", true, 0.5, 2.0),
        ];
        let r = AuditReport::merged(checks);
        assert_eq!(r.checks.len(), 1);
        assert_eq!(r.checks[0].value, 3.0);
    }
}
