//! Solutions of the nonlocal problem `-(g(|u'|²) u + u^r)'' = a u + b u^p`.
//!
//! A branch point `(λ, u)` of the auxiliary problem solves the nonlocal one
//! exactly when `h(λ, u) = 1/λ - g(|∇u|₂²)` vanishes. Roots are bracketed by
//! sign changes of `h` along the branch and refined by bisection, re-correcting
//! onto the branch at every probe.

use serde::Serialize;

use crate::continuation::{Branch, BranchContext, BranchPoint, Constraint, Corrected, State};
use crate::elliptic::{apply_laplacian, grad_norm_sq, EigenPair, GridFunction, Mesh1D};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::model::{approx_eq, GFunction, Interval, ProblemParams, Regime, EQUALITY_RTOL};
use crate::pa2::residual_pa2;
use crate::qmap::ChangeOfVariables;

const MAX_BISECTIONS: usize = 200;
/// Relative distance to an endpoint of `R[g]` that earns a warning.
pub const NEAR_BOUNDARY_RTOL: f64 = 1e-9;

/// `h(λ, γ) = 1/λ - g(γ)`.
pub fn h_eval(lambda: f64, grad_u_sq: f64, g: &GFunction) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("h needs lambda > 0, got {lambda}")));
    }
    Ok(1.0 / lambda - g.eval(grad_u_sq)?)
}

/// A solution of the nonlocal problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P1Solution {
    #[serde(skip)]
    pub u: GridFunction,
    pub lambda_star: f64,
    /// `|∇u|₂²`
    pub gamma: f64,
    /// [`p1_residual`] of `u`.
    pub residual_sup: f64,
    pub regime: Option<Regime>,
    /// `h` at the reported point.
    pub h: f64,
    /// Arclength along the branch (0 for closed-form solutions).
    pub arclength: f64,
    /// False when bisection could not bring `|h|` under the tolerance.
    pub resolved: bool,
}

impl P1Solution {
    pub fn u_sup(&self) -> f64 {
        self.u.sup_norm()
    }
}

/// Sup norm of `A(g(γ) u + u^r) - (a u + b u^p)` with `γ = |∇u|₂²`.
pub fn p1_residual(mesh: &Mesh1D, u: &[f64], g: &GFunction, params: &ProblemParams) -> Result<f64> {
    mesh.check(u)?;
    let gamma = grad_norm_sq(mesh, u)?;
    let coef = g.eval(gamma)?;
    let v: Vec<f64> = u.iter().map(|&x| coef * x + x.max(0.0).powf(params.r)).collect();
    let lap = apply_laplacian(mesh, &v)?;
    Ok(lap
        .iter()
        .zip(u)
        .map(|(l, &x)| (l - (params.a * x + params.b * x.max(0.0).powf(params.p))).abs())
        .fold(0.0, f64::max))
}

/// Sup-norm residuals of `(λ, u)` in the `u` form `A(u/λ + u^r) = a u + b u^p`
/// and of `w = u/λ + u^r` in the transformed form.
pub fn formulation_residuals(mesh: &Mesh1D, params: &ProblemParams, lambda: f64, u: &[f64]) -> Result<(f64, f64)> {
    let cv = ChangeOfVariables::new(lambda, params.r)?;
    let w: Vec<f64> = u.iter().map(|&x| x / lambda + x.powf(params.r)).collect();
    let lap = apply_laplacian(mesh, &w)?;
    let pa1 = lap
        .iter()
        .zip(u)
        .map(|(l, &x)| (l - (params.a * x + params.b * x.powf(params.p))).abs())
        .fold(0.0, f64::max);
    let pa2 = residual_pa2(mesh, &cv, params, &w)?.sup_norm();
    Ok((pa1, pa2))
}

/// `h` at every branch point, preceded by its value at the bifurcation
/// point `(λ₁ʰ/a, 0)`.
pub fn h_profile(branch: &Branch, g: &GFunction) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(branch.points.len() + 1);
    out.push(h_eval(branch.bifurcation_lambda, 0.0, g)?);
    for p in &branch.points {
        out.push(h_eval(p.lambda, p.grad_u_sq, g)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum Bracket {
    /// Between the bifurcation point and the first branch point.
    Seed,
    /// Between branch points `i` and `i + 1`.
    Chord(usize),
}

struct Probe {
    corrected: Corrected,
    h: f64,
    gamma: f64,
}

/// All zeros of `h` along the branch, ordered by arclength.
pub fn find_h_roots(
    ctx: &BranchContext<'_>,
    branch: &Branch,
    g: &GFunction,
    regime: Option<Regime>,
    mode: ExecMode,
) -> Result<Vec<P1Solution>> {
    if branch.points.is_empty() {
        return Ok(Vec::new());
    }
    let hs = h_profile(branch, g)?;
    let mut brackets = Vec::new();
    for k in 0..hs.len() - 1 {
        let (h0, h1) = (hs[k], hs[k + 1]);
        if h1 == 0.0 || (h0 != 0.0 && h0.signum() != h1.signum()) {
            brackets.push(if k == 0 { Bracket::Seed } else { Bracket::Chord(k - 1) });
        }
    }
    let refined = mode.map(&brackets, |b| refine(ctx, branch, g, *b, hs_at(&hs, *b)));
    refined
        .into_iter()
        .map(|r| r.and_then(|(probe, arclength)| assemble(ctx, g, regime, probe, arclength)))
        .collect()
}

fn hs_at(hs: &[f64], b: Bracket) -> (f64, f64) {
    match b {
        Bracket::Seed => (hs[0], hs[1]),
        Bracket::Chord(i) => (hs[i + 1], hs[i + 2]),
    }
}

fn probe(ctx: &BranchContext<'_>, g: &GFunction, corrected: Corrected) -> Result<Probe> {
    let gamma = grad_norm_sq(ctx.mesh, &corrected.q)?;
    let h = h_eval(corrected.state.lambda, gamma, g)?;
    Ok(Probe { corrected, h, gamma })
}

fn stored_probe(ctx: &BranchContext<'_>, g: &GFunction, p: &BranchPoint) -> Result<Probe> {
    let corrected = Corrected {
        state: BranchContext::state_of(p),
        q: p.u.to_vec(),
        residual: p.residual,
        iterations: 0,
    };
    probe(ctx, g, corrected)
}

/// Bisection on a bracket. Returns the best probe and its arclength.
fn refine(
    ctx: &BranchContext<'_>,
    branch: &Branch,
    g: &GFunction,
    bracket: Bracket,
    (h_lo, h_hi): (f64, f64),
) -> Result<(Probe, f64)> {
    let h_tol = ctx.tol.h_tol;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let sign_lo = h_lo.signum();
    type ProbeAt<'a> = Box<dyn Fn(f64) -> Result<Corrected> + 'a>;
    let (first, arc0, arc1, probe_at): (Probe, f64, f64, ProbeAt<'_>) = match bracket {
        Bracket::Seed => {
            let p0 = &branch.points[0];
            let node = ctx.amplitude_node();
            let eps = p0.w[node];
            let seed = BranchContext::state_of(p0);
            let l0 = branch.bifurcation_lambda;
            let at = move |theta: f64| {
                let guess = State {
                    lambda: l0 + theta * (seed.lambda - l0),
                    w: seed.w.iter().map(|w| w * theta).collect(),
                };
                ctx.correct(&guess, &Constraint::Amplitude { node, value: theta * eps })
            };
            (stored_probe(ctx, g, p0)?, 0.0, 0.0, Box::new(at))
        }
        Bracket::Chord(i) => {
            let (a, b) = (&branch.points[i], &branch.points[i + 1]);
            let za = BranchContext::state_of(a);
            let zb = BranchContext::state_of(b);
            let chord = State { lambda: zb.lambda - za.lambda, w: zb.w.iter().zip(&za.w).map(|(x, y)| x - y).collect() };
            let len = ctx.norm(&chord);
            let tangent = State { lambda: chord.lambda / len, w: chord.w.iter().map(|x| x / len).collect() };
            let at = move |theta: f64| {
                let pred = za.lerp(&zb, theta);
                ctx.correct(&pred, &Constraint::Arclength { pred: pred.clone(), tangent: tangent.clone() })
            };
            (stored_probe(ctx, g, b)?, a.arclength, b.arclength, Box::new(at))
        }
    };
    if h_hi == 0.0 {
        return Ok((first, arc1));
    }
    let mut best = (first, 1.0);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p = match probe_at(mid).and_then(|c| probe(ctx, g, c)) {
            Ok(p) => p,
            Err(_) => break,
        };
        let h = p.h;
        let improves = h.abs() < best.0.h.abs();
        if improves {
            best = (p, mid);
        }
        if h.abs() <= h_tol {
            break;
        }
        if h.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let arclength = arc0 + best.1 * (arc1 - arc0);
    Ok((best.0, arclength))
}

fn assemble(ctx: &BranchContext<'_>, g: &GFunction, regime: Option<Regime>, p: Probe, arclength: f64) -> Result<P1Solution> {
    let u = GridFunction::new(p.corrected.q);
    let residual_sup = p1_residual(ctx.mesh, &u, g, ctx.params)?;
    Ok(P1Solution {
        u,
        lambda_star: p.corrected.state.lambda,
        gamma: p.gamma,
        residual_sup,
        regime,
        h: p.h,
        arclength,
        resolved: p.h.abs() <= ctx.tol.bisection_tol,
    })
}

fn check_closed_form_regime(eig: &EigenPair, params: &ProblemParams) -> Result<()> {
    if !params.r_equals_p() {
        return Err(Error::Regime(format!("closed form needs r = p, got r={} p={}", params.r, params.p)));
    }
    if !approx_eq(params.b, eig.lambda1, EQUALITY_RTOL) {
        return Err(Error::Regime(format!("closed form needs b = lambda1 = {}, got b={}", eig.lambda1, params.b)));
    }
    Ok(())
}

/// `u_c = q_{λ₁ʰ/a}(c φ₁)`, a solution of the auxiliary problem at
/// `λ = λ₁ʰ/a` when `r = p` and `b = λ₁ʰ`.
pub fn closed_form_solution(mesh: &Mesh1D, eig: &EigenPair, params: &ProblemParams, c: f64) -> Result<GridFunction> {
    check_closed_form_regime(eig, params)?;
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("c must be nonnegative, got {c}")));
    }
    mesh.check(&eig.phi1)?;
    let cv = ChangeOfVariables::new(eig.lambda1 / params.a, params.r)?;
    eig.phi1.try_map(|phi| cv.q(c * phi))
}

/// Midpoint quadrature of `∫ (c λ₁ / (a + λ₁ r q(cφ₁)^{r-1}))² |∇φ₁|²`.
pub fn grad_norm_c(mesh: &Mesh1D, eig: &EigenPair, params: &ProblemParams, c: f64) -> Result<f64> {
    check_closed_form_regime(eig, params)?;
    if !(params.r < 2.0) {
        return Err(Error::Regime(format!("gradient formula needs r < 2, got r={}", params.r)));
    }
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("c must be nonnegative, got {c}")));
    }
    let (l1, a, r, h) = (eig.lambda1, params.a, params.r, mesh.h());
    let cv = ChangeOfVariables::new(l1 / a, r)?;
    let phi = &eig.phi1;
    let n = phi.len();
    let mut sum = 0.0;
    for i in 0..=n {
        let left = if i == 0 { 0.0 } else { phi[i - 1] };
        let right = if i == n { 0.0 } else { phi[i] };
        let dphi = (right - left) / h;
        let q = cv.q(c * 0.5 * (left + right))?;
        let qr = if q > 0.0 { q.powf(r - 1.0) } else { 0.0 };
        let factor = c * l1 / (a + l1 * r * qr);
        sum += (factor * dphi).powi(2) * h;
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TheoremCOutcome {
    Solved {
        solution: P1Solution,
        c: f64,
        /// Target `|∇u_c|₂²`, i.e. the preimage of `a/λ₁ʰ` under `g`.
        s_prime: f64,
        /// Constant `g`: every `c` works and `s' = 1` was picked.
        degenerate: bool,
    },
    NoSolution {
        range: Interval,
        /// `a/λ₁ʰ`
        target: f64,
        near_boundary: bool,
    },
}

/// Solves the nonlocal problem when `r = p < 2` and `b = λ₁ʰ`, where a
/// solution exists iff `a/λ₁ʰ ∈ R[g]`.
pub fn theorem_c_solve(mesh: &Mesh1D, eig: &EigenPair, params: &ProblemParams, g: &GFunction) -> Result<TheoremCOutcome> {
    check_closed_form_regime(eig, params)?;
    if !(params.r < 2.0) {
        return Err(Error::Regime(format!("closed-form existence needs r < 2, got r={}", params.r)));
    }
    let range = g.range();
    let target = params.a / eig.lambda1;
    if !range.contains(target) {
        return Ok(TheoremCOutcome::NoSolution {
            range,
            target,
            near_boundary: range.near_boundary(target, NEAR_BOUNDARY_RTOL),
        });
    }
    let (s_prime, degenerate) = match g {
        GFunction::Constant { .. } => (1.0, true),
        _ => match g.invert(target) {
            // s' = 0 forces c = 0, the trivial solution.
            Some(s) if s > 0.0 => (s, false),
            _ => {
                return Ok(TheoremCOutcome::NoSolution { range, target, near_boundary: true });
            }
        },
    };
    let gamma_of = |c: f64| -> Result<f64> { grad_norm_sq(mesh, &closed_form_solution(mesh, eig, params, c)?) };
    let c = {
        let mut hi = 1.0;
        while gamma_of(hi)? < s_prime {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Numerical("could not bracket the gradient target".into()));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-15 * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if gamma_of(mid)? < s_prime {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let u = closed_form_solution(mesh, eig, params, c)?;
    let gamma = grad_norm_sq(mesh, &u)?;
    let lambda_star = eig.lambda1 / params.a;
    let h = h_eval(lambda_star, gamma, g)?;
    let residual_sup = p1_residual(mesh, &u, g, params)?;
    Ok(TheoremCOutcome::Solved {
        solution: P1Solution {
            u,
            lambda_star,
            gamma,
            residual_sup,
            regime: Some(Regime::C),
            h,
            arclength: 0.0,
            resolved: true,
        },
        c,
        s_prime,
        degenerate,
    })
}

/// `h` along the vertical branch `u_c`, one value per `c`.
pub fn theorem_c_h_scan(
    mesh: &Mesh1D,
    eig: &EigenPair,
    params: &ProblemParams,
    g: &GFunction,
    cs: &[f64],
    mode: ExecMode,
) -> Result<Vec<f64>> {
    let lambda = eig.lambda1 / params.a;
    mode.map(cs, |&c| {
        let u = closed_form_solution(mesh, eig, params, c)?;
        h_eval(lambda, grad_norm_sq(mesh, &u)?, g)
    })
    .into_iter()
    .collect()
}

/// True if consecutive values change sign or one of them is exactly zero.
pub fn has_sign_change(values: &[f64]) -> bool {
    values.contains(&0.0) || values.windows(2).any(|w| w[0].signum() != w[1].signum())
}
