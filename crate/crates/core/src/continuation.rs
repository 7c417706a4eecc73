//! Pseudo-arclength continuation of positive solutions of the transformed
//! problem from the bifurcation point `(λ₁/a, 0)`.
//!
//! Unknowns are `(λ, w)`. Distances use `‖(dλ, dw)‖² = dλ² + h Σ dw_i²`, so
//! step sizes mean the same thing on every mesh. Each corrector step solves
//! the tridiagonal Jacobian bordered by the `λ` column and one constraint row.

use serde::{Deserialize, Serialize};

use crate::elliptic::{grad_norm_sq, EigenPair, GridFunction, Mesh1D};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::model::{ProblemParams, ToleranceSettings};
use crate::pa2::{evaluate, jacobian, operator_residual_from_f};
use crate::qmap::ChangeOfVariables;

const MAX_CORRECTOR_ITERS: usize = 12;
/// Corrector iteration count at or below which the step grows.
const FAST_CONVERGENCE: usize = 3;
const STEP_GROWTH: f64 = 1.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSettings {
    /// Sup norm of the first branch point.
    pub seed_eps: f64,
    pub ds_init: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    /// Tracing stops once `‖w‖_∞` exceeds this.
    pub norm_cap: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self { seed_eps: 1e-3, ds_init: 1e-3, ds_min: 1e-6, ds_max: 0.1, max_steps: 5000, norm_cap: 1e3 }
    }
}

impl ContinuationSettings {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.ds_min > 0.0 && self.ds_min <= self.ds_init && self.ds_init <= self.ds_max) {
            v.push("continuation requires 0<ds_min<=ds_init<=ds_max".to_owned());
        }
        if !(self.seed_eps > 0.0) {
            v.push("seed_eps must be positive".to_owned());
        }
        if !(self.norm_cap > self.seed_eps) {
            v.push("norm_cap must exceed seed_eps".to_owned());
        }
        if self.max_steps == 0 {
            v.push("max_steps must be positive".to_owned());
        }
        v
    }
}

/// One accepted solution on the branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub index: usize,
    pub lambda: f64,
    pub w: GridFunction,
    /// `u = q_λ(w)` nodewise.
    pub u: GridFunction,
    pub w_sup: f64,
    pub u_sup: f64,
    /// `|∇u|₂²`
    pub grad_u_sq: f64,
    pub arclength: f64,
    /// Operator residual of `w`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Supercritical,
    Subcritical,
    /// `λ` stays at the bifurcation value.
    Vertical,
    /// Not enough points to tell.
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    LambdaWindow,
    NormCap,
    StepCap,
    SolverFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    /// `λ₁ʰ/a`
    pub bifurcation_lambda: f64,
    pub direction: Direction,
    /// Indices of points where `λ` attains a local extremum.
    pub folds: Vec<usize>,
    pub stop_reason: StopReason,
}

impl Branch {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_fold(&self, index: usize) -> bool {
        self.folds.contains(&index)
    }

    /// `(min λ, max λ)` over the points.
    pub fn lambda_range(&self) -> Option<(f64, f64)> {
        let mut it = self.points.iter().map(|p| p.lambda);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), l| (lo.min(l), hi.max(l))))
    }
}

/// A point `(λ, w)` of the extended state space.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub lambda: f64,
    pub w: Vec<f64>,
}

impl State {
    fn axpy(&self, alpha: f64, dir: &State) -> State {
        State {
            lambda: self.lambda + alpha * dir.lambda,
            w: self.w.iter().zip(&dir.w).map(|(a, d)| a + alpha * d).collect(),
        }
    }

    fn diff(&self, other: &State) -> State {
        State {
            lambda: self.lambda - other.lambda,
            w: self.w.iter().zip(&other.w).map(|(a, b)| a - b).collect(),
        }
    }

    /// `(1-θ) self + θ other`
    pub fn lerp(&self, other: &State, theta: f64) -> State {
        self.axpy(theta, &other.diff(self))
    }
}

/// Linear constraint closing the extended system.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// `⟨tangent, z - pred⟩ = 0` in the weighted inner product.
    Arclength { pred: State, tangent: State },
    /// `w[node] = value`.
    Amplitude { node: usize, value: f64 },
}

/// Everything a corrector needs: mesh, parameters, eigenpair, tolerances.
#[derive(Debug, Clone, Copy)]
pub struct BranchContext<'a> {
    pub mesh: &'a Mesh1D,
    pub params: &'a ProblemParams,
    pub eig: &'a EigenPair,
    pub tol: &'a ToleranceSettings,
}

#[derive(Debug, Clone)]
pub struct Corrected {
    pub state: State,
    pub q: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl<'a> BranchContext<'a> {
    pub fn new(mesh: &'a Mesh1D, params: &'a ProblemParams, eig: &'a EigenPair, tol: &'a ToleranceSettings) -> Self {
        Self { mesh, params, eig, tol }
    }

    pub fn bifurcation_lambda(&self) -> f64 {
        self.eig.lambda1 / self.params.a
    }

    fn cv(&self, lambda: f64) -> Result<ChangeOfVariables> {
        ChangeOfVariables::with_tol(lambda, self.params.r, self.tol.qmap_tol)
    }

    pub fn inner(&self, x: &State, y: &State) -> f64 {
        x.lambda * y.lambda + self.mesh.h() * x.w.iter().zip(&y.w).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm(&self, x: &State) -> f64 {
        self.inner(x, x).sqrt()
    }

    fn normalized(&self, x: State) -> State {
        let n = self.norm(&x);
        State { lambda: x.lambda / n, w: x.w.iter().map(|v| v / n).collect() }
    }

    /// Newton on `{ -Δ_h w - f(λ, w) = 0, constraint }` from `start`.
    pub fn correct(&self, start: &State, constraint: &Constraint) -> Result<Corrected> {
        let h = self.mesh.h();
        let floor = 10.0 * self.tol.newton_tol;
        let mut z = start.clone();
        let mut converged_merit = None;
        for it in 0..=MAX_CORRECTOR_ITERS {
            if !(z.lambda > 0.0) || !z.lambda.is_finite() {
                return Err(Error::Numerical("corrector left lambda > 0".into()));
            }
            let cv = self.cv(z.lambda)?;
            let ev = evaluate(&cv, self.params, &z.w)?;
            let merit = operator_residual_from_f(self.mesh, &z.w, &ev.f)?;
            if !merit.is_finite() {
                return Err(Error::Numerical("corrector diverged".into()));
            }
            if let Some(prev) = converged_merit {
                // Polishing step taken; keep it unless it made things worse.
                if merit <= prev || merit <= self.tol.newton_tol {
                    return self.finish(z, ev.q, merit, it, floor);
                }
                return Err(Error::Numerical("corrector polish step increased the residual".into()));
            }
            if it == MAX_CORRECTOR_ITERS {
                break;
            }
            let (row, corner, cval) = match constraint {
                Constraint::Arclength { pred, tangent } => {
                    let row: Vec<f64> = tangent.w.iter().map(|t| h * t).collect();
                    let cval = self.inner(tangent, &z.diff(pred));
                    (row, tangent.lambda, cval)
                }
                Constraint::Amplitude { node, value } => {
                    let mut row = vec![0.0; z.w.len()];
                    row[*node] = 1.0;
                    (row, 0.0, z.w[*node] - value)
                }
            };
            let mut rhs = crate::elliptic::apply_laplacian(self.mesh, &z.w)?.into_vec();
            rhs.iter_mut().zip(&ev.f).for_each(|(r, f)| *r = f - *r);
            let col: Vec<f64> = ev.df_dlambda.iter().map(|v| -v).collect();
            let (dw, dl) = jacobian(self.mesh, &ev.df_dw).solve_bordered(&col, &row, corner, &rhs, -cval)?;
            if merit <= self.tol.newton_tol && it > 0 {
                converged_merit = Some(merit);
            }
            z.lambda += dl;
            z.w.iter_mut().zip(&dw).for_each(|(w, d)| *w = (*w + d).max(0.0));
        }
        Err(Error::Numerical("corrector did not converge".into()))
    }

    fn finish(&self, z: State, q: Vec<f64>, residual: f64, iterations: usize, floor: f64) -> Result<Corrected> {
        let wmin = z.w.iter().copied().fold(f64::INFINITY, f64::min);
        if !(wmin > floor) {
            return Err(Error::Numerical("corrected point is not strictly positive".into()));
        }
        Ok(Corrected { state: z, q, residual, iterations })
    }

    /// Unit tangent at `z`, oriented along `prev` (which also closes the
    /// system).
    pub fn tangent(&self, z: &State, prev: &State) -> Result<State> {
        let h = self.mesh.h();
        let cv = self.cv(z.lambda)?;
        let ev = evaluate(&cv, self.params, &z.w)?;
        let col: Vec<f64> = ev.df_dlambda.iter().map(|v| -v).collect();
        let row: Vec<f64> = prev.w.iter().map(|t| h * t).collect();
        let zeros = vec![0.0; z.w.len()];
        let (tw, tl) = jacobian(self.mesh, &ev.df_dw).solve_bordered(&col, &row, prev.lambda, &zeros, 1.0)?;
        let t = self.normalized(State { lambda: tl, w: tw });
        Ok(if self.inner(&t, prev) < 0.0 { t.axpy(-2.0, &t) } else { t })
    }

    pub fn make_point(&self, index: usize, arclength: f64, c: &Corrected) -> Result<BranchPoint> {
        let u = GridFunction::new(c.q.clone());
        let grad_u_sq = grad_norm_sq(self.mesh, &u)?;
        let w = GridFunction::new(c.state.w.clone());
        Ok(BranchPoint {
            index,
            lambda: c.state.lambda,
            w_sup: w.sup_norm(),
            u_sup: u.sup_norm(),
            w,
            u,
            grad_u_sq,
            arclength,
            residual: c.residual,
        })
    }

    pub fn state_of(p: &BranchPoint) -> State {
        State { lambda: p.lambda, w: p.w.to_vec() }
    }

    /// Node at which the seed amplitude is imposed.
    pub fn amplitude_node(&self) -> usize {
        self.eig.phi1.argmax()
    }

    /// Solution with `w[node] = amplitude` near the bifurcation point.
    pub fn correct_amplitude(&self, guess: &State, amplitude: f64) -> Result<Corrected> {
        self.correct(guess, &Constraint::Amplitude { node: self.amplitude_node(), value: amplitude })
    }
}

/// Seed point on the branch near `(λ₁ʰ/a, 0)`.
#[derive(Debug, Clone)]
pub struct Seed {
    /// `λ₁ʰ/a`
    pub lambda0: f64,
    pub corrected: Corrected,
}

/// Starts at `(λ₁ʰ/a, ε φ₁)` and corrects onto the branch with the amplitude
/// fixed at `ε` at the peak of `φ₁`.
pub fn bifurcation_seed(ctx: &BranchContext<'_>, eps: f64) -> Result<Seed> {
    if !(eps > 0.0) {
        return Err(Error::Seed(format!("seed amplitude must be positive, got {eps}")));
    }
    let lambda0 = ctx.bifurcation_lambda();
    let guess = State { lambda: lambda0, w: ctx.eig.phi1.scaled(eps).into_vec() };
    let corrected = ctx
        .correct_amplitude(&guess, eps)
        .map_err(|e| Error::Seed(format!("{e}; try a smaller seed_eps")))?;
    let sup = corrected.state.w.iter().copied().fold(0.0_f64, f64::max);
    if !(sup >= eps / 2.0 && sup <= 2.0 * eps) {
        return Err(Error::Seed(format!("corrected amplitude {sup} is not within a factor 2 of {eps}")));
    }
    Ok(Seed { lambda0, corrected })
}

/// Traces the branch until it leaves `window`, exceeds the norm cap, runs out
/// of steps, or the step size collapses.
pub fn trace_branch(ctx: &BranchContext<'_>, settings: &ContinuationSettings, window: (f64, f64)) -> Result<Branch> {
    let lambda0 = ctx.bifurcation_lambda();
    let inside = |l: f64| l >= window.0 && l <= window.1;
    let mut branch = Branch {
        points: Vec::new(),
        bifurcation_lambda: lambda0,
        direction: Direction::Undetermined,
        folds: Vec::new(),
        stop_reason: StopReason::LambdaWindow,
    };
    if !inside(lambda0) {
        return Ok(branch);
    }
    let seed = bifurcation_seed(ctx, settings.seed_eps)?;
    let mut current = seed.corrected.state.clone();
    branch.points.push(ctx.make_point(0, 0.0, &seed.corrected)?);
    let amplitude_dir = ctx.normalized(State { lambda: 0.0, w: ctx.eig.phi1.to_vec() });
    let mut tangent = ctx.tangent(&current, &amplitude_dir)?;

    let mut ds = settings.ds_init;
    let mut arclength = 0.0;
    let mut last_sign = 0.0_f64;
    let mut stop = StopReason::StepCap;
    let mut steps = 0;
    while steps < settings.max_steps {
        let pred = current.axpy(ds, &tangent);
        let attempt = if pred.lambda > 0.0 {
            ctx.correct(&pred, &Constraint::Arclength { pred: pred.clone(), tangent: tangent.clone() })
                .ok()
                .filter(|c| ctx.norm(&c.state.diff(&pred)) <= ds)
        } else {
            None
        };
        let Some(corrected) = attempt else {
            ds *= 0.5;
            if ds < settings.ds_min {
                stop = StopReason::SolverFailure;
                break;
            }
            continue;
        };
        steps += 1;
        let secant = corrected.state.diff(&current);
        let dist = ctx.norm(&secant);
        arclength += dist;
        let index = branch.points.len();
        let point = ctx.make_point(index, arclength, &corrected)?;

        let dl = secant.lambda;
        let sign = if dl.abs() > 1e-10 * current.lambda.abs().max(1.0) { dl.signum() } else { 0.0 };
        if sign != 0.0 {
            if last_sign != 0.0 && sign != last_sign {
                branch.folds.push(index - 1);
            }
            last_sign = sign;
        }
        tangent = ctx.normalized(secant);
        current = corrected.state.clone();
        let (lambda, w_sup) = (point.lambda, point.w_sup);
        branch.points.push(point);

        if !inside(lambda) {
            stop = StopReason::LambdaWindow;
            break;
        }
        if w_sup > settings.norm_cap {
            stop = StopReason::NormCap;
            break;
        }
        if corrected.iterations <= FAST_CONVERGENCE {
            ds = (ds * STEP_GROWTH).min(settings.ds_max);
        }
    }
    branch.stop_reason = stop;
    branch.direction = classify_direction(&branch);
    Ok(branch)
}

fn classify_direction(branch: &Branch) -> Direction {
    let l0 = branch.bifurcation_lambda;
    if branch.points.len() < 2 {
        return Direction::Undetermined;
    }
    for p in branch.points.iter().take(10) {
        let d = p.lambda - l0;
        if d.abs() > 1e-9 * l0 {
            return if d > 0.0 { Direction::Supercritical } else { Direction::Subcritical };
        }
    }
    Direction::Vertical
}

/// Recomputes `u = q_λ(w)` and `|∇u|₂²` for every point. Idempotent.
pub fn transform_branch(
    mesh: &Mesh1D,
    params: &ProblemParams,
    tol: &ToleranceSettings,
    branch: &Branch,
    mode: ExecMode,
) -> Result<Branch> {
    let points = mode.map(&branch.points, |p| -> Result<BranchPoint> {
        let cv = ChangeOfVariables::with_tol(p.lambda, params.r, tol.qmap_tol)?;
        let u = p.w.try_map(|w| cv.q(w))?;
        let grad_u_sq = grad_norm_sq(mesh, &u)?;
        Ok(BranchPoint { u_sup: u.sup_norm(), u, grad_u_sq, ..p.clone() })
    });
    Ok(Branch { points: points.into_iter().collect::<Result<_>>()?, ..branch.clone() })
}

/// Linear least-squares fit of `λ` against `‖w‖_∞` over the first `count`
/// points, extrapolated to zero amplitude.
pub fn extrapolate_bifurcation(branch: &Branch, count: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = branch.points.iter().take(count).map(|p| (p.w_sup, p.lambda)).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Some(my);
    }
    Some(my - sxy / sxx * mx)
}
