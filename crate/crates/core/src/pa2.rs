//! Fixed-λ solver for the transformed problem `-Δw = a q_λ(w) + b q_λ(w)^p`.
//!
//! Convergence is measured by the operator residual `‖w - (-Δ_h)^{-1} f(λ, w)‖_∞`.
//! The differential residual `-Δ_h w - f` carries rounding noise of order
//! `ε‖w‖/h²`, which on fine meshes sits above any useful absolute tolerance;
//! the operator form is bounded by `ε‖w‖` instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elliptic::{apply_laplacian, solve_poisson, GridFunction, Mesh1D};
use crate::error::{domain, Error, NewtonFailure, Result};
use crate::exec::ExecMode;
use crate::model::ProblemParams;
use crate::qmap::{nonlinearity, ChangeOfVariables};
use crate::tridiag::Tridiagonal;

/// Backtracking factors `1, 1/2, ..., 1/64`.
pub const MAX_HALVINGS: u32 = 6;

/// Largest relative Newton step accepted at convergence.
pub const STEP_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 60 }
    }
}

impl NewtonOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    /// Smallest interior value accepted as "positive".
    pub fn positivity_floor(&self) -> f64 {
        10.0 * self.tol
    }
}

/// Nodewise values of the nonlinearity and its derivatives.
#[derive(Debug, Clone)]
pub struct Pa2Eval {
    pub q: Vec<f64>,
    pub f: Vec<f64>,
    pub df_dw: Vec<f64>,
    pub df_dlambda: Vec<f64>,
}

pub fn evaluate(cv: &ChangeOfVariables, params: &ProblemParams, w: &[f64]) -> Result<Pa2Eval> {
    let n = w.len();
    let mut ev = Pa2Eval {
        q: Vec::with_capacity(n),
        f: Vec::with_capacity(n),
        df_dw: Vec::with_capacity(n),
        df_dlambda: Vec::with_capacity(n),
    };
    for &wi in w {
        if !(wi >= 0.0) {
            return Err(domain(format!("negative or NaN entry {wi} in w")));
        }
        let e = nonlinearity(cv, params, wi)?;
        ev.q.push(e.q);
        ev.f.push(e.f);
        ev.df_dw.push(e.df_ds);
        ev.df_dlambda.push(e.df_dlambda);
    }
    Ok(ev)
}

fn f_vector(cv: &ChangeOfVariables, params: &ProblemParams, w: &[f64]) -> Result<Vec<f64>> {
    w.iter()
        .map(|&wi| {
            if !(wi >= 0.0) {
                return Err(domain(format!("negative or NaN entry {wi} in w")));
            }
            Ok(nonlinearity(cv, params, wi)?.f)
        })
        .collect()
}

/// `-Δ_h w - f(λ, w)`.
pub fn residual_pa2(mesh: &Mesh1D, cv: &ChangeOfVariables, params: &ProblemParams, w: &[f64]) -> Result<GridFunction> {
    mesh.check(w)?;
    let f = f_vector(cv, params, w)?;
    let mut r = apply_laplacian(mesh, w)?;
    r.iter_mut().zip(&f).for_each(|(ri, fi)| *ri -= fi);
    Ok(r)
}

/// `‖w - (-Δ_h)^{-1} f(λ, w)‖_∞`.
pub fn operator_residual(mesh: &Mesh1D, cv: &ChangeOfVariables, params: &ProblemParams, w: &[f64]) -> Result<f64> {
    mesh.check(w)?;
    let f = f_vector(cv, params, w)?;
    operator_residual_from_f(mesh, w, &f)
}

pub(crate) fn operator_residual_from_f(mesh: &Mesh1D, w: &[f64], f: &[f64]) -> Result<f64> {
    let z = solve_poisson(mesh, f)?;
    Ok(z.iter().zip(w).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
}

/// `-Δ_h - diag(∂f/∂w)`.
pub fn jacobian(mesh: &Mesh1D, df_dw: &[f64]) -> Tridiagonal {
    let mut t = mesh.laplacian_matrix();
    t.diag.iter_mut().zip(df_dw).for_each(|(d, fp)| *d -= fp);
    t
}

/// Jacobian-vector product at `w`.
pub fn apply_jacobian(
    mesh: &Mesh1D,
    cv: &ChangeOfVariables,
    params: &ProblemParams,
    w: &[f64],
    dir: &[f64],
) -> Result<GridFunction> {
    let ev = evaluate(cv, params, w)?;
    Ok(GridFunction::new(jacobian(mesh, &ev.df_dw).matvec(dir)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pa2Solution {
    pub w: GridFunction,
    /// Operator residual at `w`.
    pub residual: f64,
    pub iterations: usize,
}

/// Damped Newton for fixed λ with backtracking on the operator residual.
/// Iterates are clamped to the nonnegative cone.
pub fn newton_solve_pa2(
    mesh: &Mesh1D,
    cv: &ChangeOfVariables,
    params: &ProblemParams,
    guess: &[f64],
    opts: &NewtonOptions,
) -> Result<Pa2Solution> {
    mesh.check(guess)?;
    if guess.iter().any(|v| !(*v >= 0.0)) {
        return Err(domain("initial guess must be nonnegative"));
    }
    let mut w = guess.to_vec();
    let mut merit = operator_residual(mesh, cv, params, &w)?;
    for it in 0..opts.max_iters {
        if merit <= opts.tol {
            // One undamped polishing step drives the error to rounding level.
            // A large relative step means the iterates are still creeping
            // toward a degenerate root (the trivial one at λ = λ₁/a), so keep
            // iterating instead of reporting a spurious small solution.
            let Ok((trial, m)) = newton_trial(mesh, cv, params, &w, 1.0) else {
                return classify(GridFunction::new(w), merit, it, opts);
            };
            let step = trial.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let resolved = step <= STEP_RTOL * w.iter().fold(0.0_f64, |acc, v| acc.max(*v));
            let improved = m <= merit;
            if improved {
                w = trial;
                merit = m;
            }
            if resolved || !improved {
                return classify(GridFunction::new(w), merit, it, opts);
            }
            continue;
        }
        let ev = evaluate(cv, params, &w)?;
        let step = newton_direction(mesh, &w, &ev)?;
        let mut accepted = None;
        for k in 0..=MAX_HALVINGS {
            let alpha = 0.5_f64.powi(k as i32);
            let trial = clamped_step(&w, &step, alpha);
            let m = operator_residual(mesh, cv, params, &trial)?;
            // A clamped overshoot to exactly zero has zero residual; never
            // accept it as descent.
            if m < merit && trial.iter().any(|v| *v > 0.0) {
                accepted = Some((trial, m));
                break;
            }
        }
        match accepted {
            Some((trial, m)) => {
                w = trial;
                merit = m;
            }
            None => return Err(NewtonFailure::NoDecrease.into()),
        }
    }
    if merit <= opts.tol {
        return classify(GridFunction::new(w), merit, opts.max_iters, opts);
    }
    Err(NewtonFailure::NotConverged.into())
}

fn newton_direction(mesh: &Mesh1D, w: &[f64], ev: &Pa2Eval) -> Result<Vec<f64>> {
    let mut rhs = apply_laplacian(mesh, w)?.into_vec();
    rhs.iter_mut().zip(&ev.f).for_each(|(r, f)| *r = f - *r);
    let step = jacobian(mesh, &ev.df_dw)
        .solve(&rhs)
        .map_err(|_| Error::Newton(NewtonFailure::SingularJacobian))?;
    if step.iter().any(|v| !v.is_finite()) {
        return Err(NewtonFailure::SingularJacobian.into());
    }
    Ok(step)
}

fn newton_trial(
    mesh: &Mesh1D,
    cv: &ChangeOfVariables,
    params: &ProblemParams,
    w: &[f64],
    alpha: f64,
) -> Result<(Vec<f64>, f64)> {
    let ev = evaluate(cv, params, w)?;
    let step = newton_direction(mesh, w, &ev)?;
    let trial = clamped_step(w, &step, alpha);
    let m = operator_residual(mesh, cv, params, &trial)?;
    Ok((trial, m))
}

fn clamped_step(w: &[f64], step: &[f64], alpha: f64) -> Vec<f64> {
    w.iter().zip(step).map(|(a, d)| (a + alpha * d).max(0.0)).collect()
}

fn classify(w: GridFunction, residual: f64, iterations: usize, opts: &NewtonOptions) -> Result<Pa2Solution> {
    let floor = opts.positivity_floor();
    if w.sup_norm() < floor {
        return Err(NewtonFailure::ConvergedToTrivial.into());
    }
    if w.min() <= floor {
        return Err(NewtonFailure::NonPositive.into());
    }
    Ok(Pa2Solution { w, residual, iterations })
}

/// Picard iteration `w ← (-Δ_h)^{-1} f(λ, w)`: an independent cross-check
/// for the Newton solver in sublinear regimes.
pub fn fixed_point_pa2(
    mesh: &Mesh1D,
    cv: &ChangeOfVariables,
    params: &ProblemParams,
    guess: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<GridFunction> {
    mesh.check(guess)?;
    let mut w = GridFunction::new(guess.to_vec());
    for _ in 0..max_iters {
        let f = f_vector(cv, params, &w)?;
        let next = solve_poisson(mesh, &f)?.map(|v| v.max(0.0));
        let change = next.sup_distance(&w);
        w = next;
        if change <= tol {
            return Ok(w);
        }
    }
    Err(Error::Numerical("fixed-point iteration did not converge".into()))
}

/// Reproducible positive initial guesses `c · sin(πx)^k · (1 + δ sin(mπx))`.
pub fn random_positive_guesses(mesh: &Mesh1D, count: usize, seed: u64, amplitude: f64) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c = amplitude * rng.random_range(0.05..2.0);
            let k = rng.random_range(0.5..2.0);
            let m = rng.random_range(2..6) as f64;
            let delta = rng.random_range(0.0..0.5);
            mesh.sample(|x| {
                let s = (std::f64::consts::PI * x).sin();
                c * s.powf(k) * (1.0 + delta * (m * std::f64::consts::PI * x).sin())
            })
        })
        .collect()
}

/// Runs [`newton_solve_pa2`] from each guess.
pub fn multi_start(
    mesh: &Mesh1D,
    cv: &ChangeOfVariables,
    params: &ProblemParams,
    guesses: &[GridFunction],
    opts: &NewtonOptions,
    mode: ExecMode,
) -> Vec<Result<Pa2Solution>> {
    mode.map(guesses, |g| newton_solve_pa2(mesh, cv, params, g, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::principal_eigenpair;

    #[test]
    fn trivial_solution_has_zero_residual() {
        let m = Mesh1D::new(31).unwrap();
        let cv = ChangeOfVariables::new(1.0, 2.0).unwrap();
        let p = ProblemParams::new(20.0, 0.0, 2.0, 2.0);
        assert_eq!(residual_pa2(&m, &cv, &p, &[0.0; 31]).unwrap().sup_norm(), 0.0);
        let err = newton_solve_pa2(&m, &cv, &p, &[0.0; 31], &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Newton(NewtonFailure::ConvergedToTrivial)));
    }

    #[test]
    fn residual_unfolds_definition() {
        let m = Mesh1D::new(31).unwrap();
        let cv = ChangeOfVariables::new(0.7, 2.5).unwrap();
        let p = ProblemParams::new(5.0, -1.0, 2.0, 2.5);
        let w0 = m.sample(|x| (std::f64::consts::PI * x).sin());
        let f0: Vec<f64> = w0.iter().map(|&s| crate::qmap::f_eval(&cv, &p, s).unwrap()).collect();
        let w = solve_poisson(&m, &f0).unwrap();
        let r = residual_pa2(&m, &cv, &p, &w).unwrap();
        let lap = apply_laplacian(&m, &w).unwrap();
        for i in 0..31 {
            let fi = crate::qmap::f_eval(&cv, &p, w[i]).unwrap();
            assert_eq!(r[i], lap[i] - fi);
        }
        assert!(residual_pa2(&m, &cv, &p, &[-1.0; 31]).is_err());
    }

    #[test]
    fn newton_agrees_with_fixed_point() {
        let m = Mesh1D::new(63).unwrap();
        let eig = principal_eigenpair(&m, 1e-12).unwrap();
        let p = ProblemParams::new(2.0 * eig.lambda1, 0.0, 2.0, 2.0);
        let cv = ChangeOfVariables::new(1.0, 2.0).unwrap();
        let opts = NewtonOptions::default();
        let sol = newton_solve_pa2(&m, &cv, &p, &eig.phi1.scaled(3.0), &opts).unwrap();
        assert!(sol.residual <= opts.tol);
        let fp = fixed_point_pa2(&m, &cv, &p, &eig.phi1.scaled(0.5), 1e-13, 200_000).unwrap();
        assert!(sol.w.sup_distance(&fp) < 1e-8);
    }
}
