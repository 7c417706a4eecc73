//! The change of variables `w = I_λ(u) = u/λ + u^r`, its inverse `q_λ`, and
//! the composite nonlinearity `f(λ, s) = a q_λ(s) + b q_λ(s)^p`.

use crate::error::{domain, Error, Result};
use crate::model::ProblemParams;

const MAX_INVERSION_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeOfVariables {
    lambda: f64,
    r: f64,
    tol: f64,
}

impl ChangeOfVariables {
    pub fn new(lambda: f64, r: f64) -> Result<Self> {
        Self::with_tol(lambda, r, 1e-12)
    }

    pub fn with_tol(lambda: f64, r: f64, tol: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(domain(format!("lambda must be positive and finite, got {lambda}")));
        }
        if !(r > 1.0 && r.is_finite()) {
            return Err(domain(format!("r must exceed 1, got {r}")));
        }
        if !(tol > 0.0) {
            return Err(domain("inversion tolerance must be positive"));
        }
        Ok(Self { lambda, r, tol })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `I_λ(s) = s/λ + s^r`.
    pub fn i_lambda(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(domain(format!("I_lambda needs s >= 0, got {s}")));
        }
        Ok(s / self.lambda + s.powf(self.r))
    }

    /// `q_λ(w)`: the unique `u >= 0` with `u/λ + u^r = w`.
    pub fn q(&self, w: f64) -> Result<f64> {
        if !(w >= 0.0) || w.is_infinite() {
            return Err(domain(format!("q_lambda needs finite w >= 0, got {w}")));
        }
        self.invert(w)
    }

    /// Safeguarded Newton on `u/λ + u^r - w`. Both `λw` and `w^{1/r}` bound
    /// the root from above, so the bracket starts at `[0, min(λw, w^{1/r})]`.
    fn invert(&self, w: f64) -> Result<f64> {
        if w == 0.0 {
            return Ok(0.0);
        }
        let (lam, r) = (self.lambda, self.r);
        let mut lo = 0.0;
        let mut hi = (lam * w).min(w.powf(1.0 / r));
        let mut u = hi;
        for _ in 0..MAX_INVERSION_ITERS {
            let upow = u.powf(r - 1.0);
            let fu = u / lam + u * upow - w;
            if fu > 0.0 {
                hi = u;
            } else if fu < 0.0 {
                lo = u;
            } else {
                return Ok(u);
            }
            let dfu = 1.0 / lam + r * upow;
            let delta = fu / dfu;
            if delta.abs() <= self.tol * u {
                // Converged; the last correction may round just outside the
                // bracket, which must not trigger a bisection step.
                return Ok((u - delta).clamp(lo, hi));
            }
            let mut next = u - delta;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            u = next;
            if hi - lo <= f64::EPSILON * hi {
                return Ok(u);
            }
        }
        Err(Error::Numerical(format!("q_lambda inversion did not converge for w = {w}")))
    }

    /// `q_λ'(w) = 1/(1/λ + r q^{r-1})`, for `w > 0`.
    pub fn q_prime(&self, w: f64) -> Result<f64> {
        if !(w > 0.0) {
            return Err(domain(format!("q_prime needs w > 0, got {w}")));
        }
        let q = self.invert(w)?;
        Ok(self.q_prime_at(q))
    }

    /// `q_λ'` expressed through `q = q_λ(w)`; at `q = 0` this is the limit `λ`.
    pub fn q_prime_at(&self, q: f64) -> f64 {
        1.0 / (1.0 / self.lambda + self.r * q.powf(self.r - 1.0))
    }

    /// `∂q_λ(w)/∂λ = q q'/λ²`, through `q = q_λ(w)`.
    pub fn dq_dlambda_at(&self, q: f64) -> f64 {
        q * self.q_prime_at(q) / (self.lambda * self.lambda)
    }
}

/// Pointwise data of the nonlinearity at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearityEval {
    /// `q_λ(s)`
    pub q: f64,
    /// `f(λ, s)`
    pub f: f64,
    /// `∂f/∂s`
    pub df_ds: f64,
    /// `∂f/∂λ`
    pub df_dlambda: f64,
}

/// Evaluates `f`, `∂f/∂s` and `∂f/∂λ` at once, sharing one inversion.
pub fn nonlinearity(cv: &ChangeOfVariables, params: &ProblemParams, s: f64) -> Result<NonlinearityEval> {
    let q = cv.q(s)?;
    let ProblemParams { a, b, p, .. } = *params;
    let qp1 = if q > 0.0 { q.powf(p - 1.0) } else { 0.0 };
    let f = a * q + b * q * qp1;
    let outer = a + b * p * qp1;
    Ok(NonlinearityEval {
        q,
        f,
        df_ds: outer * cv.q_prime_at(q),
        df_dlambda: outer * cv.dq_dlambda_at(q),
    })
}

/// `f(λ, s) = a q_λ(s) + b q_λ(s)^p`.
pub fn f_eval(cv: &ChangeOfVariables, params: &ProblemParams, s: f64) -> Result<f64> {
    Ok(nonlinearity(cv, params, s)?.f)
}

/// `∂f/∂s`; at `s = 0` the linearization slope `aλ`.
pub fn f_prime(cv: &ChangeOfVariables, params: &ProblemParams, s: f64) -> Result<f64> {
    if s == 0.0 {
        return Ok(params.a * cv.lambda());
    }
    Ok(nonlinearity(cv, params, s)?.df_ds)
}

/// `φ(s) = λ₁ s^{r-1} - b s^{p-1}`.
pub fn phi_eval(lambda1: f64, params: &ProblemParams, s: f64) -> f64 {
    lambda1 * s.powf(params.r - 1.0) - params.b * s.powf(params.p - 1.0)
}

/// Extremum `(s₀, φ(s₀))` of `φ`: a minimum for `r > p`, a maximum for
/// `r < p`. Requires `b > 0` and `r != p`.
pub fn phi_smax(lambda1: f64, params: &ProblemParams) -> Result<(f64, f64)> {
    let ProblemParams { b, p, r, .. } = *params;
    if params.r_equals_p() {
        return Err(Error::DegenerateExponent);
    }
    if !(b > 0.0) {
        return Err(domain(format!("phi_smax needs b > 0, got {b}")));
    }
    let s0 = (b * (p - 1.0) / (lambda1 * (r - 1.0))).powf(1.0 / (r - p));
    let phi_s0 = ((p - 1.0) / lambda1).powf((p - 1.0) / (r - p))
        * (b / (r - 1.0)).powf((r - 1.0) / (r - p))
        * (p - r);
    Ok((s0, phi_s0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cv(lambda: f64, r: f64) -> ChangeOfVariables {
        ChangeOfVariables::new(lambda, r).unwrap()
    }

    #[test]
    fn i_lambda_examples() {
        assert_eq!(cv(1.0, 2.0).i_lambda(1.0).unwrap(), 2.0);
        assert_eq!(cv(2.0, 3.0).i_lambda(2.0).unwrap(), 9.0);
        assert_eq!(cv(0.3, 1.7).i_lambda(0.0).unwrap(), 0.0);
        assert!(cv(1.0, 2.0).i_lambda(-1.0).is_err());
    }

    #[test]
    fn q_lambda_examples() {
        assert_relative_eq!(cv(1.0, 2.0).q(2.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(cv(2.0, 3.0).q(9.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_eq!(cv(5.0, 1.5).q(0.0).unwrap(), 0.0);
        assert!(matches!(cv(1.0, 2.0).q(-1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn q_prime_examples() {
        assert_relative_eq!(cv(1.0, 2.0).q_prime(2.0).unwrap(), 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(cv(2.0, 3.0).q_prime(9.0).unwrap(), 0.08, max_relative = 1e-14);
        assert_relative_eq!(cv(5.0, 2.0).q_prime(1e-14).unwrap(), 5.0, max_relative = 1e-9);
        assert_eq!(cv(5.0, 2.0).q_prime_at(0.0), 5.0);
        assert!(cv(5.0, 2.0).q_prime(0.0).is_err());
    }

    #[test]
    fn f_examples() {
        let p = ProblemParams::new(3.0, -1.0, 2.0, 2.0);
        assert_relative_eq!(f_eval(&cv(1.0, 2.0), &p, 2.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_eq!(f_eval(&cv(1.0, 2.0), &p, 0.0).unwrap(), 0.0);
        let p2 = ProblemParams::new(1.0, 2.0, 3.0, 3.0);
        assert_relative_eq!(f_eval(&cv(2.0, 3.0), &p2, 9.0).unwrap(), 18.0, max_relative = 1e-14);
        assert_relative_eq!(f_prime(&cv(1.0, 2.0), &p, 2.0).unwrap(), 1.0 / 3.0, max_relative = 1e-14);
        let p3 = ProblemParams::new(3.0, 1.0, 2.0, 2.0);
        assert_eq!(f_prime(&cv(2.0, 2.0), &p3, 0.0).unwrap(), 6.0);
    }

    #[test]
    fn phi_examples() {
        let l1 = PI * PI;
        assert_eq!(phi_eval(l1, &ProblemParams::new(1.0, 2.0, 2.0, 3.0), 0.0), 0.0);
        let (s0, m) = phi_smax(l1, &ProblemParams::new(1.0, 2.0, 2.0, 3.0)).unwrap();
        assert_relative_eq!(s0, 0.101321, max_relative = 1e-5);
        assert_relative_eq!(m, -0.101321, max_relative = 1e-5);
        assert_relative_eq!(phi_eval(l1, &ProblemParams::new(1.0, 2.0, 2.0, 3.0), s0), m, max_relative = 1e-12);
        let (s0, m) = phi_smax(l1, &ProblemParams::new(1.0, 1.0, 3.0, 2.0)).unwrap();
        assert_relative_eq!(s0, 4.9348, max_relative = 1e-4);
        assert_relative_eq!(m, 24.352, max_relative = 1e-4);
        assert!(matches!(phi_smax(1.0, &ProblemParams::new(1.0, 1.0, 2.0, 2.0)), Err(Error::DegenerateExponent)));
        assert!(phi_smax(1.0, &ProblemParams::new(1.0, -1.0, 2.0, 3.0)).is_err());
    }
}
