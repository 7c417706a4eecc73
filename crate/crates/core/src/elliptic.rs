//! Second-order finite differences for `-d²/dx²` on `(0, 1)` with homogeneous
//! Dirichlet conditions.

use std::io::Write;
use std::ops::{Deref, DerefMut};

use crate::error::{domain, Error, Result};
use crate::tridiag::Tridiagonal;

const EIG_MAX_ITERS: usize = 1000;

/// Uniform mesh of `n` interior nodes `x_i = i h`, `h = 1/(n+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    n: usize,
    h: f64,
}

impl Mesh1D {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(domain("mesh needs at least one interior node"));
        }
        Ok(Self { n, h: 1.0 / (n as f64 + 1.0) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }

    /// Samples `f` at the interior nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::new(self.nodes().map(f).collect())
    }

    /// Closed-form principal eigenvalue `(2/h²)(1 - cos(πh))` of the stencil.
    pub fn lambda1_closed_form(&self) -> f64 {
        2.0 / (self.h * self.h) * (1.0 - (std::f64::consts::PI * self.h).cos())
    }

    /// The matrix of `-Δ_h`.
    pub fn laplacian_matrix(&self) -> Tridiagonal {
        let inv_h2 = 1.0 / (self.h * self.h);
        Tridiagonal::new(
            vec![-inv_h2; self.n - 1],
            vec![2.0 * inv_h2; self.n],
            vec![-inv_h2; self.n - 1],
        )
    }

    pub(crate) fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: u.len() });
        }
        Ok(())
    }
}

/// Interior values of a function on a [`Mesh1D`]; boundary values are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridFunction(Vec<f64>);

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.0.iter().enumerate() {
            if *v > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| c * v).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn try_map(&self, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        Ok(Self(self.0.iter().map(|&v| f(v)).collect::<Result<_>>()?))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Distance in the sup norm.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Writes `x,value` rows, header included.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh1D, mut out: W) -> Result<()> {
        mesh.check(self)?;
        writeln!(out, "x,value")?;
        for (x, v) in mesh.nodes().zip(&self.0) {
            writeln!(out, "{x:.17e},{v:.17e}")?;
        }
        Ok(())
    }
}

impl Deref for GridFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for GridFunction {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for GridFunction {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Principal eigenpair of `-Δ_h`, with `φ₁` positive and sup-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi1: GridFunction,
}

/// `v_i = (-u_{i-1} + 2u_i - u_{i+1})/h²` with zero boundary values.
pub fn apply_laplacian(mesh: &Mesh1D, u: &[f64]) -> Result<GridFunction> {
    mesh.check(u)?;
    let n = u.len();
    let inv_h2 = 1.0 / (mesh.h * mesh.h);
    Ok(GridFunction(
        (0..n)
            .map(|i| {
                let left = if i > 0 { u[i - 1] } else { 0.0 };
                let right = if i + 1 < n { u[i + 1] } else { 0.0 };
                (2.0 * u[i] - left - right) * inv_h2
            })
            .collect(),
    ))
}

/// Solves `-Δ_h u = rhs` by tridiagonal elimination.
pub fn solve_poisson(mesh: &Mesh1D, rhs: &[f64]) -> Result<GridFunction> {
    mesh.check(rhs)?;
    // Thomas sweep on the constant stencil; the matrix is an M-matrix, so no
    // pivoting is needed.
    let n = rhs.len();
    let h2 = mesh.h * mesh.h;
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = 2.0;
    c[0] = -1.0 / denom;
    d[0] = rhs[0] * h2 / denom;
    for i in 1..n {
        denom = 2.0 + c[i - 1];
        c[i] = -1.0 / denom;
        d[i] = (rhs[i] * h2 + d[i - 1]) / denom;
    }
    let mut u = vec![0.0; n];
    u[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = d[i] - c[i] * u[i + 1];
    }
    Ok(GridFunction(u))
}

/// Inverse power iteration for the smallest eigenvalue of `-Δ_h`.
///
/// The eigenvalue is the Rayleigh quotient in gradient form,
/// `Σ (Δφ/h)² h / Σ φ² h`, which avoids the cancellation in `φ·Aφ`.
pub fn principal_eigenpair(mesh: &Mesh1D, eig_tol: f64) -> Result<EigenPair> {
    let mut v = mesh.sample(|x| x * (1.0 - x));
    let mut converged_at = None;
    for it in 0..EIG_MAX_ITERS {
        let mut next = solve_poisson(mesh, &v)?;
        let s = next.sup_norm();
        next.iter_mut().for_each(|x| *x /= s);
        let change = next.sup_distance(&v);
        v = next;
        match converged_at {
            // A few extra sweeps push the error to rounding level.
            Some(k) if it >= k + 3 => break,
            None if change <= eig_tol => converged_at = Some(it),
            _ => {}
        }
    }
    if converged_at.is_none() {
        return Err(Error::Numerical("inverse power iteration hit its iteration cap".into()));
    }
    let lambda1 = grad_norm_sq(mesh, &v)? / weighted_norm_sq(mesh, &v);
    if v.min() <= 0.0 {
        return Err(Error::Numerical("principal eigenvector is not positive".into()));
    }
    Ok(EigenPair { lambda1, phi1: v })
}

/// `|∇u|₂²` by forward differences: `Σ_{i=0..n} ((u_{i+1}-u_i)/h)² h`.
pub fn grad_norm_sq(mesh: &Mesh1D, u: &[f64]) -> Result<f64> {
    mesh.check(u)?;
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &cur in u.iter().chain(std::iter::once(&0.0)) {
        let d = cur - prev;
        acc += d * d;
        prev = cur;
    }
    Ok(acc / mesh.h)
}

/// `Σ u_i v_i wgt_i h`.
pub fn weighted_inner(mesh: &Mesh1D, u: &[f64], v: &[f64], wgt: &[f64]) -> Result<f64> {
    mesh.check(u)?;
    mesh.check(v)?;
    mesh.check(wgt)?;
    Ok(u.iter().zip(v).zip(wgt).map(|((a, b), c)| a * b * c).sum::<f64>() * mesh.h)
}

/// Discrete `|u|₂² = Σ u_i² h`.
pub fn weighted_norm_sq(mesh: &Mesh1D, u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>() * mesh.h
}
