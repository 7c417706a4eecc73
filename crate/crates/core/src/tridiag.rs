//! Tridiagonal systems, plain and bordered by one extra row and column.
//!
//! Both solvers use Gaussian elimination with partial pivoting restricted to
//! the band (as LAPACK `gtsv` does). The bordered solver eliminates the extra
//! row alongside and finishes with a pivoted 2x2 system, so it stays well
//! defined when the tridiagonal block itself is singular, which happens at
//! turning points and along vertical branches.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    /// `sub[i] = A[i+1][i]`
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    /// `sup[i] = A[i][i+1]`
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Self {
        let n = diag.len();
        assert!(n >= 1, "empty tridiagonal matrix");
        assert_eq!(sub.len(), n - 1);
        assert_eq!(sup.len(), n - 1);
        Self { sub, diag, sup }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    fn scale(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.sub)
            .chain(&self.sup)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: rhs.len() });
        }
        let tiny = self.scale() * f64::EPSILON * 4.0;
        let mut elim = Elimination::new(self, rhs.to_vec(), None);
        for k in 0..n.saturating_sub(1) {
            elim.step(k, tiny)?;
        }
        if elim.d[n - 1].abs() <= tiny {
            return Err(Error::Numerical("singular tridiagonal matrix".into()));
        }
        let mut x = vec![0.0; n];
        x[n - 1] = elim.f[n - 1] / elim.d[n - 1];
        elim.back_substitute(&mut x);
        Ok(x)
    }

    /// Solves `[[T, col], [row^T, corner]] [x; y] = [rhs; rhs_last]`.
    pub fn solve_bordered(
        &self,
        col: &[f64],
        row: &[f64],
        corner: f64,
        rhs: &[f64],
        rhs_last: f64,
    ) -> Result<(Vec<f64>, f64)> {
        let n = self.len();
        for v in [col, row, rhs] {
            if v.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: v.len() });
            }
        }
        let tiny = self.scale() * f64::EPSILON * 4.0;
        let mut elim = Elimination::new(self, rhs.to_vec(), Some(Border {
            col: col.to_vec(),
            row: row.to_vec(),
            corner,
            rhs: rhs_last,
        }));
        for k in 0..n - 1 {
            elim.step(k, tiny)?;
        }
        let border = elim.border.as_ref().expect("bordered elimination");
        // Remaining 2x2: unknowns (x_{n-1}, y).
        let (a11, a12, b1) = (elim.d[n - 1], border.col[n - 1], elim.f[n - 1]);
        let (a21, a22, b2) = (border.row[n - 1], border.corner, border.rhs);
        let (xl, y) = solve_2x2_pivoted(a11, a12, a21, a22, b1, b2)?;
        let mut x = vec![0.0; n];
        x[n - 1] = xl;
        let col_final = border.col.clone();
        elim.back_substitute_with_col(&mut x, &col_final, y);
        Ok((x, y))
    }
}

struct Border {
    col: Vec<f64>,
    row: Vec<f64>,
    corner: f64,
    rhs: f64,
}

struct Elimination {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    f: Vec<f64>,
    border: Option<Border>,
}

impl Elimination {
    fn new(t: &Tridiagonal, f: Vec<f64>, border: Option<Border>) -> Self {
        let n = t.len();
        Self {
            dl: t.sub.clone(),
            d: t.diag.clone(),
            du: t.sup.clone(),
            du2: vec![0.0; n.saturating_sub(2)],
            f,
            border,
        }
    }

    /// Eliminates column `k` below the diagonal (and in the border row).
    fn step(&mut self, k: usize, tiny: f64) -> Result<()> {
        let n = self.d.len();
        if self.d[k].abs() >= self.dl[k].abs() {
            if self.d[k].abs() <= tiny {
                return Err(Error::Numerical("zero pivot in tridiagonal elimination".into()));
            }
            let m = self.dl[k] / self.d[k];
            self.d[k + 1] -= m * self.du[k];
            self.f[k + 1] -= m * self.f[k];
            if let Some(b) = self.border.as_mut() {
                b.col[k + 1] -= m * b.col[k];
            }
            if k + 2 < n {
                self.du2[k] = 0.0;
            }
        } else {
            let m = self.d[k] / self.dl[k];
            self.d[k] = self.dl[k];
            let old_next_diag = self.d[k + 1];
            self.d[k + 1] = self.du[k] - m * old_next_diag;
            if k + 2 < n {
                self.du2[k] = self.du[k + 1];
                self.du[k + 1] *= -m;
            }
            self.du[k] = old_next_diag;
            let fk = self.f[k];
            self.f[k] = self.f[k + 1];
            self.f[k + 1] = fk - m * self.f[k];
            if let Some(b) = self.border.as_mut() {
                let ck = b.col[k];
                b.col[k] = b.col[k + 1];
                b.col[k + 1] = ck - m * b.col[k];
            }
        }
        self.dl[k] = 0.0;
        if let Some(b) = self.border.as_mut() {
            let mb = b.row[k] / self.d[k];
            b.row[k] = 0.0;
            b.row[k + 1] -= mb * self.du[k];
            if k + 2 < n {
                b.row[k + 2] -= mb * self.du2[k];
            }
            b.corner -= mb * b.col[k];
            b.rhs -= mb * self.f[k];
        }
        Ok(())
    }

    fn back_substitute(&self, x: &mut [f64]) {
        let n = self.d.len();
        for k in (0..n.saturating_sub(1)).rev() {
            let mut s = self.f[k] - self.du[k] * x[k + 1];
            if k + 2 < n {
                s -= self.du2[k] * x[k + 2];
            }
            x[k] = s / self.d[k];
        }
    }

    fn back_substitute_with_col(&self, x: &mut [f64], col: &[f64], y: f64) {
        let n = self.d.len();
        for k in (0..n - 1).rev() {
            let mut s = self.f[k] - self.du[k] * x[k + 1] - col[k] * y;
            if k + 2 < n {
                s -= self.du2[k] * x[k + 2];
            }
            x[k] = s / self.d[k];
        }
    }
}

fn solve_2x2_pivoted(a11: f64, a12: f64, a21: f64, a22: f64, b1: f64, b2: f64) -> Result<(f64, f64)> {
    let scale = a11.abs().max(a12.abs()).max(a21.abs()).max(a22.abs());
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Numerical("singular bordered system".into()));
    }
    // Complete pivoting on the 2x2 block.
    let entries = [a11.abs(), a12.abs(), a21.abs(), a22.abs()];
    let piv = (0..4).max_by(|&i, &j| entries[i].total_cmp(&entries[j])).unwrap();
    // Reorder so the pivot sits at (0,0): rows (r0, r1), columns (c0, c1).
    let m = [[a11, a12], [a21, a22]];
    let rhs = [b1, b2];
    let (r0, r1) = if piv < 2 { (0, 1) } else { (1, 0) };
    let (c0, c1) = if piv % 2 == 0 { (0, 1) } else { (1, 0) };
    let p = m[r0][c0];
    let l = m[r1][c0] / p;
    let u22 = m[r1][c1] - l * m[r0][c1];
    if u22.abs() <= scale * f64::EPSILON * 8.0 {
        return Err(Error::Numerical("singular bordered system".into()));
    }
    let z1 = (rhs[r1] - l * rhs[r0]) / u22;
    let z0 = (rhs[r0] - m[r0][c1] * z1) / p;
    let mut out = [0.0; 2];
    out[c0] = z0;
    out[c1] = z1;
    Ok((out[0], out[1]))
}
