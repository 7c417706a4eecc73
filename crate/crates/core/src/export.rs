//! Plain-text exports. Floats are written with `{:.17e}` so that output is
//! byte-identical for identical inputs and round-trips exactly.

use std::io::Write;

use serde::Serialize;

use crate::audit::AuditReport;
use crate::continuation::Branch;
use crate::error::Result;
use crate::kirchhoff::P1Solution;

pub const BRANCH_HEADER: &str = "index,lambda,w_sup,u_sup,grad_u_sq,arclength,fold_flag";

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn write_branch_csv<W: Write>(branch: &Branch, mut out: W) -> Result<()> {
    writeln!(out, "{BRANCH_HEADER}")?;
    for p in &branch.points {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.index,
            fmt_f64(p.lambda),
            fmt_f64(p.w_sup),
            fmt_f64(p.u_sup),
            fmt_f64(p.grad_u_sq),
            fmt_f64(p.arclength),
            u8::from(branch.is_fold(p.index)),
        )?;
    }
    Ok(())
}

/// Two columns `lambda w_sup` after `#` comment lines carrying the
/// bifurcation point, direction, stop reason and folds.
pub fn write_diagram<W: Write>(branch: &Branch, mut out: W) -> Result<()> {
    writeln!(out, "# lambda w_sup")?;
    writeln!(out, "# bifurcation_lambda {}", fmt_f64(branch.bifurcation_lambda))?;
    writeln!(out, "# direction {}", serde_json::to_string(&branch.direction)?.trim_matches('"'))?;
    writeln!(out, "# stop_reason {}", serde_json::to_string(&branch.stop_reason)?.trim_matches('"'))?;
    for &i in &branch.folds {
        let p = &branch.points[i];
        writeln!(out, "# fold {} {} {}", i, fmt_f64(p.lambda), fmt_f64(p.w_sup))?;
    }
    for p in &branch.points {
        writeln!(out, "{} {}", fmt_f64(p.lambda), fmt_f64(p.w_sup))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AuditJson<'a> {
    checks: &'a [crate::audit::AuditCheck],
    failures: usize,
}

pub fn audit_json(report: &AuditReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(&AuditJson { checks: &report.checks, failures: report.failures() })?)
}

#[derive(Serialize)]
struct P1Json<'a> {
    solutions: &'a [P1Solution],
    u_files: Vec<String>,
}

/// JSON listing of solutions; `u_files[i]` names the CSV holding `u` of the
/// `i`-th solution.
pub fn p1_json(solutions: &[P1Solution], u_files: Vec<String>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&P1Json { solutions, u_files })?)
}
