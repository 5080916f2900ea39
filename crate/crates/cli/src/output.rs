use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chj_core::analysis::fmt_num;
use chj_core::ap_solver::ApSolution;
use chj_core::field::Field;
use chj_core::hj_solver::{HjSolution, InvariantReport};
use chj_core::model::TraitGrid;
use serde::Serialize;

pub const HJ_TRACE_HEADER: &str = "n,t,I,min_u,argmin_x,lip_margin,constraint_residual";
pub const AP_TRACE_HEADER: &str = "n,t,J,min_v,argmin_x,stab_shift";
pub const FIELD_HEADER: &str = "n,t,x,value";

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, &target).with_context(|| format!("cannot move into {}", target.display()))?;
    Ok(target)
}

pub fn hj_trace_csv(sol: &HjSolution) -> String {
    let mut out = format!("{HJ_TRACE_HEADER}\n");
    for r in &sol.trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            fmt_num(r.t),
            fmt_num(r.multiplier),
            fmt_num(r.min_u),
            fmt_num(r.argmin_x),
            fmt_num(r.lip_margin),
            fmt_num(r.residual)
        );
    }
    out
}

pub fn ap_trace_csv(sol: &ApSolution) -> String {
    let mut out = format!("{AP_TRACE_HEADER}\n");
    for r in &sol.trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n,
            fmt_num(r.t),
            fmt_num(r.mass),
            fmt_num(r.min_v),
            fmt_num(r.argmin_x),
            fmt_num(r.stab_shift)
        );
    }
    out
}

/// Long-format snapshots `n,t,x,value` of the stored fields.
pub fn fields_csv<'a>(
    fields: impl IntoIterator<Item = (&'a usize, &'a Field)>,
    grid: &TraitGrid,
    dt: f64,
) -> String {
    let mut out = format!("{FIELD_HEADER}\n");
    for (&n, f) in fields {
        let t = n as f64 * dt;
        for (k, &v) in f.values.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                n,
                fmt_num(t),
                fmt_num(grid.node(f.start + k)),
                fmt_num(v)
            );
        }
    }
    out
}

#[derive(Serialize)]
pub struct AuditEntry {
    pub pass: bool,
    pub worst_margin: Option<f64>,
    pub first_violation_step: Option<usize>,
}

/// The `name → {pass, worst_margin, first_violation_step}` map.
pub fn audit_map(report: &InvariantReport) -> BTreeMap<String, AuditEntry> {
    report
        .checks
        .iter()
        .map(|(k, c)| {
            (
                k.clone(),
                AuditEntry {
                    pass: c.pass,
                    worst_margin: c.worst_margin.filter(|m| m.is_finite()),
                    first_violation_step: c.first_violation_step,
                },
            )
        })
        .collect()
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}
