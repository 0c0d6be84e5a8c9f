//! CPLEX LP-format export, for cross-checking models in external solvers.

use std::fmt::Write;

use crate::model::{MilpModel, Sense, VarKind};
use crate::scalar::Scalar;

fn clean(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        out.insert(0, '_');
    }
    out
}

fn num<S: Scalar>(v: S) -> String {
    format!("{}", v.as_f64())
}

fn linear<S: Scalar>(model: &MilpModel<S>, terms: impl Iterator<Item = (usize, S)>) -> String {
    let mut s = String::new();
    for (j, c) in terms {
        if c == S::zero() {
            continue;
        }
        let name = clean(&model.vars[j].name);
        if s.is_empty() {
            if c < S::zero() {
                s.push_str("- ");
            }
        } else if c < S::zero() {
            s.push_str(" - ");
        } else {
            s.push_str(" + ");
        }
        let a = c.abs();
        if a == S::one() {
            s.push_str(&name);
        } else {
            let _ = write!(s, "{} {}", num(a), name);
        }
    }
    if s.is_empty() {
        s.push('0');
    }
    s
}

/// Renders `model` in CPLEX LP format. Ranged rows are split into two rows
/// suffixed `_lo` and `_hi`; the objective constant goes into a comment.
pub fn to_lp_string<S: Scalar>(model: &MilpModel<S>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.name);
    if model.objective_offset != S::zero() {
        let _ = writeln!(out, "\\ objective constant {}", num(model.objective_offset));
    }
    out.push_str(match model.sense {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    let obj = linear(model, model.vars.iter().enumerate().map(|(j, v)| (j, v.objective)));
    let _ = writeln!(out, " obj: {obj}");
    out.push_str("Subject To\n");
    for (i, c) in model.constraints.iter().enumerate() {
        let name = if c.name.is_empty() {
            format!("r{i}")
        } else {
            clean(&c.name)
        };
        let expr = linear(model, c.terms.iter().map(|&(v, a)| (v.index(), a)));
        let (lo, hi) = (c.lower, c.upper);
        if lo == hi {
            let _ = writeln!(out, " {name}: {expr} = {}", num(hi));
        } else if lo.is_finite() && hi.is_finite() {
            let _ = writeln!(out, " {name}_lo: {expr} >= {}", num(lo));
            let _ = writeln!(out, " {name}_hi: {expr} <= {}", num(hi));
        } else if hi.is_finite() {
            let _ = writeln!(out, " {name}: {expr} <= {}", num(hi));
        } else if lo.is_finite() {
            let _ = writeln!(out, " {name}: {expr} >= {}", num(lo));
        }
    }
    out.push_str("Bounds\n");
    for v in &model.vars {
        if v.kind == VarKind::Binary {
            continue;
        }
        let name = clean(&v.name);
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {name} <= {}", num(v.lower), num(v.upper));
            }
            (true, false) => {
                let _ = writeln!(out, " {name} >= {}", num(v.lower));
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", num(v.upper));
            }
        }
    }
    let bins: Vec<String> = model
        .vars
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| clean(&v.name))
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for chunk in bins.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
