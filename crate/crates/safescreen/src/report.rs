//! JSON and csv renderings of experiment results. Every JSON document
//! carries `"schema": 1`.

use std::fmt::Write as _;

use serde_json::{json, Value};

use safescreen_core::{SafetyCheck, ScreeningReport, ScreeningSettings, SolveTrace};

use crate::experiments::{CompressionTable, PathReport};

pub const SCHEMA: u32 = 1;

/// JSON has no infinities; they become `null`.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

pub fn settings_json(s: &ScreeningSettings) -> Value {
    json!({
        "loss": s.loss.name(),
        "mu": num(s.mu),
        "lambda": num(s.lambda),
        "penalty": s.penalty.name(),
        "steps": s.steps,
        "radius": num(s.radius),
    })
}

pub fn safety_json(c: &SafetyCheck) -> Value {
    json!({
        "safe": c.safe,
        "objective_diff": num(c.objective_diff),
        "solution_diff": c.solution_diff.map_or(Value::Null, num),
    })
}

/// Outcome label of a screening run: `safe` only when the region was shown
/// to contain the reference optimum and the refit matched; a region that
/// failed the containment check is `unverified` whatever the refit says.
pub fn status(containment: Option<bool>, safety: Option<&SafetyCheck>) -> &'static str {
    match (containment, safety.map(|c| c.safe)) {
        (Some(false), _) => "unverified",
        (Some(true), Some(true)) => "safe",
        (_, Some(false)) => "unsafe",
        _ => "unchecked",
    }
}

pub fn screening_json(
    report: &ScreeningReport,
    containment: Option<bool>,
    safety: Option<&SafetyCheck>,
    extra: Value,
) -> Value {
    let mut v = json!({
        "schema": SCHEMA,
        "n": report.mask.len(),
        "n_screened": report.n_screened,
        "settings": settings_json(&report.settings),
        "logdet": num(report.region_volume_logdet),
        "wall_time_s": report.wall_time_s,
        "containment": containment,
        "safety": safety.map(|c| c.safe),
        "safety_check": safety.map_or(Value::Null, safety_json),
        "status": status(containment, safety),
    });
    merge(&mut v, extra);
    v
}

pub fn solve_json(trace: &SolveTrace, objective: f64, extra: Value) -> Value {
    let mut v = json!({
        "schema": SCHEMA,
        "epochs": trace.epochs(),
        "converged": trace.converged,
        "primal": num(objective),
        "gap": num(trace.final_gap()),
        "trace": trace.iterates.iter().map(|e| json!([e.epoch, num(e.primal), num(e.gap)])).collect::<Vec<_>>(),
    });
    merge(&mut v, extra);
    v
}

pub fn compression_json(t: &CompressionTable, extra: Value) -> Value {
    let rows: Vec<Value> = t
        .rows
        .iter()
        .map(|r| {
            json!({
                "fraction": r.fraction,
                "n_kept": r.n_kept,
                "screened_error": num(r.screened_error),
                "random_mean": num(r.random_mean()),
                "random_errors": r.random_errors.iter().map(|&e| num(e)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut v = json!({
        "schema": SCHEMA,
        "full_error": num(t.full_error),
        "n_screened": t.n_screened,
        "rows": rows,
    });
    merge(&mut v, extra);
    v
}

pub fn compression_csv(t: &CompressionTable) -> String {
    let reps = t.rows.first().map_or(0, |r| r.random_errors.len());
    let mut out = String::from("fraction,n_kept,screened_error,random_mean");
    for i in 0..reps {
        write!(out, ",random_{i}").unwrap();
    }
    out.push('\n');
    for r in &t.rows {
        write!(out, "{},{},{:?},{:?}", r.fraction, r.n_kept, r.screened_error, r.random_mean()).unwrap();
        for e in &r.random_errors {
            write!(out, ",{e:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn path_json(r: &PathReport, extra: Value) -> Value {
    let points: Vec<Value> = r
        .points
        .iter()
        .map(|p| {
            json!({
                "lambda": p.lambda,
                "epochs_unscreened": p.epochs_unscreened,
                "epochs_screened": p.epochs_screened,
                "n_kept": p.n_kept,
                "region_builds": p.region_builds,
                "cost_unscreened": p.cost_unscreened,
                "cost_screened": p.cost_screened,
                "objective_diff": num(p.objective_diff),
                "solution_diff": p.solution_diff.map_or(Value::Null, num),
                "containment": p.containment,
                "safe": p.safe,
            })
        })
        .collect();
    let mut v = json!({
        "schema": SCHEMA,
        "cost_model": "fit of T epochs on s of n samples = T*s/n; region of k cuts = k, plus 1 for the gap",
        "total_unscreened": r.total_unscreened,
        "total_screened": r.total_screened,
        "all_safe": r.points.iter().all(|p| p.safe),
        "points": points,
    });
    merge(&mut v, extra);
    v
}

pub fn path_csv(r: &PathReport) -> String {
    let mut out = String::from(
        "lambda,epochs_unscreened,epochs_screened,n_kept,cost_unscreened,cost_screened,safe\n",
    );
    for p in &r.points {
        writeln!(
            out,
            "{:?},{},{},{},{:?},{:?},{}",
            p.lambda,
            p.epochs_unscreened,
            p.epochs_screened,
            p.n_kept,
            p.cost_unscreened,
            p.cost_screened,
            p.safe
        )
        .unwrap();
    }
    out
}

fn merge(into: &mut Value, extra: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, extra) {
        a.extend(b);
    }
}

/// Pretty JSON with a trailing newline.
pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values are serializable");
    s.push('\n');
    s
}
