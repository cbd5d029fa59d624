//! Canonical JSON: sorted keys, floats rounded to 12 significant digits,
//! non-finite values as `null`.

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use qpea::ipea::{EstimateMethod, IterationStats, RootEstimate, RootsReport, Stage};
use qpea::ledger::{CompareRow, OpLedger, DECOMPOSITION_ANCILLAS};
use qpea::poly::{ComplexMatrix, Mode};
use qpea::prc::EffectiveOperator;

pub const SCHEMA: &str = "companion-qpea/1";

pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    // no negative zero in output
    json!(if rounded == 0.0 { 0.0 } else { rounded })
}

pub fn complex(z: Complex64) -> Value {
    json!({ "re": num(z.re), "im": num(z.im) })
}

fn complexes(zs: &[Complex64]) -> Value {
    Value::Array(zs.iter().map(|&z| complex(z)).collect())
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn matrix(a: &ComplexMatrix) -> Value {
    let part = |f: fn(&Complex64) -> f64| {
        Value::Array((0..a.nrows()).map(|i| Value::Array((0..a.ncols()).map(|j| num(f(&a[(i, j)]))).collect())).collect())
    };
    json!({ "re": part(|z| z.re), "im": part(|z| z.im) })
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::XMode => "x",
        Mode::RecipXMode => "recip",
    }
}

fn method_name(method: EstimateMethod) -> &'static str {
    match method {
        EstimateMethod::Eigenstate => "eigenstate",
        EstimateMethod::Mixed => "mixed",
        EstimateMethod::EigenstateFallback => "eigenstate-fallback",
    }
}

pub fn envelope(command: &str, body: Map<String, Value>) -> Value {
    let mut out = body;
    out.insert("schema".into(), json!(SCHEMA));
    out.insert("command".into(), json!(command));
    Value::Object(out)
}

fn iteration(it: &IterationStats) -> Value {
    json!({
        "k": it.k,
        "l": it.l,
        "theta": num(it.theta),
        "p0": num(it.p0),
        "p1": num(it.p1),
        "bit": it.bit,
        "degenerate": it.degenerate,
        "r_power": it.r_power.map(num),
        "r": it.r.map(num),
        "ln_kappa_circuit": num(it.ln_kappa_circuit),
        "ln_kappa_quoted": num(it.ln_kappa_quoted),
    })
}

fn estimate(e: &RootEstimate) -> Value {
    json!({
        "magnitude": num(e.magnitude),
        "phase": num(e.phase),
        "phase_bits": e.bits.iter().map(|b| char::from(b'0' + b)).collect::<String>(),
        "lambda": complex(e.lambda),
        "root": complex(e.root),
        "refined": e.refined.map(complex),
        "residual": num(e.residual),
        "conjugate_alternative": e.conjugate_alternative.map(complex),
        "method": method_name(e.method),
        "degenerate_bits": e.degenerate_bits(),
    })
}

fn stage(s: &Stage) -> Value {
    json!({
        "degree": s.degree,
        "pad_count": s.pad_count,
        "mode": mode_name(s.mode),
        "mu": num(s.mu),
        "m": s.m,
        "g": num(s.g),
        "estimate": estimate(&s.estimate),
        "removed": complexes(&s.removed),
        "iterations": s.estimate.iterations.iter().map(iteration).collect::<Vec<_>>(),
    })
}

pub struct RootsSummary<'a> {
    pub original: &'a qpea::poly::Polynomial,
    pub report: &'a RootsReport,
    pub oracle_roots: &'a [Complex64],
    pub pairing_error: f64,
}

/// Per-root records plus per-stage diagnostics.
pub fn roots_body(s: &RootsSummary, input: Value) -> (Map<String, Value>, bool) {
    let mut roots = Vec::new();
    let mut all_ok = s.report.complete();
    for st in &s.report.stages {
        for &z in &st.removed {
            let residual = s.original.evaluate(z).norm();
            all_ok &= residual <= s.report.tolerance;
            roots.push(json!({
                "re": num(z.re),
                "im": num(z.im),
                "magnitude": num(z.norm()),
                "phase_bits": st.estimate.bits.iter().map(|b| char::from(b'0' + b)).collect::<String>(),
                "residual": num(residual),
                "estimate": complex(st.estimate.root),
                "conjugate_alternative": st.estimate.conjugate_alternative.map(complex),
                "method": method_name(st.estimate.method),
            }));
        }
    }
    let mut body = Map::new();
    body.insert("input".into(), input);
    body.insert("roots".into(), Value::Array(roots));
    body.insert(
        "diagnostics".into(),
        json!({ "stages": s.report.stages.iter().map(stage).collect::<Vec<_>>() }),
    );
    body.insert(
        "oracle".into(),
        json!({ "oracle_roots": complexes(s.oracle_roots), "max_pairing_error": num(s.pairing_error) }),
    );
    body.insert("tolerance".into(), num(s.report.tolerance));
    body.insert("failure".into(), json!(s.report.failure.as_ref().map(|e| e.to_string())));
    body.insert("status".into(), json!(if all_ok { "ok" } else { "failed" }));
    (body, all_ok)
}

pub fn prc_body(coeffs: &[f64], pad_count: usize, sys: &qpea::poly::ScaledSystem, eff: &EffectiveOperator) -> Map<String, Value> {
    let expected = 2f64.powi(-((sys.m + 1) as i32)).sqrt();
    let value = json!({
        "coeffs": nums(coeffs),
        "pad_count": pad_count,
        "mode": mode_name(sys.mode),
        "mu": num(sys.mu),
        "m": sys.m,
        "a_eff": matrix(&eff.matrix),
        "companion": matrix(&eff.reference),
        "g": num(eff.g),
        "g_expected": num(expected),
        "max_deviation": num(eff.max_deviation),
    });
    into_map(value)
}

pub fn gates_body(l: &OpLedger) -> Map<String, Value> {
    into_map(json!({
        "m": l.m,
        "cyclic_swap": l.cyclic_swap,
        "formation": l.formation,
        "combination": l.combination,
        "branch_swap": l.branch_swap,
        "scaling": l.scaling,
        "total": l.total,
        "decomposition_ancillas": DECOMPOSITION_ANCILLAS,
    }))
}

pub fn oracle_body(coeffs: &[f64], roots: &[Complex64], max_residual: f64, iterations: usize) -> Map<String, Value> {
    into_map(json!({
        "coeffs": nums(coeffs),
        "roots": complexes(roots),
        "max_residual": num(max_residual),
        "iterations": iterations,
    }))
}

pub fn compare_body(rows: &[CompareRow]) -> Map<String, Value> {
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "b": r.b,
                "quantum": num(r.quantum),
                "classical": num(r.classical),
                "ratio": num(r.ratio),
                "quantum_cheaper": r.quantum_cheaper,
            })
        })
        .collect();
    into_map(json!({ "rows": rows }))
}

fn into_map(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("builders produce objects"),
    }
}

/// Flattened `path value` lines, keys aligned; the same values as the JSON.
pub fn render_text(v: &Value) -> String {
    let mut lines = Vec::new();
    flatten("", v, &mut lines);
    let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, val) in lines {
        out.push_str(&format!("{k:<width$}  {val}\n"));
    }
    out
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, val) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, val, out);
            }
        }
        Value::Array(items) if !items.is_empty() && items.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let joined: Vec<String> = items.iter().map(scalar).collect();
            out.push((prefix.to_string(), joined.join(" ")));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push((prefix.to_string(), "[]".into()));
            }
            for (i, val) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), val, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Aligned table for the comparison rows.
pub fn render_compare(rows: &[CompareRow]) -> String {
    let header = ["n", "b", "quantum", "classical", "ratio", "cheaper"];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        cells.push(vec![
            r.n.to_string(),
            r.b.to_string(),
            scalar(&num(r.quantum)),
            scalar(&num(r.classical)),
            scalar(&num(r.ratio)),
            if r.quantum_cheaper { "quantum" } else { "classical" }.to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..header.len()).map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in cells {
        let line: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:>w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
