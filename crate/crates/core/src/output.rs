//! Output formatting: trajectory CSV and report JSON.
//!
//! Every floating-point field is written with 17 significant digits
//! (`{:.16e}`), which round-trips f64 exactly, and JSON objects are
//! rendered with sorted keys, so equal data produces byte-identical
//! artifacts.

use crate::certify::{Certificate, GlobalBoundsReport, ProbeVerdict, Provenance, Theorem2Case};
use crate::classify::{Classification, ClassifierConfig, Evidence, Verdict};
use crate::dynamics::Trajectory;
use crate::energy::{self, AuditReport};
use crate::error::EvalError;
use crate::payoff::Payoff;
use serde_json::{json, Map, Value};

/// 17 significant digits; parses back to the identical f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trajectory CSV with header `t,x1..xm,y1..yn,S,T,L,Ldot`; the energy
/// columns use the given `r`.
pub fn trajectory_csv(p: &Payoff, traj: &Trajectory, r: f64) -> Result<String, EvalError> {
    let m = p.m();
    let n = p.n();
    let mut header = String::from("t");
    for i in 1..=m {
        header.push_str(&format!(",x{i}"));
    }
    for j in 1..=n {
        header.push_str(&format!(",y{j}"));
    }
    header.push_str(",S,T,L,Ldot");

    let mut out = header;
    out.push('\n');
    for pt in &traj.points {
        let reading = energy::lyapunov(p, &pt.state, r)?;
        let mut row = fmt_f64(pt.t);
        for v in pt.state.x.iter().chain(pt.state.y.iter()) {
            row.push(',');
            row.push_str(&fmt_f64(*v));
        }
        for v in [pt.payoff, pt.kinetic, reading.total, reading.rate] {
            row.push(',');
            row.push_str(&fmt_f64(v));
        }
        out.push_str(&row);
        out.push('\n');
    }
    Ok(out)
}

/// Renders a JSON value with sorted keys, two-space indentation, and
/// 17-significant-digit floats.
pub fn to_json_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(value: &Value, indent: usize, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                out.push_str(&fmt_f64(n.as_f64().expect("numeric json value")));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serialization")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(indent + 1, out);
                write_value(item, indent + 1, out);
            }
            out.push('\n');
            push_indent(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            // serde_json's default map is ordered; sort for determinism
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(indent + 1, out);
                out.push_str(&serde_json::to_string(key).expect("key serialization"));
                out.push_str(": ");
                write_value(&map[*key], indent + 1, out);
            }
            out.push('\n');
            push_indent(indent, out);
            out.push('}');
        }
    }
}

fn push_indent(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Certificate as schema JSON: `{lambda_inf, lambda_sup, provenance,
/// theorem1, corollary1, theorem2_case, r, gamma, radial_probe, caveats}`.
pub fn certificate_json(cert: &Certificate) -> Value {
    let provenance = match &cert.eigs.provenance {
        Provenance::Analytic => Value::String("analytic".into()),
        Provenance::Sampled { box_, samples } => json!({
            "sampled": {
                "lower": box_.lower,
                "upper": box_.upper,
                "samples": samples,
            }
        }),
    };
    let radial_probe = match &cert.radial_probe {
        None => Value::Null,
        Some(probe) => json!({
            "target": probe.target,
            "verdict": match probe.verdict {
                ProbeVerdict::Consistent => "consistent",
                ProbeVerdict::NotEstablished => "not_established",
            },
            "rays": probe.rays,
        }),
    };
    json!({
        "lambda_inf": cert.eigs.lambda_inf,
        "lambda_sup": cert.eigs.lambda_sup,
        "provenance": provenance,
        "theorem1": cert.theorem1,
        "corollary1": cert.corollary1,
        "theorem2_case": match cert.theorem2_case {
            Theorem2Case::Case1 => "case1",
            Theorem2Case::Case2 => "case2",
            Theorem2Case::None => "none",
        },
        "r": cert.r,
        "gamma": cert.gamma,
        "radial_probe": radial_probe,
        "caveats": cert.caveats,
    })
}

/// Certificate plus the sampled inequality report, as emitted by the
/// `certify` command.
pub fn certificate_with_lemmas_json(cert: &Certificate, lemmas: &GlobalBoundsReport) -> Value {
    let mut value = certificate_json(cert);
    let map = value
        .as_object_mut()
        .expect("certificate json is an object");
    map.insert(
        "lemmas".into(),
        serde_json::to_value(lemmas).expect("lemma report serialization"),
    );
    value
}

/// Audit report as schema JSON.
pub fn audit_json(audit: &AuditReport) -> Value {
    serde_json::to_value(audit).expect("audit serialization")
}

/// Classification as schema JSON: `{verdict, point?, period?, evidence,
/// config_echo}`.
pub fn classification_json(c: &Classification, cfg: &ClassifierConfig) -> Value {
    let mut map = Map::new();
    map.insert("verdict".into(), Value::String(c.verdict.name().into()));
    match &c.verdict {
        Verdict::Converged { point } => {
            map.insert("point".into(), json!(point));
        }
        Verdict::BoundedNonConvergent { period } => {
            map.insert("period".into(), json!(period));
        }
        _ => {}
    }
    let evidence = match &c.evidence {
        Evidence::FinalGradientNorm(g) => json!({ "final_gradient_norm": g }),
        Evidence::Recurrence { t1, t2, distance } => json!({
            "recurrence": { "t1": t1, "t2": t2, "distance": distance }
        }),
        Evidence::Blowup { radius, t } => json!({
            "blowup": { "radius": radius, "t": t,
                        "note": "divergence judged by the blowup_radius threshold" }
        }),
        Evidence::NonFinite { t, detail } => json!({
            "non_finite": { "t": t, "detail": detail }
        }),
        Evidence::Horizon { note } => json!({ "horizon": note }),
    };
    map.insert("evidence".into(), evidence);
    map.insert(
        "config_echo".into(),
        serde_json::to_value(cfg).expect("classifier config serialization"),
    );
    Value::Object(map)
}
