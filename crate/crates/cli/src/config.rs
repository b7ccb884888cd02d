//! Run configuration: a single JSON file, validated field by field so
//! errors carry the offending path.

use gda_core::certify::BoxDomain;
use gda_core::classify::ClassifierConfig;
use gda_core::dynamics::{IntegratorConfig, Method, State};
use gda_core::payoff::{ExpressionPayoff, LienardPayoff, Payoff, QuadraticPayoff};
use serde_json::{Map, Value};
use std::fmt;
use std::path::PathBuf;

/// A validation failure, carrying the JSON path of the offending field.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// Payoff parameters as configured; kept separate from the built payoff
/// so sweeps can override named parameters per cell.
#[derive(Debug, Clone)]
pub enum PayoffParams {
    Quadratic { a: f64, b: f64, c: f64 },
    Lienard { mu: f64, alpha: f64 },
    Expression { source: String, m: usize, n: usize },
}

impl PayoffParams {
    pub fn build(&self) -> Result<Payoff> {
        match self {
            PayoffParams::Quadratic { a, b, c } => {
                Ok(Payoff::Quadratic(QuadraticPayoff::scalar(*a, *b, *c)))
            }
            PayoffParams::Lienard { mu, alpha } => LienardPayoff::new(*mu, *alpha)
                .map(Payoff::Lienard)
                .map_err(|e| ConfigError::new("payoff", e.to_string())),
            PayoffParams::Expression { source, m, n } => ExpressionPayoff::parse(source, *m, *n)
                .map(Payoff::Expression)
                .map_err(|e| ConfigError::new("payoff.expression", e.to_string())),
        }
    }

    /// Names a sweep may override.
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            PayoffParams::Quadratic { .. } => &["a", "b", "c"],
            PayoffParams::Lienard { .. } => &["mu", "alpha"],
            PayoffParams::Expression { .. } => &[],
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> std::result::Result<(), String> {
        match (self, name) {
            (PayoffParams::Quadratic { a, .. }, "a") => *a = value,
            (PayoffParams::Quadratic { b, .. }, "b") => *b = value,
            (PayoffParams::Quadratic { c, .. }, "c") => *c = value,
            (PayoffParams::Lienard { mu, .. }, "mu") => *mu = value,
            (PayoffParams::Lienard { alpha, .. }, "alpha") => *alpha = value,
            (_, other) => return Err(format!("unknown payoff parameter '{other}'")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepParameter {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameters: Vec<SweepParameter>,
    pub starts_per_cell: usize,
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub payoff_params: PayoffParams,
    pub payoff: Payoff,
    pub initial: Vec<State>,
    pub integrator: IntegratorConfig,
    pub classifier: ClassifierConfig,
    pub certify_box: BoxDomain,
    pub certify_samples: usize,
    pub sweep: Option<SweepSpec>,
    pub r_override: Option<f64>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

struct Section<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Section<'a> {
    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError::new(
                    join(&self.path, key),
                    format!("unknown field (expected one of: {})", allowed.join(", ")),
                ));
            }
        }
        Ok(())
    }

    fn required(&self, key: &str) -> Result<&'a Value> {
        self.map
            .get(key)
            .ok_or_else(|| ConfigError::new(join(&self.path, key), "missing required field"))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        as_f64(self.required(key)?, &join(&self.path, key))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(default),
            Some(v) => as_f64(v, &join(&self.path, key)),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(default),
            Some(v) => as_usize(v, &join(&self.path, key)),
        }
    }

    fn str_at(&self, key: &str) -> Result<&'a str> {
        let path = join(&self.path, key);
        self.required(key)?
            .as_str()
            .ok_or_else(|| ConfigError::new(path, "expected a string"))
    }
}

fn join(base: &str, key: &str) -> String {
    if base.is_empty() {
        key.to_string()
    } else {
        format!("{base}.{key}")
    }
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| ConfigError::new(path, "expected a number"))?;
    if !x.is_finite() {
        return Err(ConfigError::new(path, "must be finite"));
    }
    Ok(x)
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| ConfigError::new(path, "expected a nonnegative integer"))
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<Section<'a>> {
    match v {
        Value::Object(map) => Ok(Section {
            map,
            path: path.to_string(),
        }),
        _ => Err(ConfigError::new(path, "expected an object")),
    }
}

fn as_f64_array(v: &Value, path: &str) -> Result<Vec<f64>> {
    let items = v
        .as_array()
        .ok_or_else(|| ConfigError::new(path, "expected an array of numbers"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| as_f64(item, &format!("{path}[{i}]")))
        .collect()
}

/// Parses and validates a config document. `seed_override` (from the
/// GDA_SEED environment variable) wins over the config seed.
pub fn parse_config(text: &str, seed_override: Option<u64>) -> Result<RunConfig> {
    let root_value: Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::new("", format!("invalid JSON: {e}")))?;
    let root = as_object(&root_value, "")?;
    root.check_keys(&[
        "version",
        "payoff",
        "initial",
        "integrator",
        "classifier",
        "certify",
        "sweep",
        "r_override",
        "seed",
        "output_dir",
    ])?;

    let version = root.usize_or("version", 1)?;
    if version != 1 {
        return Err(ConfigError::new("version", "unsupported schema version"));
    }

    let payoff_params = parse_payoff(root.required("payoff")?)?;
    let payoff = payoff_params.build()?;
    let (m, n) = (payoff.m(), payoff.n());

    let initial = match root.map.get("initial") {
        None | Some(Value::Null) => Vec::new(),
        Some(v) => parse_initial(v, m, n)?,
    };

    let integrator = match root.map.get("integrator") {
        None | Some(Value::Null) => IntegratorConfig::default(),
        Some(v) => parse_integrator(v)?,
    };
    let classifier = match root.map.get("classifier") {
        None | Some(Value::Null) => ClassifierConfig::default(),
        Some(v) => parse_classifier(v)?,
    };
    let (certify_box, certify_samples) = match root.map.get("certify") {
        None | Some(Value::Null) => (BoxDomain::symmetric(m + n, 5.0), 1000),
        Some(v) => parse_certify(v, m + n)?,
    };
    let sweep = match root.map.get("sweep") {
        None | Some(Value::Null) => None,
        Some(v) => Some(parse_sweep(v, &payoff_params)?),
    };

    let r_override = match root.map.get("r_override") {
        None | Some(Value::Null) => None,
        Some(v) => Some(as_f64(v, "r_override")?),
    };
    let seed = match root.map.get("seed") {
        None | Some(Value::Null) => 0,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| ConfigError::new("seed", "expected a nonnegative integer"))?,
    };
    let output_dir = match root.map.get("output_dir") {
        None | Some(Value::Null) => None,
        Some(v) => {
            Some(PathBuf::from(v.as_str().ok_or_else(|| {
                ConfigError::new("output_dir", "expected a string")
            })?))
        }
    };

    Ok(RunConfig {
        payoff_params,
        payoff,
        initial,
        integrator,
        classifier,
        certify_box,
        certify_samples,
        sweep,
        r_override,
        seed: seed_override.unwrap_or(seed),
        output_dir,
    })
}

fn parse_payoff(v: &Value) -> Result<PayoffParams> {
    let section = as_object(v, "payoff")?;
    if section.map.contains_key("builtin") {
        let kind = section.str_at("builtin")?;
        match kind {
            "quadratic" => {
                section.check_keys(&["builtin", "a", "b", "c"])?;
                Ok(PayoffParams::Quadratic {
                    a: section.f64("a")?,
                    b: section.f64("b")?,
                    c: section.f64("c")?,
                })
            }
            "lienard" => {
                section.check_keys(&["builtin", "mu", "alpha"])?;
                Ok(PayoffParams::Lienard {
                    mu: section.f64("mu")?,
                    alpha: section.f64("alpha")?,
                })
            }
            other => Err(ConfigError::new(
                "payoff.builtin",
                format!("unknown builtin '{other}' (expected quadratic or lienard)"),
            )),
        }
    } else if section.map.contains_key("expression") {
        section.check_keys(&["expression", "m", "n"])?;
        let source = section.str_at("expression")?.to_string();
        let m = as_usize(section.required("m")?, "payoff.m")?;
        let n = as_usize(section.required("n")?, "payoff.n")?;
        if m == 0 || n == 0 {
            return Err(ConfigError::new("payoff", "m and n must both be >= 1"));
        }
        Ok(PayoffParams::Expression { source, m, n })
    } else {
        Err(ConfigError::new(
            "payoff",
            "expected exactly one payoff specification: {\"builtin\": ...} or {\"expression\": ...}",
        ))
    }
}

fn parse_initial(v: &Value, m: usize, n: usize) -> Result<Vec<State>> {
    let items = v
        .as_array()
        .ok_or_else(|| ConfigError::new("initial", "expected an array of start states"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let path = format!("initial[{i}]");
            let section = as_object(item, &path)?;
            section.check_keys(&["x", "y"])?;
            let x = as_f64_array(section.required("x")?, &join(&path, "x"))?;
            let y = as_f64_array(section.required("y")?, &join(&path, "y"))?;
            if x.len() != m {
                return Err(ConfigError::new(
                    join(&path, "x"),
                    format!("expected {m} components, got {}", x.len()),
                ));
            }
            if y.len() != n {
                return Err(ConfigError::new(
                    join(&path, "y"),
                    format!("expected {n} components, got {}", y.len()),
                ));
            }
            Ok(State::new(x, y))
        })
        .collect()
}

fn parse_integrator(v: &Value) -> Result<IntegratorConfig> {
    let section = as_object(v, "integrator")?;
    section.check_keys(&[
        "method",
        "step",
        "rel_tol",
        "abs_tol",
        "t_max",
        "record_every",
        "blowup_radius",
    ])?;
    let defaults = IntegratorConfig::default();
    let method = match section.map.get("method") {
        None | Some(Value::Null) => defaults.method,
        Some(Value::String(s)) if s == "fixed_rk4" => Method::FixedRk4,
        Some(Value::String(s)) if s == "adaptive_embedded" => Method::AdaptiveEmbedded,
        Some(_) => {
            return Err(ConfigError::new(
                "integrator.method",
                "expected \"fixed_rk4\" or \"adaptive_embedded\"",
            ))
        }
    };
    let record_every = match section.map.get("record_every") {
        None | Some(Value::Null) => None,
        Some(v) => Some(as_usize(v, "integrator.record_every")?),
    };
    let cfg = IntegratorConfig {
        method,
        step: section.f64_or("step", defaults.step)?,
        rel_tol: section.f64_or("rel_tol", defaults.rel_tol)?,
        abs_tol: section.f64_or("abs_tol", defaults.abs_tol)?,
        t_max: section.f64_or("t_max", defaults.t_max)?,
        record_every,
        blowup_radius: section.f64_or("blowup_radius", defaults.blowup_radius)?,
    };
    cfg.validate()
        .map_err(|e| ConfigError::new("integrator", e))?;
    Ok(cfg)
}

fn parse_classifier(v: &Value) -> Result<ClassifierConfig> {
    let section = as_object(v, "classifier")?;
    section.check_keys(&["eps_ss", "window", "eps_ret", "v_min", "transient_frac"])?;
    let defaults = ClassifierConfig::default();
    let cfg = ClassifierConfig {
        eps_ss: section.f64_or("eps_ss", defaults.eps_ss)?,
        window: section.usize_or("window", defaults.window)?,
        eps_ret: section.f64_or("eps_ret", defaults.eps_ret)?,
        v_min: section.f64_or("v_min", defaults.v_min)?,
        transient_frac: section.f64_or("transient_frac", defaults.transient_frac)?,
    };
    cfg.validate()
        .map_err(|e| ConfigError::new("classifier", e))?;
    Ok(cfg)
}

fn parse_certify(v: &Value, dim: usize) -> Result<(BoxDomain, usize)> {
    let section = as_object(v, "certify")?;
    section.check_keys(&["box", "samples"])?;
    let box_ = match section.map.get("box") {
        None | Some(Value::Null) => BoxDomain::symmetric(dim, 5.0),
        Some(b) => {
            let bs = as_object(b, "certify.box")?;
            bs.check_keys(&["lower", "upper"])?;
            let lower = as_f64_array(bs.required("lower")?, "certify.box.lower")?;
            let upper = as_f64_array(bs.required("upper")?, "certify.box.upper")?;
            if lower.len() != dim {
                return Err(ConfigError::new(
                    "certify.box.lower",
                    format!("expected m+n = {dim} components"),
                ));
            }
            BoxDomain::new(lower, upper).map_err(|e| ConfigError::new("certify.box", e))?
        }
    };
    let samples = section.usize_or("samples", 1000)?;
    if samples == 0 {
        return Err(ConfigError::new("certify.samples", "must be >= 1"));
    }
    Ok((box_, samples))
}

fn parse_sweep(v: &Value, payoff: &PayoffParams) -> Result<SweepSpec> {
    let section = as_object(v, "sweep")?;
    section.check_keys(&["parameters", "starts_per_cell"])?;
    let params_value = section.required("parameters")?;
    let items = params_value
        .as_array()
        .ok_or_else(|| ConfigError::new("sweep.parameters", "expected an array"))?;
    if items.is_empty() {
        return Err(ConfigError::new(
            "sweep.parameters",
            "at least one swept parameter is required",
        ));
    }
    let allowed = payoff.parameter_names();
    let mut parameters = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let path = format!("sweep.parameters[{i}]");
        let ps = as_object(item, &path)?;
        ps.check_keys(&["name", "values"])?;
        let name = ps.str_at("name")?.to_string();
        if !allowed.contains(&name.as_str()) {
            return Err(ConfigError::new(
                join(&path, "name"),
                format!(
                    "'{name}' is not a parameter of this payoff (available: {})",
                    if allowed.is_empty() {
                        "none".to_string()
                    } else {
                        allowed.join(", ")
                    }
                ),
            ));
        }
        if parameters.iter().any(|p: &SweepParameter| p.name == name) {
            return Err(ConfigError::new(join(&path, "name"), "duplicate parameter"));
        }
        let values = as_f64_array(ps.required("values")?, &join(&path, "values"))?;
        if values.is_empty() {
            return Err(ConfigError::new(
                join(&path, "values"),
                "value list must be non-empty",
            ));
        }
        parameters.push(SweepParameter { name, values });
    }
    let starts_per_cell = section.usize_or("starts_per_cell", 1)?;
    if starts_per_cell == 0 {
        return Err(ConfigError::new("sweep.starts_per_cell", "must be >= 1"));
    }
    Ok(SweepSpec {
        parameters,
        starts_per_cell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(payoff: &str) -> String {
        format!(r#"{{"payoff": {payoff}, "initial": [{{"x": [1.0], "y": [1.0]}}]}}"#)
    }

    #[test]
    fn parses_minimal_quadratic() {
        let cfg = parse_config(
            &minimal(r#"{"builtin": "quadratic", "a": 1, "b": 0, "c": -1}"#),
            None,
        )
        .unwrap();
        assert_eq!(cfg.payoff.m(), 1);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.certify_samples, 1000);
        assert!(cfg.integrator.validate().is_ok());
    }

    #[test]
    fn seed_override_wins() {
        let text = r#"{"payoff": {"builtin": "lienard", "mu": 1, "alpha": 0}, "seed": 7}"#;
        assert_eq!(parse_config(text, None).unwrap().seed, 7);
        assert_eq!(parse_config(text, Some(99)).unwrap().seed, 99);
    }

    #[test]
    fn reports_field_paths() {
        let err = parse_config(
            &minimal(r#"{"builtin": "quadratic", "a": 1, "b": 0}"#),
            None,
        )
        .unwrap_err();
        assert_eq!(err.path, "payoff.c");

        let err = parse_config(
            r#"{"payoff": {"builtin": "quadratic", "a": 1, "b": 0, "c": 1},
                "integrator": {"step": -0.5}}"#,
            None,
        )
        .unwrap_err();
        assert_eq!(err.path, "integrator");

        let err = parse_config(
            r#"{"payoff": {"builtin": "quadratic", "a": 1, "b": 0, "c": 1},
                "initial": [{"x": [1, 2], "y": [1]}]}"#,
            None,
        )
        .unwrap_err();
        assert_eq!(err.path, "initial[0].x");
    }

    #[test]
    fn rejects_unknown_fields() {
        let err = parse_config(
            r#"{"payoff": {"builtin": "quadratic", "a": 1, "b": 0, "c": 1}, "bogus": 1}"#,
            None,
        )
        .unwrap_err();
        assert_eq!(err.path, "bogus");
    }

    #[test]
    fn rejects_empty_sweep_values() {
        let err = parse_config(
            r#"{"payoff": {"builtin": "quadratic", "a": 1, "b": 0, "c": 1},
                "sweep": {"parameters": [{"name": "a", "values": []}]}}"#,
            None,
        )
        .unwrap_err();
        assert_eq!(err.path, "sweep.parameters[0].values");
    }

    #[test]
    fn rejects_sweeping_expression_payoffs() {
        let err = parse_config(
            r#"{"payoff": {"expression": "x1*y1", "m": 1, "n": 1},
                "sweep": {"parameters": [{"name": "a", "values": [1.0]}]}}"#,
            None,
        )
        .unwrap_err();
        assert_eq!(err.path, "sweep.parameters[0].name");
    }

    #[test]
    fn rejects_bad_expression_with_position() {
        let err =
            parse_config(&minimal(r#"{"expression": "x1*z9", "m": 1, "n": 1}"#), None).unwrap_err();
        assert_eq!(err.path, "payoff.expression");
        assert!(err.message.contains("z9"), "{}", err.message);
    }
}
