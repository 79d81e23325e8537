//! Flat `key = value` experiment configuration with a typed schema.
//!
//! Every key has a default; the bundled defaults for the `depoly.*` keys are
//! the `depoly-gaussian` scenario and those for `frag.*` are
//! `frag-uniform-gamma2`. Unknown keys are rejected, and
//! [`Config::to_text`] writes every key so that a written config parses back
//! to the same value.

use std::fmt;

#[derive(Debug, Clone, Copy)]
enum Kind {
    Float,
    Int,
    /// Free text when the choice list is empty.
    Text(&'static [&'static str]),
    FloatList,
    /// A float or `auto`.
    AutoFloat,
}

struct Key {
    name: &'static str,
    kind: Kind,
    default: &'static str,
    doc: &'static str,
}

const fn key(name: &'static str, kind: Kind, default: &'static str, doc: &'static str) -> Key {
    Key { name, kind, default, doc }
}

use Kind::*;

const FAMILIES: &[&str] = &["depoly", "frag"];
const PROFILES: &[&str] = &["gaussian", "indicator", "cosine-bump"];
const DEPOLY_ROUTES: &[&str] = &["first-order", "tikhonov", "kalman"];
const KERNELS: &[&str] = &["uniform", "center-weighted", "edge-weighted"];
const SOLVERS: &[&str] = &["grid-ode", "series"];
const NORMALIZATIONS: &[&str] = &["mean", "sum"];
const KAPPA_ROUTES: &[&str] = &["short-time", "mellin", "profile"];

/// Bundled scenario names and their problem family.
pub const SCENARIOS: &[(&str, &str)] = &[("depoly-gaussian", "depoly"), ("frag-uniform-gamma2", "frag")];

#[rustfmt::skip]
const SCHEMA: &[Key] = &[
    key("scenario", Text(&[]), "frag-uniform-gamma2", "scenario label; bundled names fix the family"),
    key("family", Text(FAMILIES), "frag", "problem family used by gen-synthetic"),
    key("seed", Int, "7", "RNG seed for sampling and noise"),
    key("out", Text(&[]), "out", "output directory"),
    key("threads", Int, "0", "worker threads, 0 = one per core"),

    key("depoly.b", Float, "1", "depolymerisation speed b"),
    key("depoly.length", Float, "1", "domain length L"),
    key("depoly.eps", Float, "0.0078125", "size step ε"),
    key("depoly.i0", Int, "1", "smallest tracked size index"),
    key("depoly.profile", Text(PROFILES), "gaussian", "initial profile shape"),
    key("depoly.profile.center", Float, "0.5", "profile centre"),
    key("depoly.profile.width", Float, "0.2", "Gaussian width, bump half-width, or indicator half-length"),
    key("depoly.horizon", Float, "1", "observation horizon T"),
    key("depoly.samples", Int, "201", "moment samples on [0, T]"),
    key("depoly.moment", Int, "0", "observed moment order k"),
    key("depoly.delta", Float, "0", "Gaussian noise level on the moments"),
    key("depoly.step_fraction", Float, "0.25", "discrete-system step as a fraction of ε/b"),
    key("depoly.record_times", FloatList, "0, 0.25, 0.5", "times written by simulate-depoly"),
    key("depoly.pde.nx", Int, "512", "space cells of the second-order solver"),
    key("depoly.pde.nt", Int, "200", "time steps of the second-order solver"),
    key("depoly.route", Text(DEPOLY_ROUTES), "first-order", "inversion route"),
    key("depoly.tikhonov.radius", Float, "10", "prior radius M"),
    key("depoly.tikhonov.delta", Float, "0.001", "trace noise level used by Tikhonov/Kalman"),

    key("frag.alpha", Float, "1", "rate prefactor α"),
    key("frag.gamma", Float, "2", "rate exponent γ"),
    key("frag.kernel", Text(KERNELS), "uniform", "fragmentation kernel preset"),
    key("frag.kernel.shape", Float, "3", "beta shape of the weighted presets"),
    key("frag.kernel.cells", Int, "64", "cells of the weighted presets"),
    key("frag.initial.center", Float, "0.9", "centre of the initial Gaussian bump"),
    key("frag.initial.width", Float, "0.03", "width of the initial Gaussian bump"),
    key("frag.grid.cells", Int, "400", "log-grid cells of the forward solvers"),
    key("frag.grid.lower", Float, "0.00001", "lower end of the log grid, relative to the top"),
    key("frag.times", FloatList, "0, 0.5, 1, 2, 3, 5, 10, 20, 50, 100", "observation times"),
    key("frag.samples", Int, "10000", "particles drawn per time point"),
    key("frag.solver", Text(SOLVERS), "grid-ode", "forward solver"),
    key("frag.moments", Text(NORMALIZATIONS), "mean", "moment normalisation of the γ fit"),
    key("frag.kappa_route", Text(KAPPA_ROUTES), "short-time", "kernel estimator"),
    key("frag.lag_index", Int, "1", "time index paired with the first one by the short-time and Mellin routes"),
    key("frag.kde.bandwidth", AutoFloat, "auto", "KDE bandwidth, auto = Silverman"),
    key("frag.kde.cells", Int, "400", "KDE cells"),
    key("frag.mellin.sigma", Float, "1.5", "real part of the Mellin line"),
    key("frag.mellin.tau_max", Float, "20", "frequency cut-off of the Mellin line"),
    key("frag.mellin.half_points", Int, "512", "positive nodes of the Mellin line"),
    key("frag.mellin.floor", Float, "1e-8", "smallest admissible Mellin denominator"),
    key("frag.validate.cells", Int, "256", "grid cells of the validation replay"),
];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Float(f64),
    Int(u64),
    Text(String),
    List(Vec<f64>),
    Auto(Option<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse_float(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_value(k: &Key, raw: &str) -> Result<Value, ConfigError> {
    let raw = raw.trim();
    let bad = |what: &str| ConfigError(format!("`{}`: expected {what}, got `{raw}`", k.name));
    Ok(match k.kind {
        Float => Value::Float(parse_float(raw).ok_or_else(|| bad("a finite number"))?),
        Int => Value::Int(raw.parse().map_err(|_| bad("a nonnegative integer"))?),
        Text(choices) => {
            if raw.is_empty() || (!choices.is_empty() && !choices.contains(&raw)) {
                return Err(if choices.is_empty() { bad("a non-empty value") } else { bad(&choices.join(" | ")) });
            }
            Value::Text(raw.to_string())
        }
        FloatList => Value::List(
            raw.split(',')
                .map(|s| parse_float(s.trim()))
                .collect::<Option<_>>()
                .ok_or_else(|| bad("comma-separated numbers"))?,
        ),
        AutoFloat => Value::Auto(if raw == "auto" {
            None
        } else {
            Some(parse_float(raw).ok_or_else(|| bad("a number or `auto`"))?)
        }),
    })
}

fn format_value(v: &Value) -> String {
    match v {
        Value::Float(x) => format!("{x}"),
        Value::Int(n) => n.to_string(),
        Value::Text(s) => s.clone(),
        Value::List(xs) => xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", "),
        Value::Auto(None) => "auto".into(),
        Value::Auto(Some(x)) => format!("{x}"),
    }
}

/// One value per schema key, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: Vec<Value>,
}

impl Default for Config {
    fn default() -> Self {
        Self { values: SCHEMA.iter().map(|k| parse_value(k, k.default).expect("valid default")).collect() }
    }
}

impl Config {
    /// Applies `key = value` lines on top of the current values; `#` starts
    /// a comment. Cross-key checks are left to [`Config::validate`].
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = std::collections::HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(ConfigError(format!("line {}: `{k}` set twice", n + 1)));
            }
            self.set(k, v).map_err(|e| ConfigError(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, name: &str, raw: &str) -> Result<(), ConfigError> {
        let i = index(name).ok_or_else(|| ConfigError(format!("unknown key `{name}`")))?;
        self.values[i] = parse_value(&SCHEMA[i], raw)?;
        Ok(())
    }

    /// Cross-key checks.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let scenario = self.text("scenario");
        if let Some((_, family)) = SCENARIOS.iter().find(|(s, _)| *s == scenario) {
            if self.text("family") != *family {
                return Err(ConfigError(format!("`family`: scenario `{scenario}` belongs to family `{family}`")));
            }
        }
        let positive = [
            "depoly.b",
            "depoly.length",
            "depoly.eps",
            "depoly.horizon",
            "depoly.step_fraction",
            "depoly.tikhonov.radius",
            "depoly.tikhonov.delta",
            "frag.alpha",
            "frag.initial.width",
            "frag.grid.lower",
            "frag.mellin.tau_max",
            "frag.mellin.floor",
        ];
        for k in positive {
            if !(self.float(k) > 0.0) {
                return Err(ConfigError(format!("`{k}`: must be positive")));
            }
        }
        if self.float("frag.gamma") < 0.0 || self.float("depoly.delta") < 0.0 {
            return Err(ConfigError("`frag.gamma` and `depoly.delta` must be nonnegative".into()));
        }
        if self.int("depoly.moment") > 2 {
            return Err(ConfigError("`depoly.moment`: must be 0, 1 or 2".into()));
        }
        for k in ["depoly.i0", "depoly.samples", "frag.samples", "frag.grid.cells", "frag.kde.cells"] {
            if self.int(k) == 0 {
                return Err(ConfigError(format!("`{k}`: must be at least 1")));
            }
        }
        for k in ["depoly.record_times", "frag.times"] {
            let t = self.list(k);
            if t.is_empty() || t[0] < 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ConfigError(format!("`{k}`: need nonnegative, strictly increasing times")));
            }
        }
        if self.float("frag.grid.lower") >= 1.0 {
            return Err(ConfigError("`frag.grid.lower`: must be below 1".into()));
        }
        Ok(())
    }

    /// Every key, one per line, in schema order, with its description.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (k, v) in SCHEMA.iter().zip(&self.values) {
            let s = k.name.split('.').next().unwrap_or("");
            let s = if k.name.contains('.') { s } else { "" };
            if s != section {
                out.push('\n');
                section = s;
            }
            out.push_str(&format!("# {}\n{} = {}\n", k.doc, k.name, format_value(v)));
        }
        out
    }

    fn get(&self, name: &str) -> &Value {
        &self.values[index(name).unwrap_or_else(|| panic!("no config key `{name}`"))]
    }

    pub fn float(&self, name: &str) -> f64 {
        match self.get(name) {
            Value::Float(x) => *x,
            v => panic!("`{name}` is not a float: {v:?}"),
        }
    }

    pub fn int(&self, name: &str) -> u64 {
        match self.get(name) {
            Value::Int(n) => *n,
            v => panic!("`{name}` is not an integer: {v:?}"),
        }
    }

    pub fn usize(&self, name: &str) -> usize {
        self.int(name) as usize
    }

    pub fn text(&self, name: &str) -> &str {
        match self.get(name) {
            Value::Text(s) => s,
            v => panic!("`{name}` is not text: {v:?}"),
        }
    }

    pub fn list(&self, name: &str) -> &[f64] {
        match self.get(name) {
            Value::List(xs) => xs,
            v => panic!("`{name}` is not a list: {v:?}"),
        }
    }

    pub fn auto_float(&self, name: &str) -> Option<f64> {
        match self.get(name) {
            Value::Auto(x) => *x,
            v => panic!("`{name}` is not an auto float: {v:?}"),
        }
    }
}

fn index(name: &str) -> Option<usize> {
    SCHEMA.iter().position(|k| k.name == name)
}

/// Defaults with the bundled scenario's label and family.
pub fn scenario_defaults(name: &str) -> Result<Config, ConfigError> {
    let (s, family) =
        SCENARIOS.iter().find(|(s, _)| *s == name).ok_or_else(|| ConfigError(format!("unknown scenario `{name}`")))?;
    let mut cfg = Config::default();
    cfg.set("scenario", s)?;
    cfg.set("family", family)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    impl Config {
        fn parse(text: &str) -> Result<Self, ConfigError> {
            let mut cfg = Self::default();
            cfg.apply(text)?;
            cfg.validate()?;
            Ok(cfg)
        }
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = Config::default();
        let text = cfg.to_text();
        let back = Config::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn edited_values_round_trip() {
        let err = Config::parse("frag.times = 0, 0.1, 1e-1\n").unwrap_err();
        assert!(err.0.contains("frag.times"));
        let cfg = Config::parse("frag.alpha = 0.30000000000000004\nfrag.kde.bandwidth = 0.05\nout = a b\n").unwrap();
        assert_eq!(Config::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(cfg.float("frag.alpha"), 0.30000000000000004);
        assert_eq!(cfg.auto_float("frag.kde.bandwidth"), Some(0.05));
    }

    #[test]
    fn errors_name_the_key() {
        let e = Config::parse("# header\nfrag.alpah = 1\n").unwrap_err();
        assert!(e.0.contains("line 2") && e.0.contains("frag.alpah"), "{e}");
        let e = Config::parse("frag.kernel = triangle").unwrap_err();
        assert!(e.0.contains("frag.kernel") && e.0.contains("uniform"), "{e}");
        let e = Config::parse("seed = 1\nseed = 2").unwrap_err();
        assert!(e.0.contains("twice"));
        let e = Config::parse("scenario = depoly-gaussian").unwrap_err();
        assert!(e.0.contains("family"));
    }

    #[test]
    fn scenarios_are_valid() {
        for (name, family) in SCENARIOS {
            let cfg = scenario_defaults(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.text("family"), *family);
        }
    }
}
