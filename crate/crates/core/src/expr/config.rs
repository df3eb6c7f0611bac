//! Problem configuration: the sixteen coefficient expressions, the time
//! window, initial data, criterion parameters and numeric overrides.
//!
//! File format: UTF-8, line-oriented `key = value`, `#` comments, section
//! headers `[problem]`, `[numeric]`, `[criterion]`. Missing coefficient
//! keys default to `0`.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use super::{parse_expr, Expr, ParseError};

/// The full problem description: quaternion coefficient functions
/// `a, b, c, d` (four scalar expressions each), the window `[t0, horizon]`,
/// the initial data `gamma`, optional criterion parameters and numeric
/// overrides.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub a: [Expr; 4],
    pub b: [Expr; 4],
    pub c: [Expr; 4],
    pub d: [Expr; 4],
    pub t0: f64,
    pub horizon: f64,
    pub gamma: [f64; 4],
    pub criterion: CriterionParams,
    pub numeric: NumericOverrides,
}

/// Optional criterion parameters read from the `[criterion]` section.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CriterionParams {
    pub epsilon: Option<f64>,
    /// The parameter `Gamma > 0` bounding the vector-part initial norm.
    pub gamma_cap: Option<f64>,
    pub s_set: Option<Vec<usize>>,
    pub partition: Option<Vec<f64>>,
    pub alpha: Option<Expr>,
    pub beta: Option<Expr>,
    pub alpha1: Option<Expr>,
    pub alpha2: Option<Expr>,
    pub beta1: Option<Expr>,
    pub beta2: Option<Expr>,
}

/// Numeric overrides read from the `[numeric]` section; unset fields fall
/// back to the integrator defaults.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct NumericOverrides {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub max_step: Option<f64>,
    pub blowup_norm: Option<f64>,
}

/// Configuration loading failure.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config syntax error on line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("expression syntax error in key `{key}` (line {line}): {source}")]
    ExprSyntax {
        key: String,
        line: usize,
        source: ParseError,
    },
    #[error("validation error: {field}: {msg}")]
    Validation { field: &'static str, msg: String },
}

impl ProblemSpec {
    /// A problem with constant coefficients, mostly used by tests and the
    /// rejection samplers.
    pub fn constant(
        a: [f64; 4],
        b: [f64; 4],
        c: [f64; 4],
        d: [f64; 4],
        t0: f64,
        horizon: f64,
        gamma: [f64; 4],
    ) -> ProblemSpec {
        let lift = |v: [f64; 4]| v.map(Expr::Num);
        ProblemSpec {
            a: lift(a),
            b: lift(b),
            c: lift(c),
            d: lift(d),
            t0,
            horizon,
            gamma,
            criterion: CriterionParams::default(),
            numeric: NumericOverrides::default(),
        }
    }

    pub fn zero_on(t0: f64, horizon: f64) -> ProblemSpec {
        ProblemSpec::constant(
            [0.0; 4], [0.0; 4], [0.0; 4], [0.0; 4], t0, horizon, [0.0; 4],
        )
    }

    /// Enforces the structural invariants (window ordering, positive
    /// parameters, partition monotone and inside the window).
    pub fn validate(&self) -> Result<(), ConfigError> {
        let val = |field, msg: String| Err(ConfigError::Validation { field, msg });
        if !(self.horizon > self.t0) {
            return val(
                "horizon",
                format!("horizon ({}) must exceed t0 ({})", self.horizon, self.t0),
            );
        }
        if let Some(eps) = self.criterion.epsilon {
            if !(eps > 0.0) {
                return val("epsilon", "epsilon > 0 required".into());
            }
        }
        if let Some(g) = self.criterion.gamma_cap {
            if !(g > 0.0) {
                return val("Gamma", "Gamma > 0 required".into());
            }
        }
        if let Some(s) = &self.criterion.s_set {
            if s.is_empty() {
                return val("S_set", "S_set must be nonempty".into());
            }
            let mut seen = [false; 4];
            for &n in s {
                if n > 3 {
                    return val("S_set", format!("index {n} outside 0..3"));
                }
                if seen[n] {
                    return val("S_set", format!("duplicate index {n}"));
                }
                seen[n] = true;
            }
        }
        if let Some(p) = &self.criterion.partition {
            for w in p.windows(2) {
                if !(w[1] > w[0]) {
                    return val("partition", "partition must be strictly increasing".into());
                }
            }
            if let (Some(first), Some(last)) = (p.first(), p.last()) {
                if *first < self.t0 || *last > self.horizon {
                    return val(
                        "partition",
                        "partition must be contained in [t0, horizon]".into(),
                    );
                }
            }
        }
        for (field, v) in [
            ("rtol", self.numeric.rtol),
            ("atol", self.numeric.atol),
            ("max_step", self.numeric.max_step),
            ("blowup_norm", self.numeric.blowup_norm),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return val(field, format!("{field} must be positive, got {v}"));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ProblemSpec {
    /// Emits the configuration in the file format; parsing the output
    /// reproduces the ProblemSpec.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[problem]")?;
        for (name, arr) in [
            ("a", &self.a),
            ("b", &self.b),
            ("c", &self.c),
            ("d", &self.d),
        ] {
            for (n, e) in arr.iter().enumerate() {
                if !e.is_zero() {
                    writeln!(f, "{name}{n} = {e}")?;
                }
            }
        }
        writeln!(f, "t0 = {}", self.t0)?;
        writeln!(f, "horizon = {}", self.horizon)?;
        for (n, g) in self.gamma.iter().enumerate() {
            if *g != 0.0 {
                writeln!(f, "gamma{n} = {g}")?;
            }
        }
        let c = &self.criterion;
        if c != &CriterionParams::default() {
            writeln!(f, "[criterion]")?;
            if let Some(v) = c.epsilon {
                writeln!(f, "epsilon = {v}")?;
            }
            if let Some(v) = c.gamma_cap {
                writeln!(f, "Gamma = {v}")?;
            }
            if let Some(s) = &c.s_set {
                let items: Vec<String> = s.iter().map(|n| n.to_string()).collect();
                writeln!(f, "S_set = {}", items.join(", "))?;
            }
            if let Some(p) = &c.partition {
                let items: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                writeln!(f, "partition = {}", items.join(", "))?;
            }
            for (key, e) in [
                ("alpha", &c.alpha),
                ("beta", &c.beta),
                ("alpha1", &c.alpha1),
                ("alpha2", &c.alpha2),
                ("beta1", &c.beta1),
                ("beta2", &c.beta2),
            ] {
                if let Some(e) = e {
                    writeln!(f, "{key} = {e}")?;
                }
            }
        }
        let n = &self.numeric;
        if n != &NumericOverrides::default() {
            writeln!(f, "[numeric]")?;
            for (key, v) in [
                ("rtol", n.rtol),
                ("atol", n.atol),
                ("max_step", n.max_step),
                ("blowup_norm", n.blowup_norm),
            ] {
                if let Some(v) = v {
                    writeln!(f, "{key} = {v}")?;
                }
            }
        }
        Ok(())
    }
}

/// Loads and fully validates a problem configuration from a file.
pub fn load_problem_config(path: impl AsRef<Path>) -> Result<ProblemSpec, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_problem_config(&text)
}

/// Parses a configuration from text (see the module docs for the format).
pub fn parse_problem_config(text: &str) -> Result<ProblemSpec, ConfigError> {
    let mut ps = ProblemSpec::zero_on(0.0, 1.0);
    let mut horizon_set = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            match line {
                "[problem]" | "[numeric]" | "[criterion]" => continue,
                other => {
                    return Err(ConfigError::Syntax {
                        line: line_no,
                        msg: format!("unknown section `{other}`"),
                    })
                }
            }
        }
        let Some(eq) = line.find('=') else {
            return Err(ConfigError::Syntax {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        if value.is_empty() {
            return Err(ConfigError::Syntax {
                line: line_no,
                msg: format!("empty value for key `{key}`"),
            });
        }

        let parse_f64 = |field: &'static str| -> Result<f64, ConfigError> {
            value.parse::<f64>().map_err(|_| ConfigError::Validation {
                field,
                msg: format!("`{value}` is not a number (line {line_no})"),
            })
        };
        let parse_e = |key: &str| -> Result<Expr, ConfigError> {
            parse_expr(value)
                .map(|e| e.simplify())
                .map_err(|source| ConfigError::ExprSyntax {
                    key: key.to_string(),
                    line: line_no,
                    source,
                })
        };

        // coefficient keys a0..d3
        if key.len() == 2 {
            let (family, n) = key.split_at(1);
            if let Ok(n) = n.parse::<usize>() {
                if n < 4 {
                    let slot = match family {
                        "a" => Some(&mut ps.a),
                        "b" => Some(&mut ps.b),
                        "c" => Some(&mut ps.c),
                        "d" => Some(&mut ps.d),
                        _ => None,
                    };
                    if let Some(arr) = slot {
                        arr[n] = parse_e(key)?;
                        continue;
                    }
                }
            }
        }

        match key {
            "t0" => ps.t0 = parse_f64("t0")?,
            "horizon" => {
                ps.horizon = parse_f64("horizon")?;
                horizon_set = true;
            }
            "gamma0" => ps.gamma[0] = parse_f64("gamma0")?,
            "gamma1" => ps.gamma[1] = parse_f64("gamma1")?,
            "gamma2" => ps.gamma[2] = parse_f64("gamma2")?,
            "gamma3" => ps.gamma[3] = parse_f64("gamma3")?,
            "epsilon" => ps.criterion.epsilon = Some(parse_f64("epsilon")?),
            "Gamma" => ps.criterion.gamma_cap = Some(parse_f64("Gamma")?),
            "S_set" => {
                let mut s = Vec::new();
                for item in value.split(',') {
                    let item = item.trim();
                    let n: usize = item.parse().map_err(|_| ConfigError::Validation {
                        field: "S_set",
                        msg: format!("`{item}` is not an index (line {line_no})"),
                    })?;
                    s.push(n);
                }
                ps.criterion.s_set = Some(s);
            }
            "partition" => {
                let mut pts = Vec::new();
                for item in value.split(',') {
                    let item = item.trim();
                    let v: f64 = item.parse().map_err(|_| ConfigError::Validation {
                        field: "partition",
                        msg: format!("`{item}` is not a number (line {line_no})"),
                    })?;
                    pts.push(v);
                }
                ps.criterion.partition = Some(pts);
            }
            "alpha" => ps.criterion.alpha = Some(parse_e(key)?),
            "beta" => ps.criterion.beta = Some(parse_e(key)?),
            "alpha1" => ps.criterion.alpha1 = Some(parse_e(key)?),
            "alpha2" => ps.criterion.alpha2 = Some(parse_e(key)?),
            "beta1" => ps.criterion.beta1 = Some(parse_e(key)?),
            "beta2" => ps.criterion.beta2 = Some(parse_e(key)?),
            "rtol" => ps.numeric.rtol = Some(parse_f64("rtol")?),
            "atol" => ps.numeric.atol = Some(parse_f64("atol")?),
            "max_step" => ps.numeric.max_step = Some(parse_f64("max_step")?),
            "blowup_norm" => ps.numeric.blowup_norm = Some(parse_f64("blowup_norm")?),
            other => {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("unknown key `{other}`"),
                })
            }
        }
    }

    if !horizon_set {
        return Err(ConfigError::Validation {
            field: "horizon",
            msg: "horizon is required".into(),
        });
    }
    ps.validate()?;
    Ok(ps)
}
