//! JSON run configuration. Errors carry the dotted path of the offending
//! field, e.g. `model.a.kind: expected one of const, affine, periodic, table`.

use std::fmt;
use std::path::Path;

use serde_json::{Map, Value};
use weylspec::classify::HerglotzModel;
use weylspec::linalg::{self, c, CMat};
use weylspec::models::{self, JacobiModel};
use weylspec::system::{validate_system, MatrixSequence, Seq, Sequence, TailRule, DEFAULT_TOL};
use weylspec::{BoundaryMatrix, SymplecticSystem};

/// Indices checked by the structural validation done at load time.
pub const LOAD_CHECK_WINDOW: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type Parsed<T> = Result<T, ConfigError>;

fn err<T>(path: &str, message: impl Into<String>) -> Parsed<T> {
    Err(ConfigError { path: path.to_string(), message: message.into() })
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// What a config describes: a system with a boundary condition, or an
/// M-function given in closed form.
#[derive(Debug, Clone)]
pub enum Target {
    System {
        sys: SymplecticSystem,
        alpha: BoundaryMatrix,
        /// The Jacobi coefficients, when the system came from them.
        jacobi: Option<JacobiModel>,
    },
    Herglotz(HerglotzModel),
}

impl Target {
    pub fn half_dim(&self) -> usize {
        match self {
            Target::System { sys, .. } => sys.n(),
            Target::Herglotz(h) => h.half_dim(),
        }
    }
}

/// Options that flags may override.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOptions {
    pub tol: Option<f64>,
    pub nu0: Option<f64>,
    pub nu_ratio: Option<f64>,
    pub nu_count: Option<usize>,
    pub nmax: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub target: Target,
    pub alpha_hat: Option<BoundaryMatrix>,
    /// Right-hand side for `resolve`: start index and `2n`-vectors.
    pub rhs: Option<(usize, Vec<CMat>)>,
    pub options: ConfigOptions,
}

pub struct Loaded {
    pub config: Config,
    pub raw: Vec<u8>,
}

/// Reads and parses a config file. Structural validation is left to the
/// caller so that `validate` can report failures instead of aborting.
pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let raw =
        std::fs::read(path).map_err(|e| ConfigError { path: String::new(), message: format!("cannot read {}: {e}", path.display()) })?;
    let value: Value =
        serde_json::from_slice(&raw).map_err(|e| ConfigError { path: String::new(), message: format!("invalid JSON: {e}") })?;
    Ok(Loaded { config: parse(&value)?, raw })
}

/// Runs the structural checks on the first indices of a system config.
pub fn check_structure(config: &Config) -> Result<(), ConfigError> {
    if let Target::System { sys, .. } = &config.target {
        let report = validate_system(sys, LOAD_CHECK_WINDOW, DEFAULT_TOL)
            .map_err(|e| ConfigError { path: "model".into(), message: e.to_string() })?;
        if !report.pass {
            return err("model", format!("failed checks: {}", report.failed_checks().join(", ")));
        }
    }
    Ok(())
}

pub fn parse(value: &Value) -> Parsed<Config> {
    let root = object(value, "")?;
    let model = root.get("model").map_or_else(|| err("model", "missing"), Ok)?;
    let options = match root.get("options") {
        Some(v) => parse_options(v, "options")?,
        None => ConfigOptions::default(),
    };
    let target = parse_model(model, "model", root.get("alpha"))?;
    let n = target.half_dim();
    let alpha_hat = root.get("alpha_hat").map(|v| parse_alpha(v, "alpha_hat", n)).transpose()?;
    let rhs = root.get("rhs").map(|v| parse_rhs(v, "rhs", n)).transpose()?;
    Ok(Config { target, alpha_hat, rhs, options })
}

fn object<'a>(v: &'a Value, path: &str) -> Parsed<&'a Map<String, Value>> {
    v.as_object().map_or_else(|| err(path, "expected an object"), Ok)
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Parsed<&'a Value> {
    obj.get(key).map_or_else(|| err(&join(path, key), "missing"), Ok)
}

fn number(v: &Value, path: &str) -> Parsed<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => err(path, "expected a finite number"),
    }
}

fn count(v: &Value, path: &str) -> Parsed<usize> {
    v.as_u64().map(|x| x as usize).map_or_else(|| err(path, "expected a nonnegative integer"), Ok)
}

fn array<'a>(v: &'a Value, path: &str) -> Parsed<&'a Vec<Value>> {
    v.as_array().map_or_else(|| err(path, "expected an array"), Ok)
}

fn parse_options(v: &Value, path: &str) -> Parsed<ConfigOptions> {
    let obj = object(v, path)?;
    let mut o = ConfigOptions::default();
    for (key, val) in obj {
        let p = join(path, key);
        match key.as_str() {
            "tol" => o.tol = Some(number(val, &p)?),
            "nu0" => o.nu0 = Some(number(val, &p)?),
            "nu_ratio" => o.nu_ratio = Some(number(val, &p)?),
            "nu_count" => o.nu_count = Some(count(val, &p)?),
            "nmax" => o.nmax = Some(count(val, &p)?),
            "seed" => o.seed = Some(val.as_u64().map_or_else(|| err(&p, "expected a nonnegative integer"), Ok)?),
            _ => return err(&p, "unknown option"),
        }
    }
    Ok(o)
}

/// A complex entry: a number or an `[re, im]` pair.
fn entry(v: &Value, path: &str) -> Parsed<weylspec::Complex64> {
    if let Some(pair) = v.as_array() {
        if pair.len() == 2 {
            return Ok(c(number(&pair[0], &format!("{path}[0]"))?, number(&pair[1], &format!("{path}[1]"))?));
        }
        return err(path, "expected a number or [re, im]");
    }
    Ok(c(number(v, path)?, 0.0))
}

/// A matrix given as a list of rows.
fn matrix(v: &Value, path: &str) -> Parsed<CMat> {
    let rows = array(v, path)?;
    if rows.is_empty() {
        return err(path, "empty matrix");
    }
    let mut data = Vec::new();
    let mut width = None;
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let row = array(row, &rp)?;
        if *width.get_or_insert(row.len()) != row.len() || row.is_empty() {
            return err(&rp, "rows must be nonempty and of equal length");
        }
        for (j, x) in row.iter().enumerate() {
            data.push(entry(x, &format!("{rp}[{j}]"))?);
        }
    }
    let cols = width.unwrap_or(0);
    Ok(CMat::from_row_slice(rows.len(), cols, &data))
}

fn tail_rule(obj: &Map<String, Value>, path: &str) -> Parsed<TailRule> {
    let p = join(path, "tail");
    match field(obj, "tail", path)?.as_str() {
        Some("repeat-last") => Ok(TailRule::RepeatLast),
        Some("error") => Ok(TailRule::Error),
        _ => err(&p, "expected \"repeat-last\" or \"error\""),
    }
}

fn sequence<T>(v: &Value, path: &str, item: impl Fn(&Value, &str) -> Parsed<T>) -> Parsed<Seq<T>> {
    let obj = object(v, path)?;
    let kind = field(obj, "kind", path)?.as_str().unwrap_or("");
    let list = |key: &str| -> Parsed<Vec<T>> {
        let p = join(path, key);
        let values = array(field(obj, key, path)?, &p)?;
        if values.is_empty() {
            return err(&p, "must not be empty");
        }
        values.iter().enumerate().map(|(i, x)| item(x, &format!("{p}[{i}]"))).collect()
    };
    match kind {
        "const" => Ok(Seq::Const(item(field(obj, "value", path)?, &join(path, "value"))?)),
        "affine" => Ok(Seq::Affine {
            offset: item(field(obj, "offset", path)?, &join(path, "offset"))?,
            slope: item(field(obj, "slope", path)?, &join(path, "slope"))?,
        }),
        "periodic" => Ok(Seq::Periodic(list("values")?)),
        "table" => Ok(Seq::Table { values: list("values")?, tail: tail_rule(obj, path)? }),
        _ => err(&join(path, "kind"), "expected one of const, affine, periodic, table"),
    }
}

fn real_sequence(v: &Value, path: &str) -> Parsed<Sequence> {
    sequence(v, path, number)
}

fn matrix_sequence(v: &Value, path: &str, dim: usize) -> Parsed<MatrixSequence> {
    sequence(v, path, |x, p| {
        let m = matrix(x, p)?;
        if m.shape() != (dim, dim) {
            return err(p, format!("expected a {dim}x{dim} matrix"));
        }
        Ok(m)
    })
}

fn params(obj: &Map<String, Value>, path: &str, names: &[&str]) -> Parsed<Vec<f64>> {
    let mut out = Vec::new();
    for name in names {
        match obj.get(*name) {
            Some(v) => out.push(number(v, &join(path, name))?),
            None => break,
        }
    }
    Ok(out)
}

fn system_target(sys: SymplecticSystem, alpha: Option<&Value>, jacobi: Option<JacobiModel>) -> Parsed<Target> {
    let alpha = match alpha {
        Some(v) => parse_alpha(v, "alpha", sys.n())?,
        None => BoundaryMatrix::dirichlet(sys.n()),
    };
    Ok(Target::System { sys, alpha, jacobi })
}

fn parse_model(v: &Value, path: &str, alpha: Option<&Value>) -> Parsed<Target> {
    let obj = object(v, path)?;
    let kind = field(obj, "type", path)?.as_str().unwrap_or("");
    let core_err = |e: weylspec::Error| ConfigError { path: path.to_string(), message: e.to_string() };
    match kind {
        "jacobi" => {
            let model = JacobiModel::new(
                real_sequence(field(obj, "a", path)?, &join(path, "a"))?,
                real_sequence(field(obj, "b", path)?, &join(path, "b"))?,
                real_sequence(field(obj, "w", path)?, &join(path, "w"))?,
            );
            let sys = models::jacobi_to_symplectic(&model).map_err(core_err)?;
            system_target(sys, alpha, Some(model))
        }
        "free_jacobi" => system_target(models::free_jacobi(), alpha, Some(models::free_jacobi_model())),
        "oscillator" => {
            let slope = params(obj, path, &["c"])?.first().copied().unwrap_or(1.0);
            system_target(models::oscillator(slope), alpha, Some(models::oscillator_model(slope)))
        }
        "one_jump_synthetic" => {
            let p = params(obj, path, &["c", "t0"])?;
            match models::builtin(kind, &p).map_err(core_err)? {
                models::Builtin::MFunction(h) => Ok(Target::Herglotz(h)),
                models::Builtin::System(sys) => system_target(sys, alpha, None),
            }
        }
        "herglotz" => {
            let jp = join(path, "jumps");
            let jumps = array(field(obj, "jumps", path)?, &jp)?
                .iter()
                .enumerate()
                .map(|(i, j)| {
                    let p = format!("{jp}[{i}]");
                    match j.as_array().map(Vec::as_slice) {
                        Some([t, s]) => Ok((number(t, &p)?, number(s, &p)?)),
                        _ => err(&p, "expected [position, size]"),
                    }
                })
                .collect::<Parsed<Vec<_>>>()?;
            let m0 = obj.get("m0").map(|x| number(x, &join(path, "m0"))).transpose()?.unwrap_or(0.0);
            let m1 = obj.get("m1").map(|x| number(x, &join(path, "m1"))).transpose()?.unwrap_or(0.0);
            let mut h = HerglotzModel::scalar(&jumps, m0, m1).map_err(core_err)?;
            if let Some(w) = obj.get("semicircle") {
                let w = number(w, &join(path, "semicircle"))?;
                h = h.with_semicircle(linalg::diag_real(&[w])).map_err(core_err)?;
            }
            Ok(Target::Herglotz(h))
        }
        "symplectic" => {
            let n = count(field(obj, "n", path)?, &join(path, "n"))?;
            if n == 0 {
                return err(&join(path, "n"), "must be positive");
            }
            let s = matrix_sequence(field(obj, "S", path)?, &join(path, "S"), 2 * n)?;
            let psi = matrix_sequence(field(obj, "psi", path)?, &join(path, "psi"), 2 * n)?;
            system_target(SymplecticSystem::from_matrices(n, s, psi, "config"), alpha, None)
        }
        "direct_sum" => {
            let pp = join(path, "parts");
            let parts = array(field(obj, "parts", path)?, &pp)?;
            if parts.is_empty() {
                return err(&pp, "must not be empty");
            }
            let mut systems = Vec::new();
            for (i, part) in parts.iter().enumerate() {
                match parse_model(part, &format!("{pp}[{i}]"), None)? {
                    Target::System { sys, .. } => systems.push(sys),
                    Target::Herglotz(_) => return err(&format!("{pp}[{i}]"), "parts must be systems"),
                }
            }
            let sys = models::direct_sum(&systems).map_err(core_err)?;
            system_target(sys, alpha, None)
        }
        _ => err(&join(path, "type"), "unknown"),
    }
}

fn parse_alpha(v: &Value, path: &str, n: usize) -> Parsed<BoundaryMatrix> {
    let obj = object(v, path)?;
    let not_in_gamma = || err(path, "not in Gamma");
    if let Some(a) = obj.get("angle") {
        let angle = number(a, &join(path, "angle"))?;
        if n != 1 {
            return err(&join(path, "angle"), "angles describe n = 1 only");
        }
        return Ok(BoundaryMatrix::from_angle(angle));
    }
    if let Some(m) = obj.get("matrix") {
        let m = matrix(m, &join(path, "matrix"))?;
        if m.shape() != (n, 2 * n) {
            return err(&join(path, "matrix"), format!("expected {n}x{} rows", 2 * n));
        }
        return BoundaryMatrix::new(m, 1e-10).or_else(|_| not_in_gamma());
    }
    if obj.get("dirichlet").and_then(Value::as_bool) == Some(true) {
        return Ok(BoundaryMatrix::dirichlet(n));
    }
    err(path, "expected \"angle\", \"matrix\" or \"dirichlet\": true")
}

fn parse_rhs(v: &Value, path: &str, n: usize) -> Parsed<(usize, Vec<CMat>)> {
    let obj = object(v, path)?;
    let start = obj.get("start").map(|x| count(x, &join(path, "start"))).transpose()?.unwrap_or(0);
    let vp = join(path, "values");
    let rows = array(field(obj, "values", path)?, &vp)?;
    if rows.is_empty() {
        return err(&vp, "must not be empty");
    }
    let mut values = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let p = format!("{vp}[{i}]");
        let row = array(row, &p)?;
        if row.len() != 2 * n {
            return err(&p, format!("expected {} entries", 2 * n));
        }
        let data = row.iter().enumerate().map(|(j, x)| entry(x, &format!("{p}[{j}]"))).collect::<Parsed<Vec<_>>>()?;
        values.push(CMat::from_column_slice(2 * n, 1, &data));
    }
    Ok((start, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse_err(v: Value) -> String {
        parse(&v).unwrap_err().to_string()
    }

    #[test]
    fn free_jacobi_from_sequences() {
        let cfg = parse(&json!({
            "model": {"type": "jacobi", "a": {"kind": "const", "value": 1}, "b": {"kind": "const", "value": 0}, "w": {"kind": "const", "value": 1}},
            "alpha": {"angle": std::f64::consts::FRAC_PI_2}
        }))
        .unwrap();
        let Target::System { sys, alpha, .. } = cfg.target else { panic!("expected a system") };
        assert_eq!(sys.n(), 1);
        let m = alpha.matrix();
        assert!((m[(0, 0)].re - 1.0).abs() < 1e-15 && m[(0, 1)].norm() < 1e-15);
        let s = sys.coefficients(3).unwrap().s;
        assert!((s - linalg::j_matrix(1)).norm() < 1e-15);
    }

    #[test]
    fn alpha_outside_gamma() {
        let e = parse_err(json!({"model": {"type": "free_jacobi"}, "alpha": {"matrix": [[2, 0]]}}));
        assert_eq!(e, "alpha: not in Gamma");
    }

    #[test]
    fn unknown_model_type() {
        assert_eq!(parse_err(json!({"model": {"type": "nope"}})), "model.type: unknown");
    }

    #[test]
    fn table_needs_tail() {
        let e = parse_err(json!({"model": {"type": "jacobi",
            "a": {"kind": "table", "values": [1, 1]}, "b": {"kind": "const", "value": 0}, "w": {"kind": "const", "value": 1}}}));
        assert_eq!(e, "model.a.tail: missing");
        let e = parse_err(json!({"model": {"type": "jacobi",
            "a": {"kind": "const", "value": 1}, "b": {"kind": "wave"}, "w": {"kind": "const", "value": 1}}}));
        assert!(e.starts_with("model.b.kind:"), "{e}");
    }

    #[test]
    fn negative_psi_fails_structure() {
        let cfg = parse(&json!({"model": {"type": "symplectic", "n": 1,
            "S": {"kind": "const", "value": [[0, 1], [-1, 0]]},
            "psi": {"kind": "const", "value": [[0, 0], [0, -1]]}}}))
        .unwrap();
        let e = check_structure(&cfg).unwrap_err();
        assert!(e.message.contains("psi psd"), "{e}");
    }

    #[test]
    fn complex_entries_and_rhs() {
        let cfg = parse(&json!({"model": {"type": "free_jacobi"}, "rhs": {"start": 2, "values": [[0, [1, 2]]]}})).unwrap();
        let (start, values) = cfg.rhs.unwrap();
        assert_eq!(start, 2);
        assert_eq!(values[0][(1, 0)], c(1.0, 2.0));
    }
}
