//! Effective run configuration: per-subcommand keys with defaults, an
//! optional `key=value` file, and command-line flags on top.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use arcdim_core::cubic_family::{figure1_parameters, fixed_point_near_2, gamma_solve, period_two_residual, GAMMA_TOL};
use arcdim_core::{ComplexBox, ComplexPoint, Polynomial, Precision};

use crate::CliError;

/// A configuration key: flag name, default (if any) and help text.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
    /// Echoed into output headers. Paths and the thread count are not, so
    /// that outputs do not depend on where or how fast they were produced.
    pub echo: bool,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key {
        name,
        default: Some(default),
        help,
        echo: true,
    }
}

const fn opt(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        default: None,
        help,
        echo: true,
    }
}

const fn path(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key {
        name,
        default,
        help,
        echo: false,
    }
}

const THREADS: Key = Key {
    name: "threads",
    default: Some("0"),
    help: "worker threads (0 = one per core)",
    echo: false,
};

const POLY_HELP: &str = "polynomial: power:D | cheb2 | cubic:EPS:BETA | cubic-gamma:EPS | figure1:A | coeffs:C0,C1,...";

pub const SUBCOMMANDS: &[(&str, &str)] = &[
    ("render", "escape-time image as binary PGM"),
    (
        "components",
        "labelled preimage components, chain and restriction report",
    ),
    ("pressure", "pressure sequence P_n(t) as CSV"),
    ("dimension", "Bowen zero of the pressure"),
    ("verify-lift", "transfer identity through the Zhukovsky lift"),
    ("curve", "continuation of the curve f^2(0) = p as CSV"),
    ("verify-example", "checks that the component of 0 is an interval"),
    ("lowerbound", "branch-sum lower bound on P(1, f)"),
];

const RENDER_KEYS: &[Key] = &[
    key("poly", "power:2", POLY_HELP),
    key(
        "box",
        "auto",
        "re_min,re_max,im_min,im_max or auto (square of half-width R)",
    ),
    key("width", "512", "pixels per row"),
    key("height", "512", "rows"),
    key("max-iter", "256", "iteration cap"),
    path("out", Some("render.pgm"), "output PGM path (- for stdout)"),
    THREADS,
];

const COMPONENTS_KEYS: &[Key] = &[
    key("poly", "power:2", POLY_HELP),
    key(
        "box",
        "auto",
        "re_min,re_max,im_min,im_max, auto (square of half-width R) or seed (around the level-1 component of the seed)",
    ),
    key("resolution", "512", "pixels per side"),
    key("level", "4", "preimage level n"),
    opt("seed", "re,im: follow the component chain of this point"),
    key("m-cap", "12", "largest restriction level probed"),
    opt(
        "ln-n-max",
        "comma-separated depths: report min L_n(F, x) over the sample protocol",
    ),
    key("ln-samples", "20", "sample points for ln-n-max"),
    path("out", Some("components.pgm"), "label PGM path"),
    path("sidecar", None, "component table path (default: <out>.txt)"),
    path("render", None, "also write the escape-time PGM of the same grid here"),
    path("report", Some("-"), "summary report path (- for stdout)"),
    THREADS,
];

const PRESSURE_KEYS: &[Key] = &[
    key("poly", "power:2", POLY_HELP),
    key("x", "1,1", "base point re,im"),
    key("N", "10", "tree depth"),
    key("t", "1", "comma-separated exponents"),
    key("tol", "1e-10", "root residual tolerance"),
    key("precision", "double", "root solves in double or double-double"),
    path("out", Some("-"), "CSV path (- for stdout)"),
    THREADS,
];

const DIMENSION_KEYS: &[Key] = &[
    key("poly", "power:2", POLY_HELP),
    key("x", "1,1", "base point re,im"),
    key("N", "12", "tree depth"),
    key("t-lo", "0", "lower end of the bisection bracket"),
    key("t-hi", "3", "upper end of the bisection bracket"),
    key("tol-t", "1e-6", "bracket width at termination"),
    key("tol", "1e-10", "root residual tolerance"),
    key("precision", "double", "root solves in double or double-double"),
    path("out", Some("-"), "output path (- for stdout)"),
    THREADS,
];

const VERIFY_LIFT_KEYS: &[Key] = &[
    key("poly", "cheb2", POLY_HELP),
    key("interval", "auto", "alpha,omega or auto (from the polynomial family)"),
    key("samples", "50", "number of base points"),
    key("n-max", "8", "largest depth; depths cycle through 1..n-max"),
    key("circle-n", "10", "depth of the circle sum check"),
    path("out", Some("-"), "output path (- for stdout)"),
    THREADS,
];

const CURVE_KEYS: &[Key] = &[
    key("eps", "0:0.1:0.005", "min:max:step"),
    key("tol", "1e-12", "Newton residual tolerance"),
    key("fd-step", "1e-6", "finite-difference step for the gradients"),
    path("out", Some("-"), "CSV path (- for stdout)"),
    THREADS,
];

const VERIFY_EXAMPLE_KEYS: &[Key] = &[
    key("eps", "0.05", "comma-separated parameters in (0, 0.15]"),
    key("resolution", "2048", "pixels per side"),
    key("level", "10", "deepest preimage level"),
    key("m-cap", "12", "largest restriction level probed"),
    key("hausdorff", "3", "Hausdorff threshold in pixel pitches"),
    path("out", Some("-"), "report path (- for stdout)"),
    THREADS,
];

const LOWERBOUND_KEYS: &[Key] = &[
    key("poly", "cubic-gamma:0.05", POLY_HELP),
    key("seed", "0,0", "point of the component C, re,im"),
    key("resolution", "2048", "pixels per side"),
    key("level", "10", "deepest preimage level"),
    key("m-cap", "12", "largest restriction level probed"),
    key("N", "6", "largest number of units in the branch sums"),
    key(
        "samples",
        "20",
        "sample points for a and C0 (doubled for the stability check)",
    ),
    key(
        "cert-samples",
        "4",
        "sample points at which the bound is checked at depth N",
    ),
    key("c0-n-max", "10", "deepest restricted sum for C0"),
    key("x", "1,1", "base point of the pressure estimate"),
    key("pressure-N", "10", "pressure tree depth"),
    key("t-lo", "0", "lower end of the Bowen bracket"),
    key("t-hi", "3", "upper end of the Bowen bracket"),
    key("tol-t", "1e-6", "Bowen bracket width"),
    path("out", Some("-"), "report path (- for stdout)"),
    THREADS,
];

/// Keys accepted by a subcommand.
pub fn keys(command: &str) -> &'static [Key] {
    match command {
        "render" => RENDER_KEYS,
        "components" => COMPONENTS_KEYS,
        "pressure" => PRESSURE_KEYS,
        "dimension" => DIMENSION_KEYS,
        "verify-lift" => VERIFY_LIFT_KEYS,
        "curve" => CURVE_KEYS,
        "verify-example" => VERIFY_EXAMPLE_KEYS,
        "lowerbound" => LOWERBOUND_KEYS,
        _ => &[],
    }
}

/// Validated key/value settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Defaults, then the config file entries, then the flags.
    pub fn build(command: &str, file: Option<&str>, flags: &[(String, String)]) -> Result<Self, CliError> {
        let spec = keys(command);
        if spec.is_empty() {
            return Err(CliError::Config(format!("unknown subcommand {command}")));
        }
        let mut values = BTreeMap::new();
        for k in spec {
            if let Some(d) = k.default {
                values.insert(k.name.to_string(), d.to_string());
            }
        }
        let known = |name: &str| spec.iter().any(|k| k.name == name);
        if let Some(text) = file {
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", lineno + 1)))?;
                let (k, v) = (k.trim(), v.trim());
                if !known(k) {
                    return Err(CliError::Config(format!(
                        "config line {}: unknown key {k} for {command}",
                        lineno + 1
                    )));
                }
                values.insert(k.to_string(), v.to_string());
            }
        }
        for (k, v) in flags {
            if !known(k) {
                return Err(CliError::Config(format!("unknown key {k} for {command}")));
            }
            values.insert(k.clone(), v.clone());
        }
        Ok(RunConfig {
            command: command.to_string(),
            values,
        })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let raw = self
            .raw(key)
            .ok_or_else(|| CliError::Config(format!("missing value for {key}")))?;
        raw.parse()
            .map_err(|e| CliError::Config(format!("bad value {raw:?} for {key}: {e}")))
    }

    pub fn get_point(&self, key: &str) -> Result<ComplexPoint, CliError> {
        parse_point(self.raw(key).unwrap_or(""), key)
    }

    pub fn get_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        parse_list(self.raw(key).unwrap_or(""), key)
    }

    pub fn precision(&self) -> Result<Precision, CliError> {
        match self.raw("precision").unwrap_or("double") {
            "double" => Ok(Precision::Double),
            "double-double" => Ok(Precision::DoubleDouble),
            other => Err(CliError::Config(format!(
                "precision must be double or double-double, got {other}"
            ))),
        }
    }

    pub fn threads(&self) -> Result<usize, CliError> {
        self.get("threads")
    }

    /// `# key = value` lines for every echoed key, in declaration order.
    pub fn echo(&self) -> Vec<String> {
        let mut lines = vec![format!("command = {}", self.command)];
        for k in keys(&self.command) {
            if !k.echo {
                continue;
            }
            if let Some(v) = self.raw(k.name) {
                lines.push(format!("{} = {v}", k.name));
            }
        }
        lines
    }

    pub fn echo_block(&self) -> String {
        self.echo().iter().map(|l| format!("# {l}\n")).collect()
    }
}

pub fn parse_list(raw: &str, key: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad number {s:?} in {key}: {e}")))
        })
        .collect()
}

pub fn parse_point(raw: &str, key: &str) -> Result<ComplexPoint, CliError> {
    let v = parse_list(raw, key)?;
    match v.as_slice() {
        [re, im] => Ok(ComplexPoint::new(*re, *im)),
        [re] => Ok(ComplexPoint::new(*re, 0.0)),
        _ => Err(CliError::Config(format!("{key} must be re,im"))),
    }
}

pub fn parse_box(raw: &str, radius: f64, resolution: usize) -> Result<ComplexBox, CliError> {
    if raw == "auto" {
        return ComplexBox::on_real_axis(-radius, radius, radius, resolution).map_err(CliError::Compute);
    }
    let v = parse_list(raw, "box")?;
    if v.len() != 4 {
        return Err(CliError::Config("box needs re_min,re_max,im_min,im_max".into()));
    }
    ComplexBox::new(v[0], v[1], v[2], v[3]).map_err(|e| CliError::Config(e.to_string()))
}

/// What a polynomial shorthand named.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Power(usize),
    Chebyshev2,
    Cubic { eps: f64, beta: f64 },
    CubicOnCurve { eps: f64, beta: f64, residual: f64 },
    Figure1 { a: f64, b: f64, residual: f64 },
    Coefficients,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolySpec {
    pub poly: Polynomial,
    pub family: Family,
}

impl PolySpec {
    /// The invariant interval for the Chebyshev-like families.
    pub fn interval(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::Chebyshev2 => Some((-2.0, 2.0)),
            Family::Cubic { eps, beta } | Family::CubicOnCurve { eps, beta, .. } => {
                fixed_point_near_2(eps, beta).ok().map(|p| (-beta, p))
            }
            _ => None,
        }
    }

    /// `key: value` lines describing the polynomial.
    pub fn describe(&self) -> Vec<String> {
        let mut out = vec![format!(
            "coefficients: {}",
            self.poly
                .coeffs()
                .iter()
                .map(|c| format!("{:.16e}{:+.16e}i", c.re, c.im))
                .collect::<Vec<_>>()
                .join(",")
        )];
        match self.family {
            Family::CubicOnCurve { eps, beta, residual } => {
                out.push(format!("eps: {eps:.16e}"));
                out.push(format!("beta: {beta:.16e}"));
                out.push(format!("gamma_residual: {residual:.16e}"));
            }
            Family::Figure1 { a, b, residual } => {
                out.push(format!("figure1_a: {a:.16e}"));
                out.push(format!("figure1_b: {b:.16e}"));
                out.push(format!("period_two_residual: {residual:.16e}"));
            }
            _ => {}
        }
        out
    }
}

fn num<T: FromStr>(s: &str, what: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    s.trim()
        .parse()
        .map_err(|e| CliError::Config(format!("bad {what} {s:?} in polynomial spec: {e}")))
}

pub fn parse_poly(spec: &str) -> Result<PolySpec, CliError> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let parts: Vec<&str> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(':').collect()
    };
    let bad = || CliError::Config(format!("malformed polynomial spec {spec:?}"));
    let spec = match (kind, parts.as_slice()) {
        ("power", [d]) => {
            let d: usize = num(d, "degree")?;
            PolySpec {
                poly: Polynomial::power(d).map_err(|e| CliError::Config(e.to_string()))?,
                family: Family::Power(d),
            }
        }
        ("cheb2", []) => PolySpec {
            poly: Polynomial::chebyshev2(),
            family: Family::Chebyshev2,
        },
        ("cubic", [e, b]) => {
            let (eps, beta) = (num(e, "eps")?, num(b, "beta")?);
            PolySpec {
                poly: Polynomial::cubic_family(eps, beta).map_err(|e| CliError::Config(e.to_string()))?,
                family: Family::Cubic { eps, beta },
            }
        }
        ("cubic-gamma", [e]) => {
            let pt = gamma_solve(num(e, "eps")?, GAMMA_TOL).map_err(CliError::Compute)?;
            PolySpec {
                poly: pt.polynomial().map_err(CliError::Compute)?,
                family: Family::CubicOnCurve {
                    eps: pt.eps,
                    beta: pt.beta,
                    residual: pt.residual,
                },
            }
        }
        ("figure1", [a]) => {
            let a: f64 = num(a, "a")?;
            let b = figure1_parameters(a).map_err(CliError::Compute)?;
            PolySpec {
                poly: Polynomial::cubic_family(a, b).map_err(CliError::Compute)?,
                family: Family::Figure1 {
                    a,
                    b,
                    residual: period_two_residual(a, b),
                },
            }
        }
        ("coeffs", [list]) => PolySpec {
            poly: Polynomial::from_real(&parse_list(list, "coeffs")?).map_err(|e| CliError::Config(e.to_string()))?,
            family: Family::Coefficients,
        },
        _ => return Err(bad()),
    };
    if spec.poly.degree() < 2 {
        return Err(CliError::Config("polynomial must have degree at least 2".into()));
    }
    Ok(spec)
}
