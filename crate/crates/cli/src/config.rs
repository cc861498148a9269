use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use largesol::disk::Shape;
use largesol::Nonlinearity;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: malformed value: {message}")]
    MalformedValue { line: usize, message: String },
    #[error("line {line}: malformed line `{text}` (expected `key = value`)")]
    MalformedLine { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    DuplicateKey { line: usize, key: String, first: usize },
    #[error("missing required key: {key} ({context})")]
    MissingKey { key: &'static str, context: String },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    KoCheck,
    Radial,
    Disk,
    Symmetry,
    FullVerify,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::KoCheck => "ko-check",
            Kind::Radial => "radial",
            Kind::Disk => "disk",
            Kind::Symmetry => "symmetry",
            Kind::FullVerify => "full-verify",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "ko-check" => Kind::KoCheck,
            "radial" => Kind::Radial,
            "disk" => Kind::Disk,
            "symmetry" => Kind::Symmetry,
            "full-verify" => Kind::FullVerify,
            _ => {
                return Err(format!(
                    "kind must be one of ko-check, radial, disk, symmetry, full-verify (got `{s}`)"
                ))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Converge,
    Diverge,
}

/// `(key, default, description)`; an empty default means required or unset.
pub const KEYS: &[(&str, &str, &str)] = &[
    (
        "kind",
        "",
        "ko-check | radial | disk | symmetry | full-verify (may come from the subcommand)",
    ),
    (
        "g",
        "",
        "nonlinearity descriptor: poly:c0,c1,.. | power:p:c | exp:c | table:<path> (required)",
    ),
    ("a", "auto", "lower bound of the Keller-Osserman integral"),
    ("expect", "converge", "converge | diverge: expected Keller-Osserman verdict"),
    ("fit_margin", "0.05", "tail exponent margin above 2 required for convergence"),
    ("N", "2", "space dimension (disk, symmetry and full-verify need 2)"),
    ("R", "", "outer radius (required except for ko-check)"),
    ("r_inner", "", "inner radius; makes the radial scenario an annulus"),
    ("inner_value", "0", "Dirichlet value on the inner sphere of an annulus"),
    ("n", "801", "radial grid nodes (full-verify and symmetry use 2 Nr + 1)"),
    ("Nr", "401", "polar rings"),
    ("Ntheta", "64", "polar angles (even)"),
    ("k0", "10", "first boundary level"),
    ("ratio", "4", "boundary level ratio between ladder levels"),
    ("levels", "6", "ladder levels"),
    ("shape", "cos3", "angular perturbation cos<m> | sin<m>"),
    ("epsilon", "0.2", "perturbation amplitude, 0 <= epsilon < 1"),
    ("newton_tol", "1e-10", "Newton residual tolerance"),
    ("newton_max_iter", "50", "Newton iteration cap"),
    (
        "continuation_tol",
        "1e-3",
        "interior relative change declaring the ladder converged",
    ),
    ("interior_margin", "0.1", "convergence is judged on r <= R - interior_margin"),
    ("osc_ratio_tol", "1e-2", "bound on osc(R/2)/u(R/2) at the ladder top"),
    ("splice_from", "0", "lower end of the convexity scan for the splice point M"),
    ("working_lo", "0", "lower end of the K0 working range"),
    ("working_hi", "top level", "upper end of the K0 working range"),
    ("r0", "R/2", "inner circle of the symmetry annulus and of Psi"),
    ("directions", "16", "moving-plane directions"),
    ("threshold", "auto", "divergence threshold for the radial derivative"),
    ("lie_stability", "0.2", "relative change of L allowed under Nr doubling"),
    ("refine", "true", "rerun at 2 Nr for sandwich slack and L stability"),
    ("out", "", "output directory (overridden by --out)"),
];

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub kind: Kind,
    pub g_descriptor: String,
    pub g: Nonlinearity,
    pub a: Option<f64>,
    pub expect: Expect,
    pub fit_margin: f64,
    pub dimension: usize,
    pub radius: f64,
    pub inner_radius: Option<f64>,
    pub inner_value: f64,
    pub n: usize,
    pub nr: usize,
    pub ntheta: usize,
    pub k0: f64,
    pub ratio: f64,
    pub levels: usize,
    pub shape: Shape,
    pub epsilon: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub continuation_tol: f64,
    pub interior_margin: f64,
    pub osc_ratio_tol: f64,
    pub splice_from: f64,
    pub working_lo: f64,
    pub working_hi: Option<f64>,
    pub r0: Option<f64>,
    pub directions: usize,
    pub threshold: Option<f64>,
    pub lie_stability: f64,
    pub refine: bool,
    pub out: Option<PathBuf>,
    /// Every key after defaults, as text.
    pub echo: BTreeMap<String, String>,
}

struct Entry {
    line: usize,
    value: String,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    lines: usize,
}

impl Reader {
    fn get<T: FromStr>(&self, key: &str, check: impl Fn(&T) -> Result<(), String>) -> Result<Option<T>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        let v: T = e.value.parse().map_err(|_| ConfigError::MalformedValue {
            line: e.line,
            message: format!("{key} = `{}` does not parse", e.value),
        })?;
        check(&v).map_err(|message| ConfigError::MalformedValue { line: e.line, message })?;
        Ok(Some(v))
    }

    fn or<T: FromStr>(&self, key: &str, default: T, check: impl Fn(&T) -> Result<(), String>) -> Result<T, ConfigError> {
        Ok(self.get(key, check)?.unwrap_or(default))
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }
}

fn positive(key: &'static str) -> impl Fn(&f64) -> Result<(), String> {
    move |v| if *v > 0.0 { Ok(()) } else { Err(format!("{key} must be > 0")) }
}

fn at_least(key: &'static str, min: usize) -> impl Fn(&usize) -> Result<(), String> {
    move |v| {
        if *v >= min {
            Ok(())
        } else {
            Err(format!("{key} must be >= {min}"))
        }
    }
}

fn any<T>(_: &T) -> Result<(), String> {
    Ok(())
}

impl ScenarioConfig {
    pub fn from_path(path: &Path, kind: Option<Kind>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text, kind)
    }

    /// Parses flat `key = value` lines; `#` starts a comment. `kind`
    /// supplies the scenario when the text has no `kind` key.
    pub fn parse(text: &str, kind: Option<Kind>) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        let mut lines = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            lines = line;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::MalformedLine {
                    line,
                    text: raw.trim().to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.iter().any(|(k, _, _)| *k == key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if let Some(first) = entries.get(key) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                    first: first.line,
                });
            }
            entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.to_string(),
                },
            );
        }
        let r = Reader { entries, lines };

        let kind = match (r.get::<Kind>("kind", any)?, kind) {
            (Some(k), Some(sub)) if k != sub => {
                return Err(ConfigError::MalformedValue {
                    line: r.line_of("kind"),
                    message: format!("kind = {k} does not match the subcommand {sub}"),
                })
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => {
                return Err(ConfigError::MissingKey {
                    key: "kind",
                    context: format!("not set in {} lines and no subcommand given", r.lines),
                })
            }
        };
        let context = |key: &str| match r.entries.get("kind") {
            Some(e) => format!("needed by kind = {kind} on line {}", e.line),
            None => format!("needed by {kind}; none of the {} lines sets {key}", r.lines),
        };
        let g_descriptor = r.get::<String>("g", any)?.ok_or_else(|| ConfigError::MissingKey {
            key: "g",
            context: context("g"),
        })?;
        let g: Nonlinearity = g_descriptor.parse().map_err(|e| ConfigError::MalformedValue {
            line: r.line_of("g"),
            message: format!("g: {e}"),
        })?;
        let radius = match r.get("R", positive("R"))? {
            Some(v) => v,
            None if kind == Kind::KoCheck => 1.0,
            None => {
                return Err(ConfigError::MissingKey {
                    key: "R",
                    context: context("R"),
                })
            }
        };
        let dimension = r.or("N", 2usize, at_least("N", 2))?;
        if dimension != 2 && matches!(kind, Kind::Disk | Kind::Symmetry | Kind::FullVerify) {
            return Err(ConfigError::MalformedValue {
                line: r.line_of("N"),
                message: format!("N must be 2 for {kind}"),
            });
        }
        let inner_radius = r.get("r_inner", |v: &f64| {
            if *v > 0.0 && *v < radius {
                Ok(())
            } else {
                Err("r_inner must satisfy 0 < r_inner < R".into())
            }
        })?;
        let epsilon = r.or("epsilon", 0.2, |v: &f64| {
            if *v < 0.0 {
                Err("epsilon must be ≥ 0".into())
            } else if *v >= 1.0 {
                Err("epsilon must be < 1".into())
            } else {
                Ok(())
            }
        })?;
        let expect = match r.get::<String>("expect", any)?.as_deref() {
            None | Some("converge") => Expect::Converge,
            Some("diverge") => Expect::Diverge,
            Some(other) => {
                return Err(ConfigError::MalformedValue {
                    line: r.line_of("expect"),
                    message: format!("expect must be converge or diverge (got `{other}`)"),
                })
            }
        };
        let ntheta = r.or("Ntheta", 64usize, |v: &usize| {
            if *v >= 4 && v.is_multiple_of(2) {
                Ok(())
            } else {
                Err("Ntheta must be even and >= 4".into())
            }
        })?;
        let cfg = ScenarioConfig {
            kind,
            g,
            a: r.get("a", any)?,
            expect,
            fit_margin: r.or("fit_margin", 0.05, positive("fit_margin"))?,
            dimension,
            radius,
            inner_radius,
            inner_value: r.or("inner_value", 0.0, any)?,
            n: r.or("n", 801usize, at_least("n", 3))?,
            nr: r.or("Nr", 401usize, at_least("Nr", 3))?,
            ntheta,
            k0: r.or("k0", 10.0, positive("k0"))?,
            ratio: r.or(
                "ratio",
                4.0,
                |v: &f64| if *v > 1.0 { Ok(()) } else { Err("ratio must be > 1".into()) },
            )?,
            levels: r.or("levels", 6usize, at_least("levels", 1))?,
            shape: r.or("shape", Shape::default(), any)?,
            epsilon,
            newton_tol: r.or("newton_tol", 1e-10, positive("newton_tol"))?,
            newton_max_iter: r.or("newton_max_iter", 50usize, at_least("newton_max_iter", 1))?,
            continuation_tol: r.or("continuation_tol", 1e-3, positive("continuation_tol"))?,
            interior_margin: r.or("interior_margin", 0.1, |v: &f64| {
                if *v >= 0.0 && *v < radius {
                    Ok(())
                } else {
                    Err("interior_margin must lie in [0, R)".into())
                }
            })?,
            osc_ratio_tol: r.or("osc_ratio_tol", 1e-2, positive("osc_ratio_tol"))?,
            splice_from: r.or("splice_from", 0.0, any)?,
            working_lo: r.or("working_lo", 0.0, any)?,
            working_hi: r.get("working_hi", any)?,
            r0: r.get("r0", |v: &f64| {
                if *v > 0.0 && *v < radius {
                    Ok(())
                } else {
                    Err("r0 must satisfy 0 < r0 < R".into())
                }
            })?,
            directions: r.or("directions", 16usize, at_least("directions", 1))?,
            threshold: r.get("threshold", positive("threshold"))?,
            lie_stability: r.or("lie_stability", 0.2, positive("lie_stability"))?,
            refine: r.or("refine", true, any)?,
            out: r.get::<String>("out", any)?.map(PathBuf::from),
            echo: BTreeMap::new(),
            g_descriptor,
        };
        if let (Some(hi), lo) = (cfg.working_hi, cfg.working_lo) {
            if !(hi > lo) {
                return Err(ConfigError::MalformedValue {
                    line: r.line_of("working_hi"),
                    message: "working_hi must exceed working_lo".into(),
                });
            }
        }
        let mut cfg = cfg;
        cfg.echo = KEYS
            .iter()
            .filter(|(k, _, _)| *k != "out")
            .map(|(k, default, _)| {
                let value = match (*k, r.entries.get(*k)) {
                    ("kind", _) => kind.to_string(),
                    (_, Some(e)) => e.value.clone(),
                    (_, None) => default.to_string(),
                };
                (k.to_string(), value)
            })
            .collect();
        Ok(cfg)
    }

    pub fn r0(&self) -> f64 {
        self.r0.unwrap_or(0.5 * self.radius)
    }

    pub fn help_text() -> String {
        let mut out = String::from("Configuration keys (key = value, one per line, # comments):\n");
        for (k, default, doc) in KEYS {
            let default = if default.is_empty() { "-" } else { default };
            out.push_str(&format!("  {k:<17} [{default}] {doc}\n"));
        }
        out
    }
}
