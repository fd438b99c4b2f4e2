//! Flat `key = value` run configuration.
//!
//! ```text
//! # two like-signed vortices
//! mesh.kind = regular
//! mesh.nx = 64
//! mesh.ny = 64
//! scenario.name = taylor_vortex_pair
//! sim.steps = 2000
//! curve.N = 1
//! curve.0.cells = 0, 1, 2, 3
//! ```
//!
//! Blank lines and text after `#` are ignored. Every key may appear at most
//! once; unknown keys are errors. See `docs/formats.md` for the key table.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::scenario::{Scenario, ScenarioKind};
use crate::dynamics::{JacobianMode, SimConfig};
use crate::mesh::Boundary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    Regular { nx: usize, ny: usize, h: f64 },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSource,
    /// Applies to regular grids; meshes from files carry their own boundary.
    pub boundary: Boundary,
    pub scenario: Scenario,
    pub sim: SimConfig,
    /// Closed cell loops, in order of their `curve_id`.
    pub curves: Vec<Vec<usize>>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: MeshSource::Regular { nx: 32, ny: 32, h: 2.0 * PI / 32.0 },
            boundary: Boundary::Periodic,
            scenario: Scenario::default(),
            sim: SimConfig { output_every: 100, ..SimConfig::default() },
            curves: Vec::new(),
            output_dir: PathBuf::from("out"),
        }
    }
}

const STATIC_KEYS: [&str; 18] = [
    "mesh.kind",
    "mesh.nx",
    "mesh.ny",
    "mesh.h",
    "mesh.file",
    "mesh.boundary",
    "scenario.name",
    "scenario.a",
    "scenario.U",
    "scenario.d",
    "sim.dt",
    "sim.steps",
    "sim.newton_tol",
    "sim.max_iters",
    "sim.jacobian",
    "sim.viscosity",
    "output.dir",
    "output.every",
];

fn curve_index(key: &str) -> Option<usize> {
    let rest = key.strip_prefix("curve.")?.strip_suffix(".cells")?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) || (rest.len() > 1 && rest.starts_with('0')) {
        return None;
    }
    rest.parse().ok()
}

fn known(key: &str) -> bool {
    STATIC_KEYS.contains(&key) || key == "curve.N" || curve_index(key).is_some()
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key).map(|(_, v)| v)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| invalid(key, format!("expected {what}, got `{v}`"))),
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: message.into() }
}

/// Reads and validates a configuration file; relative `mesh.file` and
/// `output.dir` paths are taken relative to the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, got `{body}`") })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line, message: "empty key".into() });
        }
        if !known(k) {
            return Err(ConfigError::UnknownKey { line, key: k.into() });
        }
        if map.insert(k.to_string(), (line, v.to_string())).is_some() {
            return Err(ConfigError::DuplicateKey { line, key: k.into() });
        }
    }
    let mut e = Entries { map };
    let d = RunConfig::default();

    let kind = e.take("mesh.kind").unwrap_or_else(|| "regular".into());
    let nx: Option<usize> = e.parse("mesh.nx", "a non-negative integer")?;
    let ny: Option<usize> = e.parse("mesh.ny", "a non-negative integer")?;
    let h: Option<f64> = e.parse("mesh.h", "a number")?;
    let file = e.take("mesh.file");
    let mesh = match kind.as_str() {
        "regular" => {
            if file.is_some() {
                return Err(invalid("mesh.file", "only allowed with mesh.kind = file"));
            }
            let nx = nx.unwrap_or(32);
            let ny = ny.unwrap_or(nx);
            if nx < 2 || ny < 2 {
                return Err(invalid(if nx < 2 { "mesh.nx" } else { "mesh.ny" }, "must be at least 2"));
            }
            let h = h.unwrap_or(2.0 * PI / nx as f64);
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("mesh.h", "must be positive"));
            }
            MeshSource::Regular { nx, ny, h }
        }
        "file" => {
            for (key, given) in [("mesh.nx", nx.is_some()), ("mesh.ny", ny.is_some()), ("mesh.h", h.is_some())] {
                if given {
                    return Err(invalid(key, "only allowed with mesh.kind = regular"));
                }
            }
            let f = file.ok_or_else(|| invalid("mesh.file", "required with mesh.kind = file"))?;
            let p = base.join(&f);
            if !p.is_file() {
                return Err(invalid("mesh.file", format!("{} does not exist", p.display())));
            }
            MeshSource::File(p)
        }
        other => return Err(invalid("mesh.kind", format!("expected `regular` or `file`, got `{other}`"))),
    };
    let boundary = match e.take("mesh.boundary").as_deref() {
        None | Some("periodic") => Boundary::Periodic,
        Some("wall") => Boundary::Wall,
        Some(other) => return Err(invalid("mesh.boundary", format!("expected `periodic` or `wall`, got `{other}`"))),
    };

    let kind = match e.take("scenario.name") {
        None => d.scenario.kind,
        Some(s) => ScenarioKind::parse(&s).ok_or_else(|| {
            let names: Vec<_> = ScenarioKind::ALL.iter().map(|k| k.as_str()).collect();
            invalid("scenario.name", format!("unknown scenario `{s}` (expected one of {})", names.join(", ")))
        })?,
    };
    let scenario = Scenario {
        kind,
        a: e.parse("scenario.a", "a number")?.unwrap_or(d.scenario.a),
        u: e.parse("scenario.U", "a number")?.unwrap_or(d.scenario.u),
        d: e.parse("scenario.d", "a number")?.unwrap_or(d.scenario.d),
    };
    if !(scenario.a > 0.0 && scenario.a.is_finite()) {
        return Err(invalid("scenario.a", "must be positive"));
    }
    if !scenario.u.is_finite() {
        return Err(invalid("scenario.U", "must be finite"));
    }
    if !(scenario.d >= 0.0 && scenario.d.is_finite()) {
        return Err(invalid("scenario.d", "must be non-negative"));
    }

    let jacobian = match e.take("sim.jacobian") {
        None => d.sim.jacobian,
        Some(s) => JacobianMode::parse(&s)
            .ok_or_else(|| invalid("sim.jacobian", format!("expected `full` or `diagonal`, got `{s}`")))?,
    };
    let sim = SimConfig {
        dt: e.parse("sim.dt", "a number")?.unwrap_or(d.sim.dt),
        steps: e.parse("sim.steps", "a non-negative integer")?.unwrap_or(d.sim.steps),
        newton_tol: e.parse("sim.newton_tol", "a number")?.unwrap_or(d.sim.newton_tol),
        max_newton_iters: e.parse("sim.max_iters", "a positive integer")?.unwrap_or(d.sim.max_newton_iters),
        jacobian,
        viscosity: e.parse("sim.viscosity", "a number")?.unwrap_or(d.sim.viscosity),
        output_every: e.parse("output.every", "a positive integer")?.unwrap_or(d.sim.output_every),
        gauge: d.sim.gauge,
    };
    let checks: [(&str, bool, &str); 5] = [
        ("sim.dt", sim.dt > 0.0 && sim.dt.is_finite(), "must be positive"),
        ("sim.newton_tol", sim.newton_tol > 0.0 && sim.newton_tol.is_finite(), "must be positive"),
        ("sim.max_iters", sim.max_newton_iters > 0, "must be at least 1"),
        ("sim.viscosity", sim.viscosity >= 0.0 && sim.viscosity.is_finite(), "must be non-negative"),
        ("output.every", sim.output_every > 0, "must be at least 1"),
    ];
    if let Some((key, _, msg)) = checks.iter().find(|c| !c.1) {
        return Err(invalid(key, *msg));
    }

    let output_dir = match e.take("output.dir") {
        None => base.join(&d.output_dir),
        Some(s) if s.is_empty() => return Err(invalid("output.dir", "must not be empty")),
        Some(s) => base.join(s),
    };

    let count: usize = e.parse("curve.N", "a non-negative integer")?.unwrap_or(0);
    let mut curves = Vec::with_capacity(count);
    for i in 0..count {
        let key = format!("curve.{i}.cells");
        let v = e.take(&key).ok_or_else(|| invalid(&key, format!("missing (curve.N = {count})")))?;
        let cells = v
            .split(',')
            .map(|c| c.trim().parse::<usize>().map_err(|_| invalid(&key, format!("bad cell index `{}`", c.trim()))))
            .collect::<Result<Vec<_>, _>>()?;
        curves.push(cells);
    }
    if let Some((key, _)) = e.map.into_iter().next() {
        return Err(invalid(&key, format!("curve index out of range (curve.N = {count})")));
    }

    Ok(RunConfig { mesh, boundary, scenario, sim, curves, output_dir })
}

impl RunConfig {
    /// Every key with its effective value; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        match &self.mesh {
            MeshSource::Regular { nx, ny, h } => {
                kv("mesh.kind", "regular".into());
                kv("mesh.nx", nx.to_string());
                kv("mesh.ny", ny.to_string());
                kv("mesh.h", format!("{h:?}"));
            }
            MeshSource::File(p) => {
                kv("mesh.kind", "file".into());
                kv("mesh.file", p.display().to_string());
            }
        }
        kv("mesh.boundary", self.boundary.as_str().into());
        kv("scenario.name", self.scenario.kind.as_str().into());
        kv("scenario.a", format!("{:?}", self.scenario.a));
        kv("scenario.U", format!("{:?}", self.scenario.u));
        kv("scenario.d", format!("{:?}", self.scenario.d));
        kv("sim.dt", format!("{:?}", self.sim.dt));
        kv("sim.steps", self.sim.steps.to_string());
        kv("sim.newton_tol", format!("{:?}", self.sim.newton_tol));
        kv("sim.max_iters", self.sim.max_newton_iters.to_string());
        kv("sim.jacobian", self.sim.jacobian.as_str().into());
        kv("sim.viscosity", format!("{:?}", self.sim.viscosity));
        kv("output.dir", self.output_dir.display().to_string());
        kv("output.every", self.sim.output_every.to_string());
        kv("curve.N", self.curves.len().to_string());
        for (i, c) in self.curves.iter().enumerate() {
            let cells: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            kv(&format!("curve.{i}.cells"), cells.join(", "));
        }
        s
    }
}
