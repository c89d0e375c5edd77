//! Flat run configuration: one `key = value` per line, `#` starts a comment.
//!
//! ```text
//! p = 3
//! n = 1
//! k = 2
//! cells = 1000
//! L = 20
//! t_end = 250
//! snapshots = log:0.25:250:13
//! preset = bump
//! weights = 3, 4
//! centers = -0.5; 0.5
//! ```
//!
//! Required keys: `p`, `n`, `k`, `cells`, `L`, `t_end`. Everything else has a
//! default; unknown and repeated keys are rejected.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::{Grid, SystemParams};
use crate::solver::{InitialPreset, PresetKind, SolverConfig};

pub const DEFAULT_CFL: f64 = 0.4;
pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotSchedule {
    List(Vec<f64>),
    /// `count` log-spaced times from `start` to `end` inclusive.
    Log { start: f64, end: f64, count: usize },
}

impl SnapshotSchedule {
    pub fn times(&self) -> Vec<f64> {
        match *self {
            SnapshotSchedule::List(ref v) => v.clone(),
            SnapshotSchedule::Log { start, end, count } => {
                if count == 1 {
                    return vec![end];
                }
                let ratio = (end / start).ln();
                (0..count)
                    .map(|i| {
                        if i + 1 == count {
                            end
                        } else {
                            start * (ratio * i as f64 / (count - 1) as f64).exp()
                        }
                    })
                    .collect()
            }
        }
    }

    fn render(&self) -> String {
        match self {
            SnapshotSchedule::List(v) => join(v, ", "),
            SnapshotSchedule::Log { start, end, count } => format!("log:{start}:{end}:{count}"),
        }
    }
}

impl FromStr for SnapshotSchedule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(rest) = s.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err("log schedule must read log:t0:t1:count".into());
            }
            let start: f64 = parse_num(parts[0])?;
            let end: f64 = parse_num(parts[1])?;
            let count: usize = parse_num(parts[2])?;
            if !(start > 0.0 && end > start) || count == 0 {
                return Err(format!("log schedule needs 0 < t0 < t1 and count >= 1, got {s}"));
            }
            Ok(SnapshotSchedule::Log { start, end, count })
        } else {
            Ok(SnapshotSchedule::List(parse_list(s)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p: f64,
    pub n: usize,
    pub k: usize,
    pub cells: Vec<usize>,
    pub half_extent: f64,
    pub t_end: f64,
    pub epsilon: f64,
    pub cfl_safety: f64,
    pub seed: u64,
    pub max_steps: u64,
    pub log_interval: u64,
    pub snapshots: SnapshotSchedule,
    pub preset: PresetKind,
    pub weights: Vec<f64>,
    pub centers: Vec<[f64; 2]>,
    pub width: f64,
    pub mass: Option<f64>,
    pub t0: f64,
    pub out: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "p", "n", "k", "cells", "L", "t_end", "epsilon", "cfl_safety", "seed", "max_steps", "log_interval",
    "snapshots", "preset", "weights", "centers", "width", "mass", "t0", "out",
];

fn parse_num<T: FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("cannot parse {:?} as {}", s.trim(), std::any::type_name::<T>()))
}

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_num).collect()
}

fn parse_centers(s: &str) -> std::result::Result<Vec<[f64; 2]>, String> {
    s.split(';')
        .map(|c| {
            let xs: Vec<f64> = c.split_whitespace().map(parse_num).collect::<std::result::Result<_, _>>()?;
            match xs.as_slice() {
                [x] => Ok([*x, 0.0]),
                [x, y] => Ok([*x, *y]),
                _ => Err(format!("a centre has one or two coordinates, got {:?}", c.trim())),
            }
        })
        .collect()
}

fn join<T: std::fmt::Display>(v: &[T], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

impl RunConfig {
    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.p, self.n, self.k, self.epsilon)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, &self.cells, self.half_extent)
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.times()
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        Ok(SolverConfig::new(self.cfl_safety, self.t_end, self.max_steps, self.snapshot_times())?
            .with_log_interval(self.log_interval))
    }

    pub fn initial_preset(&self) -> InitialPreset {
        InitialPreset {
            kind: self.preset,
            weights: self.weights.clone(),
            centers: self.centers.clone(),
            width: self.width,
            total_mass: self.mass,
            t0: self.t0,
            seed: self.seed,
        }
    }

    /// Flat text that parses back to an equal configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "cells = {}", join(&self.cells, ", "));
        let _ = writeln!(s, "L = {}", self.half_extent);
        let _ = writeln!(s, "t_end = {}", self.t_end);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "cfl_safety = {}", self.cfl_safety);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "max_steps = {}", self.max_steps);
        let _ = writeln!(s, "log_interval = {}", self.log_interval);
        let _ = writeln!(s, "snapshots = {}", self.snapshots.render());
        let _ = writeln!(s, "preset = {}", self.preset.name());
        let _ = writeln!(s, "weights = {}", join(&self.weights, ", "));
        let centers: Vec<String> = self
            .centers
            .iter()
            .map(|c| if self.n == 1 { c[0].to_string() } else { format!("{} {}", c[0], c[1]) })
            .collect();
        let _ = writeln!(s, "centers = {}", centers.join("; "));
        let _ = writeln!(s, "width = {}", self.width);
        if let Some(m) = self.mass {
            let _ = writeln!(s, "mass = {m}");
        }
        let _ = writeln!(s, "t0 = {}", self.t0);
        if let Some(o) = &self.out {
            let _ = writeln!(s, "out = {}", o.display());
        }
        s
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_config(s)
    }
}

struct Entries {
    values: HashMap<&'static str, (usize, String)>,
}

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.values.get(key).map_or(0, |(l, _)| *l)
    }

    fn get<T, F>(&self, key: &str, parse: F) -> Result<Option<T>>
    where
        F: Fn(&str) -> std::result::Result<T, String>,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => parse(v).map(Some).map_err(|message| Error::Config {
                line: *line,
                message: format!("{key}: {message}"),
            }),
        }
    }

    fn required<T, F>(&self, key: &str, parse: F) -> Result<T>
    where
        F: Fn(&str) -> std::result::Result<T, String>,
    {
        self.get(key, parse)?.ok_or_else(|| Error::Config {
            line: 0,
            message: format!("missing required key {key}"),
        })
    }

    /// Attach the line of `key` to a validation error.
    fn at<T>(&self, key: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| Error::Config {
            line: self.line(key),
            message: match e {
                Error::InvalidParameter(m) => m,
                other => other.to_string(),
            },
        })
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut values = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got {content:?}"),
        })?;
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(Error::Config {
                line,
                message: format!("unknown key {key:?}"),
            });
        };
        if values.insert(known, (line, value.trim().to_string())).is_some() {
            return Err(Error::Config {
                line,
                message: format!("repeated key {key:?}"),
            });
        }
    }
    let e = Entries { values };

    let p: f64 = e.required("p", parse_num)?;
    let n: usize = e.required("n", parse_num)?;
    let k: usize = e.required("k", parse_num)?;
    let cells: Vec<usize> = e.required("cells", parse_list)?;
    let half_extent: f64 = e.required("L", parse_num)?;
    let t_end: f64 = e.required("t_end", parse_num)?;
    let preset = e
        .get("preset", |s| PresetKind::parse(s).ok_or_else(|| format!("unknown preset {s:?}")))?
        .unwrap_or(PresetKind::Bump);
    let cfg = RunConfig {
        p,
        n,
        k,
        cells,
        half_extent,
        t_end,
        epsilon: e.get("epsilon", parse_num)?.unwrap_or(0.0),
        cfl_safety: e.get("cfl_safety", parse_num)?.unwrap_or(DEFAULT_CFL),
        seed: e.get("seed", parse_num)?.unwrap_or(0),
        max_steps: e.get("max_steps", parse_num)?.unwrap_or(DEFAULT_MAX_STEPS),
        log_interval: e.get("log_interval", parse_num)?.unwrap_or(1),
        snapshots: e
            .get("snapshots", |s| s.parse())?
            .unwrap_or_else(|| SnapshotSchedule::List(vec![t_end])),
        preset,
        weights: e.get("weights", parse_list)?.unwrap_or_else(|| vec![1.0; k]),
        centers: e.get("centers", parse_centers)?.unwrap_or_else(|| vec![[0.0, 0.0]]),
        width: e.get("width", parse_num)?.unwrap_or(1.0),
        mass: e.get("mass", parse_num)?,
        t0: e.get("t0", parse_num)?.unwrap_or(1.0),
        out: e.get("out", |s| Ok(PathBuf::from(s)))?,
    };

    let params = e.at("p", cfg.params())?;
    e.at("cells", cfg.grid())?;
    if cfg.log_interval == 0 {
        return Err(Error::Config {
            line: e.line("log_interval"),
            message: "log_interval must be at least 1".into(),
        });
    }
    let sc = SolverConfig::new(cfg.cfl_safety, cfg.t_end, cfg.max_steps, cfg.snapshot_times());
    let key = match &sc {
        Err(Error::InvalidParameter(m)) if m.starts_with("cfl") => "cfl_safety",
        Err(Error::InvalidParameter(m)) if m.starts_with("t_end") => "t_end",
        _ => "snapshots",
    };
    e.at(key, sc)?;
    let preset_key = if cfg.weights.len() != params.k || cfg.weights.iter().any(|w| !(*w >= 0.0)) || cfg.weights.iter().all(|w| *w == 0.0) {
        "weights"
    } else if cfg.centers.len() != 1 && cfg.centers.len() != params.k {
        "centers"
    } else if !(cfg.width > 0.0) {
        "width"
    } else if cfg.mass.is_some() {
        "mass"
    } else {
        "t0"
    };
    e.at(preset_key, cfg.initial_preset().validate(params.k))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "p = 3\nn = 1\nk = 2\ncells = 800\nL = 10\nt_end = 5\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.cfl_safety, 0.4);
        assert_eq!(c.epsilon, 0.0);
        assert_eq!(c.seed, 0);
        assert_eq!(c.weights, vec![1.0, 1.0]);
        assert_eq!(c.preset, PresetKind::Bump);
        assert_eq!(c.snapshot_times(), vec![5.0]);
        c.solver_config().unwrap();
        c.grid().unwrap();
    }

    #[test]
    fn rejects_bad_p_with_line() {
        let err = parse_config(&MINIMAL.replace("p = 3", "p = 1.5")).unwrap_err();
        match err {
            Error::Config { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("p must exceed 2"), "{message}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        let e = parse_config(&format!("{MINIMAL}# fine\ncolour = red\n")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 8, .. }), "{e:?}");
        let e = parse_config(&format!("{MINIMAL}k = 3\n")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 7, .. }), "{e:?}");
        let e = parse_config(&MINIMAL.replace("t_end = 5\n", "")).unwrap_err();
        assert!(e.to_string().contains("t_end"));
        let e = parse_config(&MINIMAL.replace("k = 2", "k = two")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn zero_weights_are_rejected() {
        let e = parse_config(&format!("{MINIMAL}weights = 0, 0\n")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 7, .. }), "{e:?}");
    }

    #[test]
    fn log_schedule() {
        let s: SnapshotSchedule = "log:0.25:250:4".parse().unwrap();
        let t = s.times();
        assert_eq!(t.len(), 4);
        assert_eq!(t[0], 0.25);
        assert_eq!(t[3], 250.0);
        assert!((t[1] - 2.5).abs() < 1e-12 && (t[2] - 25.0).abs() < 1e-10);
        assert!("log:1:0.5:3".parse::<SnapshotSchedule>().is_err());
        assert!("log:1:2".parse::<SnapshotSchedule>().is_err());
    }

    #[test]
    fn round_trip() {
        let text = "# run
p = 3.5
n = 2
k = 2
cells = 64, 32
L = 4.25
t_end = 2
epsilon = 1e-3
seed = 17
snapshots = log:0.1:2:5
preset = random-compact
weights = 3, 4
centers = -0.5 0.25; 0.5 -0.125
width = 0.75
mass = 5
out = runs/a
";
        let c = parse_config(text).unwrap();
        assert_eq!(c.centers, vec![[-0.5, 0.25], [0.5, -0.125]]);
        let again = parse_config(&c.to_text()).unwrap();
        assert_eq!(c, again);
        let list = parse_config(&format!("{MINIMAL}snapshots = 0.1, 0.7, 5\ncenters = -1; 1\n")).unwrap();
        assert_eq!(parse_config(&list.to_text()).unwrap(), list);
    }
}
