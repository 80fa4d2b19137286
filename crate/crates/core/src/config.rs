//! `key = value` run configuration.
//!
//! ```text
//! # synthetic population
//! synth.n = 6000
//! synth.k = 30
//! techniques = extrapolation, augmentation, gc1, gc2, gc3
//! seed = 42
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown and duplicate keys are
//! errors. Relative `data.path` and `out.dir` values are resolved against the
//! config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::dataset::{CsvRoles, RejectionConfig};
use crate::error::{Error, Result};
use crate::pipeline::{default_grid, default_techniques, DataSource, ExperimentConfig};
use crate::reject_inference::{ReclassCutoff, Technique, TechniqueConfig};
use crate::scoring::SolverOptions;

pub const KEYS: &[&str] = &[
    "data.path",
    "data.outcome",
    "data.decision",
    "synth.n",
    "synth.k",
    "synth.good_rate",
    "reject.simulate",
    "reject.rate",
    "reject.extra_fraction",
    "split.a1",
    "split.estimation",
    "split.stratify",
    "techniques",
    "lambda",
    "bands",
    "reclass.cutoff",
    "parcel.kappa",
    "control.fraction",
    "solver.tolerance",
    "solver.max_iterations",
    "operating.a",
    "grid",
    "gini.bands",
    "seed",
    "out.dir",
    "plot",
    "verbosity",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub out_dir: PathBuf,
    pub plot: bool,
    pub verbosity: u8,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

fn config_error(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<(usize, T)>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(|x| Some((line, x)))
                .map_err(|e| config_error(line, key, format!("malformed value `{v}`: {e}"))),
        }
    }

    fn real(&self, key: &str, default: f64, valid: impl Fn(f64) -> bool, range: &str) -> Result<f64> {
        match self.parse::<f64>(key)? {
            None => Ok(default),
            Some((line, v)) if valid(v) => {
                let _ = line;
                Ok(v)
            }
            Some((line, v)) => Err(config_error(line, key, format!("value {v} is out of range {range}"))),
        }
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize> {
        match self.parse::<usize>(key)? {
            None => Ok(default),
            Some((_, v)) if v >= min => Ok(v),
            Some((line, v)) => Err(config_error(line, key, format!("value {v} is below {min}"))),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some((_, "true" | "yes" | "on" | "1")) => Ok(true),
            Some((_, "false" | "no" | "off" | "0")) => Ok(false),
            Some((line, v)) => Err(config_error(line, key, format!("malformed boolean `{v}`"))),
        }
    }
}

fn in_open_unit(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_error(line, content, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(config_error(line, key, "unknown key"));
        }
        if value.is_empty() {
            return Err(config_error(line, key, "empty value"));
        }
        if let Some((first, _)) = map.insert(key.to_string(), (line, value.to_string())) {
            return Err(config_error(
                line,
                key,
                format!("duplicate key (first set on line {first})"),
            ));
        }
    }
    let e = Entries { map };

    let master_seed = e
        .parse::<u64>("seed")?
        .map(|(_, s)| s)
        .ok_or_else(|| config_error(0, "seed", "missing required key"))?;

    let source = match (e.raw("data.path"), e.raw("synth.n")) {
        (Some((line, _)), Some(_)) => {
            return Err(config_error(
                line,
                "data.path",
                "data.path and synth.n are mutually exclusive",
            ))
        }
        (None, None) => return Err(config_error(0, "synth.n", "missing data source (data.path or synth.n)")),
        (Some((_, p)), None) => {
            let p = PathBuf::from(p);
            DataSource::Csv {
                path: if p.is_relative() { base_dir.join(p) } else { p },
                roles: CsvRoles {
                    outcome: e.raw("data.outcome").map_or("outcome".into(), |(_, v)| v.to_string()),
                    decision: e.raw("data.decision").map(|(_, v)| v.to_string()),
                },
            }
        }
        (None, Some(_)) => DataSource::Synthetic {
            n: e.count("synth.n", 0, 10)?,
            k: e.count("synth.k", 30, 1)?,
            good_rate: e.real("synth.good_rate", 0.9, in_open_unit, "(0, 1)")?,
        },
    };
    let synthetic = matches!(source, DataSource::Synthetic { .. });

    let rejection = if e.flag("reject.simulate", synthetic)? {
        Some(RejectionConfig {
            rate: e.real("reject.rate", 0.05, |v| v > 0.0 && v < 0.5, "(0, 0.5)")?,
            extra_fraction: e.real("reject.extra_fraction", 0.10, |v| (0.0..=1.0).contains(&v), "[0, 1]")?,
        })
    } else {
        None
    };

    let technique_list = match e.raw("techniques") {
        None => default_techniques(),
        Some((line, v)) => v
            .split(',')
            .map(|t| {
                t.parse::<Technique>()
                    .map_err(|err| config_error(line, "techniques", err.to_string()))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let reclass_cutoff = match e.raw("reclass.cutoff") {
        Some((_, "prior" | "prior-matched")) => ReclassCutoff::PriorMatched,
        _ => ReclassCutoff::Fixed(e.real("reclass.cutoff", 0.5, in_open_unit, "(0, 1)")?),
    };
    let lambda = e.real("lambda", 1.0, |v| v >= 0.0 && v.is_finite(), "[0, inf)")?;
    let bands = e.count("bands", 20, 1)?;
    let kappa = e.real("parcel.kappa", 2.0, |v| v > 0.0 && v.is_finite(), "(0, inf)")?;
    let control_fraction = e.real("control.fraction", 0.30, |v| v > 0.0 && v <= 1.0, "(0, 1]")?;
    let solver = SolverOptions {
        tolerance: e.real("solver.tolerance", 1e-8, |v| v > 0.0 && v.is_finite(), "(0, inf)")?,
        max_iterations: e.count("solver.max_iterations", 500, 1)?,
    };
    let techniques = technique_list
        .into_iter()
        .map(|t| TechniqueConfig {
            bands,
            reclass_cutoff,
            kappa,
            control_fraction,
            lambda,
            solver,
            ..TechniqueConfig::new(t)
        })
        .collect();

    let grid = match e.raw("grid") {
        None => default_grid(),
        Some((line, v)) => {
            let g = v
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|err| config_error(line, "grid", format!("malformed value: {err}")))?;
            if g.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
                return Err(config_error(line, "grid", "rates must lie in (0, 1]"));
            }
            if g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(config_error(line, "grid", "rates must be strictly increasing"));
            }
            g
        }
    };
    let operating_rate = e.real("operating.a", 0.8, |v| v > 0.0 && v <= 1.0, "(0, 1]")?;
    if !grid.iter().any(|a| (a - operating_rate).abs() < 1e-12) {
        let line = e.raw("operating.a").map_or(0, |(l, _)| l);
        return Err(config_error(
            line,
            "operating.a",
            format!("{operating_rate} is not a grid point"),
        ));
    }

    let experiment = ExperimentConfig {
        source,
        rejection,
        a1_fraction: e.real("split.a1", 0.7, in_open_unit, "(0, 1)")?,
        estimation_fraction: e.real("split.estimation", 2.0 / 3.0, in_open_unit, "(0, 1)")?,
        stratify: e.flag("split.stratify", true)?,
        techniques,
        operating_rate,
        grid,
        gini_bands: e.count("gini.bands", 20, 1)?,
        master_seed,
    };
    if let Err(err) = experiment.validate() {
        return Err(config_error(0, "techniques", err.to_string()));
    }
    Ok(RunConfig {
        experiment,
        out_dir: base_dir.join(e.raw("out.dir").map_or("out", |(_, v)| v)),
        plot: e.flag("plot", true)?,
        verbosity: e.count("verbosity", 0, 0)?.min(u8::MAX as usize) as u8,
    })
}
