//! `key = value` experiment files.
//!
//! ```text
//! # reference teacher task
//! net.layer_dims = 4,8,8,1
//! optim.schedule = log_power
//! optim.gamma = 0.05
//! steps = 5000
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundInputs;
use crate::error::{Error, Result};
use crate::harness::dataset::{DatasetKind, DatasetSpec};
use crate::optim::{OptimConfig, Schedule};
use crate::relunet::NetConfig;

pub const REPORT_DIR_ENV: &str = "RELULAB_REPORT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AuditKind {
    L1,
    L2,
    L3,
    L4,
    L5,
    L6,
    L7,
    #[serde(rename = "bounds")]
    Bounds,
    #[serde(rename = "barrier")]
    Barrier,
    #[serde(rename = "kakeya")]
    Kakeya,
}

impl AuditKind {
    pub const ALL: [AuditKind; 10] = [
        AuditKind::L1,
        AuditKind::L2,
        AuditKind::L3,
        AuditKind::L4,
        AuditKind::L5,
        AuditKind::L6,
        AuditKind::L7,
        AuditKind::Bounds,
        AuditKind::Barrier,
        AuditKind::Kakeya,
    ];
}

impl FromStr for AuditKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "L1" => AuditKind::L1,
            "L2" => AuditKind::L2,
            "L3" => AuditKind::L3,
            "L4" => AuditKind::L4,
            "L5" => AuditKind::L5,
            "L6" => AuditKind::L6,
            "L7" => AuditKind::L7,
            "bounds" => AuditKind::Bounds,
            "barrier" => AuditKind::Barrier,
            "kakeya" => AuditKind::Kakeya,
            other => return Err(Error::Config(format!("unknown audit {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub net: NetConfig,
    pub optim: OptimConfig,
    pub dataset: DatasetSpec,
    pub steps: u64,
    /// Upper limit on the probe set; the whole training set is used when it fits.
    pub probe_size: usize,
    /// Output location only; left out of serialized reports so they do not
    /// depend on where a run was written.
    #[serde(skip)]
    pub report_dir: Option<PathBuf>,
    pub audits: BTreeSet<AuditKind>,
    /// Steps between effective-dimension and noise refreshes.
    pub window: usize,
    /// Per-segment resolution of the trajectory path audit.
    pub path_resolution: usize,
    /// Values that replace measured constants in the bound report.
    pub bound_overrides: BTreeMap<String, serde_json::Value>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            net: NetConfig {
                layer_dims: vec![4, 8, 8, 1],
                init_scale: 1.0,
                seed: 0,
            },
            optim: OptimConfig::default(),
            dataset: DatasetSpec::default(),
            steps: 1000,
            probe_size: 256,
            report_dir: None,
            audits: AuditKind::ALL.into_iter().collect(),
            window: crate::trace::DEFF_WINDOW,
            path_resolution: 4,
            bound_overrides: BTreeMap::new(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

/// A bound override value: a number, or a comma list for `eps_adv`.
pub fn parse_override_value(key: &str, v: &str) -> Result<serde_json::Value> {
    let nums: Vec<f64> = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect::<Result<_>>()?;
    if key == "eps_adv" {
        return Ok(serde_json::json!(nums));
    }
    match nums.as_slice() {
        [x] => Ok(serde_json::json!(x)),
        _ => Err(Error::Config(format!("bounds.{key}: expected one number"))),
    }
}

/// Replaces fields of `inputs` by name, rejecting unknown names.
pub fn apply_bound_overrides(inputs: &BoundInputs, overrides: &BTreeMap<String, serde_json::Value>) -> Result<BoundInputs> {
    if overrides.is_empty() {
        return Ok(inputs.clone());
    }
    let mut v = serde_json::to_value(inputs)?;
    let obj = v.as_object_mut().expect("BoundInputs serializes to an object");
    for (k, val) in overrides {
        obj.insert(k.clone(), val.clone());
    }
    serde_json::from_value(v).map_err(|e| Error::Config(format!("bound override: {e}")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeSet::new();
        let mut schedule_kind = None;
        let mut sched: BTreeMap<&str, f64> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            cfg.set(key, value, &mut schedule_kind, &mut sched)
                .map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("line {}: {m}", lineno + 1)),
                    other => other,
                })?;
        }
        cfg.finish_schedule(schedule_kind, &sched)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Applies `key = value` overrides on top of a parsed config.
    pub fn with_overrides(mut self, pairs: &[(String, String)]) -> Result<Self> {
        let mut kind = None;
        let mut sched = BTreeMap::new();
        for (k, v) in pairs {
            self.set(k, v, &mut kind, &mut sched)?;
        }
        if kind.is_some() || !sched.is_empty() {
            self.finish_schedule(kind, &sched)?;
        }
        self.validate()?;
        Ok(self)
    }

    /// `RELULAB_REPORT_DIR` wins over the file.
    pub fn resolve_report_dir(&mut self, env_value: Option<String>) {
        if let Some(dir) = env_value.filter(|s| !s.is_empty()) {
            self.report_dir = Some(PathBuf::from(dir));
        }
    }

    fn set<'k>(
        &mut self,
        key: &'k str,
        value: &str,
        schedule_kind: &mut Option<String>,
        sched: &mut BTreeMap<&'k str, f64>,
    ) -> Result<()> {
        match key {
            "net.layer_dims" => {
                self.net.layer_dims = value
                    .split(',')
                    .map(|s| parse_num(key, s))
                    .collect::<Result<_>>()?;
            }
            "net.init_scale" => self.net.init_scale = parse_num(key, value)?,
            "net.seed" => self.net.seed = parse_num(key, value)?,
            "optim.beta1" => self.optim.beta1 = parse_num(key, value)?,
            "optim.beta2" => self.optim.beta2 = parse_num(key, value)?,
            "optim.epsilon" => self.optim.epsilon = parse_num(key, value)?,
            "optim.weight_decay" => self.optim.weight_decay = parse_num(key, value)?,
            "optim.decoupled" => self.optim.decoupled = parse_bool(key, value)?,
            "optim.schedule" => *schedule_kind = Some(value.to_string()),
            "optim.gamma" | "optim.kappa" | "optim.c" | "optim.eta" => {
                sched.insert(&key[6..], parse_num(key, value)?);
            }
            "dataset.kind" => {
                self.dataset.kind = match value {
                    "gaussian_blobs" => DatasetKind::GaussianBlobs,
                    "teacher_net" => DatasetKind::TeacherNet,
                    "xor_ring" => DatasetKind::XorRing,
                    _ => return Err(Error::Config(format!("unknown dataset kind {value:?}"))),
                }
            }
            "dataset.n_samples" => self.dataset.n_samples = parse_num(key, value)?,
            "dataset.noise" => self.dataset.noise = parse_num(key, value)?,
            "dataset.seed" => self.dataset.seed = parse_num(key, value)?,
            "steps" => self.steps = parse_num(key, value)?,
            "probe_size" => self.probe_size = parse_num(key, value)?,
            "window" => self.window = parse_num(key, value)?,
            "path_resolution" => self.path_resolution = parse_num(key, value)?,
            "report_dir" => {
                self.report_dir = (!value.is_empty()).then(|| PathBuf::from(value));
            }
            "audits" => {
                self.audits = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?;
            }
            _ => match key.strip_prefix("bounds.") {
                Some(field) => {
                    let v = parse_override_value(field, value)?;
                    self.bound_overrides.insert(field.to_string(), v);
                    // Surface unknown names now rather than at the end of a run.
                    apply_bound_overrides(&BoundInputs::default(), &self.bound_overrides)?;
                }
                None => return Err(Error::Config(format!("unknown key {key:?}"))),
            },
        }
        Ok(())
    }

    fn finish_schedule(&mut self, kind: Option<String>, vals: &BTreeMap<&str, f64>) -> Result<()> {
        let kind = kind.unwrap_or_else(|| match self.optim.schedule {
            Schedule::LogPower { .. } => "log_power".into(),
            Schedule::Power { .. } => "power".into(),
        });
        let get = |k: &str, default: f64| vals.get(k).copied().unwrap_or(default);
        self.optim.schedule = match (kind.as_str(), self.optim.schedule) {
            ("log_power", Schedule::LogPower { gamma, kappa }) => Schedule::LogPower {
                gamma: get("gamma", gamma),
                kappa: get("kappa", kappa),
            },
            ("log_power", _) => Schedule::LogPower {
                gamma: get("gamma", 0.05),
                kappa: get("kappa", 0.5),
            },
            ("power", Schedule::Power { c, eta }) => Schedule::Power {
                c: get("c", c),
                eta: get("eta", eta),
            },
            ("power", _) => Schedule::Power {
                c: get("c", 0.01),
                eta: get("eta", 0.75),
            },
            (other, _) => return Err(Error::Config(format!("unknown schedule {other:?}"))),
        };
        let misplaced = match self.optim.schedule {
            Schedule::LogPower { .. } => ["c", "eta"],
            Schedule::Power { .. } => ["gamma", "kappa"],
        };
        if let Some(k) = misplaced.iter().find(|k| vals.contains_key(*k)) {
            return Err(Error::Config(format!("optim.{k} does not apply to the {kind} schedule")));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.optim
            .validate()
            .map_err(|e| Error::Config(format!("optim: {e}")))?;
        self.dataset.validate()?;
        if self.steps < 1 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.probe_size < 1 {
            return Err(Error::Config("probe_size must be >= 1".into()));
        }
        if self.window < 2 {
            return Err(Error::Config("window must be >= 2".into()));
        }
        if self.path_resolution < 2 {
            return Err(Error::Config("path_resolution must be >= 2".into()));
        }
        Ok(())
    }

    /// Key identifying runs on the same task, for the shared reference loss.
    pub fn task_key(&self) -> String {
        let d = &self.dataset;
        format!(
            "{:?}/n{}/noise{}/seed{}/dims{:?}",
            d.kind, d.n_samples, d.noise, d.seed, self.net.layer_dims
        )
    }
}
