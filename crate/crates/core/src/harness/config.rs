//! Run settings shared by the CLI, the config file and the service.
//!
//! The config file is flat `key = value` text, one setting per line, with
//! `#` comments. Keys mirror the CLI flags (`external-cmd` and
//! `external_cmd` are both accepted).

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::acq::Strategy;
use crate::discretize::DiscretizerKind;
use crate::error::{Error, Result};
use crate::problems::{ProblemKind, ProblemSpec, DEFAULT_EXTERNAL_TIMEOUT};
use crate::space::{Bounds, ObjectiveSense};

pub const DEFAULT_OUT_DIR: &str = "results";

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    /// Comma-separated list.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Comma-separated list.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acq: Option<String>,
    /// Comma-separated list.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disc: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallel: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external_cmd: Option<PathBuf>,
    /// Seconds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sense: Option<ObjectiveSense>,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value {v:?} for {key}")))
}

fn list(v: &str) -> Vec<&str> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

impl RunSettings {
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for (k, v) in parse_kv(text)? {
            s.set(&k, &v)?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key.replace('-', "_").as_str() {
            "problem" => self.problem = Some(v.to_string()),
            "dim" => self.dim = Some(parse(key, v)?),
            "acq" => self.acq = Some(v.to_string()),
            "disc" => self.disc = Some(v.to_string()),
            "budget" => self.budget = Some(parse(key, v)?),
            "batch" => self.batch = Some(parse(key, v)?),
            "init" => self.init = Some(parse(key, v)?),
            "reps" => self.reps = Some(parse(key, v)?),
            "seed" => self.seed = Some(parse(key, v)?),
            "out" => self.out = Some(PathBuf::from(v)),
            "parallel" => self.parallel = Some(parse(key, v)?),
            "external_cmd" => self.external_cmd = Some(PathBuf::from(v)),
            "timeout" => self.timeout = Some(parse(key, v)?),
            "candidates" => self.candidates = Some(parse(key, v)?),
            "lower" => self.lower = Some(parse(key, v)?),
            "upper" => self.upper = Some(parse(key, v)?),
            "sense" => {
                self.sense = Some(match v.to_ascii_lowercase().as_str() {
                    "min" | "minimize" => ObjectiveSense::Minimize,
                    "max" | "maximize" => ObjectiveSense::Maximize,
                    _ => return Err(Error::Config(format!("invalid value {v:?} for sense"))),
                })
            }
            _ => return Err(Error::Config(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Values present in `top` win.
    pub fn overlay(self, top: RunSettings) -> RunSettings {
        RunSettings {
            problem: top.problem.or(self.problem),
            dim: top.dim.or(self.dim),
            acq: top.acq.or(self.acq),
            disc: top.disc.or(self.disc),
            budget: top.budget.or(self.budget),
            batch: top.batch.or(self.batch),
            init: top.init.or(self.init),
            reps: top.reps.or(self.reps),
            seed: top.seed.or(self.seed),
            out: top.out.or(self.out),
            parallel: top.parallel.or(self.parallel),
            external_cmd: top.external_cmd.or(self.external_cmd),
            timeout: top.timeout.or(self.timeout),
            candidates: top.candidates.or(self.candidates),
            lower: top.lower.or(self.lower),
            upper: top.upper.or(self.upper),
            sense: top.sense.or(self.sense),
        }
    }

    pub fn parallelism(&self) -> usize {
        self.parallel.unwrap_or(1).max(1)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    fn problem_spec(&self, kind: ProblemKind, dim: usize) -> Result<ProblemSpec> {
        if kind != ProblemKind::External {
            return ProblemSpec::from_kind(kind, dim);
        }
        let cmd = self
            .external_cmd
            .clone()
            .ok_or_else(|| Error::Config("problem external needs external-cmd".into()))?;
        let timeout = match self.timeout {
            Some(t) if t > 0.0 && t.is_finite() => Duration::from_secs_f64(t),
            Some(t) => return Err(Error::Config(format!("invalid timeout {t}"))),
            None => DEFAULT_EXTERNAL_TIMEOUT,
        };
        let bounds = Bounds::uniform(dim, self.lower.unwrap_or(0.0), self.upper.unwrap_or(1.0))?;
        ProblemSpec::external(
            dim,
            bounds,
            self.sense.unwrap_or(ObjectiveSense::Minimize),
            cmd,
            timeout,
        )
    }

    /// Expands the settings into one config per (problem, acq, disc).
    /// Strategies that fix their own discretizer appear once per problem.
    pub fn configs(&self) -> Result<Vec<ExperimentConfig>> {
        let dim = self.dim.unwrap_or(6);
        if dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        let problems: Vec<ProblemKind> = list(self.problem.as_deref().unwrap_or("rastrigin"))
            .into_iter()
            .map(str::parse)
            .collect::<Result<_>>()?;
        let acqs: Vec<Strategy> = list(self.acq.as_deref().unwrap_or("EEPA+"))
            .into_iter()
            .map(str::parse)
            .collect::<Result<_>>()?;
        let discs: Vec<DiscretizerKind> = list(self.disc.as_deref().unwrap_or("uniform"))
            .into_iter()
            .map(str::parse)
            .collect::<Result<_>>()?;
        if problems.is_empty() || acqs.is_empty() || discs.is_empty() {
            return Err(Error::Config(
                "problem, acq and disc must not be empty".into(),
            ));
        }

        let mut out: Vec<ExperimentConfig> = Vec::new();
        for &p in &problems {
            let spec = self.problem_spec(p, dim)?;
            for &a in &acqs {
                for &d in &discs {
                    let mut cfg = ExperimentConfig::new(spec.clone(), a, d);
                    if let Some(n) = self.init {
                        cfg.n_init = n;
                    }
                    if let Some(b) = self.budget {
                        cfg.budget = b;
                    } else {
                        cfg.budget = cfg.budget.max(cfg.n_init);
                    }
                    if let Some(q) = self.batch {
                        cfg.batch_q = q;
                    }
                    if let Some(r) = self.reps {
                        cfg.replications = r;
                    }
                    if let Some(s) = self.seed {
                        cfg.base_seed = s;
                    }
                    if let Some(c) = self.candidates {
                        cfg.discretizer.n_candidates = c;
                    }
                    cfg.validate()?;
                    let seen = out.iter().any(|o| {
                        o.problem.name == cfg.problem.name
                            && o.acquisition == cfg.acquisition
                            && o.discretizer.kind == cfg.discretizer.kind
                    });
                    if !seen {
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_parsing_skips_comments_and_blanks() {
        let kv = parse_kv("# grid\n\nproblem = levy  # inline\n dim=6\n").unwrap();
        assert_eq!(
            kv,
            vec![
                ("problem".into(), "levy".into()),
                ("dim".into(), "6".into())
            ]
        );
        assert!(parse_kv("no equals sign").is_err());
        assert!(parse_kv(" = 3").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file =
            RunSettings::from_kv_text("problem = levy\nbudget = 50\nexternal-cmd = /bin/x\n")
                .unwrap();
        let flags = RunSettings {
            budget: Some(80),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.problem.as_deref(), Some("levy"));
        assert_eq!(merged.budget, Some(80));
        assert_eq!(merged.external_cmd, Some(PathBuf::from("/bin/x")));
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        assert!(RunSettings::from_kv_text("colour = red").is_err());
        assert!(RunSettings::from_kv_text("dim = six").is_err());
        assert!(RunSettings::from_kv_text("sense = sideways").is_err());
    }

    #[test]
    fn grid_expansion_dedups_fixed_discretizers() {
        let s = RunSettings::from_kv_text(
            "problem = rastrigin, levy\nacq = sEI, DYCORS\ndisc = uniform, sobol\ndim = 2\nreps = 2\n",
        )
        .unwrap();
        let cfgs = s.configs().unwrap();
        // per problem: sEI x 2 discretizers + DYCORS once
        assert_eq!(cfgs.len(), 6);
        assert!(cfgs.iter().all(|c| c.replications == 2 && c.n_init == 6));
    }

    #[test]
    fn external_needs_a_command() {
        let s = RunSettings::from_kv_text("problem = external\ndim = 3").unwrap();
        assert!(s.configs().is_err());
        let s = RunSettings::from_kv_text(
            "problem = external\ndim = 3\nexternal_cmd = ./obj\ntimeout = 5\nlower = -2\nupper = 2",
        )
        .unwrap();
        let cfg = &s.configs().unwrap()[0];
        assert_eq!(cfg.n_init, 4);
        let ext = cfg.problem.external.as_ref().unwrap();
        assert_eq!(ext.timeout, Duration::from_secs(5));
        assert_eq!(cfg.problem.bounds.lower(), &[-2.0; 3]);
    }

    #[test]
    fn settings_round_trip_as_json() {
        let s = RunSettings::from_kv_text("acq = EEPA+\nseed = 7").unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"acq":"EEPA+","seed":7}"#);
        assert_eq!(serde_json::from_str::<RunSettings>(&json).unwrap(), s);
    }
}
