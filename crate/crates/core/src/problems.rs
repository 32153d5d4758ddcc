//! Benchmark objectives and the subprocess objective protocol.
//!
//! Subprocess protocol: the executable receives one line of space-separated
//! decimal coordinates on stdin and must print the objective value as the
//! first token on stdout, exiting with status 0 before the timeout.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::space::{Bounds, ObjectiveSense};

pub const DEFAULT_EXTERNAL_TIMEOUT: Duration = Duration::from_secs(300);

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

pub fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let head = (PI * w[0]).sin().powi(2);
    let body: f64 = w[..d - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let wd = w[d - 1];
    let tail = (wd - 1.0).powi(2) * (1.0 + (2.0 * PI * wd).sin().powi(2));
    head + body + tail
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Rastrigin,
    Rosenbrock,
    Levy,
    External,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Rastrigin => "rastrigin",
            ProblemKind::Rosenbrock => "rosenbrock",
            ProblemKind::Levy => "levy",
            ProblemKind::External => "external",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rastrigin" => Ok(ProblemKind::Rastrigin),
            "rosenbrock" => Ok(ProblemKind::Rosenbrock),
            "levy" => Ok(ProblemKind::Levy),
            "external" => Ok(ProblemKind::External),
            other => Err(Error::Config(format!("unknown problem {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalCommand {
    pub program: PathBuf,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: ProblemKind,
    pub dim: usize,
    pub bounds: Bounds,
    pub sense: ObjectiveSense,
    pub known_optimum: Option<(Vec<f64>, f64)>,
    pub external: Option<ExternalCommand>,
}

impl ProblemSpec {
    pub fn rastrigin(dim: usize) -> Result<Self> {
        Self::synthetic(ProblemKind::Rastrigin, dim, -5.12, 5.12, 0.0)
    }

    pub fn rosenbrock(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(
                "Rosenbrock needs at least 2 dimensions".into(),
            ));
        }
        Self::synthetic(ProblemKind::Rosenbrock, dim, -5.0, 10.0, 1.0)
    }

    pub fn levy(dim: usize) -> Result<Self> {
        Self::synthetic(ProblemKind::Levy, dim, -10.0, 10.0, 1.0)
    }

    fn synthetic(name: ProblemKind, dim: usize, lo: f64, hi: f64, opt: f64) -> Result<Self> {
        Ok(Self {
            name,
            dim,
            bounds: Bounds::uniform(dim, lo, hi)?,
            sense: ObjectiveSense::Minimize,
            known_optimum: Some((vec![opt; dim], 0.0)),
            external: None,
        })
    }

    pub fn external(
        dim: usize,
        bounds: Bounds,
        sense: ObjectiveSense,
        program: impl Into<PathBuf>,
        timeout: Duration,
    ) -> Result<Self> {
        if bounds.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bounds.dim(),
            });
        }
        Ok(Self {
            name: ProblemKind::External,
            dim,
            bounds,
            sense,
            known_optimum: None,
            external: Some(ExternalCommand {
                program: program.into(),
                timeout,
            }),
        })
    }

    pub fn from_kind(kind: ProblemKind, dim: usize) -> Result<Self> {
        match kind {
            ProblemKind::Rastrigin => Self::rastrigin(dim),
            ProblemKind::Rosenbrock => Self::rosenbrock(dim),
            ProblemKind::Levy => Self::levy(dim),
            ProblemKind::External => Err(Error::Config(
                "external problems need a command; use ProblemSpec::external".into(),
            )),
        }
    }

    /// Evaluates at a problem-space point.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let v = match self.name {
            ProblemKind::Rastrigin => rastrigin(x),
            ProblemKind::Rosenbrock => rosenbrock(x),
            ProblemKind::Levy => levy(x),
            ProblemKind::External => {
                let cmd = self
                    .external
                    .as_ref()
                    .ok_or_else(|| Error::Config("external problem without command".into()))?;
                external_objective(cmd, x)?
            }
        };
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("objective returned {v}")));
        }
        Ok(v)
    }

    /// Evaluates at a unit-cube point.
    pub fn evaluate_unit(&self, u: &[f64]) -> Result<f64> {
        self.evaluate(&self.bounds.from_unit(u))
    }
}

/// Runs one evaluation through the subprocess protocol.
pub fn external_objective(cmd: &ExternalCommand, x: &[f64]) -> Result<f64> {
    let mut child = Command::new(&cmd.program)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| Error::Evaluation(format!("cannot spawn {}: {e}", cmd.program.display())))?;

    let line = x
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ");
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        // a child that never reads its input is not an error by itself
        let _ = writeln!(stdin, "{line}");
    }
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut buf = String::new();
        stdout.read_to_string(&mut buf).map(|_| buf)
    });

    let status = match child.wait_timeout(cmd.timeout)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::Timeout(cmd.timeout));
        }
    };
    let out = reader
        .join()
        .map_err(|_| Error::Evaluation("stdout reader panicked".into()))??;
    if !status.success() {
        return Err(Error::Evaluation(format!("objective exited with {status}")));
    }
    let token = out
        .split_whitespace()
        .next()
        .ok_or_else(|| Error::Evaluation("objective printed nothing".into()))?;
    let v: f64 = token
        .parse()
        .map_err(|_| Error::Evaluation(format!("cannot parse objective output {token:?}")))?;
    if !v.is_finite() {
        return Err(Error::Evaluation(format!(
            "objective returned non-finite {token:?}"
        )));
    }
    Ok(v)
}
