use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::climb::{InitialControl, OptimizerConfig};
use crate::dynamics::{GamePayoffs, PayoffMatrix, SystemState};
use crate::error::{Error, Result};
use crate::ocp::ProblemSpec;
use crate::odeint::IntegratorConfig;

/// What a scenario runs: one of the control problems, or an uncontrolled
/// side-by-side of the opinion and perfect-information models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Incentive,
    Propaganda,
    Awareness,
    OpinionCompare,
}

impl ScenarioKind {
    pub fn is_optimization(self) -> bool {
        self != ScenarioKind::OpinionCompare
    }
}

/// A complete, serializable run description. Field order here is the
/// canonical order of the TOML form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub problem: ProblemSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ScenarioKind,
    /// Replete payoffs as `[R, S, T, P]`.
    pub a1: [f64; 4],
    /// Deplete payoffs as `[R, S, T, P]`.
    pub a0: [f64; 4],
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// `[x, n]` for incentive runs, `[x, n, o]` otherwise.
    pub initial: Vec<f64>,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub ell_max: u32,
    pub grid_spacing: f64,
    pub initial_control: InitialControl,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            alpha: d.alpha,
            beta: d.beta,
            iters: d.iters,
            ell_max: d.ell_max,
            grid_spacing: d.grid_spacing,
            initial_control: InitialControl::Zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Where `run` writes when no directory is given on the command line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Length of the uncontrolled continuation after the horizon.
    pub tail: f64,
    /// Spacing of the rows in `trajectory.csv` and `costate.csv`.
    pub sample_spacing: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            tail: 0.0,
            sample_spacing: 0.01,
        }
    }
}

/// Prefixes bare constructor field names with their config section.
fn in_section(section: &str, err: Error) -> Error {
    match err {
        Error::InvalidConfig { field, reason } if !field.contains('.') => Error::InvalidConfig {
            field: format!("{section}.{field}"),
            reason,
        },
        other => other,
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: impl Into<PathBuf>) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: origin.into(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn payoffs(&self) -> Result<GamePayoffs> {
        let p = &self.problem;
        let base = GamePayoffs::new(
            PayoffMatrix::from_row(p.a1),
            PayoffMatrix::from_row(p.a0),
            p.theta,
        )
        .map_err(|e| in_section("problem", e))?;
        match p.gamma {
            Some(g) => base.with_gamma(g).map_err(|e| in_section("problem", e)),
            None => Ok(base),
        }
    }

    pub fn initial_state(&self) -> Result<SystemState> {
        match self.problem.initial.as_slice() {
            &[x, n] => Ok(SystemState::planar(x, n)),
            &[x, n, o] => Ok(SystemState::with_opinion(x, n, o)),
            other => Err(Error::invalid(
                "problem.initial",
                format!("expected 2 or 3 coordinates, got {}", other.len()),
            )),
        }
    }

    /// The control problem; fails for comparison scenarios, which have none.
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let p = &self.problem;
        let payoffs = self.payoffs()?;
        let initial = self.initial_state()?;
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::invalid(format!("problem.{name}"), "required for this kind"))
        };
        let reject = |name: &str, v: Option<f64>| match v {
            Some(_) => Err(Error::invalid(format!("problem.{name}"), "not used by this kind")),
            None => Ok(()),
        };
        let spec = match p.kind {
            ScenarioKind::Incentive => {
                reject("c1", p.c1)?;
                reject("c2", p.c2)?;
                ProblemSpec::incentive(payoffs, initial, p.horizon, need("u_max", p.u_max)?)
            }
            ScenarioKind::Propaganda | ScenarioKind::Awareness => {
                reject("u_max", p.u_max)?;
                let (c1, c2) = (need("c1", p.c1)?, need("c2", p.c2)?);
                if p.kind == ScenarioKind::Propaganda {
                    ProblemSpec::propaganda(payoffs, initial, p.horizon, c1, c2)
                } else {
                    ProblemSpec::awareness(payoffs, initial, p.horizon, c1, c2)
                }
            }
            ScenarioKind::OpinionCompare => {
                return Err(Error::invalid("problem.kind", "opinion-compare has no control problem"))
            }
        };
        spec.map_err(|e| in_section("problem", e))
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            alpha: o.alpha,
            beta: o.beta,
            iters: o.iters,
            ell_max: o.ell_max,
            grid_spacing: o.grid_spacing,
            integrator: self.integrator,
        }
    }

    /// Checks everything that can be checked without integrating.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::invalid("name", "must not be empty"));
        }
        let p = &self.problem;
        if p.kind.is_optimization() {
            let spec = self.problem_spec()?;
            let cfg = self.optimizer_config();
            cfg.validate()?;
            crate::climb::cell_count(spec.horizon(), cfg.grid_spacing)?;
            if self.optimizer.initial_control == InitialControl::SignThreshold
                && p.kind != ScenarioKind::Incentive
            {
                return Err(Error::invalid(
                    "optimizer.initial_control",
                    "sign-threshold initialization needs the incentive problem",
                ));
            }
        } else {
            let payoffs = self.payoffs()?;
            payoffs.require_gamma().map_err(|_| {
                Error::invalid("problem.gamma", "opinion-compare needs a learning rate")
            })?;
            let s = self.initial_state()?;
            if s.o.is_none() {
                return Err(Error::invalid("problem.initial", "opinion-compare needs [x, n, o]"));
            }
            s.validate_interior().map_err(|e| in_section("problem", e))?;
            if !(p.horizon > 0.0 && p.horizon.is_finite()) {
                return Err(Error::invalid("problem.horizon", "must be positive"));
            }
            self.integrator.validate()?;
        }
        let out = &self.output;
        if !(out.tail >= 0.0 && out.tail.is_finite()) {
            return Err(Error::invalid("output.tail", format!("must be non-negative, got {}", out.tail)));
        }
        if !(out.sample_spacing > 0.0 && out.sample_spacing.is_finite()) {
            return Err(Error::invalid(
                "output.sample_spacing",
                format!("must be positive, got {}", out.sample_spacing),
            ));
        }
        Ok(())
    }

    /// Applies `section.key=value` (array entries as `section.key.index`).
    /// The value is read as TOML and taken as a bare string if that fails.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::invalid(assignment, "override must look like `section.key=value`"))?;
        let path = path.trim();
        let value = parse_value(raw.trim());
        self.set_path(path, value, false)
    }

    /// Sets a numeric field that must already be present, as sweeps require.
    pub fn set_numeric(&mut self, path: &str, value: f64) -> Result<()> {
        self.set_path(path, toml::Value::Float(value), true)
    }

    /// Whether `path` names a number present in this config.
    pub fn has_numeric_field(&self, path: &str) -> bool {
        let Ok(mut doc) = toml::Value::try_from(self) else {
            return false;
        };
        let mut node = &mut doc;
        for seg in path.split('.') {
            match child(node, seg) {
                Some(next) => node = next,
                None => return false,
            }
        }
        matches!(node, toml::Value::Float(_) | toml::Value::Integer(_))
    }

    fn set_path(&mut self, path: &str, value: toml::Value, numeric: bool) -> Result<()> {
        let mut doc = toml::Value::try_from(&*self)
            .map_err(|e| Error::invalid("config", e.to_string()))?;
        let segments: Vec<&str> = path.split('.').collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(Error::invalid(path, "empty path segment"));
        }
        let (last, parents) = segments.split_last().expect("split yields one segment");
        let mut node = &mut doc;
        for seg in parents {
            node = child(node, seg).ok_or_else(|| Error::invalid(path, "no such config field"))?;
        }
        let slot = match node {
            toml::Value::Table(t) => {
                if numeric && !t.contains_key(*last) {
                    return Err(Error::invalid(path, "not set in the base config"));
                }
                t.entry(last.to_string()).or_insert(toml::Value::Boolean(false))
            }
            toml::Value::Array(a) => last
                .parse::<usize>()
                .ok()
                .and_then(|i| a.get_mut(i))
                .ok_or_else(|| Error::invalid(path, "array index out of range"))?,
            _ => return Err(Error::invalid(path, "no such config field")),
        };
        if numeric && !matches!(slot, toml::Value::Float(_) | toml::Value::Integer(_)) {
            return Err(Error::invalid(path, "not a numeric field"));
        }
        // Integer fields stay integers when a whole number is swept over them.
        *slot = match (&*slot, value) {
            (toml::Value::Integer(_), toml::Value::Float(f)) if f.fract() == 0.0 => {
                toml::Value::Integer(f as i64)
            }
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        let updated: ScenarioConfig = doc
            .try_into()
            .map_err(|e: toml::de::Error| Error::invalid(path, e.message().to_string()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}

fn child<'a>(node: &'a mut toml::Value, seg: &str) -> Option<&'a mut toml::Value> {
    match node {
        toml::Value::Table(t) => t.get_mut(seg),
        toml::Value::Array(a) => seg.parse::<usize>().ok().and_then(move |i| a.get_mut(i)),
        _ => None,
    }
}

fn parse_value(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrapper {
        v: toml::Value,
    }
    match toml::from_str::<Wrapper>(&format!("v = {raw}")) {
        Ok(w) => w.v,
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
