use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use crate::climb::{
    ascent_direction, make_initial_control, optimize_with, theta, ControlSignal, IterationLog,
    RunRecord, Termination,
};
use crate::dynamics::{classify_regime, field_base, field_opinion, RegimeReport, SystemState};
use crate::error::{Error, Result};
use crate::ocp::{simulate, solve_costate, ProblemSpec};
use crate::odeint::{integrate_forward_boxed, uniform_grid, IntegratorConfig, Trajectory};

use super::config::{ScenarioConfig, ScenarioKind};
use super::metrics;

/// Sampled time series with a header; column 0 is always `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    fn new(names: &[&str]) -> Self {
        let mut header = vec!["t".to_string()];
        header.extend(names.iter().map(|s| s.to_string()));
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| Error::invalid(path.display().to_string(), e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

/// Result of one scenario, before or after it is written to disk.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub regime: RegimeReport,
    /// Absent for comparison scenarios.
    pub record: Option<RunRecord>,
    /// State (and control, for optimizations) over the horizon plus tail.
    pub trajectory: Series,
    /// Perfect-information counterpart of a comparison scenario.
    pub reference: Option<Series>,
    pub costate: Option<Series>,
}

impl ScenarioRun {
    pub fn final_objective(&self) -> Option<f64> {
        self.record.as_ref().map(RunRecord::final_objective)
    }

    pub fn final_theta(&self) -> Option<f64> {
        self.record.as_ref().map(RunRecord::final_theta)
    }

    /// Writes every artifact into `dir`, replacing it if it exists. Files are
    /// staged in a sibling temporary directory so a failure leaves `dir` as it
    /// was.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        let parent = match dir.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let stage = tempfile::Builder::new()
            .prefix(".commons-stage-")
            .tempdir_in(parent)
            .map_err(|e| Error::io(parent, e))?;
        self.write_files(stage.path())?;
        let staged = stage.keep();
        let swap = |e| Error::io(dir, e);
        if dir.exists() {
            let trash = tempfile::Builder::new()
                .prefix(".commons-old-")
                .tempdir_in(parent)
                .map_err(|e| Error::io(parent, e))?;
            fs::rename(dir, trash.path().join("old")).map_err(swap)?;
        }
        fs::rename(&staged, dir).map_err(swap)?;
        Ok(())
    }

    fn write_files(&self, dir: &Path) -> Result<()> {
        let mut files = vec!["trajectory.csv"];
        self.trajectory.write_csv(&dir.join("trajectory.csv"))?;
        if let Some(reference) = &self.reference {
            reference.write_csv(&dir.join("trajectory_reference.csv"))?;
            files.push("trajectory_reference.csv");
        }
        if let Some(costate) = &self.costate {
            costate.write_csv(&dir.join("costate.csv"))?;
            files.push("costate.csv");
        }
        let mut result = serde_json::Value::Null;
        if let Some(record) = &self.record {
            let create = |name: &str| {
                let p = dir.join(name);
                fs::File::create(&p).map(BufWriter::new).map_err(|e| Error::io(p, e))
            };
            record.write_iterations_csv(create("iterations.csv")?)?;
            record.control.write_csv(create("control.csv")?)?;
            files.extend(["iterations.csv", "control.csv"]);
            if let Some(switches) = &record.switches {
                switches.write_csv(create("switches.csv")?)?;
                files.push("switches.csv");
            }
            result = json!({
                "J": record.final_objective(),
                "theta": record.final_theta(),
                "termination": record.termination,
                "rows": record.iterations.len(),
                "switches": record.switches.as_ref().map(|s| s.switches.len()),
                "singular_candidates": record.switches.as_ref().map(|s| s.singular_candidates.len()),
            });
        } else if let Some(reference) = &self.reference {
            let peaks = |s: &Series| {
                let n = s.column("n").unwrap_or_default();
                metrics::peaks(&s.times(), &n)
            };
            result = json!({
                "opinion_peaks": peaks(&self.trajectory),
                "reference_peaks": peaks(reference),
            });
        }
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = json!({
            "software": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
            "created_unix": created,
            "config": self.config,
            "regime": self.regime,
            "result": result,
            "files": files,
        });
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Runs a scenario in memory, reporting optimizer log rows to `observe`.
pub fn execute<F>(cfg: &ScenarioConfig, observe: F) -> Result<ScenarioRun>
where
    F: FnMut(&IterationLog),
{
    cfg.validate()?;
    let regime = classify_regime(&cfg.payoffs()?)?;
    if cfg.problem.kind == ScenarioKind::OpinionCompare {
        return compare(cfg, regime);
    }
    let spec = cfg.problem_spec()?;
    let opt = cfg.optimizer_config();
    let u0 = make_initial_control(cfg.optimizer.initial_control, &spec, &opt)?;
    let record = optimize_with(&spec, u0, &opt, observe)?;
    let spacing = cfg.output.sample_spacing;
    let trajectory = controlled_series(&spec, &record, cfg.output.tail, spacing, &cfg.integrator)?;
    let mut costate = Series::new(costate_names(spec.state_dim()));
    for (t, l) in record.costate.sample(spacing)? {
        let mut row = vec![t];
        row.extend(l);
        costate.rows.push(row);
    }
    Ok(ScenarioRun {
        config: cfg.clone(),
        regime,
        record: Some(record),
        trajectory,
        reference: None,
        costate: Some(costate),
    })
}

/// Integrates a scenario under a fixed control (zero when `control` is
/// `None`) without optimizing. The objective of that control is reported as a
/// single log row.
pub fn simulate_scenario(cfg: &ScenarioConfig, control: Option<ControlSignal>) -> Result<ScenarioRun> {
    cfg.validate()?;
    let regime = classify_regime(&cfg.payoffs()?)?;
    if cfg.problem.kind == ScenarioKind::OpinionCompare {
        return compare(cfg, regime);
    }
    let spec = cfg.problem_spec()?;
    let opt = cfg.optimizer_config();
    let control = match control {
        Some(u) => u,
        None => ControlSignal::constant(spec.horizon(), opt.grid_spacing, 0.0)?,
    };
    if (control.horizon() - spec.horizon()).abs() > 1e-9 * spec.horizon() {
        return Err(Error::invalid("control", "control horizon differs from problem.horizon"));
    }
    if let Some(v) = control.values().iter().find(|v| !spec.is_admissible(**v)) {
        return Err(Error::invalid("control", format!("value {v} is not admissible")));
    }
    let started = std::time::Instant::now();
    let forward = simulate(&spec, &control, &opt.integrator)?;
    let costate = solve_costate(&spec, &forward, &control, &opt.integrator)?;
    let record = RunRecord {
        iterations: vec![IterationLog {
            iter: 0,
            objective: forward.objective,
            theta: theta(&spec, &control, &ascent_direction(&spec, &control, &opt.integrator)?)?,
            ell: None,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        }],
        termination: Termination::Completed,
        control,
        forward,
        costate,
        switches: None,
    };
    let spacing = cfg.output.sample_spacing;
    let trajectory = controlled_series(&spec, &record, cfg.output.tail, spacing, &cfg.integrator)?;
    Ok(ScenarioRun {
        config: cfg.clone(),
        regime,
        record: Some(record),
        trajectory,
        reference: None,
        costate: None,
    })
}

/// Runs a scenario and writes its artifacts to `dir`.
pub fn run_scenario<F>(cfg: &ScenarioConfig, dir: &Path, observe: F) -> Result<ScenarioRun>
where
    F: FnMut(&IterationLog),
{
    let run = execute(cfg, observe)?;
    run.persist(dir)?;
    Ok(run)
}

fn costate_names(dim: usize) -> &'static [&'static str] {
    if dim == 2 {
        &["lambda_x", "lambda_n"]
    } else {
        &["lambda_x", "lambda_n", "lambda_o"]
    }
}

/// Value of the cell that starts at or before `t`, matching `control.csv`.
fn cell_value(u: &ControlSignal, t: f64) -> f64 {
    let k = (t / u.spacing() + 1e-9).floor().max(0.0) as usize;
    u.values()[k.min(u.len() - 1)]
}

fn controlled_series(
    spec: &ProblemSpec,
    record: &RunRecord,
    tail: f64,
    spacing: f64,
    integrator: &IntegratorConfig,
) -> Result<Series> {
    let dim = spec.state_dim();
    let mut names = spec.state_names().to_vec();
    names.push("u");
    let mut out = Series::new(&names);
    let horizon = spec.horizon();
    let forward = &record.forward.trajectory;
    let mut y = vec![0.0; forward.dim()];
    for t in uniform_grid(0.0, horizon, spacing) {
        forward.eval_into(t, &mut y)?;
        let mut row = vec![t];
        row.extend_from_slice(&y[..dim]);
        row.push(cell_value(&record.control, t));
        out.rows.push(row);
    }
    if tail > 0.0 {
        let start = &forward.last_value()[..dim];
        let free = integrate_forward_boxed(
            |_, _, y, dy| {
                spec.state_field(&SystemState::from_slice(y, dim), 0.0)?.write_to(dy);
                Ok(())
            },
            start,
            &[horizon, horizon + tail],
            integrator,
            dim,
        )?;
        for t in uniform_grid(horizon, horizon + tail, spacing).into_iter().skip(1) {
            let mut row = vec![t];
            row.extend(free.eval(t)?);
            row.push(0.0);
            out.rows.push(row);
        }
    }
    Ok(out)
}

fn sampled(traj: &Trajectory, names: &[&str], spacing: f64) -> Result<Series> {
    let mut out = Series::new(names);
    for (t, y) in traj.sample(spacing)? {
        let mut row = vec![t];
        row.extend(y);
        out.rows.push(row);
    }
    Ok(out)
}

/// Uncontrolled opinion model next to the perfect-information model from the
/// same `(x, n)`.
pub fn simulate_pair(cfg: &ScenarioConfig) -> Result<(Trajectory, Trajectory)> {
    let p = cfg.payoffs()?;
    let s0 = cfg.initial_state()?;
    let span = [0.0, cfg.problem.horizon + cfg.output.tail];
    let opinion = integrate_forward_boxed(
        |_, _, y, dy| {
            field_opinion(&p, &SystemState::from_slice(y, 3))?.write_to(dy);
            Ok(())
        },
        &s0.to_vec(),
        &span,
        &cfg.integrator,
        3,
    )?;
    let reference = integrate_forward_boxed(
        |_, _, y, dy| {
            field_base(&p, &SystemState::from_slice(y, 2)).write_to(dy);
            Ok(())
        },
        &[s0.x, s0.n],
        &span,
        &cfg.integrator,
        2,
    )?;
    Ok((opinion, reference))
}

fn compare(cfg: &ScenarioConfig, regime: RegimeReport) -> Result<ScenarioRun> {
    let (opinion, reference) = simulate_pair(cfg)?;
    let spacing = cfg.output.sample_spacing;
    Ok(ScenarioRun {
        config: cfg.clone(),
        regime,
        record: None,
        trajectory: sampled(&opinion, &["x", "n", "o"], spacing)?,
        reference: Some(sampled(&reference, &["x", "n"], spacing)?),
        costate: None,
    })
}
