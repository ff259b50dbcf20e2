//! Hamiltonian-based hill climbing with Armijo steps.
//!
//! Each iteration sweeps the state forward and the costate backward under the
//! current control `u`, builds the control `u*` that maximizes the
//! Hamiltonian at every grid point, and moves along `u* - u` with the largest
//! step `beta^l` that passes the Armijo sufficient-increase test
//! `J(u) - J(u + beta^l (u* - u)) <= alpha beta^l Theta(u)`.
//!
//! `Theta(u) = int (H(y, lambda, u) - H(y, lambda, u*)) dt` is non-positive and
//! vanishes exactly when `u` satisfies the maximum principle.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::SystemState;
use crate::error::{Error, Result};
use crate::ocp::{
    detect_switches, simulate, solve_costate, Costate, ForwardRun, ProblemKind, ProblemSpec,
    SwitchReport,
};
use crate::odeint::{integrate_forward_boxed, IntegratorConfig, Trajectory};

/// `|Theta|` below this means the control already satisfies the maximum principle.
pub const CONVERGENCE_THETA: f64 = 1e-10;

/// Piecewise-constant control on a uniform grid over `[0, horizon]`.
///
/// Evaluation is left-continuous: at an interior grid point the value of the
/// cell that ends there is returned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    horizon: f64,
    values: Vec<f64>,
}

/// Number of cells of spacing `spacing` in `[0, horizon]`; the horizon must be
/// a whole multiple of the spacing.
pub fn cell_count(horizon: f64, spacing: f64) -> Result<usize> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid("optimizer.grid_spacing", format!("must be positive, got {spacing}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("problem.horizon", format!("must be positive, got {horizon}")));
    }
    let ratio = horizon / spacing;
    let cells = ratio.round();
    if cells < 1.0 || (ratio - cells).abs() > 1e-9 * cells {
        return Err(Error::invalid(
            "optimizer.grid_spacing",
            format!("horizon {horizon} is not a whole multiple of {spacing}"),
        ));
    }
    Ok(cells as usize)
}

impl ControlSignal {
    pub fn new(horizon: f64, spacing: f64, values: Vec<f64>) -> Result<Self> {
        let cells = cell_count(horizon, spacing)?;
        if values.len() != cells {
            return Err(Error::invalid(
                "control",
                format!("expected {cells} cell values, got {}", values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("control", format!("non-finite value {v}")));
        }
        Ok(Self { horizon, values })
    }

    pub fn constant(horizon: f64, spacing: f64, value: f64) -> Result<Self> {
        let cells = cell_count(horizon, spacing)?;
        Self::new(horizon, spacing, vec![value; cells])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn spacing(&self) -> f64 {
        self.horizon / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Left endpoint of cell `i`; `knot(len())` is the horizon.
    pub fn knot(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.values.len() as f64
    }

    /// All `len() + 1` grid points.
    pub fn knots(&self) -> Vec<f64> {
        (0..=self.values.len()).map(|i| self.knot(i)).collect()
    }

    pub fn cell_of(&self, t: f64) -> usize {
        let cells = self.values.len();
        let r = t * cells as f64 / self.horizon;
        let k = r.round();
        let idx = if (r - k).abs() < 1e-9 {
            k as i64 - 1
        } else {
            r.floor() as i64
        };
        idx.clamp(0, cells as i64 - 1) as usize
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.values[self.cell_of(t)]
    }

    /// `self + step (target - self)` cellwise, kept inside `bounds`.
    pub fn toward(&self, target: &ControlSignal, step: f64, bounds: (f64, f64)) -> ControlSignal {
        let values = if step == 1.0 {
            target.values.clone()
        } else {
            self.values
                .iter()
                .zip(&target.values)
                .map(|(u, v)| (u + step * (v - u)).clamp(bounds.0, bounds.1))
                .collect()
        };
        ControlSignal {
            horizon: self.horizon,
            values,
        }
    }

    /// Reads the `t,u` layout written by [`ControlSignal::write_csv`]; the
    /// cells must tile `[0, horizon]` uniformly.
    pub fn read_csv(path: &std::path::Path, horizon: f64) -> Result<Self> {
        let rows = csv::Reader::from_path(path)?
            .deserialize::<(f64, f64)>()
            .collect::<Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(Error::invalid("control", format!("{} has no rows", path.display())));
        }
        let spacing = horizon / rows.len() as f64;
        let signal = Self::new(horizon, spacing, rows.iter().map(|r| r.1).collect())?;
        for (i, (t, _)) in rows.iter().enumerate() {
            if (t - signal.knot(i)).abs() > 1e-9 * horizon.max(1.0) {
                return Err(Error::invalid(
                    "control",
                    format!("row {i} starts at t = {t}, expected {}", signal.knot(i)),
                ));
            }
        }
        Ok(signal)
    }

    /// `t,u` with one row per cell, stamped at the cell's left endpoint.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "u"])?;
        for (i, u) in self.values.iter().enumerate() {
            w.write_record([self.knot(i).to_string(), u.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<control csv>", e))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub ell_max: u32,
    pub grid_spacing: f64,
    pub integrator: IntegratorConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            iters: 20,
            ell_max: 30,
            grid_spacing: 0.01,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(
                    format!("optimizer.{name}"),
                    format!("must lie in (0, 1), got {v}"),
                ));
            }
        }
        if self.iters < 1 {
            return Err(Error::invalid("optimizer.iters", "must be at least 1"));
        }
        if self.ell_max < 1 {
            return Err(Error::invalid("optimizer.ell_max", "must be at least 1"));
        }
        if !(self.grid_spacing > 0.0 && self.grid_spacing.is_finite()) {
            return Err(Error::invalid(
                "optimizer.grid_spacing",
                format!("must be positive, got {}", self.grid_spacing),
            ));
        }
        self.integrator.validate()
    }
}

/// How the first control iterate is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialControl {
    Zero,
    /// Feedback `u_max sgn(x(t) - x_c)` applied cell by cell.
    SignThreshold,
}

pub fn make_initial_control(
    kind: InitialControl,
    spec: &ProblemSpec,
    cfg: &OptimizerConfig,
) -> Result<ControlSignal> {
    let zero = ControlSignal::constant(spec.horizon(), cfg.grid_spacing, 0.0)?;
    match kind {
        InitialControl::Zero => Ok(zero),
        InitialControl::SignThreshold => {
            if spec.kind() != ProblemKind::Incentive {
                return Err(Error::invalid(
                    "optimizer.initial_control",
                    "sign-threshold initialization needs the incentive problem",
                ));
            }
            let u_max = spec.u_max().unwrap_or(1.0);
            let x_c = spec.payoffs().critical_fraction();
            // Closed loop: each cell reads x at its left end of the trajectory
            // driven by the cells before it, so switches track n' = 0.
            let dim = spec.state_dim();
            let mut y = spec.initial().to_vec();
            let mut values = Vec::with_capacity(zero.len());
            for i in 0..zero.len() {
                let u = if y[0] >= x_c { u_max } else { -u_max };
                values.push(u);
                let cell = integrate_forward_boxed(
                    |_, _, y, dy| {
                        let s = SystemState::from_slice(y, dim);
                        spec.state_field(&s, u)?.write_to(dy);
                        Ok(())
                    },
                    &y,
                    &[zero.knot(i), zero.knot(i + 1)],
                    &cfg.integrator,
                    dim,
                )?;
                y = cell.last_value().to_vec();
            }
            ControlSignal::new(spec.horizon(), cfg.grid_spacing, values)
        }
    }
}

/// Sweeps under a control together with the Hamiltonian-maximizing control
/// built from them.
#[derive(Clone, Debug)]
pub struct AscentDirection {
    pub target: ControlSignal,
    pub forward: ForwardRun,
    pub costate: Trajectory,
}

impl AscentDirection {
    fn point(&self, spec: &ProblemSpec, t: f64) -> Result<(SystemState, Costate)> {
        let dim = spec.state_dim();
        let y = self.forward.trajectory.eval(t)?;
        let l = self.costate.eval(t)?;
        Ok((SystemState::from_slice(&y, dim), Costate::from_slice(&l, dim)))
    }
}

pub fn ascent_direction(
    spec: &ProblemSpec,
    u: &ControlSignal,
    cfg: &IntegratorConfig,
) -> Result<AscentDirection> {
    let forward = simulate(spec, u, cfg)?;
    direction_from(spec, u, forward, cfg)
}

fn direction_from(
    spec: &ProblemSpec,
    u: &ControlSignal,
    forward: ForwardRun,
    cfg: &IntegratorConfig,
) -> Result<AscentDirection> {
    let costate = solve_costate(spec, &forward, u, cfg)?;
    let mut dir = AscentDirection {
        target: u.clone(),
        forward,
        costate,
    };
    let values = (0..u.len())
        .map(|i| {
            let (s, l) = dir.point(spec, u.knot(i))?;
            Ok(spec.pointwise_maximizer(&s, &l))
        })
        .collect::<Result<Vec<_>>>()?;
    dir.target = ControlSignal {
        horizon: u.horizon,
        values,
    };
    Ok(dir)
}

/// `H(u) - H(u*)` at every grid point, including the horizon (where the last
/// cell's control is held).
pub fn hamiltonian_gaps(
    spec: &ProblemSpec,
    u: &ControlSignal,
    dir: &AscentDirection,
) -> Result<Vec<f64>> {
    let cells = u.len();
    (0..=cells)
        .map(|i| {
            let (s, l) = dir.point(spec, u.knot(i))?;
            let current = u.values[i.min(cells - 1)];
            let best = if i < cells {
                dir.target.values[i]
            } else {
                spec.pointwise_maximizer(&s, &l)
            };
            Ok(spec.hamiltonian(&s, &l, current) - spec.hamiltonian(&s, &l, best))
        })
        .collect()
}

/// Optimality function by the composite trapezoid rule on the control grid.
pub fn theta(spec: &ProblemSpec, u: &ControlSignal, dir: &AscentDirection) -> Result<f64> {
    let gaps = hamiltonian_gaps(spec, u, dir)?;
    let inner: f64 = gaps.iter().sum();
    let ends = 0.5 * (gaps[0] + gaps[gaps.len() - 1]);
    Ok(u.spacing() * (inner - ends))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepStatus {
    Accepted,
    /// `Theta` is already zero to within [`CONVERGENCE_THETA`].
    Converged,
    /// No exponent up to `ell_max` passed the Armijo test.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct ArmijoStep {
    pub control: ControlSignal,
    pub ell: Option<u32>,
    pub status: StepStatus,
    /// Forward sweep under the accepted control (absent unless accepted).
    pub forward: Option<ForwardRun>,
}

/// Armijo line search along `u_star - u`, given `J(u)` and `Theta(u)`.
pub fn armijo_step(
    spec: &ProblemSpec,
    u: &ControlSignal,
    u_star: &ControlSignal,
    objective: f64,
    theta_value: f64,
    cfg: &OptimizerConfig,
) -> Result<ArmijoStep> {
    let unchanged = |status| ArmijoStep {
        control: u.clone(),
        ell: None,
        status,
        forward: None,
    };
    if theta_value >= -CONVERGENCE_THETA {
        return Ok(unchanged(StepStatus::Converged));
    }
    let bounds = spec.control_bounds();
    for ell in 0..=cfg.ell_max {
        let step = cfg.beta.powi(ell as i32);
        let candidate = u.toward(u_star, step, bounds);
        let run = simulate(spec, &candidate, &cfg.integrator)?;
        if objective - run.objective <= cfg.alpha * step * theta_value {
            return Ok(ArmijoStep {
                control: candidate,
                ell: Some(ell),
                status: StepStatus::Accepted,
                forward: Some(run),
            });
        }
    }
    Ok(unchanged(StepStatus::Stalled))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    #[serde(rename = "J")]
    pub objective: f64,
    pub theta: f64,
    /// Accepted Armijo exponent; empty for the final evaluation row and for
    /// converged or stalled iterations.
    pub ell: Option<u32>,
    pub wall_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "iteration")]
pub enum Termination {
    Completed,
    Converged(usize),
    Stalled(usize),
}

/// Everything an optimizer run produced.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub iterations: Vec<IterationLog>,
    pub termination: Termination,
    pub control: ControlSignal,
    pub forward: ForwardRun,
    pub costate: Trajectory,
    pub switches: Option<SwitchReport>,
}

impl RunRecord {
    pub fn final_objective(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |l| l.objective)
    }

    pub fn final_theta(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |l| l.theta)
    }

    /// `(iter, J, theta, ell)` without timings, for reproducibility checks.
    pub fn numeric_log(&self) -> Vec<(usize, f64, f64, Option<u32>)> {
        self.iterations
            .iter()
            .map(|l| (l.iter, l.objective, l.theta, l.ell))
            .collect()
    }

    pub fn write_iterations_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for log in &self.iterations {
            w.serialize(log)?;
        }
        w.flush().map_err(|e| Error::io("<iterations csv>", e))?;
        Ok(())
    }
}

pub fn optimize(spec: &ProblemSpec, u0: ControlSignal, cfg: &OptimizerConfig) -> Result<RunRecord> {
    optimize_with(spec, u0, cfg, |_| {})
}

/// Runs the hill climber, reporting every log row to `observe` as it is made.
pub fn optimize_with<F>(
    spec: &ProblemSpec,
    u0: ControlSignal,
    cfg: &OptimizerConfig,
    mut observe: F,
) -> Result<RunRecord>
where
    F: FnMut(&IterationLog),
{
    cfg.validate()?;
    if (u0.horizon() - spec.horizon()).abs() > 1e-12 * spec.horizon() {
        return Err(Error::invalid(
            "control",
            format!("control horizon {} differs from problem horizon {}", u0.horizon(), spec.horizon()),
        ));
    }
    if let Some(v) = u0.values().iter().find(|v| !spec.is_admissible(**v)) {
        return Err(Error::invalid("control", format!("initial value {v} is not admissible")));
    }
    let in_iteration = |k: usize| move |e: Error| Error::Iteration {
        iteration: k,
        source: Box::new(e),
    };

    let mut u = u0;
    let mut forward = simulate(spec, &u, &cfg.integrator).map_err(in_iteration(0))?;
    let mut iterations = Vec::with_capacity(cfg.iters + 1);
    let mut termination = Termination::Completed;
    let mut k = 0;
    let last_dir = loop {
        let started = Instant::now();
        let dir = direction_from(spec, &u, forward, &cfg.integrator).map_err(in_iteration(k))?;
        let th = theta(spec, &u, &dir).map_err(in_iteration(k))?;
        let objective = dir.forward.objective;
        if k == cfg.iters {
            let log = IterationLog {
                iter: k,
                objective,
                theta: th,
                ell: None,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            };
            observe(&log);
            iterations.push(log);
            break dir;
        }
        let step = armijo_step(spec, &u, &dir.target, objective, th, cfg).map_err(in_iteration(k))?;
        let log = IterationLog {
            iter: k,
            objective,
            theta: th,
            ell: step.ell,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        observe(&log);
        iterations.push(log);
        match step.status {
            StepStatus::Accepted => {
                u = step.control;
                forward = step.forward.expect("accepted steps carry their sweep");
                k += 1;
            }
            StepStatus::Converged => {
                termination = Termination::Converged(k);
                break dir;
            }
            StepStatus::Stalled => {
                log::warn!("Armijo search stalled at iteration {k}");
                termination = Termination::Stalled(k);
                break dir;
            }
        }
    };

    let switches = match spec.kind() {
        ProblemKind::Incentive => Some(detect_switches(
            spec,
            &last_dir.forward.trajectory,
            &last_dir.costate,
            &u.knots(),
        )?),
        _ => None,
    };
    Ok(RunRecord {
        iterations,
        termination,
        control: u,
        forward: last_dir.forward,
        costate: last_dir.costate,
        switches,
    })
}
