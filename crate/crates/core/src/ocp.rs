//! The three intervention problems: incentives, propaganda and awareness.
//!
//! Each problem maximizes an integral objective over `[0, T_f]` subject to the
//! controlled dynamics. This module supplies, per problem, the Hamiltonian,
//! its analytic state gradient (the costate field), the pointwise maximizer of
//! the Hamiltonian over admissible controls, and forward/backward sweeps that
//! evaluate a given control.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::climb::ControlSignal;
use crate::dynamics::{
    field_awareness, field_incentive, field_propaganda, incentive_gain, lie_bracket, GamePayoffs,
    StateRate, SystemState,
};
use crate::error::{Error, Result};
use crate::odeint::{
    integrate_backward, integrate_forward_boxed, quadrature_running_cost, IntegratorConfig,
    Trajectory,
};

/// Largest awareness effort the maximizer will return.
pub const AWARENESS_CAP: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Incentive,
    Propaganda,
    Awareness,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::Incentive => "incentive",
            ProblemKind::Propaganda => "propaganda",
            ProblemKind::Awareness => "awareness",
        }
    }
}

/// Costate of the state `(x, n[, o])`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Costate {
    pub x: f64,
    pub n: f64,
    pub o: Option<f64>,
}

impl Costate {
    pub fn zero(dim: usize) -> Self {
        Self {
            x: 0.0,
            n: 0.0,
            o: (dim == 3).then_some(0.0),
        }
    }

    pub fn from_slice(l: &[f64], dim: usize) -> Self {
        Self {
            x: l[0],
            n: l[1],
            o: (dim == 3).then(|| l[2]),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.x, self.n];
        v.extend(self.o);
        v
    }

    pub fn write_to(&self, out: &mut [f64]) {
        out[0] = self.x;
        out[1] = self.n;
        if let Some(o) = self.o {
            out[2] = o;
        }
    }

    fn dot(&self, r: &StateRate) -> f64 {
        self.x * r.x + self.n * r.n + self.o.unwrap_or(0.0) * r.o.unwrap_or(0.0)
    }
}

/// A fully specified optimal control problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    kind: ProblemKind,
    payoffs: GamePayoffs,
    initial: SystemState,
    horizon: f64,
    u_max: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive, got {v}")))
    }
}

impl ProblemSpec {
    /// Maximize `int n^2 dt` with the incentive bounded by `u_max`.
    pub fn incentive(
        payoffs: GamePayoffs,
        initial: SystemState,
        horizon: f64,
        u_max: f64,
    ) -> Result<Self> {
        positive("u_max", u_max)?;
        if initial.o.is_some() {
            return Err(Error::invalid("initial", "incentive problems use the (x, n) state"));
        }
        Self::checked(Self {
            kind: ProblemKind::Incentive,
            payoffs,
            initial,
            horizon,
            u_max: Some(u_max),
            c1: None,
            c2: None,
        })
    }

    /// Maximize `1/2 int (c1 n^2 - c2 u^2) dt` with an unconstrained push on opinion.
    pub fn propaganda(
        payoffs: GamePayoffs,
        initial: SystemState,
        horizon: f64,
        c1: f64,
        c2: f64,
    ) -> Result<Self> {
        Self::information(ProblemKind::Propaganda, payoffs, initial, horizon, c1, c2)
    }

    /// Maximize `1/2 int (c1 n^2 - c2 u^2) dt` with a non-negative boost to learning.
    pub fn awareness(
        payoffs: GamePayoffs,
        initial: SystemState,
        horizon: f64,
        c1: f64,
        c2: f64,
    ) -> Result<Self> {
        Self::information(ProblemKind::Awareness, payoffs, initial, horizon, c1, c2)
    }

    fn information(
        kind: ProblemKind,
        payoffs: GamePayoffs,
        initial: SystemState,
        horizon: f64,
        c1: f64,
        c2: f64,
    ) -> Result<Self> {
        positive("c1", c1)?;
        positive("c2", c2)?;
        payoffs.require_gamma()?;
        if initial.o.is_none() {
            return Err(Error::invalid("initial", "opinion problems use the (x, n, o) state"));
        }
        Self::checked(Self {
            kind,
            payoffs,
            initial,
            horizon,
            u_max: None,
            c1: Some(c1),
            c2: Some(c2),
        })
    }

    fn checked(spec: Self) -> Result<Self> {
        positive("horizon", spec.horizon)?;
        spec.initial.validate_interior()?;
        Ok(spec)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn payoffs(&self) -> &GamePayoffs {
        &self.payoffs
    }

    pub fn initial(&self) -> SystemState {
        self.initial
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn u_max(&self) -> Option<f64> {
        self.u_max
    }

    pub fn c1(&self) -> Option<f64> {
        self.c1
    }

    pub fn c2(&self) -> Option<f64> {
        self.c2
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            ProblemKind::Incentive => 2,
            _ => 3,
        }
    }

    pub fn state_names(&self) -> &'static [&'static str] {
        match self.kind {
            ProblemKind::Incentive => &["x", "n"],
            _ => &["x", "n", "o"],
        }
    }

    fn weights(&self) -> (f64, f64) {
        (self.c1.unwrap_or(1.0), self.c2.unwrap_or(0.0))
    }

    /// Admissible control interval (propaganda is unbounded).
    pub fn control_bounds(&self) -> (f64, f64) {
        match self.kind {
            ProblemKind::Incentive => {
                let m = self.u_max.unwrap_or(1.0);
                (-m, m)
            }
            ProblemKind::Propaganda => (f64::NEG_INFINITY, f64::INFINITY),
            ProblemKind::Awareness => (0.0, AWARENESS_CAP),
        }
    }

    pub fn is_admissible(&self, u: f64) -> bool {
        let (lo, hi) = self.control_bounds();
        u.is_finite() && u >= lo && u <= hi
    }

    pub fn state_field(&self, s: &SystemState, u: f64) -> Result<StateRate> {
        match self.kind {
            ProblemKind::Incentive => Ok(field_incentive(&self.payoffs, s, u)),
            ProblemKind::Propaganda => field_propaganda(&self.payoffs, s, u),
            ProblemKind::Awareness => field_awareness(&self.payoffs, s, u),
        }
    }

    /// Integrand of the objective.
    pub fn running_cost(&self, s: &SystemState, u: f64) -> f64 {
        match self.kind {
            ProblemKind::Incentive => s.n * s.n,
            _ => {
                let (c1, c2) = self.weights();
                0.5 * (c1 * s.n * s.n - c2 * u * u)
            }
        }
    }

    /// `H = <lambda, f(y, u)> + L(y, u)`.
    pub fn hamiltonian(&self, s: &SystemState, l: &Costate, u: f64) -> f64 {
        let p = &self.payoffs;
        let SystemState { x, n, .. } = *s;
        let env_term = l.n * n * (1.0 - n) * p.restoration_rate(x);
        match self.kind {
            ProblemKind::Incentive => {
                l.x * x * (1.0 - x) * (p.fitness_diff(x, n) + x * (1.0 - n) * u)
                    + env_term
                    + n * n
            }
            ProblemKind::Propaganda | ProblemKind::Awareness => {
                let o = s.o.unwrap_or(n);
                let lo = l.o.unwrap_or(0.0);
                let gamma = p.gamma().unwrap_or(0.0);
                let opinion = match self.kind {
                    ProblemKind::Propaganda => -gamma * (o - n) + o * (1.0 - o) * u,
                    _ => -(gamma + u) * (o - n),
                };
                l.x * x * (1.0 - x) * p.fitness_diff(x, o)
                    + env_term
                    + lo * opinion
                    + self.running_cost(s, u)
            }
        }
    }

    /// `-dH/dy`, from hand-derived partials.
    pub fn costate_field(&self, s: &SystemState, l: &Costate, u: f64) -> Costate {
        let p = &self.payoffs;
        let SystemState { x, n, .. } = *s;
        let theta = p.theta();
        let rate = p.restoration_rate(x);
        match self.kind {
            ProblemKind::Incentive => {
                let g = p.fitness_diff(x, n);
                let dh_dx = l.x
                    * ((1.0 - 2.0 * x) * g
                        + x * (1.0 - x) * p.fitness_diff_dx(n)
                        + (2.0 * x - 3.0 * x * x) * (1.0 - n) * u)
                    + l.n * n * (1.0 - n) * (1.0 + theta);
                let dh_dn = l.x * (x * (1.0 - x) * p.fitness_diff_denv(x) - x * x * (1.0 - x) * u)
                    + l.n * (1.0 - 2.0 * n) * rate
                    + 2.0 * n;
                Costate {
                    x: -dh_dx,
                    n: -dh_dn,
                    o: None,
                }
            }
            ProblemKind::Propaganda | ProblemKind::Awareness => {
                let o = s.o.unwrap_or(n);
                let lo = l.o.unwrap_or(0.0);
                let gamma = p.gamma().unwrap_or(0.0);
                let (c1, _) = self.weights();
                let g = p.fitness_diff(x, o);
                let dh_dx = l.x * ((1.0 - 2.0 * x) * g + x * (1.0 - x) * p.fitness_diff_dx(o))
                    + l.n * n * (1.0 - n) * (1.0 + theta);
                let relax = match self.kind {
                    ProblemKind::Propaganda => gamma,
                    _ => gamma + u,
                };
                let dh_dn = l.n * (1.0 - 2.0 * n) * rate + lo * relax + c1 * n;
                let push = match self.kind {
                    ProblemKind::Propaganda => (1.0 - 2.0 * o) * u,
                    _ => 0.0,
                };
                let dh_do = l.x * x * (1.0 - x) * p.fitness_diff_denv(x) + lo * (push - relax);
                Costate {
                    x: -dh_dx,
                    n: -dh_dn,
                    o: Some(-dh_do),
                }
            }
        }
    }

    /// Admissible control maximizing the Hamiltonian at `(s, l)`.
    ///
    /// The incentive problem is bang-bang; a vanishing switching function
    /// resolves to `+u_max`.
    pub fn pointwise_maximizer(&self, s: &SystemState, l: &Costate) -> f64 {
        match self.kind {
            ProblemKind::Incentive => {
                let m = self.u_max.unwrap_or(1.0);
                if switching_function(s, l) >= 0.0 {
                    m
                } else {
                    -m
                }
            }
            ProblemKind::Propaganda => {
                let (_, c2) = self.weights();
                let o = s.o.unwrap_or(s.n);
                l.o.unwrap_or(0.0) * o * (1.0 - o) / c2
            }
            ProblemKind::Awareness => {
                let (_, c2) = self.weights();
                let o = s.o.unwrap_or(s.n);
                let u = (-l.o.unwrap_or(0.0) * (o - s.n) / c2).max(0.0);
                if u > AWARENESS_CAP {
                    log::warn!("awareness maximizer {u:.3e} capped at {AWARENESS_CAP}");
                    AWARENESS_CAP
                } else {
                    u
                }
            }
        }
    }
}

/// `phi = x^2 (1 - x) (1 - n) lambda_x`, the coefficient of the incentive in `H`.
pub fn switching_function(s: &SystemState, l: &Costate) -> f64 {
    incentive_gain(s) * l.x
}

/// Forward sweep under a control: state trajectory with the running cost
/// appended as an extra coordinate.
#[derive(Clone, Debug)]
pub struct ForwardRun {
    pub trajectory: Trajectory,
    pub objective: f64,
}

impl ForwardRun {
    pub fn state_at(&self, t: f64, dim: usize) -> Result<SystemState> {
        let y = self.trajectory.eval(t)?;
        Ok(SystemState::from_slice(&y, dim))
    }
}

/// Integrates the controlled dynamics over `[0, T_f]`, restarting at every
/// control cell, and accumulates the objective alongside.
pub fn simulate(
    spec: &ProblemSpec,
    control: &ControlSignal,
    cfg: &IntegratorConfig,
) -> Result<ForwardRun> {
    let dim = spec.state_dim();
    let mut y0 = spec.initial().to_vec();
    y0.push(0.0);
    let knots = control.knots();
    let values = control.values();
    let trajectory = integrate_forward_boxed(
        |cell, _, y, dy| {
            let s = SystemState::from_slice(y, dim);
            let u = values[cell];
            spec.state_field(&s, u)?.write_to(dy);
            dy[dim] = spec.running_cost(&s, u);
            Ok(())
        },
        &y0,
        &knots,
        cfg,
        dim,
    )?;
    let objective = trajectory.last_value()[dim];
    Ok(ForwardRun {
        trajectory,
        objective,
    })
}

/// Integrates the costate backward from `lambda(T_f) = 0`, reading the state
/// from the dense forward trajectory.
pub fn solve_costate(
    spec: &ProblemSpec,
    forward: &ForwardRun,
    control: &ControlSignal,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let dim = spec.state_dim();
    let (lo, hi) = forward.trajectory.interval();
    if lo > 0.0 || hi < spec.horizon() {
        return Err(Error::OutsideTrajectory {
            t: if lo > 0.0 { 0.0 } else { spec.horizon() },
            start: lo,
            end: hi,
        });
    }
    let mut knots = control.knots();
    knots.reverse();
    let cells = control.len();
    let values = control.values();
    let mut y = vec![0.0; forward.trajectory.dim()];
    integrate_backward(
        |seg, t, l, dl| {
            forward.trajectory.eval_into(t, &mut y)?;
            let s = SystemState::from_slice(&y, dim);
            let lam = Costate::from_slice(l, dim);
            spec.costate_field(&s, &lam, values[cells - 1 - seg])
                .write_to(dl);
            Ok(())
        },
        &vec![0.0; dim],
        &knots,
        cfg,
    )
}

/// Objective recomputed by quadrature over an existing state trajectory, as
/// an independent check of the value accumulated during [`simulate`].
pub fn objective(
    spec: &ProblemSpec,
    states: &Trajectory,
    control: &ControlSignal,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let dim = spec.state_dim();
    let knots = control.knots();
    let values = control.values();
    let mut y = vec![0.0; states.dim()];
    let mut failure = None;
    let value = quadrature_running_cost(
        |cell, t| match states.eval_into(t, &mut y) {
            Ok(()) => spec.running_cost(&SystemState::from_slice(&y, dim), values[cell]),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        &knots,
        cfg,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// A sign change of the switching function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingRecord {
    pub time: f64,
    pub phi: f64,
    pub u_before: f64,
    pub u_after: f64,
    /// `d(phi)/dt = <lambda, [F, G]>` at the switch.
    pub phi_rate: f64,
}

impl SwitchingRecord {
    pub fn is_transversal(&self) -> bool {
        self.phi_rate != 0.0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SwitchReport {
    pub switches: Vec<SwitchingRecord>,
    /// Intervals longer than one grid spacing on which `|phi| < 1e-10`.
    pub singular_candidates: Vec<(f64, f64)>,
}

impl SwitchReport {
    pub fn all_transversal(&self) -> bool {
        self.switches.iter().all(SwitchingRecord::is_transversal)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "phi", "u_before", "u_after"])?;
        for s in &self.switches {
            w.write_record([
                s.time.to_string(),
                s.phi.to_string(),
                s.u_before.to_string(),
                s.u_after.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<switches csv>", e))?;
        Ok(())
    }
}

const SWITCH_RESOLUTION: f64 = 1e-6;
const SINGULAR_LEVEL: f64 = 1e-10;

/// Locates the sign changes of the switching function of an incentive
/// problem by bisection on the dense trajectories, and flags any stretch of
/// near-zero switching function as a candidate singular arc.
pub fn detect_switches(
    spec: &ProblemSpec,
    states: &Trajectory,
    costates: &Trajectory,
    grid: &[f64],
) -> Result<SwitchReport> {
    if spec.kind() != ProblemKind::Incentive {
        return Err(Error::invalid(
            "problem.kind",
            "switching analysis applies to the incentive problem",
        ));
    }
    let u_max = spec.u_max().unwrap_or(1.0);
    let eval = |t: f64| -> Result<(SystemState, Costate)> {
        let ys = states.eval(t)?;
        let ls = costates.eval(t)?;
        Ok((SystemState::planar(ys[0], ys[1]), Costate::from_slice(&ls, 2)))
    };
    let phi_at = |t: f64| -> Result<f64> {
        let (s, l) = eval(t)?;
        Ok(switching_function(&s, &l))
    };

    let phis = grid.iter().map(|&t| phi_at(t)).collect::<Result<Vec<_>>>()?;

    let mut report = SwitchReport::default();
    let mut last_nonzero: Option<usize> = None;
    for (i, &phi) in phis.iter().enumerate() {
        if phi == 0.0 {
            continue;
        }
        if let Some(j) = last_nonzero {
            if phis[j].signum() != phi.signum() {
                let (mut a, mut b) = (grid[j], grid[i]);
                let sign_a = phis[j].signum();
                while b - a > SWITCH_RESOLUTION {
                    let mid = 0.5 * (a + b);
                    let v = phi_at(mid)?;
                    if v != 0.0 && v.signum() == sign_a {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                let time = 0.5 * (a + b);
                let (s, l) = eval(time)?;
                let bracket = lie_bracket(spec.payoffs(), &s);
                let before = if sign_a > 0.0 { u_max } else { -u_max };
                report.switches.push(SwitchingRecord {
                    time,
                    phi: switching_function(&s, &l),
                    u_before: before,
                    u_after: -before,
                    phi_rate: l.x * bracket[0] + l.n * bracket[1],
                });
            }
        }
        last_nonzero = Some(i);
    }

    let spacing = grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let mut run_start: Option<usize> = None;
    for i in 0..=phis.len() {
        let small = i < phis.len() && phis[i].abs() < SINGULAR_LEVEL;
        match (small, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(j)) => {
                let (a, b) = (grid[j], grid[i - 1]);
                if b - a > spacing * (1.0 + 1e-9) {
                    log::warn!("switching function vanishes on [{a}, {b}]: candidate singular arc");
                    report.singular_candidates.push((a, b));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(report)
}

/// `<lambda, f>`: the Hamiltonian without its running cost.
pub fn costate_pairing(l: &Costate, rate: &StateRate) -> f64 {
    l.dot(rate)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::dynamics::{field_base, PayoffMatrix};

    fn payoffs(theta: f64) -> GamePayoffs {
        GamePayoffs::new(
            PayoffMatrix::new(3.0, 1.0, 6.0, 2.0),
            PayoffMatrix::new(4.5, 4.0, 3.0, 3.0),
            theta,
        )
        .unwrap()
        .with_gamma(0.5)
        .unwrap()
    }

    fn incentive() -> ProblemSpec {
        ProblemSpec::incentive(payoffs(0.7), SystemState::planar(0.7, 0.3), 100.0, 1.0).unwrap()
    }

    fn propaganda(c2: f64) -> ProblemSpec {
        ProblemSpec::propaganda(
            payoffs(0.5),
            SystemState::with_opinion(0.5, 0.3, 0.3),
            50.0,
            1.0,
            c2,
        )
        .unwrap()
    }

    fn awareness(c2: f64) -> ProblemSpec {
        ProblemSpec::awareness(
            payoffs(0.5),
            SystemState::with_opinion(0.5, 0.3, 0.3),
            50.0,
            1.0,
            c2,
        )
        .unwrap()
    }

    #[test]
    fn constructors_enforce_shape() {
        let p = payoffs(0.5);
        let planar = SystemState::planar(0.5, 0.3);
        let opinion = SystemState::with_opinion(0.5, 0.3, 0.3);
        assert!(ProblemSpec::incentive(p, opinion, 10.0, 1.0).is_err());
        assert!(ProblemSpec::incentive(p, planar, 10.0, 0.0).is_err());
        assert!(ProblemSpec::incentive(p, SystemState::planar(0.0, 0.3), 10.0, 1.0).is_err());
        assert!(ProblemSpec::incentive(p, planar, -1.0, 1.0).is_err());
        assert!(ProblemSpec::propaganda(p, planar, 10.0, 1.0, 1.0).is_err());
        assert!(ProblemSpec::awareness(p, opinion, 10.0, 1.0, 0.0).is_err());
        let no_gamma = GamePayoffs::new(p.a1(), p.a0(), 0.5).unwrap();
        assert!(matches!(
            ProblemSpec::propaganda(no_gamma, opinion, 10.0, 1.0, 1.0),
            Err(Error::MissingGamma)
        ));
    }

    #[test]
    fn hamiltonian_examples() {
        let zero2 = Costate::zero(2);
        let zero3 = Costate::zero(3);
        let s2 = SystemState::planar(0.4, 0.5);
        assert_relative_eq!(incentive().hamiltonian(&s2, &zero2, 0.7), 0.25);
        let s3 = SystemState::with_opinion(0.4, 0.5, 0.2);
        assert_relative_eq!(propaganda(1.0).hamiltonian(&s3, &zero3, 1.0), -0.375);

        let spec = incentive();
        let l = Costate {
            x: 0.8,
            n: -1.3,
            o: None,
        };
        let s = SystemState::planar(0.3, 0.6);
        let rate = field_base(spec.payoffs(), &s);
        assert_relative_eq!(
            spec.hamiltonian(&s, &l, 0.0),
            costate_pairing(&l, &rate) + s.n * s.n,
            epsilon = 1e-15
        );
    }

    #[test]
    fn costate_field_examples() {
        let s2 = SystemState::planar(0.4, 0.5);
        let c = incentive().costate_field(&s2, &Costate::zero(2), 1.0);
        assert_eq!((c.x, c.n, c.o), (0.0, -1.0, None));
        let s3 = SystemState::with_opinion(0.4, 0.5, 0.2);
        let c = propaganda(1.0).costate_field(&s3, &Costate::zero(3), 1.0);
        assert_eq!(c.x, 0.0);
        assert_relative_eq!(c.n, -0.5);
        assert_eq!(c.o, Some(0.0));
    }

    #[test]
    fn maximizer_examples() {
        let s2 = SystemState::planar(0.4, 0.5);
        let up = Costate {
            x: 0.1,
            n: -3.0,
            o: None,
        };
        assert_eq!(incentive().pointwise_maximizer(&s2, &up), 1.0);
        let down = Costate { x: -0.1, ..up };
        assert_eq!(incentive().pointwise_maximizer(&s2, &down), -1.0);
        assert_eq!(incentive().pointwise_maximizer(&s2, &Costate::zero(2)), 1.0);

        let s3 = SystemState::with_opinion(0.4, 0.5, 0.2);
        assert_eq!(
            propaganda(1.0).pointwise_maximizer(&s3, &Costate { o: Some(0.0), ..up }),
            0.0
        );
        // lambda_o (o - n) > 0 selects the clamped branch.
        let l = Costate {
            x: 0.0,
            n: 0.0,
            o: Some(-2.0),
        };
        assert_eq!(awareness(1.0).pointwise_maximizer(&s3, &l), 0.0);
        let l = Costate { o: Some(2.0), ..l };
        assert_relative_eq!(awareness(1.0).pointwise_maximizer(&s3, &l), 0.6);
        let huge = Costate { o: Some(1e9), ..l };
        assert_eq!(awareness(1e-3).pointwise_maximizer(&s3, &huge), AWARENESS_CAP);
    }

    #[test]
    fn switching_function_examples() {
        let s = SystemState::planar(0.5, 0.5);
        let l = |x| Costate { x, n: 0.3, o: None };
        assert_eq!(switching_function(&s, &l(0.0)), 0.0);
        assert_relative_eq!(switching_function(&s, &l(2.0)), 0.125);
        assert!(switching_function(&s, &l(-1e-3)) < 0.0);
    }

    fn arb_state(dim: usize) -> impl Strategy<Value = SystemState> {
        (0.05f64..0.95, 0.05f64..0.95, 0.05f64..0.95).prop_map(move |(x, n, o)| {
            if dim == 2 {
                SystemState::planar(x, n)
            } else {
                SystemState::with_opinion(x, n, o)
            }
        })
    }

    fn arb_costate(dim: usize) -> impl Strategy<Value = Costate> {
        (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0).prop_map(move |(a, b, c)| Costate {
            x: a,
            n: b,
            o: (dim == 3).then_some(c),
        })
    }

    fn all_specs() -> Vec<ProblemSpec> {
        vec![incentive(), propaganda(1.0), propaganda(0.3), awareness(0.7)]
    }

    proptest! {
        #[test]
        fn hamiltonian_generates_state_field(
            s3 in arb_state(3), l3 in arb_costate(3), u in 0.0f64..3.0
        ) {
            let h = 1e-6;
            for spec in all_specs() {
                let dim = spec.state_dim();
                let s = SystemState::from_slice(&s3.to_vec(), dim);
                let l = Costate::from_slice(&l3.to_vec(), dim);
                let rate = spec.state_field(&s, u).unwrap().to_vec();
                for i in 0..dim {
                    let mut lp = l.to_vec(); lp[i] += h;
                    let mut lm = l.to_vec(); lm[i] -= h;
                    let fd = (spec.hamiltonian(&s, &Costate::from_slice(&lp, dim), u)
                        - spec.hamiltonian(&s, &Costate::from_slice(&lm, dim), u)) / (2.0 * h);
                    prop_assert!((fd - rate[i]).abs() <= 1e-6 * rate[i].abs().max(1.0));
                }
            }
        }

        #[test]
        fn propaganda_maximizer_zeroes_the_u_derivative(s in arb_state(3), l in arb_costate(3), c2 in 0.01f64..5.0) {
            let spec = propaganda(c2);
            let u = spec.pointwise_maximizer(&s, &l);
            let o = s.o.unwrap();
            let dh_du = l.o.unwrap() * o * (1.0 - o) - c2 * u;
            prop_assert!(dh_du.abs() < 1e-12);
        }

        #[test]
        fn maximizer_beats_random_admissible_controls(
            s3 in arb_state(3), l3 in arb_costate(3), vs in proptest::collection::vec(0.0f64..1.0, 1000)
        ) {
            for spec in all_specs() {
                let dim = spec.state_dim();
                let s = SystemState::from_slice(&s3.to_vec(), dim);
                let l = Costate::from_slice(&l3.to_vec(), dim);
                let best = spec.pointwise_maximizer(&s, &l);
                prop_assert!(spec.is_admissible(best));
                let h_best = spec.hamiltonian(&s, &l, best);
                let (lo, hi) = match spec.kind() {
                    ProblemKind::Incentive => (-1.0, 1.0),
                    ProblemKind::Propaganda => (-50.0, 50.0),
                    ProblemKind::Awareness => (0.0, 50.0),
                };
                for v in &vs {
                    let v = lo + (hi - lo) * v;
                    prop_assert!(h_best >= spec.hamiltonian(&s, &l, v) - 1e-12);
                }
            }
        }

        #[test]
        fn incentive_hamiltonian_is_affine_in_u(s in arb_state(2), l in arb_costate(2), a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let spec = incentive();
            let mid = spec.hamiltonian(&s, &l, 0.5 * (a + b));
            let avg = 0.5 * (spec.hamiltonian(&s, &l, a) + spec.hamiltonian(&s, &l, b));
            prop_assert!((mid - avg).abs() < 1e-12);
        }
    }

    #[test]
    fn manufactured_crossing_gives_one_switch() {
        use crate::odeint::{integrate_backward, integrate_forward};
        let spec = incentive();
        let cfg = IntegratorConfig::default();
        let grid: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        let states = integrate_forward(
            |_, _, _, dy| {
                dy.fill(0.0);
                Ok(())
            },
            &[0.5, 0.5],
            &[0.0, 10.0],
            &cfg,
        )
        .unwrap();
        let costates = integrate_backward(
            |_, _, _, dl| {
                dl[0] = 1.0;
                dl[1] = 0.0;
                Ok(())
            },
            &[5.0, -1.0],
            &[10.0, 0.0],
            &cfg,
        )
        .unwrap();
        let report = detect_switches(&spec, &states, &costates, &grid).unwrap();
        assert_eq!(report.switches.len(), 1);
        let sw = report.switches[0];
        assert!((sw.time - 5.0).abs() < 1e-6);
        assert_eq!((sw.u_before, sw.u_after), (-1.0, 1.0));
        assert!(sw.is_transversal());
        assert!(report.singular_candidates.is_empty());

        // Constant-sign costate: no switches.
        let flat = integrate_backward(
            |_, _, _, dl| {
                dl.fill(0.0);
                Ok(())
            },
            &[2.0, 0.0],
            &[10.0, 0.0],
            &cfg,
        )
        .unwrap();
        let report = detect_switches(&spec, &states, &flat, &grid).unwrap();
        assert!(report.switches.is_empty());

        // Identically zero costate: one long singular candidate.
        let zero = integrate_backward(
            |_, _, _, dl| {
                dl.fill(0.0);
                Ok(())
            },
            &[0.0, 0.0],
            &[10.0, 0.0],
            &cfg,
        )
        .unwrap();
        let report = detect_switches(&spec, &states, &zero, &grid).unwrap();
        assert_eq!(report.singular_candidates, vec![(0.0, 10.0)]);

        let mut buf = Vec::new();
        SwitchReport {
            switches: vec![sw],
            singular_candidates: vec![],
        }
        .write_csv(&mut buf)
        .unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("time,phi,u_before,u_after\n"));
    }
}
