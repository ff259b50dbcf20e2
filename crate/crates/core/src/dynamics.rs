//! Game-environment feedback dynamics.
//!
//! A population of cooperators (fraction `x`) and defectors plays a 2x2 game
//! whose payoffs interpolate between a replete-state game `A1` and a
//! deplete-state game `A0` according to the environmental state `n`.
//! Cooperators restore the environment at rate `theta`, defectors degrade it
//! at unit rate. The opinion extension adds a public belief `o` that lags
//! behind `n` with learning rate `gamma`; the population then plays the game
//! selected by `o` instead of `n`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::odeint::{integrate_forward_boxed, IntegratorConfig};

/// Payoffs of a symmetric 2x2 game, rows for the focal strategy
/// (cooperate, defect) and columns for the opponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub p: f64,
}

/// Game class of a 2x2 matrix, keyed by the signs of `R - T` and `S - P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameClass {
    DefectionDominant,
    Coordination,
    AntiCoordination,
    CooperationDominant,
}

impl PayoffMatrix {
    pub const fn new(r: f64, s: f64, t: f64, p: f64) -> Self {
        Self { r, s, t, p }
    }

    /// Builds a matrix from a `[R, S, T, P]` row.
    pub const fn from_row(row: [f64; 4]) -> Self {
        Self::new(row[0], row[1], row[2], row[3])
    }

    pub const fn to_row(self) -> [f64; 4] {
        [self.r, self.s, self.t, self.p]
    }

    pub fn is_finite(&self) -> bool {
        self.to_row().iter().all(|v| v.is_finite())
    }

    /// `R - T`: advantage of cooperating against a cooperator.
    pub fn cooperator_margin(&self) -> f64 {
        self.r - self.t
    }

    /// `S - P`: advantage of cooperating against a defector.
    pub fn defector_margin(&self) -> f64 {
        self.s - self.p
    }

    /// Fitness of cooperators minus fitness of defectors at cooperator fraction `x`.
    pub fn fitness_diff(&self, x: f64) -> f64 {
        self.cooperator_margin() * x + self.defector_margin() * (1.0 - x)
    }

    /// Zero-margin ties are folded into the non-cooperative side.
    pub fn class(&self) -> GameClass {
        match (self.cooperator_margin() > 0.0, self.defector_margin() > 0.0) {
            (true, true) => GameClass::CooperationDominant,
            (true, false) => GameClass::Coordination,
            (false, true) => GameClass::AntiCoordination,
            (false, false) => GameClass::DefectionDominant,
        }
    }

    fn mix(&self, other: &PayoffMatrix, w: f64) -> PayoffMatrix {
        PayoffMatrix {
            r: w * self.r + (1.0 - w) * other.r,
            s: w * self.s + (1.0 - w) * other.s,
            t: w * self.t + (1.0 - w) * other.t,
            p: w * self.p + (1.0 - w) * other.p,
        }
    }
}

impl fmt::Display for PayoffMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}; {}, {}]", self.r, self.s, self.t, self.p)
    }
}

/// Payoff structure of the feedback-evolving game.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GamePayoffs {
    a1: PayoffMatrix,
    a0: PayoffMatrix,
    theta: f64,
    gamma: Option<f64>,
}

impl GamePayoffs {
    /// `a1` must be a prisoner's dilemma (`R1 < T1`, `S1 < P1`) and `theta > 0`.
    pub fn new(a1: PayoffMatrix, a0: PayoffMatrix, theta: f64) -> Result<Self> {
        if !a1.is_finite() {
            return Err(Error::invalid("a1", format!("non-finite payoff in {a1}")));
        }
        if !a0.is_finite() {
            return Err(Error::invalid("a0", format!("non-finite payoff in {a0}")));
        }
        if !(a1.r < a1.t && a1.s < a1.p) {
            return Err(Error::invalid(
                "a1",
                format!("replete-state game {a1} must satisfy R1 < T1 and S1 < P1"),
            ));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::invalid("theta", format!("must be positive, got {theta}")));
        }
        Ok(Self {
            a1,
            a0,
            theta,
            gamma: None,
        })
    }

    /// Attaches the opinion learning rate.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
        }
        self.gamma = Some(gamma);
        Ok(self)
    }

    pub fn a1(&self) -> PayoffMatrix {
        self.a1
    }

    pub fn a0(&self) -> PayoffMatrix {
        self.a0
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn require_gamma(&self) -> Result<f64> {
        self.gamma.ok_or(Error::MissingGamma)
    }

    /// Cooperator fraction at which the environment neither grows nor decays.
    pub fn critical_fraction(&self) -> f64 {
        1.0 / (1.0 + self.theta)
    }

    /// Environment-dependent game `n A1 + (1 - n) A0`. Out-of-range `n` is
    /// clamped to `[0, 1]` with a warning.
    pub fn blend(&self, n: f64) -> PayoffMatrix {
        let w = if (0.0..=1.0).contains(&n) {
            n
        } else {
            log::warn!("environment {n} outside [0, 1]; clamping before blending payoffs");
            n.clamp(0.0, 1.0)
        };
        self.a1.mix(&self.a0, w)
    }

    /// Fitness difference `g(x, env)` between cooperators and defectors in the
    /// game blended at `env`. Affine in both arguments.
    pub fn fitness_diff(&self, x: f64, env: f64) -> f64 {
        env * self.a1.fitness_diff(x) + (1.0 - env) * self.a0.fitness_diff(x)
    }

    /// `dg/dx`, constant in `x`.
    pub fn fitness_diff_dx(&self, env: f64) -> f64 {
        let slope = |m: &PayoffMatrix| m.cooperator_margin() - m.defector_margin();
        env * slope(&self.a1) + (1.0 - env) * slope(&self.a0)
    }

    /// `dg/d(env)`, constant in `env`.
    pub fn fitness_diff_denv(&self, x: f64) -> f64 {
        self.a1.fitness_diff(x) - self.a0.fitness_diff(x)
    }

    /// Per-capita environmental growth `theta x - (1 - x)`.
    pub fn restoration_rate(&self, x: f64) -> f64 {
        -1.0 + (1.0 + self.theta) * x
    }
}

/// Point in the unit box: cooperator fraction, environment and (optionally)
/// public opinion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub x: f64,
    pub n: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub o: Option<f64>,
}

impl SystemState {
    pub const fn planar(x: f64, n: f64) -> Self {
        Self { x, n, o: None }
    }

    pub const fn with_opinion(x: f64, n: f64, o: f64) -> Self {
        Self { x, n, o: Some(o) }
    }

    pub fn dim(&self) -> usize {
        if self.o.is_some() {
            3
        } else {
            2
        }
    }

    /// Reads the first two or three entries of `y`; the caller picks `dim`.
    pub fn from_slice(y: &[f64], dim: usize) -> Self {
        match dim {
            2 => Self::planar(y[0], y[1]),
            _ => Self::with_opinion(y[0], y[1], y[2]),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.x, self.n];
        v.extend(self.o);
        v
    }

    fn coords(&self) -> impl Iterator<Item = (&'static str, f64)> {
        [("x", Some(self.x)), ("n", Some(self.n)), ("o", self.o)]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
    }

    /// Every coordinate lies in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.coords() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("{v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Every coordinate lies strictly inside `(0, 1)`.
    pub fn validate_interior(&self) -> Result<()> {
        for (name, v) in self.coords() {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(
                    name,
                    format!("{v} must lie in the open interval (0, 1)"),
                ));
            }
        }
        Ok(())
    }

    pub fn opinion(&self) -> Result<f64> {
        self.o
            .ok_or_else(|| Error::invalid("o", "state has no opinion coordinate"))
    }
}

/// Time derivative of a [`SystemState`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateRate {
    pub x: f64,
    pub n: f64,
    pub o: Option<f64>,
}

impl StateRate {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.x, self.n];
        v.extend(self.o);
        v
    }

    /// Writes the rate into the leading entries of `out`.
    pub fn write_to(&self, out: &mut [f64]) {
        out[0] = self.x;
        out[1] = self.n;
        if let Some(o) = self.o {
            out[2] = o;
        }
    }
}

/// Uncontrolled game-environment dynamics. Any opinion coordinate is ignored.
pub fn field_base(p: &GamePayoffs, s: &SystemState) -> StateRate {
    let SystemState { x, n, .. } = *s;
    StateRate {
        x: x * (1.0 - x) * p.fitness_diff(x, n),
        n: n * (1.0 - n) * p.restoration_rate(x),
        o: None,
    }
}

/// Dynamics with the incentive `u` added to `R0`.
pub fn field_incentive(p: &GamePayoffs, s: &SystemState, u: f64) -> StateRate {
    let mut rate = field_base(p, s);
    rate.x += incentive_gain(s) * u;
    rate
}

/// `x^2 (1 - x) (1 - n)`: sensitivity of `dx/dt` to the incentive.
pub fn incentive_gain(s: &SystemState) -> f64 {
    s.x * s.x * (1.0 - s.x) * (1.0 - s.n)
}

/// Opinion-driven dynamics: the game is selected by `o`, which relaxes towards `n`.
pub fn field_opinion(p: &GamePayoffs, s: &SystemState) -> Result<StateRate> {
    opinion_with_rate(p, s, p.require_gamma()?)
}

fn opinion_with_rate(p: &GamePayoffs, s: &SystemState, learning: f64) -> Result<StateRate> {
    let o = s.opinion()?;
    let SystemState { x, n, .. } = *s;
    Ok(StateRate {
        x: x * (1.0 - x) * p.fitness_diff(x, o),
        n: n * (1.0 - n) * p.restoration_rate(x),
        o: Some(-learning * (o - n)),
    })
}

/// Opinion dynamics with an additive propaganda push `o (1 - o) u`.
pub fn field_propaganda(p: &GamePayoffs, s: &SystemState, u: f64) -> Result<StateRate> {
    let mut rate = field_opinion(p, s)?;
    let o = s.opinion()?;
    rate.o = rate.o.map(|d| d + o * (1.0 - o) * u);
    Ok(rate)
}

/// Opinion dynamics with the learning rate raised to `gamma + u`.
pub fn field_awareness(p: &GamePayoffs, s: &SystemState, u: f64) -> Result<StateRate> {
    if u < 0.0 || u.is_nan() {
        return Err(Error::NegativeAwareness(u));
    }
    opinion_with_rate(p, s, p.require_gamma()? + u)
}

/// Interior equilibrium `(x*, n*)` of [`field_base`], if it lies in `(0, 1)^2`.
///
/// `x* = 1 / (1 + theta)` zeroes the environmental growth, and `n*` solves the
/// affine equation `g(x*, n) = 0`.
pub fn interior_fixed_point(p: &GamePayoffs) -> Option<(f64, f64)> {
    let x = p.critical_fraction();
    let g0 = p.fitness_diff(x, 0.0);
    let g1 = p.fitness_diff(x, 1.0);
    if g0 == g1 {
        return None;
    }
    let n = g0 / (g0 - g1);
    (n > 0.0 && n < 1.0).then_some((x, n))
}

/// Jacobian of [`field_base`] at `(x, n)`, row-major.
pub fn jacobian_base(p: &GamePayoffs, x: f64, n: f64) -> [[f64; 2]; 2] {
    let g = p.fitness_diff(x, n);
    let rate = p.restoration_rate(x);
    [
        [
            (1.0 - 2.0 * x) * g + x * (1.0 - x) * p.fitness_diff_dx(n),
            x * (1.0 - x) * p.fitness_diff_denv(x),
        ],
        [n * (1.0 - n) * (1.0 + p.theta()), (1.0 - 2.0 * n) * rate],
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl fmt::Display for Eigenvalue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im == 0.0 {
            write!(f, "{:.6}", self.re)
        } else {
            let sign = if self.im < 0.0 { '-' } else { '+' };
            write!(f, "{:.6}{}{:.6}i", self.re, sign, self.im.abs())
        }
    }
}

/// Eigenvalues of a real 2x2 matrix from its trace and determinant.
pub fn eigenvalues_2x2(m: &[[f64; 2]; 2]) -> [Eigenvalue; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    let half = tr / 2.0;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [
            Eigenvalue { re: half + r, im: 0.0 },
            Eigenvalue { re: half - r, im: 0.0 },
        ]
    } else {
        let i = (-disc).sqrt();
        [
            Eigenvalue { re: half, im: i },
            Eigenvalue { re: half, im: -i },
        ]
    }
}

/// Dynamical regimes of the uncontrolled game-environment system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "TOC1")]
    Toc1,
    #[serde(rename = "TOC2")]
    Toc2,
    #[serde(rename = "TOC3")]
    Toc3,
    #[serde(rename = "TOC4")]
    Toc4,
    V1,
    V2,
    #[serde(rename = "OTOC")]
    Otoc,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Toc1 => "TOC1",
            Regime::Toc2 => "TOC2",
            Regime::Toc3 => "TOC3",
            Regime::Toc4 => "TOC4",
            Regime::V1 => "V1",
            Regime::V2 => "V2",
            Regime::Otoc => "OTOC",
        })
    }
}

/// Outcome of a long uncontrolled run used as classification evidence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationVerdict {
    pub horizon: f64,
    pub final_state: SystemState,
    /// Largest `n` over the last tenth of the run.
    pub late_max_n: f64,
    pub depleted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub label: Regime,
    /// Set when an eigenvalue sits within `1e-9` of the imaginary axis or a
    /// deplete-state margin is exactly zero.
    pub boundary: bool,
    pub fixed_point: Option<(f64, f64)>,
    pub eigenvalues: Option<[Eigenvalue; 2]>,
    pub deplete_class: GameClass,
    pub simulation: SimulationVerdict,
}

const BOUNDARY_EPS: f64 = 1e-9;
const DIAGNOSTIC_HORIZON: f64 = 1000.0;
const DEPLETION_LEVEL: f64 = 1e-3;

/// Labels the regime of the uncontrolled dynamics.
///
/// A linearly stable interior equilibrium gives V2 when the deplete-state game
/// is cooperation-dominant (the equilibrium is the only attractor) and V1
/// otherwise. An unstable interior equilibrium with a cooperation-dominant
/// deplete game leaves the corner heteroclinic cycle as the attractor (OTOC).
/// All remaining cases are tragedies, numbered by the deplete-state game class,
/// unless the diagnostic run from `(0.5, 0.5)` keeps the environment alive, in
/// which case the label is V1.
pub fn classify_regime(p: &GamePayoffs) -> Result<RegimeReport> {
    let fixed_point = interior_fixed_point(p);
    let eigenvalues = fixed_point.map(|(x, n)| eigenvalues_2x2(&jacobian_base(p, x, n)));
    let deplete_class = p.a0().class();
    let simulation = diagnostic_run(p)?;

    let a0 = p.a0();
    let mut boundary = a0.cooperator_margin() == 0.0 || a0.defector_margin() == 0.0;
    if let Some(ev) = &eigenvalues {
        boundary |= ev.iter().any(|e| e.re.abs() < BOUNDARY_EPS);
    }

    let stable = eigenvalues.map(|ev| ev.iter().all(|e| e.re < 0.0));
    let label = match (stable, deplete_class) {
        (Some(true), GameClass::CooperationDominant) => Regime::V2,
        (Some(true), _) => Regime::V1,
        (Some(false), GameClass::CooperationDominant) => Regime::Otoc,
        _ if !simulation.depleted => Regime::V1,
        (_, GameClass::Coordination) => Regime::Toc1,
        (_, GameClass::DefectionDominant) => Regime::Toc2,
        (_, GameClass::AntiCoordination) => Regime::Toc3,
        (_, GameClass::CooperationDominant) => Regime::Toc4,
    };

    Ok(RegimeReport {
        label,
        boundary,
        fixed_point,
        eigenvalues,
        deplete_class,
        simulation,
    })
}

fn diagnostic_run(p: &GamePayoffs) -> Result<SimulationVerdict> {
    let cfg = IntegratorConfig {
        max_step: Some(1.0),
        ..IntegratorConfig::default()
    };
    let knots = [0.0, DIAGNOSTIC_HORIZON];
    let traj = integrate_forward_boxed(
        |_, _, y, dy| {
            field_base(p, &SystemState::planar(y[0], y[1])).write_to(dy);
            Ok(())
        },
        &[0.5, 0.5],
        &knots,
        &cfg,
        2,
    )?;
    let cutoff = 0.9 * DIAGNOSTIC_HORIZON;
    let late_max_n = traj
        .nodes()
        .filter(|(t, _)| *t >= cutoff)
        .map(|(_, y)| y[1])
        .fold(0.0, f64::max);
    let end = traj.last_value();
    Ok(SimulationVerdict {
        horizon: DIAGNOSTIC_HORIZON,
        final_state: SystemState::planar(end[0], end[1]),
        late_max_n,
        depleted: late_max_n < DEPLETION_LEVEL,
    })
}

/// Lie bracket `[F, G]` of the drift `F` and incentive direction `G`, divided
/// by the positive factor `x^2 (1 - x) (1 - n)`, together with whether it is
/// linearly independent of `G = (x^2 (1 - x) (1 - n), 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LieBracketCheck {
    pub bracket: [f64; 2],
    pub independent: bool,
}

pub fn lie_bracket_check(p: &GamePayoffs, s: &SystemState) -> LieBracketCheck {
    let SystemState { x, n, .. } = *s;
    let first = p.fitness_diff(x, n) * (1.0 - x)
        - n * p.restoration_rate(x)
        - x * (1.0 - x) * p.fitness_diff_dx(n);
    let second = -n * (1.0 - n) * (1.0 + p.theta());
    LieBracketCheck {
        bracket: [first, second],
        independent: second != 0.0,
    }
}

/// The unscaled bracket `dG/dy F - dF/dy G`.
pub fn lie_bracket(p: &GamePayoffs, s: &SystemState) -> [f64; 2] {
    let scale = incentive_gain(s);
    let check = lie_bracket_check(p, s);
    [scale * check.bracket[0], scale * check.bracket[1]]
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;

    fn v2(theta: f64) -> GamePayoffs {
        GamePayoffs::new(
            PayoffMatrix::new(3.0, 1.0, 6.0, 2.0),
            PayoffMatrix::new(4.5, 4.0, 3.0, 3.0),
            theta,
        )
        .unwrap()
    }

    fn with_a0(a0: [f64; 4], theta: f64) -> GamePayoffs {
        GamePayoffs::new(
            PayoffMatrix::new(3.0, 1.0, 6.0, 2.0),
            PayoffMatrix::from_row(a0),
            theta,
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_dilemma_replete_game() {
        let a0 = PayoffMatrix::new(4.5, 4.0, 3.0, 3.0);
        assert!(GamePayoffs::new(PayoffMatrix::new(7.0, 1.0, 6.0, 2.0), a0, 0.5).is_err());
        assert!(GamePayoffs::new(PayoffMatrix::new(3.0, 2.5, 6.0, 2.0), a0, 0.5).is_err());
        assert!(GamePayoffs::new(PayoffMatrix::new(3.0, 1.0, 6.0, 2.0), a0, 0.0).is_err());
        assert!(v2(0.5).with_gamma(-1.0).is_err());
        let nan = PayoffMatrix::new(f64::NAN, 4.0, 3.0, 3.0);
        assert!(GamePayoffs::new(PayoffMatrix::new(3.0, 1.0, 6.0, 2.0), nan, 0.5).is_err());
    }

    #[test]
    fn blend_endpoints_and_midpoint() {
        let p = v2(0.5);
        assert_eq!(p.blend(1.0), PayoffMatrix::new(3.0, 1.0, 6.0, 2.0));
        assert_eq!(p.blend(0.0), PayoffMatrix::new(4.5, 4.0, 3.0, 3.0));
        assert_eq!(p.blend(0.5), PayoffMatrix::new(3.75, 2.5, 4.5, 2.5));
        assert_eq!(p.blend(1.5), p.blend(1.0));
    }

    #[test]
    fn fitness_diff_examples() {
        let p = v2(0.5);
        assert_relative_eq!(p.fitness_diff(0.5, 1.0), -2.0);
        assert_relative_eq!(p.fitness_diff(2.0 / 3.0, 0.0), 4.0 / 3.0, epsilon = 1e-15);
        let tie = GamePayoffs::new(
            PayoffMatrix::new(3.0, 1.0, 6.0, 2.0),
            PayoffMatrix::new(2.0, 5.0, 2.0, 5.0),
            0.5,
        )
        .unwrap();
        // A0 ties give g = 0 only in the deplete state.
        assert_eq!(tie.fitness_diff(0.3, 0.0), 0.0);
    }

    #[test]
    fn base_field_on_edges() {
        let p = v2(0.5);
        for n in [0.0, 0.2, 0.7, 1.0] {
            let left = field_base(&p, &SystemState::planar(0.0, n));
            assert_eq!(left.x, 0.0);
            assert_relative_eq!(left.n, -n * (1.0 - n));
            let right = field_base(&p, &SystemState::planar(1.0, n));
            assert_eq!(right.x, 0.0);
            assert_relative_eq!(right.n, 0.5 * n * (1.0 - n));
        }
    }

    #[test]
    fn fixed_points_match_hand_values() {
        let (x, n) = interior_fixed_point(&v2(0.5)).unwrap();
        assert_relative_eq!(x, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(n, 4.0 / 11.0, epsilon = 1e-15);
        let rate = field_base(&v2(0.5), &SystemState::planar(x, n));
        assert!(rate.x.abs() < 1e-12 && rate.n.abs() < 1e-12);

        let (x, n) = interior_fixed_point(&v2(0.7)).unwrap();
        assert_relative_eq!(x, 10.0 / 17.0, epsilon = 1e-15);
        assert_relative_eq!(n, 22.0 / 59.0, epsilon = 1e-15);

        // Defection-dominant A0: g0 < 0 and no interior equilibrium.
        assert!(interior_fixed_point(&with_a0([2.0, 1.0, 3.0, 3.0], 0.5)).is_none());
    }

    #[test]
    fn incentive_term() {
        let p = v2(0.5);
        let s = SystemState::planar(0.5, 0.5);
        let base = field_base(&p, &s);
        let pushed = field_incentive(&p, &s, 1.0);
        assert_relative_eq!(pushed.x - base.x, 0.0625, epsilon = 1e-15);
        assert_eq!(field_incentive(&p, &s, 0.0), base);
        for s in [SystemState::planar(1.0, 0.3), SystemState::planar(0.4, 1.0)] {
            assert_eq!(field_incentive(&p, &s, 0.9), field_base(&p, &s));
        }
    }

    #[test]
    fn opinion_fields() {
        let p = v2(0.5).with_gamma(0.5).unwrap();
        let s = SystemState::with_opinion(0.3, 0.6, 0.6);
        let rate = field_opinion(&p, &s).unwrap();
        assert_eq!(rate.o, Some(0.0));
        let base = field_base(&p, &s);
        assert_eq!((rate.x, rate.n), (base.x, base.n));

        let rate = field_opinion(&p, &SystemState::with_opinion(0.4, 0.0, 1.0)).unwrap();
        assert_relative_eq!(rate.o.unwrap(), -0.5);
        for x in [0.0, 1.0] {
            let r = field_opinion(&p, &SystemState::with_opinion(x, 0.3, 0.8)).unwrap();
            assert_eq!(r.x, 0.0);
        }
        assert!(matches!(field_opinion(&v2(0.5), &s), Err(Error::MissingGamma)));
        assert!(field_opinion(&p, &SystemState::planar(0.3, 0.3)).is_err());
    }

    #[test]
    fn propaganda_field() {
        let p = v2(0.5).with_gamma(0.5).unwrap();
        let s = SystemState::with_opinion(0.3, 0.6, 0.5);
        let plain = field_opinion(&p, &s).unwrap();
        assert_eq!(field_propaganda(&p, &s, 0.0).unwrap(), plain);
        let pushed = field_propaganda(&p, &s, -2.0).unwrap();
        assert_relative_eq!(pushed.o.unwrap() - plain.o.unwrap(), -0.5);
        for o in [0.0, 1.0] {
            let s = SystemState::with_opinion(0.3, 0.6, o);
            assert_eq!(
                field_propaganda(&p, &s, 7.0).unwrap(),
                field_opinion(&p, &s).unwrap()
            );
        }
    }

    #[test]
    fn awareness_field() {
        let p = v2(0.5).with_gamma(0.5).unwrap();
        let s = SystemState::with_opinion(0.3, 0.3, 0.8);
        assert_eq!(field_awareness(&p, &s, 0.0).unwrap(), field_opinion(&p, &s).unwrap());
        assert_relative_eq!(field_awareness(&p, &s, 1.5).unwrap().o.unwrap(), -1.0);
        let tracked = SystemState::with_opinion(0.3, 0.4, 0.4);
        assert_eq!(field_awareness(&p, &tracked, 3.0).unwrap().o, Some(0.0));
        assert!(matches!(
            field_awareness(&p, &s, -0.1),
            Err(Error::NegativeAwareness(_))
        ));
    }

    #[test]
    fn lie_bracket_examples() {
        let p = v2(0.5);
        let check = lie_bracket_check(&p, &SystemState::planar(0.3, 0.5));
        assert_relative_eq!(check.bracket[1], -0.375);
        assert!(check.independent);
        let edge = lie_bracket_check(&p, &SystemState::planar(0.3, 0.0));
        assert_eq!(edge.bracket[1], 0.0);
        assert!(!edge.independent);
    }

    #[test]
    fn regimes_of_named_payoffs() {
        let v2_report = classify_regime(&v2(0.5)).unwrap();
        assert_eq!(v2_report.label, Regime::V2);
        assert!(!v2_report.boundary);
        assert!(!v2_report.simulation.depleted);
        assert_eq!(classify_regime(&v2(0.7)).unwrap().label, Regime::V2);

        let otoc = classify_regime(&with_a0([7.0, 4.0, 3.0, 3.0], 0.5)).unwrap();
        assert_eq!(otoc.label, Regime::Otoc);
        assert!(otoc.eigenvalues.unwrap().iter().all(|e| e.re > 0.0));

        let toc1 = classify_regime(&with_a0([5.0, 2.0, 3.0, 3.0], 0.5)).unwrap();
        assert_eq!(toc1.label, Regime::Toc1);
        assert!(toc1.simulation.depleted);

        let toc2 = classify_regime(&with_a0([2.0, 1.0, 3.0, 3.0], 0.5)).unwrap();
        assert_eq!(toc2.label, Regime::Toc2);
        assert!(toc2.fixed_point.is_none());
    }

    fn fd_jacobian(f: impl Fn(f64, f64) -> [f64; 2], x: f64, n: f64) -> [[f64; 2]; 2] {
        let h = 1e-6;
        let dx = {
            let (a, b) = (f(x + h, n), f(x - h, n));
            [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)]
        };
        let dn = {
            let (a, b) = (f(x, n + h), f(x, n - h));
            [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)]
        };
        [[dx[0], dn[0]], [dx[1], dn[1]]]
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-8)
    }

    proptest! {
        #[test]
        fn blend_is_affine(n in 0.0f64..=1.0) {
            let p = v2(0.5);
            let (b1, b0, bn) = (p.blend(1.0), p.blend(0.0), p.blend(n));
            let expect = b1.mix(&b0, n);
            for (a, b) in bn.to_row().iter().zip(expect.to_row()) {
                prop_assert!((a - b).abs() < 1e-14);
            }
        }

        #[test]
        fn fitness_diff_midpoints(x1 in 0.0f64..1.0, x2 in 0.0f64..1.0, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
            let p = v2(0.5);
            let mid_x = p.fitness_diff((x1 + x2) / 2.0, e1);
            prop_assert!((mid_x - (p.fitness_diff(x1, e1) + p.fitness_diff(x2, e1)) / 2.0).abs() < 1e-12);
            let mid_e = p.fitness_diff(x1, (e1 + e2) / 2.0);
            prop_assert!((mid_e - (p.fitness_diff(x1, e1) + p.fitness_diff(x1, e2)) / 2.0).abs() < 1e-12);
        }

        #[test]
        fn zero_incentive_is_base(x in 0.0f64..=1.0, n in 0.0f64..=1.0) {
            let p = v2(0.7);
            let s = SystemState::planar(x, n);
            prop_assert_eq!(field_incentive(&p, &s, 0.0), field_base(&p, &s));
        }

        #[test]
        fn fixed_point_zeroes_field(r0 in 3.0f64..8.0, s0 in 2.0f64..6.0, theta in 0.1f64..2.0) {
            let p = with_a0([r0, s0, 3.0, 3.0], theta);
            if let Some((x, n)) = interior_fixed_point(&p) {
                let rate = field_base(&p, &SystemState::planar(x, n));
                prop_assert!(rate.x.abs() < 1e-12 && rate.n.abs() < 1e-12);
            }
        }

        #[test]
        fn analytic_jacobian_matches_differences(x in 0.05f64..0.95, n in 0.05f64..0.95) {
            let p = v2(0.5);
            let fd = fd_jacobian(|x, n| { let r = field_base(&p, &SystemState::planar(x, n)); [r.x, r.n] }, x, n);
            let an = jacobian_base(&p, x, n);
            for i in 0..2 { for j in 0..2 {
                prop_assert!((fd[i][j] - an[i][j]).abs() < 1e-7);
            }}
        }

        #[test]
        fn bracket_matches_finite_differences(x in 0.05f64..0.95, n in 0.05f64..0.95, theta in 0.2f64..1.5) {
            let p = v2(theta);
            let s = SystemState::planar(x, n);
            let drift = |x: f64, n: f64| { let r = field_base(&p, &SystemState::planar(x, n)); [r.x, r.n] };
            let control = |x: f64, n: f64| [incentive_gain(&SystemState::planar(x, n)), 0.0];
            let df = fd_jacobian(drift, x, n);
            let dg = fd_jacobian(control, x, n);
            let f = drift(x, n);
            let g = control(x, n);
            let fd = [
                dg[0][0] * f[0] + dg[0][1] * f[1] - (df[0][0] * g[0] + df[0][1] * g[1]),
                dg[1][0] * f[0] + dg[1][1] * f[1] - (df[1][0] * g[0] + df[1][1] * g[1]),
            ];
            let an = lie_bracket(&p, &s);
            prop_assert!(rel_err(an[1], fd[1]) < 1e-4, "{:?} vs {:?}", an, fd);
            if an[0].abs() > 1e-6 {
                prop_assert!(rel_err(an[0], fd[0]) < 1e-4, "{:?} vs {:?}", an, fd);
            } else {
                prop_assert!((an[0] - fd[0]).abs() < 1e-8);
            }
            let check = lie_bracket_check(&p, &s);
            prop_assert!((check.bracket[1] + n * (1.0 - n) * (1.0 + theta)).abs() < 1e-15);
            prop_assert!(check.independent);
        }
    }

    #[test]
    fn classification_ignores_common_payoff_shift() {
        for (a0, theta) in [
            ([4.5, 4.0, 3.0, 3.0], 0.5),
            ([7.0, 4.0, 3.0, 3.0], 0.5),
            ([5.0, 2.0, 3.0, 3.0], 0.5),
        ] {
            let base = with_a0(a0, theta);
            for shift in [-2.5, 1.0, 10.0] {
                let up = |m: PayoffMatrix| {
                    PayoffMatrix::from_row(m.to_row().map(|v| v + shift))
                };
                let shifted =
                    GamePayoffs::new(up(base.a1()), up(base.a0()), theta).unwrap();
                assert_eq!(
                    classify_regime(&base).unwrap().label,
                    classify_regime(&shifted).unwrap().label
                );
            }
        }
    }
}
