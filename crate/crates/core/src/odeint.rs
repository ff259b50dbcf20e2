//! Adaptive Dormand-Prince 5(4) integration with dense output.
//!
//! Integration runs over a sequence of knots and restarts at every knot, so
//! a right-hand side that is only piecewise smooth (a zero-order-hold control)
//! never has a step straddling a discontinuity. The right-hand side receives
//! the index of the segment it is being evaluated on.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance band outside `[0, 1]` that is clamped rather than rejected.
pub const BOX_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Defaults to one hundredth of the integration span.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    pub initial_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            max_step: None,
            initial_step: 1e-3,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(
                    format!("integrator.{name}"),
                    format!("must be positive, got {v}"),
                ))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("initial_step", self.initial_step)?;
        if let Some(h) = self.max_step {
            positive("max_step", h)?;
        }
        Ok(())
    }

    /// Both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Accepted nodes of an integration run plus one continuous extension per step.
#[derive(Clone, Debug)]
pub struct Trajectory {
    dim: usize,
    direction: Direction,
    times: Vec<f64>,
    values: Vec<f64>,
    // Five coefficient vectors per step.
    dense: Vec<f64>,
    steps_h: Vec<f64>,
}

impl Trajectory {
    fn new(dim: usize, direction: Direction, t0: f64, y0: &[f64]) -> Self {
        Self {
            dim,
            direction,
            times: vec![t0],
            values: y0.to_vec(),
            dense: Vec::new(),
            steps_h: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times
            .iter()
            .copied()
            .zip(self.values.chunks_exact(self.dim))
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one node")
    }

    pub fn last_value(&self) -> &[f64] {
        self.node(self.len() - 1)
    }

    /// Covered interval as `(min, max)`.
    pub fn interval(&self) -> (f64, f64) {
        let (a, b) = (self.start_time(), self.end_time());
        (a.min(b), a.max(b))
    }

    pub fn covers(&self, t: f64) -> bool {
        let (lo, hi) = self.interval();
        t >= lo && t <= hi
    }

    fn push_step(&mut self, t: f64, y: &[f64], h: f64, coeffs: &[f64]) {
        self.times.push(t);
        self.values.extend_from_slice(y);
        self.dense.extend_from_slice(coeffs);
        self.steps_h.push(h);
    }

    /// Index `i` of the step `[times[i], times[i + 1]]` containing `t`.
    fn locate(&self, t: f64) -> usize {
        let steps = self.times.len() - 1;
        let i = match self.direction {
            Direction::Forward => self.times.partition_point(|&s| s <= t),
            Direction::Backward => self.times.partition_point(|&s| s >= t),
        };
        i.saturating_sub(1).min(steps.saturating_sub(1))
    }

    /// Dense evaluation at `t`. Nodes are returned exactly.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if !self.covers(t) {
            let (start, end) = self.interval();
            return Err(Error::OutsideTrajectory { t, start, end });
        }
        if self.times.len() == 1 {
            out.copy_from_slice(self.node(0));
            return Ok(());
        }
        let i = self.locate(t);
        if t == self.times[i] {
            out.copy_from_slice(self.node(i));
            return Ok(());
        }
        if t == self.times[i + 1] {
            out.copy_from_slice(self.node(i + 1));
            return Ok(());
        }
        let s = (t - self.times[i]) / self.steps_h[i];
        let s1 = 1.0 - s;
        let d = self.dim;
        let c = &self.dense[i * 5 * d..(i + 1) * 5 * d];
        for (j, o) in out.iter_mut().enumerate() {
            *o = c[j] + s * (c[d + j] + s1 * (c[2 * d + j] + s * (c[3 * d + j] + s1 * c[4 * d + j])));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Samples on the uniform grid `lo, lo + spacing, ...` over the covered
    /// interval, in increasing time.
    pub fn sample(&self, spacing: f64) -> Result<Vec<(f64, Vec<f64>)>> {
        let (lo, hi) = self.interval();
        uniform_grid(lo, hi, spacing)
            .into_iter()
            .map(|t| Ok((t, self.eval(t)?)))
            .collect()
    }

    /// Writes `t,<names...>` rows sampled every `spacing` time units.
    pub fn write_csv<W: Write>(&self, writer: W, names: &[&str], spacing: f64) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t"];
        header.extend_from_slice(names);
        w.write_record(&header)?;
        for (t, y) in self.sample(spacing)? {
            let mut row = vec![t.to_string()];
            row.extend(y.iter().take(names.len()).map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<trajectory csv>", e))?;
        Ok(())
    }
}

/// Points `lo + k * spacing` up to `hi`. When the span is a whole number of
/// spacings the last point is exactly `hi`.
pub fn uniform_grid(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let span = hi - lo;
    let ratio = span / spacing;
    let whole = ratio.round();
    if (ratio - whole).abs() < 1e-9 * whole.max(1.0) {
        let m = whole as usize;
        (0..=m).map(|k| lo + span * k as f64 / m.max(1) as f64).collect()
    } else {
        let m = ratio.floor() as usize;
        (0..=m).map(|k| lo + spacing * k as f64).collect()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_SHRINK: f64 = 0.2;
const MAX_GROWTH: f64 = 10.0;

struct Workspace {
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    y1: Vec<f64>,
    coeffs: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
            y1: vec![0.0; dim],
            coeffs: vec![0.0; 5 * dim],
        }
    }
}

fn combine(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[j];
        }
        *o = y[j] + h * acc;
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Core driver shared by the public entry points. `boxed` leading coordinates
/// are held to the unit box.
fn integrate<F>(
    mut field: F,
    y0: &[f64],
    knots: &[f64],
    cfg: &IntegratorConfig,
    boxed: usize,
) -> Result<Trajectory>
where
    F: FnMut(usize, f64, &[f64], &mut [f64]) -> Result<()>,
{
    cfg.validate()?;
    if knots.len() < 2 {
        return Err(Error::invalid("knots", "need at least a start and end time"));
    }
    let sign = (knots[1] - knots[0]).signum();
    if sign == 0.0 || knots.windows(2).any(|w| (w[1] - w[0]) * sign <= 0.0) {
        return Err(Error::invalid("knots", "times must be strictly monotone"));
    }
    let direction = if sign > 0.0 {
        Direction::Forward
    } else {
        Direction::Backward
    };
    let dim = y0.len();
    let span = (knots[knots.len() - 1] - knots[0]).abs();
    let max_step = cfg.max_step.unwrap_or(span / 100.0);
    let h_min = 1e-12 * span;

    let mut traj = Trajectory::new(dim, direction, knots[0], y0);
    let mut ws = Workspace::new(dim);
    let mut y = y0.to_vec();
    let mut h_next = cfg.initial_step.min(max_step);

    for (seg, pair) in knots.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let mut t = a;
        field(seg, t, &y, &mut ws.k[0])?;
        if !all_finite(&ws.k[0]) {
            return Err(Error::NonFinite { t, state: y });
        }
        loop {
            let remaining = (b - t) * sign;
            if remaining <= 0.0 {
                break;
            }
            let mut h = h_next.min(max_step);
            let last = h >= remaining || remaining - h < 1e-9 * span;
            if last {
                h = remaining;
            }
            let hs = h * sign;

            let err = {
                let Workspace { k, stage, y1, .. } = &mut ws;
                let (k1, rest) = k.split_at_mut(1);
                let (k2, rest) = rest.split_at_mut(1);
                let (k3, rest) = rest.split_at_mut(1);
                let (k4, rest) = rest.split_at_mut(1);
                let (k5, rest) = rest.split_at_mut(1);
                let (k6, k7) = rest.split_at_mut(1);
                let (k1, k2, k3, k4, k5, k6, k7) = (
                    &k1[0], &mut k2[0], &mut k3[0], &mut k4[0], &mut k5[0], &mut k6[0],
                    &mut k7[0],
                );
                combine(stage, &y, hs, &[(A21, k1)]);
                field(seg, t + C2 * hs, stage, k2)?;
                combine(stage, &y, hs, &[(A31, k1), (A32, k2)]);
                field(seg, t + C3 * hs, stage, k3)?;
                combine(stage, &y, hs, &[(A41, k1), (A42, k2), (A43, k3)]);
                field(seg, t + C4 * hs, stage, k4)?;
                combine(stage, &y, hs, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
                field(seg, t + C5 * hs, stage, k5)?;
                combine(
                    stage,
                    &y,
                    hs,
                    &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
                );
                let t_end = if last { b } else { t + hs };
                field(seg, t_end, stage, k6)?;
                combine(
                    y1,
                    &y,
                    hs,
                    &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)],
                );
                field(seg, t_end, y1, k7)?;

                let mut sum = 0.0;
                for j in 0..dim {
                    let e = hs
                        * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j]
                            + E7 * k7[j]);
                    let sc = cfg.abs_tol + cfg.rel_tol * y[j].abs().max(y1[j].abs());
                    sum += (e / sc).powi(2);
                }
                (sum / dim as f64).sqrt()
            };

            if !err.is_finite() || !all_finite(&ws.y1) || !all_finite(&ws.k[6]) {
                h_next = h * MIN_SHRINK;
                if h_next < h_min {
                    return Err(Error::NonFinite { t, state: y });
                }
                continue;
            }

            let grow = err.powf(0.2) / SAFETY;
            if err <= 1.0 {
                let t_new = if last { b } else { t + hs };
                {
                    let Workspace { k, y1, coeffs, .. } = &mut ws;
                    let d = dim;
                    for j in 0..d {
                        let dy = y1[j] - y[j];
                        let bspl = hs * k[0][j] - dy;
                        coeffs[j] = y[j];
                        coeffs[d + j] = dy;
                        coeffs[2 * d + j] = bspl;
                        coeffs[3 * d + j] = dy - hs * k[6][j] - bspl;
                        coeffs[4 * d + j] = hs
                            * (D1 * k[0][j] + D3 * k[2][j] + D4 * k[3][j] + D5 * k[4][j]
                                + D6 * k[5][j]
                                + D7 * k[6][j]);
                    }
                }
                let mut clamped = false;
                for i in 0..boxed.min(dim) {
                    let v = ws.y1[i];
                    if !(-BOX_SLACK..=1.0 + BOX_SLACK).contains(&v) {
                        return Err(Error::LeftUnitBox {
                            t: t_new,
                            index: i,
                            value: v,
                            state: ws.y1.clone(),
                        });
                    }
                    if !(0.0..=1.0).contains(&v) {
                        ws.y1[i] = v.clamp(0.0, 1.0);
                        clamped = true;
                    }
                }
                traj.push_step(t_new, &ws.y1, hs, &ws.coeffs);
                y.copy_from_slice(&ws.y1);
                t = t_new;
                if clamped {
                    field(seg, t, &y, &mut ws.k[0])?;
                } else {
                    let (head, tail) = ws.k.split_at_mut(6);
                    head[0].copy_from_slice(&tail[0]);
                }
                let proposed = h / grow.max(1.0 / MAX_GROWTH);
                // A step shortened to land on a knot says little about the
                // natural step size; keep the earlier proposal then.
                if !(last && h < h_next) {
                    h_next = proposed;
                }
                if last {
                    break;
                }
            } else {
                h_next = h / grow.min(1.0 / MIN_SHRINK);
                if h_next < h_min {
                    return Err(Error::StepUnderflow {
                        t,
                        h: h_next,
                        state: y,
                    });
                }
            }
        }
    }
    Ok(traj)
}

/// Integrates forward over increasing `knots`, restarting at each knot.
pub fn integrate_forward<F>(
    field: F,
    y0: &[f64],
    knots: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: FnMut(usize, f64, &[f64], &mut [f64]) -> Result<()>,
{
    integrate_forward_boxed(field, y0, knots, cfg, 0)
}

/// Like [`integrate_forward`], with the first `boxed` coordinates held to
/// `[0, 1]`: excursions up to [`BOX_SLACK`] are clamped, larger ones abort.
pub fn integrate_forward_boxed<F>(
    field: F,
    y0: &[f64],
    knots: &[f64],
    cfg: &IntegratorConfig,
    boxed: usize,
) -> Result<Trajectory>
where
    F: FnMut(usize, f64, &[f64], &mut [f64]) -> Result<()>,
{
    if knots.len() >= 2 && knots[1] <= knots[0] {
        return Err(Error::invalid("knots", "forward integration needs increasing times"));
    }
    integrate(field, y0, knots, cfg, boxed)
}

/// Integrates from the terminal value `y_end` at `knots[0]` back to the last
/// knot. `knots` must be decreasing.
pub fn integrate_backward<F>(
    field: F,
    y_end: &[f64],
    knots: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: FnMut(usize, f64, &[f64], &mut [f64]) -> Result<()>,
{
    if knots.len() >= 2 && knots[1] >= knots[0] {
        return Err(Error::invalid("knots", "backward integration needs decreasing times"));
    }
    integrate(field, y_end, knots, cfg, 0)
}

/// `int integrand(t) dt` over the knot span, by integrating `q' = integrand(t)`.
pub fn quadrature_running_cost<F>(
    mut integrand: F,
    knots: &[f64],
    cfg: &IntegratorConfig,
) -> Result<f64>
where
    F: FnMut(usize, f64) -> f64,
{
    let traj = integrate_forward(
        |seg, t, _, dq| {
            dq[0] = integrand(seg, t);
            Ok(())
        },
        &[0.0],
        knots,
        cfg,
    )?;
    Ok(traj.last_value()[0])
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn decay(_: usize, _: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = -y[0];
        Ok(())
    }

    #[test]
    fn exponential_decay() {
        let traj = integrate_forward(decay, &[1.0], &[0.0, 1.0], &IntegratorConfig::default())
            .unwrap();
        assert!((traj.last_value()[0] - (-1.0f64).exp()).abs() < 1e-8);
        assert_eq!(traj.end_time(), 1.0);
    }

    #[test]
    fn dense_output_at_nodes_is_exact() {
        let traj = integrate_forward(
            decay,
            &[1.0],
            &[0.0, 0.3, 1.0, 2.5],
            &IntegratorConfig::default(),
        )
        .unwrap();
        for (t, y) in traj.nodes() {
            assert_eq!(traj.eval(t).unwrap(), y);
        }
        assert!(traj.times().contains(&0.3));
        assert!(traj.eval(2.6).is_err());
        assert!(traj.eval(-0.1).is_err());
    }

    #[test]
    fn dense_output_between_nodes() {
        let cfg = IntegratorConfig {
            max_step: Some(0.5),
            ..IntegratorConfig::default()
        };
        let traj = integrate_forward(decay, &[1.0], &[0.0, 5.0], &cfg).unwrap();
        for k in 0..50 {
            let t = 0.0137 + 0.0997 * k as f64;
            assert!((traj.eval(t).unwrap()[0] - (-t).exp()).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn zero_field_backward_stays_zero() {
        let traj = integrate_backward(
            |_, _, _, dy| {
                dy.fill(0.0);
                Ok(())
            },
            &[0.0, 0.0],
            &[3.0, 1.0, 0.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(traj.direction(), Direction::Backward);
        assert_eq!(traj.node(0), &[0.0, 0.0]);
        for t in [0.0, 0.5, 2.2, 3.0] {
            assert_eq!(traj.eval(t).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn backward_inhomogeneous_linear() {
        let cfg = IntegratorConfig::default();
        let solve = |sign: f64| {
            integrate_backward(
                move |_, _, y, dy| {
                    dy[0] = sign * (y[0] - 1.0);
                    Ok(())
                },
                &[0.0],
                &[1.0, 0.0],
                &cfg,
            )
            .unwrap()
        };
        // l' = l - 1, l(1) = 0  =>  l(t) = 1 - e^{t - 1}.
        let grow = solve(1.0);
        assert_eq!(grow.end_time(), 0.0);
        assert!((grow.last_value()[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-8);
        // l' = -l + 1, l(1) = 0  =>  l(t) = 1 - e^{1 - t}.
        let decay = solve(-1.0);
        assert!((decay.last_value()[0] - (1.0 - 1.0f64.exp())).abs() < 1e-8);
    }

    #[test]
    fn backward_then_forward_round_trip() {
        let cfg = IntegratorConfig::default();
        let fwd = integrate_forward(decay, &[1.0], &[0.0, 2.0], &cfg).unwrap();
        let back = integrate_backward(decay, fwd.last_value(), &[2.0, 0.0], &cfg).unwrap();
        assert!((back.last_value()[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn quadrature_examples() {
        let cfg = IntegratorConfig::default();
        assert_relative_eq!(
            quadrature_running_cost(|_, _| 1.0, &[0.0, 100.0], &cfg).unwrap(),
            100.0,
            epsilon = 1e-9
        );
        assert_eq!(quadrature_running_cost(|_, _| 0.0, &[0.0, 100.0], &cfg).unwrap(), 0.0);
        let third = quadrature_running_cost(|_, t| t * t, &[0.0, 1.0], &cfg).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn piecewise_constant_forcing_is_exact_at_knots() {
        // y' = u_k on segment k; y is piecewise linear.
        let u = [1.0, -2.0, 0.5, 3.0];
        let knots = [0.0, 0.25, 0.5, 0.75, 1.0];
        let traj = integrate_forward(
            |seg, _, _, dy| {
                dy[0] = u[seg];
                Ok(())
            },
            &[0.0],
            &knots,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(traj.last_value()[0], 0.25 * (1.0 - 2.0 + 0.5 + 3.0), epsilon = 1e-14);
    }

    #[test]
    fn underflow_reports_time_and_state() {
        // Finite-time blow-up at t = 1.
        let err = integrate_forward(
            |_, _, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            &[1.0],
            &[0.0, 2.0],
            &IntegratorConfig::default(),
        )
        .unwrap_err();
        match err {
            Error::StepUnderflow { t, .. } | Error::NonFinite { t, .. } => {
                assert!(t > 0.9 && t < 1.0 + 1e-6, "failed at {t}")
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn leaving_the_box_aborts() {
        let err = integrate_forward_boxed(
            |_, _, _, dy| {
                dy[0] = 1.0;
                Ok(())
            },
            &[0.5],
            &[0.0, 1.0],
            &IntegratorConfig::default(),
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::LeftUnitBox { index: 0, .. }));
    }

    #[test]
    fn rejects_bad_configs_and_knots() {
        let bad = IntegratorConfig {
            rel_tol: 0.0,
            ..IntegratorConfig::default()
        };
        assert!(integrate_forward(decay, &[1.0], &[0.0, 1.0], &bad).is_err());
        let cfg = IntegratorConfig::default();
        assert!(integrate_forward(decay, &[1.0], &[1.0, 0.0], &cfg).is_err());
        assert!(integrate_forward(decay, &[1.0], &[0.0, 0.5, 0.5, 1.0], &cfg).is_err());
        assert!(integrate_backward(decay, &[1.0], &[0.0, 1.0], &cfg).is_err());
    }

    #[test]
    fn uniform_grid_hits_end() {
        let g = uniform_grid(0.0, 100.0, 0.1);
        assert_eq!(g.len(), 1001);
        assert_eq!(*g.last().unwrap(), 100.0);
        let g = uniform_grid(0.0, 1.05, 0.1);
        assert_eq!(g.len(), 11);
    }

    #[test]
    fn csv_export_header_and_rows() {
        let traj = integrate_forward(decay, &[1.0], &[0.0, 1.0], &IntegratorConfig::default())
            .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, &["y"], 0.25).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,y");
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("1,"));
    }
}
