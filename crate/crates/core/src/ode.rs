//! Adaptive integration with dense output, event location and trajectory
//! fate classification.
//!
//! The integrator is the Dormand-Prince 5(4) pair with its standard
//! continuous extension. It is generic over the state dimension so the
//! variational equations (12 components) reuse the same code as the flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, rhs, State, SystemParams, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub t_max: f64,
    pub escape_radius: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            t_max: 100.0,
            escape_radius: 1e3,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("t_max", self.t_max),
            ("escape_radius", self.escape_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::Input(format!("{name} must be positive, got {v}")));
            }
        }
        if self.rel_tol < 1e-14 {
            return Err(Error::Input(format!(
                "rel_tol must be at least 1e-14, got {:e}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

// Dormand-Prince 5(4) tableau. The system is autonomous so the nodes c_i are not needed.
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

/// Accepted steps of an integration together with the continuous extension
/// on every interval.
#[derive(Debug, Clone)]
pub(crate) struct DenseSolution<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub dy: Vec<[f64; N]>,
    /// Per interval: `ydiff, bspl, rc4, rc5`.
    cont: Vec<[[f64; N]; 4]>,
    /// Per interval: scaled local error estimate of the accepted step.
    pub err: Vec<f64>,
}

impl<const N: usize> DenseSolution<N> {
    fn new(t0: f64, y0: [f64; N], dy0: [f64; N]) -> Self {
        Self {
            t: vec![t0],
            y: vec![y0],
            dy: vec![dy0],
            cont: Vec::new(),
            err: Vec::new(),
        }
    }

    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn last(&self) -> &[f64; N] {
        self.y.last().unwrap()
    }

    pub fn intervals(&self) -> usize {
        self.t.len() - 1
    }

    /// Interpolant on interval `i` at local fraction `theta` in `[0, 1]`.
    pub fn eval_local(&self, i: usize, theta: f64) -> [f64; N] {
        if theta == 0.0 {
            return self.y[i];
        }
        if theta == 1.0 {
            return self.y[i + 1];
        }
        let th1 = 1.0 - theta;
        let y0 = &self.y[i];
        let c = &self.cont[i];
        std::array::from_fn(|k| {
            y0[k] + theta * (c[0][k] + th1 * (c[1][k] + theta * (c[2][k] + th1 * c[3][k])))
        })
    }

    /// Index of the interval containing `t` (clamped to the ends).
    pub fn interval_of(&self, t: f64) -> usize {
        let n = self.intervals();
        if n == 0 {
            return 0;
        }
        match self.t.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        if self.intervals() == 0 {
            return self.y[0];
        }
        if let Ok(i) = self.t.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            return self.y[i];
        }
        let i = self.interval_of(t);
        let h = self.t[i + 1] - self.t[i];
        self.eval_local(i, ((t - self.t[i]) / h).clamp(0.0, 1.0))
    }
}

pub(crate) enum Control {
    Continue,
    Stop,
}

fn scaled_norm<const N: usize>(e: &[f64; N], y0: &[f64; N], y1: &[f64; N], rtol: f64, atol: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..N {
        let sk = atol + rtol * y0[k].abs().max(y1[k].abs());
        let r = e[k] / sk;
        acc += r * r;
    }
    (acc / N as f64).sqrt()
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|k| {
        let mut s = 0.0;
        for (c, v) in terms {
            s += c * v[k];
        }
        y[k] + h * s
    })
}

fn initial_step<const N: usize, F: Fn(&[f64; N]) -> [f64; N]>(
    f: &F,
    y0: &[f64; N],
    f0: &[f64; N],
    rtol: f64,
    atol: f64,
    hmax: f64,
) -> f64 {
    let sk: [f64; N] = std::array::from_fn(|k| atol + rtol * y0[k].abs());
    let rms = |v: &[f64; N]| {
        (v.iter().zip(sk.iter()).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / N as f64).sqrt()
    };
    let dnf = rms(f0);
    let dny = rms(y0);
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * dny / dnf
    };
    h = h.min(hmax);
    let y1 = axpy(y0, h, &[(1.0, f0)]);
    let f1 = f(&y1);
    let diff: [f64; N] = std::array::from_fn(|k| f1[k] - f0[k]);
    let der2 = rms(&diff) / h;
    let der12 = dnf.max(der2);
    let h1 = if der12 <= 1e-15 {
        (1e-6f64).max(h * 1e-3)
    } else {
        (0.01 / der12).powf(1.0 / 5.0)
    };
    (100.0 * h).min(h1).min(hmax)
}

/// Integrates the autonomous system `y' = f(y)` from `t0` towards `t_end`.
/// `control` is called after every accepted step and may stop the run.
/// On step-size underflow the partial solution is returned in the error.
pub(crate) fn solve<const N: usize, F, C>(
    f: F,
    y0: [f64; N],
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
    mut control: C,
) -> std::result::Result<DenseSolution<N>, (DenseSolution<N>, String)>
where
    F: Fn(&[f64; N]) -> [f64; N],
    C: FnMut(&DenseSolution<N>) -> Control,
{
    let rtol = cfg.rel_tol;
    let atol = cfg.abs_tol;
    let hmax = cfg.max_step.min((t_end - t0).abs().max(f64::MIN_POSITIVE));
    let mut k1 = f(&y0);
    let mut sol = DenseSolution::new(t0, y0, k1);
    if t_end <= t0 {
        return Ok(sol);
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = initial_step(&f, &y, &k1, rtol, atol, hmax);
    let mut rejected_last = false;
    const MAX_STEPS: usize = 50_000_000;

    for _ in 0..MAX_STEPS {
        if t >= t_end {
            break;
        }
        let mut last = false;
        if t + h * 1.01 >= t_end {
            h = t_end - t;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) || !h.is_finite() {
            return Err((sol, format!("step size underflow (h = {h:e})")));
        }

        let k2 = f(&axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(&axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(&axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(&axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let ys = axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let k6 = f(&ys);
        let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(&y1);
        let e: [f64; N] = std::array::from_fn(|k| {
            h * (E1 * k1[k] + E3 * k3[k] + E4 * k4[k] + E5 * k5[k] + E6 * k6[k] + E7 * k7[k])
        });
        let finite = y1.iter().all(|v| v.is_finite());
        let err = if finite {
            scaled_norm(&e, &y, &y1, rtol, atol)
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            let ydiff: [f64; N] = std::array::from_fn(|k| y1[k] - y[k]);
            let bspl: [f64; N] = std::array::from_fn(|k| h * k1[k] - ydiff[k]);
            let rc4: [f64; N] = std::array::from_fn(|k| ydiff[k] - h * k7[k] - bspl[k]);
            let rc5: [f64; N] = std::array::from_fn(|k| {
                h * (D1 * k1[k] + D3 * k3[k] + D4 * k4[k] + D5 * k5[k] + D6 * k6[k] + D7 * k7[k])
            });
            t = if last { t_end } else { t + h };
            y = y1;
            k1 = k7;
            sol.t.push(t);
            sol.y.push(y);
            sol.dy.push(k1);
            sol.cont.push([ydiff, bspl, rc4, rc5]);
            sol.err.push(err);

            if let Control::Stop = control(&sol) {
                return Ok(sol);
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            rejected_last = false;
            h = (h * fac).min(hmax);
        } else {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            rejected_last = true;
            h *= fac;
        }
    }
    if t < t_end {
        return Err((sol, "maximum number of steps exceeded".into()));
    }
    Ok(sol)
}

/// Why an integration stopped before `t_span.1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    Escaped { t: f64, state: State },
}

/// Numerical solution curve with dense output. `t = t_start` is the initial
/// condition. For backward runs the stored times are the reversed time
/// `tau = -t` and the stored field is the negated one.
#[derive(Debug, Clone)]
pub struct Trajectory {
    params: SystemParams,
    backward: bool,
    pub(crate) sol: DenseSolution<3>,
    termination: Termination,
}

impl Trajectory {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn is_backward(&self) -> bool {
        self.backward
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn len(&self) -> usize {
        self.sol.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sol.t.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.sol.t
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        self.sol.y.iter().map(|a| State::from(*a))
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, State)> + '_ {
        self.sol.t.iter().copied().zip(self.states())
    }

    pub fn t_start(&self) -> f64 {
        self.sol.t_start()
    }

    pub fn t_end(&self) -> f64 {
        self.sol.t_end()
    }

    pub fn final_state(&self) -> State {
        State::from(*self.sol.last())
    }

    /// Dense output; exact at the stored sample times.
    pub fn state_at(&self, t: f64) -> State {
        State::from(self.sol.eval(t))
    }

    /// Field that generated the trajectory at `s` (negated for backward runs).
    pub fn field(&self, s: &Vec3) -> Vec3 {
        let f = rhs(&self.params, s);
        if self.backward {
            f.map(|v| -v)
        } else {
            f
        }
    }

    /// Largest local error estimate (scaled by the tolerances) over all steps.
    pub fn max_step_error(&self) -> f64 {
        self.sol.err.iter().copied().fold(0.0, f64::max)
    }
}

fn run(
    params: &SystemParams,
    s0: State,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    backward: bool,
) -> Result<Trajectory> {
    params.validate()?;
    cfg.validate()?;
    if !s0.is_finite() {
        return Err(Error::Domain(format!("non-finite initial state {s0:?}")));
    }
    if !(t_span.1 > t_span.0) {
        return Err(Error::Input(format!(
            "time span must be increasing, got {:?}",
            t_span
        )));
    }
    let sign = if backward { -1.0 } else { 1.0 };
    let f = |s: &Vec3| rhs(params, s).map(|v| sign * v);
    let radius = cfg.escape_radius;
    let mut escaped = None;
    let result = solve(f, s0.to_array(), t_span.0, t_span.1, cfg, |sol| {
        let y = sol.last();
        if fields::norm(y) >= radius {
            escaped = Some((sol.t_end(), State::from(*y)));
            Control::Stop
        } else {
            Control::Continue
        }
    });
    let termination = match escaped {
        Some((t, state)) => Termination::Escaped { t, state },
        None => Termination::Completed,
    };
    match result {
        Ok(sol) => Ok(Trajectory {
            params: params.clone(),
            backward,
            sol,
            termination,
        }),
        Err((sol, message)) => Err(Error::IntegrationFailure {
            t: sol.t_end(),
            message,
            partial: Box::new(Trajectory {
                params: params.clone(),
                backward,
                sol,
                termination,
            }),
        }),
    }
}

/// Integrates the flow forward over `t_span`, stopping early once
/// `|state| >= cfg.escape_radius`.
pub fn integrate(
    params: &SystemParams,
    s0: State,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    run(params, s0, t_span, cfg, false)
}

/// Integrates the negated field, i.e. the flow in reversed time.
pub fn integrate_backward(
    params: &SystemParams,
    s0: State,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    run(params, s0, t_span, cfg, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

/// Finds a root of `g(theta)` in `[lo, hi]` (with a sign change) on the local
/// fraction of one interval. Illinois regula falsi with bisection fallback.
pub(crate) fn refine_root<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut glo = g(lo);
    let mut ghi = g(hi);
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    let mut side = 0i8;
    for iter in 0..200 {
        let mut x = if iter % 4 == 3 {
            0.5 * (lo + hi)
        } else {
            (lo * ghi - hi * glo) / (ghi - glo)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let gx = g(x);
        if gx == 0.0 {
            return Ok(x);
        }
        if (gx < 0.0) == (glo < 0.0) {
            lo = x;
            glo = gx;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            ghi = gx;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1e-300) {
            break;
        }
    }
    let (x, gx) = if glo.abs() <= ghi.abs() { (lo, g(lo)) } else { (hi, g(hi)) };
    if gx.abs() < EVENT_TOLERANCE {
        Ok(x)
    } else {
        Err(Error::EventRefinement {
            t_lo: lo,
            t_hi: hi,
            residual: gx.abs(),
        })
    }
}

pub const EVENT_TOLERANCE: f64 = 1e-12;

/// Sign changes of `event` along a dense solution, refined to
/// `|event| < 1e-12`. A zero at the start time is not reported.
pub(crate) fn locate_in<const N: usize, G: Fn(&[f64; N]) -> f64>(
    sol: &DenseSolution<N>,
    event: G,
    direction: Direction,
    first_interval: usize,
) -> Result<Vec<(f64, [f64; N])>> {
    let mut out = Vec::new();
    if sol.intervals() == 0 {
        return Ok(out);
    }
    let mut g0 = event(&sol.y[first_interval]);
    for i in first_interval..sol.intervals() {
        let g1 = event(&sol.y[i + 1]);
        let rising = g0 < 0.0 && g1 >= 0.0;
        let falling = g0 > 0.0 && g1 <= 0.0;
        let wanted = match direction {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Any => rising || falling,
        };
        if wanted {
            let theta = refine_root(|th| event(&sol.eval_local(i, th)), 0.0, 1.0)?;
            let h = sol.t[i + 1] - sol.t[i];
            let t = if theta == 1.0 { sol.t[i + 1] } else { sol.t[i] + theta * h };
            out.push((t, sol.eval_local(i, theta)));
        }
        g0 = g1;
    }
    Ok(out)
}

/// All sign changes of `event` along `traj` in the requested direction.
pub fn locate_event<G: Fn(&State) -> f64>(
    traj: &Trajectory,
    event: G,
    direction: Direction,
) -> Result<Vec<(f64, State)>> {
    let found = locate_in(&traj.sol, |a: &Vec3| event(&State::from(*a)), direction, 0)?;
    Ok(found.into_iter().map(|(t, a)| (t, State::from(a))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FateTag {
    Bounded,
    Escaped,
    ConvergedToFixedPoint,
    OnInvariantLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fate {
    pub tag: FateTag,
    /// Time at which the verdict was determined.
    pub t: f64,
    pub state: State,
    /// Where the trajectory ended up (for `OnInvariantLine`, the end of the
    /// run along the line).
    pub final_state: State,
    pub final_t: f64,
    pub escaped: bool,
    /// Length of the dwell window used for fixed-point convergence.
    pub fixed_point_window: f64,
    pub fixed_point_tolerance: f64,
}

pub const FIXED_POINT_WINDOW: f64 = 10.0;
pub const FIXED_POINT_TOLERANCE: f64 = 1e-8;
pub const INVARIANT_LINE_TOLERANCE: f64 = 1e-12;

/// Long-run behaviour of the forward orbit of `s0` up to `cfg.t_max`.
pub fn classify_fate(params: &SystemParams, s0: State, cfg: &IntegratorConfig) -> Result<Fate> {
    let traj = integrate(params, s0, (0.0, cfg.t_max), cfg)?;
    let (final_t, final_state) = (traj.t_end(), traj.final_state());
    let escaped = matches!(traj.termination(), Termination::Escaped { .. });
    let base = Fate {
        tag: FateTag::Bounded,
        t: final_t,
        state: final_state,
        final_state,
        final_t,
        escaped,
        fixed_point_window: FIXED_POINT_WINDOW,
        fixed_point_tolerance: FIXED_POINT_TOLERANCE,
    };

    if params.on_known_invariant_line(&s0.to_array(), INVARIANT_LINE_TOLERANCE) {
        return Ok(Fate {
            tag: FateTag::OnInvariantLine,
            t: 0.0,
            state: s0,
            ..base
        });
    }
    if let Termination::Escaped { t, state } = traj.termination() {
        return Ok(Fate {
            tag: FateTag::Escaped,
            t,
            state,
            ..base
        });
    }
    for fp in params.known_fixed_points() {
        let near = |s: &Vec3| {
            fields::norm(&[s[0] - fp[0], s[1] - fp[1], s[2] - fp[2]]) < FIXED_POINT_TOLERANCE
        };
        // last time the trajectory was outside the tolerance ball
        let entry = traj.sol.y.iter().rposition(|s| !near(s));
        let entry_idx = match entry {
            None => 0,
            Some(i) if i + 1 < traj.len() => i + 1,
            Some(_) => continue,
        };
        let t_entry = traj.sol.t[entry_idx];
        if final_t - t_entry >= FIXED_POINT_WINDOW {
            return Ok(Fate {
                tag: FateTag::ConvergedToFixedPoint,
                t: t_entry,
                state: State::from(traj.sol.y[entry_idx]),
                ..base
            });
        }
    }
    Ok(base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn nh(q: f64) -> SystemParams {
        SystemParams::NoseHoover { q }
    }

    #[test]
    fn invariant_line_is_followed_exactly() {
        let cfg = IntegratorConfig::default();
        let traj = integrate(&nh(1.0), State::new(0.0, 0.0, 5.0), (0.0, 10.0), &cfg).unwrap();
        for (t, s) in traj.samples() {
            assert!(s.x.abs().max(s.y.abs()) < 1e-9);
            assert!((s.z - (5.0 - t)).abs() < 1e-8);
        }
        for k in 0..=1000 {
            let t = 0.01 * k as f64;
            let s = traj.state_at(t);
            assert!((s.z - (5.0 - t)).abs() < 1e-8);
        }
        assert_eq!(traj.t_end(), 10.0);
    }

    #[test]
    fn hopf_converges_to_unit_circle() {
        let p = SystemParams::ValidationHopf { mu: 1.0, omega: 1.0 };
        let traj = integrate(&p, State::new(0.5, 0.0, 0.3), (0.0, 50.0), &Default::default()).unwrap();
        let s = traj.final_state();
        assert!(((s.x * s.x + s.y * s.y).sqrt() - 1.0).abs() < 1e-6);
        let traj = integrate(&p, State::new(1.0, 0.0, 0.0), (0.0, 50.0), &Default::default()).unwrap();
        let s = traj.final_state();
        // exact solution on the circle is a rotation by angle t
        assert!((s.x - 50f64.cos()).abs() < 1e-8 && (s.y - 50f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn dense_output_reproduces_samples() {
        let traj =
            integrate(&nh(1.0), State::new(1.0, 0.0, 0.0), (0.0, 20.0), &Default::default()).unwrap();
        for (t, s) in traj.samples() {
            assert_eq!(traj.state_at(t), s);
        }
        // interior: compare with a tighter reference run
        let fine = integrate(
            &nh(1.0),
            State::new(1.0, 0.0, 0.0),
            (0.0, 20.0),
            &IntegratorConfig::default().with_tolerances(1e-13, 1e-15),
        )
        .unwrap();
        for k in 0..2000 {
            let t = 0.01 * k as f64 + 0.0037;
            let a = traj.state_at(t);
            let b = fine.state_at(t);
            assert!((a.x - b.x).abs() + (a.y - b.y).abs() + (a.z - b.z).abs() < 1e-8);
        }
    }

    #[test]
    fn escape_terminates_run() {
        // the invariant line carries z linearly to -infinity
        let cfg = IntegratorConfig::default().with_t_max(1100.0);
        let traj = integrate(&nh(1.0), State::new(0.0, 0.0, 5.0), (0.0, 1100.0), &cfg).unwrap();
        match traj.termination() {
            Termination::Escaped { t, state } => {
                assert!(state.norm() >= cfg.escape_radius);
                assert!((t - 1005.0).abs() < 0.2);
                assert_eq!(traj.t_end(), t);
            }
            Termination::Completed => panic!("expected escape"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = IntegratorConfig::default();
        cfg.rel_tol = 1e-16;
        assert!(integrate(&nh(1.0), State::ORIGIN, (0.0, 1.0), &cfg).is_err());
        assert!(integrate(&nh(1.0), State::ORIGIN, (1.0, 0.0), &Default::default()).is_err());
    }

    #[test]
    fn hopf_event_period() {
        let p = SystemParams::ValidationHopf { mu: 1.0, omega: 1.0 };
        let traj = integrate(&p, State::new(1.0, 0.0, 0.0), (0.0, 40.0), &Default::default()).unwrap();
        let ev = locate_event(&traj, |s| s.x, Direction::Rising).unwrap();
        assert!(ev.len() >= 5);
        for w in ev.windows(2) {
            assert!((w[1].0 - w[0].0 - 2.0 * PI).abs() < 1e-8);
        }
        for (_, s) in &ev {
            assert!(s.x.abs() < EVENT_TOLERANCE);
        }
    }

    #[test]
    fn start_time_event_is_excluded() {
        let p = SystemParams::ValidationHopf { mu: 1.0, omega: 1.0 };
        // starts on y = 0 moving upward
        let traj = integrate(&p, State::new(1.0, 0.0, 0.0), (0.0, 10.0), &Default::default()).unwrap();
        let ev = locate_event(&traj, |s| s.y, Direction::Any).unwrap();
        assert!(ev[0].0 > 0.0);
        assert!((ev[0].0 - PI).abs() < 1e-8);
    }

    #[test]
    fn refine_root_converges_fully() {
        let x = refine_root(|t| (t - 0.3).powi(3), 0.0, 1.0).unwrap();
        assert!((x - 0.3).abs() < 1e-12);
        let x = refine_root(|t| t * t - 0.5, 0.0, 1.0).unwrap();
        assert!((x - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn events_are_deterministic() {
        let run = || {
            let traj =
                integrate(&nh(1.0), State::new(1.0, 0.0, 0.0), (0.0, 50.0), &Default::default()).unwrap();
            locate_event(&traj, |s| s.y, Direction::Any).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0.to_bits(), y.0.to_bits());
        }
    }

    #[test]
    fn fates() {
        let long = IntegratorConfig::default().with_t_max(1100.0);
        let f = classify_fate(&nh(1.0), State::new(0.0, 0.0, 5.0), &long).unwrap();
        assert_eq!(f.tag, FateTag::OnInvariantLine);
        assert!(f.escaped);
        assert!(f.final_state.z < -900.0);

        let cfg = IntegratorConfig::default().with_t_max(200.0);

        let f = classify_fate(&nh(1.0), State::new(1.0, 0.0, 0.0), &cfg).unwrap();
        assert_eq!(f.tag, FateTag::Bounded);

        // Hopf: a point on the z-axis is on an invariant line; off-axis points
        // are attracted to the cycle, which is bounded
        let hopf = SystemParams::ValidationHopf { mu: 1.0, omega: 1.0 };
        let f = classify_fate(&hopf, State::new(0.2, 0.1, 1.0), &cfg).unwrap();
        assert_eq!(f.tag, FateTag::Bounded);
    }

    #[test]
    fn converges_to_fixed_point() {
        // Moore-Spiegel with T, R chosen so the origin is a sink: R < 0
        let p = SystemParams::MooreSpiegel { t: 1.0, r: -1.0 };
        let cfg = IntegratorConfig::default().with_t_max(200.0);
        let f = classify_fate(&p, State::new(0.1, 0.0, 0.0), &cfg).unwrap();
        assert_eq!(f.tag, FateTag::ConvergedToFixedPoint);
        assert!(f.t < 200.0 - FIXED_POINT_WINDOW);
    }
}
