//! Crossings of the plane `y = 0` and the first-return map on its
//! admissible half-plane.
//!
//! A crossing is `Up` when the field's `y`-component is positive there (the
//! orbit passes from `x' < 0` into `x' > 0` for both oscillators, since
//! `x' = y`), `Down` when it is negative and `Tangent` when its magnitude is
//! below the tangency threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, rhs, State, SystemParams, Vec3};
use crate::ode::{self, Control, DenseSolution, Fate, FateTag, IntegratorConfig, Trajectory};

pub const TANGENCY_THRESHOLD: f64 = 1e-8;
/// Returns faster than this are treated as re-crossing noise.
pub const MIN_RETURN_TIME: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdmissibleRegion {
    /// `x < 0` (Nose-Hoover).
    X1,
    /// `z > 0` (Moore-Spiegel).
    U,
    FullPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub admissible_region: AdmissibleRegion,
    pub tangency_threshold: f64,
}

impl SectionSpec {
    pub fn new(admissible_region: AdmissibleRegion) -> Self {
        Self {
            admissible_region,
            tangency_threshold: TANGENCY_THRESHOLD,
        }
    }

    /// The half-plane on which the system's Up crossings live.
    pub fn for_system(params: &SystemParams) -> Self {
        match params {
            SystemParams::NoseHoover { .. } => Self::new(AdmissibleRegion::X1),
            SystemParams::MooreSpiegel { .. } => Self::new(AdmissibleRegion::U),
            _ => Self::new(AdmissibleRegion::FullPlane),
        }
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        let ok = match self.admissible_region {
            AdmissibleRegion::X1 => matches!(params, SystemParams::NoseHoover { .. }),
            AdmissibleRegion::U => matches!(params, SystemParams::MooreSpiegel { .. }),
            AdmissibleRegion::FullPlane => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "admissible region {:?} does not belong to {:?}",
                self.admissible_region,
                params.kind()
            )))
        }
    }

    pub fn admits(&self, x: f64, z: f64) -> bool {
        match self.admissible_region {
            AdmissibleRegion::X1 => x < 0.0,
            AdmissibleRegion::U => z > 0.0,
            AdmissibleRegion::FullPlane => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingKind {
    Up,
    Down,
    Tangent,
}

impl CrossingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CrossingKind::Up => "Up",
            CrossingKind::Down => "Down",
            CrossingKind::Tangent => "Tangent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub x: f64,
    pub z: f64,
    pub t: f64,
    pub state: State,
    pub speed: f64,
    pub kind: CrossingKind,
    pub tangency_threshold: f64,
}

impl SectionPoint {
    fn classify(normal: f64, threshold: f64) -> CrossingKind {
        if normal.abs() < threshold {
            CrossingKind::Tangent
        } else if normal > 0.0 {
            CrossingKind::Up
        } else {
            CrossingKind::Down
        }
    }

    fn from_crossing(normal: f64, t: f64, s: &Vec3, threshold: f64) -> Self {
        Self {
            x: s[0],
            z: s[2],
            t,
            state: State::from(*s),
            speed: normal.abs(),
            kind: Self::classify(normal, threshold),
            tangency_threshold: threshold,
        }
    }

    /// The plane point `(x, 0, z)` at time zero, classified by the field.
    pub fn on_plane(params: &SystemParams, spec: &SectionSpec, x: f64, z: f64) -> Result<Self> {
        let s = State::new(x, 0.0, z);
        let normal = fields::section_normal_component(params, s)?;
        Ok(Self::from_crossing(normal, 0.0, &s.to_array(), spec.tangency_threshold))
    }

    pub fn coords(&self) -> [f64; 2] {
        [self.x, self.z]
    }

    /// The crossing state with `y` set to exactly zero.
    pub(crate) fn plane_state(&self) -> Vec3 {
        [self.state.x, 0.0, self.state.z]
    }
}

/// Every crossing of `y = 0` along `traj`, in time order.
pub fn detect_crossings(traj: &Trajectory, spec: &SectionSpec) -> Result<Vec<SectionPoint>> {
    let found = ode::locate_in(&traj.sol, |s: &Vec3| s[1], ode::Direction::Any, 0)?;
    Ok(found
        .into_iter()
        .map(|(t, s)| {
            let normal = traj.field(&s)[1];
            SectionPoint::from_crossing(normal, t, &s, spec.tangency_threshold)
        })
        .collect())
}

/// Result of following an Up crossing to its next admissible Up crossing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReturnOutcome {
    Returned(SectionPoint),
    /// The orbit escaped or ran past `t_max` first.
    NoReturn(Fate),
}

impl ReturnOutcome {
    pub fn point(&self) -> Option<&SectionPoint> {
        match self {
            ReturnOutcome::Returned(p) => Some(p),
            ReturnOutcome::NoReturn(_) => None,
        }
    }
}

/// Integration from a section point through a number of returns.
pub(crate) struct ReturnRun<const N: usize> {
    pub sol: DenseSolution<N>,
    /// All crossings in time order (Up, Down and Tangent).
    pub crossings: Vec<SectionPoint>,
    /// Values of the full integrated state at each entry of `crossings`.
    pub crossing_states: Vec<[f64; N]>,
    /// Indices into `crossings` of the admissible Up returns.
    pub returns: Vec<usize>,
    pub fate: Option<Fate>,
}

pub(crate) fn check_start(params: &SystemParams, p: &SectionPoint, spec: &SectionSpec) -> Result<()> {
    spec.validate(params)?;
    if p.state.y.abs() > fields::PLANE_TOLERANCE {
        return Err(Error::Precondition(format!(
            "start point is off the plane (|y| = {:e})",
            p.state.y.abs()
        )));
    }
    let normal = fields::section_normal_component(params, State::new(p.x, 0.0, p.z))?;
    if normal.abs() < spec.tangency_threshold || normal < 0.0 {
        return Err(Error::Precondition(format!(
            "start point ({}, {}) is not a transverse Up crossing (normal component {normal:e})",
            p.x, p.z
        )));
    }
    if !spec.admits(p.x, p.z) {
        return Err(Error::Precondition(format!(
            "start point ({}, {}) is outside the admissible region {:?}",
            p.x, p.z, spec.admissible_region
        )));
    }
    Ok(())
}

/// Integrates `y' = f(y)` from `y0` (whose first three components are the
/// flow state, starting on the plane) until `n_returns` admissible Up
/// crossings have occurred.
pub(crate) fn run_returns<const N: usize, F>(
    params: &SystemParams,
    f: F,
    y0: [f64; N],
    spec: &SectionSpec,
    cfg: &IntegratorConfig,
    n_returns: usize,
) -> Result<ReturnRun<N>>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    cfg.validate()?;
    let mut crossings = Vec::new();
    let mut crossing_states = Vec::new();
    let mut returns = Vec::new();
    let mut failure: Option<Error> = None;
    let mut escaped: Option<(f64, Vec3)> = None;
    let threshold = spec.tangency_threshold;

    let result = ode::solve(f, y0, 0.0, cfg.t_max, cfg, |sol| {
        let i = sol.intervals() - 1;
        let y0 = sol.y[i][1];
        let y1 = sol.y[i + 1][1];
        if (y0 < 0.0 && y1 >= 0.0) || (y0 > 0.0 && y1 <= 0.0) {
            let theta = match ode::refine_root(|th| sol.eval_local(i, th)[1], 0.0, 1.0) {
                Ok(th) => th,
                Err(e) => {
                    failure = Some(e);
                    return Control::Stop;
                }
            };
            let full = sol.eval_local(i, theta);
            let t = if theta == 1.0 {
                sol.t[i + 1]
            } else {
                sol.t[i] + theta * (sol.t[i + 1] - sol.t[i])
            };
            let s = [full[0], full[1], full[2]];
            let normal = rhs(params, &s)[1];
            let point = SectionPoint::from_crossing(normal, t, &s, threshold);
            crossings.push(point);
            crossing_states.push(full);
            match point.kind {
                CrossingKind::Tangent => {
                    failure = Some(Error::TangentEncounter {
                        point: Box::new(point),
                    });
                    return Control::Stop;
                }
                CrossingKind::Up if spec.admits(point.x, point.z) && t >= MIN_RETURN_TIME => {
                    returns.push(crossings.len() - 1);
                    if returns.len() >= n_returns {
                        return Control::Stop;
                    }
                }
                _ => {}
            }
        }
        let last = sol.last();
        let s = [last[0], last[1], last[2]];
        if fields::norm(&s) >= cfg.escape_radius {
            escaped = Some((sol.t_end(), s));
            return Control::Stop;
        }
        Control::Continue
    });

    if let Some(e) = failure {
        return Err(e);
    }
    let sol = match result {
        Ok(sol) => sol,
        Err((_, message)) => {
            return Err(Error::Numerical(format!(
                "integration failed while following returns: {message}"
            )))
        }
    };
    let fate = if returns.len() >= n_returns {
        None
    } else {
        let (tag, t, s, esc) = match escaped {
            Some((t, s)) => (FateTag::Escaped, t, s, true),
            None => {
                let l = sol.last();
                (FateTag::Bounded, sol.t_end(), [l[0], l[1], l[2]], false)
            }
        };
        Some(Fate {
            tag,
            t,
            state: State::from(s),
            final_state: State::from(s),
            final_t: t,
            escaped: esc,
            fixed_point_window: ode::FIXED_POINT_WINDOW,
            fixed_point_tolerance: ode::FIXED_POINT_TOLERANCE,
        })
    };
    Ok(ReturnRun {
        sol,
        crossings,
        crossing_states,
        returns,
        fate,
    })
}

pub(crate) fn flow_returns(
    params: &SystemParams,
    p: &SectionPoint,
    spec: &SectionSpec,
    cfg: &IntegratorConfig,
    n_returns: usize,
) -> Result<ReturnRun<3>> {
    check_start(params, p, spec)?;
    run_returns(params, |s: &Vec3| rhs(params, s), p.plane_state(), spec, cfg, n_returns)
}

/// Next admissible Up crossing after `p`.
pub fn first_return(
    params: &SystemParams,
    p: &SectionPoint,
    spec: &SectionSpec,
    cfg: &IntegratorConfig,
) -> Result<ReturnOutcome> {
    nth_return(params, p, spec, cfg, 1)
}

/// The `n`-th admissible Up crossing after `p`, computed on one trajectory.
pub fn nth_return(
    params: &SystemParams,
    p: &SectionPoint,
    spec: &SectionSpec,
    cfg: &IntegratorConfig,
    n: usize,
) -> Result<ReturnOutcome> {
    if n == 0 {
        return Err(Error::Input("number of returns must be at least 1".into()));
    }
    let run = flow_returns(params, p, spec, cfg, n)?;
    match run.fate {
        Some(f) => Ok(ReturnOutcome::NoReturn(f)),
        None => Ok(ReturnOutcome::Returned(run.crossings[run.returns[n - 1]])),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JacobianMethod {
    FiniteDifference,
    Variational,
}

pub type Mat2 = [[f64; 2]; 2];

pub const FD_STEP: f64 = 1e-6;

fn returned(outcome: ReturnOutcome) -> Result<SectionPoint> {
    match outcome {
        ReturnOutcome::Returned(p) => Ok(p),
        ReturnOutcome::NoReturn(f) => Err(Error::Numerical(format!(
            "no return before t = {} ({:?})",
            f.t, f.tag
        ))),
    }
}

/// Linearization of the first-return map at `p` in `(x, z)` coordinates.
pub fn return_map_jacobian(
    params: &SystemParams,
    p: &SectionPoint,
    spec: &SectionSpec,
    method: JacobianMethod,
    cfg: &IntegratorConfig,
) -> Result<Mat2> {
    match method {
        JacobianMethod::Variational => variational_jacobian(params, p, spec, cfg).map(|(j, _)| j),
        JacobianMethod::FiniteDifference => {
            // step noise of the adaptive integrator must stay well below FD_STEP
            let fine = IntegratorConfig {
                rel_tol: cfg.rel_tol.min(1e-13),
                abs_tol: cfg.abs_tol.min(1e-15),
                ..*cfg
            };
            returned(first_return(params, p, spec, cfg)?)?;
            let mut out = [[0.0; 2]; 2];
            for (col, (dx, dz)) in [(FD_STEP, 0.0), (0.0, FD_STEP)].into_iter().enumerate() {
                let plus = SectionPoint::on_plane(params, spec, p.x + dx, p.z + dz)?;
                let minus = SectionPoint::on_plane(params, spec, p.x - dx, p.z - dz)?;
                let qp = returned(first_return(params, &plus, spec, &fine)?)?;
                let qm = returned(first_return(params, &minus, spec, &fine)?)?;
                out[0][col] = (qp.x - qm.x) / (2.0 * FD_STEP);
                out[1][col] = (qp.z - qm.z) / (2.0 * FD_STEP);
            }
            Ok(out)
        }
    }
}

/// Flow plus first-variation equations, state `[s, Phi row-major]`.
fn variational_rhs(params: &SystemParams, v: &[f64; 12]) -> [f64; 12] {
    let s = [v[0], v[1], v[2]];
    let f = rhs(params, &s);
    let j = fields::jacobian(params, &s);
    let mut out = [0.0; 12];
    out[..3].copy_from_slice(&f);
    for r in 0..3 {
        for c in 0..3 {
            out[3 + 3 * r + c] =
                j[r][0] * v[3 + c] + j[r][1] * v[3 + 3 + c] + j[r][2] * v[3 + 6 + c];
        }
    }
    out
}

/// Return-map Jacobian by integrating the variational equations to the
/// return and projecting along the flow onto the plane. Also returns the
/// returned point.
pub(crate) fn variational_jacobian(
    params: &SystemParams,
    p: &SectionPoint,
    spec: &SectionSpec,
    cfg: &IntegratorConfig,
) -> Result<(Mat2, SectionPoint)> {
    check_start(params, p, spec)?;
    let s0 = p.plane_state();
    let mut y0 = [0.0; 12];
    y0[..3].copy_from_slice(&s0);
    y0[3] = 1.0;
    y0[7] = 1.0;
    y0[11] = 1.0;
    let run = run_returns(params, |v: &[f64; 12]| variational_rhs(params, v), y0, spec, cfg, 1)?;
    if let Some(f) = run.fate {
        return Err(Error::Numerical(format!(
            "no return before t = {} ({:?})",
            f.t, f.tag
        )));
    }
    let k = run.returns[0];
    let q = run.crossings[k];
    let v = run.crossing_states[k];
    let phi = |r: usize, c: usize| v[3 + 3 * r + c];
    let fq = rhs(params, &[v[0], v[1], v[2]]);
    let mut out = [[0.0; 2]; 2];
    for (a, row) in [0usize, 2].into_iter().enumerate() {
        for (b, col) in [0usize, 2].into_iter().enumerate() {
            out[a][b] = phi(row, col) - fq[row] * phi(1, col) / fq[1];
        }
    }
    Ok((out, q))
}

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// One sample of the return map for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub from: [f64; 2],
    pub to: Option<[f64; 2]>,
    pub return_time: Option<f64>,
    pub outcome: String,
}

/// Evaluates the return map on each `(x, z)`, in input order.
pub fn sample_return_map(
    params: &SystemParams,
    spec: &SectionSpec,
    cfg: &IntegratorConfig,
    points: &[[f64; 2]],
) -> Vec<ReturnSample> {
    points
        .par_iter()
        .map(|&[x, z]| {
            let res = SectionPoint::on_plane(params, spec, x, z)
                .and_then(|p| first_return(params, &p, spec, cfg));
            match res {
                Ok(ReturnOutcome::Returned(q)) => ReturnSample {
                    from: [x, z],
                    to: Some([q.x, q.z]),
                    return_time: Some(q.t),
                    outcome: "returned".into(),
                },
                Ok(ReturnOutcome::NoReturn(f)) => ReturnSample {
                    from: [x, z],
                    to: None,
                    return_time: None,
                    outcome: format!("{:?}", f.tag),
                },
                Err(e) => ReturnSample {
                    from: [x, z],
                    to: None,
                    return_time: None,
                    outcome: format!("error: {e}"),
                },
            }
        })
        .collect()
}
