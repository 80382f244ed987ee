//! Periodic orbits of the return map, the one-dimensional stable manifold of
//! the Moore-Spiegel origin, and exit-time sweeps along the tangency line.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, rhs, State, SystemParams, Vec3};
use crate::ode::{self, Control, IntegratorConfig, Termination, Trajectory};
use crate::section::{
    self, det2, mul2, CrossingKind, Mat2, SectionPoint, SectionSpec,
};
use crate::topo::spectrum::{self, Eigenvalue};

pub const MAX_NEWTON_ITERATIONS: usize = 50;
pub const MAX_HALVINGS: usize = 8;
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
/// Newton stops early once the residual is this small.
const NEWTON_TARGET: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub params: SystemParams,
    pub section_points: Vec<SectionPoint>,
    pub period: f64,
    pub residual: f64,
    pub multipliers: [Eigenvalue; 2],
    pub n_strands: usize,
    /// Down crossings of `y = 0` over one period.
    pub down_crossings: Vec<SectionPoint>,
    pub monodromy: Mat2,
    pub iterations: usize,
}

/// Eigenvalues of a real 2x2 matrix.
pub fn eigenvalues2(m: &Mat2) -> [Eigenvalue; 2] {
    let tr = m[0][0] + m[1][1];
    let det = det2(m);
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = 0.5 * tr + s.copysign(tr);
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (a, b) = if big.abs() >= small.abs() { (big, small) } else { (small, big) };
        [Eigenvalue { re: a, im: 0.0 }, Eigenvalue { re: b, im: 0.0 }]
    } else {
        let s = (-disc).sqrt();
        [
            Eigenvalue { re: 0.5 * tr, im: s },
            Eigenvalue { re: 0.5 * tr, im: -s },
        ]
    }
}

/// `g^n(p) - p` together with the visited Up points and the total time.
struct Evaluation {
    residual: f64,
    g: [f64; 2],
    ups: Vec<SectionPoint>,
    end: SectionPoint,
}

fn evaluate(
    params: &SystemParams,
    p: &SectionPoint,
    spec: &SectionSpec,
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<Evaluation> {
    let run = section::flow_returns(params, p, spec, cfg, n)?;
    if let Some(f) = run.fate {
        return Err(Error::Numerical(format!(
            "orbit left before returning ({:?} at t = {})",
            f.tag, f.t
        )));
    }
    let end = run.crossings[run.returns[n - 1]];
    let mut ups = vec![*p];
    ups.extend(run.returns[..n - 1].iter().map(|&k| run.crossings[k]));
    let g = [end.x - p.x, end.z - p.z];
    Ok(Evaluation {
        residual: g[0].hypot(g[1]),
        g,
        ups,
        end,
    })
}

fn monodromy(
    params: &SystemParams,
    p: &SectionPoint,
    spec: &SectionSpec,
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<Mat2> {
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    let mut q = *p;
    for _ in 0..n {
        let (j, next) = section::variational_jacobian(params, &q, spec, cfg)?;
        m = mul2(&j, &m);
        q = SectionPoint { t: 0.0, ..next };
        q.state.y = 0.0;
    }
    Ok(m)
}

fn restart(params: &SystemParams, spec: &SectionSpec, x: f64, z: f64) -> Result<SectionPoint> {
    let p = SectionPoint::on_plane(params, spec, x, z)?;
    section::check_start(params, &p, spec)?;
    Ok(p)
}

/// Newton iteration on `g^n(p) - p` starting from `guess`.
pub fn find_periodic_orbit(
    params: &SystemParams,
    guess: &SectionPoint,
    spec: &SectionSpec,
    n_return: usize,
    cfg: &IntegratorConfig,
) -> Result<PeriodicOrbit> {
    if n_return == 0 {
        return Err(Error::Input("n_return must be at least 1".into()));
    }
    let mut p = restart(params, spec, guess.x, guess.z)?;
    let mut ev = evaluate(params, &p, spec, n_return, cfg)?;
    let mut best = ev.residual;
    let mut iterations = 0;
    while ev.residual > NEWTON_TARGET && iterations < MAX_NEWTON_ITERATIONS {
        iterations += 1;
        let m = monodromy(params, &p, spec, n_return, cfg)?;
        let a = [[m[0][0] - 1.0, m[0][1]], [m[1][0], m[1][1] - 1.0]];
        let d = det2(&a);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = [
            -(a[1][1] * ev.g[0] - a[0][1] * ev.g[1]) / d,
            -(-a[1][0] * ev.g[0] + a[0][0] * ev.g[1]) / d,
        ];
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = restart(params, spec, p.x + lambda * step[0], p.z + lambda * step[1])
                .and_then(|q| evaluate(params, &q, spec, n_return, cfg).map(|e| (q, e)));
            if let Ok((q, e)) = trial {
                if e.residual < ev.residual {
                    accepted = Some((q, e));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((q, e)) => {
                p = q;
                ev = e;
                best = best.min(ev.residual);
            }
            None => break,
        }
    }
    if ev.residual >= RESIDUAL_TOLERANCE {
        return Err(Error::SearchFailure {
            best_residual: best,
            iterations,
        });
    }

    // a period-n search may land on an orbit of smaller period
    let minimal = (1..n_return)
        .filter(|k| n_return % k == 0)
        .find(|&k| {
            let q = ev.ups[k];
            (q.x - p.x).hypot(q.z - p.z) < 1e-6
        });
    if let Some(k) = minimal {
        return find_periodic_orbit(params, &p, spec, k, cfg);
    }

    let m = monodromy(params, &p, spec, n_return, cfg)?;
    let run = section::flow_returns(params, &p, spec, cfg, n_return)?;
    let end_index = run.returns[n_return - 1];
    let down_crossings = run.crossings[..end_index]
        .iter()
        .filter(|c| c.kind == CrossingKind::Down)
        .copied()
        .collect();
    Ok(PeriodicOrbit {
        params: params.clone(),
        n_strands: ev.ups.len(),
        section_points: ev.ups,
        period: ev.end.t,
        residual: ev.residual,
        multipliers: eigenvalues2(&m),
        down_crossings,
        monodromy: m,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceCandidate {
    pub point: SectionPoint,
    pub n_return: usize,
    pub distance: f64,
}

/// Near-returns `|p_{i+n} - p_i| < radius` among the admissible Up crossings
/// of `traj`, for `1 <= n <= max_return`, sorted by distance.
pub fn recurrence_scan(
    params: &SystemParams,
    traj: &Trajectory,
    spec: &SectionSpec,
    radius: f64,
    max_return: usize,
) -> Result<Vec<RecurrenceCandidate>> {
    spec.validate(params)?;
    if let Termination::Escaped { t, .. } = traj.termination() {
        return Err(Error::Precondition(format!(
            "trajectory escaped at t = {t}; recurrence needs a bounded orbit"
        )));
    }
    let ups: Vec<SectionPoint> = section::detect_crossings(traj, spec)?
        .into_iter()
        .filter(|c| c.kind == CrossingKind::Up && spec.admits(c.x, c.z))
        .collect();
    let mut out = Vec::new();
    for n in 1..=max_return {
        for i in 0..ups.len().saturating_sub(n) {
            let (a, b) = (&ups[i], &ups[i + n]);
            let d = (a.x - b.x).hypot(a.z - b.z);
            if d < radius {
                out.push(RecurrenceCandidate {
                    point: SectionPoint {
                        t: 0.0,
                        state: State::new(a.x, 0.0, a.z),
                        ..*a
                    },
                    n_return: n,
                    distance: d,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.n_return.cmp(&b.n_return))
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Delta1,
    Delta2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContainmentViolation {
    pub t: f64,
    pub state: State,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldBranch {
    pub which: Branch,
    pub seed_offset: f64,
    pub eigenvalue: f64,
    pub eigenvector: Vec3,
    /// From the seed outward; times are backward times (positive).
    pub polyline: Vec<State>,
    pub times: Vec<f64>,
    pub reached_norm: f64,
    pub target_norm: f64,
    pub violation: Option<ContainmentViolation>,
}

impl ManifoldBranch {
    pub fn contained(&self) -> bool {
        self.violation.is_none()
    }
}

pub const DEFAULT_REACHED_NORM: f64 = 100.0;
pub const CONTAINMENT_TOLERANCE: f64 = 1e-9;

/// Negative real root of the Moore-Spiegel characteristic polynomial and its
/// eigenvector `(1, l, l^2)`, normalized.
pub fn stable_direction(t: f64, r: f64) -> Result<(f64, Vec3)> {
    let m = fields::jacobian(&SystemParams::MooreSpiegel { t, r }, &[0.0; 3]);
    let mut l = spectrum::real_eigenvalues(&m)
        .into_iter()
        .find(|l| *l < 0.0)
        .ok_or_else(|| Error::Numerical("no negative real eigenvalue found".into()))?;
    for _ in 0..8 {
        let p = ((l + 1.0) * l + (t - r)) * l + t;
        let dp = (3.0 * l + 2.0) * l + (t - r);
        if dp == 0.0 {
            break;
        }
        l -= p / dp;
    }
    let v = [1.0, l, l * l];
    let n = fields::norm(&v);
    Ok((l, v.map(|c| c / n)))
}

/// Backward-time traces of the stable manifold of the origin, seeded at
/// `+epsilon` (Delta1) and `-epsilon` (Delta2) along the stable eigenvector,
/// until the orbit reaches `target_norm`.
pub fn trace_stable_manifold(
    params: &SystemParams,
    epsilon: f64,
    target_norm: f64,
    cfg: &IntegratorConfig,
) -> Result<(ManifoldBranch, ManifoldBranch)> {
    let (t, r) = match params {
        SystemParams::MooreSpiegel { t, r } => (*t, *r),
        _ => return Err(Error::Unsupported("stable manifold is defined for Moore-Spiegel".into())),
    };
    if !(t > 0.0 && r > 0.0) {
        return Err(Error::Precondition(format!("requires T > 0 and R > 0, got T = {t}, R = {r}")));
    }
    if !(1e-8..=1e-4).contains(&epsilon) {
        return Err(Error::Input(format!("epsilon must lie in [1e-8, 1e-4], got {epsilon}")));
    }
    if !(target_norm > epsilon) {
        return Err(Error::Input(format!("target norm {target_norm} is too small")));
    }
    let (lambda, v) = stable_direction(t, r)?;
    let trace = |which: Branch, sign: f64| -> Result<ManifoldBranch> {
        let seed = v.map(|c| sign * epsilon * c);
        let run_cfg = IntegratorConfig {
            escape_radius: target_norm,
            ..*cfg
        };
        let traj = ode::integrate_backward(params, State::from(seed), (0.0, cfg.t_max), &run_cfg)?;
        let reached_norm = traj.final_state().norm();
        let mut violation = None;
        let sol = &traj.sol;
        'scan: for i in 0..sol.intervals() {
            for k in 0..4 {
                let s = sol.eval_local(i, k as f64 / 4.0);
                let excess = (-sign * s[0]).max(sign * s[1]);
                if excess > CONTAINMENT_TOLERANCE {
                    violation = Some(ContainmentViolation {
                        t: sol.t[i] + 0.25 * k as f64 * (sol.t[i + 1] - sol.t[i]),
                        state: State::from(s),
                        excess,
                    });
                    break 'scan;
                }
            }
        }
        Ok(ManifoldBranch {
            which,
            seed_offset: sign * epsilon,
            eigenvalue: lambda,
            eigenvector: v,
            polyline: traj.states().collect(),
            times: traj.times().to_vec(),
            reached_norm,
            target_norm,
            violation,
        })
    };
    Ok((trace(Branch::Delta1, 1.0)?, trace(Branch::Delta2, -1.0)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arc {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitSurface {
    /// `x = 0, y < 0`.
    H1,
    /// `y = 0, z > 0`.
    U,
    /// `x = 0, y > 0`.
    H2,
    /// `y = 0, z < 0`.
    #[serde(rename = "u")]
    LowerU,
    None,
}

impl ExitSurface {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExitSurface::H1 => "H1",
            ExitSurface::U => "U",
            ExitSurface::H2 => "H2",
            ExitSurface::LowerU => "u",
            ExitSurface::None => "None",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub s: f64,
    pub t_exit: Option<f64>,
    pub exit_state: Option<State>,
    pub exit_surface: ExitSurface,
    pub violation: Option<ContainmentViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub params: SystemParams,
    pub arc: Arc,
    pub records: Vec<SweepRecord>,
}

fn sweep_one(params: &SystemParams, arc: Arc, s: f64, cfg: &IntegratorConfig) -> Result<SweepRecord> {
    // l2 is the point reflection of l1; run the l1 problem on the mirror
    // image so both arcs share one code path
    let sign = match arc {
        Arc::L1 => 1.0,
        Arc::L2 => -1.0,
    };
    let f = |v: &Vec3| rhs(params, v);
    let start = [s, 0.0, 0.0];
    let mut hit: Option<(f64, Vec3, ExitSurface)> = None;
    let mut violation = None;
    let mut failure = None;
    let result = ode::solve(f, start, 0.0, cfg.t_max, cfg, |sol| {
        let i = sol.intervals() - 1;
        let (a, b) = (sol.y[i], sol.y[i + 1]);
        // first face crossed within this step, if any
        let mut candidates: Vec<(f64, ExitSurface)> = Vec::new();
        let mut refine = |k: usize, surface: ExitSurface| {
            match ode::refine_root(|th| sol.eval_local(i, th)[k], 0.0, 1.0) {
                Ok(th) => candidates.push((th, surface)),
                Err(e) => failure = Some(e),
            }
        };
        // leaving through x = 0 (x decreasing for l1)
        if sign * a[0] > 0.0 && sign * b[0] <= 0.0 {
            refine(0, if sign > 0.0 { ExitSurface::H1 } else { ExitSurface::H2 });
        }
        // leaving through y = 0 (y increasing for l1)
        if sign * a[1] < 0.0 && sign * b[1] >= 0.0 {
            refine(1, if sign > 0.0 { ExitSurface::U } else { ExitSurface::LowerU });
        }
        if failure.is_some() {
            return Control::Stop;
        }
        candidates.sort_by(|p, q| p.0.total_cmp(&q.0));
        let limit = candidates.first().map(|c| c.0).unwrap_or(1.0);
        if violation.is_none() {
            for k in 0..=4 {
                let th = limit * k as f64 / 4.0;
                let v = sol.eval_local(i, th);
                let excess = (-sign * v[0]).max(sign * v[1]);
                if excess > CONTAINMENT_TOLERANCE {
                    violation = Some(ContainmentViolation {
                        t: sol.t[i] + th * (sol.t[i + 1] - sol.t[i]),
                        state: State::from(v),
                        excess,
                    });
                    break;
                }
            }
        }
        if let Some(&(th, surface)) = candidates.first() {
            let v = sol.eval_local(i, th);
            let t = if th == 1.0 { sol.t[i + 1] } else { sol.t[i] + th * (sol.t[i + 1] - sol.t[i]) };
            hit = Some((t, v, surface));
            return Control::Stop;
        }
        if fields::norm(sol.last()) >= cfg.escape_radius {
            return Control::Stop;
        }
        Control::Continue
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if let Err((_, message)) = result {
        return Err(Error::Numerical(format!("sweep integration failed at s = {s}: {message}")));
    }
    Ok(match hit {
        Some((t, v, surface)) => SweepRecord {
            s,
            t_exit: Some(t),
            exit_state: Some(State::from(v)),
            exit_surface: surface,
            violation,
        },
        None => SweepRecord {
            s,
            t_exit: None,
            exit_state: None,
            exit_surface: ExitSurface::None,
            violation,
        },
    })
}

/// First exit from the trapping quadrant for orbits started on `l1`
/// (`s > 0`) or `l2` (`s < 0`), evaluated in parallel and returned in input
/// order.
pub fn exit_time_sweep(
    params: &SystemParams,
    arc: Arc,
    s_values: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SweepCurve> {
    match params {
        SystemParams::MooreSpiegel { t, .. } if *t > 0.0 => {}
        SystemParams::MooreSpiegel { t, .. } => {
            return Err(Error::Precondition(format!("requires T > 0, got {t}")))
        }
        _ => return Err(Error::Unsupported("exit sweeps are defined for Moore-Spiegel".into())),
    }
    cfg.validate()?;
    for &s in s_values {
        let ok = match arc {
            Arc::L1 => s > 0.0,
            Arc::L2 => s < 0.0,
        };
        if !ok || !s.is_finite() {
            return Err(Error::Input(format!("s = {s} is not on {arc:?}")));
        }
    }
    let records = s_values
        .par_iter()
        .map(|&s| sweep_one(params, arc, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve {
        params: params.clone(),
        arc,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::integrate;
    use std::f64::consts::PI;

    fn hopf() -> SystemParams {
        SystemParams::ValidationHopf { mu: 1.0, omega: 1.0 }
    }

    fn ms() -> SystemParams {
        SystemParams::MooreSpiegel { t: 27.0, r: 100.0 }
    }

    #[test]
    fn eigenvalues_of_2x2() {
        let e = eigenvalues2(&[[2.0, 0.0], [0.0, 3.0]]);
        assert_eq!((e[0].re, e[1].re), (3.0, 2.0));
        let e = eigenvalues2(&[[0.0, -1.0], [1.0, 0.0]]);
        assert_eq!((e[0].re, e[0].im.abs()), (0.0, 1.0));
        let e = eigenvalues2(&[[1e-8, 0.0], [0.0, 1.0]]);
        assert!((e[1].re - 1e-8).abs() < 1e-22);
    }

    #[test]
    fn hopf_orbit_from_offset_guess() {
        let p = hopf();
        let spec = SectionSpec::for_system(&p);
        let guess = SectionPoint::on_plane(&p, &spec, 1.3, 0.2).unwrap();
        let orbit = find_periodic_orbit(&p, &guess, &spec, 1, &Default::default()).unwrap();
        assert!((orbit.period - 2.0 * PI).abs() < 1e-8);
        assert!(orbit.residual < 1e-9);
        assert_eq!(orbit.n_strands, 1);
        assert_eq!(orbit.down_crossings.len(), 1);
        let m = &orbit.multipliers;
        assert!((m[0].re - (-2.0 * PI).exp()).abs() < 1e-6);
        assert!((m[1].re - (-4.0 * PI).exp()).abs() < 1e-6);
        // a fixed point of the return map is reproduced by one return
        let q = section::first_return(&p, &orbit.section_points[0], &spec, &Default::default())
            .unwrap();
        let q = q.point().unwrap();
        assert!((q.x - orbit.section_points[0].x).abs() < 1e-8);
    }

    #[test]
    fn period_two_search_reduces_to_period_one() {
        let p = hopf();
        let spec = SectionSpec::for_system(&p);
        let guess = SectionPoint::on_plane(&p, &spec, 0.9, 0.0).unwrap();
        let orbit = find_periodic_orbit(&p, &guess, &spec, 2, &Default::default()).unwrap();
        assert_eq!(orbit.n_strands, 1);
        assert!((orbit.period - 2.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn hopf_recurrences() {
        let p = hopf();
        let spec = SectionSpec::for_system(&p);
        let traj = integrate(&p, State::new(0.5, 0.0, 0.5), (0.0, 100.0), &Default::default()).unwrap();
        let c = recurrence_scan(&p, &traj, &spec, 1e-3, 2).unwrap();
        let first = c.iter().find(|c| c.n_return == 1).unwrap();
        assert!(first.distance < 1e-6);
        assert!(c.windows(2).all(|w| w[0].distance <= w[1].distance));
        // too short for any return
        let short = integrate(&p, State::new(0.5, 0.0, 0.5), (0.0, 1.0), &Default::default()).unwrap();
        assert!(recurrence_scan(&p, &short, &spec, 1.0, 1).unwrap().is_empty());
    }

    #[test]
    fn manifold_branches() {
        let p = ms();
        let cfg = IntegratorConfig::default();
        let (d1, d2) = trace_stable_manifold(&p, 1e-6, 100.0, &cfg).unwrap();
        assert!(d1.reached_norm >= 100.0 && d2.reached_norm >= 100.0);
        assert!(d1.contained(), "{:?}", d1.violation);
        assert!(d2.contained());
        assert_eq!(d1.polyline.len(), d2.polyline.len());
        for (a, b) in d1.polyline.iter().zip(&d2.polyline) {
            assert!((a.x + b.x).abs() < 1e-6 && (a.y + b.y).abs() < 1e-6 && (a.z + b.z).abs() < 1e-6);
        }
        // the seed flows into the origin before the unstable directions take over
        let seed = d1.polyline[0];
        let fwd = integrate(&p, seed, (0.0, 3.0), &cfg).unwrap();
        let closest = fwd.states().map(|s| s.norm()).fold(f64::INFINITY, f64::min);
        assert!(closest < 1e-6 * 1e-6, "{closest}");
    }

    #[test]
    fn stable_direction_is_an_eigenvector() {
        let (l, v) = stable_direction(27.0, 100.0).unwrap();
        assert!(l < 0.0);
        let j = fields::jacobian(&ms(), &[0.0; 3]);
        for r in 0..3 {
            let jv = j[r][0] * v[0] + j[r][1] * v[1] + j[r][2] * v[2];
            assert!((jv - l * v[r]).abs() < 1e-12);
        }
        assert!(v[0] > 0.0 && v[1] < 0.0);
    }

    #[test]
    fn manifold_preconditions() {
        let cfg = IntegratorConfig::default();
        assert!(trace_stable_manifold(&ms(), 1e-3, 100.0, &cfg).is_err());
        let bad = SystemParams::MooreSpiegel { t: -1.0, r: 100.0 };
        assert!(trace_stable_manifold(&bad, 1e-6, 100.0, &cfg).is_err());
        assert!(trace_stable_manifold(&hopf(), 1e-6, 100.0, &cfg).is_err());
    }

    #[test]
    fn sweep_exits_and_mirror() {
        let p = ms();
        let cfg = IntegratorConfig::default();
        let s = [0.1, 0.5, 1.0, 2.0, 5.0];
        let l1 = exit_time_sweep(&p, Arc::L1, &s, &cfg).unwrap();
        for r in &l1.records {
            assert!(matches!(r.exit_surface, ExitSurface::H1 | ExitSurface::U), "{r:?}");
            assert!(r.t_exit.unwrap() > 0.0);
            assert!(r.violation.is_none());
            let e = r.exit_state.unwrap();
            match r.exit_surface {
                ExitSurface::H1 => assert!(e.x.abs() < 1e-8 && e.y < 0.0),
                _ => assert!(e.y.abs() < 1e-8 && e.z > 0.0),
            }
        }
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let l2 = exit_time_sweep(&p, Arc::L2, &neg, &cfg).unwrap();
        for (a, b) in l1.records.iter().zip(&l2.records) {
            assert!((a.t_exit.unwrap() - b.t_exit.unwrap()).abs() < 1e-8);
            let (ea, eb) = (a.exit_state.unwrap(), b.exit_state.unwrap());
            assert!((ea.x + eb.x).abs() < 1e-8 && (ea.z + eb.z).abs() < 1e-8);
            assert!(matches!(b.exit_surface, ExitSurface::H2 | ExitSurface::LowerU));
        }
        assert!(exit_time_sweep(&p, Arc::L1, &[-1.0], &cfg).is_err());
    }
}
