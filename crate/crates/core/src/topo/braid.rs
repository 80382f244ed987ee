//! Braid words of closed orbits cut open along the plane `y = 0`.
//!
//! Each half-space piece of the orbit is a set of strands running from one
//! family of crossings to the other. Strands are followed around the
//! system's tangency line: the position along the line orders them and the
//! distance from the line decides which strand passes over at a swap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{SystemParams, Vec3};
use crate::ode::{self, IntegratorConfig};
use crate::orbits::PeriodicOrbit;
use crate::section::{self, CrossingKind, SectionSpec};
use crate::topo::laurent::{alexander_polynomial, LaurentPoly};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnotVerdict {
    CertifiedUnknot,
    ConsistentWithUnknot,
    NotUnknot,
}

/// How strands are parameterized across a half-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrandParameter {
    /// Normalized turning angle about the tangency line.
    Angle,
    /// Normalized transit time.
    TransitTime,
}

/// Coordinate axes used for the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BraidAxis {
    /// Index of the coordinate along the tangency line.
    pub along: usize,
    /// Index of the in-plane coordinate transverse to it.
    pub across: usize,
}

impl BraidAxis {
    /// The z-axis for Nose-Hoover and the validation fields, the x-axis for
    /// Moore-Spiegel.
    pub fn for_system(params: &SystemParams) -> Self {
        match params {
            SystemParams::MooreSpiegel { .. } => Self { along: 0, across: 2 },
            _ => Self { along: 2, across: 0 },
        }
    }

    fn angle(&self, s: &Vec3) -> f64 {
        s[1].abs().atan2(s[self.across])
    }

    fn project(&self, s: &Vec3, rotation: f64) -> (f64, f64) {
        let a = s[self.along];
        let rho = s[1].hypot(s[self.across]);
        let (sn, cs) = rotation.sin_cos();
        (a * cs - rho * sn, a * sn + rho * cs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BraidData {
    pub n_strands: usize,
    pub word_up: Vec<i32>,
    pub word_down: Vec<i32>,
    pub up_strands: usize,
    pub down_strands: usize,
    pub alexander: LaurentPoly,
    pub verdict: KnotVerdict,
    pub parameter: StrandParameter,
    /// Rotation of the projection in radians (nonzero after a retry).
    pub projection_rotation: f64,
}

impl BraidData {
    pub fn word(&self) -> Vec<i32> {
        self.word_up.iter().chain(&self.word_down).copied().collect()
    }
}

pub const PROJECTION_RETRY_ROTATION: f64 = 1e-3;
pub const DEPTH_TOLERANCE: f64 = 1e-9;
const LEVELS: usize = 2048;
const MAX_SPLIT_DEPTH: usize = 40;

pub fn knot_verdict(braid: &BraidData) -> KnotVerdict {
    verdict_for(braid.n_strands, &braid.alexander)
}

fn verdict_for(n_strands: usize, alexander: &LaurentPoly) -> KnotVerdict {
    if n_strands == 1 {
        KnotVerdict::CertifiedUnknot
    } else if !alexander.equals_up_to_units(&LaurentPoly::one()) {
        KnotVerdict::NotUnknot
    } else {
        KnotVerdict::ConsistentWithUnknot
    }
}

/// One half-space piece of a closed curve.
struct HalfBraid<'a> {
    curve: &'a dyn Fn(f64) -> Vec3,
    intervals: Vec<(f64, f64)>,
    axis: BraidAxis,
    parameter: StrandParameter,
    /// Turning angle at the start of each strand.
    angle_start: Vec<f64>,
}

impl<'a> HalfBraid<'a> {
    fn new(curve: &'a dyn Fn(f64) -> Vec3, intervals: Vec<(f64, f64)>, axis: BraidAxis) -> Self {
        let monotone = intervals.iter().all(|&(t0, t1)| {
            let a0 = axis.angle(&curve(t0));
            let a1 = axis.angle(&curve(t1));
            let dir = (a1 - a0).signum();
            if (a1 - a0).abs() < 0.5 * std::f64::consts::PI {
                return false;
            }
            let mut prev = a0;
            (1..=512).all(|k| {
                let a = axis.angle(&curve(t0 + (t1 - t0) * k as f64 / 512.0));
                let ok = (a - prev) * dir >= -1e-12;
                prev = a;
                ok
            })
        });
        let parameter = if monotone { StrandParameter::Angle } else { StrandParameter::TransitTime };
        let angle_start = intervals.iter().map(|&(t0, _)| axis.angle(&curve(t0))).collect();
        Self {
            curve,
            intervals,
            axis,
            parameter,
            angle_start,
        }
    }

    fn point(&self, k: usize, tau: f64) -> Vec3 {
        let (t0, t1) = self.intervals[k];
        if tau <= 0.0 {
            return (self.curve)(t0);
        }
        if tau >= 1.0 {
            return (self.curve)(t1);
        }
        match self.parameter {
            StrandParameter::TransitTime => (self.curve)(t0 + tau * (t1 - t0)),
            StrandParameter::Angle => {
                let a0 = self.angle_start[k];
                let a1 = self.axis.angle(&(self.curve)(t1));
                let target = a0 + tau * (a1 - a0);
                let g = |t: f64| (self.axis.angle(&(self.curve)(t)) - target) * (a1 - a0).signum();
                let (mut lo, mut hi) = (t0, t1);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (self.curve)(0.5 * (lo + hi))
            }
        }
    }

    fn positions(&self, tau: f64, rotation: f64) -> Vec<(f64, f64)> {
        (0..self.intervals.len())
            .map(|k| self.axis.project(&self.point(k, tau), rotation))
            .collect()
    }

    /// Generators produced by the strand swaps, with the strand order at the
    /// start and end of the piece.
    fn word(&self, rotation: f64) -> Result<(Vec<i32>, Vec<usize>, Vec<usize>)> {
        let n = self.intervals.len();
        let start = self.positions(0.0, rotation);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| start[i].0.total_cmp(&start[j].0));
        for w in order.windows(2) {
            if (start[w[0]].0 - start[w[1]].0).abs() < DEPTH_TOLERANCE {
                return Err(Error::AmbiguousCrossing {
                    tau: 0.0,
                    depth_gap: (start[w[0]].1 - start[w[1]].1).abs(),
                });
            }
        }
        let initial = order.clone();
        let mut word = Vec::new();
        let mut prev = start;
        for j in 1..=LEVELS {
            let tau0 = (j - 1) as f64 / LEVELS as f64;
            let tau1 = j as f64 / LEVELS as f64;
            let next = self.positions(tau1, rotation);
            self.swaps(tau0, tau1, &prev, &next, rotation, &mut order, &mut word, 0)?;
            prev = next;
        }
        Ok((word, initial, order))
    }

    #[allow(clippy::too_many_arguments)]
    fn swaps(
        &self,
        tau0: f64,
        tau1: f64,
        p0: &[(f64, f64)],
        p1: &[(f64, f64)],
        rotation: f64,
        order: &mut Vec<usize>,
        word: &mut Vec<i32>,
        depth: usize,
    ) -> Result<()> {
        // pairs whose order along the line changes in this step
        let n = p0.len();
        let mut changes = Vec::new();
        for i in 0..n {
            for k in i + 1..n {
                let d0 = p0[i].0 - p0[k].0;
                let d1 = p1[i].0 - p1[k].0;
                if (d0 < 0.0) != (d1 < 0.0) {
                    changes.push((i, k, d0, d1));
                }
            }
        }
        if changes.is_empty() {
            return Ok(());
        }
        if changes.len() > 1 {
            if depth >= MAX_SPLIT_DEPTH {
                return Err(Error::AmbiguousCrossing {
                    tau: tau0,
                    depth_gap: 0.0,
                });
            }
            let mid = 0.5 * (tau0 + tau1);
            let pm = self.positions(mid, rotation);
            self.swaps(tau0, mid, p0, &pm, rotation, order, word, depth + 1)?;
            return self.swaps(mid, tau1, &pm, p1, rotation, order, word, depth + 1);
        }
        let (i, k, d0, d1) = changes[0];
        let tau = tau0 + (tau1 - tau0) * d0 / (d0 - d1);
        let at = self.positions(tau, rotation);
        let gap = at[i].1 - at[k].1;
        if gap.abs() < DEPTH_TOLERANCE {
            return Err(Error::AmbiguousCrossing { tau, depth_gap: gap.abs() });
        }
        let pi = order.iter().position(|&s| s == i).unwrap();
        let pk = order.iter().position(|&s| s == k).unwrap();
        if pi.abs_diff(pk) != 1 {
            return Err(Error::AmbiguousCrossing { tau, depth_gap: gap.abs() });
        }
        let low = pi.min(pk);
        // the strand leaving the lower slot passes over when it is farther out
        let rising = order[low];
        let other = order[low + 1];
        let over = at[rising].1 > at[other].1;
        word.push(if over { low as i32 + 1 } else { -(low as i32 + 1) });
        order.swap(low, low + 1);
        Ok(())
    }
}

/// Braid of a closed curve from its crossing times of `y = 0` over one
/// period. `ups` and `downs` must alternate, starting with `ups[0]`, and
/// `t_end` closes the curve (`curve(t_end) = curve(ups[0])`).
pub fn braid_from_curve(
    curve: &dyn Fn(f64) -> Vec3,
    ups: &[f64],
    downs: &[f64],
    t_end: f64,
    axis: BraidAxis,
) -> Result<BraidData> {
    let n = ups.len();
    if n == 0 || downs.len() != n {
        return Err(Error::Input(format!(
            "closed curve has {} Up and {} Down crossings; they must be equal and nonzero",
            n,
            downs.len()
        )));
    }
    for k in 0..n {
        let next = if k + 1 < n { ups[k + 1] } else { t_end };
        if !(ups[k] < downs[k] && downs[k] < next) {
            return Err(Error::Input("Up and Down crossings do not alternate".into()));
        }
    }
    let upper: Vec<(f64, f64)> = (0..n).map(|k| (ups[k], downs[k])).collect();
    let lower: Vec<(f64, f64)> = (0..n)
        .map(|k| (downs[k], if k + 1 < n { ups[k + 1] } else { t_end }))
        .collect();
    let up_half = HalfBraid::new(curve, upper, axis);
    let down_half = HalfBraid::new(curve, lower, axis);
    let parameter = if up_half.parameter == StrandParameter::Angle
        && down_half.parameter == StrandParameter::Angle
    {
        StrandParameter::Angle
    } else {
        StrandParameter::TransitTime
    };

    let attempt = |rotation: f64| -> Result<(Vec<i32>, Vec<i32>)> {
        if n == 1 {
            return Ok((Vec::new(), Vec::new()));
        }
        let (w_up, _, _) = up_half.word(rotation)?;
        let (w_down, _, _) = down_half.word(rotation)?;
        Ok((w_up, w_down))
    };
    let (rotation, (word_up, word_down)) = match attempt(0.0) {
        Ok(w) => (0.0, w),
        Err(Error::AmbiguousCrossing { .. }) => {
            (PROJECTION_RETRY_ROTATION, attempt(PROJECTION_RETRY_ROTATION)?)
        }
        Err(e) => return Err(e),
    };
    let mut word = word_up.clone();
    word.extend(&word_down);
    let alexander = alexander_polynomial(&word, n)?;
    let verdict = verdict_for(n, &alexander);
    Ok(BraidData {
        n_strands: n,
        word_up,
        word_down,
        up_strands: n,
        down_strands: n,
        alexander,
        verdict,
        parameter,
        projection_rotation: rotation,
    })
}

/// Braid of a converged periodic orbit.
pub fn extract_braid(
    orbit: &PeriodicOrbit,
    params: &SystemParams,
    cfg: &IntegratorConfig,
) -> Result<BraidData> {
    if orbit.residual >= crate::orbits::RESIDUAL_TOLERANCE {
        return Err(Error::Precondition(format!(
            "orbit is not converged (residual {:e})",
            orbit.residual
        )));
    }
    let spec = SectionSpec::for_system(params);
    let start = orbit
        .section_points
        .first()
        .ok_or_else(|| Error::Precondition("orbit has no section points".into()))?;
    let run = section::flow_returns(params, start, &spec, cfg, orbit.n_strands)?;
    if run.fate.is_some() {
        return Err(Error::Numerical("orbit did not close when re-integrated".into()));
    }
    let end = run.crossings[run.returns[orbit.n_strands - 1]];
    let mut ups = vec![0.0];
    let mut downs = Vec::new();
    for c in &run.crossings {
        if c.t >= end.t {
            break;
        }
        match c.kind {
            CrossingKind::Up => ups.push(c.t),
            CrossingKind::Down => downs.push(c.t),
            CrossingKind::Tangent => {
                return Err(Error::TangentEncounter { point: Box::new(*c) })
            }
        }
    }
    let sol = &run.sol;
    let curve = |t: f64| sol.eval(t);
    braid_from_curve(&curve, &ups, &downs, end.t, BraidAxis::for_system(params))
}

/// A closed curve together with its period.
pub struct ClosedCurve {
    pub period: f64,
    pub curve: Box<dyn Fn(f64) -> Vec3 + Send + Sync>,
}

/// A (2, 3) torus knot wound around the z-axis and threaded through `y = 0`
/// four times per period.
pub fn trefoil_fixture() -> ClosedCurve {
    const PHASE: f64 = 0.4;
    ClosedCurve {
        period: 4.0 * std::f64::consts::PI,
        curve: Box::new(|t: f64| {
            let u = 1.5 * t + PHASE;
            let rho = 2.0 + u.cos();
            [rho * t.cos(), -rho * t.sin(), u.sin()]
        }),
    }
}

/// Crossing times of `y = 0` on `[t0, t0 + period)`, split into Up and Down.
pub fn curve_crossings(
    curve: &dyn Fn(f64) -> Vec3,
    t0: f64,
    period: f64,
    samples: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut ups, mut downs) = (Vec::new(), Vec::new());
    let h = period / samples as f64;
    let y = |t: f64| curve(t)[1];
    for k in 0..samples {
        let (a, b) = (t0 + k as f64 * h, t0 + (k + 1) as f64 * h);
        let (ya, yb) = (y(a), y(b));
        let t = if ya == 0.0 {
            a
        } else if (ya < 0.0) != (yb < 0.0) && yb != 0.0 {
            let th = ode::refine_root(|th| y(a + th * h), 0.0, 1.0)?;
            a + th * h
        } else {
            continue;
        };
        let slope = y(t + 1e-7) - y(t - 1e-7);
        if slope > 0.0 {
            ups.push(t);
        } else {
            downs.push(t);
        }
    }
    Ok((ups, downs))
}

/// Braid of a closed curve, cut at its first Up crossing.
pub fn braid_of_closed_curve(c: &ClosedCurve, axis: BraidAxis) -> Result<BraidData> {
    let (ups, downs) = curve_crossings(&*c.curve, 0.0, c.period, 4096)?;
    let t0 = *ups
        .first()
        .ok_or_else(|| Error::Input("curve never crosses y = 0 upward".into()))?;
    let unwrap = |v: Vec<f64>| {
        let mut v: Vec<f64> = v.into_iter().map(|t| if t < t0 { t + c.period } else { t }).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let (ups, downs) = (unwrap(ups), unwrap(downs));
    braid_from_curve(&*c.curve, &ups, &downs, t0 + c.period, axis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::find_periodic_orbit;
    use crate::section::SectionPoint;
    use std::f64::consts::PI;

    const Z_AXIS: BraidAxis = BraidAxis { along: 2, across: 0 };

    /// Signed crossings of the projection onto the xy-plane found by testing
    /// every pair of chords of a fine polygon.
    fn brute_force_crossings(c: &ClosedCurve, m: usize) -> Vec<i32> {
        let pts: Vec<Vec3> = (0..m).map(|k| (c.curve)(c.period * k as f64 / m as f64)).collect();
        let seg = |k: usize| (pts[k], pts[(k + 1) % m]);
        let mut signs = Vec::new();
        for i in 0..m {
            for j in i + 2..m {
                if i == 0 && j == m - 1 {
                    continue;
                }
                let (a, b) = seg(i);
                let (c2, d) = seg(j);
                let r = [b[0] - a[0], b[1] - a[1]];
                let s = [d[0] - c2[0], d[1] - c2[1]];
                let den = r[0] * s[1] - r[1] * s[0];
                if den == 0.0 {
                    continue;
                }
                let q = [c2[0] - a[0], c2[1] - a[1]];
                let u = (q[0] * s[1] - q[1] * s[0]) / den;
                let v = (q[0] * r[1] - q[1] * r[0]) / den;
                if (0.0..1.0).contains(&u) && (0.0..1.0).contains(&v) {
                    let za = a[2] + u * (b[2] - a[2]);
                    let zc = c2[2] + v * (d[2] - c2[2]);
                    // right-handed crossing when the over strand turns counterclockwise onto the under strand
                    let (over, under) = if za > zc { (r, s) } else { (s, r) };
                    let cross = over[0] * under[1] - over[1] * under[0];
                    signs.push(if cross > 0.0 { 1 } else { -1 });
                }
            }
        }
        signs
    }

    #[test]
    fn trefoil_fixture_braid() {
        let c = trefoil_fixture();
        let b = braid_of_closed_curve(&c, Z_AXIS).unwrap();
        assert_eq!(b.n_strands, 2);
        assert_eq!(b.parameter, StrandParameter::Angle);
        let word = b.word();
        let oracle = brute_force_crossings(&c, 3000);
        assert_eq!(word.len(), oracle.len());
        // all crossings of a positive or negative torus knot share one sign
        assert!(oracle.iter().all(|s| *s == oracle[0]));
        assert!(word.iter().all(|g| g.abs() == 1 && g.signum() == word[0].signum()));
        assert_eq!(b.alexander, LaurentPoly::new(0, vec![1, -1, 1]));
        assert_eq!(b.verdict, KnotVerdict::NotUnknot);
        assert_eq!(knot_verdict(&b), KnotVerdict::NotUnknot);
    }

    #[test]
    fn round_circle_is_a_single_strand() {
        let c = ClosedCurve {
            period: 2.0 * PI,
            curve: Box::new(|t: f64| [t.cos(), t.sin(), 0.3]),
        };
        let b = braid_of_closed_curve(&c, Z_AXIS).unwrap();
        assert_eq!(b.n_strands, 1);
        assert!(b.word_up.is_empty() && b.word_down.is_empty());
        assert_eq!(b.verdict, KnotVerdict::CertifiedUnknot);
    }

    #[test]
    fn doubled_circle_is_consistent_with_unknot() {
        // a (2, 1) torus knot is an unknot drawn on two strands
        let c = ClosedCurve {
            period: 4.0 * PI,
            curve: Box::new(|t: f64| {
                let u = 0.5 * t + 0.3;
                let rho = 2.0 + u.cos();
                [rho * t.cos(), -rho * t.sin(), u.sin()]
            }),
        };
        let b = braid_of_closed_curve(&c, Z_AXIS).unwrap();
        assert_eq!(b.n_strands, 2);
        assert_eq!(b.word().len(), 1);
        assert_eq!(b.alexander, LaurentPoly::one());
        assert_eq!(b.verdict, KnotVerdict::ConsistentWithUnknot);
    }

    #[test]
    fn coincident_projection_triggers_rotated_retry() {
        // both strands end at the same height on the plane, so the swap
        // happens exactly at the boundary of the piece
        let c = ClosedCurve {
            period: 4.0 * PI,
            curve: Box::new(|t: f64| {
                let u = 1.5 * t;
                let rho = 2.0 + u.cos();
                [rho * t.cos(), -rho * t.sin(), u.sin()]
            }),
        };
        let b = braid_of_closed_curve(&c, Z_AXIS).unwrap();
        assert_eq!(b.alexander, LaurentPoly::new(0, vec![1, -1, 1]));
    }

    #[test]
    fn hopf_orbit_is_certified_unknot() {
        let p = SystemParams::ValidationHopf { mu: 1.0, omega: 1.0 };
        let spec = SectionSpec::for_system(&p);
        let cfg = IntegratorConfig::default();
        let guess = SectionPoint::on_plane(&p, &spec, 1.1, 0.0).unwrap();
        let orbit = find_periodic_orbit(&p, &guess, &spec, 1, &cfg).unwrap();
        let b = extract_braid(&orbit, &p, &cfg).unwrap();
        assert_eq!(b.verdict, KnotVerdict::CertifiedUnknot);
        assert_eq!((b.up_strands, b.down_strands), (1, 1));
    }

    #[test]
    fn mismatched_crossings_are_rejected() {
        let c = trefoil_fixture();
        assert!(braid_from_curve(&*c.curve, &[0.0, 1.0], &[0.5], 2.0, Z_AXIS).is_err());
        assert!(braid_from_curve(&*c.curve, &[0.0], &[2.0], 1.0, Z_AXIS).is_err());
    }
}
