//! Fixed-point index, Brouwer degree of `F/|F|` on spheres and the
//! direction-avoidance check.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, cross, dot, norm, rhs, SearchBox, State, SystemParams, Vec3};

pub const FIXED_POINT_RESIDUAL: f64 = 1e-10;
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;
pub const MIN_FIELD_NORM: f64 = 1e-8;
pub const ROUNDING_GUARD: f64 = 0.1;
pub const MIN_SUBDIVISION: u32 = 4;
/// Image triangles with an edge longer than this (in radians on the unit
/// sphere) are refined further.
const MAX_IMAGE_EDGE: f64 = 1.0;
const MAX_REFINEMENT: u32 = 16;

/// Rule turning a Jacobian determinant into an index. `FlippedSign` is a
/// deliberately wrong rule used as a negative control for the claims suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IndexRule {
    #[default]
    Standard,
    FlippedSign,
}

impl IndexRule {
    pub fn index_from_determinant(&self, det: f64) -> i32 {
        let s = if det > 0.0 { 1 } else { -1 };
        match self {
            IndexRule::Standard => s,
            IndexRule::FlippedSign => -s,
        }
    }
}

/// Index of a nondegenerate fixed point as the sign of the Jacobian
/// determinant.
pub fn analytic_index(params: &SystemParams, fp: State) -> Result<i32> {
    analytic_index_with(params, fp, IndexRule::Standard)
}

pub fn analytic_index_with(params: &SystemParams, fp: State, rule: IndexRule) -> Result<i32> {
    let f = fields::eval_field(params, fp)?;
    if norm(&f) >= FIXED_POINT_RESIDUAL {
        return Err(Error::Precondition(format!(
            "({}, {}, {}) is not a fixed point (|F| = {:e})",
            fp.x,
            fp.y,
            fp.z,
            norm(&f)
        )));
    }
    let j = fields::eval_jacobian(params, fp)?;
    let det = fields::to_matrix(&j).determinant();
    if det.abs() <= DEGENERACY_TOLERANCE {
        return Err(Error::Degenerate(format!(
            "Jacobian determinant {det:e} at the fixed point"
        )));
    }
    Ok(rule.index_from_determinant(det))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    pub point: State,
    pub radius: f64,
    pub subdivision: u32,
    /// Sum of analytic indices of the fixed points inside the sphere, when
    /// all of them are nondegenerate.
    pub analytic_index: Option<i32>,
    pub numerical_degree: i32,
    pub raw_degree: f64,
    pub agreement: bool,
    pub triangles: usize,
    pub min_field_norm: f64,
}

/// Icosahedron refined `level` times, projected to the unit sphere, with
/// faces oriented outward.
pub fn icosphere(level: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, g, 0.0],
        [1.0, g, 0.0],
        [-1.0, -g, 0.0],
        [1.0, -g, 0.0],
        [0.0, -1.0, g],
        [0.0, 1.0, g],
        [0.0, -1.0, -g],
        [0.0, 1.0, -g],
        [g, 0.0, -1.0],
        [g, 0.0, 1.0],
        [-g, 0.0, -1.0],
        [-g, 0.0, 1.0],
    ]
    .iter()
    .map(unit)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(unit(&[p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for f in &mut faces {
        let [a, b, c] = f.map(|i| verts[i]);
        let n = cross(&sub(&b, &a), &sub(&c, &a));
        if dot(&n, &a) < 0.0 {
            f.swap(1, 2);
        }
    }
    (verts, faces)
}

fn unit(v: &Vec3) -> Vec3 {
    let n = norm(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Signed solid angle of the spherical triangle with unit vertices `a, b, c`.
pub fn solid_angle(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let num = dot(a, &cross(b, c));
    let den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    2.0 * num.atan2(den)
}

fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    norm(&cross(a, b)).atan2(dot(a, b))
}

struct SphereMap<'a> {
    params: &'a SystemParams,
    center: Vec3,
    radius: f64,
}

impl SphereMap<'_> {
    /// Unit field direction at the sphere point above unit vector `u`, and
    /// the field magnitude there.
    fn image(&self, u: &Vec3) -> (Vec3, f64) {
        let p = [
            self.center[0] + self.radius * u[0],
            self.center[1] + self.radius * u[1],
            self.center[2] + self.radius * u[2],
        ];
        let f = rhs(self.params, &p);
        let n = norm(&f);
        ([f[0] / n, f[1] / n, f[2] / n], n)
    }

    /// Solid angle swept by the image of one domain triangle, refining while
    /// the image is too coarse. Returns (area, smallest |F| seen, leaves).
    fn area(&self, dom: [Vec3; 3], img: [(Vec3, f64); 3], level: u32) -> (f64, f64, usize) {
        let min_norm = img.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let coarse = (0..3).any(|k| angle_between(&img[k].0, &img[(k + 1) % 3].0) > MAX_IMAGE_EDGE);
        if !coarse || level >= MAX_REFINEMENT || min_norm < MIN_FIELD_NORM {
            return (solid_angle(&img[0].0, &img[1].0, &img[2].0), min_norm, 1);
        }
        let mids = [0, 1, 2].map(|k| {
            let (p, q) = (dom[k], dom[(k + 1) % 3]);
            unit(&[p[0] + q[0], p[1] + q[1], p[2] + q[2]])
        });
        let mimg = mids.map(|m| self.image(&m));
        let kids = [
            ([dom[0], mids[0], mids[2]], [img[0], mimg[0], mimg[2]]),
            ([dom[1], mids[1], mids[0]], [img[1], mimg[1], mimg[0]]),
            ([dom[2], mids[2], mids[1]], [img[2], mimg[2], mimg[1]]),
            ([mids[0], mids[1], mids[2]], [mimg[0], mimg[1], mimg[2]]),
        ];
        kids.into_iter().fold((0.0, min_norm, 0), |acc, (d, i)| {
            let (a, m, l) = self.area(d, i, level + 1);
            (acc.0 + a, acc.1.min(m), acc.2 + l)
        })
    }
}

/// Degree of `F/|F|` on the sphere of `radius` about `center`, from the
/// signed area of the image of an icosahedral triangulation.
pub fn numerical_degree(
    params: &SystemParams,
    center: State,
    radius: f64,
    subdivision: u32,
) -> Result<IndexResult> {
    params.validate()?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!("radius must be positive, got {radius}")));
    }
    if !center.is_finite() {
        return Err(Error::Domain("center must be finite".into()));
    }
    if subdivision < MIN_SUBDIVISION {
        return Err(Error::Input(format!(
            "subdivision must be at least {MIN_SUBDIVISION}, got {subdivision}"
        )));
    }
    let (verts, faces) = icosphere(subdivision);
    let map = SphereMap {
        params,
        center: center.to_array(),
        radius,
    };
    let images: Vec<(Vec3, f64)> = verts.par_iter().map(|u| map.image(u)).collect();
    let min_vertex = images.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    if !(min_vertex > MIN_FIELD_NORM) {
        return Err(Error::IllPosed(format!(
            "field nearly vanishes on the sphere (min |F| = {min_vertex:e})"
        )));
    }
    let parts: Vec<(f64, f64, usize)> = faces
        .par_iter()
        .map(|f| map.area(f.map(|i| verts[i]), f.map(|i| images[i]), 0))
        .collect();
    // fixed-order reduction keeps the result independent of scheduling
    let mut total = 0.0;
    let mut min_norm = min_vertex;
    let mut triangles = 0;
    for (a, m, l) in parts {
        total += a;
        min_norm = min_norm.min(m);
        triangles += l;
    }
    if !(min_norm > MIN_FIELD_NORM) {
        return Err(Error::IllPosed(format!(
            "field nearly vanishes on the sphere (min |F| = {min_norm:e})"
        )));
    }
    let raw = total / (4.0 * std::f64::consts::PI);
    let rounded = raw.round();
    if (raw - rounded).abs() >= ROUNDING_GUARD {
        return Err(Error::Resolution { raw });
    }
    let degree = rounded as i32;
    let analytic = enclosed_index_sum(params, &center.to_array(), radius, IndexRule::Standard);
    Ok(IndexResult {
        point: center,
        radius,
        subdivision,
        analytic_index: analytic,
        numerical_degree: degree,
        raw_degree: raw,
        agreement: analytic == Some(degree),
        triangles,
        min_field_norm: min_norm,
    })
}

/// Sum of analytic indices over fixed points strictly inside the ball, or
/// `None` when one of them is degenerate.
pub fn enclosed_index_sum(
    params: &SystemParams,
    center: &Vec3,
    radius: f64,
    rule: IndexRule,
) -> Option<i32> {
    let search = SearchBox {
        lo: [center[0] - radius, center[1] - radius, center[2] - radius],
        hi: [center[0] + radius, center[1] + radius, center[2] + radius],
    };
    let fps = fields::fixed_points(params, &search).ok()?;
    let mut sum = 0;
    for fp in fps {
        if norm(&sub(&fp.state.to_array(), center)) >= radius {
            continue;
        }
        sum += analytic_index_with(params, fp.state, rule).ok()?;
    }
    Some(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Avoidance {
    pub min_angle: f64,
    pub argmin: State,
    pub samples: usize,
}

/// Smallest angle between `F/|F|` and `direction` over a Fibonacci lattice
/// of at least `samples` points on the sphere of `radius` about the origin,
/// plus its two poles. `seed` rotates the lattice about the z-axis.
pub fn direction_avoidance(
    params: &SystemParams,
    radius: f64,
    direction: Vec3,
    samples: usize,
    seed: u64,
) -> Result<Avoidance> {
    params.validate()?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!("radius must be positive, got {radius}")));
    }
    let dn = norm(&direction);
    if !(dn > 0.0 && dn.is_finite()) {
        return Err(Error::Domain("direction must be a nonzero finite vector".into()));
    }
    if samples < 2 {
        return Err(Error::Input("need at least two samples".into()));
    }
    let dir = [direction[0] / dn, direction[1] / dn, direction[2] / dn];
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let offset = 2.0 * std::f64::consts::PI * ((seed as f64 * 0.618_033_988_749_894_9).fract());
    let lattice = (0..samples).into_par_iter().map(|k| {
        let z = 1.0 - (2.0 * k as f64 + 1.0) / samples as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * k as f64 + offset;
        [r * phi.cos(), r * phi.sin(), z]
    });
    let poles = rayon::iter::once([0.0, 0.0, 1.0]).chain(rayon::iter::once([0.0, 0.0, -1.0]));
    let evaluated: Vec<Result<(f64, Vec3)>> = poles
        .chain(lattice)
        .map(|u| {
            let p = [radius * u[0], radius * u[1], radius * u[2]];
            let f = rhs(params, &p);
            let n = norm(&f);
            if !(n > MIN_FIELD_NORM) {
                return Err(Error::IllPosed(format!(
                    "field nearly vanishes at ({}, {}, {})",
                    p[0], p[1], p[2]
                )));
            }
            Ok((angle_between(&f, &dir), p))
        })
        .collect();
    let mut best = (f64::INFINITY, [0.0; 3]);
    for e in evaluated {
        let (a, p) = e?;
        if a < best.0 {
            best = (a, p);
        }
    }
    Ok(Avoidance {
        min_angle: best.0,
        argmin: State::from(best.1),
        samples: samples + 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::CustomField;

    fn identity_field() -> SystemParams {
        SystemParams::custom(CustomField::parse("xdot = x\nydot = y\nzdot = z").unwrap())
    }

    fn ms() -> SystemParams {
        SystemParams::MooreSpiegel { t: 27.0, r: 100.0 }
    }

    #[test]
    fn icosphere_counts_and_orientation() {
        let (v, f) = icosphere(4);
        assert_eq!(f.len(), 5120);
        assert_eq!(v.len(), 2562);
        let total: f64 = f.iter().map(|t| solid_angle(&v[t[0]], &v[t[1]], &v[t[2]])).sum();
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn solid_angle_of_octant() {
        let a = solid_angle(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]);
        assert!((a - std::f64::consts::PI / 2.0).abs() < 1e-14);
        let b = solid_angle(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0]);
        assert_eq!(a, -b);
    }

    #[test]
    fn analytic_indices() {
        assert_eq!(analytic_index(&ms(), State::ORIGIN).unwrap(), -1);
        for t in [1.0, 27.0, 100.0] {
            let p = SystemParams::MooreSpiegel { t, r: 100.0 };
            assert_eq!(analytic_index(&p, State::ORIGIN).unwrap(), -1);
            let p = SystemParams::MooreSpiegel { t: -t, r: 100.0 };
            assert_eq!(analytic_index(&p, State::ORIGIN).unwrap(), 1);
        }
        assert_eq!(analytic_index(&identity_field(), State::ORIGIN).unwrap(), 1);
        assert_eq!(
            analytic_index_with(&identity_field(), State::ORIGIN, IndexRule::FlippedSign).unwrap(),
            -1
        );
        assert!(matches!(
            analytic_index(&ms(), State::new(1.0, 0.0, 0.0)),
            Err(Error::Precondition(_))
        ));
        let degenerate = SystemParams::MooreSpiegel { t: 0.0, r: 100.0 };
        assert!(matches!(analytic_index(&degenerate, State::ORIGIN), Err(Error::Degenerate(_))));
    }

    #[test]
    fn identity_degree() {
        for (c, r) in [(State::ORIGIN, 1.0), (State::new(0.3, -0.2, 0.1), 2.0)] {
            let d = numerical_degree(&identity_field(), c, r, 4).unwrap();
            assert_eq!(d.numerical_degree, 1);
            assert!((d.raw_degree - 1.0).abs() < 1e-9);
            assert!(d.agreement);
        }
        // sphere not enclosing the zero
        let d = numerical_degree(&identity_field(), State::new(5.0, 0.0, 0.0), 1.0, 4).unwrap();
        assert_eq!(d.numerical_degree, 0);
        assert_eq!(d.analytic_index, Some(0));
    }

    #[test]
    fn moore_spiegel_small_sphere() {
        let d = numerical_degree(&ms(), State::ORIGIN, 1e-2, 5).unwrap();
        assert_eq!(d.numerical_degree, -1);
        assert!((d.raw_degree + 1.0).abs() < 0.1);
        assert_eq!(d.analytic_index, Some(-1));
        assert!(d.agreement);
        assert!(d.triangles >= 20480);
    }

    #[test]
    fn vanishing_field_is_ill_posed() {
        assert!(matches!(
            numerical_degree(&identity_field(), State::new(1.0, 0.0, 0.0), 1.0, 4),
            Err(Error::IllPosed(_))
        ));
        assert!(numerical_degree(&identity_field(), State::ORIGIN, 1.0, 3).is_err());
    }

    #[test]
    fn avoidance_examples() {
        let a = direction_avoidance(&identity_field(), 1.0, [0.0, 0.0, 1.0], 1000, 0).unwrap();
        assert_eq!(a.min_angle, 0.0);
        assert_eq!(a.argmin, State::new(0.0, 0.0, 1.0));
        // on the z-axis the Nose-Hoover field points straight down
        let nh = SystemParams::NoseHoover { q: 1.0 };
        let down = direction_avoidance(&nh, 50.0, [0.0, 0.0, -1.0], 1000, 0).unwrap();
        assert_eq!(down.min_angle, 0.0);
        let up = direction_avoidance(&nh, 50.0, [0.0, 0.0, 1.0], 20_000, 3).unwrap();
        assert!(up.min_angle > 0.0);
    }
}
