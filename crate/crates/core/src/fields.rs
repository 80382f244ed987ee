//! The oscillator vector fields, their Jacobians and the quantities read off
//! the section plane `y = 0` and off large spheres.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::CustomField;
use crate::topo::spectrum::{classify_matrix, SpectrumClass};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Points with `|y|` at most this are on the section plane.
pub const PLANE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemKind {
    NoseHoover,
    MooreSpiegel,
    ValidationHopf,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SystemParams {
    /// `x' = y, y' = -x - z y, z' = (y^2 - 1) / Q`.
    NoseHoover { q: f64 },
    /// `x' = y, y' = z, z' = -z - (T - R + R x^2) y - T x`.
    MooreSpiegel { t: f64, r: f64 },
    /// Hopf normal form in `(x, y)` with a decoupled contracting `z`. Its
    /// limit cycle is the circle of radius `sqrt(mu)` with period `2 pi / omega`.
    ValidationHopf { mu: f64, omega: f64 },
    Custom { field: CustomField },
}

impl SystemParams {
    pub fn nose_hoover(q: f64) -> Result<Self> {
        let p = SystemParams::NoseHoover { q };
        p.validate()?;
        Ok(p)
    }

    pub fn moore_spiegel(t: f64, r: f64) -> Result<Self> {
        let p = SystemParams::MooreSpiegel { t, r };
        p.validate()?;
        Ok(p)
    }

    pub fn hopf(mu: f64, omega: f64) -> Result<Self> {
        let p = SystemParams::ValidationHopf { mu, omega };
        p.validate()?;
        Ok(p)
    }

    pub fn custom(field: CustomField) -> Self {
        SystemParams::Custom { field }
    }

    pub fn kind(&self) -> SystemKind {
        match self {
            SystemParams::NoseHoover { .. } => SystemKind::NoseHoover,
            SystemParams::MooreSpiegel { .. } => SystemKind::MooreSpiegel,
            SystemParams::ValidationHopf { .. } => SystemKind::ValidationHopf,
            SystemParams::Custom { .. } => SystemKind::Custom,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SystemParams::NoseHoover { q } if !(q > 0.0 && q.is_finite()) => {
                Err(Error::InvalidParams(format!("Nose-Hoover needs Q > 0, got {q}")))
            }
            SystemParams::MooreSpiegel { t, r } if !(t.is_finite() && r.is_finite()) => {
                Err(Error::InvalidParams(format!("Moore-Spiegel needs finite T, R, got ({t}, {r})")))
            }
            SystemParams::ValidationHopf { mu, omega }
                if !(mu > 0.0 && omega > 0.0 && mu.is_finite() && omega.is_finite()) =>
            {
                Err(Error::InvalidParams(format!(
                    "validation field needs mu > 0 and omega > 0, got ({mu}, {omega})"
                )))
            }
            _ => Ok(()),
        }
    }

    /// True when the Moore-Spiegel classification results (index -1, saddle
    /// at the origin) apply, i.e. `T > 0` and `R > 0`.
    pub fn in_classified_regime(&self) -> bool {
        match *self {
            SystemParams::MooreSpiegel { t, r } => t > 0.0 && r > 0.0,
            _ => false,
        }
    }

    /// Fixed points known in closed form.
    pub fn known_fixed_points(&self) -> Vec<Vec3> {
        match self {
            SystemParams::NoseHoover { .. } => Vec::new(),
            SystemParams::MooreSpiegel { .. } | SystemParams::ValidationHopf { .. } => {
                vec![[0.0; 3]]
            }
            SystemParams::Custom { .. } => Vec::new(),
        }
    }

    /// True when `s` lies on an invariant line known in closed form (the
    /// `z`-axis for Nose-Hoover) to within `tol`.
    pub fn on_known_invariant_line(&self, s: &Vec3, tol: f64) -> bool {
        match self {
            SystemParams::NoseHoover { .. } => s[0].abs() <= tol && s[1].abs() <= tol,
            // the z-axis is invariant for the validation field too
            SystemParams::ValidationHopf { .. } => s[0].abs() <= tol && s[1].abs() <= tol,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl State {
    pub const ORIGIN: State = State {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.to_array())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<Vec3> for State {
    fn from(a: Vec3) -> Self {
        State::new(a[0], a[1], a[2])
    }
}

impl From<State> for Vec3 {
    fn from(s: State) -> Self {
        s.to_array()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalDirection {
    pub theta: f64,
    pub psi: f64,
}

impl SphericalDirection {
    pub fn new(theta: f64, psi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !(0.0..2.0 * PI).contains(&psi) {
            return Err(Error::Domain(format!(
                "spherical direction out of range: theta = {theta}, psi = {psi}"
            )));
        }
        Ok(Self { theta, psi })
    }

    pub fn unit_vector(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.psi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

pub(crate) fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn check_finite(s: &Vec3) -> Result<()> {
    if s.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite state {s:?}")))
    }
}

/// Right-hand side without input validation; used in integrator inner loops.
#[inline]
pub(crate) fn rhs(params: &SystemParams, s: &Vec3) -> Vec3 {
    let [x, y, z] = *s;
    match params {
        SystemParams::NoseHoover { q } => [y, -x - z * y, (y * y - 1.0) / q],
        SystemParams::MooreSpiegel { t, r } => {
            [y, z, -z - (t - r + r * x * x) * y - t * x]
        }
        SystemParams::ValidationHopf { mu, omega } => {
            let g = mu - x * x - y * y;
            [-omega * y + x * g, omega * x + y * g, -z]
        }
        SystemParams::Custom { field } => field.eval(s),
    }
}

#[inline]
pub(crate) fn jacobian(params: &SystemParams, s: &Vec3) -> Mat3 {
    let [x, y, z] = *s;
    match params {
        SystemParams::NoseHoover { q } => [
            [0.0, 1.0, 0.0],
            [-1.0, -z, -y],
            [0.0, 2.0 * y / q, 0.0],
        ],
        SystemParams::MooreSpiegel { t, r } => [
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [-2.0 * r * x * y - t, -(t - r + r * x * x), -1.0],
        ],
        SystemParams::ValidationHopf { mu, omega } => {
            let g = mu - x * x - y * y;
            [
                [g - 2.0 * x * x, -omega - 2.0 * x * y, 0.0],
                [omega - 2.0 * x * y, g - 2.0 * y * y, 0.0],
                [0.0, 0.0, -1.0],
            ]
        }
        SystemParams::Custom { field } => field.jacobian(s),
    }
}

pub fn eval_field(params: &SystemParams, s: State) -> Result<Vec3> {
    let a = s.to_array();
    check_finite(&a)?;
    Ok(rhs(params, &a))
}

pub fn eval_jacobian(params: &SystemParams, s: State) -> Result<Mat3> {
    let a = s.to_array();
    check_finite(&a)?;
    Ok(jacobian(params, &a))
}

pub(crate) fn to_matrix(m: &Mat3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

/// Axis-aligned search box `[lo_i, hi_i]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl SearchBox {
    pub fn cube(half_width: f64) -> Self {
        Self {
            lo: [-half_width; 3],
            hi: [half_width; 3],
        }
    }

    fn contains(&self, s: &Vec3, slack: f64) -> bool {
        (0..3).all(|i| s[i] >= self.lo[i] - slack && s[i] <= self.hi[i] + slack)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPoint {
    pub state: State,
    pub spectrum: SpectrumClass,
    /// `|det J|` fell below the degeneracy threshold.
    pub degenerate: bool,
}

const FIXED_POINT_RESIDUAL: f64 = 1e-10;
const SEEDS_PER_AXIS: usize = 9;

/// All zeros of the field inside `search_box`, found by Levenberg-Marquardt
/// polishing from a regular grid of seeds. Seeds that stall at a nonzero
/// minimum of `|F|` are discarded.
pub fn fixed_points(params: &SystemParams, search_box: &SearchBox) -> Result<Vec<FixedPoint>> {
    check_finite(&search_box.lo)?;
    check_finite(&search_box.hi)?;
    if (0..3).any(|i| search_box.lo[i] > search_box.hi[i]) {
        return Err(Error::Domain("search box has lo > hi".into()));
    }
    let n = SEEDS_PER_AXIS;
    let coord = |i: usize, k: usize| {
        search_box.lo[i] + (search_box.hi[i] - search_box.lo[i]) * k as f64 / (n - 1) as f64
    };
    let scale = (0..3)
        .map(|i| (search_box.hi[i] - search_box.lo[i]).abs())
        .fold(1.0, f64::max);

    let mut found: Vec<Vec3> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let seed = [coord(0, i), coord(1, j), coord(2, k)];
                let Some(root) = polish_zero(params, seed) else {
                    continue;
                };
                if !search_box.contains(&root, 1e-9 * scale) {
                    continue;
                }
                let dup = found.iter().any(|f| {
                    let d = [f[0] - root[0], f[1] - root[1], f[2] - root[2]];
                    norm(&d) < 1e-6 * (1.0 + norm(f))
                });
                if !dup {
                    found.push(root);
                }
            }
        }
    }
    found.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

    Ok(found
        .into_iter()
        .map(|p| {
            let jac = jacobian(params, &p);
            let spectrum = classify_matrix(&jac, None);
            let degenerate = to_matrix(&jac).determinant().abs() <= 1e-10;
            FixedPoint {
                state: p.into(),
                spectrum,
                degenerate,
            }
        })
        .collect())
}

fn polish_zero(params: &SystemParams, seed: Vec3) -> Option<Vec3> {
    let mut s = Vector3::from(seed);
    let mut f = Vector3::from(rhs(params, &seed));
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let fnorm = f.norm();
        if !fnorm.is_finite() {
            return None;
        }
        if fnorm < 1e-14 * (1.0 + s.norm()) {
            break;
        }
        let j = to_matrix(&jacobian(params, &s.into()));
        let jt = j.transpose();
        let jtj = jt * j;
        let g = jt * f;
        let mut accepted = false;
        for _ in 0..20 {
            let a = jtj + Matrix3::identity() * (lambda * (1.0 + jtj.diagonal().amax()));
            let Some(delta) = a.lu().solve(&(-g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = s + delta;
            let ft = Vector3::from(rhs(params, &trial.into()));
            if ft.norm() < fnorm {
                s = trial;
                f = ft;
                lambda = (lambda * 0.1).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    let root: Vec3 = s.into();
    (f.norm() < FIXED_POINT_RESIDUAL).then_some(root)
}

/// Field at `r * dir` dotted with the outward unit normal.
pub fn radial_component(params: &SystemParams, r: f64, dir: SphericalDirection) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let u = dir.unit_vector();
    let s = [r * u[0], r * u[1], r * u[2]];
    Ok(dot(&rhs(params, &s), &u))
}

/// Leading term of [`radial_component`] for large `r`: returns
/// `(coefficient, order)` with `radial_component ~ coefficient * r^order`.
///
/// For Nose-Hoover, `F . s / |s| = z y^2 (1/Q - 1)/r - z/(Q r)`, so the
/// `r^2` coefficient is `cos t sin^2 t sin^2 p (1/Q - 1)`; at `Q = 1` it
/// vanishes identically and the exact value `-cos t` (order 0) is returned.
/// For Moore-Spiegel the cubic term `-R x^2 y z / r` dominates.
pub fn radial_asymptotic_coefficient(
    params: &SystemParams,
    dir: SphericalDirection,
) -> Result<(f64, i32)> {
    let (st, ct) = dir.theta.sin_cos();
    let (sp, cp) = dir.psi.sin_cos();
    match *params {
        SystemParams::NoseHoover { q } => {
            let c = 1.0 / q - 1.0;
            if c == 0.0 {
                Ok((-ct / q, 0))
            } else {
                Ok((ct * st * st * sp * sp * c, 2))
            }
        }
        SystemParams::MooreSpiegel { r, .. } => Ok((-r * st.powi(3) * cp * cp * sp * ct, 3)),
        _ => Err(Error::Unsupported(format!(
            "radial asymptotics are only tabulated for the two oscillators, not {:?}",
            params.kind()
        ))),
    }
}

/// `F(s) . (0, 1, 0)` for a point on the plane `y = 0`.
pub fn section_normal_component(params: &SystemParams, s: State) -> Result<f64> {
    let a = s.to_array();
    check_finite(&a)?;
    if a[1].abs() > PLANE_TOLERANCE {
        return Err(Error::Precondition(format!(
            "point is not on y = 0 (|y| = {:e})",
            a[1].abs()
        )));
    }
    Ok(match *params {
        SystemParams::NoseHoover { .. } => -a[0],
        SystemParams::MooreSpiegel { .. } => a[2],
        _ => rhs(params, &[a[0], 0.0, a[2]])[1],
    })
}
