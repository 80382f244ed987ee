//! Eigenvalue classification of fixed points and the Routh-Hurwitz triple of
//! the characteristic polynomial `l^3 + a l^2 + b l + c`.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, Mat3, State, SystemParams, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Eigenvalue {
    fn from(c: Complex64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityClass {
    RealSaddle,
    SaddleFocus,
    CenterLike,
    Sink,
    Source,
    Degenerate,
}

/// `(a, ab - c, c)`; all three positive iff every root has negative real part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouthHurwitz {
    pub a: f64,
    pub ab_minus_c: f64,
    pub c: f64,
}

impl RouthHurwitz {
    pub fn is_stable(&self) -> bool {
        self.a > 0.0 && self.ab_minus_c > 0.0 && self.c > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumClass {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: [Eigenvalue; 3],
    pub rh_triple: RouthHurwitz,
    pub class: StabilityClass,
    /// Angle in radians between the plane `y = 0` and the invariant plane of
    /// the two eigenvalues with positive real part, when there are exactly two.
    pub unstable_plane_section_angle: Option<f64>,
}

impl SpectrumClass {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Characteristic polynomial coefficients `(a, b, c)` of a 3x3 matrix.
pub fn characteristic_coefficients(m: &Mat3) -> (f64, f64, f64) {
    let trace = m[0][0] + m[1][1] + m[2][2];
    let minors = (m[0][0] * m[1][1] - m[0][1] * m[1][0])
        + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
        + (m[1][1] * m[2][2] - m[1][2] * m[2][1]);
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    (-trace, minors, -det)
}

pub fn routh_hurwitz(m: &Mat3) -> RouthHurwitz {
    let (a, b, c) = characteristic_coefficients(m);
    RouthHurwitz {
        a,
        ab_minus_c: a * b - c,
        c,
    }
}

type C3 = [Complex64; 3];

fn cross(a: &C3, b: &C3) -> C3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn cnorm(v: &C3) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Null vector of `m - lambda I` from the best-conditioned cross product of
/// two rows, together with the nullity estimate (1 or more).
fn eigenvector(m: &Mat3, lambda: Complex64) -> (C3, usize) {
    let rows: [C3; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let v = Complex64::new(m[i][j], 0.0);
            if i == j {
                v - lambda
            } else {
                v
            }
        })
    });
    let scale = rows.iter().map(cnorm).fold(0.0, f64::max).max(1e-300);
    let mut best = ([Complex64::new(0.0, 0.0); 3], 0.0);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let c = cross(&rows[i], &rows[j]);
        let n = cnorm(&c);
        if n > best.1 {
            best = (c, n);
        }
    }
    if best.1 <= 1e-10 * scale * scale {
        // rank <= 1: pick any vector orthogonal to the dominant row
        return ([Complex64::new(0.0, 0.0); 3], 2);
    }
    let n = best.1;
    (best.0.map(|c| c / n), 1)
}

fn real_plane_normal(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Angle between the plane spanned by `a, b` and the plane `y = 0`.
fn angle_with_section(a: &Vec3, b: &Vec3) -> Option<f64> {
    let n = real_plane_normal(a, b);
    let nn = fields::norm(&n);
    if nn == 0.0 {
        return None;
    }
    Some((n[1].abs() / nn).clamp(0.0, 1.0).acos())
}

pub(crate) fn classify_matrix(m: &Mat3, _fp: Option<&Vec3>) -> SpectrumClass {
    let mat = Matrix3::from_fn(|i, j| m[i][j]);
    let mut eig: Vec<Complex64> = mat.complex_eigenvalues().iter().copied().collect();
    // clean up conjugate pairs so they are exactly conjugate
    eig.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    let scale = mat.norm().max(1.0);
    let tol = 1e-9 * scale;

    let any_zero = eig.iter().any(|l| l.norm() < tol);
    let mut defective = false;
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (eig[i] - eig[j]).norm() < 1e-7 * scale {
                let (_, nullity) = eigenvector(m, (eig[i] + eig[j]) * 0.5);
                if nullity < 2 {
                    defective = true;
                }
            }
        }
    }
    let complex = eig.iter().any(|l| l.im.abs() > tol);
    let n_pos = eig.iter().filter(|l| l.re > tol).count();
    let n_neg = eig.iter().filter(|l| l.re < -tol).count();
    let imaginary_pair = eig.iter().any(|l| l.im.abs() > tol && l.re.abs() <= tol);

    let class = if any_zero || defective {
        StabilityClass::Degenerate
    } else if imaginary_pair {
        StabilityClass::CenterLike
    } else if n_neg == 3 {
        StabilityClass::Sink
    } else if n_pos == 3 {
        StabilityClass::Source
    } else if complex {
        StabilityClass::SaddleFocus
    } else {
        StabilityClass::RealSaddle
    };

    let unstable: Vec<Complex64> = eig.iter().copied().filter(|l| l.re > tol).collect();
    let angle = if unstable.len() == 2 && !defective {
        if unstable[0].im.abs() > tol {
            let (v, _) = eigenvector(m, unstable[0]);
            let re = [v[0].re, v[1].re, v[2].re];
            let im = [v[0].im, v[1].im, v[2].im];
            angle_with_section(&re, &im)
        } else {
            let (v0, _) = eigenvector(m, Complex64::new(unstable[0].re, 0.0));
            let (v1, _) = eigenvector(m, Complex64::new(unstable[1].re, 0.0));
            angle_with_section(&v0.map(|c| c.re), &v1.map(|c| c.re))
        }
    } else {
        None
    };

    SpectrumClass {
        eigenvalues: [eig[0].into(), eig[1].into(), eig[2].into()],
        rh_triple: routh_hurwitz(m),
        class,
        unstable_plane_section_angle: angle,
    }
}

/// Spectral class of a Moore-Spiegel fixed point.
pub fn classify_spectrum(params: &SystemParams, fp: State) -> Result<SpectrumClass> {
    if !matches!(params, SystemParams::MooreSpiegel { .. }) {
        return Err(Error::Unsupported(
            "spectral classification with Routh-Hurwitz data is defined for Moore-Spiegel".into(),
        ));
    }
    let f = fields::eval_field(params, fp)?;
    if fields::norm(&f) > 1e-10 {
        return Err(Error::Precondition(format!("{fp:?} is not a fixed point (|F| = {:e})", fields::norm(&f))));
    }
    let a = fp.to_array();
    Ok(classify_matrix(&fields::jacobian(params, &a), Some(&a)))
}

/// Real eigenvalues of `m`.
pub(crate) fn real_eigenvalues(m: &Mat3) -> Vec<f64> {
    let mat = Matrix3::from_fn(|i, j| m[i][j]);
    let scale = mat.norm().max(1.0);
    let mut v: Vec<f64> = mat
        .complex_eigenvalues()
        .iter()
        .filter(|l| l.im.abs() <= 1e-9 * scale)
        .map(|l| l.re)
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}
