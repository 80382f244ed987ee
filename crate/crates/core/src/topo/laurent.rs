//! Integer Laurent polynomials in `t` and the reduced Burau representation.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sum_k coeffs[k] t^(low + k)`, kept trimmed (no zero at either end).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LaurentPoly {
    pub low: i32,
    pub coeffs: Vec<i64>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self { low: 0, coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::monomial(1, 0)
    }

    pub fn monomial(c: i64, k: i32) -> Self {
        Self::new(k, vec![c])
    }

    pub fn new(low: i32, coeffs: Vec<i64>) -> Self {
        let mut p = Self { low, coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|c| **c == 0).count();
        if lead == self.coeffs.len() {
            self.coeffs.clear();
            self.low = 0;
            return;
        }
        self.coeffs.drain(..lead);
        self.low += lead as i32;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn high(&self) -> i32 {
        self.low + self.coeffs.len() as i32 - 1
    }

    pub fn coeff(&self, k: i32) -> i64 {
        let i = k - self.low;
        if i < 0 {
            return 0;
        }
        self.coeffs.get(i as usize).copied().unwrap_or(0)
    }

    /// Shifts to lowest degree zero and makes the lowest coefficient positive.
    pub fn normalized(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let sign = self.coeffs[0].signum();
        Self::new(0, self.coeffs.iter().map(|c| c * sign).collect())
    }

    /// Equal to `other` up to multiplication by `+-t^k`.
    pub fn equals_up_to_units(&self, other: &Self) -> bool {
        self.normalized() == other.normalized()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| *c as f64 * t.powi(self.low + k as i32))
            .sum()
    }

    /// Exact quotient `self / d`, or `None` if `d` does not divide `self`.
    pub fn div_exact(&self, d: &Self) -> Option<Self> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero());
        }
        let mut rem: Vec<i128> = self.coeffs.iter().map(|&c| c as i128).collect();
        let dc: Vec<i128> = d.coeffs.iter().map(|&c| c as i128).collect();
        let dl = dc.len();
        if rem.len() < dl {
            return None;
        }
        let lead = *dc.last().unwrap();
        let mut q = vec![0i128; rem.len() - dl + 1];
        for k in (0..q.len()).rev() {
            let top = rem[k + dl - 1];
            if top % lead != 0 {
                return None;
            }
            let c = top / lead;
            q[k] = c;
            for (j, dj) in dc.iter().enumerate() {
                rem[k + j] -= c * dj;
            }
        }
        if rem.iter().any(|&c| c != 0) {
            return None;
        }
        let coeffs = q.into_iter().map(|c| i64::try_from(c).ok()).collect::<Option<Vec<_>>>()?;
        Some(Self::new(self.low - d.low, coeffs))
    }
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, o: &LaurentPoly) -> LaurentPoly {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let low = self.low.min(o.low);
        let high = self.high().max(o.high());
        LaurentPoly::new(low, (low..=high).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        LaurentPoly::new(self.low, self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, o: &LaurentPoly) -> LaurentPoly {
        self + &(-o)
    }
}

impl Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, o: &LaurentPoly) -> LaurentPoly {
        if self.is_zero() || o.is_zero() {
            return LaurentPoly::zero();
        }
        let mut c = vec![0i64; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        LaurentPoly::new(self.low + o.low, c)
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for k in (self.low..=self.high()).rev() {
            let c = self.coeff(k);
            if c == 0 {
                continue;
            }
            let sign = if c < 0 { "-" } else if first { "" } else { "+" };
            let mag = c.abs();
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{sign}")?;
            if !first {
                write!(f, " ")?;
            }
            match (k, mag) {
                (0, m) => write!(f, "{m}")?,
                (1, 1) => write!(f, "t")?,
                (1, m) => write!(f, "{m}t")?,
                (k, 1) => write!(f, "t^{k}")?,
                (k, m) => write!(f, "{m}t^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

type Matrix = Vec<Vec<LaurentPoly>>;

fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { LaurentPoly::one() } else { LaurentPoly::zero() })
                .collect()
        })
        .collect()
}

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n).fold(LaurentPoly::zero(), |acc, k| {
                        if a[i][k].is_zero() || b[k][j].is_zero() {
                            acc
                        } else {
                            &acc + &(&a[i][k] * &b[k][j])
                        }
                    })
                })
                .collect()
        })
        .collect()
}

/// Reduced Burau matrix (size `n - 1`) of the generator `sigma_i^(+-1)`.
fn generator_matrix(n: usize, g: i32) -> Matrix {
    let m = n - 1;
    let i = g.unsigned_abs() as usize - 1;
    let mut a = identity(m);
    let t = |c: i64, k: i32| LaurentPoly::monomial(c, k);
    if g > 0 {
        a[i][i] = t(-1, 1);
        if i > 0 {
            a[i][i - 1] = t(1, 1);
        }
        if i + 1 < m {
            a[i][i + 1] = t(1, 0);
        }
    } else {
        a[i][i] = t(-1, -1);
        if i > 0 {
            a[i][i - 1] = t(1, 0);
        }
        if i + 1 < m {
            a[i][i + 1] = t(1, -1);
        }
    }
    a
}

pub fn validate_word(word: &[i32], n_strands: usize) -> Result<()> {
    if n_strands == 0 {
        return Err(Error::Input("a braid needs at least one strand".into()));
    }
    for &g in word {
        if g == 0 || g.unsigned_abs() as usize >= n_strands {
            return Err(Error::Input(format!(
                "generator {g} out of range for {n_strands} strands"
            )));
        }
    }
    Ok(())
}

/// Reduced Burau matrix of a braid word on `n_strands >= 2` strands.
pub fn reduced_burau(word: &[i32], n_strands: usize) -> Result<Vec<Vec<LaurentPoly>>> {
    validate_word(word, n_strands)?;
    if n_strands < 2 {
        return Err(Error::Input("the reduced Burau representation needs two strands".into()));
    }
    Ok(word
        .iter()
        .fold(identity(n_strands - 1), |acc, &g| mat_mul(&acc, &generator_matrix(n_strands, g))))
}

/// Fraction-free determinant (Bareiss) with exact Laurent division.
pub fn determinant(mut a: Matrix) -> LaurentPoly {
    let n = a.len();
    if n == 0 {
        return LaurentPoly::one();
    }
    let mut sign = 1i64;
    let mut prev = LaurentPoly::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return LaurentPoly::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &(&a[i][j] * &a[k][k]) - &(&a[i][k] * &a[k][j]);
                a[i][j] = num
                    .div_exact(&prev)
                    .expect("Bareiss quotient is exact over an integral domain");
            }
        }
        prev = a[k][k].clone();
    }
    let d = a[n - 1][n - 1].clone();
    if sign < 0 {
        -&d
    } else {
        d
    }
}

/// Alexander polynomial of the closure of `word`, normalized so that the
/// lowest power is `t^0` with a positive coefficient.
pub fn alexander_polynomial(word: &[i32], n_strands: usize) -> Result<LaurentPoly> {
    validate_word(word, n_strands)?;
    if n_strands == 1 {
        return Ok(LaurentPoly::one());
    }
    let b = reduced_burau(word, n_strands)?;
    let m = n_strands - 1;
    let mut a = identity(m);
    for i in 0..m {
        for j in 0..m {
            a[i][j] = &a[i][j] - &b[i][j];
        }
    }
    let det = determinant(a);
    let denom = LaurentPoly::new(0, vec![1; n_strands]);
    let q = det
        .div_exact(&denom)
        .ok_or_else(|| Error::Numerical(format!("det(I - B) = {det} is not divisible by {denom}")))?;
    Ok(q.normalized())
}

/// The word read backwards with every generator inverted.
pub fn inverse_word(word: &[i32]) -> Vec<i32> {
    word.iter().rev().map(|g| -g).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(low: i32, c: &[i64]) -> LaurentPoly {
        LaurentPoly::new(low, c.to_vec())
    }

    #[test]
    fn arithmetic() {
        let a = p(-1, &[1, 2]);
        let b = p(0, &[1, -1]);
        assert_eq!(&a * &b, p(-1, &[1, 1, -2]));
        assert_eq!(&a - &a, LaurentPoly::zero());
        assert_eq!((&a * &b).div_exact(&b), Some(a.clone()));
        assert_eq!(p(0, &[1, 0, 1]).div_exact(&p(0, &[1, 1])), None);
        assert_eq!(p(3, &[0, 2, 0]), p(4, &[2]));
        assert_eq!(p(-2, &[-1, 1]).normalized(), p(0, &[1, -1]));
        assert_eq!(format!("{}", p(0, &[1, -1, 1])), "t^2 - t + 1");
    }

    #[test]
    fn burau_of_inverse_generator_is_inverse() {
        for n in 2..6 {
            for i in 1..n as i32 {
                let m = reduced_burau(&[i, -i], n).unwrap();
                assert_eq!(m, identity(n - 1));
                let m = reduced_burau(&[-i, i], n).unwrap();
                assert_eq!(m, identity(n - 1));
            }
        }
    }

    #[test]
    fn braid_relations_hold() {
        for n in 3..6 {
            for i in 1..(n as i32 - 1) {
                let a = reduced_burau(&[i, i + 1, i], n).unwrap();
                let b = reduced_burau(&[i + 1, i, i + 1], n).unwrap();
                assert_eq!(a, b);
            }
        }
        let a = reduced_burau(&[1, 3], 4).unwrap();
        let b = reduced_burau(&[3, 1], 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn known_knots() {
        assert_eq!(alexander_polynomial(&[], 1).unwrap(), LaurentPoly::one());
        assert_eq!(alexander_polynomial(&[1], 2).unwrap(), LaurentPoly::one());
        assert_eq!(alexander_polynomial(&[-1], 2).unwrap(), LaurentPoly::one());
        let trefoil = p(0, &[1, -1, 1]);
        assert_eq!(alexander_polynomial(&[1, 1, 1], 2).unwrap(), trefoil);
        assert_eq!(alexander_polynomial(&[-1, -1, -1], 2).unwrap(), trefoil);
        // figure eight as the closure of (s1 s2^-1)^2
        assert_eq!(alexander_polynomial(&[1, -2, 1, -2], 3).unwrap(), p(0, &[1, -3, 1]));
        // cinquefoil
        assert_eq!(
            alexander_polynomial(&[1, 1, 1, 1, 1], 2).unwrap(),
            p(0, &[1, -1, 1, -1, 1])
        );
        // stabilized unknot
        assert_eq!(alexander_polynomial(&[1, 2], 3).unwrap(), LaurentPoly::one());
        // two-component unlink
        assert!(alexander_polynomial(&[], 2).unwrap().is_zero());
    }

    #[test]
    fn rejects_bad_generators() {
        assert!(alexander_polynomial(&[2], 2).is_err());
        assert!(alexander_polynomial(&[0], 3).is_err());
        assert!(alexander_polynomial(&[], 0).is_err());
    }

    fn word(n: usize) -> impl Strategy<Value = Vec<i32>> {
        let m = n as i32 - 1;
        prop::collection::vec((1..=m, any::<bool>()).prop_map(|(g, s)| if s { g } else { -g }), 0..=8)
    }

    proptest! {
        #[test]
        fn free_reduction_invariance((n, w) in (2usize..6).prop_flat_map(|n| (Just(n), word(n)))) {
            let mut full = w.clone();
            full.extend(inverse_word(&w));
            prop_assert_eq!(
                alexander_polynomial(&full, n).unwrap(),
                alexander_polynomial(&[], n).unwrap()
            );
        }

        #[test]
        fn conjugation_invariance((n, w, c) in (2usize..5).prop_flat_map(|n| (Just(n), word(n), word(n)))) {
            let mut conj = c.clone();
            conj.extend(&w);
            conj.extend(inverse_word(&c));
            prop_assert_eq!(
                alexander_polynomial(&conj, n).unwrap(),
                alexander_polynomial(&w, n).unwrap()
            );
        }

        #[test]
        fn bareiss_matches_expansion(entries in prop::collection::vec((-2i32..3, prop::collection::vec(-3i64..4, 1..3)), 9)) {
            let m: Matrix = entries
                .chunks(3)
                .map(|row| row.iter().map(|(l, c)| LaurentPoly::new(*l, c.clone())).collect())
                .collect();
            let cof = |a: usize, b: usize, c: usize, d: usize| &(&m[1][a] * &m[2][b]) - &(&m[1][c] * &m[2][d]);
            let expected = &(&(&m[0][0] * &cof(1, 2, 2, 1)) - &(&m[0][1] * &cof(0, 2, 2, 0)))
                + &(&m[0][2] * &cof(0, 1, 1, 0));
            prop_assert_eq!(determinant(m), expected);
        }
    }
}
