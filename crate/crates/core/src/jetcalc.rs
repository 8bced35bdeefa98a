//! Truncated normal-derivative jets.
//!
//! A jet of depth K stores `f(0), f'(0), ..., f^(K)(0)`: raw derivative
//! values, not Taylor coefficients. Products follow the Leibniz rule.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::Num;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("jet depth mismatch: {0} vs {1}")]
    DepthMismatch(usize, usize),
    #[error("log of a jet with non-positive base value {0}")]
    NonPositiveBase(f64),
    #[error("inverse of a jet with zero base value")]
    DivisionByZeroJet,
}

/// Scalars a jet can carry. Material jets are real, amplitude jets complex.
pub trait JetScalar:
    Copy + Num + Neg<Output = Self> + From<f64> + Debug + Send + Sync + 'static
{
    fn is_zero_value(&self) -> bool;
}

impl JetScalar for f64 {
    fn is_zero_value(&self) -> bool {
        *self == 0.0
    }
}

impl JetScalar for Complex64 {
    fn is_zero_value(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
}

pub(crate) fn binom(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Jet<T = f64> {
    coeffs: Vec<T>,
}

pub type CJet = Jet<Complex64>;

impl<T: JetScalar> Jet<T> {
    /// Builds a jet from derivative values; panics on an empty list.
    pub fn new(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least the value at the interface");
        Jet { coeffs }
    }

    pub fn constant(value: T, depth: usize) -> Self {
        let mut coeffs = vec![T::zero(); depth + 1];
        coeffs[0] = value;
        Jet { coeffs }
    }

    pub fn zeros(depth: usize) -> Self {
        Jet { coeffs: vec![T::zero(); depth + 1] }
    }

    pub fn depth(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    pub fn get(&self, k: usize) -> T {
        self.coeffs.get(k).copied().unwrap_or_else(T::zero)
    }

    /// Keeps derivatives up to `depth`, padding with zeros when extending.
    pub fn truncate(&self, depth: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(depth + 1, T::zero());
        Jet { coeffs }
    }

    /// d/ds of the jet. The top entry becomes zero (unknown), so the result
    /// is only meaningful up to depth - 1.
    pub fn deriv(&self) -> Self {
        let mut coeffs: Vec<T> = self.coeffs[1..].to_vec();
        coeffs.push(T::zero());
        Jet { coeffs }
    }

    pub fn scale(&self, s: T) -> Self {
        Jet { coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    fn check_depth(&self, other: &Self) -> Result<(), JetError> {
        if self.depth() != other.depth() {
            Err(JetError::DepthMismatch(self.depth(), other.depth()))
        } else {
            Ok(())
        }
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let n = self.coeffs.len();
        let mut out = vec![T::zero(); n];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for j in 0..=k {
                acc = acc + T::from(binom(k, j)) * self.coeffs[j] * other.coeffs[k - j];
            }
            *slot = acc;
        }
        Jet { coeffs: out }
    }

    fn inv_unchecked(&self) -> Self {
        let n = self.coeffs.len();
        let a0 = self.coeffs[0];
        let mut r = vec![T::zero(); n];
        r[0] = T::one() / a0;
        for k in 1..n {
            let mut s = T::zero();
            for j in 1..=k {
                s = s + T::from(binom(k, j)) * self.coeffs[j] * r[k - j];
            }
            r[k] = -s / a0;
        }
        Jet { coeffs: r }
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, JetError> {
        self.check_depth(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub fn try_inv(&self) -> Result<Self, JetError> {
        if self.coeffs[0].is_zero_value() {
            return Err(JetError::DivisionByZeroJet);
        }
        Ok(self.inv_unchecked())
    }

    /// Inverse without the zero check; callers guarantee a nonzero base.
    pub fn inv(&self) -> Self {
        self.inv_unchecked()
    }

    /// exp of a jet: g' = f' g.
    pub fn exp_with(&self, exp0: T) -> Self {
        let n = self.coeffs.len();
        let mut g = vec![T::zero(); n];
        g[0] = exp0;
        for k in 0..n - 1 {
            let mut acc = T::zero();
            for j in 0..=k {
                acc = acc + T::from(binom(k, j)) * self.coeffs[j + 1] * g[k - j];
            }
            g[k + 1] = acc;
        }
        Jet { coeffs: g }
    }

    pub fn map_to_complex(&self) -> CJet
    where
        T: Into<Complex64>,
    {
        Jet { coeffs: self.coeffs.iter().map(|&c| c.into()).collect() }
    }
}

impl Jet<f64> {
    /// Evaluates the Taylor polynomial carried by the jet at signed distance s.
    pub fn taylor_eval(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        let mut term = 1.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                term *= s / k as f64;
            }
            acc += c * term;
        }
        acc
    }

    pub fn to_complex(&self) -> CJet {
        self.map_to_complex()
    }

    pub fn try_log(&self) -> Result<Self, JetError> {
        let a = &self.coeffs;
        if !(a[0] > 0.0) {
            return Err(JetError::NonPositiveBase(a[0]));
        }
        let n = a.len();
        let mut f = vec![0.0; n];
        f[0] = a[0].ln();
        // a' = a f'  =>  a[k+1] = sum_j C(k,j) a[j] f[k+1-j]
        for k in 0..n - 1 {
            let mut s = a[k + 1];
            for j in 1..=k {
                s -= binom(k, j) * a[j] * f[k + 1 - j];
            }
            f[k + 1] = s / a[0];
        }
        Ok(Jet { coeffs: f })
    }

    pub fn exp(&self) -> Self {
        self.exp_with(self.coeffs[0].exp())
    }

    /// Square root of a jet with positive base, as exp(log(a)/2).
    pub(crate) fn sqrt(&self) -> Result<Self, JetError> {
        Ok(self.try_log()?.scale(0.5).exp())
    }
}

impl<T: JetScalar> Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: &Jet<T>) -> Jet<T> {
        assert_eq!(self.depth(), rhs.depth(), "jet depth mismatch");
        Jet { coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(&a, &b)| a + b).collect() }
    }
}

impl<T: JetScalar> Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: &Jet<T>) -> Jet<T> {
        assert_eq!(self.depth(), rhs.depth(), "jet depth mismatch");
        Jet { coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(&a, &b)| a - b).collect() }
    }
}

impl<T: JetScalar> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: &Jet<T>) -> Jet<T> {
        assert_eq!(self.depth(), rhs.depth(), "jet depth mismatch");
        self.mul_unchecked(rhs)
    }
}

impl<T: JetScalar> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        Jet { coeffs: self.coeffs.iter().map(|&a| -a).collect() }
    }
}

macro_rules! forward_owned_ops {
    ($tr:ident, $m:ident) => {
        impl<T: JetScalar> $tr for Jet<T> {
            type Output = Jet<T>;
            fn $m(self, rhs: Jet<T>) -> Jet<T> {
                (&self).$m(&rhs)
            }
        }
        impl<T: JetScalar> $tr<&Jet<T>> for Jet<T> {
            type Output = Jet<T>;
            fn $m(self, rhs: &Jet<T>) -> Jet<T> {
                (&self).$m(rhs)
            }
        }
        impl<T: JetScalar> $tr<Jet<T>> for &Jet<T> {
            type Output = Jet<T>;
            fn $m(self, rhs: Jet<T>) -> Jet<T> {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned_ops!(Add, add);
forward_owned_ops!(Sub, sub);
forward_owned_ops!(Mul, mul);

/// Leibniz product of two jets of equal depth.
pub fn jet_mul(a: &Jet, b: &Jet) -> Result<Jet, JetError> {
    a.try_mul(b)
}

/// Normal derivatives of log f from those of f. Requires f(0) > 0.
pub fn jet_log(a: &Jet) -> Result<Jet, JetError> {
    a.try_log()
}

/// Normal derivatives of 1/f. Requires f(0) != 0.
pub fn jet_inv(a: &Jet) -> Result<Jet, JetError> {
    a.try_inv()
}
