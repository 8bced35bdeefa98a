//! Mean curvature of parallel surfaces and its normal derivatives.
//!
//! H is the trace of the shape operator (no normalization constant).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jetcalc::{binom, Jet};
use crate::medium::InterfaceGeometry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("focal point: 1 + s*kappa = 0 at s = {s}, kappa = {kappa}")]
    FocalPoint { s: f64, kappa: f64 },
    #[error("complex principal curvatures: discriminant {0:e}")]
    ComplexCurvatures(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSpectrum {
    pub kappas: Vec<f64>,
}

impl CurvatureSpectrum {
    pub fn new(kappas: Vec<f64>) -> Self {
        CurvatureSpectrum { kappas }
    }

    pub fn sphere(r: f64) -> Self {
        CurvatureSpectrum { kappas: vec![1.0 / r, 1.0 / r] }
    }

    pub fn mean_curvature(&self) -> f64 {
        self.kappas.iter().sum()
    }
}

impl From<InterfaceGeometry> for CurvatureSpectrum {
    fn from(g: InterfaceGeometry) -> Self {
        CurvatureSpectrum { kappas: vec![g.kappa1, g.kappa2] }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// d^J H / d nu^J at the interface: (-1)^J J! sum kappa_i^(J+1).
pub fn mean_curvature_normal_derivatives(spec: &CurvatureSpectrum, j: usize) -> f64 {
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    let p: f64 = spec.kappas.iter().map(|k| k.powi(j as i32 + 1)).sum();
    sign * factorial(j) * p
}

/// Mean curvature of the parallel surface at signed distance s.
pub fn level_set_curvature_profile(spec: &CurvatureSpectrum, s: f64) -> Result<f64, GeometryError> {
    let mut h = 0.0;
    for &k in &spec.kappas {
        let d = 1.0 + s * k;
        if d.abs() <= 1e-14 {
            return Err(GeometryError::FocalPoint { s, kappa: k });
        }
        h += k / d;
    }
    Ok(h)
}

/// Jet of H(s) through the given depth.
pub fn mean_curvature_jet(geometry: &InterfaceGeometry, depth: usize) -> Jet {
    let spec = CurvatureSpectrum::from(*geometry);
    Jet::new((0..=depth).map(|j| mean_curvature_normal_derivatives(&spec, j)).collect())
}

/// Jet of H = A'/A for the area factor A(s) = 1 + h s + g s^2, where
/// h = kappa1 + kappa2 and g = kappa1 kappa2. Unlike [`mean_curvature_jet`]
/// this stays defined when the curvatures would be complex.
pub fn mean_curvature_jet_from_invariants(h: f64, g: f64, depth: usize) -> Jet {
    let mut a = Jet::zeros(depth + 1);
    a.coeffs_mut()[0] = 1.0;
    a.coeffs_mut()[1] = h;
    if depth + 1 >= 2 {
        a.coeffs_mut()[2] = 2.0 * g;
    }
    (&a.deriv() * &a.inv()).truncate(depth)
}

/// J-th derivative of the level-set profile at s = 0 by central differences,
/// Richardson-extrapolated over four halvings of the step.
pub fn profile_derivative_fd(spec: &CurvatureSpectrum, j: usize) -> Result<f64, GeometryError> {
    let kmax = spec.kappas.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let h0 = if kmax > 0.0 { 0.2 / kmax } else { 0.1 };
    let stencil = |h: f64| -> Result<f64, GeometryError> {
        if j == 0 {
            return level_set_curvature_profile(spec, 0.0);
        }
        let mut acc = 0.0;
        for m in 0..=j {
            let sgn = if m % 2 == 0 { 1.0 } else { -1.0 };
            let s = (j as f64 / 2.0 - m as f64) * h;
            acc += sgn * binom(j, m) * level_set_curvature_profile(spec, s)?;
        }
        Ok(acc / h.powi(j as i32))
    };
    let levels = 4;
    let mut table: Vec<f64> = Vec::with_capacity(levels);
    for l in 0..levels {
        table.push(stencil(h0 / 2f64.powi(l as i32))?);
    }
    // central stencils have even error expansions: eliminate h^2, h^4, h^6
    for order in 1..levels {
        let f = 4f64.powi(order as i32);
        for l in (order..levels).rev() {
            table[l] = (f * table[l] - table[l - 1]) / (f - 1.0);
        }
    }
    Ok(table[levels - 1])
}

/// Principal curvatures from H and dH/dnu, using dH = -(kappa1^2 + kappa2^2).
/// Returns the pair sorted ascending.
pub fn shape_operator_from_mean_jet(h: f64, dh: f64) -> Result<(f64, f64), GeometryError> {
    // z^2 - H z + (H^2 + dH)/2 = 0, discriminant (kappa1 - kappa2)^2
    let disc = -h * h - 2.0 * dh;
    if disc < -1e-10 {
        return Err(GeometryError::ComplexCurvatures(disc));
    }
    let r = disc.max(0.0).sqrt();
    Ok(((h - r) / 2.0, (h + r) / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sphere_values() {
        for r in [0.5, 1.0, 3.0] {
            let s = CurvatureSpectrum::sphere(r);
            assert_eq!(mean_curvature_normal_derivatives(&s, 0), 2.0 / r);
            assert!((mean_curvature_normal_derivatives(&s, 1) + 2.0 / (r * r)).abs() <= 1e-15 / (r * r));
            assert!((mean_curvature_normal_derivatives(&s, 2) - 4.0 / (r * r * r)).abs() <= 1e-15 / r.powi(3));
        }
    }

    #[test]
    fn flat_is_zero() {
        let s = CurvatureSpectrum::new(vec![0.0, 0.0]);
        for j in 0..6 {
            assert_eq!(mean_curvature_normal_derivatives(&s, j), 0.0);
        }
        assert_eq!(level_set_curvature_profile(&s, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn profile_examples() {
        let r = 2.0;
        let s = CurvatureSpectrum::sphere(r);
        assert!((level_set_curvature_profile(&s, 0.3).unwrap() - 2.0 / (r + 0.3)).abs() < 1e-15);
        let c = CurvatureSpectrum::new(vec![1.0 / r, 0.0]);
        assert_eq!(level_set_curvature_profile(&c, 0.0).unwrap(), 0.5);
        let f = CurvatureSpectrum::new(vec![2.0, -2.0]);
        assert!(matches!(level_set_curvature_profile(&f, 0.5), Err(GeometryError::FocalPoint { .. })));
    }

    #[test]
    fn sphere_derivatives_alternate_in_sign() {
        let s = CurvatureSpectrum::sphere(1.5);
        for j in 0..6 {
            let a = mean_curvature_normal_derivatives(&s, j);
            let b = mean_curvature_normal_derivatives(&s, j + 1);
            assert!(a * b < 0.0);
        }
    }

    #[test]
    fn shape_operator_examples() {
        let r = 1.7;
        let (a, b) = shape_operator_from_mean_jet(2.0 / r, -2.0 / (r * r)).unwrap();
        assert!((a - 1.0 / r).abs() < 1e-7 && (b - 1.0 / r).abs() < 1e-7);
        let (a, b) = shape_operator_from_mean_jet(0.3, -0.29).unwrap();
        assert!((a + 0.2).abs() < 1e-12 && (b - 0.5).abs() < 1e-12);
        assert_eq!(shape_operator_from_mean_jet(0.0, 0.0).unwrap(), (0.0, 0.0));
        assert!(matches!(shape_operator_from_mean_jet(1.0, 0.0), Err(GeometryError::ComplexCurvatures(_))));
    }

    #[test]
    fn invariant_jet_matches_spectrum_jet() {
        let g = InterfaceGeometry::new(0.7, -0.3);
        let a = mean_curvature_jet(&g, 5);
        let b = mean_curvature_jet_from_invariants(0.4, -0.21, 5);
        for k in 0..=5 {
            assert!((a.get(k) - b.get(k)).abs() < 1e-13, "{k}: {} vs {}", a.get(k), b.get(k));
        }
    }

    proptest! {
        #[test]
        fn formula_matches_level_set_oracle(k1 in -2.0f64..2.0, k2 in -2.0f64..2.0, j in 0usize..=4) {
            let s = CurvatureSpectrum::new(vec![k1, k2]);
            let exact = mean_curvature_normal_derivatives(&s, j);
            let fd = profile_derivative_fd(&s, j).unwrap();
            let scale = factorial(j) * (k1.abs().powi(j as i32 + 1) + k2.abs().powi(j as i32 + 1));
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(scale).max(1e-300), "{fd} vs {exact}");
        }

        #[test]
        fn shape_operator_inverts_forward(k1 in -2.0f64..2.0, k2 in -2.0f64..2.0) {
            let s = CurvatureSpectrum::new(vec![k1, k2]);
            let (a, b) = shape_operator_from_mean_jet(
                mean_curvature_normal_derivatives(&s, 0),
                mean_curvature_normal_derivatives(&s, 1),
            ).unwrap();
            let (lo, hi) = if k1 < k2 { (k1, k2) } else { (k2, k1) };
            // a double root loses half the digits through the square root
            prop_assert!((a - lo).abs() < 1e-7 && (b - hi).abs() < 1e-7);
        }
    }
}
