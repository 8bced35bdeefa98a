//! Acoustic reflection and transmission symbols, order by order.
//!
//! Each of the incident (I), reflected (R) and transmitted (T) waves is
//! `exp(i psi) * sum_J a_J` with `psi' = +xi_3` for I and T and `-xi_3` for R,
//! where xi_3(s) = sqrt(tau^2 / c(s)^2 - |xi'|^2) follows the normal profile.
//! The amplitudes obey the exact transport recursion
//!
//! ```text
//! a_J' = -(q'/(2q) + H/2) a_J + i/(2q) [ (mu a_{J+1}')' + H mu a_{J+1}' ],   q = mu psi'
//! ```
//!
//! which is solved as a jet ODE in s. Expanding a_0' gives
//! `-[d log sqrt(rho) + d log c (1 - tau^2/(2 c^2 xi_3^2)) + H/2] a_0`.
//! At s = 0 the continuity of u and mu du/ds fixes a_R and a_T.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::mean_curvature_jet;
use crate::jetcalc::{CJet, Jet};
use crate::medium::{
    vertical_wavenumber, AcousticModel, AcousticSideJet, Covector, MediumError, DEFAULT_GLANCING_TOL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcousticError {
    #[error("requested depth {requested} exceeds model depth {available}")]
    DepthExceeded { requested: usize, available: usize },
    #[error(transparent)]
    Medium(#[from] MediumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcousticOrder {
    /// Symbol order J (0, -1, -2, ...).
    pub order: i32,
    pub a_r: Complex64,
    pub a_t: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcousticSymbolSeries {
    pub covector: Covector,
    pub model: AcousticModel,
    pub orders: Vec<AcousticOrder>,
}

impl AcousticSymbolSeries {
    pub fn order(&self, j: i32) -> Option<&AcousticOrder> {
        self.orders.iter().find(|o| o.order == j)
    }
}

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Principal reflection and transmission coefficients.
pub fn principal_rt(cov: &Covector, model: &AcousticModel) -> Result<(f64, f64), AcousticError> {
    principal_rt_sides(cov, &model.minus, &model.plus, DEFAULT_GLANCING_TOL)
}

pub(crate) fn principal_rt_sides(
    cov: &Covector,
    minus: &AcousticSideJet,
    plus: &AcousticSideJet,
    tol: f64,
) -> Result<(f64, f64), AcousticError> {
    let xi_i = vertical_wavenumber(cov, minus.cs.value(), tol)?;
    let xi_t = vertical_wavenumber(cov, plus.cs.value(), tol)?;
    let (mm, mp) = (minus.mu0(), plus.mu0());
    let r0 = (mm * xi_i - mp * xi_t) / (mm * xi_i + mp * xi_t);
    Ok((r0, 1.0 + r0))
}

/// mu^- xi_I (1 - R0^2) - mu^+ xi_T T0^2; vanishes up to round-off.
pub fn flux_residual(cov: &Covector, model: &AcousticModel) -> Result<f64, AcousticError> {
    let tol = DEFAULT_GLANCING_TOL;
    let xi_i = vertical_wavenumber(cov, model.minus.cs.value(), tol)?;
    let xi_t = vertical_wavenumber(cov, model.plus.cs.value(), tol)?;
    let (r0, t0) = principal_rt(cov, model)?;
    Ok(model.minus.mu0() * xi_i * (1.0 - r0 * r0) - model.plus.mu0() * xi_t * t0 * t0)
}

/// Symbols for J = 0, -1, ..., -depth.
pub fn forward_symbols(
    cov: &Covector,
    model: &AcousticModel,
    depth: usize,
) -> Result<AcousticSymbolSeries, AcousticError> {
    forward_symbols_tol(cov, model, depth, DEFAULT_GLANCING_TOL)
}

pub fn forward_symbols_tol(
    cov: &Covector,
    model: &AcousticModel,
    depth: usize,
    tol: f64,
) -> Result<AcousticSymbolSeries, AcousticError> {
    if depth > model.depth {
        return Err(AcousticError::DepthExceeded { requested: depth, available: model.depth });
    }
    let hjet = mean_curvature_jet(&model.geometry, depth);
    let vals = forward_orders(cov, &model.minus, &model.plus, &hjet, depth, tol)?;
    let orders = vals
        .into_iter()
        .enumerate()
        .map(|(k, (a_r, a_t))| AcousticOrder { order: -(k as i32), a_r, a_t })
        .collect();
    Ok(AcousticSymbolSeries { covector: *cov, model: model.clone(), orders })
}

/// Profile-dependent coefficients of one wave's transport equation.
struct Transport {
    mu: CJet,
    /// q'/(2q) + H/2
    decay: CJet,
    /// i/(2q)
    gain: CJet,
    h: CJet,
}

impl Transport {
    fn new(side: &AcousticSideJet, hjet: &Jet, cov: &Covector, branch: f64, depth: usize) -> Result<Self, MediumError> {
        let rho = side.rho.truncate(depth);
        let c = side.cs.truncate(depth);
        let k2 = cov.xi_norm().powi(2);
        let tau2 = cov.tau * cov.tau;
        let mut rad = (&c * &c).inv().scale(tau2);
        rad.coeffs_mut()[0] -= k2;
        let psi = rad.sqrt()?.scale(branch);
        let mu = &rho * &(&c * &c);
        let q = &mu * &psi;
        let qinv = q.inv();
        let h = hjet.truncate(depth);
        let decay = &(&q.deriv() * &qinv).scale(0.5) + &h.scale(0.5);
        Ok(Transport {
            mu: mu.to_complex(),
            decay: decay.to_complex(),
            gain: qinv.to_complex().scale(I * 0.5),
            h: h.to_complex(),
        })
    }

    /// Integrates a_J from its boundary value given a_{J+1} (None for J = 0).
    fn integrate(&self, a0: Complex64, upper: Option<&CJet>) -> CJet {
        let n = self.mu.depth() + 1;
        let src = match upper {
            Some(u) => {
                let flux = &self.mu * &u.deriv();
                &self.gain * &(&flux.deriv() + &(&self.h * &flux))
            }
            None => CJet::zeros(n - 1),
        };
        let mut a = CJet::zeros(n - 1);
        a.coeffs_mut()[0] = a0;
        for k in 0..n - 1 {
            // (decay * a)[k] only involves a[0..=k]
            let mut conv = Complex64::new(0.0, 0.0);
            for j in 0..=k {
                conv += crate::jetcalc::binom(k, j) * self.decay.get(j) * a.get(k - j);
            }
            a.coeffs_mut()[k + 1] = -conv + src.get(k);
        }
        a
    }
}

/// Core recursion with an explicit mean-curvature jet. Returns (a_R, a_T)
/// for J = 0, -1, ..., -depth. Side jets must have depth >= `depth`.
pub fn forward_orders(
    cov: &Covector,
    minus: &AcousticSideJet,
    plus: &AcousticSideJet,
    hjet: &Jet,
    depth: usize,
    tol: f64,
) -> Result<Vec<(Complex64, Complex64)>, AcousticError> {
    let available = minus.depth().min(plus.depth()).min(hjet.depth());
    if depth > available {
        return Err(AcousticError::DepthExceeded { requested: depth, available });
    }
    let xi_i = vertical_wavenumber(cov, minus.cs.value(), tol)?;
    let xi_t = vertical_wavenumber(cov, plus.cs.value(), tol)?;
    let (mm, mp) = (minus.mu0(), plus.mu0());
    let det = mm * xi_i + mp * xi_t;
    let r0 = (mm * xi_i - mp * xi_t) / det;

    let mut out = Vec::with_capacity(depth + 1);
    out.push((Complex64::new(r0, 0.0), Complex64::new(1.0 + r0, 0.0)));
    if depth == 0 {
        return Ok(out);
    }
    let ti = Transport::new(minus, hjet, cov, 1.0, depth)?;
    let tr = Transport::new(minus, hjet, cov, -1.0, depth)?;
    let tt = Transport::new(plus, hjet, cov, 1.0, depth)?;

    let mut ai = ti.integrate(Complex64::new(1.0, 0.0), None);
    let mut ar = tr.integrate(Complex64::new(r0, 0.0), None);
    let mut at = tt.integrate(Complex64::new(1.0 + r0, 0.0), None);
    for k in 1..=depth {
        let g = mp * at.get(1) - mm * (ai.get(1) + ar.get(1));
        let v = I * g / det;
        out.push((v, v));
        if k < depth {
            ai = ti.integrate(Complex64::new(0.0, 0.0), Some(&ai));
            ar = tr.integrate(v, Some(&ar));
            at = tt.integrate(v, Some(&at));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::InterfaceGeometry;
    use proptest::prelude::*;

    fn side(rho: &[f64], c: &[f64]) -> AcousticSideJet {
        AcousticSideJet::new(Jet::new(rho.to_vec()), Jet::new(c.to_vec())).unwrap()
    }

    fn model(m: AcousticSideJet, p: AcousticSideJet, g: InterfaceGeometry) -> AcousticModel {
        AcousticModel::new_acoustic(m, p, g).unwrap()
    }

    #[test]
    fn principal_examples() {
        let cov = Covector::new(1.0, [0.0, 0.0]).unwrap();
        let same = model(side(&[1.0], &[1.0]), side(&[1.0], &[1.0]), InterfaceGeometry::flat());
        assert_eq!(principal_rt(&cov, &same).unwrap(), (0.0, 1.0));
        let m = model(side(&[1.0], &[1.0]), side(&[1.0], &[2.0]), InterfaceGeometry::flat());
        let (r, t) = principal_rt(&cov, &m).unwrap();
        assert!((r + 1.0 / 3.0).abs() < 1e-15 && (t - 2.0 / 3.0).abs() < 1e-15);
        let cov = Covector::new(1.0, [0.6, 0.0]).unwrap();
        assert!(matches!(
            principal_rt(&cov, &m),
            Err(AcousticError::Medium(MediumError::Evanescent { .. }))
        ));
        assert!(flux_residual(&Covector::new(1.0, [0.0, 0.0]).unwrap(), &m).unwrap().abs() < 1e-15);
        assert_eq!(flux_residual(&cov, &same).unwrap(), 0.0);
    }

    #[test]
    fn transparent_interface() {
        let s = side(&[1.2, 0.3, -0.2, 0.1], &[1.5, -0.1, 0.4, 0.2]);
        let m = model(s.clone(), s, InterfaceGeometry::new(0.3, -0.1));
        let ser = forward_symbols(&Covector::from_slowness(1.0, 0.3), &m, 3).unwrap();
        for o in &ser.orders {
            assert!(o.a_r.norm() < 1e-15, "{:?}", o);
            let expect = if o.order == 0 { 1.0 } else { 0.0 };
            assert!((o.a_t - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_media_first_order_vanishes() {
        let m = model(side(&[1.0, 0.0], &[1.0, 0.0]), side(&[1.3, 0.0], &[1.7, 0.0]), InterfaceGeometry::flat());
        for b in [0.0, 0.2, 0.5] {
            let ser = forward_symbols(&Covector::from_slowness(1.0, b), &m, 1).unwrap();
            assert!(ser.orders[1].a_r.norm() < 1e-15);
        }
    }

    // Hand recursion for order -1: only the first normal derivative of each
    // amplitude enters, from the closed-form bracket.
    fn order_minus_one_oracle(m: &AcousticModel, b: f64, tau: f64) -> Complex64 {
        let h = m.geometry.mean_curvature();
        let deriv = |s: &AcousticSideJet, xi3: f64| {
            let (rho, c) = (s.rho.value(), s.cs.value());
            let dlr = 0.5 * s.rho.get(1) / rho;
            let dlc = s.cs.get(1) / c;
            -(dlr + dlc * (1.0 - tau * tau / (2.0 * c * c * xi3 * xi3)) + h / 2.0)
        };
        let cov = Covector::from_slowness(tau, b);
        let xi_i = vertical_wavenumber(&cov, m.minus.cs.value(), 1e-9).unwrap();
        let xi_t = vertical_wavenumber(&cov, m.plus.cs.value(), 1e-9).unwrap();
        let (mm, mp) = (m.minus.mu0(), m.plus.mu0());
        let r0 = (mm * xi_i - mp * xi_t) / (mm * xi_i + mp * xi_t);
        let di = deriv(&m.minus, xi_i);
        let dt = deriv(&m.plus, xi_t);
        let g = mp * dt * (1.0 + r0) - mm * di * (1.0 + r0);
        I * g / (mm * xi_i + mp * xi_t)
    }

    #[test]
    fn order_minus_one_matches_hand_recursion() {
        let m = model(
            side(&[1.0, 0.3, 0.2], &[1.0, -0.1, 0.5]),
            side(&[1.3, 0.2, -0.4], &[1.7, 0.25, 0.1]),
            InterfaceGeometry::new(0.5, -0.2),
        );
        for b in [0.0, 0.1, 0.3, 0.45] {
            for tau in [1.0, 2.5] {
                let ser = forward_symbols(&Covector::from_slowness(tau, b), &m, 2).unwrap();
                let o = order_minus_one_oracle(&m, b, tau);
                assert!((ser.orders[1].a_r - o).norm() < 1e-14, "{b} {tau}");
            }
        }
    }

    #[test]
    fn frozen_reference_values() {
        // Independent prototype values of the same recursion.
        let mut m = model(
            side(&[1.0, 0.3, 0.2], &[1.0, -0.1, 0.5]),
            side(&[1.3, 0.2, -0.4], &[1.7, 0.25, 0.1]),
            InterfaceGeometry::flat(),
        );
        let ser = forward_symbols(&Covector::from_slowness(1.0, 0.3), &m, 2).unwrap();
        assert!((ser.orders[0].a_r.re + 0.33172).abs() < 1e-5);
        assert!((ser.orders[1].a_r.im + 0.085016).abs() < 1e-6);
        assert!((ser.orders[2].a_r.re + 0.185261).abs() < 1e-6);
        m.geometry = InterfaceGeometry::new(0.5, -0.2);
        let ser = forward_symbols(&Covector::from_slowness(1.0, 0.3), &m, 2).unwrap();
        assert!((ser.orders[1].a_r.im + 0.181819).abs() < 1e-6);
        assert!((ser.orders[2].a_r.re + 0.245693).abs() < 1e-6);
    }

    #[test]
    fn sphere_shift_is_the_mean_curvature_term() {
        let mut m = model(
            side(&[1.0, 0.1], &[1.0, 0.2]),
            side(&[2.0, -0.3], &[1.4, 0.1]),
            InterfaceGeometry::flat(),
        );
        let cov = Covector::from_slowness(1.0, 0.2);
        let flat = forward_symbols(&cov, &m, 1).unwrap();
        let r = 2.0;
        m.geometry = InterfaceGeometry::new(1.0 / r, 1.0 / r);
        let curved = forward_symbols(&cov, &m, 1).unwrap();
        let h = 2.0 / r;
        let xi_i = vertical_wavenumber(&cov, 1.0, 1e-9).unwrap();
        let xi_t = vertical_wavenumber(&cov, 1.4, 1e-9).unwrap();
        let (mm, mp) = (m.minus.mu0(), m.plus.mu0());
        let d = mm * xi_i + mp * xi_t;
        let t0 = flat.orders[0].a_t.re;
        let expect = -I * h * (mp - mm) * t0 / (2.0 * d);
        assert!((curved.orders[1].a_r - flat.orders[1].a_r - expect).norm() < 1e-15);
        assert_eq!(curved.orders[0], flat.orders[0]);
    }

    #[test]
    fn depth_exceeded() {
        let m = model(side(&[1.0], &[1.0]), side(&[2.0], &[1.0]), InterfaceGeometry::flat());
        assert!(matches!(
            forward_symbols(&Covector::from_slowness(1.0, 0.0), &m, 1),
            Err(AcousticError::DepthExceeded { requested: 1, available: 0 })
        ));
    }

    fn jet_vec(base: f64, d: &[f64]) -> Jet {
        let mut v = vec![base];
        v.extend_from_slice(d);
        Jet::new(v)
    }

    proptest! {
        #[test]
        fn homogeneity(d in proptest::collection::vec(-0.5f64..0.5, 12), ratio in 0.4f64..2.5, b in 0.0f64..0.35, s in 0.2f64..5.0, k1 in -1.0f64..1.0) {
            let m = model(
                AcousticSideJet::new(jet_vec(1.0, &d[0..3]), jet_vec(1.0, &d[3..6])).unwrap(),
                AcousticSideJet::new(jet_vec(1.4, &d[6..9]), jet_vec(ratio, &d[9..12])).unwrap(),
                InterfaceGeometry::new(k1, 0.3),
            );
            let cov = Covector::new(1.1, [0.8 * b, 0.6 * b]).unwrap();
            let a = forward_symbols(&cov, &m, 3).unwrap();
            let c = forward_symbols(&cov.scaled(s), &m, 3).unwrap();
            for (x, y) in a.orders.iter().zip(&c.orders) {
                let f = s.powi(x.order);
                prop_assert!((y.a_r - x.a_r * f).norm() <= 1e-11 * (1.0 + (x.a_r * f).norm()));
                prop_assert!((y.a_t - x.a_t * f).norm() <= 1e-11 * (1.0 + (x.a_t * f).norm()));
            }
        }

        #[test]
        fn flux_is_conserved(rm in 0.5f64..3.0, cm in 0.5f64..3.0, rp in 0.5f64..3.0, cp in 0.5f64..3.0, frac in 0.0f64..0.95) {
            let m = model(side(&[rm], &[cm]), side(&[rp], &[cp]), InterfaceGeometry::flat());
            let b = frac / cm.max(cp);
            let cov = Covector::from_slowness(1.0, b);
            let xi_i = vertical_wavenumber(&cov, cm, 1e-9).unwrap();
            prop_assert!(flux_residual(&cov, &m).unwrap().abs() <= 1e-12 * rm * cm * cm * xi_i);
        }

        #[test]
        fn transmission_consistency(d in proptest::collection::vec(-0.5f64..0.5, 8), b in 0.0f64..0.4) {
            let m = model(
                AcousticSideJet::new(jet_vec(1.0, &d[0..2]), jet_vec(1.0, &d[2..4])).unwrap(),
                AcousticSideJet::new(jet_vec(2.0, &d[4..6]), jet_vec(1.5, &d[6..8])).unwrap(),
                InterfaceGeometry::flat(),
            );
            let ser = forward_symbols(&Covector::from_slowness(1.0, b), &m, 2).unwrap();
            for o in &ser.orders {
                let inc = if o.order == 0 { 1.0 } else { 0.0 };
                prop_assert!((o.a_t - o.a_r - inc).norm() < 1e-14);
            }
            prop_assert!(ser.orders[0].a_r.im == 0.0 && ser.orders[0].a_r.re.abs() < 1.0);
        }

        #[test]
        fn curvature_locality(k1 in -1.0f64..1.0, k2 in -1.0f64..1.0, b in 0.0f64..0.4) {
            let mut m = model(side(&[1.0, 0.2], &[1.0, -0.3]), side(&[1.8, 0.1], &[1.6, 0.4]), InterfaceGeometry::new(k1, k2));
            let cov = Covector::from_slowness(1.0, b);
            let a = forward_symbols(&cov, &m, 1).unwrap();
            m.geometry = InterfaceGeometry::new(k1 + k2, 0.0);
            let c = forward_symbols(&cov, &m, 1).unwrap();
            m.geometry = InterfaceGeometry::flat();
            let f = forward_symbols(&cov, &m, 1).unwrap();
            prop_assert_eq!(a.orders[0], f.orders[0]);
            prop_assert!((a.orders[1].a_r - c.orders[1].a_r).norm() < 1e-15);
        }
    }
}
