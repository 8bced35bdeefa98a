//! Isotropic elastic reflection and transmission matrix symbols.
//!
//! Work happens in the frame where xi' = (k, 0). A displacement
//! `v(s) exp(i x'.xi')` satisfies
//!
//! ```text
//! L v = (A v' + B v)' + C v' + D v + H (A v' + B v) = 0,
//! A = diag(mu, mu, lambda + 2 mu),
//! B_13 = i mu k, B_31 = i lambda k,  C = B^T,
//! D = diag(rho tau^2 - (lambda + 2 mu) k^2, rho tau^2 - mu k^2, rho tau^2 - mu k^2).
//! ```
//!
//! Each wave is `exp(i psi) sum_J a_J` with a_J = alpha_J n + h_J, n the
//! kernel of the principal symbol P and h_J its particular part from
//! `P a_{J-1} = -Q1 a_J - Q0 a_{J+1}`. Solvability against n gives a scalar
//! transport equation for alpha_J. The symbols are the mode coordinates
//! (P, SV, SH) of the reflected/transmitted displacement at the interface,
//! which do not depend on the frame.

use nalgebra::{Matrix2, Matrix3, Matrix6, SMatrix, Vector2, Vector3, Vector6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::mean_curvature_jet;
use crate::jetcalc::{binom, CJet, Jet};
use crate::medium::{
    derive_lame_jets, vertical_wavenumber, Covector, ElasticModel, ElasticSideJet, MediumError,
    DEFAULT_GLANCING_TOL,
};

pub type CMatrix3 = Matrix3<Complex64>;
pub type CVector3 = Vector3<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElasticError {
    #[error("requested depth {requested} exceeds model depth {available}")]
    DepthExceeded { requested: usize, available: usize },
    #[error("singular interface system (condition number {condition:e})")]
    SingularInterfaceSystem { condition: f64 },
    #[error("recursion matrices need |J| >= 1")]
    InvalidOrder,
    #[error(transparent)]
    Medium(#[from] MediumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Incident,
    Reflected,
    Transmitted,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Reflected => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationBasis {
    /// Unit P polarization.
    pub n: Vector3<f64>,
    /// Unit SV polarization, SH x (xi_S / |xi_S|).
    pub n1: Vector3<f64>,
    /// Unit SH polarization (-xi2, xi1, 0) / |xi'|.
    pub n2: Vector3<f64>,
    pub xi_p: Vector3<f64>,
    pub xi_s: Vector3<f64>,
    pub m: CVector3,
    pub m1: CVector3,
    pub m2: CVector3,
}

/// Unit tangential direction of xi'; (1, 0) when xi' = 0.
fn tangential_direction(cov: &Covector) -> [f64; 2] {
    let k = cov.xi_norm();
    if k > 0.0 {
        [cov.xi[0] / k, cov.xi[1] / k]
    } else {
        [1.0, 0.0]
    }
}

pub fn polarization_basis(
    cov: &Covector,
    side: &ElasticSideJet,
    branch: Branch,
) -> Result<PolarizationBasis, ElasticError> {
    let tol = DEFAULT_GLANCING_TOL;
    let sg = branch.sign();
    let x3p = sg * vertical_wavenumber(cov, side.cp.value(), tol)?;
    let x3s = sg * vertical_wavenumber(cov, side.cs.value(), tol)?;
    let [e1, e2] = tangential_direction(cov);
    let xi_p = Vector3::new(cov.xi[0], cov.xi[1], x3p);
    let xi_s = Vector3::new(cov.xi[0], cov.xi[1], x3s);
    let n = xi_p.normalize();
    let n2 = Vector3::new(-e2, e1, 0.0);
    let n1 = n2.cross(&xi_s.normalize());
    let k2 = cov.xi_norm().powi(2);
    let c = |v: Vector3<f64>| v.map(|x| Complex64::new(x, 0.0));
    let m1 = Vector3::new(-cov.xi[1], cov.xi[0], 0.0).map(|x| -I * x);
    let m2 = c(Vector3::new(-x3p * cov.xi[0], -x3p * cov.xi[1], k2));
    let m = xi_s.map(|x| -I * x);
    Ok(PolarizationBasis { n, n1, n2, xi_p, xi_s, m, m1, m2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticOrder {
    pub order: i32,
    pub r: CMatrix3,
    pub t: CMatrix3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticSymbolSeries {
    pub covector: Covector,
    pub orders: Vec<ElasticOrder>,
}

/// Closed-form SH reflection coefficient.
pub fn sh_reflection(cov: &Covector, minus: &ElasticSideJet, plus: &ElasticSideJet) -> Result<f64, ElasticError> {
    let tol = DEFAULT_GLANCING_TOL;
    let xi_i = vertical_wavenumber(cov, minus.cs.value(), tol)?;
    let xi_t = vertical_wavenumber(cov, plus.cs.value(), tol)?;
    let mm = minus.rho.value() * minus.cs.value().powi(2);
    let mp = plus.rho.value() * plus.cs.value().powi(2);
    Ok((mm * xi_i - mp * xi_t) / (mm * xi_i + mp * xi_t))
}

/// mu^- xi_I (1 - r33^2) - mu^+ xi_T t33^2 from the full 6x6 solve.
pub fn sh_flux_residual(cov: &Covector, model: &ElasticModel) -> Result<f64, ElasticError> {
    let tol = DEFAULT_GLANCING_TOL;
    let (r, t) = principal_rt_matrices(cov, model)?;
    let xi_i = vertical_wavenumber(cov, model.minus.cs.value(), tol)?;
    let xi_t = vertical_wavenumber(cov, model.plus.cs.value(), tol)?;
    let mm = model.minus.rho.value() * model.minus.cs.value().powi(2);
    let mp = model.plus.rho.value() * model.plus.cs.value().powi(2);
    let (r33, t33) = (r[(2, 2)], t[(2, 2)]);
    Ok(mm * xi_i * (1.0 - r33 * r33).re - mp * xi_t * (t33 * t33).re)
}

pub fn principal_rt_matrices(cov: &Covector, model: &ElasticModel) -> Result<(CMatrix3, CMatrix3), ElasticError> {
    let m0 = ElasticModel {
        minus: model.minus.truncate(0),
        plus: model.plus.truncate(0),
        geometry: model.geometry,
        depth: 0,
    };
    let s = forward_symbols_elastic(cov, &m0, 0)?;
    Ok((s.orders[0].r, s.orders[0].t))
}

pub fn forward_symbols_elastic(
    cov: &Covector,
    model: &ElasticModel,
    depth: usize,
) -> Result<ElasticSymbolSeries, ElasticError> {
    if depth > model.depth {
        return Err(ElasticError::DepthExceeded { requested: depth, available: model.depth });
    }
    let hjet = mean_curvature_jet(&model.geometry, depth);
    let orders = forward_orders_elastic(cov, &model.minus, &model.plus, &hjet, depth, DEFAULT_GLANCING_TOL)?;
    Ok(ElasticSymbolSeries { covector: *cov, orders })
}

type V3 = [CJet; 3];

fn vzero(d: usize) -> V3 {
    [CJet::zeros(d), CJet::zeros(d), CJet::zeros(d)]
}

fn vadd(a: &V3, b: &V3) -> V3 {
    [&a[0] + &b[0], &a[1] + &b[1], &a[2] + &b[2]]
}

fn vscale(a: &V3, s: &CJet) -> V3 {
    [&a[0] * s, &a[1] * s, &a[2] * s]
}

fn vderiv(a: &V3) -> V3 {
    [a[0].deriv(), a[1].deriv(), a[2].deriv()]
}

fn vdot(a: &V3, b: &V3) -> CJet {
    &(&(&a[0] * &b[0]) + &(&a[1] * &b[1])) + &(&a[2] * &b[2])
}

fn vat0(a: &V3) -> CVector3 {
    CVector3::new(a[0].value(), a[1].value(), a[2].value())
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Mode {
    P,
    Sv,
    Sh,
}

const MODES: [Mode; 3] = [Mode::P, Mode::Sv, Mode::Sh];

/// Material coefficient jets for one side, complexified.
struct SideCoefs {
    mu: CJet,
    lam: CJet,
    pmod: CJet,
    h: CJet,
    k: f64,
}

struct Wave {
    mode: Mode,
    psi: CJet,
    n: V3,
    khat: V3,
    pinv: CJet,
    ratio: CJet,
    g11_inv: CJet,
    c: std::rc::Rc<SideCoefs>,
}

impl Wave {
    fn new(
        mode: Mode,
        branch: f64,
        side: &ElasticSideJet,
        coefs: std::rc::Rc<SideCoefs>,
        cov: &Covector,
        depth: usize,
    ) -> Result<Self, MediumError> {
        let tau = cov.tau.abs();
        let k = coefs.k;
        let speed = match mode {
            Mode::P => side.cp.truncate(depth),
            _ => side.cs.truncate(depth),
        };
        let mut rad = (&speed * &speed).inv().scale(tau * tau);
        rad.coeffs_mut()[0] -= k * k;
        let psi_r = rad.sqrt()?.scale(branch);
        let cn = speed.scale(1.0 / tau); // 1/|K|
        let kx = Jet::constant(k, depth);
        let khat_r = [&kx * &cn, Jet::zeros(depth), &psi_r * &cn];
        let to_c = |j: &Jet| j.to_complex();
        let khat = [to_c(&khat_r[0]), to_c(&khat_r[1]), to_c(&khat_r[2])];
        let n = match mode {
            Mode::P => khat.clone(),
            Mode::Sv => [to_c(&(&psi_r * &cn)), CJet::zeros(depth), to_c(&(&kx * &cn).scale(-1.0))],
            Mode::Sh => [CJet::zeros(depth), CJet::constant(ONE, depth), CJet::zeros(depth)],
        };
        let rho = side.rho.truncate(depth);
        let tau2 = Jet::constant(tau * tau, depth);
        let rt2 = &rho * &tau2;
        // eigenvalue of P on the complement of the kernel
        let d = match mode {
            Mode::P => &rt2 - &(&coefs_mu_real(side, depth) * &(&(&speed * &speed).inv() * &tau2)),
            _ => &rt2 - &(&coefs_pmod_real(side, depth) * &(&(&speed * &speed).inv() * &tau2)),
        };
        let psi = psi_r.to_complex();
        let mut w = Wave {
            mode,
            psi,
            n,
            khat,
            pinv: d.inv().to_complex(),
            ratio: CJet::zeros(depth),
            g11_inv: CJet::zeros(depth),
            c: coefs,
        };
        let g11 = vdot(&w.n, &w.g1(&w.n));
        let c0 = &vdot(&w.n, &w.g1(&vderiv(&w.n))) + &vdot(&w.n, &w.g0(&w.n));
        w.g11_inv = g11.try_inv().map_err(MediumError::from)?;
        w.ratio = &c0 * &w.g11_inv;
        Ok(w)
    }

    fn a(&self, w: &V3) -> V3 {
        [&self.c.mu * &w[0], &self.c.mu * &w[1], &self.c.pmod * &w[2]]
    }

    fn b_with(&self, mu: &CJet, lam: &CJet, w: &V3) -> V3 {
        let ik = I * self.c.k;
        [(mu * &w[2]).scale(ik), CJet::zeros(w[0].depth()), (lam * &w[0]).scale(ik)]
    }

    fn b(&self, w: &V3) -> V3 {
        self.b_with(&self.c.mu, &self.c.lam, w)
    }

    fn cmat(&self, w: &V3) -> V3 {
        self.b_with(&self.c.lam, &self.c.mu, w)
    }

    /// G1 = 2 i psi' A + B + C
    fn g1(&self, w: &V3) -> V3 {
        let aw = vscale(&self.a(w), &self.psi.scale(I * 2.0));
        vadd(&vadd(&aw, &self.b(w)), &self.cmat(w))
    }

    /// G0 = i (psi' A)' + B' + H (i psi' A + B)
    fn g0(&self, w: &V3) -> V3 {
        let pm = (&self.psi * &self.c.mu).deriv().scale(I);
        let pp = (&self.psi * &self.c.pmod).deriv().scale(I);
        let t1 = [&pm * &w[0], &pm * &w[1], &pp * &w[2]];
        let t2 = self.b_with(&self.c.mu.deriv(), &self.c.lam.deriv(), w);
        let inner = vadd(&vscale(&self.a(w), &self.psi.scale(I)), &self.b(w));
        vadd(&vadd(&t1, &t2), &vscale(&inner, &self.c.h))
    }

    fn q1(&self, w: &V3) -> V3 {
        vadd(&self.g1(&vderiv(w)), &self.g0(w))
    }

    /// Q0 = A d^2 + (A' + H A) d
    fn q0(&self, w: &V3) -> V3 {
        let wd = vderiv(w);
        let t1 = self.a(&vderiv(&wd));
        let ad = [&self.c.mu.deriv() * &wd[0], &self.c.mu.deriv() * &wd[1], &self.c.pmod.deriv() * &wd[2]];
        vadd(&vadd(&t1, &ad), &vscale(&self.a(&wd), &self.c.h))
    }

    /// Particular solution of P h = f on the range of P.
    fn pplus(&self, f: &V3) -> V3 {
        let proj = vdot(&self.khat, f);
        let along = vscale(&self.khat, &proj);
        let v = match self.mode {
            Mode::P => [&f[0] - &along[0], &f[1] - &along[1], &f[2] - &along[2]],
            _ => along,
        };
        vscale(&v, &self.pinv)
    }

    /// Traction operator i psi' A + B at s = 0.
    fn traction0(&self, w: &CVector3) -> CVector3 {
        let ik = I * self.c.k;
        let ip = I * self.psi.value();
        let (mu, lam, pm) = (self.c.mu.value(), self.c.lam.value(), self.c.pmod.value());
        CVector3::new(ip * mu * w[0] + ik * mu * w[2], ip * mu * w[1], ip * pm * w[2] + ik * lam * w[0])
    }

    fn a0(&self, w: &CVector3) -> CVector3 {
        CVector3::new(self.c.mu.value() * w[0], self.c.mu.value() * w[1], self.c.pmod.value() * w[2])
    }

    fn n0(&self) -> CVector3 {
        vat0(&self.n)
    }
}

fn coefs_mu_real(side: &ElasticSideJet, depth: usize) -> Jet {
    let cs = side.cs.truncate(depth);
    &side.rho.truncate(depth) * &(&cs * &cs)
}

fn coefs_pmod_real(side: &ElasticSideJet, depth: usize) -> Jet {
    let cp = side.cp.truncate(depth);
    &side.rho.truncate(depth) * &(&cp * &cp)
}

fn side_coefs(side: &ElasticSideJet, hjet: &Jet, k: f64, depth: usize) -> Result<SideCoefs, MediumError> {
    let (lam, mu) = derive_lame_jets(&side.truncate(depth))?;
    let pmod = &lam + &mu.scale(2.0);
    Ok(SideCoefs {
        mu: mu.to_complex(),
        lam: lam.to_complex(),
        pmod: pmod.to_complex(),
        h: hjet.truncate(depth).to_complex(),
        k,
    })
}

/// Amplitude state of one wave: the current a_J and a_{J+1}.
struct WaveState {
    alpha0: Complex64,
    h: V3,
    a: V3,
    upper: V3,
}

impl WaveState {
    fn new(depth: usize) -> Self {
        WaveState { alpha0: ZERO, h: vzero(depth), a: vzero(depth), upper: vzero(depth) }
    }

    /// Particular part of a_J from the two amplitudes above it.
    fn particular(&self, w: &Wave, a1: &V3, a2: &V3) -> V3 {
        let f = vadd(&w.q1(a1), &w.q0(a2));
        let neg = [f[0].scale(-ONE), f[1].scale(-ONE), f[2].scale(-ONE)];
        w.pplus(&neg)
    }

    fn value0(&self, w: &Wave) -> CVector3 {
        w.n0() * self.alpha0 + vat0(&self.h)
    }

    /// Integrates alpha_J from alpha0 and forms a_J; `a` still holds a_{J+1}.
    fn integrate(&mut self, w: &Wave) {
        let d = w.psi.depth();
        let src = &(&vdot(&w.n, &vadd(&w.g1(&vderiv(&self.h)), &w.g0(&self.h))) + &vdot(&w.n, &w.q0(&self.a)))
            * &w.g11_inv;
        let mut al = CJet::zeros(d);
        al.coeffs_mut()[0] = self.alpha0;
        for k in 0..d {
            let mut conv = ZERO;
            for j in 0..=k {
                conv += binom(k, j) * w.ratio.get(j) * al.get(k - j);
            }
            al.coeffs_mut()[k + 1] = -conv - src.get(k);
        }
        let a = vadd(&vscale(&w.n, &al), &self.h);
        self.upper = std::mem::replace(&mut self.a, a);
    }
}

/// Core recursion with an explicit mean-curvature jet; returns R_J, T_J for
/// J = 0, ..., -depth.
pub fn forward_orders_elastic(
    cov: &Covector,
    minus: &ElasticSideJet,
    plus: &ElasticSideJet,
    hjet: &Jet,
    depth: usize,
    tol: f64,
) -> Result<Vec<ElasticOrder>, ElasticError> {
    let available = minus.depth().min(plus.depth()).min(hjet.depth());
    if depth > available {
        return Err(ElasticError::DepthExceeded { requested: depth, available });
    }
    for side in [minus, plus] {
        side.validate()?;
        vertical_wavenumber(cov, side.cp.value(), tol)?;
        vertical_wavenumber(cov, side.cs.value(), tol)?;
    }
    let k = cov.xi_norm();
    let cm = std::rc::Rc::new(side_coefs(minus, hjet, k, depth)?);
    let cp = std::rc::Rc::new(side_coefs(plus, hjet, k, depth)?);
    let mk = |mode, br, side: &ElasticSideJet, c: &std::rc::Rc<SideCoefs>| {
        Wave::new(mode, br, side, c.clone(), cov, depth)
    };
    let mut wi = Vec::new();
    let mut wr = Vec::new();
    let mut wt = Vec::new();
    for m in MODES {
        wi.push(mk(m, 1.0, minus, &cm)?);
        wr.push(mk(m, -1.0, minus, &cm)?);
        wt.push(mk(m, 1.0, plus, &cp)?);
    }

    let cols = |ws: &[Wave]| CMatrix3::from_columns(&[ws[0].n0(), ws[1].n0(), ws[2].n0()]);
    let tcols = |ws: &[Wave]| {
        CMatrix3::from_columns(&[
            ws[0].traction0(&ws[0].n0()),
            ws[1].traction0(&ws[1].n0()),
            ws[2].traction0(&ws[2].n0()),
        ])
    };
    let (s_i, s_r, s_t) = (cols(&wi), cols(&wr), cols(&wt));
    let (t_r, t_t) = (tcols(&wr), tcols(&wt));
    let mut big = Matrix6::<Complex64>::zeros();
    big.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-s_r));
    big.fixed_view_mut::<3, 3>(0, 3).copy_from(&s_t);
    big.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-t_r));
    big.fixed_view_mut::<3, 3>(3, 3).copy_from(&t_t);
    let lu = big.lu();
    if !lu.is_invertible() {
        return Err(ElasticError::SingularInterfaceSystem { condition: condition6(&big) });
    }
    let s_i_inv = s_i.try_inverse().ok_or(ElasticError::SingularInterfaceSystem { condition: f64::INFINITY })?;
    let s_r_inv = s_r.try_inverse().ok_or(ElasticError::SingularInterfaceSystem { condition: f64::INFINITY })?;
    let s_t_inv = s_t.try_inverse().ok_or(ElasticError::SingularInterfaceSystem { condition: f64::INFINITY })?;

    let mut rs = vec![CMatrix3::zeros(); depth + 1];
    let mut ts = vec![CMatrix3::zeros(); depth + 1];
    for col in 0..3 {
        let mut si: Vec<WaveState> = (0..3).map(|_| WaveState::new(depth)).collect();
        let mut sr: Vec<WaveState> = (0..3).map(|_| WaveState::new(depth)).collect();
        let mut st: Vec<WaveState> = (0..3).map(|_| WaveState::new(depth)).collect();
        for j in 0..=depth {
            if j > 0 {
                for (ws, ss) in [(&wi, &mut si), (&wr, &mut sr), (&wt, &mut st)] {
                    for (w, s) in ws.iter().zip(ss.iter_mut()) {
                        s.h = s.particular(w, &s.a, &s.upper);
                    }
                }
            }
            // incident amplitudes at the interface
            if j == 0 {
                for (m, s) in si.iter_mut().enumerate() {
                    s.alpha0 = if m == col { ONE } else { ZERO };
                }
            } else {
                let hsum: CVector3 = si.iter().map(|s| vat0(&s.h)).sum();
                let al = -(s_i_inv * hsum);
                for (m, s) in si.iter_mut().enumerate() {
                    s.alpha0 = al[m];
                }
            }
            let sum_u = |ws: &[Wave], ss: &[WaveState]| -> CVector3 {
                ws.iter().zip(ss).map(|(w, s)| s.value0(w)).sum()
            };
            let sum_h = |ss: &[WaveState]| -> CVector3 { ss.iter().map(|s| vat0(&s.h)).sum() };
            // traction contributions that do not involve the unknown alphas
            let known_t = |ws: &[Wave], ss: &[WaveState], with_alpha: bool| -> CVector3 {
                ws.iter()
                    .zip(ss)
                    .map(|(w, s)| {
                        let v = if with_alpha { s.value0(w) } else { vat0(&s.h) };
                        let ad = if j > 0 { w.a0(&vat0(&vderiv(&s.a))) } else { CVector3::zeros() };
                        w.traction0(&v) + ad
                    })
                    .sum()
            };
            let u_i = sum_u(&wi, &si);
            let t_i = known_t(&wi, &si, true);
            let rhs_u = u_i - sum_h(&st) + sum_h(&sr);
            let rhs_t = t_i + known_t(&wr, &sr, false) - known_t(&wt, &st, false);
            let mut rhs = Vector6::<Complex64>::zeros();
            rhs.fixed_rows_mut::<3>(0).copy_from(&rhs_u);
            rhs.fixed_rows_mut::<3>(3).copy_from(&rhs_t);
            let x = lu.solve(&rhs).expect("invertibility checked");
            for m in 0..3 {
                sr[m].alpha0 = x[m];
                st[m].alpha0 = x[3 + m];
            }
            let u_r = sum_u(&wr, &sr);
            let u_t = sum_u(&wt, &st);
            rs[j].set_column(col, &(s_r_inv * u_r));
            ts[j].set_column(col, &(s_t_inv * u_t));
            if j < depth {
                for (ws, ss) in [(&wi, &mut si), (&wr, &mut sr), (&wt, &mut st)] {
                    for (w, s) in ws.iter().zip(ss.iter_mut()) {
                        s.integrate(w);
                    }
                }
            }
        }
    }
    Ok((0..=depth).map(|j| ElasticOrder { order: -(j as i32), r: rs[j], t: ts[j] }).collect())
}

fn condition6(m: &Matrix6<Complex64>) -> f64 {
    let sv = m.svd(false, false).singular_values;
    let (mx, mn) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

/// Coefficient matrices of the P-wave amplitude recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionMatrices {
    pub a_p: Matrix2<Complex64>,
    pub b_p: Matrix2<Complex64>,
    pub c_p: Matrix2<Complex64>,
    /// Source coefficients for unit amplitude ((gamma_2)_{J+1}, alpha_{J+1}) = (0, 1).
    pub d_p: Vector2<Complex64>,
    /// Map from d(log c_P, log c_S, log sqrt rho) to ((gamma_2)_{-1}, d alpha_0), per unit alpha_0.
    pub m_gamma_alpha: SMatrix<Complex64, 2, 3>,
    /// The 4x3 matrix stacking A^-1 B M_gamma_alpha + [A^-1 D, 0, 0] over M_gamma_alpha.
    pub m_stack: SMatrix<Complex64, 4, 3>,
    /// (I 0) M_J M: top-order coefficients of ((gamma_2)_{J-1}, d alpha_J).
    pub coefficient: SMatrix<Complex64, 2, 3>,
}

pub fn recursion_matrices(
    cov: &Covector,
    side: &ElasticSideJet,
    branch: Branch,
    order: i32,
) -> Result<RecursionMatrices, ElasticError> {
    if order > -1 {
        return Err(ElasticError::InvalidOrder);
    }
    let tol = DEFAULT_GLANCING_TOL;
    let tau = cov.tau.abs();
    let x3 = branch.sign() * vertical_wavenumber(cov, side.cp.value(), tol)?;
    vertical_wavenumber(cov, side.cs.value(), tol)?;
    let (cp, cs) = (side.cp.value(), side.cs.value());
    let clm2 = cp * cp - cs * cs;
    let k2 = cov.xi_norm().powi(2);
    let r = |x: f64| Complex64::new(x, 0.0);

    let a_p = Matrix2::new(r(1.0), r(-(cp / tau).powi(3)), r(0.0), r(-2.0 * cp * cp * x3));
    let c_p = Matrix2::new(
        r((cp / tau).powi(2) * (cs * cs / clm2 + cp * cp * k2 / (tau * tau))),
        r(0.0),
        r(-clm2 * cp / tau * k2 * x3),
        r(0.0),
    );
    let b_p = Matrix2::new(
        I * (2.0 * cs * cs * cp * cp * x3 / (clm2 * tau * tau)),
        r(cp.powi(5) * x3 / tau.powi(5)),
        r(-clm2 * k2 * tau / cp),
        r(clm2 * cp * x3 / tau + cs * cs),
    );
    let (g, a) = (0.0, 1.0);
    let d_p = Vector2::new(
        r(-g * cp * cp * cs * cs / (clm2 * tau * tau)
            - a * cp.powi(3) * (clm2 * cp * cp * k2 / (tau * tau) + cs * cs) / (clm2 * tau.powi(3) * x3)),
        r(g * cs * cs * tau * k2 / (cp * x3) - a * clm2 * cp * cp * k2 / (tau * tau)),
    );
    let m_gamma_alpha = SMatrix::<Complex64, 2, 3>::new(
        r(-cp * cp / (2.0 * tau * tau * x3 * x3)),
        I * (4.0 * cp.powi(3) * cs * cs / (tau.powi(3) * clm2)),
        I * ((1.0 - 2.0 * cs * cs / clm2) * cp.powi(3) / tau.powi(3)),
        r(-0.5 * (1.0 - k2 / (x3 * x3))),
        r(0.0),
        r(-1.0),
    );
    let a_inv = a_p.try_inverse().ok_or(ElasticError::SingularInterfaceSystem { condition: f64::INFINITY })?;
    let ab = a_inv * b_p;
    let ac = a_inv * c_p;
    let ad = a_inv * d_p;
    let mut top = ab * m_gamma_alpha;
    top[(0, 0)] += ad[0];
    top[(1, 0)] += ad[1];
    let mut m_stack = SMatrix::<Complex64, 4, 3>::zeros();
    m_stack.fixed_view_mut::<2, 3>(0, 0).copy_from(&top);
    m_stack.fixed_view_mut::<2, 3>(2, 0).copy_from(&m_gamma_alpha);
    let mut step = SMatrix::<Complex64, 4, 4>::zeros();
    step.fixed_view_mut::<2, 2>(0, 0).copy_from(&ab);
    step.fixed_view_mut::<2, 2>(0, 2).copy_from(&ac);
    step.fixed_view_mut::<2, 2>(2, 0).copy_from(&Matrix2::identity());
    let mut mj = SMatrix::<Complex64, 4, 4>::identity();
    for _ in 1..order.unsigned_abs() {
        mj = step * mj;
    }
    let full = mj * m_stack;
    let coefficient = full.fixed_view::<2, 3>(0, 0).into_owned();
    Ok(RecursionMatrices { a_p, b_p, c_p, d_p, m_gamma_alpha, m_stack, coefficient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::forward_symbols;
    use crate::medium::InterfaceGeometry;
    use proptest::prelude::*;

    fn jv(base: f64, d: &[f64]) -> Jet {
        let mut v = vec![base];
        v.extend_from_slice(d);
        Jet::new(v)
    }

    fn side(rho: &[f64], cs: &[f64], cp: &[f64]) -> ElasticSideJet {
        ElasticSideJet::new(Jet::new(rho.to_vec()), Jet::new(cs.to_vec()), Jet::new(cp.to_vec())).unwrap()
    }

    fn model(m: ElasticSideJet, p: ElasticSideJet) -> ElasticModel {
        ElasticModel::new_elastic(m, p, InterfaceGeometry::flat()).unwrap()
    }

    #[test]
    fn identical_media_are_transparent() {
        let s = side(&[1.2, 0.3, -0.1], &[1.0, 0.2, 0.1], &[2.0, -0.3, 0.2]);
        let m = model(s.clone(), s);
        let ser = forward_symbols_elastic(&Covector::new(1.0, [0.2, 0.1]).unwrap(), &m, 2).unwrap();
        for o in &ser.orders {
            assert!(o.r.norm() < 1e-13, "{}", o.r);
            let expect = if o.order == 0 { CMatrix3::identity() } else { CMatrix3::zeros() };
            assert!((o.t - expect).norm() < 1e-13, "{}", o.t);
        }
    }

    #[test]
    fn r33_matches_closed_form() {
        let m = model(side(&[1.0], &[1.0], &[2.0]), side(&[1.5], &[1.2], &[2.5]));
        for b in [0.0, 0.1, 0.3] {
            let cov = Covector::from_slowness(1.0, b);
            let (r, _) = principal_rt_matrices(&cov, &m).unwrap();
            let cf = sh_reflection(&cov, &m.minus, &m.plus).unwrap();
            assert!((r[(2, 2)] - cf).norm() < 1e-12);
        }
        let m = model(side(&[1.0], &[1.0], &[2.0]), side(&[1.0], &[2.0], &[4.0]));
        let cf = sh_reflection(&Covector::new(1.0, [0.0, 0.0]).unwrap(), &m.minus, &m.plus).unwrap();
        assert!((cf + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn basis_examples() {
        let s = side(&[1.0], &[1.0], &[2.0]);
        let cov = Covector::new(1.0, [0.3, 0.0]).unwrap();
        let b = polarization_basis(&cov, &s, Branch::Incident).unwrap();
        let x3p = (0.25f64 - 0.09).sqrt();
        assert!((b.n - Vector3::new(0.3, 0.0, x3p).normalize()).norm() < 1e-15);
        assert!((b.m1 - Vector3::new(ZERO, -I * 0.3, ZERO)).norm() < 1e-15);
        let xp = b.xi_p.map(|x| Complex64::new(x, 0.0));
        assert!(b.m2.dot(&xp).norm() < 1e-15);
        let cov0 = Covector::new(1.0, [0.0, 0.0]).unwrap();
        let b0 = polarization_basis(&cov0, &s, Branch::Reflected).unwrap();
        assert_eq!(b0.n2, Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn p_transport_matches_gamma_alpha_row() {
        // Incident P wave in a graded half-space: alpha_0' / alpha_0 from the
        // engine against the closed row -(1/2)(1 - k^2/xi3^2) dlog cP - dlog sqrt(rho).
        let s = side(&[1.3, 0.4], &[1.1, -0.2], &[2.3, 0.5]);
        for b in [0.0, 0.15, 0.3] {
            let cov = Covector::from_slowness(1.7, b);
            let k = cov.xi_norm();
            let hj = Jet::zeros(1);
            let coefs = std::rc::Rc::new(side_coefs(&s, &hj, k, 1).unwrap());
            let w = Wave::new(Mode::P, 1.0, &s, coefs, &cov, 1).unwrap();
            let x3 = vertical_wavenumber(&cov, 2.3, 1e-9).unwrap();
            let expect = -0.5 * (1.0 - k * k / (x3 * x3)) * 0.5 / 2.3 - 0.5 * 0.4 / 1.3;
            assert!((-w.ratio.value() - expect).norm() < 1e-14, "{b}");
            let rm = recursion_matrices(&cov, &s, Branch::Incident, -1).unwrap();
            let row = rm.m_gamma_alpha.row(1);
            let via = row[0] * (0.5 / 2.3) + row[1] * (-0.2 / 1.1) + row[2] * (0.5 * 0.4 / 1.3);
            assert!((via - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn recursion_matrix_examples() {
        let s = side(&[1.0], &[1.0], &[2.0]);
        let cov = Covector::from_slowness(1.0, 0.2);
        let rm = recursion_matrices(&cov, &s, Branch::Incident, -1).unwrap();
        let x3 = vertical_wavenumber(&cov, 2.0, 1e-9).unwrap();
        assert!((rm.a_p[(1, 1)] - Complex64::new(-2.0 * 4.0 * x3, 0.0)).norm() < 1e-15);
        assert!(rm.a_p.determinant().norm() > 0.0);
        // |J| = 1: M_J is the identity, so the coefficient is the top block of M
        assert_eq!(rm.coefficient, rm.m_stack.fixed_view::<2, 3>(0, 0).into_owned());
        assert_eq!(rm.m_stack[(3, 2)], Complex64::new(-1.0, 0.0));
        assert!(matches!(recursion_matrices(&cov, &s, Branch::Incident, 0), Err(ElasticError::InvalidOrder)));
        let rm2 = recursion_matrices(&cov, &s, Branch::Incident, -2).unwrap();
        assert!(rm2.coefficient != rm.coefficient);
    }

    #[test]
    fn constant_media_first_order_from_order_zero_only() {
        let m = model(side(&[1.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]), side(&[1.5, 0.0], &[1.2, 0.0], &[2.5, 0.0]));
        let ser = forward_symbols_elastic(&Covector::from_slowness(1.0, 0.2), &m, 1).unwrap();
        assert!(ser.orders[1].r.norm() < 1e-14);
        let m2 = model(side(&[1.0, 0.3], &[1.0, 0.1], &[2.0, -0.2]), side(&[1.5, 0.2], &[1.2, 0.3], &[2.5, 0.1]));
        let ser2 = forward_symbols_elastic(&Covector::from_slowness(1.0, 0.2), &m2, 1).unwrap();
        assert!(ser2.orders[1].r.norm() > 1e-3);
        assert_eq!(ser.orders[0], ser2.orders[0]);
    }

    proptest! {
        #[test]
        fn sh_channel_is_the_acoustic_problem(d in proptest::collection::vec(-0.4f64..0.4, 12), b in 0.0f64..0.3, k1 in -0.5f64..0.5) {
            let mut m = model(
                ElasticSideJet::new(jv(1.0, &d[0..2]), jv(1.0, &d[2..4]), jv(2.0, &d[4..6])).unwrap(),
                ElasticSideJet::new(jv(1.6, &d[6..8]), jv(1.3, &d[8..10]), jv(2.4, &d[10..12])).unwrap(),
            );
            m.geometry = InterfaceGeometry::new(k1, 0.2);
            let cov = Covector::new(1.2, [b * 0.6, b * 0.8]).unwrap();
            let e = forward_symbols_elastic(&cov, &m, 2).unwrap();
            let a = forward_symbols(&cov, &m.shear_model(), 2).unwrap();
            for (eo, ao) in e.orders.iter().zip(&a.orders) {
                prop_assert!((eo.r[(2, 2)] - ao.a_r).norm() < 1e-12, "{} {}", eo.r[(2, 2)], ao.a_r);
                prop_assert!((eo.t[(2, 2)] - ao.a_t).norm() < 1e-12);
                for q in 0..2 {
                    prop_assert!(eo.r[(q, 2)].norm() < 1e-13 && eo.r[(2, q)].norm() < 1e-13);
                    prop_assert!(eo.t[(q, 2)].norm() < 1e-13 && eo.t[(2, q)].norm() < 1e-13);
                }
            }
        }

        #[test]
        fn basis_is_orthonormal(rho in 0.5f64..2.0, cs in 0.5f64..2.0, ratio in 1.3f64..3.0, b in 0.0f64..0.9, th in 0.0f64..6.3, refl in proptest::bool::ANY) {
            let s = side(&[rho], &[cs], &[cs * ratio]);
            let kb = b / (cs * ratio);
            let cov = Covector::new(0.8, [0.8 * kb * th.cos(), 0.8 * kb * th.sin()]).unwrap();
            let br = if refl { Branch::Reflected } else { Branch::Incident };
            let p = polarization_basis(&cov, &s, br).unwrap();
            let ks = p.xi_s.normalize();
            for (u, v) in [(p.n1, p.n2), (p.n1, ks), (p.n2, ks)] {
                prop_assert!(u.dot(&v).abs() < 1e-12);
            }
            for u in [p.n, p.n1, p.n2] { prop_assert!((u.norm() - 1.0).abs() < 1e-12); }
            let c = |v: Vector3<f64>| v.map(|x| Complex64::new(x, 0.0));
            prop_assert!(p.m1.dot(&c(Vector3::new(cov.xi[0], cov.xi[1], 0.0))).norm() < 1e-12);
            prop_assert!(p.m1[2].norm() == 0.0);
            prop_assert!(p.m2.dot(&c(p.xi_p)).norm() < 1e-12);
            prop_assert!((p.m - c(p.xi_s) * (-I)).norm() < 1e-15);
        }

        #[test]
        fn sh_flux_and_closed_form(rm in 0.5f64..2.0, csm in 0.5f64..2.0, rp in 0.5f64..2.0, csp in 0.5f64..2.0, frac in 0.0f64..0.9) {
            let m = model(side(&[rm], &[csm], &[2.0 * csm]), side(&[rp], &[csp], &[1.9 * csp]));
            let b = frac / (2.0 * csm).max(1.9 * csp);
            let cov = Covector::from_slowness(1.0, b);
            let (r, _) = principal_rt_matrices(&cov, &m).unwrap();
            prop_assert!((r[(2, 2)] - sh_reflection(&cov, &m.minus, &m.plus).unwrap()).norm() < 1e-12);
            let xi_i = vertical_wavenumber(&cov, csm, 1e-9).unwrap();
            prop_assert!(sh_flux_residual(&cov, &m).unwrap().abs() <= 1e-12 * rm * csm * csm * xi_i);
        }

        #[test]
        fn homogeneity(d in proptest::collection::vec(-0.4f64..0.4, 18), b in 0.0f64..0.3, s in 0.3f64..4.0) {
            let m = model(
                ElasticSideJet::new(jv(1.0, &d[0..3]), jv(1.0, &d[3..6]), jv(2.0, &d[6..9])).unwrap(),
                ElasticSideJet::new(jv(1.4, &d[9..12]), jv(1.2, &d[12..15]), jv(2.2, &d[15..18])).unwrap(),
            );
            let cov = Covector::new(0.9, [b * 0.9 * 0.8, -b * 0.9 * 0.6]).unwrap();
            let a = forward_symbols_elastic(&cov, &m, 2).unwrap();
            let c = forward_symbols_elastic(&cov.scaled(s), &m, 2).unwrap();
            for (x, y) in a.orders.iter().zip(&c.orders) {
                let f = s.powi(x.order);
                prop_assert!((y.r - x.r * Complex64::new(f, 0.0)).norm() <= 1e-11 * (1.0 + x.r.norm() * f));
                prop_assert!((y.t - x.t * Complex64::new(f, 0.0)).norm() <= 1e-11 * (1.0 + x.t.norm() * f));
            }
        }
    }
}
