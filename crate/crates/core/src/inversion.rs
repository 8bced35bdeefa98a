//! Reconstruction of plus-side jets (and curvature) from reflection symbols.
//!
//! Order 0 is solved in closed form. For each lower order the measured
//! symbol is affine in the top-order unknown derivatives once everything
//! above is known, so the design matrix is built by differencing forward runs
//! against a baseline with the unknowns set to zero, and solved by SVD least
//! squares with column scaling.

use std::time::Instant;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustic::{forward_orders, AcousticError};
use crate::elastic::{forward_orders_elastic, CMatrix3, ElasticError};
use crate::geometry::{
    mean_curvature_jet, mean_curvature_jet_from_invariants, shape_operator_from_mean_jet, GeometryError,
};
use crate::jetcalc::Jet;
use crate::medium::{
    vertical_wavenumber, AcousticSideJet, Covector, ElasticSideJet, InterfaceGeometry, MediumError,
    DEFAULT_GLANCING_TOL,
};

pub use crate::geometry::shape_operator_from_mean_jet as shape_operator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InversionError {
    #[error("not enough samples: {0}")]
    InsufficientSamples(String),
    #[error("degenerate angles: samples need at least two distinct |b|")]
    DegenerateAngles,
    #[error("missing symbol order {0}")]
    MissingOrder(i32),
    #[error("inconsistent data at order {order}: relative residual {residual:e}")]
    InconsistentData { order: i32, residual: f64 },
    #[error("ill-conditioned design at order {order}: condition number {condition:e}")]
    IllConditioned { order: i32, condition: f64 },
    #[error("no root in the admissible speed bracket")]
    NoRoot,
    #[error("ambiguous roots: {roots:?}")]
    AmbiguousRoot { roots: Vec<(f64, f64)> },
    #[error(transparent)]
    Acoustic(#[from] AcousticError),
    #[error(transparent)]
    Elastic(#[from] ElasticError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Medium(#[from] MediumError),
}

impl InversionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            InversionError::InsufficientSamples(_) => "InsufficientSamples",
            InversionError::DegenerateAngles => "DegenerateAngles",
            InversionError::MissingOrder(_) => "MissingOrder",
            InversionError::InconsistentData { .. } => "InconsistentData",
            InversionError::IllConditioned { .. } => "IllConditioned",
            InversionError::NoRoot => "NoRoot",
            InversionError::AmbiguousRoot { .. } => "AmbiguousRoot",
            InversionError::Acoustic(_) => "ForwardError",
            InversionError::Elastic(_) => "ForwardError",
            InversionError::Geometry(_) => "ComplexCurvatures",
            InversionError::Medium(_) => "RegimeError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSample<V> {
    pub covector: Covector,
    pub order: i32,
    pub value: V,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSamples<V> {
    pub samples: Vec<SymbolSample<V>>,
}

pub type AcousticSamples = SymbolSamples<Complex64>;
pub type ElasticSamples = SymbolSamples<CMatrix3>;

fn cov_key(c: &Covector) -> (f64, f64, f64, f64) {
    (c.slowness(), c.tau, c.xi[0], c.xi[1])
}

impl<V: Clone> SymbolSamples<V> {
    pub fn new(samples: Vec<SymbolSample<V>>) -> Self {
        SymbolSamples { samples }
    }

    /// Samples of one order in a canonical order, exact duplicates dropped.
    pub fn at_order(&self, order: i32) -> Vec<SymbolSample<V>> {
        let mut v: Vec<SymbolSample<V>> = self.samples.iter().filter(|s| s.order == order).cloned().collect();
        v.sort_by(|a, b| cov_key(&a.covector).partial_cmp(&cov_key(&b.covector)).expect("finite covectors"));
        let before = v.len();
        v.dedup_by(|a, b| a.covector == b.covector);
        if v.len() < before {
            warn!("dropped {} duplicated samples at order {}", before - v.len(), order);
        }
        v
    }

    pub fn max_order_depth(&self) -> usize {
        self.samples.iter().map(|s| (-s.order).max(0) as usize).max().unwrap_or(0)
    }
}

fn distinct_slownesses<V>(s: &[SymbolSample<V>]) -> usize {
    let mut b: Vec<f64> = s.iter().map(|x| x.covector.slowness()).collect();
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite slowness"));
    b.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * x.abs().max(1.0));
    b.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CurvatureHandling {
    /// Interface geometry is known.
    Known(InterfaceGeometry),
    /// Recover the principal curvatures together with the jets.
    Recover,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    pub glancing_tol: f64,
    /// Acceptance threshold on relative least-squares residuals.
    pub residual_tol: f64,
    /// Design matrices above this condition number are rejected.
    pub condition_limit: f64,
    /// Bracket tolerance for scalar root finding, relative.
    pub root_tol: f64,
    /// Misfit tolerance used to confirm candidate roots, relative.
    pub confirm_tol: f64,
    /// Largest |kappa| searched when recovering curvature.
    pub curvature_bound: f64,
    pub curvature: CurvatureHandling,
    /// Record wall-clock time per order (makes reports non-reproducible).
    pub timing: bool,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            glancing_tol: DEFAULT_GLANCING_TOL,
            residual_tol: 1e-8,
            condition_limit: 1e8,
            root_tol: 1e-12,
            confirm_tol: 1e-6,
            curvature_bound: 2.0,
            curvature: CurvatureHandling::Known(InterfaceGeometry::flat()),
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderDiagnostics {
    /// Symbol order used (0, -1, ...).
    pub order: i32,
    pub residual: f64,
    pub condition: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub mean_curvature: f64,
    pub mean_curvature_derivative: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub kind: String,
    pub depth: usize,
    pub rho_jet: Vec<f64>,
    pub cs_jet: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cp_jet: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature: Option<CurvatureReport>,
    pub orders: Vec<OrderDiagnostics>,
}

impl RecoveryReport {
    pub fn acoustic_plus(&self) -> AcousticSideJet {
        AcousticSideJet { rho: Jet::new(self.rho_jet.clone()), cs: Jet::new(self.cs_jet.clone()) }
    }

    pub fn elastic_plus(&self) -> Option<ElasticSideJet> {
        let cp = self.cp_jet.as_ref()?;
        Some(ElasticSideJet {
            rho: Jet::new(self.rho_jet.clone()),
            cs: Jet::new(self.cs_jet.clone()),
            cp: Jet::new(cp.clone()),
        })
    }

    pub fn geometry(&self) -> Option<InterfaceGeometry> {
        self.curvature.as_ref().map(|c| InterfaceGeometry::new(c.kappa1, c.kappa2))
    }
}

/// Solution of one scaled least-squares problem.
struct LsSolution {
    x: Vec<f64>,
    residual: f64,
    condition: f64,
    /// Unnormalized residual vector.
    r: Vec<f64>,
}

fn least_squares(cols: &[Vec<f64>], y: &[f64], data_norm: f64) -> LsSolution {
    let m = y.len();
    let n = cols.len();
    let mut a = DMatrix::<f64>::zeros(m, n);
    let mut scale = vec![1.0; n];
    for (j, c) in cols.iter().enumerate() {
        let nrm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        scale[j] = if nrm > 0.0 { nrm } else { 1.0 };
        for i in 0..m {
            a[(i, j)] = c[i] / scale[j];
        }
    }
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (mx, mn) = sv.iter().fold((0.0f64, f64::INFINITY), |(p, q), &s| (p.max(s), q.min(s)));
    let condition = if mn > 0.0 { mx / mn } else { f64::INFINITY };
    let b = DVector::from_column_slice(y);
    let z = svd.solve(&b, mx * 1e-15).unwrap_or_else(|_| DVector::zeros(n));
    let r = &a * &z - &b;
    let rn = r.norm();
    let denom = data_norm.max(b.norm());
    let residual = if denom > 0.0 { rn / denom } else { rn };
    LsSolution {
        x: (0..n).map(|j| z[j] / scale[j]).collect(),
        residual,
        condition,
        r: r.iter().copied().collect(),
    }
}

fn stack_complex(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|c| c.re).chain(v.iter().map(|c| c.im)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------- acoustic

/// Plus-side (c_S, rho) at the interface from order-0 reflection samples.
///
/// With L = (1 - R)/(1 + R) = mu^+ xi_T / (mu^- xi_I), the quantity
/// (mu^- (xi_I/|tau|) L)^2 = mu+^2 / c+^2 - mu+^2 b^2 is linear in b^2.
pub fn acoustic_recover_order0(
    samples: &AcousticSamples,
    minus: &AcousticSideJet,
) -> Result<(f64, f64), InversionError> {
    acoustic_recover_order0_with(samples, minus, &InversionOptions::default()).map(|(c, r, _)| (c, r))
}

fn acoustic_recover_order0_with(
    samples: &AcousticSamples,
    minus: &AcousticSideJet,
    opts: &InversionOptions,
) -> Result<(f64, f64, OrderDiagnostics), InversionError> {
    let s0 = samples.at_order(0);
    if s0.is_empty() {
        return Err(InversionError::MissingOrder(0));
    }
    if s0.len() < 2 {
        return Err(InversionError::InsufficientSamples("order 0 needs two samples".into()));
    }
    if distinct_slownesses(&s0) < 2 {
        return Err(InversionError::DegenerateAngles);
    }
    let mm = minus.mu0();
    let mut ys = Vec::with_capacity(s0.len());
    let mut b2 = Vec::with_capacity(s0.len());
    for s in &s0 {
        let r = s.value.re;
        let xi = vertical_wavenumber(&s.covector, minus.cs.value(), opts.glancing_tol)? / s.covector.tau.abs();
        let l = (1.0 - r) / (1.0 + r);
        ys.push((mm * xi * l).powi(2));
        b2.push(s.covector.slowness().powi(2));
    }
    let ones = vec![1.0; ys.len()];
    let negb2: Vec<f64> = b2.iter().map(|x| -x).collect();
    let ls = least_squares(&[ones, negb2], &ys, norm(&ys));
    let (alpha, beta) = (ls.x[0], ls.x[1]);
    let diag = OrderDiagnostics { order: 0, residual: ls.residual, condition: ls.condition, seconds: None };
    if ls.residual > opts.residual_tol || !(alpha > 0.0) || !(beta > 0.0) {
        return Err(InversionError::InconsistentData { order: 0, residual: ls.residual });
    }
    let mu = beta.sqrt();
    let c = (beta / alpha).sqrt();
    for s in &s0 {
        if s.covector.slowness() * c >= 1.0 {
            return Err(InversionError::InconsistentData { order: 0, residual: f64::INFINITY });
        }
    }
    Ok((c, mu / (c * c), diag))
}

struct AcousticLayer {
    covs: Vec<Covector>,
    measured: Vec<Complex64>,
}

fn acoustic_layers(samples: &AcousticSamples, depth: usize) -> Result<Vec<AcousticLayer>, InversionError> {
    let mut out = Vec::with_capacity(depth + 1);
    for k in 0..=depth {
        let s = samples.at_order(-(k as i32));
        if s.is_empty() {
            return Err(InversionError::MissingOrder(-(k as i32)));
        }
        if k > 0 && distinct_slownesses(&s) < 2 {
            return Err(InversionError::InsufficientSamples(format!("order -{k} needs two distinct |b|")));
        }
        out.push(AcousticLayer { covs: s.iter().map(|x| x.covector).collect(), measured: s.iter().map(|x| x.value).collect() });
    }
    Ok(out)
}

/// Order -k reflection values for every covector of a layer.
fn acoustic_layer_values(
    layer: &AcousticLayer,
    minus: &AcousticSideJet,
    plus: &AcousticSideJet,
    hjet: &Jet,
    k: usize,
    tol: f64,
) -> Result<Vec<Complex64>, InversionError> {
    let m = minus.truncate(k);
    let p = plus.truncate(k);
    let h = hjet.truncate(k);
    layer
        .covs
        .iter()
        .map(|c| Ok(forward_orders(c, &m, &p, &h, k, tol)?[k].0))
        .collect()
}

/// Outcome of the layered solves for fixed curvature.
struct AcousticSweep {
    plus: AcousticSideJet,
    diags: Vec<OrderDiagnostics>,
    residuals: Vec<f64>,
}

fn acoustic_sweep(
    layers: &[AcousticLayer],
    minus: &AcousticSideJet,
    plus0: (f64, f64),
    hjet: &Jet,
    depth: usize,
    opts: &InversionOptions,
) -> Result<AcousticSweep, InversionError> {
    let mut plus = AcousticSideJet::constant(plus0.1, plus0.0, depth);
    let mut diags = Vec::new();
    let mut residuals = Vec::new();
    for k in 1..=depth {
        let t0 = Instant::now();
        let layer = &layers[k];
        let base = acoustic_layer_values(layer, minus, &plus, hjet, k, opts.glancing_tol)?;
        let y: Vec<f64> = stack_complex(&layer.measured.iter().zip(&base).map(|(m, b)| m - b).collect::<Vec<_>>());
        let mut cols = Vec::with_capacity(2);
        for which in 0..2 {
            let mut p = plus.clone();
            let scale = if which == 0 { p.rho.value() } else { p.cs.value() };
            let jet = if which == 0 { &mut p.rho } else { &mut p.cs };
            jet.coeffs_mut()[k] = scale;
            let v = acoustic_layer_values(layer, minus, &p, hjet, k, opts.glancing_tol)?;
            let col: Vec<Complex64> = v.iter().zip(&base).map(|(a, b)| (a - b) / scale).collect();
            cols.push(stack_complex(&col));
        }
        let dn = norm(&stack_complex(&layer.measured));
        let ls = least_squares(&cols, &y, dn);
        plus.rho.coeffs_mut()[k] = ls.x[0];
        plus.cs.coeffs_mut()[k] = ls.x[1];
        let scale = if dn > 0.0 { dn } else { 1.0 };
        residuals.extend(ls.r.iter().map(|x| x / scale));
        diags.push(OrderDiagnostics {
            order: -(k as i32),
            residual: ls.residual,
            condition: ls.condition,
            seconds: opts.timing.then(|| t0.elapsed().as_secs_f64()),
        });
        debug!("acoustic order -{k}: residual {:e}, condition {:e}", ls.residual, ls.condition);
    }
    Ok(AcousticSweep { plus, diags, residuals })
}

fn check_diags(diags: &[OrderDiagnostics], opts: &InversionOptions) -> Result<(), InversionError> {
    for d in diags {
        if !(d.condition <= opts.condition_limit) {
            return Err(InversionError::IllConditioned { order: d.order, condition: d.condition });
        }
        if !(d.residual <= opts.residual_tol) {
            return Err(InversionError::InconsistentData { order: d.order, residual: d.residual });
        }
    }
    Ok(())
}

/// Plus-side jets through `depth` from reflection samples at orders 0..-depth.
pub fn acoustic_recover_jets(
    samples: &AcousticSamples,
    minus: &AcousticSideJet,
    depth: usize,
    opts: &InversionOptions,
) -> Result<RecoveryReport, InversionError> {
    if minus.depth() < depth {
        return Err(AcousticError::DepthExceeded { requested: depth, available: minus.depth() }.into());
    }
    let t0 = Instant::now();
    let (c0, r0, mut d0) = acoustic_recover_order0_with(samples, minus, opts)?;
    d0.seconds = opts.timing.then(|| t0.elapsed().as_secs_f64());
    let layers = acoustic_layers(samples, depth)?;
    let minus = minus.truncate(depth);

    let (sweep, curvature) = match opts.curvature {
        CurvatureHandling::Known(g) => {
            let hjet = mean_curvature_jet(&g, depth);
            (acoustic_sweep(&layers, &minus, (c0, r0), &hjet, depth, opts)?, None)
        }
        CurvatureHandling::Recover => {
            if depth == 0 {
                return Err(InversionError::MissingOrder(-1));
            }
            let probe = acoustic_first_order_with_h(&layers, &minus, (c0, r0), opts)?;
            // The data only see the area factor 1 + h s + g s^2 through
            // rho A on both sides, so H and rho' trade off at this order.
            if depth < 3 {
                return Err(InversionError::IllConditioned { order: -1, condition: probe.condition });
            }
            let (h, g) = fit_area_invariants(&layers, &minus, (c0, r0), depth, opts)?;
            let hjet = mean_curvature_jet_from_invariants(h, g, depth);
            let sweep = acoustic_sweep(&layers, &minus, (c0, r0), &hjet, depth, opts)?;
            let dh = hjet.get(1);
            let (k1, k2) = shape_operator_from_mean_jet(h, dh)?;
            (sweep, Some(CurvatureReport { mean_curvature: h, mean_curvature_derivative: dh, kappa1: k1, kappa2: k2 }))
        }
    };
    let mut orders = vec![d0];
    orders.extend(sweep.diags);
    check_diags(&orders, opts)?;
    Ok(RecoveryReport {
        kind: "acoustic".into(),
        depth,
        rho_jet: sweep.plus.rho.coeffs().to_vec(),
        cs_jet: sweep.plus.cs.coeffs().to_vec(),
        cp_jet: None,
        curvature,
        orders,
    })
}

/// The order -1 design with unknowns (rho', c', H).
fn acoustic_first_order_with_h(
    layers: &[AcousticLayer],
    minus: &AcousticSideJet,
    plus0: (f64, f64),
    opts: &InversionOptions,
) -> Result<LsSolution, InversionError> {
    let layer = &layers[1];
    let plus = AcousticSideJet::constant(plus0.1, plus0.0, 1);
    let h0 = Jet::zeros(1);
    let base = acoustic_layer_values(layer, minus, &plus, &h0, 1, opts.glancing_tol)?;
    let y = stack_complex(&layer.measured.iter().zip(&base).map(|(m, b)| m - b).collect::<Vec<_>>());
    let mut cols = Vec::new();
    for which in 0..3 {
        let mut p = plus.clone();
        let mut h = h0.clone();
        match which {
            0 => p.rho.coeffs_mut()[1] = 1.0,
            1 => p.cs.coeffs_mut()[1] = 1.0,
            _ => h.coeffs_mut()[0] = 1.0,
        }
        let v = acoustic_layer_values(layer, minus, &p, &h, 1, opts.glancing_tol)?;
        cols.push(stack_complex(&v.iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<_>>()));
    }
    Ok(least_squares(&cols, &y, norm(&stack_complex(&layer.measured))))
}

/// Mean curvature h and Gauss curvature g from data through order -3 or
/// lower: for fixed (h, g) the layered solves are linear, and the stacked
/// residual is minimized over (h, g) by Levenberg-Marquardt from a grid of
/// starting points.
fn fit_area_invariants(
    layers: &[AcousticLayer],
    minus: &AcousticSideJet,
    plus0: (f64, f64),
    depth: usize,
    opts: &InversionOptions,
) -> Result<(f64, f64), InversionError> {
    let resid = |p: [f64; 2]| -> Option<Vec<f64>> {
        let hjet = mean_curvature_jet_from_invariants(p[0], p[1], depth);
        acoustic_sweep(layers, minus, plus0, &hjet, depth, opts).ok().map(|s| s.residuals)
    };
    let cost = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();

    let kb = opts.curvature_bound;
    let n = 9;
    let mut starts: Vec<(f64, [f64; 2])> = Vec::new();
    for i in 0..n {
        for j in i..n {
            let k1 = -kb + 2.0 * kb * i as f64 / (n - 1) as f64;
            let k2 = -kb + 2.0 * kb * j as f64 / (n - 1) as f64;
            let p = [k1 + k2, k1 * k2];
            if let Some(r) = resid(p) {
                starts.push((cost(&r), p));
            }
        }
    }
    if starts.is_empty() {
        return Err(InversionError::NoRoot);
    }
    starts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite cost"));
    let mut best: Option<(f64, [f64; 2])> = None;
    for &(c0, p0) in starts.iter().take(4) {
        let (c, p) = levenberg_marquardt(&resid, p0, c0);
        if best.map_or(true, |(bc, _)| c < bc) {
            best = Some((c, p));
        }
    }
    let (c, p) = best.expect("at least one start");
    debug!("curvature fit: cost {c:e} at h = {}, g = {}", p[0], p[1]);
    Ok((p[0], p[1]))
}

fn levenberg_marquardt(resid: &dyn Fn([f64; 2]) -> Option<Vec<f64>>, p0: [f64; 2], c0: f64) -> (f64, [f64; 2]) {
    let cost = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut p = p0;
    let mut c = c0;
    let mut r = match resid(p) {
        Some(r) => r,
        None => return (f64::INFINITY, p),
    };
    let mut lambda = 1e-3;
    for _ in 0..200 {
        if c < 1e-30 {
            break;
        }
        let mut jac = [vec![], vec![]];
        for i in 0..2 {
            let h = 1e-7 * p[i].abs().max(1.0);
            let mut q = p;
            q[i] += h;
            let mut qm = p;
            qm[i] -= h;
            match (resid(q), resid(qm)) {
                (Some(a), Some(b)) => jac[i] = a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect(),
                _ => return (c, p),
            }
        }
        let jtj = [
            [jac[0].iter().map(|x| x * x).sum::<f64>(), jac[0].iter().zip(&jac[1]).map(|(x, y)| x * y).sum::<f64>()],
            [0.0, jac[1].iter().map(|x| x * x).sum::<f64>()],
        ];
        let g = [
            jac[0].iter().zip(&r).map(|(x, y)| x * y).sum::<f64>(),
            jac[1].iter().zip(&r).map(|(x, y)| x * y).sum::<f64>(),
        ];
        let mut improved = false;
        for _ in 0..30 {
            let a = jtj[0][0] * (1.0 + lambda);
            let d = jtj[1][1] * (1.0 + lambda);
            let b = jtj[0][1];
            let det = a * d - b * b;
            if det == 0.0 {
                lambda *= 10.0;
                continue;
            }
            let step = [-(d * g[0] - b * g[1]) / det, -(a * g[1] - b * g[0]) / det];
            let q = [p[0] + step[0], p[1] + step[1]];
            if let Some(rq) = resid(q) {
                let cq = cost(&rq);
                if cq < c {
                    let small = step[0].abs() + step[1].abs() <= 1e-15 * (1.0 + p[0].abs() + p[1].abs());
                    p = q;
                    c = cq;
                    r = rq;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = !small;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (c, p)
}

/// Slowness-dependent order-0 reflection for given plus-side (mu, c).
fn reflection0(mu_minus: f64, c_minus: f64, mu_plus: f64, c_plus: f64, b: f64) -> f64 {
    let xi = (1.0 / (c_minus * c_minus) - b * b).sqrt();
    let xt = (1.0 / (c_plus * c_plus) - b * b).sqrt();
    (mu_minus * xi - mu_plus * xt) / (mu_minus * xi + mu_plus * xt)
}

/// Relative order-0 data: R(b) / R(b_ref).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeSamples {
    pub reference: Covector,
    pub samples: Vec<(Covector, f64)>,
}

/// Ratios R(b)/R(b_ref) from an acoustic model; 0/0 (transparent) is taken as 1.
pub fn relative_amplitudes(
    minus: &AcousticSideJet,
    plus: &AcousticSideJet,
    reference: Covector,
    covs: &[Covector],
) -> Result<RelativeSamples, InversionError> {
    let (mm, cm, mp, cp) = (minus.mu0(), minus.cs.value(), plus.mu0(), plus.cs.value());
    for c in covs.iter().chain(std::iter::once(&reference)) {
        vertical_wavenumber(c, cm, DEFAULT_GLANCING_TOL)?;
        vertical_wavenumber(c, cp, DEFAULT_GLANCING_TOL)?;
    }
    let r_ref = reflection0(mm, cm, mp, cp, reference.slowness());
    let samples = covs
        .iter()
        .map(|c| {
            let r = reflection0(mm, cm, mp, cp, c.slowness());
            let ratio = if r_ref == 0.0 && r == 0.0 { 1.0 } else { r / r_ref };
            (*c, ratio)
        })
        .collect();
    Ok(RelativeSamples { reference, samples })
}

/// (mu^+, c_S^+) from relative amplitudes.
///
/// Writing f = xi_I / xi_T, a = mu^-, x = mu^+ and ratio q = R(b)/R(b_ref),
/// the quantity L = (q - 1)/(q + 1) = a x (f - f_ref) / (a^2 f f_ref - x^2), so
/// each sample gives the quadratic L x^2 + a (f - f_ref) x - L a^2 f f_ref = 0
/// with exactly one positive root once c_S^+ is fixed. c_S^+ is the speed at
/// which all samples agree on x.
pub fn acoustic_recover_relative(
    samples: &RelativeSamples,
    minus: &AcousticSideJet,
    opts: &InversionOptions,
) -> Result<(f64, f64), InversionError> {
    let a = minus.mu0();
    let cm = minus.cs.value();
    let b_ref = samples.reference.slowness();
    let mut data: Vec<(f64, f64)> = samples
        .samples
        .iter()
        .map(|(c, q)| (c.slowness(), *q))
        .filter(|(b, _)| (b - b_ref).abs() > 1e-14)
        .collect();
    data.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    data.dedup_by(|x, y| (x.0 - y.0).abs() <= 1e-14);
    if data.len() < 2 {
        return Err(InversionError::InsufficientSamples("relative inversion needs two non-reference slownesses".into()));
    }
    let ls: Vec<f64> = data.iter().map(|(_, q)| (q - 1.0) / (q + 1.0)).collect();
    if ls.iter().all(|l| l.abs() < 1e-12) {
        // every (mu^+, c^- ) pair reproduces constant ratios
        return Err(InversionError::AmbiguousRoot { roots: vec![] });
    }
    let b_max = data.iter().map(|d| d.0).fold(b_ref, f64::max);
    let xi_of = |c: f64, b: f64| (1.0 / (c * c) - b * b).sqrt();
    let mu_of = |c: f64, i: usize| -> f64 {
        let (b, _) = data[i];
        let l = ls[i];
        let f = xi_of(cm, b) / xi_of(c, b);
        let f1 = xi_of(cm, b_ref) / xi_of(c, b_ref);
        let bq = a * (f - f1);
        let cq = -l * a * a * f * f1;
        if l.abs() < 1e-300 {
            return f64::NAN;
        }
        let disc = (bq * bq - 4.0 * l * cq).max(0.0);
        let q = -0.5 * (bq + bq.signum() * disc.sqrt());
        let r1 = q / l;
        let r2 = if q != 0.0 { cq / q } else { f64::NAN };
        r1.max(r2)
    };
    // pair with the largest slowness spread among informative samples
    let informative: Vec<usize> = (0..data.len()).filter(|&i| ls[i].abs() >= 1e-12).collect();
    if informative.len() < 2 {
        return Err(InversionError::InsufficientSamples("need two samples with ratio != 1".into()));
    }
    let (i0, i1) = (informative[0], informative[informative.len() - 1]);
    let g = |c: f64| mu_of(c, i1) - mu_of(c, i0);

    let c_hi = (1.0 / b_max) * (1.0 - 1e-9);
    let c_lo = 1e-3 * c_hi;
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|i| c_lo * (c_hi / c_lo).powf(i as f64 / n as f64)).collect();
    let gv: Vec<f64> = grid.iter().map(|&c| g(c)).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        let (ga, gb) = (gv[i], gv[i + 1]);
        if !(ga.is_finite() && gb.is_finite()) || ga.signum() == gb.signum() {
            continue;
        }
        let c = bisect(&g, grid[i], grid[i + 1], opts.root_tol);
        let mus: Vec<f64> = informative.iter().map(|&k| mu_of(c, k)).collect();
        let mu = mus.iter().sum::<f64>() / mus.len() as f64;
        if !(mu > 0.0) {
            continue;
        }
        // confirm against every ratio
        let r_ref = reflection0(a, cm, mu, c, b_ref);
        let ok = data.iter().all(|&(b, q)| {
            let pred = reflection0(a, cm, mu, c, b) / r_ref;
            (pred - q).abs() <= opts.confirm_tol * q.abs().max(1.0)
        });
        if ok {
            roots.push((mu, c));
        }
    }
    match roots.len() {
        0 => Err(InversionError::NoRoot),
        1 => Ok(roots[0]),
        _ => Err(InversionError::AmbiguousRoot { roots }),
    }
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= tol * mid.abs() {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ----------------------------------------------------------------- elastic

fn elastic_values(
    covs: &[Covector],
    minus: &ElasticSideJet,
    plus: &ElasticSideJet,
    hjet: &Jet,
    k: usize,
    tol: f64,
) -> Result<Vec<CMatrix3>, InversionError> {
    let m = minus.truncate(k);
    let p = plus.truncate(k);
    let h = hjet.truncate(k);
    covs.iter().map(|c| Ok(forward_orders_elastic(c, &m, &p, &h, k, tol)?[k].r)).collect()
}

fn stack_matrices(v: &[CMatrix3]) -> Vec<f64> {
    let flat: Vec<Complex64> = v.iter().flat_map(|m| m.iter().copied()).collect();
    stack_complex(&flat)
}

/// Plus-side (rho, c_S, c_P) at the interface from order-0 reflection matrices.
pub fn elastic_recover_order0(
    samples: &ElasticSamples,
    minus: &ElasticSideJet,
) -> Result<(f64, f64, f64), InversionError> {
    elastic_recover_order0_with(samples, minus, &InversionOptions::default()).map(|(r, s, p, _)| (r, s, p))
}

fn elastic_recover_order0_with(
    samples: &ElasticSamples,
    minus: &ElasticSideJet,
    opts: &InversionOptions,
) -> Result<(f64, f64, f64, OrderDiagnostics), InversionError> {
    let s0 = samples.at_order(0);
    // SH entries alone fix (rho, c_S)
    let sh = AcousticSamples::new(
        s0.iter()
            .map(|s| SymbolSample { covector: s.covector, order: 0, value: s.value[(2, 2)] })
            .collect(),
    );
    let (cs, rho, _) = acoustic_recover_order0_with(&sh, &minus.shear_part(), opts)?;
    let covs: Vec<Covector> = s0.iter().map(|s| s.covector).collect();
    let measured: Vec<CMatrix3> = s0.iter().map(|s| s.value).collect();
    let b_max = covs.iter().map(|c| c.slowness()).fold(0.0, f64::max);
    let lo = (4.0f64 / 3.0).sqrt() * cs * (1.0 + 1e-6);
    let mut hi = 10.0 * minus.cp.value().max(cs);
    if b_max > 0.0 {
        hi = hi.min((1.0 - 1e-9) / b_max);
    }
    if !(hi > lo) {
        return Err(InversionError::NoRoot);
    }
    let h0 = Jet::zeros(0);
    let m0 = minus.truncate(0);
    let resid = |cp: f64| -> Option<Vec<f64>> {
        let p = ElasticSideJet::constant(rho, cs, cp, 0);
        let v = elastic_values(&covs, &m0, &p, &h0, 0, opts.glancing_tol).ok()?;
        let d: Vec<CMatrix3> = v.iter().zip(&measured).map(|(a, b)| a - b).collect();
        Some(stack_matrices(&d))
    };
    let cost = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let n = 200;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=n {
        let c = lo + (hi - lo) * i as f64 / n as f64;
        if let Some(r) = resid(c) {
            let v = cost(&r);
            if v < best.0 {
                best = (v, c);
            }
        }
    }
    // Gauss-Newton on the full residual vector
    let mut c = best.1;
    for _ in 0..100 {
        let h = 1e-7 * c;
        let (Some(r), Some(rp), Some(rm)) = (resid(c), resid(c + h), resid(c - h)) else { break };
        let jac: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let jj: f64 = jac.iter().map(|x| x * x).sum();
        if jj == 0.0 {
            break;
        }
        let step = -jac.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / jj;
        let next = (c + step).clamp(lo, hi);
        let done = (next - c).abs() <= opts.root_tol * c;
        c = next;
        if done {
            break;
        }
    }
    let r = resid(c).ok_or(InversionError::NoRoot)?;
    let dn = norm(&stack_matrices(&measured));
    let residual = if dn > 0.0 { norm(&r) / dn } else { norm(&r) };
    if residual > opts.residual_tol {
        return Err(InversionError::InconsistentData { order: 0, residual });
    }
    Ok((rho, cs, c, OrderDiagnostics { order: 0, residual, condition: 1.0, seconds: None }))
}

/// Plus-side elastic jets through `depth`.
pub fn elastic_recover_jets(
    samples: &ElasticSamples,
    minus: &ElasticSideJet,
    depth: usize,
    opts: &InversionOptions,
) -> Result<RecoveryReport, InversionError> {
    if minus.depth() < depth {
        return Err(ElasticError::DepthExceeded { requested: depth, available: minus.depth() }.into());
    }
    let t0 = Instant::now();
    let (rho0, cs0, cp0, mut d0) = elastic_recover_order0_with(samples, minus, opts)?;
    d0.seconds = opts.timing.then(|| t0.elapsed().as_secs_f64());
    let minus = minus.truncate(depth);
    let mut plus = ElasticSideJet::constant(rho0, cs0, cp0, depth);
    let recover = matches!(opts.curvature, CurvatureHandling::Recover);
    let mut hjet = match opts.curvature {
        CurvatureHandling::Known(g) => mean_curvature_jet(&g, depth),
        CurvatureHandling::Recover => Jet::zeros(depth),
    };
    let mut orders = vec![d0];
    let mut curvature = None;
    for k in 1..=depth {
        let t = Instant::now();
        let s = samples.at_order(-(k as i32));
        if s.is_empty() {
            return Err(InversionError::MissingOrder(-(k as i32)));
        }
        if distinct_slownesses(&s) < 2 {
            return Err(InversionError::InsufficientSamples(format!("order -{k} needs two distinct |b|")));
        }
        let covs: Vec<Covector> = s.iter().map(|x| x.covector).collect();
        let measured: Vec<CMatrix3> = s.iter().map(|x| x.value).collect();
        let base = elastic_values(&covs, &minus, &plus, &hjet, k, opts.glancing_tol)?;
        let y = stack_matrices(&measured.iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<_>>());
        // H enters first at order -1 and dH at order -2
        let with_h = recover && k <= 2;
        let nu = if with_h { 4 } else { 3 };
        let mut cols = Vec::with_capacity(nu);
        for which in 0..nu {
            let mut p = plus.clone();
            let mut h = hjet.clone();
            let scale = match which {
                0 => p.rho.value(),
                1 => p.cs.value(),
                2 => p.cp.value(),
                _ => 1.0,
            };
            match which {
                0 => p.rho.coeffs_mut()[k] = scale,
                1 => p.cs.coeffs_mut()[k] = scale,
                2 => p.cp.coeffs_mut()[k] = scale,
                _ => h.coeffs_mut()[k - 1] = scale,
            }
            let v = elastic_values(&covs, &minus, &p, &h, k, opts.glancing_tol)?;
            let col: Vec<CMatrix3> = v.iter().zip(&base).map(|(a, b)| (a - b) / Complex64::new(scale, 0.0)).collect();
            cols.push(stack_matrices(&col));
        }
        let ls = least_squares(&cols, &y, norm(&stack_matrices(&measured)));
        plus.rho.coeffs_mut()[k] = ls.x[0];
        plus.cs.coeffs_mut()[k] = ls.x[1];
        plus.cp.coeffs_mut()[k] = ls.x[2];
        if with_h {
            hjet.coeffs_mut()[k - 1] = ls.x[3];
        }
        orders.push(OrderDiagnostics {
            order: -(k as i32),
            residual: ls.residual,
            condition: ls.condition,
            seconds: opts.timing.then(|| t.elapsed().as_secs_f64()),
        });
        check_diags(&orders, opts)?;
        if recover && k == 2 {
            let (k1, k2) = shape_operator_from_mean_jet(hjet.get(0), hjet.get(1))?;
            let full = mean_curvature_jet(&InterfaceGeometry::new(k1, k2), depth);
            for j in 2..=depth {
                hjet.coeffs_mut()[j] = full.get(j);
            }
            curvature = Some(CurvatureReport {
                mean_curvature: hjet.get(0),
                mean_curvature_derivative: hjet.get(1),
                kappa1: k1,
                kappa2: k2,
            });
        }
    }
    if recover && curvature.is_none() {
        return Err(InversionError::MissingOrder(-2));
    }
    Ok(RecoveryReport {
        kind: "elastic".into(),
        depth,
        rho_jet: plus.rho.coeffs().to_vec(),
        cs_jet: plus.cs.coeffs().to_vec(),
        cp_jet: Some(plus.cp.coeffs().to_vec()),
        curvature,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::forward_symbols;
    use crate::elastic::forward_symbols_elastic;
    use crate::medium::{AcousticModel, ElasticModel};

    fn acoustic_samples(model: &AcousticModel, bs: &[f64], depth: usize) -> AcousticSamples {
        let mut v = Vec::new();
        for &b in bs {
            let cov = Covector::from_slowness(1.0, b);
            let s = forward_symbols(&cov, model, depth).unwrap();
            for o in s.orders {
                v.push(SymbolSample { covector: cov, order: o.order, value: o.a_r });
            }
        }
        SymbolSamples::new(v)
    }

    fn elastic_samples(model: &ElasticModel, bs: &[f64], depth: usize) -> ElasticSamples {
        let mut v = Vec::new();
        for &b in bs {
            let cov = Covector::from_slowness(1.0, b);
            let s = forward_symbols_elastic(&cov, model, depth).unwrap();
            for o in s.orders {
                v.push(SymbolSample { covector: cov, order: o.order, value: o.r });
            }
        }
        SymbolSamples::new(v)
    }

    fn jv(v: &[f64]) -> Jet {
        Jet::new(v.to_vec())
    }

    #[test]
    fn order0_examples() {
        let m = AcousticModel::new_acoustic(
            AcousticSideJet::constant(1.0, 1.0, 0),
            AcousticSideJet::constant(1.0, 2.0, 0),
            InterfaceGeometry::flat(),
        )
        .unwrap();
        let s = acoustic_samples(&m, &[0.0, 0.3], 0);
        let (c, r) = acoustic_recover_order0(&s, &m.minus).unwrap();
        assert!((c - 2.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);

        let same = AcousticModel::new_acoustic(m.minus.clone(), m.minus.clone(), InterfaceGeometry::flat()).unwrap();
        let s = acoustic_samples(&same, &[0.0, 0.3], 0);
        let (c, r) = acoustic_recover_order0(&s, &m.minus).unwrap();
        assert!((c - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);

        let v = vec![
            SymbolSample { covector: Covector::new(1.0, [0.3, 0.0]).unwrap(), order: 0, value: Complex64::new(-0.2, 0.0) },
            SymbolSample { covector: Covector::new(1.0, [-0.3, 0.0]).unwrap(), order: 0, value: Complex64::new(-0.2, 0.0) },
        ];
        assert_eq!(acoustic_recover_order0(&SymbolSamples::new(v), &m.minus), Err(InversionError::DegenerateAngles));
    }

    #[test]
    fn flat_depth3_round_trip() {
        let minus = AcousticSideJet::new(jv(&[1.0, 0.3, -0.2, 0.4]), jv(&[1.2, 0.1, 0.3, -0.1])).unwrap();
        let plus = AcousticSideJet::new(jv(&[1.7, -0.4, 0.5, 0.2]), jv(&[1.9, 0.6, -0.3, 0.7])).unwrap();
        let m = AcousticModel::new_acoustic(minus.clone(), plus.clone(), InterfaceGeometry::flat()).unwrap();
        let bs: Vec<f64> = (0..6).map(|i| i as f64 * 0.8 / 1.9 / 5.0).collect();
        let s = acoustic_samples(&m, &bs, 3);
        let rep = acoustic_recover_jets(&s, &minus, 3, &InversionOptions::default()).unwrap();
        for k in 0..=3 {
            assert!((rep.rho_jet[k] - plus.rho.get(k)).abs() < 1e-6 * plus.rho.get(k).abs().max(1.0));
            assert!((rep.cs_jet[k] - plus.cs.get(k)).abs() < 1e-6 * plus.cs.get(k).abs().max(1.0));
        }
        let r0 = acoustic_recover_jets(&s, &minus, 0, &InversionOptions::default()).unwrap();
        let (c, r) = acoustic_recover_order0(&s, &minus).unwrap();
        assert_eq!((r0.cs_jet[0], r0.rho_jet[0]), (c, r));
    }

    #[test]
    fn permutation_does_not_change_result() {
        let minus = AcousticSideJet::new(jv(&[1.0, 0.3, -0.2]), jv(&[1.2, 0.1, 0.3])).unwrap();
        let plus = AcousticSideJet::new(jv(&[1.7, -0.4, 0.5]), jv(&[1.9, 0.6, -0.3])).unwrap();
        let m = AcousticModel::new_acoustic(minus.clone(), plus, InterfaceGeometry::flat()).unwrap();
        let s = acoustic_samples(&m, &[0.0, 0.1, 0.2, 0.3], 2);
        let mut t = s.clone();
        t.samples.reverse();
        t.samples.swap(1, 5);
        let opts = InversionOptions::default();
        assert_eq!(acoustic_recover_jets(&s, &minus, 2, &opts).unwrap(), acoustic_recover_jets(&t, &minus, 2, &opts).unwrap());
    }

    #[test]
    fn missing_order_is_reported() {
        let minus = AcousticSideJet::new(jv(&[1.0, 0.3]), jv(&[1.2, 0.1])).unwrap();
        let m = AcousticModel::new_acoustic(minus.clone(), minus.clone(), InterfaceGeometry::flat()).unwrap();
        let s = acoustic_samples(&m, &[0.0, 0.2], 0);
        assert_eq!(acoustic_recover_jets(&s, &minus, 1, &InversionOptions::default()), Err(InversionError::MissingOrder(-1)));
    }

    #[test]
    fn curvature_is_not_identifiable_at_depth_two() {
        let minus = AcousticSideJet::new(jv(&[1.0, 0.3, -0.2]), jv(&[1.2, 0.1, 0.3])).unwrap();
        let plus = AcousticSideJet::new(jv(&[1.7, -0.4, 0.5]), jv(&[1.9, 0.6, -0.3])).unwrap();
        let m = AcousticModel::new_acoustic(minus.clone(), plus, InterfaceGeometry::new(0.5, -0.2)).unwrap();
        let bs: Vec<f64> = (0..8).map(|i| i as f64 * 0.1 / 1.9).collect();
        let s = acoustic_samples(&m, &bs, 2);
        let opts = InversionOptions { curvature: CurvatureHandling::Recover, ..Default::default() };
        match acoustic_recover_jets(&s, &minus, 2, &opts) {
            Err(InversionError::IllConditioned { order: -1, condition }) => assert!(condition > 1e12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn curvature_from_depth_three() {
        let minus = AcousticSideJet::new(jv(&[1.0, 0.3, -0.2, 0.1]), jv(&[1.2, 0.1, 0.3, -0.2])).unwrap();
        let plus = AcousticSideJet::new(jv(&[1.7, -0.4, 0.5, 0.3]), jv(&[1.9, 0.6, -0.3, 0.2])).unwrap();
        let m = AcousticModel::new_acoustic(minus.clone(), plus.clone(), InterfaceGeometry::new(0.5, -0.2)).unwrap();
        let bs: Vec<f64> = (0..8).map(|i| i as f64 * 0.1 / 1.9).collect();
        let s = acoustic_samples(&m, &bs, 3);
        let opts = InversionOptions { curvature: CurvatureHandling::Recover, ..Default::default() };
        let rep = acoustic_recover_jets(&s, &minus, 3, &opts).unwrap();
        let c = rep.curvature.unwrap();
        assert!((c.kappa1 + 0.2).abs() < 1e-6 && (c.kappa2 - 0.5).abs() < 1e-6, "{c:?}");
        for k in 0..=3 {
            assert!((rep.rho_jet[k] - plus.rho.get(k)).abs() < 1e-6);
        }
    }

    #[test]
    fn relative_examples() {
        let minus = AcousticSideJet::constant(1.0, 1.0, 0);
        let plus = AcousticSideJet::constant(1.0, 2.0, 0);
        let covs: Vec<Covector> = [0.1, 0.2, 0.3, 0.4].iter().map(|&b| Covector::from_slowness(1.0, b)).collect();
        let reference = Covector::from_slowness(1.0, 0.0);
        let rs = relative_amplitudes(&minus, &plus, reference, &covs).unwrap();
        let (mu, c) = acoustic_recover_relative(&rs, &minus, &InversionOptions::default()).unwrap();
        assert!((mu - 4.0).abs() < 1e-8 && (c - 2.0).abs() < 1e-8, "{mu} {c}");

        let same = relative_amplitudes(&minus, &minus, reference, &covs).unwrap();
        assert!(matches!(
            acoustic_recover_relative(&same, &minus, &InversionOptions::default()),
            Err(InversionError::AmbiguousRoot { .. })
        ));

        let mut noisy = rs.clone();
        for (i, s) in noisy.samples.iter_mut().enumerate() {
            s.1 *= 1.0 + 1e-8 * if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let (mu2, c2) = acoustic_recover_relative(&noisy, &minus, &InversionOptions::default()).unwrap();
        assert!((mu2 - mu).abs() < 1e-5 && (c2 - c).abs() < 1e-5);
    }

    #[test]
    fn elastic_order0_examples() {
        let minus = ElasticSideJet::constant(1.0, 1.0, 2.0, 0);
        let plus = ElasticSideJet::constant(1.5, 1.2, 2.5, 0);
        let m = ElasticModel::new_elastic(minus.clone(), plus, InterfaceGeometry::flat()).unwrap();
        let s = elastic_samples(&m, &[0.0, 0.1, 0.2, 0.3], 0);
        let (r, cs, cp) = elastic_recover_order0(&s, &minus).unwrap();
        assert!((r - 1.5).abs() < 1e-8 * 1.5 && (cs - 1.2).abs() < 1e-8 * 1.2 && (cp - 2.5).abs() < 1e-8 * 2.5);

        let same = ElasticModel::new_elastic(minus.clone(), minus.clone(), InterfaceGeometry::flat()).unwrap();
        let s = elastic_samples(&same, &[0.0, 0.2], 0);
        let (r, cs, cp) = elastic_recover_order0(&s, &minus).unwrap();
        assert!((r - 1.0).abs() < 1e-8 && (cs - 1.0).abs() < 1e-8 && (cp - 2.0).abs() < 1e-8);
    }

    #[test]
    fn elastic_depth_one_round_trip() {
        let minus = ElasticSideJet::new(jv(&[1.0, 0.2]), jv(&[1.0, -0.1]), jv(&[2.0, 0.3])).unwrap();
        let plus = ElasticSideJet::new(jv(&[1.5, -0.3]), jv(&[1.2, 0.25]), jv(&[2.5, 0.0])).unwrap();
        let m = ElasticModel::new_elastic(minus.clone(), plus.clone(), InterfaceGeometry::flat()).unwrap();
        let bs: Vec<f64> = (0..6).map(|i| i as f64 * 0.06).collect();
        let s = elastic_samples(&m, &bs, 1);
        let rep = elastic_recover_jets(&s, &minus, 1, &InversionOptions::default()).unwrap();
        assert!((rep.rho_jet[1] + 0.3).abs() < 1e-6);
        assert!((rep.cs_jet[1] - 0.25).abs() < 1e-6);
        assert!(rep.cp_jet.as_ref().unwrap()[1].abs() < 1e-9);
    }

    #[test]
    fn elastic_identifies_curvature_at_depth_two() {
        let minus = ElasticSideJet::new(jv(&[1.0, 0.2, 0.1]), jv(&[1.0, -0.1, 0.2]), jv(&[2.0, 0.3, -0.1])).unwrap();
        let plus = ElasticSideJet::new(jv(&[1.5, -0.3, 0.2]), jv(&[1.2, 0.25, 0.1]), jv(&[2.5, 0.0, 0.3])).unwrap();
        let m = ElasticModel::new_elastic(minus.clone(), plus.clone(), InterfaceGeometry::new(0.5, -0.2)).unwrap();
        let bs: Vec<f64> = (0..8).map(|i| i as f64 * 0.045).collect();
        let s = elastic_samples(&m, &bs, 2);
        let opts = InversionOptions { curvature: CurvatureHandling::Recover, ..Default::default() };
        let rep = elastic_recover_jets(&s, &minus, 2, &opts).unwrap();
        let c = rep.curvature.unwrap();
        assert!((c.kappa1 + 0.2).abs() < 1e-8 && (c.kappa2 - 0.5).abs() < 1e-8, "{c:?}");
        assert!((rep.cp_jet.unwrap()[2] - 0.3).abs() < 1e-8);
    }
}
