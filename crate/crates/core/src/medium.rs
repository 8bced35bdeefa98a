//! Material jets on either side of the interface, interface geometry, and
//! the frequency-slowness covector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jetcalc::{Jet, JetError};

/// Default relative glancing tolerance.
pub const DEFAULT_GLANCING_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MediumError {
    #[error("glancing covector: radicand {radicand:e} within tolerance (speed {speed})")]
    Glancing { speed: f64, radicand: f64 },
    #[error("evanescent covector: radicand {radicand:e} < 0 (speed {speed})")]
    Evanescent { speed: f64, radicand: f64 },
    #[error("non-positive base value for {0}")]
    NonPositive(&'static str),
    #[error("convexity violated: mu = {mu}, 3 lambda + 2 mu = {bulk}")]
    ConvexityViolation { mu: f64, bulk: f64 },
    #[error("side jets have different depths")]
    DepthMismatch,
    #[error("temporal frequency must be nonzero")]
    ZeroFrequency,
    #[error(transparent)]
    Jet(#[from] JetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcousticSideJet {
    pub rho: Jet,
    pub cs: Jet,
}

impl AcousticSideJet {
    pub fn new(rho: Jet, cs: Jet) -> Result<Self, MediumError> {
        let s = AcousticSideJet { rho, cs };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(rho: f64, cs: f64, depth: usize) -> Self {
        AcousticSideJet { rho: Jet::constant(rho, depth), cs: Jet::constant(cs, depth) }
    }

    pub fn validate(&self) -> Result<(), MediumError> {
        if !(self.rho.value() > 0.0) {
            return Err(MediumError::NonPositive("rho"));
        }
        if !(self.cs.value() > 0.0) {
            return Err(MediumError::NonPositive("cs"));
        }
        if self.rho.depth() != self.cs.depth() {
            return Err(MediumError::DepthMismatch);
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.rho.depth()
    }

    pub fn truncate(&self, depth: usize) -> Self {
        AcousticSideJet { rho: self.rho.truncate(depth), cs: self.cs.truncate(depth) }
    }

    /// mu = rho c^2.
    pub fn mu(&self) -> Jet {
        &self.rho * &(&self.cs * &self.cs)
    }

    pub fn mu0(&self) -> f64 {
        self.rho.value() * self.cs.value().powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticSideJet {
    pub rho: Jet,
    pub cs: Jet,
    pub cp: Jet,
}

impl ElasticSideJet {
    pub fn new(rho: Jet, cs: Jet, cp: Jet) -> Result<Self, MediumError> {
        let s = ElasticSideJet { rho, cs, cp };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(rho: f64, cs: f64, cp: f64, depth: usize) -> Self {
        ElasticSideJet {
            rho: Jet::constant(rho, depth),
            cs: Jet::constant(cs, depth),
            cp: Jet::constant(cp, depth),
        }
    }

    pub fn validate(&self) -> Result<(), MediumError> {
        if !(self.rho.value() > 0.0) {
            return Err(MediumError::NonPositive("rho"));
        }
        if !(self.cs.value() > 0.0) {
            return Err(MediumError::NonPositive("cs"));
        }
        if self.rho.depth() != self.cs.depth() || self.rho.depth() != self.cp.depth() {
            return Err(MediumError::DepthMismatch);
        }
        let (cs, cp) = (self.cs.value(), self.cp.value());
        if !(cp * cp > 4.0 / 3.0 * cs * cs) {
            let rho = self.rho.value();
            let mu = rho * cs * cs;
            let lambda = rho * cp * cp - 2.0 * mu;
            return Err(MediumError::ConvexityViolation { mu, bulk: 3.0 * lambda + 2.0 * mu });
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.rho.depth()
    }

    pub fn truncate(&self, depth: usize) -> Self {
        ElasticSideJet {
            rho: self.rho.truncate(depth),
            cs: self.cs.truncate(depth),
            cp: self.cp.truncate(depth),
        }
    }

    /// The SH-channel view of this side: density and shear speed.
    pub fn shear_part(&self) -> AcousticSideJet {
        AcousticSideJet { rho: self.rho.clone(), cs: self.cs.clone() }
    }

    /// Inverse of [`derive_lame_jets`]: speeds from (lambda, mu, rho).
    pub fn from_lame(lambda: &Jet, mu: &Jet, rho: &Jet) -> Result<Self, MediumError> {
        let inv_rho = rho.try_inv()?;
        let cs = (mu * &inv_rho).sqrt()?;
        let p_mod = lambda + &mu.scale(2.0);
        let cp = (&p_mod * &inv_rho).sqrt()?;
        ElasticSideJet::new(rho.clone(), cs, cp)
    }
}

/// Lamé jets (lambda, mu) of an elastic side.
pub fn derive_lame_jets(side: &ElasticSideJet) -> Result<(Jet, Jet), MediumError> {
    side.validate()?;
    let mu = side.rho.try_mul(&side.cs.try_mul(&side.cs)?)?;
    let lambda = &side.rho.try_mul(&side.cp.try_mul(&side.cp)?)? - &mu.scale(2.0);
    let (m0, l0) = (mu.value(), lambda.value());
    if !(m0 > 0.0 && 3.0 * l0 + 2.0 * m0 > 0.0) {
        return Err(MediumError::ConvexityViolation { mu: m0, bulk: 3.0 * l0 + 2.0 * m0 });
    }
    Ok((lambda, mu))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InterfaceGeometry {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl InterfaceGeometry {
    pub fn flat() -> Self {
        InterfaceGeometry { kappa1: 0.0, kappa2: 0.0 }
    }

    pub fn new(kappa1: f64, kappa2: f64) -> Self {
        InterfaceGeometry { kappa1, kappa2 }
    }

    pub fn mean_curvature(&self) -> f64 {
        self.kappa1 + self.kappa2
    }

    pub fn is_flat(&self) -> bool {
        self.kappa1 == 0.0 && self.kappa2 == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covector {
    pub tau: f64,
    pub xi: [f64; 2],
}

impl Covector {
    pub fn new(tau: f64, xi: [f64; 2]) -> Result<Self, MediumError> {
        if tau == 0.0 || !tau.is_finite() {
            return Err(MediumError::ZeroFrequency);
        }
        Ok(Covector { tau, xi })
    }

    /// Covector with slowness b along the first tangential axis.
    pub fn from_slowness(tau: f64, b: f64) -> Self {
        Covector { tau, xi: [b * tau.abs(), 0.0] }
    }

    pub fn xi_norm(&self) -> f64 {
        self.xi[0].hypot(self.xi[1])
    }

    /// b = |xi'| / |tau|.
    pub fn slowness(&self) -> f64 {
        self.xi_norm() / self.tau.abs()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Covector { tau: self.tau * s, xi: [self.xi[0] * s, self.xi[1] * s] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Hyperbolic,
    Glancing,
    Evanescent,
}

fn radicand(cov: &Covector, speed: f64) -> f64 {
    cov.tau * cov.tau / (speed * speed) - cov.xi_norm().powi(2)
}

pub fn classify_regime(cov: &Covector, speed: f64, tol: f64) -> Regime {
    let r = radicand(cov, speed);
    let scale = cov.tau * cov.tau / (speed * speed);
    if r > tol * scale {
        Regime::Hyperbolic
    } else if r >= -tol * scale {
        Regime::Glancing
    } else {
        Regime::Evanescent
    }
}

/// xi_3 = +sqrt(tau^2 / c^2 - |xi'|^2) in the hyperbolic regime.
pub fn vertical_wavenumber(cov: &Covector, speed: f64, tol: f64) -> Result<f64, MediumError> {
    let r = radicand(cov, speed);
    match classify_regime(cov, speed, tol) {
        Regime::Hyperbolic => Ok(r.sqrt()),
        Regime::Glancing => Err(MediumError::Glancing { speed, radicand: r }),
        Regime::Evanescent => Err(MediumError::Evanescent { speed, radicand: r }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceModel<S> {
    pub minus: S,
    pub plus: S,
    pub geometry: InterfaceGeometry,
    pub depth: usize,
}

pub type AcousticModel = InterfaceModel<AcousticSideJet>;
pub type ElasticModel = InterfaceModel<ElasticSideJet>;

impl AcousticModel {
    pub fn new_acoustic(
        minus: AcousticSideJet,
        plus: AcousticSideJet,
        geometry: InterfaceGeometry,
    ) -> Result<Self, MediumError> {
        minus.validate()?;
        plus.validate()?;
        if minus.depth() != plus.depth() {
            return Err(MediumError::DepthMismatch);
        }
        let depth = minus.depth();
        Ok(InterfaceModel { minus, plus, geometry, depth })
    }

    pub fn max_speed(&self) -> f64 {
        self.minus.cs.value().max(self.plus.cs.value())
    }
}

impl ElasticModel {
    pub fn new_elastic(
        minus: ElasticSideJet,
        plus: ElasticSideJet,
        geometry: InterfaceGeometry,
    ) -> Result<Self, MediumError> {
        minus.validate()?;
        plus.validate()?;
        if minus.depth() != plus.depth() {
            return Err(MediumError::DepthMismatch);
        }
        let depth = minus.depth();
        Ok(InterfaceModel { minus, plus, geometry, depth })
    }

    pub fn max_speed(&self) -> f64 {
        self.minus.cp.value().max(self.plus.cp.value())
    }

    /// SH sub-problem as an acoustic model with (rho, c_S).
    pub fn shear_model(&self) -> AcousticModel {
        InterfaceModel {
            minus: self.minus.shear_part(),
            plus: self.plus.shear_part(),
            geometry: self.geometry,
            depth: self.depth,
        }
    }
}
