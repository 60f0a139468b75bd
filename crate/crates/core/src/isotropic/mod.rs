//! Closed forms for isotropic media and the subprincipal symbol of the
//! Rayleigh operator.
//!
//! Block matrices use the frame `(nu, xi_hat)` for the plane `V` spanned by
//! the conormal and the covector, and `nu x xi_hat` for its complement.

mod derivatives;
mod subprincipal;
mod symbol;

pub use derivatives::{closed_forms, closed_forms_speeds, iso_scalar_derivatives, ClosedForms, DerivativeRecord, PARAMS};
pub use subprincipal::{build_y, subprincipal_p, CurvatureData, Gradients, SubprincipalBreakdown, YTerms};
pub use symbol::{c_contract_s, div_x_c, divxc_and_cs, iso_symbol_l};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::{CMat2, CMat3, CVec3, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Unique root in `(0, 1)` of `t^3 - 8 t^2 + (24 - 16u) t - 16(1 - u)`.
/// Accepts `0 < u < 3/4`, the whole strongly convex range.
pub fn rayleigh_cubic_root(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 0.75) {
        return Err(Error::InvalidParameter(format!("u = {u} outside (0, 3/4)")));
    }
    let f = |t: f64| ((t - 8.0) * t + 24.0 - 16.0 * u) * t - 16.0 * (1.0 - u);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // f(0) < 0 < f(1) = 1
    while hi - lo > 1e-16 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Scalar state of an isotropic medium at a covector of length `xi_mag`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsoSurfaceState {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub xi_mag: f64,
    pub c_s: f64,
    pub c_p: f64,
    pub c_r: f64,
    /// `(c_s |xi|)^-2`
    pub t: f64,
    /// `mu / (lambda + 2 mu)`
    pub u: f64,
    pub b: f64,
    pub sigma_s: f64,
    pub sigma_p: f64,
    pub tau_s: f64,
    pub tau_p: f64,
    /// `mu |xi| / b`
    pub m: f64,
}

impl IsoSurfaceState {
    pub fn new(lambda: f64, mu: f64, rho: f64, xi_mag: f64) -> Result<Self> {
        if !(mu > 0.0) || !(rho > 0.0) || !(xi_mag > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter("need mu, rho, |xi| > 0".into()));
        }
        let c_s = (mu / rho).sqrt();
        let t = (c_s * xi_mag).powi(-2);
        Self::with_t(lambda, mu, rho, xi_mag, t)
    }

    /// State on the Rayleigh variety: `|xi| = 1 / c_r` and `t` the exact
    /// cubic root.
    pub fn on_sigma(lambda: f64, mu: f64, rho: f64) -> Result<Self> {
        if !(mu > 0.0) || !(rho > 0.0) {
            return Err(Error::InvalidParameter("need mu, rho > 0".into()));
        }
        let u = mu / (lambda + 2.0 * mu);
        let t = rayleigh_cubic_root(u)?;
        let c_r = (mu / rho).sqrt() * t.sqrt();
        Self::with_t(lambda, mu, rho, 1.0 / c_r, t)
    }

    fn with_t(lambda: f64, mu: f64, rho: f64, xi_mag: f64, t: f64) -> Result<Self> {
        let u = mu / (lambda + 2.0 * mu);
        let tr = rayleigh_cubic_root(u)?;
        let c_s = (mu / rho).sqrt();
        let c_p = ((lambda + 2.0 * mu) / rho).sqrt();
        let c_r = c_s * tr.sqrt();
        let b = t * (1.0 + u - u * t) / (1.0 + (1.0 - u * t).sqrt() * (1.0 - t).sqrt());
        let sigma_s = c_r / c_s;
        let sigma_p = c_r / c_p;
        Ok(Self {
            lambda,
            mu,
            rho,
            xi_mag,
            c_s,
            c_p,
            c_r,
            t,
            u,
            b,
            sigma_s,
            sigma_p,
            tau_s: (1.0 - sigma_s * sigma_s).sqrt(),
            tau_p: (1.0 - sigma_p * sigma_p).sqrt(),
            m: mu * xi_mag / b,
        })
    }

    pub fn is_elliptic(&self) -> bool {
        self.t < 1.0
    }

    pub fn closed_forms(&self) -> ClosedForms<f64> {
        closed_forms(self.lambda, self.mu, self.rho, self.xi_mag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoBlocks {
    pub iq11: CMat2,
    pub z11: CMat2,
    pub det_z11: f64,
    /// `mu |xi| sqrt(1 - t)`
    pub z22_scalar: f64,
    /// `|xi| sqrt(1 - t)`
    pub iq22_scalar: f64,
}

impl IsoBlocks {
    /// Full 3x3 matrices in the frame `(nu, xi_hat, nu x xi_hat)`.
    pub fn z_full(&self) -> CMat3 {
        embed(&self.z11, self.z22_scalar)
    }

    pub fn iq_full(&self) -> CMat3 {
        embed(&self.iq11, self.iq22_scalar)
    }
}

/// Block-diagonal 3x3 matrix with a 2x2 block and a scalar.
pub fn embed(block: &CMat2, scalar: f64) -> CMat3 {
    let mut m = CMat3::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(block);
    m[(2, 2)] = C64::from(scalar);
    m
}

/// `[[x11, -i x12], [i x21, x22]]`
pub fn hermitian_pattern(x11: f64, x12: f64, x21: f64, x22: f64) -> CMat2 {
    CMat2::new(C64::from(x11), -I * x12, I * x21, C64::from(x22))
}

pub fn iso_blocks(st: &IsoSurfaceState) -> Result<IsoBlocks> {
    if !st.is_elliptic() {
        return Err(Error::NotElliptic(1.0 - st.t));
    }
    let f = st.closed_forms();
    let (t, u, b) = (f.t, f.u, f.b);
    let det = st.mu * st.mu * st.xi_mag * st.xi_mag / b * (4.0 * ((1.0 - t) * (1.0 - u * t)).sqrt() - (2.0 - t).powi(2));
    Ok(IsoBlocks {
        iq11: hermitian_pattern(f.kappa[0], f.kappa[1], f.kappa[2], f.kappa[3]),
        z11: hermitian_pattern(f.zeta[0], f.zeta[1], f.zeta[1], f.zeta[2]),
        det_z11: det,
        z22_scalar: f.zeta[3],
        iq22_scalar: f.kappa[4],
    })
}

/// Unit kernel vector `i(2 - t) nu + 2 sqrt(1 - t) xi_hat` in the frame
/// `(nu, xi_hat, nu x xi_hat)`; its `xi_hat` component is real positive.
pub fn iso_kernel_vector(t_on_sigma: f64) -> CVec3 {
    CVec3::new(
        I * (2.0 - t_on_sigma),
        C64::from(2.0 * (1.0 - t_on_sigma).sqrt()),
        C64::from(0.0),
    )
    .normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_c;

    #[test]
    fn cubic_root_reference_values() {
        let t = rayleigh_cubic_root(1.0 / 3.0).unwrap();
        assert!((t - (2.0 - 2.0 / 3f64.sqrt())).abs() < 1e-14);
        assert!((t.sqrt() - 0.9194).abs() < 1e-4);
        let t0 = rayleigh_cubic_root(1e-12).unwrap();
        assert!(((2.0 - t0).powi(4) - 16.0 * (1.0 - t0)).abs() < 1e-10);
        assert!((t0 - 0.9126).abs() < 1e-4);
        assert!(rayleigh_cubic_root(0.0).is_err());
        assert!(rayleigh_cubic_root(0.8).is_err());
    }

    #[test]
    fn secular_bracket_vanishes_at_root() {
        for u in [0.05, 0.2, 1.0 / 3.0, 0.45] {
            let t = rayleigh_cubic_root(u).unwrap();
            assert!((4.0 * ((1.0 - t) * (1.0 - u * t)).sqrt() - (2.0 - t).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_state_perpendicular_impedance() {
        let st = IsoSurfaceState::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let bl = iso_blocks(&st).unwrap();
        assert!((bl.z22_scalar - 3f64.sqrt()).abs() < 1e-15);
        assert!((bl.z11 - bl.z11.adjoint()).norm() < 1e-15);
    }

    #[test]
    fn on_sigma_identities() {
        for (l, m) in [(1.0, 1.0), (3.0, 0.5), (0.2, 2.0)] {
            let st = IsoSurfaceState::on_sigma(l, m, 2.0).unwrap();
            let t = st.t;
            assert!((2.0 * (2.0 * st.b - t) - t * (2.0 - t)).abs() < 1e-12);
            let bl = iso_blocks(&st).unwrap();
            assert!(bl.det_z11.abs() < 1e-11 * norm_c(&bl.z_full()).powi(2));
            let v = iso_kernel_vector(t);
            assert!((bl.z_full() * v).norm() <= 1e-9 * norm_c(&bl.z_full()));
            assert!(st.c_r < st.c_s && st.c_s < st.c_p);
        }
    }

    #[test]
    fn non_elliptic_state_rejected() {
        let st = IsoSurfaceState::new(1.0, 1.0, 1.0, 0.5).unwrap();
        assert!(iso_blocks(&st).is_err());
    }
}
