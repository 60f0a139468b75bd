//! Closed forms of the impedance and factor entries, generic over dual
//! numbers so that every partial derivative comes from forward-mode
//! differentiation of the same expressions.

use num_dual::{Dual64, DualNum};

use super::{hermitian_pattern, IsoSurfaceState};
use crate::CMat2;

/// Parameter order of [`DerivativeRecord::d_zeta`] and `d_kappa`.
pub const PARAMS: [&str; 4] = ["lambda", "mu", "rho", "xi"];

/// `zeta = [zeta1, zeta2, zeta3, zeta_perp]`,
/// `kappa = [kappa11, kappa12, kappa21, kappa22, kappa_perp]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForms<D> {
    pub t: D,
    pub u: D,
    pub b: D,
    pub m: D,
    pub zeta: [D; 4],
    pub kappa: [D; 5],
}

/// Closed forms in terms of `(c_s, c_p, mu, |xi|)`.
pub fn closed_forms_speeds<D: DualNum<Primitive = f64> + Copy>(cs: D, cp: D, mu: D, xi: D) -> ClosedForms<D> {
    let one = D::from(1.0);
    let t = (cs * xi).powi(2).recip();
    let u = (cs / cp).powi(2);
    let r1 = (one - t).sqrt();
    let r2 = (one - u * t).sqrt();
    // 1 - r1 r2 without cancellation at small t
    let b = t * (one + u - u * t) / (one + r1 * r2);
    let m = mu * xi / b;
    let kb = xi / b;
    ClosedForms {
        t,
        u,
        b,
        m,
        zeta: [m * t * r1, m * (b * 2.0 - t), m * t * r2, mu * xi * r1],
        kappa: [kb * u * t * r1, kb * (b - u * t), kb * (b - t), kb * t * r2, xi * r1],
    }
}

/// Closed forms in terms of `(lambda, mu, rho, |xi|)`.
pub fn closed_forms<D: DualNum<Primitive = f64> + Copy>(lambda: D, mu: D, rho: D, xi: D) -> ClosedForms<D> {
    let cs = (mu / rho).sqrt();
    let cp = ((lambda + mu * 2.0) / rho).sqrt();
    closed_forms_speeds(cs, cp, mu, xi)
}

/// Values and partial derivatives of the closed forms at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeRecord {
    pub zeta: [f64; 4],
    pub kappa: [f64; 5],
    /// `d_zeta[p][j] = d zeta_j / d PARAMS[p]`.
    pub d_zeta: [[f64; 4]; 4],
    pub d_kappa: [[f64; 5]; 4],
    /// Partials of `kappa` in `c_s` and `c_p` at fixed `|xi|`.
    pub d_kappa_cs: [f64; 5],
    pub d_kappa_cp: [f64; 5],
    /// Radial derivatives `|xi| d/d|xi|`.
    pub zeta_dot: [f64; 4],
    pub kappa_dot: [f64; 5],
    /// `d (iq)_11 / d c_s`
    pub k_s: CMat2,
    /// `d (iq)_11 / d c_p`
    pub k_p: CMat2,
    /// `|xi| d (iq)_11 / d|xi|`
    pub k_dot: CMat2,
}

fn kappa_matrix(k: &[f64; 5]) -> CMat2 {
    hermitian_pattern(k[0], k[1], k[2], k[3])
}

pub fn iso_scalar_derivatives(st: &IsoSurfaceState) -> DerivativeRecord {
    let base = [st.lambda, st.mu, st.rho, st.xi_mag];
    let mut d_zeta = [[0.0; 4]; 4];
    let mut d_kappa = [[0.0; 5]; 4];
    for p in 0..4 {
        let x: [Dual64; 4] = std::array::from_fn(|i| {
            let d = Dual64::from(base[i]);
            if i == p {
                d.derivative()
            } else {
                d
            }
        });
        let f = closed_forms(x[0], x[1], x[2], x[3]);
        d_zeta[p] = f.zeta.map(|z| z.eps);
        d_kappa[p] = f.kappa.map(|k| k.eps);
    }
    let speeds = |seed: usize| {
        let cs = Dual64::from(st.c_s);
        let cp = Dual64::from(st.c_p);
        let (cs, cp) = if seed == 0 { (cs.derivative(), cp) } else { (cs, cp.derivative()) };
        closed_forms_speeds(cs, cp, Dual64::from(st.mu), Dual64::from(st.xi_mag)).kappa.map(|k| k.eps)
    };
    let d_kappa_cs = speeds(0);
    let d_kappa_cp = speeds(1);
    let values = st.closed_forms();
    let zeta_dot = d_zeta[3].map(|d| d * st.xi_mag);
    let kappa_dot = d_kappa[3].map(|d| d * st.xi_mag);
    DerivativeRecord {
        zeta: values.zeta,
        kappa: values.kappa,
        d_zeta,
        d_kappa,
        d_kappa_cs,
        d_kappa_cp,
        zeta_dot,
        kappa_dot,
        k_s: kappa_matrix(&d_kappa_cs),
        k_p: kappa_matrix(&d_kappa_cp),
        k_dot: kappa_matrix(&kappa_dot),
    }
}
