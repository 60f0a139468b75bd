//! Subprincipal symbol of the Rayleigh operator for isotropic media, by two
//! assembly routes: the closed 2x2 formula, and the general ingredients
//! (full 3x3 `z_-` solve, `z_dot`, kernel trace term).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::derivatives::{iso_scalar_derivatives, DerivativeRecord};
use super::symbol::{c_contract_s, div_x_c};
use super::{embed, hermitian_pattern, rayleigh_cubic_root, IsoSurfaceState};
use crate::error::{Error, Result};
use crate::impedance::{solve_zminus, subprincipal_from_ingredients, sylvester_solve};
use crate::linalg::to_complex;
use crate::{CMat2, CMat3, CVec3, Mat3, Vec3, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Tangential (`xi_hat`) or normal derivatives of the material fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gradients {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
}

impl Gradients {
    fn scaled(&self, a: f64) -> Self {
        Self {
            lambda: a * self.lambda,
            mu: a * self.mu,
            rho: a * self.rho,
        }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.lambda, self.mu, self.rho]
    }
}

/// Boundary curvature and material gradients at one point. The zero
/// record describes a flat homogeneous half-space.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureData {
    /// `<S xi_hat, xi_hat>`
    pub s22: f64,
    #[serde(rename = "trS")]
    pub tr_s: f64,
    /// Components along `xi_hat`.
    pub grad_t: Gradients,
    /// Derivatives along the collar variable `r`.
    pub dn: Gradients,
}

impl CurvatureData {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let all = [c.s22, c.tr_s]
            .into_iter()
            .chain(c.grad_t.as_array())
            .chain(c.dn.as_array());
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::Schema("curvature data must be finite".into()));
        }
        Ok(c)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            s22: a * self.s22,
            tr_s: a * self.tr_s,
            grad_t: self.grad_t.scaled(a),
            dn: self.dn.scaled(a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YTerms {
    pub y1: CMat2,
    pub y2: CMat2,
    pub y3: CMat2,
    /// `(iq)_11`
    pub k: CMat2,
    /// `diag(lambda + 2 mu, mu)`
    pub a: CMat2,
    pub m: CMat2,
    pub w1: [C64; 2],
    pub w2: [C64; 2],
    /// `d_r zeta_j`, `j = 1, 2, 3, perp`.
    pub dr_zeta: [f64; 4],
}

/// The three right-hand-side blocks of the 2x2 Sylvester equation for `X`.
pub fn build_y(st: &IsoSurfaceState, curv: &CurvatureData) -> YTerms {
    build_y_with(st, curv, &iso_scalar_derivatives(st))
}

fn build_y_with(st: &IsoSurfaceState, curv: &CurvatureData, d: &DerivativeRecord) -> YTerms {
    let (lambda, mu, rho, xi) = (st.lambda, st.mu, st.rho, st.xi_mag);
    let (t, u, b) = (st.t, st.u, st.b);
    let (s22, tr_s) = (curv.s22, curv.tr_s);
    let dn = curv.dn.as_array();
    let dr_zeta: [f64; 4] =
        std::array::from_fn(|j| (0..3).map(|p| d.d_zeta[p][j] * dn[p]).sum::<f64>() - s22 * d.zeta_dot[j]);

    let z11 = hermitian_pattern(d.zeta[0], d.zeta[1], d.zeta[1], d.zeta[2]);
    let y1 = z11 * C64::from(tr_s) + hermitian_pattern(dr_zeta[0], dr_zeta[1], dr_zeta[1], dr_zeta[2]);

    let k = hermitian_pattern(d.kappa[0], d.kappa[1], d.kappa[2], d.kappa[3]);
    let a1m = CMat2::new(
        C64::from(mu * tr_s),
        C64::from(curv.grad_t.mu),
        C64::from(curv.grad_t.lambda),
        C64::from(mu * tr_s + (lambda + mu) * s22),
    );
    let y2 = a1m * k;

    let r1 = (1.0 - t).sqrt();
    let r2 = (1.0 - u * t).sqrt();
    let mo = C64::from((u * t - b) * r1);
    let m = CMat2::new(C64::from(0.0), mo, mo, I * (u * t - t));
    let w1 = [C64::from((u * t - b) * r1), -I * (b - u * t)];
    let w2 = [I * (b - t), C64::from(r2 - r1)];
    let a = CMat2::new(C64::from(lambda + 2.0 * mu), C64::from(0.0), C64::from(0.0), C64::from(mu));
    let g = &curv.grad_t;
    let dcs = 0.5 * st.c_s * (g.mu / mu - g.rho / rho);
    let dcp = 0.5 * st.c_p * ((g.lambda + 2.0 * g.mu) / (lambda + 2.0 * mu) - g.rho / rho);
    let horizontal = d.k_s * C64::from(dcs / xi) + d.k_p * C64::from(dcp / xi) + m * C64::from(s22 / b);
    let outer = CMat2::from_fn(|i, j| w2[i].conj() * w1[j]);
    let y3 = d.k_dot.adjoint() * a * horizontal * I + outer * (I * (mu * xi * (tr_s - s22) / (b * b)));

    YTerms {
        y1,
        y2,
        y3,
        k,
        a,
        m,
        w1,
        w2,
        dr_zeta,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubprincipalBreakdown {
    pub state: IsoSurfaceState,
    pub curvature: CurvatureData,
    pub y: YTerms,
    pub k_dot: CMat2,
    pub k_s: CMat2,
    pub k_p: CMat2,
    pub zeta_dot: [f64; 4],
    /// Hermitian solution of `X K + K* X = -2 Y1 - Y2 - Y2* + Y3 + Y3*`.
    pub x: CMat2,
    pub x_hermiticity: f64,
    /// `Re(z_- w|w)` with `w = (mt/2)(i(2-t) nu + 2 sqrt(1-t) xi_hat)`.
    pub re_zminus_ww: f64,
    /// `gamma^2 Im tr(v* dv z . dh v)`, `gamma = |w|`.
    pub im_trace: f64,
    /// `(z_dot w|w)`.
    pub gamma2_lambda0dot: f64,
    /// `m^3 t^3 (4 - t) N`.
    pub gamma2_lambda0dot_closed: f64,
    pub n: f64,
    pub zminus_residual: f64,
    pub psub_direct: f64,
    pub psub_assembled: f64,
    /// The closed formula with weight `(1 - sigma^2)^2` on `x22` and
    /// `c_s tau_s / (c_p tau_p)` in `N`. Kept for comparison only; it does
    /// not match the assembled route.
    pub psub_display: f64,
    pub n_display: f64,
}

fn mat2_json(m: &CMat2) -> Value {
    json!({
        "re": [[m[(0, 0)].re, m[(0, 1)].re], [m[(1, 0)].re, m[(1, 1)].re]],
        "im": [[m[(0, 0)].im, m[(0, 1)].im], [m[(1, 0)].im, m[(1, 1)].im]],
    })
}

fn row_json(w: &[C64; 2]) -> Value {
    json!({"re": [w[0].re, w[1].re], "im": [w[0].im, w[1].im]})
}

impl SubprincipalBreakdown {
    pub fn to_json(&self) -> Value {
        json!({
            "psub_direct": self.psub_direct,
            "psub_assembled": self.psub_assembled,
            "psub_display": self.psub_display,
            "N_display": self.n_display,
            "state": self.state,
            "curvature": self.curvature,
            "Y1": mat2_json(&self.y.y1),
            "Y2": mat2_json(&self.y.y2),
            "Y3": mat2_json(&self.y.y3),
            "K": mat2_json(&self.y.k),
            "A": mat2_json(&self.y.a),
            "M": mat2_json(&self.y.m),
            "Kdot": mat2_json(&self.k_dot),
            "Ks": mat2_json(&self.k_s),
            "Kp": mat2_json(&self.k_p),
            "w1": row_json(&self.y.w1),
            "w2": row_json(&self.y.w2),
            "X": mat2_json(&self.x),
            "x_hermiticity": self.x_hermiticity,
            "zeta_dot": self.zeta_dot,
            "dr_zeta": self.y.dr_zeta,
            "re_zminus_ww": self.re_zminus_ww,
            "im_trace": self.im_trace,
            "gamma2_lambda0dot": self.gamma2_lambda0dot,
            "gamma2_lambda0dot_closed": self.gamma2_lambda0dot_closed,
            "N": self.n,
            "zminus_residual": self.zminus_residual,
        })
    }
}

fn to_dense(m: &CMat2) -> DMatrix<C64> {
    DMatrix::from_column_slice(2, 2, m.as_slice())
}

/// Subprincipal symbol at a point of the Rayleigh variety.
pub fn subprincipal_p(st: &IsoSurfaceState, curv: &CurvatureData) -> Result<SubprincipalBreakdown> {
    let t_root = rayleigh_cubic_root(st.u)?;
    if (st.t - t_root).abs() > 1e-12 || (st.c_r * st.xi_mag - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter("state is not on the Rayleigh variety".into()));
    }
    let d = iso_scalar_derivatives(st);
    let y = build_y_with(st, curv, &d);
    let rhs = -(y.y1 * C64::from(2.0)) - y.y2 - y.y2.adjoint() + y.y3 + y.y3.adjoint();
    let xd = sylvester_solve(&to_dense(&y.k), &to_dense(&rhs))?;
    let x = CMat2::from_column_slice(xd.as_slice());
    let xn = x.norm();
    let x_hermiticity = if xn > 0.0 { (x - x.adjoint()).norm() / xn } else { 0.0 };

    let (mu, c_r, t) = (st.mu, st.c_r, st.t);
    let sig2 = st.sigma_s * st.sigma_s;
    let tau = st.tau_s;
    let (tp, cs, cp) = (st.tau_p, st.c_s, st.c_p);
    // d/dp of 4 sqrt((1-t)(1-ut)) - (2-t)^2 along p = c_r |xi| carries u, not sqrt(u).
    let n = tau * (tp / tau + st.u * tau / tp + sig2 - 2.0);
    let n_verbatim = tau * (tp / tau + cs * tau / (cp * tp) + sig2 - 2.0);
    let (s22, tr_p) = (curv.s22, curv.tr_s - curv.s22);

    // |w_2|^2 = (mt)^2 (1 - t) fixes the x22 weight at (1 - sigma^2).
    let direct = |x22_weight: f64, n: f64| {
        ((c_r / (2.0 * mu))
            * (x[(0, 0)].re * (2.0 - sig2).powi(2)
                + 4.0 * x[(1, 1)].re * x22_weight
                + 4.0 * x[(0, 1)].im * (2.0 - sig2) * tau)
            + c_r * c_r / mu * (2.0 - sig2) * (2.0 * tau * d.zeta_dot[2] - (2.0 - sig2) * d.zeta_dot[1]) * s22
            + 2.0 * c_r / (4.0 - sig2) * (2.0 - sig2) * (5.0 * sig2 - 4.0 - sig2 * sig2) * tr_p)
            / (16.0 * n)
    };
    let psub_direct = direct(1.0 - sig2, n);
    let psub_display = direct((1.0 - sig2).powi(2), n_verbatim);

    // General route in the frame (nu, xi_hat, xi_hat_perp).
    let [z1, z2, z3, zp] = d.zeta;
    let z = embed(&hermitian_pattern(z1, z2, z2, z3), zp);
    let iq = embed(&y.k, d.kappa[4]);
    let q = iq * (-I);
    let dr_z = embed(
        &hermitian_pattern(y.dr_zeta[0], y.dr_zeta[1], y.dr_zeta[1], y.dr_zeta[2]),
        y.dr_zeta[3],
    );
    let nu = Vec3::x();
    let xi_vec = Vec3::y() * st.xi_mag;
    let grad_lambda = Vec3::y() * curv.grad_t.lambda;
    let grad_mu = Vec3::y() * curv.grad_t.mu;
    let shape = Mat3::from_diagonal(&Vec3::new(0.0, s22, tr_p));
    let a1m = div_x_c(&nu, &grad_lambda, &grad_mu) + c_contract_s(st.lambda, mu, &shape);
    let a2m = div_x_c(&xi_vec, &grad_lambda, &grad_mu);
    let mut trace_term = CMat3::zeros();
    trace_term.fixed_view_mut::<2, 2>(0, 0).copy_from(&(y.y3 * (-I)));
    let rhs3 = z * (I * curv.tr_s) + dr_z * I - to_complex(&a2m) - to_complex(&a1m) * q + trace_term;
    let a = to_complex(&Mat3::from_diagonal(&Vec3::new(st.lambda + 2.0 * mu, mu, mu)));
    let zm = solve_zminus(&q, &a, &rhs3)?;

    let w = CVec3::new(I * z2, C64::from(z1), C64::from(0.0));
    let gamma2 = w.norm_squared();
    let re_zminus_ww = w.dotc(&(zm.z_minus * w)).re;
    let [zd1, zd2, zd3, zdp] = d.zeta_dot;
    let z_dot = embed(&hermitian_pattern(zd1, zd2, zd2, zd3), zdp);
    let gamma2_lambda0dot = w.dotc(&(z_dot * w)).re;
    let im_trace = s22 * z2 * (z1 * zd3 - z2 * zd2) / st.xi_mag + z2 * (z1 * (z3 - zp) - z2 * z2) * tr_p / st.xi_mag;
    let v = w / C64::from(gamma2.sqrt());
    let psub_assembled = subprincipal_from_ingredients(&zm.z_minus, &z_dot, &v, im_trace / gamma2, 0.0);

    Ok(SubprincipalBreakdown {
        state: *st,
        curvature: *curv,
        k_dot: d.k_dot,
        k_s: d.k_s,
        k_p: d.k_p,
        zeta_dot: d.zeta_dot,
        y,
        x,
        x_hermiticity,
        re_zminus_ww,
        im_trace,
        gamma2_lambda0dot,
        gamma2_lambda0dot_closed: st.m.powi(3) * t.powi(3) * (4.0 - t) * n,
        n,
        zminus_residual: zm.residual,
        psub_direct,
        psub_assembled,
        psub_display,
        n_display: n_verbatim,
    })
}
