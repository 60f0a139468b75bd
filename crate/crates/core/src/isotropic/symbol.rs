//! Symbol-level formulas of the isotropic elastic operator at the boundary.

use crate::{CMat3, Mat3, Vec3, C64};

/// `(div_X c)(zeta) = grad_lambda zeta^T + zeta grad_mu^T + <zeta, grad_mu> Id`
/// for tangential gradients.
pub fn div_x_c(zeta: &Vec3, grad_lambda: &Vec3, grad_mu: &Vec3) -> Mat3 {
    grad_lambda * zeta.transpose() + zeta * grad_mu.transpose() + Mat3::identity() * zeta.dot(grad_mu)
}

/// `<C, S> = (lambda + mu) S + mu tr(S) Id` for isotropic `C`.
pub fn c_contract_s(lambda: f64, mu: f64, s: &Mat3) -> Mat3 {
    s * (lambda + mu) + Mat3::identity() * (mu * s.trace())
}

pub fn divxc_and_cs(
    zeta: &Vec3,
    grad_lambda: &Vec3,
    grad_mu: &Vec3,
    lambda: f64,
    mu: f64,
    s: &Mat3,
) -> (Mat3, Mat3) {
    (div_x_c(zeta, grad_lambda, grad_mu), c_contract_s(lambda, mu, s))
}

/// Principal and subprincipal parts of the symbol of `L - rho` at `xi`:
/// `rho (c_p^2 |xi|^2 - 1) P + rho (c_s^2 |xi|^2 - 1)(Id - P)` with
/// `P = xi_hat xi_hat^T`, and `-i (div_X c)(xi)`.
pub fn iso_symbol_l(
    lambda: f64,
    mu: f64,
    rho: f64,
    grad_lambda: &Vec3,
    grad_mu: &Vec3,
    xi: &Vec3,
) -> (Mat3, CMat3) {
    let n2 = xi.norm_squared();
    let p = xi * xi.transpose() / n2;
    let cp2 = (lambda + 2.0 * mu) / rho;
    let cs2 = mu / rho;
    let principal = p * (rho * (cp2 * n2 - 1.0)) + (Mat3::identity() - p) * (rho * (cs2 * n2 - 1.0));
    let sub = div_x_c(xi, grad_lambda, grad_mu).map(|x| C64::new(0.0, -x));
    (principal, sub)
}
