//! Surface impedance `z = i(a q + a1)`, its identity residuals, dense
//! Sylvester solves and the radial derivative of `z`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{complex_eigenvalues, hermitian_eigen, hermitian_part, hermiticity_defect, norm_c, solve_linear_matrix_map, to_complex};
use crate::polyfactor::{factor_integral, factor_residuals, QuadraticPencil, SpectralFactor};
use crate::{CMat3, CVec3, C64};

/// Raw hermiticity defects above this indicate a broken factor.
pub const HERMITICITY_FAIL: f64 = 1e-6;
/// Relative threshold below which an eigenvalue of `z` counts as non-positive.
pub const NONPOSITIVE_TOL: f64 = 1e-9;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceData {
    /// Hermitian part of `i(a q + a1)`.
    pub z: CMat3,
    pub q: CMat3,
    /// `int f(s)^-1 ds` when the factor came from quadrature.
    pub f0: Option<CMat3>,
    /// `|z_raw - z_raw*| / |z_raw|`.
    pub hermiticity_defect: f64,
}

impl ImpedanceData {
    /// `iq`, whose spectrum lies in the right half-plane.
    pub fn iq(&self) -> CMat3 {
        self.q * I
    }
}

pub fn impedance_tensor(p: &QuadraticPencil, sf: &SpectralFactor) -> Result<ImpedanceData> {
    let raw = (to_complex(&p.a) * sf.q + to_complex(&p.a1)) * I;
    let defect = hermiticity_defect(&raw);
    if !(defect <= HERMITICITY_FAIL) {
        return Err(Error::Hermiticity(defect));
    }
    Ok(ImpedanceData {
        z: hermitian_part(&raw),
        q: sf.q,
        f0: sf.f0,
        hermiticity_defect: defect,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpedanceDiagnostics {
    pub hermiticity: f64,
    /// `|(z + i a1^T) a^-1 (z - i a1) - (a2 - rho)|`, relative to the size of
    /// the left-hand terms.
    pub riccati: f64,
    /// `|Re z - pi f0^-1| / |z|`.
    pub barnett_lothe: f64,
    pub solvency: f64,
    pub re_z_min_eigenvalue: f64,
    /// Eigenvalues of `z`, ascending.
    pub z_eigenvalues: [f64; 3],
    /// Eigenvalues `<= 1e-9 |z|`.
    pub nonpositive_count: usize,
}

pub fn riccati_residual(p: &QuadraticPencil, z: &CMat3) -> f64 {
    let a = to_complex(&p.a);
    let Some(ainv) = a.try_inverse() else {
        return f64::INFINITY;
    };
    let a1 = to_complex(&p.a1);
    let lhs = (z + a1.transpose() * I) * ainv * (z - a1 * I);
    let scale = (norm_c(z) + p.a1.norm()).powi(2) / p.a.norm();
    norm_c(&(lhs - to_complex(&p.c()))) / scale
}

pub fn impedance_diagnostics(d: &ImpedanceData, p: &QuadraticPencil) -> ImpedanceDiagnostics {
    let zn = norm_c(&d.z);
    let f0 = d.f0.or_else(|| factor_integral(p).ok().map(|f| f.f0));
    let barnett_lothe = f0
        .and_then(|f0| f0.try_inverse())
        .map(|inv| {
            let re_z = d.z.map(|x| C64::new(x.re, 0.0));
            norm_c(&(re_z - inv * C64::from(std::f64::consts::PI))) / zn
        })
        .unwrap_or(f64::INFINITY);
    let re_z = d.z.map(|x| C64::new(x.re, 0.0));
    let (re_ev, _) = hermitian_eigen(&re_z);
    let (ev, _) = hermitian_eigen(&d.z);
    ImpedanceDiagnostics {
        hermiticity: d.hermiticity_defect,
        riccati: riccati_residual(p, &d.z),
        barnett_lothe,
        solvency: factor_residuals(p, &d.q).solvency,
        re_z_min_eigenvalue: re_ev[0],
        z_eigenvalues: ev,
        nonpositive_count: ev.iter().filter(|&&l| l <= NONPOSITIVE_TOL * zn).count(),
    }
}

fn dense_norm(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `A* X + X A = B` for square `A`, `B` by the Kronecker system.
/// Requires `min |l_i + conj l_j| > 1e-10 |A|` over the spectrum of `A`.
pub fn sylvester_solve(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::InvalidParameter("Sylvester operands must be square and of equal size".into()));
    }
    let ev = complex_eigenvalues(a).ok_or_else(|| Error::EigenFailure("Schur form of A".into()))?;
    let sep = ev
        .iter()
        .flat_map(|x| ev.iter().map(move |y| (x + y.conj()).norm()))
        .fold(f64::INFINITY, f64::min);
    let scale = dense_norm(a);
    if !(sep > 1e-10 * scale) {
        return Err(Error::SingularSylvester(sep / scale));
    }
    let ah = a.adjoint();
    solve_linear_matrix_map(n, b, |e| &ah * e + e * a).ok_or(Error::SingularSylvester(sep / scale))
}

/// [`sylvester_solve`] for 3x3 operands.
pub fn sylvester_solve3(a: &CMat3, b: &CMat3) -> Result<CMat3> {
    let x = sylvester_solve(
        &DMatrix::from_column_slice(3, 3, a.as_slice()),
        &DMatrix::from_column_slice(3, 3, b.as_slice()),
    )?;
    Ok(CMat3::from_column_slice(x.as_slice()))
}

/// `z_dot = z + X` with `(iq)* X + X (iq) = 2 rho`, the derivative of
/// `t -> z(t xi)` at `t = 1`.
pub fn radial_derivative_z(d: &ImpedanceData, rho: f64) -> Result<CMat3> {
    let x = sylvester_solve3(&d.iq(), &(CMat3::identity() * C64::from(2.0 * rho)))?;
    Ok(hermitian_part(&(d.z + x)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZMinus {
    pub z_minus: CMat3,
    /// `q_- = -i a^-1 z_-`.
    pub q_minus: CMat3,
    /// `|z_- q - q* z_- - rhs| / |rhs|` (absolute when `rhs = 0`).
    pub residual: f64,
}

/// Solves `z_- q - q* z_- = rhs`. The map is invertible because the
/// spectra of `q` and `q*` lie in opposite half-planes.
pub fn solve_zminus(q: &CMat3, a: &CMat3, rhs: &CMat3) -> Result<ZMinus> {
    let qd = DMatrix::from_column_slice(3, 3, q.as_slice());
    let ev = complex_eigenvalues(&qd).ok_or_else(|| Error::EigenFailure("Schur form of q".into()))?;
    let sep = ev
        .iter()
        .flat_map(|x| ev.iter().map(move |y| (x - y.conj()).norm()))
        .fold(f64::INFINITY, f64::min);
    let scale = norm_c(q);
    if !(sep > 1e-10 * scale) {
        return Err(Error::SingularSylvester(sep / scale));
    }
    let qh = qd.adjoint();
    let b = DMatrix::from_column_slice(3, 3, rhs.as_slice());
    let x = solve_linear_matrix_map(3, &b, |e| e * &qd - &qh * e).ok_or(Error::SingularSylvester(sep / scale))?;
    let z_minus = CMat3::from_column_slice(x.as_slice());
    let ainv = a
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("a is singular".into()))?;
    let defect = norm_c(&(z_minus * q - q.adjoint() * z_minus - rhs));
    let rn = norm_c(rhs);
    Ok(ZMinus {
        z_minus,
        q_minus: ainv * z_minus * (-I),
        residual: if rn > 0.0 { defect / rn } else { defect },
    })
}

/// Subprincipal symbol on the Rayleigh variety from its ingredients:
/// `(z_dot v|v)^-1 (Re(z_- v|v) + im_trace) + im_p_term`, where `v` is a
/// unit kernel vector, `im_trace = Im tr(v* dv z . dh v)` and
/// `im_p_term = Im tr(dh p . dv v* . v)`.
pub fn subprincipal_from_ingredients(
    z_minus: &CMat3,
    z_dot: &CMat3,
    v: &CVec3,
    im_trace: f64,
    im_p_term: f64,
) -> f64 {
    let re_zm = v.dotc(&(z_minus * v)).re;
    let lambda0_dot = v.dotc(&(z_dot * v)).re;
    (re_zm + im_trace) / lambda0_dot + im_p_term
}
