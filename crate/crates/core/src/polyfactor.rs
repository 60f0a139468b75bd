//! The quadratic pencil `f(s) = a s^2 + (a1 + a1^T) s + a2 - rho` and its
//! spectral factor `q`, with `f(s) = (s - q*) a (s - q)` and
//! `spec q` in the open lower half-plane.
//!
//! All numerics run on a rescaled pencil `f~(sigma) = f(kappa sigma) / (alpha kappa^2)`
//! with `alpha = |a|` and `kappa^2 = |a2| / |a|`, so that every coefficient is
//! of order one whatever the units of the input.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, Matrix6, SVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, null_vectors, symmetric_eigenvalues, to_complex};
use crate::material::{acoustic_tensor, Material, StiffnessTensor, SurfaceFrame};
use crate::{CMat3, CVec3, Mat3, Vec3, C64};

/// Residual bound applied to both factor routes.
pub const FACTOR_TOL: f64 = 1e-8;
/// Ellipticity threshold on the normalised spectral margin.
pub const MARGIN_TOL: f64 = 1e-8;
const COND_LIMIT: f64 = 1e8;
const QUAD_TOL: f64 = 1e-10;
const QUAD_MAX_LEVEL: u32 = 10;
const GL_ORDER: usize = 16;
/// Relative solvency residual below which the eigen-route factor is kept as is.
const REFINE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPencil {
    /// `c(nu)`, symmetric positive definite.
    pub a: Mat3,
    /// `c(nu, xi)`.
    pub a1: Mat3,
    /// `c(xi)`, symmetric.
    pub a2: Mat3,
    pub rho: f64,
}

/// Pencil coefficients divided through by `alpha kappa^2`, in `sigma = s / kappa`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scaled {
    pub a: Mat3,
    pub b: Mat3,
    pub c: Mat3,
    pub alpha: f64,
    pub kappa: f64,
}

impl Scaled {
    pub fn eval(&self, sigma: C64) -> CMat3 {
        to_complex(&self.a) * (sigma * sigma) + to_complex(&self.b) * sigma + to_complex(&self.c)
    }
}

impl QuadraticPencil {
    /// Pencil for the conormal `nu` and an arbitrary tangential covector `xi`.
    pub fn from_covectors(c: &StiffnessTensor, rho: f64, nu: &Vec3, xi: &Vec3) -> Self {
        Self {
            a: acoustic_tensor(c, nu, nu),
            a1: acoustic_tensor(c, nu, xi),
            a2: acoustic_tensor(c, xi, xi),
            rho,
        }
    }

    /// Linear coefficient `a1 + a1^T`.
    pub fn b(&self) -> Mat3 {
        self.a1 + self.a1.transpose()
    }

    /// Constant coefficient `a2 - rho`.
    pub fn c(&self) -> Mat3 {
        self.a2 - Mat3::identity() * self.rho
    }

    pub fn eval(&self, s: C64) -> CMat3 {
        to_complex(&self.a) * (s * s) + to_complex(&self.b()) * s + to_complex(&self.c())
    }

    /// The pencil at `-xi`: `a1` changes sign, `a` and `a2` do not.
    pub fn reflected(&self) -> Self {
        Self {
            a1: -self.a1,
            ..self.clone()
        }
    }

    /// Length scale `kappa` of the variable `s`.
    pub fn kappa(&self) -> f64 {
        let na = self.a.norm();
        let n2 = self.a2.norm();
        if n2 > 0.0 {
            (n2 / na).sqrt()
        } else {
            (self.rho / na).sqrt()
        }
    }

    pub(crate) fn scaled(&self) -> Scaled {
        let alpha = self.a.norm();
        let kappa = self.kappa();
        Scaled {
            a: self.a / alpha,
            b: self.b() / (alpha * kappa),
            c: self.c() / (alpha * kappa * kappa),
            alpha,
            kappa,
        }
    }
}

/// Pencil at `xi = xi_mag * frame.tangent()` for the frame's conormal.
pub fn build_pencil(mat: &Material, frame: &SurfaceFrame, xi_mag: f64) -> QuadraticPencil {
    QuadraticPencil::from_covectors(
        &mat.stiffness,
        mat.density,
        &frame.normal(),
        &(frame.tangent() * xi_mag),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipticity {
    pub elliptic: bool,
    /// `min |Im sigma| / (1 + |sigma|)` over the scaled pencil spectrum.
    pub margin: f64,
}

fn companion_eigenvalues(sc: &Scaled) -> Option<Vec<C64>> {
    let ainv = sc.a.try_inverse()?;
    let k = -(ainv * sc.c);
    let l = -(ainv * sc.b);
    let mut m = Matrix6::<f64>::zeros();
    for i in 0..3 {
        m[(i, i + 3)] = 1.0;
        for j in 0..3 {
            m[(i + 3, j)] = k[(i, j)];
            m[(i + 3, j + 3)] = l[(i, j)];
        }
    }
    if m.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let schur = nalgebra::Schur::try_new(m, f64::EPSILON, 10_000)?;
    let ev = schur.complex_eigenvalues();
    Some(ev.iter().map(|z| C64::new(z.re, z.im)).collect())
}

fn margin_of(sigmas: &[C64]) -> f64 {
    sigmas
        .iter()
        .map(|s| s.im.abs() / (1.0 + s.norm()))
        .fold(f64::INFINITY, f64::min)
}

pub fn is_elliptic(p: &QuadraticPencil) -> Ellipticity {
    let sc = p.scaled();
    ellipticity_of(&sc, companion_eigenvalues(&sc).as_deref())
}

fn ellipticity_of(sc: &Scaled, ev: Option<&[C64]>) -> Ellipticity {
    let margin = ev.map_or(0.0, margin_of);
    let f0_pd = symmetric_eigenvalues(&sc.c)[0] > 0.0;
    Ellipticity {
        elliptic: margin > MARGIN_TOL && f0_pd,
        margin,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PencilEigenpair {
    pub s: C64,
    /// Unit vector with `f(s) v ~ 0`.
    pub v: CVec3,
}

/// Scaled eigenpairs sorted by imaginary part, lower half-plane first.
/// Eigenvalues closer than `1e-9 (1 + |sigma|)` form a cluster whose
/// eigenvectors are the null space of `f~` at the cluster mean.
fn scaled_eigenpairs(sc: &Scaled, ev: Option<Vec<C64>>) -> Result<Vec<(C64, CVec3)>> {
    let mut ev = ev.ok_or_else(|| Error::EigenFailure("companion Schur form did not converge".into()))?;
    if ev.len() != 6 || ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigenFailure("companion spectrum not finite".into()));
    }
    ev.sort_by(|x, y| x.im.total_cmp(&y.im).then(x.re.total_cmp(&y.re)));
    let mut out = Vec::with_capacity(6);
    let mut used = [false; 6];
    for i in 0..6 {
        if used[i] {
            continue;
        }
        let tol = 1e-9 * (1.0 + ev[i].norm());
        let members: Vec<usize> = (i..6).filter(|&j| !used[j] && (ev[j] - ev[i]).norm() <= tol).collect();
        let members = &members[..members.len().min(3)];
        let centre = members.iter().map(|&j| ev[j]).sum::<C64>() / members.len() as f64;
        let vecs = null_vectors(&sc.eval(centre), members.len());
        for (&j, v) in members.iter().zip(vecs) {
            used[j] = true;
            out.push((if members.len() > 1 { centre } else { ev[j] }, v));
        }
    }
    Ok(out)
}

/// The six eigenpairs of the companion linearisation, in physical units.
pub fn pencil_spectrum(p: &QuadraticPencil) -> Result<Vec<PencilEigenpair>> {
    let sc = p.scaled();
    Ok(scaled_eigenpairs(&sc, companion_eigenvalues(&sc))?
        .into_iter()
        .map(|(s, v)| PencilEigenpair { s: s * sc.kappa, v })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorMethod {
    Eigen,
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorResiduals {
    /// `|a q^2 + (a1 + a1^T) q + a2 - rho| / |a2|`.
    pub solvency: f64,
    /// Maximum relative defect of `f(s) = (s - q*) a (s - q)` at five real `s`.
    pub factor_max: f64,
}

pub fn factor_residuals(p: &QuadraticPencil, q: &CMat3) -> FactorResiduals {
    let a = to_complex(&p.a);
    let b = to_complex(&p.b());
    let c = to_complex(&p.c());
    let denom = if p.a2.norm() > 0.0 { p.a2.norm() } else { p.c().norm() };
    let solvency = (a * q * q + b * q + c).norm() / denom;
    let kappa = p.kappa();
    let id = CMat3::identity();
    let factor_max = [-3.0, -1.0, 0.0, 1.0, 3.0]
        .iter()
        .map(|&k| {
            let s = C64::new(k * kappa, 0.0);
            let f = p.eval(s);
            let prod = (id * s - q.adjoint()) * a * (id * s - q);
            (f - prod).norm() / f.norm()
        })
        .fold(0.0, f64::max);
    FactorResiduals { solvency, factor_max }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactor {
    pub q: CMat3,
    pub method: FactorMethod,
    pub residual_solvency: f64,
    pub residual_factorization: f64,
    /// Normalised distance of the pencil spectrum from the real axis.
    pub spectral_margin: f64,
    /// Condition number of the eigenvector matrix when the eigen route ran.
    pub eigvec_condition: Option<f64>,
    /// `f0` when the integral route produced `q`.
    pub f0: Option<CMat3>,
}

/// Output of the quadrature route.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralFactor {
    /// `int f(s)^-1 ds`, real symmetric positive definite.
    pub f0: CMat3,
    /// The split first moment, real.
    pub f1: CMat3,
    pub q: CMat3,
    pub nodes: usize,
    pub rel_change: f64,
}

fn gl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let gl = GaussLegendre::new(NonZeroUsize::new(GL_ORDER).expect("nonzero"));
        gl.into_node_weight_pairs().iter().map(|p| (p.0, p.1)).unzip()
    })
}

/// `(f~0, f~1)` with `2^level` Gauss-Legendre panels on each of the four
/// segments `[-pi/2, -pi/4, 0, pi/4, pi/2]` in `theta = atan sigma`.
fn quadrature_moments(sc: &Scaled, level: u32) -> Option<(Mat3, Mat3)> {
    let (nodes, weights) = gl_rule();
    let quarter = std::f64::consts::FRAC_PI_4;
    let panels = 1usize << level;
    let h = quarter / panels as f64;
    let mut f0 = Mat3::zeros();
    let mut f1 = Mat3::zeros();
    for seg in 0..4 {
        let lo = -2.0 * quarter + seg as f64 * quarter;
        let inner = seg == 1 || seg == 2;
        for panel in 0..panels {
            let mid = lo + (panel as f64 + 0.5) * h;
            for (x, w) in nodes.iter().zip(weights) {
                let theta = mid + 0.5 * h * x;
                let wt = 0.5 * h * w;
                let (sn, cs) = theta.sin_cos();
                let g0 = (sc.a * (sn * sn) + sc.b * (sn * cs) + sc.c * (cs * cs)).try_inverse()?;
                f0 += g0 * wt;
                if inner {
                    f1 += sc.a * g0 * (wt * sn / cs);
                } else {
                    f1 -= (sc.b + sc.c * (cs / sn)) * g0 * wt;
                }
            }
        }
    }
    Some((f0, f1))
}

fn rel_change(new: &(Mat3, Mat3), old: &(Mat3, Mat3)) -> f64 {
    let d = (new.0 - old.0).norm() + (new.1 - old.1).norm();
    d / (new.0.norm() + new.1.norm())
}

/// Spectral factor from the real quadratures `f0`, `f1` via
/// `a q f0 = -pi i + f1`.
pub fn factor_integral(p: &QuadraticPencil) -> Result<IntegralFactor> {
    let ell = is_elliptic(p);
    if !ell.elliptic {
        return Err(Error::NotElliptic(ell.margin));
    }
    let sc = p.scaled();
    let fail = || Error::QuadratureNonConvergence(f64::INFINITY);
    let mut prev = quadrature_moments(&sc, 0).ok_or_else(fail)?;
    let mut change = f64::INFINITY;
    let mut level = 0;
    while level < QUAD_MAX_LEVEL {
        level += 1;
        let next = quadrature_moments(&sc, level).ok_or_else(fail)?;
        change = rel_change(&next, &prev);
        prev = next;
        if change < QUAD_TOL {
            break;
        }
    }
    if !(change < QUAD_TOL) {
        return Err(Error::QuadratureNonConvergence(change));
    }
    let (f0s, f1s) = prev;
    let f0inv = f0s
        .try_inverse()
        .ok_or_else(|| Error::EigenFailure("f0 is singular".into()))?;
    let ainv = sc.a.try_inverse().ok_or_else(|| Error::EigenFailure("c(nu) is singular".into()))?;
    let qs = to_complex(&ainv) * (to_complex(&f1s) - CMat3::identity() * C64::new(0.0, std::f64::consts::PI)) * to_complex(&f0inv);
    Ok(IntegralFactor {
        f0: to_complex(&(f0s / (sc.alpha * sc.kappa))),
        f1: to_complex(&f1s),
        q: qs * C64::from(sc.kappa),
        nodes: 4 * GL_ORDER << level,
        rel_change: change,
    })
}

/// Eigen-route factor in scaled units, with the condition number of `V`.
fn factor_eigen_scaled(sc: &Scaled, ev: Option<Vec<C64>>) -> Result<(CMat3, f64)> {
    let pairs = scaled_eigenpairs(sc, ev)?;
    let lower: Vec<&(C64, CVec3)> = pairs.iter().filter(|(s, _)| s.im < 0.0).collect();
    if lower.len() != 3 {
        return Err(Error::EigenFailure(format!("{} eigenvalues in the lower half-plane", lower.len())));
    }
    let v = CMat3::from_columns(&[lower[0].1, lower[1].1, lower[2].1]);
    let cond = condition_number(&v);
    if !(cond <= COND_LIMIT) {
        return Err(Error::EigenFailure(format!("eigenvector matrix condition {cond:.3e}")));
    }
    let vinv = v
        .try_inverse()
        .ok_or_else(|| Error::EigenFailure("eigenvector matrix singular".into()))?;
    let s = CMat3::from_diagonal(&CVec3::new(lower[0].0, lower[1].0, lower[2].0));
    Ok((newton_refine(sc, v * s * vinv), cond))
}

/// Newton steps on `a q^2 + b q + c = 0` in scaled units, taken while the
/// relative residual exceeds [`REFINE_TOL`]. Each correction solves
/// `(q + a^-1 b) E + E q = -a^-1 R`; both spectra lie in the lower
/// half-plane, so the step is well posed even when `V` is nearly defective.
fn newton_refine(sc: &Scaled, mut q: CMat3) -> CMat3 {
    let (a, b, c) = (to_complex(&sc.a), to_complex(&sc.b), to_complex(&sc.c));
    let Some(ainv) = a.try_inverse() else {
        return q;
    };
    let rel = |q: &CMat3| {
        let r = a * q * q + b * q + c;
        let scale = sc.a.norm() * q.norm_squared() + sc.b.norm() * q.norm() + sc.c.norm();
        (r, r.norm() / scale)
    };
    let (mut r, mut err) = rel(&q);
    for _ in 0..2 {
        if err <= REFINE_TOL {
            break;
        }
        let Some(e) = solve_sylvester3(&(q + ainv * b), &q, &(-(ainv * r))) else {
            break;
        };
        let next = q + e;
        let (rn, en) = rel(&next);
        if !(en < err) {
            break;
        }
        (q, r, err) = (next, rn, en);
    }
    q
}

/// `L X + X R = B` for 3x3 operands through the 9x9 Kronecker system.
fn solve_sylvester3(l: &CMat3, r: &CMat3, b: &CMat3) -> Option<CMat3> {
    let id = CMat3::identity();
    let k = id.kronecker(l) + r.transpose().kronecker(&id);
    let x = k.lu().solve(&SVector::<C64, 9>::from_column_slice(b.as_slice()))?;
    x.iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
        .then(|| CMat3::from_column_slice(x.as_slice()))
}

/// Spectral factor by the eigen route, falling back to quadrature when the
/// eigenvectors are ill-conditioned or the residuals exceed `1e-8`.
pub fn spectral_factor(p: &QuadraticPencil) -> Result<SpectralFactor> {
    let sc = p.scaled();
    let ev = companion_eigenvalues(&sc);
    let ell = ellipticity_of(&sc, ev.as_deref());
    if !ell.elliptic {
        return Err(Error::NotElliptic(ell.margin));
    }
    let mut eig_cond = None;
    if let Ok((qs, cond)) = factor_eigen_scaled(&sc, ev) {
        eig_cond = Some(cond);
        let q = qs * C64::from(sc.kappa);
        let r = factor_residuals(p, &q);
        if r.solvency <= FACTOR_TOL && r.factor_max <= FACTOR_TOL {
            return Ok(SpectralFactor {
                q,
                method: FactorMethod::Eigen,
                residual_solvency: r.solvency,
                residual_factorization: r.factor_max,
                spectral_margin: ell.margin,
                eigvec_condition: Some(cond),
                f0: None,
            });
        }
    }
    let int = factor_integral(p)?;
    let r = factor_residuals(p, &int.q);
    if r.solvency <= FACTOR_TOL && r.factor_max <= FACTOR_TOL {
        Ok(SpectralFactor {
            q: int.q,
            method: FactorMethod::Integral,
            residual_solvency: r.solvency,
            residual_factorization: r.factor_max,
            spectral_margin: ell.margin,
            eigvec_condition: eig_cond,
            f0: Some(int.f0),
        })
    } else {
        Err(Error::FactorResidual {
            solvency: r.solvency,
            factorization: r.factor_max,
        })
    }
}

/// Eigen-route factor without fallback, for cross-checks.
pub fn factor_eigen(p: &QuadraticPencil) -> Result<CMat3> {
    let sc = p.scaled();
    let ev = companion_eigenvalues(&sc);
    let ell = ellipticity_of(&sc, ev.as_deref());
    if !ell.elliptic {
        return Err(Error::NotElliptic(ell.margin));
    }
    Ok(factor_eigen_scaled(&sc, ev)?.0 * C64::from(sc.kappa))
}

/// Eigenvalues of `q` as a dense complex matrix (via Schur).
pub fn factor_eigenvalues(q: &CMat3) -> Option<Vec<C64>> {
    crate::linalg::complex_eigenvalues(&DMatrix::from_iterator(3, 3, q.iter().copied()))
}
