//! Limiting speeds, Rayleigh speeds as roots of `det z` along radial lines,
//! polarisation (kernel) vectors, direction scans and kernel phase transport.
//!
//! Along a unit tangential direction `eta` the root variable is the speed
//! `c`, with `xi = eta / c`.

use std::cell::RefCell;

use rayon::prelude::*;
use roots::{find_root_brent, Convergency};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::impedance::{impedance_tensor, radial_derivative_z, riccati_residual, ImpedanceData};
use crate::linalg::{adjugate, hermitian_eigen, norm_c};
use crate::material::{Material, SurfaceFrame};
use crate::polyfactor::{build_pencil, is_elliptic, spectral_factor, QuadraticPencil};
use crate::{CMat3, CVec3, Vec3, C64};

const LIMIT_REL_TOL: f64 = 1e-10;
const ROOT_REL_TOL: f64 = 1e-12;
const WALK_FACTOR: f64 = 0.99;
const WALK_MAX_STEPS: usize = 2000;
/// Rays are searched down to this fraction of the limiting speed.
pub const FLOOR_FRACTION: f64 = 1e-3;
const START_FRACTION: f64 = 1.0 - 1e-6;
/// Environment variable capping scan parallelism.
pub const THREADS_ENV: &str = "RAYLEIGH_THREADS";

/// Largest speed `c` such that the pencil at `xi = eta / c` is elliptic.
pub fn limiting_speed(mat: &Material, frame: &SurfaceFrame) -> Result<f64> {
    let ev = mat.stiffness.tensor_eigenvalues();
    if !(ev[0] > 0.0) {
        return Err(Error::Bracket("material is not strongly convex".into()));
    }
    let elliptic_at = |c: f64| is_elliptic(&build_pencil(mat, frame, 1.0 / c)).elliptic;
    // c(eta) <= lambda_max |eta|^2, so nothing is elliptic at or above hi;
    // f(s) >= lambda_min (1 + s^2) / (2 c^2) - rho, so lo is strictly elliptic.
    let mut hi = (ev[5] / mat.density).sqrt();
    let mut lo = 0.9 * (ev[0] / (2.0 * mat.density)).sqrt();
    if elliptic_at(hi) {
        return Err(Error::Bracket("pencil elliptic at the upper bound".into()));
    }
    if !elliptic_at(lo) {
        return Err(Error::Bracket("pencil not elliptic at the lower bound".into()));
    }
    while hi - lo > LIMIT_REL_TOL * lo {
        let mid = 0.5 * (lo + hi);
        if elliptic_at(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Impedance at `xi = frame.tangent() / c`.
pub fn impedance_at_speed(mat: &Material, frame: &SurfaceFrame, c: f64) -> Result<(QuadraticPencil, ImpedanceData)> {
    let p = build_pencil(mat, frame, 1.0 / c);
    let sf = spectral_factor(&p)?;
    let d = impedance_tensor(&p, &sf)?;
    Ok((p, d))
}

/// `det z(eta / c)`, real because `z` is Hermitian.
pub fn det_z(mat: &Material, frame: &SurfaceFrame, c: f64) -> Result<f64> {
    Ok(impedance_at_speed(mat, frame, c)?.1.z.determinant().re)
}

/// `det z / (|a| |xi|)^3`, the dimensionless root function.
fn scaled_det(mat: &Material, frame: &SurfaceFrame, c: f64) -> Result<f64> {
    let (p, d) = impedance_at_speed(mat, frame, c)?;
    Ok(d.z.determinant().re * (c / p.a.norm()).powi(3))
}

struct RelTol {
    tol: f64,
    max_iter: usize,
}

impl Convergency<f64> for RelTol {
    fn is_root_found(&mut self, y: f64) -> bool {
        y == 0.0
    }

    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= self.tol * x1.abs().max(x2.abs())
    }

    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= self.max_iter
    }
}

/// Rayleigh data along one direction. Fields after `c_lim` are present
/// exactly when `exists`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayleighPoint {
    pub normal: [f64; 3],
    pub direction: [f64; 3],
    pub c_lim: f64,
    pub exists: bool,
    pub c_r: Option<f64>,
    /// Unit kernel vector of `z`, phase-fixed.
    #[serde(skip)]
    pub kernel: Option<CVec3>,
    /// `(d/dt) det z(t xi)` at the root, divided by `|z|^3`.
    pub slope: Option<f64>,
    /// `|z v| / |z|`.
    pub res_kernel: Option<f64>,
    pub res_riccati: Option<f64>,
    /// Eigenvalues of `z` at the root, ascending.
    pub z_eigenvalues: Option<[f64; 3]>,
}

impl RayleighPoint {
    /// Kernel as `[re0, im0, re1, im1, re2, im2]`.
    pub fn kernel_components(&self) -> Option<[f64; 6]> {
        self.kernel.map(|v| [v[0].re, v[0].im, v[1].re, v[1].im, v[2].re, v[2].im])
    }
}

/// Phase convention: `<v, xi_hat>` real positive when it exceeds 1e-6 in
/// modulus, else the largest component real positive.
pub fn fix_phase(v: &CVec3, xi_hat: &Vec3) -> CVec3 {
    let along: C64 = (0..3).map(|i| v[i] * xi_hat[i]).sum();
    let pivot = if along.norm() > 1e-6 {
        along
    } else {
        let j = (0..3).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).unwrap_or(0);
        v[j]
    };
    if pivot.norm() == 0.0 {
        return *v;
    }
    v * (pivot.conj() / pivot.norm())
}

/// Root of `det z(eta / c)` on `(0, c_lim)` plus kernel and slope.
pub fn rayleigh_point(mat: &Material, frame: &SurfaceFrame) -> Result<RayleighPoint> {
    let c_lim = limiting_speed(mat, frame)?;
    rayleigh_point_with_limit(mat, frame, c_lim)
}

pub(crate) fn rayleigh_point_with_limit(mat: &Material, frame: &SurfaceFrame, c_lim: f64) -> Result<RayleighPoint> {
    let mut point = RayleighPoint {
        normal: frame.normal().into(),
        direction: frame.tangent().into(),
        c_lim,
        exists: false,
        c_r: None,
        kernel: None,
        slope: None,
        res_kernel: None,
        res_riccati: None,
        z_eigenvalues: None,
    };
    let Some((lo, hi)) = bracket_root(mat, frame, c_lim)? else {
        return Ok(point);
    };
    let failure = RefCell::new(None);
    // The Brent implementation re-evaluates bracket endpoints; memoise them.
    let seen = RefCell::new(Vec::<(f64, f64)>::with_capacity(64));
    let g = |c: f64| {
        if let Some(&(_, v)) = seen.borrow().iter().rev().find(|(x, _)| *x == c) {
            return v;
        }
        let v = match scaled_det(mat, frame, c) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        };
        seen.borrow_mut().push((c, v));
        v
    };
    let mut conv = RelTol {
        tol: ROOT_REL_TOL,
        max_iter: 200,
    };
    let root = find_root_brent(lo, hi, &g, &mut conv);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let c_r = root.map_err(|e| Error::Bracket(format!("Brent refinement failed: {e:?}")))?;

    let (p, d) = impedance_at_speed(mat, frame, c_r)?;
    let (ev, vecs) = hermitian_eigen(&d.z);
    let k = (0..3).min_by(|&a, &b| ev[a].abs().total_cmp(&ev[b].abs())).unwrap_or(0);
    let v = fix_phase(&vecs.column(k).into_owned(), &frame.tangent());
    let zn = norm_c(&d.z);
    let zdot = radial_derivative_z(&d, mat.density)?;
    let slope = (adjugate(&d.z) * zdot).trace().re / zn.powi(3);
    point.exists = true;
    point.c_r = Some(c_r);
    point.kernel = Some(v);
    point.slope = Some(slope);
    point.res_kernel = Some((d.z * v).norm() / zn);
    point.res_riccati = Some(riccati_residual(&p, &d.z));
    point.z_eigenvalues = Some(ev);
    Ok(point)
}

/// Walks down from just below `c_lim` in geometric steps until `det z`
/// changes sign. Returns `None` when no change occurs above the floor.
fn bracket_root(mat: &Material, frame: &SurfaceFrame, c_lim: f64) -> Result<Option<(f64, f64)>> {
    let floor = FLOOR_FRACTION * c_lim;
    let mut c_prev = START_FRACTION * c_lim;
    let mut g_prev = scaled_det(mat, frame, c_prev)?;
    for _ in 0..WALK_MAX_STEPS {
        if g_prev == 0.0 {
            return Ok(Some((c_prev, c_prev * (1.0 + ROOT_REL_TOL))));
        }
        let c = c_prev * WALK_FACTOR;
        if c < floor {
            return Ok(None);
        }
        let g = scaled_det(mat, frame, c)?;
        if g.signum() != g_prev.signum() {
            return Ok(Some((c, c_prev)));
        }
        c_prev = c;
        g_prev = g;
    }
    Ok(None)
}

/// `p(xi) = |xi| c_r(xi / |xi|)` for a tangential covector `xi`.
pub fn eval_p(mat: &Material, normal: &Vec3, xi: &Vec3) -> Result<f64> {
    let (frame, defect) = SurfaceFrame::orthonormalize(*normal, *xi)?;
    if defect > 1e-9 {
        return Err(Error::InvalidParameter("xi is not tangential".into()));
    }
    let pt = rayleigh_point(mat, &frame)?;
    pt.c_r.map(|c| c * xi.norm()).ok_or(Error::NoRoot)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub theta: f64,
    pub point: RayleighPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scan {
    pub rows: Vec<ScanRow>,
    pub e1_satisfied: bool,
    pub c_r_min: Option<f64>,
    pub c_r_max: Option<f64>,
}

pub const SCAN_HEADER: [&str; 13] = [
    "theta_rad",
    "c_lim_mps",
    "exists",
    "c_r_mps",
    "slope",
    "v_re_0",
    "v_im_0",
    "v_re_1",
    "v_im_1",
    "v_re_2",
    "v_im_2",
    "res_kernel",
    "res_riccati",
];

/// Shortest round-trip text, with an exponent outside `[1e-4, 1e15)`.
/// Locale-independent by construction.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

impl Scan {
    /// CSV text with the fixed header; absent values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SCAN_HEADER).expect("in-memory write");
        for row in &self.rows {
            let p = &row.point;
            let mut rec = vec![
                format_f64(row.theta),
                format_f64(p.c_lim),
                p.exists.to_string(),
                opt(p.c_r),
                opt(p.slope),
            ];
            match p.kernel_components() {
                Some(k) => rec.extend(k.iter().copied().map(format_f64)),
                None => rec.extend(std::iter::repeat_n(String::new(), 6)),
            }
            rec.push(opt(p.res_kernel));
            rec.push(opt(p.res_riccati));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("ascii output")
    }
}

/// Thread count for scans: `RAYLEIGH_THREADS` if set and positive, else
/// the number of available cores.
pub fn scan_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Frames of the `n` equally spaced tangential directions at `nu`, with
/// `theta_k = 2 pi k / n` measured from a deterministic tangent.
pub fn scan_frames(nu: &Vec3, n: usize) -> Result<Vec<(f64, SurfaceFrame)>> {
    let base = SurfaceFrame::from_normal(*nu)?;
    Ok((0..n)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / n as f64;
            (theta, base.rotated(theta))
        })
        .collect())
}

/// Rayleigh points for `n` directions, using [`scan_threads`] workers.
pub fn scan_directions(mat: &Material, nu: &Vec3, n: usize) -> Result<Scan> {
    scan_directions_with_threads(mat, nu, n, scan_threads())
}

pub fn scan_directions_with_threads(mat: &Material, nu: &Vec3, n: usize, threads: usize) -> Result<Scan> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!("scan needs at least 4 directions, got {n}")));
    }
    let frames = scan_frames(nu, n)?;
    let run = || -> Result<Vec<ScanRow>> {
        frames
            .par_iter()
            .map(|(theta, frame)| {
                Ok(ScanRow {
                    theta: *theta,
                    point: rayleigh_point(mat, frame)?,
                })
            })
            .collect()
    };
    let rows = if threads <= 1 {
        frames
            .iter()
            .map(|(theta, frame)| {
                Ok(ScanRow {
                    theta: *theta,
                    point: rayleigh_point(mat, frame)?,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run)?
    };
    let speeds: Vec<f64> = rows.iter().filter_map(|r| r.point.c_r).collect();
    Ok(Scan {
        e1_satisfied: rows.iter().all(|r| r.point.exists),
        c_r_min: speeds.iter().copied().reduce(f64::min),
        c_r_max: speeds.iter().copied().reduce(f64::max),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Holonomy {
    /// Phase of the transported kernel after one loop, in `(-pi, pi]`.
    pub total_phase: f64,
    /// Largest `1 - |<v_k, v_k+1>|` along the loop.
    pub max_gap: f64,
    pub min_overlap: f64,
    /// Some step had overlap below 0.9.
    pub undersampled: bool,
}

/// Parallel transport of the kernel around the direction circle.
pub fn holonomy_from_kernels(kernels: &[CVec3]) -> Holonomy {
    let n = kernels.len();
    let mut u = kernels[0];
    let mut min_overlap = f64::INFINITY;
    for k in 1..=n {
        let next = kernels[k % n];
        let o = u.dotc(&next);
        min_overlap = min_overlap.min(o.norm());
        u = if o.norm() > 0.0 { next * (o.conj() / o.norm()) } else { next };
    }
    Holonomy {
        total_phase: kernels[0].dotc(&u).arg(),
        max_gap: 1.0 - min_overlap,
        min_overlap,
        undersampled: min_overlap < 0.9,
    }
}

/// Holonomy of the kernel line over the `n`-point direction circle at `nu`.
/// Fails when some direction has no root, or when sampling is still
/// inadequate at `n >= 1024`.
pub fn kernel_phase_holonomy(mat: &Material, nu: &Vec3, n: usize) -> Result<Holonomy> {
    let scan = scan_directions(mat, nu, n)?;
    holonomy_of_scan(&scan)
}

pub fn holonomy_of_scan(scan: &Scan) -> Result<Holonomy> {
    let kernels: Option<Vec<CVec3>> = scan.rows.iter().map(|r| r.point.kernel).collect();
    let kernels = kernels.ok_or(Error::NoRoot)?;
    let h = holonomy_from_kernels(&kernels);
    if h.undersampled && kernels.len() >= 1024 {
        return Err(Error::SamplingInadequate(h.min_overlap));
    }
    Ok(h)
}

/// Hermitian `z` in the frame `(nu, xi_hat, nu x xi_hat)`.
pub fn z_in_frame(z: &CMat3, frame: &SurfaceFrame) -> CMat3 {
    let b = crate::linalg::to_complex(&frame.basis());
    b.transpose() * z * b
}
