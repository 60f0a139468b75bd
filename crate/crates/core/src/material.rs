//! Elasticity tensors, acoustic tensors and material records.
//!
//! Stiffness is stored as a 6x6 Voigt matrix with index order
//! (11, 22, 33, 23, 13, 12) and no shear factors, so that `C[I][J]` equals
//! the tensor component `C^{ijkl}` for `I ~ (ij)` and `J ~ (kl)`.

use nalgebra::{Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::{Mat3, Vec3};

const GPA: f64 = 1.0e9;

/// Voigt index of the symmetric pair `(i, j)`.
pub const fn voigt_index(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) | (2, 1) => 3,
        (0, 2) | (2, 0) => 4,
        _ => 5,
    }
}

/// Rank-4 elasticity tensor with the major and minor symmetries.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessTensor {
    voigt: Matrix6<f64>,
}

impl StiffnessTensor {
    /// Builds a tensor from a Voigt matrix in Pa. The matrix must be
    /// symmetric to 1e-12 relative; it is symmetrised exactly.
    pub fn from_voigt(voigt: Matrix6<f64>) -> Result<Self> {
        if voigt.iter().any(|x| !x.is_finite()) {
            return Err(Error::Schema("stiffness matrix has non-finite entries".into()));
        }
        let defect = symmetry_defect(&voigt);
        if defect > 1e-12 {
            return Err(Error::NonSymmetric(defect));
        }
        Ok(Self {
            voigt: (voigt + voigt.transpose()).scale(0.5),
        })
    }

    pub fn voigt(&self) -> &Matrix6<f64> {
        &self.voigt
    }

    /// Tensor component `C^{ijkl}`.
    #[inline]
    pub fn component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.voigt[(voigt_index(i, j), voigt_index(k, l))]
    }

    /// Eigenvalues of the raw Voigt matrix, ascending.
    pub fn voigt_eigenvalues(&self) -> [f64; 6] {
        sorted6(SymmetricEigen::new(self.voigt).eigenvalues.as_slice())
    }

    /// Eigenvalues of `C` as a self-adjoint map on symmetric tensors
    /// (Mandel-normalised Voigt matrix), ascending. These are invariant
    /// under rotations.
    pub fn tensor_eigenvalues(&self) -> [f64; 6] {
        let w = [1.0, 1.0, 1.0, 2f64.sqrt(), 2f64.sqrt(), 2f64.sqrt()];
        let mandel = Matrix6::from_fn(|i, j| self.voigt[(i, j)] * w[i] * w[j]);
        sorted6(SymmetricEigen::new(mandel).eigenvalues.as_slice())
    }

    /// Positive definiteness on symmetric tensors. The Voigt and Mandel
    /// forms are congruent, so either set of eigenvalues decides it.
    pub fn is_strongly_convex(&self) -> bool {
        self.voigt_eigenvalues()[0] > 0.0
    }

    /// Lamé parameters if the tensor is isotropic to `rel_tol`.
    pub fn lame_parameters(&self, rel_tol: f64) -> Option<(f64, f64)> {
        let lambda = self.voigt[(0, 1)];
        let mu = self.voigt[(3, 3)];
        let iso = isotropic_stiffness(lambda, mu);
        let scale = self.voigt.abs().max();
        if scale == 0.0 {
            return None;
        }
        let diff = (self.voigt - iso.voigt).abs().max();
        (diff <= rel_tol * scale).then_some((lambda, mu))
    }
}

fn sorted6(s: &[f64]) -> [f64; 6] {
    let mut v = [0.0; 6];
    v.copy_from_slice(s);
    v.sort_by(f64::total_cmp);
    v
}

fn symmetry_defect(m: &Matrix6<f64>) -> f64 {
    let scale = m.abs().max();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).abs().max() / scale
}

/// Isotropic stiffness `lambda g g + mu (g g + g g)`.
pub fn isotropic_stiffness(lambda: f64, mu: f64) -> StiffnessTensor {
    let mut v = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            v[(i, j)] = lambda;
        }
        v[(i, i)] = lambda + 2.0 * mu;
        v[(i + 3, i + 3)] = mu;
    }
    StiffnessTensor { voigt: v }
}

/// Acoustic tensor `c(xi, eta)` with components `C^{ijkl} xi_j eta_l`.
pub fn acoustic_tensor(c: &StiffnessTensor, xi: &Vec3, eta: &Vec3) -> Mat3 {
    Mat3::from_fn(|i, k| {
        let mut acc = 0.0;
        for j in 0..3 {
            for l in 0..3 {
                acc += c.component(i, j, k, l) * xi[j] * eta[l];
            }
        }
        acc
    })
}

/// `n` quasi-uniform unit vectors on the sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Outcome of [`validate_stiffness`]. Failed checks are flags, not errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub symmetry_defect: f64,
    pub symmetric: bool,
    pub min_voigt_eigenvalue: f64,
    pub min_tensor_eigenvalue: f64,
    /// Smallest eigenvalue of `c(eta)` over 50 Fibonacci-sphere directions.
    pub ellipticity_delta: f64,
    pub elliptic: bool,
    pub convex: bool,
}

pub fn validate_stiffness(c: &StiffnessTensor) -> ValidationReport {
    let defect = symmetry_defect(&c.voigt);
    let voigt_min = c.voigt_eigenvalues()[0];
    let delta = fibonacci_sphere(50)
        .iter()
        .map(|eta| symmetric_eigenvalues(&acoustic_tensor(c, eta, eta))[0])
        .fold(f64::INFINITY, f64::min);
    ValidationReport {
        symmetry_defect: defect,
        symmetric: defect <= 1e-12,
        min_voigt_eigenvalue: voigt_min,
        min_tensor_eigenvalue: c.tensor_eigenvalues()[0],
        ellipticity_delta: delta,
        elliptic: delta > 0.0,
        convex: voigt_min > 0.0,
    }
}

/// Applies `C'^{ijkl} = R^i_p R^j_q R^k_r R^l_s C^{pqrs}`.
pub fn rotate_stiffness(c: &StiffnessTensor, r: &Mat3) -> Result<StiffnessTensor> {
    let ortho = (r.transpose() * r - Mat3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    let defect = ortho.max(det);
    if defect > 1e-10 {
        return Err(Error::NotRotation(defect));
    }
    let mut full = [[[[0.0f64; 3]; 3]; 3]; 3];
    for (p, fp) in full.iter_mut().enumerate() {
        for (q, fq) in fp.iter_mut().enumerate() {
            for (rr, fr) in fq.iter_mut().enumerate() {
                for (s, v) in fr.iter_mut().enumerate() {
                    *v = c.component(p, q, rr, s);
                }
            }
        }
    }
    // Contract one index at a time.
    let contract = |t: &[[[[f64; 3]; 3]; 3]; 3], slot: usize| {
        let mut out = [[[[0.0f64; 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let idx = [i, j, k, l];
                        let mut acc = 0.0;
                        for m in 0..3 {
                            let mut src = idx;
                            src[slot] = m;
                            acc += r[(idx[slot], m)] * t[src[0]][src[1]][src[2]][src[3]];
                        }
                        out[i][j][k][l] = acc;
                    }
                }
            }
        }
        out
    };
    for slot in 0..4 {
        full = contract(&full, slot);
    }
    let pairs = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
    let voigt = Matrix6::from_fn(|a, b| {
        let (i, j) = pairs[a];
        let (k, l) = pairs[b];
        full[i][j][k][l]
    });
    StiffnessTensor::from_voigt((voigt + voigt.transpose()).scale(0.5))
}

/// Material point: stiffness, density and a label.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub stiffness: StiffnessTensor,
    pub density: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, stiffness: StiffnessTensor, density: f64) -> Result<Self> {
        if !(density > 0.0) || !density.is_finite() {
            return Err(Error::NonPositiveDensity);
        }
        Ok(Self {
            name: name.into(),
            stiffness,
            density,
        })
    }

    pub fn isotropic(name: impl Into<String>, lambda: f64, mu: f64, density: f64) -> Result<Self> {
        Self::new(name, isotropic_stiffness(lambda, mu), density)
    }

    /// Serialises to the `voigt_gpa` JSON record.
    pub fn to_json(&self) -> String {
        let matrix = (0..6)
            .map(|i| (0..6).map(|j| self.stiffness.voigt[(i, j)] / GPA).collect())
            .collect();
        let rec = MaterialRecord {
            name: self.name.clone(),
            density_kg_m3: self.density,
            stiffness: Some(VoigtRecord {
                format: "voigt_gpa".into(),
                matrix,
            }),
            isotropic: None,
        };
        serde_json::to_string_pretty(&rec).expect("material record serialises")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialRecord {
    name: String,
    density_kg_m3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stiffness: Option<VoigtRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    isotropic: Option<IsotropicRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VoigtRecord {
    format: String,
    matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IsotropicRecord {
    lambda_gpa: f64,
    mu_gpa: f64,
}

/// Parses a material JSON record (GPa on input, Pa internally).
pub fn parse_material(text: &str) -> Result<Material> {
    let rec: MaterialRecord = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let stiffness = match (rec.stiffness, rec.isotropic) {
        (Some(v), None) => {
            if v.format != "voigt_gpa" {
                return Err(Error::Schema(format!("unsupported stiffness format {:?}", v.format)));
            }
            if v.matrix.len() != 6 || v.matrix.iter().any(|row| row.len() != 6) {
                return Err(Error::Schema("stiffness matrix must be 6x6".into()));
            }
            StiffnessTensor::from_voigt(Matrix6::from_fn(|i, j| v.matrix[i][j] * GPA))?
        }
        (None, Some(iso)) => {
            if !iso.lambda_gpa.is_finite() || !iso.mu_gpa.is_finite() {
                return Err(Error::Schema("Lamé parameters must be finite".into()));
            }
            isotropic_stiffness(iso.lambda_gpa * GPA, iso.mu_gpa * GPA)
        }
        _ => {
            return Err(Error::Schema(
                "exactly one of \"stiffness\" or \"isotropic\" is required".into(),
            ))
        }
    };
    Material::new(rec.name, stiffness, rec.density_kg_m3)
}

/// Orthonormal boundary frame: unit conormal and unit tangential direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFrame {
    normal: Vec3,
    tangent: Vec3,
}

impl SurfaceFrame {
    /// Strict constructor: inputs must already be orthonormal to 1e-12.
    pub fn new(normal: Vec3, tangent: Vec3) -> Result<Self> {
        let defect = (normal.norm() - 1.0)
            .abs()
            .max((tangent.norm() - 1.0).abs())
            .max(normal.dot(&tangent).abs());
        if defect > 1e-12 {
            return Err(Error::DegenerateFrame(format!("frame not orthonormal (defect {defect:.3e})")));
        }
        Ok(Self { normal, tangent })
    }

    /// Normalises the normal and projects the tangent onto its orthogonal
    /// complement. Returns the frame and the orthogonality defect of the
    /// raw input, `|<n, t>| / (|n| |t|)`.
    pub fn orthonormalize(normal: Vec3, tangent: Vec3) -> Result<(Self, f64)> {
        let nn = normal.norm();
        let tn = tangent.norm();
        if !(nn > 0.0 && nn.is_finite()) {
            return Err(Error::DegenerateFrame("zero normal".into()));
        }
        if !(tn > 0.0 && tn.is_finite()) {
            return Err(Error::DegenerateFrame("zero tangent".into()));
        }
        let n = normal / nn;
        let defect = n.dot(&tangent).abs() / tn;
        let t = tangent - n * n.dot(&tangent);
        if t.norm() < 1e-6 * tn {
            return Err(Error::DegenerateFrame("tangent parallel to normal".into()));
        }
        Ok((
            Self {
                normal: n,
                tangent: t.normalize(),
            },
            defect,
        ))
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn tangent(&self) -> Vec3 {
        self.tangent
    }

    /// Third frame vector `nu x xi_hat`.
    pub fn binormal(&self) -> Vec3 {
        self.normal.cross(&self.tangent)
    }

    /// Columns `(nu, xi_hat, nu x xi_hat)`; `B^T m B` expresses `m` in the
    /// frame used by the isotropic block formulas.
    pub fn basis(&self) -> Mat3 {
        Mat3::from_columns(&[self.normal, self.tangent, self.binormal()])
    }

    /// The same normal with the tangent rotated by `theta` inside the
    /// tangent plane.
    pub fn rotated(&self, theta: f64) -> Self {
        let t = self.tangent * theta.cos() + self.binormal() * theta.sin();
        Self {
            normal: self.normal,
            tangent: t.normalize(),
        }
    }

    /// Frame with the given normal and a deterministic tangent built from
    /// the coordinate axis least aligned with it.
    pub fn from_normal(normal: Vec3) -> Result<Self> {
        let nn = normal.norm();
        if !(nn > 0.0 && nn.is_finite()) {
            return Err(Error::DegenerateFrame("zero normal".into()));
        }
        let n = normal / nn;
        let axis = (0..3)
            .min_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()))
            .unwrap_or(0);
        let mut e = Vec3::zeros();
        e[axis] = 1.0;
        Ok(Self::orthonormalize(n, e)?.0)
    }
}
