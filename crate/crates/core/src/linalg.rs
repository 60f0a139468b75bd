//! Small dense helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};

use crate::{CMat3, CVec3, Mat3, C64};

pub fn to_complex(m: &Mat3) -> CMat3 {
    m.map(|x| C64::new(x, 0.0))
}

pub fn norm_c(m: &CMat3) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_part(m: &CMat3) -> CMat3 {
    (m + m.adjoint()).scale(0.5)
}

/// Relative distance from hermiticity, `|m - m*| / |m|`.
pub fn hermiticity_defect(m: &CMat3) -> f64 {
    let n = norm_c(m);
    if n == 0.0 {
        return 0.0;
    }
    norm_c(&(m - m.adjoint())) / n
}

/// Eigen-decomposition of a Hermitian 3x3 matrix with eigenvalues sorted
/// ascending; eigenvectors are the matching columns.
pub fn hermitian_eigen(m: &CMat3) -> ([f64; 3], CMat3) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = [
        eig.eigenvalues[idx[0]],
        eig.eigenvalues[idx[1]],
        eig.eigenvalues[idx[2]],
    ];
    let vecs = CMat3::from_columns(&[
        eig.eigenvectors.column(idx[0]).into_owned(),
        eig.eigenvectors.column(idx[1]).into_owned(),
        eig.eigenvectors.column(idx[2]).into_owned(),
    ]);
    (vals, vecs)
}

pub fn symmetric_eigenvalues(m: &Mat3) -> [f64; 3] {
    let sym = (m + m.transpose()).scale(0.5);
    let e = SymmetricEigen::new(sym).eigenvalues;
    let mut v = [e[0], e[1], e[2]];
    v.sort_by(f64::total_cmp);
    v
}

/// Right singular vectors of `m` belonging to its `k` smallest singular
/// values, most singular first.
pub fn null_vectors(m: &CMat3, k: usize) -> Vec<CVec3> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    idx.iter()
        .take(k)
        .map(|&i| v_t.row(i).adjoint().into_owned())
        .collect()
}

/// 2-norm condition number of a complex 3x3 matrix.
pub fn condition_number(m: &CMat3) -> f64 {
    let s = m.singular_values();
    let max = s.max();
    let min = s.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Adjugate (transposed cofactor matrix) of a complex 3x3 matrix.
pub fn adjugate(m: &CMat3) -> CMat3 {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)];
    Matrix3::new(
        c(1, 2, 1, 2),
        -c(0, 2, 1, 2),
        c(0, 1, 1, 2),
        -c(1, 2, 0, 2),
        c(0, 2, 0, 2),
        -c(0, 1, 0, 2),
        c(1, 2, 0, 1),
        -c(0, 2, 0, 1),
        c(0, 1, 0, 1),
    )
}

/// Eigenvalues of a general complex square matrix (diagonal of its Schur form).
pub fn complex_eigenvalues(m: &DMatrix<C64>) -> Option<Vec<C64>> {
    let schur = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 10_000)?;
    let (_, t) = schur.unpack();
    Some(t.diagonal().iter().copied().collect())
}

/// Solves the linear operator equation `L(X) = B` for an `n x n` unknown,
/// where `op` maps the `(i, j)` unit matrix to its image. The `n^2 x n^2`
/// matrix is assembled column by column and factored by partial-pivot LU.
pub fn solve_linear_matrix_map<F>(n: usize, b: &DMatrix<C64>, op: F) -> Option<DMatrix<C64>>
where
    F: Fn(&DMatrix<C64>) -> DMatrix<C64>,
{
    let nn = n * n;
    let mut k = DMatrix::<C64>::zeros(nn, nn);
    let mut unit = DMatrix::<C64>::zeros(n, n);
    for col in 0..nn {
        let (i, j) = (col % n, col / n);
        unit[(i, j)] = C64::new(1.0, 0.0);
        let img = op(&unit);
        unit[(i, j)] = C64::new(0.0, 0.0);
        for row in 0..nn {
            k[(row, col)] = img[(row % n, row / n)];
        }
    }
    let rhs = DVector::from_iterator(nn, b.iter().copied());
    let x = k.lu().solve(&rhs)?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some(DMatrix::from_column_slice(n, n, x.as_slice()))
}
