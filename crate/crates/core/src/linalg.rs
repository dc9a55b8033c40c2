//! Dense complex linear-algebra helpers shared by the analysis modules.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Vectorization is column-major
//! throughout, so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[inline]
pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(k: usize) -> CMatrix {
    CMatrix::identity(k, k)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * cplx(0.5, 0.0)
}

/// Largest singular value. All-zero rows and columns are dropped first, so
/// sparse operators (matrix-unit combinations) stay cheap.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    let rows: Vec<usize> = (0..m.nrows())
        .filter(|&i| m.row(i).iter().any(|z| *z != Complex64::new(0.0, 0.0)))
        .collect();
    let cols: Vec<usize> = (0..m.ncols())
        .filter(|&j| m.column(j).iter().any(|z| *z != Complex64::new(0.0, 0.0)))
        .collect();
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    if rows.len() == 1 || cols.len() == 1 {
        let mut s = 0.0;
        for &i in &rows {
            for &j in &cols {
                s += m[(i, j)].norm_sqr();
            }
        }
        return s.sqrt();
    }
    let sub = CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]);
    sub.singular_values().iter().cloned().fold(0.0_f64, f64::max)
}

/// Eigenvalues of a general complex square matrix via the complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = Schur::try_new(m.clone(), 1e-15, 100_000)
        .ok_or_else(|| Error::NumericalFailure("complex Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending with the
/// matching eigenvectors as columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// `m^p` for a positive semidefinite `m`, with eigenvalues floored at `floor`
/// before exponentiation. Returns the power and the condition number of the
/// floored spectrum.
pub fn psd_power(m: &CMatrix, p: f64, floor: f64) -> (CMatrix, f64) {
    let (vals, vecs) = hermitian_eigen(m);
    let clipped: Vec<f64> = vals.iter().map(|&x| x.max(floor)).collect();
    let lo = clipped.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = clipped.iter().cloned().fold(0.0_f64, f64::max);
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(
        clipped.len(),
        clipped.iter().map(|&x| cplx(x.powf(p), 0.0)),
    ));
    (&vecs * diag * vecs.adjoint(), hi / lo)
}

/// Positive and negative parts `(m₊, m₋)` of a Hermitian matrix, `m = m₊ − m₋`,
/// eigenvalues within `clip` of zero discarded.
pub fn positive_negative_parts(m: &CMatrix, clip: f64) -> (CMatrix, CMatrix) {
    let n = m.nrows();
    let (vals, vecs) = hermitian_eigen(m);
    let mut plus = zeros(n, n);
    let mut minus = zeros(n, n);
    for (i, &lambda) in vals.iter().enumerate() {
        let col = vecs.column(i);
        let proj = col * col.adjoint();
        if lambda > clip {
            plus += proj * cplx(lambda, 0.0);
        } else if lambda < -clip {
            minus += proj * cplx(-lambda, 0.0);
        }
    }
    (plus, minus)
}

/// Orthonormal basis (as columns) of the `dim`-dimensional approximate kernel of
/// a square matrix: the right singular vectors of the `dim` smallest singular values.
pub fn near_kernel(m: &CMatrix, dim: usize) -> Result<CMatrix> {
    let n = m.ncols();
    if dim == 0 {
        return Ok(zeros(n, 0));
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::NumericalFailure("SVD did not return right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut basis = zeros(n, dim);
    for (c, &i) in order.iter().take(dim).enumerate() {
        let v = v_t.row(i).adjoint();
        basis.set_column(c, &v);
    }
    Ok(basis)
}

/// Incrementally built orthonormal basis of a subspace of `k×k` matrices,
/// with membership decided by the residual after projection.
#[derive(Debug, Clone)]
pub struct SpanBasis {
    vectors: Vec<CVector>,
    tol: f64,
}

impl SpanBasis {
    pub fn new(tol: f64) -> Self {
        SpanBasis {
            vectors: Vec::new(),
            tol,
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Adds `m` if it is independent of the current span (relative residual
    /// above tolerance). Returns whether the span grew.
    pub fn insert(&mut self, m: &CMatrix) -> bool {
        let mut v = vectorize(m);
        let scale = v.norm();
        if scale == 0.0 {
            return false;
        }
        // two Gram-Schmidt passes
        for _ in 0..2 {
            for b in &self.vectors {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let r = v.norm();
        if r <= self.tol * scale {
            return false;
        }
        self.vectors.push(v / cplx(r, 0.0));
        true
    }
}

/// Dimension of the unital algebra generated by `generators` and their
/// adjoints, built by multiplying newly found elements by generators until no
/// new direction appears or words reach `max_word_len`.
pub fn generated_algebra_dim(generators: &[CMatrix], k: usize, max_word_len: usize, tol: f64) -> usize {
    let mut gens: Vec<CMatrix> = Vec::with_capacity(2 * generators.len());
    for g in generators {
        gens.push(g.clone());
        gens.push(g.adjoint());
    }
    let mut span = SpanBasis::new(tol);
    span.insert(&identity(k));
    let mut frontier = vec![identity(k)];
    let full = k * k;
    for _ in 0..max_word_len {
        let mut next = Vec::new();
        for f in &frontier {
            for g in &gens {
                let p = f * g;
                if span.insert(&p) {
                    next.push(p);
                }
                if span.dim() == full {
                    return full;
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    span.dim()
}

/// HS-orthonormal Hermitian basis of `M_k`: `I/√k` first, then the
/// off-diagonal symmetric and antisymmetric generators, then traceless diagonals.
pub fn hermitian_basis(k: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(k * k);
    out.push(identity(k) * cplx(1.0 / (k as f64).sqrt(), 0.0));
    let s = 1.0 / 2f64.sqrt();
    for j in 0..k {
        for l in (j + 1)..k {
            let mut a = zeros(k, k);
            a[(j, l)] = cplx(s, 0.0);
            a[(l, j)] = cplx(s, 0.0);
            out.push(a);
            let mut b = zeros(k, k);
            b[(j, l)] = cplx(0.0, -s);
            b[(l, j)] = cplx(0.0, s);
            out.push(b);
        }
    }
    for m in 1..k {
        let norm = 1.0 / ((m * (m + 1)) as f64).sqrt();
        let mut a = zeros(k, k);
        for j in 0..m {
            a[(j, j)] = cplx(norm, 0.0);
        }
        a[(m, m)] = cplx(-(m as f64) * norm, 0.0);
        out.push(a);
    }
    out
}

/// Left multiplication `A ↦ x A` as a `k²×k²` matrix on column-major vectors.
pub fn left_mult_matrix(x: &CMatrix) -> CMatrix {
    kron(&identity(x.nrows()), x)
}

/// Right multiplication `A ↦ A a` as a `k²×k²` matrix on column-major vectors.
pub fn right_mult_matrix(a: &CMatrix) -> CMatrix {
    kron(&a.transpose(), &identity(a.nrows()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(k: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        CMatrix::from_fn(k, k, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 33) as f64) / (1u64 << 31) as f64 - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((s >> 33) as f64) / (1u64 << 31) as f64 - 0.5;
            cplx(a, b)
        })
    }

    #[test]
    fn vec_identity_matches_kron() {
        let a = sample(3, 1);
        let x = sample(3, 2);
        let b = sample(3, 3);
        let lhs = vectorize(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vectorize(&x);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn left_and_right_actions_commute() {
        let l = left_mult_matrix(&sample(3, 4));
        let r = right_mult_matrix(&sample(3, 5));
        assert!(max_abs(&(&l * &r - &r * &l)) < 1e-12);
    }

    #[test]
    fn hermitian_basis_is_orthonormal() {
        let basis = hermitian_basis(3);
        assert_eq!(basis.len(), 9);
        for (i, a) in basis.iter().enumerate() {
            assert!(max_abs(&(a - a.adjoint())) < 1e-15);
            for (j, b) in basis.iter().enumerate() {
                let ip = trace_product(&a.adjoint(), b);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - cplx(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_norm_of_sparse_and_dense() {
        let mut m = zeros(5, 5);
        m[(1, 3)] = cplx(2.0, 0.0);
        m[(4, 3)] = cplx(0.0, 2.0);
        assert!((spectral_norm(&m) - 8f64.sqrt()).abs() < 1e-12);
        let u = identity(4) * cplx(0.0, 1.0);
        assert!((spectral_norm(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn positive_negative_parts_reconstruct() {
        let a = sample(4, 9);
        let h = hermitian_part(&a);
        let (p, n) = positive_negative_parts(&h, 1e-12);
        assert!(max_abs(&(&p - &n - &h)) < 1e-12);
        assert!(hermitian_eigenvalues(&p)[0] > -1e-12);
        assert!(hermitian_eigenvalues(&n)[0] > -1e-12);
    }

    #[test]
    fn pauli_algebra_is_full() {
        let x = CMatrix::from_row_slice(2, 2, &[cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0)]);
        let z = CMatrix::from_row_slice(2, 2, &[cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(-1.0, 0.0)]);
        assert_eq!(generated_algebra_dim(&[x.clone(), z], 2, 8, 1e-10), 4);
        assert_eq!(generated_algebra_dim(&[x], 2, 8, 1e-10), 2);
    }

    #[test]
    fn eigenvalues_of_triangular() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                cplx(1.0, 0.0), cplx(2.0, 0.0), cplx(0.0, 1.0),
                cplx(0.0, 0.0), cplx(-0.5, 0.0), cplx(3.0, 0.0),
                cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 2.0),
            ],
        );
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let expect = [cplx(-0.5, 0.0), cplx(0.0, 2.0), cplx(1.0, 0.0)];
        for (a, b) in ev.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
