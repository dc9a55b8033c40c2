//! Popescu systems: validation, the Markov map and its predual, the invariant
//! density, and reduction to the faithful (support-restricted) form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cplx, eigenvalues, generated_algebra_dim, hermitian_eigen, identity, kron, near_kernel,
    spectral_norm, unvectorize, vectorize, CMatrix,
};

/// Numerical tolerances used across the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Bound on `‖Σ v v* − I‖`.
    pub cuntz: f64,
    /// Clustering tolerance for eigenvalues near the unit circle.
    pub spectral: f64,
    /// Generic comparison tolerance for derived identities.
    pub compare: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cuntz: 1e-9,
            spectral: 1e-8,
            compare: 1e-9,
        }
    }
}

/// A word `I = (i₁, …, i_m)` over the alphabet `{0, …, d−1}`. Letters are
/// zero-based; the first letter sits leftmost on the chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn new(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().cloned().collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.0.clone();
        letters.extend_from_slice(&other.0);
        Word(letters)
    }

    /// Position in the lexicographic enumeration of words of this length,
    /// which is also the row index in the tensor-product basis.
    pub fn index(&self, d: usize) -> usize {
        self.0.iter().fold(0, |acc, &a| acc * d + a)
    }

    pub fn from_index(mut index: usize, d: usize, len: usize) -> Word {
        let mut letters = vec![0; len];
        for slot in letters.iter_mut().rev() {
            *slot = index % d;
            index /= d;
        }
        Word(letters)
    }

    /// All `dⁿ` words of length `n`, lexicographically.
    pub fn all(d: usize, n: usize) -> Vec<Word> {
        let count = d.pow(n as u32);
        (0..count).map(|i| Word::from_index(i, d, n)).collect()
    }
}

/// `d` bond operators `v_k` on `C^k` with `Σ v_k v_k* = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopescuSystem {
    v: Vec<CMatrix>,
    k: usize,
    tol: f64,
    residual: f64,
}

/// Invariant density of the predual map and the multiplicity of eigenvalue 1.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantState {
    pub rho: CMatrix,
    pub fixed_dim: usize,
}

/// Transfer matrix of `x ↦ Σ v x v*` on column-major vectorized matrices.
pub(crate) fn transfer_matrix(v: &[CMatrix]) -> CMatrix {
    let k = v[0].nrows();
    let mut t = CMatrix::zeros(k * k, k * k);
    for vk in v {
        t += kron(&vk.conjugate(), vk);
    }
    t
}

pub(crate) fn cuntz_residual(v: &[CMatrix]) -> f64 {
    let k = v[0].nrows();
    let mut s = -identity(k);
    for vk in v {
        s += vk * vk.adjoint();
    }
    spectral_norm(&s)
}

impl PopescuSystem {
    /// Validates shapes and the relation `Σ v v* = I` to within `tol`.
    pub fn new(v: Vec<CMatrix>, tol: f64) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::ShapeMismatch(format!(
                "a Popescu system needs at least 2 operators, got {}",
                v.len()
            )));
        }
        let k = v[0].nrows();
        if k == 0 {
            return Err(Error::ShapeMismatch("bond dimension must be positive".into()));
        }
        for (i, m) in v.iter().enumerate() {
            if m.nrows() != k || m.ncols() != k {
                return Err(Error::ShapeMismatch(format!(
                    "operator {i} is {}x{}, expected {k}x{k}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::ShapeMismatch(format!("operator {i} has non-finite entries")));
            }
        }
        let residual = cuntz_residual(&v);
        if residual > tol {
            return Err(Error::CuntzRelationViolated { residual });
        }
        Ok(PopescuSystem { v, k, tol, residual })
    }

    pub fn d(&self) -> usize {
        self.v.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.v
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `‖Σ v v* − I‖` measured at validation.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    fn check_square(&self, x: &CMatrix) -> Result<()> {
        if x.nrows() != self.k || x.ncols() != self.k {
            return Err(Error::ShapeMismatch(format!(
                "expected {0}x{0} matrix, got {1}x{2}",
                self.k,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// The Markov map `τ(x) = Σ v x v*`.
    pub fn cp_map_apply(&self, x: &CMatrix) -> Result<CMatrix> {
        self.check_square(x)?;
        Ok(self.tau(x))
    }

    pub(crate) fn tau(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.k, self.k);
        for vk in &self.v {
            out += vk * x * vk.adjoint();
        }
        out
    }

    /// The trace-dual map `ρ ↦ Σ v* ρ v`.
    pub fn predual_apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.check_square(rho)?;
        Ok(self.predual(rho))
    }

    pub(crate) fn predual(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.k, self.k);
        for vk in &self.v {
            out += vk.adjoint() * rho * vk;
        }
        out
    }

    /// `v_I = v_{i₁} ⋯ v_{i_m}`; the empty word gives the identity.
    pub fn word_operator(&self, word: &Word) -> Result<CMatrix> {
        let mut out = identity(self.k);
        for &a in word.letters() {
            let vk = self.v.get(a).ok_or(Error::LetterOutOfRange { letter: a, d: self.d() })?;
            out *= vk;
        }
        Ok(out)
    }

    /// `v_I` for every word of length `n`, in lexicographic order.
    pub fn all_word_operators(&self, n: usize) -> Vec<CMatrix> {
        let mut ops = vec![identity(self.k)];
        for _ in 0..n {
            let mut next = Vec::with_capacity(ops.len() * self.d());
            for p in &ops {
                for vk in &self.v {
                    next.push(p * vk);
                }
            }
            ops = next;
        }
        ops
    }

    pub fn transfer_matrix(&self) -> CMatrix {
        transfer_matrix(&self.v)
    }

    /// Invariant density of maximal support. When the eigenvalue-1 space is
    /// degenerate this is the image of `I/k` under the spectral projection
    /// onto the fixed densities, i.e. the ergodic average of the maximally
    /// mixed state.
    pub fn invariant_state(&self, spectral_tol: f64) -> Result<InvariantState> {
        let k = self.k;
        let t = self.transfer_matrix();
        let evs = eigenvalues(&t)?;
        let one = cplx(1.0, 0.0);
        let fixed_dim = evs.iter().filter(|z| (**z - one).norm() <= spectral_tol).count();
        if fixed_dim == 0 {
            return Err(Error::NumericalFailure(
                "transfer operator has no eigenvalue at 1 within tolerance".into(),
            ));
        }
        let shift = identity(k * k);
        let right = near_kernel(&(t.adjoint() - &shift), fixed_dim)?;
        let left = near_kernel(&(&t - &shift), fixed_dim)?;
        let overlap = left.adjoint() * &right;
        let inv = overlap
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("fixed-point overlap matrix is singular".into()))?;
        let start = vectorize(&(identity(k) * cplx(1.0 / k as f64, 0.0)));
        let projected = &right * (inv * (left.adjoint() * start));
        let raw = unvectorize(&projected, k, k);
        let rho = positive_density(&raw)?;
        Ok(InvariantState { rho, fixed_dim })
    }

    /// Restricts to the support of the invariant density and attaches the
    /// ergodicity flag and the dimension of the generated bond algebra.
    pub fn canonicalize(&self, tol: &Tolerances) -> Result<CanonicalSystem> {
        let inv = self.invariant_state(tol.spectral)?;
        let (vals, vecs) = hermitian_eigen(&inv.rho);
        let top = vals.last().cloned().unwrap_or(0.0);
        let support: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > tol.spectral * top.max(1.0)).collect();
        if support.is_empty() {
            return Err(Error::NumericalFailure("invariant density vanished".into()));
        }
        let (system, rho, isometry) = if support.len() == self.k {
            (self.clone(), inv.rho.clone(), None)
        } else {
            let u = CMatrix::from_fn(self.k, support.len(), |r, c| vecs[(r, support[c])]);
            let v: Vec<CMatrix> = self.v.iter().map(|vk| u.adjoint() * vk * &u).collect();
            let residual = cuntz_residual(&v);
            if residual > self.tol.max(tol.cuntz) {
                return Err(Error::SupportCompressionBrokeCuntz { residual });
            }
            let rho = positive_density(&(u.adjoint() * &inv.rho * &u))?;
            let system = PopescuSystem { v, k: support.len(), tol: self.tol, residual };
            (system, rho, Some(u))
        };
        let min_eig = hermitian_eigen(&rho).0[0];
        if min_eig <= 0.0 {
            return Err(Error::RhoSingular { min_eig });
        }
        let fixed_dim = if isometry.is_some() {
            system.invariant_state(tol.spectral)?.fixed_dim
        } else {
            inv.fixed_dim
        };
        let kc = system.k;
        let algebra_dim = generated_algebra_dim(system.kraus(), kc, 2 * kc * kc, tol.compare.max(1e-10));
        Ok(CanonicalSystem {
            system,
            rho,
            fixed_dim,
            ergodic: fixed_dim == 1,
            algebra_dim,
            original_k: self.k,
            isometry,
            tol: *tol,
        })
    }
}

/// Hermitian part, positive part and unit trace.
fn positive_density(raw: &CMatrix) -> Result<CMatrix> {
    let tr = raw.trace();
    if tr.norm() < 1e-300 {
        return Err(Error::NumericalFailure("fixed point has zero trace".into()));
    }
    let scaled = raw / tr;
    let (vals, vecs) = hermitian_eigen(&scaled);
    let k = raw.nrows();
    let mut rho = CMatrix::zeros(k, k);
    for (i, &lambda) in vals.iter().enumerate() {
        if lambda > 0.0 {
            let col = vecs.column(i);
            rho += col * col.adjoint() * cplx(lambda, 0.0);
        }
    }
    let tr = rho.trace();
    Ok(rho / tr)
}

/// A Popescu system on the support of its invariant density, which is
/// faithful there.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSystem {
    system: PopescuSystem,
    rho: CMatrix,
    fixed_dim: usize,
    ergodic: bool,
    algebra_dim: usize,
    original_k: usize,
    isometry: Option<CMatrix>,
    tol: Tolerances,
}

impl CanonicalSystem {
    pub fn system(&self) -> &PopescuSystem {
        &self.system
    }

    pub fn kraus(&self) -> &[CMatrix] {
        self.system.kraus()
    }

    pub fn d(&self) -> usize {
        self.system.d()
    }

    pub fn k(&self) -> usize {
        self.system.k()
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn fixed_dim(&self) -> usize {
        self.fixed_dim
    }

    pub fn ergodic(&self) -> bool {
        self.ergodic
    }

    pub fn algebra_dim(&self) -> usize {
        self.algebra_dim
    }

    /// Bond dimension before compression.
    pub fn original_k(&self) -> usize {
        self.original_k
    }

    /// Isometry from the compressed bond space into the original one, if a
    /// compression happened.
    pub fn isometry(&self) -> Option<&CMatrix> {
        self.isometry.as_ref()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn tau(&self, x: &CMatrix) -> CMatrix {
        self.system.tau(x)
    }

    pub fn predual(&self, x: &CMatrix) -> CMatrix {
        self.system.predual(x)
    }

    /// `φ₀(x) = tr(ρ x)`.
    pub fn phi0(&self, x: &CMatrix) -> num_complex::Complex64 {
        crate::linalg::trace_product(&self.rho, x)
    }

    pub fn word_operator(&self, word: &Word) -> Result<CMatrix> {
        self.system.word_operator(word)
    }

    /// `‖Σ v* ρ v − ρ‖`.
    pub fn fixed_point_residual(&self) -> f64 {
        spectral_norm(&(self.predual(&self.rho) - &self.rho))
    }
}
