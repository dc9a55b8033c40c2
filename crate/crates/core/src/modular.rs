//! Standard form of the bond algebra with its faithful state, modular data,
//! the dual system `w_k = ρ^{1/2} v_k ρ^{−1/2}`, the KMS metric and the
//! KMS-adjoint Markov map.
//!
//! The carrier is `M_k` with the Hilbert–Schmidt inner product and cyclic
//! vector `Ω = ρ^{1/2}`. `x` acts by left multiplication, `a` by right
//! multiplication, `J A = A*` and `Δ A = ρ A ρ^{−1}`, so that
//! `σ_{i/2}(x) = ρ^{−1/2} x ρ^{1/2}` and `J x J = right(x*)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cplx, eigenvalues, generated_algebra_dim, hermitian_basis, hermitian_eigenvalues, identity,
    left_mult_matrix, max_abs, psd_power, right_mult_matrix, spectral_norm, trace_product, vectorize,
    CMatrix, CVector,
};
use crate::popescu::{CanonicalSystem, Word};
use crate::state::WindowObservable;

/// Condition number above which `ρ^{−1/2}` is considered unusable.
pub const MAX_RHO_CONDITION: f64 = 1e12;

const RHO_FLOOR: f64 = 1e-12;

/// `ρ^{±1/2}` and the derived modular maps.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularData {
    rho: CMatrix,
    rho_half: CMatrix,
    rho_inv_half: CMatrix,
    condition: f64,
}

impl ModularData {
    pub fn new(csys: &CanonicalSystem) -> Result<Self> {
        let rho = csys.rho().clone();
        let min_eig = hermitian_eigenvalues(&rho)[0];
        if min_eig <= 0.0 {
            return Err(Error::RhoSingular { min_eig });
        }
        let (rho_half, condition) = psd_power(&rho, 0.5, RHO_FLOOR);
        let (rho_inv_half, _) = psd_power(&rho, -0.5, RHO_FLOOR);
        if condition > MAX_RHO_CONDITION {
            return Err(Error::NumericalFailure(format!(
                "invariant density is ill-conditioned (condition number {condition:e})"
            )));
        }
        Ok(ModularData { rho, rho_half, rho_inv_half, condition })
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn rho_half(&self) -> &CMatrix {
        &self.rho_half
    }

    pub fn rho_inv_half(&self) -> &CMatrix {
        &self.rho_inv_half
    }

    /// Condition number of `ρ`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn k(&self) -> usize {
        self.rho.nrows()
    }

    /// `σ_{i/2}(x) = ρ^{−1/2} x ρ^{1/2}`.
    pub fn sigma_i_half(&self, x: &CMatrix) -> CMatrix {
        &self.rho_inv_half * x * &self.rho_half
    }

    /// `σ_{−i/2}(x) = ρ^{1/2} x ρ^{−1/2}`.
    pub fn sigma_minus_i_half(&self, x: &CMatrix) -> CMatrix {
        &self.rho_half * x * &self.rho_inv_half
    }

    /// `J` on a vectorized matrix: `vec(A) ↦ vec(A*)`.
    pub fn j_apply(&self, vec_a: &CVector) -> CVector {
        let k = self.k();
        let a = crate::linalg::unvectorize(vec_a, k, k);
        vectorize(&a.adjoint())
    }

    /// Matrix of `Δ: vec(A) ↦ vec(ρ A ρ^{−1})`.
    pub fn delta_matrix(&self) -> CMatrix {
        let (rho_inv, _) = psd_power(&self.rho, -1.0, RHO_FLOOR);
        left_mult_matrix(&self.rho) * right_mult_matrix(&rho_inv)
    }

    pub fn standard_form(&self) -> StandardForm {
        StandardForm { k: self.k(), omega: vectorize(&self.rho_half) }
    }

    pub fn dual_system(&self, csys: &CanonicalSystem) -> Result<DualSystem> {
        if csys.k() != self.k() {
            return Err(Error::ShapeMismatch("modular data built for another system".into()));
        }
        let w = csys
            .kraus()
            .iter()
            .map(|v| &self.rho_half * v * &self.rho_inv_half)
            .collect();
        Ok(DualSystem {
            w,
            rho_half: self.rho_half.clone(),
            condition: self.condition,
        })
    }

    pub fn kms_adjoint(&self, csys: &CanonicalSystem) -> KmsAdjoint {
        KmsAdjoint { csys: csys.clone(), modular: self.clone() }
    }

    pub fn kms_space(&self, csys: &CanonicalSystem) -> Result<KmsSpace> {
        KmsSpace::new(csys, self)
    }
}

/// `(M_k, HS inner product, Ω = vec(ρ^{1/2}))`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    k: usize,
    omega: CVector,
}

impl StandardForm {
    pub fn dim(&self) -> usize {
        self.k * self.k
    }

    pub fn omega_vec(&self) -> &CVector {
        &self.omega
    }

    /// `vec(A) ↦ vec(x A)`.
    pub fn left_action(&self, x: &CMatrix) -> CMatrix {
        left_mult_matrix(x)
    }

    /// `vec(A) ↦ vec(A a)`.
    pub fn right_action(&self, a: &CMatrix) -> CMatrix {
        right_mult_matrix(a)
    }

    /// `⟨Ω, left(x) Ω⟩`.
    pub fn vector_state(&self, x: &CMatrix) -> Complex64 {
        self.omega.dotc(&(self.left_action(x) * &self.omega))
    }
}

/// Right multiplications by `w_k = ρ^{1/2} v_k ρ^{−1/2}`, the bond-level
/// image of the left half-chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSystem {
    w: Vec<CMatrix>,
    rho_half: CMatrix,
    condition: f64,
}

impl DualSystem {
    pub fn w(&self) -> &[CMatrix] {
        &self.w
    }

    pub fn d(&self) -> usize {
        self.w.len()
    }

    pub fn k(&self) -> usize {
        self.rho_half.nrows()
    }

    pub fn rho_half(&self) -> &CMatrix {
        &self.rho_half
    }

    /// Condition number of `ρ` used in building the dual.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `‖Σ w* w − I‖`.
    pub fn normalization_residual(&self) -> f64 {
        let mut s = -identity(self.k());
        for w in &self.w {
            s += w.adjoint() * w;
        }
        spectral_norm(&s)
    }

    /// `max_k ‖ṽ_k* Ω − v_k* Ω‖` with `ṽ_k* Ω = vec(ρ^{1/2} w_k*)` and
    /// `v_k* Ω = vec(v_k* ρ^{1/2})`.
    pub fn vector_identity_residual(&self, csys: &CanonicalSystem) -> f64 {
        self.w
            .iter()
            .zip(csys.kraus())
            .map(|(w, v)| max_abs(&(&self.rho_half * w.adjoint() - v.adjoint() * &self.rho_half)))
            .fold(0.0, f64::max)
    }

    /// `w_{i₁} ⋯ w_{i_m}` for a word in chain order.
    pub fn chain_word(&self, word: &Word) -> Result<CMatrix> {
        let mut out = identity(self.k());
        for &a in word.letters() {
            let w = self.w.get(a).ok_or(Error::LetterOutOfRange { letter: a, d: self.d() })?;
            out *= w;
        }
        Ok(out)
    }

    /// All chain-order products of length `n`, lexicographically.
    pub fn all_chain_words(&self, n: usize) -> Vec<CMatrix> {
        let mut ops = vec![identity(self.k())];
        for _ in 0..n {
            let mut next = Vec::with_capacity(ops.len() * self.d());
            for p in &ops {
                for w in &self.w {
                    next.push(p * w);
                }
            }
            ops = next;
        }
        ops
    }

    /// `ṽ*_D Ω` for a dual word `D` whose first letter sits at site 0,
    /// applying `ṽ*_{d₁}` first: `ρ^{1/2} ↦ ρ^{1/2} w_{d₁}* ↦ ρ^{1/2} w_{d₁}* w_{d₂}* ↦ …`.
    pub fn dual_word_adjoint_on_omega(&self, dual_word: &Word) -> Result<CMatrix> {
        let mut a = self.rho_half.clone();
        for &letter in dual_word.letters() {
            let w = self.w.get(letter).ok_or(Error::LetterOutOfRange { letter, d: self.d() })?;
            a *= w.adjoint();
        }
        Ok(a)
    }

    /// The operator `F` with `⟨Ω, ṽ(L) X Ω⟩ = tr(ρ^{1/2} X ρ^{1/2} F)` for a
    /// left-window observable, `F = Σ l[c, c′] w_{c′}* w_c` with `c, c′` the
    /// chain-order words of the window.
    pub fn left_window_operator(&self, left: &WindowObservable) -> Result<CMatrix> {
        if left.d() != self.d() {
            return Err(Error::ShapeMismatch("alphabet sizes differ".into()));
        }
        let ops = self.all_chain_words(left.n_sites());
        Ok(left_operator_with(&ops, left.coeffs()))
    }
}

pub(crate) fn left_operator_with(ops: &[CMatrix], coeffs: &CMatrix) -> CMatrix {
    let k = ops[0].nrows();
    let zero = cplx(0.0, 0.0);
    let mut out = CMatrix::zeros(k, k);
    for j in 0..coeffs.ncols() {
        let mut b = CMatrix::zeros(k, k);
        let mut any = false;
        for i in 0..coeffs.nrows() {
            let c = coeffs[(i, j)];
            if c != zero {
                b += &ops[i] * c;
                any = true;
            }
        }
        if any {
            out += ops[j].adjoint() * b;
        }
    }
    out
}

/// Largest `|φ₀(v_I v_J*) − ⟨ṽ*_Ĩ Ω, ṽ*_J̃ Ω⟩|` over words with `|I|, |J| ≤ max_len`.
/// `w` is passed explicitly so that alternative dual conventions can be tested.
pub fn word_identity_residual(csys: &CanonicalSystem, rho_half: &CMatrix, w: &[CMatrix], max_len: usize) -> f64 {
    let k = csys.k();
    let mut primal = Vec::new();
    let mut dual = Vec::new();
    for n in 0..=max_len {
        let ops = csys.system().all_word_operators(n);
        for (idx, word) in Word::all(csys.d(), n).iter().enumerate() {
            // ṽ*_Ĩ Ω = ρ^{1/2} (w_{i₁} ⋯ w_{i_m})*
            let mut wi = identity(k);
            for &a in word.letters() {
                wi *= &w[a];
            }
            primal.push(ops[idx].clone());
            dual.push(rho_half * wi.adjoint());
        }
    }
    let mut worst = 0.0_f64;
    for (vi, di) in primal.iter().zip(&dual) {
        for (vj, dj) in primal.iter().zip(&dual) {
            let lhs = csys.phi0(&(vi * vj.adjoint()));
            let rhs = trace_product(&di.adjoint(), dj);
            worst = worst.max((lhs - rhs).norm());
        }
    }
    worst
}

/// `τ̃(y) = ρ^{−1/2} (Σ v* ρ^{1/2} y ρ^{1/2} v) ρ^{−1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KmsAdjoint {
    csys: CanonicalSystem,
    modular: ModularData,
}

impl KmsAdjoint {
    pub fn apply(&self, y: &CMatrix) -> CMatrix {
        let m = &self.modular;
        let inner = m.rho_half() * y * m.rho_half();
        m.rho_inv_half() * self.csys.predual(&inner) * m.rho_inv_half()
    }

    /// `|φ₀(τ(x) σ_{−i/2}(y)) − φ₀(σ_{i/2}(x) τ̃(y))|`.
    pub fn duality_residual(&self, x: &CMatrix, y: &CMatrix) -> f64 {
        let m = &self.modular;
        let lhs = self.csys.phi0(&(self.csys.tau(x) * m.sigma_minus_i_half(y)));
        let rhs = self.csys.phi0(&(m.sigma_i_half(x) * self.apply(y)));
        (lhs - rhs).norm()
    }

    /// `‖τ̃(I) − I‖`.
    pub fn unitality_residual(&self) -> f64 {
        let k = self.csys.k();
        max_abs(&(self.apply(&identity(k)) - identity(k)))
    }

    /// `|φ₀(τ̃(y)) − φ₀(y)|`.
    pub fn invariance_residual(&self, y: &CMatrix) -> f64 {
        (self.csys.phi0(&self.apply(y)) - self.csys.phi0(y)).norm()
    }

    /// `max_a ‖τ̃ⁿ(x_a) − φ₀(x_a) I‖` over the normalized Hermitian basis.
    pub fn mixing_defect(&self, n: usize) -> f64 {
        let k = self.csys.k();
        hermitian_basis(k)
            .iter()
            .map(|x| {
                let mut y = x.clone();
                for _ in 0..n {
                    y = self.apply(&y);
                }
                spectral_norm(&(y - identity(k) * self.csys.phi0(x)))
            })
            .fold(0.0, f64::max)
    }
}

/// The bond algebra with the KMS metric `⟨⟨x, y⟩⟩ = tr(ρ^{1/2} x* ρ^{1/2} y)`
/// in a Hilbert–Schmidt orthonormal Hermitian basis whose first element is `I/√k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KmsSpace {
    basis: Vec<CMatrix>,
    gram: CMatrix,
    t_mat: CMatrix,
    identity_coords: CVector,
}

impl KmsSpace {
    pub fn new(csys: &CanonicalSystem, modular: &ModularData) -> Result<Self> {
        let k = csys.k();
        let basis = hermitian_basis(k);
        let n = basis.len();
        let rh = modular.rho_half();
        let sandwiched: Vec<CMatrix> = basis.iter().map(|b| rh * b * rh).collect();
        let gram = CMatrix::from_fn(n, n, |a, b| trace_product(&basis[a].adjoint(), &sandwiched[b]));
        let images: Vec<CMatrix> = basis.iter().map(|b| csys.tau(b)).collect();
        let t_mat = CMatrix::from_fn(n, n, |a, b| trace_product(&basis[a].adjoint(), &images[b]));
        let mut identity_coords = CVector::zeros(n);
        identity_coords[0] = cplx((k as f64).sqrt(), 0.0);
        let min_eig = hermitian_eigenvalues(&gram)[0];
        if min_eig < -1e-10 {
            return Err(Error::NumericalFailure(format!("KMS Gram matrix is not positive (min eigenvalue {min_eig:e})")));
        }
        Ok(KmsSpace { basis, gram, t_mat, identity_coords })
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn t_mat(&self) -> &CMatrix {
        &self.t_mat
    }

    pub fn identity_coords(&self) -> &CVector {
        &self.identity_coords
    }

    /// `‖G T − T^† G‖` and whether it is within `tol`.
    pub fn detailed_balance_check(&self, tol: f64) -> DetailedBalanceCheck {
        let defect = spectral_norm(&(&self.gram * &self.t_mat - self.t_mat.adjoint() * &self.gram));
        DetailedBalanceCheck { symmetric: defect <= tol, defect }
    }

    /// Spectral radius of `T − |I⟩⟨⟨I|`, the Markov map with the KMS-orthogonal
    /// projection onto multiples of the identity removed.
    pub fn t_gap(&self) -> Result<f64> {
        let c = &self.identity_coords;
        let proj = c * (c.adjoint() * &self.gram);
        let deflated = &self.t_mat - proj;
        Ok(eigenvalues(&deflated)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    pub fn t_spectrum(&self) -> Result<Vec<Complex64>> {
        eigenvalues(&self.t_mat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetailedBalanceCheck {
    pub symmetric: bool,
    pub defect: f64,
}

/// Bond-level Haag duality: the dual operators generate all of `M_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaagBondCheck {
    pub holds: bool,
    pub span_dim: usize,
}

/// Largest word length accepted for the span computation.
pub const HAAG_CAP_MAX: usize = 4096;

pub fn haag_duality_bond_check(dual: &DualSystem, cap: usize) -> Result<HaagBondCheck> {
    if cap > HAAG_CAP_MAX {
        return Err(Error::SizeCapExceeded { what: "word length cap", requested: cap, cap: HAAG_CAP_MAX });
    }
    let k = dual.k();
    let span_dim = generated_algebra_dim(dual.w(), k, cap, 1e-10);
    Ok(HaagBondCheck { holds: span_dim == k * k, span_dim })
}

/// Whether `Δ` is trivial (`ρ ∝ I`) and whether every `v_k` is self-adjoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaTriviality {
    pub delta_is_identity: bool,
    pub all_v_selfadjoint: bool,
    /// `k = 1`, where `Δ = I` holds vacuously.
    pub degenerate: bool,
}

impl DeltaTriviality {
    pub fn biconditional_holds(&self) -> bool {
        self.delta_is_identity == self.all_v_selfadjoint
    }
}

pub fn delta_triviality_check(csys: &CanonicalSystem, tol: f64) -> DeltaTriviality {
    let k = csys.k();
    let flat = identity(k) * cplx(1.0 / k as f64, 0.0);
    let delta_is_identity = max_abs(&(csys.rho() - flat)) <= tol;
    let all_v_selfadjoint = csys.kraus().iter().all(|v| max_abs(&(v - v.adjoint())) <= tol);
    DeltaTriviality { delta_is_identity, all_v_selfadjoint, degenerate: k == 1 }
}

/// `|φ₀(J x J τ(y)) − φ₀(J τ(x) J y)|` with `φ₀(J x J y) = tr(ρ^{1/2} y ρ^{1/2} x*)`.
pub fn reflection_duality_residual(csys: &CanonicalSystem, modular: &ModularData, x: &CMatrix, y: &CMatrix) -> f64 {
    let rh = modular.rho_half();
    let pair = |a: &CMatrix, b: &CMatrix| trace_product(&(rh * b * rh), &a.adjoint());
    (pair(x, &csys.tau(y)) - pair(&csys.tau(x), y)).norm()
}
