//! Evaluation of the chain state `ω(e^{I}_{J}) = tr(ρ v_I v_J*)` on local
//! observables. Within a window the first site carries the most significant
//! tensor factor, so word `I` read left to right is the row index of `e^{I}_{J}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cplx, identity, spectral_norm, trace_product, CMatrix};
use crate::modular::DualSystem;
use crate::popescu::{CanonicalSystem, Word};

/// Largest window Hilbert-space dimension assembled densely.
pub const WINDOW_CAP: usize = 4096;

pub(crate) fn window_dim(d: usize, n: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..n {
        dim = dim.saturating_mul(d);
        if dim > WINDOW_CAP {
            return Err(Error::SizeCapExceeded {
                what: "window dimension d^n",
                requested: dim,
                cap: WINDOW_CAP,
            });
        }
    }
    Ok(dim)
}

/// `Q = Σ q^{I}_{J} e^{I}_{J}` on sites `first_site .. first_site + n_sites`.
/// `coeffs` is the `dⁿ × dⁿ` matrix of `Q` in the product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowObservable {
    first_site: i64,
    n_sites: usize,
    d: usize,
    coeffs: CMatrix,
}

impl WindowObservable {
    pub fn new(first_site: i64, n_sites: usize, d: usize, coeffs: CMatrix) -> Result<Self> {
        if n_sites == 0 || d == 0 {
            return Err(Error::ShapeMismatch("window needs at least one site".into()));
        }
        let dim = window_dim(d, n_sites)?;
        if coeffs.nrows() != dim || coeffs.ncols() != dim {
            return Err(Error::ShapeMismatch(format!(
                "coefficients are {}x{}, expected {dim}x{dim} for {n_sites} sites of dimension {d}",
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        Ok(WindowObservable { first_site, n_sites, d, coeffs })
    }

    pub fn identity(first_site: i64, n_sites: usize, d: usize) -> Result<Self> {
        let dim = window_dim(d, n_sites)?;
        WindowObservable::new(first_site, n_sites, d, identity(dim))
    }

    /// A `d×d` operator on one site.
    pub fn single_site(site: i64, op: CMatrix) -> Result<Self> {
        let d = op.nrows();
        WindowObservable::new(site, 1, d, op)
    }

    /// Matrix unit `e^{I}_{J}` on the window starting at `first_site`.
    pub fn matrix_unit(first_site: i64, d: usize, i: &Word, j: &Word) -> Result<Self> {
        if i.len() != j.len() {
            return Err(Error::LengthMismatch { left: i.len(), right: j.len() });
        }
        let dim = window_dim(d, i.len())?;
        let mut c = CMatrix::zeros(dim, dim);
        c[(i.index(d), j.index(d))] = cplx(1.0, 0.0);
        WindowObservable::new(first_site, i.len(), d, c)
    }

    pub fn first_site(&self) -> i64 {
        self.first_site
    }

    pub fn last_site(&self) -> i64 {
        self.first_site + self.n_sites as i64 - 1
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coeffs(&self) -> &CMatrix {
        &self.coeffs
    }

    pub fn adjoint(&self) -> Self {
        WindowObservable { coeffs: self.coeffs.adjoint(), ..self.clone() }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        crate::linalg::max_abs(&(&self.coeffs - self.coeffs.adjoint())) <= tol
    }

    pub fn shifted_to(&self, first_site: i64) -> Self {
        WindowObservable { first_site, ..self.clone() }
    }

    /// The same observable on the larger window `first_site .. first_site + n_sites`,
    /// tensored with identities on the added sites.
    pub fn embedded(&self, first_site: i64, n_sites: usize) -> Result<Self> {
        let before = self.first_site - first_site;
        let after = first_site + n_sites as i64 - 1 - self.last_site();
        if before < 0 || after < 0 {
            return Err(Error::ShapeMismatch(format!(
                "window [{}, {}] does not fit in [{first_site}, {}]",
                self.first_site,
                self.last_site(),
                first_site + n_sites as i64 - 1
            )));
        }
        window_dim(self.d, n_sites)?;
        let left = identity(self.d.pow(before as u32));
        let right = identity(self.d.pow(after as u32));
        let coeffs = left.kronecker(&self.coeffs).kronecker(&right);
        WindowObservable::new(first_site, n_sites, self.d, coeffs)
    }

    /// Product of two observables on adjacent or separated windows, padded
    /// with identities on the sites in between.
    pub fn product(&self, other: &WindowObservable) -> Result<Self> {
        if other.d != self.d {
            return Err(Error::ShapeMismatch("alphabet sizes differ".into()));
        }
        let gap = other.first_site - self.last_site() - 1;
        if gap < 0 {
            return Err(Error::OverlapError(format!(
                "window [{}, {}] overlaps [{}, {}]",
                self.first_site,
                self.last_site(),
                other.first_site,
                other.last_site()
            )));
        }
        let gap = gap as usize;
        let n = self.n_sites + gap + other.n_sites;
        window_dim(self.d, n)?;
        let pad = identity(self.d.pow(gap as u32));
        let coeffs = self.coeffs.kronecker(&pad).kronecker(&other.coeffs);
        WindowObservable::new(self.first_site, n, self.d, coeffs)
    }
}

/// `tr(ρ v_I v_J*)`, the value of `ω(e^{I}_{J})`.
pub fn matrix_element(csys: &CanonicalSystem, i: &Word, j: &Word) -> Result<Complex64> {
    if i.len() != j.len() {
        return Err(Error::LengthMismatch { left: i.len(), right: j.len() });
    }
    let vi = csys.word_operator(i)?;
    let vj = csys.word_operator(j)?;
    Ok(csys.phi0(&(vi * vj.adjoint())))
}

/// Density matrix of an `n`-site window: `tr(σ Q) = ω(Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    pub n_sites: usize,
    pub d: usize,
    pub sigma: CMatrix,
}

impl ReducedDensity {
    /// Trace out the last site.
    pub fn partial_trace_last(&self) -> CMatrix {
        let inner = self.d;
        let outer = self.sigma.nrows() / inner;
        CMatrix::from_fn(outer, outer, |r, c| {
            (0..inner).map(|a| self.sigma[(r * inner + a, c * inner + a)]).sum()
        })
    }

    /// Trace out the first site.
    pub fn partial_trace_first(&self) -> CMatrix {
        let inner = self.sigma.nrows() / self.d;
        CMatrix::from_fn(inner, inner, |r, c| {
            (0..self.d).map(|a| self.sigma[(a * inner + r, a * inner + c)]).sum()
        })
    }

    pub fn expectation(&self, q: &WindowObservable) -> Result<Complex64> {
        if q.coeffs.nrows() != self.sigma.nrows() {
            return Err(Error::ShapeMismatch("observable and density window sizes differ".into()));
        }
        Ok(trace_product(&self.sigma, &q.coeffs))
    }
}

/// `σ[I, J] = tr(ρ v_J v_I*)`, assembled as a Gram matrix of the vectors
/// `ρ^{1/2} v_I`, which keeps it positive semidefinite by construction.
pub fn reduced_density(csys: &CanonicalSystem, n: usize) -> Result<ReducedDensity> {
    if n == 0 {
        return Err(Error::ShapeMismatch("window needs at least one site".into()));
    }
    let dim = window_dim(csys.d(), n)?;
    let k = csys.k();
    let (rho_half, _) = crate::linalg::psd_power(csys.rho(), 0.5, 0.0);
    let ops = csys.system().all_word_operators(n);
    let mut cols = CMatrix::zeros(k * k, dim);
    for (i, op) in ops.iter().enumerate() {
        let a = &rho_half * op;
        cols.set_column(i, &crate::linalg::vectorize(&a));
    }
    let sigma = cols.adjoint() * &cols;
    Ok(ReducedDensity { n_sites: n, d: csys.d(), sigma })
}

/// `x ↦ Σ q^{I}_{J} v_I x v_J*`.
pub fn weighted_map(csys: &CanonicalSystem, q: &WindowObservable, x: &CMatrix) -> Result<CMatrix> {
    check_alphabet(csys, q)?;
    let ops = csys.system().all_word_operators(q.n_sites);
    Ok(weighted_map_with(&ops, &q.coeffs, x))
}

pub(crate) fn weighted_map_with(ops: &[CMatrix], coeffs: &CMatrix, x: &CMatrix) -> CMatrix {
    let k = x.nrows();
    let zero = cplx(0.0, 0.0);
    let mut out = CMatrix::zeros(k, k);
    for i in 0..coeffs.nrows() {
        let mut b = CMatrix::zeros(k, k);
        let mut any = false;
        for j in 0..coeffs.ncols() {
            let c = coeffs[(i, j)];
            if c != zero {
                b += ops[j].adjoint() * c;
                any = true;
            }
        }
        if any {
            out += &ops[i] * x * b;
        }
    }
    out
}

fn check_alphabet(csys: &CanonicalSystem, q: &WindowObservable) -> Result<()> {
    if q.d != csys.d() {
        return Err(Error::ShapeMismatch(format!(
            "observable acts on dimension {} but the system has d = {}",
            q.d,
            csys.d()
        )));
    }
    Ok(())
}

/// `ω(Q)` for a single window.
pub fn expectation(csys: &CanonicalSystem, q: &WindowObservable) -> Result<Complex64> {
    let e = weighted_map(csys, q, &identity(csys.k()))?;
    Ok(csys.phi0(&e))
}

/// `ω(Q₁ θ(Q₂))` with `gap` empty sites between the two windows, evaluated as
/// `tr(ρ E_{Q₁}(τ^{gap}(E_{Q₂}(I))))`.
pub fn two_point(
    csys: &CanonicalSystem,
    q1: &WindowObservable,
    q2: &WindowObservable,
    gap: i64,
) -> Result<Complex64> {
    if gap < 0 {
        return Err(Error::OverlapError(format!("negative gap {gap}")));
    }
    let inner = weighted_map(csys, q2, &identity(csys.k()))?;
    let mut x = inner;
    for _ in 0..gap {
        x = csys.tau(&x);
    }
    let outer = weighted_map(csys, q1, &x)?;
    Ok(csys.phi0(&outer))
}

/// Evaluates `ω` on `L ⊗ R` with `L` on sites ending at 0 and `R` on sites
/// starting at 1. The left factor acts through the dual system by right
/// multiplication on the standard-form vector `ρ^{1/2}`, the right factor
/// through the primal system by left multiplication:
/// `⟨Ω, ṽ_{I'} ṽ*_{J'} v_I v_J* Ω⟩` with the dual words read from site 0 outward.
pub fn two_sided_eval(
    csys: &CanonicalSystem,
    dual: &DualSystem,
    left: &WindowObservable,
    right: &WindowObservable,
) -> Result<Complex64> {
    if left.last_site() != 0 {
        return Err(Error::ShapeMismatch(format!(
            "left window must end at site 0, ends at {}",
            left.last_site()
        )));
    }
    if right.first_site != 1 {
        return Err(Error::ShapeMismatch(format!(
            "right window must start at site 1, starts at {}",
            right.first_site
        )));
    }
    check_alphabet(csys, left)?;
    check_alphabet(csys, right)?;
    let e_right = weighted_map(csys, right, &identity(csys.k()))?;
    let f_left = dual.left_window_operator(left)?;
    let rh = dual.rho_half();
    Ok(trace_product(&(rh * e_right * rh), &f_left))
}

/// Norms of a window observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowNorm {
    /// Operator norm of `Q`, i.e. the spectral norm of `q̂`.
    pub operator_norm: f64,
    /// Spectral norm of the coefficient array arranged as `q(I′,J′ | I,J)`.
    pub coefficient_norm: f64,
}

/// Coefficients of a two-sided window (left half on sites `−n+1..0`, right
/// half on `1..n`) as the matrix `q(I′,J′ | I,J)`, where `I′, J′` are read from
/// site 0 outward and `I, J` from site 1 outward.
pub fn two_sided_coefficients(q: &WindowObservable) -> Result<CMatrix> {
    if !q.n_sites.is_multiple_of(2) {
        return Err(Error::ShapeMismatch("two-sided window needs an even number of sites".into()));
    }
    let n = q.n_sites / 2;
    let d = q.d;
    let half = d.pow(n as u32);
    let rev: Vec<usize> = (0..half).map(|i| Word::from_index(i, d, n).reversed().index(d)).collect();
    let dim = half * half;
    Ok(CMatrix::from_fn(dim, dim, |row, col| {
        let (ip, jp) = (row / half, row % half);
        let (i, j) = (col / half, col % half);
        q.coeffs[(rev[ip] * half + i, rev[jp] * half + j)]
    }))
}

/// Inverse of [`two_sided_coefficients`]: the window observable on `−n+1..n`
/// with the given `q(I′,J′ | I,J)`.
pub fn from_two_sided_coefficients(q: &CMatrix, n: usize, d: usize) -> Result<WindowObservable> {
    let half = window_dim(d, n)?;
    let dim = half * half;
    if q.nrows() != dim || q.ncols() != dim {
        return Err(Error::ShapeMismatch(format!("expected {dim}x{dim} coefficients")));
    }
    let rev: Vec<usize> = (0..half).map(|i| Word::from_index(i, d, n).reversed().index(d)).collect();
    let mut chain = CMatrix::zeros(dim, dim);
    for row in 0..dim {
        for col in 0..dim {
            let (ip, jp) = (row / half, row % half);
            let (i, j) = (col / half, col % half);
            chain[(rev[ip] * half + i, rev[jp] * half + j)] = q[(row, col)];
        }
    }
    WindowObservable::new(1 - n as i64, 2 * n, d, chain)
}

/// Operator norm of `Q` together with the norm of its unreshuffled
/// coefficient matrix. For a one-sided window the two agree by definition.
pub fn window_operator_norm(q: &WindowObservable, two_sided: bool) -> Result<WindowNorm> {
    let operator_norm = spectral_norm(&q.coeffs);
    let coefficient_norm = if two_sided {
        spectral_norm(&two_sided_coefficients(q)?)
    } else {
        operator_norm
    };
    Ok(WindowNorm { operator_norm, coefficient_norm })
}
