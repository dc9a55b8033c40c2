//! Structural certificates for the chain state: symmetry detectors,
//! reflection positivity, purity, exponential decay and the split bound.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cplx, hermitian_eigenvalues, hermitian_part, identity, max_abs,
    positive_negative_parts, psd_power, spectral_norm, trace_product, vectorize, CMatrix,
};
use crate::modular::{
    delta_triviality_check, haag_duality_bond_check, DeltaTriviality, DualSystem, KmsSpace, ModularData,
};
use crate::popescu::{CanonicalSystem, Word};
use crate::state::{
    expectation, reduced_density, two_point, two_sided_coefficients, window_dim, WindowObservable,
};
use crate::transfer::{build_transfer, gauge_group_detect, kolmogorov_check, spectral_report, GaugeGroup, SpectralReport};

/// Largest number of even basis elements enumerated by the split check.
pub const SPLIT_BASIS_CAP: usize = 65536;

fn reversal_permutation(d: usize, n: usize) -> Vec<usize> {
    Word::all(d, n).iter().map(|w| w.reversed().index(d)).collect()
}

/// `σ_n = σ_nᵗ` for every `n ≤ n_max`.
pub fn is_real(csys: &CanonicalSystem, n_max: usize) -> Result<bool> {
    let tol = csys.tolerances().compare;
    for n in 1..=n_max {
        let s = reduced_density(csys, n)?.sigma;
        if max_abs(&(&s - s.transpose())) > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `σ_n = R σ_n R` for every `n ≤ n_max`, `R` the site-order reversal.
pub fn is_lattice_symmetric(csys: &CanonicalSystem, n_max: usize) -> Result<bool> {
    let tol = csys.tolerances().compare;
    for n in 1..=n_max {
        let s = reduced_density(csys, n)?.sigma;
        let perm = reversal_permutation(csys.d(), n);
        let reflected = CMatrix::from_fn(s.nrows(), s.ncols(), |r, c| s[(perm[r], perm[c])]);
        if max_abs(&(&s - reflected)) > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailedBalance {
    pub real: bool,
    pub lattice_symmetric: bool,
    /// `real ∧ lattice_symmetric`, verified to depth `depth`.
    pub detailed_balance: bool,
    pub depth: usize,
    /// KMS symmetry of the Markov map.
    pub kms_symmetric: bool,
    pub kms_defect: f64,
    /// Set when the two detectors disagree.
    pub warning: Option<String>,
}

pub fn detailed_balance(csys: &CanonicalSystem, kms: &KmsSpace, n_max: usize) -> Result<DetailedBalance> {
    let real = is_real(csys, n_max)?;
    let lattice_symmetric = is_lattice_symmetric(csys, n_max)?;
    let kms_check = kms.detailed_balance_check(csys.tolerances().compare);
    let detailed_balance = real && lattice_symmetric;
    let warning = (detailed_balance != kms_check.symmetric).then(|| {
        format!(
            "state-level detailed balance is {detailed_balance} but KMS symmetry of the Markov map is {} (defect {:e})",
            kms_check.symmetric, kms_check.defect
        )
    });
    Ok(DetailedBalance {
        real,
        lattice_symmetric,
        detailed_balance,
        depth: n_max,
        kms_symmetric: kms_check.symmetric,
        kms_defect: kms_check.defect,
        warning,
    })
}

/// `T[p, p′] = tr(ρ^{1/2} τ^{power}(v_I v_J*) ρ^{1/2} w_{c′}* w_c)` with
/// `p = (I′, J′)` dual words read from site 0 outward, `c = Ĩ′`, `c′ = J̃′`, and
/// `p′ = (I, J)` right words. This is `ω(e^{c}_{c′} ⊗ 1^{⊗power} ⊗ e^{I}_{J})`
/// evaluated in the standard form.
pub fn two_sided_table(csys: &CanonicalSystem, dual: &DualSystem, n: usize, power: usize) -> Result<CMatrix> {
    let d = csys.d();
    let half = window_dim(d, n)?;
    let dim = window_dim(d, 2 * n)?;
    let k = csys.k();
    let rh = dual.rho_half();
    let v = csys.system().all_word_operators(n);
    let w = dual.all_chain_words(n);
    let rev = reversal_permutation(d, n);
    let mut right = CMatrix::zeros(k * k, dim);
    let mut left = CMatrix::zeros(dim, k * k);
    for i in 0..half {
        for j in 0..half {
            let mut e = &v[i] * v[j].adjoint();
            for _ in 0..power {
                e = csys.tau(&e);
            }
            right.set_column(i * half + j, &vectorize(&(rh * e * rh)));
            let f = w[rev[j]].adjoint() * &w[rev[i]];
            left.set_row(i * half + j, &vectorize(&f.transpose()).transpose());
        }
    }
    Ok(left * right)
}

/// `P[p, p′] = φ₀(v_{Ĩ′} v_{J̃′}*) φ₀(v_I v_J*)`, the product of the two
/// one-sided evaluations.
pub fn product_table(csys: &CanonicalSystem, n: usize) -> Result<CMatrix> {
    let d = csys.d();
    let half = window_dim(d, n)?;
    let dim = window_dim(d, 2 * n)?;
    let v = csys.system().all_word_operators(n);
    let rev = reversal_permutation(d, n);
    let one: Vec<Complex64> = (0..dim)
        .map(|p| csys.phi0(&(&v[p / half] * v[p % half].adjoint())))
        .collect();
    let left: Vec<Complex64> = (0..dim)
        .map(|p| one[rev[p / half] * half + rev[p % half]])
        .collect();
    Ok(CMatrix::from_fn(dim, dim, |p, q| left[p] * one[q]))
}

/// Gram matrix `G[a, b] = ω(J(x_a) x_b)` over matrix units `x = e^{I}_{J}` on sites `1..n`.
pub fn reflection_gram(csys: &CanonicalSystem, dual: &DualSystem, n: usize) -> Result<CMatrix> {
    two_sided_table(csys, dual, n, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionPositivity {
    pub psd: bool,
    pub min_eig: f64,
    pub hermiticity_defect: f64,
    pub n: usize,
}

pub const RP_TOL: f64 = 1e-9;

pub fn reflection_positivity_check(csys: &CanonicalSystem, dual: &DualSystem, n: usize) -> Result<ReflectionPositivity> {
    let g = reflection_gram(csys, dual, n)?;
    let hermiticity_defect = max_abs(&(&g - g.adjoint()));
    let min_eig = hermitian_eigenvalues(&hermitian_part(&g))[0];
    Ok(ReflectionPositivity {
        psd: min_eig >= -RP_TOL && hermiticity_defect <= RP_TOL,
        min_eig,
        hermiticity_defect,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "period", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NotPureReason {
    NonErgodic,
    PeripheralPeriod(usize),
    /// Peripheral eigenvalues other than a simple group of roots of unity.
    PeripheralSpectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Purity {
    Pure,
    NotPure { why: NotPureReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityCertificate {
    pub purity: Purity,
    pub iterates: Vec<f64>,
}

pub fn purity_certificate(csys: &CanonicalSystem, n_max: usize) -> Result<PurityCertificate> {
    let kol = kolmogorov_check(csys, n_max)?;
    let purity = if kol.spectral_pass {
        Purity::Pure
    } else if csys.fixed_dim() > 1 {
        Purity::NotPure { why: NotPureReason::NonErgodic }
    } else {
        let report = spectral_report(&build_transfer(csys), csys.tolerances().spectral)?;
        match report.gauge_period {
            Some(m) if m > 1 => Purity::NotPure { why: NotPureReason::PeripheralPeriod(m) },
            _ => Purity::NotPure { why: NotPureReason::PeripheralSpectrum },
        }
    };
    Ok(PurityCertificate { purity, iterates: kol.iterates })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub distance: usize,
    /// `|ω(Q₁ θ_k(Q₂)) − ω(Q₁) ω(Q₂)|`.
    pub connected: f64,
    /// `e^{δ* k}` times the connected correlation; absent when `δ*` is unbounded.
    pub weighted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub alpha: f64,
    /// `−ln α − margin`; `None` when `α = 0` and every rate is certified.
    pub delta_star: Option<f64>,
    pub margin: f64,
    pub samples: Vec<DecaySample>,
    /// Every weighted sample is at most the distance-1 value.
    pub bounded: bool,
    pub warning: Option<String>,
}

pub const DECAY_MAX_DISTANCE: usize = 12;

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
    let a = CMatrix::from_fn(d, d, |_, _| cplx(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    hermitian_part(&a)
}

pub fn decay_certificate(csys: &CanonicalSystem, margin: f64, seed: u64) -> Result<DecayCertificate> {
    let tol = csys.tolerances().spectral;
    let report = spectral_report(&build_transfer(csys), tol)?;
    let alpha = report.alpha;
    if alpha >= 1.0 - tol {
        return Err(Error::AlphaIsOne { alpha });
    }
    let warning = (!(report.peripheral.len() == 1 && report.fixed_dim == 1))
        .then(|| "state is not pure; the decay rate is reported without a purity guarantee".to_string());
    let delta_star = (alpha > 0.0).then(|| -alpha.ln() - margin);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = csys.d();
    let q1 = WindowObservable::single_site(0, random_hermitian(&mut rng, d))?;
    let q2 = WindowObservable::single_site(0, random_hermitian(&mut rng, d))?;
    let disconnected = expectation(csys, &q1)? * expectation(csys, &q2)?;
    let mut samples = Vec::with_capacity(DECAY_MAX_DISTANCE);
    for distance in 1..=DECAY_MAX_DISTANCE {
        let value = two_point(csys, &q1, &q2, distance as i64 - 1)?;
        let connected = (value - disconnected).norm();
        let weighted = delta_star.map(|ds| (ds * distance as f64).exp() * connected);
        samples.push(DecaySample { distance, connected, weighted });
    }
    let compare = csys.tolerances().compare;
    let bounded = match delta_star {
        Some(_) => {
            let first = samples[0].weighted.unwrap_or(0.0);
            samples.iter().all(|s| s.weighted.unwrap_or(0.0) <= first * (1.0 + 1e-6) + compare)
        }
        None => samples.iter().all(|s| s.connected <= compare),
    };
    Ok(DecayCertificate { alpha, delta_star, margin, samples, bounded, warning })
}

/// A two-sided window observable pushed `k` sites away from the bond on each
/// side: the left block occupies `−k−n+1..−k` and the right block `k+1..k+n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaHat {
    pub n: usize,
    pub k: usize,
    pub left_first_site: i64,
    pub right_first_site: i64,
    /// Coefficients `q(I′,J′ | I,J)`.
    pub q: CMatrix,
    pub d: usize,
}

fn check_bond_window(q: &WindowObservable) -> Result<usize> {
    if !q.n_sites().is_multiple_of(2) || q.first_site() != 1 - (q.n_sites() / 2) as i64 {
        return Err(Error::ShapeMismatch(format!(
            "expected a window symmetric around the bond, got sites {}..{}",
            q.first_site(),
            q.last_site()
        )));
    }
    Ok(q.n_sites() / 2)
}

pub fn theta_hat(q: &WindowObservable, k: usize) -> Result<ThetaHat> {
    let n = check_bond_window(q)?;
    Ok(ThetaHat {
        n,
        k,
        left_first_site: -(k as i64) - n as i64 + 1,
        right_first_site: k as i64 + 1,
        q: two_sided_coefficients(q)?,
        d: q.d(),
    })
}

impl ThetaHat {
    /// The same observable as a single window with identities in the gap.
    pub fn as_window(&self) -> Result<WindowObservable> {
        let base = crate::state::from_two_sided_coefficients(&self.q, self.n, self.d)?;
        let half = window_dim(self.d, self.n)?;
        let gap = identity(window_dim(self.d, 2 * self.k)?);
        let mut out = CMatrix::zeros(half * half * gap.nrows(), half * half * gap.nrows());
        // split rows/cols of the chain matrix into (left, right) blocks and insert the gap
        let c = base.coeffs();
        for r in 0..c.nrows() {
            for col in 0..c.ncols() {
                let z = c[(r, col)];
                if z == cplx(0.0, 0.0) {
                    continue;
                }
                let (rl, rr) = (r / half, r % half);
                let (cl, cr) = (col / half, col % half);
                for g in 0..gap.nrows() {
                    let row = (rl * gap.nrows() + g) * half + rr;
                    let cc = (cl * gap.nrows() + g) * half + cr;
                    out[(row, cc)] = z;
                }
            }
        }
        WindowObservable::new(self.left_first_site, 2 * self.n + 2 * self.k, self.d, out)
    }
}

/// `ω(θ̂_k(Q))` through the standard form with `τ^{2k}` bridging the gap.
pub fn evaluate_theta_hat(csys: &CanonicalSystem, dual: &DualSystem, th: &ThetaHat) -> Result<Complex64> {
    let table = two_sided_table(csys, dual, th.n, 2 * th.k)?;
    Ok(th.q.iter().zip(table.iter()).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitBoundRow {
    pub n: usize,
    pub k: usize,
    /// `max |ω(θ̂_k Q) − ω_L⊗ω_R(θ̂_k Q)| / ‖Q‖` over the even basis.
    pub measured: f64,
    /// `2 α^{2k}`, the bound per unit operator norm.
    pub bound: f64,
    pub passed: bool,
    /// Largest gap between the factorized `Σ φ₀(J x J (τ_{2k} − φ₀)(x))` route
    /// and the direct evaluation, per unit norm.
    pub route_residual: f64,
    pub basis_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SplitVerdict {
    Certified,
    NotApplicable(String),
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCheck {
    pub verdict: SplitVerdict,
    pub rows: Vec<SplitBoundRow>,
}

/// Inputs to the split check that come from other detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPreconditions {
    pub detailed_balance: bool,
    pub pure: bool,
    pub alpha: f64,
}

pub const SPLIT_SLACK: f64 = 1e-8;

/// One element of the Hermitian basis of coefficient space, as at most two entries.
#[derive(Debug, Clone, Copy)]
struct EvenElement {
    entries: [(usize, usize, Complex64); 2],
    len: usize,
}

fn even_basis(dim: usize) -> impl Iterator<Item = EvenElement> {
    let one = cplx(1.0, 0.0);
    let i = cplx(0.0, 1.0);
    let zero = (0, 0, cplx(0.0, 0.0));
    (0..dim).flat_map(move |p| {
        let diag = std::iter::once(EvenElement { entries: [(p, p, one), zero], len: 1 });
        let off = ((p + 1)..dim).flat_map(move |q| {
            [
                EvenElement { entries: [(p, q, one), (q, p, one)], len: 2 },
                EvenElement { entries: [(p, q, i), (q, p, -i)], len: 2 },
            ]
        });
        diag.chain(off)
    })
}

/// Operator norm of a sparse chain matrix given by a few entries.
fn sparse_norm(entries: &[(usize, usize, Complex64)]) -> f64 {
    let mut rows: Vec<usize> = entries.iter().map(|e| e.0).collect();
    let mut cols: Vec<usize> = entries.iter().map(|e| e.1).collect();
    rows.sort_unstable();
    rows.dedup();
    cols.sort_unstable();
    cols.dedup();
    let mut m = CMatrix::zeros(rows.len(), cols.len());
    for &(r, c, z) in entries {
        let ri = rows.binary_search(&r).unwrap();
        let ci = cols.binary_search(&c).unwrap();
        m[(ri, ci)] += z;
    }
    spectral_norm(&m)
}

/// Map a coefficient index pair `(p, p′)` to the chain-matrix position.
fn chain_position(p: usize, pp: usize, half: usize, rev: &[usize]) -> (usize, usize) {
    let (ip, jp) = (p / half, p % half);
    let (i, j) = (pp / half, pp % half);
    (rev[ip] * half + i, rev[jp] * half + j)
}

pub fn split_bound_check(
    csys: &CanonicalSystem,
    dual: &DualSystem,
    pre: SplitPreconditions,
    n_max: usize,
    k_max: usize,
) -> Result<SplitCheck> {
    let tol = csys.tolerances().spectral;
    if !pre.detailed_balance {
        return Ok(SplitCheck { verdict: SplitVerdict::NotApplicable("state is not in detailed balance".into()), rows: vec![] });
    }
    if !pre.pure {
        return Ok(SplitCheck { verdict: SplitVerdict::NotApplicable("state is not pure".into()), rows: vec![] });
    }
    if pre.alpha >= 1.0 - tol {
        return Ok(SplitCheck { verdict: SplitVerdict::NotApplicable(format!("alpha = {} is not below 1", pre.alpha)), rows: vec![] });
    }
    let d = csys.d();
    let k_bond = csys.k();
    let rh = dual.rho_half().clone();
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let half = window_dim(d, n)?;
        let dim = window_dim(d, 2 * n)?;
        let basis_size = dim * dim;
        if basis_size > SPLIT_BASIS_CAP {
            return Err(Error::SizeCapExceeded { what: "even basis size", requested: basis_size, cap: SPLIT_BASIS_CAP });
        }
        let rev = reversal_permutation(d, n);
        let product = product_table(csys, n)?;
        let v = csys.system().all_word_operators(n);
        // right-window operators E_{p′} = v_I v_J* and left partners v_{J′} v_{I′}*
        let e: Vec<CMatrix> = (0..dim).map(|p| &v[p / half] * v[p % half].adjoint()).collect();
        let mut evolved = e.clone();
        let mut power = 0;
        for k in 1..=k_max {
            while power < 2 * k {
                evolved = evolved.iter().map(|x| csys.tau(x)).collect();
                power += 1;
            }
            let direct = two_sided_table(csys, dual, n, 2 * k)?;
            let centered: Vec<CMatrix> = evolved
                .iter()
                .zip(&e)
                .map(|(z, x)| z - identity(k_bond) * csys.phi0(x))
                .collect();
            let mut measured = 0.0_f64;
            let mut route_residual = 0.0_f64;
            for el in even_basis(dim) {
                let entries = &el.entries[..el.len];
                let chain: Vec<(usize, usize, Complex64)> = entries
                    .iter()
                    .map(|&(p, pp, z)| {
                        let (r, c) = chain_position(p, pp, half, &rev);
                        (r, c, z)
                    })
                    .collect();
                let norm = sparse_norm(&chain);
                let diff: Complex64 = entries.iter().map(|&(p, pp, z)| z * (direct[(p, pp)] - product[(p, pp)])).sum();
                measured = measured.max(diff.norm() / norm);
                let route = factorized_route(entries, &e, &centered, &rh);
                route_residual = route_residual.max((route - diff).norm() / norm);
            }
            let bound = 2.0 * pre.alpha.powi(2 * k as i32);
            rows.push(SplitBoundRow {
                n,
                k,
                measured,
                bound,
                passed: measured <= bound + SPLIT_SLACK,
                route_residual,
                basis_size,
            });
        }
    }
    let verdict = if rows.iter().all(|r| r.passed) { SplitVerdict::Certified } else { SplitVerdict::Failed };
    Ok(SplitCheck { verdict, rows })
}

/// `Σ_± ± Σ_K φ₀(J x_K J (τ_{2k} − φ₀)(x_K))` for `q = q₊ − q₋`, `q_± = b*b`,
/// `x_K = Σ b[K, (I,J)] v_I v_J*`, with `φ₀(J x J y) = tr(ρ^{1/2} y ρ^{1/2} x*)`.
fn factorized_route(
    entries: &[(usize, usize, Complex64)],
    e: &[CMatrix],
    centered: &[CMatrix],
    rh: &CMatrix,
) -> Complex64 {
    let mut support: Vec<usize> = entries.iter().flat_map(|&(p, pp, _)| [p, pp]).collect();
    support.sort_unstable();
    support.dedup();
    let s = support.len();
    let mut q = CMatrix::zeros(s, s);
    for &(p, pp, z) in entries {
        let a = support.binary_search(&p).unwrap();
        let b = support.binary_search(&pp).unwrap();
        q[(a, b)] += z;
    }
    let (plus, minus) = positive_negative_parts(&q, 1e-12);
    let k = rh.nrows();
    let mut total = cplx(0.0, 0.0);
    for (sign, part) in [(1.0, plus), (-1.0, minus)] {
        let (b, _) = psd_power(&part, 0.5, 0.0);
        for row in 0..s {
            let mut x = CMatrix::zeros(k, k);
            let mut z = CMatrix::zeros(k, k);
            for (col, &p) in support.iter().enumerate() {
                let c = b[(row, col)];
                if c != cplx(0.0, 0.0) {
                    x += &e[p] * c;
                    z += &centered[p] * c;
                }
            }
            total += trace_product(&(rh * z * rh), &x.adjoint()) * sign;
        }
    }
    total
}

/// `|ω(Q) − Σ_K φ₀(J x_K J x_K)|` for a positive semidefinite coefficient
/// matrix `q` on the window `−n+1..n`, with `q = b*b`.
pub fn psd_factorization_residual(csys: &CanonicalSystem, dual: &DualSystem, q: &CMatrix, n: usize) -> Result<f64> {
    let d = csys.d();
    let half = window_dim(d, n)?;
    let dim = window_dim(d, 2 * n)?;
    if q.nrows() != dim || q.ncols() != dim {
        return Err(Error::ShapeMismatch(format!("expected {dim}x{dim} coefficients")));
    }
    let v = csys.system().all_word_operators(n);
    let rh = dual.rho_half();
    let (b, _) = psd_power(q, 0.5, 0.0);
    let k = csys.k();
    let mut sum = cplx(0.0, 0.0);
    for row in 0..dim {
        let mut x = CMatrix::zeros(k, k);
        for col in 0..dim {
            x += &v[col / half] * v[col % half].adjoint() * b[(row, col)];
        }
        sum += trace_product(&(rh * &x * rh), &x.adjoint());
    }
    let window = crate::state::from_two_sided_coefficients(q, n, d)?;
    let value = reduced_density(csys, 2 * n)?.expectation(&window)?;
    Ok((value - sum).norm())
}

/// `Q = Q_even + Q_odd` with `J(Q_even) = Q_even` and `J(Q_odd) = −Q_odd`,
/// where `J` acts on coefficients as `q ↦ q*`.
pub fn even_odd_split(q: &WindowObservable) -> Result<(WindowObservable, WindowObservable)> {
    let n = check_bond_window(q)?;
    let c = two_sided_coefficients(q)?;
    let even = (&c + c.adjoint()) * cplx(0.5, 0.0);
    let odd = (&c - c.adjoint()) * cplx(0.5, 0.0);
    Ok((
        crate::state::from_two_sided_coefficients(&even, n, q.d())?,
        crate::state::from_two_sided_coefficients(&odd, n, q.d())?,
    ))
}

/// Parameters of [`full_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub symmetry_depth: usize,
    pub reflection_window: usize,
    pub split_window: usize,
    pub split_k_max: usize,
    pub kolmogorov_steps: usize,
    pub gauge_word_len: usize,
    pub decay_margin: f64,
    pub decay_seed: u64,
}

impl Default for ReportParams {
    fn default() -> Self {
        ReportParams {
            symmetry_depth: 4,
            reflection_window: 2,
            split_window: 2,
            split_k_max: 6,
            kolmogorov_steps: 8,
            gauge_word_len: 4,
            decay_margin: 0.05,
            decay_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecayOutcome {
    Certified(DecayCertificate),
    AlphaIsOne { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub ergodic: bool,
    pub fixed_dim: usize,
    pub bond_dim: usize,
    pub original_bond_dim: usize,
    pub algebra_dim: usize,
    pub pure: Purity,
    pub kolmogorov_iterates: Vec<f64>,
    pub gauge_g: GaugeGroup,
    pub real: bool,
    pub lattice_symmetric: bool,
    pub detailed_balance: bool,
    pub symmetry_depth: usize,
    pub kms_symmetric: bool,
    pub kms_defect: f64,
    pub reflection_positive: bool,
    pub reflection_min_eig: f64,
    pub haag_bond: bool,
    pub haag_span_dim: usize,
    pub alpha: f64,
    pub alpha_kms: f64,
    pub delta: DeltaTriviality,
    pub dual_condition: f64,
    pub decay: DecayOutcome,
    pub split: SplitCheck,
    pub spectral: SpectralReport,
    pub warnings: Vec<String>,
}

impl CertificateReport {
    /// Violations of `detailed_balance ⇒ real ∧ lattice_symmetric`,
    /// `pure ⇒ ergodic` and `split certified ⇒ alpha < 1`.
    pub fn consistency_violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.detailed_balance && !(self.real && self.lattice_symmetric) {
            out.push("detailed balance without real and lattice symmetric");
        }
        if self.pure == Purity::Pure && !self.ergodic {
            out.push("pure but not ergodic");
        }
        if self.split.verdict == SplitVerdict::Certified && self.alpha >= 1.0 {
            out.push("split certified with alpha = 1");
        }
        out
    }
}

pub fn full_report(csys: &CanonicalSystem, params: &ReportParams) -> Result<CertificateReport> {
    let tol = *csys.tolerances();
    let modular = ModularData::new(csys)?;
    let dual = modular.dual_system(csys)?;
    let kms = modular.kms_space(csys)?;
    let spectral = spectral_report(&build_transfer(csys), tol.spectral)?;
    let purity = purity_certificate(csys, params.kolmogorov_steps)?;
    let gauge_g = gauge_group_detect(csys, params.gauge_word_len)?;
    let db = detailed_balance(csys, &kms, params.symmetry_depth)?;
    let mut warnings = Vec::new();
    if let Some(w) = &db.warning {
        warnings.push(w.clone());
    }
    let mut reflection_min_eig = f64::INFINITY;
    let mut reflection_positive = true;
    for n in 1..=params.reflection_window {
        let rp = reflection_positivity_check(csys, &dual, n)?;
        reflection_min_eig = reflection_min_eig.min(rp.min_eig);
        reflection_positive &= rp.psd;
    }
    let k = csys.k();
    let haag = haag_duality_bond_check(&dual, 2 * k * k)?;
    let alpha_kms = kms.t_gap()?;
    if (alpha_kms - spectral.alpha).abs() > 1e-6 {
        warnings.push(format!("spectral alpha {} and KMS alpha {} disagree", spectral.alpha, alpha_kms));
    }
    let decay = match decay_certificate(csys, params.decay_margin, params.decay_seed) {
        Ok(c) => {
            if let Some(w) = &c.warning {
                warnings.push(w.clone());
            }
            DecayOutcome::Certified(c)
        }
        Err(Error::AlphaIsOne { alpha }) => DecayOutcome::AlphaIsOne { alpha },
        Err(e) => return Err(e),
    };
    let pure = purity.purity == Purity::Pure;
    let split = split_bound_check(
        csys,
        &dual,
        SplitPreconditions { detailed_balance: db.detailed_balance, pure, alpha: spectral.alpha },
        params.split_window,
        params.split_k_max,
    )?;
    for row in &split.rows {
        if row.route_residual > 1e-8 {
            warnings.push(format!(
                "factorized split route deviates from direct evaluation by {:e} at n={}, k={}",
                row.route_residual, row.n, row.k
            ));
            break;
        }
    }
    let delta = delta_triviality_check(csys, tol.compare);
    let report = CertificateReport {
        ergodic: csys.ergodic(),
        fixed_dim: csys.fixed_dim(),
        bond_dim: k,
        original_bond_dim: csys.original_k(),
        algebra_dim: csys.algebra_dim(),
        pure: purity.purity,
        kolmogorov_iterates: purity.iterates,
        gauge_g,
        real: db.real,
        lattice_symmetric: db.lattice_symmetric,
        detailed_balance: db.detailed_balance,
        symmetry_depth: params.symmetry_depth,
        kms_symmetric: db.kms_symmetric,
        kms_defect: db.kms_defect,
        reflection_positive,
        reflection_min_eig,
        haag_bond: haag.holds,
        haag_span_dim: haag.span_dim,
        alpha: spectral.alpha,
        alpha_kms,
        delta,
        dual_condition: dual.condition(),
        decay,
        split,
        spectral,
        warnings,
    };
    let violations = report.consistency_violations();
    if !violations.is_empty() {
        return Err(Error::NumericalFailure(format!("inconsistent report: {}", violations.join("; "))));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular::ModularData;
    use crate::popescu::{PopescuSystem, Tolerances};
    use crate::state::two_sided_eval;

    fn canon(v: Vec<CMatrix>) -> CanonicalSystem {
        PopescuSystem::new(v, 1e-9).unwrap().canonicalize(&Tolerances::default()).unwrap()
    }

    fn aklt() -> CanonicalSystem {
        let s = 1.0 / 3f64.sqrt();
        let x = CMatrix::from_row_slice(2, 2, &[cplx(0., 0.), cplx(s, 0.), cplx(s, 0.), cplx(0., 0.)]);
        let y = CMatrix::from_row_slice(2, 2, &[cplx(0., 0.), cplx(0., -s), cplx(0., s), cplx(0., 0.)]);
        let z = CMatrix::from_row_slice(2, 2, &[cplx(s, 0.), cplx(0., 0.), cplx(0., 0.), cplx(-s, 0.)]);
        canon(vec![x, y, z])
    }

    /// The same state written with spin-z eigenbasis Kraus operators.
    fn aklt_sz() -> CanonicalSystem {
        let a = (2.0f64 / 3.0).sqrt();
        let b = (1.0f64 / 3.0).sqrt();
        let plus = CMatrix::from_row_slice(2, 2, &[cplx(0., 0.), cplx(a, 0.), cplx(0., 0.), cplx(0., 0.)]);
        let zero = CMatrix::from_row_slice(2, 2, &[cplx(-b, 0.), cplx(0., 0.), cplx(0., 0.), cplx(b, 0.)]);
        let minus = CMatrix::from_row_slice(2, 2, &[cplx(0., 0.), cplx(0., 0.), cplx(-a, 0.), cplx(0., 0.)]);
        canon(vec![plus, zero, minus])
    }

    fn neel() -> CanonicalSystem {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = cplx(1.0, 0.0);
        canon(vec![a.clone(), a.transpose()])
    }

    fn product(c: &[Complex64]) -> CanonicalSystem {
        canon(c.iter().map(|&z| CMatrix::from_element(1, 1, z)).collect())
    }

    fn dual_of(c: &CanonicalSystem) -> DualSystem {
        ModularData::new(c).unwrap().dual_system(c).unwrap()
    }

    #[test]
    fn symmetry_examples() {
        let a = aklt();
        assert!(is_real(&a, 3).unwrap());
        assert!(is_lattice_symmetric(&a, 3).unwrap());
        let h = 1.0 / 2f64.sqrt();
        let complex = product(&[cplx(h, 0.0), cplx(0.0, h)]);
        assert!(!is_real(&complex, 2).unwrap());
        assert!(is_lattice_symmetric(&complex, 3).unwrap());
        let diag = canon(vec![
            CMatrix::from_row_slice(2, 2, &[cplx(0.6, 0.), cplx(0., 0.), cplx(0., 0.), cplx(0.8, 0.)]),
            CMatrix::from_row_slice(2, 2, &[cplx(0.8, 0.), cplx(0., 0.), cplx(0., 0.), cplx(0.6, 0.)]),
        ]);
        assert!(is_real(&diag, 3).unwrap());
    }

    #[test]
    fn reflection_gram_entries_are_two_sided_values() {
        let a = aklt();
        let dual = dual_of(&a);
        let g = reflection_gram(&a, &dual, 1).unwrap();
        for ia in 0..3 {
            for ja in 0..3 {
                for ib in 0..3 {
                    for jb in 0..3 {
                        let left = WindowObservable::matrix_unit(0, 3, &Word::new(vec![ia]), &Word::new(vec![ja])).unwrap();
                        let right = WindowObservable::matrix_unit(1, 3, &Word::new(vec![ib]), &Word::new(vec![jb])).unwrap();
                        let v = two_sided_eval(&a, &dual, &left, &right).unwrap();
                        assert!((g[(ia * 3 + ja, ib * 3 + jb)] - v).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn reflection_positivity_examples() {
        let a = aklt();
        let rp = reflection_positivity_check(&a, &dual_of(&a), 2).unwrap();
        assert!(rp.psd, "{rp:?}");
        let h = 1.0 / 2f64.sqrt();
        let p = product(&[cplx(h, 0.0), cplx(h, 0.0)]);
        let rp = reflection_positivity_check(&p, &dual_of(&p), 1).unwrap();
        assert!(rp.psd);
        // identity-only observable: G restricted to x = 1 is ω(1) = 1
        let g = reflection_gram(&a, &dual_of(&a), 1).unwrap();
        let ones: Vec<usize> = (0..3).map(|i| i * 3 + i).collect();
        let total: Complex64 = ones.iter().flat_map(|&r| ones.iter().map(move |&c| (r, c))).map(|(r, c)| g[(r, c)]).sum();
        assert!((total - cplx(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn spin_z_basis_is_not_reflection_positive() {
        let s = aklt_sz();
        assert!(is_real(&s, 3).unwrap());
        assert!(is_lattice_symmetric(&s, 3).unwrap());
        let rp = reflection_positivity_check(&s, &dual_of(&s), 1).unwrap();
        assert!(!rp.psd);
        assert!((rp.min_eig + 2.0 / 9.0).abs() < 1e-9, "{}", rp.min_eig);
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity_certificate(&aklt(), 8).unwrap().purity, Purity::Pure);
        assert_eq!(
            purity_certificate(&neel(), 8).unwrap().purity,
            Purity::NotPure { why: NotPureReason::PeripheralPeriod(2) }
        );
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(purity_certificate(&product(&[cplx(h, 0.0), cplx(h, 0.0)]), 8).unwrap().purity, Purity::Pure);
        let ghz = canon(vec![
            identity(2) * cplx(h, 0.0),
            CMatrix::from_row_slice(2, 2, &[cplx(0., 0.), cplx(h, 0.), cplx(h, 0.), cplx(0., 0.)]),
        ]);
        assert_eq!(purity_certificate(&ghz, 8).unwrap().purity, Purity::NotPure { why: NotPureReason::NonErgodic });
    }

    #[test]
    fn decay_examples() {
        let a = decay_certificate(&aklt(), 0.05, 1).unwrap();
        assert!((a.alpha - 1.0 / 3.0).abs() < 1e-10);
        assert!((a.delta_star.unwrap() - (3f64.ln() - 0.05)).abs() < 1e-9);
        assert!(a.bounded);
        let h = 1.0 / 2f64.sqrt();
        let p = decay_certificate(&product(&[cplx(h, 0.0), cplx(0.0, h)]), 0.05, 1).unwrap();
        assert_eq!(p.alpha, 0.0);
        assert!(p.delta_star.is_none());
        assert!(p.samples.iter().all(|s| s.connected < 1e-14));
        assert!(matches!(decay_certificate(&neel(), 0.05, 1), Err(Error::AlphaIsOne { .. })));
    }

    fn random_bond_window(d: usize, n: usize, seed: u64) -> WindowObservable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = d.pow(2 * n as u32);
        let c = CMatrix::from_fn(dim, dim, |_, _| cplx(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        WindowObservable::new(1 - n as i64, 2 * n, d, c).unwrap()
    }

    #[test]
    fn theta_hat_examples() {
        let a = aklt();
        let dual = dual_of(&a);
        let q = random_bond_window(3, 1, 5);
        let t0 = theta_hat(&q, 0).unwrap();
        assert_eq!(t0.as_window().unwrap(), q);
        let direct = reduced_density(&a, 2).unwrap().expectation(&q).unwrap();
        assert!((evaluate_theta_hat(&a, &dual, &t0).unwrap() - direct).norm() < 1e-12);

        let t2 = theta_hat(&q, 2).unwrap();
        let w = t2.as_window().unwrap();
        assert_eq!(w.first_site(), -2);
        assert_eq!(w.last_site(), 3);
        let brute = reduced_density(&a, w.n_sites()).unwrap().expectation(&w).unwrap();
        assert!((evaluate_theta_hat(&a, &dual, &t2).unwrap() - brute).norm() < 1e-12);

        let id = WindowObservable::identity(0, 2, 3).unwrap();
        for k in 0..4 {
            let t = theta_hat(&id, k).unwrap();
            assert!((evaluate_theta_hat(&a, &dual, &t).unwrap() - cplx(1.0, 0.0)).norm() < 1e-12);
        }
        assert!(matches!(theta_hat(&id.shifted_to(1), 1), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn even_odd_decomposition() {
        for seed in 0..5 {
            let q = random_bond_window(2, 1, seed);
            let (even, odd) = even_odd_split(&q).unwrap();
            assert!(max_abs(&(even.coeffs() + odd.coeffs() - q.coeffs())) < 1e-12);
            let (ee, eo) = even_odd_split(&even).unwrap();
            assert!(max_abs(eo.coeffs()) < 1e-12);
            assert!(max_abs(&(ee.coeffs() - even.coeffs())) < 1e-12);
            assert!(spectral_norm(even.coeffs()) <= spectral_norm(q.coeffs()) + 1e-12);
        }
    }

    #[test]
    fn psd_factorization_identity() {
        let a = aklt();
        let dual = dual_of(&a);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = CMatrix::from_fn(9, 9, |_, _| cplx(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let q = b.adjoint() * b;
        assert!(psd_factorization_residual(&a, &dual, &q, 1).unwrap() < 1e-12);
    }

    #[test]
    fn split_aklt_window_one() {
        let a = aklt();
        let dual = dual_of(&a);
        let pre = SplitPreconditions { detailed_balance: true, pure: true, alpha: 1.0 / 3.0 };
        let check = split_bound_check(&a, &dual, pre, 1, 6).unwrap();
        assert_eq!(check.verdict, SplitVerdict::Certified);
        assert_eq!(check.rows.len(), 6);
        for row in &check.rows {
            assert!(row.measured <= row.bound + SPLIT_SLACK, "{row:?}");
            assert!(row.route_residual < 1e-12, "{row:?}");
            assert!(row.measured > 0.0);
        }
    }

    #[test]
    fn split_product_is_exact() {
        let h = 1.0 / 2f64.sqrt();
        let p = product(&[cplx(h, 0.0), cplx(h, 0.0)]);
        let pre = SplitPreconditions { detailed_balance: true, pure: true, alpha: 0.0 };
        let check = split_bound_check(&p, &dual_of(&p), pre, 2, 3).unwrap();
        assert_eq!(check.verdict, SplitVerdict::Certified);
        assert!(check.rows.iter().all(|r| r.measured < 1e-15));
    }

    #[test]
    fn split_not_applicable() {
        let n = neel();
        let pre = SplitPreconditions { detailed_balance: true, pure: false, alpha: 1.0 };
        let check = split_bound_check(&n, &dual_of(&n), pre, 1, 2).unwrap();
        assert!(matches!(check.verdict, SplitVerdict::NotApplicable(_)));
    }

    #[test]
    fn full_report_neel_and_product() {
        let r = full_report(&neel(), &ReportParams::default()).unwrap();
        assert!(r.ergodic);
        assert_eq!(r.pure, Purity::NotPure { why: NotPureReason::PeripheralPeriod(2) });
        assert!((r.alpha - 1.0).abs() < 1e-12);
        assert!(matches!(r.split.verdict, SplitVerdict::NotApplicable(_)));
        assert!(matches!(r.decay, DecayOutcome::AlphaIsOne { .. }));

        let h = 1.0 / 2f64.sqrt();
        let p = full_report(&product(&[cplx(h, 0.0), cplx(h, 0.0)]), &ReportParams::default()).unwrap();
        assert_eq!(p.pure, Purity::Pure);
        assert_eq!(p.alpha, 0.0);
        assert_eq!(p.split.verdict, SplitVerdict::Certified);
    }

    #[test]
    fn full_report_aklt() {
        let r = full_report(&aklt(), &ReportParams::default()).unwrap();
        assert!(r.ergodic && r.real && r.lattice_symmetric && r.detailed_balance);
        assert!(r.kms_symmetric, "{}", r.kms_defect);
        assert_eq!(r.pure, Purity::Pure);
        assert_eq!(r.gauge_g, GaugeGroup::Finite(1));
        assert!(r.reflection_positive);
        assert!(r.haag_bond);
        assert!((r.alpha - 1.0 / 3.0).abs() < 1e-10);
        assert!((r.alpha_kms - 1.0 / 3.0).abs() < 1e-10);
        assert!(r.delta.delta_is_identity && r.delta.all_v_selfadjoint);
        assert_eq!(r.split.verdict, SplitVerdict::Certified);
        assert_eq!(r.split.rows.len(), 12);
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        assert!(matches!(r.decay, DecayOutcome::Certified(ref c) if c.bounded));
    }
}
