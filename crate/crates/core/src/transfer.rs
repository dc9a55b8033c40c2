//! Transfer operator `x ↦ Σ v x v*`, its spectrum, peripheral structure,
//! mixing diagnostics, gauge detection and site blocking.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cplx, eigenvalues, hermitian_basis, identity, trace_product, unvectorize, vectorize, CMatrix,
};
use crate::popescu::{transfer_matrix, CanonicalSystem, PopescuSystem};
use crate::state::window_dim;

/// Snap tolerance for recognizing eigenvalue phases as roots of unity.
pub const PHASE_SNAP_TOL: f64 = 1e-6;

/// Column-major matrix of the Markov map on `M_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOperator {
    mat: CMatrix,
    k: usize,
}

impl TransferOperator {
    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        unvectorize(&(&self.mat * vectorize(x)), self.k, self.k)
    }
}

pub fn build_transfer(csys: &CanonicalSystem) -> TransferOperator {
    TransferOperator { mat: transfer_matrix(csys.kraus()), k: csys.k() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// All eigenvalues, by decreasing modulus and then increasing phase.
    pub eigenvalues: Vec<Complex64>,
    /// Eigenvalues with `|λ| ≥ 1 − tol`.
    pub peripheral: Vec<Complex64>,
    /// Spectral radius after removing one copy of the eigenvalue 1.
    pub alpha: f64,
    /// `m` when the peripheral spectrum is exactly the simple `m`-th roots of unity.
    pub gauge_period: Option<usize>,
    /// Number of eigenvalues within `tol` of 1.
    pub fixed_dim: usize,
}

fn phase(z: &Complex64) -> f64 {
    let p = z.arg();
    // keep −π on the same side as π
    if p <= -std::f64::consts::PI + 1e-12 {
        std::f64::consts::PI
    } else {
        p
    }
}

pub fn spectral_report(top: &TransferOperator, tol: f64) -> Result<SpectralReport> {
    let mut evs = eigenvalues(&top.mat)?;
    if evs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure("non-finite eigenvalue".into()));
    }
    evs.sort_by(|a, b| {
        let (ma, mb) = (a.norm(), b.norm());
        if (ma - mb).abs() > tol {
            mb.total_cmp(&ma)
        } else {
            phase(a).total_cmp(&phase(b))
        }
    });
    let one = cplx(1.0, 0.0);
    let peripheral: Vec<Complex64> = evs.iter().cloned().filter(|z| z.norm() >= 1.0 - tol).collect();
    let fixed_dim = evs.iter().filter(|z| (**z - one).norm() <= tol).count();
    let alpha = deflated_radius(&evs);
    let gauge_period = roots_of_unity_period(&peripheral);
    Ok(SpectralReport { eigenvalues: evs, peripheral, alpha, gauge_period, fixed_dim })
}

/// Largest modulus once the eigenvalue closest to 1 is removed.
fn deflated_radius(evs: &[Complex64]) -> f64 {
    let one = cplx(1.0, 0.0);
    let skip = evs
        .iter()
        .enumerate()
        .min_by(|a, b| (*a.1 - one).norm().total_cmp(&(*b.1 - one).norm()))
        .map(|(i, _)| i);
    evs.iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max)
        .min(1.0)
}

/// `Some(m)` iff the list is exactly `{z : z^m = 1}`, each root once.
fn roots_of_unity_period(peripheral: &[Complex64]) -> Option<usize> {
    let m = peripheral.len();
    if m == 0 {
        return None;
    }
    let mut hit = vec![false; m];
    for z in peripheral {
        let turns = phase(z) / (2.0 * std::f64::consts::PI) * m as f64;
        let j = turns.round();
        if (turns - j).abs() > PHASE_SNAP_TOL * m as f64 || (z.norm() - 1.0).abs() > PHASE_SNAP_TOL {
            return None;
        }
        let slot = (j as i64).rem_euclid(m as i64) as usize;
        if hit[slot] {
            return None;
        }
        hit[slot] = true;
    }
    Some(m)
}

/// True iff the eigenvalue-1 space of the Markov map is one-dimensional.
pub fn ergodicity_check(csys: &CanonicalSystem) -> bool {
    csys.fixed_dim() == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovCheck {
    /// Peripheral spectrum is exactly `{1}`, simple.
    pub spectral_pass: bool,
    /// `iterates[n−1] = max_{a,b} |φ₀(τⁿ(x_a) τⁿ(x_b)) − φ₀(x_a) φ₀(x_b)|`.
    pub iterates: Vec<f64>,
}

pub fn kolmogorov_check(csys: &CanonicalSystem, n_max: usize) -> Result<KolmogorovCheck> {
    let tol = csys.tolerances().spectral;
    let report = spectral_report(&build_transfer(csys), tol)?;
    let spectral_pass = report.peripheral.len() == 1 && (report.peripheral[0] - cplx(1.0, 0.0)).norm() <= tol;
    let k = csys.k();
    let basis = hermitian_basis(k);
    let means: Vec<Complex64> = basis.iter().map(|x| csys.phi0(x)).collect();
    let mut current = basis.clone();
    let mut iterates = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        current = current.iter().map(|x| csys.tau(x)).collect();
        // X_a = τⁿ(x_a) − φ₀(x_a); φ₀(X_a X_b) = (Lᴴ R)[a, b]
        let n = basis.len();
        let mut l = CMatrix::zeros(k * k, n);
        let mut r = CMatrix::zeros(k * k, n);
        for (a, x) in current.iter().enumerate() {
            let centered = x - identity(k) * means[a];
            l.set_column(a, &vectorize(&(csys.rho() * &centered).adjoint()));
            r.set_column(a, &vectorize(&centered));
        }
        let d = l.adjoint() * r;
        iterates.push(d.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Ok(KolmogorovCheck { spectral_pass, iterates })
}

/// `g` with `H ⊇ {z : z^g = 1}`, or `Infinite` when all unequal-length word
/// expectations vanish up to the cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaugeGroup {
    Finite(usize),
    Infinite,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// gcd of `|I| − |J|` over pairs with `φ₀(v_I v_J*) ≠ 0`, `|I|, |J| ≤ word_len_max`.
pub fn gauge_group_detect(csys: &CanonicalSystem, word_len_max: usize) -> Result<GaugeGroup> {
    let d = csys.d();
    let k = csys.k();
    let tol = csys.tolerances().compare;
    window_dim(d, word_len_max)?;
    // columns vec(v_J) and vec(ρ v_I); tr(ρ v_I v_J*) = ⟨v_J, ρ v_I⟩
    let mut plain = Vec::with_capacity(word_len_max + 1);
    let mut weighted = Vec::with_capacity(word_len_max + 1);
    for n in 0..=word_len_max {
        let ops = csys.system().all_word_operators(n);
        let mut p = CMatrix::zeros(k * k, ops.len());
        let mut w = CMatrix::zeros(k * k, ops.len());
        for (i, op) in ops.iter().enumerate() {
            p.set_column(i, &vectorize(op));
            w.set_column(i, &vectorize(&(csys.rho() * op)));
        }
        plain.push(p);
        weighted.push(w);
    }
    let mut g = 0usize;
    for delta in 1..=word_len_max {
        if g != 0 && delta % g == 0 {
            continue;
        }
        let nonzero = (0..=word_len_max - delta).any(|short| {
            let long = short + delta;
            let m = plain[short].adjoint() * &weighted[long];
            m.iter().any(|z| z.norm() > tol)
        });
        if nonzero {
            g = gcd(g, delta);
            if g == 1 {
                break;
            }
        }
    }
    Ok(if g == 0 { GaugeGroup::Infinite } else { GaugeGroup::Finite(g) })
}

/// The system with alphabet `{v_I : |I| = m}` describing the `m`-site blocked chain.
pub fn block_system(csys: &CanonicalSystem, m: usize) -> Result<PopescuSystem> {
    if m == 0 {
        return Err(Error::ShapeMismatch("block size must be positive".into()));
    }
    window_dim(csys.d(), m)?;
    PopescuSystem::new(csys.system().all_word_operators(m), csys.system().tol().max(csys.tolerances().cuntz))
}

/// `max |φ₀(v_I v_J*)|` over `|I| = a`, `|J| = b`.
pub fn largest_word_expectation(csys: &CanonicalSystem, a: usize, b: usize) -> f64 {
    let left = csys.system().all_word_operators(a);
    let right = csys.system().all_word_operators(b);
    let mut best = 0.0_f64;
    for vi in &left {
        let rv = csys.rho() * vi;
        for vj in &right {
            best = best.max(trace_product(&rv, &vj.adjoint()).norm());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::popescu::Tolerances;

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

    fn neel() -> CanonicalSystem {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = cplx(1.0, 0.0);
        canon(vec![a.clone(), a.transpose()])
    }

    fn product() -> CanonicalSystem {
        let h = 1.0 / 2f64.sqrt();
        canon(vec![CMatrix::from_element(1, 1, cplx(h, 0.0)), CMatrix::from_element(1, 1, cplx(h, 0.0))])
    }

    fn ghz() -> CanonicalSystem {
        let h = 1.0 / 2f64.sqrt();
        let i = identity(2) * cplx(h, 0.0);
        let x = CMatrix::from_row_slice(2, 2, &[cplx(0., 0.), cplx(h, 0.), cplx(h, 0.), cplx(0., 0.)]);
        canon(vec![i, x])
    }

    fn e(r: usize, c: usize) -> CMatrix {
        let mut m = CMatrix::zeros(2, 2);
        m[(r, c)] = cplx(1.0, 0.0);
        m
    }

    #[test]
    fn transfer_examples() {
        let p = build_transfer(&product());
        assert_eq!(p.mat().shape(), (1, 1));
        assert!((p.mat()[(0, 0)] - cplx(1.0, 0.0)).norm() < 1e-15);

        let n = build_transfer(&neel());
        assert!(max_abs(&(n.apply(&e(0, 0)) - e(1, 1))) < 1e-15);
        assert!(max_abs(&(n.apply(&e(1, 1)) - e(0, 0))) < 1e-15);
        assert!(max_abs(&n.apply(&e(0, 1))) < 1e-15);
        assert!(max_abs(&n.apply(&e(1, 0))) < 1e-15);

        let a = aklt();
        let t = build_transfer(&a);
        let x = CMatrix::from_row_slice(2, 2, &[cplx(0.3, 0.1), cplx(-1., 2.), cplx(0.5, 0.), cplx(0., -1.)]);
        assert!(max_abs(&(t.apply(&x) - a.tau(&x))) < 1e-12);
    }

    #[test]
    fn spectral_report_examples() {
        let r = spectral_report(&build_transfer(&aklt()), 1e-8).unwrap();
        assert_eq!(r.peripheral.len(), 1);
        assert!((r.alpha - 1.0 / 3.0).abs() < 1e-10);
        assert_eq!(r.gauge_period, Some(1));
        assert_eq!(r.fixed_dim, 1);
        for z in &r.eigenvalues[1..] {
            assert!((z - cplx(-1.0 / 3.0, 0.0)).norm() < 1e-10);
        }

        let n = spectral_report(&build_transfer(&neel()), 1e-8).unwrap();
        assert_eq!(n.gauge_period, Some(2));
        assert!((n.alpha - 1.0).abs() < 1e-12);
        assert!((n.peripheral[0] - cplx(1.0, 0.0)).norm() < 1e-12);
        assert!((n.peripheral[1] - cplx(-1.0, 0.0)).norm() < 1e-12);

        let p = spectral_report(&build_transfer(&product()), 1e-8).unwrap();
        assert_eq!(p.alpha, 0.0);
        assert_eq!(p.peripheral.len(), 1);

        let g = spectral_report(&build_transfer(&ghz()), 1e-8).unwrap();
        assert_eq!(g.fixed_dim, 2);
        assert_eq!(g.gauge_period, None);
    }

    #[test]
    fn roots_of_unity_detection() {
        let w = |t: f64| Complex64::from_polar(1.0, t);
        let tau = std::f64::consts::TAU;
        assert_eq!(roots_of_unity_period(&[w(0.0), w(tau / 3.0), w(-tau / 3.0)]), Some(3));
        assert_eq!(roots_of_unity_period(&[w(0.0), w(0.0)]), None);
        assert_eq!(roots_of_unity_period(&[w(0.0), w(1.0)]), None);
    }

    #[test]
    fn ergodicity_examples() {
        assert!(ergodicity_check(&aklt()));
        assert!(!ergodicity_check(&ghz()));
        assert!(ergodicity_check(&product()));
    }

    #[test]
    fn kolmogorov_examples() {
        let a = kolmogorov_check(&aklt(), 8).unwrap();
        assert!(a.spectral_pass);
        let c = a.iterates[0] * 3.0;
        for (n, v) in a.iterates.iter().enumerate() {
            assert!(*v <= c * (1.0f64 / 3.0).powi(n as i32 + 1) * (1.0 + 1e-6) + 1e-15);
        }
        let n = kolmogorov_check(&neel(), 8).unwrap();
        assert!(!n.spectral_pass);
        assert!(n.iterates.iter().all(|v| *v > 0.1));
        let p = kolmogorov_check(&product(), 4).unwrap();
        assert!(p.spectral_pass);
        assert!(p.iterates.iter().all(|v| *v < 1e-14));
    }

    #[test]
    fn gauge_examples() {
        assert_eq!(gauge_group_detect(&product(), 4).unwrap(), GaugeGroup::Finite(1));
        assert_eq!(gauge_group_detect(&neel(), 4).unwrap(), GaugeGroup::Finite(2));
        // AKLT: φ₀(v_x v_y v_z) = i/(3√3) at length difference 3 and φ₀(v_z v_z) = 1/3 at 2.
        assert_eq!(gauge_group_detect(&aklt(), 4).unwrap(), GaugeGroup::Finite(1));
        assert!((largest_word_expectation(&aklt(), 3, 0) - 1.0 / (3.0 * 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn gauge_infinite_sentinel_and_monotonicity() {
        // at cap 1 only odd differences are probed and all vanish for Néel
        assert_eq!(gauge_group_detect(&neel(), 1).unwrap(), GaugeGroup::Infinite);
        assert_eq!(gauge_group_detect(&neel(), 2).unwrap(), GaugeGroup::Finite(2));
        assert_eq!(gauge_group_detect(&aklt(), 1).unwrap(), GaugeGroup::Infinite);
        assert_eq!(gauge_group_detect(&aklt(), 3).unwrap(), GaugeGroup::Finite(1));
    }

    #[test]
    fn blocking() {
        let a = aklt();
        let b1 = block_system(&a, 1).unwrap();
        assert_eq!(b1.kraus(), a.kraus());
        let b2 = block_system(&a, 2).unwrap();
        let t = build_transfer(&a).mat().clone();
        assert!(max_abs(&(b2.transfer_matrix() - &t * &t)) < 1e-12);
        let c2 = b2.canonicalize(&Tolerances::default()).unwrap();
        let r = spectral_report(&build_transfer(&c2), 1e-8).unwrap();
        assert!((r.alpha - 1.0 / 9.0).abs() < 1e-10);

        let n2 = block_system(&neel(), 2).unwrap().canonicalize(&Tolerances::default()).unwrap();
        assert_eq!(n2.fixed_dim(), 2);
        assert!(matches!(block_system(&a, 9), Err(Error::SizeCapExceeded { .. })));
    }
}
