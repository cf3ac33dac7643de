//! Linear-algebra kernels: small dense Hermitian/unitary decompositions,
//! symmetric tridiagonal eigenpairs, a block-tridiagonal factorization of the
//! strip Hamiltonian, shift-invert Lanczos and Krylov time stepping.

pub mod block_ldl;
pub mod krylov;
pub mod lanczos;
pub mod tridiag;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::C64;

/// Eigenpairs of a Hermitian matrix with eigenvalues ascending.
pub fn hermitian_eigen(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: DMatrix<C64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let n = h.nrows();
    let mut scaled = v.clone();
    for c in 0..n {
        let ph = C64::from_polar(1.0, -eig.eigenvalues[c] * t);
        for r in 0..n {
            scaled[(r, c)] *= ph;
        }
    }
    scaled * v.adjoint()
}

/// `‖U†U - I‖_F`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - DMatrix::<C64>::identity(n, n)).norm()
}

/// Eigen-decomposition of a unitary matrix.
///
/// Returns phases `θ_k ∈ (-π, π]` with `U v_k = e^{iθ_k} v_k`, sorted
/// ascending, and the orthonormal eigenvectors as columns. The problem is
/// mapped to the Hermitian Cayley transform `i(1 - U')(1 + U')^{-1}` of a
/// rotated copy `U' = e^{-iφ}U`, with `φ` placed so that the widest gap in
/// the spectrum sits at `-1`.
pub fn unitary_eigen(u: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let n = u.nrows();
    if n == 0 {
        return Ok((vec![], DMatrix::zeros(0, 0)));
    }
    // first pass: any rotation, only used to locate the widest gap
    let (rough, _) = cayley_pass(u, 0.731_592_f64 * PI)?;
    let mut sorted = rough.clone();
    sorted.sort_by(f64::total_cmp);
    let mut best_gap = sorted[0] + 2.0 * PI - sorted[n - 1];
    let mut best_mid = sorted[n - 1] + 0.5 * best_gap;
    for w in sorted.windows(2) {
        let gap = w[1] - w[0];
        if gap > best_gap {
            best_gap = gap;
            best_mid = w[0] + 0.5 * gap;
        }
    }
    // rotate so that the gap centre maps to π
    let (phases, vecs) = cayley_pass(u, best_mid - PI)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    let phases_sorted = order.iter().map(|&i| phases[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    Ok((phases_sorted, vectors))
}

fn cayley_pass(u: &DMatrix<C64>, rotation: f64) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let n = u.nrows();
    let rot = C64::from_polar(1.0, -rotation);
    let ur = u * rot;
    let id = DMatrix::<C64>::identity(n, n);
    let lu = (&id + &ur).lu();
    let x = lu
        .solve(&(&id - &ur))
        .ok_or_else(|| Error::Convergence("singular Cayley transform".into()))?;
    let k = x * C64::new(0.0, 1.0);
    let k = (&k + k.adjoint()) * C64::new(0.5, 0.0);
    let eig = k.symmetric_eigen();
    let vecs = eig.eigenvectors;
    let mut phases = Vec::with_capacity(n);
    for c in 0..n {
        let v: DVector<C64> = vecs.column(c).into_owned();
        let lam = (v.adjoint() * (u * &v))[(0, 0)];
        phases.push(lam.arg());
    }
    Ok((phases, vecs))
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b, r²)`.
///
/// A response with zero variance yields `r² = 0`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return (my, 0.0, 0.0);
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy <= f64::EPSILON * my.abs().max(1.0) * n {
        0.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (a, b, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn unitary_eigen_recovers_phases() {
        for seed in 0..5 {
            let h = random_hermitian(12, seed);
            let u = expm_hermitian(&h, 2.7);
            assert!(unitarity_defect(&u) < 1e-12);
            let (phases, v) = unitary_eigen(&u).unwrap();
            let mut expect: Vec<f64> = hermitian_eigenvalues(h).iter().map(|e| wrap_phase(-e * 2.7)).collect();
            expect.sort_by(f64::total_cmp);
            for (a, b) in phases.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
            for c in 0..12 {
                let col = v.column(c).into_owned();
                let r = &u * &col - &col * C64::from_polar(1.0, phases[c]);
                assert!(r.norm() < 1e-11);
            }
        }
    }

    #[test]
    fn unitary_eigen_handles_degenerate_identity() {
        let u = DMatrix::<C64>::identity(5, 5);
        let (phases, v) = unitary_eigen(&u).unwrap();
        assert!(phases.iter().all(|p| p.abs() < 1e-14));
        assert!(unitarity_defect(&v) < 1e-12);
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_phase(-7.0) - (-7.0 + 2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn linear_fit_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b, r2) = linear_fit(&x, &y);
        assert!((a - 2.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        let (_, b, r2) = linear_fit(&x, &[3.0; 10]);
        assert_eq!((b, r2), (0.0, 0.0));
    }
}
