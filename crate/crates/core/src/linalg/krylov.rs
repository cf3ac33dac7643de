//! Lanczos approximation of `exp(-iHt)ψ` with adaptive step size.
//!
//! One Krylov basis is built per step and reused for every trial step
//! length, so shrinking a rejected step costs only a small dense
//! exponential. The local error is estimated from the coupling to the next
//! Krylov vector.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{dot, C64};

/// Anything that can apply a Hermitian operator to a raw vector.
pub trait Operator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], out: &mut [C64]);
}

impl Operator for crate::lattice::Hamiltonian {
    fn dim(&self) -> usize {
        self.grid().len()
    }

    fn apply(&self, x: &[C64], out: &mut [C64]) {
        self.apply_slice(x, out)
    }
}

#[derive(Clone, Debug)]
pub struct KrylovOptions {
    /// Krylov dimension per step.
    pub dim: usize,
    /// Local error allowed per unit time.
    pub tolerance: f64,
    /// Upper bound on a single step.
    pub max_step: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            dim: 40,
            tolerance: 1e-11,
            max_step: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct KrylovStats {
    pub steps: usize,
    pub matvecs: usize,
}

/// Stateful propagator that remembers its last accepted step length.
pub struct KrylovPropagator {
    pub options: KrylovOptions,
    last_step: f64,
    pub stats: KrylovStats,
    /// Krylov vectors, reused between steps.
    basis: Vec<Vec<C64>>,
}

impl KrylovPropagator {
    pub fn new(options: KrylovOptions) -> Self {
        KrylovPropagator {
            options,
            last_step: 1.0,
            stats: KrylovStats::default(),
            basis: Vec::new(),
        }
    }

    /// Advances `psi` by time `t` (which may be negative).
    pub fn evolve<O: Operator>(&mut self, op: &O, psi: &mut [C64], t: f64) -> Result<()> {
        let sign = t.signum();
        let total = t.abs();
        let mut done = 0.0;
        let mut guard = 0usize;
        while done < total * (1.0 - 1e-15) {
            let remaining = total - done;
            let taken = self.step(op, psi, sign, remaining)?;
            done += taken;
            guard += 1;
            if guard > 100_000_000 {
                return Err(Error::Convergence("Krylov propagation stalled".into()));
            }
        }
        Ok(())
    }

    fn step<O: Operator>(&mut self, op: &O, psi: &mut [C64], sign: f64, remaining: f64) -> Result<f64> {
        let n = psi.len();
        let beta0 = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if beta0 == 0.0 {
            return Ok(remaining);
        }
        let m_cap = self.options.dim.min(n).max(1);
        let mut basis = std::mem::take(&mut self.basis);
        basis.resize_with(m_cap + 1, Vec::new);
        for v in basis.iter_mut() {
            v.resize(n, C64::new(0.0, 0.0));
        }
        let inv = 1.0 / beta0;
        for (b, x) in basis[0].iter_mut().zip(psi.iter()) {
            *b = x * inv;
        }
        let mut alpha = Vec::with_capacity(m_cap);
        let mut beta: Vec<f64> = Vec::with_capacity(m_cap);
        let mut w = vec![C64::new(0.0, 0.0); n];
        let mut exact = false;
        for j in 0..m_cap {
            op.apply(&basis[j], &mut w);
            self.stats.matvecs += 1;
            let a = dot(&basis[j], &w).re;
            for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                *wi -= vi * a;
            }
            if j > 0 {
                let b = beta[j - 1];
                for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= vi * b;
                }
            }
            // one local reorthogonalization pass keeps short recurrences honest
            let p = dot(&basis[j], &w);
            for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                *wi -= vi * p;
            }
            alpha.push(a + p.re);
            let b = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            beta.push(b);
            if b < 1e-12 * (a.abs() + 1.0) {
                exact = true;
                break;
            }
            let inv = 1.0 / b;
            for (v, x) in basis[j + 1].iter_mut().zip(&w) {
                *v = x * inv;
            }
        }
        let m = alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = t.symmetric_eigen();
        let coeffs = |dt: f64| -> Vec<C64> {
            // exp(-i T dt) e_1
            (0..m)
                .map(|r| {
                    (0..m)
                        .map(|k| {
                            let v = &eig.eigenvectors;
                            C64::from_polar(v[(r, k)] * v[(0, k)], -eig.eigenvalues[k] * dt)
                        })
                        .sum()
                })
                .collect()
        };
        let tol = self.options.tolerance;
        let mut dt = (self.last_step * 1.5).min(remaining).min(self.options.max_step);
        let beta_m = beta[m - 1];
        let mut c;
        loop {
            c = coeffs(sign * dt);
            let err = if exact { 0.0 } else { beta0 * beta_m * c[m - 1].norm() };
            if err <= tol * dt || dt < 1e-14 * remaining.max(1.0) {
                break;
            }
            dt *= 0.5;
        }
        if dt < 1e-14 * remaining.max(1.0) {
            self.basis = basis;
            return Err(Error::Convergence("Krylov step size underflow".into()));
        }
        psi.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (j, cj) in c.iter().enumerate() {
            let s = cj * beta0;
            for (x, v) in psi.iter_mut().zip(&basis[j]) {
                *x += v * s;
            }
        }
        self.basis = basis;
        if dt < remaining {
            self.last_step = dt;
        }
        self.stats.steps += 1;
        Ok(dt)
    }
}
