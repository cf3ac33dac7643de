//! Block LDL† factorization of `H - σ` for the strip Hamiltonian.
//!
//! Ordering the sites row by row (fixed `m`) makes `H` block tridiagonal with
//! `Lx × Lx` diagonal blocks and off-diagonal blocks `-J/2 · I`. The Schur
//! complements `S_k` give both a direct solver and, by Sylvester's law of
//! inertia, the number of eigenvalues below `σ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::{Hamiltonian, C64};

pub struct BlockLdl {
    width: usize,
    height: usize,
    coupling: f64,
    /// `S_k^{-1}` per row.
    inverses: Vec<DMatrix<C64>>,
    negative: usize,
    shift: f64,
}

impl BlockLdl {
    /// Factorizes `H - shift`. Fails if a Schur complement is numerically
    /// singular, which happens when `shift` sits on an eigenvalue.
    pub fn factor(h: &Hamiltonian, shift: f64) -> Result<Self> {
        let g = *h.grid();
        let t = -0.5 * h.hopping();
        let scale = h.hopping().abs().max(h.field().abs()).max(1e-300);
        let mut inverses = Vec::with_capacity(g.height);
        let mut negative = 0;
        for mi in 0..g.height {
            let mut s = h.row_block(mi, shift);
            if let Some(prev) = inverses.last() {
                s -= prev * C64::new(t * t, 0.0);
            }
            let s = (&s + s.adjoint()) * C64::new(0.5, 0.0);
            let eig = s.symmetric_eigen();
            let mut inv_vals = DVector::<C64>::zeros(g.width);
            for (k, &lam) in eig.eigenvalues.iter().enumerate() {
                if lam.abs() < 1e-13 * scale {
                    return Err(Error::Convergence(format!(
                        "singular pivot at row {mi} for shift {shift}"
                    )));
                }
                if lam < 0.0 {
                    negative += 1;
                }
                inv_vals[k] = C64::new(1.0 / lam, 0.0);
            }
            let v = &eig.eigenvectors;
            let inv = v * DMatrix::from_diagonal(&inv_vals) * v.adjoint();
            inverses.push(inv);
        }
        Ok(BlockLdl {
            width: g.width,
            height: g.height,
            coupling: t,
            inverses,
            negative,
            shift,
        })
    }

    /// Factorizes at `shift`, nudging it slightly if it hits an eigenvalue.
    pub fn factor_near(h: &Hamiltonian, shift: f64) -> Result<Self> {
        let nudge = 1e-9 * h.field().abs().max(h.hopping().abs()).max(1e-12);
        let mut last = None;
        for k in 0..8 {
            let s = shift + nudge * (k as f64) * if k % 2 == 0 { 1.0 } else { -1.0 };
            match Self::factor(h, s) {
                Ok(f) => return Ok(f),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap())
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Number of eigenvalues of `H` strictly below the shift.
    pub fn count_below(&self) -> usize {
        self.negative
    }

    /// Solves `(H - σ) x = b` in storage order (`index = l·height + m`).
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let (w, h) = (self.width, self.height);
        let t = self.coupling;
        let row = |v: &[C64], mi: usize| DVector::from_fn(w, |li, _| v[li * h + mi]);
        // forward: y_k = b_k - t S_{k-1}^{-1} y_{k-1}
        let mut ys: Vec<DVector<C64>> = Vec::with_capacity(h);
        for mi in 0..h {
            let mut y = row(b, mi);
            if mi > 0 {
                y -= &self.inverses[mi - 1] * &ys[mi - 1] * C64::new(t, 0.0);
            }
            ys.push(y);
        }
        // backward: x_k = S_k^{-1} (y_k - t x_{k+1})
        let mut out = vec![C64::new(0.0, 0.0); w * h];
        let mut next: Option<DVector<C64>> = None;
        for mi in (0..h).rev() {
            let mut rhs = ys[mi].clone();
            if let Some(xn) = &next {
                rhs -= xn * C64::new(t, 0.0);
            }
            let x = &self.inverses[mi] * rhs;
            for li in 0..w {
                out[li * h + mi] = x[li];
            }
            next = Some(x);
        }
        out
    }
}
