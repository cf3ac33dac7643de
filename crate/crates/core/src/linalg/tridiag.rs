//! Real symmetric tridiagonal eigenproblems by Sturm bisection and inverse
//! iteration. Used for the one-dimensional Stark–Harper chains, which are
//! exactly tridiagonal.

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`.
#[derive(Clone, Debug)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(diag.len() == off.len() + 1 || (diag.is_empty() && off.is_empty()));
        SymTridiagonal { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin bounds on the spectrum.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let n = self.len();
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(1.0f64, |a, b| a.max(b.abs()));
        let tiny = f64::EPSILON * scale * 1e-3;
        let mut count = 0;
        let mut q = 0.0;
        for i in 0..n {
            q = if i == 0 {
                self.diag[0] - x
            } else {
                self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q
            };
            if q.abs() < tiny {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (zero based) inside the bracket `[lo, hi]`.
    fn kth_eigenvalue(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        let scale = lo.abs().max(hi.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 2.0 * f64::EPSILON * scale || mid == lo || mid == hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues in `[a, b)`, ascending.
    pub fn eigenvalues_in(&self, a: f64, b: f64) -> Vec<f64> {
        let na = self.count_below(a);
        let nb = self.count_below(b);
        (na..nb).map(|k| self.kth_eigenvalue(k, a, b)).collect()
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        let pad = 1e-9 * (hi - lo).abs().max(1.0);
        self.eigenvalues_in(lo - pad, hi + pad)
    }

    /// Unit eigenvector for an (accurate) eigenvalue `lambda` by inverse
    /// iteration. `guard` holds already-computed vectors of nearby
    /// eigenvalues that the result is orthogonalized against.
    pub fn eigenvector(&self, lambda: f64, guard: &[Vec<f64>]) -> Vec<f64> {
        let n = self.len();
        if n == 1 {
            return vec![1.0];
        }
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(1.0f64, |a, b| a.max(b.abs()));
        let shift = lambda + 4.0 * f64::EPSILON * scale;
        let lu = TridiagLu::factor(self, shift, scale);
        // deterministic start vector, different for every member of a cluster
        let mut state = 0x9e37_79b9_7f4a_7c15u64 ^ (guard.len() as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
                0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        for _ in 0..4 {
            for g in guard {
                let p: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(g).for_each(|(xi, gi)| *xi -= p * gi);
            }
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
            lu.solve(&mut x);
        }
        for g in guard {
            let p: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(g).for_each(|(xi, gi)| *xi -= p * gi);
        }
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
        x
    }

    /// Eigenpairs for the eigenvalues in `[a, b)`. Eigenvalues closer than
    /// `1e-10·scale` are treated as a cluster and their vectors orthogonalized.
    pub fn eigenpairs_in(&self, a: f64, b: f64) -> Vec<(f64, Vec<f64>)> {
        let vals = self.eigenvalues_in(a, b);
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(1.0f64, |a, b| a.max(b.abs()));
        let mut out: Vec<(f64, Vec<f64>)> = Vec::with_capacity(vals.len());
        for (i, &v) in vals.iter().enumerate() {
            let guard: Vec<Vec<f64>> = out[..i]
                .iter()
                .rev()
                .take_while(|(w, _)| (v - w).abs() < 1e-10 * scale)
                .map(|(_, vec)| vec.clone())
                .collect();
            let vec = self.eigenvector(v, &guard);
            out.push((v, vec));
        }
        out
    }

    /// `‖(T - λ)x‖`.
    pub fn residual(&self, lambda: f64, x: &[f64]) -> f64 {
        let n = self.len();
        let mut s = 0.0;
        for i in 0..n {
            let mut y = (self.diag[i] - lambda) * x[i];
            if i > 0 {
                y += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                y += self.off[i] * x[i + 1];
            }
            s += y * y;
        }
        s.sqrt()
    }
}

/// LU factorization with partial pivoting of `T - shift`; `U` has two
/// superdiagonals.
struct TridiagLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swap: Vec<bool>,
}

impl TridiagLu {
    fn factor(t: &SymTridiagonal, shift: f64, scale: f64) -> Self {
        let n = t.len();
        let tiny = f64::EPSILON * scale;
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut swap = vec![false; n];
        // working rows
        let mut d = t.diag[0] - shift;
        let mut up = if n > 1 { t.off[0] } else { 0.0 };
        let mut up2 = 0.0;
        for i in 0..n - 1 {
            let sub = t.off[i];
            let nd = t.diag[i + 1] - shift;
            let nup = if i + 2 < n { t.off[i + 1] } else { 0.0 };
            if sub.abs() > d.abs() {
                // swap rows i and i+1
                swap[i] = true;
                u0[i] = sub;
                u1[i] = nd;
                u2[i] = nup;
                let m = d / sub;
                l[i] = m;
                d = up - m * nd;
                up = up2 - m * nup;
                up2 = 0.0;
            } else {
                if d.abs() < tiny {
                    d = tiny;
                }
                u0[i] = d;
                u1[i] = up;
                u2[i] = up2;
                let m = sub / d;
                l[i] = m;
                d = nd - m * up;
                up = nup - m * up2;
                up2 = 0.0;
            }
        }
        if d.abs() < tiny {
            d = tiny;
        }
        u0[n - 1] = d;
        TridiagLu { u0, u1, u2, l, swap }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n - 1 {
            if self.swap[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.l[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
    }
}
