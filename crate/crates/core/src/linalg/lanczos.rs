//! Shift-invert Lanczos for all eigenpairs of the strip Hamiltonian inside an
//! energy interval. The interval is split into slices; every slice gets its
//! own shift, and the inertia count at the slice ends says how many
//! eigenvalues must be found there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::block_ldl::BlockLdl;
use super::tridiag::SymTridiagonal;
use crate::error::{Error, Result};
use crate::lattice::{dot, Hamiltonian, C64};

#[derive(Clone, Debug)]
pub struct IntervalOptions {
    /// Number of shift slices the interval is cut into.
    pub slices: usize,
    /// Explicit residual `‖(H - E)x‖` required of every pair.
    pub tolerance: f64,
    /// Hard cap on the Krylov dimension per slice.
    pub max_krylov: usize,
    pub seed: u64,
}

impl Default for IntervalOptions {
    fn default() -> Self {
        IntervalOptions {
            slices: 4,
            tolerance: 1e-11,
            max_krylov: 400,
            seed: 0x5eed,
        }
    }
}

/// All eigenpairs with `lo < E ≤ hi`, ascending in energy.
pub fn eigenpairs_in_interval(
    h: &Hamiltonian,
    lo: f64,
    hi: f64,
    opts: &IntervalOptions,
) -> Result<Vec<(f64, Vec<C64>)>> {
    let n = h.grid().len();
    let slices = opts.slices.max(1);
    let edges: Vec<f64> = (0..=slices)
        .map(|k| lo + (hi - lo) * k as f64 / slices as f64)
        .collect();
    // counts of eigenvalues ≤ edge, via factorizations just above each edge
    let eps = 1e-12 * (hi - lo).abs().max(1e-300);
    let mut counts = Vec::with_capacity(edges.len());
    for &e in &edges {
        counts.push(BlockLdl::factor_near(h, e + eps)?.count_below());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut found: Vec<(f64, Vec<C64>)> = Vec::new();
    for s in 0..slices {
        let need = counts[s + 1] - counts[s];
        if need == 0 {
            continue;
        }
        let (a, b) = (edges[s], edges[s + 1]);
        let factor = BlockLdl::factor_near(h, 0.5 * (a + b))?;
        let mut slice: Vec<(f64, Vec<C64>)> = Vec::new();
        for _attempt in 0..need + 2 {
            let start: Vec<C64> = (0..n)
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let locked: Vec<&[C64]> = slice.iter().map(|(_, v)| v.as_slice()).collect();
            let pairs = run(h, &factor, start, &locked, a, b, need - slice.len(), opts)?;
            slice.extend(pairs);
            if slice.len() >= need {
                break;
            }
        }
        if slice.len() != need {
            return Err(Error::Convergence(format!(
                "found {} of {need} eigenpairs in ({a}, {b}]",
                slice.len()
            )));
        }
        found.extend(slice);
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(found)
}

/// One Lanczos run on `(H - σ)^{-1}` with full reorthogonalization against
/// the basis and against `locked` vectors. Returns the converged pairs in
/// `(a, b]`, at most `want` of them.
#[allow(clippy::too_many_arguments)]
fn run(
    h: &Hamiltonian,
    factor: &BlockLdl,
    start: Vec<C64>,
    locked: &[&[C64]],
    a: f64,
    b: f64,
    want: usize,
    opts: &IntervalOptions,
) -> Result<Vec<(f64, Vec<C64>)>> {
    let n = start.len();
    let sigma = factor.shift();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v = start;
    orthogonalize(&mut v, locked);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let kmax = opts.max_krylov.min(n - locked.len());
    let mut next_check = (2 * want + 20).min(kmax);
    loop {
        let mut w = factor.solve(&v);
        orthogonalize(&mut w, locked);
        let al = dot(&v, &w).re;
        basis.push(v);
        alpha.push(al);
        // two passes of classical Gram–Schmidt
        for _ in 0..2 {
            for q in basis.iter() {
                let p = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= p * qi);
            }
            orthogonalize(&mut w, locked);
        }
        let bt = norm(&w);
        let k = basis.len();
        let breakdown = bt < 1e-13;
        if k >= next_check || k >= kmax || breakdown {
            let t = SymTridiagonal::new(alpha.clone(), beta.clone());
            let (tlo, thi) = t.bounds();
            let pairs = t.eigenpairs_in(tlo - 1.0, thi + 1.0);
            let mut conv: Vec<(f64, Vec<C64>)> = Vec::new();
            for (theta, s) in pairs {
                if theta.abs() < 1e-300 {
                    continue;
                }
                let e = sigma + 1.0 / theta;
                if !(e > a && e <= b) {
                    continue;
                }
                // cheap Ritz estimate before the explicit residual
                if !breakdown && (bt * s[k - 1]).abs() > 1e-3 * theta.abs() {
                    continue;
                }
                let mut x = vec![C64::new(0.0, 0.0); n];
                for (j, q) in basis.iter().enumerate() {
                    x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += qi * s[j]);
                }
                let nx = norm(&x);
                x.iter_mut().for_each(|xi| *xi /= nx);
                let (mut e, mut r) = rayleigh(h, &x);
                // Rayleigh-quotient refinement: a factor shifted just off the
                // current estimate separates close neighbours in a few steps
                for _ in 0..4 {
                    if r < opts.tolerance {
                        break;
                    }
                    let f = BlockLdl::factor_near(h, e + 10.0 * r.max(1e-12))?;
                    x = f.solve(&x);
                    orthogonalize(&mut x, locked);
                    let nx = norm(&x);
                    x.iter_mut().for_each(|xi| *xi /= nx);
                    (e, r) = rayleigh(h, &x);
                }
                let duplicate = conv.iter().any(|(_, y)| dot(y, &x).norm() > 0.5);
                if r < opts.tolerance && e > a && e <= b && !duplicate {
                    conv.push((e, x));
                }
            }
            if conv.len() >= want || k >= kmax || breakdown {
                conv.sort_by(|x, y| x.0.total_cmp(&y.0));
                return Ok(conv);
            }
            next_check = (k + 20).min(kmax);
        }
        beta.push(bt);
        w.iter_mut().for_each(|x| *x /= bt);
        v = w;
    }
}

fn rayleigh(h: &Hamiltonian, x: &[C64]) -> (f64, f64) {
    let mut hx = vec![C64::new(0.0, 0.0); x.len()];
    h.apply_slice(x, &mut hx);
    let e = dot(x, &hx).re;
    let r = hx
        .iter()
        .zip(x)
        .map(|(a, b)| (a - b * e).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (e, r)
}

fn orthogonalize(w: &mut [C64], against: &[&[C64]]) {
    for q in against {
        let p = dot(q, w);
        w.iter_mut().zip(q.iter()).for_each(|(wi, qi)| *wi -= p * qi);
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Flux, Grid, LatticeConfig};
    use crate::linalg::hermitian_eigenvalues;

    #[test]
    fn finds_every_eigenvalue_in_interval() {
        let cfg = LatticeConfig::new(Flux::new(1, 5).unwrap(), 1.0, 0.2, 8);
        let h = Hamiltonian::on_grid(&cfg, Grid::new(8, -40, 40));
        let all = hermitian_eigenvalues(h.dense().unwrap());
        let expect: Vec<f64> = all.into_iter().filter(|&e| e > -0.1 && e <= 0.1).collect();
        let got = eigenpairs_in_interval(&h, -0.1, 0.1, &IntervalOptions::default()).unwrap();
        assert_eq!(got.len(), expect.len());
        for ((e, x), f) in got.iter().zip(&expect) {
            assert!((e - f).abs() < 1e-10);
            assert!(rayleigh(&h, x).1 < 1e-11);
        }
    }
}
