//! Landau–Stark states of a finite strip.
//!
//! Two independent routes: direct interior diagonalization of the lattice
//! Hamiltonian, and a Floquet construction that integrates the driven Harper
//! equation over one Bloch period and Fourier-sums the transported
//! eigenvectors back to real space.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rustfft::FftPlanner;

use crate::bands::{column_labels, DrivenHarper, TAIL_TOLERANCE};
use crate::error::{Error, Result};
use crate::io::{Cell, CsvTable, StateRecord};
use crate::lattice::{build_hamiltonian, BoundaryX, Grid, Hamiltonian, LatticeConfig, WaveFunction, C64};
use crate::linalg::krylov::{KrylovOptions, KrylovPropagator};
use crate::linalg::lanczos::{eigenpairs_in_interval, IntervalOptions};
use crate::linalg::{unitarity_defect, unitary_eigen, wrap_phase};

/// Energies this close to `-F/2` are assigned to the `+F/2` end.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Folds an energy into the fundamental interval `(-F/2, F/2]`.
pub fn fold_energy(energy: f64, field: f64) -> f64 {
    let lo = -0.5 * field + TIE_TOLERANCE;
    let mut e = energy - field * ((energy - lo) / field).floor();
    if e > 0.5 * field + TIE_TOLERANCE {
        e -= field;
    }
    e
}

#[derive(Clone, Debug)]
pub struct LandauStarkState {
    pub psi: WaveFunction,
    pub energy: f64,
    /// Ladder index `n`.
    pub ladder_index: i64,
    /// Transverse index `ν`, `1 ≤ ν ≤ Lx`, ordered by energy.
    pub transverse_index: usize,
}

impl LandauStarkState {
    pub fn record(&self) -> StateRecord {
        StateRecord::new(self.transverse_index as i64, self.ladder_index, self.energy, &self.psi)
    }
}

#[derive(Clone, Debug, Default)]
pub struct StripDiagnostics {
    pub max_boundary_amplitude: f64,
    pub max_residual: f64,
    /// Root-mean-square over states of the y-span where the amplitude
    /// exceeds `1e-3` of its peak.
    pub rms_extent: f64,
    pub expected_extent: f64,
}

/// Support span in y (rows) where the row maximum exceeds `cutoff · peak`.
pub fn y_extent(psi: &WaveFunction, cutoff: f64) -> usize {
    let g = psi.grid();
    let a = psi.amplitudes();
    let row_max: Vec<f64> = (0..g.height)
        .map(|mi| (0..g.width).map(|li| a[g.index(li, mi)].norm()).fold(0.0, f64::max))
        .collect();
    let peak = row_max.iter().cloned().fold(0.0, f64::max);
    let rows: Vec<usize> = (0..g.height).filter(|&mi| row_max[mi] >= cutoff * peak).collect();
    match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => b - a + 1,
        _ => 0,
    }
}

/// The `Lx` Landau–Stark states with energies in `(-F/2, F/2]`.
pub fn diagonalize_strip(config: &LatticeConfig) -> Result<Vec<LandauStarkState>> {
    diagonalize_strip_with(config, &IntervalOptions::default()).map(|r| r.0)
}

pub fn diagonalize_strip_with(config: &LatticeConfig, opts: &IntervalOptions) -> Result<(Vec<LandauStarkState>, StripDiagnostics)> {
    if config.bc_x != BoundaryX::Dirichlet {
        return Err(Error::Config("direct diagonalization expects Dirichlet bc in x".into()));
    }
    if !(config.field > 0.0) {
        return Err(Error::Config("Landau–Stark states need F > 0".into()));
    }
    let h = build_hamiltonian(config)?;
    let g = *h.grid();
    let f = config.field;
    let pairs: Vec<(f64, Vec<C64>)> = if config.hopping == 0.0 {
        // columns decouple: the m = 0 row is the whole fundamental interval
        (0..g.width)
            .map(|li| {
                let mut v = vec![C64::new(0.0, 0.0); g.len()];
                v[g.site(g.l_of(li), 0).unwrap()] = C64::new(1.0, 0.0);
                (0.0, v)
            })
            .collect()
    } else {
        eigenpairs_in_interval(&h, -0.5 * f + TIE_TOLERANCE, 0.5 * f + TIE_TOLERANCE, opts)?
    };
    let mut diag = StripDiagnostics {
        expected_extent: config.stark_extent(),
        ..Default::default()
    };
    let mut states = Vec::with_capacity(pairs.len());
    let mut ext2 = 0.0;
    for (k, (e, v)) in pairs.into_iter().enumerate() {
        let psi = WaveFunction::from_vec(g, v)?;
        let tail = psi.max_boundary_amplitude();
        if tail > TAIL_TOLERANCE {
            return Err(Error::Truncation(format!(
                "state {} at E = {e} has boundary amplitude {tail:.2e}; enlarge the y-window",
                k + 1
            )));
        }
        diag.max_boundary_amplitude = diag.max_boundary_amplitude.max(tail);
        diag.max_residual = diag.max_residual.max(h.residual(&psi, e)?);
        ext2 += (y_extent(&psi, 1e-3) as f64).powi(2);
        states.push(LandauStarkState {
            psi,
            energy: e,
            ladder_index: 0,
            transverse_index: k + 1,
        });
    }
    if !states.is_empty() {
        diag.rms_extent = (ext2 / states.len() as f64).sqrt();
    }
    Ok((states, diag))
}

/// Ladder translation `Ψ_{l,m} → Ψ_{l,m-n} e^{i2παnl}` with energy `E + Fn`.
pub fn translate_state(state: &LandauStarkState, n: i64, config: &LatticeConfig) -> Result<LandauStarkState> {
    let g = *state.psi.grid();
    let a = state.psi.amplitudes();
    let mut out = vec![C64::new(0.0, 0.0); g.len()];
    let mut lost = 0.0f64;
    for li in 0..g.width {
        let l = g.l_of(li);
        let ph = C64::from_polar(1.0, config.flux.phase(n * l));
        for mi in 0..g.height {
            let src = a[g.index(li, mi)];
            let target = mi as i64 + n;
            if target < 0 || target >= g.height as i64 {
                lost = lost.max(src.norm());
                continue;
            }
            out[g.index(li, target as usize)] = src * ph;
        }
    }
    if lost > TAIL_TOLERANCE {
        return Err(Error::Truncation(format!(
            "translation by {n} pushes amplitude {lost:.2e} out of the y-window"
        )));
    }
    Ok(LandauStarkState {
        psi: WaveFunction::from_vec(g, out)?,
        energy: state.energy + config.field * n as f64,
        ladder_index: state.ladder_index + n,
        transverse_index: state.transverse_index,
    })
}

/// Spatial density `ρ_{l,m} = (1/Lx) Σ_ν |Ψ^{(ν,n)}_{l,m}|²` in storage order.
pub fn spatial_density(states: &[LandauStarkState]) -> Result<Vec<f64>> {
    let first = states
        .first()
        .ok_or_else(|| Error::InsufficientData("no states".into()))?;
    let g = *first.psi.grid();
    if states.len() != g.width {
        return Err(Error::Dimension {
            expected: g.width,
            found: states.len(),
        });
    }
    let mut rho = vec![0.0; g.len()];
    for s in states {
        if *s.psi.grid() != g {
            return Err(Error::Dimension {
                expected: g.len(),
                found: s.psi.grid().len(),
            });
        }
        let nrm = s.psi.norm_sqr();
        for (r, a) in rho.iter_mut().zip(s.psi.amplitudes()) {
            *r += a.norm_sqr() / nrm;
        }
    }
    let w = g.width as f64;
    rho.iter_mut().for_each(|r| *r /= w);
    Ok(rho)
}

/// Density summed over columns, as a function of the row index.
pub fn density_profile(grid: &Grid, rho: &[f64]) -> Vec<f64> {
    (0..grid.height)
        .map(|mi| (0..grid.width).map(|li| rho[grid.index(li, mi)]).sum())
        .collect()
}

/// Density grid CSV with columns `l, m, rho`.
pub fn density_csv(grid: &Grid, rho: &[f64]) -> Result<CsvTable> {
    let mut t = CsvTable::new("spatial_density", &["l", "m", "rho"]);
    for li in 0..grid.width {
        for mi in 0..grid.height {
            t.push(&[Cell::I(grid.l_of(li)), Cell::I(grid.m_of(mi)), Cell::F(rho[grid.index(li, mi)])])?;
        }
    }
    Ok(t)
}

/// Eigen-decomposition of a Bloch-period evolution operator.
#[derive(Clone, Debug)]
pub struct FloquetSpectrum {
    /// Eigenphases in `(-π, π]`, ascending.
    pub eigenphases: Vec<f64>,
    /// `-phase / T_B` folded into `(-F/2, F/2]`.
    pub energies: Vec<f64>,
    pub eigenvectors: DMatrix<C64>,
    pub period: f64,
    pub unitarity_defect: f64,
}

impl FloquetSpectrum {
    fn from_operator(u: &DMatrix<C64>, field: f64) -> Result<Self> {
        let defect = unitarity_defect(u);
        let (phases, vecs) = unitary_eigen(u)?;
        let period = TAU / field;
        let energies = phases.iter().map(|p| fold_energy(-p / period, field)).collect();
        Ok(FloquetSpectrum {
            eigenphases: phases,
            energies,
            eigenvectors: vecs,
            period,
            unitarity_defect: defect,
        })
    }

    /// Energies sorted ascending.
    pub fn sorted_energies(&self) -> Vec<f64> {
        let mut e = self.energies.clone();
        e.sort_by(f64::total_cmp);
        e
    }
}

/// Largest tolerated unitarity defect of a computed period operator.
pub const UNITARITY_LIMIT: f64 = 1e-6;

/// Bloch-period evolution operator of the full strip, reduced to the
/// `Lx × Lx` block of y-quasimomentum `kappa` by the translation symmetry.
pub fn bloch_period_operator(config: &LatticeConfig) -> Result<FloquetSpectrum> {
    bloch_period_operator_with(config, 0.0, &KrylovOptions::default())
}

pub fn bloch_period_operator_with(config: &LatticeConfig, kappa: f64, opts: &KrylovOptions) -> Result<FloquetSpectrum> {
    if !(config.field > 0.0) {
        return Err(Error::Config("the Bloch period needs F > 0".into()));
    }
    let h = build_hamiltonian(config)?;
    let u = reduced_period_operator(&h, config, kappa, opts)?;
    let spec = FloquetSpectrum::from_operator(&u, config.field)?;
    if spec.unitarity_defect > UNITARITY_LIMIT {
        return Err(Error::Convergence(format!(
            "period operator unitarity defect {:.2e}",
            spec.unitarity_defect
        )));
    }
    Ok(spec)
}

fn reduced_period_operator(h: &Hamiltonian, config: &LatticeConfig, kappa: f64, opts: &KrylovOptions) -> Result<DMatrix<C64>> {
    let g = *h.grid();
    let tb = config.bloch_period();
    let w = g.width;
    let mut u = DMatrix::<C64>::zeros(w, w);
    for li in 0..w {
        let mut psi = WaveFunction::delta(g, g.l_of(li), 0)?.into_amplitudes();
        let mut prop = KrylovPropagator::new(opts.clone());
        prop.evolve(h, &mut psi, tb)?;
        for lp in 0..w {
            let l = g.l_of(lp);
            let mut acc = C64::new(0.0, 0.0);
            for mi in 0..g.height {
                let m = g.m_of(mi);
                let ph = C64::from_polar(1.0, -(config.flux.phase(l * m) + kappa * m as f64));
                acc += psi[g.index(lp, mi)] * ph;
            }
            u[(lp, li)] = acc;
        }
    }
    Ok(u)
}

/// Default number of Magnus steps per Bloch period.
pub const DEFAULT_FLOQUET_STEPS: usize = 2048;

/// One-dimensional Bloch-period operator of the driven Harper equation,
/// `κ(t) = κ + F t`, over the strip columns.
pub fn floquet_1d_operator(kappa: f64, config: &LatticeConfig, steps: usize) -> Result<DMatrix<C64>> {
    if !(config.field > 0.0) {
        return Err(Error::Config("the Bloch period needs F > 0".into()));
    }
    let d = DrivenHarper::new(config.flux, config.hopping, config.field, config.width, kappa).with_bc(config.bc_x);
    Ok(d.period_operator(steps))
}

pub fn floquet_1d_spectrum(kappa: f64, config: &LatticeConfig, steps: usize) -> Result<FloquetSpectrum> {
    FloquetSpectrum::from_operator(&floquet_1d_operator(kappa, config, steps)?, config.field)
}

/// Doubles the step count from `start` until the eigenphases move by less
/// than `tol`; returns the converged spectrum and step count.
pub fn floquet_1d_converged(kappa: f64, config: &LatticeConfig, start: usize, tol: f64) -> Result<(FloquetSpectrum, usize)> {
    let mut n = start.max(1);
    let mut prev = floquet_1d_spectrum(kappa, config, n)?;
    while n < 1 << 16 {
        n *= 2;
        let next = floquet_1d_spectrum(kappa, config, n)?;
        let change = max_phase_change(&prev.eigenphases, &next.eigenphases);
        prev = next;
        if change < tol {
            return Ok((prev, n));
        }
    }
    Err(Error::Convergence(format!("Floquet eigenphases not converged at {n} steps")))
}

/// Largest difference between two sorted phase lists, modulo 2π.
pub fn max_phase_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| wrap_phase(x - y).abs())
        .fold(0.0, f64::max)
}

/// Transported Floquet eigenvectors ready for Fourier assembly.
///
/// For every eigenvector `v_ν` of the period operator, `c_ν(p_j) =
/// e^{iE_ν t_j} U(t_j) v_ν` is recorded at `t_j = j T_B / K`, where the
/// quasimomentum has moved to `p_j = κ₀ - 2πj/K`. Propagating the vector
/// fixes its phase at every `p_j` consistently, which is the alignment the
/// Fourier sum needs.
pub struct FloquetConstruction {
    pub kappa0: f64,
    pub k_points: usize,
    pub energies: Vec<f64>,
    pub eigenphases: Vec<f64>,
    /// `[ν][j]` amplitude vectors over the strip columns.
    transported: Vec<Vec<DVector<C64>>>,
    flux: crate::lattice::Flux,
    width: usize,
}

impl FloquetConstruction {
    /// Integrates one Bloch period with `steps` Magnus steps (a multiple of
    /// `k_points`).
    pub fn new(config: &LatticeConfig, kappa0: f64, k_points: usize, steps: usize) -> Result<Self> {
        if !(config.field > 0.0) {
            return Err(Error::Config("the Bloch period needs F > 0".into()));
        }
        if k_points == 0 || steps % k_points != 0 {
            return Err(Error::Config(format!(
                "step count {steps} must be a positive multiple of K = {k_points}"
            )));
        }
        let tb = config.bloch_period();
        let dt = tb / steps as f64;
        let per = steps / k_points;
        // drive direction matching the Landau gauge of the lattice
        let d = DrivenHarper::new(config.flux, config.hopping, config.field, config.width, kappa0)
            .with_bc(config.bc_x)
            .with_direction(-1.0);
        let w = config.width;
        let mut u = DMatrix::<C64>::identity(w, w);
        let mut snapshots = Vec::with_capacity(k_points);
        for s in 0..steps {
            if s % per == 0 {
                snapshots.push(u.clone());
            }
            u = d.step_operator(s as f64 * dt, dt) * u;
        }
        let spec = FloquetSpectrum::from_operator(&u, config.field)?;
        if spec.unitarity_defect > UNITARITY_LIMIT {
            return Err(Error::Convergence(format!(
                "period operator unitarity defect {:.2e}",
                spec.unitarity_defect
            )));
        }
        let mut transported = Vec::with_capacity(w);
        for nu in 0..w {
            let v = spec.eigenvectors.column(nu).into_owned();
            let e = spec.energies[nu];
            let row: Vec<DVector<C64>> = snapshots
                .iter()
                .enumerate()
                .map(|(j, uj)| uj * &v * C64::from_polar(1.0, e * j as f64 * tb / k_points as f64))
                .collect();
            transported.push(row);
        }
        Ok(FloquetConstruction {
            kappa0,
            k_points,
            energies: spec.energies,
            eigenphases: spec.eigenphases,
            transported,
            flux: config.flux,
            width: w,
        })
    }

    /// Landau–Stark state `(ν, n)` on the natural grid
    /// `m ∈ [n - K/2, n - K/2 + K)`, normalized. `nu` is zero based and
    /// follows the eigenphase order of the period operator.
    pub fn assemble(&self, nu: usize, n: i64) -> Result<WaveFunction> {
        let k = self.k_points;
        let m0 = n - (k as i64) / 2;
        let grid = Grid::new(self.width, m0, m0 + k as i64 - 1);
        let labels = column_labels(self.width);
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(k);
        let mut amps = vec![C64::new(0.0, 0.0); grid.len()];
        let mut buf = vec![C64::new(0.0, 0.0); k];
        for li in 0..self.width {
            // φ_{l,m} = e^{iκ₀(m-n)} (1/K) Σ_j c_l(j) e^{i2πnj/K} e^{-i2πjm/K}
            for (j, b) in buf.iter_mut().enumerate() {
                let tw = C64::from_polar(1.0, TAU * ((n * j as i64).rem_euclid(k as i64)) as f64 / k as f64);
                *b = self.transported[nu][j][li] * tw;
            }
            fft.process(&mut buf);
            let l = labels[li];
            for mi in 0..k {
                let m = m0 + mi as i64;
                let idx = m.rem_euclid(k as i64) as usize;
                let ph = C64::from_polar(1.0, self.kappa0 * (m - n) as f64 + self.flux.phase(l * m));
                amps[grid.index(li, mi)] = buf[idx] * ph / k as f64;
            }
        }
        WaveFunction::from_vec(grid, amps)?.normalized()
    }

    /// All `Lx` states at ladder index `n`, embedded into `target`.
    pub fn assemble_all(&self, n: i64, target: Grid, field: f64) -> Result<Vec<LandauStarkState>> {
        let mut order: Vec<usize> = (0..self.width).collect();
        order.sort_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]));
        order
            .into_iter()
            .enumerate()
            .map(|(rank, nu)| {
                let psi = self.assemble(nu, n)?;
                let psi = embed_tolerant(&psi, target)?;
                Ok(LandauStarkState {
                    psi,
                    energy: self.energies[nu] + field * n as f64,
                    ladder_index: n,
                    transverse_index: rank + 1,
                })
            })
            .collect()
    }
}

/// Copies `psi` onto `target`, dropping amplitudes outside it provided they
/// are negligible, then renormalizes.
pub fn embed_tolerant(psi: &WaveFunction, target: Grid) -> Result<WaveFunction> {
    let g = psi.grid();
    if g.width != target.width {
        return Err(Error::Dimension {
            expected: target.width,
            found: g.width,
        });
    }
    let mut out = WaveFunction::zeros(target);
    let mut lost = 0.0f64;
    for li in 0..g.width {
        for mi in 0..g.height {
            let a = psi.amplitudes()[g.index(li, mi)];
            match target.site(g.l_of(li), g.m_of(mi)) {
                Some(i) => out.amplitudes_mut()[i] = a,
                None => lost += a.norm_sqr(),
            }
        }
    }
    if lost > 1e-10 {
        return Err(Error::Truncation(format!("embedding drops weight {lost:.2e}")));
    }
    out.normalized()
}

/// One-to-one matching by descending overlap `|⟨a_i|b_j⟩|`.
/// Returns `(i, j, overlap)` sorted by `i`.
pub fn match_states(a: &[LandauStarkState], b: &[LandauStarkState]) -> Result<Vec<(usize, usize, f64)>> {
    let mut cand = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            cand.push((i, j, x.psi.inner(&y.psi)?.norm()));
        }
    }
    cand.sort_by(|x, y| y.2.total_cmp(&x.2));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::new();
    for (i, j, o) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, o));
        }
    }
    out.sort_by_key(|x| x.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Flux;

    fn cfg(alpha: &str, j: f64, f: f64, lx: usize) -> LatticeConfig {
        LatticeConfig::new(alpha.parse::<Flux>().unwrap(), j, f, lx)
    }

    #[test]
    fn folding_respects_tie_rule() {
        let f = 0.02;
        assert!((fold_energy(0.013, f) - (-0.007)).abs() < 1e-15);
        assert!((fold_energy(-0.01, f) - 0.01).abs() < 1e-15);
        assert!((fold_energy(0.01, f) - 0.01).abs() < 1e-15);
        assert!((fold_energy(0.0, f)).abs() < 1e-15);
        assert!((fold_energy(-0.0311, f) - (-0.0111 + 0.02)).abs() < 1e-14);
    }

    #[test]
    fn small_strip_matches_dense_spectrum() {
        let c = cfg("1/5", 1.0, 0.2, 6);
        let (states, diag) = diagonalize_strip_with(&c, &IntervalOptions::default()).unwrap();
        assert_eq!(states.len(), 6);
        assert!(diag.max_residual < 1e-10);
        let h = build_hamiltonian(&c).unwrap();
        let all = crate::linalg::hermitian_eigenvalues(h.dense().unwrap());
        let inside: Vec<f64> = all.into_iter().filter(|e| e.abs() <= 0.1).collect();
        for (s, e) in states.iter().zip(&inside) {
            assert!((s.energy - e).abs() < 1e-10);
        }
    }

    #[test]
    fn hopping_off_gives_single_row_states() {
        let c = cfg("1/10", 0.0, 0.5, 4);
        let states = diagonalize_strip(&c).unwrap();
        assert_eq!(states.len(), 4);
        for s in &states {
            assert_eq!(s.energy, 0.0);
            assert_eq!(y_extent(&s.psi, 1e-3), 1);
        }
    }

    #[test]
    fn translation_group_property_and_residual() {
        let c = cfg("1/5", 1.0, 0.2, 6);
        let states = diagonalize_strip(&c).unwrap();
        let h = build_hamiltonian(&c).unwrap();
        for s in &states {
            assert!(translate_state(s, 0, &c).unwrap().psi.inner(&s.psi).unwrap().norm() > 1.0 - 1e-14);
            let up = translate_state(s, 1, &c).unwrap();
            assert!(h.residual(&up.psi, up.energy).unwrap() < 1e-9);
            let back = translate_state(&translate_state(s, -1, &c).unwrap(), 1, &c).unwrap();
            assert!((back.psi.inner(&s.psi).unwrap().norm() - 1.0).abs() < 1e-12);
        }
        assert!(translate_state(&states[0], 500, &c).is_err());
    }

    #[test]
    fn density_normalized_and_shifts_rigidly() {
        let c = cfg("1/5", 1.0, 0.2, 6);
        let states = diagonalize_strip(&c).unwrap();
        let rho = spatial_density(&states).unwrap();
        assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(rho.iter().all(|&r| r >= 0.0));
        let moved: Vec<_> = states.iter().map(|s| translate_state(s, 1, &c).unwrap()).collect();
        let rho1 = spatial_density(&moved).unwrap();
        let g = *states[0].psi.grid();
        for li in 0..g.width {
            for mi in 0..g.height - 1 {
                assert!((rho1[g.index(li, mi + 1)] - rho[g.index(li, mi)]).abs() < 1e-15);
            }
        }
        assert!(spatial_density(&states[..3]).is_err());
    }

    #[test]
    fn single_column_density_is_probability() {
        let g = Grid::new(1, -2, 2);
        let psi = WaveFunction::from_fn(g, |_, m| C64::new(1.0 + m as f64, 0.0)).normalized().unwrap();
        let s = LandauStarkState { psi: psi.clone(), energy: 0.0, ladder_index: 0, transverse_index: 1 };
        let rho = spatial_density(&[s]).unwrap();
        for (r, p) in rho.iter().zip(psi.density()) {
            assert!((r - p).abs() < 1e-15);
        }
    }

    #[test]
    fn period_operator_agrees_with_direct_energies() {
        let c = cfg("1/5", 1.0, 0.2, 6);
        let states = diagonalize_strip(&c).unwrap();
        let spec = bloch_period_operator(&c).unwrap();
        let tb = c.bloch_period();
        let mut direct: Vec<f64> = states.iter().map(|s| wrap_phase(-s.energy * tb)).collect();
        direct.sort_by(f64::total_cmp);
        assert!(max_phase_change(&direct, &spec.eigenphases) < 1e-6);
        let one_d = floquet_1d_spectrum(0.7, &c, 1024).unwrap();
        assert!(max_phase_change(&one_d.eigenphases, &spec.eigenphases) < 1e-6);
    }

    #[test]
    fn hopping_off_period_operator_is_identity() {
        let c = cfg("1/10", 0.0, 0.5, 4);
        let spec = bloch_period_operator(&c).unwrap();
        assert!(spec.eigenphases.iter().all(|p| p.abs() < 1e-10));
    }

    #[test]
    fn floquet_assembly_reproduces_direct_states() {
        let c = cfg("1/5", 1.0, 0.2, 6);
        let (states, _) = diagonalize_strip_with(&c, &IntervalOptions::default()).unwrap();
        let g = *states[0].psi.grid();
        let fc = FloquetConstruction::new(&c, 0.3, 64, 1024).unwrap();
        let built = fc.assemble_all(0, g, c.field).unwrap();
        for (i, j, o) in match_states(&states, &built).unwrap() {
            assert!(o > 0.999_999, "{i} {j} {o}");
        }
        // ladder shift equals translation
        let a1 = embed_tolerant(&fc.assemble(2, 1).unwrap(), g).unwrap();
        let a0 = LandauStarkState { psi: embed_tolerant(&fc.assemble(2, 0).unwrap(), g).unwrap(), energy: 0.0, ladder_index: 0, transverse_index: 1 };
        let t = translate_state(&a0, 1, &c).unwrap();
        assert!(t.psi.inner(&a1).unwrap().norm() > 1.0 - 1e-10);
    }

    #[test]
    fn single_k_point_is_a_plane_wave_row() {
        let c = cfg("1/5", 1.0, 0.2, 6);
        let fc = FloquetConstruction::new(&c, 0.0, 1, 256).unwrap();
        let psi = fc.assemble(0, 0).unwrap();
        assert_eq!(psi.grid().height, 1);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }
}
