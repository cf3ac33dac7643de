//! Magnetic bands at zero field, the strip spectrum with edge states, the
//! one-dimensional Stark–Harper ladder and the driven Harper equation.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Cell, CsvTable};
use crate::lattice::{BoundaryX, Flux, C64, WINDOW_BUFFER};
use crate::linalg::tridiag::SymTridiagonal;
use crate::linalg::{expm_hermitian, hermitian_eigen, hermitian_eigenvalues};

/// Critical field `F_cr = 2παJ`, above which no transporting states exist.
pub fn critical_field(flux: Flux, hopping: f64) -> Result<f64> {
    if flux.is_zero() {
        return Err(Error::UndefinedCriticalField);
    }
    Ok(TAU * flux.value() * hopping)
}

/// Cyclotron frequency `ω_c`; numerically the same as the critical field.
pub fn cyclotron_frequency(flux: Flux, hopping: f64) -> Result<f64> {
    critical_field(flux, hopping)
}

/// Drift velocity `v* = F / 2πα`.
pub fn drift_velocity(flux: Flux, field: f64) -> Result<f64> {
    if flux.is_zero() {
        return Err(Error::UndefinedCriticalField);
    }
    Ok(field / (TAU * flux.value()))
}

/// Uniform, endpoint-exclusive grid on `[-π, π)`.
pub fn kappa_grid(count: usize) -> Vec<f64> {
    (0..count).map(|k| -PI + TAU * k as f64 / count as f64).collect()
}

/// Column labels `l` of a strip of width `width`, centred so that
/// `-Lx/2 < l ≤ Lx/2`.
pub fn column_labels(width: usize) -> Vec<i64> {
    let l0 = -((width as i64 - 1) / 2);
    (0..width as i64).map(|i| l0 + i).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateLabel {
    Bulk,
    EdgeLeft,
    EdgeRight,
}

impl StateLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            StateLabel::Bulk => "bulk",
            StateLabel::EdgeLeft => "edge_left",
            StateLabel::EdgeRight => "edge_right",
        }
    }

    pub fn is_edge(&self) -> bool {
        !matches!(self, StateLabel::Bulk)
    }
}

/// Sites counted as "near a boundary" by the edge classifier.
pub const EDGE_DEPTH: usize = 3;
/// Weight fraction within [`EDGE_DEPTH`] sites that makes a state an edge state.
pub const EDGE_WEIGHT: f64 = 0.5;

/// Edge classification of a normalized strip amplitude vector.
pub fn classify_edge(amplitudes: &[C64]) -> StateLabel {
    let n = amplitudes.len();
    let d = EDGE_DEPTH.min(n);
    let total: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let left: f64 = amplitudes[..d].iter().map(|a| a.norm_sqr()).sum::<f64>() / total;
    let right: f64 = amplitudes[n - d..].iter().map(|a| a.norm_sqr()).sum::<f64>() / total;
    if left >= EDGE_WEIGHT && left >= right {
        StateLabel::EdgeLeft
    } else if right >= EDGE_WEIGHT {
        StateLabel::EdgeRight
    } else {
        StateLabel::Bulk
    }
}

/// Energies over a κ grid, indexed `[band][kappa]`.
#[derive(Clone, Debug)]
pub struct BandStructure {
    pub kappa_grid: Vec<f64>,
    pub energies: Vec<Vec<f64>>,
    /// Optional eigenvectors, `[band][kappa]`.
    pub eigenvectors: Option<Vec<Vec<Vec<C64>>>>,
    pub bc: BoundaryX,
    pub labels: Vec<Vec<StateLabel>>,
    /// Bulk band intervals `[min, max]` for the infinite lattice (only set by
    /// [`harper_bands`]).
    pub band_intervals: Vec<(f64, f64)>,
    /// Mean energy of each bulk band over the magnetic Brillouin zone (only
    /// set by [`harper_bands`]).
    pub band_means: Vec<f64>,
}

impl BandStructure {
    pub fn band_count(&self) -> usize {
        self.energies.len()
    }

    /// CSV with columns `kappa, band_index, energy, label`, κ outer.
    pub fn to_csv(&self) -> Result<CsvTable> {
        let mut t = CsvTable::new("band_structure", &["kappa", "band_index", "energy", "label"]);
        for (k, &kappa) in self.kappa_grid.iter().enumerate() {
            for nu in 0..self.band_count() {
                t.push(&[
                    Cell::F(kappa),
                    Cell::U(nu),
                    Cell::F(self.energies[nu][k]),
                    Cell::S(self.labels[nu][k].as_str()),
                ])?;
            }
        }
        Ok(t)
    }

    /// Index of the bulk gap `g` (between bands `g` and `g+1`) that contains
    /// `energy`, if any.
    pub fn gap_of(&self, energy: f64) -> Option<usize> {
        self.band_intervals
            .windows(2)
            .position(|w| energy > w[0].1 && energy < w[1].0)
    }

    /// True if `energy` lies in one of the bulk bands, within `tol`.
    pub fn in_bands(&self, energy: f64, tol: f64) -> bool {
        self.band_intervals
            .iter()
            .any(|&(a, b)| energy >= a - tol && energy <= b + tol)
    }
}

/// `q × q` Bloch matrix of the Harper chain at y-quasimomentum `kappa` and
/// Bloch phase `theta` across one magnetic cell.
pub fn harper_bloch_matrix(flux: Flux, hopping: f64, kappa: f64, theta: f64) -> DMatrix<C64> {
    let q = flux.den() as usize;
    let mut h = DMatrix::<C64>::zeros(q, q);
    for j in 0..q {
        h[(j, j)] += C64::new(-hopping * (flux.phase(j as i64) + kappa).cos(), 0.0);
        let k = (j + 1) % q;
        // crossing the cell boundary picks up the Bloch phase
        let ph = if j + 1 == q { C64::from_polar(1.0, theta) } else { C64::new(1.0, 0.0) };
        h[(k, j)] += ph * (-0.5 * hopping);
        h[(j, k)] += ph.conj() * (-0.5 * hopping);
    }
    h
}

/// Magnetic band structure of the infinite lattice at zero field.
///
/// `energies[ν][k]` are the eigenvalues at y-quasimomentum `κ_k` and zero
/// Bloch phase; the band intervals and means cover the full magnetic
/// Brillouin zone.
pub fn harper_bands(flux: Flux, hopping: f64, kappa_count: usize) -> Result<BandStructure> {
    if kappa_count == 0 {
        return Err(Error::Config("kappa_count must be >= 1".into()));
    }
    let q = flux.den() as usize;
    let grid = kappa_grid(kappa_count);
    let mut energies = vec![vec![0.0; kappa_count]; q];
    let mut vectors = vec![vec![Vec::new(); kappa_count]; q];
    for (k, &kappa) in grid.iter().enumerate() {
        let (vals, vecs) = hermitian_eigen(harper_bloch_matrix(flux, hopping, kappa, 0.0));
        for nu in 0..q {
            energies[nu][k] = vals[nu];
            vectors[nu][k] = vecs.column(nu).iter().copied().collect();
        }
    }
    // Band extrema: the characteristic polynomial depends on κ and θ only
    // through cos(qκ) and cos(θ), so a grid containing multiples of π/q in κ
    // and {0, π} in θ reaches the true edges.
    let mut lo = vec![f64::INFINITY; q];
    let mut hi = vec![f64::NEG_INFINITY; q];
    let n_theta = 16;
    let n_kap = 16 * q;
    for i in 0..n_kap {
        let kappa = PI * i as f64 / (8 * q) as f64;
        for j in 0..=n_theta {
            let theta = PI * j as f64 / (n_theta / 2) as f64 - PI;
            let vals = hermitian_eigenvalues(harper_bloch_matrix(flux, hopping, kappa, theta));
            for nu in 0..q {
                lo[nu] = lo[nu].min(vals[nu]);
                hi[nu] = hi[nu].max(vals[nu]);
            }
        }
    }
    for nu in 0..q {
        for &e in &energies[nu] {
            lo[nu] = lo[nu].min(e);
            hi[nu] = hi[nu].max(e);
        }
    }
    // zone average on a uniform (κ, θ) grid
    let mut means = vec![0.0; q];
    let n_mean_theta = 32;
    for &kappa in &grid {
        for j in 0..n_mean_theta {
            let theta = -PI + TAU * j as f64 / n_mean_theta as f64;
            let vals = hermitian_eigenvalues(harper_bloch_matrix(flux, hopping, kappa, theta));
            for nu in 0..q {
                means[nu] += vals[nu];
            }
        }
    }
    means.iter_mut().for_each(|m| *m /= (kappa_count * n_mean_theta) as f64);
    Ok(BandStructure {
        kappa_grid: grid,
        energies,
        eigenvectors: Some(vectors),
        bc: BoundaryX::Periodic,
        labels: vec![vec![StateLabel::Bulk; kappa_count]; q],
        band_intervals: lo.into_iter().zip(hi).collect(),
        band_means: means,
    })
}

/// Real symmetric Harper chain `-J/2 (b_{l+1} + b_{l-1}) - J cos(2παl + κ) b_l`
/// on the columns of a strip.
pub fn harper_chain(flux: Flux, hopping: f64, width: usize, kappa: f64, bc: BoundaryX) -> DMatrix<f64> {
    let labels = column_labels(width);
    let mut h = DMatrix::<f64>::zeros(width, width);
    for i in 0..width {
        h[(i, i)] = -hopping * (flux.phase(labels[i]) + kappa).cos();
        if i + 1 < width {
            h[(i, i + 1)] = -0.5 * hopping;
            h[(i + 1, i)] = -0.5 * hopping;
        }
    }
    if bc == BoundaryX::Periodic && width > 1 {
        h[(0, width - 1)] += -0.5 * hopping;
        h[(width - 1, 0)] += -0.5 * hopping;
    }
    h
}

/// Eigenpairs of [`harper_chain`], ascending.
pub fn harper_chain_eigen(flux: Flux, hopping: f64, width: usize, kappa: f64, bc: BoundaryX) -> (Vec<f64>, DMatrix<f64>) {
    let eig = harper_chain(flux, hopping, width, kappa, bc).symmetric_eigen();
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(width, width, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Zero-field spectrum of a strip of width `Lx`, periodic in y, versus the
/// y-quasimomentum κ. Dirichlet strips carry edge labels.
pub fn strip_spectrum(flux: Flux, hopping: f64, width: usize, kappa_count: usize, bc: BoundaryX) -> Result<BandStructure> {
    if width < 2 {
        return Err(Error::Config(format!("strip width must be >= 2, got {width}")));
    }
    if kappa_count == 0 {
        return Err(Error::Config("kappa_count must be >= 1".into()));
    }
    if bc == BoundaryX::Periodic && width as u64 % flux.den() != 0 {
        return Err(Error::Config(format!(
            "periodic strip needs Lx divisible by q = {} (got Lx = {width})",
            flux.den()
        )));
    }
    let grid = kappa_grid(kappa_count);
    let mut energies = vec![vec![0.0; kappa_count]; width];
    let mut labels = vec![vec![StateLabel::Bulk; kappa_count]; width];
    let mut vectors = vec![vec![Vec::new(); kappa_count]; width];
    for (k, &kappa) in grid.iter().enumerate() {
        let (vals, vecs) = harper_chain_eigen(flux, hopping, width, kappa, bc);
        for nu in 0..width {
            energies[nu][k] = vals[nu];
            let v: Vec<C64> = vecs.column(nu).iter().map(|&x| C64::new(x, 0.0)).collect();
            if bc == BoundaryX::Dirichlet {
                labels[nu][k] = classify_edge(&v);
            }
            vectors[nu][k] = v;
        }
    }
    Ok(BandStructure {
        kappa_grid: grid,
        energies,
        eigenvectors: Some(vectors),
        bc,
        labels,
        band_intervals: Vec::new(),
        band_means: Vec::new(),
    })
}

/// A state of a strip spectrum whose energy falls into a bulk gap.
#[derive(Clone, Debug, PartialEq)]
pub struct GapState {
    pub kappa_index: usize,
    pub state_index: usize,
    pub energy: f64,
    pub gap: usize,
    pub label: StateLabel,
}

/// States of `strip` inside the bulk gaps of `bulk`.
pub fn gap_states(strip: &BandStructure, bulk: &BandStructure) -> Vec<GapState> {
    let mut out = Vec::new();
    for k in 0..strip.kappa_grid.len() {
        for nu in 0..strip.band_count() {
            let e = strip.energies[nu][k];
            if let Some(gap) = bulk.gap_of(e) {
                out.push(GapState {
                    kappa_index: k,
                    state_index: nu,
                    energy: e,
                    gap,
                    label: strip.labels[nu][k],
                });
            }
        }
    }
    out
}

/// Eigenvalue ladder of the Stark–Harper equation
/// `-J/2 (b_{m+1} + b_{m-1}) - J cos(2παm - κ) b_m + F m b_m = E b_m`.
#[derive(Clone, Debug)]
pub struct StarkLadder {
    pub kappa: f64,
    pub window: (i64, i64),
    /// Energies accepted as free of truncation effects.
    pub energy_window: (f64, f64),
    pub energies: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Central finite-difference `dE/dκ`.
    pub slopes: Vec<f64>,
    pub transporting: Vec<bool>,
}

impl StarkLadder {
    /// CSV with columns `index, energy, slope, transporting`.
    pub fn to_csv(&self) -> Result<CsvTable> {
        let mut t = CsvTable::new("stark_ladder", &["index", "energy", "slope", "transporting"]);
        for (i, e) in self.energies.iter().enumerate() {
            t.push(&[
                Cell::U(i),
                Cell::F(*e),
                Cell::F(self.slopes[i]),
                Cell::U(self.transporting[i] as usize),
            ])?;
        }
        Ok(t)
    }
}

/// Finite-difference step used for ladder slopes.
pub const SLOPE_STEP: f64 = 1e-3;
/// Relative tolerance on the slope that marks a state as transporting.
pub const TRANSPORT_TOLERANCE: f64 = 0.2;

fn stark_harper_chain(flux: Flux, hopping: f64, field: f64, kappa: f64, window: (i64, i64)) -> SymTridiagonal {
    let (lo, hi) = window;
    let diag = (lo..=hi)
        .map(|m| -hopping * (flux.phase(m) - kappa).cos() + field * m as f64)
        .collect::<Vec<_>>();
    let off = vec![-0.5 * hopping; diag.len() - 1];
    SymTridiagonal::new(diag, off)
}

/// Energy range whose ladder states sit a buffer away from the window edges.
pub fn ladder_energy_window(hopping: f64, field: f64, window: (i64, i64)) -> (f64, f64) {
    let b = WINDOW_BUFFER as f64;
    (
        field * (window.0 as f64 + b) + 2.0 * hopping,
        field * (window.1 as f64 - b) - 2.0 * hopping,
    )
}

/// Eigenpairs of the Stark–Harper chain on `window` with energies in `range`.
pub fn stark_harper_pairs(flux: Flux, hopping: f64, field: f64, kappa: f64, window: (i64, i64), range: (f64, f64)) -> Vec<(f64, Vec<f64>)> {
    stark_harper_chain(flux, hopping, field, kappa, window).eigenpairs_in(range.0, range.1)
}

/// Tail amplitude tolerated at the window edges.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Ladder states of the Stark–Harper equation at quasimomentum `kappa`
/// on the window `m_min ..= m_max`.
pub fn stark_harper_ladder(flux: Flux, hopping: f64, field: f64, kappa: f64, window: (i64, i64)) -> Result<StarkLadder> {
    if !(field > 0.0) {
        return Err(Error::Config("the Stark ladder needs F > 0".into()));
    }
    if window.1 <= window.0 {
        return Err(Error::Config(format!("empty window {window:?}")));
    }
    let range = ladder_energy_window(hopping, field, window);
    if range.1 <= range.0 {
        return Err(Error::Truncation(format!(
            "window {window:?} is too small for F = {field}, J = {hopping}"
        )));
    }
    let pairs = stark_harper_pairs(flux, hopping, field, kappa, window, range);
    for (e, v) in &pairs {
        let tail = v[0].abs().max(v[v.len() - 1].abs());
        if tail > TAIL_TOLERANCE {
            return Err(Error::Truncation(format!(
                "ladder state at E = {e} has tail {tail:.2e} at the window edge"
            )));
        }
    }
    // slopes by matching eigenvectors at κ ± δ
    let pad = 2.0 * field + 4.0 * SLOPE_STEP * hopping;
    let wide = (range.0 - pad, range.1 + pad);
    let plus = stark_harper_pairs(flux, hopping, field, kappa + SLOPE_STEP, window, wide);
    let minus = stark_harper_pairs(flux, hopping, field, kappa - SLOPE_STEP, window, wide);
    let best = |v: &[f64], set: &[(f64, Vec<f64>)]| -> f64 {
        set.iter()
            .map(|(e, w)| (v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>().abs(), *e))
            .fold((-1.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc })
            .1
    };
    let slopes: Vec<f64> = pairs
        .iter()
        .map(|(_, v)| (best(v, &plus) - best(v, &minus)) / (2.0 * SLOPE_STEP))
        .collect();
    let transporting = match (critical_field(flux, hopping), drift_velocity(flux, field)) {
        (Ok(fc), Ok(vs)) if field < fc => slopes
            .iter()
            .map(|s| ((s - vs) / vs).abs() <= TRANSPORT_TOLERANCE)
            .collect(),
        _ => vec![false; pairs.len()],
    };
    let (energies, vectors) = pairs.into_iter().unzip();
    Ok(StarkLadder {
        kappa,
        window,
        energy_window: range,
        energies,
        vectors,
        slopes,
        transporting,
    })
}

/// Driven Harper equation `i ḃ_l = -J/2 (b_{l+1} + b_{l-1}) - J cos(2παl + κ(t)) b_l`
/// with `κ(t) = κ₀ + s·F t`, `s = ±1`, on the columns of a strip.
#[derive(Clone, Debug)]
pub struct DrivenHarper {
    pub flux: Flux,
    pub hopping: f64,
    pub field: f64,
    pub width: usize,
    pub bc: BoundaryX,
    pub kappa0: f64,
    /// Sign `s` of the drive.
    pub direction: f64,
}

const SQRT15: f64 = 3.872_983_346_207_417;

impl DrivenHarper {
    pub fn new(flux: Flux, hopping: f64, field: f64, width: usize, kappa0: f64) -> Self {
        DrivenHarper {
            flux,
            hopping,
            field,
            width,
            bc: BoundaryX::Dirichlet,
            kappa0,
            direction: 1.0,
        }
    }

    pub fn with_bc(mut self, bc: BoundaryX) -> Self {
        self.bc = bc;
        self
    }

    pub fn with_direction(mut self, direction: f64) -> Self {
        self.direction = direction.signum();
        self
    }

    pub fn kappa_at(&self, t: f64) -> f64 {
        self.kappa0 + self.direction * self.field * t
    }

    pub fn hamiltonian(&self, t: f64) -> DMatrix<C64> {
        harper_chain(self.flux, self.hopping, self.width, self.kappa_at(t), self.bc).map(|x| C64::new(x, 0.0))
    }

    /// Propagator from `t` to `t + dt` by the sixth-order Magnus expansion on
    /// three Gauss–Legendre nodes.
    pub fn step_operator(&self, t: f64, dt: f64) -> DMatrix<C64> {
        let mi = C64::new(0.0, -1.0);
        let c = [0.5 - SQRT15 / 10.0, 0.5, 0.5 + SQRT15 / 10.0];
        let b: Vec<DMatrix<C64>> = c.iter().map(|ci| self.hamiltonian(t + ci * dt) * mi).collect();
        let dtc = C64::new(dt, 0.0);
        let a1 = &b[1] * dtc;
        let a2 = (&b[2] - &b[0]) * C64::new(dt * SQRT15 / 3.0, 0.0);
        let a3 = (&b[2] - &b[1] * C64::new(2.0, 0.0) + &b[0]) * C64::new(dt * 10.0 / 3.0, 0.0);
        let comm = |x: &DMatrix<C64>, y: &DMatrix<C64>| x * y - y * x;
        let c1 = comm(&a1, &a2);
        let c2 = comm(&a1, &(&a3 * C64::new(2.0, 0.0) + &c1)) * C64::new(-1.0 / 60.0, 0.0);
        let left = &a1 * C64::new(-20.0, 0.0) - &a3 + &c1;
        let right = &a2 + &c2;
        let omega = &a1 + &a3 * C64::new(1.0 / 12.0, 0.0) + comm(&left, &right) * C64::new(1.0 / 240.0, 0.0);
        // exp(Ω) = exp(-i K) with K = iΩ Hermitian
        let k = &omega * C64::new(0.0, 1.0);
        let k = (&k + k.adjoint()) * C64::new(0.5, 0.0);
        expm_hermitian(&k, 1.0)
    }

    /// Time-ordered propagator over `[0, t]` in `steps` equal steps.
    pub fn propagator(&self, t: f64, steps: usize) -> DMatrix<C64> {
        let dt = t / steps as f64;
        let mut u = DMatrix::<C64>::identity(self.width, self.width);
        for s in 0..steps {
            u = self.step_operator(s as f64 * dt, dt) * u;
        }
        u
    }

    /// Propagator over one Bloch period `2π/F`.
    pub fn period_operator(&self, steps: usize) -> DMatrix<C64> {
        self.propagator(TAU / self.field, steps)
    }
}

/// Advances Harper amplitudes `b` (open chain over `b.len()` strip columns)
/// from `t` to `t + dt` under the drive `κ(t) = κ₀ + F t`.
pub fn driven_harper_step(b: &[C64], kappa0: f64, t: f64, dt: f64, flux: Flux, hopping: f64, field: f64) -> Vec<C64> {
    let d = DrivenHarper::new(flux, hopping, field, b.len(), kappa0);
    let u = d.step_operator(t, dt);
    let v = nalgebra::DVector::from_column_slice(b);
    (u * v).iter().copied().collect()
}
