//! Wave-packet dynamics on the strip: Krylov propagation with observables,
//! transporting packets, band populations, packet clusters, the spectral
//! propagator built from Landau–Stark ladders, and ground-band depletion.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::{Fft, FftPlanner};

use crate::bands::{
    column_labels, critical_field, drift_velocity, harper_bands, harper_chain_eigen, stark_harper_pairs,
    TAIL_TOLERANCE, TRANSPORT_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, Cell, CsvTable, StateRecord};
use crate::landau_stark::{diagonalize_strip, LandauStarkState};
use crate::lattice::{BoundaryX, Flux, Grid, Hamiltonian, LatticeConfig, WaveFunction, C64};
use crate::linalg::krylov::{KrylovOptions, KrylovPropagator};
use crate::linalg::linear_fit;
use crate::parallel::map_indexed;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Rows at the y-window edge that must stay empty.
pub const ESCAPE_MARGIN: usize = 3;
/// Weight tolerated inside [`ESCAPE_MARGIN`].
pub const ESCAPE_WEIGHT: f64 = 1e-6;
/// Largest norm drift accepted at a checkpoint.
pub const NORM_TOLERANCE: f64 = 1e-6;
/// Cluster threshold relative to the peak density.
pub const CLUSTER_THRESHOLD: f64 = 1e-3;

/// Per-checkpoint observables.
#[derive(Clone, Debug, Default)]
pub struct Observables {
    pub t: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    /// Third central moment of x.
    pub skew_x: f64,
    pub norm: f64,
    pub energy: f64,
    /// Weight on the columns within three sites of either x-edge.
    pub edge_weight: f64,
    pub band_populations: Vec<f64>,
    pub gap_population: f64,
    /// Clusters per band stripe, if counted.
    pub clusters: Vec<usize>,
}

/// Moments of `|ψ|²`. For periodic strips x is measured as the minimum image
/// around `x_ref`, so a packet can be followed around the ring.
pub fn moments(psi: &WaveFunction, bc: BoundaryX, x_ref: f64) -> Observables {
    let g = psi.grid();
    let a = psi.amplitudes();
    let w = g.width as f64;
    let mut n = 0.0;
    let (mut sx, mut sy) = (0.0, 0.0);
    let xs: Vec<f64> = (0..g.width)
        .map(|li| {
            let l = g.l_of(li) as f64;
            match bc {
                BoundaryX::Dirichlet => l,
                BoundaryX::Periodic => x_ref + (l - x_ref - w * ((l - x_ref) / w).round()),
            }
        })
        .collect();
    for li in 0..g.width {
        for mi in 0..g.height {
            let p = a[g.index(li, mi)].norm_sqr();
            n += p;
            sx += p * xs[li];
            sy += p * g.m_of(mi) as f64;
        }
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut vx, mut vy, mut k3) = (0.0, 0.0, 0.0);
    let edge = |li: usize| li < 3 || li + 3 >= g.width;
    let mut edge_weight = 0.0;
    for li in 0..g.width {
        let dx = xs[li] - mx;
        for mi in 0..g.height {
            let p = a[g.index(li, mi)].norm_sqr();
            vx += p * dx * dx;
            k3 += p * dx * dx * dx;
            vy += p * (g.m_of(mi) as f64 - my).powi(2);
            if bc == BoundaryX::Dirichlet && edge(li) {
                edge_weight += p;
            }
        }
    }
    Observables {
        mean_x: mx,
        mean_y: my,
        var_x: vx / n,
        var_y: vy / n,
        skew_x: k3 / n,
        norm: n.sqrt(),
        edge_weight: edge_weight / n,
        ..Default::default()
    }
}

fn escape_weight(psi: &WaveFunction, margin: usize) -> f64 {
    let rows = psi.row_weights();
    let h = rows.len();
    let m = margin.min(h / 2);
    rows[..m].iter().chain(&rows[h - m..]).sum()
}

/// Projectors onto the magnetic bands of the zero-field strip.
///
/// The state is gauged to `ψ' = e^{-i2παlm} ψ`, in which the zero-field
/// Hamiltonian is translation invariant along y; a Fourier transform over
/// the rows then reduces it to one Harper chain per quasimomentum. Chain
/// eigenstates are grouped by the bulk band interval containing their
/// energy; the rest are gap (edge) states.
pub struct BandProjector {
    flux: Flux,
    width: usize,
    height: usize,
    /// Chain eigenvectors per quasimomentum.
    vectors: Vec<DMatrix<f64>>,
    /// Band of every chain eigenstate, `None` for gap states.
    labels: Vec<Vec<Option<usize>>>,
    bands: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Slack on the band intervals when assigning chain states to bands.
pub const BAND_SLACK: f64 = 1e-6;

impl BandProjector {
    pub fn new(flux: Flux, hopping: f64, width: usize, bc: BoundaryX, height: usize) -> Result<Self> {
        if height == 0 || width < 2 {
            return Err(Error::Config("empty projector grid".into()));
        }
        let bulk = harper_bands(flux, hopping, 16)?;
        let intervals = bulk.band_intervals.clone();
        let mut vectors = Vec::with_capacity(height);
        let mut labels = Vec::with_capacity(height);
        for j in 0..height {
            let kappa = TAU * j as f64 / height as f64;
            let (vals, vecs) = harper_chain_eigen(flux, hopping, width, kappa, bc);
            let tol = BAND_SLACK * hopping.max(1e-300);
            labels.push(
                vals.iter()
                    .map(|&e| intervals.iter().position(|&(a, b)| e >= a - tol && e <= b + tol))
                    .collect(),
            );
            vectors.push(vecs);
        }
        let mut planner = FftPlanner::new();
        Ok(BandProjector {
            flux,
            width,
            height,
            vectors,
            labels,
            bands: intervals.len(),
            forward: planner.plan_fft_forward(height),
            inverse: planner.plan_fft_inverse(height),
        })
    }

    /// Projector matching a Hamiltonian's strip.
    pub fn for_hamiltonian(h: &Hamiltonian) -> Result<Self> {
        let g = h.grid();
        Self::new(h.flux(), h.hopping(), g.width, h.bc_x(), g.height)
    }

    pub fn band_count(&self) -> usize {
        self.bands
    }

    fn check(&self, psi: &WaveFunction) -> Result<()> {
        let g = psi.grid();
        if g.width != self.width || g.height != self.height {
            return Err(Error::Dimension {
                expected: self.width * self.height,
                found: g.len(),
            });
        }
        Ok(())
    }

    /// Row-Fourier amplitudes `b̂[j][l]` of the gauged state.
    fn transform(&self, psi: &WaveFunction) -> Vec<Vec<C64>> {
        let g = *psi.grid();
        let a = psi.amplitudes();
        let mut out = vec![vec![ZERO; g.width]; g.height];
        let mut buf = vec![ZERO; g.height];
        for li in 0..g.width {
            let l = g.l_of(li);
            for mi in 0..g.height {
                let m = g.m_of(mi);
                buf[mi] = a[g.index(li, mi)] * C64::from_polar(1.0, -self.flux.phase(l * m));
            }
            self.forward.process(&mut buf);
            for (j, row) in out.iter_mut().enumerate() {
                row[li] = buf[j];
            }
        }
        out
    }

    /// Weights of the bands and of the gap states; they sum to `‖ψ‖²`.
    pub fn populations(&self, psi: &WaveFunction) -> Result<(Vec<f64>, f64)> {
        self.check(psi)?;
        let bhat = self.transform(psi);
        let mut pops = vec![0.0; self.bands];
        let mut gap = 0.0;
        let n = self.height as f64;
        for (j, b) in bhat.iter().enumerate() {
            let v = &self.vectors[j];
            for (s, label) in self.labels[j].iter().enumerate() {
                let c: C64 = (0..self.width).map(|l| b[l] * v[(l, s)]).sum();
                let p = c.norm_sqr() / n;
                match label {
                    Some(k) => pops[*k] += p,
                    None => gap += p,
                }
            }
        }
        Ok((pops, gap))
    }

    /// Component of `psi` in band `band`.
    pub fn project(&self, psi: &WaveFunction, band: usize) -> Result<WaveFunction> {
        self.check(psi)?;
        if band >= self.bands {
            return Err(Error::Config(format!("band {band} out of range (q = {})", self.bands)));
        }
        let g = *psi.grid();
        let bhat = self.transform(psi);
        let mut proj = vec![vec![ZERO; g.height]; g.width];
        for (j, b) in bhat.iter().enumerate() {
            let v = &self.vectors[j];
            for (s, label) in self.labels[j].iter().enumerate() {
                if *label != Some(band) {
                    continue;
                }
                let c: C64 = (0..self.width).map(|l| b[l] * v[(l, s)]).sum();
                for (l, col) in proj.iter_mut().enumerate() {
                    col[j] += c * v[(l, s)];
                }
            }
        }
        let mut out = vec![ZERO; g.len()];
        let scale = 1.0 / self.height as f64;
        for (li, col) in proj.iter_mut().enumerate() {
            self.inverse.process(col);
            let l = g.l_of(li);
            for mi in 0..g.height {
                let m = g.m_of(mi);
                out[g.index(li, mi)] = col[mi] * scale * C64::from_polar(1.0, self.flux.phase(l * m));
            }
        }
        WaveFunction::from_vec(g, out)
    }
}

/// Row ranges `(m_lo, m_hi)` where a packet of energy `energy` sits while
/// it belongs to each band: band `n` at `y_n = (E - ε_n)/F`, stripes split
/// halfway between neighbouring bands.
pub fn band_stripes(energy: f64, band_means: &[f64], field: f64) -> Vec<(i64, i64)> {
    let ys: Vec<f64> = band_means.iter().map(|e| (energy - e) / field).collect();
    let q = ys.len();
    (0..q)
        .map(|n| {
            let up = if n > 0 { 0.5 * (ys[n - 1] - ys[n]) } else if q > 1 { 0.5 * (ys[0] - ys[1]) } else { 0.5 / field };
            let down = if n + 1 < q { 0.5 * (ys[n] - ys[n + 1]) } else { up };
            ((ys[n] - down).ceil() as i64, (ys[n] + up).floor() as i64)
        })
        .collect()
}

/// Connected components (4-neighbour) of the sites whose density exceeds
/// `threshold` times the peak, counted separately inside each row stripe.
pub fn count_clusters(psi: &WaveFunction, stripes: &[(i64, i64)], threshold: f64, bc: BoundaryX) -> Vec<usize> {
    let g = *psi.grid();
    let rho = psi.density();
    let peak = rho.iter().cloned().fold(0.0, f64::max);
    let on: Vec<bool> = rho.iter().map(|&r| r > threshold * peak && peak > 0.0).collect();
    stripes
        .iter()
        .map(|&(lo, hi)| {
            let lo_i = (lo - g.m_min).max(0);
            let hi_i = (hi - g.m_min).min(g.height as i64 - 1);
            if hi_i < lo_i {
                return 0;
            }
            let (lo_i, hi_i) = (lo_i as usize, hi_i as usize);
            let mut seen = vec![false; g.len()];
            let mut count = 0;
            let mut stack = Vec::new();
            for li in 0..g.width {
                for mi in lo_i..=hi_i {
                    let s = g.index(li, mi);
                    if !on[s] || seen[s] {
                        continue;
                    }
                    count += 1;
                    seen[s] = true;
                    stack.push((li, mi));
                    while let Some((cl, cm)) = stack.pop() {
                        let mut nbrs = Vec::with_capacity(4);
                        if cm > lo_i {
                            nbrs.push((cl, cm - 1));
                        }
                        if cm < hi_i {
                            nbrs.push((cl, cm + 1));
                        }
                        if cl > 0 {
                            nbrs.push((cl - 1, cm));
                        } else if bc == BoundaryX::Periodic {
                            nbrs.push((g.width - 1, cm));
                        }
                        if cl + 1 < g.width {
                            nbrs.push((cl + 1, cm));
                        } else if bc == BoundaryX::Periodic {
                            nbrs.push((0, cm));
                        }
                        for (nl, nm) in nbrs {
                            let t = g.index(nl, nm);
                            if on[t] && !seen[t] {
                                seen[t] = true;
                                stack.push((nl, nm));
                            }
                        }
                    }
                }
            }
            count
        })
        .collect()
}

/// Cluster bookkeeping for a run: stripes are fixed by the packet energy.
#[derive(Clone, Debug)]
pub struct ClusterSpec {
    pub stripes: Vec<(i64, i64)>,
    pub threshold: f64,
}

impl ClusterSpec {
    pub fn for_energy(flux: Flux, hopping: f64, field: f64, energy: f64) -> Result<Self> {
        let bulk = harper_bands(flux, hopping, 64)?;
        Ok(ClusterSpec {
            stripes: band_stripes(energy, &bulk.band_means, field),
            threshold: CLUSTER_THRESHOLD,
        })
    }
}

#[derive(Clone, Debug)]
pub struct PropagateOptions {
    pub krylov: KrylovOptions,
    pub keep_snapshots: bool,
    pub escape_margin: usize,
    pub escape_weight: f64,
    pub clusters: Option<ClusterSpec>,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions {
            krylov: KrylovOptions::default(),
            keep_snapshots: false,
            escape_margin: ESCAPE_MARGIN,
            escape_weight: ESCAPE_WEIGHT,
            clusters: None,
        }
    }
}

/// Checkpointed time evolution of one packet.
#[derive(Clone, Debug)]
pub struct PropagationRun {
    pub field: f64,
    pub bc: BoundaryX,
    pub psi0: WaveFunction,
    pub times: Vec<f64>,
    pub snapshots: Vec<WaveFunction>,
    pub observables: Vec<Observables>,
}

impl PropagationRun {
    /// Bloch period `2π/F`; infinite at zero field.
    pub fn bloch_period(&self) -> f64 {
        if self.field > 0.0 {
            TAU / self.field
        } else {
            f64::INFINITY
        }
    }

    /// Least-squares `d⟨x⟩/dt` and its `r²`.
    pub fn mean_velocity(&self) -> (f64, f64) {
        let x: Vec<f64> = self.observables.iter().map(|o| o.mean_x).collect();
        let (_, b, r2) = linear_fit(&self.times, &x);
        (b, r2)
    }

    /// Least-squares growth rate of `sqrt(var x)` and its `r²`.
    pub fn width_growth(&self) -> (f64, f64) {
        let s: Vec<f64> = self.observables.iter().map(|o| o.var_x.sqrt()).collect();
        let (_, b, r2) = linear_fit(&self.times, &s);
        (b, r2)
    }

    /// Observables table; band columns follow `bands`.
    pub fn to_csv(&self, bands: usize) -> Result<CsvTable> {
        let mut cols: Vec<String> = ["t", "t_over_TB", "mean_x", "mean_y", "var_x", "var_y", "norm"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        cols.extend((0..bands).map(|k| format!("P_band_{k}")));
        cols.push("n_clusters".into());
        let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        let mut t = CsvTable::new("propagation_run", &refs);
        let tb = self.bloch_period();
        for o in &self.observables {
            let mut row = vec![
                Cell::F(o.t),
                Cell::F(if tb.is_finite() { o.t / tb } else { 0.0 }),
                Cell::F(o.mean_x),
                Cell::F(o.mean_y),
                Cell::F(o.var_x),
                Cell::F(o.var_y),
                Cell::F(o.norm),
            ];
            for k in 0..bands {
                row.push(Cell::F(o.band_populations.get(k).copied().unwrap_or(0.0)));
            }
            row.push(Cell::U(o.clusters.iter().sum()));
            t.push(&row)?;
        }
        Ok(t)
    }

    /// Snapshots as NDJSON state records (`nu = -1`, `n` = checkpoint index).
    pub fn snapshots_ndjson(&self) -> Result<String> {
        let recs: Vec<StateRecord> = self
            .snapshots
            .iter()
            .zip(&self.observables)
            .enumerate()
            .map(|(k, (psi, o))| StateRecord::new(-1, k as i64, o.energy, psi))
            .collect();
        crate::io::to_ndjson(&recs)
    }
}

fn check_times(checkpoints: &[f64]) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::Config("no checkpoints".into()));
    }
    if checkpoints[0] < 0.0 || checkpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("checkpoints must be non-negative and strictly increasing".into()));
    }
    Ok(())
}

struct Recorder<'a> {
    h: &'a Hamiltonian,
    projector: Option<&'a BandProjector>,
    opts: &'a PropagateOptions,
    x_ref: f64,
    energy0: Option<f64>,
}

impl Recorder<'_> {
    fn observe(&mut self, psi: &WaveFunction, t: f64) -> Result<Observables> {
        let esc = escape_weight(psi, self.opts.escape_margin);
        if esc > self.opts.escape_weight {
            return Err(Error::WindowEscape {
                weight: esc,
                margin: self.opts.escape_margin,
            });
        }
        let mut o = moments(psi, self.h.bc_x(), self.x_ref);
        self.x_ref = o.mean_x;
        o.t = t;
        if (o.norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Convergence(format!("norm drifted to {} at t = {t}", o.norm)));
        }
        o.energy = self.h.expectation(psi)?;
        match self.energy0 {
            None => self.energy0 = Some(o.energy),
            Some(e0) => {
                if (o.energy - e0).abs() > NORM_TOLERANCE * self.h.hopping().max(1.0) {
                    return Err(Error::Convergence(format!(
                        "energy drifted from {e0} to {} at t = {t}",
                        o.energy
                    )));
                }
            }
        }
        if let Some(p) = self.projector {
            let (pops, gap) = p.populations(psi)?;
            o.band_populations = pops;
            o.gap_population = gap;
        }
        if let Some(c) = &self.opts.clusters {
            o.clusters = count_clusters(psi, &c.stripes, c.threshold, self.h.bc_x());
        }
        Ok(o)
    }
}

fn start_x(psi: &WaveFunction, bc: BoundaryX) -> f64 {
    if bc == BoundaryX::Dirichlet {
        return 0.0;
    }
    // circular mean seeds the minimum-image reference
    let g = psi.grid();
    let w = g.width as f64;
    let cw = psi.column_weights();
    let z: C64 = cw
        .iter()
        .enumerate()
        .map(|(li, &p)| C64::from_polar(p, TAU * g.l_of(li) as f64 / w))
        .sum();
    z.arg() * w / TAU
}

/// Krylov evolution of `psi0` under `h`, recording observables at every
/// checkpoint time (a checkpoint at `t = 0` records the initial state).
pub fn propagate(
    h: &Hamiltonian,
    psi0: &WaveFunction,
    checkpoints: &[f64],
    opts: &PropagateOptions,
    projector: Option<&BandProjector>,
) -> Result<PropagationRun> {
    check_times(checkpoints)?;
    if psi0.grid() != h.grid() {
        return Err(Error::Dimension {
            expected: h.grid().len(),
            found: psi0.grid().len(),
        });
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Config("initial state must be normalized".into()));
    }
    let mut rec = Recorder {
        h,
        projector,
        opts,
        x_ref: start_x(psi0, h.bc_x()),
        energy0: None,
    };
    rec.observe(psi0, 0.0)?;
    let mut prop = KrylovPropagator::new(opts.krylov.clone());
    let mut psi = psi0.amplitudes().to_vec();
    let mut now = 0.0;
    let mut run = PropagationRun {
        field: h.field(),
        bc: h.bc_x(),
        psi0: psi0.clone(),
        times: Vec::new(),
        snapshots: Vec::new(),
        observables: Vec::new(),
    };
    for &t in checkpoints {
        if t > now {
            prop.evolve(h, &mut psi, t - now)?;
            now = t;
        }
        let wf = WaveFunction::from_vec(*h.grid(), psi.clone())?;
        let o = rec.observe(&wf, t)?;
        run.times.push(t);
        run.observables.push(o);
        if opts.keep_snapshots {
            run.snapshots.push(wf);
        }
    }
    Ok(run)
}

/// [`propagate`] on the configuration's own grid with `count` evenly
/// spaced checkpoints up to `t_final`.
pub fn propagate_config(psi0: &WaveFunction, config: &LatticeConfig, t_final: f64, count: usize) -> Result<PropagationRun> {
    if !(t_final > 0.0) || count == 0 {
        return Err(Error::Config("t_final must be positive and count >= 1".into()));
    }
    let h = crate::lattice::build_hamiltonian(config)?;
    let times: Vec<f64> = (0..=count).map(|k| t_final * k as f64 / count as f64).collect();
    propagate(&h, psi0, &times, &PropagateOptions::default(), None)
}

/// Placement of a wave packet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketSpec {
    pub center_x: f64,
    pub center_y: f64,
    /// Gaussian width (standard deviation of `|ψ|²` along x) in sites.
    pub width: f64,
}

impl Default for PacketSpec {
    fn default() -> Self {
        PacketSpec {
            center_x: 0.0,
            center_y: 0.0,
            width: 5.0,
        }
    }
}

/// Magnetic length `1/sqrt(2πα)`, the ground-state cyclotron radius.
fn magnetic_length(flux: Flux) -> f64 {
    1.0 / (TAU * flux.value()).sqrt()
}

/// Packet built from transporting Stark–Harper states of the ground band:
/// `ψ(l,m) = Σ_κ e^{-w²κ²} e^{iκ(l-x₀)} b_m(κ)`, with `b(κ)` followed along
/// one ladder branch by eigenvector overlap.
pub fn make_transporting_packet(config: &LatticeConfig, spec: PacketSpec) -> Result<WaveFunction> {
    make_transporting_packet_on(config, config.grid()?, spec)
}

pub fn make_transporting_packet_on(config: &LatticeConfig, grid: Grid, spec: PacketSpec) -> Result<WaveFunction> {
    let flux = config.flux;
    let (j, f) = (config.hopping, config.field);
    let fc = critical_field(flux, j)?;
    if !(f < fc) {
        return Err(Error::NoTransportingStates { field: f, critical: fc });
    }
    if !(f > 0.0) {
        return Err(Error::Config("a transporting packet needs F > 0".into()));
    }
    if grid.width != config.width {
        return Err(Error::Dimension {
            expected: config.width,
            found: grid.width,
        });
    }
    if config.bc_x == BoundaryX::Dirichlet {
        let reach = spec.width + magnetic_length(flux);
        if spec.center_x - reach <= grid.l_min() as f64 || spec.center_x + reach >= grid.l_max() as f64 {
            return Err(Error::Config(format!(
                "packet at x = {} with width {} touches the strip edges",
                spec.center_x, spec.width
            )));
        }
    }
    let window = (grid.m_min, grid.m_max());
    let v_star = drift_velocity(flux, f)?;
    let e0 = harper_bands(flux, j, 64)?.band_means[0];
    let target = e0 + f * spec.center_y;

    // seed: the ground-band ladder state at κ = 0 nearest the target energy;
    // states of one band repeat every q rows at fixed κ
    let q = flux.den() as f64;
    let reach = (0.5 * q + 1.0) * f;
    let centroid = |v: &[f64]| -> f64 {
        v.iter().enumerate().map(|(i, b)| b * b * (window.0 + i as i64) as f64).sum()
    };
    // other bands have states at the same energy, but q·(gap/F) rows away
    let seed = stark_harper_pairs(flux, j, f, 0.0, window, (target - reach, target + reach))
        .into_iter()
        .min_by(|a, b| (centroid(&a.1) - spec.center_y).abs().total_cmp(&(centroid(&b.1) - spec.center_y).abs()))
        .ok_or_else(|| Error::NoTransportingStates { field: f, critical: fc })?;
    let (seed_e, seed_vec) = seed;
    let tail = seed_vec[0].abs().max(seed_vec[seed_vec.len() - 1].abs());
    if tail > TAIL_TOLERANCE {
        return Err(Error::Truncation(format!("packet state has tail {tail:.2e} at the y-window edge")));
    }
    let centroid = centroid(&seed_vec);

    let period = match config.bc_x {
        BoundaryX::Periodic => grid.width,
        BoundaryX::Dirichlet => 4 * grid.width,
    };
    let dk = TAU / period as f64;
    // the branch moves by one row per 2πα in κ; centre the packet on y_c
    let k0 = ((TAU * flux.value() * (spec.center_y - centroid)) / dk).round() as i64;
    let span = ((4.5 / spec.width.max(0.5)) / dk).ceil() as i64;
    let span = span.min(period as i64 / 2 - 1).max(1);
    let follow = |dir: i64, count: i64| -> Result<Vec<(f64, f64, Vec<f64>)>> {
        let mut out = Vec::new();
        let mut prev = seed_vec.clone();
        let mut e_prev = seed_e;
        for k in 1..=count {
            let kappa = (dir * k) as f64 * dk;
            let e_pred = e_prev + dir as f64 * v_star * dk;
            let pairs = stark_harper_pairs(flux, j, f, kappa, window, (e_pred - reach, e_pred + reach));
            let (o, e, mut v) = pairs
                .into_iter()
                .map(|(e, v)| {
                    let o: f64 = v.iter().zip(&prev).map(|(a, b)| a * b).sum();
                    (o, e, v)
                })
                .max_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
                .ok_or_else(|| Error::Truncation("ladder branch left the y-window".into()))?;
            if o < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            let tail = v[0].abs().max(v[v.len() - 1].abs());
            if tail > TAIL_TOLERANCE {
                return Err(Error::Truncation(format!("packet state has tail {tail:.2e} at the y-window edge")));
            }
            out.push((kappa, e, v.clone()));
            prev = v;
            e_prev = e;
        }
        Ok(out)
    };
    let up = follow(1, (k0 + span).max(1))?;
    let down = follow(-1, (span - k0).max(1))?;
    // transporting check on the seed's slope
    let slope = (up[0].1 - down[0].1) / (2.0 * dk);
    if ((slope - v_star) / v_star).abs() > TRANSPORT_TOLERANCE {
        return Err(Error::NoTransportingStates { field: f, critical: fc });
    }
    let kappa0 = k0 as f64 * dk;
    let branch: Vec<(f64, f64, Vec<f64>)> = std::iter::once((0.0, seed_e, seed_vec.clone()))
        .chain(up)
        .chain(down)
        .filter(|(k, _, _)| (k - kappa0).abs() <= span as f64 * dk + 1e-12)
        .collect();

    let w2 = spec.width * spec.width;
    let mut amps = vec![ZERO; grid.len()];
    for (kappa, _, b) in &branch {
        let weight = (-w2 * (kappa - kappa0).powi(2)).exp();
        for li in 0..grid.width {
            let l = grid.l_of(li) as f64;
            let ph = C64::from_polar(weight, kappa * (l - spec.center_x));
            for (mi, &bm) in b.iter().enumerate() {
                amps[grid.index(li, mi)] += ph * bm;
            }
        }
    }
    let mut psi = WaveFunction::from_vec(grid, amps)?.normalized()?;
    let peak = psi
        .amplitudes()
        .iter()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .copied()
        .unwrap_or(C64::new(1.0, 0.0));
    let fix = peak.conj() / peak.norm();
    psi.amplitudes_mut().iter_mut().for_each(|a| *a *= fix);
    Ok(psi)
}

/// Normalized Gaussian `exp(-(l-x₀)²/4w² - (m-y₀)²/4w²)` with no momentum.
pub fn gaussian_packet(grid: Grid, spec: PacketSpec) -> Result<WaveFunction> {
    let s = 4.0 * spec.width * spec.width;
    WaveFunction::from_fn(grid, |l, m| {
        let dx = l as f64 - spec.center_x;
        let dy = m as f64 - spec.center_y;
        C64::new((-(dx * dx + dy * dy) / s).exp(), 0.0)
    })
    .normalized()
}

/// Transport summary of a run.
#[derive(Clone, Debug)]
pub struct TransportReport {
    pub velocity: f64,
    pub velocity_r2: f64,
    pub drift_velocity: f64,
    pub width_rate: f64,
    pub width_r2: f64,
    /// `sqrt(var x)` at the end relative to the start.
    pub width_ratio: f64,
    /// Third central moment of x at the last checkpoint.
    pub skewness: f64,
}

impl TransportReport {
    pub fn from_run(run: &PropagationRun, flux: Flux) -> Self {
        let (velocity, velocity_r2) = run.mean_velocity();
        let (width_rate, width_r2) = run.width_growth();
        let first = run.observables.first().map(|o| o.var_x.sqrt()).unwrap_or(0.0);
        let last = run.observables.last().map(|o| o.var_x.sqrt()).unwrap_or(0.0);
        TransportReport {
            velocity,
            velocity_r2,
            drift_velocity: drift_velocity(flux, run.field).unwrap_or(f64::NAN),
            width_rate,
            width_r2,
            width_ratio: if first > 0.0 { last / first } else { f64::NAN },
            skewness: run.observables.last().map(|o| o.skew_x).unwrap_or(0.0),
        }
    }
}

/// Bulk drift of a transporting packet in a periodic strip over `periods`
/// Bloch periods, on the default window recentred on the packet row.
pub fn drift_run(config: &LatticeConfig, spec: PacketSpec, periods: f64, per_period: usize) -> Result<(PropagationRun, TransportReport)> {
    if config.bc_x != BoundaryX::Periodic {
        return Err(Error::Config("drift runs need periodic bc in x".into()));
    }
    let yc = spec.center_y.round() as i64;
    let hw = config.default_half_width();
    let grid = Grid::new(config.width, yc - hw, yc + hw);
    let h = Hamiltonian::on_grid(config, grid);
    let psi0 = make_transporting_packet_on(config, grid, spec)?;
    let tb = config.bloch_period();
    let n = (periods * per_period as f64).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=n).map(|k| tb * periods * k as f64 / n as f64).collect();
    let run = propagate(&h, &psi0, &times, &PropagateOptions::default(), None)?;
    let rep = TransportReport::from_run(&run, config.flux);
    Ok((run, rep))
}

/// Localized Gaussian packet in a periodic strip above the critical field.
pub fn supercritical_run(config: &LatticeConfig, spec: PacketSpec, t_final: f64, count: usize) -> Result<(PropagationRun, TransportReport)> {
    if config.bc_x != BoundaryX::Periodic {
        return Err(Error::Config("supercritical runs need periodic bc in x".into()));
    }
    if config.hopping > 0.0 {
        let fc = critical_field(config.flux, config.hopping)?;
        if !(config.field > fc) {
            return Err(Error::Config(format!(
                "supercritical run needs F > F_cr = {fc}, got {}",
                config.field
            )));
        }
    }
    config.validate()?;
    // room for the Gaussian tails on top of the Stark extent
    let yc = spec.center_y.round() as i64;
    let hw = config.default_half_width() + (8.0 * spec.width).ceil() as i64;
    let h = Hamiltonian::on_grid(config, Grid::new(config.width, yc - hw, yc + hw));
    let psi0 = gaussian_packet(*h.grid(), spec)?;
    let times: Vec<f64> = (0..=count).map(|k| t_final * k as f64 / count as f64).collect();
    let run = propagate(&h, &psi0, &times, &PropagateOptions::default(), None)?;
    let rep = TransportReport::from_run(&run, config.flux);
    Ok((run, rep))
}

/// Exact propagator on a Dirichlet strip from the Landau–Stark ladders.
///
/// Every eigenstate is a translate `Ψ^{(ν,n)}_{l,m} = e^{i2παnl} Ψ^{(ν)}_{l,m-n}`
/// of one of the `Lx` states in the fundamental interval, with energy
/// `E_ν + nF`. Overlaps with the initial state are cross-correlations along
/// y per column and the evolved state is the matching convolution, both done
/// by FFT.
pub struct SpectralPropagator {
    grid: Grid,
    flux: Flux,
    field: f64,
    energies: Vec<f64>,
    /// Spectra of the state columns, `[ν][l]`.
    spectra: Vec<Vec<Vec<C64>>>,
    /// Overlaps `c[ν][j]` with `n = n_min + j`.
    coeffs: Vec<Vec<C64>>,
    n_min: i64,
    /// Rows of the state grid.
    s_len: usize,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    coverage: f64,
}

impl SpectralPropagator {
    pub fn new(states: &[LandauStarkState], flux: Flux, field: f64, psi0: &WaveFunction) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::InsufficientData("no Landau–Stark states".into()))?;
        let sg = *first.psi.grid();
        let g = *psi0.grid();
        if sg.width != g.width || states.len() != g.width {
            return Err(Error::Dimension {
                expected: g.width,
                found: states.len(),
            });
        }
        let (h_len, s_len) = (g.height, sg.height);
        let fft_len = (h_len + s_len - 1).next_power_of_two();
        let n_min = g.m_min - sg.m_min - s_len as i64 + 1;
        let n_count = h_len + s_len - 1;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);

        // column spectra of the initial state, shifted by S-1 rows
        let p_hat: Vec<Vec<C64>> = (0..g.width)
            .map(|li| {
                let mut buf = vec![ZERO; fft_len];
                for mi in 0..h_len {
                    buf[mi + s_len - 1] = psi0.amplitudes()[g.index(li, mi)];
                }
                forward.process(&mut buf);
                buf
            })
            .collect();
        let mut spectra = Vec::with_capacity(states.len());
        let mut coeffs = Vec::with_capacity(states.len());
        let mut coverage = 0.0;
        for s in states {
            if *s.psi.grid() != sg {
                return Err(Error::Dimension {
                    expected: sg.len(),
                    found: s.psi.grid().len(),
                });
            }
            let nrm = s.psi.norm();
            let mut per_l = Vec::with_capacity(g.width);
            let mut c = vec![ZERO; n_count];
            for li in 0..g.width {
                let l = g.l_of(li);
                let mut buf = vec![ZERO; fft_len];
                for mi in 0..s_len {
                    buf[mi] = s.psi.amplitudes()[sg.index(li, mi)] / nrm;
                }
                forward.process(&mut buf);
                // R(j) = Σ_k conj(s[k]) p̃[k + j]
                let mut corr: Vec<C64> = buf.iter().zip(&p_hat[li]).map(|(a, b)| a.conj() * b).collect();
                inverse.process(&mut corr);
                for (j, cj) in c.iter_mut().enumerate() {
                    let n = n_min + j as i64;
                    *cj += corr[j] / fft_len as f64 * C64::from_polar(1.0, -flux.phase(n * l));
                }
                per_l.push(buf);
            }
            coverage += c.iter().map(|x| x.norm_sqr()).sum::<f64>();
            spectra.push(per_l);
            coeffs.push(c);
        }
        Ok(SpectralPropagator {
            grid: g,
            flux,
            field,
            energies: states.iter().map(|s| s.energy).collect(),
            spectra,
            coeffs,
            n_min,
            s_len,
            fft_len,
            forward,
            inverse,
            coverage,
        })
    }

    /// `Σ |c_{ν,n}|²`: the part of the initial state the ladders resolve.
    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    /// The evolved state at time `t`.
    pub fn state(&self, t: f64) -> Result<WaveFunction> {
        let g = self.grid;
        let l_len = self.fft_len;
        let mut out = vec![ZERO; g.len()];
        for li in 0..g.width {
            let l = g.l_of(li);
            let mut acc = vec![ZERO; l_len];
            for (nu, c) in self.coeffs.iter().enumerate() {
                let mut d = vec![ZERO; l_len];
                for (j, cj) in c.iter().enumerate() {
                    let n = self.n_min + j as i64;
                    let ph = self.flux.phase(n * l) - (self.energies[nu] + n as f64 * self.field) * t;
                    d[j] = cj * C64::from_polar(1.0, wrap(ph));
                }
                self.forward.process(&mut d);
                for ((a, x), y) in acc.iter_mut().zip(&d).zip(&self.spectra[nu][li]) {
                    *a += x * y;
                }
            }
            self.inverse.process(&mut acc);
            let scale = 1.0 / l_len as f64;
            for mi in 0..g.height {
                out[g.index(li, mi)] = acc[mi + self.s_len - 1] * scale;
            }
        }
        WaveFunction::from_vec(g, out)
    }
}

fn wrap(x: f64) -> f64 {
    x - TAU * ((x + PI) / TAU).floor()
}

/// Defaults for edge-mediated Bloch oscillation runs.
#[derive(Clone, Debug)]
pub struct EdgeRunOptions {
    pub packet: PacketSpec,
    /// Checkpoint times in units of `T_B`.
    pub checkpoints_tb: Vec<f64>,
    pub keep_snapshots: bool,
}

impl Default for EdgeRunOptions {
    fn default() -> Self {
        EdgeRunOptions {
            packet: PacketSpec {
                center_x: 0.0,
                center_y: 85.0,
                width: 5.0,
            },
            checkpoints_tb: (0..=16).map(|k| k as f64 / 4.0).collect(),
            keep_snapshots: false,
        }
    }
}

/// Coverage below which the ladder expansion is rejected.
pub const COVERAGE_TOLERANCE: f64 = 1e-6;

/// Transporting packet in a Dirichlet strip, propagated with the ladder
/// expansion. Observables include band populations and packet clusters per
/// band stripe.
pub fn edge_bloch_run(config: &LatticeConfig, opts: &EdgeRunOptions) -> Result<PropagationRun> {
    if config.bc_x != BoundaryX::Dirichlet {
        return Err(Error::Config("edge runs need Dirichlet bc in x".into()));
    }
    let states = diagonalize_strip(config)?;
    let h = crate::lattice::build_hamiltonian(config)?;
    let psi0 = make_transporting_packet(config, opts.packet)?;
    edge_bloch_run_with(&h, &states, &psi0, opts)
}

/// [`edge_bloch_run`] with precomputed states and initial packet.
pub fn edge_bloch_run_with(
    h: &Hamiltonian,
    states: &[LandauStarkState],
    psi0: &WaveFunction,
    opts: &EdgeRunOptions,
) -> Result<PropagationRun> {
    let tb = TAU / h.field();
    let times: Vec<f64> = opts.checkpoints_tb.iter().map(|k| k * tb).collect();
    check_times(&times)?;
    let sp = SpectralPropagator::new(states, h.flux(), h.field(), psi0)?;
    if (sp.coverage() - 1.0).abs() > COVERAGE_TOLERANCE {
        return Err(Error::Truncation(format!(
            "the ladder states resolve only {:.8} of the initial packet",
            sp.coverage()
        )));
    }
    let projector = BandProjector::for_hamiltonian(h)?;
    let energy = h.expectation(psi0)?;
    let popts = PropagateOptions {
        clusters: Some(ClusterSpec::for_energy(h.flux(), h.hopping(), h.field(), energy)?),
        keep_snapshots: opts.keep_snapshots,
        ..Default::default()
    };
    let mut rec = Recorder {
        h,
        projector: Some(&projector),
        opts: &popts,
        x_ref: 0.0,
        energy0: Some(energy),
    };
    let mut run = PropagationRun {
        field: h.field(),
        bc: h.bc_x(),
        psi0: psi0.clone(),
        times: Vec::new(),
        snapshots: Vec::new(),
        observables: Vec::new(),
    };
    for &t in &times {
        let psi = sp.state(t)?;
        run.observables.push(rec.observe(&psi, t)?);
        run.times.push(t);
        if opts.keep_snapshots {
            run.snapshots.push(psi);
        }
    }
    Ok(run)
}

/// First checkpoint at which the edge columns hold at least `level` of the
/// weight.
pub fn first_edge_arrival(run: &PropagationRun, level: f64) -> Option<f64> {
    run.observables.iter().find(|o| o.edge_weight >= level).map(|o| o.t)
}

/// First checkpoint where the edge weight, already above `level`, peaks:
/// the packet has arrived and starts running along the wall.
pub fn first_edge_peak(run: &PropagationRun, level: f64) -> Option<f64> {
    let w: Vec<f64> = run.observables.iter().map(|o| o.edge_weight).collect();
    (1..w.len().saturating_sub(1))
        .find(|&i| w[i] >= level && w[i] >= w[i - 1] && w[i] >= w[i + 1])
        .map(|i| run.observables[i].t)
}

/// Mean number of clusters over the bands at a checkpoint.
pub fn mean_clusters(o: &Observables) -> f64 {
    if o.clusters.is_empty() {
        return 0.0;
    }
    o.clusters.iter().sum::<usize>() as f64 / o.clusters.len() as f64
}

#[derive(Clone, Debug)]
pub struct DepletionOptions {
    /// Ensemble members; their columns are spread evenly across the strip.
    pub ensemble: usize,
    pub periods: f64,
    pub per_period: usize,
    /// Row of the initial ground-band states.
    pub center_y: i64,
    /// Half-height of the initial states around `center_y`.
    pub source_rows: i64,
    /// Population range used for the linear fit.
    pub fit_window: (f64, f64),
    pub threads: usize,
}

impl Default for DepletionOptions {
    fn default() -> Self {
        DepletionOptions {
            ensemble: 20,
            periods: 4.0,
            per_period: 8,
            center_y: 85,
            source_rows: 30,
            fit_window: (0.15, 0.85),
            threads: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DepletionCurve {
    pub times: Vec<f64>,
    /// Ensemble-averaged ground-band population.
    pub population: Vec<f64>,
    /// `-dP₀/dt` from the fit.
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub fit_points: usize,
}

impl DepletionCurve {
    pub fn to_csv(&self, field: f64) -> Result<CsvTable> {
        let mut t = CsvTable::new("band_depletion", &["t", "t_over_TB", "P0"]);
        for (&time, &p) in self.times.iter().zip(&self.population) {
            t.push(&[Cell::F(time), Cell::F(time * field / TAU), Cell::F(p)])?;
        }
        Ok(t)
    }

    pub fn summary(&self) -> String {
        format!(
            "rate {} r2 {} points {}",
            fmt_f64(self.rate),
            fmt_f64(self.r2),
            self.fit_points
        )
    }
}

/// Ground-band depletion: each ensemble member is a site state projected on
/// the zero-field ground band, propagated independently; populations are
/// averaged and fitted linearly inside the fit window.
pub fn band_depletion(config: &LatticeConfig, opts: &DepletionOptions) -> Result<DepletionCurve> {
    if opts.ensemble == 0 {
        return Err(Error::Config("empty ensemble".into()));
    }
    let h = crate::lattice::build_hamiltonian(config)?;
    let g = *h.grid();
    let projector = BandProjector::for_hamiltonian(&h)?;
    let tb = config.bloch_period();
    let n = (opts.periods * opts.per_period as f64).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=n).map(|k| tb * opts.periods * k as f64 / n as f64).collect();
    let labels = column_labels(g.width);
    let members = opts.ensemble.min(g.width);
    let popts = PropagateOptions::default();
    let curves: Vec<Result<Vec<f64>>> = map_indexed(members, opts.threads, |k| {
        let l = labels[(k * g.width) / members + g.width / (2 * members)];
        let delta = WaveFunction::delta(g, l, opts.center_y)?;
        // ground-band states at the edges disperse along y; keep the part
        // near the source row
        let mut psi0 = projector.project(&delta, 0)?;
        for li in 0..g.width {
            for mi in 0..g.height {
                if (g.m_of(mi) - opts.center_y).abs() > opts.source_rows {
                    psi0.amplitudes_mut()[g.index(li, mi)] = ZERO;
                }
            }
        }
        let psi0 = psi0.normalized()?;
        let run = propagate(&h, &psi0, &times, &popts, Some(&projector))?;
        Ok(run.observables.iter().map(|o| o.band_populations[0]).collect())
    });
    let mut population = vec![0.0; times.len()];
    for c in curves {
        for (p, v) in population.iter_mut().zip(c?) {
            *p += v / members as f64;
        }
    }
    let (lo, hi) = opts.fit_window;
    // the fit stops at the first minimum: later the band refills
    let stop = population
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let pts: Vec<(f64, f64)> = times[..=stop]
        .iter()
        .zip(&population[..=stop])
        .filter(|(_, &p)| p >= lo && p <= hi)
        .map(|(&t, &p)| (t, p))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} checkpoints inside the fit window {lo}..{hi}",
            pts.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let (a, b, r2) = linear_fit(&x, &y);
    Ok(DepletionCurve {
        times,
        population,
        rate: -b,
        intercept: a,
        r2,
        fit_points: pts.len(),
    })
}

/// Rate of the periodic-strip contrast run: the same ensemble without
/// edges, fitted over the whole run.
pub fn depletion_contrast_rate(config: &LatticeConfig, opts: &DepletionOptions) -> Result<f64> {
    let cfg = config.clone().with_bc(BoundaryX::Periodic);
    let o = DepletionOptions {
        fit_window: (f64::NEG_INFINITY, f64::INFINITY),
        ..opts.clone()
    };
    band_depletion(&cfg, &o).map(|c| c.rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Flux;

    fn small(bc: BoundaryX) -> (LatticeConfig, Hamiltonian) {
        let cfg = LatticeConfig::new(Flux::new(1, 5).unwrap(), 1.0, 0.1, 10).with_bc(bc);
        let h = Hamiltonian::on_grid(&cfg, Grid::new(10, -30, 30));
        (cfg, h)
    }

    #[test]
    fn projector_is_idempotent_and_complete() {
        let (_, h) = small(BoundaryX::Dirichlet);
        let p = BandProjector::for_hamiltonian(&h).unwrap();
        let psi = gaussian_packet(*h.grid(), PacketSpec { center_x: 0.0, center_y: 0.0, width: 2.0 }).unwrap();
        let (pops, gap) = p.populations(&psi).unwrap();
        assert!((pops.iter().sum::<f64>() + gap - 1.0).abs() < 1e-10);
        let p0 = p.project(&psi, 0).unwrap();
        let p00 = p.project(&p0, 0).unwrap();
        let diff: f64 = p0.amplitudes().iter().zip(p00.amplitudes()).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!(diff.sqrt() < 1e-10);
        let (pp, _) = p.populations(&p0).unwrap();
        assert!((pp[0] - p0.norm_sqr()).abs() < 1e-10);
        assert!((pp[0] - pops[0]).abs() < 1e-10);
    }

    #[test]
    fn clusters_counted_per_stripe() {
        let g = Grid::new(10, 0, 9);
        let psi = WaveFunction::from_fn(g, |l, m| {
            if (m == 2 && (l == -3 || l == 2)) || (m == 7 && l == 0) {
                C64::new(1.0, 0.0)
            } else {
                ZERO
            }
        });
        assert_eq!(count_clusters(&psi, &[(0, 4), (5, 9)], 1e-3, BoundaryX::Dirichlet), vec![2, 1]);
        // wrap-around joins the first and last column
        let psi = WaveFunction::from_fn(g, |l, _| if l == -4 || l == 5 { C64::new(1.0, 0.0) } else { ZERO });
        assert_eq!(count_clusters(&psi, &[(0, 9)], 1e-3, BoundaryX::Periodic), vec![1]);
        assert_eq!(count_clusters(&psi, &[(0, 9)], 1e-3, BoundaryX::Dirichlet), vec![2]);
    }

    #[test]
    fn stripes_are_ordered_and_disjoint() {
        let s = band_stripes(0.0, &[-1.7, -1.2, -0.7], 0.02);
        assert!(s[0].0 > s[1].1 && s[1].0 > s[2].1);
        assert!(s[0].0 <= 85 && s[0].1 >= 85);
    }

    #[test]
    fn eigenstate_only_gains_a_phase() {
        let (_, h) = small(BoundaryX::Dirichlet);
        let (vals, vecs) = crate::linalg::hermitian_eigen(h.dense().unwrap());
        let k = vals.len() / 2;
        let psi0 = WaveFunction::from_vec(*h.grid(), vecs.column(k).iter().copied().collect()).unwrap();
        let opts = PropagateOptions { keep_snapshots: true, ..Default::default() };
        let run = propagate(&h, &psi0, &[0.0, 7.0, 50.0], &opts, None).unwrap();
        for s in &run.snapshots {
            assert!((psi0.inner(s).unwrap().norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn escape_is_reported() {
        let (_, h) = small(BoundaryX::Dirichlet);
        let g = *h.grid();
        let psi0 = WaveFunction::delta(g, 0, g.m_max() - 1).unwrap();
        let err = propagate(&h, &psi0, &[1.0], &PropagateOptions::default(), None).unwrap_err();
        assert!(matches!(err, Error::WindowEscape { .. }));
    }

    #[test]
    fn spectral_propagator_matches_krylov() {
        let cfg = LatticeConfig::new(Flux::new(1, 5).unwrap(), 1.0, 0.25, 6);
        let states = diagonalize_strip(&cfg).unwrap();
        let h = crate::lattice::build_hamiltonian(&cfg).unwrap();
        let psi0 = gaussian_packet(*h.grid(), PacketSpec { center_x: 0.0, center_y: 3.0, width: 1.5 }).unwrap();
        let sp = SpectralPropagator::new(&states, cfg.flux, cfg.field, &psi0).unwrap();
        assert!((sp.coverage() - 1.0).abs() < 1e-8, "{}", sp.coverage());
        let opts = PropagateOptions { keep_snapshots: true, ..Default::default() };
        let run = propagate(&h, &psi0, &[13.3, 40.0], &opts, None).unwrap();
        for (t, s) in run.times.iter().zip(&run.snapshots) {
            let e = sp.state(*t).unwrap();
            assert!(e.inner(s).unwrap().norm() > 1.0 - 1e-8);
        }
    }
}
