//! Classical counterpart of the lattice model,
//!
//! ```text
//! H = -J cos(p_x - 2παy) - J cos(p_y) + V(x) + F y,
//! ```
//!
//! with a box potential across the strip. Integrated with Gragg–Bulirsch–
//! Stoer extrapolation (eighth order, adaptive), hard-wall contacts located
//! by bisection.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::io::{Cell, CsvTable};
use crate::linalg::{linear_fit, wrap_phase};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WallModel {
    /// No walls: the bulk problem.
    None,
    /// Elastic reflection of the kinetic momentum at `|x| = Lx/2`.
    Hard,
    /// `V(x) = V0 · max(0, |x| - Lx/2)²`.
    Smooth { strength: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalParams {
    /// Peierls phase α (any real value).
    pub alpha: f64,
    pub hopping: f64,
    pub field: f64,
    /// Strip width `Lx`; walls at `x = ±Lx/2`.
    pub width: f64,
    pub walls: WallModel,
}

impl ClassicalParams {
    pub fn new(alpha: f64, hopping: f64, field: f64, width: f64) -> Self {
        ClassicalParams {
            alpha,
            hopping,
            field,
            width,
            walls: WallModel::Hard,
        }
    }

    pub fn with_walls(mut self, walls: WallModel) -> Self {
        self.walls = walls;
        self
    }

    /// Cyclotron frequency `2παJ`.
    pub fn cyclotron_frequency(&self) -> f64 {
        TAU * self.alpha * self.hopping
    }

    /// Cyclotron period `2π/ω_c`.
    pub fn cyclotron_period(&self) -> f64 {
        TAU / self.cyclotron_frequency()
    }

    /// Drift velocity `F/2πα`.
    pub fn drift_velocity(&self) -> f64 {
        self.field / (TAU * self.alpha)
    }

    fn wall_potential(&self, x: f64) -> (f64, f64) {
        match self.walls {
            WallModel::Smooth { strength } => {
                let d = x.abs() - 0.5 * self.width;
                if d > 0.0 {
                    (strength * d * d, 2.0 * strength * d * x.signum())
                } else {
                    (0.0, 0.0)
                }
            }
            _ => (0.0, 0.0),
        }
    }

    /// Kinetic energy `E_K = -J cos(p_x - 2παy) - J cos(p_y)`.
    pub fn kinetic_energy(&self, p: &PhaseSpacePoint) -> f64 {
        -self.hopping * ((p.px - TAU * self.alpha * p.y).cos() + p.py.cos())
    }

    /// Total energy including the wall and the field.
    pub fn energy(&self, p: &PhaseSpacePoint) -> f64 {
        self.kinetic_energy(p) + self.wall_potential(p.x).0 + self.field * p.y
    }

    fn rhs(&self, s: &[f64; 4]) -> [f64; 4] {
        let [x, y, px, py] = *s;
        let u = px - TAU * self.alpha * y;
        let j = self.hopping;
        let su = u.sin();
        [
            j * su,
            j * py.sin(),
            -self.wall_potential(x).1,
            TAU * self.alpha * j * su - self.field,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PhaseSpacePoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
}

impl PhaseSpacePoint {
    fn state(&self) -> [f64; 4] {
        [self.x, self.y, self.px, self.py]
    }

    fn from_state(t: f64, s: [f64; 4]) -> Self {
        PhaseSpacePoint {
            t,
            x: s[0],
            y: s[1],
            px: s[2],
            py: s[3],
        }
    }

    /// Euclidean phase-space distance.
    pub fn distance(&self, o: &PhaseSpacePoint) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2) + (self.px - o.px).powi(2) + (self.py - o.py).powi(2)).sqrt()
    }
}

/// Initial point at `(x, y)` with kinetic momentum `p_x - 2παy = 0` and `p_y`
/// chosen so that `E_K` takes the requested value.
pub fn initial_point(params: &ClassicalParams, x: f64, y: f64, kinetic: f64) -> Result<PhaseSpacePoint> {
    let j = params.hopping;
    if j <= 0.0 {
        return Ok(PhaseSpacePoint { t: 0.0, x, y, px: TAU * params.alpha * y, py: 0.0 });
    }
    let c = -kinetic / j - 1.0;
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::Config(format!(
            "E_K = {kinetic} is unreachable with zero x-momentum (needs -2J <= E_K <= 0)"
        )));
    }
    Ok(PhaseSpacePoint {
        t: 0.0,
        x,
        y,
        px: TAU * params.alpha * y,
        py: c.acos(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallContact {
    pub t: f64,
    /// `+1` right wall, `-1` left wall.
    pub side: i8,
    pub kinetic_energy: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub params: ClassicalParams,
    pub samples: Vec<PhaseSpacePoint>,
    pub kinetic_energy: Vec<f64>,
    pub contacts: Vec<WallContact>,
    /// Largest `|H(t) - H(0)|` seen at a sample.
    pub energy_drift: f64,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Allowed `|H - H₀|/J`.
    pub energy_tolerance: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-13,
            atol: 1e-13,
            energy_tolerance: 1e-8,
            max_steps: 50_000_000,
        }
    }
}

/// Substep counts of the extrapolation table (order 8 with four columns).
const SEQUENCE: [usize; 4] = [2, 4, 6, 8];

struct Gbs<'a> {
    params: &'a ClassicalParams,
    opts: &'a IntegratorOptions,
}

impl Gbs<'_> {
    fn midpoint(&self, s: &[f64; 4], h: f64, n: usize) -> [f64; 4] {
        let dt = h / n as f64;
        let mut z0 = *s;
        let f0 = self.params.rhs(&z0);
        let mut z1 = [0.0; 4];
        for i in 0..4 {
            z1[i] = z0[i] + dt * f0[i];
        }
        for _ in 1..n {
            let f = self.params.rhs(&z1);
            let mut z2 = [0.0; 4];
            for i in 0..4 {
                z2[i] = z0[i] + 2.0 * dt * f[i];
            }
            z0 = z1;
            z1 = z2;
        }
        let f = self.params.rhs(&z1);
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = 0.5 * (z1[i] + z0[i] + dt * f[i]);
        }
        out
    }

    /// One extrapolated step; returns the state and a scaled error norm.
    fn step(&self, s: &[f64; 4], h: f64) -> ([f64; 4], f64) {
        let k = SEQUENCE.len();
        let mut table: Vec<[f64; 4]> = Vec::with_capacity(k);
        let mut prev_best = [0.0; 4];
        for (i, &n) in SEQUENCE.iter().enumerate() {
            let mut row = vec![self.midpoint(s, h, n)];
            for j in 1..=i {
                let ratio = (n as f64 / SEQUENCE[i - j] as f64).powi(2) - 1.0;
                let mut t = [0.0; 4];
                for c in 0..4 {
                    t[c] = row[j - 1][c] + (row[j - 1][c] - table[j - 1][c]) / ratio;
                }
                row.push(t);
            }
            if i == k - 1 {
                prev_best = row[i - 1];
            }
            table = row;
        }
        let best = table[k - 1];
        let mut err: f64 = 0.0;
        for c in 0..4 {
            let sc = self.opts.atol + self.opts.rtol * best[c].abs().max(s[c].abs());
            err = err.max((best[c] - prev_best[c]).abs() / sc);
        }
        (best, err)
    }
}

/// Integrates Hamilton's equations from `initial` for a signed duration
/// `t_final`, sampling every `sample_dt`.
pub fn integrate(
    initial: PhaseSpacePoint,
    params: &ClassicalParams,
    t_final: f64,
    sample_dt: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if params.walls != WallModel::None && initial.x.abs() >= 0.5 * params.width {
        return Err(Error::Config(format!(
            "initial x = {} is outside the walls at ±{}",
            initial.x,
            0.5 * params.width
        )));
    }
    if !(sample_dt > 0.0) || !t_final.is_finite() {
        return Err(Error::Config("sample_dt must be positive and t_final finite".into()));
    }
    let dir = if t_final < 0.0 { -1.0 } else { 1.0 };
    let total = t_final.abs();
    let gbs = Gbs { params, opts };
    let e0 = params.energy(&initial);
    let escale = params.hopping.abs().max(params.field.abs()).max(1e-300);
    let hard = params.walls == WallModel::Hard;
    let half = 0.5 * params.width;

    let mut traj = Trajectory {
        params: *params,
        samples: vec![initial],
        kinetic_energy: vec![params.kinetic_energy(&initial)],
        contacts: Vec::new(),
        energy_drift: 0.0,
        steps: 0,
    };
    let mut s = initial.state();
    let mut elapsed = 0.0;
    let mut next_sample = 1usize;
    let mut h = (0.1 * params.cyclotron_period().abs()).min(sample_dt).min(1.0);
    if !h.is_finite() || h <= 0.0 {
        h = sample_dt.min(1.0);
    }
    while elapsed < total * (1.0 - 1e-14) {
        let target = (next_sample as f64 * sample_dt).min(total);
        let mut hs = h.min(target - elapsed);
        let (mut new, err) = gbs.step(&s, dir * hs);
        traj.steps += 1;
        if traj.steps > opts.max_steps {
            return Err(Error::Integration(format!("step limit reached at t = {}", dir * elapsed)));
        }
        if !(err <= 1.0) {
            h = hs * (0.9 * err.powf(-1.0 / 7.0)).clamp(0.1, 0.5);
            if h < 1e-12 * total.max(1.0) {
                return Err(Error::Integration(format!("step size underflow at t = {}", dir * elapsed)));
            }
            continue;
        }
        let grow = if err > 0.0 { (0.9 * err.powf(-1.0 / 7.0)).clamp(0.2, 4.0) } else { 4.0 };
        if hard && new[0].abs() > half {
            // bisect the step length to the contact
            let (mut lo, mut hi) = (0.0, hs);
            let mut at = s;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let (trial, _) = gbs.step(&s, dir * mid);
                if trial[0].abs() > half {
                    hi = mid;
                } else {
                    lo = mid;
                    at = trial;
                }
                if hi - lo < 1e-13 * hs.max(1e-300) {
                    break;
                }
            }
            hs = lo;
            new = at;
            let side = if new[0] > 0.0 { 1 } else { -1 };
            // reflect the kinetic momentum: p_x - 2παy → -(p_x - 2παy)
            new[2] = 2.0 * TAU * params.alpha * new[1] - new[2];
            let p = PhaseSpacePoint::from_state(initial.t + dir * (elapsed + hs), new);
            traj.contacts.push(WallContact {
                t: p.t,
                side,
                kinetic_energy: params.kinetic_energy(&p),
            });
        }
        if !hard && params.walls != WallModel::None && s[0].abs() <= half && new[0].abs() > half {
            let p = PhaseSpacePoint::from_state(initial.t + dir * (elapsed + hs), new);
            traj.contacts.push(WallContact {
                t: p.t,
                side: if new[0] > 0.0 { 1 } else { -1 },
                kinetic_energy: params.kinetic_energy(&p),
            });
        }
        s = new;
        elapsed += hs;
        h = (hs * grow).max(h.min(hs * grow));
        if (elapsed - target).abs() <= 1e-12 * target.max(1.0) {
            elapsed = target;
            let p = PhaseSpacePoint::from_state(initial.t + dir * elapsed, s);
            let drift = (params.energy(&p) - e0).abs();
            traj.energy_drift = traj.energy_drift.max(drift);
            if drift > opts.energy_tolerance * escale {
                return Err(Error::Integration(format!(
                    "energy drift {drift:.3e} exceeds tolerance at t = {}",
                    p.t
                )));
            }
            traj.kinetic_energy.push(params.kinetic_energy(&p));
            traj.samples.push(p);
            next_sample += 1;
        }
    }
    Ok(traj)
}

/// Sampling interval used for trajectory output: `T_c / 50`.
pub fn default_sample_dt(params: &ClassicalParams) -> f64 {
    let tc = params.cyclotron_period();
    if tc.is_finite() && tc > 0.0 {
        tc / 50.0
    } else {
        0.2
    }
}

impl Trajectory {
    /// Upward zero crossings of `p_y`, linearly interpolated. On closed
    /// orbits consecutive crossings are one orbital period apart.
    pub fn py_crossings(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for w in self.samples.windows(2) {
            let (a, b) = (w[0].py, w[1].py);
            let ka = (a / TAU).round();
            let (ra, rb) = (a - TAU * ka, b - TAU * ka);
            if ra < 0.0 && rb >= 0.0 {
                out.push(w[0].t + (w[1].t - w[0].t) * (-ra) / (rb - ra));
            }
        }
        out
    }

    /// Mean orbital period from the `p_y` crossings.
    pub fn orbital_period(&self) -> Result<f64> {
        let c = self.py_crossings();
        if c.len() < 2 {
            return Err(Error::InsufficientData("fewer than two orbit crossings".into()));
        }
        Ok((c[c.len() - 1] - c[0]) / (c.len() - 1) as f64)
    }

    fn interpolate_x(&self, t: f64) -> f64 {
        let i = self.samples.partition_point(|p| p.t < t).clamp(1, self.samples.len() - 1);
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        a.x + (b.x - a.x) * (t - a.t) / (b.t - a.t)
    }

    /// Orbit-centre drift velocity, averaged over whole orbits.
    pub fn guiding_center_velocity(&self) -> Result<f64> {
        let c = self.py_crossings();
        if c.len() < 2 {
            return Err(Error::InsufficientData("fewer than two orbit crossings".into()));
        }
        let (t0, t1) = (c[0], c[c.len() - 1]);
        Ok((self.interpolate_x(t1) - self.interpolate_x(t0)) / (t1 - t0))
    }

    /// CSV with columns `t, t_over_Tc, x, y, px, py, E_K, regime_label`;
    /// momenta are wrapped into `(-π, π]`.
    pub fn to_csv(&self, labels: Option<&[Regime]>) -> Result<CsvTable> {
        let mut t = CsvTable::new("trajectory", &["t", "t_over_Tc", "x", "y", "px", "py", "E_K", "regime_label"]);
        let tc = self.params.cyclotron_period();
        for (i, p) in self.samples.iter().enumerate() {
            let label = labels.and_then(|l| l.get(i)).copied().unwrap_or(Regime::Bulk);
            t.push(&[
                Cell::F(p.t),
                Cell::F(if tc.is_finite() { p.t / tc } else { 0.0 }),
                Cell::F(p.x),
                Cell::F(p.y),
                Cell::F(wrap_phase(p.px)),
                Cell::F(wrap_phase(p.py)),
                Cell::F(self.kinetic_energy[i]),
                Cell::S(label.as_str()),
            ])?;
        }
        Ok(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Bulk,
    EdgeLeft,
    EdgeRight,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Bulk => "bulk",
            Regime::EdgeLeft => "edge_left",
            Regime::EdgeRight => "edge_right",
        }
    }
}

/// Consecutive wall contacts on one side.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeInterval {
    pub side: i8,
    pub start: f64,
    pub end: f64,
    pub contacts: usize,
    pub kinetic_start: f64,
    pub kinetic_end: f64,
    /// Least-squares `dE_K/dt` over the interval.
    pub kinetic_slope: f64,
}

/// Flight between edge intervals on opposite walls.
#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    pub from_side: i8,
    pub to_side: i8,
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossingKind {
    /// Along the drift direction: orbits carried across at `v*`.
    Drift,
    /// Against it: the fast transfer after acceleration along a wall.
    Scattering,
}

impl Crossing {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn kind(&self, drift_velocity: f64) -> CrossingKind {
        if (self.to_side - self.from_side) as f64 * drift_velocity > 0.0 {
            CrossingKind::Drift
        } else {
            CrossingKind::Scattering
        }
    }
}

#[derive(Clone, Debug)]
pub struct CycleReport {
    pub edge_intervals: Vec<EdgeInterval>,
    pub crossings: Vec<Crossing>,
    /// End of every edge interval: the particle leaves the wall.
    pub detachments: Vec<f64>,
    /// Mean duration of the drift crossings.
    pub mean_crossing: f64,
    pub drift_crossings: usize,
    /// `Lx / v*`.
    pub expected_crossing: f64,
    pub edge_fraction: f64,
    pub bulk_fraction: f64,
    pub labels: Vec<Regime>,
}

/// Contacts closer than this many cyclotron periods belong to one edge
/// interval.
pub const CONTACT_GAP_PERIODS: f64 = 5.0;

/// Splits a walled trajectory into edge intervals and bulk crossings.
pub fn bloch_cycle_analysis(traj: &Trajectory) -> Result<CycleReport> {
    let p = &traj.params;
    let gap = CONTACT_GAP_PERIODS * p.cyclotron_period();
    let mut groups: Vec<Vec<WallContact>> = Vec::new();
    for c in &traj.contacts {
        match groups.last_mut() {
            Some(g) if g.last().map(|l| l.side == c.side && (c.t - l.t).abs() < gap).unwrap_or(false) => g.push(*c),
            _ => groups.push(vec![*c]),
        }
    }
    let mut labels = vec![Regime::Bulk; traj.samples.len()];
    let mut intervals = Vec::with_capacity(groups.len());
    for g in &groups {
        let (start, end) = (g[0].t, g[g.len() - 1].t);
        let idx: Vec<usize> = (0..traj.samples.len())
            .filter(|&i| traj.samples[i].t >= start && traj.samples[i].t <= end)
            .collect();
        let side = g[0].side;
        for &i in &idx {
            labels[i] = if side > 0 { Regime::EdgeRight } else { Regime::EdgeLeft };
        }
        let ts: Vec<f64> = idx.iter().map(|&i| traj.samples[i].t).collect();
        let es: Vec<f64> = idx.iter().map(|&i| traj.kinetic_energy[i]).collect();
        let slope = if ts.len() >= 2 { linear_fit(&ts, &es).1 } else { 0.0 };
        intervals.push(EdgeInterval {
            side,
            start,
            end,
            contacts: g.len(),
            kinetic_start: g[0].kinetic_energy,
            kinetic_end: g[g.len() - 1].kinetic_energy,
            kinetic_slope: slope,
        });
    }
    let crossings: Vec<Crossing> = intervals
        .windows(2)
        .filter(|w| w[0].side != w[1].side)
        .map(|w| Crossing {
            from_side: w[0].side,
            to_side: w[1].side,
            start: w[0].end,
            end: w[1].start,
        })
        .collect();
    if intervals.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} edge intervals; at least three are needed",
            intervals.len()
        )));
    }
    let span = traj.samples.last().map(|s| s.t).unwrap_or(0.0) - traj.samples[0].t;
    let edge_time: f64 = intervals.iter().map(|i| i.end - i.start).sum();
    let v = p.drift_velocity();
    let drift: Vec<f64> = crossings
        .iter()
        .filter(|c| c.kind(v) == CrossingKind::Drift)
        .map(Crossing::duration)
        .collect();
    let mean_crossing = if drift.is_empty() {
        f64::NAN
    } else {
        drift.iter().sum::<f64>() / drift.len() as f64
    };
    Ok(CycleReport {
        detachments: intervals.iter().map(|i| i.end).collect(),
        edge_intervals: intervals,
        crossings,
        mean_crossing,
        drift_crossings: drift.len(),
        expected_crossing: p.width / v.abs(),
        edge_fraction: edge_time / span,
        bulk_fraction: 1.0 - edge_time / span,
        labels,
    })
}

/// Twin-trajectory divergence.
#[derive(Clone, Debug)]
pub struct Divergence {
    pub times: Vec<f64>,
    pub distance: Vec<f64>,
    /// Exponential rate from a fit of `ln d` before saturation.
    pub rate: f64,
    pub r2: f64,
    pub fit_points: usize,
    /// Duration of the fit window.
    pub fit_span: f64,
}

/// Growth over the fit window needed before a divergence counts as
/// exponential: one decade.
pub const MIN_GROWTH: f64 = std::f64::consts::LN_10;

impl Divergence {
    /// Positive rate, a good log-linear fit and at least a decade of growth.
    pub fn is_exponential(&self) -> bool {
        self.rate > 0.0 && self.r2 > 0.9 && self.rate * self.fit_span >= MIN_GROWTH
    }
}

/// Distance at which the divergence counts as saturated.
pub const SATURATION_DISTANCE: f64 = 1.0;

/// Integrates `initial` and a copy displaced by `delta` in y and fits the
/// growth of their phase-space distance.
pub fn sensitivity_probe(
    initial: PhaseSpacePoint,
    delta: f64,
    params: &ClassicalParams,
    t_final: f64,
    sample_dt: f64,
) -> Result<Divergence> {
    let opts = IntegratorOptions::default();
    let a = integrate(initial, params, t_final, sample_dt, &opts)?;
    let mut twin = initial;
    twin.y += delta;
    let b = integrate(twin, params, t_final, sample_dt, &opts)?;
    let n = a.samples.len().min(b.samples.len());
    let times: Vec<f64> = a.samples[..n].iter().map(|p| p.t).collect();
    let distance: Vec<f64> = (0..n).map(|i| a.samples[i].distance(&b.samples[i])).collect();
    let stop = distance
        .iter()
        .position(|&d| d > SATURATION_DISTANCE)
        .unwrap_or(n);
    let (x, y): (Vec<f64>, Vec<f64>) = (0..stop)
        .filter(|&i| distance[i] > 0.0)
        .map(|i| (times[i], distance[i].ln()))
        .unzip();
    if x.len() < 3 {
        return Err(Error::InsufficientData("divergence saturated immediately".into()));
    }
    let (_, rate, r2) = linear_fit(&x, &y);
    Ok(Divergence {
        fit_points: x.len(),
        fit_span: x[x.len() - 1] - x[0],
        times,
        distance,
        rate,
        r2,
    })
}

impl Divergence {
    pub fn to_csv(&self) -> Result<CsvTable> {
        let mut t = CsvTable::new("divergence", &["t", "distance"]);
        for (a, b) in self.times.iter().zip(&self.distance) {
            t.push(&[Cell::F(*a), Cell::F(*b)])?;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2(field: f64) -> ClassicalParams {
        ClassicalParams::new(0.1, 1.0, field, 40.0)
    }

    #[test]
    fn zero_hopping_freezes_positions() {
        let p = ClassicalParams::new(0.1, 0.0, 0.3, 40.0);
        let s = PhaseSpacePoint { t: 0.0, x: 1.0, y: 2.0, px: 0.5, py: 0.25 };
        let tr = integrate(s, &p, 10.0, 1.0, &IntegratorOptions::default()).unwrap();
        let last = tr.samples.last().unwrap();
        assert!((last.x - 1.0).abs() < 1e-14 && (last.y - 2.0).abs() < 1e-14);
        assert!((last.py - (0.25 - 3.0)).abs() < 1e-12);
        assert!((last.px - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gbs_matches_free_motion() {
        // α = 0, F = 0: straight lines at constant velocity
        let p = ClassicalParams::new(0.0, 1.0, 0.0, 40.0).with_walls(WallModel::None);
        let s = PhaseSpacePoint { t: 0.0, x: 0.0, y: 0.0, px: 0.7, py: -0.4 };
        let tr = integrate(s, &p, 25.0, 5.0, &IntegratorOptions::default()).unwrap();
        let last = tr.samples.last().unwrap();
        assert!((last.x - 25.0 * 0.7f64.sin()).abs() < 1e-10);
        assert!((last.y - 25.0 * (-0.4f64).sin()).abs() < 1e-10);
    }

    #[test]
    fn time_reversal_returns_home() {
        let p = fig2(0.0).with_walls(WallModel::None);
        let s = initial_point(&p, 0.0, 0.0, -1.5).unwrap();
        let fwd = integrate(s, &p, 200.0, 0.5, &IntegratorOptions::default()).unwrap();
        let end = *fwd.samples.last().unwrap();
        let back = integrate(end, &p, -200.0, 0.5, &IntegratorOptions::default()).unwrap();
        assert!(back.samples.last().unwrap().distance(&s) < 1e-6);
    }

    #[test]
    fn hard_wall_conserves_energy_and_reflects() {
        let p = ClassicalParams::new(0.1, 1.0, 0.0, 2.0);
        let s = PhaseSpacePoint { t: 0.0, x: 0.0, y: 0.0, px: 1.2, py: 0.3 };
        let tr = integrate(s, &p, 300.0, 0.5, &IntegratorOptions::default()).unwrap();
        assert!(!tr.contacts.is_empty());
        assert!(tr.samples.iter().all(|q| q.x.abs() <= 1.0 + 1e-9));
        assert!(tr.energy_drift < 1e-9);
    }

    #[test]
    fn cyclotron_period_near_band_bottom() {
        let p = fig2(0.0).with_walls(WallModel::None);
        let s = initial_point(&p, 0.0, 0.0, -2.0 + 0.02).unwrap();
        let tr = integrate(s, &p, 200.0, 0.05, &IntegratorOptions::default()).unwrap();
        let t = tr.orbital_period().unwrap();
        assert!((t - 10.0).abs() < 0.2, "{t}");
    }

    #[test]
    fn delta_doubling_doubles_early_distance() {
        let p = fig2(0.02);
        let s = initial_point(&p, 0.0, 0.0, -2.0 + 0.1 * TAU / 2.0).unwrap();
        let a = sensitivity_probe(s, 1e-8, &p, 50.0, 1.0).unwrap();
        let b = sensitivity_probe(s, 2e-8, &p, 50.0, 1.0).unwrap();
        let r = b.distance[20] / a.distance[20];
        assert!((r - 2.0).abs() < 1e-3, "{r}");
    }

    #[test]
    fn cycle_structure_survives_small_perturbations() {
        let p = fig2(0.02);
        let s = initial_point(&p, 0.0, 0.0, -2.0 + 0.1 * TAU / 2.0).unwrap();
        let base = bloch_cycle_analysis(&integrate(s, &p, 4000.0, 0.2, &IntegratorOptions::default()).unwrap()).unwrap();
        assert!((base.mean_crossing / base.expected_crossing - 1.0).abs() < 0.3);
        assert!((base.edge_fraction + base.bulk_fraction - 1.0).abs() < 1e-12);
        let first = &base.edge_intervals[0];
        assert_eq!(first.side, 1);
        assert!(first.kinetic_slope > 0.0 && first.kinetic_end > -0.2);
        let mut t = s;
        t.y += 1e-6;
        let other = bloch_cycle_analysis(&integrate(t, &p, 4000.0, 0.2, &IntegratorOptions::default()).unwrap()).unwrap();
        assert_eq!(base.edge_intervals.len(), other.edge_intervals.len());
        assert_eq!(base.drift_crossings, other.drift_crossings);
    }

    #[test]
    fn no_field_means_no_edge_cycle() {
        let p = fig2(0.0);
        let s = initial_point(&p, 0.0, 0.0, -2.0 + 0.1 * TAU / 2.0).unwrap();
        let tr = integrate(s, &p, 1000.0, 0.2, &IntegratorOptions::default()).unwrap();
        assert!(tr.contacts.is_empty());
        let spread = tr.kinetic_energy.iter().fold(0.0f64, |m, e| m.max((e - tr.kinetic_energy[0]).abs()));
        assert!(spread < 1e-9);
        assert!(bloch_cycle_analysis(&tr).is_err());
    }

    #[test]
    fn free_twins_do_not_diverge_exponentially() {
        let p = ClassicalParams::new(0.0, 1.0, 0.0, 40.0).with_walls(WallModel::None);
        let s = initial_point(&p, 0.0, 0.0, -1.5).unwrap();
        let d = sensitivity_probe(s, 1e-8, &p, 2000.0, 1.0).unwrap();
        assert!(!d.is_exponential());
    }
}
