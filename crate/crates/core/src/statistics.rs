//! Quasienergy flow of the Bloch-period operator against the field, and
//! nearest-neighbour spacing statistics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bands::critical_field;
use crate::error::{Error, Result};
use crate::io::{Cell, CsvTable};
use crate::landau_stark::floquet_1d_converged;
use crate::lattice::LatticeConfig;
use crate::parallel::map_indexed;

/// Magnus steps the convergence loop starts from.
pub const FLOW_START_STEPS: usize = 256;
/// Eigenphase convergence demanded of each slice.
pub const FLOW_PHASE_TOLERANCE: f64 = 1e-9;

/// Fundamental-interval energies for every field value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumFlow {
    pub fields: Vec<f64>,
    /// `energies[i]` holds the ascending energies at `fields[i]`, each in
    /// `(-F/2, F/2]`.
    pub energies: Vec<Vec<f64>>,
}

/// `count` equally spaced values covering `[lo, hi]·F_cr`.
pub fn field_grid(config: &LatticeConfig, lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    let fcr = critical_field(config.flux, config.hopping)?;
    if count < 2 {
        return Err(Error::Config("a field grid needs at least two points".into()));
    }
    Ok((0..count)
        .map(|i| fcr * (lo + (hi - lo) * i as f64 / (count - 1) as f64))
        .collect())
}

/// Quasienergies of the period operator at each field.
pub fn spectrum_flow(base: &LatticeConfig, fields: &[f64], threads: usize) -> Result<SpectrumFlow> {
    if fields.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::Config("field values must be positive".into()));
    }
    if base.hopping > 0.0 && !base.flux.is_zero() {
        let fcr = critical_field(base.flux, base.hopping)?;
        if let Some(f) = fields.iter().find(|f| **f >= fcr) {
            return Err(Error::Config(format!("F = {f} is not below F_cr = {fcr}")));
        }
    }
    let slices = map_indexed(fields.len(), threads, |i| {
        let cfg = base.clone().with_field(fields[i]);
        floquet_1d_converged(0.0, &cfg, FLOW_START_STEPS, FLOW_PHASE_TOLERANCE).map(|(s, _)| s.sorted_energies())
    });
    Ok(SpectrumFlow {
        fields: fields.to_vec(),
        energies: slices.into_iter().collect::<Result<_>>()?,
    })
}

impl SpectrumFlow {
    /// Columns `F, nu, energy, energy_over_F`.
    pub fn to_csv(&self) -> Result<CsvTable> {
        let mut t = CsvTable::new("spectrum_flow", &["F", "nu", "energy", "energy_over_F"]);
        for (f, row) in self.fields.iter().zip(&self.energies) {
            for (nu, e) in row.iter().enumerate() {
                t.push(&[Cell::F(*f), Cell::U(nu), Cell::F(*e), Cell::F(e / f)])?;
            }
        }
        Ok(t)
    }

    /// Levels of every slice in units of `F`, i.e. on a circle of length 1.
    pub fn scaled_slices(&self) -> Vec<Vec<f64>> {
        self.fields
            .iter()
            .zip(&self.energies)
            .map(|(f, row)| row.iter().map(|e| e / f).collect())
            .collect()
    }

    /// True if every slice is symmetric under `E → -E` (mod `F`) within
    /// `tol · F`.
    pub fn mirror_symmetric(&self, tol: f64) -> bool {
        self.scaled_slices().iter().all(|row| {
            row.iter().all(|e| {
                row.iter().any(|o| {
                    let d = (e + o).rem_euclid(1.0);
                    d.min(1.0 - d) < tol
                })
            })
        })
    }

    /// Independent levels for spacing statistics. A mirror-symmetric
    /// spectrum repeats every spacing, so only `0 <= E/F <= 1/2` is kept
    /// and the slices are open; otherwise the full circle is returned.
    pub fn statistics_slices(&self) -> (Vec<Vec<f64>>, Option<f64>) {
        let sl = self.scaled_slices();
        if self.mirror_symmetric(MIRROR_TOLERANCE) {
            let half = sl
                .into_iter()
                .map(|row| row.into_iter().filter(|e| *e >= -MIRROR_TOLERANCE).collect())
                .collect();
            (half, None)
        } else {
            (sl, Some(1.0))
        }
    }
}

/// Tolerance, in units of `F`, for detecting the `E → -E` symmetry.
pub const MIRROR_TOLERANCE: f64 = 1e-7;

/// Mean level motion between two nearby fields, in units of the mean
/// spacing: each sorted level of `a` is paired with the closest level of
/// `b` on the quasienergy circle.
pub fn level_velocity(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let spacing = 1.0 / a.len() as f64;
    let total: f64 = a
        .iter()
        .map(|x| {
            b.iter()
                .map(|y| {
                    let d = (x - y).rem_euclid(1.0);
                    d.min(1.0 - d)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / a.len() as f64 / spacing
}

/// Minimum number of pooled spacings.
pub const MIN_SPACINGS: usize = 500;
/// Width of the running window used for unfolding.
pub const UNFOLD_WINDOW: usize = 7;
pub const HISTOGRAM_BINS: usize = 40;
pub const HISTOGRAM_MAX: f64 = 4.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpacingStatistics {
    pub spacings: Vec<f64>,
    pub bins: Vec<f64>,
    /// Normalized histogram density on `[0, 4]`.
    pub counts: Vec<f64>,
    pub ks_wd: f64,
    pub ks_poisson: f64,
    pub ratios: Vec<f64>,
    pub mean_r: f64,
    pub n_spacings: usize,
}

/// Wigner surmise `(π/2) s exp(-πs²/4)`.
pub fn wigner_dyson_pdf(s: f64) -> f64 {
    0.5 * PI * s * (-0.25 * PI * s * s).exp()
}

pub fn wigner_dyson_cdf(s: f64) -> f64 {
    1.0 - (-0.25 * PI * s * s).exp()
}

pub fn poisson_cdf(s: f64) -> f64 {
    1.0 - (-s).exp()
}

/// Kolmogorov–Smirnov distance between a sample and a reference CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Nearest-neighbour spacings of one slice. With `period` the levels live
/// on a circle and the wrap-around gap is included.
pub fn raw_spacings(levels: &[f64], period: Option<f64>) -> Vec<f64> {
    let mut l = levels.to_vec();
    l.sort_by(f64::total_cmp);
    let mut s: Vec<f64> = l.windows(2).map(|w| w[1] - w[0]).collect();
    if let (Some(p), Some(first), Some(last)) = (period, l.first(), l.last()) {
        s.push(first + p - last);
    }
    s
}

/// Divides every spacing by the mean of the `window` spacings centred on it
/// (cyclically when `cyclic`).
pub fn unfold(spacings: &[f64], window: usize, cyclic: bool) -> Vec<f64> {
    let n = spacings.len();
    if n == 0 {
        return Vec::new();
    }
    let w = window.clamp(1, n);
    let half = w / 2;
    (0..n)
        .map(|i| {
            let mean = if cyclic {
                (0..w).map(|k| spacings[(i + n + k - half) % n]).sum::<f64>() / w as f64
            } else {
                let lo = i.saturating_sub(half).min(n - w);
                spacings[lo..lo + w].iter().sum::<f64>() / w as f64
            };
            if mean > 0.0 {
                spacings[i] / mean
            } else {
                0.0
            }
        })
        .collect()
}

/// `min(s_i, s_{i+1}) / max(s_i, s_{i+1})` over consecutive raw spacings.
pub fn gap_ratios(spacings: &[f64], cyclic: bool) -> Vec<f64> {
    let n = spacings.len();
    let pairs = if cyclic { n } else { n.saturating_sub(1) };
    (0..pairs)
        .filter_map(|i| {
            let (a, b) = (spacings[i], spacings[(i + 1) % n]);
            let hi = a.max(b);
            (hi > 0.0).then(|| a.min(b) / hi)
        })
        .collect()
}

/// Unfolds each slice locally, pools the spacings and compares them with
/// the Wigner surmise and the Poisson law. `period` marks circular slices.
pub fn unfold_and_spacings(slices: &[Vec<f64>], period: Option<f64>) -> Result<SpacingStatistics> {
    let mut pooled = Vec::new();
    let mut ratios = Vec::new();
    for sl in slices {
        let raw = raw_spacings(sl, period);
        ratios.extend(gap_ratios(&raw, period.is_some()));
        pooled.extend(unfold(&raw, UNFOLD_WINDOW, period.is_some()));
    }
    if pooled.len() < MIN_SPACINGS {
        return Err(Error::InsufficientData(format!(
            "{} spacings; at least {MIN_SPACINGS} are needed",
            pooled.len()
        )));
    }
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    for s in &mut pooled {
        *s /= mean;
    }
    let width = HISTOGRAM_MAX / HISTOGRAM_BINS as f64;
    let mut counts = vec![0.0; HISTOGRAM_BINS];
    for &s in &pooled {
        let b = (s / width) as usize;
        if b < HISTOGRAM_BINS {
            counts[b] += 1.0;
        }
    }
    let norm = pooled.len() as f64 * width;
    for c in &mut counts {
        *c /= norm;
    }
    let mean_r = if ratios.is_empty() {
        f64::NAN
    } else {
        ratios.iter().sum::<f64>() / ratios.len() as f64
    };
    Ok(SpacingStatistics {
        bins: (0..=HISTOGRAM_BINS).map(|i| i as f64 * width).collect(),
        counts,
        ks_wd: ks_distance(&pooled, wigner_dyson_cdf),
        ks_poisson: ks_distance(&pooled, poisson_cdf),
        n_spacings: pooled.len(),
        spacings: pooled,
        ratios,
        mean_r,
    })
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    schema: &'static str,
    bins: &'a [f64],
    counts: &'a [f64],
    ks_wd: f64,
    ks_poisson: f64,
    mean_r: f64,
    n_spacings: usize,
}

impl SpacingStatistics {
    /// JSON with `bins, counts, ks_wd, ks_poisson, mean_r, n_spacings`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SummaryJson {
            schema: "spacing_statistics",
            bins: &self.bins,
            counts: &self.counts,
            ks_wd: self.ks_wd,
            ks_poisson: self.ks_poisson,
            mean_r: self.mean_r,
            n_spacings: self.n_spacings,
        })?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Flux;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    #[test]
    fn unfolding_unit_spacings_is_identity() {
        let s = vec![1.0; 30];
        let u = unfold(&s, UNFOLD_WINDOW, false);
        assert!(u.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn picket_fence_is_far_from_poisson() {
        let slices: Vec<Vec<f64>> = (0..60).map(|_| (0..10).map(|i| i as f64 * 0.1).collect()).collect();
        let st = unfold_and_spacings(&slices, Some(1.0)).unwrap();
        assert!(st.spacings.iter().all(|s| (s - 1.0).abs() < 1e-9));
        assert!(st.ks_poisson > 0.3);
        assert!((st.mean_r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_levels_prefer_poisson() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let slices: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let mut x = 0.0;
                (0..60)
                    .map(|_| {
                        let v: f64 = Exp1.sample(&mut rng);
                        x += v;
                        x
                    })
                    .collect()
            })
            .collect();
        let st = unfold_and_spacings(&slices, None).unwrap();
        assert!(st.ks_poisson < st.ks_wd);
        // Poisson gap ratio: 2 ln 2 - 1
        assert!((st.mean_r - (2.0 * 2f64.ln() - 1.0)).abs() < 0.03, "{}", st.mean_r);
    }

    #[test]
    fn histogram_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let slices: Vec<Vec<f64>> = (0..20).map(|_| (0..40).map(|_| rng.random::<f64>()).collect()).collect();
        let st = unfold_and_spacings(&slices, Some(1.0)).unwrap();
        let width = HISTOGRAM_MAX / HISTOGRAM_BINS as f64;
        let total: f64 = st.counts.iter().sum::<f64>() * width;
        assert!(total > 0.97 && total <= 1.0 + 1e-12);
        assert!((st.spacings.iter().sum::<f64>() / st.n_spacings as f64 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn too_few_spacings_is_an_error() {
        let slices = vec![vec![0.0, 0.1, 0.3]];
        assert!(matches!(unfold_and_spacings(&slices, None), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn zero_hopping_flow_is_degenerate() {
        let cfg = LatticeConfig::new(Flux::new(1, 10).unwrap(), 0.0, 0.1, 10);
        let flow = spectrum_flow(&cfg, &[0.1, 0.2], 1).unwrap();
        for row in &flow.energies {
            assert_eq!(row.len(), 10);
            assert!(row.iter().all(|e| e.abs() < 1e-9));
        }
    }
}
