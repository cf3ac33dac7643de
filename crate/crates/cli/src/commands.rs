use std::f64::consts::TAU;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::json;

use landau_stark::bands::{critical_field, gap_states, harper_bands, kappa_grid, stark_harper_ladder, strip_spectrum};
use landau_stark::classical::{
    bloch_cycle_analysis, default_sample_dt, initial_point, integrate, sensitivity_probe, ClassicalParams, IntegratorOptions,
    PhaseSpacePoint, WallModel,
};
use landau_stark::dynamics::{
    band_depletion, depletion_contrast_rate, drift_run, edge_bloch_run, first_edge_peak, mean_clusters, supercritical_run,
    DepletionOptions, EdgeRunOptions, PacketSpec, PropagationRun, TransportReport,
};
use landau_stark::io::{fmt_f64, CsvTable};
use landau_stark::landau_stark::{density_csv, diagonalize_strip, floquet_1d_converged, fold_energy, spatial_density};
use landau_stark::manifest::RunManifest;
use landau_stark::statistics::{field_grid, spectrum_flow, unfold_and_spacings};
use landau_stark::{BoundaryX, Flux, LatticeConfig, Result};

use crate::expr::Scope;
use crate::{config_failure, Failure};

pub struct Context {
    pub out: PathBuf,
    pub threads: usize,
}

impl Context {
    fn manifest(&self, name: &str, config: serde_json::Value) -> RunManifest {
        RunManifest::new(name, config, 0)
    }

    fn csv(&self, m: &mut RunManifest, name: &str, t: &CsvTable) -> Result<()> {
        m.write_output(&self.out, name, &t.render()).map(|_| ())
    }

    fn text(&self, m: &mut RunManifest, name: &str, text: &str) -> Result<()> {
        m.write_output(&self.out, name, text).map(|_| ())
    }

    fn finish(&self, m: &RunManifest) -> Result<()> {
        m.write(&self.out)?;
        for o in &m.outputs {
            println!("wrote {}", self.out.join(&o.path).display());
        }
        Ok(())
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialize");
    s.push('\n');
    s
}

fn flux_arg(s: &str) -> std::result::Result<Flux, String> {
    s.parse::<Flux>().map_err(|e| e.to_string())
}

fn bc_arg(s: &str) -> std::result::Result<BoundaryX, String> {
    s.parse::<BoundaryX>().map_err(|e| e.to_string())
}

/// Lattice parameters shared by the quantum subcommands.
#[derive(Args, Debug, Clone)]
pub struct LatticeArgs {
    /// Peierls phase r/q.
    #[arg(long, value_parser = flux_arg, default_value = "1/10")]
    pub alpha: Flux,
    /// Hopping J.
    #[arg(long = "J", default_value_t = 1.0)]
    pub hopping: f64,
    /// Field F; may use J, wc and Fcr, e.g. "0.5Fcr".
    #[arg(long = "F", default_value = "0.02", allow_hyphen_values = true)]
    pub field: String,
    /// Strip width.
    #[arg(long = "Lx", default_value_t = 40)]
    pub width: usize,
    /// Boundary condition across the strip: dirichlet or periodic.
    #[arg(long = "bc-x", value_parser = bc_arg, default_value = "dirichlet")]
    pub bc_x: BoundaryX,
    #[arg(long = "y-min", allow_hyphen_values = true)]
    pub y_min: Option<i64>,
    #[arg(long = "y-max", allow_hyphen_values = true)]
    pub y_max: Option<i64>,
}

fn scales(flux: f64, hopping: f64) -> Scope {
    let wc = TAU * flux * hopping;
    Scope::new()
        .with("J", hopping)
        .with("wc", wc)
        .with("Fcr", wc)
        .with("Tc", TAU / wc)
}

fn eval(scope: &Scope, what: &str, text: &str) -> std::result::Result<f64, Failure> {
    scope.eval(text).map_err(|e| config_failure(format!("--{what}: {e}")))
}

impl LatticeArgs {
    fn config(&self) -> std::result::Result<LatticeConfig, Failure> {
        let field = eval(&scales(self.alpha.value(), self.hopping), "F", &self.field)?;
        let mut c = LatticeConfig::new(self.alpha, self.hopping, field, self.width).with_bc(self.bc_x);
        match (self.y_min, self.y_max) {
            (Some(a), Some(b)) => c = c.with_window(a, b),
            (None, None) => {}
            _ => return Err(config_failure("--y-min and --y-max go together")),
        }
        Ok(c)
    }
}

fn config_json(c: &LatticeConfig) -> serde_json::Value {
    json!({
        "alpha": c.flux.to_string(),
        "J": c.hopping,
        "F": c.field,
        "Lx": c.width,
        "bc_x": c.bc_x.to_string(),
        "y_window": c.y_window,
    })
}

#[derive(Args, Debug)]
pub struct BandsArgs {
    #[arg(long, value_parser = flux_arg, default_value = "1/10")]
    pub alpha: Flux,
    #[arg(long = "J", default_value_t = 1.0)]
    pub hopping: f64,
    /// κ points over [-π, π).
    #[arg(long, default_value_t = 256)]
    pub kappas: usize,
}

pub fn bands(ctx: &Context, a: &BandsArgs) -> std::result::Result<(), Failure> {
    let b = harper_bands(a.alpha, a.hopping, a.kappas)?;
    let mut m = ctx.manifest("bands", json!({"alpha": a.alpha.to_string(), "J": a.hopping, "kappas": a.kappas}));
    ctx.csv(&mut m, "bands.csv", &b.to_csv()?)?;
    let summary = json!({
        "schema": "band_summary",
        "band_count": b.band_count(),
        "band_intervals": b.band_intervals,
        "band_means": b.band_means,
        "critical_field": critical_field(a.alpha, a.hopping).ok(),
    });
    ctx.text(&mut m, "bands.json", &pretty(&summary))?;
    ctx.finish(&m)?;
    println!("{} bands", b.band_count());
    Ok(())
}

#[derive(Args, Debug)]
pub struct StripArgs {
    #[arg(long, value_parser = flux_arg, default_value = "1/10")]
    pub alpha: Flux,
    #[arg(long = "J", default_value_t = 1.0)]
    pub hopping: f64,
    #[arg(long = "Lx", default_value_t = 40)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub kappas: usize,
    #[arg(long = "bc-x", value_parser = bc_arg, default_value = "dirichlet")]
    pub bc_x: BoundaryX,
}

pub fn strip(ctx: &Context, a: &StripArgs) -> std::result::Result<(), Failure> {
    let s = strip_spectrum(a.alpha, a.hopping, a.width, a.kappas, a.bc_x)?;
    let bulk = harper_bands(a.alpha, a.hopping, 16)?;
    let gaps = gap_states(&s, &bulk);
    let mut m = ctx.manifest(
        "strip",
        json!({"alpha": a.alpha.to_string(), "J": a.hopping, "Lx": a.width, "kappas": a.kappas, "bc_x": a.bc_x.to_string()}),
    );
    ctx.csv(&mut m, "strip.csv", &s.to_csv()?)?;
    let mut t = CsvTable::new("gap_states", &["kappa", "state_index", "energy", "gap", "label"]);
    for g in &gaps {
        use landau_stark::io::Cell;
        t.push(&[
            Cell::F(s.kappa_grid[g.kappa_index]),
            Cell::U(g.state_index),
            Cell::F(g.energy),
            Cell::U(g.gap),
            Cell::S(g.label.as_str()),
        ])?;
    }
    ctx.csv(&mut m, "gap_states.csv", &t)?;
    ctx.finish(&m)?;
    println!("{} gap states, {} labelled edge", gaps.len(), gaps.iter().filter(|g| g.label.is_edge()).count());
    Ok(())
}

#[derive(Args, Debug)]
pub struct LadderArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub kappa: f64,
}

pub fn ladder(ctx: &Context, a: &LadderArgs) -> std::result::Result<(), Failure> {
    let c = a.lattice.config()?;
    let window = c.window()?;
    let l = stark_harper_ladder(c.flux, c.hopping, c.field, a.kappa, window)?;
    let mut cj = config_json(&c);
    cj["kappa"] = json!(a.kappa);
    let mut m = ctx.manifest("ladder", cj);
    ctx.csv(&mut m, "ladder.csv", &l.to_csv()?)?;
    ctx.finish(&m)?;
    println!(
        "{} ladder states, {} transporting",
        l.energies.len(),
        l.transporting.iter().filter(|t| **t).count()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct LssArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Also write the full states as NDJSON.
    #[arg(long)]
    pub states: bool,
}

pub fn lss(ctx: &Context, a: &LssArgs) -> std::result::Result<(), Failure> {
    use landau_stark::io::Cell;
    let c = a.lattice.config()?;
    let states = diagonalize_strip(&c)?;
    let mut m = ctx.manifest("lss", config_json(&c));
    let mut t = CsvTable::new("landau_stark_states", &["nu", "n", "energy", "energy_over_F"]);
    for s in &states {
        t.push(&[
            Cell::U(s.transverse_index),
            Cell::I(s.ladder_index),
            Cell::F(s.energy),
            Cell::F(fold_energy(s.energy, c.field) / c.field),
        ])?;
    }
    ctx.csv(&mut m, "lss.csv", &t)?;
    let rho = spatial_density(&states)?;
    ctx.csv(&mut m, "density.csv", &density_csv(states[0].psi.grid(), &rho)?)?;
    if a.states {
        let recs: Vec<_> = states.iter().map(|s| s.record()).collect();
        ctx.text(&mut m, "lss_states.ndjson", &landau_stark::io::to_ndjson(&recs)?)?;
    }
    ctx.finish(&m)?;
    println!("{} states in the fundamental interval", states.len());
    Ok(())
}

#[derive(Args, Debug)]
pub struct FloquetArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// κ points at which the spectrum is computed.
    #[arg(long, default_value_t = 8)]
    pub kappas: usize,
    /// Initial Magnus step count (doubled until converged).
    #[arg(long, default_value_t = 256)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
}

pub fn floquet(ctx: &Context, a: &FloquetArgs) -> std::result::Result<(), Failure> {
    use landau_stark::io::Cell;
    let c = a.lattice.config()?;
    let grid = kappa_grid(a.kappas.max(1));
    let mut t = CsvTable::new("floquet_spectrum", &["kappa", "nu", "eigenphase", "energy"]);
    let mut per_nu: Vec<Vec<f64>> = vec![Vec::new(); c.width];
    let mut steps_used = 0;
    for &k in &grid {
        let (s, n) = floquet_1d_converged(k, &c, a.steps, a.tolerance)?;
        steps_used = steps_used.max(n);
        for (nu, (p, e)) in s.eigenphases.iter().zip(s.sorted_energies()).enumerate() {
            t.push(&[Cell::F(k), Cell::U(nu), Cell::F(*p), Cell::F(e)])?;
            per_nu[nu].push(e);
        }
    }
    let spread = per_nu
        .iter()
        .map(|v| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        })
        .fold(0.0, f64::max);
    let mut cj = config_json(&c);
    cj["kappas"] = json!(a.kappas);
    cj["tolerance"] = json!(a.tolerance);
    let mut m = ctx.manifest("floquet", cj);
    ctx.csv(&mut m, "floquet.csv", &t)?;
    let summary = json!({"schema": "floquet_summary", "max_energy_spread": spread, "steps": steps_used});
    ctx.text(&mut m, "floquet.json", &pretty(&summary))?;
    ctx.finish(&m)?;
    println!("largest spread over kappa {}", fmt_f64(spread));
    Ok(())
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvolveMode {
    /// Transporting packet, periodic strip.
    Drift,
    /// Gaussian packet above the critical field, periodic strip.
    Supercritical,
    /// Transporting packet hitting the walls of a Dirichlet strip.
    Edge,
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[arg(long, value_enum, default_value_t = EvolveMode::Drift)]
    pub mode: EvolveMode,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    /// Packet row; edge runs default to 85.
    #[arg(long, allow_hyphen_values = true)]
    pub y0: Option<f64>,
    #[arg(long = "packet-width", default_value_t = 5.0)]
    pub packet_width: f64,
    /// Run length in Bloch periods (drift) or as an expression using TB and
    /// Tc (supercritical).
    #[arg(long, default_value = "10")]
    pub tfinal: String,
    /// Checkpoints per Bloch period (drift), or in total (supercritical).
    #[arg(long, default_value_t = 4)]
    pub samples: usize,
    /// Comma-separated checkpoint times in Bloch periods (edge runs).
    #[arg(long)]
    pub checkpoints: Option<String>,
    /// Also write the wave function at every checkpoint.
    #[arg(long)]
    pub snapshots: bool,
}

fn transport_json(r: &TransportReport) -> serde_json::Value {
    json!({
        "velocity": r.velocity,
        "velocity_r2": r.velocity_r2,
        "drift_velocity": r.drift_velocity,
        "width_rate": r.width_rate,
        "width_r2": r.width_r2,
        "width_ratio": r.width_ratio,
        "skewness": r.skewness,
    })
}

pub fn evolve(ctx: &Context, a: &EvolveArgs) -> std::result::Result<(), Failure> {
    let c = a.lattice.config()?;
    let tb = TAU / c.field;
    let scope = scales(c.flux.value(), c.hopping).with("TB", tb);
    let mut cj = config_json(&c);
    cj["mode"] = json!(format!("{:?}", a.mode).to_lowercase());
    cj["x0"] = json!(a.x0);
    cj["packet_width"] = json!(a.packet_width);
    let (run, summary): (PropagationRun, serde_json::Value) = match a.mode {
        EvolveMode::Drift | EvolveMode::Supercritical => {
            if c.bc_x != BoundaryX::Periodic {
                return Err(config_failure("drift and supercritical runs need --bc-x periodic"));
            }
            let spec = PacketSpec {
                center_x: a.x0,
                center_y: a.y0.unwrap_or(0.0),
                width: a.packet_width,
            };
            let (run, rep) = if a.mode == EvolveMode::Drift {
                let periods = eval(&scope, "tfinal", &a.tfinal)?;
                cj["periods"] = json!(periods);
                cj["per_period"] = json!(a.samples);
                drift_run(&c, spec, periods, a.samples)?
            } else {
                let t = eval(&scope, "tfinal", &a.tfinal)?;
                cj["tfinal"] = json!(t);
                cj["samples"] = json!(a.samples);
                supercritical_run(&c, spec, t, a.samples.max(2))?
            };
            (run, transport_json(&rep))
        }
        EvolveMode::Edge => {
            let mut opts = EdgeRunOptions::default();
            opts.packet.center_x = a.x0;
            if let Some(y) = a.y0 {
                opts.packet.center_y = y;
            }
            opts.packet.width = a.packet_width;
            opts.keep_snapshots = a.snapshots;
            if let Some(cp) = &a.checkpoints {
                opts.checkpoints_tb = cp
                    .split(',')
                    .map(|s| eval(&scope, "checkpoints", s.trim()))
                    .collect::<std::result::Result<_, _>>()?;
            }
            cj["checkpoints_tb"] = json!(opts.checkpoints_tb);
            let run = edge_bloch_run(&c, &opts)?;
            let clusters: Vec<f64> = run.observables.iter().map(mean_clusters).collect();
            let summary = json!({
                "first_edge_peak": first_edge_peak(&run, 0.1),
                "mean_clusters": clusters,
            });
            (run, summary)
        }
    };
    let bands = if run.observables.iter().any(|o| !o.band_populations.is_empty()) {
        run.observables[0].band_populations.len()
    } else {
        0
    };
    let mut m = ctx.manifest("evolve", cj);
    ctx.csv(&mut m, "run.csv", &run.to_csv(bands)?)?;
    let mut summary = summary;
    summary["schema"] = json!("evolve_summary");
    ctx.text(&mut m, "evolve.json", &pretty(&summary))?;
    if a.snapshots && !run.snapshots.is_empty() {
        ctx.text(&mut m, "snapshots.ndjson", &run.snapshots_ndjson()?)?;
    }
    ctx.finish(&m)?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct DepletionArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[arg(long, default_value_t = 20)]
    pub ensemble: usize,
    /// Run length in Bloch periods.
    #[arg(long, default_value_t = 4.0)]
    pub periods: f64,
    #[arg(long = "per-period", default_value_t = 8)]
    pub per_period: usize,
    #[arg(long, default_value_t = 85, allow_hyphen_values = true)]
    pub y0: i64,
    /// Also run the periodic-strip contrast.
    #[arg(long)]
    pub contrast: bool,
}

pub fn depletion(ctx: &Context, a: &DepletionArgs) -> std::result::Result<(), Failure> {
    let c = a.lattice.config()?;
    let opts = DepletionOptions {
        ensemble: a.ensemble,
        periods: a.periods,
        per_period: a.per_period,
        center_y: a.y0,
        threads: ctx.threads,
        ..Default::default()
    };
    let curve = band_depletion(&c, &opts)?;
    let contrast = if a.contrast { Some(depletion_contrast_rate(&c, &opts)?) } else { None };
    let mut cj = config_json(&c);
    cj["ensemble"] = json!(a.ensemble);
    cj["periods"] = json!(a.periods);
    cj["per_period"] = json!(a.per_period);
    cj["y0"] = json!(a.y0);
    let mut m = ctx.manifest("depletion", cj);
    ctx.csv(&mut m, "depletion.csv", &curve.to_csv(c.field)?)?;
    let expected = c.field / (TAU * c.flux.value()) / c.width as f64;
    let summary = json!({
        "schema": "depletion_summary",
        "rate": curve.rate,
        "r2": curve.r2,
        "fit_points": curve.fit_points,
        "expected_rate": expected,
        "periodic_rate": contrast,
    });
    ctx.text(&mut m, "depletion.json", &pretty(&summary))?;
    ctx.finish(&m)?;
    println!("{} (v*/Lx = {})", curve.summary(), fmt_f64(expected));
    Ok(())
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Walls {
    Hard,
    Smooth,
    None,
}

/// Parameters of the classical model.
#[derive(Args, Debug, Clone)]
pub struct ClassicalModelArgs {
    /// Peierls phase; r/q or a decimal.
    #[arg(long, default_value = "1/10")]
    pub alpha: String,
    #[arg(long = "J", default_value_t = 1.0)]
    pub hopping: f64,
    #[arg(long = "F", default_value = "0.02", allow_hyphen_values = true)]
    pub field: String,
    #[arg(long = "Lx", default_value_t = 40.0)]
    pub width: f64,
    /// Initial kinetic energy; may use J and wc.
    #[arg(long = "EK", default_value = "-2J+wc/2", allow_hyphen_values = true)]
    pub kinetic: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub y0: f64,
    /// Duration; may use Tc, TB and J.
    #[arg(long, default_value = "400Tc")]
    pub tfinal: String,
    /// Sampling interval (default Tc/50).
    #[arg(long = "sample-dt")]
    pub sample_dt: Option<String>,
    #[arg(long, value_enum, default_value_t = Walls::Hard)]
    pub walls: Walls,
    /// V0 of the smooth wall.
    #[arg(long = "wall-strength", default_value_t = 100.0)]
    pub wall_strength: f64,
}

fn real_ratio(s: &str) -> std::result::Result<f64, Failure> {
    let bad = || config_failure(format!("--alpha: cannot read {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse::<f64>().map_err(|_| bad())?, b.trim().parse::<f64>().map_err(|_| bad())?);
            if b == 0.0 {
                return Err(bad());
            }
            Ok(a / b)
        }
        None => s.trim().parse::<f64>().map_err(|_| bad()),
    }
}

impl ClassicalModelArgs {
    fn resolve(&self) -> std::result::Result<(ClassicalParams, PhaseSpacePoint, f64, f64, serde_json::Value), Failure> {
        let alpha = real_ratio(&self.alpha)?;
        let base = scales(alpha, self.hopping);
        let field = eval(&base, "F", &self.field)?;
        let scope = base.with("F", field).with("TB", TAU / field);
        let kinetic = eval(&scope, "EK", &self.kinetic)?;
        let walls = match self.walls {
            Walls::Hard => WallModel::Hard,
            Walls::Smooth => WallModel::Smooth { strength: self.wall_strength },
            Walls::None => WallModel::None,
        };
        let p = ClassicalParams::new(alpha, self.hopping, field, self.width).with_walls(walls);
        let start = initial_point(&p, self.x0, self.y0, kinetic)?;
        let tfinal = eval(&scope, "tfinal", &self.tfinal)?;
        let dt = match &self.sample_dt {
            Some(s) => eval(&scope, "sample-dt", s)?,
            None => default_sample_dt(&p),
        };
        let cj = json!({
            "alpha": alpha,
            "J": self.hopping,
            "F": field,
            "Lx": self.width,
            "EK": kinetic,
            "x0": self.x0,
            "y0": self.y0,
            "tfinal": tfinal,
            "sample_dt": dt,
            "walls": format!("{:?}", self.walls).to_lowercase(),
            "wall_strength": self.wall_strength,
        });
        Ok((p, start, tfinal, dt, cj))
    }
}

#[derive(Args, Debug)]
pub struct ClassicalArgs {
    #[command(flatten)]
    pub model: ClassicalModelArgs,
}

pub fn classical(ctx: &Context, a: &ClassicalArgs) -> std::result::Result<(), Failure> {
    let (p, start, tfinal, dt, cj) = a.model.resolve()?;
    let tr = integrate(start, &p, tfinal, dt, &IntegratorOptions::default())?;
    let report = bloch_cycle_analysis(&tr).ok();
    let mut m = ctx.manifest("classical", cj);
    ctx.csv(&mut m, "trajectory.csv", &tr.to_csv(report.as_ref().map(|r| r.labels.as_slice()))?)?;
    let summary = match &report {
        Some(r) => json!({
            "schema": "cycle_report",
            "edge_intervals": r.edge_intervals.iter().map(|i| json!({
                "side": i.side, "start": i.start, "end": i.end, "contacts": i.contacts,
                "kinetic_start": i.kinetic_start, "kinetic_end": i.kinetic_end, "kinetic_slope": i.kinetic_slope,
            })).collect::<Vec<_>>(),
            "crossings": r.crossings.iter().map(|c| json!({
                "from": c.from_side, "to": c.to_side, "start": c.start, "end": c.end,
                "kind": format!("{:?}", c.kind(p.drift_velocity())).to_lowercase(),
            })).collect::<Vec<_>>(),
            "detachments": r.detachments,
            "mean_drift_crossing": r.mean_crossing,
            "expected_crossing": r.expected_crossing,
            "edge_fraction": r.edge_fraction,
            "energy_drift": tr.energy_drift,
        }),
        None => json!({
            "schema": "cycle_report",
            "edge_intervals": [],
            "contacts": tr.contacts.len(),
            "energy_drift": tr.energy_drift,
        }),
    };
    ctx.text(&mut m, "cycle.json", &pretty(&summary))?;
    ctx.finish(&m)?;
    if let Some(r) = report {
        println!(
            "{} edge intervals, mean drift crossing {} (Lx/v* = {})",
            r.edge_intervals.len(),
            fmt_f64(r.mean_crossing),
            fmt_f64(r.expected_crossing)
        );
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub model: ClassicalModelArgs,
    /// Displacement of the twin in y.
    #[arg(long, default_value_t = 1e-8)]
    pub delta: f64,
}

pub fn sensitivity(ctx: &Context, a: &SensitivityArgs) -> std::result::Result<(), Failure> {
    let (p, start, tfinal, dt, mut cj) = a.model.resolve()?;
    cj["delta"] = json!(a.delta);
    let d = sensitivity_probe(start, a.delta, &p, tfinal, dt)?;
    let mut m = ctx.manifest("sensitivity", cj);
    ctx.csv(&mut m, "divergence.csv", &d.to_csv()?)?;
    let summary = json!({
        "schema": "divergence_summary",
        "rate": d.rate,
        "r2": d.r2,
        "fit_points": d.fit_points,
        "fit_span": d.fit_span,
        "exponential": d.is_exponential(),
    });
    ctx.text(&mut m, "sensitivity.json", &pretty(&summary))?;
    ctx.finish(&m)?;
    println!("rate {} r2 {} exponential {}", fmt_f64(d.rate), fmt_f64(d.r2), d.is_exponential());
    Ok(())
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[arg(long, value_parser = flux_arg, default_value = "1/10")]
    pub alpha: Flux,
    #[arg(long = "J", default_value_t = 1.0)]
    pub hopping: f64,
    #[arg(long = "Lx", default_value_t = 10)]
    pub width: usize,
    #[arg(long = "bc-x", value_parser = bc_arg, default_value = "dirichlet")]
    pub bc_x: BoundaryX,
    /// Lowest field in units of F_cr.
    #[arg(long = "F-min", default_value_t = 0.1)]
    pub f_min: f64,
    /// Highest field in units of F_cr.
    #[arg(long = "F-max", default_value_t = 0.6)]
    pub f_max: f64,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
}

pub fn levelflow(ctx: &Context, a: &FlowArgs, statistics: bool) -> std::result::Result<(), Failure> {
    let base = LatticeConfig::new(a.alpha, a.hopping, 1.0, a.width).with_bc(a.bc_x);
    let fields = field_grid(&base, a.f_min, a.f_max, a.count)?;
    let flow = spectrum_flow(&base, &fields, ctx.threads)?;
    let name = if statistics { "spacings" } else { "levelflow" };
    let mut m = ctx.manifest(
        name,
        json!({"alpha": a.alpha.to_string(), "J": a.hopping, "Lx": a.width, "bc_x": a.bc_x.to_string(),
               "F_min_over_Fcr": a.f_min, "F_max_over_Fcr": a.f_max, "count": a.count}),
    );
    ctx.csv(&mut m, "levelflow.csv", &flow.to_csv()?)?;
    if statistics {
        let (slices, period) = flow.statistics_slices();
        let st = unfold_and_spacings(&slices, period)?;
        ctx.text(&mut m, "spacings.json", &st.to_json()?)?;
        println!(
            "{} spacings, KS to Wigner-Dyson {}, to Poisson {}, mean gap ratio {}",
            st.n_spacings,
            fmt_f64(st.ks_wd),
            fmt_f64(st.ks_poisson),
            fmt_f64(st.mean_r)
        );
    }
    ctx.finish(&m)?;
    Ok(())
}
