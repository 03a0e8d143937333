//! Experiment orchestration. Each experiment reads the shared context, writes
//! its own CSV files and returns a JSON summary for the manifest.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use polaron_core::dressing::DressingMap;
use polaron_core::dynamics::{
    dressed_flow_conjugated, dressed_flow_direct, dressed_flow_reverse_order, growth_constant, integrate,
    lipschitz_constant, local_existence_time, picard_solve, undressed_flow, Drive, FlowConfig, Frame, System,
};
use polaron_core::energy::{dressed_minimizer, energy_dressed, energy_undressed, undressed_minimizer};
use polaron_core::exec;
use polaron_core::formfactor::{closed_form_scalars, FormFactorSet, ModelParams};
use polaron_core::phasespace::{field_norm_sq, h_norm, sup_distance, weighted_norm, GridSpec, KGrid, PhasePoint, WeightSpec};
use polaron_core::quantumdesk::{
    dressing_identity_residual, semiclassical_check, LatticeSpec, QuantumLattice, SemiclassicalConfig,
};
use polaron_core::sampling::{random_direction, random_state, smooth_field, StateScale};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::artifacts::{num, ArtifactDir, Constants, Manifest, Table};
use crate::config::{Experiment, FieldInit, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("numerical failure: {message} (partial artifacts in {})", dir.display())]
    Numerical { message: String, dir: PathBuf },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical { .. } => 3,
            RunError::Io(_) => 1,
        }
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

type Step = Result<Value, String>;

/// A generator on its own stream of the run seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const INITIAL_STREAM: u64 = 0;
const DRESS_STREAM: u64 = 1;
const SCAN_STREAM: u64 = 1 << 32;

struct Ctx<'a> {
    cfg: &'a RunConfig,
    ff: FormFactorSet,
    u0: PhasePoint,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn initial_state(cfg: &RunConfig, ff: &FormFactorSet) -> PhasePoint {
    let d = cfg.model.dim;
    let q = cfg.initial.q.clone().unwrap_or_else(|| vec![0.0; d]);
    let p = cfg.initial.p.clone().unwrap_or_else(|| {
        let mut p = vec![0.0; d];
        p[0] = 1.0;
        p
    });
    let mut rng = stream_rng(cfg.seed, INITIAL_STREAM);
    let grid = ff.grid();
    let amp = cfg.initial.amplitude;
    let alpha = match cfg.initial.field {
        FieldInit::Zero => vec![Complex64::new(0.0, 0.0); grid.len()],
        FieldInit::Smooth => smooth_field(&mut rng, grid, amp),
        FieldInit::Random => {
            let scale = StateScale {
                position: 0.0,
                momentum: 0.0,
                field: amp,
            };
            random_state(&mut rng, grid, scale).alpha
        }
        FieldInit::Minimizer => undressed_minimizer(ff, &q).alpha,
    };
    PhasePoint { q, p, alpha }
}

/// The classical form factors, always at ħ = 0.
pub fn classical_form_factors(cfg: &RunConfig) -> polaron_core::Result<FormFactorSet> {
    FormFactorSet::new(KGrid::new(&cfg.grid_spec())?, 0.0)
}

/// Provenance constants. Quantities that cannot be formed (e.g. from a
/// non-finite initial state) are recorded as NaN, which serializes to null.
fn constants(ctx: &Ctx) -> Constants {
    let ff = &ctx.ff;
    let drive = Drive::undressed(ff);
    let lipschitz = lipschitz_constant(ff, &drive);
    let radius = ctx
        .cfg
        .picard
        .radius
        .unwrap_or_else(|| h_norm(&ctx.u0, ff.grid()).unwrap_or(f64::NAN));
    let exact = closed_form_scalars(&ctx.cfg.model).ok();
    Constants {
        lipschitz,
        existence_time: local_existence_time(lipschitz, radius).unwrap_or(f64::NAN),
        radius,
        growth_constant: growth_constant(ff, &drive),
        grid_nodes: ff.grid().len(),
        grid_tolerance: ff.grid().tolerance(),
        grid_volume_error: ff.grid().volume_error(),
        f_norm_sq_grid: ff.norm_sq(ff.f()),
        f_norm_sq_exact: exact.map_or(f64::NAN, |e| e.f_norm_sq),
        c_hbar: exact.map_or(f64::NAN, |e| e.c_hbar),
    }
}

/// Run every configured experiment. An empty list touches nothing.
pub fn run(cfg: &RunConfig) -> Result<Option<RunSummary>, RunError> {
    if cfg.experiments.is_empty() {
        log::info!("no experiments configured");
        return Ok(None);
    }
    let dir = cfg.output.clone();
    let numerical = |message: String| RunError::Numerical {
        message,
        dir: dir.clone(),
    };
    let ff = classical_form_factors(cfg).map_err(|e| numerical(e.to_string()))?;
    let u0 = initial_state(cfg, &ff);
    let ctx = Ctx { cfg, ff, u0 };
    let mut out = ArtifactDir::create(&dir)?;
    let consts = constants(&ctx);
    log::info!(
        "C = {:.6e}, R = {:.6e}, T(R) = {:.6e}",
        consts.lipschitz,
        consts.radius,
        consts.existence_time
    );

    let mut summaries = serde_json::Map::new();
    let mut failure = None;
    for &exp in &cfg.experiments {
        log::info!("running {exp}");
        let step = match exp {
            Experiment::Simulate => simulate(&ctx, &mut out),
            Experiment::Dress => dress(&ctx, &mut out),
            Experiment::ConjugationTest => conjugation(&ctx, &mut out),
            Experiment::EnergyScan => energy_scan(&ctx, &mut out),
            Experiment::PicardVerify => picard(&ctx, &mut out),
            Experiment::QuantumCheck => quantum(&ctx, &mut out),
            Experiment::RegularityCheck => regularity(&ctx, &mut out),
        };
        match step {
            Ok(v) => {
                summaries.insert(exp.to_string(), v);
            }
            Err(msg) => {
                log::error!("{exp}: {msg}");
                failure = Some(format!("{exp}: {msg}"));
                break;
            }
        }
    }

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        core_version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        status: if failure.is_some() { "failed" } else { "ok" },
        failure: failure.clone(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        constants: consts,
        artifacts: out.written().to_vec(),
        summaries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), text + "\n")?;
    match failure {
        Some(message) => Err(numerical(message)),
        None => Ok(Some(RunSummary { dir, manifest })),
    }
}

fn io(e: std::io::Error) -> String {
    format!("write failed: {e}")
}

fn simulate(ctx: &Ctx, out: &mut ArtifactDir) -> Step {
    let ff = &ctx.ff;
    let grid = ff.grid();
    let fc = ctx.cfg.flow_config();
    let coupling = fc.system.drive(ff).map_or(1.0, |d| d.coupling);
    let tr = integrate(&fc, ff, &ctx.u0).map_err(err)?;
    let d = ctx.cfg.model.dim;

    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|j| format!("q_{j}")));
    header.extend((1..=d).map(|j| format!("p_{j}")));
    header.extend(["E", "E_hat", "alpha_norm", "alpha_h1"].map(String::from));
    let mut traj = Table::new(header);
    let h1 = WeightSpec::new(1.0).map_err(err)?;
    for i in 0..tr.times.len() {
        let u = tr.lab_state(i, coupling);
        let mut row = vec![tr.times[i]];
        row.extend(&u.q);
        row.extend(&u.p);
        row.push(energy_undressed(&u, ff).map_err(err)?.value);
        row.push(energy_dressed(&u, ff).map_err(err)?.value);
        row.push(field_norm_sq(&u.alpha, grid).sqrt());
        row.push(weighted_norm(&u.alpha, grid, h1).map_err(err)?);
        traj.push_nums(&row);
    }
    out.write_table("trajectory.csv", &traj).map_err(io)?;

    let e0 = tr.energies[0].value;
    let scale = e0.abs().max(1e-12);
    let mut drift = Table::new(["t", "energy", "drift"]);
    for (t, e) in tr.times.iter().zip(&tr.energies) {
        drift.push_nums(&[*t, e.value, (e.value - e0) / scale]);
    }
    out.write_table("energy_drift.csv", &drift).map_err(io)?;

    if let Some(f) = tr.failure {
        return Err(f.to_string());
    }
    if let Some(i) = tr.energies.iter().position(|e| !e.value.is_finite()) {
        return Err(format!("energy is not finite at t = {}", tr.times[i]));
    }
    Ok(json!({
        "system": fc.system.name(),
        "samples": tr.times.len(),
        "relative_drift": tr.relative_drift(1e-12),
    }))
}

fn dress(ctx: &Ctx, out: &mut ArtifactDir) -> Step {
    let ff = &ctx.ff;
    let grid = ff.grid();
    let mut rng = stream_rng(ctx.cfg.seed, DRESS_STREAM);
    let triples: Vec<[PhasePoint; 3]> = (0..ctx.cfg.dress.triples)
        .map(|_| std::array::from_fn(|_| random_state(&mut rng, grid, StateScale::default())))
        .collect();
    let mut table = Table::new([
        "theta",
        "E",
        "E_hat",
        "h_norm",
        "inverse_residual",
        "group_residual",
        "symplectic_residual",
    ]);
    let mut worst: f64 = 0.0;
    for &theta in &ctx.cfg.dress.thetas {
        let map = DressingMap::new(theta, ff);
        let moved = map.apply(&ctx.u0).map_err(err)?;
        let back = map.inverse().apply(&moved).map_err(err)?;
        let twice = map.apply(&moved).map_err(err)?;
        let direct = DressingMap::new(2.0 * theta, ff).apply(&ctx.u0).map_err(err)?;
        let symp = exec::map(ctx.cfg.exec, &triples, |[a, b, c]| map.check_symplectic(a, b, c))
            .into_iter()
            .try_fold(0.0f64, |m, r| r.map(|x| m.max(x)))
            .map_err(err)?;
        let inv = sup_distance(&back, &ctx.u0);
        let group = sup_distance(&twice, &direct);
        worst = worst.max(inv).max(group).max(symp);
        table.push_nums(&[
            theta,
            energy_undressed(&moved, ff).map_err(err)?.value,
            energy_dressed(&moved, ff).map_err(err)?.value,
            h_norm(&moved, grid).map_err(err)?,
            inv,
            group,
            symp,
        ]);
    }
    out.write_table("dressing.csv", &table).map_err(io)?;
    Ok(json!({ "max_residual": worst }))
}

pub const COMPOSITIONS: [&str; 2] = ["D(-1)*Phi*D(1)", "D(1)*Phi*D(-1)"];

fn conjugation(ctx: &Ctx, out: &mut ArtifactDir) -> Step {
    let ff = &ctx.ff;
    let c = &ctx.cfg.conjugation;
    let rows = exec::map(ctx.cfg.exec, &c.dts, |&dt| -> polaron_core::Result<[f64; 2]> {
        let direct = dressed_flow_direct(ff, &ctx.u0, c.horizon, dt)?;
        let a = dressed_flow_conjugated(ff, &ctx.u0, c.horizon, dt)?;
        let b = dressed_flow_reverse_order(ff, &ctx.u0, c.horizon, dt)?;
        Ok([
            h_norm(&a.sub(&direct), ff.grid())?,
            h_norm(&b.sub(&direct), ff.grid())?,
        ])
    });
    let mut table = Table::new(["dt", "composition", "distance"]);
    let mut dist = Vec::new();
    for (&dt, r) in c.dts.iter().zip(rows) {
        let r = r.map_err(err)?;
        for (name, d) in COMPOSITIONS.iter().zip(r) {
            table.push(vec![num(dt), name.to_string(), num(d)]);
        }
        dist.push(r);
    }
    out.write_table("conjugation.csv", &table).map_err(io)?;
    let orders: Vec<f64> = c
        .dts
        .windows(2)
        .zip(dist.windows(2))
        .map(|(h, e)| (e[0][0] / e[1][0]).ln() / (h[0] / h[1]).ln())
        .collect();
    Ok(json!({
        "distance": dist.iter().map(|r| r[0]).collect::<Vec<_>>(),
        "reverse_distance": dist.iter().map(|r| r[1]).collect::<Vec<_>>(),
        "observed_order": orders,
    }))
}

/// Grid for a scan cutoff. In one dimension the spacing of the configured grid
/// is kept; in higher dimensions the resolution per axis is kept.
pub fn scan_grid(cfg: &RunConfig, cutoff: f64) -> GridSpec {
    let base = cfg.grid.resolution;
    let res = if cfg.model.dim == 1 {
        let r = (base as f64 * cutoff / cfg.model.cutoff).round() as usize;
        (r + r % 2).max(2)
    } else {
        base
    };
    GridSpec::new(cfg.model.dim, cutoff, cfg.model.threshold, res).with_tolerance(cfg.grid.tolerance)
}

const SCAN_CHUNK: usize = 250;

fn energy_scan(ctx: &Ctx, out: &mut ArtifactDir) -> Step {
    let cfg = ctx.cfg;
    let n = cfg.energy_scan.samples;
    let mut table = Table::new([
        "cutoff",
        "resolution",
        "f_norm_sq_grid",
        "f_norm_sq_exact",
        "undressed_infimum",
        "minimizer_energy",
        "infrared_bound",
        "dressed_sampled_min",
        "violations",
    ]);
    let mut violations_total = 0usize;
    for (ci, &cutoff) in cfg.energy_scan.cutoffs.iter().enumerate() {
        let spec = scan_grid(cfg, cutoff);
        let ff = KGrid::new(&spec).and_then(|g| FormFactorSet::new(g, 0.0)).map_err(err)?;
        let grid = ff.grid();
        let f2 = ff.norm_sq(ff.f());
        let bound = -0.5 * ff.norm_sq(ff.f_ir());
        let exact = closed_form_scalars(&ModelParams::new(cfg.model.dim, cutoff, cfg.model.threshold))
            .map_err(err)?
            .f_norm_sq;
        let q0 = vec![0.0; cfg.model.dim];
        let min_e = energy_undressed(&undressed_minimizer(&ff, &q0), &ff).map_err(err)?.value;

        let chunks = n.div_ceil(SCAN_CHUNK);
        let parts = exec::map_range(cfg.exec, chunks, |c| -> polaron_core::Result<(f64, usize)> {
            let mut rng = stream_rng(cfg.seed, SCAN_STREAM + ((ci as u64) << 20) + c as u64);
            let mut lo = f64::INFINITY;
            let mut bad = 0;
            for j in c * SCAN_CHUNK..((c + 1) * SCAN_CHUNK).min(n) {
                // half generic states, half perturbations of the dressed minimizer
                let u = if j % 2 == 0 {
                    random_state(&mut rng, grid, StateScale::default())
                } else {
                    let q = random_state(&mut rng, grid, StateScale::default()).q;
                    let mut u = dressed_minimizer(&ff, &q);
                    u.axpy(0.05, &random_direction(&mut rng, grid));
                    u
                };
                let e = energy_dressed(&u, &ff)?.value;
                lo = lo.min(e);
                if e < bound - 1e-8 {
                    bad += 1;
                }
            }
            Ok((lo, bad))
        });
        let mut lo = f64::INFINITY;
        let mut bad = 0;
        for p in parts {
            let (l, b) = p.map_err(err)?;
            lo = lo.min(l);
            bad += b;
        }
        violations_total += bad;
        table.push(vec![
            num(cutoff),
            spec.resolution.to_string(),
            num(f2),
            num(exact),
            num(-0.5 * f2),
            num(min_e),
            num(bound),
            num(lo),
            bad.to_string(),
        ]);
    }
    out.write_table("energy_scan.csv", &table).map_err(io)?;
    Ok(json!({ "samples_per_cutoff": n, "violations": violations_total }))
}

fn picard(ctx: &Ctx, out: &mut ArtifactDir) -> Step {
    let ff = &ctx.ff;
    let drive = Drive::undressed(ff);
    let norm = h_norm(&ctx.u0, ff.grid()).map_err(err)?;
    let radius = ctx.cfg.picard.radius.unwrap_or(norm).max(norm);
    let c = lipschitz_constant(ff, &drive);
    let horizon = local_existence_time(c, radius).map_err(err)?;
    let steps = ctx.cfg.picard.steps.unwrap_or(200);
    let rep = picard_solve(ff, &drive, &ctx.u0, horizon, steps).map_err(err)?;
    let reference = undressed_flow(ff, &ctx.u0, horizon, horizon / 2000.0).map_err(err)?;
    let gap = h_norm(&rep.states.last().expect("mesh").sub(&reference), ff.grid()).map_err(err)?;

    let mut table = Table::new(["iteration", "distance", "ratio"]);
    for (i, &d) in rep.distances.iter().enumerate() {
        let ratio = match i {
            0 => String::new(),
            _ if rep.distances[i - 1] > 0.0 => num(d / rep.distances[i - 1]),
            _ => String::new(),
        };
        table.push(vec![(i + 1).to_string(), num(d), ratio]);
    }
    out.write_table("picard.csv", &table).map_err(io)?;
    Ok(json!({
        "lipschitz": c,
        "radius": radius,
        "existence_time": horizon,
        "iterations": rep.distances.len(),
        "max_ratio": rep.max_ratio,
        "converged": rep.converged,
        "endpoint_gap": gap,
    }))
}

/// The classical single-mode grid: each configured momentum must be a node.
pub fn mode_grid(cfg: &RunConfig, ff: &FormFactorSet) -> Result<KGrid, String> {
    let grid = ff.grid();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for &k in &cfg.quantum.modes {
        let i = (0..grid.len())
            .find(|&i| (grid.node(i)[0] - k).abs() <= 1e-12)
            .ok_or_else(|| format!("mode k = {k} is not a node of the classical grid"))?;
        nodes.push(vec![k]);
        weights.push(grid.weights()[i]);
    }
    KGrid::from_nodes(1, grid.cutoff(), grid.threshold(), &nodes, &weights).map_err(err)
}

fn quantum(ctx: &Ctx, out: &mut ArtifactDir) -> Step {
    let q = &ctx.cfg.quantum;
    let modes = mode_grid(ctx.cfg, &ctx.ff)?;
    let u0 = PhasePoint {
        q: vec![q.q0],
        p: vec![q.p0],
        alpha: q.alpha0.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
    };
    let sc = SemiclassicalConfig {
        hbars: q.hbars.clone(),
        horizon: q.horizon,
        box_periods: q.box_periods,
        fock_cap: q.fock_cap,
        max_dim: q.max_dim,
        exec: ctx.cfg.exec,
        ..SemiclassicalConfig::default()
    };
    let mut table = Table::new([
        "hbar",
        "scenario",
        "t",
        "err_q",
        "err_p",
        "err_alpha",
        "fidelity",
        "n_x",
        "fock_cutoff",
        "truncation_warning",
    ]);
    let mut warnings = 0;
    for &scenario in &q.scenarios {
        for r in semiclassical_check(&sc, &modes, scenario, &u0).map_err(err)? {
            if r.truncation_warning {
                log::warn!("{scenario} at ħ = {}: Fock truncation may be visible", r.hbar);
                warnings += 1;
            }
            table.push(vec![
                num(r.hbar),
                scenario.to_string(),
                num(r.t),
                num(r.err_q),
                num(r.err_p),
                num(r.err_alpha),
                num(r.fidelity),
                r.n_x.to_string(),
                r.fock_cutoff.to_string(),
                r.truncation_warning.to_string(),
            ]);
        }
    }
    out.write_table("convergence.csv", &table).map_err(io)?;

    let single = KGrid::from_nodes(1, modes.cutoff(), modes.threshold(), &[modes.node(0).to_vec()], &[modes.weights()[0]])
        .map_err(err)?;
    let residuals = exec::map(ctx.cfg.exec, &q.dressing_cutoffs, |&n_c| {
        let spec = LatticeSpec::new(Some(q.dressing_nx), q.dressing_hbar, n_c);
        QuantumLattice::new(&spec, &single).and_then(|lat| dressing_identity_residual(&lat))
    });
    let mut ident = Table::new(["fock_cutoff", "residual"]);
    let mut values = Vec::new();
    for (&n_c, r) in q.dressing_cutoffs.iter().zip(residuals) {
        let r = r.map_err(err)?;
        ident.push(vec![n_c.to_string(), num(r)]);
        values.push(r);
    }
    out.write_table("dressing_identity.csv", &ident).map_err(io)?;
    Ok(json!({ "truncation_warnings": warnings, "dressing_residuals": values }))
}

fn regularity(ctx: &Ctx, out: &mut ArtifactDir) -> Step {
    let ff = &ctx.ff;
    let grid = ff.grid();
    let base = ctx.cfg.flow_config();
    let fc = FlowConfig::new(System::Undressed, base.integrator, base.dt, base.horizon)
        .in_frame(Frame::Lab)
        .every(base.sample_every);
    let tr = integrate(&fc, ff, &ctx.u0).map_err(err)?;
    if let Some(f) = &tr.failure {
        return Err(f.to_string());
    }
    let f: Vec<Complex64> = ff.f().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut table = Table::new(["t", "s", "norm", "bound", "margin"]);
    let mut worst = f64::INFINITY;
    for &s in &ctx.cfg.regularity.orders {
        let w = WeightSpec::new(s).map_err(err)?;
        let a0 = weighted_norm(&ctx.u0.alpha, grid, w).map_err(err)?;
        let fs = weighted_norm(&f, grid, w).map_err(err)?;
        for (t, u) in tr.times.iter().zip(&tr.states) {
            let norm = weighted_norm(&u.alpha, grid, w).map_err(err)?;
            let bound = a0 + t / std::f64::consts::SQRT_2 * fs;
            worst = worst.min(bound - norm);
            table.push_nums(&[*t, s, norm, bound, bound - norm]);
        }
    }
    out.write_table("regularity.csv", &table).map_err(io)?;
    Ok(json!({ "min_margin": worst }))
}
