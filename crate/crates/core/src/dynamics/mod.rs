//! Flows on phase space.
//!
//! Every system except the dressed one is a *drive* `(g, F)`: energy
//! `g(|p|²/2 + ‖α‖²) + √2 Re⟨α, F_q⟩`, linear part `gℒ` and nonlinear part
//! `𝒩_F`. The undressed system is `(1, f)`, the free one `(1, 0)` and the
//! dressing generator `(0, iB)`. The dressed system is handled through its
//! gradient and, as the primary path, by conjugating the undressed flow with
//! the dressing map.

mod picard;
mod symbol;

pub use picard::{growth_constant, lipschitz_constant, local_existence_time, picard_solve, PicardReport};
pub use symbol::{characteristic_residual, symbol_m};

use std::f64::consts::SQRT_2;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dressing::DressingMap;
use crate::energy::{energy_dressed, energy_generalized, gradient, hamilton_field, EnergyReport, Functional};
use crate::error::{Error, Result};
use crate::formfactor::{moments, FormFactorSet};
use crate::phasespace::PhasePoint;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct Drive {
    pub coupling: f64,
    pub profile: Vec<Complex64>,
}

impl Drive {
    pub fn undressed(ff: &FormFactorSet) -> Self {
        Drive {
            coupling: 1.0,
            profile: ff.f().iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn free(ff: &FormFactorSet) -> Self {
        Drive {
            coupling: 1.0,
            profile: vec![Complex64::new(0.0, 0.0); ff.grid().len()],
        }
    }

    /// `(0, iB)`, whose flow is the dressing map.
    pub fn dressing(ff: &FormFactorSet) -> Self {
        Drive {
            coupling: 0.0,
            profile: ff.b().iter().map(|&x| Complex64::new(0.0, x)).collect(),
        }
    }

    pub fn validate(&self, ff: &FormFactorSet) -> Result<()> {
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::Parameter(format!("coupling must be ≥ 0, got {}", self.coupling)));
        }
        ff.grid().check_field(&self.profile)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum System {
    Undressed,
    Dressed,
    Dressing,
    Free,
    Generalized(Drive),
}

impl System {
    pub fn drive(&self, ff: &FormFactorSet) -> Option<Drive> {
        match self {
            System::Undressed => Some(Drive::undressed(ff)),
            System::Dressed => None,
            System::Dressing => Some(Drive::dressing(ff)),
            System::Free => Some(Drive::free(ff)),
            System::Generalized(d) => Some(d.clone()),
        }
    }

    /// The functional conserved by this system's flow.
    pub fn energy(&self, ff: &FormFactorSet, u: &PhasePoint) -> Result<EnergyReport> {
        match self.drive(ff) {
            Some(d) => energy_generalized(u, ff, d.coupling, &d.profile),
            None => energy_dressed(u, ff),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            System::Undressed => "undressed",
            System::Dressed => "dressed",
            System::Dressing => "dressing",
            System::Free => "free",
            System::Generalized(_) => "generalized",
        }
    }
}

impl FromStr for System {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "undressed" => Ok(System::Undressed),
            "dressed" => Ok(System::Dressed),
            "dressing" => Ok(System::Dressing),
            "free" => Ok(System::Free),
            other => Err(Error::Unknown(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Strang,
    Rk4,
    Picard,
}

impl FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strang" => Ok(Integrator::Strang),
            "rk4" => Ok(Integrator::Rk4),
            "picard" => Ok(Integrator::Picard),
            other => Err(Error::Unknown(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    #[default]
    Lab,
    Interaction,
}

impl FromStr for Frame {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lab" => Ok(Frame::Lab),
            "interaction" => Ok(Frame::Interaction),
            other => Err(Error::Unknown(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub system: System,
    pub integrator: Integrator,
    pub dt: f64,
    pub horizon: f64,
    pub frame: Frame,
    /// Keep every n-th step (the final step is always kept).
    pub sample_every: usize,
}

impl FlowConfig {
    pub fn new(system: System, integrator: Integrator, dt: f64, horizon: f64) -> Self {
        FlowConfig {
            system,
            integrator,
            dt,
            horizon,
            frame: Frame::Lab,
            sample_every: 1,
        }
    }

    pub fn in_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn every(mut self, n: usize) -> Self {
        self.sample_every = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Parameter(format!("horizon must be ≥ 0, got {}", self.horizon)));
        }
        if self.sample_every == 0 {
            return Err(Error::Parameter("sample stride must be ≥ 1".into()));
        }
        if self.frame == Frame::Interaction && self.system == System::Dressed {
            return Err(Error::Parameter("the dressed system has no interaction frame".into()));
        }
        Ok(())
    }

    /// Number of steps and the actual step so that the horizon is hit exactly.
    pub fn steps(&self) -> (usize, f64) {
        if self.horizon == 0.0 {
            return (0, self.dt);
        }
        let n = ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.horizon / n as f64)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// States in the configured frame.
    pub states: Vec<PhasePoint>,
    /// Energy of the system's own functional, always evaluated on the lab state.
    pub energies: Vec<EnergyReport>,
    pub frame: Frame,
    /// Set when the run stopped early on a non-finite state.
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn endpoint(&self) -> &PhasePoint {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    /// The state at sample `i` in the lab frame.
    pub fn lab_state(&self, i: usize, coupling: f64) -> PhasePoint {
        match self.frame {
            Frame::Lab => self.states[i].clone(),
            Frame::Interaction => free_flow(self.times[i], coupling, &self.states[i]),
        }
    }

    /// `max_t |E(t) − E(0)| / max(|E(0)|, floor)`
    pub fn relative_drift(&self, floor: f64) -> f64 {
        let e0 = self.energies[0].value;
        let scale = e0.abs().max(floor);
        self.energies.iter().map(|e| (e.value - e0).abs()).fold(0.0, f64::max) / scale
    }
}

/// `Φ⁰_t(q, p, α) = (q + tgp, p, e^{−itg}α)`
pub fn free_flow(t: f64, coupling: f64, u: &PhasePoint) -> PhasePoint {
    let tg = t * coupling;
    let (s, c) = (-tg).sin_cos();
    let rot = Complex64::new(c, s);
    PhasePoint {
        q: u.q.iter().zip(&u.p).map(|(q, p)| q + tg * p).collect(),
        p: u.p.clone(),
        alpha: u.alpha.iter().map(|a| a * rot).collect(),
    }
}

/// Push a tangent vector back through the free flow: `dΦ⁰_{−t}`.
fn free_pullback(t: f64, coupling: f64, v: &PhasePoint) -> PhasePoint {
    let tg = t * coupling;
    let (s, c) = tg.sin_cos();
    let rot = Complex64::new(c, s);
    PhasePoint {
        q: v.q.iter().zip(&v.p).map(|(q, p)| q - tg * p).collect(),
        p: v.p.clone(),
        alpha: v.alpha.iter().map(|a| a * rot).collect(),
    }
}

/// `ℒu = (p, 0, −iα)`
pub fn linear_part(u: &PhasePoint) -> PhasePoint {
    PhasePoint {
        q: u.p.clone(),
        p: vec![0.0; u.dim()],
        alpha: u.alpha.iter().map(|a| -I * a).collect(),
    }
}

/// `𝒩u = (0, √2 Re⟨α, ikF_q⟩, −iF_q/√2)`
pub fn nonlinear_part(ff: &FormFactorSet, drive: &Drive, u: &PhasePoint) -> PhasePoint {
    let g = ff.grid();
    let m = moments(g, &u.alpha, &drive.profile, &u.q, 1);
    let p = (0..g.dim()).map(|j| SQRT_2 * (I * m.m1[j]).re).collect();
    let alpha = (0..g.len())
        .map(|i| {
            let (s, c) = (-g.dot(i, &u.q)).sin_cos();
            -I * Complex64::new(c, s) * drive.profile[i] / SQRT_2
        })
        .collect();
    PhasePoint {
        q: vec![0.0; g.dim()],
        p,
        alpha,
    }
}

/// `X(t, u) = dΦ⁰_{−t} 𝒩(Φ⁰_t u)`
pub fn interaction_field(ff: &FormFactorSet, drive: &Drive, t: f64, u: &PhasePoint) -> PhasePoint {
    let lab = free_flow(t, drive.coupling, u);
    free_pullback(t, drive.coupling, &nonlinear_part(ff, drive, &lab))
}

fn drive_field(ff: &FormFactorSet, drive: &Drive, t: f64, u: &PhasePoint, frame: Frame) -> PhasePoint {
    match frame {
        Frame::Lab => {
            let mut out = nonlinear_part(ff, drive, u);
            out.axpy(drive.coupling, &linear_part(u));
            out
        }
        Frame::Interaction => interaction_field(ff, drive, t, u),
    }
}

pub fn vector_field(system: &System, ff: &FormFactorSet, t: f64, u: &PhasePoint, frame: Frame) -> Result<PhasePoint> {
    u.check(ff.grid())?;
    match system.drive(ff) {
        Some(drive) => {
            drive.validate(ff)?;
            Ok(drive_field(ff, &drive, t, u, frame))
        }
        None => {
            if frame == Frame::Interaction {
                return Err(Error::Parameter("the dressed system has no interaction frame".into()));
            }
            Ok(hamilton_field(&gradient(Functional::Dressed, u, ff)?))
        }
    }
}

/// Exact flow of `𝒩` for time `t`: `q` frozen, `α` moves linearly and `p`
/// picks up a linear and a quadratic (recoil) term.
pub fn nonlinear_flow(ff: &FormFactorSet, drive: &Drive, t: f64, u: &PhasePoint) -> PhasePoint {
    let g = ff.grid();
    let w = g.weights();
    let m = moments(g, &u.alpha, &drive.profile, &u.q, 1);
    let p = (0..g.dim())
        .map(|j| {
            let recoil = g.sum(|i| w[i] * g.node(i)[j] * drive.profile[i].norm_sqr());
            u.p[j] + t * SQRT_2 * (I * m.m1[j]).re - 0.5 * t * t * recoil
        })
        .collect();
    let alpha = (0..g.len())
        .map(|i| {
            let (s, c) = (-g.dot(i, &u.q)).sin_cos();
            u.alpha[i] - I * Complex64::new(c, s) * drive.profile[i] * (t / SQRT_2)
        })
        .collect();
    PhasePoint { q: u.q.clone(), p, alpha }
}

/// One step `Φ⁰_{h/2} ∘ Ψ^𝒩_h ∘ Φ⁰_{h/2}`.
pub fn strang_step(ff: &FormFactorSet, drive: &Drive, h: f64, u: &PhasePoint) -> PhasePoint {
    let half = free_flow(0.5 * h, drive.coupling, u);
    let kicked = nonlinear_flow(ff, drive, h, &half);
    free_flow(0.5 * h, drive.coupling, &kicked)
}

fn rk4_step<F>(f: &F, t: f64, h: f64, u: &PhasePoint) -> Result<PhasePoint>
where
    F: Fn(f64, &PhasePoint) -> Result<PhasePoint>,
{
    let k1 = f(t, u)?;
    let mut tmp = u.clone();
    tmp.axpy(0.5 * h, &k1);
    let k2 = f(t + 0.5 * h, &tmp)?;
    let mut tmp = u.clone();
    tmp.axpy(0.5 * h, &k2);
    let k3 = f(t + 0.5 * h, &tmp)?;
    let mut tmp = u.clone();
    tmp.axpy(h, &k3);
    let k4 = f(t + h, &tmp)?;
    let mut out = u.clone();
    out.axpy(h / 6.0, &k1);
    out.axpy(h / 3.0, &k2);
    out.axpy(h / 3.0, &k3);
    out.axpy(h / 6.0, &k4);
    Ok(out)
}

struct Recorder<'a> {
    system: &'a System,
    ff: &'a FormFactorSet,
    coupling: f64,
    frame: Frame,
    traj: Trajectory,
}

impl<'a> Recorder<'a> {
    fn push(&mut self, t: f64, lab: &PhasePoint) -> Result<()> {
        let stored = match self.frame {
            Frame::Lab => lab.clone(),
            Frame::Interaction => free_flow(-t, self.coupling, lab),
        };
        self.traj.energies.push(self.system.energy(self.ff, lab)?);
        self.traj.times.push(t);
        self.traj.states.push(stored);
        Ok(())
    }
}

/// Integrate from `u0` over `[0, horizon]`.
pub fn integrate(cfg: &FlowConfig, ff: &FormFactorSet, u0: &PhasePoint) -> Result<Trajectory> {
    cfg.validate()?;
    u0.check(ff.grid())?;
    let drive = cfg.system.drive(ff);
    if let Some(d) = &drive {
        d.validate(ff)?;
    }
    let coupling = drive.as_ref().map_or(1.0, |d| d.coupling);
    let (n, h) = cfg.steps();

    if cfg.integrator == Integrator::Picard {
        let drive = drive.ok_or_else(|| Error::Parameter("picard needs a drive; the dressed system has none".into()))?;
        let report = picard_solve(ff, &drive, u0, cfg.horizon, n.max(1))?;
        let mut rec = Recorder {
            system: &cfg.system,
            ff,
            coupling,
            frame: cfg.frame,
            traj: empty(cfg.frame),
        };
        for (i, (t, u)) in report.times.iter().zip(&report.states).enumerate() {
            if i % cfg.sample_every == 0 || i + 1 == report.times.len() {
                rec.push(*t, u)?;
            }
        }
        return Ok(rec.traj);
    }

    // The dressed Strang flow is D(−1) ∘ Φ_strang ∘ D(1).
    let conj = cfg.system == System::Dressed && cfg.integrator == Integrator::Strang;
    let undressed = Drive::undressed(ff);
    let plus = DressingMap::new(1.0, ff);
    let minus = DressingMap::new(-1.0, ff);

    let mut rec = Recorder {
        system: &cfg.system,
        ff,
        coupling,
        frame: cfg.frame,
        traj: empty(cfg.frame),
    };
    rec.push(0.0, u0)?;

    // Internal state: lab frame, except for rk4 in the interaction frame.
    let rk4_interaction = cfg.integrator == Integrator::Rk4 && cfg.frame == Frame::Interaction;
    let mut state = if conj { plus.apply(u0)? } else { u0.clone() };
    let field = |t: f64, u: &PhasePoint| vector_field(&cfg.system, ff, t, u, cfg.frame);

    for step in 1..=n {
        let t0 = (step - 1) as f64 * h;
        let t = step as f64 * h;
        state = match cfg.integrator {
            Integrator::Strang if conj => strang_step(ff, &undressed, h, &state),
            Integrator::Strang => strang_step(ff, drive.as_ref().expect("drive"), h, &state),
            _ => rk4_step(&field, t0, h, &state)?,
        };
        if !state.is_finite() {
            rec.traj.failure = Some(Error::NonFinite { time: t, steps: step });
            log::warn!("non-finite state at t = {t}; trajectory truncated");
            return Ok(rec.traj);
        }
        if step % cfg.sample_every == 0 || step == n {
            let lab = if conj {
                minus.apply(&state)?
            } else if rk4_interaction {
                free_flow(t, coupling, &state)
            } else {
                state.clone()
            };
            rec.push(t, &lab)?;
        }
    }
    Ok(rec.traj)
}

fn empty(frame: Frame) -> Trajectory {
    Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        energies: Vec::new(),
        frame,
        failure: None,
    }
}

/// Undressed Strang flow to time `t` with the step closest to `dt`.
pub fn undressed_flow(ff: &FormFactorSet, u0: &PhasePoint, t: f64, dt: f64) -> Result<PhasePoint> {
    let cfg = FlowConfig::new(System::Undressed, Integrator::Strang, dt, t).every(usize::MAX);
    Ok(integrate(&cfg, ff, u0)?.endpoint().clone())
}

/// `D(−1) ∘ Φ(t) ∘ D(1)`, the primary path for the dressed flow.
pub fn dressed_flow_conjugated(ff: &FormFactorSet, u0: &PhasePoint, t: f64, dt: f64) -> Result<PhasePoint> {
    let lifted = DressingMap::new(1.0, ff).apply(u0)?;
    let moved = undressed_flow(ff, &lifted, t, dt)?;
    DressingMap::new(-1.0, ff).apply(&moved)
}

/// `D(1) ∘ Φ(t) ∘ D(−1)`, the opposite composition, kept for comparison.
pub fn dressed_flow_reverse_order(ff: &FormFactorSet, u0: &PhasePoint, t: f64, dt: f64) -> Result<PhasePoint> {
    let lifted = DressingMap::new(-1.0, ff).apply(u0)?;
    let moved = undressed_flow(ff, &lifted, t, dt)?;
    DressingMap::new(1.0, ff).apply(&moved)
}

/// Direct RK4 integration of the dressed Hamilton field.
pub fn dressed_flow_direct(ff: &FormFactorSet, u0: &PhasePoint, t: f64, dt: f64) -> Result<PhasePoint> {
    let cfg = FlowConfig::new(System::Dressed, Integrator::Rk4, dt, t).every(usize::MAX);
    Ok(integrate(&cfg, ff, u0)?.endpoint().clone())
}
