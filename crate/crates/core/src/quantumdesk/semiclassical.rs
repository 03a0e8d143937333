use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    apply_gross, build_dressed_explicit, build_field_op, build_free_hamiltonian, build_hamiltonians, coherent_state,
    expectations, gross_unitary, propagate, truncation_warning, LatticeSpec, QuantumLattice, QuantumState,
};
use crate::dressing::DressingMap;
use crate::dynamics::{dressed_flow_conjugated, undressed_flow};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::formfactor::FormFactorSet;
use crate::phasespace::{KGrid, PhasePoint};

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    UndressedEvolution,
    DressedEvolution,
    GrossDressing,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::UndressedEvolution,
        Scenario::DressedEvolution,
        Scenario::GrossDressing,
    ];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::UndressedEvolution => "undressed-evolution",
            Scenario::DressedEvolution => "dressed-evolution",
            Scenario::GrossDressing => "gross-dressing",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.to_string() == s)
            .ok_or_else(|| Error::Unknown(format!("scenario '{s}' (expected one of undressed-evolution, dressed-evolution, gross-dressing)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalConfig {
    pub hbars: Vec<f64>,
    pub horizon: f64,
    pub box_periods: usize,
    /// Upper bound on the per-mode Fock cutoff chosen from the coherent amplitude.
    pub fock_cap: usize,
    pub max_dim: usize,
    /// Step of the classical reference flow.
    pub classical_dt: f64,
    pub exec: Execution,
}

impl Default for SemiclassicalConfig {
    fn default() -> Self {
        SemiclassicalConfig {
            hbars: vec![0.4, 0.2, 0.1],
            horizon: 1.0,
            box_periods: 2,
            fock_cap: 40,
            max_dim: super::DEFAULT_MAX_DIM,
            classical_dt: 1e-3,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub hbar: f64,
    pub scenario: Scenario,
    pub t: f64,
    pub err_q: f64,
    pub err_p: f64,
    pub err_alpha: f64,
    pub fidelity: f64,
    pub n_x: usize,
    pub fock_cutoff: usize,
    pub truncation_warning: bool,
}

/// Per-mode cutoff covering the largest coherent amplitude the scenario can
/// reach: `n̄ + 6√n̄ + 6` with `n̄ = w A²/ħ`.
fn fock_budget(lat_modes: &KGrid, u0: &PhasePoint, ff: &FormFactorSet, horizon: f64, hbar: f64, cap: usize) -> usize {
    let w = lat_modes.weights();
    let worst = (0..lat_modes.len())
        .map(|m| {
            let a = u0.alpha[m].norm() + (horizon * ff.f()[m].abs() + 2.0 * ff.b()[m].abs()) / std::f64::consts::SQRT_2;
            w[m] * a * a / hbar
        })
        .fold(0.0, f64::max);
    ((worst + 6.0 * worst.sqrt() + 6.0).ceil() as usize).clamp(2, cap)
}

fn classical_prediction(scenario: Scenario, ff: &FormFactorSet, u0: &PhasePoint, t: f64, dt: f64) -> Result<PhasePoint> {
    match scenario {
        Scenario::UndressedEvolution => undressed_flow(ff, u0, t, dt),
        Scenario::DressedEvolution => dressed_flow_conjugated(ff, u0, t, dt),
        Scenario::GrossDressing => DressingMap::new(-1.0, ff).apply(u0),
    }
}

fn quantum_map(scenario: Scenario, lat: &QuantumLattice, psi: &QuantumState, t: f64) -> Result<QuantumState> {
    let h = lat.hbar();
    match scenario {
        Scenario::UndressedEvolution => {
            let ham = build_free_hamiltonian(lat, 1.0).add(&build_field_op(lat, &to_c(&lat.f_values()))?);
            propagate(&ham, psi, t, h)
        }
        Scenario::DressedEvolution => {
            // U e^{−itH/ħ} U*
            let ham = build_free_hamiltonian(lat, 1.0).add(&build_field_op(lat, &to_c(&lat.f_values()))?);
            let lifted = apply_gross(lat, psi, true)?;
            let moved = propagate(&ham, &lifted, t, h)?;
            apply_gross(lat, &moved, false)
        }
        Scenario::GrossDressing => apply_gross(lat, psi, false),
    }
}

fn to_c(v: &[f64]) -> Vec<C> {
    v.iter().map(|&x| C::new(x, 0.0)).collect()
}

/// Quantum expectations against the classical prediction on the same mode
/// set, one row per ħ. `u0` lives on `mode_grid`.
pub fn semiclassical_check(
    cfg: &SemiclassicalConfig,
    mode_grid: &KGrid,
    scenario: Scenario,
    u0: &PhasePoint,
) -> Result<Vec<ConvergenceRow>> {
    if mode_grid.dim() != 1 {
        return Err(Error::Parameter("semiclassical check runs in one dimension".into()));
    }
    u0.check(mode_grid)?;
    if cfg.hbars.is_empty() {
        return Ok(Vec::new());
    }
    let ff = FormFactorSet::new(mode_grid.clone(), 0.0)?;
    let t = match scenario {
        Scenario::GrossDressing => 0.0,
        _ => cfg.horizon,
    };
    let classical = classical_prediction(scenario, &ff, u0, t, cfg.classical_dt)?;

    let rows = exec::map(cfg.exec, &cfg.hbars, |&hbar| -> Result<ConvergenceRow> {
        let n_c = fock_budget(mode_grid, u0, &ff, cfg.horizon, hbar, cfg.fock_cap);
        let spec = LatticeSpec {
            n_x: None,
            hbar,
            fock_cutoff: n_c,
            box_periods: cfg.box_periods,
            max_dim: cfg.max_dim,
        };
        let lat = QuantumLattice::new(&spec, mode_grid)?;
        let warn = truncation_warning(&lat, u0) || truncation_warning(&lat, &classical);
        let psi0 = coherent_state(&lat, u0)?;
        let psi = quantum_map(scenario, &lat, &psi0, t)?;
        let ex = expectations(&lat, &psi);
        let target = coherent_state(&lat, &classical)?;
        let err_alpha = ex
            .alpha
            .iter()
            .zip(&classical.alpha)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        log::debug!("ħ = {hbar}: n_x = {}, N_c = {n_c}, scenario {scenario}", lat.n_x());
        Ok(ConvergenceRow {
            hbar,
            scenario,
            t,
            err_q: (ex.q - classical.q[0]).abs(),
            err_p: (ex.p - classical.p[0]).abs(),
            err_alpha,
            fidelity: psi.fidelity(&target),
            n_x: lat.n_x(),
            fock_cutoff: n_c,
            truncation_warning: warn,
        })
    });
    rows.into_iter().collect()
}

/// `‖P(U H U* − C_ħ − Ĥ)P‖₂` where `P` keeps Fock occupation `≤ N_c/2` and
/// the central half of the particle momentum band.
pub fn dressing_identity_residual(lat: &QuantumLattice) -> Result<f64> {
    let ham = build_hamiltonians(lat)?;
    let u = gross_unitary(lat)?;
    let n = lat.dim();
    let h = ham.polaron.to_dense();
    let hat = build_dressed_explicit(lat)?.to_dense();
    let c = lat.dressing_constant();
    let r = &u * h * u.adjoint() - DMatrix::<C>::identity(n, n) * C::new(c, 0.0) - hat;

    let n_x = lat.n_x();
    let half = lat.fock_cutoff() / 2;
    let band = n_x / 4;
    let mut cols = Vec::new();
    for a in 0..n_x {
        if (a as i64 - (n_x / 2) as i64).unsigned_abs() as usize > band {
            continue;
        }
        let wave = lat.plane_wave(a);
        for (idx, occ) in lat.occupations().iter().enumerate() {
            if occ.iter().copied().max().unwrap_or(0) > half {
                continue;
            }
            let mut field = nalgebra::DVector::<C>::zeros(lat.fock_dim());
            field[idx] = C::new(1.0, 0.0);
            cols.push(wave.kronecker(&field));
        }
    }
    let v = DMatrix::from_columns(&cols);
    let projected = v.adjoint() * r * &v;
    let svd = projected.svd(false, false);
    Ok(svd.singular_values.iter().copied().fold(0.0, f64::max))
}
