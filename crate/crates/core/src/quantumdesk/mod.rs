//! Desk-scale quantization in one dimension: a periodic particle grid
//! tensored with a truncated Fock space over a handful of field modes.
//!
//! The particle box `[−L, L)` is sized so that every mode momentum `k_m` is a
//! multiple of the Fourier spacing `π/L`; multiplication by `e^{±ik_m q̂}` then
//! shifts the discrete momentum by whole lattice steps. States are stored as
//! `n_x × n_f` amplitude matrices and operators as sums of Kronecker products.

mod expm;
mod operator;
mod semiclassical;

pub use expm::{expm, expm_hermitian_apply, KrylovOptions, KrylovStats};
pub use operator::{KronTerm, ParticleFactor, QuantumOperator, QuantumState};
pub use semiclassical::{
    dressing_identity_residual, semiclassical_check, ConvergenceRow, Scenario, SemiclassicalConfig,
};

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formfactor::{form_factor, gross_profile};
use crate::phasespace::{KGrid, PhasePoint};

type C = Complex64;
const I: C = C { re: 0.0, im: 1.0 };

pub const DEFAULT_MAX_DIM: usize = 65536;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Particle grid size; derived from ħ when absent.
    pub n_x: Option<usize>,
    pub hbar: f64,
    pub fock_cutoff: usize,
    /// Box half-width in units of `π/|k_1|`.
    pub box_periods: usize,
    pub max_dim: usize,
}

impl LatticeSpec {
    pub fn new(n_x: Option<usize>, hbar: f64, fock_cutoff: usize) -> Self {
        LatticeSpec {
            n_x,
            hbar,
            fock_cutoff,
            box_periods: 1,
            max_dim: DEFAULT_MAX_DIM,
        }
    }

    pub fn with_box_periods(mut self, j: usize) -> Self {
        self.box_periods = j;
        self
    }
}

/// Smallest power of two with grid spacing `2L/n ≤ √ħ/4`, at least 16.
pub fn auto_grid_size(hbar: f64, half_width: f64) -> usize {
    let need = (8.0 * half_width / hbar.sqrt()).ceil() as usize;
    need.max(16).next_power_of_two()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct QuantumLattice {
    hbar: f64,
    n_x: usize,
    half_width: f64,
    cutoff: f64,
    threshold: f64,
    modes: Vec<Mode>,
    fock_cutoff: usize,
    fock_dim: usize,
    xs: Vec<f64>,
    kappas: Vec<f64>,
    dft: DMatrix<C>,
    lowering: Vec<DMatrix<C>>,
    occupations: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct ModeOps {
    pub lowering: Vec<DMatrix<C>>,
    pub raising: Vec<DMatrix<C>>,
    pub number: DMatrix<C>,
}

#[derive(Clone, Debug)]
pub struct Hamiltonians {
    pub free: QuantumOperator,
    pub polaron: QuantumOperator,
    pub dressed: QuantumOperator,
}

impl QuantumLattice {
    pub fn new(spec: &LatticeSpec, mode_grid: &KGrid) -> Result<Self> {
        if mode_grid.dim() != 1 {
            return Err(Error::Parameter("the quantum desk is one-dimensional".into()));
        }
        if !(spec.hbar > 0.0 && spec.hbar.is_finite()) {
            return Err(Error::Parameter(format!("ħ must be positive, got {}", spec.hbar)));
        }
        if spec.fock_cutoff < 2 {
            return Err(Error::Parameter(format!("Fock cutoff must be ≥ 2, got {}", spec.fock_cutoff)));
        }
        if spec.box_periods == 0 {
            return Err(Error::Parameter("box_periods must be ≥ 1".into()));
        }
        let modes: Vec<Mode> = (0..mode_grid.len())
            .map(|i| Mode {
                k: mode_grid.node(i)[0],
                weight: mode_grid.weights()[i],
            })
            .collect();
        let k1 = modes[0].k.abs();
        let half_width = spec.box_periods as f64 * PI / k1;
        for m in &modes {
            let steps = m.k * half_width / PI;
            if (steps - steps.round()).abs() > 1e-9 {
                return Err(Error::Parameter(format!(
                    "mode k = {} is not commensurate with the box half-width {half_width}",
                    m.k
                )));
            }
        }
        let n_x = spec.n_x.unwrap_or_else(|| auto_grid_size(spec.hbar, half_width));
        if !n_x.is_power_of_two() || n_x < 4 {
            return Err(Error::Parameter(format!("n_x must be a power of two ≥ 4, got {n_x}")));
        }
        let per_mode = spec.fock_cutoff + 1;
        let fock_dim = per_mode.checked_pow(modes.len() as u32).unwrap_or(usize::MAX);
        let dim = n_x.saturating_mul(fock_dim);
        if dim > spec.max_dim {
            return Err(Error::DimensionCeiling {
                dim,
                ceiling: spec.max_dim,
            });
        }

        let dx = 2.0 * half_width / n_x as f64;
        let xs: Vec<f64> = (0..n_x).map(|j| -half_width + j as f64 * dx).collect();
        let kappas: Vec<f64> = (0..n_x)
            .map(|a| (a as f64 - 0.5 * n_x as f64) * PI / half_width)
            .collect();
        let scale = 1.0 / (n_x as f64).sqrt();
        let dft = DMatrix::from_fn(n_x, n_x, |a, b| C::from_polar(scale, -kappas[a] * xs[b]));

        let occupations: Vec<Vec<usize>> = (0..fock_dim)
            .map(|mut idx| {
                let mut occ = vec![0; modes.len()];
                for m in (0..modes.len()).rev() {
                    occ[m] = idx % per_mode;
                    idx /= per_mode;
                }
                occ
            })
            .collect();
        let sqrt_h = spec.hbar.sqrt();
        let lowering = (0..modes.len())
            .map(|m| {
                let stride = per_mode.pow((modes.len() - 1 - m) as u32);
                let mut a = DMatrix::<C>::zeros(fock_dim, fock_dim);
                for (idx, occ) in occupations.iter().enumerate() {
                    if occ[m] > 0 {
                        a[(idx - stride, idx)] = C::new(sqrt_h * (occ[m] as f64).sqrt(), 0.0);
                    }
                }
                a
            })
            .collect();

        Ok(QuantumLattice {
            hbar: spec.hbar,
            n_x,
            half_width,
            cutoff: mode_grid.cutoff(),
            threshold: mode_grid.threshold(),
            modes,
            fock_cutoff: spec.fock_cutoff,
            fock_dim,
            xs,
            kappas,
            dft,
            lowering,
            occupations,
        })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }
    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }
    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }
    pub fn dim(&self) -> usize {
        self.n_x * self.fock_dim
    }
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }
    pub fn occupations(&self) -> &[Vec<usize>] {
        &self.occupations
    }

    /// `f(k_m)`
    pub fn f_values(&self) -> Vec<f64> {
        self.modes.iter().map(|m| form_factor(1, m.k.abs(), self.cutoff)).collect()
    }

    /// `f^K(k_m)`
    pub fn f_ir_values(&self) -> Vec<f64> {
        self.modes
            .iter()
            .map(|m| if m.k.abs() < self.threshold { form_factor(1, m.k.abs(), self.cutoff) } else { 0.0 })
            .collect()
    }

    /// `B_ħ(k_m)` at the lattice ħ.
    pub fn b_values(&self) -> Vec<f64> {
        self.b_values_at(self.hbar)
    }

    pub fn b_values_at(&self, hbar: f64) -> Vec<f64> {
        self.modes
            .iter()
            .map(|m| gross_profile(1, m.k.abs(), self.cutoff, self.threshold, hbar))
            .collect()
    }

    /// `Σ w k B²`
    pub fn recoil(&self) -> f64 {
        self.modes.iter().zip(self.b_values()).map(|(m, b)| m.weight * m.k * b * b).sum()
    }

    /// `C_ħ = ‖B_ħ‖²/2 + ⟨B_ħ, f⟩` over the mode set.
    pub fn dressing_constant(&self) -> f64 {
        self.modes
            .iter()
            .zip(self.b_values().iter().zip(self.f_values()))
            .map(|(m, (b, f))| m.weight * (0.5 * b * b + b * f))
            .sum()
    }

    /// `g(p̂)` built spectrally: `F* diag(g(ħκ)) F`.
    pub fn momentum_function<G: Fn(f64) -> f64>(&self, g: G) -> DMatrix<C> {
        let d = DVector::from_iterator(self.n_x, self.kappas.iter().map(|&k| C::new(g(self.hbar * k), 0.0)));
        let mut scaled = self.dft.clone();
        for (a, mut row) in scaled.row_iter_mut().enumerate() {
            row *= d[a];
        }
        self.dft.adjoint() * scaled
    }

    pub fn momentum(&self) -> DMatrix<C> {
        self.momentum_function(|p| p)
    }

    pub fn position(&self) -> DVector<C> {
        DVector::from_iterator(self.n_x, self.xs.iter().map(|&x| C::new(x, 0.0)))
    }

    /// `e^{i σ k x}` on the grid.
    pub fn plane_phase(&self, k: f64, sigma: f64) -> DVector<C> {
        DVector::from_iterator(self.n_x, self.xs.iter().map(|&x| C::from_polar(1.0, sigma * k * x)))
    }

    /// Normalized discrete plane wave with Fourier index `a`.
    pub fn plane_wave(&self, a: usize) -> DVector<C> {
        self.dft.row(a).adjoint()
    }

    pub fn fock_index(&self, occ: &[usize]) -> usize {
        occ.iter().fold(0, |acc, &n| acc * (self.fock_cutoff + 1) + n)
    }
}

pub fn build_mode_ops(lat: &QuantumLattice) -> ModeOps {
    let raising: Vec<DMatrix<C>> = lat.lowering.iter().map(|a| a.adjoint()).collect();
    let mut number = DMatrix::<C>::zeros(lat.fock_dim, lat.fock_dim);
    for (idx, occ) in lat.occupations.iter().enumerate() {
        number[(idx, idx)] = C::new(lat.hbar * occ.iter().sum::<usize>() as f64, 0.0);
    }
    ModeOps {
        lowering: lat.lowering.clone(),
        raising,
        number,
    }
}

/// `φ(F_q̂) = (1/√2) Σ_m √w_m [conj(F_m) e^{ik_m q̂} ⊗ a_m + F_m e^{−ik_m q̂} ⊗ a*_m]`
pub fn build_field_op(lat: &QuantumLattice, profile: &[C]) -> Result<QuantumOperator> {
    if profile.len() != lat.modes.len() {
        return Err(Error::Dimension(format!(
            "profile has {} values for {} modes",
            profile.len(),
            lat.modes.len()
        )));
    }
    let ops = build_mode_ops(lat);
    let mut op = QuantumOperator::zero(lat.n_x, lat.fock_dim);
    for (m, mode) in lat.modes.iter().enumerate() {
        if profile[m] == C::new(0.0, 0.0) {
            continue;
        }
        let c = mode.weight.sqrt() / SQRT_2;
        let lower = lat.plane_phase(mode.k, 1.0) * (profile[m].conj() * c);
        let raise = lat.plane_phase(mode.k, -1.0) * (profile[m] * c);
        op.push(ParticleFactor::Diagonal(lower), Some(ops.lowering[m].clone()));
        op.push(ParticleFactor::Diagonal(raise), Some(ops.raising[m].clone()));
    }
    Ok(op)
}

fn real_profile(v: &[f64]) -> Vec<C> {
    v.iter().map(|&x| C::new(x, 0.0)).collect()
}

/// `H⁰ = p̂²/2 + N`
pub fn build_free_hamiltonian(lat: &QuantumLattice, coupling: f64) -> QuantumOperator {
    let ops = build_mode_ops(lat);
    let mut op = QuantumOperator::zero(lat.n_x, lat.fock_dim);
    op.push(ParticleFactor::Dense(lat.momentum_function(|p| coupling * 0.5 * p * p)), None);
    op.push(ParticleFactor::Identity, Some(ops.number * C::new(coupling, 0.0)));
    op
}

/// `H_{g,F} = gH⁰ + φ(F_q̂)`
pub fn build_generalized(lat: &QuantumLattice, coupling: f64, profile: &[C]) -> Result<QuantumOperator> {
    Ok(build_free_hamiltonian(lat, coupling).add(&build_field_op(lat, profile)?))
}

/// The dressed Hamiltonian written out term by term,
/// `p̂_s²/2 + N + φ(f^K) − (a*(kB)p̂_s + p̂_s a(kB))/√2 + φ(kB)²/2` with
/// `p̂_s = p̂ − s/2` and `s = Σ w k B²` (zero on mirror-symmetric mode sets).
pub fn build_dressed_explicit(lat: &QuantumLattice) -> Result<QuantumOperator> {
    let ops = build_mode_ops(lat);
    let half_s = 0.5 * lat.recoil();
    let mut op = QuantumOperator::zero(lat.n_x, lat.fock_dim);
    op.push(
        ParticleFactor::Dense(lat.momentum_function(|p| 0.5 * (p - half_s) * (p - half_s))),
        None,
    );
    op.push(ParticleFactor::Identity, Some(ops.number.clone()));
    op = op.add(&build_field_op(lat, &real_profile(&lat.f_ir_values()))?);

    let ps = lat.momentum_function(|p| p - half_s);
    let b = lat.b_values();
    let coeffs: Vec<f64> = lat
        .modes
        .iter()
        .zip(&b)
        .map(|(m, b)| m.weight.sqrt() * m.k * b / SQRT_2)
        .collect();
    for (m, mode) in lat.modes.iter().enumerate() {
        if coeffs[m] == 0.0 {
            continue;
        }
        // −(1/√2) a*(kB_q̂) p̂_s  and  −(1/√2) p̂_s a(kB_q̂)
        let e_minus = DMatrix::from_diagonal(&lat.plane_phase(mode.k, -1.0));
        let e_plus = DMatrix::from_diagonal(&lat.plane_phase(mode.k, 1.0));
        let c = C::new(-coeffs[m], 0.0);
        op.push(ParticleFactor::Dense(&e_minus * &ps * c), Some(ops.raising[m].clone()));
        op.push(ParticleFactor::Dense(&ps * &e_plus * c), Some(ops.lowering[m].clone()));
    }
    // φ(kB)²/2 with φ(kB) = Σ c_m (E_m ⊗ a_m + E_m* ⊗ a*_m)
    for m in 0..lat.modes.len() {
        for n in 0..lat.modes.len() {
            let c = 0.5 * coeffs[m] * coeffs[n];
            if c == 0.0 {
                continue;
            }
            let (km, kn) = (lat.modes[m].k, lat.modes[n].k);
            let pairs = [
                (km + kn, &ops.lowering[m], &ops.lowering[n]),
                (km - kn, &ops.lowering[m], &ops.raising[n]),
                (-km + kn, &ops.raising[m], &ops.lowering[n]),
                (-km - kn, &ops.raising[m], &ops.raising[n]),
            ];
            for (k, a, b) in pairs {
                let phase = lat.plane_phase(k, 1.0) * C::new(c, 0.0);
                op.push(ParticleFactor::Diagonal(phase), Some(a * b));
            }
        }
    }
    Ok(op)
}

pub fn build_hamiltonians(lat: &QuantumLattice) -> Result<Hamiltonians> {
    let free = build_free_hamiltonian(lat, 1.0);
    let polaron = free.clone().add(&build_field_op(lat, &real_profile(&lat.f_values()))?);
    let dressed = build_dressed_explicit(lat)?;
    Ok(Hamiltonians { free, polaron, dressed })
}

/// Hermitian `G` with `U = e^{(i/ħ)φ(iB_q̂)} = e^{−iG}`, i.e. `G = −φ(iB_q̂)/ħ`.
pub fn gross_generator(lat: &QuantumLattice) -> Result<QuantumOperator> {
    let ib: Vec<C> = lat.b_values().iter().map(|&b| C::new(0.0, b)).collect();
    Ok(build_field_op(lat, &ib)?.scale(C::new(-1.0 / lat.hbar, 0.0)))
}

/// Dense Gross unitary; intended for small lattices.
pub fn gross_unitary(lat: &QuantumLattice) -> Result<DMatrix<C>> {
    let g = gross_generator(lat)?.to_dense();
    let u = expm(&(g * (-I)))?;
    let n = u.nrows();
    let res = (&u.adjoint() * &u - DMatrix::<C>::identity(n, n)).norm();
    if res > 1e-10 {
        return Err(Error::Exponential(format!("Gross unitary off by {res:.3e} from unitarity")));
    }
    Ok(u)
}

/// `Uψ` (or `U*ψ` when `adjoint`) by Krylov exponentiation of the generator.
pub fn apply_gross(lat: &QuantumLattice, psi: &QuantumState, adjoint: bool) -> Result<QuantumState> {
    let g = gross_generator(lat)?;
    let tau = if adjoint { -1.0 } else { 1.0 };
    let (out, _) = expm_hermitian_apply(|x| g.apply_amps(x), &psi.amps, tau, KrylovOptions::default())?;
    Ok(QuantumState::new(out))
}

/// `e^{−itH/ħ} ψ`
pub fn propagate(h: &QuantumOperator, psi: &QuantumState, t: f64, hbar: f64) -> Result<QuantumState> {
    let (out, _) = expm_hermitian_apply(|x| h.apply_amps(x), &psi.amps, t / hbar, KrylovOptions::default())?;
    let out = QuantumState::new(out);
    let drift = (out.norm() - psi.norm()).abs();
    if drift > 1e-10 * psi.norm().max(1.0) {
        return Err(Error::Exponential(format!("propagation changed the norm by {drift:.3e}")));
    }
    Ok(out)
}

/// Per-mode coherent amplitude `√w α/√ħ`.
fn coherent_amplitudes(lat: &QuantumLattice, alpha: &[C]) -> Vec<C> {
    lat.modes
        .iter()
        .zip(alpha)
        .map(|(m, a)| a * (m.weight / lat.hbar).sqrt())
        .collect()
}

/// Whether any mode's mean occupation exceeds half the Fock cutoff.
pub fn truncation_warning(lat: &QuantumLattice, u0: &PhasePoint) -> bool {
    coherent_amplitudes(lat, &u0.alpha)
        .iter()
        .any(|z| z.norm_sqr() > 0.5 * lat.fock_cutoff as f64)
}

/// Gaussian wave packet at `(q₀, p₀)` times displaced vacua with
/// `a_m ψ ≈ √w_m α₀(k_m) ψ`.
pub fn coherent_state(lat: &QuantumLattice, u0: &PhasePoint) -> Result<QuantumState> {
    if u0.q.len() != 1 || u0.p.len() != 1 || u0.alpha.len() != lat.modes.len() {
        return Err(Error::Dimension("coherent state needs a one-dimensional point on the mode set".into()));
    }
    let h = lat.hbar;
    let (q0, p0) = (u0.q[0], u0.p[0]);
    let particle = DVector::from_iterator(
        lat.n_x,
        lat.xs.iter().map(|&x| {
            let amp = (-(x - q0) * (x - q0) / (2.0 * h)).exp();
            C::from_polar(amp, p0 * x / h)
        }),
    );
    let particle = &particle / C::new(particle.norm(), 0.0);

    let z = coherent_amplitudes(lat, &u0.alpha);
    if truncation_warning(lat, u0) {
        log::warn!(
            "coherent amplitude exceeds truncation budget (N_c = {}, |z|² = {:?})",
            lat.fock_cutoff,
            z.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>()
        );
    }
    let field = DVector::from_iterator(
        lat.fock_dim,
        lat.occupations.iter().map(|occ| {
            occ.iter()
                .zip(&z)
                .map(|(&n, z)| {
                    let fact: f64 = (1..=n).map(|i| i as f64).product();
                    z.powu(n as u32) / fact.sqrt()
                })
                .product::<C>()
        }),
    );
    let field = &field / C::new(field.norm(), 0.0);
    Ok(QuantumState::product(&particle, &field))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Expectations {
    pub q: f64,
    pub p: f64,
    /// `⟨a_m⟩ / √w_m`
    pub alpha: Vec<C>,
    pub number: f64,
}

pub fn expectations(lat: &QuantumLattice, psi: &QuantumState) -> Expectations {
    let amps = &psi.amps;
    let mut q = 0.0;
    for (j, row) in amps.row_iter().enumerate() {
        q += lat.xs[j] * row.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    let p = expm::dotc(amps, &(lat.momentum() * amps)).re;
    let alpha = lat
        .lowering
        .iter()
        .zip(&lat.modes)
        .map(|(a, m)| expm::dotc(amps, &(amps * a.transpose())) / m.weight.sqrt())
        .collect();
    let ops = build_mode_ops(lat);
    let number = expm::dotc(amps, &(amps * ops.number.transpose())).re;
    Expectations { q, p, alpha, number }
}

/// Field Weyl operator `W(β) = e^{iφ(β)}` on the Fock factor.
pub fn weyl_field(lat: &QuantumLattice, beta: &[C]) -> Result<DMatrix<C>> {
    if beta.len() != lat.modes.len() {
        return Err(Error::Dimension("one Weyl amplitude per mode".into()));
    }
    let ops = build_mode_ops(lat);
    let mut phi = DMatrix::<C>::zeros(lat.fock_dim, lat.fock_dim);
    for (m, mode) in lat.modes.iter().enumerate() {
        let c = mode.weight.sqrt() / SQRT_2;
        phi += &ops.lowering[m] * (beta[m].conj() * c) + &ops.raising[m] * (beta[m] * c);
    }
    expm(&(phi * I))
}

/// Particle Weyl operator `T(q, p) = e^{i(p q̂ − q p̂)}`.
pub fn weyl_particle(lat: &QuantumLattice, q: f64, p: f64) -> Result<DMatrix<C>> {
    let x = DMatrix::from_diagonal(&lat.position());
    let gen = x * C::new(p, 0.0) - lat.momentum() * C::new(q, 0.0);
    expm(&(gen * I))
}

fn weyl_expectation(psi: &QuantumState, t: &DMatrix<C>, w: &DMatrix<C>) -> C {
    expm::dotc(&psi.amps, &(t * &psi.amps * w.transpose()))
}

/// `⟨ψ, T(z/2iπ) ⊗ W(α/√2π) ψ⟩` for `ξ = (z, α)`, `z = q + ip`, with the
/// scaling exactly as written in the Wigner-measure definition.
pub fn characteristic_functional(lat: &QuantumLattice, psi: &QuantumState, xi: &PhasePoint) -> Result<C> {
    // z/(2iπ) = (p − iq)/(2π): particle shift (p/2π, −q/2π)
    let t = weyl_particle(lat, xi.p[0] / (2.0 * PI), -xi.q[0] / (2.0 * PI))?;
    let beta: Vec<C> = xi.alpha.iter().map(|a| a / (SQRT_2 * PI)).collect();
    let w = weyl_field(lat, &beta)?;
    Ok(weyl_expectation(psi, &t, &w))
}

/// `⟨ψ, T(2iπ y_z) ⊗ W(√2π y_α) ψ⟩`, which tends to `e^{2iπ Re⟨y, u⟩}` on
/// coherent states at `u` as `ħ → 0`.
pub fn wigner_characteristic(lat: &QuantumLattice, psi: &QuantumState, y: &PhasePoint) -> Result<C> {
    // 2iπ(y_q + i y_p) = 2π(−y_p + i y_q)
    let t = weyl_particle(lat, -2.0 * PI * y.p[0], 2.0 * PI * y.q[0])?;
    let beta: Vec<C> = y.alpha.iter().map(|a| a * (SQRT_2 * PI)).collect();
    let w = weyl_field(lat, &beta)?;
    Ok(weyl_expectation(psi, &t, &w))
}
