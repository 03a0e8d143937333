//! Seeded random states used by tests, sweeps and the experiment runner.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::phasespace::{KGrid, PhasePoint};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateScale {
    pub position: f64,
    pub momentum: f64,
    pub field: f64,
}

impl Default for StateScale {
    fn default() -> Self {
        StateScale {
            position: 1.0,
            momentum: 1.0,
            field: 0.5,
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian `q`, `p` and white-noise field.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, grid: &KGrid, scale: StateScale) -> PhasePoint {
    let d = grid.dim();
    let q = (0..d).map(|_| scale.position * normal(rng)).collect();
    let p = (0..d).map(|_| scale.momentum * normal(rng)).collect();
    let alpha = (0..grid.len())
        .map(|_| Complex64::new(normal(rng), normal(rng)) * scale.field)
        .collect();
    PhasePoint { q, p, alpha }
}

/// A unit-scale perturbation direction.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R, grid: &KGrid) -> PhasePoint {
    random_state(
        rng,
        grid,
        StateScale {
            position: 1.0,
            momentum: 1.0,
            field: 1.0,
        },
    )
}

/// `α(k) = Σ_j c_j exp(−|k − k_j|²/2)` with three random complex bumps.
pub fn smooth_field<R: Rng + ?Sized>(rng: &mut R, grid: &KGrid, amplitude: f64) -> Vec<Complex64> {
    let d = grid.dim();
    let bumps: Vec<(Vec<f64>, Complex64)> = (0..3)
        .map(|_| {
            let centre = (0..d).map(|_| 0.5 * grid.cutoff() * normal(rng)).collect();
            let c = Complex64::new(normal(rng), normal(rng)) * amplitude;
            (centre, c)
        })
        .collect();
    (0..grid.len())
        .map(|i| {
            let k = grid.node(i);
            bumps
                .iter()
                .map(|(centre, c)| {
                    let r2: f64 = k.iter().zip(centre).map(|(a, b)| (a - b) * (a - b)).sum();
                    c * (-0.5 * r2).exp()
                })
                .sum()
        })
        .collect()
}
