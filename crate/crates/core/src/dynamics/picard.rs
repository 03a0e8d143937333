use std::f64::consts::SQRT_2;

use serde::Serialize;

use super::{free_flow, interaction_field, Drive};
use crate::error::{Error, Result};
use crate::formfactor::FormFactorSet;
use crate::phasespace::{h_norm, PhasePoint};

const MAX_ITERATIONS: usize = 60;
const TOLERANCE: f64 = 1e-12;
/// Ratios whose denominator sits at round-off level carry no information.
const RATIO_FLOOR: f64 = 1e-13;

/// Constant `C` in `‖𝒩u₁ − 𝒩u₂‖ ≤ C(1 + ‖α₁‖ + ‖α₂‖)‖u₁ − u₂‖`.
///
/// Collected from the three pieces of `𝒩`: the field row contributes
/// `‖kF‖/√2` per unit of `q`, the momentum row `√2‖kF‖` per unit of `α` and
/// `√2‖k²F‖ ≤ √2Λ‖kF‖` per unit of `q` times `‖α‖`; the `1 +` absorbs the
/// linear part. The bound is deliberately loose but explicit.
pub fn lipschitz_constant(ff: &FormFactorSet, drive: &Drive) -> f64 {
    let f = ff.norm_sq(&drive.profile).sqrt();
    let kf = ff.k_norm(&drive.profile);
    let lam = ff.grid().cutoff();
    1.0 + (3.0 / SQRT_2 * kf).max(SQRT_2 * lam * kf).max(f / SQRT_2)
}

/// `T(R) = 1 / (2C(1 + 4R))`
pub fn local_existence_time(lipschitz: f64, radius: f64) -> Result<f64> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::Parameter(format!("radius must be ≥ 0, got {radius}")));
    }
    Ok(1.0 / (2.0 * lipschitz * (1.0 + 4.0 * radius)))
}

/// Rate in `‖u(t) − v(t)‖ ≤ ‖u(0) − v(0)‖ e^{C|t|}` along bounded trajectories,
/// assembled from the same grid norms.
pub fn growth_constant(ff: &FormFactorSet, drive: &Drive) -> f64 {
    let f = ff.norm_sq(&drive.profile).sqrt();
    let kf = ff.k_norm(&drive.profile);
    1.0 + 2.0 * SQRT_2 * (f + kf)
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardReport {
    pub times: Vec<f64>,
    /// Lab-frame fixed point on the mesh.
    #[serde(skip)]
    pub states: Vec<PhasePoint>,
    pub iterations: usize,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub converged: bool,
    pub lipschitz: f64,
    pub existence_time: f64,
    pub radius: f64,
}

/// Fixed-point iteration of the Duhamel map on `[0, horizon]` (either sign).
///
/// The iteration runs in the interaction frame, `v ↦ u₀ + ∫₀ᵗ X(s, v(s)) ds`,
/// which is the lab-frame Duhamel map conjugated by the free flow. Integrals
/// use the cumulative trapezoid rule on a uniform mesh of `steps` intervals;
/// distances are measured in the lab frame as `sup_t ‖·‖`.
pub fn picard_solve(
    ff: &FormFactorSet,
    drive: &Drive,
    u0: &PhasePoint,
    horizon: f64,
    steps: usize,
) -> Result<PicardReport> {
    drive.validate(ff)?;
    let radius = h_norm(u0, ff.grid())?;
    let lipschitz = lipschitz_constant(ff, drive);
    let limit = local_existence_time(lipschitz, radius)?;
    log::info!("picard: C = {lipschitz:.6e}, R = {radius:.6e}, T(R) = {limit:.6e}");
    if horizon.abs() > limit * (1.0 + 1e-12) {
        return Err(Error::PicardHorizon {
            requested: horizon,
            limit,
            lipschitz,
            radius,
        });
    }
    if steps == 0 {
        return Err(Error::Parameter("picard mesh needs at least one interval".into()));
    }
    let h = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    let g = drive.coupling;

    let mut current: Vec<PhasePoint> = vec![u0.clone(); steps + 1];
    let mut distances = Vec::new();
    let mut ratios = Vec::new();
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let fields: Vec<PhasePoint> = times
            .iter()
            .zip(&current)
            .map(|(&t, v)| interaction_field(ff, drive, t, v))
            .collect();
        let mut next = Vec::with_capacity(steps + 1);
        let mut acc = u0.clone();
        next.push(acc.clone());
        for i in 1..=steps {
            acc.axpy(0.5 * h, &fields[i - 1]);
            acc.axpy(0.5 * h, &fields[i]);
            next.push(acc.clone());
        }
        let mut dist: f64 = 0.0;
        for (i, (a, b)) in next.iter().zip(&current).enumerate() {
            let diff = free_flow(times[i], g, &a.sub(b));
            dist = dist.max(h_norm(&diff, ff.grid())?);
        }
        if let Some(&prev) = distances.last() {
            if prev > RATIO_FLOOR {
                ratios.push(dist / prev);
            }
        }
        distances.push(dist);
        current = next;
        if dist <= TOLERANCE {
            converged = true;
            break;
        }
    }
    let states = times.iter().zip(&current).map(|(&t, v)| free_flow(t, g, v)).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(PicardReport {
        times,
        states,
        iterations: distances.len(),
        distances,
        ratios,
        max_ratio,
        converged,
        lipschitz,
        existence_time: limit,
        radius,
    })
}
