//! The classical dressing map `D(θ)`, the exact time-θ flow of the dressing
//! functional `E_D = √2 Re⟨α, iB_q⟩`.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;

use crate::error::Result;
use crate::formfactor::{moments, FormFactorSet};
use crate::phasespace::{symplectic_form, PhasePoint};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug)]
pub struct DressingMap<'a> {
    theta: f64,
    ff: &'a FormFactorSet,
}

impl<'a> DressingMap<'a> {
    pub fn new(theta: f64, ff: &'a FormFactorSet) -> Self {
        DressingMap { theta, ff }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn inverse(&self) -> DressingMap<'a> {
        DressingMap::new(-self.theta, self.ff)
    }

    /// `Σ w k_j B²`; zero on mirror-symmetric grids, kept so that the map stays
    /// the exact flow on arbitrary mode subsets.
    fn recoil(&self) -> Vec<f64> {
        let g = self.ff.grid();
        let w = g.weights();
        let b = self.ff.b();
        (0..g.dim()).map(|j| g.sum(|i| w[i] * g.node(i)[j] * b[i] * b[i])).collect()
    }

    /// `(q, p − √2θ Re⟨α, kB_q⟩ − (θ²/2)Σw kB², α + θB_q/√2)`
    pub fn apply(&self, u: &PhasePoint) -> Result<PhasePoint> {
        let g = self.ff.grid();
        u.check(g)?;
        let th = self.theta;
        if th == 0.0 {
            return Ok(u.clone());
        }
        let m = moments(g, &u.alpha, self.ff.b(), &u.q, 1);
        let recoil = self.recoil();
        let p = (0..g.dim())
            .map(|j| u.p[j] - SQRT_2 * th * m.m1[j].re - 0.5 * th * th * recoil[j])
            .collect();
        let b = self.ff.b();
        let alpha = (0..g.len())
            .map(|i| {
                let (s, c) = (-g.dot(i, &u.q)).sin_cos();
                u.alpha[i] + Complex64::new(c, s) * (th * b[i] / SQRT_2)
            })
            .collect();
        Ok(PhasePoint { q: u.q.clone(), p, alpha })
    }

    /// `dD(θ)_{u₀}(u₁)`
    pub fn differential(&self, u0: &PhasePoint, u1: &PhasePoint) -> Result<PhasePoint> {
        let g = self.ff.grid();
        u0.check(g)?;
        u1.check(g)?;
        let th = self.theta;
        let d = g.dim();
        let m1 = moments(g, &u1.alpha, self.ff.b(), &u0.q, 1);
        let m0 = moments(g, &u0.alpha, self.ff.b(), &u0.q, 2);
        let p = (0..d)
            .map(|j| {
                // Re⟨α₀, (−ik·q₁) k_j B_{q₀}⟩ = Σ_l q₁_l Im⟨α₀, k_l k_j B_{q₀}⟩
                let shift: f64 = (0..d).map(|l| u1.q[l] * m0.m2[j][l].im).sum();
                u1.p[j] - SQRT_2 * th * m1.m1[j].re - SQRT_2 * th * shift
            })
            .collect();
        let b = self.ff.b();
        let alpha = (0..g.len())
            .map(|i| {
                let (s, c) = (-g.dot(i, &u0.q)).sin_cos();
                let kq = g.dot(i, &u1.q);
                u1.alpha[i] - I * Complex64::new(c, s) * (th / SQRT_2 * kq * b[i])
            })
            .collect();
        Ok(PhasePoint { q: u1.q.clone(), p, alpha })
    }

    /// `|σ(dD u₁, dD u₂) − σ(u₁, u₂)|`
    pub fn check_symplectic(&self, u0: &PhasePoint, u1: &PhasePoint, u2: &PhasePoint) -> Result<f64> {
        let g = self.ff.grid();
        let before = symplectic_form(u1, u2, g)?;
        let after = symplectic_form(&self.differential(u0, u1)?, &self.differential(u0, u2)?, g)?;
        Ok((after - before).abs())
    }
}
