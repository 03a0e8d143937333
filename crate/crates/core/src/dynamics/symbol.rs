use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use super::{interaction_field, Drive, Frame, Trajectory};
use crate::error::{Error, Result};
use crate::formfactor::FormFactorSet;
use crate::phasespace::{real_inner, PhasePoint};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Classical commutator symbol
/// `m(s, ξ, u) = √2 Re⟨α, e^{isg}F_{q+sgp} ik·(q₀+sgp₀)⟩ − Im⟨α₀, e^{isg}F_{q+sgp}⟩`
/// for the test vector `ξ = (q₀ + ip₀, α₀)` and state `u = (q, p, α)`.
pub fn symbol_m(ff: &FormFactorSet, drive: &Drive, s: f64, xi: &PhasePoint, u: &PhasePoint) -> Result<f64> {
    let grid = ff.grid();
    u.check(grid)?;
    xi.check(grid)?;
    drive.validate(ff)?;
    let sg = s * drive.coupling;
    let shifted_q: Vec<f64> = u.q.iter().zip(&u.p).map(|(q, p)| q + sg * p).collect();
    let shifted_q0: Vec<f64> = xi.q.iter().zip(&xi.p).map(|(q, p)| q + sg * p).collect();
    let w = grid.weights();
    let (first, second) = grid.sum(|i| {
        let (sn, cs) = (sg - grid.dot(i, &shifted_q)).sin_cos();
        let fk = Complex64::new(cs, sn) * drive.profile[i];
        let kq0 = grid.dot(i, &shifted_q0);
        let a = (u.alpha[i].conj() * fk * I * kq0 * w[i]).re;
        let b = (xi.alpha[i].conj() * fk * w[i]).im;
        Pair(a, b)
    })
    .into();
    Ok(SQRT_2 * first - second)
}

#[derive(Default, Clone, Copy)]
struct Pair(f64, f64);

impl std::ops::Add for Pair {
    type Output = Pair;
    fn add(self, o: Pair) -> Pair {
        Pair(self.0 + o.0, self.1 + o.1)
    }
}

impl From<Pair> for (f64, f64) {
    fn from(p: Pair) -> (f64, f64) {
        (p.0, p.1)
    }
}

/// Maximum over sample times of
/// `|e^{2πiRe⟨y,u(t)⟩} − e^{2πiRe⟨y,u(0)⟩} − 2πi ∫₀ᵗ Re⟨X(s,u(s)),y⟩ e^{2πiRe⟨y,u(s)⟩} ds|`
/// with the trapezoid rule over the stored samples.
pub fn characteristic_residual(
    ff: &FormFactorSet,
    drive: &Drive,
    traj: &Trajectory,
    y: &PhasePoint,
) -> Result<f64> {
    if traj.frame != Frame::Interaction {
        return Err(Error::Parameter("characteristic residual needs an interaction-frame trajectory".into()));
    }
    let grid = ff.grid();
    let n = traj.states.len();
    let mut phase = Vec::with_capacity(n);
    let mut integrand = Vec::with_capacity(n);
    for (t, u) in traj.times.iter().zip(&traj.states) {
        let e = Complex64::from_polar(1.0, 2.0 * PI * real_inner(y, u, grid)?);
        let x = interaction_field(ff, drive, *t, u);
        integrand.push(e * real_inner(&x, y, grid)?);
        phase.push(e);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut worst: f64 = 0.0;
    for i in 1..n {
        acc += (integrand[i - 1] + integrand[i]) * (0.5 * (traj.times[i] - traj.times[i - 1]));
        let r = phase[i] - phase[0] - 2.0 * PI * I * acc;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}
