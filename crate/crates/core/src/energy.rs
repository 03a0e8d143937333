//! Energy functionals, their factorized forms and analytic gradients.
//!
//! Gradients use the Wirtinger convention: for a covector `G` returned by
//! [`gradient`] the directional derivative along `v` is
//! `G_q·v_q + G_p·v_p + 2 Re⟨v_α, G_α⟩`, and the Hamilton field is
//! `(G_p, −G_q, −i G_α)`.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formfactor::{moments, FormFactorSet, Profile};
use crate::phasespace::{field_norm_sq, PhasePoint};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    Undressed,
    Dressed,
    Dressing,
}

impl FromStr for Functional {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "undressed" => Ok(Functional::Undressed),
            "dressed" => Ok(Functional::Dressed),
            "dressing" => Ok(Functional::Dressing),
            other => Err(Error::Unknown(other.to_string())),
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Functional::Undressed => "undressed",
            Functional::Dressed => "dressed",
            Functional::Dressing => "dressing",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value: f64,
    pub factorized_value: f64,
    pub kinetic: f64,
    pub field: f64,
    pub interaction: f64,
}

impl EnergyReport {
    pub fn assembly_gap(&self) -> f64 {
        (self.value - self.factorized_value).abs()
    }
}

fn half_sq(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|x| x * x).sum::<f64>()
}

/// `‖α + c·F_q‖²`
fn shifted_norm_sq<P: Profile + ?Sized>(u: &PhasePoint, ff: &FormFactorSet, profile: &P, c: f64) -> f64 {
    let g = ff.grid();
    let w = g.weights();
    g.sum(|i| {
        let (s, co) = (-g.dot(i, &u.q)).sin_cos();
        let v = u.alpha[i] + Complex64::new(co, s) * profile.at(i) * c;
        w[i] * v.norm_sqr()
    })
}

/// `E = |p|²/2 + ‖α‖² + √2 Re⟨α, f_q⟩`
pub fn energy_undressed(u: &PhasePoint, ff: &FormFactorSet) -> Result<EnergyReport> {
    u.check(ff.grid())?;
    let g = ff.grid();
    let kinetic = half_sq(&u.p);
    let field = field_norm_sq(&u.alpha, g);
    let interaction = SQRT_2 * moments(g, &u.alpha, ff.f(), &u.q, 0).m0.re;
    let factorized_value =
        kinetic + shifted_norm_sq(u, ff, ff.f(), 1.0 / SQRT_2) - 0.5 * ff.norm_sq(ff.f());
    Ok(EnergyReport {
        value: kinetic + field + interaction,
        factorized_value,
        kinetic,
        field,
        interaction,
    })
}

/// `P_j = Re⟨α, k_j B_q⟩`
pub fn dressing_momentum(u: &PhasePoint, ff: &FormFactorSet) -> Vec<f64> {
    let d = ff.grid().dim();
    let m = moments(ff.grid(), &u.alpha, ff.b(), &u.q, 1);
    (0..d).map(|j| m.m1[j].re).collect()
}

/// `Ê = |p|²/2 + ‖α‖² + √2Re⟨α,f^K_q⟩ − √2Re⟨α,(k·p)B_q⟩ + Σ_j (Re⟨α,k_jB_q⟩)²`
pub fn energy_dressed(u: &PhasePoint, ff: &FormFactorSet) -> Result<EnergyReport> {
    u.check(ff.grid())?;
    let g = ff.grid();
    let kinetic = half_sq(&u.p);
    let field = field_norm_sq(&u.alpha, g);
    let big_p = dressing_momentum(u, ff);
    let p_dot_big_p: f64 = u.p.iter().zip(&big_p).map(|(a, b)| a * b).sum();
    let big_p_sq: f64 = big_p.iter().map(|x| x * x).sum();
    let ir = moments(g, &u.alpha, ff.f_ir(), &u.q, 0).m0.re;
    let interaction = SQRT_2 * ir - SQRT_2 * p_dot_big_p + big_p_sq;

    let v: Vec<f64> = u.p.iter().zip(&big_p).map(|(p, b)| p - SQRT_2 * b).collect();
    let factorized_value =
        half_sq(&v) + shifted_norm_sq(u, ff, ff.f_ir(), 1.0 / SQRT_2) - 0.5 * ff.norm_sq(ff.f_ir());
    Ok(EnergyReport {
        value: kinetic + field + interaction,
        factorized_value,
        kinetic,
        field,
        interaction,
    })
}

/// `E_D = √2 Re⟨α, iB_q⟩`
pub fn energy_dressing(u: &PhasePoint, ff: &FormFactorSet) -> Result<f64> {
    u.check(ff.grid())?;
    let m = moments(ff.grid(), &u.alpha, ff.b(), &u.q, 0);
    Ok(SQRT_2 * (I * m.m0).re)
}

/// `E_{g,F} = g(|p|²/2 + ‖α‖²) + √2 Re⟨α, F_q⟩`
pub fn energy_generalized(
    u: &PhasePoint,
    ff: &FormFactorSet,
    coupling: f64,
    profile: &[Complex64],
) -> Result<EnergyReport> {
    u.check(ff.grid())?;
    ff.grid().check_field(profile)?;
    let g = ff.grid();
    let kinetic = coupling * half_sq(&u.p);
    let field = coupling * field_norm_sq(&u.alpha, g);
    let interaction = SQRT_2 * moments(g, &u.alpha, profile, &u.q, 0).m0.re;
    let factorized_value = if coupling > 0.0 {
        kinetic + coupling * shifted_norm_sq(u, ff, profile, 1.0 / (SQRT_2 * coupling))
            - ff.norm_sq(profile) / (2.0 * coupling)
    } else {
        interaction
    };
    Ok(EnergyReport {
        value: kinetic + field + interaction,
        factorized_value,
        kinetic,
        field,
        interaction,
    })
}

pub fn energy(functional: Functional, u: &PhasePoint, ff: &FormFactorSet) -> Result<EnergyReport> {
    match functional {
        Functional::Undressed => energy_undressed(u, ff),
        Functional::Dressed => energy_dressed(u, ff),
        Functional::Dressing => {
            let v = energy_dressing(u, ff)?;
            Ok(EnergyReport {
                value: v,
                factorized_value: v,
                kinetic: 0.0,
                field: 0.0,
                interaction: v,
            })
        }
    }
}

/// `(∂_q E, ∂_p E, ∂_ᾱ E)`
pub fn gradient(functional: Functional, u: &PhasePoint, ff: &FormFactorSet) -> Result<PhasePoint> {
    u.check(ff.grid())?;
    match functional {
        Functional::Undressed => Ok(grad_generalized(u, ff, 1.0, ff.f())),
        Functional::Dressed => Ok(grad_dressed(u, ff)),
        Functional::Dressing => Ok(grad_dressing(u, ff)),
    }
}

pub fn gradient_generalized(
    u: &PhasePoint,
    ff: &FormFactorSet,
    coupling: f64,
    profile: &[Complex64],
) -> Result<PhasePoint> {
    u.check(ff.grid())?;
    ff.grid().check_field(profile)?;
    Ok(grad_generalized(u, ff, coupling, profile))
}

fn grad_generalized<P: Profile + ?Sized>(u: &PhasePoint, ff: &FormFactorSet, coupling: f64, profile: &P) -> PhasePoint {
    let g = ff.grid();
    let d = g.dim();
    let m = moments(g, &u.alpha, profile, &u.q, 1);
    // ∂_{q_l} √2Re⟨α, F_q⟩ = √2 Re⟨α, −ik_l F_q⟩ = √2 Im⟨α, k_l F_q⟩
    let dq = (0..d).map(|l| SQRT_2 * m.m1[l].im).collect();
    let dp = u.p.iter().map(|x| coupling * x).collect();
    let da = (0..g.len())
        .map(|i| {
            let (s, c) = (-g.dot(i, &u.q)).sin_cos();
            u.alpha[i] * coupling + Complex64::new(c, s) * profile.at(i) / SQRT_2
        })
        .collect();
    PhasePoint { q: dq, p: dp, alpha: da }
}

fn grad_dressed(u: &PhasePoint, ff: &FormFactorSet) -> PhasePoint {
    let g = ff.grid();
    let d = g.dim();
    let mb = moments(g, &u.alpha, ff.b(), &u.q, 2);
    let mk = moments(g, &u.alpha, ff.f_ir(), &u.q, 1);
    // V = p − √2 P with P_j = Re⟨α, k_j B_q⟩
    let v: Vec<f64> = (0..d).map(|j| u.p[j] - SQRT_2 * mb.m1[j].re).collect();
    let dq = (0..d)
        .map(|l| {
            let cross: f64 = (0..d).map(|j| v[j] * mb.m2[l][j].im).sum();
            -SQRT_2 * cross + SQRT_2 * mk.m1[l].im
        })
        .collect();
    let da = (0..g.len())
        .map(|i| {
            let (s, c) = (-g.dot(i, &u.q)).sin_cos();
            let e = Complex64::new(c, s);
            let kv = g.dot(i, &v);
            u.alpha[i] + e * (ff.f_ir()[i] - kv * ff.b()[i]) / SQRT_2
        })
        .collect();
    PhasePoint { q: dq, p: v, alpha: da }
}

fn grad_dressing(u: &PhasePoint, ff: &FormFactorSet) -> PhasePoint {
    let g = ff.grid();
    let d = g.dim();
    let m = moments(g, &u.alpha, ff.b(), &u.q, 1);
    // ∂_{q_l} √2Re⟨α, iB_q⟩ = √2 Re⟨α, k_l B_q⟩
    let dq = (0..d).map(|l| SQRT_2 * m.m1[l].re).collect();
    let da = (0..g.len())
        .map(|i| {
            let (s, c) = (-g.dot(i, &u.q)).sin_cos();
            I * Complex64::new(c, s) * ff.b()[i] / SQRT_2
        })
        .collect();
    PhasePoint { q: dq, p: vec![0.0; d], alpha: da }
}

/// `(G_p, −G_q, −i G_α)`
pub fn hamilton_field(grad: &PhasePoint) -> PhasePoint {
    PhasePoint {
        q: grad.p.clone(),
        p: grad.q.iter().map(|x| -x).collect(),
        alpha: grad.alpha.iter().map(|a| -I * a).collect(),
    }
}

/// `G_q·v_q + G_p·v_p + 2 Re⟨v_α, G_α⟩`
pub fn directional_derivative(grad: &PhasePoint, v: &PhasePoint, ff: &FormFactorSet) -> f64 {
    let g = ff.grid();
    let w = g.weights();
    let z: f64 = grad.q.iter().zip(&v.q).chain(grad.p.iter().zip(&v.p)).map(|(a, b)| a * b).sum();
    z + 2.0 * g.sum(|i| w[i] * (v.alpha[i].conj() * grad.alpha[i]).re)
}

/// The minimizer `(q, 0, −f_q/√2)` of the undressed functional at fixed `q`.
pub fn undressed_minimizer(ff: &FormFactorSet, q: &[f64]) -> PhasePoint {
    let alpha = crate::formfactor::translate(ff.f(), ff.grid(), q)
        .into_iter()
        .map(|z| -z / SQRT_2)
        .collect();
    PhasePoint {
        q: q.to_vec(),
        p: vec![0.0; q.len()],
        alpha,
    }
}

/// The minimizer of the dressed functional: `α = −f^K_q/√2`, `p = √2 Re⟨α, kB_q⟩`.
pub fn dressed_minimizer(ff: &FormFactorSet, q: &[f64]) -> PhasePoint {
    let alpha: Vec<Complex64> = crate::formfactor::translate(ff.f_ir(), ff.grid(), q)
        .into_iter()
        .map(|z| -z / SQRT_2)
        .collect();
    let mut u = PhasePoint {
        q: q.to_vec(),
        p: vec![0.0; q.len()],
        alpha,
    };
    u.p = dressing_momentum(&u, ff).iter().map(|x| SQRT_2 * x).collect();
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formfactor::translate;
    use crate::phasespace::{GridSpec, KGrid};
    use crate::sampling::{random_direction, random_state, StateScale};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ff(d: usize, cutoff: f64, res: usize) -> FormFactorSet {
        let g = KGrid::new(&GridSpec::new(d, cutoff, 1.0, res).with_tolerance(0.2)).unwrap();
        FormFactorSet::new(g, 0.0).unwrap()
    }

    #[test]
    fn zero_field_states_have_zero_energy() {
        let ff = ff(2, 2.0, 12);
        let mut u = PhasePoint::zeros(ff.grid());
        u.q = vec![0.3, -2.0];
        assert_eq!(energy_undressed(&u, &ff).unwrap().value, 0.0);
        assert_eq!(energy_dressed(&u, &ff).unwrap().value, 0.0);
        assert_eq!(energy_dressing(&u, &ff).unwrap(), 0.0);
    }

    #[test]
    fn undressed_minimizer_attains_infimum() {
        let ff = ff(1, 4.0, 64);
        let mut u = undressed_minimizer(&ff, &[0.7]);
        let r = energy_undressed(&u, &ff).unwrap();
        let fsq = ff.norm_sq(ff.f());
        assert!((r.value + 0.5 * fsq).abs() < 1e-12);
        u.p = vec![1.5];
        let r = energy_undressed(&u, &ff).unwrap();
        assert!((r.value - (1.125 - 0.5 * fsq)).abs() < 1e-12);
    }

    #[test]
    fn dressed_minimizer_attains_infimum() {
        let ff = ff(3, 2.0, 16);
        let u = dressed_minimizer(&ff, &[0.2, -0.4, 1.0]);
        let r = energy_dressed(&u, &ff).unwrap();
        assert!((r.value + 0.5 * ff.norm_sq(ff.f_ir())).abs() < 1e-12);
        assert!((r.factorized_value + 0.5 * ff.norm_sq(ff.f_ir())).abs() < 1e-12);
    }

    #[test]
    fn dressing_energy_examples() {
        let ff = ff(1, 2.0, 32);
        let g = ff.grid();
        let mut u = PhasePoint::zeros(g);
        u.alpha = translate(ff.b(), g, &[0.0]).into_iter().map(|z| I * z).collect();
        let v = energy_dressing(&u, &ff).unwrap();
        assert!((v - SQRT_2 * ff.norm_sq(ff.b())).abs() < 1e-13);
        u.alpha = (0..g.len()).map(|i| Complex64::new((i as f64).cos(), 0.0)).collect();
        assert_eq!(energy_dressing(&u, &ff).unwrap(), 0.0);
    }

    #[test]
    fn expanded_and_factorized_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 1..=3 {
            let ff = ff(d, 3.0, 14);
            for _ in 0..20 {
                let u = random_state(&mut rng, ff.grid(), StateScale::default());
                for r in [energy_undressed(&u, &ff).unwrap(), energy_dressed(&u, &ff).unwrap()] {
                    assert!(r.assembly_gap() <= 1e-10 * (1.0 + r.value.abs()), "{r:?}");
                }
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for d in 1..=3 {
            let ff = ff(d, 2.5, 12);
            for functional in [Functional::Undressed, Functional::Dressed, Functional::Dressing] {
                for _ in 0..5 {
                    let u = random_state(&mut rng, ff.grid(), StateScale::default());
                    let v = random_direction(&mut rng, ff.grid());
                    let gr = gradient(functional, &u, &ff).unwrap();
                    let exact = directional_derivative(&gr, &v, &ff);
                    let mut up = u.clone();
                    up.axpy(h, &v);
                    let mut um = u.clone();
                    um.axpy(-h, &v);
                    let fd = (energy(functional, &up, &ff).unwrap().value
                        - energy(functional, &um, &ff).unwrap().value)
                        / (2.0 * h);
                    let rel = (fd - exact).abs() / exact.abs().max(1.0);
                    assert!(rel <= 1e-6, "{functional} d={d}: fd {fd} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn undressed_gradient_at_zero_field() {
        let ff = ff(1, 2.0, 16);
        let mut u = PhasePoint::zeros(ff.grid());
        u.p = vec![0.8];
        let gr = gradient(Functional::Undressed, &u, &ff).unwrap();
        assert_eq!(gr.p, vec![0.8]);
    }

    #[test]
    fn dressing_gradient_is_constant_profile() {
        let ff = ff(1, 2.0, 16);
        let g = ff.grid();
        let mut u = PhasePoint::zeros(g);
        u.q = vec![0.4];
        let gr = gradient(Functional::Dressing, &u, &ff).unwrap();
        let want = translate(ff.b(), g, &u.q);
        for (a, b) in gr.alpha.iter().zip(&want) {
            assert!((a - I * b / SQRT_2).norm() < 1e-15);
        }
    }

    #[test]
    fn unknown_functional_is_rejected() {
        assert!(matches!("sideways".parse::<Functional>(), Err(Error::Unknown(_))));
        assert_eq!("dressed".parse::<Functional>().unwrap(), Functional::Dressed);
    }

    #[test]
    fn generalized_reduces_to_undressed() {
        let ff = ff(1, 2.0, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_state(&mut rng, ff.grid(), StateScale::default());
        let prof: Vec<Complex64> = ff.f().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let a = energy_generalized(&u, &ff, 1.0, &prof).unwrap();
        let b = energy_undressed(&u, &ff).unwrap();
        assert!((a.value - b.value).abs() < 1e-13);
        assert!(a.assembly_gap() < 1e-12);
    }
}
