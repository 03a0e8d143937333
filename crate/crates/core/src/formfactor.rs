//! Form factor `f(k) = |k|^{−(d−1)/2}` on the cutoff ball, its infrared part
//! `f^K`, the Gross profile `B_ħ` and the pairings built from them.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::Add;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasespace::{check_model, field_inner, KGrid};
use crate::quadrature::adaptive_simpson;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub cutoff: f64,
    pub threshold: f64,
    #[serde(default)]
    pub hbar: f64,
    #[serde(default = "unit")]
    pub coupling: f64,
}

fn unit() -> f64 {
    1.0
}

impl ModelParams {
    pub fn new(dim: usize, cutoff: f64, threshold: f64) -> Self {
        ModelParams {
            dim,
            cutoff,
            threshold,
            hbar: 0.0,
            coupling: 1.0,
        }
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_model(self.dim, self.cutoff, self.threshold)?;
        if !(self.hbar >= 0.0 && self.hbar.is_finite()) {
            return Err(Error::Parameter(format!("ħ must be ≥ 0, got {}", self.hbar)));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::Parameter(format!("g must be ≥ 0, got {}", self.coupling)));
        }
        Ok(())
    }
}

/// Anything that can be read as a complex value per grid node.
pub trait Profile {
    fn at(&self, i: usize) -> Complex64;
}

impl Profile for [f64] {
    #[inline]
    fn at(&self, i: usize) -> Complex64 {
        Complex64::new(self[i], 0.0)
    }
}

impl Profile for [Complex64] {
    #[inline]
    fn at(&self, i: usize) -> Complex64 {
        self[i]
    }
}

impl Profile for Vec<f64> {
    #[inline]
    fn at(&self, i: usize) -> Complex64 {
        Complex64::new(self[i], 0.0)
    }
}

impl Profile for Vec<Complex64> {
    #[inline]
    fn at(&self, i: usize) -> Complex64 {
        self[i]
    }
}

pub fn form_factor(dim: usize, abs_k: f64, cutoff: f64) -> f64 {
    if abs_k > cutoff {
        return 0.0;
    }
    match dim {
        1 => 1.0,
        2 => abs_k.powf(-0.5),
        _ => 1.0 / abs_k,
    }
}

pub fn gross_profile(dim: usize, abs_k: f64, cutoff: f64, threshold: f64, hbar: f64) -> f64 {
    if abs_k < threshold {
        return 0.0;
    }
    -form_factor(dim, abs_k, cutoff) / (1.0 + 0.5 * hbar * abs_k * abs_k)
}

#[derive(Clone, Debug)]
pub struct FormFactorSet {
    grid: KGrid,
    hbar: f64,
    f: Vec<f64>,
    f_ir: Vec<f64>,
    b: Vec<f64>,
    generic: Option<Vec<Complex64>>,
}

impl FormFactorSet {
    pub fn new(grid: KGrid, hbar: f64) -> Result<Self> {
        if !(hbar >= 0.0 && hbar.is_finite()) {
            return Err(Error::Parameter(format!("ħ must be ≥ 0, got {hbar}")));
        }
        let (d, lam, kk) = (grid.dim(), grid.cutoff(), grid.threshold());
        let f: Vec<f64> = grid.abs_k().iter().map(|&a| form_factor(d, a, lam)).collect();
        // Strict inequality on the infrared side so that f = f^K − B₀ holds node by node.
        let f_ir: Vec<f64> = grid
            .abs_k()
            .iter()
            .zip(&f)
            .map(|(&a, &v)| if a < kk { v } else { 0.0 })
            .collect();
        let b: Vec<f64> = grid.abs_k().iter().map(|&a| gross_profile(d, a, lam, kk, hbar)).collect();
        Ok(FormFactorSet {
            grid,
            hbar,
            f,
            f_ir,
            b,
            generic: None,
        })
    }

    pub fn with_generic(mut self, profile: Vec<Complex64>) -> Result<Self> {
        self.grid.check_field(&profile)?;
        if profile.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Parameter("generic profile has non-finite values".into()));
        }
        self.generic = Some(profile);
        Ok(self)
    }

    pub fn grid(&self) -> &KGrid {
        &self.grid
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn f(&self) -> &[f64] {
        &self.f
    }
    pub fn f_ir(&self) -> &[f64] {
        &self.f_ir
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn generic(&self) -> Option<&[Complex64]> {
        self.generic.as_deref()
    }

    /// `k_j B(k)` as a real profile.
    pub fn kb(&self, j: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.grid.node(i)[j] * self.b[i]).collect()
    }

    pub fn norm_sq<P: Profile + ?Sized>(&self, profile: &P) -> f64 {
        let w = self.grid.weights();
        self.grid.sum(|i| w[i] * profile.at(i).norm_sqr())
    }

    /// `‖ |k| F ‖`
    pub fn k_norm<P: Profile + ?Sized>(&self, profile: &P) -> f64 {
        let w = self.grid.weights();
        let ak = self.grid.abs_k();
        self.grid.sum(|i| w[i] * ak[i] * ak[i] * profile.at(i).norm_sqr()).sqrt()
    }

    /// Profile values with their node coordinates, one row per node.
    pub fn to_csv(&self) -> String {
        let d = self.grid.dim();
        let mut out = String::new();
        for j in 1..=d {
            let _ = write!(out, "k_{j},");
        }
        out.push_str("abs_k,weight,f,f_ir,b\n");
        for i in 0..self.grid.len() {
            for x in self.grid.node(i) {
                let _ = write!(out, "{x:.17e},");
            }
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.grid.abs_k()[i],
                self.grid.weights()[i],
                self.f[i],
                self.f_ir[i],
                self.b[i]
            );
        }
        out
    }
}

/// `e^{−ik·q}` at every node.
pub fn phases(grid: &KGrid, q: &[f64]) -> Vec<Complex64> {
    (0..grid.len())
        .map(|i| {
            let (s, c) = (-grid.dot(i, q)).sin_cos();
            Complex64::new(c, s)
        })
        .collect()
}

/// `k ↦ e^{−ik·q} F(k)`
pub fn translate<P: Profile + ?Sized>(profile: &P, grid: &KGrid, q: &[f64]) -> Vec<Complex64> {
    phases(grid, q).into_iter().enumerate().map(|(i, e)| e * profile.at(i)).collect()
}

/// `⟨α, G⟩ = Σ w conj(α) G`
pub fn pair(alpha: &[Complex64], g: &[Complex64], grid: &KGrid) -> Result<Complex64> {
    grid.check_field(alpha)?;
    grid.check_field(g)?;
    Ok(field_inner(alpha, g, grid))
}

/// The moments `⟨α, F_q⟩`, `⟨α, k_j F_q⟩` and `⟨α, k_j k_l F_q⟩` in one sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub m0: Complex64,
    pub m1: [Complex64; 3],
    pub m2: [[Complex64; 3]; 3],
}

impl Add for Moments {
    type Output = Moments;
    #[inline]
    fn add(mut self, o: Moments) -> Moments {
        self.m0 += o.m0;
        for j in 0..3 {
            self.m1[j] += o.m1[j];
            for l in 0..3 {
                self.m2[j][l] += o.m2[j][l];
            }
        }
        self
    }
}

/// Moments of `F_q = e^{−ik·q}F` against `α` up to the requested order (0, 1 or 2).
pub fn moments<P: Profile + ?Sized>(
    grid: &KGrid,
    alpha: &[Complex64],
    profile: &P,
    q: &[f64],
    order: usize,
) -> Moments {
    let d = grid.dim();
    let w = grid.weights();
    grid.sum(|i| {
        let fi = profile.at(i);
        let mut m = Moments::default();
        if fi == Complex64::new(0.0, 0.0) {
            return m;
        }
        let (s, c) = (-grid.dot(i, q)).sin_cos();
        let v = alpha[i].conj() * Complex64::new(c, s) * fi * w[i];
        m.m0 = v;
        if order >= 1 {
            let k = grid.node(i);
            for j in 0..d {
                m.m1[j] = v * k[j];
                if order >= 2 {
                    for l in 0..d {
                        m.m2[j][l] = v * (k[j] * k[l]);
                    }
                }
            }
        }
        m
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormScalars {
    pub f_norm_sq: f64,
    pub b_norm_sq: f64,
    pub b_dot_f: f64,
    /// `‖B_ħ‖²/2 + ⟨B_ħ, f⟩`, the constant that makes `U H U* − C` equal the
    /// dressed Hamiltonian.
    pub c_hbar: f64,
}

pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// Radial integrals. The integrand `r^{d−1}·f(r)²` is identically 1.
pub fn closed_form_scalars(params: &ModelParams) -> Result<ClosedFormScalars> {
    params.validate()?;
    let s = sphere_area(params.dim);
    let (lam, kk, h) = (params.cutoff, params.threshold, params.hbar);
    let f_norm_sq = s * lam;
    let (b_norm_sq, b_dot_f) = if h == 0.0 {
        (s * (lam - kk), -s * (lam - kk))
    } else {
        let tol = 1e-15 * (lam - kk).max(1.0);
        let b2 = adaptive_simpson(|r| (1.0 + 0.5 * h * r * r).powi(-2), kk, lam, tol);
        let bf = adaptive_simpson(|r| 1.0 / (1.0 + 0.5 * h * r * r), kk, lam, tol);
        (s * b2, -s * bf)
    };
    Ok(ClosedFormScalars {
        f_norm_sq,
        b_norm_sq,
        b_dot_f,
        c_hbar: 0.5 * b_norm_sq + b_dot_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasespace::GridSpec;

    fn ff1(cutoff: f64, res: usize) -> FormFactorSet {
        let g = KGrid::new(&GridSpec::new(1, cutoff, 1.0_f64.min(cutoff / 2.0), res)).unwrap();
        FormFactorSet::new(g, 0.0).unwrap()
    }

    #[test]
    fn translate_examples() {
        let ff = ff1(2.0, 16);
        let g = ff.grid();
        assert_eq!(translate(ff.f(), g, &[0.0]), ff.f().iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>());
        let t = translate(ff.f(), g, &[0.7]);
        for (a, b) in t.iter().zip(ff.f()) {
            assert!((a.norm() - b).abs() < 1e-15);
        }
        let single = KGrid::from_nodes(1, 2.0, 0.5, &[vec![1.0]], &[1.0]).unwrap();
        let v = translate(&[1.0][..], &single, &[PI]);
        assert!((v[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pair_examples() {
        let ff = ff1(2.0, 64);
        let g = ff.grid();
        let zero = vec![Complex64::new(0.0, 0.0); g.len()];
        let fq = translate(ff.f(), g, &[0.3]);
        assert_eq!(pair(&zero, &fq, g).unwrap(), Complex64::new(0.0, 0.0));
        let self_pair = pair(&fq, &fq, g).unwrap();
        assert!((self_pair.re - ff.norm_sq(ff.f())).abs() < 1e-13 && self_pair.im.abs() < 1e-14);
        let ones = vec![Complex64::new(1.0, 0.0); g.len()];
        let f0 = translate(ff.f(), g, &[0.0]);
        assert!((pair(&ones, &f0, g).unwrap().re - 4.0).abs() <= 4.0 * g.tolerance());
        assert!(pair(&ones[1..], &f0, g).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let c = closed_form_scalars(&ModelParams::new(1, 2.0, 1.0)).unwrap();
        assert_eq!(c.f_norm_sq, 4.0);
        let c = closed_form_scalars(&ModelParams::new(3, 1.0, 0.5)).unwrap();
        assert!((c.f_norm_sq - 4.0 * PI).abs() < 1e-14);
        for d in 1..=3 {
            let c = closed_form_scalars(&ModelParams::new(d, 3.0, 1.0)).unwrap();
            assert_eq!(c.b_norm_sq + c.b_dot_f, 0.0);
        }
    }

    #[test]
    fn closed_form_hbar_matches_antiderivatives() {
        // d = 1: ∫ dr/(1+a r²) = atan(√a r)/√a, ∫ dr/(1+a r²)² = r/(2(1+a r²)) + atan(√a r)/(2√a)
        let h = 0.5;
        let a: f64 = 0.5 * h;
        let (lam, kk) = (2.0, 1.0);
        let c = closed_form_scalars(&ModelParams::new(1, lam, kk).with_hbar(h)).unwrap();
        let i1 = |r: f64| (a.sqrt() * r).atan() / a.sqrt();
        let i2 = |r: f64| r / (2.0 * (1.0 + a * r * r)) + (a.sqrt() * r).atan() / (2.0 * a.sqrt());
        assert!((c.b_dot_f + 2.0 * (i1(lam) - i1(kk))).abs() < 1e-13);
        assert!((c.b_norm_sq - 2.0 * (i2(lam) - i2(kk))).abs() < 1e-13);
        assert!((c.c_hbar - (0.5 * c.b_norm_sq + c.b_dot_f)).abs() < 1e-15);
    }

    #[test]
    fn profile_signs_and_support() {
        for d in 1..=3 {
            let g = KGrid::new(&GridSpec::new(d, 2.0, 1.0, 16).with_tolerance(0.2)).unwrap();
            let ff = FormFactorSet::new(g, 0.3).unwrap();
            for i in 0..ff.grid().len() {
                let a = ff.grid().abs_k()[i];
                assert!(ff.f()[i] > 0.0);
                assert!(ff.b()[i] <= 0.0);
                if a < 1.0 {
                    assert_eq!(ff.b()[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn infrared_split_is_exact() {
        for d in 1..=3 {
            let g = KGrid::new(&GridSpec::new(d, 3.0, 1.3, 20).with_tolerance(0.2)).unwrap();
            let ff = FormFactorSet::new(g, 0.0).unwrap();
            for i in 0..ff.grid().len() {
                assert_eq!(ff.f()[i] - ff.f_ir()[i] + ff.b()[i], 0.0);
            }
        }
    }

    #[test]
    fn moments_match_direct_pairings() {
        let g = KGrid::new(&GridSpec::new(2, 2.0, 1.0, 16).with_tolerance(0.2)).unwrap();
        let ff = FormFactorSet::new(g, 0.0).unwrap();
        let g = ff.grid();
        let alpha: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new((i as f64).sin(), (0.3 * i as f64).cos())).collect();
        let q = [0.4, -1.1];
        let m = moments(g, &alpha, ff.b(), &q, 2);
        let bq = translate(ff.b(), g, &q);
        assert!((m.m0 - field_inner(&alpha, &bq, g)).norm() < 1e-13);
        for j in 0..2 {
            let kbq: Vec<Complex64> = (0..g.len()).map(|i| bq[i] * g.node(i)[j]).collect();
            assert!((m.m1[j] - field_inner(&alpha, &kbq, g)).norm() < 1e-13);
            for l in 0..2 {
                let kkbq: Vec<Complex64> = (0..g.len()).map(|i| bq[i] * g.node(i)[j] * g.node(i)[l]).collect();
                assert!((m.m2[j][l] - field_inner(&alpha, &kkbq, g)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let ff = ff1(2.0, 4);
        let csv = ff.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k_1,abs_k,weight,f,f_ir,b");
        assert_eq!(lines.len(), 5);
    }
}
