//! Matrix exponentials: a dense Taylor scaling-and-squaring path for small
//! matrices and a Lanczos path for `e^{−iτH}v` with Hermitian `H`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

fn one_norm(a: &DMatrix<C>) -> f64 {
    (0..a.ncols()).map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `e^A` by Taylor series on `A/2^s` followed by `s` squarings.
pub fn expm(a: &DMatrix<C>) -> Result<DMatrix<C>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("expm needs a square matrix".into()));
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::Exponential(format!("matrix has non-finite 1-norm {norm}")));
    }
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a * C::new(0.5f64.powi(s), 0.0);
    let mut result = DMatrix::<C>::identity(n, n);
    let mut term = DMatrix::<C>::identity(n, n);
    for k in 1..=40 {
        term = &term * &scaled / C::new(k as f64, 0.0);
        result += &term;
        if one_norm(&term) <= 1e-18 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    if result.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Exponential(format!("scaling-and-squaring diverged (‖A‖₁ = {norm:.3e}, s = {s})")));
    }
    Ok(result)
}

/// Inner product on flattened amplitude matrices.
#[inline]
pub fn dotc(a: &DMatrix<C>, b: &DMatrix<C>) -> C {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm(a: &DMatrix<C>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    pub max_dim: usize,
    pub tolerance: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            max_dim: 30,
            tolerance: 1e-13,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct KrylovStats {
    pub substeps: usize,
    pub matvecs: usize,
}

/// `e^{−iτH} v` for Hermitian `H` given as a matrix-vector product.
pub fn expm_hermitian_apply<F>(
    apply: F,
    v: &DMatrix<C>,
    tau: f64,
    opts: KrylovOptions,
) -> Result<(DMatrix<C>, KrylovStats)>
where
    F: Fn(&DMatrix<C>) -> DMatrix<C>,
{
    let mut stats = KrylovStats::default();
    let mut state = v.clone();
    let total = norm(v);
    if tau == 0.0 || total == 0.0 {
        return Ok((state, stats));
    }
    let dim = v.len();
    let m_max = opts.max_dim.min(dim).max(1);
    let mut remaining = tau.abs();
    let sign = tau.signum();
    let mut trial = remaining;

    while remaining > 0.0 {
        let beta0 = norm(&state);
        let mut basis: Vec<DMatrix<C>> = Vec::with_capacity(m_max + 1);
        basis.push(&state / C::new(beta0, 0.0));
        let mut alphas = Vec::with_capacity(m_max);
        let mut betas: Vec<f64> = Vec::with_capacity(m_max);
        let mut happy = false;
        for j in 0..m_max {
            let mut w = apply(&basis[j]);
            stats.matvecs += 1;
            let a = dotc(&basis[j], &w).re;
            alphas.push(a);
            // two passes of full reorthogonalization
            for _ in 0..2 {
                for b in &basis {
                    let c = dotc(b, &w);
                    w -= b * c;
                }
            }
            let bnext = norm(&w);
            if !bnext.is_finite() {
                return Err(Error::Exponential("Krylov recursion produced a non-finite vector".into()));
            }
            let scale = a.abs().max(betas.last().copied().unwrap_or(0.0)).max(1e-300);
            if bnext <= 1e-13 * scale {
                happy = true;
                break;
            }
            betas.push(bnext);
            if j + 1 < m_max {
                basis.push(&w / C::new(bnext, 0.0));
            }
        }
        let m = alphas.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let residual_beta = if happy { 0.0 } else { betas.get(m - 1).copied().unwrap_or(0.0) };

        // first column of e^{−iστT}
        let small_exp = |step: f64| -> DVector<C> {
            let q = &eig.eigenvectors;
            DVector::from_iterator(
                m,
                (0..m).map(|r| {
                    (0..m)
                        .map(|c| {
                            let ph = C::from_polar(1.0, -sign * step * eig.eigenvalues[c]);
                            ph * q[(r, c)] * q[(0, c)]
                        })
                        .sum::<C>()
                }),
            )
        };

        let mut step = trial.min(remaining);
        let y = loop {
            let y = small_exp(step);
            let err = residual_beta * y[m - 1].norm() * beta0;
            if happy || err <= opts.tolerance * total.max(1.0) * (step / tau.abs()).max(1e-3) {
                break y;
            }
            step *= 0.5;
            if step < 1e-14 * tau.abs() {
                return Err(Error::Exponential(format!(
                    "Krylov step collapsed (β = {residual_beta:.3e}, m = {m})"
                )));
            }
        };
        let mut next = DMatrix::<C>::zeros(v.nrows(), v.ncols());
        for (i, b) in basis.iter().take(m).enumerate() {
            next += b * (y[i] * beta0);
        }
        state = next;
        stats.substeps += 1;
        remaining -= step;
        if remaining < 1e-15 * tau.abs() {
            remaining = 0.0;
        }
        trial = if happy { remaining } else { 2.0 * step };
    }
    Ok((state, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(n: usize, seed: u64) -> DMatrix<C> {
        // deterministic pseudo-random Hermitian matrix
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| C::new(next(), next()));
        (&a + a.adjoint()) * C::new(0.5, 0.0)
    }

    #[test]
    fn expm_is_unitary_for_antihermitian() {
        let h = herm(12, 3) * C::new(5.0, 0.0);
        let u = expm(&(h * C::new(0.0, -1.0))).unwrap();
        let err = (&u.adjoint() * &u - DMatrix::<C>::identity(12, 12)).norm();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn expm_of_nilpotent_and_diagonal() {
        let mut n = DMatrix::<C>::zeros(2, 2);
        n[(0, 1)] = C::new(3.0, 0.0);
        let e = expm(&n).unwrap();
        assert!((e[(0, 1)] - C::new(3.0, 0.0)).norm() < 1e-15);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![C::new(2.0, 0.0), C::new(0.0, 1.0)]));
        let e = expm(&d).unwrap();
        assert!((e[(0, 0)] - C::new(2f64.exp(), 0.0)).norm() < 1e-12);
        assert!((e[(1, 1)] - C::from_polar(1.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn krylov_matches_dense() {
        let n = 60;
        let h = herm(n, 7) * C::new(4.0, 0.0);
        let v = DMatrix::from_fn(n, 1, |i, _| C::new((i as f64).sin(), (0.3 * i as f64).cos()));
        for tau in [0.0, 0.7, -3.0, 12.0] {
            let dense = expm(&(&h * C::new(0.0, -tau))).unwrap() * &v;
            let (kr, _) = expm_hermitian_apply(|x| &h * x, &v, tau, KrylovOptions::default()).unwrap();
            assert!((kr - dense).norm() < 1e-10, "tau = {tau}");
        }
    }

    #[test]
    fn krylov_happy_breakdown_is_exact() {
        let h = DMatrix::<C>::identity(5, 5) * C::new(2.0, 0.0);
        let v = DMatrix::from_element(5, 1, C::new(1.0, 0.0));
        let (out, stats) = expm_hermitian_apply(|x| &h * x, &v, 1.5, KrylovOptions::default()).unwrap();
        assert_eq!(stats.substeps, 1);
        for z in out.iter() {
            assert!((z - C::from_polar(1.0, -3.0)).norm() < 1e-14);
        }
    }
}
