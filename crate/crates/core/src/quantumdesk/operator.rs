use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::expm::{dotc, norm};
use crate::error::{Error, Result};

type C = Complex64;

/// Amplitudes `Ψ[j, n]` on (particle grid point `j`) ⊗ (Fock basis state `n`).
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    pub amps: DMatrix<C>,
}

impl QuantumState {
    pub fn new(amps: DMatrix<C>) -> Self {
        QuantumState { amps }
    }

    /// Product state `φ ⊗ χ`.
    pub fn product(particle: &DVector<C>, field: &DVector<C>) -> Self {
        QuantumState {
            amps: particle * field.transpose(),
        }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.amps /= C::new(n, 0.0);
        }
        self
    }

    pub fn inner(&self, other: &QuantumState) -> C {
        dotc(&self.amps, &other.amps)
    }

    /// `|⟨a, b⟩|²` for normalized states.
    pub fn fidelity(&self, other: &QuantumState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Row-major flattening `j·n_f + n`, matching `kron(A, B)`.
    pub fn to_flat(&self) -> DVector<C> {
        let (nx, nf) = self.amps.shape();
        DVector::from_fn(nx * nf, |i, _| self.amps[(i / nf, i % nf)])
    }

    pub fn from_flat(v: &DVector<C>, n_x: usize, n_f: usize) -> Self {
        QuantumState {
            amps: DMatrix::from_fn(n_x, n_f, |j, n| v[j * n_f + n]),
        }
    }
}

#[derive(Clone, Debug)]
pub enum ParticleFactor {
    Identity,
    Diagonal(DVector<C>),
    Dense(DMatrix<C>),
}

impl ParticleFactor {
    fn to_dense(&self, n: usize) -> DMatrix<C> {
        match self {
            ParticleFactor::Identity => DMatrix::identity(n, n),
            ParticleFactor::Diagonal(d) => DMatrix::from_diagonal(d),
            ParticleFactor::Dense(m) => m.clone(),
        }
    }

    fn adjoint(&self) -> ParticleFactor {
        match self {
            ParticleFactor::Identity => ParticleFactor::Identity,
            ParticleFactor::Diagonal(d) => ParticleFactor::Diagonal(d.map(|z| z.conj())),
            ParticleFactor::Dense(m) => ParticleFactor::Dense(m.adjoint()),
        }
    }
}

/// `A ⊗ B` with `B = None` meaning identity on the Fock factor.
#[derive(Clone, Debug)]
pub struct KronTerm {
    particle: ParticleFactor,
    field: Option<DMatrix<C>>,
    // Bᵀ, cached for the right multiplication Ψ·Bᵀ
    field_t: Option<DMatrix<C>>,
}

impl KronTerm {
    pub fn new(particle: ParticleFactor, field: Option<DMatrix<C>>) -> Self {
        let field_t = field.as_ref().map(|b| b.transpose());
        KronTerm { particle, field, field_t }
    }

    fn apply_into(&self, psi: &DMatrix<C>, out: &mut DMatrix<C>) {
        let left = match &self.particle {
            ParticleFactor::Identity => None,
            ParticleFactor::Diagonal(d) => {
                let mut m = psi.clone();
                for (j, mut row) in m.row_iter_mut().enumerate() {
                    row *= d[j];
                }
                Some(m)
            }
            ParticleFactor::Dense(a) => Some(a * psi),
        };
        let left_ref = left.as_ref().unwrap_or(psi);
        match &self.field_t {
            None => *out += left_ref,
            Some(bt) => out.gemm(C::new(1.0, 0.0), left_ref, bt, C::new(1.0, 0.0)),
        }
    }

    fn adjoint(&self) -> KronTerm {
        KronTerm::new(self.particle.adjoint(), self.field.as_ref().map(|b| b.adjoint()))
    }
}

/// A sum of Kronecker products acting on `n_x × n_f` amplitude matrices.
#[derive(Clone, Debug)]
pub struct QuantumOperator {
    n_x: usize,
    n_f: usize,
    terms: Vec<KronTerm>,
}

impl QuantumOperator {
    pub fn zero(n_x: usize, n_f: usize) -> Self {
        QuantumOperator {
            n_x,
            n_f,
            terms: Vec::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_x, self.n_f)
    }

    pub fn dim(&self) -> usize {
        self.n_x * self.n_f
    }

    pub fn terms(&self) -> usize {
        self.terms.len()
    }

    pub fn push(&mut self, particle: ParticleFactor, field: Option<DMatrix<C>>) {
        self.terms.push(KronTerm::new(particle, field));
    }

    pub fn add(mut self, other: &QuantumOperator) -> Self {
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn scale(mut self, c: C) -> Self {
        for t in &mut self.terms {
            t.particle = match std::mem::replace(&mut t.particle, ParticleFactor::Identity) {
                ParticleFactor::Identity => ParticleFactor::Diagonal(DVector::from_element(self.n_x, c)),
                ParticleFactor::Diagonal(d) => ParticleFactor::Diagonal(d * c),
                ParticleFactor::Dense(m) => ParticleFactor::Dense(m * c),
            };
        }
        self
    }

    pub fn adjoint(&self) -> Self {
        QuantumOperator {
            n_x: self.n_x,
            n_f: self.n_f,
            terms: self.terms.iter().map(|t| t.adjoint()).collect(),
        }
    }

    pub fn apply_amps(&self, psi: &DMatrix<C>) -> DMatrix<C> {
        let mut out = DMatrix::<C>::zeros(self.n_x, self.n_f);
        for t in &self.terms {
            t.apply_into(psi, &mut out);
        }
        out
    }

    pub fn apply(&self, psi: &QuantumState) -> Result<QuantumState> {
        if psi.amps.shape() != (self.n_x, self.n_f) {
            return Err(Error::Dimension(format!(
                "state shape {:?} vs operator shape {:?}",
                psi.amps.shape(),
                (self.n_x, self.n_f)
            )));
        }
        Ok(QuantumState::new(self.apply_amps(&psi.amps)))
    }

    pub fn expectation(&self, psi: &QuantumState) -> Result<C> {
        Ok(psi.inner(&self.apply(psi)?))
    }

    /// Dense matrix in the `kron` ordering. Only for small lattices.
    pub fn to_dense(&self) -> DMatrix<C> {
        let n = self.dim();
        let mut out = DMatrix::<C>::zeros(n, n);
        for t in &self.terms {
            let a = t.particle.to_dense(self.n_x);
            let b = t.field.clone().unwrap_or_else(|| DMatrix::identity(self.n_f, self.n_f));
            out += a.kronecker(&b);
        }
        out
    }

    /// `max |⟨x, Hy⟩ − ⟨Hx, y⟩|` over a few deterministic probe pairs,
    /// relative to `‖Hx‖‖y‖`.
    pub fn hermiticity_residual(&self) -> f64 {
        let probe = |seed: usize| {
            DMatrix::from_fn(self.n_x, self.n_f, |j, n| {
                let a = ((j * 131 + n * 71 + seed * 17) as f64 * 0.618).sin();
                let b = ((j * 37 + n * 113 + seed * 29) as f64 * 0.414).cos();
                C::new(a, b)
            })
        };
        let mut worst: f64 = 0.0;
        for s in 0..3 {
            let x = probe(2 * s);
            let y = probe(2 * s + 1);
            let hx = self.apply_amps(&x);
            let hy = self.apply_amps(&y);
            let gap = (dotc(&x, &hy) - dotc(&hx, &y)).norm();
            let scale = norm(&hx).max(norm(&hy)) * norm(&x).max(norm(&y));
            worst = worst.max(gap / scale.max(1e-300));
        }
        worst
    }
}
