//! Discretized classical phase space `R^{2d} ⊕ L²`.
//!
//! Momentum space is sampled by a cell-centred Cartesian grid restricted to
//! the ball `|k| ≤ Λ`. Nodes come in exact mirror pairs `(k, −k)`; every
//! reduction over the grid goes through [`KGrid::sum`], which adds the two
//! members of a pair before accumulating so that odd moments of even
//! profiles cancel to the last bit.

use std::f64::consts::PI;
use std::ops::Add;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_TOLERANCE: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub cutoff: f64,
    pub threshold: f64,
    pub resolution: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_GRID_TOLERANCE
}

impl GridSpec {
    pub fn new(dim: usize, cutoff: f64, threshold: f64, resolution: usize) -> Self {
        GridSpec {
            dim,
            cutoff,
            threshold,
            resolution,
            tolerance: DEFAULT_GRID_TOLERANCE,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_model(self.dim, self.cutoff, self.threshold)?;
        if self.resolution < 2 {
            return Err(Error::Parameter(format!(
                "resolution must be at least 2, got {}",
                self.resolution
            )));
        }
        if self.resolution % 2 != 0 {
            // An odd resolution puts a node at the origin where the form factor blows up.
            return Err(Error::Parameter(format!(
                "resolution must be even so that no node sits at k = 0, got {}",
                self.resolution
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Parameter("grid tolerance must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_model(dim: usize, cutoff: f64, threshold: f64) -> Result<()> {
    if !(1..=3).contains(&dim) {
        return Err(Error::Parameter(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    if !(cutoff.is_finite() && cutoff > 0.0) {
        return Err(Error::Parameter(format!("cutoff must be positive and finite, got {cutoff}")));
    }
    if !(threshold > 0.0 && threshold < cutoff) {
        return Err(Error::Parameter(format!(
            "threshold K must satisfy 0 < K < Λ, got K = {threshold}, Λ = {cutoff}"
        )));
    }
    Ok(())
}

/// Volume of the d-ball of radius `r`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0 * r,
        2 => PI * r * r,
        3 => 4.0 * PI * r * r * r / 3.0,
        _ => f64::NAN,
    }
}

#[derive(Clone, Debug)]
pub struct KGrid {
    dim: usize,
    cutoff: f64,
    threshold: f64,
    k: Vec<f64>,
    abs_k: Vec<f64>,
    weights: Vec<f64>,
    mirror: bool,
    tolerance: f64,
    volume_error: f64,
}

impl KGrid {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.dim;
        let n = spec.resolution;
        let h = 2.0 * spec.cutoff / n as f64;
        let cell = h.powi(d as i32);
        let r2 = spec.cutoff * spec.cutoff;
        // Centre of cell i along one axis; (i + 1/2 − n/2) is an exact half-integer
        // so mirror nodes are exact negatives of each other.
        let axis: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) - 0.5 * n as f64) * h).collect();

        // Lexicographic order with the first axis outermost: the mirror of the
        // t-th cell is the (n^d − 1 − t)-th, and the ball filter keeps pairs together.
        let mut k = Vec::new();
        let mut node = vec![0.0; d];
        for t in 0..n.pow(d as u32) {
            let mut r = t;
            for a in (0..d).rev() {
                node[a] = axis[r % n];
                r /= n;
            }
            if node.iter().map(|x| x * x).sum::<f64>() <= r2 {
                k.extend_from_slice(&node);
            }
        }
        let len = k.len() / d;
        let weights = vec![cell; len];
        let mut grid = KGrid::assemble(d, spec.cutoff, spec.threshold, k, weights, spec.tolerance)?;
        if !grid.mirror {
            return Err(Error::Parameter("grid construction lost mirror symmetry".into()));
        }
        let vol = ball_volume(d, spec.cutoff);
        grid.volume_error = (grid.total_weight() - vol).abs() / vol;
        if grid.volume_error > spec.tolerance {
            return Err(Error::GridTolerance {
                error: grid.volume_error,
                tolerance: spec.tolerance,
            });
        }
        Ok(grid)
    }

    /// A grid made of explicitly chosen nodes, e.g. a handful of field modes
    /// for the quantum desk. Mirror symmetry is detected, not assumed.
    pub fn from_nodes(
        dim: usize,
        cutoff: f64,
        threshold: f64,
        nodes: &[Vec<f64>],
        weights: &[f64],
    ) -> Result<Self> {
        check_model(dim, cutoff, threshold)?;
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::Dimension(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        let mut k = Vec::with_capacity(nodes.len() * dim);
        for node in nodes {
            if node.len() != dim {
                return Err(Error::Dimension(format!("node of length {} in dimension {dim}", node.len())));
            }
            k.extend_from_slice(node);
        }
        KGrid::assemble(dim, cutoff, threshold, k, weights.to_vec(), f64::INFINITY)
    }

    fn assemble(
        dim: usize,
        cutoff: f64,
        threshold: f64,
        k: Vec<f64>,
        weights: Vec<f64>,
        tolerance: f64,
    ) -> Result<Self> {
        let len = weights.len();
        let abs_k: Vec<f64> = k.chunks(dim).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        for (i, (&a, &w)) in abs_k.iter().zip(&weights).enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Parameter(format!("weight {i} is not positive: {w}")));
            }
            if a == 0.0 || a > cutoff * (1.0 + 1e-12) {
                return Err(Error::Parameter(format!("node {i} has |k| = {a} outside (0, Λ]")));
            }
        }
        let mirror = len % 2 == 0
            && (0..len / 2).all(|i| {
                let j = len - 1 - i;
                weights[i] == weights[j]
                    && (0..dim).all(|a| k[i * dim + a] == -k[j * dim + a])
            });
        Ok(KGrid {
            dim,
            cutoff,
            threshold,
            k,
            abs_k,
            weights,
            mirror,
            tolerance,
            volume_error: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
    pub fn node(&self, i: usize) -> &[f64] {
        &self.k[i * self.dim..(i + 1) * self.dim]
    }
    pub fn abs_k(&self) -> &[f64] {
        &self.abs_k
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn is_mirror_symmetric(&self) -> bool {
        self.mirror
    }
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
    /// Relative deviation of Σw from the ball volume, as measured at construction.
    pub fn volume_error(&self) -> f64 {
        self.volume_error
    }
    pub fn total_weight(&self) -> f64 {
        self.sum(|i| self.weights[i])
    }

    /// `k · x` at node `i`.
    #[inline]
    pub fn dot(&self, i: usize, x: &[f64]) -> f64 {
        self.node(i).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Sum `term(i)` over all nodes, pairing mirror cells first.
    #[inline]
    pub fn sum<T, F>(&self, mut term: F) -> T
    where
        T: Default + Add<Output = T>,
        F: FnMut(usize) -> T,
    {
        let n = self.len();
        let mut acc = T::default();
        if self.mirror {
            for i in 0..n / 2 {
                let a = term(i);
                let b = term(n - 1 - i);
                acc = acc + (a + b);
            }
        } else {
            for i in 0..n {
                acc = acc + term(i);
            }
        }
        acc
    }

    pub fn check_field(&self, alpha: &[Complex64]) -> Result<()> {
        if alpha.len() != self.len() {
            return Err(Error::Dimension(format!(
                "field has {} values, grid has {} nodes",
                alpha.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Field `k ↦ value(k)` tabulated on the nodes.
    pub fn tabulate<F: Fn(&[f64]) -> Complex64>(&self, value: F) -> Vec<Complex64> {
        (0..self.len()).map(|i| value(self.node(i))).collect()
    }
}

/// Regularity weight `⟨k⟩^s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    s: f64,
}

impl WeightSpec {
    pub fn new(s: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Parameter(format!("regularity exponent must be ≥ 0, got {s}")));
        }
        Ok(WeightSpec { s })
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    /// `⟨k⟩^{2s}` for a given `|k|`.
    #[inline]
    pub fn bracket_sq(&self, abs_k: f64) -> f64 {
        (1.0 + abs_k * abs_k).powf(self.s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlatRecord", into = "FlatRecord")]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub alpha: Vec<Complex64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>, alpha: Vec<Complex64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Dimension(format!("q has {} components, p has {}", q.len(), p.len())));
        }
        Ok(PhasePoint { q, p, alpha })
    }

    pub fn zeros(grid: &KGrid) -> Self {
        PhasePoint {
            q: vec![0.0; grid.dim()],
            p: vec![0.0; grid.dim()],
            alpha: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn check(&self, grid: &KGrid) -> Result<()> {
        if self.q.len() != grid.dim() || self.p.len() != grid.dim() {
            return Err(Error::Dimension(format!(
                "state has dimension {}, grid has {}",
                self.q.len(),
                grid.dim()
            )));
        }
        grid.check_field(&self.alpha)
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite())
            && self.alpha.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// `self += c · other`
    pub fn axpy(&mut self, c: f64, other: &PhasePoint) {
        for (a, b) in self.q.iter_mut().zip(&other.q) {
            *a += c * b;
        }
        for (a, b) in self.p.iter_mut().zip(&other.p) {
            *a += c * b;
        }
        for (a, b) in self.alpha.iter_mut().zip(&other.alpha) {
            *a += b * c;
        }
    }

    pub fn scaled(&self, c: f64) -> PhasePoint {
        PhasePoint {
            q: self.q.iter().map(|x| c * x).collect(),
            p: self.p.iter().map(|x| c * x).collect(),
            alpha: self.alpha.iter().map(|x| x * c).collect(),
        }
    }

    pub fn sub(&self, other: &PhasePoint) -> PhasePoint {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &PhasePoint) -> PhasePoint {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// Flat record `q, p, Re α₀, Im α₀, Re α₁, …`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.q.len() + 2 * self.alpha.len());
        out.extend_from_slice(&self.q);
        out.extend_from_slice(&self.p);
        for a in &self.alpha {
            out.push(a.re);
            out.push(a.im);
        }
        out
    }

    pub fn from_flat(dim: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() < 2 * dim || (flat.len() - 2 * dim) % 2 != 0 {
            return Err(Error::Dimension(format!(
                "flat record of length {} does not fit dimension {dim}",
                flat.len()
            )));
        }
        let q = flat[..dim].to_vec();
        let p = flat[dim..2 * dim].to_vec();
        let alpha = flat[2 * dim..].chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Ok(PhasePoint { q, p, alpha })
    }
}

#[derive(Serialize, Deserialize)]
struct FlatRecord {
    q: Vec<f64>,
    p: Vec<f64>,
    alpha: Vec<f64>,
}

impl TryFrom<FlatRecord> for PhasePoint {
    type Error = Error;
    fn try_from(r: FlatRecord) -> Result<Self> {
        if r.alpha.len() % 2 != 0 {
            return Err(Error::Dimension("interleaved field must have even length".into()));
        }
        let alpha = r.alpha.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        PhasePoint::new(r.q, r.p, alpha)
    }
}

impl From<PhasePoint> for FlatRecord {
    fn from(u: PhasePoint) -> Self {
        let alpha = u.alpha.iter().flat_map(|a| [a.re, a.im]).collect();
        FlatRecord { q: u.q, p: u.p, alpha }
    }
}

/// `‖α‖² = Σ w |α|²`
pub fn field_norm_sq(alpha: &[Complex64], grid: &KGrid) -> f64 {
    let w = grid.weights();
    grid.sum(|i| w[i] * alpha[i].norm_sqr())
}

/// `⟨α, β⟩ = Σ w conj(α) β`, antilinear in the first slot.
pub fn field_inner(alpha: &[Complex64], beta: &[Complex64], grid: &KGrid) -> Complex64 {
    let w = grid.weights();
    grid.sum(|i| alpha[i].conj() * beta[i] * w[i])
}

pub fn h_norm(u: &PhasePoint, grid: &KGrid) -> Result<f64> {
    u.check(grid)?;
    let particle: f64 = u.q.iter().chain(&u.p).map(|x| x * x).sum();
    Ok((particle + field_norm_sq(&u.alpha, grid)).sqrt())
}

/// Real inner product `Re⟨z₁,z₂⟩ + Re⟨α₁,α₂⟩` with `z = q + ip`.
pub fn real_inner(u1: &PhasePoint, u2: &PhasePoint, grid: &KGrid) -> Result<f64> {
    u1.check(grid)?;
    u2.check(grid)?;
    let z: f64 = u1.q.iter().zip(&u2.q).map(|(a, b)| a * b).sum::<f64>()
        + u1.p.iter().zip(&u2.p).map(|(a, b)| a * b).sum::<f64>();
    Ok(z + field_inner(&u1.alpha, &u2.alpha, grid).re)
}

/// `σ(u₁,u₂) = Im⟨z₁,z₂⟩ + 2 Im⟨α₁,α₂⟩`.
pub fn symplectic_form(u1: &PhasePoint, u2: &PhasePoint, grid: &KGrid) -> Result<f64> {
    u1.check(grid)?;
    u2.check(grid)?;
    // Im(conj(q₁ + ip₁)(q₂ + ip₂)) = q₁p₂ − p₁q₂
    let z: f64 = (0..u1.dim()).map(|j| u1.q[j] * u2.p[j] - u1.p[j] * u2.q[j]).sum();
    Ok(z + 2.0 * field_inner(&u1.alpha, &u2.alpha, grid).im)
}

pub fn weighted_norm(alpha: &[Complex64], grid: &KGrid, weight: WeightSpec) -> Result<f64> {
    grid.check_field(alpha)?;
    let w = grid.weights();
    let ak = grid.abs_k();
    Ok(grid.sum(|i| w[i] * weight.bracket_sq(ak[i]) * alpha[i].norm_sqr()).sqrt())
}

/// Sup-norm distance used by the fixed-point solvers.
pub fn sup_distance(u1: &PhasePoint, u2: &PhasePoint) -> f64 {
    let a = u1.q.iter().zip(&u2.q).chain(u1.p.iter().zip(&u2.p)).map(|(a, b)| (a - b).abs());
    let b = u1.alpha.iter().zip(&u2.alpha).map(|(a, b)| (a - b).norm());
    a.chain(b).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid1(cutoff: f64, res: usize) -> KGrid {
        KGrid::new(&GridSpec::new(1, cutoff, 0.5 * cutoff, res)).unwrap()
    }

    #[test]
    fn midpoint_nodes_in_one_dimension() {
        let g = grid1(2.0, 4);
        let nodes: Vec<f64> = (0..g.len()).map(|i| g.node(i)[0]).collect();
        assert_eq!(nodes, vec![-1.5, -0.5, 0.5, 1.5]);
        assert!(g.weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn weights_tile_the_interval() {
        for n in [2, 6, 10, 64, 130] {
            let g = grid1(2.0, n);
            assert!((g.total_weight() - 4.0).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn three_dimensional_ball_volume() {
        let g = KGrid::new(&GridSpec::new(3, 1.0, 0.5, 64)).unwrap();
        let vol = 4.0 * PI / 3.0;
        assert!((g.total_weight() - vol).abs() / vol <= 0.02);
        assert!(g.is_mirror_symmetric());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(KGrid::new(&GridSpec::new(1, 1.0, 1.0, 8)), Err(Error::Parameter(_))));
        assert!(matches!(KGrid::new(&GridSpec::new(1, 1.0, 2.0, 8)), Err(Error::Parameter(_))));
        assert!(KGrid::new(&GridSpec::new(4, 1.0, 0.5, 8)).is_err());
        assert!(KGrid::new(&GridSpec::new(1, 1.0, 0.5, 7)).is_err());
        assert!(KGrid::new(&GridSpec::new(1, 1.0, 0.5, 1)).is_err());
        // a coarse 3-d ball misses the declared tolerance
        assert!(matches!(
            KGrid::new(&GridSpec::new(3, 1.0, 0.5, 4)),
            Err(Error::GridTolerance { .. })
        ));
    }

    #[test]
    fn h_norm_examples() {
        let g = KGrid::new(&GridSpec::new(3, 1.0, 0.5, 16).with_tolerance(0.2)).unwrap();
        let mut u = PhasePoint::zeros(&g);
        assert_eq!(h_norm(&u, &g).unwrap(), 0.0);
        u.q = vec![3.0, 4.0, 0.0];
        assert_eq!(h_norm(&u, &g).unwrap(), 5.0);

        let g = grid1(2.0, 64);
        let mut u = PhasePoint::zeros(&g);
        u.alpha.iter_mut().for_each(|a| *a = c(1.0, 0.0));
        assert!((h_norm(&u, &g).unwrap() - 2.0).abs() <= 2.0 * g.tolerance());
    }

    #[test]
    fn h_norm_dimension_error() {
        let g = grid1(2.0, 8);
        let u = PhasePoint::new(vec![0.0], vec![0.0], vec![c(0.0, 0.0); 3]).unwrap();
        assert!(matches!(h_norm(&u, &g), Err(Error::Dimension(_))));
    }

    #[test]
    fn symplectic_examples() {
        let g = grid1(1.0, 32);
        let mut e1 = PhasePoint::zeros(&g);
        e1.q[0] = 1.0;
        let mut f1 = PhasePoint::zeros(&g);
        f1.p[0] = 1.0;
        assert_eq!(symplectic_form(&e1, &f1, &g).unwrap(), 1.0);
        assert_eq!(symplectic_form(&e1, &e1, &g).unwrap(), 0.0);

        let mut a1 = PhasePoint::zeros(&g);
        a1.alpha.iter_mut().for_each(|a| *a = c(0.0, 1.0));
        let mut a2 = PhasePoint::zeros(&g);
        a2.alpha.iter_mut().for_each(|a| *a = c(1.0, 0.0));
        let s = symplectic_form(&a1, &a2, &g).unwrap();
        assert!((s + 4.0).abs() <= 4.0 * g.tolerance());
    }

    #[test]
    fn weighted_norm_examples() {
        let g = grid1(1.0, 256);
        let ones = vec![c(1.0, 0.0); g.len()];
        let got = weighted_norm(&ones, &g, WeightSpec::new(1.0).unwrap()).unwrap();
        let want = (8.0f64 / 3.0).sqrt();
        assert!((got - want).abs() / want < 1e-4);
        let zero = vec![c(0.0, 0.0); g.len()];
        assert_eq!(weighted_norm(&zero, &g, WeightSpec::new(2.0).unwrap()).unwrap(), 0.0);
        let s0 = weighted_norm(&ones, &g, WeightSpec::new(0.0).unwrap()).unwrap();
        assert!((s0 - field_norm_sq(&ones, &g).sqrt()).abs() < 1e-14);
        assert!(WeightSpec::new(-0.5).is_err());
    }

    #[test]
    fn odd_moment_of_even_profile_cancels_exactly() {
        for d in 1..=3 {
            let g = KGrid::new(&GridSpec::new(d, 2.0, 1.0, 24).with_tolerance(0.1)).unwrap();
            for j in 0..d {
                let w = g.weights();
                let ak = g.abs_k();
                let m: f64 = g.sum(|i| w[i] * g.node(i)[j] * (1.0 / (1.0 + ak[i])).powi(2));
                assert_eq!(m, 0.0);
            }
        }
    }

    #[test]
    fn flat_round_trip() {
        let u = PhasePoint::new(vec![1.0, 2.0], vec![3.0, 4.0], vec![c(5.0, 6.0), c(7.0, 8.0)]).unwrap();
        let flat = u.to_flat();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(PhasePoint::from_flat(2, &flat).unwrap(), u);
        assert!(PhasePoint::from_flat(2, &flat[..7]).is_err());
    }

    #[test]
    fn from_nodes_detects_asymmetry() {
        let g = KGrid::from_nodes(1, 2.0, 1.0, &[vec![1.5]], &[0.125]).unwrap();
        assert!(!g.is_mirror_symmetric());
        let g = KGrid::from_nodes(1, 2.0, 1.0, &[vec![-1.5], vec![1.5]], &[0.125, 0.125]).unwrap();
        assert!(g.is_mirror_symmetric());
        assert!(KGrid::from_nodes(1, 2.0, 1.0, &[vec![0.0]], &[1.0]).is_err());
    }
}
