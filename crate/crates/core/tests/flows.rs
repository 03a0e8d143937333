//! Long-run properties of the classical flows.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use polaron_core::dynamics::{
    growth_constant, integrate, symbol_m, vector_field, Drive, FlowConfig, Frame, Integrator, System, Trajectory,
};
use polaron_core::formfactor::FormFactorSet;
use polaron_core::phasespace::{field_norm_sq, h_norm, real_inner, weighted_norm, GridSpec, KGrid, PhasePoint, WeightSpec};
use polaron_core::sampling::{random_state, smooth_field, StateScale};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ff1(cutoff: f64, res: usize) -> FormFactorSet {
    let g = KGrid::new(&GridSpec::new(1, cutoff, 1.0, res)).unwrap();
    FormFactorSet::new(g, 0.0).unwrap()
}

fn start(ff: &FormFactorSet, seed: u64) -> PhasePoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = PhasePoint::zeros(ff.grid());
    u.p = vec![1.0];
    u.alpha = smooth_field(&mut rng, ff.grid(), 0.3);
    u
}

fn run(ff: &FormFactorSet, system: System, integ: Integrator, dt: f64, t: f64, u: &PhasePoint) -> Trajectory {
    integrate(&FlowConfig::new(system, integ, dt, t), ff, u).unwrap()
}

fn drift(tr: &Trajectory) -> f64 {
    let e0 = tr.energies[0].value;
    tr.energies.iter().map(|e| (e.value - e0).abs()).fold(0.0, f64::max)
}

#[test]
fn energy_drift_orders_match_nominal() {
    let ff = ff1(2.0, 32);
    let u = start(&ff, 11);
    let cases = [
        (System::Undressed, Integrator::Strang, 2.0, [0.04, 0.02]),
        (System::Undressed, Integrator::Rk4, 4.0, [0.04, 0.02]),
        (System::Dressed, Integrator::Rk4, 4.0, [0.04, 0.02]),
        (System::Dressed, Integrator::Strang, 2.0, [0.04, 0.02]),
    ];
    for (system, integ, nominal, dts) in cases {
        let d: Vec<f64> = dts.iter().map(|&dt| drift(&run(&ff, system.clone(), integ, dt, 2.0, &u))).collect();
        let order = (d[0] / d[1]).log2();
        assert!((order - nominal).abs() <= 0.3, "{system:?} {integ:?}: {d:?} order {order}");
    }
    // the dressing functional is conserved exactly along its own flow
    let tr = run(&ff, System::Dressing, Integrator::Strang, 0.1, 2.0, &u);
    assert!(drift(&tr) < 1e-13);
}

#[test]
fn a_priori_bound_over_long_horizon() {
    let ff = ff1(2.0, 32);
    let u = start(&ff, 12);
    let tr = integrate(&FlowConfig::new(System::Undressed, Integrator::Strang, 0.01, 50.0).every(10), &ff, &u).unwrap();
    let e0 = tr.energies[0].value;
    let half_f = 0.5 * ff.norm_sq(ff.f());
    let budget = e0 + half_f;
    let p_max = (2.0 * budget).sqrt();
    let a_max = budget.sqrt() + half_f.sqrt();
    let mut sup_p: f64 = 0.0;
    for (rep, s) in tr.energies.iter().zip(&tr.states) {
        // |p|²/2 + ‖α + f_q/√2‖² is the conserved budget
        let conserved = rep.factorized_value + half_f;
        assert!((conserved - budget).abs() <= 1e-4 * budget);
        assert!(s.p[0].abs() <= p_max * (1.0 + 1e-4));
        assert!(field_norm_sq(&s.alpha, ff.grid()).sqrt() <= a_max * (1.0 + 1e-4));
        sup_p = sup_p.max(s.p[0].abs());
    }
    for (t, s) in tr.times.iter().zip(&tr.states) {
        assert!(s.q[0].abs() <= u.q[0].abs() + t * sup_p + 1e-9);
    }
}

#[test]
fn duhamel_representation_of_the_field() {
    let ff = ff1(2.0, 32);
    let g = ff.grid();
    let u = start(&ff, 13);
    let t = 1.0;
    let mismatch = |dt: f64| {
        let tr = run(&ff, System::Undressed, Integrator::Strang, dt, t, &u);
        let n = tr.times.len();
        let mut worst: f64 = 0.0;
        for i in 0..g.len() {
            let k = g.node(i)[0];
            let integrand: Vec<Complex64> = tr
                .times
                .iter()
                .zip(&tr.states)
                .map(|(s, st)| Complex64::from_polar(ff.f()[i], s - k * st.q[0]))
                .collect();
            let integral: Complex64 = (1..n)
                .map(|j| (integrand[j - 1] + integrand[j]) * (0.5 * (tr.times[j] - tr.times[j - 1])))
                .sum();
            let want = Complex64::from_polar(1.0, -t) * (u.alpha[i] - Complex64::i() * integral / SQRT_2);
            worst = worst.max((tr.endpoint().alpha[i] - want).norm());
        }
        worst
    };
    let (a, b) = (mismatch(0.02), mismatch(0.01));
    assert!(a < 1e-3, "{a}");
    assert!((a / b).log2() > 1.8, "{a} {b}");
}

#[test]
fn nearby_trajectories_separate_at_most_exponentially() {
    let ff = ff1(2.0, 32);
    let u = start(&ff, 14);
    let mut v = u.clone();
    let delta = 1e-6;
    v.p[0] += delta;
    let c = growth_constant(&ff, &Drive::undressed(&ff));
    let a = run(&ff, System::Undressed, Integrator::Strang, 0.01, 3.0, &u);
    let b = run(&ff, System::Undressed, Integrator::Strang, 0.01, 3.0, &v);
    for ((t, x), y) in a.times.iter().zip(&a.states).zip(&b.states) {
        let d = h_norm(&x.sub(y), ff.grid()).unwrap();
        assert!(d <= delta * (c * t).exp() * (1.0 + 1e-6), "t = {t}: {d}");
    }
}

#[test]
fn field_regularity_is_propagated() {
    let ff = ff1(4.0, 64);
    let g = ff.grid();
    let u = start(&ff, 15);
    let tr = integrate(&FlowConfig::new(System::Undressed, Integrator::Strang, 0.01, 5.0).every(5), &ff, &u).unwrap();
    let f: Vec<Complex64> = ff.f().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    for s in [1.0, 2.0] {
        let w = WeightSpec::new(s).unwrap();
        let a0 = weighted_norm(&u.alpha, g, w).unwrap();
        let fs = weighted_norm(&f, g, w).unwrap();
        for (t, st) in tr.times.iter().zip(&tr.states) {
            assert!(weighted_norm(&st.alpha, g, w).unwrap() <= a0 + t / SQRT_2 * fs + 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symbol_is_minus_two_pi_times_field_pairing(seed in any::<u64>(), s in -3.0..3.0f64, g in 0.0..2.0f64) {
        let ff = ff1(2.0, 16);
        let grid = ff.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_state(&mut rng, grid, StateScale::default());
        let xi = random_state(&mut rng, grid, StateScale::default());
        let mut drive = Drive::undressed(&ff);
        drive.coupling = g;
        let m = symbol_m(&ff, &drive, s, &xi, &u).unwrap();
        let y = PhasePoint {
            q: vec![xi.p[0] / (2.0 * std::f64::consts::PI)],
            p: vec![-xi.q[0] / (2.0 * std::f64::consts::PI)],
            alpha: xi.alpha.iter().map(|a| a / (SQRT_2 * std::f64::consts::PI)).collect(),
        };
        let x = vector_field(&System::Generalized(drive), &ff, s, &u, Frame::Interaction).unwrap();
        let pairing = real_inner(&x, &y, grid).unwrap();
        prop_assert!((m + 2.0 * std::f64::consts::PI * pairing).abs() <= 1e-11 * (1.0 + m.abs()));
    }
}
