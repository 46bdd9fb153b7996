use nalgebra::{DMatrix, DVector};
use qscs_core::quantum::{
    build_hamiltonian, evolve, make_basis_state, perturb_fields, total_magnetization, Complex64, FieldConfig,
    HermitianOperator, PureState, SpinChainSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(dim: usize, rng: &mut impl Rng) -> HermitianOperator {
    let a = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)));
    HermitianOperator::new((&a + a.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
}

fn random_state(dim: usize, rng: &mut impl Rng) -> PureState {
    let v = DVector::from_fn(dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    PureState::normalize(v).unwrap()
}

fn random_fields(n: usize, rng: &mut impl Rng) -> FieldConfig {
    FieldConfig::new((0..n).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap()
}

#[test]
fn evolution_is_unitary() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..10_000 {
        let n = 1 + i % 4;
        let h = random_hermitian(1 << n, &mut rng);
        let psi = random_state(1 << n, &mut rng);
        let out = evolve(&psi, &h, rng.random_range(0.0..3.0)).unwrap();
        // the amplitude norm, computed without any renormalisation
        let norm = out.amplitudes().iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}

#[test]
fn evolution_composes_in_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 1..=4 {
        for _ in 0..50 {
            let h = random_hermitian(1 << n, &mut rng);
            let psi = random_state(1 << n, &mut rng);
            let (t1, t2) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
            let two = evolve(&evolve(&psi, &h, t1).unwrap(), &h, t2).unwrap();
            let one = evolve(&psi, &h, t1 + t2).unwrap();
            let diff = (two.as_vector() - one.as_vector()).norm();
            assert!(diff < 1e-8, "n={n}: {diff}");
        }
    }
}

#[test]
fn chain_hamiltonian_is_hermitian() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=6 {
        let spec = SpinChainSpec { n_spins: n, coupling: rng.random_range(-2.0..2.0), ..SpinChainSpec::default() };
        let h = build_hamiltonian(&spec, &random_fields(n, &mut rng)).unwrap();
        let dev = (h.matrix() - h.matrix().adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev <= 1e-12);
    }
}

#[test]
fn excitation_number_is_conserved_under_any_schedule() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 2..=5 {
        let spec = SpinChainSpec { n_spins: n, ..SpinChainSpec::default() };
        let mag = total_magnetization(n);
        for _ in 0..20 {
            let mut psi = random_state(1 << n, &mut rng);
            let start = mag.expectation(&psi).unwrap();
            for _ in 0..25 {
                let h = build_hamiltonian(&spec, &random_fields(n, &mut rng)).unwrap();
                psi = evolve(&psi, &h, rng.random_range(0.1..2.0)).unwrap();
                assert!((mag.expectation(&psi).unwrap() - start).abs() < 1e-8);
            }
        }
    }
}

/// Mean ‖ψ_noisy(T) − ψ_ideal(T)‖ over `draws` noise realisations of a fixed
/// schedule. Draw `d` always uses seed `d`, so levels share random numbers.
fn mean_deviation(noise_level: f64, schedule: &[FieldConfig], draws: u64) -> f64 {
    let spec = SpinChainSpec { n_spins: 2, noise_level, ..SpinChainSpec::default() };
    let init = make_basis_state(2, 0b10).unwrap();
    let mut ideal = init.clone();
    for f in schedule {
        ideal = evolve(&ideal, &build_hamiltonian(&spec, f).unwrap(), spec.dt).unwrap();
    }
    let mut total = 0.0;
    for d in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(d);
        let mut psi = init.clone();
        for f in schedule {
            let noisy = perturb_fields(f, &spec, &mut rng);
            psi = evolve(&psi, &build_hamiltonian(&spec, &noisy).unwrap(), spec.dt).unwrap();
        }
        total += (psi.as_vector() - ideal.as_vector()).norm();
    }
    total / draws as f64
}

#[test]
fn deviation_grows_with_noise_level() {
    let schedule: Vec<FieldConfig> =
        (0..10u32).map(|k| FieldConfig::from_mask(k % 4, 2, 5.0)).collect();
    let grid = [0.0, 0.01, 0.02, 0.05, 0.1];
    let deviations: Vec<f64> = grid.iter().map(|&p| mean_deviation(p, &schedule, 1000)).collect();
    assert_eq!(deviations[0], 0.0);
    assert!(deviations.windows(2).all(|w| w[1] >= w[0]), "{deviations:?}");
}
