use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use peregrine_core::bathymetry::{Bathymetry, Profile};
use peregrine_core::diagnostics::energy_bp;
use peregrine_core::operators::{random_vec_field, OperatorHandle, OperatorKind, SolverStrategy};
use peregrine_core::spectral::{grad_gamma, lambda_s, Field, Grid};
use peregrine_core::verification::{assemble_dense, eig_extrema, fd_derivative, DenseKind};

const KINDS: [OperatorKind; 3] = [OperatorKind::IPlusMuTb, OperatorKind::HbB, OperatorKind::HbA];

fn bathymetries() -> Vec<Bathymetry> {
    let bump = Profile::GaussianBump {
        center: None,
        width: 2.5,
        height: 1.0,
    };
    vec![
        Bathymetry::build(&bump, 0.5, &Grid::line(32, 20.0).unwrap()).unwrap(),
        Bathymetry::build(&bump, 0.5, &Grid::new(2, 8, &[10.0, 10.0], 0.7).unwrap()).unwrap(),
    ]
}

#[test]
fn matrix_free_operators_match_dense_assembly() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for bath in bathymetries() {
        let grid = bath.grid().clone();
        for kind in KINDS {
            let handle = OperatorHandle::new(kind, 0.1, &bath).unwrap();
            let op = assemble_dense(DenseKind::Operator(kind), 0.1, &bath).unwrap();
            let weighted = assemble_dense(DenseKind::Weighted(kind), 0.1, &bath).unwrap();
            for _ in 0..20 {
                let v = random_vec_field(&grid, &mut rng);
                let a = handle.apply(&v);
                let b = op.apply(&v).unwrap();
                assert!((&a - &b).max_abs() <= 1e-12 * a.max_abs());
                let a = handle.apply_weighted(&v);
                let b = weighted.apply(&v).unwrap();
                assert!((&a - &b).max_abs() <= 1e-12 * a.max_abs());
            }
            assert!(weighted.asymmetry() <= 1e-12 * weighted.matrix.amax());
        }
    }
}

#[test]
fn dense_inverse_agrees_with_iterative_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for bath in bathymetries() {
        for kind in KINDS {
            let dense = OperatorHandle::with_strategy(kind, 0.1, &bath, SolverStrategy::Dense).unwrap();
            let iterative = OperatorHandle::with_strategy(kind, 0.1, &bath, SolverStrategy::Iterative).unwrap();
            let matrix = assemble_dense(DenseKind::Operator(kind), 0.1, &bath).unwrap().matrix;
            let inverse = matrix.clone().try_inverse().unwrap();
            for _ in 0..5 {
                let rhs = random_vec_field(bath.grid(), &mut rng);
                let x = inverse.clone() * nalgebra::DVector::from_vec(rhs.to_flat());
                let a = dense.solve(&rhs).unwrap().to_flat();
                let b = iterative.solve(&rhs).unwrap().to_flat();
                let scale = x.amax();
                for i in 0..a.len() {
                    assert!((a[i] - x[i]).abs() <= 1e-9 * scale, "{kind}: dense solve");
                    assert!((b[i] - x[i]).abs() <= 1e-9 * scale, "{kind}: iterative solve");
                }
            }
        }
    }
}

/// Flat bottom: per-mode quotient of `I + mu T_b` against the X^0 Gram is
/// `(1 + mu k^2 / 3) / (1 + mu k^2)`.
#[test]
fn flat_bottom_extrema_follow_the_symbols() {
    let n = 16;
    let length = 8.0;
    let mu = 0.3;
    let grid = Grid::line(n, length).unwrap();
    let flat = Bathymetry::flat(&grid);
    let m = assemble_dense(DenseKind::Weighted(OperatorKind::IPlusMuTb), mu, &flat).unwrap();
    let g = assemble_dense(DenseKind::X0Gram, mu, &flat).unwrap();
    let (lo, hi) = eig_extrema(&m, &g).unwrap();
    // the Nyquist mode has zero first-derivative symbol and quotient 1
    let k = (n / 2 - 1) as f64 * 2.0 * std::f64::consts::PI / length;
    let expected = (1.0 + mu * k * k / 3.0) / (1.0 + mu * k * k);
    assert!((lo - expected).abs() < 1e-10, "{lo} vs {expected}");
    assert!((hi - 1.0).abs() < 1e-10);
    let (lo, hi) = eig_extrema(&g, &g).unwrap();
    assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
}

#[test]
fn spectral_and_finite_difference_derivatives_agree_at_fourth_order() {
    let errors: Vec<f64> = [32usize, 64]
        .iter()
        .map(|&n| {
            let grid = Grid::line(n, 10.0).unwrap();
            let f = Field::from_fn(&grid, |x, _| (2.0 * std::f64::consts::PI * x / 10.0).sin().exp());
            let spectral = grad_gamma(&f).component(0).clone();
            (&fd_derivative(&f, 1).unwrap() - &spectral).max_abs()
        })
        .collect();
    let ratio = errors[0] / errors[1];
    assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
}

#[test]
fn bp_energy_is_positive_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for bath in bathymetries() {
        let grid = bath.grid().clone();
        for _ in 0..500 {
            let zeta = Field::from_vec(&grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let zeta = lambda_s(&zeta, -1.0).scale(rng.gen_range(0.0..1.0));
            let v = random_vec_field(&grid, &mut rng);
            assert!(energy_bp(&zeta, &v, rng.gen_range(0.0..1.0), &bath) > 0.0);
        }
    }
}
