use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schatten_core::harness::{self, low_rank_truth};
use schatten_core::linalg::{self, RealMatrix};
use schatten_core::prox::{self, BallSpec, PenaltyConfig};
use schatten_core::solver::{self, SolverOptions};
use schatten_core::tuning::{self, Dimensions, Theorem, TheoremConstants, TheoremParams};
use schatten_core::{completion_design, generate_dataset, multitask_design, NoiseModel};

fn random_matrix(rng: &mut impl Rng, m: usize, t: usize, scale: f64) -> RealMatrix {
    let v: Vec<f64> = (0..m * t).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    RealMatrix::from_vec(m, t, &v).unwrap()
}

fn random_cfg(rng: &mut impl Rng, with_l1: bool) -> PenaltyConfig {
    PenaltyConfig::new(
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
        if with_l1 { rng.random_range(0.01..1.0) } else { 0.0 },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prox_is_nonexpansive(seed in any::<u64>(), m in 1usize..5, t in 1usize..5, with_l1 in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_cfg(&mut rng, with_l1);
        let step = rng.random_range(0.1..2.0);
        let v1 = random_matrix(&mut rng, m, t, 2.0);
        let v2 = random_matrix(&mut rng, m, t, 2.0);
        let tol = 1e-10;
        let p1 = prox::prox_penalty(&v1, &cfg, step, tol).unwrap();
        let p2 = prox::prox_penalty(&v2, &cfg, step, tol).unwrap();
        // iterates stop at a relative tolerance, so the slack scales with the inputs
        let slack = 2.0 * tol * (1.0 + v1.frobenius_norm().max(v2.frobenius_norm())) + 1e-12;
        prop_assert!((&p1 - &p2).frobenius_norm() <= (&v1 - &v2).frobenius_norm() + slack);
    }

    #[test]
    fn penalty_is_convex_on_segments(seed in any::<u64>(), m in 1usize..6, t in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_cfg(&mut rng, true);
        let a = random_matrix(&mut rng, m, t, 3.0);
        let b = random_matrix(&mut rng, m, t, 3.0);
        let pa = prox::penalty_value(&a, &cfg).unwrap();
        let pb = prox::penalty_value(&b, &cfg).unwrap();
        for s in [0.25, 0.5, 0.75] {
            let mid = &a.scaled(s) + &b.scaled(1.0 - s);
            prop_assert!(prox::penalty_value(&mid, &cfg).unwrap() <= s * pa + (1.0 - s) * pb + 1e-12);
        }
    }

    #[test]
    fn design_covariance_is_psd_atom_sum(seed in any::<u64>(), tasks in 1usize..4, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors: Vec<Vec<Vec<f64>>> = (0..tasks)
            .map(|_| (0..rng.random_range(1..4)).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect())
            .collect();
        let d = multitask_design(&vectors).unwrap();
        let sigma = d.covariance();
        let dim = m * tasks;
        let mut assembled = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        for (x, p) in d.atoms().iter().zip(d.probabilities()) {
            let dense = x.to_dense(d.shape());
            let v = nalgebra::DVector::from_column_slice(dense.as_vec());
            assembled += &v * v.transpose() * *p;
        }
        prop_assert!((&sigma - &assembled).amax() < 1e-14);
        let eig = nalgebra::SymmetricEigen::new(sigma).eigenvalues;
        let top = eig.amax();
        prop_assert!(eig.min() >= -1e-10 * top);
    }

    #[test]
    fn objective_trace_is_monotone_and_nonnegative(seed in any::<u64>(), n in 5usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = completion_design(3, 3).unwrap();
        let a0 = random_matrix(&mut rng, 3, 3, 2.0);
        let data = generate_dataset(&d, &a0, &NoiseModel::gaussian(0.5).unwrap(), n, seed).unwrap();
        let with_l1 = rng.random::<bool>();
        let cfg = random_cfg(&mut rng, with_l1);
        let res = solver::fit(&data, &cfg, &SolverOptions::default()).unwrap();
        prop_assert!(res.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(res.objective_trace.iter().all(|f| *f >= 0.0));
    }

    #[test]
    fn c_r_is_homogeneous(r in 0.01f64..50.0, w1 in 0.0f64..3.0, w2 in 0.0f64..3.0, w3 in 0.0f64..3.0) {
        let k = TheoremConstants { b_x2: 1.3, b_x_inf: 0.7, b_x_linf: 0.4, b_y: 1.0, b_y_psi1: 1.0, b_y_inf: 1.0, b_y_2: 1.0, c_abs: 1.0 };
        let one = |r1, r2, r3| tuning::c_r(r, &BallSpec { r, r1, r2, r3 }, &k);
        let four = |r1, r2, r3| tuning::c_r(4.0 * r, &BallSpec { r: 4.0 * r, r1, r2, r3 }, &k);
        if w1 > 0.0 {
            prop_assert!((four(w1, 0.0, 0.0) - 4.0 * one(w1, 0.0, 0.0)).abs() <= 1e-12 * four(w1, 0.0, 0.0));
        }
        if w2 > 0.0 {
            prop_assert!((four(0.0, w2, 0.0) - 2.0 * one(0.0, w2, 0.0)).abs() <= 1e-12 * four(0.0, w2, 0.0));
        }
        if w3 > 0.0 {
            prop_assert!((four(0.0, 0.0, w3) - 4.0 * one(0.0, 0.0, w3)).abs() <= 1e-12 * four(0.0, 0.0, w3));
        }
        prop_assert!(one(w1, w2, w3) > 0.0);
    }

    #[test]
    fn rhs_dominates_population_risk(seed in any::<u64>(), th in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theorem = [Theorem::T1, Theorem::T2, Theorem::T3, Theorem::T4][th];
        let d = completion_design(3, 4).unwrap();
        let a0 = random_matrix(&mut rng, 3, 4, 1.0);
        let a = random_matrix(&mut rng, 3, 4, 3.0);
        let noise = NoiseModel::gaussian(rng.random_range(0.0..1.0)).unwrap();
        let k = TheoremConstants::from_model(&d, &a0, &noise, rng.random_range(0.01..2.0)).unwrap();
        let params = TheoremParams { n: rng.random_range(2..5000), x: rng.random_range(0.1..5.0), r1: 1.0, r2: 0.5, r3: 2.0 };
        let rhs = harness::oracle_rhs(&d, &a0, &noise, &a, theorem, &params, Dimensions::new(3, 4), &k).unwrap();
        prop_assert!(rhs >= harness::population_risk(&a, &d, &a0, &noise).unwrap());
    }

    #[test]
    fn completion_excess_identity(seed in any::<u64>(), m in 1usize..12, t in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = completion_design(m, t).unwrap();
        let a0 = random_matrix(&mut rng, m, t, 2.0);
        let a = random_matrix(&mut rng, m, t, 2.0);
        let lhs = harness::excess_risk(&a, &d, &a0).unwrap();
        let rhs = (&a - &a0).frobenius_norm_squared() / (m * t) as f64;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }
}

#[test]
fn trace_duality_on_500_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for _ in 0..500 {
        let (m, t) = (rng.random_range(1..8), rng.random_range(1..8));
        let a = random_matrix(&mut rng, m, t, 3.0);
        let b = random_matrix(&mut rng, m, t, 3.0);
        let ip = linalg::inner_product(&a, &b).unwrap();
        let bound = linalg::nuclear_norm(&a).unwrap() * linalg::operator_norm(&b).unwrap();
        assert!(ip.abs() <= bound * (1.0 + 1e-12), "{ip} > {bound}");
    }
}

#[test]
fn low_rank_inputs_keep_accurate_factors() {
    // thresholded iterates are rank deficient; the factorization must stay exact there
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..400u64 {
        let (m, t) = [(20, 20), (40, 40), (3, 4), (20, 7)][(i % 4) as usize];
        let spectrum: Vec<f64> = (0..rng.random_range(1..4)).map(|_| rng.random_range(0.1..5.0)).collect();
        let mut a = low_rank_truth(m, t, &spectrum, i).unwrap();
        for v in a.as_vec_mut() {
            if rng.random::<f64>() < 0.3 {
                *v *= 1.0 + 1e-16 * rng.random_range(-2.0..2.0);
            }
        }
        let f = linalg::svd(&a).unwrap();
        assert!((&f.reconstruct() - &a).frobenius_norm() <= 1e-12 * (1.0 + a.frobenius_norm()));
        let mut sorted = spectrum.clone();
        sorted.sort_by(|x, y| y.total_cmp(x));
        for (s, e) in f.singular_values.iter().zip(&sorted) {
            assert!((s - e).abs() <= 1e-12 * e.max(1.0));
        }
    }
}

#[test]
fn lambda_is_increasing_in_x_and_c_abs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dims = Dimensions::new(6, 5);
    for _ in 0..200 {
        let k = TheoremConstants {
            b_x2: rng.random_range(0.1..2.0),
            b_x_inf: rng.random_range(0.1..2.0),
            b_x_linf: rng.random_range(0.1..2.0),
            b_y: rng.random_range(0.1..2.0),
            b_y_psi1: rng.random_range(0.1..2.0),
            b_y_inf: rng.random_range(0.1..2.0),
            b_y_2: rng.random_range(0.1..2.0),
            c_abs: rng.random_range(0.1..2.0),
        };
        let p = TheoremParams {
            n: rng.random_range(2..100_000),
            x: rng.random_range(0.01..10.0),
            r1: rng.random_range(0.1..3.0),
            r2: rng.random_range(0.1..3.0),
            r3: rng.random_range(0.1..3.0),
        };
        for th in [Theorem::T1, Theorem::T2, Theorem::T3, Theorem::T4] {
            let base = tuning::lambda(th, &p, dims, &k).unwrap();
            let more_x = TheoremParams { x: p.x * 1.01, ..p };
            assert!(tuning::lambda(th, &more_x, dims, &k).unwrap() > base);
            assert!(tuning::lambda(th, &p, dims, &k.with_c_abs(k.c_abs * 1.01)).unwrap() > base);
        }
    }
}
