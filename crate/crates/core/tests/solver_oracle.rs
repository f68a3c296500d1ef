//! The solver against brute force on 2x2 problems, where the nuclear norm
//! has the closed form `sqrt(||A||_F^2 + 2 |det A|)` and no SVD is needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schatten_core::linalg::RealMatrix;
use schatten_core::prox::PenaltyConfig;
use schatten_core::solver::{self, SolverOptions};
use schatten_core::{Covariate, Dataset};

fn nuclear_2x2(a: &[f64; 4]) -> f64 {
    // column-major [a11, a21, a12, a22]
    let fro2: f64 = a.iter().map(|v| v * v).sum();
    let det = a[0] * a[3] - a[1] * a[2];
    (fro2 + 2.0 * det.abs()).sqrt()
}

struct Problem {
    xs: Vec<[f64; 4]>,
    ys: Vec<f64>,
    cfg: PenaltyConfig,
}

impl Problem {
    fn objective(&self, a: &[f64; 4]) -> f64 {
        let n = self.ys.len() as f64;
        let risk: f64 = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(x, y)| (y - x.iter().zip(a).map(|(p, q)| p * q).sum::<f64>()).powi(2))
            .sum::<f64>()
            / n;
        risk + self.cfg.lambda1 * nuclear_2x2(a)
            + self.cfg.lambda2 * a.iter().map(|v| v * v).sum::<f64>()
            + self.cfg.lambda3 * a.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Grid search on a box, then random-direction search down to step 1e-11.
    fn brute_force(&self, radius: f64) -> ([f64; 4], f64) {
        let steps = 16;
        let h = 2.0 * radius / steps as f64;
        let mut best = ([0.0; 4], self.objective(&[0.0; 4]));
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    for l in 0..=steps {
                        let a = [
                            -radius + i as f64 * h,
                            -radius + j as f64 * h,
                            -radius + k as f64 * h,
                            -radius + l as f64 * h,
                        ];
                        let f = self.objective(&a);
                        if f < best.1 {
                            best = (a, f);
                        }
                    }
                }
            }
        }
        // random directions cope with the kinks of |det| and |a_ij| where
        // coordinate moves stall
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut step = h;
        while step > 1e-11 {
            let mut improved = false;
            for _ in 0..200 {
                let d: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                let cand = [0, 1, 2, 3].map(|c| best.0[c] + step * d[c] / norm);
                let f = self.objective(&cand);
                if f < best.1 {
                    best = (cand, f);
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }

    fn dataset(&self) -> Dataset {
        let xs = self
            .xs
            .iter()
            .map(|x| Covariate::compact(RealMatrix::from_vec(2, 2, x).unwrap()))
            .collect();
        Dataset::new((2, 2), xs, self.ys.clone()).unwrap()
    }
}

fn random_problem(rng: &mut impl Rng, entries_only: bool) -> Problem {
    let n = rng.random_range(4..12);
    let truth: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
    let xs: Vec<[f64; 4]> = (0..n)
        .map(|_| {
            if entries_only {
                let mut x = [0.0; 4];
                x[rng.random_range(0..4)] = 1.0;
                x
            } else {
                std::array::from_fn(|_| rng.random_range(-1.0..1.0))
            }
        })
        .collect();
    let ys = xs
        .iter()
        .map(|x| x.iter().zip(&truth).map(|(p, q)| p * q).sum::<f64>() + 0.3 * rng.random_range(-1.0..1.0))
        .collect();
    let cfg = PenaltyConfig::new(
        rng.random_range(0.05..0.8),
        if rng.random::<bool>() { rng.random_range(0.01..0.3) } else { 0.0 },
        if rng.random::<bool>() { rng.random_range(0.01..0.3) } else { 0.0 },
    )
    .unwrap();
    Problem { xs, ys, cfg }
}

#[test]
fn solver_matches_brute_force_on_2x2() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..12 {
        let p = random_problem(&mut rng, case % 3 == 0);
        let res = solver::fit(&p.dataset(), &p.cfg, &SolverOptions::default()).unwrap();
        assert!(res.converged, "case {case}");
        let a: [f64; 4] = res.estimate.as_vec().try_into().unwrap();
        let radius = 1.5 * a.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 0.5;
        let (_, f_brute) = p.brute_force(radius);
        let f_solver = p.objective(&a);
        assert!(f_solver <= f_brute + 1e-9 * (1.0 + f_brute), "case {case}: solver {f_solver} brute {f_brute}");
        assert!(f_brute - f_solver <= 1e-3, "case {case}: brute force far off ({f_brute} vs {f_solver})");
    }
}
