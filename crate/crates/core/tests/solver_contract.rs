use ctgi::compressive::tv_objective_trace;
use ctgi::{
    build_hadamard_basis, modulate_accumulate_scene, reconstruct_cs, reconstruct_exact,
    solve_tv, tv_objective, CsProblem, HadamardOrdering, SolverOptions, SuperPixelGeometry,
    Termination, TvMode, Video,
};
use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use proptest::prelude::*;

struct XorShift(u64);

impl XorShift {
    fn next(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }
    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }
    fn bit(&mut self) -> f64 {
        (self.next() >> 63) as f64
    }
}

fn random_phi(rng: &mut XorShift, p: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, k, |_, _| rng.bit())
}

fn matvec(phi: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (phi * DVector::from_column_slice(x)).as_slice().to_vec()
}

/// ADMM on `z = Dx` with a dense LU x-update; shares nothing with the
/// library solver.
fn admm_oracle(phi: &DMatrix<f64>, y: &[f64], lambda: f64, iters: usize) -> Vec<f64> {
    let k = phi.ncols();
    let rho = 1.0;
    let d = DMatrix::<f64>::from_fn(k - 1, k, |i, j| {
        if j == i + 1 {
            1.0
        } else if j == i {
            -1.0
        } else {
            0.0
        }
    });
    let lhs: DMatrix<f64> = phi.transpose() * phi + d.transpose() * &d * rho;
    let lu = lhs.lu();
    let aty = phi.transpose() * DVector::from_column_slice(y);
    let mut z = DVector::zeros(k - 1);
    let mut u = DVector::zeros(k - 1);
    let mut x = DVector::zeros(k);
    for _ in 0..iters {
        let rhs = &aty + rho * d.transpose() * (&z - &u);
        x = lu.solve(&rhs).unwrap();
        let dx = &d * &x;
        let v = &dx + &u;
        z = v.map(|t: f64| t.signum() * (t.abs() - lambda / rho).max(0.0));
        u += dx - &z;
    }
    x.as_slice().to_vec()
}

fn naive_objective(phi: &DMatrix<f64>, y: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let mut data = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let mut acc = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            acc += phi[(i, j)] * xj;
        }
        data += (yi - acc) * (yi - acc);
    }
    let mut tv = 0.0;
    for w in x.windows(2) {
        tv += (w[1] - w[0]).abs();
    }
    0.5 * data + lambda * tv
}

#[test]
fn lambda_zero_matches_direct_solve() {
    let mut rng = XorShift(0x1234_5678);
    let mut checked = 0;
    while checked < 200 {
        let p = 4 + (rng.next() % 13) as usize;
        let k = 1 + (rng.next() % p as u64) as usize;
        let phi = random_phi(&mut rng, p, k);
        let gram = phi.transpose() * &phi;
        if gram.clone().svd(false, false).rank(1e-8) < k {
            continue;
        }
        let truth: Vec<f64> = (0..k).map(|_| rng.unit()).collect();
        let y = matvec(&phi, &truth);
        let rhs = phi.transpose() * DVector::from_column_slice(&y);
        let oracle = gram.lu().solve(&rhs).unwrap();
        let prob = CsProblem::single(phi, y, 0.0, TvMode::Temporal1d).unwrap();
        let sol = solve_tv(&prob, &SolverOptions::default()).unwrap();
        let got = sol.trace().unwrap();
        for (a, b) in got.iter().zip(oracle.iter()) {
            assert!((a - b).abs() <= 1e-6, "{got:?} vs {oracle:?}");
        }
        checked += 1;
    }
}

#[test]
fn piecewise_constant_trace_is_recovered() {
    let truth = [0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
    let phi = DMatrix::from_row_slice(
        6,
        8,
        &[
            1., 0., 1., 1., 0., 1., 0., 0., //
            0., 1., 1., 0., 1., 0., 1., 0., //
            1., 1., 0., 0., 1., 1., 0., 1., //
            0., 1., 0., 1., 1., 0., 0., 1., //
            1., 0., 0., 1., 0., 0., 1., 1., //
            0., 0., 1., 1., 1., 1., 1., 0., //
        ],
    );
    let y = matvec(&phi, &truth);
    let lambda = 1e-3;
    let prob = CsProblem::single(phi.clone(), y.clone(), lambda, TvMode::Temporal1d).unwrap();
    let sol = solve_tv(&prob, &SolverOptions::default()).unwrap();
    let got = sol.trace().unwrap();
    let rmse = (got.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 8.0).sqrt();
    assert!(rmse <= 0.05, "rmse {rmse}: {got:?}");

    let oracle = admm_oracle(&phi, &y, lambda, 20000);
    let f_sol = naive_objective(&phi, &y, lambda, &got);
    let f_orc = naive_objective(&phi, &y, lambda, &oracle);
    assert!(f_sol <= f_orc + 1e-9, "{f_sol} vs oracle {f_orc}");
}

#[test]
fn large_lambda_gives_constant_trace() {
    let mut rng = XorShift(99);
    let phi = random_phi(&mut rng, 9, 16);
    let y: Vec<f64> = (0..9).map(|_| rng.unit() * 4.0).collect();
    let ones = vec![1.0; 16];
    let col = matvec(&phi, &ones);
    let c = col.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / col.iter().map(|a| a * a).sum::<f64>();
    let prob = CsProblem::single(phi, y, 1e4, TvMode::Temporal1d).unwrap();
    let got = solve_tv(&prob, &SolverOptions::default()).unwrap().trace().unwrap();
    for v in got {
        assert!((v - c).abs() <= 1e-6, "{v} vs {c}");
    }
}

#[test]
fn full_rate_hadamard_matches_exact_mode() {
    let g = SuperPixelGeometry::new(4, 3).unwrap();
    let b = build_hadamard_basis(g, HadamardOrdering::WalshSequency).unwrap();
    let mut rng = XorShift(7);
    let v = Video::new(Array3::from_shape_fn((16, 3, 3), |_| rng.unit())).unwrap();
    let e = modulate_accumulate_scene(&v, &b).unwrap();
    let exact = reconstruct_exact(&e, &b).unwrap();
    for mode in [TvMode::Temporal1d, TvMode::Spatial2d] {
        let cs = reconstruct_cs(&e, &b, Some(0.0), mode, &SolverOptions::default()).unwrap();
        for (a, z) in cs.frames.iter().zip(exact.frames.iter()) {
            assert!((a - z).abs() <= 1e-6);
        }
    }
}

#[test]
fn spatial_objective_matches_naive_summation() {
    let mut rng = XorShift(31);
    let phi = random_phi(&mut rng, 4, 6);
    let y = Array3::from_shape_fn((3, 2, 4), |_| rng.unit());
    let x = Array3::from_shape_fn((6, 3, 2), |_| rng.unit());
    let lambda = 0.37;
    let prob = CsProblem::new(phi.clone(), y.clone(), lambda, TvMode::Spatial2d).unwrap();
    let mut data = 0.0;
    for r in 0..3 {
        for c in 0..2 {
            for i in 0..4 {
                let mut acc = 0.0;
                for k in 0..6 {
                    acc += phi[(i, k)] * x[[k, r, c]];
                }
                data += (y[[r, c, i]] - acc).powi(2);
            }
        }
    }
    let mut tv = 0.0;
    for k in 0..6 {
        for r in 0..3 {
            for c in 0..2 {
                let dr = if r + 1 < 3 { x[[k, r + 1, c]] - x[[k, r, c]] } else { 0.0 };
                let dc = if c + 1 < 2 { x[[k, r, c + 1]] - x[[k, r, c]] } else { 0.0 };
                tv += (dr * dr + dc * dc).sqrt();
            }
        }
    }
    let want = 0.5 * data + lambda * tv;
    let got = tv_objective(x.view(), &prob).unwrap();
    assert!((got - want).abs() <= 1e-12 * want);

    let sol = solve_tv(&prob, &SolverOptions::default()).unwrap();
    assert!(sol.objective_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(sol.objective() <= tv_objective(x.view(), &prob).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_admm_oracle(seed in 1u64.., p in 2usize..10, k in 2usize..12, lam in 0.01f64..1.0) {
        let mut rng = XorShift(seed);
        let phi = random_phi(&mut rng, p, k);
        prop_assume!(phi.iter().any(|&v| v == 1.0));
        let y: Vec<f64> = (0..p).map(|_| rng.unit() * 3.0).collect();
        let prob = CsProblem::single(phi.clone(), y.clone(), lam, TvMode::Temporal1d).unwrap();
        let sol = solve_tv(&prob, &SolverOptions::default()).unwrap();
        let got = sol.trace().unwrap();
        let oracle = admm_oracle(&phi, &y, lam, 20000);
        let f_sol = naive_objective(&phi, &y, lam, &got);
        let f_orc = naive_objective(&phi, &y, lam, &oracle);
        prop_assert!(f_sol <= f_orc + 1e-7 * f_orc.max(1.0), "{} vs {}", f_sol, f_orc);
        prop_assert!((tv_objective_trace(&got, &prob).unwrap() - f_sol).abs() <= 1e-12 * f_sol.max(1e-300));
    }

    #[test]
    fn history_is_monotone(seed in 1u64.., p in 1usize..17, k in 1usize..17, lam in 0.0f64..2.0) {
        let mut rng = XorShift(seed);
        let phi = random_phi(&mut rng, p, k);
        let y: Vec<f64> = (0..p).map(|_| rng.unit()).collect();
        let prob = CsProblem::single(phi, y, lam, TvMode::Temporal1d).unwrap();
        let sol = solve_tv(&prob, &SolverOptions::default()).unwrap();
        prop_assert!(sol.objective_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn scaling_covariance(seed in 1u64.., lam in 0.01f64..0.5) {
        let mut rng = XorShift(seed);
        let phi = random_phi(&mut rng, 6, 10);
        let y: Vec<f64> = (0..6).map(|_| rng.unit()).collect();
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let a = solve_tv(&CsProblem::single(phi.clone(), y, lam, TvMode::Temporal1d).unwrap(), &SolverOptions::default()).unwrap();
        let b = solve_tv(&CsProblem::single(phi, y2, 2.0 * lam, TvMode::Temporal1d).unwrap(), &SolverOptions::default()).unwrap();
        prop_assert_eq!(a.termination == Termination::Converged, b.termination == Termination::Converged);
        for (u, v) in a.x.iter().zip(b.x.iter()) {
            prop_assert!((2.0 * u - v).abs() <= 1e-6 * v.abs().max(1.0));
        }
    }
}
