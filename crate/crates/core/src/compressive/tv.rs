//! Total-variation terms and their proximal operators.
//!
//! Spatial differences are forward differences with a replicated edge, so
//! the last column has zero horizontal gradient and the last row zero
//! vertical gradient.

/// `sum_k |x[k+1] - x[k]|`.
pub fn tv_1d(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Isotropic TV of a row-major `rows x cols` image:
/// `sum sqrt(D_h² + D_v²)`.
pub fn tv_2d(u: &[f64], rows: usize, cols: usize) -> f64 {
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let v = u[r * cols + c];
            let dh = if c + 1 < cols { u[r * cols + c + 1] - v } else { 0.0 };
            let dv = if r + 1 < rows { u[(r + 1) * cols + c] - v } else { 0.0 };
            total += (dh * dh + dv * dv).sqrt();
        }
    }
    total
}

/// Exact solution of `min_x 1/2 ||x - input||² + lambda * tv_1d(x)`.
///
/// Direct (non-iterative) algorithm from L. Condat, "A Direct Algorithm for
/// 1D Total Variation Denoising", IEEE SPL 2013.
pub fn prox_tv_1d(input: &[f64], lambda: f64, output: &mut [f64]) {
    let width = input.len();
    debug_assert_eq!(output.len(), width);
    if width == 0 {
        return;
    }
    if lambda <= 0.0 || width == 1 {
        output.copy_from_slice(input);
        return;
    }
    let minlambda = -lambda;
    let twolambda = 2.0 * lambda;
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    let mut umin = lambda;
    let mut umax = minlambda;
    let mut vmin = input[0] - lambda;
    let mut vmax = input[0] + lambda;

    loop {
        while k == width - 1 {
            if umin < 0.0 {
                loop {
                    output[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                k = k0;
                kminus = k0;
                vmin = input[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                loop {
                    output[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                k = k0;
                kplus = k0;
                vmax = input[k0];
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                loop {
                    output[k0] = vmin;
                    k0 += 1;
                    if k0 > k {
                        break;
                    }
                }
                return;
            }
        }
        umin += input[k + 1] - vmin;
        if umin < minlambda {
            loop {
                output[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = input[k0];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        umax += input[k + 1] - vmax;
        if umax > lambda {
            loop {
                output[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = input[k0];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
            umin = lambda;
        }
        if umax <= minlambda {
            kplus = k;
            vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
            umax = minlambda;
        }
    }
}

/// Dual state for the isotropic 2-D TV proximal map, reused across calls
/// as a warm start.
#[derive(Debug, Clone)]
pub struct Tv2dDual {
    rows: usize,
    cols: usize,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl Tv2dDual {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            p: vec![0.0; rows * cols],
            q: vec![0.0; rows * cols],
        }
    }

    /// `u = b - lambda * D^T (p, q)`.
    fn primal(&self, b: &[f64], lambda: f64, p: &[f64], q: &[f64], u: &mut [f64]) {
        let (rows, cols) = (self.rows, self.cols);
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                let mut dt = 0.0;
                if c + 1 < cols {
                    dt -= p[i];
                }
                if c >= 1 {
                    dt += p[i - 1];
                }
                if r + 1 < rows {
                    dt -= q[i];
                }
                if r >= 1 {
                    dt += q[i - cols];
                }
                u[i] = b[i] - lambda * dt;
            }
        }
    }
}

/// Approximate `min_u 1/2 ||u - b||² + lambda * tv_2d(u)` by `iters` steps of
/// fast gradient projection on the dual (Beck & Teboulle 2009).
pub fn prox_tv_2d(b: &[f64], lambda: f64, iters: usize, dual: &mut Tv2dDual, out: &mut [f64]) {
    let (rows, cols) = (dual.rows, dual.cols);
    let len = rows * cols;
    debug_assert_eq!(b.len(), len);
    if lambda <= 0.0 || len <= 1 {
        out.copy_from_slice(b);
        return;
    }
    let step = 1.0 / (8.0 * lambda);
    let mut rp = dual.p.clone();
    let mut rq = dual.q.clone();
    let mut t = 1.0f64;
    let mut u = vec![0.0; len];
    for _ in 0..iters {
        dual.primal(b, lambda, &rp, &rq, &mut u);
        let prev_p = dual.p.clone();
        let prev_q = dual.q.clone();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                let gp = if c + 1 < cols { u[i + 1] - u[i] } else { 0.0 };
                let gq = if r + 1 < rows { u[i + cols] - u[i] } else { 0.0 };
                let np = rp[i] + step * gp;
                let nq = rq[i] + step * gq;
                let norm = (np * np + nq * nq).sqrt().max(1.0);
                dual.p[i] = np / norm;
                dual.q[i] = nq / norm;
            }
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let w = (t - 1.0) / t_next;
        for i in 0..len {
            rp[i] = dual.p[i] + w * (dual.p[i] - prev_p[i]);
            rq[i] = dual.q[i] + w * (dual.q[i] - prev_q[i]);
        }
        t = t_next;
    }
    let (p, q) = (dual.p.clone(), dual.q.clone());
    dual.primal(b, lambda, &p, &q, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Optimality of the 1-D prox: with `g_k = -sum_{j<=k} (y - x)_j`,
    /// `|g_k| <= lambda`, `g_k = lambda * sign(x[k+1] - x[k])` on jumps, and
    /// the total residual sums to zero.
    fn check_kkt(y: &[f64], x: &[f64], lambda: f64, tol: f64) {
        let mut g = 0.0;
        for k in 0..y.len() {
            g -= y[k] - x[k];
            if k + 1 < y.len() {
                assert!(g.abs() <= lambda + tol, "|g_{k}| = {} > {lambda}", g.abs());
                let jump = x[k + 1] - x[k];
                if jump.abs() > tol {
                    assert!(
                        (g - lambda * jump.signum()).abs() <= tol,
                        "g_{k} = {g}, jump {jump}"
                    );
                }
            } else {
                assert!(g.abs() <= tol, "residual sum {g}");
            }
        }
    }

    #[test]
    fn tv_values() {
        assert_eq!(tv_1d(&[0.0, 1.0, 0.0, 1.0]), 3.0);
        assert_eq!(tv_1d(&[2.0; 5]), 0.0);
        // 2x2: [[0,1],[0,0]] -> sqrt(1+0) + sqrt(0+1) + 0 + 0
        assert_eq!(tv_2d(&[0.0, 1.0, 0.0, 0.0], 2, 2), 2.0);
        // 2x2: [[0,0],[0,1]] -> only (0,0)... zero; (0,1): dv = 1; (1,0): dh = 1
        assert_eq!(tv_2d(&[0.0, 0.0, 0.0, 1.0], 2, 2), 2.0);
        // [[1,0],[0,0]] -> (0,0): sqrt(1+1)
        assert!((tv_2d(&[1.0, 0.0, 0.0, 0.0], 2, 2) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn prox_1d_known_cases() {
        let mut out = [0.0; 4];
        prox_tv_1d(&[0.0, 0.0, 1.0, 1.0], 0.25, &mut out);
        assert_eq!(out, [0.125, 0.125, 0.875, 0.875]);
        prox_tv_1d(&[0.0, 0.0, 1.0, 1.0], 10.0, &mut out);
        assert_eq!(out, [0.5; 4]);
        prox_tv_1d(&[3.0, -1.0, 2.0, 0.5], 0.0, &mut out);
        assert_eq!(out, [3.0, -1.0, 2.0, 0.5]);
    }

    proptest! {
        #[test]
        fn prox_1d_satisfies_kkt(
            y in prop::collection::vec(-5.0f64..5.0, 1..40),
            lambda in 0.001f64..3.0,
        ) {
            let mut x = vec![0.0; y.len()];
            prox_tv_1d(&y, lambda, &mut x);
            check_kkt(&y, &x, lambda, 1e-9);
        }

        #[test]
        fn prox_2d_decreases_objective(
            b in prop::collection::vec(0.0f64..1.0, 36),
            lambda in 0.01f64..0.5,
        ) {
            let obj = |u: &[f64]| {
                0.5 * u.iter().zip(&b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>()
                    + lambda * tv_2d(u, 6, 6)
            };
            let mut dual = Tv2dDual::new(6, 6);
            let mut u = vec![0.0; 36];
            prox_tv_2d(&b, lambda, 200, &mut dual, &mut u);
            prop_assert!(obj(&u) <= obj(&b) + 1e-12);
            // the constant mean image is a feasible comparison point; the
            // dual iteration is inexact, so allow a small relative gap
            let mean = b.iter().sum::<f64>() / 36.0;
            let om = obj(&vec![mean; 36]);
            prop_assert!(obj(&u) <= om * (1.0 + 1e-3) + 1e-8);
            let mut dual = Tv2dDual::new(6, 6);
            prox_tv_2d(&b, lambda, 5000, &mut dual, &mut u);
            prop_assert!(obj(&u) <= om * (1.0 + 1e-7) + 1e-10);
        }
    }

    #[test]
    fn prox_2d_large_lambda_flattens() {
        let b: Vec<f64> = (0..16).map(|i| (i % 5) as f64 / 4.0).collect();
        let mut dual = Tv2dDual::new(4, 4);
        let mut u = vec![0.0; 16];
        prox_tv_2d(&b, 100.0, 2000, &mut dual, &mut u);
        let mean = b.iter().sum::<f64>() / 16.0;
        for v in u {
            assert!((v - mean).abs() < 1e-3, "{v} vs {mean}");
        }
    }
}
