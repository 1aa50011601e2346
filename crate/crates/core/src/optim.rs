//! Derivative-free search utilities: Nelder–Mead, golden section, and a chart
//! of the unitary group.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linops::{eig_matrix, CMat, C64};

#[derive(Clone, Debug)]
pub struct NmOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Maximizes `f` with the adaptive Nelder–Mead method of Gao and Han.
/// Stops when the spread of simplex values drops below `ftol`, when `f`
/// returns +∞, or after `max_evals` evaluations.
pub fn nelder_mead_max(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> NmOutcome {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = if n > 1 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    // Minimize g = −f.
    let mut evals = 0;
    let mut g = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
    for x in &simplex {
        let v = g(x, &mut evals);
        vals.push(v);
        if v == f64::NEG_INFINITY {
            return NmOutcome {
                x: x.clone(),
                value: f64::INFINITY,
                evaluations: evals,
                converged: true,
            };
        }
    }
    let mut converged = false;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if vals[n] == f64::NEG_INFINITY || vals[0] == f64::NEG_INFINITY {
            converged = true;
            break;
        }
        if (vals[n] - vals[0]).abs() <= ftol * (1.0 + vals[0].abs()) {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; n];
        for x in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(alpha);
        let fr = g(&xr, &mut evals);
        if fr < vals[0] {
            let xe = along(alpha * beta);
            let fe = g(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(alpha * gamma);
            let fc = g(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-gamma);
            let fc = g(&xc, &mut evals);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            simplex[n] = xc;
            vals[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            for (xi, bi) in simplex[i].iter_mut().zip(&best) {
                *xi = bi + delta * (*xi - bi);
            }
            vals[i] = g(&simplex[i], &mut evals);
        }
    }
    let (ib, vb) = vals
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    NmOutcome {
        x: simplex[ib].clone(),
        value: -vb,
        evaluations: evals,
        converged,
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes a unimodal `f` on [a, b]; returns (argmax, max).
pub fn golden_max(f: &mut dyn FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut guard = 0;
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) && guard < 500 {
        guard += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Number of real parameters of the chart of U(m).
pub fn unitary_params(m: usize) -> usize {
    m * m
}

/// Hermitian matrix from m² reals: diagonal first, then (re, im) pairs of
/// the strict upper triangle in row order.
pub fn hermitian_from_params(m: usize, theta: &[f64]) -> CMat {
    let mut h = CMat::zeros(m, m);
    let mut k = m;
    for i in 0..m {
        h[(i, i)] = C64::new(theta[i], 0.0);
        for j in i + 1..m {
            let z = C64::new(theta[k], theta[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

/// U = U₀ · exp(iH(θ)).
pub fn unitary_from_params(base: &CMat, theta: &[f64]) -> CMat {
    let m = base.nrows();
    if theta.iter().all(|&t| t == 0.0) {
        return base.clone();
    }
    let h = hermitian_from_params(m, theta);
    let s = eig_matrix(&h).expect("eigensolver on small Hermitian generator");
    let v = &s.eigenvectors;
    let mut e = CMat::zeros(m, m);
    for k in 0..m {
        let ph = C64::from_polar(1.0, s.eigenvalues[k]);
        for i in 0..m {
            let vik = v[(i, k)] * ph;
            for j in 0..m {
                e[(i, j)] += vik * v[(j, k)].conj();
            }
        }
    }
    base * e
}

/// Haar-random unitary via QR of a complex Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(m: usize, rng: &mut R) -> CMat {
    let g: CMat = DMatrix::from_fn(m, m, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q.clone();
    for j in 0..m {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..m {
            u[(i, j)] = q[(i, j)] * ph;
        }
    }
    u
}

pub fn unitarity_defect(u: &CMat) -> f64 {
    let m = u.nrows();
    (u.adjoint() * u - CMat::identity(m, m))
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nm_finds_quadratic_peak() {
        let mut f = |x: &[f64]| -(x[0] - 1.0).powi(2) - 2.0 * (x[1] + 0.5).powi(2) - (x[2] - 0.2).powi(2);
        let out = nelder_mead_max(&mut f, &[0.0, 0.0, 0.0], 0.5, 5000, 1e-14);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] + 0.5).abs() < 1e-5);
        assert!(out.value > -1e-10);
    }

    #[test]
    fn nm_rosenbrock() {
        let mut f = |x: &[f64]| -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let out = nelder_mead_max(&mut f, &[-1.2, 1.0], 0.5, 10000, 1e-16);
        assert!((out.x[0] - 1.0).abs() < 1e-4, "{:?}", out.x);
    }

    #[test]
    fn nm_stops_on_infinity() {
        let mut f = |x: &[f64]| if x[0] > 0.5 { f64::INFINITY } else { x[0] };
        let out = nelder_mead_max(&mut f, &[0.0], 1.0, 100, 1e-12);
        assert_eq!(out.value, f64::INFINITY);
    }

    #[test]
    fn golden_on_parabola() {
        let (x, v) = golden_max(&mut |x| -(x - 0.3).powi(2), -2.0, 5.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(v.abs() < 1e-11);
    }

    #[test]
    fn chart_and_haar_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [2, 3, 4, 9] {
            let u0 = haar_unitary(m, &mut rng);
            assert!(unitarity_defect(&u0) < 1e-12);
            let theta: Vec<f64> = (0..unitary_params(m)).map(|i| (i as f64 * 0.37).sin()).collect();
            let u = unitary_from_params(&u0, &theta);
            assert!(unitarity_defect(&u) < 1e-10);
        }
        let id = CMat::identity(3, 3);
        assert_eq!(unitary_from_params(&id, &[0.0; 9]), id);
    }
}
