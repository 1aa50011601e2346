//! Cyclic Jacobi eigensolver for complex Hermitian matrices.

use super::{CMat, HermitianOp, C64};
use crate::error::{Error, Result};

const SWEEP_CAP: usize = 100;
const OFF_REL_TOL: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: CMat,
}

impl Spectrum {
    /// V diag(f(λ)) V†.
    pub fn rebuild_with(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = CMat::zeros(n, n);
        for k in 0..n {
            if fl[k] == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * fl[k];
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> CMat {
        self.rebuild_with(|l| l)
    }
}

pub fn eig_herm(x: &HermitianOp) -> Result<Spectrum> {
    eig_matrix(x.matrix())
}

/// Eigendecomposition of a Hermitian matrix (only the upper triangle and the
/// real diagonal are trusted).
pub fn eig_matrix(m: &CMat) -> Result<Spectrum> {
    let n = m.nrows();
    let mut a: Vec<C64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            a.push(m[(i, j)]);
        }
    }
    let mut v = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = C64::new(1.0, 0.0);
    }
    let fro = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let thresh = OFF_REL_TOL * fro;
    let mut converged = n <= 1 || fro == 0.0;
    let mut off = 0.0;
    let mut sweep = 0;
    while !converged {
        off = off_norm(&a, n);
        if off <= thresh {
            converged = true;
            break;
        }
        if sweep == SWEEP_CAP {
            break;
        }
        sweep += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, n, p, q);
            }
        }
    }
    if !converged {
        return Err(Error::solver(
            format!("Jacobi eigensolver did not converge in {SWEEP_CAP} sweeps"),
            off,
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let eigenvalues = order.iter().map(|&i| a[i * n + i].re).collect();
    let eigenvectors = CMat::from_fn(n, n, |i, k| v[i * n + order[k]]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

fn off_norm(a: &[C64], n: usize) -> f64 {
    let mut s = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            s += 2.0 * a[p * n + q].norm_sqr();
        }
    }
    s.sqrt()
}

/// One two-sided rotation annihilating a[p][q]. The unitary is
/// G = diag(1, ē)·R(θ) on the (p, q) plane, where e is the phase of a[p][q].
fn rotate(a: &mut [C64], v: &mut [C64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    if r < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[p * n + q] = C64::new(0.0, 0.0);
        a[q * n + p] = C64::new(0.0, 0.0);
        return;
    }
    let e = apq / r;
    let ec = e.conj();
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // A ← A G (columns p, q)
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = akp * c - akq * ec * s;
        a[k * n + q] = akp * s + akq * ec * c;
    }
    // A ← G† A (rows p, q)
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = apk * c - aqk * e * s;
        a[q * n + k] = apk * s + aqk * e * c;
    }
    a[p * n + q] = C64::new(0.0, 0.0);
    a[q * n + p] = C64::new(0.0, 0.0);
    a[p * n + p] = C64::new(a[p * n + p].re, 0.0);
    a[q * n + q] = C64::new(a[q * n + q].re, 0.0);
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = vkp * c - vkq * ec * s;
        v[k * n + q] = vkp * s + vkq * ec * c;
    }
}

/// Applies `f` on the spectrum of `x`. With `domain_floor = Some(m)`, any
/// eigenvalue below `m` is a domain error.
pub fn herm_fn(
    x: &HermitianOp,
    f: impl Fn(f64) -> f64,
    domain_floor: Option<f64>,
) -> Result<HermitianOp> {
    let s = eig_herm(x)?;
    if let Some(floor) = domain_floor {
        if s.eigenvalues[0] < floor {
            return Err(Error::domain(format!(
                "eigenvalue {:e} below domain floor {floor:e}",
                s.eigenvalues[0]
            )));
        }
    }
    Ok(HermitianOp::from_parts(
        s.rebuild_with(f),
        x.dims().to_vec(),
        x.b_indices().to_vec(),
    ))
}
