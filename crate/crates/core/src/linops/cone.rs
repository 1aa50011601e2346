//! Projections onto the PSD cone and the PPT cone.

use super::{eig_herm, HermitianOp};
use crate::error::{Error, Result};

/// Nearest PSD operator in Frobenius norm.
pub fn project_psd(x: &HermitianOp) -> Result<HermitianOp> {
    project_psd_floor(x, 0.0)
}

/// Nearest operator with every eigenvalue at least `floor`.
pub fn project_psd_floor(x: &HermitianOp, floor: f64) -> Result<HermitianOp> {
    let s = eig_herm(x)?;
    if s.eigenvalues[0] >= floor {
        return Ok(x.clone());
    }
    Ok(HermitianOp::from_parts(
        s.rebuild_with(|l| l.max(floor)),
        x.dims().to_vec(),
        x.b_indices().to_vec(),
    ))
}

#[derive(Clone, Debug)]
pub struct DykstraOutcome {
    pub point: HermitianOp,
    pub iterations: usize,
    pub converged: bool,
    /// Frobenius change of the iterate over the last cycle.
    pub change: f64,
}

pub type Projection<'a> = &'a dyn Fn(&HermitianOp) -> Result<HermitianOp>;

/// Dykstra's algorithm with correction terms: converges to the projection of
/// `x0` onto the intersection of the sets. Stops once a full cycle moves the
/// iterate by at most `tol · max(1, ‖x0‖_F)` and `accept` (if given) holds.
pub fn dykstra(
    x0: &HermitianOp,
    projections: &[Projection<'_>],
    tol: f64,
    max_iter: usize,
    accept: Option<&dyn Fn(&HermitianOp) -> Result<bool>>,
) -> Result<DykstraOutcome> {
    let scale = x0.frobenius_norm().max(1.0);
    let mut x = x0.clone();
    let mut corr: Vec<HermitianOp> = projections.iter().map(|_| x0.zeros_like()).collect();
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let start = x.clone();
        for (proj, p) in projections.iter().zip(corr.iter_mut()) {
            let shifted = &x + p;
            let y = proj(&shifted)?;
            *p = &shifted - &y;
            x = y;
        }
        change = (&x - &start).frobenius_norm();
        if change <= tol * scale {
            let ok = match accept {
                Some(f) => f(&x)?,
                None => true,
            };
            if ok {
                return Ok(DykstraOutcome {
                    point: x,
                    iterations: it,
                    converged: true,
                    change,
                });
            }
        }
    }
    Ok(DykstraOutcome {
        point: x,
        iterations: max_iter,
        converged: false,
        change,
    })
}

fn project_pt_psd(x: &HermitianOp) -> Result<HermitianOp> {
    project_psd(&x.partial_transpose()?)?.partial_transpose()
}

pub(crate) fn ppt_violation(x: &HermitianOp) -> Result<f64> {
    let a = x.min_eigenvalue()?;
    let b = x.partial_transpose()?.min_eigenvalue()?;
    Ok((-a).max(-b).max(0.0))
}

/// Projection onto {ω ⪰ 0, ω^Γ ⪰ 0}.
pub fn project_ppt_cone(x: &HermitianOp, tol: f64, max_iter: usize) -> Result<HermitianOp> {
    if x.b_indices().is_empty() {
        return Err(Error::structural("PPT projection needs a declared bipartition"));
    }
    let scale = x.frobenius_norm().max(1.0);
    if ppt_violation(x)? <= 0.0 {
        return Ok(x.clone());
    }
    let psd: Projection<'_> = &project_psd;
    let pt: Projection<'_> = &project_pt_psd;
    let accept = |w: &HermitianOp| -> Result<bool> { Ok(ppt_violation(w)? <= tol * scale) };
    let out = dykstra(x, &[psd, pt], tol, max_iter, Some(&accept))?;
    if !out.converged {
        let viol = ppt_violation(&out.point)?;
        return Err(Error::solver(
            format!(
                "PPT projection hit {max_iter} iterations (cycle change {:e})",
                out.change
            ),
            viol,
        ));
    }
    Ok(out.point)
}
