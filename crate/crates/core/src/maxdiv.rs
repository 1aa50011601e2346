//! Quantum and PPT-measured max-divergences.

use std::fmt;

use serde_json::{json, Value};

use crate::classical::{ExtReal, Order};
use crate::error::{Error, Result};
use crate::linops::{eig_herm, project_psd, DensityOp, HermitianOp, MatrixJson, DEFAULT_DIM_CAP};
use crate::report::{BoundKind, BoundResult, SolveStatus};
use crate::states::{isotropic, phi, phi_perp, swap, werner};
use crate::varprog::{variational_bound, ConeKind, ConeSpec, VarConfig};

/// Tolerance on Y ⪰ 0 and on the residual of explicit certificates.
pub const CERT_TOL: f64 = 1e-9;

/// λσ − ρ = X + Y^Γ with X, Y ⪰ 0.
#[derive(Clone, Debug)]
pub struct DualCertificate {
    pub lambda: f64,
    pub x: HermitianOp,
    pub y: HermitianOp,
    /// Max-norm of λσ − ρ − X − Y^Γ.
    pub residual: f64,
}

impl DualCertificate {
    pub fn residual_of(rho: &HermitianOp, sigma: &HermitianOp, lambda: f64, x: &HermitianOp, y: &HermitianOp) -> Result<f64> {
        let yg = y.partial_transpose()?;
        Ok(HermitianOp::combination(&[(lambda, sigma), (-1.0, rho), (-1.0, x), (-1.0, &yg)])?.max_abs())
    }

    /// Smallest eigenvalues of X and Y.
    pub fn min_eigenvalues(&self) -> Result<(f64, f64)> {
        Ok((self.x.min_eigenvalue()?, self.y.min_eigenvalue()?))
    }

    /// Checks X, Y ⪰ −psd_tol and that the stored residual is recomputed
    /// within `res_tol` on (ρ, σ).
    pub fn verify(&self, rho: &HermitianOp, sigma: &HermitianOp, psd_tol: f64, res_tol: f64) -> Result<CertCheck> {
        let (mx, my) = self.min_eigenvalues()?;
        let residual = Self::residual_of(rho, sigma, self.lambda, &self.x, &self.y)?;
        Ok(CertCheck {
            min_x: mx,
            min_y: my,
            residual,
            passed: self.lambda > 0.0 && mx >= -psd_tol && my >= -psd_tol && residual <= res_tol,
        })
    }

    pub fn log_lambda(&self) -> f64 {
        self.lambda.ln()
    }

    pub fn to_json(&self, family: &str, d: usize, n: usize) -> Value {
        json!({
            "lambda": self.lambda,
            "X": MatrixJson::from_op(&self.x),
            "Y": MatrixJson::from_op(&self.y),
            "residual": self.residual,
            "family": family,
            "d": d,
            "n": n,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertCheck {
    pub min_x: f64,
    pub min_y: f64,
    pub residual: f64,
    pub passed: bool,
}

/// D_max(ρ‖σ) = log λ_max(σ^{−1/2} ρ σ^{−1/2}) when supp ρ ⊆ supp σ, else +∞.
pub fn quantum_max_divergence(rho: &DensityOp, sigma: &DensityOp) -> Result<ExtReal> {
    if rho.dim() != sigma.dim() {
        return Err(Error::structural("states differ in dimension"));
    }
    let s = eig_herm(sigma)?;
    let top = s.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let tol = 1e-12 * top.max(1.0);
    let inv_sqrt = |l: f64| if l > tol { 1.0 / l.sqrt() } else { 0.0 };
    let kernel = s.rebuild_with(|l| if l > tol { 0.0 } else { 1.0 });
    let kp = HermitianOp::from_parts(kernel, rho.dims().to_vec(), rho.b_indices().to_vec());
    if rho.inner(&kp) > 1e-12 {
        return Ok(ExtReal::PosInf);
    }
    let w = s.rebuild_with(inv_sqrt);
    let m = &w * rho.matrix() * &w;
    let m = HermitianOp::from_parts(m, rho.dims().to_vec(), rho.b_indices().to_vec());
    Ok(ExtReal::Finite(m.max_eigenvalue()?.ln().max(0.0)))
}

#[derive(Clone, Debug)]
pub struct MaxDivConfig {
    pub primal: VarConfig,
    pub delta: f64,
    /// Feasibility threshold relative to ‖λσ − ρ‖_F.
    pub feas_rel_tol: f64,
    /// Relative λ-width at which bisection stops.
    pub width: f64,
    pub feas_max_iter: usize,
    pub hi_cap: f64,
}

impl Default for MaxDivConfig {
    fn default() -> Self {
        Self {
            primal: VarConfig::default(),
            delta: 1e-8,
            feas_rel_tol: 1e-8,
            width: 1e-6,
            feas_max_iter: 3000,
            hi_cap: 2f64.powi(40),
        }
    }
}

fn check_bipartite(rho: &DensityOp, sigma: &DensityOp) -> Result<()> {
    if rho.dim() != sigma.dim() || rho.dims() != sigma.dims() || rho.b_indices() != sigma.b_indices() {
        return Err(Error::structural("states differ in layout"));
    }
    if !rho.is_bipartite() {
        return Err(Error::structural("PPT max-divergence needs a bipartite state"));
    }
    Ok(())
}

/// Projected-gradient ascent of log(tr ρω / tr σω) over the PPT cone. Any
/// feasible ω certifies the returned value as a lower bound.
pub fn ppt_max_primal(rho: &DensityOp, sigma: &DensityOp, cfg: &MaxDivConfig) -> Result<BoundResult> {
    check_bipartite(rho, sigma)?;
    let cone = ConeSpec::new(ConeKind::Ppt, cfg.delta)?;
    let v = variational_bound(rho, sigma, Order::Infinity, &cone, &cfg.primal)?;
    let mut b = BoundResult::new(v.value, BoundKind::Lower, Order::Infinity, "PPT")
        .with_status(v.status, v.iterations)
        .with_note("primal PPT max-divergence");
    b.omega = Some(v.omega);
    Ok(b)
}

/// Alternating projections between {X + Y^Γ = G} and the PSD pair cone.
/// A certificate is declared once X = (G − Y^Γ)₊ leaves a residual below
/// the threshold.
pub fn dual_feasible(rho: &HermitianOp, sigma: &HermitianOp, lambda: f64, cfg: &MaxDivConfig) -> Result<Option<DualCertificate>> {
    let g = HermitianOp::combination(&[(lambda, sigma), (-1.0, rho)])?;
    let tol = cfg.feas_rel_tol * g.frobenius_norm();
    let candidate = |y: &HermitianOp| -> Result<Option<DualCertificate>> {
        let x = project_psd(&(&g - &y.partial_transpose()?))?;
        let residual = DualCertificate::residual_of(rho, sigma, lambda, &x, y)?;
        Ok((residual <= tol).then(|| DualCertificate {
            lambda,
            x,
            y: y.clone(),
            residual,
        }))
    };
    let mut x = g.clone();
    let mut y = g.zeros_like();
    if let Some(c) = candidate(&y)? {
        return Ok(Some(c));
    }
    let (mut cx, mut cy) = (g.zeros_like(), g.zeros_like());
    for it in 1..=cfg.feas_max_iter {
        let r = &(&g - &x) - &y.partial_transpose()?;
        x = &x + &r.scale(0.5);
        y = &y + &r.partial_transpose()?.scale(0.5);
        let sx = &x + &cx;
        let sy = &y + &cy;
        x = project_psd(&sx)?;
        y = project_psd(&sy)?;
        cx = &sx - &x;
        cy = &sy - &y;
        if it % 5 == 0 {
            if let Some(c) = candidate(&y)? {
                return Ok(Some(c));
            }
        }
    }
    Ok(None)
}

/// Upper bound on D_max^PPT from a dual certificate found by bisection on λ.
pub fn ppt_max_dual(rho: &DensityOp, sigma: &DensityOp, cfg: &MaxDivConfig) -> Result<BoundResult> {
    Ok(ppt_max_bracket(rho, sigma, cfg)?.1)
}

/// Primal lower and dual upper bounds on D_max^PPT; the bisection starts at
/// the primal value.
pub fn ppt_max_bracket(rho: &DensityOp, sigma: &DensityOp, cfg: &MaxDivConfig) -> Result<(BoundResult, BoundResult)> {
    check_bipartite(rho, sigma)?;
    let primal = ppt_max_primal(rho, sigma, cfg)?;
    let (r, s) = (rho.op(), sigma.op());
    let mut lo = primal.nats().exp();
    let mut hi = lo;
    let mut probes = 0;
    let mut cert = loop {
        probes += 1;
        if let Some(c) = dual_feasible(r, s, hi, cfg)? {
            break c;
        }
        lo = hi;
        hi *= 2.0;
        if hi > cfg.hi_cap {
            return Err(Error::solver("dual-bracket-failed: no feasible λ below the cap", hi));
        }
    };
    while (hi - lo) > cfg.width * hi {
        probes += 1;
        let mid = (lo * hi).sqrt();
        match dual_feasible(r, s, mid, cfg)? {
            Some(c) => {
                hi = mid;
                cert = c;
            }
            None => lo = mid,
        }
    }
    let mut b = BoundResult::new(ExtReal::Finite(cert.log_lambda().max(0.0)), BoundKind::Upper, Order::Infinity, "PPT")
        .with_status(SolveStatus::Converged, probes)
        .with_note(format!("dual certificate; primal {}", primal.nats()));
    b.certificate = Some(cert);
    Ok((primal, b))
}

/// State pairs with dual points known in closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CertFamily {
    PhiVsPerp,
    Iso { p: f64, q: f64 },
    AntiVsSym,
    Werner { p: f64, q: f64 },
}

impl CertFamily {
    pub fn code(&self) -> &'static str {
        match self {
            CertFamily::PhiVsPerp => "phi_vs_perp",
            CertFamily::Iso { .. } => "iso",
            CertFamily::AntiVsSym => "anti_vs_sym",
            CertFamily::Werner { .. } => "werner",
        }
    }

    /// (ρ, σ) on one copy.
    pub fn states(&self, d: usize) -> Result<(DensityOp, DensityOp)> {
        match *self {
            CertFamily::PhiVsPerp => Ok((phi(d)?, phi_perp(d)?)),
            CertFamily::Iso { p, q } => Ok((isotropic(d, p)?, isotropic(d, q)?)),
            CertFamily::AntiVsSym => Ok((werner(d, 0.0)?, werner(d, 1.0)?)),
            CertFamily::Werner { p, q } => Ok((werner(d, p)?, werner(d, q)?)),
        }
    }

    /// Single-copy λ; the certificate uses λⁿ.
    pub fn lambda(&self, d: usize) -> f64 {
        let df = d as f64;
        match *self {
            CertFamily::PhiVsPerp => df + 1.0,
            CertFamily::Iso { p, q } => (p * df + 1.0) / (q * df + 1.0),
            CertFamily::AntiVsSym => (df + 1.0) / (df - 1.0),
            CertFamily::Werner { p, q } => (df + 1.0 - 2.0 * p) / (df + 1.0 - 2.0 * q),
        }
    }

    /// Validity region of the closed-form dual point.
    pub fn check_validity(&self, d: usize) -> Result<()> {
        const EPS: f64 = 1e-12;
        let df = d as f64;
        let unit = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} = {v} outside [0, 1]")))
            }
        };
        match *self {
            CertFamily::PhiVsPerp | CertFamily::AntiVsSym => Ok(()),
            CertFamily::Iso { p, q } => {
                unit("p", p)?;
                unit("q", q)?;
                let t = 1.0 / df;
                let (p_sep, q_sep) = (p <= t + EPS, q <= t + EPS);
                let (p_ent, q_ent) = (p >= t - EPS, q >= t - EPS);
                if p_sep && q_sep && q <= p + EPS {
                    return Ok(());
                }
                if p_ent && q_sep && p * q <= t * t + EPS {
                    return Ok(());
                }
                if p_ent && q_ent && (p - q).abs() <= EPS {
                    return Ok(());
                }
                let reason = if p_sep && q_sep {
                    "case 1 (p, q ≤ 1/d) requires q ≤ p"
                } else if p_ent && q_sep {
                    "case 2 (p ≥ 1/d ≥ q) requires pq ≤ 1/d²"
                } else if p_ent && q_ent {
                    "case 3 (p, q ≥ 1/d) requires p = q"
                } else {
                    "no case covers p < 1/d < q"
                };
                Err(Error::domain(format!("isotropic certificate invalid for p={p}, q={q}, d={d}: {reason}")))
            }
            CertFamily::Werner { p, q } => {
                unit("p", p)?;
                unit("q", q)?;
                let (p_sep, q_sep) = (p >= 0.5 - EPS, q >= 0.5 - EPS);
                let (p_ent, q_ent) = (p <= 0.5 + EPS, q <= 0.5 + EPS);
                if p_sep && q_sep && p <= q + EPS {
                    return Ok(());
                }
                if p_ent && q_sep && (2.0 * p - 1.0) * (2.0 * q - 1.0) <= df * (p + q - 1.0) + EPS {
                    return Ok(());
                }
                if p_ent && q_ent && (p - q).abs() <= EPS {
                    return Ok(());
                }
                let reason = if p_sep && q_sep {
                    "case 1 (p, q ≥ 1/2) requires p ≤ q"
                } else if p_ent && q_sep {
                    "case 2 (p ≤ 1/2 ≤ q) requires (2p−1)(2q−1) ≤ d(p+q−1)"
                } else if p_ent && q_ent {
                    "case 3 (p, q ≤ 1/2) requires p = q"
                } else {
                    "no case covers q < 1/2 < p"
                };
                Err(Error::domain(format!("Werner certificate invalid for p={p}, q={q}, d={d}: {reason}")))
            }
        }
    }
}

impl fmt::Display for CertFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertFamily::Iso { p, q } | CertFamily::Werner { p, q } => write!(f, "{}(p={p}, q={q})", self.code()),
            _ => f.write_str(self.code()),
        }
    }
}

fn power(x: &HermitianOp, n: usize) -> Result<HermitianOp> {
    x.tensor_power(n, DEFAULT_DIM_CAP)
}

/// Explicit dual point (λ, X = 0, Y) on n copies, verified numerically.
pub fn explicit_certificate(family: CertFamily, d: usize, n: usize) -> Result<DualCertificate> {
    if d < 2 || n == 0 {
        return Err(Error::domain("need d ≥ 2 and n ≥ 1"));
    }
    family.check_validity(d)?;
    let df = d as f64;
    let nf = n as i32;
    let f = swap(d);
    let one = f.identity_like();
    let dphi = phi(d)?.op().scale(df);
    let lambda = family.lambda(d).powi(nf);
    let y = match family {
        CertFamily::PhiVsPerp => {
            let a = HermitianOp::combination(&[(1.0, &one), (-1.0 / df, &f)])?;
            let b = f.scale(1.0 / df);
            let c = (df - 1.0).powi(nf);
            HermitianOp::combination(&[(1.0 / c, &power(&a, n)?), (-1.0, &power(&b, n)?)])?
        }
        CertFamily::Iso { p, q } => {
            let part = |t: f64| HermitianOp::combination(&[((1.0 - t) * df, &one), (df * df * t - 1.0, &f)]);
            let c = (df * (df * df - 1.0)).powi(nf);
            HermitianOp::combination(&[(lambda / c, &power(&part(q)?, n)?), (-1.0 / c, &power(&part(p)?, n)?)])?
        }
        CertFamily::AntiVsSym => {
            let a = &one + &dphi;
            let b = &one - &dphi;
            let c = (df * (df - 1.0)).powi(nf);
            HermitianOp::combination(&[(1.0 / c, &power(&a, n)?), (-1.0 / c, &power(&b, n)?)])?
        }
        CertFamily::Werner { p, q } => {
            let c = df * (df * df - 1.0);
            let part = |t: f64| {
                HermitianOp::combination(&[((df + 1.0 - 2.0 * t) / c, &one), ((2.0 * t * df - (df + 1.0)) / c, &dphi)])
            };
            HermitianOp::combination(&[(lambda, &power(&part(q)?, n)?), (-1.0, &power(&part(p)?, n)?)])?
        }
    };
    let (rho, sigma) = family.states(d)?;
    let (rn, sn) = (power(rho.op(), n)?, power(sigma.op(), n)?);
    let x = y.zeros_like();
    let residual = DualCertificate::residual_of(&rn, &sn, lambda, &x, &y)?;
    let cert = DualCertificate { lambda, x, y, residual };
    let check = cert.verify(&rn, &sn, 1e-10, CERT_TOL)?;
    if !check.passed {
        return Err(Error::solver(
            format!("certificate for {family} failed verification (min Y {:e})", check.min_y),
            check.residual,
        ));
    }
    Ok(cert)
}
