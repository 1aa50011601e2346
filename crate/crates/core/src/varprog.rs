//! Cone-constrained variational bounds V_α^M.
//!
//! The programs maximize the scale-invariant objective η_α over
//! K = C ∩ {ω ⪰ δ·1, tr ω = dim} by projected gradient ascent. Because η_α
//! is the value of ν_α at its optimal rescaling, the supremum is the same as
//! for ν_α; the rescaled iterate and its ν_α value are reported alongside.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classical::{renyi_weights, ExtReal, Order};
use crate::error::{Error, Result};
use crate::linops::{eig_herm, project_psd, CMat, DensityOp, HermitianOp, Spectrum, C64};
use crate::measured::{search_local, SearchConfig};
use crate::povm::{born, MeasClass};
use crate::report::{BoundKind, BoundResult, SolveStatus};

pub const MIN_DELTA: f64 = 1e-10;
pub const MAX_DELTA: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    Psd,
    Ppt,
    /// ω = δ1 + Σ_{k≤K} a_k ⊗ b_k with rank-one PSD a_k, b_k.
    SepInner(usize),
}

impl ConeKind {
    pub fn label(self) -> &'static str {
        match self {
            ConeKind::Psd => "ALL",
            ConeKind::Ppt => "PPT",
            ConeKind::SepInner(_) => "SEP-inner",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub delta: f64,
    pub dykstra_tol: f64,
    pub dykstra_max_iter: usize,
}

impl ConeSpec {
    pub fn new(kind: ConeKind, delta: f64) -> Result<Self> {
        if !(MIN_DELTA..=MAX_DELTA).contains(&delta) {
            return Err(Error::domain(format!(
                "floor δ must lie in [{MIN_DELTA:e}, {MAX_DELTA:e}], got {delta:e}"
            )));
        }
        Ok(Self {
            kind,
            delta,
            dykstra_tol: 1e-10,
            dykstra_max_iter: 5000,
        })
    }

    pub fn psd() -> Self {
        Self::new(ConeKind::Psd, 1e-8).unwrap()
    }

    pub fn ppt() -> Self {
        Self::new(ConeKind::Ppt, 1e-8).unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Nu,
    Eta,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarConfig {
    pub max_iter: usize,
    /// Relative-improvement stopping tolerance.
    pub tol: f64,
    pub seed: u64,
    /// Also solve with δ/10 and report both values.
    pub sensitivity: bool,
}

impl Default for VarConfig {
    fn default() -> Self {
        Self {
            max_iter: 3000,
            tol: 1e-9,
            seed: 0x7661_7270,
            sensitivity: false,
        }
    }
}

/// Solver settings as exchanged in JSON; missing fields take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub delta: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let v = VarConfig::default();
        Self {
            delta: 1e-8,
            max_iter: v.max_iter,
            tol: v.tol,
            restarts: SearchConfig::default().restarts,
            seed: v.seed,
        }
    }
}

impl SolverConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.cone(ConeKind::Psd)?;
        if c.max_iter == 0 || c.restarts == 0 || !(c.tol > 0.0) {
            return Err(Error::domain("max_iter and restarts must be ≥ 1 and tol > 0"));
        }
        Ok(c)
    }

    pub fn cone(&self, kind: ConeKind) -> Result<ConeSpec> {
        ConeSpec::new(kind, self.delta)
    }

    pub fn var(&self) -> VarConfig {
        VarConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            seed: self.seed,
            ..VarConfig::default()
        }
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            restarts: self.restarts,
            seed: self.seed,
            ..SearchConfig::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct VarResult {
    pub value: ExtReal,
    /// Optimizer on the normalization tr ω = dim.
    pub omega: HermitianOp,
    /// ν_α at λ*·ω, equal to `value` up to rounding.
    pub nu_at_scaled: f64,
    pub lambda_star: f64,
    pub objective: Form,
    pub status: SolveStatus,
    pub iterations: usize,
    pub cone: ConeKind,
    pub delta: f64,
    /// (value at δ, value at δ/10) when requested.
    pub sensitivity: Option<(f64, f64)>,
}

impl VarResult {
    pub fn bound_kind(&self) -> BoundKind {
        match self.cone {
            ConeKind::Psd => BoundKind::Exact,
            ConeKind::Ppt => BoundKind::Upper,
            ConeKind::SepInner(_) => BoundKind::Heuristic,
        }
    }

    pub fn to_bound(&self, alpha: Order) -> BoundResult {
        let mut b = BoundResult::new(self.value, self.bound_kind(), alpha, self.cone.label())
            .with_status(self.status, self.iterations);
        b.omega = Some(self.omega.clone());
        let mut note = format!("variational bound, floor {:e}", self.delta);
        if let Some((a, c)) = self.sensitivity {
            note.push_str(&format!("; value at floor/10 {c} (at floor {a})"));
        }
        b.note = Some(note);
        b
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Branch {
    Low(f64),
    Mid(f64),
    One,
    Inf,
}

fn branch(alpha: Order) -> Branch {
    match alpha {
        Order::Infinity => Branch::Inf,
        Order::Finite(a) if a == 1.0 => Branch::One,
        Order::Finite(a) if a < 0.5 => Branch::Low(a),
        Order::Finite(a) => Branch::Mid(a),
    }
}

/// Diagonal of V† M V.
fn diag_in_basis(s: &Spectrum, m: &HermitianOp) -> Vec<f64> {
    let v = &s.eigenvectors;
    let mv = m.matrix() * v;
    (0..v.ncols())
        .map(|k| (0..v.nrows()).map(|i| (v[(i, k)].conj() * mv[(i, k)]).re).sum())
        .collect()
}

/// Gradient of ω ↦ tr[M f(ω)] by the Daleckii–Krein formula.
fn dk_gradient(s: &Spectrum, m: &HermitianOp, f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64) -> CMat {
    let v = &s.eigenvectors;
    let l = &s.eigenvalues;
    let n = l.len();
    let mut inner = v.adjoint() * m.matrix() * v;
    for i in 0..n {
        for j in 0..n {
            let gap = l[i] - l[j];
            let g = if gap.abs() <= 1e-12 * (l[i].abs() + l[j].abs()).max(1e-300) {
                df(0.5 * (l[i] + l[j]))
            } else {
                (f(l[i]) - f(l[j])) / gap
            };
            inner[(i, j)] *= g;
        }
    }
    v * inner * v.adjoint()
}

struct Eval {
    eta: f64,
    nu: f64,
    lambda_star: f64,
    grad: Option<CMat>,
}

fn evaluate(rho: &HermitianOp, sigma: &HermitianOp, omega: &HermitianOp, alpha: Order, want_grad: bool) -> Result<Eval> {
    let s = eig_herm(omega)?;
    if s.eigenvalues[0] <= 0.0 {
        return Err(Error::domain(format!(
            "ω must be positive definite (λ_min = {:e})",
            s.eigenvalues[0]
        )));
    }
    let r = diag_in_basis(&s, rho);
    let sg = diag_in_basis(&s, sigma);
    let l = &s.eigenvalues;
    let tr = |w: &[f64], f: &dyn Fn(f64) -> f64| -> f64 { w.iter().zip(l).map(|(a, x)| a * f(*x)).sum() };
    let ev = match branch(alpha) {
        Branch::Low(a) => {
            let beta = a / (a - 1.0);
            let pw = move |x: f64| x.powf(beta);
            let aa = tr(&r, &|x| x);
            let bb = tr(&sg, &pw);
            let eta = (a * aa.ln() + (1.0 - a) * bb.ln()) / (a - 1.0);
            let lam = aa.powf(a - 1.0) * bb.powf(1.0 - a);
            let nu = (a * lam * aa + (1.0 - a) * lam.powf(beta) * bb).ln() / (a - 1.0);
            let grad = want_grad.then(|| {
                let gb = dk_gradient(&s, sigma, &pw, &|x| beta * x.powf(beta - 1.0));
                rho.matrix() * C64::new(a / ((a - 1.0) * aa), 0.0) - gb * C64::new(1.0 / bb, 0.0)
            });
            Eval { eta, nu, lambda_star: lam, grad }
        }
        Branch::Mid(a) => {
            let g = (a - 1.0) / a;
            let pw = move |x: f64| x.powf(g);
            let aa = tr(&r, &pw);
            let bb = tr(&sg, &|x| x);
            let eta = (a * aa.ln() + (1.0 - a) * bb.ln()) / (a - 1.0);
            let lam = aa.powf(a) * bb.powf(-a);
            let nu = (a * lam.powf(g) * aa + (1.0 - a) * lam * bb).ln() / (a - 1.0);
            let grad = want_grad.then(|| {
                let ga = dk_gradient(&s, rho, &pw, &|x| g * x.powf(g - 1.0));
                ga * C64::new(a / ((a - 1.0) * aa), 0.0) - sigma.matrix() * C64::new(1.0 / bb, 0.0)
            });
            Eval { eta, nu, lambda_star: lam, grad }
        }
        Branch::One => {
            let aa = tr(&r, &f64::ln);
            let bb = tr(&sg, &|x| x);
            let eta = aa - bb.ln();
            let lam = 1.0 / bb;
            let nu = aa + lam.ln() + 1.0 - lam * bb;
            let grad = want_grad.then(|| {
                dk_gradient(&s, rho, &f64::ln, &|x| 1.0 / x) - sigma.matrix() * C64::new(1.0 / bb, 0.0)
            });
            Eval { eta, nu, lambda_star: lam, grad }
        }
        Branch::Inf => {
            let aa = tr(&r, &|x| x);
            let bb = tr(&sg, &|x| x);
            let eta = aa.ln() - bb.ln();
            let lam = 1.0 / bb;
            let nu = (lam * aa).ln() + 1.0 - lam * bb;
            let grad = want_grad.then(|| {
                rho.matrix() * C64::new(1.0 / aa, 0.0) - sigma.matrix() * C64::new(1.0 / bb, 0.0)
            });
            Eval { eta, nu, lambda_star: lam, grad }
        }
    };
    Ok(ev)
}

/// ν_α or η_α at ω (Eqs. 18 and 19). Returns −∞ where the ν logarithm has a
/// nonpositive argument (possible for α > 1).
pub fn objective(rho: &HermitianOp, sigma: &HermitianOp, omega: &HermitianOp, alpha: Order, form: Form) -> Result<f64> {
    if form == Form::Eta {
        return Ok(evaluate(rho, sigma, omega, alpha, false)?.eta);
    }
    let s = eig_herm(omega)?;
    if s.eigenvalues[0] <= 0.0 {
        return Err(Error::domain(format!(
            "ω must be positive definite (λ_min = {:e})",
            s.eigenvalues[0]
        )));
    }
    let r = diag_in_basis(&s, rho);
    let sg = diag_in_basis(&s, sigma);
    let l = &s.eigenvalues;
    let tr = |w: &[f64], f: &dyn Fn(f64) -> f64| -> f64 { w.iter().zip(l).map(|(a, x)| a * f(*x)).sum() };
    let log_or_neg = |x: f64| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
    Ok(match branch(alpha) {
        Branch::Low(a) => {
            let b = a / (a - 1.0);
            log_or_neg(a * tr(&r, &|x| x) + (1.0 - a) * tr(&sg, &|x| x.powf(b))) / (a - 1.0)
        }
        Branch::Mid(a) => {
            let g = (a - 1.0) / a;
            let inner = a * tr(&r, &|x| x.powf(g)) + (1.0 - a) * tr(&sg, &|x| x);
            if a > 1.0 {
                log_or_neg(inner) / (a - 1.0)
            } else {
                inner.ln() / (a - 1.0)
            }
        }
        Branch::One => tr(&r, &f64::ln) + 1.0 - tr(&sg, &|x| x),
        Branch::Inf => log_or_neg(tr(&r, &|x| x)) + 1.0 - tr(&sg, &|x| x),
    })
}

/// Projection of a spectrum onto {λ ≥ δ, Σλ = total}.
fn project_capped_simplex(mu: &[f64], delta: f64, total: f64) -> Vec<f64> {
    let n = mu.len();
    let mut sorted: Vec<f64> = mu.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut tau = 0.0;
    for k in 1..=n {
        prefix += sorted[k - 1];
        let t = (prefix - (total - (n - k) as f64 * delta)) / k as f64;
        let ok_in = sorted[k - 1] - t > delta;
        let ok_out = k == n || sorted[k] - t <= delta;
        if ok_in && ok_out {
            tau = t;
            break;
        }
        tau = t;
    }
    mu.iter().map(|&m| (m - tau).max(delta)).collect()
}

fn project_floor_trace(x: &HermitianOp, delta: f64, total: f64) -> Result<HermitianOp> {
    let s = eig_herm(x)?;
    let lam = project_capped_simplex(&s.eigenvalues, delta, total);
    let shifted = Spectrum {
        eigenvalues: lam,
        eigenvectors: s.eigenvectors,
    };
    let mat = shifted.rebuild_with(|l| l);
    Ok(HermitianOp::from_parts(mat, x.dims().to_vec(), x.b_indices().to_vec()))
}

fn pt_psd(x: &HermitianOp) -> Result<HermitianOp> {
    project_psd(&x.partial_transpose()?)?.partial_transpose()
}

/// Mixes ω with the normalized identity until ω ⪰ (δ/2)·1 and ω^Γ ⪰ 0 hold
/// exactly, then renormalizes the trace.
fn restore_feasible(w: &HermitianOp, delta: f64, total: f64, ppt: bool) -> Result<HermitianOp> {
    let n = w.dim() as f64;
    let c = total / n;
    let lmin = w.min_eigenvalue()?;
    let gmin = if ppt { w.partial_transpose()?.min_eigenvalue()? } else { f64::INFINITY };
    let need_a = (0.5 * delta - lmin).max(0.0);
    let need_b = (-gmin).max(0.0);
    let mut t = 0.0f64;
    if need_a > 0.0 {
        t = t.max(need_a / (c - lmin));
    }
    if need_b > 0.0 {
        t = t.max(need_b / (c - gmin));
    }
    if t == 0.0 {
        return Ok(w.scale(total / w.trace()));
    }
    let t = (t * (1.0 + 1e-9)).min(1.0);
    let mixed = HermitianOp::combination(&[(1.0 - t, w), (t * c, &w.identity_like())])?;
    Ok(mixed.scale(total / mixed.trace()))
}

fn project_cone(x: &HermitianOp, cone: &ConeSpec, total: f64) -> Result<HermitianOp> {
    let p1 = project_floor_trace(x, cone.delta, total)?;
    match cone.kind {
        ConeKind::Psd => Ok(p1),
        ConeKind::Ppt => {
            if p1.partial_transpose()?.min_eigenvalue()? >= 0.0 {
                return Ok(p1);
            }
            let first = |y: &HermitianOp| project_floor_trace(y, cone.delta, total);
            let projs: [crate::linops::Projection<'_>; 2] = [&first, &pt_psd];
            let out = crate::linops::dykstra(x, &projs, cone.dykstra_tol, cone.dykstra_max_iter, None)?;
            restore_feasible(&out.point, cone.delta, total, true)
        }
        ConeKind::SepInner(_) => Err(Error::domain("SEP inner cone has no projection")),
    }
}

fn check_pair(rho: &DensityOp, sigma: &DensityOp, cone: &ConeSpec) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::structural("states differ in dimension"));
    }
    if !matches!(cone.kind, ConeKind::Psd) && !rho.is_bipartite() {
        return Err(Error::structural("cone program needs a bipartite state"));
    }
    Ok(())
}

/// D_α^ALL = +∞ exactly when supports are orthogonal (α < 1) or ρ's support
/// leaves σ's (α ≥ 1).
fn psd_is_infinite(rho: &HermitianOp, sigma: &HermitianOp, alpha: Order) -> Result<bool> {
    let s = eig_herm(sigma)?;
    let tol = 1e-12 * s.eigenvalues.last().unwrap().abs().max(1.0);
    let n = s.eigenvalues.len();
    let kernel: Vec<usize> = (0..n).filter(|&k| s.eigenvalues[k] <= tol).collect();
    let below_one = matches!(alpha, Order::Finite(a) if a < 1.0);
    if below_one {
        return Ok(rho.inner(sigma) <= 1e-14);
    }
    let v = &s.eigenvectors;
    let mut leak = 0.0;
    for &k in &kernel {
        let col: Vec<C64> = (0..n).map(|i| v[(i, k)]).collect();
        let rv = rho.matrix() * nalgebra::DVector::from_vec(col.clone());
        leak += col.iter().zip(rv.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
    }
    Ok(leak > 1e-12)
}

/// Projected-gradient ascent of η_α over the cone with floor δ.
pub fn variational_bound(rho: &DensityOp, sigma: &DensityOp, alpha: Order, cone: &ConeSpec, cfg: &VarConfig) -> Result<VarResult> {
    let mut res = solve(rho, sigma, alpha, cone, cfg)?;
    if cfg.sensitivity && cone.delta / 10.0 >= MIN_DELTA {
        let mut c2 = cone.clone();
        c2.delta = cone.delta / 10.0;
        let r2 = solve(rho, sigma, alpha, &c2, cfg)?;
        res.sensitivity = Some((res.value.to_f64(), r2.value.to_f64()));
    }
    Ok(res)
}

fn solve(rho: &DensityOp, sigma: &DensityOp, alpha: Order, cone: &ConeSpec, cfg: &VarConfig) -> Result<VarResult> {
    check_pair(rho, sigma, cone)?;
    if let ConeKind::SepInner(k) = cone.kind {
        return sep_inner(rho, sigma, alpha, cone, k, cfg);
    }
    let total = rho.dim() as f64;
    let id = rho.identity_like();
    if cone.kind == ConeKind::Psd && psd_is_infinite(rho, sigma, alpha)? {
        return Ok(VarResult {
            value: ExtReal::PosInf,
            omega: id,
            nu_at_scaled: f64::INFINITY,
            lambda_star: 0.0,
            objective: Form::Eta,
            status: SolveStatus::Closedform,
            iterations: 0,
            cone: cone.kind,
            delta: cone.delta,
            sensitivity: None,
        });
    }
    if cone.kind == ConeKind::Psd {
        return solve_psd_log(rho, sigma, alpha, cone, cfg);
    }
    let (r, s) = (rho.op(), sigma.op());
    let mut w = id;
    let mut ev = evaluate(r, s, &w, alpha, true)?;
    let mut g = ev.grad.take().unwrap();
    let gnorm = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut t = if gnorm > 0.0 { 0.1 * total / gnorm } else { 1.0 };
    let mut quiet = 0;
    let mut status = SolveStatus::Budget;
    let mut iters = 0;
    const PATIENCE: usize = 25;
    while iters < cfg.max_iter {
        iters += 1;
        let gop = HermitianOp::from_parts(g.clone(), w.dims().to_vec(), w.b_indices().to_vec());
        let mut accepted = None;
        for _ in 0..60 {
            let trial = project_cone(&(&w + &gop.scale(t)), cone, total)?;
            let step = &trial - &w;
            let dirn = gop.inner(&step);
            let e = evaluate(r, s, &trial, alpha, true)?;
            if e.eta.is_finite() && e.eta >= ev.eta + 1e-4 * dirn {
                accepted = Some((trial, e, step));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, mut e, step)) = accepted else {
            status = SolveStatus::Converged;
            break;
        };
        let gnew = e.grad.take().unwrap();
        let y = &gnew - &g;
        let sy: f64 = step.matrix().iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        let ss = step.frobenius_norm().powi(2);
        t = if sy < 0.0 { (ss / -sy).clamp(1e-12, 1e12) } else { (t * 2.0).min(1e12) };
        let gain = e.eta - ev.eta;
        w = trial;
        ev = e;
        g = gnew;
        if gain <= cfg.tol * (1.0 + ev.eta.abs()) {
            quiet += 1;
            if quiet >= PATIENCE || ss.sqrt() <= 1e-15 * total {
                status = SolveStatus::Converged;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(VarResult {
        value: ExtReal::Finite(ev.eta.max(0.0)),
        omega: w,
        nu_at_scaled: ev.nu,
        lambda_star: ev.lambda_star,
        objective: Form::Eta,
        status,
        iterations: iters,
        cone: cone.kind,
        delta: cone.delta,
        sensitivity: None,
    })
}

/// η_α over the PSD cone in the chart ω = exp(H), which keeps widely spread
/// spectra well conditioned. Each trial point is mapped back onto the floor
/// constraint before evaluation.
fn solve_psd_log(rho: &DensityOp, sigma: &DensityOp, alpha: Order, cone: &ConeSpec, cfg: &VarConfig) -> Result<VarResult> {
    let total = rho.dim() as f64;
    let (r, s) = (rho.op(), sigma.op());
    let (dims, b) = (rho.dims().to_vec(), rho.b_indices().to_vec());
    let log_of = |w: &HermitianOp| -> Result<(HermitianOp, Spectrum)> {
        let sp = eig_herm(w)?;
        let h = HermitianOp::from_parts(sp.rebuild_with(f64::ln), dims.clone(), b.clone());
        let sh = Spectrum {
            eigenvalues: sp.eigenvalues.iter().map(|x| x.ln()).collect(),
            eigenvectors: sp.eigenvectors,
        };
        Ok((h, sh))
    };
    let chart_grad = |sh: &Spectrum, g: CMat| -> HermitianOp {
        let gop = HermitianOp::from_parts(g, dims.clone(), b.clone());
        HermitianOp::from_parts(dk_gradient(sh, &gop, &f64::exp, &f64::exp), dims.clone(), b.clone())
    };
    let mut w = rho.identity_like();
    let (mut h, mut sh) = log_of(&w)?;
    let mut ev = evaluate(r, s, &w, alpha, true)?;
    let mut g = chart_grad(&sh, ev.grad.take().unwrap());
    let gnorm = g.frobenius_norm();
    let mut t = if gnorm > 0.0 { 1.0 / gnorm } else { 1.0 };
    let (mut quiet, mut iters, mut status) = (0, 0, SolveStatus::Budget);
    const PATIENCE: usize = 25;
    while iters < cfg.max_iter {
        iters += 1;
        let mut accepted = None;
        for _ in 0..60 {
            let hs = eig_herm(&(&h + &g.scale(t)))?;
            let top = *hs.eigenvalues.last().unwrap();
            let raw = HermitianOp::from_parts(hs.rebuild_with(|x| (x - top).exp()), dims.clone(), b.clone());
            let trial = project_floor_trace(&raw.scale(total / raw.trace()), cone.delta, total)?;
            let (th, tsh) = log_of(&trial)?;
            let step = &th - &h;
            let e = evaluate(r, s, &trial, alpha, true)?;
            if e.eta.is_finite() && e.eta >= ev.eta + 1e-4 * g.inner(&step) {
                accepted = Some((trial, th, tsh, e, step));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, th, tsh, mut e, step)) = accepted else {
            status = SolveStatus::Converged;
            break;
        };
        let gnew = chart_grad(&tsh, e.grad.take().unwrap());
        let y = &gnew - &g;
        let sy = step.inner(&y);
        let ss = step.frobenius_norm().powi(2);
        t = if sy < 0.0 { (ss / -sy).clamp(1e-12, 1e12) } else { (t * 2.0).min(1e12) };
        let gain = e.eta - ev.eta;
        (w, h, sh, ev, g) = (trial, th, tsh, e, gnew);
        let _ = &sh;
        let gn = g.frobenius_norm();
        if gn <= 1e-14 * (1.0 + ev.eta.abs()) {
            status = SolveStatus::Converged;
            break;
        }
        if gain <= cfg.tol * (1.0 + ev.eta.abs()) {
            quiet += 1;
            if (quiet >= PATIENCE && gn <= 1e-6) || quiet >= 8 * PATIENCE || ss.sqrt() <= 1e-15 * total {
                status = SolveStatus::Converged;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(VarResult {
        value: ExtReal::Finite(ev.eta.max(0.0)),
        omega: w,
        nu_at_scaled: ev.nu,
        lambda_star: ev.lambda_star,
        objective: Form::Eta,
        status,
        iterations: iters,
        cone: cone.kind,
        delta: cone.delta,
        sensitivity: None,
    })
}

/// Inner approximation of the separable cone by K rank-one product terms.
fn sep_inner(rho: &DensityOp, sigma: &DensityOp, alpha: Order, cone: &ConeSpec, k: usize, cfg: &VarConfig) -> Result<VarResult> {
    let r = rho.to_ab_blocks()?;
    let s = sigma.to_ab_blocks()?;
    let (da, db) = (r.dims()[0], r.dims()[1]);
    let k = if k == 0 { da * db } else { k };
    let dim = da * db;
    let per = 2 * (da + db);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x: Vec<f64> = (0..k * per).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let build = |x: &[f64]| -> HermitianOp {
        let mut m = CMat::identity(dim, dim) * C64::new(cone.delta, 0.0);
        for t in 0..k {
            let base = t * per;
            let g: Vec<C64> = (0..da).map(|i| C64::new(x[base + 2 * i], x[base + 2 * i + 1])).collect();
            let h: Vec<C64> = (0..db)
                .map(|j| C64::new(x[base + 2 * da + 2 * j], x[base + 2 * da + 2 * j + 1]))
                .collect();
            let v: Vec<C64> = g.iter().flat_map(|a| h.iter().map(move |b| a * b)).collect();
            for i in 0..dim {
                for j in 0..dim {
                    m[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
        HermitianOp::from_parts(m, vec![da, db], vec![1])
    };
    // Gradient in x from the matrix gradient G: for ω ∋ v v† with v = g ⊗ h,
    // ∂η/∂g = 2 tr_B[G (1 ⊗ h h†)] g and likewise for h.
    let grad_x = |x: &[f64], gm: &CMat| -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for t in 0..k {
            let base = t * per;
            let g: Vec<C64> = (0..da).map(|i| C64::new(x[base + 2 * i], x[base + 2 * i + 1])).collect();
            let h: Vec<C64> = (0..db)
                .map(|j| C64::new(x[base + 2 * da + 2 * j], x[base + 2 * da + 2 * j + 1]))
                .collect();
            for i in 0..da {
                let mut acc = C64::new(0.0, 0.0);
                for i2 in 0..da {
                    for j in 0..db {
                        for j2 in 0..db {
                            acc += gm[(i * db + j, i2 * db + j2)] * h[j2] * h[j].conj() * g[i2];
                        }
                    }
                }
                out[base + 2 * i] = 2.0 * acc.re;
                out[base + 2 * i + 1] = 2.0 * acc.im;
            }
            for j in 0..db {
                let mut acc = C64::new(0.0, 0.0);
                for j2 in 0..db {
                    for i in 0..da {
                        for i2 in 0..da {
                            acc += gm[(i * db + j, i2 * db + j2)] * g[i2] * g[i].conj() * h[j2];
                        }
                    }
                }
                out[base + 2 * da + 2 * j] = 2.0 * acc.re;
                out[base + 2 * da + 2 * j + 1] = 2.0 * acc.im;
            }
        }
        out
    };
    let mut w = build(&x);
    let mut ev = evaluate(&r, &s, &w, alpha, true)?;
    let mut gx = grad_x(&x, ev.grad.as_ref().unwrap());
    let mut t = 0.1;
    let mut status = SolveStatus::Budget;
    let mut iters = 0;
    let mut quiet = 0;
    while iters < cfg.max_iter {
        iters += 1;
        let gn2: f64 = gx.iter().map(|v| v * v).sum();
        let mut accepted = None;
        for _ in 0..60 {
            let xt: Vec<f64> = x.iter().zip(&gx).map(|(a, b)| a + t * b).collect();
            let wt = build(&xt);
            if let Ok(e) = evaluate(&r, &s, &wt, alpha, true) {
                if e.eta.is_finite() && e.eta >= ev.eta + 1e-4 * t * gn2 {
                    accepted = Some((xt, wt, e));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xt, wt, e)) = accepted else {
            status = SolveStatus::Converged;
            break;
        };
        let gain = e.eta - ev.eta;
        x = xt;
        w = wt;
        ev = e;
        gx = grad_x(&x, ev.grad.as_ref().unwrap());
        t *= 2.0;
        if gain <= cfg.tol * (1.0 + ev.eta.abs()) {
            quiet += 1;
            if quiet >= 25 {
                status = SolveStatus::Converged;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let total = dim as f64;
    let w = w.scale(total / w.trace());
    Ok(VarResult {
        value: ExtReal::Finite(ev.eta.max(0.0)),
        omega: w,
        nu_at_scaled: ev.nu,
        lambda_star: ev.lambda_star,
        objective: Form::Eta,
        status,
        iterations: iters,
        cone: cone.kind,
        delta: cone.delta,
        sensitivity: None,
    })
}

/// ν_α for a diagonal ω = Σ λ_z |z⟩⟨z| with statistics μ, ν (entries where
/// either measure vanishes are skipped).
fn classical_nu(mr: &[f64], ms: &[f64], lam: &[f64], alpha: Order) -> f64 {
    let it = || {
        mr.iter()
            .zip(ms)
            .zip(lam)
            .filter(|((a, b), _)| **a > 0.0 && **b > 0.0)
            .map(|((a, b), l)| (*a, *b, *l))
    };
    match branch(alpha) {
        Branch::Low(a) => {
            let b = a / (a - 1.0);
            (it().map(|(p, q, l)| a * p * l + (1.0 - a) * q * l.powf(b)).sum::<f64>()).ln() / (a - 1.0)
        }
        Branch::Mid(a) => {
            let g = (a - 1.0) / a;
            (it().map(|(p, q, l)| a * p * l.powf(g) + (1.0 - a) * q * l).sum::<f64>()).ln() / (a - 1.0)
        }
        Branch::One => it().map(|(p, q, l)| p * l.ln() - q * l).sum::<f64>() + 1.0,
        Branch::Inf => unreachable!("α = ∞ is handled by the max formula"),
    }
}

/// Exact program for the projective local classes: search over local bases
/// with the inner weights set to their analytic optimum
/// λ*_{xy} = (μ_ρ(x,y)/μ_σ(x,y))^{α−1} (written here per branch of ν_α).
pub fn plo_exact(rho: &DensityOp, sigma: &DensityOp, alpha: Order, class: MeasClass, cfg: &SearchConfig) -> Result<BoundResult> {
    if !matches!(class, MeasClass::PLo | MeasClass::PLocc1) {
        return Err(Error::domain(format!("plo_exact handles P-LO and P-LOCC1, not {class}")));
    }
    let (mut res, _) = search_local(rho, sigma, alpha, MeasClass::PLo, cfg, None)?;
    if class == MeasClass::PLocc1 {
        let (r2, _) = search_local(rho, sigma, alpha, MeasClass::PLocc1, cfg, None)?;
        if r2.nats() > res.nats() {
            res = r2;
        }
    }
    let povm = res.povm.clone().expect("search returns a POVM");
    let mr = born(rho, &povm)?;
    let ms = born(sigma, &povm)?;
    let (mr, ms) = (mr.weights(), ms.weights());
    let direct = renyi_weights(mr, ms, alpha);
    let value = match (direct, alpha) {
        (ExtReal::PosInf, _) | (_, Order::Infinity) => direct,
        (ExtReal::Finite(_), _) => {
            let lam: Vec<f64> = mr
                .iter()
                .zip(ms)
                .map(|(p, q)| {
                    if *p <= 0.0 || *q <= 0.0 {
                        return 0.0;
                    }
                    match branch(alpha) {
                        Branch::Low(a) => (p / q).powf(a - 1.0),
                        Branch::Mid(a) => (p / q).powf(a),
                        _ => p / q,
                    }
                })
                .collect();
            ExtReal::Finite(classical_nu(mr, ms, &lam, alpha).max(0.0))
        }
    };
    res.value = value;
    res.class = class.name().to_string();
    res.note = Some("projective local program with analytic inner optimum".into());
    Ok(res)
}

/// Lower bound inf_ω √(tr[ρω⁻¹] tr[σω]) on the measured fidelity over the
/// cone; equals exp(−V_{1/2}/2).
pub fn measured_fidelity_bound(rho: &DensityOp, sigma: &DensityOp, cone: &ConeSpec, cfg: &VarConfig) -> Result<BoundResult> {
    let v = variational_bound(rho, sigma, Order::Finite(0.5), cone, cfg)?;
    let f = (-v.value.to_f64() / 2.0).exp();
    let mut b = BoundResult::new(ExtReal::Finite(f), BoundKind::Lower, Order::Finite(0.5), cone.kind.label())
        .with_status(v.status, v.iterations)
        .with_note("measured fidelity (dimensionless, not nats)");
    b.omega = Some(v.omega);
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_config_json() {
        let c = SolverConfig::parse(r#"{"delta": 1e-9, "restarts": 4}"#).unwrap();
        assert_eq!(c.delta, 1e-9);
        assert_eq!(c.restarts, 4);
        assert_eq!(c.max_iter, VarConfig::default().max_iter);
        assert_eq!(c.search().restarts, 4);
        assert_eq!(c.cone(ConeKind::Ppt).unwrap().delta, 1e-9);
        let back = SolverConfig::parse(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(matches!(SolverConfig::parse(r#"{"delta": 1.0}"#), Err(Error::Domain(_))));
        assert!(matches!(SolverConfig::parse(r#"{"max_iter": 0}"#), Err(Error::Domain(_))));
        assert!(matches!(SolverConfig::parse(r#"{"deltas": 1e-8}"#), Err(Error::Parse(_))));
    }
    use crate::classical::FiniteMeasure;
    use crate::states::{isotropic, phi, phi_perp};
    use proptest::prelude::*;

    fn diag_state(w: &[f64]) -> DensityOp {
        DensityOp::new(HermitianOp::diag(w).with_layout(vec![2, 2], vec![1]).unwrap()).unwrap()
    }

    #[test]
    fn capped_simplex_projection() {
        let p = project_capped_simplex(&[3.0, -1.0, 0.5, 0.1], 0.01, 2.0);
        assert!((p.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.01 - 1e-15));
        let q = project_capped_simplex(&[1.0, 1.0], 0.1, 2.0);
        assert!((q[0] - 1.0).abs() < 1e-15 && (q[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn objective_at_identity() {
        let r = isotropic(2, 0.7).unwrap();
        let id = r.identity_like();
        for a in [Order::Finite(0.3), Order::Finite(0.7), Order::Finite(1.0), Order::Finite(2.5), Order::Infinity] {
            let nu = objective(r.op(), r.op(), &id, a, Form::Nu).unwrap();
            let eta = objective(r.op(), r.op(), &id, a, Form::Eta).unwrap();
            assert!(nu.abs() < 1e-14, "{a}: {nu}");
            assert!(eta.abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_one_form() {
        let r = isotropic(2, 0.7).unwrap();
        let s = isotropic(2, 0.2).unwrap();
        let w = HermitianOp::diag(&[1.0, 2.0, 0.5, 3.0]).with_layout(vec![2, 2], vec![1]).unwrap();
        let ln_w = crate::linops::herm_fn(&w, f64::ln, Some(0.0)).unwrap();
        let expect = r.inner(&ln_w) + 1.0 - s.inner(&w);
        assert!((objective(r.op(), s.op(), &w, Order::Finite(1.0), Form::Nu).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn rejects_singular_omega() {
        let r = isotropic(2, 0.7).unwrap();
        let w = HermitianOp::diag(&[1.0, 0.0, 1.0, 1.0]).with_layout(vec![2, 2], vec![1]).unwrap();
        assert!(matches!(objective(r.op(), r.op(), &w, Order::Finite(2.0), Form::Eta), Err(Error::Domain(_))));
    }

    #[test]
    fn identical_states() {
        let r = isotropic(3, 0.4).unwrap();
        for cone in [ConeSpec::psd(), ConeSpec::ppt()] {
            let v = variational_bound(&r, &r, Order::Finite(2.0), &cone, &VarConfig::default()).unwrap();
            assert!(v.value.to_f64().abs() < 1e-12);
            assert!((&v.omega - &r.identity_like()).max_abs() < 1e-12);
        }
    }

    #[test]
    fn psd_cone_on_commuting_pair_matches_classical() {
        let p = [0.4, 0.3, 0.2, 0.1];
        let q = [0.1, 0.2, 0.3, 0.4];
        let (r, s) = (diag_state(&p), diag_state(&q));
        let mu = FiniteMeasure::from_weights(p.to_vec()).unwrap();
        let nu = FiniteMeasure::from_weights(q.to_vec()).unwrap();
        for a in [Order::Finite(0.3), Order::Finite(0.5), Order::Finite(1.0), Order::Finite(2.0), Order::Infinity] {
            let v = variational_bound(&r, &s, a, &ConeSpec::psd(), &VarConfig::default()).unwrap();
            let c = crate::classical::renyi(&mu, &nu, a).unwrap().to_f64();
            assert!((v.value.to_f64() - c).abs() < 1e-6, "{a}: {} vs {c}", v.value);
            assert!((v.nu_at_scaled - v.value.to_f64()).abs() < 1e-8);
        }
    }

    #[test]
    fn psd_cone_detects_infinite() {
        let v = variational_bound(&phi(2).unwrap(), &phi_perp(2).unwrap(), Order::Finite(0.5), &ConeSpec::psd(), &VarConfig::default())
            .unwrap();
        assert_eq!(v.value, ExtReal::PosInf);
    }

    #[test]
    fn ppt_cone_phi_vs_perp() {
        let v = variational_bound(&phi(2).unwrap(), &phi_perp(2).unwrap(), Order::Finite(2.0), &ConeSpec::ppt(), &VarConfig::default())
            .unwrap();
        assert!((v.value.to_f64() - 3f64.ln()).abs() < 1e-4, "{}", v.value);
        assert!(v.omega.partial_transpose().unwrap().min_eigenvalue().unwrap() >= 0.0);
    }

    #[test]
    fn plo_exact_phi_vs_perp() {
        let cfg = SearchConfig { restarts: 4, max_evals: 400, ..SearchConfig::default() };
        let r = plo_exact(&phi(2).unwrap(), &phi_perp(2).unwrap(), Order::Finite(2.0), MeasClass::PLo, &cfg).unwrap();
        assert!((r.nats() - 3f64.ln()).abs() < 1e-9);
        let z = plo_exact(&phi(2).unwrap(), &phi(2).unwrap(), Order::Finite(0.4), MeasClass::PLocc1, &cfg).unwrap();
        assert!(z.nats().abs() < 1e-12);
    }

    #[test]
    fn fidelity_bound_trivial() {
        let pi = diag_state(&[0.25; 4]);
        let b = measured_fidelity_bound(&pi, &pi, &ConeSpec::psd(), &VarConfig::default()).unwrap();
        assert!((b.nats() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sep_inner_runs() {
        let cone = ConeSpec::new(ConeKind::SepInner(0), 1e-8).unwrap();
        let v = variational_bound(&phi(2).unwrap(), &phi_perp(2).unwrap(), Order::Finite(2.0), &cone, &VarConfig::default()).unwrap();
        assert_eq!(v.bound_kind(), BoundKind::Heuristic);
        assert!(v.value.to_f64() <= 3f64.ln() + 1e-6);
        assert!(v.value.to_f64() > 1.0);
    }

    fn rand_pos(e: &[(f64, f64)]) -> HermitianOp {
        let g = CMat::from_fn(4, 4, |i, j| {
            let (a, b) = e[(i * 4 + j) % e.len()];
            C64::new(a, b)
        });
        let m = &g * g.adjoint() + CMat::identity(4, 4) * C64::new(0.05, 0.0);
        HermitianOp::new(m, vec![2, 2], vec![1]).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn eta_scale_invariant(e in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16), ai in 0usize..5) {
            let a = [Order::Finite(0.3), Order::Finite(0.6), Order::Finite(1.0), Order::Finite(3.0), Order::Infinity][ai];
            let r = isotropic(2, 0.8).unwrap();
            let s = isotropic(2, 0.1).unwrap();
            let w = rand_pos(&e);
            let base = objective(r.op(), s.op(), &w, a, Form::Eta).unwrap();
            for c in [0.1, 10.0] {
                let v = objective(r.op(), s.op(), &w.scale(c), a, Form::Eta).unwrap();
                prop_assert!((v - base).abs() < 1e-12 * (1.0 + base.abs()));
            }
        }

        #[test]
        fn nu_midpoint_concave(e1 in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16),
                               e2 in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16),
                               ai in 0usize..5) {
            let a = [Order::Finite(0.3), Order::Finite(0.6), Order::Finite(1.0), Order::Finite(2.0), Order::Infinity][ai];
            let r = isotropic(2, 0.8).unwrap();
            let s = isotropic(2, 0.1).unwrap();
            let (w1, w2) = (rand_pos(&e1), rand_pos(&e2));
            let mid = (&w1 + &w2).scale(0.5);
            let f = |w: &HermitianOp| objective(r.op(), s.op(), w, a, Form::Nu).unwrap();
            let (f1, f2) = (f(&w1), f(&w2));
            if f1.is_finite() && f2.is_finite() {
                if a.value() < 1.0 {
                    prop_assert!(f(&mid) >= f1.min(f2) - 1e-10);
                } else {
                    prop_assert!(f(&mid) >= 0.5 * (f1 + f2) - 1e-10);
                }
            }
        }

        #[test]
        fn nu_at_scaled_equals_eta(e in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16), ai in 0usize..5) {
            let a = [Order::Finite(0.3), Order::Finite(0.6), Order::Finite(1.0), Order::Finite(3.0), Order::Infinity][ai];
            let r = isotropic(2, 0.8).unwrap();
            let s = isotropic(2, 0.1).unwrap();
            let w = rand_pos(&e);
            let ev = evaluate(r.op(), s.op(), &w, a, false).unwrap();
            prop_assert!((ev.nu - ev.eta).abs() < 1e-10 * (1.0 + ev.eta.abs()));
            let nu_direct = objective(r.op(), s.op(), &w.scale(ev.lambda_star), a, Form::Nu).unwrap();
            prop_assert!((nu_direct - ev.eta).abs() < 1e-9 * (1.0 + ev.eta.abs()));
        }
    }
}
