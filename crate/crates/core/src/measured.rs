//! Measured Rényi divergences: evaluation for a fixed POVM and lower-bound
//! search over local measurements.
//!
//! Local measurements are rank-one and parameterized by unitaries. For the
//! projective classes the columns of a `d × d` unitary form the measurement
//! basis. For LO and LOCC1 the party's measurement is a rank-one POVM with
//! `d²` outcomes read off from the first `d` rows of a `d² × d²` unitary
//! (a Naimark dilation), so `ã_x = U[0..d, x]` and `M_x = ã_x ã_x†`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{renyi, renyi_weights, ExtReal, Order};
use crate::error::{Error, Result};
use crate::linops::{CMat, DensityOp, HermitianOp, C64};
use crate::optim::{haar_unitary, nelder_mead_max, unitary_from_params, unitary_params};
use crate::povm::{born, conditional, product, MeasClass, Povm};
use crate::report::{BoundKind, BoundResult, SolveStatus};

pub use crate::varprog::measured_fidelity_bound;

/// D_α of the statistics of `p` on ρ and σ; a lower bound on D_α^M for any
/// class M containing `p`.
pub fn divergence_with_povm(rho: &DensityOp, sigma: &DensityOp, p: &Povm, alpha: Order) -> Result<ExtReal> {
    renyi(&born(rho, p)?, &born(sigma, p)?, alpha)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_evals: usize,
    pub seed: u64,
    /// Initial simplex edge in chart coordinates.
    pub step: f64,
    pub ftol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_evals: 2000,
            seed: 0x6d72_6400,
            step: 0.4,
            ftol: 1e-12,
        }
    }
}

/// Local unitaries defining a measurement. `u_b` has one entry for LO and
/// one per A outcome for LOCC1.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPvmParams {
    pub u_a: CMat,
    pub u_b: Vec<CMat>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    PLo,
    PLocc1,
    Lo,
    Locc1,
}

impl Family {
    fn class(self) -> MeasClass {
        match self {
            Family::PLo => MeasClass::PLo,
            Family::PLocc1 => MeasClass::PLocc1,
            Family::Lo => MeasClass::Lo,
            Family::Locc1 => MeasClass::Locc1,
        }
    }

    fn dilate_a(self) -> bool {
        matches!(self, Family::Lo | Family::Locc1)
    }

    fn dilate_b(self) -> bool {
        self == Family::Lo
    }

    fn conditional(self) -> bool {
        matches!(self, Family::PLocc1 | Family::Locc1)
    }
}

struct Problem {
    da: usize,
    db: usize,
    rho: CMat,
    sigma: CMat,
    alpha: Order,
    family: Family,
}

impl Problem {
    fn ma(&self) -> usize {
        if self.family.dilate_a() {
            self.da * self.da
        } else {
            self.da
        }
    }

    fn mb(&self) -> usize {
        if self.family.dilate_b() {
            self.db * self.db
        } else {
            self.db
        }
    }

    fn n_b(&self) -> usize {
        if self.family.conditional() {
            self.ma()
        } else {
            1
        }
    }

    fn n_params(&self) -> usize {
        unitary_params(self.ma()) + self.n_b() * unitary_params(self.mb())
    }

    fn unitaries(&self, base: &LocalPvmParams, theta: &[f64]) -> LocalPvmParams {
        let pa = unitary_params(self.ma());
        let pb = unitary_params(self.mb());
        let u_a = unitary_from_params(&base.u_a, &theta[..pa]);
        let u_b = (0..self.n_b())
            .map(|k| unitary_from_params(&base.u_b[k], &theta[pa + k * pb..pa + (k + 1) * pb]))
            .collect();
        LocalPvmParams { u_a, u_b }
    }

    /// Outcome statistics of ρ and σ, indexed x·m_B + y.
    fn stats(&self, u: &LocalPvmParams) -> (Vec<f64>, Vec<f64>) {
        let (da, db, ma, mb) = (self.da, self.db, self.ma(), self.mb());
        let mut mu = Vec::with_capacity(ma * mb);
        let mut nu = Vec::with_capacity(ma * mb);
        let mut cr = vec![C64::new(0.0, 0.0); db * db];
        let mut cs = vec![C64::new(0.0, 0.0); db * db];
        for x in 0..ma {
            let a: Vec<C64> = (0..da).map(|i| u.u_a[(i, x)]).collect();
            for v in cr.iter_mut().chain(cs.iter_mut()) {
                *v = C64::new(0.0, 0.0);
            }
            for i in 0..da {
                if a[i].norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..da {
                    let w = a[i].conj() * a[j];
                    if w.norm_sqr() == 0.0 {
                        continue;
                    }
                    for k in 0..db {
                        for l in 0..db {
                            cr[k * db + l] += w * self.rho[(i * db + k, j * db + l)];
                            cs[k * db + l] += w * self.sigma[(i * db + k, j * db + l)];
                        }
                    }
                }
            }
            let ub = &u.u_b[if self.family.conditional() { x } else { 0 }];
            for y in 0..mb {
                let (mut r, mut s) = (0.0, 0.0);
                for k in 0..db {
                    let bk = ub[(k, y)].conj();
                    let (mut tr, mut ts) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                    for l in 0..db {
                        tr += cr[k * db + l] * ub[(l, y)];
                        ts += cs[k * db + l] * ub[(l, y)];
                    }
                    r += (bk * tr).re;
                    s += (bk * ts).re;
                }
                mu.push(r.max(0.0));
                nu.push(s.max(0.0));
            }
        }
        (mu, nu)
    }

    fn value(&self, u: &LocalPvmParams) -> f64 {
        let (mu, nu) = self.stats(u);
        renyi_weights(&mu, &nu, self.alpha).to_f64()
    }

    fn identity_start(&self) -> LocalPvmParams {
        LocalPvmParams {
            u_a: CMat::identity(self.ma(), self.ma()),
            u_b: vec![CMat::identity(self.mb(), self.mb()); self.n_b()],
        }
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> LocalPvmParams {
        LocalPvmParams {
            u_a: haar_unitary(self.ma(), rng),
            u_b: (0..self.n_b()).map(|_| haar_unitary(self.mb(), rng)).collect(),
        }
    }

    fn check_warm(&self, w: &LocalPvmParams) -> Result<()> {
        let ok = w.u_a.nrows() == self.ma()
            && w.u_b.len() == self.n_b()
            && w.u_b.iter().all(|u| u.nrows() == self.mb());
        if ok {
            Ok(())
        } else {
            Err(Error::structural("warm start does not match the measurement family"))
        }
    }

    fn povm(&self, u: &LocalPvmParams) -> Result<Povm> {
        let local = |m: &CMat, d: usize, cols: usize| -> Vec<HermitianOp> {
            (0..cols)
                .map(|x| {
                    HermitianOp::from_parts(
                        CMat::from_fn(d, d, |i, j| m[(i, x)] * m[(j, x)].conj()),
                        vec![d],
                        vec![],
                    )
                })
                .collect()
        };
        let a = local(&u.u_a, self.da, self.ma());
        let keep: Vec<usize> = (0..a.len()).filter(|&x| a[x].trace() > 1e-13).collect();
        let a_kept: Vec<HermitianOp> = keep.iter().map(|&x| a[x].clone()).collect();
        let prune = |v: Vec<HermitianOp>| -> Vec<HermitianOp> {
            v.into_iter().filter(|e| e.trace() > 1e-13).collect()
        };
        if self.family.conditional() {
            let b: Vec<Vec<HermitianOp>> = keep
                .iter()
                .map(|&x| prune(local(&u.u_b[x], self.db, self.mb())))
                .collect();
            conditional(&a_kept, &b)
        } else {
            product(&a_kept, &prune(local(&u.u_b[0], self.db, self.mb())))
        }
    }
}

struct RunOutcome {
    value: f64,
    params: LocalPvmParams,
    evals: usize,
    converged: bool,
}

/// Nelder–Mead with re-centred restarts of the chart until the budget is
/// spent or a fresh simplex no longer improves.
fn run_from(pb: &Problem, start: LocalPvmParams, cfg: &SearchConfig) -> RunOutcome {
    let n = pb.n_params();
    let mut base = start;
    let mut best = pb.value(&base);
    let mut evals = 1;
    let mut converged = false;
    let mut step = cfg.step;
    while evals < cfg.max_evals && best.is_finite() {
        let mut f = |t: &[f64]| pb.value(&pb.unitaries(&base, t));
        let out = nelder_mead_max(&mut f, &vec![0.0; n], step, cfg.max_evals - evals, cfg.ftol);
        evals += out.evaluations;
        let gain = out.value - best;
        if out.value > best {
            base = pb.unitaries(&base, &out.x);
            best = out.value;
        }
        if out.converged && gain <= cfg.ftol * (1.0 + best.abs()) {
            if step < cfg.step * 0.05 {
                converged = true;
                break;
            }
            step *= 0.25;
        }
    }
    if best == f64::INFINITY {
        converged = true;
    }
    RunOutcome {
        value: best,
        params: base,
        evals,
        converged,
    }
}

fn restart_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64 + 1);
    rng
}

fn search(pb: &Problem, warm: Option<&LocalPvmParams>, cfg: &SearchConfig) -> Result<(BoundResult, LocalPvmParams)> {
    if let Some(w) = warm {
        pb.check_warm(w)?;
    }
    let restarts = cfg.restarts.max(1);
    let outcomes: Vec<RunOutcome> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                warm.cloned().unwrap_or_else(|| pb.identity_start())
            } else if r == 1 && warm.is_some() {
                pb.identity_start()
            } else {
                pb.random_start(&mut restart_rng(cfg.seed, r))
            };
            run_from(pb, start, cfg)
        })
        .collect();
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.value > outcomes[best].value {
            best = i;
        }
    }
    let total: usize = outcomes.iter().map(|o| o.evals).sum();
    let o = &outcomes[best];
    let status = if o.converged {
        SolveStatus::Converged
    } else {
        SolveStatus::Budget
    };
    let mut res = BoundResult::new(
        ExtReal::from_f64(o.value.max(0.0)),
        BoundKind::Lower,
        pb.alpha,
        pb.family.class().name(),
    )
    .with_status(status, total);
    res.povm = Some(pb.povm(&o.params)?);
    Ok((res, o.params.clone()))
}

fn problem(rho: &DensityOp, sigma: &DensityOp, alpha: Order, family: Family) -> Result<Problem> {
    if rho.dim() != sigma.dim() {
        return Err(Error::structural("states differ in dimension"));
    }
    let r = rho.to_ab_blocks()?;
    let s = sigma.to_ab_blocks()?;
    if r.dims() != s.dims() {
        return Err(Error::structural("states differ in bipartite layout"));
    }
    Ok(Problem {
        da: r.dims()[0],
        db: r.dims()[1],
        rho: r.into_matrix(),
        sigma: s.into_matrix(),
        alpha,
        family,
    })
}

fn embed(u: &CMat, m: usize) -> CMat {
    let d = u.nrows();
    let mut out = CMat::identity(m, m);
    out.view_mut((0, 0), (d, d)).copy_from(u);
    out
}

/// Measurement search in one of the local classes. Returns the best bound
/// found and the unitaries achieving it. A warm start must match the class
/// layout (see [`LocalPvmParams`]); restart 0 begins there.
pub fn search_local(
    rho: &DensityOp,
    sigma: &DensityOp,
    alpha: Order,
    class: MeasClass,
    cfg: &SearchConfig,
    warm: Option<&LocalPvmParams>,
) -> Result<(BoundResult, LocalPvmParams)> {
    let fam = match class {
        MeasClass::PLo => Family::PLo,
        MeasClass::PLocc1 => Family::PLocc1,
        MeasClass::Lo => Family::Lo,
        MeasClass::Locc1 => Family::Locc1,
        other => {
            return Err(Error::domain(format!(
                "measurement search supports LO, LOCC1, P-LO, P-LOCC1, not {other}"
            )))
        }
    };
    let pb = problem(rho, sigma, alpha, fam)?;
    search(&pb, warm, cfg)
}

fn better(a: (BoundResult, LocalPvmParams), b: (BoundResult, LocalPvmParams)) -> (BoundResult, LocalPvmParams) {
    if b.0.nats() > a.0.nats() {
        b
    } else {
        a
    }
}

/// Lower bound on D_α^M for M ∈ {P-LO, P-LOCC1, LO, LOCC1}.
///
/// Searches cascade along the class inclusions: the projective search seeds
/// the dilated one, and LOCC1 also takes the LO optimum into account, so the
/// reported values respect P-LO ≤ LO ≤ LOCC1 and P-LO ≤ P-LOCC1 ≤ LOCC1.
pub fn optimize_measured(
    rho: &DensityOp,
    sigma: &DensityOp,
    alpha: Order,
    class: MeasClass,
    cfg: &SearchConfig,
) -> Result<BoundResult> {
    Ok(optimize_measured_with_params(rho, sigma, alpha, class, cfg)?.0)
}

pub fn optimize_measured_with_params(
    rho: &DensityOp,
    sigma: &DensityOp,
    alpha: Order,
    class: MeasClass,
    cfg: &SearchConfig,
) -> Result<(BoundResult, LocalPvmParams)> {
    let plo = search_local(rho, sigma, alpha, MeasClass::PLo, cfg, None)?;
    let (da, db) = rho.party_dims();
    let lift_lo = |p: &LocalPvmParams| LocalPvmParams {
        u_a: embed(&p.u_a, da * da),
        u_b: vec![embed(&p.u_b[0], db * db)],
    };
    let out = match class {
        MeasClass::PLo => plo,
        MeasClass::Lo => {
            let w = lift_lo(&plo.1);
            let lo = search_local(rho, sigma, alpha, MeasClass::Lo, cfg, Some(&w))?;
            better(lo, plo)
        }
        MeasClass::PLocc1 | MeasClass::Locc1 => {
            let w = LocalPvmParams {
                u_a: plo.1.u_a.clone(),
                u_b: vec![plo.1.u_b[0].clone(); da],
            };
            let plocc = better(search_local(rho, sigma, alpha, MeasClass::PLocc1, cfg, Some(&w))?, plo.clone());
            if class == MeasClass::PLocc1 {
                plocc
            } else {
                let mut ub: Vec<CMat> = plocc.1.u_b.clone();
                ub.resize(da * da, CMat::identity(db, db));
                let w = LocalPvmParams {
                    u_a: embed(&plocc.1.u_a, da * da),
                    u_b: ub,
                };
                let locc = search_local(rho, sigma, alpha, MeasClass::Locc1, cfg, Some(&w))?;
                let lo = search_local(rho, sigma, alpha, MeasClass::Lo, cfg, Some(&lift_lo(&plo.1)))?;
                let best = better(better(locc, plocc), lo);
                let mut res = best.0;
                res.class = MeasClass::Locc1.name().to_string();
                (res, best.1)
            }
        }
        other => {
            return Err(Error::domain(format!(
                "measurement search supports LO, LOCC1, P-LO, P-LOCC1, not {other}"
            )))
        }
    };
    let mut res = out.0;
    res.class = class.name().to_string();
    Ok((res, out.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{binary_from_operator, local_basis_measurement};
    use crate::states::{antisymmetric, isotropic, phi, phi_perp, symmetric};

    fn quick() -> SearchConfig {
        SearchConfig {
            restarts: 4,
            max_evals: 600,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn fixed_povm_values() {
        for d in 2..4 {
            let (r, s) = (phi(d).unwrap(), phi_perp(d).unwrap());
            let t = binary_from_operator(r.op()).unwrap();
            assert_eq!(divergence_with_povm(&r, &s, &t, Order::Finite(2.0)).unwrap(), ExtReal::PosInf);
            let l = local_basis_measurement(d).unwrap();
            for a in [Order::Finite(0.5), Order::Finite(1.0), Order::Finite(3.0), Order::Infinity] {
                let v = divergence_with_povm(&r, &s, &l, a).unwrap().to_f64();
                assert!((v - ((d + 1) as f64).ln()).abs() < 1e-12);
            }
            assert_eq!(divergence_with_povm(&r, &r, &l, Order::Finite(2.0)).unwrap(), ExtReal::Finite(0.0));
        }
    }

    #[test]
    fn phi_vs_perp_lo() {
        let r = optimize_measured(&phi(2).unwrap(), &phi_perp(2).unwrap(), Order::Finite(2.0), MeasClass::Lo, &quick())
            .unwrap();
        assert!((r.nats() - 3f64.ln()).abs() < 1e-4);
        assert_eq!(r.kind, BoundKind::Lower);
        assert_eq!(r.class, "LO");
        assert!(r.povm.is_some());
    }

    #[test]
    fn antisym_vs_sym_lo() {
        let r = optimize_measured(
            &antisymmetric(2).unwrap(),
            &symmetric(2).unwrap(),
            Order::Finite(1.0),
            MeasClass::Lo,
            &quick(),
        )
        .unwrap();
        assert!((r.nats() - 3f64.ln()).abs() < 1e-4, "{}", r.nats());
    }

    #[test]
    fn identical_states_give_zero() {
        let s = isotropic(2, 0.3).unwrap();
        for c in [MeasClass::PLo, MeasClass::Lo, MeasClass::Locc1] {
            let r = optimize_measured(&s, &s, Order::Finite(0.7), c, &quick()).unwrap();
            assert!(r.nats().abs() < 1e-12);
        }
    }

    #[test]
    fn class_chain_respected() {
        let (r, s) = (isotropic(2, 0.8).unwrap(), isotropic(2, 0.2).unwrap());
        let a = Order::Finite(2.0);
        let plo = optimize_measured(&r, &s, a, MeasClass::PLo, &quick()).unwrap().nats();
        let lo = optimize_measured(&r, &s, a, MeasClass::Lo, &quick()).unwrap().nats();
        let plocc = optimize_measured(&r, &s, a, MeasClass::PLocc1, &quick()).unwrap().nats();
        let locc = optimize_measured(&r, &s, a, MeasClass::Locc1, &quick()).unwrap().nats();
        assert!(plo <= lo + 1e-12 && lo <= locc + 1e-12 && plo <= plocc + 1e-12 && plocc <= locc + 1e-12);
    }

    #[test]
    fn reported_povm_reproduces_value() {
        let (r, s) = (isotropic(2, 0.9).unwrap(), isotropic(2, 0.3).unwrap());
        let a = Order::Finite(0.5);
        for c in [MeasClass::Lo, MeasClass::Locc1] {
            let res = optimize_measured(&r, &s, a, c, &quick()).unwrap();
            let p = res.povm.as_ref().unwrap();
            assert!(p.class().is_subclass_of(c));
            let v = divergence_with_povm(&r, &s, p, a).unwrap().to_f64();
            assert!((v - res.nats()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_global_class() {
        let s = isotropic(2, 0.3).unwrap();
        assert!(optimize_measured(&s, &s, Order::Finite(2.0), MeasClass::Ppt, &quick()).is_err());
    }
}
