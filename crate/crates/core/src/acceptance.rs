//! Reproduction scorecard: nine numbered checks with fixed tolerances, each
//! reporting PASS or FAIL with its supporting measurements.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::classical::{l1_distance, renyi, renyi_weights, ExtReal, FiniteMeasure, Order};
use crate::closedform::{
    iso_measured, solve_scalar_program, variational_gap_value, werner_measured, ProgramKind, ScalarProgram,
    WernerTarget,
};
use crate::error::Result;
use crate::exponents::{
    error_tradeoff_bound, evaluate_test, stein_preset, strong_converse_exponent, strong_converse_preset, Preset,
};
use crate::linops::{CMat, DensityOp, HermitianOp, C64, DEFAULT_DIM_CAP};
use crate::maxdiv::{explicit_certificate, ppt_max_bracket, ppt_max_dual, ppt_max_primal, quantum_max_divergence, CertFamily, MaxDivConfig, CERT_TOL};
use crate::measured::{divergence_with_povm, SearchConfig};
use crate::optim::nelder_mead_max;
use crate::povm::{isotropic_measurement, local_basis_measurement, povm_tensor_power, MeasClass, Povm};
use crate::states::{antisymmetric, isotropic, phi, phi_perp, symmetric, werner};
use crate::varprog::{objective, plo_exact, variational_bound, ConeKind, ConeSpec, Form, VarConfig};

pub const SEED: u64 = 0x4d52_4400;

const ALPHAS: [Order; 4] = [Order::Finite(0.5), Order::Finite(1.0), Order::Finite(2.0), Order::Infinity];

pub const TITLES: [&str; 9] = [
    "Φ vs Φ⊥ sandwich equals log(d+1)",
    "Φ vs i(q) sandwich equals log((d+1)/(qd+1))",
    "isotropic closed form vs scalar program and I-measurement",
    "additivity certificates and dual recovery",
    "strict variational gap for isotropic pairs",
    "Werner suite",
    "Stein and strong-converse presets",
    "property suites",
    "data-hiding contrast",
];

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn summary(&self) -> String {
        format!(
            "criterion {}: {} ({}; {} checks)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.lines.len()
        )
    }

    /// Detail lines of failed checks.
    pub fn failures(&self) -> Vec<&str> {
        self.lines.iter().filter(|l| l.starts_with("FAIL")).map(String::as_str).collect()
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.summary())?;
        for l in &self.lines {
            writeln!(f, "  {l}")?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Log {
    lines: Vec<String>,
    ok: bool,
}

impl Log {
    fn new() -> Self {
        Self { lines: Vec::new(), ok: true }
    }

    fn check(&mut self, pass: bool, msg: impl Into<String>) {
        self.ok &= pass;
        self.lines.push(format!("{} {}", if pass { "ok  " } else { "FAIL" }, msg.into()));
    }

    fn result<T>(&mut self, r: Result<T>, what: &str) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(false, format!("{what}: {e}"));
                None
            }
        }
    }

    fn merge(&mut self, other: Log) {
        self.ok &= other.ok;
        self.lines.extend(other.lines);
    }

    fn finish(self, id: usize) -> Outcome {
        Outcome {
            id,
            title: TITLES[id - 1],
            passed: self.ok,
            lines: self.lines,
        }
    }
}

/// Runs one criterion, numbered from 1.
pub fn run(id: usize) -> Outcome {
    let log = match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(),
        _ => {
            let mut l = Log::new();
            l.check(false, format!("no criterion {id}"));
            return Outcome { id, title: "unknown", passed: false, lines: l.lines };
        }
    };
    log.finish(id)
}

pub fn run_all() -> Vec<Outcome> {
    (1..=9).map(run).collect()
}

fn ppt_upper(rho: &DensityOp, sigma: &DensityOp, alpha: Order) -> Result<f64> {
    match alpha {
        Order::Infinity => Ok(ppt_max_dual(rho, sigma, &MaxDivConfig::default())?.nats()),
        _ => Ok(variational_bound(rho, sigma, alpha, &ConeSpec::ppt(), &VarConfig::default())?.value.to_f64()),
    }
}

/// LO lower bound from the local computational-basis measurement and the
/// PPT upper bound, both compared with `target`.
fn sandwich(label: &str, rho: &DensityOp, sigma: &DensityOp, alpha: Order, target: f64, tol: f64) -> Log {
    let mut log = Log::new();
    let d = rho.party_dims().0;
    let lo = local_basis_measurement(d).and_then(|m| divergence_with_povm(rho, sigma, &m, alpha));
    let up = ppt_upper(rho, sigma, alpha);
    if let (Some(lo), Some(up)) = (log.result(lo, label), log.result(up, label)) {
        let lo = lo.to_f64();
        log.check(
            (lo - target).abs() <= tol && (up - target).abs() <= tol,
            format!("{label} α={alpha}: LO {lo:.7} ≤ PPT {up:.7}, target {target:.7}"),
        );
    }
    log
}

fn criterion_1() -> Log {
    let jobs: Vec<(usize, Order)> = [2, 3, 4].iter().flat_map(|&d| ALPHAS.iter().map(move |&a| (d, a))).collect();
    let logs: Vec<Log> = jobs
        .par_iter()
        .map(|&(d, a)| match (phi(d), phi_perp(d)) {
            (Ok(r), Ok(s)) => sandwich(&format!("d={d}"), &r, &s, a, (d as f64 + 1.0).ln(), 1e-3),
            (Err(e), _) | (_, Err(e)) => {
                let mut l = Log::new();
                l.check(false, e.to_string());
                l
            }
        })
        .collect();
    let mut log = Log::new();
    logs.into_iter().for_each(|l| log.merge(l));
    log
}

fn criterion_2() -> Log {
    let mut jobs = Vec::new();
    for d in [2usize, 3] {
        for q in [0.0, 0.1, 1.0 / d as f64, 0.5] {
            for a in ALPHAS {
                jobs.push((d, q, a));
            }
        }
    }
    let logs: Vec<Log> = jobs
        .par_iter()
        .map(|&(d, q, a)| {
            let mut l = Log::new();
            let df = d as f64;
            let target = ((df + 1.0) / (q * df + 1.0)).ln();
            match (phi(d), isotropic(d, q)) {
                (Ok(r), Ok(s)) => l.merge(sandwich(&format!("d={d} q={q:.4}"), &r, &s, a, target, 1e-3)),
                (Err(e), _) | (_, Err(e)) => l.check(false, e.to_string()),
            }
            l
        })
        .collect();
    let mut log = Log::new();
    logs.into_iter().for_each(|l| log.merge(l));
    log
}

fn same(a: ExtReal, b: ExtReal, tol: f64) -> bool {
    a == b || (a.to_f64() - b.to_f64()).abs() <= tol
}

fn criterion_3() -> Log {
    let mut log = Log::new();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let alphas = [Order::Finite(0.3), Order::Finite(0.5), Order::Finite(1.0), Order::Finite(2.0), Order::Infinity];
    for d in [2usize, 3] {
        let Some(meas) = log.result(isotropic_measurement(d), "I-measurement") else {
            continue;
        };
        let (mut worst_prog, mut worst_meas, mut count, mut bad) = (0.0f64, 0.0f64, 0, Vec::new());
        for &p in &grid {
            for &q in &grid {
                for a in alphas {
                    let run = || -> Result<(ExtReal, ExtReal, ExtReal)> {
                        let c = iso_measured(d, p, q, a)?;
                        let s = solve_scalar_program(ScalarProgram { kind: ProgramKind::IsoMeasuredBinary, d, p, q, alpha: a })?;
                        let m = divergence_with_povm(&isotropic(d, p)?, &isotropic(d, q)?, &meas, a)?;
                        Ok((c, s, m))
                    };
                    let Some((c, s, m)) = log.result(run(), &format!("d={d} p={p} q={q} α={a}")) else {
                        continue;
                    };
                    count += 1;
                    let (ok_s, ok_m) = (same(c, s, 1e-6), same(c, m, 1e-12));
                    if c.is_finite() {
                        worst_prog = worst_prog.max((c.to_f64() - s.to_f64()).abs());
                        worst_meas = worst_meas.max((c.to_f64() - m.to_f64()).abs());
                    }
                    if !(ok_s && ok_m) {
                        bad.push(format!("d={d} p={p} q={q} α={a}: closed {c}, program {s}, I-measurement {m}"));
                    }
                }
            }
        }
        log.check(
            bad.is_empty(),
            format!("d={d}: {count} points, max |closed − program| {worst_prog:.2e}, max |closed − I-measurement| {worst_meas:.2e}"),
        );
        for b in bad.into_iter().take(5) {
            log.check(false, b);
        }
    }
    log
}

fn certificate_line(log: &mut Log, fam: CertFamily, d: usize, n: usize) {
    match explicit_certificate(fam, d, n) {
        Ok(c) => {
            let expect = n as f64 * fam.lambda(d).ln();
            let (mx, my) = c.min_eigenvalues().unwrap_or((f64::NAN, f64::NAN));
            log.check(
                my >= -1e-10 && mx >= -1e-10 && c.residual <= CERT_TOL && (c.log_lambda() - expect).abs() < 1e-12,
                format!(
                    "{fam} d={d} n={n}: log λ {:.7}, min eig Y {my:.1e}, residual {:.1e}",
                    c.log_lambda(),
                    c.residual
                ),
            );
        }
        Err(e) => log.check(false, format!("{fam} d={d} n={n}: {e}")),
    }
}

fn criterion_4() -> Log {
    let mut log = Log::new();
    for d in [2, 3] {
        for n in [1, 2, 3] {
            certificate_line(&mut log, CertFamily::PhiVsPerp, d, n);
        }
    }
    let iso = [(0.4, 0.2), (0.9, 0.25), (0.7, 0.7)];
    let wer = [(0.6, 0.9), (0.2, 0.8), (0.3, 0.3)];
    for n in [1, 2] {
        for (p, q) in iso {
            certificate_line(&mut log, CertFamily::Iso { p, q }, 2, n);
        }
        for (p, q) in wer {
            certificate_line(&mut log, CertFamily::Werner { p, q }, 2, n);
        }
    }
    certificate_line(&mut log, CertFamily::Iso { p: 0.25, q: 0.1 }, 3, 2);
    certificate_line(&mut log, CertFamily::Werner { p: 0.0, q: 0.9 }, 3, 2);
    let fams = [CertFamily::PhiVsPerp, CertFamily::Iso { p: 0.9, q: 0.25 }, CertFamily::Werner { p: 0.6, q: 0.9 }];
    let jobs: Vec<(CertFamily, usize)> = fams.iter().flat_map(|&f| [1usize, 2].map(|n| (f, n))).collect();
    let logs: Vec<Log> = jobs
        .par_iter()
        .map(|&(fam, n)| {
            let mut l = Log::new();
            let run = || -> Result<f64> {
                let (r, s) = fam.states(2)?;
                let (r, s) = (r.tensor_power(n, DEFAULT_DIM_CAP)?, s.tensor_power(n, DEFAULT_DIM_CAP)?);
                Ok(ppt_max_dual(&r, &s, &MaxDivConfig::default())?.nats())
            };
            if let Some(v) = l.result(run(), &format!("dual {fam} n={n}")) {
                let expect = n as f64 * fam.lambda(2).ln();
                l.check((v - expect).abs() <= 1e-4, format!("dual bisection {fam} d=2 n={n}: {v:.7} vs n·log λ {expect:.7}"));
            }
            l
        })
        .collect();
    logs.into_iter().for_each(|l| log.merge(l));
    log
}

fn criterion_5() -> Log {
    let points = [
        (Order::Finite(0.25), 1.0, 0.5, Some(0.25)),
        (Order::Finite(0.5), 0.5, 1.0, None),
        (Order::Finite(1.0), 0.5, 0.3, None),
        (Order::Finite(2.0), 0.5, 0.4, None),
    ];
    let logs: Vec<Log> = points
        .par_iter()
        .map(|&(a, p, q, min_gap)| {
            let mut l = Log::new();
            let run = || -> Result<(f64, f64, f64)> {
                let g = variational_gap_value(2, p, q, a)?;
                let v_formula = g.v.map(|v| v.to_f64()).unwrap_or(f64::NAN);
                let cone = ConeSpec::new(ConeKind::Ppt, 1e-10)?;
                let cfg = VarConfig { max_iter: 6000, ..VarConfig::default() };
                let v = variational_bound(&isotropic(2, p)?, &isotropic(2, q)?, a, &cone, &cfg)?.value.to_f64();
                Ok((v, v_formula, g.d.to_f64()))
            };
            if let Some((v, vf, dm)) = l.result(run(), &format!("α={a} p={p} q={q}")) {
                let gap = v - dm;
                let need = min_gap.unwrap_or(0.5 * (vf - dm));
                l.check(
                    (v - vf).abs() <= 1e-3 && gap >= need,
                    format!("d=2 α={a} p={p} q={q}: V solver {v:.6}, V formula {vf:.6}, D closed form {dm:.6}, gap {gap:.4} (needs ≥ {need:.4})"),
                );
            }
            l
        })
        .collect();
    let mut log = Log::new();
    let (v, d) = (2f64.ln(), 1.5f64.ln());
    if let Some(g) = log.result(variational_gap_value(2, 1.0, 0.5, Order::Finite(0.25)), "gap formula") {
        log.check(
            (g.v.map(|x| x.to_f64()).unwrap_or(f64::NAN) - v).abs() < 1e-12 && (g.d.to_f64() - d).abs() < 1e-12,
            format!("closed forms at α=0.25: V = log 2 ({}), D = log 1.5 ({})", v, d),
        );
    }
    logs.into_iter().for_each(|l| log.merge(l));
    log
}

fn criterion_6() -> Log {
    let mut jobs = Vec::new();
    for d in [2usize, 3] {
        for a in ALPHAS {
            jobs.push((d, None, a));
        }
        for q in [0.5, 0.9, 1.0] {
            jobs.push((d, Some(q), Order::Finite(2.0)));
        }
    }
    let logs: Vec<Log> = jobs
        .par_iter()
        .map(|&(d, q, a)| {
            let mut l = Log::new();
            let df = d as f64;
            let (target, sigma, wt) = match q {
                None => (((df + 1.0) / (df - 1.0)).ln(), symmetric(d), WernerTarget::AntiVsSym),
                Some(q) => (((df + 1.0) / (df + 1.0 - 2.0 * q)).ln(), werner(d, q), WernerTarget::AntiVsWerner(q)),
            };
            let label = match q {
                None => format!("Θ⊥ vs Θ d={d}"),
                Some(q) => format!("Θ⊥ vs w({q}) d={d}"),
            };
            if let Some(c) = l.result(werner_measured(d, wt, a), &label) {
                l.check((c.to_f64() - target).abs() < 1e-12, format!("{label} α={a}: closed form {c} vs {target:.12}"));
            }
            match (antisymmetric(d), sigma) {
                (Ok(r), Ok(s)) => l.merge(sandwich(&label, &r, &s, a, target, 1e-3)),
                (Err(e), _) | (_, Err(e)) => l.check(false, e.to_string()),
            }
            l
        })
        .collect();
    let mut log = Log::new();
    logs.into_iter().for_each(|l| log.merge(l));
    for d in [2, 3] {
        certificate_line(&mut log, CertFamily::AntiVsSym, d, 2);
        for q in [0.9, 1.0] {
            certificate_line(&mut log, CertFamily::Werner { p: 0.0, q }, d, 2);
        }
    }
    let e = explicit_certificate(CertFamily::Werner { p: 0.0, q: 0.5 }, 2, 2);
    log.check(e.is_err(), "Θ⊥ vs w(0.5) d=2 lies outside the certified region and is rejected");
    log
}

fn criterion_7() -> Log {
    let mut log = Log::new();
    let cases = [(2usize, 0.0), (2, 0.125), (2, 0.25), (3, 0.0), (3, 1.0 / 9.0)];
    for (d, q) in cases {
        let df = d as f64;
        let f = ((df + 1.0) / (q * df + 1.0)).ln();
        let pre = Preset::PhiVsIso { d, q };
        if let Some(s) = log.result(stein_preset(pre), "stein") {
            let v = s.value.unwrap_or(f64::NAN);
            let c = iso_measured(d, 1.0, q, Order::Finite(1.0)).map(|x| x.to_f64()).unwrap_or(f64::NAN);
            log.check(
                s.valid && s.certified && (v - f).abs() <= 1e-12 && (v - c).abs() <= 1e-12,
                format!("Stein Φ vs i({q:.4}) d={d}: {v:.15} vs formula {f:.15}"),
            );
        }
        for dr in [0.0, 0.5, 2.0] {
            let r = f + dr;
            if let Some(s) = log.result(strong_converse_preset(pre, r), "strong converse") {
                let v = s.value.unwrap_or(f64::NAN);
                log.check((v - dr).abs() <= 1e-12, format!("strong converse Φ vs i({q:.4}) d={d} r=D+{dr}: {v:.15}"));
            }
            if let Some(curve) = log.result(pre.curve(), "curve") {
                if let Some(s) = log.result(strong_converse_exponent(r, &curve), "strong converse search") {
                    let v = s.value.unwrap_or(f64::NAN);
                    log.check((v - dr).abs() <= 1e-6, format!("strong converse search d={d} r=D+{dr}: {v:.9}"));
                }
            }
        }
    }
    for (pre, f) in [
        (Preset::PhiVsPerp { d: 3 }, 4f64.ln()),
        (Preset::AntiVsWerner { d: 2, q: 1.0 }, 3f64.ln()),
        (Preset::AntiVsWerner { d: 3, q: 0.9 }, (4.0 / 2.2f64).ln()),
    ] {
        if let Some(s) = log.result(stein_preset(pre), "stein") {
            let v = s.value.unwrap_or(f64::NAN);
            log.check(s.valid && (v - f).abs() <= 1e-12, format!("Stein {pre:?}: {v:.15} vs {f:.15}"));
        }
    }
    for pre in [Preset::PhiVsIso { d: 2, q: 0.3 }, Preset::PhiVsIso { d: 3, q: 0.2 }, Preset::AntiVsWerner { d: 2, q: 0.7 }] {
        let s = stein_preset(pre);
        let c = strong_converse_preset(pre, 5.0);
        let rejected = matches!((&s, &c), (Ok(a), Ok(b)) if !a.valid && !b.valid && a.value.is_none() && b.value.is_none());
        log.check(rejected, format!("{pre:?} outside its validity region is rejected"));
    }
    log
}

fn criterion_8() -> Log {
    let parts: Vec<fn() -> Log> = vec![
        prop_monotone_alpha,
        prop_superadditive,
        prop_dpi_pinsker,
        prop_eta_nu,
        prop_weak_duality,
        prop_psd_exact,
        prop_bloch_oracle,
        prop_tradeoff,
    ];
    let logs: Vec<Log> = parts.par_iter().map(|f| f()).collect();
    let mut log = Log::new();
    logs.into_iter().for_each(|l| log.merge(l));
    log
}

fn criterion_9() -> Log {
    let mut log = Log::new();
    for d in [2usize, 3, 4] {
        let run = || -> Result<(ExtReal, f64, f64)> {
            let (r, s) = (phi(d)?, phi_perp(d)?);
            let q = quantum_max_divergence(&r, &s)?;
            let lo = ppt_max_primal(&r, &s, &MaxDivConfig::default())?.nats();
            let up = ppt_max_dual(&r, &s, &MaxDivConfig::default())?.nats();
            Ok((q, lo, up))
        };
        if let Some((q, lo, up)) = log.result(run(), &format!("d={d}")) {
            log.check(
                q == ExtReal::PosInf && lo.is_finite() && up.is_finite() && lo <= up + 1e-6 && (up - (d as f64 + 1.0).ln()).abs() <= 1e-3,
                format!("d={d}: D_max^ALL = {q}, PPT max-divergence in [{lo:.7}, {up:.7}]"),
            );
        }
    }
    log
}

fn random_state(rng: &mut ChaCha8Rng, d: usize, floor: f64) -> DensityOp {
    let n = d * d;
    let g = DMatrix::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let m: CMat = &g * g.adjoint() + CMat::identity(n, n) * C64::new(floor, 0.0);
    let t = m.trace().re;
    let op = HermitianOp::new(m / C64::new(t, 0.0), vec![d, d], vec![1]).expect("layout");
    DensityOp::new(op).expect("density operator")
}

fn random_diag_state(rng: &mut ChaCha8Rng) -> (DensityOp, Vec<f64>) {
    let w: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|x| x / s).collect();
    let op = HermitianOp::diag(&w).with_layout(vec![2, 2], vec![1]).expect("layout");
    (DensityOp::new(op).expect("density operator"), w)
}

fn random_prob(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn prop_monotone_alpha() -> Log {
    let mut log = Log::new();
    let alphas: Vec<Order> = [0.2, 0.4, 0.5, 0.7, 0.9, 1.0, 1.3, 2.0, 4.0, 10.0, f64::INFINITY]
        .iter()
        .map(|&a| Order::new(a).expect("order"))
        .collect();
    let mut viol = 0usize;
    let mut n = 0usize;
    for d in [2usize, 3] {
        for i in 0..=10 {
            for j in 0..=10 {
                let (p, q) = (i as f64 / 10.0, j as f64 / 10.0);
                let vals: Vec<f64> = alphas.iter().map(|&a| iso_measured(d, p, q, a).map(|x| x.to_f64()).unwrap_or(f64::NAN)).collect();
                n += 1;
                if vals.windows(2).any(|w| !(w[1] >= w[0] - 1e-12)) {
                    viol += 1;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let m = local_basis_measurement(2).expect("measurement");
    for _ in 0..20 {
        let (r, s) = (random_state(&mut rng, 2, 0.0), random_state(&mut rng, 2, 0.01));
        let vals: Vec<f64> = alphas.iter().map(|&a| divergence_with_povm(&r, &s, &m, a).map(|x| x.to_f64()).unwrap_or(f64::NAN)).collect();
        n += 1;
        if vals.windows(2).any(|w| !(w[1] >= w[0] - 1e-12)) {
            viol += 1;
        }
    }
    log.check(viol == 0, format!("monotonicity in α: {n} curves, {viol} violations"));
    log
}

fn prop_superadditive() -> Log {
    let mut log = Log::new();
    for (p, q, a) in [(0.8, 0.2, Order::Finite(2.0)), (0.9, 0.4, Order::Finite(1.0)), (0.6, 0.1, Order::Finite(0.7))] {
        let run = || -> Result<(f64, f64, f64)> {
            let (r, s) = (isotropic(2, p)?, isotropic(2, q)?);
            let one = iso_measured(2, p, q, a)?.to_f64();
            let m2 = povm_tensor_power(&isotropic_measurement(2)?, 2, DEFAULT_DIM_CAP)?;
            let (r2, s2) = (r.tensor_power(2, DEFAULT_DIM_CAP)?, s.tensor_power(2, DEFAULT_DIM_CAP)?);
            let prod = divergence_with_povm(&r2, &s2, &m2, a)?.to_f64();
            let up2 = variational_bound(&r2, &s2, a, &ConeSpec::ppt(), &VarConfig::default())?.value.to_f64();
            Ok((one, prod, up2))
        };
        if let Some((one, prod, up2)) = log.result(run(), "superadditivity") {
            log.check(
                (prod - 2.0 * one).abs() <= 1e-10 && up2 >= 2.0 * one - 1e-6,
                format!("superadditivity i({p}) vs i({q}) α={a}: 2·D {:.7}, product test {prod:.7}, PPT upper on 2 copies {up2:.7}", 2.0 * one),
            );
        }
    }
    log
}

fn prop_dpi_pinsker() -> Log {
    let mut log = Log::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let alphas = [0.3, 0.5, 0.9, 1.0, 1.5, 3.0, f64::INFINITY].map(|a| Order::new(a).expect("order"));
    let (mut dpi_viol, mut pinsker_viol, mut n) = (0, 0, 0);
    for _ in 0..200 {
        let k = rng.gen_range(2..6);
        let m = rng.gen_range(2..5);
        let mu = FiniteMeasure::from_weights(random_prob(&mut rng, k)).expect("measure");
        let nu = FiniteMeasure::from_weights(random_prob(&mut rng, k)).expect("measure");
        let cols: Vec<Vec<f64>> = (0..k).map(|_| random_prob(&mut rng, m)).collect();
        let t: Vec<Vec<f64>> = (0..m).map(|y| (0..k).map(|x| cols[x][y]).collect()).collect();
        let (pm, pn) = (mu.push_forward(&t).expect("channel"), nu.push_forward(&t).expect("channel"));
        for a in alphas {
            n += 1;
            let before = renyi(&mu, &nu, a).expect("renyi").to_f64();
            let after = renyi(&pm, &pn, a).expect("renyi").to_f64();
            if after > before + 1e-12 {
                dpi_viol += 1;
            }
        }
        let kl = renyi(&mu, &nu, Order::Finite(1.0)).expect("renyi").to_f64();
        let l1 = l1_distance(&mu, &nu).expect("l1");
        if kl < 0.5 * l1 * l1 - 1e-12 {
            pinsker_viol += 1;
        }
    }
    log.check(dpi_viol == 0, format!("classical DPI: {n} channel instances, {dpi_viol} violations"));
    log.check(pinsker_viol == 0, format!("Pinsker: 200 pairs, {pinsker_viol} violations"));
    log
}

fn random_pos(rng: &mut ChaCha8Rng) -> HermitianOp {
    let g = DMatrix::from_fn(4, 4, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let m: CMat = &g * g.adjoint() + CMat::identity(4, 4) * C64::new(0.05, 0.0);
    HermitianOp::new(m, vec![2, 2], vec![1]).expect("layout")
}

fn prop_eta_nu() -> Log {
    let mut log = Log::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let (r, s) = (isotropic(2, 0.8).expect("state"), isotropic(2, 0.1).expect("state"));
    let scale_alphas = [0.3, 0.6, 1.0, 3.0, f64::INFINITY].map(|a| Order::new(a).expect("order"));
    let conc_alphas = [1.0, 1.5, 2.0, 5.0, f64::INFINITY].map(|a| Order::new(a).expect("order"));
    let quasi_alphas = [0.3, 0.6, 0.9].map(|a| Order::new(a).expect("order"));
    let (mut sv, mut cv, mut qv, mut n) = (0, 0, 0, 0);
    for _ in 0..100 {
        let (w1, w2) = (random_pos(&mut rng), random_pos(&mut rng));
        for a in scale_alphas {
            let base = objective(r.op(), s.op(), &w1, a, Form::Eta).unwrap_or(f64::NAN);
            for c in [0.1, 10.0] {
                let v = objective(r.op(), s.op(), &w1.scale(c), a, Form::Eta).unwrap_or(f64::NAN);
                if !((v - base).abs() < 1e-12 * (1.0 + base.abs())) {
                    sv += 1;
                }
            }
        }
        let mid = (&w1 + &w2).scale(0.5);
        for a in conc_alphas {
            let f = |w: &HermitianOp| objective(r.op(), s.op(), w, a, Form::Nu).unwrap_or(f64::NAN);
            let (f1, f2, fm) = (f(&w1), f(&w2), f(&mid));
            n += 1;
            if !(fm >= 0.5 * (f1 + f2) - 1e-10) {
                cv += 1;
            }
        }
        for a in quasi_alphas {
            let f = |w: &HermitianOp| objective(r.op(), s.op(), w, a, Form::Nu).unwrap_or(f64::NAN);
            if !(f(&mid) >= f(&w1).min(f(&w2)) - 1e-10) {
                qv += 1;
            }
        }
    }
    // For α < 1, ν is a decreasing function of a convex one: on ω = c·1 with
    // ρ = σ, ν(c) = log(αc^{(α−1)/α} + (1−α)c)/(α−1), convex for large c.
    let a = 0.6;
    let nu = |c: f64| (a * c.powf((a - 1.0) / a) + (1.0 - a) * c).ln() / (a - 1.0);
    let (n10, n20, n30) = (nu(10.0), nu(20.0), nu(30.0));
    log.check(
        n20 < 0.5 * (n10 + n30),
        format!("ν at α=0.6 is not midpoint concave: ν(10)={n10:.4}, ν(20)={n20:.4}, ν(30)={n30:.4}; α < 1 is checked for quasi-concavity"),
    );
    log.check(qv == 0, format!("ν quasi-concavity for α ∈ {{0.3, 0.6, 0.9}}: 300 pairs, {qv} violations"));
    log.check(sv == 0, format!("η scale invariance: 100 operators × 5 orders × 2 scales, {sv} violations"));
    log.check(cv == 0, format!("ν midpoint concavity for α ≥ 1: {n} pairs, {cv} violations"));
    log
}

fn prop_weak_duality() -> Log {
    let mut log = Log::new();
    let seeds: Vec<u64> = (0..100).collect();
    let cfg = MaxDivConfig {
        primal: VarConfig { max_iter: 1500, ..VarConfig::default() },
        width: 1e-4,
        feas_max_iter: 1000,
        ..MaxDivConfig::default()
    };
    let res: Vec<(u64, Result<(f64, f64, f64)>)> = seeds
        .par_iter()
        .map(|&k| {
            let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ (k + 1000));
            let (r, s) = (random_state(&mut rng, 2, 0.02), random_state(&mut rng, 2, 0.02));
            let run = || -> Result<(f64, f64, f64)> {
                let (p, d) = ppt_max_bracket(&r, &s, &cfg)?;
                let (p, d) = (p.nats(), d.nats());
                let q = quantum_max_divergence(&r, &s)?.to_f64();
                Ok((p, d, q))
            };
            (k, run())
        })
        .collect();
    let (mut viol, mut worst, mut widest) = (Vec::new(), f64::NEG_INFINITY, 0.0f64);
    let slack = (1.0 + cfg.width).ln() + 1e-9;
    for (k, r) in res {
        match r {
            Ok((p, d, q)) => {
                worst = worst.max(p - d);
                widest = widest.max(d - p);
                if !(p <= d + 2e-6 && d <= q + slack) {
                    viol.push(format!("seed {k}: primal {p}, dual {d}, quantum {q}"));
                }
            }
            Err(e) => viol.push(format!("seed {k}: {e}")),
        }
    }
    log.check(
        viol.is_empty(),
        format!(
            "weak duality on 100 seeded 2⊗2 pairs: max(primal − dual) {worst:.2e}, widest bracket {widest:.2e}, {} violations",
            viol.len()
        ),
    );
    for v in viol.into_iter().take(5) {
        log.check(false, v);
    }
    log
}

fn prop_psd_exact() -> Log {
    let mut log = Log::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let alphas = [0.3, 0.7, 1.0, 2.0, 5.0].map(|a| Order::new(a).expect("order"));
    let (mut worst, mut n, mut bad) = (0.0f64, 0, 0);
    for _ in 0..10 {
        let (r, wr) = random_diag_state(&mut rng);
        let (s, ws) = random_diag_state(&mut rng);
        for a in alphas {
            let c = renyi_weights(&wr, &ws, a).to_f64();
            let cfg = VarConfig { tol: 1e-15, max_iter: 20_000, ..VarConfig::default() };
            match variational_bound(&r, &s, a, &ConeSpec::psd(), &cfg) {
                Ok(v) => {
                    let e = (v.value.to_f64() - c).abs();
                    worst = worst.max(e);
                    n += 1;
                    if e > 1e-6 {
                        bad += 1;
                    }
                }
                Err(_) => bad += 1,
            }
        }
    }
    log.check(bad == 0, format!("PSD cone on {n} commuting instances: max error vs classical {worst:.2e}"));
    log
}

/// Bloch data (a, b, T) of a two-qubit state: ρ = ¼(1 + a·σ⊗1 + 1⊗b·σ + Σ T_ij σ_i⊗σ_j).
fn bloch_data(rho: &DensityOp) -> ([f64; 3], [f64; 3], [[f64; 3]; 3]) {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let paulis = [
        CMat::from_row_slice(2, 2, &[o, z, z, o]),
        CMat::from_row_slice(2, 2, &[z, o, o, z]),
        CMat::from_row_slice(2, 2, &[z, -i, i, z]),
        CMat::from_row_slice(2, 2, &[o, z, z, -o]),
    ];
    let m = rho.op().matrix();
    let ex = |x: usize, y: usize| (m * paulis[x].kronecker(&paulis[y])).trace().re;
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    let mut t = [[0.0; 3]; 3];
    for k in 0..3 {
        a[k] = ex(k + 1, 0);
        b[k] = ex(0, k + 1);
        for l in 0..3 {
            t[k][l] = ex(k + 1, l + 1);
        }
    }
    (a, b, t)
}

fn direction(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn product_probs(data: &([f64; 3], [f64; 3], [[f64; 3]; 3]), n: &[f64; 3], m: &[f64; 3]) -> [f64; 4] {
    let (a, b, t) = data;
    let na: f64 = (0..3).map(|k| n[k] * a[k]).sum();
    let mb: f64 = (0..3).map(|k| m[k] * b[k]).sum();
    let ntm: f64 = (0..3).map(|k| (0..3).map(|l| n[k] * t[k][l] * m[l]).sum::<f64>()).sum();
    let mut out = [0.0; 4];
    for (idx, (s, u)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].iter().enumerate() {
        out[idx] = (0.25 * (1.0 + s * na + u * mb + s * u * ntm)).max(0.0);
    }
    out
}

/// max over pairs of qubit bases of D_α, by a Bloch-sphere grid and
/// Nelder–Mead polishing from the best grid points.
fn bloch_oracle(rho: &DensityOp, sigma: &DensityOp, alpha: Order) -> f64 {
    let (dr, ds) = (bloch_data(rho), bloch_data(sigma));
    let (nt, np) = (16, 32);
    let dirs: Vec<(f64, f64)> = (0..nt)
        .flat_map(|i| (0..np).map(move |j| ((i as f64 + 0.5) * PI / (2.0 * nt as f64), j as f64 * 2.0 * PI / np as f64)))
        .collect();
    let eval = |x: &[f64]| {
        let (n, m) = (direction(x[0], x[1]), direction(x[2], x[3]));
        renyi_weights(&product_probs(&dr, &n, &m), &product_probs(&ds, &n, &m), alpha).to_f64()
    };
    let mut cands: Vec<(f64, [f64; 4])> = dirs
        .par_iter()
        .flat_map_iter(|&(t1, p1)| {
            dirs.iter().map(move |&(t2, p2)| {
                let x = [t1, p1, t2, p2];
                (eval(&x), x)
            })
        })
        .collect();
    cands.sort_by(|a, b| b.0.total_cmp(&a.0));
    cands
        .iter()
        .take(8)
        .map(|(v, x)| {
            let mut f = |y: &[f64]| eval(y);
            nelder_mead_max(&mut f, x, 0.05, 4000, 1e-14).value.max(*v)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn prop_bloch_oracle() -> Log {
    let mut log = Log::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let cfg = SearchConfig::default();
    let mut pairs = vec![(isotropic(2, 0.8).expect("state"), isotropic(2, 0.3).expect("state"))];
    for _ in 0..2 {
        pairs.push((random_state(&mut rng, 2, 0.02), random_state(&mut rng, 2, 0.02)));
    }
    for (k, (r, s)) in pairs.iter().enumerate() {
        for a in [Order::Finite(0.5), Order::Finite(2.0)] {
            let oracle = bloch_oracle(r, s, a);
            if let Some(b) = log.result(plo_exact(r, s, a, MeasClass::PLo, &cfg), "P-LO search") {
                let v = b.nats();
                log.check(
                    (v - oracle).abs() <= 1e-3,
                    format!("P-LO pair {k} α={a}: search {v:.7}, Bloch-grid oracle {oracle:.7}"),
                );
            }
        }
    }
    log
}

fn tradeoff_cases(log: &mut Log, label: &str, rho: &DensityOp, sigma: &DensityOp, test: &Povm, per_copy: f64, n: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let k = test.len();
    let subsets: Vec<Vec<usize>> = if k <= 4 {
        (1..(1usize << k)).map(|mask| (0..k).filter(|i| mask >> i & 1 == 1).collect()).collect()
    } else {
        (0..30).map(|_| (0..k).filter(|_| rng.gen_bool(0.3)).collect()).collect()
    };
    let (mut total, mut bad) = (0, 0);
    for acc in subsets {
        let Some(rep) = log.result(evaluate_test(rho, sigma, n, test, &acc), label) else {
            continue;
        };
        if rep.alpha_err >= 1.0 - 1e-12 || rep.beta_err <= 0.0 {
            continue;
        }
        for a in [1.1, 1.5, 2.0, 5.0, 100.0] {
            total += 1;
            if !error_tradeoff_bound(&rep, n as f64 * per_copy, a).unwrap_or(false) {
                bad += 1;
            }
        }
    }
    (total, bad)
}

fn prop_tradeoff() -> Log {
    let mut log = Log::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let (mut total, mut bad) = (0, 0);
    let mut add = |log: &mut Log, r: &DensityOp, s: &DensityOp, m: &Povm, v: f64, label: &str, rng: &mut ChaCha8Rng| {
        let max_n = if r.party_dims().0 == 2 { 3 } else { 2 };
        for n in 1..=max_n {
            let run = || -> Result<(DensityOp, DensityOp, Povm)> {
                Ok((r.clone(), s.clone(), povm_tensor_power(m, n, DEFAULT_DIM_CAP)?))
            };
            if let Some((r, s, mn)) = log.result(run(), label) {
                let (t, b) = tradeoff_cases(log, label, &r, &s, &mn, v, n, rng);
                total += t;
                bad += b;
            }
        }
    };
    for d in [2usize, 3] {
        let lb = local_basis_measurement(d).expect("measurement");
        let df = d as f64;
        if let (Ok(r), Ok(s)) = (phi(d), phi_perp(d)) {
            add(&mut log, &r, &s, &lb, (df + 1.0).ln(), "Φ vs Φ⊥", &mut rng);
        }
        let q = 1.0 / (df * df);
        if let (Ok(r), Ok(s)) = (phi(d), isotropic(d, q)) {
            add(&mut log, &r, &s, &lb, ((df + 1.0) / (q * df + 1.0)).ln(), "Φ vs i(1/d²)", &mut rng);
            if let Ok(im) = isotropic_measurement(d) {
                add(&mut log, &r, &s, &im, ((df + 1.0) / (q * df + 1.0)).ln(), "Φ vs i(1/d²), I-measurement", &mut rng);
            }
        }
        if let (Ok(r), Ok(s)) = (antisymmetric(d), werner(d, 1.0)) {
            add(&mut log, &r, &s, &lb, ((df + 1.0) / (df - 1.0)).ln(), "Θ⊥ vs Θ", &mut rng);
        }
    }
    log.check(bad == 0 && total > 0, format!("error trade-off bound on {total} generated (test, order) instances, {bad} violations"));
    log
}
