//! Subcommand implementations.

use clap::ValueEnum;
use rayon::prelude::*;
use serde_json::json;

use mrd::acceptance;
use mrd::classical::{ExtReal, Order};
use mrd::closedform::{iso_measured, unrestricted_reference, werner_measured, SymmetricPair, WernerTarget};
use mrd::exponents::{
    stein_exponent, stein_preset, strong_converse_exponent, strong_converse_preset, DivergenceCurve, ExponentValue,
    Preset,
};
use mrd::linops::{DensityOp, DEFAULT_DIM_CAP};
use mrd::maxdiv::{explicit_certificate, ppt_max_bracket, quantum_max_divergence, CertFamily, MaxDivConfig, CERT_TOL};
use mrd::measured::{optimize_measured, SearchConfig};
use mrd::povm::MeasClass;
use mrd::report::BoundResult;
use mrd::states::{make_state, Family};
use mrd::varprog::{variational_bound, ConeKind, ConeSpec, SolverConfig, VarConfig};
use mrd::{Error, Result};

use crate::args::*;
use crate::output::{render, LogBase, Row};
use crate::{EXIT_FAILED_CHECKS, EXIT_OK};

/// Text for stdout and the exit status.
#[derive(Debug)]
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Self { stdout, code: EXIT_OK }
    }
}

pub fn run(cli: &Cli) -> Result<Output> {
    let g = &cli.global;
    let rows = match &cli.command {
        Command::Divergence(a) => divergence(a, g)?,
        Command::Maxdiv(a) => maxdiv(a, g)?,
        Command::Certify(a) => return certify(a),
        Command::Exponent(a) => exponent(a, g)?,
        Command::Sweep(a) => sweep(a, g)?,
        Command::Reproduce(a) => return Ok(reproduce(a)),
    };
    Ok(Output::ok(render(&rows, g.format)?))
}

/// One (ρ, σ) problem with its labels.
struct Pair {
    label: String,
    rho_family: Family,
    sigma_family: Family,
    d: usize,
    n: usize,
    rho: DensityOp,
    sigma: DensityOp,
}

impl Pair {
    fn new(rho: &Family, sigma: &Family, label: String, d: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("number of copies must be ≥ 1".into()));
        }
        let load = |f: &Family| -> Result<DensityOp> {
            let s = make_state(f, d)?;
            if n > 1 {
                s.tensor_power(n, DEFAULT_DIM_CAP)
            } else {
                Ok(s)
            }
        };
        let (r, s) = (load(rho)?, load(sigma)?);
        if r.op().dims() != s.op().dims() {
            return Err(Error::Structural("ρ and σ have different subsystem layouts".into()));
        }
        let d = match rho {
            Family::Raw(_) => r.party_dims().0,
            _ => d,
        };
        Ok(Self {
            label,
            rho_family: rho.clone(),
            sigma_family: sigma.clone(),
            d,
            n,
            rho: r,
            sigma: s,
        })
    }

    fn from_args(rho: &StateArg, sigma: &StateArg, d: usize, n: usize) -> Result<Self> {
        Self::new(&rho.family, &sigma.family, format!("{rho}/{sigma}"), d, n)
    }

    fn row(&self, alpha: &str, class: &str, kind: &str, nats: f64, status: &str, base: LogBase) -> Row {
        Row::new(
            self.label.clone(),
            self.d,
            self.n,
            self.rho_family.parameter(),
            self.sigma_family.parameter(),
            alpha,
            class,
            kind,
            nats,
            status,
            base,
        )
    }

    fn bound_row(&self, b: &BoundResult, class: &str, base: LogBase) -> Row {
        self.row(&b.alpha.to_string(), class, &b.kind.to_string(), b.nats(), &b.status.to_string(), base)
    }
}

struct Solvers {
    search: SearchConfig,
    var: VarConfig,
    psd: ConeSpec,
    ppt: ConeSpec,
}

impl Solvers {
    fn new(b: &Budget, seed: u64) -> Result<Self> {
        let cfg = match &b.solver_config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                SolverConfig::parse(&text)?
            }
            None => SolverConfig {
                max_iter: b.max_iter,
                seed,
                ..SolverConfig::default()
            },
        };
        let search = match b.solver_config {
            Some(_) => cfg.search(),
            None => SearchConfig {
                restarts: b.restarts,
                max_evals: b.max_evals,
                seed,
                ..SearchConfig::default()
            },
        };
        Ok(Self {
            search,
            var: cfg.var(),
            psd: cfg.cone(ConeKind::Psd)?,
            ppt: cfg.cone(ConeKind::Ppt)?,
        })
    }
}

fn lower(p: &Pair, alpha: Order, class: MeasClass, s: &Solvers) -> Result<BoundResult> {
    match class {
        MeasClass::All => Ok(variational_bound(&p.rho, &p.sigma, alpha, &s.psd, &s.var)?.to_bound(alpha)),
        // LO measurements are separable and PPT, so the LO search bounds both.
        MeasClass::Sep | MeasClass::Ppt => optimize_measured(&p.rho, &p.sigma, alpha, MeasClass::Lo, &s.search),
        c => optimize_measured(&p.rho, &p.sigma, alpha, c, &s.search),
    }
}

fn upper(p: &Pair, alpha: Order, class: MeasClass, s: &Solvers) -> Result<BoundResult> {
    match (class, alpha) {
        (MeasClass::All, _) => Ok(variational_bound(&p.rho, &p.sigma, alpha, &s.psd, &s.var)?.to_bound(alpha)),
        (_, Order::Infinity) => {
            let cfg = MaxDivConfig {
                primal: s.var.clone(),
                delta: s.ppt.delta,
                ..MaxDivConfig::default()
            };
            Ok(ppt_max_bracket(&p.rho, &p.sigma, &cfg)?.1)
        }
        _ => Ok(variational_bound(&p.rho, &p.sigma, alpha, &s.ppt, &s.var)?.to_bound(alpha)),
    }
}

/// Parameter of an isotropic-type family: Φ = i(1), Φ⊥ = i(0).
fn iso_param(f: &Family) -> Option<f64> {
    match f {
        Family::MaxEntangled => Some(1.0),
        Family::PhiPerp => Some(0.0),
        Family::Isotropic(p) => Some(*p),
        _ => None,
    }
}

/// Parameter of a Werner-type family: Θ⊥ = w(0), Θ = w(1).
fn werner_param(f: &Family) -> Option<f64> {
    match f {
        Family::Antisymmetric => Some(0.0),
        Family::Symmetric => Some(1.0),
        Family::Werner(p) => Some(*p),
        _ => None,
    }
}

fn closed_form(p: &Pair, alpha: Order, class: MeasClass) -> Result<ExtReal> {
    if p.n != 1 {
        return Err(Error::Domain("closed forms are single-copy; use --n 1".into()));
    }
    let d = p.d;
    let (rf, sf) = (&p.rho_family, &p.sigma_family);
    let local = matches!(class, MeasClass::Lo | MeasClass::Locc1 | MeasClass::Sep | MeasClass::Ppt);
    if let (Some(a), Some(b)) = (iso_param(rf), iso_param(sf)) {
        return match class {
            MeasClass::All => unrestricted_reference(SymmetricPair::Isotropic { d, p: a, q: b }, alpha),
            _ if local => iso_measured(d, a, b, alpha),
            c => Err(Error::Domain(format!("no closed form for class {}", c.name()))),
        };
    }
    if let (Some(a), Some(b)) = (werner_param(rf), werner_param(sf)) {
        return match class {
            MeasClass::All => unrestricted_reference(SymmetricPair::Werner { d, p: a, q: b }, alpha),
            _ if local && a == 0.0 => {
                let target = if b == 1.0 { WernerTarget::AntiVsSym } else { WernerTarget::AntiVsWerner(b) };
                werner_measured(d, target, alpha)
            }
            _ if local => Err(Error::Domain("Werner closed form needs ρ = antisym".into())),
            c => Err(Error::Domain(format!("no closed form for class {}", c.name()))),
        };
    }
    Err(Error::Domain(format!("no closed form for {}", p.label)))
}

/// SEP upper bounds come from the PPT relaxation, which is only proved
/// tight on the symmetric families.
fn upper_row(p: &Pair, alpha: Order, class: MeasClass, s: &Solvers, base: LogBase) -> Result<Row> {
    let mut row = p.bound_row(&upper(p, alpha, class, s)?, class.name(), base);
    let raw = matches!(p.rho_family, Family::Raw(_)) || matches!(p.sigma_family, Family::Raw(_));
    if class == MeasClass::Sep && raw {
        row.status.push_str("; PPT relaxation");
    }
    Ok(row)
}

fn evaluate(p: &Pair, alpha: Order, class: MeasClass, mode: Mode, s: &Solvers, base: LogBase) -> Result<Vec<Row>> {
    let cname = class.name();
    let mut rows = Vec::new();
    match mode {
        Mode::Closedform => {
            let v = closed_form(p, alpha, class)?;
            rows.push(p.row(&alpha.to_string(), cname, "exact", v.to_f64(), "closedform", base));
        }
        Mode::Lower => rows.push(p.bound_row(&lower(p, alpha, class, s)?, cname, base)),
        Mode::Upper => rows.push(upper_row(p, alpha, class, s, base)?),
        Mode::Sandwich if class == MeasClass::All => rows.push(p.bound_row(&upper(p, alpha, class, s)?, cname, base)),
        Mode::Sandwich => {
            rows.push(p.bound_row(&lower(p, alpha, class, s)?, cname, base));
            rows.push(upper_row(p, alpha, class, s, base)?);
        }
    }
    Ok(rows)
}

fn divergence(a: &DivergenceArgs, g: &Global) -> Result<Vec<Row>> {
    let pair = Pair::from_args(&a.rho, &a.sigma, a.d, a.n)?;
    let s = Solvers::new(&a.budget, g.seed)?;
    let mut rows = Vec::new();
    for &alpha in &a.alpha {
        rows.extend(evaluate(&pair, alpha, a.class, a.mode, &s, g.log_base)?);
    }
    Ok(rows)
}

fn cert_family(kind: CertKind, p: Option<f64>, q: Option<f64>) -> Result<CertFamily> {
    let need = |name: &str, v: Option<f64>| v.ok_or_else(|| Error::Parse(format!("--{name} is required for this family")));
    Ok(match kind {
        CertKind::PhiPerp => CertFamily::PhiVsPerp,
        CertKind::AntiSym => CertFamily::AntiVsSym,
        CertKind::Iso => CertFamily::Iso {
            p: need("p", p)?,
            q: need("q", q)?,
        },
        CertKind::Werner => CertFamily::Werner {
            p: need("p", p)?,
            q: need("q", q)?,
        },
    })
}

fn maxdiv(a: &MaxdivArgs, g: &Global) -> Result<Vec<Row>> {
    let pair = Pair::from_args(&a.rho, &a.sigma, a.d, a.n)?;
    let base = g.log_base;
    let cfg = MaxDivConfig {
        delta: a.delta,
        width: a.width,
        primal: VarConfig {
            seed: g.seed,
            ..VarConfig::default()
        },
        ..MaxDivConfig::default()
    };
    let (primal, dual) = ppt_max_bracket(&pair.rho, &pair.sigma, &cfg)?;
    let quantum = quantum_max_divergence(&pair.rho, &pair.sigma)?;
    let mut rows = vec![
        pair.bound_row(&primal, "PPT", base),
        pair.bound_row(&dual, "PPT", base),
        pair.row("inf", "PPT", "gap", dual.nats() - primal.nats(), &dual.status.to_string(), base),
        pair.row("inf", "ALL", "exact", quantum.to_f64(), "converged", base),
    ];
    if let Some(kind) = a.certify {
        let (p, q) = match kind {
            CertKind::Iso => (iso_param(&pair.rho_family), iso_param(&pair.sigma_family)),
            CertKind::Werner => (werner_param(&pair.rho_family), werner_param(&pair.sigma_family)),
            _ => (None, None),
        };
        let fam = cert_family(kind, p, q)?;
        let lambda = fam.lambda(pair.d).powi(pair.n as i32).ln();
        let status = match explicit_certificate(fam, pair.d, pair.n) {
            Ok(c) => match c.verify(pair.rho.op(), pair.sigma.op(), 1e-10, CERT_TOL)? {
                chk if chk.passed => "PASS".to_string(),
                chk => format!("FAIL (residual {:e})", chk.residual),
            },
            Err(Error::Solver { msg, .. }) => format!("FAIL ({msg})"),
            Err(e) => return Err(e),
        };
        rows.push(pair.row("inf", "PPT", "certificate", lambda, &status, base));
    }
    Ok(rows)
}

fn certify(a: &CertifyArgs) -> Result<Output> {
    let fam = cert_family(a.family, a.p, a.q)?;
    let code = fam.code();
    let (rho, sigma) = fam.states(a.d)?;
    let (rn, sn) = (rho.op().tensor_power(a.n, DEFAULT_DIM_CAP)?, sigma.op().tensor_power(a.n, DEFAULT_DIM_CAP)?);
    let out = match explicit_certificate(fam, a.d, a.n) {
        Ok(c) => {
            let chk = c.verify(&rn, &sn, 1e-10, CERT_TOL)?;
            let mut j = c.to_json(code, a.d, a.n);
            j["check"] = json!({
                "min_eig_x": chk.min_x,
                "min_eig_y": chk.min_y,
                "residual": chk.residual,
                "log_lambda": c.log_lambda(),
                "result": if chk.passed { "PASS" } else { "FAIL" },
            });
            (j, chk.passed)
        }
        Err(Error::Solver { msg, residual }) => (
            json!({ "family": code, "d": a.d, "n": a.n, "check": { "result": "FAIL", "reason": msg, "residual": residual } }),
            false,
        ),
        Err(e) => return Err(e),
    };
    Ok(Output {
        stdout: serde_json::to_string_pretty(&out.0)? + "\n",
        code: if out.1 { EXIT_OK } else { EXIT_FAILED_CHECKS },
    })
}

fn preset(kind: PresetKind, d: usize, q: Option<f64>) -> Result<Preset> {
    let need = || q.ok_or_else(|| Error::Parse("--q is required for this preset".into()));
    Ok(match kind {
        PresetKind::PhiIso => Preset::PhiVsIso { d, q: need()? },
        PresetKind::PhiPerp => Preset::PhiVsPerp { d },
        PresetKind::AntiWerner => Preset::AntiVsWerner { d, q: need()? },
    })
}

/// `alpha,value` lines in nats; blank lines and `#` comments are skipped.
pub fn read_curve(text: &str, provenance: &str) -> Result<DivergenceCurve> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!("curve line {:?} needs two fields", rec)));
        }
        let num = |i: usize| -> Result<f64> {
            let t = &rec[i];
            if t.eq_ignore_ascii_case("inf") {
                return Ok(f64::INFINITY);
            }
            t.parse().map_err(|_| Error::Parse(format!("bad number '{t}' in curve")))
        };
        samples.push((num(0)?, num(1)?));
    }
    DivergenceCurve::from_samples(samples, provenance)
}

fn exponent(a: &ExponentArgs, g: &Global) -> Result<Vec<Row>> {
    let rate = || a.r.ok_or_else(|| Error::Parse("--r is required for the strong-converse exponent".into()));
    let (family, d, q, v): (String, usize, Option<f64>, ExponentValue) = match (&a.preset, &a.curve) {
        (Some(kind), _) => {
            let p = preset(*kind, a.d, a.q)?;
            let v = match a.kind {
                ExponentKind::Stein => stein_preset(p)?,
                ExponentKind::Sc => strong_converse_preset(p, rate()?)?,
            };
            let name = kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            (name, a.d, a.q, v)
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let mut c = read_curve(&text, &path.display().to_string())?;
            if a.attested {
                c = c.attested();
            }
            let v = match a.kind {
                ExponentKind::Stein => stein_exponent(&c),
                ExponentKind::Sc => strong_converse_exponent(rate()?, &c)?,
            };
            ("curve".to_string(), a.d, None, v)
        }
        (None, None) => return Err(Error::Parse("give --preset or --curve".into())),
    };
    let (alpha, kind) = match a.kind {
        ExponentKind::Stein => ("1", "stein"),
        ExponentKind::Sc => ("sup>1", "strong-converse"),
    };
    let status = match (&v.value, v.clipped) {
        (None, _) => format!("invalid: {}", v.note),
        (Some(_), true) => format!("{}; clipped", v.label()),
        (Some(_), false) => v.label().to_string(),
    };
    Ok(vec![Row::new(
        family,
        d,
        1,
        None,
        q,
        alpha,
        "PPT",
        kind,
        v.value.unwrap_or(f64::NAN),
        status,
        g.log_base,
    )])
}

/// Worker count from `MRD_THREADS`, defaulting to the available cores.
pub fn thread_count() -> Result<usize> {
    match std::env::var("MRD_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Parse(format!("MRD_THREADS must be a positive integer, got '{s}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn sweep(a: &SweepArgs, g: &Global) -> Result<Vec<Row>> {
    let make = |x: f64| match a.family {
        SweepFamily::Iso => Family::Isotropic(x),
        SweepFamily::Werner => Family::Werner(x),
    };
    let code = match a.family {
        SweepFamily::Iso => "iso",
        SweepFamily::Werner => "werner",
    };
    let mut jobs = Vec::new();
    for &d in &a.d {
        for &p in &a.p.0 {
            for &q in &a.q.0 {
                for &alpha in &a.alpha {
                    jobs.push((d, p, q, alpha));
                }
            }
        }
    }
    for &(_, p, q, _) in &jobs {
        for x in [p, q] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain(format!("sweep parameter {x} outside [0, 1]")));
            }
        }
    }
    let s = Solvers::new(&a.budget, g.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| Error::Resource(e.to_string()))?;
    let results: Vec<Result<Vec<Row>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(d, p, q, alpha)| {
                let label = format!("{code}:{p}/{code}:{q}");
                let pair = Pair::new(&make(p), &make(q), label, d, 1)?;
                evaluate(&pair, alpha, a.class, a.mode, &s, g.log_base)
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Row::sort(&mut rows);
    Ok(rows)
}

fn reproduce(a: &ReproduceArgs) -> Output {
    let ids: Vec<usize> = if a.criteria.is_empty() { (1..=9).collect() } else { a.criteria.clone() };
    let mut text = String::new();
    let mut all = true;
    for id in ids {
        let o = acceptance::run(id);
        all &= o.passed;
        if a.verbose {
            text.push_str(&format!("{o}\n"));
        } else {
            text.push_str(&o.summary());
            text.push('\n');
            for f in o.failures() {
                text.push_str(&format!("  {f}\n"));
            }
        }
    }
    Output {
        stdout: text,
        code: if all { EXIT_OK } else { EXIT_FAILED_CHECKS },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn rows(argv: &[&str]) -> Vec<Row> {
        let cli = Cli::try_parse_from(argv).unwrap();
        let out = run(&cli).unwrap();
        crate::output::parse_csv(&out.stdout).unwrap()
    }

    #[test]
    fn closedform_iso_is_one_bit() {
        let r = rows(&["mrd", "divergence", "--rho", "iso:1", "--sigma", "iso:0.25", "--mode", "closedform"]);
        assert_eq!(r.len(), 1);
        assert!((r[0].value_display - 1.0).abs() < 1e-12);
        assert_eq!(r[0].kind, "exact");
    }

    #[test]
    fn closedform_rejects_mixed_pairs() {
        let cli = Cli::try_parse_from(["mrd", "divergence", "--rho", "phi", "--sigma", "sym", "--mode", "closedform"])
            .unwrap();
        assert!(matches!(run(&cli), Err(Error::Domain(_))));
    }

    #[test]
    fn werner_closedform_matches_certificate_lambda() {
        let r = rows(&["mrd", "--log-base", "e", "divergence", "--rho", "antisym", "--sigma", "sym", "--d", "3", "--mode", "closedform"]);
        assert!((r[0].value_nats - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn curve_file_format() {
        let c = read_curve("# alpha, nats\n1, 0.5\n2, 0.7\n\n3,0.9\n", "t").unwrap();
        assert!((c.at(1.5) - 0.6).abs() < 1e-12);
        assert!(read_curve("1,2,3\n", "t").is_err());
        assert!(read_curve("1,x\n", "t").is_err());
    }

    #[test]
    fn stein_preset_row() {
        let r = rows(&["mrd", "exponent", "--kind", "stein", "--preset", "phi-perp", "--d", "3"]);
        assert!((r[0].value_display - 2.0).abs() < 1e-12);
        assert_eq!(r[0].status, "exact");
    }

    #[test]
    fn invalid_preset_is_reported() {
        let r = rows(&["mrd", "exponent", "--kind", "stein", "--preset", "phi-iso", "--q", "0.5"]);
        assert!(r[0].status.starts_with("invalid"));
        assert!(r[0].value_nats.is_nan());
    }
}
