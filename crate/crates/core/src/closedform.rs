//! Closed-form measured divergences of isotropic and Werner pairs, and the
//! twirled scalar programs that serve as independent oracles for them.

use serde::Serialize;

use crate::classical::{renyi_weights, ExtReal, Order};
use crate::error::{Error, Result};
use crate::optim::golden_max;

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {v} outside [0, 1]")))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d >= 2 {
        Ok(())
    } else {
        Err(Error::domain(format!("local dimension must be ≥ 2, got {d}")))
    }
}

/// x^α y^{1−α} with the conventions 0^α = 0 and x·0^{1−α} = +∞ for α > 1.
fn power_term(x: f64, y: f64, a: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        if a > 1.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        x.powf(a) * y.powf(1.0 - a)
    }
}

fn xlog(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).ln()
    }
}

/// D_α^M(i(p)‖i(q)) for M ∈ {LO, LOCC₁, LOCC, SEP, PPT}.
pub fn iso_measured(d: usize, p: f64, q: f64, alpha: Order) -> Result<ExtReal> {
    check_dim(d)?;
    check_unit("p", p)?;
    check_unit("q", q)?;
    let df = d as f64;
    let inv = 1.0 / df;
    let v = match alpha {
        Order::Infinity => {
            let a = (1.0 + p * df) / (1.0 + q * df);
            let b = if p == 1.0 {
                0.0
            } else if q == 1.0 {
                f64::INFINITY
            } else {
                (1.0 - p) / (1.0 - q)
            };
            a.max(b).ln()
        }
        Order::Finite(a) if a == 1.0 => {
            df / (df + 1.0) * ((p + inv) * ((1.0 + p * df) / (1.0 + q * df)).ln() + xlog(1.0 - p, 1.0 - q))
        }
        Order::Finite(a) => {
            let qa = df / (df + 1.0) * ((p + inv).powf(a) * (q + inv).powf(1.0 - a) + power_term(1.0 - p, 1.0 - q, a));
            qa.ln() / (a - 1.0)
        }
    };
    Ok(ExtReal::from_f64(v.max(0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum WernerTarget {
    /// Θ⊥ vs Θ.
    AntiVsSym,
    /// Θ⊥ vs w(q).
    AntiVsWerner(f64),
}

/// D_α^M(Θ⊥‖σ) for the Werner targets; independent of α.
pub fn werner_measured(d: usize, target: WernerTarget, alpha: Order) -> Result<ExtReal> {
    check_dim(d)?;
    let _ = alpha;
    let df = d as f64;
    let v = match target {
        WernerTarget::AntiVsSym => ((df + 1.0) / (df - 1.0)).ln(),
        WernerTarget::AntiVsWerner(q) => {
            check_unit("q", q)?;
            ((df + 1.0) / (df + 1.0 - 2.0 * q)).ln()
        }
    };
    Ok(ExtReal::Finite(v))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SymmetricPair {
    Isotropic { d: usize, p: f64, q: f64 },
    Werner { d: usize, p: f64, q: f64 },
}

/// D_α^ALL for commuting symmetric pairs: both states are diagonal in the
/// same two-projector decomposition with weights (p, 1−p) and (q, 1−q).
pub fn unrestricted_reference(pair: SymmetricPair, alpha: Order) -> Result<ExtReal> {
    let (d, p, q) = match pair {
        SymmetricPair::Isotropic { d, p, q } | SymmetricPair::Werner { d, p, q } => (d, p, q),
    };
    check_dim(d)?;
    check_unit("p", p)?;
    check_unit("q", q)?;
    Ok(renyi_weights(&[p, 1.0 - p], &[q, 1.0 - q], alpha))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapValue {
    /// V_α^PPT = D_α^ALL when `valid`.
    pub v: Option<ExtReal>,
    /// D_α^PPT from [`iso_measured`].
    pub d: ExtReal,
    pub valid: bool,
    pub branch: &'static str,
}

impl GapValue {
    pub fn gap(&self) -> Option<f64> {
        match (self.v, self.d) {
            (Some(ExtReal::Finite(v)), ExtReal::Finite(d)) => Some(v - d),
            (Some(ExtReal::PosInf), ExtReal::Finite(_)) => Some(f64::INFINITY),
            _ => None,
        }
    }
}

/// Variational bound V_α^{PPT}(i(p), i(q)) in the regions where it equals
/// D_α^ALL, together with the measured value.
pub fn variational_gap_value(d: usize, p: f64, q: f64, alpha: Order) -> Result<GapValue> {
    let dm = iso_measured(d, p, q, alpha)?;
    let df = d as f64;
    let (valid, branch) = match alpha {
        Order::Infinity => (false, "none"),
        Order::Finite(a) if a < 0.5 => (p == 1.0, "(0,1/2): p = 1"),
        Order::Finite(a) if a < 1.0 => (q == 1.0, "[1/2,1): q = 1"),
        Order::Finite(a) if a == 1.0 => (q >= p / (df + 1.0 - p * df), "1: q ≥ p/(d+1−pd)"),
        Order::Finite(a) => {
            let r = (df + 1.0).powf(1.0 / a);
            (q >= p / (r - p * (r - 1.0)), "(1,∞): q ≥ p/((d+1)^{1/α} − p((d+1)^{1/α} − 1))")
        }
    };
    let v = if valid {
        Some(unrestricted_reference(SymmetricPair::Isotropic { d, p, q }, alpha)?)
    } else {
        None
    };
    Ok(GapValue { v, d: dm, valid, branch })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ProgramKind {
    /// max log tr[i(p)ω] s.t. tr[i(q)ω] = 1 over ω = c₁Φ + c₂(1−Φ), c₁ ≤ (d+1)c₂.
    IsoPrimal,
    /// max log tr[w(p)ω] s.t. tr[w(q)ω] = 1 over ω = c₁P₊ + c₂P₋, (d−1)c₂ ≤ (d+1)c₁.
    WernerPrimal,
    /// η_α over isotropic PPT ω with c₂ = 1 and t = c₁ ∈ (0, d+1].
    IsoVarGap,
    /// D_α over binary POVMs {aI₁ + bI₂, 1 − aI₁ − bI₂}, (a, b) ∈ [0,1]².
    IsoMeasuredBinary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalarProgram {
    pub kind: ProgramKind,
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub alpha: Order,
}

const GRID: usize = 10_000;
const LOG_T_MIN: f64 = -200.0;

/// Grid search over [a, b] followed by golden-section refinement around the
/// best grid point.
fn maximize_1d(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let step = (b - a) / (GRID - 1) as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..GRID {
        let v = f(a + step * i as f64);
        if v > best.1 {
            best = (i, v);
        }
    }
    let lo = a + step * best.0.saturating_sub(1) as f64;
    let hi = (a + step * (best.0 + 1) as f64).min(b);
    let (_, refined) = golden_max(f, lo, hi, 1e-14);
    best.1.max(refined)
}

/// Solves the one- or two-variable program by grid search with golden-section
/// refinement.
pub fn solve_scalar_program(sp: ScalarProgram) -> Result<ExtReal> {
    check_dim(sp.d)?;
    check_unit("p", sp.p)?;
    check_unit("q", sp.q)?;
    let (p, q) = (sp.p, sp.q);
    let df = sp.d as f64;
    let v = match sp.kind {
        ProgramKind::IsoPrimal => {
            if q == 1.0 {
                // c₁ = 1 and c₂ ≥ 1/(d+1) is unbounded above.
                return Ok(if p < 1.0 { ExtReal::PosInf } else { ExtReal::Finite(0.0) });
            }
            let hi = (df + 1.0) / (q * df + 1.0);
            let mut f = |c1: f64| {
                let c2 = (1.0 - q * c1) / (1.0 - q);
                (p * c1 + (1.0 - p) * c2).ln()
            };
            maximize_1d(&mut f, 0.0, hi)
        }
        ProgramKind::WernerPrimal => {
            if q == 0.0 {
                return Ok(if p > 0.0 { ExtReal::PosInf } else { ExtReal::Finite(0.0) });
            }
            let hi = (df + 1.0) / (df + 1.0 - 2.0 * q);
            let mut f = |c2: f64| {
                let c1 = (1.0 - (1.0 - q) * c2) / q;
                (p * c1 + (1.0 - p) * c2).ln()
            };
            maximize_1d(&mut f, 0.0, hi)
        }
        ProgramKind::IsoVarGap => {
            let alpha = sp.alpha;
            let mut f = |s: f64| iso_eta(p, q, s.exp(), alpha);
            let v = maximize_1d(&mut f, LOG_T_MIN, (df + 1.0).ln());
            let below_one = matches!(alpha, Order::Finite(a) if a < 1.0);
            let below_half = matches!(alpha, Order::Finite(a) if a < 0.5);
            // η_α diverges as t → 0 exactly in these cases.
            if (q == 1.0 && (p == 0.0 || (p < 1.0 && !below_one))) || (below_half && p == 1.0 && q == 0.0) {
                return Ok(ExtReal::PosInf);
            }
            v
        }
        ProgramKind::IsoMeasuredBinary => {
            let u = |x: f64| x + (1.0 - x) / (df + 1.0);
            let (up, uq) = (u(p), u(q));
            let n = 100;
            let mut best = f64::NEG_INFINITY;
            for i in 0..n {
                for j in 0..n {
                    let a = i as f64 / (n - 1) as f64;
                    let b = j as f64 / (n - 1) as f64;
                    let pr = a * up + b * (1.0 - up);
                    let qr = a * uq + b * (1.0 - uq);
                    let v = renyi_weights(&[pr, 1.0 - pr], &[qr, 1.0 - qr], sp.alpha).to_f64();
                    best = best.max(v);
                }
            }
            best
        }
    };
    Ok(ExtReal::from_f64(v.max(0.0)))
}

/// η_α(i(p), i(q); tΦ + (1−Φ)).
fn iso_eta(p: f64, q: f64, t: f64, alpha: Order) -> f64 {
    match alpha {
        Order::Infinity => (p * t + (1.0 - p)).ln() - (q * t + (1.0 - q)).ln(),
        Order::Finite(a) if a == 1.0 => {
            let lt = if p == 0.0 { 0.0 } else { p * t.ln() };
            lt - (q * t + (1.0 - q)).ln()
        }
        Order::Finite(a) if a < 0.5 => {
            let b = a / (a - 1.0);
            a / (a - 1.0) * (p * t + (1.0 - p)).ln() - (q * t.powf(b) + (1.0 - q)).ln()
        }
        Order::Finite(a) => {
            let g = (a - 1.0) / a;
            a / (a - 1.0) * (p * t.powf(g) + (1.0 - p)).ln() - (q * t + (1.0 - q)).ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::FiniteMeasure;

    const ALPHAS: [Order; 5] = [
        Order::Finite(0.3),
        Order::Finite(0.5),
        Order::Finite(1.0),
        Order::Finite(2.0),
        Order::Infinity,
    ];

    fn grid() -> Vec<f64> {
        (0..20).map(|i| i as f64 / 19.0).collect()
    }

    #[test]
    fn iso_examples() {
        let v = iso_measured(2, 1.0, 0.0, Order::Finite(2.0)).unwrap().to_f64();
        assert!((v - 3f64.ln()).abs() < 1e-14);
        let v = iso_measured(3, 1.0, 1.0 / 9.0, Order::Infinity).unwrap().to_f64();
        assert!((v - 3f64.ln()).abs() < 1e-14);
        for a in ALPHAS {
            assert_eq!(iso_measured(3, 0.4, 0.4, a).unwrap().to_f64(), 0.0);
        }
    }

    #[test]
    fn iso_p_one_is_alpha_independent() {
        for d in [2, 3, 4] {
            for q in [0.0, 0.1, 0.5, 0.9] {
                let expect = ((d as f64 + 1.0) / (q * d as f64 + 1.0)).ln();
                for a in ALPHAS {
                    let v = iso_measured(d, 1.0, q, a).unwrap().to_f64();
                    assert!((v - expect).abs() < 1e-12, "d={d} q={q} {a}: {v}");
                }
            }
        }
    }

    #[test]
    fn werner_examples() {
        assert!((werner_measured(2, WernerTarget::AntiVsSym, Order::Finite(2.0)).unwrap().to_f64() - 3f64.ln()).abs() < 1e-15);
        assert!((werner_measured(3, WernerTarget::AntiVsWerner(1.0), Order::Infinity).unwrap().to_f64() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(werner_measured(3, WernerTarget::AntiVsWerner(0.0), Order::Finite(0.5)).unwrap().to_f64(), 0.0);
    }

    #[test]
    fn unrestricted_matches_classical() {
        let v = unrestricted_reference(SymmetricPair::Isotropic { d: 2, p: 1.0, q: 0.5 }, Order::Finite(0.7)).unwrap();
        assert!((v.to_f64() - 2f64.ln()).abs() < 1e-14);
        for a in ALPHAS {
            for (p, q) in [(0.2, 0.7), (0.9, 0.1), (0.5, 0.5)] {
                let mu = FiniteMeasure::from_weights(vec![p, 1.0 - p]).unwrap();
                let nu = FiniteMeasure::from_weights(vec![q, 1.0 - q]).unwrap();
                let c = crate::classical::renyi(&mu, &nu, a).unwrap().to_f64();
                for d in [2, 5] {
                    let v = unrestricted_reference(SymmetricPair::Isotropic { d, p, q }, a).unwrap().to_f64();
                    assert!((v - c).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn gap_examples() {
        let g = variational_gap_value(2, 1.0, 0.5, Order::Finite(0.25)).unwrap();
        assert!(g.valid);
        assert!((g.v.unwrap().to_f64() - 2f64.ln()).abs() < 1e-14);
        assert!((g.d.to_f64() - 1.5f64.ln()).abs() < 1e-14);
        assert!((g.gap().unwrap() - 0.287_682_072_451_780_9).abs() < 1e-12);
        let g = variational_gap_value(2, 0.5, 0.2, Order::Finite(1.0)).unwrap();
        assert!(!g.valid && g.v.is_none());
        let g = variational_gap_value(2, 0.5, 0.25, Order::Finite(1.0)).unwrap();
        assert!(g.valid);
        let g = variational_gap_value(3, 0.6, 0.6, Order::Finite(2.0)).unwrap();
        assert!(g.valid && g.gap().unwrap().abs() < 1e-15);
    }

    #[test]
    fn scalar_program_examples() {
        for d in [2, 3] {
            let df = d as f64;
            for q in [0.0, 0.3, 0.8] {
                let sp = ScalarProgram { kind: ProgramKind::IsoPrimal, d, p: 1.0, q, alpha: Order::Infinity };
                let v = solve_scalar_program(sp).unwrap().to_f64();
                assert!((v - ((df + 1.0) / (q * df + 1.0)).ln()).abs() < 1e-9);
            }
        }
        let sp = ScalarProgram { kind: ProgramKind::WernerPrimal, d: 2, p: 0.0, q: 1.0, alpha: Order::Infinity };
        assert!((solve_scalar_program(sp).unwrap().to_f64() - 3f64.ln()).abs() < 1e-9);
        let sp = ScalarProgram { kind: ProgramKind::IsoPrimal, d: 2, p: 0.5, q: 1.0, alpha: Order::Infinity };
        assert_eq!(solve_scalar_program(sp).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn oracle_agreement_on_grid() {
        for d in [2, 3] {
            for &p in &grid() {
                for &q in &grid() {
                    let sp = |kind, alpha| ScalarProgram { kind, d, p, q, alpha };
                    for a in ALPHAS {
                        let c = iso_measured(d, p, q, a).unwrap();
                        let o = solve_scalar_program(sp(ProgramKind::IsoMeasuredBinary, a)).unwrap();
                        assert!(
                            c == o || (c.to_f64() - o.to_f64()).abs() < 1e-6,
                            "binary d={d} p={p} q={q} {a}: {c} vs {o}"
                        );
                        let g = variational_gap_value(d, p, q, a).unwrap();
                        if let Some(v) = g.v {
                            let o = solve_scalar_program(sp(ProgramKind::IsoVarGap, a)).unwrap();
                            assert!(
                                v == o || (v.to_f64() - o.to_f64()).abs() < 1e-6,
                                "gap d={d} p={p} q={q} {a}: {v} vs {o}"
                            );
                            assert!(v.to_f64() >= g.d.to_f64() - 1e-10);
                        }
                    }
                    let c = iso_measured(d, p, q, Order::Infinity).unwrap();
                    let o = solve_scalar_program(sp(ProgramKind::IsoPrimal, Order::Infinity)).unwrap();
                    assert!(c == o || (c.to_f64() - o.to_f64()).abs() < 1e-6, "primal d={d} p={p} q={q}: {c} vs {o}");
                    let w = solve_scalar_program(sp(ProgramKind::WernerPrimal, Order::Infinity)).unwrap();
                    if p == 0.0 {
                        let c = werner_measured(d, WernerTarget::AntiVsWerner(q), Order::Infinity).unwrap();
                        assert!((c.to_f64() - w.to_f64()).abs() < 1e-6);
                    }
                }
            }
        }
    }
}
