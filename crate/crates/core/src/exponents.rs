//! Restricted hypothesis testing: error probabilities of explicit tests, and
//! Stein and strong-converse exponents from divergence curves or presets.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linops::{DensityOp, DEFAULT_DIM_CAP};
use crate::optim::golden_max;
use crate::povm::{born, Povm};

/// Error probabilities of a test that accepts ρ on the outcomes `accept`.
#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    pub n: usize,
    /// Type-I error 1 − tr[ρ^⊗n T].
    pub alpha_err: f64,
    /// Type-II error tr[σ^⊗n T].
    pub beta_err: f64,
    pub accept: Vec<usize>,
}

/// α_n and β_n for T = Σ_{z ∈ accept} M_z on n copies.
pub fn evaluate_test(rho: &DensityOp, sigma: &DensityOp, n: usize, test: &Povm, accept: &[usize]) -> Result<TestReport> {
    if n == 0 {
        return Err(Error::domain("need n ≥ 1 copies"));
    }
    if rho.dim() != sigma.dim() {
        return Err(Error::structural("states differ in dimension"));
    }
    if let Some(&z) = accept.iter().find(|&&z| z >= test.len()) {
        return Err(Error::structural(format!("accept index {z} out of range for a {}-outcome test", test.len())));
    }
    let (rn, sn) = (rho.tensor_power(n, DEFAULT_DIM_CAP)?, sigma.tensor_power(n, DEFAULT_DIM_CAP)?);
    if rn.dim() != test.dim() {
        return Err(Error::structural(format!(
            "test acts on dimension {} but {n} copies have dimension {}",
            test.dim(),
            rn.dim()
        )));
    }
    let mr = born(&rn, test)?;
    let ms = born(&sn, test)?;
    let acc = |w: &[f64]| accept.iter().map(|&z| w[z]).sum::<f64>().clamp(0.0, 1.0);
    Ok(TestReport {
        n,
        alpha_err: (1.0 - acc(mr.weights())).clamp(0.0, 1.0),
        beta_err: acc(ms.weights()),
        accept: accept.to_vec(),
    })
}

/// −log β_n ≤ D_α(ρ^⊗n‖σ^⊗n) + α/(α−1)·log(1/(1−α_n)) for a test in the class
/// of the divergence. `d_alpha_n` is the n-copy value in nats.
pub fn error_tradeoff_bound(report: &TestReport, d_alpha_n: f64, alpha: f64) -> Result<bool> {
    if !(alpha > 1.0) {
        return Err(Error::domain(format!("trade-off bound needs α > 1, got {alpha}")));
    }
    if report.alpha_err >= 1.0 {
        return Err(Error::domain("trade-off bound undefined for type-I error 1"));
    }
    let lhs = -report.beta_err.ln();
    let rhs = d_alpha_n + alpha / (alpha - 1.0) * (-(1.0 - report.alpha_err).ln());
    Ok(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()))
}

type CurveFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Per-copy D_α^M as a function of α on (1, ∞), plus its α = 1 value.
#[derive(Clone)]
pub struct DivergenceCurve {
    eval: CurveFn,
    pub provenance: String,
    /// Set when additivity on this instance is certified.
    pub attested: bool,
}

impl fmt::Debug for DivergenceCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DivergenceCurve")
            .field("provenance", &self.provenance)
            .field("attested", &self.attested)
            .finish()
    }
}

impl DivergenceCurve {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static, provenance: impl Into<String>) -> Self {
        Self {
            eval: Arc::new(eval),
            provenance: provenance.into(),
            attested: false,
        }
    }

    pub fn constant(v: f64, provenance: impl Into<String>) -> Self {
        Self::new(move |_| v, provenance)
    }

    /// Piecewise-linear interpolation in α through sorted samples, constant
    /// beyond both ends.
    pub fn from_samples(mut samples: Vec<(f64, f64)>, provenance: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::domain("curve needs at least one sample"));
        }
        if samples.iter().any(|(a, v)| !a.is_finite() || *a <= 0.0 || v.is_nan()) {
            return Err(Error::domain("curve samples need finite α > 0 and non-NaN values"));
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let eval = move |a: f64| {
            let i = samples.partition_point(|s| s.0 <= a);
            if i == 0 {
                return samples[0].1;
            }
            if i == samples.len() {
                return samples[i - 1].1;
            }
            let (a0, v0) = samples[i - 1];
            let (a1, v1) = samples[i];
            v0 + (v1 - v0) * (a - a0) / (a1 - a0)
        };
        Ok(Self::new(eval, provenance))
    }

    pub fn attested(mut self) -> Self {
        self.attested = true;
        self
    }

    pub fn at(&self, alpha: f64) -> f64 {
        (self.eval)(alpha)
    }

    fn is_constant(&self) -> bool {
        let base = self.at(1.0 + 1e-6);
        [1.5, 2.0, 10.0, 1e3, ALPHA_CAP]
            .iter()
            .all(|&a| (self.at(a) - base).abs() <= 1e-14 * (1.0 + base.abs()))
    }
}

pub const ALPHA_CAP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentValue {
    /// None outside the validity region.
    pub value: Option<f64>,
    pub valid: bool,
    /// Additivity certified, so the value is the exponent rather than an
    /// achievable bound.
    pub certified: bool,
    /// The strong-converse rate lay below D and the result was clipped to 0.
    pub clipped: bool,
    pub note: String,
}

impl ExponentValue {
    fn invalid(note: impl Into<String>) -> Self {
        Self {
            value: None,
            valid: false,
            certified: false,
            clipped: false,
            note: note.into(),
        }
    }

    pub fn label(&self) -> &'static str {
        if !self.valid {
            "invalid"
        } else if self.certified {
            "exact"
        } else {
            "achievable bound (regularization not certified)"
        }
    }
}

/// Instances with exponents in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Preset {
    /// Φ vs i(q), valid for q ≤ 1/d².
    PhiVsIso { d: usize, q: f64 },
    /// Φ vs Φ⊥.
    PhiVsPerp { d: usize },
    /// Θ⊥ vs w(q), valid for q ≥ (d+1)/(d+2).
    AntiVsWerner { d: usize, q: f64 },
}

impl Preset {
    /// Single-letter D^M, independent of α.
    pub fn divergence(&self) -> Result<f64> {
        let check = |d: usize, q: f64| -> Result<f64> {
            if d < 2 {
                return Err(Error::domain(format!("local dimension must be ≥ 2, got {d}")));
            }
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::domain(format!("q = {q} outside [0, 1]")));
            }
            Ok(d as f64)
        };
        match *self {
            Preset::PhiVsIso { d, q } => {
                let df = check(d, q)?;
                Ok(((df + 1.0) / (q * df + 1.0)).ln())
            }
            Preset::PhiVsPerp { d } => {
                let df = check(d, 0.0)?;
                Ok((df + 1.0).ln())
            }
            Preset::AntiVsWerner { d, q } => {
                let df = check(d, q)?;
                Ok(((df + 1.0) / (df + 1.0 - 2.0 * q)).ln())
            }
        }
    }

    /// Region where additivity makes the single-letter value the exponent.
    pub fn validity(&self) -> std::result::Result<(), String> {
        match *self {
            Preset::PhiVsIso { d, q } => {
                let t = 1.0 / (d * d) as f64;
                if q <= t {
                    Ok(())
                } else {
                    Err(format!("Φ vs i(q) needs q ≤ 1/d² = {t}, got q = {q}"))
                }
            }
            Preset::PhiVsPerp { .. } => Ok(()),
            Preset::AntiVsWerner { d, q } => {
                let t = (d as f64 + 1.0) / (d as f64 + 2.0);
                if q >= t {
                    Ok(())
                } else {
                    Err(format!("Θ⊥ vs w(q) needs q ≥ (d+1)/(d+2) = {t}, got q = {q}"))
                }
            }
        }
    }

    pub fn curve(&self) -> Result<DivergenceCurve> {
        let v = self.divergence()?;
        let c = DivergenceCurve::constant(v, format!("{self:?}"));
        Ok(if self.validity().is_ok() { c.attested() } else { c })
    }
}

/// Stein exponent of a preset instance.
pub fn stein_preset(preset: Preset) -> Result<ExponentValue> {
    let d = preset.divergence()?;
    if let Err(why) = preset.validity() {
        return Ok(ExponentValue::invalid(why));
    }
    Ok(ExponentValue {
        value: Some(d),
        valid: true,
        certified: true,
        clipped: false,
        note: "single-letter measured relative entropy".into(),
    })
}

/// Stein exponent from a curve: its α = 1 value, exact only when attested.
pub fn stein_exponent(curve: &DivergenceCurve) -> ExponentValue {
    ExponentValue {
        value: Some(curve.at(1.0)),
        valid: true,
        certified: curve.attested,
        clipped: false,
        note: curve.provenance.clone(),
    }
}

/// sup_{α ∈ (1, α_cap]} (α−1)/α · (r − D(α)), never below 0.
pub fn strong_converse_exponent(r: f64, curve: &DivergenceCurve) -> Result<ExponentValue> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("rate must be finite and ≥ 0, got {r}")));
    }
    let (value, note) = if curve.is_constant() {
        let dv = curve.at(2.0);
        ((r - dv).max(0.0), "constant curve: supremum approached as α → ∞".to_string())
    } else {
        // u = (α−1)/α ∈ (0, 1 − 1/α_cap].
        let umax = 1.0 - 1.0 / ALPHA_CAP;
        let mut f = |u: f64| {
            let a = 1.0 / (1.0 - u);
            u * (r - curve.at(a))
        };
        let n = 2000;
        let mut best = (0usize, f64::NEG_INFINITY);
        for i in 1..=n {
            let u = umax * i as f64 / n as f64;
            let v = f(u);
            if v > best.1 {
                best = (i, v);
            }
        }
        let lo = umax * (best.0 - 1) as f64 / n as f64;
        let hi = umax * ((best.0 + 1).min(n)) as f64 / n as f64;
        let (_, refined) = golden_max(&mut f, lo, hi, 1e-14);
        (best.1.max(refined).max(0.0), "golden-section over α ∈ (1, 1e6]".to_string())
    };
    let clipped = r < curve.at(1.0 + 1e-9) && value == 0.0;
    Ok(ExponentValue {
        value: Some(value),
        valid: true,
        certified: curve.attested,
        clipped,
        note: if clipped { format!("{note}; r below D, clipped to 0") } else { note },
    })
}

/// Strong-converse exponent r − D of a preset instance, for r ≥ 0.
pub fn strong_converse_preset(preset: Preset, r: f64) -> Result<ExponentValue> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("rate must be finite and ≥ 0, got {r}")));
    }
    let d = preset.divergence()?;
    if let Err(why) = preset.validity() {
        return Ok(ExponentValue::invalid(why));
    }
    let clipped = r < d;
    Ok(ExponentValue {
        value: Some(if clipped { 0.0 } else { r - d }),
        valid: true,
        certified: true,
        clipped,
        note: if clipped { "r below D, clipped to 0".into() } else { "r − D".into() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{local_basis_measurement, povm_tensor_power, Construction, MeasClass};
    use crate::states::{phi, phi_perp};
    use proptest::prelude::*;

    #[test]
    fn always_accept() {
        let r = phi(2).unwrap();
        let one = Povm::new(vec![r.identity_like()], vec!["1".into()], MeasClass::All, Construction::Operators).unwrap();
        let t = evaluate_test(&r, &phi_perp(2).unwrap(), 1, &one, &[0]).unwrap();
        assert!(t.alpha_err.abs() < 1e-12 && (t.beta_err - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_projector_test_is_perfect() {
        let t1 = crate::povm::binary_from_operator(phi(2).unwrap().op()).unwrap();
        let t = povm_tensor_power(&t1, 2, 4096).unwrap();
        let r = evaluate_test(&phi(2).unwrap(), &phi_perp(2).unwrap(), 2, &t, &[0]).unwrap();
        assert!(r.alpha_err.abs() < 1e-12 && r.beta_err.abs() < 1e-12);
    }

    #[test]
    fn tradeoff_on_local_basis_test() {
        let l = local_basis_measurement(2).unwrap();
        let diag: Vec<usize> = l.labels().iter().enumerate().filter(|(_, s)| s == &"0|0" || s == &"1|1").map(|(i, _)| i).collect();
        let (r, s) = (phi(2).unwrap(), phi_perp(2).unwrap());
        let rep = evaluate_test(&r, &s, 1, &l, &diag).unwrap();
        assert!(rep.alpha_err.abs() < 1e-12);
        assert!((rep.beta_err - 1.0 / 3.0).abs() < 1e-12);
        assert!(error_tradeoff_bound(&rep, 3f64.ln(), 2.0).unwrap());
        let lt = povm_tensor_power(&l, 3, 4096).unwrap();
        let acc: Vec<usize> = lt
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.split(';').all(|p| p == "0|0" || p == "1|1"))
            .map(|(i, _)| i)
            .collect();
        let rep = evaluate_test(&r, &s, 3, &lt, &acc).unwrap();
        assert!(error_tradeoff_bound(&rep, 3.0 * 3f64.ln(), 5.0).unwrap());
        assert!(!error_tradeoff_bound(&rep, 3.0 * (3f64.ln() - 0.5), 5.0).unwrap());
    }

    #[test]
    fn tradeoff_rejects_certain_error() {
        let rep = TestReport { n: 1, alpha_err: 1.0, beta_err: 0.0, accept: vec![] };
        assert!(error_tradeoff_bound(&rep, 1.0, 2.0).is_err());
    }

    #[test]
    fn stein_presets() {
        let v = stein_preset(Preset::PhiVsIso { d: 2, q: 0.125 }).unwrap();
        assert!((v.value.unwrap() - 2.4f64.ln()).abs() < 1e-12);
        assert!(v.certified);
        let v = stein_preset(Preset::PhiVsPerp { d: 3 }).unwrap();
        assert!((v.value.unwrap() - 4f64.ln()).abs() < 1e-12);
        let v = stein_preset(Preset::AntiVsWerner { d: 2, q: 1.0 }).unwrap();
        assert!((v.value.unwrap() - 3f64.ln()).abs() < 1e-12);
        let bad = stein_preset(Preset::PhiVsIso { d: 2, q: 0.3 }).unwrap();
        assert!(!bad.valid && bad.value.is_none());
        assert!(!stein_preset(Preset::AntiVsWerner { d: 2, q: 0.7 }).unwrap().valid);
    }

    #[test]
    fn strong_converse_constant_curve() {
        let d = 2.4f64.ln();
        let c = Preset::PhiVsIso { d: 2, q: 0.125 }.curve().unwrap();
        for r in [d, d + 0.1, d + 2.0] {
            let v = strong_converse_exponent(r, &c).unwrap();
            assert!((v.value.unwrap() - (r - d)).abs() <= 1e-6);
        }
        let low = strong_converse_exponent(d - 0.3, &c).unwrap();
        assert_eq!(low.value, Some(0.0));
        assert!(low.clipped);
        let p = strong_converse_preset(Preset::PhiVsIso { d: 2, q: 0.125 }, d + 0.5).unwrap();
        assert!((p.value.unwrap() - 0.5).abs() < 1e-12);
        assert!(strong_converse_exponent(-1.0, &c).is_err());
    }

    #[test]
    fn strong_converse_varying_curve() {
        let c = DivergenceCurve::new(|a: f64| 0.5 * (1.0 - 1.0 / a), "test");
        let r = 1.0;
        let v = strong_converse_exponent(r, &c).unwrap().value.unwrap();
        let mut brute = 0.0f64;
        for i in 1..200_000 {
            let a = 1.0 + i as f64 * 0.001;
            brute = brute.max((a - 1.0) / a * (r - c.at(a)));
        }
        assert!(v >= brute - 1e-8 && v <= 0.5 + 1e-12);
    }

    #[test]
    fn sampled_curve_interpolates() {
        let c = DivergenceCurve::from_samples(vec![(2.0, 1.0), (1.0, 0.5), (4.0, 1.0)], "file").unwrap();
        assert_eq!(c.at(1.5), 0.75);
        assert_eq!(c.at(0.5), 0.5);
        assert_eq!(c.at(100.0), 1.0);
    }

    proptest! {
        #[test]
        fn strong_converse_monotone_lipschitz(r in 0.0f64..3.0, dr in 0.0f64..1.0, k in 0.0f64..2.0) {
            let c = DivergenceCurve::new(move |a: f64| 0.3 + k * (1.0 - 1.0 / a), "p");
            let a = strong_converse_exponent(r, &c).unwrap().value.unwrap();
            let b = strong_converse_exponent(r + dr, &c).unwrap().value.unwrap();
            prop_assert!(b >= a - 1e-9);
            prop_assert!(b - a <= dr + 1e-9);
        }
    }
}
