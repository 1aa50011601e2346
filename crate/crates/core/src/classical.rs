//! Classical Rényi divergences of finite measures.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights below this are treated as exact zeros in support tests.
pub const ZERO_FLOOR: f64 = 1e-15;
const NORM_TOL: f64 = 1e-10;

/// A finite measure over string labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasure {
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if labels.len() != weights.len() {
            return Err(Error::structural("label and weight counts differ"));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::domain(format!("invalid weight {w}")));
        }
        Ok(Self { labels, weights })
    }

    /// Measure on labels "0", "1", ….
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let labels = (0..weights.len()).map(|i| i.to_string()).collect();
        Self::new(labels, weights)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= NORM_TOL
    }

    /// Product measure with labels "x|y".
    pub fn product(&self, other: &FiniteMeasure) -> FiniteMeasure {
        let mut labels = Vec::with_capacity(self.labels.len() * other.labels.len());
        let mut weights = Vec::with_capacity(labels.capacity());
        for (lx, wx) in self.labels.iter().zip(&self.weights) {
            for (ly, wy) in other.labels.iter().zip(&other.weights) {
                labels.push(format!("{lx}|{ly}"));
                weights.push(wx * wy);
            }
        }
        FiniteMeasure { labels, weights }
    }

    /// Image under a column-stochastic map: `t[y][x]` is the probability of
    /// output `y` given input `x`.
    pub fn push_forward(&self, t: &[Vec<f64>]) -> Result<FiniteMeasure> {
        if t.iter().any(|row| row.len() != self.weights.len()) {
            return Err(Error::structural("channel width differs from alphabet size"));
        }
        let w = t
            .iter()
            .map(|row| row.iter().zip(&self.weights).map(|(a, b)| a * b).sum())
            .collect();
        FiniteMeasure::from_weights(w)
    }

    /// Weights of `other` in the label order of `self`.
    fn aligned(&self, other: &FiniteMeasure) -> Result<Vec<f64>> {
        if self.labels == other.labels {
            return Ok(other.weights.clone());
        }
        if self.labels.len() != other.labels.len() {
            return Err(Error::structural("measures live on different alphabets"));
        }
        self.labels
            .iter()
            .map(|l| {
                other
                    .labels
                    .iter()
                    .position(|m| m == l)
                    .map(|i| other.weights[i])
                    .ok_or_else(|| Error::structural(format!("label {l} missing")))
            })
            .collect()
    }
}

/// A real number or +∞.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// The value as f64, with +∞ mapped to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(v)
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}

/// Rényi order α ∈ (0, ∞].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Order {
    Finite(f64),
    Infinity,
}

impl Order {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha == f64::INFINITY {
            Ok(Order::Infinity)
        } else if alpha > 0.0 && alpha.is_finite() {
            Ok(Order::Finite(alpha))
        } else {
            Err(Error::domain(format!("order must be positive, got {alpha}")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Order::Finite(a) => a,
            Order::Infinity => f64::INFINITY,
        }
    }

    pub fn is_one(self) -> bool {
        self == Order::Finite(1.0)
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(a) => write!(f, "{a}"),
            Order::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for Order {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Order::Infinity),
            t => {
                let a: f64 = t
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad order '{s}'")))?;
                Order::new(a)
            }
        }
    }
}

impl Serialize for Order {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Finite(a) => s.serialize_f64(*a),
            Order::Infinity => s.serialize_str("inf"),
        }
    }
}

fn zero(w: f64) -> bool {
    w < ZERO_FLOOR
}

/// Q_α(μ‖ν) = Σ μ(z)^α ν(z)^{1−α}.
pub fn q_alpha(mu: &FiniteMeasure, nu: &FiniteMeasure, alpha: f64) -> Result<ExtReal> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::domain(format!("Q_α needs α ∈ (0,1)∪(1,∞), got {alpha}")));
    }
    let nw = mu.aligned(nu)?;
    let mut q = 0.0;
    for (&m, &n) in mu.weights.iter().zip(&nw) {
        if zero(m) {
            continue;
        }
        if zero(n) {
            if alpha > 1.0 {
                return Ok(ExtReal::PosInf);
            }
            continue;
        }
        q += m.powf(alpha) * n.powf(1.0 - alpha);
    }
    Ok(ExtReal::Finite(q))
}

fn not_abs_continuous(mu: &[f64], nu: &[f64]) -> bool {
    mu.iter().zip(nu).any(|(&m, &n)| !zero(m) && zero(n))
}

/// D_α(μ‖ν) in nats.
pub fn renyi(mu: &FiniteMeasure, nu: &FiniteMeasure, alpha: Order) -> Result<ExtReal> {
    if !mu.is_normalized() || !nu.is_normalized() {
        return Err(Error::domain(format!(
            "Rényi divergence needs normalized inputs (totals {}, {})",
            mu.total(),
            nu.total()
        )));
    }
    let nw = mu.aligned(nu)?;
    Ok(renyi_weights(&mu.weights, &nw, alpha))
}

/// D_α on aligned weight vectors, without normalization checks.
pub fn renyi_weights(mw: &[f64], nw: &[f64], alpha: Order) -> ExtReal {
    match alpha {
        Order::Infinity => {
            if not_abs_continuous(mw, nw) {
                return ExtReal::PosInf;
            }
            let best = mw
                .iter()
                .zip(nw)
                .filter(|(m, _)| !zero(**m))
                .map(|(m, n)| (m / n).ln())
                .fold(f64::NEG_INFINITY, f64::max);
            ExtReal::Finite(best)
        }
        Order::Finite(a) if a == 1.0 => {
            if not_abs_continuous(mw, nw) {
                return ExtReal::PosInf;
            }
            let kl = mw
                .iter()
                .zip(nw)
                .filter(|(m, _)| !zero(**m))
                .map(|(m, n)| m * (m / n).ln())
                .sum();
            ExtReal::Finite(kl)
        }
        Order::Finite(a) => {
            if a > 1.0 && not_abs_continuous(mw, nw) {
                return ExtReal::PosInf;
            }
            let q: f64 = mw
                .iter()
                .zip(nw)
                .filter(|(m, n)| !zero(**m) && !zero(**n))
                .map(|(m, n)| m.powf(a) * n.powf(1.0 - a))
                .sum();
            if q <= 0.0 {
                ExtReal::PosInf
            } else {
                ExtReal::Finite(q.ln() / (a - 1.0))
            }
        }
    }
}

/// Σ_z |μ(z) − ν(z)|.
pub fn l1_distance(mu: &FiniteMeasure, nu: &FiniteMeasure) -> Result<f64> {
    let nw = mu.aligned(nu)?;
    Ok(mu.weights.iter().zip(&nw).map(|(a, b)| (a - b).abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(w: &[f64]) -> FiniteMeasure {
        FiniteMeasure::from_weights(w.to_vec()).unwrap()
    }

    fn fin(x: ExtReal) -> f64 {
        x.finite().expect("finite value")
    }

    #[test]
    fn q_alpha_examples() {
        assert!((fin(q_alpha(&m(&[0.5, 0.5]), &m(&[0.5, 0.5]), 2.0).unwrap()) - 1.0).abs() < 1e-15);
        assert_eq!(q_alpha(&m(&[1.0, 0.0]), &m(&[0.0, 1.0]), 0.5).unwrap(), ExtReal::Finite(0.0));
        assert!((fin(q_alpha(&m(&[1.0, 0.0]), &m(&[0.5, 0.5]), 2.0).unwrap()) - 2.0).abs() < 1e-15);
        assert!(q_alpha(&m(&[1.0]), &m(&[1.0]), 1.0).is_err());
        assert_eq!(q_alpha(&m(&[0.5, 0.5]), &m(&[1.0, 0.0]), 3.0).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn renyi_point_mass_against_uniform() {
        let mu = m(&[1.0, 0.0]);
        let nu = m(&[0.5, 0.5]);
        for a in [Order::Finite(2.0), Order::Finite(1.0), Order::Infinity] {
            assert!((fin(renyi(&mu, &nu, a).unwrap()) - 2f64.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn infinity_conventions() {
        let a = m(&[1.0, 0.0]);
        let b = m(&[0.0, 1.0]);
        for al in [0.3, 1.0, 2.0] {
            assert_eq!(renyi(&a, &b, Order::Finite(al)).unwrap(), ExtReal::PosInf);
        }
        assert_eq!(renyi(&a, &b, Order::Infinity).unwrap(), ExtReal::PosInf);
        // Overlapping but not absolutely continuous: finite below 1, infinite from 1.
        let c = m(&[0.5, 0.5]);
        assert!(renyi(&c, &a, Order::Finite(0.5)).unwrap().is_finite());
        assert_eq!(renyi(&c, &a, Order::Finite(1.0)).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn local_basis_statistics_of_phi_and_phi_perp() {
        // d = 2: μ = δ_ij/2, ν = (1 − δ_ij/2)/3.
        let mu = m(&[0.5, 0.0, 0.0, 0.5]);
        let nu = m(&[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]);
        for a in [0.2, 0.5, 1.0, 3.0] {
            assert!((fin(renyi(&mu, &nu, Order::Finite(a)).unwrap()) - 3f64.ln()).abs() < 1e-13);
        }
        assert!((fin(renyi(&mu, &nu, Order::Infinity).unwrap()) - 3f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn unnormalized_rejected() {
        assert!(renyi(&m(&[0.5, 0.6]), &m(&[0.5, 0.5]), Order::Finite(2.0)).is_err());
    }

    #[test]
    fn aligned_by_label() {
        let a = FiniteMeasure::new(vec!["x".into(), "y".into()], vec![0.25, 0.75]).unwrap();
        let b = FiniteMeasure::new(vec!["y".into(), "x".into()], vec![0.75, 0.25]).unwrap();
        assert_eq!(renyi(&a, &b, Order::Finite(2.0)).unwrap(), ExtReal::Finite(0.0));
    }

    #[test]
    fn order_parsing() {
        assert_eq!("inf".parse::<Order>().unwrap(), Order::Infinity);
        assert_eq!("0.5".parse::<Order>().unwrap(), Order::Finite(0.5));
        assert!("-1".parse::<Order>().is_err());
        assert!("x".parse::<Order>().is_err());
    }

    fn normalize(w: &[f64]) -> FiniteMeasure {
        let s: f64 = w.iter().sum();
        m(&w.iter().map(|x| x / s).collect::<Vec<_>>())
    }

    fn pair() -> impl Strategy<Value = (FiniteMeasure, FiniteMeasure)> {
        (2usize..6).prop_flat_map(|k| {
            (
                proptest::collection::vec(0.01f64..1.0, k),
                proptest::collection::vec(0.01f64..1.0, k),
            )
                .prop_map(|(a, b)| (normalize(&a), normalize(&b)))
        })
    }

    const GRID: [f64; 9] = [0.1, 0.3, 0.5, 0.8, 1.0, 1.5, 2.0, 5.0, 10.0];

    proptest! {
        #[test]
        fn monotone_in_order((mu, nu) in pair()) {
            let mut prev = 0.0;
            for a in GRID {
                let v = fin(renyi(&mu, &nu, Order::Finite(a)).unwrap());
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
            let vinf = fin(renyi(&mu, &nu, Order::Infinity).unwrap());
            prop_assert!(vinf >= prev - 1e-12);
        }

        #[test]
        fn additive_on_products((m1, n1) in pair(), (m2, n2) in pair(), ai in 0usize..9) {
            let a = Order::Finite(GRID[ai]);
            let lhs = fin(renyi(&m1.product(&m2), &n1.product(&n2), a).unwrap());
            let rhs = fin(renyi(&m1, &n1, a).unwrap()) + fin(renyi(&m2, &n2, a).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn data_processing((mu, nu) in pair(), raw in proptest::collection::vec(0.01f64..1.0, 18), ai in 0usize..9) {
            let k = mu.weights().len();
            let outs = 3;
            let mut t = vec![vec![0.0; k]; outs];
            for x in 0..k {
                let col: Vec<f64> = (0..outs).map(|y| raw[(x * outs + y) % raw.len()]).collect();
                let s: f64 = col.iter().sum();
                for y in 0..outs { t[y][x] = col[y] / s; }
            }
            let a = Order::Finite(GRID[ai]);
            let before = fin(renyi(&mu, &nu, a).unwrap());
            let after = fin(renyi(&mu.push_forward(&t).unwrap(), &nu.push_forward(&t).unwrap(), a).unwrap());
            prop_assert!(after <= before + 1e-10);
        }

        #[test]
        fn pinsker((mu, nu) in pair(), a in 0.05f64..=1.0) {
            let tv = l1_distance(&mu, &nu).unwrap();
            let d = fin(renyi(&mu, &nu, Order::Finite(a)).unwrap());
            prop_assert!(d >= a / 2.0 * tv * tv - 1e-12);
        }

        #[test]
        fn continuity_at_one((mu, nu) in pair()) {
            let kl = fin(renyi(&mu, &nu, Order::Finite(1.0)).unwrap());
            for a in [1.0 - 1e-4, 1.0 + 1e-4] {
                let v = fin(renyi(&mu, &nu, Order::Finite(a)).unwrap());
                prop_assert!((v - kl).abs() <= 1e-2);
            }
        }
    }
}
