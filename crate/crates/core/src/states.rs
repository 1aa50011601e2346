//! Isotropic and Werner state families, twirling, and related constructors.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linops::{CMat, DensityOp, HermitianOp, C64};

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::domain(format!("local dimension must be ≥ 2, got {d}")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("mixing parameter must lie in [0,1], got {p}")));
    }
    Ok(())
}

/// Swap operator F on d ⊗ d.
pub fn swap(d: usize) -> HermitianOp {
    let n = d * d;
    let mat = CMat::from_fn(n, n, |r, c| {
        if c == (r % d) * d + r / d {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    HermitianOp::new(mat, vec![d, d], vec![1]).expect("swap is Hermitian")
}

/// Φ = |Ψ⟩⟨Ψ| with |Ψ⟩ = d^{-1/2} Σ_i |ii⟩.
pub fn phi(d: usize) -> Result<DensityOp> {
    check_d(d)?;
    let n = d * d;
    let mat = CMat::from_fn(n, n, |r, c| {
        if r % (d + 1) == 0 && c % (d + 1) == 0 {
            C64::new(1.0 / d as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(DensityOp::new_unchecked(HermitianOp::from_parts(mat, vec![d, d], vec![1])))
}

/// Φ⊥ = (1 − Φ)/(d² − 1).
pub fn phi_perp(d: usize) -> Result<DensityOp> {
    let p = phi(d)?;
    let id = p.identity_like();
    let n2 = (d * d) as f64;
    Ok(DensityOp::new_unchecked((&id - p.op()).scale(1.0 / (n2 - 1.0))))
}

/// Θ = (1 + F)/(d(d+1)), the normalized symmetric projector.
pub fn symmetric(d: usize) -> Result<DensityOp> {
    check_d(d)?;
    let f = swap(d);
    let id = f.identity_like();
    let df = d as f64;
    Ok(DensityOp::new_unchecked((&id + &f).scale(1.0 / (df * (df + 1.0)))))
}

/// Θ⊥ = (1 − F)/(d(d−1)), the normalized antisymmetric projector.
pub fn antisymmetric(d: usize) -> Result<DensityOp> {
    check_d(d)?;
    let f = swap(d);
    let id = f.identity_like();
    let df = d as f64;
    Ok(DensityOp::new_unchecked((&id - &f).scale(1.0 / (df * (df - 1.0)))))
}

/// i(p) = pΦ + (1−p)Φ⊥.
pub fn isotropic(d: usize, p: f64) -> Result<DensityOp> {
    check_p(p)?;
    let op = HermitianOp::combination(&[(p, phi(d)?.op()), (1.0 - p, phi_perp(d)?.op())])?;
    Ok(DensityOp::new_unchecked(op))
}

/// w(p) = pΘ + (1−p)Θ⊥.
pub fn werner(d: usize, p: f64) -> Result<DensityOp> {
    check_p(p)?;
    let op = HermitianOp::combination(&[(p, symmetric(d)?.op()), (1.0 - p, antisymmetric(d)?.op())])?;
    Ok(DensityOp::new_unchecked(op))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotropicCoords {
    pub d: usize,
    pub p: f64,
}

impl IsotropicCoords {
    pub fn new(d: usize, p: f64) -> Result<Self> {
        check_d(d)?;
        check_p(p)?;
        Ok(Self { d, p })
    }

    /// i(p) is separable (equivalently PPT) iff p ≤ 1/d.
    pub fn is_ppt(&self) -> bool {
        self.p <= 1.0 / self.d as f64
    }

    pub fn state(&self) -> Result<DensityOp> {
        isotropic(self.d, self.p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WernerCoords {
    pub d: usize,
    pub p: f64,
}

impl WernerCoords {
    pub fn new(d: usize, p: f64) -> Result<Self> {
        check_d(d)?;
        check_p(p)?;
        Ok(Self { d, p })
    }

    /// w(p) is separable (equivalently PPT) iff p ≥ 1/2.
    pub fn is_ppt(&self) -> bool {
        self.p >= 0.5
    }

    pub fn state(&self) -> Result<DensityOp> {
        werner(self.d, self.p)
    }
}

/// Named state family.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    MaxEntangled,
    PhiPerp,
    Symmetric,
    Antisymmetric,
    Isotropic(f64),
    Werner(f64),
    /// Externally supplied matrix; `d` is ignored.
    Raw(HermitianOp),
}

impl Family {
    /// Family code used in CSV output and on the command line.
    pub fn code(&self) -> &'static str {
        match self {
            Family::MaxEntangled => "phi",
            Family::PhiPerp => "phi-perp",
            Family::Symmetric => "sym",
            Family::Antisymmetric => "antisym",
            Family::Isotropic(_) => "iso",
            Family::Werner(_) => "werner",
            Family::Raw(_) => "raw",
        }
    }

    pub fn parameter(&self) -> Option<f64> {
        match self {
            Family::Isotropic(p) | Family::Werner(p) => Some(*p),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parameter() {
            Some(p) => write!(f, "{}:{p}", self.code()),
            None => f.write_str(self.code()),
        }
    }
}

/// Parses every family name except `raw:<file>`, which needs file access and
/// is handled by callers.
impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let param = |rest: &str| -> Result<f64> {
            let p: f64 = rest
                .parse()
                .map_err(|_| Error::Parse(format!("bad family parameter in '{s}'")))?;
            check_p(p)?;
            Ok(p)
        };
        match s {
            "phi" => Ok(Family::MaxEntangled),
            "phi-perp" => Ok(Family::PhiPerp),
            "sym" => Ok(Family::Symmetric),
            "antisym" => Ok(Family::Antisymmetric),
            _ => {
                if let Some(rest) = s.strip_prefix("iso:") {
                    Ok(Family::Isotropic(param(rest)?))
                } else if let Some(rest) = s.strip_prefix("werner:") {
                    Ok(Family::Werner(param(rest)?))
                } else {
                    Err(Error::Parse(format!("unknown state family '{s}'")))
                }
            }
        }
    }
}

pub fn make_state(family: &Family, d: usize) -> Result<DensityOp> {
    match family {
        Family::MaxEntangled => phi(d),
        Family::PhiPerp => phi_perp(d),
        Family::Symmetric => symmetric(d),
        Family::Antisymmetric => antisymmetric(d),
        Family::Isotropic(p) => isotropic(d, *p),
        Family::Werner(p) => werner(d, *p),
        Family::Raw(x) => DensityOp::new(x.clone()),
    }
}

/// (1−ε)ρ + ε·1/d_total.
pub fn full_support_mix(rho: &DensityOp, eps: f64) -> Result<DensityOp> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::domain(format!("mixing weight must lie in (0,1], got {eps}")));
    }
    let id = rho.identity_like();
    let n = rho.dim() as f64;
    let op = HermitianOp::combination(&[(1.0 - eps, rho.op()), (eps / n, &id)])?;
    Ok(DensityOp::new_unchecked(op))
}

/// ρ^⊗n. Copies keep their natural interleaved order A₁B₁A₂B₂…, with the
/// bipartition set to all B factors, i.e. A₁…Aₙ : B₁…Bₙ.
pub fn tensor_power(rho: &DensityOp, n: usize, dim_cap: usize) -> Result<DensityOp> {
    rho.tensor_power(n, dim_cap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwirlKind {
    Isotropic,
    Werner,
}

fn two_party_d(x: &HermitianOp) -> Result<usize> {
    match (x.dims(), x.b_indices()) {
        ([a, b], [1]) if a == b => Ok(*a),
        _ => Err(Error::structural(format!(
            "twirling needs a d⊗d operator with B = second factor, got dims {:?}",
            x.dims()
        ))),
    }
}

/// Projection onto the commutant of U⊗Ū (isotropic) or U⊗U (Werner).
pub fn twirl(x: &HermitianOp, kind: TwirlKind) -> Result<HermitianOp> {
    let d = two_party_d(x)?;
    let df = d as f64;
    let id = x.identity_like();
    match kind {
        TwirlKind::Isotropic => {
            let p = phi(d)?;
            let c1 = x.inner(p.op());
            let c2 = (x.trace() - c1) / (df * df - 1.0);
            HermitianOp::combination(&[(c1 - c2, p.op()), (c2, &id)])
        }
        TwirlKind::Werner => {
            let f = swap(d);
            let ps = (&id + &f).scale(0.5);
            let pa = (&id - &f).scale(0.5);
            let cs = x.inner(&ps) / (df * (df + 1.0) / 2.0);
            let ca = x.inner(&pa) / (df * (df - 1.0) / 2.0);
            HermitianOp::combination(&[(cs, &ps), (ca, &pa)])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::eig_herm;
    use proptest::prelude::*;

    #[test]
    fn endpoints() {
        for d in 2..5 {
            assert!((isotropic(d, 1.0).unwrap().op() - phi(d).unwrap().op()).max_abs() < 1e-15);
            assert!((isotropic(d, 0.0).unwrap().op() - phi_perp(d).unwrap().op()).max_abs() < 1e-15);
            assert!((werner(d, 1.0).unwrap().op() - symmetric(d).unwrap().op()).max_abs() < 1e-15);
        }
    }

    #[test]
    fn all_families_are_states() {
        for d in 2..5 {
            for f in ["phi", "phi-perp", "sym", "antisym", "iso:0.3", "werner:0.7"] {
                let s = make_state(&f.parse().unwrap(), d).unwrap();
                DensityOp::new(s.into_op()).unwrap();
            }
        }
    }

    #[test]
    fn overlap_with_phi() {
        for q in [0.0, 0.2, 0.9] {
            let v = phi(3).unwrap().inner(isotropic(3, q).unwrap().op());
            assert!((v - q).abs() < 1e-14);
        }
    }

    #[test]
    fn singlet_is_rank_one() {
        let s = eig_herm(antisymmetric(2).unwrap().op()).unwrap();
        assert_eq!(s.eigenvalues.iter().filter(|&&l| l > 1e-9).count(), 1);
    }

    #[test]
    fn full_support_mix_examples() {
        let pi = full_support_mix(&phi(2).unwrap(), 1.0).unwrap();
        assert!((pi.op() - &HermitianOp::diag(&[0.25; 4])).max_abs() < 1e-15);
        let m = full_support_mix(&phi(2).unwrap(), 0.5).unwrap();
        let s = eig_herm(m.op()).unwrap();
        for (a, b) in s.eigenvalues.iter().zip([0.125, 0.125, 0.125, 0.625]) {
            assert!((a - b).abs() < 1e-14);
        }
        let rho = isotropic(3, 0.4).unwrap();
        let (a, b) = (0.3, 0.2);
        let lhs = full_support_mix(&full_support_mix(&rho, a).unwrap(), b).unwrap();
        let rhs = full_support_mix(&rho, a + b - a * b).unwrap();
        assert!((lhs.op() - rhs.op()).max_abs() < 1e-15);
        assert!(full_support_mix(&rho, 0.0).is_err());
    }

    #[test]
    fn tensor_power_of_phi() {
        let p = tensor_power(&phi(2).unwrap(), 2, 4096).unwrap();
        assert_eq!(p.dim(), 16);
        assert_eq!(p.b_indices(), &[1, 3]);
        let s = eig_herm(p.op()).unwrap();
        assert_eq!(s.eigenvalues.iter().filter(|&&l| l > 1e-9).count(), 1);
        let t = tensor_power(&isotropic(2, 0.3).unwrap(), 3, 4096).unwrap();
        assert!((t.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ppt_iff_threshold() {
        for d in 2..5 {
            for k in 0..=20 {
                let p = k as f64 / 20.0;
                let ppt = isotropic(d, p).unwrap().partial_transpose().unwrap().min_eigenvalue().unwrap()
                    >= -1e-10;
                assert_eq!(ppt, p <= 1.0 / d as f64 + 1e-10, "iso d={d} p={p}");
                assert_eq!(IsotropicCoords::new(d, p).unwrap().is_ppt(), p <= 1.0 / d as f64);
                let wppt = werner(d, p).unwrap().partial_transpose().unwrap().min_eigenvalue().unwrap()
                    >= -1e-10;
                assert_eq!(wppt, p >= 0.5 - 1e-10, "werner d={d} p={p}");
            }
        }
    }

    #[test]
    fn twirl_fixed_points_and_phi_werner_image() {
        let i = isotropic(3, 0.35).unwrap();
        assert!((&twirl(i.op(), TwirlKind::Isotropic).unwrap() - i.op()).max_abs() < 1e-14);
        let w = werner(3, 0.35).unwrap();
        assert!((&twirl(w.op(), TwirlKind::Werner).unwrap() - w.op()).max_abs() < 1e-14);
        // tr[P_sym Φ] = (1 + tr[FΦ])/2 = (1 + 1)/2 = 1, so Φ twirls onto Θ.
        let t = twirl(phi(2).unwrap().op(), TwirlKind::Werner).unwrap();
        assert!((&t - symmetric(2).unwrap().op()).max_abs() < 1e-14);
    }

    #[test]
    fn twirl_rejects_non_square() {
        let x = HermitianOp::identity(vec![2, 3], vec![1]).unwrap();
        assert!(twirl(&x, TwirlKind::Isotropic).is_err());
    }

    fn random_psd(d: usize, e: &[(f64, f64)]) -> HermitianOp {
        let n = d * d;
        let g = CMat::from_fn(n, n, |i, j| {
            let (a, b) = e[(i * n + j) % e.len()];
            C64::new(a, b)
        });
        HermitianOp::new(&g * g.adjoint(), vec![d, d], vec![1]).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn twirl_properties(d in 2usize..4, e in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 37), p in 0.0f64..1.0) {
            let w = random_psd(d, &e);
            for kind in [TwirlKind::Isotropic, TwirlKind::Werner] {
                let t = twirl(&w, kind).unwrap();
                let tt = twirl(&t, kind).unwrap();
                prop_assert!((&t - &tt).max_abs() < 1e-12 * w.max_abs().max(1.0));
                prop_assert!((t.trace() - w.trace()).abs() < 1e-10 * w.trace().max(1.0));
            }
            let i = isotropic(d, p).unwrap();
            let lhs = i.inner(&w);
            let rhs = i.inner(&twirl(&w, TwirlKind::Isotropic).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-10 * w.max_abs().max(1.0));
        }

        #[test]
        fn twirl_preserves_ppt(d in 2usize..4, e in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 37)) {
            let x = random_psd(d, &e);
            let w = crate::linops::project_ppt_cone(&x, 1e-10, 20000).unwrap();
            let tol = 1e-8 * x.max_abs().max(1.0);
            for kind in [TwirlKind::Isotropic, TwirlKind::Werner] {
                let t = twirl(&w, kind).unwrap();
                prop_assert!(t.min_eigenvalue().unwrap() >= -tol);
                prop_assert!(t.partial_transpose().unwrap().min_eigenvalue().unwrap() >= -tol);
            }
        }
    }
}
