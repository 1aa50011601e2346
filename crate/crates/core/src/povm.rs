//! POVMs, Born-rule statistics and measurement classes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classical::{FiniteMeasure, ZERO_FLOOR};
use crate::error::{Error, Result};
use crate::linops::{eig_herm, CMat, DensityOp, HermitianOp, MatrixJson};
#[cfg(test)]
use crate::linops::C64;
use crate::states::phi;

pub const POVM_PSD_TOL: f64 = 1e-10;
pub const COMPLETENESS_TOL: f64 = 1e-9;
const IDEMPOTENCE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasClass {
    #[serde(rename = "ALL")]
    All,
    #[serde(rename = "PPT")]
    Ppt,
    #[serde(rename = "SEP")]
    Sep,
    #[serde(rename = "LOCC1")]
    Locc1,
    #[serde(rename = "LO")]
    Lo,
    #[serde(rename = "P-LOCC1")]
    PLocc1,
    #[serde(rename = "P-LO")]
    PLo,
}

impl MeasClass {
    pub const ALL_CLASSES: [MeasClass; 7] = [
        MeasClass::PLo,
        MeasClass::PLocc1,
        MeasClass::Lo,
        MeasClass::Locc1,
        MeasClass::Sep,
        MeasClass::Ppt,
        MeasClass::All,
    ];

    fn parents(self) -> &'static [MeasClass] {
        match self {
            MeasClass::PLo => &[MeasClass::Lo, MeasClass::PLocc1],
            MeasClass::PLocc1 => &[MeasClass::Locc1],
            MeasClass::Lo => &[MeasClass::Locc1],
            MeasClass::Locc1 => &[MeasClass::Sep],
            MeasClass::Sep => &[MeasClass::Ppt],
            MeasClass::Ppt => &[MeasClass::All],
            MeasClass::All => &[],
        }
    }

    /// Inclusion in the class lattice.
    pub fn is_subclass_of(self, other: MeasClass) -> bool {
        self == other || self.parents().iter().any(|p| p.is_subclass_of(other))
    }

    pub fn name(self) -> &'static str {
        match self {
            MeasClass::All => "ALL",
            MeasClass::Ppt => "PPT",
            MeasClass::Sep => "SEP",
            MeasClass::Locc1 => "LOCC1",
            MeasClass::Lo => "LO",
            MeasClass::PLocc1 => "P-LOCC1",
            MeasClass::PLo => "P-LO",
        }
    }
}

impl fmt::Display for MeasClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('_', "-");
        MeasClass::ALL_CLASSES
            .iter()
            .copied()
            .find(|c| c.name() == up || c.name().replace('-', "") == up)
            .ok_or_else(|| Error::Parse(format!("unknown measurement class '{s}'")))
    }
}

/// How a POVM was built. Local parts act on the A-block and B-block.
#[derive(Clone, Debug, PartialEq)]
pub enum Construction {
    Product {
        a: Vec<HermitianOp>,
        b: Vec<HermitianOp>,
    },
    /// One-way A → B: B's measurement depends on A's outcome.
    Conditional {
        a: Vec<HermitianOp>,
        b: Vec<Vec<HermitianOp>>,
    },
    Tensor(Vec<Construction>),
    /// Given only by its elements.
    Operators,
}

impl Construction {
    fn is_local(&self, one_way: bool) -> bool {
        match self {
            Construction::Product { .. } => true,
            Construction::Conditional { .. } => one_way,
            Construction::Tensor(fs) => fs.iter().all(|f| f.is_local(one_way)),
            Construction::Operators => false,
        }
    }

    fn local_parts_projective(&self) -> bool {
        let proj = |xs: &[HermitianOp]| xs.iter().all(is_idempotent);
        match self {
            Construction::Product { a, b } => proj(a) && proj(b),
            Construction::Conditional { a, b } => proj(a) && b.iter().all(|bx| proj(bx)),
            Construction::Tensor(fs) => fs.iter().all(|f| f.local_parts_projective()),
            Construction::Operators => false,
        }
    }
}

fn is_idempotent(x: &HermitianOp) -> bool {
    let sq = x.matrix() * x.matrix();
    (sq - x.matrix()).iter().all(|z| z.norm() <= IDEMPOTENCE_TOL)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    elements: Vec<HermitianOp>,
    labels: Vec<String>,
    class: MeasClass,
    construction: Construction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassCheck {
    Pass,
    Fail(String),
}

impl ClassCheck {
    pub fn passed(&self) -> bool {
        matches!(self, ClassCheck::Pass)
    }
}

fn validate_elements(elements: &[HermitianOp]) -> Result<()> {
    let first = elements
        .first()
        .ok_or_else(|| Error::Validation("POVM has no elements".into()))?;
    let n = first.dim();
    let mut sum = CMat::zeros(n, n);
    for (k, e) in elements.iter().enumerate() {
        if e.dim() != n {
            return Err(Error::structural("POVM elements differ in dimension"));
        }
        let lmin = e.min_eigenvalue()?;
        if lmin < -POVM_PSD_TOL {
            return Err(Error::Validation(format!(
                "POVM element {k} has eigenvalue {lmin:e}"
            )));
        }
        sum += e.matrix();
    }
    let resid = (sum - CMat::identity(n, n))
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()));
    if resid > COMPLETENESS_TOL {
        return Err(Error::Validation(format!(
            "POVM elements do not sum to identity (residual {resid:e})"
        )));
    }
    Ok(())
}

impl Povm {
    /// Validates positivity and completeness; the class tag is taken as given
    /// and must be consistent with `construction` (see [`class_check`]).
    pub fn new(
        elements: Vec<HermitianOp>,
        labels: Vec<String>,
        class: MeasClass,
        construction: Construction,
    ) -> Result<Self> {
        if labels.len() != elements.len() {
            return Err(Error::structural("label count differs from element count"));
        }
        validate_elements(&elements)?;
        let p = Self {
            elements,
            labels,
            class,
            construction,
        };
        if let ClassCheck::Fail(why) = class_check(&p, class)? {
            return Err(Error::Validation(format!("class tag {class} rejected: {why}")));
        }
        Ok(p)
    }

    pub fn elements(&self) -> &[HermitianOp] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn class(&self) -> MeasClass {
        self.class
    }

    pub fn construction(&self) -> &Construction {
        &self.construction
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    /// Merges outcomes: `groups[k]` lists the outcomes folded into new outcome k.
    pub fn coarse_grain(&self, groups: &[Vec<usize>]) -> Result<Povm> {
        let mut elements = Vec::with_capacity(groups.len());
        let mut labels = Vec::with_capacity(groups.len());
        for g in groups {
            if g.is_empty() || g.iter().any(|&i| i >= self.len()) {
                return Err(Error::structural("invalid coarse-graining group"));
            }
            let terms: Vec<(f64, &HermitianOp)> = g.iter().map(|&i| (1.0, &self.elements[i])).collect();
            elements.push(HermitianOp::combination(&terms)?);
            labels.push(g.iter().map(|&i| self.labels[i].as_str()).collect::<Vec<_>>().join("+"));
        }
        Povm::new(elements, labels, MeasClass::All, Construction::Operators)
            .and_then(|p| p.with_best_numeric_class())
    }

    /// Retags an operator-only POVM as PPT when every element passes the test.
    fn with_best_numeric_class(mut self) -> Result<Povm> {
        if self.class == MeasClass::All && ppt_check(&self.elements)?.passed() {
            self.class = MeasClass::Ppt;
        }
        Ok(self)
    }
}

fn ppt_check(elements: &[HermitianOp]) -> Result<ClassCheck> {
    for (k, e) in elements.iter().enumerate() {
        if !e.is_bipartite() {
            return Ok(ClassCheck::Fail("elements carry no bipartition".into()));
        }
        let l = e.partial_transpose()?.min_eigenvalue()?;
        if l < -POVM_PSD_TOL {
            return Ok(ClassCheck::Fail(format!(
                "element {k} has partial-transpose eigenvalue {l:e}"
            )));
        }
    }
    Ok(ClassCheck::Pass)
}

/// Decides whether `p` belongs to `class`. PPT is tested numerically; the
/// local classes and SEP rely on the construction record.
pub fn class_check(p: &Povm, class: MeasClass) -> Result<ClassCheck> {
    let c = &p.construction;
    let fail = |s: &str| Ok(ClassCheck::Fail(s.to_string()));
    match class {
        MeasClass::All => Ok(ClassCheck::Pass),
        MeasClass::Ppt => ppt_check(&p.elements),
        MeasClass::Sep => {
            if c.is_local(true) {
                Ok(ClassCheck::Pass)
            } else {
                fail("undecidable: no product decomposition on record")
            }
        }
        MeasClass::Locc1 | MeasClass::Lo => {
            if c.is_local(class == MeasClass::Locc1) {
                Ok(ClassCheck::Pass)
            } else {
                fail("construction record is not of this local form")
            }
        }
        MeasClass::PLocc1 | MeasClass::PLo => {
            if !c.is_local(class == MeasClass::PLocc1) {
                fail("construction record is not of this local form")
            } else if !c.local_parts_projective() {
                fail("local parts are not projective")
            } else {
                Ok(ClassCheck::Pass)
            }
        }
    }
}

/// Brings `rho` into the subsystem layout of the POVM elements.
fn align_state<'a>(rho: &'a HermitianOp, elem: &HermitianOp) -> Result<std::borrow::Cow<'a, HermitianOp>> {
    if rho.dim() != elem.dim() {
        return Err(Error::structural(format!(
            "state dimension {} differs from POVM dimension {}",
            rho.dim(),
            elem.dim()
        )));
    }
    if rho.dims() == elem.dims() || elem.dims().len() == 1 {
        return Ok(std::borrow::Cow::Borrowed(rho));
    }
    if rho.is_bipartite() {
        let blocked = rho.to_ab_blocks()?;
        if blocked.dims() == elem.dims() {
            return Ok(std::borrow::Cow::Owned(blocked));
        }
    }
    Err(Error::structural(format!(
        "state layout {:?} does not match POVM layout {:?}",
        rho.dims(),
        elem.dims()
    )))
}

/// μ(z) = tr[ρ M^z].
pub fn born(rho: &DensityOp, p: &Povm) -> Result<FiniteMeasure> {
    born_op(rho.op(), p)
}

pub(crate) fn born_op(rho: &HermitianOp, p: &Povm) -> Result<FiniteMeasure> {
    let r = align_state(rho, &p.elements[0])?;
    let w = p
        .elements
        .iter()
        .map(|e| {
            let v = r.inner(e);
            if v < ZERO_FLOOR {
                0.0
            } else {
                v
            }
        })
        .collect();
    FiniteMeasure::new(p.labels.clone(), w)
}

fn check_local(parts: &[HermitianOp]) -> Result<usize> {
    let d = parts
        .first()
        .ok_or_else(|| Error::Validation("local POVM has no elements".into()))?
        .dim();
    validate_elements(parts)?;
    Ok(d)
}

fn single(x: &HermitianOp) -> HermitianOp {
    HermitianOp::from_parts(x.matrix().clone(), vec![x.dim()], vec![])
}

/// {M_A^x ⊗ M_B^y}, labels "x|y".
pub fn product(a: &[HermitianOp], b: &[HermitianOp]) -> Result<Povm> {
    let da = check_local(a)?;
    let db = check_local(b)?;
    let a: Vec<HermitianOp> = a.iter().map(single).collect();
    let b: Vec<HermitianOp> = b.iter().map(single).collect();
    let mut elements = Vec::with_capacity(a.len() * b.len());
    let mut labels = Vec::with_capacity(a.len() * b.len());
    for (x, ax) in a.iter().enumerate() {
        for (y, by) in b.iter().enumerate() {
            elements.push(HermitianOp::from_parts(
                ax.matrix().kronecker(by.matrix()),
                vec![da, db],
                vec![1],
            ));
            labels.push(format!("{x}|{y}"));
        }
    }
    let construction = Construction::Product { a, b };
    let class = if construction.local_parts_projective() {
        MeasClass::PLo
    } else {
        MeasClass::Lo
    };
    Povm::new(elements, labels, class, construction)
}

/// {M_A^x ⊗ M_B^{y|x}}, labels "x|y".
pub fn conditional(a: &[HermitianOp], b: &[Vec<HermitianOp>]) -> Result<Povm> {
    if a.len() != b.len() {
        return Err(Error::structural("need one B measurement per A outcome"));
    }
    let da = check_local(a)?;
    let mut db = None;
    for bx in b {
        let d = check_local(bx)?;
        if *db.get_or_insert(d) != d {
            return Err(Error::structural("conditional B measurements differ in dimension"));
        }
    }
    let db = db.unwrap();
    let a: Vec<HermitianOp> = a.iter().map(single).collect();
    let b: Vec<Vec<HermitianOp>> = b.iter().map(|bx| bx.iter().map(single).collect()).collect();
    let mut elements = Vec::new();
    let mut labels = Vec::new();
    for (x, ax) in a.iter().enumerate() {
        for (y, by) in b[x].iter().enumerate() {
            elements.push(HermitianOp::from_parts(
                ax.matrix().kronecker(by.matrix()),
                vec![da, db],
                vec![1],
            ));
            labels.push(format!("{x}|{y}"));
        }
    }
    let construction = Construction::Conditional { a, b };
    let class = if construction.local_parts_projective() {
        MeasClass::PLocc1
    } else {
        MeasClass::Locc1
    };
    Povm::new(elements, labels, class, construction)
}

/// Computational-basis projectors on one system.
pub fn basis_projectors(d: usize) -> Vec<HermitianOp> {
    (0..d)
        .map(|i| {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            HermitianOp::diag(&v)
        })
        .collect()
}

/// {|i⟩⟨i| ⊗ |j⟩⟨j|}.
pub fn local_basis_measurement(d: usize) -> Result<Povm> {
    if d < 2 {
        return Err(Error::domain("local dimension must be ≥ 2"));
    }
    product(&basis_projectors(d), &basis_projectors(d))
}

/// Two-outcome test {E, 1 − E}; tagged PPT when both elements pass the PPT
/// test and ALL otherwise.
pub fn binary_from_operator(e: &HermitianOp) -> Result<Povm> {
    let comp = &e.identity_like() - e;
    let s = eig_herm(e)?;
    if s.eigenvalues[0] < -POVM_PSD_TOL || *s.eigenvalues.last().unwrap() > 1.0 + POVM_PSD_TOL {
        return Err(Error::Validation("test operator must satisfy 0 ⪯ E ⪯ 1".into()));
    }
    let p = Povm::new(
        vec![e.clone(), comp],
        vec!["0".into(), "1".into()],
        MeasClass::All,
        Construction::Operators,
    )?;
    p.with_best_numeric_class()
}

/// The isotropic measurement {Φ + (1−Φ)/(d+1), d(1−Φ)/(d+1)}.
pub fn isotropic_measurement(d: usize) -> Result<Povm> {
    let ph = phi(d)?;
    let id = ph.identity_like();
    let perp = &id - ph.op();
    let df = d as f64;
    let i1 = HermitianOp::combination(&[(1.0, ph.op()), (1.0 / (df + 1.0), &perp)])?;
    let i2 = perp.scale(df / (df + 1.0));
    Povm::new(vec![i1, i2], vec!["1".into(), "2".into()], MeasClass::Ppt, Construction::Operators)
}

/// P^⊗n with interleaved copies, labels joined by ';'.
pub fn povm_tensor_power(p: &Povm, n: usize, dim_cap: usize) -> Result<Povm> {
    if n == 0 {
        return Err(Error::domain("tensor power needs n ≥ 1"));
    }
    if (p.dim() as f64).powi(n as i32) > dim_cap as f64 {
        return Err(Error::Resource(format!("POVM tensor power exceeds dimension cap {dim_cap}")));
    }
    let mut elements = p.elements.clone();
    let mut labels = p.labels.clone();
    for _ in 1..n {
        let mut ne = Vec::with_capacity(elements.len() * p.len());
        let mut nl = Vec::with_capacity(ne.capacity());
        for (e, l) in elements.iter().zip(&labels) {
            for (f, m) in p.elements.iter().zip(&p.labels) {
                ne.push(e.tensor(f));
                nl.push(format!("{l};{m}"));
            }
        }
        elements = ne;
        labels = nl;
    }
    let construction = Construction::Tensor(vec![p.construction.clone(); n]);
    Ok(Povm {
        elements,
        labels,
        class: p.class,
        construction,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalPartsJson {
    pub a: Vec<MatrixJson>,
    /// One list for product POVMs, one list per A outcome for conditional ones.
    pub b: Vec<Vec<MatrixJson>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PovmJson {
    pub class: MeasClass,
    pub elements: Vec<MatrixJson>,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local: Option<LocalPartsJson>,
}

impl PovmJson {
    pub fn from_povm(p: &Povm) -> Self {
        let conv = |xs: &[HermitianOp]| xs.iter().map(MatrixJson::from_op).collect::<Vec<_>>();
        let local = match &p.construction {
            Construction::Product { a, b } => Some(LocalPartsJson {
                a: conv(a),
                b: vec![conv(b)],
            }),
            Construction::Conditional { a, b } => Some(LocalPartsJson {
                a: conv(a),
                b: b.iter().map(|bx| conv(bx)).collect(),
            }),
            _ => None,
        };
        Self {
            class: p.class,
            elements: p.elements.iter().map(MatrixJson::from_op).collect(),
            labels: p.labels.clone(),
            local,
        }
    }

    pub fn to_povm(&self) -> Result<Povm> {
        let elements = self
            .elements
            .iter()
            .map(MatrixJson::to_op)
            .collect::<Result<Vec<_>>>()?;
        let construction = match &self.local {
            None => Construction::Operators,
            Some(l) => {
                let conv = |xs: &[MatrixJson]| xs.iter().map(MatrixJson::to_op).collect::<Result<Vec<_>>>();
                let a = conv(&l.a)?;
                let b = l.b.iter().map(|bx| conv(bx)).collect::<Result<Vec<_>>>()?;
                let rebuilt = if b.len() == 1 && a.len() != 1 {
                    product(&a, &b[0])?
                } else {
                    conditional(&a, &b)?
                };
                let close = rebuilt.elements.len() == elements.len()
                    && rebuilt
                        .elements
                        .iter()
                        .zip(&elements)
                        .all(|(x, y)| (x.matrix() - y.matrix()).iter().all(|z| z.norm() < 1e-9));
                if !close {
                    return Err(Error::Validation(
                        "local parts do not reproduce the listed elements".into(),
                    ));
                }
                rebuilt.construction
            }
        };
        Povm::new(elements, self.labels.clone(), self.class, construction)
    }

    pub fn parse(text: &str) -> Result<Povm> {
        let j: PovmJson = serde_json::from_str(text)?;
        j.to_povm()
    }
}

/// Rank-one projector |v⟩⟨v| on a single system.
#[cfg(test)]
pub(crate) fn rank_one(v: &[C64]) -> HermitianOp {
    let n = v.len();
    HermitianOp::from_parts(CMat::from_fn(n, n, |i, j| v[i] * v[j].conj()), vec![n], vec![])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{renyi, Order};
    use crate::states::{isotropic, phi_perp, werner};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn lattice() {
        use MeasClass::*;
        assert!(PLo.is_subclass_of(All));
        assert!(PLo.is_subclass_of(PLocc1));
        assert!(Lo.is_subclass_of(Sep));
        assert!(!Lo.is_subclass_of(PLo));
        assert!(!Ppt.is_subclass_of(Sep));
        assert!(!PLocc1.is_subclass_of(Lo));
        assert_eq!("p-locc1".parse::<MeasClass>().unwrap(), PLocc1);
        assert_eq!("locc1".parse::<MeasClass>().unwrap(), Locc1);
    }

    #[test]
    fn local_basis_properties() {
        let l = local_basis_measurement(2).unwrap();
        assert_eq!(l.len(), 4);
        assert_eq!(l.class(), MeasClass::PLo);
        for e in l.elements() {
            assert_eq!(eig_herm(e).unwrap().eigenvalues.iter().filter(|&&x| x > 0.5).count(), 1);
        }
        assert!(class_check(&l, MeasClass::Lo).unwrap().passed());
        assert!(class_check(&l, MeasClass::Sep).unwrap().passed());
        assert!(class_check(&l, MeasClass::Ppt).unwrap().passed());
    }

    #[test]
    fn born_on_maximally_mixed() {
        let pi = DensityOp::new(HermitianOp::diag(&[0.25; 4]).with_layout(vec![2, 2], vec![1]).unwrap()).unwrap();
        let p = isotropic_measurement(2).unwrap();
        let mu = born(&pi, &p).unwrap();
        let expect: Vec<f64> = p.elements().iter().map(|e| e.trace() / 4.0).collect();
        assert!(close(mu.weights(), &expect, 1e-14));
    }

    #[test]
    fn born_phi_and_phi_perp_local_basis() {
        for d in 2..5 {
            let l = local_basis_measurement(d).unwrap();
            let mu = born(&phi(d).unwrap(), &l).unwrap();
            let nu = born(&phi_perp(d).unwrap(), &l).unwrap();
            let df = d as f64;
            for i in 0..d {
                for j in 0..d {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    assert!((mu.weights()[i * d + j] - delta / df).abs() < 1e-14);
                    assert!((nu.weights()[i * d + j] - (1.0 - delta / df) / (df * df - 1.0)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn werner_local_basis_statistics() {
        let d = 2;
        let mu = born(&werner(d, 1.0).unwrap(), &local_basis_measurement(d).unwrap()).unwrap();
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                let expect = (1.0 + delta) / (d as f64 * (d as f64 + 1.0));
                assert!((mu.weights()[i * d + j] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn phi_test() {
        let t = binary_from_operator(phi(3).unwrap().op()).unwrap();
        assert_eq!(t.class(), MeasClass::All);
        assert!(!class_check(&t, MeasClass::Ppt).unwrap().passed());
        assert!(matches!(class_check(&t, MeasClass::Sep).unwrap(), ClassCheck::Fail(r) if r.contains("undecidable")));
        assert!(close(born(&phi(3).unwrap(), &t).unwrap().weights(), &[1.0, 0.0], 1e-14));
        assert!(close(born(&phi_perp(3).unwrap(), &t).unwrap().weights(), &[0.0, 1.0], 1e-14));
    }

    #[test]
    fn isotropic_measurement_statistics_and_class() {
        for d in 2..5 {
            let m = isotropic_measurement(d).unwrap();
            assert!(class_check(&m, MeasClass::Ppt).unwrap().passed());
            let df = d as f64;
            for p in [0.0, 0.3, 1.0] {
                let mu = born(&isotropic(d, p).unwrap(), &m).unwrap();
                let expect = [p + (1.0 - p) / (df + 1.0), df * (1.0 - p) / (df + 1.0)];
                assert!(close(mu.weights(), &expect, 1e-14));
            }
        }
    }

    #[test]
    fn completeness_enforced() {
        let e = HermitianOp::diag(&[1.0, 0.0]);
        let r = Povm::new(vec![e], vec!["0".into()], MeasClass::All, Construction::Operators);
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn sep_tag_requires_record() {
        let l = local_basis_measurement(2).unwrap();
        let r = Povm::new(l.elements().to_vec(), l.labels().to_vec(), MeasClass::Sep, Construction::Operators);
        assert!(r.is_err());
    }

    #[test]
    fn tensor_power_of_local_basis() {
        let l = local_basis_measurement(2).unwrap();
        let l2 = povm_tensor_power(&l, 2, 4096).unwrap();
        assert_eq!(l2.len(), 16);
        assert_eq!(l2.class(), MeasClass::PLo);
        assert!(class_check(&l2, MeasClass::PLo).unwrap().passed());
        // On a product state the statistics factorize.
        let r = isotropic(2, 0.7).unwrap();
        let s = isotropic(2, 0.2).unwrap();
        let mu = born(&r.tensor(&s), &l2).unwrap();
        let expect = born(&r, &l).unwrap().product(&born(&s, &l).unwrap());
        assert!(close(mu.weights(), expect.weights(), 1e-14));
        // The same statistics are obtained with the blocked product POVM.
        let l4 = local_basis_measurement(4).unwrap();
        let mu4 = born(&r.tensor(&s), &l4).unwrap();
        let mut a = mu.weights().to_vec();
        let mut b = mu4.weights().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert!(close(&a, &b, 1e-14));
    }

    #[test]
    fn coarse_graining_reduces_divergence() {
        let l = local_basis_measurement(3).unwrap();
        let r = isotropic(3, 0.9).unwrap();
        let s = isotropic(3, 0.1).unwrap();
        let groups: Vec<Vec<usize>> = vec![vec![0, 4, 8], vec![1, 2, 3], vec![5, 6, 7]];
        let c = l.coarse_grain(&groups).unwrap();
        for a in [0.5, 1.0, 2.0] {
            let fine = renyi(&born(&r, &l).unwrap(), &born(&s, &l).unwrap(), Order::Finite(a)).unwrap();
            let coarse = renyi(&born(&r, &c).unwrap(), &born(&s, &c).unwrap(), Order::Finite(a)).unwrap();
            assert!(coarse.to_f64() <= fine.to_f64() + 1e-12);
        }
    }

    #[test]
    fn json_round_trip_keeps_local_record() {
        let l = local_basis_measurement(2).unwrap();
        let text = serde_json::to_string(&PovmJson::from_povm(&l)).unwrap();
        let back = PovmJson::parse(&text).unwrap();
        assert_eq!(back.class(), MeasClass::PLo);
        assert_eq!(back.elements(), l.elements());
        let m = isotropic_measurement(2).unwrap();
        let back = PovmJson::parse(&serde_json::to_string(&PovmJson::from_povm(&m)).unwrap()).unwrap();
        assert_eq!(back.class(), MeasClass::Ppt);
    }

    #[test]
    fn conditional_povm() {
        let a = basis_projectors(2);
        let plus = rank_one(&[C64::new(0.5f64.sqrt(), 0.0), C64::new(0.5f64.sqrt(), 0.0)]);
        let minus = &plus.identity_like() - &plus;
        let b = vec![basis_projectors(2), vec![plus, minus]];
        let p = conditional(&a, &b).unwrap();
        assert_eq!(p.class(), MeasClass::PLocc1);
        assert!(class_check(&p, MeasClass::Locc1).unwrap().passed());
        assert!(!class_check(&p, MeasClass::Lo).unwrap().passed());
    }
}
