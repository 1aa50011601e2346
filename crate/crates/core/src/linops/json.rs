//! Matrix exchange format: `{dims, b_indices, re, im}` with row-major rows.

use serde::{Deserialize, Serialize};

use super::{CMat, HermitianOp, C64};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub dims: Vec<usize>,
    #[serde(default)]
    pub b_indices: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_op(x: &HermitianOp) -> Self {
        let n = x.dim();
        let m = x.matrix();
        Self {
            dims: x.dims().to_vec(),
            b_indices: x.b_indices().to_vec(),
            re: (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }

    pub fn to_op(&self) -> Result<HermitianOp> {
        let n = self.re.len();
        if self.re.iter().any(|r| r.len() != n) {
            return Err(Error::Parse("real part is not square".into()));
        }
        let has_im = !self.im.is_empty();
        if has_im && (self.im.len() != n || self.im.iter().any(|r| r.len() != n)) {
            return Err(Error::Parse("imaginary part shape differs from real part".into()));
        }
        let mat = CMat::from_fn(n, n, |i, j| {
            C64::new(self.re[i][j], if has_im { self.im[i][j] } else { 0.0 })
        });
        HermitianOp::new(mat, self.dims.clone(), self.b_indices.clone())
    }

    pub fn parse(text: &str) -> Result<HermitianOp> {
        let m: MatrixJson = serde_json::from_str(text)?;
        m.to_op()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[C64::new(0.5, 0.0), C64::new(0.1, 0.2), C64::new(0.1, -0.2), C64::new(0.5, 0.0)],
        );
        let x = HermitianOp::new(m, vec![2], vec![]).unwrap();
        let text = serde_json::to_string(&MatrixJson::from_op(&x)).unwrap();
        assert_eq!(MatrixJson::parse(&text).unwrap(), x);
    }

    #[test]
    fn missing_imaginary_part_is_real() {
        let x = MatrixJson::parse(r#"{"dims":[2],"re":[[1,0],[0,0]]}"#).unwrap();
        assert_eq!(x.trace(), 1.0);
    }

    #[test]
    fn bad_shapes() {
        assert!(MatrixJson::parse(r#"{"dims":[2],"re":[[1,0],[0]]}"#).is_err());
        assert!(MatrixJson::parse(r#"{"dims":[3],"re":[[1,0],[0,1]]}"#).is_err());
        assert!(MatrixJson::parse("not json").is_err());
    }
}
