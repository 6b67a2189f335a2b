//! JSON form of an MPS.
//!
//! ```json
//! {"n": 2, "chi": 1, "canonical_form": "left",
//!  "tensors": [[[[[1.0, 0.0]], [[0.0, 0.0]]]], ...]}
//! ```
//!
//! `tensors[k][l][s][r]` is the `[re, im]` pair of site `k` at left bond
//! `l`, physical index `s` and right bond `r`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CanonicalForm, Mps};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, C64};

/// Largest isometry deviation accepted when a document claims a canonical form.
const FORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpsDocument {
    pub n: usize,
    pub chi: usize,
    pub canonical_form: String,
    pub tensors: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

impl MpsDocument {
    pub fn from_mps(s: &Mps) -> Self {
        let tensors = s
            .tensors()
            .iter()
            .map(|t| {
                let (l, _, r) = super::dims(t);
                (0..l)
                    .map(|a| {
                        (0..2)
                            .map(|p| {
                                (0..r)
                                    .map(|b| {
                                        let z = t.get(&[a, p, b]);
                                        [z.re, z.im]
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let canonical_form = match s.canonical_form() {
            CanonicalForm::Left => "left",
            CanonicalForm::Right => "right",
            CanonicalForm::None => "none",
        };
        MpsDocument { n: s.len(), chi: s.max_bond(), canonical_form: canonical_form.into(), tensors }
    }

    pub fn to_mps(&self) -> Result<Mps> {
        if self.tensors.len() != self.n {
            return Err(Error::Format(format!(
                "n = {} but {} tensors given",
                self.n,
                self.tensors.len()
            )));
        }
        let mut tensors = Vec::with_capacity(self.n);
        for (k, t) in self.tensors.iter().enumerate() {
            let l = t.len();
            let p = t.first().map_or(0, |x| x.len());
            let r = t.first().and_then(|x| x.first()).map_or(0, |x| x.len());
            if l == 0 || p != 2 || r == 0 {
                return Err(Error::Format(format!("site {k} has shape ({l}, {p}, {r})")));
            }
            let mut data = Vec::with_capacity(l * 2 * r);
            for row in t {
                if row.len() != 2 {
                    return Err(Error::Format(format!("site {k} is ragged")));
                }
                for col in row {
                    if col.len() != r {
                        return Err(Error::Format(format!("site {k} is ragged")));
                    }
                    data.extend(col.iter().map(|z| C64::new(z[0], z[1])));
                }
            }
            if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Format(format!("site {k} has non-finite entries")));
            }
            tensors.push(DenseTensor::new(vec![l, 2, r], data)?);
        }
        let mut s = Mps::new(tensors).map_err(|e| Error::Format(e.to_string()))?;
        if s.max_bond() != self.chi {
            return Err(Error::Format(format!(
                "chi = {} but the largest bond is {}",
                self.chi,
                s.max_bond()
            )));
        }
        let n = self.n;
        match self.canonical_form.as_str() {
            "none" => {}
            "left" => {
                if (0..n).any(|k| s.left_isometry_error(k) > FORM_TOL) {
                    return Err(Error::Format("tensors are not left canonical".into()));
                }
                s.set_center(Some(n - 1));
            }
            "right" => {
                if (0..n).any(|k| s.right_isometry_error(k) > FORM_TOL) {
                    return Err(Error::Format("tensors are not right canonical".into()));
                }
                s.set_center(Some(0));
            }
            other => return Err(Error::Format(format!("unknown canonical form {other:?}"))),
        }
        Ok(s)
    }
}

impl Mps {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MpsDocument::from_mps(self)).expect("MPS serializes")
    }

    pub fn from_json(text: &str) -> Result<Mps> {
        let doc: MpsDocument =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        doc.to_mps()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Mps> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Mps::from_json(&text)
    }
}
