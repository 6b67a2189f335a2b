//! JSON form of a circuit: `{"n": 2, "gates": [{"kind": "ry", "qubits": [0], "params": [0.5]}]}`.
//! Fixed gates carry a `matrix` of `[re, im]` rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateDocument {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitDocument {
    pub n: usize,
    pub gates: Vec<GateDocument>,
}

impl CircuitDocument {
    pub fn from_circuit(c: &Circuit) -> Self {
        let gates = c
            .gates()
            .iter()
            .map(|g| GateDocument {
                kind: g.kind,
                qubits: g.qubits.clone(),
                params: g.param().into_iter().collect(),
                matrix: g.matrix.as_ref().map(|m| {
                    (0..m.rows())
                        .map(|r| (0..m.cols()).map(|c| [m.at(r, c).re, m.at(r, c).im]).collect())
                        .collect()
                }),
            })
            .collect();
        CircuitDocument { n: c.num_qubits(), gates }
    }

    pub fn to_circuit(&self) -> Result<Circuit> {
        let mut c = Circuit::new(self.n);
        for (k, g) in self.gates.iter().enumerate() {
            let bad = |msg: String| Error::Format(format!("gate {k}: {msg}"));
            let gate = if g.kind == GateKind::FixedUnitary {
                if !g.params.is_empty() {
                    return Err(bad("fixed gates take no parameters".into()));
                }
                let rows = g.matrix.as_ref().ok_or_else(|| bad("missing matrix".into()))?;
                let dim = rows.len();
                let mut data = Vec::with_capacity(dim * dim);
                for row in rows {
                    if row.len() != dim {
                        return Err(bad("matrix is not square".into()));
                    }
                    data.extend(row.iter().map(|z| C64::new(z[0], z[1])));
                }
                let m = DenseTensor::matrix(dim, dim, data).map_err(|e| bad(e.to_string()))?;
                Gate::fixed(g.qubits.clone(), m).map_err(|e| bad(e.to_string()))?
            } else {
                if g.params.len() != 1 || g.matrix.is_some() {
                    return Err(bad(format!("{:?} takes exactly one parameter", g.kind)));
                }
                Gate::rotation(g.kind, g.qubits.clone(), g.params[0])
            };
            c.push(gate).map_err(|e| bad(e.to_string()))?;
        }
        Ok(c)
    }
}

impl Circuit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CircuitDocument::from_circuit(self)).expect("circuit serializes")
    }

    pub fn from_json(text: &str) -> Result<Circuit> {
        let doc: CircuitDocument =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        doc.to_circuit()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Circuit> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Circuit::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::random_circuit;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = random_circuit(4, 21, &mut rng);
        let back = Circuit::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn kinds_use_kebab_case() {
        let mut c = Circuit::new(2);
        c.push(Gate::crx(0, 1, 0.5)).unwrap();
        c.push(Gate::fixed(vec![1], DenseTensor::identity(2)).unwrap()).unwrap();
        let text = c.to_json();
        assert!(text.contains("\"crx\"") && text.contains("\"fixed-unitary\""));
    }

    #[test]
    fn rejects_bad_documents() {
        for text in [
            r#"{"n": 1, "gates": [{"kind": "ry", "qubits": [0], "params": []}]}"#,
            r#"{"n": 1, "gates": [{"kind": "ry", "qubits": [1], "params": [0.1]}]}"#,
            r#"{"n": 1, "gates": [{"kind": "swap", "qubits": [0], "params": [0.1]}]}"#,
            r#"{"n": 1, "gates": [{"kind": "fixed-unitary", "qubits": [0], "params": []}]}"#,
            r#"{"n": 1, "gates": [], "extra": 1}"#,
        ] {
            assert!(Circuit::from_json(text).is_err(), "{text}");
        }
    }
}
