use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Layer, ModelMeta, Network, Topology};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    topology: Topology,
    layers: Vec<LayerFile>,
    #[serde(default)]
    meta: ModelMeta,
}

impl Network {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            topology: self.topology.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    activation: l.activation,
                    weights: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                    biases: l.biases.to_vec(),
                })
                .collect(),
            meta: self.meta.clone(),
        };
        serde_json::to_string(&file).expect("finite model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::parse("model", e))?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, l) in file.layers.into_iter().enumerate() {
            let cols = l.weights.first().map_or(0, Vec::len);
            if l.weights.iter().any(|r| r.len() != cols) {
                return Err(Error::Validation(format!("layer {i}: ragged weight rows")));
            }
            let rows = l.weights.len();
            let weights =
                Array2::from_shape_vec((rows, cols), l.weights.concat()).expect("shape matches");
            if weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "layer {i}: non-finite parameter"
                )));
            }
            layers.push(Layer {
                weights,
                biases: Array1::from(l.biases),
                activation: l.activation,
            });
        }
        let mut net = Network::from_layers(file.topology, layers)?;
        net.meta = file.meta;
        Ok(net)
    }
}

pub fn save_model(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, net.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Network::from_json(&text)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::ffnn::init_weights;
    use crate::seed;

    fn net() -> Network {
        let t = Topology::new(4, &[5], 3, Activation::Tanh, Activation::Softmax).unwrap();
        let mut n = init_weights(&t, &mut seed::rng(7)).unwrap();
        let p: Vec<f64> = n.params().iter().map(|v| v + 1e-3 / 3.0).collect();
        n.set_params(&p).unwrap();
        n.meta.seed = Some(7);
        n
    }

    #[test]
    fn json_round_trip_is_exact() {
        let a = net();
        let b = Network::from_json(&a.to_json()).unwrap();
        assert_eq!(a, b);
        let mut rng = seed::rng(1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_model(&net(), &p).unwrap();
        assert_eq!(load_model(&p).unwrap(), net());
    }

    #[test]
    fn truncated_and_mismatched_files_fail() {
        let text = net().to_json();
        assert!(matches!(
            Network::from_json(&text[..text.len() / 2]),
            Err(Error::Parse { .. })
        ));
        let bad = text.replacen("\"n_output\":3", "\"n_output\":4", 1);
        assert!(matches!(
            Network::from_json(&bad),
            Err(Error::Validation(_))
        ));
        match Network::from_json(r#"{"layers":[]}"#) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("topology")),
            other => panic!("{other:?}"),
        }
    }
}
