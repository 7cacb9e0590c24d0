//! JSON model bundles with bit-exact hexadecimal parameter encoding.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backbone::{BackboneParams, BackboneSpec, Dense};
use crate::clm_head::ClmParameters;
use crate::error::{Error, Result};
use crate::hexfloat::{format_hex, parse_hex};
use crate::model::{Head, HeadKind, OrdinalModel};
use crate::trainer::TrainingConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub weights: Vec<String>,
    pub bias: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneRecord {
    pub spec: BackboneSpec,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClmRecord {
    pub b1: String,
    pub alpha: Vec<String>,
    pub tau: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub generator: String,
    pub best_epoch: Option<usize>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub q_classes: usize,
    /// `"logit"`, `"probit"`, `"cloglog"` or `"nominal"`.
    pub link: HeadKind,
    pub backbone: BackboneRecord,
    pub clm: Option<ClmRecord>,
    pub training: Option<TrainingConfig>,
    pub seed: Option<u64>,
    pub metadata: BundleMetadata,
}

fn hex_vec(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| format_hex(v)).collect()
}

fn parse_vec(values: &[String]) -> Result<Vec<f64>> {
    values.iter().map(|s| parse_hex(s)).collect()
}

impl ModelBundle {
    pub fn from_model(model: &OrdinalModel, training: Option<&TrainingConfig>, best_epoch: Option<usize>, diverged: bool) -> Self {
        let backbone = BackboneRecord {
            spec: model.backbone().spec().clone(),
            layers: model
                .backbone()
                .layers
                .iter()
                .map(|l| LayerRecord { weights: hex_vec(&l.weights), bias: hex_vec(&l.bias) })
                .collect(),
        };
        let clm = model.clm_params().map(|p| ClmRecord {
            b1: format_hex(p.b1),
            alpha: hex_vec(&p.alpha),
            tau: format_hex(p.tau),
        });
        ModelBundle {
            format_version: FORMAT_VERSION,
            q_classes: model.q_classes(),
            link: model.kind(),
            backbone,
            clm,
            training: training.cloned(),
            seed: training.map(|t| t.seed),
            metadata: BundleMetadata {
                generator: concat!("ordinal-clm ", env!("CARGO_PKG_VERSION")).to_string(),
                best_epoch,
                diverged,
            },
        }
    }

    pub fn to_model(&self) -> Result<OrdinalModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::domain(format!("unsupported bundle format version {}", self.format_version)));
        }
        let layers = self
            .backbone
            .spec
            .layer_dims()
            .into_iter()
            .zip(&self.backbone.layers)
            .map(|((in_dim, out_dim), rec)| {
                Ok(Dense { in_dim, out_dim, weights: parse_vec(&rec.weights)?, bias: parse_vec(&rec.bias)? })
            })
            .collect::<Result<Vec<_>>>()?;
        if layers.len() != self.backbone.layers.len() {
            return Err(Error::domain("bundle layer count does not match its backbone spec"));
        }
        let backbone = BackboneParams::from_layers(self.backbone.spec.clone(), layers)?;
        let head = match (self.link, &self.clm) {
            (HeadKind::Clm(link), Some(rec)) => Head::Clm {
                link,
                params: ClmParameters::new(parse_hex(&rec.b1)?, parse_vec(&rec.alpha)?, parse_hex(&rec.tau)?)?,
            },
            (HeadKind::Nominal, None) => Head::Nominal,
            (HeadKind::Clm(_), None) => return Err(Error::domain("ordinal bundle is missing its CLM parameters")),
            (HeadKind::Nominal, Some(_)) => return Err(Error::domain("nominal bundle carries CLM parameters")),
        };
        OrdinalModel::from_parts(self.q_classes, backbone, head)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("format_version").is_none() {
            return Err(Error::domain("bundle is missing `format_version`"));
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::link::LinkFunction;

    #[test]
    fn round_trip_is_bit_exact_and_byte_stable() {
        for kind in [HeadKind::Clm(LinkFunction::CLogLog), HeadKind::Nominal] {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let model = OrdinalModel::init(kind, 3, vec![5, 4], 4, &mut rng).unwrap();
            let cfg = TrainingConfig::new(kind, 1e-3, 16, 17);
            let bundle = ModelBundle::from_model(&model, Some(&cfg), Some(3), false);
            let text = bundle.to_json().unwrap();
            let back = ModelBundle::from_json(&text).unwrap();
            assert_eq!(back, bundle);
            let restored = back.to_model().unwrap();
            let a: Vec<u64> = model.flatten().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = restored.flatten().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
            let again = ModelBundle::from_model(&restored, Some(&cfg), Some(3), false).to_json().unwrap();
            assert_eq!(again, text);
        }
    }

    #[test]
    fn link_names_in_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = OrdinalModel::init(HeadKind::Clm(LinkFunction::Probit), 2, vec![3], 3, &mut rng).unwrap();
        let text = ModelBundle::from_model(&model, None, None, false).to_json().unwrap();
        assert!(text.contains("\"link\": \"probit\""));
        assert!(text.contains("\"format_version\": 1"));
    }

    #[test]
    fn rejects_missing_version_and_inconsistent_head() {
        assert!(ModelBundle::from_json("{\"q_classes\": 3}").is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = OrdinalModel::init(HeadKind::Clm(LinkFunction::Logit), 2, vec![3], 3, &mut rng).unwrap();
        let mut bundle = ModelBundle::from_model(&model, None, None, false);
        bundle.clm = None;
        assert!(bundle.to_model().is_err());
        let mut bundle = ModelBundle::from_model(&model, None, None, false);
        bundle.format_version = 99;
        assert!(bundle.to_model().is_err());
    }
}
