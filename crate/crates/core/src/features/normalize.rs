use serde::{Deserialize, Serialize};

use super::{RegionFeatures, FEATURE_NAMES, NUM_FEATURES};
use crate::{Error, Result};

/// Bounds applied to normalized values of out-of-range inputs.
pub const CLAMP_LOW: f64 = -0.5;
pub const CLAMP_HIGH: f64 = 1.5;

/// Per-feature min/max over a training corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRanges {
    pub names: Vec<String>,
    pub min: [f64; NUM_FEATURES],
    pub max: [f64; NUM_FEATURES],
}

impl FeatureRanges {
    pub fn is_constant(&self, i: usize) -> bool {
        self.max[i] == self.min[i]
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.len() != NUM_FEATURES
            || self.names.iter().zip(FEATURE_NAMES).any(|(a, b)| a != b)
        {
            return Err(Error::Validation(format!(
                "feature names must be {FEATURE_NAMES:?}"
            )));
        }
        for i in 0..NUM_FEATURES {
            if !self.min[i].is_finite() || !self.max[i].is_finite() || self.max[i] < self.min[i] {
                return Err(Error::Validation(format!(
                    "bad range for {}",
                    FEATURE_NAMES[i]
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: FeatureRanges =
            serde_json::from_str(text).map_err(|e| Error::parse("normalizer", e))?;
        r.validate()?;
        Ok(r)
    }
}

pub fn fit_normalizer(rows: &[RegionFeatures]) -> Result<FeatureRanges> {
    if rows.len() < 2 {
        return Err(Error::invalid(format!(
            "normalizer needs >= 2 rows, got {}",
            rows.len()
        )));
    }
    let mut min = [f64::INFINITY; NUM_FEATURES];
    let mut max = [f64::NEG_INFINITY; NUM_FEATURES];
    for r in rows {
        for (i, v) in r.to_array().into_iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    let ranges = FeatureRanges {
        names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        min,
        max,
    };
    ranges.validate()?;
    Ok(ranges)
}

/// `(v - min) / (max - min)` clamped to `[-0.5, 1.5]`; constant features
/// map to 0.5.
pub fn normalize(f: &RegionFeatures, r: &FeatureRanges) -> [f64; NUM_FEATURES] {
    let v = f.to_array();
    std::array::from_fn(|i| {
        if r.is_constant(i) {
            0.5
        } else {
            ((v[i] - r.min[i]) / (r.max[i] - r.min[i])).clamp(CLAMP_LOW, CLAMP_HIGH)
        }
    })
}
