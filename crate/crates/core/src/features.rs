//! Feature vectors and the extractor presets shared by the pipeline.

use serde::{Deserialize, Serialize};

use crate::hog::HogParams;
use crate::imaging::GrayImage;
use crate::lbp::LbpParams;

/// Dimension of ResNet50 global-average-pooled features.
pub const RESNET50_DIM: usize = 2048;
/// Dimension of DenseNet-169 global-average-pooled features.
pub const DENSENET169_DIM: usize = 1664;
/// HOG dimension on a 224x224 image with the default [`HogParams`].
pub const HOG_DIM: usize = 5408;
/// LBP dimension on a 224x224 image with the `paper-dim` preset.
pub const LBP_DIM: usize = 1960;

/// An extracted descriptor together with the name of the method that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    pub source: String,
}

impl FeatureVector {
    pub fn new(values: Vec<f32>, source: impl Into<String>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            values,
            source: source.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Feature family selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hog,
    Lbp,
    /// Features computed outside this crate (CNN embeddings) and ingested as stores.
    External,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hog" => Ok(Method::Hog),
            "lbp" => Ok(Method::Lbp),
            "external" => Ok(Method::External),
            other => Err(format!("unknown method '{other}' (expected hog, lbp or external)")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Hog => "hog",
            Method::Lbp => "lbp",
            Method::External => "external",
        })
    }
}

/// A configured handcrafted extractor.
#[derive(Debug, Clone, PartialEq)]
pub enum Extractor {
    Hog(HogParams),
    Lbp(LbpParams),
}

impl Extractor {
    pub fn name(&self) -> &'static str {
        match self {
            Extractor::Hog(_) => "hog",
            Extractor::Lbp(_) => "lbp",
        }
    }

    /// Output dimension for a `width x height` input, if the geometry is valid.
    pub fn output_dim(&self, width: usize, height: usize) -> Option<usize> {
        match self {
            Extractor::Hog(p) => p.output_dim(width, height),
            Extractor::Lbp(p) => p.output_dim(width, height),
        }
    }

    pub fn extract(&self, img: &GrayImage) -> Result<FeatureVector, crate::GeometryError> {
        match self {
            Extractor::Hog(p) => crate::hog::hog_extract(img, p),
            Extractor::Lbp(p) => crate::lbp::lbp_extract(img, p),
        }
    }
}
