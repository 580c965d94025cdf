use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionScheme {
    /// Feature-wise average over the present views; needs equal embedding widths.
    Mean,
    /// Column-wise concatenation in view order; needs every view present.
    Concat,
}

impl FusionScheme {
    pub fn name(self) -> &'static str {
        match self {
            FusionScheme::Mean => "mean",
            FusionScheme::Concat => "concat",
        }
    }
}

impl std::fmt::Display for FusionScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Widths of one marginal network: input → hidden1 → hidden2 → embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewLayers {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub embedding: usize,
}

impl ViewLayers {
    pub fn new(input: usize, hidden1: usize, hidden2: usize, embedding: usize) -> Self {
        ViewLayers {
            input,
            hidden1,
            hidden2,
            embedding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub views: Vec<ViewLayers>,
    pub fusion: FusionScheme,
    pub fusion_hidden: usize,
    pub classes: usize,
}

impl LayerPlan {
    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::InvalidArgument("layer plan has no views".into()));
        }
        if self.classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "layer plan needs at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.fusion_hidden == 0 {
            return Err(Error::InvalidArgument("fusion hidden width is 0".into()));
        }
        for (v, l) in self.views.iter().enumerate() {
            if l.input == 0 || l.hidden1 == 0 || l.hidden2 == 0 || l.embedding == 0 {
                return Err(Error::InvalidArgument(format!(
                    "view {v} has a zero width: {l:?}"
                )));
            }
        }
        if self.fusion == FusionScheme::Mean {
            let e = self.views[0].embedding;
            if let Some(l) = self.views.iter().find(|l| l.embedding != e) {
                return Err(Error::InvalidArgument(format!(
                    "mean fusion needs equal embedding widths ({e} vs {})",
                    l.embedding
                )));
            }
        }
        Ok(())
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    /// Width of the fused representation.
    pub fn fused_width(&self) -> usize {
        match self.fusion {
            FusionScheme::Mean => self.views[0].embedding,
            FusionScheme::Concat => self.views.iter().map(|l| l.embedding).sum(),
        }
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.views.iter().map(|l| l.input).collect()
    }
}
