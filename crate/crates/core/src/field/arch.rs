use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Shape of the field MLP.
///
/// A ReLU trunk over the encoded position feeds three heads: density
/// (softplus), semantic logits (linear) and a feature vector. The feature is
/// concatenated with the encoded view direction and passed through one ReLU
/// layer of `color_width()` units to a sigmoid RGB output. Density and logits
/// never see the direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct NetworkArchitecture {
    pub trunk_depth: usize,
    pub trunk_width: usize,
    pub position_encoding_levels: usize,
    pub direction_encoding_levels: usize,
    pub class_count: usize,
}

impl Default for NetworkArchitecture {
    fn default() -> Self {
        Self {
            trunk_depth: 4,
            trunk_width: 64,
            position_encoding_levels: 6,
            direction_encoding_levels: 2,
            class_count: 4,
        }
    }
}

/// Role of a dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Trunk(usize),
    Density,
    Semantic,
    Feature,
    ColorHidden,
    ColorOut,
}

/// One dense layer: weights `outputs x inputs` row-major at `offset`,
/// followed immediately by `outputs` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub kind: LayerKind,
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_count(&self) -> usize {
        self.inputs * self.outputs
    }

    pub fn len(&self) -> usize {
        self.weight_count() + self.outputs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bias_offset(&self) -> usize {
        self.offset + self.weight_count()
    }
}

impl NetworkArchitecture {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.trunk_depth < 1 {
            problems.push("trunk_depth must be >= 1");
        }
        if self.trunk_width < 1 {
            problems.push("trunk_width must be >= 1");
        }
        if self.class_count < 2 {
            problems.push("class_count must be >= 2");
        }
        if self.class_count > 255 {
            problems.push("class_count must be <= 255 (255 is the unlabeled sentinel)");
        }
        if self.position_encoding_levels > 24 || self.direction_encoding_levels > 24 {
            problems.push("encoding levels must be <= 24");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArchitecture(problems.join("; ")))
        }
    }

    pub fn position_input_dim(&self) -> usize {
        super::encoded_len(self.position_encoding_levels, true)
    }

    pub fn direction_input_dim(&self) -> usize {
        super::encoded_len(self.direction_encoding_levels, true)
    }

    pub fn color_width(&self) -> usize {
        (self.trunk_width / 2).max(1)
    }

    /// Dense layers in flat-parameter order.
    pub fn layers(&self) -> Vec<LayerShape> {
        let w = self.trunk_width;
        let mut dims = Vec::with_capacity(self.trunk_depth + 5);
        for i in 0..self.trunk_depth {
            let inputs = if i == 0 { self.position_input_dim() } else { w };
            dims.push((LayerKind::Trunk(i), inputs, w));
        }
        dims.push((LayerKind::Density, w, 1));
        dims.push((LayerKind::Semantic, w, self.class_count));
        dims.push((LayerKind::Feature, w, w));
        dims.push((
            LayerKind::ColorHidden,
            w + self.direction_input_dim(),
            self.color_width(),
        ));
        dims.push((LayerKind::ColorOut, self.color_width(), 3));

        let mut offset = 0;
        dims.into_iter()
            .map(|(kind, inputs, outputs)| {
                let layer = LayerShape {
                    kind,
                    inputs,
                    outputs,
                    offset,
                };
                offset += layer.len();
                layer
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(LayerShape::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_matches_hand_count() {
        // depth 4, width 64, L_pos 6 (39 inputs), L_dir 2 (15 inputs), 4 classes:
        //   trunk    39*64+64 + 3*(64*64+64)   = 2560 + 12480
        //   density  64+1                       = 65
        //   semantic 64*4+4                     = 260
        //   feature  64*64+64                   = 4160
        //   color    (64+15)*32+32              = 2560
        //   rgb      32*3+3                     = 99
        let arch = NetworkArchitecture {
            class_count: 4,
            ..Default::default()
        };
        assert_eq!(
            arch.parameter_count(),
            2560 + 12480 + 65 + 260 + 4160 + 2560 + 99
        );
    }

    #[test]
    fn layers_are_contiguous() {
        let arch = NetworkArchitecture::default();
        let layers = arch.layers();
        for pair in layers.windows(2) {
            assert_eq!(pair[0].offset + pair[0].len(), pair[1].offset);
        }
    }

    #[test]
    fn rejects_degenerate_shapes() {
        let bad = NetworkArchitecture {
            trunk_depth: 0,
            class_count: 1,
            ..Default::default()
        };
        let err = bad.validate().unwrap_err();
        let Error::InvalidArchitecture(msg) = err else {
            panic!()
        };
        assert!(msg.contains("trunk_depth") && msg.contains("class_count"));
    }
}
