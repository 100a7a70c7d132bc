use alloc::vec::Vec;

use rand::Rng as _;

#[allow(unused_imports)]
use num_traits::Float;

use super::arch::{LayerKind, LayerShape, NetworkArchitecture};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::seed::{stream, Purpose};

/// Flat parameter vector with a layer table for a given architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<F> {
    arch: NetworkArchitecture,
    layers: Vec<LayerShape>,
    values: Vec<F>,
}

/// Scaled-uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn init_params<F: Real>(arch: NetworkArchitecture, seed: u64) -> Result<ParameterSet<F>> {
    arch.validate()?;
    let layers = arch.layers();
    let mut values = alloc::vec![F::zero(); arch.parameter_count()];
    let mut rng = stream(seed, Purpose::Init, 0);
    for layer in &layers {
        let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
        for w in &mut values[layer.offset..layer.bias_offset()] {
            *w = F::lit(rng.gen_range(-limit..limit));
        }
    }
    Ok(ParameterSet {
        arch,
        layers,
        values,
    })
}

impl<F: Real> ParameterSet<F> {
    pub fn from_values(arch: NetworkArchitecture, values: Vec<F>) -> Result<Self> {
        arch.validate()?;
        let expected = arch.parameter_count();
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                what: "parameter vector",
                expected,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self {
            arch,
            layers: arch.layers(),
            values,
        })
    }

    pub fn architecture(&self) -> &NetworkArchitecture {
        &self.arch
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn layer(&self, kind: LayerKind) -> LayerShape {
        *self
            .layers
            .iter()
            .find(|l| l.kind == kind)
            .expect("architecture always has every layer kind")
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Same parameters in another precision.
    pub fn cast<G: Real>(&self) -> ParameterSet<G> {
        ParameterSet {
            arch: self.arch,
            layers: self.layers.clone(),
            values: self
                .values
                .iter()
                .map(|v| G::lit(v.to_f64_lossy()))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Vec<F> {
        alloc::vec![F::zero(); self.values.len()]
    }
}
