//! Reflection model of the intelligent surface.
//!
//! Each element applies `A(theta) e^{j theta}` where the amplitude depends on
//! the selected phase. Phases come from a `2^b`-point codebook and are stored
//! as codebook indices.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::ComplexMatrix;

/// Largest supported phase resolution in bits.
pub const MAX_RESOLUTION_BITS: u32 = 12;

/// Phase used by every element when the resolution is zero bits.
pub const FIXED_PHASE: f64 = PI;

/// Phase-dependent amplitude parameters shared by every element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeModel {
    pub a_min: f64,
    pub zeta: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrsModelParams {
    pub a_min: f64,
    pub zeta: f64,
    pub nu: f64,
    pub element_count: usize,
    pub resolution_bits: u32,
}

impl IrsModelParams {
    pub fn new(model: AmplitudeModel, element_count: usize, resolution_bits: u32) -> Result<Self> {
        let params = Self {
            a_min: model.a_min,
            zeta: model.zeta,
            nu: model.nu,
            element_count,
            resolution_bits,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.a_min) {
            return Err(invalid(format!("a_min = {} outside [0, 1]", self.a_min)));
        }
        if !(self.zeta.is_finite() && self.zeta >= 0.0) {
            return Err(invalid("zeta must be nonnegative"));
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(invalid("nu must be nonnegative"));
        }
        if self.element_count == 0 {
            return Err(invalid("surface needs at least one element"));
        }
        if self.resolution_bits > MAX_RESOLUTION_BITS {
            return Err(invalid(format!(
                "resolution of {} bits exceeds {MAX_RESOLUTION_BITS}",
                self.resolution_bits
            )));
        }
        Ok(())
    }

    /// Number of selectable phases; one when the resolution is zero bits.
    pub fn phase_count(&self) -> usize {
        1usize << self.resolution_bits
    }

    /// Selectable phases in index order. Zero bits maps to the single fixed
    /// phase `pi`.
    pub fn phases(&self) -> Vec<f64> {
        if self.resolution_bits == 0 {
            vec![FIXED_PHASE]
        } else {
            codebook_unchecked(self.resolution_bits)
        }
    }

    /// Reflection coefficient `A(theta) e^{j theta}` for every codebook index.
    pub fn coefficient_table(&self) -> Vec<Complex64> {
        self.phases()
            .into_iter()
            .map(|theta| Complex64::from_polar(amplitude(theta, self), theta))
            .collect()
    }
}

fn codebook_unchecked(bits: u32) -> Vec<f64> {
    let count = 1usize << bits;
    (0..count)
        .map(|k| 2.0 * PI * k as f64 / count as f64)
        .collect()
}

/// `2^bits` equally spaced phases starting at zero.
pub fn codebook(resolution_bits: u32) -> Result<Vec<f64>> {
    if resolution_bits == 0 {
        return Err(invalid(
            "a zero-bit surface has no codebook; it uses the fixed phase configuration",
        ));
    }
    if resolution_bits > MAX_RESOLUTION_BITS {
        return Err(invalid("phase resolution too large"));
    }
    Ok(codebook_unchecked(resolution_bits))
}

/// Element amplitude `(1 - a_min) ((sin(theta - zeta) + 1) / 2)^nu + a_min`.
pub fn amplitude(theta: f64, params: &IrsModelParams) -> f64 {
    let base = ((theta - params.zeta).sin() + 1.0) / 2.0;
    (1.0 - params.a_min) * base.clamp(0.0, 1.0).powf(params.nu) + params.a_min
}

/// Codebook indices of every element for one stage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IrsConfiguration {
    pub phase_indices: Vec<u16>,
}

impl IrsConfiguration {
    /// Every element at codebook index `index`.
    pub fn uniform(element_count: usize, index: u16) -> Self {
        Self {
            phase_indices: vec![index; element_count],
        }
    }

    /// Uniformly random indices from the codebook of `params`.
    pub fn random<R: Rng + ?Sized>(params: &IrsModelParams, rng: &mut R) -> Self {
        let count = params.phase_count();
        Self {
            phase_indices: (0..params.element_count)
                .map(|_| rng.random_range(0..count) as u16)
                .collect(),
        }
    }

    pub fn validate(&self, params: &IrsModelParams) -> Result<()> {
        if self.phase_indices.len() != params.element_count {
            return Err(invalid(format!(
                "configuration has {} entries for a {}-element surface",
                self.phase_indices.len(),
                params.element_count
            )));
        }
        let count = params.phase_count();
        if let Some(bad) = self.phase_indices.iter().find(|&&i| i as usize >= count) {
            return Err(invalid(format!("phase index {bad} outside codebook of size {count}")));
        }
        Ok(())
    }
}

/// Diagonal of the reflection matrix.
pub fn reflection_coefficients(config: &IrsConfiguration, params: &IrsModelParams) -> Result<Vec<Complex64>> {
    config.validate(params)?;
    let table = params.coefficient_table();
    Ok(config
        .phase_indices
        .iter()
        .map(|&i| table[i as usize])
        .collect())
}

/// Diagonal `N_I x N_I` reflection matrix of a configuration.
pub fn reflection_matrix(config: &IrsConfiguration, params: &IrsModelParams) -> Result<ComplexMatrix> {
    let diag = reflection_coefficients(config, params)?;
    Ok(ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
}

/// Reflection matrix of a switched-off surface.
pub fn irs_off(element_count: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(element_count, element_count)
}
