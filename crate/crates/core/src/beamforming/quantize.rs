use num_complex::Complex64;

use super::{CMatrix, Quantization, SampleBlock};

/// Uniform midrise quantizer over [−full_scale, +full_scale).
///
/// `bits` bits give 2^bits levels at odd multiples of half a step, so zero
/// is a decision threshold and never an output. Inputs outside the range
/// map to the nearest end code and count as saturated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    bits: u32,
    full_scale: f64,
}

impl Quantizer {
    /// Panics unless `bits` is in 1..=52 and `full_scale` is positive and
    /// finite.
    pub fn new(bits: u32, full_scale: f64) -> Self {
        assert!((1..=52).contains(&bits), "quantizer bits must be in 1..=52");
        assert!(
            full_scale.is_finite() && full_scale > 0.0,
            "full scale must be positive"
        );
        Self { bits, full_scale }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn full_scale(&self) -> f64 {
        self.full_scale
    }

    pub fn step(&self) -> f64 {
        2.0 * self.full_scale / (1u64 << self.bits) as f64
    }

    /// Returns the reconstruction level and whether the input was clipped.
    pub fn quantize_real(&self, x: f64) -> (f64, bool) {
        let step = self.step();
        let top = ((1u64 << (self.bits - 1)) - 1) as f64;
        let bottom = -((1u64 << (self.bits - 1)) as f64);
        let code = (x / step).floor();
        let clipped = code.clamp(bottom, top);
        ((clipped + 0.5) * step, clipped != code)
    }

    pub fn quantize_complex(&self, z: Complex64, saturations: &mut u64) -> Complex64 {
        let (re, sr) = self.quantize_real(z.re);
        let (im, si) = self.quantize_real(z.im);
        *saturations += sr as u64 + si as u64;
        Complex64::new(re, im)
    }

    pub fn quantize_matrix(&self, m: &CMatrix, saturations: &mut u64) -> CMatrix {
        m.map(|z| self.quantize_complex(z, saturations))
    }
}

/// Quantizes I and Q of every sample independently. Returns the tagged block
/// and the number of clipped components.
pub fn quantize(block: &SampleBlock, bits: u32, full_scale: f64) -> (SampleBlock, u64) {
    let q = Quantizer::new(bits, full_scale);
    let mut saturations = 0;
    let subcarriers = block
        .subcarriers()
        .iter()
        .map(|m| q.quantize_matrix(m, &mut saturations))
        .collect();
    let out = SampleBlock::new(block.domain(), subcarriers)
        .expect("shape preserved")
        .with_quantization(Quantization::Quantized(bits));
    (out, saturations)
}
