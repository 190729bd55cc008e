//! Half-precision truncation of stored parameters.
//!
//! Every weight and bias is rounded to the nearest IEEE-754 binary16 value
//! (ties to even) and widened back to `f32`. Inference still runs in single
//! precision.

use thiserror::Error;

use super::{Model, Precision};

/// Largest finite binary16 value.
pub const BINARY16_MAX: f32 = 65504.0;

/// Magnitudes at or above this round to infinity under ties-to-even.
const OVERFLOW_THRESHOLD: f32 = 65520.0;

#[derive(Debug, Error, PartialEq)]
pub enum QuantizeError {
    #[error("layer {layer}: parameter {index} = {value} overflows binary16")]
    Overflow { layer: usize, index: usize, value: f32 },
}

/// Rounds `value` to the nearest binary16 value, returned as `f32`.
/// Returns `None` when the rounded value would be infinite or the input is
/// not finite.
pub fn round_to_binary16(value: f32) -> Option<f32> {
    if !value.is_finite() || value.abs() >= OVERFLOW_THRESHOLD {
        return None;
    }
    let magnitude = value.abs();
    // Spacing of binary16 values around `magnitude`: 2^-24 in the subnormal
    // range, 2^(e - 10) for a normal binade starting at 2^e.
    let quantum_exp = if magnitude < f32::powi(2.0, -14) {
        -24
    } else {
        let e = ((magnitude.to_bits() >> 23) & 0xff) as i32 - 127;
        e - 10
    };
    let quantum = f32::from_bits(((quantum_exp + 127) as u32) << 23);
    // Division and multiplication by a power of two are exact here.
    Some((value / quantum).round_ties_even() * quantum)
}

/// Returns the binary16-truncated twin of a model. Applying it to an
/// already truncated model changes nothing but is allowed.
pub fn quantize_model(model: &Model) -> Result<Model, QuantizeError> {
    let mut out = model.map_params(|layer, index, value| {
        round_to_binary16(value).ok_or(QuantizeError::Overflow { layer, index, value })
    })?;
    out.set_precision(Precision::TruncatedHalf);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use half::f16;
    use proptest::prelude::*;

    use super::*;
    use crate::model::Manifest;

    fn oracle(v: f32) -> f32 {
        f16::from_f32(v).to_f32()
    }

    #[test]
    fn known_values() {
        assert_eq!(round_to_binary16(0.5), Some(0.5));
        assert_eq!(round_to_binary16(0.1), Some(0.0999755859375));
        assert_eq!(round_to_binary16(-0.1), Some(-0.0999755859375));
        assert_eq!(round_to_binary16(65504.0), Some(65504.0));
        assert_eq!(round_to_binary16(65519.0), Some(65504.0));
        assert_eq!(round_to_binary16(65520.0), None);
        assert_eq!(round_to_binary16(70000.0), None);
        assert_eq!(round_to_binary16(f32::NAN), None);
        // smallest subnormal and the rounding just below half of it
        assert_eq!(round_to_binary16(5.960_464_5e-8), Some(5.960_464_5e-8));
        assert_eq!(round_to_binary16(2.0e-8), Some(0.0));
        assert!(round_to_binary16(-2.0e-8).unwrap().is_sign_negative());
    }

    #[test]
    fn matches_oracle_on_binade_edges() {
        for e in -30..16 {
            let base = f32::powi(2.0, e);
            for v in [base, base * 1.000_244_1, base * 1.000_488_3, base * 1.999_9, -base * 1.5] {
                if v.abs() < OVERFLOW_THRESHOLD {
                    assert_eq!(round_to_binary16(v).unwrap().to_bits(), oracle(v).to_bits(), "{v}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn agrees_with_oracle(bits in any::<u32>()) {
            let v = f32::from_bits(bits);
            prop_assume!(v.is_finite() && v.abs() < OVERFLOW_THRESHOLD);
            let ours = round_to_binary16(v).unwrap();
            prop_assert_eq!(ours.to_bits(), oracle(v).to_bits());
            prop_assert_eq!(round_to_binary16(ours), Some(ours));
        }
    }

    #[test]
    fn quantize_reports_overflow_layer() {
        let manifest: Manifest = serde_json::from_str(
            r#"{"layers": [{"kind": "dense", "inputs": 1, "outputs": 1}, {"kind": "dense", "inputs": 1, "outputs": 1}]}"#,
        )
        .unwrap();
        let model = Model::from_parts(manifest, &[1.0, 0.0, 70000.0, 0.0]).unwrap();
        assert_eq!(
            quantize_model(&model).unwrap_err(),
            QuantizeError::Overflow {
                layer: 1,
                index: 0,
                value: 70000.0
            }
        );
    }

    #[test]
    fn quantize_is_idempotent_on_models() {
        let manifest: Manifest =
            serde_json::from_str(r#"{"layers": [{"kind": "dense", "inputs": 3, "outputs": 2}]}"#).unwrap();
        let params = [0.1, -0.2, 0.3333, 1e-6, 123.456, -7.77, 0.5, 0.001];
        let model = Model::from_parts(manifest, &params).unwrap();
        let q = quantize_model(&model).unwrap();
        assert_eq!(q.precision(), Precision::TruncatedHalf);
        assert_eq!(q.params()[0], 0.0999755859375);
        assert_eq!(q.layer_widths(), model.layer_widths());
        assert_eq!(quantize_model(&q).unwrap(), q);
    }
}
