//! Pure power-law display transfer (γ = 2.4) and 8-bit quantization.

pub const GAMMA: f64 = 2.4;

/// `clamp(x, 0, 1)^(1/γ)`.
pub fn srgb_encode(linear: f64) -> f64 {
    linear.clamp(0.0, 1.0).powf(1.0 / GAMMA)
}

/// `x^γ`; inputs below zero map to zero.
pub fn srgb_decode(encoded: f64) -> f64 {
    encoded.max(0.0).powf(GAMMA)
}

/// Encode and quantize to a byte.
pub fn to_ldr_byte(linear: f64) -> u8 {
    (srgb_encode(linear) * 255.0).round() as u8
}

pub fn byte_to_unit(b: u8) -> f64 {
    b as f64 / 255.0
}
