//! Shared JSON encoding helpers: complex numbers travel as `[re, im]` pairs.

use num_complex::Complex64;

pub(crate) fn c_out(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub(crate) fn c_in(pair: [f64; 2]) -> Result<Complex64, String> {
    if !pair[0].is_finite() || !pair[1].is_finite() {
        return Err("non-finite complex component".into());
    }
    Ok(Complex64::new(pair[0], pair[1]))
}
