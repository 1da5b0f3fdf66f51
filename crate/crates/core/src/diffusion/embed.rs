//! Sinusoidal step embedding.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Embed a step index into `d` dimensions with interleaved sine/cosine pairs:
/// pair `k` oscillates at wavelength `10000^(2k/d)`, so entry `2k` is
/// `sin(t / 10000^(2k/d))` and entry `2k+1` the matching cosine. `d` must be
/// even and at least 2.
pub fn time_embed<T: Scalar>(t: usize, d: usize) -> Result<Vec<T>> {
    if d < 2 || d % 2 != 0 {
        return Err(Error::invalid(
            "step embedding width",
            format!("{d} is not an even number >= 2"),
        ));
    }
    let t = T::from_usize(t).expect("step fits in scalar");
    let base = T::cast(10000.0);
    let d_scalar = T::from_usize(d).expect("width fits in scalar");
    let mut out = Vec::with_capacity(d);
    for k in 0..d / 2 {
        let exponent = T::from_usize(2 * k).expect("width fits in scalar") / d_scalar;
        let angle = t / base.powf(exponent);
        out.push(angle.sin());
        out.push(angle.cos());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_dimensional_embedding_of_step_one() {
        let e = time_embed::<f64>(1, 2).unwrap();
        assert_relative_eq!(e[0], 0.841471, epsilon = 1e-6);
        assert_relative_eq!(e[1], 0.540302, epsilon = 1e-6);
    }

    #[test]
    fn step_zero_alternates_zeros_and_ones() {
        let e = time_embed::<f64>(0, 8).unwrap();
        assert_eq!(e, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn distinct_steps_get_distinct_embeddings() {
        let a = time_embed::<f64>(3, 16).unwrap();
        let b = time_embed::<f64>(4, 16).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn odd_or_tiny_widths_are_rejected() {
        assert!(time_embed::<f64>(1, 3).is_err());
        assert!(time_embed::<f64>(1, 0).is_err());
    }
}
