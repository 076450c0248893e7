//! Faddeeva function `w(z) = e^{−z²} erfc(−iz)` in the upper half plane.
//!
//! Humlíček's four-region rational approximation ("W4"); relative accuracy is
//! about 10⁻⁴ everywhere with `Im z ≥ 0`, which is plenty for cavity spectra.

use num_complex::Complex64;

pub fn faddeeva(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    debug_assert!(y >= 0.0, "faddeeva: W4 is only valid for Im z >= 0");
    let t = Complex64::new(y, -x);
    let s = x.abs() + y;

    if s >= 15.0 {
        // region I
        return t * 0.564_189_6 / (t * t + 0.5);
    }
    if s >= 5.5 {
        // region II
        let u = t * t;
        return t * (u * 0.564_189_6 + 1.410_474) / (u * (u + 3.0) + 0.75);
    }
    if y >= 0.195 * x.abs() - 0.176 {
        // region III
        let num = t * (t * (t * (t * 0.564_223_6 + 3.778_987) + 11.964_82) + 20.209_33) + 16.495_5;
        let den = t * (t * (t * (t * (t + 6.699_398) + 21.692_74) + 39.271_21) + 38.823_63) + 16.495_5;
        return num / den;
    }
    // region IV
    let u = t * t;
    let num = t
        * (36_183.31
            - u * (3_321.990_5
                - u * (1_540.787
                    - u * (219.031_3 - u * (35.766_83 - u * (1.320_522 - u * 0.564_19))))));
    let den = 32_066.6
        - u * (24_322.84
            - u * (9_022.228
                - u * (2_186.181
                    - u * (364.219_1 - u * (61.570_37 - u * (1.841_439 - u))))));
    u.exp() - num / den
}
