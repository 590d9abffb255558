//! Small deterministic test images used by the tests, the CLI and the demo.

use crate::grid::ScalarField;

/// 7 x 9 staircase field with values in multiples of 1/255.
///
/// Superlevel events: three components born at 243 (pixels (1,1), (5,3),
/// (5,5)); the right two merge at 241 and the lower part joins the upper at
/// 65. Two rings close loops at 198 and 26 whose interiors fill at 1.
pub fn staircase() -> ScalarField {
    const CELLS: &[(usize, usize, u8)] = &[
        // upper ring
        (1, 1, 243),
        (1, 2, 200),
        (1, 3, 200),
        (2, 1, 200),
        (2, 2, 1),
        (2, 3, 198),
        (3, 1, 200),
        (3, 2, 200),
        (3, 3, 200),
        // bridge
        (4, 2, 65),
        // lower ring
        (5, 1, 200),
        (5, 2, 200),
        (5, 3, 243),
        (6, 1, 200),
        (6, 2, 1),
        (6, 3, 26),
        (7, 1, 200),
        (7, 2, 200),
        (7, 3, 200),
        // side peak and its link
        (5, 4, 241),
        (5, 5, 243),
    ];
    let mut f = ScalarField::zeros(7, 9);
    for &(r, c, v) in CELLS {
        f.values_mut()[r * 7 + c] = f64::from(v) / 255.0;
    }
    f
}

/// Two Gaussian bumps (peaks about 0.9 and 0.85) on a 40 x 24 grid whose
/// saddle stays near 0.34, so the 0.5 superlevel set has two components.
/// A slight tilt keeps all values distinct.
pub fn two_blob() -> ScalarField {
    ScalarField::from_fn(40, 24, |r, c| {
        let bump = |cc: f64, amp: f64| {
            let (dr, dc) = (r as f64 - 12.0, c as f64 - cc);
            amp * (-(dr * dr + dc * dc) / 20.8).exp()
        };
        0.05 + bump(14.0, 0.85) + bump(26.0, 0.8) + 0.001 * (r as f64 + 0.37 * c as f64) / 30.0
    })
}

/// Two Gaussian bumps joined by a lower saddle. With a target of one
/// component, the single penalized pair dies at the saddle pixel on row 7
/// between the bumps.
pub fn single_saddle() -> ScalarField {
    ScalarField::from_fn(21, 15, |r, c| {
        let bump = |cr: f64, cc: f64, s2: f64| {
            let (dr, dc) = (r as f64 - cr, c as f64 - cc);
            (-(dr * dr + dc * dc) / s2).exp()
        };
        0.1 + 0.8 * bump(7.0, 5.0, 6.0) + 0.7 * bump(7.0, 15.0, 6.0) + 0.01 * (c as f64 / 20.0)
    })
}

/// Binary indicator field from a mask.
pub fn from_mask(width: usize, height: usize, mask: &[bool]) -> ScalarField {
    ScalarField::from_vec(width, height, mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
        .expect("mask length matches dimensions")
}
