//! Local Lagrange interpolation on equispaced nodes.
//!
//! A point at fractional grid coordinate ξ is supported by `order`
//! consecutive nodes starting at `support_base(ξ, order)`. The weights
//! are the Lagrange basis polynomials of degree `order − 1` evaluated at
//! the offset from that base node; they sum to 1 identically.

/// First node of the support window. For the default cubic case
/// (order 4) this is ⌊ξ⌋ − 1, so the point lies between the two middle
/// nodes of the window.
#[inline]
pub fn support_base(xi: f64, order: usize) -> i64 {
    xi.floor() as i64 - (order as i64 / 2 - 1)
}

/// Lagrange weights at offset `u` from the base node, `u` in
/// [order/2 − 1, order/2) for interior points. `out` must hold `order`
/// values.
#[inline]
pub fn lagrange_weights(u: f64, order: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), order);
    for k in 0..order {
        let mut num = 1.0;
        let mut den = 1.0;
        for m in 0..order {
            if m != k {
                num *= u - m as f64;
                den *= (k as f64) - (m as f64);
            }
        }
        out[k] = num / den;
    }
}
