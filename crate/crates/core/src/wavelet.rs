//! B-spline father wavelets of orders 0-2: evaluation, L2 normalization,
//! dyadic dilation/translation, and the two-scale refinement masks that let a
//! parent function be replaced exactly by copies of itself at the next scale.

use crate::error::{Error, Result};

/// Highest spline order with an implemented closed form.
pub const MAX_ORDER: u32 = 2;

/// Scales above this would overflow the `2^j` dilation factor.
pub const MAX_SCALE: u32 = 40;

/// Largest f64 strictly below 1.0. The order-0 spline is an indicator on the
/// half-open interval [0, 1), so callers that need the top tile of a dyadic
/// partition to cover the domain boundary clamp inputs to this value.
pub const ONE_BELOW: f64 = f64::from_bits(0x3FEF_FFFF_FFFF_FFFF);

// Unit-L2 normalization factors 1/sqrt(int phi^2). The integrals are 1, 2/3
// and 11/20 for orders 0-2; the quadrature oracle in the tests re-derives
// them.
fn norm_factor(order: u32) -> f64 {
    match order {
        0 => 1.0,
        1 => 1.5_f64,
        2 => 20.0 / 11.0,
        _ => unreachable!("order validated on construction"),
    }
    .sqrt()
}

fn raw(order: u32, x: f64) -> f64 {
    match order {
        0 => {
            if (0.0..1.0).contains(&x) {
                1.0
            } else {
                0.0
            }
        }
        1 => {
            if !(0.0..=2.0).contains(&x) {
                0.0
            } else if x <= 1.0 {
                x
            } else {
                2.0 - x
            }
        }
        2 => {
            if !(0.0..=3.0).contains(&x) {
                0.0
            } else if x <= 1.0 {
                0.5 * x * x
            } else if x <= 2.0 {
                0.75 - (x - 1.5) * (x - 1.5)
            } else {
                // Final piece is the mirror image of the first; a cubic here
                // would break continuity and the refinement identity.
                0.5 * (3.0 - x) * (3.0 - x)
            }
        }
        _ => unreachable!("order validated on construction"),
    }
}

/// Evaluates the unnormalized B-spline of the given order at `x`.
///
/// The support is `[0, order + 1]`; order 0 is the unit indicator (half-open
/// on the right so that translated copies at one scale tile the line).
pub fn eval_bspline_raw(order: u32, x: f64) -> Result<f64> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    Ok(raw(order, x))
}

/// Returns the constant `v` such that `v * phi_raw` has unit L2 norm.
pub fn normalization_constant(order: u32) -> Result<f64> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    Ok(norm_factor(order))
}

/// One dilated and translated B-spline in a single state dimension.
///
/// Identity is the tuple `(order, scale, translation, dim)`; atoms are
/// immutable value objects so structurally identical features can be
/// deduplicated after splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WaveletAtom {
    pub order: u32,
    pub scale: u32,
    pub translation: i64,
    pub dim: usize,
}

impl WaveletAtom {
    pub fn new(order: u32, scale: u32, translation: i64, dim: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::UnsupportedOrder(order));
        }
        if scale > MAX_SCALE {
            return Err(Error::ScaleTooLarge(scale));
        }
        Ok(Self { order, scale, translation, dim })
    }

    /// Dilation factor `2^scale`, exact in f64 for all permitted scales.
    #[inline]
    pub fn dilation(&self) -> f64 {
        (1u64 << self.scale) as f64
    }

    /// Value of the atom at coordinate `x` of its dimension:
    /// `2^(j/2) * v_n * phi_raw(2^j x - k)`. The `2^(j/2)` factor keeps the
    /// L2 norm at 1 across scales.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let m = self.dilation();
        let t = m * x - self.translation as f64;
        if !(0.0..=(self.order as f64 + 1.0)).contains(&t) {
            return 0.0;
        }
        m.sqrt() * norm_factor(self.order) * raw(self.order, t)
    }

    /// Support interval `[k/2^j, (k + n + 1)/2^j]`.
    pub fn support(&self) -> (f64, f64) {
        let m = self.dilation();
        (
            self.translation as f64 / m,
            (self.translation + self.order as i64 + 1) as f64 / m,
        )
    }

    /// Length of the support intersected with [0, 1].
    pub fn support_length_clipped(&self) -> f64 {
        let (lo, hi) = self.support();
        (hi.min(1.0) - lo.max(0.0)).max(0.0)
    }

    /// The `n + 2` children at the next scale whose mask-weighted sum
    /// reproduces this atom.
    pub fn children(&self) -> Vec<WaveletAtom> {
        (0..=self.order as i64 + 1)
            .map(|t| WaveletAtom {
                order: self.order,
                scale: self.scale + 1,
                translation: 2 * self.translation + t,
                dim: self.dim,
            })
            .collect()
    }
}

/// Coefficients of the two-scale relation for normalized atoms: a parent at
/// scale `j` equals the coefficient-weighted sum of its children at `j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementMask {
    pub order: u32,
    /// Dilation factor of the relation; dyadic refinement only.
    pub dilation: u32,
    pub coeffs: Vec<f64>,
}

/// Mask for normalized atoms: `c_t = 2^(-n - 1/2) * binomial(n + 1, t)`,
/// `t = 0..=n+1`.
pub fn refinement_mask(order: u32) -> Result<RefinementMask> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    let binomials: &[f64] = match order {
        0 => &[1.0, 1.0],
        1 => &[1.0, 2.0, 1.0],
        _ => &[1.0, 3.0, 3.0, 1.0],
    };
    let factor = 0.5_f64.powi(order as i32) / 2.0_f64.sqrt();
    Ok(RefinementMask {
        order,
        dilation: 2,
        coeffs: binomials.iter().map(|b| b * factor).collect(),
    })
}
