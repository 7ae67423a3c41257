//! Shared kernels: second-order grid differencing, divergence, trapezoidal quadrature,
//! classical RK4, the SO(3) exponential and pairwise summation.
//!
//! Every derivative taken on a grid uses the same scheme: central differences at
//! interior nodes and a second-order one-sided formula at the two ends of each axis.
//!
//! The one-sided formula is the four-point stencil `(−4f₀ + 7f₁ − 4f₂ + f₃)/2h`, whose
//! leading error `h²f'''/6` is the same as the central formula's. The truncation error
//! of a differenced field is therefore smooth across the boundary layer, and differencing
//! it a second time (the divergence of a momentum built from prolonged velocities, say)
//! stays O(h²) up to the boundary. The textbook three-point stencil has error `−h²f'''/3`
//! there, and the jump costs an order in nested derivatives. Axes with exactly three
//! nodes fall back to that three-point stencil.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DVector, Matrix3, Vector3};

use crate::jet::ParameterGrid;
use crate::{Error, Real, Result};

/// Finite-difference scheme descriptor. Only the second-order scheme exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FdScheme;

impl FdScheme {
    pub const ORDER: usize = 2;
}

/// Anything that can be differenced on a grid: scalars, vectors, matrices.
pub trait FieldValue<T>:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self>
{
}

impl<T, V> FieldValue<T> for V where
    V: Clone + Add<Output = V> + Sub<Output = V> + Mul<T, Output = V>
{
}

/// Second-order partial derivative of a grid field along `axis`.
pub fn grid_partial<T: Real, V: FieldValue<T>>(
    field: &[V],
    axis: usize,
    grid: &ParameterGrid<T>,
) -> Result<Vec<V>> {
    if field.len() != grid.node_count() {
        return Err(Error::dimension(
            "grid_partial field",
            grid.node_count(),
            field.len(),
        ));
    }
    if axis >= grid.dim() {
        return Err(Error::dimension("grid_partial axis", grid.dim(), axis));
    }
    let n = grid.samples()[axis];
    if n < 3 {
        return Err(Error::TooFewNodes { axis, nodes: n });
    }
    let stride = grid.stride(axis);
    let inv_2h = (T::two() * grid.spacing()[axis]).recip();
    let three = T::lit(3.0);
    let four = T::lit(4.0);

    let seven = T::lit(7.0);

    let out = (0..field.len())
        .map(|node| {
            let k = (node / stride) % n;
            let at = |offset: isize| field[(node as isize + offset * stride as isize) as usize].clone();
            if n == 3 && k == 0 {
                (at(1) * four - at(0) * three - at(2)) * inv_2h
            } else if n == 3 && k == 2 {
                (at(0) * three - at(-1) * four + at(-2)) * inv_2h
            } else if k == 0 {
                (at(1) * seven - at(0) * four - at(2) * four + at(3)) * inv_2h
            } else if k == n - 1 {
                (at(0) * four - at(-1) * seven + at(-2) * four - at(-3)) * inv_2h
            } else {
                (at(1) - at(-1)) * inv_2h
            }
        })
        .collect();
    Ok(out)
}

/// Flat-space divergence `Σ_i ∂v^i/∂a^i` of a grid vector field.
pub fn grid_divergence<T: Real>(
    vfield: &[DVector<T>],
    grid: &ParameterGrid<T>,
) -> Result<Vec<T>> {
    let p = grid.dim();
    if let Some(bad) = vfield.iter().find(|v| v.len() != p) {
        return Err(Error::dimension("grid_divergence component count", p, bad.len()));
    }
    let mut div = vec![T::zero(); grid.node_count()];
    for axis in 0..p {
        let component: Vec<T> = vfield.iter().map(|v| v[axis]).collect();
        let d = grid_partial(&component, axis, grid)?;
        for (acc, di) in div.iter_mut().zip(d) {
            *acc += di;
        }
    }
    Ok(div)
}

/// One classical fourth-order Runge–Kutta step of `y' = f(t, y)`.
pub fn rk4_step<T, F>(mut f: F, state: &DVector<T>, t: T, h: T) -> Result<DVector<T>>
where
    T: Real,
    F: FnMut(T, &DVector<T>) -> DVector<T>,
{
    if !(h > T::zero()) {
        return Err(Error::Contract(format!("rk4 step must be positive, got {h:e}")));
    }
    let half_h = h * T::half();
    let k1 = f(t, state);
    let k2 = f(t + half_h, &(state + &k1 * half_h));
    let k3 = f(t + half_h, &(state + &k2 * half_h));
    let k4 = f(t + h, &(state + &k3 * h));
    let next = state + (k1 + (k2 + k3) * T::two() + k4) * (h / T::lit(6.0));
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NonFinite { time: (t + h).as_f64() })
    }
}

/// Below this rotation angle `so3_exp` switches to the two-term Taylor form.
pub const SO3_SMALL_ANGLE: f64 = 1e-6;

/// Rodrigues' formula for `exp(hat(w))`.
pub fn so3_exp<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    let theta = w.norm();
    let hat = crate::rigidbody::hat(w);
    let hat2 = hat * hat;
    if theta < T::lit(SO3_SMALL_ANGLE) {
        Matrix3::identity() + hat + hat2 * T::half()
    } else {
        let a = theta.sin() / theta;
        let b = (T::one() - theta.cos()) / (theta * theta);
        Matrix3::identity() + hat * a + hat2 * b
    }
}

/// Pairwise (cascade) summation; the result does not depend on how a caller chunks work.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        values.iter().fold(T::zero(), |acc, &v| acc + v)
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Tensor-product trapezoidal rule over the grid.
pub fn trapezoid<T: Real>(values: &[T], grid: &ParameterGrid<T>) -> Result<T> {
    if values.len() != grid.node_count() {
        return Err(Error::dimension("trapezoid values", grid.node_count(), values.len()));
    }
    let weighted: Vec<T> = values
        .iter()
        .enumerate()
        .map(|(node, &v)| v * grid.trapezoid_weight(node))
        .collect();
    Ok(pairwise_sum(&weighted))
}

pub fn max_abs<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Outcome of comparing a residual between two refinement levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvergenceRatio {
    /// coarse / fine.
    Measured(f64),
    /// Both residuals sit at or below the noise floor, so no ratio is meaningful.
    AtFloor,
}

impl ConvergenceRatio {
    pub fn between(coarse: f64, fine: f64, floor: f64) -> Self {
        if coarse <= floor && fine <= floor {
            ConvergenceRatio::AtFloor
        } else if fine == 0.0 {
            ConvergenceRatio::Measured(f64::INFINITY)
        } else {
            ConvergenceRatio::Measured(coarse / fine)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            ConvergenceRatio::Measured(r) => Some(r),
            ConvergenceRatio::AtFloor => None,
        }
    }
}
