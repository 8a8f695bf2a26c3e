//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All linear algebra is written against [`Real`], so the same code runs in
//! `f32` or `f64`. Statistical helpers that need special functions
//! (Clopper–Pearson, log-gamma) stay in `f64`.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point types usable as the scalar of a network model.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    const INFINITY: Self;
    const MACHINE_EPSILON: Self;

    /// Converts an `f64` literal. Panics only for values the type cannot hold,
    /// which does not happen for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn is_infinite_val(self) -> bool {
        self.as_f64().is_infinite()
    }
}

macro_rules! impl_real {
    ($f:ty) => {
        impl Real for $f {
            const INFINITY: Self = <$f>::INFINITY;
            const MACHINE_EPSILON: Self = <$f>::EPSILON;
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Shorthand for the complex type over a [`Real`] scalar.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

/// Unit phasor `e^{jθ}`.
#[inline]
pub(crate) fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

#[inline]
pub fn deg_to_rad<T: Real>(deg: T) -> T {
    deg * T::pi() / T::lit(180.0)
}

/// Modulus without going through `num_traits::Float`.
#[inline]
pub(crate) fn cabs<T: Real>(z: Complex<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}
