//! Hidden-unit activations: tanh, relu, and the discretized-output tanh
//! units (SUDO) with their rectified variant (R-SUDO).
//!
//! A SUDO unit with `L` levels bins `u = tanh(x)` into `L` equal-width bins
//! of the interval `[-1, 1]` and emits one of the `L` evenly spaced values
//! `-1 + j * 2/(L-1)`. Its backward pass ignores the binning and returns the
//! tanh derivative `1 - tanh²(x)`. R-SUDO emits `0` (with zero derivative)
//! whenever `u <= 0` and behaves like SUDO otherwise.
//!
//! Bin edges sit at `u = 2k/L - 1`; an input landing exactly on an edge goes
//! to the lower level. The bin index is clamped to `[1, L]`, so a saturated
//! `tanh(x) == -1` still maps to `-1` rather than to a spurious extra level.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Number of output levels of a discretized unit; always at least 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Levels(u32);

impl Levels {
    pub fn new(levels: u32) -> Result<Self> {
        if levels < 2 {
            return Err(Error::config(format!("levels must be >= 2 (L >= 2), got {levels}")));
        }
        Ok(Self(levels))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// Spacing between adjacent output values, `2/(L-1)`.
    pub fn activation_step<T: Real>(self) -> T {
        T::lit(2.0) / T::lit(f64::from(self.0 - 1))
    }

    /// Bin width in tanh-output space, `2/L`.
    pub fn plateau_range<T: Real>(self) -> T {
        T::lit(2.0) / T::lit(f64::from(self.0))
    }

    /// The `L` values a SUDO unit can emit, ascending.
    pub fn output_values<T: Real>(self) -> Vec<T> {
        let step = self.activation_step::<T>();
        (0..self.0).map(|j| -T::one() + T::lit(f64::from(j)) * step).collect()
    }

    /// Input-space plateau boundaries `atanh(2k/L - 1)`, `k = 1..L-1`.
    pub fn input_boundaries(self) -> Vec<f64> {
        let l = f64::from(self.0);
        (1..self.0).map(|k| (2.0 * f64::from(k) / l - 1.0).atanh()).collect()
    }
}

impl fmt::Display for Levels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Tanh,
    Relu,
    Sudo(Levels),
    RSudo(Levels),
}

impl ActivationKind {
    pub fn sudo(levels: u32) -> Result<Self> {
        Levels::new(levels).map(Self::Sudo)
    }

    pub fn rsudo(levels: u32) -> Result<Self> {
        Levels::new(levels).map(Self::RSudo)
    }

    pub fn levels(self) -> Option<Levels> {
        match self {
            Self::Sudo(l) | Self::RSudo(l) => Some(l),
            Self::Tanh | Self::Relu => None,
        }
    }

    /// Family name without the level count, as used on the command line.
    pub fn family(self) -> &'static str {
        match self {
            Self::Tanh => "tanh",
            Self::Relu => "relu",
            Self::Sudo(_) => "sudo",
            Self::RSudo(_) => "r-sudo",
        }
    }

    /// Builds a kind from a family name and optional level count.
    pub fn from_parts(family: &str, levels: Option<u32>) -> Result<Self> {
        match (family, levels) {
            ("tanh", _) => Ok(Self::Tanh),
            ("relu", _) => Ok(Self::Relu),
            ("sudo", Some(l)) => Self::sudo(l),
            ("r-sudo" | "rsudo", Some(l)) => Self::rsudo(l),
            ("sudo" | "r-sudo" | "rsudo", None) => {
                Err(Error::config(format!("activation {family} requires a level count")))
            }
            _ => Err(Error::config(format!("unknown activation {family:?}"))),
        }
    }

    #[inline]
    pub fn forward<T: Real>(self, x: T) -> Result<T> {
        check_finite(x, "activation forward")?;
        Ok(match self {
            Self::Tanh => x.tanh(),
            Self::Relu => relu(x),
            Self::Sudo(l) => quantize(x.tanh(), l),
            Self::RSudo(l) => rectified_quantize(x.tanh(), l),
        })
    }

    /// Derivative used during backpropagation, evaluated at the
    /// pre-activation `x`.
    #[inline]
    pub fn backward<T: Real>(self, x: T) -> Result<T> {
        check_finite(x, "activation backward")?;
        Ok(match self {
            Self::Tanh | Self::Sudo(_) => tanh_prime(x),
            Self::Relu => relu_prime(x),
            Self::RSudo(_) => {
                let u = x.tanh();
                if u <= T::zero() {
                    T::zero()
                } else {
                    T::one() - u * u
                }
            }
        })
    }
}

impl ActivationKind {
    /// `(forward(x), backward(x))` with a single tanh evaluation. Bitwise
    /// equal to calling the two separately.
    #[inline]
    pub fn forward_with_derivative<T: Real>(self, x: T) -> Result<(T, T)> {
        check_finite(x, "activation forward")?;
        Ok(match self {
            Self::Relu => (relu(x), relu_prime(x)),
            Self::Tanh => {
                let u = x.tanh();
                (u, T::one() - u * u)
            }
            Self::Sudo(l) => {
                let u = x.tanh();
                (quantize(u, l), T::one() - u * u)
            }
            Self::RSudo(l) => {
                let u = x.tanh();
                if u <= T::zero() {
                    (T::zero(), T::zero())
                } else {
                    (quantize(u, l), T::one() - u * u)
                }
            }
        })
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.levels() {
            Some(l) => write!(f, "{}-{}", self.family(), l),
            None => f.write_str(self.family()),
        }
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    /// Parses `tanh`, `relu`, `sudo-<L>` or `r-sudo-<L>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.rsplit_once('-') {
            Some((family, digits)) if digits.chars().all(|c| c.is_ascii_digit()) && !digits.is_empty() => {
                let l = digits.parse().map_err(|_| Error::config(format!("bad level count in {s:?}")))?;
                Self::from_parts(family, Some(l))
            }
            _ => Self::from_parts(&s, None),
        }
    }
}

#[inline]
fn check_finite<T: Real>(x: T, op: &'static str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { op, value: x.as_f64() })
    }
}

/// Maps `u` in `[-1, 1]` onto the nearest-lower of the `L` output levels.
#[inline]
fn quantize<T: Real>(u: T, levels: Levels) -> T {
    let l = T::lit(f64::from(levels.get()));
    let bin = ((u + T::one()) / levels.plateau_range::<T>()).ceil().max(T::one()).min(l);
    -T::one() + (bin - T::one()) * levels.activation_step::<T>()
}

#[inline]
fn rectified_quantize<T: Real>(u: T, levels: Levels) -> T {
    if u <= T::zero() {
        T::zero()
    } else {
        quantize(u, levels)
    }
}

#[inline]
fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

#[inline]
fn relu_prime<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

#[inline]
fn tanh_prime<T: Real>(x: T) -> T {
    let t = x.tanh();
    T::one() - t * t
}

pub fn sudo_forward<T: Real>(x: T, levels: u32) -> Result<T> {
    ActivationKind::sudo(levels)?.forward(x)
}

/// Straight-through derivative: `1 - tanh²(x)` regardless of `levels`.
pub fn sudo_backward<T: Real>(x: T, levels: u32) -> Result<T> {
    ActivationKind::sudo(levels)?.backward(x)
}

pub fn rsudo_forward<T: Real>(x: T, levels: u32) -> Result<T> {
    ActivationKind::rsudo(levels)?.forward(x)
}

pub fn rsudo_backward<T: Real>(x: T, levels: u32) -> Result<T> {
    ActivationKind::rsudo(levels)?.backward(x)
}

pub fn tanh_forward<T: Real>(x: T) -> Result<T> {
    ActivationKind::Tanh.forward(x)
}

pub fn tanh_backward<T: Real>(x: T) -> Result<T> {
    ActivationKind::Tanh.backward(x)
}

pub fn relu_forward<T: Real>(x: T) -> Result<T> {
    ActivationKind::Relu.forward(x)
}

/// Subgradient convention: `0` at `x == 0`.
pub fn relu_backward<T: Real>(x: T) -> Result<T> {
    ActivationKind::Relu.backward(x)
}

pub fn apply_forward<T: Real>(kind: ActivationKind, m: &Matrix<T>) -> Result<Matrix<T>> {
    m.try_map(|x| kind.forward(x))
}

/// Elementwise forward outputs and derivatives in one pass.
pub fn apply_forward_with_derivative<T: Real>(kind: ActivationKind, m: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let mut out = Vec::with_capacity(m.as_slice().len());
    let mut der = Vec::with_capacity(m.as_slice().len());
    for &x in m.as_slice() {
        let (y, d) = kind.forward_with_derivative(x)?;
        out.push(y);
        der.push(d);
    }
    Ok((Matrix::new(m.rows(), m.cols(), out)?, Matrix::new(m.rows(), m.cols(), der)?))
}

/// Elementwise backward derivative evaluated at the pre-activations.
pub fn apply_backward<T: Real>(kind: ActivationKind, preactivation: &Matrix<T>) -> Result<Matrix<T>> {
    preactivation.try_map(|x| kind.backward(x))
}
