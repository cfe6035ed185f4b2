//! Collective spin operators in the `|j, m>` basis, ordered `m = j, j-1, ..., -j`.

use nalgebra::{ComplexField, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Spin length `j`, stored as the integer `2j` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SpinLength {
    twice_j: u32,
}

impl SpinLength {
    pub fn from_twice(twice_j: i64) -> Result<Self> {
        if twice_j < 1 || twice_j > u32::MAX as i64 {
            return Err(Error::InvalidSpin(twice_j));
        }
        Ok(Self { twice_j: twice_j as u32 })
    }

    /// Accepts integer or half-integer `j`.
    pub fn from_j(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::InvalidSpin(twice.round() as i64));
        }
        Self::from_twice(twice.round() as i64)
    }

    pub fn twice_j(self) -> u32 {
        self.twice_j
    }

    /// Hilbert-space dimension `2j + 1`.
    pub fn dim(self) -> usize {
        self.twice_j as usize + 1
    }

    pub fn j<T: Real>(self) -> T {
        T::lit(self.twice_j as f64 / 2.0)
    }

    pub fn as_f64(self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    /// Twice the magnetic quantum number of basis index `i` (`2m = 2j - 2i`).
    pub fn twice_m(self, i: usize) -> i64 {
        self.twice_j as i64 - 2 * i as i64
    }

    pub fn m<T: Real>(self, i: usize) -> T {
        T::lit(self.twice_m(i) as f64 / 2.0)
    }
}

impl TryFrom<f64> for SpinLength {
    type Error = Error;
    fn try_from(j: f64) -> Result<Self> {
        Self::from_j(j)
    }
}

impl From<SpinLength> for f64 {
    fn from(s: SpinLength) -> f64 {
        s.as_f64()
    }
}

impl std::fmt::Display for SpinLength {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice_j % 2 == 0 {
            write!(f, "{}", self.twice_j / 2)
        } else {
            write!(f, "{}/2", self.twice_j)
        }
    }
}

/// `J_z`, `J_+`, `J_-` and the identity for one spin length. Immutable.
#[derive(Debug, Clone)]
pub struct SpinOps<T: Real> {
    pub spin: SpinLength,
    pub jz: DMatrix<T>,
    pub jp: DMatrix<T>,
    pub jm: DMatrix<T>,
    pub id: DMatrix<T>,
}

impl<T: Real> SpinOps<T> {
    pub fn dim(&self) -> usize {
        self.spin.dim()
    }
}

pub fn build_spin_ops<T: Real>(spin: SpinLength) -> SpinOps<T> {
    let d = spin.dim();
    let j: T = spin.j();
    let jz = DMatrix::from_fn(d, d, |r, c| if r == c { spin.m::<T>(r) } else { T::zero() });
    // J+|m> = sqrt(j(j+1) - m(m+1)) |m+1>; |m+1> sits one index above |m>.
    let mut jp = DMatrix::zeros(d, d);
    for col in 1..d {
        let m: T = spin.m(col);
        jp[(col - 1, col)] = (j * (j + T::one()) - m * (m + T::one())).sqrt();
    }
    let jm = jp.transpose();
    SpinOps { spin, jz, jp, jm, id: DMatrix::identity(d, d) }
}

/// `AB - BA` for square matrices of equal size.
pub fn commutator<T: ComplexField>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "commutator of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a * b - b * a)
}
