//! Closed-form size-two Jordan blocks.
//!
//! On a defective two-dimensional subspace `L = l0 I + N` with `N^2 = 0`, so
//! `(z - L)^{-1} = I/(z - l0) + N/(z - l0)^2`. Projected between a probe `<A|`
//! and a source `|B>` this gives `alpha/(z - l0) + beta/(z - l0)^2`, which on the
//! real-frequency axis `z = i w` is a Lorentzian plus a super-Lorentzian with a
//! shared center and width.
//!
//! Chain conventions: right vectors `L r0 = l0 r0`, `L r1 = l0 r1 + r0`; left
//! vectors biorthonormal to them, `<li|rj> = delta_ij`, so that
//! `I = |r0><l0| + |r1><l1|` and `N = |r0><l1|`. It follows that
//! `<l1| L = l0 <l1|` and `<l0| L = l0 <l0| + <l1|`.

use nalgebra::{ComplexField, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cx, re, Cx, Real};
use crate::spectral::SpectrumTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JordanBlockSystem<T: Real> {
    /// Defective eigenvalue `-gamma + i omega0`.
    pub lambda0: Cx<T>,
    /// `(<A|r0>, <A|r1>)`.
    pub a_overlaps: (Cx<T>, Cx<T>),
    /// `(<l0|B>, <l1|B>)`.
    pub b_overlaps: (Cx<T>, Cx<T>),
}

/// Model-B amplitudes of the real-frequency line shape, including the `1/pi`.
///
/// With `alpha = ar + i ai`, `beta = br + i bi`, `D = w - w0`:
///
/// ```text
/// pi S(w) = (gamma ar) / (D^2 + g^2) + br (g^2 - D^2) / (D^2 + g^2)^2
///         + ai D / (D^2 + g^2)       + 2 gamma bi D / (D^2 + g^2)^2
/// ```
///
/// `a = gamma ar / pi` and `b = br / pi`; the two odd (dispersive) terms vanish
/// for real overlaps and are reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineAmplitudes<T: Real> {
    pub a: T,
    pub b: T,
    pub dispersive_a: T,
    pub dispersive_b: T,
}

impl<T: Real> LineAmplitudes<T> {
    pub fn ep_weight(&self) -> T {
        let denom = self.a.abs() + self.b.abs();
        if denom == T::zero() {
            T::zero()
        } else {
            self.b.abs() / denom
        }
    }
}

impl<T: Real> JordanBlockSystem<T> {
    pub fn new(gamma: T, omega0: T, a_overlaps: (Cx<T>, Cx<T>), b_overlaps: (Cx<T>, Cx<T>)) -> Result<Self> {
        if !(gamma > T::zero()) {
            return Err(Error::InvalidParams(format!("gamma = {gamma} must be positive")));
        }
        Ok(Self { lambda0: cx(-gamma, omega0), a_overlaps, b_overlaps })
    }

    /// Real overlaps chosen so that `alpha = alpha_re`, `beta = beta_re`.
    pub fn with_real_weights(gamma: T, omega0: T, alpha: T, beta: T) -> Result<Self> {
        let one = re(T::one());
        let zero = re(T::zero());
        // alpha = A0 B0 + A1 B1, beta = A0 B1 with A = (1, 0), B = (alpha, beta)
        Self::new(gamma, omega0, (one, zero), (re(alpha), re(beta)))
    }

    pub fn gamma(&self) -> T {
        -self.lambda0.re
    }

    pub fn omega0(&self) -> T {
        self.lambda0.im
    }

    /// Matrix of the block in the chain basis `(r0, r1)`.
    pub fn generator(&self) -> Matrix2<Cx<T>> {
        Matrix2::new(self.lambda0, re(T::one()), re(T::zero()), self.lambda0)
    }

    /// Probe row and source column in the chain basis.
    pub fn probe_source(&self) -> (Vector2<Cx<T>>, Vector2<Cx<T>>) {
        (
            Vector2::new(self.a_overlaps.0, self.a_overlaps.1),
            Vector2::new(self.b_overlaps.0, self.b_overlaps.1),
        )
    }

    pub fn line_amplitudes(&self) -> LineAmplitudes<T> {
        let (alpha, beta) = alpha_beta(self);
        let pi = T::pi();
        let gamma = self.gamma();
        LineAmplitudes {
            a: gamma * alpha.re / pi,
            b: beta.re / pi,
            dispersive_a: alpha.im / pi,
            dispersive_b: T::lit(2.0) * gamma * beta.im / pi,
        }
    }

    pub fn spectrum_trace(&self, grid: &[T]) -> Result<SpectrumTrace<T>> {
        let values = grid.iter().map(|&w| jordan_lineshape(self, w)).collect();
        SpectrumTrace::from_samples(grid.to_vec(), values)
    }
}

pub fn jordan_resolvent<T: Real>(lambda0: Cx<T>, z: Cx<T>) -> Result<Matrix2<Cx<T>>> {
    let dz = z - lambda0;
    if dz.modulus() == T::zero() {
        return Err(Error::AtPole);
    }
    let inv = re(T::one()) / dz;
    let zero = re(T::zero());
    Ok(Matrix2::new(inv, inv * inv, zero, inv))
}

/// Simple-pole and double-pole weights of `<A|(z - L)^{-1}|B>`.
pub fn alpha_beta<T: Real>(system: &JordanBlockSystem<T>) -> (Cx<T>, Cx<T>) {
    let (a0, a1) = system.a_overlaps;
    let (b0, b1) = system.b_overlaps;
    (a0 * b0 + a1 * b1, a0 * b1)
}

/// `S(w) = (1/pi) Re[alpha/(i w - l0) + beta/(i w - l0)^2]` evaluated through
/// the real-frequency decomposition of [`LineAmplitudes`].
pub fn jordan_lineshape<T: Real>(system: &JordanBlockSystem<T>, omega: T) -> T {
    let amp = system.line_amplitudes();
    let gamma = system.gamma();
    let delta = omega - system.omega0();
    let g2 = gamma * gamma;
    let den = delta * delta + g2;
    amp.a / den
        + amp.b * (g2 - delta * delta) / (den * den)
        + amp.dispersive_a * delta / den
        + amp.dispersive_b * delta / (den * den)
}

/// One-parameter unfolding `[[l0, 1], [eps^2, l0]]` of the Jordan block, with
/// eigenvalues `l0 +- eps`; exactly defective at `eps = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unfolding<T: Real> {
    pub lambda0: Cx<T>,
    pub eps: T,
}

impl<T: Real> Unfolding<T> {
    pub fn new(lambda0: Cx<T>, eps: T) -> Result<Self> {
        if eps < T::zero() || !eps.is_finite() {
            return Err(Error::InvalidParams(format!("eps = {eps} must be >= 0")));
        }
        Ok(Self { lambda0, eps })
    }

    pub fn generator(&self) -> Matrix2<Cx<T>> {
        Matrix2::new(self.lambda0, re(T::one()), re(self.eps * self.eps), self.lambda0)
    }

    pub fn eigenvalues(&self) -> (Cx<T>, Cx<T>) {
        (self.lambda0 - re(self.eps), self.lambda0 + re(self.eps))
    }

    /// Closed-form `(z - L)^{-1}`.
    pub fn resolvent(&self, z: Cx<T>) -> Result<Matrix2<Cx<T>>> {
        let dz = z - self.lambda0;
        let e2 = re(self.eps * self.eps);
        let det = dz * dz - e2;
        if det.modulus() == T::zero() {
            return Err(Error::AtPole);
        }
        let inv = re(T::one()) / det;
        Ok(Matrix2::new(dz * inv, inv, e2 * inv, dz * inv))
    }

    /// `(1/pi) Re <A|(i w - L)^{-1}|B>` on a grid.
    pub fn spectrum_trace(
        &self,
        probe: &Vector2<Cx<T>>,
        source: &Vector2<Cx<T>>,
        grid: &[T],
    ) -> Result<SpectrumTrace<T>> {
        let inv_pi = T::one() / T::pi();
        let values = grid
            .iter()
            .map(|&w| {
                let r = self.resolvent(cx(T::zero(), w))?;
                Ok((probe.transpose() * r * source)[(0, 0)].re * inv_pi)
            })
            .collect::<Result<Vec<T>>>()?;
        SpectrumTrace::from_samples(grid.to_vec(), values)
    }
}
