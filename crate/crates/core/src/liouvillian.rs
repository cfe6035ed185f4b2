//! Vectorized Lindblad generator for `H = -h J_z` with jumps
//! `L_0 = sqrt(G0/j) J_z`, `L_+- = sqrt(G (1 -+ p) / 2j) J_+-`.
//!
//! Two constructions are provided. [`build_liouvillian_generic`] vectorizes the
//! Lindblad form term by term; [`build_liouvillian_explicit`] assembles the same
//! matrix from left/right spin algebras `K1 = J (x) I`, `K2 = I (x) J`. They are
//! kept independent so each can check the other.

use nalgebra::{ComplexField, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cx, re, Cx, Real};
use crate::spin::{build_spin_ops, SpinLength, SpinOps};

/// Index convention of the Liouville-space vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VecConvention {
    /// `|m><n| -> |m> (x) |n>`, i.e. `vec(rho)[m*d + n] = rho[m][n]`.
    /// Under this map `vec(A rho B) = (A (x) B^T) vec(rho)`.
    KetKron,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T: Real> {
    pub spin: SpinLength,
    /// Field in frequency units.
    pub h: T,
    /// Collective flip rate.
    pub gamma: T,
    /// Collective dephasing rate.
    pub gamma0: T,
    /// Bath polarization in `[-1, 1]`.
    pub p: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(spin: SpinLength, h: T, gamma: T, gamma0: T, p: T) -> Result<Self> {
        let params = Self { spin, h, gamma, gamma0, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.h, self.gamma, self.gamma0, self.p].iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.p.abs() > T::one() {
            return Err(Error::InvalidParams(format!("|p| = {} > 1", self.p.abs())));
        }
        if self.gamma < T::zero() || self.gamma0 < T::zero() {
            return Err(Error::InvalidParams("rates must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn with_p(self, p: T) -> Self {
        Self { p, ..self }
    }

    /// Rates `(G0/j, G(1-p)/2j, G(1+p)/2j)` of `L_0`, `L_+`, `L_-`.
    pub fn jump_rates(&self) -> (T, T, T) {
        let j: T = self.spin.j();
        let two = T::lit(2.0);
        (
            self.gamma0 / j,
            self.gamma * (T::one() - self.p) / (two * j),
            self.gamma * (T::one() + self.p) / (two * j),
        )
    }
}

/// Dense superoperator on the `(2j+1)^2`-dimensional Liouville space.
#[derive(Debug, Clone)]
pub struct Liouvillian<T: Real> {
    pub matrix: DMatrix<Cx<T>>,
    pub params: ModelParams<T>,
    pub convention: VecConvention,
}

impl<T: Real> Liouvillian<T> {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn spin(&self) -> SpinLength {
        self.params.spin
    }

    /// `<<I| L` as a row vector; zero for a trace-preserving generator.
    pub fn trace_row(&self) -> DVector<Cx<T>> {
        let d = self.params.spin.dim();
        let mut out = DVector::zeros(self.dim());
        for col in 0..self.dim() {
            let mut acc = Cx::new(T::zero(), T::zero());
            for a in 0..d {
                acc += self.matrix[(a * d + a, col)];
            }
            out[col] = acc;
        }
        out
    }

    pub fn apply(&self, rho: &DMatrix<Cx<T>>) -> Result<DMatrix<Cx<T>>> {
        devectorize(&(&self.matrix * vectorize(rho)?))
    }
}

pub fn vectorize<T: Real>(rho: &DMatrix<Cx<T>>) -> Result<DVector<Cx<T>>> {
    if !rho.is_square() {
        return Err(Error::DimensionMismatch(format!("vectorize of {:?}", rho.shape())));
    }
    let d = rho.nrows();
    Ok(DVector::from_fn(d * d, |k, _| rho[(k / d, k % d)]))
}

pub fn devectorize<T: Real>(v: &DVector<Cx<T>>) -> Result<DMatrix<Cx<T>>> {
    let d = (v.len() as f64).sqrt().round() as usize;
    if d * d != v.len() || d == 0 {
        return Err(Error::DimensionMismatch(format!("devectorize of length {}", v.len())));
    }
    Ok(DMatrix::from_fn(d, d, |a, b| v[a * d + b]))
}

pub(crate) fn to_complex<T: Real>(m: &DMatrix<T>) -> DMatrix<Cx<T>> {
    m.map(re)
}

/// Term-by-term vectorization of the Lindblad form:
/// `-i(H (x) I - I (x) H^T) + sum_l [L (x) L* - 1/2 L†L (x) I - 1/2 I (x) (L†L)^T]`.
pub fn build_liouvillian_generic<T: Real>(params: &ModelParams<T>) -> Result<Liouvillian<T>> {
    params.validate()?;
    let ops: SpinOps<T> = build_spin_ops(params.spin);
    let id = to_complex(&ops.id);
    let ham = to_complex(&(&ops.jz * (-params.h)));
    let (r0, rp, rm) = params.jump_rates();
    let jumps = [
        to_complex(&(&ops.jz * r0.sqrt())),
        to_complex(&(&ops.jp * rp.sqrt())),
        to_complex(&(&ops.jm * rm.sqrt())),
    ];

    let minus_i = cx(T::zero(), -T::one());
    let mut l = (ham.kronecker(&id) - id.kronecker(&ham.transpose())) * minus_i;
    let half = re(T::lit(0.5));
    for jump in &jumps {
        let ldl = jump.adjoint() * jump;
        l += jump.kronecker(&jump.conjugate());
        l -= ldl.kronecker(&id) * half;
        l -= id.kronecker(&ldl.transpose()) * half;
    }
    Ok(Liouvillian { matrix: l, params: *params, convention: VecConvention::KetKron })
}

/// Closed-form assembly in terms of `K1a = J_a (x) I` and `K2a = I (x) J_a`:
///
/// ```text
/// L = -G(j+1) + i h (K1z - K2z) + (G/j) K1z K2z + ((G - G0)/2j) (K1z - K2z)^2
///     - (G/j)(p/2)(K1z + K2z) + (G/j)((1-p)/2) K1+ K2+ + (G/j)((1+p)/2) K1- K2-
/// ```
///
/// The right-multiplication operators are `K2+- = I (x) J+-` without a transpose:
/// the jump term `L rho L†` for `L ~ J-` vectorizes to `J- (x) J-`, which is
/// `K1- K2-` only in this reading. With `K2+- = I (x) (J+-)^T` the gain and loss
/// terms would swap partners and the result is not trace preserving.
pub fn build_liouvillian_explicit<T: Real>(params: &ModelParams<T>) -> Result<Liouvillian<T>> {
    explicit_with(params, false)
}

fn explicit_with<T: Real>(params: &ModelParams<T>, transpose_k2: bool) -> Result<Liouvillian<T>> {
    params.validate()?;
    let ops: SpinOps<T> = build_spin_ops(params.spin);
    let id = &ops.id;
    let right = |a: &DMatrix<T>| if transpose_k2 { a.transpose() } else { a.clone() };
    // K1a K2b = J_a (x) J_b, so every product collapses to one Kronecker product.
    let k1z = ops.jz.kronecker(id);
    let k2z = id.kronecker(&ops.jz);
    let k1z_k2z = ops.jz.kronecker(&ops.jz);
    let jz2 = &ops.jz * &ops.jz;
    let kz_sq = jz2.kronecker(id) + id.kronecker(&jz2) - &k1z_k2z * T::lit(2.0);
    let k1p_k2p = ops.jp.kronecker(&right(&ops.jp));
    let k1m_k2m = ops.jm.kronecker(&right(&ops.jm));

    let j: T = params.spin.j();
    let g = params.gamma;
    let g0 = params.gamma0;
    let p = params.p;
    let two = T::lit(2.0);
    let dim = k1z.nrows();

    let kz = &k1z - &k2z;
    let real_part = DMatrix::<T>::identity(dim, dim) * (-g * (j + T::one()))
        + &k1z_k2z * (g / j)
        + &kz_sq * ((g - g0) / (two * j))
        - (&k1z + &k2z) * (g / j * p / two)
        + &k1p_k2p * (g / j * (T::one() - p) / two)
        + &k1m_k2m * (g / j * (T::one() + p) / two);

    let matrix = DMatrix::from_fn(dim, dim, |r, c| cx(real_part[(r, c)], params.h * kz[(r, c)]));
    Ok(Liouvillian { matrix, params: *params, convention: VecConvention::KetKron })
}

/// Sector label `M = m - m'` of Liouville basis element `k = a*d + b`.
pub fn sector_of(spin: SpinLength, k: usize) -> i64 {
    let d = spin.dim();
    let (a, b) = (k / d, k % d);
    // m_a - m_b = (j - a) - (j - b)
    b as i64 - a as i64
}

/// One weak-symmetry block: basis indices (ascending) and the extracted block.
#[derive(Debug, Clone)]
pub struct Sector<T: Real> {
    pub m: i64,
    pub indices: Vec<usize>,
    pub block: DMatrix<Cx<T>>,
}

impl<T: Real> Sector<T> {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Restriction of a full Liouville vector to this sector.
    pub fn restrict(&self, v: &DVector<Cx<T>>) -> DVector<Cx<T>> {
        DVector::from_iterator(self.dim(), self.indices.iter().map(|&k| v[k]))
    }

    /// Embedding of a sector vector into the full Liouville space.
    pub fn embed(&self, v: &DVector<Cx<T>>, full_dim: usize) -> DVector<Cx<T>> {
        let mut out = DVector::zeros(full_dim);
        for (i, &k) in self.indices.iter().enumerate() {
            out[k] = v[i];
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SectorDecomposition<T: Real> {
    pub spin: SpinLength,
    /// Ordered by `M = -2j, ..., 2j`.
    pub sectors: Vec<Sector<T>>,
}

impl<T: Real> SectorDecomposition<T> {
    pub fn sector(&self, m: i64) -> Option<&Sector<T>> {
        let offset = m + self.spin.twice_j() as i64;
        if offset < 0 {
            return None;
        }
        self.sectors.get(offset as usize)
    }
}

/// Sector index lists for spin `j`, without touching any matrix.
pub fn sector_indices(spin: SpinLength) -> Vec<(i64, Vec<usize>)> {
    let d = spin.dim();
    let tj = spin.twice_j() as i64;
    let mut out: Vec<(i64, Vec<usize>)> = (-tj..=tj).map(|m| (m, Vec::new())).collect();
    for k in 0..d * d {
        let m = sector_of(spin, k);
        out[(m + tj) as usize].1.push(k);
    }
    out
}

/// Largest `|L[r, c]|` over pairs in different sectors.
pub fn max_cross_sector<T: Real>(l: &Liouvillian<T>) -> T {
    let spin = l.spin();
    let mut worst = T::zero();
    for c in 0..l.dim() {
        let mc = sector_of(spin, c);
        for r in 0..l.dim() {
            if sector_of(spin, r) != mc {
                worst = worst.max(l.matrix[(r, c)].modulus());
            }
        }
    }
    worst
}

pub fn sector_decompose<T: Real>(l: &Liouvillian<T>) -> Result<SectorDecomposition<T>> {
    let spin = l.spin();
    let tol = T::lit(1e-10);
    for c in 0..l.dim() {
        let mc = sector_of(spin, c);
        for r in 0..l.dim() {
            let v = l.matrix[(r, c)].modulus();
            if sector_of(spin, r) != mc && v > tol {
                return Err(Error::SectorLeak { row: r, col: c, value: v.as_f64() });
            }
        }
    }
    let sectors = sector_indices(spin)
        .into_iter()
        .map(|(m, indices)| {
            let n = indices.len();
            let block = DMatrix::from_fn(n, n, |r, c| l.matrix[(indices[r], indices[c])]);
            Sector { m, indices, block }
        })
        .collect();
    Ok(SectorDecomposition { spin, sectors })
}

/// Bath inverse temperature `beta = ln((1-p)/(1+p)) / h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InverseTemperature<T> {
    Finite(T),
    PlusInfinity,
    MinusInfinity,
}

impl<T: Real> InverseTemperature<T> {
    pub fn as_f64(self) -> f64 {
        match self {
            Self::Finite(b) => b.as_f64(),
            Self::PlusInfinity => f64::INFINITY,
            Self::MinusInfinity => f64::NEG_INFINITY,
        }
    }
}

pub fn bath_inverse_temperature<T: Real>(params: &ModelParams<T>) -> Result<InverseTemperature<T>> {
    params.validate()?;
    if params.h == T::zero() {
        return Err(Error::ZeroField);
    }
    let p = params.p;
    let positive_h = params.h > T::zero();
    if p == T::one() || p == -T::one() {
        // ln -> -inf at p = 1, +inf at p = -1; 1/h carries the sign of h.
        let log_positive = p < T::zero();
        return Ok(if log_positive == positive_h {
            InverseTemperature::PlusInfinity
        } else {
            InverseTemperature::MinusInfinity
        });
    }
    Ok(InverseTemperature::Finite(((T::one() - p) / (T::one() + p)).ln() / params.h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spin(twice: i64) -> SpinLength {
        SpinLength::from_twice(twice).unwrap()
    }

    fn params(twice: i64, h: f64, g: f64, g0: f64, p: f64) -> ModelParams<f64> {
        ModelParams::new(spin(twice), h, g, g0, p).unwrap()
    }

    fn max_abs(m: &DMatrix<Cx<f64>>) -> f64 {
        m.iter().fold(0.0, |acc, x| acc.max(x.modulus()))
    }

    /// Deterministic pseudo-random complex matrix (LCG; test-only).
    fn pseudo_random(d: usize, seed: u64) -> DMatrix<Cx<f64>> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        DMatrix::from_fn(d, d, |_, _| Cx::new(next(), next()))
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(spin(2), 1.0, 0.1, 0.0, 1.5).is_err());
        assert!(ModelParams::new(spin(2), 1.0, -0.1, 0.0, 0.5).is_err());
        assert!(ModelParams::new(spin(2), 1.0, 0.1, -1e-3, 0.5).is_err());
        assert!(ModelParams::new(spin(2), f64::NAN, 0.1, 0.0, 0.5).is_err());
        assert!(ModelParams::new(spin(2), 1.0, 0.1, 0.0, -1.0).is_ok());
    }

    #[test]
    fn vectorize_roundtrip_and_errors() {
        let rho = pseudo_random(3, 7);
        let v = vectorize(&rho).unwrap();
        assert_eq!(devectorize(&v).unwrap(), rho);
        assert_eq!(v[1], rho[(0, 1)]);
        let zero = DVector::<Cx<f64>>::zeros(9);
        assert_eq!(devectorize(&zero).unwrap(), DMatrix::zeros(3, 3));
        assert!(devectorize(&DVector::<Cx<f64>>::zeros(8)).is_err());
        assert!(vectorize(&DMatrix::<Cx<f64>>::zeros(2, 3)).is_err());
    }

    #[test]
    fn vectorized_identity_normalization() {
        let d = 5;
        let v = vectorize(&DMatrix::<Cx<f64>>::identity(d, d)).unwrap() / re(d as f64);
        let overlap: Cx<f64> = v.dotc(&v) * re(d as f64);
        assert!((overlap - re(1.0)).modulus() < 1e-15);
    }

    #[test]
    fn kron_identity_matches_convention() {
        let ops = build_spin_ops::<f64>(spin(2));
        let jz = to_complex(&ops.jz);
        let jp = to_complex(&ops.jp);
        let id = to_complex(&ops.id);
        for seed in 0..5 {
            let rho = pseudo_random(3, seed);
            let lhs = vectorize(&(&jz * &rho)).unwrap();
            let rhs = jz.kronecker(&id) * vectorize(&rho).unwrap();
            assert!((lhs - rhs).camax() <= 1e-14);
            // vec(A rho B) = (A (x) B^T) vec(rho)
            let lhs = vectorize(&(&jp * &rho * &jz)).unwrap();
            let rhs = jp.kronecker(&jz.transpose()) * vectorize(&rho).unwrap();
            assert!((lhs - rhs).camax() <= 1e-14);
        }
    }

    #[test]
    fn spin_half_full_polarization_steady_state() {
        // Only L- survives; |-1/2><-1/2| is the unique kernel element.
        let l = build_liouvillian_generic(&params(1, 1.0, 1.0, 0.0, 1.0)).unwrap();
        let down = DMatrix::from_row_slice(2, 2, &[re(0.0), re(0.0), re(0.0), re(1.0)]);
        assert!(max_abs(&l.apply(&down).unwrap()) < 1e-15);
        let up = DMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(0.0)]);
        assert!(max_abs(&l.apply(&up).unwrap()) > 0.1);
        // Kernel is one-dimensional: rank 3.
        let svd = l.matrix.clone().svd(false, false);
        let zeros = svd.singular_values.iter().filter(|&&s| s < 1e-12).count();
        assert_eq!(zeros, 1);
    }

    #[test]
    fn coherent_limit_is_diagonal_ihkz() {
        for twice in [1, 2, 3] {
            let pr = params(twice, 0.7, 0.0, 0.0, 0.3);
            let l = build_liouvillian_generic(&pr).unwrap();
            let e = build_liouvillian_explicit(&pr).unwrap();
            let d = pr.spin.dim();
            for r in 0..l.dim() {
                for c in 0..l.dim() {
                    let want = if r == c {
                        cx(0.0, 0.7 * sector_of(pr.spin, r) as f64)
                    } else {
                        re(0.0)
                    };
                    assert!((l.matrix[(r, c)] - want).modulus() < 1e-15);
                    assert!((e.matrix[(r, c)] - want).modulus() < 1e-15);
                }
            }
            assert_eq!(l.dim(), d * d);
        }
    }

    #[test]
    fn explicit_matches_generic_reference_point() {
        let pr = params(4, 1.0, 0.1, 0.0, 0.5);
        let g = build_liouvillian_generic(&pr).unwrap();
        let e = build_liouvillian_explicit(&pr).unwrap();
        assert!(max_abs(&(&g.matrix - &e.matrix)) <= 1e-10);
    }

    #[test]
    fn transposed_k2_reading_is_not_the_lindbladian() {
        let pr = params(4, 1.0, 0.1, 0.0, 0.5);
        let g = build_liouvillian_generic(&pr).unwrap();
        let wrong = explicit_with(&pr, true).unwrap();
        assert!(max_abs(&(&g.matrix - &wrong.matrix)) > 1e-2);
        assert!(wrong.trace_row().camax() > 1e-2);
        assert!(max_cross_sector(&wrong) > 1e-2);
    }

    #[test]
    fn trace_preservation() {
        for &(twice, p, g0) in &[(1, 0.0, 0.0), (2, 0.5, 0.05), (4, -0.9, 0.0), (10, 0.99, 0.05)] {
            let pr = params(twice, 1.0, 0.1, g0, p);
            for l in [build_liouvillian_generic(&pr).unwrap(), build_liouvillian_explicit(&pr).unwrap()] {
                assert!(l.trace_row().camax() <= 1e-10);
            }
        }
    }

    #[test]
    fn dephasing_shift_is_quadratic_in_m() {
        // Only the Gamma0 term differs; within sector M it is -(G0/2j) M^2 on the diagonal.
        let a = build_liouvillian_explicit(&params(4, 1.0, 0.1, 0.0, 0.3)).unwrap();
        let b = build_liouvillian_explicit(&params(4, 1.0, 0.1, 0.05, 0.3)).unwrap();
        let diff = &b.matrix - &a.matrix;
        for r in 0..diff.nrows() {
            for c in 0..diff.ncols() {
                let m = sector_of(a.spin(), r) as f64;
                let want = if r == c { -(0.05 / 4.0) * m * m } else { 0.0 };
                assert!((diff[(r, c)] - re(want)).modulus() < 1e-15);
            }
        }
    }

    #[test]
    fn sector_dimensions() {
        let idx = sector_indices(spin(2));
        let dims: Vec<(i64, usize)> = idx.iter().map(|(m, v)| (*m, v.len())).collect();
        assert_eq!(dims, vec![(-2, 1), (-1, 2), (0, 3), (1, 2), (2, 1)]);
        let idx = sector_indices(spin(40));
        assert_eq!(idx.iter().find(|(m, _)| *m == 1).unwrap().1.len(), 40);
        assert_eq!(idx.iter().map(|(_, v)| v.len()).sum::<usize>(), 41 * 41);
        for (m, v) in &idx {
            assert_eq!(v.len() as i64, 41 - m.abs());
        }
    }

    #[test]
    fn sector_decomposition_is_exact() {
        let pr = params(4, 1.0, 0.1, 0.02, 0.9);
        let l = build_liouvillian_generic(&pr).unwrap();
        assert_eq!(max_cross_sector(&l), 0.0);
        let dec = sector_decompose(&l).unwrap();
        assert_eq!(dec.sectors.len(), 9);
        let one = dec.sector(1).unwrap();
        assert_eq!(one.m, 1);
        for (i, &k) in one.indices.iter().enumerate() {
            assert_eq!(sector_of(pr.spin, k), 1);
            for (jj, &kk) in one.indices.iter().enumerate() {
                assert_eq!(one.block[(i, jj)], l.matrix[(k, kk)]);
            }
        }
        assert!(dec.sector(5).is_none());
        assert!(dec.sector(-5).is_none());
    }

    #[test]
    fn sector_decompose_rejects_leaks() {
        let mut l = build_liouvillian_generic(&params(2, 1.0, 0.1, 0.0, 0.5)).unwrap();
        l.matrix[(0, 1)] = re(1e-6);
        assert!(matches!(sector_decompose(&l), Err(Error::SectorLeak { row: 0, col: 1, .. })));
    }

    #[test]
    fn inverse_temperature() {
        let b = bath_inverse_temperature(&params(2, 1.0, 0.1, 0.0, 0.0)).unwrap();
        assert_eq!(b, InverseTemperature::Finite(0.0));
        let b = bath_inverse_temperature(&params(2, 1.0, 0.1, 0.0, 0.9)).unwrap();
        assert!((b.as_f64() - (1.0f64 / 19.0).ln()).abs() < 1e-14);
        let b = bath_inverse_temperature(&params(2, 1.0, 0.1, 0.0, 1.0)).unwrap();
        assert_eq!(b, InverseTemperature::MinusInfinity);
        let b = bath_inverse_temperature(&params(2, 1.0, 0.1, 0.0, -1.0)).unwrap();
        assert_eq!(b, InverseTemperature::PlusInfinity);
        let b = bath_inverse_temperature(&params(2, -1.0, 0.1, 0.0, 1.0)).unwrap();
        assert_eq!(b, InverseTemperature::PlusInfinity);
        let near = bath_inverse_temperature(&params(2, 1.0, 0.1, 0.0, 1.0 - 1e-12)).unwrap();
        assert!(near.as_f64() < -25.0);
        assert_eq!(
            bath_inverse_temperature(&params(2, 0.0, 0.1, 0.0, 0.5)),
            Err(Error::ZeroField)
        );
    }
}
