//! Steady states, Liouvillian spectra and resolvent emission spectra.
//!
//! Emission spectra are `S(w) = (1/pi) Re Tr[J- (i w - L)^{-1} (rho J+)]`. For a
//! source `rho J+` supported on sector `M = 1` only the `M = 1` block enters,
//! so each grid point costs one LU solve of size `2j`.

use nalgebra::{ComplexField, DMatrix, DVector, Schur};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouvillian::{
    sector_decompose, sector_of, to_complex, vectorize, Liouvillian, ModelParams, Sector,
    SectorDecomposition,
};
use crate::scalar::{cx, re, Cx, Real};
use crate::spin::build_spin_ops;

/// Name of the generator behind [`random_full_rank_state`], recorded in outputs.
pub const RNG_NAME: &str = "ChaCha8Rng::seed_from_u64";

/// Default near-degeneracy threshold on raw eigenvalues.
pub const DEFAULT_PAIRING_THRESHOLD: f64 = 1e-6;

const ZERO_MODE_TOL: f64 = 1e-9;
const HERMITIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    Steady,
    InfiniteTemperature,
    Random { seed: u64 },
    /// User-supplied density matrix.
    Custom,
}

impl SourceKind {
    pub fn label(&self) -> String {
        match self {
            Self::Steady => "steady".into(),
            Self::InfiniteTemperature => "infinite_temperature".into(),
            Self::Random { seed } => format!("random_{seed}"),
            Self::Custom => "custom".into(),
        }
    }

    pub fn is_generic(&self) -> bool {
        matches!(self, Self::InfiniteTemperature | Self::Random { .. })
    }
}

#[derive(Debug, Clone)]
pub struct SteadyState<T: Real> {
    pub rho: DMatrix<Cx<T>>,
    /// `||L vec(rho)||_inf` on the full Liouvillian.
    pub residual: T,
    /// Second-smallest `|lambda|` of the `M = 0` block.
    pub uniqueness_gap: T,
    /// Largest entry removed by Hermitization before normalization.
    pub hermitization_delta: T,
}

#[derive(Debug, Clone)]
pub struct LiouvSpectrum<T: Real> {
    pub eigenvalues: Vec<Cx<T>>,
    pub sector_label: Vec<i64>,
    pub near_degenerate: Vec<bool>,
    pub pairing_threshold: T,
}

impl<T: Real> LiouvSpectrum<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn flagged_count(&self) -> usize {
        self.near_degenerate.iter().filter(|&&f| f).count()
    }

    pub fn sector(&self, m: i64) -> Vec<Cx<T>> {
        self.eigenvalues
            .iter()
            .zip(&self.sector_label)
            .filter(|(_, &s)| s == m)
            .map(|(l, _)| *l)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumTrace<T: Real> {
    pub omegas: Vec<T>,
    pub values: Vec<T>,
    pub source: SourceKind,
    /// `None` for synthetic traces not produced from a Liouvillian.
    pub params: Option<ModelParams<T>>,
    pub sector_used: i64,
    /// Norm fraction of `rho0 J+` outside sector `M = 1` (dropped).
    pub dropped_fraction: T,
    pub rng: Option<String>,
}

impl<T: Real> SpectrumTrace<T> {
    /// Synthetic trace from raw samples; used for fitting tests and oracle demos.
    pub fn from_samples(omegas: Vec<T>, values: Vec<T>) -> Result<Self> {
        check_grid(&omegas)?;
        if values.len() != omegas.len() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("values must be finite and match the grid".into()));
        }
        Ok(Self {
            omegas,
            values,
            source: SourceKind::Custom,
            params: None,
            sector_used: 1,
            dropped_fraction: T::zero(),
            rng: None,
        })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// Uniform grid of `n >= 2` points on `[lo, hi]`.
pub fn frequency_grid<T: Real>(lo: T, hi: T, n: usize) -> Result<Vec<T>> {
    if n < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidGrid(format!("[{lo}, {hi}] with {n} points")));
    }
    let step = (hi - lo) / T::lit((n - 1) as f64);
    Ok((0..n).map(|i| if i + 1 == n { hi } else { lo + step * T::lit(i as f64) }).collect())
}

/// `[h - 50 G, h + 50 G]` with 2001 points.
pub fn default_grid<T: Real>(params: &ModelParams<T>) -> Result<Vec<T>> {
    let half = T::lit(50.0) * params.gamma;
    frequency_grid(params.h - half, params.h + half, 2001)
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if grid.iter().any(|w| !w.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Eigenvalues of a dense complex matrix from its Schur form.
pub fn eigenvalues<T: Real>(m: &DMatrix<Cx<T>>) -> Option<Vec<Cx<T>>> {
    if m.nrows() == 0 {
        return Some(Vec::new());
    }
    if m.nrows() == 1 {
        return Some(vec![m[(0, 0)]]);
    }
    let schur = Schur::try_new(balance(m.clone()), T::default_epsilon(), 1000 * m.nrows())?;
    schur.eigenvalues().map(|v| v.iter().copied().collect())
}

/// Parlett-Reinsch balancing: a power-of-two diagonal similarity that evens
/// out row and column norms. The sector blocks are far from normal at large
/// `p` and Schur without it loses about half the digits on clustered pairs.
fn balance<T: Real>(mut a: DMatrix<Cx<T>>) -> DMatrix<Cx<T>> {
    let n = a.nrows();
    let radix = T::lit(2.0);
    let radix2 = radix * radix;
    let l1 = |z: &Cx<T>| z.re.abs() + z.im.abs();
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = T::zero();
            let mut r = T::zero();
            for k in 0..n {
                if k != i {
                    c += l1(&a[(k, i)]);
                    r += l1(&a[(i, k)]);
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix2;
            }
            g = r * radix;
            while c >= g {
                f /= radix;
                c /= radix2;
            }
            if (c + r) / f < T::lit(0.95) * s {
                converged = false;
                a.row_mut(i).scale_mut(T::one() / f);
                a.column_mut(i).scale_mut(f);
            }
        }
    }
    a
}

fn sector_eigenvalues<T: Real>(sector: &Sector<T>) -> Result<Vec<Cx<T>>> {
    symmetrizable_eigenvalues(&sector.block)
        .or_else(|| eigenvalues(&sector.block))
        .ok_or(Error::Eigensolver { sector: sector.m })
}

/// Sector blocks are tridiagonal with a constant imaginary diagonal `i h M`
/// and real couplings whose products `u_k l_k` are nonnegative, so a diagonal
/// similarity turns them into `i h M` plus a real symmetric tridiagonal.
/// Eigenvalues come from the symmetric problem, which stays accurate where
/// the raw block is too non-normal for a general Schur solve. Returns `None`
/// if the block lacks that structure.
pub fn symmetrizable_eigenvalues<T: Real>(m: &DMatrix<Cx<T>>) -> Option<Vec<Cx<T>>> {
    let n = m.nrows();
    if n == 0 || !m.is_square() {
        return None;
    }
    let scale = m.iter().fold(T::zero(), |acc, z| acc.max(z.modulus()));
    let tol = T::default_epsilon() * T::lit(64.0) * scale.max(T::one());
    let shift = m[(0, 0)].im;
    for r in 0..n {
        for c in 0..n {
            let z = m[(r, c)];
            let far = r.abs_diff(c) > 1;
            if far && z.modulus() != T::zero() {
                return None;
            }
            if r == c && (z.im - shift).abs() > tol {
                return None;
            }
            if r != c && !far && z.im.abs() > tol {
                return None;
            }
        }
    }
    let mut sym = DMatrix::<T>::zeros(n, n);
    for k in 0..n {
        sym[(k, k)] = m[(k, k)].re;
    }
    for k in 0..n - 1 {
        let prod = m[(k, k + 1)].re * m[(k + 1, k)].re;
        if prod < -tol * tol {
            return None;
        }
        let off = prod.max(T::zero()).sqrt();
        sym[(k, k + 1)] = off;
        sym[(k + 1, k)] = off;
    }
    let mut ev: Vec<Cx<T>> = sym.symmetric_eigenvalues().iter().map(|&x| cx(x, shift)).collect();
    ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap_or(std::cmp::Ordering::Equal));
    Some(ev)
}

pub fn steady_state<T: Real>(l: &Liouvillian<T>) -> Result<SteadyState<T>> {
    let dec = sector_decompose(l)?;
    steady_state_from(l, &dec)
}

fn steady_state_from<T: Real>(l: &Liouvillian<T>, dec: &SectorDecomposition<T>) -> Result<SteadyState<T>> {
    let zero = dec.sector(0).expect("sector M=0 always exists");
    let d = l.spin().dim();

    let mut mags: Vec<T> = sector_eigenvalues(zero)?.iter().map(|z| z.modulus()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let tol = T::lit(ZERO_MODE_TOL);
    let count = mags.iter().filter(|&&m| m <= tol).count();
    if count > 1 {
        return Err(Error::NonUniqueSteadyState { count, tol: ZERO_MODE_TOL });
    }
    let uniqueness_gap = mags.get(1).copied().unwrap_or(T::zero());

    // The M=0 basis is |m><m| in order, so column sums vanish (trace
    // preservation) and one equation can be traded for sum(x) = 1.
    let mut system = zero.block.clone();
    for c in 0..d {
        system[(0, c)] = re(T::one());
    }
    let mut rhs = DVector::zeros(d);
    rhs[0] = re(T::one());
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::NonUniqueSteadyState { count: 2, tol: ZERO_MODE_TOL })?;

    let mut rho = DMatrix::<Cx<T>>::zeros(d, d);
    for (i, &k) in zero.indices.iter().enumerate() {
        rho[(k / d, k % d)] = x[i];
    }
    let herm = (&rho + rho.adjoint()) * re(T::lit(0.5));
    let hermitization_delta = (&herm - &rho).iter().fold(T::zero(), |acc, z| acc.max(z.modulus()));
    if hermitization_delta > T::lit(HERMITIZATION_TOL) {
        return Err(Error::InvalidDensityMatrix(format!(
            "steady state far from Hermitian ({hermitization_delta})"
        )));
    }
    let tr = herm.trace();
    let rho = herm / tr;
    let residual = (&l.matrix * vectorize(&rho)?).camax();
    Ok(SteadyState { rho, residual, uniqueness_gap, hermitization_delta })
}

/// All `(2j+1)^2` eigenvalues, computed sector by sector, with near-degeneracy flags.
pub fn full_spectrum<T: Real>(l: &Liouvillian<T>, threshold: T) -> Result<LiouvSpectrum<T>> {
    let dec = sector_decompose(l)?;
    let per_sector: Vec<Result<(i64, Vec<Cx<T>>)>> = dec
        .sectors
        .par_iter()
        .map(|s| sector_eigenvalues(s).map(|ev| (s.m, ev)))
        .collect();
    let mut eigenvalues = Vec::with_capacity(l.dim());
    let mut sector_label = Vec::with_capacity(l.dim());
    for item in per_sector {
        let (m, ev) = item?;
        sector_label.extend(std::iter::repeat_n(m, ev.len()));
        eigenvalues.extend(ev);
    }
    let near_degenerate = near_degenerate_flags(&eigenvalues, threshold);
    Ok(LiouvSpectrum { eigenvalues, sector_label, near_degenerate, pairing_threshold: threshold })
}

/// Flag `i` iff some `k != i` has `|lambda_i - lambda_k| < threshold`.
pub fn near_degenerate_flags<T: Real>(eigs: &[Cx<T>], threshold: T) -> Vec<bool> {
    let mut order: Vec<usize> = (0..eigs.len()).collect();
    order.sort_by(|&a, &b| eigs[a].re.partial_cmp(&eigs[b].re).unwrap_or(std::cmp::Ordering::Equal));
    let mut flags = vec![false; eigs.len()];
    for (pos, &i) in order.iter().enumerate() {
        for &k in &order[pos + 1..] {
            if eigs[k].re - eigs[i].re >= threshold {
                break;
            }
            if (eigs[k] - eigs[i]).modulus() < threshold {
                flags[i] = true;
                flags[k] = true;
            }
        }
    }
    flags
}

/// Resolvent machinery for one Liouvillian: the `M = 1` block and the `J-` probe.
pub struct EmissionSolver<'a, T: Real> {
    liouvillian: &'a Liouvillian<T>,
    decomposition: SectorDecomposition<T>,
    probe: DVector<Cx<T>>,
    jp: DMatrix<Cx<T>>,
}

impl<'a, T: Real> EmissionSolver<'a, T> {
    pub fn new(liouvillian: &'a Liouvillian<T>) -> Result<Self> {
        let decomposition = sector_decompose(liouvillian)?;
        let ops = build_spin_ops::<T>(liouvillian.spin());
        // Tr[J- Y] = sum_ab (J-)_ba Y_ab = vec(J-^T) . vec(Y), no conjugation.
        let probe = vectorize(&to_complex(&ops.jm.transpose()))?;
        Ok(Self { liouvillian, decomposition, probe, jp: to_complex(&ops.jp) })
    }

    pub fn decomposition(&self) -> &SectorDecomposition<T> {
        &self.decomposition
    }

    pub fn steady_state(&self) -> Result<SteadyState<T>> {
        steady_state_from(self.liouvillian, &self.decomposition)
    }

    /// `vec(rho0 J+)` on the full Liouville space.
    pub fn source_vector(&self, rho0: &DMatrix<Cx<T>>) -> Result<DVector<Cx<T>>> {
        if rho0.shape() != self.jp.shape() {
            return Err(Error::DimensionMismatch(format!(
                "source {:?} for spin dimension {}",
                rho0.shape(),
                self.jp.nrows()
            )));
        }
        vectorize(&(rho0 * &self.jp))
    }

    /// Norm fraction of a Liouville vector lying outside sector `M = 1`.
    pub fn off_sector_fraction(&self, v: &DVector<Cx<T>>) -> T {
        let spin = self.liouvillian.spin();
        let total = v.norm();
        if total == T::zero() {
            return T::zero();
        }
        let outside = v
            .iter()
            .enumerate()
            .filter(|(k, _)| sector_of(spin, *k) != 1)
            .fold(T::zero(), |acc, (_, z)| acc + z.modulus_squared());
        outside.sqrt() / total
    }

    /// Complex `Tr[J- (i w - L_{M=1})^{-1} X]` per grid point.
    pub fn sector_resolvent(&self, source: &DVector<Cx<T>>, grid: &[T]) -> Result<Vec<Cx<T>>> {
        let sector = self.decomposition.sector(1).ok_or(Error::InvalidGrid(
            "spin has no M=1 sector".into(),
        ))?;
        let b = sector.restrict(source);
        let probe = sector.restrict(&self.probe);
        shifted_solves(&sector.block, &b, &probe, grid)
    }

    /// Same quantity on the full Liouvillian, no sector restriction.
    pub fn full_resolvent(&self, source: &DVector<Cx<T>>, grid: &[T]) -> Result<Vec<Cx<T>>> {
        shifted_solves(&self.liouvillian.matrix, source, &self.probe, grid)
    }

    pub fn trace(&self, rho0: &DMatrix<Cx<T>>, grid: &[T], source: SourceKind) -> Result<SpectrumTrace<T>> {
        check_grid(grid)?;
        let x = self.source_vector(rho0)?;
        let dropped_fraction = self.off_sector_fraction(&x);
        let inv_pi = T::one() / T::pi();
        let values = self
            .sector_resolvent(&x, grid)?
            .into_iter()
            .map(|g| g.re * inv_pi)
            .collect();
        Ok(SpectrumTrace {
            omegas: grid.to_vec(),
            values,
            source,
            params: Some(self.liouvillian.params),
            sector_used: 1,
            dropped_fraction,
            rng: matches!(source, SourceKind::Random { .. }).then(|| RNG_NAME.to_string()),
        })
    }

    /// Resolves `kind` into a density matrix (steady state, `I/d`, or seeded random).
    pub fn source_state(&self, kind: SourceKind) -> Result<DMatrix<Cx<T>>> {
        let d = self.liouvillian.spin().dim();
        match kind {
            SourceKind::Steady => Ok(self.steady_state()?.rho),
            SourceKind::InfiniteTemperature => {
                Ok(DMatrix::identity(d, d) * re(T::one() / T::lit(d as f64)))
            }
            SourceKind::Random { seed } => Ok(random_full_rank_state(d, seed)),
            SourceKind::Custom => Err(Error::InvalidDensityMatrix(
                "custom sources need an explicit matrix".into(),
            )),
        }
    }
}

fn shifted_solves<T: Real>(
    block: &DMatrix<Cx<T>>,
    rhs: &DVector<Cx<T>>,
    probe: &DVector<Cx<T>>,
    grid: &[T],
) -> Result<Vec<Cx<T>>> {
    grid.par_iter()
        .map(|&omega| {
            let solve_at = |w: T| {
                let mut shifted = -block.clone();
                for i in 0..shifted.nrows() {
                    shifted[(i, i)] += cx(T::zero(), w);
                }
                shifted.lu().solve(rhs)
            };
            let x = solve_at(omega)
                .or_else(|| solve_at(omega + T::lit(1e-12)))
                .ok_or(Error::SingularResolvent { omega: omega.as_f64() })?;
            Ok(probe.iter().zip(x.iter()).fold(Cx::new(T::zero(), T::zero()), |acc, (p, v)| acc + p * v))
        })
        .collect()
}

pub fn emission_spectrum_steady<T: Real>(
    l: &Liouvillian<T>,
    ss: &SteadyState<T>,
    grid: &[T],
) -> Result<SpectrumTrace<T>> {
    EmissionSolver::new(l)?.trace(&ss.rho, grid, SourceKind::Steady)
}

/// Spectrum sourced by an arbitrary density matrix `rho0`. Components of
/// `rho0 J+` outside `M = 1` cannot reach the `J-` probe and are dropped; their
/// norm fraction is reported in the trace.
pub fn emission_spectrum_source<T: Real>(
    l: &Liouvillian<T>,
    rho0: &DMatrix<Cx<T>>,
    grid: &[T],
) -> Result<SpectrumTrace<T>> {
    validate_density_matrix(rho0)?;
    EmissionSolver::new(l)?.trace(rho0, grid, SourceKind::Custom)
}

/// Hermitian, unit trace and positive semidefinite, each to `1e-9`.
pub fn validate_density_matrix<T: Real>(rho: &DMatrix<Cx<T>>) -> Result<()> {
    if !rho.is_square() || rho.nrows() == 0 {
        return Err(Error::InvalidDensityMatrix(format!("shape {:?}", rho.shape())));
    }
    let tol = T::lit(1e-9);
    let skew = (rho - rho.adjoint()).iter().fold(T::zero(), |acc, z| acc.max(z.modulus()));
    if skew > tol {
        return Err(Error::InvalidDensityMatrix(format!("not Hermitian (skew {skew})")));
    }
    let tr = rho.trace();
    if (tr - re(T::one())).modulus() > tol {
        return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
    }
    let herm = (rho + rho.adjoint()) * re(T::lit(0.5));
    let min_eig = herm
        .symmetric_eigenvalues()
        .iter()
        .fold(T::max_value().unwrap_or(T::one()), |acc, &e| acc.min(e));
    if min_eig < -tol {
        return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min_eig}")));
    }
    Ok(())
}

/// `G G† / Tr(G G†)` with `G` a `d x d` matrix of independent complex Gaussians.
pub fn random_full_rank_state<T: Real>(d: usize, seed: u64) -> DMatrix<Cx<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> T {
        let x: f64 = StandardNormal.sample(&mut rng);
        T::lit(x)
    };
    let g = DMatrix::from_fn(d, d, |_, _| {
        let re_part = draw();
        cx(re_part, draw())
    });
    let w = &g * g.adjoint();
    let tr = w.trace();
    let w = w / tr;
    // exact Hermitian symmetry
    (&w + w.adjoint()) * re(T::lit(0.5))
}
