//! Oracles shared by the integration tests and the CLI acceptance suite. None
//! of them go through the library's resolvent solver.
#![allow(dead_code)]

use lepspec::spectral::eigenvalues;
use lepspec::{build_spin_ops, devectorize, vectorize, Liouvillian, ModelParams, SpinLength};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn params(j: f64, h: f64, gamma: f64, gamma0: f64, p: f64) -> ModelParams<f64> {
    ModelParams::new(SpinLength::from_j(j).unwrap(), h, gamma, gamma0, p).unwrap()
}

pub fn max_abs(m: &DMatrix<C>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Gauss-Legendre rule on [-1, 1] by Golub-Welsch.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jac = DMatrix::from_fn(n, n, |r, c| {
        if r.abs_diff(c) == 1 {
            let k = r.max(c) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// `(1/pi) Re int_0^inf e^{-i w t} Tr[J- e^{L t}(rho0 J+)] dt` by propagating
/// the full Liouvillian with matrix exponentials and integrating with
/// panel-wise Gauss-Legendre. `rho0` must be diagonal in `Jz` so the
/// propagated source decays to zero.
pub fn time_domain_spectrum(l: &Liouvillian<f64>, rho0: &DMatrix<C>, grid: &[f64]) -> Vec<f64> {
    let ops = build_spin_ops::<f64>(l.spin());
    let jp = ops.jp.map(|x| C::new(x, 0.0));
    let jm = ops.jm.map(|x| C::new(x, 0.0));
    let panel = 0.25;
    let (nodes, weights) = gauss_legendre(12);
    let step = (&l.matrix * C::new(panel, 0.0)).exp();
    let node_props: Vec<DMatrix<C>> = nodes
        .iter()
        .map(|x| (&l.matrix * C::new(0.5 * panel * (x + 1.0), 0.0)).exp())
        .collect();

    let mut samples: Vec<(f64, f64, C)> = Vec::new();
    let mut v = vectorize(&(rho0 * &jp)).unwrap();
    let v0 = v.norm();
    let mut k = 0usize;
    while v.norm() > 1e-15 * v0 {
        assert!(k < 2_000_000, "correlator did not decay");
        for (i, prop) in node_props.iter().enumerate() {
            let x = devectorize(&(prop * &v)).unwrap();
            let c = (&jm * x).trace();
            let t = panel * (k as f64 + 0.5 * (nodes[i] + 1.0));
            samples.push((t, 0.5 * panel * weights[i], c));
        }
        v = &step * v;
        k += 1;
    }
    grid.iter()
        .map(|&w| {
            let g: C = samples
                .iter()
                .map(|&(t, wt, c)| c * C::new(0.0, -w * t).exp() * wt)
                .sum();
            g.re / std::f64::consts::PI
        })
        .collect()
}

/// Solves `(a - mu) x = b` for the eigenvector nearest `mu` by inverse iteration.
fn inverse_iteration(a: &DMatrix<C>, mu: C) -> DVector<C> {
    let n = a.nrows();
    let shifted = a - DMatrix::identity(n, n) * mu;
    let lu = shifted.lu();
    let mut x = DVector::from_fn(n, |i, _| C::new(1.0 + 0.1 * i as f64, 0.3));
    for _ in 0..4 {
        x = lu.solve(&x).expect("shifted matrix singular");
        let nrm = x.norm();
        x /= C::new(nrm, 0.0);
    }
    x
}

/// Spectrum from the simple-pole expansion `sum_mu c_mu / (i w - lambda_mu)`
/// with residues from left and right eigenvectors. `None` when some
/// eigenvector condition number reaches `1e6`.
pub fn eigen_expansion_spectrum(
    block: &DMatrix<C>,
    probe: &DVector<C>,
    source: &DVector<C>,
    grid: &[f64],
) -> Option<Vec<f64>> {
    let lambdas = eigenvalues(block)?;
    let at = block.transpose();
    let mut poles = Vec::new();
    for &lam in &lambdas {
        let mu = lam + C::new(1e-10, 1e-10);
        let r = inverse_iteration(block, mu);
        let l = inverse_iteration(&at, mu);
        let lr: C = l.iter().zip(r.iter()).map(|(a, b)| a * b).sum();
        if lr.norm() == 0.0 || 1.0 / lr.norm() >= 1e6 {
            return None;
        }
        let pr: C = probe.iter().zip(r.iter()).map(|(a, b)| a * b).sum();
        let ls: C = l.iter().zip(source.iter()).map(|(a, b)| a * b).sum();
        poles.push((lam, pr * ls / lr));
    }
    Some(
        grid.iter()
            .map(|&w| {
                let g: C = poles.iter().map(|&(lam, c)| c / (C::new(0.0, w) - lam)).sum();
                g.re / std::f64::consts::PI
            })
            .collect(),
    )
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut k = i;
        while k + 1 < idx.len() && x[idx[k + 1]] == x[idx[i]] {
            k += 1;
        }
        let avg = (i + k) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=k] {
            out[t] = avg;
        }
        i = k + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Model B line `a/D + b (g^2 - d^2)/D^2 + c` written out independently.
pub fn model_b_value(a: f64, b: f64, w0: f64, g: f64, c: f64, w: f64) -> f64 {
    let d = w - w0;
    let den = d * d + g * g;
    a / den + b * (g * g - d * d) / (den * den) + c
}

/// Model B samples with multiplicative Gaussian noise of relative size `sigma`.
pub fn noisy_model_b(
    (a, b, w0, g, c): (f64, f64, f64, f64, f64),
    grid: &[f64],
    sigma: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grid.iter()
        .map(|&w| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            model_b_value(a, b, w0, g, c, w) * (1.0 + sigma * xi)
        })
        .collect()
}
