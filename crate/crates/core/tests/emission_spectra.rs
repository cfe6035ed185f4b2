mod support;

use lepspec::spectral::default_grid;
use lepspec::{
    build_liouvillian_generic, build_spin_ops, ep_diagnostics, frequency_grid,
    random_full_rank_state, vectorize, EmissionSolver, FitOptions, SourceKind,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use support::{eigen_expansion_spectrum, params, time_domain_spectrum};

fn complexify(m: &DMatrix<f64>) -> DMatrix<C> {
    m.map(|x| C::new(x, 0.0))
}

#[test]
fn resolvent_matches_time_domain_correlator() {
    for p in [0.2, 0.9] {
        let par = params(2.0, 1.0, 0.1, 0.0, p);
        let l = build_liouvillian_generic(&par).unwrap();
        let solver = EmissionSolver::new(&l).unwrap();
        let grid = frequency_grid(par.h - 5.0, par.h + 5.0, 401).unwrap();
        for kind in [SourceKind::Steady, SourceKind::InfiniteTemperature] {
            let rho = solver.source_state(kind).unwrap();
            let fast = solver.trace(&rho, &grid, kind).unwrap();
            let slow = time_domain_spectrum(&l, &rho, &grid);
            let worst = fast.values.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst <= 1e-6, "p={p} {kind:?}: {worst}");
        }
    }
}

#[test]
fn full_space_and_sector_resolvents_agree() {
    for (j, p) in [(1.0, 0.3), (2.0, 0.9), (5.0, 0.5)] {
        let par = params(j, 1.0, 0.1, 0.02, p);
        let l = build_liouvillian_generic(&par).unwrap();
        let solver = EmissionSolver::new(&l).unwrap();
        let grid = frequency_grid(0.0, 2.0, 41).unwrap();
        for kind in [SourceKind::Steady, SourceKind::InfiniteTemperature] {
            let x = solver.source_vector(&solver.source_state(kind).unwrap()).unwrap();
            assert!(solver.off_sector_fraction(&x) < 1e-12);
            let a = solver.sector_resolvent(&x, &grid).unwrap();
            let b = solver.full_resolvent(&x, &grid).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).norm() <= 1e-10 * u.norm().max(1.0), "j={j} p={p}");
            }
        }
    }
}

#[test]
fn steady_source_has_no_off_sector_weight_at_j20() {
    for p in [0.2, 0.9] {
        let l = build_liouvillian_generic(&params(20.0, 1.0, 0.1, 0.0, p)).unwrap();
        let solver = EmissionSolver::new(&l).unwrap();
        let x = solver.source_vector(&solver.source_state(SourceKind::Steady).unwrap()).unwrap();
        assert!(solver.off_sector_fraction(&x) < 1e-12);
    }
}

#[test]
fn resolvent_matches_pole_expansion_for_small_spins() {
    let mut checked = 0;
    for j in [0.5, 1.0, 1.5, 2.0] {
        for p in [0.0, 0.4, 0.8] {
            let par = params(j, 1.0, 0.1, 0.03, p);
            let l = build_liouvillian_generic(&par).unwrap();
            let solver = EmissionSolver::new(&l).unwrap();
            let grid = frequency_grid(0.0, 2.0, 81).unwrap();
            let sector = solver.decomposition().sector(1).unwrap();
            let ops = build_spin_ops::<f64>(par.spin);
            let probe = sector.restrict(&vectorize(&complexify(&ops.jm.transpose())).unwrap());
            for kind in [SourceKind::Steady, SourceKind::InfiniteTemperature] {
                let rho = solver.source_state(kind).unwrap();
                let src = sector.restrict(&solver.source_vector(&rho).unwrap());
                let Some(expected) = eigen_expansion_spectrum(&sector.block, &probe, &src, &grid)
                else {
                    continue;
                };
                let got = solver.trace(&rho, &grid, kind).unwrap();
                for (a, b) in got.values.iter().zip(&expected) {
                    assert!((a - b).abs() <= 1e-8, "j={j} p={p} {kind:?}: {a} vs {b}");
                }
                checked += 1;
            }
        }
    }
    assert!(checked >= 16, "only {checked} diagonalizable cases");
}

#[test]
fn conjugate_partner_cancels_imaginary_part() {
    // conj Tr[J- (iw - L)^-1 (rho J+)] = Tr[J+ (-iw - L)^-1 (J- rho)], which lives in M = -1.
    for p in [0.2, 0.9] {
        let par = params(2.0, 1.0, 0.1, 0.0, p);
        let l = build_liouvillian_generic(&par).unwrap();
        let solver = EmissionSolver::new(&l).unwrap();
        let ops = build_spin_ops::<f64>(par.spin);
        let (jp, jm) = (complexify(&ops.jp), complexify(&ops.jm));
        let minus = solver.decomposition().sector(-1).unwrap();
        let grid = frequency_grid(0.0, 2.0, 101).unwrap();
        for kind in [SourceKind::Steady, SourceKind::InfiniteTemperature] {
            let rho = solver.source_state(kind).unwrap();
            let g = solver.sector_resolvent(&solver.source_vector(&rho).unwrap(), &grid).unwrap();
            let src = minus.restrict(&vectorize(&(&jm * &rho)).unwrap());
            let probe = minus.restrict(&vectorize(&jp.transpose()).unwrap());
            let n = minus.dim();
            for (gi, &w) in grid.iter().enumerate() {
                let shifted = DMatrix::<C>::identity(n, n) * C::new(0.0, -w) - &minus.block;
                let x: DVector<C> = shifted.lu().solve(&src).unwrap();
                let partner: C = probe.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                let residue = (g[gi] + partner).im;
                assert!(residue.abs() <= 1e-12 * g[gi].norm().max(1.0), "p={p} w={w}: {residue}");
            }
        }
    }
}

#[test]
fn spectra_vanish_in_the_tails() {
    // A Lorentzian sits at 1/(1 + k^2) of its peak k half-widths out, so the
    // 1e-3 level is reached near k = 32; check k = 40 and the 1/k^2 falloff.
    for p in [0.2, 0.9] {
        let par = params(5.0, 1.0, 0.1, 0.0, p);
        let l = build_liouvillian_generic(&par).unwrap();
        let solver = EmissionSolver::new(&l).unwrap();
        let grid = default_grid(&par).unwrap();
        for kind in [SourceKind::Steady, SourceKind::InfiniteTemperature] {
            let rho = solver.source_state(kind).unwrap();
            let tr = solver.trace(&rho, &grid, kind).unwrap();
            let g = ep_diagnostics(&tr, &FitOptions::default()).unwrap().gamma_hat;
            let peak = tr.values[tr.argmax()];
            let far = [par.h - 40.0 * g, par.h - 20.0 * g, par.h + 20.0 * g, par.h + 40.0 * g];
            let v = solver.trace(&rho, &far, kind).unwrap().values;
            for x in [v[0], v[3]] {
                assert!(x.abs() < 1e-3 * peak, "p={p} {kind:?}: {x} vs peak {peak}");
            }
            assert!(v[0].abs() < v[1].abs() && v[3].abs() < v[2].abs());
            for x in &v {
                assert!(x.abs() < 4e-3 * peak);
            }
        }
    }
}

#[test]
fn dominant_peak_sits_at_the_field_for_every_source() {
    for p in [0.2, 0.9] {
        let par = params(20.0, 1.0, 0.1, 0.0, p);
        let l = build_liouvillian_generic(&par).unwrap();
        let solver = EmissionSolver::new(&l).unwrap();
        let grid = default_grid(&par).unwrap();
        let step = grid[1] - grid[0];
        for kind in [
            SourceKind::Steady,
            SourceKind::InfiniteTemperature,
            SourceKind::Random { seed: 1 },
            SourceKind::Random { seed: 2 },
        ] {
            let tr = solver.trace(&solver.source_state(kind).unwrap(), &grid, kind).unwrap();
            assert!((tr.omegas[tr.argmax()] - par.h).abs() <= step, "p={p} {kind:?}");
        }
    }
}

#[test]
fn random_sources_track_infinite_temperature() {
    let par = params(20.0, 1.0, 0.1, 0.0, 0.9);
    let l = build_liouvillian_generic(&par).unwrap();
    let solver = EmissionSolver::new(&l).unwrap();
    let grid = default_grid(&par).unwrap();
    let flat = solver.trace(&solver.source_state(SourceKind::InfiniteTemperature).unwrap(), &grid, SourceKind::InfiniteTemperature).unwrap();
    let peak = flat.values.iter().cloned().fold(0.0, f64::max);
    for seed in 1..=3 {
        let rho = random_full_rank_state::<f64>(41, seed);
        let tr = solver.trace(&rho, &grid, SourceKind::Random { seed }).unwrap();
        assert!(tr.dropped_fraction > 0.0 && tr.dropped_fraction < 1.0);
        let dev = tr.values.iter().zip(&flat.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 0.1 * peak, "seed {seed}: {dev}");
    }
}
