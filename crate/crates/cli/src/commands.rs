use std::path::Path;

use lepspec::jordan::alpha_beta;
use lepspec::{
    build_liouvillian_generic, ep_diagnostics, frequency_grid, full_spectrum, EPDiagnostics,
    EmissionSolver, FitOptions, JordanBlockSystem, ModelParams, SourceKind, SpectrumTrace, Unfolding,
};
use nalgebra::Vector2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{create_dir, fmt_f64, tag, write_json, CsvFile, DiagnosticsBlock, FitBlock};

pub const EIGS_HEADER: [&str; 6] =
    ["re_lambda", "im_lambda", "re_lambda_over_j", "im_lambda_over_j", "sector_M", "near_degenerate_flag"];
pub const SPECTRUM_HEADER: [&str; 4] = ["omega", "S", "S_fitA", "S_fitB"];
pub const SWEEP_HEADER: [&str; 21] = [
    "p", "j", "source", "r", "delta_bic", "delta_aic", "a_A", "omega0_A", "gamma_A", "c_A", "rss_A",
    "converged_A", "a_B", "omega0_B", "gamma_B", "c_B", "b_B", "rss_B", "converged_B", "converged", "error",
];
pub const EPS_HEADER: [&str; 6] = ["eps", "r", "delta_bic", "delta_aic", "converged", "error"];

/// One CSV per p with every eigenvalue, its sector and its near-degeneracy flag.
pub fn eigs(cfg: &RunConfig) -> Result<()> {
    create_dir(&cfg.out)?;
    let j = cfg.model.j;
    for &p in &cfg.eigs.p {
        let l = build_liouvillian_generic(&cfg.params(j, p)?)?;
        let spec = full_spectrum(&l, cfg.eigs.threshold)?;
        let path = cfg.out.join(format!("eigs_j{}_p{}.csv", tag(j), tag(p)));
        let mut csv = CsvFile::create(path, &EIGS_HEADER)?;
        for ((z, m), flag) in spec.eigenvalues.iter().zip(&spec.sector_label).zip(&spec.near_degenerate) {
            csv.row([
                fmt_f64(z.re),
                fmt_f64(z.im),
                fmt_f64(z.re / j),
                fmt_f64(z.im / j),
                m.to_string(),
                u8::from(*flag).to_string(),
            ])?;
        }
        csv.finish()?;
        eprintln!("eigs j={j} p={p}: {} eigenvalues, {} flagged", spec.len(), spec.flagged_count());
    }
    Ok(())
}

#[derive(Serialize)]
struct ParamsBlock {
    j: f64,
    h: f64,
    gamma: f64,
    gamma0: f64,
    p: f64,
}

impl From<&ModelParams<f64>> for ParamsBlock {
    fn from(m: &ModelParams<f64>) -> Self {
        Self { j: m.spin.as_f64(), h: m.h, gamma: m.gamma, gamma0: m.gamma0, p: m.p }
    }
}

#[derive(Serialize)]
struct GridBlock {
    min: f64,
    max: f64,
    n: usize,
}

impl GridBlock {
    fn of(grid: &[f64]) -> Self {
        Self { min: grid[0], max: grid[grid.len() - 1], n: grid.len() }
    }
}

#[derive(Serialize)]
struct SpectrumSidecar {
    source: String,
    seed: Option<u64>,
    params: ParamsBlock,
    grid: GridBlock,
    sector_used: Option<i64>,
    dropped_fraction: Option<f64>,
    rng: Option<String>,
    peak_omega: Option<f64>,
    #[serde(rename = "fitA")]
    fit_a: Option<FitBlock>,
    #[serde(rename = "fitB")]
    fit_b: Option<FitBlock>,
    diagnostics: Option<DiagnosticsBlock>,
    error: Option<String>,
}

type SourceOutcome = std::result::Result<(SpectrumTrace<f64>, lepspec::Result<EPDiagnostics<f64>>), lepspec::Error>;

fn compute_source(solver: &EmissionSolver<f64>, kind: SourceKind, grid: &[f64], opts: &FitOptions<f64>) -> SourceOutcome {
    let rho = solver.source_state(kind)?;
    let trace = solver.trace(&rho, grid, kind)?;
    let diag = ep_diagnostics(&trace, opts);
    Ok((trace, diag))
}

/// `omega, S, S_fitA, S_fitB`; the fit columns stay empty when the fit failed.
fn write_trace_csv(path: &Path, trace: &SpectrumTrace<f64>, diag: Option<&EPDiagnostics<f64>>) -> Result<()> {
    let mut csv = CsvFile::create(path.to_path_buf(), &SPECTRUM_HEADER)?;
    for (&w, &s) in trace.omegas.iter().zip(&trace.values) {
        let (fa, fb) = match diag {
            Some(d) => (fmt_f64(d.fit_a.eval(w)), fmt_f64(d.fit_b.eval(w))),
            None => (String::new(), String::new()),
        };
        csv.row([fmt_f64(w), fmt_f64(s), fa, fb])?;
    }
    csv.finish()
}

/// Per p and source: the spectrum with both fits as CSV plus a JSON sidecar.
/// A failing source is reported in its sidecar and does not stop the others.
pub fn spectrum(cfg: &RunConfig) -> Result<()> {
    create_dir(&cfg.out)?;
    let j = cfg.model.j;
    let opts = cfg.fit.options();
    let kinds = cfg.sources.kinds();
    let mut failed = 0;
    for &p in &cfg.spectrum.p {
        let params = cfg.params(j, p)?;
        let (lo, hi, n) = cfg.grid_around(params.h, params.gamma);
        let grid = frequency_grid(lo, hi, n).map_err(|e| CliError::Config(e.to_string()))?;
        let l = build_liouvillian_generic(&params)?;
        let solver = EmissionSolver::new(&l)?;
        let outcomes: Vec<SourceOutcome> =
            kinds.par_iter().map(|&kind| compute_source(&solver, kind, &grid, &opts)).collect();

        for (kind, outcome) in kinds.iter().zip(outcomes) {
            let stem = format!("spectrum_j{}_p{}_{}", tag(j), tag(p), kind.label());
            let mut sidecar = SpectrumSidecar {
                source: kind.label(),
                seed: match kind {
                    SourceKind::Random { seed } => Some(*seed),
                    _ => None,
                },
                params: (&params).into(),
                grid: GridBlock::of(&grid),
                sector_used: None,
                dropped_fraction: None,
                rng: None,
                peak_omega: None,
                fit_a: None,
                fit_b: None,
                diagnostics: None,
                error: None,
            };
            match outcome {
                Ok((trace, diag)) => {
                    sidecar.sector_used = Some(trace.sector_used);
                    sidecar.dropped_fraction = Some(trace.dropped_fraction);
                    sidecar.rng = trace.rng.clone();
                    sidecar.peak_omega = Some(trace.omegas[trace.argmax()]);
                    match &diag {
                        Ok(d) => {
                            sidecar.fit_a = Some((&d.fit_a).into());
                            sidecar.fit_b = Some((&d.fit_b).into());
                            sidecar.diagnostics = Some(d.into());
                            eprintln!("spectrum p={p} {}: r = {:.4}, dBIC = {:.2}", kind.label(), d.r, d.delta_bic);
                        }
                        Err(e) => {
                            failed += 1;
                            sidecar.error = Some(e.to_string());
                            eprintln!("spectrum p={p} {}: fit failed: {e}", kind.label());
                        }
                    }
                    write_trace_csv(&cfg.out.join(format!("{stem}.csv")), &trace, diag.as_ref().ok())?;
                }
                Err(e) => {
                    failed += 1;
                    sidecar.error = Some(e.to_string());
                    eprintln!("spectrum p={p} {}: {e}", kind.label());
                }
            }
            write_json(&cfg.out.join(format!("{stem}.json")), &sidecar)?;
        }
    }
    match failed {
        0 => Ok(()),
        k => Err(CliError::Partial(k, cfg.spectrum.p.len() * kinds.len())),
    }
}

/// One sweep row; numeric fields are `None` when the point failed.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub p: f64,
    pub j: f64,
    pub source: String,
    pub diagnostics: std::result::Result<EPDiagnostics<f64>, String>,
}

impl SweepRecord {
    fn fields(&self) -> Vec<String> {
        let mut out = vec![fmt_f64(self.p), fmt_f64(self.j), self.source.clone()];
        match &self.diagnostics {
            Ok(d) => {
                let (a, b) = (FitBlock::from(&d.fit_a), FitBlock::from(&d.fit_b));
                out.extend([d.r, d.delta_bic, d.delta_aic, a.a, a.omega0, a.gamma, a.c, a.rss].map(fmt_f64));
                out.push(a.converged.to_string());
                out.extend([b.a, b.omega0, b.gamma, b.c, b.b.unwrap_or(0.0), b.rss].map(fmt_f64));
                out.push(b.converged.to_string());
                out.push((a.converged && b.converged).to_string());
                out.push(String::new());
            }
            Err(e) => {
                out.extend(std::iter::repeat_n(String::new(), 8));
                out.push("false".into());
                out.extend(std::iter::repeat_n(String::new(), 6));
                out.push("false".into());
                out.push("false".into());
                out.push(e.clone());
            }
        }
        out
    }
}

fn sweep_point(cfg: &RunConfig, p: f64, j: f64, kinds: &[SourceKind], opts: &FitOptions<f64>) -> Vec<SweepRecord> {
    let record = |kind: &SourceKind, diagnostics| SweepRecord { p, j, source: kind.label(), diagnostics };
    let setup = cfg.params(j, p).map_err(|e| e.to_string()).and_then(|params| {
        let (lo, hi, n) = cfg.grid_around(params.h, params.gamma);
        let grid = frequency_grid(lo, hi, n).map_err(|e| e.to_string())?;
        let l = build_liouvillian_generic(&params).map_err(|e| e.to_string())?;
        Ok((grid, l))
    });
    let (grid, l) = match setup {
        Ok(x) => x,
        Err(e) => return kinds.iter().map(|k| record(k, Err(e.clone()))).collect(),
    };
    let solver = match EmissionSolver::new(&l) {
        Ok(s) => s,
        Err(e) => return kinds.iter().map(|k| record(k, Err(e.to_string()))).collect(),
    };
    kinds
        .iter()
        .map(|kind| {
            let diag = match compute_source(&solver, *kind, &grid, opts) {
                Ok((_, Ok(d))) => Ok(d),
                Ok((_, Err(e))) | Err(e) => Err(e.to_string()),
            };
            record(kind, diag)
        })
        .collect()
}

/// Computes every `(p, j, source)` record, in that order.
pub fn sweep_records(cfg: &RunConfig) -> Vec<SweepRecord> {
    let kinds = cfg.sources.kinds();
    let opts = cfg.fit.options();
    let points: Vec<(f64, f64)> =
        cfg.sweep.p.iter().flat_map(|&p| cfg.sweep.j.iter().map(move |&j| (p, j))).collect();
    points
        .par_iter()
        .map(|&(p, j)| sweep_point(cfg, p, j, &kinds, &opts))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Serialize)]
struct Series {
    j: f64,
    source: String,
    p: Vec<f64>,
    r: Vec<f64>,
    delta_bic: Vec<f64>,
}

/// `sweep.csv` with one row per `(p, j, source)` and `sweep_series.json` with
/// `r(p)` and `dBIC(p)` per `j` and source (`null` where the point failed).
pub fn sweep(cfg: &RunConfig) -> Result<()> {
    create_dir(&cfg.out)?;
    let records = sweep_records(cfg);
    let mut csv = CsvFile::create(cfg.out.join("sweep.csv"), &SWEEP_HEADER)?;
    for rec in &records {
        csv.row(rec.fields())?;
    }
    csv.finish()?;

    let mut series = Vec::new();
    for &j in &cfg.sweep.j {
        for kind in cfg.sources.kinds() {
            let label = kind.label();
            let rows: Vec<&SweepRecord> = records.iter().filter(|r| r.j == j && r.source == label).collect();
            let pick = |f: fn(&EPDiagnostics<f64>) -> f64| {
                rows.iter().map(|r| r.diagnostics.as_ref().map_or(f64::NAN, f)).collect()
            };
            series.push(Series {
                j,
                source: label.clone(),
                p: rows.iter().map(|r| r.p).collect(),
                r: pick(|d| d.r),
                delta_bic: pick(|d| d.delta_bic),
            });
        }
    }
    write_json(&cfg.out.join("sweep_series.json"), &series)?;

    let failed = records.iter().filter(|r| r.diagnostics.is_err()).count();
    eprintln!("sweep: {} rows, {failed} failed", records.len());
    Ok(())
}

#[derive(Serialize)]
struct AnalyticBlock {
    alpha: f64,
    beta: f64,
    a: f64,
    b: f64,
    r: f64,
}

#[derive(Serialize)]
struct SyntheticSidecar {
    case: &'static str,
    gamma: f64,
    omega0: f64,
    grid: GridBlock,
    analytic: AnalyticBlock,
    #[serde(rename = "fitA")]
    fit_a: Option<FitBlock>,
    #[serde(rename = "fitB")]
    fit_b: Option<FitBlock>,
    diagnostics: Option<DiagnosticsBlock>,
    error: Option<String>,
}

fn synthetic_case(cfg: &RunConfig, case: &'static str, sys: &JordanBlockSystem<f64>, grid: &[f64]) -> Result<bool> {
    let trace = sys.spectrum_trace(grid)?;
    let diag = ep_diagnostics(&trace, &cfg.fit.options());
    let (alpha, beta) = alpha_beta(sys);
    let amp = sys.line_amplitudes();
    let sidecar = SyntheticSidecar {
        case,
        gamma: sys.gamma(),
        omega0: sys.omega0(),
        grid: GridBlock::of(grid),
        analytic: AnalyticBlock { alpha: alpha.re, beta: beta.re, a: amp.a, b: amp.b, r: amp.ep_weight() },
        fit_a: diag.as_ref().ok().map(|d| (&d.fit_a).into()),
        fit_b: diag.as_ref().ok().map(|d| (&d.fit_b).into()),
        diagnostics: diag.as_ref().ok().map(Into::into),
        error: diag.as_ref().err().map(|e| e.to_string()),
    };
    let stem = format!("synthetic_{case}");
    write_trace_csv(&cfg.out.join(format!("{stem}.csv")), &trace, diag.as_ref().ok())?;
    write_json(&cfg.out.join(format!("{stem}.json")), &sidecar)?;
    match &diag {
        Ok(d) => eprintln!("synthetic {case}: r = {:.6e} (analytic {:.6e})", d.r, amp.ep_weight()),
        Err(e) => eprintln!("synthetic {case}: {e}"),
    }
    Ok(diag.is_ok())
}

/// Jordan-block demonstrations: the exact block, a block without double-pole
/// weight, and the `eps` unfolding sweep toward the exceptional point.
pub fn synthetic(cfg: &RunConfig) -> Result<()> {
    create_dir(&cfg.out)?;
    let s = &cfg.synthetic;
    let (lo, hi, n) = cfg.grid_around(s.omega0, s.gamma);
    let grid = frequency_grid(lo, hi, n).map_err(|e| CliError::Config(e.to_string()))?;
    let mut failed = 0;

    let jordan = JordanBlockSystem::with_real_weights(s.gamma, s.omega0, s.alpha, s.beta)?;
    failed += usize::from(!synthetic_case(cfg, "jordan", &jordan, &grid)?);
    // beta = A0 B1 vanishes when the probe has no r0 component.
    let c = |x: f64| Complex64::new(x, 0.0);
    let beta0 = JordanBlockSystem::new(s.gamma, s.omega0, (c(0.0), c(1.0)), (c(1.0), c(s.alpha)))?;
    failed += usize::from(!synthetic_case(cfg, "beta0", &beta0, &grid)?);

    let probe = Vector2::new(c(1.0), c(0.0));
    let source = Vector2::new(c(s.alpha), c(s.beta));
    let l0 = Complex64::new(-s.gamma, s.omega0);
    let opts = cfg.fit.options();
    let rows: Vec<(f64, lepspec::Result<EPDiagnostics<f64>>)> = s
        .eps
        .par_iter()
        .map(|&eps| {
            let diag = Unfolding::new(l0, eps)
                .and_then(|u| u.spectrum_trace(&probe, &source, &grid))
                .and_then(|tr| ep_diagnostics(&tr, &opts));
            (eps, diag)
        })
        .collect();
    let mut csv = CsvFile::create(cfg.out.join("synthetic_eps.csv"), &EPS_HEADER)?;
    for (eps, diag) in &rows {
        let fields = match diag {
            Ok(d) => vec![
                fmt_f64(*eps),
                fmt_f64(d.r),
                fmt_f64(d.delta_bic),
                fmt_f64(d.delta_aic),
                (d.fit_a.converged && d.fit_b.converged).to_string(),
                String::new(),
            ],
            Err(e) => {
                failed += 1;
                vec![fmt_f64(*eps), String::new(), String::new(), String::new(), "false".into(), e.to_string()]
            }
        };
        csv.row(fields)?;
    }
    csv.finish()?;
    match failed {
        0 => Ok(()),
        k => Err(CliError::Partial(k, rows.len() + 2)),
    }
}
