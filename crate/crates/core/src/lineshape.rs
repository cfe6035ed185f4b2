//! Nested line-shape models and EP diagnostics.
//!
//! Model A is a Lorentzian on a flat offset, `a / (D^2 + g^2) + c`. Model B adds
//! the second-order-pole term `b (g^2 - D^2) / (D^2 + g^2)^2` with `D = w - w0`.
//! Both are fitted by a damped Gauss-Newton (Levenberg-Marquardt) iteration
//! with analytic Jacobians. The half width is optimized as `ln g`, which keeps
//! it positive without a constrained solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::SpectrumTrace;

/// Per-point residual resolution relative to the largest sample. RSS values
/// below `N * (RSS_RESOLUTION * max|y|)^2` are indistinguishable from zero for
/// spectra computed in double precision and are clamped there for `dBIC`/`dAIC`.
pub const RSS_RESOLUTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineModel {
    A,
    B,
}

impl LineModel {
    pub fn n_params(self) -> usize {
        match self {
            Self::A => 4,
            Self::B => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelAParams<T: Real> {
    pub a: T,
    pub omega0: T,
    pub gamma: T,
    pub c: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelBParams<T: Real> {
    pub a: T,
    pub omega0: T,
    pub gamma: T,
    pub c: T,
    pub b: T,
}

impl<T: Real> From<ModelAParams<T>> for ModelBParams<T> {
    fn from(p: ModelAParams<T>) -> Self {
        Self { a: p.a, omega0: p.omega0, gamma: p.gamma, c: p.c, b: T::zero() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum ModelParamsAny<T: Real> {
    A(ModelAParams<T>),
    B(ModelBParams<T>),
}

impl<T: Real> ModelParamsAny<T> {
    pub fn model(&self) -> LineModel {
        match self {
            Self::A(_) => LineModel::A,
            Self::B(_) => LineModel::B,
        }
    }

    /// Model-B view; Model A has `b = 0`.
    pub fn as_b(&self) -> ModelBParams<T> {
        match *self {
            Self::A(p) => p.into(),
            Self::B(p) => p,
        }
    }

    /// `|b| / (|a| + |b|)`, zero when both vanish.
    pub fn ep_weight(&self) -> T {
        let p = self.as_b();
        let denom = p.a.abs() + p.b.abs();
        if denom == T::zero() {
            T::zero()
        } else {
            p.b.abs() / denom
        }
    }

    fn to_vector(self) -> DVector<T> {
        let p = self.as_b();
        let mut v = vec![p.a, p.omega0, p.gamma.ln(), p.c];
        if self.model() == LineModel::B {
            v.push(p.b);
        }
        DVector::from_vec(v)
    }

    fn from_vector(model: LineModel, v: &DVector<T>) -> Self {
        let (a, omega0, gamma, c) = (v[0], v[1], v[2].exp(), v[3]);
        match model {
            LineModel::A => Self::A(ModelAParams { a, omega0, gamma, c }),
            LineModel::B => Self::B(ModelBParams { a, omega0, gamma, c, b: v[4] }),
        }
    }
}

impl<T: Real> From<ModelAParams<T>> for ModelParamsAny<T> {
    fn from(p: ModelAParams<T>) -> Self {
        Self::A(p)
    }
}

impl<T: Real> From<ModelBParams<T>> for ModelParamsAny<T> {
    fn from(p: ModelBParams<T>) -> Self {
        Self::B(p)
    }
}

pub fn eval_model<T: Real>(params: &ModelParamsAny<T>, omega: T) -> T {
    let p = params.as_b();
    let delta = omega - p.omega0;
    let g2 = p.gamma * p.gamma;
    let den = delta * delta + g2;
    p.a / den + p.b * (g2 - delta * delta) / (den * den) + p.c
}

/// Partial derivatives with respect to `(a, w0, ln g, c[, b])`.
fn gradient_row<T: Real>(model: LineModel, v: &DVector<T>, omega: T, row: &mut [T]) {
    let (a, omega0, gamma) = (v[0], v[1], v[2].exp());
    let b = if model == LineModel::B { v[4] } else { T::zero() };
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let delta = omega - omega0;
    let d2 = delta * delta;
    let g2 = gamma * gamma;
    let den = d2 + g2;
    let den2 = den * den;
    let den3 = den2 * den;
    row[0] = T::one() / den;
    row[1] = a * two * delta / den2 + b * two * delta * (three * g2 - d2) / den3;
    row[2] = -a * two * g2 / den2 + b * two * g2 * (three * d2 - g2) / den3;
    row[3] = T::one();
    if model == LineModel::B {
        row[4] = (g2 - d2) / den2;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions<T: Real> {
    /// Window half-width in units of the estimated half width.
    pub window_mult: T,
    /// Multipliers on the estimated half width, one LM run each.
    pub gamma_starts: Vec<T>,
    pub max_iter: usize,
    pub rss_rel_tol: T,
    pub grad_tol: T,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            window_mult: T::lit(10.0),
            gamma_starts: [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|&x| T::lit(x)).collect(),
            max_iter: 500,
            rss_rel_tol: T::lit(1e-12),
            grad_tol: T::lit(1e-10),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult<T: Real> {
    pub model: LineModel,
    pub params: ModelParamsAny<T>,
    pub rss: T,
    pub n_points: usize,
    pub n_params: usize,
    pub converged: bool,
    pub n_iterations: usize,
    pub window: (T, T),
}

impl<T: Real> FitResult<T> {
    pub fn eval(&self, omega: T) -> T {
        eval_model(&self.params, omega)
    }

    /// RSS of the stored parameters over the window points of `trace`.
    pub fn recompute_rss(&self, trace: &SpectrumTrace<T>) -> T {
        let (lo, hi) = self.window;
        trace
            .omegas
            .iter()
            .zip(&trace.values)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .fold(T::zero(), |acc, (&w, &y)| {
                let r = self.eval(w) - y;
                acc + r * r
            })
    }
}

/// `k ln N + N ln(RSS/N)`; `-inf` for a perfect fit.
pub fn bic<T: Real>(fit: &FitResult<T>) -> T {
    information_criterion(fit.rss, fit.n_points, T::lit(fit.n_params as f64) * T::lit(fit.n_points as f64).ln())
}

/// `2k + N ln(RSS/N)`; `-inf` for a perfect fit.
pub fn aic<T: Real>(fit: &FitResult<T>) -> T {
    information_criterion(fit.rss, fit.n_points, T::lit(2.0 * fit.n_params as f64))
}

fn information_criterion<T: Real>(rss: T, n: usize, penalty: T) -> T {
    if rss <= T::zero() {
        return -(T::one() / T::zero());
    }
    let n = T::lit(n as f64);
    penalty + n * (rss / n).ln()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EPDiagnostics<T: Real> {
    pub r: T,
    pub delta_bic: T,
    pub delta_aic: T,
    pub fit_a: FitResult<T>,
    pub fit_b: FitResult<T>,
    pub window: (T, T),
    /// Half width estimated from the raw trace, used to size the window.
    pub gamma_hat: T,
}

struct Window<T> {
    omegas: Vec<T>,
    values: Vec<T>,
    lo: T,
    hi: T,
}

fn select_window<T: Real>(trace: &SpectrumTrace<T>, window: (T, T)) -> Result<Window<T>> {
    let (lo, hi) = window;
    let (omegas, values): (Vec<T>, Vec<T>) = trace
        .omegas
        .iter()
        .zip(&trace.values)
        .filter(|(w, _)| **w >= lo && **w <= hi)
        .map(|(w, v)| (*w, *v))
        .unzip();
    if omegas.len() < 20 {
        return Err(Error::DegenerateWindow(format!(
            "{} points in [{lo}, {hi}], need at least 20",
            omegas.len()
        )));
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(Error::DegenerateWindow("all values equal".into()));
    }
    Ok(Window { omegas, values, lo, hi })
}

fn median<T: Real>(mut xs: Vec<T>) -> T {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) * T::lit(0.5)
    }
}

/// Median of the outer 5% (at least one point) at each end.
fn edge_median<T: Real>(values: &[T]) -> T {
    let k = (values.len() / 20).max(1);
    let mut edge: Vec<T> = values[..k].to_vec();
    edge.extend_from_slice(&values[values.len() - k..]);
    median(edge)
}

fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Half width at half maximum above `baseline`, by linear interpolation.
fn half_width<T: Real>(omegas: &[T], values: &[T], peak: usize, baseline: T) -> Option<T> {
    let level = baseline + (values[peak] - baseline) * T::lit(0.5);
    let crossing = |i: usize, k: usize| {
        // values[i] >= level > values[k]
        let t = (values[i] - level) / (values[i] - values[k]);
        omegas[i] + (omegas[k] - omegas[i]) * t
    };
    let left = (1..=peak).rev().find(|&i| values[i - 1] < level).map(|i| crossing(i, i - 1));
    let right = (peak..values.len() - 1).find(|&i| values[i + 1] < level).map(|i| crossing(i, i + 1));
    let w0 = omegas[peak];
    match (left, right) {
        (Some(l), Some(r)) => Some((r - l) * T::lit(0.5)),
        (Some(l), None) => Some(w0 - l),
        (None, Some(r)) => Some(r - w0),
        (None, None) => None,
    }
    .filter(|g| *g > T::zero())
}

struct Initial<T> {
    omega0: T,
    gamma: T,
    peak: T,
    c: T,
}

fn initial_guess<T: Real>(w: &Window<T>) -> Initial<T> {
    let peak = argmax(&w.values);
    let c = edge_median(&w.values);
    let gamma = half_width(&w.omegas, &w.values, peak, c)
        .unwrap_or_else(|| (w.hi - w.lo) * T::lit(0.1));
    Initial { omega0: w.omegas[peak], gamma, peak: w.values[peak], c }
}

struct LmOutcome<T: Real> {
    params: DVector<T>,
    rss: T,
    converged: bool,
    iterations: usize,
}

fn residuals<T: Real>(model: LineModel, v: &DVector<T>, w: &Window<T>) -> DVector<T> {
    let p = ModelParamsAny::from_vector(model, v);
    DVector::from_iterator(
        w.omegas.len(),
        w.omegas.iter().zip(&w.values).map(|(&x, &y)| eval_model(&p, x) - y),
    )
}

fn levenberg_marquardt<T: Real>(
    model: LineModel,
    start: DVector<T>,
    w: &Window<T>,
    opts: &FitOptions<T>,
) -> LmOutcome<T> {
    let n = w.omegas.len();
    let k = model.n_params();
    let mut params = start;
    let mut res = residuals(model, &params, w);
    let mut rss = res.norm_squared();
    let mut lambda = T::lit(1e-3);
    let mut nu = T::lit(2.0);
    let mut jac = DMatrix::<T>::zeros(n, k);
    let mut row = vec![T::zero(); k];
    let tiny = T::lit(1e-300_f64.max(f64::MIN_POSITIVE));

    for iter in 0..opts.max_iter {
        if rss == T::zero() {
            return LmOutcome { params, rss, converged: true, iterations: iter };
        }
        for (i, &x) in w.omegas.iter().enumerate() {
            gradient_row(model, &params, x, &mut row);
            for (c, val) in row.iter().enumerate() {
                jac[(i, c)] = *val;
            }
        }
        let grad = jac.tr_mul(&res);
        if grad.amax() < opts.grad_tol {
            return LmOutcome { params, rss, converged: true, iterations: iter };
        }
        let jtj = jac.tr_mul(&jac);
        let diag: Vec<T> = (0..k).map(|i| jtj[(i, i)].max(tiny)).collect();

        loop {
            let mut lhs = jtj.clone();
            for (i, d) in diag.iter().enumerate() {
                lhs[(i, i)] += lambda * *d;
            }
            let step = lhs
                .clone()
                .cholesky()
                .map(|ch| ch.solve(&(-&grad)))
                .or_else(|| lhs.lu().solve(&(-&grad)));
            let Some(step) = step else {
                lambda *= nu;
                nu *= T::lit(2.0);
                if lambda > T::lit(1e30) {
                    return LmOutcome { params, rss, converged: true, iterations: iter + 1 };
                }
                continue;
            };
            let trial = &params + &step;
            let trial_res = residuals(model, &trial, w);
            let trial_rss = trial_res.norm_squared();
            // predicted decrease of the local quadratic model
            let scaled: DVector<T> =
                DVector::from_iterator(k, step.iter().zip(&diag).map(|(s, d)| lambda * *d * *s));
            let predicted = step.dot(&(scaled - &grad));
            let actual = rss - trial_rss;
            if trial_rss.is_finite() && actual > T::zero() && predicted > T::zero() {
                let rho = actual / predicted;
                let t = T::lit(2.0) * rho - T::one();
                lambda *= (T::one() - t * t * t).max(T::lit(1.0 / 3.0));
                nu = T::lit(2.0);
                let rel = actual / rss;
                params = trial;
                res = trial_res;
                rss = trial_rss;
                if rel < opts.rss_rel_tol {
                    return LmOutcome { params, rss, converged: true, iterations: iter + 1 };
                }
                break;
            }
            lambda *= nu;
            nu *= T::lit(2.0);
            if lambda > T::lit(1e30) {
                // No descent direction is resolvable in floating point: the
                // iterate is a minimum to working precision.
                return LmOutcome { params, rss, converged: true, iterations: iter + 1 };
            }
        }
    }
    LmOutcome { params, rss, converged: false, iterations: opts.max_iter }
}

fn jacobian<T: Real>(model: LineModel, v: &DVector<T>, w: &Window<T>) -> DMatrix<T> {
    let mut jac = DMatrix::<T>::zeros(w.omegas.len(), model.n_params());
    let mut row = vec![T::zero(); model.n_params()];
    for (i, &x) in w.omegas.iter().enumerate() {
        gradient_row(model, v, x, &mut row);
        for (c, val) in row.iter().enumerate() {
            jac[(i, c)] = *val;
        }
    }
    jac
}

/// Newton steps from an LM optimum, with the Hessian taken by central
/// differences of the analytic gradient `J^T r`.
///
/// The LM stopping rules leave the iterate wherever a tolerance first trips.
/// Polishing drives the gradient itself to zero, so fits of rescaled or shifted
/// data agree to working precision. Gauss-Newton is not enough here: at
/// `b = 0` the Model B Jacobian is rank deficient, because
/// `(g^2 - D^2)/den^2 = 2 g^2/den^2 - 1/den` is a combination of the `a` and
/// `ln g` columns, and only the residual curvature fixes the optimum along
/// that direction. Steps are kept while they shrink and the RSS does not grow
/// beyond rounding.
fn polish<T: Real>(model: LineModel, mut out: LmOutcome<T>, w: &Window<T>) -> LmOutcome<T> {
    let k = model.n_params();
    let gradient = |v: &DVector<T>| jacobian(model, v, w).transpose() * residuals(model, v, w);
    let data_norm = w.values.iter().fold(T::zero(), |acc, &y| acc + y * y).sqrt();
    let mut last_step = T::one() / T::zero();
    for _ in 0..30 {
        if out.rss == T::zero() {
            break;
        }
        // Work in coordinates where each parameter moves the model by a unit-norm vector.
        let jac = jacobian(model, &out.params, w);
        let scales: Vec<T> = (0..k)
            .map(|c| {
                let nrm = jac.column(c).norm();
                if nrm > T::zero() { nrm } else { T::one() }
            })
            .collect();
        let g = gradient(&out.params);
        let mut hess = DMatrix::<T>::zeros(k, k);
        for c in 0..k {
            let h = T::lit(1e-6) * data_norm / scales[c];
            let mut up = out.params.clone();
            let mut down = out.params.clone();
            up[c] += h;
            down[c] -= h;
            let col = (gradient(&up) - gradient(&down)) / (h + h);
            for r in 0..k {
                hess[(r, c)] = col[r] / (scales[r] * scales[c]);
            }
        }
        let hess = (&hess + hess.transpose()) * T::lit(0.5);
        let rhs = DVector::from_fn(k, |r, _| -g[r] / scales[r]);
        let Some(chol) = hess.cholesky() else {
            break;
        };
        let mut step = chol.solve(&rhs);
        for (c, &sc) in scales.iter().enumerate() {
            step[c] /= sc;
        }
        let size = step.iter().zip(out.params.iter()).fold(T::zero(), |acc, (s, p)| {
            acc.max(if *p == T::zero() { s.abs() } else { (*s / *p).abs() })
        });
        if !(size < last_step) {
            break;
        }
        let trial = &out.params + &step;
        let trial_rss = residuals(model, &trial, w).norm_squared();
        if !(trial_rss <= out.rss * (T::one() + T::lit(1e-12))) {
            break;
        }
        out.params = trial;
        out.rss = trial_rss;
        last_step = size;
        if size < T::default_epsilon() {
            break;
        }
    }
    out
}

fn fit_window<T: Real>(
    w: &Window<T>,
    model: LineModel,
    opts: &FitOptions<T>,
    extra_start: Option<ModelParamsAny<T>>,
) -> FitResult<T> {
    let init = initial_guess(w);
    let mut starts: Vec<DVector<T>> = opts
        .gamma_starts
        .iter()
        .map(|&scale| {
            let gamma = init.gamma * scale;
            let a = (init.peak - init.c) * gamma * gamma;
            let p = ModelBParams { a, omega0: init.omega0, gamma, c: init.c, b: T::zero() };
            match model {
                LineModel::A => ModelParamsAny::A(ModelAParams { a, omega0: p.omega0, gamma, c: p.c }),
                LineModel::B => ModelParamsAny::B(p),
            }
            .to_vector()
        })
        .collect();
    if let Some(extra) = extra_start {
        let p = extra.as_b();
        let extra = match model {
            LineModel::A => ModelParamsAny::A(ModelAParams { a: p.a, omega0: p.omega0, gamma: p.gamma, c: p.c }),
            LineModel::B => ModelParamsAny::B(p),
        };
        starts.push(extra.to_vector());
    }

    let mut best: Option<LmOutcome<T>> = None;
    for start in starts {
        let out = levenberg_marquardt(model, start, w, opts);
        let better = match &best {
            None => true,
            Some(b) => out.rss.is_finite() && (out.rss < b.rss || !b.rss.is_finite()),
        };
        if better {
            best = Some(out);
        }
    }
    let best = polish(model, best.expect("at least one start"), w);
    FitResult {
        model,
        params: ModelParamsAny::from_vector(model, &best.params),
        rss: best.rss,
        n_points: w.omegas.len(),
        n_params: model.n_params(),
        converged: best.converged,
        n_iterations: best.iterations,
        window: (w.lo, w.hi),
    }
}

/// Least-squares fit of `model` to the trace samples inside `window`. Model B
/// is also started from the Model A optimum, so its RSS never exceeds it.
pub fn fit<T: Real>(
    trace: &SpectrumTrace<T>,
    model: LineModel,
    window: (T, T),
    opts: &FitOptions<T>,
) -> Result<FitResult<T>> {
    let w = select_window(trace, window)?;
    Ok(match model {
        LineModel::A => fit_window(&w, model, opts, None),
        LineModel::B => nested_b(&w, &fit_window(&w, LineModel::A, opts, None), opts),
    })
}

/// Model B fit that also starts from the Model A optimum. If rounding leaves
/// it above Model A, the A optimum itself (with `b = 0`) is returned.
fn nested_b<T: Real>(w: &Window<T>, fit_a: &FitResult<T>, opts: &FitOptions<T>) -> FitResult<T> {
    let fit_b = fit_window(w, LineModel::B, opts, Some(fit_a.params));
    if fit_b.rss <= fit_a.rss {
        return fit_b;
    }
    FitResult {
        model: LineModel::B,
        params: ModelParamsAny::B(fit_a.params.as_b()),
        n_params: LineModel::B.n_params(),
        ..fit_a.clone()
    }
}

/// Estimated half width and peak position of the raw trace.
pub fn estimate_peak<T: Real>(trace: &SpectrumTrace<T>) -> Result<(T, T)> {
    if trace.values.len() < 3 {
        return Err(Error::DegenerateWindow("trace too short".into()));
    }
    let max = trace.values[trace.argmax()];
    let med = median(trace.values.clone());
    if !(max > T::lit(3.0) * med) || max <= T::zero() {
        return Err(Error::NoPeak { max: max.as_f64(), median: med.as_f64() });
    }
    let peak = trace.argmax();
    let baseline = edge_median(&trace.values).min(med);
    let gamma = half_width(&trace.omegas, &trace.values, peak, baseline).ok_or_else(|| {
        Error::DegenerateWindow("no half-maximum crossing".into())
    })?;
    Ok((trace.omegas[peak], gamma))
}

/// Fits both models in an automatic window around the dominant peak and
/// compares them.
pub fn ep_diagnostics<T: Real>(trace: &SpectrumTrace<T>, opts: &FitOptions<T>) -> Result<EPDiagnostics<T>> {
    let (omega_peak, gamma_hat) = estimate_peak(trace)?;
    let half = opts.window_mult * gamma_hat;
    let w = select_window(trace, (omega_peak - half, omega_peak + half))?;
    let fit_a = fit_window(&w, LineModel::A, opts, None);
    let fit_b = nested_b(&w, &fit_a, opts);

    let ymax = w.values.iter().fold(T::zero(), |acc, y| acc.max(y.abs()));
    let n = T::lit(w.omegas.len() as f64);
    let floor = n * (T::lit(RSS_RESOLUTION) * ymax).powi(2);
    let clamp = |f: &FitResult<T>| FitResult { rss: f.rss.max(floor), ..f.clone() };
    let (ca, cb) = (clamp(&fit_a), clamp(&fit_b));

    Ok(EPDiagnostics {
        r: fit_b.params.ep_weight(),
        delta_bic: bic(&cb) - bic(&ca),
        delta_aic: aic(&cb) - aic(&ca),
        window: (w.lo, w.hi),
        fit_a,
        fit_b,
        gamma_hat,
    })
}
