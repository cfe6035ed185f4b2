//! TOML run configuration. Every key is optional; missing keys take the
//! defaults below, unknown keys are rejected. `lepspec.toml` at the repository
//! root spells out every default.

use std::path::{Path, PathBuf};

use lepspec::{FitOptions, ModelParams, SourceKind, SpinLength};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub out: PathBuf,
    pub model: ModelSection,
    pub grid: GridSection,
    pub sources: SourceSection,
    pub fit: FitSection,
    pub eigs: EigsSection,
    pub spectrum: SpectrumSection,
    pub sweep: SweepSection,
    pub synthetic: SyntheticSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            model: ModelSection::default(),
            grid: GridSection::default(),
            sources: SourceSection::default(),
            fit: FitSection::default(),
            eigs: EigsSection::default(),
            spectrum: SpectrumSection::default(),
            sweep: SweepSection::default(),
            synthetic: SyntheticSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub j: f64,
    pub h: f64,
    pub gamma: f64,
    pub gamma0: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { j: 20.0, h: 1.0, gamma: 0.1, gamma0: 0.0 }
    }
}

/// Uniform frequency grid. Without `min`/`max` the range is `h -+ 50 gamma`
/// (`omega0 -+ 50 gamma` for the synthetic runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { min: None, max: None, n: 2001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    pub steady: bool,
    pub infinite_temperature: bool,
    pub random_seeds: Vec<u64>,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self { steady: true, infinite_temperature: true, random_seeds: vec![1, 2, 3] }
    }
}

impl SourceSection {
    pub fn kinds(&self) -> Vec<SourceKind> {
        let mut out = Vec::new();
        if self.steady {
            out.push(SourceKind::Steady);
        }
        if self.infinite_temperature {
            out.push(SourceKind::InfiniteTemperature);
        }
        out.extend(self.random_seeds.iter().map(|&seed| SourceKind::Random { seed }));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub window_mult: f64,
    /// Starting half widths as multiples of the estimated one; one LM run each.
    pub gamma_starts: Vec<f64>,
    pub max_iter: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitOptions::<f64>::default();
        Self { window_mult: d.window_mult, gamma_starts: d.gamma_starts, max_iter: d.max_iter }
    }
}

impl FitSection {
    pub fn options(&self) -> FitOptions<f64> {
        FitOptions {
            window_mult: self.window_mult,
            gamma_starts: self.gamma_starts.clone(),
            max_iter: self.max_iter,
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigsSection {
    pub p: Vec<f64>,
    /// Pairs of raw eigenvalues closer than this are flagged.
    pub threshold: f64,
}

impl Default for EigsSection {
    fn default() -> Self {
        Self { p: vec![0.0, 0.5, 0.99], threshold: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub p: Vec<f64>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { p: vec![0.2, 0.9] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub p: Vec<f64>,
    pub j: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let mut p: Vec<f64> = (0..10).map(|k| k as f64 / 10.0).collect();
        p.extend([0.95, 0.99]);
        Self { p, j: vec![5.0, 10.0, 20.0] }
    }
}

/// Closed-form Jordan-block runs: the `eps` unfolding sweep, the exact block,
/// and a block with no double-pole weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    pub gamma: f64,
    pub omega0: f64,
    /// Simple-pole weight.
    pub alpha: f64,
    /// Double-pole weight.
    pub beta: f64,
    pub eps: Vec<f64>,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let mut eps: Vec<f64> = (0..12).map(|k| 0.05 * 0.5f64.powi(k)).collect();
        eps.push(0.0);
        Self { gamma: 0.1, omega0: 1.0, alpha: 1.0, beta: 0.5, eps }
    }
}

/// Command-line values that replace config entries when given.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub j: Option<Vec<f64>>,
    pub p: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub gamma0: Option<f64>,
    pub h: Option<f64>,
    pub threshold: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<Vec<u64>>,
    pub window_mult: Option<f64>,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub grid_n: Option<usize>,
}

/// Which p (and j) list an override applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Eigs,
    Spectrum,
    Sweep,
    Synthetic,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn apply(&mut self, o: &Overrides, target: Target) -> Result<()> {
        if let Some(js) = &o.j {
            if target == Target::Sweep {
                self.sweep.j = js.clone();
            } else if let [j] = js.as_slice() {
                self.model.j = *j;
            } else {
                return Err(CliError::Config("--j takes a single value outside `sweep`".into()));
            }
        }
        if let Some(ps) = &o.p {
            match target {
                Target::Eigs => self.eigs.p = ps.clone(),
                Target::Spectrum => self.spectrum.p = ps.clone(),
                Target::Sweep => self.sweep.p = ps.clone(),
                Target::Synthetic => return Err(CliError::Config("--p has no meaning for `synthetic`".into())),
            }
        }
        if let Some(g) = o.gamma {
            self.model.gamma = g;
        }
        if let Some(g) = o.gamma0 {
            self.model.gamma0 = g;
        }
        if let Some(h) = o.h {
            self.model.h = h;
        }
        if let Some(t) = o.threshold {
            self.eigs.threshold = t;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(seeds) = &o.seed {
            self.sources.random_seeds = seeds.clone();
        }
        if let Some(w) = o.window_mult {
            self.fit.window_mult = w;
        }
        if o.grid_min.is_some() {
            self.grid.min = o.grid_min;
        }
        if o.grid_max.is_some() {
            self.grid.max = o.grid_max;
        }
        if let Some(n) = o.grid_n {
            self.grid.n = n;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let m = &self.model;
        for (name, x) in [("model.h", m.h), ("model.gamma", m.gamma), ("model.gamma0", m.gamma0)] {
            if !x.is_finite() {
                return bad(format!("{name} = {x} is not finite"));
            }
        }
        if !(m.gamma > 0.0) {
            return bad(format!("model.gamma = {} must be positive", m.gamma));
        }
        if m.gamma0 < 0.0 {
            return bad(format!("model.gamma0 = {} must be nonnegative", m.gamma0));
        }
        spin(m.j)?;
        for &j in &self.sweep.j {
            spin(j)?;
        }
        for (name, ps) in [("eigs.p", &self.eigs.p), ("spectrum.p", &self.spectrum.p), ("sweep.p", &self.sweep.p)] {
            if ps.is_empty() {
                return bad(format!("{name} is empty"));
            }
            if let Some(p) = ps.iter().find(|p| !(p.abs() <= 1.0)) {
                return bad(format!("{name} contains {p}; need |p| <= 1"));
            }
        }
        if self.sweep.j.is_empty() {
            return bad("sweep.j is empty".into());
        }
        if !(self.eigs.threshold > 0.0) {
            return bad(format!("eigs.threshold = {} must be positive", self.eigs.threshold));
        }
        let g = &self.grid;
        if g.n < 20 {
            return bad(format!("grid.n = {} is below the 20 points a fit needs", g.n));
        }
        if let (Some(lo), Some(hi)) = (g.min, g.max) {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("grid range [{lo}, {hi}] is empty or not finite"));
            }
        }
        let f = &self.fit;
        if !(f.window_mult > 0.0) || !f.window_mult.is_finite() {
            return bad(format!("fit.window_mult = {} must be positive", f.window_mult));
        }
        if f.gamma_starts.is_empty() || f.gamma_starts.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return bad("fit.gamma_starts must be a nonempty list of positive numbers".into());
        }
        if f.max_iter == 0 {
            return bad("fit.max_iter must be positive".into());
        }
        if self.sources.kinds().is_empty() {
            return bad("no sources selected".into());
        }
        let s = &self.synthetic;
        if !(s.gamma > 0.0) || !s.omega0.is_finite() || !s.alpha.is_finite() || !s.beta.is_finite() {
            return bad("synthetic needs gamma > 0 and finite omega0, alpha, beta".into());
        }
        if s.eps.is_empty() || s.eps.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return bad("synthetic.eps must be a nonempty list of nonnegative numbers".into());
        }
        Ok(())
    }

    pub fn params(&self, j: f64, p: f64) -> Result<ModelParams<f64>> {
        let m = &self.model;
        ModelParams::new(spin(j)?, m.h, m.gamma, m.gamma0, p).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Grid centered on `center` unless the config fixes its ends.
    pub fn grid_around(&self, center: f64, gamma: f64) -> (f64, f64, usize) {
        let half = 50.0 * gamma;
        (
            self.grid.min.unwrap_or(center - half),
            self.grid.max.unwrap_or(center + half),
            self.grid.n,
        )
    }
}

fn spin(j: f64) -> Result<SpinLength> {
    SpinLength::from_j(j).map_err(|_| CliError::Config(format!("j = {j} is not a positive (half-)integer")))
}
