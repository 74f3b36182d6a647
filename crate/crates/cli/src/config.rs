//! `key = value` run configuration with `[grid]`, `[scheme]`, `[noise]`,
//! `[study]` and `[output]` sections.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use penproj::experiments::{InitialCondition, NoiseSpec, StudyConfig, ThresholdRule};
use penproj::noise::NoiseModel;
use penproj::schemes::{Advection, Scheme, SchemeParams, SolverOpts};
use penproj::spectral::Grid;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Environment variable overriding `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "PENPROJ_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialKind {
    Zero,
    TaylorGreen,
    Random,
}

impl InitialKind {
    fn name(self) -> &'static str {
        match self {
            InitialKind::Zero => "zero",
            InitialKind::TaylorGreen => "taylor-green",
            InitialKind::Random => "random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdKind {
    Quantile,
    Schedule,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSection {
    pub length: f64,
    pub n: usize,
    pub pad: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSection {
    pub scheme: Scheme,
    pub nu: f64,
    pub horizon: f64,
    pub steps: usize,
    pub eta: f64,
    pub alpha: f64,
    /// `None` couples `ε = k^η`.
    pub epsilon: Option<f64>,
    pub lagged_advection: bool,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub divergence_guard: f64,
    pub initial: InitialKind,
    pub initial_amplitude: f64,
    pub initial_seed: u64,
    pub initial_decay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSection {
    pub enabled: bool,
    /// `None` means `min(8, N/4)`.
    pub cutoff: Option<usize>,
    pub gamma: f64,
    pub seed: u64,
    pub path: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudySection {
    pub levels: Vec<usize>,
    pub reference_steps: usize,
    pub paths: usize,
    pub rate_r: f64,
    pub sample_sets: bool,
    pub thresholds: ThresholdKind,
    pub threshold_quantile: f64,
    pub schedule_mu: f64,
    pub noise_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: GridSection,
    pub scheme: SchemeSection,
    pub noise: NoiseSection,
    pub study: StudySection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridSection {
                length: 2.0 * std::f64::consts::PI,
                n: 32,
                pad: Grid::DEFAULT_PAD,
            },
            scheme: SchemeSection {
                scheme: Scheme::Penalty,
                nu: 1.0,
                horizon: 0.5,
                steps: 64,
                eta: 0.4,
                alpha: 2.0,
                epsilon: None,
                lagged_advection: false,
                picard_tol: 1e-11,
                picard_max_iter: 100,
                divergence_guard: 1e3,
                initial: InitialKind::Random,
                initial_amplitude: 1.0,
                initial_seed: 7,
                initial_decay: 2.0,
            },
            noise: NoiseSection {
                enabled: true,
                cutoff: None,
                gamma: NoiseModel::DEFAULT_GAMMA,
                seed: 20_240_601,
                path: 0,
            },
            study: StudySection {
                levels: vec![16, 32, 64, 128],
                reference_steps: 1024,
                paths: 64,
                rate_r: 0.2,
                sample_sets: false,
                thresholds: ThresholdKind::Quantile,
                threshold_quantile: 0.9,
                schedule_mu: 0.1,
                noise_samples: 1000,
            },
            output: OutputSection {
                dir: PathBuf::from("out"),
            },
        }
    }
}

const SECTIONS: [&str; 5] = ["grid", "scheme", "noise", "study", "output"];

fn number<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("cannot parse `{v}` as a number"))
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected `true` or `false`, got `{v}`")),
    }
}

fn auto_or<T: FromStr>(v: &str) -> Result<Option<T>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        number(v).map(Some)
    }
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

enum SetError {
    Unknown,
    Bad(String),
}

impl From<String> for SetError {
    fn from(s: String) -> Self {
        SetError::Bad(s)
    }
}

impl RunConfig {
    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<(), SetError> {
        let g = &mut self.grid;
        let s = &mut self.scheme;
        let n = &mut self.noise;
        let st = &mut self.study;
        match (section, key) {
            ("grid", "length") => g.length = number(v)?,
            ("grid", "n") => g.n = number(v)?,
            ("grid", "pad") => g.pad = number(v)?,
            ("scheme", "scheme") => {
                s.scheme = v.parse().map_err(|e: penproj::Error| e.to_string())?
            }
            ("scheme", "nu") => s.nu = number(v)?,
            ("scheme", "horizon") => s.horizon = number(v)?,
            ("scheme", "steps") => s.steps = number(v)?,
            ("scheme", "eta") => s.eta = number(v)?,
            ("scheme", "alpha") => s.alpha = number(v)?,
            ("scheme", "epsilon") => s.epsilon = auto_or(v)?,
            ("scheme", "lagged_advection") => s.lagged_advection = boolean(v)?,
            ("scheme", "picard_tol") => s.picard_tol = number(v)?,
            ("scheme", "picard_max_iter") => s.picard_max_iter = number(v)?,
            ("scheme", "divergence_guard") => s.divergence_guard = number(v)?,
            ("scheme", "initial") => {
                s.initial = match v {
                    "zero" => InitialKind::Zero,
                    "taylor-green" => InitialKind::TaylorGreen,
                    "random" => InitialKind::Random,
                    _ => {
                        return Err(
                            format!("expected zero, taylor-green or random, got `{v}`").into()
                        )
                    }
                }
            }
            ("scheme", "initial_amplitude") => s.initial_amplitude = number(v)?,
            ("scheme", "initial_seed") => s.initial_seed = number(v)?,
            ("scheme", "initial_decay") => s.initial_decay = number(v)?,
            ("noise", "enabled") => n.enabled = boolean(v)?,
            ("noise", "cutoff") => n.cutoff = auto_or(v)?,
            ("noise", "gamma") => n.gamma = number(v)?,
            ("noise", "seed") => n.seed = number(v)?,
            ("noise", "path") => n.path = number(v)?,
            ("study", "levels") => {
                st.levels = v
                    .split(',')
                    .map(|x| number(x.trim()))
                    .collect::<Result<_, _>>()?
            }
            ("study", "reference_steps") => st.reference_steps = number(v)?,
            ("study", "paths") => st.paths = number(v)?,
            ("study", "rate_r") => st.rate_r = number(v)?,
            ("study", "sample_sets") => st.sample_sets = boolean(v)?,
            ("study", "thresholds") => {
                st.thresholds = match v {
                    "quantile" => ThresholdKind::Quantile,
                    "schedule" => ThresholdKind::Schedule,
                    _ => return Err(format!("expected quantile or schedule, got `{v}`").into()),
                }
            }
            ("study", "threshold_quantile") => st.threshold_quantile = number(v)?,
            ("study", "schedule_mu") => st.schedule_mu = number(v)?,
            ("study", "noise_samples") => st.noise_samples = number(v)?,
            ("output", "dir") => self.output.dir = PathBuf::from(unquote(v)),
            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }

    /// Applies one `section.key=value` override. `line` is reported in errors.
    pub fn apply_override(&mut self, assignment: &str, line: usize) -> CliResult<()> {
        let (lhs, v) = assignment.split_once('=').ok_or_else(|| CliError::Syntax {
            line,
            message: format!("expected `section.key=value`, got `{assignment}`"),
        })?;
        let (section, key) = lhs.trim().split_once('.').ok_or_else(|| CliError::Syntax {
            line,
            message: format!("expected `section.key`, got `{}`", lhs.trim()),
        })?;
        self.assign(section, key, v.trim(), line)
    }

    fn assign(&mut self, section: &str, key: &str, v: &str, line: usize) -> CliResult<()> {
        match self.set(section, key, v) {
            Ok(()) => Ok(()),
            Err(SetError::Unknown) => Err(CliError::UnknownKey {
                line,
                key: format!("{section}.{key}"),
            }),
            Err(SetError::Bad(reason)) => Err(CliError::Range {
                key: format!("{section}.{key}"),
                reason,
            }),
        }
    }

    /// Reads `text` on top of the defaults. Call [`validate`](Self::validate)
    /// after applying any overrides.
    pub fn parse_unvalidated(text: &str) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| CliError::Syntax {
                    line,
                    message: format!("unterminated section header `{body}`"),
                })?;
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(CliError::Syntax {
                        line,
                        message: format!("unknown section `[{name}]`"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| CliError::Syntax {
                line,
                message: format!("expected `key = value`, got `{body}`"),
            })?;
            let key = key.trim();
            let sec = section.as_deref().ok_or_else(|| CliError::Syntax {
                line,
                message: format!("key `{key}` appears before any section header"),
            })?;
            if key.is_empty() {
                return Err(CliError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            if !seen.insert(format!("{sec}.{key}")) {
                return Err(CliError::Syntax {
                    line,
                    message: format!("duplicate key `{sec}.{key}`"),
                });
            }
            cfg.assign(sec, key, value.trim(), line)?;
        }
        Ok(cfg)
    }

    /// Parses and validates.
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg = Self::parse_unvalidated(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let range = |key: &str, reason: String| CliError::Range {
            key: key.into(),
            reason,
        };
        self.grid_obj()?;
        let s = &self.scheme;
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            return Err(range(
                "scheme.horizon",
                format!("must be > 0, got {}", s.horizon),
            ));
        }
        if s.steps == 0 {
            return Err(range("scheme.steps", "must be >= 1".into()));
        }
        self.scheme_params(s.steps)?;
        self.solver_opts().validate()?;
        if !(s.initial_decay >= 0.0 && s.initial_decay.is_finite()) {
            return Err(range("scheme.initial_decay", "must be >= 0".into()));
        }
        if !s.initial_amplitude.is_finite() {
            return Err(range("scheme.initial_amplitude", "must be finite".into()));
        }
        self.noise_model()?;
        let st = &self.study;
        if st.levels.is_empty() || st.levels.contains(&0) {
            return Err(range("study.levels", "need positive step counts".into()));
        }
        if st.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(range("study.levels", "must be strictly increasing".into()));
        }
        if let Some(m) = st
            .levels
            .iter()
            .find(|&&m| !st.reference_steps.is_multiple_of(m))
        {
            return Err(range(
                "study.levels",
                format!(
                    "{m} does not divide study.reference_steps = {}",
                    st.reference_steps
                ),
            ));
        }
        if st.paths == 0 {
            return Err(range("study.paths", "must be >= 1".into()));
        }
        if !(st.rate_r > 0.0 && st.rate_r.is_finite()) {
            return Err(range("study.rate_r", "must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&st.threshold_quantile) {
            return Err(range(
                "study.threshold_quantile",
                "must lie in [0, 1]".into(),
            ));
        }
        if !(st.schedule_mu > 0.0 && st.schedule_mu.is_finite()) {
            return Err(range("study.schedule_mu", "must be > 0".into()));
        }
        if st.noise_samples == 0 {
            return Err(range("study.noise_samples", "must be >= 1".into()));
        }
        if self.output.dir.as_os_str().is_empty() {
            return Err(range("output.dir", "must not be empty".into()));
        }
        Ok(())
    }

    /// Stable text form: every key in a fixed order with shortest
    /// round-trip number formatting.
    pub fn canonical(&self) -> String {
        let mut o = self.computational_canonical();
        let _ = write!(o, "[output]\ndir = \"{}\"\n", self.output.dir.display());
        o
    }

    /// Canonical form of every section that affects results.
    fn computational_canonical(&self) -> String {
        let mut o = String::new();
        let g = &self.grid;
        let s = &self.scheme;
        let n = &self.noise;
        let st = &self.study;
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let _ = write!(
            o,
            "[grid]\nlength = {:?}\nn = {}\npad = {:?}\n\n",
            g.length, g.n, g.pad
        );
        let _ = write!(
            o,
            "[scheme]\nscheme = {}\nnu = {:?}\nhorizon = {:?}\nsteps = {}\neta = {:?}\nalpha = {:?}\n\
             epsilon = {}\nlagged_advection = {}\npicard_tol = {:?}\npicard_max_iter = {}\n\
             divergence_guard = {:?}\ninitial = {}\ninitial_amplitude = {:?}\ninitial_seed = {}\n\
             initial_decay = {:?}\n\n",
            s.scheme,
            s.nu,
            s.horizon,
            s.steps,
            s.eta,
            s.alpha,
            opt(s.epsilon.map(|e| format!("{e:?}"))),
            s.lagged_advection,
            s.picard_tol,
            s.picard_max_iter,
            s.divergence_guard,
            s.initial.name(),
            s.initial_amplitude,
            s.initial_seed,
            s.initial_decay
        );
        let _ = write!(
            o,
            "[noise]\nenabled = {}\ncutoff = {}\ngamma = {:?}\nseed = {}\npath = {}\n\n",
            n.enabled,
            opt(n.cutoff.map(|c| c.to_string())),
            n.gamma,
            n.seed,
            n.path
        );
        let levels: Vec<String> = st.levels.iter().map(|l| l.to_string()).collect();
        let _ = write!(
            o,
            "[study]\nlevels = {}\nreference_steps = {}\npaths = {}\nrate_r = {:?}\n\
             sample_sets = {}\nthresholds = {}\nthreshold_quantile = {:?}\nschedule_mu = {:?}\n\
             noise_samples = {}\n\n",
            levels.join(","),
            st.reference_steps,
            st.paths,
            st.rate_r,
            st.sample_sets,
            match st.thresholds {
                ThresholdKind::Quantile => "quantile",
                ThresholdKind::Schedule => "schedule",
            },
            st.threshold_quantile,
            st.schedule_mu,
            st.noise_samples
        );
        o
    }

    /// SHA-256 of the canonical form without the `[output]` section, hex
    /// encoded, so relocating a run leaves its files unchanged.
    pub fn manifest_hash(&self) -> String {
        hex::encode(Sha256::digest(self.computational_canonical().as_bytes()))
    }

    pub fn grid_obj(&self) -> CliResult<Grid> {
        Ok(Grid::new(self.grid.length, self.grid.n, self.grid.pad)?)
    }

    pub fn solver_opts(&self) -> SolverOpts {
        SolverOpts {
            picard_tol: self.scheme.picard_tol,
            picard_max_iter: self.scheme.picard_max_iter,
            divergence_guard: self.scheme.divergence_guard,
        }
    }

    pub fn advection(&self) -> Advection {
        if self.scheme.lagged_advection {
            Advection::Lagged
        } else {
            Advection::Implicit
        }
    }

    pub fn scheme_params(&self, steps: usize) -> CliResult<SchemeParams> {
        let s = &self.scheme;
        let k = s.horizon / steps as f64;
        let p = match s.epsilon {
            None => SchemeParams::coupled(s.nu, k, steps, s.eta, s.alpha)?,
            Some(eps) => SchemeParams::uncoupled(s.nu, k, steps, eps, s.eta, s.alpha)?,
        };
        Ok(p.with_advection(self.advection()))
    }

    pub fn noise_cutoff(&self) -> usize {
        self.noise
            .cutoff
            .unwrap_or_else(|| NoiseModel::default_cutoff(self.grid.n))
    }

    pub fn noise_model(&self) -> CliResult<Option<NoiseModel>> {
        if !self.noise.enabled {
            return Ok(None);
        }
        Ok(Some(NoiseModel::new(
            self.grid_obj()?,
            self.noise_cutoff(),
            self.noise.gamma,
        )?))
    }

    pub fn initial_condition(&self) -> InitialCondition {
        let s = &self.scheme;
        match s.initial {
            InitialKind::Zero => InitialCondition::Zero,
            InitialKind::TaylorGreen => InitialCondition::TaylorGreen {
                amplitude: s.initial_amplitude,
            },
            InitialKind::Random => InitialCondition::Random {
                seed: s.initial_seed,
                decay: s.initial_decay,
                l2_norm: s.initial_amplitude,
            },
        }
    }

    pub fn threshold_rule(&self) -> ThresholdRule {
        match self.study.thresholds {
            ThresholdKind::Quantile => ThresholdRule::Quantile(self.study.threshold_quantile),
            ThresholdKind::Schedule => ThresholdRule::AsymptoticSchedule {
                mu: self.study.schedule_mu,
                r: self.study.rate_r,
            },
        }
    }

    /// Study settings; `nonlinear` follows `scheme.scheme`.
    pub fn study_config(&self) -> CliResult<StudyConfig> {
        let nonlinear = match self.scheme.scheme {
            Scheme::Penalty => true,
            Scheme::StokesPenalty => false,
            other => {
                return Err(CliError::Range {
                    key: "scheme.scheme".into(),
                    reason: format!("studies need a penalized scheme, got `{other}`"),
                })
            }
        };
        let s = &self.scheme;
        Ok(StudyConfig {
            grid: self.grid_obj()?,
            nu: s.nu,
            horizon: s.horizon,
            eta: s.eta,
            alpha: s.alpha,
            epsilon: s.epsilon,
            levels: self.study.levels.clone(),
            reference_steps: self.study.reference_steps,
            paths: self.study.paths,
            base_seed: self.noise.seed,
            noise: self.noise.enabled.then(|| NoiseSpec {
                cutoff: self.noise_cutoff(),
                gamma: self.noise.gamma,
            }),
            initial: self.initial_condition(),
            opts: self.solver_opts(),
            advection: self.advection(),
            nonlinear,
            sample_sets: self.study.sample_sets,
        })
    }
}
