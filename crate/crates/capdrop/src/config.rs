//! Run configuration: TOML schema, defaults, validation and hashing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dn::DnOperator;
use crate::dynamics::{IntegratorConfig, Scheme};
use crate::error::{Error, Result};
use crate::functionals::{Model, PhysicalParams, WahlenState};
use crate::spectral::{Mode, SpectralGrid, TorusField};
use crate::waves::{ContinuationConfig, JacobianMode, Parametrization, RootChoice};

/// Initial datum for `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    /// The rotating circle (0, 0).
    Circle,
    /// ζ = a cos ℓθ, γ = b sin ℓθ.
    Mode { l: usize, zeta: f64, gamma: f64 },
    /// Seeded random smooth perturbation with modes up to `lmax`.
    Random { amplitude: f64, lmax: usize, decay: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    pub monitor_every: usize,
    pub initial: InitialState,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { scheme: Scheme::Rk4, dt: 1e-3, t_final: 1.0, monitor_every: 10, initial: InitialState::Circle }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonancesSection {
    pub kappa: usize,
    pub l_max: usize,
}

impl Default for ResonancesSection {
    fn default() -> Self {
        ResonancesSection { kappa: 1, l_max: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchSection {
    pub l: usize,
    pub kappa: usize,
    pub root: RootChoice,
    pub parametrization: Parametrization,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub jacobian: JacobianMode,
    pub min_step_fraction: f64,
    /// Leading coefficients written per CSV row.
    pub export_modes: usize,
}

impl Default for BranchSection {
    fn default() -> Self {
        BranchSection {
            l: 2,
            kappa: 1,
            root: RootChoice::Plus,
            parametrization: Parametrization::Amplitude,
            start: 1e-3,
            stop: 1e-2,
            points: 10,
            tol: 1e-11,
            max_iter: 50,
            jacobian: JacobianMode::Hybrid,
            min_step_fraction: 1.0 / 64.0,
            export_modes: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub l_max: usize,
    /// Truncation for the constrained coercivity eigenproblem.
    pub truncation: usize,
}

impl Default for StabilitySection {
    fn default() -> Self {
        StabilitySection { l_max: 64, truncation: 64 }
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sigma0: f64,
    pub alpha0: f64,
    #[serde(alias = "N", default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub dn: DnOperator,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub resonances: ResonancesSection,
    #[serde(default)]
    pub branch: BranchSection,
    #[serde(default)]
    pub stability: StabilitySection,
}

fn default_n() -> usize {
    64
}

fn field_err(field: &str, msg: String) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(field_err("sigma0", format!("must be positive, got {}", self.sigma0)));
        }
        if !self.alpha0.is_finite() {
            return Err(field_err("alpha0", format!("must be finite, got {}", self.alpha0)));
        }
        if self.seed > i64::MAX as u64 {
            return Err(field_err("seed", format!("must not exceed {}, got {}", i64::MAX, self.seed)));
        }
        SpectralGrid::<f64>::new(self.n).map_err(|e| field_err("n", e.to_string()))?;
        if self.dn.delta0.is_nan() || self.dn.delta0 <= 0.0 {
            return Err(field_err("dn.delta0", format!("must be positive, got {}", self.dn.delta0)));
        }
        let s = &self.simulate;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(field_err("simulate.dt", format!("must be positive, got {}", s.dt)));
        }
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            return Err(field_err("simulate.t_final", format!("must be positive, got {}", s.t_final)));
        }
        if s.monitor_every == 0 {
            return Err(field_err("simulate.monitor_every", "must be at least 1".into()));
        }
        match s.initial {
            InitialState::Mode { l, .. } if l == 0 || l >= self.n / 2 => {
                return Err(field_err("simulate.initial.l", format!("must lie in 1..{}, got {l}", self.n / 2)))
            }
            InitialState::Random { lmax, .. } if lmax >= self.n / 2 => {
                return Err(field_err("simulate.initial.lmax", format!("must be below {}, got {lmax}", self.n / 2)))
            }
            _ => {}
        }
        let r = &self.resonances;
        if r.kappa == 0 || r.l_max < r.kappa.max(2) {
            return Err(field_err("resonances", format!("need kappa >= 1 and l_max >= max(kappa, 2), got {r:?}")));
        }
        self.continuation().validate().map_err(|e| field_err("branch", e.to_string()))?;
        let st = &self.stability;
        if st.l_max < 2 {
            return Err(field_err("stability.l_max", format!("must be at least 2, got {}", st.l_max)));
        }
        if st.truncation < 16 || !st.truncation.is_multiple_of(2) {
            return Err(field_err("stability.truncation", format!("must be even and at least 16, got {}", st.truncation)));
        }
        Ok(())
    }

    pub fn params(&self) -> PhysicalParams {
        PhysicalParams { sigma0: self.sigma0, alpha0: self.alpha0 }
    }

    pub fn model(&self) -> Model {
        Model::new(self.params()).with_dn(self.dn)
    }

    pub fn grid(&self) -> Result<SpectralGrid<f64>> {
        SpectralGrid::new(self.n)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        let s = &self.simulate;
        IntegratorConfig::rk4(s.dt, s.t_final).with_scheme(s.scheme).with_monitor_every(s.monitor_every)
    }

    pub fn continuation(&self) -> ContinuationConfig {
        let b = &self.branch;
        ContinuationConfig {
            l: b.l,
            kappa: b.kappa,
            root: b.root,
            parametrization: b.parametrization,
            start: b.start,
            stop: b.stop,
            points: b.points,
            tol: b.tol,
            max_iter: b.max_iter,
            jacobian: b.jacobian,
            min_step_fraction: b.min_step_fraction,
        }
    }

    /// Initial state of `simulate`, drawn from the configured seed when random.
    pub fn initial_state(&self) -> Result<WahlenState<f64>> {
        let g = self.grid()?;
        Ok(match self.simulate.initial {
            InitialState::Circle => WahlenState::zero(&g),
            InitialState::Mode { l, zeta, gamma } => WahlenState::new(
                TorusField::basis(&g, Mode { l, m: 1 })?.scale(zeta),
                TorusField::basis(&g, Mode { l, m: -1 })?.scale(gamma),
            ),
            InitialState::Random { amplitude, lmax, decay } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                WahlenState::new(
                    TorusField::random_smooth(&g, &mut rng, lmax, amplitude, decay, true),
                    TorusField::random_smooth(&g, &mut rng, lmax, amplitude, decay, false),
                )
            }
        })
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    /// SHA-256 of the canonical TOML without the output directory, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let canonical = RunConfig { out_dir: None, ..self.clone() };
        let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Parses and validates a TOML document; syntax errors carry line and column.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
