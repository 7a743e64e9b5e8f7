//! Run configuration: a single TOML file, parsed strictly and resolved
//! against defaults before any task runs.

use std::path::{Path, PathBuf};

use lrising_core::dynamics::{EvolutionMethod, KrylovOptions, STATE_VECTOR_CAP};
use lrising_core::ensembles::DIAGONALIZE_CAP;
use lrising_core::ionchain::{BeamConfig, DetuningConvention, TrapConfig};
use lrising_core::model::{
    build_ideal_couplings, build_unnormalized_couplings, select_initial_states, CouplingMatrix, ModelSpec,
    ProductState, SelectionOptions,
};
use lrising_core::observables::Observable;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProvenanceChoice {
    Ideal,
    Unnormalized,
    IonDerived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    /// Spin count; for ion-derived couplings it must match the active beams.
    pub size: Option<usize>,
    #[serde(default)]
    pub gamma: f64,
    pub fields: Vec<f64>,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default = "ideal")]
    pub provenance: ProvenanceChoice,
    /// Decay denominator of the unnormalized couplings.
    #[serde(default = "thirteen")]
    pub denominator: f64,
}

fn one() -> f64 {
    1.0
}

fn ideal() -> ProvenanceChoice {
    ProvenanceChoice::Ideal
}

fn thirteen() -> f64 {
    13.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatesBlock {
    #[serde(default = "nine")]
    pub count: usize,
    /// Highest target energy density `E_max / L`.
    #[serde(default)]
    pub e_max: f64,
    /// Use these `u`/`d` strings instead of the energy-targeted selection.
    #[serde(default)]
    pub explicit: Vec<String>,
    #[serde(default)]
    pub heuristic: bool,
}

fn nine() -> usize {
    9
}

impl Default for StatesBlock {
    fn default() -> Self {
        StatesBlock { count: 9, e_max: 0.0, explicit: Vec::new(), heuristic: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapBlock {
    pub ions: usize,
    pub c2: f64,
    pub c4: f64,
    pub com_frequency_mhz: f64,
    #[serde(default = "ytterbium")]
    pub mass_amu: f64,
}

fn ytterbium() -> f64 {
    171.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamBlock {
    /// Relative amplitudes per ion; overrides `off_per_edge`.
    #[serde(default)]
    pub rabi: Vec<f64>,
    #[serde(default)]
    pub off_per_edge: usize,
    #[serde(default = "eta")]
    pub eta0: f64,
    pub detuning_khz: f64,
    #[serde(default = "yes")]
    pub staggered: bool,
    #[serde(default = "mode_detuning")]
    pub convention: String,
}

fn eta() -> f64 {
    0.08
}

fn yes() -> bool {
    true
}

fn mode_detuning() -> String {
    "mode-detuning".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IonchainBlock {
    /// `l13` or `l23`; explicit `trap`/`beams` win.
    pub preset: Option<String>,
    pub trap: Option<TrapBlock>,
    pub beams: Option<BeamBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    Auto,
    Exact,
    Krylov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsBlock {
    #[serde(default = "twelve")]
    pub t_max: f64,
    #[serde(default = "tenth")]
    pub dt: f64,
    /// Any of `sx2`, `sz`, `sx4`, `corr`, `energy`.
    #[serde(default = "default_observables")]
    pub observables: Vec<String>,
    /// Averaging horizons reported in the summary; `t_max` is always included.
    #[serde(default = "eight")]
    pub average_times: Vec<f64>,
    #[serde(default)]
    pub shots: u64,
    #[serde(default = "seed")]
    pub seed: u64,
    #[serde(default = "auto")]
    pub method: MethodChoice,
}

fn twelve() -> f64 {
    12.0
}

fn tenth() -> f64 {
    0.1
}

fn eight() -> Vec<f64> {
    vec![8.0]
}

fn default_observables() -> Vec<String> {
    vec!["sx2".into(), "sz".into()]
}

fn seed() -> u64 {
    1
}

fn auto() -> MethodChoice {
    MethodChoice::Auto
}

impl Default for DynamicsBlock {
    fn default() -> Self {
        DynamicsBlock {
            t_max: twelve(),
            dt: tenth(),
            observables: default_observables(),
            average_times: eight(),
            shots: 0,
            seed: seed(),
            method: auto(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsemblesBlock {
    #[serde(default = "temperature_grid")]
    pub temperatures: Vec<f64>,
    /// Microcanonical window in units of J; default `0.05 L`.
    pub window: Option<f64>,
    /// Energy densities of the canonical phase-diagram grid.
    #[serde(default = "energy_grid")]
    pub energies: Vec<f64>,
}

fn energy_grid() -> Vec<f64> {
    (0..20).map(|k| (k as f64 - 20.0) / 20.0).collect()
}

fn temperature_grid() -> Vec<f64> {
    (1..=40).map(|k| 0.1 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub sizes: Vec<usize>,
    pub temperatures: Vec<f64>,
    #[serde(default = "measurements")]
    pub measurements: usize,
    #[serde(default = "seed")]
    pub seed: u64,
    /// Independent chains per point, merged by inverse variance.
    #[serde(default = "one_chain")]
    pub chains: usize,
    /// Overrides `model.gamma` for the Monte Carlo couplings.
    pub gamma: Option<f64>,
}

fn measurements() -> usize {
    20_000
}

fn one_chain() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    #[serde(default = "resamples")]
    pub resamples: usize,
    #[serde(default = "bisection")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
}

fn resamples() -> usize {
    200
}

fn bisection() -> f64 {
    1e-5
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        AnalysisBlock { resamples: resamples(), tolerance: bisection(), seed: 0 }
    }
}

/// The file as written, with serde defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output: Option<PathBuf>,
    pub model: ModelBlock,
    #[serde(default)]
    pub states: StatesBlock,
    pub ionchain: Option<IonchainBlock>,
    #[serde(default)]
    pub dynamics: DynamicsBlock,
    pub ensembles: Option<EnsemblesBlock>,
    pub mc: Option<McBlock>,
    #[serde(default)]
    pub analysis: AnalysisBlock,
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: message.into() }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.into(), source: e })?;
        Self::parse(&text)
    }

    /// Applies `--seed` to every seeded block.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.dynamics.seed = seed;
        if let Some(mc) = self.mc.as_mut() {
            mc.seed = seed;
        }
        self.analysis.seed = seed;
        self
    }

    /// Checks every block and resolves couplings and initial states.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let m = &self.model;
        if m.fields.is_empty() {
            return Err(invalid("model.fields", "at least one field is required"));
        }
        if m.fields.iter().any(|g| !g.is_finite()) {
            return Err(invalid("model.fields", "fields must be finite"));
        }
        if !(m.j > 0.0) {
            return Err(invalid("model.j", "must be positive"));
        }
        if !(m.gamma >= 0.0) {
            return Err(invalid("model.gamma", "must be nonnegative"));
        }

        let ion = match (&m.provenance, &self.ionchain) {
            (ProvenanceChoice::IonDerived, None) => {
                return Err(invalid("ionchain", "ion-derived provenance needs an [ionchain] block"))
            }
            (ProvenanceChoice::IonDerived, Some(block)) => Some(resolve_ionchain(block)?),
            (_, Some(_)) => {
                return Err(invalid("ionchain", "an [ionchain] block requires provenance = \"ion-derived\""))
            }
            _ => None,
        };
        let size = match (&ion, m.size) {
            (Some((_, beams)), Some(l)) if beams.active().len() != l => {
                return Err(invalid(
                    "model.size",
                    format!("{l} does not match the {} active beams", beams.active().len()),
                ))
            }
            (Some((_, beams)), _) => beams.active().len(),
            (None, Some(l)) => l,
            (None, None) => return Err(invalid("model.size", "missing")),
        };
        if size < 2 {
            return Err(invalid("model.size", "need at least 2 spins"));
        }

        let d = &self.dynamics;
        if !(d.t_max > 0.0) || !(d.dt > 0.0) || d.dt > d.t_max {
            return Err(invalid("dynamics", "need 0 < dt <= t_max"));
        }
        if d.average_times.iter().any(|t| !(*t > 0.0 && *t <= d.t_max)) {
            return Err(invalid("dynamics.average_times", "each horizon must lie in (0, t_max]"));
        }
        let observables = parse_observable_set(&d.observables)?;
        if size > STATE_VECTOR_CAP {
            return Err(invalid("model.size", format!("state vectors are capped at L <= {STATE_VECTOR_CAP}")));
        }
        let exact_needed = d.method == MethodChoice::Exact || self.ensembles.is_some();
        if exact_needed && size > DIAGONALIZE_CAP {
            return Err(invalid(
                if self.ensembles.is_some() { "ensembles" } else { "dynamics.method" },
                format!("exact diagonalization is capped at L <= {DIAGONALIZE_CAP}, got L = {size}"),
            ));
        }
        let method = match d.method {
            // each quench task owns one state, so a shared spectrum buys nothing
            MethodChoice::Auto | MethodChoice::Krylov => EvolutionMethod::Krylov(KrylovOptions::default()),
            MethodChoice::Exact => EvolutionMethod::Exact,
        };
        if let Some(e) = &self.ensembles {
            if e.temperatures.is_empty() || e.temperatures.iter().any(|t| !(*t > 0.0)) {
                return Err(invalid("ensembles.temperatures", "need positive temperatures"));
            }
            if e.energies.is_empty() || e.energies.iter().any(|x| !x.is_finite()) {
                return Err(invalid("ensembles.energies", "need finite energy densities"));
            }
            if e.window.is_some_and(|w| !(w > 0.0)) {
                return Err(invalid("ensembles.window", "must be positive"));
            }
        }
        if let Some(mc) = &self.mc {
            if mc.sizes.is_empty() || mc.sizes.iter().any(|&l| l < 2) {
                return Err(invalid("mc.sizes", "need sizes of at least 2"));
            }
            if mc.temperatures.len() < 2 || mc.temperatures.windows(2).any(|w| !(w[1] > w[0] && w[0] > 0.0)) {
                return Err(invalid("mc.temperatures", "need at least two positive, increasing temperatures"));
            }
            if mc.measurements < 100 || mc.chains == 0 {
                return Err(invalid("mc", "need measurements >= 100 and chains >= 1"));
            }
            if mc.gamma.is_some_and(|g| !(g >= 0.0)) {
                return Err(invalid("mc.gamma", "must be nonnegative"));
            }
        }
        if self.analysis.resamples == 0 || !(self.analysis.tolerance > 0.0) {
            return Err(invalid("analysis", "need resamples >= 1 and tolerance > 0"));
        }

        let couplings = match m.provenance {
            ProvenanceChoice::Ideal => build_ideal_couplings(size, m.gamma, m.j),
            ProvenanceChoice::Unnormalized => build_unnormalized_couplings(size, m.denominator, m.gamma)
                .map(|c| c.scaled(m.j)),
            ProvenanceChoice::IonDerived => {
                let (trap, beams) = ion.as_ref().unwrap();
                lrising_core::ionchain::ion_derived_couplings(trap, beams).map(|(_, _, c)| c.scaled(m.j))
            }
        }
        .map_err(|e| invalid("model", e.to_string()))?;

        let model0 = ModelSpec::new(couplings.clone(), m.fields[0]);
        let s = &self.states;
        let states: Vec<(ProductState, f64)> = if s.explicit.is_empty() {
            if s.count == 0 {
                return Err(invalid("states.count", "must be at least 1"));
            }
            let options = SelectionOptions { heuristic: s.heuristic, ..Default::default() };
            select_initial_states(&model0, s.count, s.e_max * size as f64, options)
                .map_err(|e| invalid("states", e.to_string()))?
                .states
                .into_iter()
                .map(|x| (x.state, x.energy))
                .collect()
        } else {
            s.explicit
                .iter()
                .map(|text| {
                    let p: ProductState = text.parse().map_err(|e: lrising_core::Error| invalid("states.explicit", e.to_string()))?;
                    if p.size() != size {
                        return Err(invalid("states.explicit", format!("`{text}` has {} spins, expected {size}", p.size())));
                    }
                    let e = lrising_core::model::product_state_energy(&p, &model0)
                        .map_err(|e| invalid("states.explicit", e.to_string()))?;
                    Ok((p, e))
                })
                .collect::<Result<_, _>>()?
        };

        Ok(Resolved { config: self.clone(), size, couplings, ion, states, observables, method })
    }
}

fn resolve_ionchain(block: &IonchainBlock) -> Result<(TrapConfig, BeamConfig), ConfigError> {
    let (mut trap, mut beams) = match block.preset.as_deref() {
        Some("l13") => (Some(TrapConfig::chain_15()), Some(BeamConfig::l13())),
        Some("l23") => (Some(TrapConfig::chain_27()), Some(BeamConfig::l23())),
        Some(other) => return Err(invalid("ionchain.preset", format!("unknown preset `{other}`"))),
        None => (None, None),
    };
    if let Some(t) = &block.trap {
        let cfg = TrapConfig::new(t.ions, t.c2, t.c4, t.com_frequency_mhz)
            .map_err(|e| invalid("ionchain.trap", e.to_string()))?;
        trap = Some(TrapConfig { mass_amu: t.mass_amu, ..cfg });
    }
    let trap = trap.ok_or_else(|| invalid("ionchain.trap", "missing (give a trap or a preset)"))?;
    if let Some(b) = &block.beams {
        let convention: DetuningConvention =
            b.convention.parse().map_err(|e: lrising_core::Error| invalid("ionchain.beams.convention", e.to_string()))?;
        let mut cfg = BeamConfig::uniform(trap.ions, b.off_per_edge, b.detuning_khz);
        if !b.rabi.is_empty() {
            if b.rabi.len() != trap.ions {
                return Err(invalid("ionchain.beams.rabi", format!("need {} amplitudes", trap.ions)));
            }
            cfg.rabi = b.rabi.clone();
        }
        cfg.eta0 = b.eta0;
        cfg.staggered = b.staggered;
        cfg.convention = convention;
        beams = Some(cfg);
    }
    let beams = beams.ok_or_else(|| invalid("ionchain.beams", "missing (give beams or a preset)"))?;
    if beams.rabi.len() != trap.ions {
        return Err(invalid("ionchain.beams", format!("beam count {} differs from ion count {}", beams.rabi.len(), trap.ions)));
    }
    trap.validate().map_err(|e| invalid("ionchain.trap", e.to_string()))?;
    beams.validate().map_err(|e| invalid("ionchain.beams", e.to_string()))?;
    Ok((trap, beams))
}

/// Which series a quench records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservableChoice {
    pub sx2: bool,
    pub sz: bool,
    pub sx4: bool,
    pub corr: bool,
    pub energy: bool,
}

fn parse_observable_set(names: &[String]) -> Result<ObservableChoice, ConfigError> {
    let mut c = ObservableChoice { sx2: false, sz: false, sx4: false, corr: false, energy: false };
    for n in names {
        match n.as_str() {
            "sx2" => c.sx2 = true,
            "sz" => c.sz = true,
            "sx4" => c.sx4 = true,
            "corr" => c.corr = true,
            "energy" => c.energy = true,
            other => return Err(invalid("dynamics.observables", format!("unknown observable `{other}`"))),
        }
    }
    // phase diagrams and summaries always need the two order parameters
    c.sx2 = true;
    c.sz = true;
    Ok(c)
}

/// A validated configuration with couplings and initial states in hand.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub size: usize,
    pub couplings: CouplingMatrix,
    pub ion: Option<(TrapConfig, BeamConfig)>,
    pub states: Vec<(ProductState, f64)>,
    pub observables: ObservableChoice,
    pub method: EvolutionMethod,
}

impl Resolved {
    pub fn model(&self, field: f64) -> ModelSpec {
        ModelSpec { energy_unit: self.config.model.j, ..ModelSpec::new(self.couplings.clone(), field) }
    }

    pub fn times(&self) -> Vec<f64> {
        lrising_core::dynamics::uniform_times(self.config.dynamics.t_max, self.config.dynamics.dt)
            .expect("validated time grid")
    }

    /// Averaging horizons, sorted, always ending at `t_max`.
    pub fn horizons(&self) -> Vec<f64> {
        let d = &self.config.dynamics;
        let mut h = d.average_times.clone();
        h.push(d.t_max);
        h.sort_by(f64::total_cmp);
        h.dedup();
        h
    }

    pub fn quench_tasks(&self) -> usize {
        self.config.model.fields.len() * self.states.len()
    }

    /// Monte Carlo couplings for one size.
    pub fn mc_couplings(&self, size: usize) -> Result<CouplingMatrix, lrising_core::Error> {
        let m = &self.config.model;
        let gamma = self.config.mc.as_ref().and_then(|b| b.gamma).unwrap_or(m.gamma);
        match m.provenance {
            ProvenanceChoice::Unnormalized => build_unnormalized_couplings(size, m.denominator, gamma).map(|c| c.scaled(m.j)),
            _ => build_ideal_couplings(size, gamma, m.j),
        }
    }

    pub fn observable_list(&self) -> Vec<Observable> {
        let mut v = vec![Observable::SxSquared, Observable::Sz];
        if self.observables.sx4 {
            v.push(Observable::SxFourth);
        }
        v
    }
}
