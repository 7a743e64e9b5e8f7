//! Task builders, one family per subcommand. Tasks read their inputs from
//! the output directory and return the bytes they produce; nothing else is
//! shared between them.

use std::path::{Path, PathBuf};

use lrising_core::analysis::{
    collapse_spread, extrapolate_tc, find_crossing_with, mean_field_tc_scaled, scaling_fit, BinderCurve, BinderSource,
    CrossingOptions, CrossingPoint, CrossingResult,
};
use lrising_core::dynamics::{
    encode_product_state, evolve_and_measure, evolve_state, running_average, sample_shots, MeasurementBasis,
    ObservableSet,
};
use lrising_core::ensembles::{
    canonical_at_energy, canonical_energy_density, canonical_expectation, diagonal_ensemble, diagonalize,
    microcanonical_expectation,
};
use lrising_core::montecarlo::{merge_estimates, run_chain, u4_from_estimate, ChainOptions};
use lrising_core::observables::Observable;
use lrising_core::ProductState;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Resolved;
use crate::error::{TaskError, TaskResult};
use crate::io::{self, field_label, num, opt, Table};
use crate::manifest::{hash_of, input_hashes, Outputs, Task};

pub mod paths {
    use super::field_label;

    pub const COUPLINGS_CSV: &str = "couplings/couplings.csv";
    pub const COUPLINGS_JSON: &str = "couplings/couplings.json";
    pub const PROFILE_CSV: &str = "couplings/profile.csv";
    pub const MODES_CSV: &str = "couplings/modes.csv";
    pub const STATES_CSV: &str = "couplings/states.csv";
    pub const GRID_JSON: &str = "phase/grid.json";
    pub const GRID_CSV: &str = "phase/grid.csv";
    pub const CRITICAL_CSV: &str = "phase/critical_line.csv";
    pub const BINDER_CSV: &str = "collapse/binder.csv";
    pub const CROSSINGS_CSV: &str = "collapse/crossings.csv";
    pub const COLLAPSE_JSON: &str = "collapse/collapse.json";
    pub const COLLAPSED_CSV: &str = "collapse/collapsed.csv";

    pub fn quench_series(g: f64, state: &str) -> String {
        format!("quench/{}/{state}.csv", field_label(g))
    }

    pub fn quench_summary(g: f64, state: &str) -> String {
        format!("quench/{}/{state}.json", field_label(g))
    }

    pub fn quench_corr(g: f64, state: &str, k: usize) -> String {
        format!("quench/{}/{state}/corr_{k:04}.csv", field_label(g))
    }

    pub fn ensemble_states(g: f64) -> String {
        format!("ensemble/{}/states.csv", field_label(g))
    }

    pub fn ensemble_thermal(g: f64) -> String {
        format!("ensemble/{}/thermal.csv", field_label(g))
    }

    pub fn ensemble_grid(g: f64) -> String {
        format!("ensemble/{}/grid.csv", field_label(g))
    }

    pub fn ensemble_json(g: f64) -> String {
        format!("ensemble/{}/ensemble.json", field_label(g))
    }

    pub fn mc(size: usize) -> String {
        format!("mc/L{size}.csv")
    }
}

/// Independent seed for a labelled sub-stream of `base`.
pub fn derive_seed<T: Serialize>(base: u64, label: &T) -> u64 {
    let h = Sha256::digest(serde_json::to_vec(&(base, label)).expect("serializable"));
    u64::from_le_bytes(h[..8].try_into().unwrap())
}

fn coupling_key(r: &Resolved) -> String {
    let c = &r.couplings;
    hash_of(&(c.entries(), c.provenance().as_str(), c.gamma(), r.config.model.j))
}

// ---------------------------------------------------------------- couplings

pub fn couplings_tasks(r: &Resolved) -> Vec<Task<'_>> {
    let key = (&r.config.model, &r.config.ionchain, &r.config.states);
    vec![Task::new("couplings".into(), "couplings", &key, move || couplings_outputs(r))]
}

fn couplings_outputs(r: &Resolved) -> TaskResult<Outputs> {
    let c = &r.couplings;
    let mut out: Outputs = Vec::new();
    let mut physical_j = r.config.model.j;
    if let Some((trap, beams)) = &r.ion {
        let (spectrum, j, _) = lrising_core::ionchain::ion_derived_couplings(trap, beams)?;
        physical_j = j;
        let n = spectrum.ions();
        let mut header = vec!["mode".to_owned(), "frequency_mhz".to_owned()];
        header.extend((0..n).map(|i| format!("b{i}")));
        let mut t = Table::new(&header).comment(format!("ions={n}, detuning_khz={}", beams.detuning_khz));
        for k in 0..n {
            let mut row = vec![k.to_string(), num(spectrum.frequencies[k] / (2.0 * std::f64::consts::PI * 1e6))];
            row.extend((0..n).map(|i| num(spectrum.b(i, k))));
            t.push(row);
        }
        out.push((paths::MODES_CSV.into(), t.to_bytes()));
    }
    out.push((paths::COUPLINGS_CSV.into(), io::couplings_table(c).to_bytes()));
    let mut meta = io::coupling_meta(c, r.config.model.j);
    meta.j = physical_j;
    out.push((paths::COUPLINGS_JSON.into(), io::json_bytes(&meta)));
    let mut profile = Table::new(&["l", "jbar"]);
    for (l, v) in c.distance_profile().into_iter().enumerate() {
        profile.push(vec![(l + 1).to_string(), num(v)]);
    }
    out.push((paths::PROFILE_CSV.into(), profile.to_bytes()));
    let mut states = Table::new(&["state", "energy", "energy_density", "magnetization"]);
    for (s, e) in &r.states {
        states.push(vec![s.to_string(), num(*e), num(e / r.size as f64), s.magnetization().to_string()]);
    }
    out.push((paths::STATES_CSV.into(), states.to_bytes()));
    Ok(out)
}

// ------------------------------------------------------------------ quench

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAverage {
    pub horizon: f64,
    pub sx2: f64,
    pub sz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSummary {
    pub shots: u64,
    pub time: f64,
    pub sx2: f64,
    pub sz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchSummary {
    pub state: String,
    pub field: f64,
    pub size: usize,
    pub energy: f64,
    pub energy_density: f64,
    pub averages: Vec<TimeAverage>,
    pub final_sx2: f64,
    pub final_sz: f64,
    pub max_norm_drift: f64,
    pub shots: Option<ShotSummary>,
}

pub fn quench_tasks(r: &Resolved) -> Vec<Task<'_>> {
    let ck = coupling_key(r);
    let mut tasks = Vec::new();
    for &g in &r.config.model.fields {
        for (state, _) in &r.states {
            let label = state.to_string();
            let key = (&ck, g, &label, &r.config.dynamics);
            let id = format!("quench/{}/{label}", field_label(g));
            tasks.push(Task::new(id, "quench", &key, move || quench_outputs(r, g, state)));
        }
    }
    tasks
}

fn quench_outputs(r: &Resolved, g: f64, state: &ProductState) -> TaskResult<Outputs> {
    let model = r.model(g);
    let label = state.to_string();
    let psi0 = encode_product_state(state)?;
    let energy = lrising_core::model::product_state_energy(state, &model)?;
    let times = r.times();
    let o = r.observables;
    let set = ObservableSet { sx2: true, sz: true, sx4: o.sx4, correlations: o.corr, energy: o.energy };
    let series = evolve_and_measure(&psi0, &model, &times, set, r.method)?;
    let sx2 = series.sx2.clone().unwrap();
    let sz = series.sz.clone().unwrap();

    let mut header = vec!["t", "sx2", "sz"];
    if o.sx4 {
        header.push("sx4");
    }
    if o.energy {
        header.push("energy");
    }
    header.extend(["norm", "sx2_running"]);
    let running = running_average(&times, &sx2)?;
    let mut t = Table::new(&header).comment(format!("L={}, g={g}, state={label}, energy={energy}", r.size));
    for k in 0..times.len() {
        let mut row = vec![num(times[k]), num(sx2[k]), num(sz[k])];
        if let Some(v) = &series.sx4 {
            row.push(num(v[k]));
        }
        if let Some(v) = &series.energy {
            row.push(num(v[k]));
        }
        row.push(num(series.norm[k]));
        row.push(num(running[k]));
        t.push(row);
    }
    let mut out: Outputs = vec![(paths::quench_series(g, &label), t.to_bytes())];

    if let Some(cs) = &series.correlations {
        let l = r.size;
        let header: Vec<String> = (0..l).map(|j| format!("c{j}")).collect();
        for (k, c) in cs.iter().enumerate() {
            let mut t = Table::new(&header).comment(format!("t={}", times[k]));
            for i in 0..l {
                t.push(c[i * l..(i + 1) * l].iter().copied().map(num).collect());
            }
            out.push((paths::quench_corr(g, &label, k), t.to_bytes()));
        }
    }

    let averages = r
        .horizons()
        .into_iter()
        .map(|h| {
            Ok(TimeAverage {
                horizon: h,
                sx2: series.time_average(Observable::SxSquared, h)?,
                sz: series.time_average(Observable::Sz, h)?,
            })
        })
        .collect::<TaskResult<Vec<_>>>()?;
    let d = &r.config.dynamics;
    let shots = if d.shots > 0 {
        let t_end = *times.last().unwrap();
        let psi = evolve_state(&psi0, &model, t_end)?;
        let seed = derive_seed(d.seed, &(g, &label));
        let x = sample_shots(&psi, MeasurementBasis::X, d.shots, seed)?;
        let z = sample_shots(&psi, MeasurementBasis::Z, d.shots, seed.wrapping_add(1))?;
        let l = r.size;
        Some(ShotSummary {
            shots: d.shots,
            time: t_end,
            sx2: x.squared_magnetization(),
            sz: z.mean(|b| lrising_core::basis::total_sz(l, b) / l as f64),
        })
    } else {
        None
    };
    let summary = QuenchSummary {
        state: label.clone(),
        field: g,
        size: r.size,
        energy,
        energy_density: energy / r.size as f64,
        averages,
        final_sx2: *sx2.last().unwrap(),
        final_sz: *sz.last().unwrap(),
        max_norm_drift: series.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max),
        shots,
    };
    out.push((paths::quench_summary(g, &label), io::json_bytes(&summary)));
    Ok(out)
}

// ---------------------------------------------------------------- ensemble

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEnsembles {
    pub state: String,
    pub energy_density: f64,
    pub diagonal_sx2: f64,
    pub diagonal_sz: f64,
    /// `None` when the state lies above the infinite-temperature energy.
    pub temperature: Option<f64>,
    pub canonical_sx2: Option<f64>,
    pub canonical_sz: Option<f64>,
    pub microcanonical_sx2: f64,
    pub microcanonical_sz: f64,
    pub microcanonical_window: f64,
    pub microcanonical_states: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub field: f64,
    pub size: usize,
    pub ground_energy_density: f64,
    pub states: Vec<StateEnsembles>,
    /// Mean-field `T_c` and the canonical energy density there at this size.
    pub critical_temperature: f64,
    pub critical_energy_density: Option<f64>,
}

pub fn ensemble_tasks(r: &Resolved) -> Vec<Task<'_>> {
    let Some(block) = &r.config.ensembles else { return Vec::new() };
    let ck = coupling_key(r);
    let labels: Vec<String> = r.states.iter().map(|(s, _)| s.to_string()).collect();
    r.config
        .model
        .fields
        .iter()
        .map(|&g| {
            let key = (&ck, g, &labels, block);
            Task::new(format!("ensemble/{}", field_label(g)), "ensemble", &key, move || ensemble_outputs(r, g))
        })
        .collect()
}

fn ensemble_outputs(r: &Resolved, g: f64) -> TaskResult<Outputs> {
    let block = r.config.ensembles.as_ref().expect("ensemble tasks need the block");
    let model = r.model(g);
    let l = r.size as f64;
    let cache = diagonalize(&model)?;
    let sx2 = cache.observable_table(Observable::SxSquared)?;
    let sz = cache.observable_table(Observable::Sz)?;

    let mut rows = Vec::new();
    let mut st = Table::new(&[
        "energy_density",
        "g",
        "L",
        "ensemble",
        "state",
        "temperature",
        "sx2",
        "sz",
    ]);
    for (state, energy) in &r.states {
        let label = state.to_string();
        let psi0 = encode_product_state(state)?;
        let d2 = diagonal_ensemble(&psi0, &cache, &sx2)?;
        let dz = diagonal_ensemble(&psi0, &cache, &sz)?;
        let (temperature, c2, cz) = match canonical_at_energy(&cache, &sx2, *energy) {
            Ok(res) => {
                let cz = canonical_at_energy(&cache, &sz, *energy)?;
                (res.params.temperature, Some(res.value), Some(cz.value))
            }
            Err(lrising_core::Error::EnergyOutOfRange { .. }) => (None, None, None),
            Err(e) => return Err(e.into()),
        };
        let m2 = microcanonical_expectation(&cache, &sx2, *energy, block.window)?;
        let mz = microcanonical_expectation(&cache, &sz, *energy, block.window)?;
        let eps = energy / l;
        let base = |kind: &str, t: Option<f64>, a: Option<f64>, b: Option<f64>| {
            vec![num(eps), num(g), r.size.to_string(), kind.to_owned(), label.clone(), opt(t), opt(a), opt(b)]
        };
        st.push(base("diagonal", None, Some(d2), Some(dz)));
        st.push(base("canonical", temperature, c2, cz));
        st.push(base("microcanonical", None, Some(m2.result.value), Some(mz.result.value)));
        rows.push(StateEnsembles {
            state: label,
            energy_density: eps,
            diagonal_sx2: d2,
            diagonal_sz: dz,
            temperature,
            canonical_sx2: c2,
            canonical_sz: cz,
            microcanonical_sx2: m2.result.value,
            microcanonical_sz: mz.result.value,
            microcanonical_window: m2.window,
            microcanonical_states: m2.states,
        });
    }

    let mut thermal = Table::new(&["temperature", "energy_density", "sx2", "sz"]).comment(format!("L={}, g={g}", r.size));
    for &t in &block.temperatures {
        let a = canonical_expectation(&cache, &sx2, t)?;
        let b = canonical_expectation(&cache, &sz, t)?;
        thermal.push(vec![num(t), num(a.energy_density), num(a.value), num(b.value)]);
    }

    let mut grid = Table::new(&["energy_density", "temperature", "sx2", "sz"]).comment(format!("L={}, g={g}", r.size));
    for &eps in &block.energies {
        match canonical_at_energy(&cache, &sx2, eps * l) {
            Ok(a) => {
                let b = canonical_at_energy(&cache, &sz, eps * l)?;
                grid.push(vec![num(eps), opt(a.params.temperature), num(a.value), num(b.value)]);
            }
            // no states below the ground energy, no positive temperature above ε(∞)
            Err(lrising_core::Error::EnergyOutOfRange { .. }) => {
                grid.push(vec![num(eps), String::new(), String::new(), String::new()])
            }
            Err(e) => return Err(e.into()),
        }
    }

    let tc = mean_field_tc_scaled(g, r.couplings.largest_eigenvalue()? * r.config.model.j);
    let summary = EnsembleSummary {
        field: g,
        size: r.size,
        ground_energy_density: cache.ground_energy() / l,
        states: rows,
        critical_temperature: tc,
        critical_energy_density: if tc > 0.0 { Some(canonical_energy_density(&cache, tc)?) } else { None },
    };
    Ok(vec![
        (paths::ensemble_states(g), st.to_bytes()),
        (paths::ensemble_thermal(g), thermal.to_bytes()),
        (paths::ensemble_grid(g), grid.to_bytes()),
        (paths::ensemble_json(g), io::json_bytes(&summary)),
    ])
}

// ------------------------------------------------------------- monte carlo

pub const MC_HEADER: [&str; 12] =
    ["L", "gamma", "T", "m2", "m2_err", "m4", "m4_err", "u4", "u4_err", "energy_density", "energy_density_err", "seed"];

pub fn mc_tasks(r: &Resolved) -> Vec<Task<'_>> {
    let Some(block) = &r.config.mc else { return Vec::new() };
    let m = &r.config.model;
    block
        .sizes
        .iter()
        .map(|&size| {
            let key = (size, &block.temperatures, block.measurements, block.seed, block.chains, block.gamma, m.gamma, m.j, m.provenance, m.denominator);
            Task::new(format!("mc/L{size}"), "mc", &key, move || mc_outputs(r, size))
        })
        .collect()
}

fn mc_outputs(r: &Resolved, size: usize) -> TaskResult<Outputs> {
    let block = r.config.mc.as_ref().expect("mc tasks need the block");
    let couplings = r.mc_couplings(size)?;
    let gamma = couplings.gamma().map(num).unwrap_or_default();
    let mut t = Table::new(&MC_HEADER).comment(format!("L={size}, provenance={}", couplings.provenance()));
    for (k, &temp) in block.temperatures.iter().enumerate() {
        let seed = derive_seed(block.seed, &(size, k));
        let chains = (0..block.chains)
            .map(|c| run_chain(&couplings, temp, ChainOptions::new(block.measurements, derive_seed(seed, &c))))
            .collect::<Result<Vec<_>, _>>()?;
        let est = merge_estimates(&chains)?;
        let u4 = u4_from_estimate(&est)?;
        t.push(vec![
            size.to_string(),
            gamma.clone(),
            num(temp),
            num(est.m2.mean),
            num(est.m2.error),
            num(est.m4.mean),
            num(est.m4.error),
            num(u4.value),
            num(u4.error),
            num(est.energy.mean),
            num(est.energy.error),
            seed.to_string(),
        ]);
    }
    Ok(vec![(paths::mc(size), t.to_bytes())])
}

// ----------------------------------------------------------- phase diagram

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridExport {
    pub ensemble: String,
    pub fields: Vec<f64>,
    pub energy_densities: Vec<f64>,
    /// row-major by field; `null` marks energies with no states
    pub sx2: Vec<Option<f64>>,
    pub sz: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalExport {
    pub field: f64,
    pub temperature: f64,
    pub temperature_error: f64,
    pub energy_density: Option<f64>,
    pub energy_error: Option<f64>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseExport {
    pub size: usize,
    pub axis: String,
    pub grids: Vec<GridExport>,
    pub critical: Vec<CriticalExport>,
}

fn phase_inputs(r: &Resolved) -> Vec<String> {
    let mut v = Vec::new();
    for &g in &r.config.model.fields {
        for (s, _) in &r.states {
            v.push(paths::quench_summary(g, &s.to_string()));
        }
        if r.config.ensembles.is_some() {
            v.push(paths::ensemble_json(g));
            v.push(paths::ensemble_grid(g));
        }
    }
    v
}

/// Builds the phase-diagram task; inputs must already exist.
pub fn phase_tasks<'a>(r: &'a Resolved, dir: &'a Path) -> TaskResult<Vec<Task<'a>>> {
    let inputs = phase_inputs(r);
    let key = (input_hashes(dir, &inputs)?, coupling_key(r));
    Ok(vec![Task::new("phase-diagram".into(), "phase-diagram", &key, move || phase_outputs(r, dir))])
}

/// Cells keyed by `(g, ε)`; equal energies at one field are averaged.
fn to_grid(ensemble: &str, cells: &[(f64, f64, Option<f64>, Option<f64>)]) -> TaskResult<GridExport> {
    let mut fields: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let mut eps: Vec<f64> = cells.iter().map(|c| c.1).collect();
    for v in [&mut fields, &mut eps] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let n = fields.len() * eps.len();
    let mut acc = vec![(0.0, 0.0, 0usize, false); n];
    let mut seen = vec![false; n];
    for &(g, e, a, b) in cells {
        let k = fields.binary_search_by(|x| x.total_cmp(&g)).unwrap() * eps.len()
            + eps.binary_search_by(|x| x.total_cmp(&e)).unwrap();
        seen[k] = true;
        if let (Some(a), Some(b)) = (a, b) {
            acc[k].0 += a;
            acc[k].1 += b;
            acc[k].2 += 1;
        } else {
            acc[k].3 = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(TaskError::Other(format!(
            "{ensemble} grid is ragged: energy densities differ between fields"
        )));
    }
    let sx2 = acc.iter().map(|c| (c.2 > 0).then(|| c.0 / c.2 as f64)).collect();
    let sz = acc.iter().map(|c| (c.2 > 0).then(|| c.1 / c.2 as f64)).collect();
    Ok(GridExport { ensemble: ensemble.into(), fields, energy_densities: eps, sx2, sz })
}

fn phase_outputs(r: &Resolved, dir: &Path) -> TaskResult<Outputs> {
    let mut ta = Vec::new();
    let mut ensemble_summaries = Vec::new();
    let mut canonical = Vec::new();
    for &g in &r.config.model.fields {
        for (s, _) in &r.states {
            let q: QuenchSummary = io::read_json(&dir.join(paths::quench_summary(g, &s.to_string())))?;
            let last = q.averages.last().ok_or_else(|| TaskError::Other("quench summary has no averages".into()))?;
            ta.push((g, q.energy_density, Some(last.sx2), Some(last.sz)));
        }
        if r.config.ensembles.is_some() {
            let path = dir.join(paths::ensemble_grid(g));
            let t = Table::read(&path)?;
            let e = t.required_floats("energy_density").map_err(|m| TaskError::malformed(&path, m))?;
            let a = t.floats("sx2").map_err(|m| TaskError::malformed(&path, m))?;
            let b = t.floats("sz").map_err(|m| TaskError::malformed(&path, m))?;
            for k in 0..e.len() {
                canonical.push((g, e[k], a[k], b[k]));
            }
            let summary: EnsembleSummary = io::read_json(&dir.join(paths::ensemble_json(g)))?;
            ensemble_summaries.push(summary);
        }
    }
    let mut grids = vec![to_grid("time-averaged", &ta)?];
    if !canonical.is_empty() {
        grids.push(to_grid("canonical", &canonical)?);
    }

    let lambda = r.couplings.largest_eigenvalue()? * r.config.model.j;
    let critical: Vec<CriticalExport> = r
        .config
        .model
        .fields
        .iter()
        .map(|&g| CriticalExport {
            field: g,
            temperature: mean_field_tc_scaled(g, lambda),
            temperature_error: 0.0,
            energy_density: ensemble_summaries.iter().find(|s| s.field == g).and_then(|s| s.critical_energy_density),
            energy_error: None,
            source: format!("mean-field, small-L estimate (L={})", r.size),
        })
        .collect();

    let mut csv = Table::new(&["ensemble", "g", "energy_density", "sx2", "sz"]).comment(format!("L={}", r.size));
    for gr in &grids {
        for (i, g) in gr.fields.iter().enumerate() {
            for (j, e) in gr.energy_densities.iter().enumerate() {
                let k = i * gr.energy_densities.len() + j;
                csv.push(vec![gr.ensemble.clone(), num(*g), num(*e), opt(gr.sx2[k]), opt(gr.sz[k])]);
            }
        }
    }
    let mut crit = Table::new(&["g", "T_c", "T_c_err", "energy_density_c", "energy_density_c_err", "source"]);
    for c in &critical {
        crit.push(vec![
            num(c.field),
            num(c.temperature),
            num(c.temperature_error),
            opt(c.energy_density),
            opt(c.energy_error),
            c.source.clone(),
        ]);
    }
    let export = PhaseExport { size: r.size, axis: "energy-density".into(), grids, critical };
    Ok(vec![
        (paths::GRID_JSON.into(), io::json_bytes(&export)),
        (paths::GRID_CSV.into(), csv.to_bytes()),
        (paths::CRITICAL_CSV.into(), crit.to_bytes()),
    ])
}

// ---------------------------------------------------------------- collapse

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingExport {
    pub size_small: usize,
    pub size_large: usize,
    pub temperature: Option<f64>,
    pub error: Option<f64>,
    pub u4: Option<f64>,
    pub u4_error: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitExport {
    pub tc: f64,
    pub a: f64,
    pub omega: f64,
    pub theta_t: f64,
    pub b: f64,
    pub c: f64,
    pub dof: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseExport {
    pub sizes: Vec<usize>,
    pub crossings: Vec<CrossingExport>,
    pub tc: Option<f64>,
    pub tc_error: Option<f64>,
    pub tc_systematic: Option<f64>,
    pub fit: Option<FitExport>,
    pub theta_t: f64,
    pub collapsed_spread: Option<f64>,
    pub uncollapsed_spread: Option<f64>,
    pub out_of_bounds: Vec<(usize, f64)>,
}

pub fn collapse_tasks<'a>(r: &'a Resolved, dir: &'a Path) -> TaskResult<Vec<Task<'a>>> {
    let Some(block) = &r.config.mc else {
        return Err(TaskError::Other("collapse needs an [mc] block".into()));
    };
    let inputs: Vec<String> = block.sizes.iter().map(|&l| paths::mc(l)).collect();
    let key = (input_hashes(dir, &inputs)?, &r.config.analysis);
    Ok(vec![Task::new("collapse".into(), "collapse", &key, move || collapse_outputs(r, dir))])
}

pub fn read_binder(path: &Path) -> TaskResult<BinderCurve> {
    let t = Table::read(path)?;
    let f = |name: &str| t.required_floats(name).map_err(|m| TaskError::malformed(path, m));
    let size = f("L")?.first().copied().ok_or_else(|| TaskError::malformed(path, "no rows"))? as usize;
    Ok(BinderCurve::new(size, f("T")?, f("u4")?, f("u4_err")?, BinderSource::MonteCarlo)?)
}

fn collapse_outputs(r: &Resolved, dir: &Path) -> TaskResult<Outputs> {
    let block = r.config.mc.as_ref().unwrap();
    let a = &r.config.analysis;
    let mut sizes = block.sizes.clone();
    sizes.sort_unstable();
    let curves: Vec<BinderCurve> =
        sizes.iter().map(|&l| read_binder(&dir.join(paths::mc(l)))).collect::<TaskResult<_>>()?;

    let mut binder = Table::new(&["L", "T", "u4", "u4_err"]);
    for c in &curves {
        for k in 0..c.control.len() {
            binder.push(vec![c.size.to_string(), num(c.control[k]), num(c.values[k]), num(c.errors[k])]);
        }
    }
    let options = CrossingOptions { resamples: a.resamples, tolerance: a.tolerance, seed: a.seed };
    let mut crossings = Vec::new();
    let mut points = Vec::new();
    let mut u4c = Vec::new();
    for w in curves.windows(2) {
        let res = find_crossing_with(&w[0], &w[1], options)?;
        let (status, c) = match res {
            CrossingResult::Found(c) => ("found", Some(c)),
            CrossingResult::NoCrossing => ("no-crossing", None),
            CrossingResult::Degenerate => ("degenerate", None),
        };
        if let Some(c) = c {
            points.push(CrossingPoint { size: w[0].size, control: c.control, error: c.error });
            u4c.push(c.u4);
        }
        crossings.push(CrossingExport {
            size_small: w[0].size,
            size_large: w[1].size,
            temperature: c.map(|c| c.control),
            error: c.map(|c| c.error),
            u4: c.map(|c| c.u4),
            u4_error: c.map(|c| c.u4_error),
            status: status.into(),
        });
    }
    let mut cross_csv = Table::new(&["L_small", "L_large", "T_cross", "T_cross_err", "u4_cross", "u4_cross_err", "status"]);
    for c in &crossings {
        cross_csv.push(vec![
            c.size_small.to_string(),
            c.size_large.to_string(),
            opt(c.temperature),
            opt(c.error),
            opt(c.u4),
            opt(c.u4_error),
            c.status.clone(),
        ]);
    }

    let (tc, tc_error, tc_systematic) = match points.len() {
        0 => (None, None, None),
        1 => (Some(points[0].control), Some(points[0].error), None),
        _ => {
            let e = extrapolate_tc(&points)?;
            (Some(e.tc), Some(e.error), Some(e.systematic))
        }
    };
    let fit = if points.len() >= 3 {
        let ls: Vec<f64> = points.iter().map(|p| p.size as f64).collect();
        let ts: Vec<f64> = points.iter().map(|p| p.control).collect();
        scaling_fit(&ls, &ts, &u4c).ok()
    } else {
        None
    };
    // the mean-field exponent when no fit is available
    let theta_t = fit.as_ref().map(|f| f.theta_t).unwrap_or(0.5);
    let tc_by_size: Option<Vec<f64>> = match (&fit, tc) {
        (Some(f), _) => Some(curves.iter().map(|c| f.tc_at(c.size as f64)).collect()),
        (None, Some(t)) => Some(vec![t; curves.len()]),
        _ => None,
    };
    let spread = tc_by_size.as_ref().and_then(|t| collapse_spread(&curves, t, theta_t).ok());

    let mut collapsed = Table::new(&["L", "x", "u4", "u4_err"]).comment(format!("theta_t={theta_t}"));
    if let Some(tcs) = &tc_by_size {
        for (c, tcl) in curves.iter().zip(tcs) {
            let f = (c.size as f64).powf(theta_t);
            for k in 0..c.control.len() {
                collapsed.push(vec![c.size.to_string(), num((c.control[k] - tcl) * f), num(c.values[k]), num(c.errors[k])]);
            }
        }
    }

    let export = CollapseExport {
        sizes,
        crossings,
        tc,
        tc_error,
        tc_systematic,
        fit: fit.map(|f| FitExport { tc: f.tc, a: f.a, omega: f.omega, theta_t: f.theta_t, b: f.b, c: f.c, dof: f.dof }),
        theta_t,
        collapsed_spread: spread.map(|s| s.collapsed),
        uncollapsed_spread: spread.map(|s| s.uncollapsed),
        out_of_bounds: curves
            .iter()
            .flat_map(|c| c.out_of_bounds().into_iter().map(move |k| (c.size, c.control[k])))
            .collect(),
    };
    Ok(vec![
        (paths::BINDER_CSV.into(), binder.to_bytes()),
        (paths::CROSSINGS_CSV.into(), cross_csv.to_bytes()),
        (paths::COLLAPSED_CSV.into(), collapsed.to_bytes()),
        (paths::COLLAPSE_JSON.into(), io::json_bytes(&export)),
    ])
}

/// Everything a full run reads or writes lives under this directory.
pub fn output_dir(r: &Resolved, config_path: &Path, cli_out: Option<&Path>) -> PathBuf {
    if let Some(o) = cli_out {
        return o.to_path_buf();
    }
    match &r.config.output {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => config_path.parent().unwrap_or(Path::new(".")).join(p),
        None => PathBuf::from("out"),
    }
}
