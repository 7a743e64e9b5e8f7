//! Spin model definition: coupling matrices, x-basis product states, their
//! energies, and energy-targeted selection of initial states.
//!
//! Couplings are stored with every prefactor folded in, so that the
//! Hamiltonian always reads `H = -Σ_{i<j} J_ij σˣ_i σˣ_j - g Σ_i σᶻ_i`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Where a coupling matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Kac-normalized exponential decay with rate `γ/L`.
    Ideal,
    /// Exponential decay with a fixed, size-independent rate and no prefactor.
    Unnormalized,
    /// Synthesized from trapped-ion normal modes and beam parameters.
    IonDerived,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Ideal => "ideal",
            Provenance::Unnormalized => "unnormalized",
            Provenance::IonDerived => "ion-derived",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Provenance::Ideal),
            "unnormalized" => Ok(Provenance::Unnormalized),
            "ion-derived" => Ok(Provenance::IonDerived),
            other => Err(Error::param("provenance", format!("unknown provenance `{other}`"))),
        }
    }
}

/// Symmetric `L × L` matrix of pairwise σˣσˣ couplings with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    size: usize,
    entries: Vec<f64>,
    provenance: Provenance,
    gamma: Option<f64>,
}

impl CouplingMatrix {
    /// Builds a matrix from row-major entries. The input must be symmetric to
    /// `1e-12` relative; it is symmetrized exactly and the diagonal is zeroed.
    pub fn from_row_major(
        size: usize,
        entries: Vec<f64>,
        provenance: Provenance,
        gamma: Option<f64>,
    ) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidSize { what: "L", got: size, min: 2 });
        }
        if entries.len() != size * size {
            return Err(Error::SizeMismatch { expected: size * size, got: entries.len() });
        }
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut entries = entries;
        for i in 0..size {
            entries[i * size + i] = 0.0;
            for j in (i + 1)..size {
                let a = entries[i * size + j];
                let b = entries[j * size + i];
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::param("couplings", "non-finite entry"));
                }
                if (a - b).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::param(
                        "couplings",
                        format!("not symmetric at ({i}, {j}): {a} vs {b}"),
                    ));
                }
                let avg = 0.5 * (a + b);
                entries[i * size + j] = avg;
                entries[j * size + i] = avg;
            }
        }
        Ok(CouplingMatrix { size, entries, provenance, gamma })
    }

    /// Builds a matrix whose `(i, j)` entry depends only on `|i - j|`.
    fn from_distance_fn(
        size: usize,
        provenance: Provenance,
        gamma: Option<f64>,
        f: impl Fn(usize) -> f64,
    ) -> Self {
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            for j in (i + 1)..size {
                let v = f(j - i);
                entries[i * size + j] = v;
                entries[j * size + i] = v;
            }
        }
        CouplingMatrix { size, entries, provenance, gamma }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn max_entry(&self) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for i in 0..self.size {
            for j in 0..self.size {
                if i != j {
                    m = m.max(self.get(i, j));
                }
            }
        }
        m
    }

    pub fn min_offdiagonal(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.size {
            for j in 0..self.size {
                if i != j {
                    m = m.min(self.get(i, j));
                }
            }
        }
        m
    }

    /// Every entry multiplied by `factor`; provenance and γ are kept.
    pub fn scaled(&self, factor: f64) -> Self {
        CouplingMatrix {
            size: self.size,
            entries: self.entries.iter().map(|v| v * factor).collect(),
            provenance: self.provenance,
            gamma: self.gamma,
        }
    }

    /// Distance profile `J̄(l) = (1/(L-l)) Σ_i J_{i,i+l}` for `l = 1..L-1`
    /// (index 0 of the result is `l = 1`).
    pub fn distance_profile(&self) -> Vec<f64> {
        (1..self.size)
            .map(|l| {
                let s: f64 = (0..self.size - l).map(|i| self.get(i, i + l)).sum();
                s / (self.size - l) as f64
            })
            .collect()
    }

    /// Largest eigenvalue of `J`, the classical mean-field critical temperature at `g = 0`.
    pub fn largest_eigenvalue(&self) -> Result<f64> {
        let e = crate::linalg::sym_eigen_row_major(self.size, &self.entries)?;
        Ok(e.values[self.size - 1])
    }

    /// Row sums `Σ_j J_ij`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Keeps only the listed sites, in order.
    pub fn submatrix(&self, keep: &[usize]) -> Result<Self> {
        let n = keep.len();
        if n < 2 {
            return Err(Error::InvalidSize { what: "active sites", got: n, min: 2 });
        }
        let mut entries = vec![0.0; n * n];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                if i >= self.size || j >= self.size {
                    return Err(Error::SizeMismatch { expected: self.size, got: i.max(j) + 1 });
                }
                entries[a * n + b] = self.get(i, j);
            }
        }
        Ok(CouplingMatrix { size: n, entries, provenance: self.provenance, gamma: self.gamma })
    }

    /// Replaces the provenance tag.
    pub fn with_provenance(mut self, provenance: Provenance, gamma: Option<f64>) -> Self {
        self.provenance = provenance;
        self.gamma = gamma;
        self
    }
}

/// Kac factor `N = (1/(L-1)) Σ_{i<j} exp(-(γ/L)|i-j|)`.
pub fn kac_normalization(size: usize, gamma: f64) -> Result<f64> {
    if size < 2 {
        return Err(Error::InvalidSize { what: "L", got: size, min: 2 });
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::param("gamma", "must be finite and non-negative"));
    }
    let rate = gamma / size as f64;
    // (L - l) pairs sit at distance l.
    let sum: f64 = (1..size).map(|l| (size - l) as f64 * libm::exp(-rate * l as f64)).sum();
    Ok(sum / (size - 1) as f64)
}

/// Kac-normalized couplings `J_ij = (J / 2N) exp(-(γ/L)|i-j|)`.
pub fn build_ideal_couplings(size: usize, gamma: f64, j: f64) -> Result<CouplingMatrix> {
    let norm = kac_normalization(size, gamma)?;
    let rate = gamma / size as f64;
    let pref = j / (2.0 * norm);
    Ok(CouplingMatrix::from_distance_fn(size, Provenance::Ideal, Some(gamma), |l| {
        pref * libm::exp(-rate * l as f64)
    }))
}

/// Size-independent couplings `J_ij = exp(-(γ/denominator)|i-j|)`.
pub fn build_unnormalized_couplings(
    size: usize,
    denominator: f64,
    gamma: f64,
) -> Result<CouplingMatrix> {
    if size < 2 {
        return Err(Error::InvalidSize { what: "L", got: size, min: 2 });
    }
    if !(denominator > 0.0) {
        return Err(Error::param("denominator", "must be positive"));
    }
    let rate = gamma / denominator;
    Ok(CouplingMatrix::from_distance_fn(size, Provenance::Unnormalized, Some(gamma), |l| {
        libm::exp(-rate * l as f64)
    }))
}

/// Couplings plus transverse field.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub couplings: CouplingMatrix,
    /// Transverse field `g`, in the same units as the couplings.
    pub field: f64,
    /// Energy unit `J` used when reporting energy densities.
    pub energy_unit: f64,
}

impl ModelSpec {
    pub fn new(couplings: CouplingMatrix, field: f64) -> Self {
        ModelSpec { couplings, field, energy_unit: 1.0 }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.couplings.size()
    }

    pub fn with_field(&self, field: f64) -> Self {
        ModelSpec { couplings: self.couplings.clone(), field, energy_unit: self.energy_unit }
    }

    pub(crate) fn check_size(&self, size: usize) -> Result<()> {
        if size != self.size() {
            return Err(Error::SizeMismatch { expected: self.size(), got: size });
        }
        Ok(())
    }
}

/// Product state of σˣ eigenstates, optionally rotated by a global angle
/// about the y axis. `+1` is `u` (↑ along x), `-1` is `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    spins: Vec<i8>,
    tilt: f64,
}

impl ProductState {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        Self::with_tilt(spins, 0.0)
    }

    pub fn with_tilt(spins: Vec<i8>, tilt: f64) -> Result<Self> {
        if spins.is_empty() {
            return Err(Error::InvalidSize { what: "L", got: 0, min: 1 });
        }
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::param("spins", format!("entry {bad} is not ±1")));
        }
        if !tilt.is_finite() {
            return Err(Error::param("tilt", "must be finite"));
        }
        Ok(ProductState { spins, tilt })
    }

    pub fn polarized(size: usize, spin: i8) -> Self {
        ProductState { spins: vec![spin.signum(); size], tilt: 0.0 }
    }

    /// Site `i` is up iff bit `L-1-i` of `key` is set, so that numeric order
    /// on keys is lexicographic order on `d < u` strings.
    pub fn from_key(size: usize, key: u64) -> Self {
        let spins = (0..size)
            .map(|i| if (key >> (size - 1 - i)) & 1 == 1 { 1 } else { -1 })
            .collect();
        ProductState { spins, tilt: 0.0 }
    }

    pub fn key(&self) -> u64 {
        let n = self.spins.len();
        self.spins
            .iter()
            .enumerate()
            .fold(0u64, |k, (i, &s)| if s > 0 { k | (1 << (n - 1 - i)) } else { k })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.spins.len()
    }

    #[inline]
    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    #[inline]
    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    pub fn flipped(&self) -> Self {
        ProductState { spins: self.spins.iter().map(|s| -s).collect(), tilt: self.tilt }
    }

    pub fn magnetization(&self) -> i64 {
        self.spins.iter().map(|&s| s as i64).sum()
    }

    pub fn to_spin_string(&self) -> String {
        self.spins.iter().map(|&s| if s > 0 { 'u' } else { 'd' }).collect()
    }
}

impl fmt::Display for ProductState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.spins {
            f.write_str(if s > 0 { "u" } else { "d" })?;
        }
        if self.tilt != 0.0 {
            write!(f, "@{}", self.tilt)?;
        }
        Ok(())
    }
}

impl FromStr for ProductState {
    type Err = Error;

    /// Parses `"dduu"` or `"dduu@0.05"` (tilt in radians).
    fn from_str(s: &str) -> Result<Self> {
        let (body, tilt) = match s.split_once('@') {
            Some((b, t)) => {
                let t = t
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::param("tilt", format!("cannot parse `{t}`")))?;
                (b, t)
            }
            None => (s, 0.0),
        };
        let spins = body
            .trim()
            .chars()
            .map(|c| match c {
                'u' | 'U' | '↑' => Ok(1),
                'd' | 'D' | '↓' => Ok(-1),
                other => Err(Error::param("state", format!("unexpected character `{other}`"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        ProductState::with_tilt(spins, tilt)
    }
}

/// Ising energy `-Σ_{i<j} J_ij s_i s_j` of a spin configuration.
pub fn ising_energy(couplings: &CouplingMatrix, spins: &[i8]) -> f64 {
    let n = couplings.size();
    let mut e = 0.0;
    for i in 0..n {
        let row = couplings.row(i);
        let si = spins[i] as f64;
        let mut acc = 0.0;
        for j in (i + 1)..n {
            acc += row[j] * spins[j] as f64;
        }
        e -= si * acc;
    }
    e
}

/// `⟨ψ|H|ψ⟩` for a (possibly tilted) x-product state.
///
/// A tilt θ maps each Bloch vector `s_i x̂` to `s_i (cos θ x̂ - sin θ ẑ)`, so the
/// Ising part scales by `cos² θ` and the field contributes `g sin θ Σ s_i`.
/// For θ = 0 the field term vanishes identically.
pub fn product_state_energy(state: &ProductState, model: &ModelSpec) -> Result<f64> {
    model.check_size(state.size())?;
    let ising = ising_energy(&model.couplings, state.spins());
    if state.tilt() == 0.0 {
        return Ok(ising);
    }
    let c = libm::cos(state.tilt());
    let s = libm::sin(state.tilt());
    Ok(c * c * ising + model.field * s * state.magnetization() as f64)
}

/// `⟨H²⟩ - ⟨H⟩²` of an untilted x-product state.
///
/// The Ising part is diagonal on such states; only `-g Σ σᶻ` fluctuates, and
/// `⟨σᶻ_i σᶻ_j⟩ = δ_ij`, giving exactly `g² L`.
pub fn product_state_energy_variance(state: &ProductState, model: &ModelSpec) -> Result<f64> {
    model.check_size(state.size())?;
    if state.tilt() != 0.0 {
        return Err(Error::param("tilt", "variance is defined here for untilted states only"));
    }
    Ok(model.field * model.field * state.size() as f64)
}

/// Options for [`select_initial_states`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOptions {
    /// Largest `L` for which all `2^L` states are enumerated.
    pub exhaustive_cap: usize,
    /// Allow a greedy single-flip search above the cap.
    pub heuristic: bool,
    /// Two candidates within this distance of each other count as tied.
    pub tie_tolerance: f64,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions { exhaustive_cap: 26, heuristic: false, tie_tolerance: 1e-12 }
    }
}

/// One chosen initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedState {
    pub state: ProductState,
    pub energy: f64,
    /// Indices into [`Selection::targets`] that picked this state.
    pub targets: Vec<usize>,
}

/// A target for which more than one state was equally close.
#[derive(Debug, Clone, PartialEq)]
pub struct TieRecord {
    pub target: usize,
    pub kept: ProductState,
    /// Up to [`MAX_TIES_RECORDED`] alternatives that were discarded.
    pub alternatives: Vec<ProductState>,
    pub total: usize,
}

pub const MAX_TIES_RECORDED: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub targets: Vec<f64>,
    pub states: Vec<SelectedState>,
    pub ties: Vec<TieRecord>,
    pub heuristic: bool,
}

#[derive(Clone, Copy)]
struct Best {
    dist: f64,
    key: u64,
    energy: f64,
    ties: usize,
}

/// Picks, for each of `n_targets` energies equally spaced on `[E_min, e_max]`,
/// the x-product state whose energy is closest to the target. `E_min` is the
/// energy of the fully polarized state. Ties go to the lexicographically
/// smallest `d < u` string; repeated picks are merged.
pub fn select_initial_states(
    model: &ModelSpec,
    n_targets: usize,
    e_max: f64,
    options: SelectionOptions,
) -> Result<Selection> {
    let size = model.size();
    if n_targets == 0 {
        return Err(Error::InvalidSize { what: "n_targets", got: 0, min: 1 });
    }
    let e_min = ising_energy(&model.couplings, &vec![-1i8; size]);
    if !(e_max >= e_min) {
        return Err(Error::param("e_max", format!("{e_max} is below E_min = {e_min}")));
    }
    let targets: Vec<f64> = if n_targets == 1 {
        vec![e_min]
    } else {
        (0..n_targets)
            .map(|k| e_min + (e_max - e_min) * k as f64 / (n_targets - 1) as f64)
            .collect()
    };

    let heuristic = size > options.exhaustive_cap;
    if heuristic && !options.heuristic {
        return Err(Error::Capability {
            what: "exhaustive product-state search",
            size,
            cap: options.exhaustive_cap,
            hint: "enable the heuristic search flag",
        });
    }
    if size > 63 {
        return Err(Error::Capability {
            what: "product-state search",
            size,
            cap: 63,
            hint: "states are keyed by 64-bit integers",
        });
    }

    let (best, ties) = if heuristic {
        (greedy_search(model, &targets), Vec::new())
    } else {
        exhaustive_search(model, &targets, options.tie_tolerance)
    };

    let mut states: Vec<SelectedState> = Vec::new();
    for (t, b) in best.iter().enumerate() {
        if let Some(existing) = states.iter_mut().find(|s| s.state.key() == b.key) {
            existing.targets.push(t);
        } else {
            states.push(SelectedState {
                state: ProductState::from_key(size, b.key),
                energy: b.energy,
                targets: vec![t],
            });
        }
    }
    Ok(Selection { targets, states, ties, heuristic })
}

fn exhaustive_search(
    model: &ModelSpec,
    targets: &[f64],
    tol: f64,
) -> (Vec<Best>, Vec<TieRecord>) {
    let size = model.size();
    let cp = &model.couplings;
    let mut spins = vec![-1i8; size];
    let mut key = 0u64;
    let mut fields = vec![0.0; size];
    let resync = |spins: &[i8], fields: &mut [f64]| -> f64 {
        for (i, h) in fields.iter_mut().enumerate() {
            *h = cp.row(i).iter().zip(spins).map(|(j, &s)| j * s as f64).sum();
        }
        ising_energy(cp, spins)
    };
    let mut energy = resync(&spins, &mut fields);

    let mut best: Vec<Best> = targets
        .iter()
        .map(|&t| Best { dist: (energy - t).abs(), key: 0, energy, ties: 0 })
        .collect();
    let mut alts: Vec<Vec<u64>> = vec![Vec::new(); targets.len()];

    let total = 1u64 << size;
    for step in 1..total {
        // Gray code: flip the lowest set bit of the step counter.
        let site = step.trailing_zeros() as usize;
        let s_old = spins[site] as f64;
        energy += 2.0 * s_old * fields[site];
        let row = cp.row(site);
        for (h, j) in fields.iter_mut().zip(row) {
            *h -= 2.0 * j * s_old;
        }
        spins[site] = -spins[site];
        key ^= 1 << (size - 1 - site);
        if step % 1024 == 0 {
            energy = resync(&spins, &mut fields);
        }

        for (t, &target) in targets.iter().enumerate() {
            let dist = (energy - target).abs();
            let b = &mut best[t];
            if dist < b.dist - tol {
                *b = Best { dist, key, energy, ties: 0 };
                alts[t].clear();
            } else if dist <= b.dist + tol {
                b.ties += 1;
                let loser = if key < b.key {
                    let old = b.key;
                    *b = Best { dist: dist.min(b.dist), key, energy, ties: b.ties };
                    old
                } else {
                    key
                };
                let a = &mut alts[t];
                a.push(loser);
                if a.len() > 4 * MAX_TIES_RECORDED {
                    a.sort_unstable();
                    a.truncate(MAX_TIES_RECORDED);
                }
            }
        }
    }

    let ties = best
        .iter()
        .enumerate()
        .filter(|(_, b)| b.ties > 0)
        .map(|(t, b)| {
            let mut a = alts[t].clone();
            a.sort_unstable();
            a.dedup();
            a.truncate(MAX_TIES_RECORDED);
            TieRecord {
                target: t,
                kept: ProductState::from_key(size, b.key),
                alternatives: a.into_iter().map(|k| ProductState::from_key(size, k)).collect(),
                total: b.ties + 1,
            }
        })
        .collect();
    (best, ties)
}

/// Greedy single-flip descent on `|E - target|` from the polarized state.
fn greedy_search(model: &ModelSpec, targets: &[f64]) -> Vec<Best> {
    let size = model.size();
    let cp = &model.couplings;
    targets
        .iter()
        .map(|&target| {
            let mut spins = vec![-1i8; size];
            let mut energy = ising_energy(cp, &spins);
            loop {
                let mut best_site = None;
                let mut best_dist = (energy - target).abs();
                for site in 0..size {
                    let h: f64 =
                        cp.row(site).iter().zip(&spins).map(|(j, &s)| j * s as f64).sum();
                    let e_new = energy + 2.0 * spins[site] as f64 * h;
                    let d = (e_new - target).abs();
                    if d < best_dist - 1e-14 {
                        best_dist = d;
                        best_site = Some((site, e_new));
                    }
                }
                match best_site {
                    Some((site, e_new)) => {
                        spins[site] = -spins[site];
                        energy = e_new;
                    }
                    None => break,
                }
            }
            let state = ProductState { spins, tilt: 0.0 };
            Best { dist: (energy - target).abs(), key: state.key(), energy, ties: 0 }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kac_trivial_values() {
        assert_eq!(kac_normalization(10, 0.0).unwrap(), 5.0);
        assert_relative_eq!(kac_normalization(2, 10.8).unwrap(), libm::exp(-5.4), max_relative = 1e-15);
        assert!(matches!(kac_normalization(1, 0.0), Err(Error::InvalidSize { .. })));
    }

    #[test]
    fn kac_matches_double_loop() {
        let (l, gamma) = (13usize, 10.8);
        let mut sum = 0.0;
        for i in 0..l {
            for j in (i + 1)..l {
                sum += libm::exp(-(gamma / l as f64) * (j - i) as f64);
            }
        }
        let brute = sum / (l - 1) as f64;
        assert_relative_eq!(kac_normalization(l, gamma).unwrap(), brute, max_relative = 1e-14);
    }

    #[test]
    fn ideal_couplings_infinite_range_is_one_over_l() {
        let c = build_ideal_couplings(10, 0.0, 1.0).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { 0.0 } else { 0.1 };
                assert_relative_eq!(c.get(i, j), want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ideal_couplings_short_range_ratio() {
        let c = build_ideal_couplings(8, 80.0, 1.0).unwrap();
        assert_relative_eq!(c.get(2, 4) / c.get(2, 3), libm::exp(-10.0), max_relative = 1e-12);
        assert_eq!(c.max_entry(), c.get(0, 1));
    }

    #[test]
    fn ideal_profile_decays_exponentially() {
        let c = build_ideal_couplings(13, 10.8, 1.0).unwrap();
        let p = c.distance_profile();
        for w in p.windows(2) {
            assert_relative_eq!(w[1] / w[0], libm::exp(-10.8 / 13.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn unnormalized_values() {
        let c = build_unnormalized_couplings(13, 13.0, 10.8).unwrap();
        assert_relative_eq!(c.get(4, 5), 0.435_714_0, max_relative = 1e-6);
        let flat = build_unnormalized_couplings(5, 13.0, 0.0).unwrap();
        assert!(flat.entries().iter().enumerate().all(|(k, &v)| v == if k % 6 == 0 { 0.0 } else { 1.0 }));
        let big = build_unnormalized_couplings(26, 13.0, 10.8).unwrap();
        for l in 1..13 {
            assert_eq!(big.get(3, 3 + l), c.get(0, l));
        }
        assert!(build_unnormalized_couplings(5, 0.0, 1.0).is_err());
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let e = vec![0.0, 1.0, 2.0, 0.0];
        assert!(CouplingMatrix::from_row_major(2, e, Provenance::IonDerived, None).is_err());
    }

    #[test]
    fn polarized_and_neel_energies() {
        let m = ModelSpec::new(build_ideal_couplings(10, 0.0, 1.0).unwrap(), 0.7);
        let down = ProductState::polarized(10, -1);
        assert_relative_eq!(product_state_energy(&down, &m).unwrap() / 10.0, -0.45, epsilon = 1e-14);
        let neel: ProductState = "dudududududu"[..10].parse().unwrap();
        assert_relative_eq!(product_state_energy(&neel, &m).unwrap() / 10.0, 0.05, epsilon = 1e-14);
    }

    #[test]
    fn polarized_energy_l13_near_table_anchor() {
        let m = ModelSpec::new(build_ideal_couplings(13, 10.8, 1.0).unwrap(), 0.31);
        let e = product_state_energy(&ProductState::polarized(13, -1), &m).unwrap() / 13.0;
        assert!((e - (-0.46)).abs() < 0.05, "ε = {e}");
    }

    #[test]
    fn variance_is_g_squared_l() {
        let m = ModelSpec::new(build_ideal_couplings(13, 10.8, 1.0).unwrap(), 0.31);
        let v = product_state_energy_variance(&ProductState::polarized(13, 1), &m).unwrap();
        assert_relative_eq!(v, 1.2493, max_relative = 1e-12);
        let m0 = m.with_field(0.0);
        assert_eq!(product_state_energy_variance(&ProductState::polarized(13, 1), &m0).unwrap(), 0.0);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let m = ModelSpec::new(build_ideal_couplings(4, 1.0, 1.0).unwrap(), 0.1);
        let s = ProductState::polarized(5, 1);
        assert_eq!(product_state_energy(&s, &m), Err(Error::SizeMismatch { expected: 4, got: 5 }));
    }

    #[test]
    fn state_string_round_trip_and_key_order() {
        let s: ProductState = "dudd@0.25".parse().unwrap();
        assert_eq!(s.spins(), &[-1, 1, -1, -1]);
        assert_eq!(s.tilt(), 0.25);
        assert_eq!(s.to_string(), "dudd@0.25");
        assert_eq!(ProductState::from_key(4, s.key()).spins(), s.spins());
        let a: ProductState = "ddud".parse().unwrap();
        assert!(a.key() < s.key());
        assert!("dxd".parse::<ProductState>().is_err());
    }

    #[test]
    fn lowest_target_is_polarized_down() {
        let m = ModelSpec::new(build_ideal_couplings(7, 10.8, 1.0).unwrap(), 0.24);
        let sel = select_initial_states(&m, 5, 0.0, SelectionOptions::default()).unwrap();
        assert_eq!(sel.states[0].state.to_string(), "ddddddd");
        // all-up has the same energy; the tie is recorded and resolved to d…d
        assert!(sel.ties.iter().any(|t| t.target == 0 && t.alternatives.iter().any(|a| a.to_string() == "uuuuuuu")));
    }

    #[test]
    fn selection_cap_is_enforced() {
        let m = ModelSpec::new(build_ideal_couplings(12, 10.8, 1.0).unwrap(), 0.2);
        let opts = SelectionOptions { exhaustive_cap: 10, ..Default::default() };
        assert!(matches!(select_initial_states(&m, 3, 0.0, opts), Err(Error::Capability { .. })));
        let opts = SelectionOptions { exhaustive_cap: 10, heuristic: true, ..Default::default() };
        let sel = select_initial_states(&m, 3, 0.0, opts).unwrap();
        assert!(sel.heuristic);
        assert_eq!(sel.states[0].state.to_string(), "dddddddddddd");
    }
}
