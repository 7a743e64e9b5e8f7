//! Classical Monte Carlo of the `g = 0` chain with Wolff cluster updates on
//! the full long-range coupling matrix.
//!
//! Energies follow `E = −Σ_{i<j} J_ij s_i s_j`; bonds between aligned spins
//! activate with `p_ij = 1 − exp(−2 J_ij / T)`.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::model::{ising_energy, CouplingMatrix};
use crate::rng::{self, DefaultRng};

/// Largest size [`enumerate_moments`] accepts.
pub const ENUMERATION_CAP: usize = 24;

/// Number of blocks used for bootstrap errors.
pub const BOOTSTRAP_BLOCKS: usize = 64;

/// Bootstrap resamples per error estimate.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Updates between full energy recomputations.
const AUDIT_INTERVAL: u64 = 1 << 14;

/// Classical spins with incrementally maintained energy and magnetization.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinConfiguration {
    spins: Vec<i8>,
    energy: f64,
    magnetization: i64,
}

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>, couplings: &CouplingMatrix) -> Result<Self> {
        if spins.len() != couplings.size() {
            return Err(Error::SizeMismatch { expected: couplings.size(), got: spins.len() });
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::param("spins", "entries must be ±1"));
        }
        let energy = ising_energy(couplings, &spins);
        let magnetization = spins.iter().map(|&s| s as i64).sum();
        Ok(SpinConfiguration { spins, energy, magnetization })
    }

    pub fn polarized(couplings: &CouplingMatrix) -> Self {
        Self::new(vec![1; couplings.size()], couplings).unwrap()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `m = Σ s_i / L`
    pub fn magnetization(&self) -> f64 {
        self.magnetization as f64 / self.spins.len() as f64
    }

    /// Index with bit `i` set where `s_i = −1`.
    pub fn index(&self) -> usize {
        self.spins.iter().enumerate().fold(0, |k, (i, &s)| if s < 0 { k | (1 << i) } else { k })
    }

    /// Recomputes the energy; returns the drift of the cached value and resyncs it.
    pub fn audit(&mut self, couplings: &CouplingMatrix) -> f64 {
        let exact = ising_energy(couplings, &self.spins);
        let drift = self.energy - exact;
        self.energy = exact;
        drift
    }
}

/// Precomputed bond probabilities for one `(couplings, T)` pair.
#[derive(Debug, Clone)]
pub struct WolffKernel {
    size: usize,
    temperature: f64,
    couplings: Vec<f64>,
    /// `p_ij` scaled to `u64` thresholds so a bond fires when `next_u64 < threshold`.
    thresholds: Vec<u64>,
    in_cluster: Vec<bool>,
    stack: Vec<usize>,
    cluster: Vec<usize>,
}

impl WolffKernel {
    pub fn new(couplings: &CouplingMatrix, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::param("temperature", "must be positive"));
        }
        if let Some(bad) = couplings.entries().iter().find(|&&j| j < 0.0) {
            return Err(Error::UnsupportedModel(alloc::format!(
                "Wolff updates need ferromagnetic couplings, found J = {bad}"
            )));
        }
        let size = couplings.size();
        let thresholds = couplings
            .entries()
            .iter()
            .map(|&j| {
                let p = -libm::expm1(-2.0 * j / temperature);
                if p >= 1.0 {
                    u64::MAX
                } else {
                    (p * 18_446_744_073_709_551_616.0) as u64
                }
            })
            .collect();
        Ok(WolffKernel {
            size,
            temperature,
            couplings: couplings.entries().to_vec(),
            thresholds,
            in_cluster: vec![false; size],
            stack: Vec::with_capacity(size),
            cluster: Vec::with_capacity(size),
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Grows and flips one cluster; returns its size.
    pub fn update<R: RngCore + ?Sized>(&mut self, config: &mut SpinConfiguration, rng: &mut R) -> usize {
        let n = self.size;
        let seed = rng::index(rng, n);
        let spin = config.spins[seed];
        self.cluster.clear();
        self.stack.clear();
        self.in_cluster[seed] = true;
        self.cluster.push(seed);
        self.stack.push(seed);
        while let Some(i) = self.stack.pop() {
            let row = &self.thresholds[i * n..(i + 1) * n];
            for (j, &th) in row.iter().enumerate() {
                if th == 0 || self.in_cluster[j] || config.spins[j] != spin {
                    continue;
                }
                if rng.next_u64() < th || th == u64::MAX {
                    self.in_cluster[j] = true;
                    self.cluster.push(j);
                    self.stack.push(j);
                }
            }
        }
        // ΔE = 2 Σ_{i∈C, j∉C} J_ij s_i s_j, evaluated before flipping
        let mut delta = 0.0;
        for &i in &self.cluster {
            let row = &self.couplings[i * n..(i + 1) * n];
            let si = config.spins[i] as f64;
            for (j, &jij) in row.iter().enumerate() {
                if !self.in_cluster[j] {
                    delta += jij * si * config.spins[j] as f64;
                }
            }
        }
        for &i in &self.cluster {
            config.spins[i] = -config.spins[i];
            self.in_cluster[i] = false;
        }
        config.energy += 2.0 * delta;
        config.magnetization -= 2 * spin as i64 * self.cluster.len() as i64;
        self.cluster.len()
    }
}

/// One Wolff update from scratch; prefer a reused [`WolffKernel`] in loops.
pub fn wolff_update<R: RngCore + ?Sized>(
    config: &mut SpinConfiguration,
    couplings: &CouplingMatrix,
    temperature: f64,
    rng: &mut R,
) -> Result<usize> {
    if config.spins.len() != couplings.size() {
        return Err(Error::SizeMismatch { expected: couplings.size(), got: config.spins.len() });
    }
    Ok(WolffKernel::new(couplings, temperature)?.update(config, rng))
}

/// Mean with a statistical error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moment {
    pub mean: f64,
    pub error: f64,
}

/// Chain estimate of magnetization moments and energy density.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub size: usize,
    pub temperature: f64,
    /// signed `⟨m⟩`, zero up to errors without a symmetry-breaking field
    pub m: Moment,
    pub abs_m: Moment,
    pub m2: Moment,
    pub m4: Moment,
    /// `ε = ⟨E⟩ / L`
    pub energy: Moment,
    pub samples: usize,
    pub seed: u64,
    pub mean_cluster: f64,
    pub cadence: usize,
    m2_blocks: Vec<f64>,
    m4_blocks: Vec<f64>,
}

fn block_means(samples: &[f64], blocks: usize) -> Vec<f64> {
    let per = samples.len() / blocks;
    (0..blocks).map(|b| samples[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    libm::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0).max(1.0))
}

/// Bootstrap error of `f` evaluated on resampled block means.
fn bootstrap<F: Fn(&[usize]) -> f64>(n_blocks: usize, seed: u64, f: F) -> f64 {
    let mut rng = rng::seeded(seed ^ 0x5eed_b007_57a9_0001);
    let mut picks = vec![0usize; n_blocks];
    let vals: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            picks.iter_mut().for_each(|p| *p = rng::index(&mut rng, n_blocks));
            f(&picks)
        })
        .collect();
    std_dev(&vals)
}

fn blocked_moment(samples: &[f64], blocks: usize, seed: u64) -> (Moment, Vec<f64>) {
    let means = block_means(samples, blocks);
    let error = bootstrap(blocks, seed, |p| p.iter().map(|&k| means[k]).sum::<f64>() / p.len() as f64);
    (Moment { mean: mean(&samples[..blocks * (samples.len() / blocks)]), error }, means)
}

impl McEstimate {
    /// Estimate from per-measurement magnetizations `m` and energies `E`.
    pub fn from_samples(size: usize, temperature: f64, seed: u64, m: &[f64], energies: &[f64]) -> Result<Self> {
        if m.len() != energies.len() {
            return Err(Error::SizeMismatch { expected: m.len(), got: energies.len() });
        }
        if m.len() < BOOTSTRAP_BLOCKS {
            return Err(Error::InsufficientData { needed: BOOTSTRAP_BLOCKS, got: m.len() });
        }
        let b = BOOTSTRAP_BLOCKS;
        let abs: Vec<f64> = m.iter().map(|x| libm::fabs(*x)).collect();
        let sq: Vec<f64> = m.iter().map(|x| x * x).collect();
        let qu: Vec<f64> = sq.iter().map(|x| x * x).collect();
        let eps: Vec<f64> = energies.iter().map(|e| e / size as f64).collect();
        let (m_mean, _) = blocked_moment(m, b, seed);
        let (abs_m, _) = blocked_moment(&abs, b, seed.wrapping_add(1));
        let (m2, m2_blocks) = blocked_moment(&sq, b, seed.wrapping_add(2));
        let (m4, m4_blocks) = blocked_moment(&qu, b, seed.wrapping_add(3));
        let (energy, _) = blocked_moment(&eps, b, seed.wrapping_add(4));
        Ok(McEstimate {
            size,
            temperature,
            m: m_mean,
            abs_m,
            m2,
            m4,
            energy,
            samples: m.len(),
            seed,
            mean_cluster: 0.0,
            cadence: 1,
            m2_blocks,
            m4_blocks,
        })
    }
}

/// Binder cumulant with error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinderValue {
    pub value: f64,
    pub error: f64,
}

/// `U₄ = 1 − ⟨m⁴⟩ / (3⟨m²⟩²)` with a bootstrap error over the same blocks.
pub fn u4_from_estimate(est: &McEstimate) -> Result<BinderValue> {
    if !(est.m2.mean > 0.0) {
        return Err(Error::param("m2", "must be positive"));
    }
    let value = 1.0 - est.m4.mean / (3.0 * est.m2.mean * est.m2.mean);
    let error = if est.m2_blocks.is_empty() {
        0.0
    } else {
        let (b2, b4) = (&est.m2_blocks, &est.m4_blocks);
        bootstrap(b2.len(), est.seed.wrapping_add(5), |p| {
            let m2 = p.iter().map(|&k| b2[k]).sum::<f64>() / p.len() as f64;
            let m4 = p.iter().map(|&k| b4[k]).sum::<f64>() / p.len() as f64;
            1.0 - m4 / (3.0 * m2 * m2)
        })
    };
    Ok(BinderValue { value, error })
}

/// Chain length and cadence settings for [`run_chain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    pub n_measure: usize,
    /// Burn-in updates; `None` means 10% of all updates, at least 1000.
    pub n_burn: Option<usize>,
    /// Updates between measurements; `None` adapts it to `⌈L / mean cluster⌉`.
    pub cadence: Option<usize>,
    pub seed: u64,
}

impl ChainOptions {
    pub fn new(n_measure: usize, seed: u64) -> Self {
        ChainOptions { n_measure, n_burn: None, cadence: None, seed }
    }
}

const PILOT_UPDATES: usize = 1000;

/// Runs one Wolff chain from the polarized state and estimates the moments.
pub fn run_chain(couplings: &CouplingMatrix, temperature: f64, options: ChainOptions) -> Result<McEstimate> {
    if options.n_measure < 100 {
        return Err(Error::InsufficientData { needed: 100, got: options.n_measure });
    }
    let size = couplings.size();
    let mut kernel = WolffKernel::new(couplings, temperature)?;
    let mut rng: DefaultRng = rng::seeded(options.seed);
    let mut config = SpinConfiguration::polarized(couplings);

    let pilot = options.n_burn.map_or(PILOT_UPDATES, |b| b.min(PILOT_UPDATES));
    let mut cluster_total = 0usize;
    for _ in 0..pilot {
        cluster_total += kernel.update(&mut config, &mut rng);
    }
    let mean_cluster = if pilot > 0 { cluster_total as f64 / pilot as f64 } else { 1.0 };
    let cadence = options.cadence.unwrap_or_else(|| libm::ceil(size as f64 / mean_cluster.max(1.0)) as usize).max(1);
    let measured_updates = options.n_measure * cadence;
    let burn = options.n_burn.unwrap_or_else(|| PILOT_UPDATES.max(measured_updates.div_ceil(9)));
    for _ in pilot..burn {
        kernel.update(&mut config, &mut rng);
    }

    let mut ms = Vec::with_capacity(options.n_measure);
    let mut es = Vec::with_capacity(options.n_measure);
    let mut since_audit = 0u64;
    let mut clusters = 0usize;
    for _ in 0..options.n_measure {
        for _ in 0..cadence {
            clusters += kernel.update(&mut config, &mut rng);
        }
        since_audit += cadence as u64;
        if since_audit >= AUDIT_INTERVAL {
            since_audit = 0;
            let drift = config.audit(couplings);
            debug_assert!(libm::fabs(drift) <= 1e-8 * size as f64 * (1.0 + couplings.max_entry()));
        }
        ms.push(config.magnetization());
        es.push(config.energy());
    }
    let mut est = McEstimate::from_samples(size, temperature, options.seed, &ms, &es)?;
    est.mean_cluster = clusters as f64 / measured_updates as f64;
    est.cadence = cadence;
    Ok(est)
}

/// Inverse-variance merge of same-parameter estimates. Block data for the
/// Binder error are pooled.
pub fn merge_estimates(estimates: &[McEstimate]) -> Result<McEstimate> {
    let first = estimates.first().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    if estimates.iter().any(|e| e.size != first.size || e.temperature != first.temperature) {
        return Err(Error::param("estimates", "merge needs identical size and temperature"));
    }
    let merge = |f: fn(&McEstimate) -> Moment| {
        let ms: Vec<Moment> = estimates.iter().map(f).collect();
        if ms.iter().any(|m| !(m.error > 0.0)) {
            let mean = ms.iter().map(|m| m.mean).sum::<f64>() / ms.len() as f64;
            let err = libm::sqrt(ms.iter().map(|m| m.error * m.error).sum::<f64>()) / ms.len() as f64;
            return Moment { mean, error: err };
        }
        let w: Vec<f64> = ms.iter().map(|m| 1.0 / (m.error * m.error)).collect();
        let wsum: f64 = w.iter().sum();
        Moment {
            mean: ms.iter().zip(&w).map(|(m, w)| m.mean * w).sum::<f64>() / wsum,
            error: libm::sqrt(1.0 / wsum),
        }
    };
    let mut out = first.clone();
    out.m = merge(|e| e.m);
    out.abs_m = merge(|e| e.abs_m);
    out.m2 = merge(|e| e.m2);
    out.m4 = merge(|e| e.m4);
    out.energy = merge(|e| e.energy);
    out.samples = estimates.iter().map(|e| e.samples).sum();
    out.m2_blocks = estimates.iter().flat_map(|e| e.m2_blocks.iter().copied()).collect();
    out.m4_blocks = estimates.iter().flat_map(|e| e.m4_blocks.iter().copied()).collect();
    Ok(out)
}

/// Exact Boltzmann averages by enumeration of all `2^L` configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactMoments {
    pub abs_m: f64,
    pub m2: f64,
    pub m4: f64,
    pub energy: f64,
}

pub fn enumerate_moments(couplings: &CouplingMatrix, temperature: f64) -> Result<ExactMoments> {
    let size = couplings.size();
    if size > ENUMERATION_CAP {
        return Err(Error::Capability {
            what: "exhaustive enumeration",
            size,
            cap: ENUMERATION_CAP,
            hint: "use run_chain",
        });
    }
    let energies: Vec<f64> = (0..1usize << size)
        .map(|c| {
            let spins: Vec<i8> = (0..size).map(|i| if (c >> i) & 1 == 1 { -1 } else { 1 }).collect();
            ising_energy(couplings, &spins)
        })
        .collect();
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut z, mut a, mut b, mut c, mut e) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, &en) in energies.iter().enumerate() {
        let w = libm::exp(-(en - e0) / temperature);
        let m = (size as f64 - 2.0 * k.count_ones() as f64) / size as f64;
        z += w;
        a += w * libm::fabs(m);
        b += w * m * m;
        c += w * m * m * m * m;
        e += w * en;
    }
    Ok(ExactMoments { abs_m: a / z, m2: b / z, m4: c / z, energy: e / z / size as f64 })
}
