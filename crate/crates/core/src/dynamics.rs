//! Quench dynamics of product states: exact evolution through the spectrum,
//! Krylov propagation for larger chains, time averages and projective shots.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;
use num_complex::Complex64;

use crate::basis::Hamiltonian;
use crate::ensembles::{diagonalize, sector_overlaps, SpectrumCache, DIAGONALIZE_CAP};
use crate::error::{Error, Result};
use crate::linalg::{matmul_into, sym_eigen};
use crate::model::{ModelSpec, ProductState};
use crate::observables::{Measurer, Observable};
use crate::rng;

/// Default largest chain that [`encode_product_state`] will allocate.
pub const STATE_VECTOR_CAP: usize = 24;

/// Amplitudes over the `2^L` z-basis bitstrings (bit `i` set means site `i` is ↓).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    size: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wraps `amplitudes`; they must have length `2^size` and unit norm to `1e-10`.
    pub fn from_amplitudes(size: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1usize << size {
            return Err(Error::SizeMismatch { expected: 1 << size, got: amplitudes.len() });
        }
        let s = StateVector { size, amplitudes };
        let n = s.norm();
        if libm::fabs(n - 1.0) > 1e-10 {
            return Err(Error::param("amplitudes", alloc::format!("norm {n} is not 1")));
        }
        Ok(s)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.amplitudes.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn energy(&self, model: &ModelSpec) -> Result<f64> {
        model.check_size(self.size)?;
        Ok(Hamiltonian::new(model).expectation(&self.amplitudes))
    }
}

/// Single-spin amplitudes `(↑, ↓)` of `R_y(θ)|→⟩` (spin `+1`) or `R_y(θ)|←⟩`.
fn single_spin(spin: i8, tilt: f64) -> (f64, f64) {
    let r = core::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = if spin > 0 { (r, r) } else { (r, -r) };
    let c = libm::cos(0.5 * tilt);
    let s = libm::sin(0.5 * tilt);
    (a * c - b * s, a * s + b * c)
}

pub fn encode_product_state(state: &ProductState) -> Result<StateVector> {
    encode_product_state_capped(state, STATE_VECTOR_CAP)
}

pub fn encode_product_state_capped(state: &ProductState, cap: usize) -> Result<StateVector> {
    let size = state.size();
    if size > cap {
        return Err(Error::Capability {
            what: "state vector",
            size,
            cap,
            hint: "raise the state-vector cap only with enough memory for 2^L amplitudes",
        });
    }
    let mut amps = vec![1.0f64];
    for &s in state.spins() {
        let (up, down) = single_spin(s, state.tilt());
        let mut next = Vec::with_capacity(2 * amps.len());
        next.extend(amps.iter().map(|a| a * up));
        next.extend(amps.iter().map(|a| a * down));
        amps = next;
    }
    Ok(StateVector { size, amplitudes: amps.into_iter().map(|a| Complex64::new(a, 0.0)).collect() })
}

/// Which observables [`evolve_and_measure`] records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservableSet {
    pub sx2: bool,
    pub sz: bool,
    pub sx4: bool,
    pub correlations: bool,
    pub energy: bool,
}

impl Default for ObservableSet {
    fn default() -> Self {
        ObservableSet { sx2: true, sz: true, sx4: false, correlations: false, energy: false }
    }
}

impl ObservableSet {
    pub fn all() -> Self {
        ObservableSet { sx2: true, sz: true, sx4: true, correlations: true, energy: true }
    }
}

/// Observables along a trajectory; unrequested series are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub sx2: Option<Vec<f64>>,
    pub sz: Option<Vec<f64>>,
    pub sx4: Option<Vec<f64>>,
    /// per time, row-major `L × L`
    pub correlations: Option<Vec<Vec<f64>>>,
    pub energy: Option<Vec<f64>>,
    pub norm: Vec<f64>,
}

impl ObservableSeries {
    fn with_capacity(set: ObservableSet, n: usize) -> Self {
        let v = |on: bool| on.then(|| Vec::with_capacity(n));
        ObservableSeries {
            times: Vec::with_capacity(n),
            sx2: v(set.sx2),
            sz: v(set.sz),
            sx4: v(set.sx4),
            correlations: set.correlations.then(|| Vec::with_capacity(n)),
            energy: v(set.energy),
            norm: Vec::with_capacity(n),
        }
    }

    pub fn get(&self, observable: Observable) -> Option<Vec<f64>> {
        match observable {
            Observable::SxSquared => self.sx2.clone(),
            Observable::SxFourth => self.sx4.clone(),
            Observable::Sz => self.sz.clone(),
            Observable::Correlation(i, j) => self.correlations.as_ref().map(|cs| {
                cs.iter()
                    .map(|c| {
                        let l = libm::sqrt(c.len() as f64) as usize;
                        c[i * l + j]
                    })
                    .collect()
            }),
        }
    }

    /// Normalized time average of `observable` up to `t_max`.
    pub fn time_average(&self, observable: Observable, t_max: f64) -> Result<f64> {
        let values = self
            .get(observable)
            .ok_or_else(|| Error::param("observable", alloc::format!("{observable} was not recorded")))?;
        time_average(&self.times, &values, t_max)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

struct Recorder<'a> {
    set: ObservableSet,
    measurer: Measurer,
    hamiltonian: Option<&'a Hamiltonian>,
    series: ObservableSeries,
}

impl Recorder<'_> {
    fn record(&mut self, t: f64, psi: &[Complex64]) {
        let s = &mut self.series;
        s.times.push(t);
        s.norm.push(libm::sqrt(psi.iter().map(|z| z.norm_sqr()).sum()));
        if self.set.sx4 {
            let (m2, m4) = self.measurer.sx_moments(psi);
            s.sx4.as_mut().unwrap().push(m4);
            if let Some(v) = s.sx2.as_mut() {
                v.push(m2);
            }
        } else if let Some(v) = s.sx2.as_mut() {
            v.push(self.measurer.sx_squared(psi));
        }
        if let Some(v) = s.sz.as_mut() {
            v.push(self.measurer.sz(psi));
        }
        if let Some(v) = s.correlations.as_mut() {
            v.push(self.measurer.correlations(psi));
        }
        if let (Some(v), Some(h)) = (s.energy.as_mut(), self.hamiltonian) {
            v.push(h.expectation(psi));
        }
    }
}

/// Krylov propagation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    pub subspace: usize,
    /// Error bound per step on the propagated (unit-norm) state.
    pub tolerance: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { subspace: 30, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EvolutionMethod {
    /// Exact for `L ≤ 14`, Krylov above.
    #[default]
    Auto,
    Exact,
    Krylov(KrylovOptions),
}

/// Uniform grid `0, dt, 2dt, …` up to and including `t_max`.
pub fn uniform_times(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t_max >= 0.0) {
        return Err(Error::param("time grid", "need dt > 0 and t_max >= 0"));
    }
    let n = libm::round(t_max / dt) as usize;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}

/// Default grid `Jδt = 0.1` up to `JT = 12`.
pub fn default_times() -> Vec<f64> {
    uniform_times(12.0, 0.1).unwrap()
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] >= w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::param("times", "must be finite, nonnegative and nondecreasing"));
    }
    Ok(())
}

/// Evolves `state0` under `model` and records the requested observables at `times`.
pub fn evolve_and_measure(
    state0: &StateVector,
    model: &ModelSpec,
    times: &[f64],
    set: ObservableSet,
    method: EvolutionMethod,
) -> Result<ObservableSeries> {
    model.check_size(state0.size)?;
    check_times(times)?;
    match method {
        EvolutionMethod::Exact => evolve_with_spectrum(state0, &diagonalize(model)?, times, set),
        EvolutionMethod::Auto if model.size() <= DIAGONALIZE_CAP => {
            evolve_with_spectrum(state0, &diagonalize(model)?, times, set)
        }
        EvolutionMethod::Auto => evolve_krylov(state0, model, times, set, KrylovOptions::default()),
        EvolutionMethod::Krylov(opts) => evolve_krylov(state0, model, times, set, opts),
    }
}

const TIME_CHUNK: usize = 64;

/// Exact evolution `ψ(t) = Σ_n e^{−iE_n t} |n⟩⟨n|ψ⟩`, batched over times.
pub fn evolve_with_spectrum(
    state0: &StateVector,
    cache: &SpectrumCache,
    times: &[f64],
    set: ObservableSet,
) -> Result<ObservableSeries> {
    cache.model().check_size(state0.size)?;
    check_times(times)?;
    let h = set.energy.then(|| Hamiltonian::new(cache.model()));
    let mut rec = Recorder {
        set,
        measurer: Measurer::new(state0.size),
        hamiltonian: h.as_ref(),
        series: ObservableSeries::with_capacity(set, times.len()),
    };
    let overlaps = [sector_overlaps(cache, 0, &state0.amplitudes), sector_overlaps(cache, 1, &state0.amplitudes)];
    let mut psi = vec![Complex64::new(0.0, 0.0); state0.amplitudes.len()];
    for chunk in times.chunks(TIME_CHUNK) {
        let nt = chunk.len();
        let evolved = [0, 1].map(|p| {
            let values = cache.sector_values(p);
            let (cre, cim) = &overlaps[p];
            // columns [0, nt) hold real parts, [nt, 2nt) imaginary parts
            let coeffs = Mat::from_fn(values.len(), 2 * nt, |k, col| {
                let (s, c) = libm::sincos(values[k] * chunk[col % nt]);
                let z = Complex64::new(cre[k], cim[k]) * Complex64::new(c, -s);
                if col < nt {
                    z.re
                } else {
                    z.im
                }
            });
            let mut out = Mat::<f64>::zeros(values.len(), 2 * nt);
            matmul_into(&mut out, cache.sector_vectors(p).as_ref(), coeffs.as_ref());
            out
        });
        for (ti, &t) in chunk.iter().enumerate() {
            for (p, out) in evolved.iter().enumerate() {
                for (row, &b) in cache.sectors().states(p).iter().enumerate() {
                    psi[b] = Complex64::new(out[(row, ti)], out[(row, nt + ti)]);
                }
            }
            rec.record(t, &psi);
        }
    }
    Ok(rec.series)
}

/// One Lanczos basis around the current state.
struct Lanczos {
    basis: Vec<Vec<Complex64>>,
    /// eigenvalues and eigenvectors (row-major `m × m`) of the tridiagonal matrix
    theta: Vec<f64>,
    s: Vec<f64>,
    /// `β_m`, zero on happy breakdown
    beta_last: f64,
}

impl Lanczos {
    fn build(h: &Hamiltonian, psi: &[Complex64], m_max: usize) -> Result<Self> {
        let norm = libm::sqrt(psi.iter().map(|z| z.norm_sqr()).sum());
        let mut basis: Vec<Vec<Complex64>> = vec![psi.iter().map(|z| z / norm).collect()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        let mut w = vec![Complex64::new(0.0, 0.0); psi.len()];
        let scale = 1.0 + h.diagonal().iter().fold(0.0f64, |m, d| m.max(libm::fabs(*d)));
        let mut beta_last = 0.0;
        for j in 0..m_max {
            h.apply(&basis[j], &mut w);
            let a: f64 = basis[j].iter().zip(&w).map(|(v, x)| (v.conj() * x).re).sum();
            alpha.push(a);
            // two passes of full reorthogonalization
            for _ in 0..2 {
                for v in &basis {
                    let c: Complex64 = v.iter().zip(&w).map(|(v, x)| v.conj() * x).sum();
                    for (x, y) in w.iter_mut().zip(v) {
                        *x -= c * y;
                    }
                }
            }
            let b = libm::sqrt(w.iter().map(|z| z.norm_sqr()).sum());
            if b < 1e-12 * scale {
                beta_last = 0.0;
                break;
            }
            if j + 1 == m_max {
                beta_last = b;
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|z| z / b).collect());
        }
        let m = alpha.len();
        basis.truncate(m);
        let t = Mat::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let e = sym_eigen(&t)?;
        let s = (0..m * m).map(|k| e.vectors[(k / m, k % m)]).collect();
        Ok(Lanczos { basis, theta: e.values, s, beta_last })
    }

    /// Coefficients of `exp(−iτT) e₁`.
    fn coefficients(&self, tau: f64) -> Vec<Complex64> {
        let m = self.theta.len();
        (0..m)
            .map(|k| {
                (0..m)
                    .map(|l| {
                        let (s, c) = libm::sincos(self.theta[l] * tau);
                        Complex64::new(c, -s) * (self.s[k * m + l] * self.s[l])
                    })
                    .sum()
            })
            .collect()
    }

    fn error(&self, coeffs: &[Complex64]) -> f64 {
        self.beta_last * coeffs[coeffs.len() - 1].norm()
    }

    fn combine(&self, coeffs: &[Complex64], norm: f64, out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (v, c) in self.basis.iter().zip(coeffs) {
            let c = c * norm;
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
    }
}

/// Krylov (Lanczos) propagation with an adaptive step chosen from the
/// a-posteriori error bound.
pub fn evolve_krylov(
    state0: &StateVector,
    model: &ModelSpec,
    times: &[f64],
    set: ObservableSet,
    opts: KrylovOptions,
) -> Result<ObservableSeries> {
    model.check_size(state0.size)?;
    check_times(times)?;
    if opts.subspace < 2 || !(opts.tolerance > 0.0) {
        return Err(Error::param("krylov options", "need subspace >= 2 and tolerance > 0"));
    }
    let h = Hamiltonian::new(model);
    let mut rec = Recorder {
        set,
        measurer: Measurer::new(state0.size),
        hamiltonian: Some(&h),
        series: ObservableSeries::with_capacity(set, times.len()),
    };
    let mut psi = state0.amplitudes.clone();
    let mut next = psi.clone();
    let mut t = 0.0;
    let mut tau_guess = f64::INFINITY;
    for &target in times {
        krylov_advance(&h, &mut psi, &mut next, target - t, opts, &mut tau_guess)?;
        t = target;
        rec.record(target, &psi);
    }
    Ok(rec.series)
}

/// Advances `psi` by `span`, taking as many Krylov steps as the error bound requires.
fn krylov_advance(
    h: &Hamiltonian,
    psi: &mut Vec<Complex64>,
    next: &mut Vec<Complex64>,
    span: f64,
    opts: KrylovOptions,
    tau_guess: &mut f64,
) -> Result<()> {
    let mut done = 0.0;
    while span - done > 1e-14 * (1.0 + span) {
        let norm = libm::sqrt(psi.iter().map(|z| z.norm_sqr()).sum());
        let lz = Lanczos::build(h, psi, opts.subspace)?;
        let mut tau = (span - done).min(*tau_guess);
        let mut coeffs = lz.coefficients(tau);
        let mut halvings = 0;
        while lz.error(&coeffs) > opts.tolerance {
            tau *= 0.5;
            halvings += 1;
            if halvings > 60 {
                return Err(Error::Convergence { what: "krylov step", residual: lz.error(&coeffs) });
            }
            coeffs = lz.coefficients(tau);
        }
        lz.combine(&coeffs, norm, next);
        core::mem::swap(psi, next);
        *tau_guess = if halvings == 0 { tau_guess.max(2.0 * tau) } else { tau * 1.5 };
        done += tau;
    }
    Ok(())
}

/// Final state at time `t` (exact for `L ≤ 14`, Krylov above).
pub fn evolve_state(state0: &StateVector, model: &ModelSpec, t: f64) -> Result<StateVector> {
    model.check_size(state0.size)?;
    if !(t >= 0.0) {
        return Err(Error::param("t", "must be nonnegative"));
    }
    if model.size() <= DIAGONALIZE_CAP {
        let cache = diagonalize(model)?;
        let mut full = vec![Complex64::new(0.0, 0.0); state0.amplitudes.len()];
        for p in 0..2 {
            let (cre, cim) = sector_overlaps(&cache, p, &state0.amplitudes);
            let values = cache.sector_values(p);
            let vecs = cache.sector_vectors(p);
            let coeffs = Mat::from_fn(values.len(), 2, |k, col| {
                let (s, c) = libm::sincos(values[k] * t);
                let z = Complex64::new(cre[k], cim[k]) * Complex64::new(c, -s);
                if col == 0 {
                    z.re
                } else {
                    z.im
                }
            });
            let mut out = Mat::<f64>::zeros(values.len(), 2);
            matmul_into(&mut out, vecs.as_ref(), coeffs.as_ref());
            for (row, &b) in cache.sectors().states(p).iter().enumerate() {
                full[b] = Complex64::new(out[(row, 0)], out[(row, 1)]);
            }
        }
        return Ok(StateVector { size: state0.size, amplitudes: full });
    }
    let h = Hamiltonian::new(model);
    let mut psi = state0.amplitudes.clone();
    let mut next = psi.clone();
    let mut guess = f64::INFINITY;
    krylov_advance(&h, &mut psi, &mut next, t, KrylovOptions::default(), &mut guess)?;
    Ok(StateVector { size: state0.size, amplitudes: psi })
}

/// `(1/(T − t₀)) ∫_{t₀}^{T} O dt` by the trapezoidal rule, interpolating
/// linearly when `T` falls between samples.
pub fn time_average(times: &[f64], values: &[f64], t_max: f64) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::SizeMismatch { expected: times.len(), got: values.len() });
    }
    if times.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: times.len() });
    }
    let t0 = times[0];
    let last = times[times.len() - 1];
    if !(t_max > t0) || t_max > last * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::param("T", alloc::format!("must lie in ({t0}, {last}]")));
    }
    let mut integral = 0.0;
    for k in 1..times.len() {
        let (ta, tb) = (times[k - 1], times[k]);
        if ta >= t_max {
            break;
        }
        if tb <= t_max {
            integral += 0.5 * (tb - ta) * (values[k - 1] + values[k]);
        } else {
            let f = (t_max - ta) / (tb - ta);
            let v = values[k - 1] + f * (values[k] - values[k - 1]);
            integral += 0.5 * (t_max - ta) * (values[k - 1] + v);
        }
    }
    Ok(integral / (t_max - t0))
}

/// Running average `(1/t) ∫₀ᵗ O` at every sample; the first entry is `O(t₀)`.
pub fn running_average(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(Error::SizeMismatch { expected: times.len(), got: values.len() });
    }
    let mut out = Vec::with_capacity(times.len());
    let mut integral = 0.0;
    for k in 0..times.len() {
        if k == 0 {
            out.push(values[0]);
            continue;
        }
        integral += 0.5 * (times[k] - times[k - 1]) * (values[k - 1] + values[k]);
        let span = times[k] - times[0];
        out.push(if span > 0.0 { integral / span } else { values[k] });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasurementBasis {
    X,
    Z,
}

/// Projective measurement record. Bit `i` of an outcome set means site `i`
/// gave `−1` in the measured basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotCounts {
    pub basis: MeasurementBasis,
    pub size: usize,
    pub shots: u64,
    pub counts: BTreeMap<usize, u64>,
}

impl ShotCounts {
    /// Sample mean of `f(outcome)`.
    pub fn mean(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.counts.iter().map(|(&o, &c)| f(o) * c as f64).sum::<f64>() / self.shots as f64
    }

    /// Unbiased estimate of `⟨σ_i σ_j⟩` in the measured basis.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        self.mean(|o| if ((o >> i) ^ (o >> j)) & 1 == 0 { 1.0 } else { -1.0 })
    }

    /// Unbiased estimate of `(Σσ/L)²`, i.e. `S_x²` from x-basis shots.
    pub fn squared_magnetization(&self) -> f64 {
        let l = self.size as f64;
        self.mean(|o| {
            let m = (l - 2.0 * o.count_ones() as f64) / l;
            m * m
        })
    }
}

fn walsh_hadamard(v: &mut [Complex64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for k in start..start + h {
                let (a, b) = (v[k], v[k + h]);
                v[k] = a + b;
                v[k + h] = a - b;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / libm::sqrt(n as f64);
    v.iter_mut().for_each(|z| *z *= scale);
}

/// `n_shots` i.i.d. projective measurements of every site in `basis`.
pub fn sample_shots(state: &StateVector, basis: MeasurementBasis, n_shots: u64, seed: u64) -> Result<ShotCounts> {
    if n_shots == 0 {
        return Err(Error::param("n_shots", "must be at least 1"));
    }
    let mut amps = state.amplitudes.clone();
    if basis == MeasurementBasis::X {
        walsh_hadamard(&mut amps);
    }
    let mut cdf = Vec::with_capacity(amps.len());
    let mut acc = 0.0;
    for z in &amps {
        acc += z.norm_sqr();
        cdf.push(acc);
    }
    let mut rng = rng::seeded(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..n_shots {
        let u = rng::uniform(&mut rng) * acc;
        let o = cdf.partition_point(|&c| c <= u).min(amps.len() - 1);
        *counts.entry(o).or_insert(0) += 1;
    }
    Ok(ShotCounts { basis, size: state.size, shots: n_shots, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_ideal_couplings, CouplingMatrix, Provenance};

    fn free_model(size: usize, g: f64) -> ModelSpec {
        let zero = CouplingMatrix::from_row_major(size, vec![0.0; size * size], Provenance::Ideal, None).unwrap();
        ModelSpec::new(zero, g)
    }

    #[test]
    fn polarized_state_is_uniform() {
        let psi = encode_product_state(&ProductState::polarized(5, 1)).unwrap();
        let a = 1.0 / libm::sqrt(32.0);
        assert!(psi.amplitudes().iter().all(|z| (z.re - a).abs() < 1e-15 && z.im == 0.0));
    }

    #[test]
    fn quarter_tilt_gives_a_pole() {
        let s = ProductState::with_tilt(vec![1], core::f64::consts::FRAC_PI_2).unwrap();
        let psi = encode_product_state(&s).unwrap();
        assert!(psi.amplitudes()[0].norm() < 1e-15);
        assert!((psi.amplitudes()[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn precession_of_free_spins() {
        let size = 4;
        let g = 0.37;
        let m = free_model(size, g);
        let psi = encode_product_state(&ProductState::polarized(size, 1)).unwrap();
        let times = uniform_times(3.0, 0.25).unwrap();
        let l = size as f64;
        for method in [EvolutionMethod::Exact, EvolutionMethod::Krylov(KrylovOptions::default())] {
            let s = evolve_and_measure(&psi, &m, &times, ObservableSet::default(), method).unwrap();
            for (k, &t) in times.iter().enumerate() {
                let c = libm::cos(2.0 * g * t);
                let expected = (l + l * (l - 1.0) * c * c) / (l * l);
                assert!((s.sx2.as_ref().unwrap()[k] - expected).abs() < 1e-9);
                assert!(s.sz.as_ref().unwrap()[k].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn trapezoid_of_cos_squared() {
        let g = 0.5;
        let times = uniform_times(2.0 * core::f64::consts::PI, 1e-3).unwrap();
        let v: Vec<f64> = times.iter().map(|t| libm::pow(libm::cos(2.0 * g * t), 2.0)).collect();
        let avg = time_average(&times, &v, *times.last().unwrap()).unwrap();
        assert!((avg - 0.5).abs() < 1e-4);
        assert!(time_average(&[0.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn krylov_handles_interacting_chain() {
        let m = ModelSpec::new(build_ideal_couplings(6, 2.0, 1.0).unwrap(), 0.4);
        let psi = encode_product_state(&"uduudd".parse().unwrap()).unwrap();
        let times = uniform_times(4.0, 0.5).unwrap();
        let set = ObservableSet { energy: true, ..ObservableSet::default() };
        let a = evolve_and_measure(&psi, &m, &times, set, EvolutionMethod::Exact).unwrap();
        let b = evolve_and_measure(&psi, &m, &times, set, EvolutionMethod::Krylov(KrylovOptions::default())).unwrap();
        for (x, y) in a.sx2.unwrap().iter().zip(b.sx2.unwrap()) {
            assert!((x - y).abs() < 1e-8);
        }
        let e = a.energy.unwrap();
        assert!(e.iter().all(|v| (v - e[0]).abs() < 1e-10));
    }

    #[test]
    fn deterministic_shots() {
        let psi = encode_product_state(&"udu".parse().unwrap()).unwrap();
        let c = sample_shots(&psi, MeasurementBasis::X, 100, 1).unwrap();
        assert_eq!(c.counts.len(), 1);
        // site 1 is d -> bit 1 set
        assert_eq!(c.counts.get(&0b010), Some(&100));
    }
}
