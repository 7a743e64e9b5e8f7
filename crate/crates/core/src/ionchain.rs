//! Coupling matrices from trapped-ion physics: equilibrium positions in an
//! anharmonic axial well, radial normal modes, and spin-spin couplings
//! mediated by those modes.
//!
//! Inputs use laboratory units (eV/mm², eV/mm⁴, MHz, kHz, μm, amu); the
//! computation runs in SI.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{solve, sym_eigen_row_major};
use crate::model::{CouplingMatrix, Provenance};

/// Coulomb constant times the elementary charge squared, J·m.
pub const COULOMB_E2: f64 = 8.987_551_792_3e9 * ELEMENTARY_CHARGE * ELEMENTARY_CHARGE;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Smallest allowed `|D_k|`, rad/s.
pub const RESONANCE_GUARD: f64 = 2.0 * core::f64::consts::PI * 1e3;

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct TrapConfig {
    pub ions: usize,
    /// eV/mm²
    pub c2: f64,
    /// eV/mm⁴
    pub c4: f64,
    /// `ω₁ / 2π` in MHz
    pub com_frequency_mhz: f64,
    pub mass_amu: f64,
}

impl TrapConfig {
    pub fn new(ions: usize, c2: f64, c4: f64, com_frequency_mhz: f64) -> Result<Self> {
        let t = TrapConfig { ions, c2, c4, com_frequency_mhz, mass_amu: 171.0 };
        t.validate()?;
        Ok(t)
    }

    /// 15-ion chain used for the 13-spin configuration.
    pub fn chain_15() -> Self {
        TrapConfig { ions: 15, c2: 0.11, c4: 1.6e3, com_frequency_mhz: 3.075, mass_amu: 171.0 }
    }

    /// 27-ion chain used for the 23-spin configuration.
    pub fn chain_27() -> Self {
        TrapConfig { ions: 27, c2: -0.1, c4: 235.0, com_frequency_mhz: 3.075, mass_amu: 171.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ions < 2 {
            return Err(Error::InvalidSize { what: "ion count", got: self.ions, min: 2 });
        }
        if !(self.com_frequency_mhz > 0.0) {
            return Err(Error::param("com_frequency_mhz", "must be positive"));
        }
        if !(self.mass_amu > 0.0) {
            return Err(Error::param("mass_amu", "must be positive"));
        }
        if self.c4 < 0.0 || (self.c2 <= 0.0 && !(self.c4 > 0.0)) {
            return Err(Error::param("c4", "the axial potential must be bounded below and confining"));
        }
        Ok(())
    }

    fn c2_si(&self) -> f64 {
        self.c2 * ELEMENTARY_CHARGE * 1e6
    }

    fn c4_si(&self) -> f64 {
        self.c4 * ELEMENTARY_CHARGE * 1e12
    }

    fn mass(&self) -> f64 {
        self.mass_amu * ATOMIC_MASS_UNIT
    }

    pub fn com_frequency(&self) -> f64 {
        TWO_PI * self.com_frequency_mhz * 1e6
    }
}

/// Placement of the beatnote relative to the radial modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetuningConvention {
    /// `D_k = Δ − ω_N − ω_k`
    AsPrinted,
    /// `D_k = Δ + ω_N − ω_k`: beatnote at `ω_N + Δ`.
    #[default]
    ModeDetuning,
}

impl DetuningConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetuningConvention::AsPrinted => "as-printed",
            DetuningConvention::ModeDetuning => "mode-detuning",
        }
    }
}

impl fmt::Display for DetuningConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetuningConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-printed" => Ok(DetuningConvention::AsPrinted),
            "mode-detuning" => Ok(DetuningConvention::ModeDetuning),
            other => Err(Error::param("convention", alloc::format!("unknown convention `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig {
    /// Relative Rabi amplitude per ion, `0` switches a beam off.
    pub rabi: Vec<f64>,
    pub eta0: f64,
    /// Signed `Δ / 2π` in kHz; negative is red of the mode spectrum.
    pub detuning_khz: f64,
    pub staggered: bool,
    pub convention: DetuningConvention,
}

/// Relative Rabi amplitudes of the 23-spin configuration.
pub const SHAPED_L23_RABI: [f64; 23] = [
    1.0, 1.0, 0.72, 0.76, 0.6, 0.72, 0.63, 0.81, 0.72, 0.91, 0.78, 0.94, 0.78, 0.9, 0.72, 0.8, 0.62, 0.71, 0.59,
    0.75, 0.71, 0.99, 1.0,
];

impl BeamConfig {
    /// Uniform beams on all `ions` with the outer `off_per_edge` beams off.
    pub fn uniform(ions: usize, off_per_edge: usize, detuning_khz: f64) -> Self {
        let rabi = (0..ions).map(|i| if i < off_per_edge || i + off_per_edge >= ions { 0.0 } else { 1.0 }).collect();
        BeamConfig { rabi, eta0: 0.08, detuning_khz, staggered: true, convention: DetuningConvention::default() }
    }

    /// 13 spins in the 15-ion chain, red detuned by 35 kHz.
    pub fn l13() -> Self {
        Self::uniform(15, 1, -35.0)
    }

    /// 23 spins in the 27-ion chain with the shaped amplitudes, red detuned by 9 kHz.
    pub fn l23() -> Self {
        let mut b = Self::uniform(27, 2, -9.0);
        b.rabi[2..25].copy_from_slice(&SHAPED_L23_RABI);
        b
    }

    pub fn validate(&self) -> Result<()> {
        if self.rabi.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::param("rabi", "amplitudes must be nonnegative"));
        }
        let active = self.rabi.iter().filter(|&&r| r > 0.0).count();
        if active < 2 {
            return Err(Error::InvalidSize { what: "active beams", got: active, min: 2 });
        }
        if !(self.eta0 > 0.0) || !self.detuning_khz.is_finite() {
            return Err(Error::param("beams", "need eta0 > 0 and a finite detuning"));
        }
        Ok(())
    }

    pub fn detuning(&self) -> f64 {
        TWO_PI * self.detuning_khz * 1e3
    }

    /// Indices of ions whose beam is on.
    pub fn active(&self) -> Vec<usize> {
        (0..self.rabi.len()).filter(|&i| self.rabi[i] > 0.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    /// μm, increasing
    pub positions: Vec<f64>,
    /// rad/s, decreasing; `frequencies[0]` is the center-of-mass mode
    pub frequencies: Vec<f64>,
    /// row-major `b[i * N + k]`
    pub participation: Vec<f64>,
}

impl ModeSpectrum {
    pub fn ions(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn b(&self, ion: usize, mode: usize) -> f64 {
        self.participation[ion * self.ions() + mode]
    }
}

/// Scaled total energy `Σ a4 y⁴ + a2 y² + Σ 1/|y_i − y_j|`, its gradient and Hessian.
struct AxialEnergy {
    a2: f64,
    a4: f64,
}

impl AxialEnergy {
    fn value(&self, y: &[f64]) -> f64 {
        let mut u: f64 = y.iter().map(|v| self.a4 * v * v * v * v + self.a2 * v * v).sum();
        for i in 0..y.len() {
            for j in (i + 1)..y.len() {
                u += 1.0 / libm::fabs(y[j] - y[i]);
            }
        }
        u
    }

    fn gradient_hessian(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = y.len();
        let mut g: Vec<f64> = y.iter().map(|v| 4.0 * self.a4 * v * v * v + 2.0 * self.a2 * v).collect();
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = 12.0 * self.a4 * y[i] * y[i] + 2.0 * self.a2;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = y[i] - y[j];
                let ad = libm::fabs(d);
                g[i] -= d / (ad * ad * ad);
                let k = 2.0 / (ad * ad * ad);
                h[i * n + i] += k;
                h[i * n + j] -= k;
            }
        }
        (g, h)
    }
}

const NEWTON_ITERATIONS: usize = 500;

/// Equilibrium positions in μm, sorted, from a damped Newton solve.
pub fn solve_equilibrium_positions(trap: &TrapConfig) -> Result<Vec<f64>> {
    trap.validate()?;
    let n = trap.ions;
    let (c2, c4) = (trap.c2_si(), trap.c4_si());
    // natural length: Coulomb balanced against whichever axial term is present
    let ell = if c2 != 0.0 { libm::cbrt(COULOMB_E2 / libm::fabs(c2)) } else { libm::pow(COULOMB_E2 / c4, 0.2) };
    let energy = AxialEnergy { a2: c2 * ell * ell * ell / COULOMB_E2, a4: c4 * libm::pow(ell, 5.0) / COULOMB_E2 };

    let spacing = 2.0 / libm::pow(n as f64, 0.5);
    let mut y: Vec<f64> = (0..n).map(|i| (i as f64 - 0.5 * (n - 1) as f64) * spacing).collect();
    let mut mu = 0.0;
    let mut gnorm = f64::INFINITY;
    for _ in 0..NEWTON_ITERATIONS {
        let (g, mut h) = energy.gradient_hessian(&y);
        gnorm = libm::sqrt(g.iter().map(|v| v * v).sum());
        if gnorm < 1e-10 {
            break;
        }
        let u0 = energy.value(&y);
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                h[i * n + i] += mu;
            }
            let step = solve(n, &h, &g);
            for i in 0..n {
                h[i * n + i] -= mu;
            }
            let descent: f64 = step.iter().zip(&g).map(|(s, g)| s * g).sum();
            if descent > 0.0 && step.iter().all(|s| s.is_finite()) {
                let mut t = 1.0;
                while t > 1e-12 {
                    let trial: Vec<f64> = y.iter().zip(&step).map(|(y, s)| y - t * s).collect();
                    let ordered = trial.windows(2).all(|w| w[1] > w[0]);
                    if ordered && energy.value(&trial) <= u0 + 1e-14 * libm::fabs(u0) {
                        y = trial;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
            if accepted {
                mu *= 0.25;
                if mu < 1e-12 {
                    mu = 0.0;
                }
                break;
            }
            mu = if mu == 0.0 { 1e-6 } else { mu * 10.0 };
        }
        if !accepted {
            break;
        }
    }
    if !(gnorm < 1e-10) {
        return Err(Error::Convergence { what: "equilibrium positions", residual: gnorm });
    }
    Ok(y.iter().map(|v| v * ell * 1e6).collect())
}

/// Radial normal modes about `positions` (μm).
pub fn compute_radial_modes(positions: &[f64], trap: &TrapConfig) -> Result<ModeSpectrum> {
    trap.validate()?;
    let n = positions.len();
    if n != trap.ions {
        return Err(Error::SizeMismatch { expected: trap.ions, got: n });
    }
    if positions.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("positions", "must be strictly increasing"));
    }
    let w1 = trap.com_frequency();
    let k = COULOMB_E2 / trap.mass();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = w1 * w1;
        for j in 0..n {
            if i != j {
                let d = libm::fabs(positions[i] - positions[j]) * 1e-6;
                let c = k / (d * d * d);
                a[i * n + j] = c;
                a[i * n + i] -= c;
            }
        }
    }
    let eig = sym_eigen_row_major(n, &a)?;
    let mut frequencies = Vec::with_capacity(n);
    let mut participation = vec![0.0; n * n];
    for (mode, col) in (0..n).rev().enumerate() {
        let lambda = eig.values[col];
        if lambda < 0.0 {
            return Err(Error::ZigzagInstability { mode, eigenvalue: lambda });
        }
        frequencies.push(libm::sqrt(lambda));
        // fix the sign: first significant component positive
        let v = eig.vectors.col(col);
        let pivot = (0..n).find(|&i| libm::fabs(v[i]) > 1e-8).unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            participation[i * n + mode] = sign * v[i];
        }
    }
    Ok(ModeSpectrum { positions: positions.to_vec(), frequencies, participation })
}

/// Couplings `J_ij = −Σ_k η_ik η_jk Ω_i Ω_j / (2 D_k)` (times `(−1)^{i+j}`
/// when staggered) restricted to the ions with beams on.
///
/// The overall minus sign maps the dispersive result onto the
/// `H = −Σ J_ij σˣσˣ` convention of [`crate::model`], so a red-detuned,
/// staggered chain comes out ferromagnetic (positive). Units are those of
/// `Ω² / Δ` with `Ω` relative and `Δ` in rad/s; use [`calibrate_to_target`].
pub fn synthesize_couplings(spectrum: &ModeSpectrum, beams: &BeamConfig) -> Result<CouplingMatrix> {
    beams.validate()?;
    let n = spectrum.ions();
    if beams.rabi.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: beams.rabi.len() });
    }
    let delta = beams.detuning();
    let wn = spectrum.frequencies[n - 1];
    let denominators: Vec<f64> = spectrum
        .frequencies
        .iter()
        .map(|&wk| match beams.convention {
            DetuningConvention::ModeDetuning => delta + wn - wk,
            DetuningConvention::AsPrinted => delta - wn - wk,
        })
        .collect();
    if let Some((mode, &d)) = denominators.iter().enumerate().find(|(_, d)| libm::fabs(**d) < RESONANCE_GUARD) {
        return Err(Error::NearResonance { mode, detuning: d });
    }
    let active = beams.active();
    let l = active.len();
    let eta2 = beams.eta0 * beams.eta0;
    let mut entries = vec![0.0; l * l];
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            if a == b {
                continue;
            }
            let sum: f64 = (0..n).map(|k| spectrum.b(i, k) * spectrum.b(j, k) / (2.0 * denominators[k])).sum();
            let mut v = -eta2 * beams.rabi[i] * beams.rabi[j] * sum;
            if beams.staggered && (i + j) % 2 == 1 {
                v = -v;
            }
            entries[a * l + b] = v;
        }
    }
    // exact symmetry
    for a in 0..l {
        for b in (a + 1)..l {
            let s = 0.5 * (entries[a * l + b] + entries[b * l + a]);
            entries[a * l + b] = s;
            entries[b * l + a] = s;
        }
    }
    CouplingMatrix::from_row_major(l, entries, Provenance::IonDerived, None)
}

/// `J = max_ij J_ij` and the matrix divided by it.
pub fn calibrate_to_target(couplings: &CouplingMatrix) -> Result<(f64, CouplingMatrix)> {
    let j = couplings.max_entry();
    if couplings.entries().iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    if !(j > 0.0) {
        return Err(Error::param("couplings", "largest entry is not positive"));
    }
    Ok((j, couplings.scaled(1.0 / j)))
}

/// Positions, modes, couplings and calibration in one call.
pub fn ion_derived_couplings(trap: &TrapConfig, beams: &BeamConfig) -> Result<(ModeSpectrum, f64, CouplingMatrix)> {
    let positions = solve_equilibrium_positions(trap)?;
    let spectrum = compute_radial_modes(&positions, trap)?;
    let raw = synthesize_couplings(&spectrum, beams)?;
    let (j, normalized) = calibrate_to_target(&raw)?;
    Ok((spectrum, j, normalized))
}
