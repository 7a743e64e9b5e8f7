//! z-basis conventions and the Hamiltonian's action on state vectors.
//!
//! Basis index `b` has bit `i` for site `i`; a clear bit is σᶻ = +1 (↑), a set
//! bit is σᶻ = -1 (↓). σˣ_i flips bit `i`, so every σˣσˣ term flips two bits
//! and preserves the parity of the number of set bits: `H` splits into an
//! even and an odd parity sector.

use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;
use num_complex::Complex64;

use crate::model::ModelSpec;

/// Sparse form of `H = -Σ_{i<j} J_ij σˣ_i σˣ_j - g Σ_i σᶻ_i`.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    size: usize,
    /// `(bit mask of i and j, -J_ij)` for every nonzero pair.
    flips: Vec<(usize, f64)>,
    diagonal: Vec<f64>,
}

impl Hamiltonian {
    pub fn new(model: &ModelSpec) -> Self {
        let size = model.size();
        let c = &model.couplings;
        let mut flips = Vec::with_capacity(size * (size - 1) / 2);
        for i in 0..size {
            for j in (i + 1)..size {
                let v = c.get(i, j);
                if v != 0.0 {
                    flips.push(((1usize << i) | (1usize << j), -v));
                }
            }
        }
        let dim = 1usize << size;
        let g = model.field;
        let diagonal = (0..dim)
            .map(|b| -g * (size as f64 - 2.0 * b.count_ones() as f64))
            .collect();
        Hamiltonian { size, flips, diagonal }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// `out = H psi`.
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        for (b, o) in out.iter_mut().enumerate() {
            let mut acc = psi[b] * self.diagonal[b];
            for &(mask, w) in &self.flips {
                acc += psi[b ^ mask] * w;
            }
            *o = acc;
        }
    }

    /// `⟨psi|H|psi⟩` (real for normalized or unnormalized `psi`).
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let mut hpsi = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.apply(psi, &mut hpsi);
        psi.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `⟨psi|H²|psi⟩ - ⟨psi|H|psi⟩²` for normalized `psi`.
    pub fn variance(&self, psi: &[Complex64]) -> f64 {
        let mut hpsi = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.apply(psi, &mut hpsi);
        let mean: f64 = psi.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum();
        let sq: f64 = hpsi.iter().map(|h| h.norm_sqr()).sum();
        sq - mean * mean
    }

    /// Dense block of `H` restricted to one parity sector, in the order of
    /// [`ParitySectors::states`].
    pub(crate) fn sector_matrix(&self, sectors: &ParitySectors, parity: usize) -> Mat<f64> {
        let states = sectors.states(parity);
        let n = states.len();
        let mut m = Mat::<f64>::zeros(n, n);
        for (col, &b) in states.iter().enumerate() {
            m[(col, col)] = self.diagonal[b];
            for &(mask, w) in &self.flips {
                let row = sectors.position(b ^ mask);
                m[(row, col)] += w;
            }
        }
        m
    }

    /// Trace of `H`; zero for any couplings and field.
    pub fn trace(&self) -> f64 {
        self.diagonal.iter().sum()
    }
}

/// Split of the `2^L` basis into even (0) and odd (1) popcount sectors.
#[derive(Debug, Clone)]
pub struct ParitySectors {
    states: [Vec<usize>; 2],
    position: Vec<u32>,
}

impl ParitySectors {
    pub fn new(size: usize) -> Self {
        let dim = 1usize << size;
        let mut states = [Vec::with_capacity(dim / 2), Vec::with_capacity(dim / 2)];
        let mut position = vec![0u32; dim];
        for b in 0..dim {
            let p = (b.count_ones() & 1) as usize;
            position[b] = states[p].len() as u32;
            states[p].push(b);
        }
        ParitySectors { states, position }
    }

    #[inline]
    pub fn states(&self, parity: usize) -> &[usize] {
        &self.states[parity]
    }

    #[inline]
    pub fn position(&self, b: usize) -> usize {
        self.position[b] as usize
    }
}

/// `out = (Σ_i σˣ_i) psi`.
pub fn apply_total_sx(size: usize, psi: &[Complex64], out: &mut [Complex64]) {
    for (b, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..size {
            acc += psi[b ^ (1 << i)];
        }
        *o = acc;
    }
}

/// Real-vector variant of [`apply_total_sx`].
pub fn apply_total_sx_real(size: usize, psi: &[f64], out: &mut [f64]) {
    for (b, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..size {
            acc += psi[b ^ (1 << i)];
        }
        *o = acc;
    }
}

/// σᶻ eigenvalue of site `i` in basis state `b`.
#[inline]
pub fn sz(b: usize, i: usize) -> f64 {
    if (b >> i) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `Σ_i σᶻ_i` on basis state `b`.
#[inline]
pub fn total_sz(size: usize, b: usize) -> f64 {
    size as f64 - 2.0 * b.count_ones() as f64
}
