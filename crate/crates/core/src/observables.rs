//! Observables measured on z-basis state vectors.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;

use crate::basis::{apply_total_sx, apply_total_sx_real, total_sz};
use crate::error::{Error, Result};

/// Scalar observables with closed-form action in the z basis. All of them
/// commute with the parity `Π σᶻ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Observable {
    /// `S_x² = Σ_ij σˣ_i σˣ_j / L²`
    SxSquared,
    /// `S_x⁴ = Σ_ijkl σˣ_i σˣ_j σˣ_k σˣ_l / L⁴`
    SxFourth,
    /// `S_z = Σ_i σᶻ_i / L`
    Sz,
    /// `σˣ_i σˣ_j`
    Correlation(usize, usize),
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::SxSquared => "sx2",
            Observable::SxFourth => "sx4",
            Observable::Sz => "sz",
            Observable::Correlation(..) => "corr",
        }
    }

    /// `⟨v|O|v⟩` for a real vector in the full `2^L` space.
    pub(crate) fn expectation_real(&self, size: usize, v: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let l = size as f64;
        match *self {
            Observable::SxSquared => {
                scratch.resize(v.len(), 0.0);
                apply_total_sx_real(size, v, scratch);
                scratch.iter().map(|x| x * x).sum::<f64>() / (l * l)
            }
            Observable::SxFourth => {
                let mut once = vec![0.0; v.len()];
                apply_total_sx_real(size, v, &mut once);
                scratch.resize(v.len(), 0.0);
                apply_total_sx_real(size, &once, scratch);
                scratch.iter().map(|x| x * x).sum::<f64>() / (l * l * l * l)
            }
            Observable::Sz => {
                v.iter().enumerate().map(|(b, x)| x * x * total_sz(size, b)).sum::<f64>() / l
            }
            Observable::Correlation(i, j) => {
                let mask = (1usize << i) ^ (1usize << j);
                if mask == 0 {
                    return v.iter().map(|x| x * x).sum();
                }
                v.iter().enumerate().map(|(b, x)| x * v[b ^ mask]).sum()
            }
        }
    }

    /// `out = O v` for a real vector.
    pub(crate) fn apply_real(&self, size: usize, v: &[f64], out: &mut [f64]) {
        let l = size as f64;
        match *self {
            Observable::SxSquared => {
                let mut once = vec![0.0; v.len()];
                apply_total_sx_real(size, v, &mut once);
                apply_total_sx_real(size, &once, out);
                out.iter_mut().for_each(|x| *x /= l * l);
            }
            Observable::SxFourth => {
                let mut a = vec![0.0; v.len()];
                let mut b = vec![0.0; v.len()];
                apply_total_sx_real(size, v, &mut a);
                apply_total_sx_real(size, &a, &mut b);
                apply_total_sx_real(size, &b, &mut a);
                apply_total_sx_real(size, &a, out);
                out.iter_mut().for_each(|x| *x /= l * l * l * l);
            }
            Observable::Sz => {
                for (b, (o, x)) in out.iter_mut().zip(v).enumerate() {
                    *o = x * total_sz(size, b) / l;
                }
            }
            Observable::Correlation(i, j) => {
                let mask = (1usize << i) ^ (1usize << j);
                for (b, o) in out.iter_mut().enumerate() {
                    *o = v[b ^ mask];
                }
            }
        }
    }

    pub fn validate(&self, size: usize) -> Result<()> {
        if let Observable::Correlation(i, j) = *self {
            if i >= size || j >= size {
                return Err(Error::SizeMismatch { expected: size, got: i.max(j) + 1 });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Correlation(i, j) => write!(f, "corr_{i}_{j}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sx2" => Ok(Observable::SxSquared),
            "sx4" => Ok(Observable::SxFourth),
            "sz" => Ok(Observable::Sz),
            other => {
                let bad = || Error::param("observable", alloc::format!("unknown observable `{other}`"));
                let rest = other.strip_prefix("corr_").ok_or_else(bad)?;
                let (i, j) = rest.split_once('_').ok_or_else(bad)?;
                Ok(Observable::Correlation(i.parse().map_err(|_| bad())?, j.parse().map_err(|_| bad())?))
            }
        }
    }
}

/// Measurements on a complex state vector.
pub struct Measurer {
    size: usize,
    once: Vec<Complex64>,
    twice: Vec<Complex64>,
}

impl Measurer {
    pub fn new(size: usize) -> Self {
        let dim = 1usize << size;
        Measurer {
            size,
            once: vec![Complex64::new(0.0, 0.0); dim],
            twice: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    pub fn sx_squared(&mut self, psi: &[Complex64]) -> f64 {
        apply_total_sx(self.size, psi, &mut self.once);
        let l = self.size as f64;
        self.once.iter().map(|z| z.norm_sqr()).sum::<f64>() / (l * l)
    }

    /// Returns `(S_x², S_x⁴)` sharing the first `Σσˣ` application.
    pub fn sx_moments(&mut self, psi: &[Complex64]) -> (f64, f64) {
        apply_total_sx(self.size, psi, &mut self.once);
        apply_total_sx(self.size, &self.once, &mut self.twice);
        let l2 = (self.size * self.size) as f64;
        let m2 = self.once.iter().map(|z| z.norm_sqr()).sum::<f64>() / l2;
        let m4 = self.twice.iter().map(|z| z.norm_sqr()).sum::<f64>() / (l2 * l2);
        (m2, m4)
    }

    pub fn sz(&self, psi: &[Complex64]) -> f64 {
        psi.iter().enumerate().map(|(b, z)| z.norm_sqr() * total_sz(self.size, b)).sum::<f64>()
            / self.size as f64
    }

    /// Row-major `L × L` matrix of `⟨σˣ_i σˣ_j⟩` (unit diagonal for normalized states).
    pub fn correlations(&self, psi: &[Complex64]) -> Vec<f64> {
        let n = self.size;
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            c[i * n + i] = norm;
            for j in (i + 1)..n {
                let mask = (1usize << i) | (1usize << j);
                let v: f64 = psi.iter().enumerate().map(|(b, z)| (z.conj() * psi[b ^ mask]).re).sum();
                c[i * n + j] = v;
                c[j * n + i] = v;
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for o in [Observable::SxSquared, Observable::SxFourth, Observable::Sz, Observable::Correlation(2, 5)] {
            assert_eq!(o.to_string().parse::<Observable>().unwrap(), o);
        }
        assert!("sy".parse::<Observable>().is_err());
    }

    #[test]
    fn apply_and_expectation_agree() {
        let size = 4;
        let v: Vec<f64> = (0..16).map(|k| libm::sin(k as f64 + 0.3)).collect();
        let mut out = vec![0.0; 16];
        let mut scratch = Vec::new();
        for o in [Observable::SxSquared, Observable::SxFourth, Observable::Sz, Observable::Correlation(0, 3)] {
            o.apply_real(size, &v, &mut out);
            let via_apply: f64 = v.iter().zip(&out).map(|(a, b)| a * b).sum();
            let direct = o.expectation_real(size, &v, &mut scratch);
            assert!((via_apply - direct).abs() < 1e-12, "{o}: {via_apply} vs {direct}");
        }
    }
}
