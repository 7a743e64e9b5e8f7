//! Dense brute-force references built from explicit Kronecker products.
#![allow(dead_code)]

use lrising_core::model::{ModelSpec, ProductState};
use num_complex::Complex64;

/// Row-major real `n × n` matrix.
pub struct Dense {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Dense { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut d = Dense::zeros(n);
        for i in 0..n {
            d.a[i * n + i] = 1.0;
        }
        d
    }

    pub fn kron(&self, other: &Dense) -> Dense {
        let (p, q) = (self.n, other.n);
        let n = p * q;
        let mut out = Dense::zeros(n);
        for i in 0..p {
            for j in 0..p {
                let s = self.a[i * p + j];
                if s == 0.0 {
                    continue;
                }
                for k in 0..q {
                    for l in 0..q {
                        out.a[(i * q + k) * n + j * q + l] = s * other.a[k * q + l];
                    }
                }
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Dense, c: f64) {
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += c * y;
        }
    }

    pub fn matmul(&self, other: &Dense) -> Dense {
        let n = self.n;
        let mut out = Dense::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let s = self.a[i * n + k];
                if s == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += s * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let row = &self.a[i * n..(i + 1) * n];
                row.iter().zip(psi).map(|(a, z)| z * *a).sum()
            })
            .collect()
    }

    pub fn expect(&self, psi: &[Complex64]) -> f64 {
        let h = self.apply(psi);
        psi.iter().zip(&h).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

fn pauli_x() -> Dense {
    Dense { n: 2, a: vec![0.0, 1.0, 1.0, 0.0] }
}

/// Basis order (↑, ↓): σᶻ = diag(1, −1).
fn pauli_z() -> Dense {
    Dense { n: 2, a: vec![1.0, 0.0, 0.0, -1.0] }
}

/// `op` on site `site`; site `i` is the `2^i` digit, so the Kronecker product
/// runs from site `L−1` down to site 0.
pub fn site_operator(size: usize, site: usize, op: &Dense) -> Dense {
    let id = Dense::identity(2);
    let mut out = Dense::identity(1);
    for s in (0..size).rev() {
        out = out.kron(if s == site { op } else { &id });
    }
    out
}

pub fn total_sx(size: usize) -> Dense {
    let mut out = Dense::zeros(1 << size);
    for i in 0..size {
        out.add_scaled(&site_operator(size, i, &pauli_x()), 1.0);
    }
    out
}

pub fn total_sz(size: usize) -> Dense {
    let mut out = Dense::zeros(1 << size);
    for i in 0..size {
        out.add_scaled(&site_operator(size, i, &pauli_z()), 1.0);
    }
    out
}

pub fn hamiltonian(model: &ModelSpec) -> Dense {
    let size = model.size();
    let xs: Vec<Dense> = (0..size).map(|i| site_operator(size, i, &pauli_x())).collect();
    let mut h = Dense::zeros(1 << size);
    for i in 0..size {
        for j in (i + 1)..size {
            h.add_scaled(&xs[i].matmul(&xs[j]), -model.couplings.get(i, j));
        }
    }
    h.add_scaled(&total_sz(size), -model.field);
    h
}

/// Product state from explicit single-site vectors and Kronecker products.
pub fn product_state(state: &ProductState) -> Vec<Complex64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (c, s) = ((0.5 * state.tilt()).cos(), (0.5 * state.tilt()).sin());
    let mut vec_out = vec![1.0f64];
    for site in (0..state.size()).rev() {
        let (a, b) = if state.spins()[site] > 0 { (r, r) } else { (r, -r) };
        let single = [c * a - s * b, s * a + c * b];
        let mut next = Vec::with_capacity(vec_out.len() * 2);
        for x in &vec_out {
            next.push(x * single[0]);
            next.push(x * single[1]);
        }
        vec_out = next;
    }
    vec_out.into_iter().map(|x| Complex64::new(x, 0.0)).collect()
}

/// `e^{−iHt} ψ` by Taylor series on steps of at most `dt`.
pub fn taylor_evolve(h: &Dense, psi: &[Complex64], t: f64, dt: f64) -> Vec<Complex64> {
    let steps = (t / dt).ceil().max(1.0) as usize;
    let tau = t / steps as f64;
    let mut cur = psi.to_vec();
    for _ in 0..steps {
        let mut term = cur.clone();
        let mut acc = cur.clone();
        for k in 1..=40 {
            term = h.apply(&term);
            let f = Complex64::new(0.0, -tau / k as f64);
            for z in term.iter_mut() {
                *z *= f;
            }
            for (a, z) in acc.iter_mut().zip(&term) {
                *a += z;
            }
            if term.iter().map(|z| z.norm_sqr()).sum::<f64>() < 1e-36 {
                break;
            }
        }
        cur = acc;
    }
    cur
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
