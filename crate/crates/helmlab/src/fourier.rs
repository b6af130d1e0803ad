//! Torus Fourier transforms, lattice bookkeeping, and discrete Sobolev norms.
//!
//! Interior fields are extended by zero to the enclosing torus; their Fourier
//! coefficients are Riemann sums `h^n sum_x f(x) exp(-i eta . x)` over the
//! dual lattice `eta = 2 pi k / S`. Negative-order norms are computed on the
//! Fourier side with weight `(1 + |eta|^2)^s`.

use crate::error::{Error, Result};
use crate::field::{Field, RealField, Scalar, Support};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::sync::Arc;

/// Cubic periodic grid: `m` nodes per axis, spacing `h`, side `m * h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusGrid {
    pub m: usize,
    pub h: f64,
}

impl TorusGrid {
    pub fn side(&self) -> f64 {
        self.m as f64 * self.h
    }

    pub fn len(&self) -> usize {
        self.m * self.m * self.m
    }

    /// Dual lattice spacing `2 pi / side`.
    pub fn dual_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.side()
    }

    /// Signed integer coordinate of an FFT bin.
    pub fn signed_index(&self, k: usize) -> i64 {
        if k <= self.m / 2 {
            k as i64
        } else {
            k as i64 - self.m as i64
        }
    }

    /// Physical frequency of an FFT bin triple.
    pub fn frequency(&self, k: [usize; 3]) -> [f64; 3] {
        let dk = self.dual_spacing();
        [
            self.signed_index(k[0]) as f64 * dk,
            self.signed_index(k[1]) as f64 * dk,
            self.signed_index(k[2]) as f64 * dk,
        ]
    }

    pub fn linear(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.m + j) * self.m + k
    }

    /// All lattice modes (as signed integer triples) with `|eta| <= radius`.
    pub fn modes_within(&self, radius: f64) -> Vec<[i64; 3]> {
        let dk = self.dual_spacing();
        let kmax = (radius / dk).floor() as i64;
        let half = self.m as i64 / 2;
        let kmax = kmax.min(half);
        let mut out = Vec::new();
        for a in -kmax..=kmax {
            for b in -kmax..=kmax {
                for c in -kmax..=kmax {
                    let r2 = (a * a + b * b + c * c) as f64 * dk * dk;
                    if r2 <= radius * radius * (1.0 + 1e-12) {
                        out.push([a, b, c]);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// FFT bin of a signed mode triple.
    pub fn bin_of_mode(&self, k: [i64; 3]) -> usize {
        let m = self.m as i64;
        let wrap = |a: i64| ((a % m) + m) % m;
        self.linear(wrap(k[0]) as usize, wrap(k[1]) as usize, wrap(k[2]) as usize)
    }

    /// Frequency of a signed mode triple.
    pub fn mode_frequency(&self, k: [i64; 3]) -> [f64; 3] {
        let dk = self.dual_spacing();
        [k[0] as f64 * dk, k[1] as f64 * dk, k[2] as f64 * dk]
    }
}

/// In-place 3D FFT over a cube of side `m` (lexicographic layout, last axis fastest).
pub struct Fft3 {
    m: usize,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl Fft3 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    fn apply(&self, data: &mut [Complex64], fft: &Arc<dyn rustfft::Fft<f64>>) {
        let m = self.m;
        assert_eq!(data.len(), m * m * m);
        // axis 2 (contiguous)
        for chunk in data.chunks_exact_mut(m) {
            fft.process(chunk);
        }
        // axes 1 and 0 via gather/scatter
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        for i in 0..m {
            for k in 0..m {
                for j in 0..m {
                    line[j] = data[(i * m + j) * m + k];
                }
                fft.process(&mut line);
                for j in 0..m {
                    data[(i * m + j) * m + k] = line[j];
                }
            }
        }
        for j in 0..m {
            for k in 0..m {
                for i in 0..m {
                    line[i] = data[(i * m + j) * m + k];
                }
                fft.process(&mut line);
                for i in 0..m {
                    data[(i * m + j) * m + k] = line[i];
                }
            }
        }
    }

    /// Unnormalized forward transform (negative exponent).
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward.clone());
    }

    /// Inverse transform, normalized by `1/m^3`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse.clone());
        let scale = 1.0 / (self.m as f64).powi(3);
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// The torus grid a geometry's zero-extension lives on.
pub fn torus_grid_of(geo: &crate::geometry::Geometry) -> TorusGrid {
    TorusGrid {
        m: geo.torus_m(),
        h: geo.h(),
    }
}

/// Fourier coefficient `h^n sum_x q(x) exp(-i eta . x)` of an interior field.
///
/// `eta` must lie on the dual lattice of the enclosing torus.
pub fn fourier_coefficient<T: Scalar>(q: &Field<T>, eta: [f64; 3]) -> Result<Complex64> {
    if q.support() != Support::Interior {
        return Err(Error::Invalid("fourier_coefficient needs an interior field".into()));
    }
    let geo = q.geometry();
    let grid = torus_grid_of(geo);
    check_on_lattice(&grid, eta)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, &id) in geo.interior().ids().iter().enumerate() {
        let x = geo.node_position(id);
        let phase = -(eta[0] * x[0] + eta[1] * x[1] + eta[2] * x[2]);
        acc += q.values()[p].to_complex() * Complex64::from_polar(1.0, phase);
    }
    Ok(acc * geo.cell_volume())
}

pub fn check_on_lattice(grid: &TorusGrid, eta: [f64; 3]) -> Result<()> {
    let dk = grid.dual_spacing();
    for d in 0..3 {
        let t = eta[d] / dk;
        if (t - t.round()).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::OffLattice {
                eta,
                spacing: dk,
            });
        }
    }
    Ok(())
}

/// Full spectrum `q_hat` of a torus field: `h^n * FFT(values)` bin by bin.
pub fn torus_spectrum<T: Scalar>(field: &Field<T>) -> Result<Vec<Complex64>> {
    if field.support() != Support::Torus {
        return Err(Error::Invalid("spectrum needs a torus field".into()));
    }
    let geo = field.geometry();
    let grid = torus_grid_of(geo);
    let mut data: Vec<Complex64> = field.values().iter().map(|v| v.to_complex()).collect();
    let fft = Fft3::new(grid.m);
    fft.forward(&mut data);
    let h3 = geo.cell_volume();
    for v in data.iter_mut() {
        *v *= h3;
    }
    Ok(data)
}

/// Weighted spectral norm `sqrt( S^-n sum_k (1+|eta_k|^2)^s |q_hat_k|^2 )` of a torus field.
pub fn sobolev_torus_norm<T: Scalar>(field: &Field<T>, s: f64) -> Result<f64> {
    let geo = field.geometry();
    let grid = torus_grid_of(geo);
    let spec = torus_spectrum(field)?;
    let mut acc = 0.0;
    for i in 0..grid.m {
        for j in 0..grid.m {
            for k in 0..grid.m {
                let eta = grid.frequency([i, j, k]);
                let w = (1.0 + eta[0] * eta[0] + eta[1] * eta[1] + eta[2] * eta[2]).powf(s);
                acc += w * spec[grid.linear(i, j, k)].norm_sqr();
            }
        }
    }
    Ok((acc / grid.side().powi(3)).sqrt())
}

/// Interior Sobolev norm for `s` in `{-1, 0, 1, 2}`.
///
/// `s = -1` goes through the zero-extension spectrum; `s = 0` is the discrete
/// L2 norm; `s = 1, 2` accumulate forward-difference Dirichlet energies of the
/// zero extension.
pub fn sobolev_interior_norm<T: Scalar>(f: &Field<T>, s: i32) -> Result<f64> {
    if f.support() != Support::Interior {
        return Err(Error::Invalid("sobolev_interior_norm needs an interior field".into()));
    }
    match s {
        -1 => sobolev_torus_norm(&f.extend_to_torus()?, -1.0),
        0 => Ok(f.l2_norm()),
        1 | 2 => {
            let geo = f.geometry();
            let h = geo.h();
            let h3 = geo.cell_volume();
            let ext = f.extend_to_torus()?;
            let grid = torus_grid_of(geo);
            let vals = ext.values();
            let mut acc = f.l2_norm().powi(2);
            let m = grid.m;
            let mut grad = 0.0;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let p = grid.linear(i, j, k);
                        let v = vals[p];
                        let nx = vals[grid.linear((i + 1) % m, j, k)] - v;
                        let ny = vals[grid.linear(i, (j + 1) % m, k)] - v;
                        let nz = vals[grid.linear(i, j, (k + 1) % m)] - v;
                        grad += nx.abs_sq() + ny.abs_sq() + nz.abs_sq();
                    }
                }
            }
            acc += grad * h3 / (h * h);
            if s == 2 {
                let mut lap = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        for k in 0..m {
                            let v = vals[grid.linear(i, j, k)];
                            let sum = vals[grid.linear((i + 1) % m, j, k)]
                                + vals[grid.linear((i + m - 1) % m, j, k)]
                                + vals[grid.linear(i, (j + 1) % m, k)]
                                + vals[grid.linear(i, (j + m - 1) % m, k)]
                                + vals[grid.linear(i, j, (k + 1) % m)]
                                + vals[grid.linear(i, j, (k + m - 1) % m)];
                            let l = (sum - v.scale(6.0)).scale(1.0 / (h * h));
                            lap += l.abs_sq();
                        }
                    }
                }
                acc += lap * h3;
            }
            Ok(acc.sqrt())
        }
        other => Err(Error::UnsupportedExponent(other as f64)),
    }
}

/// H1 norm of an all-node field (no zero extension; forward differences over
/// grid cells inside the closed box). Used for Robin solutions.
pub fn h1_norm_all<T: Scalar>(u: &Field<T>) -> Result<f64> {
    if u.support() != Support::All {
        return Err(Error::Invalid("h1_norm_all needs an all-node field".into()));
    }
    let geo = u.geometry();
    let m = geo.nodes_per_side();
    let h = geo.h();
    let h3 = geo.cell_volume();
    let vals = u.values();
    let id = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
    let mut acc = 0.0;
    let mut grad = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                acc += vals[id(i, j, k)].abs_sq();
                if i + 1 < m {
                    grad += (vals[id(i + 1, j, k)] - vals[id(i, j, k)]).abs_sq();
                }
                if j + 1 < m {
                    grad += (vals[id(i, j + 1, k)] - vals[id(i, j, k)]).abs_sq();
                }
                if k + 1 < m {
                    grad += (vals[id(i, j, k + 1)] - vals[id(i, j, k)]).abs_sq();
                }
            }
        }
    }
    Ok(((acc + grad / (h * h)) * h3).sqrt())
}
