//! Partial boundary maps: Dirichlet-to-Neumann and impedance-to-Dirichlet
//! assembly over a trace basis, weighted operator norms, and controlled
//! perturbations.
//!
//! The Neumann trace used in assembly is the flux-consistent one:
//! a first-order one-sided difference plus the data correction
//! `(h/2) [(q - lambda) phi - Lap_bd phi]`, which is second-order accurate on
//! face-interior nodes and keeps the discrete Green identity exact. At edge
//! and corner nodes (no well-defined normal) only the data term is kept.

use crate::boundary::{BoundaryCalculus, TraceBasis};
use crate::error::{Error, Result};
use crate::field::{Field, Potential, Scalar, Support};
use crate::geometry::Geometry;
use crate::linalg::{spectral_norm_complex, CMat};
use crate::solver::{DirichletSolver, RobinSolver};
use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// Dirichlet data to Neumann trace (input H^(3/2), output H^(1/2)).
    DtN,
    /// Impedance data to Dirichlet trace (input H^(1/2), output H^(3/2)).
    RtD,
}

impl MapKind {
    pub fn s_in(self) -> f64 {
        match self {
            MapKind::DtN => 1.5,
            MapKind::RtD => 0.5,
        }
    }

    pub fn s_out(self) -> f64 {
        match self {
            MapKind::DtN => 0.5,
            MapKind::RtD => 1.5,
        }
    }
}

/// A boundary map (or difference of two) over a fixed input trace basis,
/// stored column-wise on the output patch nodes.
pub struct BoundaryMap {
    pub kind: MapKind,
    pub lambda: f64,
    pub potential_id: u64,
    pub basis: Arc<TraceBasis>,
    /// Boundary positions of the output patch.
    pub sigma: Vec<usize>,
    /// `n_sigma x count` output values per basis column.
    pub matrix: CMat,
}

impl BoundaryMap {
    /// Apply to input-basis coefficients, producing output-patch node values.
    pub fn apply(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if coeffs.len() != self.basis.count() {
            return Err(Error::BasisMismatch {
                expected: self.basis.count(),
                got: coeffs.len(),
            });
        }
        Ok(self.matrix.matvec(coeffs))
    }

    /// Columnwise difference of two compatible maps.
    pub fn difference(&self, other: &BoundaryMap) -> Result<BoundaryMap> {
        if self.kind != other.kind
            || self.lambda != other.lambda
            || self.basis.id() != other.basis.id()
            || self.sigma != other.sigma
        {
            return Err(Error::BasisMismatch {
                expected: self.basis.count(),
                got: other.basis.count(),
            });
        }
        Ok(BoundaryMap {
            kind: self.kind,
            lambda: self.lambda,
            potential_id: self.potential_id ^ other.potential_id,
            basis: self.basis.clone(),
            sigma: self.sigma.clone(),
            matrix: self.matrix.sub(&other.matrix),
        })
    }
}

/// Flux-consistent Neumann trace of a Dirichlet solution with trace `phi`.
///
/// `u` is the all-node solution field, `phi` its boundary data (node values),
/// `lap_phi` the boundary-graph Laplacian applied to `phi`.
fn conormal_flux<T: Scalar>(
    geo: &Geometry,
    q: &Potential,
    lambda: f64,
    u: &[T],
    phi: &[T],
    lap_phi: &[T],
) -> Vec<T> {
    let h = geo.h();
    let mut out = Vec::with_capacity(geo.boundary().len());
    for (b, &id) in geo.boundary().ids().iter().enumerate() {
        let qb = q.value_at_node(id);
        let corr = (phi[b].scale(qb - lambda) - lap_phi[b]).scale(0.5 * h);
        let v = if geo.is_face_interior(b) {
            let f = geo.faces_of_boundary_node(b)[0];
            let (i, j, k) = geo.node_coords(id);
            let mut c = [i, j, k];
            let axis = f.axis();
            c[axis] = if f.is_upper() { c[axis] - 1 } else { c[axis] + 1 };
            let inner = u[geo.node_id(c[0], c[1], c[2])];
            (phi[b] - inner).scale(1.0 / h) + corr
        } else {
            corr
        };
        out.push(v);
    }
    out
}

/// Assemble the partial Dirichlet-to-Neumann map over the basis, restricted
/// to the output patch; optionally also return the interior restrictions of
/// the column solutions on the inner region (reused by the Runge operator).
pub fn assemble_dtn_with_interior(
    solver: &DirichletSolver,
    calc: &BoundaryCalculus,
    basis: &Arc<TraceBasis>,
    sigma: &[usize],
    want_interior: bool,
) -> Result<(BoundaryMap, Option<CMat>)> {
    let geo = solver.geometry().clone();
    let q = solver.potential();
    let lambda = solver.lambda();
    let nb = geo.boundary().len();
    let n0 = geo.omega0().len();
    let k = basis.count();

    let columns: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..k)
        .into_par_iter()
        .map(|j| {
            let phi_vec = basis.column(j);
            let phi = Field::from_values(geo.clone(), Support::Boundary, phi_vec.clone())?;
            let u = solver.solve(None, Some(&phi))?;
            let mut lap_phi = vec![0.0; nb];
            calc.laplacian().apply_slice(&phi_vec, &mut lap_phi);
            let flux = conormal_flux(&geo, q, lambda, u.values(), &phi_vec, &lap_phi);
            let interior = if want_interior {
                geo.omega0().ids().iter().map(|&id| u.values()[id]).collect()
            } else {
                Vec::new()
            };
            Ok((flux, interior))
        })
        .collect();

    let mut matrix = CMat::zeros(sigma.len(), k);
    let mut interior = want_interior.then(|| CMat::zeros(n0, k));
    for (j, col) in columns.into_iter().enumerate() {
        let (flux, inner) = col?;
        for (r, &b) in sigma.iter().enumerate() {
            matrix.set(r, j, Complex64::new(flux[b], 0.0));
        }
        if let Some(mat) = interior.as_mut() {
            for (r, &v) in inner.iter().enumerate() {
                mat.set(r, j, Complex64::new(v, 0.0));
            }
        }
    }
    Ok((
        BoundaryMap {
            kind: MapKind::DtN,
            lambda,
            potential_id: q.id(),
            basis: basis.clone(),
            sigma: sigma.to_vec(),
            matrix,
        },
        interior,
    ))
}

/// Assemble the partial Dirichlet-to-Neumann map `phi -> d_nu u |_Sigma`.
pub fn assemble_dtn(
    solver: &DirichletSolver,
    calc: &BoundaryCalculus,
    basis: &Arc<TraceBasis>,
    sigma: &[usize],
) -> Result<BoundaryMap> {
    Ok(assemble_dtn_with_interior(solver, calc, basis, sigma, false)?.0)
}

/// Assemble the impedance-to-Dirichlet map `phi -> u |_Sigma`, optionally with
/// inner-region restrictions of the column solutions.
pub fn assemble_rtd_with_interior(
    solver: &RobinSolver,
    basis: &Arc<TraceBasis>,
    sigma: &[usize],
    want_interior: bool,
) -> Result<(BoundaryMap, Option<CMat>)> {
    let geo = solver.geometry().clone();
    let k = basis.count();
    let n0 = geo.omega0().len();

    let columns: Vec<Result<(Vec<Complex64>, Vec<Complex64>)>> = (0..k)
        .into_par_iter()
        .map(|j| {
            let phi_vec: Vec<Complex64> = basis
                .column(j)
                .into_iter()
                .map(|v| Complex64::new(v, 0.0))
                .collect();
            let phi = Field::from_values(geo.clone(), Support::Boundary, phi_vec)?;
            let u = solver.solve(None, Some(&phi))?;
            let trace: Vec<Complex64> = geo
                .boundary()
                .ids()
                .iter()
                .map(|&id| u.values()[id])
                .collect();
            let interior = if want_interior {
                geo.omega0().ids().iter().map(|&id| u.values()[id]).collect()
            } else {
                Vec::new()
            };
            Ok((trace, interior))
        })
        .collect();

    let mut matrix = CMat::zeros(sigma.len(), k);
    let mut interior = want_interior.then(|| CMat::zeros(n0, k));
    for (j, col) in columns.into_iter().enumerate() {
        let (trace, inner) = col?;
        for (r, &b) in sigma.iter().enumerate() {
            matrix.set(r, j, trace[b]);
        }
        if let Some(mat) = interior.as_mut() {
            for (r, &v) in inner.iter().enumerate() {
                mat.set(r, j, v);
            }
        }
    }
    Ok((
        BoundaryMap {
            kind: MapKind::RtD,
            lambda: solver.lambda(),
            potential_id: solver.potential().id(),
            basis: basis.clone(),
            sigma: sigma.to_vec(),
            matrix,
        },
        interior,
    ))
}

pub fn assemble_rtd(
    solver: &RobinSolver,
    basis: &Arc<TraceBasis>,
    sigma: &[usize],
) -> Result<BoundaryMap> {
    Ok(assemble_rtd_with_interior(solver, basis, sigma, false)?.0)
}

/// Weighted operator norm: largest singular value of
/// `W_out^(1/2) M W_in^(-1/2)`. The input basis is orthonormal in its Sobolev
/// inner product, so `W_in = I` on coefficients; the output weight is the
/// whole-boundary functional calculus when the output patch is the full
/// boundary and the quotient Gram otherwise.
pub fn operator_norm(map: &BoundaryMap, calc: &BoundaryCalculus) -> Result<f64> {
    let geo = map.basis.geometry();
    let area_half = geo.cell_area().sqrt();
    let ns = map.sigma.len();
    let k = map.matrix.ncols;
    if ns == 0 || k == 0 {
        return Ok(0.0);
    }
    let s_out = map.kind.s_out();
    if map.sigma.len() == calc.n_boundary() {
        // whole boundary: rows live on all nodes, apply (I+L)^(s/2) directly
        let mut re = Mat::<f64>::zeros(ns, k);
        let mut im = Mat::<f64>::zeros(ns, k);
        for j in 0..k {
            for (r, &b) in map.sigma.iter().enumerate() {
                let _ = b;
                let v = map.matrix.at(r, j);
                re[(r, j)] = v.re;
                im[(r, j)] = v.im;
            }
        }
        let wre = calc.apply_weight(s_out / 2.0, &re);
        let wim = calc.apply_weight(s_out / 2.0, &im);
        let mut weighted = CMat::zeros(ns, k);
        for j in 0..k {
            for r in 0..ns {
                weighted.set(r, j, Complex64::new(wre[(r, j)], wim[(r, j)]));
            }
        }
        Ok(area_half * spectral_norm_complex(&weighted))
    } else {
        // patch: quotient Gram C = P (I+L)^(-s) P^T, norm = h |L_c^-1 M| with
        // C = L_c L_c^T
        let gram = calc_patch_gram(calc, s_out, &map.sigma);
        let ch = gram
            .cholesky(faer::Side::Lower)
            .map_err(|_| Error::Solve("patch Gram not positive definite".into()))?;
        let l = ch.compute_l();
        // forward substitution L Y = M (complex M via two real solves)
        let mut y = CMat::zeros(ns, k);
        for j in 0..k {
            let mut col: Vec<Complex64> = (0..ns).map(|r| map.matrix.at(r, j)).collect();
            for r in 0..ns {
                let mut acc = col[r];
                for p in 0..r {
                    acc -= col[p] * l[(r, p)];
                }
                col[r] = acc / l[(r, r)];
            }
            for r in 0..ns {
                y.set(r, j, col[r]);
            }
        }
        Ok(area_half * spectral_norm_complex(&y))
    }
}

fn calc_patch_gram(calc: &BoundaryCalculus, s: f64, patch: &[usize]) -> Mat<f64> {
    // mirror of BoundaryCalculus::patch_gram, reconstructed through the
    // public weight application on indicator columns would be O(n^3); use the
    // quotient quadratic on basis vectors instead. Since the Gram itself is
    // needed, rebuild it from eigen data via the calculus API.
    let np = patch.len();
    let nb = calc.n_boundary();
    // apply (I+L)^(-s) to indicator columns in blocks
    let block = 64usize;
    let mut g = Mat::<f64>::zeros(np, np);
    let mut start = 0;
    while start < np {
        let end = (start + block).min(np);
        let mut x = Mat::<f64>::zeros(nb, end - start);
        for (c, &b) in patch[start..end].iter().enumerate() {
            x[(b, c)] = 1.0;
        }
        let y = calc.apply_weight(-s, &x);
        for (c, _) in patch[start..end].iter().enumerate() {
            for (r, &br) in patch.iter().enumerate() {
                g[(r, start + c)] = y[(br, c)];
            }
        }
        start = end;
    }
    // symmetrize
    for a in 0..np {
        for b in (a + 1)..np {
            let s = 0.5 * (g[(a, b)] + g[(b, a)]);
            g[(a, b)] = s;
            g[(b, a)] = s;
        }
    }
    g
}

/// Inject relative spectral-norm noise: `M + level * |M| * G / |G|` with a
/// seeded Gaussian matrix `G` (norms are the weighted operator norms).
/// Returns the perturbed map and its weighted norm.
pub fn perturb_map(
    map: &BoundaryMap,
    level: f64,
    seed: u64,
    calc: &BoundaryCalculus,
) -> Result<(BoundaryMap, f64)> {
    if level == 0.0 {
        let norm = operator_norm(map, calc)?;
        return Ok((
            BoundaryMap {
                kind: map.kind,
                lambda: map.lambda,
                potential_id: map.potential_id,
                basis: map.basis.clone(),
                sigma: map.sigma.clone(),
                matrix: map.matrix.clone(),
            },
            norm,
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = map.sigma.len();
    let k = map.matrix.ncols;
    let mut g = CMat::zeros(ns, k);
    for j in 0..k {
        for r in 0..ns {
            // Box-Muller standard normal
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            g.set(r, j, Complex64::new(z, 0.0));
        }
    }
    let g_map = BoundaryMap {
        kind: map.kind,
        lambda: map.lambda,
        potential_id: 0,
        basis: map.basis.clone(),
        sigma: map.sigma.clone(),
        matrix: g,
    };
    let base = operator_norm(map, calc)?;
    let g_norm = operator_norm(&g_map, calc)?;
    if g_norm == 0.0 || base == 0.0 {
        let norm = operator_norm(map, calc)?;
        return Ok((g_map, norm));
    }
    let scale = level * base / g_norm;
    let perturbed = BoundaryMap {
        kind: map.kind,
        lambda: map.lambda,
        potential_id: map.potential_id,
        basis: map.basis.clone(),
        sigma: map.sigma.clone(),
        matrix: map.matrix.add_scaled(&g_map.matrix, scale),
    };
    let norm = operator_norm(&perturbed, calc)?;
    Ok((perturbed, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::TraceBasisOptions;
    use crate::field::cos2_bump;
    use crate::geometry::{build_geometry, GeometrySpec};
    use crate::solver::DEFAULT_MARGIN_REL;

    fn setup(n: usize) -> (Arc<Geometry>, BoundaryCalculus) {
        let quarter = (n / 4) as f64 / n as f64;
        let geo = build_geometry(GeometrySpec {
            subdivisions: n,
            omega0_lo: [quarter; 3],
            omega0_hi: [1.0 - quarter; 3],
            ..Default::default()
        })
        .unwrap();
        let calc = BoundaryCalculus::new(geo.clone()).unwrap();
        (geo, calc)
    }

    fn whole(geo: &Geometry) -> Vec<usize> {
        (0..geo.boundary().len()).collect()
    }

    #[test]
    fn equal_potentials_give_zero_difference() {
        let (geo, calc) = setup(6);
        let q = Potential::constant(geo.clone(), 0.4, 1.0).unwrap();
        let basis = TraceBasis::build(
            &calc,
            &whole(&geo),
            1.5,
            TraceBasisOptions { count: 8, taper_width: 0.12 },
        )
        .unwrap();
        let solver = DirichletSolver::new(geo.clone(), &q, 3.0, DEFAULT_MARGIN_REL).unwrap();
        let m1 = assemble_dtn(&solver, &calc, &basis, &whole(&geo)).unwrap();
        let m2 = assemble_dtn(&solver, &calc, &basis, &whole(&geo)).unwrap();
        let d = m1.difference(&m2).unwrap();
        assert!(operator_norm(&d, &calc).unwrap() < 1e-12);
    }

    #[test]
    fn columns_match_one_off_solves() {
        let (geo, calc) = setup(6);
        let q = Potential::constant(geo.clone(), 0.2, 1.0).unwrap();
        let basis = TraceBasis::build(
            &calc,
            &whole(&geo),
            1.5,
            TraceBasisOptions { count: 5, taper_width: 0.12 },
        )
        .unwrap();
        let solver = DirichletSolver::new(geo.clone(), &q, 5.0, DEFAULT_MARGIN_REL).unwrap();
        let map = assemble_dtn(&solver, &calc, &basis, &whole(&geo)).unwrap();
        for j in 0..basis.count() {
            let phi_vec = basis.column(j);
            let phi = Field::from_values(geo.clone(), Support::Boundary, phi_vec.clone()).unwrap();
            let u = solver.solve(None, Some(&phi)).unwrap();
            let mut lap_phi = vec![0.0; geo.boundary().len()];
            calc.laplacian().apply_slice(&phi_vec, &mut lap_phi);
            let flux = conormal_flux(&geo, &q, 5.0, u.values(), &phi_vec, &lap_phi);
            for (r, _) in whole(&geo).iter().enumerate() {
                assert_eq!(map.matrix.at(r, j).re, flux[r], "col {j} row {r}");
            }
        }
    }

    #[test]
    fn green_identity_symmetry() {
        // <Lambda phi, psi> = <phi, Lambda psi> for the full-boundary map;
        // the flux construction makes this exact to solver precision.
        let (geo, calc) = setup(8);
        let q = Potential::constant(geo.clone(), 0.7, 1.0).unwrap();
        let basis = TraceBasis::build(
            &calc,
            &whole(&geo),
            1.5,
            TraceBasisOptions { count: 10, taper_width: 0.12 },
        )
        .unwrap();
        let solver = DirichletSolver::new(geo.clone(), &q, 11.0, DEFAULT_MARGIN_REL).unwrap();
        let map = assemble_dtn(&solver, &calc, &basis, &whole(&geo)).unwrap();
        let area = geo.cell_area();
        // pairings in node space: <M e_i, B e_j> vs <B e_i, M e_j>
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for a in 0..basis.count() {
            for b in 0..basis.count() {
                let ca = basis.column(a);
                let cb = basis.column(b);
                let mut lhs = 0.0;
                let mut rhs = 0.0;
                for r in 0..geo.boundary().len() {
                    lhs += map.matrix.at(r, a).re * cb[r];
                    rhs += ca[r] * map.matrix.at(r, b).re;
                }
                worst = worst.max((lhs - rhs).abs() * area);
                scale = scale.max(lhs.abs() * area);
            }
        }
        assert!(worst < 1e-6 * scale.max(1.0), "asymmetry {worst:.3e} (scale {scale:.3e})");
    }

    #[test]
    fn dtn_difference_depends_only_on_inner_change() {
        // Perturbing q inside the inner region changes the map; the
        // difference operator must be (numerically) nonzero but the
        // difference of differences for identical bumps must vanish.
        let (geo, calc) = setup(8);
        let q1 = Potential::new(
            Field::from_fn(geo.clone(), Support::Interior, cos2_bump([0.5; 3], 0.2, 0.8)),
            2.0,
            0.0,
        )
        .unwrap();
        let q2 = Potential::constant(geo.clone(), 0.0, 2.0).unwrap();
        let basis = TraceBasis::build(
            &calc,
            &whole(&geo),
            1.5,
            TraceBasisOptions { count: 6, taper_width: 0.12 },
        )
        .unwrap();
        let s1 = DirichletSolver::new(geo.clone(), &q1, 7.0, DEFAULT_MARGIN_REL).unwrap();
        let s2 = DirichletSolver::new(geo.clone(), &q2, 7.0, DEFAULT_MARGIN_REL).unwrap();
        let m1 = assemble_dtn(&s1, &calc, &basis, &whole(&geo)).unwrap();
        let m2 = assemble_dtn(&s2, &calc, &basis, &whole(&geo)).unwrap();
        let d = m1.difference(&m2).unwrap();
        let nd = operator_norm(&d, &calc).unwrap();
        assert!(nd > 1e-8, "difference should see the bump, got {nd:.3e}");
    }

    #[test]
    fn operator_norm_diagonal_and_oracle() {
        // Identity-weight case: norm of a diagonal matrix with entries {3, 1}
        // must be 3. Build an artificial map with s weights trivialized by
        // using the L2 exponent via a fake kind is not possible, so check the
        // weighted norm against a dense SVD oracle instead.
        let (geo, calc) = setup(6);
        let basis = TraceBasis::build(
            &calc,
            &whole(&geo),
            1.5,
            TraceBasisOptions { count: 4, taper_width: 0.12 },
        )
        .unwrap();
        let ns = geo.boundary().len();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut m = CMat::zeros(ns, 4);
        for j in 0..4 {
            for r in 0..ns {
                m.set(r, j, Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
            }
        }
        let map = BoundaryMap {
            kind: MapKind::DtN,
            lambda: 1.0,
            potential_id: 0,
            basis: basis.clone(),
            sigma: whole(&geo),
            matrix: m.clone(),
        };
        let got = operator_norm(&map, &calc).unwrap();
        // oracle: explicit weighted matrix via dense weight application
        let mut re = Mat::<f64>::zeros(ns, 4);
        for j in 0..4 {
            for r in 0..ns {
                re[(r, j)] = m.at(r, j).re;
            }
        }
        let w = calc.apply_weight(0.25, &re);
        let mut weighted = CMat::zeros(ns, 4);
        for j in 0..4 {
            for r in 0..ns {
                weighted.set(r, j, Complex64::new(w[(r, j)], 0.0));
            }
        }
        let oracle = geo.cell_area().sqrt() * spectral_norm_complex(&weighted);
        assert!((got - oracle).abs() < 1e-10 * oracle.max(1.0));
    }

    #[test]
    fn perturbation_scales_norm() {
        let (geo, calc) = setup(6);
        let q1 = Potential::new(
            Field::from_fn(geo.clone(), Support::Interior, cos2_bump([0.5; 3], 0.2, 0.5)),
            2.0,
            0.0,
        )
        .unwrap();
        let q2 = Potential::constant(geo.clone(), 0.0, 2.0).unwrap();
        let basis = TraceBasis::build(
            &calc,
            &whole(&geo),
            1.5,
            TraceBasisOptions { count: 6, taper_width: 0.12 },
        )
        .unwrap();
        let s1 = DirichletSolver::new(geo.clone(), &q1, 7.0, DEFAULT_MARGIN_REL).unwrap();
        let s2 = DirichletSolver::new(geo.clone(), &q2, 7.0, DEFAULT_MARGIN_REL).unwrap();
        let d = assemble_dtn(&s1, &calc, &basis, &whole(&geo))
            .unwrap()
            .difference(&assemble_dtn(&s2, &calc, &basis, &whole(&geo)).unwrap())
            .unwrap();
        let base = operator_norm(&d, &calc).unwrap();
        let (_p, norm) = perturb_map(&d, 100.0, 7, &calc).unwrap();
        // large injected noise dominates: norm within a factor ~2 of level*base
        assert!(norm > 30.0 * base && norm < 300.0 * base, "{norm} vs base {base}");
    }
}
