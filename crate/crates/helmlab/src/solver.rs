//! Sparse assembly and direct factorizations for the Dirichlet and impedance
//! Helmholtz systems on the box grid.
//!
//! Dirichlet: unknowns are interior nodes, boundary rows eliminated into the
//! right-hand side. Impedance: unknowns are all nodes; ghost values are
//! eliminated through the Robin condition with a central stencil, and each
//! row is scaled by its node's volume weight so the system stays complex
//! symmetric.

use crate::error::{Error, Result};
use crate::field::{ComplexField, Field, Potential, RealField, Scalar, Support};
use crate::geometry::Geometry;
use crate::linalg::{SparseLuComplex, SparseLuReal, SparseSym};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Default relative spectral-proximity margin for Dirichlet solves.
pub const DEFAULT_MARGIN_REL: f64 = 1e-6;

/// Triplets of the interior operator `-Lap_h + q - lambda` (Dirichlet rows
/// eliminated; 7-point second-order stencil).
pub fn dirichlet_triplets(geo: &Geometry, q: &Potential, lambda: f64) -> Vec<(usize, usize, f64)> {
    let n = geo.interior().len();
    let h2 = geo.h() * geo.h();
    let m = geo.nodes_per_side();
    let mut t = Vec::with_capacity(7 * n);
    for (p, &id) in geo.interior().ids().iter().enumerate() {
        let (i, j, k) = geo.node_coords(id);
        t.push((p, p, 6.0 / h2 + q.field().values()[p] - lambda));
        let mut link = |ni: usize, nj: usize, nk: usize| {
            let nid = geo.node_id(ni, nj, nk);
            if let Some(np) = geo.interior().position(nid) {
                t.push((p, np, -1.0 / h2));
            }
        };
        // all six neighbors exist in the grid for interior nodes
        link(i - 1, j, k);
        link(i + 1, j, k);
        link(i, j - 1, k);
        link(i, j + 1, k);
        link(i, j, k - 1);
        link(i, j, k + 1);
        let _ = m;
    }
    t
}

/// Apply the interior stencil `(-Lap_h + q - lambda)` to an all-node field,
/// returning values on interior nodes.
pub fn apply_interior_operator<T: Scalar>(
    geo: &Geometry,
    q: &Potential,
    lambda: f64,
    u: &Field<T>,
) -> Result<Vec<T>> {
    if u.support() != Support::All {
        return Err(Error::Invalid("stencil apply needs an all-node field".into()));
    }
    let vals = u.values();
    let h2 = geo.h() * geo.h();
    let mut out = Vec::with_capacity(geo.interior().len());
    for (p, &id) in geo.interior().ids().iter().enumerate() {
        let (i, j, k) = geo.node_coords(id);
        let center = vals[id];
        let sum = vals[geo.node_id(i - 1, j, k)]
            + vals[geo.node_id(i + 1, j, k)]
            + vals[geo.node_id(i, j - 1, k)]
            + vals[geo.node_id(i, j + 1, k)]
            + vals[geo.node_id(i, j, k - 1)]
            + vals[geo.node_id(i, j, k + 1)];
        let lap = (center.scale(6.0) - sum).scale(1.0 / h2);
        out.push(lap + center.scale(q.field().values()[p] - lambda));
    }
    Ok(out)
}

/// Outcome diagnostics of a direct solve.
#[derive(Clone, Copy, Debug)]
pub struct SolveInfo {
    /// Relative algebraic residual of the factorized solve.
    pub residual: f64,
    /// Estimated distance from lambda to the discrete spectrum (if probed).
    pub spectral_distance: Option<f64>,
}

/// Factorized Dirichlet Helmholtz operator for one `(q, lambda)`.
pub struct DirichletSolver {
    geo: Arc<Geometry>,
    q: Potential,
    lambda: f64,
    matrix: SparseSym,
    lu: SparseLuReal,
    /// `1 / |(A - lambda)^-1|` estimated by power iteration, if probed.
    pub spectral_distance: Option<f64>,
}

impl DirichletSolver {
    /// Factorize; when `margin_rel > 0`, probe the distance from `lambda` to
    /// the discrete spectrum and fail if it is below `margin_rel * max(|lambda|, 1)`.
    pub fn new(geo: Arc<Geometry>, q: &Potential, lambda: f64, margin_rel: f64) -> Result<Self> {
        let triplets = dirichlet_triplets(&geo, q, lambda);
        let n = geo.interior().len();
        let matrix = SparseSym { n, triplets };
        let lu = SparseLuReal::new(n, &matrix.triplets)?;
        let mut solver = DirichletSolver {
            geo,
            q: q.clone(),
            lambda,
            matrix,
            lu,
            spectral_distance: None,
        };
        if margin_rel > 0.0 {
            let dist = solver.estimate_spectral_distance(24);
            solver.spectral_distance = Some(dist);
            if dist < margin_rel * lambda.abs().max(1.0) {
                let nearest = solver.estimate_nearest_eigenvalue(40);
                return Err(Error::SpectralProximity {
                    lambda,
                    eigenvalue: nearest,
                });
            }
        }
        Ok(solver)
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geo
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn potential(&self) -> &Potential {
        &self.q
    }

    pub fn matrix(&self) -> &SparseSym {
        &self.matrix
    }

    /// Power iteration on `(A - lambda)^-1`; its spectral radius is exactly
    /// `1 / dist(lambda, spec)` for the symmetric discrete operator.
    pub fn estimate_spectral_distance(&self, iters: usize) -> f64 {
        let n = self.matrix.n;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed0);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0f64..1.0)).collect();
        let mut rho = 0.0;
        for _ in 0..iters {
            let w = self.lu.solve_vec(&v);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return f64::INFINITY;
            }
            rho = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            v = w.iter().map(|x| x / norm).collect();
        }
        1.0 / rho.max(1e-300)
    }

    fn estimate_nearest_eigenvalue(&self, iters: usize) -> f64 {
        let n = self.matrix.n;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed1);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0f64..1.0)).collect();
        let mut alpha = 0.0;
        for _ in 0..iters {
            let w = self.lu.solve_vec(&v);
            let vn: f64 = v.iter().map(|x| x * x).sum::<f64>();
            alpha = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / vn.max(1e-300);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w.iter().map(|x| x / norm).collect();
        }
        self.lambda + 1.0 / alpha
    }

    /// Solve `(-Lap_h + q - lambda) u = f` in the interior with trace `phi`.
    /// The returned field carries the solution on all nodes, with the trace
    /// set exactly to `phi`.
    pub fn solve(&self, f: Option<&RealField>, phi: Option<&RealField>) -> Result<RealField> {
        let (u, _info) = self.solve_with_info(f, phi)?;
        Ok(u)
    }

    pub fn solve_with_info(
        &self,
        f: Option<&RealField>,
        phi: Option<&RealField>,
    ) -> Result<(RealField, SolveInfo)> {
        if let Some(f) = f {
            if f.support() != Support::Interior {
                return Err(Error::Invalid("source must be interior-supported".into()));
            }
        }
        if let Some(p) = phi {
            if p.support() != Support::Boundary {
                return Err(Error::Invalid("trace data must be boundary-supported".into()));
            }
        }
        let geo = &self.geo;
        let n = geo.interior().len();
        let h2 = geo.h() * geo.h();
        let mut rhs = vec![0.0; n];
        if let Some(f) = f {
            rhs.copy_from_slice(f.values());
        }
        if let Some(phi) = phi {
            for (p, &id) in geo.interior().ids().iter().enumerate() {
                let (i, j, k) = geo.node_coords(id);
                let mut add = |ni: usize, nj: usize, nk: usize| {
                    let nid = geo.node_id(ni, nj, nk);
                    if let Some(b) = geo.boundary().position(nid) {
                        rhs[p] += phi.values()[b] / h2;
                    }
                };
                add(i - 1, j, k);
                add(i + 1, j, k);
                add(i, j - 1, k);
                add(i, j + 1, k);
                add(i, j, k - 1);
                add(i, j, k + 1);
            }
        }
        let x = self.lu.solve_vec(&rhs);
        // algebraic residual
        let mut ax = vec![0.0; n];
        self.matrix.apply_slice(&x, &mut ax);
        let scale = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let residual = ax
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / scale;
        if residual > 1e-7 {
            return Err(Error::Solve(format!(
                "direct solve residual {residual:.3e} above tolerance"
            )));
        }
        let mut all = Field::zeros(geo.clone(), Support::All);
        for (p, &id) in geo.interior().ids().iter().enumerate() {
            all.values_mut()[id] = x[p];
        }
        if let Some(phi) = phi {
            for (b, &id) in geo.boundary().ids().iter().enumerate() {
                all.values_mut()[id] = phi.values()[b];
            }
        }
        Ok((
            all,
            SolveInfo {
                residual,
                spectral_distance: self.spectral_distance,
            },
        ))
    }

    /// Solve with the factorization reused, interior unknowns only
    /// (no boundary write-back); used by the shift-invert eigensolver.
    pub fn solve_interior_block(&self, b: &faer::Mat<f64>) -> faer::Mat<f64> {
        self.lu.solve_mat(b)
    }
}

/// Which sign branch the impedance condition `(d_nu -/+ i a sqrt(lambda)) u = phi` uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobinSign {
    /// `d_nu u - i a sqrt(lambda) u = phi`
    Minus,
    /// `d_nu u + i a sqrt(lambda) u = phi`
    Plus,
}

/// Impedance boundary data: coefficient `a > 0`, sign branch, and the
/// threshold `lambda_0` below which the H2-grade theory is not invoked.
#[derive(Clone, Debug)]
pub struct ImpedanceParams {
    pub a: RealField,
    pub sign: RobinSign,
    pub lambda0: f64,
}

impl ImpedanceParams {
    pub fn new(a: RealField, sign: RobinSign, lambda0: f64) -> Result<Self> {
        if a.support() != Support::Boundary {
            return Err(Error::Invalid("impedance coefficient must live on the boundary".into()));
        }
        if !a.values().iter().all(|&v| v > 0.0) {
            return Err(Error::Invalid("impedance coefficient must be strictly positive".into()));
        }
        Ok(ImpedanceParams { a, sign, lambda0 })
    }

    pub fn constant(geo: Arc<Geometry>, a: f64, sign: RobinSign, lambda0: f64) -> Result<Self> {
        Self::new(Field::from_fn(geo, Support::Boundary, |_| a), sign, lambda0)
    }
}

/// Number of missing (ghost) directions of a node: 0 interior, 1 face,
/// 2 edge, 3 corner.
fn ghost_count(geo: &Geometry, i: usize, j: usize, k: usize) -> usize {
    let n = geo.n();
    [i, j, k].iter().filter(|&&c| c == 0 || c == n).count()
}

/// Volume weight `h^3 / 2^(ghosts)` of a node row.
pub fn node_volume_weight(geo: &Geometry, id: usize) -> f64 {
    let (i, j, k) = geo.node_coords(id);
    geo.cell_volume() / (1 << ghost_count(geo, i, j, k)) as f64
}

/// Factorized impedance Helmholtz operator for one `(q, lambda, params)`.
pub struct RobinSolver {
    geo: Arc<Geometry>,
    q: Potential,
    lambda: f64,
    pub params: ImpedanceParams,
    triplets: Vec<(usize, usize, Complex64)>,
    lu: SparseLuComplex,
}

impl RobinSolver {
    pub fn new(
        geo: Arc<Geometry>,
        q: &Potential,
        lambda: f64,
        params: ImpedanceParams,
    ) -> Result<Self> {
        if lambda < params.lambda0 {
            return Err(Error::Invalid(format!(
                "impedance solve needs lambda >= lambda0 ({} < {})",
                lambda, params.lambda0
            )));
        }
        let n_all = geo.nodes_per_side().pow(3);
        let h = geo.h();
        let h2 = h * h;
        let sqrt_l = lambda.sqrt();
        let branch = match params.sign {
            // (d_nu - i a sqrt(l)) u = phi  =>  d_nu u = phi + i a sqrt(l) u
            RobinSign::Minus => Complex64::new(0.0, 1.0),
            RobinSign::Plus => Complex64::new(0.0, -1.0),
        };
        let mut t: Vec<(usize, usize, Complex64)> = Vec::with_capacity(8 * n_all);
        let n = geo.n();
        for id in 0..n_all {
            let (i, j, k) = geo.node_coords(id);
            let w = node_volume_weight(&geo, id);
            let qv = q.value_at_node(id);
            let mut diag = Complex64::new(6.0 / h2 + qv - lambda, 0.0);
            let coord = [i, j, k];
            for axis in 0..3 {
                for upper in [false, true] {
                    let outside = if upper { coord[axis] == n } else { coord[axis] == 0 };
                    if outside {
                        // ghost eliminated: inward neighbor gets weight 2, and
                        // the Robin term lands on the diagonal
                        let mut c = coord;
                        c[axis] = if upper { c[axis] - 1 } else { c[axis] + 1 };
                        let nid = geo.node_id(c[0], c[1], c[2]);
                        t.push((id, nid, Complex64::new(-2.0 * w / h2, 0.0)));
                        let b = geo.boundary().position(id).expect("ghost on boundary node");
                        let a_val = params.a.values()[b];
                        diag += -branch * (2.0 / h) * a_val * sqrt_l;
                    } else {
                        let mut c = coord;
                        c[axis] = if upper { c[axis] + 1 } else { c[axis] - 1 };
                        let nid = geo.node_id(c[0], c[1], c[2]);
                        t.push((id, nid, Complex64::new(-w / h2, 0.0)));
                    }
                }
            }
            t.push((id, id, diag * w));
        }
        let lu = SparseLuComplex::new(n_all, &t)?;
        Ok(RobinSolver {
            geo,
            q: q.clone(),
            lambda,
            params,
            triplets: t,
            lu,
        })
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geo
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn potential(&self) -> &Potential {
        &self.q
    }

    /// Solve `(-Lap + q - lambda) u = f` with `(d_nu -/+ i a sqrt(lambda)) u = phi`.
    pub fn solve(
        &self,
        f: Option<&ComplexField>,
        phi: Option<&ComplexField>,
    ) -> Result<ComplexField> {
        let (u, _info) = self.solve_with_info(f, phi)?;
        Ok(u)
    }

    pub fn solve_with_info(
        &self,
        f: Option<&ComplexField>,
        phi: Option<&ComplexField>,
    ) -> Result<(ComplexField, SolveInfo)> {
        if let Some(f) = f {
            if f.support() != Support::Interior {
                return Err(Error::Invalid("source must be interior-supported".into()));
            }
        }
        if let Some(p) = phi {
            if p.support() != Support::Boundary {
                return Err(Error::Invalid("impedance data must be boundary-supported".into()));
            }
        }
        let geo = &self.geo;
        let n_all = geo.nodes_per_side().pow(3);
        let h = geo.h();
        let mut rhs = vec![Complex64::new(0.0, 0.0); n_all];
        if let Some(f) = f {
            for (p, &id) in geo.interior().ids().iter().enumerate() {
                rhs[id] = f.values()[p] * node_volume_weight(geo, id);
            }
        }
        if let Some(phi) = phi {
            for (b, &id) in geo.boundary().ids().iter().enumerate() {
                let (i, j, k) = geo.node_coords(id);
                let g = ghost_count(geo, i, j, k) as f64;
                let w = node_volume_weight(geo, id);
                rhs[id] += phi.values()[b] * (2.0 * g / h) * w;
            }
        }
        let x = self.lu.solve_vec(&rhs);
        // algebraic residual
        let mut ax = vec![Complex64::new(0.0, 0.0); n_all];
        for &(i, j, v) in &self.triplets {
            ax[i] += v * x[j];
        }
        let scale = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
        let residual = ax
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / scale;
        if residual > 1e-7 {
            return Err(Error::Solve(format!(
                "impedance solve residual {residual:.3e} above tolerance"
            )));
        }
        let u = Field::from_values(geo.clone(), Support::All, x)?;
        Ok((
            u,
            SolveInfo {
                residual,
                spectral_distance: None,
            },
        ))
    }
}

/// One-off Dirichlet solve (factorize, solve, drop).
pub fn solve_dirichlet(
    geo: &Arc<Geometry>,
    q: &Potential,
    lambda: f64,
    f: Option<&RealField>,
    phi: Option<&RealField>,
) -> Result<RealField> {
    DirichletSolver::new(geo.clone(), q, lambda, DEFAULT_MARGIN_REL)?.solve(f, phi)
}

/// One-off impedance solve.
pub fn solve_robin(
    geo: &Arc<Geometry>,
    q: &Potential,
    lambda: f64,
    params: ImpedanceParams,
    f: Option<&ComplexField>,
    phi: Option<&ComplexField>,
) -> Result<ComplexField> {
    RobinSolver::new(geo.clone(), q, lambda, params)?.solve(f, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, GeometrySpec};

    fn geo(n: usize) -> Arc<Geometry> {
        let quarter = (n / 4) as f64 / n as f64;
        build_geometry(GeometrySpec {
            subdivisions: n,
            omega0_lo: [quarter; 3],
            omega0_hi: [1.0 - quarter; 3],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = geo(8);
        let q = Potential::constant(g.clone(), 0.0, 1.0).unwrap();
        let u = solve_dirichlet(&g, &q, 0.0, None, None).unwrap();
        assert!(u.values().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn harmonic_linear_is_exact() {
        // u = x1 is in the kernel of the stencil, so the solve is exact.
        let g = geo(8);
        let q = Potential::constant(g.clone(), 0.0, 1.0).unwrap();
        let phi = Field::from_fn(g.clone(), Support::Boundary, |x| x[0]);
        let u = solve_dirichlet(&g, &q, 0.0, None, Some(&phi)).unwrap();
        for (id, v) in u.values().iter().enumerate() {
            let x = g.node_position(id);
            assert!((v - x[0]).abs() < 1e-11, "node {id}");
        }
    }

    #[test]
    fn manufactured_solution_second_order() {
        // u* = sin(pi x) sin(pi y) sin(pi z), q = 1, lambda = 10.
        let pi = std::f64::consts::PI;
        let exact = move |x: [f64; 3]| (pi * x[0]).sin() * (pi * x[1]).sin() * (pi * x[2]).sin();
        let mut errors = Vec::new();
        for n in [8usize, 16] {
            let g = geo(n);
            let q = Potential::constant(g.clone(), 1.0, 2.0).unwrap();
            let lambda = 10.0;
            let f = Field::from_fn(g.clone(), Support::Interior, |x| {
                (3.0 * pi * pi + 1.0 - lambda) * exact(x)
            });
            let u = solve_dirichlet(&g, &q, lambda, Some(&f), None).unwrap();
            let mut err2 = 0.0;
            for (p, &id) in g.interior().ids().iter().enumerate() {
                let _ = p;
                let d = u.values()[id] - exact(g.node_position(id));
                err2 += d * d;
            }
            errors.push((err2 * g.cell_volume()).sqrt());
        }
        let order = (errors[0] / errors[1]).log2();
        assert!(order > 1.9, "observed order {order}, errors {errors:?}");
    }

    #[test]
    fn linearity_of_solve() {
        let g = geo(8);
        let q = Potential::constant(g.clone(), 0.5, 1.0).unwrap();
        let solver = DirichletSolver::new(g.clone(), &q, 7.0, DEFAULT_MARGIN_REL).unwrap();
        let f1 = Field::from_fn(g.clone(), Support::Interior, |x| x[0] * x[1]);
        let f2 = Field::from_fn(g.clone(), Support::Interior, |x| (4.0 * x[2]).sin());
        let p1 = Field::from_fn(g.clone(), Support::Boundary, |x| x[1]);
        let p2 = Field::from_fn(g.clone(), Support::Boundary, |x| x[0] * x[2]);
        let alpha = 1.7;
        let u1 = solver.solve(Some(&f1), Some(&p1)).unwrap();
        let u2 = solver.solve(Some(&f2), Some(&p2)).unwrap();
        let combined_f = f1.scale(alpha).add(&f2).unwrap();
        let combined_p = p1.scale(alpha).add(&p2).unwrap();
        let u12 = solver.solve(Some(&combined_f), Some(&combined_p)).unwrap();
        let expected = u1.scale(alpha).add(&u2).unwrap();
        let diff = u12.sub(&expected).unwrap();
        assert!(diff.sup_norm() < 1e-9 * (1.0 + expected.sup_norm()));
    }

    #[test]
    fn spectral_proximity_detected() {
        // lambda placed (nearly) on the lowest discrete eigenvalue.
        let g = geo(8);
        let q = Potential::constant(g.clone(), 0.0, 1.0).unwrap();
        let h = g.h();
        let mu1 = 3.0 * (4.0 / (h * h)) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        let err = match DirichletSolver::new(g.clone(), &q, mu1 + 1e-9, 1e-6) {
            Err(e) => e,
            Ok(_) => panic!("expected spectral proximity error"),
        };
        match err {
            Error::SpectralProximity { eigenvalue, .. } => {
                assert!((eigenvalue - mu1).abs() < 1e-3 * mu1);
            }
            other => panic!("expected spectral proximity, got {other}"),
        }
    }

    #[test]
    fn robin_zero_data_gives_zero() {
        let g = geo(8);
        let q = Potential::constant(g.clone(), 0.0, 1.0).unwrap();
        let params = ImpedanceParams::constant(g.clone(), 1.0, RobinSign::Minus, 1.0).unwrap();
        let u = solve_robin(&g, &q, 4.0, params, None, None).unwrap();
        assert!(u.values().iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn robin_system_is_complex_symmetric() {
        let g = geo(6);
        let q = Potential::constant(g.clone(), 0.3, 1.0).unwrap();
        let params = ImpedanceParams::constant(g.clone(), 1.3, RobinSign::Minus, 1.0).unwrap();
        let solver = RobinSolver::new(g.clone(), &q, 9.0, params).unwrap();
        use std::collections::HashMap;
        let mut m: HashMap<(usize, usize), Complex64> = HashMap::new();
        for &(i, j, v) in &solver.triplets {
            *m.entry((i, j)).or_insert(Complex64::new(0.0, 0.0)) += v;
        }
        for (&(i, j), &v) in &m {
            let vt = m.get(&(j, i)).copied().unwrap_or(Complex64::new(0.0, 0.0));
            assert!((v - vt).norm() < 1e-12 * (1.0 + v.norm()), "({i},{j})");
        }
    }

    #[test]
    fn robin_manufactured_residual() {
        // Verify the solver reproduces a manufactured smooth solution to O(h^2).
        let pi = std::f64::consts::PI;
        let lambda = 6.0;
        let exact = move |x: [f64; 3]| (pi * x[0]).cos() * (pi * x[1]).cos();
        let mut errs = Vec::new();
        for n in [8usize, 16] {
            let g = geo(n);
            let q = Potential::constant(g.clone(), 0.0, 1.0).unwrap();
            let params = ImpedanceParams::constant(g.clone(), 1.0, RobinSign::Minus, 1.0).unwrap();
            let f = Field::from_fn(g.clone(), Support::Interior, |x| {
                Complex64::new((2.0 * pi * pi - lambda) * exact(x), 0.0)
            });
            // phi = d_nu u - i a sqrt(l) u on each face
            let sq = lambda.sqrt();
            let phi = Field::from_fn(g.clone(), Support::Boundary, move |x| {
                let du = [
                    -pi * (pi * x[0]).sin() * (pi * x[1]).cos(),
                    -pi * (pi * x[0]).cos() * (pi * x[1]).sin(),
                    0.0,
                ];
                // outward normal components on the box
                let mut dn = 0.0;
                let mut faces = 0.0;
                for d in 0..3 {
                    if x[d] == 0.0 {
                        dn += -du[d];
                        faces += 1.0;
                    }
                    if (x[d] - 1.0).abs() < 1e-14 {
                        dn += du[d];
                        faces += 1.0;
                    }
                }
                let _ = faces;
                Complex64::new(dn, 0.0) - Complex64::new(0.0, 1.0) * sq * exact(x)
            });
            let solver =
                RobinSolver::new(g.clone(), &q, lambda, ImpedanceParams::constant(g.clone(), 1.0, RobinSign::Minus, 1.0).unwrap())
                    .unwrap();
            let _ = params;
            let u = solver.solve(Some(&f), Some(&phi)).unwrap();
            let mut err2 = 0.0;
            for id in 0..g.nodes_per_side().pow(3) {
                let d = u.values()[id] - exact(g.node_position(id));
                err2 += d.norm_sqr() * node_volume_weight(&g, id);
            }
            errs.push(err2.sqrt());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.5, "order {order}, errs {errs:?}");
    }
}
