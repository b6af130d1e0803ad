//! Boundary machinery: the surface graph Laplacian, fractional Sobolev
//! calculus through its eigenbasis, tapered trace bases on patches, patch
//! quotient norms, and the one-sided normal derivative.

use crate::error::{Error, Result};
use crate::field::{Field, Scalar, Support};
use crate::geometry::Geometry;
use crate::linalg::{
    cholesky_solve, mgs_orthonormalize, shift_invert_eigs, sym_eigen, SparseLuReal, SparseSym,
};
use faer::Mat;
use std::sync::Arc;

/// Boundary sizes up to which the full dense eigendecomposition is used.
/// Beyond it the calculus falls back to a truncated eigenbasis.
pub const MAX_DENSE_BOUNDARY: usize = 4400;

/// Default number of modes kept in the truncated (large-grid) calculus.
pub const DEFAULT_PARTIAL_MODES: usize = 256;

/// Graph Laplacian of the boundary surface: nodes are boundary grid nodes,
/// edges join boundary nodes at grid distance `h`, weights `1/h^2`.
pub fn boundary_laplacian(geo: &Geometry) -> SparseSym {
    let nb = geo.boundary().len();
    let h2 = geo.h() * geo.h();
    let m = geo.nodes_per_side();
    let mut triplets = Vec::with_capacity(nb * 5);
    for (b, &id) in geo.boundary().ids().iter().enumerate() {
        let (i, j, k) = geo.node_coords(id);
        let mut degree = 0.0;
        let mut nb_push = |ni: i64, nj: i64, nk: i64, triplets: &mut Vec<(usize, usize, f64)>| {
            if ni < 0 || nj < 0 || nk < 0 {
                return;
            }
            let (ni, nj, nk) = (ni as usize, nj as usize, nk as usize);
            if ni >= m || nj >= m || nk >= m {
                return;
            }
            let nid = geo.node_id(ni, nj, nk);
            if let Some(pos) = geo.boundary().position(nid) {
                triplets.push((b, pos, -1.0 / h2));
                degree += 1.0;
            }
        };
        let (i, j, k) = (i as i64, j as i64, k as i64);
        nb_push(i - 1, j, k, &mut triplets);
        nb_push(i + 1, j, k, &mut triplets);
        nb_push(i, j - 1, k, &mut triplets);
        nb_push(i, j + 1, k, &mut triplets);
        nb_push(i, j, k - 1, &mut triplets);
        nb_push(i, j, k + 1, &mut triplets);
        triplets.push((b, b, degree / h2));
    }
    SparseSym { n: nb, triplets }
}

enum CalcMode {
    /// Full eigendecomposition `L = V diag(mu) V^T`.
    Dense { vals: Vec<f64>, vecs: Mat<f64> },
    /// First modes only; the orthogonal complement is treated as a single
    /// shell at the largest computed eigenvalue.
    Partial { vals: Vec<f64>, vecs: Mat<f64> },
}

/// Functional calculus for `(I + L)^s` on the boundary, where `L` is the
/// surface graph Laplacian.
pub struct BoundaryCalculus {
    geo: Arc<Geometry>,
    lap: SparseSym,
    mode: CalcMode,
}

impl BoundaryCalculus {
    pub fn new(geo: Arc<Geometry>) -> Result<Self> {
        Self::with_modes(geo, DEFAULT_PARTIAL_MODES)
    }

    /// As [`BoundaryCalculus::new`] but requesting at least `n_modes` in the
    /// truncated fallback.
    pub fn with_modes(geo: Arc<Geometry>, n_modes: usize) -> Result<Self> {
        let lap = boundary_laplacian(&geo);
        let nb = lap.n;
        let mode = if nb <= MAX_DENSE_BOUNDARY {
            let mut dense = Mat::<f64>::zeros(nb, nb);
            for &(i, j, v) in &lap.triplets {
                dense[(i, j)] += v;
            }
            let (vals, vecs) = sym_eigen(&dense);
            CalcMode::Dense { vals, vecs }
        } else {
            let k = n_modes.min(nb);
            let shift = -0.5;
            let shifted: Vec<(usize, usize, f64)> = lap
                .triplets
                .iter()
                .map(|&(i, j, v)| (i, j, if i == j { v - shift } else { v }))
                .collect();
            let lu = SparseLuReal::new(nb, &shifted)?;
            let lap_ref = &lap;
            let pairs = shift_invert_eigs(
                nb,
                k,
                shift,
                &|x| lu.solve_mat(x),
                &|x| lap_ref.apply(x),
                1e-9,
                400,
                0x9e3779b97f4a7c15,
            )?;
            let mut sorted = pairs;
            sorted.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
            let vals: Vec<f64> = sorted.iter().map(|p| p.value.max(0.0)).collect();
            let mut vecs = Mat::<f64>::zeros(nb, sorted.len());
            for (j, p) in sorted.iter().enumerate() {
                for i in 0..nb {
                    vecs[(i, j)] = p.vector[i];
                }
            }
            mgs_orthonormalize(&mut vecs);
            CalcMode::Partial { vals, vecs }
        };
        Ok(BoundaryCalculus { geo, lap, mode })
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geo
    }

    pub fn laplacian(&self) -> &SparseSym {
        &self.lap
    }

    pub fn n_boundary(&self) -> usize {
        self.lap.n
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.mode, CalcMode::Dense { .. })
    }

    /// Number of eigenmodes the calculus can hand out.
    pub fn available_modes(&self) -> usize {
        match &self.mode {
            CalcMode::Dense { vals, .. } => vals.len(),
            CalcMode::Partial { vals, .. } => vals.len(),
        }
    }

    /// The `k`-th eigenvalue (ascending).
    pub fn eigenvalue(&self, k: usize) -> f64 {
        match &self.mode {
            CalcMode::Dense { vals, .. } => vals[k],
            CalcMode::Partial { vals, .. } => vals[k],
        }
    }

    /// The `k`-th eigenvector as a boundary-node vector.
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        let vecs = match &self.mode {
            CalcMode::Dense { vecs, .. } => vecs,
            CalcMode::Partial { vecs, .. } => vecs,
        };
        (0..self.lap.n).map(|i| vecs[(i, k)]).collect()
    }

    /// Apply `(I + L)^e` to a block of boundary-node columns.
    pub fn apply_weight(&self, e: f64, x: &Mat<f64>) -> Mat<f64> {
        match &self.mode {
            CalcMode::Dense { vals, vecs } => {
                let mut p = vecs.transpose() * x;
                for i in 0..p.nrows() {
                    let w = (1.0 + vals[i]).powf(e);
                    for c in 0..p.ncols() {
                        p[(i, c)] *= w;
                    }
                }
                vecs * p
            }
            CalcMode::Partial { vals, vecs } => {
                let p = vecs.transpose() * x;
                let tail = (1.0 + vals[vals.len() - 1]).powf(e);
                let mut scaled = p.to_owned();
                for i in 0..scaled.nrows() {
                    let w = (1.0 + vals[i]).powf(e) - tail;
                    for c in 0..scaled.ncols() {
                        scaled[(i, c)] *= w;
                    }
                }
                let mut y = vecs * scaled;
                for i in 0..y.nrows() {
                    for c in 0..y.ncols() {
                        y[(i, c)] += tail * x[(i, c)];
                    }
                }
                y
            }
        }
    }

    fn weight_quadratic(&self, e: f64, re: &[f64], im: Option<&[f64]>) -> f64 {
        let nb = self.lap.n;
        let cols = if im.is_some() { 2 } else { 1 };
        let mut x = Mat::<f64>::zeros(nb, cols);
        for i in 0..nb {
            x[(i, 0)] = re[i];
            if let Some(im) = im {
                x[(i, 1)] = im[i];
            }
        }
        let y = self.apply_weight(e, &x);
        let mut acc = 0.0;
        for c in 0..cols {
            for i in 0..nb {
                let src = if c == 0 { re[i] } else { im.unwrap()[i] };
                acc += src * y[(i, c)];
            }
        }
        acc
    }

    /// Gram matrix `(P f(L) P^T)` of the quotient problem on a patch,
    /// with `f(x) = (1 + x)^(-s)`.
    fn patch_gram(&self, s: f64, patch: &[usize]) -> Mat<f64> {
        let np = patch.len();
        match &self.mode {
            CalcMode::Dense { vals, vecs } => {
                let mut pv = Mat::<f64>::zeros(np, vals.len());
                for (r, &b) in patch.iter().enumerate() {
                    for k in 0..vals.len() {
                        pv[(r, k)] = vecs[(b, k)];
                    }
                }
                let mut scaled = pv.clone();
                for k in 0..vals.len() {
                    let f = (1.0 + vals[k]).powf(-s);
                    for r in 0..np {
                        scaled[(r, k)] *= f;
                    }
                }
                scaled * pv.transpose()
            }
            CalcMode::Partial { vals, vecs } => {
                let kmax = vals.len();
                let mut pv = Mat::<f64>::zeros(np, kmax);
                for (r, &b) in patch.iter().enumerate() {
                    for k in 0..kmax {
                        pv[(r, k)] = vecs[(b, k)];
                    }
                }
                let tail = (1.0 + vals[kmax - 1]).powf(-s);
                let mut scaled = pv.clone();
                for k in 0..kmax {
                    let f = (1.0 + vals[k]).powf(-s) - tail;
                    for r in 0..np {
                        scaled[(r, k)] *= f;
                    }
                }
                let mut g = scaled * pv.transpose();
                for r in 0..np {
                    g[(r, r)] += tail;
                }
                g
            }
        }
    }

    /// Quotient norm on a patch: `min { |h|_(H^s(bd)) : h|_patch = phi }`,
    /// evaluated as `h^(n-1) phi^T (P (I+L)^(-s) P^T)^(-1) phi`.
    pub fn patch_quotient_quadratic(
        &self,
        s: f64,
        patch: &[usize],
        re: &[f64],
        im: Option<&[f64]>,
    ) -> Result<f64> {
        let g = self.patch_gram(s, patch);
        let np = patch.len();
        let cols = if im.is_some() { 2 } else { 1 };
        let mut rhs = Mat::<f64>::zeros(np, cols);
        for i in 0..np {
            rhs[(i, 0)] = re[i];
            if let Some(im) = im {
                rhs[(i, 1)] = im[i];
            }
        }
        let sol = cholesky_solve(&g, &rhs)?;
        let mut acc = 0.0;
        for c in 0..cols {
            for i in 0..np {
                let src = if c == 0 { re[i] } else { im.unwrap()[i] };
                acc += src * sol[(i, c)];
            }
        }
        Ok(acc)
    }
}

/// Sobolev norm of a boundary field.
///
/// With `patch = None` (or the whole boundary) this is
/// `h^((n-1)/2) |(I+L)^(s/2) phi|`; on a proper patch it is the quotient norm,
/// the minimum of the whole-boundary norm over extensions, computed by the
/// constrained least-squares closed form.
pub fn boundary_sobolev_norm<T: Scalar>(
    calc: &BoundaryCalculus,
    phi: &Field<T>,
    s: f64,
    patch: Option<&[usize]>,
) -> Result<f64> {
    if phi.support() != Support::Boundary {
        return Err(Error::Invalid("boundary norm needs a boundary field".into()));
    }
    let geo = phi.geometry();
    let area = geo.cell_area();
    let vals = phi.values();
    let nb = vals.len();
    let complex = vals.iter().any(|v| v.to_complex().im != 0.0);
    match patch {
        None => {
            let re: Vec<f64> = vals.iter().map(|v| v.to_complex().re).collect();
            let im: Vec<f64> = vals.iter().map(|v| v.to_complex().im).collect();
            let q = calc.weight_quadratic(s, &re, complex.then_some(im.as_slice()));
            Ok((area * q.max(0.0)).sqrt())
        }
        Some(p) if p.len() == nb => boundary_sobolev_norm(calc, phi, s, None),
        Some(p) => {
            let re: Vec<f64> = p.iter().map(|&b| vals[b].to_complex().re).collect();
            let im: Vec<f64> = p.iter().map(|&b| vals[b].to_complex().im).collect();
            let q =
                calc.patch_quotient_quadratic(s, p, &re, complex.then_some(im.as_slice()))?;
            Ok((area * q.max(0.0)).sqrt())
        }
    }
}

/// Smooth cutoff on a patch: 1 deep inside, falling to 0 at the patch rim
/// over `width` (graph distance), identically 1 when the patch is the whole
/// boundary.
pub fn patch_taper(geo: &Geometry, patch: &[usize], width: f64) -> Vec<f64> {
    let nb = geo.boundary().len();
    let mut in_patch = vec![false; nb];
    for &b in patch {
        in_patch[b] = true;
    }
    if in_patch.iter().all(|&x| x) {
        return vec![1.0; nb];
    }
    // multi-source BFS from the complement over the boundary graph
    let m = geo.nodes_per_side();
    let mut dist = vec![usize::MAX; nb];
    let mut queue = std::collections::VecDeque::new();
    for b in 0..nb {
        if !in_patch[b] {
            dist[b] = 0;
            queue.push_back(b);
        }
    }
    while let Some(b) = queue.pop_front() {
        let id = geo.boundary().ids()[b];
        let (i, j, k) = geo.node_coords(id);
        let (i, j, k) = (i as i64, j as i64, k as i64);
        for (di, dj, dk) in [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)] {
            let (ni, nj, nk) = (i + di, j + dj, k + dk);
            if ni < 0 || nj < 0 || nk < 0 {
                continue;
            }
            let (ni, nj, nk) = (ni as usize, nj as usize, nk as usize);
            if ni >= m || nj >= m || nk >= m {
                continue;
            }
            if let Some(pos) = geo.boundary().position(geo.node_id(ni, nj, nk)) {
                if dist[pos] == usize::MAX {
                    dist[pos] = dist[b] + 1;
                    queue.push_back(pos);
                }
            }
        }
    }
    let h = geo.h();
    (0..nb)
        .map(|b| {
            if !in_patch[b] {
                return 0.0;
            }
            let d = dist[b] as f64 * h;
            let t = (d / width).clamp(0.0, 1.0);
            t * t * (3.0 - 2.0 * t)
        })
        .collect()
}

/// Orthonormal trace basis on a patch: tapered restrictions of the lowest
/// boundary-Laplacian modes, orthonormalized in the `H^(s_in)` inner product
/// `h^(n-1) <(I+L)^(s_in) . , .>`.
pub struct TraceBasis {
    geo: Arc<Geometry>,
    /// Boundary positions of the carrying patch.
    pub patch: Vec<usize>,
    pub s_in: f64,
    /// Boundary-node values of the basis vectors (zero off the patch), one column each.
    vectors: Mat<f64>,
    pub taper_width: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct TraceBasisOptions {
    pub count: usize,
    pub taper_width: f64,
}

impl Default for TraceBasisOptions {
    fn default() -> Self {
        TraceBasisOptions {
            count: 32,
            taper_width: 0.12,
        }
    }
}

impl TraceBasis {
    pub fn build(
        calc: &BoundaryCalculus,
        patch: &[usize],
        s_in: f64,
        opts: TraceBasisOptions,
    ) -> Result<Arc<TraceBasis>> {
        let geo = calc.geometry().clone();
        let nb = calc.n_boundary();
        if patch.is_empty() {
            return Err(Error::PatchEmpty("trace basis patch"));
        }
        let whole = patch.len() == nb;
        let raw = (opts.count + opts.count / 2 + 4).min(calc.available_modes());
        if raw == 0 {
            return Err(Error::Invalid("no boundary modes available".into()));
        }
        let taper = patch_taper(&geo, patch, opts.taper_width);
        let mut cand = Mat::<f64>::zeros(nb, raw);
        for k in 0..raw {
            let v = calc.eigenvector(k);
            for i in 0..nb {
                cand[(i, k)] = taper[i] * v[i];
            }
        }
        // Gram in the H^(s_in) inner product
        let w = calc.apply_weight(s_in, &cand);
        let area = geo.cell_area();
        let mut gram = Mat::<f64>::zeros(raw, raw);
        for a in 0..raw {
            for b in 0..raw {
                let mut acc = 0.0;
                for i in 0..nb {
                    acc += cand[(i, a)] * w[(i, b)];
                }
                gram[(a, b)] = acc * area;
            }
        }
        for a in 0..raw {
            for b in (a + 1)..raw {
                let s = 0.5 * (gram[(a, b)] + gram[(b, a)]);
                gram[(a, b)] = s;
                gram[(b, a)] = s;
            }
        }

        // Cholesky keeps the natural mode ordering; fall back to an eigen
        // filter when the tapered candidates are near-dependent.
        let vectors = match gram.cholesky(faer::Side::Lower) {
            Ok(ch) => {
                // B = C R^-1 with R upper (so B^T W B = I)
                let l = ch.compute_l();
                let mut b = cand.clone();
                // solve B L^T = C  column-block: iterate columns of L
                // L is lower triangular: C = B L^T, so B[:,j] = (C[:,j] - sum_{p<j} B[:,p] L[j,p]) / L[j,j]
                for j in 0..raw {
                    for p in 0..j {
                        let f = l[(j, p)];
                        for i in 0..nb {
                            let correction = f * b[(i, p)];
                            b[(i, j)] -= correction;
                        }
                    }
                    let d = l[(j, j)];
                    for i in 0..nb {
                        b[(i, j)] /= d;
                    }
                }
                b
            }
            Err(_) => {
                let (gvals, gvecs) = sym_eigen(&gram);
                let gmax = gvals.iter().cloned().fold(0.0, f64::max);
                let keep: Vec<usize> = (0..raw)
                    .filter(|&i| gvals[i] > 1e-12 * gmax)
                    .collect();
                let mut b = Mat::<f64>::zeros(nb, keep.len());
                for (c, &k) in keep.iter().enumerate() {
                    let scale = gvals[k].sqrt().recip();
                    for i in 0..nb {
                        let mut acc = 0.0;
                        for a in 0..raw {
                            acc += cand[(i, a)] * gvecs[(a, k)];
                        }
                        b[(i, c)] = acc * scale;
                    }
                }
                b
            }
        };

        let count = opts.count.min(vectors.ncols());
        let mut kept = Mat::<f64>::zeros(nb, count);
        for j in 0..count {
            for i in 0..nb {
                kept[(i, j)] = vectors[(i, j)];
            }
        }
        let _ = whole;
        Ok(Arc::new(TraceBasis {
            geo,
            patch: patch.to_vec(),
            s_in,
            vectors: kept,
            taper_width: opts.taper_width,
        }))
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geo
    }

    pub fn count(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn n_boundary(&self) -> usize {
        self.vectors.nrows()
    }

    /// Boundary-node values of basis vector `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, j)]).collect()
    }

    pub fn vectors(&self) -> &Mat<f64> {
        &self.vectors
    }

    /// Synthesize boundary-node values from complex coefficients.
    pub fn synthesize(&self, coeffs: &[num_complex::Complex64]) -> Result<Vec<num_complex::Complex64>> {
        if coeffs.len() != self.count() {
            return Err(Error::BasisMismatch {
                expected: self.count(),
                got: coeffs.len(),
            });
        }
        let nb = self.vectors.nrows();
        let mut out = vec![num_complex::Complex64::new(0.0, 0.0); nb];
        for j in 0..self.count() {
            let c = coeffs[j];
            if c.norm_sqr() == 0.0 {
                continue;
            }
            for i in 0..nb {
                out[i] += c * self.vectors[(i, j)];
            }
        }
        Ok(out)
    }

    pub fn id(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for j in 0..self.vectors.ncols() {
            for i in 0..self.vectors.nrows() {
                self.vectors[(i, j)].to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }
}

/// Second-order one-sided normal derivative on each face; face values are
/// averaged at edge and corner nodes.
pub fn normal_derivative<T: Scalar>(u: &Field<T>) -> Result<Field<T>> {
    if u.support() != Support::All {
        return Err(Error::Invalid("normal derivative needs an all-node field".into()));
    }
    let geo = u.geometry().clone();
    let n = geo.n();
    let h = geo.h();
    let vals = u.values();
    let mut out = Vec::with_capacity(geo.boundary().len());
    for (b, &id) in geo.boundary().ids().iter().enumerate() {
        let (i, j, k) = geo.node_coords(id);
        let faces = geo.faces_of_boundary_node(b);
        let mut acc = T::zero();
        for f in faces {
            let axis = f.axis();
            let step: i64 = if f.is_upper() { -1 } else { 1 };
            let coord = [i as i64, j as i64, k as i64];
            let mut c1 = coord;
            c1[axis] += step;
            let mut c2 = coord;
            c2[axis] += 2 * step;
            let id1 = geo.node_id(c1[0] as usize, c1[1] as usize, c1[2] as usize);
            let id2 = geo.node_id(c2[0] as usize, c2[1] as usize, c2[2] as usize);
            let u0 = vals[id];
            let u1 = vals[id1];
            let u2 = vals[id2];
            // d_nu u = (3 u0 - 4 u_in + u_in2) / (2h) with inward samples
            let d = (u0.scale(3.0) - u1.scale(4.0) + u2).scale(1.0 / (2.0 * h));
            acc = acc + d;
        }
        out.push(acc.scale(1.0 / faces.len() as f64));
    }
    let _ = n;
    Field::from_values(geo, Support::Boundary, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, Face, GeometrySpec, PatchSpec};

    fn small_geo() -> Arc<Geometry> {
        build_geometry(GeometrySpec {
            subdivisions: 8,
            omega0_lo: [0.375; 3],
            omega0_hi: [0.625; 3],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let geo = small_geo();
        let lap = boundary_laplacian(&geo);
        let x = vec![1.0; lap.n];
        let mut y = vec![0.0; lap.n];
        lap.apply_slice(&x, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn zero_norm_and_l2_case() {
        let geo = small_geo();
        let calc = BoundaryCalculus::new(geo.clone()).unwrap();
        let zero = Field::<f64>::zeros(geo.clone(), Support::Boundary);
        assert_eq!(boundary_sobolev_norm(&calc, &zero, 0.5, None).unwrap(), 0.0);

        let phi = Field::from_fn(geo.clone(), Support::Boundary, |x| x[0] - 0.3 * x[2]);
        let direct = phi.l2_norm();
        let via_calc = boundary_sobolev_norm(&calc, &phi, 0.0, None).unwrap();
        assert!((direct - via_calc).abs() < 1e-10 * (1.0 + direct));
    }

    #[test]
    fn eigenvector_norm_matches_weight() {
        // Oracle: the dense eigendecomposition gives (1+mu)^(s/2) |phi|_L2 exactly.
        let geo = small_geo();
        let calc = BoundaryCalculus::new(geo.clone()).unwrap();
        let k = 5;
        let mu = calc.eigenvalue(k);
        let v = calc.eigenvector(k);
        let phi = Field::from_values(geo.clone(), Support::Boundary, v).unwrap();
        let l2 = phi.l2_norm();
        for s in [-1.5, -0.5, 0.5, 1.0, 1.5] {
            let got = boundary_sobolev_norm(&calc, &phi, s, None).unwrap();
            let expected = (1.0 + mu).powf(s / 2.0) * l2;
            assert!(
                (got - expected).abs() < 1e-9 * expected.max(1e-12),
                "s={s}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn whole_patch_quotient_equals_direct() {
        let geo = small_geo();
        let calc = BoundaryCalculus::new(geo.clone()).unwrap();
        let phi = Field::from_fn(geo.clone(), Support::Boundary, |x| (3.0 * x[1]).sin() + x[0]);
        let all: Vec<usize> = (0..geo.boundary().len()).collect();
        let a = boundary_sobolev_norm(&calc, &phi, 0.5, Some(&all)).unwrap();
        let b = boundary_sobolev_norm(&calc, &phi, 0.5, None).unwrap();
        assert!((a - b).abs() < 1e-8 * (1.0 + b));
    }

    #[test]
    fn patch_quotient_below_any_extension() {
        // The quotient norm minimizes over extensions, so the norm of any
        // particular extension dominates it.
        let geo = small_geo();
        let calc = BoundaryCalculus::new(geo.clone()).unwrap();
        let phi = Field::from_fn(geo.clone(), Support::Boundary, |x| {
            (2.0 * x[1] + x[2]).cos()
        });
        let sigma = geo.sigma().to_vec();
        // Build the restriction (zero off sigma) as the particular extension.
        let mut restricted = vec![0.0; geo.boundary().len()];
        for &b in &sigma {
            restricted[b] = phi.values()[b];
        }
        let restricted = Field::from_values(geo.clone(), Support::Boundary, restricted).unwrap();
        let q = boundary_sobolev_norm(&calc, &restricted, 0.5, Some(&sigma)).unwrap();
        let full = boundary_sobolev_norm(&calc, &phi, 0.5, None).unwrap();
        assert!(q <= full + 1e-9, "{q} vs {full}");
    }

    #[test]
    fn trace_basis_is_orthonormal_and_supported() {
        let geo = build_geometry(GeometrySpec {
            subdivisions: 8,
            omega0_lo: [0.375; 3],
            omega0_hi: [0.625; 3],
            gamma: PatchSpec::Faces(vec![Face::XLo]),
            ..Default::default()
        })
        .unwrap();
        let calc = BoundaryCalculus::new(geo.clone()).unwrap();
        let basis = TraceBasis::build(
            &calc,
            geo.gamma(),
            1.5,
            TraceBasisOptions {
                count: 6,
                taper_width: 0.12,
            },
        )
        .unwrap();
        assert_eq!(basis.count(), 6);
        // supported on gamma
        let in_gamma: std::collections::HashSet<_> = geo.gamma().iter().cloned().collect();
        for j in 0..basis.count() {
            let col = basis.column(j);
            for (i, v) in col.iter().enumerate() {
                if !in_gamma.contains(&i) {
                    assert!(v.abs() < 1e-14);
                }
            }
        }
        // orthonormal in the weighted inner product
        let w = calc.apply_weight(1.5, basis.vectors());
        let area = geo.cell_area();
        for a in 0..basis.count() {
            for b in 0..basis.count() {
                let mut acc = 0.0;
                for i in 0..basis.n_boundary() {
                    acc += basis.vectors()[(i, a)] * w[(i, b)];
                }
                acc *= area;
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((acc - expected).abs() < 1e-8, "gram[{a},{b}] = {acc}");
            }
        }
    }

    #[test]
    fn normal_derivative_constant_and_linear() {
        let geo = small_geo();
        let c = Field::from_fn(geo.clone(), Support::All, |_| 2.5);
        let d = normal_derivative(&c).unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-12));

        let lin = Field::from_fn(geo.clone(), Support::All, |x| x[0]);
        let d = normal_derivative(&lin).unwrap();
        // on the face x = 0 (face-interior nodes) the outward normal is -e_x
        for (b, &id) in geo.boundary().ids().iter().enumerate() {
            if !geo.is_face_interior(b) {
                continue;
            }
            let x = geo.node_position(id);
            let f = geo.faces_of_boundary_node(b)[0];
            if x[0] == 0.0 && f.axis() == 0 {
                assert!((d.values()[b] + 1.0).abs() < 1e-12);
            }
            if (x[0] - 1.0).abs() < 1e-14 && f.axis() == 0 {
                assert!((d.values()[b] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normal_derivative_second_order_on_sine() {
        // Oracle: d/dx sin(pi x) at x = 0 is pi; outward normal flips the sign.
        let mut errs = Vec::new();
        for n in [8, 16] {
            let geo = build_geometry(GeometrySpec {
                subdivisions: n,
                omega0_lo: [0.375; 3],
                omega0_hi: [0.625; 3],
                ..Default::default()
            })
            .unwrap();
            let u = Field::from_fn(geo.clone(), Support::All, |x| (std::f64::consts::PI * x[0]).sin());
            let d = normal_derivative(&u).unwrap();
            let mut worst = 0.0f64;
            for (b, &id) in geo.boundary().ids().iter().enumerate() {
                if !geo.is_face_interior(b) {
                    continue;
                }
                let x = geo.node_position(id);
                if x[0] == 0.0 {
                    worst = worst.max((d.values()[b] + std::f64::consts::PI).abs());
                }
            }
            errs.push(worst);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "order {order}, errs {errs:?}");
    }
}
