//! Discrete scalar fields on grid node sets, and bounded potentials.

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use num_complex::Complex64;
use std::sync::Arc;

/// Scalar types a grid field can carry.
pub trait Scalar:
    Copy
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
    + PartialEq
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn abs_sq(self) -> f64;
    fn conj(self) -> Self;
    fn scale(self, a: f64) -> Self;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
    fn conj(self) -> Self {
        self
    }
    fn scale(self, a: f64) -> Self {
        self * a
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn scale(self, a: f64) -> Self {
        self * a
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Node set a field's values live on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    /// Interior grid nodes of the box.
    Interior,
    /// Boundary grid nodes of the box.
    Boundary,
    /// All grid nodes of the box (interior and boundary).
    All,
    /// Nodes of the enclosing torus (zero-extension grid).
    Torus,
}

impl Support {
    pub fn name(self) -> &'static str {
        match self {
            Support::Interior => "interior",
            Support::Boundary => "boundary",
            Support::All => "all",
            Support::Torus => "torus",
        }
    }
}

/// Scalar field sampled on a node set of a [`Geometry`].
#[derive(Clone, Debug)]
pub struct Field<T: Scalar> {
    geo: Arc<Geometry>,
    support: Support,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Scalar> Field<T> {
    pub fn expected_len(geo: &Geometry, support: Support) -> usize {
        match support {
            Support::Interior => geo.interior().len(),
            Support::Boundary => geo.boundary().len(),
            Support::All => geo.nodes_per_side().pow(3) as usize,
            Support::Torus => geo.torus_len(),
        }
    }

    pub fn zeros(geo: Arc<Geometry>, support: Support) -> Self {
        let n = Self::expected_len(&geo, support);
        Field {
            geo,
            support,
            values: vec![T::zero(); n],
        }
    }

    pub fn from_values(geo: Arc<Geometry>, support: Support, values: Vec<T>) -> Result<Self> {
        let expected = Self::expected_len(&geo, support);
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: values.len(),
                support: support.name(),
            });
        }
        Ok(Field { geo, support, values })
    }

    /// Sample a function of position on the support's nodes.
    pub fn from_fn(geo: Arc<Geometry>, support: Support, f: impl Fn([f64; 3]) -> T) -> Self {
        let values = match support {
            Support::Interior => geo
                .interior()
                .ids()
                .iter()
                .map(|&id| f(geo.node_position(id)))
                .collect(),
            Support::Boundary => geo
                .boundary()
                .ids()
                .iter()
                .map(|&id| f(geo.node_position(id)))
                .collect(),
            Support::All => (0..geo.nodes_per_side().pow(3))
                .map(|id| f(geo.node_position(id)))
                .collect(),
            Support::Torus => {
                let m = geo.torus_m();
                let h = geo.h();
                let mut v = Vec::with_capacity(m * m * m);
                for i in 0..m {
                    for j in 0..m {
                        for k in 0..m {
                            v.push(f([i as f64 * h, j as f64 * h, k as f64 * h]));
                        }
                    }
                }
                v
            }
        };
        Field { geo, support, values }
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geo
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a global node id (Interior/Boundary/All supports only).
    pub fn at_node(&self, id: usize) -> Option<T> {
        match self.support {
            Support::Interior => self.geo.interior().position(id).map(|p| self.values[p]),
            Support::Boundary => self.geo.boundary().position(id).map(|p| self.values[p]),
            Support::All => Some(self.values[id]),
            Support::Torus => None,
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Field {
            geo: self.geo.clone(),
            support: self.support,
            values: self.values.iter().map(|v| v.scale(a)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Field {
            geo: self.geo.clone(),
            support: self.support,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Field {
            geo: self.geo.clone(),
            support: self.support,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.support != other.support || self.values.len() != other.values.len() {
            return Err(Error::ShapeMismatch {
                expected: self.values.len(),
                got: other.values.len(),
                support: self.support.name(),
            });
        }
        Ok(())
    }

    /// Discrete L2 norm with the measure weight of the support
    /// (`h^n` on volume sets, `h^(n-1)` on the boundary).
    pub fn l2_norm(&self) -> f64 {
        let w = match self.support {
            Support::Boundary => self.geo.cell_area(),
            _ => self.geo.cell_volume(),
        };
        (self.values.iter().map(|v| v.abs_sq()).sum::<f64>() * w).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.abs_sq().sqrt())
            .fold(0.0, f64::max)
    }

    /// Restriction of an interior/all-support field to the inner-region nodes.
    pub fn restrict_to_omega0(&self) -> Result<Vec<T>> {
        match self.support {
            Support::Interior => Ok(self
                .geo
                .omega0()
                .ids()
                .iter()
                .map(|&id| self.values[self.geo.interior().position(id).unwrap()])
                .collect()),
            Support::All => Ok(self.geo.omega0().ids().iter().map(|&id| self.values[id]).collect()),
            _ => Err(Error::Invalid(
                "restriction to the inner region needs an interior or all-node field".into(),
            )),
        }
    }

    /// Zero-extension of an interior field to the enclosing torus.
    pub fn extend_to_torus(&self) -> Result<Field<T>> {
        if self.support != Support::Interior {
            return Err(Error::Invalid("zero extension needs an interior field".into()));
        }
        let mut out = Field::zeros(self.geo.clone(), Support::Torus);
        for (p, &id) in self.geo.interior().ids().iter().enumerate() {
            out.values[self.geo.torus_index_of_node(id)] = self.values[p];
        }
        Ok(out)
    }

    /// Maximum |value| over shell nodes (interior-support fields).
    pub fn sup_on_omega1(&self) -> Result<f64> {
        if self.support != Support::Interior {
            return Err(Error::Invalid("shell sup needs an interior field".into()));
        }
        Ok(self
            .geo
            .omega1()
            .ids()
            .iter()
            .map(|&id| self.values[self.geo.interior().position(id).unwrap()].abs_sq().sqrt())
            .fold(0.0, f64::max))
    }
}

impl RealField {
    pub fn to_complex(&self) -> ComplexField {
        Field {
            geo: self.geo.clone(),
            support: self.support,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// A real potential with its sup-norm budget and background value.
#[derive(Clone, Debug)]
pub struct Potential {
    field: RealField,
    kappa: f64,
    q0: f64,
}

impl Potential {
    /// Wrap an interior field as a potential, checking `max |q| <= kappa`.
    pub fn new(field: RealField, kappa: f64, q0: f64) -> Result<Potential> {
        if field.support() != Support::Interior {
            return Err(Error::Invalid("potential must be interior-supported".into()));
        }
        let found = field.sup_norm();
        if found > kappa + 1e-14 * kappa.abs().max(1.0) {
            return Err(Error::PotentialBound { found, kappa });
        }
        Ok(Potential { field, kappa, q0 })
    }

    pub fn constant(geo: Arc<Geometry>, value: f64, kappa: f64) -> Result<Potential> {
        let field = Field::from_fn(geo, Support::Interior, |_| value);
        Potential::new(field, kappa, value)
    }

    pub fn field(&self) -> &RealField {
        &self.field
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        self.field.geometry()
    }

    /// Value at an interior node id, `q0` elsewhere (used for boundary rows).
    pub fn value_at_node(&self, id: usize) -> f64 {
        self.field.at_node(id).unwrap_or(self.q0)
    }

    /// Check the admissible-pair predicate: `q1 - q2` vanishes on every shell node.
    pub fn admissible_pair(a: &Potential, b: &Potential) -> Result<()> {
        let diff = a.field.sub(&b.field)?;
        let sup = diff.sup_on_omega1()?;
        if sup > 1e-14 * (a.kappa.max(b.kappa)).max(1.0) {
            return Err(Error::NotAdmissiblePair(sup));
        }
        Ok(())
    }

    /// Deterministic identifier (hash of the sampled values).
    pub fn id(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for v in self.field.values() {
            v.to_bits().hash(&mut hasher);
        }
        self.kappa.to_bits().hash(&mut hasher);
        hasher.finish()
    }
}

/// Smooth compactly supported bump: `amplitude * prod_d cos^2(pi (x_d - c_d) / (2 r))`
/// inside the cube `|x_d - c_d| < r`, zero outside.
pub fn cos2_bump(center: [f64; 3], radius: f64, amplitude: f64) -> impl Fn([f64; 3]) -> f64 {
    move |x: [f64; 3]| {
        let mut v = amplitude;
        for d in 0..3 {
            let t = (x[d] - center[d]) / radius;
            if t.abs() >= 1.0 {
                return 0.0;
            }
            let c = (std::f64::consts::FRAC_PI_2 * t).cos();
            v *= c * c;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, GeometrySpec};

    fn geo() -> Arc<Geometry> {
        build_geometry(GeometrySpec::default()).unwrap()
    }

    #[test]
    fn shape_checked() {
        let g = geo();
        let err = Field::<f64>::from_values(g.clone(), Support::Interior, vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn potential_bound_enforced() {
        let g = geo();
        let f = Field::from_fn(g, Support::Interior, |_| 3.0);
        assert!(matches!(
            Potential::new(f, 2.0, 0.0),
            Err(Error::PotentialBound { .. })
        ));
    }

    #[test]
    fn admissible_pair_checks_shell() {
        let g = geo();
        let q1 = Potential::new(
            Field::from_fn(g.clone(), Support::Interior, cos2_bump([0.5; 3], 0.2, 0.5)),
            2.0,
            0.0,
        )
        .unwrap();
        let q2 = Potential::constant(g.clone(), 0.0, 2.0).unwrap();
        Potential::admissible_pair(&q1, &q2).unwrap();

        let q3 = Potential::constant(g, 0.1, 2.0).unwrap();
        assert!(Potential::admissible_pair(&q3, &q2).is_err());
    }

    #[test]
    fn zero_extension_preserves_l2() {
        let g = geo();
        let f = Field::from_fn(g, Support::Interior, |x| x[0] + 0.3 * x[1]);
        let t = f.extend_to_torus().unwrap();
        assert!((f.l2_norm() - t.l2_norm()).abs() < 1e-13);
    }
}
