//! Built-in exactly solvable models.
//!
//! Gauges are chosen so that the planar field `F₁₂` is `+1` and the
//! toroidal field of the radial model points along `(−x₂, x₁, 0)`.

use serde::{Deserialize, Serialize};

use super::{DomainBox, HalfSpace, ModelSpec};
use crate::poly::{Poly, RadialPoly, ScalarMap};
use crate::{Error, Result};

pub const NAMES: &[&str] = &[
    "ex-13-6-3-i",
    "ex-13-6-3-ii",
    "ex-13-6-3-ii+",
    "ex-13-6-3-ii-",
    "ex-13-6-3-iii",
    "ex-13-6-34-i",
    "ex-13-6-34-ii",
    "ex-13-6-34-iv",
    "ex-13-6-36",
    "ex-13-6-41",
    "ex-13-7-12",
];

/// Shape parameters of catalog models; unset values take model defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogParams {
    pub k: Option<f64>,
    pub l: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    /// Radial coefficients of the magnetic profile `α(ρ)`.
    pub alpha: Option<Vec<f64>>,
    /// Radial coefficients of the electric profile `w(ρ)`.
    pub w: Option<Vec<f64>>,
    /// Boundary slope of the half-space model.
    pub slope: Option<f64>,
    /// Linear potential along the field lines of the half-space model.
    pub e3: Option<f64>,
}

fn sym_gauge_2d() -> [ScalarMap; 3] {
    [
        ScalarMap::poly(Poly::linear(1, -0.5)),
        ScalarMap::poly(Poly::linear(0, 0.5)),
        ScalarMap::zero(),
    ]
}

fn box2(a: f64) -> DomainBox {
    DomainBox::new([-a, -a, 0.0], [a, a, 0.0])
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidModel(format!("parameter {name} must be positive, got {v}")))
    }
}

/// Build a catalog model with `μ = h = 1`, `τ = 0`; callers set parameters.
pub fn build(name: &str, p: &CatalogParams) -> Result<ModelSpec> {
    let k = p.k.unwrap_or(1.0);
    let l = p.l.unwrap_or(1.0);
    let slab = DomainBox::new([-1.0, -1.0, -3.0], [1.0, 1.0, 3.0]);
    let quad_x3 = |k: f64| (k * k, [0, 0, 2]);
    let m = match name {
        "ex-13-6-3-i" => ModelSpec::euclidean(name, 2, sym_gauge_2d(), ScalarMap::poly(Poly::linear(1, 1.0)), box2(2.0)),
        "ex-13-6-3-ii" | "ex-13-6-3-ii+" | "ex-13-6-3-ii-" => {
            let s = if name.ends_with('-') { -1.0 } else { 1.0 };
            let v = Poly::new([(s, [2, 0, 0]), (s, [0, 2, 0])]);
            ModelSpec::euclidean(name, 2, sym_gauge_2d(), ScalarMap::poly(v), box2(2.0))
        }
        "ex-13-6-3-iii" => {
            ModelSpec::euclidean(name, 2, sym_gauge_2d(), ScalarMap::poly(Poly::new([(1.0, [1, 1, 0])])), box2(2.0))
        }
        "ex-13-6-34-i" => {
            positive("k", k)?;
            let v = Poly::new([quad_x3(k), (l, [1, 0, 0])]);
            ModelSpec::euclidean(name, 3, sym_gauge_2d(), ScalarMap::poly(v), slab)
        }
        "ex-13-6-34-ii" | "ex-13-6-41" => {
            positive("k", k)?;
            let (l1, l2) = if name == "ex-13-6-41" {
                (l, l)
            } else {
                (p.l1.unwrap_or(1.0), p.l2.unwrap_or(1.0))
            };
            let v = Poly::new([quad_x3(k), (l1, [2, 0, 0]), (l2, [0, 2, 0])]);
            ModelSpec::euclidean(name, 3, sym_gauge_2d(), ScalarMap::poly(v), slab)
        }
        "ex-13-6-34-iv" => {
            positive("k", k)?;
            ModelSpec::euclidean(name, 3, sym_gauge_2d(), ScalarMap::poly(Poly::new([quad_x3(k)])), slab)
        }
        "ex-13-6-36" => {
            let alpha = RadialPoly::new(p.alpha.clone().unwrap_or_else(|| vec![0.0, 0.0, 0.5]));
            let w = RadialPoly::new(p.w.clone().unwrap_or_else(|| vec![0.0, 0.0, 1.0]));
            let vecpot = [ScalarMap::zero(), ScalarMap::zero(), ScalarMap::Radial(alpha.negated())];
            ModelSpec::euclidean(
                name,
                3,
                vecpot,
                ScalarMap::Radial(w),
                DomainBox::new([-2.0, -2.0, -2.0], [2.0, 2.0, 2.0]),
            )
        }
        "ex-13-7-12" => {
            let slope = p.slope.or(p.k).unwrap_or(0.0);
            let e3 = p.e3.unwrap_or(1.0);
            let vecpot = [ScalarMap::zero(), ScalarMap::poly(Poly::linear(0, 1.0)), ScalarMap::zero()];
            let mut m = ModelSpec::euclidean(
                name,
                3,
                vecpot,
                ScalarMap::poly(Poly::linear(2, e3)),
                DomainBox::new([-5.0; 3], [5.0; 3]),
            );
            for i in 0..3 {
                m.metric[i][i] = ScalarMap::constant(0.5);
            }
            m.boundary = Some(HalfSpace { slope });
            m
        }
        other => {
            return Err(Error::InvalidModel(format!(
                "unknown catalog model {other:?}; known: {}",
                NAMES.join(", ")
            )))
        }
    };
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_builds_and_validates() {
        for n in NAMES {
            let m = build(n, &CatalogParams::default()).unwrap();
            m.validate().unwrap();
        }
        assert!(build("ex-0", &CatalogParams::default()).is_err());
    }

    #[test]
    fn planar_catalog_field_is_unit() {
        for n in ["ex-13-6-3-i", "ex-13-6-3-iii", "ex-13-6-34-i"] {
            let m = build(n, &CatalogParams::default()).unwrap();
            assert_eq!(m.field_tensor(&[0.3, -0.2, 0.1])[0][1], 1.0);
            assert_eq!(m.scalar_intensity(&[0.3, -0.2, 0.1]), 1.0);
        }
    }

    #[test]
    fn half_space_model_field_is_vertical() {
        let m = build("ex-13-7-12", &CatalogParams { slope: Some(0.2), ..Default::default() }).unwrap();
        let v = m.field_vector_3d(&[0.1, 0.2, 0.3]);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 0.0);
        assert!(v[2] > 0.0);
        assert_eq!(m.boundary.unwrap().slope, 0.2);
    }
}
