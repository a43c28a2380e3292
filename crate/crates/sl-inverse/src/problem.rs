use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;

/// Boundary coefficient at x = 1. `Infinity` encodes the Dirichlet condition
/// y(1) = 0 used by the problem with index i = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryH {
    Value(Complex64),
    Infinity,
}

impl BoundaryH {
    pub fn value(&self) -> Result<Complex64> {
        match self {
            BoundaryH::Value(v) => Ok(*v),
            BoundaryH::Infinity => Err(Error::InvalidInput(
                "H = infinity: the i = 1 boundary condition is not available".into(),
            )),
        }
    }
}

/// Full data of the boundary-value problems B_0 and B_1: discontinuity
/// position `a`, potentials on the two subintervals (q2 is the outer
/// potential reflected to `[0, 1-a]`), boundary constants and jump
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub a: f64,
    pub q1: ComplexGrid,
    pub q2: ComplexGrid,
    pub h: Complex64,
    pub big_h: BoundaryH,
    pub a1: f64,
    pub a2: Complex64,
}

impl ProblemSpec {
    pub fn new(
        a: f64,
        q1: ComplexGrid,
        q2: ComplexGrid,
        h: Complex64,
        big_h: BoundaryH,
        a1: f64,
        a2: Complex64,
    ) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidInput(format!(
                "discontinuity position a must lie in (0,1), got {a}"
            )));
        }
        if !(a1 > 0.0) || !a1.is_finite() {
            return Err(Error::InvalidInput(format!("a1 must be positive, got {a1}")));
        }
        if (q1.interval_length - a).abs() > 1e-12 * (1.0 + a) {
            return Err(Error::InvalidInput(format!(
                "q1 must live on [0, a]: interval length {} vs a = {a}",
                q1.interval_length
            )));
        }
        if (q2.interval_length - (1.0 - a)).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "q2 must live on [0, 1-a]: interval length {} vs 1-a = {}",
                q2.interval_length,
                1.0 - a
            )));
        }
        Ok(Self {
            a,
            q1,
            q2,
            h,
            big_h,
            a1,
            a2,
        })
    }

    /// Zero potentials, h = H = 0, a1 = 1, a2 = 0 at discontinuity `a`.
    pub fn zero_model(a: f64) -> Self {
        Self::new(
            a,
            ComplexGrid::zeros(a, 8),
            ComplexGrid::zeros(1.0 - a, 8),
            Complex64::ZERO,
            BoundaryH::Value(Complex64::ZERO),
            1.0,
            Complex64::ZERO,
        )
        .unwrap()
    }

    pub fn d1(&self) -> f64 {
        self.a
    }

    pub fn d2(&self) -> f64 {
        1.0 - self.a
    }

    /// omega_1 = h + (1/2) int_0^a q1.
    pub fn omega1(&self) -> Complex64 {
        self.h + 0.5 * self.q1.integral()
    }

    /// omega_0 = (1/2) int_0^{d2} q2.
    pub fn omega0(&self) -> Complex64 {
        0.5 * self.q2.integral()
    }

    /// omega_2 = H + (1/2) int_0^{d2} q2.
    pub fn omega2(&self) -> Result<Complex64> {
        Ok(self.big_h.value()? + self.omega0())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SpecJson = serde_json::from_str(text)?;
        raw.into_spec()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SpecJson::from_spec(self)).unwrap()
    }
}

pub(crate) fn pairs_to_complex(pairs: &[[f64; 2]]) -> Vec<Complex64> {
    pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

pub(crate) fn complex_to_pairs(values: &[Complex64]) -> Vec<[f64; 2]> {
    values.iter().map(|v| [v.re, v.im]).collect()
}

#[derive(Serialize, Deserialize)]
struct SpecJson {
    a: f64,
    q1: Vec<[f64; 2]>,
    q2: Vec<[f64; 2]>,
    h: [f64; 2],
    #[serde(rename = "H")]
    big_h: HJson,
    a1: f64,
    a2: [f64; 2],
}

impl SpecJson {
    fn into_spec(self) -> Result<ProblemSpec> {
        ProblemSpec::new(
            self.a,
            ComplexGrid::new(self.a, pairs_to_complex(&self.q1))?,
            ComplexGrid::new(1.0 - self.a, pairs_to_complex(&self.q2))?,
            Complex64::new(self.h[0], self.h[1]),
            match self.big_h {
                HJson::Value(p) => BoundaryH::Value(Complex64::new(p[0], p[1])),
                HJson::Infinity(_) => BoundaryH::Infinity,
            },
            self.a1,
            Complex64::new(self.a2[0], self.a2[1]),
        )
    }

    fn from_spec(spec: &ProblemSpec) -> Self {
        Self {
            a: spec.a,
            q1: complex_to_pairs(&spec.q1.values),
            q2: complex_to_pairs(&spec.q2.values),
            h: [spec.h.re, spec.h.im],
            big_h: match spec.big_h {
                BoundaryH::Value(v) => HJson::Value([v.re, v.im]),
                BoundaryH::Infinity => HJson::Infinity("infinity".into()),
            },
            a1: spec.a1,
            a2: [spec.a2.re, spec.a2.im],
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum HJson {
    Value([f64; 2]),
    Infinity(String),
}

/// Serialize a single complex scalar as a `[re, im]` pair.
pub mod cpx_pair {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
        [v.re, v.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Complex64, D::Error> {
        let p = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(p[0], p[1]))
    }
}

/// Serialize a grid's values as `[[re, im], ...]`; the interval length is
/// carried separately by the surrounding record.
pub mod grid_pairs {
    use super::*;

    pub fn serialize<S: Serializer>(
        g: &ComplexGrid,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        complex_to_pairs(&g.values).serialize(s)
    }

    pub struct GridPairs(pub Vec<Complex64>);

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<GridPairs, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        if pairs.len() < 2 {
            return Err(D::Error::custom("grid needs at least 2 samples"));
        }
        Ok(GridPairs(pairs_to_complex(&pairs)))
    }
}
