//! Cone-punctured metric spaces `(S, d, C)` with scalar multiplication.
//!
//! Three kinds are supported:
//!
//! - `euclidean-origin`: `S = R^d`, `C = {0}`, cone distance is the norm.
//! - `euclidean-axes`: `S = R^d` (d >= 2), `C` is the union of the coordinate
//!   hyperplanes, cone distance is `min_i |x_i|`.
//! - `product-time`: `[0, inf) x S` over one of the above, with cone
//!   `[0, inf) x C`. Points carry the time coordinate first.
//!
//! Scalar multiplication acts on the `S` coordinate only; the time
//! coordinate of a product point is left unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cone {
    Origin,
    Axes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    EuclideanOrigin,
    EuclideanAxes,
    ProductTime,
}

/// A supported space. `dim` is always the dimension of the `S` factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SpaceJson", into = "SpaceJson")]
pub struct SpaceDescriptor {
    cone: Cone,
    dim: usize,
    time: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceJson {
    kind: String,
    dim: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    time: bool,
}

impl TryFrom<SpaceJson> for SpaceDescriptor {
    type Error = Error;

    fn try_from(j: SpaceJson) -> Result<Self> {
        let base = match j.kind.as_str() {
            "euclidean-origin" => SpaceDescriptor::euclidean_origin(j.dim)?,
            "euclidean-axes" => SpaceDescriptor::euclidean_axes(j.dim)?,
            other => return Err(invalid(format!("unknown space kind {other:?}"))),
        };
        if j.time {
            base.make_product_space()
        } else {
            Ok(base)
        }
    }
}

impl From<SpaceDescriptor> for SpaceJson {
    fn from(s: SpaceDescriptor) -> Self {
        let kind = match s.cone {
            Cone::Origin => "euclidean-origin",
            Cone::Axes => "euclidean-axes",
        };
        SpaceJson {
            kind: kind.to_string(),
            dim: s.dim,
            time: s.time,
        }
    }
}

/// A point of a space. For product-time spaces the time value comes first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl SpaceDescriptor {
    pub fn euclidean_origin(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Ok(SpaceDescriptor {
            cone: Cone::Origin,
            dim,
            time: false,
        })
    }

    pub fn euclidean_axes(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(invalid("euclidean-axes needs dim >= 2"));
        }
        Ok(SpaceDescriptor {
            cone: Cone::Axes,
            dim,
            time: false,
        })
    }

    /// `[0, inf) x self`. Nesting a product inside a product is refused.
    pub fn make_product_space(&self) -> Result<Self> {
        if self.time {
            return Err(Error::Unsupported(
                "product-time over a product-time space".into(),
            ));
        }
        Ok(SpaceDescriptor { time: true, ..*self })
    }

    pub fn kind(&self) -> SpaceKind {
        match (self.time, self.cone) {
            (true, _) => SpaceKind::ProductTime,
            (false, Cone::Origin) => SpaceKind::EuclideanOrigin,
            (false, Cone::Axes) => SpaceKind::EuclideanAxes,
        }
    }

    pub fn cone(&self) -> Cone {
        self.cone
    }

    /// Dimension of the `S` factor.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_time(&self) -> bool {
        self.time
    }

    /// The `S` factor (identity for non-product spaces).
    pub fn base(&self) -> SpaceDescriptor {
        SpaceDescriptor { time: false, ..*self }
    }

    /// Number of stored coordinates per point.
    pub fn point_len(&self) -> usize {
        self.dim + usize::from(self.time)
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        let c = x.coords();
        if c.len() != self.point_len() {
            return Err(Error::DimensionMismatch {
                expected: self.point_len(),
                got: c.len(),
            });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(invalid("point has non-finite coordinates"));
        }
        if self.time && c[0] < 0.0 {
            return Err(invalid("time coordinate must be nonnegative"));
        }
        Ok(())
    }

    /// Split stored coordinates into `(time, S-coordinates)`.
    pub fn split<'a>(&self, coords: &'a [f64]) -> (Option<f64>, &'a [f64]) {
        if self.time {
            (Some(coords[0]), &coords[1..])
        } else {
            (None, coords)
        }
    }

    /// Cone distance of raw coordinates, assumed well-formed.
    pub fn cone_distance_raw(&self, coords: &[f64]) -> f64 {
        let (_, s) = self.split(coords);
        match self.cone {
            Cone::Origin => norm(s),
            Cone::Axes => s.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())),
        }
    }

    /// `d(x, C)`.
    pub fn cone_distance(&self, x: &Point) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.cone_distance_raw(x.coords()))
    }

    /// Scalar multiplication `(lambda, x) -> lambda x`.
    pub fn scale(&self, lambda: f64, x: &Point) -> Result<Point> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(invalid(format!("scale factor must be finite and >= 0, got {lambda}")));
        }
        self.check_point(x)?;
        Ok(Point(self.scale_raw(lambda, x.coords())))
    }

    pub(crate) fn scale_raw(&self, lambda: f64, coords: &[f64]) -> Vec<f64> {
        let skip = usize::from(self.time);
        coords
            .iter()
            .enumerate()
            .map(|(i, &v)| if i < skip { v } else { lambda * v })
            .collect()
    }

    /// Metric `d`. Product spaces combine the time and `S` distances as
    /// `sqrt(d_t^2 + d_S^2)`.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.distance_raw(x.coords(), y.coords()))
    }

    pub(crate) fn distance_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        let (tx, sx) = self.split(x);
        let (ty, sy) = self.split(y);
        let ds = sx
            .iter()
            .zip(sy)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        match (tx, ty) {
            (Some(a), Some(b)) => (a - b).hypot(ds),
            _ => ds,
        }
    }

    /// Direction `x / d(x, C)` of the `S` part; `None` for points in `C`.
    pub(crate) fn direction_raw(&self, coords: &[f64]) -> Option<Vec<f64>> {
        let r = self.cone_distance_raw(coords);
        if r <= 0.0 {
            return None;
        }
        let (_, s) = self.split(coords);
        Some(s.iter().map(|v| v / r).collect())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}
