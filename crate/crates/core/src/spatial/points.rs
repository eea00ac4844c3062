use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A planar location with optional covariate and response observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub x_cov: Option<f64>,
    pub y_resp: Option<f64>,
}

impl Point {
    pub fn new(id: usize, x: f64, y: f64) -> Self {
        Self {
            id,
            x,
            y,
            x_cov: None,
            y_resp: None,
        }
    }

    pub fn with_data(mut self, x_cov: f64, y_resp: f64) -> Self {
        self.x_cov = Some(x_cov);
        self.y_resp = Some(y_resp);
        self
    }
}

/// Euclidean distance. The single metric used for tree queries, pairing and
/// distance summaries.
#[inline]
pub fn euclidean(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let dx = ax - bx;
    let dy = ay - by;
    (dx * dx + dy * dy).sqrt()
}

/// Ordered set of points whose ids are exactly `0..n`, stored at index `id`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    points: Vec<Point>,
}

impl PointSet {
    /// Builds a point set from points given in any id order.
    pub fn new(mut points: Vec<Point>) -> Result<Self> {
        points.sort_by_key(|p| p.id);
        for (i, p) in points.iter().enumerate() {
            if p.id != i {
                return Err(Error::InvalidPoints(format!(
                    "ids must be unique and contiguous from 0; expected {i}, found {}",
                    p.id
                )));
            }
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::InvalidPoints(format!(
                    "non-finite coordinate at point {i}"
                )));
            }
        }
        Ok(Self { points })
    }

    /// Points with ids assigned by position.
    pub fn from_coords<I>(coords: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let points = coords
            .into_iter()
            .enumerate()
            .map(|(id, (x, y))| Point::new(id, x, y))
            .collect();
        Self::new(points)
    }

    /// Attaches covariate and response vectors (aligned by id).
    pub fn with_observations(mut self, x_cov: &[f64], y_resp: &[f64]) -> Result<Self> {
        if x_cov.len() != self.len() || y_resp.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "observation vectors must have length {}",
                self.len()
            )));
        }
        for (p, (&xc, &yr)) in self.points.iter_mut().zip(x_cov.iter().zip(y_resp)) {
            p.x_cov = Some(xc);
            p.y_resp = Some(yr);
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn get(&self, id: usize) -> Option<&Point> {
        self.points.get(id)
    }

    pub fn coords(&self, id: usize) -> (f64, f64) {
        let p = &self.points[id];
        (p.x, p.y)
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        euclidean(ax, ay, bx, by)
    }

    /// Covariate vector, if every point carries one.
    pub fn covariates(&self) -> Option<Vec<f64>> {
        self.points.iter().map(|p| p.x_cov).collect()
    }

    /// Response vector, if every point carries one.
    pub fn responses(&self) -> Option<Vec<f64>> {
        self.points.iter().map(|p| p.y_resp).collect()
    }

    /// Number of points whose coordinates repeat an earlier point's.
    pub fn duplicate_count(&self) -> usize {
        let mut keys: Vec<(u64, u64)> = self
            .points
            .iter()
            .map(|p| (canonical_bits(p.x), canonical_bits(p.y)))
            .collect();
        keys.sort_unstable();
        keys.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

// -0.0 and 0.0 are the same location.
fn canonical_bits(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}
