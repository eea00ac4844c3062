use serde::{Deserialize, Serialize};

use crate::coupling::CoupletSet;
use crate::error::{Error, Result};
use crate::spatial::PointSet;

/// Covariate and response at both members of every couplet, aligned with
/// couplet order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PairedSample {
    pub x_i: Vec<f64>,
    pub y_i: Vec<f64>,
    pub x_l: Vec<f64>,
    pub y_l: Vec<f64>,
}

impl PairedSample {
    pub fn new(x_i: Vec<f64>, y_i: Vec<f64>, x_l: Vec<f64>, y_l: Vec<f64>) -> Result<Self> {
        let q = x_i.len();
        if y_i.len() != q || x_l.len() != q || y_l.len() != q {
            return Err(Error::InvalidArgument(
                "paired arrays must share one length".into(),
            ));
        }
        if [&x_i, &y_i, &x_l, &y_l]
            .iter()
            .any(|v| v.iter().any(|a| !a.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "paired sample holds non-finite values".into(),
            ));
        }
        Ok(Self { x_i, y_i, x_l, y_l })
    }

    pub fn q(&self) -> usize {
        self.x_i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_i.is_empty()
    }

    /// Residual pairs `(y_i - beta x_i, y_l - beta x_l)`.
    pub fn residuals(&self, beta: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.q()).map(move |k| {
            (
                self.y_i[k] - beta * self.x_i[k],
                self.y_l[k] - beta * self.x_l[k],
            )
        })
    }
}

/// Gathers the observations of every coupled point; unpaired points are skipped.
pub fn extract_paired_sample(points: &PointSet, cs: &CoupletSet) -> Result<PairedSample> {
    if cs.n() != points.len() {
        return Err(Error::InvalidArgument(format!(
            "couplet set covers {} points but the point set has {}",
            cs.n(),
            points.len()
        )));
    }
    let obs = |idx: usize| -> Result<(f64, f64)> {
        let p = points.get(idx).ok_or(Error::IndexError {
            index: idx,
            n: points.len(),
        })?;
        match (p.x_cov, p.y_resp) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(Error::MissingData(idx)),
        }
    };
    let q = cs.q();
    let mut s = PairedSample {
        x_i: Vec::with_capacity(q),
        y_i: Vec::with_capacity(q),
        x_l: Vec::with_capacity(q),
        y_l: Vec::with_capacity(q),
    };
    for c in cs.couplets() {
        let (xi, yi) = obs(c.i)?;
        let (xl, yl) = obs(c.l)?;
        s.x_i.push(xi);
        s.y_i.push(yi);
        s.x_l.push(xl);
        s.y_l.push(yl);
    }
    PairedSample::new(s.x_i, s.y_i, s.x_l, s.y_l)
}

/// The six sums that carry all the information the pairwise likelihood uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    /// Sum of squared covariates over both members.
    pub a1: f64,
    /// Sum of squared responses over both members.
    pub a2: f64,
    /// Sum of covariate-response products within each member.
    pub a3: f64,
    /// Cross products `x_i y_l + x_l y_i`.
    pub a4: f64,
    /// Cross products `x_i x_l`.
    pub a5: f64,
    /// Cross products `y_i y_l`.
    pub a6: f64,
    pub q: usize,
}

impl SufficientStats {
    /// `(sum of e_i^2 + e_l^2, sum of e_i e_l)` for residuals at `beta`.
    pub fn residual_sums(&self, beta: f64) -> (f64, f64) {
        let sum_sq = self.a2 - 2.0 * beta * self.a3 + beta * beta * self.a1;
        let cross = self.a6 - beta * self.a4 + beta * beta * self.a5;
        (sum_sq, cross)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.a1, self.a2, self.a3, self.a4, self.a5, self.a6]
    }
}

pub fn sufficient_statistics(s: &PairedSample) -> Result<SufficientStats> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut st = SufficientStats {
        a1: 0.0,
        a2: 0.0,
        a3: 0.0,
        a4: 0.0,
        a5: 0.0,
        a6: 0.0,
        q: s.q(),
    };
    for k in 0..s.q() {
        let (xi, yi, xl, yl) = (s.x_i[k], s.y_i[k], s.x_l[k], s.y_l[k]);
        st.a1 += xi * xi + xl * xl;
        st.a2 += yi * yi + yl * yl;
        st.a3 += xi * yi + xl * yl;
        st.a4 += xi * yl + xl * yi;
        st.a5 += xi * xl;
        st.a6 += yi * yl;
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{Couplet, CoupletSet};

    #[test]
    fn hand_summed_statistics() {
        let s = PairedSample::new(vec![1.0], vec![2.0], vec![3.0], vec![4.0]).unwrap();
        let st = sufficient_statistics(&s).unwrap();
        assert_eq!(st.as_array(), [10.0, 20.0, 14.0, 10.0, 3.0, 8.0]);
        assert_eq!(st.q, 1);

        let s = PairedSample::new(vec![0.0; 3], vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]).unwrap();
        assert_eq!(sufficient_statistics(&s).unwrap().as_array(), [0.0; 6]);

        let s = PairedSample::new(vec![1.0; 2], vec![1.0; 2], vec![1.0; 2], vec![1.0; 2]).unwrap();
        assert_eq!(
            sufficient_statistics(&s).unwrap().as_array(),
            [4.0, 4.0, 4.0, 4.0, 2.0, 2.0]
        );
    }

    #[test]
    fn empty_sample() {
        assert_eq!(
            sufficient_statistics(&PairedSample::default()).unwrap_err(),
            Error::EmptySample
        );
    }

    #[test]
    fn extraction_follows_couplet_order() {
        let pts = PointSet::from_coords([(0.0, 0.0), (1.0, 0.0), (9.0, 9.0)])
            .unwrap()
            .with_observations(&[1.0, 3.0, 5.0], &[2.0, 4.0, 6.0])
            .unwrap();
        let cs = CoupletSet::from_couplets(
            3,
            vec![Couplet {
                i: 0,
                l: 1,
                dist: 1.0,
            }],
        )
        .unwrap();
        let s = extract_paired_sample(&pts, &cs).unwrap();
        assert_eq!(s.x_i, vec![1.0]);
        assert_eq!(s.y_i, vec![2.0]);
        assert_eq!(s.x_l, vec![3.0]);
        assert_eq!(s.y_l, vec![4.0]);

        let none = CoupletSet::from_couplets(3, vec![]).unwrap();
        assert!(extract_paired_sample(&pts, &none).unwrap().is_empty());
    }

    #[test]
    fn missing_observations() {
        let pts = PointSet::from_coords([(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let cs = CoupletSet::from_couplets(
            2,
            vec![Couplet {
                i: 1,
                l: 0,
                dist: 1.0,
            }],
        )
        .unwrap();
        assert_eq!(
            extract_paired_sample(&pts, &cs).unwrap_err(),
            Error::MissingData(1)
        );
    }

    #[test]
    fn ragged_arrays_rejected() {
        assert!(PairedSample::new(vec![1.0], vec![], vec![1.0], vec![1.0]).is_err());
        assert!(PairedSample::new(vec![f64::NAN], vec![1.0], vec![1.0], vec![1.0]).is_err());
    }
}
