//! Greedy KD-tree coupling.
//!
//! Points are visited in a fixed order; each point that is still free takes
//! its nearest free neighbor inside the pairing radius. Every point belongs to
//! at most one couplet. Points left without an in-radius partner are reported
//! as unpaired and contribute nothing to estimation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spatial::{distance_summary, DistanceMode, DistanceSummary, KdTree, PointSet};

/// How the pairing radius is derived from the point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusSpec {
    Mean,
    Max,
    MeanPlusBuffer(f64),
    Fixed(f64),
}

impl RadiusSpec {
    /// Mean, Max and Mean+h for h in {50, 200, 350, 500, 650, 800}.
    pub fn buffer_sweep() -> Vec<RadiusSpec> {
        let mut specs = vec![RadiusSpec::Mean, RadiusSpec::Max];
        specs.extend(
            [50.0, 200.0, 350.0, 500.0, 650.0, 800.0]
                .into_iter()
                .map(RadiusSpec::MeanPlusBuffer),
        );
        specs
    }

    fn validate(&self) -> Result<()> {
        match *self {
            RadiusSpec::MeanPlusBuffer(h) if !(h >= 0.0 && h.is_finite()) => {
                Err(Error::InvalidRadius(h))
            }
            RadiusSpec::Fixed(v) if !(v > 0.0 && v.is_finite()) => Err(Error::InvalidRadius(v)),
            _ => Ok(()),
        }
    }

    /// Whether resolving this spec needs the global distance summary.
    pub fn needs_summary(&self) -> bool {
        !matches!(self, RadiusSpec::Fixed(_))
    }
}

impl fmt::Display for RadiusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadiusSpec::Mean => f.write_str("mean"),
            RadiusSpec::Max => f.write_str("max"),
            RadiusSpec::MeanPlusBuffer(h) => write!(f, "mean+{h}"),
            RadiusSpec::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for RadiusSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || {
            Error::Parse(format!(
                "invalid radius '{s}': expected mean, max, mean+H or a positive number"
            ))
        };
        let spec = match s.to_ascii_lowercase().as_str() {
            "mean" => RadiusSpec::Mean,
            "max" => RadiusSpec::Max,
            other => {
                if let Some(h) = other.strip_prefix("mean+") {
                    RadiusSpec::MeanPlusBuffer(h.parse().map_err(|_| bad())?)
                } else {
                    RadiusSpec::Fixed(other.parse().map_err(|_| bad())?)
                }
            }
        };
        spec.validate().map_err(|_| bad())?;
        Ok(spec)
    }
}

impl Serialize for RadiusSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RadiusSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Turns a spec into a concrete radius given the point set's distance summary.
pub fn resolve_radius_with(summary: &DistanceSummary, spec: RadiusSpec) -> Result<f64> {
    spec.validate()?;
    let r = match spec {
        RadiusSpec::Mean => summary.r_mean,
        RadiusSpec::Max => summary.r_max,
        RadiusSpec::MeanPlusBuffer(h) => summary.r_mean + h,
        RadiusSpec::Fixed(v) => v,
    };
    if r > 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(Error::InvalidRadius(r))
    }
}

/// Resolves `spec` on `points`, computing the distance summary with
/// [`DistanceMode::auto`] when the spec needs one.
pub fn resolve_radius(points: &PointSet, spec: RadiusSpec) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints {
            required: 2,
            got: points.len(),
        });
    }
    if let RadiusSpec::Fixed(_) = spec {
        let dummy = DistanceSummary {
            r_mean: 0.0,
            r_max: 0.0,
            exact: true,
        };
        return resolve_radius_with(&dummy, spec);
    }
    let summary = distance_summary(points, DistanceMode::auto(points.len()))?;
    resolve_radius_with(&summary, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplet {
    pub i: usize,
    pub l: usize,
    pub dist: f64,
}

/// Order in which the greedy scan visits points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanOrder {
    #[default]
    Ascending,
    /// A seeded random permutation of the ids.
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairingOptions {
    pub order: ScanOrder,
    /// Drop couplets with a member within this distance of an earlier kept
    /// couplet's members.
    pub min_separation: Option<f64>,
}

/// Disjoint couplets produced by the greedy scan.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupletSet {
    n: usize,
    couplets: Vec<Couplet>,
    partner: Vec<Option<usize>>,
    unpaired: Vec<usize>,
    distances: BTreeMap<(usize, usize), f64>,
}

impl CoupletSet {
    /// Assembles and validates a couplet set over `n` points.
    pub fn from_couplets(n: usize, couplets: Vec<Couplet>) -> Result<Self> {
        let mut partner = vec![None; n];
        let mut distances = BTreeMap::new();
        for c in &couplets {
            if c.i == c.l {
                return Err(Error::InvalidArgument(format!(
                    "couplet pairs {} with itself",
                    c.i
                )));
            }
            for idx in [c.i, c.l] {
                if idx >= n {
                    return Err(Error::IndexError { index: idx, n });
                }
                if partner[idx].is_some() {
                    return Err(Error::InvalidArgument(format!(
                        "point {idx} appears in two couplets"
                    )));
                }
            }
            if !(c.dist >= 0.0 && c.dist.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "couplet ({}, {}) has invalid distance {}",
                    c.i, c.l, c.dist
                )));
            }
            partner[c.i] = Some(c.l);
            partner[c.l] = Some(c.i);
            distances.insert((c.i.min(c.l), c.i.max(c.l)), c.dist);
        }
        let unpaired = (0..n).filter(|&i| partner[i].is_none()).collect();
        Ok(Self {
            n,
            couplets,
            partner,
            unpaired,
            distances,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.couplets.len()
    }

    pub fn couplets(&self) -> &[Couplet] {
        &self.couplets
    }

    pub fn unpaired(&self) -> &[usize] {
        &self.unpaired
    }

    pub fn is_paired(&self, index: usize) -> bool {
        self.partner.get(index).is_some_and(|p| p.is_some())
    }

    pub fn partner(&self, index: usize) -> Option<usize> {
        self.partner.get(index).copied().flatten()
    }

    pub fn paired(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.is_paired(i))
    }

    /// Written entry `D[a, b]` of the sparse distance record.
    pub fn distance(&self, a: usize, b: usize) -> Option<f64> {
        self.distances.get(&(a.min(b), a.max(b))).copied()
    }

    /// Number of stored (symmetric) distance entries; equals `q`.
    pub fn distance_entries(&self) -> usize {
        self.distances.len()
    }
}

/// Greedy pairing in ascending id order.
pub fn pair_points(points: &PointSet, radius: f64) -> Result<CoupletSet> {
    pair_points_with(points, radius, &PairingOptions::default())
}

pub fn pair_points_with(
    points: &PointSet,
    radius: f64,
    opts: &PairingOptions,
) -> Result<CoupletSet> {
    let set = pair_quietly(points, radius, opts)?;
    if !set.unpaired.is_empty() {
        log::warn!(
            "{} of {} points have no free partner within radius {radius} and are dropped",
            set.unpaired.len(),
            points.len()
        );
    }
    Ok(set)
}

/// As [`pair_points_with`] without the unpaired-points warning.
pub(crate) fn pair_quietly(
    points: &PointSet,
    radius: f64,
    opts: &PairingOptions,
) -> Result<CoupletSet> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientPoints {
            required: 2,
            got: n,
        });
    }
    if !(radius > 0.0) || radius.is_nan() {
        return Err(Error::InvalidRadius(radius));
    }
    let tree = KdTree::build(points)?;
    let order: Vec<usize> = match opts.order {
        ScanOrder::Ascending => (0..n).collect(),
        ScanOrder::Shuffled(seed) => {
            let mut ids: Vec<usize> = (0..n).collect();
            ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            ids
        }
    };

    let mut avail = tree.availability();
    let mut couplets = Vec::with_capacity(n / 2);
    for p in order {
        if !avail.is_free(p) {
            continue;
        }
        // Anything within reach of an unpairable point is already taken, so
        // dropping p first loses nothing.
        avail.remove(p);
        if let Some(nb) = avail.nearest(p, radius)? {
            avail.remove(nb.index);
            couplets.push(Couplet {
                i: p,
                l: nb.index,
                dist: nb.distance,
            });
        }
    }

    if let Some(sep) = opts.min_separation {
        couplets = separate(&tree, couplets, sep, n)?;
    }
    CoupletSet::from_couplets(n, couplets)
}

fn separate(tree: &KdTree, couplets: Vec<Couplet>, sep: f64, n: usize) -> Result<Vec<Couplet>> {
    if !(sep >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "minimum separation {sep} must be nonnegative"
        )));
    }
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut kept = Vec::with_capacity(couplets.len());
    for (ci, c) in couplets.into_iter().enumerate() {
        let mut clash = false;
        'members: for m in [c.i, c.l] {
            for nb in tree.within_radius(m, sep)? {
                if owner[nb.index].is_some_and(|o| o != ci) {
                    clash = true;
                    break 'members;
                }
            }
        }
        if !clash {
            owner[c.i] = Some(ci);
            owner[c.l] = Some(ci);
            kept.push(c);
        }
    }
    Ok(kept)
}

/// Summary statistics of a pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub q: usize,
    pub n: usize,
    pub rate: f64,
    pub mean_dist: Option<f64>,
    pub max_dist: Option<f64>,
}

pub fn pairing_report(cs: &CoupletSet, n: usize) -> PairingReport {
    let q = cs.q();
    let rate = if n == 0 {
        0.0
    } else {
        2.0 * q as f64 / n as f64
    };
    let (mean_dist, max_dist) = if q == 0 {
        (None, None)
    } else {
        let sum: f64 = cs.couplets.iter().map(|c| c.dist).sum();
        let max = cs.couplets.iter().map(|c| c.dist).fold(0.0, f64::max);
        (Some(sum / q as f64), Some(max))
    };
    PairingReport {
        q,
        n,
        rate,
        mean_dist,
        max_dist,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::from_coords(xs.iter().map(|&x| (x, 0.0))).unwrap()
    }

    #[test]
    fn radius_grammar() {
        assert_eq!("mean".parse::<RadiusSpec>().unwrap(), RadiusSpec::Mean);
        assert_eq!("MAX".parse::<RadiusSpec>().unwrap(), RadiusSpec::Max);
        assert_eq!(
            "mean+200".parse::<RadiusSpec>().unwrap(),
            RadiusSpec::MeanPlusBuffer(200.0)
        );
        assert_eq!(
            "12.5".parse::<RadiusSpec>().unwrap(),
            RadiusSpec::Fixed(12.5)
        );
        for bad in ["", "min", "mean+", "mean+-1", "0", "-3", "nan", "mean+inf"] {
            assert!(bad.parse::<RadiusSpec>().is_err(), "{bad}");
        }
        for spec in RadiusSpec::buffer_sweep() {
            assert_eq!(spec.to_string().parse::<RadiusSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn resolve_examples() {
        let s = DistanceSummary {
            r_mean: 2.0,
            r_max: 3.0,
            exact: true,
        };
        assert_eq!(resolve_radius_with(&s, RadiusSpec::Mean).unwrap(), 2.0);
        let s612 = DistanceSummary {
            r_mean: 612.4,
            r_max: 1300.0,
            exact: true,
        };
        assert!(
            (resolve_radius_with(&s612, RadiusSpec::MeanPlusBuffer(200.0)).unwrap() - 812.4).abs()
                < 1e-12
        );
        assert_eq!(
            resolve_radius(&line(&[0.0, 1.0, 3.0]), RadiusSpec::Max).unwrap(),
            3.0
        );
        assert_eq!(
            resolve_radius(&line(&[0.0, 1.0, 3.0]), RadiusSpec::Fixed(0.5)).unwrap(),
            0.5
        );
    }

    #[test]
    fn nonpositive_radius_is_rejected() {
        let dup = line(&[1.0, 1.0]);
        assert_eq!(
            resolve_radius(&dup, RadiusSpec::Mean).unwrap_err(),
            Error::InvalidRadius(0.0)
        );
        assert!(resolve_radius_with(
            &DistanceSummary {
                r_mean: 1.0,
                r_max: 1.0,
                exact: true
            },
            RadiusSpec::Fixed(-1.0)
        )
        .is_err());
        assert!(pair_points(&line(&[0.0, 1.0]), 0.0).is_err());
        assert!(matches!(
            pair_points(&line(&[0.0]), 1.0).unwrap_err(),
            Error::InsufficientPoints { .. }
        ));
    }

    #[test]
    fn two_points_in_and_out_of_radius() {
        let cs = pair_points(&line(&[0.0, 1.0]), 1.5).unwrap();
        assert_eq!(cs.q(), 1);
        assert!(cs.unpaired().is_empty());
        assert_eq!(cs.distance(1, 0), Some(1.0));

        let cs = pair_points(&line(&[0.0, 10.0]), 2.0).unwrap();
        assert_eq!(cs.q(), 0);
        assert_eq!(cs.unpaired(), &[0, 1]);
    }

    #[test]
    fn six_collinear_points() {
        let cs = pair_points(&line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]), 1.5).unwrap();
        let pairs: Vec<(usize, usize)> = cs.couplets().iter().map(|c| (c.i, c.l)).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3), (4, 5)]);
        assert_eq!(cs.distance_entries(), 3);
        let rep = pairing_report(&cs, 6);
        assert_eq!(rep.q, 3);
        assert_eq!(rep.rate, 1.0);
        assert_eq!(rep.mean_dist, Some(1.0));
        assert_eq!(rep.max_dist, Some(1.0));
    }

    #[test]
    fn isolated_point_stays_unpaired() {
        let cs = pair_points(&line(&[0.0, 1.0, 10.0]), 2.0).unwrap();
        assert_eq!(
            cs.couplets(),
            &[Couplet {
                i: 0,
                l: 1,
                dist: 1.0
            }]
        );
        assert_eq!(cs.unpaired(), &[2]);
        assert!(!cs.is_paired(2));
        assert_eq!(cs.partner(1), Some(0));
    }

    #[test]
    fn widening_finds_far_free_partner() {
        // Point 4 sees 0..3 first, all taken by then.
        let cs = pair_points(&line(&[0.0, 0.1, 0.2, 0.3, 5.0, 10.0]), 10.0).unwrap();
        let pairs: Vec<(usize, usize)> = cs.couplets().iter().map(|c| (c.i, c.l)).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3), (4, 5)]);
    }

    #[test]
    fn empty_report_has_no_distances() {
        let cs = pair_points(&line(&[0.0, 10.0]), 2.0).unwrap();
        let rep = pairing_report(&cs, 2);
        assert_eq!(rep.rate, 0.0);
        assert_eq!(rep.mean_dist, None);
        assert_eq!(rep.max_dist, None);
    }

    #[test]
    fn separation_filter_drops_crowded_couplets() {
        let pts = line(&[0.0, 1.0, 2.0, 3.0, 10.0, 11.0]);
        let opts = PairingOptions {
            min_separation: Some(1.5),
            ..Default::default()
        };
        let cs = pair_points_with(&pts, 1.5, &opts).unwrap();
        let pairs: Vec<(usize, usize)> = cs.couplets().iter().map(|c| (c.i, c.l)).collect();
        assert_eq!(pairs, vec![(0, 1), (4, 5)]);
        assert_eq!(cs.unpaired(), &[2, 3]);
    }

    #[test]
    fn shuffled_order_is_seeded() {
        let pts = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.5, 7.0]);
        let opts = PairingOptions {
            order: ScanOrder::Shuffled(4),
            ..Default::default()
        };
        let a = pair_points_with(&pts, 1.5, &opts).unwrap();
        let b = pair_points_with(&pts, 1.5, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_couplet_sets_are_rejected() {
        let c = |i, l| Couplet { i, l, dist: 1.0 };
        assert!(CoupletSet::from_couplets(3, vec![c(0, 1), c(1, 2)]).is_err());
        assert!(CoupletSet::from_couplets(3, vec![c(0, 0)]).is_err());
        assert!(CoupletSet::from_couplets(3, vec![c(0, 3)]).is_err());
    }
}
