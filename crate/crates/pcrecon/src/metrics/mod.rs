//! Reconstruction quality metrics: Chamfer distance, F-score and the
//! two-track leaderboard score, plus the exact nearest-neighbor index they
//! are built on.
//!
//! Chamfer distance between clouds `S` and `T` is the sum of two directed
//! terms, each aggregating the per-point nearest-neighbor distances:
//!
//! ```text
//! CD(S, T) = agg_{x in S} min_{y in T} d(x, y)  +  agg_{y in T} min_{x in S} d(x, y)
//! ```
//!
//! with `d` either the Euclidean distance or its square and `agg` either the
//! mean or the max. All CD values here are in raw model units; reports that
//! imitate leaderboard tables multiply by 100 at the printing stage only.

mod kdtree;

pub use kdtree::{nn_brute_force, Neighbor, NnIndex};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use serde::{Deserialize, Serialize};

/// Distance flavor for the Chamfer terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChamferMode {
    L2,
    SquaredL2,
}

/// How per-point nearest distances are combined within one direction.
///
/// `Mean` is the usual Chamfer distance; `Max` penalizes the single worst
/// point and upper-bounds the mean on every input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Max,
}

/// Leaderboard track. The tracks differ only in how CD and F-score are
/// weighted against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    A,
    B,
}

/// Nearest-neighbor assignments in both directions between two point sets.
///
/// `fwd[i]` is the nearest `t` point to `s[i]`; `bwd[j]` the nearest `s`
/// point to `t[j]`. This is the single source the Chamfer value, the
/// F-score counts and the training gradient are all derived from, so the
/// three can never disagree about who is whose neighbor.
#[derive(Debug, Clone)]
pub(crate) struct Assignments {
    pub fwd: Vec<Neighbor>,
    pub bwd: Vec<Neighbor>,
}

pub(crate) fn nearest_assignments(s: &[Point3], t: &[Point3]) -> Assignments {
    // Index the larger side once; query sides independently. Both indexes
    // answer exactly, so nothing here depends on tree layout.
    let t_index = NnIndex::from_points(t.to_vec());
    let s_index = NnIndex::from_points(s.to_vec());
    Assignments {
        fwd: s.iter().map(|p| t_index.nearest(p)).collect(),
        bwd: t.iter().map(|p| s_index.nearest(p)).collect(),
    }
}

/// Aggregates one direction's squared distances. Summation runs in point
/// order so results are reproducible bit for bit.
pub(crate) fn aggregate_direction(
    neighbors: &[Neighbor],
    mode: ChamferMode,
    agg: Aggregation,
) -> f64 {
    let term = |n: &Neighbor| match mode {
        ChamferMode::L2 => n.dist(),
        ChamferMode::SquaredL2 => n.dist2,
    };
    match agg {
        Aggregation::Mean => {
            neighbors.iter().map(term).sum::<f64>() / neighbors.len() as f64
        }
        Aggregation::Max => neighbors.iter().map(term).fold(f64::NEG_INFINITY, f64::max),
    }
}

pub(crate) fn chamfer_from_assignments(
    asg: &Assignments,
    mode: ChamferMode,
    agg: Aggregation,
) -> f64 {
    aggregate_direction(&asg.fwd, mode, agg) + aggregate_direction(&asg.bwd, mode, agg)
}

/// Chamfer distance between two clouds (see module docs for the formula).
pub fn chamfer(s: &PointCloud, t: &PointCloud, mode: ChamferMode, agg: Aggregation) -> f64 {
    let asg = nearest_assignments(s.points(), t.points());
    chamfer_from_assignments(&asg, mode, agg)
}

/// Precision / recall / F-score, all in percent.
///
/// Precision is the share of `pred` points with a `gt` point within `tau`
/// (inclusive); recall is the share of `gt` points with a `pred` point
/// within `tau`; F is their harmonic mean, defined as 0 when both vanish.
pub fn fscore(pred: &PointCloud, gt: &PointCloud, tau: f64) -> Result<(f64, f64, f64)> {
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTau { tau });
    }
    let asg = nearest_assignments(pred.points(), gt.points());
    Ok(fscore_from_assignments(&asg, tau))
}

fn fscore_from_assignments(asg: &Assignments, tau: f64) -> (f64, f64, f64) {
    let within = |ns: &[Neighbor]| ns.iter().filter(|n| n.dist() <= tau).count();
    let precision = 100.0 * within(&asg.fwd) as f64 / asg.fwd.len() as f64;
    let recall = 100.0 * within(&asg.bwd) as f64 / asg.bwd.len() as f64;
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f)
}

/// Combines a raw CD and an F-score percentage into one leaderboard number.
///
/// Track A weighs the two halves equally; track B weighs F-score 70/30.
/// The CD term maps [0, 2] linearly onto [100, 0]; CD outside that range is
/// clamped (with a warning) so the score stays in [0, 100].
pub fn track_score(cd: f64, fscore: f64, track: Track) -> f64 {
    let cd = if (0.0..=2.0).contains(&cd) {
        cd
    } else {
        let clamped = cd.clamp(0.0, 2.0);
        log::warn!("track_score: CD {cd} outside [0, 2], clamped to {clamped}");
        clamped
    };
    let cd_part = 100.0 * (2.0 - cd) / 2.0;
    match track {
        Track::A => cd_part * 0.5 + fscore * 0.5,
        Track::B => cd_part * 0.3 + fscore * 0.7,
    }
}

/// Everything the evaluation pipeline reports for one prediction/target pair.
///
/// `cd` is in raw model units (tables that quote CD×10² scale at print
/// time); `precision`, `recall` and `fscore` are percents; `tau` is the
/// threshold the percentages were computed at.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub cd: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub tau: f64,
    pub score_track_a: f64,
    pub score_track_b: f64,
}

/// Field order of the single-line record format, which is also the key
/// order of the key=value format.
pub const REPORT_FIELDS: [&str; 7] = [
    "cd",
    "precision",
    "recall",
    "fscore",
    "tau",
    "score_track_a",
    "score_track_b",
];

impl MetricsReport {
    fn values(&self) -> [f64; 7] {
        [
            self.cd,
            self.precision,
            self.recall,
            self.fscore,
            self.tau,
            self.score_track_a,
            self.score_track_b,
        ]
    }

    /// One `key=value` line per field, in [`REPORT_FIELDS`] order. Values
    /// use the shortest representation that parses back to the same f64.
    pub fn to_kv_text(&self) -> String {
        REPORT_FIELDS
            .iter()
            .zip(self.values())
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Single-line tab-separated record in [`REPORT_FIELDS`] order.
    pub fn to_record(&self) -> String {
        self.values()
            .map(|v| v.to_string())
            .join("\t")
    }

    /// Parses a line produced by [`MetricsReport::to_record`].
    pub fn from_record(line: &str) -> Result<Self> {
        let vals: Vec<f64> = line
            .trim()
            .split('\t')
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Config {
                    msg: format!("bad report field {t:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != REPORT_FIELDS.len() {
            return Err(Error::Config {
                msg: format!(
                    "report record needs {} fields, got {}",
                    REPORT_FIELDS.len(),
                    vals.len()
                ),
            });
        }
        Ok(MetricsReport {
            cd: vals[0],
            precision: vals[1],
            recall: vals[2],
            fscore: vals[3],
            tau: vals[4],
            score_track_a: vals[5],
            score_track_b: vals[6],
        })
    }
}

/// Full evaluation of a prediction against ground truth: Chamfer distance
/// (L2, mean — the challenge semantics), F-score at `tau`, and both track
/// scores. One set of nearest-neighbor assignments feeds every field.
pub fn evaluate(pred: &PointCloud, gt: &PointCloud, tau: f64) -> Result<MetricsReport> {
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTau { tau });
    }
    let asg = nearest_assignments(pred.points(), gt.points());
    let cd = chamfer_from_assignments(&asg, ChamferMode::L2, Aggregation::Mean);
    let (precision, recall, f) = fscore_from_assignments(&asg, tau);
    Ok(MetricsReport {
        cd,
        precision,
        recall,
        fscore: f,
        tau,
        score_track_a: track_score(cd, f, Track::A),
        score_track_b: track_score(cd, f, Track::B),
    })
}
