//! Neural-model input windows and probe neighborhoods.
//!
//! Each row of the feature matrix is the 9-vector (phi_1..phi_9) of one
//! probe at one lag:
//!
//! | # | feature   | # | feature              |
//! |---|-----------|---|----------------------|
//! | 1 | flow      | 6 | day of month         |
//! | 2 | accuracy  | 7 | month                |
//! | 3 | speed     | 8 | week of year         |
//! | 4 | km to target | 9 | hour + minute/60  |
//! | 5 | day of week (Mon=1) |              |
//!
//! Rows are ordered lag t-1 first, then t-2, ... t-h; probes in dataset
//! order within each lag. Values are min-max scaled to [0, 1] with
//! statistics learned on the training range only; out-of-range values are
//! clipped and counted.

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use v2n_core::geo::{self, GeoError};

use crate::ingest::CleanDataset;

pub const FEATURES_PER_PROBE: usize = 9;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown probe {0}")]
    UnknownProbe(String),
    #[error("insufficient history at index {at}: need {required} earlier steps, have {available}")]
    InsufficientHistory {
        at: usize,
        required: usize,
        available: usize,
    },
    #[error("need at least 2 probes, got {0}")]
    TooFewProbes(usize),
    #[error("empty training range")]
    EmptyTrainRange,
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Probes within `radius_km` of the target, sorted by distance then id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub target_probe: String,
    pub radius_km: f64,
    /// `(probe_id, distance_km)`, target first at distance 0.
    pub members: Vec<(String, f64)>,
}

impl Neighborhood {
    pub fn member_ids(&self) -> Vec<String> {
        self.members.iter().map(|(id, _)| id.clone()).collect()
    }
}

/// Builds the neighborhood of `target` with the given radius.
pub fn neighborhood(
    clean: &CleanDataset,
    target: &str,
    radius_km: f64,
) -> Result<Neighborhood, FeatureError> {
    let t = clean
        .series
        .get(target)
        .ok_or_else(|| FeatureError::UnknownProbe(target.to_string()))?;
    let mut members = Vec::new();
    for (id, s) in &clean.series {
        let d = geo::haversine_km((t.latitude, t.longitude), (s.latitude, s.longitude))?;
        if d <= radius_km || id == target {
            members.push((id.clone(), d));
        }
    }
    members.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(Neighborhood {
        target_probe: target.to_string(),
        radius_km,
        members,
    })
}

/// {q1, median, q3, W2} of the probe-distance distribution to `target`,
/// where W2 is the largest distance within the 1.5-IQR whisker.
pub fn neighborhood_quantiles(
    clean: &CleanDataset,
    target: &str,
) -> Result<geo::RadiusQuantiles, FeatureError> {
    if clean.probes.len() < 2 {
        return Err(FeatureError::TooFewProbes(clean.probes.len()));
    }
    let t = clean
        .series
        .get(target)
        .ok_or_else(|| FeatureError::UnknownProbe(target.to_string()))?;
    let mut distances = Vec::new();
    for (id, s) in &clean.series {
        if id == target {
            continue;
        }
        distances.push(geo::haversine_km(
            (t.latitude, t.longitude),
            (s.latitude, s.longitude),
        )?);
    }
    Ok(geo::radius_quantiles(&distances).expect("non-empty distances"))
}

/// Per-feature (min, max) scaling statistics, learned on the training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    /// One (min, max) per feature column, per probe position.
    pub bounds: Vec<(f64, f64)>,
    pub probe_count: usize,
}

impl FeatureScaler {
    /// Learns min/max from the raw (unscaled) rows of the training range.
    ///
    /// `members` must be the neighborhood used at prediction time; bounds
    /// are per (probe position, feature) so every matrix column scales
    /// consistently.
    pub fn fit(
        clean: &CleanDataset,
        members: &[String],
        train_range: std::ops::Range<usize>,
    ) -> Result<Self, FeatureError> {
        if train_range.is_empty() {
            return Err(FeatureError::EmptyTrainRange);
        }
        let p = members.len();
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); p * FEATURES_PER_PROBE];
        let mut row = vec![0.0; FEATURES_PER_PROBE];
        for i in train_range {
            for (pi, id) in members.iter().enumerate() {
                raw_feature_row(clean, id, members, i, &mut row)?;
                for (fi, v) in row.iter().enumerate() {
                    let b = &mut bounds[pi * FEATURES_PER_PROBE + fi];
                    b.0 = b.0.min(*v);
                    b.1 = b.1.max(*v);
                }
            }
        }
        Ok(FeatureScaler {
            bounds,
            probe_count: p,
        })
    }

    /// Scales one value to [0, 1]; constant features map to 0. Returns the
    /// scaled value and whether it was clipped.
    fn scale(&self, probe_pos: usize, feature: usize, v: f64) -> (f64, bool) {
        let (lo, hi) = self.bounds[probe_pos * FEATURES_PER_PROBE + feature];
        if hi <= lo {
            return (0.0, false);
        }
        let s = (v - lo) / (hi - lo);
        if s < 0.0 {
            (0.0, true)
        } else if s > 1.0 {
            (1.0, true)
        } else {
            (s, false)
        }
    }

    /// Inverts flow scaling (feature 0) for the target probe position.
    pub fn unscale_flow(&self, probe_pos: usize, s: f64) -> f64 {
        let (lo, hi) = self.bounds[probe_pos * FEATURES_PER_PROBE];
        lo + s * (hi - lo)
    }

    /// (min, max) of the flow feature at a probe position.
    pub fn flow_bounds(&self, probe_pos: usize) -> (f64, f64) {
        self.bounds[probe_pos * FEATURES_PER_PROBE]
    }
}

/// The X_{t,h} window: h * P rows of 9 scaled features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub target_probe: String,
    pub h: usize,
    pub members: Vec<String>,
    /// `h * P` rows, lag t-1 first; each row has 9 features.
    pub rows: Vec<Vec<f64>>,
    /// Number of values clipped to [0, 1] because they fell outside the
    /// training range.
    pub clipped: usize,
}

impl FeatureMatrix {
    /// Flattens each lag into one `P * 9` input vector (oldest lag first),
    /// the layout consumed by the sequence models.
    pub fn to_sequence(&self) -> Vec<Vec<f64>> {
        let p = self.members.len();
        let mut seq = Vec::with_capacity(self.h);
        for lag in (0..self.h).rev() {
            let mut step = Vec::with_capacity(p * FEATURES_PER_PROBE);
            for pi in 0..p {
                step.extend_from_slice(&self.rows[lag * p + pi]);
            }
            seq.push(step);
        }
        seq
    }

    /// Flow-only variant: each timestep is the P flow features.
    pub fn to_flow_sequence(&self) -> Vec<Vec<f64>> {
        let p = self.members.len();
        let mut seq = Vec::with_capacity(self.h);
        for lag in (0..self.h).rev() {
            let step = (0..p).map(|pi| self.rows[lag * p + pi][0]).collect();
            seq.push(step);
        }
        seq
    }
}

/// Raw (unscaled) 9-feature row for `probe` at grid index `i`.
fn raw_feature_row(
    clean: &CleanDataset,
    probe: &str,
    members: &[String],
    i: usize,
    out: &mut [f64],
) -> Result<(), FeatureError> {
    let s = clean
        .series
        .get(probe)
        .ok_or_else(|| FeatureError::UnknownProbe(probe.to_string()))?;
    let target = &clean.series[&members[0]];
    let t = clean.grid[i];
    out[0] = s.flow[i];
    out[1] = s.accuracy[i];
    out[2] = s.speed[i];
    out[3] = geo::haversine_km(
        (target.latitude, target.longitude),
        (s.latitude, s.longitude),
    )?;
    fill_calendar(t, out);
    Ok(())
}

/// phi_5..phi_9 from a timestamp: weekday (Mon=1), day, month, ISO week,
/// fractional hour.
fn fill_calendar(t: DateTime<Utc>, out: &mut [f64]) {
    out[4] = t.weekday().number_from_monday() as f64;
    out[5] = t.day() as f64;
    out[6] = t.month() as f64;
    out[7] = t.iso_week().week() as f64;
    out[8] = t.hour() as f64 + t.minute() as f64 / 60.0;
}

/// Builds the scaled feature window at grid index `t_idx` (forecast
/// issuance time). Uses only values strictly before `t_idx`.
///
/// `members[0]` must be the target probe (a [`Neighborhood`]'s order
/// guarantees this).
pub fn build_feature_matrix(
    clean: &CleanDataset,
    target: &str,
    t_idx: usize,
    h: usize,
    members: &[String],
    scaler: &FeatureScaler,
) -> Result<FeatureMatrix, FeatureError> {
    if t_idx < h {
        return Err(FeatureError::InsufficientHistory {
            at: t_idx,
            required: h,
            available: t_idx,
        });
    }
    debug_assert_eq!(members.first().map(String::as_str), Some(target));
    let p = members.len();
    let mut rows = Vec::with_capacity(h * p);
    let mut clipped = 0usize;
    let mut raw = vec![0.0; FEATURES_PER_PROBE];
    for lag in 1..=h {
        let i = t_idx - lag;
        for (pi, id) in members.iter().enumerate() {
            raw_feature_row(clean, id, members, i, &mut raw)?;
            let mut row = Vec::with_capacity(FEATURES_PER_PROBE);
            for (fi, v) in raw.iter().enumerate() {
                let (s, was_clipped) = scaler.scale(pi, fi, *v);
                if was_clipped {
                    clipped += 1;
                }
                row.push(s);
            }
            rows.push(row);
        }
    }
    Ok(FeatureMatrix {
        target_probe: target.to_string(),
        h,
        members: members.to_vec(),
        rows,
        clipped,
    })
}
