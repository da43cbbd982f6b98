//! Raw probe-data ingestion: parsing (CSV or XML), spurious-probe filtering,
//! two-sweep gap filling, and the scenario train/test splits.
//!
//! The sanitation contract: after [`sanitize`], every retained probe has a
//! value at every grid timestamp. Sweep 1 fills, per probe, every timestamp
//! reported by *any* probe with that probe's most recent earlier value;
//! sweep 2 completes the uniform grid between the global min and max
//! timestamps the same way. Gaps before a probe's first record are
//! back-filled with its first value.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid interval in seconds (5 minutes).
pub const DEFAULT_INTERVAL_SECS: i64 = 300;

/// Coverage threshold below which a probe is dropped.
pub const DEFAULT_MIN_COVERAGE: f64 = 0.8;

pub const CSV_HEADER: [&str; 9] = [
    "probe_id",
    "timestamp",
    "latitude",
    "longitude",
    "offset_m",
    "road_name",
    "flow",
    "speed",
    "accuracy",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("bad CSV header: expected `{expected}`, got `{got}`")]
    BadHeader { expected: String, got: String },
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("dataset is empty after parsing")]
    Empty,
    #[error("probe {0} has zero records")]
    EmptyProbe(String),
    #[error("interval must be positive, got {0}")]
    BadInterval(i64),
    #[error("{scenario} {part} range missing: dataset covers {have}, needs {need}")]
    SplitRangeMissing {
        scenario: String,
        part: &'static str,
        have: String,
        need: String,
    },
    #[error("unknown probe {0}")]
    UnknownProbe(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("transport error: {0}")]
    Transport(String),
}

/// One 5-minute aggregated measurement from one road probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub probe_id: String,
    pub timestamp: DateTime<Utc>,
    pub latitude: f64,
    pub longitude: f64,
    pub offset_m: f64,
    pub road_name: String,
    /// Vehicles/hour.
    pub flow: f64,
    /// Km/hour.
    pub speed: f64,
    /// Percent in 0..=100.
    pub accuracy: f64,
}

/// Pre-sanitation record set; the grid is derived from the records.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub records: Vec<ProbeRecord>,
    pub interval_secs: i64,
}

impl RawDataset {
    /// Uniform grid from the earliest to the latest record timestamp.
    pub fn grid(&self) -> Vec<DateTime<Utc>> {
        let (min, max) = match self.records.iter().map(|r| r.timestamp).fold(
            (None::<DateTime<Utc>>, None::<DateTime<Utc>>),
            |(lo, hi), t| {
                (
                    Some(lo.map_or(t, |l| l.min(t))),
                    Some(hi.map_or(t, |h| h.max(t))),
                )
            },
        ) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Vec::new(),
        };
        let step = chrono::Duration::seconds(self.interval_secs);
        let mut grid = Vec::new();
        let mut t = min;
        while t <= max {
            grid.push(t);
            t += step;
        }
        grid
    }
}

/// Per-row parse failure; malformed rows are reported, never silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based data-row (or XML element) index.
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows_total: usize,
    pub rows_ok: usize,
    pub row_errors: Vec<RowError>,
}

/// Counts per sanitation rule; always emitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SanitationReport {
    pub probes_in: usize,
    pub probes_removed: Vec<String>,
    pub sweep1_filled: usize,
    pub sweep2_filled: usize,
    pub backfilled: usize,
    pub duplicates_collapsed: usize,
    pub parse: ParseReport,
}

/// One probe's gap-free channels, aligned with the dataset grid.
///
/// Flow is the forecasting series f_t; speed, accuracy, and location are
/// carried for the feature matrix (phi_2..phi_4).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub probe_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub offset_m: f64,
    pub road_name: String,
    pub flow: Vec<f64>,
    pub speed: Vec<f64>,
    pub accuracy: Vec<f64>,
}

/// Gap-free dataset: every probe has a value at every grid timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanDataset {
    /// Sorted probe ids.
    pub probes: Vec<String>,
    pub grid: Vec<DateTime<Utc>>,
    pub interval_secs: i64,
    pub series: BTreeMap<String, ProbeSeries>,
}

impl CleanDataset {
    pub fn flow_series(&self, probe: &str) -> Result<&[f64], IngestError> {
        self.series
            .get(probe)
            .map(|s| s.flow.as_slice())
            .ok_or_else(|| IngestError::UnknownProbe(probe.to_string()))
    }

    /// Grid index of the first timestamp on or after `date` midnight UTC.
    pub fn index_at_date(&self, date: NaiveDate) -> Option<usize> {
        let t = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0)?);
        self.grid.iter().position(|g| *g >= t)
    }

    /// Serializes back to the canonical CSV record format.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&CSV_HEADER.join(","));
        out.push('\n');
        for id in &self.probes {
            let s = &self.series[id];
            for (i, t) in self.grid.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    id,
                    t.format("%Y-%m-%dT%H:%M:%SZ"),
                    s.latitude,
                    s.longitude,
                    s.offset_m,
                    s.road_name,
                    s.flow[i],
                    s.speed[i],
                    s.accuracy[i]
                );
            }
        }
        out
    }
}

/// Fixed train/test date ranges (inclusive) for one scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSplit {
    pub name: String,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Xml,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// Snaps a timestamp to the nearest grid multiple of `interval_secs`;
/// rejects jitter beyond half an interval.
fn snap_timestamp(
    t: DateTime<Utc>,
    interval_secs: i64,
) -> Result<DateTime<Utc>, String> {
    let secs = t.timestamp();
    let rem = secs.rem_euclid(interval_secs);
    let down = secs - rem;
    let (snapped, dist) = if rem * 2 <= interval_secs {
        (down, rem)
    } else {
        (down + interval_secs, interval_secs - rem)
    };
    if dist * 2 > interval_secs {
        return Err(format!("timestamp {t} is {dist}s off the grid"));
    }
    Ok(Utc
        .timestamp_opt(snapped, 0)
        .single()
        .expect("valid timestamp"))
}

fn validate_fields(
    probe_id: &str,
    latitude: f64,
    longitude: f64,
    flow: f64,
    speed: f64,
    accuracy: f64,
) -> Result<(), String> {
    if probe_id.is_empty() {
        return Err("empty probe_id".into());
    }
    if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
        return Err(format!("coordinates out of range ({latitude}, {longitude})"));
    }
    if flow < 0.0 {
        return Err(format!("negative flow {flow}"));
    }
    if speed < 0.0 {
        return Err(format!("negative speed {speed}"));
    }
    if !(0.0..=100.0).contains(&accuracy) {
        return Err(format!("accuracy {accuracy} outside 0..=100"));
    }
    Ok(())
}

struct RawFields {
    probe_id: String,
    timestamp: String,
    latitude: String,
    longitude: String,
    offset_m: String,
    road_name: String,
    flow: String,
    speed: String,
    accuracy: String,
}

fn build_record(fields: RawFields, interval_secs: i64) -> Result<ProbeRecord, String> {
    let parse_f64 = |name: &str, s: &str| -> Result<f64, String> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad {name} `{s}`"))
    };
    let latitude = parse_f64("latitude", &fields.latitude)?;
    let longitude = parse_f64("longitude", &fields.longitude)?;
    let offset_m = parse_f64("offset_m", &fields.offset_m)?;
    let flow = parse_f64("flow", &fields.flow)?;
    let speed = parse_f64("speed", &fields.speed)?;
    let accuracy = parse_f64("accuracy", &fields.accuracy)?;
    let ts = DateTime::parse_from_rfc3339(fields.timestamp.trim())
        .map_err(|_| format!("bad timestamp `{}`", fields.timestamp))?
        .with_timezone(&Utc);
    let timestamp = snap_timestamp(ts, interval_secs)?;
    validate_fields(&fields.probe_id, latitude, longitude, flow, speed, accuracy)?;
    Ok(ProbeRecord {
        probe_id: fields.probe_id,
        timestamp,
        latitude,
        longitude,
        offset_m,
        road_name: fields.road_name,
        flow,
        speed,
        accuracy,
    })
}

/// Parses raw bytes in the declared format into a [`RawDataset`].
///
/// Malformed rows go to the report; an unparseable CSV header or broken XML
/// is a hard error.
pub fn parse_records(
    input: &[u8],
    format: InputFormat,
    interval_secs: i64,
) -> Result<(RawDataset, ParseReport), IngestError> {
    if interval_secs <= 0 {
        return Err(IngestError::BadInterval(interval_secs));
    }
    match format {
        InputFormat::Csv => parse_csv(input, interval_secs),
        InputFormat::Xml => parse_xml(input, interval_secs),
    }
}

fn parse_csv(input: &[u8], interval_secs: i64) -> Result<(RawDataset, ParseReport), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::BadHeader {
            expected: CSV_HEADER.join(","),
            got: e.to_string(),
        })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != CSV_HEADER {
        return Err(IngestError::BadHeader {
            expected: CSV_HEADER.join(","),
            got: header.join(","),
        });
    }
    let mut report = ParseReport::default();
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        report.rows_total += 1;
        let push_err = |report: &mut ParseReport, reason: String| {
            report.row_errors.push(RowError { row: i + 1, reason });
        };
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                push_err(&mut report, e.to_string());
                continue;
            }
        };
        if row.len() != CSV_HEADER.len() {
            push_err(
                &mut report,
                format!("expected {} fields, got {}", CSV_HEADER.len(), row.len()),
            );
            continue;
        }
        let fields = RawFields {
            probe_id: row[0].trim().to_string(),
            timestamp: row[1].to_string(),
            latitude: row[2].to_string(),
            longitude: row[3].to_string(),
            offset_m: row[4].to_string(),
            road_name: row[5].trim().to_string(),
            flow: row[6].to_string(),
            speed: row[7].to_string(),
            accuracy: row[8].to_string(),
        };
        match build_record(fields, interval_secs) {
            Ok(r) => {
                report.rows_ok += 1;
                records.push(r);
            }
            Err(reason) => push_err(&mut report, reason),
        }
    }
    if records.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok((
        RawDataset {
            records,
            interval_secs,
        },
        report,
    ))
}

fn parse_xml(input: &[u8], interval_secs: i64) -> Result<(RawDataset, ParseReport), IngestError> {
    use quick_xml::events::Event;
    let mut reader = quick_xml::Reader::from_reader(input);
    reader.config_mut().trim_text(true);
    let mut report = ParseReport::default();
    let mut records = Vec::new();
    let mut buf = Vec::new();
    let mut element_idx = 0usize;
    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| IngestError::Xml(e.to_string()))?;
        let attrs = match &event {
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"FDT_data" => {
                e.attributes()
            }
            Event::Eof => break,
            _ => {
                buf.clear();
                continue;
            }
        };
        element_idx += 1;
        report.rows_total += 1;
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        let mut attr_err = None;
        for a in attrs {
            match a {
                Ok(a) => {
                    let key = String::from_utf8_lossy(a.key.as_ref()).to_string();
                    let val = a
                        .unescape_value()
                        .map(|v| v.to_string())
                        .unwrap_or_default();
                    map.insert(key, val);
                }
                Err(e) => attr_err = Some(e.to_string()),
            }
        }
        buf.clear();
        if let Some(reason) = attr_err {
            report.row_errors.push(RowError {
                row: element_idx,
                reason,
            });
            continue;
        }
        let get = |k: &str| map.get(k).cloned().unwrap_or_default();
        let fields = RawFields {
            probe_id: get("probe_id"),
            timestamp: get("timestamp"),
            latitude: get("latitude"),
            longitude: get("longitude"),
            offset_m: get("offset_m"),
            road_name: get("road_name"),
            flow: get("flow"),
            speed: get("speed"),
            accuracy: get("accuracy"),
        };
        match build_record(fields, interval_secs) {
            Ok(r) => {
                report.rows_ok += 1;
                records.push(r);
            }
            Err(reason) => report.row_errors.push(RowError {
                row: element_idx,
                reason,
            }),
        }
    }
    if records.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok((
        RawDataset {
            records,
            interval_secs,
        },
        report,
    ))
}

/// Removes probes covering fewer than `min_coverage` of the grid timestamps.
///
/// Coverage counts distinct grid timestamps with at least one record;
/// duplicates collapse. The boundary is inclusive: coverage exactly at the
/// threshold is kept.
pub fn filter_spurious(
    raw: &RawDataset,
    min_coverage: f64,
) -> Result<(RawDataset, Vec<String>), IngestError> {
    let grid = raw.grid();
    if grid.is_empty() {
        return Err(IngestError::Empty);
    }
    let mut seen: BTreeMap<&str, BTreeSet<DateTime<Utc>>> = BTreeMap::new();
    for r in &raw.records {
        seen.entry(&r.probe_id).or_default().insert(r.timestamp);
    }
    let need = min_coverage * grid.len() as f64;
    let removed: Vec<String> = seen
        .iter()
        .filter(|(_, ts)| (ts.len() as f64) < need)
        .map(|(id, _)| id.to_string())
        .collect();
    let kept = RawDataset {
        records: raw
            .records
            .iter()
            .filter(|r| !removed.contains(&r.probe_id))
            .cloned()
            .collect(),
        interval_secs: raw.interval_secs,
    };
    Ok((kept, removed))
}

/// Two-sweep gap filling producing a gap-free [`CleanDataset`].
pub fn sanitize(raw: &RawDataset) -> Result<(CleanDataset, SanitationReport), IngestError> {
    if raw.records.is_empty() {
        return Err(IngestError::Empty);
    }
    let grid = raw.grid();
    let mut report = SanitationReport::default();

    // Latest record per (probe, timestamp), by ingestion order.
    let mut per_probe: BTreeMap<&str, BTreeMap<DateTime<Utc>, &ProbeRecord>> = BTreeMap::new();
    for r in &raw.records {
        if per_probe
            .entry(&r.probe_id)
            .or_default()
            .insert(r.timestamp, r)
            .is_some()
        {
            report.duplicates_collapsed += 1;
        }
    }
    report.probes_in = per_probe.len();

    // Sweep 1 targets: the union of timestamps reported by any probe.
    let reported_union: BTreeSet<DateTime<Utc>> =
        raw.records.iter().map(|r| r.timestamp).collect();

    let mut series = BTreeMap::new();
    for (id, by_ts) in &per_probe {
        let first = by_ts.values().next().ok_or_else(|| {
            IngestError::EmptyProbe(id.to_string())
        })?;
        let mut filled: BTreeMap<DateTime<Utc>, (f64, f64, f64)> = by_ts
            .iter()
            .map(|(t, r)| (*t, (r.flow, r.speed, r.accuracy)))
            .collect();
        // Sweep 1: per-probe fill at every timestamp some probe reported.
        let mut last: Option<(f64, f64, f64)> = None;
        for t in &reported_union {
            match filled.get(t) {
                Some(v) => last = Some(*v),
                None => {
                    if let Some(v) = last {
                        filled.insert(*t, v);
                        report.sweep1_filled += 1;
                    }
                }
            }
        }
        // Sweep 2: complete the uniform grid (timestamps no probe reported).
        let mut last: Option<(f64, f64, f64)> = None;
        for t in &grid {
            match filled.get(t) {
                Some(v) => last = Some(*v),
                None => {
                    if let Some(v) = last {
                        filled.insert(*t, v);
                        report.sweep2_filled += 1;
                    }
                }
            }
        }
        // Leading gaps: back-fill with the first observed value.
        let first_vals = *filled.values().next().expect("probe has records");
        let mut flow = Vec::with_capacity(grid.len());
        let mut speed = Vec::with_capacity(grid.len());
        let mut accuracy = Vec::with_capacity(grid.len());
        for t in &grid {
            let (f, s, a) = match filled.get(t) {
                Some(v) => *v,
                None => {
                    report.backfilled += 1;
                    first_vals
                }
            };
            flow.push(f);
            speed.push(s);
            accuracy.push(a);
        }
        series.insert(
            id.to_string(),
            ProbeSeries {
                probe_id: id.to_string(),
                latitude: first.latitude,
                longitude: first.longitude,
                offset_m: first.offset_m,
                road_name: first.road_name.clone(),
                flow,
                speed,
                accuracy,
            },
        );
    }
    let clean = CleanDataset {
        probes: series.keys().cloned().collect(),
        grid,
        interval_secs: raw.interval_secs,
        series,
    };
    Ok((clean, report))
}

/// The two fixed evaluation scenarios.
pub fn default_splits() -> Vec<ScenarioSplit> {
    vec![
        ScenarioSplit {
            name: "non-covid".into(),
            train_start: ymd(2020, 1, 28),
            train_end: ymd(2020, 2, 28),
            test_start: ymd(2020, 2, 29),
            test_end: ymd(2020, 3, 7),
        },
        ScenarioSplit {
            name: "covid".into(),
            train_start: ymd(2020, 2, 6),
            train_end: ymd(2020, 3, 7),
            test_start: ymd(2020, 3, 8),
            test_end: ymd(2020, 3, 15),
        },
    ]
}

/// Validates that the dataset covers both fixed splits and returns them.
pub fn split_scenarios(clean: &CleanDataset) -> Result<Vec<ScenarioSplit>, IngestError> {
    let splits = default_splits();
    let (lo, hi) = match (clean.grid.first(), clean.grid.last()) {
        (Some(lo), Some(hi)) => (*lo, *hi),
        _ => return Err(IngestError::Empty),
    };
    for s in &splits {
        for (part, start, end) in [
            ("train", s.train_start, s.train_end),
            ("test", s.test_start, s.test_end),
        ] {
            let need_start = Utc.from_utc_datetime(&start.and_hms_opt(0, 0, 0).unwrap());
            let need_end = Utc.from_utc_datetime(&end.and_hms_opt(23, 55, 0).unwrap());
            if need_start < lo || need_end > hi {
                return Err(IngestError::SplitRangeMissing {
                    scenario: s.name.clone(),
                    part,
                    have: format!("{lo}..{hi}"),
                    need: format!("{need_start}..{need_end}"),
                });
            }
        }
    }
    Ok(splits)
}

/// Downloads a raw snapshot; the caller feeds the bytes to [`parse_records`].
pub fn fetch_snapshot(endpoint: &str, timeout: Duration) -> Result<Vec<u8>, IngestError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into();
    let mut response = agent
        .get(endpoint)
        .call()
        .map_err(|e| IngestError::Transport(e.to_string()))?;
    response
        .body_mut()
        .read_to_vec()
        .map_err(|e| IngestError::Transport(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_line(probe: &str, ts: &str, flow: f64) -> String {
        format!("{probe},{ts},45.0,7.6,10,Corso,{flow},40,100\n")
    }

    fn small_csv() -> String {
        let mut s = CSV_HEADER.join(",") + "\n";
        s += &csv_line("A", "2020-01-01T00:00:00Z", 10.0);
        s += &csv_line("A", "2020-01-01T00:05:00Z", 14.0);
        s
    }

    #[test]
    fn parse_minimal_csv() {
        let (raw, report) = parse_records(small_csv().as_bytes(), InputFormat::Csv, 300).unwrap();
        assert_eq!(raw.records.len(), 2);
        assert_eq!(report.rows_ok, 2);
        assert!(report.row_errors.is_empty());
        assert_eq!(raw.grid().len(), 2);
    }

    #[test]
    fn bad_header_rejected() {
        let data = "probe,when\nA,2020-01-01T00:00:00Z\n";
        assert!(matches!(
            parse_records(data.as_bytes(), InputFormat::Csv, 300),
            Err(IngestError::BadHeader { .. })
        ));
    }

    #[test]
    fn negative_flow_is_row_error() {
        let mut s = CSV_HEADER.join(",") + "\n";
        s += &csv_line("A", "2020-01-01T00:00:00Z", -3.0);
        s += &csv_line("A", "2020-01-01T00:05:00Z", 5.0);
        let (raw, report) = parse_records(s.as_bytes(), InputFormat::Csv, 300).unwrap();
        assert_eq!(raw.records.len(), 1);
        assert_eq!(report.row_errors.len(), 1);
        assert!(report.row_errors[0].reason.contains("negative flow"));
    }

    #[test]
    fn timestamp_jitter_snaps_or_errors() {
        let mut s = CSV_HEADER.join(",") + "\n";
        s += &csv_line("A", "2020-01-01T00:01:00Z", 1.0); // snaps down to 00:00
        s += &csv_line("A", "2020-01-01T00:04:00Z", 2.0); // snaps up to 00:05
        let (raw, report) = parse_records(s.as_bytes(), InputFormat::Csv, 300).unwrap();
        assert!(report.row_errors.is_empty());
        assert_eq!(
            raw.records[0].timestamp,
            Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
        );
        assert_eq!(
            raw.records[1].timestamp,
            Utc.with_ymd_and_hms(2020, 1, 1, 0, 5, 0).unwrap()
        );
    }

    #[test]
    fn parse_xml_records() {
        let xml = r#"<roads>
            <FDT_data probe_id="A" timestamp="2020-01-01T00:00:00Z" latitude="45.0"
                longitude="7.6" offset_m="10" road_name="Corso" flow="720"
                speed="41.5" accuracy="100" extra="ignored"/>
            <FDT_data probe_id="A" timestamp="2020-01-01T00:05:00Z" latitude="45.0"
                longitude="7.6" offset_m="10" road_name="Corso" flow="700"
                speed="40" accuracy="100"/>
        </roads>"#;
        let (raw, report) = parse_records(xml.as_bytes(), InputFormat::Xml, 300).unwrap();
        assert_eq!(report.rows_ok, 2);
        assert_eq!(raw.records[0].flow, 720.0);
        assert_eq!(raw.records[0].speed, 41.5);
        assert_eq!(raw.records[0].accuracy, 100.0);
    }

    fn coverage_fixture() -> RawDataset {
        // Grid of 20 points. A: 100%, B: 85%, C: 70%.
        let mut records = Vec::new();
        let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        for i in 0..20i64 {
            let ts = t0 + chrono::Duration::seconds(300 * i);
            let mk = |id: &str| ProbeRecord {
                probe_id: id.into(),
                timestamp: ts,
                latitude: 45.0,
                longitude: 7.6,
                offset_m: 0.0,
                road_name: "r".into(),
                flow: i as f64,
                speed: 30.0,
                accuracy: 100.0,
            };
            records.push(mk("A"));
            if i < 17 {
                records.push(mk("B"));
            }
            if i < 14 {
                records.push(mk("C"));
            }
        }
        RawDataset {
            records,
            interval_secs: 300,
        }
    }

    #[test]
    fn filter_threshold_straddle() {
        let raw = coverage_fixture();
        let (kept, removed) = filter_spurious(&raw, 0.8).unwrap();
        assert_eq!(removed, vec!["C".to_string()]);
        assert!(kept.records.iter().all(|r| r.probe_id != "C"));
        let (_, removed_none) = filter_spurious(&raw, 0.0).unwrap();
        assert!(removed_none.is_empty());
    }

    #[test]
    fn filter_boundary_inclusive() {
        // Probe with exactly 80% of 20 grid points (16) is kept.
        let mut raw = coverage_fixture();
        raw.records.retain(|r| r.probe_id == "A");
        let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        for i in 0..16i64 {
            raw.records.push(ProbeRecord {
                probe_id: "D".into(),
                timestamp: t0 + chrono::Duration::seconds(300 * i),
                latitude: 45.0,
                longitude: 7.6,
                offset_m: 0.0,
                road_name: "r".into(),
                flow: 1.0,
                speed: 30.0,
                accuracy: 100.0,
            });
        }
        let (_, removed) = filter_spurious(&raw, 0.8).unwrap();
        assert!(removed.is_empty());
    }

    #[test]
    fn sanitize_last_value_hold() {
        // Probe values {00:00 -> 10, 00:10 -> 14}: 00:05 filled with 10.
        let mut s = CSV_HEADER.join(",") + "\n";
        s += &csv_line("A", "2020-01-01T00:00:00Z", 10.0);
        s += &csv_line("A", "2020-01-01T00:10:00Z", 14.0);
        let (raw, _) = parse_records(s.as_bytes(), InputFormat::Csv, 300).unwrap();
        let (clean, report) = sanitize(&raw).unwrap();
        assert_eq!(clean.flow_series("A").unwrap(), &[10.0, 10.0, 14.0]);
        assert_eq!(report.sweep2_filled, 1);
    }

    #[test]
    fn sanitize_second_sweep_globally_missing() {
        // Two probes, both missing 00:05 entirely: second sweep fills both
        // with their 00:00 values.
        let mut s = CSV_HEADER.join(",") + "\n";
        for id in ["A", "B"] {
            s += &csv_line(id, "2020-01-01T00:00:00Z", 10.0);
            s += &csv_line(id, "2020-01-01T00:10:00Z", 20.0);
        }
        let (raw, _) = parse_records(s.as_bytes(), InputFormat::Csv, 300).unwrap();
        let (clean, report) = sanitize(&raw).unwrap();
        for id in ["A", "B"] {
            assert_eq!(clean.flow_series(id).unwrap()[1], 10.0);
        }
        assert_eq!(report.sweep2_filled, 2);
        assert_eq!(report.sweep1_filled, 0);
    }

    #[test]
    fn sanitize_first_sweep_uses_union() {
        // B reports at 00:05 but A does not: sweep 1 fills A there.
        let mut s = CSV_HEADER.join(",") + "\n";
        s += &csv_line("A", "2020-01-01T00:00:00Z", 10.0);
        s += &csv_line("A", "2020-01-01T00:10:00Z", 30.0);
        s += &csv_line("B", "2020-01-01T00:00:00Z", 1.0);
        s += &csv_line("B", "2020-01-01T00:05:00Z", 2.0);
        s += &csv_line("B", "2020-01-01T00:10:00Z", 3.0);
        let (raw, _) = parse_records(s.as_bytes(), InputFormat::Csv, 300).unwrap();
        let (clean, report) = sanitize(&raw).unwrap();
        assert_eq!(clean.flow_series("A").unwrap(), &[10.0, 10.0, 30.0]);
        assert_eq!(report.sweep1_filled, 1);
        assert_eq!(report.sweep2_filled, 0);
    }

    #[test]
    fn sanitize_leading_gap_backfills() {
        let mut s = CSV_HEADER.join(",") + "\n";
        s += &csv_line("A", "2020-01-01T00:00:00Z", 5.0);
        s += &csv_line("A", "2020-01-01T00:10:00Z", 6.0);
        s += &csv_line("B", "2020-01-01T00:10:00Z", 42.0);
        let (raw, _) = parse_records(s.as_bytes(), InputFormat::Csv, 300).unwrap();
        let (clean, report) = sanitize(&raw).unwrap();
        assert_eq!(clean.flow_series("B").unwrap(), &[42.0, 42.0, 42.0]);
        assert!(report.backfilled >= 1 || report.sweep1_filled >= 1);
    }

    #[test]
    fn sanitize_idempotent_and_complete() {
        let raw = coverage_fixture();
        let (clean, _) = sanitize(&raw).unwrap();
        for id in &clean.probes {
            assert_eq!(clean.series[id].flow.len(), clean.grid.len());
        }
        // Round-trip through CSV and sanitize again: identical.
        let csv = clean.to_csv();
        let (raw2, report2) = parse_records(csv.as_bytes(), InputFormat::Csv, 300).unwrap();
        assert!(report2.row_errors.is_empty());
        let (clean2, report) = sanitize(&raw2).unwrap();
        assert_eq!(clean, clean2);
        assert_eq!(report.sweep1_filled + report.sweep2_filled + report.backfilled, 0);
    }

    #[test]
    fn duplicates_take_last_by_ingestion_order() {
        let mut s = CSV_HEADER.join(",") + "\n";
        s += &csv_line("A", "2020-01-01T00:00:00Z", 10.0);
        s += &csv_line("A", "2020-01-01T00:00:00Z", 99.0);
        s += &csv_line("A", "2020-01-01T00:05:00Z", 5.0);
        let (raw, _) = parse_records(s.as_bytes(), InputFormat::Csv, 300).unwrap();
        let (clean, report) = sanitize(&raw).unwrap();
        assert_eq!(clean.flow_series("A").unwrap()[0], 99.0);
        assert_eq!(report.duplicates_collapsed, 1);
    }

    fn full_range_dataset() -> CleanDataset {
        let t0 = Utc.with_ymd_and_hms(2020, 1, 28, 0, 0, 0).unwrap();
        let t1 = Utc.with_ymd_and_hms(2020, 3, 25, 23, 55, 0).unwrap();
        let mut grid = Vec::new();
        let mut t = t0;
        while t <= t1 {
            grid.push(t);
            t += chrono::Duration::seconds(300);
        }
        let n = grid.len();
        let mut series = BTreeMap::new();
        series.insert(
            "A".to_string(),
            ProbeSeries {
                probe_id: "A".into(),
                latitude: 45.0,
                longitude: 7.6,
                offset_m: 0.0,
                road_name: "r".into(),
                flow: vec![1.0; n],
                speed: vec![30.0; n],
                accuracy: vec![100.0; n],
            },
        );
        CleanDataset {
            probes: vec!["A".into()],
            grid,
            interval_secs: 300,
            series,
        }
    }

    #[test]
    fn split_scenarios_full_range() {
        let clean = full_range_dataset();
        let splits = split_scenarios(&clean).unwrap();
        assert_eq!(splits.len(), 2);
        assert_eq!(splits[0].name, "non-covid");
        assert_eq!(splits[0].train_start, ymd(2020, 1, 28));
        assert_eq!(splits[0].test_end, ymd(2020, 3, 7));
        assert_eq!(splits[1].test_start, ymd(2020, 3, 8));
    }

    #[test]
    fn split_scenarios_short_dataset_errors() {
        let mut clean = full_range_dataset();
        let cutoff = Utc.with_ymd_and_hms(2020, 3, 1, 0, 0, 0).unwrap();
        let keep = clean.grid.iter().filter(|t| **t <= cutoff).count();
        clean.grid.truncate(keep);
        for s in clean.series.values_mut() {
            s.flow.truncate(keep);
            s.speed.truncate(keep);
            s.accuracy.truncate(keep);
        }
        match split_scenarios(&clean) {
            Err(IngestError::SplitRangeMissing { scenario, .. }) => {
                assert_eq!(scenario, "non-covid");
            }
            other => panic!("expected missing-range error, got {other:?}"),
        }
    }

    #[test]
    fn fetch_unreachable_is_transport_error() {
        let err = fetch_snapshot(
            "http://127.0.0.1:1/never",
            Duration::from_millis(200),
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::Transport(_)));
    }
}
