//! The n-min horizontal scaling algorithm, its static baselines, and the
//! trace-driven replay that measures cost and latency violations.
//!
//! At each decision epoch (every `n` minutes) the n-min policy forecasts
//! the traffic flow for the next `n/5 - 1` 5-minute steps, takes the peak
//! F-hat, converts it to an arrival rate (lambda = F-hat / 3600 — the only
//! place flows become vehicles/second), and deploys the minimal server
//! count meeting the service's mean-latency target. The horizon is
//! deliberately `n/5 - 1` steps, exactly as the source algorithm's loop is
//! written.
//!
//! Static baselines deploy one constant count: `max` sizes for the training
//! peak, `avg` for the training mean. Replay scores a deployment against
//! realized flows on the analytic mean-time criterion, counting a 5-minute
//! step as violated when the system is unstable or its mean time exceeds
//! the target.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use v2n_core::clamp_non_negative;
use v2n_core::queueing::{self, QueueError, ServiceProfile};
use v2n_core::smoothing::{self, SmoothingConfig, SmoothingError, SmoothingModel, SmoothingState};

/// Seconds per 5-minute step; flows are vehicles/hour.
pub const STEP_MINUTES: usize = 5;

#[derive(Debug, Error)]
pub enum ScalingError {
    #[error("n must be a positive multiple of 5 with n/5 >= 2, got {0} minutes")]
    BadInterval(usize),
    #[error("empty segment")]
    EmptySegment,
    #[error("trace covers {trace} steps but realized series has {realized}")]
    Misaligned { trace: usize, realized: usize },
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
}

/// A forecaster driving the n-min policy: asked for k-step-ahead flow
/// forecasts and fed realized flows as they happen.
pub trait FlowForecaster {
    /// Forecast `k` 5-minute steps ahead of the last observed value,
    /// vehicles/hour.
    fn forecast(&mut self, k: usize) -> Result<f64, ScalingError>;
    /// Feed one realized 5-minute flow.
    fn observe(&mut self, flow: f64);
}

/// Sample-and-hold forecaster.
pub struct HoldForecaster {
    last: f64,
}

impl HoldForecaster {
    pub fn new(last: f64) -> Self {
        HoldForecaster { last }
    }
}

impl FlowForecaster for HoldForecaster {
    fn forecast(&mut self, _k: usize) -> Result<f64, ScalingError> {
        Ok(clamp_non_negative(self.last))
    }
    fn observe(&mut self, flow: f64) {
        self.last = flow;
    }
}

/// DES/TES forecaster updating its state online with each observation.
pub struct SmoothingForecaster {
    state: SmoothingState,
    cfg: SmoothingConfig,
    model: SmoothingModel,
}

impl SmoothingForecaster {
    /// Fits offline on the training segment.
    pub fn fit(
        train: &[f64],
        cfg: SmoothingConfig,
        model: SmoothingModel,
    ) -> Result<Self, ScalingError> {
        let state = smoothing::fit_offline(train, &cfg, model)?;
        Ok(SmoothingForecaster { state, cfg, model })
    }
}

impl FlowForecaster for SmoothingForecaster {
    fn forecast(&mut self, k: usize) -> Result<f64, ScalingError> {
        Ok(match self.model {
            SmoothingModel::Des => smoothing::des_predict(&self.state, k)?,
            SmoothingModel::Tes => smoothing::tes_predict(&self.state, k)?,
        })
    }
    fn observe(&mut self, flow: f64) {
        self.state = match self.model {
            SmoothingModel::Des => smoothing::des_update(&self.state, flow, &self.cfg),
            SmoothingModel::Tes => smoothing::tes_update(&self.state, flow, &self.cfg)
                .expect("ring initialized by fit"),
        };
    }
}

/// Oracle forecaster that reads the future from the realized series;
/// testing aid.
pub struct PerfectForecaster {
    series: Vec<f64>,
    seen: usize,
}

impl PerfectForecaster {
    pub fn new(test_segment: &[f64]) -> Self {
        PerfectForecaster {
            series: test_segment.to_vec(),
            seen: 0,
        }
    }
}

impl FlowForecaster for PerfectForecaster {
    fn forecast(&mut self, k: usize) -> Result<f64, ScalingError> {
        let idx = (self.seen + k - 1).min(self.series.len().saturating_sub(1));
        Ok(self.series[idx])
    }
    fn observe(&mut self, _flow: f64) {
        self.seen += 1;
    }
}

/// Policy family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    NMin,
    Avg,
    Max,
}

/// One deployment interval: servers held constant over `steps` 5-minute
/// steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceInterval {
    /// First 5-minute step index covered (relative to the test segment).
    pub start_step: usize,
    /// Number of 5-minute steps covered.
    pub steps: usize,
    pub servers: u32,
    /// Peak forecast flow driving the decision, vehicles/hour.
    pub forecast_peak: f64,
    /// Whether the forecaster failed at this epoch (previous c held).
    pub forecast_failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingTrace {
    pub policy: PolicyKind,
    /// n in minutes for n-min; 0 for static policies.
    pub n_minutes: usize,
    pub profile: ServiceProfile,
    pub intervals: Vec<TraceInterval>,
}

impl ScalingTrace {
    pub fn total_steps(&self) -> usize {
        self.intervals.iter().map(|i| i.steps).sum()
    }

    /// Deployed server count at a 5-minute step.
    pub fn servers_at(&self, step: usize) -> Option<u32> {
        self.intervals
            .iter()
            .find(|i| step >= i.start_step && step < i.start_step + i.steps)
            .map(|i| i.servers)
    }
}

/// Cost and violation outcome of one replayed trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub policy: PolicyKind,
    pub n_minutes: usize,
    pub profile_name: String,
    /// Sum of deployed servers over 5-minute steps (server-interval units).
    pub cost: f64,
    /// Cost divided by the max policy's cost on the same inputs.
    pub cost_ratio: f64,
    /// Fraction of 5-minute steps with mean time above target or an
    /// unstable system.
    pub violation_ratio: f64,
}

/// Runs Algorithm-style n-min scaling over the test segment.
///
/// The forecaster must already be fitted through the end of training. At
/// each epoch the peak of the `n/5 - 1` step forecasts sizes the
/// deployment; if the forecaster errors, the previous count is held and
/// the incident recorded.
pub fn n_min_schedule(
    test: &[f64],
    forecaster: &mut dyn FlowForecaster,
    n_minutes: usize,
    profile: ServiceProfile,
) -> Result<ScalingTrace, ScalingError> {
    if n_minutes == 0 || n_minutes % STEP_MINUTES != 0 || n_minutes / STEP_MINUTES < 2 {
        return Err(ScalingError::BadInterval(n_minutes));
    }
    if test.is_empty() {
        return Err(ScalingError::EmptySegment);
    }
    let steps_per_epoch = n_minutes / STEP_MINUTES;
    let mut intervals = Vec::new();
    let mut prev_servers: u32 = 1;
    let mut t = 0usize;
    while t < test.len() {
        let steps = steps_per_epoch.min(test.len() - t);
        // Horizon is deliberately one short of the epoch length.
        let horizon = steps_per_epoch - 1;
        let mut peak = 0.0f64;
        let mut failed = false;
        for k in 1..=horizon {
            match forecaster.forecast(k) {
                Ok(f) => peak = peak.max(clamp_non_negative(f)),
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        let servers = if failed {
            prev_servers
        } else {
            let lambda = peak / 3600.0;
            match queueing::min_servers(lambda, profile.mu, profile.t0) {
                Ok(c) => c,
                Err(QueueError::Infeasible { .. }) => {
                    return Err(ScalingError::Queue(
                        queueing::min_servers(lambda, profile.mu, profile.t0).unwrap_err(),
                    ))
                }
                Err(e) => return Err(ScalingError::Queue(e)),
            }
        };
        intervals.push(TraceInterval {
            start_step: t,
            steps,
            servers,
            forecast_peak: peak,
            forecast_failed: failed,
        });
        prev_servers = servers;
        for &f in &test[t..t + steps] {
            forecaster.observe(f);
        }
        t += steps;
    }
    Ok(ScalingTrace {
        policy: PolicyKind::NMin,
        n_minutes,
        profile,
        intervals,
    })
}

/// Static deployment sized on the training segment (peak for `max`, mean
/// for `avg`), constant over `test_steps`.
pub fn static_schedule(
    train: &[f64],
    kind: PolicyKind,
    profile: ServiceProfile,
    test_steps: usize,
) -> Result<ScalingTrace, ScalingError> {
    if train.is_empty() || test_steps == 0 {
        return Err(ScalingError::EmptySegment);
    }
    let flow = match kind {
        PolicyKind::Max => train.iter().copied().fold(f64::MIN, f64::max),
        PolicyKind::Avg => train.iter().sum::<f64>() / train.len() as f64,
        PolicyKind::NMin => return Err(ScalingError::BadInterval(0)),
    };
    let lambda = clamp_non_negative(flow) / 3600.0;
    let servers = queueing::min_servers(lambda, profile.mu, profile.t0)?;
    Ok(ScalingTrace {
        policy: kind,
        n_minutes: 0,
        profile,
        intervals: vec![TraceInterval {
            start_step: 0,
            steps: test_steps,
            servers,
            forecast_peak: clamp_non_negative(flow),
            forecast_failed: false,
        }],
    })
}

/// Scores a trace against realized flows.
///
/// `max_cost` is the max-policy cost on the same inputs (used for the
/// ratio); pass `None` to normalize by this trace's own cost.
pub fn replay(
    trace: &ScalingTrace,
    realized: &[f64],
    max_cost: Option<f64>,
) -> Result<ScalingReport, ScalingError> {
    let total = trace.total_steps();
    if total != realized.len() {
        return Err(ScalingError::Misaligned {
            trace: total,
            realized: realized.len(),
        });
    }
    let mu = trace.profile.mu;
    let t0 = trace.profile.t0;
    let mut cost = 0.0;
    let mut violations = 0usize;
    for interval in &trace.intervals {
        cost += interval.servers as f64 * interval.steps as f64;
        for &flow in &realized[interval.start_step..interval.start_step + interval.steps] {
            let lambda = clamp_non_negative(flow) / 3600.0;
            let c = interval.servers;
            let violated = match queueing::mean_system_time(lambda, mu, c) {
                Ok(t) => t > t0,
                Err(_) => true, // unstable
            };
            if violated {
                violations += 1;
            }
        }
    }
    let denom = max_cost.unwrap_or(cost);
    Ok(ScalingReport {
        policy: trace.policy,
        n_minutes: trace.n_minutes,
        profile_name: trace.profile.name.to_string(),
        cost,
        cost_ratio: cost / denom,
        violation_ratio: violations as f64 / total as f64,
    })
}

/// A policy to compare: the n-min variants carry their decision interval;
/// the forecaster is supplied by the caller per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    NMin { n_minutes: usize },
    Avg,
    Max,
}

impl Policy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::NMin { .. } => PolicyKind::NMin,
            Policy::Avg => PolicyKind::Avg,
            Policy::Max => PolicyKind::Max,
        }
    }
}

/// Runs the policy x profile grid over shared train/test segments.
///
/// `make_forecaster` builds a fresh fitted forecaster for each n-min cell.
/// Per-cell failures are recorded and the grid continues; rows keep input
/// order.
pub fn compare_policies(
    policies: &[Policy],
    train: &[f64],
    test: &[f64],
    profiles: &[ServiceProfile],
    mut make_forecaster: impl FnMut(&[f64]) -> Result<Box<dyn FlowForecaster>, ScalingError>,
) -> Vec<Result<ScalingReport, String>> {
    let mut rows = Vec::new();
    for profile in profiles {
        // Anchor: max-policy cost for this profile.
        let max_cost = static_schedule(train, PolicyKind::Max, *profile, test.len())
            .and_then(|t| replay(&t, test, None))
            .map(|r| r.cost);
        for policy in policies {
            let mut run = || -> Result<ScalingReport, ScalingError> {
                let trace = match policy {
                    Policy::Max => {
                        static_schedule(train, PolicyKind::Max, *profile, test.len())?
                    }
                    Policy::Avg => {
                        static_schedule(train, PolicyKind::Avg, *profile, test.len())?
                    }
                    Policy::NMin { n_minutes } => {
                        let mut fc = make_forecaster(train)?;
                        n_min_schedule(test, fc.as_mut(), *n_minutes, *profile)?
                    }
                };
                replay(&trace, test, max_cost.as_ref().ok().copied())
            };
            rows.push(run().map_err(|e| e.to_string()));
        }
    }
    rows
}
