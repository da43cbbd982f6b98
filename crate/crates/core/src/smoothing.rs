//! Double and triple (Holt-Winters additive) exponential smoothing, plus the
//! sample-and-hold benchmark.
//!
//! Update equations, for flow `f_t`, level `L`, trend `T`, seasonal index
//! `S` and factors `alpha`, `beta`, `gamma` with season length `s`:
//!
//! ```text
//! DES:  L_t = a f_t + (1-a)(L_{t-1} + T_{t-1})
//!       T_t = b (L_t - L_{t-1}) + (1-b) T_{t-1}
//!       f^_{t+k} = L_t + k T_t
//!
//! TES:  L_t = a (f_t - S_{t-s}) + (1-a)(L_{t-1} + T_{t-1})
//!       T_t = b (L_t - L_{t-1}) + (1-b) T_{t-1}
//!       S_t = g (f_t - L_t) + (1-g) S_{t-s}
//!       f^_{t+k} = L_t + k T_t + S_{t+k-s}
//! ```
//!
//! Forecasts are clamped at zero; the seasonal index wraps modulo `s` for
//! `k > s`. With `gamma = 0` and an all-zero ring, TES trajectories are
//! bit-identical to DES over any input.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clamp_non_negative;

/// Steps per day on the 5-minute grid.
pub const STEPS_PER_DAY: usize = 288;

/// Default season length: 3 days of 5-minute steps.
pub const DEFAULT_SEASON_STEPS: usize = 3 * STEPS_PER_DAY;

#[derive(Debug, Error, PartialEq)]
pub enum SmoothingError {
    #[error("factor {name} = {value} outside [0, 1]")]
    FactorOutOfRange { name: &'static str, value: f64 },
    #[error("season length must be >= 2, got {0}")]
    SeasonTooShort(usize),
    #[error("lead time k must be >= 1")]
    BadLeadTime,
    #[error("seasonal ring not initialized; fit the model first")]
    UninitializedRing,
    #[error("series too short: need {required} points, got {got}")]
    SeriesTooShort { required: usize, got: usize },
    #[error("online window starts at {window_start} but state cursor is {cursor}; gap in the series")]
    WindowGap { window_start: usize, cursor: usize },
}

/// Smoothing factors. Defaults follow the evaluation setup:
/// `alpha = 0.5`, `beta = gamma = 0.001`, season of 3 days (864 steps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub season_steps: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            alpha: 0.5,
            beta: 0.001,
            gamma: 0.001,
            season_steps: DEFAULT_SEASON_STEPS,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<(), SmoothingError> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SmoothingError::FactorOutOfRange { name, value });
            }
        }
        if self.season_steps < 2 {
            return Err(SmoothingError::SeasonTooShort(self.season_steps));
        }
        Ok(())
    }
}

/// Level, trend, and (for TES) the seasonal ring, plus the step cursor.
///
/// The cursor counts observations ingested so far; the ring slot for
/// observation index `t` is `t % s`, so each update overwrites the index
/// learned one season earlier at the same phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingState {
    pub level: f64,
    pub trend: f64,
    /// Seasonal ring of length `s`; `None` for DES.
    pub seasonal: Option<Vec<f64>>,
    /// Number of observations ingested.
    pub cursor: usize,
    /// Count of negative inputs clamped to zero during updates.
    pub clamped_inputs: usize,
}

impl SmoothingState {
    pub fn new_des(level: f64, trend: f64) -> Self {
        SmoothingState {
            level,
            trend,
            seasonal: None,
            cursor: 0,
            clamped_inputs: 0,
        }
    }

    pub fn new_tes(level: f64, trend: f64, ring: Vec<f64>) -> Self {
        SmoothingState {
            level,
            trend,
            seasonal: Some(ring),
            cursor: 0,
            clamped_inputs: 0,
        }
    }
}

/// One DES update step. Negative inputs are clamped at zero and counted.
pub fn des_update(state: &SmoothingState, f_t: f64, cfg: &SmoothingConfig) -> SmoothingState {
    let mut next = state.clone();
    let f = if f_t < 0.0 {
        next.clamped_inputs += 1;
        0.0
    } else {
        f_t
    };
    let prev_level = state.level;
    next.level = cfg.alpha * f + (1.0 - cfg.alpha) * (state.level + state.trend);
    next.trend = cfg.beta * (next.level - prev_level) + (1.0 - cfg.beta) * state.trend;
    next.cursor += 1;
    next
}

/// DES forecast `k >= 1` steps ahead, clamped at zero.
pub fn des_predict(state: &SmoothingState, k: usize) -> Result<f64, SmoothingError> {
    if k < 1 {
        return Err(SmoothingError::BadLeadTime);
    }
    Ok(clamp_non_negative(state.level + k as f64 * state.trend))
}

/// One TES update step; the seasonal ring rotates by one slot.
pub fn tes_update(
    state: &SmoothingState,
    f_t: f64,
    cfg: &SmoothingConfig,
) -> Result<SmoothingState, SmoothingError> {
    let ring = state
        .seasonal
        .as_ref()
        .ok_or(SmoothingError::UninitializedRing)?;
    debug_assert_eq!(ring.len(), cfg.season_steps);
    let mut next = state.clone();
    let f = if f_t < 0.0 {
        next.clamped_inputs += 1;
        0.0
    } else {
        f_t
    };
    let phase = state.cursor % cfg.season_steps;
    let s_old = ring[phase];
    let prev_level = state.level;
    next.level = cfg.alpha * (f - s_old) + (1.0 - cfg.alpha) * (state.level + state.trend);
    next.trend = cfg.beta * (next.level - prev_level) + (1.0 - cfg.beta) * state.trend;
    let s_new = cfg.gamma * (f - next.level) + (1.0 - cfg.gamma) * s_old;
    next.seasonal.as_mut().expect("ring present")[phase] = s_new;
    next.cursor += 1;
    Ok(next)
}

/// TES forecast `k >= 1` steps ahead; the seasonal index wraps modulo `s`.
pub fn tes_predict(state: &SmoothingState, k: usize) -> Result<f64, SmoothingError> {
    if k < 1 {
        return Err(SmoothingError::BadLeadTime);
    }
    let ring = state
        .seasonal
        .as_ref()
        .ok_or(SmoothingError::UninitializedRing)?;
    let s = ring.len();
    // Target observation index is (cursor - 1) + k; its ring phase holds
    // S_{t+k-s} for k <= s and wraps for larger leads.
    let phase = (state.cursor + k - 1) % s;
    Ok(clamp_non_negative(
        state.level + k as f64 * state.trend + ring[phase],
    ))
}

/// Sample-and-hold benchmark: the last observed value, for any lead time.
pub fn sample_hold_predict(last_value: f64, k: usize) -> Result<f64, SmoothingError> {
    if k < 1 {
        return Err(SmoothingError::BadLeadTime);
    }
    Ok(clamp_non_negative(last_value))
}

/// Which smoothing model to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmoothingModel {
    Des,
    Tes,
}

/// Deterministic warm-start followed by a full replay of the training
/// segment.
///
/// DES: `L0` = first value, `T0` = first difference, then updates over the
/// remaining points. TES: `L0` = first value, `T0` = mean first difference
/// over the first season, seasonal indices = per-phase deviation from the
/// first-season mean, then updates over the whole segment.
pub fn fit_offline(
    series: &[f64],
    cfg: &SmoothingConfig,
    model: SmoothingModel,
) -> Result<SmoothingState, SmoothingError> {
    cfg.validate()?;
    match model {
        SmoothingModel::Des => {
            if series.len() < 2 {
                return Err(SmoothingError::SeriesTooShort {
                    required: 2,
                    got: series.len(),
                });
            }
            let mut state = SmoothingState::new_des(series[0], series[1] - series[0]);
            state.cursor = 1;
            for &f in &series[1..] {
                state = des_update(&state, f, cfg);
            }
            Ok(state)
        }
        SmoothingModel::Tes => {
            let s = cfg.season_steps;
            if series.len() < 2 * s {
                return Err(SmoothingError::SeriesTooShort {
                    required: 2 * s,
                    got: series.len(),
                });
            }
            let first_season = &series[..s];
            let season_mean = first_season.iter().sum::<f64>() / s as f64;
            let trend0 = (series[s] - series[0]) / s as f64;
            let ring: Vec<f64> = first_season.iter().map(|v| v - season_mean).collect();
            let mut state = SmoothingState::new_tes(series[0], trend0, ring);
            for &f in series {
                state = tes_update(&state, f, cfg)?;
            }
            Ok(state)
        }
    }
}

/// Applies update steps for every window value newer than the state cursor.
///
/// `window_start` is the series index of the first window value. Values the
/// state has already seen are skipped (replay guard); a window starting past
/// the cursor is a gap error. Factors themselves are never re-estimated.
pub fn update_online(
    state: &SmoothingState,
    window_start: usize,
    window: &[f64],
    cfg: &SmoothingConfig,
    model: SmoothingModel,
) -> Result<SmoothingState, SmoothingError> {
    if window.is_empty() {
        return Ok(state.clone());
    }
    if window_start > state.cursor {
        return Err(SmoothingError::WindowGap {
            window_start,
            cursor: state.cursor,
        });
    }
    let mut next = state.clone();
    for (offset, &f) in window.iter().enumerate() {
        let idx = window_start + offset;
        if idx < next.cursor {
            continue;
        }
        next = match model {
            SmoothingModel::Des => des_update(&next, f, cfg),
            SmoothingModel::Tes => tes_update(&next, f, cfg)?,
        };
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn cfg(alpha: f64, beta: f64, gamma: f64, s: usize) -> SmoothingConfig {
        SmoothingConfig {
            alpha,
            beta,
            gamma,
            season_steps: s,
        }
    }

    #[test]
    fn des_degenerate_factors() {
        // alpha=1, beta=0: level tracks the input, trend untouched.
        let state = SmoothingState::new_des(3.0, 0.25);
        let next = des_update(&state, 7.0, &cfg(1.0, 0.0, 0.0, 2));
        assert_eq!(next.level, 7.0);
        assert_eq!(next.trend, 0.25);
    }

    #[test]
    fn des_hand_recurrence() {
        // L0=10, T0=0, alpha=beta=0.5, f=12 -> L=11, T=0.5; predict k=2 -> 12.
        let state = SmoothingState::new_des(10.0, 0.0);
        let next = des_update(&state, 12.0, &cfg(0.5, 0.5, 0.0, 2));
        assert_eq!(next.level, 11.0);
        assert_eq!(next.trend, 0.5);
        assert_eq!(des_predict(&next, 2).unwrap(), 12.0);
    }

    #[test]
    fn des_constant_fixed_point() {
        let c = cfg(0.5, 0.5, 0.0, 2);
        let mut state = SmoothingState::new_des(10.0, 0.0);
        for _ in 0..50 {
            state = des_update(&state, 10.0, &c);
        }
        assert_eq!(state.level, 10.0);
        assert_eq!(state.trend, 0.0);
    }

    #[test]
    fn des_predict_clamp_and_errors() {
        let state = SmoothingState::new_des(1.0, -2.0);
        assert_eq!(des_predict(&state, 3).unwrap(), 0.0);
        assert_eq!(des_predict(&state, 0), Err(SmoothingError::BadLeadTime));
        let flat = SmoothingState::new_des(4.0, 0.0);
        for k in 1..20 {
            assert_eq!(des_predict(&flat, k).unwrap(), 4.0);
        }
    }

    #[test]
    fn tes_alternating_ring_invariant() {
        // s=2, alternating 1,3, alpha=beta=0, level 2, ring {-1,+1}:
        // updates leave the ring unchanged for any gamma.
        let c = cfg(0.0, 0.0, 0.3, 2);
        let mut state = SmoothingState::new_tes(2.0, 0.0, vec![-1.0, 1.0]);
        for (i, f) in [1.0, 3.0, 1.0].iter().enumerate() {
            state = tes_update(&state, *f, &c).unwrap();
            assert_eq!(state.seasonal.as_ref().unwrap().as_slice(), &[-1.0, 1.0]);
            assert_eq!(state.cursor, i + 1);
        }
        // Forecasts continue the alternation: after 1,3,1 comes 3, then 1.
        assert_eq!(tes_predict(&state, 1).unwrap(), 3.0);
        assert_eq!(tes_predict(&state, 2).unwrap(), 1.0);
        // Modulo rule: k = s+1 uses the same index as k = 1.
        assert_eq!(tes_predict(&state, 3).unwrap(), tes_predict(&state, 1).unwrap());
    }

    #[test]
    fn tes_constant_converges() {
        // Constant input: the fixed-point family is L + S_p = c with T = 0,
        // so forecasts (not the level alone) converge to the constant.
        let c = cfg(0.5, 0.1, 0.1, 4);
        let mut state = SmoothingState::new_tes(0.0, 1.0, vec![0.0; 4]);
        for _ in 0..2000 {
            state = tes_update(&state, 10.0, &c).unwrap();
        }
        assert!(state.trend.abs() < 1e-6);
        for k in 1..=4 {
            assert!((tes_predict(&state, k).unwrap() - 10.0).abs() < 1e-6);
        }
        // Started at the constant with a zero ring, the state is invariant.
        let mut exact = SmoothingState::new_tes(10.0, 0.0, vec![0.0; 4]);
        for _ in 0..50 {
            exact = tes_update(&exact, 10.0, &c).unwrap();
        }
        assert_eq!(exact.level, 10.0);
        assert_eq!(exact.trend, 0.0);
    }

    #[test]
    fn tes_uninitialized_ring_error() {
        let state = SmoothingState::new_des(1.0, 0.0);
        assert_eq!(
            tes_update(&state, 1.0, &SmoothingConfig::default()),
            Err(SmoothingError::UninitializedRing)
        );
    }

    #[test]
    fn tes_gamma_zero_matches_des_bitwise() {
        let des_cfg = cfg(0.37, 0.12, 0.0, 6);
        let tes_cfg = des_cfg;
        let mut rng = Rng::new(99);
        let mut d = SmoothingState::new_des(5.0, 0.1);
        let mut t = SmoothingState::new_tes(5.0, 0.1, vec![0.0; 6]);
        for _ in 0..10_000 {
            let f = rng.uniform(0.0, 100.0);
            d = des_update(&d, f, &des_cfg);
            t = tes_update(&t, f, &tes_cfg).unwrap();
            assert_eq!(d.level.to_bits(), t.level.to_bits());
            assert_eq!(d.trend.to_bits(), t.trend.to_bits());
            for k in [1usize, 3, 12] {
                assert_eq!(
                    des_predict(&d, k).unwrap().to_bits(),
                    tes_predict(&t, k).unwrap().to_bits()
                );
            }
        }
    }

    #[test]
    fn sample_hold() {
        assert_eq!(sample_hold_predict(42.0, 1).unwrap(), 42.0);
        assert_eq!(sample_hold_predict(42.0, 12).unwrap(), 42.0);
        assert_eq!(sample_hold_predict(0.0, 5).unwrap(), 0.0);
        assert_eq!(sample_hold_predict(1.0, 0), Err(SmoothingError::BadLeadTime));
    }

    #[test]
    fn fit_constant_series() {
        let series = vec![5.0; 40];
        let c = cfg(0.5, 0.1, 0.1, 4);
        let des = fit_offline(&series, &c, SmoothingModel::Des).unwrap();
        assert_eq!(des.level, 5.0);
        assert_eq!(des.trend, 0.0);
        let tes = fit_offline(&series, &c, SmoothingModel::Tes).unwrap();
        assert_eq!(tes.level, 5.0);
        assert_eq!(tes.trend, 0.0);
        assert!(tes.seasonal.unwrap().iter().all(|s| *s == 0.0));
    }

    #[test]
    fn fit_linear_trend_extrapolates() {
        let series: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let c = cfg(0.5, 0.5, 0.0, 4);
        let state = fit_offline(&series, &c, SmoothingModel::Des).unwrap();
        assert!((state.level - 99.0).abs() < 1e-9);
        assert!((state.trend - 1.0).abs() < 1e-9);
        for k in 1..10 {
            assert!((des_predict(&state, k).unwrap() - (99.0 + k as f64)).abs() < 1e-8);
        }
    }

    #[test]
    fn fit_sinusoid_tracks_season() {
        // Pure sinusoid with period s over >= 2 seasons: defaults give
        // 1-step RMSE under 5% of amplitude after the fit.
        let s = 48;
        let amp = 100.0;
        let f = |i: usize| {
            amp * 0.5
                * (1.0 - libm::cos(2.0 * core::f64::consts::PI * i as f64 / s as f64))
        };
        let train: Vec<f64> = (0..3 * s).map(f).collect();
        let c = cfg(0.5, 0.001, 0.001, s);
        let mut state = fit_offline(&train, &c, SmoothingModel::Tes).unwrap();
        let mut errs = Vec::new();
        for i in 3 * s..5 * s {
            let pred = tes_predict(&state, 1).unwrap();
            let actual = f(i);
            errs.push(actual - pred);
            state = tes_update(&state, actual, &c).unwrap();
        }
        let rmse = libm::sqrt(errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64);
        assert!(rmse < 0.05 * amp, "rmse {rmse}");
    }

    #[test]
    fn fit_too_short_errors() {
        let c = cfg(0.5, 0.1, 0.1, 10);
        assert!(matches!(
            fit_offline(&[1.0], &c, SmoothingModel::Des),
            Err(SmoothingError::SeriesTooShort { required: 2, .. })
        ));
        assert!(matches!(
            fit_offline(&[1.0; 15], &c, SmoothingModel::Tes),
            Err(SmoothingError::SeriesTooShort { required: 20, .. })
        ));
    }

    #[test]
    fn online_window_semantics() {
        let c = cfg(0.5, 0.5, 0.0, 2);
        let series = [1.0, 2.0, 3.0, 4.0];
        let state = fit_offline(&series, &c, SmoothingModel::Des).unwrap();
        assert_eq!(state.cursor, 4);
        // Replaying the already-seen tail changes nothing.
        let replay = update_online(&state, 2, &series[2..], &c, SmoothingModel::Des).unwrap();
        assert_eq!(replay, state);
        // One new point applies exactly one update.
        let one = update_online(&state, 4, &[5.0], &c, SmoothingModel::Des).unwrap();
        assert_eq!(one, des_update(&state, 5.0, &c));
        // A gap is rejected.
        assert_eq!(
            update_online(&state, 6, &[7.0], &c, SmoothingModel::Des),
            Err(SmoothingError::WindowGap { window_start: 6, cursor: 4 })
        );
    }

    #[test]
    fn online_tracks_regime_drop() {
        let c = cfg(0.5, 0.001, 0.0, 2);
        let mut state = fit_offline(&vec![100.0; 20], &c, SmoothingModel::Des).unwrap();
        // Values halve; within a short window forecasts move down.
        let before = des_predict(&state, 1).unwrap();
        state = update_online(&state, 20, &[50.0; 10], &c, SmoothingModel::Des).unwrap();
        let after = des_predict(&state, 1).unwrap();
        assert!(after < before);
        assert!((after - 50.0).abs() < 1.0, "after {after}");
    }

    proptest! {
        // Update-then-predict is continuous in the input: a small input
        // perturbation moves the 1-step forecast by at most ~(alpha + beta) eps.
        #[test]
        fn lipschitz_in_input(
            level in -100.0f64..100.0,
            trend in -5.0f64..5.0,
            f in 0.0f64..1000.0,
            eps in 1e-6f64..1e-3,
        ) {
            let c = cfg(0.5, 0.2, 0.0, 2);
            let state = SmoothingState::new_des(level, trend);
            let a = des_predict(&des_update(&state, f, &c), 1).unwrap();
            let b = des_predict(&des_update(&state, f + eps, &c), 1).unwrap();
            let bound = (c.alpha + c.beta * c.alpha + c.alpha) * eps + 1e-12;
            prop_assert!((a - b).abs() <= bound);
        }

        #[test]
        fn predictions_non_negative(
            level in -1000.0f64..1000.0,
            trend in -50.0f64..50.0,
            k in 1usize..20,
        ) {
            let state = SmoothingState::new_des(level, trend);
            prop_assert!(des_predict(&state, k).unwrap() >= 0.0);
        }
    }
}
