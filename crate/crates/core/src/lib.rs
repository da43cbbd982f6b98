//! Algorithmic core for forecast-based dimensioning of V2N edge services.
//!
//! This crate holds the pure, allocation-only parts of the pipeline:
//!
//! * [`smoothing`] — double/triple exponential smoothing and the
//!   sample-and-hold benchmark, with offline fitting and online updates;
//! * [`neural`] — a small from-scratch neural stack (dense, LSTM, GRU,
//!   temporal convolution) trained by backprop-through-time;
//! * [`queueing`] — the M/M/c Erlang-C model, minimal server sizing, and a
//!   discrete-event simulation used as an independent oracle;
//! * [`metrics`] — forecast error metrics;
//! * [`geo`] — great-circle distances and the distance-quantile helper used
//!   to pick probe neighborhoods.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats, and the CLI live
//! in the companion `v2n` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod geo;
pub mod metrics;
pub mod neural;
pub mod queueing;
pub mod rng;
pub mod smoothing;

/// Clamps a forecast or rate at zero. Flows cannot be negative; `-0.0` is
/// normalized to `+0.0` so that algebraically equal paths stay bit-identical.
#[inline]
pub fn clamp_non_negative(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}
