//! M/M/c analytic model and a discrete-event simulation oracle.
//!
//! The analytic side computes the Erlang-C waiting probability
//! `P_Q = p0 (c rho)^c / (c! (1 - rho))`, the mean system time
//! `T = 1/mu + P_Q / (c mu - lambda)`, and the minimal server count meeting a
//! mean-latency target. Erlang C is evaluated through the Erlang-B
//! recurrence, which stays finite for large `c` where the factorial closed
//! form overflows.
//!
//! Units: arrival and service rates are vehicles/second everywhere in this
//! module; the flow-to-rate conversion (vehicles/hour -> vehicles/second)
//! happens exactly once, in the scaling layer of the companion crate.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Reverse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Rng;

#[derive(Debug, Error, PartialEq)]
pub enum QueueError {
    #[error("unstable system: lambda {lambda} >= c*mu {cmu}")]
    Unstable { lambda: f64, cmu: f64 },
    #[error("invalid parameter: {0}")]
    BadParam(&'static str),
    #[error("infeasible target: T0 {t0} <= 1/mu {min_service}; no server count suffices")]
    Infeasible { t0: f64, min_service: f64 },
}

fn check_rates(lambda: f64, mu: f64, c: u32) -> Result<(), QueueError> {
    if !(lambda >= 0.0) {
        return Err(QueueError::BadParam("lambda must be >= 0"));
    }
    if !(mu > 0.0) {
        return Err(QueueError::BadParam("mu must be > 0"));
    }
    if c < 1 {
        return Err(QueueError::BadParam("c must be >= 1"));
    }
    if lambda >= c as f64 * mu {
        return Err(QueueError::Unstable {
            lambda,
            cmu: c as f64 * mu,
        });
    }
    Ok(())
}

/// Erlang-B blocking probability via the stable recurrence
/// `E_B(0) = 1`, `E_B(c) = a E_B(c-1) / (c + a E_B(c-1))` with `a = lambda/mu`.
fn erlang_b(offered_load: f64, servers: u32) -> f64 {
    let a = offered_load;
    let mut eb = 1.0;
    for n in 1..=servers {
        eb = a * eb / (n as f64 + a * eb);
    }
    eb
}

/// Erlang-C probability that an arrival must wait in an M/M/c queue.
///
/// Requires a stable system (`lambda < c mu`); callers sizing a service must
/// raise `c` on [`QueueError::Unstable`].
pub fn erlang_c(lambda: f64, mu: f64, c: u32) -> Result<f64, QueueError> {
    check_rates(lambda, mu, c)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let a = lambda / mu;
    let eb = erlang_b(a, c);
    let pq = c as f64 * eb / (c as f64 - a * (1.0 - eb));
    Ok(pq.clamp(0.0, 1.0))
}

/// Probability of zero clients in the system, from the same closed form.
pub fn p_zero(lambda: f64, mu: f64, c: u32) -> Result<f64, QueueError> {
    check_rates(lambda, mu, c)?;
    let a = lambda / mu;
    let rho = a / c as f64;
    let mut sum = 0.0;
    let mut term = 1.0; // (c rho)^n / n!
    for n in 0..c {
        if n > 0 {
            term *= a / n as f64;
        }
        sum += term;
    }
    let tail = term * a / c as f64 / (1.0 - rho); // (c rho)^c / (c! (1-rho))
    Ok(1.0 / (sum + tail))
}

/// Mean time a vehicle spends in the system: `T = 1/mu + P_Q / (c mu - lambda)`.
pub fn mean_system_time(lambda: f64, mu: f64, c: u32) -> Result<f64, QueueError> {
    let pq = erlang_c(lambda, mu, c)?;
    Ok(1.0 / mu + pq / (c as f64 * mu - lambda))
}

/// Smallest `c >= 1` with `lambda < c mu` and mean system time `<= t0`.
///
/// Increments `c` linearly from 1, mirroring the scaling loop it implements;
/// the latency check is skipped while the system is still unstable.
pub fn min_servers(lambda: f64, mu: f64, t0: f64) -> Result<u32, QueueError> {
    if !(mu > 0.0) {
        return Err(QueueError::BadParam("mu must be > 0"));
    }
    if !(lambda >= 0.0) {
        return Err(QueueError::BadParam("lambda must be >= 0"));
    }
    if t0 <= 1.0 / mu {
        return Err(QueueError::Infeasible {
            t0,
            min_service: 1.0 / mu,
        });
    }
    let mut c: u32 = 1;
    loop {
        if lambda >= c as f64 * mu {
            c += 1;
            continue;
        }
        if mean_system_time(lambda, mu, c)? <= t0 {
            return Ok(c);
        }
        c += 1;
    }
}

/// Snapshot of the M/M/c model for one sizing decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueSizing {
    /// Arrival rate, vehicles/second.
    pub lambda: f64,
    /// Per-server service rate, vehicles/second.
    pub mu: f64,
    /// Deployed servers.
    pub c: u32,
    /// Utilization `lambda / (c mu)`.
    pub rho: f64,
    /// Probability of an empty system.
    pub p0: f64,
    /// Erlang-C waiting probability.
    pub p_q: f64,
    /// Mean system time, seconds.
    pub mean_time: f64,
}

impl QueueSizing {
    /// Evaluates the full analytic record for a given server count.
    pub fn compute(lambda: f64, mu: f64, c: u32) -> Result<Self, QueueError> {
        let p_q = erlang_c(lambda, mu, c)?;
        let p0 = p_zero(lambda, mu, c)?;
        Ok(QueueSizing {
            lambda,
            mu,
            c,
            rho: lambda / (c as f64 * mu),
            p0,
            p_q,
            mean_time: 1.0 / mu + p_q / (c as f64 * mu - lambda),
        })
    }

    /// Sizes the system for a latency target and evaluates the record.
    pub fn for_target(lambda: f64, mu: f64, t0: f64) -> Result<Self, QueueError> {
        let c = min_servers(lambda, mu, t0)?;
        Self::compute(lambda, mu, c)
    }
}

/// Service rate of one Enhanced Vehicular Service instance, vehicles/second.
pub const MU_EVS: f64 = 208.37;

/// V2N service class with its per-instance rate and mean-latency target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceProfile {
    pub name: &'static str,
    /// Per-server service rate, vehicles/second.
    pub mu: f64,
    /// Mean end-to-end latency target, seconds.
    pub t0: f64,
}

impl ServiceProfile {
    pub const REMOTE_DRIVING: ServiceProfile = ServiceProfile {
        name: "remote_driving",
        mu: MU_EVS,
        t0: 0.005,
    };
    pub const COOPERATIVE_AWARENESS: ServiceProfile = ServiceProfile {
        name: "cooperative_awareness",
        mu: MU_EVS / 20.0,
        t0: 0.1,
    };
    pub const HAZARD_WARNING: ServiceProfile = ServiceProfile {
        name: "hazard_warning",
        mu: MU_EVS / 2.0,
        t0: 0.01,
    };

    pub const ALL: [ServiceProfile; 3] = [
        Self::REMOTE_DRIVING,
        Self::COOPERATIVE_AWARENESS,
        Self::HAZARD_WARNING,
    ];

    pub fn by_name(name: &str) -> Option<ServiceProfile> {
        Self::ALL.iter().copied().find(|p| p.name == name)
    }
}

/// Result of a discrete-event M/M/c run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    /// Sample mean sojourn time, seconds.
    pub mean_time: f64,
    /// 95% confidence half-width on the mean (batch means).
    pub half_width: f64,
    /// Sojourn samples kept after warmup discard.
    pub samples: usize,
}

/// Total-order wrapper so event times can live in a binary heap.
#[derive(PartialEq)]
struct Time(f64);
impl Eq for Time {}
impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Time {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// FIFO M/M/c discrete-event simulation, the independent oracle for
/// [`mean_system_time`].
///
/// Exponential interarrivals and services; each arrival takes the earliest
/// available of the `c` servers, which preserves FIFO start order. The first
/// 10% of sojourns are discarded as warmup; the confidence interval uses 30
/// batch means to absorb autocorrelation.
pub fn simulate_mmc(
    lambda: f64,
    mu: f64,
    c: u32,
    horizon_arrivals: usize,
    seed: u64,
) -> Result<SimResult, QueueError> {
    check_rates(lambda, mu, c)?;
    if !(lambda > 0.0) {
        return Err(QueueError::BadParam("simulation needs lambda > 0"));
    }
    if horizon_arrivals < 10_000 {
        return Err(QueueError::BadParam("need at least 10^4 arrivals"));
    }
    let mut rng = Rng::new(seed);
    // Min-heap of times at which each server becomes free.
    let mut free_at: BinaryHeap<Reverse<Time>> = BinaryHeap::new();
    for _ in 0..c {
        free_at.push(Reverse(Time(0.0)));
    }
    let mut clock = 0.0;
    let mut sojourns: Vec<f64> = Vec::with_capacity(horizon_arrivals);
    for _ in 0..horizon_arrivals {
        clock += rng.exponential(lambda);
        let Reverse(Time(earliest)) = free_at.pop().expect("c servers");
        let start = if earliest > clock { earliest } else { clock };
        let done = start + rng.exponential(mu);
        free_at.push(Reverse(Time(done)));
        sojourns.push(done - clock);
    }
    let kept = &sojourns[horizon_arrivals / 10..];
    let n = kept.len();
    let mean = kept.iter().sum::<f64>() / n as f64;
    // Batch means CI.
    let batches = 30usize.min(n);
    let per = n / batches;
    let mut bm: Vec<f64> = Vec::with_capacity(batches);
    for b in 0..batches {
        let chunk = &kept[b * per..(b + 1) * per];
        bm.push(chunk.iter().sum::<f64>() / chunk.len() as f64);
    }
    let bmean = bm.iter().sum::<f64>() / batches as f64;
    let var = bm.iter().map(|x| (x - bmean) * (x - bmean)).sum::<f64>() / (batches as f64 - 1.0);
    let half_width = 1.96 * libm::sqrt(var / batches as f64);
    Ok(SimResult {
        mean_time: mean,
        half_width,
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mm1_reduces_to_rho() {
        // c=1 -> P_Q = rho
        let pq = erlang_c(0.5, 1.0, 1).unwrap();
        assert!((pq - 0.5).abs() < 1e-14);
    }

    #[test]
    fn worked_example_three_servers() {
        // lambda=2, mu=1, c=3: p0 = 1/9, P_Q = 4/9, T = 13/9.
        let p0 = p_zero(2.0, 1.0, 3).unwrap();
        let pq = erlang_c(2.0, 1.0, 3).unwrap();
        let t = mean_system_time(2.0, 1.0, 3).unwrap();
        assert!((p0 - 1.0 / 9.0).abs() < 1e-14);
        assert!((pq - 4.0 / 9.0).abs() < 1e-14);
        assert!((t - 13.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn zero_arrivals() {
        assert_eq!(erlang_c(0.0, 1.0, 2).unwrap(), 0.0);
        assert!((mean_system_time(0.0, 2.0, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unstable_rejected() {
        assert!(matches!(
            erlang_c(3.0, 1.0, 2),
            Err(QueueError::Unstable { .. })
        ));
    }

    #[test]
    fn min_servers_examples() {
        assert_eq!(min_servers(0.0, 1.0, 2.0).unwrap(), 1);
        assert_eq!(min_servers(2.0, 1.0, 1.5).unwrap(), 3);
        // Remote-driving scale: 1000 veh/h against mu = 208.37 needs one server.
        assert_eq!(min_servers(1000.0 / 3600.0, MU_EVS, 0.005).unwrap(), 1);
    }

    #[test]
    fn infeasible_target() {
        assert!(matches!(
            min_servers(1.0, 2.0, 0.4),
            Err(QueueError::Infeasible { .. })
        ));
    }

    #[test]
    fn mean_time_monotone_in_c() {
        let mut prev = f64::INFINITY;
        for c in 3..10 {
            let t = mean_system_time(2.5, 1.0, c).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    proptest! {
        #[test]
        fn mean_time_increasing_in_lambda(l1 in 0.01f64..0.9, l2 in 0.01f64..0.9) {
            let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
            prop_assume!(hi - lo > 1e-9);
            let t_lo = mean_system_time(lo * 3.0, 1.0, 3).unwrap();
            let t_hi = mean_system_time(hi * 3.0, 1.0, 3).unwrap();
            prop_assert!(t_hi > t_lo);
        }

        #[test]
        fn min_servers_is_minimal(lambda in 0.0f64..50.0, mu in 0.1f64..10.0, slack in 0.01f64..5.0) {
            let t0 = 1.0 / mu + slack;
            let c = min_servers(lambda, mu, t0).unwrap();
            prop_assert!(mean_system_time(lambda, mu, c).unwrap() <= t0);
            if c > 1 {
                let prev = c - 1;
                let prev_ok = lambda < prev as f64 * mu
                    && mean_system_time(lambda, mu, prev).unwrap() <= t0;
                prop_assert!(!prev_ok);
            }
        }
    }

    #[test]
    fn sim_matches_mm1() {
        let r = simulate_mmc(0.5, 1.0, 1, 100_000, 11).unwrap();
        assert!((r.mean_time - 2.0).abs() / 2.0 < 0.03, "{r:?}");
    }

    #[test]
    fn sim_matches_worked_example() {
        let r = simulate_mmc(2.0, 1.0, 3, 100_000, 12).unwrap();
        let t = 13.0 / 9.0;
        assert!((r.mean_time - t).abs() / t < 0.03, "{r:?}");
    }

    #[test]
    fn sim_light_traffic_is_service_time() {
        let r = simulate_mmc(0.01, 1.0, 2, 100_000, 13).unwrap();
        assert!((r.mean_time - 1.0).abs() < 0.03, "{r:?}");
    }
}
