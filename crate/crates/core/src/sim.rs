//! Sample paths of the time-changed Erlang queue.
//!
//! The embedded jump chain is that of the classical queue; only the holding
//! times change. From the empty state the holding time has rate `λ` and the
//! next state is `(1, k)`. From a busy state it has rate `λ + kμ` and the
//! jump is an arrival with probability `λ/(λ + kμ)`, otherwise one phase
//! completes.
//!
//! # Export formats
//!
//! CSV has the header `path_id,time,n,s,phase_index` and one row per jump,
//! with times printed as the shortest decimal that round-trips.
//!
//! The binary journal is a flat sequence of 24-byte little-endian records
//! `(u64 path_id, f64 time, u32 n, u32 s)` with no header.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coeffs::QueueParams;
use crate::error::{invalid, Error, Result};
use crate::sampling::{sample_event_time, RngStream};

/// Events allowed in one path before the simulation is declared runaway.
pub const MAX_EVENTS: u64 = 10_000_000;

/// Largest customer count tracked individually by [`EmpiricalPmf`].
pub const PMF_CUSTOMER_CAP: u64 = 512;

/// Customers `n` and remaining phases `s` of the customer in service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueueState {
    pub n: u64,
    pub s: u32,
}

impl QueueState {
    pub const EMPTY: QueueState = QueueState { n: 0, s: 0 };

    pub fn new(n: u64, s: u32, k: u32) -> Result<QueueState> {
        let st = QueueState { n, s };
        if st.is_valid(k) {
            Ok(st)
        } else {
            Err(invalid(format!("({n}, {s}) is not a queue state for k = {k}")))
        }
    }

    pub fn is_valid(&self, k: u32) -> bool {
        (self.n == 0 && self.s == 0) || (self.n >= 1 && self.s >= 1 && self.s <= k)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Queue length measured in phases: `k(n-1) + s`, and 0 when empty.
pub fn phase_index(st: QueueState, k: u32) -> u64 {
    if st.n == 0 {
        0
    } else {
        k as u64 * (st.n - 1) + st.s as u64
    }
}

/// Inverse of [`phase_index`].
pub fn state_from_index(m: u64, k: u32) -> QueueState {
    if m == 0 {
        return QueueState::EMPTY;
    }
    let k64 = k as u64;
    let s = match m % k64 {
        0 => k64,
        r => r,
    };
    QueueState { n: (m - s) / k64 + 1, s: s as u32 }
}

/// Draws the holding time in `st` and the state entered afterwards.
pub fn next_event<R: Rng + ?Sized>(st: QueueState, q: &QueueParams, rng: &mut R) -> (f64, QueueState) {
    if st.is_empty() {
        let hold = sample_event_time(q.lambda, q, rng);
        return (hold, QueueState { n: 1, s: q.k });
    }
    let phase = q.phase_rate();
    let total = q.lambda + phase;
    let hold = sample_event_time(total, q, rng);
    let next = if rng.gen::<f64>() * total < q.lambda {
        QueueState { n: st.n + 1, s: st.s }
    } else if st.s > 1 {
        QueueState { n: st.n, s: st.s - 1 }
    } else if st.n > 1 {
        QueueState { n: st.n - 1, s: q.k }
    } else {
        QueueState::EMPTY
    };
    (hold, next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub state: QueueState,
}

/// Every jump of one path on `[0, horizon]`, starting from `(0, (0,0))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub jumps: Vec<Jump>,
    pub stream: RngStream,
    pub horizon: f64,
}

impl Trajectory {
    /// State after the last jump at or before `t`.
    pub fn state_at(&self, t: f64) -> QueueState {
        let after = self.jumps.partition_point(|j| j.time <= t);
        self.jumps[after.saturating_sub(1)].state
    }
}

/// Simulates one path from the empty state up to `t_max`.
pub fn simulate_path(q: &QueueParams, t_max: f64, stream: RngStream) -> Result<Trajectory> {
    q.validate()?;
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(invalid(format!("simulation horizon must be positive and finite, got {t_max}")));
    }
    let mut rng = stream.rng();
    let mut jumps = vec![Jump { time: 0.0, state: QueueState::EMPTY }];
    let mut state = QueueState::EMPTY;
    let mut clock = 0.0;
    let mut events = 0u64;
    loop {
        let (hold, next) = next_event(state, q, &mut rng);
        // Very small stable indices produce holding times below the
        // resolution of the clock; such jumps are kept one ulp apart so the
        // record stays strictly increasing and every transition is visible.
        clock = (clock + hold).max(clock.next_up());
        if clock > t_max {
            break;
        }
        events += 1;
        if events > MAX_EVENTS {
            return Err(Error::Runaway { events, horizon: t_max });
        }
        jumps.push(Jump { time: clock, state: next });
        state = next;
    }
    Ok(Trajectory { jumps, stream, horizon: t_max })
}

/// Occupancy counts by phase index at time `t`, with a tail bucket for
/// more than [`PMF_CUSTOMER_CAP`] customers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPmf {
    pub t: f64,
    pub k: u32,
    pub counts: Vec<u64>,
    pub tail: u64,
    pub n_paths: u64,
}

impl EmpiricalPmf {
    pub fn probability(&self, st: QueueState) -> f64 {
        let m = phase_index(st, self.k) as usize;
        self.counts.get(m).map_or(0.0, |&c| c as f64 / self.n_paths as f64)
    }

    /// Binomial standard error of [`probability`](Self::probability).
    pub fn std_error(&self, st: QueueState) -> f64 {
        let p = self.probability(st);
        (p * (1.0 - p) / self.n_paths as f64).sqrt()
    }
}

pub fn estimate_state_pmf(paths: &[Trajectory], t: f64, k: u32) -> Result<EmpiricalPmf> {
    if paths.is_empty() {
        return Err(invalid("no paths to estimate from"));
    }
    let width = (PMF_CUSTOMER_CAP * k as u64 + 1) as usize;
    let mut counts = vec![0u64; width];
    let mut tail = 0;
    for path in paths {
        check_covered(path, t)?;
        let m = phase_index(path.state_at(t), k) as usize;
        match counts.get_mut(m) {
            Some(c) => *c += 1,
            None => tail += 1,
        }
    }
    Ok(EmpiricalPmf { t, k, counts, tail, n_paths: paths.len() as u64 })
}

fn check_covered(path: &Trajectory, t: f64) -> Result<()> {
    if t < 0.0 || t > path.horizon {
        Err(invalid(format!("time {t} is outside the simulated horizon [0, {}]", path.horizon)))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Sample mean of the phase index at time `t`.
pub fn estimate_mean_length(paths: &[Trajectory], t: f64, k: u32) -> Result<MeanEstimate> {
    if paths.is_empty() {
        return Err(invalid("no paths to estimate from"));
    }
    let mut sum = 0.0;
    let mut sq = 0.0;
    for path in paths {
        check_covered(path, t)?;
        let m = phase_index(path.state_at(t), k) as f64;
        sum += m;
        sq += m * m;
    }
    let n = paths.len() as f64;
    let mean = sum / n;
    let var = if paths.len() > 1 { ((sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(MeanEstimate { mean, std_error: (var / n).sqrt() })
}

/// Busy-period lengths, split into completed excursions and excursions
/// still running when observation stopped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BusySample {
    pub completed: Vec<f64>,
    /// Elapsed busy time at the moment each unfinished excursion was cut off.
    pub censored: Vec<f64>,
}

impl BusySample {
    pub fn merge(&mut self, other: BusySample) {
        self.completed.extend(other.completed);
        self.censored.extend(other.censored);
    }

    /// Kaplan–Meier estimate of `P(B ≤ t)`; with a common cutoff this is
    /// the plain fraction of all excursions completed by `t`.
    pub fn cdf_estimator(&self) -> impl Fn(f64) -> f64 {
        let mut events: Vec<(f64, bool)> = self
            .completed
            .iter()
            .map(|&b| (b, true))
            .chain(self.censored.iter().map(|&c| (c, false)))
            .collect();
        // Completions sort ahead of censorings at equal times.
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut at_risk = events.len() as f64;
        let mut survival = 1.0;
        let mut steps = Vec::new();
        for (time, done) in events {
            if done {
                survival *= 1.0 - 1.0 / at_risk;
                steps.push((time, 1.0 - survival));
            }
            at_risk -= 1.0;
        }
        move |t| {
            let i = steps.partition_point(|s| s.0 <= t);
            if i == 0 {
                0.0
            } else {
                steps[i - 1].1
            }
        }
    }
}

/// Busy periods observed along simulated paths. An excursion starts with
/// the jump from `(0,0)` to `(1,k)` and ends at the next return to empty;
/// excursions open at the horizon are reported as censored.
pub fn extract_busy_periods(paths: &[Trajectory]) -> BusySample {
    let mut sample = BusySample::default();
    for path in paths {
        let mut start: Option<f64> = None;
        for w in path.jumps.windows(2) {
            let (prev, cur) = (w[0], w[1]);
            if prev.state.is_empty() && !cur.state.is_empty() {
                start = Some(cur.time);
            } else if cur.state.is_empty() {
                if let Some(s) = start.take() {
                    sample.completed.push(cur.time - s);
                }
            }
        }
        if let Some(s) = start {
            sample.censored.push(path.horizon - s);
        }
    }
    sample
}

/// Runs one excursion from `(1, k)` until the queue empties or `horizon`
/// elapses. Returns `Ok(Some(length))` when it completes in time.
pub fn simulate_busy_period(q: &QueueParams, horizon: f64, stream: RngStream) -> Result<Option<f64>> {
    q.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(format!("busy-period horizon must be positive and finite, got {horizon}")));
    }
    let mut rng = stream.rng();
    let mut state = QueueState { n: 1, s: q.k };
    let mut clock = 0.0;
    for _ in 0..MAX_EVENTS {
        let (hold, next) = next_event(state, q, &mut rng);
        clock += hold;
        if clock > horizon {
            return Ok(None);
        }
        if next.is_empty() {
            return Ok(Some(clock));
        }
        state = next;
    }
    Err(Error::Runaway { events: MAX_EVENTS, horizon })
}

pub fn write_csv<W: Write>(paths: &[Trajectory], k: u32, mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    write_csv_rows(paths, k, out)
}

pub const CSV_HEADER: &str = "path_id,time,n,s,phase_index";

/// CSV rows without the header, for appending paths in batches.
pub fn write_csv_rows<W: Write>(paths: &[Trajectory], k: u32, mut out: W) -> io::Result<()> {
    for path in paths {
        for j in &path.jumps {
            writeln!(
                out,
                "{},{},{},{},{}",
                path.stream.stream_id,
                j.time,
                j.state.n,
                j.state.s,
                phase_index(j.state, k)
            )?;
        }
    }
    Ok(())
}

pub fn write_journal<W: Write>(paths: &[Trajectory], mut out: W) -> io::Result<()> {
    for path in paths {
        for j in &path.jumps {
            let n = u32::try_from(j.state.n)
                .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "customer count exceeds u32"))?;
            let mut record = [0u8; 24];
            record[..8].copy_from_slice(&path.stream.stream_id.to_le_bytes());
            record[8..16].copy_from_slice(&j.time.to_le_bytes());
            record[16..20].copy_from_slice(&n.to_le_bytes());
            record[20..].copy_from_slice(&j.state.s.to_le_bytes());
            out.write_all(&record)?;
        }
    }
    Ok(())
}
