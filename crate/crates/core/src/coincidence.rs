//! Analog-style coincidence logic.
//!
//! Each detection opens a logic pulse of its channel's length. Pulses of one
//! channel that overlap merge into a single high interval (logical OR). A
//! coincidence is registered when a signal interval and a herald interval
//! overlap by more than `min_overlap_ps`, and each interval takes part in at
//! most one coincidence. Once an interval has produced a coincidence, later
//! overlaps with it are not counted again. Because the intervals of one
//! channel are disjoint, the earliest-first sweep below yields the largest
//! possible number of such one-to-one coincidences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{EventStream, PS_PER_S};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceConfig {
    pub pulse_len_signal_ps: i64,
    pub pulse_len_herald_ps: i64,
    pub min_overlap_ps: i64,
    /// Shift applied to signal events; positive means later.
    pub delay_offset_ps: i64,
}

impl Default for CoincidenceConfig {
    /// 0.05 us signal pulses, 1 us herald pulses, 3 ns minimum overlap.
    fn default() -> Self {
        Self { pulse_len_signal_ps: 50_000, pulse_len_herald_ps: 1_000_000, min_overlap_ps: 3_000, delay_offset_ps: 0 }
    }
}

impl CoincidenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pulse_len_signal_ps <= 0 || self.pulse_len_herald_ps <= 0 {
            return Err(Error::validation("pulse lengths must be positive"));
        }
        if self.min_overlap_ps < 0 {
            return Err(Error::validation("min_overlap_ps must be non-negative"));
        }
        if self.min_overlap_ps >= self.pulse_len_signal_ps.min(self.pulse_len_herald_ps) {
            return Err(Error::validation("min_overlap_ps must be shorter than both pulses"));
        }
        Ok(())
    }

    /// Nominal coincidence window, the sum of both pulse lengths.
    pub fn window_ps(&self) -> i64 {
        self.pulse_len_signal_ps + self.pulse_len_herald_ps
    }

    /// Range of signal-minus-herald delays that actually register, i.e. the
    /// nominal window less the overlap requirement on both edges.
    pub fn effective_window_ps(&self) -> i64 {
        self.window_ps() - 2 * self.min_overlap_ps
    }

    pub fn with_delay(mut self, delay_ps: i64) -> Self {
        self.delay_offset_ps = delay_ps;
        self
    }
}

/// Singles and coincidence rates over one acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountsSummary {
    pub singles_signal_hz: f64,
    pub singles_herald_hz: f64,
    pub coincidences_hz: f64,
    pub duration_s: f64,
    pub singles_signal_counts: u64,
    pub singles_herald_counts: u64,
    pub coincidence_counts: u64,
}

impl CountsSummary {
    pub fn from_counts(signal: u64, herald: u64, coincidences: u64, duration_s: f64) -> Result<Self> {
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(Error::validation("duration_s must be positive"));
        }
        Ok(Self {
            singles_signal_hz: signal as f64 / duration_s,
            singles_herald_hz: herald as f64 / duration_s,
            coincidences_hz: coincidences as f64 / duration_s,
            duration_s,
            singles_signal_counts: signal,
            singles_herald_counts: herald,
            coincidence_counts: coincidences,
        })
    }

    /// Summary from measured rates; the integer counts are the rounded
    /// products of rate and duration.
    pub fn from_rates(signal_hz: f64, herald_hz: f64, cc_hz: f64, duration_s: f64) -> Result<Self> {
        let finite = [signal_hz, herald_hz, cc_hz].iter().all(|r| r.is_finite() && *r >= 0.0);
        if !finite {
            return Err(Error::validation("rates must be finite and non-negative"));
        }
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(Error::validation("duration_s must be positive"));
        }
        let count = |r: f64| (r * duration_s).round() as u64;
        Ok(Self {
            singles_signal_hz: signal_hz,
            singles_herald_hz: herald_hz,
            coincidences_hz: cc_hz,
            duration_s,
            singles_signal_counts: count(signal_hz),
            singles_herald_counts: count(herald_hz),
            coincidence_counts: count(cc_hz),
        })
    }
}

/// Coincidence rate as a function of the signal delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayScan {
    pub delays_ps: Vec<i64>,
    pub coincidence_rates_hz: Vec<f64>,
}

/// Merges pulses `[t + offset, t + offset + len)` that overlap into
/// disjoint high intervals.
pub fn logic_intervals(times: &[i64], len: i64, offset: i64) -> Vec<(i64, i64)> {
    let mut out: Vec<(i64, i64)> = Vec::with_capacity(times.len());
    for &t in times {
        let start = t + offset;
        let end = start + len;
        match out.last_mut() {
            Some(last) if start < last.1 => last.1 = last.1.max(end),
            _ => out.push((start, end)),
        }
    }
    out
}

/// Counts one-to-one overlaps longer than `min_overlap` between two sets
/// of disjoint, sorted intervals.
pub fn count_interval_matches(a: &[(i64, i64)], b: &[(i64, i64)], min_overlap: i64) -> u64 {
    let (mut i, mut j, mut n) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        let (sa, ea) = a[i];
        let (sb, eb) = b[j];
        if ea.min(eb) - sa.max(sb) > min_overlap {
            n += 1;
            i += 1;
            j += 1;
        } else {
            // the interval that ends first cannot reach any later partner
            if ea <= eb {
                i += 1;
            }
            if eb <= ea {
                j += 1;
            }
        }
    }
    n
}

fn coincidences(signal: &[i64], herald: &[i64], cfg: &CoincidenceConfig) -> u64 {
    let s = logic_intervals(signal, cfg.pulse_len_signal_ps, cfg.delay_offset_ps);
    let h = logic_intervals(herald, cfg.pulse_len_herald_ps, 0);
    count_interval_matches(&s, &h, cfg.min_overlap_ps)
}

pub fn count_coincidences(
    signal: &EventStream,
    herald: &EventStream,
    cfg: &CoincidenceConfig,
) -> Result<CountsSummary> {
    cfg.validate()?;
    if signal.duration_ps() != herald.duration_ps() {
        return Err(Error::validation(format!(
            "stream durations differ ({} ps vs {} ps)",
            signal.duration_ps(),
            herald.duration_ps()
        )));
    }
    let cc = coincidences(signal.timestamps(), herald.timestamps(), cfg);
    CountsSummary::from_counts(signal.len() as u64, herald.len() as u64, cc, signal.duration_ps() as f64 / PS_PER_S)
}

/// Coincidence rate at each signal delay. Delays are evaluated in parallel;
/// each point is independent of the others.
pub fn delay_scan(
    signal: &EventStream,
    herald: &EventStream,
    cfg: &CoincidenceConfig,
    delays_ps: &[i64],
) -> Result<DelayScan> {
    cfg.validate()?;
    if delays_ps.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::validation("delays must be sorted"));
    }
    if signal.duration_ps() != herald.duration_ps() {
        return Err(Error::validation("stream durations differ"));
    }
    let duration_s = signal.duration_s();
    let rates = delays_ps
        .par_iter()
        .map(|&d| coincidences(signal.timestamps(), herald.timestamps(), &cfg.with_delay(d)) as f64 / duration_s)
        .collect();
    Ok(DelayScan { delays_ps: delays_ps.to_vec(), coincidence_rates_hz: rates })
}

/// Evenly spaced delays from `start` to `stop` inclusive.
pub fn delay_grid(start_ps: i64, stop_ps: i64, step_ps: i64) -> Result<Vec<i64>> {
    if step_ps <= 0 || stop_ps < start_ps {
        return Err(Error::validation("delay grid needs step > 0 and stop >= start"));
    }
    Ok((0..=(stop_ps - start_ps) / step_ps).map(|k| start_ps + k * step_ps).collect())
}

/// Default delay-scan bin width, 10 ns.
pub const DEFAULT_SCAN_STEP_PS: i64 = 10_000;

/// Uncorrected heralding efficiency with its Poisson standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldingRatio {
    pub ratio: f64,
    pub std_error: f64,
}

/// Coincidences over herald singles, with the standard error from treating
/// both counts as independent Poisson variables.
pub fn heralding_ratio(summary: &CountsSummary) -> Result<HeraldingRatio> {
    if summary.singles_herald_hz <= 0.0 {
        return Err(Error::validation("herald singles rate is zero"));
    }
    let ratio = summary.coincidences_hz / summary.singles_herald_hz;
    let n_cc = summary.coincidences_hz * summary.duration_s;
    let n_h = summary.singles_herald_hz * summary.duration_s;
    let rel2 = if n_cc > 0.0 { 1.0 / n_cc } else { 0.0 } + 1.0 / n_h;
    Ok(HeraldingRatio { ratio, std_error: ratio * rel2.sqrt() })
}
