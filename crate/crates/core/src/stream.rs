//! Channel-tagged detection timestamps and their CSV file format.
//!
//! The CSV layout is `channel,time_ps` with channel `1` for the signal arm
//! and `2` for the herald arm. An optional JSON sidecar carries the stream
//! duration and the source model that produced it.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::SourceModel;

pub const PS_PER_S: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Signal,
    Herald,
}

impl Channel {
    pub fn code(self) -> u8 {
        match self {
            Channel::Signal => 1,
            Channel::Herald => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Channel::Signal),
            2 => Ok(Channel::Herald),
            other => Err(Error::validation(format!("unknown channel code {other}"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Channel::Signal => Channel::Herald,
            Channel::Herald => Channel::Signal,
        }
    }
}

/// Detection times of one channel in picoseconds, strictly increasing and
/// inside `[0, duration_ps)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    channel: Channel,
    timestamps_ps: Vec<i64>,
    duration_ps: i64,
}

impl EventStream {
    pub fn new(channel: Channel, timestamps_ps: Vec<i64>, duration_ps: i64) -> Result<Self> {
        if duration_ps <= 0 {
            return Err(Error::validation("stream duration must be positive"));
        }
        if let Some(w) = timestamps_ps.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::validation(format!("timestamps not strictly increasing ({} then {})", w[0], w[1])));
        }
        if let (Some(&first), Some(&last)) = (timestamps_ps.first(), timestamps_ps.last()) {
            if first < 0 || last >= duration_ps {
                return Err(Error::validation("timestamp outside [0, duration)"));
            }
        }
        Ok(Self { channel, timestamps_ps, duration_ps })
    }

    pub fn empty(channel: Channel, duration_ps: i64) -> Result<Self> {
        Self::new(channel, Vec::new(), duration_ps)
    }

    /// Builds a stream from arbitrary times: sorts them, pushes each tie one
    /// tick after its predecessor and drops anything outside `[0, duration)`.
    pub fn from_unsorted(channel: Channel, mut times: Vec<i64>, duration_ps: i64) -> Result<Self> {
        times.sort_unstable();
        Self::from_sorted_with_ties(channel, times, duration_ps)
    }

    /// Same as [`EventStream::from_unsorted`] for input that is already
    /// sorted (ties allowed). Tie order is preserved.
    pub(crate) fn from_sorted_with_ties(channel: Channel, times: Vec<i64>, duration_ps: i64) -> Result<Self> {
        if duration_ps <= 0 {
            return Err(Error::validation("stream duration must be positive"));
        }
        let mut out = Vec::with_capacity(times.len());
        let mut prev = i64::MIN;
        for t in times {
            if t < 0 {
                continue;
            }
            let t = if t <= prev { prev + 1 } else { t };
            if t >= duration_ps {
                break;
            }
            out.push(t);
            prev = t;
        }
        Ok(Self { channel, timestamps_ps: out, duration_ps })
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps_ps
    }

    pub fn into_timestamps(self) -> Vec<i64> {
        self.timestamps_ps
    }

    pub fn duration_ps(&self) -> i64 {
        self.duration_ps
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    pub fn len(&self) -> usize {
        self.timestamps_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ps.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        self.len() as f64 / self.duration_s()
    }

    /// Smallest spacing between consecutive events, if there are two or more.
    pub fn min_gap_ps(&self) -> Option<i64> {
        self.timestamps_ps.windows(2).map(|w| w[1] - w[0]).min()
    }

    pub fn with_channel(mut self, channel: Channel) -> Self {
        self.channel = channel;
        self
    }
}

/// Sidecar metadata written next to a timestamp CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamMetadata {
    pub duration_ps: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_model: Option<SourceModel>,
    #[serde(default)]
    pub tool_version: String,
}

/// Sidecar path for a CSV file: `events.csv` -> `events.csv.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    channel: u8,
    time_ps: i64,
}

/// Writes the given streams as one CSV, rows ordered by time.
pub fn write_csv<W: Write>(writer: W, streams: &[&EventStream]) -> Result<()> {
    let mut rows: Vec<Row> = streams
        .iter()
        .flat_map(|s| {
            let code = s.channel().code();
            s.timestamps().iter().map(move |&t| Row { channel: code, time_ps: t })
        })
        .collect();
    rows.sort_by_key(|r| (r.time_ps, r.channel));
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(["channel", "time_ps"])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a timestamp CSV into per-channel sorted time lists
/// `(signal, herald)`.
pub fn read_csv<R: Read>(reader: R) -> Result<(Vec<i64>, Vec<i64>)> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "channel" || &headers[1] != "time_ps" {
        return Err(Error::validation("expected CSV header `channel,time_ps`"));
    }
    let mut signal = Vec::new();
    let mut herald = Vec::new();
    for row in r.deserialize::<Row>() {
        let row = row?;
        let list = match Channel::from_code(row.channel)? {
            Channel::Signal => &mut signal,
            Channel::Herald => &mut herald,
        };
        if let Some(&prev) = list.last() {
            if row.time_ps <= prev {
                return Err(Error::validation(format!(
                    "channel {} not strictly increasing at {}",
                    row.channel, row.time_ps
                )));
            }
        }
        list.push(row.time_ps);
    }
    Ok((signal, herald))
}

/// Reads a CSV and wraps both channels as streams of the given duration.
pub fn read_streams<R: Read>(reader: R, duration_ps: i64) -> Result<(EventStream, EventStream)> {
    let (s, h) = read_csv(reader)?;
    Ok((EventStream::new(Channel::Signal, s, duration_ps)?, EventStream::new(Channel::Herald, h, duration_ps)?))
}
