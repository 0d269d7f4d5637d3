//! Time-varying uplink rate and the transmission integral over it.

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Sample-and-hold: γ_i applies on [t_i, t_{i+1}).
    #[default]
    Step,
    Linear,
}

/// Rate samples `(timestamp_ms, gamma_mbps)` covering [first, last].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrace", into = "RawTrace")]
pub struct ChannelTrace {
    samples: Vec<(f64, f64)>,
    interpolation: Interpolation,
}

#[derive(Serialize, Deserialize)]
struct RawTrace {
    samples: Vec<(f64, f64)>,
    #[serde(default)]
    interpolation: Interpolation,
}

impl TryFrom<RawTrace> for ChannelTrace {
    type Error = SimError;
    fn try_from(r: RawTrace) -> Result<Self, SimError> {
        ChannelTrace::new(r.samples, r.interpolation)
    }
}

impl From<ChannelTrace> for RawTrace {
    fn from(t: ChannelTrace) -> Self {
        RawTrace {
            samples: t.samples,
            interpolation: t.interpolation,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TraceRow {
    timestamp_ms: f64,
    gamma_mbps: f64,
}

impl ChannelTrace {
    pub fn new(samples: Vec<(f64, f64)>, interpolation: Interpolation) -> Result<Self, SimError> {
        if samples.is_empty() {
            return Err(SimError::Trace("trace has no samples".into()));
        }
        for (i, &(t, g)) in samples.iter().enumerate() {
            if !t.is_finite() || !g.is_finite() || g <= 0.0 {
                return Err(SimError::Trace(format!(
                    "sample {i}: ({t}, {g}) needs a finite timestamp and positive finite rate"
                )));
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(SimError::Trace(format!(
                    "sample {i}: timestamps must be strictly increasing"
                )));
            }
        }
        Ok(Self {
            samples,
            interpolation,
        })
    }

    /// Constant rate over [0, end_ms].
    pub fn constant(gamma_mbps: f64, end_ms: f64) -> Result<Self, SimError> {
        Self::new(vec![(0.0, gamma_mbps), (end_ms, gamma_mbps)], Interpolation::Step)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn start_ms(&self) -> f64 {
        self.samples[0].0
    }

    pub fn end_ms(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    fn check_covered(&self, t: f64) -> Result<(), SimError> {
        if t < self.start_ms() || t > self.end_ms() || t.is_nan() {
            return Err(SimError::Coverage {
                at_ms: t,
                start_ms: self.start_ms(),
                end_ms: self.end_ms(),
            });
        }
        Ok(())
    }

    /// Index of the segment [t_i, t_{i+1}) containing `t`; the last sample
    /// maps to the final segment (or 0 for a single sample).
    fn segment(&self, t: f64) -> usize {
        let i = self.samples.partition_point(|s| s.0 <= t);
        i.saturating_sub(1).min(self.samples.len().saturating_sub(2))
    }

    pub fn rate_at(&self, t: f64) -> Result<f64, SimError> {
        self.check_covered(t)?;
        if self.samples.len() == 1 {
            return Ok(self.samples[0].1);
        }
        let i = self.segment(t);
        let (t0, g0) = self.samples[i];
        let (t1, g1) = self.samples[i + 1];
        Ok(match self.interpolation {
            Interpolation::Step if t >= t1 => g1,
            Interpolation::Step => g0,
            Interpolation::Linear => g0 + (g1 - g0) * (t - t0) / (t1 - t0),
        })
    }

    /// Bits deliverable over [from, to] within one segment starting at `from`.
    fn segment_bits(&self, i: usize, from: f64, to: f64) -> f64 {
        let (t0, g0) = self.samples[i];
        let (t1, g1) = self.samples[i + 1];
        match self.interpolation {
            Interpolation::Step => g0 * 1e3 * (to - from),
            Interpolation::Linear => {
                let k = (g1 - g0) / (t1 - t0);
                let a = g0 + k * (from - t0);
                let b = g0 + k * (to - t0);
                1e3 * (a + b) / 2.0 * (to - from)
            }
        }
    }

    /// Total bits the link carries over [from, to].
    pub fn bits_between(&self, from: f64, to: f64) -> Result<f64, SimError> {
        self.check_covered(from)?;
        self.check_covered(to)?;
        if to <= from || self.samples.len() == 1 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        let mut t = from;
        let mut i = self.segment(from);
        while t < to {
            let end = self.samples[i + 1].0.min(to);
            total += self.segment_bits(i, t, end);
            t = end;
            i += 1;
        }
        Ok(total)
    }

    /// Smallest t with ∫_start^t γ(u)·10^6 du ≥ size_bits (time in ms).
    pub fn integrate_transmission(&self, size_bits: f64, start_ms: f64) -> Result<f64, SimError> {
        if size_bits <= 0.0 {
            return Ok(start_ms);
        }
        self.check_covered(start_ms)?;
        let shortfall = |t: f64| SimError::Coverage {
            at_ms: t,
            start_ms: self.start_ms(),
            end_ms: self.end_ms(),
        };
        if self.samples.len() == 1 {
            return Err(shortfall(start_ms));
        }
        let mut remaining = size_bits;
        let mut t = start_ms;
        let mut i = self.segment(start_ms);
        while i + 1 < self.samples.len() {
            let (t0, g0) = self.samples[i];
            let (t1, g1) = self.samples[i + 1];
            let available = self.segment_bits(i, t, t1);
            if available >= remaining {
                let dt = match self.interpolation {
                    Interpolation::Step => remaining / (g0 * 1e3),
                    Interpolation::Linear => {
                        let k = (g1 - g0) / (t1 - t0);
                        let a = g0 + k * (t - t0);
                        let q = 2.0 * remaining / 1e3;
                        // root of k·x²/2 + a·x = remaining/1e3, cancellation-free
                        q / (a + (a * a + k * q).max(0.0).sqrt())
                    }
                };
                return Ok((t + dt).min(t1));
            }
            remaining -= available;
            t = t1;
            i += 1;
        }
        Err(shortfall(self.end_ms()))
    }

    pub fn from_csv_reader(reader: impl std::io::Read, interpolation: Interpolation) -> Result<Self, SimError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut samples = Vec::new();
        for row in rdr.deserialize::<TraceRow>() {
            let row = row.map_err(|e| SimError::Trace(e.to_string()))?;
            samples.push((row.timestamp_ms, row.gamma_mbps));
        }
        Self::new(samples, interpolation)
    }

    pub fn from_csv_str(text: &str, interpolation: Interpolation) -> Result<Self, SimError> {
        Self::from_csv_reader(text.as_bytes(), interpolation)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for &(timestamp_ms, gamma_mbps) in &self.samples {
            w.serialize(TraceRow {
                timestamp_ms,
                gamma_mbps,
            })
            .expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }
}
