//! CSV writers and the fractional-mode report.

use std::io::Write;

use anyhow::Result;
use serde::Serialize;

use radiosync::config::{Algorithm, ProcessorId, Tick};
use radiosync::engine::{EnergyReport, Flag, SimTrace};
use radiosync::fractional::{FracConfig, FracTrace};

/// One row per tick: tick, radio-on ids (space separated), then `tau` of
/// each processor (empty before it wakes).
pub fn write_trace_csv(trace: &SimTrace, out: impl Write) -> Result<()> {
    let m = trace.config.m;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["tick".to_string(), "radio_on".to_string()];
    header.extend((1..=m).map(|i| format!("tau_{i}")));
    w.write_record(&header)?;
    for t in 0..trace.end {
        let on: Vec<String> = trace.radio_on_at(t).iter().map(|p| p.0.to_string()).collect();
        let mut row = vec![t.to_string(), on.join(" ")];
        row.extend((0..m).map(|i| {
            trace
                .tau_at(ProcessorId::from_index(i), t)
                .map(|v| v.to_string())
                .unwrap_or_default()
        }));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub n: u64,
    pub m: usize,
    pub k: u64,
    pub algorithm: Algorithm,
    pub max_energy: u64,
    pub total_energy: u64,
    pub sync_tick: Option<Tick>,
}

pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct FracReport {
    pub config: FracConfig,
    pub k: u64,
    pub denominator: i64,
    pub quiescent: bool,
    pub energy: EnergyReport,
    /// `tau + q - (wake + local)` per processor, as `"a/b"`.
    pub exact_offsets: Vec<String>,
    pub completed: bool,
    pub displayed_spread: i64,
    pub flags: Vec<Flag>,
}

impl FracReport {
    pub fn new(trace: &FracTrace) -> Self {
        let m = trace.wakes.len();
        let per_processor = trace.energy.clone();
        FracReport {
            config: trace.config.clone(),
            k: trace.k,
            denominator: trace.denominator,
            quiescent: trace.quiescent,
            energy: EnergyReport {
                max: per_processor.iter().copied().max().unwrap_or(0),
                sum: per_processor.iter().sum(),
                per_processor,
                sync_complete_tick: None,
            },
            exact_offsets: (0..m)
                .map(|i| trace.exact_offset(ProcessorId::from_index(i)).to_string())
                .collect(),
            completed: trace.synchronized(),
            displayed_spread: trace.displayed_spread(),
            flags: trace.flags.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use radiosync::config::SimConfig;
    use radiosync::engine::run;

    #[test]
    fn trace_csv_has_one_row_per_tick() {
        let trace = run(&SimConfig::new(3, Algorithm::Naive, vec![0, 2])).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "tick,radio_on,tau_1,tau_2");
        assert_eq!(rows.len() as u64, trace.end + 1);
        assert_eq!(rows[1], "0,1,0,");
        assert_eq!(rows[3], "2,1 2,2,2");
    }
}
