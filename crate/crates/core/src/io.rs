//! CSV readers and writers for events, traces, histograms and curves.

use std::io::{Read, Write};

use crate::engine::{SpikeEvent, WeightUpdate};
use crate::error::{Error, Result};
use crate::experiments::Histogram;
use crate::stdp::{CurvePoint, SpikeKind};

/// Reads `tick,addr,kind` rows. A leading header row is optional; blank
/// lines are skipped.
pub fn read_events<R: Read>(reader: R) -> Result<Vec<SpikeEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 && rec.get(0) == Some("tick") {
            continue;
        }
        if rec.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let tick = rec[0].parse::<u64>().map_err(|e| Error::Parse {
            line,
            msg: format!("tick {:?}: {e}", &rec[0]),
        })?;
        let addr = rec[1].parse::<usize>().map_err(|e| Error::Parse {
            line,
            msg: format!("addr {:?}: {e}", &rec[1]),
        })?;
        let kind = rec[2].parse::<SpikeKind>().map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        out.push(SpikeEvent::new(tick, addr, kind));
    }
    Ok(out)
}

pub fn write_events<W: Write>(w: W, events: &[SpikeEvent]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["tick", "addr", "kind"])?;
    for e in events {
        wr.write_record([
            e.tick.to_string(),
            e.addr.to_string(),
            e.kind.as_str().to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_updates<W: Write>(w: W, updates: &[WeightUpdate]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["tick", "addr", "old_w", "new_w"])?;
    for u in updates {
        wr.serialize((u.tick, u.addr, u.old_w, u.new_w))?;
    }
    wr.flush()?;
    Ok(())
}

/// `t,v,ideal_v` rows; the two slices must have equal length.
pub fn write_trace<W: Write>(w: W, trace: &[u8], ideal: &[f64]) -> Result<()> {
    if trace.len() != ideal.len() {
        return Err(Error::Domain(format!(
            "trace has {} samples but ideal curve has {}",
            trace.len(),
            ideal.len()
        )));
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "v", "ideal_v"])?;
    for (t, (v, i)) in trace.iter().zip(ideal).enumerate() {
        wr.serialize((t, v, i))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_histogram<W: Write>(w: W, hist: &Histogram) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["bin_low", "bin_high", "count"])?;
    for (i, c) in hist.counts.iter().enumerate() {
        let (lo, hi) = hist.bin_range(i);
        wr.serialize((lo, hi, c))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_curve<W: Write>(w: W, points: &[CurvePoint]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["delta_t", "mean_dw", "std_dw"])?;
    for p in points {
        wr.serialize((p.delta_t, p.mean_dw, p.std_dw))?;
    }
    wr.flush()?;
    Ok(())
}
