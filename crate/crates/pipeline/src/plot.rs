//! Long-format plot data: one row per (key, variable) pair.
//!
//! | kind   | columns                              | variables                                   |
//! |--------|--------------------------------------|---------------------------------------------|
//! | bode   | `freq,variable,value`                | `magnitude_db`, `phase_deg`                 |
//! | trace  | `step,variable,value`                | `reference`, `y`, `y_nominal`, `y_tilde`, `error`, `zeta` |
//! | disagg | `timestamp,device,variable,value`    | `state`, `power`, `level`; device `total`: `total`, `residual` |
//! | usage  | `house,device,variable,value`        | `used` (0 or 1), `share`                    |

use std::path::Path;

use anyhow::{bail, Context, Result};
use nilm_core::dispatch::{BodePoint, ClosedLoopTrace};

use crate::disagg::DisaggResult;
use crate::output::{fmt_num, write_csv};
use crate::trace::format_timestamp;
use crate::usage::HouseUsage;

pub fn write_bode(path: &Path, points: &[BodePoint]) -> Result<()> {
    let rows = points.iter().flat_map(|p| {
        let f = fmt_num(p.freq);
        [
            vec![f.clone(), "magnitude_db".into(), fmt_num(p.magnitude_db)],
            vec![f, "phase_deg".into(), fmt_num(p.phase_deg)],
        ]
    });
    write_csv(path, &["freq", "variable", "value"], rows)
}

pub fn load_bode(path: &Path) -> Result<Vec<BodePoint>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["freq", "variable", "value"] {
        bail!("{}: not a bode file", path.display());
    }
    let mut out: Vec<BodePoint> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let freq: f64 = rec[0].parse()?;
        let value: f64 = match &rec[2] {
            "-inf" => f64::NEG_INFINITY,
            v => v.parse()?,
        };
        if out.last().map(|p| p.freq) != Some(freq) {
            out.push(BodePoint { freq, magnitude_db: f64::NAN, phase_deg: f64::NAN });
        }
        let p = out.last_mut().expect("pushed");
        match &rec[1] {
            "magnitude_db" => p.magnitude_db = value,
            "phase_deg" => p.phase_deg = value,
            v => bail!("unknown bode variable {v:?}"),
        }
    }
    Ok(out)
}

pub fn write_control_trace(path: &Path, trace: &ClosedLoopTrace) -> Result<()> {
    let series: [(&str, &[f64]); 6] = [
        ("reference", &trace.reference),
        ("y", &trace.y),
        ("y_nominal", &trace.y_nominal),
        ("y_tilde", &trace.y_tilde),
        ("error", &trace.error),
        ("zeta", &trace.zeta),
    ];
    let rows = (0..trace.y.len()).flat_map(|t| {
        series.iter().map(move |(name, s)| vec![t.to_string(), name.to_string(), fmt_num(s[t])])
    });
    write_csv(path, &["step", "variable", "value"], rows)
}

pub fn write_disagg(path: &Path, result: &DisaggResult) -> Result<()> {
    let rows = result.records.iter().flat_map(|r| {
        let ts = format_timestamp(r.timestamp);
        let mut rows = Vec::with_capacity(3 * r.devices.len() + 2);
        for (name, d) in result.devices.iter().zip(&r.devices) {
            rows.push(vec![ts.clone(), name.clone(), "state".into(), d.state.to_string()]);
            rows.push(vec![ts.clone(), name.clone(), "power".into(), fmt_num(d.power)]);
            rows.push(vec![ts.clone(), name.clone(), "level".into(), fmt_num(d.level)]);
        }
        rows.push(vec![ts.clone(), "total".into(), "total".into(), fmt_num(r.total)]);
        rows.push(vec![ts, "total".into(), "residual".into(), fmt_num(r.residual)]);
        rows
    });
    write_csv(path, &["timestamp", "device", "variable", "value"], rows)
}

pub fn write_usage(path: &Path, usage: &[HouseUsage]) -> Result<()> {
    let rows = usage.iter().flat_map(|u| {
        [
            vec![u.house.clone(), u.device.clone(), "used".into(), (u.used as u8).to_string()],
            vec![u.house.clone(), u.device.clone(), "share".into(), fmt_num(u.share)],
        ]
    });
    write_csv(path, &["house", "device", "variable", "value"], rows)
}
