//! Power-trace CSV files: `timestamp`, one column per device (W), `total` (W).
//!
//! On load, negative readings are set to zero. A minute counts as missing
//! when its row is absent or its `total` cell is empty. Runs of at most
//! [`MAX_FILL_MINUTES`] missing minutes are forward-filled; longer runs split
//! the trace into sessions. Empty device cells are forward-filled within a
//! session (back-filled at its start, zero if the column is empty).

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::{Duration, NaiveDateTime};

use crate::output::{fmt_num, write_csv};

pub const MAX_FILL_MINUTES: i64 = 5;
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M"))
        .map_err(|_| anyhow!("bad timestamp {s:?}, expected YYYY-MM-DDTHH:MM"))
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

/// A gap-free run of minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub start: NaiveDateTime,
    pub total: Vec<f64>,
    /// `devices[k][t]`, same order as [`PowerTrace::devices`].
    pub devices: Vec<Vec<f64>>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.start + Duration::minutes(t as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    pub name: String,
    pub devices: Vec<String>,
    pub sessions: Vec<Session>,
}

impl PowerTrace {
    pub fn minutes(&self) -> usize {
        self.sessions.iter().map(|s| s.len()).sum()
    }

    pub fn device_index(&self, name: &str) -> Option<usize> {
        self.devices.iter().position(|d| d == name)
    }
}

struct RawRow {
    at: NaiveDateTime,
    total: Option<f64>,
    devices: Vec<Option<f64>>,
}

fn cell(s: &str, line: usize, col: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| anyhow!("line {line}: column {col:?} holds {s:?}, not a number"))?;
    if !v.is_finite() {
        return Ok(None);
    }
    Ok(Some(v.max(0.0)))
}

pub fn read_trace(reader: impl std::io::Read, name: &str) -> Result<PowerTrace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    if header.first().map(|h| h.as_str()) != Some("timestamp") {
        bail!("first column must be \"timestamp\"");
    }
    let total_col = header.iter().position(|h| h == "total").ok_or_else(|| anyhow!("missing \"total\" column"))?;
    let device_cols: Vec<usize> = (1..header.len()).filter(|&i| i != total_col).collect();
    let devices: Vec<String> = device_cols.iter().map(|&i| header[i].clone()).collect();
    let mut seen = std::collections::BTreeSet::new();
    if let Some(d) = devices.iter().find(|d| d.is_empty() || !seen.insert(d.as_str())) {
        bail!("device column names must be unique and nonempty, found {d:?}");
    }

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != header.len() {
            bail!("line {line}: expected {} cells, found {}", header.len(), rec.len());
        }
        let at = parse_timestamp(&rec[0]).with_context(|| format!("line {line}"))?;
        if let Some(prev) = rows.last().map(|r: &RawRow| r.at) {
            if at <= prev {
                bail!("line {line}: timestamps must increase ({} after {})", format_timestamp(at), format_timestamp(prev));
            }
        }
        let total = cell(&rec[total_col], line, "total")?;
        let devs = device_cols.iter().map(|&c| cell(&rec[c], line, &header[c])).collect::<Result<Vec<_>>>()?;
        rows.push(RawRow { at, total, devices: devs });
    }
    if rows.is_empty() {
        bail!("trace has no rows");
    }
    Ok(PowerTrace { name: name.to_string(), devices, sessions: build_sessions(rows) })
}

/// Applies the gap policy to rows with strictly increasing timestamps.
fn build_sessions(rows: Vec<RawRow>) -> Vec<Session> {
    let k = rows[0].devices.len();
    // expand onto the minute grid; None marks a missing minute
    let mut grid: Vec<(NaiveDateTime, Option<RawRow>)> = Vec::new();
    for r in rows {
        if let Some((last, _)) = grid.last() {
            let mut t = *last + Duration::minutes(1);
            while t < r.at {
                grid.push((t, None));
                t += Duration::minutes(1);
            }
        }
        grid.push((r.at, Some(r)));
    }
    let present = |r: &Option<RawRow>| r.as_ref().is_some_and(|r| r.total.is_some());

    let mut sessions = Vec::new();
    let mut i = 0;
    while i < grid.len() {
        while i < grid.len() && !present(&grid[i].1) {
            i += 1;
        }
        if i == grid.len() {
            break;
        }
        let start = grid[i].0;
        let mut raw: Vec<&Option<RawRow>> = Vec::new();
        let mut j = i;
        loop {
            raw.push(&grid[j].1);
            j += 1;
            let mut run = 0;
            while j + run < grid.len() && !present(&grid[j + run].1) {
                run += 1;
            }
            if j + run == grid.len() || run as i64 > MAX_FILL_MINUTES {
                i = j + run;
                break;
            }
            for m in 0..run {
                raw.push(&grid[j + m].1);
            }
            j += run;
        }
        sessions.push(fill_session(start, &raw, k));
    }
    sessions
}

fn fill_session(start: NaiveDateTime, raw: &[&Option<RawRow>], k: usize) -> Session {
    let mut total = Vec::with_capacity(raw.len());
    let mut last = 0.0;
    for r in raw {
        if let Some(v) = r.as_ref().and_then(|r| r.total) {
            last = v;
        }
        total.push(last);
    }
    let devices = (0..k)
        .map(|d| {
            let vals: Vec<Option<f64>> = raw.iter().map(|r| r.as_ref().and_then(|r| r.devices[d])).collect();
            let mut cur = vals.iter().flatten().next().copied().unwrap_or(0.0);
            vals.iter()
                .map(|v| {
                    if let Some(v) = v {
                        cur = *v;
                    }
                    cur
                })
                .collect()
        })
        .collect();
    Session { start, total, devices }
}

pub fn load_trace(path: &Path) -> Result<PowerTrace> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_trace(std::io::BufReader::new(f), &name).with_context(|| format!("reading {}", path.display()))
}

pub fn write_trace(path: &Path, trace: &PowerTrace) -> Result<()> {
    let mut header = vec!["timestamp"];
    header.extend(trace.devices.iter().map(|s| s.as_str()));
    header.push("total");
    let rows = trace.sessions.iter().flat_map(|s| {
        (0..s.len()).map(move |t| {
            let mut r = vec![format_timestamp(s.timestamp(t))];
            r.extend(s.devices.iter().map(|d| fmt_num(d[t])));
            r.push(fmt_num(s.total[t]));
            r
        })
    });
    write_csv(path, &header, rows)
}

/// Trace files named directly plus every `.csv` inside named directories,
/// sorted by path.
pub fn expand_corpus(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            for e in std::fs::read_dir(p).with_context(|| format!("listing {}", p.display()))? {
                let e = e?.path();
                if e.extension().is_some_and(|x| x == "csv") {
                    out.push(e);
                }
            }
        } else {
            out.push(p.clone());
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("the corpus is empty");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<PowerTrace> {
        read_trace(s.as_bytes(), "t")
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(read("").is_err());
        assert!(read("timestamp,total\n").is_err());
    }

    #[test]
    fn single_row_loads() {
        let t = read("timestamp,fridge,total\n2016-01-01T00:00,50,60\n").unwrap();
        assert_eq!(t.devices, vec!["fridge"]);
        assert_eq!(t.sessions.len(), 1);
        assert_eq!(t.sessions[0].total, vec![60.0]);
        assert_eq!(t.sessions[0].devices, vec![vec![50.0]]);
    }

    #[test]
    fn schema_violations() {
        assert!(read("time,total\n2016-01-01T00:00,1\n").is_err());
        assert!(read("timestamp,a\n2016-01-01T00:00,1\n").is_err());
        assert!(read("timestamp,a,a,total\n2016-01-01T00:00,1,1,2\n").is_err());
        assert!(read("timestamp,total\n2016-01-01T00:00,x\n").is_err());
        assert!(read("timestamp,total\n2016-01-01T00:00,1,2\n").is_err());
    }

    #[test]
    fn timestamps_must_increase() {
        let s = "timestamp,total\n2016-01-01T00:01,1\n2016-01-01T00:00,1\n";
        assert!(read(s).is_err());
        let s = "timestamp,total\n2016-01-01T00:01,1\n2016-01-01T00:01,1\n";
        assert!(read(s).is_err());
    }

    #[test]
    fn negatives_are_clamped() {
        let t = read("timestamp,a,total\n2016-01-01T00:00,-3,-1.5\n").unwrap();
        assert_eq!(t.sessions[0].total, vec![0.0]);
        assert_eq!(t.sessions[0].devices[0], vec![0.0]);
    }

    #[test]
    fn short_gaps_fill_long_gaps_split() {
        let mut s = String::from("timestamp,a,total\n");
        s += "2016-01-01T00:00,1,10\n2016-01-01T00:01,2,20\n";
        // five missing minutes: filled
        s += "2016-01-01T00:07,3,30\n";
        // an empty total counts as a missing minute
        s += "2016-01-01T00:08,4,\n";
        // six missing minutes from 00:08 to 00:13: split
        s += "2016-01-01T00:14,5,50\n2016-01-01T00:15,,60\n";
        let t = read(&s).unwrap();
        assert_eq!(t.sessions.len(), 2);
        let a = &t.sessions[0];
        assert_eq!(a.total, vec![10.0, 20.0, 20.0, 20.0, 20.0, 20.0, 20.0, 30.0]);
        assert_eq!(a.devices[0], vec![1.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 3.0]);
        let b = &t.sessions[1];
        assert_eq!(format_timestamp(b.start), "2016-01-01T00:14");
        assert_eq!(b.total, vec![50.0, 60.0]);
        assert_eq!(b.devices[0], vec![5.0, 5.0]);
    }

    #[test]
    fn leading_empty_device_cells_backfill() {
        let t = read("timestamp,a,b,total\n2016-01-01T00:00,,,1\n2016-01-01T00:01,7,,2\n").unwrap();
        assert_eq!(t.sessions[0].devices, vec![vec![7.0, 7.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn write_then_read_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let start = parse_timestamp("2016-03-01T10:00").unwrap();
        let n = 500;
        let sessions = vec![
            Session {
                start,
                total: (0..n).map(|t| (t as f64 * 0.37).sin().abs() * 1234.5678).collect(),
                devices: vec![(0..n).map(|t| (t % 7) as f64 * 12.125).collect(), vec![0.0; n]],
            },
            Session {
                start: start + Duration::minutes(n as i64 + 30),
                total: vec![1.0, 2.0],
                devices: vec![vec![0.5, 1.5], vec![0.25, 0.25]],
            },
        ];
        let t = PowerTrace { name: "h".into(), devices: vec!["a".into(), "b".into()], sessions };
        let p = dir.path().join("h.csv");
        write_trace(&p, &t).unwrap();
        let back = load_trace(&p).unwrap();
        assert_eq!(back.sessions.len(), 2);
        for (s, b) in t.sessions.iter().zip(&back.sessions) {
            assert_eq!(s.start, b.start);
            for (x, y) in s.total.iter().zip(&b.total) {
                assert_eq!(fmt_num(*x), fmt_num(*y));
            }
            assert_eq!(s.devices.len(), b.devices.len());
        }
        write_trace(&dir.path().join("again.csv"), &back).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(dir.path().join("again.csv")).unwrap());
    }
}
