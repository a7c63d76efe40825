//! Which devices are used, and what share of each house's consumption they
//! account for.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::trace::PowerTrace;

/// One device in one house.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HouseUsage {
    pub house: String,
    pub device: String,
    /// Some reading strictly above zero.
    pub used: bool,
    /// Device energy over the house total.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceUsage {
    pub device: String,
    pub houses_with_device: usize,
    pub houses_using: usize,
    /// Shares over the houses that use the device.
    pub share: ShareSummary,
}

/// Five-number summary plus the mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ShareSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl ShareSummary {
    fn of(xs: &mut [f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        xs.sort_by(f64::total_cmp);
        // linear interpolation between order statistics
        let q = |p: f64| {
            let h = p * (xs.len() - 1) as f64;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
        };
        Self {
            min: xs[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: xs[xs.len() - 1],
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
        }
    }
}

pub fn house_usage(trace: &PowerTrace) -> Vec<HouseUsage> {
    let total: f64 = trace.sessions.iter().flat_map(|s| &s.total).sum();
    trace
        .devices
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let vals = || trace.sessions.iter().flat_map(move |s| &s.devices[k]);
            let energy: f64 = vals().sum();
            HouseUsage {
                house: trace.name.clone(),
                device: name.clone(),
                used: vals().any(|&v| v > 0.0),
                share: if total > 0.0 { energy / total } else { 0.0 },
            }
        })
        .collect()
}

/// Devices ranked by the number of houses using them, then by median share.
pub fn device_usage_report(houses: &[Vec<HouseUsage>]) -> Vec<DeviceUsage> {
    let mut by_device: BTreeMap<&str, (usize, Vec<f64>)> = BTreeMap::new();
    for h in houses {
        for u in h {
            let e = by_device.entry(u.device.as_str()).or_default();
            e.0 += 1;
            if u.used {
                e.1.push(u.share);
            }
        }
    }
    let mut out: Vec<DeviceUsage> = by_device
        .into_iter()
        .map(|(device, (n, mut shares))| DeviceUsage {
            device: device.to_string(),
            houses_with_device: n,
            houses_using: shares.len(),
            share: ShareSummary::of(&mut shares),
        })
        .collect();
    out.sort_by(|a, b| {
        b.houses_using
            .cmp(&a.houses_using)
            .then(b.share.median.total_cmp(&a.share.median))
            .then(a.device.cmp(&b.device))
    });
    out
}
