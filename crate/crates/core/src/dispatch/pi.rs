use num_complex::Complex64;

use crate::error::{invalid, Result};

use super::transfer::{BodePoint, Linearization};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiState {
    pub gains: PiGains,
    /// `Σ_{l ≤ t} e_l`.
    pub integral: f64,
}

impl PiState {
    pub fn new(gains: PiGains) -> Self {
        Self { gains, integral: 0.0 }
    }
}

/// `ζ_t = K_P e_t + K_I Σ_{l ≤ t} e_l`.
pub fn pi_step(e: f64, state: PiState) -> (f64, PiState) {
    let integral = state.integral + e;
    (state.gains.kp * e + state.gains.ki * integral, PiState { integral, ..state })
}

/// Gains read off a bode plot, with the features they came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiDesign {
    pub gains: PiGains,
    /// Frequency interval (rad/sample) of the flat band.
    pub flat_band: (f64, f64),
    /// Mean magnitude over the flat band, in dB.
    pub magnitude_db: f64,
    /// First frequency (rad/sample) where the phase crosses −45°.
    pub cutoff: f64,
}

/// Flat band: longest run of consecutive points whose magnitudes span less
/// than 1 dB. Cutoff: first −45° phase crossing, linearly interpolated in
/// log-frequency. With `m` the mean flat-band magnitude in dB, `K_P = 10^{-m/20}`
/// (unit proportional loop gain over the flat band) and `K_I = (w_c / 5) K_P`
/// with `w_c` in rad/sample; for one-minute samples this is `60 (w_c / 5) K_P`
/// with `w_c` in rad/s.
pub fn fit_pi_gains(bode: &[BodePoint]) -> Result<PiDesign> {
    if bode.len() < 2 {
        return Err(invalid("need at least two bode points"));
    }
    if bode.iter().any(|p| !p.magnitude_db.is_finite()) {
        return Err(invalid("gain vanishes: no flat band"));
    }
    let (mut best_lo, mut best_hi) = (0, 0);
    let mut lo = 0;
    for hi in 0..bode.len() {
        loop {
            let (mn, mx) = bode[lo..=hi]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.magnitude_db), b.max(p.magnitude_db)));
            if mx - mn < 1.0 {
                break;
            }
            lo += 1;
        }
        if hi - lo > best_hi - best_lo {
            best_lo = lo;
            best_hi = hi;
        }
    }
    let band = &bode[best_lo..=best_hi];
    let m = band.iter().map(|p| p.magnitude_db).sum::<f64>() / band.len() as f64;
    let mut cutoff = None;
    for w in bode.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.phase_deg + 45.0) * (b.phase_deg + 45.0) <= 0.0 && a.phase_deg != b.phase_deg {
            let s = (-45.0 - a.phase_deg) / (b.phase_deg - a.phase_deg);
            cutoff = Some(libm::exp(libm::log(a.freq) + s * (libm::log(b.freq) - libm::log(a.freq))));
            break;
        }
    }
    let cutoff = cutoff.ok_or_else(|| invalid("phase never crosses -45 degrees"))?;
    let kp = libm::pow(10.0, -m / 20.0);
    Ok(PiDesign { gains: PiGains { kp, ki: cutoff / 5.0 * kp }, flat_band: (band[0].freq, band[band.len() - 1].freq), magnitude_db: m, cutoff })
}

/// Closed-loop response `H = K G / (1 + K G)` at `z = e^{iw}`, with the PI
/// controller `K(z) = K_P + K_I / (1 - z⁻¹)`.
pub fn closed_loop_response(lin: &Linearization, gains: PiGains, w: f64) -> Result<Complex64> {
    let z = Complex64::from_polar(1.0, w);
    let k = gains.kp + gains.ki / (1.0 - 1.0 / z);
    let l = k * lin.gain(z)?;
    Ok(l / (1.0 + l))
}
