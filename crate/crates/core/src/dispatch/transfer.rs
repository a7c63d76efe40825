use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::kernel::{controlled_kernel, kernel_derivative, NominalLoadModel};
use super::markov::invariant_pmf;
use crate::distributions::SimplexVector;
use crate::error::Result;
use crate::linalg::{solve, Matrix};
use crate::numeric::rad_to_deg;

/// State-space form of the mean-field model linearised at `ζ`:
/// `A = P_ζᵀ`, `B_i = Σ_x π_ζ(x) E_ζ(x, x^i)`, `C_i = 𝒰(x^i) - π_ζ(𝒰)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub pi: SimplexVector,
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

pub fn linearize(model: &NominalLoadModel, zeta: f64) -> Result<Linearization> {
    let p = controlled_kernel(model, zeta);
    let pi = invariant_pmf(&p)?;
    let e = kernel_derivative(model, zeta);
    let b = e.left_mul(pi.as_slice());
    let mean: f64 = pi.iter().enumerate().map(|(x, &w)| w * model.state_power(x)).sum();
    let c = (0..model.num_states()).map(|x| model.state_power(x) - mean).collect();
    Ok(Linearization { pi, a: p.transpose(), b, c })
}

impl Linearization {
    /// `G(z) = C (zI - A)⁻¹ B`, evaluated with the deflated matrix
    /// `Ã = A - π 1ᵀ`. `B` sums to zero, and on that subspace `Ã` and `A`
    /// coincide, so the value is unchanged while `z = 1` stays regular.
    pub fn gain(&self, z: Complex64) -> Result<Complex64> {
        let n = self.b.len();
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let at = self.a[(i, j)] - self.pi[i];
                m[i * n + j] = Complex64::new(-at, 0.0);
            }
            m[i * n + i] += z;
        }
        let rhs = self.b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let v = solve(m, rhs)?;
        Ok(v.iter().zip(&self.c).map(|(vi, &ci)| vi * ci).sum())
    }

    pub fn dc_gain(&self) -> Result<f64> {
        Ok(self.gain(Complex64::new(1.0, 0.0))?.re)
    }

    /// Markov parameters `h_t = C A^{t-1} B` for `t = 1..=len`.
    pub fn impulse_response(&self, len: usize) -> Vec<f64> {
        let mut v = self.b.clone();
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(v.iter().zip(&self.c).map(|(a, b)| a * b).sum());
            v = self.a.mul_vec(&v);
        }
        out
    }
}

pub fn transfer_function(model: &NominalLoadModel, zeta: f64, z: Complex64) -> Result<Complex64> {
    linearize(model, zeta)?.gain(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodePoint {
    /// Radians per sample.
    pub freq: f64,
    /// `20 log10 |G|`; `-inf` when the gain vanishes.
    pub magnitude_db: f64,
    /// Unwrapped phase in degrees.
    pub phase_deg: f64,
}

/// Evaluates `G` at `z = e^{iw}` for each frequency (in increasing order) and
/// unwraps the phase so consecutive points differ by less than 180°.
pub fn bode_points(lin: &Linearization, freqs: &[f64]) -> Result<Vec<BodePoint>> {
    let mut out: Vec<BodePoint> = Vec::with_capacity(freqs.len());
    for &w in freqs {
        let g = lin.gain(Complex64::from_polar(1.0, w))?;
        let mag = g.norm();
        let magnitude_db = if mag > 0.0 { 20.0 * libm::log10(mag) } else { f64::NEG_INFINITY };
        let mut phase = rad_to_deg(libm::atan2(g.im, g.re));
        if let Some(prev) = out.last() {
            while phase - prev.phase_deg > 180.0 {
                phase -= 360.0;
            }
            while phase - prev.phase_deg < -180.0 {
                phase += 360.0;
            }
        }
        out.push(BodePoint { freq: w, magnitude_db, phase_deg: phase });
    }
    Ok(out)
}
