use alloc::vec::Vec;

use crate::distributions::SimplexVector;
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::numeric::logsumexp;

/// A load's nominal chain on `X = X_u × X_n`. State `x = u · |X_n| + n`.
/// `r0` has one row over `X_u` per full state, `q0` one row over `X_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalLoadModel {
    r0: Matrix,
    q0: Matrix,
    power: Vec<f64>,
}

fn check_rows(m: &Matrix, what: &str) -> Result<()> {
    for i in 0..m.rows() {
        SimplexVector::new(m.row(i).to_vec()).map_err(|_| invalid(&alloc::format!("{what} row {i} is not a probability vector")))?;
    }
    Ok(())
}

impl NominalLoadModel {
    pub fn new(r0: Matrix, q0: Matrix, power: Vec<f64>) -> Result<Self> {
        let n_u = power.len();
        if n_u == 0 || q0.cols() == 0 {
            return Err(invalid("state spaces must be nonempty"));
        }
        let n = n_u * q0.cols();
        for (found, expected) in [(r0.rows(), n), (q0.rows(), n), (r0.cols(), n_u)] {
            if found != expected {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        if power.iter().any(|p| !p.is_finite()) {
            return Err(invalid("power map must be finite"));
        }
        check_rows(&r0, "R0")?;
        check_rows(&q0, "Q0")?;
        Ok(Self { r0, q0, power })
    }

    pub fn num_states(&self) -> usize {
        self.r0.rows()
    }

    pub fn num_controllable(&self) -> usize {
        self.power.len()
    }

    pub fn num_uncontrollable(&self) -> usize {
        self.q0.cols()
    }

    pub fn index(&self, u: usize, n: usize) -> usize {
        u * self.num_uncontrollable() + n
    }

    pub fn split(&self, x: usize) -> (usize, usize) {
        (x / self.num_uncontrollable(), x % self.num_uncontrollable())
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    /// `𝒰(x_u)` of the full state `x`.
    pub fn state_power(&self, x: usize) -> f64 {
        self.power[self.split(x).0]
    }

    pub fn r0(&self) -> &Matrix {
        &self.r0
    }

    pub fn q0(&self) -> &Matrix {
        &self.q0
    }

    /// `P_0(x, x') = R_0(x, x'_u) Q_0(x, x'_n)`.
    pub fn nominal_kernel(&self) -> Matrix {
        let n = self.num_states();
        let nn = self.num_uncontrollable();
        let mut p = Matrix::zeros(n, n);
        for x in 0..n {
            for u in 0..self.num_controllable() {
                for k in 0..nn {
                    p[(x, u * nn + k)] = self.r0[(x, u)] * self.q0[(x, k)];
                }
            }
        }
        p
    }
}

/// `R_ζ(x, ·) ∝ R_0(x, ·) exp(ζ 𝒰(·))`, normalised by log-sum-exp. The power
/// map is shifted by its minimum, which cancels in the normaliser; when the
/// tilt vanishes the nominal row is returned unchanged.
pub(crate) fn tilt_row(r0: &[f64], power: &[f64], zeta: f64, out: &mut [f64]) {
    let umin = power.iter().copied().fold(f64::INFINITY, f64::min);
    let h: Vec<f64> = power.iter().map(|&u| zeta * (u - umin)).collect();
    if h.iter().all(|&v| v == 0.0) {
        out.copy_from_slice(r0);
        return;
    }
    let logits: Vec<f64> = r0.iter().zip(&h).map(|(&r, &v)| libm::log(r) + v).collect();
    let lse = logsumexp(&logits);
    for (o, &l) in out.iter_mut().zip(&logits) {
        *o = libm::exp(l - lse);
    }
}

/// Every row of `R_ζ`, one per full state.
pub fn controlled_rows(model: &NominalLoadModel, zeta: f64) -> Matrix {
    let n = model.num_states();
    let mut r = Matrix::zeros(n, model.num_controllable());
    for x in 0..n {
        tilt_row(model.r0.row(x), &model.power, zeta, r.row_mut(x));
    }
    r
}

/// `P_ζ(x, x') = R_ζ(x, x'_u) Q_0(x, x'_n)`.
pub fn controlled_kernel(model: &NominalLoadModel, zeta: f64) -> Matrix {
    let r = controlled_rows(model, zeta);
    let n = model.num_states();
    let nn = model.num_uncontrollable();
    let mut p = Matrix::zeros(n, n);
    for x in 0..n {
        for u in 0..model.num_controllable() {
            for k in 0..nn {
                p[(x, u * nn + k)] = r[(x, u)] * model.q0[(x, k)];
            }
        }
    }
    p
}

/// `E_ζ = dP_ζ/dζ`: `P_ζ(x, x') (𝒰(x'_u) - Σ_u R_ζ(x, u) 𝒰(u))`.
pub fn kernel_derivative(model: &NominalLoadModel, zeta: f64) -> Matrix {
    let r = controlled_rows(model, zeta);
    let p = controlled_kernel(model, zeta);
    let n = model.num_states();
    let mut e = Matrix::zeros(n, n);
    for x in 0..n {
        let mean: f64 = r.row(x).iter().zip(&model.power).map(|(a, b)| a * b).sum();
        for x2 in 0..n {
            e[(x, x2)] = p[(x, x2)] * (model.state_power(x2) - mean);
        }
    }
    e
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub mu: SimplexVector,
    /// Average power per load.
    pub y: f64,
    pub zeta: f64,
}

impl MeanFieldState {
    pub fn new(model: &NominalLoadModel, mu: SimplexVector) -> Result<Self> {
        if mu.len() != model.num_states() {
            return Err(Error::DimensionMismatch { expected: model.num_states(), found: mu.len() });
        }
        let y = mu.iter().enumerate().map(|(x, &m)| m * model.state_power(x)).sum();
        Ok(Self { mu, y, zeta: 0.0 })
    }
}

/// `μ' = μ P_ζ`, `y' = Σ_x μ'(x) 𝒰(x)`.
pub fn mean_field_step(state: &MeanFieldState, model: &NominalLoadModel, zeta: f64) -> Result<MeanFieldState> {
    let p = controlled_kernel(model, zeta);
    step_with_kernel(state, model, &p, zeta)
}

pub(crate) fn step_with_kernel(state: &MeanFieldState, model: &NominalLoadModel, p: &Matrix, zeta: f64) -> Result<MeanFieldState> {
    let mu = SimplexVector::from_unnormalized(p.left_mul(state.mu.as_slice()).into_iter().map(|v| v.max(0.0)).collect())?;
    let mut next = MeanFieldState::new(model, mu)?;
    next.zeta = zeta;
    Ok(next)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::vec;

    /// Two controllable states and two temperature levels.
    pub(crate) fn small_model(power: [f64; 2]) -> NominalLoadModel {
        let r0 = Matrix::from_rows(&[vec![0.7, 0.3], vec![0.2, 0.8], vec![0.6, 0.4], vec![0.1, 0.9]]).unwrap();
        let q0 = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.5, 0.5], vec![0.3, 0.7], vec![0.05, 0.95]]).unwrap();
        NominalLoadModel::new(r0, q0, power.to_vec()).unwrap()
    }

    #[test]
    fn zero_signal_recovers_nominal_kernel() {
        let m = small_model([0.0, 3.0]);
        assert_eq!(controlled_kernel(&m, 0.0), m.nominal_kernel());
    }

    #[test]
    fn constant_power_is_not_tilted() {
        let m = small_model([2.0, 2.0]);
        for z in [-5.0, 0.3, 4.0] {
            assert_eq!(controlled_kernel(&m, z), m.nominal_kernel());
        }
    }

    #[test]
    fn power_offset_cancels_exactly() {
        let a = small_model([1.0, 4.0]);
        let b = small_model([8.0, 11.0]);
        for z in [-2.0, -0.5, 0.7, 3.0] {
            assert_eq!(controlled_kernel(&a, z), controlled_kernel(&b, z));
        }
    }

    #[test]
    fn rows_stay_stochastic() {
        let m = small_model([0.0, 1.5]);
        for i in 0..=20 {
            let z = -5.0 + 0.5 * i as f64;
            let p = controlled_kernel(&m, z);
            for x in 0..4 {
                assert!(SimplexVector::new(p.row(x).to_vec()).is_ok());
            }
        }
    }

    #[test]
    fn large_signal_saturates() {
        let m = small_model([0.0, 1.0]);
        let r = controlled_rows(&m, 60.0);
        for x in 0..4 {
            assert!(r[(x, 1)] > 1.0 - 1e-15);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let m = small_model([0.5, 2.0]);
        for z in [-1.0, 0.0, 0.8] {
            let e = kernel_derivative(&m, z);
            let h = 1e-6;
            let hi = controlled_kernel(&m, z + h);
            let lo = controlled_kernel(&m, z - h);
            for x in 0..4 {
                assert!(e.row(x).iter().sum::<f64>().abs() < 1e-15);
                for x2 in 0..4 {
                    let fd = (hi[(x, x2)] - lo[(x, x2)]) / (2.0 * h);
                    assert!((fd - e[(x, x2)]).abs() < 1e-7);
                }
            }
        }
        assert_eq!(kernel_derivative(&small_model([1.0, 1.0]), 0.4), Matrix::zeros(4, 4));
    }

    #[test]
    fn point_mass_under_deterministic_kernel() {
        let r0 = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let q0 = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let m = NominalLoadModel::new(r0, q0, vec![0.0, 5.0]).unwrap();
        let s = MeanFieldState::new(&m, SimplexVector::point_mass(2, 0)).unwrap();
        let s = mean_field_step(&s, &m, 0.0).unwrap();
        assert_eq!(s.mu.as_slice(), &[0.0, 1.0]);
        assert_eq!(s.y, 5.0);
    }
}
