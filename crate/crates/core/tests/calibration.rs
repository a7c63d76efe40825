//! Slower statistical checks: sweep invariance against an exact posterior,
//! nonparametric recovery and the mean-field law of large numbers.

use nilm_core::dispatch::{controlled_rows, mean_field_step, tcl_nominal_model, MeanFieldState, TclConfig};
use nilm_core::distributions::{
    categorical_sample, dirichlet_sample, normal_sample, BetaHyper, DurationHyper, DurationLaw, DurationParams,
    GammaHyper, NegBinForm, NormalPrior, SimplexVector,
};
use nilm_core::hdp::{gibbs_sweep_hdphsmm, EmissionMixturePrior, HdpHsmmConfig, HdpHsmmState};
use nilm_core::hmm::{gibbs_sweep_hmm, HmmParams, HmmPrior, HmmState};
use nilm_core::hsmm::{simulate_hsmm, HsmmParams, HsmmPrior};
use nilm_core::numeric::{ln_gamma, logsumexp};
use nilm_core::rng::StreamSeed;

const Y: [f64; 3] = [0.2, 1.9, 1.1];
const SIGMA2: f64 = 0.5;
const MU: [f64; 2] = [0.0, 1.5];
const TAU2: f64 = 1.0;

fn ln_normal(x: f64, m: f64, v: f64) -> f64 {
    -0.5 * ((x - m) * (x - m) / v + (2.0 * std::f64::consts::PI * v).ln())
}

/// Posterior of one state's mean given its observations: `(mean, var)`.
fn theta_post(j: usize, ys: &[f64]) -> (f64, f64) {
    let prec = 1.0 / TAU2 + ys.len() as f64 / SIGMA2;
    let mean = (MU[j] / TAU2 + ys.iter().sum::<f64>() / SIGMA2) / prec;
    (mean, 1.0 / prec)
}

/// `log p(x, y)` with `θ` and `π` integrated out, uniform `p(x_1)`, `Dir(1, 1)` rows.
fn collapsed(x: &[usize]) -> f64 {
    let mut lp = -(2f64).ln();
    for j in 0..2 {
        let mut n = [0.0; 2];
        for w in x.windows(2).filter(|w| w[0] == j) {
            n[w[1]] += 1.0;
        }
        lp += ln_gamma(2.0) - ln_gamma(2.0 + n[0] + n[1]) + ln_gamma(1.0 + n[0]) + ln_gamma(1.0 + n[1]);
        // sequential predictive of the observations in state j
        let mut seen = Vec::new();
        for (t, &s) in x.iter().enumerate() {
            if s == j {
                let (m, v) = theta_post(j, &seen);
                lp += ln_normal(Y[t], m, v + SIGMA2);
                seen.push(Y[t]);
            }
        }
    }
    lp
}

fn paths() -> Vec<Vec<usize>> {
    (0..8).map(|c| (0..3).map(|t| (c >> (2 - t)) & 1).collect()).collect()
}

#[test]
fn hmm_sweep_leaves_exact_posterior_invariant() {
    let paths = paths();
    let lw: Vec<f64> = paths.iter().map(|x| collapsed(x)).collect();
    let z = logsumexp(&lw);
    let px: Vec<f64> = lw.iter().map(|l| (l - z).exp()).collect();
    let exact_theta: Vec<f64> = (0..2)
        .map(|j| {
            paths
                .iter()
                .zip(&px)
                .map(|(x, p)| {
                    let ys: Vec<f64> = x.iter().zip(Y).filter(|(s, _)| **s == j).map(|(_, y)| y).collect();
                    p * theta_post(j, &ys).0
                })
                .sum()
        })
        .collect();

    let prior = HmmPrior::shared_alpha(vec![1.0, 1.0], MU.iter().map(|&m| NormalPrior::new(m, TAU2).unwrap()).collect());
    let mut rng = StreamSeed::new(41).stream();
    let draws = 400_000;
    let mut freq = [0.0; 8];
    let mut theta_sum = [0.0; 2];
    let mut theta_sq = [0.0; 2];
    for _ in 0..draws {
        let c = categorical_sample(&px, &mut rng);
        let x = paths[c].clone();
        let theta: Vec<f64> = (0..2)
            .map(|j| {
                let ys: Vec<f64> = x.iter().zip(Y).filter(|(s, _)| **s == j).map(|(_, y)| y).collect();
                let (m, v) = theta_post(j, &ys);
                normal_sample(m, v, &mut rng)
            })
            .collect();
        let pi: Vec<SimplexVector> = (0..2)
            .map(|j| {
                let mut a = [1.0, 1.0];
                for w in x.windows(2).filter(|w| w[0] == j) {
                    a[w[1]] += 1.0;
                }
                dirichlet_sample(&a, &mut rng).unwrap()
            })
            .collect();
        let params = HmmParams::new(pi, theta, SIGMA2, prior.clone()).unwrap();
        let next = gibbs_sweep_hmm(HmmState { x, params }, &Y, &mut rng).unwrap();
        let k = next.x.iter().fold(0, |acc, &s| acc * 2 + s);
        freq[k] += 1.0 / draws as f64;
        for j in 0..2 {
            theta_sum[j] += next.params.theta[j];
            theta_sq[j] += next.params.theta[j] * next.params.theta[j];
        }
    }
    let tv: f64 = freq.iter().zip(&px).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.005, "path law moved by {tv}");
    for j in 0..2 {
        let m = theta_sum[j] / draws as f64;
        let se = ((theta_sq[j] / draws as f64 - m * m) / draws as f64).sqrt();
        assert!((m - exact_theta[j]).abs() < 4.0 * se, "theta_{j}: {m} vs {}", exact_theta[j]);
    }
}

fn hdp_config() -> HdpHsmmConfig {
    let hyper = DurationHyper {
        phi: BetaHyper { a: 1.0, b: 1.0 },
        lambda: GammaHyper { shape: 2.0, rate: 0.1 },
        nb_p: BetaHyper { a: 2.0, b: 2.0 },
        r: 2,
    };
    HdpHsmmConfig {
        sigma2: 1.0,
        form: NegBinForm::Standard,
        max_duration: Some(80),
        prior: EmissionMixturePrior {
            weights: SimplexVector::uniform(1),
            components: vec![NormalPrior::new(5.0, 50.0).unwrap()],
            duration_weights: SimplexVector::uniform(1),
            duration_components: vec![hyper],
        },
    }
}

fn three_state_data(t_len: usize, seed: u64) -> Vec<f64> {
    let law = |l: f64| DurationLaw::Mixture { params: DurationParams { phi: 1.0, lambda: l, r: 2, nb_p: 0.5 }, form: NegBinForm::Standard };
    let pi = (0..3)
        .map(|a| SimplexVector::from_unnormalized((0..3).map(|b| if a == b { 0.0 } else { 1.0 }).collect()).unwrap())
        .collect();
    let prior = HsmmPrior {
        emission: vec![NormalPrior::new(0.0, 1.0).unwrap(); 3],
        alpha: vec![vec![1.0; 3]; 3],
        duration: vec![hdp_config().prior.duration_components[0]; 3],
    };
    let truth = HsmmParams::new(pi, vec![0.0, 5.0, 10.0], 1.0, vec![law(12.0), law(20.0), law(8.0)], prior).unwrap();
    simulate_hsmm(&truth, t_len, &mut StreamSeed::new(seed).stream()).unwrap().1
}

fn used_state_counts(l: usize, gamma: f64, y: &[f64], burn: usize, keep: usize, seed: u64) -> Vec<usize> {
    let cfg = hdp_config();
    let mut rng = StreamSeed::new(seed).stream();
    let mut s = HdpHsmmState::from_prior(&cfg, l, gamma, 4.0, y, &mut rng).unwrap();
    let mut out = Vec::with_capacity(keep);
    for it in 0..burn + keep {
        s = gibbs_sweep_hdphsmm(s, &cfg, y, &mut rng).unwrap();
        assert!(s.path.is_valid(y.len()));
        if it >= burn {
            out.push(s.used_states());
        }
    }
    out
}

#[test]
fn hdp_hsmm_recovers_three_states() {
    let y = three_state_data(400, 5);
    let counts = used_state_counts(10, 2.0, &y, 300, 2000, 6);
    let mut hist = [0usize; 11];
    counts.iter().for_each(|&c| hist[c] += 1);
    let mode = (0..11).max_by_key(|&k| (hist[k], std::cmp::Reverse(k))).unwrap();
    assert_eq!(mode, 3, "{hist:?}");
}

/// Mean and a batch-means 95% half-width.
fn interval(xs: &[usize]) -> (f64, f64) {
    let batches = 20;
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| xs[b * size..(b + 1) * size].iter().sum::<usize>() as f64 / size as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (batches - 1) as f64;
    (m, 2.093 * (var / batches as f64).sqrt())
}

#[test]
fn weak_limit_truncation_is_stable() {
    let y = three_state_data(400, 8);
    let ivs: Vec<(f64, f64)> = [5, 10, 20].iter().map(|&l| interval(&used_state_counts(l, 1.0, &y, 200, 1000, 9 + l as u64))).collect();
    for a in &ivs {
        for b in &ivs {
            assert!((a.0 - b.0).abs() <= a.1 + b.1 + 1e-9, "{ivs:?}");
        }
    }
}

#[test]
fn mean_field_matches_load_population() {
    let m = tcl_nominal_model(&TclConfig::default()).unwrap();
    let nn = m.num_uncontrollable();
    let start = m.index(1, nn / 2);
    let n_loads = 10_000;
    let zeta = 0.4;
    let rows = controlled_rows(&m, zeta);
    let mut mf = MeanFieldState::new(&m, SimplexVector::point_mass(m.num_states(), start)).unwrap();
    let mut rng = StreamSeed::new(12).stream();
    let mut states = vec![start; n_loads];
    for _ in 0..100 {
        mf = mean_field_step(&mf, &m, zeta).unwrap();
        for x in states.iter_mut() {
            let u = categorical_sample(rows.row(*x), &mut rng);
            let k = categorical_sample(m.q0().row(*x), &mut rng);
            *x = m.index(u, k);
        }
    }
    let mut emp = vec![0.0; m.num_states()];
    states.iter().for_each(|&x| emp[x] += 1.0 / n_loads as f64);
    let sup = emp.iter().zip(mf.mu.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(sup < 0.02, "{sup}");
}


