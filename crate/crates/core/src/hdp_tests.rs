use super::*;
use crate::distributions::dirichlet_mean;
use crate::numeric::ln_gamma;
use crate::rng::StreamSeed;

fn cycles(perm: &[usize]) -> usize {
    let mut seen = vec![false; perm.len()];
    let mut c = 0;
    for s in 0..perm.len() {
        if !seen[s] {
            c += 1;
            let mut i = s;
            while !seen[i] {
                seen[i] = true;
                i = perm[i];
            }
        }
    }
    c
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn stirling_examples() {
    assert_eq!(stirling_unsigned(0, 0).unwrap(), 1);
    assert_eq!(stirling_unsigned(1, 1).unwrap(), 1);
    for n in 1..10 {
        assert_eq!(stirling_unsigned(n, 0).unwrap(), 0);
    }
    assert_eq!(stirling_unsigned(3, 2).unwrap(), 3);
    assert!(stirling_unsigned(31, 2).is_err());
    assert_eq!(stirling_unsigned(30, 1).unwrap(), (1..30u128).product::<u128>());
}

#[test]
fn stirling_counts_permutations_by_cycles() {
    for n in 0..=6 {
        let mut by_cycles = vec![0u128; n + 1];
        for p in permutations(n) {
            by_cycles[cycles(&p)] += 1;
        }
        for (m, &c) in by_cycles.iter().enumerate() {
            assert_eq!(stirling_unsigned(n, m).unwrap(), c, "n={n} m={m}");
        }
    }
}

fn antoniak_pmf(n: usize, w: f64) -> Vec<f64> {
    (0..=n)
        .map(|m| {
            let s = stirling_unsigned(n, m).unwrap() as f64;
            if s == 0.0 {
                0.0
            } else {
                libm::exp(m as f64 * libm::log(w) + ln_gamma(w) - ln_gamma(w + n as f64) + libm::log(s))
            }
        })
        .collect()
}

#[test]
fn table_count_edge_cases() {
    let mut rng = StreamSeed::new(1).stream();
    assert_eq!(sample_m(0, 0.3, &mut rng).unwrap(), 0);
    for _ in 0..100 {
        assert_eq!(sample_m(1, 0.3, &mut rng).unwrap(), 1);
    }
    assert!(sample_m(3, 0.0, &mut rng).is_err());
}

#[test]
fn table_count_matches_antoniak_law() {
    let mut rng = StreamSeed::new(2).stream();
    let pmf = antoniak_pmf(5, 1.0);
    assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let draws = 1_000_000;
    let mut counts = [0usize; 6];
    for _ in 0..draws {
        counts[sample_m(5, 1.0, &mut rng).unwrap() as usize] += 1;
    }
    let tv: f64 = counts.iter().zip(&pmf).map(|(&c, &p)| (c as f64 / draws as f64 - p).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.005, "tv {tv}");
}

#[test]
fn large_table_counts_keep_their_moments() {
    let mut rng = StreamSeed::new(21).stream();
    let w = 2.0;
    for n in [5_000u64, 1_000_000_000_000] {
        // exact mean and variance of the Bernoulli sum; psi(2) = 1 - Euler's constant
        let (mean, var) = if n < 10_000 {
            (0..n).map(|i| w / (i as f64 + w)).fold((0.0, 0.0), |(m, v), p| (m + p, v + p * (1.0 - p)))
        } else {
            let psi = |x: f64| libm::log(x) - 0.5 / x;
            let mean = w * (psi(n as f64 + w) - 0.422_784_335_098_467_1);
            // Σ p² = w² (ψ'(w) − ψ'(n + w)), ψ'(2) = π²/6 − 1
            let sq = w * w * (core::f64::consts::PI.powi(2) / 6.0 - 1.0 - 1.0 / (n as f64 + w));
            (mean, mean - sq)
        };
        let draws = 20_000;
        let xs: Vec<f64> = (0..draws).map(|_| sample_m(n, w, &mut rng).unwrap() as f64).collect();
        let m = xs.iter().sum::<f64>() / draws as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (draws - 1) as f64;
        assert!((m - mean).abs() < 4.0 * libm::sqrt(var / draws as f64), "n {n}: {m} vs {mean}");
        assert!((v / var - 1.0).abs() < 0.05, "n {n}: {v} vs {var}");
    }
}

#[test]
fn rho_draws() {
    let mut rng = StreamSeed::new(3).stream();
    assert!(sample_rho(0.0, 50, &mut rng).unwrap().iter().all(|&r| r == 0));
    assert!(sample_rho(0.5, 0, &mut rng).unwrap().is_empty());
    assert!(sample_rho(1.0, 3, &mut rng).is_err());
    let n = 100_000;
    let r = sample_rho(0.5, n, &mut rng).unwrap();
    let mean = r.iter().sum::<u64>() as f64 / n as f64;
    // Geo(1/2) on {0, 1, …}: mean 1, variance 2.
    assert!((mean - 1.0).abs() < 3.0 * libm::sqrt(2.0 / n as f64));
}

#[test]
fn beta_posterior_mean() {
    let m = vec![vec![1, 0, 0], vec![1, 0, 1], vec![0, 0, 0]];
    let alpha: Vec<f64> = (0..3).map(|j| 1.0 + m.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    let mean = dirichlet_mean(&alpha).unwrap();
    // Column sums (2, 0, 1) plus γ/L = 1 give Dir(3, 1, 2).
    for (a, b) in mean.iter().zip([0.5, 1.0 / 6.0, 1.0 / 3.0]) {
        assert!((a - b).abs() < 1e-15);
    }
    let mut rng = StreamSeed::new(4).stream();
    let draws = 100_000;
    let mut acc = [0.0; 3];
    for _ in 0..draws {
        let b = sample_beta_posterior(&m, 3.0, &mut rng).unwrap();
        for k in 0..3 {
            acc[k] += b[k] / draws as f64;
        }
    }
    for k in 0..3 {
        assert!((acc[k] - mean[k]).abs() < 0.005);
    }
}

#[test]
fn pi_posterior_degenerate_and_prior() {
    let mut rng = StreamSeed::new(5).stream();
    let beta = SimplexVector::new(vec![0.0, 0.4, 0.6]).unwrap();
    let mut acc = [0.0; 3];
    let draws = 50_000;
    for _ in 0..draws {
        let p = sample_pi_posterior(&beta, 5.0, &[0, 0, 0], &mut rng).unwrap();
        assert_eq!(p[0], 0.0);
        for k in 0..3 {
            acc[k] += p[k] / draws as f64;
        }
    }
    assert!((acc[1] - 0.4).abs() < 0.005 && (acc[2] - 0.6).abs() < 0.005);
    let mut acc = 0.0;
    for _ in 0..draws {
        acc += sample_pi_posterior(&beta, 5.0, &[0, 3, 1], &mut rng).unwrap()[1] / draws as f64;
    }
    let expect = dirichlet_mean(&[0.0, 2.0 + 3.0, 3.0 + 1.0]).unwrap()[1];
    assert!((acc - expect).abs() < 0.005);
}

#[test]
fn sweep_degenerate_cases() {
    let mut rng = StreamSeed::new(6).stream();
    let hdp = WeakLimitHdp::from_prior(1, 1.0, 1.0, &mut rng).unwrap();
    let out = hdp_sweep(hdp.clone(), &[vec![0]], &mut rng).unwrap();
    assert_eq!(out.beta.as_slice(), &[1.0]);
    assert_eq!(out.pi[0].as_slice(), &[1.0]);
    let hdp = WeakLimitHdp::from_prior(4, 2.0, 3.0, &mut rng).unwrap();
    let out = hdp_sweep(hdp, &vec![vec![0; 4]; 4], &mut rng).unwrap();
    assert!(out.m.iter().flatten().all(|&m| m == 0));
    assert!(out.n.iter().flatten().all(|&n| n == 0));
    for row in out.normalized_rows().iter().enumerate() {
        assert_eq!(row.1[row.0], 0.0);
    }
}

#[test]
fn unused_states_shrink() {
    let mut rng = StreamSeed::new(7).stream();
    let l = 6;
    let mut n = vec![vec![0u64; l]; l];
    n[0][1] = 200;
    n[1][0] = 199;
    let mut hdp = WeakLimitHdp::from_prior(l, 1.0, 5.0, &mut rng).unwrap();
    let mut mass = vec![0.0; l];
    let sweeps = 3000;
    for _ in 0..sweeps {
        hdp = hdp_sweep(hdp, &n, &mut rng).unwrap();
        for k in 0..l {
            assert!(hdp.m[k].iter().zip(&hdp.n[k]).all(|(&m, &c)| m <= c && ((m == 0) == (c == 0))));
            mass[k] += hdp.beta[k] / sweeps as f64;
        }
        assert!((hdp.beta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(mass.iter().filter(|&&m| m > 0.01).count() <= 3, "{mass:?}");
}
