//! Reference computations that share no code with the samplers: series and
//! quadrature for Pólya-Gamma moments, inverse-CDF quadrature for the
//! truncated Beta, brute-force enumeration of latent configurations, and a
//! random-walk Metropolis sampler on marginal pseudo-posteriors.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `E[PG(b, c)]` from the infinite-convolution representation
/// `ω = (1/2π²) Σ g_k / ((k − 1/2)² + c²/4π²)`, summing `terms` terms and
/// closing the tail with its integral.
pub fn pg_mean_series(b: f64, c: f64, terms: usize) -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let d = c * c / (4.0 * pi2);
    let mut s = 0.0;
    for k in 1..=terms {
        let h = k as f64 - 0.5;
        s += 1.0 / (h * h + d);
    }
    // Σ_{k>K} 1/((k−1/2)² + d) ≈ ∫_K^∞ dx/(x² + d).
    let k = terms as f64;
    s += if d > 0.0 {
        (std::f64::consts::FRAC_PI_2 - (k / d.sqrt()).atan()) / d.sqrt()
    } else {
        1.0 / k
    };
    b * s / (2.0 * pi2)
}

/// `Var[PG(b, c)] = (b / 4π⁴) Σ 1/((k − 1/2)² + c²/4π²)²`, same truncation.
pub fn pg_variance_series(b: f64, c: f64, terms: usize) -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let d = c * c / (4.0 * pi2);
    let mut s = 0.0;
    for k in 1..=terms {
        let h = k as f64 - 0.5;
        let t = h * h + d;
        s += 1.0 / (t * t);
    }
    let k = terms as f64;
    s += 1.0 / (3.0 * k * k * k);
    b * s / (4.0 * pi2 * pi2)
}

/// Density of PG(1, 0) by its alternating series.
fn pg1_density(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for n in 0..200 {
        let a = (2 * n + 1) as f64;
        let term = a / (2.0 * std::f64::consts::PI * x * x * x).sqrt() * (-a * a / (8.0 * x)).exp();
        if n % 2 == 0 {
            s += term;
        } else {
            s -= term;
        }
        if term < 1e-300 {
            break;
        }
    }
    s
}

/// `E[PG(1, c)]` by integrating `x · cosh(c/2) e^{−c²x/2} f(x; 1, 0)` with
/// Simpson's rule on a log-spaced grid.
pub fn pg1_mean_quadrature(c: f64) -> f64 {
    let (lo, hi, m) = (1e-4f64.ln(), 60f64.ln(), 200_000usize);
    let h = (hi - lo) / m as f64;
    let f = |t: f64| {
        let x = t.exp();
        let dens = (0.5 * c).cosh() * (-0.5 * c * c * x).exp() * pg1_density(x);
        x * dens * x
    };
    let mut s = f(lo) + f(hi);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

/// Mean of Beta(a, b) restricted to `[0.5, 1)` by averaging the truncated
/// quantile function over a midpoint grid of `m` probabilities.
pub fn truncated_beta_mean(a: f64, b: f64, m: usize) -> f64 {
    let dist = Beta::new(a, b).unwrap();
    let lo = dist.cdf(0.5);
    let mass = 1.0 - lo;
    let mut s = 0.0;
    for i in 0..m {
        let u = lo + mass * (i as f64 + 0.5) / m as f64;
        s += invert(|x| dist.cdf(x), u);
    }
    s / m as f64
}

fn invert<F: Fn(f64) -> f64>(cdf: F, u: f64) -> f64 {
    let (mut lo, mut hi) = (0.5f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `ln ∫_{0.5}^{1} s^{a−1} (1−s)^{b−1} ds`.
pub fn ln_truncated_beta_integral(a: f64, b: f64) -> f64 {
    let ln_b = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    ln_b + (1.0 - beta_reg(a, b, 0.5)).ln()
}

fn normalize_log(logs: &[f64]) -> Vec<f64> {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Marginal `P(Ỹ_i = 1 | data)` for the binary misreport model with `β`
/// fixed and `(S_e, S_p)` integrated against their truncated Beta priors.
pub fn binary_latent_marginals(eta: &[f64], y: &[u8], w: &[f64], hyper: [f64; 4]) -> Vec<f64> {
    let n = y.len();
    let [ae, be, ap, bp] = hyper;
    let mut logs = Vec::with_capacity(1 << n);
    for cfg in 0..(1usize << n) {
        let mut l = 0.0;
        let mut t = [[0.0; 2]; 2];
        for i in 0..n {
            let truth = (cfg >> i) & 1;
            l += w[i] * if truth == 1 { ln_sigmoid(eta[i]) } else { ln_sigmoid(-eta[i]) };
            t[y[i] as usize][truth] += w[i];
        }
        l += ln_truncated_beta_integral(ae + t[1][1], be + t[0][1]);
        l += ln_truncated_beta_integral(ap + t[0][0], bp + t[1][0]);
        logs.push(l);
    }
    let p = normalize_log(&logs);
    (0..n)
        .map(|i| (0..p.len()).filter(|c| (c >> i) & 1 == 1).map(|c| p[c]).sum())
        .collect()
}

/// Inputs of the two-equation enumeration oracle. `eta1_base[r]` is the
/// outcome linear predictor of subset unit `r` without the citizenship term.
pub struct CovariateToy {
    pub eta2: Vec<f64>,
    pub x_obs: Vec<u8>,
    pub w: Vec<f64>,
    pub subset_rows: Vec<usize>,
    pub y: Vec<u8>,
    pub w_outcome: Vec<f64>,
    pub eta1_base: Vec<f64>,
    pub beta_c: f64,
}

/// Marginal `P(x̃_ci = 1 | data)` by enumerating all latent vectors. With
/// `rates = Some((S_e, S_p))` the rates are fixed; otherwise they are
/// integrated against truncated Beta priors with hyperparameters `hyper`.
pub fn covariate_latent_marginals(toy: &CovariateToy, rates: Option<(f64, f64)>, hyper: [f64; 4]) -> Vec<f64> {
    let n = toy.x_obs.len();
    let mut logs = Vec::with_capacity(1 << n);
    for cfg in 0..(1usize << n) {
        let truth = |i: usize| (cfg >> i) & 1;
        let mut l = 0.0;
        let mut t = [[0.0; 2]; 2];
        for i in 0..n {
            let x = truth(i);
            l += toy.w[i] * if x == 1 { ln_sigmoid(toy.eta2[i]) } else { ln_sigmoid(-toy.eta2[i]) };
            t[toy.x_obs[i] as usize][x] += toy.w[i];
        }
        match rates {
            Some((se, sp)) => {
                l += t[1][1] * se.ln() + t[0][1] * (1.0 - se).ln();
                l += t[0][0] * sp.ln() + t[1][0] * (1.0 - sp).ln();
            }
            None => {
                let [ae, be, ap, bp] = hyper;
                l += ln_truncated_beta_integral(ae + t[1][1], be + t[0][1]);
                l += ln_truncated_beta_integral(ap + t[0][0], bp + t[1][0]);
            }
        }
        for (r, &i) in toy.subset_rows.iter().enumerate() {
            let eta = toy.eta1_base[r] + toy.beta_c * truth(i) as f64;
            let ll = if toy.y[r] == 1 { ln_sigmoid(eta) } else { ln_sigmoid(-eta) };
            l += toy.w_outcome[r] * ll;
        }
        logs.push(l);
    }
    let p = normalize_log(&logs);
    (0..n)
        .map(|i| (0..p.len()).filter(|c| (c >> i) & 1 == 1).map(|c| p[c]).sum())
        .collect()
}

/// Marginal `P(Ỹ_i = k | data)` for the multiclass model with fixed class
/// probabilities `probs[i][k]`, reporting columns integrated against
/// Dirichlet(`alpha`) priors, optionally restricted to `r_kk ≥ 0.5`.
pub fn multiclass_latent_marginals(
    probs: &[Vec<f64>],
    y: &[usize],
    w: &[f64],
    alpha: f64,
    diagonal_dominance: bool,
) -> Vec<Vec<f64>> {
    let n = y.len();
    let k = probs[0].len();
    let total = k.pow(n as u32);
    let mut logs = Vec::with_capacity(total);
    for cfg in 0..total {
        let classes: Vec<usize> = (0..n).map(|i| (cfg / k.pow(i as u32)) % k).collect();
        let mut l = 0.0;
        let mut counts = vec![vec![0.0; k]; k];
        for i in 0..n {
            l += w[i] * probs[i][classes[i]].ln();
            counts[classes[i]][y[i]] += w[i];
        }
        for (truth, col) in counts.iter().enumerate() {
            let post: Vec<f64> = col.iter().map(|c| alpha + c).collect();
            let sum: f64 = post.iter().sum();
            l += post.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(sum);
            if diagonal_dominance {
                let a = post[truth];
                l += (1.0 - beta_reg(a, sum - a, 0.5)).ln();
            }
        }
        logs.push(l);
    }
    let p = normalize_log(&logs);
    let mut out = vec![vec![0.0; k]; n];
    for (cfg, pc) in p.iter().enumerate() {
        for (i, row) in out.iter_mut().enumerate() {
            row[(cfg / k.pow(i as u32)) % k] += pc;
        }
    }
    out
}

/// Log pseudo-posterior of the weighted logistic model with a
/// `N(0, prior_var I)` prior.
pub fn ln_post_logistic(beta: &[f64], x: &[Vec<f64>], y: &[u8], w: &[f64], prior_var: f64) -> f64 {
    let mut l = -beta.iter().map(|b| b * b).sum::<f64>() / (2.0 * prior_var);
    for i in 0..y.len() {
        let eta: f64 = x[i].iter().zip(beta).map(|(a, b)| a * b).sum();
        l += w[i] * if y[i] == 1 { ln_sigmoid(eta) } else { ln_sigmoid(-eta) };
    }
    l
}

/// Log pseudo-posterior of `(β, S_e, S_p)` in the binary misreport model with
/// the latent truth summed out unit by unit; uniform priors on `[0.5, 1)`.
pub fn ln_post_misreport(theta: &[f64], x: &[Vec<f64>], y: &[u8], w: &[f64], prior_var: f64) -> f64 {
    let p = theta.len() - 2;
    let (beta, se, sp) = (&theta[..p], theta[p], theta[p + 1]);
    if !(0.5..1.0).contains(&se) || !(0.5..1.0).contains(&sp) {
        return f64::NEG_INFINITY;
    }
    let mut l = -beta.iter().map(|b| b * b).sum::<f64>() / (2.0 * prior_var);
    for i in 0..y.len() {
        let eta: f64 = x[i].iter().zip(beta).map(|(a, b)| a * b).sum();
        let (r1, r0) = if y[i] == 1 { (se, 1.0 - sp) } else { (1.0 - se, sp) };
        let a = w[i] * (ln_sigmoid(eta) + r1.ln());
        let b = w[i] * (ln_sigmoid(-eta) + r0.ln());
        let m = a.max(b);
        l += m + ((a - m).exp() + (b - m).exp()).ln();
    }
    l
}

/// Adaptive random-walk Metropolis: the proposal scale of each coordinate is
/// tuned during burn-in toward a 0.3 acceptance rate, then frozen.
pub fn random_walk_metropolis<F: Fn(&[f64]) -> f64>(
    target: F,
    init: Vec<f64>,
    scale: f64,
    burn_in: usize,
    draws: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d = init.len();
    let mut cur = init;
    let mut lp = target(&cur);
    let mut steps = vec![scale; d];
    let mut accepted = vec![0usize; d];
    let mut out = Vec::with_capacity(draws);
    for it in 0..burn_in + draws {
        for j in 0..d {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let mut prop = cur.clone();
            prop[j] += steps[j] * z;
            let lq = target(&prop);
            if rng.random::<f64>().ln() < lq - lp {
                cur = prop;
                lp = lq;
                accepted[j] += 1;
            }
        }
        if it < burn_in && (it + 1) % 100 == 0 {
            for j in 0..d {
                let rate = accepted[j] as f64 / 100.0;
                steps[j] *= (rate / 0.3).clamp(0.5, 2.0);
                accepted[j] = 0;
            }
        }
        if it >= burn_in {
            out.push(cur.clone());
        }
    }
    out
}

/// `P(class k)` under a multinomial logit with the last class as reference.
pub fn softmax_last_reference(eta_free: &[f64]) -> Vec<f64> {
    let mut e: Vec<f64> = eta_free.to_vec();
    e.push(0.0);
    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = e.iter().map(|v| (v - m).exp()).sum();
    e.iter().map(|v| (v - m).exp() / z).collect()
}

pub fn logit_inverse(x: f64) -> f64 {
    sigmoid(x)
}
