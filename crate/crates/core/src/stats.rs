//! Estimators over distance ledgers: Birkhoff averages, mean-ergodic decay,
//! correlation decay, quasi-independence sums, hit profiles, exceedance sets
//! and logarithm-law slope fits.
//!
//! Every Monte Carlo quantity carries a standard error. Fits are ordinary
//! least squares with their RMS residual reported.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{hits_on_grid, prefix_minima, DistanceLedger};
use crate::hyperbolic::CurveMeasure;

/// A spherical observable: the indicator of a target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Indicator {
    /// The whole space.
    Full,
    /// Closed Teichmüller ball about the ledger's center.
    Ball { radius: f64 },
}

impl Indicator {
    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        match *self {
            Indicator::Full => 1.0,
            Indicator::Ball { radius } => {
                if d <= radius {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Ordinary least squares fit `y ≈ slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Standard error of the slope (NaN with fewer than three points).
    pub slope_se: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let slope_se = if x.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit { slope, intercept, residual: (sse / n).sqrt(), slope_se }
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// `Q_KS(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Powers of two `2¹, 2², …` not exceeding `n`.
pub fn dyadic_grid(n: usize) -> Vec<usize> {
    (1..usize::BITS).map(|k| 1usize << k).take_while(|&m| m <= n).collect()
}

/// `β_n(f)(ξ) = (f(g_1ξ) + … + f(g_nξ)) / n` for one ledger.
pub fn birkhoff_average(ledger: &DistanceLedger, f: &Indicator, n: usize) -> f64 {
    ledger.distances()[..n].iter().map(|&d| f.eval(d)).sum::<f64>() / n as f64
}

/// [`birkhoff_average`] over a sample of trajectories.
pub fn birkhoff_averages(ledgers: &[DistanceLedger], f: &Indicator, n: usize) -> Vec<f64> {
    ledgers.iter().map(|l| birkhoff_average(l, f, n)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub n_grid: Vec<usize>,
    /// Monte Carlo `‖β_n(f) − ⟨f,1⟩‖₂`.
    pub l2_error: Vec<f64>,
    pub l2_error_se: Vec<f64>,
    /// Slope of `log L2_error` against `log n`.
    pub exponent: f64,
    pub residual: f64,
}

/// Root-mean-square deviation of Birkhoff averages from `mean`, with standard errors.
pub fn l2_errors(averages_per_n: &[Vec<f64>], mean: f64) -> (Vec<f64>, Vec<f64>) {
    averages_per_n
        .iter()
        .map(|betas| {
            let sq: Vec<f64> = betas.iter().map(|b| (b - mean).powi(2)).collect();
            let (ms, ms_se) = mean_se(&sq);
            let rms = ms.sqrt();
            let se = if rms > 0.0 { ms_se / (2.0 * rms) } else { 0.0 };
            (rms, se)
        })
        .unzip()
}

/// Mean-ergodic decay of a ball indicator of exact measure `mu`.
///
/// `averages_per_n[k]` holds the per-sample `β_{n_k}(f)`.
pub fn ergodic_decay_from_averages(n_grid: &[usize], averages_per_n: &[Vec<f64>], mu: f64) -> Result<ErgodicReport> {
    if mu * (1.0 - mu) <= 0.0 {
        return Err(Error::Degenerate("constant observable has no ergodic decay".into()));
    }
    if n_grid.len() < 2 {
        return Err(Error::Degenerate("need at least two grid points".into()));
    }
    let (l2_error, l2_error_se) = l2_errors(averages_per_n, mu);
    let x: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = l2_error.iter().map(|e| e.ln()).collect();
    let fit = ols(&x, &y);
    Ok(ErgodicReport { n_grid: n_grid.to_vec(), l2_error, l2_error_se, exponent: fit.slope, residual: fit.residual })
}

pub fn ergodic_decay(ledgers: &[DistanceLedger], f: &Indicator, mu: f64, n_grid: &[usize]) -> Result<ErgodicReport> {
    let averages: Vec<Vec<f64>> = n_grid.iter().map(|&n| birkhoff_averages(ledgers, f, n)).collect();
    ergodic_decay_from_averages(n_grid, &averages, mu)
}

/// Per-sample Birkhoff averages on a grid, from one pass over the ledger.
pub fn birkhoff_on_grid(ledger: &DistanceLedger, f: &Indicator, n_grid: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_grid.len());
    let mut acc = 0.0;
    let mut i = 0;
    for &n in n_grid {
        while i < n {
            acc += f.eval(ledger.distances()[i]);
            i += 1;
        }
        out.push(acc / n as f64);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiIndependenceReport {
    pub m: usize,
    pub n: usize,
    /// `Σ_{m,n=M}^{N} (μ̂(E_m∩E_n) − μ̂(E_m)μ̂(E_n))`
    pub lhs: f64,
    pub lhs_se: f64,
    /// `Σ_{n=M}^{N} μ(B_n)`
    pub rhs: f64,
    pub ratio: f64,
    pub ratio_se: f64,
}

/// `hits[s][n-1]` is the indicator of `E_n = g_n⁻¹(B_n)` for sample `s`.
///
/// The double sum of empirical covariances equals the empirical variance of
/// `Φ = Σ_{n=M}^{N} χ_{E_n}`, which is how it is evaluated.
pub fn quasi_independence(hits: &[Vec<bool>], measures: &[f64], m: usize, n: usize) -> Result<QuasiIndependenceReport> {
    if !(n > m && m >= 1) {
        return Err(Error::Config(format!("need N > M ≥ 1, got M={m}, N={n}")));
    }
    if hits.iter().any(|h| h.len() < n) || measures.len() < n {
        return Err(Error::Config("indicator rows shorter than N".into()));
    }
    let phi: Vec<f64> = hits.iter().map(|h| h[m - 1..n].iter().filter(|&&x| x).count() as f64).collect();
    let s = phi.len() as f64;
    let mean = phi.iter().sum::<f64>() / s;
    let dev2: Vec<f64> = phi.iter().map(|p| (p - mean).powi(2)).collect();
    let (lhs, _) = mean_se(&dev2);
    // delta-method standard error of the plug-in variance
    let m4 = dev2.iter().map(|d| d * d).sum::<f64>() / s;
    let lhs_se = ((m4 - lhs * lhs).max(0.0) / s).sqrt();
    let rhs: f64 = measures[m - 1..n].iter().sum();
    if !(rhs > 0.0) {
        return Err(Error::Degenerate("target measures sum to zero".into()));
    }
    Ok(QuasiIndependenceReport { m, n, lhs, lhs_se, rhs, ratio: lhs / rhs, ratio_se: lhs_se / rhs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub t_grid: Vec<usize>,
    /// Monte Carlo `⟨g_t·f′, f′⟩`, `f′ = f − μ(B)`.
    pub corr: Vec<f64>,
    pub corr_se: Vec<f64>,
    pub fitted_sigma: f64,
    /// `1 − σ`, matching a decay of the form `t e^{−t(1−δ)}`.
    pub fitted_delta_proxy: f64,
}

/// Correlations of a ball indicator along the flow.
///
/// `start_distances[s]` is the distance of sample `s` itself (time 0) and
/// `ledgers[s]` continues it; `t_grid` must start at 0.
pub fn correlation_decay(
    start_distances: &[f64],
    ledgers: &[DistanceLedger],
    f: &Indicator,
    mu: f64,
    t_grid: &[usize],
) -> Result<CorrelationReport> {
    if t_grid.first() != Some(&0) {
        return Err(Error::Config("correlation grid must start at t = 0".into()));
    }
    let mut corr = Vec::with_capacity(t_grid.len());
    let mut corr_se = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let prods: Vec<f64> = start_distances
            .iter()
            .zip(ledgers)
            .map(|(&d0, l)| {
                let f0 = f.eval(d0) - mu;
                let ft = if t == 0 { f0 } else { f.eval(l.d(t)) - mu };
                f0 * ft
            })
            .collect();
        let (m, se) = mean_se(&prods);
        corr.push(m);
        corr_se.push(se);
    }
    // decaying head: t = 0 plus the consecutive grid points significant at 2 SE
    let mut xs = vec![0.0];
    let mut ys = vec![corr[0].abs().ln()];
    for k in 1..t_grid.len() {
        if corr[k].abs() > 2.0 * corr_se[k] {
            xs.push(t_grid[k] as f64);
            ys.push(corr[k].abs().ln());
        } else {
            break;
        }
    }
    if xs.len() < 2 && t_grid.len() > 1 {
        // nothing significant after t = 0: fit against the first noise-level point
        xs.push(t_grid[1] as f64);
        ys.push(corr[1].abs().max(corr_se[1]).ln());
    }
    let sigma = if xs.len() >= 2 { -ols(&xs, &ys).slope } else { f64::NAN };
    Ok(CorrelationReport {
        t_grid: t_grid.to_vec(),
        corr,
        corr_se,
        fitted_sigma: sigma,
        fitted_delta_proxy: 1.0 - sigma,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitProfile {
    pub grid: Vec<usize>,
    /// `#{1 ≤ i ≤ n : g_i ξ ∈ B_n}` on the grid.
    pub hits: Vec<usize>,
    /// Largest `n ≤ N` with `g_n ξ ∈ B_n`, 0 if none.
    pub last_hit_time: usize,
    /// Smallest grid `n₀` with `min_{i≤n} d_i ≤ r_n` for every grid `n ≥ n₀`;
    /// `None` stands for ∞.
    pub always_hit_from: Option<usize>,
}

/// Hit statistics of one ledger against radii `r_1..r_N` on the dyadic grid.
pub fn hit_profile(ledger: &DistanceLedger, radii: &[f64]) -> Result<HitProfile> {
    let n = radii.len();
    if ledger.horizon() < n {
        return Err(Error::Config("ledger shorter than the target family".into()));
    }
    let d = &ledger.distances()[..n];
    let grid = dyadic_grid(n);
    let queries: Vec<(usize, f64)> = grid.iter().map(|&m| (m, radii[m - 1])).collect();
    let hits = hits_on_grid(d, &queries);
    let last_hit_time = (1..=n).rev().find(|&i| d[i - 1] <= radii[i - 1]).unwrap_or(0);
    let pm = prefix_minima(d);
    let mut always_hit_from = None;
    for &m in grid.iter().rev() {
        if pm[m - 1] <= radii[m - 1] {
            always_hit_from = Some(m);
        } else {
            break;
        }
    }
    Ok(HitProfile { grid, hits, last_hit_time, always_hit_from })
}

/// Fraction of samples with `β_n(f_n)(ξ) = hits(n)/n ∉ [κ⁻¹μ(B_n), κμ(B_n)]`,
/// per grid point: the empirical measure of the exceedance set `Y^κ_n`.
pub fn exceedance_fractions(profiles: &[HitProfile], measures: &[f64], kappa: f64) -> Vec<(usize, f64)> {
    let Some(first) = profiles.first() else { return Vec::new() };
    first
        .grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let mu = measures[n - 1];
            let out = profiles
                .iter()
                .filter(|p| {
                    let beta = p.hits[k] as f64 / n as f64;
                    beta < mu / kappa || beta > kappa * mu
                })
                .count();
            (n, out as f64 / profiles.len() as f64)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLawFit {
    /// Slope of `log d_n` against `log n`.
    pub slope_d: f64,
    /// Slope of `log τ_r` against `log(1/r)`.
    pub slope_tau: f64,
    /// Time window `[n_lo, n_hi]` of the `d_n` fit.
    pub window: (usize, usize),
    /// Radius window `(r_lo, r_hi)` of the `τ_r` fit.
    pub r_window: (f64, f64),
    pub residual_d: f64,
    pub residual_tau: f64,
    /// Radii in the window not reached by time `N`; left out of the fit.
    pub tau_censored: usize,
    /// `τ_r ≤ y ⟺ d_y < r` held on every tested pair.
    pub duality_ok: bool,
}

/// Smallest ledger horizon accepted by [`loglaw_fit`].
pub const LOGLAW_MIN_HORIZON: usize = 1 << 10;

/// The `τ_r` window stops at radii of measure `LOGLAW_TAU_MARGIN / N`.
pub const LOGLAW_TAU_MARGIN: usize = 16;

/// Fits both logarithm laws from the prefix minima of one ledger.
///
/// `d_n` is fitted on the dyadic window `[2^10, N]`. `τ_r`, the first `i`
/// with `d_i ≤ r`, is read off the same prefix minima at the fixed radii of
/// measure `1/n` for dyadic `n` in `[2^10, N / 16]`.
pub fn loglaw_fit(ledger: &DistanceLedger, measure: &CurveMeasure<f64>) -> Result<LogLawFit> {
    let n = ledger.horizon();
    if n < LOGLAW_MIN_HORIZON {
        return Err(Error::Config(format!("log-law fit needs a horizon of at least {LOGLAW_MIN_HORIZON}")));
    }
    let pm = prefix_minima(ledger.distances());
    if pm[n - 1] <= 0.0 {
        return Err(Error::Degenerate("trajectory hit the center exactly".into()));
    }
    let window = |top: usize| {
        let mut g: Vec<usize> = dyadic_grid(top).into_iter().filter(|&m| m >= LOGLAW_MIN_HORIZON).collect();
        if top >= LOGLAW_MIN_HORIZON && g.last() != Some(&top) {
            g.push(top);
        }
        g
    };
    let grid = window(n);
    let x: Vec<f64> = grid.iter().map(|&m| (m as f64).ln()).collect();
    let y: Vec<f64> = grid.iter().map(|&m| pm[m - 1].ln()).collect();
    let fit_d = ols(&x, &y);

    // first index with pm ≤ r, by binary search on the non-increasing prefix minima
    let tau = |r: f64| -> Option<usize> {
        let k = pm.partition_point(|&v| v > r);
        (k < n).then_some(k + 1)
    };

    let radii: Vec<f64> = window(n / LOGLAW_TAU_MARGIN)
        .into_iter()
        .map(|m| {
            let mut r = measure.radius_for_measure(1.0 / m as f64);
            // step off ledger values so the strict comparison is not a tie
            while pm.binary_search_by(|v| r.total_cmp(v)).is_ok() {
                r = f64::from_bits(r.to_bits() - 1);
            }
            r
        })
        .collect();
    let mut duality_ok = true;
    let mut tau_censored = 0;
    let mut xt = Vec::new();
    let mut yt = Vec::new();
    for &r in &radii {
        let t = tau(r);
        let mut ys: Vec<usize> = grid.clone();
        match t {
            Some(t) => {
                ys.extend([t, t.saturating_sub(1).max(1)]);
                xt.push((1.0 / r).ln());
                yt.push((t as f64).ln());
            }
            None => tau_censored += 1,
        }
        for y in ys {
            let lhs = t.is_some_and(|t| t <= y);
            let rhs = pm[y - 1] < r;
            if lhs != rhs {
                duality_ok = false;
            }
        }
    }
    let (slope_tau, residual_tau) = if xt.len() >= 2 {
        let f = ols(&xt, &yt);
        (f.slope, f.residual)
    } else {
        (f64::NAN, f64::NAN)
    };
    let r_window = match (radii.last(), radii.first()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => (f64::NAN, f64::NAN),
    };
    Ok(LogLawFit {
        slope_d: fit_d.slope,
        slope_tau,
        window: (LOGLAW_MIN_HORIZON, n),
        r_window,
        residual_d: fit_d.residual,
        residual_tau,
        tau_censored,
        duality_ok,
    })
}
