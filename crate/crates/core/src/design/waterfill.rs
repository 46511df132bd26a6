//! Alternating water-filling over per-stream powers.
//!
//! With per-stream gains `a_i` (source hop) and `b_i` (relay hop) the
//! scalarized problem is
//!
//! ```text
//! maximize  f(x, y) = sum_i ln((1 + a_i x_i)(1 + b_i y_i) / (1 + a_i x_i + b_i y_i))
//! s.t.      sum x_i = P_s,  sum y_i = P_r,  x, y >= 0
//! ```
//!
//! For fixed `x` the problem is concave in `y` with the closed-form solution
//! `y_i = [sqrt(a^2 x^2 + 4 a b x mu) - a x - 2]^+ / (2 b)`; the `x` update is
//! the mirror image. The water level `mu` is found by bisection.

/// Relative objective change that ends the alternation.
pub const OBJECTIVE_TOL: f64 = 1e-10;
/// The objective is flat near the optimum, so a small objective change
/// alone can leave the first-order conditions loose; stopping also requires
/// this stationarity residual (see [`kkt_residual`]).
pub const STATIONARITY_TOL: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillState {
    /// Source stream powers `x_i = sigma_s2 * lambda_{s,i}^2`.
    pub x: Vec<f64>,
    /// Relay stream powers.
    pub y: Vec<f64>,
    pub mu_s: f64,
    pub mu_r: f64,
    /// Source-hop amplitude gains (whitened singular values).
    pub lam1: Vec<f64>,
    /// Relay-hop amplitude gains.
    pub lam2: Vec<f64>,
    /// Effective relay and destination noise levels (identity-receive case
    /// only; 1 otherwise).
    pub beta1: f64,
    pub beta2: f64,
    /// Objective after every completed `y`/`x` sweep, starting with the initial point.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl WaterfillState {
    pub fn objective(&self) -> f64 {
        self.trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// The scalarized objective for squared gains `a`, `b`.
pub fn objective(a: &[f64], b: &[f64], x: &[f64], y: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(x.iter().zip(y))
        .map(|((&a, &b), (&x, &y))| {
            let ax = a * x;
            let by = b * y;
            (1.0 + ax).ln() + (1.0 + by).ln() - (1.0 + ax + by).ln()
        })
        .sum()
}

/// Power of one stream at water level `mu` when the other hop is fixed.
/// `g` is this hop's squared gain, `h` the other hop's, `o` the other power.
#[inline]
fn level_power(mu: f64, g: f64, h: f64, o: f64) -> f64 {
    if g <= 0.0 || h <= 0.0 || o <= 0.0 {
        return 0.0;
    }
    let ho = h * o;
    let z = ((ho * ho + 4.0 * g * ho * mu).sqrt() - ho - 2.0) / 2.0;
    if z > 0.0 {
        z / g
    } else {
        0.0
    }
}

/// Maximizes the objective over one hop's powers with the other held fixed.
/// Returns the water level, or 0 if no stream can carry power.
fn update_hop(out: &mut [f64], g: &[f64], h: &[f64], other: &[f64], budget: f64) -> f64 {
    let total = |mu: f64| -> f64 {
        g.iter()
            .zip(h)
            .zip(other)
            .map(|((&g, &h), &o)| level_power(mu, g, h, o))
            .sum()
    };
    let active = g
        .iter()
        .zip(h)
        .zip(other)
        .any(|((&g, &h), &o)| g > 0.0 && h > 0.0 && o > 0.0);
    if !active || budget <= 0.0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while total(hi) < budget {
        lo = hi;
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for (((v, &g), &h), &o) in out.iter_mut().zip(g).zip(h).zip(other) {
        *v = level_power(hi, g, h, o);
    }
    // Remove the last-bit residual so the budget holds to rounding.
    let sum: f64 = out.iter().sum();
    let scale = budget / sum;
    out.iter_mut().for_each(|v| *v *= scale);
    hi
}

/// Uniform split of `budget` over the streams with non-zero gains on both hops.
pub fn initial_powers(a: &[f64], b: &[f64], budget: f64) -> Vec<f64> {
    let live: Vec<bool> = a.iter().zip(b).map(|(&a, &b)| a > 0.0 && b > 0.0).collect();
    let n = live.iter().filter(|&&l| l).count();
    live.iter()
        .map(|&l| if l { budget / n as f64 } else { 0.0 })
        .collect()
}

/// One `y` update followed by one `x` update, in place. Returns the new objective.
pub(crate) fn sweep(
    a: &[f64],
    b: &[f64],
    p_s: f64,
    p_r: f64,
    x: &mut [f64],
    y: &mut [f64],
) -> (f64, f64, f64) {
    let mu_r = update_hop(y, b, a, x, p_r);
    let mu_s = update_hop(x, a, b, y, p_s);
    (objective(a, b, x, y), mu_s, mu_r)
}

fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / new.abs().max(f64::MIN_POSITIVE)
}

pub(crate) fn settled(a: &[f64], b: &[f64], x: &[f64], y: &[f64], f: f64, prev: f64) -> bool {
    relative_change(f, prev) < OBJECTIVE_TOL && kkt_residual(a, b, x, y) < STATIONARITY_TOL
}

/// Starting source powers for the alternation: the uniform split over every
/// live stream, then uniform splits over the `k` strongest live streams for
/// each smaller `k`, ranked by `a_i b_i / (a_i + b_i)`.
///
/// The objective is not jointly concave and the alternation can settle on a
/// point that is optimal per hop but not jointly, typically one that keeps a
/// weak stream alive. Restarting on the smaller supports reaches the
/// stationary points that switch those streams off.
pub fn starting_points(a: &[f64], b: &[f64], budget: f64) -> Vec<Vec<f64>> {
    let mut live: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0 && b[i] > 0.0).collect();
    let gain = |i: usize| a[i] * b[i] / (a[i] + b[i]);
    live.sort_by(|&i, &j| gain(j).total_cmp(&gain(i)).then(i.cmp(&j)));
    let mut starts = vec![initial_powers(a, b, budget)];
    for k in (1..live.len()).rev() {
        let mut x = vec![0.0; a.len()];
        for &i in &live[..k] {
            x[i] = budget / k as f64;
        }
        starts.push(x);
    }
    starts
}

/// One alternation from source powers `x`, run until [`settled`] or
/// [`MAX_ITERATIONS`] sweeps.
struct Run {
    x: Vec<f64>,
    y: Vec<f64>,
    mu_s: f64,
    mu_r: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn alternate(a: &[f64], b: &[f64], p_s: f64, p_r: f64, mut x: Vec<f64>) -> Run {
    for (xi, (&ai, &bi)) in x.iter_mut().zip(a.iter().zip(b)) {
        if ai <= 0.0 || bi <= 0.0 {
            *xi = 0.0;
        }
    }
    let mut y = vec![0.0; a.len()];
    let mut trace = vec![objective(a, b, &x, &y)];
    let (mut mu_s, mut mu_r) = (0.0, 0.0);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let prev = *trace.last().unwrap();
        let (f, ms, mr) = sweep(a, b, p_s, p_r, &mut x, &mut y);
        mu_s = ms;
        mu_r = mr;
        trace.push(f);
        iterations += 1;
        // The first sweep starts from y = 0, so never stop on it.
        if iterations > 1 && settled(a, b, &x, &y, f, prev) {
            converged = true;
            break;
        }
    }
    Run {
        x,
        y,
        mu_s,
        mu_r,
        trace,
        iterations,
        converged,
    }
}

/// Alternating water-filling for amplitude gains `lam1`, `lam2`.
///
/// Streams with a zero gain on either hop get no power. `init` fixes the
/// starting `x`; otherwise every point of [`starting_points`] is tried and
/// the run with the largest objective is returned.
pub fn waterfill(
    lam1: &[f64],
    lam2: &[f64],
    p_s: f64,
    p_r: f64,
    init: Option<&[f64]>,
) -> WaterfillState {
    let a: Vec<f64> = lam1.iter().map(|l| l * l).collect();
    let b: Vec<f64> = lam2.iter().map(|l| l * l).collect();
    let starts = match init {
        Some(x0) => vec![x0.to_vec()],
        None => starting_points(&a, &b, p_s),
    };
    let best = starts
        .into_iter()
        .map(|x| alternate(&a, &b, p_s, p_r, x))
        .reduce(|best, r| {
            if r.trace.last() > best.trace.last() {
                r
            } else {
                best
            }
        })
        .expect("at least one starting point");
    WaterfillState {
        x: best.x,
        y: best.y,
        mu_s: best.mu_s,
        mu_r: best.mu_r,
        lam1: lam1.to_vec(),
        lam2: lam2.to_vec(),
        beta1: 1.0,
        beta2: 1.0,
        trace: best.trace,
        iterations: best.iterations,
        converged: best.converged,
    }
}

/// Largest relative violation of the first-order conditions at `(x, y)`:
/// active streams share the gradient of their hop, inactive streams do not
/// exceed it.
pub fn kkt_residual(a: &[f64], b: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let grad_x: Vec<f64> = (0..a.len())
        .map(|i| a[i] * b[i] * y[i] / ((1.0 + a[i] * x[i]) * (1.0 + a[i] * x[i] + b[i] * y[i])))
        .collect();
    let grad_y: Vec<f64> = (0..a.len())
        .map(|i| a[i] * b[i] * x[i] / ((1.0 + b[i] * y[i]) * (1.0 + a[i] * x[i] + b[i] * y[i])))
        .collect();
    hop_residual(&grad_x, x).max(hop_residual(&grad_y, y))
}

fn hop_residual(grad: &[f64], p: &[f64]) -> f64 {
    let active: Vec<f64> = grad
        .iter()
        .zip(p)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&g, _)| g)
        .collect();
    if active.is_empty() {
        return 0.0;
    }
    let nu = active.iter().sum::<f64>() / active.len() as f64;
    let spread = active
        .iter()
        .map(|g| (g - nu).abs() / nu)
        .fold(0.0, f64::max);
    let excess = grad
        .iter()
        .zip(p)
        .filter(|(_, &p)| p == 0.0)
        .map(|(&g, _)| ((g - nu) / nu).max(0.0))
        .fold(0.0, f64::max);
    spread.max(excess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_budget(v: &[f64], p: f64) {
        let s: f64 = v.iter().sum();
        assert!((s - p).abs() <= 1e-8 * p, "sum {s} vs {p}");
        assert!(v.iter().all(|&q| q >= 0.0));
    }

    #[test]
    fn single_stream_uses_full_budget() {
        let st = waterfill(&[1.0], &[1.0], 1.0, 1.0, None);
        assert!(st.converged);
        assert!((st.x[0] - 1.0).abs() < 1e-12);
        assert!((st.y[0] - 1.0).abs() < 1e-12);
        // grid oracle over the unit square: the corner is the maximum
        let f = |x: f64, y: f64| objective(&[1.0], &[1.0], &[x], &[y]);
        let mut best = f64::NEG_INFINITY;
        for i in 0..=100 {
            for j in 0..=100 {
                best = best.max(f(i as f64 / 100.0, j as f64 / 100.0));
            }
        }
        assert!((best - st.objective()).abs() < 1e-12);
    }

    #[test]
    fn dead_stream_gets_nothing() {
        let st = waterfill(&[1.0, 0.0, 2.0], &[1.5, 1.0, 0.7], 10.0, 5.0, None);
        assert_eq!(st.x[1], 0.0);
        assert_eq!(st.y[1], 0.0);
        assert_budget(&st.x, 10.0);
        assert_budget(&st.y, 5.0);
    }

    #[test]
    fn equal_gains_split_evenly() {
        let st = waterfill(&[2.0; 4], &[0.5; 4], 8.0, 4.0, None);
        for i in 0..4 {
            assert!((st.x[i] - 2.0).abs() < 1e-9);
            assert!((st.y[i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn random_profiles_are_monotone_and_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let n = rng.random_range(1..=6);
            let lam1: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..3.0)).collect();
            let lam2: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..3.0)).collect();
            let p_s = 10f64.powf(rng.random_range(-1.0..3.0));
            let p_r = 10f64.powf(rng.random_range(-1.0..3.0));
            let st = waterfill(&lam1, &lam2, p_s, p_r, None);
            assert!(st.converged);
            assert_budget(&st.x, p_s);
            assert_budget(&st.y, p_r);
            for w in st.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[1].abs(), "{:?}", st.trace);
            }
            let a: Vec<f64> = lam1.iter().map(|l| l * l).collect();
            let b: Vec<f64> = lam2.iter().map(|l| l * l).collect();
            let r = kkt_residual(&a, &b, &st.x, &st.y);
            assert!(r < 1e-6, "kkt residual {r}");
        }
    }

    #[test]
    fn restarts_escape_the_interior_saddle() {
        // From the uniform start the alternation stops with both streams
        // alive; switching the weak stream off is better.
        let a = [1.3427096025250593, 0.4461356935341132];
        let b = [4.070146534971521, 0.7709857314630139];
        let (p_s, p_r) = (3.399135688756454, 10.798065119110562);
        let lam = |g: &[f64]| g.iter().map(|v| v.sqrt()).collect::<Vec<_>>();
        let uniform = waterfill(&lam(&a), &lam(&b), p_s, p_r, Some(&[p_s / 2.0; 2]));
        let st = waterfill(&lam(&a), &lam(&b), p_s, p_r, None);
        let single = objective(&a, &b, &[p_s, 0.0], &[p_r, 0.0]);
        assert!(uniform.objective() < single - 1e-3);
        assert!((st.objective() - single).abs() < 1e-12 * single);
        assert_eq!((st.x[1], st.y[1]), (0.0, 0.0));
    }

    #[test]
    fn level_power_threshold() {
        // positive exactly when mu > (1 + h o) / (g h o)
        let (g, h, o) = (2.0, 0.5, 3.0);
        let thr = (1.0 + h * o) / (g * h * o);
        assert_eq!(level_power(thr * 0.999, g, h, o), 0.0);
        assert!(level_power(thr * 1.001, g, h, o) > 0.0);
    }
}
