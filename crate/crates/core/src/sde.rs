//! Closed forms and exact simulation for the drifted geometric Brownian
//! market on `[0, T]`
//!
//! ```text
//! dS_t / S_t = dW_t + dt / (T sqrt(T - t + alpha)),   alpha = exp(-T^(2+eps)),   S_0 = 1,
//! ```
//!
//! together with the modified price `S~` whose drift exponent switches from
//! `1/2` to `(1 - 1/T^2)/2` after the breakpoint `t* = T - exp(-T^2)`.
//!
//! `alpha` underflows for moderate `T` (it is below `1e-300` once `T > 13`
//! at `eps = 0.5`), so everything that depends on it is computed from
//! `ln alpha = -T^(2+eps)`; sums such as `T + alpha` simply lose `alpha`,
//! which is below machine precision relative to `T` anyway.
//!
//! All Gaussian functionals sampled here have deterministic integrands, so
//! terminal laws are sampled exactly and no time stepping is involved.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal;

/// Paths per independent random stream.
const BATCH: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExampleSixParams {
    horizon: f64,
    eps: f64,
    gamma: f64,
    lambda: f64,
    log_alpha: f64,
}

impl ExampleSixParams {
    /// `horizon > 0`, `eps > 0`, `0 < gamma < 1/2`, `0 <= lambda < 1`.
    pub fn new(horizon: f64, eps: f64, gamma: f64, lambda: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps {eps} must be positive")));
        }
        if !(gamma > 0.0 && gamma < 0.5) {
            return Err(Error::InvalidParameter(format!("gamma {gamma} outside (0, 1/2)")));
        }
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1)")));
        }
        Ok(ExampleSixParams {
            horizon,
            eps,
            gamma,
            lambda,
            log_alpha: -horizon.powf(2.0 + eps),
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.horizon, self.eps, self.gamma, lambda)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn log_alpha(&self) -> f64 {
        self.log_alpha
    }

    /// `alpha`, possibly underflowed to zero.
    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    fn ln_horizon_plus_alpha(&self) -> f64 {
        self.horizon.ln() + (self.alpha() / self.horizon).ln_1p()
    }

    /// `ln(1 + exp(-T^2 (T^eps - 1)))`.
    fn ln_one_plus_r(&self) -> f64 {
        let t2 = self.horizon * self.horizon;
        ln_1p_exp(-t2 * (self.horizon.powf(self.eps) - 1.0))
    }

    /// `ln(exp(-T^2) + alpha)`: log of the gap `T - t* + alpha`.
    pub fn ln_gap_at_breakpoint(&self) -> f64 {
        -self.horizon * self.horizon + self.ln_one_plus_r()
    }

    /// Length of the terminal window `T - t* = exp(-T^2)`.
    pub fn window(&self) -> f64 {
        (-self.horizon * self.horizon).exp()
    }

    /// The breakpoint `t* = T - exp(-T^2)`.
    pub fn breakpoint(&self) -> f64 {
        self.horizon - self.window()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )))
        }
    }
}

/// `ln(1 + e^y)` without overflow.
fn ln_1p_exp(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

/// Integrated drift `D(t) = (2/T)(sqrt(T + alpha) - sqrt(T - t + alpha))`.
pub fn drift_integral(params: &ExampleSixParams, t: f64) -> Result<f64> {
    params.check_time(t)?;
    let h = params.horizon;
    let a = params.alpha();
    // difference of square roots written without cancellation
    Ok(2.0 / h * t / ((h + a).sqrt() + (h - t + a).sqrt()))
}

/// Variance of the log-density of the martingale measure,
/// `ln(T + alpha)/T^2 + T^eps`.
pub fn novikov_value(params: &ExampleSixParams) -> f64 {
    let h = params.horizon;
    params.ln_horizon_plus_alpha() / (h * h) + h.powf(params.eps)
}

/// `gamma_n = (2/T) exp(-T^2/2) (1 + exp(-T^2 (T^eps - 1)))^(1/2)`.
pub fn gamma_n(params: &ExampleSixParams) -> f64 {
    2.0 / params.horizon * (0.5 * params.ln_gap_at_breakpoint()).exp()
}

/// Cost level `2 (1 - exp(-gamma_n))` above which the modified price is
/// certified to stay in the spread.
pub fn lambda_threshold(params: &ExampleSixParams) -> f64 {
    -2.0 * (-gamma_n(params)).exp_m1()
}

/// `ln(S~_t / S_t)` as a function of the remaining time `d = T - t`.
fn shadow_log_ratio_at_gap(params: &ExampleSixParams, gap: f64) -> f64 {
    if gap >= params.window() {
        return 0.0;
    }
    let h = params.horizon;
    let t2 = h * h;
    let q = (t2 + 1.0) / (2.0 * t2);
    let ln_x0 = params.ln_gap_at_breakpoint();
    let x = gap + params.alpha();
    let pow = |ln_base: f64, e: f64| (e * ln_base).exp();
    let ln_x = if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
    let modified = (pow(ln_x0, q) - pow(ln_x, q)) / q;
    let original = 2.0 * (pow(ln_x0, 0.5) - pow(ln_x, 0.5));
    (modified - original) / h
}

/// Two-term closed form of the same log ratio at remaining time `gap`.
fn i_n_at_gap(params: &ExampleSixParams, gap: f64) -> f64 {
    if gap >= params.window() {
        return 0.0;
    }
    let h = params.horizon;
    let t2 = h * h;
    let k = 1.0 + 1.0 / t2;
    let term = |ln_x: f64| {
        let root = (0.5 * ln_x).exp();
        let small = (ln_x / (2.0 * t2)).exp();
        2.0 / h * root * (1.0 - small / k)
    };
    let x = gap + params.alpha();
    let ln_x = if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
    term(ln_x) - term(params.ln_gap_at_breakpoint())
}

/// `ln(S~_t / S_t)`, zero up to the breakpoint, from the antiderivatives of
/// the two drift integrands.
pub fn shadow_log_ratio(params: &ExampleSixParams, t: f64) -> Result<f64> {
    params.check_time(t)?;
    Ok(shadow_log_ratio_at_gap(params, params.horizon - t))
}

/// `I_n(t)`: the same quantity as [`shadow_log_ratio`] arranged as a
/// difference of two bounded terms, each at most `gamma_n` in size.
pub fn i_n(params: &ExampleSixParams, t: f64) -> Result<f64> {
    params.check_time(t)?;
    Ok(i_n_at_gap(params, params.horizon - t))
}

/// Sample of `I_n` on `points` evenly spaced remaining times covering the
/// terminal window, ordered from the breakpoint to `T`.
pub fn i_n_window(params: &ExampleSixParams, points: usize) -> Vec<f64> {
    window_gaps(params, points)
        .into_iter()
        .map(|g| i_n_at_gap(params, g))
        .collect()
}

fn window_gaps(params: &ExampleSixParams, points: usize) -> Vec<f64> {
    let w = params.window();
    let n = points.max(2);
    (0..n)
        .map(|k| w * (1.0 - k as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CpsConstants {
    pub lambda_prime: f64,
    pub c_lambda: f64,
    /// Upper log tolerance `ln(1 + lambda')`.
    pub epsilon_n: f64,
    /// Lower log tolerance `-ln(1 - lambda')`.
    pub delta_n: f64,
}

/// Scaling constants that place `c(lambda) S~` inside the spread.
pub fn cps_constants(lambda: f64) -> Result<CpsConstants> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1)")));
    }
    let lambda_prime = lambda / (2.0 - lambda);
    Ok(CpsConstants {
        lambda_prime,
        c_lambda: (2.0 - lambda) / 2.0,
        epsilon_n: -(-lambda / 2.0).ln_1p(),
        delta_n: -(-lambda_prime).ln_1p(),
    })
}

fn margin_of(k: &CpsConstants, r: f64) -> f64 {
    (k.epsilon_n - r).min(r + k.delta_n)
}

/// Smallest slack of `(1 - lambda) S <= c(lambda) S~ <= S` in log terms over
/// `grid_points` points of the terminal window plus the endpoints of
/// `[0, t*]`. Positive means the scaled price stays inside the spread.
pub fn containment_margin(params: &ExampleSixParams, grid_points: usize) -> Result<f64> {
    if grid_points < 2 {
        return Err(Error::InvalidParameter("grid_points must be at least 2".into()));
    }
    let k = cps_constants(params.lambda)?;
    let before = margin_of(&k, 0.0);
    Ok(window_gaps(params, grid_points)
        .into_iter()
        .map(|g| margin_of(&k, shadow_log_ratio_at_gap(params, g)))
        .fold(before, f64::min))
}

/// [`containment_margin`] on explicit times.
pub fn containment_margin_at(params: &ExampleSixParams, times: &[f64]) -> Result<f64> {
    let k = cps_constants(params.lambda)?;
    times.iter().try_fold(f64::INFINITY, |m, &t| {
        Ok(m.min(margin_of(&k, shadow_log_ratio(params, t)?)))
    })
}

/// Variance of the log-density of the modified measure; `zeta_n` is its
/// exponential.
pub fn novikov_tilde(params: &ExampleSixParams) -> f64 {
    let h = params.horizon;
    let t2 = h * h;
    let l1r = params.ln_one_plus_r();
    (params.ln_horizon_plus_alpha() + t2 - l1r) / t2 + (-1.0 + l1r / t2).exp()
        - (-h.powf(params.eps)).exp()
}

/// Second moment of the modified density, `E_P[(dQ~/dP)^2]`.
pub fn zeta_n(params: &ExampleSixParams) -> f64 {
    novikov_tilde(params).exp()
}

/// Limit of `zeta_n` as `T` grows: `exp(1 + 1/e)`.
pub fn zeta_limit() -> f64 {
    (1.0 + (-1.0f64).exp()).exp()
}

/// `P(A_n) = Phi((1/2 - gamma) sqrt(v))`.
pub fn p_an_closed(params: &ExampleSixParams) -> f64 {
    normal::cdf((0.5 - params.gamma) * novikov_value(params).sqrt())
}

/// `Q(A_n) = Phi(-(1/2 + gamma) sqrt(v))`: under `Q` the Gaussian part of
/// the log-density is shifted by `-v`.
pub fn q_an_closed(params: &ExampleSixParams) -> f64 {
    normal::cdf(-(0.5 + params.gamma) * novikov_value(params).sqrt())
}

/// The density bound `exp(-gamma v)` defining `A_n`; `Q(A_n)` is below this
/// times `P(A_n)`.
pub fn q_an_bound(params: &ExampleSixParams) -> f64 {
    (-params.gamma * novikov_value(params)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosedFormRow {
    pub novikov: f64,
    pub gamma_n: f64,
    pub lambda_threshold: f64,
    pub c_lambda: f64,
    pub epsilon_n: f64,
    pub delta_n: f64,
    pub zeta_n: f64,
    pub pa_closed: f64,
    pub qa_closed: f64,
    pub qa_bound: f64,
    pub breakpoint: f64,
    pub containment_margin: f64,
}

impl ClosedFormRow {
    pub fn compute(params: &ExampleSixParams, grid_points: usize) -> Result<Self> {
        let k = cps_constants(params.lambda)?;
        Ok(ClosedFormRow {
            novikov: novikov_value(params),
            gamma_n: gamma_n(params),
            lambda_threshold: lambda_threshold(params),
            c_lambda: k.c_lambda,
            epsilon_n: k.epsilon_n,
            delta_n: k.delta_n,
            zeta_n: zeta_n(params),
            pa_closed: p_an_closed(params),
            qa_closed: q_an_closed(params),
            qa_bound: q_an_bound(params),
            breakpoint: params.breakpoint(),
            containment_margin: containment_margin(params, grid_points)?,
        })
    }

    /// Row invariants: finite values, probabilities in (0, 1) and
    /// `Q(A_n) <= bound * P(A_n)`.
    pub fn is_consistent(&self) -> bool {
        let finite = [
            self.novikov,
            self.gamma_n,
            self.lambda_threshold,
            self.zeta_n,
            self.pa_closed,
            self.qa_closed,
            self.qa_bound,
            self.containment_margin,
        ]
        .iter()
        .all(|v| v.is_finite());
        finite
            && self.pa_closed > 0.0
            && self.pa_closed < 1.0
            && self.qa_closed > 0.0
            && self.qa_closed < 1.0
            && self.qa_closed <= self.qa_bound * self.pa_closed * (1.0 + 1e-9)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target).abs() / self.standard_error
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }

    fn estimate(&self, seed: u64) -> McEstimate {
        let se = if self.n > 1.0 {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        } else {
            0.0
        };
        McEstimate {
            value: self.mean,
            standard_error: se,
            n_paths: self.n as usize,
            seed,
        }
    }
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs `f` over `n` items split into fixed-size batches, each batch with
/// its own random stream; results come back in batch order.
fn batched<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let batches = n.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b);
            let len = BATCH.min(n - b * BATCH);
            f(&mut rng, len)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TerminalEstimates {
    /// `E[Z]`, the total mass of the martingale measure.
    pub mean_z: McEstimate,
    pub p_an: McEstimate,
    /// `E[Z 1_{A_n}]`.
    pub q_an: McEstimate,
    /// `E[Z~^2]`, to compare with `zeta_n`.
    pub tilde_second_moment: McEstimate,
}

/// Exact Monte Carlo over the terminal densities `Z = exp(-X - v/2)` with
/// `X ~ N(0, v)` and `Z~ = exp(-Y - v~/2)` with `Y ~ N(0, v~)`.
pub fn mc_terminal(params: &ExampleSixParams, n_paths: usize, seed: u64) -> Result<TerminalEstimates> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be at least 1".into()));
    }
    let v = novikov_value(params);
    let vt = novikov_tilde(params);
    let (sv, svt) = (v.sqrt(), vt.sqrt());
    let log_level = -params.gamma * v;
    let parts = batched(n_paths, seed, |rng, len| {
        let mut acc = [Moments::default(); 4];
        for _ in 0..len {
            let gx: f64 = StandardNormal.sample(rng);
            let gy: f64 = StandardNormal.sample(rng);
            let (x, y) = (sv * gx, svt * gy);
            let log_z = -x - 0.5 * v;
            let z = log_z.exp();
            let in_a = if log_z < log_level { 1.0 } else { 0.0 };
            acc[0].push(z);
            acc[1].push(in_a);
            acc[2].push(z * in_a);
            acc[3].push((-2.0 * y - vt).exp());
        }
        acc
    });
    let total = parts.into_iter().fold([Moments::default(); 4], |a, b| {
        [a[0].merge(b[0]), a[1].merge(b[1]), a[2].merge(b[2]), a[3].merge(b[3])]
    });
    Ok(TerminalEstimates {
        mean_z: total[0].estimate(seed),
        p_an: total[1].estimate(seed),
        q_an: total[2].estimate(seed),
        tilde_second_moment: total[3].estimate(seed),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathGrid {
    pub times: Vec<f64>,
    /// One row per path, one column per grid time.
    pub paths: Vec<Vec<f64>>,
}

/// Price paths `S_t = exp(W_t - t/2 + D(t))` on an even grid of `[0, T]`,
/// sampled from exact Brownian increments.
pub fn path_grid(
    params: &ExampleSixParams,
    n_paths: usize,
    grid_points: usize,
    seed: u64,
) -> Result<PathGrid> {
    path_grid_scaled(params, n_paths, grid_points, seed, 1.0)
}

/// [`path_grid`] with the Brownian part multiplied by `noise`; `noise = 0`
/// gives the deterministic skeleton `exp(-t/2 + D(t))`.
pub(crate) fn path_grid_scaled(
    params: &ExampleSixParams,
    n_paths: usize,
    grid_points: usize,
    seed: u64,
    noise: f64,
) -> Result<PathGrid> {
    if grid_points < 2 {
        return Err(Error::InvalidParameter("grid_points must be at least 2".into()));
    }
    let h = params.horizon;
    let times: Vec<f64> = (0..grid_points)
        .map(|k| h * k as f64 / (grid_points - 1) as f64)
        .collect();
    let skeleton: Vec<f64> = times
        .iter()
        .map(|&t| drift_integral(params, t).map(|d| d - 0.5 * t))
        .collect::<Result<_>>()?;
    let steps: Vec<f64> = times.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
    let paths = batched(n_paths, seed, |rng, len| {
        (0..len)
            .map(|_| {
                let mut w = 0.0;
                let mut row = Vec::with_capacity(grid_points);
                row.push(skeleton[0].exp());
                for (k, sd) in steps.iter().enumerate() {
                    let z: f64 = StandardNormal.sample(rng);
                    w += noise * sd * z;
                    row.push((w + skeleton[k + 1]).exp());
                }
                row
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    Ok(PathGrid { times, paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(h: f64, eps: f64) -> ExampleSixParams {
        ExampleSixParams::new(h, eps, 0.4, 0.0).unwrap()
    }

    // Expected values below come from a 40-digit evaluation of the same
    // formulas.

    #[test]
    fn drift_integral_values() {
        assert_eq!(drift_integral(&p(2.0, 0.5), 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            drift_integral(&p(2.0, 0.5), 1.0).unwrap(),
            0.413_702_936_717_193_92,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            drift_integral(&p(2.0, 0.5), 2.0).unwrap(),
            1.356_342_411_894_101_9,
            max_relative = 1e-14
        );
        assert!(drift_integral(&p(2.0, 0.5), 2.5).is_err());
    }

    #[test]
    fn novikov_values() {
        assert_relative_eq!(novikov_value(&p(2.0, 0.5)), 1.587_936_662_726_604, max_relative = 1e-14);
        assert_relative_eq!(novikov_value(&p(1.0, 1.0)), 1.313_261_687_518_222_8, max_relative = 1e-14);
        assert_relative_eq!(novikov_value(&p(20.0, 0.5)), 4.479_625_285_683_464_4, max_relative = 1e-14);
        assert_eq!(p(20.0, 0.5).alpha(), 0.0);
    }

    #[test]
    fn gamma_and_threshold() {
        let q = p(2.0, 0.5);
        assert_relative_eq!(gamma_n(&q), 0.147_679_139_235_642_83, max_relative = 1e-13);
        assert_relative_eq!(lambda_threshold(&q), 0.274_584_240_704_231_53, max_relative = 1e-13);
        assert_relative_eq!(gamma_n(&p(4.0, 0.5)), 1.677_313_233_890_920_1e-4, max_relative = 1e-12);
        let far = p(40.0, 0.5);
        assert_eq!(gamma_n(&far), 0.0);
        assert_eq!(lambda_threshold(&far), 0.0);
    }

    #[test]
    fn gamma_decreases_in_horizon() {
        let g: Vec<f64> = [2.0, 2.5, 3.0, 4.0, 6.0, 8.0]
            .iter()
            .map(|&h| gamma_n(&p(h, 0.5)))
            .collect();
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn shadow_ratio_vanishes_before_breakpoint() {
        let q = p(2.0, 0.5);
        let ts = q.breakpoint();
        assert_eq!(shadow_log_ratio(&q, ts).unwrap(), 0.0);
        assert_eq!(i_n(&q, ts).unwrap(), 0.0);
        assert_eq!(shadow_log_ratio(&q, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn terminal_i_n() {
        let q = p(2.0, 0.5);
        assert_relative_eq!(i_n(&q, 2.0).unwrap(), -0.038_649_533_755_791_684, max_relative = 1e-11);
    }

    #[test]
    fn two_closed_forms_agree() {
        for (h, eps) in [(1.5, 0.25), (2.0, 0.5), (3.0, 1.0), (4.0, 0.5), (16.0, 0.5)] {
            let q = p(h, eps);
            for g in window_gaps(&q, 101) {
                let a = shadow_log_ratio_at_gap(&q, g);
                let b = i_n_at_gap(&q, g);
                assert!((a - b).abs() <= 1e-12 * gamma_n(&q).max(1e-300), "T={h} gap={g}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn cps_constant_values() {
        let k = cps_constants(0.3).unwrap();
        assert_relative_eq!(k.lambda_prime, 0.176_470_588_235_294_12, max_relative = 1e-14);
        assert_relative_eq!(k.c_lambda, 0.85, max_relative = 1e-15);
        assert_relative_eq!(k.epsilon_n, 0.162_518_929_497_774_91, max_relative = 1e-14);
        assert_relative_eq!(k.delta_n, 0.194_156_014_440_957_47, max_relative = 1e-14);
        assert_relative_eq!(
            (1.0 - k.lambda_prime) / (1.0 + k.lambda_prime),
            0.7,
            max_relative = 1e-14
        );
        let z = cps_constants(0.0).unwrap();
        assert_eq!((z.lambda_prime, z.c_lambda, z.epsilon_n, z.delta_n), (0.0, 1.0, 0.0, 0.0));
        assert!(cps_constants(1.0).is_err());
    }

    #[test]
    fn margin_on_the_flat_part() {
        let q = ExampleSixParams::new(2.0, 0.5, 0.4, 0.2).unwrap();
        let k = cps_constants(0.2).unwrap();
        let ts = q.breakpoint();
        let m = containment_margin_at(&q, &[0.0, 0.3 * ts, ts]).unwrap();
        assert_eq!(m, k.epsilon_n.min(k.delta_n));
    }

    #[test]
    fn margin_sign_around_threshold() {
        let base = p(2.0, 0.5);
        let thr = lambda_threshold(&base);
        let above = base.with_lambda(1.01 * thr).unwrap();
        assert!(containment_margin(&above, 10_000).unwrap() > 0.0);
        // The spread only fails once delta_n drops below max |I_n| = 0.03865.
        let tight = base.with_lambda(0.05).unwrap();
        assert!(containment_margin(&tight, 10_000).unwrap() < 0.0);
    }

    #[test]
    fn zeta_values() {
        assert_relative_eq!(zeta_limit(), 3.927_014_394_741_644_9, max_relative = 1e-14);
        assert_relative_eq!(zeta_n(&p(2.0, 0.5)), 3.565_318_784_107_248_7, max_relative = 1e-13);
        assert_relative_eq!(zeta_n(&p(8.0, 0.5)), 3.823_877_532_659_826_9, max_relative = 1e-13);
        assert_relative_eq!(zeta_n(&p(20.0, 0.5)), 3.911_597_588_131_173_4, max_relative = 1e-13);
    }

    #[test]
    fn separation_probabilities() {
        let q = p(2.0, 0.5);
        assert_relative_eq!(p_an_closed(&q), 0.550_139_325_009_727_2, max_relative = 1e-12);
        assert_relative_eq!(q_an_closed(&q), 0.128_372_059_371_200_08, max_relative = 1e-12);
        assert_relative_eq!(q_an_bound(&q), 0.529_842_935_170_604_5, max_relative = 1e-13);
        let near_half = ExampleSixParams::new(2.0, 0.5, 0.499_999_999, 0.0).unwrap();
        assert!((p_an_closed(&near_half) - 0.5).abs() < 1e-8);
    }

    #[test]
    fn closed_form_row_is_consistent() {
        for h in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let row = ClosedFormRow::compute(&p(h, 0.5), 1000).unwrap();
            assert!(row.is_consistent(), "T = {h}: {row:?}");
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ExampleSixParams::new(0.0, 0.5, 0.4, 0.0).is_err());
        assert!(ExampleSixParams::new(2.0, 0.0, 0.4, 0.0).is_err());
        assert!(ExampleSixParams::new(2.0, 0.5, 0.5, 0.0).is_err());
        assert!(ExampleSixParams::new(2.0, 0.5, 0.4, 1.0).is_err());
        let q = p(2.0, 0.5);
        assert_eq!(q.log_alpha(), -(2.0f64.powf(2.5)));
    }

    #[test]
    fn mc_is_deterministic_and_batch_stable() {
        let q = p(2.0, 0.5);
        let a = mc_terminal(&q, 10_000, 7).unwrap();
        let b = mc_terminal(&q, 10_000, 7).unwrap();
        assert_eq!(a, b);
        let c = mc_terminal(&q, 10_000, 8).unwrap();
        assert_ne!(a.mean_z.value, c.mean_z.value);
        assert!(mc_terminal(&q, 0, 7).is_err());
        let one = mc_terminal(&q, 1, 7).unwrap();
        assert_eq!(one.mean_z.standard_error, 0.0);
    }

    #[test]
    fn zero_noise_paths_follow_skeleton() {
        let q = p(2.0, 0.5);
        let g = path_grid_scaled(&q, 3, 5, 1, 0.0).unwrap();
        for row in &g.paths {
            for (k, &t) in g.times.iter().enumerate() {
                let want = (drift_integral(&q, t).unwrap() - 0.5 * t).exp();
                assert_relative_eq!(row[k], want, max_relative = 1e-15);
            }
        }
        assert_eq!(g.paths[0][0], 1.0);
    }

    #[test]
    fn path_grid_reproducible() {
        let q = p(2.0, 0.5);
        let a = path_grid(&q, 50, 11, 3).unwrap();
        let b = path_grid(&q, 50, 11, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.paths.iter().flatten().all(|&s| s > 0.0));
        assert!(path_grid(&q, 5, 1, 3).is_err());
    }
}
