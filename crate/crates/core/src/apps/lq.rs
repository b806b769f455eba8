//! Robust scalar LQ problem with Gaussian `(U, V)` parameter boxes.
//!
//! `T_n(x, a, Z) = U x + V a + W`, `c_n = Q_n x^2 + R_n a^2`,
//! `c_N = Q_N x^2`, with `W` independent of `(U, V)` and centered under every
//! law. The value is `J_n(x) = K_n x^2 + const_n` where
//!
//! ```text
//! K_{n-1} = Q_{n-1} + K_n max_theta ( E[U^2] - E[UV]^2 / (R_{n-1}/K_n + E[V^2]) )
//! L_{n-1} = -E[UV] / (R_{n-1}/K_n + E[V^2])        (at the maximizing theta)
//! const_{n-1} = const_n + K_n max E[W^2]
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::TIE_TOL;
use crate::error::{Error, Result};
use crate::model::uniform_points;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn grid(&self, resolution: usize) -> Vec<f64> {
        if self.lo == self.hi {
            vec![self.lo]
        } else {
            uniform_points(self.lo, self.hi, resolution.max(2))
        }
    }
}

/// Parameter box of `(U, V, W)` for one stage. `sigma_*` are standard
/// deviations, `sigma_uv` the covariance, `w2` the second moment of `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub mu_u: Interval,
    pub sigma_u: Interval,
    pub mu_v: Interval,
    pub sigma_v: Interval,
    pub sigma_uv: Interval,
    pub w2: Interval,
}

impl ParamBox {
    /// Every coordinate a single point.
    pub fn degenerate(mu_u: f64, sigma_u: f64, mu_v: f64, sigma_v: f64, sigma_uv: f64, w2: f64) -> Self {
        Self {
            mu_u: Interval::point(mu_u),
            sigma_u: Interval::point(sigma_u),
            mu_v: Interval::point(mu_v),
            sigma_v: Interval::point(sigma_v),
            sigma_uv: Interval::point(sigma_uv),
            w2: Interval::point(w2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub mu_u: f64,
    pub sigma_u: f64,
    pub mu_v: f64,
    pub sigma_v: f64,
    pub sigma_uv: f64,
    pub w2: f64,
}

impl Theta {
    pub fn eu2(&self) -> f64 {
        self.sigma_u * self.sigma_u + self.mu_u * self.mu_u
    }

    pub fn ev2(&self) -> f64 {
        self.sigma_v * self.sigma_v + self.mu_v * self.mu_v
    }

    pub fn euv(&self) -> f64 {
        self.sigma_uv + self.mu_u * self.mu_v
    }

    /// `E[(U x + V a + W)^2]`.
    pub fn second_moment(&self, x: f64, a: f64) -> f64 {
        self.eu2() * x * x + 2.0 * self.euv() * x * a + self.ev2() * a * a + self.w2
    }
}

fn default_resolution() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LQParams {
    pub horizon: usize,
    /// `Q_0 .. Q_N`.
    pub q: Vec<f64>,
    /// `R_0 .. R_{N-1}`.
    pub r: Vec<f64>,
    /// Box of the stage-`n` disturbance, `n = 0 .. N-1`.
    pub boxes: Vec<ParamBox>,
    /// Grid points per non-degenerate interval.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Pin `sigma_u` and `sigma_v` to their maxima instead of searching them.
    #[serde(default)]
    pub trust_bracket_monotonicity: bool,
}

impl LQParams {
    fn check(&self) -> Result<()> {
        let n = self.horizon;
        if n == 0 || self.q.len() != n + 1 || self.r.len() != n || self.boxes.len() != n {
            return Err(Error::InvalidArgument(
                "need N >= 1, N+1 state weights, N control weights and N parameter boxes".into(),
            ));
        }
        if self.q.iter().any(|q| !(*q >= 0.0)) || self.r.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidArgument("need Q_n >= 0 and R_n > 0".into()));
        }
        for b in &self.boxes {
            for iv in [b.mu_u, b.sigma_u, b.mu_v, b.sigma_v, b.sigma_uv, b.w2] {
                if !(iv.lo <= iv.hi) || !iv.lo.is_finite() || !iv.hi.is_finite() {
                    return Err(Error::InvalidArgument("intervals need finite lo <= hi".into()));
                }
            }
            if b.sigma_u.lo < 0.0 || b.sigma_v.lo < 0.0 || b.w2.lo < 0.0 {
                return Err(Error::InvalidArgument("standard deviations and E[W^2] must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// PSD-feasible `(U, V)` grid of stage `n` (with `w2 = 0`), in a fixed
    /// lexicographic order.
    pub fn theta_grid(&self, n: usize) -> Vec<Theta> {
        let b = &self.boxes[n];
        let res = self.resolution;
        let pin = |iv: Interval| {
            if self.trust_bracket_monotonicity {
                vec![iv.hi]
            } else {
                iv.grid(res)
            }
        };
        let mut out = Vec::new();
        for &mu_u in &b.mu_u.grid(res) {
            for &sigma_u in &pin(b.sigma_u) {
                for &mu_v in &b.mu_v.grid(res) {
                    for &sigma_v in &pin(b.sigma_v) {
                        for &sigma_uv in &b.sigma_uv.grid(res) {
                            if sigma_uv * sigma_uv <= sigma_u * sigma_u * sigma_v * sigma_v {
                                out.push(Theta {
                                    mu_u,
                                    sigma_u,
                                    mu_v,
                                    sigma_v,
                                    sigma_uv,
                                    w2: 0.0,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LQSolution {
    /// `K_0 .. K_N`.
    pub k: Vec<f64>,
    /// `L_0 .. L_{N-1}`; the optimal action is `L_n x`.
    pub l: Vec<f64>,
    /// `const_0 .. const_N`.
    pub constant: Vec<f64>,
    /// Nature's parameter choice per stage; independent of the state.
    pub theta_star: Vec<Theta>,
}

impl LQSolution {
    pub fn value(&self, n: usize, x: f64) -> f64 {
        self.k[n] * x * x + self.constant[n]
    }
}

/// `E[U^2] - E[UV]^2 / (R/K + E[V^2])`.
fn bracket(t: &Theta, r: f64, k: f64) -> f64 {
    let e = t.euv();
    t.eu2() - e * e / (r / k + t.ev2())
}

/// Lowest index within [`TIE_TOL`] of the maximum.
fn argmax(vals: &[f64]) -> (f64, usize) {
    let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (best, vals.iter().position(|&v| v >= best - TIE_TOL).expect("nonempty"))
}

/// Backward recursion for `K`, `L` and the constants with nature's bracket
/// maximized by exhaustive search over the parameter grid.
pub fn lq_solve_closed_form(p: &LQParams) -> Result<LQSolution> {
    p.check()?;
    let horizon = p.horizon;
    let mut k = vec![0.0; horizon + 1];
    let mut constant = vec![0.0; horizon + 1];
    let mut l = vec![0.0; horizon];
    let mut theta_star = Vec::with_capacity(horizon);
    k[horizon] = p.q[horizon];
    for n in (0..horizon).rev() {
        let grid = p.theta_grid(n);
        if grid.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "stage {n}: no parameter point satisfies sigma_uv^2 <= sigma_u^2 sigma_v^2"
            )));
        }
        let w2_grid = p.boxes[n].w2.grid(p.resolution);
        let kn = k[n + 1];
        let (mut theta, gain) = if kn > 0.0 {
            let vals: Vec<f64> = grid.par_iter().map(|t| bracket(t, p.r[n], kn)).collect();
            let (best, i) = argmax(&vals);
            k[n] = p.q[n] + best * kn;
            let t = grid[i];
            (t, -t.euv() / (p.r[n] / kn + t.ev2()))
        } else {
            k[n] = p.q[n];
            (grid[0], 0.0)
        };
        let (w2_best, w) = argmax(&w2_grid.iter().map(|w| w * kn).collect::<Vec<_>>());
        theta.w2 = w2_grid[w];
        constant[n] = constant[n + 1] + w2_best;
        l[n] = gain;
        theta_star.push(theta);
    }
    theta_star.reverse();
    Ok(LQSolution {
        k,
        l,
        constant,
        theta_star,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LQVerification {
    /// `max |min_a max_theta f - (K_n x^2 + const_n)|` over stages and states.
    pub max_deviation: f64,
    /// `max (min_a max_theta f - max_theta min_a f)` over stages and states.
    pub max_interchange_gap: f64,
    /// Nature's maximizer at the numeric minimizer, per stage and sampled state.
    pub theta_argmax: Vec<Vec<Theta>>,
    /// Whether every recovered maximizer equals the closed-form one.
    pub theta_consistent: bool,
}

/// Recomputes every stage's robust Bellman step by brute force over the
/// action grid and the parameter grid, starting from the closed-form
/// continuation `K_{n+1} x^2 + const_{n+1}`.
pub fn lq_verify_stagewise(
    p: &LQParams,
    sol: &LQSolution,
    sample_states: &[f64],
    action_grid: &[f64],
) -> Result<LQVerification> {
    p.check()?;
    if action_grid.is_empty() {
        return Err(Error::InvalidArgument("action grid is empty".into()));
    }
    let mut max_deviation: f64 = 0.0;
    let mut max_gap: f64 = f64::NEG_INFINITY;
    let mut theta_argmax = Vec::with_capacity(p.horizon);
    let mut consistent = true;
    for n in 0..p.horizon {
        let kn = sol.k[n + 1];
        let w2_grid = p.boxes[n].w2.grid(p.resolution);
        let mut grid = Vec::with_capacity(p.theta_grid(n).len() * w2_grid.len());
        for t in p.theta_grid(n) {
            for &w2 in &w2_grid {
                grid.push(Theta { w2, ..t });
            }
        }
        let rows: Vec<(f64, f64, Theta)> = sample_states
            .par_iter()
            .map(|&x| {
                let f = |a: f64, t: &Theta| {
                    p.q[n] * x * x + p.r[n] * a * a + t.second_moment(x, a) * kn + sol.constant[n + 1]
                };
                let mut upper = f64::INFINITY;
                let mut best_a = action_grid[0];
                for &a in action_grid {
                    let m = grid.iter().map(|t| f(a, t)).fold(f64::NEG_INFINITY, f64::max);
                    if m < upper - TIE_TOL {
                        upper = m;
                        best_a = a;
                    }
                }
                let lower = grid
                    .iter()
                    .map(|t| action_grid.iter().map(|&a| f(a, t)).fold(f64::INFINITY, f64::min))
                    .fold(f64::NEG_INFINITY, f64::max);
                let (_, i) = argmax(&grid.iter().map(|t| f(best_a, t)).collect::<Vec<_>>());
                (upper - sol.value(n, x), upper - lower, grid[i])
            })
            .collect();
        let mut thetas = Vec::with_capacity(rows.len());
        for (dev, gap, theta) in rows {
            max_deviation = max_deviation.max(dev.abs());
            max_gap = max_gap.max(gap);
            consistent &= kn == 0.0 || theta == sol.theta_star[n];
            thetas.push(theta);
        }
        theta_argmax.push(thetas);
    }
    Ok(LQVerification {
        max_deviation,
        max_interchange_gap: max_gap.max(0.0),
        theta_argmax,
        theta_consistent: consistent,
    })
}

/// Worst-case error of minimizing the stage quadratics over an action grid
/// of spacing `step`: `max_n (R_n + K_{n+1} max E[V^2]) (step/2)^2`.
pub fn lq_grid_tolerance(p: &LQParams, sol: &LQSolution, step: f64) -> f64 {
    (0..p.horizon)
        .map(|n| {
            let ev2 = p
                .theta_grid(n)
                .iter()
                .map(Theta::ev2)
                .fold(0.0, f64::max);
            (p.r[n] + sol.k[n + 1] * ev2) * (step / 2.0) * (step / 2.0)
        })
        .fold(0.0, f64::max)
}
