//! Decoy-state bounds on the photon-number yields `Y_nm`.
//!
//! Each of the nine decoy pairs `(a, b)` constrains a Poisson mixture of the
//! yields. Yields up to `n_cut` photons per side are LP variables; the mass
//! beyond the truncation is carried as a tail term whose yields can be
//! anything in `[0, 1]`.

mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::poisson_weights;
use simplex::{phase_one, FeasibleBasis, LpOutcome};

/// Coefficients below this (after row scaling) are moved into the tail.
const NEGLIGIBLE_COEFFICIENT: f64 = 1e-14;

/// Interval bracketing a true gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainInterval {
    pub q_low: f64,
    pub q_up: f64,
}

impl GainInterval {
    pub fn exact(q: f64) -> Self {
        Self { q_low: q, q_up: q }
    }

    pub fn new(q_low: f64, q_up: f64) -> Result<Self> {
        if !(0.0 <= q_low && q_low <= q_up && q_up <= 1.0) {
            return Err(Error::Config(format!(
                "gain interval [{q_low}, {q_up}] must satisfy 0 <= low <= up <= 1"
            )));
        }
        Ok(Self { q_low, q_up })
    }

    pub fn width(&self) -> f64 {
        self.q_up - self.q_low
    }
}

/// Gain intervals indexed `[alice][bob]` in `[mu, nu, omega]` order.
pub type GainMatrix = [[GainInterval; 3]; 3];

/// How observed frequencies are widened into intervals for finite data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationMethod {
    /// Zero-width intervals (asymptotic limit).
    Exact,
    /// Two-sided additive Hoeffding interval.
    Hoeffding,
    /// Multiplicative Chernoff interval around the observed count.
    Chernoff,
}

impl DeviationMethod {
    /// Interval for the success probability given `successes` out of
    /// `trials`. Counts are real-valued so expected counts can be fed in.
    pub fn interval(&self, successes: f64, trials: f64, eps: f64) -> Result<GainInterval> {
        if !(trials > 0.0) {
            return Err(Error::InsufficientData("deviation needs at least one trial".into()));
        }
        if !(successes >= 0.0 && successes <= trials) {
            return Err(Error::Config(format!(
                "successes {successes} must lie in [0, trials = {trials}]"
            )));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::domain("eps", eps, "0 < eps < 1"));
        }
        let q = successes / trials;
        Ok(match self {
            DeviationMethod::Exact => GainInterval::exact(q),
            DeviationMethod::Hoeffding => {
                let half = ((2.0 / eps).ln() / (2.0 * trials)).sqrt();
                GainInterval {
                    q_low: (q - half).max(0.0),
                    q_up: (q + half).min(1.0),
                }
            }
            DeviationMethod::Chernoff => {
                let (low, up) = chernoff_counts(successes, eps);
                GainInterval {
                    q_low: (low / trials).clamp(0.0, q),
                    q_up: (up / trials).clamp(q, 1.0),
                }
            }
        })
    }
}

/// Expected-count bounds `(low, up)` for an observed count `k`, from the
/// tails `exp(-d^2 / (2 mu + d))` (observed above the mean) and
/// `exp(-d^2 / (2 mu))` (observed below), each set to `eps`.
fn chernoff_counts(k: f64, eps: f64) -> (f64, f64) {
    let l = (1.0 / eps).ln();
    let below = 0.5 * (-l + (l * l + 8.0 * k * l).sqrt());
    let above = l + (l * l + 2.0 * k * l).sqrt();
    ((k - below).max(0.0), k + above)
}

/// Two-sided Hoeffding interval `q +/- sqrt(ln(2/eps) / (2 trials))`.
pub fn finite_deviation(successes: u64, trials: u64, eps: f64) -> Result<GainInterval> {
    if trials == 0 {
        return Err(Error::InsufficientData("deviation needs at least one trial".into()));
    }
    if successes > trials {
        return Err(Error::Config(format!(
            "successes {successes} exceed trials {trials}"
        )));
    }
    DeviationMethod::Hoeffding.interval(successes as f64, trials as f64, eps)
}

/// Lower and upper yield bounds for every `0 <= n, m <= n_cut`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldBounds {
    pub n_cut: usize,
    pub y_low: Vec<Vec<f64>>,
    pub y_up: Vec<Vec<f64>>,
    /// Set when the program was infeasible or the solver failed; the bounds
    /// are then the trivial `[0, 1]`.
    pub trivial_fallback: bool,
}

impl YieldBounds {
    pub fn trivial(n_cut: usize) -> Self {
        Self {
            n_cut,
            y_low: vec![vec![0.0; n_cut + 1]; n_cut + 1],
            y_up: vec![vec![1.0; n_cut + 1]; n_cut + 1],
            trivial_fallback: false,
        }
    }

    /// Upper bound on `Y_nm`; entries beyond the truncation are 1.
    pub fn upper(&self, n: usize, m: usize) -> f64 {
        if n > self.n_cut || m > self.n_cut {
            1.0
        } else {
            self.y_up[n][m]
        }
    }
}

fn check_decoys(decoys: [f64; 3]) -> Result<()> {
    let [mu, nu, omega] = decoys;
    if !(mu > nu && nu > omega && omega >= 0.0) {
        return Err(Error::Config(format!(
            "decoys must satisfy mu > nu > omega >= 0, got {decoys:?}"
        )));
    }
    Ok(())
}

/// The decoy linear program with a feasible basis already found, ready to
/// bound any individual yield.
#[derive(Debug, Clone)]
pub struct DecoyProgram {
    n_cut: usize,
    basis: Option<FeasibleBasis>,
}

impl DecoyProgram {
    pub fn new(gains: &GainMatrix, decoys: [f64; 3], n_cut: usize) -> Result<Self> {
        check_decoys(decoys)?;
        let dim = n_cut + 1;
        let vars = dim * dim;
        let weights: Vec<Vec<f64>> = decoys.iter().map(|&d| poisson_weights(d, n_cut)).collect();

        let rows = 9;
        let cols = vars + rows;
        let mut a = vec![0.0; rows * cols];
        let mut b = vec![0.0; rows];
        let mut upper = vec![1.0; cols];
        for (k, (ia, ib)) in (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).enumerate() {
            let gain = gains[ia][ib];
            let row = &mut a[k * cols..(k + 1) * cols];
            let mut scale = 0.0f64;
            for n in 0..dim {
                for m in 0..dim {
                    let c = weights[ia][n] * weights[ib][m];
                    row[n * dim + m] = c;
                    scale = scale.max(c);
                }
            }
            let mut kept = 0.0;
            for c in row[..vars].iter_mut() {
                *c /= scale;
                if *c < NEGLIGIBLE_COEFFICIENT {
                    *c = 0.0;
                } else {
                    kept += *c;
                }
            }
            let tail = (1.0 / scale - kept).max(0.0);
            let hi = gain.q_up / scale;
            let lo = gain.q_low / scale - tail;
            row[vars + k] = 1.0;
            b[k] = hi;
            upper[vars + k] = (hi - lo).max(0.0);
        }
        let lower = vec![0.0; cols];
        let basis = phase_one(&a, &b, &lower, &upper).ok();
        Ok(Self { n_cut, basis })
    }

    /// False when the program was infeasible or the solver broke down.
    pub fn is_feasible(&self) -> bool {
        self.basis.is_some()
    }

    fn solve(&self, n: usize, m: usize, sign: f64) -> Option<f64> {
        let basis = self.basis.as_ref()?;
        let dim = self.n_cut + 1;
        let mut cost = vec![0.0; dim * dim];
        cost[n * dim + m] = sign;
        match basis.minimize(&cost) {
            LpOutcome::Optimal(v) => Some((sign * v).clamp(0.0, 1.0)),
            _ => None,
        }
    }

    /// Largest `Y_nm` consistent with the gains; 1 if no information.
    pub fn upper(&self, n: usize, m: usize) -> f64 {
        if n > self.n_cut || m > self.n_cut {
            return 1.0;
        }
        self.solve(n, m, -1.0).unwrap_or(1.0)
    }

    /// Smallest `Y_nm` consistent with the gains; 0 if no information.
    pub fn lower(&self, n: usize, m: usize) -> f64 {
        if n > self.n_cut || m > self.n_cut {
            return 0.0;
        }
        self.solve(n, m, 1.0).unwrap_or(0.0)
    }

    /// Upper bounds for `(n, m)` pairs accepted by `want`; every other
    /// entry keeps the trivial `[0, 1]`.
    pub fn bounds_where(&self, want: impl Fn(usize, usize) -> bool) -> YieldBounds {
        let mut out = YieldBounds::trivial(self.n_cut);
        out.trivial_fallback = !self.is_feasible();
        if self.is_feasible() {
            for n in 0..=self.n_cut {
                for m in 0..=self.n_cut {
                    if want(n, m) {
                        out.y_up[n][m] = self.upper(n, m);
                    }
                }
            }
        }
        out
    }
}

/// Solves the min and max programs for every yield `Y_nm`, `n, m <= n_cut`.
/// Infeasible programs (possible with noisy finite data) fall back to
/// `[0, 1]` with `trivial_fallback` set.
pub fn yield_bounds_lp(gains: &GainMatrix, decoys: [f64; 3], n_cut: usize) -> Result<YieldBounds> {
    let program = DecoyProgram::new(gains, decoys, n_cut)?;
    let mut out = YieldBounds::trivial(n_cut);
    if !program.is_feasible() {
        out.trivial_fallback = true;
        return Ok(out);
    }
    for n in 0..=n_cut {
        for m in 0..=n_cut {
            let up = program.upper(n, m);
            let low = program.lower(n, m).min(up);
            out.y_low[n][m] = low;
            out.y_up[n][m] = up;
        }
    }
    Ok(out)
}
