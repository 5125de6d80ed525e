//! Dense bounded-variable primal simplex for small problems of the form
//!
//! ```text
//!   minimize c.x   subject to   A x = b,   l <= x <= u
//! ```
//!
//! Phase one is solved once; the resulting feasible basis can then be reused
//! for any number of objectives.

const PIVOT_TOL: f64 = 1e-11;
const OPT_TOL: f64 = 1e-13;
const FEAS_TOL: f64 = 1e-11;
const MAX_ITERS: usize = 20_000;
/// After this many iterations switch to Bland's rule to break cycling.
const BLAND_AFTER: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone)]
pub(crate) struct FeasibleBasis {
    rows: usize,
    cols: usize,
    /// `B^-1 A`, row-major.
    tableau: Vec<f64>,
    basic_values: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal(f64),
    Infeasible,
    /// Iteration limit or numerical breakdown.
    Failed,
}

/// Finds a feasible basis for `A x = b`, `l <= x <= u`, or `None` when the
/// system is infeasible. `a` is row-major with `rows * cols` entries.
pub(crate) fn phase_one(
    a: &[f64],
    b: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Result<FeasibleBasis, LpOutcome> {
    let rows = b.len();
    let structural = lower.len();
    debug_assert_eq!(a.len(), rows * structural);
    let cols = structural + rows;

    let mut tableau = vec![0.0; rows * cols];
    let mut basic_values = vec![0.0; rows];
    for i in 0..rows {
        // residual with every structural variable at its lower bound
        let mut residual = b[i];
        for j in 0..structural {
            residual -= a[i * structural + j] * lower[j];
        }
        let sign = if residual < 0.0 { -1.0 } else { 1.0 };
        for j in 0..structural {
            tableau[i * cols + j] = sign * a[i * structural + j];
        }
        tableau[i * cols + structural + i] = 1.0;
        basic_values[i] = sign * residual;
    }

    let mut lo = lower.to_vec();
    let mut up = upper.to_vec();
    lo.extend(std::iter::repeat(0.0).take(rows));
    up.extend(std::iter::repeat(f64::INFINITY).take(rows));

    let mut status = vec![Status::AtLower; structural];
    status.extend(std::iter::repeat(Status::Basic).take(rows));

    let mut fb = FeasibleBasis {
        rows,
        cols,
        tableau,
        basic_values,
        basis: (structural..cols).collect(),
        status,
        lower: lo,
        upper: up,
    };

    let mut cost = vec![0.0; cols];
    for c in cost.iter_mut().skip(structural) {
        *c = 1.0;
    }
    match fb.run(&cost) {
        LpOutcome::Optimal(v) if v <= FEAS_TOL * (1.0 + b.iter().fold(0.0f64, |m, x| m.max(x.abs()))) => {}
        LpOutcome::Optimal(_) | LpOutcome::Infeasible => return Err(LpOutcome::Infeasible),
        LpOutcome::Failed => return Err(LpOutcome::Failed),
    }
    // pin artificials at zero so they never re-enter
    for j in structural..cols {
        fb.upper[j] = 0.0;
        if fb.status[j] != Status::Basic {
            fb.status[j] = Status::AtLower;
        } else {
            let r = fb.basis.iter().position(|&v| v == j).unwrap();
            fb.basic_values[r] = 0.0;
        }
    }
    Ok(fb)
}

impl FeasibleBasis {
    /// Minimizes `cost . x` over structural variables, starting from this
    /// basis. The basis itself is left untouched.
    pub(crate) fn minimize(&self, cost: &[f64]) -> LpOutcome {
        let mut work = self.clone();
        let mut full = cost.to_vec();
        full.resize(self.cols, 0.0);
        work.run(&full)
    }

    fn value_of(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::AtLower => self.lower[j],
            Status::AtUpper => self.upper[j],
            Status::Basic => {
                let r = self.basis.iter().position(|&v| v == j).unwrap();
                self.basic_values[r]
            }
        }
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        (0..self.cols)
            .filter(|&j| cost[j] != 0.0)
            .map(|j| cost[j] * self.value_of(j))
            .sum()
    }

    fn run(&mut self, cost: &[f64]) -> LpOutcome {
        let (rows, cols) = (self.rows, self.cols);
        // reduced costs d = c - c_B B^-1 A
        let mut reduced = cost.to_vec();
        for i in 0..rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tableau[i * cols..(i + 1) * cols];
                for j in 0..cols {
                    reduced[j] -= cb * row[j];
                }
            }
        }

        for iter in 0..MAX_ITERS {
            let bland = iter >= BLAND_AFTER;
            let mut entering = None;
            let mut best = 0.0;
            for j in 0..cols {
                if self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let score = match self.status[j] {
                    Status::AtLower if reduced[j] < -OPT_TOL => -reduced[j],
                    Status::AtUpper if reduced[j] > OPT_TOL => reduced[j],
                    _ => continue,
                };
                if bland {
                    entering = Some(j);
                    break;
                }
                if score > best {
                    best = score;
                    entering = Some(j);
                }
            }
            let Some(j) = entering else {
                return LpOutcome::Optimal(self.objective(cost));
            };
            let dir = if self.status[j] == Status::AtLower { 1.0 } else { -1.0 };

            // ratio test
            let mut step = self.upper[j] - self.lower[j];
            let mut leaving: Option<(usize, bool)> = None;
            let mut leaving_pivot = 0.0;
            for i in 0..rows {
                let alpha = dir * self.tableau[i * cols + j];
                let bi = self.basis[i];
                let limit = if alpha > PIVOT_TOL {
                    ((self.basic_values[i] - self.lower[bi]) / alpha).max(0.0)
                } else if alpha < -PIVOT_TOL && self.upper[bi].is_finite() {
                    ((self.upper[bi] - self.basic_values[i]) / -alpha).max(0.0)
                } else {
                    continue;
                };
                let better = limit < step
                    || (leaving.is_some() && limit == step && alpha.abs() > leaving_pivot);
                if better {
                    step = limit;
                    leaving = Some((i, alpha > 0.0));
                    leaving_pivot = alpha.abs();
                }
            }
            if !step.is_finite() {
                return LpOutcome::Failed;
            }

            for i in 0..rows {
                self.basic_values[i] -= dir * step * self.tableau[i * cols + j];
            }

            match leaving {
                None => {
                    self.status[j] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                }
                Some((r, to_lower)) => {
                    let out = self.basis[r];
                    self.status[out] = if to_lower { Status::AtLower } else { Status::AtUpper };
                    let entering_value = if dir > 0.0 {
                        self.lower[j] + step
                    } else {
                        self.upper[j] - step
                    };
                    self.pivot(r, j, &mut reduced);
                    self.basic_values[r] = entering_value;
                    self.basis[r] = j;
                    self.status[j] = Status::Basic;
                }
            }
        }
        LpOutcome::Failed
    }

    fn pivot(&mut self, r: usize, j: usize, reduced: &mut [f64]) {
        let cols = self.cols;
        let p = self.tableau[r * cols + j];
        for v in &mut self.tableau[r * cols..(r + 1) * cols] {
            *v /= p;
        }
        let (before, rest) = self.tableau.split_at_mut(r * cols);
        let (pivot_row, after) = rest.split_at_mut(cols);
        for row in before.chunks_exact_mut(cols).chain(after.chunks_exact_mut(cols)) {
            let f = row[j];
            if f != 0.0 {
                for (x, &pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * pr;
                }
                row[j] = 0.0;
            }
        }
        let f = reduced[j];
        if f != 0.0 {
            for (x, &pr) in reduced.iter_mut().zip(pivot_row.iter()) {
                *x -= f * pr;
            }
            reduced[j] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_box_problem() {
        // x + y = 1.5, 0 <= x, y <= 1: max x -> 1, min x -> 0.5
        let a = [1.0, 1.0];
        let fb = phase_one(&a, &[1.5], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        match fb.minimize(&[-1.0, 0.0]) {
            LpOutcome::Optimal(v) => assert!((v + 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        match fb.minimize(&[1.0, 0.0]) {
            LpOutcome::Optimal(v) => assert!((v - 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_detected() {
        let a = [1.0, 1.0];
        assert_eq!(
            phase_one(&a, &[3.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap_err(),
            LpOutcome::Infeasible
        );
    }

    #[test]
    fn ranged_rows_via_slack() {
        // 0.2 <= x + 2y <= 0.6 written as x + 2y + s = 0.6, 0 <= s <= 0.4
        let a = [1.0, 2.0, 1.0];
        let fb = phase_one(&a, &[0.6], &[0.0, 0.0, 0.0], &[1.0, 1.0, 0.4]).unwrap();
        let max_y = match fb.minimize(&[0.0, -1.0, 0.0]) {
            LpOutcome::Optimal(v) => -v,
            other => panic!("{other:?}"),
        };
        assert!((max_y - 0.3).abs() < 1e-12);
        let min_x = match fb.minimize(&[1.0, 0.0, 0.0]) {
            LpOutcome::Optimal(v) => v,
            other => panic!("{other:?}"),
        };
        assert!(min_x.abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_row() {
        // x - y = -0.5 -> max x = 0.5 with y <= 1
        let a = [1.0, -1.0];
        let fb = phase_one(&a, &[-0.5], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        match fb.minimize(&[-1.0, 0.0]) {
            LpOutcome::Optimal(v) => assert!((v + 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
