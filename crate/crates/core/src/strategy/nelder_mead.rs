//! Downhill simplex on the unit cube. Trial points are projected back into
//! `[0, 1]^d`, which is all the box handling the intensity search needs.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    pub max_evals: usize,
    /// Stop once the simplex is this small (max coordinate spread)...
    pub x_tol: f64,
    /// ...and the values agree to this relative tolerance.
    pub f_rel_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.15,
            max_evals: 600,
            x_tol: 1e-5,
            f_rel_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

fn project(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

pub fn minimize(f: &mut impl FnMut(&[f64]) -> f64, start: &[f64], opts: &NelderMeadOptions) -> Minimum {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let dim = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let mut x0 = start.to_vec();
    project(&mut x0);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), f0));
    for i in 0..dim {
        let mut xi = x0.clone();
        // step inward when the start sits on the upper face
        xi[i] = if xi[i] + opts.initial_step <= 1.0 {
            xi[i] + opts.initial_step
        } else {
            xi[i] - opts.initial_step
        };
        project(&mut xi);
        let fi = eval(&xi, &mut evals);
        simplex.push((xi, fi));
    }

    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let spread = (0..dim)
            .map(|k| {
                let (lo, hi) = simplex
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0[k]), hi.max(p.0[k])));
                hi - lo
            })
            .fold(0.0, f64::max);
        if spread < opts.x_tol && (worst - best).abs() <= opts.f_rel_tol * best.abs().max(1e-300) {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for p in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(&p.0) {
                *c += v / dim as f64;
            }
        }
        let toward = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (w - c))
                .collect();
            project(&mut x);
            x
        };

        let xr = toward(-ALPHA);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = toward(-GAMMA);
            let fe = eval(&xe, &mut evals);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[dim].1 {
            let x = toward(-RHO);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = toward(RHO);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if fc < simplex[dim].1.min(fr) {
            simplex[dim] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best_x = simplex[0].0.clone();
        for p in simplex.iter_mut().skip(1) {
            for (v, b) in p.0.iter_mut().zip(&best_x) {
                *v = b + SIGMA * (*v - b);
            }
            p.1 = eval(&p.0, &mut evals);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Minimum { x, f, evals }
}

/// Halton point `index` (1-based) in `dim` dimensions.
pub fn halton(index: usize, dim: usize) -> Vec<f64> {
    const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    (0..dim)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_quadratic_minimum() {
        let mut f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] - 0.7).powi(2) + 1.0;
        let m = minimize(&mut f, &[0.9, 0.1], &NelderMeadOptions::default());
        assert!((m.x[0] - 0.3).abs() < 1e-4, "{:?}", m.x);
        assert!((m.x[1] - 0.7).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn respects_the_box() {
        let mut f = |x: &[f64]| -(x[0] + x[1]);
        let m = minimize(&mut f, &[0.5, 0.5], &NelderMeadOptions::default());
        assert!(m.x.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((m.f + 2.0).abs() < 1e-6);
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(1, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(2, 2), vec![0.25, 2.0 / 3.0]);
    }
}
