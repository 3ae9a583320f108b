//! Multi-restart Nelder–Mead fit and canonical parameter form.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{CostFunction, Discrepancy, TrialParams};
use crate::error::{input, Result};
use crate::simulator::shot_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMead {
    /// Stop once the simplex cost spread falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { tolerance: 1e-8, max_iterations: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<const D: usize> {
    pub x: [f64; D],
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½, shrink ½).
pub fn nelder_mead<const D: usize>(
    f: impl Fn(&[f64; D]) -> f64,
    start: [f64; D],
    steps: [f64; D],
    opts: &NelderMead,
) -> Minimum<D> {
    let mut simplex: Vec<([f64; D], f64)> = Vec::with_capacity(D + 1);
    simplex.push((start, f(&start)));
    for i in 0..D {
        let mut p = start;
        p[i] += steps[i];
        simplex.push((p, f(&p)));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[D].1 - simplex[0].1 <= opts.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = [0.0; D];
        for (p, _) in &simplex[..D] {
            for i in 0..D {
                centroid[i] += p[i] / D as f64;
            }
        }
        let along = |t: f64| -> [f64; D] { std::array::from_fn(|i| centroid[i] + t * (simplex[D].0[i] - centroid[i])) };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[D] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[D - 1].1 {
            simplex[D] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[D].1 {
                let x = along(-0.5);
                (x, f(&x))
            } else {
                let x = along(0.5);
                (x, f(&x))
            };
            if fc < fr.min(simplex[D].1) {
                simplex[D] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    v.0 = std::array::from_fn(|i| best[i] + 0.5 * (v.0[i] - best[i]));
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Minimum { x: simplex[0].0, value: simplex[0].1, iterations, converged }
}

/// `ϑ ∈ [0, π)` and `ε0 ≤ ε1`, using the relabeling symmetry.
pub fn canonicalize(p: &TrialParams) -> TrialParams {
    let mut out = *p;
    out.theta = out.theta.rem_euclid(PI);
    if out.eps[0] > out.eps[1] {
        out.eps.swap(0, 1);
        out.theta = (out.theta - FRAC_PI_2).rem_euclid(PI);
    }
    out
}

/// Maps both energies into `[start, start + period)` and canonicalizes.
pub fn canonicalize_in_window(p: &TrialParams, start: f64, period: f64) -> TrialParams {
    let mut out = *p;
    for e in &mut out.eps {
        *e = start + (*e - start).rem_euclid(period);
    }
    canonicalize(&out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub nelder_mead: NelderMead,
    pub discrepancy: Discrepancy,
    /// Lower edge of the reported energy window; the grid origin of shift 0
    /// when absent.
    pub window_start: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 300,
            nelder_mead: NelderMead::default(),
            discrepancy: Discrepancy::L1,
            window_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: TrialParams,
    pub cost: f64,
    pub restarts: usize,
    pub converged: usize,
    pub best_cost: f64,
    pub median_cost: f64,
    pub window: [f64; 2],
    pub seed: u64,
    /// Mean discrepancy of the data to a noiseless reference set, when supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference_l1: Option<f64>,
}

/// Best of `restarts` Nelder–Mead runs from uniform random starts.
pub fn optimize(cost: &CostFunction, config: &OptimizerConfig, seed: u64) -> Result<FitResult> {
    if config.restarts == 0 {
        return input("at least one restart is required");
    }
    let period = cost.settings.period();
    let start = config.window_start.unwrap_or(cost.settings.e_orig_at(0));
    let steps = [0.25, 0.5 / cost.settings.t0, 0.5 / cost.settings.t0];
    let runs: Vec<Minimum<3>> = (0..config.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = shot_rng(seed, i as u64);
            let x0 = [
                rng.random_range(0.0..PI),
                start + rng.random_range(0.0..period),
                start + rng.random_range(0.0..period),
            ];
            nelder_mead(|x| cost.eval_raw(x[0], [x[1], x[2]]), x0, steps, &config.nelder_mead)
        })
        .collect();
    let finite: Vec<&Minimum<3>> = runs.iter().filter(|m| m.value.is_finite()).collect();
    let converged: Vec<&Minimum<3>> = finite.iter().copied().filter(|m| m.converged).collect();
    let pool = if converged.is_empty() { &finite } else { &converged };
    let best = pool
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| crate::Error::Internal("every restart diverged".into()))?;
    let mut values: Vec<f64> = pool.iter().map(|m| m.value).collect();
    values.sort_by(f64::total_cmp);
    let params = canonicalize_in_window(&TrialParams::from_array(best.x, cost.sector), start, period);
    Ok(FitResult {
        cost: cost.eval(&params),
        params,
        restarts: config.restarts,
        converged: converged.len(),
        best_cost: values[0],
        median_cost: values[values.len() / 2],
        window: [start, start + period],
        seed,
        reference_l1: None,
    })
}

/// Shortest distance between two energies on the circle of circumference `period`.
pub fn periodic_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sector;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn minimizes_a_quadratic() {
        let m = nelder_mead(
            |x: &[f64; 2]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            [0.0, 0.0],
            [0.5, 0.5],
            &NelderMead { tolerance: 1e-14, max_iterations: 2000 },
        );
        assert!(m.converged);
        assert_abs_diff_eq!(m.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(m.x[1], -2.0, epsilon = 1e-5);
    }

    #[test]
    fn canonical_examples() {
        let p = canonicalize(&TrialParams::new(0.2 * PI, -0.1, -0.7, Sector::Electron));
        assert_abs_diff_eq!(p.theta, 0.7 * PI, epsilon = 1e-12);
        assert_eq!(p.eps, [-0.7, -0.1]);
        let q = TrialParams::new(1.0, -0.5, 0.2, Sector::Hole);
        assert_eq!(canonicalize(&q), q);
        let w = canonicalize_in_window(&TrialParams::new(4.0, 1.0, -1.2, Sector::Hole), -0.8, 1.6);
        assert!(w.eps[0] <= w.eps[1] && w.eps.iter().all(|e| (-0.8..0.8).contains(e)));
        assert_abs_diff_eq!(periodic_distance(-0.79, 0.79, 1.6), 0.02, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn canonical_form_is_idempotent(t in -10.0f64..10.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let c = canonicalize(&TrialParams::new(t, a, b, Sector::Electron));
            prop_assert!((0.0..PI).contains(&c.theta) && c.eps[0] <= c.eps[1]);
            prop_assert_eq!(canonicalize(&c), c);
        }
    }
}
