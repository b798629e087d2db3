//! First-order minimisation of the composite objective, starting from the
//! observation itself and rebuilding the max-tree at every iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::losses::{composite_loss, LossBreakdown, LossConfig};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Adam,
    /// Plain steepest descent `f -= step_size * grad`.
    GradientDescent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig<T> {
    pub method: Method,
    pub step_size: T,
    pub beta1: T,
    pub beta2: T,
    pub eps_hat: T,
    pub max_iters: usize,
    pub plateau_patience: usize,
    pub plateau_tol: T,
    /// Carried for provenance; the optimiser itself is deterministic.
    pub seed: u64,
}

impl<T: Scalar> Default for OptimConfig<T> {
    fn default() -> Self {
        OptimConfig {
            method: Method::Adam,
            step_size: T::of(1e-2),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps_hat: T::of(1e-8),
            max_iters: 2000,
            plateau_patience: 50,
            plateau_tol: T::of(1e-9),
            seed: 0,
        }
    }
}

impl<T: Scalar> OptimConfig<T> {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.step_size > T::zero()) || !self.step_size.is_finite() {
            out.push(format!(
                "optim.step_size must be positive, got {}",
                self.step_size
            ));
        }
        for (name, b) in [("optim.beta1", self.beta1), ("optim.beta2", self.beta2)] {
            if !(b > T::zero() && b < T::one()) {
                out.push(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.eps_hat > T::zero()) || !self.eps_hat.is_finite() {
            out.push(format!(
                "optim.eps_hat must be positive, got {}",
                self.eps_hat
            ));
        }
        if self.max_iters == 0 {
            out.push("optim.max_iters must be positive".into());
        }
        if self.plateau_patience == 0 {
            out.push("optim.plateau_patience must be positive".into());
        }
        if !(self.plateau_tol >= T::zero()) || !self.plateau_tol.is_finite() {
            out.push(format!(
                "optim.plateau_tol must be non-negative, got {}",
                self.plateau_tol
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    Plateau,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::MaxIters => "max_iters",
            StopReason::Plateau => "plateau",
        })
    }
}

/// Outcome of a run. `loss_log[t]` is the objective at the image held after
/// `t` updates; the last entry belongs to `final_image`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub final_image: Image<T>,
    pub loss_log: Vec<LossBreakdown<T>>,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
}

/// Adam state over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    beta1: T,
    beta2: T,
    eps: T,
    step_size: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize, step_size: T, beta1: T, beta2: T, eps: T) -> Self {
        Adam {
            beta1,
            beta2,
            eps,
            step_size,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (one - self.beta1) * g;
            *v = self.beta2 * *v + (one - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = *p - self.step_size * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Minimises the composite objective from `y`.
pub fn optimize<T: Scalar>(
    y: &Image<T>,
    loss: &LossConfig<T>,
    opt: &OptimConfig<T>,
) -> Result<Trajectory<T>> {
    optimize_with(y, loss, opt, |_, _, _| {})
}

/// Like [`optimize`], calling `observe(iteration, image, breakdown)` after each
/// evaluation and before the update.
pub fn optimize_with<T, F>(
    y: &Image<T>,
    loss: &LossConfig<T>,
    opt: &OptimConfig<T>,
    mut observe: F,
) -> Result<Trajectory<T>>
where
    T: Scalar,
    F: FnMut(usize, &Image<T>, &LossBreakdown<T>),
{
    let mut problems = loss.problems();
    problems.extend(opt.problems());
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }

    let mut f = y.clone();
    let mut adam = Adam::new(f.len(), opt.step_size, opt.beta1, opt.beta2, opt.eps_hat);
    let mut log = Vec::new();
    let mut best = T::infinity();
    let mut stalled = 0usize;
    let mut stop = StopReason::MaxIters;

    for iter in 0..opt.max_iters {
        let eval = composite_loss(&f, y.values(), loss)?;
        let bd = eval.breakdown;
        if !bd.total.is_finite() {
            return Err(Error::NonFinite {
                what: "loss",
                iteration: iter,
            });
        }
        if eval.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: "gradient",
                iteration: iter,
            });
        }
        log.push(bd);
        observe(iter, &f, &bd);

        if best - bd.total < opt.plateau_tol {
            stalled += 1;
        } else {
            stalled = 0;
        }
        best = best.min(bd.total);
        if stalled >= opt.plateau_patience {
            stop = StopReason::Plateau;
            break;
        }
        if iter + 1 == opt.max_iters {
            break;
        }

        match opt.method {
            Method::Adam => adam.step(f.values_mut(), &eval.grad),
            Method::GradientDescent => {
                for (p, &g) in f.values_mut().iter_mut().zip(&eval.grad) {
                    *p = *p - opt.step_size * g;
                }
            }
        }
        if f.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "pixel value",
                iteration: iter,
            });
        }
    }

    Ok(Trajectory {
        final_image: f,
        iterations_run: log.len(),
        loss_log: log,
        stop_reason: stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Connectivity, Grid};

    #[test]
    fn adam_first_step_is_sign_times_step() {
        let mut adam = Adam::new(3, 0.1f64, 0.9, 0.999, 1e-12);
        let mut p = vec![0.0, 0.0, 0.0];
        adam.step(&mut p, &[2.0, -0.5, 0.0]);
        assert!((p[0] + 0.1).abs() < 1e-9);
        assert!((p[1] - 0.1).abs() < 1e-9);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let y = Image::from_signal(vec![0.0f64, 1.0]).unwrap();
        let opt = OptimConfig {
            beta1: 1.5,
            max_iters: 0,
            ..OptimConfig::default()
        };
        match optimize(&y, &LossConfig::default(), &opt) {
            Err(Error::Config(p)) => assert_eq!(p.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pure_data_term_stays_at_observation() {
        let g = Grid::new(5, 4, Connectivity::Conn8).unwrap();
        let y = Image::new((0..20).map(|i| (i as f64 * 0.37).sin()).collect(), g).unwrap();
        let loss = LossConfig {
            lambda1: 0.0,
            lambda2: 0.0,
            ..LossConfig::default()
        };
        let tr = optimize(&y, &loss, &OptimConfig::default()).unwrap();
        assert_eq!(tr.stop_reason, StopReason::Plateau);
        assert_eq!(tr.loss_log.len(), tr.iterations_run);
        assert!(tr.loss_log.last().unwrap().l2 < 1e-8);
    }

    #[test]
    fn non_finite_loss_aborts_with_iteration() {
        let y = Image::from_signal(vec![0.0f64, 1e300, 0.0]).unwrap();
        let loss = LossConfig {
            lambda1: 0.0,
            lambda2: 1.0,
            ..LossConfig::default()
        };
        match optimize(&y, &loss, &OptimConfig::default()) {
            Err(Error::NonFinite { iteration: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
