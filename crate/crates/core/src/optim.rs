//! Nelder-Mead simplex minimisation under a hard evaluation budget.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("empty starting point")]
    EmptyStart,
    #[error("evaluation budget must be at least 1")]
    ZeroBudget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions<T> {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Stop once both the value range and the vertex spread fall below this.
    pub tol: T,
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: T,
    pub reflection: T,
    pub expansion: T,
    pub contraction: T,
    pub shrink: T,
}

impl<T: Real> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        NelderMeadOptions {
            max_evals: 2500,
            tol: T::of(1e-6),
            initial_step: T::of(0.25),
            reflection: T::one(),
            expansion: T::of(2.0),
            contraction: T::of(0.5),
            shrink: T::of(0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    /// Best point ever evaluated.
    pub x: Vec<T>,
    pub value: T,
    pub evaluations: usize,
    /// True when the spread criterion stopped the search before the budget.
    pub converged: bool,
    /// Objective value of every evaluation, in call order.
    pub history: Vec<T>,
}

struct Budgeted<F, T> {
    f: F,
    max: usize,
    history: Vec<T>,
    best: Option<(Vec<T>, T)>,
}

impl<T: Real, F: FnMut(&[T]) -> T> Budgeted<F, T> {
    /// `None` once the budget is spent.
    fn eval(&mut self, x: &[T]) -> Option<T> {
        if self.history.len() >= self.max {
            return None;
        }
        let v = (self.f)(x);
        self.history.push(v);
        let better = match &self.best {
            None => true,
            Some((_, b)) => v < *b || (b.is_nan() && !v.is_nan()),
        };
        if better {
            self.best = Some((x.to_vec(), v));
        }
        Some(v)
    }
}

fn affine<T: Real>(base: &[T], toward: &[T], t: T) -> Vec<T> {
    base.iter().zip(toward).map(|(&b, &w)| b + t * (w - b)).collect()
}

/// Minimise `f` from `x0`. The initial simplex is `x0` plus one vertex per
/// axis offset by `initial_step`.
pub fn nelder_mead<T, F>(f: F, x0: &[T], opts: &NelderMeadOptions<T>) -> Result<Minimum<T>, OptimError>
where
    T: Real,
    F: FnMut(&[T]) -> T,
{
    let n = x0.len();
    if n == 0 {
        return Err(OptimError::EmptyStart);
    }
    if opts.max_evals == 0 {
        return Err(OptimError::ZeroBudget);
    }
    let mut obj = Budgeted {
        f,
        max: opts.max_evals,
        history: Vec::with_capacity(opts.max_evals),
        best: None,
    };
    let converged = run(&mut obj, x0, opts);
    let (x, value) = obj.best.expect("at least one evaluation");
    Ok(Minimum {
        x,
        value,
        evaluations: obj.history.len(),
        converged,
        history: obj.history,
    })
}

fn run<T, F>(obj: &mut Budgeted<F, T>, x0: &[T], opts: &NelderMeadOptions<T>) -> bool
where
    T: Real,
    F: FnMut(&[T]) -> T,
{
    let n = x0.len();
    let mut simplex: Vec<Vec<T>> = Vec::with_capacity(n + 1);
    let mut values: Vec<T> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut v = x0.to_vec();
        if i > 0 {
            v[i - 1] += opts.initial_step;
        }
        let Some(fv) = obj.eval(&v) else { return false };
        simplex.push(v);
        values.push(fv);
    }

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let f_range = (values[n] - values[0]).abs();
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(&a, &b)| (a - b).abs()))
            .fold(T::zero(), T::max);
        if f_range < opts.tol && x_spread < opts.tol {
            return true;
        }

        let inv = T::one() / T::of(n as f64);
        let centroid: Vec<T> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<T>() * inv)
            .collect();

        let reflected = affine(&centroid, &simplex[n], -opts.reflection);
        let Some(f_r) = obj.eval(&reflected) else { return false };

        if f_r < values[0] {
            let expanded = affine(&centroid, &reflected, opts.expansion);
            let Some(f_e) = obj.eval(&expanded) else { return false };
            if f_e < f_r {
                simplex[n] = expanded;
                values[n] = f_e;
            } else {
                simplex[n] = reflected;
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_r;
            continue;
        }

        let (contracted, f_c, accept) = if f_r < values[n] {
            let x = affine(&centroid, &reflected, opts.contraction);
            let Some(fc) = obj.eval(&x) else { return false };
            (x, fc, fc <= f_r)
        } else {
            let x = affine(&centroid, &simplex[n], opts.contraction);
            let Some(fc) = obj.eval(&x) else { return false };
            (x, fc, fc < values[n])
        };
        if accept {
            simplex[n] = contracted;
            values[n] = f_c;
            continue;
        }

        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = affine(&best, &simplex[i], opts.shrink);
            let Some(fv) = obj.eval(&simplex[i]) else { return false };
            values[i] = fv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn quadratic_minimum() {
        let opts = NelderMeadOptions::<f64>::default();
        let m = nelder_mead(|x| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), &[0.0, 0.0], &opts)
            .unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 3.0).abs() < 1e-5 && (m.x[1] + 1.0).abs() < 1e-5);
        assert_eq!(m.history.len(), m.evaluations);
    }

    #[test]
    fn rosenbrock_with_budget() {
        let opts = NelderMeadOptions {
            max_evals: 5000,
            tol: 1e-10,
            ..Default::default()
        };
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert!(m.value < 1e-8, "{m:?}");
    }

    #[test]
    fn budget_is_never_exceeded() {
        for budget in [1usize, 2, 3, 7, 50] {
            let opts = NelderMeadOptions {
                max_evals: budget,
                ..Default::default()
            };
            let mut calls = 0;
            let m = nelder_mead(
                |x: &[f64]| {
                    calls += 1;
                    rosenbrock(x)
                },
                &[-1.2, 1.0],
                &opts,
            )
            .unwrap();
            assert_eq!(calls, budget);
            assert_eq!(m.evaluations, budget);
            let min = m.history.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(m.value, min);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let opts = NelderMeadOptions::<f32> {
            tol: 1e-4,
            ..Default::default()
        };
        let m = nelder_mead(|x: &[f32]| (x[0] - 0.5).powi(2), &[0.0f32], &opts).unwrap();
        assert!((m.x[0] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn rejects_degenerate_input() {
        let opts = NelderMeadOptions::<f64>::default();
        assert_eq!(
            nelder_mead(|_: &[f64]| 0.0, &[], &opts),
            Err(OptimError::EmptyStart)
        );
        let zero = NelderMeadOptions {
            max_evals: 0,
            ..opts
        };
        assert_eq!(
            nelder_mead(|_: &[f64]| 0.0, &[1.0], &zero),
            Err(OptimError::ZeroBudget)
        );
    }
}
