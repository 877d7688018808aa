//! BFGS minimization with central finite-difference gradients.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    /// Stop when the gradient 2-norm falls below this.
    pub grad_tol: f64,
    /// Stop when `|f_k - f_{k+1}| <= f_rel_tol * |f_k|`.
    pub f_rel_tol: f64,
    pub max_iter: usize,
    /// Largest trial step, relative to `max(1, |x|)`.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            f_rel_tol: 1e-12,
            max_iter: 500,
            max_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// Central-difference gradient with step `1e-6 * max(1, |x_i|)`.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &DVector<f64>) -> f64 {
    let v = f(x.as_slice());
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

fn grad<F: Fn(&[f64]) -> f64>(f: &F, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(central_gradient(f, x.as_slice()))
}

/// Minimizes `f` from `x0`. Every accepted step satisfies the Armijo
/// condition, so the returned value never exceeds `f(x0)`.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: BfgsOptions) -> Minimum {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = eval(&f, &x);
    if n == 0 || !fx.is_finite() {
        return Minimum {
            x: x0.to_vec(),
            value: fx,
            iterations: 0,
            converged: n == 0,
        };
    }
    let mut g = grad(&f, &x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;

    for iter in 0..opts.max_iter {
        if g.norm() < opts.grad_tol {
            return done(x, fx, iter, true);
        }
        let mut d = -(&h * &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            d = -g.clone();
            slope = g.dot(&d);
        }
        let cap = opts.max_step * x.norm().max(1.0);
        let dn = d.norm();
        if dn > cap {
            d *= cap / dn;
            slope *= cap / dn;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &d * alpha;
            let ft = eval(&f, &trial);
            if ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // No decrease available along the quasi-Newton direction; accept the
            // point when the gradient is small relative to the objective scale.
            let rel = g.amax() * x.norm().max(1.0) / fx.abs().max(1.0);
            return done(x, fx, iter, rel < 1e-5);
        };

        let g_new = grad(&f, &x_new);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        let small_change = (fx - f_new).abs() <= opts.f_rel_tol * fx.abs().max(f64::MIN_POSITIVE);
        x = x_new;
        fx = f_new;
        g = g_new;
        if small_change {
            return done(x, fx, iter + 1, true);
        }
        if sy > 1e-12 * s.norm() * y.norm() {
            if !scaled {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
    }
    let converged = g.norm() < opts.grad_tol;
    done(x, fx, opts.max_iter, converged)
}

fn done(x: DVector<f64>, value: f64, iterations: usize, converged: bool) -> Minimum {
    Minimum {
        x: x.iter().copied().collect(),
        value,
        iterations,
        converged,
    }
}
