//! Finite-difference oracles for the vertical and horizontal derivatives.
//!
//! These work on values only: the vertical oracle bumps the stopped path by
//! `±h e_i 1_{[t,T]}` and re-evaluates from scratch, the horizontal oracle
//! evaluates the stopped path at a later time.

use super::Functional;
use crate::error::Result;
use crate::path::{stop_path_at, SampledPath};

/// Finite-difference estimate with the step that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDifference {
    pub estimate: Vec<f64>,
    pub step: f64,
    /// Set when the step is too small relative to the path scale.
    pub warning: Option<String>,
}

/// `10^{-5} (1 + |ω(t)|)`.
pub fn default_vertical_step(x: &[f64]) -> f64 {
    1e-5 * (1.0 + norm(x))
}

/// `10^{-8} (1 + t)`: forward differences need a much smaller step than
/// central ones to reach the same accuracy.
pub fn default_horizontal_step(t: f64) -> f64 {
    1e-8 * (1.0 + t.abs())
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn step_warning(h: f64, scale: f64) -> Option<String> {
    let floor = 1e3 * f64::EPSILON * scale;
    (h < floor).then(|| format!("step {h:e} is below the rounding floor {floor:e}"))
}

/// Stopped path at `k` with `delta` added on `[t_k, T]`.
fn bumped(stopped: &SampledPath, k: usize, delta: &[f64]) -> Result<SampledPath> {
    let d = stopped.dim();
    let mut values = stopped.values().to_vec();
    for row in values[k * d..].chunks_mut(d) {
        for (v, e) in row.iter_mut().zip(delta) {
            *v += e;
        }
    }
    SampledPath::new(stopped.grid(), d, values, "bumped", None)
}

fn value_at(f: &Functional, path: &SampledPath, k: usize) -> f64 {
    f.value(&f.state_direct(path, k))
}

/// Central difference of `F(t, ω_t + h e_i 1_{[t,T]})` in `h`, per coordinate.
pub fn fd_vertical(f: &Functional, t: f64, path: &SampledPath, h: Option<f64>) -> Result<FiniteDifference> {
    f.check_path(path)?;
    let k = path.grid().snap(t)?;
    let stopped = stop_path_at(path, k);
    let h = h.unwrap_or_else(|| default_vertical_step(path.row(k)));
    let d = path.dim();
    let mut estimate = Vec::with_capacity(d);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = h;
        let up = value_at(f, &bumped(&stopped, k, &e)?, k);
        e[i] = -h;
        let down = value_at(f, &bumped(&stopped, k, &e)?, k);
        estimate.push((up - down) / (2.0 * h));
    }
    Ok(FiniteDifference {
        estimate,
        step: h,
        warning: step_warning(h, 1.0 + norm(path.row(k))),
    })
}

/// Second central differences of vertical bumps, row-major `d x d`.
pub fn fd_vertical_hess(f: &Functional, t: f64, path: &SampledPath, h: Option<f64>) -> Result<FiniteDifference> {
    f.check_path(path)?;
    let k = path.grid().snap(t)?;
    let stopped = stop_path_at(path, k);
    let h = h.unwrap_or_else(|| 1e-4 * (1.0 + norm(path.row(k))));
    let d = path.dim();
    let mut estimate = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut sum = 0.0;
            for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                let mut e = vec![0.0; d];
                e[i] += si * h;
                e[j] += sj * h;
                sum += sign * value_at(f, &bumped(&stopped, k, &e)?, k);
            }
            estimate[i * d + j] = sum / (4.0 * h * h);
        }
    }
    Ok(FiniteDifference {
        estimate,
        step: h,
        warning: step_warning(h, 1.0 + norm(path.row(k))),
    })
}

/// Forward difference `(F(t + h, ω_t) - F(t, ω_t)) / h` along the stopped path.
pub fn fd_horizontal(f: &Functional, t: f64, path: &SampledPath, h: Option<f64>) -> Result<FiniteDifference> {
    f.check_path(path)?;
    let k = path.grid().snap(t)?;
    let stopped = stop_path_at(path, k);
    let h = h.unwrap_or_else(|| default_horizontal_step(path.time(k)));
    let now = f.state_direct(&stopped, k);
    let later = f.advance(&now, h);
    let estimate = (f.value(&later) - f.value(&now)) / h;
    Ok(FiniteDifference {
        estimate: vec![estimate],
        step: h,
        warning: step_warning(h, 1.0 + path.time(k).abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{CylKind, Expr, IntegrandKind};
    use crate::path::{generate_brownian, Grid};

    #[test]
    fn square_at_three() {
        let g = Grid::new(8, 1.0).unwrap();
        let p = SampledPath::new(g, 1, vec![3.0; 9], "three", None).unwrap();
        let f = Functional::new(Expr::cyl(CylKind::X2, 0), "sq");
        let fd = fd_vertical(&f, 0.5, &p, Some(1e-5)).unwrap();
        assert!((fd.estimate[0] - 6.0).abs() < 1e-6);
        assert!(fd.warning.is_none());
        assert!(fd_vertical(&f, 0.5, &p, Some(1e-16)).unwrap().warning.is_some());
    }

    #[test]
    fn running_integral_forward_difference() {
        let g = Grid::new(64, 1.0).unwrap();
        let p = SampledPath::new(g, 1, vec![0.5; 65], "half", None).unwrap();
        let f = Functional::new(Expr::runint(IntegrandKind::X, 0), "r");
        let fd = fd_horizontal(&f, 0.5, &p, Some(1e-3)).unwrap();
        assert!((fd.estimate[0] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn frozen_extension_matches_grid_evaluation_of_stopped_path() {
        let w = generate_brownian(1, 1.0, 1024, 8).unwrap();
        let f = Functional::new(
            Expr::Prod(vec![Expr::runint(IntegrandKind::SinX, 0), Expr::cyl(CylKind::TX, 0)]),
            "p",
        );
        let k = 300;
        let stopped = stop_path_at(&w, k);
        let lag = 37;
        let advanced = f.advance(&f.state_direct(&stopped, k), lag as f64 * w.grid().dt());
        let direct = f.state_direct(&stopped, k + lag);
        assert!((f.value(&advanced) - f.value(&direct)).abs() < 1e-12);
    }

    #[test]
    fn product_hessian_oracle_is_zero() {
        let w = generate_brownian(1, 1.0, 512, 11).unwrap();
        let f = Functional::new(
            Expr::Prod(vec![Expr::cyl(CylKind::X, 0), Expr::runint(IntegrandKind::X, 0)]),
            "x_runint",
        );
        let t = 0.6;
        let grad = fd_vertical(&f, t, &w, None).unwrap();
        let k = w.grid().snap(t).unwrap();
        let integral = f.state_direct(&w, k).integrals[0];
        assert!((grad.estimate[0] - integral).abs() < 1e-9);
        let hess = fd_vertical_hess(&f, t, &w, None).unwrap();
        assert!(hess.estimate[0].abs() < 1e-6);
    }
}
