//! Non-anticipative functionals as expression trees.
//!
//! A functional `F(t, ω)` is evaluated on the stopped path `ω_t`. On the
//! master grid everything it needs is captured by a [`StoppedState`]: the
//! time, the terminal value `ω(t)` and, for every running-integral leaf,
//! the left-endpoint sum `Σ_{t_j < t} g(ω(t_j)) Δt`.
//!
//! Derivatives are propagated exactly through the tree:
//!
//! * the vertical (Dupire) derivatives `∇_ω F`, `∇²_ω F`, `∇³_ω F` bump the
//!   terminal value only, so running integrals contribute zero;
//! * the horizontal derivative `𝒟F` advances time along the frozen path,
//!   so a running integral contributes `g(ω(t))` and a cylinder `∂_t f`.

mod assumptions;
mod jet;
mod oracle;
mod spec;

pub use assumptions::{check_assumptions, foscill_levels, AssumptionOptions, AssumptionReport, FoscillLevel};
pub use jet::Jet;
pub use oracle::{
    default_horizontal_step, default_vertical_step, fd_horizontal, fd_vertical, fd_vertical_hess, FiniteDifference,
};
pub use spec::{builtin, builtin_names, parse_functional};

use crate::error::{Error, Result};
use crate::path::SampledPath;

/// Highest vertical order any node can provide.
pub const MAX_ORDER: usize = 3;

/// Smooth scalar map of `(t, x_coord)` used as a cylindrical leaf.
#[derive(Debug, Clone, PartialEq)]
pub enum CylKind {
    /// `x`
    X,
    /// `x²`
    X2,
    /// `x³`
    X3,
    /// `t·x`
    TX,
    /// `sin x`
    SinX,
    /// `Σ_j c_j x^j`
    Poly(Vec<f64>),
    /// `|x|²` over all coordinates
    NormSq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub kind: CylKind,
    pub coord: usize,
    /// Highest vertical order this leaf is declared to provide.
    pub max_order: usize,
}

impl Cylinder {
    pub fn new(kind: CylKind, coord: usize) -> Self {
        Self {
            kind,
            coord,
            max_order: MAX_ORDER,
        }
    }

    /// `(f, ∂_t f, ∂_x f, ∂²_x f, ∂³_x f)` for univariate kinds.
    fn univariate(&self, t: f64, x: f64) -> [f64; 5] {
        match &self.kind {
            CylKind::X => [x, 0.0, 1.0, 0.0, 0.0],
            CylKind::X2 => [x * x, 0.0, 2.0 * x, 2.0, 0.0],
            CylKind::X3 => [x * x * x, 0.0, 3.0 * x * x, 6.0 * x, 6.0],
            CylKind::TX => [t * x, x, t, 0.0, 0.0],
            CylKind::SinX => [x.sin(), 0.0, x.cos(), -x.sin(), -x.cos()],
            CylKind::Poly(c) => {
                let mut out = [0.0; 5];
                let mut coeffs = c.clone();
                for slot in [0, 2, 3, 4] {
                    out[slot] = coeffs.iter().rev().fold(0.0, |acc, a| acc * x + a);
                    coeffs = coeffs.iter().enumerate().skip(1).map(|(j, a)| j as f64 * a).collect();
                }
                out
            }
            CylKind::NormSq => unreachable!("multivariate leaf"),
        }
    }

    fn jet(&self, state: &StoppedState, order: usize) -> Jet {
        let d = state.x.len();
        let mut jet = Jet::zero(d, order);
        if let CylKind::NormSq = self.kind {
            jet.value = state.x.iter().map(|v| v * v).sum();
            if order >= 1 {
                for (g, x) in jet.grad.iter_mut().zip(&state.x) {
                    *g = 2.0 * x;
                }
            }
            if order >= 2 {
                for i in 0..d {
                    jet.hess[i * d + i] = 2.0;
                }
            }
            return jet;
        }
        let c = self.coord;
        let [f, ft, f1, f2, f3] = self.univariate(state.t, state.x[c]);
        jet.value = f;
        jet.horizontal = ft;
        if order >= 1 {
            jet.grad[c] = f1;
        }
        if order >= 2 {
            jet.hess[c * d + c] = f2;
        }
        if order >= 3 {
            jet.third[(c * d + c) * d + c] = f3;
        }
        jet
    }
}

/// Integrand `g` of a running-integral leaf `∫_0^t g(ω(s)) ds`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrandKind {
    X,
    X2,
    SinX,
    CosX,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Integrand {
    pub kind: IntegrandKind,
    pub coord: usize,
}

impl Integrand {
    pub fn new(kind: IntegrandKind, coord: usize) -> Self {
        Self { kind, coord }
    }

    pub fn apply(&self, row: &[f64]) -> f64 {
        let x = row[self.coord];
        match self.kind {
            IntegrandKind::X => x,
            IntegrandKind::X2 => x * x,
            IntegrandKind::SinX => x.sin(),
            IntegrandKind::CosX => x.cos(),
        }
    }
}

/// Outer map of a composition node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outer {
    Sin,
    Cos,
    Exp,
    Square,
    Cube,
}

impl Outer {
    /// `(φ, φ', φ'', φ''')` at `y`.
    fn derivatives(&self, y: f64) -> [f64; 4] {
        match self {
            Outer::Sin => [y.sin(), y.cos(), -y.sin(), -y.cos()],
            Outer::Cos => [y.cos(), -y.sin(), -y.cos(), y.sin()],
            Outer::Exp => {
                let e = y.exp();
                [e, e, e, e]
            }
            Outer::Square => [y * y, 2.0 * y, 2.0, 0.0],
            Outer::Cube => [y * y * y, 3.0 * y * y, 6.0 * y, 6.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Cyl(Cylinder),
    RunInt { integrand: Integrand, slot: usize },
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Compose(Outer, Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn cyl(kind: CylKind, coord: usize) -> Self {
        Expr::Cyl(Cylinder::new(kind, coord))
    }

    pub fn runint(kind: IntegrandKind, coord: usize) -> Self {
        Expr::RunInt {
            integrand: Integrand::new(kind, coord),
            slot: usize::MAX,
        }
    }

    fn assign_slots(&mut self, integrands: &mut Vec<Integrand>) {
        match self {
            Expr::RunInt { integrand, slot } => {
                *slot = integrands.len();
                integrands.push(*integrand);
            }
            Expr::Sum(children) | Expr::Prod(children) => children.iter_mut().for_each(|c| c.assign_slots(integrands)),
            Expr::Compose(_, child) => child.assign_slots(integrands),
            Expr::Const(_) | Expr::Cyl(_) => {}
        }
    }

    fn max_order(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::RunInt { .. } => MAX_ORDER,
            Expr::Cyl(c) => c.max_order,
            Expr::Sum(ch) | Expr::Prod(ch) => ch.iter().map(Expr::max_order).min().unwrap_or(MAX_ORDER),
            Expr::Compose(_, child) => child.max_order(),
        }
    }

    fn required_dim(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Cyl(c) => match c.kind {
                CylKind::NormSq => 1,
                _ => c.coord + 1,
            },
            Expr::RunInt { integrand, .. } => integrand.coord + 1,
            Expr::Sum(ch) | Expr::Prod(ch) => ch.iter().map(Expr::required_dim).max().unwrap_or(0),
            Expr::Compose(_, child) => child.required_dim(),
        }
    }

    fn jet(&self, state: &StoppedState, order: usize) -> Jet {
        let d = state.x.len();
        match self {
            Expr::Const(c) => {
                let mut j = Jet::zero(d, order);
                j.value = *c;
                j
            }
            Expr::Cyl(c) => c.jet(state, order),
            Expr::RunInt { integrand, slot } => {
                let mut j = Jet::zero(d, order);
                j.value = state.integrals[*slot];
                j.horizontal = integrand.apply(&state.x);
                j
            }
            Expr::Sum(children) => {
                let mut acc = Jet::zero(d, order);
                for c in children {
                    acc.add_assign(&c.jet(state, order));
                }
                acc
            }
            Expr::Prod(children) => {
                let mut acc = Jet::zero(d, order);
                acc.value = 1.0;
                for c in children {
                    acc = acc.product(&c.jet(state, order));
                }
                acc
            }
            Expr::Compose(outer, child) => {
                let inner = child.jet(state, order);
                inner.compose(outer.derivatives(inner.value))
            }
        }
    }
}

/// Everything `F(t, ω_t)` depends on, on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppedState {
    pub t: f64,
    /// Terminal value `ω(t)`.
    pub x: Vec<f64>,
    /// Left-endpoint integrals, one per running-integral slot.
    pub integrals: Vec<f64>,
}

/// A non-anticipative functional with exact derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    expr: Expr,
    integrands: Vec<Integrand>,
    name: String,
}

impl Functional {
    pub fn new(mut expr: Expr, name: impl Into<String>) -> Self {
        let mut integrands = Vec::new();
        expr.assign_slots(&mut integrands);
        Self {
            expr,
            integrands,
            name: name.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn integrands(&self) -> &[Integrand] {
        &self.integrands
    }

    /// Highest vertical derivative order available.
    pub fn vertical_order(&self) -> usize {
        self.expr.max_order()
    }

    /// Smallest path dimension the functional can read.
    pub fn required_dim(&self) -> usize {
        self.expr.required_dim()
    }

    pub fn check_path(&self, path: &SampledPath) -> Result<()> {
        if self.required_dim() > path.dim() {
            return Err(Error::param(format!(
                "functional `{}` reads coordinate {} of a {}-dimensional path",
                self.name,
                self.required_dim() - 1,
                path.dim()
            )));
        }
        Ok(())
    }

    /// Capability error unless vertical derivatives up to `order` exist.
    pub fn jet_capability(&self, order: usize) -> Result<()> {
        if order > self.vertical_order() {
            return Err(Error::capability(format!(
                "functional `{}` provides vertical derivatives up to order {}, order {} requested",
                self.name,
                self.vertical_order(),
                order
            )));
        }
        Ok(())
    }

    /// Jet up to vertical `order` at a state.
    pub fn jet(&self, state: &StoppedState, order: usize) -> Result<Jet> {
        self.jet_capability(order)?;
        Ok(self.expr.jet(state, order))
    }

    pub fn value(&self, state: &StoppedState) -> f64 {
        self.expr.jet(state, 0).value
    }

    /// State at grid index `k`, integrals summed directly over `[0, t_k)`.
    pub fn state_direct(&self, path: &SampledPath, k: usize) -> StoppedState {
        let dt = path.grid().dt();
        let integrals = self
            .integrands
            .iter()
            .map(|g| (0..k).map(|j| g.apply(path.row(j))).sum::<f64>() * dt)
            .collect();
        StoppedState {
            t: path.time(k),
            x: path.row(k).to_vec(),
            integrals,
        }
    }

    /// `F(t, ω_t + ...)` frozen: advance a state by `h` along the constant extension.
    pub fn advance(&self, state: &StoppedState, h: f64) -> StoppedState {
        let mut next = state.clone();
        next.t += h;
        for (acc, g) in next.integrals.iter_mut().zip(&self.integrands) {
            *acc += g.apply(&state.x) * h;
        }
        next
    }

    fn direct(&self, t: f64, path: &SampledPath) -> Result<StoppedState> {
        self.check_path(path)?;
        let k = path.grid().snap(t)?;
        Ok(self.state_direct(path, k))
    }

    /// `F(t, ω)`, with `t` snapped to the grid.
    pub fn eval(&self, t: f64, path: &SampledPath) -> Result<f64> {
        Ok(self.value(&self.direct(t, path)?))
    }

    /// `∇_ω F(t, ω)`, length `d`.
    pub fn vertical_grad(&self, t: f64, path: &SampledPath) -> Result<Vec<f64>> {
        Ok(self.jet(&self.direct(t, path)?, 1)?.grad)
    }

    /// `∇²_ω F(t, ω)`, row-major `d x d`.
    pub fn vertical_hess(&self, t: f64, path: &SampledPath) -> Result<Vec<f64>> {
        Ok(self.jet(&self.direct(t, path)?, 2)?.hess)
    }

    /// `∇³_ω F(t, ω)`, row-major `d x d x d`.
    pub fn vertical_third(&self, t: f64, path: &SampledPath) -> Result<Vec<f64>> {
        Ok(self.jet(&self.direct(t, path)?, 3)?.third)
    }

    /// `𝒟F(t, ω)`; at `t = T` the right derivative does not exist and the
    /// analytic (left) value is returned with `at_horizon` set.
    pub fn horizontal_deriv(&self, t: f64, path: &SampledPath) -> Result<HorizontalDerivative> {
        let state = self.direct(t, path)?;
        let at_horizon = path.grid().snap(t)? == path.intervals();
        Ok(HorizontalDerivative {
            value: self.expr.jet(&state, 0).horizontal,
            at_horizon,
        })
    }

    /// Precompute running-integral prefix sums along `path`.
    pub fn prepare<'a>(&'a self, path: &'a SampledPath) -> Result<Prepared<'a>> {
        self.check_path(path)?;
        let dt = path.grid().dt();
        let prefix = self
            .integrands
            .iter()
            .map(|g| {
                let mut acc = Vec::with_capacity(path.grid_size());
                let mut sum = 0.0;
                acc.push(0.0);
                for j in 0..path.intervals() {
                    sum += g.apply(path.row(j));
                    acc.push(sum * dt);
                }
                acc
            })
            .collect();
        Ok(Prepared {
            functional: self,
            path,
            prefix,
        })
    }
}

/// Horizontal derivative with the one-sided flag at the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizontalDerivative {
    pub value: f64,
    pub at_horizon: bool,
}

/// A functional bound to a path with O(1) state lookup.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    functional: &'a Functional,
    path: &'a SampledPath,
    prefix: Vec<Vec<f64>>,
}

impl<'a> Prepared<'a> {
    pub fn functional(&self) -> &Functional {
        self.functional
    }

    pub fn path(&self) -> &SampledPath {
        self.path
    }

    /// State of `ω_{t_k}`.
    pub fn state(&self, k: usize) -> StoppedState {
        StoppedState {
            t: self.path.time(k),
            x: self.path.row(k).to_vec(),
            integrals: self.prefix.iter().map(|p| p[k]).collect(),
        }
    }

    /// State of the path stopped just before `t_k`: terminal value `ω(t_k-)`,
    /// read on the grid as the sample at `k - 1`.
    pub fn state_left(&self, k: usize) -> StoppedState {
        let src = k.saturating_sub(1);
        StoppedState {
            t: self.path.time(k),
            x: self.path.row(src).to_vec(),
            integrals: self.prefix.iter().map(|p| p[k]).collect(),
        }
    }

    /// State with the history of the bound path up to `t_k` and the
    /// terminal value replaced by `x`.
    pub fn state_with_terminal(&self, k: usize, x: &[f64]) -> StoppedState {
        StoppedState {
            t: self.path.time(k),
            x: x.to_vec(),
            integrals: self.prefix.iter().map(|p| p[k]).collect(),
        }
    }

    pub fn value(&self, k: usize) -> f64 {
        self.functional.value(&self.state(k))
    }

    pub fn jet(&self, k: usize, order: usize) -> Result<Jet> {
        self.functional.jet(&self.state(k), order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{generate_brownian, generate_constant, stop_path_at, Grid};

    fn linear(m: usize) -> SampledPath {
        SampledPath::from_fn(Grid::new(m, 1.0).unwrap(), "t", |t| t).unwrap()
    }

    fn x_times_runint() -> Functional {
        Functional::new(
            Expr::Prod(vec![Expr::cyl(CylKind::X, 0), Expr::runint(IntegrandKind::X, 0)]),
            "x_runint",
        )
    }

    #[test]
    fn evaluation_examples() {
        let w = linear(1 << 10);
        let x = Functional::new(Expr::cyl(CylKind::X, 0), "x");
        assert_eq!(x.eval(0.5, &w).unwrap(), 0.5);

        let c = generate_constant(1, 1.0, 1 << 10, 2.5).unwrap();
        let runint = Functional::new(Expr::runint(IntegrandKind::X, 0), "runint");
        assert!((runint.eval(0.5, &c).unwrap() - 1.25).abs() < 1e-12);

        // left sums of s over [0,1] on M cells: (M-1)/(2M)
        let m = 1 << 10;
        let v = x_times_runint().eval(1.0, &linear(m)).unwrap();
        assert!((v - 0.5).abs() <= 0.5 / m as f64 + 1e-12);
    }

    #[test]
    fn cube_derivatives_at_two() {
        let g = Grid::new(4, 1.0).unwrap();
        let p = SampledPath::new(g, 1, vec![2.0; 5], "two", None).unwrap();
        let f = Functional::new(Expr::cyl(CylKind::X3, 0), "cube");
        assert_eq!(f.vertical_grad(0.5, &p).unwrap(), vec![12.0]);
        assert_eq!(f.vertical_hess(0.5, &p).unwrap(), vec![12.0]);
        assert_eq!(f.vertical_third(0.5, &p).unwrap(), vec![6.0]);
    }

    #[test]
    fn runint_has_no_vertical_sensitivity() {
        let w = generate_brownian(1, 1.0, 256, 1).unwrap();
        let f = Functional::new(Expr::runint(IntegrandKind::SinX, 0), "r");
        assert_eq!(f.vertical_grad(0.3, &w).unwrap(), vec![0.0]);
        assert_eq!(f.vertical_hess(0.3, &w).unwrap(), vec![0.0]);
    }

    #[test]
    fn product_with_running_integral() {
        let w = generate_brownian(1, 1.0, 256, 2).unwrap();
        let f = x_times_runint();
        let k = 100;
        let state = f.state_direct(&w, k);
        let j = f.jet(&state, 2).unwrap();
        assert_eq!(j.grad[0], state.integrals[0]);
        assert_eq!(j.hess[0], 0.0);
    }

    #[test]
    fn horizontal_examples() {
        let g = Grid::new(8, 1.0).unwrap();
        let c = SampledPath::new(g, 1, vec![0.7; 9], "c", None).unwrap();
        let tx = Functional::new(Expr::cyl(CylKind::TX, 0), "tx");
        assert_eq!(tx.horizontal_deriv(0.5, &c).unwrap().value, 0.7);
        let half = SampledPath::new(g, 1, vec![0.5; 9], "c", None).unwrap();
        let r = Functional::new(Expr::runint(IntegrandKind::X, 0), "r");
        assert_eq!(r.horizontal_deriv(0.25, &half).unwrap().value, 0.5);
        let sq = Functional::new(Expr::cyl(CylKind::X2, 0), "sq");
        assert_eq!(sq.horizontal_deriv(0.25, &half).unwrap().value, 0.0);
        let at_end = sq.horizontal_deriv(1.0, &half).unwrap();
        assert!(at_end.at_horizon);
    }

    #[test]
    fn capability_is_checked() {
        let mut leaf = Cylinder::new(CylKind::X2, 0);
        leaf.max_order = 1;
        let f = Functional::new(Expr::Sum(vec![Expr::Cyl(leaf), Expr::cyl(CylKind::X3, 0)]), "limited");
        assert_eq!(f.vertical_order(), 1);
        let w = generate_constant(1, 1.0, 4, 1.0).unwrap();
        assert!(f.vertical_grad(0.5, &w).is_ok());
        assert!(matches!(f.vertical_hess(0.5, &w), Err(Error::Capability(_))));
    }

    #[test]
    fn dimension_is_checked() {
        let f = Functional::new(Expr::cyl(CylKind::X, 1), "x1");
        let w = generate_constant(1, 1.0, 4, 1.0).unwrap();
        assert!(f.eval(0.5, &w).is_err());
    }

    #[test]
    fn prepared_matches_direct() {
        let w = generate_brownian(2, 1.0, 512, 3).unwrap();
        let f = Functional::new(
            Expr::Prod(vec![
                Expr::Compose(Outer::Exp, Box::new(Expr::runint(IntegrandKind::X2, 1))),
                Expr::cyl(CylKind::SinX, 0),
                Expr::runint(IntegrandKind::CosX, 0),
            ]),
            "mix",
        );
        let prepared = f.prepare(&w).unwrap();
        for k in [0, 1, 17, 300, 512] {
            let a = prepared.value(k);
            let b = f.value(&f.state_direct(&w, k));
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn stopped_state_ignores_the_future() {
        let w = generate_brownian(1, 1.0, 256, 4).unwrap();
        let f = x_times_runint();
        let s = stop_path_at(&w, 77);
        assert_eq!(f.state_direct(&w, 77), f.state_direct(&s, 77));
    }

    #[test]
    fn poly_leaf_derivatives() {
        let leaf = Cylinder::new(CylKind::Poly(vec![1.0, -2.0, 0.5, 2.0]), 0);
        let [f, ft, f1, f2, f3] = leaf.univariate(0.3, 1.5);
        assert!((f - (1.0 - 3.0 + 0.5 * 2.25 + 2.0 * 3.375)).abs() < 1e-12);
        assert_eq!(ft, 0.0);
        assert!((f1 - (-2.0 + 1.5 + 6.0 * 2.25)).abs() < 1e-12);
        assert!((f2 - (1.0 + 12.0 * 1.5)).abs() < 1e-12);
        assert!((f3 - 12.0).abs() < 1e-12);
    }
}
