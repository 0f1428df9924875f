//! Running-cost models, the Hamiltonian and its unique minimizer.
//!
//! The control is the vector of jump rates `a = (a_y)_{y != x}` out of the
//! current state. The Hamiltonian is
//!
//! ```text
//! H(x, p, u) = -inf_{a >= 0} [ sum_{y != x} a_y p_y + L(x, a, u) ]
//! ```
//!
//! and strong convexity of `L` in `a` makes the minimizer `a*(x, p, u)`
//! unique. The built-in quadratic family
//! `L(x, a, u) = theta(u)/2 * sum_{y != x} a_y^2 + c(x, u)` has the closed
//! form `a*_y = max(0, -p_y / theta(u))`; arbitrary strongly convex costs
//! go through a projected Newton iteration on the user-supplied gradient.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Control-cost stiffness `theta(u) > 0` of the quadratic family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaFn<T> {
    Constant(T),
    /// `theta(u) = base + slope * u`; must stay positive on `[0, 1]`.
    Affine { base: T, slope: T },
}

impl<T: Real> ThetaFn<T> {
    pub fn eval(&self, u: T) -> T {
        match self {
            ThetaFn::Constant(c) => *c,
            ThetaFn::Affine { base, slope } => *base + *slope * u,
        }
    }

    /// Minimum over `[0, 1]`, which bounds the strong-convexity constant.
    pub fn min_on_unit_interval(&self) -> T {
        match self {
            ThetaFn::Constant(c) => *c,
            ThetaFn::Affine { base, slope } => (*base).min(*base + *slope),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_on_unit_interval() > T::zero() {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "theta(u) must be strictly positive on [0, 1]".into(),
            ))
        }
    }
}

/// Bounded state potential `c(x, u)` added to the running cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential<T> {
    Zero,
    /// `c(x, u) = values[x]`, independent of position.
    PerState(Vec<T>),
    /// `c(x, u) = base[x] + slope[x] * u`.
    AffineInPosition { base: Vec<T>, slope: Vec<T> },
}

impl<T: Real> Potential<T> {
    pub fn eval(&self, x: usize, u: T) -> T {
        match self {
            Potential::Zero => T::zero(),
            Potential::PerState(v) => v[x],
            Potential::AffineInPosition { base, slope } => base[x] + slope[x] * u,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let len_ok = match self {
            Potential::Zero => true,
            Potential::PerState(v) => v.len() == d,
            Potential::AffineInPosition { base, slope } => base.len() == d && slope.len() == d,
        };
        if len_ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "potential is not defined for all {d} states"
            )))
        }
    }
}

/// The quadratic running-cost family; declarative and serializable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCost<T> {
    pub theta: ThetaFn<T>,
    pub potential: Potential<T>,
}

impl<T: Real> QuadraticCost<T> {
    pub fn with_constant_theta(theta: T, potential: Potential<T>) -> Self {
        Self {
            theta: ThetaFn::Constant(theta),
            potential,
        }
    }
}

/// Running-cost evaluator `(x, a, u) -> L(x, a, u)`; `a` has length `d`
/// with the `x` entry ignored (zero).
pub type CostEval<T> = Arc<dyn Fn(usize, &[T], T) -> T + Send + Sync>;
/// Gradient of `L` in `a`, written into the output slice.
pub type CostGrad<T> = Arc<dyn Fn(usize, &[T], T, &mut [T]) + Send + Sync>;
/// Exact minimizer oracle `(x, p, u) -> a*`.
pub type ArgminOracle<T> = Arc<dyn Fn(usize, &[T], T) -> Vec<T> + Send + Sync>;

/// Black-box strongly convex running cost with user-supplied gradient.
#[derive(Clone)]
pub struct GenericCost<T> {
    pub l: CostEval<T>,
    pub grad_a: CostGrad<T>,
    /// Strong-convexity constant from the quadratic lower bound on `L`.
    pub gamma: T,
    /// Optional exact minimizer; when absent the projected Newton
    /// iteration on `grad_a` is used.
    pub argmin: Option<ArgminOracle<T>>,
}

impl<T> std::fmt::Debug for GenericCost<T>
where
    T: std::fmt::Debug,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GenericCost")
            .field("gamma", &self.gamma)
            .field("argmin", &self.argmin.is_some())
            .finish()
    }
}

/// Running-cost model: closed-form quadratic family or black-box convex cost.
#[derive(Debug, Clone)]
pub enum CostModel<T> {
    Quadratic(QuadraticCost<T>),
    Generic(GenericCost<T>),
}

impl<T: Real> CostModel<T> {
    pub fn quadratic(theta: T, potential: Potential<T>) -> Self {
        CostModel::Quadratic(QuadraticCost::with_constant_theta(theta, potential))
    }

    /// Strong-convexity constant: `theta_min / 2` for the quadratic family.
    pub fn gamma(&self) -> T {
        match self {
            CostModel::Quadratic(q) => q.theta.min_on_unit_interval() * T::of(0.5),
            CostModel::Generic(g) => g.gamma,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.gamma() > T::zero()) {
            return Err(Error::InvalidInput(
                "cost model must be strongly convex (gamma > 0)".into(),
            ));
        }
        if let CostModel::Quadratic(q) = self {
            q.theta.validate()?;
            q.potential.validate(d)?;
        }
        Ok(())
    }

    /// Running cost `L(x, a, u)`.
    pub fn running_cost(&self, x: usize, rates: &[T], u: T) -> T {
        match self {
            CostModel::Quadratic(q) => {
                let theta = q.theta.eval(u);
                let mut quad = T::zero();
                for (y, &a) in rates.iter().enumerate() {
                    if y != x {
                        quad = quad + a * a;
                    }
                }
                theta * T::of(0.5) * quad + q.potential.eval(x, u)
            }
            CostModel::Generic(g) => (g.l)(x, rates, u),
        }
    }
}

/// Number of Newton iterations allowed before reporting non-convergence.
const NEWTON_MAX_ITERS: usize = 200;
/// Projected-gradient tolerance of the generic minimizer.
const NEWTON_TOL: f64 = 1e-10;

/// Unique nonnegative rate vector minimizing
/// `sum_{y != x} a_y p_y + L(x, a, u)`; the `x` entry of the output is zero.
///
/// `p` follows the finite-state gradient convention: entry `x` is ignored.
pub fn argmin_rates<T: Real>(cost: &CostModel<T>, x: usize, p: &[T], u: T) -> Result<Vec<T>> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite price vector {:?}",
            p.iter().map(|v| v.as_f64()).collect::<Vec<_>>()
        )));
    }
    match cost {
        CostModel::Quadratic(q) => {
            let theta = q.theta.eval(u);
            let mut a = vec![T::zero(); p.len()];
            for y in 0..p.len() {
                if y != x && p[y] < T::zero() {
                    a[y] = -p[y] / theta;
                }
            }
            Ok(a)
        }
        CostModel::Generic(g) => {
            if let Some(oracle) = &g.argmin {
                let mut a = oracle(x, p, u);
                a[x] = T::zero();
                return Ok(a);
            }
            projected_newton(g, x, p, u)
        }
    }
}

/// Hamiltonian `H(x, p, u) = -(sum_{y != x} a*_y p_y + L(x, a*, u))`.
pub fn hamiltonian<T: Real>(cost: &CostModel<T>, x: usize, p: &[T], u: T) -> Result<T> {
    if let CostModel::Quadratic(q) = cost {
        // Closed form: sum of squared negative parts over 2 theta, minus c.
        let theta = q.theta.eval(u);
        let mut acc = T::zero();
        for (y, &py) in p.iter().enumerate() {
            if y != x && py < T::zero() {
                acc = acc + py * py;
            }
        }
        return Ok(acc / (T::of(2.0) * theta) - q.potential.eval(x, u));
    }
    let a = argmin_rates(cost, x, p, u)?;
    let mut lin = T::zero();
    for (y, &ay) in a.iter().enumerate() {
        if y != x {
            lin = lin + ay * p[y];
        }
    }
    Ok(-(lin + cost.running_cost(x, &a, u)))
}

/// Projected Newton with backtracking for the generic minimizer.
///
/// The objective `phi(a) = sum_{y != x} a_y p_y + L(x, a, u)` is strongly
/// convex; coordinates at zero whose gradient pushes outward form the
/// active set, the Newton step runs on the free set with a finite-difference
/// Hessian of the user gradient, and an Armijo backtracking line search
/// keeps the iterates descending.
fn projected_newton<T: Real>(g: &GenericCost<T>, x: usize, p: &[T], u: T) -> Result<Vec<T>> {
    let d = p.len();
    let tol = T::of(NEWTON_TOL);
    let mut a = vec![T::zero(); d];
    let mut grad = vec![T::zero(); d];
    let mut grad_l = vec![T::zero(); d];

    let objective = |a: &[T]| -> T {
        let mut lin = T::zero();
        for y in 0..d {
            if y != x {
                lin = lin + a[y] * p[y];
            }
        }
        lin + (g.l)(x, a, u)
    };
    // phi'(a)_y = p_y + dL/da_y for y != x.
    let fill_grad = |a: &[T], grad_l: &mut [T], grad: &mut [T]| {
        (g.grad_a)(x, a, u, grad_l);
        for y in 0..d {
            grad[y] = if y == x { T::zero() } else { p[y] + grad_l[y] };
        }
    };

    let mut residual = T::infinity();
    for _ in 0..NEWTON_MAX_ITERS {
        fill_grad(&a, &mut grad_l, &mut grad);

        // Projected-gradient residual: free coordinates must be stationary,
        // zero coordinates may only push outward.
        residual = T::zero();
        for y in 0..d {
            if y == x {
                continue;
            }
            let r = if a[y] > T::zero() {
                grad[y].abs()
            } else {
                (-grad[y]).max(T::zero())
            };
            residual = residual.max(r);
        }
        if residual <= tol {
            a[x] = T::zero();
            return Ok(a);
        }

        let free: Vec<usize> = (0..d)
            .filter(|&y| y != x && (a[y] > T::zero() || grad[y] < T::zero()))
            .collect();
        let nf = free.len();
        let mut step = vec![T::zero(); d];
        if nf > 0 {
            // Finite-difference Hessian of phi on the free set.
            let h = T::of(1e-6) * (T::one() + a.iter().fold(T::zero(), |m, &v| m.max(v.abs())));
            let mut hess = vec![T::zero(); nf * nf];
            let mut gp = vec![T::zero(); d];
            let mut a_pert = a.clone();
            for (cj, &j) in free.iter().enumerate() {
                a_pert[j] = a[j] + h;
                (g.grad_a)(x, &a_pert, u, &mut gp);
                for (ci, &i) in free.iter().enumerate() {
                    hess[ci * nf + cj] = (gp[i] - grad_l[i]) / h;
                }
                a_pert[j] = a[j];
            }
            // Symmetrize and regularize with the strong-convexity floor.
            for i in 0..nf {
                for j in (i + 1)..nf {
                    let s = (hess[i * nf + j] + hess[j * nf + i]) * T::of(0.5);
                    hess[i * nf + j] = s;
                    hess[j * nf + i] = s;
                }
                hess[i * nf + i] = hess[i * nf + i].max(T::of(2.0) * g.gamma);
            }
            let rhs: Vec<T> = free.iter().map(|&y| grad[y]).collect();
            match crate::linalg::solve_dense(&mut hess, rhs) {
                Some(delta) => {
                    for (ci, &y) in free.iter().enumerate() {
                        step[y] = -delta[ci];
                    }
                }
                None => {
                    for &y in &free {
                        step[y] = -grad[y] / (T::of(2.0) * g.gamma);
                    }
                }
            }
        }

        // Backtracking on the projected step.
        let phi0 = objective(&a);
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand = a.clone();
            for y in 0..d {
                if y != x {
                    cand[y] = (a[y] + t * step[y]).max(T::zero());
                }
            }
            let mut decrease = T::zero();
            for y in 0..d {
                decrease = decrease + grad[y] * (cand[y] - a[y]);
            }
            if objective(&cand) <= phi0 + T::of(1e-4) * decrease && decrease <= T::zero() {
                a = cand;
                accepted = true;
                break;
            }
            t = t * T::of(0.5);
        }
        if !accepted {
            break;
        }
    }
    Err(Error::ArgminNoConvergence {
        iterations: NEWTON_MAX_ITERS,
        residual: residual.as_f64(),
        last: a.iter().map(|v| v.as_f64()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad(theta: f64) -> CostModel<f64> {
        CostModel::quadratic(theta, Potential::Zero)
    }

    /// Grid-search oracle for the scalar quadratic subproblem:
    /// minimizes `a * p + theta/2 * a^2` over `a in [0, hi]` with the
    /// given step, independent of the closed form under test.
    fn grid_search_rate(p: f64, theta: f64, hi: f64, step: f64) -> f64 {
        let mut best_a = 0.0;
        let mut best_v = f64::INFINITY;
        let n = (hi / step).round() as usize;
        for k in 0..=n {
            let a = k as f64 * step;
            let v = a * p + 0.5 * theta * a * a;
            if v < best_v {
                best_v = v;
                best_a = a;
            }
        }
        best_a
    }

    #[test]
    fn zero_prices_give_zero_rates() {
        let a = argmin_rates(&quad(1.0), 0, &[0.0, 0.0], 0.5).unwrap();
        assert_eq!(a, vec![0.0, 0.0]);
    }

    #[test]
    fn positive_prices_never_incentivize_jumps() {
        let a = argmin_rates(&quad(1.0), 0, &[0.0, 3.0], 0.5).unwrap();
        assert_eq!(a, vec![0.0, 0.0]);
    }

    #[test]
    fn negative_price_matches_grid_search_oracle() {
        let oracle = grid_search_rate(-2.0, 1.0, 4.0, 1e-4);
        let a = argmin_rates(&quad(1.0), 0, &[0.0, -2.0], 0.5).unwrap();
        assert_abs_diff_eq!(a[1], oracle, epsilon = 1e-4);
        assert_abs_diff_eq!(a[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(hamiltonian(&quad(1.0), 0, &[0.0, 0.0], 0.5).unwrap(), 0.0);

        // Plug the grid-search minimizer into -(a.p + L).
        let a2 = grid_search_rate(-2.0, 1.0, 4.0, 1e-4);
        let oracle = -(a2 * -2.0 + 0.5 * a2 * a2);
        let h = hamiltonian(&quad(1.0), 0, &[0.0, -2.0], 0.5).unwrap();
        assert_abs_diff_eq!(h, oracle, epsilon = 1e-7);
        assert_abs_diff_eq!(h, 2.0, epsilon = 1e-12);

        let with_c = CostModel::quadratic(1.0, Potential::PerState(vec![5.0, 0.0]));
        let h = hamiltonian(&with_c, 0, &[0.0, 1.0], 0.5).unwrap();
        assert_abs_diff_eq!(h, -5.0, epsilon = 1e-12);
        // Grid verification: a* = 0 by sign, value -L(x, 0, u) = -c.
        assert_eq!(grid_search_rate(1.0, 1.0, 4.0, 1e-4), 0.0);
    }

    #[test]
    fn generic_newton_matches_closed_form() {
        // The quadratic family presented as a black-box cost.
        let theta = 0.7;
        let generic = CostModel::Generic(GenericCost {
            l: Arc::new(move |x, a: &[f64], _u| {
                let mut s = 0.0;
                for (y, &v) in a.iter().enumerate() {
                    if y != x {
                        s += v * v;
                    }
                }
                0.5 * theta * s
            }),
            grad_a: Arc::new(move |x, a: &[f64], _u, out: &mut [f64]| {
                for (y, o) in out.iter_mut().enumerate() {
                    *o = if y == x { 0.0 } else { theta * a[y] };
                }
            }),
            gamma: theta / 2.0,
            argmin: None,
        });
        let p = vec![0.0, -2.0, 0.3, -0.4];
        let got = argmin_rates(&generic, 0, &p, 0.5).unwrap();
        let want = argmin_rates(&quad(theta), 0, &p, 0.5).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-8);
        }
        let hg = hamiltonian(&generic, 0, &p, 0.5).unwrap();
        let hq = hamiltonian(&quad(theta), 0, &p, 0.5).unwrap();
        assert_abs_diff_eq!(hg, hq, epsilon = 1e-8);
    }

    #[test]
    fn generic_oracle_is_used_when_present() {
        let generic = CostModel::Generic(GenericCost {
            l: Arc::new(|_, _: &[f64], _| 0.0),
            grad_a: Arc::new(|_, _: &[f64], _, out: &mut [f64]| out.fill(0.0)),
            gamma: 1.0,
            argmin: Some(Arc::new(|_, p: &[f64], _| {
                p.iter().map(|&v| if v < 0.0 { -v } else { 0.0 }).collect()
            })),
        });
        let a = argmin_rates(&generic, 0, &[-9.0, -1.0], 0.0).unwrap();
        assert_eq!(a, vec![0.0, 1.0]);
    }

    #[test]
    fn theta_must_be_positive() {
        assert!(ThetaFn::Constant(0.0f64).validate().is_err());
        assert!(ThetaFn::Affine { base: 1.0, slope: -2.0 }.validate().is_err());
        assert!(ThetaFn::Affine { base: 1.0, slope: -0.5 }.validate().is_ok());
    }

    #[test]
    fn first_order_conditions_on_random_probes() {
        use rand::Rng;
        let mut rng = crate::rng::stream(7, &[1]);
        for _ in 0..500 {
            let d = rng.random_range(2..=5usize);
            let theta = rng.random_range(0.2..3.0);
            let x = rng.random_range(0..d);
            let p: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
            let cost = quad(theta);
            let a = argmin_rates(&cost, x, &p, 0.5).unwrap();
            for y in 0..d {
                if y == x {
                    assert_eq!(a[y], 0.0);
                    continue;
                }
                let slack = p[y] + theta * a[y];
                if a[y] > 0.0 {
                    assert!(slack.abs() <= 1e-8, "stationarity violated: {slack}");
                } else {
                    assert!(slack >= -1e-8, "complementarity violated: {slack}");
                }
            }
        }
    }

    #[test]
    fn minimizer_is_lipschitz_in_prices() {
        use rand::Rng;
        let mut rng = crate::rng::stream(8, &[2]);
        for _ in 0..500 {
            let d = rng.random_range(2..=5usize);
            let theta = rng.random_range(0.2..3.0);
            let cost = quad(theta);
            let gamma = cost.gamma();
            let x = rng.random_range(0..d);
            let p: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
            let ap = argmin_rates(&cost, x, &p, 0.3).unwrap();
            let aq = argmin_rates(&cost, x, &q, 0.3).unwrap();
            let da: f64 = ap
                .iter()
                .zip(&aq)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let dp: f64 = p
                .iter()
                .zip(&q)
                .enumerate()
                .filter(|(y, _)| *y != x)
                .map(|(_, (a, b))| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(da <= dp / gamma + 1e-9);
        }
    }

    #[test]
    fn hamiltonian_is_convex_in_prices() {
        use rand::Rng;
        let mut rng = crate::rng::stream(9, &[3]);
        let cost = quad(0.8);
        for _ in 0..300 {
            let d = 3;
            let x = rng.random_range(0..d);
            let p: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let lam: f64 = rng.random_range(0.0..1.0);
            let mix: Vec<f64> = p
                .iter()
                .zip(&q)
                .map(|(a, b)| lam * a + (1.0 - lam) * b)
                .collect();
            let hm = hamiltonian(&cost, x, &mix, 0.5).unwrap();
            let hp = hamiltonian(&cost, x, &p, 0.5).unwrap();
            let hq = hamiltonian(&cost, x, &q, 0.5).unwrap();
            assert!(hm <= lam * hp + (1.0 - lam) * hq + 1e-9);
        }
    }

    #[test]
    fn envelope_gradient_matches_minus_rates() {
        use rand::Rng;
        let mut rng = crate::rng::stream(10, &[4]);
        let cost = quad(1.3);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 100 {
            let d = 3;
            let x = rng.random_range(0..d);
            let p: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a = argmin_rates(&cost, x, &p, 0.5).unwrap();
            for y in 0..d {
                if y == x || a[y] <= 1e-3 {
                    continue;
                }
                let mut pp = p.clone();
                pp[y] += h;
                let mut pm = p.clone();
                pm[y] -= h;
                let dh = (hamiltonian(&cost, x, &pp, 0.5).unwrap()
                    - hamiltonian(&cost, x, &pm, 0.5).unwrap())
                    / (2.0 * h);
                assert_abs_diff_eq!(dh, -a[y], epsilon = 1e-5);
                checked += 1;
            }
        }
    }

    #[test]
    fn generic_gradient_consistency_with_finite_differences() {
        // The user-declared gradient must match finite differences of the
        // cost within 1e-6 relative error on random probes.
        use rand::Rng;
        let cost = GenericCost::<f64> {
            l: Arc::new(|x, a, u| {
                let mut s = 0.0;
                for (y, &v) in a.iter().enumerate() {
                    if y != x {
                        s += 0.5 * (1.0 + u) * v * v + 0.1 * v;
                    }
                }
                s
            }),
            grad_a: Arc::new(|x, a, u, out| {
                for (y, o) in out.iter_mut().enumerate() {
                    *o = if y == x { 0.0 } else { (1.0 + u) * a[y] + 0.1 };
                }
            }),
            gamma: 0.5,
            argmin: None,
        };
        let mut rng = crate::rng::stream(11, &[5]);
        let h = 1e-6;
        for _ in 0..200 {
            let d = 4;
            let x = rng.random_range(0..d);
            let u: f64 = rng.random_range(0.0..1.0);
            let a: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
            let mut grad = vec![0.0; d];
            (cost.grad_a)(x, &a, u, &mut grad);
            for y in 0..d {
                if y == x {
                    continue;
                }
                let mut ap = a.clone();
                ap[y] += h;
                let mut am = a.clone();
                am[y] -= h;
                let fd = ((cost.l)(x, &ap, u) - (cost.l)(x, &am, u)) / (2.0 * h);
                let denom = grad[y].abs().max(1.0);
                assert!((fd - grad[y]).abs() / denom < 1e-6);
            }
        }
    }
}
