//! Equilibrium solver for the coupled backward-HJB / forward-Kolmogorov
//! system, and the sampling-based monotonicity check.

pub(crate) mod hjb;
mod kolmogorov;
mod monotone;

pub use hjb::{policy_from_value, solve_hjb_backward};
pub use kolmogorov::solve_kolmogorov_forward;
pub use monotone::{check_monotonicity, MonotonicityReport, MonotonicityWitness};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    flow_distance, CellDensities, CostModel, InteractionSpec, MeasureFlow, Policy, PositionAtlas,
    StateSpace, TimeGrid, ValueField,
};
use crate::scalar::Real;

/// Time steppers shared by both equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    ImplicitEuler,
}

/// Discretization the solver operates on.
#[derive(Debug, Clone)]
pub struct Grids<T> {
    pub states: StateSpace,
    pub time: TimeGrid<T>,
    pub atlas: PositionAtlas<T>,
}

impl<T: Real> Grids<T> {
    pub fn new(states: StateSpace, time: TimeGrid<T>, atlas: PositionAtlas<T>) -> Self {
        Self { states, time, atlas }
    }
}

/// Fixed-point iteration parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig<T: Real> {
    /// Damping weight on the best-response update, in `(0, 1]`. The first
    /// iteration always takes the full best response (weight 1), which is
    /// also the first fictitious-play step; damping applies afterwards.
    pub damping: T,
    /// Stopping tolerance on the flow distance between an iterate and its
    /// best-response image.
    pub tolerance: T,
    pub max_iterations: usize,
    pub integrator: Integrator,
    /// Fictitious-play averaging (`weight_k = 1/k`) instead of fixed damping.
    pub fictitious_play: bool,
    /// Global bound on feedback jump rates; minimizer output above it is
    /// clamped and counted.
    pub rate_cap: T,
    /// Starting flow; default freezes the initial densities in time.
    pub initial_flow: Option<MeasureFlow<T>>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            damping: T::of(0.5),
            tolerance: T::of(1e-6),
            max_iterations: 200,
            integrator: Integrator::Rk4,
            fictitious_play: false,
            rate_cap: T::of(1e3),
            initial_flow: None,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::InvalidInput(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be >= 1".into()));
        }
        if !(self.rate_cap > T::zero()) {
            return Err(Error::InvalidInput("rate cap must be positive".into()));
        }
        Ok(())
    }
}

/// Solver output: the equilibrium triple plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct EquilibriumResult<T> {
    pub value: ValueField<T>,
    pub flow: MeasureFlow<T>,
    pub policy: Policy<T>,
    /// Fixed-point residual after each iteration.
    pub residual_history: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Rate-cap clamps seen while building the final policy; nonzero
    /// values mean the instance left the bounded-rate model class.
    pub rate_cap_hits: usize,
}

/// One application of the best-response map: backward solve against the
/// flow, feedback from the value, forward solve under the feedback.
/// Returns the value and policy alongside the new flow so the caller can
/// keep a mutually consistent triple without re-solving.
pub fn best_response_map<T: Real>(
    cost: &CostModel<T>,
    f_spec: &InteractionSpec<T>,
    g_spec: &InteractionSpec<T>,
    m0: &CellDensities<T>,
    flow: &MeasureFlow<T>,
    grids: &Grids<T>,
    config: &SolverConfig<T>,
) -> Result<(ValueField<T>, Policy<T>, MeasureFlow<T>)> {
    let value = solve_hjb_backward(
        cost,
        f_spec,
        g_spec,
        flow,
        &grids.time,
        &grids.atlas,
        config.integrator,
    )?;
    let policy = policy_from_value(cost, &value, &grids.atlas, config.rate_cap)?;
    let next = solve_kolmogorov_forward(&policy, m0, &grids.time, config.integrator)?;
    Ok((value, policy, next))
}

/// Damped fixed-point iteration on the flow.
///
/// Writing `Phi` for the best-response map, the loop updates
/// `m <- (1 - w_k) m + w_k Phi(m)` with `w_1 = 1` and afterwards either the
/// fixed damping weight or `1/k` in fictitious-play mode, and stops when
/// `flow_distance(m, Phi(m)) <= tol`. Non-convergence is reported in the
/// result, not as an error, so the residual history stays inspectable.
pub fn solve_mfg<T: Real>(
    cost: &CostModel<T>,
    f_spec: &InteractionSpec<T>,
    g_spec: &InteractionSpec<T>,
    m0: &CellDensities<T>,
    grids: &Grids<T>,
    config: &SolverConfig<T>,
) -> Result<EquilibriumResult<T>> {
    config.validate()?;
    cost.validate(grids.states.d())?;
    f_spec.validate(grids.states.d())?;
    g_spec.validate(grids.states.d())?;
    if m0.d() != grids.states.d() || m0.n_cells() != grids.atlas.n_cells() {
        return Err(Error::GridMismatch(format!(
            "initial densities are {}x{}, grids are {}x{}",
            m0.n_cells(),
            m0.d(),
            grids.atlas.n_cells(),
            grids.states.d()
        )));
    }
    m0.validate()?;

    let mut current = match &config.initial_flow {
        Some(flow) => {
            flow.validate()?;
            flow.clone()
        }
        None => MeasureFlow::frozen(&grids.time, m0),
    };

    let mut residual_history = Vec::new();
    // Best response to the starting flow; re-used as the first update.
    let (mut value, mut policy, mut response) =
        best_response_map(cost, f_spec, g_spec, m0, &current, grids, config)?;

    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=config.max_iterations {
        iterations = k;
        let weight = if k == 1 {
            T::one()
        } else if config.fictitious_play {
            T::one() / T::from_usize(k).unwrap()
        } else {
            config.damping
        };
        current = current.mix(&response, weight)?;

        let (v, p, next) =
            best_response_map(cost, f_spec, g_spec, m0, &current, grids, config)?;
        value = v;
        policy = p;
        response = next;

        let residual = flow_distance(&current, &response, &grids.atlas)?;
        residual_history.push(residual);
        if residual <= config.tolerance {
            converged = true;
            break;
        }
    }

    // The last best-response evaluation was computed from `current`, so
    // (value, policy) are exactly the backward solve and feedback for the
    // returned flow.
    let rate_cap_hits = policy.cap_hits();
    Ok(EquilibriumResult {
        value,
        flow: current,
        policy,
        residual_history,
        converged,
        iterations,
        rate_cap_hits,
    })
}
