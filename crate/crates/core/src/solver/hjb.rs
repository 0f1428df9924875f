//! Backward Hamilton-Jacobi-Bellman solve and the induced feedback policy.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    argmin_rates, eval_interaction, hamiltonian, CostModel, InteractionSpec, MeasureFlow,
    MeasureView, Policy, PositionAtlas, TimeGrid, ValueField,
};
use crate::scalar::Real;
use crate::solver::Integrator;

/// Interaction values `F(x, m(t_k), u_cell)` tabulated on the whole grid.
pub(crate) fn tabulate_forcing<T: Real>(
    spec: &InteractionSpec<T>,
    flow: &MeasureFlow<T>,
    atlas: &PositionAtlas<T>,
) -> Result<Vec<T>> {
    let n_points = flow.n_points();
    let n_cells = flow.n_cells();
    let d = flow.d();
    let mut forcing = vec![T::zero(); n_points * n_cells * d];
    for t in 0..n_points {
        let densities = flow.densities_at(t);
        let view = MeasureView::Cells {
            atlas,
            densities: &densities,
        };
        for cell in 0..n_cells {
            let u = atlas.cell(cell);
            for x in 0..d {
                forcing[(t * n_cells + cell) * d + x] = eval_interaction(spec, x, view, u)?;
            }
        }
    }
    Ok(forcing)
}

/// Solves, independently for every atlas cell, the backward system
///
/// ```text
/// -dV/dt + H(x, grad V, u) = F(x, m(t), u),   V(T, x, u) = G(x, m(T), u)
/// ```
///
/// on the shared time grid. The terminal condition is written verbatim;
/// interior interaction values are read at matching grid indices only
/// (the two half-step stages of a Runge-Kutta step reuse the bracketing
/// endpoints, which amounts to a trapezoidal treatment of the coupling).
pub fn solve_hjb_backward<T: Real>(
    cost: &CostModel<T>,
    f_spec: &InteractionSpec<T>,
    g_spec: &InteractionSpec<T>,
    flow: &MeasureFlow<T>,
    time: &TimeGrid<T>,
    atlas: &PositionAtlas<T>,
    integrator: Integrator,
) -> Result<ValueField<T>> {
    let n_cells = atlas.n_cells();
    let d = flow.d();
    let n_points = time.n_points();
    if flow.n_points() != n_points || flow.n_cells() != n_cells {
        return Err(Error::GridMismatch(format!(
            "flow is {}x{}, grids are {}x{}",
            flow.n_points(),
            flow.n_cells(),
            n_points,
            n_cells
        )));
    }

    let forcing = tabulate_forcing(f_spec, flow, atlas)?;
    // Terminal cost against m(T), written bitwise into V(T).
    let terminal_densities = flow.densities_at(n_points - 1);
    let terminal_view = MeasureView::Cells {
        atlas,
        densities: &terminal_densities,
    };

    let dt = time.dt();
    let per_cell: Vec<Result<Vec<T>>> = (0..n_cells)
        .into_par_iter()
        .map(|cell| {
            let u = atlas.cell(cell);
            let mut terminal = vec![T::zero(); d];
            for (x, slot) in terminal.iter_mut().enumerate() {
                *slot = eval_interaction(g_spec, x, terminal_view, u)?;
            }
            let cell_forcing = |k: usize| &forcing[(k * n_cells + cell) * d..][..d];
            integrate_backward_cell(
                cost, u, &cell_forcing, &terminal, dt, n_points, d, integrator,
            )
            .map_err(|e| match e {
                Error::NonFinite { t_index, .. } => Error::NonFinite { t_index, cell },
                other => other,
            })
        })
        .collect();

    let mut field = ValueField::zeros(n_points, n_cells, d);
    for (cell, res) in per_cell.into_iter().enumerate() {
        let values = res?;
        for k in 0..n_points {
            for x in 0..d {
                field.set(k, cell, x, values[k * d + x]);
            }
        }
    }
    Ok(field)
}

/// Backward integration of the value ODE for one position, against a
/// tabulated forcing `F(t_k, x)`: the building block of both the per-cell
/// system solve and the single-player deviation solve.
///
/// `forcing(k)` returns the length-`d` slice at grid index `k`; the error
/// path reports the time index with `cell = 0`, callers rewrite it.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_backward_cell<'a, T: Real>(
    cost: &CostModel<T>,
    u: T,
    forcing: &dyn Fn(usize) -> &'a [T],
    terminal: &[T],
    dt: T,
    n_points: usize,
    d: usize,
    integrator: Integrator,
) -> Result<Vec<T>> {
    let mut values = vec![T::zero(); n_points * d];
    values[(n_points - 1) * d..].copy_from_slice(terminal);

    // dV/dt = H(x, grad V, u) - F(t, x, u)
    let rhs = |v: &[T], f_slice: &[T], out: &mut Vec<T>| -> Result<()> {
        out.clear();
        let mut grad = vec![T::zero(); d];
        for x in 0..d {
            let vx = v[x];
            for y in 0..d {
                grad[y] = v[y] - vx;
            }
            grad[x] = T::zero();
            out.push(hamiltonian(cost, x, &grad, u)? - f_slice[x]);
        }
        Ok(())
    };

    let mut stage = Vec::with_capacity(d);
    let mut work = vec![T::zero(); d];
    for k in (0..n_points - 1).rev() {
        let f_right = forcing(k + 1);
        let f_left = forcing(k);
        let v_right: Vec<T> = values[(k + 1) * d..(k + 2) * d].to_vec();
        match integrator {
            Integrator::Rk4 => {
                let half = dt * T::of(0.5);
                rhs(&v_right, f_right, &mut stage)?;
                let k1 = stage.clone();
                for x in 0..d {
                    work[x] = v_right[x] - half * k1[x];
                }
                rhs(&work, f_right, &mut stage)?;
                let k2 = stage.clone();
                for x in 0..d {
                    work[x] = v_right[x] - half * k2[x];
                }
                rhs(&work, f_left, &mut stage)?;
                let k3 = stage.clone();
                for x in 0..d {
                    work[x] = v_right[x] - dt * k3[x];
                }
                rhs(&work, f_left, &mut stage)?;
                let k4 = stage.clone();
                let sixth = dt / T::of(6.0);
                for x in 0..d {
                    values[k * d + x] = v_right[x]
                        - sixth * (k1[x] + T::of(2.0) * k2[x] + T::of(2.0) * k3[x] + k4[x]);
                }
            }
            Integrator::ImplicitEuler => {
                // V_k = V_{k+1} - dt (H(grad V_k) - F_k), solved by
                // fixed-point iteration from V_{k+1}.
                let mut w = v_right.clone();
                let mut converged = false;
                for _ in 0..200 {
                    rhs(&w, f_left, &mut stage)?;
                    let mut delta = T::zero();
                    for x in 0..d {
                        let next = v_right[x] - dt * stage[x];
                        delta = delta.max((next - w[x]).abs());
                        work[x] = next;
                    }
                    std::mem::swap(&mut w, &mut work);
                    if delta <= T::of(1e-14) * (T::one() + w[0].abs()) {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::InvalidInput(format!(
                        "implicit step did not contract at t-index {k}; reduce the time step"
                    )));
                }
                values[k * d..(k + 1) * d].copy_from_slice(&w);
            }
        }
        if values[k * d..(k + 1) * d].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t_index: k, cell: 0 });
        }
    }
    Ok(values)
}

/// Feedback rates from a value field: at every grid point the minimizer
/// of the Hamiltonian at the finite-state gradient of `V`. Rates above
/// the cap are clamped; the count of clamped entries is recorded on the
/// policy.
pub fn policy_from_value<T: Real>(
    cost: &CostModel<T>,
    value: &ValueField<T>,
    atlas: &PositionAtlas<T>,
    rate_cap: T,
) -> Result<Policy<T>> {
    value.validate()?;
    let n_points = value.n_points();
    let n_cells = value.n_cells();
    let d = value.d();
    let mut policy = Policy::zeros(n_points, n_cells, d, rate_cap);
    let mut grad = vec![T::zero(); d];
    let mut hits = 0;
    for t in 0..n_points {
        for cell in 0..n_cells {
            let u = atlas.cell(cell);
            for x in 0..d {
                value.gradient(t, cell, x, &mut grad);
                let rates = argmin_rates(cost, x, &grad, u)?;
                hits += policy.set_row_clamped(t, cell, x, &rates);
            }
        }
    }
    policy.set_cap_hits(hits);
    Ok(policy)
}
