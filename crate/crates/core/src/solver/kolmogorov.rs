//! Forward Kolmogorov solve for the state distribution under a feedback
//! policy, cell by cell.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::model::{CellDensities, MeasureFlow, Policy, TimeGrid};
use crate::scalar::Real;
use crate::solver::Integrator;

/// Integrates, independently per cell, the forward equation
///
/// ```text
/// dm_x/dt = sum_y m_y a_x(y) - m_x sum_y a_y(x)
/// ```
///
/// from the initial per-cell distributions. Rates are read at matching
/// grid indices (half-step stages reuse the bracketing endpoints, a
/// trapezoidal treatment mirroring the backward solve). The output is
/// checked against the simplex invariants at every grid point; Runge-Kutta
/// conserves mass to round-off by construction, the implicit Euler step
/// solves a linear system whose matrix preserves the simplex for any step.
pub fn solve_kolmogorov_forward<T: Real>(
    policy: &Policy<T>,
    m0: &CellDensities<T>,
    time: &TimeGrid<T>,
    integrator: Integrator,
) -> Result<MeasureFlow<T>> {
    let n_points = time.n_points();
    let n_cells = policy.n_cells();
    let d = policy.d();
    if policy.n_points() != n_points {
        return Err(Error::GridMismatch(format!(
            "policy has {} time points, grid has {n_points}",
            policy.n_points()
        )));
    }
    if m0.n_cells() != n_cells || m0.d() != d {
        return Err(Error::GridMismatch(format!(
            "initial densities are {}x{}, policy is {}x{}",
            m0.n_cells(),
            m0.d(),
            n_cells,
            d
        )));
    }
    m0.validate()?;
    policy.validate()?;

    let dt = time.dt();
    let per_cell: Vec<Result<Vec<T>>> = (0..n_cells)
        .into_par_iter()
        .map(|cell| {
            let mut values = vec![T::zero(); n_points * d];
            values[..d].copy_from_slice(m0.cell(cell));

            let rhs = |m: &[T], t_idx: usize, out: &mut [T]| {
                for x in 0..d {
                    let mut acc = T::zero();
                    for y in 0..d {
                        if y != x {
                            // Inflow from y minus outflow to y.
                            acc = acc + m[y] * policy.get(t_idx, cell, y, x)
                                - m[x] * policy.get(t_idx, cell, x, y);
                        }
                    }
                    out[x] = acc;
                }
            };

            let mut k1 = vec![T::zero(); d];
            let mut k2 = vec![T::zero(); d];
            let mut k3 = vec![T::zero(); d];
            let mut k4 = vec![T::zero(); d];
            let mut work = vec![T::zero(); d];
            for k in 0..n_points - 1 {
                let m_left: Vec<T> = values[k * d..(k + 1) * d].to_vec();
                match integrator {
                    Integrator::Rk4 => {
                        let half = dt * T::of(0.5);
                        rhs(&m_left, k, &mut k1);
                        for x in 0..d {
                            work[x] = m_left[x] + half * k1[x];
                        }
                        rhs(&work, k, &mut k2);
                        for x in 0..d {
                            work[x] = m_left[x] + half * k2[x];
                        }
                        rhs(&work, k + 1, &mut k3);
                        for x in 0..d {
                            work[x] = m_left[x] + dt * k3[x];
                        }
                        rhs(&work, k + 1, &mut k4);
                        let sixth = dt / T::of(6.0);
                        for x in 0..d {
                            values[(k + 1) * d + x] = m_left[x]
                                + sixth
                                    * (k1[x] + T::of(2.0) * k2[x] + T::of(2.0) * k3[x] + k4[x]);
                        }
                    }
                    Integrator::ImplicitEuler => {
                        // (I - dt Q^T(t_{k+1})) m_{k+1} = m_k with Q the
                        // generator at the right endpoint.
                        let mut mat = vec![T::zero(); d * d];
                        for x in 0..d {
                            for y in 0..d {
                                let q_t = if y == x {
                                    let mut exit = T::zero();
                                    for z in 0..d {
                                        if z != x {
                                            exit = exit + policy.get(k + 1, cell, x, z);
                                        }
                                    }
                                    -exit
                                } else {
                                    policy.get(k + 1, cell, y, x)
                                };
                                let identity = if y == x { T::one() } else { T::zero() };
                                mat[x * d + y] = identity - dt * q_t;
                            }
                        }
                        let next = solve_dense(&mut mat, m_left.clone()).ok_or(
                            Error::NonFinite { t_index: k + 1, cell },
                        )?;
                        values[(k + 1) * d..(k + 2) * d].copy_from_slice(&next);
                    }
                }
                if values[(k + 1) * d..(k + 2) * d].iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { t_index: k + 1, cell });
                }
            }
            Ok(values)
        })
        .collect();

    let mut flat = vec![T::zero(); n_points * n_cells * d];
    for (cell, res) in per_cell.into_iter().enumerate() {
        let values = res?;
        for k in 0..n_points {
            for x in 0..d {
                flat[(k * n_cells + cell) * d + x] = values[k * d + x];
            }
        }
    }
    let flow = MeasureFlow::from_values(n_points, n_cells, d, flat)?;
    flow.validate()?;
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant_symmetric_policy(
        n_points: usize,
        n_cells: usize,
        rate: f64,
    ) -> Policy<f64> {
        let mut p = Policy::zeros(n_points, n_cells, 2, 1e3);
        for t in 0..n_points {
            for cell in 0..n_cells {
                p.set_row_clamped(t, cell, 0, &[0.0, rate]);
                p.set_row_clamped(t, cell, 1, &[rate, 0.0]);
            }
        }
        p
    }

    #[test]
    fn zero_policy_keeps_initial_distribution_bitwise() {
        let time = TimeGrid::new(1.0, 50).unwrap();
        let policy = Policy::zeros(time.n_points(), 2, 3, 1e3);
        let m0 = CellDensities::new(3, vec![0.2, 0.5, 0.3, 1.0, 0.0, 0.0]).unwrap();
        for integrator in [Integrator::Rk4, Integrator::ImplicitEuler] {
            let flow = solve_kolmogorov_forward(&policy, &m0, &time, integrator).unwrap();
            for k in 0..time.n_points() {
                assert_eq!(flow.at_time(k), m0.values());
            }
        }
    }

    #[test]
    fn symmetric_rates_match_closed_form() {
        // m_1(t) = (1 + exp(-2 t)) / 2 from m_0 = (1, 0) with unit rates.
        let time = TimeGrid::new(1.0, 200).unwrap();
        let policy = constant_symmetric_policy(time.n_points(), 1, 1.0);
        let m0 = CellDensities::new(2, vec![1.0, 0.0]).unwrap();
        let flow = solve_kolmogorov_forward(&policy, &m0, &time, Integrator::Rk4).unwrap();
        let got = flow.get(time.n_steps(), 0, 0);
        let want = 0.5 * (1.0 + (-2.0f64).exp());
        assert_abs_diff_eq!(got, want, epsilon = 1e-6);
        assert_abs_diff_eq!(got, 0.56767, epsilon = 1e-5);
    }

    #[test]
    fn implicit_euler_is_first_order_on_closed_form() {
        let want = 0.5 * (1.0 + (-2.0f64).exp());
        let run = |n: usize| {
            let time = TimeGrid::new(1.0, n).unwrap();
            let policy = constant_symmetric_policy(time.n_points(), 1, 1.0);
            let m0 = CellDensities::new(2, vec![1.0, 0.0]).unwrap();
            let flow =
                solve_kolmogorov_forward(&policy, &m0, &time, Integrator::ImplicitEuler).unwrap();
            (flow.get(n, 0, 0) - want).abs()
        };
        let ratio = run(50) / run(100);
        assert!(ratio > 1.6 && ratio < 2.4, "first-order ratio {ratio}");
    }

    #[test]
    fn relabeling_states_permutes_the_flow() {
        let time = TimeGrid::new(0.8, 40).unwrap();
        let d = 3;
        let mut policy = Policy::zeros(time.n_points(), 1, d, 1e3);
        let mut permuted = Policy::zeros(time.n_points(), 1, d, 1e3);
        // Permutation sigma = (0 -> 1, 1 -> 2, 2 -> 0).
        let sigma = [1usize, 2, 0];
        let rates = [[0.0, 0.7, 0.2], [0.4, 0.0, 1.1], [0.9, 0.3, 0.0]];
        for t in 0..time.n_points() {
            for x in 0..d {
                policy.set_row_clamped(t, 0, x, &rates[x]);
            }
            for x in 0..d {
                let mut row = [0.0; 3];
                for y in 0..d {
                    row[sigma[y]] = rates[x][y];
                }
                permuted.set_row_clamped(t, 0, sigma[x], &row);
            }
        }
        let m0 = CellDensities::new(d, vec![0.5, 0.3, 0.2]).unwrap();
        let m0_perm = CellDensities::new(d, vec![0.2, 0.5, 0.3]).unwrap();
        let flow = solve_kolmogorov_forward(&policy, &m0, &time, Integrator::Rk4).unwrap();
        let flow_perm =
            solve_kolmogorov_forward(&permuted, &m0_perm, &time, Integrator::Rk4).unwrap();
        for k in 0..time.n_points() {
            for x in 0..d {
                assert_abs_diff_eq!(
                    flow.get(k, 0, x),
                    flow_perm.get(k, 0, sigma[x]),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn mass_conserved_and_nonnegative_on_random_instances() {
        use rand::Rng;
        let mut rng = crate::rng::stream(17, &[0]);
        for _ in 0..10 {
            let d = rng.random_range(2..=5usize);
            let n_cells = rng.random_range(1..=4usize);
            let n_steps = 80;
            let time = TimeGrid::new(1.0, n_steps).unwrap();
            let mut policy = Policy::zeros(time.n_points(), n_cells, d, 1e3);
            for t in 0..time.n_points() {
                for cell in 0..n_cells {
                    for x in 0..d {
                        let row: Vec<f64> =
                            (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
                        policy.set_row_clamped(t, cell, x, &row);
                    }
                }
            }
            let mut m0_values = Vec::new();
            for _ in 0..n_cells {
                let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..1.0)).collect();
                let total: f64 = raw.iter().sum();
                m0_values.extend(raw.into_iter().map(|v| v / total));
            }
            let m0 = CellDensities::new(d, m0_values).unwrap();
            let flow = solve_kolmogorov_forward(&policy, &m0, &time, Integrator::Rk4).unwrap();
            flow.validate().unwrap();
        }
    }

    #[test]
    fn per_step_motion_bounded_by_rates() {
        let time = TimeGrid::new(1.0, 100).unwrap();
        let rate = 1.5;
        let policy = constant_symmetric_policy(time.n_points(), 1, rate);
        let m0 = CellDensities::new(2, vec![1.0, 0.0]).unwrap();
        let flow = solve_kolmogorov_forward(&policy, &m0, &time, Integrator::Rk4).unwrap();
        let d = 2.0;
        for k in 0..time.n_steps() {
            let mut step_l1 = 0.0;
            for x in 0..2 {
                step_l1 += (flow.get(k + 1, 0, x) - flow.get(k, 0, x)).abs();
            }
            // Sharp bound from the actual exit rates, and the loose
            // declared bound rate_cap * d * dt.
            assert!(step_l1 <= 2.0 * rate * time.dt() + 1e-12);
            assert!(step_l1 <= policy.rate_cap() * d * time.dt() + 1e-12);
        }
    }
}
