//! Distributions over (position, state): discrete measures, measure flows
//! and the metric used by the fixed-point iteration.

use crate::error::{Error, Result};
use crate::model::space::{PlayerLayout, PositionAtlas, TimeGrid};
use crate::scalar::Real;

/// Finitely supported probability measure on position × state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    atoms: Vec<Atom<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom<T> {
    pub position: T,
    pub state: usize,
    pub mass: T,
}

impl<T: Real> DiscreteMeasure<T> {
    pub fn new(atoms: Vec<Atom<T>>) -> Result<Self> {
        let mut total = T::zero();
        for (i, a) in atoms.iter().enumerate() {
            if !(a.mass >= T::zero()) {
                return Err(Error::InvalidInput(format!(
                    "atom {i} has negative or NaN mass {}",
                    a.mass
                )));
            }
            total = total + a.mass;
        }
        if (total - T::one()).abs() > T::of(T::UNIT_TOL) {
            return Err(Error::InvalidInput(format!(
                "atom masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }
}

/// Joint empirical measure of positions and states of all players except `i`:
/// `N - 1` atoms of mass `1/(N-1)`.
pub fn empirical_measure<T: Real>(
    layout: &PlayerLayout<T>,
    states: &[usize],
    i: usize,
) -> Result<DiscreteMeasure<T>> {
    let n = layout.n_players();
    if n < 2 {
        return Err(Error::SinglePlayer);
    }
    if i >= n {
        return Err(Error::PlayerIndexOutOfRange { index: i, n });
    }
    if states.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} states for {} players",
            states.len(),
            n
        )));
    }
    let mass = T::one() / T::from_usize(n - 1).unwrap();
    let atoms = (0..n)
        .filter(|&j| j != i)
        .map(|j| Atom {
            position: layout.position(j),
            state: states[j],
            mass,
        })
        .collect();
    DiscreteMeasure::new(atoms)
}

/// Per-cell conditional state distributions at one instant: `m_x(u_k)` for
/// every atlas cell `k`, stored cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellDensities<T> {
    d: usize,
    values: Vec<T>,
}

impl<T: Real> CellDensities<T> {
    pub fn new(d: usize, values: Vec<T>) -> Result<Self> {
        if d == 0 || values.is_empty() || !values.len().is_multiple_of(d) {
            return Err(Error::InvalidInput(format!(
                "{} density entries do not split into cells of {d} states",
                values.len()
            )));
        }
        Ok(Self { d, values })
    }

    /// Same distribution in every cell.
    pub fn broadcast(per_state: &[T], n_cells: usize) -> Self {
        let mut values = Vec::with_capacity(per_state.len() * n_cells);
        for _ in 0..n_cells {
            values.extend_from_slice(per_state);
        }
        Self {
            d: per_state.len(),
            values,
        }
    }

    pub fn uniform(d: usize, n_cells: usize) -> Self {
        let p = T::one() / T::from_usize(d).unwrap();
        Self {
            d,
            values: vec![p; d * n_cells],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn cell(&self, k: usize) -> &[T] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Checks every cell lies on the probability simplex within the
    /// scalar-type tolerances.
    pub fn validate(&self) -> Result<()> {
        for k in 0..self.n_cells() {
            let cell = self.cell(k);
            let total: T = cell.iter().copied().sum();
            if (total - T::one()).abs() > T::of(T::MASS_TOL) {
                return Err(Error::InvalidInput(format!(
                    "cell {k} state mass is {total}, expected 1"
                )));
            }
            for (x, &v) in cell.iter().enumerate() {
                if v < -T::of(T::NEG_TOL) || !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "cell {k}, state {x} has invalid mass {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Either form a probability measure on position × state can take here:
/// raw atoms, or per-cell densities paired with the atlas weights.
#[derive(Debug, Clone, Copy)]
pub enum MeasureView<'a, T> {
    Atoms(&'a DiscreteMeasure<T>),
    Cells {
        atlas: &'a PositionAtlas<T>,
        densities: &'a CellDensities<T>,
    },
}

/// Discretized flow `m_x(t_k, u)` of conditional state distributions:
/// one simplex point per (grid time, atlas cell).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFlow<T> {
    n_cells: usize,
    d: usize,
    /// Indexed `[t][cell][state]`, flattened.
    values: Vec<T>,
}

impl<T: Real> MeasureFlow<T> {
    /// Builds a flow from raw values without simplex checks; callers that
    /// assemble flows numerically should `validate` afterwards.
    pub fn from_values(
        n_points: usize,
        n_cells: usize,
        d: usize,
        values: Vec<T>,
    ) -> Result<Self> {
        if values.len() != n_points * n_cells * d {
            return Err(Error::InvalidInput(format!(
                "flow of {} values does not match {n_points} x {n_cells} x {d}",
                values.len()
            )));
        }
        Ok(Self { n_cells, d, values })
    }

    /// Flow frozen at the given per-cell densities for every grid time.
    pub fn frozen(time: &TimeGrid<T>, densities: &CellDensities<T>) -> Self {
        let mut values = Vec::with_capacity(time.n_points() * densities.values().len());
        for _ in 0..time.n_points() {
            values.extend_from_slice(densities.values());
        }
        Self {
            n_cells: densities.n_cells(),
            d: densities.d(),
            values,
        }
    }

    pub fn n_points(&self) -> usize {
        self.values.len() / (self.n_cells * self.d)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, t: usize, cell: usize, state: usize) -> T {
        self.values[(t * self.n_cells + cell) * self.d + state]
    }

    pub fn set(&mut self, t: usize, cell: usize, state: usize, v: T) {
        self.values[(t * self.n_cells + cell) * self.d + state] = v;
    }

    /// The `[cell][state]` block at grid time `t`.
    pub fn at_time(&self, t: usize) -> &[T] {
        let stride = self.n_cells * self.d;
        &self.values[t * stride..(t + 1) * stride]
    }

    pub fn slice_mut(&mut self, t: usize) -> &mut [T] {
        let stride = self.n_cells * self.d;
        &mut self.values[t * stride..(t + 1) * stride]
    }

    pub fn state_block(&self, t: usize, cell: usize) -> &[T] {
        let base = (t * self.n_cells + cell) * self.d;
        &self.values[base..base + self.d]
    }

    /// Per-cell densities at grid time `t`, cloned out.
    pub fn densities_at(&self, t: usize) -> CellDensities<T> {
        CellDensities {
            d: self.d,
            values: self.at_time(t).to_vec(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Simplex invariants at every grid point: unit mass within the mass
    /// tolerance, entries no more negative than the round-off slack.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.n_points() {
            for cell in 0..self.n_cells {
                let block = self.state_block(t, cell);
                let total: T = block.iter().copied().sum();
                let dev = (total - T::one()).abs();
                if dev > T::of(T::MASS_TOL) || !total.is_finite() {
                    return Err(Error::SimplexViolation {
                        t_index: t,
                        cell,
                        deviation: dev.as_f64(),
                    });
                }
                for &v in block {
                    if v < -T::of(T::NEG_TOL) || !v.is_finite() {
                        return Err(Error::SimplexViolation {
                            t_index: t,
                            cell,
                            deviation: v.as_f64(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.n_cells != other.n_cells
            || self.d != other.d
            || self.values.len() != other.values.len()
        {
            return Err(Error::GridMismatch(format!(
                "flow {}x{}x{} vs {}x{}x{}",
                self.n_points(),
                self.n_cells,
                self.d,
                other.n_points(),
                other.n_cells,
                other.d
            )));
        }
        Ok(())
    }

    /// Convex combination `(1 - w) * self + w * other`, entrywise.
    pub fn mix(&self, other: &Self, w: T) -> Result<Self> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (T::one() - w) * a + w * b)
            .collect();
        Ok(Self {
            n_cells: self.n_cells,
            d: self.d,
            values,
        })
    }
}

/// Metric on measure flows over a fixed grid: the supremum over grid times
/// of the atlas-weighted L1 distance between the conditional distributions.
/// On a fixed finite discretization this induces weak convergence.
pub fn flow_distance<T: Real>(
    m1: &MeasureFlow<T>,
    m2: &MeasureFlow<T>,
    atlas: &PositionAtlas<T>,
) -> Result<T> {
    m1.same_grid(m2)?;
    if atlas.n_cells() != m1.n_cells() {
        return Err(Error::GridMismatch(format!(
            "atlas has {} cells, flow has {}",
            atlas.n_cells(),
            m1.n_cells()
        )));
    }
    let mut sup = T::zero();
    for t in 0..m1.n_points() {
        let mut dist = T::zero();
        for cell in 0..m1.n_cells() {
            let a = m1.state_block(t, cell);
            let b = m2.state_block(t, cell);
            let mut l1 = T::zero();
            for x in 0..m1.d() {
                l1 = l1 + (a[x] - b[x]).abs();
            }
            dist = dist + l1 * atlas.weight(cell);
        }
        if dist > sup {
            sup = dist;
        }
    }
    Ok(sup)
}
