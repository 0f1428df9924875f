//! Value fields and jump-rate policies on the (time, cell, state) grid.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Discretized value function `V(t_k, x, u_cell)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField<T> {
    n_cells: usize,
    d: usize,
    /// Indexed `[t][cell][state]`, flattened.
    values: Vec<T>,
}

impl<T: Real> ValueField<T> {
    pub fn zeros(n_points: usize, n_cells: usize, d: usize) -> Self {
        Self {
            n_cells,
            d,
            values: vec![T::zero(); n_points * n_cells * d],
        }
    }

    pub fn from_values(n_points: usize, n_cells: usize, d: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n_points * n_cells * d {
            return Err(Error::InvalidInput(format!(
                "value field of {} entries does not match {n_points} x {n_cells} x {d}",
                values.len()
            )));
        }
        Ok(Self { n_cells, d, values })
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

    pub fn state_block(&self, t: usize, cell: usize) -> &[T] {
        let base = (t * self.n_cells + cell) * self.d;
        &self.values[base..base + self.d]
    }

    pub fn state_block_mut(&mut self, t: usize, cell: usize) -> &mut [T] {
        let base = (t * self.n_cells + cell) * self.d;
        &mut self.values[base..base + self.d]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn validate(&self) -> Result<()> {
        for t in 0..self.n_points() {
            for cell in 0..self.n_cells {
                if self.state_block(t, cell).iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { t_index: t, cell });
                }
            }
        }
        Ok(())
    }

    /// Finite-state gradient at `(t, cell, x)`: the vector
    /// `(V(y) - V(x))_y` with the `x` entry equal to zero.
    pub fn gradient(&self, t: usize, cell: usize, x: usize, out: &mut [T]) {
        let block = self.state_block(t, cell);
        let vx = block[x];
        for (y, o) in out.iter_mut().enumerate() {
            *o = block[y] - vx;
        }
        out[x] = T::zero();
    }
}

/// Feedback jump rates `alpha(t_k, u_cell, x -> y)`; diagonal entries are
/// kept as zero. Rates are clamped at construction against the cap they
/// were built with.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T> {
    n_cells: usize,
    d: usize,
    rate_cap: T,
    cap_hits: usize,
    /// Indexed `[t][cell][from][to]`, flattened.
    rates: Vec<T>,
}

impl<T: Real> Policy<T> {
    pub fn zeros(n_points: usize, n_cells: usize, d: usize, rate_cap: T) -> Self {
        Self {
            n_cells,
            d,
            rate_cap,
            cap_hits: 0,
            rates: vec![T::zero(); n_points * n_cells * d * d],
        }
    }

    /// How many rate entries were clamped at the cap when this policy was
    /// built; nonzero values mean the instance left the bounded-rate model
    /// class and results should be treated with care.
    pub fn cap_hits(&self) -> usize {
        self.cap_hits
    }

    pub fn set_cap_hits(&mut self, hits: usize) {
        self.cap_hits = hits;
    }

    pub fn n_points(&self) -> usize {
        self.rates.len() / (self.n_cells * self.d * self.d)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rate_cap(&self) -> T {
        self.rate_cap
    }

    /// Rate row out of state `from` at `(t, cell)`, length `d`.
    pub fn rates_from(&self, t: usize, cell: usize, from: usize) -> &[T] {
        let base = ((t * self.n_cells + cell) * self.d + from) * self.d;
        &self.rates[base..base + self.d]
    }

    pub fn get(&self, t: usize, cell: usize, from: usize, to: usize) -> T {
        self.rates[((t * self.n_cells + cell) * self.d + from) * self.d + to]
    }

    /// Writes a rate row, clamping at the cap; returns how many entries hit it.
    pub fn set_row_clamped(
        &mut self,
        t: usize,
        cell: usize,
        from: usize,
        row: &[T],
    ) -> usize {
        let cap = self.rate_cap;
        let base = ((t * self.n_cells + cell) * self.d + from) * self.d;
        let mut hits = 0;
        for (to, &r) in row.iter().enumerate() {
            let r = if to == from { T::zero() } else { r };
            let clamped = if r > cap {
                hits += 1;
                cap
            } else {
                r
            };
            self.rates[base + to] = clamped;
        }
        hits
    }

    pub fn validate(&self) -> Result<()> {
        for (idx, &r) in self.rates.iter().enumerate() {
            if !(r >= T::zero()) || r > self.rate_cap {
                return Err(Error::InvalidInput(format!(
                    "policy rate {r} at flat index {idx} outside [0, {}]",
                    self.rate_cap
                )));
            }
        }
        Ok(())
    }
}
