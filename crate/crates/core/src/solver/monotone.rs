//! Sampling-based check of the monotonicity condition that guarantees
//! uniqueness of the equilibrium.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::model::{eval_interaction, CellDensities, InteractionSpec, MeasureView, PositionAtlas};
use crate::rng::stream;
use crate::scalar::Real;

/// Pairings below this are reported as violations.
const VIOLATION_THRESHOLD: f64 = -1e-10;

/// Outcome of the sampling check. A nonnegative minimum is evidence, not
/// proof: the condition quantifies over all measure pairs, which is not
/// decidable for a black-box interaction.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport<T> {
    pub min_value: T,
    pub n_samples: usize,
    pub violation: Option<MonotonicityWitness<T>>,
}

/// First sampled pair whose pairing fell below the threshold, cell-major
/// densities for both measures.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityWitness<T> {
    pub value: T,
    pub first: Vec<T>,
    pub second: Vec<T>,
}

impl<T: Real> MonotonicityReport<T> {
    pub fn is_monotone_on_samples(&self) -> bool {
        self.violation.is_none()
    }
}

/// Draws pairs of random conditional distributions (uniform on the simplex
/// per cell) and evaluates the pairing
///
/// ```text
/// sum_x sum_cells [F(x, m, u) - F(x, m', u)] (m_x(u) - m'_x(u)) mu(u)
/// ```
///
/// returning the minimum over samples and the first violating pair.
pub fn check_monotonicity<T: Real>(
    spec: &InteractionSpec<T>,
    atlas: &PositionAtlas<T>,
    d: usize,
    n_samples: usize,
    seed: u64,
) -> Result<MonotonicityReport<T>> {
    spec.validate(d)?;
    let mut min_value = T::infinity();
    let mut violation = None;
    for sample in 0..n_samples.max(1) {
        let mut rng = stream(seed, &[0x6d6f_6e6f, sample as u64]);
        let first = random_densities(&mut rng, d, atlas.n_cells());
        let second = random_densities(&mut rng, d, atlas.n_cells());
        let value = pairing(spec, atlas, &first, &second)?;
        if value < min_value {
            min_value = value;
        }
        if value < T::of(VIOLATION_THRESHOLD) && violation.is_none() {
            violation = Some(MonotonicityWitness {
                value,
                first: first.values().to_vec(),
                second: second.values().to_vec(),
            });
        }
    }
    Ok(MonotonicityReport {
        min_value,
        n_samples: n_samples.max(1),
        violation,
    })
}

fn pairing<T: Real>(
    spec: &InteractionSpec<T>,
    atlas: &PositionAtlas<T>,
    first: &CellDensities<T>,
    second: &CellDensities<T>,
) -> Result<T> {
    let d = first.d();
    let view_first = MeasureView::Cells {
        atlas,
        densities: first,
    };
    let view_second = MeasureView::Cells {
        atlas,
        densities: second,
    };
    let mut acc = T::zero();
    for cell in 0..atlas.n_cells() {
        let u = atlas.cell(cell);
        for x in 0..d {
            let df = eval_interaction(spec, x, view_first, u)?
                - eval_interaction(spec, x, view_second, u)?;
            let dm = first.cell(cell)[x] - second.cell(cell)[x];
            acc = acc + df * dm * atlas.weight(cell);
        }
    }
    Ok(acc)
}

/// Uniform simplex point per cell via normalized exponentials.
fn random_densities<T: Real>(
    rng: &mut impl Rng,
    d: usize,
    n_cells: usize,
) -> CellDensities<T> {
    let mut values = Vec::with_capacity(d * n_cells);
    for _ in 0..n_cells {
        let mut total = T::zero();
        let start = values.len();
        for _ in 0..d {
            let u: f64 = rng.random();
            let e = -T::of(u.max(f64::MIN_POSITIVE)).ln();
            values.push(e);
            total = total + e;
        }
        for v in &mut values[start..] {
            *v = *v / total;
        }
    }
    CellDensities::new(d, values).expect("random densities are well-formed")
}
