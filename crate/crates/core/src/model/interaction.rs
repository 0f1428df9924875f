//! Interaction functionals `F` and `G`: position-weighted couplings of a
//! player's state to the joint (position, state) distribution of the rest
//! of the population.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::KernelMatrix;
use crate::model::measure::{CellDensities, DiscreteMeasure, MeasureView};
use crate::model::space::PositionAtlas;
use crate::scalar::Real;

/// Position-pair weight `K(u, v)` on `[0, 1]^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFn<T> {
    Constant(T),
    /// `K(u, v) = (u + v) / 2`.
    MeanPosition,
    /// `K(u, v) = u * v`.
    Product,
    /// `K(u, v) = exp(-((u - v) / width)^2)`.
    Gaussian { width: T },
    /// Step kernel constant on the cells of a uniform grid; this is how a
    /// sampled adjacency matrix enters a finite-player cost.
    Step(KernelMatrix<T>),
}

impl<T: Real> KernelFn<T> {
    pub fn eval(&self, u: T, v: T) -> T {
        match self {
            KernelFn::Constant(c) => *c,
            KernelFn::MeanPosition => (u + v) * T::of(0.5),
            KernelFn::Product => u * v,
            KernelFn::Gaussian { width } => {
                let z = (u - v) / *width;
                (-z * z).exp()
            }
            KernelFn::Step(m) => m.eval_step(u, v),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelFn::Constant(c) if !c.is_finite() => {
                Err(Error::InvalidInput("kernel constant is not finite".into()))
            }
            KernelFn::Gaussian { width } if !(*width > T::zero()) => Err(Error::InvalidInput(
                "gaussian kernel width must be positive".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// State-side nonlinearity `f(x, q)` of a low-resolution interaction,
/// applied to the locally smoothed state distribution `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowResField<T> {
    /// `f(x, q) = q_x`: the smoothed share of the player's own state.
    OwnShare,
    /// `f(x, q) = q_x^2`.
    OwnShareSquared,
    /// `f(x, q) = sum_y weights[x][y] * q_y`.
    Linear { weights: Vec<Vec<T>> },
}

impl<T: Real> LowResField<T> {
    pub fn eval(&self, x: usize, q: &[T]) -> T {
        match self {
            LowResField::OwnShare => q[x],
            LowResField::OwnShareSquared => q[x] * q[x],
            LowResField::Linear { weights } => {
                let mut acc = T::zero();
                for (y, &qy) in q.iter().enumerate() {
                    acc = acc + weights[x][y] * qy;
                }
                acc
            }
        }
    }
}

/// Declarative description of an interaction functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InteractionSpec<T> {
    /// No interaction.
    Zero,
    /// Pair interaction `F(x, m, u) = int K(u, v) f(x, y) m(dv, dy)` with
    /// `f(x, y) = coupling[x][y]`.
    TwoBody {
        kernel: KernelFn<T>,
        coupling: Vec<Vec<T>>,
    },
    /// Interaction through a locally smoothed state field:
    /// `F(x, m, u) = int K(u, v) f(x, m^phi(v)) m2(dv)` where `m^phi(v)`
    /// averages the state distribution around `v` with weights `phi(v, .)`.
    LowRes {
        kernel: KernelFn<T>,
        field: LowResField<T>,
        smoothing: KernelFn<T>,
    },
    /// Own-density coupling `F(x, m, u) = coeff * m_x(u)`; the canonical
    /// monotone (`coeff > 0`) local interaction.
    Local { coeff: T },
}

/// Smoothing denominators below this are treated as violations of the
/// positivity requirement on `phi`.
const SMOOTHING_FLOOR: f64 = 1e-14;

impl<T: Real> InteractionSpec<T> {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            InteractionSpec::Zero | InteractionSpec::Local { .. } => Ok(()),
            InteractionSpec::TwoBody { kernel, coupling } => {
                kernel.validate()?;
                if coupling.len() != d || coupling.iter().any(|row| row.len() != d) {
                    return Err(Error::InvalidInput(format!(
                        "two-body coupling matrix must be {d} x {d}"
                    )));
                }
                Ok(())
            }
            InteractionSpec::LowRes {
                kernel,
                field,
                smoothing,
            } => {
                kernel.validate()?;
                smoothing.validate()?;
                if let LowResField::Linear { weights } = field {
                    if weights.len() != d || weights.iter().any(|row| row.len() != d) {
                        return Err(Error::InvalidInput(format!(
                            "low-res linear field weights must be {d} x {d}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Whether `m -> F(x, m, u)` is linear; decides if the exact deviation
    /// value is available on the finite-player side.
    pub fn is_linear_in_measure(&self) -> bool {
        matches!(
            self,
            InteractionSpec::Zero | InteractionSpec::TwoBody { .. } | InteractionSpec::Local { .. }
        )
    }
}

/// Evaluates `F(x, m, u)` for either representation of the measure.
pub fn eval_interaction<T: Real>(
    spec: &InteractionSpec<T>,
    x: usize,
    m: MeasureView<'_, T>,
    u: T,
) -> Result<T> {
    match spec {
        InteractionSpec::Zero => Ok(T::zero()),
        InteractionSpec::Local { coeff } => match m {
            MeasureView::Cells { atlas, densities } => {
                let k = atlas.nearest_cell(u);
                Ok(*coeff * densities.cell(k)[x])
            }
            MeasureView::Atoms(_) => Err(Error::LocalNeedsAtlas),
        },
        InteractionSpec::TwoBody { kernel, coupling } => match m {
            MeasureView::Atoms(measure) => {
                let mut acc = T::zero();
                for a in measure.atoms() {
                    acc = acc + kernel.eval(u, a.position) * coupling[x][a.state] * a.mass;
                }
                Ok(acc)
            }
            MeasureView::Cells { atlas, densities } => {
                let mut acc = T::zero();
                for k in 0..atlas.n_cells() {
                    let kw = kernel.eval(u, atlas.cell(k)) * atlas.weight(k);
                    let cell = densities.cell(k);
                    let mut inner = T::zero();
                    for (y, &my) in cell.iter().enumerate() {
                        inner = inner + coupling[x][y] * my;
                    }
                    acc = acc + kw * inner;
                }
                Ok(acc)
            }
        },
        InteractionSpec::LowRes {
            kernel,
            field,
            smoothing,
        } => match m {
            MeasureView::Cells { atlas, densities } => {
                let d = densities.d();
                let mut acc = T::zero();
                let mut q = vec![T::zero(); d];
                for j in 0..atlas.n_cells() {
                    let v = atlas.cell(j);
                    smoothed_field_cells(smoothing, atlas, densities, v, &mut q)?;
                    acc = acc + kernel.eval(u, v) * field.eval(x, &q) * atlas.weight(j);
                }
                Ok(acc)
            }
            MeasureView::Atoms(measure) => {
                let d = 1 + measure.atoms().iter().map(|a| a.state).max().unwrap_or(0);
                let mut acc = T::zero();
                let mut q = vec![T::zero(); d];
                for a in measure.atoms() {
                    smoothed_field_atoms(smoothing, measure, a.position, &mut q)?;
                    acc = acc + kernel.eval(u, a.position) * field.eval(x, &q) * a.mass;
                }
                Ok(acc)
            }
        },
    }
}

fn smoothed_field_cells<T: Real>(
    smoothing: &KernelFn<T>,
    atlas: &PositionAtlas<T>,
    densities: &CellDensities<T>,
    v: T,
    out: &mut [T],
) -> Result<()> {
    out.iter_mut().for_each(|o| *o = T::zero());
    let mut denom = T::zero();
    for w in 0..atlas.n_cells() {
        let phi = smoothing.eval(v, atlas.cell(w)) * atlas.weight(w);
        denom = denom + phi;
        for (y, o) in out.iter_mut().enumerate() {
            *o = *o + phi * densities.cell(w)[y];
        }
    }
    if denom < T::of(SMOOTHING_FLOOR) {
        return Err(Error::SmoothingDenominator {
            position: v.as_f64(),
            value: denom.as_f64(),
        });
    }
    out.iter_mut().for_each(|o| *o = *o / denom);
    Ok(())
}

fn smoothed_field_atoms<T: Real>(
    smoothing: &KernelFn<T>,
    measure: &DiscreteMeasure<T>,
    v: T,
    out: &mut [T],
) -> Result<()> {
    out.iter_mut().for_each(|o| *o = T::zero());
    let mut denom = T::zero();
    for a in measure.atoms() {
        let phi = smoothing.eval(v, a.position) * a.mass;
        denom = denom + phi;
        out[a.state] = out[a.state] + phi;
    }
    if denom < T::of(SMOOTHING_FLOOR) {
        return Err(Error::SmoothingDenominator {
            position: v.as_f64(),
            value: denom.as_f64(),
        });
    }
    out.iter_mut().for_each(|o| *o = *o / denom);
    Ok(())
}

/// Bins a discrete measure onto atlas cells by nearest-cell lookup and
/// converts masses to conditional densities; needed to evaluate local
/// interactions on finite-player empirical measures.
pub fn bin_to_cells<T: Real>(
    measure: &DiscreteMeasure<T>,
    atlas: &PositionAtlas<T>,
    d: usize,
) -> Result<CellDensities<T>> {
    let mut values = vec![T::zero(); atlas.n_cells() * d];
    for a in measure.atoms() {
        let k = atlas.nearest_cell(a.position);
        if a.state >= d {
            return Err(Error::InvalidInput(format!(
                "atom state {} outside state space of size {d}",
                a.state
            )));
        }
        let w = atlas.weight(k);
        if !(w > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "mass binned to zero-weight cell {k}"
            )));
        }
        values[k * d + a.state] = values[k * d + a.state] + a.mass / w;
    }
    CellDensities::new(d, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::measure::Atom;
    use approx::assert_abs_diff_eq;

    fn identity_coupling(d: usize) -> Vec<Vec<f64>> {
        (0..d)
            .map(|x| (0..d).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn zero_spec_returns_zero() {
        let atlas = PositionAtlas::<f64>::single();
        let densities = CellDensities::uniform(3, 1);
        let view = MeasureView::Cells {
            atlas: &atlas,
            densities: &densities,
        };
        assert_eq!(
            eval_interaction(&InteractionSpec::Zero, 1, view, 0.3).unwrap(),
            0.0
        );
    }

    #[test]
    fn two_body_same_state_share_single_cell() {
        let spec = InteractionSpec::TwoBody {
            kernel: KernelFn::Constant(1.0),
            coupling: identity_coupling(2),
        };
        let atlas = PositionAtlas::<f64>::single();
        let densities = CellDensities::new(2, vec![0.5, 0.5]).unwrap();
        let view = MeasureView::Cells {
            atlas: &atlas,
            densities: &densities,
        };
        assert_abs_diff_eq!(eval_interaction(&spec, 0, view, 0.5).unwrap(), 0.5);

        // Same measure as atoms; direct summation oracle over atoms.
        let m = DiscreteMeasure::new(vec![
            Atom { position: 0.5, state: 0, mass: 0.5 },
            Atom { position: 0.5, state: 1, mass: 0.5 },
        ])
        .unwrap();
        let oracle: f64 = m
            .atoms()
            .iter()
            .map(|a| 1.0 * if a.state == 0 { 1.0 } else { 0.0 } * a.mass)
            .sum();
        assert_abs_diff_eq!(
            eval_interaction(&spec, 0, MeasureView::Atoms(&m), 0.5).unwrap(),
            oracle
        );
    }

    #[test]
    fn null_kernel_kills_interaction() {
        let spec = InteractionSpec::TwoBody {
            kernel: KernelFn::Constant(0.0),
            coupling: vec![vec![3.0, -1.0], vec![2.0, 5.0]],
        };
        let m = DiscreteMeasure::new(vec![Atom { position: 0.2, state: 1, mass: 1.0 }]).unwrap();
        assert_eq!(
            eval_interaction(&spec, 0, MeasureView::Atoms(&m), 0.9).unwrap(),
            0.0
        );
    }

    #[test]
    fn atom_and_cell_views_agree_when_atoms_sit_on_cells() {
        let atlas = PositionAtlas::new(vec![0.25, 0.75], vec![0.5, 0.5]).unwrap();
        let densities = CellDensities::new(2, vec![0.3, 0.7, 0.9, 0.1]).unwrap();
        let spec = InteractionSpec::TwoBody {
            kernel: KernelFn::MeanPosition,
            coupling: vec![vec![1.0, 2.0], vec![0.5, -1.0]],
        };
        // Atoms replicating the weighted cell densities.
        let m = DiscreteMeasure::new(vec![
            Atom { position: 0.25, state: 0, mass: 0.15 },
            Atom { position: 0.25, state: 1, mass: 0.35 },
            Atom { position: 0.75, state: 0, mass: 0.45 },
            Atom { position: 0.75, state: 1, mass: 0.05 },
        ])
        .unwrap();
        for x in 0..2 {
            let via_cells = eval_interaction(
                &spec,
                x,
                MeasureView::Cells { atlas: &atlas, densities: &densities },
                0.4,
            )
            .unwrap();
            let via_atoms =
                eval_interaction(&spec, x, MeasureView::Atoms(&m), 0.4).unwrap();
            assert_abs_diff_eq!(via_cells, via_atoms, epsilon = 1e-14);
        }
    }

    #[test]
    fn local_reads_own_density_at_nearest_cell() {
        let atlas = PositionAtlas::new(vec![0.25, 0.75], vec![0.5, 0.5]).unwrap();
        let densities = CellDensities::new(2, vec![0.3, 0.7, 0.9, 0.1]).unwrap();
        let spec = InteractionSpec::Local { coeff: 2.0 };
        let view = MeasureView::Cells { atlas: &atlas, densities: &densities };
        assert_abs_diff_eq!(eval_interaction(&spec, 1, view, 0.2).unwrap(), 1.4);
        assert_abs_diff_eq!(eval_interaction(&spec, 0, view, 0.8).unwrap(), 1.8);
        let m = DiscreteMeasure::new(vec![Atom { position: 0.2, state: 0, mass: 1.0 }]).unwrap();
        assert!(eval_interaction(&spec, 0, MeasureView::Atoms(&m), 0.2).is_err());
    }

    #[test]
    fn low_res_uniform_smoothing_reduces_to_averages() {
        // With phi constant the smoothed field is the global state
        // distribution, so OwnShare gives sum_v K(u,v) m_x_bar mu(v).
        let atlas = PositionAtlas::new(vec![0.25, 0.75], vec![0.5, 0.5]).unwrap();
        let densities = CellDensities::new(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let spec = InteractionSpec::LowRes {
            kernel: KernelFn::Constant(1.0),
            field: LowResField::OwnShare,
            smoothing: KernelFn::Constant(1.0),
        };
        let view = MeasureView::Cells { atlas: &atlas, densities: &densities };
        let got = eval_interaction(&spec, 0, view, 0.5).unwrap();
        assert_abs_diff_eq!(got, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn low_res_zero_smoothing_is_an_error() {
        let atlas = PositionAtlas::<f64>::single();
        let densities = CellDensities::uniform(2, 1);
        let spec = InteractionSpec::LowRes {
            kernel: KernelFn::Constant(1.0),
            field: LowResField::OwnShare,
            smoothing: KernelFn::Constant(0.0),
        };
        let view = MeasureView::Cells { atlas: &atlas, densities: &densities };
        assert!(matches!(
            eval_interaction(&spec, 0, view, 0.5),
            Err(Error::SmoothingDenominator { .. })
        ));
    }

    #[test]
    fn binning_respects_nearest_cell_and_weights() {
        let atlas = PositionAtlas::new(vec![0.25, 0.75], vec![0.5, 0.5]).unwrap();
        let m = DiscreteMeasure::new(vec![
            Atom { position: 0.1, state: 0, mass: 0.5 },
            Atom { position: 0.9, state: 1, mass: 0.5 },
        ])
        .unwrap();
        let binned = bin_to_cells(&m, &atlas, 2).unwrap();
        assert_eq!(binned.cell(0), &[1.0, 0.0]);
        assert_eq!(binned.cell(1), &[0.0, 1.0]);
    }

    #[test]
    fn spec_validation_checks_shapes() {
        let bad = InteractionSpec::TwoBody {
            kernel: KernelFn::Constant(1.0),
            coupling: vec![vec![1.0]],
        };
        assert!(bad.validate(2).is_err());
        let bad_width = InteractionSpec::LowRes {
            kernel: KernelFn::Constant(1.0),
            field: LowResField::OwnShare,
            smoothing: KernelFn::Gaussian { width: 0.0 },
        };
        assert!(bad_width.validate(2).is_err());
    }

    #[test]
    fn interaction_spec_serde_round_trip() {
        let spec = InteractionSpec::TwoBody {
            kernel: KernelFn::MeanPosition,
            coupling: identity_coupling(2),
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: InteractionSpec<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }
}
