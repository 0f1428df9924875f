//! Per-player feedback tables from an equilibrium policy.

use crate::error::{Error, Result};
use crate::model::{PlayerLayout, Policy, PositionAtlas};
use crate::scalar::Real;

/// The equilibrium policy restricted to the players: each player reads the
/// rate table of the atlas cell nearest to her position (no interpolation,
/// so rates always stay in the feasible set).
#[derive(Debug, Clone)]
pub struct PlayerFeedback<T> {
    policy: Policy<T>,
    cells: Vec<usize>,
}

pub fn build_player_feedback<T: Real>(
    policy: &Policy<T>,
    atlas: &PositionAtlas<T>,
    layout: &PlayerLayout<T>,
) -> Result<PlayerFeedback<T>> {
    if atlas.n_cells() == 0 {
        return Err(Error::EmptyAtlas);
    }
    if policy.n_cells() != atlas.n_cells() {
        return Err(Error::GridMismatch(format!(
            "policy covers {} cells, atlas has {}",
            policy.n_cells(),
            atlas.n_cells()
        )));
    }
    let cells = layout
        .positions()
        .iter()
        .map(|&u| atlas.nearest_cell(u))
        .collect();
    Ok(PlayerFeedback {
        policy: policy.clone(),
        cells,
    })
}

impl<T: Real> PlayerFeedback<T> {
    pub fn n_players(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_of(&self, player: usize) -> usize {
        self.cells[player]
    }

    /// Jump rates of `player` out of `state` during time slab `t_idx`.
    pub fn rates(&self, player: usize, t_idx: usize, state: usize) -> &[T] {
        self.policy.rates_from(t_idx, self.cells[player], state)
    }

    pub fn rate_cap(&self) -> T {
        self.policy.rate_cap()
    }

    pub fn policy(&self) -> &Policy<T> {
        &self.policy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn players_map_to_nearest_cells() {
        let atlas = PositionAtlas::new(vec![0.25, 0.75], vec![0.5, 0.5]).unwrap();
        let mut policy = Policy::zeros(2, 2, 2, 1e3);
        policy.set_row_clamped(0, 0, 0, &[0.0, 1.0]);
        policy.set_row_clamped(0, 1, 0, &[0.0, 2.0]);
        let layout = PlayerLayout::new(vec![0.1, 0.6, 0.74]).unwrap();
        let fb = build_player_feedback(&policy, &atlas, &layout).unwrap();
        assert_eq!(fb.cell_of(0), 0);
        assert_eq!(fb.cell_of(1), 1);
        assert_eq!(fb.cell_of(2), 1);
        assert_eq!(fb.rates(0, 0, 0), &[0.0, 1.0]);
        assert_eq!(fb.rates(1, 0, 0), &[0.0, 2.0]);
        // Two players sharing a nearest cell read identical tables.
        assert_eq!(fb.rates(1, 0, 0), fb.rates(2, 0, 0));
    }

    #[test]
    fn zero_policy_means_zero_player_rates() {
        let atlas = PositionAtlas::<f64>::single();
        let policy = Policy::zeros(3, 1, 2, 1e3);
        let layout = PlayerLayout::grid(4).unwrap();
        let fb = build_player_feedback(&policy, &atlas, &layout).unwrap();
        for i in 0..4 {
            for t in 0..3 {
                for x in 0..2 {
                    assert!(fb.rates(i, t, x).iter().all(|&r| r == 0.0));
                }
            }
        }
    }

    #[test]
    fn cell_count_mismatch_is_an_error() {
        let atlas = PositionAtlas::<f64>::uniform(3).unwrap();
        let policy = Policy::zeros(2, 2, 2, 1e3);
        let layout = PlayerLayout::grid(2).unwrap();
        assert!(build_player_feedback(&policy, &atlas, &layout).is_err());
    }
}
