//! Coordinate reductions used to place coverings and answer membership
//! queries on systems too large for a full-state grid.
//!
//! The racing slab keeps every coordinate the target and constraint margins
//! read — relative positions, planar relative velocities, ego corridor
//! position and gate distance — and anchors the remaining velocity
//! coordinates to declared slab values when a reduced point is embedded back
//! into the full space.

use crate::systems::{racing_idx, State};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Anchor values for the coordinates the racing slab does not track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RacingAnchors {
    /// Ego lateral velocity (m/s).
    pub ego_vx: f64,
    /// Ego racing-axis velocity (m/s).
    pub ego_vy: f64,
    /// Ego vertical velocity (m/s).
    pub ego_vz: f64,
    /// Ego-minus-opponent vertical velocity (m/s).
    pub rel_vz: f64,
}

impl Default for RacingAnchors {
    fn default() -> Self {
        Self {
            ego_vx: 0.0,
            ego_vy: 1.0,
            ego_vz: 0.0,
            rel_vz: 0.0,
        }
    }
}

/// Map between full states and the coordinates a covering is built over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Reduction {
    /// Covering and membership operate on the full state.
    Identity,
    /// 12-D joint racing state projected to 8 slab coordinates:
    /// `[dpx, dpy, dpz, dvx, dvy, ego_px, ego_py, ego_pz]` (ego minus opponent).
    RacingSlab { anchors: RacingAnchors },
}

impl Reduction {
    pub fn reduced_dim(&self, full_dim: usize) -> usize {
        match self {
            Reduction::Identity => full_dim,
            Reduction::RacingSlab { .. } => 8,
        }
    }

    /// Project a full state to reduced coordinates.
    pub fn reduce(&self, x: &State) -> State {
        match self {
            Reduction::Identity => x.clone(),
            Reduction::RacingSlab { .. } => {
                let e = racing_idx::EGO;
                let o = racing_idx::OPP;
                DVector::from_vec(vec![
                    x[e + racing_idx::PX] - x[o + racing_idx::PX],
                    x[e + racing_idx::PY] - x[o + racing_idx::PY],
                    x[e + racing_idx::PZ] - x[o + racing_idx::PZ],
                    x[e + racing_idx::VX] - x[o + racing_idx::VX],
                    x[e + racing_idx::VY] - x[o + racing_idx::VY],
                    x[e + racing_idx::PX],
                    x[e + racing_idx::PY],
                    x[e + racing_idx::PZ],
                ])
            }
        }
    }

    /// The coordinates dropped by [`Reduction::reduce`], as supplied by an
    /// embedding reference: empty for the identity, the ego velocity vector
    /// plus the relative vertical velocity for the racing slab. Local
    /// certificates are invalidated when these drift.
    pub fn untracked(&self, x: &State) -> State {
        match self {
            Reduction::Identity => DVector::zeros(0),
            Reduction::RacingSlab { .. } => DVector::from_vec(vec![
                x[racing_idx::EGO + racing_idx::VX],
                x[racing_idx::EGO + racing_idx::VY],
                x[racing_idx::EGO + racing_idx::VZ],
                x[racing_idx::EGO + racing_idx::VZ] - x[racing_idx::OPP + racing_idx::VZ],
            ]),
        }
    }

    /// Reconstruct a full state from reduced coordinates. Untracked
    /// coordinates come from `reference` when given (a nearby live state),
    /// otherwise from the configured anchors.
    pub fn embed(&self, rho: &State, reference: Option<&State>) -> State {
        match self {
            Reduction::Identity => rho.clone(),
            Reduction::RacingSlab { anchors } => {
                let (ego_vx, ego_vy, ego_vz, rel_vz) = match reference {
                    Some(r) => (
                        r[racing_idx::EGO + racing_idx::VX],
                        r[racing_idx::EGO + racing_idx::VY],
                        r[racing_idx::EGO + racing_idx::VZ],
                        r[racing_idx::EGO + racing_idx::VZ] - r[racing_idx::OPP + racing_idx::VZ],
                    ),
                    None => (anchors.ego_vx, anchors.ego_vy, anchors.ego_vz, anchors.rel_vz),
                };
                let (dpx, dpy, dpz) = (rho[0], rho[1], rho[2]);
                let (dvx, dvy) = (rho[3], rho[4]);
                let (ego_px, ego_py, ego_pz) = (rho[5], rho[6], rho[7]);
                let mut x = DVector::zeros(12);
                let e = racing_idx::EGO;
                let o = racing_idx::OPP;
                x[e + racing_idx::PX] = ego_px;
                x[e + racing_idx::VX] = ego_vx;
                x[e + racing_idx::PY] = ego_py;
                x[e + racing_idx::VY] = ego_vy;
                x[e + racing_idx::PZ] = ego_pz;
                x[e + racing_idx::VZ] = ego_vz;
                x[o + racing_idx::PX] = ego_px - dpx;
                x[o + racing_idx::VX] = ego_vx - dvx;
                x[o + racing_idx::PY] = ego_py - dpy;
                x[o + racing_idx::VY] = ego_vy - dvy;
                x[o + racing_idx::PZ] = ego_pz - dpz;
                x[o + racing_idx::VZ] = ego_vz - rel_vz;
                x
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{racing_constraint, racing_reward, RacingSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_round_trip() {
        let red = Reduction::Identity;
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(red.reduce(&x), x);
        assert_eq!(red.embed(&x, None), x);
        assert_eq!(red.reduced_dim(2), 2);
    }

    #[test]
    fn racing_embed_then_reduce_is_identity_on_slab_coordinates() {
        let red = Reduction::RacingSlab {
            anchors: RacingAnchors::default(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let rho = DVector::from_fn(8, |_, _| rng.random_range(-2.0..2.0));
            let full = red.embed(&rho, None);
            let back = red.reduce(&full);
            assert!((back - &rho).norm() < 1e-12);
        }
    }

    #[test]
    fn margins_do_not_depend_on_the_embedding_reference() {
        // Every coordinate the reward and constraint read is tracked, so the
        // margins of an embedded point are reference-independent.
        let red = Reduction::RacingSlab {
            anchors: RacingAnchors::default(),
        };
        let spec = RacingSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let rho = DVector::from_fn(8, |_, _| rng.random_range(-1.5..1.5));
            let ref_state = DVector::from_fn(12, |_, _| rng.random_range(-2.0..2.0));
            let a = red.embed(&rho, None);
            let b = red.embed(&rho, Some(&ref_state));
            assert!(
                (racing_reward(&spec, &a).unwrap() - racing_reward(&spec, &b).unwrap()).abs()
                    < 1e-12
            );
            assert!(
                (racing_constraint(&spec, &a).unwrap() - racing_constraint(&spec, &b).unwrap())
                    .abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn reduce_of_a_live_state_reflects_relative_coordinates() {
        let red = Reduction::RacingSlab {
            anchors: RacingAnchors::default(),
        };
        let mut x = DVector::zeros(12);
        x[racing_idx::EGO + racing_idx::PY] = -1.0;
        x[racing_idx::OPP + racing_idx::PY] = -1.6;
        x[racing_idx::EGO + racing_idx::VY] = 1.2;
        x[racing_idx::OPP + racing_idx::VY] = 0.9;
        let rho = red.reduce(&x);
        assert!((rho[1] - 0.6).abs() < 1e-12); // dpy
        assert!((rho[4] - 0.3).abs() < 1e-12); // dvy
        assert_eq!(rho[6], -1.0); // ego py
    }
}
