//! Reward/constraint functions with Lipschitz constants, the discounted
//! reach-avoid measure, and trajectory value evaluation.
//!
//! Both benchmark families express reward and constraint as the minimum of
//! signed margins, so each is positive exactly when its set condition holds
//! and carries an analytically computable Lipschitz constant.

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::systems::{racing_idx, State, Trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub type ScalarField = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// Reward, constraint, their Lipschitz constants, and the discount factor.
#[derive(Clone)]
pub struct RewardConstraintSpec {
    pub reward: ScalarField,
    pub constraint: ScalarField,
    pub l_r: f64,
    pub l_c: f64,
    pub gamma: f64,
}

impl fmt::Debug for RewardConstraintSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RewardConstraintSpec")
            .field("l_r", &self.l_r)
            .field("l_c", &self.l_c)
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl RewardConstraintSpec {
    pub fn new(reward: ScalarField, constraint: ScalarField, l_r: f64, l_c: f64, gamma: f64) -> Result<Self> {
        if !(l_r >= 0.0 && l_c >= 0.0) {
            return Err(Error::InvalidParameter(
                "Lipschitz constants must be nonnegative".into(),
            ));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter("gamma must lie in (0, 1)".into()));
        }
        Ok(Self {
            reward,
            constraint,
            l_r,
            l_c,
            gamma,
        })
    }

    pub fn reward_at(&self, x: &State) -> f64 {
        (self.reward)(x)
    }

    pub fn constraint_at(&self, x: &State) -> f64 {
        (self.constraint)(x)
    }
}

/// Discounted reach-avoid measure of a trajectory prefix:
/// `min(gamma^t * r(x_t), min_{tau <= t} gamma^tau * c(x_tau))`.
///
/// Strictly positive iff the trajectory is in the target at step `t` without
/// any earlier (discount-weighted) constraint violation.
pub fn ra_measure(spec: &RewardConstraintSpec, traj: &Trajectory, t: usize) -> Result<f64> {
    if t >= traj.states.len() {
        return Err(Error::Contract(format!(
            "step {t} out of range for trajectory with {} states",
            traj.states.len()
        )));
    }
    let mut worst_c = f64::INFINITY;
    let mut discount = 1.0;
    for state in traj.states.iter().take(t + 1) {
        worst_c = worst_c.min(discount * spec.constraint_at(state));
        discount *= spec.gamma;
    }
    let reward_term = spec.gamma.powi(t as i32) * spec.reward_at(&traj.states[t]);
    Ok(reward_term.min(worst_c))
}

/// Best reach-avoid measure over all prefixes; positive iff a safe reach
/// occurs somewhere along the trajectory.
pub fn rollout_value(spec: &RewardConstraintSpec, traj: &Trajectory) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut worst_c = f64::INFINITY;
    let mut discount = 1.0;
    for state in &traj.states {
        worst_c = worst_c.min(discount * spec.constraint_at(state));
        let g = (discount * spec.reward_at(state)).min(worst_c);
        best = best.max(g);
        discount *= spec.gamma;
    }
    best
}

// ---------------------------------------------------------------------------
// Racing target set and safety constraints
// ---------------------------------------------------------------------------

/// Geometry of the racing target set and safety constraints, plus the bounded
/// operating box over which the (quadratic) downwash margin is Lipschitz.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RacingSpec {
    /// Half-width of the gate corridor on the x and z axes (m).
    pub corridor_half_width: f64,
    /// Slack of the gate-wall constraints (m).
    pub wall_margin: f64,
    /// Base scale of the squared downwash exclusion radius (m^2).
    pub downwash_scale: f64,
    /// Required ego-minus-opponent position lead along the racing axis (m).
    pub position_lead: f64,
    /// Required ego-minus-opponent velocity lead along the racing axis (m/s).
    pub velocity_lead: f64,
    /// Physical gate width (m); informational, not part of the reward.
    pub gate_width: f64,
    /// Physical gate height (m); informational, not part of the reward.
    pub gate_height: f64,
    /// Largest ego/opponent planar separation in the operating box (m);
    /// bounds the Lipschitz constant of the quadratic downwash margin.
    pub max_planar_separation: f64,
    /// Margins are capped at this value before aggregation. Sign semantics
    /// are untouched; the cap keeps the constraint's Lipschitz constant
    /// commensurate with the near-boundary region instead of the whole box.
    pub margin_cap: f64,
    /// Largest opponent-above-ego height in the operating box (m).
    pub max_height_delta: f64,
}

impl Default for RacingSpec {
    fn default() -> Self {
        Self {
            corridor_half_width: 0.3,
            wall_margin: 0.05,
            downwash_scale: 0.2,
            position_lead: 0.0,
            velocity_lead: 0.0,
            gate_width: 0.6,
            gate_height: 0.6,
            max_planar_separation: 1.5,
            margin_cap: 0.8,
            max_height_delta: 0.6,
        }
    }
}

fn check_joint(x: &State) -> Result<()> {
    if x.len() != 12 {
        return Err(Error::Contract(format!(
            "racing margins need a 12-dimensional joint state, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Minimum of the four target-set margins: position lead, velocity lead, and
/// the two corridor margins. Positive iff the joint state is in the target set.
pub fn racing_reward(spec: &RacingSpec, x: &State) -> Result<f64> {
    check_joint(x)?;
    let e = racing_idx::EGO;
    let o = racing_idx::OPP;
    let lead = x[e + racing_idx::PY] - x[o + racing_idx::PY] - spec.position_lead;
    let speed_lead = x[e + racing_idx::VY] - x[o + racing_idx::VY] - spec.velocity_lead;
    let corridor_x = spec.corridor_half_width - x[e + racing_idx::PX].abs();
    let corridor_z = spec.corridor_half_width - x[e + racing_idx::PZ].abs();
    Ok(lead.min(speed_lead).min(corridor_x).min(corridor_z))
}

/// Downwash separation margin: squared planar distance minus the exclusion
/// radius, which grows when the opponent flies above the ego.
pub fn downwash_margin(spec: &RacingSpec, x: &State) -> Result<f64> {
    check_joint(x)?;
    let e = racing_idx::EGO;
    let o = racing_idx::OPP;
    let dx = x[e + racing_idx::PX] - x[o + racing_idx::PX];
    let dy = x[e + racing_idx::PY] - x[o + racing_idx::PY];
    let dz_above = (x[o + racing_idx::PZ] - x[e + racing_idx::PZ]).max(0.0);
    Ok(dx * dx + dy * dy - (1.0 + dz_above) * spec.downwash_scale)
}

/// The four gate-wall margins `+-p_x - p_y + margin` and `+-p_z - p_y + margin`.
pub fn wall_margins(spec: &RacingSpec, x: &State) -> Result<[f64; 4]> {
    check_joint(x)?;
    let px = x[racing_idx::EGO + racing_idx::PX];
    let py = x[racing_idx::EGO + racing_idx::PY];
    let pz = x[racing_idx::EGO + racing_idx::PZ];
    let m = spec.wall_margin;
    Ok([px - py + m, -px - py + m, pz - py + m, -pz - py + m])
}

/// Minimum of the (capped) downwash margin and the four gate-wall margins.
/// Positive iff every safety constraint strictly holds: the cap never changes
/// the sign, only the depth of comfortable margins.
pub fn racing_constraint(spec: &RacingSpec, x: &State) -> Result<f64> {
    let dw = downwash_margin(spec, x)?;
    let walls = wall_margins(spec, x)?;
    Ok(walls
        .iter()
        .fold(dw, |acc, &w| acc.min(w))
        .min(spec.margin_cap))
}

/// Analytic Lipschitz bound of the racing reward (Euclidean norm, 12-D state).
///
/// Lead margins have gradient norm sqrt(2); corridor margins have norm 1.
pub fn racing_reward_lipschitz() -> f64 {
    2.0_f64.sqrt()
}

/// Analytic Lipschitz bound of the racing constraint over the operating box.
///
/// The quadratic downwash margin has gradient norm `sqrt(8 d^2 + 2 s^2)` at
/// planar separation `d`; thanks to the margin cap only separations up to
/// `d_cap = sqrt(cap + (1 + dz_max) * s)` matter (beyond that the capped
/// margin is constant). The wall margins contribute sqrt(2).
pub fn racing_constraint_lipschitz(spec: &RacingSpec) -> f64 {
    let s = spec.downwash_scale;
    let d_cap = (spec.margin_cap + (1.0 + spec.max_height_delta) * s).sqrt();
    let d = d_cap.min(spec.max_planar_separation);
    (8.0 * d * d + 2.0 * s * s).sqrt().max(2.0_f64.sqrt())
}

/// Bundle the racing margins into a measure spec with analytic constants.
pub fn racing_measure_spec(spec: &RacingSpec, gamma: f64) -> Result<RewardConstraintSpec> {
    let s1 = spec.clone();
    let s2 = spec.clone();
    RewardConstraintSpec::new(
        Arc::new(move |x| racing_reward(&s1, x).expect("12-D joint state")),
        Arc::new(move |x| racing_constraint(&s2, x).expect("12-D joint state")),
        racing_reward_lipschitz(),
        racing_constraint_lipschitz(spec),
        gamma,
    )
}

// ---------------------------------------------------------------------------
// Low-dimensional oracle benchmark
// ---------------------------------------------------------------------------

/// One-axis benchmark: target is a position band entered slowly, the obstacle
/// is a position interval. State is `(p, v)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowDimSpec {
    pub target_center: f64,
    pub target_half_width: f64,
    pub target_max_speed: f64,
    pub obstacle_center: f64,
    pub obstacle_half_width: f64,
}

impl Default for LowDimSpec {
    fn default() -> Self {
        Self {
            target_center: 1.5,
            target_half_width: 0.2,
            target_max_speed: 0.3,
            obstacle_center: 0.6,
            obstacle_half_width: 0.15,
        }
    }
}

pub fn lowdim_reward(spec: &LowDimSpec, x: &State) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::Contract(format!(
            "low-dim margins need a 2-dimensional state, got {}",
            x.len()
        )));
    }
    let band = spec.target_half_width - (x[0] - spec.target_center).abs();
    let slow = spec.target_max_speed - x[1].abs();
    Ok(band.min(slow))
}

pub fn lowdim_constraint(spec: &LowDimSpec, x: &State) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::Contract(format!(
            "low-dim margins need a 2-dimensional state, got {}",
            x.len()
        )));
    }
    Ok((x[0] - spec.obstacle_center).abs() - spec.obstacle_half_width)
}

/// Measure spec for the low-dim benchmark; both margins are 1-Lipschitz.
pub fn lowdim_measure_spec(spec: &LowDimSpec, gamma: f64) -> Result<RewardConstraintSpec> {
    let s1 = spec.clone();
    let s2 = spec.clone();
    RewardConstraintSpec::new(
        Arc::new(move |x| lowdim_reward(&s1, x).expect("2-D state")),
        Arc::new(move |x| lowdim_constraint(&s2, x).expect("2-D state")),
        1.0,
        1.0,
        gamma,
    )
}

// ---------------------------------------------------------------------------
// Sampled Lipschitz estimation (sanity check against the analytic constants)
// ---------------------------------------------------------------------------

/// Largest sampled difference quotient `|f(x)-f(y)| / |x-y|` over all pairs of
/// `samples` points drawn uniformly from `domain`. A lower bound on the true
/// constant; used as a regression check, never as the source of truth.
pub fn lipschitz_estimate(
    f: &dyn Fn(&State) -> f64,
    domain: &BoxDomain,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples < 2 {
        return Err(Error::InvalidParameter(
            "lipschitz_estimate needs at least 2 samples".into(),
        ));
    }
    if !domain.has_volume() {
        return Err(Error::DegenerateDomain(
            "lipschitz_estimate needs a domain with positive volume".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<State> = (0..samples).map(|_| domain.sample(&mut rng)).collect();
    let values: Vec<f64> = points.iter().map(|p| f(p)).collect();
    let mut best = 0.0_f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let dist = (&points[i] - &points[j]).norm();
            if dist > 0.0 {
                best = best.max((values[i] - values[j]).abs() / dist);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::Rng;

    fn const_spec(r: f64, c: f64, gamma: f64) -> RewardConstraintSpec {
        RewardConstraintSpec::new(Arc::new(move |_| r), Arc::new(move |_| c), 0.0, 0.0, gamma)
            .unwrap()
    }

    fn toy_traj(n: usize) -> Trajectory {
        Trajectory {
            states: (0..=n).map(|i| DVector::from_vec(vec![i as f64])).collect(),
            controls: vec![DVector::zeros(1); n],
            dt: 0.1,
        }
    }

    /// Per-state (reward, constraint) lookup keyed on the toy state value.
    fn table_spec(r: Vec<f64>, c: Vec<f64>, gamma: f64) -> RewardConstraintSpec {
        RewardConstraintSpec::new(
            Arc::new(move |x: &State| r[x[0] as usize]),
            Arc::new(move |x: &State| c[x[0] as usize]),
            0.0,
            0.0,
            gamma,
        )
        .unwrap()
    }

    #[test]
    fn measure_at_step_zero_collapses() {
        let spec = const_spec(1.0, 2.0, 0.9);
        let traj = toy_traj(3);
        assert_relative_eq!(ra_measure(&spec, &traj, 0).unwrap(), 1.0);
    }

    #[test]
    fn measure_at_step_zero_is_independent_of_gamma() {
        let traj = toy_traj(3);
        for gamma in [0.1, 0.5, 0.9, 0.999] {
            let spec = const_spec(0.7, 0.4, gamma);
            assert_relative_eq!(ra_measure(&spec, &traj, 0).unwrap(), 0.4);
        }
    }

    #[test]
    fn initial_violation_dominates_every_step() {
        let spec = table_spec(vec![5.0; 4], vec![-1.0, 9.0, 9.0, 9.0], 0.9);
        let traj = toy_traj(3);
        for t in 0..4 {
            assert!(ra_measure(&spec, &traj, t).unwrap() <= -1.0);
        }
    }

    #[test]
    fn measure_matches_direct_enumeration_on_hand_values() {
        let gamma = 0.9;
        let r = vec![-0.5, 0.3, 1.2, -0.1];
        let c = vec![0.8, 0.2, -0.4, 0.6];
        let spec = table_spec(r.clone(), c.clone(), gamma);
        let traj = toy_traj(3);
        for t in 0..4 {
            // Independent evaluation: explicit nested loops over the formula.
            let mut inner = f64::INFINITY;
            for (tau, &cv) in c.iter().enumerate().take(t + 1) {
                inner = inner.min(gamma.powi(tau as i32) * cv);
            }
            let expect = (gamma.powi(t as i32) * r[t]).min(inner);
            assert_relative_eq!(ra_measure(&spec, &traj, t).unwrap(), expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn measure_rejects_out_of_range_step() {
        let spec = const_spec(1.0, 1.0, 0.9);
        let traj = toy_traj(2);
        assert!(ra_measure(&spec, &traj, 3).is_err());
    }

    #[test]
    fn value_is_negative_when_target_never_entered() {
        let spec = const_spec(-0.3, 1.0, 0.9);
        assert!(rollout_value(&spec, &toy_traj(5)) < 0.0);
    }

    #[test]
    fn value_of_immediate_safe_reach() {
        let spec = const_spec(0.6, 0.9, 0.9);
        // Entered at t=0: value at least min(r, c) at t=0.
        assert_relative_eq!(rollout_value(&spec, &toy_traj(4)), 0.6, epsilon = 1e-14);
    }

    #[test]
    fn value_equals_brute_force_max_over_prefixes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..8usize);
            let r: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let spec = table_spec(r, c, 0.9);
            let traj = toy_traj(n);
            let brute = (0..=n)
                .map(|t| ra_measure(&spec, &traj, t).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            assert_relative_eq!(rollout_value(&spec, &traj), brute, epsilon = 1e-14);
        }
    }

    #[test]
    fn sign_characterization_matches_exhaustive_check() {
        // rollout_value > 0 iff there is a step t with r(x_t) > 0 and
        // c(x_tau) > 0 for all tau <= t.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let n = rng.random_range(1..6usize);
            let r: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let exists = (0..=n).any(|t| r[t] > 0.0 && c[..=t].iter().all(|&v| v > 0.0));
            let spec = table_spec(r, c, 0.9);
            assert_eq!(rollout_value(&spec, &toy_traj(n)) > 0.0, exists);
        }
    }

    fn joint_state(ego: [f64; 6], opp: [f64; 6]) -> State {
        let mut x = DVector::zeros(12);
        for i in 0..6 {
            x[i] = ego[i];
            x[6 + i] = opp[i];
        }
        x
    }

    #[test]
    fn racing_reward_margin_example() {
        let spec = RacingSpec::default();
        // Ego at the origin, leading the opponent by 0.5 m and 0.5 m/s.
        let x = joint_state(
            [0.0, 0.0, 0.0, 0.5, 0.0, 0.0],
            [0.0, 0.0, -0.5, 0.0, 0.0, 0.0],
        );
        assert_relative_eq!(racing_reward(&spec, &x).unwrap(), 0.3, epsilon = 1e-14);
    }

    #[test]
    fn downwash_margin_examples() {
        let spec = RacingSpec::default();
        // 0.5 m horizontal offset, same height: margin 0.25 - 0.2.
        let x = joint_state(
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
        );
        assert_relative_eq!(downwash_margin(&spec, &x).unwrap(), 0.05, epsilon = 1e-14);
        // Directly under the opponent at 0.4 m offset, 1 m below.
        let x = joint_state(
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.4, 0.0, 0.0, 0.0, 1.0, 0.0],
        );
        assert_relative_eq!(downwash_margin(&spec, &x).unwrap(), -0.24, epsilon = 1e-14);
    }

    #[test]
    fn racing_margins_reject_wrong_dimension() {
        let spec = RacingSpec::default();
        let x = DVector::zeros(6);
        assert!(racing_reward(&spec, &x).is_err());
        assert!(racing_constraint(&spec, &x).is_err());
    }

    #[test]
    fn reward_sign_characterizes_target_membership() {
        let spec = RacingSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5000 {
            let x = DVector::from_fn(12, |_, _| rng.random_range(-1.0f64..1.0));
            let in_target = {
                let lead = x[2] - x[8];
                let vlead = x[3] - x[9];
                lead > 0.0 && vlead > 0.0 && x[0].abs() < 0.3 && x[4].abs() < 0.3
            };
            assert_eq!(racing_reward(&spec, &x).unwrap() > 0.0, in_target);
        }
    }

    #[test]
    fn constraint_sign_characterizes_strict_feasibility() {
        let spec = RacingSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5000 {
            let x = DVector::from_fn(12, |_, _| rng.random_range(-1.0f64..1.0));
            let (dx, dy) = (x[0] - x[6], x[2] - x[8]);
            let dw = dx * dx + dy * dy > (1.0 + (x[10] - x[4]).max(0.0)) * 0.2;
            let walls = [x[0], -x[0], x[4], -x[4]]
                .iter()
                .all(|&s| s - x[2] > -0.05);
            assert_eq!(racing_constraint(&spec, &x).unwrap() > 0.0, dw && walls);
        }
    }

    /// Operating box used for the racing Lipschitz checks: both drones within
    /// a slab that keeps planar separation below `max_planar_separation`.
    fn racing_operating_box() -> BoxDomain {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for _ in 0..2 {
            // px, vx, py, vy, pz, vz per drone; planar coordinates within
            // +-0.5 so separations stay below sqrt(1^2 + 1^2) < 1.5.
            lo.extend_from_slice(&[-0.5, -2.0, -0.5, -2.0, -1.0, -2.0]);
            hi.extend_from_slice(&[0.5, 2.0, 0.5, 2.0, 1.0, 2.0]);
        }
        BoxDomain::new(lo, hi).unwrap()
    }

    #[test]
    fn racing_lipschitz_constants_hold_on_random_pairs() {
        let spec = RacingSpec::default();
        let l_r = racing_reward_lipschitz();
        let l_c = racing_constraint_lipschitz(&spec);
        let domain = racing_operating_box();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100_000 {
            let x = domain.sample(&mut rng);
            let y = domain.sample(&mut rng);
            let dist = (&x - &y).norm();
            let dr = (racing_reward(&spec, &x).unwrap() - racing_reward(&spec, &y).unwrap()).abs();
            let dc = (racing_constraint(&spec, &x).unwrap()
                - racing_constraint(&spec, &y).unwrap())
            .abs();
            assert!(dr <= l_r * dist + 1e-12);
            assert!(dc <= l_c * dist + 1e-12);
        }
    }

    #[test]
    fn lipschitz_estimate_of_a_coordinate_projection() {
        let domain = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let f = |x: &State| x[0];
        let est = lipschitz_estimate(&f, &domain, 400, 1).unwrap();
        assert!(est <= 1.0 + 1e-12);
        assert!(est > 0.9, "estimate {est} should approach 1");
    }

    #[test]
    fn lipschitz_estimate_of_a_constant_is_zero() {
        let domain = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        let f = |_: &State| 3.5;
        assert_eq!(lipschitz_estimate(&f, &domain, 100, 2).unwrap(), 0.0);
    }

    #[test]
    fn lipschitz_estimate_of_min_of_affine_margins() {
        // f = min(2x - y, 1 - x): bounded by the largest gradient row norm.
        let domain = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let f = |x: &State| (2.0 * x[0] - x[1]).min(1.0 - x[0]);
        let bound = (2.0_f64 * 2.0 + 1.0).sqrt(); // ||(2, -1)|| = sqrt(5)
        let est = lipschitz_estimate(&f, &domain, 600, 3).unwrap();
        assert!(est <= bound + 1e-12);
        assert!(est > 0.8 * bound);
    }

    #[test]
    fn lipschitz_estimate_rejects_degenerate_inputs() {
        let flat = BoxDomain::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let f = |x: &State| x[0];
        assert!(lipschitz_estimate(&f, &flat, 10, 0).is_err());
        let ok = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        assert!(lipschitz_estimate(&f, &ok, 1, 0).is_err());
    }

    #[test]
    fn sampled_racing_constants_stay_below_analytic_bounds() {
        let spec = RacingSpec::default();
        let domain = racing_operating_box();
        let r = spec.clone();
        let c = spec.clone();
        let est_r = lipschitz_estimate(
            &move |x: &State| racing_reward(&r, x).unwrap(),
            &domain,
            300,
            9,
        )
        .unwrap();
        let est_c = lipschitz_estimate(
            &move |x: &State| racing_constraint(&c, x).unwrap(),
            &domain,
            300,
            10,
        )
        .unwrap();
        assert!(est_r <= racing_reward_lipschitz() + 1e-9);
        assert!(est_c <= racing_constraint_lipschitz(&spec) + 1e-9);
    }

    #[test]
    fn lowdim_margins() {
        let spec = LowDimSpec::default();
        let x = DVector::from_vec(vec![1.5, 0.0]);
        assert_relative_eq!(lowdim_reward(&spec, &x).unwrap(), 0.2, epsilon = 1e-14);
        let x = DVector::from_vec(vec![0.6, 0.0]);
        assert_relative_eq!(lowdim_constraint(&spec, &x).unwrap(), -0.15, epsilon = 1e-14);
        let x = DVector::from_vec(vec![1.0, 0.5]);
        assert!(lowdim_reward(&spec, &x).unwrap() < 0.0);
        assert!(lowdim_constraint(&spec, &x).unwrap() > 0.0);
    }
}
