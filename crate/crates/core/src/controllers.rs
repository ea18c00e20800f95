//! Control policies and the recovery cost shared by the fallback controller.
//!
//! The surrogate overtaking policy stands in for a learned reach-avoid policy:
//! the certification stack treats it as a black box, exactly as it would any
//! other policy implementation.

use crate::error::{Error, Result};
use crate::global::GlobalCertificate;
use crate::local::LocalCertificate;
use crate::measure::{downwash_margin, RacingSpec, RewardConstraintSpec};
use crate::systems::{racing_idx, Control, Policy, State, Trajectory};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Tracking and evasion parameters of the surrogate overtaking policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateConfig {
    /// Waypoint offset ahead of the opponent along the racing axis (m).
    pub lead_distance: f64,
    /// Minimum waypoint position past the gate plane (m).
    pub push_through: f64,
    /// Target speed offset above the opponent (m/s).
    pub velocity_lead: f64,
    /// Minimum target speed (m/s).
    pub velocity_floor: f64,
    /// Tracking gains along the racing axis.
    pub kp: f64,
    pub kd: f64,
    /// Tracking gains for corridor centering (x and z). Deliberately sluggish:
    /// the surrogate reaches fast but corrects its lateral offset slowly, the
    /// kind of blind spot the certification tiers exist to catch.
    pub kp_lateral: f64,
    pub kd_lateral: f64,
    /// Downwash-margin level below which the repulsive term activates.
    pub repulsion_threshold: f64,
    pub repulsion_gain: f64,
    /// Per-axis control bound the policy clamps to.
    pub control_bound: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            lead_distance: 0.8,
            push_through: 0.8,
            velocity_lead: 0.2,
            velocity_floor: 0.9,
            kp: 2.0,
            kd: 2.8,
            kp_lateral: 0.5,
            kd_lateral: 1.0,
            repulsion_threshold: 0.35,
            repulsion_gain: 3.0,
            control_bound: 1.0,
        }
    }
}

/// Deterministic overtaking policy: waypoint tracking ahead of the opponent
/// inside the gate corridor, blended with a horizontal repulsive term when
/// the downwash margin gets small.
#[derive(Debug, Clone)]
pub struct SurrogatePolicy {
    cfg: SurrogateConfig,
    racing: RacingSpec,
}

impl SurrogatePolicy {
    pub fn new(cfg: SurrogateConfig, racing: RacingSpec) -> Self {
        Self { cfg, racing }
    }
}

impl Policy for SurrogatePolicy {
    fn id(&self) -> &str {
        "surrogate-overtake-v1"
    }

    fn control(&self, x: &State) -> Control {
        assert_eq!(x.len(), 12, "surrogate policy needs the 12-D joint state");
        let c = &self.cfg;
        let e = racing_idx::EGO;
        let o = racing_idx::OPP;

        let waypoint_y = (x[o + racing_idx::PY] + c.lead_distance).max(c.push_through);
        let target_vy = (x[o + racing_idx::VY] + c.velocity_lead).max(c.velocity_floor);

        let mut u = DVector::zeros(3);
        u[0] = c.kp_lateral * (0.0 - x[e + racing_idx::PX])
            + c.kd_lateral * (0.0 - x[e + racing_idx::VX]);
        u[1] = c.kp * (waypoint_y - x[e + racing_idx::PY])
            + c.kd * (target_vy - x[e + racing_idx::VY]);
        u[2] = c.kp_lateral * (0.0 - x[e + racing_idx::PZ])
            + c.kd_lateral * (0.0 - x[e + racing_idx::VZ]);

        let margin = downwash_margin(&self.racing, x).expect("12-D joint state");
        if margin < c.repulsion_threshold {
            let dx = x[e + racing_idx::PX] - x[o + racing_idx::PX];
            let dy = x[e + racing_idx::PY] - x[o + racing_idx::PY];
            let norm = (dx * dx + dy * dy).sqrt();
            let (dir_x, dir_y) = if norm > 1e-9 {
                (dx / norm, dy / norm)
            } else {
                (1.0, 0.0)
            };
            let strength =
                c.repulsion_gain * (c.repulsion_threshold - margin) / c.repulsion_threshold;
            u[0] += strength * dir_x;
            u[1] += strength * dir_y;
        }
        u.map(|v| v.clamp(-c.control_bound, c.control_bound))
    }
}

/// Gentle PD policy for the low-dimensional benchmark. Its internal authority
/// is deliberately below the system's control bound, so its braking envelope
/// is strictly smaller than the optimal one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdLowDimPolicy {
    pub target: f64,
    pub kp: f64,
    pub kd: f64,
    /// Policy authority; at most the system control bound.
    pub authority: f64,
}

impl Default for PdLowDimPolicy {
    fn default() -> Self {
        Self {
            target: 1.5,
            kp: 1.2,
            kd: 1.6,
            authority: 0.6,
        }
    }
}

impl Policy for PdLowDimPolicy {
    fn id(&self) -> &str {
        "pd-lowdim-v1"
    }

    fn control(&self, x: &State) -> Control {
        let u = -self.kp * (x[0] - self.target) - self.kd * x[1];
        DVector::from_vec(vec![u.clamp(-self.authority, self.authority)])
    }
}

/// Fixed-output policy, mostly for tests and open-loop comparisons.
#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    pub id: String,
    pub output: Control,
}

impl Policy for ConstantPolicy {
    fn id(&self) -> &str {
        &self.id
    }
    fn control(&self, _x: &State) -> Control {
        self.output.clone()
    }
}

/// Adapter turning a closure into a policy.
pub struct FnPolicy<F: Fn(&State) -> Control + Send + Sync> {
    pub id: String,
    pub f: F,
}

impl<F: Fn(&State) -> Control + Send + Sync> Policy for FnPolicy<F> {
    fn id(&self) -> &str {
        &self.id
    }
    fn control(&self, x: &State) -> Control {
        (self.f)(x)
    }
}

/// Safety-oriented recovery cost: per-state distance to the nearest certified
/// region (zero once inside) plus a constraint barrier so recovery never
/// trades safety for proximity. The barrier charges linearly below a
/// clearance level, well before an actual violation; certified states clear
/// it by construction (their deflated margins exceed any sane clearance).
pub fn recovery_cost(
    cert: &GlobalCertificate,
    locals: &[LocalCertificate],
    spec: &RewardConstraintSpec,
    barrier_weight: f64,
    barrier_clearance: f64,
    traj: &Trajectory,
) -> Result<f64> {
    if cert.certified_count() == 0 && locals.is_empty() {
        return Err(Error::ControllerFailure(
            "recovery cost needs at least one certified region".into(),
        ));
    }
    let reduction = cert.reduction();
    let mut total = 0.0;
    for x in &traj.states {
        // A safe target reach ends the task; later states cost nothing.
        if spec.reward_at(x) > 0.0 && spec.constraint_at(x) > 0.0 {
            break;
        }
        let rho = reduction.reduce(x);
        let mut dist = cert.distance_to_certified(x).unwrap_or(f64::INFINITY);
        for lc in locals {
            let center = State::from_vec(lc.center.clone());
            dist = dist.min(((&rho - center).norm() - lc.radius).max(0.0));
        }
        total += dist + barrier_weight * (barrier_clearance - spec.constraint_at(x)).max(0.0);
    }
    Ok(total)
}
