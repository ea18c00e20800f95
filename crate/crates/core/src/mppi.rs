//! Sampling-based receding-horizon controller with information-theoretic
//! weighting: noisy control rollouts scored by trajectory cost, combined by a
//! softmax over shifted costs.

use crate::error::{Error, Result};
use crate::global::GlobalCertificate;
use crate::local::LocalCertificate;
use crate::measure::{racing_constraint, racing_reward, RacingSpec, RewardConstraintSpec};
use crate::systems::{racing_idx, rollout_open, Control, State, System, Trajectory};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Where the mean control sequence of an MPPI step comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WarmStartSource {
    /// Zero mean sequence.
    Zero,
    /// Unroll the active policy from the current state each step.
    Policy,
    /// Shifted average sequence of the previous step.
    Previous,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MppiConfig {
    /// Planning horizon H in steps.
    pub horizon: usize,
    /// Number of sampled rollouts K.
    pub rollouts: usize,
    /// Softmax temperature; values below 1e-9 degenerate to argmin.
    pub temperature: f64,
    /// Per-axis control noise standard deviation.
    pub noise_std: f64,
    pub warm_start: WarmStartSource,
    pub seed: u64,
}

impl Default for MppiConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            rollouts: 256,
            temperature: 1.0,
            noise_std: 0.3,
            warm_start: WarmStartSource::Previous,
            seed: 0,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 || self.rollouts < 1 {
            return Err(Error::InvalidParameter(
                "MPPI needs at least one rollout and one step".into(),
            ));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter("temperature must be positive".into()));
        }
        if !(self.noise_std > 0.0) {
            return Err(Error::InvalidParameter("noise std must be positive".into()));
        }
        Ok(())
    }
}

/// True once the ego has crossed the gate plane inside the corridor; the
/// episode ends there, so rollout costs stop accumulating at that state.
fn crossed_gate(x: &crate::systems::State, corridor: f64) -> bool {
    let e = racing_idx::EGO;
    x[e + racing_idx::PY] >= 0.0
        && x[e + racing_idx::PX].abs() < corridor
        && x[e + racing_idx::PZ].abs() < corridor
}

/// Trajectory cost used to score MPPI rollouts.
#[derive(Clone)]
pub enum CostModel {
    /// Target maintenance on the racing system: corridor centering, speed
    /// shaping relative to the opponent, a hinge on the target margin, and a
    /// hinge on constraint clearance.
    FastGoalRacing {
        racing: RacingSpec,
        center_weight: f64,
        velocity_weight: f64,
        lead_weight: f64,
        speed_lead: f64,
        safety_weight: f64,
        safety_clearance: f64,
    },
    /// Plain goal cost on the racing system, no safety term: squared ego
    /// distance to a point past the gate.
    GoalRacing {
        aim_y: f64,
        weight: f64,
        corridor: f64,
    },
    /// Goal cost plus a penalty on constraint violation.
    SoftRacing {
        racing: RacingSpec,
        aim_y: f64,
        weight: f64,
        penalty: f64,
    },
    /// Goal cost for the low-dimensional benchmark.
    GoalLowDim {
        target: f64,
        pos_weight: f64,
        vel_weight: f64,
    },
    /// Distance to the nearest certified region plus a violation barrier.
    Recovery {
        cert: Arc<GlobalCertificate>,
        locals: Vec<LocalCertificate>,
        spec: RewardConstraintSpec,
        barrier_weight: f64,
        barrier_clearance: f64,
    },
    /// Arbitrary trajectory cost.
    Custom(Arc<dyn Fn(&Trajectory) -> f64 + Send + Sync>),
}

impl fmt::Debug for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CostModel::FastGoalRacing { .. } => "FastGoalRacing",
            CostModel::GoalRacing { .. } => "GoalRacing",
            CostModel::SoftRacing { .. } => "SoftRacing",
            CostModel::GoalLowDim { .. } => "GoalLowDim",
            CostModel::Recovery { .. } => "Recovery",
            CostModel::Custom(_) => "Custom",
        };
        f.write_str(name)
    }
}

impl CostModel {
    pub fn evaluate(&self, traj: &Trajectory) -> Result<f64> {
        match self {
            CostModel::FastGoalRacing {
                racing,
                center_weight,
                velocity_weight,
                lead_weight,
                speed_lead,
                safety_weight,
                safety_clearance,
            } => {
                let mut total = 0.0;
                for x in &traj.states {
                    if crossed_gate(x, racing.corridor_half_width) {
                        break;
                    }
                    let e = racing_idx::EGO;
                    let o = racing_idx::OPP;
                    let px = x[e + racing_idx::PX];
                    let pz = x[e + racing_idx::PZ];
                    // One-sided: being faster than the shaped speed is free.
                    let dv = ((x[o + racing_idx::VY] + speed_lead) - x[e + racing_idx::VY])
                        .max(0.0);
                    let margin = racing_reward(racing, x)?;
                    let c = racing_constraint(racing, x)?;
                    total += center_weight * (px * px + pz * pz)
                        + velocity_weight * dv * dv
                        + lead_weight * (-margin).max(0.0)
                        + safety_weight * (safety_clearance - c).max(0.0);
                }
                Ok(total)
            }
            CostModel::GoalRacing {
                aim_y,
                weight,
                corridor,
            } => {
                let mut total = 0.0;
                for x in &traj.states {
                    if crossed_gate(x, *corridor) {
                        break;
                    }
                    let e = racing_idx::EGO;
                    let px = x[e + racing_idx::PX];
                    let dy = x[e + racing_idx::PY] - aim_y;
                    let pz = x[e + racing_idx::PZ];
                    total += weight * (px * px + dy * dy + pz * pz);
                }
                Ok(total)
            }
            CostModel::SoftRacing {
                racing,
                aim_y,
                weight,
                penalty,
            } => {
                let mut total = 0.0;
                for x in &traj.states {
                    if crossed_gate(x, racing.corridor_half_width) {
                        break;
                    }
                    let e = racing_idx::EGO;
                    let px = x[e + racing_idx::PX];
                    let dy = x[e + racing_idx::PY] - aim_y;
                    let pz = x[e + racing_idx::PZ];
                    let c = racing_constraint(racing, x)?;
                    total += weight * (px * px + dy * dy + pz * pz) + penalty * (-c).max(0.0);
                }
                Ok(total)
            }
            CostModel::GoalLowDim {
                target,
                pos_weight,
                vel_weight,
            } => {
                let mut total = 0.0;
                for x in &traj.states {
                    let dp = x[0] - target;
                    total += pos_weight * dp * dp + vel_weight * x[1] * x[1];
                }
                Ok(total)
            }
            CostModel::Recovery {
                cert,
                locals,
                spec,
                barrier_weight,
                barrier_clearance,
            } => crate::controllers::recovery_cost(
                cert,
                locals,
                spec,
                *barrier_weight,
                *barrier_clearance,
                traj,
            ),
            CostModel::Custom(f) => Ok(f(traj)),
        }
    }
}

/// Softmax weights over costs with min-cost baseline subtraction. Non-finite
/// costs get zero weight.
pub fn softmax_weights(costs: &[f64], temperature: f64) -> Vec<f64> {
    let min = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return vec![0.0; costs.len()];
    }
    let raw: Vec<f64> = costs
        .iter()
        .map(|&c| {
            if c.is_finite() {
                (-(c - min) / temperature).exp()
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Receding-horizon warm start: drop the executed control, repeat the last.
pub fn shift_warm_start(seq: &[Control]) -> Vec<Control> {
    if seq.is_empty() {
        return Vec::new();
    }
    let mut out: Vec<Control> = seq[1..].to_vec();
    out.push(seq[seq.len() - 1].clone());
    out
}

/// One MPPI step: sample `K` noise-perturbed control sequences around the
/// warm start (zero when absent), roll each out, weight by exponentiated
/// negative cost, and return the weighted-average first control along with
/// the averaged sequence for receding-horizon warm starting.
pub fn mppi_step(
    cfg: &MppiConfig,
    cost: &CostModel,
    system: &System,
    x: &State,
    warm: Option<&[Control]>,
) -> Result<(Control, Vec<Control>)> {
    let (first, seq, _) = mppi_step_probed(cfg, cost, system, x, warm, None)?;
    Ok((first, seq))
}

/// [`mppi_step`] plus an optional per-rollout probe; the third return value
/// counts rollouts for which the probe held.
pub fn mppi_step_probed(
    cfg: &MppiConfig,
    cost: &CostModel,
    system: &System,
    x: &State,
    warm: Option<&[Control]>,
    probe: Option<&(dyn Fn(&Trajectory) -> bool + Sync)>,
) -> Result<(Control, Vec<Control>, usize)> {
    cfg.validate()?;
    let m = system.control_dim();
    let base: Vec<Control> = match warm {
        Some(seq) => {
            if seq.len() != cfg.horizon {
                return Err(Error::Contract(format!(
                    "warm-start length {} does not match horizon {}",
                    seq.len(),
                    cfg.horizon
                )));
            }
            seq.iter().map(|u| system.clamp_control(u)).collect()
        }
        None => vec![DVector::zeros(m); cfg.horizon],
    };

    // Per-rollout noise from independent RNG substreams, then parallel
    // rollouts into indexed slots: the result does not depend on scheduling.
    let candidates: Vec<Vec<Control>> = (0..cfg.rollouts)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            let normal = rand_distr::Normal::new(0.0, cfg.noise_std).expect("valid std");
            base.iter()
                .map(|u| {
                    let noisy = DVector::from_fn(m, |i, _| u[i] + normal.sample(&mut rng));
                    system.clamp_control(&noisy)
                })
                .collect()
        })
        .collect();

    let scored: Vec<(f64, bool)> = candidates
        .par_iter()
        .map(|seq| -> Result<(f64, bool)> {
            let traj = rollout_open(system, x, seq)?;
            let hit = probe.map(|p| p(&traj)).unwrap_or(false);
            Ok((cost.evaluate(&traj)?, hit))
        })
        .collect::<Result<_>>()?;
    let costs: Vec<f64> = scored.iter().map(|(c, _)| *c).collect();
    let probe_hits = scored.iter().filter(|(_, hit)| *hit).count();

    if costs.iter().all(|c| !c.is_finite()) {
        return Err(Error::ControllerFailure(
            "every MPPI rollout produced a non-finite cost".into(),
        ));
    }

    if cfg.temperature < 1e-9 {
        // Degenerate limit: the single best rollout, lowest index on ties.
        let best = costs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_finite())
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .expect("at least one finite cost");
        let seq = candidates[best].clone();
        return Ok((seq[0].clone(), seq, probe_hits));
    }

    let weights = softmax_weights(&costs, cfg.temperature);
    let mut averaged = vec![DVector::zeros(m); cfg.horizon];
    for (k, seq) in candidates.iter().enumerate() {
        if weights[k] == 0.0 {
            continue;
        }
        for (t, u) in seq.iter().enumerate() {
            averaged[t] += u * weights[k];
        }
    }
    Ok((averaged[0].clone(), averaged, probe_hits))
}
