//! Four-tier priority switch: every control step picks the first tier whose
//! condition holds — target-maintenance MPPI inside the target set, the
//! certified policy inside the global or a locally grown safe set, and
//! recovery MPPI otherwise — plus the closed-loop episode driver.

use crate::error::{Error, Result};
use crate::global::GlobalCertificate;
use crate::local::{iterative_growth, local_member, LocalCertificate, RefineConfig};
use crate::measure::RewardConstraintSpec;
use crate::mppi::{mppi_step_probed, shift_warm_start, CostModel, MppiConfig, WarmStartSource};
use crate::systems::{racing_idx, rollout, Control, Policy, State, System};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Arc;

/// Which tier produced a control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    TargetMaintenance = 0,
    Global = 1,
    Local = 2,
    Recovery = 3,
}

impl Tier {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// What certified tiers apply when their membership condition holds.
#[derive(Debug, Clone)]
pub enum CertifiedControlMode {
    /// The certified policy itself.
    Policy,
    /// Goal-directed MPPI in place of the policy (switching ablation).
    GoalMppi { mppi: MppiConfig, cost: CostModel },
}

/// Tier controllers and switching parameters.
#[derive(Debug, Clone)]
pub struct SwitchConfig {
    pub tier0_mppi: MppiConfig,
    pub tier0_cost: CostModel,
    pub recovery_mppi: MppiConfig,
    pub recovery_barrier_weight: f64,
    pub recovery_barrier_clearance: f64,
    pub refine: RefineConfig,
    pub certified_control: CertifiedControlMode,
    /// Tier 2 is skipped entirely when false.
    pub enable_refinement: bool,
    /// Warm-start recovery MPPI by unrolling the policy (the ablation that
    /// removes the policy turns this off and starts from zero).
    pub recovery_warm_policy: bool,
    pub base_seed: u64,
}

/// Mutable per-episode switching state: warm starts and the local-certificate
/// cache. Single-threaded per episode by construction.
#[derive(Debug, Clone, Default)]
pub struct SwitchState {
    pub warm_fast: Option<Vec<Control>>,
    pub local_cache: Vec<LocalCertificate>,
}

/// Condition values evaluated on the way to the fired tier; enough to replay
/// the priority decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TierDiagnostics {
    pub reward_margin: f64,
    pub global_member: bool,
    pub local_hit: bool,
    pub refinement_attempted: bool,
    /// Distance from the reduced state to the local ball that fired (tier 2).
    pub local_distance: Option<f64>,
    /// Tier 3 only: how many recovery rollouts re-entered a certified set.
    pub recovery_reentry_rollouts: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TierDecision {
    pub tier: Tier,
    pub control: Control,
    /// The certificate backing a tier-2 decision.
    pub local_ref: Option<LocalCertificate>,
    pub diagnostics: TierDiagnostics,
}

fn mix_seed(a: u64, b: u64) -> u64 {
    (a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

fn certified_control(
    mode: &CertifiedControlMode,
    system: &System,
    policy: &dyn Policy,
    x: &State,
    seed: u64,
) -> Result<Control> {
    match mode {
        CertifiedControlMode::Policy => Ok(system.clamp_control(&policy.control(x))),
        CertifiedControlMode::GoalMppi { mppi, cost } => {
            let mut cfg = mppi.clone();
            cfg.seed = seed;
            let (u, _, _) = mppi_step_probed(&cfg, cost, system, x, None, None)?;
            Ok(u)
        }
    }
}

/// Evaluate the tiers in strict priority order and return the fired tier's
/// control. A tier-2 refinement failure falls through to recovery silently;
/// other controller errors propagate.
#[allow(clippy::too_many_arguments)]
pub fn decide(
    switch: &SwitchConfig,
    system: &System,
    spec: &RewardConstraintSpec,
    policy: &dyn Policy,
    cert: &Arc<GlobalCertificate>,
    state: &mut SwitchState,
    step: usize,
    x: &State,
) -> Result<TierDecision> {
    // Tier 0: inside the (state-dependent) target set, maintain it.
    let reward_margin = spec.reward_at(x);
    if reward_margin > 0.0 {
        let mut cfg = switch.tier0_mppi.clone();
        cfg.seed = mix_seed(switch.base_seed, step as u64);
        let warm_storage;
        let warm: Option<&[Control]> = match cfg.warm_start {
            WarmStartSource::Previous => match &state.warm_fast {
                Some(prev) => {
                    warm_storage = shift_warm_start(prev);
                    Some(&warm_storage)
                }
                None => None,
            },
            WarmStartSource::Policy => {
                let unrolled = rollout(system, x, policy, cfg.horizon)?;
                warm_storage = unrolled.controls;
                Some(&warm_storage)
            }
            WarmStartSource::Zero => None,
        };
        let (u, seq, _) = mppi_step_probed(&cfg, &switch.tier0_cost, system, x, warm, None)?;
        state.warm_fast = Some(seq);
        return Ok(TierDecision {
            tier: Tier::TargetMaintenance,
            control: u,
            local_ref: None,
            diagnostics: TierDiagnostics {
                reward_margin,
                global_member: false,
                local_hit: false,
                refinement_attempted: false,
                local_distance: None,
                recovery_reentry_rollouts: None,
            },
        });
    }

    // Tier 1: globally certified.
    let global_member = cert.is_member(x);
    if global_member {
        let u = certified_control(
            &switch.certified_control,
            system,
            policy,
            x,
            mix_seed(switch.base_seed, 0x1000_0000 + step as u64),
        )?;
        return Ok(TierDecision {
            tier: Tier::Global,
            control: u,
            local_ref: None,
            diagnostics: TierDiagnostics {
                reward_margin,
                global_member,
                local_hit: false,
                refinement_attempted: false,
                local_distance: None,
                recovery_reentry_rollouts: None,
            },
        });
    }

    // Tier 2: cached or freshly grown local certificate.
    let mut refinement_attempted = false;
    let mut local_fired: Option<LocalCertificate> = None;
    if switch.enable_refinement {
        let reduction = cert.reduction();
        let rho = reduction.reduce(x);
        let untracked = reduction.untracked(x);
        // Drop stale or foreign certificates.
        state.local_cache.retain(|lc| {
            lc.policy_id == policy.id()
                && (State::from_vec(lc.anchor.clone()) - &untracked).norm() <= cert.eps_x()
        });
        for lc in &state.local_cache {
            if local_member(lc, policy.id(), &rho)? {
                local_fired = Some(lc.clone());
                break;
            }
        }
        if local_fired.is_none() {
            refinement_attempted = true;
            let mut refine_cfg = switch.refine.clone();
            refine_cfg.seed = mix_seed(switch.base_seed, 0x2000_0000 + step as u64);
            match iterative_growth(&refine_cfg, system, spec, policy, cert, x) {
                Ok(outcome) => {
                    let mut lc = outcome.certificate;
                    lc.created_step = Some(step);
                    let hit = local_member(&lc, policy.id(), &rho)?;
                    state.local_cache.push(lc.clone());
                    if hit {
                        local_fired = Some(lc);
                    }
                }
                Err(
                    Error::RadiusCollapsed { .. }
                    | Error::IterationsExhausted { .. }
                    | Error::NoBoundaryPoints(_),
                ) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if let Some(lc) = local_fired {
        let u = certified_control(
            &switch.certified_control,
            system,
            policy,
            x,
            mix_seed(switch.base_seed, 0x3000_0000 + step as u64),
        )?;
        let rho = cert.reduction().reduce(x);
        let dist = (State::from_vec(lc.center.clone()) - rho).norm();
        return Ok(TierDecision {
            tier: Tier::Local,
            control: u,
            local_ref: Some(lc),
            diagnostics: TierDiagnostics {
                reward_margin,
                global_member,
                local_hit: true,
                refinement_attempted,
                local_distance: Some(dist),
                recovery_reentry_rollouts: None,
            },
        });
    }

    // Tier 3: recovery MPPI warm-started by unrolling the policy.
    let mut cfg = switch.recovery_mppi.clone();
    cfg.seed = mix_seed(switch.base_seed, 0x4000_0000 + step as u64);
    let warm_controls = if switch.recovery_warm_policy {
        Some(rollout(system, x, policy, cfg.horizon)?.controls)
    } else {
        None
    };
    let cost = CostModel::Recovery {
        cert: Arc::clone(cert),
        locals: state.local_cache.clone(),
        spec: spec.clone(),
        barrier_weight: switch.recovery_barrier_weight,
        barrier_clearance: switch.recovery_barrier_clearance,
    };
    let cert_probe = Arc::clone(cert);
    let locals_probe = state.local_cache.clone();
    let policy_id = policy.id().to_string();
    let probe = move |traj: &crate::systems::Trajectory| {
        traj.states.iter().any(|s| {
            if cert_probe.is_member(s) {
                return true;
            }
            let rho = cert_probe.reduction().reduce(s);
            locals_probe
                .iter()
                .any(|lc| local_member(lc, &policy_id, &rho).unwrap_or(false))
        })
    };
    let (u, _, reentry) = mppi_step_probed(
        &cfg,
        &cost,
        system,
        x,
        warm_controls.as_deref(),
        Some(&probe),
    )?;
    Ok(TierDecision {
        tier: Tier::Recovery,
        control: u,
        local_ref: None,
        diagnostics: TierDiagnostics {
            reward_margin,
            global_member,
            local_hit: false,
            refinement_attempted,
            local_distance: None,
            recovery_reentry_rollouts: Some(reentry),
        },
    })
}

/// When an episode counts as a success.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SuccessRule {
    /// Ego crosses the gate plane inside the corridor strictly before the
    /// opponent crosses it.
    GateCrossing { corridor_half_width: f64 },
    /// The reward margin turns positive (low-dimensional benchmark).
    RewardReach,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

/// Per-step record of a closed-loop episode.
#[derive(Debug, Clone)]
pub struct StepLog {
    pub step: usize,
    pub state: State,
    pub tier: Option<Tier>,
    pub reward_margin: f64,
    pub constraint_margin: f64,
    pub control: Control,
    pub diagnostics: Option<TierDiagnostics>,
    pub local_ref: Option<LocalCertificate>,
}

#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub steps: Vec<StepLog>,
    pub outcome: Outcome,
    pub ego_crossed_step: Option<usize>,
    pub opponent_crossed_step: Option<usize>,
    pub tier_counts: [usize; 4],
    pub final_state: State,
}

impl EpisodeLog {
    /// CSV rendering: per-step rows plus a trailing summary comment.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let dim = self.final_state.len();
        let cols: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        let _ = writeln!(
            out,
            "t,tier,reward_margin,constraint_margin,{},control",
            cols.join(",")
        );
        for s in &self.steps {
            let tier = s.tier.map(|t| t.index() as i64).unwrap_or(-1);
            let coords: Vec<String> = s.state.iter().map(|v| format!("{v}")).collect();
            let control: Vec<String> = s.control.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.step,
                tier,
                s.reward_margin,
                s.constraint_margin,
                coords.join(","),
                control.join(";")
            );
        }
        let _ = writeln!(
            out,
            "# outcome={:?} steps={} tiers={:?} ego_crossed={:?} opponent_crossed={:?}",
            self.outcome,
            self.steps.len(),
            self.tier_counts,
            self.ego_crossed_step,
            self.opponent_crossed_step
        );
        out
    }
}

fn gate_crossing(x: &State, corridor: f64) -> (bool, bool) {
    let e = racing_idx::EGO;
    let o = racing_idx::OPP;
    let ego = x[e + racing_idx::PY] >= 0.0
        && x[e + racing_idx::PX].abs() < corridor
        && x[e + racing_idx::PZ].abs() < corridor;
    let opp = x[o + racing_idx::PY] >= 0.0;
    (ego, opp)
}

/// Drive a closed-loop episode: at each step check success, then collision,
/// then ask the controller for a control and advance the system.
///
/// Success is checked before collision at the same state, so a crossing step
/// fails only on violations at strictly earlier steps.
pub fn run_episode(
    system: &System,
    spec: &RewardConstraintSpec,
    success: SuccessRule,
    max_steps: usize,
    x0: &State,
    mut controller: impl FnMut(usize, &State) -> Result<(Control, Option<TierDecision>)>,
) -> Result<EpisodeLog> {
    if max_steps == 0 {
        return Err(Error::Contract("episode needs at least one step".into()));
    }
    let mut steps = Vec::new();
    let mut tier_counts = [0usize; 4];
    let mut x = x0.clone();
    let mut ego_crossed: Option<usize> = None;
    let mut opp_crossed: Option<usize> = None;
    let mut outcome = Outcome::Timeout;

    for step in 0..=max_steps {
        let reward_margin = spec.reward_at(&x);
        let constraint_margin = spec.constraint_at(&x);

        let mut terminal = None;
        match success {
            SuccessRule::GateCrossing {
                corridor_half_width,
            } => {
                let (ego, opp) = gate_crossing(&x, corridor_half_width);
                if opp && opp_crossed.is_none() {
                    opp_crossed = Some(step);
                }
                if ego && ego_crossed.is_none() {
                    ego_crossed = Some(step);
                    if opp_crossed.is_none_or(|o| step < o) {
                        terminal = Some(Outcome::Success);
                    } else if constraint_margin > 0.0 {
                        // Crossed the gate but lost the race.
                        terminal = Some(Outcome::Timeout);
                    }
                }
            }
            SuccessRule::RewardReach => {
                if reward_margin > 0.0 {
                    terminal = Some(Outcome::Success);
                }
            }
        }
        if terminal.is_none() && constraint_margin <= 0.0 {
            terminal = Some(Outcome::Collision);
        }
        if let Some(t) = terminal {
            outcome = t;
            steps.push(StepLog {
                step,
                state: x.clone(),
                tier: None,
                reward_margin,
                constraint_margin,
                control: Control::zeros(system.control_dim()),
                diagnostics: None,
                local_ref: None,
            });
            break;
        }
        if step == max_steps {
            break;
        }

        let (control, decision) = controller(step, &x)?;
        let control = system.clamp_control(&control);
        if let Some(d) = &decision {
            tier_counts[d.tier.index()] += 1;
        }
        steps.push(StepLog {
            step,
            state: x.clone(),
            tier: decision.as_ref().map(|d| d.tier),
            reward_margin,
            constraint_margin,
            control: control.clone(),
            diagnostics: decision.as_ref().map(|d| d.diagnostics.clone()),
            local_ref: decision.and_then(|d| d.local_ref),
        });
        x = system.step(&x, &control)?;
    }

    Ok(EpisodeLog {
        steps,
        outcome,
        ego_crossed_step: ego_crossed,
        opponent_crossed_step: opp_crossed,
        tier_counts,
        final_state: x,
    })
}

/// Episode driven by the tiered switch.
#[allow(clippy::too_many_arguments)]
pub fn run_hybrid_episode(
    switch: &SwitchConfig,
    system: &System,
    spec: &RewardConstraintSpec,
    policy: &dyn Policy,
    cert: &Arc<GlobalCertificate>,
    success: SuccessRule,
    max_steps: usize,
    x0: &State,
) -> Result<EpisodeLog> {
    let mut state = SwitchState::default();
    run_episode(system, spec, success, max_steps, x0, |step, x| {
        let d = decide(switch, system, spec, policy, cert, &mut state, step, x)?;
        Ok((d.control.clone(), Some(d)))
    })
}
