//! Declarative configuration for both benchmark systems plus builders that
//! assemble profiles, certificates, and study setups from it.
//!
//! Every quantity the underlying problem leaves open (time step, horizons,
//! controller weights, initial-condition boxes, covering layout) lives here
//! rather than in code.

use crate::cbf::CbfConfig;
use crate::controllers::{PdLowDimPolicy, SurrogateConfig, SurrogatePolicy};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::global::{CoveringConfig, GlobalCertificate};
use crate::harness::{RacingInitialConditions, StudySetup};
use crate::hierarchy::{CertifiedControlMode, SuccessRule, SwitchConfig};
use crate::local::RefineConfig;
use crate::measure::{
    lowdim_measure_spec, racing_measure_spec, LowDimSpec, RacingSpec, RewardConstraintSpec,
};
use crate::mppi::{CostModel, MppiConfig, WarmStartSource};
use crate::reduction::{RacingAnchors, Reduction};
use crate::scenario::{
    bound_deviation, required_samples, sample_pairs, ScenarioConfig, SensitivityProfile,
};
use crate::systems::{OpponentMode, OpponentPolicyConfig, Policy, System};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

fn default_scenario() -> ScenarioConfig {
    ScenarioConfig {
        epsilon: 0.1,
        beta: 0.001,
        dimension: 1,
    }
}

/// Covering layout in reduced coordinates plus the full-state slab.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveringSection {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub spacing: f64,
    pub eps_x: f64,
    pub horizon: usize,
    pub max_points: usize,
    pub full_lo: Option<Vec<f64>>,
    pub full_hi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MppiSection {
    pub horizon: usize,
    pub rollouts: usize,
    pub temperature: f64,
    pub noise_std: f64,
}

impl MppiSection {
    fn to_config(&self, warm_start: WarmStartSource) -> MppiConfig {
        MppiConfig {
            horizon: self.horizon,
            rollouts: self.rollouts,
            temperature: self.temperature,
            noise_std: self.noise_std,
            warm_start,
            seed: 0,
        }
    }
}

/// Racing benchmark: system, target/constraint geometry, controllers,
/// certification layout, and the Monte-Carlo study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RacingSection {
    pub dt: f64,
    pub control_bound: f64,
    pub gamma: f64,
    pub opponent: OpponentPolicyConfig,
    pub spec: RacingSpec,
    pub surrogate: SurrogateConfig,
    pub anchors: RacingAnchors,
    pub covering: CoveringSection,
    pub profile_seed: u64,
    /// Scenario pair count; defaults to the sample-complexity bound.
    pub profile_samples: Option<usize>,
    pub refine: RefineConfig,
    pub tier0_mppi: MppiSection,
    /// Tier-0 cost weights: corridor centering, speed shaping, margin hinge.
    pub tier0_center_weight: f64,
    pub tier0_velocity_weight: f64,
    pub tier0_lead_weight: f64,
    pub tier0_speed_lead: f64,
    pub tier0_safety_weight: f64,
    pub tier0_safety_clearance: f64,
    pub recovery_mppi: MppiSection,
    pub recovery_barrier_weight: f64,
    /// Constraint clearance below which recovery rollouts pay the barrier.
    pub recovery_barrier_clearance: f64,
    pub baseline_mppi: MppiSection,
    /// Plain-goal aim point past the gate plane.
    pub goal_aim_y: f64,
    pub goal_weight: f64,
    /// Soft-constraint penalty (multiple of the goal-cost scale).
    pub soft_penalty: f64,
    pub cbf: CbfConfig,
    pub trials: usize,
    pub max_steps: usize,
    pub experiment_seed: u64,
    pub ic: RacingInitialConditions,
}

impl Default for RacingSection {
    fn default() -> Self {
        Self {
            dt: 0.1,
            control_bound: 1.0,
            gamma: 0.999,
            opponent: OpponentPolicyConfig {
                goal: [0.0, 1.0, 0.35],
                q_pos: 1.0,
                q_vel: 0.1,
                r: 0.01,
                clamp: 1.0,
            },
            spec: RacingSpec::default(),
            surrogate: SurrogateConfig::default(),
            anchors: RacingAnchors {
                ego_vx: 0.0,
                ego_vy: 1.2,
                ego_vz: 0.0,
                rel_vz: 0.0,
            },
            covering: CoveringSection {
                // Reduced coordinates:
                // [dpx, dpy, dpz, dvx, dvy, ego_px, ego_py, ego_pz].
                lo: vec![-0.6, -0.4, -0.5, -0.2, -0.3, -0.2, -1.4, -0.2],
                hi: vec![0.6, 1.0, -0.1, 0.2, 0.3, 0.2, -0.2, 0.2],
                spacing: 0.2,
                eps_x: 0.1,
                horizon: 12,
                max_points: 500_000,
                full_lo: Some(vec![
                    -0.3, -0.5, -1.5, 0.4, -0.3, -0.4, // ego
                    -0.9, -0.5, -2.6, 0.2, -0.2, -0.4, // opponent
                ]),
                full_hi: Some(vec![
                    0.3, 0.5, -0.1, 2.0, 0.3, 0.4, // ego
                    0.9, 0.5, -0.3, 2.2, 0.8, 0.4, // opponent
                ]),
            },
            profile_seed: 2024,
            profile_samples: None,
            refine: RefineConfig {
                samples_per_iteration: 159,
                r_max: 0.8,
                r_min: 1e-3,
                max_iterations: 10,
                horizon: 25,
                seed: 0,
                shrink_slack: 1e-9,
            },
            tier0_mppi: MppiSection {
                horizon: 20,
                rollouts: 256,
                temperature: 1.0,
                noise_std: 0.3,
            },
            tier0_center_weight: 1.0,
            tier0_velocity_weight: 0.3,
            tier0_lead_weight: 4.0,
            tier0_speed_lead: 0.3,
            tier0_safety_weight: 8.0,
            tier0_safety_clearance: 0.15,
            recovery_mppi: MppiSection {
                horizon: 25,
                rollouts: 256,
                temperature: 0.2,
                noise_std: 0.25,
            },
            recovery_barrier_weight: 60.0,
            recovery_barrier_clearance: 0.1,
            baseline_mppi: MppiSection {
                horizon: 20,
                rollouts: 256,
                temperature: 1.0,
                noise_std: 0.3,
            },
            goal_aim_y: 0.4,
            goal_weight: 1.0,
            soft_penalty: 50.0,
            cbf: CbfConfig::default(),
            trials: 500,
            max_steps: 300,
            experiment_seed: 7,
            ic: RacingInitialConditions {
                ego_lo: [-0.25, -0.1, -2.4, 0.5, -0.15, -0.1],
                ego_hi: [0.25, 0.1, -1.4, 1.2, 0.15, 0.1],
                rel_lo: [-0.3, -0.1, -1.4, -0.4, 0.1, -0.05],
                rel_hi: [0.3, 0.1, -0.6, 0.2, 0.35, 0.05],
                min_planar_separation: 0.75,
            },
        }
    }
}

/// Low-dimensional benchmark with the exhaustive oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LowDimSection {
    pub dt: f64,
    pub control_bound: f64,
    pub gamma: f64,
    pub spec: LowDimSpec,
    pub policy: PdLowDimPolicy,
    /// Certification domain (p, v).
    pub domain_lo: Vec<f64>,
    pub domain_hi: Vec<f64>,
    pub eps_x: f64,
    pub spacing: f64,
    pub horizon: usize,
    pub profile_seed: u64,
    pub profile_samples: Option<usize>,
    pub refine: RefineConfig,
    /// Oracle control discretization and enumeration budget.
    pub oracle_levels: Vec<f64>,
    pub oracle_budget: usize,
}

impl Default for LowDimSection {
    fn default() -> Self {
        Self {
            dt: 0.1,
            control_bound: 1.0,
            gamma: 0.95,
            spec: LowDimSpec::default(),
            policy: PdLowDimPolicy::default(),
            domain_lo: vec![0.8, -1.0],
            domain_hi: vec![2.0, 1.0],
            eps_x: 0.1,
            spacing: 0.1,
            horizon: 10,
            profile_seed: 99,
            profile_samples: None,
            refine: RefineConfig {
                samples_per_iteration: 159,
                r_max: 0.5,
                r_min: 1e-3,
                max_iterations: 20,
                horizon: 10,
                seed: 0,
                shrink_slack: 1e-9,
            },
            oracle_levels: vec![-1.0, 0.0, 1.0],
            oracle_budget: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RootConfig {
    pub scenario: ScenarioSectionWrap,
    pub racing: RacingSection,
    pub lowdim: LowDimSection,
}

/// Serde wrapper so the scenario block has defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSectionWrap {
    pub epsilon: f64,
    pub beta: f64,
    pub dimension: usize,
}

impl Default for ScenarioSectionWrap {
    fn default() -> Self {
        let s = default_scenario();
        Self {
            epsilon: s.epsilon,
            beta: s.beta,
            dimension: s.dimension,
        }
    }
}

impl ScenarioSectionWrap {
    pub fn as_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            epsilon: self.epsilon,
            beta: self.beta,
            dimension: self.dimension,
        }
    }
}

impl RootConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot render: {e}")))
    }
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

pub fn lowdim_system(cfg: &LowDimSection) -> System {
    System::DoubleIntegrator {
        axes: 1,
        dt: cfg.dt,
        control_bound: cfg.control_bound,
    }
}

pub fn lowdim_spec(cfg: &LowDimSection) -> Result<RewardConstraintSpec> {
    lowdim_measure_spec(&cfg.spec, cfg.gamma)
}

pub fn racing_system(cfg: &RacingSection) -> System {
    System::JointRacing {
        dt: cfg.dt,
        control_bound: cfg.control_bound,
        opponent: cfg.opponent.clone(),
        opponent_mode: OpponentMode::Lqr,
    }
}

pub fn racing_spec(cfg: &RacingSection) -> Result<RewardConstraintSpec> {
    racing_measure_spec(&cfg.spec, cfg.gamma)
}

pub fn racing_reduction(cfg: &RacingSection) -> Reduction {
    Reduction::RacingSlab {
        anchors: cfg.anchors,
    }
}

fn profile_sample_count(explicit: Option<usize>, scenario: &ScenarioConfig) -> Result<usize> {
    match explicit {
        Some(n) => Ok(n),
        None => required_samples(scenario),
    }
}

/// Sample scenario pairs in reduced coordinates and bound the policy's
/// trajectory deviation over the covering domain.
pub fn build_profile(
    system: &System,
    policy: &dyn Policy,
    reduction: &Reduction,
    domain: &BoxDomain,
    eps_x: f64,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> Result<SensitivityProfile> {
    let pairs = sample_pairs(domain, eps_x, samples, seed)?;
    // Embed reduced pairs into full states around the configured anchors.
    let full_pairs = crate::scenario::ScenarioPairSet {
        nominal: pairs.nominal.iter().map(|r| reduction.embed(r, None)).collect(),
        perturbed: pairs
            .perturbed
            .iter()
            .map(|r| reduction.embed(r, None))
            .collect(),
        eps_x: pairs.eps_x,
        seed: pairs.seed,
        domain: pairs.domain.clone(),
    };
    bound_deviation(system, policy, &full_pairs, horizon)
}

pub struct LowDimBuild {
    pub system: System,
    pub spec: RewardConstraintSpec,
    pub policy: Arc<PdLowDimPolicy>,
    pub profile: SensitivityProfile,
    pub certificate: Arc<GlobalCertificate>,
    pub domain: BoxDomain,
}

/// Profile plus certificate for the low-dimensional benchmark.
pub fn build_lowdim(cfg: &LowDimSection, scenario: &ScenarioConfig, seed: u64) -> Result<LowDimBuild> {
    let system = lowdim_system(cfg);
    let spec = lowdim_spec(cfg)?;
    let policy = Arc::new(cfg.policy.clone());
    let domain = BoxDomain::new(cfg.domain_lo.clone(), cfg.domain_hi.clone())?;
    let samples = profile_sample_count(cfg.profile_samples, scenario)?;
    let profile = build_profile(
        &system,
        policy.as_ref(),
        &Reduction::Identity,
        &domain,
        cfg.eps_x,
        cfg.horizon,
        samples,
        seed,
    )?;
    let covering = CoveringConfig {
        domain: domain.clone(),
        spacing: cfg.spacing,
        eps_x: cfg.eps_x,
        horizon: cfg.horizon,
        max_points: 1_000_000,
        full_domain: None,
    };
    let certificate = GlobalCertificate::build(
        &spec,
        &system,
        policy.as_ref(),
        &profile,
        &Reduction::Identity,
        &covering,
    )?;
    Ok(LowDimBuild {
        system,
        spec,
        policy,
        profile,
        certificate: Arc::new(certificate),
        domain,
    })
}

pub struct RacingBuild {
    pub system: System,
    pub spec: RewardConstraintSpec,
    pub policy: Arc<SurrogatePolicy>,
    pub profile: SensitivityProfile,
    pub certificate: Arc<GlobalCertificate>,
}

/// Profile plus certificate for the racing benchmark, over the reduced slab.
pub fn build_racing(cfg: &RacingSection, scenario: &ScenarioConfig, seed: u64) -> Result<RacingBuild> {
    let system = racing_system(cfg);
    let spec = racing_spec(cfg)?;
    let policy = Arc::new(SurrogatePolicy::new(cfg.surrogate.clone(), cfg.spec.clone()));
    let reduction = racing_reduction(cfg);
    let domain = BoxDomain::new(cfg.covering.lo.clone(), cfg.covering.hi.clone())?;
    let samples = profile_sample_count(cfg.profile_samples, scenario)?;
    let profile = build_profile(
        &system,
        policy.as_ref(),
        &reduction,
        &domain,
        cfg.covering.eps_x,
        cfg.covering.horizon,
        samples,
        seed,
    )?;
    let full_domain = match (&cfg.covering.full_lo, &cfg.covering.full_hi) {
        (Some(lo), Some(hi)) => Some(BoxDomain::new(lo.clone(), hi.clone())?),
        _ => None,
    };
    let covering = CoveringConfig {
        domain,
        spacing: cfg.covering.spacing,
        eps_x: cfg.covering.eps_x,
        horizon: cfg.covering.horizon,
        max_points: cfg.covering.max_points,
        full_domain,
    };
    let certificate = GlobalCertificate::build(
        &spec,
        &system,
        policy.as_ref(),
        &profile,
        &reduction,
        &covering,
    )?;
    Ok(RacingBuild {
        system,
        spec,
        policy,
        profile,
        certificate: Arc::new(certificate),
    })
}

/// Tier controllers for the racing hierarchy.
pub fn racing_switch_config(cfg: &RacingSection) -> SwitchConfig {
    SwitchConfig {
        tier0_mppi: cfg.tier0_mppi.to_config(WarmStartSource::Previous),
        tier0_cost: CostModel::FastGoalRacing {
            racing: cfg.spec.clone(),
            center_weight: cfg.tier0_center_weight,
            velocity_weight: cfg.tier0_velocity_weight,
            lead_weight: cfg.tier0_lead_weight,
            speed_lead: cfg.tier0_speed_lead,
            safety_weight: cfg.tier0_safety_weight,
            safety_clearance: cfg.tier0_safety_clearance,
        },
        recovery_mppi: cfg.recovery_mppi.to_config(WarmStartSource::Policy),
        recovery_barrier_weight: cfg.recovery_barrier_weight,
        recovery_barrier_clearance: cfg.recovery_barrier_clearance,
        refine: cfg.refine.clone(),
        certified_control: CertifiedControlMode::Policy,
        enable_refinement: true,
        recovery_warm_policy: true,
        base_seed: 0,
    }
}

/// Full Monte-Carlo study setup for the racing benchmark.
pub fn build_study_setup(cfg: &RacingSection, build: &RacingBuild) -> StudySetup {
    StudySetup {
        system: build.system.clone(),
        spec: build.spec.clone(),
        racing: cfg.spec.clone(),
        policy: build.policy.clone(),
        cert: Arc::clone(&build.certificate),
        switch: racing_switch_config(cfg),
        baseline_mppi: cfg.baseline_mppi.to_config(WarmStartSource::Previous),
        goal_cost: CostModel::GoalRacing {
            aim_y: cfg.goal_aim_y,
            weight: cfg.goal_weight,
            corridor: cfg.spec.corridor_half_width,
        },
        soft_cost: CostModel::SoftRacing {
            racing: cfg.spec.clone(),
            aim_y: cfg.goal_aim_y,
            weight: cfg.goal_weight,
            penalty: cfg.soft_penalty,
        },
        cbf: cfg.cbf.clone(),
        success: SuccessRule::GateCrossing {
            corridor_half_width: cfg.spec.corridor_half_width,
        },
        max_steps: cfg.max_steps,
        trials: cfg.trials,
        seed: cfg.experiment_seed,
        ic: cfg.ic.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let root = RootConfig::default();
        let text = root.to_toml().unwrap();
        let back: RootConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.scenario.epsilon, 0.1);
        assert_eq!(back.racing.trials, 500);
        assert_eq!(back.lowdim.horizon, 10);
    }

    #[test]
    fn partial_config_fills_with_defaults() {
        let text = "[racing]\ntrials = 12\n";
        let root: RootConfig = toml::from_str(text).unwrap();
        assert_eq!(root.racing.trials, 12);
        assert_eq!(root.racing.max_steps, 300);
        assert_eq!(root.scenario.beta, 0.001);
    }

    #[test]
    fn lowdim_build_produces_a_nonempty_certificate() {
        let root = RootConfig::default();
        let build = build_lowdim(&root.lowdim, &root.scenario.as_config(), 5).unwrap();
        assert_eq!(build.profile.sample_count, 159);
        assert!(build.certificate.certified_count() > 0);
        assert!(build.certificate.boundary_count() > 0);
        // Deviation bounds start within the ball radius and are finite.
        assert!(build.profile.deltas[0] <= root.lowdim.eps_x + 1e-12);
        assert!(build.profile.deltas.iter().all(|d| d.is_finite()));
    }
}
