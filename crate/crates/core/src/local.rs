//! Online local safe-set growth: certify the largest ball around the nearest
//! global-set boundary point in which sampled policy rollouts all reach safely.
//!
//! Shrink-and-resample loop: sample N states in the current ball, roll each
//! out under the policy, and on any failure shrink the radius to just exclude
//! the closest violation before resampling.

use crate::domain::sample_ball;
use crate::error::{Error, Result};
use crate::global::GlobalCertificate;
use crate::measure::{rollout_value, RewardConstraintSpec};
use crate::systems::{rollout, Policy, State, System};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Fresh samples per iteration.
    pub samples_per_iteration: usize,
    /// Initial (and maximal) ball radius.
    pub r_max: f64,
    /// Failure floor: shrinking below this radius aborts the refinement.
    pub r_min: f64,
    /// Iteration budget M.
    pub max_iterations: usize,
    /// Rollout horizon per sample.
    pub horizon: usize,
    pub seed: u64,
    /// Slack subtracted past the closest violation when shrinking, so the
    /// new ball strictly excludes it.
    pub shrink_slack: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            samples_per_iteration: 159,
            r_max: 0.5,
            r_min: 1e-3,
            max_iterations: 20,
            horizon: 10,
            seed: 0,
            shrink_slack: 1e-9,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_iteration < 1 {
            return Err(Error::InvalidParameter("need at least one sample per iteration".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter("need at least one iteration".into()));
        }
        if !(self.r_max > 0.0) {
            return Err(Error::InvalidParameter("r_max must be positive".into()));
        }
        Ok(())
    }
}

/// A certified ball in reduced coordinates, bound to one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalCertificate {
    /// Ball center: a boundary nominal of the global certificate.
    pub center: Vec<f64>,
    /// Certified radius r*.
    pub radius: f64,
    /// Policy the ball was certified for.
    pub policy_id: String,
    /// Iterations consumed by the growth loop.
    pub iterations: usize,
    /// Episode step at creation, when created online.
    pub created_step: Option<usize>,
    pub seed: u64,
    /// Untracked coordinates of the live state the samples were embedded
    /// around; the certificate is dropped when these drift beyond eps_x.
    pub anchor: Vec<f64>,
}

/// Closed-ball membership, gated on the certificate's policy binding.
pub fn local_member(lc: &LocalCertificate, policy_id: &str, rho: &State) -> Result<bool> {
    if lc.policy_id != policy_id {
        return Err(Error::PolicyMismatch {
            expected: lc.policy_id.clone(),
            actual: policy_id.to_string(),
        });
    }
    let center = State::from_vec(lc.center.clone());
    Ok((rho - center).norm() <= lc.radius)
}

/// Radius and violation count of one growth iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub radius: f64,
    pub violations: usize,
}

/// Result of a successful growth run: the certificate plus the per-iteration log.
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub certificate: LocalCertificate,
    pub iterations: Vec<IterationRecord>,
}

fn ball_samples(cfg: &RefineConfig, center: &State, radius: f64, iter: usize) -> Vec<State> {
    (0..cfg.samples_per_iteration)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(((iter as u64) << 32) | i as u64);
            sample_ball(center, radius, &mut rng)
        })
        .collect()
}

/// Algorithm: find the boundary point nearest the query state, then grow the
/// largest sampled-safe ball around it.
///
/// Returns a distinct error when the radius collapses below `r_min` (the
/// caller falls back to recovery control) or when the iteration budget is
/// exhausted without a violation-free pass.
pub fn iterative_growth(
    cfg: &RefineConfig,
    system: &System,
    spec: &RewardConstraintSpec,
    policy: &dyn Policy,
    cert: &GlobalCertificate,
    x_t: &State,
) -> Result<RefineOutcome> {
    cfg.validate()?;
    if cert.policy_id() != policy.id() {
        return Err(Error::PolicyMismatch {
            expected: cert.policy_id().to_string(),
            actual: policy.id().to_string(),
        });
    }
    let center = cert.nearest_boundary(x_t)?;
    let reduction = cert.reduction();
    let anchor = reduction.untracked(x_t);

    let mut radius = cfg.r_max;
    let mut log = Vec::new();
    for iter in 0..cfg.max_iterations {
        if radius < cfg.r_min {
            return Err(Error::RadiusCollapsed {
                radius,
                r_min: cfg.r_min,
            });
        }
        let samples = ball_samples(cfg, &center, radius, iter);
        let values: Vec<f64> = samples
            .par_iter()
            .map(|rho| -> Result<f64> {
                let full = reduction.embed(rho, Some(x_t));
                let traj = rollout(system, &full, policy, cfg.horizon)?;
                Ok(rollout_value(spec, &traj))
            })
            .collect::<Result<_>>()?;

        let mut violations = 0usize;
        let mut closest = f64::INFINITY;
        for (rho, &v) in samples.iter().zip(&values) {
            if v <= 0.0 {
                violations += 1;
                closest = closest.min((rho - &center).norm());
            }
        }
        log.push(IterationRecord { radius, violations });
        if violations == 0 {
            return Ok(RefineOutcome {
                certificate: LocalCertificate {
                    center: center.iter().copied().collect(),
                    radius,
                    policy_id: policy.id().to_string(),
                    iterations: iter + 1,
                    created_step: None,
                    seed: cfg.seed,
                    anchor: anchor.iter().copied().collect(),
                },
                iterations: log,
            });
        }
        radius = closest - cfg.shrink_slack;
    }
    Err(Error::IterationsExhausted {
        iterations: cfg.max_iterations,
    })
}

/// CSV rendering of a growth log: one `(iteration, radius, violations)` row,
/// then the final certificate record when the run succeeded.
pub fn growth_log_csv(log: &[IterationRecord], outcome: Option<&LocalCertificate>) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("iteration,radius,violations\n");
    for (i, rec) in log.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{}", rec.radius, rec.violations);
    }
    if let Some(lc) = outcome {
        let center: Vec<String> = lc.center.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(
            out,
            "# certificate policy={} r={} iterations={} center={}",
            lc.policy_id,
            lc.radius,
            lc.iterations,
            center.join(";")
        );
    }
    out
}
