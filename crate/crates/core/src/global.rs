//! Offline construction of the certified lower-bound value over a covering of
//! nominal states, and membership / boundary queries against the resulting
//! global safe set.

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::measure::RewardConstraintSpec;
use crate::reduction::Reduction;
use crate::scenario::SensitivityProfile;
use crate::spatial::KdTree;
use crate::systems::{rollout, Policy, State, System};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

pub const CERTIFICATE_FORMAT_VERSION: u32 = 1;

/// Lipschitz-deflated margins along a nominal rollout.
#[derive(Debug, Clone)]
pub struct CertifiedMargins {
    /// `r(x_t) - L_r * delta_t` per step.
    pub reward: Vec<f64>,
    /// `c(x_t) - L_c * delta_t` per step.
    pub constraint: Vec<f64>,
}

/// Deflate the margins of a rollout by the profile's deviation bounds.
pub fn certified_margins(
    spec: &RewardConstraintSpec,
    states: &[State],
    profile: &SensitivityProfile,
) -> CertifiedMargins {
    let mut reward = Vec::with_capacity(states.len());
    let mut constraint = Vec::with_capacity(states.len());
    for (t, x) in states.iter().enumerate() {
        reward.push(spec.reward_at(x) - spec.l_r * profile.deltas[t]);
        constraint.push(spec.constraint_at(x) - spec.l_c * profile.deltas[t]);
    }
    CertifiedMargins { reward, constraint }
}

/// Certified lower bound of the value at `x0`: roll the policy out for
/// `steps`, deflate margins by the deviation profile, and take
/// `max_t min(gamma^t r_t, min_{tau<=t} gamma^tau c_tau)` over the result.
pub fn certify_point(
    spec: &RewardConstraintSpec,
    system: &System,
    policy: &dyn Policy,
    profile: &SensitivityProfile,
    x0: &State,
    steps: usize,
) -> Result<f64> {
    if steps > profile.horizon {
        return Err(Error::Contract(format!(
            "certification horizon {steps} exceeds profile horizon {}",
            profile.horizon
        )));
    }
    let traj = rollout(system, x0, policy, steps)?;
    let margins = certified_margins(spec, &traj.states, profile);
    let mut best = f64::NEG_INFINITY;
    let mut worst_c = f64::INFINITY;
    let mut discount = 1.0;
    for t in 0..=steps {
        worst_c = worst_c.min(discount * margins.constraint[t]);
        best = best.max((discount * margins.reward[t]).min(worst_c));
        discount *= spec.gamma;
    }
    Ok(best)
}

/// How to lay out and bound the covering of nominal points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveringConfig {
    /// Covering domain in reduced coordinates.
    pub domain: BoxDomain,
    /// Requested grid spacing; must satisfy `spacing <= 2 * eps_x`.
    pub spacing: f64,
    /// Membership ball radius around each certified nominal.
    pub eps_x: f64,
    /// Certification horizon (steps).
    pub horizon: usize,
    /// Hard cap on the number of covering points.
    pub max_points: usize,
    /// Optional full-state slab; membership requires containment when set.
    pub full_domain: Option<BoxDomain>,
}

/// One covering nominal with its certified value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertRecord {
    /// Nominal point in reduced coordinates.
    pub point: Vec<f64>,
    /// Certified lower-bound value at this nominal.
    pub value: f64,
    /// Set on certified nominals adjacent to uncertified or out-of-domain space.
    pub boundary: bool,
}

impl CertRecord {
    pub fn certified(&self) -> bool {
        self.value >= 0.0
    }
}

/// Serializable payload of a certificate file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateData {
    pub format_version: u32,
    pub gamma: f64,
    pub horizon: usize,
    pub eps_x: f64,
    pub spacing: f64,
    pub policy_id: String,
    pub profile_fingerprint: u64,
    pub profile: SensitivityProfile,
    pub reduction: Reduction,
    pub domain: BoxDomain,
    pub full_domain: Option<BoxDomain>,
    pub records: Vec<CertRecord>,
}

/// A built certificate plus its spatial indexes.
#[derive(Debug, Clone)]
pub struct GlobalCertificate {
    data: CertificateData,
    /// Index over certified nominals; leaf i maps to `certified_ids[i]`.
    certified_tree: KdTree,
    certified_ids: Vec<usize>,
    /// Index over boundary nominals; leaf i maps to `boundary_ids[i]`.
    boundary_tree: KdTree,
    boundary_ids: Vec<usize>,
}

fn axis_grid(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let width = hi - lo;
    if width <= 0.0 {
        return vec![lo];
    }
    let n = (width / spacing).ceil() as usize + 1;
    (0..n)
        .map(|k| lo + width * (k as f64) / ((n - 1) as f64))
        .collect()
}

impl GlobalCertificate {
    /// Evaluate `certify_point` on every nominal of the covering grid, flag
    /// boundary nominals, and build the spatial indexes.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        spec: &RewardConstraintSpec,
        system: &System,
        policy: &dyn Policy,
        profile: &SensitivityProfile,
        reduction: &Reduction,
        covering: &CoveringConfig,
    ) -> Result<Self> {
        if covering.spacing <= 0.0 {
            return Err(Error::InvalidParameter("spacing must be positive".into()));
        }
        if covering.spacing > 2.0 * covering.eps_x {
            return Err(Error::InvalidParameter(format!(
                "spacing {} exceeds 2 * eps_x = {}; balls would not cover the grid",
                covering.spacing,
                2.0 * covering.eps_x
            )));
        }
        if covering.eps_x > profile.eps_x + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "membership radius {} exceeds the profile ball radius {}",
                covering.eps_x, profile.eps_x
            )));
        }
        let axes: Vec<Vec<f64>> = covering
            .domain
            .lo
            .iter()
            .zip(&covering.domain.hi)
            .map(|(&lo, &hi)| axis_grid(lo, hi, covering.spacing))
            .collect();
        let total: usize = axes.iter().map(|a| a.len()).product();
        if total > covering.max_points {
            return Err(Error::BudgetExceeded(format!(
                "covering would need {total} points, budget is {}",
                covering.max_points
            )));
        }

        // Enumerate the grid in row-major order.
        let dim = axes.len();
        let mut points: Vec<Vec<f64>> = Vec::with_capacity(total);
        let mut index = vec![0usize; dim];
        loop {
            points.push((0..dim).map(|i| axes[i][index[i]]).collect());
            let mut axis = dim;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                index[axis] += 1;
                if index[axis] < axes[axis].len() {
                    break;
                }
                index[axis] = 0;
                if axis == 0 {
                    break;
                }
            }
            if index.iter().all(|&i| i == 0) {
                break;
            }
        }
        debug_assert_eq!(points.len(), total);

        let values: Vec<f64> = points
            .par_iter()
            .map(|p| {
                let rho = DVector::from_vec(p.clone());
                let full = reduction.embed(&rho, None);
                certify_point(spec, system, policy, profile, &full, covering.horizon)
            })
            .collect::<Result<_>>()?;

        let mut records: Vec<CertRecord> = points
            .into_iter()
            .zip(values)
            .map(|(point, value)| CertRecord {
                point,
                value,
                boundary: false,
            })
            .collect();

        // Boundary flags: a certified nominal bordering uncertified space or
        // the domain edge.
        let all_tree = KdTree::build(
            records
                .iter()
                .map(|r| DVector::from_vec(r.point.clone()))
                .collect(),
        );
        let neighbor_radius = 1.5 * covering.spacing;
        let flags: Vec<bool> = records
            .par_iter()
            .map(|rec| {
                if !rec.certified() {
                    return false;
                }
                let p = DVector::from_vec(rec.point.clone());
                if covering.domain.margin(&p) < covering.spacing {
                    return true;
                }
                all_tree
                    .within(&p, neighbor_radius)
                    .into_iter()
                    .any(|j| !records[j].certified())
            })
            .collect();
        for (rec, flag) in records.iter_mut().zip(flags) {
            rec.boundary = flag;
        }

        let data = CertificateData {
            format_version: CERTIFICATE_FORMAT_VERSION,
            gamma: spec.gamma,
            horizon: covering.horizon,
            eps_x: covering.eps_x,
            spacing: covering.spacing,
            policy_id: policy.id().to_string(),
            profile_fingerprint: profile.fingerprint(),
            profile: profile.clone(),
            reduction: reduction.clone(),
            domain: covering.domain.clone(),
            full_domain: covering.full_domain.clone(),
            records,
        };
        Ok(Self::from_data(data))
    }

    /// Rebuild the spatial indexes from a deserialized payload.
    pub fn from_data(data: CertificateData) -> Self {
        let certified_ids: Vec<usize> = data
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.certified())
            .map(|(i, _)| i)
            .collect();
        let certified_tree = KdTree::build(
            certified_ids
                .iter()
                .map(|&i| DVector::from_vec(data.records[i].point.clone()))
                .collect(),
        );
        let boundary_ids: Vec<usize> = data
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.boundary)
            .map(|(i, _)| i)
            .collect();
        let boundary_tree = KdTree::build(
            boundary_ids
                .iter()
                .map(|&i| DVector::from_vec(data.records[i].point.clone()))
                .collect(),
        );
        Self {
            data,
            certified_tree,
            certified_ids,
            boundary_tree,
            boundary_ids,
        }
    }

    pub fn data(&self) -> &CertificateData {
        &self.data
    }

    pub fn policy_id(&self) -> &str {
        &self.data.policy_id
    }

    pub fn eps_x(&self) -> f64 {
        self.data.eps_x
    }

    pub fn reduction(&self) -> &Reduction {
        &self.data.reduction
    }

    pub fn certified_count(&self) -> usize {
        self.certified_ids.len()
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary_ids.len()
    }

    /// Exact ball-cover membership: true iff some certified nominal lies
    /// within `eps_x` of the reduced query (and the query is inside the
    /// declared domain).
    pub fn is_member(&self, x: &State) -> bool {
        let rho = self.data.reduction.reduce(x);
        if !self.data.domain.contains(&rho) {
            return false;
        }
        if let Some(full) = &self.data.full_domain {
            if !full.contains(x) {
                return false;
            }
        }
        self.certified_tree.any_within(&rho, self.data.eps_x)
    }

    /// Nearest boundary nominal (reduced coordinates) to the query state;
    /// ties break to the lowest record index.
    pub fn nearest_boundary(&self, x: &State) -> Result<State> {
        if self.boundary_ids.is_empty() {
            return Err(Error::NoBoundaryPoints(
                "certificate is trivially full or empty".into(),
            ));
        }
        let rho = self.data.reduction.reduce(x);
        let leaf = self
            .boundary_tree
            .nearest(&rho)
            .expect("non-empty boundary tree");
        Ok(DVector::from_vec(
            self.data.records[self.boundary_ids[leaf]].point.clone(),
        ))
    }

    /// All boundary nominals in record order (reduced coordinates).
    pub fn boundary_points(&self) -> Vec<State> {
        self.boundary_ids
            .iter()
            .map(|&i| DVector::from_vec(self.data.records[i].point.clone()))
            .collect()
    }

    /// Distance from the reduced query to the nearest certified ball
    /// (zero inside the certified region).
    pub fn distance_to_certified(&self, x: &State) -> Option<f64> {
        let rho = self.data.reduction.reduce(x);
        self.certified_tree
            .nearest(&rho)
            .map(|leaf| ((self.certified_tree.point(leaf) - rho).norm() - self.data.eps_x).max(0.0))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(&self.data)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let data: CertificateData = serde_json::from_str(&text)?;
        if data.format_version != CERTIFICATE_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported certificate format version {}",
                data.format_version
            )));
        }
        Ok(Self::from_data(data))
    }

    /// CSV export of the records for plotting: coordinates, value, boundary flag.
    pub fn to_csv(&self) -> String {
        let dim = self.data.domain.dim();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# gamma={} horizon={} eps_x={} policy={} profile={:016x}",
            self.data.gamma,
            self.data.horizon,
            self.data.eps_x,
            self.data.policy_id,
            self.data.profile_fingerprint
        );
        let cols: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        let _ = writeln!(out, "{},value,boundary", cols.join(","));
        for rec in &self.data.records {
            let coords: Vec<String> = rec.point.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(
                out,
                "{},{},{}",
                coords.join(","),
                rec.value,
                u8::from(rec.boundary)
            );
        }
        out
    }
}
