//! Monte-Carlo evaluation: success-rate studies across controller families,
//! violation-rate studies against an exhaustive oracle, and CSV emission.

use crate::cbf::{cbf_filter, CbfConfig};
use crate::error::{Error, Result};
use crate::global::GlobalCertificate;
use crate::hierarchy::{
    run_episode, run_hybrid_episode, CertifiedControlMode, EpisodeLog, Outcome, SuccessRule,
    SwitchConfig,
};
use crate::local::LocalCertificate;
use crate::measure::{rollout_value, RacingSpec, RewardConstraintSpec};
use crate::mppi::{mppi_step, shift_warm_start, CostModel, MppiConfig};
use crate::systems::{rollout, Control, Policy, State, System};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use std::fmt::Write as _;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Statistics helpers
// ---------------------------------------------------------------------------

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Clopper-Pearson one-sided upper confidence bound for a binomial rate.
pub fn clopper_pearson_upper(violations: usize, trials: usize, confidence: f64) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    if violations >= trials {
        return 1.0;
    }
    let beta = Beta::new((violations + 1) as f64, (trials - violations) as f64)
        .expect("valid beta parameters");
    beta.inverse_cdf(confidence)
}

// ---------------------------------------------------------------------------
// Success-rate studies
// ---------------------------------------------------------------------------

/// Controller families compared in the racing studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodId {
    Hybrid,
    MppiCbf,
    MppiSoft,
    SurrogateCbf,
    HybridAblationMppi,
    MppiPlain,
    MppiWarmstart,
    PolicyOnly,
}

impl MethodId {
    pub const ALL: [MethodId; 8] = [
        MethodId::Hybrid,
        MethodId::MppiCbf,
        MethodId::MppiSoft,
        MethodId::SurrogateCbf,
        MethodId::HybridAblationMppi,
        MethodId::MppiPlain,
        MethodId::MppiWarmstart,
        MethodId::PolicyOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Hybrid => "hybrid",
            MethodId::MppiCbf => "mppi-cbf",
            MethodId::MppiSoft => "mppi-soft",
            MethodId::SurrogateCbf => "surrogate-cbf",
            MethodId::HybridAblationMppi => "hybrid-ablation-mppi",
            MethodId::MppiPlain => "mppi-plain",
            MethodId::MppiWarmstart => "mppi-warmstart",
            MethodId::PolicyOnly => "policy-only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Joint initial-condition box: the ego state box plus an opponent offset box
/// (opponent = ego + offset, per coordinate).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RacingInitialConditions {
    pub ego_lo: [f64; 6],
    pub ego_hi: [f64; 6],
    pub rel_lo: [f64; 6],
    pub rel_hi: [f64; 6],
    /// Draws with a smaller initial ego/opponent planar separation are
    /// rejected and redrawn, so no episode starts in (or beyond the edge of)
    /// the downwash exclusion region.
    pub min_planar_separation: f64,
}

impl RacingInitialConditions {
    /// Initial condition for trial `index`, reproducible from the seed.
    pub fn sample(&self, seed: u64, index: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        loop {
            let mut x = DVector::zeros(12);
            for i in 0..6 {
                let ego = if self.ego_hi[i] > self.ego_lo[i] {
                    rng.random_range(self.ego_lo[i]..self.ego_hi[i])
                } else {
                    self.ego_lo[i]
                };
                let rel = if self.rel_hi[i] > self.rel_lo[i] {
                    rng.random_range(self.rel_lo[i]..self.rel_hi[i])
                } else {
                    self.rel_lo[i]
                };
                x[i] = ego;
                x[6 + i] = ego + rel;
            }
            let dpx = x[0] - x[6];
            let dpy = x[2] - x[8];
            if (dpx * dpx + dpy * dpy).sqrt() >= self.min_planar_separation {
                return x;
            }
        }
    }
}

/// Everything a racing study needs to drive every controller family.
#[derive(Clone)]
pub struct StudySetup {
    pub system: System,
    pub spec: RewardConstraintSpec,
    pub racing: RacingSpec,
    pub policy: Arc<dyn Policy>,
    pub cert: Arc<GlobalCertificate>,
    pub switch: SwitchConfig,
    pub baseline_mppi: MppiConfig,
    pub goal_cost: CostModel,
    pub soft_cost: CostModel,
    pub cbf: CbfConfig,
    pub success: SuccessRule,
    pub max_steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub ic: RacingInitialConditions,
}

fn mix_seed(a: u64, b: u64) -> u64 {
    (a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

/// One seeded episode of the given method from a fixed initial condition.
pub fn run_method_episode(
    setup: &StudySetup,
    method: MethodId,
    episode_seed: u64,
    x0: &State,
) -> Result<EpisodeLog> {
    let system = &setup.system;
    let spec = &setup.spec;
    match method {
        MethodId::Hybrid | MethodId::HybridAblationMppi => {
            let mut switch = setup.switch.clone();
            switch.base_seed = episode_seed;
            if method == MethodId::HybridAblationMppi {
                // Switching kept, the reachability policy removed everywhere:
                // certified tiers run goal MPPI, recovery starts cold, and
                // there is no policy to certify locally.
                switch.certified_control = CertifiedControlMode::GoalMppi {
                    mppi: setup.baseline_mppi.clone(),
                    cost: setup.goal_cost.clone(),
                };
                switch.enable_refinement = false;
                switch.recovery_warm_policy = false;
            }
            run_hybrid_episode(
                &switch,
                system,
                spec,
                setup.policy.as_ref(),
                &setup.cert,
                setup.success,
                setup.max_steps,
                x0,
            )
        }
        MethodId::PolicyOnly => run_episode(system, spec, setup.success, setup.max_steps, x0, {
            let policy = Arc::clone(&setup.policy);
            move |_, x| Ok((policy.control(x), None))
        }),
        MethodId::SurrogateCbf => {
            let policy = Arc::clone(&setup.policy);
            let cbf = setup.cbf.clone();
            let dt = system.dt();
            let bound = system.control_bound();
            run_episode(system, spec, setup.success, setup.max_steps, x0, {
                let system = system.clone();
                move |_, x| {
                    let u = system.clamp_control(&policy.control(x));
                    Ok((cbf_filter(&cbf, dt, bound, x, &u), None))
                }
            })
        }
        MethodId::MppiPlain | MethodId::MppiSoft | MethodId::MppiWarmstart | MethodId::MppiCbf => {
            let cost = match method {
                MethodId::MppiSoft => setup.soft_cost.clone(),
                _ => setup.goal_cost.clone(),
            };
            let policy = Arc::clone(&setup.policy);
            let cbf = setup.cbf.clone();
            let base = setup.baseline_mppi.clone();
            let dt = system.dt();
            let bound = system.control_bound();
            let mut warm: Option<Vec<Control>> = None;
            run_episode(system, spec, setup.success, setup.max_steps, x0, {
                let system = system.clone();
                move |step, x| {
                    let mut cfg = base.clone();
                    cfg.seed = mix_seed(episode_seed, step as u64);
                    let warm_seq: Option<Vec<Control>> = if method == MethodId::MppiWarmstart {
                        Some(rollout(&system, x, policy.as_ref(), cfg.horizon)?.controls)
                    } else {
                        warm.as_ref().map(|w| shift_warm_start(w))
                    };
                    let (u, seq) = mppi_step(&cfg, &cost, &system, x, warm_seq.as_deref())?;
                    warm = Some(seq);
                    let u = if method == MethodId::MppiCbf {
                        cbf_filter(&cbf, dt, bound, x, &u)
                    } else {
                        u
                    };
                    Ok((u, None))
                }
            })
        }
    }
}

/// Per-method outcome counts with a Wilson 95% interval on the success rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuccessTable {
    pub method: String,
    pub trials: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub success_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl SuccessTable {
    pub fn from_outcomes(method: MethodId, outcomes: &[Outcome]) -> Self {
        let trials = outcomes.len();
        let successes = outcomes.iter().filter(|o| **o == Outcome::Success).count();
        let collisions = outcomes.iter().filter(|o| **o == Outcome::Collision).count();
        let timeouts = trials - successes - collisions;
        let (lo, hi) = wilson_interval(successes, trials, 1.96);
        Self {
            method: method.name().to_string(),
            trials,
            successes,
            collisions,
            timeouts,
            success_rate: successes as f64 / trials.max(1) as f64,
            wilson_low: lo,
            wilson_high: hi,
        }
    }
}

/// Run the configured number of seeded episodes and aggregate outcomes.
/// Trials run in parallel; the aggregation is order-independent.
pub fn run_study(setup: &StudySetup, method: MethodId) -> Result<SuccessTable> {
    if setup.trials == 0 {
        return Err(Error::InvalidParameter("trial count must be >= 1".into()));
    }
    let outcomes: Vec<Outcome> = (0..setup.trials)
        .into_par_iter()
        .map(|i| -> Result<Outcome> {
            let x0 = setup.ic.sample(setup.seed, i as u64);
            let log = run_method_episode(setup, method, mix_seed(setup.seed, i as u64), &x0)?;
            Ok(log.outcome)
        })
        .collect::<Result<_>>()?;
    Ok(SuccessTable::from_outcomes(method, &outcomes))
}

// ---------------------------------------------------------------------------
// Exhaustive oracle for the low-dimensional benchmark
// ---------------------------------------------------------------------------

/// Exhaustive maximization of the rollout value over all open-loop control
/// sequences on a discretized control set. Exact for the queried state; cost
/// grows as `levels^T` (bounded by `budget`).
pub fn brute_force_value(
    system: &System,
    spec: &RewardConstraintSpec,
    x0: &State,
    steps: usize,
    control_levels: &[f64],
    budget: usize,
) -> Result<f64> {
    if system.control_dim() != 1 {
        return Err(Error::Contract(
            "the exhaustive oracle supports scalar-control systems".into(),
        ));
    }
    if control_levels.is_empty() {
        return Err(Error::InvalidParameter("need at least one control level".into()));
    }
    let total = (control_levels.len() as f64).powi(steps as i32);
    if total > budget as f64 {
        return Err(Error::BudgetExceeded(format!(
            "{} control sequences exceed the budget of {budget}",
            total
        )));
    }
    let mut best = f64::NEG_INFINITY;
    oracle_rec(
        system,
        spec,
        x0,
        steps,
        1.0,
        f64::INFINITY,
        control_levels,
        &mut best,
        None,
    )?;
    Ok(best)
}

/// Sign-only variant with early exit: true iff some control sequence reaches
/// the target safely (positive rollout value).
pub fn brute_force_reaches(
    system: &System,
    spec: &RewardConstraintSpec,
    x0: &State,
    steps: usize,
    control_levels: &[f64],
) -> Result<bool> {
    let mut best = f64::NEG_INFINITY;
    oracle_rec(
        system,
        spec,
        x0,
        steps,
        1.0,
        f64::INFINITY,
        control_levels,
        &mut best,
        Some(0.0),
    )?;
    Ok(best > 0.0)
}

#[allow(clippy::too_many_arguments)]
fn oracle_rec(
    system: &System,
    spec: &RewardConstraintSpec,
    x: &State,
    steps_left: usize,
    discount: f64,
    worst_c: f64,
    levels: &[f64],
    best: &mut f64,
    stop_above: Option<f64>,
) -> Result<()> {
    let worst_c = worst_c.min(discount * spec.constraint_at(x));
    let g = (discount * spec.reward_at(x)).min(worst_c);
    if g > *best {
        *best = g;
    }
    if let Some(threshold) = stop_above {
        if *best > threshold {
            return Ok(());
        }
    }
    // Every future measure is capped by the constraint prefix: nothing below
    // the incumbent can improve, so the branch is dead.
    if steps_left == 0 || worst_c <= *best {
        return Ok(());
    }
    let gamma = spec.gamma;
    for &u in levels {
        let control = DVector::from_vec(vec![u]);
        let next = system.step(x, &control)?;
        oracle_rec(
            system,
            spec,
            &next,
            steps_left - 1,
            discount * gamma,
            worst_c,
            levels,
            best,
            stop_above,
        )?;
        if let Some(threshold) = stop_above {
            if *best > threshold {
                return Ok(());
            }
        }
    }
    Ok(())
}

/// Grid of exact optimal values for the 1-axis double integrator, computed by
/// backward dynamic programming on the closed integer lattice the dynamics
/// induce (positions step by `v*dt`, velocities by `u*dt`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleTable {
    pub p_lo: f64,
    pub p_step: f64,
    pub np: usize,
    pub v_lo: f64,
    pub v_step: f64,
    pub nv: usize,
    pub horizon: usize,
    pub gamma: f64,
    /// Optimal values, row-major over (p index, v index).
    pub values: Vec<f64>,
}

impl OracleTable {
    /// Build the table for queries inside `[p_min, p_max] x [v_min, v_max]`,
    /// with enough padding to keep every reachable state on the grid.
    /// Controls are the three levels `{-u_max, 0, +u_max}`.
    pub fn build(
        spec: &RewardConstraintSpec,
        dt: f64,
        u_max: f64,
        p_min: f64,
        p_max: f64,
        v_min: f64,
        v_max: f64,
        horizon: usize,
    ) -> Self {
        let v_step = u_max * dt;
        let p_step = v_step * dt;
        let t = horizon as f64;
        // Velocity can drift by T*v_step; position by (|v|+T*v_step)*T*dt.
        // v_lo snaps to the velocity lattice so position transitions stay on
        // integer indices.
        let v_pad_lo = v_min - t * v_step;
        let v_pad_hi = v_max + t * v_step;
        let v_lo = (v_pad_lo / v_step).floor() * v_step;
        let v_reach = v_lo.abs().max(v_pad_hi.abs());
        let p_pad = (v_reach + 1.0) * t * dt;
        let p_lo = p_min - p_pad;
        let p_hi = p_max + p_pad;
        let np = ((p_hi - p_lo) / p_step).ceil() as usize + 2;
        let nv = ((v_pad_hi - v_lo) / v_step).ceil() as usize + 2;

        let coords = |ip: usize, iv: usize| -> State {
            DVector::from_vec(vec![p_lo + ip as f64 * p_step, v_lo + iv as f64 * v_step])
        };
        // Integer lattice index of v = 0 offsets position transitions.
        let iv_zero = (-v_lo / v_step).round() as i64;

        let mut current: Vec<f64> = (0..np * nv)
            .into_par_iter()
            .map(|idx| {
                let x = coords(idx / nv, idx % nv);
                spec.reward_at(&x).min(spec.constraint_at(&x))
            })
            .collect();

        for _ in 0..horizon {
            let next: Vec<f64> = (0..np * nv)
                .into_par_iter()
                .map(|idx| {
                    let (ip, iv) = (idx / nv, idx % nv);
                    let x = coords(ip, iv);
                    let r = spec.reward_at(&x);
                    let c = spec.constraint_at(&x);
                    let v_int = iv as i64 - iv_zero;
                    let mut best_next = f64::NEG_INFINITY;
                    for du in [-1i64, 0, 1] {
                        let ipn = ip as i64 + v_int;
                        let ivn = iv as i64 + du;
                        if ipn < 0 || ipn >= np as i64 || ivn < 0 || ivn >= nv as i64 {
                            continue;
                        }
                        let succ = current[ipn as usize * nv + ivn as usize];
                        best_next = best_next.max(succ);
                    }
                    if best_next.is_finite() {
                        c.min(r.max(spec.gamma * best_next))
                    } else {
                        c.min(r)
                    }
                })
                .collect();
            current = next;
        }

        Self {
            p_lo,
            p_step,
            np,
            v_lo,
            v_step,
            nv,
            horizon,
            gamma: spec.gamma,
            values: current,
        }
    }

    pub fn node_state(&self, ip: usize, iv: usize) -> State {
        DVector::from_vec(vec![
            self.p_lo + ip as f64 * self.p_step,
            self.v_lo + iv as f64 * self.v_step,
        ])
    }

    pub fn value(&self, ip: usize, iv: usize) -> f64 {
        self.values[ip * self.nv + iv]
    }

    /// Value at the nearest grid node.
    pub fn nearest_value(&self, x: &State) -> f64 {
        let ip = (((x[0] - self.p_lo) / self.p_step).round() as i64).clamp(0, self.np as i64 - 1);
        let iv = (((x[1] - self.v_lo) / self.v_step).round() as i64).clamp(0, self.nv as i64 - 1);
        self.value(ip as usize, iv as usize)
    }

    /// Smallest distance from `x` to a grid node with negative optimal value,
    /// restricted to a search radius.
    pub fn distance_to_unsafe(&self, x: &State, radius: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for ip in 0..self.np {
            let p = self.p_lo + ip as f64 * self.p_step;
            if (p - x[0]).abs() > radius {
                continue;
            }
            for iv in 0..self.nv {
                let v = self.v_lo + iv as f64 * self.v_step;
                let d = ((p - x[0]).powi(2) + (v - x[1]).powi(2)).sqrt();
                if d <= radius && self.value(ip, iv) < 0.0 {
                    best = Some(best.map_or(d, |b: f64| b.min(d)));
                }
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Violation-rate studies
// ---------------------------------------------------------------------------

/// Misclassification study result: point estimate plus a Clopper-Pearson
/// upper bound, judged against the configured risk level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskReport {
    pub samples: usize,
    pub members: usize,
    pub violations: usize,
    pub rate: f64,
    pub cp_upper_95: f64,
    pub epsilon: f64,
    pub pass: bool,
    /// True when no sample was a member (vacuous pass).
    pub vacuous: bool,
}

fn risk_report(samples: usize, members: usize, violations: usize, epsilon: f64) -> RiskReport {
    let rate = violations as f64 / samples.max(1) as f64;
    let cp = clopper_pearson_upper(violations, samples, 0.95);
    RiskReport {
        samples,
        members,
        violations,
        rate,
        cp_upper_95: cp,
        epsilon,
        pass: cp <= epsilon,
        vacuous: members == 0,
    }
}

/// Estimate the misclassification probability of a global certificate:
/// fresh samples from the domain, a violation being a certified member whose
/// true (oracle) value is negative. The oracle is only consulted on members.
pub fn violation_study_global(
    cert: &GlobalCertificate,
    domain: &crate::domain::BoxDomain,
    unsafe_oracle: &(dyn Fn(&State) -> Result<bool> + Sync),
    samples: usize,
    seed: u64,
    epsilon: f64,
) -> Result<RiskReport> {
    let points: Vec<State> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples).map(|_| domain.sample(&mut rng)).collect()
    };
    let flags: Vec<(bool, bool)> = points
        .par_iter()
        .map(|x| -> Result<(bool, bool)> {
            if !cert.is_member(x) {
                return Ok((false, false));
            }
            Ok((true, unsafe_oracle(x)?))
        })
        .collect::<Result<_>>()?;
    let members = flags.iter().filter(|(m, _)| *m).count();
    let violations = flags.iter().filter(|(m, v)| *m && *v).count();
    Ok(risk_report(samples, members, violations, epsilon))
}

/// Estimate the in-ball failure probability of a local certificate: fresh
/// samples in the certified ball, a violation being a rollout that fails to
/// reach safely under the bound policy.
#[allow(clippy::too_many_arguments)]
pub fn violation_study_local(
    lc: &LocalCertificate,
    cert: &GlobalCertificate,
    system: &System,
    spec: &RewardConstraintSpec,
    policy: &dyn Policy,
    horizon: usize,
    samples: usize,
    seed: u64,
    epsilon: f64,
) -> Result<RiskReport> {
    let center = State::from_vec(lc.center.clone());
    let reduction = cert.reduction();
    let points: Vec<State> = (0..samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            crate::domain::sample_ball(&center, lc.radius, &mut rng)
        })
        .collect();
    let failures: usize = points
        .par_iter()
        .map(|rho| -> Result<usize> {
            let full = reduction.embed(rho, None);
            let traj = rollout(system, &full, policy, horizon)?;
            Ok(usize::from(rollout_value(spec, &traj) <= 0.0))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(risk_report(samples, samples, failures, epsilon))
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

/// Deterministic CSV with a fixed column order; re-emission of the same rows
/// is byte-identical.
pub fn success_tables_to_csv(tables: &[SuccessTable]) -> String {
    let mut out = String::from(
        "method,trials,successes,collisions,timeouts,success_rate,wilson_low,wilson_high\n",
    );
    for t in tables {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.method,
            t.trials,
            t.successes,
            t.collisions,
            t.timeouts,
            t.success_rate,
            t.wilson_low,
            t.wilson_high
        );
    }
    out
}

/// Parse the output of [`success_tables_to_csv`].
pub fn success_tables_from_csv(text: &str) -> Result<Vec<SuccessTable>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty CSV".into()))?;
    if header
        != "method,trials,successes,collisions,timeouts,success_rate,wilson_low,wilson_high"
    {
        return Err(Error::Config("unexpected CSV header".into()));
    }
    let mut out = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Config(format!("bad CSV row: {line}")));
        }
        let parse_u = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Config(format!("bad integer '{s}': {e}")))
        };
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("bad float '{s}': {e}")))
        };
        out.push(SuccessTable {
            method: f[0].to_string(),
            trials: parse_u(f[1])?,
            successes: parse_u(f[2])?,
            collisions: parse_u(f[3])?,
            timeouts: parse_u(f[4])?,
            success_rate: parse_f(f[5])?,
            wilson_low: parse_f(f[6])?,
            wilson_high: parse_f(f[7])?,
        });
    }
    Ok(out)
}

pub fn write_text(path: &std::path::Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}
