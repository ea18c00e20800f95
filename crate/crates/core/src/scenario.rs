//! Scenario-optimization machinery: sample-complexity planning, scalar
//! scenario programs, and probabilistic trajectory-deviation bounding.

use crate::domain::{sample_ball, BoxDomain};
use crate::error::{Error, Result};
use crate::systems::{rollout, rollout_open, Policy, State, System};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Risk level, confidence parameter, and decision dimension of a scenario program.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Maximum allowed violation probability for unseen realizations.
    pub epsilon: f64,
    /// Confidence parameter: the guarantee holds with probability 1 - beta.
    pub beta: f64,
    /// Dimension of the decision variable.
    pub dimension: usize,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter("epsilon must lie in (0, 1)".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter("beta must lie in (0, 1)".into()));
        }
        if self.dimension < 1 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(())
    }
}

/// Pre-ceiling sample-complexity bound `(2/eps) * (ln(1/beta) + d)`.
pub fn required_samples_raw(cfg: &ScenarioConfig) -> f64 {
    (2.0 / cfg.epsilon) * ((1.0 / cfg.beta).ln() + cfg.dimension as f64)
}

/// Minimal integer number of scenarios satisfying the sample-complexity bound.
pub fn required_samples(cfg: &ScenarioConfig) -> Result<usize> {
    cfg.validate()?;
    Ok(required_samples_raw(cfg).ceil() as usize)
}

/// Optimal value of the scalar scenario program `min z s.t. s_i <= z` — the
/// sample maximum. Shared by the deviation bound and any scalar epigraph program.
pub fn scalar_scenario_max(samples: &[f64]) -> Result<f64> {
    samples
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, s| {
            Some(acc.map_or(s, |a| a.max(s)))
        })
        .ok_or_else(|| Error::Contract("scalar scenario program needs at least one sample".into()))
}

/// N i.i.d. (nominal, perturbed) state pairs: nominals uniform on the domain
/// box, perturbations uniform on the epsilon_x-ball around each nominal.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPairSet {
    pub nominal: Vec<State>,
    pub perturbed: Vec<State>,
    pub eps_x: f64,
    pub seed: u64,
    pub domain: BoxDomain,
}

impl ScenarioPairSet {
    pub fn len(&self) -> usize {
        self.nominal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nominal.is_empty()
    }
}

/// Draw `n` scenario pairs. Each pair index gets its own RNG substream, so
/// the set is reproducible and independent of iteration order.
pub fn sample_pairs(domain: &BoxDomain, eps_x: f64, n: usize, seed: u64) -> Result<ScenarioPairSet> {
    if eps_x < 0.0 {
        return Err(Error::InvalidParameter("eps_x must be nonnegative".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one pair".into()));
    }
    if domain.dim() == 0 {
        return Err(Error::DegenerateDomain("empty sampling domain".into()));
    }
    let mut nominal = Vec::with_capacity(n);
    let mut perturbed = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let x_bar = domain.sample(&mut rng);
        let x = sample_ball(&x_bar, eps_x, &mut rng);
        nominal.push(x_bar);
        perturbed.push(x);
    }
    Ok(ScenarioPairSet {
        nominal,
        perturbed,
        eps_x,
        seed,
        domain: domain.clone(),
    })
}

/// Per-time-step trajectory deviation bounds certified by scenario optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityProfile {
    /// Horizon T; `deltas` has length T+1.
    pub horizon: usize,
    /// `deltas[t]` bounds the Euclidean deviation at step t.
    pub deltas: Vec<f64>,
    /// Radius of the perturbation ball the pairs were drawn from.
    pub eps_x: f64,
    /// Number of scenario pairs behind the bound.
    pub sample_count: usize,
    pub seed: u64,
    /// Human-readable description of the sampling domain.
    pub domain: String,
}

impl SensitivityProfile {
    /// Stable 64-bit fingerprint of the profile contents (FNV-1a).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&(self.horizon as u64).to_le_bytes());
        eat(&self.eps_x.to_le_bytes());
        eat(&(self.sample_count as u64).to_le_bytes());
        eat(&self.seed.to_le_bytes());
        for d in &self.deltas {
            eat(&d.to_le_bytes());
        }
        h
    }

    /// CSV rendering: metadata header comments, then one `(t, delta)` row per step.
    pub fn to_csv(&self, epsilon: f64, beta: f64) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# seed={} n={} eps={} beta={} eps_x={} domain={}",
            self.seed, self.sample_count, epsilon, beta, self.eps_x, self.domain
        );
        let _ = writeln!(out, "t,delta");
        for (t, d) in self.deltas.iter().enumerate() {
            let _ = writeln!(out, "{t},{d}");
        }
        out
    }
}

/// Solve the per-step deviation scenario programs on one rollout pass.
///
/// For each pair: roll the nominal closed-loop under `policy` to record its
/// control sequence, replay that sequence open-loop from the perturbed state,
/// and take the per-step max pairwise distance — the exact optimum of the
/// scalar scenario program at every t.
pub fn bound_deviation(
    system: &System,
    policy: &dyn Policy,
    pairs: &ScenarioPairSet,
    steps: usize,
) -> Result<SensitivityProfile> {
    if pairs.is_empty() {
        return Err(Error::Contract("deviation bound needs at least one pair".into()));
    }
    if steps == 0 {
        return Err(Error::Contract("deviation bound needs at least one step".into()));
    }
    let per_pair: Vec<Vec<f64>> = pairs
        .nominal
        .par_iter()
        .zip(pairs.perturbed.par_iter())
        .map(|(x_bar, x)| -> Result<Vec<f64>> {
            let nominal = rollout(system, x_bar, policy, steps)?;
            let perturbed = rollout_open(system, x, &nominal.controls)?;
            Ok(nominal
                .states
                .iter()
                .zip(&perturbed.states)
                .map(|(a, b)| (a - b).norm())
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut deltas = vec![0.0; steps + 1];
    for (t, delta) in deltas.iter_mut().enumerate() {
        let column: Vec<f64> = per_pair.iter().map(|d| d[t]).collect();
        *delta = scalar_scenario_max(&column)?;
    }
    Ok(SensitivityProfile {
        horizon: steps,
        deltas,
        eps_x: pairs.eps_x,
        sample_count: pairs.len(),
        seed: pairs.seed,
        domain: format!("box{:?}x{:?}", pairs.domain.lo, pairs.domain.hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;

    struct ZeroPolicy(usize);
    impl Policy for ZeroPolicy {
        fn id(&self) -> &str {
            "zero"
        }
        fn control(&self, _x: &State) -> State {
            DVector::zeros(self.0)
        }
    }

    fn cfg(epsilon: f64, beta: f64, dimension: usize) -> ScenarioConfig {
        ScenarioConfig {
            epsilon,
            beta,
            dimension,
        }
    }

    #[test]
    fn sample_complexity_headline_value() {
        assert_eq!(required_samples(&cfg(0.1, 0.001, 1)).unwrap(), 159);
    }

    #[test]
    fn sample_complexity_log_inverse_beta() {
        assert_eq!(
            required_samples(&cfg(0.5, (-1.0_f64).exp(), 1)).unwrap(),
            8
        );
    }

    #[test]
    fn sample_complexity_is_linear_in_inverse_epsilon() {
        let base = required_samples_raw(&cfg(0.2, 0.01, 2));
        let halved = required_samples_raw(&cfg(0.1, 0.01, 2));
        assert_relative_eq!(halved, 2.0 * base, max_relative = 1e-12);
    }

    #[test]
    fn sample_complexity_rejects_bad_parameters() {
        assert!(required_samples(&cfg(0.0, 0.1, 1)).is_err());
        assert!(required_samples(&cfg(1.0, 0.1, 1)).is_err());
        assert!(required_samples(&cfg(0.1, 0.0, 1)).is_err());
        assert!(required_samples(&cfg(0.1, 1.0, 1)).is_err());
        assert!(required_samples(&cfg(0.1, 0.1, 0)).is_err());
    }

    #[test]
    fn scenario_max_basics() {
        assert_eq!(scalar_scenario_max(&[1.0, 2.0, 3.0]).unwrap(), 3.0);
        assert_eq!(scalar_scenario_max(&[4.25]).unwrap(), 4.25);
        assert!(scalar_scenario_max(&[]).is_err());
    }

    proptest! {
        #[test]
        fn scenario_max_is_the_minimal_feasible_bound(samples in prop::collection::vec(-1e6f64..1e6, 1..40)) {
            let z = scalar_scenario_max(&samples).unwrap();
            // Brute-force route: the smallest sample that dominates all others.
            let brute = samples
                .iter()
                .copied()
                .filter(|&c| samples.iter().all(|&s| s <= c))
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(z, brute);
        }

        #[test]
        fn scenario_max_is_permutation_invariant(samples in prop::collection::vec(-1e3f64..1e3, 1..20)) {
            let forward = scalar_scenario_max(&samples).unwrap();
            let mut reversed = samples.clone();
            reversed.reverse();
            prop_assert_eq!(forward, scalar_scenario_max(&reversed).unwrap());
        }
    }

    #[test]
    fn pairs_stay_inside_the_ball_and_replay_per_seed() {
        let domain = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let a = sample_pairs(&domain, 0.25, 200, 9).unwrap();
        let b = sample_pairs(&domain, 0.25, 200, 9).unwrap();
        assert_eq!(a, b);
        for (x_bar, x) in a.nominal.iter().zip(&a.perturbed) {
            assert!((x_bar - x).norm() <= 0.25 + 1e-12);
            assert!(a.domain.contains(x_bar));
        }
        let c = sample_pairs(&domain, 0.25, 200, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_radius_pairs_coincide() {
        let domain = BoxDomain::new(vec![0.0], vec![2.0]).unwrap();
        let pairs = sample_pairs(&domain, 0.0, 50, 3).unwrap();
        for (x_bar, x) in pairs.nominal.iter().zip(&pairs.perturbed) {
            assert_eq!(x_bar, x);
        }
    }

    #[test]
    fn nominal_mean_approaches_box_center() {
        let domain = BoxDomain::new(vec![-2.0, 1.0], vec![4.0, 5.0]).unwrap();
        let n = 10_000;
        let pairs = sample_pairs(&domain, 0.1, n, 1234).unwrap();
        let mut mean = DVector::zeros(2);
        for x in &pairs.nominal {
            mean += x;
        }
        mean /= n as f64;
        let center = domain.center();
        // Standard error of a uniform draw: width / sqrt(12 n).
        for i in 0..2 {
            let width = domain.hi[i] - domain.lo[i];
            let se = width / (12.0 * n as f64).sqrt();
            assert!(
                (mean[i] - center[i]).abs() <= 3.0 * se,
                "axis {i}: mean {} vs center {} (3 se = {})",
                mean[i],
                center[i],
                3.0 * se
            );
        }
    }

    #[test]
    fn deviation_bound_is_zero_for_identical_pairs() {
        let system = System::DoubleIntegrator {
            axes: 1,
            dt: 0.1,
            control_bound: 1.0,
        };
        let domain = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let pairs = sample_pairs(&domain, 0.0, 30, 5).unwrap();
        let profile = bound_deviation(&system, &ZeroPolicy(1), &pairs, 10).unwrap();
        assert!(profile.deltas.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn deviation_bound_matches_linear_closed_form() {
        // x' = a x with shared controls: deviations scale by |a|^t exactly.
        let a = 0.9;
        let system = System::Linear {
            a: vec![vec![a]],
            b: vec![vec![1.0]],
            dt: 0.1,
            control_bound: 1.0,
        };
        let domain = BoxDomain::new(vec![-1.0], vec![1.0]).unwrap();
        let pairs = sample_pairs(&domain, 0.3, 40, 7).unwrap();
        let steps = 12;
        let profile = bound_deviation(&system, &ZeroPolicy(1), &pairs, steps).unwrap();
        let max_initial = pairs
            .nominal
            .iter()
            .zip(&pairs.perturbed)
            .map(|(n, p)| (n - p).norm())
            .fold(0.0, f64::max);
        for t in 0..=steps {
            let expect = a.powi(t as i32) * max_initial;
            assert_relative_eq!(profile.deltas[t], expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn delta_zero_is_the_max_initial_distance() {
        let system = System::DoubleIntegrator {
            axes: 1,
            dt: 0.1,
            control_bound: 1.0,
        };
        let domain = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let pairs = sample_pairs(&domain, 0.2, 80, 21).unwrap();
        let profile = bound_deviation(&system, &ZeroPolicy(1), &pairs, 5).unwrap();
        let max_initial = pairs
            .nominal
            .iter()
            .zip(&pairs.perturbed)
            .map(|(n, p)| (n - p).norm())
            .fold(0.0, f64::max);
        assert_eq!(profile.deltas[0], max_initial);
        assert!(profile.deltas[0] <= 0.2 + 1e-12);
    }

    #[test]
    fn more_samples_never_shrink_the_bound() {
        let system = System::DoubleIntegrator {
            axes: 1,
            dt: 0.1,
            control_bound: 1.0,
        };
        let domain = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let big = sample_pairs(&domain, 0.2, 120, 33).unwrap();
        let small = ScenarioPairSet {
            nominal: big.nominal[..40].to_vec(),
            perturbed: big.perturbed[..40].to_vec(),
            ..big.clone()
        };
        let p_small = bound_deviation(&system, &ZeroPolicy(1), &small, 8).unwrap();
        let p_big = bound_deviation(&system, &ZeroPolicy(1), &big, 8).unwrap();
        for t in 0..=8 {
            assert!(p_big.deltas[t] >= p_small.deltas[t]);
        }
    }

    #[test]
    fn profile_replays_per_seed_and_renders_csv() {
        let system = System::DoubleIntegrator {
            axes: 1,
            dt: 0.1,
            control_bound: 1.0,
        };
        let domain = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let pairs = sample_pairs(&domain, 0.15, 50, 99).unwrap();
        let a = bound_deviation(&system, &ZeroPolicy(1), &pairs, 6).unwrap();
        let b = bound_deviation(&system, &ZeroPolicy(1), &pairs, 6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let csv = a.to_csv(0.1, 0.001);
        assert!(csv.starts_with("# seed=99 n=50 eps=0.1 beta=0.001 eps_x=0.15"));
        assert_eq!(csv.lines().count(), 2 + 7);
    }
}
