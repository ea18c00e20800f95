//! Temporary soft-penalty probe (removed before finalization).

use rayon::prelude::*;
use reachcert::config::{build_racing, build_study_setup, RootConfig};
use reachcert::harness::{run_method_episode, MethodId};
use reachcert::hierarchy::Outcome;
use reachcert::mppi::CostModel;

#[test]
#[ignore]
fn probe_soft_penalty() {
    let root = RootConfig::default();
    let build = build_racing(&root.racing, &root.scenario.as_config(), 11).unwrap();
    let base = build_study_setup(&root.racing, &build);
    for penalty in [0.0, 2.0, 50.0] {
        let mut setup = base.clone();
        setup.soft_cost = CostModel::SoftRacing {
            racing: root.racing.spec.clone(),
            aim_y: root.racing.goal_aim_y,
            weight: root.racing.goal_weight,
            penalty,
        };
        let out: Vec<Outcome> = (0..80u64)
            .into_par_iter()
            .map(|i| {
                let x0 = setup.ic.sample(setup.seed, i);
                run_method_episode(&setup, MethodId::MppiSoft, i * 31 + 5, &x0)
                    .unwrap()
                    .outcome
            })
            .collect();
        let wins = out.iter().filter(|o| **o == Outcome::Success).count();
        let colls = out.iter().filter(|o| **o == Outcome::Collision).count();
        println!("penalty {penalty:5}: wins {wins}/80 colls {colls} timeouts {}", 80 - wins - colls);
    }
}
