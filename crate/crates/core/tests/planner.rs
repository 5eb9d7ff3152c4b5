use dsfuse_core::error::Error;
use dsfuse_core::fused::{count_intermediate_traffic, BlockExec};
use dsfuse_core::memsim::{LevelPair, TensorClass};
use dsfuse_core::model::{LayerGeometry, MemHierarchy};
use dsfuse_core::net::{builtin, Layer, NetworkGraph};
use dsfuse_core::planner::{optimize, optimize_bruteforce, replay, FusionPlan, NodeSpec, Objective, PlannerConfig};
use dsfuse_core::synth;

fn chain(name: &str, input: (usize, usize, usize), geoms: &[LayerGeometry]) -> NetworkGraph {
    let layers = geoms.iter().enumerate().map(|(i, g)| Layer { name: format!("l{i}"), geometry: *g, skip_from: None, shift: None }).collect();
    NetworkGraph { name: name.into(), input, layers }
}

#[test]
fn mv1_searches_8192_combinations() {
    let p = optimize(&builtin("mv1-224").unwrap(), &MemHierarchy::gap8(), &PlannerConfig::default()).unwrap();
    assert_eq!(p.search.blocks, 13);
    assert_eq!(p.search.combinations, 8192);
}

#[test]
fn network_without_dw_is_all_unfused() {
    let g = chain("convs", (16, 16, 3), &[LayerGeometry::conv(16, 16, 3, 8, 3, 1, 1).unwrap(), LayerGeometry::pw(16, 16, 8, 8).unwrap()]);
    let p = optimize(&g, &MemHierarchy::gap8(), &PlannerConfig::default()).unwrap();
    assert_eq!(p.fused_count(), 0);
    assert_eq!(p.search.combinations, 1);
    assert_eq!(p.predicted, p.baseline);
}

#[test]
fn plan_replays_exactly_after_json_round_trip() {
    for name in ["mv1-128", "dscnn"] {
        for objective in [Objective::Latency, Objective::Transfers] {
            let cfg = PlannerConfig { objective, ..Default::default() };
            let p = optimize(&builtin(name).unwrap(), &MemHierarchy::gap8(), &cfg).unwrap();
            let back = FusionPlan::from_json(&p.to_json()).unwrap();
            assert_eq!(back, p);
            assert_eq!(replay(&back).unwrap(), p.predicted);
        }
    }
}

#[test]
fn tampered_plan_fails_replay() {
    let mut p = optimize(&builtin("dscnn").unwrap(), &MemHierarchy::gap8(), &PlannerConfig::default()).unwrap();
    p.nodes[1].cost.total_cycles += 1;
    assert!(matches!(replay(&p), Err(Error::Oracle(_))));
}

#[test]
fn peak_l1_equals_the_resident_set() {
    let p = optimize(&builtin("mv2-128").unwrap(), &MemHierarchy::gap8(), &PlannerConfig::default()).unwrap();
    for n in &p.nodes {
        assert_eq!(n.cost.peak_l1_bytes, n.tiling.resident.total(), "{}", n.name);
        assert!(n.cost.peak_l1_bytes <= p.hierarchy.l1());
    }
}

#[test]
fn unfused_intermediate_traffic_matches_the_block_counter() {
    let dw = LayerGeometry::dw(16, 16, 32, 3, 1, 1).unwrap();
    let pw = LayerGeometry::pw(16, 16, 32, 64).unwrap();
    let g = chain("pair", (16, 16, 32), &[dw, pw]);
    let cfg = PlannerConfig { max_blocks: 0, ..Default::default() };
    assert!(matches!(optimize(&g, &MemHierarchy::gap8(), &cfg), Err(Error::SearchTooLarge { blocks: 1, cap: 0 })));
    let p = optimize(&g, &MemHierarchy::gap8(), &PlannerConfig::default()).unwrap();
    let inter = p.baseline.ledger.class_bytes(LevelPair::L2L1, TensorClass::Intermediate);
    assert_eq!(inter, count_intermediate_traffic(BlockExec::Unfused, &dw, &pw, None));
    assert_eq!(inter, 2 * 16 * 16 * 32);
    if p.fused_count() == 1 {
        assert_eq!(p.tensor_traffic(1).unwrap(), 0);
        assert_eq!(p.predicted.ledger.class_total(TensorClass::Intermediate), 0);
    }
}

#[test]
fn mv1_224_latency_plan_mixes_strategies() {
    let p = optimize(&builtin("mv1-224").unwrap(), &MemHierarchy::gap8(), &PlannerConfig::default()).unwrap();
    let mut kinds: Vec<String> = p.nodes.iter().filter_map(|n| n.spec.scheme()).map(|s| s.name().to_string()).collect();
    kinds.sort();
    kinds.dedup();
    assert!(kinds.len() >= 2, "{kinds:?}");
}

#[test]
fn bruteforce_matches_on_synthetic_networks() {
    let mut rng = synth::rng(7);
    for i in 0..6 {
        let g = synth::network(&mut rng, &format!("syn{i}"), 2 + i);
        for objective in [Objective::Latency, Objective::Transfers] {
            let cfg = PlannerConfig { objective, ..Default::default() };
            let h = MemHierarchy::gap8().with_l1(16 * 1024);
            let fast = optimize(&g, &h, &cfg).unwrap();
            let slow = optimize_bruteforce(&g, &h, &cfg).unwrap();
            assert_eq!(fast.predicted, slow.predicted);
            assert_eq!(fast.nodes.iter().map(|n| n.spec).collect::<Vec<NodeSpec>>(), slow.nodes.iter().map(|n| n.spec).collect::<Vec<_>>());
        }
    }
}

#[test]
fn plans_dominate_their_seeds() {
    for name in ["mv1-96", "dscnn"] {
        for objective in [Objective::Latency, Objective::Transfers] {
            let cfg = PlannerConfig { objective, ..Default::default() };
            let p = optimize(&builtin(name).unwrap(), &MemHierarchy::gap8(), &cfg).unwrap();
            let v = objective.value(&p.predicted);
            assert!(v <= p.seeds.unfused && v <= p.seeds.all_dwpw && v <= p.seeds.all_pwdw);
        }
    }
}
