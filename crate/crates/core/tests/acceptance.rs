//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::collections::HashMap;

use dsfuse_core::bench::{bench_kernels, block, cliffs, fd_range, kernel_label};
use dsfuse_core::exec::simulate;
use dsfuse_core::fused::{buffer_bytes, count_intermediate_traffic, run_fused, BlockExec, FusedOrder, FusedScheme, LayoutTriple, Tiling};
use dsfuse_core::model::{LayerGeometry, LayerKind, Layout, MemHierarchy};
use dsfuse_core::net::{builtin, BUILTIN_NAMES};
use dsfuse_core::planner::{check_fusible, fd_extent, fd_step, min_legal_fd, optimize, optimize_bruteforce, select_fd, FdPolicy, FdRule, FusionPlan, NodeSpec, Objective, PlannerConfig};
use dsfuse_core::reference::ref_block;
use dsfuse_core::synth;
use rand::Rng;

type Outcome = (bool, String);

fn criterion_1() -> Outcome {
    let conv = LayerGeometry::conv(56, 56, 32, 64, 3, 2, 1).unwrap();
    let dw = LayerGeometry::dw(56, 56, 32, 3, 2, 1).unwrap();
    let pw = LayerGeometry::pw(dw.ox, dw.oy, 32, 64).unwrap();
    let (std_macs, ds_macs) = (conv.macs(), dw.macs() + pw.macs());
    let ratio = std_macs as f64 / ds_macs as f64;
    let (std_w, ds_w) = (conv.weight_bytes(), dw.weight_bytes() + pw.weight_bytes());
    let ok = (conv.ox, conv.oy) == (28, 28)
        && std_macs == 14_450_688
        && ds_macs == 1_831_424
        && (ratio - 7.89).abs() <= 0.05
        && std_w == 18_432
        && ds_w == 2_336;
    (ok, format!("MACs {std_macs} vs {ds_macs} (ratio {ratio:.3}), weights {std_w} B vs {ds_w} B"))
}

struct Case {
    scheme: FusedScheme,
    a: LayerGeometry,
    b: LayerGeometry,
}

fn random_case(rng: &mut impl Rng, order: FusedOrder, tiling: Tiling, triple: LayoutTriple) -> Case {
    let (ix, iy) = (rng.random_range(6..=32), rng.random_range(6..=32));
    let c = rng.random_range(2..=24);
    let k = rng.random_range(2..=32);
    let f = if rng.random_bool(0.5) { 3 } else { 5 };
    let s = rng.random_range(1..=2);
    match order {
        FusedOrder::DwPw => {
            let a = LayerGeometry::dw(ix, iy, c, f, s, f / 2).unwrap();
            let b = LayerGeometry::pw(a.ox, a.oy, c, k).unwrap();
            let fd = rng.random_range(1..=a.oy.min(10));
            Case { scheme: FusedScheme::dwpw_rows(triple, fd).unwrap(), a, b }
        }
        FusedOrder::PwDw => {
            let a = LayerGeometry::pw(ix, iy, c, k).unwrap();
            let b = LayerGeometry::dw(ix, iy, k, f, s, f / 2).unwrap();
            let scheme = match tiling {
                Tiling::Channels => FusedScheme::pwdw_channels(triple, rng.random_range(1..=k.min(12))).unwrap(),
                Tiling::Rows => FusedScheme::pwdw_rows(triple, rng.random_range(f..=f + 8)).unwrap(),
            };
            Case { scheme, a, b }
        }
    }
}

fn ragged(c: &Case) -> bool {
    let fd = c.scheme.fd;
    match (c.scheme.order, c.scheme.tiling) {
        (FusedOrder::DwPw, _) => !c.a.oy.is_multiple_of(fd),
        (FusedOrder::PwDw, Tiling::Channels) => !c.a.k.is_multiple_of(fd),
        // The last tile of a row-wise run holds fewer fresh rows than the buffer.
        (FusedOrder::PwDw, Tiling::Rows) => !(c.b.iy + 2 * c.b.p).is_multiple_of(fd),
    }
}

/// Criteria 2 and 3 share the fuzzed cases.
fn criteria_2_3() -> (Outcome, Outcome) {
    const PER_SCHEME: usize = 500;
    let mut rng = synth::rng(0xacce);
    let mut ok2 = true;
    let mut ok3 = true;
    let mut detail = Vec::new();
    for (order, tiling) in [(FusedOrder::DwPw, Tiling::Rows), (FusedOrder::PwDw, Tiling::Channels), (FusedOrder::PwDw, Tiling::Rows)] {
        let mut failures = 0;
        let mut buf_failures = 0;
        let (mut ragged_n, mut s2, mut f5) = (0, 0, 0);
        for i in 0..PER_SCHEME {
            let triple = LayoutTriple::all()[i % 4];
            let c = random_case(&mut rng, order, tiling, triple);
            let pa = synth::layer_params(&c.a, &mut rng);
            let pb = synth::layer_params(&c.b, &mut rng);
            let x = synth::tensor(&mut rng, c.a.iy, c.a.ix, c.a.c, triple.input);
            let want = ref_block(&x, &pa, &pb).unwrap();
            let run = run_fused(&x, &pa, &pb, &c.scheme).unwrap();
            if !run.output.same_values(&want) {
                failures += 1;
            }
            let fd = c.scheme.fd as u64;
            let hand = match (order, tiling) {
                (FusedOrder::DwPw, _) => (c.a.c * c.a.ox) as u64 * fd,
                (FusedOrder::PwDw, Tiling::Channels) => fd * (c.a.ox * c.a.oy) as u64,
                (FusedOrder::PwDw, Tiling::Rows) => (c.b.c * c.b.ix) as u64 * fd,
            };
            if run.stats.buffer_bytes != hand || buffer_bytes(&c.scheme, &c.a, &c.b) != hand {
                buf_failures += 1;
            }
            ragged_n += usize::from(ragged(&c));
            let dw = if order == FusedOrder::DwPw { &c.a } else { &c.b };
            s2 += usize::from(dw.s == 2);
            f5 += usize::from(dw.fy == 5);
        }
        let name = FusedScheme::new(order, tiling, LayoutTriple::all()[0], 3).unwrap().name();
        ok2 &= failures == 0 && ragged_n > 0 && s2 > 0 && f5 > 0;
        ok3 &= buf_failures == 0;
        detail.push(format!("{name}: {PER_SCHEME} cases, {failures} mismatches, {ragged_n} ragged, {s2} stride-2, {f5} fy=5, {buf_failures} buffer-size errors"));
    }
    ((ok2, detail.join("; ")), (ok3, format!("buffer bytes equal C*OX*FD / FD*IX*IY / C*IX*FD in every case: {ok3}")))
}

fn criterion_4() -> Outcome {
    let h = MemHierarchy::gap8();
    let mut rng = synth::rng(0xfd);
    let mut bad = Vec::new();
    let mut rules: HashMap<FdRule, usize> = HashMap::new();
    let hwc = LayoutTriple::new(Layout::Hwc, Layout::Hwc, Layout::Hwc);
    for (order, tiling) in [(FusedOrder::DwPw, Tiling::Rows), (FusedOrder::PwDw, Tiling::Channels), (FusedOrder::PwDw, Tiling::Rows)] {
        let mut n = 0;
        while n < 100 {
            let c = random_case(&mut rng, order, tiling, hwc);
            let Ok(choice) = select_fd(&c.scheme, &c.a, &c.b, &h, FdPolicy::MinFullUtilization) else { continue };
            n += 1;
            *rules.entry(choice.rule).or_default() += 1;
            let step = fd_step(&c.scheme, &c.b, h.n_cores() as usize);
            let ok = match choice.rule {
                FdRule::Multiple => choice.fd % step == 0,
                FdRule::FullExtent => choice.fd == fd_extent(&c.scheme, &c.a, &c.b) && choice.fd < step,
                FdRule::SmallestLegal => choice.fd == min_legal_fd(&c.scheme, &c.b),
            };
            if !ok {
                bad.push(format!("{} fd={} step={step}", c.scheme.name(), choice.fd));
            }
        }
    }
    let dw = LayerGeometry::dw(32, 32, 32, 3, 1, 1).unwrap();
    let pw = LayerGeometry::pw(32, 32, 32, 64).unwrap();
    let dwpw = select_fd(&FusedScheme::default_dwpw(), &dw, &pw, &h, FdPolicy::default()).unwrap().fd;
    let pw2 = LayerGeometry::pw(32, 32, 32, 64).unwrap();
    let dw2 = LayerGeometry::dw(32, 32, 64, 3, 1, 1).unwrap();
    let pwdw = select_fd(&FusedScheme::default_pwdw(), &pw2, &dw2, &h, FdPolicy::default()).unwrap().fd;
    let mut r: Vec<String> = rules.iter().map(|(k, v)| format!("{k:?}={v}")).collect();
    r.sort();
    (bad.is_empty() && dwpw == 4 && pwdw == 8, format!("300 selections ({}), {} rule violations; gap8 defaults PWDW-Channels fd={pwdw}, DWPW-Rows fd={dwpw}", r.join(" "), bad.len()))
}

fn criterion_5() -> Outcome {
    let pw = LayerGeometry::pw(16, 16, 512, 512).unwrap();
    let dw = LayerGeometry::dw(16, 16, 512, 3, 1, 1).unwrap();
    let s = FusedScheme::pwdw_rows(LayoutTriple::new(Layout::Hwc, Layout::Chw, Layout::Hwc), 3).unwrap();
    let at = |l1: u64| check_fusible(&pw, &dw, &s, &MemHierarchy::gap8().with_l1(l1));
    let small = at(64 * 1024);
    let big = at(1 << 20).is_feasible();
    let mut monotone = true;
    let mut seen = false;
    for kb in (64..=1024).step_by(16) {
        let f = at(kb * 1024).is_feasible();
        monotone &= !(seen && !f);
        seen |= f;
    }
    let need = match &small {
        dsfuse_core::planner::Fusibility::Infeasible { resident, .. } => resident.total(),
        _ => 0,
    };
    (!small.is_feasible() && big && monotone, format!("64 kB: infeasible={} (needs {need} B), 1 MB: feasible={big}, monotone over 64 kB..1 MB: {monotone}", !small.is_feasible()))
}

fn criterion_6(plans: &HashMap<(String, Objective), FusionPlan>) -> Outcome {
    let mut worst = Vec::new();
    for ((name, obj), p) in plans {
        let v = obj.value(&p.predicted);
        if v > p.seeds.unfused || v > p.seeds.all_dwpw || v > p.seeds.all_pwdw || obj.value(&p.baseline) != p.seeds.unfused {
            worst.push(format!("{name}/{}", obj.name()));
        }
    }
    let mut rng = synth::rng(0xb007);
    let h = MemHierarchy::gap8().with_l1(24 * 1024);
    let mut mismatches = 0;
    let mut nets = 0;
    for m in 1..=10 {
        let g = synth::network(&mut rng, &format!("syn{m}"), m);
        for objective in [Objective::Latency, Objective::Transfers] {
            let cfg = PlannerConfig { objective, ..Default::default() };
            let fast = optimize(&g, &h, &cfg).unwrap();
            let slow = optimize_bruteforce(&g, &h, &cfg).unwrap();
            nets += 1;
            if objective.value(&fast.predicted) != objective.value(&slow.predicted) {
                mismatches += 1;
            }
        }
    }
    (worst.is_empty() && mismatches == 0, format!("{} builtin plans, dominance violations {:?}; brute force vs optimizer on {nets} synthetic runs: {mismatches} mismatches", plans.len(), worst))
}

fn criterion_7(plans: &HashMap<(String, Objective), FusionPlan>) -> Outcome {
    let reported = [("mv1-128", -47.74), ("mv1-224", -43.56), ("mv2-128", -52.97), ("mv2-224", -43.80), ("dscnn", -44.24)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, theirs) in reported {
        let p = &plans[&(name.to_string(), Objective::Transfers)];
        let (ours, base) = (p.predicted.ledger.activation_l2_l1(), p.baseline.ledger.activation_l2_l1());
        let mut inter = 0;
        for n in &p.nodes {
            if let NodeSpec::Fused { first, scheme } = n.spec {
                inter += p.tensor_traffic(first + 1).unwrap();
                inter += count_intermediate_traffic(BlockExec::Fused { scheme }, &p.network.layers[first].geometry, &p.network.layers[first + 1].geometry, None);
            }
        }
        ok &= ours < base && inter == 0 && p.fused_count() > 0;
        parts.push(format!("{name} {:+.2}% (reported {theirs:+.2}%), intermediate {inter} B", (ours as f64 / base as f64 - 1.0) * 100.0));
    }
    (ok, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let h = MemHierarchy::gap8();
    let report = bench_kernels("paper36", &h, false).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for base in FusedScheme::presets(1) {
        let label = kernel_label(&base);
        let medians = report.medians(&label);
        let (_, b) = block(base.order, &dsfuse_core::bench::paper36()[0]).unwrap();
        let step = fd_step(&base, &b, h.n_cores() as usize);
        let range = fd_range(&base);
        let lattice: Vec<usize> = range.clone().filter(|f| f % step == 0).collect();
        let on_lattice: Vec<f64> = medians.iter().filter(|(f, _)| lattice.contains(f)).map(|(_, m)| *m).collect();
        let monotone = on_lattice.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let expected: Vec<usize> = lattice.iter().copied().filter(|f| f < range.end()).collect();
        let found = cliffs(&medians);
        let cells_ok = report.cells.iter().filter(|c| c.kernel == label).all(|c| c.rows == 36);
        let good = monotone && found == expected && cells_ok;
        ok &= good;
        parts.push(format!("{label}: lattice {lattice:?} monotone={monotone}, cliffs {found:?} expected {expected:?}"));
    }
    (ok, parts.join("; "))
}

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in BUILTIN_NAMES {
        let g = builtin(name).unwrap();
        let dw = g.count(LayerKind::Dw);
        let (layers, blocks) = if name.starts_with("mv1") {
            (29, g.count(LayerKind::Dw))
        } else if name.starts_with("mv2") {
            (65, g.layers.iter().filter(|l| l.name.ends_with("_expand")).count())
        } else {
            (9, dw)
        };
        let want_blocks = if name.starts_with("mv1") { 13 } else if name.starts_with("mv2") { 16 } else { 4 };
        ok &= g.layers.len() == layers && blocks == want_blocks;
        parts.push(format!("{name} {} layers/{blocks} blocks", g.layers.len()));
    }
    let macs = builtin("mv1-224").unwrap().macs();
    let rel = (macs as f64 / 41.0e6 - 1.0).abs();
    ok &= rel <= 0.02;
    (ok, format!("{}; mv1-224 {macs} MACs ({:.2}% from 41.0M)", parts.join(", "), rel * 100.0))
}

fn criterion_10() -> Outcome {
    let h = MemHierarchy::gap8();
    let mut ok = true;
    for name in ["mv1-128", "dscnn"] {
        let g = builtin(name).unwrap();
        let cfg = PlannerConfig::default();
        let (p1, p2) = (optimize(&g, &h, &cfg).unwrap(), optimize(&g, &h, &cfg).unwrap());
        ok &= p1.to_json() == p2.to_json();
        let (s1, s2) = (simulate(&p1, 42).unwrap(), simulate(&p2, 42).unwrap());
        ok &= serde_json::to_string(&s1).unwrap() == serde_json::to_string(&s2).unwrap() && s1.ok();
    }
    (ok, "plan JSON and simulation reports byte-identical across repeated runs (mv1-128, dscnn, seed 42)".into())
}

#[test]
fn acceptance() {
    let h = MemHierarchy::gap8();
    let mut plans = HashMap::new();
    for name in BUILTIN_NAMES {
        let g = builtin(name).unwrap();
        for objective in [Objective::Latency, Objective::Transfers] {
            let cfg = PlannerConfig { objective, ..Default::default() };
            plans.insert((name.to_string(), objective), optimize(&g, &h, &cfg).unwrap());
        }
    }
    let (c2, c3) = criteria_2_3();
    let results = [
        criterion_1(),
        c2,
        c3,
        criterion_4(),
        criterion_5(),
        criterion_6(&plans),
        criterion_7(&plans),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    let mut failed = Vec::new();
    for (i, (ok, detail)) in results.iter().enumerate() {
        println!("criterion {:>2}: {}  {detail}", i + 1, if *ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
