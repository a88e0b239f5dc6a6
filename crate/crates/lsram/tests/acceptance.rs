//! Release gate: one test per acceptance criterion, each printing a single
//! pass/fail line (visible with `--nocapture`). Exact algorithmic claims are
//! checked against independent oracles; simulation claims are checked as
//! orderings on fixed-seed synthetic workloads.

use std::collections::BTreeMap;
use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use lsram::alloc::required_blocks;
use lsram::graph::shared_services;
use lsram::{
    allocate_chain, init_shared_slo, run_simulation, synthesize_trace, update_shared_slo,
    AllocationConfig, AllocationPlan, Chain, ChainNode, CompositeKind, EntryPoint, ForecasterSpec,
    HpaConfig, LlpProfile, OctModel, OscillationWindow, PlanController, Policy, ServiceGraph,
    SimConfig, TraceKind, TraceParams, TrafficShares, UpdatePolicy,
};

/// Print the criterion's verdict line, then fail the test if anything broke.
fn verdict(label: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("{label}: pass");
    } else {
        println!("{label}: FAIL");
        panic!("{label}:\n  {}", failures.join("\n  "));
    }
}

fn profile(name: &str, tau: f64, mu: f64, sigma: f64) -> LlpProfile {
    LlpProfile::parametric(name, tau, mu, sigma).unwrap()
}

fn atomic_chain(id: &str, slo: f64, n: usize) -> Chain {
    Chain {
        id: id.into(),
        slo_ms: slo,
        members: (0..n).map(ChainNode::Atomic).collect(),
    }
}

fn linear_graph(services: &[(&str, f64, f64, f64)], entries: &[(&str, &str, f64)]) -> ServiceGraph {
    let svcs = services
        .iter()
        .map(|&(n, t, m, s)| (profile(n, t, m, s), CompositeKind::Sequential))
        .collect();
    let edges = services
        .windows(2)
        .map(|w| (w[0].0.to_string(), w[1].0.to_string()))
        .collect();
    let entry_points = entries
        .iter()
        .map(|&(id, root, slo)| EntryPoint {
            id: id.into(),
            root: root.into(),
            slo_ms: slo,
        })
        .collect();
    ServiceGraph::new(svcs, edges, entry_points).unwrap()
}

/// Criterion 1: on small block counts the gradient descent must land on the
/// globally cheapest partition, checked by enumerating every feasible split
/// with shared cost arithmetic so equality is exact.
#[test]
fn ac1_greedy_allocation_matches_exhaustive_search() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC01);
    let mut failures = Vec::new();

    for case in 0..200 {
        let n = rng.gen_range(2..=3usize);
        let profiles: Vec<LlpProfile> = (0..n)
            .map(|i| {
                let tau = rng.gen_range(5.0..=50.0);
                let mu = rng.gen_range(20.0..=200.0);
                let sigma = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
                profile(&format!("s{i}"), tau, mu, sigma)
            })
            .collect();
        let d: u32 = rng.gen_range(20..=60);
        let tau_sum: f64 = profiles.iter().map(|p| p.tau_ms).sum();
        let slo = tau_sum * 1.05 * rng.gen_range(2.0..6.0);
        let chain = atomic_chain(&format!("c{case}"), slo, n);
        let cfg = AllocationConfig {
            blocks: d,
            preallocated_blocks: 1,
            ..AllocationConfig::default()
        };

        let plan = match allocate_chain(&profiles, &chain, &cfg) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("case {case}: allocation failed: {e}"));
                continue;
            }
        };
        let block = plan.block_ms;
        let ks: Vec<u64> = plan
            .member_budgets_ms
            .iter()
            .map(|s| (s / block).round() as u64)
            .collect();
        if ks.iter().sum::<u64>() != d as u64 {
            failures.push(format!("case {case}: blocks sum to {} not {d}", ks.iter().sum::<u64>()));
            continue;
        }

        // Both sides priced by the same expression so the comparison carries
        // no tolerance at all.
        let cost_of = |ks: &[u64]| -> f64 {
            ks.iter()
                .zip(&profiles)
                .map(|(&k, p)| {
                    let s = k as f64 * block;
                    p.sigma / (p.mu_rps * (1.0 - p.tau_ms / s))
                })
                .sum()
        };
        let mins: Vec<u64> = profiles
            .iter()
            .map(|p| required_blocks(p.tau_ms, block, cfg.preallocated_blocks, cfg.extremum_epsilon))
            .collect();
        let free = d as u64 - mins.iter().sum::<u64>();
        let mut best = f64::INFINITY;
        match n {
            2 => {
                for e0 in 0..=free {
                    let c = cost_of(&[mins[0] + e0, mins[1] + free - e0]);
                    if c < best {
                        best = c;
                    }
                }
            }
            3 => {
                for e0 in 0..=free {
                    for e1 in 0..=(free - e0) {
                        let c = cost_of(&[mins[0] + e0, mins[1] + e1, mins[2] + free - e0 - e1]);
                        if c < best {
                            best = c;
                        }
                    }
                }
            }
            _ => unreachable!(),
        }

        let got = cost_of(&ks);
        if got != best {
            failures.push(format!(
                "case {case}: greedy cost {got} vs exhaustive optimum {best} (blocks {ks:?})"
            ));
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    if elapsed >= 60.0 {
        failures.push(format!("took {elapsed:.1}s, budget is 60s"));
    }
    verdict(
        "AC1 greedy allocation equals exhaustive optimum on 200 random chains",
        &failures,
    );
}

/// Criterion 2: budgets always add up to the SLO to one ulp, scaling targets
/// follow the square-root transform, and target sums never undercut the SLO.
#[test]
fn ac2_conservation_and_target_invariants() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC02);
    let mut failures = Vec::new();

    for case in 0..1000 {
        let n = rng.gen_range(1..=5usize);
        let profiles: Vec<LlpProfile> = (0..n)
            .map(|i| {
                let tau = rng.gen_range(5.0..=50.0);
                let mu = rng.gen_range(20.0..=200.0);
                let sigma = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
                profile(&format!("s{i}"), tau, mu, sigma)
            })
            .collect();
        let tau_sum: f64 = profiles.iter().map(|p| p.tau_ms).sum();
        let slo = tau_sum * rng.gen_range(8.0..30.0);
        let d: u32 = rng.gen_range(100..=1500);
        let chain = atomic_chain(&format!("c{case}"), slo, n);
        let cfg = AllocationConfig {
            blocks: d,
            ..AllocationConfig::default()
        };

        let plan = match allocate_chain(&profiles, &chain, &cfg) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("case {case}: allocation failed: {e}"));
                continue;
            }
        };

        let sum: f64 = plan.member_budgets_ms.iter().sum();
        if (sum - slo).abs() > slo * f64::EPSILON {
            failures.push(format!(
                "case {case}: budgets sum to {sum}, SLO {slo}, off by {} ulps",
                (sum - slo).abs() / (slo * f64::EPSILON)
            ));
        }
        let mut pslo_sum = 0.0;
        for m in &plan.members {
            let want = (slo * m.s_ms).sqrt();
            if (m.pslo_ms - want).abs() > 1e-12 * want {
                failures.push(format!(
                    "case {case}: service {} target {} vs sqrt transform {want}",
                    m.name, m.pslo_ms
                ));
            }
            pslo_sum += m.pslo_ms;
        }
        if pslo_sum + slo * f64::EPSILON < slo {
            failures.push(format!(
                "case {case}: target sum {pslo_sum} fell below SLO {slo}"
            ));
        }
    }
    verdict(
        "AC2 budget conservation and target invariants on 1000 random chains",
        &failures,
    );
}

/// Criterion 3: shared-service blending unit examples — unweighted mean 50,
/// traffic-weighted 44, admission increment +10 at sharing degree 3 — plus
/// idempotence and full-shift convergence.
#[test]
fn ac3_shared_budget_blend_and_admission_examples() {
    let mut failures = Vec::new();
    fn check(failures: &mut Vec<String>, what: &str, got: f64, want: f64) {
        if (got - want).abs() > 1e-12 * want.abs() {
            failures.push(format!("{what}: got {got}, want {want}"));
        }
    }

    // Two chains meet in `s`; forge its per-chain budgets to 40 and 60.
    let g = ServiceGraph::new(
        vec![
            (profile("a", 10.0, 100.0, 1.0), CompositeKind::Sequential),
            (profile("b", 10.0, 100.0, 1.0), CompositeKind::Sequential),
            (profile("s", 10.0, 100.0, 1.0), CompositeKind::Sequential),
        ],
        vec![("a".into(), "s".into()), ("b".into(), "s".into())],
        vec![
            EntryPoint { id: "one".into(), root: "a".into(), slo_ms: 300.0 },
            EntryPoint { id: "two".into(), root: "b".into(), slo_ms: 500.0 },
        ],
    )
    .unwrap();
    let chains = g.extract_chains().unwrap();
    let shared = shared_services(&chains);
    let plan = AllocationPlan::build(&g, &chains, &AllocationConfig::default()).unwrap();
    let mut forged = plan.chains.clone();
    forged[0].service_mut("s").unwrap().s_ms = 40.0;
    forged[1].service_mut("s").unwrap().s_ms = 60.0;
    if forged[0].chain_id != "one" {
        forged.swap(0, 1);
        forged[0].service_mut("s").unwrap().s_ms = 40.0;
        forged[1].service_mut("s").unwrap().s_ms = 60.0;
    }

    check(
        &mut failures,
        "unweighted mean",
        init_shared_slo(&g, &forged, &shared)["s"],
        50.0,
    );

    let shares = TrafficShares::new(
        60.0,
        BTreeMap::from([("one".to_string(), 0.8), ("two".to_string(), 0.2)]),
    )
    .unwrap();
    let weighted = update_shared_slo(&g, &forged, &shared, &shares).unwrap();
    check(&mut failures, "weighted blend", weighted["s"], 44.0);

    // Pure functions of the same inputs: a second evaluation is identical.
    let again = update_shared_slo(&g, &forged, &shared, &shares).unwrap();
    if weighted != again {
        failures.push("weighted blend is not idempotent".into());
    }
    // All traffic on chain one drags the blend onto chain one's budget.
    let shifted = TrafficShares::new(
        60.0,
        BTreeMap::from([("one".to_string(), 1.0), ("two".to_string(), 0.0)]),
    )
    .unwrap();
    let full_shift = update_shared_slo(&g, &forged, &shared, &shifted).unwrap();
    if full_shift["s"] != 40.0 {
        failures.push(format!("full shift gave {}, want exactly 40", full_shift["s"]));
    }

    // Controller-level fixed point: reallocating twice under the same shares
    // must reproduce the plan bit for bit.
    let mut ctl = PlanController::new(
        g.clone(),
        AllocationConfig::default(),
        UpdatePolicy::default(),
    )
    .unwrap();
    let mix = TrafficShares::new(
        60.0,
        BTreeMap::from([("one".to_string(), 0.6), ("two".to_string(), 0.4)]),
    )
    .unwrap();
    ctl.set_shares(mix.clone());
    ctl.maybe_reallocate(1000.0, true).unwrap();
    let first = ctl.plan().clone();
    ctl.set_shares(mix);
    ctl.maybe_reallocate(2000.0, true).unwrap();
    if ctl.plan() != &first {
        failures.push("reallocation under unchanged shares moved the plan".into());
    }

    // Admission: `s` carries three chains; a sibling admitted into the
    // single-member chain of SLO 60 takes exactly half, so the shared budget
    // grows by 30 / 3 = 10.
    let g3 = ServiceGraph::new(
        vec![
            (profile("s", 1.0, 100.0, 1.0), CompositeKind::Sequential),
            (profile("b", 1.0, 100.0, 1.0), CompositeKind::Sequential),
            (profile("c", 1.0, 100.0, 1.0), CompositeKind::Sequential),
        ],
        vec![("b".into(), "s".into()), ("c".into(), "s".into())],
        vec![
            EntryPoint { id: "one".into(), root: "s".into(), slo_ms: 60.0 },
            EntryPoint { id: "two".into(), root: "b".into(), slo_ms: 200.0 },
            EntryPoint { id: "three".into(), root: "c".into(), slo_ms: 240.0 },
        ],
    )
    .unwrap();
    let mut ctl3 =
        PlanController::new(g3, AllocationConfig::default(), UpdatePolicy::default()).unwrap();
    let before = ctl3.plan().shared["s"];
    ctl3.admit_new_service("one", profile("newbie", 1.0, 100.0, 1.0), Some("s"))
        .unwrap();
    let slo_new = ctl3
        .plan()
        .chain("one")
        .unwrap()
        .service("newbie")
        .unwrap()
        .s_ms;
    check(&mut failures, "even split of the admitting chain", slo_new, 30.0);
    check(
        &mut failures,
        "admission increment",
        ctl3.plan().shared["s"] - before,
        10.0,
    );

    verdict(
        "AC3 shared-budget blend examples (mean 50, weighted 44, admission +10)",
        &failures,
    );
}

/// Criterion 4: the oscillation factor equals a direct coefficient-of-
/// variation computation on 1e5 random windows, and is exactly invariant
/// under power-of-two load scaling.
#[test]
fn ac4_oscillation_factor_matches_direct_cv() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC04);
    let mut failures = Vec::new();

    for case in 0..100_000 {
        let len = rng.gen_range(2..=64usize);
        let samples: Vec<f64> = (0..len).map(|_| rng.gen_range(0.1..1000.0)).collect();

        let mut w = OscillationWindow::new(len);
        for &x in &samples {
            w.push(x);
        }
        let got = w.oscillation_factor().unwrap();

        let mean = samples.iter().sum::<f64>() / len as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / len as f64;
        let want = var.sqrt() / mean;

        if (got - want).abs() > 1e-12 * want {
            failures.push(format!("case {case}: {got} vs direct {want}"));
            if failures.len() > 5 {
                break;
            }
        }
    }

    // Scaling every sample by a power of two is exact in floating point, so
    // the factor must not move by even one bit.
    for case in 0..1000 {
        let len = rng.gen_range(2..=64usize);
        let samples: Vec<f64> = (0..len).map(|_| rng.gen_range(0.1..1000.0)).collect();
        let mut w1 = OscillationWindow::new(len);
        let mut w2 = OscillationWindow::new(len);
        for &x in &samples {
            w1.push(x);
            w2.push(x * 4.0);
        }
        let (a, b) = (
            w1.oscillation_factor().unwrap(),
            w2.oscillation_factor().unwrap(),
        );
        if a != b {
            failures.push(format!("scale case {case}: {a} != {b}"));
            break;
        }
    }
    let mut w = OscillationWindow::new(2);
    w.push(50.0);
    w.push(150.0);
    if w.oscillation_factor().unwrap() != 0.5 {
        failures.push("window [50, 150] must give exactly 0.5".into());
    }

    verdict(
        "AC4 oscillation factor matches direct CV on 100000 random windows",
        &failures,
    );
}

/// Criterion 5: on a high-volatility trace the calibrated mode converter
/// both protects latency better than a deaf threshold (forced to the max)
/// and spends less than a trigger-happy one (forced to the min).
#[test]
fn ac5_mode_converter_beats_forced_thresholds() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let graph = linear_graph(&[("svc", 10.0, 100.0, 1.0)], &[("in", "svc", 45.0)]);
    // Noise is raised so calm-phase oscillation sits above the forced-min
    // threshold but below the calibrated one.
    let trace = synthesize_trace(
        TraceKind::HighVolatility,
        &["in".to_string()],
        720,
        4242,
        &TraceParams {
            noise_frac: Some(0.15),
            ..TraceParams::default()
        },
    )
    .unwrap();

    let run = |oct: OctModel| {
        let cfg = SimConfig {
            oct,
            ..SimConfig::default()
        };
        run_simulation(&graph, &trace, &cfg).unwrap().report
    };
    let calibrated = run(OctModel::default());
    let forced_max = run(OctModel {
        kappa: 4.0,
        oct_min: 0.8,
        oct_max: 0.8,
    });
    let forced_min = run(OctModel {
        kappa: 4.0,
        oct_min: 0.05,
        oct_max: 0.05,
    });

    if calibrated.mode_transitions.is_empty() {
        failures.push("calibrated run never switched modes".into());
    }
    if forced_max.violations <= calibrated.violations {
        failures.push(format!(
            "deaf threshold should violate more: forced-max {} vs calibrated {}",
            forced_max.violations, calibrated.violations
        ));
    }
    if forced_min.total_cost <= calibrated.total_cost {
        failures.push(format!(
            "trigger-happy threshold should cost more: forced-min {:.1} vs calibrated {:.1}",
            forced_min.total_cost, calibrated.total_cost
        ));
    }
    let elapsed = started.elapsed().as_secs_f64();
    if elapsed >= 30.0 {
        failures.push(format!("took {elapsed:.1}s, budget is 30s"));
    }

    println!(
        "     violations: calibrated {} / forced-max {}; cost: calibrated {:.0} / forced-min {:.0}",
        calibrated.violations, forced_max.violations, calibrated.total_cost, forced_min.total_cost
    );
    verdict(
        "AC5 volatility ablation orders violations and cost as designed",
        &failures,
    );
}

/// Criterion 6: over a diurnal day the end-to-end policy is cheapest, the
/// proportional split second, the utilization band last, while the end-to-end
/// policy never violates more than the band does. The required cost margin
/// over the band is at least 5%.
#[test]
fn ac6_policy_cost_ordering_on_a_diurnal_day() {
    let mut failures = Vec::new();

    // Profiles sized so the relaxed per-service targets clear the daily peak
    // (600 rps + 8% noise = 648) at a single instance: the end-to-end policy
    // holds n=1 all day with chain latency well under the SLO, while the
    // un-relaxed proportional targets cap "a" at 600 rps (must add a second
    // instance around the peak) and the utilization band pushes every service
    // to one instance per ~375 rps of load.
    let graph = linear_graph(
        &[
            ("a", 10.0, 750.0, 1.0),
            ("b", 15.0, 900.0, 1.0),
            ("c", 25.0, 1100.0, 1.0),
        ],
        &[("web", "a", 250.0)],
    );
    // One day-shaped cycle. The period is long enough that the sliding
    // window reads the ramp as trend, not oscillation: the worst-case window
    // CV (~0.05 combining slope and noise near the steepest stretch) stays
    // under the ~0.15 thresholds these profiles produce, so the mode
    // converter rightly sleeps all day.
    let trace = synthesize_trace(
        TraceKind::Diurnal,
        &["web".to_string()],
        3600,
        6,
        &TraceParams {
            base_rps: 400.0,
            period_s: Some(3600.0),
            ..TraceParams::default()
        },
    )
    .unwrap();

    let run = |policy: Policy| {
        let cfg = SimConfig {
            policy,
            ..SimConfig::default()
        };
        run_simulation(&graph, &trace, &cfg).unwrap().report
    };
    let lsram = run(Policy::Lsram);
    let prop = run(Policy::Proportional);
    let hpa = run(Policy::Hpa {
        config: HpaConfig {
            low: 0.3,
            high: 0.5,
            stabilization_s: 60.0,
        },
    });

    if !(lsram.total_cost < prop.total_cost) {
        failures.push(format!(
            "cost ordering: end-to-end {:.1} vs proportional {:.1}",
            lsram.total_cost, prop.total_cost
        ));
    }
    if !(prop.total_cost < hpa.total_cost) {
        failures.push(format!(
            "cost ordering: proportional {:.1} vs utilization band {:.1}",
            prop.total_cost, hpa.total_cost
        ));
    }
    if !(lsram.total_cost <= 0.95 * hpa.total_cost) {
        failures.push(format!(
            "margin: end-to-end {:.1} vs 0.95 x band {:.1}",
            lsram.total_cost,
            0.95 * hpa.total_cost
        ));
    }
    if !(lsram.violation_rate <= hpa.violation_rate) {
        failures.push(format!(
            "violation rates: end-to-end {} vs band {}",
            lsram.violation_rate, hpa.violation_rate
        ));
    }

    println!(
        "     cost: lsram {:.0}, prop {:.0}, hpa {:.0} (savings {:.1}% vs prop, {:.1}% vs hpa)",
        lsram.total_cost,
        prop.total_cost,
        hpa.total_cost,
        100.0 * (1.0 - lsram.total_cost / prop.total_cost),
        100.0 * (1.0 - lsram.total_cost / hpa.total_cost),
    );
    verdict("AC6 policy cost ordering on the diurnal trace", &failures);
}

/// Criterion 7: constant load, exact one-step forecast. Once instance counts
/// settle, every chain stays at or below its per-service target sum and no
/// tick violates over a 500-tick window.
#[test]
fn ac7_capacity_sufficiency_under_steady_load() {
    let mut failures = Vec::new();

    let svcs = vec![
        (profile("a1", 10.0, 100.0, 1.0), CompositeKind::Sequential),
        (profile("a2", 15.0, 80.0, 1.0), CompositeKind::Sequential),
        (profile("a3", 25.0, 60.0, 1.0), CompositeKind::Sequential),
        (profile("b1", 8.0, 120.0, 1.0), CompositeKind::Sequential),
        (profile("b2", 12.0, 90.0, 1.0), CompositeKind::Sequential),
    ];
    let edges = vec![
        ("a1".to_string(), "a2".to_string()),
        ("a2".to_string(), "a3".to_string()),
        ("b1".to_string(), "b2".to_string()),
    ];
    let entries = vec![
        EntryPoint { id: "one".into(), root: "a1".into(), slo_ms: 250.0 },
        EntryPoint { id: "two".into(), root: "b1".into(), slo_ms: 150.0 },
    ];
    let graph = ServiceGraph::new(svcs, edges, entries).unwrap();

    // 310 rps sits clear of every per-instance capacity multiple, so the
    // settled operating point has genuine slack under both SLOs rather than
    // riding a boundary.
    let trace = synthesize_trace(
        TraceKind::Steady,
        &["one".to_string(), "two".to_string()],
        502,
        7,
        &TraceParams {
            base_rps: 310.0,
            ..TraceParams::default()
        },
    )
    .unwrap();
    let cfg = SimConfig {
        forecaster: ForecasterSpec::Naive,
        ..SimConfig::default()
    };
    let out = run_simulation(&graph, &trace, &cfg).unwrap();

    // Per-chain target sums from the same allocation the simulator starts
    // from (steady traffic keeps it at that fixed point).
    let chains = graph.extract_chains().unwrap();
    let plan = AllocationPlan::build(&graph, &chains, &cfg.alloc).unwrap();
    let target_sum: BTreeMap<String, f64> = plan
        .chains
        .iter()
        .map(|cp| {
            (
                cp.chain_id.clone(),
                cp.members.iter().map(|m| m.pslo_ms).sum::<f64>(),
            )
        })
        .collect();

    // Convergence: the first tick after the last instance-count change.
    let mut converged_at = 0;
    for i in 1..out.ticks.len() {
        let moved = out.ticks[i]
            .services
            .iter()
            .any(|(name, st)| st.instances != out.ticks[i - 1].services[name].instances);
        if moved {
            converged_at = i;
        }
    }
    if converged_at > 10 {
        failures.push(format!(
            "instances still moving at tick {converged_at}, expected settling within 10"
        ));
    }
    let window = &out.ticks[converged_at..];
    if window.len() < 500 {
        failures.push(format!(
            "only {} settled ticks, need 500",
            window.len()
        ));
    }
    let mut violations = 0u64;
    for tick in window.iter().take(500) {
        for (id, ct) in &tick.chains {
            if ct.violated {
                violations += 1;
            }
            if ct.latency_ms > target_sum[id] + 1e-9 {
                failures.push(format!(
                    "t={}: chain {id} latency {} above its target sum {}",
                    tick.t_s, ct.latency_ms, target_sum[id]
                ));
            }
        }
    }
    if violations != 0 {
        failures.push(format!("{violations} violations in the settled window"));
    }
    failures.truncate(6);

    verdict(
        "AC7 steady-state capacity keeps every chain inside its target sum",
        &failures,
    );
}

/// Criterion 8: doubling the block count may at most 2.5x the allocation
/// wall time on the 13-service fixture graph (near-linear descent).
#[test]
fn ac8_allocation_time_scales_near_linearly_in_blocks() {
    let mut failures = Vec::new();

    let raw = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/sock_shop.json"
    ))
    .unwrap();
    let graph: ServiceGraph = serde_json::from_str(&raw).unwrap();
    let chains = graph.extract_chains().unwrap();

    let sample = |blocks: u32, reps: u32| -> f64 {
        let cfg = AllocationConfig {
            blocks,
            ..AllocationConfig::default()
        };
        let t0 = Instant::now();
        for _ in 0..reps {
            black_box(AllocationPlan::build(&graph, &chains, &cfg).unwrap());
        }
        t0.elapsed().as_secs_f64()
    };
    let measure = |reps: u32| -> (f64, f64) {
        // Interleaved rounds so machine load drifts hit both sides equally.
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        for _ in 0..5 {
            t1.push(sample(1000, reps));
            t2.push(sample(2000, reps));
        }
        t1.sort_by(f64::total_cmp);
        t2.sort_by(f64::total_cmp);
        (t1[2], t2[2])
    };

    sample(1000, 5);
    sample(2000, 5);
    let (mut med1, mut med2) = measure(30);
    if med2 > 2.5 * med1 {
        // One remeasure with more repetitions before declaring failure; the
        // bound itself does not move.
        let again = measure(90);
        med1 = again.0;
        med2 = again.1;
    }
    let ratio = med2 / med1;
    if ratio > 2.5 {
        failures.push(format!(
            "2000 blocks took {ratio:.2}x the 1000-block time (medians {med1:.4}s vs {med2:.4}s)"
        ));
    }

    println!(
        "     median build: d=1000 {:.1}ms, d=2000 {:.1}ms, ratio {ratio:.2}",
        med1 * 1000.0 / 30.0,
        med2 * 1000.0 / 30.0
    );
    verdict(
        "AC8 allocation wall time at d=2000 within 2.5x of d=1000",
        &failures,
    );
}

/// Criterion 9: the compare command is bit-deterministic — same flags and
/// seed, byte-identical report JSON.
#[test]
fn ac9_compare_runs_are_byte_identical() {
    let mut failures = Vec::new();

    let exe = env!("CARGO_BIN_EXE_lsram");
    let graph = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/linear.json");
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");

    let run = |args: &[&str]| {
        let out = std::process::Command::new(exe).args(args).output().unwrap();
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    run(&[
        "gen-trace",
        "--kind",
        "diurnal",
        "--duration",
        "600",
        "--graph",
        graph,
        "--seed",
        "11",
        "--out",
        trace.to_str().unwrap(),
    ]);

    let compare = |out: &std::path::Path| {
        run(&[
            "compare",
            "--graph",
            graph,
            "--trace",
            trace.to_str().unwrap(),
            "--policy",
            "lsram",
            "--policy",
            "prop",
            "--policy",
            "hpa:0.3,0.5",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
    };
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    compare(&r1);
    compare(&r2);

    let b1 = std::fs::read(&r1).unwrap();
    let b2 = std::fs::read(&r2).unwrap();
    if b1 != b2 {
        failures.push(format!(
            "reports differ: {} vs {} bytes",
            b1.len(),
            b2.len()
        ));
    }
    if b1.is_empty() {
        failures.push("report is empty".into());
    }

    verdict("AC9 compare twice with one seed gives identical bytes", &failures);
}
