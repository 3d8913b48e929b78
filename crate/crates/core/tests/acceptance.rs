// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance suite. Each test prints one `criterion N ... pass`
//! line on success; a failure panics with the criterion number and reason.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use minihls::bench::{self, BenchSpec, Lcg, Model};
use minihls::frontend::{interpret, parse_dsl, Inputs, InterpOptions};
use minihls::ir::{parse_ir, print_ir, BankSpec, Program};
use minihls::passes::{bank_branch, lower_to_ir, synth_inputs, PassConfig, Strategy};
use minihls::pipeline::{
    compare_to_oracle, fixture_config, fixture_entry, fixture_factors, run_pipeline,
};
use minihls::resources::{count_branches, count_fsm_states};
use minihls::sim::{cross_check_conflicts, simulate, SimOptions};

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture_paths() -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures_dir())
        .expect("fixtures directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().map(|e| e == "aff").unwrap_or(false))
        .collect();
    paths.sort();
    assert!(!paths.is_empty(), "no fixtures found");
    paths
}

fn within(start: Instant, limit: Duration, what: &str) {
    let took = start.elapsed();
    assert!(took <= limit, "{what} took {took:?}, budget is {limit:?}");
}

/// `d`-dimensional memory (extent 12 per dimension, divisible by 2, 3 and 4)
/// with a single store in a perfect loop nest.
fn single_store_src(d: usize) -> String {
    let dims: String = (0..d).map(|_| "[12]".to_string()).collect();
    let mut src = format!("func kernel(mem: int{dims}) {{\n");
    for k in 0..d {
        src.push_str(&format!("  for (int i{k} = 0; i{k} < 12; ++i{k}) {{\n"));
    }
    let idx: String = (0..d).map(|k| format!("[i{k}]")).collect();
    let val: Vec<String> = (0..d).map(|k| format!("i{k}")).collect();
    src.push_str(&format!("    mem{idx} = {};\n", val.join(" + ")));
    for _ in 0..d {
        src.push_str("  }\n");
    }
    src.push_str("}\n");
    src
}

#[test]
fn criterion_1_branch_blowup() {
    let start = Instant::now();
    for d in 1..=3usize {
        for c in 2..=4u64 {
            let src = single_store_src(d);
            let funcs = parse_dsl(&src).expect("kernel parses");
            let spec = BankSpec::cyclic("mem", vec![c; d]);

            // Branch strategy with the predicate chain left unfolded: every
            // bank-select conditional survives into control hardware.
            let banked = bank_branch(&funcs[0], &spec).expect("bank_branch");
            let p = lower_to_ir(&[banked], "kernel").expect("lowering");
            let got = count_branches(&p);
            let want = c.pow(d as u32);
            assert_eq!(
                got, want,
                "criterion 1: branch strategy d={d} c={c}: {got} branch leaves, expected {want}"
            );

            // Embed strategy: the bank index moves into the address, so the
            // lowered control tree carries no banking branches at all.
            let cfg = PassConfig {
                strip_mine: (0..d).map(|k| (format!("i{k}"), c)).collect(),
                bank_specs: vec![spec],
                strategy: Strategy::Embed,
                restructure: false,
                flatten: true,
            };
            let out = run_pipeline(&funcs, "kernel", &cfg).expect("embed pipeline");
            let got = count_branches(&out.program);
            assert_eq!(
                got, 0,
                "criterion 1: embed strategy d={d} c={c}: {got} branch leaves, expected 0"
            );
        }
    }
    within(start, Duration::from_secs(1), "criterion 1");
    println!("criterion 1 (branch strategy blow-up vs embed): pass");
}

#[test]
fn criterion_2_listing_fixtures() {
    let start = Instant::now();
    let banked = [0u64, 2].as_slice();
    let other = [1u64, 3].as_slice();
    for name in ["listing_branch", "listing_strip", "listing_embed", "listing_unrolled"] {
        let src = std::fs::read_to_string(fixtures_dir().join(format!("{name}.aff")))
            .expect("listing fixture");
        let funcs = parse_dsl(&src).expect("fixture parses");
        let entry = fixture_entry(&src).expect("entry directive");
        let inputs = Inputs::default();

        let check = |images: &BTreeMap<String, Vec<u64>>, via: &str| {
            if let Some(flat) = images.get("mem") {
                assert_eq!(
                    flat,
                    &[0, 2, 1, 3],
                    "criterion 2: {name} via {via}: flat image {flat:?}"
                );
            } else {
                assert_eq!(images["mem_bank_0"], banked, "criterion 2: {name} via {via}");
                assert_eq!(images["mem_bank_1"], other, "criterion 2: {name} via {via}");
            }
        };

        let oracle = interpret(&funcs, &entry, &inputs, InterpOptions::default())
            .expect("golden model run");
        let images: BTreeMap<String, Vec<u64>> =
            oracle.iter().map(|(k, v)| (k.clone(), v.data.clone())).collect();
        check(&images, "reference_interpret");

        let cfg = fixture_config(&src, 1, Strategy::Embed, false, true).expect("fixture config");
        let out = run_pipeline(&funcs, &entry, &cfg).expect("pipeline");
        let sim = simulate(&out.program, &inputs, &SimOptions::default()).expect("simulate");
        check(&sim.memories, "simulate");

        // The embedded unrolled forms address disjoint banks per arm: no
        // memory contention anywhere in the schedule.
        if name == "listing_embed" || name == "listing_unrolled" {
            assert!(
                sim.conflicts.is_empty(),
                "criterion 2: {name} reported conflicts {:?}",
                sim.conflicts
            );
        }
    }
    within(start, Duration::from_secs(1), "criterion 2");
    println!("criterion 2 (banked store listings produce [0,2] / [1,3]): pass");
}

#[test]
fn criterion_3_oracle_equivalence_matrix() {
    let start = Instant::now();
    let mut total = 0;
    for path in fixture_paths() {
        let src = std::fs::read_to_string(&path).unwrap();
        let funcs = parse_dsl(&src).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let entry = fixture_entry(&src).unwrap_or_else(|| funcs[0].name.clone());
        let factors = fixture_factors(&src).unwrap_or_else(|| vec![1, 2, 4]);
        let inputs = synth_inputs(funcs.iter().find(|f| f.name == entry).unwrap());
        for &factor in &factors {
            for strategy in [Strategy::Branch, Strategy::Embed] {
                for restructure in [false, true] {
                    for flatten in [false, true] {
                        let cfg = fixture_config(&src, factor, strategy, restructure, flatten)
                            .expect("fixture config");
                        let label = format!(
                            "{} factor={factor} {strategy:?} restructure={restructure} flatten={flatten}",
                            path.file_name().unwrap().to_string_lossy()
                        );
                        let out = run_pipeline(&funcs, &entry, &cfg)
                            .unwrap_or_else(|e| panic!("criterion 3: pipeline {label}: {e}"));
                        let rep = compare_to_oracle(
                            &out.program,
                            &funcs,
                            &entry,
                            &inputs,
                            &cfg,
                            &SimOptions::default(),
                        )
                        .unwrap_or_else(|e| panic!("criterion 3: simulation {label}: {e}"));
                        assert!(
                            rep.matches(),
                            "criterion 3: {label}: {} memory words differ from the golden model",
                            rep.mismatches.len()
                        );
                        total += 1;
                    }
                }
            }
        }
    }
    assert!(total >= 200, "criterion 3: only {total} configurations exercised");
    within(start, Duration::from_secs(300), "criterion 3");
    println!("criterion 3 (oracle equivalence across {total} fixture configurations): pass");
}

#[test]
fn criterion_4_ffnn_factor_sweep() {
    let start = Instant::now();
    let spec = BenchSpec::new(Model::Ffnn);
    let report = bench::sweep(&spec).expect("ffnn sweep");
    let cycles = report.cycles();
    assert!(
        report.strictly_decreasing(),
        "criterion 4: cycles not strictly decreasing: {cycles:?}"
    );
    assert!(report.rows.iter().all(|r| r.oracle_ok), "criterion 4: oracle mismatch in sweep");
    let s = report.speedup(1, 2).expect("factors 1 and 2 present");
    assert!(s >= 1.5, "criterion 4: speedup 1 -> 2 is {s:.3}, need >= 1.5");
    within(start, Duration::from_secs(120), "criterion 4");
    println!(
        "criterion 4 (ffnn sweep cycles {cycles:?}, speedup 1 -> 2 = {s:.2}x): pass"
    );
}

#[test]
fn criterion_5_restructure_par_around_seq() {
    let start = Instant::now();
    for name in ["parseq", "pardouble"] {
        let src =
            std::fs::read_to_string(fixtures_dir().join(format!("{name}.aff"))).expect("fixture");
        let funcs = parse_dsl(&src).expect("fixture parses");
        let entry = fixture_entry(&src).expect("entry directive");
        let inputs = synth_inputs(funcs.iter().find(|f| f.name == entry).unwrap());

        let mut stats = Vec::new();
        for restructure in [false, true] {
            let cfg = fixture_config(&src, 1, Strategy::Embed, restructure, true).unwrap();
            let out = run_pipeline(&funcs, &entry, &cfg).expect("pipeline");
            let rep = compare_to_oracle(
                &out.program,
                &funcs,
                &entry,
                &inputs,
                &cfg,
                &SimOptions::default(),
            )
            .expect("simulation");
            assert!(rep.matches(), "criterion 5: {name} restructure={restructure}: image mismatch");
            stats.push((count_fsm_states(&out.program), rep.sim.cycles));
        }
        let (fsm_off, cycles_off) = stats[0];
        let (fsm_on, cycles_on) = stats[1];
        assert!(
            fsm_on < fsm_off,
            "criterion 5: {name}: fsm states {fsm_off} -> {fsm_on}, expected strict reduction"
        );
        assert!(
            cycles_on <= cycles_off,
            "criterion 5: {name}: cycles increased {cycles_off} -> {cycles_on}"
        );
    }
    within(start, Duration::from_secs(30), "criterion 5");
    println!("criterion 5 (nest restructuring reduces fsm states, keeps images and cycles): pass");
}

#[test]
fn criterion_6_conflict_soundness() {
    let start = Instant::now();

    // Constructed hazard: two par arms write the same word of the same bank
    // in the same cycle. Both arms start at cycle 0 and the store is each
    // arm's first (and only) group, so the collision is at cycle 0.
    let src = "func hazard(m: int[4]) {\n  parallel {\n    arm { m[0] = 1; }\n    arm { m[0] = 2; }\n  }\n}\n";
    let funcs = parse_dsl(src).expect("hazard source parses");
    let cfg = PassConfig {
        strip_mine: vec![],
        bank_specs: vec![],
        strategy: Strategy::Embed,
        restructure: false,
        flatten: true,
    };
    let out = run_pipeline(&funcs, "hazard", &cfg).expect("pipeline");
    let opts = SimOptions { trace: true, ..SimOptions::default() };
    let sim = simulate(&out.program, &Inputs::default(), &opts).expect("simulate");
    assert!(!sim.conflicts.is_empty(), "criterion 6: constructed hazard not reported");
    assert_eq!(
        sim.conflicts[0].cycle, 0,
        "criterion 6: hazard reported at cycle {}, expected 0",
        sim.conflicts[0].cycle
    );
    let trace = sim.trace.as_deref().expect("trace requested");
    cross_check_conflicts(&sim.conflicts, trace)
        .unwrap_or_else(|e| panic!("criterion 6: trace replay on hazard: {e}"));

    // Replay the whole corpus: the trace-derived collisions must agree with
    // the simulator's reported conflicts at every point.
    for path in fixture_paths() {
        let src = std::fs::read_to_string(&path).unwrap();
        let funcs = parse_dsl(&src).unwrap();
        let entry = fixture_entry(&src).unwrap_or_else(|| funcs[0].name.clone());
        let factors = fixture_factors(&src).unwrap_or_else(|| vec![1, 2]);
        let inputs = synth_inputs(funcs.iter().find(|f| f.name == entry).unwrap());
        for &factor in factors.iter().take(2) {
            for strategy in [Strategy::Branch, Strategy::Embed] {
                let cfg = fixture_config(&src, factor, strategy, false, true).unwrap();
                let out = run_pipeline(&funcs, &entry, &cfg).expect("pipeline");
                let rep =
                    compare_to_oracle(&out.program, &funcs, &entry, &inputs, &cfg, &opts)
                        .expect("simulation");
                let trace = rep.sim.trace.as_deref().expect("trace requested");
                cross_check_conflicts(&rep.sim.conflicts, trace).unwrap_or_else(|e| {
                    panic!(
                        "criterion 6: {} factor={factor} {strategy:?}: {e}",
                        path.file_name().unwrap().to_string_lossy()
                    )
                });
            }
        }
    }
    within(start, Duration::from_secs(30), "criterion 6");
    println!("criterion 6 (conflict reporting confirmed by independent trace replay): pass");
}

#[test]
fn criterion_7_float_bit_exactness() {
    use minihls::floatlib::{f32_add, f32_encode, f32_mul, F32Bits};

    let start = Instant::now();
    assert_eq!(f32_encode("1.0").unwrap().0, 0x3F80_0000, "criterion 7: encode(1.0)");
    assert_eq!(f32_encode("0.0").unwrap().0, 0x0000_0000, "criterion 7: encode(0.0)");
    assert_eq!(f32_encode("-0.0").unwrap().0, 0x8000_0000, "criterion 7: encode(-0.0)");
    assert_eq!(
        f32_add(F32Bits::ZERO, F32Bits::NEG_ZERO).0,
        0x0000_0000,
        "criterion 7: (+0) + (-0)"
    );
    assert_eq!(
        f32_add(F32Bits::NEG_ZERO, F32Bits::NEG_ZERO).0,
        0x8000_0000,
        "criterion 7: (-0) + (-0)"
    );
    assert_eq!(
        f32_mul(F32Bits::ONE, F32Bits::NEG_ZERO).0,
        0x8000_0000,
        "criterion 7: 1.0 * (-0)"
    );

    let mut rng = Lcg::new(0x0acce5);
    for case in 0..10_000 {
        let a = rng.next_u64() as u32;
        let b = rng.next_u64() as u32;
        let (fa, fb) = (f32::from_bits(a), f32::from_bits(b));
        for (op, got, want) in [
            ("add", f32_add(F32Bits(a), F32Bits(b)).0, (fa + fb).to_bits()),
            ("mul", f32_mul(F32Bits(a), F32Bits(b)).0, (fa * fb).to_bits()),
        ] {
            let both_nan =
                f32::from_bits(got).is_nan() && f32::from_bits(want).is_nan();
            assert!(
                got == want || both_nan,
                "criterion 7: case {case} {op}({a:#010x}, {b:#010x}) = {got:#010x}, oracle {want:#010x}"
            );
        }
    }
    within(start, Duration::from_secs(5), "criterion 7");
    println!("criterion 7 (10000 seeded add/mul cases bit-exact vs binary32 oracle): pass");
}

// ---------------------------------------------------------------------
// Criterion 8: a deterministic structural generator covering every IR
// construct the printer can emit, used to check parse-of-print identity.
// ---------------------------------------------------------------------

fn gen_program(rng: &mut Lcg) -> Program {
    use minihls::floatlib::CmpOp;
    use minihls::ir::{
        Assignment, Cell, CellKind, Component, Control, Group, InvokeArg, PortRef, ScalarPort,
        PortDir,
    };

    let mut pick = |n: u64| (rng.next_u64() >> 17) % n;
    let cmp_ops = [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne, CmpOp::Gt, CmpOp::Ge];

    let mut make_component = |name: &str, can_invoke: Option<&str>, pick: &mut dyn FnMut(u64) -> u64| {
        let widths = [1u32, 8, 16, 32];
        let mut cells = vec![
            Cell { name: "r0".into(), kind: CellKind::Register { width: widths[pick(4) as usize] } },
            Cell { name: "cond".into(), kind: CellKind::Register { width: 1 } },
            Cell {
                name: "m0".into(),
                kind: CellKind::Memory {
                    float: pick(2) == 0,
                    width: 32,
                    extents: (0..1 + pick(3)).map(|_| 2 + pick(6)).collect(),
                },
            },
            Cell {
                name: "k0".into(),
                kind: CellKind::Constant { float: pick(2) == 0, width: 32, bits: pick(1 << 20) },
            },
        ];
        let units = [
            CellKind::IntAdd,
            CellKind::IntSub,
            CellKind::IntMul,
            CellKind::IntDiv,
            CellKind::IntMod,
            CellKind::IntCmp(cmp_ops[pick(6) as usize]),
            CellKind::FloatAdd,
            CellKind::FloatMul,
            CellKind::FloatDiv,
            CellKind::FloatExp,
            CellKind::FloatCmp(cmp_ops[pick(6) as usize]),
        ];
        for i in 0..1 + pick(3) {
            cells.push(Cell { name: format!("u{i}"), kind: units[pick(11) as usize].clone() });
        }
        let u0_in_port = if cells.iter().find(|c| c.name == "u0").unwrap().kind.has_port("left") {
            "left"
        } else {
            "in"
        };

        let mut groups = Vec::new();
        for g in 0..1 + pick(3) {
            let mut assignments =
                vec![Assignment { dest: PortRef::new("r0", "in"), src: PortRef::new("k0", "out") }];
            if pick(2) == 0 {
                assignments.push(Assignment {
                    dest: PortRef::new("m0", "addr0"),
                    src: PortRef::new("k0", "out"),
                });
                assignments.push(Assignment {
                    dest: PortRef::new("m0", "write_data"),
                    src: PortRef::new("r0", "out"),
                });
            }
            if pick(2) == 0 {
                assignments.push(Assignment {
                    dest: PortRef::new("u0", u0_in_port),
                    src: PortRef::new("r0", "out"),
                });
            }
            groups.push(Group {
                name: format!("g{g}"),
                assignments,
                static_latency: 1 + pick(9),
            });
        }

        fn gen_control(
            depth: u64,
            groups: usize,
            can_invoke: Option<&str>,
            pick: &mut dyn FnMut(u64) -> u64,
        ) -> Control {
            let enable =
                |pick: &mut dyn FnMut(u64) -> u64| Control::Enable(format!("g{}", pick(groups as u64)));
            if depth == 0 {
                return enable(pick);
            }
            match pick(6) {
                0 => enable(pick),
                1 => Control::Seq(
                    (0..1 + pick(3))
                        .map(|_| gen_control(depth - 1, groups, can_invoke, pick))
                        .collect(),
                ),
                2 => Control::Par(
                    (0..1 + pick(3))
                        .map(|_| gen_control(depth - 1, groups, can_invoke, pick))
                        .collect(),
                ),
                3 => Control::If {
                    cond: PortRef::new("cond", "out"),
                    then: Box::new(gen_control(depth - 1, groups, can_invoke, pick)),
                    els: if pick(2) == 0 {
                        Some(Box::new(gen_control(depth - 1, groups, can_invoke, pick)))
                    } else {
                        None
                    },
                },
                4 => Control::While {
                    cond: PortRef::new("cond", "out"),
                    body: Box::new(gen_control(depth - 1, groups, can_invoke, pick)),
                },
                _ => match can_invoke {
                    Some(callee) => Control::Invoke {
                        component: callee.to_string(),
                        bindings: vec![
                            ("x".to_string(), InvokeArg::Port(PortRef::new("r0", "out"))),
                            ("buf".to_string(), InvokeArg::Mem("m0".to_string())),
                        ],
                    },
                    None => enable(pick),
                },
            }
        }
        let control = gen_control(2 + pick(2), groups.len(), can_invoke, pick);

        let scalar_ports = if pick(2) == 0 {
            vec![ScalarPort { name: "x".into(), width: 32, dir: PortDir::In }]
        } else {
            vec![]
        };
        Component { name: name.to_string(), scalar_ports, cells, groups, control }
    };

    let mut components = Vec::new();
    if pick(2) == 0 {
        components.push(make_component("helper", None, &mut pick));
        components.push(make_component("main", Some("helper"), &mut pick));
    } else {
        components.push(make_component("main", None, &mut pick));
    }
    Program { components, entry: "main".to_string() }
}

#[test]
fn criterion_8_determinism_and_round_trip() {
    let start = Instant::now();

    let mut rng = Lcg::new(0x0de7e12);
    for case in 0..1_000 {
        let p = gen_program(&mut rng);
        let text = print_ir(&p);
        let back = parse_ir(&text)
            .unwrap_or_else(|e| panic!("criterion 8: case {case}: printed IR fails to parse: {e}\n{text}"));
        assert_eq!(back, p, "criterion 8: case {case}: parse(print(p)) differs from p");
    }

    // Determinism: two independent sweeps of the same spec serialize to the
    // same bytes.
    let spec = BenchSpec { factors: vec![1, 2], ..BenchSpec::new(Model::Ffnn) };
    let a = serde_json::to_string(&bench::sweep(&spec).expect("first sweep")).unwrap();
    let b = serde_json::to_string(&bench::sweep(&spec).expect("second sweep")).unwrap();
    assert_eq!(a, b, "criterion 8: repeated sweeps are not byte-identical");

    within(start, Duration::from_secs(60), "criterion 8");
    println!("criterion 8 (1000-program print/parse round-trip, byte-identical sweeps): pass");
}
