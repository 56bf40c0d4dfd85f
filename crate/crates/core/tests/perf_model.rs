use hbmflow::fixtures;
use hbmflow::frontend::Params;
use hbmflow::memory_planner::{Bank, BankAssignment};
use hbmflow::perf_model::*;
use hbmflow::pipeline::{compile, CompileOptions, Dataflow};
use hbmflow::system_builder::{plan_batch_bytes, BoardSpec, BuildOptions, CuDesign, ModuleDesc, Resources};
use hbmflow::tensor_ir::{FlopCount, ScalarFormat};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn ideal_gflops_table() {
    assert!(close(ideal_gflops(22, 274.6), 6.041, 0.001));
    assert!(close(2.903 / ideal_gflops(22, 274.6), 0.481, 0.001));
    assert!(close(ideal_gflops(88, 286.2), 25.186, 0.001));
    assert!(close(ideal_gflops(532, 199.5), 106.134, 0.001));
}

#[test]
fn cost_table_basics() {
    let t = CostTable::default();
    assert_eq!(t.float64.dsp_per_multiplier, 11);
    assert_eq!(t.fixed_wide.dsp_per_multiplier, 3);
    assert_eq!(t.bram_bits_per_tile, 36_864);
    assert_eq!(t.bank_blocks(80_000), (6, 0));
    assert_eq!(t.bank_blocks(t.uram_threshold_bits + 1), (0, 2));
    let text = t.to_toml();
    assert_eq!(CostTable::from_toml(&text).unwrap(), t);
    let mut f = t.clone();
    f.frequency.points = vec![(0.5, 300.0), (0.9, 200.0)];
    assert_eq!(CostTable::from_toml(&f.to_toml()).unwrap(), f);
}

fn synthetic(kernels: u64, groups: Vec<u64>, read: u64, write: u64, ops: (u64, u64), db: bool) -> CuDesign {
    CuDesign {
        kernel: "k".into(),
        format: ScalarFormat::Float64,
        lanes: 4,
        kernels,
        options: BuildOptions { double_buffering: db, bus_parallel: kernels > 1, dataflow: groups.len() > 1, fixed_point: false },
        read: ModuleDesc { tensors: vec![("u".into(), read)], words_per_element: read, interval: read },
        write: ModuleDesc { tensors: vec![("v".into(), write)], words_per_element: write, interval: write },
        groups: groups.into_iter().enumerate().map(|(i, g)| (format!("g{i}"), g)).collect(),
        operators: ops,
        n_cu: 1,
        ports: Vec::new(),
    }
}

#[test]
fn one_multiplier_costs_its_table_entry() {
    let d = synthetic(1, vec![10], 10, 10, (1, 0), false);
    let t = CostTable { module: Resources::default(), ..CostTable::default() };
    let none = BankAssignment { banks: vec![], mapping: Default::default(), total_bits: 0, unshared_bits: 0 };
    let e = estimate_resources(&d, &none, &t, &BoardSpec::alveo_u280());
    assert_eq!(e.per_cu.dsp, 11);
    let one = BankAssignment {
        banks: vec![Bank { id: 0, bits: 80_000, members: vec!["a".into()] }],
        mapping: Default::default(),
        total_bits: 80_000,
        unshared_bits: 80_000,
    };
    assert_eq!(estimate_resources(&d, &one, &t, &BoardSpec::alveo_u280()).per_cu.bram, 6);
}

fn per_cu_fraction(class: &str, frac: f64) -> ResourceEstimate {
    let board = BoardSpec::alveo_u280();
    let totals = board.totals();
    let mut per_cu = Resources::default();
    let v = (frac * totals.get(class) as f64).round() as u64;
    match class {
        "bram" => per_cu.bram = v,
        "dsp" => per_cu.dsp = v,
        _ => unreachable!(),
    }
    ResourceEstimate::new(per_cu, Resources::default(), 1, &board)
}

#[test]
fn replication_limits() {
    let board = BoardSpec::alveo_u280();
    assert_eq!(max_replication(&per_cu_fraction("dsp", 0.30), &board, 0.8, true), 2);
    assert_eq!(max_replication(&per_cu_fraction("bram", 0.664), &board, 0.8, true), 1);
    assert_eq!(max_replication(&per_cu_fraction("bram", 0.217), &board, 0.8, true), 3);
    assert_eq!(max_replication(&per_cu_fraction("bram", 0.217), &board, 0.9, true), 4);
    let tiny = ResourceEstimate::new(Resources { lut: 1, ..Default::default() }, Resources::default(), 1, &board);
    assert_eq!(max_replication(&tiny, &board, 0.8, true), 16);
    assert_eq!(max_replication(&tiny, &board, 0.8, false), 32);
    assert_eq!(max_replication(&per_cu_fraction("bram", 0.95), &board, 0.8, true), 0);
}

fn helmholtz_compiled(fmt: ScalarFormat, groups: Dataflow, db: bool, bus: bool) -> hbmflow::pipeline::Compiled {
    let params: Params = [("p".to_string(), 11)].into();
    let opts = CompileOptions {
        name: "helmholtz".into(),
        format: fmt,
        dataflow: groups,
        double_buffering: db,
        bus_parallel: bus,
        ..CompileOptions::default()
    };
    compile(fixtures::HELMHOLTZ, &params, &opts, &BoardSpec::alveo_u280(), &CostTable::default()).unwrap()
}

#[test]
fn dsp_trend_across_formats() {
    let dsp = |fmt| helmholtz_compiled(fmt, Dataflow::Groups(1), true, true).estimate.per_cu.dsp;
    let f64_ = dsp(ScalarFormat::Float64);
    let x64 = dsp(ScalarFormat::fixed(64, 24, 40).unwrap());
    let x32 = dsp(ScalarFormat::fixed(32, 8, 24).unwrap());
    assert!(x32 < x64 && x64 < f64_, "{x32} {x64} {f64_}");
}

#[test]
fn operator_counts_per_configuration() {
    let ops = |g, bus| helmholtz_compiled(ScalarFormat::Float64, g, true, bus).design.total_operators();
    assert_eq!(ops(Dataflow::Groups(1), false), 22);
    assert_eq!(ops(Dataflow::Groups(1), true), 88);
    assert_eq!(ops(Dataflow::Groups(2), true), 176);
    assert_eq!(ops(Dataflow::Auto, true), 180);
}

#[test]
fn configuration_trends() {
    let board = BoardSpec::alveo_u280();
    let base = helmholtz_compiled(ScalarFormat::Float64, Dataflow::Groups(1), false, false).simulate(&board, None).unwrap();
    let db = helmholtz_compiled(ScalarFormat::Float64, Dataflow::Groups(1), true, false).simulate(&board, Some(37.5)).unwrap();
    let bus = helmholtz_compiled(ScalarFormat::Float64, Dataflow::Groups(1), true, true).simulate(&board, None).unwrap();
    assert!(db.system_gflops >= base.system_gflops);
    assert!(close(db.cu_gflops, base.cu_gflops, 1e-9 * base.cu_gflops));
    let speedup = base.total_compute / bus.total_compute;
    assert!(speedup <= 4.0 + 1e-9 && speedup > 3.9, "{speedup}");
    assert!(close(db.gflops_per_watt.unwrap(), db.system_gflops / 37.5, 1e-12));
    for r in [&base, &db, &bus] {
        assert!(r.system_gflops <= r.cu_gflops + 1e-9);
        assert!(r.efficiency > 0.0 && r.efficiency <= 1.0);
    }
    assert!(base.table().contains("Ideal GFLOPS"));
}

#[test]
fn zero_elapsed_is_flagged() {
    let d = synthetic(1, vec![1], 1, 1, (1, 1), false);
    let batch = plan_batch_bytes(1 << 20, 8, 8, 0, 1, 1).unwrap();
    let r = simulate(&d, &batch, &BoardSpec::alveo_u280(), 300.0);
    assert_eq!(r.makespan, 0.0);
    assert_eq!(metrics(r, FlopCount::new(1, 1), 0, 2, 300.0, None), Err(PerfError::ZeroElapsed));
}

#[test]
fn frequency_knob() {
    let m = FrequencyModel::default();
    assert_eq!(m.achieved(300.0, 0.99), 300.0);
    let m = FrequencyModel { points: vec![(0.5, 300.0), (0.9, 200.0)] };
    assert_eq!(m.achieved(280.0, 0.1), 280.0);
    assert!(close(m.achieved(300.0, 0.7), 250.0, 1e-9));
    assert_eq!(m.achieved(300.0, 1.0), 200.0);
}

fn arb_design() -> impl Strategy<Value = (CuDesign, u64, u64, u64, u64, f64, f64)> {
    (
        1u64..9,
        prop::collection::vec(1u64..5000, 1..8),
        1u64..5000,
        1u64..5000,
        any::<bool>(),
        (1u64..1 << 16, 1u64..1 << 16, 1u64..1 << 12),
        1u64..2_000_000,
        (1.0f64..100.0, 50.0f64..500.0),
    )
        .prop_map(|(k, g, r, w, db, (cap, ein, eout), n_eq, (bw, f))| {
            (synthetic(k, g, r, w, (4, 4), db), cap * ein, ein, eout, n_eq, bw, f)
        })
}

#[allow(clippy::too_many_arguments)]
fn run(d: &CuDesign, cap: u64, ein: u64, eout: u64, n_eq: u64, n_cu: u64, bw: f64, f: f64) -> SimReport {
    let mut board = BoardSpec::alveo_u280();
    board.pcie_bandwidth_gbps = bw;
    let batch = plan_batch_bytes(cap, ein, eout, n_eq, d.kernels, n_cu).unwrap();
    simulate(d, &batch, &board, f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn makespan_bounds((d, cap, ein, eout, n_eq, bw, f) in arb_design(), n_cu in 1u64..9) {
        let cap = cap.max(ein * d.kernels);
        let r = run(&d, cap, ein, eout, n_eq, n_cu, bw, f);
        let tol = 1e-9 * r.serial_makespan.max(1e-12);
        prop_assert!(r.double_buffered_makespan <= r.serial_makespan + tol);
        let lower = r.total_compute.max(r.total_in).max(r.total_out);
        prop_assert!(r.double_buffered_makespan + tol >= lower);
        prop_assert!(r.serial_makespan + tol >= lower);
        let faster = run(&d, cap, ein, eout, n_eq, n_cu, bw * 1.5, f);
        prop_assert!(faster.makespan <= r.makespan + tol);
        prop_assert!(faster.serial_makespan <= r.serial_makespan + tol);
    }

    #[test]
    fn lane_speedup((d, ..) in arb_design(), blocks in 1u64..5000) {
        let lanes = d.kernels;
        let e = blocks * lanes;
        let one = CuDesign { kernels: 1, ..d.clone() };
        let c1 = compute_cycles(&one, e) as f64;
        let cl = compute_cycles(&d, e) as f64;
        prop_assert!((cl - c1 / lanes as f64).abs() <= d.fill_cycles() as f64);
        prop_assert!(c1 / cl <= lanes as f64 + 1e-9);
    }

    #[test]
    fn cost_entries_are_monotone(entry in 0usize..30, bump in 1u64..1000, m in 0u64..200, a in 0u64..200, bits in prop::collection::vec(1u64..2_000_000, 0..6), k in 1u64..9) {
        let board = BoardSpec::alveo_u280();
        let mut d = synthetic(k, vec![10], 10, 10, (m, a), false);
        d.format = [ScalarFormat::Float64, ScalarFormat::Float32, ScalarFormat::fixed(64, 24, 40).unwrap(), ScalarFormat::fixed(32, 8, 24).unwrap()][entry % 4];
        let banks = BankAssignment {
            banks: bits.iter().enumerate().map(|(id, &b)| Bank { id, bits: b, members: vec![format!("b{id}")] }).collect(),
            mapping: Default::default(),
            total_bits: bits.iter().sum(),
            unshared_bits: bits.iter().sum(),
        };
        let t = CostTable::default();
        let mut u = t.clone();
        bump_entry(&mut u, entry, bump);
        let (x, y) = (estimate_resources(&d, &banks, &t, &board), estimate_resources(&d, &banks, &u, &board));
        for c in Resources::CLASSES {
            prop_assert!(y.total.get(c) >= x.total.get(c), "{c} entry {entry}");
        }
    }
}

/// Every entry except the storage capacities and the URAM threshold, which
/// trade one resource class for another.
fn bump_entry(t: &mut CostTable, entry: usize, by: u64) {
    let fmts = [&mut t.float64, &mut t.float32, &mut t.fixed_wide, &mut t.fixed_narrow];
    if entry < 24 {
        let [a, b, c, d] = fmts;
        let f = [a, b, c, d].into_iter().nth(entry / 6).unwrap();
        let slot = match entry % 6 {
            0 => &mut f.dsp_per_multiplier,
            1 => &mut f.lut_per_multiplier,
            2 => &mut f.ff_per_multiplier,
            3 => &mut f.dsp_per_adder,
            4 => &mut f.lut_per_adder,
            _ => &mut f.ff_per_adder,
        };
        *slot += by;
        return;
    }
    match entry {
        24 => t.port_factor += by,
        25 => t.module.lut += by,
        26 => t.module.bram += by,
        27 => t.shell.lut += by,
        28 => t.shell.bram += by,
        _ => t.shell.dsp += by,
    }
}

#[test]
fn shipped_cost_file_matches_defaults() {
    assert_eq!(CostTable::from_toml(DEFAULT_COSTS).unwrap(), CostTable::default());
}
