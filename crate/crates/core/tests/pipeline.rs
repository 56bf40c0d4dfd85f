mod common;

use hbmflow::fixtures;
use hbmflow::frontend::Params;
use hbmflow::perf_model::CostTable;
use hbmflow::pipeline::{compile, verify, CompileOptions, Compiled, Dataflow, Replication};
use hbmflow::system_builder::BoardSpec;
use hbmflow::tensor_ir::ScalarFormat;

fn build(p: usize, opts: CompileOptions) -> Compiled {
    let params: Params = [("p".to_string(), p)].into();
    compile(fixtures::HELMHOLTZ, &params, &opts, &BoardSpec::alveo_u280(), &CostTable::default()).unwrap()
}

fn opts(fmt: ScalarFormat, dataflow: Dataflow) -> CompileOptions {
    CompileOptions { name: "helmholtz".into(), format: fmt, dataflow, double_buffering: true, bus_parallel: true, ..Default::default() }
}

#[test]
fn verify_passes_on_float64() {
    let c = build(3, opts(ScalarFormat::Float64, Dataflow::Auto));
    let r = verify(&c, 50, 1e-12, None, &mut common::rng(1)).unwrap();
    assert!(r.passed, "{r:?}");
    assert!(r.max_rel_error < 1e-12);
    assert_eq!(r.failing_group, None);
}

#[test]
fn injected_fault_names_the_group() {
    let c = build(3, opts(ScalarFormat::Float64, Dataflow::Auto));
    for (gid, g) in c.kernel.groups.iter().enumerate() {
        let r = verify(&c, 2, 1e-12, Some(gid), &mut common::rng(2)).unwrap();
        assert!(!r.passed);
        assert_eq!(r.failing_group.as_deref(), Some(g.name.as_str()));
    }
}

#[test]
fn fixed_point_error_bands() {
    let c = build(7, opts(ScalarFormat::fixed(32, 8, 24).unwrap(), Dataflow::Groups(1)));
    let r = verify(&c, 100, 1e-12, None, &mut common::rng(3)).unwrap();
    assert!(r.passed && r.exact);
    assert!((1e-14..=1e-10).contains(&r.mse), "{}", r.mse);
    let c = build(7, opts(ScalarFormat::fixed(64, 24, 40).unwrap(), Dataflow::Groups(1)));
    let r = verify(&c, 100, 1e-12, None, &mut common::rng(3)).unwrap();
    assert!(r.mse <= 1e-18, "{}", r.mse);
}

#[test]
fn artifacts_are_deterministic() {
    let o = opts(ScalarFormat::Float64, Dataflow::Groups(7));
    let a = build(11, o.clone()).artifacts();
    let b = build(11, o).artifacts();
    assert_eq!(a, b);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["helmholtz.c", "helmholtz_compat.json", "helmholtz_banks.json", "system.cfg", "host_plan.json", "batch_plan.json", "design.json"]
    );
}

#[test]
fn sharing_warning_for_multi_group() {
    let o = CompileOptions { mem_sharing: true, ..opts(ScalarFormat::Float64, Dataflow::Groups(7)) };
    let c = build(11, o);
    assert!(c.warnings.iter().any(|w| w.contains("ineffective")));
    assert_eq!(c.banks.total_bits, c.banks.unshared_bits);
    let o = CompileOptions { mem_sharing: true, ..opts(ScalarFormat::Float64, Dataflow::Groups(1)) };
    let c = build(11, o);
    assert!(c.warnings.is_empty());
    assert!(c.banks.saving() >= 0.10);
}

#[test]
fn automatic_replication_respects_cap() {
    let o = CompileOptions { replication: Replication::Auto, ..opts(ScalarFormat::fixed(32, 8, 24).unwrap(), Dataflow::Groups(1)) };
    let c = build(7, o);
    assert!(c.design.n_cu >= 1);
    assert!(c.estimate.max_utilization() <= 0.8 + 1e-9);
    assert_eq!(c.batch.n_cu as usize, c.design.n_cu);
}
