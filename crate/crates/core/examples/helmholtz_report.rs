//! Compile the Helmholtz fixture at p=11 under four build configurations and print its timing table.

use hbmflow::fixtures;
use hbmflow::frontend::Params;
use hbmflow::perf_model::CostTable;
use hbmflow::pipeline::{compile, CompileOptions, Dataflow};
use hbmflow::system_builder::BoardSpec;

fn main() {
    let board = BoardSpec::alveo_u280();
    let params: Params = [("p".to_string(), 11)].into();
    let configs = [
        ("baseline", false, false, Dataflow::Groups(1)),
        ("double buffering", true, false, Dataflow::Groups(1)),
        ("bus parallel", true, true, Dataflow::Groups(1)),
        ("dataflow", true, true, Dataflow::Auto),
    ];
    for (label, db, bus, dataflow) in configs {
        let opts = CompileOptions { name: "helmholtz".into(), double_buffering: db, bus_parallel: bus, dataflow, ..Default::default() };
        let c = compile(fixtures::HELMHOLTZ, &params, &opts, &board, &CostTable::default()).expect("fixture compiles");
        let report = c.simulate(&board, None).expect("nonzero makespan");
        println!("== {label}\n{}", report.table());
    }
}
