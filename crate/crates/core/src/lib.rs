pub mod fixtures;
pub mod frontend;
pub mod lowering;
pub mod memory_planner;
pub mod perf_model;
pub mod pipeline;
pub mod rewriter;
pub mod scheduler;
pub mod system_builder;
pub mod tensor_ir;
