//! Command-line driver: compile, simulate, verify and sweep.

use std::collections::BTreeMap;
use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hbmflow::frontend::{FrontendError, Params};
use hbmflow::perf_model::{CostTable, SimReport};
use hbmflow::pipeline::{self, CompileOptions, Compiled, Dataflow, Manifest, Replication, VerifyReport};
use hbmflow::system_builder::BoardSpec;
use hbmflow::tensor_ir::ScalarFormat;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hbmflow", version, about = "Tensor kernel compiler and system model for HBM streaming accelerators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a kernel source into C, memory plans and system configuration.
    Compile {
        source: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Produce a timing report from a compiled artifact directory.
    Simulate {
        dir: PathBuf,
        #[arg(long)]
        board: Option<PathBuf>,
        /// Average board power in watts.
        #[arg(long)]
        power: Option<f64>,
    },
    /// Check the lowered kernel against the reference interpreter.
    Verify {
        source: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
        /// Perturb every value written by this group (test hook).
        #[arg(long)]
        inject_fault: Option<String>,
    },
    /// Compile and simulate a list of group counts.
    Sweep {
        source: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated group counts; `auto` uses the default budget.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,7")]
        dataflow: Vec<String>,
        #[arg(long)]
        power: Option<f64>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with run settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extent substituted for the shape symbol `p`.
    #[arg(long)]
    pub p: Option<usize>,
    /// Other shape symbols, `name=value`.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, usize)>,
    /// f64, f32, fixed(w,i,f) or float(e,m).
    #[arg(long)]
    pub format: Option<String>,
    /// Comma-separated: double-buffering, bus-parallel, dataflow=<n|auto>, mem-sharing.
    #[arg(long = "opt", value_delimiter = ',')]
    pub opts: Vec<String>,
    /// CU count or `auto`.
    #[arg(long)]
    pub cus: Option<String>,
    /// Utilization cap for automatic replication.
    #[arg(long)]
    pub cap: Option<f64>,
    #[arg(long)]
    pub n_eq: Option<u64>,
    #[arg(long)]
    pub board: Option<PathBuf>,
    /// Cost table TOML overriding the built-in estimates.
    #[arg(long)]
    pub costs: Option<PathBuf>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_param(s: &str) -> Result<(String, usize), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got '{s}'"))?;
    let v = v.trim().parse().map_err(|_| format!("bad extent '{v}'"))?;
    Ok((k.trim().to_string(), v))
}

/// Settings for one pipeline run, from a config file and flags.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub board: Option<PathBuf>,
    pub costs: Option<PathBuf>,
    pub format: String,
    pub double_buffering: bool,
    pub bus_parallel: bool,
    /// Group count or "auto".
    pub dataflow_groups: String,
    pub mem_sharing: bool,
    pub n_eq: u64,
    pub cus: String,
    pub cap: f64,
    pub out: PathBuf,
    pub seed: u64,
    pub name: Option<String>,
    pub params: BTreeMap<String, usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            board: None,
            costs: None,
            format: "f64".into(),
            double_buffering: false,
            bus_parallel: false,
            dataflow_groups: "1".into(),
            mem_sharing: false,
            n_eq: 2_000_000,
            cus: "1".into(),
            cap: hbmflow::perf_model::DEFAULT_CAP,
            out: PathBuf::from("build"),
            seed: 0,
            name: None,
            params: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => toml::from_str(&read(path)?).with_context(|| format!("{}: invalid run config", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(p) = args.p {
            cfg.params.insert("p".into(), p);
        }
        cfg.params.extend(args.params.iter().cloned());
        set(&mut cfg.format, &args.format);
        set(&mut cfg.cus, &args.cus);
        set(&mut cfg.cap, &args.cap);
        set(&mut cfg.n_eq, &args.n_eq);
        set(&mut cfg.out, &args.out);
        set(&mut cfg.seed, &args.seed);
        if args.board.is_some() {
            cfg.board = args.board.clone();
        }
        if args.costs.is_some() {
            cfg.costs = args.costs.clone();
        }
        if args.name.is_some() {
            cfg.name = args.name.clone();
        }
        for o in &args.opts {
            match o.trim() {
                "" => {}
                "double-buffering" => cfg.double_buffering = true,
                "bus-parallel" => cfg.bus_parallel = true,
                "mem-sharing" => cfg.mem_sharing = true,
                other => match other.strip_prefix("dataflow=") {
                    Some(v) => cfg.dataflow_groups = v.to_string(),
                    None => bail!("unknown optimization '{other}'"),
                },
            }
        }
        cfg.dataflow()?;
        Ok(cfg)
    }

    pub fn dataflow(&self) -> Result<Dataflow> {
        match self.dataflow_groups.as_str() {
            "auto" => Ok(Dataflow::Auto),
            n => match n.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(Dataflow::Groups(n)),
                _ => bail!("dataflow groups must be a positive count or 'auto', got '{n}'"),
            },
        }
    }

    pub fn compile_options(&self, name: &str) -> Result<CompileOptions> {
        let format: ScalarFormat = self.format.parse().map_err(|e| anyhow!("format '{}': {e}", self.format))?;
        let replication = match self.cus.as_str() {
            "auto" => Replication::Auto,
            n => Replication::Fixed(n.parse().ok().filter(|&n: &usize| n >= 1).ok_or_else(|| anyhow!("bad CU count '{n}'"))?),
        };
        Ok(CompileOptions {
            name: name.to_string(),
            format,
            dataflow: self.dataflow()?,
            double_buffering: self.double_buffering,
            bus_parallel: self.bus_parallel,
            mem_sharing: self.mem_sharing,
            n_eq: self.n_eq,
            replication,
            cap: self.cap,
        })
    }

    pub fn board(&self) -> Result<BoardSpec> {
        load_board(self.board.as_deref())
    }

    pub fn costs(&self) -> Result<CostTable> {
        match &self.costs {
            Some(p) => CostTable::from_toml(&read(p)?).with_context(|| format!("{}: invalid cost table", p.display())),
            None => Ok(CostTable::default()),
        }
    }
}

fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
    if let Some(v) = v {
        *slot = v.clone();
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => anyhow!("no such file: {}", path.display()),
        _ => anyhow!("{}: {e}", path.display()),
    })
}

pub fn load_board(path: Option<&Path>) -> Result<BoardSpec> {
    match path {
        Some(p) => BoardSpec::parse(&read(p)?).with_context(|| format!("{}: invalid board file", p.display())),
        None => Ok(BoardSpec::alveo_u280()),
    }
}

fn kernel_name(source: &Path, cfg: &RunConfig) -> String {
    cfg.name.clone().unwrap_or_else(|| source.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or("kernel".into()))
}

pub fn build(source: &Path, cfg: &RunConfig) -> Result<Compiled> {
    let text = read(source)?;
    let name = kernel_name(source, cfg);
    let params: Params = cfg.params.clone();
    pipeline::compile(&text, &params, &cfg.compile_options(&name)?, &cfg.board()?, &cfg.costs()?).map_err(|e| match e {
        pipeline::PipelineError::Frontend(f) => anyhow!(render(source, &f)),
        e => anyhow!(e),
    })
}

fn render(source: &Path, e: &FrontendError) -> String {
    e.render(&source.display().to_string())
}

/// Write all artifacts into `dir`; returns the written paths.
pub fn write_artifacts(c: &Compiled, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    c.artifacts()
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
            Ok(path)
        })
        .collect()
}

pub fn cmd_compile(source: &Path, cfg: &RunConfig, warn: &mut dyn FnMut(&str)) -> Result<Vec<PathBuf>> {
    let c = build(source, cfg)?;
    for w in &c.warnings {
        warn(w);
    }
    write_artifacts(&c, &cfg.out)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("design.json");
    let text = read(&path).with_context(|| format!("{} holds no compiled artifacts", dir.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}: invalid manifest", path.display()))
}

pub fn write_report(report: &SimReport, dir: &Path) -> Result<()> {
    fs::write(dir.join("report.json"), report.to_json())?;
    fs::write(dir.join("report.txt"), report.table())?;
    Ok(())
}

pub fn cmd_simulate(dir: &Path, board: Option<&Path>, power: Option<f64>) -> Result<SimReport> {
    let manifest = load_manifest(dir)?;
    let report = pipeline::simulate_manifest(&manifest, &load_board(board)?, power)?;
    write_report(&report, dir)?;
    Ok(report)
}

pub fn cmd_verify(source: &Path, cfg: &RunConfig, trials: usize, tolerance: f64, fault: Option<&str>) -> Result<VerifyReport> {
    let c = build(source, cfg)?;
    let perturb = match fault {
        Some(name) => Some(
            c.schedule
                .group_by_name(name)
                .map(|g| g.id)
                .ok_or_else(|| anyhow!("no group named '{name}'; groups are {}", c.schedule.names_in_stage_order().join(", ")))?,
        ),
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(pipeline::verify(&c, trials, tolerance, perturb, &mut rng)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub groups: usize,
    pub report: SimReport,
}

pub fn cmd_sweep(source: &Path, cfg: &RunConfig, dataflow: &[String], power: Option<f64>) -> Result<Vec<SweepRow>> {
    let board = cfg.board()?;
    let mut rows = Vec::new();
    let mut csv = String::from("dataflow,groups,operators,frequency_mhz,ideal_gflops,cu_gflops,system_gflops,efficiency,makespan_s\n");
    for d in dataflow {
        let run = RunConfig { dataflow_groups: d.trim().to_string(), out: cfg.out.join(format!("dataflow_{}", d.trim())), ..cfg.clone() };
        run.dataflow()?;
        let c = build(source, &run)?;
        write_artifacts(&c, &run.out)?;
        let report = c.simulate(&board, power)?;
        write_report(&report, &run.out)?;
        csv.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.9}\n",
            d.trim(),
            c.schedule.groups.len(),
            report.num_operators,
            report.frequency_mhz,
            report.ideal_gflops,
            report.cu_gflops,
            report.system_gflops,
            report.efficiency,
            report.makespan
        ));
        rows.push(SweepRow { label: d.trim().to_string(), groups: c.schedule.groups.len(), report });
    }
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("summary.csv"), csv)?;
    Ok(rows)
}

fn warn_line(msg: &str) {
    let color = std::io::stderr().is_terminal() && std::env::var_os("NO_COLOR").is_none();
    let mut err = std::io::stderr();
    let _ = if color { writeln!(err, "\x1b[33mwarning\x1b[0m: {msg}") } else { writeln!(err, "warning: {msg}") };
}

fn error_line(e: &anyhow::Error) {
    let color = std::io::stderr().is_terminal() && std::env::var_os("NO_COLOR").is_none();
    let msg = format!("{e:#}");
    let mut err = std::io::stderr();
    let _ = if color { writeln!(err, "\x1b[31merror\x1b[0m: {msg}") } else { writeln!(err, "error: {msg}") };
}

/// Parse `args` (program name first) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            error_line(&e);
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Compile { source, run } => {
            let cfg = RunConfig::from_args(&run)?;
            for p in cmd_compile(&source, &cfg, &mut warn_line)? {
                println!("{}", p.display());
            }
            Ok(EXIT_OK)
        }
        Command::Simulate { dir, board, power } => {
            let report = cmd_simulate(&dir, board.as_deref(), power)?;
            print!("{}", report.table());
            Ok(EXIT_OK)
        }
        Command::Verify { source, run, trials, tolerance, inject_fault } => {
            let cfg = RunConfig::from_args(&run)?;
            let r = cmd_verify(&source, &cfg, trials, tolerance, inject_fault.as_deref())?;
            println!("trials {}  max relative error {:.3e}  mse {:.3e}", r.trials, r.max_rel_error, r.mse);
            if r.passed {
                println!("PASS");
                Ok(EXIT_OK)
            } else {
                match &r.failing_group {
                    Some(g) => println!("FAIL: first mismatch in group {g}"),
                    None => println!("FAIL"),
                }
                Ok(EXIT_VERIFY_FAILED)
            }
        }
        Command::Sweep { source, run, dataflow, power } => {
            let cfg = RunConfig::from_args(&run)?;
            for row in cmd_sweep(&source, &cfg, &dataflow, power)? {
                println!("dataflow={} ({} groups)", row.label, row.groups);
                print!("{}", row.report.table());
            }
            println!("{}", cfg.out.join("summary.csv").display());
            Ok(EXIT_OK)
        }
    }
}
