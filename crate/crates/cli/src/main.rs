use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dsfuse_core::bench::bench_kernels;
use dsfuse_core::error::{Error, Result};
use dsfuse_core::exec::simulate;
use dsfuse_core::fused::Tiling;
use dsfuse_core::memsim::{LevelPair, TensorClass};
use dsfuse_core::model::MemHierarchy;
use dsfuse_core::net::{builtin, load_graph, save_graph, NetworkGraph, BUILTIN_NAMES};
use dsfuse_core::planner::{optimize, replay, FdPolicy, FusionPlan, Objective, PlannerConfig};

#[derive(Parser)]
#[command(name = "dsfuse", version, about = "Fused DW/PW kernel benchmarking and network fusion planning")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Latency,
    Transfers,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    MinFullUtilization,
    LargestFitting,
}

#[derive(Clone, Copy, ValueEnum)]
enum TilingArg {
    Channels,
    Rows,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Modeled fused-vs-unfused overhead of the preset kernels over a geometry grid.
    BenchKernels {
        #[arg(long, default_value = "paper36")]
        grid: String,
        /// Preset name or TOML file.
        #[arg(long, default_value = "gap8")]
        hierarchy: String,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Emit every (kernel, fd, geometry) row instead of per-cell medians.
        #[arg(long)]
        rows: bool,
        /// Skip the numeric check of each cell.
        #[arg(long)]
        no_oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plans a network and writes the plan file.
    Plan {
        /// Builtin name or graph TOML file.
        #[arg(long)]
        net: String,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Latency)]
        objective: ObjectiveArg,
        #[arg(long, default_value = "gap8")]
        hierarchy: String,
        #[arg(long, value_enum, default_value_t = PolicyArg::MinFullUtilization)]
        fd_policy: PolicyArg,
        #[arg(long, value_enum, default_value_t = TilingArg::Channels)]
        pwdw_tiling: TilingArg,
        #[arg(long, default_value_t = 24)]
        max_blocks: usize,
        #[arg(long, default_value = "plan.json")]
        out: PathBuf,
    },
    /// Replays a plan's costs and runs it numerically against the reference kernels.
    Simulate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Writes the JSON simulation report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-node cycle and transfer breakdown of a plan.
    Report {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, conflicts_with = "json")]
        csv: bool,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lists, shows or exports network graphs.
    Net {
        /// Builtin name or graph file; omitted lists the builtins.
        name: Option<String>,
        /// Writes the graph as TOML.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Prints a memory hierarchy as TOML.
    Config {
        #[arg(default_value = "gap8")]
        hierarchy: String,
    },
}

fn load_net(spec: &str) -> Result<NetworkGraph> {
    if BUILTIN_NAMES.contains(&spec) {
        builtin(spec)
    } else if Path::new(spec).exists() {
        load_graph(Path::new(spec))
    } else {
        Err(Error::UnknownNetwork(spec.into()))
    }
}

fn load_plan(path: &Path) -> Result<FusionPlan> {
    FusionPlan::from_json(&fs::read_to_string(path)?)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializes");
    s.push('\n');
    s
}

fn pct(new: u64, old: u64) -> String {
    if old == 0 {
        return "n/a".into();
    }
    format!("{:+.2}%", (new as f64 / old as f64 - 1.0) * 100.0)
}

#[derive(Serialize)]
struct ReportRow {
    node: usize,
    name: String,
    layers: String,
    choice: String,
    kernel: String,
    macs: u64,
    compute_cycles: u64,
    transfer_cycles: u64,
    total_cycles: u64,
    activation_l2_l1_bytes: u64,
    weight_bytes_moved: u64,
    amt_bytes: u64,
    peak_l1_bytes: u64,
}

fn report_rows(plan: &FusionPlan) -> Vec<ReportRow> {
    plan.nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let c = &n.cost;
            let layers = match (n.layers.first(), n.layers.last()) {
                (Some(a), Some(b)) if a != b => format!("{a}-{b}"),
                (Some(a), _) => a.to_string(),
                _ => String::new(),
            };
            ReportRow {
                node: i,
                name: n.name.clone(),
                layers,
                choice: n.choice.clone(),
                kernel: n.kernel.clone(),
                macs: c.macs,
                compute_cycles: c.compute_cycles,
                transfer_cycles: c.transfer_cycles,
                total_cycles: c.total_cycles,
                activation_l2_l1_bytes: c.ledger.activation_l2_l1(),
                weight_bytes_moved: c.ledger.class_total(TensorClass::Weight),
                amt_bytes: c.amt(),
                peak_l1_bytes: c.peak_l1_bytes,
            }
        })
        .collect()
}

fn summary(p: &FusionPlan) -> String {
    let (f, b) = (&p.predicted, &p.baseline);
    let mut s = String::new();
    s += &format!("network      {}\n", p.network.name);
    s += &format!("objective    {}\n", p.config.objective.name());
    s += &format!("blocks       {} slots, {} combinations, {} fused\n", p.search.blocks, p.search.combinations, p.fused_count());
    s += &format!("MACs         {}\n", f.macs);
    s += &format!("cycles       {} (unfused {}, {})\n", f.total_cycles, b.total_cycles, pct(f.total_cycles, b.total_cycles));
    s += &format!("AMT bytes    {} (unfused {}, {})\n", f.amt(), b.amt(), pct(f.amt(), b.amt()));
    let (fa, ba) = (f.ledger.activation_l2_l1(), b.ledger.activation_l2_l1());
    s += &format!("L2-L1 act    {} (unfused {}, {})\n", fa, ba, pct(fa, ba));
    s += &format!("L3-L2 bytes  {}\n", f.ledger.pair_total(LevelPair::L3L2));
    s += &format!("peak L1      {} of {}\n", f.peak_l1_bytes, p.hierarchy.l1());
    s
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::BenchKernels { grid, hierarchy, format, rows, no_oracle, out } => {
            let h = MemHierarchy::load(&hierarchy)?;
            let r = bench_kernels(&grid, &h, !no_oracle)?;
            let text = match (format, rows) {
                (Format::Json, _) => json(&r),
                (Format::Csv, true) => to_csv(&r.rows)?,
                (Format::Csv, false) => to_csv(&r.cells)?,
                (Format::Table, true) => {
                    let mut s = format!("{:<34} {:>3} {:>4} {:>2} {:>4} {:>4} {:>12} {:>12} {:>9}\n", "kernel", "fd", "ix", "s", "c", "k", "fused", "unfused", "overhead");
                    for x in &r.rows {
                        s += &format!("{:<34} {:>3} {:>4} {:>2} {:>4} {:>4} {:>12} {:>12} {:>8.2}%\n", x.kernel, x.fd, x.ix, x.s, x.c, x.k, x.fused_cycles, x.unfused_cycles, x.overhead * 100.0);
                    }
                    s
                }
                (Format::Table, false) => {
                    let mut s = format!("{:<34} {:>3} {:>5} {:>16} {:>7}\n", "kernel", "fd", "rows", "median overhead", "oracle");
                    for c in &r.cells {
                        let o = if no_oracle { "skip" } else if c.oracle_ok { "OK" } else { "FAIL" };
                        s += &format!("{:<34} {:>3} {:>5} {:>15.2}% {:>7}\n", c.kernel, c.fd, c.rows, c.median_overhead * 100.0, o);
                    }
                    s
                }
            };
            emit(&text, out.as_deref())?;
            if r.cells.iter().any(|c| !c.oracle_ok) {
                return Err(Error::Oracle("a fused kernel disagreed with the reference".into()));
            }
        }
        Cmd::Plan { net, objective, hierarchy, fd_policy, pwdw_tiling, max_blocks, out } => {
            let g = load_net(&net)?;
            let h = MemHierarchy::load(&hierarchy)?;
            let cfg = PlannerConfig {
                objective: match objective {
                    ObjectiveArg::Latency => Objective::Latency,
                    ObjectiveArg::Transfers => Objective::Transfers,
                },
                fd_policy: match fd_policy {
                    PolicyArg::MinFullUtilization => FdPolicy::MinFullUtilization,
                    PolicyArg::LargestFitting => FdPolicy::LargestFitting,
                },
                pwdw_tiling: match pwdw_tiling {
                    TilingArg::Channels => Tiling::Channels,
                    TilingArg::Rows => Tiling::Rows,
                },
                max_blocks,
                ..Default::default()
            };
            let plan = optimize(&g, &h, &cfg)?;
            fs::write(&out, plan.to_json() + "\n")?;
            print!("{}", summary(&plan));
            println!("plan written to {}", out.display());
        }
        Cmd::Simulate { plan, seed, out } => {
            let p = load_plan(&plan)?;
            replay(&p)?;
            let r = simulate(&p, seed)?;
            for n in &r.nodes {
                let status = if n.ok() { "oracle OK".to_string() } else { format!("oracle FAIL ({} of {} values differ)", n.mismatches, n.elements) };
                println!("{:<40} {:<34} {status}", n.name, n.kernel);
            }
            println!("output checksum {}", r.output_checksum);
            if let Some(o) = out {
                fs::write(o, json(&r))?;
            }
            if !r.ok() {
                return Err(Error::Oracle("plan output differs from the reference".into()));
            }
        }
        Cmd::Report { plan, csv, json: as_json, out } => {
            let p = load_plan(&plan)?;
            let rows = report_rows(&p);
            let text = if csv {
                to_csv(&rows)?
            } else if as_json {
                json(&rows)
            } else {
                let mut s = format!("{:<40} {:>9} {:>12} {:>12} {:>12} {:>10}\n", "node", "choice", "compute", "transfer", "total", "amt");
                for r in &rows {
                    s += &format!("{:<40} {:>9} {:>12} {:>12} {:>12} {:>10}\n", r.name, r.choice, r.compute_cycles, r.transfer_cycles, r.total_cycles, r.amt_bytes);
                }
                s
            };
            emit(&text, out.as_deref())?;
        }
        Cmd::Net { name, export } => match name {
            None => {
                for n in BUILTIN_NAMES {
                    let g = builtin(n)?;
                    println!("{n:<8} {:>3} layers {:>11} MACs {:>9} weight bytes", g.layers.len(), g.macs(), g.weight_bytes());
                }
            }
            Some(n) => {
                let g = load_net(&n)?;
                match export {
                    Some(p) => save_graph(&g, &p)?,
                    None => print!("{}", g.to_toml()),
                }
            }
        },
        Cmd::Config { hierarchy } => print!("{}", MemHierarchy::load(&hierarchy)?.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
