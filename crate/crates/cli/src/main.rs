// SPDX-License-Identifier: Apache-2.0
//! `arianna` command-line driver.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use arianna_core::config::FlowConfig;
use arianna_core::dse::Strategy;
use arianna_core::fixtures;
use arianna_core::flow::{self, compare_summary, load_design};
use arianna_core::ir::{flatten, simulate};

#[derive(Parser)]
#[command(name = "arianna", version, about = "Automatic eFPGA redaction of hierarchical gate-level designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full redaction flow.
    Flow(FlowArgs),
    /// Compare NK, KN, exhaustive and the fixed (4, 4) fabric on every cluster.
    Compare(CompareArgs),
    /// Parse and validate a design, then print its hierarchy.
    ParseCheck(DesignArgs),
    /// Simulate a design on stimulus lines of `port=value` assignments.
    Simulate(SimulateArgs),
    /// Write a built-in benchmark design.
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct DesignArgs {
    /// Verilog files, or one JSON netlist.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long)]
    top: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// One cycle per line; unassigned inputs are 0. Reads stdin when absent.
    #[arg(long)]
    stimulus: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(value_enum)]
    kind: FixtureKind,
    /// Output file (des3) or directory (corpus).
    #[arg(long)]
    out: PathBuf,
    /// Add the wide key-selection module to des3.
    #[arg(long)]
    keyed: bool,
    #[arg(long, default_value_t = fixtures::CORPUS_SEED)]
    seed: u64,
    #[arg(long, default_value_t = fixtures::CORPUS_SIZE)]
    count: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Nk,
    Kn,
    Exhaustive,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Nk => Strategy::Nk,
            StrategyArg::Kn => Strategy::Kn,
            StrategyArg::Exhaustive => Strategy::Exhaustive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    Des3,
    Corpus,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Flow(a) => run_flow(a),
        Command::Compare(a) => run_compare(a),
        Command::ParseCheck(a) => parse_check(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Fixture(a) => write_fixture(a),
    }
}

fn load_config(path: &Path, out: PathBuf, workers: Option<usize>) -> Result<FlowConfig> {
    let mut cfg = FlowConfig::load(path).map_err(|e| anyhow!("[config] {e}"))?;
    cfg.out_dir = Some(out);
    if workers.is_some() {
        cfg.workers = workers;
    }
    Ok(cfg)
}

fn run_flow(a: FlowArgs) -> Result<()> {
    let mut cfg = load_config(&a.config, a.out, a.workers)?;
    if let Some(s) = a.strategy {
        cfg.strategy = s.into();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let o = flow::run_flow(&cfg)?;
    for w in &o.warnings {
        eprintln!("warning: {w}");
    }
    let sel = o.selected();
    println!(
        "candidates {}  clusters {}  feasible {}  solutions {}  oracle calls {}",
        o.kept_candidates(),
        o.clusters.len(),
        o.fabrics.len(),
        o.solutions.len(),
        o.oracle_calls()
    );
    for (i, &f) in sel.fabrics.iter().enumerate() {
        let fc = &o.fabrics[f];
        println!(
            "efpga{i}: {}  n={} k={} W={}  clb_util {:.3}  io_util {:.3}",
            fc.cluster.id, fc.params.n, fc.params.k, fc.result.grid_side, fc.result.clb_util, fc.result.io_util
        );
    }
    println!("mean T {:.6}", sel.mean_score);
    if let Some(v) = &o.verification {
        println!(
            "verification: equivalent on {} {} vectors",
            v.vectors,
            if v.exhaustive { "exhaustive" } else { "random" }
        );
    }
    Ok(())
}

fn run_compare(a: CompareArgs) -> Result<()> {
    let cfg = load_config(&a.config, a.out, a.workers)?;
    let o = flow::run_compare(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&compare_summary(&o))?);
    Ok(())
}

fn parse_check(a: DesignArgs) -> Result<()> {
    let d = load_design(&a.files, a.top.as_deref())?;
    let tree = d.tree();
    println!("top {}  modules {}  instances {}", d.top(), d.modules().count(), tree.len() - 1);
    for p in tree.paths() {
        let depth = p.depth();
        println!("{}{} ({})", "  ".repeat(depth), p.leaf(), tree.module_of(p).unwrap_or("?"));
    }
    Ok(())
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let d = load_design(&a.design.files, a.design.top.as_deref())?;
    let net = flatten(&d, d.top())?;
    let text = match &a.stimulus {
        Some(p) => std::fs::read_to_string(p).with_context(|| p.display().to_string())?,
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    let mut stimulus = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut bits = vec![false; net.input_bits()];
        for tok in line.split_whitespace() {
            let (name, value) = tok.split_once('=').ok_or_else(|| anyhow!("line {}: expected port=value", ln + 1))?;
            let mut off = 0;
            let mut found = false;
            for (port, sigs) in &net.inputs {
                if port == name {
                    let v = parse_value(value, sigs.len()).with_context(|| format!("line {}", ln + 1))?;
                    bits[off..off + sigs.len()].copy_from_slice(&v);
                    found = true;
                }
                off += sigs.len();
            }
            if !found {
                bail!("line {}: no input port `{name}`", ln + 1);
            }
        }
        stimulus.push(bits);
    }
    let outs = simulate(&d, d.top(), &stimulus)?;
    for row in outs {
        let mut off = 0;
        let mut fields = Vec::new();
        for (port, sigs) in &net.outputs {
            fields.push(format!("{port}={}", to_hex(&row[off..off + sigs.len()])));
            off += sigs.len();
        }
        println!("{}", fields.join(" "));
    }
    Ok(())
}

/// Parses decimal, `0x` hex or `0b` binary into `width` bits, LSB first.
fn parse_value(s: &str, width: usize) -> Result<Vec<bool>> {
    let (digits, radix) = if let Some(h) = s.strip_prefix("0x") {
        (h, 16)
    } else if let Some(b) = s.strip_prefix("0b") {
        (b, 2)
    } else {
        let v: u128 = s.parse().map_err(|_| anyhow!("bad value `{s}`"))?;
        return Ok((0..width).map(|i| i < 128 && (v >> i) & 1 == 1).collect());
    };
    let per = if radix == 16 { 4 } else { 1 };
    let mut bits = vec![false; width];
    for (i, c) in digits.chars().filter(|&c| c != '_').rev().enumerate() {
        let d = c.to_digit(radix).ok_or_else(|| anyhow!("bad value `{s}`"))?;
        for j in 0..per {
            let pos = i * per + j;
            if d >> j & 1 == 1 {
                if pos >= width {
                    bail!("value `{s}` wider than {width} bits");
                }
                bits[pos] = true;
            }
        }
    }
    Ok(bits)
}

fn to_hex(bits: &[bool]) -> String {
    let digits: String = bits
        .chunks(4)
        .rev()
        .map(|c| {
            let d = c.iter().enumerate().fold(0u32, |a, (i, &b)| a | (b as u32) << i);
            char::from_digit(d, 16).unwrap()
        })
        .collect();
    format!("0x{digits}")
}

fn write_fixture(a: FixtureArgs) -> Result<()> {
    match a.kind {
        FixtureKind::Des3 => {
            std::fs::write(&a.out, fixtures::des3_like(a.keyed)).with_context(|| a.out.display().to_string())?;
        }
        FixtureKind::Corpus => {
            std::fs::create_dir_all(&a.out)?;
            for (name, text) in fixtures::corpus(a.seed, a.count) {
                let p = a.out.join(format!("{name}.v"));
                std::fs::write(&p, text).with_context(|| p.display().to_string())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_round_trip() {
        assert_eq!(to_hex(&parse_value("0x1f", 8).unwrap()), "0x1f");
        assert_eq!(to_hex(&parse_value("10", 5).unwrap()), "0x0a");
        assert_eq!(parse_value("0b101", 3).unwrap(), vec![true, false, true]);
        assert!(parse_value("0x100", 8).is_err());
    }
}
