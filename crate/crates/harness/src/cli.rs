//! The `hdlog` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use hdlog_core::decomp::{decompose_with, estimate_cost, width, RelationStats};
use hdlog_core::seminaive::mat;
use hdlog_core::{parse_facts, parse_program, EngineConfig, FactSet, Interner, MaterialisationState, Mode, Program, Region, UpdateRequest};

use crate::gen::{gen_collab, gen_exp, CollabParams, ExpParams, Generated};
use crate::report::{facts_text, Report};

#[derive(Parser, Debug)]
#[command(name = "hdlog", version, about = "Datalog materialisation and incremental maintenance")]
pub struct Cli {
    /// Rule file (.dl).
    #[arg(long, global = true)]
    pub program: Option<PathBuf>,
    /// Explicit facts (.facts).
    #[arg(long, global = true)]
    pub facts: Option<PathBuf>,
    /// standard, hd or combined.
    #[arg(long, global = true, default_value = "combined")]
    pub mode: Mode,
    /// Where to write the resulting materialisation.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Where to write a JSON copy of the report.
    #[arg(long, global = true)]
    pub stats: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Evaluate rules one at a time even when built with rayon.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Materialise the program over the facts.
    Mat,
    /// Materialise, then apply additions and deletions incrementally.
    Update {
        #[arg(long)]
        add: Option<PathBuf>,
        #[arg(long)]
        del: Option<PathBuf>,
    },
    /// Write a generated program and dataset.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Print the decomposition chosen for every rule.
    Decompose,
    /// Compare incremental results with recomputation from scratch.
    Check {
        #[arg(long)]
        add: Option<PathBuf>,
        #[arg(long)]
        del: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    Collab {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out_prefix: PathBuf,
    },
    Exp {
        #[arg(long, default_value_t = 30)]
        expressions: usize,
        #[arg(long, default_value_t = 30)]
        value_sets: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long)]
        out_prefix: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Invariant(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

/// Parses `args` (program name first) and runs the command, returning the
/// exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(Failure::Input(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_INPUT
        }
        Err(Failure::Invariant(msg)) => {
            let _ = writeln!(err, "invariant violated: {msg}");
            EXIT_INVARIANT
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    p.as_deref().with_context(|| format!("--{flag} is required for this command"))
}

fn load_facts(path: Option<&Path>, interner: &mut Interner) -> anyhow::Result<FactSet> {
    match path {
        None => Ok(FactSet::new()),
        Some(p) => parse_facts(&read(p)?, interner).with_context(|| format!("in {}", p.display())),
    }
}

fn load(cli: &Cli, need_facts: bool) -> anyhow::Result<(Interner, Program, FactSet)> {
    let mut interner = Interner::new();
    let path = required(&cli.program, "program")?;
    let program = parse_program(&read(path)?, &mut interner).with_context(|| format!("in {}", path.display()))?;
    let facts_path = if need_facts { Some(required(&cli.facts, "facts")?) } else { cli.facts.as_deref() };
    let facts = load_facts(facts_path, &mut interner)?;
    Ok((interner, program, facts))
}

fn config(cli: &Cli) -> EngineConfig {
    let mut c = EngineConfig::with_mode(cli.mode);
    if cli.sequential {
        c.parallel = false;
    }
    c
}

fn materialise(cli: &Cli, program: &Program, facts: &FactSet, report: &mut Report) -> anyhow::Result<MaterialisationState> {
    let (state, first) = MaterialisationState::materialise(program, facts, config(cli))?;
    report.state(&state);
    report.phase("mat", &first.add, first.add_time);
    Ok(state)
}

fn finish(cli: &Cli, report: &Report, out: &mut dyn Write) -> anyhow::Result<()> {
    write!(out, "{report}")?;
    if let Some(p) = &cli.stats {
        write(p, &serde_json::to_string_pretty(&report.to_json())?)?;
    }
    Ok(())
}

fn write_generated(g: &Generated, prefix: &Path, report: &mut Report) -> anyhow::Result<()> {
    let with_ext = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    let (dl, facts) = (with_ext(".dl"), with_ext(".facts"));
    write(&dl, &g.program)?;
    write(&facts, &g.facts)?;
    report.push("program", dl.display());
    report.push("facts_file", facts.display());
    report.push("explicit", g.facts.lines().count());
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let mut report = Report::default();
    match &cli.command {
        Command::Gen { kind } => {
            let g = match *kind {
                GenKind::Collab { n, k, .. } => gen_collab(CollabParams { n, k })?,
                GenKind::Exp { expressions, value_sets, depth, .. } => gen_exp(ExpParams {
                    num_expressions: expressions,
                    num_value_sets: value_sets,
                    max_depth: depth,
                    seed: cli.seed,
                })?,
            };
            let (GenKind::Collab { out_prefix, .. } | GenKind::Exp { out_prefix, .. }) = kind;
            write_generated(&g, out_prefix, &mut report)?;
        }
        Command::Mat => {
            let (interner, program, facts) = load(cli, true)?;
            let state = materialise(cli, &program, &facts, &mut report)?;
            if let Some(p) = &cli.out {
                write(p, &facts_text(&interner, &state.facts()))?;
            }
        }
        Command::Update { add, del } | Command::Check { add, del } => {
            let (mut interner, program, facts) = load(cli, true)?;
            let add = load_facts(add.as_deref(), &mut interner)?;
            let del = load_facts(del.as_deref(), &mut interner)?;
            let mut state = materialise(cli, &program, &facts, &mut report)?;
            let u = state.update(&UpdateRequest::new(add.clone(), del.clone()));
            report.update("update", &u);
            report.push("facts_after", state.len());
            if let Command::Check { .. } = cli.command {
                let started = Instant::now();
                let target: FactSet = facts.difference(&del).chain(add.iter()).cloned().collect();
                let fresh = mat(&program, &target).0.facts(Region::All);
                if state.facts() != fresh {
                    let extra = state.facts().difference(&fresh).count();
                    let missing = fresh.difference(&state.facts()).count();
                    return Err(Failure::Invariant(format!("materialisation differs from recomputation: {extra} extra, {missing} missing")));
                }
                state.check_invariants().map_err(|e| Failure::Invariant(e.to_string()))?;
                report.push("check", "ok");
                report.push("check.time_ms", format!("{:.3}", started.elapsed().as_secs_f64() * 1e3));
            }
            if let Some(p) = &cli.out {
                write(p, &facts_text(&interner, &state.facts()))?;
            }
        }
        Command::Decompose => {
            let (interner, program, facts) = load(cli, false)?;
            let mut stats = RelationStats::from_facts(&facts);
            stats.complete_for(program.rules());
            let c = config(cli);
            let parts = hdlog_core::dred::partition_program(&program, &stats, c.mode, c.search).map_err(anyhow::Error::from)?;
            for (rule, (module, _)) in program.rules().iter().zip(parts) {
                let hd = decompose_with(rule, &stats, c.search, Some(&interner)).map_err(anyhow::Error::from)?;
                let cost = estimate_cost(rule, &hd, &stats).map_err(anyhow::Error::from)?;
                report.push(format!("rule.r{}", rule.id), interner.display_rule(rule));
                report.push(format!("rule.r{}.module", rule.id), module);
                report.push(format!("rule.r{}.width", rule.id), width(&hd));
                report.push(format!("rule.r{}.cost", rule.id), format!("{cost:.1}"));
                finish_dump(&hd.dump(rule, &interner), out)?;
            }
        }
    }
    finish(cli, &report, out)?;
    Ok(())
}

fn finish_dump(dump: &str, out: &mut dyn Write) -> anyhow::Result<()> {
    out.write_all(dump.as_bytes())?;
    if !dump.ends_with('\n') && !dump.is_empty() {
        writeln!(out)?;
    }
    Ok(())
}
