use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dmtl::analysis::{report, DependencyGraph};
use dmtl::engine::{self, Config, Decision, EngineError, Strategy, Verdict};
use dmtl::materialise::{Materialiser, Mode, Options, Outcome};
use dmtl::syntax::{parse_dataset, parse_fact, parse_program, ParseError};
use dmtl::{Dataset, Fact, Program};

const NO: u8 = 0;
const YES: u8 = 1;
const USAGE: u8 = 2;
const BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "dmtl", version, about = "DatalogMTL reasoner: consistency and fact entailment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a fact is entailed.
    Decide {
        #[command(flatten)]
        input: Input,
        /// Query fact, e.g. "R1(c1,c2)@[4,4]".
        #[arg(long)]
        fact: String,
        #[command(flatten)]
        limits: Limits,
    },
    /// Materialise and print the store in canonical order.
    Materialise {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = EngineMode::Optimised)]
        mode: EngineMode,
        /// Stop after this many steps; without it, running out of the
        /// default step budget is reported as a budget error.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Decide whether the program and dataset are consistent.
    Consistency {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        limits: Limits,
    },
    /// Print the predicate classification and the dependency graph in DOT.
    Analyze {
        #[arg(long)]
        program: PathBuf,
    },
    /// Materialise in each mode and write one trace record per step.
    Bench {
        #[command(flatten)]
        input: Input,
        /// Output file for the trace records; "-" for standard output.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, num_args = 1.., default_values_t = [EngineMode::Naive, EngineMode::Seminaive, EngineMode::Optimised])]
        modes: Vec<EngineMode>,
        #[arg(long, default_value_t = 10)]
        max_steps: usize,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    program: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct Limits {
    #[arg(long, value_enum, default_value_t = EngineMode::Auto)]
    mode: EngineMode,
    /// Step budget for materialisation.
    #[arg(long)]
    max_steps: Option<usize>,
    /// State budget for each automata check.
    #[arg(long)]
    budget_states: Option<usize>,
    /// Time budget for each automata check, in seconds.
    #[arg(long)]
    budget_seconds: Option<f64>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    threads: u8,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineMode {
    Auto,
    Naive,
    Seminaive,
    Optimised,
    Automata,
}

impl EngineMode {
    fn materialisation(self) -> Option<Mode> {
        match self {
            EngineMode::Naive => Some(Mode::Naive),
            EngineMode::Seminaive => Some(Mode::Seminaive),
            EngineMode::Optimised | EngineMode::Auto => Some(Mode::Optimised),
            EngineMode::Automata => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            EngineMode::Auto => "auto",
            EngineMode::Naive => "naive",
            EngineMode::Seminaive => "seminaive",
            EngineMode::Optimised => "optimised",
            EngineMode::Automata => "automata",
        }
    }
}

struct Failure(u8, String);

type Run = Result<u8, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure(USAGE, msg.into())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn located(path: &Path, e: ParseError) -> Failure {
    usage(format!("{}: {e}", path.display()))
}

fn load(input: &Input) -> Result<(Program, Dataset), Failure> {
    let p = parse_program(&read(&input.program)?).map_err(|e| located(&input.program, e))?;
    let d = parse_dataset(&read(&input.dataset)?).map_err(|e| located(&input.dataset, e))?;
    Ok((p, d))
}

fn config(limits: &Limits) -> Result<Config, Failure> {
    let strategy = match limits.mode {
        EngineMode::Auto => Strategy::Auto,
        EngineMode::Automata => Strategy::Automata,
        m => Strategy::Materialise(m.materialisation().unwrap()),
    };
    let mut cfg = Config { strategy, max_steps: limits.max_steps, threads: limits.threads.into(), ..Config::default() };
    if let Some(n) = limits.budget_states {
        cfg.max_states = n;
    }
    if let Some(s) = limits.budget_seconds {
        cfg.max_time = Some(Duration::try_from_secs_f64(s).map_err(|e| usage(format!("--budget-seconds: {e}")))?);
    }
    Ok(cfg)
}

fn report_decision(r: Result<Decision, EngineError>) -> Run {
    match r {
        Ok(d) => {
            println!("{}", d.verdict.name());
            eprintln!("decided by {} after {} materialisation steps", d.provenance, d.steps);
            Ok(match d.verdict {
                Verdict::Inconsistent | Verdict::Entailed(_) => YES,
                Verdict::NotEntailed(_) | Verdict::Consistent(_) => NO,
            })
        }
        Err(e @ EngineError::Budget { .. }) => Err(Failure(BUDGET, e.to_string())),
    }
}

fn decide(input: &Input, fact: &str, limits: &Limits) -> Run {
    let (p, d) = load(input)?;
    let f: Fact = parse_fact(fact).map_err(|e| usage(format!("--fact: {e}")))?;
    report_decision(engine::decide(&p, &d, &f, &config(limits)?))
}

fn consistency(input: &Input, limits: &Limits) -> Run {
    let (p, d) = load(input)?;
    report_decision(engine::consistency(&p, &d, &config(limits)?))
}

fn materialise(input: &Input, mode: EngineMode, max_steps: Option<usize>) -> Run {
    let (p, d) = load(input)?;
    let mode = mode.materialisation().ok_or_else(|| usage("materialise needs a materialisation mode"))?;
    let opts = Options { max_steps: max_steps.or(Options::default().max_steps), ..Options::mode(mode) };
    let mut m = Materialiser::new(&p, &d, None, opts);
    let outcome = m.run();
    if outcome == Outcome::Inconsistent {
        println!("inconsistent");
        return Ok(YES);
    }
    print!("{}", m.store().dump());
    if outcome == Outcome::Continue && max_steps.is_none() {
        return Err(Failure(BUDGET, format!("no fixpoint after {} steps", m.steps())));
    }
    Ok(NO)
}

fn analyze(program: &Path) -> Run {
    let p = parse_program(&read(program)?).map_err(|e| located(program, e))?;
    print!("{}", report(&p));
    print!("{}", DependencyGraph::new(&p).to_dot());
    Ok(NO)
}

fn bench(input: &Input, trace: &Path, modes: &[EngineMode], max_steps: usize) -> Run {
    let (p, d) = load(input)?;
    let mut out = String::new();
    for &mode in modes {
        let m = mode.materialisation().ok_or_else(|| usage("bench needs materialisation modes"))?;
        let mut mat = Materialiser::new(&p, &d, None, Options { max_steps: Some(max_steps), ..Options::mode(m) });
        let outcome = mat.run();
        for r in &mat.trace {
            out.push_str(&format!("{{\"mode\":\"{}\",{}\n", mode.name(), &r.to_json()[1..]));
        }
        eprintln!("{}: {:?} after {} steps, {} instances", mode.name(), outcome, mat.steps(), mat.instances_total);
    }
    let written = if trace == Path::new("-") {
        std::io::stdout().write_all(out.as_bytes())
    } else {
        fs::write(trace, out)
    };
    written.map_err(|e| usage(format!("{}: {e}", trace.display())))?;
    Ok(NO)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Decide { input, fact, limits } => decide(input, fact, limits),
        Command::Materialise { input, mode, max_steps } => materialise(input, *mode, *max_steps),
        Command::Consistency { input, limits } => consistency(input, limits),
        Command::Analyze { program } => analyze(program),
        Command::Bench { input, trace, modes, max_steps } => bench(input, trace, modes, *max_steps),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
