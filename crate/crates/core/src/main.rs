use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use parksim::controller::{SystemConfig, DEFAULT_IDENT_TIMEOUT};
use parksim::rf::{DEFAULT_K, DEFAULT_REPETITIONS};
use parksim::runner::{run_scenario, Mode, EXIT_INVALID};
use parksim::scenario::parse_scenario;
use parksim::stepper::{StepperConfig, DEFAULT_DIVIDER, DEFAULT_STEPS_PER_DOOR};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Parking,
    Stepper,
    Ident,
    Allocator,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Parking => Mode::Parking,
            ModeArg::Stepper => Mode::Stepper,
            ModeArg::Ident => Mode::Ident,
            ModeArg::Allocator => Mode::Allocator,
        }
    }
}

/// Run a parking-system scenario and check its assertions.
///
/// Exit status: 0 all assertions pass, 1 an assertion failed, 2 invalid
/// scenario or configuration, 3 internal invariant breach.
#[derive(Debug, Parser)]
#[command(name = "parksim", version)]
struct Args {
    /// Scenario script to run.
    #[arg(long)]
    scenario: PathBuf,
    /// Write the waveform as VCD to this path.
    #[arg(long)]
    vcd: Option<PathBuf>,
    /// Number of parking slots (1..=32).
    #[arg(long, default_value_t = 32)]
    slots: usize,
    /// Clock cycles per stepper step.
    #[arg(long, default_value_t = DEFAULT_DIVIDER)]
    div: u32,
    /// Steps for a full door movement.
    #[arg(long, default_value_t = DEFAULT_STEPS_PER_DOOR)]
    door_steps: u32,
    /// Consecutive matching words the RF decoder needs.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Words transmitted per sensor bank.
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    reps: usize,
    /// Seed for the RF channel noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random bit-error rate on the RF channel, in parts per million.
    #[arg(long, default_value_t = 0)]
    ber_ppm: u32,
    /// Cycles to wait for a card code before closing the door.
    #[arg(long, default_value_t = DEFAULT_IDENT_TIMEOUT)]
    ident_timeout: u32,
    /// Model driven by the scenario.
    #[arg(long, value_enum, default_value = "parking")]
    mode: ModeArg,
    /// Print only failures.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    ExitCode::from(run(&args) as u8)
}

fn run(args: &Args) -> i32 {
    let text = match std::fs::read_to_string(&args.scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.scenario.display());
            return EXIT_INVALID;
        }
    };
    let scenario = match parse_scenario(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}:{e}", args.scenario.display());
            return EXIT_INVALID;
        }
    };
    let stepper = match StepperConfig::new(args.div, args.door_steps) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let config = SystemConfig {
        slots: args.slots,
        stepper,
        k: args.k,
        repetitions: args.reps,
        bit_error_ppm: args.ber_ppm,
        seed: args.seed,
        ident_timeout: args.ident_timeout,
        ..SystemConfig::default()
    };
    let outcome = match run_scenario(&scenario, args.mode.into(), &config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Some(path) = &args.vcd {
        if let Err(e) = std::fs::write(path, outcome.vcd()) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_INVALID;
        }
    }
    let report = &outcome.report;
    if args.quiet {
        for a in report.assertions.iter().filter(|a| !a.passed()) {
            println!("{a}");
        }
        for b in &report.breaches {
            println!("BREACH {b}");
        }
    } else {
        print!("{report}");
    }
    outcome.exit_code()
}
