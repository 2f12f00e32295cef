//! Builds a simulation from a scenario, runs it and checks its assertions.

use std::fmt;

use thiserror::Error;

use crate::bench::{AllocatorUnit, IdentUnit, ParkingUnit, StepperDemoUnit, Stimulus};
use crate::controller::{ConfigError, ParkingSystem, SystemConfig};
use crate::ident::MemberRegistry;
use crate::lcd::ROWS;
use crate::rf::RfError;
use crate::scenario::{Directive, Scenario};
use crate::sim::{Cycle, SimError, Simulation, Trace};
use crate::slots::{SlotError, SlotStatus, SlotTable};
use crate::vcd::{emit_vcd, DEFAULT_TIMESCALE};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BREACH: i32 = 3;

const STIMULUS_ORDER: u32 = 0;
const UNIT_ORDER: u32 = 1;

/// Which model the scenario drives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Mode {
    /// The complete gate controller with all peripherals.
    #[default]
    Parking,
    /// The door motor alone, rotating after reset is released.
    Stepper,
    /// The identification FSM alone.
    Ident,
    /// The slot allocator alone.
    Allocator,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Parking => "parking",
            Mode::Stepper => "stepper",
            Mode::Ident => "ident",
            Mode::Allocator => "allocator",
        }
    }

    fn is_input(self, name: &str) -> bool {
        match self {
            Mode::Parking => ParkingUnit::is_input(name),
            Mode::Stepper => StepperDemoUnit::INPUTS.contains(&name),
            Mode::Ident => IdentUnit::INPUTS.contains(&name),
            Mode::Allocator => AllocatorUnit::INPUTS.contains(&name),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Slot(#[from] SlotError),
    #[error("corrupt directive: {0}")]
    Corrupt(#[from] RfError),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("`{0}` is not an input")]
    NotAnInput(String),
    #[error("value {value} does not fit {width}-bit signal `{signal}`")]
    ValueTooWide {
        signal: String,
        value: u64,
        width: u8,
    },
    #[error("`{directive}` directives are not supported in {mode} mode")]
    Unsupported {
        directive: &'static str,
        mode: &'static str,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        EXIT_INVALID
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionResult {
    pub cycle: u64,
    pub signal: String,
    pub expected: u64,
    pub actual: u64,
}

impl AssertionResult {
    pub fn passed(&self) -> bool {
        self.expected == self.actual
    }
}

impl fmt::Display for AssertionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "PASS @{} {} = {}", self.cycle, self.signal, self.actual)
        } else {
            write!(
                f,
                "FAIL @{} {} expected {} got {}",
                self.cycle, self.signal, self.expected, self.actual
            )
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub mode: Mode,
    pub cycles: u64,
    pub assertions: Vec<AssertionResult>,
    /// Final LCD rows, parking mode only.
    pub lcd_rows: Option<[String; ROWS]>,
    pub slot_table: Option<SlotTable>,
    pub cout: Option<u8>,
    pub log: Vec<String>,
    pub breaches: Vec<String>,
}

impl Report {
    pub fn first_failure(&self) -> Option<&AssertionResult> {
        self.assertions.iter().find(|a| !a.passed())
    }

    pub fn passed(&self) -> bool {
        self.first_failure().is_none() && self.breaches.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        if !self.breaches.is_empty() {
            EXIT_BREACH
        } else if self.first_failure().is_some() {
            EXIT_ASSERTION
        } else {
            EXIT_PASS
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode {} cycles {}", self.mode.name(), self.cycles)?;
        for a in &self.assertions {
            writeln!(f, "{a}")?;
        }
        for b in &self.breaches {
            writeln!(f, "BREACH {b}")?;
        }
        if let Some(rows) = &self.lcd_rows {
            for (i, row) in rows.iter().enumerate() {
                writeln!(f, "lcd{i} |{row}|")?;
            }
        }
        if let Some(table) = &self.slot_table {
            writeln!(f, "slots {table}")?;
        }
        if let Some(cout) = self.cout {
            writeln!(f, "cout {cout}")?;
        }
        for line in &self.log {
            writeln!(f, "{line}")?;
        }
        match self.first_failure() {
            Some(a) => writeln!(
                f,
                "first failure: cycle {} signal {} expected {} actual {}",
                a.cycle, a.signal, a.expected, a.actual
            ),
            None if self.breaches.is_empty() => writeln!(f, "result PASS"),
            None => writeln!(f, "result BREACH"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub trace: Trace,
}

impl RunOutcome {
    pub fn vcd(&self) -> Vec<u8> {
        emit_vcd(&self.trace, DEFAULT_TIMESCALE)
    }

    pub fn exit_code(&self) -> i32 {
        self.report.exit_code()
    }
}

fn unsupported(directive: &'static str, mode: Mode) -> RunError {
    RunError::Unsupported {
        directive,
        mode: mode.name(),
    }
}

pub fn run_scenario(
    scenario: &Scenario,
    mode: Mode,
    config: &SystemConfig,
) -> Result<RunOutcome, RunError> {
    config.validate()?;
    let mut registry = MemberRegistry::new();
    let mut table = SlotTable::new(config.slots)?;
    let mut corruptions = Vec::new();
    for d in &scenario.directives {
        match d {
            Directive::Member(code) => match mode {
                Mode::Parking | Mode::Ident => registry.add_member(*code),
                _ => return Err(unsupported("member", mode)),
            },
            Directive::Slot { index, status } => match mode {
                Mode::Parking | Mode::Allocator => table.set_status(*index, *status)?,
                _ => return Err(unsupported("slot", mode)),
            },
            Directive::Corrupt { at, bit } => match mode {
                Mode::Parking => corruptions.push((Cycle(*at), *bit)),
                _ => return Err(unsupported("corrupt", mode)),
            },
            Directive::Set { .. } | Directive::Assert { .. } => {}
        }
    }

    let mut sim = Simulation::new();
    let handle = match mode {
        Mode::Parking => {
            let mut system = ParkingSystem::new(config.clone())?;
            *system.registry_mut() = registry;
            *system.table_mut() = table;
            for (at, bit) in corruptions {
                system.link_mut().schedule_corruption(at, bit)?;
            }
            let unit = ParkingUnit::new(system, &mut sim)?;
            sim.add(unit, UNIT_ORDER)?
        }
        Mode::Stepper => {
            let unit = StepperDemoUnit::new(config.stepper, &mut sim)?;
            sim.add(unit, UNIT_ORDER)?
        }
        Mode::Ident => {
            let unit = IdentUnit::new(registry, &mut sim)?;
            sim.add(unit, UNIT_ORDER)?
        }
        Mode::Allocator => {
            let unit = AllocatorUnit::new(table, &mut sim)?;
            sim.add(unit, UNIT_ORDER)?
        }
    };

    let mut schedule = Vec::new();
    for (at, name, value) in scenario.sets() {
        let sig = sim
            .signal(name)
            .ok_or_else(|| RunError::UnknownSignal(name.to_string()))?;
        if !mode.is_input(name) {
            return Err(RunError::NotAnInput(name.to_string()));
        }
        let id = sim.ports().signal(sig);
        if !id.fits(value) {
            return Err(RunError::ValueTooWide {
                signal: name.to_string(),
                value,
                width: id.width(),
            });
        }
        schedule.push((Cycle(at), sig, value));
    }
    let mut checks = Vec::new();
    for (at, name, value) in scenario.asserts() {
        let sig = sim
            .signal(name)
            .ok_or_else(|| RunError::UnknownSignal(name.to_string()))?;
        checks.push((at, name.to_string(), sig, value));
    }
    sim.add(Stimulus::new(schedule), STIMULUS_ORDER)?;

    let trace = sim.run(scenario.total).clone();
    let mut report = Report {
        mode,
        cycles: trace.cycles(),
        ..Report::default()
    };
    report.assertions = checks
        .into_iter()
        .map(|(cycle, signal, sig, expected)| AssertionResult {
            cycle,
            signal,
            expected,
            actual: trace.value_at(sig, Cycle(cycle)),
        })
        .collect();

    let mut breaches: Vec<String> = sim.breaches().to_vec();
    if let Err(e) = trace.check_invariants() {
        breaches.push(format!("trace: {e}"));
    }
    match mode {
        Mode::Parking => {
            let unit: &ParkingUnit = sim.component(handle).expect("parking unit");
            let system = unit.system();
            breaches.extend_from_slice(unit.breaches());
            report.lcd_rows = Some(std::array::from_fn(|r| system.lcd().row_text(r)));
            report.slot_table = Some(system.table().clone());
            report.cout = Some(system.cout());
            report.log = system.log().iter().map(|e| e.to_string()).collect();
        }
        Mode::Stepper => {
            let unit: &StepperDemoUnit = sim.component(handle).expect("stepper unit");
            breaches.extend_from_slice(unit.breaches());
            report
                .log
                .push(format!("steps {}", unit.motor().steps_taken()));
        }
        Mode::Ident => {
            let unit: &IdentUnit = sim.component(handle).expect("ident unit");
            breaches.extend_from_slice(unit.breaches());
            report.log.push(format!(
                "next temp card {}",
                unit.registry().next_temp_card()
            ));
        }
        Mode::Allocator => {
            let unit: &AllocatorUnit = sim.component(handle).expect("allocator unit");
            breaches.extend_from_slice(unit.breaches());
            report.slot_table = Some(unit.table().clone());
        }
    }
    report.breaches = breaches;
    Ok(RunOutcome { report, trace })
}

/// Final status of every slot, for callers that only need the table.
pub fn final_statuses(report: &Report) -> Option<&[SlotStatus]> {
    report.slot_table.as_ref().map(|t| t.statuses())
}
