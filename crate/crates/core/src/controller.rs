//! Top-level parking controller.
//!
//! [`ParkingSystem`] owns every subsystem and advances them once per cycle in
//! a fixed order: RF link, identification, slot table, controller FSM,
//! stepper, LCD. Later stages see the earlier stages' results from the same
//! cycle; the controller's own state reaches the identification FSM one cycle
//! later.
//!
//! Entry sequence: `car_enter` -> space check -> LCD message and door open ->
//! identification -> slot check -> allotment -> door close -> idle.

use std::fmt;

use thiserror::Error;

use crate::ident::{IdentFsm, IdentInputs, IdentOutputs, MemberRegistry};
use crate::lcd::{LcdBus, LcdDevice, LcdDriver, MSG_NO_SPACE, MSG_SPACE_AVAILABLE};
use crate::rf::{LinkConfig, LinkTick, RfError, RfLink, BANKS};
use crate::sim::Cycle;
use crate::slots::{encode_slotallot, SlotError, SlotLeds, SlotStatus, SlotTable};
use crate::stepper::{DoorAction, StepperConfig, StepperError, StepperState};

pub const MAX_SLOTS: usize = 32;
/// Cycles the controller waits in `Identify` for a completed code entry.
pub const DEFAULT_IDENT_TIMEOUT: u32 = 16;
/// Slack added to the door travel time in the return-to-idle bound.
pub const IDLE_SLACK_CYCLES: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("slot count {0} outside 1..=32")]
    Slots(usize),
    #[error(transparent)]
    Stepper(#[from] StepperError),
    #[error(transparent)]
    Link(#[from] RfError),
    #[error(transparent)]
    Table(#[from] SlotError),
    #[error("identification timeout must be at least 1 cycle")]
    IdentTimeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemConfig {
    pub slots: usize,
    pub stepper: StepperConfig,
    pub k: usize,
    pub repetitions: usize,
    pub bank_addresses: [u8; BANKS],
    pub bit_error_ppm: u32,
    pub seed: u64,
    pub ident_timeout: u32,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let link = LinkConfig::default();
        SystemConfig {
            slots: crate::slots::DEFAULT_CAPACITY,
            stepper: StepperConfig::default(),
            k: link.k,
            repetitions: link.repetitions,
            bank_addresses: link.addresses,
            bit_error_ppm: 0,
            seed: 0,
            ident_timeout: DEFAULT_IDENT_TIMEOUT,
        }
    }
}

impl SystemConfig {
    pub fn link(&self) -> LinkConfig {
        LinkConfig {
            addresses: self.bank_addresses,
            banks: self.slots.div_ceil(4).clamp(1, BANKS),
            repetitions: self.repetitions,
            k: self.k,
            bit_error_ppm: self.bit_error_ppm,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.slots == 0 || self.slots > MAX_SLOTS {
            return Err(ConfigError::Slots(self.slots));
        }
        if self.ident_timeout == 0 {
            return Err(ConfigError::IdentTimeout);
        }
        self.link().validate()?;
        Ok(())
    }

    /// Cycles within which the controller is back in `Idle` once inputs go quiet.
    pub fn idle_bound(&self) -> u64 {
        2 * self.stepper.steps_per_door() as u64 * self.stepper.divider() as u64 + IDLE_SLACK_CYCLES
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum ControllerState {
    #[default]
    Idle,
    SpaceCheck,
    DisplayNoSpace,
    OpenDoor,
    Identify,
    SlotCheck,
    Allot,
    CloseDoor,
}

impl ControllerState {
    /// Encoding used for the `state` trace signal.
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TopInputs {
    pub reset: bool,
    pub car_enter: bool,
    /// Identification code bit.
    pub w2: bool,
    /// Identification bit strobe.
    pub w3: bool,
    /// Identification acknowledge / abort.
    pub w4: bool,
    /// Starts an RF sensor sweep on its rising edge.
    pub fnd: bool,
    /// Exit request on its rising edge, for the slot on `exit_slot`.
    pub a: bool,
    pub exit_slot: u8,
    /// IR occupancy nibble of each sensor bank.
    pub ir: [u8; BANKS],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TopOutputs {
    pub identified: bool,
    pub new_member: bool,
    pub out_1: bool,
    pub fnd1: bool,
    pub z: u8,
    pub clkd: bool,
    pub leds: SlotLeds,
    pub cout: u8,
    pub slotallot: u8,
    pub led_slotallot: bool,
    pub lcd: LcdBus,
    pub rf_tx: bool,
    pub rf_rx: bool,
    pub vt: bool,
    pub state: ControllerState,
    pub steps: u64,
    pub free: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogLevel {
    Info,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub cycle: Cycle,
    pub level: LogLevel,
    pub message: String,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.level {
            LogLevel::Info => "INFO",
            LogLevel::Warning => "WARN",
        };
        write!(f, "{tag} @{} {}", self.cycle, self.message)
    }
}

/// Running totals over a simulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub entries: u64,
    pub identifications: u64,
    pub allotments: u64,
    pub exits: u64,
}

#[derive(Debug, Clone)]
pub struct ParkingSystem {
    config: SystemConfig,
    state: ControllerState,
    ident: IdentFsm,
    registry: MemberRegistry,
    table: SlotTable,
    /// Slots reserved through the gate and not yet released.
    allotted: Vec<bool>,
    stepper: StepperState,
    lcd_driver: LcdDriver,
    lcd: LcdDevice,
    link: RfLink,
    cout: u8,
    slotallot: u8,
    shown_slot: Option<usize>,
    ident_wait: u32,
    door_commanded: bool,
    last_fnd: bool,
    last_a: bool,
    now: Cycle,
    counters: Counters,
    log: Vec<LogEntry>,
}

impl ParkingSystem {
    pub fn new(config: SystemConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(ParkingSystem {
            state: ControllerState::Idle,
            ident: IdentFsm::new(),
            registry: MemberRegistry::new(),
            table: SlotTable::new(config.slots)?,
            allotted: vec![false; config.slots],
            stepper: StepperState::new(config.stepper),
            lcd_driver: LcdDriver::new(),
            lcd: LcdDevice::new(),
            link: RfLink::new(config.link())?,
            cout: 0,
            slotallot: 0,
            shown_slot: None,
            ident_wait: 0,
            door_commanded: false,
            last_fnd: false,
            last_a: false,
            now: Cycle::ZERO,
            counters: Counters::default(),
            log: Vec::new(),
            config,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn state(&self) -> ControllerState {
        self.state
    }

    pub fn registry(&self) -> &MemberRegistry {
        &self.registry
    }

    pub fn registry_mut(&mut self) -> &mut MemberRegistry {
        &mut self.registry
    }

    pub fn table(&self) -> &SlotTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut SlotTable {
        &mut self.table
    }

    pub fn stepper(&self) -> &StepperState {
        &self.stepper
    }

    pub fn lcd(&self) -> &LcdDevice {
        &self.lcd
    }

    pub fn ident(&self) -> &IdentFsm {
        &self.ident
    }

    pub fn link_mut(&mut self) -> &mut RfLink {
        &mut self.link
    }

    pub fn cout(&self) -> u8 {
        self.cout
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn warnings(&self) -> impl Iterator<Item = &LogEntry> {
        self.log.iter().filter(|e| e.level == LogLevel::Warning)
    }

    fn info(&mut self, message: String) {
        self.log.push(LogEntry {
            cycle: self.now,
            level: LogLevel::Info,
            message,
        });
    }

    fn warn(&mut self, message: String) {
        self.log.push(LogEntry {
            cycle: self.now,
            level: LogLevel::Warning,
            message,
        });
    }

    fn show(&mut self, text: &str) {
        self.lcd_driver
            .show(text, 0)
            .expect("fixed messages fit the display");
    }

    fn command_door(&mut self, action: DoorAction) {
        if let Err(e) = self.stepper.command_door(action) {
            self.warn(format!("door {action:?} refused: {e}"));
        }
    }

    /// Releases `slot` for a departing car.
    pub fn handle_exit(&mut self, slot: usize) {
        if let Err(e) = self.table.release(slot) {
            self.warn(format!("exit ignored: {e}"));
            return;
        }
        self.counters.exits += 1;
        self.shown_slot = Some(slot);
        if std::mem::take(&mut self.allotted[slot]) {
            self.cout = self.cout.saturating_sub(1);
            self.info(format!("slot {slot} released"));
        } else {
            self.warn(format!(
                "slot {slot} released but was not allotted at the gate; count unchanged"
            ));
        }
    }

    fn reset(&mut self) {
        self.state = ControllerState::Idle;
        self.ident = IdentFsm::new();
        self.stepper = StepperState::new(self.config.stepper);
        self.link.reset();
        self.allotted.iter_mut().for_each(|a| *a = false);
        self.cout = 0;
        self.slotallot = 0;
        self.shown_slot = None;
        self.ident_wait = 0;
        self.door_commanded = false;
        self.last_fnd = false;
        self.last_a = false;
    }

    /// Advances the whole system by one clock cycle.
    pub fn step(&mut self, inputs: &TopInputs) -> TopOutputs {
        let out = if inputs.reset {
            self.reset();
            let pins = self.lcd_driver.reset();
            self.sample_lcd(pins);
            TopOutputs {
                z: self.stepper.z(),
                clkd: self.stepper.clkd(),
                lcd: pins,
                steps: self.stepper.steps_taken(),
                free: self.table.free_count(),
                ..TopOutputs::default()
            }
        } else {
            self.step_running(inputs)
        };
        self.now = self.now.next();
        out
    }

    fn step_running(&mut self, inputs: &TopInputs) -> TopOutputs {
        // RF link
        let fnd_rise = inputs.fnd && !self.last_fnd;
        self.last_fnd = inputs.fnd;
        let ir = inputs.ir.map(|n| n & 0x0F);
        let link = self.link.tick(self.now, fnd_rise, &ir);

        // identification
        let engaged = matches!(
            self.state,
            ControllerState::Identify | ControllerState::SlotCheck | ControllerState::Allot
        );
        let ident_in = IdentInputs {
            w: self.state == ControllerState::Identify,
            w1: inputs.w2,
            w2: inputs.w3,
            z: inputs.w4 || !engaged,
        };
        let ident = self.ident.step(&mut self.registry, ident_in, false);
        if ident.out_1 {
            let code = self.ident.resolved_code().unwrap_or_default();
            match ident.temp_card {
                Some(card) if ident.new_member => self.info(format!(
                    "new member {code:#04x}: temporary card {card} allotted"
                )),
                _ => self.info(format!("member {code:#04x} identified")),
            }
        }

        // slot table
        self.ingest(&link);
        let a_rise = inputs.a && !self.last_a;
        self.last_a = inputs.a;
        if a_rise {
            self.handle_exit(inputs.exit_slot as usize);
        }

        // controller
        self.advance_fsm(inputs, &ident);

        // stepper, LCD
        let motor = self.stepper.tick();
        let pins = self.lcd_driver.tick();
        self.sample_lcd(pins);

        let leds = self
            .shown_slot
            .and_then(|s| self.table.query(s).ok())
            .unwrap_or_default();
        TopOutputs {
            identified: ident.identified,
            new_member: ident.new_member,
            out_1: ident.out_1,
            fnd1: link.sweep_done,
            z: motor.z,
            clkd: motor.clkd,
            leds,
            cout: self.cout,
            slotallot: self.slotallot,
            led_slotallot: self.slotallot & crate::slots::SLOTALLOT_VALID != 0,
            lcd: pins,
            rf_tx: link.tx,
            rf_rx: link.rx,
            vt: link.vt(),
            state: self.state,
            steps: self.stepper.steps_taken(),
            free: self.table.free_count(),
        }
    }

    fn ingest(&mut self, link: &LinkTick) {
        if let Some((bank, nibble)) = link.delivered {
            if let Err(e) = self.table.ingest_sensor(bank, nibble) {
                self.warn(format!("sensor data dropped: {e}"));
            }
            // a filled slot reported vacant means the car left without an exit request
            for slot in bank * 4..(bank * 4 + 4).min(self.table.capacity()) {
                if self.allotted[slot] && self.table.statuses()[slot] == SlotStatus::Empty {
                    self.allotted[slot] = false;
                    self.cout = self.cout.saturating_sub(1);
                    self.warn(format!("slot {slot} vacated without exit request"));
                }
            }
        }
        if let Some(bank) = link.rejected {
            self.warn(format!("sensor bank {bank}: no valid transmission"));
        }
    }

    fn sample_lcd(&mut self, pins: LcdBus) {
        if let Some(Err(w)) = self.lcd.sample(pins) {
            self.warn(format!("lcd: {w}"));
        }
    }

    fn advance_fsm(&mut self, inputs: &TopInputs, ident: &IdentOutputs) {
        use ControllerState::*;
        self.state = match self.state {
            Idle if inputs.car_enter => {
                self.counters.entries += 1;
                SpaceCheck
            }
            Idle => Idle,
            SpaceCheck => {
                self.slotallot = 0;
                if self.table.free_count() > 0 {
                    self.show(MSG_SPACE_AVAILABLE);
                    self.door_commanded = false;
                    OpenDoor
                } else {
                    self.show(MSG_NO_SPACE);
                    DisplayNoSpace
                }
            }
            DisplayNoSpace if inputs.car_enter => DisplayNoSpace,
            DisplayNoSpace => Idle,
            // the door starts once the message is on the display
            OpenDoor if !self.door_commanded => {
                if self.lcd_driver.is_idle() {
                    self.command_door(DoorAction::Open);
                    self.door_commanded = true;
                }
                OpenDoor
            }
            OpenDoor if self.stepper.is_busy() => OpenDoor,
            OpenDoor => {
                self.ident_wait = 0;
                Identify
            }
            Identify if ident.out_1 => {
                self.counters.identifications += 1;
                SlotCheck
            }
            Identify => {
                self.ident_wait += 1;
                if self.ident_wait >= self.config.ident_timeout {
                    self.warn("identification timed out".to_string());
                    self.command_door(DoorAction::Close);
                    CloseDoor
                } else {
                    Identify
                }
            }
            SlotCheck => Allot,
            Allot => {
                match self.table.allocate() {
                    Some(slot) => {
                        self.allotted[slot] = true;
                        self.cout += 1;
                        self.slotallot = encode_slotallot(Some(slot));
                        self.shown_slot = Some(slot);
                        self.counters.allotments += 1;
                        self.info(format!("slot {slot} allotted"));
                    }
                    None => {
                        self.slotallot = 0;
                        self.show(MSG_NO_SPACE);
                        self.warn("lot filled before allotment; no slot given".to_string());
                    }
                }
                self.command_door(DoorAction::Close);
                CloseDoor
            }
            CloseDoor if self.stepper.is_busy() => CloseDoor,
            CloseDoor => Idle,
        };
    }

    /// Cross-checks that must hold after every cycle; returns the violations.
    pub fn audit(&self) -> Vec<String> {
        let mut breaches = Vec::new();
        let reserved_at_gate = self
            .allotted
            .iter()
            .zip(self.table.statuses())
            .filter(|(&a, &s)| a && s != SlotStatus::Empty)
            .count();
        if self.cout as usize != reserved_at_gate {
            breaches.push(format!(
                "cout {} differs from {} slots allotted at the gate",
                self.cout, reserved_at_gate
            ));
        }
        if self.cout as usize > self.table.capacity() {
            breaches.push(format!("cout {} exceeds capacity", self.cout));
        }
        if self.ident.phase() == crate::ident::IdentPhase::Lookup && self.ident.bits_captured() != 8
        {
            breaches.push("identification lookup with incomplete code".to_string());
        }
        if self.state == ControllerState::DisplayNoSpace && self.stepper.is_busy() {
            breaches.push("door moving while showing no space".to_string());
        }
        breaches
    }
}
