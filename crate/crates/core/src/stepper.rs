//! Door stepper motor: clock divider and full-step one-phase-on drive.
//!
//! The coil word goes out on `Z(3:0)` through a ULN2003, which is treated as
//! a plain buffer.

use thiserror::Error;

/// Coil excitation order for clockwise rotation.
pub const PHASE_SEQUENCE: [u8; 4] = [0b1000, 0b0100, 0b0010, 0b0001];
pub const DEFAULT_DIVIDER: u32 = 4;
pub const DEFAULT_STEPS_PER_DOOR: u32 = 48;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StepperError {
    #[error("motor busy with a door command")]
    Busy,
    #[error("clock divider must be at least 1")]
    ZeroDivider,
    #[error("door travel must be at least one step")]
    ZeroSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Cw,
    Ccw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoorAction {
    Open,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepperConfig {
    divider: u32,
    steps_per_door: u32,
}

impl StepperConfig {
    pub fn new(divider: u32, steps_per_door: u32) -> Result<Self, StepperError> {
        if divider == 0 {
            return Err(StepperError::ZeroDivider);
        }
        if steps_per_door == 0 {
            return Err(StepperError::ZeroSteps);
        }
        Ok(StepperConfig {
            divider,
            steps_per_door,
        })
    }

    pub fn divider(&self) -> u32 {
        self.divider
    }

    pub fn steps_per_door(&self) -> u32 {
        self.steps_per_door
    }

    /// Bits needed to show `cnt` in a trace.
    pub fn cnt_width(&self) -> u8 {
        (u32::BITS - (self.divider - 1).leading_zeros()).max(1) as u8
    }
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            divider: DEFAULT_DIVIDER,
            steps_per_door: DEFAULT_STEPS_PER_DOOR,
        }
    }
}

/// Per-tick outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepperOutput {
    pub z: u8,
    pub clkd: bool,
    pub stepped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepperState {
    config: StepperConfig,
    phase_index: u8,
    cnt: u32,
    steps_taken: u64,
    direction: Direction,
    enabled: bool,
    /// Steps left in the current door command; `None` when spinning freely.
    remaining: Option<u32>,
}

impl StepperState {
    pub fn new(config: StepperConfig) -> Self {
        StepperState {
            config,
            phase_index: 0,
            cnt: 0,
            steps_taken: 0,
            direction: Direction::Cw,
            enabled: false,
            remaining: None,
        }
    }

    pub fn config(&self) -> StepperConfig {
        self.config
    }

    pub fn phase_index(&self) -> u8 {
        self.phase_index
    }

    pub fn cnt(&self) -> u32 {
        self.cnt
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn is_busy(&self) -> bool {
        self.enabled
    }

    pub fn z(&self) -> u8 {
        PHASE_SEQUENCE[self.phase_index as usize]
    }

    /// Divided clock: high during the first half of each divider period.
    pub fn clkd(&self) -> bool {
        self.cnt < self.config.divider.div_ceil(2)
    }

    /// Rotate without a step budget until [`StepperState::stop`].
    pub fn spin(&mut self, direction: Direction) {
        self.direction = direction;
        self.enabled = true;
        self.remaining = None;
    }

    pub fn stop(&mut self) {
        self.enabled = false;
        self.remaining = None;
    }

    /// Starts a door movement of `steps_per_door` steps. The divider restarts so
    /// the first step lands exactly one divider period later.
    pub fn command_door(&mut self, action: DoorAction) -> Result<(), StepperError> {
        if self.enabled {
            return Err(StepperError::Busy);
        }
        self.direction = match action {
            DoorAction::Open => Direction::Cw,
            DoorAction::Close => Direction::Ccw,
        };
        self.cnt = 0;
        self.enabled = true;
        self.remaining = Some(self.config.steps_per_door);
        Ok(())
    }

    pub fn tick(&mut self) -> StepperOutput {
        self.cnt = (self.cnt + 1) % self.config.divider;
        let mut stepped = false;
        if self.cnt == 0 && self.enabled {
            self.phase_index = match self.direction {
                Direction::Cw => (self.phase_index + 1) % 4,
                Direction::Ccw => (self.phase_index + 3) % 4,
            };
            self.steps_taken += 1;
            stepped = true;
            if let Some(left) = self.remaining.as_mut() {
                *left -= 1;
                if *left == 0 {
                    self.enabled = false;
                    self.remaining = None;
                }
            }
        }
        StepperOutput {
            z: self.z(),
            clkd: self.clkd(),
            stepped,
        }
    }
}
