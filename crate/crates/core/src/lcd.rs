//! 16x2 character LCD on an 8-bit parallel bus.
//!
//! [`LcdDevice`] is the display side: it latches `rs`/`db` on the falling edge
//! of `E` while `rw` is low. [`LcdDriver`] is the FPGA side: it plays queued
//! transactions onto the pins, two cycles each (E high, then E low).

use std::collections::VecDeque;

use thiserror::Error;

pub const COLS: usize = 16;
pub const ROWS: usize = 2;
/// DDRAM address of column 0 of each row.
pub const ROW_BASE: [u8; ROWS] = [0x00, 0x40];

pub const MSG_SPACE_AVAILABLE: &str = "SPACE AVAILABLE";
pub const MSG_NO_SPACE: &str = "NO SPACE EXIT";

pub const CMD_CLEAR: u8 = 0x01;
pub const CMD_DISPLAY_ON: u8 = 0x0C;
pub const CMD_FUNCTION_SET: u8 = 0x38;
pub const CMD_SET_DDRAM: u8 = 0x80;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LcdBus {
    pub rs: bool,
    pub rw: bool,
    pub e: bool,
    pub db: u8,
}

impl LcdBus {
    pub fn command(db: u8) -> Self {
        LcdBus {
            rs: false,
            rw: false,
            e: false,
            db,
        }
    }

    pub fn data(db: u8) -> Self {
        LcdBus {
            rs: true,
            rw: false,
            e: false,
            db,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum LcdWarning {
    #[error("unsupported command {0:#04x}")]
    UnsupportedCommand(u8),
    #[error("invalid DDRAM address {0:#04x}")]
    InvalidAddress(u8),
    #[error("read cycle ignored")]
    Read,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LcdError {
    #[error("message is {0} characters; a row holds 16")]
    TooLong(usize),
    #[error("character {0:?} is not printable ASCII")]
    NonPrintable(char),
    #[error("row {0} does not exist")]
    BadRow(usize),
}

fn valid_ddram(addr: u8) -> bool {
    ROW_BASE
        .iter()
        .any(|&base| (base..base + COLS as u8).contains(&addr))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LcdDevice {
    framebuffer: [[u8; COLS]; ROWS],
    cursor: u8,
    display_on: bool,
    last_e: bool,
}

impl Default for LcdDevice {
    fn default() -> Self {
        LcdDevice {
            framebuffer: [[b' '; COLS]; ROWS],
            cursor: 0,
            display_on: false,
            last_e: false,
        }
    }
}

impl LcdDevice {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn framebuffer(&self) -> &[[u8; COLS]; ROWS] {
        &self.framebuffer
    }

    pub fn row_text(&self, row: usize) -> String {
        self.framebuffer[row].iter().map(|&b| b as char).collect()
    }

    pub fn cursor(&self) -> u8 {
        self.cursor
    }

    pub fn display_on(&self) -> bool {
        self.display_on
    }

    /// Executes one latched write transaction.
    pub fn apply(&mut self, bus: LcdBus) -> Result<(), LcdWarning> {
        if bus.rw {
            return Err(LcdWarning::Read);
        }
        if bus.rs {
            let row = (self.cursor >= ROW_BASE[1]) as usize;
            let col = (self.cursor - ROW_BASE[row]) as usize;
            self.framebuffer[row][col] = bus.db;
            if col + 1 < COLS {
                self.cursor += 1;
            }
            return Ok(());
        }
        match bus.db {
            CMD_CLEAR => {
                self.framebuffer = [[b' '; COLS]; ROWS];
                self.cursor = 0;
            }
            CMD_DISPLAY_ON => self.display_on = true,
            CMD_FUNCTION_SET => {}
            db if db & CMD_SET_DDRAM != 0 => {
                let addr = db & !CMD_SET_DDRAM;
                if !valid_ddram(addr) {
                    return Err(LcdWarning::InvalidAddress(addr));
                }
                self.cursor = addr;
            }
            db => return Err(LcdWarning::UnsupportedCommand(db)),
        }
        Ok(())
    }

    /// Samples the pins for one cycle; returns the outcome when a falling edge of E latched a transaction.
    pub fn sample(&mut self, pins: LcdBus) -> Option<Result<(), LcdWarning>> {
        let falling = self.last_e && !pins.e;
        self.last_e = pins.e;
        falling.then(|| self.apply(pins))
    }
}

/// Set-cursor to the row start followed by one data write per character.
pub fn render_message(text: &str, row: usize) -> Result<Vec<LcdBus>, LcdError> {
    if row >= ROWS {
        return Err(LcdError::BadRow(row));
    }
    if let Some(c) = text.chars().find(|c| !(' '..='~').contains(c)) {
        return Err(LcdError::NonPrintable(c));
    }
    if text.len() > COLS {
        return Err(LcdError::TooLong(text.len()));
    }
    let mut out = Vec::with_capacity(text.len() + 1);
    out.push(LcdBus::command(CMD_SET_DDRAM | ROW_BASE[row]));
    out.extend(text.bytes().map(LcdBus::data));
    Ok(out)
}

/// Power-up sequence: 8-bit/2-line function set, display on, clear.
pub fn init_sequence() -> [LcdBus; 3] {
    [
        LcdBus::command(CMD_FUNCTION_SET),
        LcdBus::command(CMD_DISPLAY_ON),
        LcdBus::command(CMD_CLEAR),
    ]
}

/// Bus master for the display. Power-up commands go out first; a new
/// message replaces whatever part of the previous one is still queued.
#[derive(Debug, Clone)]
pub struct LcdDriver {
    setup: VecDeque<LcdBus>,
    queue: VecDeque<LcdBus>,
    pins: LcdBus,
}

impl Default for LcdDriver {
    fn default() -> Self {
        LcdDriver {
            setup: init_sequence().into(),
            queue: VecDeque::new(),
            pins: LcdBus::default(),
        }
    }
}

impl LcdDriver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enqueue(&mut self, transactions: impl IntoIterator<Item = LcdBus>) {
        self.queue.extend(transactions);
    }

    /// Clears the screen, then writes `text` on `row`. Unsent transactions of
    /// earlier messages are dropped.
    pub fn show(&mut self, text: &str, row: usize) -> Result<(), LcdError> {
        let render = render_message(text, row)?;
        self.queue.clear();
        self.queue.push_back(LcdBus::command(CMD_CLEAR));
        self.enqueue(render);
        Ok(())
    }

    pub fn is_idle(&self) -> bool {
        self.setup.is_empty() && self.queue.is_empty() && !self.pins.e
    }

    pub fn pending(&self) -> usize {
        self.setup.len() + self.queue.len()
    }

    /// Drops pending work and queues the power-up sequence; E is released.
    pub fn reset(&mut self) -> LcdBus {
        self.setup = init_sequence().into();
        self.queue.clear();
        self.pins.e = false;
        self.pins
    }

    pub fn tick(&mut self) -> LcdBus {
        if self.pins.e {
            self.pins.e = false;
        } else if let Some(next) = self.setup.pop_front().or_else(|| self.queue.pop_front()) {
            self.pins = LcdBus { e: true, ..next };
        }
        self.pins
    }
}
