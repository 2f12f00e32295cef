//! Slot table and allocator.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const DEFAULT_CAPACITY: usize = 32;
/// Valid bit of the 6-bit `slotallot` word; bits 4..0 carry the slot index.
pub const SLOTALLOT_VALID: u8 = 0x20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SlotError {
    #[error("slot table needs at least one slot")]
    ZeroCapacity,
    #[error("slot {slot} out of range (capacity {capacity})")]
    SlotOutOfRange { slot: usize, capacity: usize },
    #[error("sensor bank {bank} out of range ({banks} banks)")]
    BankOutOfRange { bank: usize, banks: usize },
    #[error("unknown slot status `{0}`")]
    UnknownStatus(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum SlotStatus {
    #[default]
    Empty,
    Filled,
    Reserved,
}

impl SlotStatus {
    pub fn as_char(self) -> char {
        match self {
            SlotStatus::Empty => '.',
            SlotStatus::Filled => 'F',
            SlotStatus::Reserved => 'R',
        }
    }
}

impl fmt::Display for SlotStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlotStatus::Empty => "empty",
            SlotStatus::Filled => "filled",
            SlotStatus::Reserved => "reserved",
        })
    }
}

impl FromStr for SlotStatus {
    type Err = SlotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "empty" => Ok(SlotStatus::Empty),
            "filled" => Ok(SlotStatus::Filled),
            "reserved" => Ok(SlotStatus::Reserved),
            other => Err(SlotError::UnknownStatus(other.to_string())),
        }
    }
}

/// Status LEDs for one slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SlotLeds {
    pub led: bool,
    pub led_filled: bool,
    pub led_reserv: bool,
}

impl From<SlotStatus> for SlotLeds {
    fn from(status: SlotStatus) -> Self {
        SlotLeds {
            led: status == SlotStatus::Empty,
            led_filled: status == SlotStatus::Filled,
            led_reserv: status == SlotStatus::Reserved,
        }
    }
}

pub fn encode_slotallot(slot: Option<usize>) -> u8 {
    slot.map_or(0, |s| SLOTALLOT_VALID | (s as u8 & 0x1F))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotTable {
    status: Vec<SlotStatus>,
}

impl SlotTable {
    pub fn new(capacity: usize) -> Result<Self, SlotError> {
        if capacity == 0 {
            return Err(SlotError::ZeroCapacity);
        }
        Ok(SlotTable {
            status: vec![SlotStatus::Empty; capacity],
        })
    }

    pub fn capacity(&self) -> usize {
        self.status.len()
    }

    /// Sensor banks needed to cover every slot, four slots per bank.
    pub fn banks(&self) -> usize {
        self.capacity().div_ceil(4)
    }

    pub fn statuses(&self) -> &[SlotStatus] {
        &self.status
    }

    fn check(&self, slot: usize) -> Result<(), SlotError> {
        if slot < self.capacity() {
            Ok(())
        } else {
            Err(SlotError::SlotOutOfRange {
                slot,
                capacity: self.capacity(),
            })
        }
    }

    pub fn status(&self, slot: usize) -> Result<SlotStatus, SlotError> {
        self.check(slot)?;
        Ok(self.status[slot])
    }

    pub fn set_status(&mut self, slot: usize, status: SlotStatus) -> Result<(), SlotError> {
        self.check(slot)?;
        self.status[slot] = status;
        Ok(())
    }

    pub fn free_count(&self) -> usize {
        self.status
            .iter()
            .filter(|&&s| s == SlotStatus::Empty)
            .count()
    }

    /// Applies one bank's occupancy nibble. A vacant reading leaves a
    /// reservation in place; an occupied reading always wins.
    pub fn ingest_sensor(&mut self, bank: usize, nibble: u8) -> Result<(), SlotError> {
        if bank >= self.banks() {
            return Err(SlotError::BankOutOfRange {
                bank,
                banks: self.banks(),
            });
        }
        let capacity = self.capacity();
        for (i, slot) in (bank * 4..bank * 4 + 4)
            .enumerate()
            .filter(|&(_, s)| s < capacity)
        {
            let occupied = nibble >> i & 1 == 1;
            let current = &mut self.status[slot];
            *current = match (occupied, *current) {
                (true, _) => SlotStatus::Filled,
                (false, SlotStatus::Reserved) => SlotStatus::Reserved,
                (false, _) => SlotStatus::Empty,
            };
        }
        Ok(())
    }

    /// Reserves the lowest-index empty slot.
    pub fn allocate(&mut self) -> Option<usize> {
        let slot = self.status.iter().position(|&s| s == SlotStatus::Empty)?;
        self.status[slot] = SlotStatus::Reserved;
        Some(slot)
    }

    pub fn query(&self, slot: usize) -> Result<SlotLeds, SlotError> {
        Ok(self.status(slot)?.into())
    }

    pub fn release(&mut self, slot: usize) -> Result<(), SlotError> {
        self.set_status(slot, SlotStatus::Empty)
    }
}

impl fmt::Display for SlotTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.status
            .iter()
            .try_for_each(|s| write!(f, "{}", s.as_char()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AllocInputs {
    /// Allocation request strobe; acted on at its rising edge.
    pub w: bool,
    pub w1: bool,
    pub w2: bool,
    pub w3: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AllocOutputs {
    pub slotallot: u8,
    pub led_slotallot: bool,
    pub leds: SlotLeds,
}

/// Stand-alone allocator block with request strobe and status LEDs.
#[derive(Debug, Clone)]
pub struct AllocatorFsm {
    table: SlotTable,
    last_w: bool,
    slotallot: u8,
    shown: Option<usize>,
}

impl AllocatorFsm {
    pub fn new(table: SlotTable) -> Self {
        AllocatorFsm {
            table,
            last_w: false,
            slotallot: 0,
            shown: None,
        }
    }

    pub fn table(&self) -> &SlotTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut SlotTable {
        &mut self.table
    }

    /// The slot table survives reset; only the allotment registers clear.
    pub fn step(&mut self, inputs: AllocInputs, reset: bool) -> AllocOutputs {
        if reset {
            self.last_w = false;
            self.slotallot = 0;
            self.shown = None;
            return AllocOutputs::default();
        }
        if inputs.w && !self.last_w {
            let slot = self.table.allocate();
            self.slotallot = encode_slotallot(slot);
            if slot.is_some() {
                self.shown = slot;
            }
        }
        self.last_w = inputs.w;
        let leds = self
            .shown
            .and_then(|s| self.table.query(s).ok())
            .unwrap_or_default();
        AllocOutputs {
            slotallot: self.slotallot,
            led_slotallot: self.slotallot & SLOTALLOT_VALID != 0,
            leds,
        }
    }
}
