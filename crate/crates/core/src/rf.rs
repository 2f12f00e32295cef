//! IR sensor banks and an HT12E/HT12D style serial link.
//!
//! A word on the wire is 13 bits: a sync bit (always 1), the 8 address bits
//! MSB first, then the 4 data bits MSB first. The encoder repeats the word;
//! the decoder raises VT only after `k` consecutive words agree on address
//! and data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sim::Cycle;

pub const WORD_BITS: usize = 13;
pub const ADDRESS_BITS: usize = 8;
pub const DATA_BITS: usize = 4;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_REPETITIONS: usize = 4;
/// Number of sensor banks; 8 banks of 4 sensors cover 32 slots.
pub const BANKS: usize = 8;
pub const DEFAULT_BANK_ADDRESSES: [u8; BANKS] = [0, 1, 2, 3, 4, 5, 6, 7];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RfError {
    #[error("data nibble {0:#x} does not fit in 4 bits")]
    DataOverflow(u8),
    #[error("at least one repetition is required")]
    NoRepetitions,
    #[error("match threshold k must be at least 1")]
    ZeroThreshold,
    #[error("repetitions ({reps}) must be at least k ({k})")]
    TooFewRepetitions { reps: usize, k: usize },
    #[error("bit position {position} outside stream of {len} bits")]
    FlipOutOfRange { position: usize, len: usize },
    #[error("bank {bank} out of range (banks: {banks})")]
    BankOutOfRange { bank: usize, banks: usize },
    #[error("bank addresses must be pairwise distinct")]
    DuplicateAddress,
}

/// 8-bit address plus 4-bit data word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ht12Frame {
    address: u8,
    data: u8,
}

impl Ht12Frame {
    pub fn new(address: u8, data: u8) -> Result<Self, RfError> {
        if data > 0x0F {
            return Err(RfError::DataOverflow(data));
        }
        Ok(Ht12Frame { address, data })
    }

    pub fn address(&self) -> u8 {
        self.address
    }

    pub fn data(&self) -> u8 {
        self.data
    }

    fn push_word(&self, bits: &mut Vec<bool>) {
        bits.push(true);
        bits.extend((0..ADDRESS_BITS).rev().map(|i| self.address >> i & 1 == 1));
        bits.extend((0..DATA_BITS).rev().map(|i| self.data >> i & 1 == 1));
    }
}

/// Serial bit sequence as it travels over the channel.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitStream(Vec<bool>);

impl BitStream {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitStream(bits)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Complete 13-bit words; a trailing partial word is not counted.
    pub fn words(&self) -> impl Iterator<Item = &[bool]> {
        self.0.chunks_exact(WORD_BITS)
    }
}

impl FromIterator<bool> for BitStream {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitStream(iter.into_iter().collect())
    }
}

impl std::fmt::Display for BitStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Four IR occupancy sensors sharing one encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorBank {
    pub index: u8,
    pub address: u8,
    pub occupancy: [bool; 4],
}

impl SensorBank {
    pub fn from_nibble(index: u8, address: u8, nibble: u8) -> Self {
        SensorBank {
            index,
            address,
            occupancy: std::array::from_fn(|i| nibble >> i & 1 == 1),
        }
    }

    /// Bit i of the result is set iff sensor i sees a vehicle.
    pub fn sense(&self) -> u8 {
        self.occupancy
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &occupied)| acc | (occupied as u8) << i)
    }

    /// First slot covered by this bank.
    pub fn first_slot(&self) -> usize {
        self.index as usize * 4
    }
}

pub fn encode(frame: Ht12Frame, repetitions: usize) -> Result<BitStream, RfError> {
    if repetitions == 0 {
        return Err(RfError::NoRepetitions);
    }
    let mut bits = Vec::with_capacity(repetitions * WORD_BITS);
    for _ in 0..repetitions {
        frame.push_word(&mut bits);
    }
    Ok(BitStream(bits))
}

/// Copy of `stream` with every listed position inverted.
pub fn corrupt(stream: &BitStream, flips: &[usize]) -> Result<BitStream, RfError> {
    let mut bits = stream.0.clone();
    for &position in flips {
        let bit = bits.get_mut(position).ok_or(RfError::FlipOutOfRange {
            position,
            len: stream.len(),
        })?;
        *bit = !*bit;
    }
    Ok(BitStream(bits))
}

fn field(bits: &[bool]) -> u8 {
    bits.iter().fold(0, |acc, &b| acc << 1 | b as u8)
}

/// Scans word-aligned words for `k` consecutive valid copies addressed to
/// `local_address`. `Some(data)` corresponds to VT asserted.
pub fn decode(stream: &BitStream, local_address: u8, k: usize) -> Result<Option<u8>, RfError> {
    if k == 0 {
        return Err(RfError::ZeroThreshold);
    }
    let mut run: Option<(u8, usize)> = None;
    for word in stream.words() {
        let sync = word[0];
        let address = field(&word[1..=ADDRESS_BITS]);
        let data = field(&word[1 + ADDRESS_BITS..]);
        if !sync || address != local_address {
            run = None;
            continue;
        }
        let len = match run {
            Some((d, n)) if d == data => n + 1,
            _ => 1,
        };
        if len >= k {
            return Ok(Some(data));
        }
        run = Some((data, len));
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkConfig {
    pub addresses: [u8; BANKS],
    /// Banks actually swept (slots / 4, rounded up).
    pub banks: usize,
    pub repetitions: usize,
    pub k: usize,
    /// Random bit-error rate in parts per million; 0 is a clean channel.
    pub bit_error_ppm: u32,
    pub seed: u64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            addresses: DEFAULT_BANK_ADDRESSES,
            banks: BANKS,
            repetitions: DEFAULT_REPETITIONS,
            k: DEFAULT_K,
            bit_error_ppm: 0,
            seed: 0,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), RfError> {
        if self.k == 0 {
            return Err(RfError::ZeroThreshold);
        }
        if self.repetitions == 0 {
            return Err(RfError::NoRepetitions);
        }
        if self.repetitions < self.k {
            return Err(RfError::TooFewRepetitions {
                reps: self.repetitions,
                k: self.k,
            });
        }
        if self.banks == 0 || self.banks > BANKS {
            return Err(RfError::BankOutOfRange {
                bank: self.banks,
                banks: BANKS,
            });
        }
        let used = &self.addresses[..self.banks];
        if used.iter().enumerate().any(|(i, a)| used[..i].contains(a)) {
            return Err(RfError::DuplicateAddress);
        }
        Ok(())
    }

    pub fn stream_bits(&self) -> usize {
        self.repetitions * WORD_BITS
    }
}

/// What the link did during one cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkTick {
    pub tx: bool,
    pub rx: bool,
    /// Bank and nibble delivered by the decoder (VT high this cycle).
    pub delivered: Option<(usize, u8)>,
    /// Bank whose transmission ended without VT.
    pub rejected: Option<usize>,
    /// Last bank of a sweep finished this cycle.
    pub sweep_done: bool,
}

impl LinkTick {
    pub fn vt(&self) -> bool {
        self.delivered.is_some()
    }
}

#[derive(Debug, Clone)]
struct Transfer {
    bank: usize,
    tx: BitStream,
    channel: BitStream,
    received: Vec<bool>,
}

/// Sweeps every sensor bank over the serial channel, one bit per cycle.
#[derive(Debug, Clone)]
pub struct RfLink {
    config: LinkConfig,
    rng: ChaCha8Rng,
    transfer: Option<Transfer>,
    /// (armed-at, bit position) pairs not yet applied, sorted by cycle.
    corruptions: Vec<(Cycle, usize)>,
}

impl RfLink {
    pub fn new(config: LinkConfig) -> Result<Self, RfError> {
        config.validate()?;
        Ok(RfLink {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            transfer: None,
            corruptions: Vec::new(),
        })
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn is_sweeping(&self) -> bool {
        self.transfer.is_some()
    }

    /// Inverts bit `position` of the first bank stream that starts at or after `at`.
    pub fn schedule_corruption(&mut self, at: Cycle, position: usize) -> Result<(), RfError> {
        let len = self.config.stream_bits();
        if position >= len {
            return Err(RfError::FlipOutOfRange { position, len });
        }
        let idx = self.corruptions.partition_point(|(c, _)| *c <= at);
        self.corruptions.insert(idx, (at, position));
        Ok(())
    }

    pub fn reset(&mut self) {
        self.transfer = None;
    }

    /// Advances one cycle. `start` begins a sweep when idle; `occupancy[b]` is bank b's sensor nibble.
    pub fn tick(&mut self, cycle: Cycle, start: bool, occupancy: &[u8; BANKS]) -> LinkTick {
        if self.transfer.is_none() && start {
            self.transfer = Some(self.begin_bank(cycle, 0, occupancy));
        }
        let Some(transfer) = self.transfer.as_mut() else {
            return LinkTick::default();
        };

        let pos = transfer.received.len();
        let tx = transfer.tx.bits()[pos];
        let mut rx = transfer.channel.bits()[pos];
        if self.config.bit_error_ppm > 0
            && self.rng.gen_range(0..1_000_000) < self.config.bit_error_ppm
        {
            rx = !rx;
        }
        transfer.received.push(rx);
        let mut out = LinkTick {
            tx,
            rx,
            ..LinkTick::default()
        };

        if transfer.received.len() == transfer.tx.len() {
            let bank = transfer.bank;
            let stream = BitStream(std::mem::take(&mut transfer.received));
            match decode(&stream, self.config.addresses[bank], self.config.k) {
                Ok(Some(nibble)) => out.delivered = Some((bank, nibble)),
                _ => out.rejected = Some(bank),
            }
            if bank + 1 < self.config.banks {
                self.transfer = Some(self.begin_bank(cycle.next(), bank + 1, occupancy));
            } else {
                self.transfer = None;
                out.sweep_done = true;
            }
        }
        out
    }

    fn begin_bank(&mut self, starts: Cycle, bank: usize, occupancy: &[u8; BANKS]) -> Transfer {
        let sensors = SensorBank::from_nibble(
            bank as u8,
            self.config.addresses[bank],
            occupancy[bank] & 0x0F,
        );
        let frame = Ht12Frame::new(sensors.address, sensors.sense()).expect("nibble masked");
        let tx = encode(frame, self.config.repetitions).expect("validated repetitions");
        let due = self.corruptions.partition_point(|(c, _)| *c <= starts);
        let flips: Vec<usize> = self.corruptions.drain(..due).map(|(_, p)| p).collect();
        let channel = corrupt(&tx, &flips).expect("positions validated on schedule");
        Transfer {
            bank,
            tx,
            channel,
            received: Vec::with_capacity(self.config.stream_bits()),
        }
    }
}
