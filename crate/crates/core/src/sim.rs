//! Deterministic cycle scheduler.
//!
//! Components are ticked once per cycle in ascending registration order.
//! They talk to each other only through a [`PortVector`] of named signals;
//! after every component has ticked, the values that changed during the cycle
//! are appended to the [`Trace`].

use std::any::Any;
use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Simulation time in clock cycles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cycle(pub u64);

impl Cycle {
    pub const ZERO: Cycle = Cycle(0);

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn next(self) -> Cycle {
        Cycle(self.0 + 1)
    }
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for Cycle {
    fn from(v: u64) -> Self {
        Cycle(v)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("duplicate component order {0}")]
    DuplicateOrder(u32),
    #[error("signal `{0}` declared twice")]
    DuplicateSignal(String),
    #[error("signal `{name}` has invalid width {width} (expected 1..=8)")]
    BadWidth { name: String, width: u8 },
    #[error("initial value {value} does not fit signal `{name}`")]
    InitOverflow { name: String, value: u64 },
    #[error("simulation already started; configuration is frozen")]
    AlreadyStarted,
}

/// Name and bit width of a traced signal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignalId {
    name: String,
    width: u8,
}

impl SignalId {
    pub const MAX_WIDTH: u8 = 8;

    pub fn new(name: impl Into<String>, width: u8) -> Result<Self, SimError> {
        let name = name.into();
        if width == 0 || width > Self::MAX_WIDTH {
            return Err(SimError::BadWidth { name, width });
        }
        Ok(SignalId { name, width })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn mask(&self) -> u64 {
        (1u64 << self.width) - 1
    }

    pub fn fits(&self, value: u64) -> bool {
        value & !self.mask() == 0
    }
}

/// Index of a declared signal within one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignalRef(usize);

impl SignalRef {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: Cycle,
    pub signal: SignalRef,
    pub value: u64,
}

/// Change-only record of every declared signal over a run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    signals: Vec<SignalId>,
    initial: Vec<u64>,
    events: Vec<TraceEvent>,
    cycles: u64,
}

impl Trace {
    pub fn signals(&self) -> &[SignalId] {
        &self.signals
    }

    pub fn signal(&self, sig: SignalRef) -> &SignalId {
        &self.signals[sig.0]
    }

    pub fn signal_refs(&self) -> impl Iterator<Item = SignalRef> {
        (0..self.signals.len()).map(SignalRef)
    }

    pub fn lookup(&self, name: &str) -> Option<SignalRef> {
        self.signals
            .iter()
            .position(|s| s.name == name)
            .map(SignalRef)
    }

    pub fn initial(&self, sig: SignalRef) -> u64 {
        self.initial[sig.0]
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    /// Number of cycles simulated so far.
    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn events_for(&self, sig: SignalRef) -> impl Iterator<Item = &TraceEvent> + '_ {
        self.events.iter().filter(move |e| e.signal == sig)
    }

    /// Value of `sig` as of the end of `cycle`.
    pub fn value_at(&self, sig: SignalRef, cycle: Cycle) -> u64 {
        self.events_for(sig)
            .take_while(|e| e.cycle <= cycle)
            .last()
            .map_or(self.initial[sig.0], |e| e.value)
    }

    /// Per-cycle values of `sig`, one entry per simulated cycle.
    pub fn waveform(&self, sig: SignalRef) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.cycles as usize);
        let mut value = self.initial[sig.0];
        let mut changes = self.events_for(sig).peekable();
        for c in 0..self.cycles {
            while let Some(e) = changes.next_if(|e| e.cycle.0 == c) {
                value = e.value;
            }
            out.push(value);
        }
        out
    }

    /// Checks ordering, width and change-only properties.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.initial.len() != self.signals.len() {
            return Err("initial value count differs from declarations".into());
        }
        for (sig, &v) in self.signals.iter().zip(&self.initial) {
            if !sig.fits(v) {
                return Err(format!("initial value {v} overflows `{}`", sig.name));
            }
        }
        let mut last = self.initial.clone();
        let mut prev_cycle = Cycle::ZERO;
        for e in &self.events {
            let sig = self
                .signals
                .get(e.signal.0)
                .ok_or_else(|| format!("event references undeclared signal {}", e.signal.0))?;
            if e.cycle < prev_cycle {
                return Err(format!("event at cycle {} out of order", e.cycle));
            }
            if !sig.fits(e.value) {
                return Err(format!("value {} overflows `{}`", e.value, sig.name));
            }
            if last[e.signal.0] == e.value {
                return Err(format!(
                    "repeated value {} on `{}` at {}",
                    e.value, sig.name, e.cycle
                ));
            }
            last[e.signal.0] = e.value;
            prev_cycle = e.cycle;
        }
        Ok(())
    }
}

/// Current value of every declared signal, shared by all components.
#[derive(Debug, Clone, Default)]
pub struct PortVector {
    signals: Vec<SignalId>,
    by_name: HashMap<String, SignalRef>,
    values: Vec<u64>,
    written: Vec<bool>,
    write_order: Vec<SignalRef>,
    breaches: Vec<String>,
}

impl PortVector {
    pub fn lookup(&self, name: &str) -> Option<SignalRef> {
        self.by_name.get(name).copied()
    }

    pub fn signal(&self, sig: SignalRef) -> &SignalId {
        &self.signals[sig.0]
    }

    pub fn get(&self, sig: SignalRef) -> u64 {
        self.values[sig.0]
    }

    pub fn bit(&self, sig: SignalRef) -> bool {
        self.values[sig.0] != 0
    }

    /// Drives `sig`. A value wider than the signal is refused and logged as a breach.
    pub fn set(&mut self, sig: SignalRef, value: u64) {
        let id = &self.signals[sig.0];
        if !id.fits(value) {
            self.breaches.push(format!(
                "value {value} does not fit {}-bit signal `{}`",
                id.width, id.name
            ));
            return;
        }
        self.values[sig.0] = value;
        if !self.written[sig.0] {
            self.written[sig.0] = true;
            self.write_order.push(sig);
        }
    }

    pub fn set_bit(&mut self, sig: SignalRef, value: bool) {
        self.set(sig, value as u64);
    }

    pub fn breaches(&self) -> &[String] {
        &self.breaches
    }
}

/// A component ticked once per cycle.
pub trait Tickable: Any {
    fn tick(&mut self, cycle: Cycle, ports: &mut PortVector);
}

/// Identifies a registered component by its tick order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ComponentHandle(u32);

impl ComponentHandle {
    pub fn order(self) -> u32 {
        self.0
    }
}

#[derive(Default)]
pub struct Simulation {
    ports: PortVector,
    components: Vec<(u32, Box<dyn Tickable>)>,
    trace: Trace,
    recorded: Vec<u64>,
    now: Cycle,
}

impl Simulation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, width: u8) -> Result<SignalRef, SimError> {
        self.declare_init(name, width, 0)
    }

    pub fn declare_init(
        &mut self,
        name: &str,
        width: u8,
        init: u64,
    ) -> Result<SignalRef, SimError> {
        self.ensure_configurable()?;
        if self.ports.by_name.contains_key(name) {
            return Err(SimError::DuplicateSignal(name.to_string()));
        }
        let id = SignalId::new(name, width)?;
        if !id.fits(init) {
            return Err(SimError::InitOverflow {
                name: name.to_string(),
                value: init,
            });
        }
        let sig = SignalRef(self.ports.signals.len());
        self.ports.by_name.insert(name.to_string(), sig);
        self.ports.signals.push(id.clone());
        self.ports.values.push(init);
        self.ports.written.push(false);
        self.trace.signals.push(id);
        self.trace.initial.push(init);
        self.recorded.push(init);
        Ok(sig)
    }

    pub fn signal(&self, name: &str) -> Option<SignalRef> {
        self.ports.lookup(name)
    }

    pub fn ports(&self) -> &PortVector {
        &self.ports
    }

    pub fn register_component(
        &mut self,
        component: Box<dyn Tickable>,
        order: u32,
    ) -> Result<ComponentHandle, SimError> {
        self.ensure_configurable()?;
        match self.components.binary_search_by_key(&order, |(o, _)| *o) {
            Ok(_) => Err(SimError::DuplicateOrder(order)),
            Err(at) => {
                self.components.insert(at, (order, component));
                Ok(ComponentHandle(order))
            }
        }
    }

    pub fn add<T: Tickable>(
        &mut self,
        component: T,
        order: u32,
    ) -> Result<ComponentHandle, SimError> {
        self.register_component(Box::new(component), order)
    }

    pub fn component<T: Tickable>(&self, handle: ComponentHandle) -> Option<&T> {
        let at = self
            .components
            .binary_search_by_key(&handle.0, |(o, _)| *o)
            .ok()?;
        let any: &dyn Any = self.components[at].1.as_ref();
        any.downcast_ref()
    }

    pub fn component_mut<T: Tickable>(&mut self, handle: ComponentHandle) -> Option<&mut T> {
        let at = self
            .components
            .binary_search_by_key(&handle.0, |(o, _)| *o)
            .ok()?;
        let any: &mut dyn Any = self.components[at].1.as_mut();
        any.downcast_mut()
    }

    pub fn now(&self) -> Cycle {
        self.now
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn breaches(&self) -> &[String] {
        self.ports.breaches()
    }

    /// Advances exactly `n` cycles and returns the accumulated trace.
    pub fn run(&mut self, n: u64) -> &Trace {
        for _ in 0..n {
            let cycle = self.now;
            for (_, component) in self.components.iter_mut() {
                component.tick(cycle, &mut self.ports);
            }
            self.capture(cycle);
            self.now = cycle.next();
            self.trace.cycles = self.now.0;
        }
        &self.trace
    }

    fn capture(&mut self, cycle: Cycle) {
        for sig in self.ports.write_order.drain(..) {
            self.ports.written[sig.0] = false;
            let value = self.ports.values[sig.0];
            if self.recorded[sig.0] != value {
                self.recorded[sig.0] = value;
                self.trace.events.push(TraceEvent {
                    cycle,
                    signal: sig,
                    value,
                });
            }
        }
    }

    fn ensure_configurable(&self) -> Result<(), SimError> {
        if self.now > Cycle::ZERO {
            Err(SimError::AlreadyStarted)
        } else {
            Ok(())
        }
    }
}
