//! Simulation components: input stimulus plus one wrapper per model that
//! maps its ports onto named trace signals.

use crate::controller::{ParkingSystem, TopInputs};
use crate::ident::{IdentFsm, IdentInputs, MemberRegistry};
use crate::rf::BANKS;
use crate::sim::{Cycle, PortVector, SignalRef, SimError, Simulation, Tickable};
use crate::slots::{AllocInputs, AllocatorFsm, SlotStatus, SlotTable, SLOTALLOT_VALID};
use crate::stepper::{DoorAction, StepperConfig, StepperOutput, StepperState};

/// Applies scheduled input values at the start of their cycle.
#[derive(Debug, Clone, Default)]
pub struct Stimulus {
    schedule: Vec<(Cycle, SignalRef, u64)>,
    next: usize,
}

impl Stimulus {
    pub fn new(mut schedule: Vec<(Cycle, SignalRef, u64)>) -> Self {
        schedule.sort_by_key(|&(c, _, _)| c);
        Stimulus { schedule, next: 0 }
    }
}

impl Tickable for Stimulus {
    fn tick(&mut self, cycle: Cycle, ports: &mut PortVector) {
        while let Some(&(at, sig, value)) = self.schedule.get(self.next) {
            if at > cycle {
                break;
            }
            ports.set(sig, value);
            self.next += 1;
        }
    }
}

fn declare_all<const N: usize>(
    sim: &mut Simulation,
    specs: [(&str, u8, u64); N],
) -> Result<[SignalRef; N], SimError> {
    let mut refs = Vec::with_capacity(N);
    for (name, width, init) in specs {
        refs.push(sim.declare_init(name, width, init)?);
    }
    Ok(refs.try_into().expect("length N"))
}

fn ir_name(bank: usize) -> String {
    format!("ir{bank}")
}

/// Occupancy nibbles implied by the table's filled slots.
pub fn ir_from_table(table: &SlotTable) -> [u8; BANKS] {
    let mut ir = [0u8; BANKS];
    for (slot, status) in table.statuses().iter().enumerate() {
        if *status == SlotStatus::Filled && slot / 4 < BANKS {
            ir[slot / 4] |= 1 << (slot % 4);
        }
    }
    ir
}

/// The complete parking system with the top-level port list.
pub struct ParkingUnit {
    system: ParkingSystem,
    // reset, car_enter, w2, w3, w4, fnd, a, exit_slot
    inputs: [SignalRef; 8],
    ir: Vec<SignalRef>,
    outputs: ParkingOutputs,
    breaches: Vec<String>,
}

struct ParkingOutputs {
    identified: SignalRef,
    new_member: SignalRef,
    out_1: SignalRef,
    fnd1: SignalRef,
    z: SignalRef,
    clkd: SignalRef,
    led: SignalRef,
    led_filled: SignalRef,
    led_reserv: SignalRef,
    cout: SignalRef,
    slotallot: SignalRef,
    led_slotallot: SignalRef,
    rs: SignalRef,
    rw: SignalRef,
    e: SignalRef,
    d: SignalRef,
    rf_tx: SignalRef,
    rf_rx: SignalRef,
    vt: SignalRef,
    state: SignalRef,
    steps: SignalRef,
    free: SignalRef,
}

impl ParkingUnit {
    pub const INPUTS: [&'static str; 8] = [
        "reset",
        "car_enter",
        "w2",
        "w3",
        "w4",
        "fnd",
        "a",
        "exit_slot",
    ];

    /// Declares the port list on `sim`. Sensor inputs start out matching the
    /// table's filled slots.
    pub fn new(system: ParkingSystem, sim: &mut Simulation) -> Result<Self, SimError> {
        let inputs = declare_all(
            sim,
            [
                ("reset", 1, 0),
                ("car_enter", 1, 0),
                ("w2", 1, 0),
                ("w3", 1, 0),
                ("w4", 1, 0),
                ("fnd", 1, 0),
                ("a", 1, 0),
                ("exit_slot", 6, 0),
            ],
        )?;
        let initial_ir = ir_from_table(system.table());
        let ir = (0..system.config().link().banks)
            .map(|b| sim.declare_init(&ir_name(b), 4, initial_ir[b] as u64))
            .collect::<Result<Vec<_>, _>>()?;
        let stepper = system.stepper();
        let [identified, new_member, out_1, fnd1, z, clkd, led, led_filled, led_reserv, cout, slotallot, led_slotallot] =
            declare_all(
                sim,
                [
                    ("identified", 1, 0),
                    ("new_member", 1, 0),
                    ("out_1", 1, 0),
                    ("fnd1", 1, 0),
                    ("z", 4, stepper.z() as u64),
                    ("clkd", 1, stepper.clkd() as u64),
                    ("led", 1, 0),
                    ("led_filled", 1, 0),
                    ("led_reserv", 1, 0),
                    ("cout", 6, 0),
                    ("slotallot", 6, 0),
                    ("led_slotallot", 1, 0),
                ],
            )?;
        let [rs, rw, e, d, rf_tx, rf_rx, vt, state, steps, free] = declare_all(
            sim,
            [
                ("rs", 1, 0),
                ("rw", 1, 0),
                ("E", 1, 0),
                ("D", 8, 0),
                ("rf_tx", 1, 0),
                ("rf_rx", 1, 0),
                ("vt", 1, 0),
                ("state", 3, system.state().code() as u64),
                ("steps", 8, 0),
                ("free", 6, system.table().free_count() as u64),
            ],
        )?;
        Ok(ParkingUnit {
            system,
            inputs,
            ir,
            outputs: ParkingOutputs {
                identified,
                new_member,
                out_1,
                fnd1,
                z,
                clkd,
                led,
                led_filled,
                led_reserv,
                cout,
                slotallot,
                led_slotallot,
                rs,
                rw,
                e,
                d,
                rf_tx,
                rf_rx,
                vt,
                state,
                steps,
                free,
            },
            breaches: Vec::new(),
        })
    }

    pub fn is_input(name: &str) -> bool {
        Self::INPUTS.contains(&name)
            || name
                .strip_prefix("ir")
                .is_some_and(|b| b.parse::<usize>().is_ok_and(|b| b < BANKS))
    }

    pub fn system(&self) -> &ParkingSystem {
        &self.system
    }

    pub fn breaches(&self) -> &[String] {
        &self.breaches
    }
}

impl Tickable for ParkingUnit {
    fn tick(&mut self, cycle: Cycle, ports: &mut PortVector) {
        let [reset, car_enter, w2, w3, w4, fnd, a, exit_slot] = self.inputs.map(|s| ports.get(s));
        let mut ir = [0u8; BANKS];
        for (b, sig) in self.ir.iter().enumerate() {
            ir[b] = ports.get(*sig) as u8;
        }
        let inputs = TopInputs {
            reset: reset != 0,
            car_enter: car_enter != 0,
            w2: w2 != 0,
            w3: w3 != 0,
            w4: w4 != 0,
            fnd: fnd != 0,
            a: a != 0,
            exit_slot: exit_slot as u8,
            ir,
        };
        let out = self.system.step(&inputs);

        let o = &self.outputs;
        ports.set_bit(o.identified, out.identified);
        ports.set_bit(o.new_member, out.new_member);
        ports.set_bit(o.out_1, out.out_1);
        ports.set_bit(o.fnd1, out.fnd1);
        ports.set(o.z, out.z as u64);
        ports.set_bit(o.clkd, out.clkd);
        ports.set_bit(o.led, out.leds.led);
        ports.set_bit(o.led_filled, out.leds.led_filled);
        ports.set_bit(o.led_reserv, out.leds.led_reserv);
        ports.set(o.cout, out.cout as u64);
        ports.set(o.slotallot, out.slotallot as u64);
        ports.set_bit(o.led_slotallot, out.led_slotallot);
        ports.set_bit(o.rs, out.lcd.rs);
        ports.set_bit(o.rw, out.lcd.rw);
        ports.set_bit(o.e, out.lcd.e);
        ports.set(o.d, out.lcd.db as u64);
        ports.set_bit(o.rf_tx, out.rf_tx);
        ports.set_bit(o.rf_rx, out.rf_rx);
        ports.set_bit(o.vt, out.vt);
        ports.set(o.state, out.state.code() as u64);
        ports.set(o.steps, out.steps & 0xFF);
        ports.set(o.free, out.free as u64);

        let mut breaches = self.system.audit();
        if out.identified && out.new_member {
            breaches.push("identified and new_member both high".into());
        }
        if out.z.count_ones() != 1 {
            breaches.push(format!("z {:#06b} not one-hot", out.z));
        }
        let leds = [out.leds.led, out.leds.led_filled, out.leds.led_reserv];
        if leds.iter().filter(|&&l| l).count() > 1 {
            breaches.push("more than one status LED lit".into());
        }
        self.breaches
            .extend(breaches.into_iter().map(|b| format!("cycle {cycle}: {b}")));
    }
}

/// Stand-alone door motor: rotates continuously once reset is released.
pub struct StepperDemoUnit {
    motor: StepperState,
    reset: SignalRef,
    // Z, clkd, cnt, steps
    outputs: [SignalRef; 4],
    last_reset: bool,
    running: bool,
    breaches: Vec<String>,
}

impl StepperDemoUnit {
    pub const INPUTS: [&'static str; 1] = ["reset"];

    pub fn new(config: StepperConfig, sim: &mut Simulation) -> Result<Self, SimError> {
        let motor = StepperState::new(config);
        let [reset] = declare_all(sim, [("reset", 1, 0)])?;
        let outputs = declare_all(
            sim,
            [
                ("Z", 4, motor.z() as u64),
                ("clkd", 1, motor.clkd() as u64),
                ("cnt", config.cnt_width(), 0),
                ("steps", 8, 0),
            ],
        )?;
        Ok(StepperDemoUnit {
            motor,
            reset,
            outputs,
            last_reset: false,
            running: false,
            breaches: Vec::new(),
        })
    }

    pub fn motor(&self) -> &StepperState {
        &self.motor
    }

    pub fn breaches(&self) -> &[String] {
        &self.breaches
    }
}

impl Tickable for StepperDemoUnit {
    fn tick(&mut self, cycle: Cycle, ports: &mut PortVector) {
        let reset = ports.bit(self.reset);
        let out = if reset {
            self.motor = StepperState::new(self.motor.config());
            self.running = false;
            StepperOutput {
                z: self.motor.z(),
                clkd: self.motor.clkd(),
                stepped: false,
            }
        } else {
            if self.last_reset {
                self.running = true;
            }
            if self.running && !self.motor.is_busy() {
                let _ = self.motor.command_door(DoorAction::Open);
            }
            self.motor.tick()
        };
        self.last_reset = reset;
        let [z, clkd, cnt, steps] = self.outputs;
        ports.set(z, out.z as u64);
        ports.set_bit(clkd, out.clkd);
        ports.set(cnt, self.motor.cnt() as u64);
        ports.set(steps, self.motor.steps_taken() & 0xFF);
        if out.z.count_ones() != 1 {
            self.breaches
                .push(format!("cycle {cycle}: Z {:#06b} not one-hot", out.z));
        }
    }
}

/// Stand-alone identification FSM.
pub struct IdentUnit {
    fsm: IdentFsm,
    registry: MemberRegistry,
    // reset, w, w1, w2, z
    inputs: [SignalRef; 5],
    // out_1, identified, new_member, current_state, pr_st, temp_card
    outputs: [SignalRef; 6],
    breaches: Vec<String>,
}

impl IdentUnit {
    pub const INPUTS: [&'static str; 5] = ["reset", "w", "w1", "w2", "z"];

    pub fn new(registry: MemberRegistry, sim: &mut Simulation) -> Result<Self, SimError> {
        let inputs = declare_all(
            sim,
            [
                ("reset", 1, 0),
                ("w", 1, 0),
                ("w1", 1, 0),
                ("w2", 1, 0),
                ("z", 1, 0),
            ],
        )?;
        let outputs = declare_all(
            sim,
            [
                ("out_1", 1, 0),
                ("identified", 1, 0),
                ("new_member", 1, 0),
                ("current_state", 3, 0),
                ("pr_st", 8, 0),
                ("temp_card", 8, 0),
            ],
        )?;
        Ok(IdentUnit {
            fsm: IdentFsm::new(),
            registry,
            inputs,
            outputs,
            breaches: Vec::new(),
        })
    }

    pub fn registry(&self) -> &MemberRegistry {
        &self.registry
    }

    pub fn breaches(&self) -> &[String] {
        &self.breaches
    }
}

impl Tickable for IdentUnit {
    fn tick(&mut self, cycle: Cycle, ports: &mut PortVector) {
        let [reset, w, w1, w2, z] = self.inputs.map(|s| ports.bit(s));
        let out = self
            .fsm
            .step(&mut self.registry, IdentInputs { w, w1, w2, z }, reset);
        let [out_1, identified, new_member, current_state, pr_st, temp_card] = self.outputs;
        ports.set_bit(out_1, out.out_1);
        ports.set_bit(identified, out.identified);
        ports.set_bit(new_member, out.new_member);
        ports.set(current_state, self.fsm.phase().code() as u64);
        ports.set(pr_st, self.fsm.resolved_code().unwrap_or(0) as u64);
        ports.set(temp_card, out.temp_card.map_or(0, |c| c as u64 & 0xFF));
        if out.identified && out.new_member {
            self.breaches.push(format!(
                "cycle {cycle}: identified and new_member both high"
            ));
        }
        if out.out_1 && !(out.identified || out.new_member) {
            self.breaches
                .push(format!("cycle {cycle}: out_1 without a result"));
        }
    }
}

/// Stand-alone slot allocator.
pub struct AllocatorUnit {
    fsm: AllocatorFsm,
    // reset, w, w1, w2, w3
    inputs: [SignalRef; 5],
    // slotallot, led_slotallot, led, led_filled, led_reserv, free
    outputs: [SignalRef; 6],
    breaches: Vec<String>,
}

impl AllocatorUnit {
    pub const INPUTS: [&'static str; 5] = ["reset", "w", "w1", "w2", "w3"];

    pub fn new(table: SlotTable, sim: &mut Simulation) -> Result<Self, SimError> {
        let free = table.free_count() as u64;
        let inputs = declare_all(
            sim,
            [
                ("reset", 1, 0),
                ("w", 1, 0),
                ("w1", 1, 0),
                ("w2", 1, 0),
                ("w3", 1, 0),
            ],
        )?;
        let outputs = declare_all(
            sim,
            [
                ("slotallot", 6, 0),
                ("led_slotallot", 1, 0),
                ("led", 1, 0),
                ("led_filled", 1, 0),
                ("led_reserv", 1, 0),
                ("free", 6, free),
            ],
        )?;
        Ok(AllocatorUnit {
            fsm: AllocatorFsm::new(table),
            inputs,
            outputs,
            breaches: Vec::new(),
        })
    }

    pub fn table(&self) -> &SlotTable {
        self.fsm.table()
    }

    pub fn breaches(&self) -> &[String] {
        &self.breaches
    }
}

impl Tickable for AllocatorUnit {
    fn tick(&mut self, cycle: Cycle, ports: &mut PortVector) {
        let [reset, w, w1, w2, w3] = self.inputs.map(|s| ports.bit(s));
        let out = self.fsm.step(AllocInputs { w, w1, w2, w3 }, reset);
        let [slotallot, led_slotallot, led, led_filled, led_reserv, free] = self.outputs;
        ports.set(slotallot, out.slotallot as u64);
        ports.set_bit(led_slotallot, out.led_slotallot);
        ports.set_bit(led, out.leds.led);
        ports.set_bit(led_filled, out.leds.led_filled);
        ports.set_bit(led_reserv, out.leds.led_reserv);
        ports.set(free, self.fsm.table().free_count() as u64);
        if [out.leds.led, out.leds.led_filled, out.leds.led_reserv]
            .iter()
            .filter(|&&l| l)
            .count()
            > 1
        {
            self.breaches
                .push(format!("cycle {cycle}: more than one status LED lit"));
        }
        if out.led_slotallot != (out.slotallot & SLOTALLOT_VALID != 0) {
            self.breaches.push(format!(
                "cycle {cycle}: led_slotallot disagrees with slotallot"
            ));
        }
    }
}
