//! Visitor identification FSM.
//!
//! A card code is shifted in serially, MSB first: `w` starts a capture, each
//! cycle with the strobe `w2` high samples `w1`. After 8 bits the code is
//! looked up; members raise `identified`, everyone else raises `new_member`
//! and is allotted the next temporary card. Results hold until `z`.

use std::collections::BTreeSet;

pub const CODE_BITS: u8 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberRegistry {
    members: BTreeSet<u8>,
    next_temp_card: u32,
}

impl Default for MemberRegistry {
    fn default() -> Self {
        MemberRegistry {
            members: BTreeSet::new(),
            next_temp_card: 1,
        }
    }
}

impl MemberRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_members(codes: impl IntoIterator<Item = u8>) -> Self {
        MemberRegistry {
            members: codes.into_iter().collect(),
            ..Self::default()
        }
    }

    pub fn add_member(&mut self, code: u8) {
        self.members.insert(code);
    }

    pub fn contains(&self, code: u8) -> bool {
        self.members.contains(&code)
    }

    pub fn members(&self) -> impl Iterator<Item = u8> + '_ {
        self.members.iter().copied()
    }

    pub fn next_temp_card(&self) -> u32 {
        self.next_temp_card
    }

    fn allot_temp_card(&mut self) -> u32 {
        let card = self.next_temp_card;
        self.next_temp_card += 1;
        card
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum IdentPhase {
    #[default]
    Idle,
    Capture,
    Lookup,
    Identified,
    NewMember,
}

impl IdentPhase {
    /// Encoding used for the `current_state` trace signal.
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdentInputs {
    /// Card present.
    pub w: bool,
    /// Serial code bit.
    pub w1: bool,
    /// Code bit strobe.
    pub w2: bool,
    /// Acknowledge / abort.
    pub z: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdentOutputs {
    pub out_1: bool,
    pub identified: bool,
    pub new_member: bool,
    pub temp_card: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdentFsm {
    phase: IdentPhase,
    captured_code: u8,
    bits_captured: u8,
    /// Code resolved by the last lookup, kept while the result is held.
    resolved: Option<u8>,
    temp_card: Option<u32>,
}

impl IdentFsm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn phase(&self) -> IdentPhase {
        self.phase
    }

    pub fn captured_code(&self) -> u8 {
        self.captured_code
    }

    pub fn bits_captured(&self) -> u8 {
        self.bits_captured
    }

    pub fn resolved_code(&self) -> Option<u8> {
        self.resolved
    }

    fn held_outputs(&self) -> IdentOutputs {
        IdentOutputs {
            out_1: false,
            identified: self.phase == IdentPhase::Identified,
            new_member: self.phase == IdentPhase::NewMember,
            temp_card: self.temp_card,
        }
    }

    pub fn step(
        &mut self,
        registry: &mut MemberRegistry,
        inputs: IdentInputs,
        reset: bool,
    ) -> IdentOutputs {
        if reset {
            *self = IdentFsm::default();
            return IdentOutputs::default();
        }
        match self.phase {
            IdentPhase::Idle => {
                if inputs.w {
                    self.phase = IdentPhase::Capture;
                    self.captured_code = 0;
                    self.bits_captured = 0;
                }
            }
            IdentPhase::Capture => {
                if inputs.z {
                    *self = IdentFsm::default();
                } else if inputs.w2 {
                    self.captured_code = self.captured_code << 1 | inputs.w1 as u8;
                    self.bits_captured += 1;
                    if self.bits_captured == CODE_BITS {
                        self.phase = IdentPhase::Lookup;
                    }
                }
            }
            IdentPhase::Lookup => {
                let code = self.captured_code;
                self.resolved = Some(code);
                if registry.contains(code) {
                    self.phase = IdentPhase::Identified;
                } else {
                    self.phase = IdentPhase::NewMember;
                    self.temp_card = Some(registry.allot_temp_card());
                }
                return IdentOutputs {
                    out_1: true,
                    ..self.held_outputs()
                };
            }
            IdentPhase::Identified | IdentPhase::NewMember => {
                if inputs.z {
                    *self = IdentFsm::default();
                }
            }
        }
        self.held_outputs()
    }
}
