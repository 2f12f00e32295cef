//! Helpers shared by the integration tests. Nothing here calls into the
//! crate's own VCD or LCD code, so the tests can use them as oracles.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use parksim::runner::Mode;

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn load_scenario(file: &str) -> String {
    std::fs::read_to_string(scenario_dir().join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

/// The bundled scenarios and the model each one drives.
pub const BUNDLED: [(&str, Mode); 8] = [
    ("stepper_rotation.scn", Mode::Stepper),
    ("ident_members.scn", Mode::Ident),
    ("allocator_slot15.scn", Mode::Allocator),
    ("member_entry.scn", Mode::Parking),
    ("gate_slot15.scn", Mode::Parking),
    ("new_visitor_entry.scn", Mode::Parking),
    ("full_lot.scn", Mode::Parking),
    ("wrong_assertion.scn", Mode::Parking),
];

#[derive(Debug, Clone)]
pub struct VcdVar {
    pub width: u32,
    pub name: String,
}

/// Minimal reader for the subset of VCD the simulator writes.
#[derive(Debug, Clone, Default)]
pub struct Vcd {
    pub timescale: String,
    pub vars: HashMap<String, VcdVar>,
    pub initial: HashMap<String, u64>,
    /// (time, signal name, value) in file order.
    pub changes: Vec<(u64, String, u64)>,
}

impl Vcd {
    pub fn parse(bytes: &[u8]) -> Vcd {
        let text = std::str::from_utf8(bytes).expect("VCD is ASCII");
        let mut vcd = Vcd::default();
        let mut tokens = text.split_whitespace().peekable();
        let mut time: Option<u64> = None;
        let mut in_dumpvars = false;
        while let Some(tok) = tokens.next() {
            match tok {
                "$timescale" => {
                    let mut ts = String::new();
                    for t in tokens.by_ref().take_while(|t| *t != "$end") {
                        ts.push_str(t);
                    }
                    vcd.timescale = ts;
                }
                "$var" => {
                    let parts: Vec<&str> = tokens.by_ref().take_while(|t| *t != "$end").collect();
                    assert_eq!(parts.len(), 4, "bad $var {parts:?}");
                    assert_eq!(parts[0], "wire");
                    let var = VcdVar {
                        width: parts[1].parse().unwrap(),
                        name: parts[3].to_string(),
                    };
                    vcd.vars.insert(parts[2].to_string(), var);
                }
                "$dumpvars" => in_dumpvars = true,
                "$end" if in_dumpvars => in_dumpvars = false,
                t if t.starts_with('$') => for _ in tokens.by_ref().take_while(|t| *t != "$end") {},
                t if t.starts_with('#') => {
                    let next: u64 = t[1..].parse().unwrap();
                    assert!(
                        time.is_none_or(|prev| next > prev),
                        "time goes backwards at {t}"
                    );
                    time = Some(next);
                }
                t if t.starts_with('b') => {
                    let value = u64::from_str_radix(&t[1..], 2).unwrap();
                    let id = tokens.next().expect("id after vector value");
                    vcd.record(time, in_dumpvars, id, value, t.len() as u32 - 1);
                }
                t if t.starts_with('0') || t.starts_with('1') => {
                    let value = (t.as_bytes()[0] - b'0') as u64;
                    vcd.record(time, in_dumpvars, &t[1..], value, 1);
                }
                other => panic!("unexpected VCD token `{other}`"),
            }
        }
        vcd
    }

    fn record(&mut self, time: Option<u64>, dumpvars: bool, id: &str, value: u64, digits: u32) {
        let var = self
            .vars
            .get(id)
            .unwrap_or_else(|| panic!("unknown id `{id}`"));
        assert_eq!(digits, var.width, "value width for {}", var.name);
        let name = var.name.clone();
        if dumpvars {
            self.initial.insert(name, value);
        } else {
            self.changes
                .push((time.expect("change before first timestamp"), name, value));
        }
    }

    pub fn has(&self, name: &str) -> bool {
        self.vars.values().any(|v| v.name == name)
    }

    /// Value of `name` at the end of each cycle `0..cycles`.
    pub fn waveform(&self, name: &str, cycles: u64) -> Vec<u64> {
        let mut value = *self
            .initial
            .get(name)
            .unwrap_or_else(|| panic!("no initial value for {name}"));
        let mut out = Vec::with_capacity(cycles as usize);
        let mut changes = self.changes.iter().filter(|(_, n, _)| n == name).peekable();
        for c in 0..cycles {
            while let Some((_, _, v)) = changes.next_if(|(t, _, _)| *t == c) {
                value = *v;
            }
            out.push(value);
        }
        out
    }
}

/// Replays the LCD pins (write-only 8-bit HD44780 subset: clear, set DDRAM
/// address, data) and returns both rows. A transaction latches when E falls.
pub fn replay_lcd(rs: &[u64], e: &[u64], d: &[u64]) -> [String; 2] {
    let mut rows = [[b' '; 16]; 2];
    let mut addr: u8 = 0;
    let mut last_e = 0;
    for c in 0..e.len() {
        if last_e == 1 && e[c] == 0 {
            let byte = d[c] as u8;
            if rs[c] == 1 {
                let (row, col) = if addr >= 0x40 {
                    (1, addr - 0x40)
                } else {
                    (0, addr)
                };
                rows[row][col as usize] = byte;
                if col < 15 {
                    addr += 1;
                }
            } else if byte == 0x01 {
                rows = [[b' '; 16]; 2];
                addr = 0;
            } else if byte & 0x80 != 0 {
                addr = byte & 0x7F;
            }
        }
        last_e = e[c];
    }
    rows.map(|r| String::from_utf8(r.to_vec()).unwrap())
}
