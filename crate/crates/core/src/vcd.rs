//! Value Change Dump serialization of a [`Trace`].

use std::fmt::Write as _;

use crate::sim::{Cycle, Trace};

/// One cycle per timestamp unit.
pub const DEFAULT_TIMESCALE: &str = "1ns";

const SCOPE: &str = "top";

/// Short printable identifier code for the `index`-th variable (`!`, `"`, ... then two chars).
fn id_code(mut index: usize) -> String {
    const FIRST: u8 = b'!';
    const RADIX: usize = (b'~' - b'!' + 1) as usize;
    let mut code = String::new();
    loop {
        code.push((FIRST + (index % RADIX) as u8) as char);
        index /= RADIX;
        if index == 0 {
            break;
        }
        index -= 1;
    }
    code
}

fn push_value(out: &mut String, width: u8, value: u64, id: &str) {
    if width == 1 {
        let _ = writeln!(out, "{value}{id}");
    } else {
        let _ = writeln!(out, "b{value:0w$b} {id}", w = width as usize);
    }
}

/// Serializes `trace` as an IEEE-1364 textual VCD.
///
/// Pure function of its inputs; no date or tool-dependent fields are written.
pub fn emit_vcd(trace: &Trace, timescale: &str) -> Vec<u8> {
    if let Err(msg) = trace.check_invariants() {
        panic!("malformed trace: {msg}");
    }
    let ids: Vec<String> = (0..trace.signals().len()).map(id_code).collect();
    let mut out = String::new();
    out.push_str("$version parksim $end\n");
    let _ = writeln!(out, "$timescale {timescale} $end");
    let _ = writeln!(out, "$scope module {SCOPE} $end");
    for (sig, id) in trace.signals().iter().zip(&ids) {
        let _ = writeln!(out, "$var wire {} {} {} $end", sig.width(), id, sig.name());
    }
    out.push_str("$upscope $end\n$enddefinitions $end\n$dumpvars\n");
    for (sig, id) in trace.signal_refs().zip(&ids) {
        push_value(&mut out, trace.signal(sig).width(), trace.initial(sig), id);
    }
    out.push_str("$end\n");

    let mut current: Option<Cycle> = None;
    for event in trace.events() {
        if current != Some(event.cycle) {
            let _ = writeln!(out, "#{}", event.cycle);
            current = Some(event.cycle);
        }
        let sig = trace.signal(event.signal);
        push_value(
            &mut out,
            sig.width(),
            event.value,
            &ids[event.signal.index()],
        );
    }
    out.into_bytes()
}
