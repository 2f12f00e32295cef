//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails or overruns its time limit.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{load_scenario, replay_lcd, Vcd, BUNDLED};
use parksim::controller::SystemConfig;
use parksim::rf::{corrupt, decode, encode, Ht12Frame};
use parksim::runner::{run_scenario, Mode, RunOutcome, EXIT_PASS};
use parksim::scenario::parse_scenario;
use parksim::slots::{SlotStatus, SlotTable};
use parksim::stepper::StepperConfig;
use parksim::Trace;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn run(text: &str, mode: Mode, cfg: &SystemConfig) -> RunOutcome {
    run_scenario(&parse_scenario(text).expect("scenario parses"), mode, cfg).expect("scenario runs")
}

fn wave(trace: &Trace, name: &str) -> Vec<u64> {
    trace.waveform(
        trace
            .lookup(name)
            .unwrap_or_else(|| panic!("no signal {name}")),
    )
}

/// Cycles at which `w` differs from the previous cycle.
fn changes(w: &[u64]) -> Vec<usize> {
    (1..w.len()).filter(|&c| w[c] != w[c - 1]).collect()
}

fn slot15_allotted() -> Result<String, String> {
    let expected = 0x20 | 15;

    let out = run(
        &load_scenario("allocator_slot15.scn"),
        Mode::Allocator,
        &SystemConfig::default(),
    );
    ensure!(
        out.exit_code() == EXIT_PASS,
        "allocator scenario:\n{}",
        out.report
    );
    let slotallot = wave(&out.trace, "slotallot");
    let led = wave(&out.trace, "led_slotallot");
    let granted: Vec<usize> = (0..slotallot.len())
        .filter(|&c| slotallot[c] & 0x20 != 0)
        .collect();
    ensure!(!granted.is_empty(), "no valid slotallot");
    ensure!(
        granted
            .iter()
            .all(|&c| slotallot[c] == expected && led[c] == 1),
        "allocator gave {:#x}",
        slotallot[granted[0]]
    );

    let out = run(
        &load_scenario("gate_slot15.scn"),
        Mode::Parking,
        &SystemConfig::default(),
    );
    ensure!(
        out.exit_code() == EXIT_PASS,
        "gate scenario:\n{}",
        out.report
    );
    let gate = wave(&out.trace, "slotallot");
    ensure!(gate.contains(&expected), "gate never allotted slot 15");

    // any mix of Filled and Reserved in 0..=14
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let mut t = SlotTable::new(32).unwrap();
        for s in 0..15 {
            t.set_status(
                s,
                if rng.gen() {
                    SlotStatus::Filled
                } else {
                    SlotStatus::Reserved
                },
            )
            .unwrap();
        }
        ensure!(t.allocate() == Some(15), "random prefix did not give 15");
    }
    Ok(format!(
        "slotallot = {expected:#04x} at cycle {}",
        granted[0]
    ))
}

fn stepper_one_hot() -> Result<String, String> {
    let rotation = [0b1000, 0b0100, 0b0010, 0b0001];
    let release = 4;
    let total = 1000;
    let text = format!("at 0 set reset 1\nat {release} set reset 0\nrun {total}\n");
    let mut summary = Vec::new();
    for div in [4, 1, 3, 7] {
        let cfg = SystemConfig {
            stepper: StepperConfig::new(div, 48).unwrap(),
            ..SystemConfig::default()
        };
        let out = run(&text, Mode::Stepper, &cfg);
        ensure!(
            out.report.breaches.is_empty(),
            "div {div}: {:?}",
            out.report.breaches
        );
        let z = wave(&out.trace, "Z");
        ensure!(z.len() == total, "ran {} cycles", z.len());
        if let Some(c) = z.iter().position(|v| v.count_ones() != 1) {
            return Err(format!("div {div}: Z = {:#06b} at cycle {c}", z[c]));
        }
        let steps = changes(&z);
        // the release cycle is the first cycle of the first divider period
        let expected_steps = (total as u64 - release) / div as u64;
        ensure!(
            steps.len() as u64 == expected_steps,
            "div {div}: {} steps, expected {expected_steps}",
            steps.len()
        );
        ensure!(
            steps[0] as u64 == release + div as u64 - 1,
            "div {div}: first step at {}",
            steps[0]
        );
        ensure!(
            steps.windows(2).all(|p| p[1] - p[0] == div as usize),
            "div {div}: uneven step spacing"
        );
        for &c in &steps {
            let prev = rotation.iter().position(|&r| r == z[c - 1]).unwrap();
            ensure!(
                z[c] == rotation[(prev + 1) % 4],
                "div {div}: out-of-order phase at {c}"
            );
        }
        summary.push(format!("div {div}: {} steps", steps.len()));
    }
    Ok(summary.join(", "))
}

fn lcd_messages() -> Result<String, String> {
    let cfg = SystemConfig::default();
    let mut rows = Vec::new();
    for (file, message, door_moves) in [
        ("member_entry.scn", "SPACE AVAILABLE", true),
        ("full_lot.scn", "NO SPACE EXIT", false),
    ] {
        let out = run(&load_scenario(file), Mode::Parking, &cfg);
        ensure!(out.exit_code() == EXIT_PASS, "{file}:\n{}", out.report);
        let row0 = out.report.lcd_rows.as_ref().unwrap()[0].clone();
        ensure!(row0.trim_end() == message, "{file}: row 0 is {row0:?}");
        let n = out.trace.cycles();
        let vcd = Vcd::parse(&out.vcd());
        let replayed = replay_lcd(
            &vcd.waveform("rs", n),
            &vcd.waveform("E", n),
            &vcd.waveform("D", n),
        );
        ensure!(
            replayed[0].trim_end() == message,
            "{file}: pins replay to {:?}",
            replayed[0]
        );
        let z = wave(&out.trace, "z");
        let steps = changes(&z).len();
        if door_moves {
            ensure!(steps == 2 * 48, "{file}: {steps} steps");
        } else {
            ensure!(
                steps == 0 && *wave(&out.trace, "steps").iter().max().unwrap() == 0,
                "{file}: door moved"
            );
        }
        rows.push(format!("{message:?} ({steps} steps)"));
    }
    Ok(rows.join(", "))
}

/// Serial code entry on the stand-alone identification FSM; returns the
/// cycle at which the result is expected.
fn ident_entry(text: &mut String, t: u64, code: u8) -> u64 {
    text.push_str(&format!(
        "at {t} set w 1\nat {} set w 0\nat {} set w2 1\n",
        t + 1,
        t + 1
    ));
    for i in 0..8u64 {
        text.push_str(&format!(
            "at {} set w1 {}\n",
            t + 1 + i,
            code >> (7 - i) & 1
        ));
    }
    text.push_str(&format!("at {} set w2 0\nat {} set w1 0\n", t + 9, t + 9));
    text.push_str(&format!("at {} set z 1\nat {} set z 0\n", t + 12, t + 13));
    t + 9
}

fn identification() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut members_seen, mut visitors_seen) = (0, 0);
    for run_no in 0..100 {
        let members: BTreeSet<u8> = (0..rng.gen_range(0..12)).map(|_| rng.gen()).collect();
        let mut text: String = members
            .iter()
            .map(|m| format!("member {m:#04x}\n"))
            .collect();
        let mut expected = Vec::new();
        let mut t = 2;
        for _ in 0..rng.gen_range(1..8) {
            let pick: Vec<u8> = members.iter().copied().collect();
            let code = match pick.choose(&mut rng) {
                Some(&m) if rng.gen() => m,
                _ => rng.gen(),
            };
            expected.push((ident_entry(&mut text, t, code), members.contains(&code)));
            t += 16;
        }
        text.push_str(&format!("run {t}\n"));
        let out = run(&text, Mode::Ident, &SystemConfig::default());
        ensure!(
            out.report.breaches.is_empty(),
            "run {run_no}: {:?}",
            out.report.breaches
        );
        let [out_1, identified, new_member, card] =
            ["out_1", "identified", "new_member", "temp_card"].map(|n| wave(&out.trace, n));
        if let Some(c) = (0..out_1.len()).find(|&c| identified[c] == 1 && new_member[c] == 1) {
            return Err(format!("run {run_no}: both results high at {c}"));
        }
        let pulses: Vec<u64> = (0..out_1.len() as u64)
            .filter(|&c| out_1[c as usize] == 1)
            .collect();
        let at: Vec<u64> = expected.iter().map(|e| e.0).collect();
        ensure!(
            pulses == at,
            "run {run_no}: out_1 at {pulses:?}, expected {at:?}"
        );
        let mut last_card = 0;
        for (c, member) in expected {
            let c = c as usize;
            if member {
                ensure!(
                    identified[c] == 1 && new_member[c] == 0,
                    "run {run_no}: member not identified at {c}"
                );
                members_seen += 1;
            } else {
                ensure!(
                    new_member[c] == 1 && identified[c] == 0,
                    "run {run_no}: visitor not flagged at {c}"
                );
                ensure!(
                    card[c] > last_card,
                    "run {run_no}: temp card {} after {last_card}",
                    card[c]
                );
                last_card = card[c];
                visitors_seen += 1;
            }
        }
    }
    ensure!(
        members_seen > 0 && visitors_seen > 0,
        "random mix missed a case"
    );
    Ok(format!("{members_seen} members, {visitors_seen} visitors"))
}

/// Brute-force scan: some run of `k` consecutive words with sync 1, matching
/// address and identical data.
fn run_oracle(bits: &[bool], local: u8, k: usize) -> Option<u8> {
    let value = |b: &[bool]| b.iter().fold(0u32, |acc, &x| acc << 1 | x as u32);
    let words: Vec<Option<u8>> = bits
        .chunks_exact(13)
        .map(|w| (w[0] && value(&w[1..9]) == local as u32).then(|| value(&w[9..13]) as u8))
        .collect();
    (0..words.len()).find_map(|start| {
        let window = words.get(start..start + k)?;
        let first = window[0]?;
        window.iter().all(|w| *w == Some(first)).then_some(first)
    })
}

fn ht12_codec() -> Result<String, String> {
    for address in 0..=255u8 {
        for data in 0..16u8 {
            let stream = encode(Ht12Frame::new(address, data).unwrap(), 3).unwrap();
            ensure!(stream.len() == 39, "stream length {}", stream.len());
            let got = decode(&stream, address, 3).unwrap();
            ensure!(
                got == Some(data),
                "({address:#04x}, {data}) decoded to {got:?}"
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut accepted, mut rejected) = (0, 0);
    for case in 0..1000 {
        let address: u8 = rng.gen();
        let data = rng.gen_range(0..16);
        let reps = rng.gen_range(3..=6);
        let local = if rng.gen_bool(0.9) {
            address
        } else {
            rng.gen()
        };
        let word = rng.gen_range(0..reps);
        let mask: u16 = rng.gen_range(1..1 << 13);
        let flips: Vec<usize> = (0..13)
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| word * 13 + b)
            .collect();
        let clean = encode(Ht12Frame::new(address, data).unwrap(), reps).unwrap();
        let noisy = corrupt(&clean, &flips).unwrap();
        let got = decode(&noisy, local, 3).unwrap();
        let want = run_oracle(noisy.bits(), local, 3);
        ensure!(got == want, "case {case}: decode {got:?}, oracle {want:?}");
        if got.is_some() {
            accepted += 1;
        } else {
            rejected += 1;
        }
    }
    ensure!(
        accepted > 0 && rejected > 0,
        "corruptions never split ({accepted}/{rejected})"
    );
    Ok(format!(
        "4096 round trips, 1000 corruptions ({accepted} accepted, {rejected} rejected)"
    ))
}

/// Plain array reference for the slot table: 0 empty, 1 filled, 2 reserved.
struct NaiveLot(Vec<u8>);

impl NaiveLot {
    fn ingest(&mut self, bank: usize, nibble: u8) {
        for i in 0..4 {
            let s = &mut self.0[4 * bank + i];
            if nibble >> i & 1 == 1 {
                *s = 1;
            } else if *s != 2 {
                *s = 0;
            }
        }
    }

    fn allocate(&mut self) -> Option<usize> {
        let slot = self.0.iter().position(|&s| s == 0)?;
        self.0[slot] = 2;
        Some(slot)
    }

    fn leds(&self, slot: usize) -> (bool, bool, bool) {
        (self.0[slot] == 0, self.0[slot] == 1, self.0[slot] == 2)
    }
}

fn code(status: SlotStatus) -> u8 {
    match status {
        SlotStatus::Empty => 0,
        SlotStatus::Filled => 1,
        SlotStatus::Reserved => 2,
    }
}

fn allocator_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut table = SlotTable::new(32).unwrap();
    let mut naive = NaiveLot(vec![0; 32]);
    let mut allocations = 0;
    for op in 0..10_000 {
        match rng.gen_range(0..4) {
            0 => {
                let (bank, nibble) = (rng.gen_range(0..8), rng.gen_range(0..16));
                table
                    .ingest_sensor(bank, nibble)
                    .map_err(|e| e.to_string())?;
                naive.ingest(bank, nibble);
            }
            1 => {
                let (got, want) = (table.allocate(), naive.allocate());
                ensure!(got == want, "op {op}: allocate {got:?} vs {want:?}");
                allocations += got.is_some() as u32;
            }
            2 => {
                let slot = rng.gen_range(0..32);
                table.release(slot).map_err(|e| e.to_string())?;
                naive.0[slot] = 0;
            }
            _ => {
                let slot = rng.gen_range(0..32);
                let leds = table.query(slot).map_err(|e| e.to_string())?;
                ensure!(
                    (leds.led, leds.led_filled, leds.led_reserv) == naive.leds(slot),
                    "op {op}: query {slot}"
                );
            }
        }
        let statuses: Vec<u8> = table.statuses().iter().map(|&s| code(s)).collect();
        ensure!(statuses == naive.0, "op {op}: tables diverge");
        ensure!(
            table.free_count() == naive.0.iter().filter(|&&s| s == 0).count(),
            "op {op}: free count"
        );
    }

    let mut fresh = SlotTable::new(32).unwrap();
    for expected in 0..32 {
        ensure!(
            fresh.allocate() == Some(expected),
            "allocation #{} not slot {expected}",
            expected + 1
        );
    }
    ensure!(fresh.allocate().is_none(), "allocation #33 succeeded");
    Ok(format!(
        "10000 ops ({allocations} allocations), #33 -> none"
    ))
}

fn determinism() -> Result<String, String> {
    let mut count = 0;
    let noisy = SystemConfig {
        bit_error_ppm: 30_000,
        seed: 17,
        ..SystemConfig::default()
    };
    let sweep = "at 1 set ir0 9\nat 1 set ir5 6\nat 2 set fnd 1\nat 3 set fnd 0\nrun 600\n";
    let mut cases: Vec<(String, Mode, SystemConfig)> = BUNDLED
        .iter()
        .map(|(f, m)| (load_scenario(f), *m, SystemConfig::default()))
        .collect();
    cases.push((sweep.to_string(), Mode::Parking, noisy.clone()));
    cases.push((load_scenario("new_visitor_entry.scn"), Mode::Parking, noisy));
    for (text, mode, cfg) in cases {
        let started = Instant::now();
        let a = run(&text, mode, &cfg).vcd();
        let b = run(&text, mode, &cfg).vcd();
        ensure!(a == b, "VCD differs between runs ({mode:?})");
        ensure!(
            started.elapsed() < Duration::from_secs(1),
            "scenario took {:?}",
            started.elapsed()
        );
        count += 1;
    }
    Ok(format!("{count} scenarios byte-identical"))
}

fn end_to_end() -> Result<String, String> {
    let cfg = SystemConfig::default();
    let bound = 2 * 48 * 4 + 64;
    let text = load_scenario("member_entry.scn");
    let out = run(&text, Mode::Parking, &cfg);
    ensure!(out.exit_code() == EXIT_PASS, "scenario:\n{}", out.report);
    let trace = &out.trace;
    let n = trace.cycles() as usize;
    let [car, z, out_1, identified, slotallot, cout, state, rs, e, d] = [
        "car_enter",
        "z",
        "out_1",
        "identified",
        "slotallot",
        "cout",
        "state",
        "rs",
        "E",
        "D",
    ]
    .map(|s| wave(trace, s));

    let entered = car.iter().position(|&v| v == 1).ok_or("no car_enter")?;
    let message = (entered..n)
        .find(|&c| replay_lcd(&rs[..=c], &e[..=c], &d[..=c])[0].trim_end() == "SPACE AVAILABLE")
        .ok_or("message never shown")?;
    let steps = changes(&z);
    ensure!(steps.len() == 96, "{} door steps", steps.len());
    let (open, close) = steps.split_at(48);
    let identify = (0..n)
        .find(|&c| out_1[c] == 1 && identified[c] == 1)
        .ok_or("no identification")?;
    let allot = (0..n)
        .find(|&c| slotallot[c] & 0x20 != 0)
        .ok_or("no allotment")?;
    let counted = changes(&cout);
    ensure!(
        counted.len() == 1 && cout[n - 1] == cout[0] + 1,
        "cout went {} -> {}",
        cout[0],
        cout[n - 1]
    );

    let order = [
        ("message", message, open[0]),
        ("door open", open[47], identify),
        ("identification", identify, allot),
        ("allotment", allot, close[0]),
    ];
    for (what, at, next) in order {
        ensure!(at < next, "{what} at {at} not before {next}");
    }
    ensure!(
        counted[0] >= allot && counted[0] < close[47],
        "cout changed at {}",
        counted[0]
    );

    let idle = (entered..n)
        .rev()
        .find(|&c| state[c] != 0)
        .map(|c| c + 1)
        .ok_or("never left idle")?;
    ensure!(
        idle < n && idle - entered <= bound,
        "idle after {} cycles (bound {bound})",
        idle - entered
    );
    Ok(format!(
        "msg@{message} open@{}..{} id@{identify} allot@{allot} close@{}..{} cout@{} idle after {} <= {bound}",
        open[0],
        open[47],
        close[0],
        close[47],
        counted[0],
        idle - entered
    ))
}

fn main() {
    let criteria: [(&str, Duration, Check); 8] = [
        (
            "1 slot 15 allotted",
            Duration::from_secs(1),
            slot15_allotted,
        ),
        ("2 stepper one-hot", Duration::from_secs(1), stepper_one_hot),
        ("3 LCD messages", Duration::from_secs(1), lcd_messages),
        ("4 identification", Duration::from_secs(5), identification),
        ("5 HT12 codec", Duration::from_secs(10), ht12_codec),
        (
            "6 allocator model",
            Duration::from_secs(5),
            allocator_equivalence,
        ),
        ("7 determinism", Duration::from_secs(9), determinism),
        ("8 end-to-end", Duration::from_secs(1), end_to_end),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let started = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = started.elapsed();
        let verdict = match result {
            Ok(detail) if elapsed <= limit => format!("PASS {detail}"),
            Ok(_) => format!("FAIL over time limit {limit:?}"),
            Err(why) => format!("FAIL {why}"),
        };
        if verdict.starts_with("FAIL") {
            failed += 1;
        }
        println!(
            "criterion {name}: {verdict} [{:.3}s]",
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 8 passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
