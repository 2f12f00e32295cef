//! Line-oriented scenario scripts.
//!
//! ```text
//! # free lot, one member
//! member 0x2a
//! slot 3 filled
//! at 5 set car_enter 1
//! assert 400 cout 1
//! at 120 corrupt 7
//! run 600
//! ```

use std::fmt;

use thiserror::Error;

use crate::slots::SlotStatus;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Directive {
    Set { at: u64, signal: String, value: u64 },
    Assert { at: u64, signal: String, value: u64 },
    Member(u8),
    Slot { index: usize, status: SlotStatus },
    Corrupt { at: u64, bit: usize },
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Directive::Set { at, signal, value } => write!(f, "at {at} set {signal} {value}"),
            Directive::Assert { at, signal, value } => write!(f, "assert {at} {signal} {value}"),
            Directive::Member(code) => write!(f, "member {code:#04x}"),
            Directive::Slot { index, status } => write!(f, "slot {index} {status}"),
            Directive::Corrupt { at, bit } => write!(f, "at {at} corrupt {bit}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub directives: Vec<Directive>,
    /// Cycles to simulate.
    pub total: u64,
}

impl Scenario {
    pub fn sets(&self) -> impl Iterator<Item = (u64, &str, u64)> {
        self.directives.iter().filter_map(|d| match d {
            Directive::Set { at, signal, value } => Some((*at, signal.as_str(), *value)),
            _ => None,
        })
    }

    pub fn asserts(&self) -> impl Iterator<Item = (u64, &str, u64)> {
        self.directives.iter().filter_map(|d| match d {
            Directive::Assert { at, signal, value } => Some((*at, signal.as_str(), *value)),
            _ => None,
        })
    }
}

/// Canonical form; parses back to an equal scenario.
impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.directives {
            writeln!(f, "{d}")?;
        }
        writeln!(f, "run {}", self.total)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

/// Decimal or `0x` hex.
pub fn parse_number(token: &str) -> Option<u64> {
    match token
        .strip_prefix("0x")
        .or_else(|| token.strip_prefix("0X"))
    {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => token.parse().ok(),
    }
}

fn number(line: usize, token: &str) -> Result<u64, ParseError> {
    parse_number(token).ok_or_else(|| err(line, format!("bad number `{token}`")))
}

fn signal_name(line: usize, token: &str) -> Result<String, ParseError> {
    let mut chars = token.chars();
    let ok = chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(token.to_string())
    } else {
        Err(err(line, format!("bad signal name `{token}`")))
    }
}

fn expect_args(line: usize, tokens: &[&str], n: usize, usage: &str) -> Result<(), ParseError> {
    if tokens.len() == n {
        Ok(())
    } else {
        Err(err(line, format!("expected `{usage}`")))
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut directives = Vec::new();
    // (line, at) of every timed directive, checked once the total is known
    let mut timed = Vec::new();
    let mut total = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some(&head) = tokens.first() else {
            continue;
        };
        if total.is_some() {
            return Err(err(line, "`run` must be the last directive"));
        }
        match head {
            "member" => {
                expect_args(line, &tokens, 2, "member <code>")?;
                let code = number(line, tokens[1])?;
                let code = u8::try_from(code)
                    .map_err(|_| err(line, format!("member code {code} exceeds 8 bits")))?;
                directives.push(Directive::Member(code));
            }
            "slot" => {
                expect_args(line, &tokens, 3, "slot <index> <empty|filled|reserved>")?;
                let index = number(line, tokens[1])? as usize;
                let status = tokens[2].parse().map_err(|e| err(line, format!("{e}")))?;
                directives.push(Directive::Slot { index, status });
            }
            "at" => {
                let at = number(line, tokens.get(1).copied().unwrap_or(""))?;
                match tokens.get(2).copied() {
                    Some("set") => {
                        expect_args(line, &tokens, 5, "at <cycle> set <signal> <value>")?;
                        let signal = signal_name(line, tokens[3])?;
                        let value = number(line, tokens[4])?;
                        directives.push(Directive::Set { at, signal, value });
                    }
                    Some("corrupt") => {
                        expect_args(line, &tokens, 4, "at <cycle> corrupt <bit>")?;
                        let bit = number(line, tokens[3])? as usize;
                        directives.push(Directive::Corrupt { at, bit });
                    }
                    Some(other) => return Err(err(line, format!("unknown action `{other}`"))),
                    None => return Err(err(line, "expected `set` or `corrupt` after cycle")),
                }
                timed.push((line, at));
            }
            "assert" => {
                expect_args(line, &tokens, 4, "assert <cycle> <signal> <value>")?;
                let at = number(line, tokens[1])?;
                let signal = signal_name(line, tokens[2])?;
                let value = number(line, tokens[3])?;
                directives.push(Directive::Assert { at, signal, value });
                timed.push((line, at));
            }
            "run" => {
                expect_args(line, &tokens, 2, "run <cycles>")?;
                total = Some(number(line, tokens[1])?);
            }
            other => return Err(err(line, format!("unknown directive `{other}`"))),
        }
    }

    let total = total.ok_or_else(|| err(last_line.max(1), "missing `run` directive"))?;
    if let Some(&(line, at)) = timed.iter().find(|&&(_, at)| at > total) {
        return Err(err(
            line,
            format!("cycle {at} is past the run length {total}"),
        ));
    }
    Ok(Scenario { directives, total })
}
