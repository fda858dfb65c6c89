//! The bracketed seed literal: a list of pitch names and a list of quarter
//! lengths of equal size, e.g. `[['A4','C5'],[0.5,1]]` or `[[],[]]`.
//!
//! Items may be bare or quoted with `'`, `"`, LaTeX-style `` `…' `` or
//! typographic quotes. Durations accept decimals and fractions.

use thiserror::Error;

use crate::corpus::{DurationToken, Event, PitchToken};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bad seed literal at column {column}: {message} (expected e.g. [['A4'],[1.0]] or [[],[]])")]
pub struct SeedError {
    pub column: usize,
    pub message: String,
}

pub fn parse_seed(text: &str) -> Result<Vec<Event>, SeedError> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0 };
    p.skip_ws();
    p.expect('[')?;
    let pitches = p.list()?;
    p.skip_ws();
    p.expect(',')?;
    let durations = p.list()?;
    p.skip_ws();
    p.expect(']')?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("unexpected text after the literal"));
    }
    if pitches.len() != durations.len() {
        return Err(SeedError {
            column: 1,
            message: format!(
                "{} pitches but {} durations; both lists need the same length",
                pitches.len(),
                durations.len()
            ),
        });
    }
    pitches
        .iter()
        .zip(&durations)
        .map(|((pc, pitch), (dc, duration))| {
            let pitch: PitchToken =
                pitch.parse().map_err(|e| SeedError { column: *pc, message: format!("{e}") })?;
            let duration: DurationToken =
                duration.parse().map_err(|e| SeedError { column: *dc, message: format!("{e}") })?;
            Ok(Event::new(pitch, duration))
        })
        .collect()
}

/// Canonical form, which parses back to the same seed.
pub fn format_seed(seed: &[Event]) -> String {
    let pitches: Vec<String> = seed.iter().map(|e| format!("'{}'", e.pitch)).collect();
    let durations: Vec<String> = seed.iter().map(|e| e.duration.to_string()).collect();
    format!("[[{}],[{}]]", pitches.join(","), durations.join(","))
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, message: &str) -> SeedError {
        SeedError { column: self.pos + 1, message: message.to_string() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<(), SeedError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    /// `[item, item, ...]` returning each item with its 1-based column.
    fn list(&mut self) -> Result<Vec<(usize, String)>, SeedError> {
        self.skip_ws();
        self.expect('[')?;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(']') {
                self.pos += 1;
                return Ok(items);
            }
            if !items.is_empty() {
                self.expect(',')?;
                self.skip_ws();
                // tolerate a trailing comma
                if self.peek() == Some(']') {
                    self.pos += 1;
                    return Ok(items);
                }
            }
            let column = self.pos + 1;
            items.push((column, self.item()?));
        }
    }

    fn item(&mut self) -> Result<String, SeedError> {
        let close = match self.peek() {
            Some('\'') => Some(&['\''][..]),
            Some('"') => Some(&['"'][..]),
            Some('`') => Some(&['\'', '`'][..]),
            Some('‘') => Some(&['’'][..]),
            Some('“') => Some(&['”'][..]),
            _ => None,
        };
        let start = self.pos;
        let text: String = match close {
            Some(close) => {
                self.pos += 1;
                let begin = self.pos;
                while self.peek().is_some_and(|c| !close.contains(&c)) {
                    self.pos += 1;
                }
                if self.peek().is_none() {
                    self.pos = start;
                    return Err(self.error("unterminated quote"));
                }
                let s = self.chars[begin..self.pos].iter().collect();
                self.pos += 1;
                s
            }
            None => {
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || matches!(c, '#' | '.' | '/' | '-' | '+'))
                {
                    self.pos += 1;
                }
                self.chars[start..self.pos].iter().collect()
            }
        };
        let text = text.trim().to_string();
        if text.is_empty() {
            self.pos = start;
            return Err(self.error("empty item"));
        }
        Ok(text)
    }
}
