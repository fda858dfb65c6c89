use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use super::ExportError;
use crate::corpus::Melody;

pub const TICKS_PER_QUARTER: u16 = 480;
pub const DEFAULT_TEMPO_BPM: f64 = 90.0;
pub const NOTE_VELOCITY: u8 = 80;

/// Standard MIDI file, format 0, one track on channel 1.
///
/// Each event starts at `round(480 · onset)` ticks, so rounding never
/// accumulates. Rests leave gaps.
pub fn to_midi(melody: &Melody, tempo_bpm: f64) -> Result<Vec<u8>, ExportError> {
    if melody.is_empty() {
        return Err(ExportError::EmptyMelody);
    }
    if !(tempo_bpm.is_finite() && tempo_bpm > 0.0) {
        return Err(ExportError::InvalidTempo(tempo_bpm));
    }
    let tick = |q: Ratio<i64>| -> u64 {
        (q * i64::from(TICKS_PER_QUARTER)).round().to_u64().unwrap_or(0)
    };

    let mut track = Vec::new();
    let micros = (60_000_000.0 / tempo_bpm).round().clamp(1.0, 16_777_215.0) as u32;
    track.extend_from_slice(&[0x00, 0xFF, 0x51, 0x03]);
    track.extend_from_slice(&micros.to_be_bytes()[1..]);
    // 4/4, 24 clocks per click, 8 32nds per quarter
    track.extend_from_slice(&[0x00, 0xFF, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08]);

    let mut onset = Ratio::zero();
    let mut last_tick = 0u64;
    for event in &melody.events {
        let end = onset + event.duration.ratio();
        if let Some(midi) = event.pitch.midi() {
            let key = u8::try_from(midi)
                .ok()
                .filter(|k| *k <= 127)
                .ok_or(ExportError::PitchOutOfRange(midi))?;
            let (on, off) = (tick(onset), tick(end));
            write_vlq(&mut track, on - last_tick);
            track.extend_from_slice(&[0x90, key, NOTE_VELOCITY]);
            write_vlq(&mut track, off - on);
            track.extend_from_slice(&[0x80, key, 0]);
            last_tick = off;
        }
        onset = end;
    }
    write_vlq(&mut track, tick(onset) - last_tick);
    track.extend_from_slice(&[0xFF, 0x2F, 0x00]);

    let mut out = Vec::with_capacity(22 + track.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&TICKS_PER_QUARTER.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

fn write_vlq(out: &mut Vec<u8>, mut value: u64) {
    let mut bytes = vec![(value & 0x7F) as u8];
    value >>= 7;
    while value > 0 {
        bytes.push(((value & 0x7F) as u8) | 0x80);
        value >>= 7;
    }
    out.extend(bytes.iter().rev());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Event;

    #[test]
    fn variable_length_quantities() {
        for (v, expected) in [
            (0u64, vec![0x00]),
            (0x7F, vec![0x7F]),
            (0x80, vec![0x81, 0x00]),
            (480, vec![0x83, 0x60]),
            (0x0FFF_FFFF, vec![0xFF, 0xFF, 0xFF, 0x7F]),
        ] {
            let mut out = Vec::new();
            write_vlq(&mut out, v);
            assert_eq!(out, expected, "{v}");
        }
    }

    #[test]
    fn single_quarter_a4() {
        let m = Melody::new("a", vec![Event::parse("A4", "1").unwrap()]);
        let bytes = to_midi(&m, 90.0).unwrap();
        assert_eq!(&bytes[..4], b"MThd");
        // tempo 666667 µs
        assert!(bytes.windows(6).any(|w| w == [0xFF, 0x51, 0x03, 0x0A, 0x2C, 0x2B]));
        assert!(bytes.windows(5).any(|w| w == [0x00, 0x90, 69, 80, 0x83]));
    }

    #[test]
    fn errors() {
        assert!(matches!(to_midi(&Melody::new("e", vec![]), 90.0), Err(ExportError::EmptyMelody)));
        let m = Melody::new("h", vec![Event::parse("A9", "1").unwrap()]);
        assert!(matches!(to_midi(&m, 90.0), Err(ExportError::PitchOutOfRange(129))));
    }
}
