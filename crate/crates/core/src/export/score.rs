use std::fmt::Write as _;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::corpus::{Melody, Mode, PitchToken};

const MEASURE_QUARTERS: i64 = 4;

type Q = Ratio<i64>;

/// One notated piece of an event, possibly tied to its neighbours.
struct Piece {
    pitch: PitchToken,
    length: Q,
    tie_stop: bool,
    tie_start: bool,
}

/// Single-part 4/4 score. Events crossing a barline, or whose length is not
/// a single notated value, become tied pieces. The last measure is left
/// short rather than padded, so the score reads back to the same events.
pub fn to_musicxml(melody: &Melody) -> String {
    let divisions = melody
        .events
        .iter()
        .fold(1i64, |acc, e| acc.lcm(e.duration.ratio().denom()));
    let measures = layout(melody);

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    out.push_str(
        "<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 4.0 Partwise//EN\" \
         \"http://www.musicxml.org/dtds/partwise.dtd\">\n",
    );
    out.push_str("<score-partwise version=\"4.0\">\n");
    if !melody.source.is_empty() {
        let _ = writeln!(out, "  <work>\n    <work-title>{}</work-title>\n  </work>", escape(&melody.source));
    }
    out.push_str("  <part-list>\n    <score-part id=\"P1\">\n      <part-name>Melody</part-name>\n    </score-part>\n  </part-list>\n");
    out.push_str("  <part id=\"P1\">\n");
    let count = measures.len();
    for (i, pieces) in measures.iter().enumerate() {
        let _ = writeln!(out, "    <measure number=\"{}\">", i + 1);
        if i == 0 {
            out.push_str("      <attributes>\n");
            let _ = writeln!(out, "        <divisions>{divisions}</divisions>");
            if let Some(key) = melody.key {
                let mode = match key.mode {
                    Mode::Major => "major",
                    Mode::Minor => "minor",
                };
                let _ = writeln!(
                    out,
                    "        <key>\n          <fifths>{}</fifths>\n          <mode>{mode}</mode>\n        </key>",
                    key.fifths
                );
            }
            out.push_str("        <time>\n          <beats>4</beats>\n          <beat-type>4</beat-type>\n        </time>\n");
            out.push_str("        <clef>\n          <sign>G</sign>\n          <line>2</line>\n        </clef>\n");
            out.push_str("      </attributes>\n");
        }
        for piece in pieces {
            write_piece(&mut out, piece, divisions);
        }
        if i + 1 == count {
            out.push_str("      <barline location=\"right\">\n        <bar-style>light-heavy</bar-style>\n      </barline>\n");
        }
        out.push_str("    </measure>\n");
    }
    out.push_str("  </part>\n</score-partwise>\n");
    out
}

fn layout(melody: &Melody) -> Vec<Vec<Piece>> {
    let measure = Q::from_integer(MEASURE_QUARTERS);
    let mut measures: Vec<Vec<Piece>> = vec![Vec::new()];
    let mut position = Q::zero();
    for event in &melody.events {
        let mut lengths = Vec::new();
        let mut remaining = event.duration.ratio();
        let mut pos = position;
        while remaining > Q::zero() {
            let room = measure - pos;
            let segment = remaining.min(room);
            lengths.extend(notated_values(segment));
            remaining -= segment;
            pos = (pos + segment) % measure;
        }
        let n = lengths.len();
        for (k, length) in lengths.into_iter().enumerate() {
            if position == measure {
                measures.push(Vec::new());
                position = Q::zero();
            }
            measures.last_mut().expect("at least one measure").push(Piece {
                pitch: event.pitch,
                length,
                tie_stop: k > 0,
                tie_start: k + 1 < n,
            });
            position += length;
        }
    }
    measures
}

/// Greedy split into plain or single-dotted note values from whole down to
/// 64th. Lengths that are not dyadic stay whole.
fn notated_values(length: Q) -> Vec<Q> {
    if !(*length.denom() as u64).is_power_of_two() {
        return vec![length];
    }
    let mut out = Vec::new();
    let mut remaining = length;
    while remaining > Q::zero() {
        match NOTE_VALUES.iter().map(|(q, _, _)| q()).find(|q| *q <= remaining) {
            Some(q) => {
                out.push(q);
                remaining -= q;
            }
            None => {
                out.push(remaining);
                break;
            }
        }
    }
    out
}

type NoteValue = (fn() -> Q, &'static str, bool);

/// (length in quarters, type name, dotted), longest first.
const NOTE_VALUES: [NoteValue; 13] = [
    (|| Q::from_integer(4), "whole", false),
    (|| Q::from_integer(3), "half", true),
    (|| Q::from_integer(2), "half", false),
    (|| Q::new(3, 2), "quarter", true),
    (Q::one, "quarter", false),
    (|| Q::new(3, 4), "eighth", true),
    (|| Q::new(1, 2), "eighth", false),
    (|| Q::new(3, 8), "16th", true),
    (|| Q::new(1, 4), "16th", false),
    (|| Q::new(3, 16), "32nd", true),
    (|| Q::new(1, 8), "32nd", false),
    (|| Q::new(3, 32), "64th", true),
    (|| Q::new(1, 16), "64th", false),
];

fn note_type(length: Q) -> Option<(&'static str, bool)> {
    NOTE_VALUES.iter().find(|(q, _, _)| q() == length).map(|(_, name, dot)| (*name, *dot))
}

fn write_piece(out: &mut String, piece: &Piece, divisions: i64) {
    out.push_str("      <note>\n");
    match piece.pitch {
        PitchToken::Rest => out.push_str("        <rest/>\n"),
        PitchToken::Note(n) => {
            let _ = write!(out, "        <pitch>\n          <step>{}</step>\n", n.step.letter());
            if n.alter != 0 {
                let _ = writeln!(out, "          <alter>{}</alter>", n.alter);
            }
            let _ = writeln!(out, "          <octave>{}</octave>\n        </pitch>", n.octave);
        }
    }
    let ticks = piece.length * divisions;
    let _ = writeln!(out, "        <duration>{}</duration>", ticks.to_integer());
    // rests carry <tie> too so a split rest reads back as one event
    if piece.tie_stop {
        out.push_str("        <tie type=\"stop\"/>\n");
    }
    if piece.tie_start {
        out.push_str("        <tie type=\"start\"/>\n");
    }
    out.push_str("        <voice>1</voice>\n");
    if let Some((name, dotted)) = note_type(piece.length) {
        let _ = writeln!(out, "        <type>{name}</type>");
        if dotted {
            out.push_str("        <dot/>\n");
        }
    }
    if !piece.pitch.is_rest() && (piece.tie_stop || piece.tie_start) {
        out.push_str("        <notations>\n");
        if piece.tie_stop {
            out.push_str("          <tied type=\"stop\"/>\n");
        }
        if piece.tie_start {
            out.push_str("          <tied type=\"start\"/>\n");
        }
        out.push_str("        </notations>\n");
    }
    out.push_str("      </note>\n");
}

fn escape(text: &str) -> String {
    let mut s = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => s.push_str("&amp;"),
            '<' => s.push_str("&lt;"),
            '>' => s.push_str("&gt;"),
            '"' => s.push_str("&quot;"),
            '\'' => s.push_str("&apos;"),
            c => s.push(c),
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_musicxml, Event, KeySignature};

    fn melody(events: &[(&str, &str)]) -> Melody {
        Melody::new("t & <x>", events.iter().map(|(p, d)| Event::parse(p, d).unwrap()).collect())
    }

    fn round_trip(m: &Melody) {
        let xml = to_musicxml(m);
        assert_eq!(&parse_musicxml(&xml).unwrap(), m, "{xml}");
    }

    #[test]
    fn three_quarters_fit_one_short_measure() {
        let m = melody(&[("C4", "1"), ("D4", "1"), ("E4", "1")]);
        let xml = to_musicxml(&m);
        assert_eq!(xml.matches("<measure ").count(), 1);
        assert!(!xml.contains("<rest/>"));
        round_trip(&m);
    }

    #[test]
    fn barline_crossings_are_tied() {
        let m = melody(&[("C4", "3"), ("D4", "3"), ("R", "3"), ("R", "3"), ("E4", "5/2")]);
        let xml = to_musicxml(&m);
        assert_eq!(xml.matches("<measure ").count(), 4);
        assert!(xml.contains("<tied type=\"start\"/>"));
        round_trip(&m);
    }

    #[test]
    fn repeated_pitches_stay_separate() {
        round_trip(&melody(&[("G4", "1"), ("G4", "1"), ("R", "1/2"), ("R", "1/2")]));
    }

    #[test]
    fn unusual_lengths() {
        round_trip(&melody(&[("A4", "1/3"), ("B4", "2/3"), ("C5", "5/4"), ("Bb3", "7/8"), ("F##4", "1/128")]));
    }

    #[test]
    fn key_is_kept() {
        let mut m = melody(&[("D4", "1")]);
        m.key = Some(KeySignature { fifths: 2, mode: Mode::Major });
        round_trip(&m);
    }

    #[test]
    fn dyadic_split() {
        let v = notated_values(Q::new(7, 2));
        assert_eq!(v, vec![Q::from_integer(3), Q::new(1, 2)]);
        assert_eq!(notated_values(Q::new(5, 3)), vec![Q::new(5, 3)]);
        assert_eq!(note_type(Q::new(3, 2)), Some(("quarter", true)));
    }
}
