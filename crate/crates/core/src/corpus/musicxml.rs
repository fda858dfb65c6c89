//! Monophonic MusicXML reader.
//!
//! Reads the first part of a `score-partwise` document and keeps only the
//! voice of its first sounding note. Chords collapse to their highest pitch,
//! tied notes merge into one event and grace or cue notes are skipped.

use std::path::Path;

use num_rational::Ratio;
use roxmltree::{Document, Node, ParsingOptions};

use super::token::{DurationToken, Event, KeySignature, Melody, Mode, Note, PitchToken, Step};
use super::CorpusError;

pub fn parse_musicxml(document: &str) -> Result<Melody, CorpusError> {
    let options = ParsingOptions { allow_dtd: true, ..ParsingOptions::default() };
    let doc = Document::parse_with_options(document, options).map_err(|e| {
        let pos = e.pos();
        CorpusError::Xml { line: pos.row, column: pos.col, message: e.to_string() }
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "score-partwise" {
        return Err(CorpusError::Unsupported(format!(
            "root element <{}>; only score-partwise is read",
            root.tag_name().name()
        )));
    }
    let title = child(root, "work")
        .and_then(|w| child(w, "work-title"))
        .or_else(|| child(root, "movement-title"))
        .and_then(|n| n.text())
        .map(|t| t.trim().to_string())
        .unwrap_or_default();

    let part = child(root, "part").ok_or(CorpusError::EmptyMelody)?;
    let mut reader = PartReader::default();
    for measure in part.children().filter(|n| n.has_tag_name("measure")) {
        for item in measure.children().filter(Node::is_element) {
            match item.tag_name().name() {
                "attributes" => reader.attributes(item)?,
                "note" => reader.note(item)?,
                _ => {}
            }
        }
    }
    if reader.events.is_empty() {
        return Err(CorpusError::EmptyMelody);
    }
    Ok(Melody {
        source: title,
        events: reader.events.into_iter().map(|p| p.event).collect(),
        key: reader.key,
    })
}

/// Parse a file; the melody's source id becomes the file stem.
pub fn load_musicxml(path: &Path) -> Result<Melody, CorpusError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CorpusError::Io { path: path.display().to_string(), source: e })?;
    let mut melody = parse_musicxml(&text).map_err(|e| e.in_file(path))?;
    if let Some(stem) = path.file_stem() {
        melody.source = stem.to_string_lossy().into_owned();
    }
    Ok(melody)
}

/// Load every `.musicxml` / `.xml` file of a directory, sorted by file name.
pub fn load_corpus_dir(dir: &Path) -> Result<Vec<Melody>, CorpusError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CorpusError::Io { path: dir.display().to_string(), source: e })?;
    let mut paths: Vec<_> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && matches!(p.extension().and_then(|e| e.to_str()), Some("musicxml" | "xml"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CorpusError::EmptyCorpus(dir.display().to_string()));
    }
    use rayon::prelude::*;
    paths.par_iter().map(|p| load_musicxml(p)).collect()
}

struct Pending {
    event: Event,
    tie_open: bool,
}

#[derive(Default)]
struct PartReader {
    divisions: Option<i64>,
    key: Option<KeySignature>,
    voice: Option<String>,
    events: Vec<Pending>,
}

impl PartReader {
    fn attributes(&mut self, node: Node) -> Result<(), CorpusError> {
        if let Some(d) = child(node, "divisions") {
            let value: i64 = text_of(d)?
                .parse()
                .map_err(|_| malformed(d, "divisions must be a positive integer"))?;
            if value <= 0 {
                return Err(malformed(d, "divisions must be a positive integer"));
            }
            self.divisions = Some(value);
        }
        if self.key.is_none() {
            if let Some(k) = child(node, "key") {
                if let Some(f) = child(k, "fifths") {
                    let fifths: i8 =
                        text_of(f)?.parse().map_err(|_| malformed(f, "fifths must be an integer"))?;
                    let mode = match child(k, "mode").and_then(|m| m.text()).map(str::trim) {
                        Some("minor") => Mode::Minor,
                        _ => Mode::Major,
                    };
                    self.key = Some(KeySignature { fifths, mode });
                }
            }
        }
        Ok(())
    }

    fn note(&mut self, node: Node) -> Result<(), CorpusError> {
        if child(node, "grace").is_some() || child(node, "cue").is_some() {
            return Ok(());
        }
        let voice = child(node, "voice")
            .and_then(|v| v.text())
            .map(|v| v.trim().to_string())
            .unwrap_or_else(|| "1".to_string());
        match &self.voice {
            None => self.voice = Some(voice),
            Some(first) if *first != voice => return Ok(()),
            Some(_) => {}
        }

        let pitch = if child(node, "rest").is_some() {
            PitchToken::Rest
        } else if let Some(p) = child(node, "pitch") {
            PitchToken::Note(read_pitch(p)?)
        } else {
            // unpitched percussion carries no melodic information
            return Ok(());
        };

        let (tie_start, tie_stop) = ties(node);
        let is_chord = child(node, "chord").is_some();

        if is_chord {
            if let Some(last) = self.events.last_mut() {
                if let (Some(new), Some(old)) = (pitch.midi(), last.event.pitch.midi()) {
                    if new > old {
                        last.event.pitch = pitch;
                        last.tie_open = tie_start;
                    }
                }
                return Ok(());
            }
        }

        let duration_node = match child(node, "duration") {
            Some(d) => d,
            None => return Ok(()),
        };
        let ticks: i64 = text_of(duration_node)?
            .parse()
            .map_err(|_| malformed(duration_node, "duration must be an integer"))?;
        if ticks <= 0 {
            return Ok(());
        }
        let divisions = self.divisions.unwrap_or(1);
        let length = Ratio::new(ticks, divisions);

        if tie_stop {
            if let Some(last) = self.events.last_mut() {
                if last.tie_open && last.event.pitch == pitch {
                    let merged = last.event.duration.ratio() + length;
                    last.event.duration = DurationToken::new(merged)?;
                    last.tie_open = tie_start;
                    return Ok(());
                }
            }
        }
        self.events.push(Pending {
            event: Event::new(pitch, DurationToken::new(length)?),
            tie_open: tie_start,
        });
        Ok(())
    }
}

fn read_pitch(node: Node) -> Result<Note, CorpusError> {
    let step_node = child(node, "step").ok_or_else(|| malformed(node, "pitch without <step>"))?;
    let step = text_of(step_node)?
        .chars()
        .next()
        .and_then(Step::from_letter)
        .ok_or_else(|| malformed(step_node, "step must be A-G"))?;
    let alter = match child(node, "alter") {
        Some(a) => {
            let v: f64 = text_of(a)?.parse().map_err(|_| malformed(a, "alter must be numeric"))?;
            let v = v.round();
            if !(-2.0..=2.0).contains(&v) {
                return Err(malformed(a, "alter outside -2..=2"));
            }
            v as i8
        }
        None => 0,
    };
    let octave_node =
        child(node, "octave").ok_or_else(|| malformed(node, "pitch without <octave>"))?;
    let octave: i8 =
        text_of(octave_node)?.parse().map_err(|_| malformed(octave_node, "octave must be an integer"))?;
    Ok(Note::new(step, alter, octave))
}

/// `<tie>` carries the sounding tie; `<notations><tied>` is the visual mark
/// and is consulted only when no `<tie>` is present.
fn ties(node: Node) -> (bool, bool) {
    let mut start = false;
    let mut stop = false;
    let mut seen = false;
    for t in node.children().filter(|n| n.has_tag_name("tie")) {
        seen = true;
        match t.attribute("type") {
            Some("start") => start = true,
            Some("stop") => stop = true,
            _ => {}
        }
    }
    if !seen {
        if let Some(notations) = child(node, "notations") {
            for t in notations.children().filter(|n| n.has_tag_name("tied")) {
                match t.attribute("type") {
                    Some("start") => start = true,
                    Some("stop") => stop = true,
                    _ => {}
                }
            }
        }
    }
    (start, stop)
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|n| n.has_tag_name(name))
}

fn text_of<'a>(node: Node<'a, '_>) -> Result<&'a str, CorpusError> {
    node.text().map(str::trim).ok_or_else(|| malformed(node, "element is empty"))
}

fn malformed(node: Node, message: &str) -> CorpusError {
    let pos = node.document().text_pos_at(node.range().start);
    CorpusError::Xml {
        line: pos.row,
        column: pos.col,
        message: format!("<{}>: {}", node.tag_name().name(), message),
    }
}
