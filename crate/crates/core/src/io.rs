//! On-disk formats: recordings, event lists, corpus manifests and model
//! parameters.
//!
//! A recording file is a header line `fs_hz=<num>,hand=<L|R>,units=<text>`,
//! an optional column line `t,ax,ay,az,gx,gy,gz`, and one CSV row per
//! sample. An events file is JSON lines: a format header followed by one
//! `{"kind": "bite" | "meal", "start_s": .., "end_s": ..}` record per event.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bites::BiteSet;
use crate::error::{Error, Result};
use crate::imu::{Handedness, ImuRecording, ImuSample, CHANNELS};
use crate::interval::{check_sorted_disjoint, Interval};
use crate::meals::MealIntervalSet;
use crate::net::{deserialize_params, serialize_params, ModelParams};
use crate::synth::{CorpusEntry, RecordingKind, SynthOutput};

/// Allowed deviation of a timestamp from its uniform grid position.
pub const TIMESTAMP_TOLERANCE_S: f64 = 1e-6;

pub const EVENTS_FORMAT: &str = "mealscope-events";
pub const EVENTS_VERSION: u32 = 1;

const COLUMNS: &str = "t,ax,ay,az,gx,gy,gz";

/// Writes through a sibling temp file and renames it into place, so readers
/// never see a partial file.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let file = File::create(&tmp).map_err(|e| Error::file(&tmp, e))?;
        let mut out = BufWriter::new(file);
        write(&mut out)?;
        let file = out.into_inner().map_err(|e| Error::file(&tmp, e.into_error()))?;
        file.sync_all().map_err(|e| Error::file(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::file(path, e))
}

fn hand_code(h: Handedness) -> char {
    match h {
        Handedness::Left => 'L',
        Handedness::Right => 'R',
    }
}

pub fn format_recording_header(rec: &ImuRecording) -> String {
    format!(
        "fs_hz={},hand={},units={}",
        rec.sample_rate_hz(),
        hand_code(rec.handedness()),
        rec.units()
    )
}

/// Parses a header line into `(fs_hz, hand, units)`. Units run to the end
/// of the line and may contain commas.
pub fn parse_recording_header(line: &str) -> Result<(f64, Handedness, String)> {
    let bad = || Error::BadHeader(line.to_string());
    let rest = line.trim_end().strip_prefix("fs_hz=").ok_or_else(bad)?;
    let (fs, rest) = rest.split_once(",hand=").ok_or_else(bad)?;
    let (hand, units) = rest.split_once(",units=").ok_or_else(bad)?;
    let fs: f64 = fs.trim().parse().map_err(|_| bad())?;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(bad());
    }
    let hand = match hand.trim() {
        "L" => Handedness::Left,
        "R" => Handedness::Right,
        _ => return Err(bad()),
    };
    Ok((fs, hand, units.to_string()))
}

pub fn write_recording_to<W: Write>(rec: &ImuRecording, out: &mut W) -> Result<()> {
    writeln!(out, "{}", format_recording_header(rec))?;
    writeln!(out, "{COLUMNS}")?;
    let fs = rec.sample_rate_hz();
    for (n, s) in rec.samples().iter().enumerate() {
        let v = s.to_array();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            n as f64 / fs,
            v[0],
            v[1],
            v[2],
            v[3],
            v[4],
            v[5]
        )?;
    }
    Ok(())
}

pub fn write_recording(path: &Path, rec: &ImuRecording) -> Result<()> {
    write_atomic(path, |out| write_recording_to(rec, out))
}

/// Reads a recording. Row numbers in errors count data rows from 1.
pub fn read_recording_from<R: BufRead>(input: R) -> Result<ImuRecording> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::BadHeader("empty file".into())),
    };
    let (fs, hand, units) = parse_recording_header(&header)?;
    let mut samples = Vec::new();
    let mut t0 = 0.0;
    let mut prev = f64::NEG_INFINITY;
    let mut row = 0;
    // Reordered rows should be reported as such, not as a gap.
    let mut non_uniform = None;
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (row == 0 && line == COLUMNS) {
            continue;
        }
        row += 1;
        let mut fields = [0.0f64; CHANNELS + 1];
        let mut count = 0;
        for field in line.split(',') {
            if count == fields.len() {
                return Err(Error::MalformedRow(row));
            }
            fields[count] = field.trim().parse().map_err(|_| Error::MalformedRow(row))?;
            count += 1;
        }
        if count != fields.len() {
            return Err(Error::MalformedRow(row));
        }
        let t = fields[0];
        if !t.is_finite() {
            return Err(Error::MalformedRow(row));
        }
        if t <= prev {
            return Err(Error::NonMonotoneTimestamps(row));
        }
        if row == 1 {
            t0 = t;
        }
        let expected = t0 + (row - 1) as f64 / fs;
        if (t - expected).abs() > TIMESTAMP_TOLERANCE_S && non_uniform.is_none() {
            non_uniform = Some(row);
        }
        prev = t;
        samples.push(ImuSample::from_array(std::array::from_fn(|c| fields[c + 1])));
    }
    if samples.is_empty() {
        return Err(Error::MalformedRow(1));
    }
    if let Some(row) = non_uniform {
        return Err(Error::NonUniformTimestamps(row));
    }
    ImuRecording::new(samples, fs, hand, units)
}

pub fn read_recording(path: &Path) -> Result<ImuRecording> {
    read_recording_from(open(path)?).map_err(|e| match e {
        Error::Io(source) => Error::file(path, source),
        other => other,
    })
}

/// One line of an events file. Detected bites carry only `start_s`;
/// annotated bites and meals carry both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Event {
    Bite {
        start_s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end_s: Option<f64>,
    },
    Meal {
        start_s: f64,
        end_s: f64,
    },
}

impl Event {
    pub fn start_s(&self) -> f64 {
        match *self {
            Event::Bite { start_s, .. } | Event::Meal { start_s, .. } => start_s,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            Event::Bite { start_s, end_s: None } if !start_s.is_finite() => Err(Error::NonFiniteTime(start_s)),
            Event::Bite { end_s: None, .. } => Ok(()),
            Event::Bite {
                start_s,
                end_s: Some(end_s),
            }
            | Event::Meal { start_s, end_s } => Interval::new(start_s, end_s).map(drop),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EventsHeader {
    format: String,
    version: u32,
}

/// A validated, time-sorted list of events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventList {
    events: Vec<Event>,
}

impl EventList {
    /// Sorts by start time (stable) and checks each event and that meals do
    /// not overlap.
    pub fn new(mut events: Vec<Event>) -> Result<Self> {
        for e in &events {
            e.check()?;
        }
        events.sort_by(|a, b| a.start_s().total_cmp(&b.start_s()));
        let list = Self { events };
        check_sorted_disjoint(&list.meals_raw(), false)?;
        Ok(list)
    }

    pub fn from_bites(bites: &BiteSet) -> Self {
        Self {
            events: bites
                .iter()
                .map(|t| Event::Bite {
                    start_s: t,
                    end_s: None,
                })
                .collect(),
        }
    }

    pub fn from_meals(meals: &MealIntervalSet) -> Self {
        Self {
            events: meals
                .iter()
                .map(|m| Event::Meal {
                    start_s: m.start_s,
                    end_s: m.end_s,
                })
                .collect(),
        }
    }

    /// Annotated bite intervals together with meal spans.
    pub fn from_annotations(bites: &[Interval], meals: &[Interval]) -> Result<Self> {
        let events = bites
            .iter()
            .map(|b| Event::Bite {
                start_s: b.start_s,
                end_s: Some(b.end_s),
            })
            .chain(meals.iter().map(|m| Event::Meal {
                start_s: m.start_s,
                end_s: m.end_s,
            }))
            .collect();
        Self::new(events)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Bite timestamps. Interval bites contribute their end time.
    pub fn bite_times(&self) -> BiteSet {
        let times = self.events.iter().filter_map(|e| match *e {
            Event::Bite { start_s, end_s } => Some(end_s.unwrap_or(start_s)),
            Event::Meal { .. } => None,
        });
        BiteSet::from_times(times).expect("event times are finite")
    }

    /// Annotated bite intervals; an error if any bite is a bare timestamp.
    pub fn bite_intervals(&self) -> Result<Vec<Interval>> {
        self.events
            .iter()
            .filter_map(|e| match *e {
                Event::Bite {
                    start_s,
                    end_s: Some(end_s),
                } => Some(Interval::new(start_s, end_s)),
                Event::Bite { start_s, end_s: None } => Some(Err(Error::InvalidInterval(start_s, start_s))),
                Event::Meal { .. } => None,
            })
            .collect()
    }

    fn meals_raw(&self) -> Vec<Interval> {
        self.events
            .iter()
            .filter_map(|e| match *e {
                Event::Meal { start_s, end_s } => Some(Interval { start_s, end_s }),
                Event::Bite { .. } => None,
            })
            .collect()
    }

    pub fn meals(&self) -> MealIntervalSet {
        MealIntervalSet::new(self.meals_raw()).expect("validated on construction")
    }
}

pub fn write_events_to<W: Write>(events: &EventList, out: &mut W) -> Result<()> {
    let header = EventsHeader {
        format: EVENTS_FORMAT.into(),
        version: EVENTS_VERSION,
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("plain struct"))?;
    for e in events.events() {
        writeln!(out, "{}", serde_json::to_string(e).expect("plain enum"))?;
    }
    Ok(())
}

pub fn write_events(path: &Path, events: &EventList) -> Result<()> {
    write_atomic(path, |out| write_events_to(events, out))
}

/// Reads an events file; records must already be sorted by start time.
pub fn read_events_from<R: BufRead>(input: R) -> Result<EventList> {
    let mut lines = input.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(Error::BadHeader("empty events file".into())),
    };
    let header: EventsHeader = serde_json::from_str(&header).map_err(|e| Error::BadHeader(e.to_string()))?;
    if header.format != EVENTS_FORMAT || header.version != EVENTS_VERSION {
        return Err(Error::BadHeader(format!("{} v{}", header.format, header.version)));
    }
    let mut events = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for (i, line) in lines {
        let line = line?;
        let number = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: number,
            reason: e.to_string(),
        })?;
        event.check().map_err(|e| Error::MalformedRecord {
            line: number,
            reason: e.to_string(),
        })?;
        if event.start_s() < prev {
            return Err(Error::UnsortedRecords(number));
        }
        prev = event.start_s();
        events.push(event);
    }
    EventList::new(events)
}

pub fn read_events(path: &Path) -> Result<EventList> {
    read_events_from(open(path)?).map_err(|e| match e {
        Error::Io(source) => Error::file(path, source),
        other => other,
    })
}

/// One recording of a leave-one-subject-out corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub subject: String,
    pub kind: RecordingKind,
    pub recording: PathBuf,
    pub events: PathBuf,
}

const MANIFEST_HEADER: &str = "subject,kind,recording,events";

fn kind_name(k: RecordingKind) -> &'static str {
    match k {
        RecordingKind::Meal => "meal",
        RecordingKind::Day => "day",
    }
}

/// Writes paths as given; relative paths are read back relative to the
/// manifest's directory.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    for e in entries {
        let fields = [
            e.subject.as_str(),
            &e.recording.to_string_lossy(),
            &e.events.to_string_lossy(),
        ];
        if fields.iter().any(|f| f.contains([',', '\n'])) {
            return Err(Error::InvalidConfig(format!(
                "manifest field contains a separator: {fields:?}"
            )));
        }
    }
    write_atomic(path, |out| {
        writeln!(out, "{MANIFEST_HEADER}")?;
        for e in entries {
            writeln!(
                out,
                "{},{},{},{}",
                e.subject,
                kind_name(e.kind),
                e.recording.display(),
                e.events.display()
            )?;
        }
        Ok(())
    })
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut lines = open(path)?.lines();
    let header = lines.next().transpose().map_err(|e| Error::file(path, e))?;
    if header.as_deref().map(str::trim) != Some(MANIFEST_HEADER) {
        return Err(Error::BadHeader(format!(
            "{}: expected `{MANIFEST_HEADER}`",
            path.display()
        )));
    }
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: &str| Error::MalformedRecord {
            line: i + 2,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [subject, kind, recording, events] = fields[..] else {
            return Err(malformed("expected 4 fields"));
        };
        let kind = match kind {
            "meal" => RecordingKind::Meal,
            "day" => RecordingKind::Day,
            _ => return Err(malformed("kind must be meal or day")),
        };
        if subject.is_empty() {
            return Err(malformed("empty subject"));
        }
        entries.push(ManifestEntry {
            subject: subject.to_string(),
            kind,
            recording: base.join(recording),
            events: base.join(events),
        });
    }
    Ok(entries)
}

/// Writes every corpus recording with its annotations under `dir` and a
/// `manifest.csv` listing them. Returns the manifest path.
pub fn write_corpus(dir: &Path, corpus: &[CorpusEntry]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let mut entries = Vec::with_capacity(corpus.len());
    for (i, c) in corpus.iter().enumerate() {
        let stem = format!("{}_{}_{i:03}", c.subject, kind_name(c.kind));
        let recording = PathBuf::from(format!("{stem}.csv"));
        let events = PathBuf::from(format!("{stem}.events.jsonl"));
        write_recording(&dir.join(&recording), &c.data.recording)?;
        write_events(
            &dir.join(&events),
            &EventList::from_annotations(&c.data.bites, &c.data.meals)?,
        )?;
        entries.push(ManifestEntry {
            subject: c.subject.clone(),
            kind: c.kind,
            recording,
            events,
        });
    }
    let manifest = dir.join("manifest.csv");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

/// Loads every recording listed in a manifest with its annotations. Meal
/// sessions must annotate bites as intervals. Bites on free-living days are
/// optional and kept only when every one is an interval.
pub fn load_corpus(manifest: &Path) -> Result<Vec<CorpusEntry>> {
    read_manifest(manifest)?
        .into_par_iter()
        .map(|m| {
            let recording = read_recording(&m.recording)?;
            let events = read_events(&m.events)?;
            let bites = match m.kind {
                RecordingKind::Meal => events.bite_intervals()?,
                RecordingKind::Day => events.bite_intervals().unwrap_or_default(),
            };
            Ok(CorpusEntry {
                subject: m.subject,
                kind: m.kind,
                data: SynthOutput {
                    recording,
                    bites,
                    meals: events.meals().intervals().to_vec(),
                },
            })
        })
        .collect()
}

pub fn write_params(path: &Path, params: &ModelParams<f32>) -> Result<()> {
    write_atomic(path, |out| serialize_params(params, out))
}

pub fn read_params(path: &Path) -> Result<ModelParams<f32>> {
    deserialize_params(open(path)?)
}
