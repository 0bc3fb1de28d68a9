//! Online signature trajectories: the plain-text sample format, corpus
//! directory layout, and the associated invariants.
//!
//! A signature file is one sample per row with a header naming the columns:
//!
//! ```text
//! #cols: t x y p
//! #meta: user=u007 label=genuine session=1
//! 0 0.1 0.2 0.5
//! 0.01 0.11 0.19 0.55
//! ```
//!
//! The `p` (pressure) column is optional; pressure 0 marks pen-up. Files
//! without a `t` column get uniform timestamps from a declared sample rate.
//! Corpora live under `corpus/<user_id>/{g|f}_<n>.sig`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Label {
    Genuine,
    SkilledForgery,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Genuine => "genuine",
            Label::SkilledForgery => "skilled_forgery",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "genuine" => Some(Label::Genuine),
            "skilled_forgery" => Some(Label::SkilledForgery),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub pressure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureTrajectory {
    pub samples: Vec<Sample>,
    pub user_id: String,
    pub label: Label,
    pub session: u8,
}

impl SignatureTrajectory {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(Error::Validation(format!(
                "signature needs >= 2 samples, has {}",
                self.samples.len()
            )));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::Validation(format!("sample {i}: non-finite value")));
            }
            if let Some(p) = s.pressure
                && !(p.is_finite() && p >= 0.0)
            {
                return Err(Error::Validation(format!("sample {i}: bad pressure {p}")));
            }
            if i > 0 && s.t <= self.samples[i - 1].t {
                return Err(Error::Validation(format!(
                    "timestamps not strictly increasing at sample {i}"
                )));
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t) - self.samples.first().map_or(0.0, |s| s.t)
    }

    pub fn has_pressure(&self) -> bool {
        self.samples.iter().any(|s| s.pressure.is_some())
    }
}

/// Maps file columns onto sample fields. Column indices are 0-based; when
/// `t` is absent, `sample_rate` supplies uniform timestamps.
#[derive(Debug, Clone, Copy)]
pub struct ColumnSpec {
    pub t: Option<usize>,
    pub x: usize,
    pub y: usize,
    pub pressure: Option<usize>,
    pub sample_rate: Option<f64>,
}

impl ColumnSpec {
    /// `t x y`, the format written by [`write_signature_file`].
    pub fn txy() -> Self {
        ColumnSpec {
            t: Some(0),
            x: 1,
            y: 2,
            pressure: None,
            sample_rate: None,
        }
    }

    /// Parses a spec like `"t x y p"` or `"x y"` (column order as listed).
    pub fn parse(spec: &str, sample_rate: Option<f64>) -> Result<Self> {
        let mut t = None;
        let mut x = None;
        let mut y = None;
        let mut pressure = None;
        for (i, name) in spec.split_whitespace().enumerate() {
            match name {
                "t" => t = Some(i),
                "x" => x = Some(i),
                "y" => y = Some(i),
                "p" | "pressure" => pressure = Some(i),
                "_" => {} // ignored column
                other => {
                    return Err(Error::Config(format!("unknown column name '{other}'")));
                }
            }
        }
        let (Some(x), Some(y)) = (x, y) else {
            return Err(Error::Config("column spec must name x and y".into()));
        };
        if t.is_none() && sample_rate.is_none() {
            return Err(Error::Config(
                "column spec without t needs a declared sample rate".into(),
            ));
        }
        if let Some(r) = sample_rate
            && !(r.is_finite() && r > 0.0)
        {
            return Err(Error::Config(format!("sample rate must be > 0, got {r}")));
        }
        Ok(ColumnSpec {
            t,
            x,
            y,
            pressure,
            sample_rate,
        })
    }
}

#[derive(Debug, Clone)]
struct Meta {
    user_id: String,
    label: Label,
    session: u8,
}

impl Default for Meta {
    fn default() -> Self {
        Meta {
            user_id: "unknown".into(),
            label: Label::Genuine,
            session: 1,
        }
    }
}

fn parse_meta_line(content: &str, line_no: usize) -> Result<Meta> {
    let mut meta = Meta::default();
    for field in content.split_whitespace() {
        let Some((key, value)) = field.split_once('=') else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("bad meta field '{field}'"),
            });
        };
        match key {
            "user" => meta.user_id = value.to_string(),
            "label" => {
                meta.label = Label::parse(value).ok_or_else(|| Error::Parse {
                    line: line_no,
                    msg: format!("unknown label '{value}'"),
                })?;
            }
            "session" => {
                meta.session = value.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad session '{value}'"),
                })?;
            }
            _ => {} // forward-compatible: ignore unknown keys
        }
    }
    Ok(meta)
}

/// Parses a signature file. A `#cols:` header in the file takes precedence
/// over the caller's column spec; `#meta:` supplies identity metadata which
/// corpus loaders may override from the directory layout.
pub fn parse_signature_file(bytes: &[u8], spec: &ColumnSpec) -> Result<SignatureTrajectory> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: e.valid_up_to() + 1,
        msg: "not valid UTF-8".into(),
    })?;

    let mut spec = *spec;
    let mut meta = Meta::default();
    let mut samples = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#cols:") {
            spec = ColumnSpec::parse(rest.trim(), spec.sample_rate)?;
            continue;
        }
        if let Some(rest) = line.strip_prefix("#meta:") {
            meta = parse_meta_line(rest.trim(), line_no)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .collect();
        let get = |col: usize, what: &str| -> Result<f64> {
            let raw = fields.get(col).ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!(
                    "missing column {col} ({what}); row has {} fields",
                    fields.len()
                ),
            })?;
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("'{raw}' is not a number ({what})"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite {what}"),
                });
            }
            Ok(v)
        };
        let x = get(spec.x, "x")?;
        let y = get(spec.y, "y")?;
        let t = match spec.t {
            Some(col) => get(col, "t")?,
            None => {
                let rate = spec.sample_rate.ok_or_else(|| {
                    Error::Config("no t column and no declared sample rate".into())
                })?;
                samples.len() as f64 / rate
            }
        };
        let pressure = match spec.pressure {
            Some(col) => Some(get(col, "pressure")?),
            None => None,
        };
        samples.push(Sample { t, x, y, pressure });
    }

    let traj = SignatureTrajectory {
        samples,
        user_id: meta.user_id,
        label: meta.label,
        session: meta.session,
    };
    traj.validate()?;
    Ok(traj)
}

/// Serializes a trajectory into the canonical file format. Numbers use the
/// shortest representation that round-trips, so parse(write(s)) == s.
pub fn write_signature_file(traj: &SignatureTrajectory) -> Result<Vec<u8>> {
    traj.validate()?;
    let with_pressure = traj.has_pressure();
    let mut out = String::new();
    if with_pressure {
        out.push_str("#cols: t x y p\n");
    } else {
        out.push_str("#cols: t x y\n");
    }
    let _ = writeln!(
        out,
        "#meta: user={} label={} session={}",
        traj.user_id,
        traj.label.as_str(),
        traj.session
    );
    for s in &traj.samples {
        if with_pressure {
            let _ = writeln!(out, "{} {} {} {}", s.t, s.x, s.y, s.pressure.unwrap_or(0.0));
        } else {
            let _ = writeln!(out, "{} {} {}", s.t, s.x, s.y);
        }
    }
    Ok(out.into_bytes())
}

#[derive(Debug, Clone, Default)]
pub struct UserSignatures {
    pub genuine: Vec<SignatureTrajectory>,
    pub forgeries: Vec<SignatureTrajectory>,
}

/// A set of users with their genuine signatures and skilled forgeries.
/// BTreeMap keeps every traversal deterministic.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub users: BTreeMap<String, UserSignatures>,
}

impl Corpus {
    pub fn validate(&self) -> Result<()> {
        for (user_id, set) in &self.users {
            for traj in set.genuine.iter().chain(&set.forgeries) {
                traj.validate()?;
                if &traj.user_id != user_id {
                    return Err(Error::Validation(format!(
                        "trajectory user '{}' filed under '{}'",
                        traj.user_id, user_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_signatures(&self) -> usize {
        self.users
            .values()
            .map(|u| u.genuine.len() + u.forgeries.len())
            .sum()
    }
}

/// Writes `corpus/<user>/{g|f}_<n>.sig`.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    corpus.validate()?;
    for (user_id, set) in &corpus.users {
        let user_dir = dir.join(user_id);
        std::fs::create_dir_all(&user_dir).map_err(|e| Error::io(&user_dir, e))?;
        for (kind, list) in [("g", &set.genuine), ("f", &set.forgeries)] {
            for (n, traj) in list.iter().enumerate() {
                let path = user_dir.join(format!("{kind}_{:02}.sig", n + 1));
                std::fs::write(&path, write_signature_file(traj)?)
                    .map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    Ok(())
}

/// Loads a corpus directory written by [`save_corpus`] (or assembled by
/// `ingest`). User id and label come from the directory layout.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut user_dirs: Vec<_> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.path())
        .collect();
    user_dirs.sort();
    for user_dir in user_dirs {
        let user_id = user_dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Validation(format!("bad user directory {user_dir:?}")))?
            .to_string();
        let mut files: Vec<_> = std::fs::read_dir(&user_dir)
            .map_err(|e| Error::io(&user_dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "sig"))
            .collect();
        files.sort();
        let mut set = UserSignatures::default();
        for path in files {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let mut traj = parse_signature_file(&bytes, &ColumnSpec::txy())?;
            traj.user_id = user_id.clone();
            if name.starts_with("g_") {
                traj.label = Label::Genuine;
                set.genuine.push(traj);
            } else if name.starts_with("f_") {
                traj.label = Label::SkilledForgery;
                set.forgeries.push(traj);
            } else {
                return Err(Error::Validation(format!(
                    "signature file name '{name}' must start with g_ or f_"
                )));
            }
        }
        if !set.genuine.is_empty() || !set.forgeries.is_empty() {
            corpus.users.insert(user_id, set);
        }
    }
    corpus.validate()?;
    Ok(corpus)
}
