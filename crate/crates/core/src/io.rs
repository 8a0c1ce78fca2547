//! JSON readers and writers for space, map and modulus files.
//!
//! Space files are `{"labels": [...], "matrix": [[...], ...]}`. Map files are
//! `{"source": S, "target": S, "assignment": [...]}` where each `S` is either
//! an inline space object or a path, resolved relative to the map file.
//! Modulus files use the tagged shapes of [`ModulusFile`](crate::moduli::ModulusFile).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moduli::Modulus;
use crate::quasisym::{MapError, PointMap};
use crate::spaces::{Space, SpaceError, SpaceFile};

/// Line and column (both 1-based) of a spot in a text file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

fn at(location: &Option<Location>) -> String {
    location.map(|l| format!(":{l}")).unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{}:{}: {message}", path.display(), location)]
    Parse { path: PathBuf, location: Location, message: String },
    #[error("{}{}: {field}{source}", path.display(), at(location))]
    Space { path: PathBuf, field: String, location: Option<Location>, source: SpaceError },
    #[error("{}: {source}", path.display())]
    Map { path: PathBuf, source: MapError },
}

/// A space given inline or by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceRef {
    Path(PathBuf),
    Inline(SpaceFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub source: SpaceRef,
    pub target: SpaceRef,
    pub assignment: Vec<usize>,
}

impl MapFile {
    /// Both spaces inline.
    pub fn inline(f: &PointMap) -> Self {
        Self {
            source: SpaceRef::Inline(f.source().to_file()),
            target: SpaceRef::Inline(f.target().to_file()),
            assignment: f.assignment().to_vec(),
        }
    }
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read { path: path.to_owned(), source })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|e| IoError::Parse {
        path: path.to_owned(),
        location: Location { line: e.line(), column: e.column() },
        message: e.to_string(),
    })
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| IoError::Write { path: path.to_owned(), source })
}

/// Position of the first character of matrix cell `(row, col)` in a space file.
///
/// Scans the array following the `"matrix"` key, counting rows by nested
/// brackets and columns by commas. Returns `None` if the text is not shaped
/// that way.
pub fn locate_cell(text: &str, row: usize, col: usize) -> Option<Location> {
    let key = find_key(text, "matrix")?;
    let mut depth = 0usize;
    let (mut r, mut c) = (0usize, 0usize);
    let mut expecting = false;
    let (mut line, mut column) = line_column(text, key);
    for ch in text[key..].chars() {
        match ch {
            '[' => {
                depth += 1;
                if depth == 2 {
                    c = 0;
                    expecting = true;
                }
            }
            ']' => {
                if depth == 2 {
                    r += 1;
                }
                if depth == 1 {
                    return None;
                }
                depth -= 1;
            }
            ',' if depth == 2 => {
                c += 1;
                expecting = true;
            }
            ch if depth == 2 && expecting && !ch.is_whitespace() => {
                if r == row && c == col {
                    return Some(Location { line, column });
                }
                expecting = false;
            }
            _ => {}
        }
        if ch == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    None
}

/// Byte offset just past `"name"` and its colon.
fn find_key(text: &str, name: &str) -> Option<usize> {
    let quoted = format!("\"{name}\"");
    let mut from = 0;
    while let Some(pos) = text[from..].find(&quoted) {
        let after = from + pos + quoted.len();
        let rest = &text[after..];
        let trimmed = rest.trim_start();
        if let Some(stripped) = trimmed.strip_prefix(':') {
            return Some(text.len() - stripped.len());
        }
        from = after;
    }
    None
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

/// Parses space JSON text. `path` is used only for diagnostics.
pub fn parse_space(path: &Path, text: &str) -> Result<Space, IoError> {
    let file: SpaceFile = parse(path, text)?;
    Space::try_from(file).map_err(|source| {
        let location = source.cell().and_then(|(i, j)| locate_cell(text, i, j));
        IoError::Space { path: path.to_owned(), field: String::new(), location, source }
    })
}

pub fn read_space(path: &Path) -> Result<Space, IoError> {
    parse_space(path, &read_text(path)?)
}

pub fn write_space(path: &Path, space: &Space) -> Result<(), IoError> {
    write_json(path, &space.to_file())
}

pub fn read_modulus(path: &Path) -> Result<Modulus, IoError> {
    parse(path, &read_text(path)?)
}

pub fn write_modulus(path: &Path, eta: &Modulus) -> Result<(), IoError> {
    write_json(path, eta)
}

fn resolve(map_path: &Path, field: &str, space: SpaceRef) -> Result<Space, IoError> {
    match space {
        SpaceRef::Path(p) => {
            let full = match map_path.parent() {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            };
            read_space(&full)
        }
        SpaceRef::Inline(file) => Space::try_from(file).map_err(|source| IoError::Space {
            path: map_path.to_owned(),
            field: format!("{field}: "),
            location: None,
            source,
        }),
    }
}

pub fn read_map(path: &Path) -> Result<PointMap, IoError> {
    let file: MapFile = parse(path, &read_text(path)?)?;
    let source = resolve(path, "source", file.source)?;
    let target = resolve(path, "target", file.target)?;
    PointMap::new(source, target, file.assignment).map_err(|source| IoError::Map { path: path.to_owned(), source })
}

pub fn write_map(path: &Path, f: &PointMap) -> Result<(), IoError> {
    write_json(path, &MapFile::inline(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASYMMETRIC: &str = "{\n  \"labels\": [\"a\", \"b\"],\n  \"matrix\": [\n    [0, 1],\n    [2, 0]\n  ]\n}\n";

    #[test]
    fn cell_location_is_found() {
        assert_eq!(locate_cell(ASYMMETRIC, 0, 1), Some(Location { line: 4, column: 9 }));
        assert_eq!(locate_cell(ASYMMETRIC, 1, 0), Some(Location { line: 5, column: 6 }));
        assert_eq!(locate_cell(ASYMMETRIC, 2, 0), None);
        let flat = r#"{"matrix":[[0,3],[3,0]],"labels":["matrix","y"]}"#;
        assert_eq!(locate_cell(flat, 1, 1), Some(Location { line: 1, column: 21 }));
    }

    #[test]
    fn asymmetric_error_carries_file_context() {
        let err = parse_space(Path::new("bad.json"), ASYMMETRIC).unwrap_err();
        assert_eq!(err.to_string(), "bad.json:4:9: AsymmetricEntry(0,1)");
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_space(Path::new("x.json"), "{\"labels\": [}").unwrap_err();
        assert!(matches!(err, IoError::Parse { location: Location { line: 1, .. }, .. }));
    }

    #[test]
    fn map_file_accepts_inline_and_paths() {
        let dir = std::env::temp_dir().join(format!("metricforge-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let space = Space::unlabeled(vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.5, 2.0, 1.5, 0.0]).unwrap();
        write_space(&dir.join("x.json"), &space).unwrap();
        let map_json = format!(
            r#"{{"source": "x.json", "target": {}, "assignment": [2, 0, 1]}}"#,
            serde_json::to_string(&space.to_file()).unwrap()
        );
        fs::write(dir.join("map.json"), map_json).unwrap();
        let f = read_map(&dir.join("map.json")).unwrap();
        assert_eq!(f.source(), &space);
        assert_eq!(f.assignment(), &[2, 0, 1]);

        write_map(&dir.join("round.json"), &f).unwrap();
        assert_eq!(read_map(&dir.join("round.json")).unwrap(), f);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn modulus_files() {
        let dir = std::env::temp_dir().join(format!("metricforge-mod-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("eta.json");
        fs::write(&p, r#"{"family":"power","C":2,"alpha":0.5}"#).unwrap();
        assert_eq!(read_modulus(&p).unwrap().as_power(), Some((2.0, 0.5)));
        fs::write(&p, r#"{"family":"power","C":-2,"alpha":0.5}"#).unwrap();
        assert!(matches!(read_modulus(&p), Err(IoError::Parse { .. })));
        fs::remove_dir_all(&dir).unwrap();
    }
}
