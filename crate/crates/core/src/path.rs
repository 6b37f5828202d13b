//! Addressable paths into a memory.
//!
//! Textual form: every segment is prefixed by `/`; inside a segment `~` is
//! written `~0` and `/` is written `~1`. A segment spelled as a canonical
//! decimal (`0`, `7`, `42`, no leading zeros) addresses a list element when
//! the container is a list and a map key otherwise.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("path syntax error at byte {offset}: {message}")]
pub struct PathSyntaxError {
    pub offset: usize,
    pub message: &'static str,
}

/// One path segment. Stored as text; its index reading is derived.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment(String);

impl Segment {
    /// A map-key segment. Panics on an empty key.
    pub fn key(key: impl Into<String>) -> Self {
        let key = key.into();
        assert!(!key.is_empty(), "path segments are non-empty");
        Segment(key)
    }

    pub fn index(index: usize) -> Self {
        Segment(index.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The list index this segment denotes, if it is a canonical decimal.
    pub fn as_index(&self) -> Option<usize> {
        let s = self.0.as_str();
        let canonical = s == "0" || (!s.starts_with('0') && s.bytes().all(|b| b.is_ascii_digit()));
        if canonical {
            s.parse().ok()
        } else {
            None
        }
    }
}

impl From<usize> for Segment {
    fn from(i: usize) -> Self {
        Segment::index(i)
    }
}

impl From<&str> for Segment {
    fn from(s: &str) -> Self {
        Segment::key(s)
    }
}

/// A non-empty sequence of segments from the memory root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(Vec<Segment>);

impl Path {
    /// Builds a path from segments. Returns `None` for an empty sequence.
    pub fn new(segments: Vec<Segment>) -> Option<Self> {
        if segments.is_empty() {
            None
        } else {
            Some(Path(segments))
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Paths always have at least one segment.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> &Segment {
        self.0.last().expect("paths are non-empty")
    }

    pub fn parent_segments(&self) -> &[Segment] {
        &self.0[..self.0.len() - 1]
    }

    pub fn child(&self, segment: impl Into<Segment>) -> Path {
        let mut segments = self.0.clone();
        segments.push(segment.into());
        Path(segments)
    }

    pub fn parse(text: &str) -> Result<Self, PathSyntaxError> {
        parse_path(text)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for seg in &self.0 {
            f.write_str("/")?;
            f.write_str(&escape_segment(seg.as_str()))?;
        }
        Ok(())
    }
}

impl FromStr for Path {
    type Err = PathSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_path(s)
    }
}

/// `path!["a", 3, "b"]` builds a [`Path`] from keys and indices.
#[macro_export]
macro_rules! path {
    ($($seg:expr),+ $(,)?) => {
        $crate::path::Path::new(vec![$($crate::path::Segment::from($seg)),+])
            .expect("non-empty")
    };
}

pub(crate) fn escape_segment(raw: &str) -> String {
    if !raw.contains(['~', '/']) {
        return raw.to_string();
    }
    raw.replace('~', "~0").replace('/', "~1")
}

pub fn format_path(path: &Path) -> String {
    path.to_string()
}

pub fn parse_path(text: &str) -> Result<Path, PathSyntaxError> {
    let bytes = text.as_bytes();
    if bytes.is_empty() {
        return Err(PathSyntaxError {
            offset: 0,
            message: "empty path",
        });
    }
    if bytes[0] != b'/' {
        return Err(PathSyntaxError {
            offset: 0,
            message: "path must start with '/'",
        });
    }
    let mut segments = Vec::new();
    let mut current = String::new();
    let mut seg_start = 1;
    let mut chars = text.char_indices().skip(1).peekable();
    while let Some((offset, c)) = chars.next() {
        match c {
            '/' => {
                if current.is_empty() {
                    return Err(PathSyntaxError {
                        offset: seg_start,
                        message: "empty segment",
                    });
                }
                segments.push(Segment(std::mem::take(&mut current)));
                seg_start = offset + 1;
            }
            '~' => match chars.next() {
                Some((_, '0')) => current.push('~'),
                Some((_, '1')) => current.push('/'),
                _ => {
                    return Err(PathSyntaxError {
                        offset,
                        message: "'~' must be followed by '0' or '1'",
                    })
                }
            },
            c => current.push(c),
        }
    }
    if current.is_empty() {
        return Err(PathSyntaxError {
            offset: seg_start,
            message: "empty segment",
        });
    }
    segments.push(Segment(current));
    Ok(Path(segments))
}
