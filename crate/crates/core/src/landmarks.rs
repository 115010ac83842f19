//! Landmark frames, expression labels and dataset manifests.
//!
//! Two frame formats are understood: the classic points format
//!
//! ```text
//! version: 1
//! n_points: 68
//! {
//! 123.5 201.25
//! ...
//! }
//! ```
//!
//! and a bare CSV with one `x,y` pair per line (optional `x,y` header).
//! A manifest is a CSV with header `id,subject,label,neutral_path,apex_path`;
//! an optional first line `# landmarks=<L>` overrides the default count of 68.

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Landmark count of the standard 68-point layout.
pub const DEFAULT_LANDMARK_COUNT: usize = 68;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// One face's landmark coordinates for a single image, in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    points: Vec<Point>,
}

impl LandmarkFrame {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::NoPoints);
        }
        if let Some(index) = points
            .iter()
            .position(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(Error::NonFinite { index });
        }
        Ok(LandmarkFrame { points })
    }

    pub fn from_xy(coords: &[(f64, f64)]) -> Result<Self> {
        Self::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Shift every point by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        LandmarkFrame {
            points: self
                .points
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }

    pub fn to_pts_string(&self) -> String {
        let mut out = String::new();
        out.push_str("version: 1\n");
        let _ = writeln!(out, "n_points: {}", self.points.len());
        out.push_str("{\n");
        for p in &self.points {
            let _ = writeln!(out, "{} {}", p.x, p.y);
        }
        out.push_str("}\n");
        out
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("x,y\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{}", p.x, p.y);
        }
        out
    }
}

/// The seven expression classes. Integer codes follow alphabetical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExpressionLabel {
    Anger,
    Contempt,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprise,
}

impl ExpressionLabel {
    pub const COUNT: usize = 7;

    pub const ALL: [ExpressionLabel; 7] = [
        ExpressionLabel::Anger,
        ExpressionLabel::Contempt,
        ExpressionLabel::Disgust,
        ExpressionLabel::Fear,
        ExpressionLabel::Happiness,
        ExpressionLabel::Sadness,
        ExpressionLabel::Surprise,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ExpressionLabel::Anger => "anger",
            ExpressionLabel::Contempt => "contempt",
            ExpressionLabel::Disgust => "disgust",
            ExpressionLabel::Fear => "fear",
            ExpressionLabel::Happiness => "happiness",
            ExpressionLabel::Sadness => "sadness",
            ExpressionLabel::Surprise => "surprise",
        }
    }
}

impl fmt::Display for ExpressionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExpressionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::UnknownLabel {
                label: s.to_string(),
            })
    }
}

/// A labeled neutral/apex frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceExample {
    pub id: String,
    pub subject: String,
    pub label: ExpressionLabel,
    pub neutral: LandmarkFrame,
    pub apex: LandmarkFrame,
}

impl SequenceExample {
    pub fn new(
        id: impl Into<String>,
        subject: impl Into<String>,
        label: ExpressionLabel,
        neutral: LandmarkFrame,
        apex: LandmarkFrame,
    ) -> Result<Self> {
        if neutral.len() != apex.len() {
            return Err(Error::LandmarkCountMismatch {
                expected: neutral.len(),
                found: apex.len(),
            });
        }
        Ok(SequenceExample {
            id: id.into(),
            subject: subject.into(),
            label,
            neutral,
            apex,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub subject: String,
    pub label: ExpressionLabel,
    pub neutral_path: PathBuf,
    pub apex_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub landmark_count: usize,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Render as manifest text. Paths are written as given.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = String::new();
        if self.landmark_count != DEFAULT_LANDMARK_COUNT {
            let _ = writeln!(out, "# landmarks={}", self.landmark_count);
        }
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(["id", "subject", "label", "neutral_path", "apex_path"])?;
        for e in &self.entries {
            writer.write_record([
                e.id.as_str(),
                e.subject.as_str(),
                e.label.name(),
                &e.neutral_path.to_string_lossy(),
                &e.apex_path.to_string_lossy(),
            ])?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Config(e.to_string()))?;
        out.push_str(&String::from_utf8_lossy(&bytes));
        Ok(out)
    }
}

/// A loaded dataset: examples in manifest order plus the shared landmark count.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub landmark_count: usize,
    pub examples: Vec<SequenceExample>,
}

impl Dataset {
    pub fn new(landmark_count: usize, examples: Vec<SequenceExample>) -> Result<Self> {
        let mut seen = HashSet::new();
        for ex in &examples {
            if ex.neutral.len() != landmark_count {
                return Err(Error::LandmarkCountMismatch {
                    expected: landmark_count,
                    found: ex.neutral.len(),
                });
            }
            if ex.apex.len() != landmark_count {
                return Err(Error::LandmarkCountMismatch {
                    expected: landmark_count,
                    found: ex.apex.len(),
                });
            }
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::DuplicateId(ex.id.clone()));
            }
        }
        Ok(Dataset {
            landmark_count,
            examples,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<ExpressionLabel> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Example count per class, indexed by label code.
    pub fn class_counts(&self) -> [usize; ExpressionLabel::COUNT] {
        class_counts(self.examples.iter().map(|e| e.label))
    }
}

pub fn class_counts(
    labels: impl IntoIterator<Item = ExpressionLabel>,
) -> [usize; ExpressionLabel::COUNT] {
    let mut counts = [0; ExpressionLabel::COUNT];
    for l in labels {
        counts[l.code()] += 1;
    }
    counts
}

fn parse_number(context: &str, line: usize, token: &str) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(context, line, format!("non-numeric coordinate {token:?}")))
}

fn decode_utf8<'a>(context: &str, bytes: &'a [u8]) -> Result<&'a str> {
    std::str::from_utf8(bytes).map_err(|e| Error::parse(context, 0, format!("invalid UTF-8: {e}")))
}

/// Parse the points format (`version:` / `n_points:` header, braces, one `x y` per line).
pub fn parse_pts_file(bytes: &[u8]) -> Result<LandmarkFrame> {
    const CTX: &str = "points file";
    let text = decode_utf8(CTX, bytes)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (n, first) = lines
        .next()
        .ok_or_else(|| Error::parse(CTX, 1, "missing `version:` header"))?;
    if !first.starts_with("version:") {
        return Err(Error::parse(CTX, n, "expected `version:` header"));
    }

    let (n, second) = lines
        .next()
        .ok_or_else(|| Error::parse(CTX, n + 1, "missing `n_points:` header"))?;
    let declared = second
        .strip_prefix("n_points:")
        .ok_or_else(|| Error::parse(CTX, n, "expected `n_points:` header"))?
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(CTX, n, "malformed point count"))?;

    let (n, open) = lines
        .next()
        .ok_or_else(|| Error::parse(CTX, n + 1, "missing `{`"))?;
    if open != "{" {
        return Err(Error::parse(CTX, n, "expected `{`"));
    }

    let mut points = Vec::with_capacity(declared);
    let mut closed = false;
    let mut last = n;
    for (n, line) in lines.by_ref() {
        last = n;
        if line == "}" {
            closed = true;
            break;
        }
        let mut fields = line.split_whitespace();
        let (Some(x), Some(y), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(CTX, n, "expected two coordinates"));
        };
        points.push(Point::new(
            parse_number(CTX, n, x)?,
            parse_number(CTX, n, y)?,
        ));
    }
    if !closed {
        return Err(Error::parse(CTX, last + 1, "missing `}`"));
    }
    if let Some((n, _)) = lines.next() {
        return Err(Error::parse(CTX, n, "unexpected content after `}`"));
    }
    if points.len() != declared {
        return Err(Error::PointCountMismatch {
            declared,
            found: points.len(),
        });
    }
    LandmarkFrame::new(points)
}

/// Parse a bare `x,y`-per-line CSV frame.
pub fn parse_csv_frame(bytes: &[u8]) -> Result<LandmarkFrame> {
    const CTX: &str = "csv frame";
    let text = decode_utf8(CTX, bytes)?;
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 2 {
            return Err(Error::parse(
                CTX,
                n,
                format!("expected 2 columns, found {}", cells.len()),
            ));
        }
        if points.is_empty() && cells[0] == "x" && cells[1] == "y" {
            continue;
        }
        points.push(Point::new(
            parse_number(CTX, n, cells[0])?,
            parse_number(CTX, n, cells[1])?,
        ));
    }
    LandmarkFrame::new(points)
}

/// Read a frame from disk, choosing the parser by extension (`.pts` or `.csv`),
/// falling back to sniffing the `version:` header.
pub fn read_frame(path: &Path) -> Result<LandmarkFrame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let is_pts = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pts") => true,
        Some(ext) if ext.eq_ignore_ascii_case("csv") => false,
        _ => bytes.trim_ascii_start().starts_with(b"version"),
    };
    let parsed = if is_pts {
        parse_pts_file(&bytes)
    } else {
        parse_csv_frame(&bytes)
    };
    parsed.map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            context: path.display().to_string(),
            line,
            message,
        },
        other => Error::Parse {
            context: path.display().to_string(),
            line: 0,
            message: other.to_string(),
        },
    })
}

/// Parse manifest text. `base` is the directory relative paths resolve against.
pub fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest> {
    const CTX: &str = "manifest";
    let mut landmark_count = DEFAULT_LANDMARK_COUNT;
    let mut body = text;
    if let Some(first) = text.lines().next() {
        if let Some(rest) = first.trim().strip_prefix('#') {
            if let Some(value) = rest.trim().strip_prefix("landmarks=") {
                landmark_count = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(CTX, 1, "malformed `landmarks=` directive"))?;
                if landmark_count < 2 {
                    return Err(Error::parse(CTX, 1, "at least 2 landmarks required"));
                }
            }
            body = text.split_once('\n').map_or("", |(_, rest)| rest);
        }
    }
    let line_offset = if body.len() == text.len() { 0 } else { 1 };

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    let expected = ["id", "subject", "label", "neutral_path", "apex_path"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::parse(
            CTX,
            1 + line_offset,
            format!("expected header `{}`", expected.join(",")),
        ));
    }

    let mut entries = Vec::new();
    let mut ids = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize) + line_offset;
        if record.len() != 5 {
            return Err(Error::parse(CTX, line, "expected 5 columns"));
        }
        let id = record[0].to_string();
        if !ids.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let label = record[2].parse::<ExpressionLabel>()?;
        entries.push(ManifestEntry {
            id,
            subject: record[1].to_string(),
            label,
            neutral_path: base.join(&record[3]),
            apex_path: base.join(&record[4]),
        });
    }
    Ok(DatasetManifest {
        landmark_count,
        entries,
    })
}

/// Load a manifest and every frame it references. A manifest without
/// entries is an error.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let manifest = parse_manifest(&text, base)?;
    if manifest.entries.is_empty() {
        return Err(Error::NoExamples);
    }

    let mut examples = Vec::with_capacity(manifest.entries.len());
    for entry in manifest.entries {
        let neutral = read_frame(&entry.neutral_path)?;
        let apex = read_frame(&entry.apex_path)?;
        examples.push(SequenceExample::new(
            entry.id,
            entry.subject,
            entry.label,
            neutral,
            apex,
        )?);
    }
    let dataset = Dataset::new(manifest.landmark_count, examples)?;

    let counts = dataset.class_counts();
    log::info!(
        "loaded {} examples from {}: {}",
        dataset.len(),
        path.display(),
        ExpressionLabel::ALL
            .iter()
            .map(|l| format!("{}={}", l, counts[l.code()]))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts_text(n_declared: usize, points: &[(f64, f64)]) -> String {
        let mut s = format!("version: 1\nn_points: {n_declared}\n{{\n");
        for (x, y) in points {
            s.push_str(&format!("{x} {y}\n"));
        }
        s.push_str("}\n");
        s
    }

    fn grid(n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|i| (i as f64 * 1.5, 200.0 - i as f64)).collect()
    }

    #[test]
    fn pts_with_68_points() {
        let frame = parse_pts_file(pts_text(68, &grid(68)).as_bytes()).unwrap();
        assert_eq!(frame.len(), 68);
        assert_eq!(frame.points()[3], Point::new(4.5, 197.0));
    }

    #[test]
    fn pts_count_mismatch() {
        let err = parse_pts_file(pts_text(68, &grid(67)).as_bytes()).unwrap_err();
        assert!(err.to_string().contains("point count mismatch"), "{err}");
    }

    #[test]
    fn pts_all_zero_is_valid() {
        let frame = parse_pts_file(pts_text(68, &[(0.0, 0.0); 68]).as_bytes()).unwrap();
        assert!(frame.points().iter().all(|p| p.x == 0.0 && p.y == 0.0));
    }

    #[test]
    fn pts_errors_name_lines() {
        let text = "version: 1\nn_points: 2\n{\n1 2\n3 abc\n}\n";
        match parse_pts_file(text.as_bytes()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 5),
            e => panic!("unexpected {e}"),
        }
        let text = "n_points: 2\n{\n1 2\n}\n";
        assert!(matches!(
            parse_pts_file(text.as_bytes()).unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
        let text = "version: 1\nn_points: 1\n{\n1 2\n";
        assert!(parse_pts_file(text.as_bytes()).is_err());
    }

    #[test]
    fn pts_accepts_crlf_and_ibug_spacing() {
        let text = "version: 1\r\nn_points:  2\r\n{\r\n1.5 2\r\n3 4\r\n}";
        let frame = parse_pts_file(text.as_bytes()).unwrap();
        assert_eq!(frame.points()[0], Point::new(1.5, 2.0));
    }

    #[test]
    fn csv_identity_data() {
        let text: String = (0..68).map(|i| format!("{i},{i}\n")).collect();
        let frame = parse_csv_frame(text.as_bytes()).unwrap();
        assert_eq!(frame.len(), 68);
        for (i, p) in frame.points().iter().enumerate() {
            assert_eq!(*p, Point::new(i as f64, i as f64));
        }
        let with_header = format!("x,y\n{text}");
        assert_eq!(parse_csv_frame(with_header.as_bytes()).unwrap(), frame);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv_frame(b"").unwrap_err(), Error::NoPoints));
        assert_eq!(parse_csv_frame(b"").unwrap_err().to_string(), "no points");
        assert!(matches!(
            parse_csv_frame(b"1,2\n3,4,5\n").unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        assert!(matches!(
            parse_csv_frame(b"1,2\n3,q\n").unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            parse_csv_frame(b"1,2\nNaN,4\n").unwrap_err(),
            Error::NonFinite { index: 1 }
        ));
    }

    #[test]
    fn label_codes_are_alphabetical_and_bijective() {
        let mut names: Vec<_> = ExpressionLabel::ALL.iter().map(|l| l.name()).collect();
        let sorted = {
            let mut s = names.clone();
            s.sort();
            s
        };
        assert_eq!(names, sorted);
        for (code, label) in ExpressionLabel::ALL.iter().enumerate() {
            assert_eq!(label.code(), code);
            assert_eq!(ExpressionLabel::from_code(code), Some(*label));
            assert_eq!(label.name().parse::<ExpressionLabel>().unwrap(), *label);
        }
        names.dedup();
        assert_eq!(names.len(), 7);
        assert_eq!(ExpressionLabel::from_code(7), None);
    }

    #[test]
    fn unknown_label_lists_valid_ones() {
        let err = "joy".parse::<ExpressionLabel>().unwrap_err().to_string();
        for l in ExpressionLabel::ALL {
            assert!(err.contains(l.name()), "{err}");
        }
    }

    #[test]
    fn manifest_parsing() {
        let text = "# landmarks=3\nid,subject,label,neutral_path,apex_path\na,s1,fear,n.csv,a.csv\nb,s2,anger,/abs/n.pts,a.pts\n";
        let m = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(m.landmark_count, 3);
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].neutral_path, PathBuf::from("/data/n.csv"));
        assert_eq!(m.entries[1].neutral_path, PathBuf::from("/abs/n.pts"));
        assert_eq!(m.entries[1].label, ExpressionLabel::Anger);

        let dup = "id,subject,label,neutral_path,apex_path\na,s,fear,n,a\na,s,fear,n,a\n";
        assert!(matches!(
            parse_manifest(dup, Path::new(".")).unwrap_err(),
            Error::DuplicateId(_)
        ));
        let joy = "id,subject,label,neutral_path,apex_path\na,s,joy,n,a\n";
        assert!(matches!(
            parse_manifest(joy, Path::new(".")).unwrap_err(),
            Error::UnknownLabel { .. }
        ));
        let bad_header = "id,label,neutral_path,apex_path\n";
        assert!(parse_manifest(bad_header, Path::new(".")).is_err());
    }

    #[test]
    fn manifest_text_round_trip() {
        let m = DatasetManifest {
            landmark_count: 5,
            entries: vec![ManifestEntry {
                id: "x1".into(),
                subject: "S005".into(),
                label: ExpressionLabel::Surprise,
                neutral_path: "frames/x1_n.pts".into(),
                apex_path: "frames/x1_a.pts".into(),
            }],
        };
        let text = m.to_csv_string().unwrap();
        assert_eq!(parse_manifest(&text, Path::new("")).unwrap(), m);
    }

    #[test]
    fn example_requires_matching_counts() {
        let a = LandmarkFrame::from_xy(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let b = LandmarkFrame::from_xy(&[(0.0, 0.0)]).unwrap();
        assert!(SequenceExample::new("i", "s", ExpressionLabel::Fear, a, b).is_err());
    }
}
