//! Comparison-pattern ingestion: row parsing, corpus aggregation, archive extraction.
//!
//! The input is a set of CSV block files, one header line each, with one
//! record pair per line: two record ids, nine agreement scores and a match
//! label. Tokens are split on `,` and stripped of surrounding whitespace and
//! double quotes. A configurable token (default `?`) marks a missing score.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::table::{PartitionedTable, Row, RowId};

pub const DEFAULT_MISSING_TOKEN: &str = "?";
pub const DEFAULT_GLOB: &str = "block_*.csv*";

/// The nine agreement-score columns, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    Fn1,
    Fn2,
    Ln1,
    Ln2,
    Gender,
    Bd,
    Bm,
    By,
    Plz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    /// Fractional string similarity in `[0, 1]`.
    Name,
    /// Exactly `0` or `1`.
    Binary,
}

impl Feature {
    pub const ALL: [Feature; 9] = [
        Feature::Fn1,
        Feature::Fn2,
        Feature::Ln1,
        Feature::Ln2,
        Feature::Gender,
        Feature::Bd,
        Feature::Bm,
        Feature::By,
        Feature::Plz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Fn1 => "fn1",
            Feature::Fn2 => "fn2",
            Feature::Ln1 => "ln1",
            Feature::Ln2 => "ln2",
            Feature::Gender => "gender",
            Feature::Bd => "bg",
            Feature::Bm => "bm",
            Feature::By => "by",
            Feature::Plz => "plz",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn kind(self) -> ScoreKind {
        match self {
            Feature::Fn1 | Feature::Fn2 | Feature::Ln1 | Feature::Ln2 => ScoreKind::Name,
            _ => ScoreKind::Binary,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One candidate record pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonVector {
    pub id_1: u64,
    pub id_2: u64,
    /// Indexed by [`Feature::index`].
    pub scores: [Option<f64>; 9],
    /// `None` for unlabeled pairs (e.g. freshly generated candidates).
    pub is_match: Option<bool>,
}

impl ComparisonVector {
    pub fn score(&self, f: Feature) -> Option<f64> {
        self.scores[f.index()]
    }

    pub fn present_count(&self, features: &[Feature]) -> usize {
        features.iter().filter(|f| self.score(**f).is_some()).count()
    }

    /// Checks the range and id invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id_1 == self.id_2 {
            return Err(format!("id_1 and id_2 are both {}", self.id_1));
        }
        for f in Feature::ALL {
            if let Some(v) = self.score(f) {
                let ok = match f.kind() {
                    ScoreKind::Name => (0.0..=1.0).contains(&v),
                    ScoreKind::Binary => v == 0.0 || v == 1.0,
                };
                if !ok {
                    return Err(match f.kind() {
                        ScoreKind::Name => format!("{f} score {v} outside [0, 1]"),
                        ScoreKind::Binary => format!("{f} score {v} is not 0 or 1"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attribute {
    RowId,
    Id1,
    Id2,
    Score(Feature),
    IsMatch,
}

impl Attribute {
    pub fn canonical_name(self) -> &'static str {
        match self {
            Attribute::RowId => "row_id",
            Attribute::Id1 => "id_1",
            Attribute::Id2 => "id_2",
            Attribute::Score(f) => f.name(),
            Attribute::IsMatch => "is_match",
        }
    }
}

/// Header-name to attribute mapping.
///
/// The default mapping accepts both the short attribute names (`fn1`, `bg`, ...)
/// and the `cmp_*` names used by the published block files. Extra aliases can be
/// added with [`Schema::with_alias`].
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    aliases: BTreeMap<String, Attribute>,
}

impl Default for Schema {
    fn default() -> Self {
        let mut s = Schema {
            aliases: BTreeMap::new(),
        };
        for a in [Attribute::RowId, Attribute::Id1, Attribute::Id2, Attribute::IsMatch] {
            s.aliases.insert(a.canonical_name().to_string(), a);
        }
        for f in Feature::ALL {
            s.aliases.insert(f.name().to_string(), Attribute::Score(f));
        }
        let published = [
            ("cmp_fname_c1", Feature::Fn1),
            ("cmp_fname_c2", Feature::Fn2),
            ("cmp_lname_c1", Feature::Ln1),
            ("cmp_lname_c2", Feature::Ln2),
            ("cmp_sex", Feature::Gender),
            ("cmp_bd", Feature::Bd),
            ("cmp_bm", Feature::Bm),
            ("cmp_by", Feature::By),
            ("cmp_plz", Feature::Plz),
        ];
        for (name, f) in published {
            s.aliases.insert(name.to_string(), Attribute::Score(f));
        }
        s
    }
}

impl Schema {
    /// Maps `header` (case-insensitive) to the attribute named `canonical`.
    pub fn with_alias(mut self, header: &str, canonical: &str) -> Result<Self> {
        let attr = *self.aliases.get(canonical).ok_or_else(|| {
            Error::Schema(format!("unknown attribute `{canonical}` in column mapping"))
        })?;
        self.aliases.insert(header.trim().to_ascii_lowercase(), attr);
        Ok(self)
    }

    /// Parses `header=attribute,header=attribute` mapping text.
    pub fn with_mapping(mut self, spec: &str) -> Result<Self> {
        for pair in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (h, a) = pair
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("bad column mapping `{pair}`")))?;
            self = self.with_alias(h, a.trim())?;
        }
        Ok(self)
    }

    pub fn resolve(&self, header: &str) -> Result<Layout> {
        let mut columns = Vec::new();
        for token in split_tokens(header) {
            let name = token.to_ascii_lowercase();
            let attr = *self
                .aliases
                .get(&name)
                .ok_or_else(|| Error::Schema(format!("unknown column `{token}`")))?;
            if columns.contains(&attr) {
                return Err(Error::Schema(format!(
                    "attribute `{}` appears twice in header",
                    attr.canonical_name()
                )));
            }
            columns.push(attr);
        }
        let mut required = vec![Attribute::Id1, Attribute::Id2];
        required.extend(Feature::ALL.map(Attribute::Score));
        for a in required {
            if !columns.contains(&a) {
                return Err(Error::Schema(format!(
                    "header lacks attribute `{}`",
                    a.canonical_name()
                )));
            }
        }
        let fingerprint = fingerprint(&columns);
        Ok(Layout {
            columns,
            fingerprint,
        })
    }
}

fn fingerprint(columns: &[Attribute]) -> String {
    let joined: Vec<&str> = columns.iter().map(|a| a.canonical_name()).collect();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in joined.join(",").bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Column positions resolved from one file header.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    columns: Vec<Attribute>,
    fingerprint: String,
}

/// A row-level failure before file/line context is attached.
#[derive(Debug, Clone, PartialEq)]
pub enum RowFault {
    Parse(String),
    Validation(String),
}

impl RowFault {
    pub fn at(self, file: &Path, line: usize) -> Error {
        match self {
            RowFault::Parse(msg) => Error::Parse {
                file: file.to_path_buf(),
                line,
                msg,
            },
            RowFault::Validation(msg) => Error::Validation {
                file: file.to_path_buf(),
                line,
                msg,
            },
        }
    }
}

fn split_tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(',').map(strip_token)
}

/// Removes surrounding whitespace and double quotes.
pub fn strip_token(token: &str) -> &str {
    token.trim_matches(|c: char| c.is_whitespace() || c == '"')
}

fn parse_label(token: &str) -> std::result::Result<bool, RowFault> {
    match token.to_ascii_lowercase().as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(RowFault::Parse(format!("unparseable label `{token}`"))),
    }
}

impl Layout {
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn columns(&self) -> &[Attribute] {
        &self.columns
    }

    pub fn has_row_id(&self) -> bool {
        self.columns.contains(&Attribute::RowId)
    }

    pub fn has_label(&self) -> bool {
        self.columns.contains(&Attribute::IsMatch)
    }

    /// Parses one data line. Returns the explicit row id when the layout has one.
    pub fn parse_row(
        &self,
        line: &str,
        missing_token: &str,
    ) -> std::result::Result<(Option<RowId>, ComparisonVector), RowFault> {
        let tokens: Vec<&str> = split_tokens(line).collect();
        if tokens.len() != self.columns.len() {
            return Err(RowFault::Parse(format!(
                "expected {} fields, found {}",
                self.columns.len(),
                tokens.len()
            )));
        }
        let mut cv = ComparisonVector {
            id_1: 0,
            id_2: 0,
            scores: [None; 9],
            is_match: None,
        };
        let mut row_id = None;
        let int = |tok: &str, what: &str| {
            tok.parse::<u64>()
                .map_err(|_| RowFault::Parse(format!("bad {what} `{tok}`")))
        };
        for (attr, tok) in self.columns.iter().zip(tokens) {
            match attr {
                Attribute::RowId => row_id = Some(RowId(int(tok, "row_id")?)),
                Attribute::Id1 => cv.id_1 = int(tok, "id_1")?,
                Attribute::Id2 => cv.id_2 = int(tok, "id_2")?,
                Attribute::IsMatch => cv.is_match = Some(parse_label(tok)?),
                Attribute::Score(f) => {
                    if tok != missing_token && !tok.is_empty() {
                        let v: f64 = tok
                            .parse()
                            .map_err(|_| RowFault::Parse(format!("bad {f} score `{tok}`")))?;
                        cv.scores[f.index()] = Some(v);
                    }
                }
            }
        }
        cv.validate().map_err(RowFault::Validation)?;
        Ok((row_id, cv))
    }
}

/// Parses a single line with the canonical header layout
/// (`id_1,id_2,fn1,fn2,ln1,ln2,gender,bg,bm,by,plz,is_match`).
pub fn parse_row(line: &str, missing_token: &str) -> std::result::Result<ComparisonVector, RowFault> {
    static LAYOUT: std::sync::OnceLock<Layout> = std::sync::OnceLock::new();
    let layout = LAYOUT.get_or_init(|| {
        Schema::default()
            .resolve(&canonical_header(false, true))
            .expect("canonical header resolves")
    });
    layout.parse_row(line, missing_token).map(|(_, cv)| cv)
}

pub fn canonical_header(with_row_id: bool, with_label: bool) -> String {
    let mut cols: Vec<&str> = Vec::with_capacity(13);
    if with_row_id {
        cols.push("row_id");
    }
    cols.extend(["id_1", "id_2"]);
    cols.extend(Feature::ALL.map(Feature::name));
    if with_label {
        cols.push("is_match");
    }
    cols.join(",")
}

/// Serializes a vector in canonical column order. Scores use the shortest
/// representation that parses back to the same value.
pub fn format_row(
    row_id: Option<RowId>,
    cv: &ComparisonVector,
    missing_token: &str,
    with_label: bool,
) -> String {
    let mut out = String::with_capacity(64);
    if let Some(id) = row_id {
        out.push_str(&id.to_string());
        out.push(',');
    }
    out.push_str(&format!("{},{}", cv.id_1, cv.id_2));
    for f in Feature::ALL {
        out.push(',');
        match cv.score(f) {
            Some(v) => out.push_str(&v.to_string()),
            None => out.push_str(missing_token),
        }
    }
    if with_label {
        out.push(',');
        out.push_str(match cv.is_match {
            Some(true) => "TRUE",
            Some(false) => "FALSE",
            None => missing_token,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub schema: Schema,
    pub missing_token: String,
    pub partitions: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            schema: Schema::default(),
            missing_token: DEFAULT_MISSING_TOKEN.to_string(),
            partitions: crate::table::default_parallelism(),
        }
    }
}

/// What was read, file by file.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub files: Vec<PathBuf>,
    pub row_counts: Vec<usize>,
    pub total_rows: usize,
    pub header_fingerprint: String,
}

impl CorpusManifest {
    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.push("files", self.files.len());
        for (i, (f, n)) in self.files.iter().zip(&self.row_counts).enumerate() {
            let name = f.file_name().map_or_else(|| f.display().to_string(), |n| n.to_string_lossy().into_owned());
            doc.push(format!("file.{i}.name"), name);
            doc.push(format!("file.{i}.rows"), n);
        }
        doc.push("total_rows", self.total_rows)
            .push("header_fingerprint", &self.header_fingerprint);
        doc
    }
}

/// Reads a file as UTF-8 text, transparently gunzipping `.gz` files.
pub fn read_text(path: &Path) -> Result<String> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    let gz = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    let read = if gz {
        flate2::read::MultiGzDecoder::new(file).read_to_end(&mut bytes)
    } else {
        io::BufReader::new(file).read_to_end(&mut bytes)
    };
    read.map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| {
        let at = e.utf8_error().valid_up_to();
        let line = 1 + e.as_bytes()[..at].iter().filter(|&&b| b == b'\n').count();
        Error::Parse {
            file: path.to_path_buf(),
            line,
            msg: "input is not valid UTF-8".into(),
        }
    })
}

/// One parsed block file.
#[derive(Debug, Clone)]
pub struct ParsedFile {
    pub path: PathBuf,
    pub layout: Layout,
    pub rows: Vec<(Option<RowId>, ComparisonVector)>,
}

pub fn parse_file(path: &Path, schema: &Schema, missing_token: &str) -> Result<ParsedFile> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: missing header line", path.display())))?;
    let layout = schema
        .resolve(header)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let rows = lines
        .map(|(i, l)| layout.parse_row(l, missing_token).map_err(|f| f.at(path, i + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParsedFile {
        path: path.to_path_buf(),
        layout,
        rows,
    })
}

/// Files in `dir` whose names match `pattern`, in lexicographic name order.
pub fn matching_files(dir: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let pat = glob::Pattern::new(pattern)
        .map_err(|e| Error::InvalidArgument(format!("bad file pattern `{pattern}`: {e}")))?;
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let is_file = entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_file();
        if is_file && pat.matches(&name.to_string_lossy()) {
            files.push(entry.path());
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if files.is_empty() {
        return Err(Error::NotFound(format!(
            "no files matching `{pattern}` in {}",
            dir.display()
        )));
    }
    Ok(files)
}

fn read_corpus(
    dir: &Path,
    pattern: &str,
    opts: &IngestOptions,
) -> Result<(Vec<Row<ComparisonVector>>, CorpusManifest)> {
    let files = matching_files(dir, pattern)?;
    let parsed = files
        .par_iter()
        .map(|p| parse_file(p, &opts.schema, &opts.missing_token))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let first = &parsed[0];
    for other in &parsed[1..] {
        if other.layout != first.layout {
            return Err(Error::Schema(format!(
                "header of {} differs from header of {}",
                other.path.display(),
                first.path.display()
            )));
        }
    }

    let explicit_ids = first.layout.has_row_id();
    let row_counts: Vec<usize> = parsed.iter().map(|p| p.rows.len()).collect();
    let total: usize = row_counts.iter().sum();
    let header_fingerprint = first.layout.fingerprint.clone();
    let mut rows = Vec::with_capacity(total);
    let mut seen = HashSet::new();
    for file in parsed {
        for (id, cv) in file.rows {
            let id = match id {
                Some(id) if explicit_ids => {
                    if !seen.insert(id) {
                        return Err(Error::InvalidInput(format!(
                            "{}: duplicate row_id {id}",
                            file.path.display()
                        )));
                    }
                    id
                }
                _ => RowId(rows.len() as u64),
            };
            rows.push(Row::new(id, cv));
        }
    }
    let manifest = CorpusManifest {
        files,
        row_counts,
        total_rows: total,
        header_fingerprint,
    };
    Ok((rows, manifest))
}

/// Reads every matching file and concatenates them into one table. RowIds are
/// assigned in read order unless the files carry a `row_id` column.
pub fn load_corpus(
    dir: &Path,
    pattern: &str,
    opts: &IngestOptions,
) -> Result<(PartitionedTable<ComparisonVector>, CorpusManifest)> {
    let (rows, manifest) = read_corpus(dir, pattern, opts)?;
    Ok((PartitionedTable::partition(rows, opts.partitions)?, manifest))
}

/// Like [`load_corpus`], but the returned table re-reads the files on every
/// pass until it is cached. The manifest comes from an initial scan.
pub fn open_corpus(
    dir: &Path,
    pattern: &str,
    opts: &IngestOptions,
) -> Result<(PartitionedTable<ComparisonVector>, CorpusManifest)> {
    let (_, manifest) = read_corpus(dir, pattern, opts)?;
    let (dir, pattern, o) = (dir.to_path_buf(), pattern.to_string(), opts.clone());
    let table = PartitionedTable::deferred(opts.partitions, move || {
        read_corpus(&dir, &pattern, &o).map(|(rows, _)| rows)
    })?;
    Ok((table, manifest))
}

/// Writes a table as canonical CSV with a leading `row_id` column.
pub fn write_table(
    path: &Path,
    table: &PartitionedTable<ComparisonVector>,
    missing_token: &str,
) -> Result<()> {
    let rows = table.collect()?;
    let with_label = rows.iter().any(|r| r.value.is_match.is_some());
    let mut out = canonical_header(true, with_label);
    out.push('\n');
    for r in &rows {
        out.push_str(&format_row(Some(r.id), &r.value, missing_token, with_label));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a single CSV file (e.g. one written by [`write_table`]) as a table.
pub fn read_table(path: &Path, opts: &IngestOptions) -> Result<PartitionedTable<ComparisonVector>> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::NotFound(path.display().to_string()))?
        .to_string_lossy()
        .into_owned();
    let pattern = glob::Pattern::escape(&name);
    Ok(load_corpus(dir, &pattern, opts)?.0)
}

fn archive_err(path: &Path, msg: impl fmt::Display) -> Error {
    Error::Archive {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    }
}

/// Extracts a zip or gzip archive under `dest` and returns the written file
/// paths in archive order. The container type is detected from magic bytes.
pub fn extract_archive(archive: &Path, dest: &Path) -> Result<Vec<PathBuf>> {
    let mut magic = [0u8; 4];
    let n = File::open(archive)
        .and_then(|mut f| f.read(&mut magic))
        .map_err(|e| Error::io(archive, e))?;
    std::fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    if n >= 2 && magic[..2] == [0x1f, 0x8b] {
        extract_gzip(archive, dest)
    } else if n == 4 && magic[..2] == *b"PK" {
        extract_zip(archive, dest)
    } else {
        Err(archive_err(archive, "not a zip or gzip archive"))
    }
}

fn extract_gzip(archive: &Path, dest: &Path) -> Result<Vec<PathBuf>> {
    let stem = archive
        .file_stem()
        .ok_or_else(|| archive_err(archive, "cannot derive output name"))?;
    let out_path = dest.join(stem);
    let file = File::open(archive).map_err(|e| Error::io(archive, e))?;
    let mut decoder = flate2::read::MultiGzDecoder::new(file);
    let mut bytes = Vec::new();
    decoder
        .read_to_end(&mut bytes)
        .map_err(|e| archive_err(archive, e))?;
    std::fs::write(&out_path, bytes).map_err(|e| Error::io(&out_path, e))?;
    Ok(vec![out_path])
}

fn extract_zip(archive: &Path, dest: &Path) -> Result<Vec<PathBuf>> {
    let file = File::open(archive).map_err(|e| Error::io(archive, e))?;
    let mut zip = zip::ZipArchive::new(file).map_err(|e| archive_err(archive, e))?;
    let mut written = Vec::new();
    for i in 0..zip.len() {
        let mut entry = zip.by_index(i).map_err(|e| archive_err(archive, e))?;
        let rel = entry
            .enclosed_name()
            .ok_or_else(|| archive_err(archive, format!("unsafe member path `{}`", entry.name())))?;
        let out_path = dest.join(rel);
        if entry.is_dir() {
            std::fs::create_dir_all(&out_path).map_err(|e| Error::io(&out_path, e))?;
            continue;
        }
        if let Some(parent) = out_path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut bytes = Vec::with_capacity(entry.size() as usize);
        entry
            .read_to_end(&mut bytes)
            .map_err(|e| archive_err(archive, e))?;
        std::fs::write(&out_path, bytes).map_err(|e| Error::io(&out_path, e))?;
        written.push(out_path);
    }
    Ok(written)
}

/// Extracts `archive`, then keeps extracting any nested zip/gzip members
/// (the published corpus ships as a zip of per-block zips), deleting each
/// nested archive once unpacked. Returns the non-archive files.
pub fn extract_nested(archive: &Path, dest: &Path) -> Result<Vec<PathBuf>> {
    let mut pending = extract_archive(archive, dest)?;
    let mut out = Vec::new();
    while let Some(path) = pending.pop() {
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase());
        if matches!(ext.as_deref(), Some("zip") | Some("gz")) {
            let parent = path.parent().unwrap_or(dest).to_path_buf();
            pending.extend(extract_archive(&path, &parent)?);
            std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        } else {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PUBLISHED_HEADER: &str = "\"id_1\",\"id_2\",\"cmp_fname_c1\",\"cmp_fname_c2\",\"cmp_lname_c1\",\"cmp_lname_c2\",\"cmp_sex\",\"cmp_bd\",\"cmp_bm\",\"cmp_by\",\"cmp_plz\",\"is_match\"";

    #[test]
    fn parses_published_row() {
        let cv = parse_row("37291,53113,1,?,1,?,1,1,1,1,1,TRUE", "?").unwrap();
        assert_eq!((cv.id_1, cv.id_2), (37291, 53113));
        assert_eq!(cv.score(Feature::Fn1), Some(1.0));
        assert_eq!(cv.score(Feature::Fn2), None);
        assert_eq!(cv.score(Feature::Ln2), None);
        assert_eq!(cv.score(Feature::Plz), Some(1.0));
        assert_eq!(cv.is_match, Some(true));
    }

    #[test]
    fn published_header_resolves_to_same_layout() {
        let a = Schema::default().resolve(PUBLISHED_HEADER).unwrap();
        let b = Schema::default().resolve(&canonical_header(false, true)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn strips_quotes_and_whitespace() {
        assert_eq!(strip_token(" \"0\" "), "0");
        let cv = parse_row(" \"1\" , \"2\" ,\" 0.5\",?,1,?,1,1,1,1,\"0\", false ", "?").unwrap();
        assert_eq!(cv.score(Feature::Fn1), Some(0.5));
        assert_eq!(cv.score(Feature::Plz), Some(0.0));
        assert_eq!(cv.is_match, Some(false));
    }

    #[test]
    fn wrong_field_count() {
        let err = parse_row("1,2,1,?,1,?,1,1,1,1,1,TRUE,extra", "?").unwrap_err();
        assert!(matches!(err, RowFault::Parse(_)));
    }

    #[test]
    fn out_of_range_scores() {
        assert!(matches!(
            parse_row("1,2,1.5,?,1,?,1,1,1,1,1,TRUE", "?"),
            Err(RowFault::Validation(_))
        ));
        assert!(matches!(
            parse_row("1,2,1,?,1,?,0.5,1,1,1,1,TRUE", "?"),
            Err(RowFault::Validation(_))
        ));
        assert!(matches!(
            parse_row("5,5,1,?,1,?,1,1,1,1,1,TRUE", "?"),
            Err(RowFault::Validation(_))
        ));
    }

    #[test]
    fn bad_label() {
        assert!(matches!(
            parse_row("1,2,1,?,1,?,1,1,1,1,1,maybe", "?"),
            Err(RowFault::Parse(_))
        ));
        assert_eq!(parse_row("1,2,1,?,1,?,1,1,1,1,1,True", "?").unwrap().is_match, Some(true));
    }

    #[test]
    fn custom_missing_token() {
        let cv = parse_row("1,2,NA,NA,1,NA,1,1,1,1,1,FALSE", "NA").unwrap();
        assert_eq!(cv.present_count(&Feature::ALL), 6);
    }

    #[test]
    fn custom_alias() {
        let schema = Schema::default().with_mapping("sex=gender, day = bg").unwrap();
        let layout = schema
            .resolve("id_1,id_2,fn1,fn2,ln1,ln2,sex,day,bm,by,plz")
            .unwrap();
        assert!(!layout.has_label());
        assert!(Schema::default().with_alias("x", "nope").is_err());
        assert!(Schema::default().resolve("id_1,id_2,fn1").is_err());
    }

    #[test]
    fn format_then_parse() {
        let cv = parse_row("1,2,0.833333333333333,?,1,?,1,0,1,1,?,FALSE", "?").unwrap();
        let line = format_row(None, &cv, "?", true);
        assert_eq!(line, "1,2,0.833333333333333,?,1,?,1,0,1,1,?,FALSE");
        assert_eq!(parse_row(&line, "?").unwrap(), cv);
    }
}
