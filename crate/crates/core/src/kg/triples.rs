use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// One `(subject, predicate, object)` fact. Fields are trimmed and non-empty.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Result<Self> {
        let (s, p, o) = (subject.trim(), predicate.trim(), object.trim());
        for (name, value) in [("subject", s), ("predicate", p), ("object", o)] {
            if value.is_empty() {
                return Err(Error::InvalidTriple(format!("empty {name}")));
            }
            if value.contains(['\t', '\n']) {
                return Err(Error::InvalidTriple(format!("{name} `{value}` contains a tab or newline")));
            }
        }
        Ok(Triple { subject: s.to_owned(), predicate: p.to_owned(), object: o.to_owned() })
    }
}

/// Input line formats. Only TSV exists today.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TripleFormat {
    /// `subject<TAB>predicate<TAB>object`, `#` comments and blank lines skipped.
    #[default]
    Tsv,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MalformedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    /// Lines that parsed into a triple, duplicates included.
    pub parsed: usize,
    pub duplicates: usize,
    pub skipped: usize,
    pub malformed: Vec<MalformedLine>,
}

/// A set of triples grouped by predicate. `(s, p, o)` membership is boolean.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    by_predicate: BTreeMap<String, BTreeSet<(String, String)>>,
    len: usize,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a triple, returning `false` if it was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        let added = self.by_predicate.entry(triple.predicate).or_default().insert((triple.subject, triple.object));
        if added {
            self.len += 1;
        }
        added
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.by_predicate.keys().map(String::as_str)
    }

    pub fn contains_predicate(&self, predicate: &str) -> bool {
        self.by_predicate.contains_key(predicate)
    }

    /// Distinct `(subject, object)` pairs of one predicate, sorted.
    pub fn pairs(&self, predicate: &str) -> Option<&BTreeSet<(String, String)>> {
        self.by_predicate.get(predicate)
    }

    pub fn triples(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.by_predicate
            .iter()
            .flat_map(|(p, pairs)| pairs.iter().map(move |(s, o)| (s.as_str(), p.as_str(), o.as_str())))
    }

    /// Writes every triple as TSV, lines sorted lexicographically.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut lines: Vec<String> = self.triples().map(|(s, p, o)| format!("{s}\t{p}\t{o}")).collect();
        lines.sort();
        for line in lines {
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

impl FromIterator<Triple> for KnowledgeGraph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut kg = KnowledgeGraph::new();
        for t in iter {
            kg.insert(t);
        }
        kg
    }
}

/// Reads triples from `reader`. Malformed lines are recorded and skipped;
/// invalid UTF-8 aborts with the offending byte offset.
pub fn parse_triples<R: BufRead>(mut reader: R, format: TripleFormat) -> Result<(KnowledgeGraph, ParseReport)> {
    let TripleFormat::Tsv = format;
    let mut kg = KnowledgeGraph::new();
    let mut report = ParseReport::default();
    let mut buf = Vec::new();
    let mut offset: u64 = 0;
    let mut line_no = 0;
    loop {
        buf.clear();
        let read = reader.read_until(b'\n', &mut buf)?;
        if read == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|e| Error::NonUtf8 { offset: offset + e.valid_up_to() as u64 })?;
        offset += read as u64;

        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() || line.starts_with('#') {
            report.skipped += 1;
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            report.malformed.push(MalformedLine {
                line: line_no,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
            continue;
        }
        match Triple::new(fields[0], fields[1], fields[2]) {
            Ok(t) => {
                report.parsed += 1;
                if !kg.insert(t) {
                    report.duplicates += 1;
                }
            }
            Err(e) => report.malformed.push(MalformedLine { line: line_no, reason: e.to_string() }),
        }
    }
    Ok((kg, report))
}
