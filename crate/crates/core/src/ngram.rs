//! n-gram count tables over unit sequences, character streams and word
//! tokens, plus the length-ratio rule for picking `n`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::corpus::{TokenRecord, UtteranceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlphabetKind {
    Unit,
    Character,
    Word,
}

impl AlphabetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AlphabetKind::Unit => "unit",
            AlphabetKind::Character => "character",
            AlphabetKind::Word => "word",
        }
    }
}

impl fmt::Display for AlphabetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlphabetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(AlphabetKind::Unit),
            "character" | "char" => Ok(AlphabetKind::Character),
            "word" => Ok(AlphabetKind::Word),
            other => Err(Error::InvalidArgument(format!("unknown kind {other:?}"))),
        }
    }
}

/// One n-gram. Unit grams order as numeric tuples, text grams by code point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gram {
    Units(Box<[u32]>),
    Text(Box<str>),
}

impl Gram {
    fn symbol_count(&self, kind: AlphabetKind) -> usize {
        match (self, kind) {
            (Gram::Units(u), _) => u.len(),
            (Gram::Text(s), AlphabetKind::Character) => s.chars().count(),
            (Gram::Text(_), _) => 1,
        }
    }

    /// Parses the CSV rendering produced by `Display`.
    pub fn parse(kind: AlphabetKind, s: &str) -> Result<Gram> {
        match kind {
            AlphabetKind::Unit => s
                .split('-')
                .map(|p| {
                    p.parse::<u32>()
                        .map_err(|_| Error::InvalidArgument(format!("bad unit n-gram {s:?}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(|v| Gram::Units(v.into())),
            _ => Ok(Gram::Text(s.into())),
        }
    }
}

impl fmt::Display for Gram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gram::Units(units) => {
                for (i, u) in units.iter().enumerate() {
                    if i > 0 {
                        f.write_str("-")?;
                    }
                    write!(f, "{u}")?;
                }
                Ok(())
            }
            Gram::Text(s) => f.write_str(s),
        }
    }
}

/// Mergeable map from n-gram to occurrence count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramTable {
    n: usize,
    kind: AlphabetKind,
    counts: HashMap<Gram, u64>,
    total: u64,
}

impl NgramTable {
    pub fn new(n: usize, kind: AlphabetKind) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be >= 1".into()));
        }
        if kind == AlphabetKind::Word && n != 1 {
            return Err(Error::InvalidArgument("word tables are unigram only".into()));
        }
        Ok(NgramTable {
            n,
            kind,
            counts: HashMap::new(),
            total: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> AlphabetKind {
        self.kind
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct n-grams.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, gram: &Gram) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Gram, u64)> {
        self.counts.iter().map(|(g, &c)| (g, c))
    }

    /// Adds `count` occurrences of `gram`. Zero counts are ignored.
    pub fn add(&mut self, gram: Gram, count: u64) -> Result<()> {
        let len = gram.symbol_count(self.kind);
        let kind_ok = matches!(
            (&gram, self.kind),
            (Gram::Units(_), AlphabetKind::Unit) | (Gram::Text(_), AlphabetKind::Character | AlphabetKind::Word)
        );
        if !kind_ok || len != self.n {
            return Err(Error::InvalidArgument(format!(
                "gram {gram} does not fit a {}-gram {} table",
                self.n, self.kind
            )));
        }
        if count > 0 {
            *self.counts.entry(gram).or_insert(0) += count;
            self.total += count;
        }
        Ok(())
    }

    /// Counts the windows of one unit sequence.
    pub fn add_unit_sequence(&mut self, units: &[u32]) -> Result<()> {
        if self.kind != AlphabetKind::Unit {
            return Err(Error::IncompatibleTables(format!(
                "cannot add unit windows to a {} table",
                self.kind
            )));
        }
        for w in units.windows(self.n) {
            *self.counts.entry(Gram::Units(w.into())).or_insert(0) += 1;
            self.total += 1;
        }
        Ok(())
    }

    fn check_compatible(&self, other: &NgramTable) -> Result<()> {
        if self.n != other.n || self.kind != other.kind {
            return Err(Error::IncompatibleTables(format!(
                "{}-gram {} vs {}-gram {}",
                self.n, self.kind, other.n, other.kind
            )));
        }
        Ok(())
    }

    pub fn merge_from(&mut self, other: &NgramTable) -> Result<()> {
        self.check_compatible(other)?;
        for (g, &c) in &other.counts {
            *self.counts.entry(g.clone()).or_insert(0) += c;
        }
        self.total += other.total;
        Ok(())
    }

    /// Entries by count descending, ties by n-gram ascending.
    pub fn sorted_entries(&self) -> Vec<(&Gram, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Writes the table as CSV: a `#n=..,kind=..,total=..` line, an
    /// `item,count` header, then rows in rank order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::io("<table csv>", e);
        let mut out = out;
        writeln!(out, "#n={},kind={},total={}", self.n, self.kind, self.total).map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::io("<table csv>", e.into());
        w.write_record(["item", "count"]).map_err(csv_err)?;
        for (g, c) in self.sorted_entries() {
            w.write_record([g.to_string(), c.to_string()]).map_err(csv_err)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv<R: BufRead>(mut input: R) -> Result<NgramTable> {
        let bad = |msg: String| Error::InvalidArgument(format!("table csv: {msg}"));
        let mut first = String::new();
        input
            .read_line(&mut first)
            .map_err(|e| Error::io("<table csv>", e))?;
        let meta = first
            .trim_end()
            .strip_prefix('#')
            .ok_or_else(|| bad("missing #n=..,kind=..,total=.. line".into()))?;
        let (mut n, mut kind, mut total) = (None, None, None);
        for field in meta.split(',') {
            match field.split_once('=') {
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("kind", v)) => kind = Some(v.parse::<AlphabetKind>()?),
                Some(("total", v)) => total = v.parse::<u64>().ok(),
                _ => return Err(bad(format!("unexpected header field {field:?}"))),
            }
        }
        let (n, kind, total) = match (n, kind, total) {
            (Some(n), Some(k), Some(t)) => (n, k, t),
            _ => return Err(bad("incomplete header".into())),
        };

        let mut table = NgramTable::new(n, kind)?;
        let mut rdr = csv::ReaderBuilder::new().from_reader(input);
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            if row.len() != 2 {
                return Err(bad(format!("row {} has {} fields", i + 1, row.len())));
            }
            let count: u64 = row[1]
                .parse()
                .map_err(|_| bad(format!("bad count {:?}", &row[1])))?;
            table.add(Gram::parse(kind, &row[0])?, count)?;
        }
        if table.total != total {
            return Err(bad(format!(
                "header total {total} but rows sum to {}",
                table.total
            )));
        }
        Ok(table)
    }
}

/// Pointwise sum of two compatible tables.
pub fn merge(a: &NgramTable, b: &NgramTable) -> Result<NgramTable> {
    let mut out = a.clone();
    out.merge_from(b)?;
    Ok(out)
}

/// Unit n-grams within each utterance; utterances shorter than `n` add nothing.
pub fn count_unit_ngrams(records: &[UtteranceRecord], n: usize) -> Result<NgramTable> {
    let mut table = NgramTable::new(n, AlphabetKind::Unit)?;
    for r in records {
        table.add_unit_sequence(&r.units)?;
    }
    Ok(table)
}

/// Characters retained when building character streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Charset {
    Any,
    Only(HashSet<char>),
}

impl Charset {
    pub fn from_chars(chars: &str) -> Self {
        Charset::Only(chars.chars().collect())
    }

    /// Lowercase ASCII letters, ASCII punctuation and space.
    pub fn english() -> Self {
        Charset::Only(
            ('a'..='z')
                .chain((0x21u8..0x7f).map(char::from).filter(char::is_ascii_punctuation))
                .chain([' '])
                .collect(),
        )
    }

    pub fn contains(&self, c: char) -> bool {
        match self {
            Charset::Any => true,
            Charset::Only(set) => set.contains(&c),
        }
    }
}

/// Joins a record's tokens with `joiner` (or nothing) and drops characters
/// outside `charset`.
pub fn char_stream(record: &TokenRecord, charset: &Charset, joiner: Option<char>) -> Vec<char> {
    let mut out = Vec::new();
    for (i, tok) in record.tokens.iter().enumerate() {
        if i > 0 {
            out.extend(joiner);
        }
        out.extend(tok.chars());
    }
    out.retain(|&c| charset.contains(c));
    out
}

pub fn count_char_ngrams(
    records: &[TokenRecord],
    n: usize,
    charset: &Charset,
    joiner: Option<char>,
) -> Result<NgramTable> {
    if let Some(j) = joiner.filter(|&j| !charset.contains(j)) {
        return Err(Error::InvalidArgument(format!(
            "joiner {j:?} is not in the character set"
        )));
    }
    let mut table = NgramTable::new(n, AlphabetKind::Character)?;
    for r in records {
        let chars = char_stream(r, charset, joiner);
        for w in chars.windows(n) {
            *table.counts.entry(Gram::Text(w.iter().collect::<String>().into())).or_insert(0) += 1;
            table.total += 1;
        }
    }
    Ok(table)
}

pub fn count_words(records: &[TokenRecord]) -> NgramTable {
    let mut table = NgramTable::new(1, AlphabetKind::Word).expect("n = 1 is valid");
    for tok in records.iter().flat_map(|r| &r.tokens) {
        *table.counts.entry(Gram::Text(tok.as_str().into())).or_insert(0) += 1;
        table.total += 1;
    }
    table
}

/// `ceil(target_total_len / ref_total_len)`, at least 1: the average number
/// of target symbols per reference symbol, rounded up.
pub fn choose_n(ref_total_len: u64, target_total_len: u64) -> Result<usize> {
    if ref_total_len == 0 || target_total_len == 0 {
        return Err(Error::ZeroLength);
    }
    Ok(target_total_len.div_ceil(ref_total_len).max(1) as usize)
}
