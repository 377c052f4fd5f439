//! Reading and writing word embeddings and bilingual dictionaries in the
//! usual whitespace-separated text formats.
//!
//! Embedding files start with a `"<vocab> <dim>"` header followed by one
//! `token v1 ... vd` line per word, most frequent word first. The last `dim`
//! space-separated fields of a line are the vector; everything before them
//! is the token, so tokens may themselves contain spaces.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

/// Frequency-ordered vocabulary with one dense row per word.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    words: Vec<String>,
    vectors: DMatrix<f64>,
    lang: String,
}

impl EmbeddingMatrix {
    /// Validates the row count, token uniqueness and finiteness.
    pub fn new(words: Vec<String>, vectors: DMatrix<f64>, lang: impl Into<String>) -> Result<Self> {
        if words.len() != vectors.nrows() {
            return Err(Error::InvalidEmbedding(format!(
                "{} words but {} vector rows",
                words.len(),
                vectors.nrows()
            )));
        }
        if vectors.ncols() == 0 {
            return Err(Error::InvalidEmbedding("dimension must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(words.len());
        for w in &words {
            if !seen.insert(w.as_str()) {
                return Err(Error::InvalidEmbedding(format!("duplicate token {w:?}")));
            }
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidEmbedding("non-finite vector entry".into()));
        }
        Ok(EmbeddingMatrix {
            words,
            vectors,
            lang: lang.into(),
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Same vocabulary, new vectors (e.g. after a projection).
    pub fn with_vectors(&self, vectors: DMatrix<f64>) -> Result<Self> {
        EmbeddingMatrix::new(self.words.clone(), vectors, self.lang.clone())
    }

    /// First `n` words.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.vocab_size());
        EmbeddingMatrix {
            words: self.words[..n].to_vec(),
            vectors: self.vectors.rows(0, n).into_owned(),
            lang: self.lang.clone(),
        }
    }

    /// Token → row index.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect()
    }
}

/// Loads an embedding file, keeping at most `max_vocab` distinct words.
pub fn load_embeddings(path: impl AsRef<Path>, max_vocab: Option<usize>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), path, max_vocab)
}

/// Parses embeddings from any buffered reader; `path` is only used in errors.
pub fn read_embeddings<R: BufRead>(
    mut reader: R,
    path: &Path,
    max_vocab: Option<usize>,
) -> Result<EmbeddingMatrix> {
    let mut buf = Vec::new();
    let mut next_line = |buf: &mut Vec<u8>| -> Result<Option<String>> {
        buf.clear();
        let n = reader.read_until(b'\n', buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Ok(None);
        }
        let text = String::from_utf8_lossy(buf);
        Ok(Some(text.trim_end_matches(['\n', '\r', ' ']).to_string()))
    };

    let header = match next_line(&mut buf)? {
        None => return Err(Error::EmptyFile { path: path.into() }),
        Some(h) => h,
    };
    let malformed = || Error::MalformedHeader {
        path: path.into(),
        line: 1,
        header: header.clone(),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(malformed());
    }
    let vocab: usize = fields[0].parse().map_err(|_| malformed())?;
    let dim: usize = fields[1].parse().map_err(|_| malformed())?;
    if dim == 0 {
        return Err(malformed());
    }
    if vocab == 0 {
        return Err(Error::EmptyFile { path: path.into() });
    }

    let limit = max_vocab.unwrap_or(usize::MAX).min(vocab);
    let mut words = Vec::with_capacity(limit);
    let mut seen = HashSet::with_capacity(limit);
    let mut data = Vec::with_capacity(limit * dim);
    let mut row = Vec::with_capacity(dim);

    for read in 0..vocab {
        if words.len() >= limit {
            break;
        }
        let line_no = read + 2;
        let line = match next_line(&mut buf)? {
            Some(l) => l,
            None => {
                return Err(Error::TruncatedFile {
                    path: path.into(),
                    expected: vocab,
                    found: read,
                })
            }
        };
        let fields = line.split(' ').count();
        if fields < dim + 1 {
            return Err(Error::DimensionMismatch {
                path: path.into(),
                line: line_no,
                expected: dim,
                found: fields.saturating_sub(1),
            });
        }
        let mut parts = line.rsplitn(dim + 1, ' ');
        row.clear();
        for _ in 0..dim {
            let field = parts.next().unwrap_or_default();
            match field.parse::<f64>() {
                Ok(value) if value.is_finite() => row.push(value),
                _ => {
                    return Err(Error::NonFinite {
                        path: path.into(),
                        line: line_no,
                        value: field.to_string(),
                    })
                }
            }
        }
        let token = parts.next().unwrap_or_default();
        if token.is_empty() {
            return Err(Error::EmptyToken {
                path: path.into(),
                line: line_no,
            });
        }
        if !seen.insert(token.to_string()) {
            continue;
        }
        words.push(token.to_string());
        data.extend(row.iter().rev());
    }

    let vectors = DMatrix::from_row_slice(words.len(), dim, &data);
    let lang = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    EmbeddingMatrix::new(words, vectors, lang)
}

/// Writes `emb` in the text format read by [`load_embeddings`].
///
/// Values use the shortest representation that round-trips exactly.
pub fn save_embeddings(emb: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if emb.vocab_size() == 0 {
        return Err(Error::EmptyVocabulary);
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_embeddings(emb, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_embeddings<W: Write>(emb: &EmbeddingMatrix, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{} {}", emb.vocab_size(), emb.dim())?;
    for (i, word) in emb.words().iter().enumerate() {
        out.write_all(word.as_bytes())?;
        for j in 0..emb.dim() {
            write!(out, " {}", emb.vectors[(i, j)])?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Token-level bilingual dictionary as read from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldDictionary {
    pairs: Vec<(String, String)>,
}

impl GoldDictionary {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyDictionaryPairs);
        }
        if pairs.iter().any(|(s, t)| s.is_empty() || t.is_empty()) {
            return Err(Error::InvalidEmbedding("empty token in dictionary".into()));
        }
        Ok(GoldDictionary { pairs })
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    /// Maps tokens onto vocabulary indices.
    ///
    /// Pairs with an out-of-vocabulary source are dropped. Pairs with an
    /// out-of-vocabulary target are kept as unreachable so that they still
    /// count against accuracy.
    pub fn resolve(&self, src: &EmbeddingMatrix, tgt: &EmbeddingMatrix) -> ResolvedGold {
        self.resolve_with(&src.index(), &tgt.index())
    }

    /// [`GoldDictionary::resolve`] against explicit token→index maps.
    pub fn resolve_with(&self, src_index: &HashMap<&str, usize>, tgt_index: &HashMap<&str, usize>) -> ResolvedGold {
        let mut entries: BTreeMap<usize, Vec<Option<usize>>> = BTreeMap::new();
        let mut all_sources = BTreeSet::new();
        for (s, t) in &self.pairs {
            all_sources.insert(s.as_str());
            let Some(&si) = src_index.get(s.as_str()) else {
                continue;
            };
            let target = tgt_index.get(t.as_str()).copied();
            let list = entries.entry(si).or_default();
            if !list.contains(&target) {
                list.push(target);
            }
        }
        let coverage = entries.len() as f64 / all_sources.len() as f64;
        ResolvedGold {
            entries,
            total_sources: all_sources.len(),
            coverage,
        }
    }
}

/// Gold dictionary expressed in vocabulary indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedGold {
    entries: BTreeMap<usize, Vec<Option<usize>>>,
    total_sources: usize,
    coverage: f64,
}

impl ResolvedGold {
    /// Builds from index pairs; every target is reachable and coverage is 1.
    pub fn from_dictionary(dict: &Dictionary) -> Self {
        let mut entries: BTreeMap<usize, Vec<Option<usize>>> = BTreeMap::new();
        for &(s, t) in dict.pairs() {
            let list = entries.entry(s).or_default();
            if !list.contains(&Some(t)) {
                list.push(Some(t));
            }
        }
        ResolvedGold {
            total_sources: entries.len(),
            entries,
            coverage: 1.0,
        }
    }

    /// Fraction of distinct gold source tokens present in the source vocabulary.
    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn total_sources(&self) -> usize {
        self.total_sources
    }

    /// Evaluated source indices in ascending order.
    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    /// Gold targets of `src`; `None` marks an out-of-vocabulary target.
    pub fn targets(&self, src: usize) -> &[Option<usize>] {
        self.entries.get(&src).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn num_evaluated(&self) -> usize {
        self.entries.len()
    }

    /// Reachable pairs as an index dictionary.
    pub fn dictionary(&self) -> Dictionary {
        self.entries
            .iter()
            .flat_map(|(&s, ts)| ts.iter().flatten().map(move |&t| (s, t)))
            .collect()
    }

    /// Whether any pair has an out-of-vocabulary target.
    pub fn has_unreachable(&self) -> bool {
        self.entries.values().flatten().any(Option::is_none)
    }
}

/// Reads a `src tgt` per line dictionary (tab or space separated).
pub fn load_gold_pairs(path: impl AsRef<Path>) -> Result<GoldDictionary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_gold_pairs(BufReader::new(file), path)
}

pub fn read_gold_pairs<R: BufRead>(reader: R, path: &Path) -> Result<GoldDictionary> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [s, t] => pairs.push((s.to_string(), t.to_string())),
            _ => {
                return Err(Error::DictionaryLine {
                    path: path.into(),
                    line: i + 1,
                    found: fields.len(),
                })
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDictionary { path: path.into() });
    }
    GoldDictionary::new(pairs)
}

/// Loads a gold dictionary and resolves it against both vocabularies.
///
/// Returns the reachable index pairs and the source coverage; the full
/// [`ResolvedGold`] (with unreachable targets) is available through
/// [`GoldDictionary::resolve`].
pub fn load_gold_dictionary(
    path: impl AsRef<Path>,
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
) -> Result<(Dictionary, f64)> {
    let resolved = load_gold_pairs(path)?.resolve(src, tgt);
    Ok((resolved.dictionary(), resolved.coverage()))
}

/// Writes index pairs as `src tgt` tokens, one pair per line.
pub fn save_dictionary(
    dict: &Dictionary,
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    dict.validate(src.vocab_size(), tgt.vocab_size())?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for &(s, t) in dict.pairs() {
        writeln!(out, "{}\t{}", src.words()[s], tgt.words()[t]).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, max_vocab: Option<usize>) -> Result<EmbeddingMatrix> {
        read_embeddings(text.as_bytes(), Path::new("test.vec"), max_vocab)
    }

    fn write_temp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_header_and_rows() {
        let emb = parse("2 3\ncat 1 0 0\ndog 0 1 0\n", None).unwrap();
        assert_eq!(emb.vocab_size(), 2);
        assert_eq!(emb.dim(), 3);
        assert_eq!(emb.words(), ["cat", "dog"]);
        assert_eq!(emb.vectors()[(1, 1)], 1.0);
    }

    #[test]
    fn max_vocab_truncates() {
        let emb = parse("2 3\ncat 1 0 0\ndog 0 1 0\n", Some(1)).unwrap();
        assert_eq!(emb.words(), ["cat"]);
    }

    /// Line-by-line reference: split on whitespace, keep first occurrence.
    fn reference_parse(text: &str) -> Vec<(String, Vec<f64>)> {
        let mut lines = text.lines();
        let d: usize = lines.next().unwrap().split(' ').nth(1).unwrap().parse().unwrap();
        let mut out: Vec<(String, Vec<f64>)> = Vec::new();
        for l in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            let tok = f[..f.len() - d].join(" ");
            if out.iter().any(|(t, _)| *t == tok) {
                continue;
            }
            out.push((tok, f[f.len() - d..].iter().map(|v| v.parse().unwrap()).collect()));
        }
        out
    }

    #[test]
    fn duplicate_tokens_keep_first() {
        let text = "2 2\na 1 0\na 0 1\n";
        let emb = parse(text, None).unwrap();
        let reference = reference_parse(text);
        assert_eq!(emb.vocab_size(), 1);
        assert_eq!(reference.len(), 1);
        assert_eq!(emb.words()[0], reference[0].0);
        assert_eq!(emb.vectors().row(0).iter().copied().collect::<Vec<_>>(), reference[0].1);
    }

    #[test]
    fn tokens_may_contain_spaces_and_trailing_space() {
        let emb = parse("1 2\nnew york 0.5 -1 \n", None).unwrap();
        assert_eq!(emb.words()[0], "new york");
        assert_eq!(emb.vectors()[(0, 1)], -1.0);
    }

    #[test]
    fn error_paths_name_lines() {
        assert!(matches!(parse("", None), Err(Error::EmptyFile { .. })));
        assert!(matches!(parse("2\n", None), Err(Error::MalformedHeader { line: 1, .. })));
        assert!(matches!(parse("x 3\n", None), Err(Error::MalformedHeader { .. })));
        assert!(matches!(
            parse("2 3\ncat 1 0 0\ndog 0 1\n", None),
            Err(Error::DimensionMismatch { line: 3, expected: 3, .. })
        ));
        assert!(matches!(
            parse("1 2\ncat 1 NaN\n", None),
            Err(Error::NonFinite { line: 2, .. })
        ));
        assert!(matches!(
            parse("1 2\ncat 1 inf\n", None),
            Err(Error::NonFinite { line: 2, .. })
        ));
        assert!(matches!(
            parse("3 2\ncat 1 0\n", None),
            Err(Error::TruncatedFile { expected: 3, found: 1, .. })
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let vectors = DMatrix::from_row_slice(2, 3, &[0.1, -2.5e-9, 3.0, 1.0 / 3.0, 7.0, -0.0]);
        let emb = EmbeddingMatrix::new(vec!["a".into(), "b".into()], vectors, "xx").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.vec");
        save_embeddings(&emb, &path).unwrap();
        let back = load_embeddings(&path, None).unwrap();
        assert_eq!(back.words(), emb.words());
        assert!((back.vectors() - emb.vectors()).amax() < 1e-7);
    }

    #[test]
    fn refuses_to_save_empty() {
        let emb = EmbeddingMatrix::new(vec![], DMatrix::zeros(0, 3), "xx").unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            save_embeddings(&emb, dir.path().join("e.vec")),
            Err(Error::EmptyVocabulary)
        ));
    }

    fn vocab(words: &[&str]) -> EmbeddingMatrix {
        let n = words.len();
        EmbeddingMatrix::new(
            words.iter().map(|w| w.to_string()).collect(),
            DMatrix::identity(n, n),
            "xx",
        )
        .unwrap()
    }

    #[test]
    fn gold_dictionary_coverage() {
        let src = vocab(&["cat", "dog", "sun"]);
        let tgt = vocab(&["gato", "perro", "sol"]);

        let f = write_temp("cat gato\ndog\tperro\n");
        let (dict, coverage) = load_gold_dictionary(f.path(), &src, &tgt).unwrap();
        assert_eq!(dict.pairs(), &[(0, 0), (1, 1)]);
        assert_eq!(coverage, 1.0);

        let f = write_temp("cat gato\n");
        let (dict, coverage) = load_gold_dictionary(f.path(), &vocab(&["dog"]), &tgt).unwrap();
        assert!(dict.is_empty());
        assert_eq!(coverage, 0.0);

        let f = write_temp("cat gato\ndog perro\nsun sol\nmoon luna\nstar estrella\n");
        let (dict, coverage) = load_gold_dictionary(f.path(), &src, &tgt).unwrap();
        assert_eq!(dict.len(), 3);
        assert!((coverage - 3.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn unreachable_targets_are_kept() {
        let src = vocab(&["cat"]);
        let tgt = vocab(&["gato"]);
        let gold = read_gold_pairs("cat gato\ncat minino\n".as_bytes(), Path::new("g")).unwrap();
        let resolved = gold.resolve(&src, &tgt);
        assert_eq!(resolved.targets(0), &[Some(0), None]);
        assert!(resolved.has_unreachable());
        assert_eq!(resolved.dictionary().pairs(), &[(0, 0)]);
    }

    #[test]
    fn gold_line_with_three_tokens_fails() {
        let err = read_gold_pairs("a b\nc d e\n".as_bytes(), Path::new("g")).unwrap_err();
        assert!(matches!(err, Error::DictionaryLine { line: 2, found: 3, .. }));
    }
}
