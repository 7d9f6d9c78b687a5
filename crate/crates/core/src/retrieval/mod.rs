//! Relevant-identifier retrieval: rank same-file lines by edit-distance
//! similarity to the buggy line, extract and filter their identifiers, keep
//! the ones reachable from the buggy location, attach type info, and render
//! prompts.

pub mod scope;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{extract_lines, tokenize, ProjectCorpus, TokenKind};
use crate::{Error, Result};
pub use scope::{find_accessible_ids, find_type_info, TypeInfo};

/// Collapse whitespace runs and trim, so similarity compares code shape, not
/// indentation.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Character-level edit distance, two-row dynamic programming.
pub fn levenshtein_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ac) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &bc) in b.iter().enumerate() {
            let cost = usize::from(ac != bc);
            cur[j + 1] = (cur[j] + 1).min(prev[j + 1] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Similarity in [0,1]: `1 - dist/max(|a|,|b|)` over whitespace-normalized
/// strings; 1.0 when both normalize to empty.
pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    let a = normalize_ws(a);
    let b = normalize_ws(b);
    let max = a.chars().count().max(b.chars().count());
    if max == 0 {
        return 1.0;
    }
    1.0 - levenshtein_distance(&a, &b) as f64 / max as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLine {
    pub file: String,
    pub line_no: u32,
    pub text: String,
    pub similarity: f64,
}

/// Rank candidate lines by similarity to the buggy line, descending; equal
/// scores order by ascending line number.
pub fn rank_lines(buggy_line: &str, lines: &[(u32, String)]) -> Vec<RankedLine> {
    let mut ranked: Vec<RankedLine> = lines
        .iter()
        .map(|(line_no, text)| RankedLine {
            file: String::new(),
            line_no: *line_no,
            text: text.clone(),
            similarity: levenshtein_ratio(buggy_line, text),
        })
        .collect();
    sort_ranked(&mut ranked);
    ranked
}

fn sort_ranked(ranked: &mut [RankedLine]) {
    ranked.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.file.cmp(&b.file))
            .then_with(|| a.line_no.cmp(&b.line_no))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentifierKind {
    Method,
    Variable,
}

/// Identifier tokens of a line, first occurrence only; `method` when the
/// token is followed by `(`.
pub fn extract_ids(line: &str) -> Vec<(String, IdentifierKind)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for tok in tokenize(line) {
        if tok.kind != TokenKind::Identifier {
            continue;
        }
        if seen.insert(tok.text.clone()) {
            let kind = if tok.call_candidate {
                IdentifierKind::Method
            } else {
                IdentifierKind::Variable
            };
            out.push((tok.text, kind));
        }
    }
    out
}

/// Drops common/simple identifiers: stoplisted names, names of length <= 3,
/// and the corpus's most frequent names.
#[derive(Debug, Clone)]
pub struct SimpleFilter {
    stoplist: BTreeSet<String>,
    frequent: BTreeSet<String>,
}

const STOPLIST: &str = include_str!("stoplist.txt");

impl SimpleFilter {
    /// Stoplist only, no frequency data.
    pub fn base() -> Self {
        let stoplist = STOPLIST
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        SimpleFilter {
            stoplist,
            frequent: BTreeSet::new(),
        }
    }

    /// Stoplist plus the `freq_cutoff` most frequent identifiers of the
    /// corpus.
    pub fn from_corpus(corpus: &ProjectCorpus, freq_cutoff: usize) -> Self {
        let mut filter = Self::base();
        filter.frequent = corpus
            .identifier_frequencies()
            .into_iter()
            .take(freq_cutoff)
            .map(|(name, _)| name)
            .collect();
        filter
    }

    pub fn keep(&self, name: &str) -> bool {
        name.len() > 3 && !self.stoplist.contains(name) && !self.frequent.contains(name)
    }

    pub fn filter(
        &self,
        ids: Vec<(String, IdentifierKind)>,
    ) -> Vec<(String, IdentifierKind)> {
        ids.into_iter().filter(|(name, _)| self.keep(name)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedIdentifier {
    pub name: String,
    pub kind: IdentifierKind,
    /// Declared type (variables) or return type (methods), when resolvable.
    pub type_info: Option<String>,
    pub similarity: f64,
    /// (file, line) the identifier was retrieved from.
    pub donor: (String, u32),
    /// 1-based.
    pub rank: u32,
    pub ambiguous_type: bool,
}

impl RankedIdentifier {
    /// `(Type) name` for variables, `(Type) name()` for methods; bare name
    /// when the type is unresolved or suppressed.
    pub fn rendered(&self, with_type: bool) -> String {
        let suffix = match self.kind {
            IdentifierKind::Method => "()",
            IdentifierKind::Variable => "",
        };
        match (&self.type_info, with_type) {
            (Some(t), true) => format!("({t}) {}{suffix}", self.name),
            _ => format!("{}{suffix}", self.name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchScope {
    /// Candidate donor lines come from the buggy file only (default).
    File,
    /// Candidate donor lines come from every file in the corpus.
    Project,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub top_n: usize,
    /// Identifiers among the top-F most frequent in the corpus are dropped.
    pub freq_cutoff: usize,
    pub scope: SearchScope,
    /// Render `(Type) name` in prompts.
    pub with_type: bool,
    /// One prompt listing all top-n identifiers instead of one each.
    pub combined: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            top_n: 5,
            freq_cutoff: 50,
            scope: SearchScope::File,
            with_type: true,
            combined: false,
        }
    }
}

/// The full retrieval pipeline for one buggy location.
pub fn rank_identifiers(
    corpus: &ProjectCorpus,
    file: &str,
    buggy_line_no: u32,
    cfg: &RetrievalConfig,
) -> Result<Vec<RankedIdentifier>> {
    let source = corpus
        .file(file)
        .ok_or_else(|| Error::StageInput(format!("file {file} not in corpus")))?;
    let buggy_text = source
        .line(buggy_line_no)
        .ok_or_else(|| Error::StageInput(format!("{file} has no line {buggy_line_no}")))?
        .to_string();

    // Candidate donor lines, excluding the buggy line itself.
    let mut candidates: Vec<RankedLine> = Vec::new();
    let mut add_file = |f: &crate::corpus::SourceFile| {
        for (line_no, text) in extract_lines(f) {
            if f.relative_path == file && line_no == buggy_line_no {
                continue;
            }
            candidates.push(RankedLine {
                file: f.relative_path.clone(),
                line_no,
                text: text.clone(),
                similarity: levenshtein_ratio(&buggy_text, &text),
            });
        }
    };
    match cfg.scope {
        SearchScope::File => add_file(source),
        SearchScope::Project => {
            for f in &corpus.files {
                add_file(f);
            }
        }
    }
    sort_ranked(&mut candidates);

    let filter = SimpleFilter::from_corpus(corpus, cfg.freq_cutoff);
    let accessible = find_accessible_ids(corpus, file, buggy_line_no)?;

    // Walk donor lines best-first; first sighting of a name records its best
    // similarity.
    let mut picked: Vec<RankedIdentifier> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (donor_rank, line) in candidates.iter().enumerate() {
        let mut ids: Vec<(String, IdentifierKind)> = filter.filter(extract_ids(&line.text));
        ids.sort_by(|a, b| a.0.cmp(&b.0));
        for (name, kind) in ids {
            if !accessible.contains(&name) || !seen.insert(name.clone()) {
                continue;
            }
            picked.push(RankedIdentifier {
                name,
                kind,
                type_info: None,
                similarity: line.similarity,
                donor: (line.file.clone(), line.line_no),
                rank: donor_rank as u32, // provisional; rewritten below
                ambiguous_type: false,
            });
        }
    }

    let lookups: Vec<(String, bool)> = picked
        .iter()
        .map(|r| (r.name.clone(), r.kind == IdentifierKind::Method))
        .collect();
    let types = find_type_info(corpus, &lookups, file);
    for r in &mut picked {
        if let Some(info) = types.get(&r.name) {
            r.type_info = info.type_text.clone();
            r.ambiguous_type = info.ambiguous;
        }
    }

    // Final order: similarity desc, then donor order, then name.
    picked.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.rank.cmp(&b.rank))
            .then_with(|| a.name.cmp(&b.name))
    });
    for (i, r) in picked.iter_mut().enumerate() {
        r.rank = (i + 1) as u32;
    }
    Ok(picked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    /// Byte-exact prompt text: `/* use <rendered> in the next line */`.
    pub text: String,
    /// The identifier(s) the prompt offers; exactly one except in combined
    /// mode.
    pub identifiers: Vec<RankedIdentifier>,
}

impl Prompt {
    /// Name tokens the prompt asks the model to use.
    pub fn identifier_names(&self) -> Vec<String> {
        self.identifiers.iter().map(|r| r.name.clone()).collect()
    }
}

fn prompt_text(rendered: &str) -> String {
    format!("/* use {rendered} in the next line */")
}

/// One prompt per top-n identifier (default), or a single comma-separated
/// prompt in combined mode. An empty ranking yields no prompts and the
/// pipeline degrades to three variants.
pub fn build_prompts(ranked: &[RankedIdentifier], cfg: &RetrievalConfig) -> Vec<Prompt> {
    let top: Vec<&RankedIdentifier> = ranked.iter().take(cfg.top_n).collect();
    if top.is_empty() {
        return Vec::new();
    }
    if cfg.combined {
        let rendered: Vec<String> = top.iter().map(|r| r.rendered(cfg.with_type)).collect();
        return vec![Prompt {
            text: prompt_text(&rendered.join(", ")),
            identifiers: top.into_iter().cloned().collect(),
        }];
    }
    top.into_iter()
        .map(|r| Prompt {
            text: prompt_text(&r.rendered(cfg.with_type)),
            identifiers: vec![r.clone()],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest, IngestOptions};
    use std::fs;

    #[test]
    fn ratio_identity_and_empty() {
        assert_eq!(levenshtein_ratio("abc", "abc"), 1.0);
        assert_eq!(levenshtein_ratio("abc", ""), 0.0);
        assert_eq!(levenshtein_ratio("", ""), 1.0);
    }

    #[test]
    fn ratio_kitten_sitting() {
        // Edit distance 3 over max length 7.
        let expected = 1.0 - 3.0 / 7.0;
        assert!((levenshtein_ratio("kitten", "sitting") - expected).abs() < 1e-12);
    }

    #[test]
    fn ratio_normalizes_whitespace() {
        assert_eq!(levenshtein_ratio("  int  x ;", "int x ;"), 1.0);
    }

    #[test]
    fn rank_lines_exact_duplicate_first() {
        let lines = vec![
            (3, "int other = 2;".to_string()),
            (7, "return  total;".to_string()),
            (9, "unrelated();".to_string()),
        ];
        let ranked = rank_lines("return total;", &lines);
        assert_eq!(ranked[0].line_no, 7);
        assert_eq!(ranked[0].similarity, 1.0);
    }

    #[test]
    fn rank_lines_ties_order_by_line_number() {
        let lines = vec![
            (5, "   ".to_string()),
            (2, "".to_string()),
            (8, "\t".to_string()),
        ];
        let ranked = rank_lines("something", &lines);
        let order: Vec<u32> = ranked.iter().map(|l| l.line_no).collect();
        assert_eq!(order, vec![2, 5, 8]);
        assert!(ranked.iter().all(|l| l.similarity == 0.0));
    }

    #[test]
    fn extract_ids_kinds_and_dedupe() {
        let ids = extract_ids("overridingInfo = node.getJSDocInfo();");
        assert_eq!(
            ids,
            vec![
                ("overridingInfo".to_string(), IdentifierKind::Variable),
                ("node".to_string(), IdentifierKind::Variable),
                ("getJSDocInfo".to_string(), IdentifierKind::Method),
            ]
        );
        assert!(extract_ids("return 42;").is_empty());
        let chained = extract_ids("a.b.c()");
        assert_eq!(
            chained,
            vec![
                ("a".to_string(), IdentifierKind::Variable),
                ("b".to_string(), IdentifierKind::Variable),
                ("c".to_string(), IdentifierKind::Method),
            ]
        );
    }

    #[test]
    fn simple_filter_drops_common_and_short() {
        let f = SimpleFilter::base();
        let ids = vec![
            ("length".to_string(), IdentifierKind::Variable),
            ("node".to_string(), IdentifierKind::Variable),
            ("getJSDocInfo".to_string(), IdentifierKind::Method),
        ];
        let kept = f.filter(ids);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].0, "getJSDocInfo");

        assert!(f.filter(Vec::new()).is_empty());

        let ids = vec![
            ("i".to_string(), IdentifierKind::Variable),
            ("idx".to_string(), IdentifierKind::Variable),
            ("computeFoldConstant".to_string(), IdentifierKind::Method),
        ];
        let kept = f.filter(ids);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].0, "computeFoldConstant");
    }

    #[test]
    fn prompt_text_is_byte_exact() {
        let ident = RankedIdentifier {
            name: "getParent".to_string(),
            kind: IdentifierKind::Method,
            type_info: Some("Plot".to_string()),
            similarity: 0.9,
            donor: ("Widget.java".to_string(), 12),
            rank: 1,
            ambiguous_type: false,
        };
        assert_eq!(ident.rendered(true), "(Plot) getParent()");
        let prompts = build_prompts(&[ident], &RetrievalConfig::default());
        assert_eq!(prompts[0].text, "/* use (Plot) getParent() in the next line */");
    }

    #[test]
    fn prompt_cardinality_and_empty_degradation() {
        let make = |name: &str, rank: u32| RankedIdentifier {
            name: name.to_string(),
            kind: IdentifierKind::Variable,
            type_info: None,
            similarity: 0.5,
            donor: ("f".to_string(), 1),
            rank,
            ambiguous_type: false,
        };
        let ranked = vec![make("aaaa", 1), make("bbbb", 2), make("cccc", 3)];
        let prompts = build_prompts(&ranked, &RetrievalConfig::default());
        assert_eq!(prompts.len(), 3);
        assert!(build_prompts(&[], &RetrievalConfig::default()).is_empty());
    }

    #[test]
    fn combined_prompt_lists_all() {
        let make = |name: &str| RankedIdentifier {
            name: name.to_string(),
            kind: IdentifierKind::Variable,
            type_info: None,
            similarity: 0.5,
            donor: ("f".to_string(), 1),
            rank: 1,
            ambiguous_type: false,
        };
        let cfg = RetrievalConfig {
            combined: true,
            ..Default::default()
        };
        let prompts = build_prompts(&[make("alpha"), make("beta")], &cfg);
        assert_eq!(prompts.len(), 1);
        assert_eq!(prompts[0].text, "/* use alpha, beta in the next line */");
        assert_eq!(prompts[0].identifiers.len(), 2);
    }

    fn corpus_from(files: &[(&str, &str)]) -> ProjectCorpus {
        let dir = tempfile::tempdir().unwrap();
        for (rel, content) in files {
            let path = dir.path().join(rel);
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(path, content).unwrap();
        }
        ingest(dir.path(), IngestOptions::default()).unwrap()
    }

    /// A donor line sharing a variable-name stem with the buggy line ranks
    /// above unrelated lines and contributes its method identifier.
    #[test]
    fn pipeline_finds_donor_identifier() {
        let src = "\
class Checker {
    JSDocInfo overridingInfo;

    void recordOverride(Node node) {
        overridingInfo = node.getJSDocInfo();
        apply(overridingInfo);
    }

    void checkOverride(Node node) {
        boolean isOverride = false;
        isOverride = node.hasFlag();
        unrelatedCall(12345);
    }
}
";
        let corpus = corpus_from(&[("Checker.java", src)]);
        // Buggy line 11: `isOverride = node.hasFlag();`
        let cfg = RetrievalConfig {
            freq_cutoff: 0,
            ..Default::default()
        };
        let ranked = rank_identifiers(&corpus, "Checker.java", 11, &cfg).unwrap();
        let names: Vec<&str> = ranked.iter().map(|r| r.name.as_str()).collect();
        assert!(names.contains(&"getJSDocInfo"), "names: {names:?}");
        let donor = ranked.iter().find(|r| r.name == "getJSDocInfo").unwrap();
        // Donor is the similar assignment line, not the unrelated call.
        assert_eq!(donor.donor.1, 5);
        assert_eq!(donor.kind, IdentifierKind::Method);
        // Recompute its score with the DP oracle definition.
        let expect = levenshtein_ratio(
            "isOverride = node.hasFlag();",
            "overridingInfo = node.getJSDocInfo();",
        );
        assert!((donor.similarity - expect).abs() < 1e-12);
    }

    /// Every ranked identifier occurs on its donor line and is accessible.
    #[test]
    fn pipeline_soundness() {
        let src = "\
class Checker {
    int fieldCount;

    int computeTotalWeight(int seedValue) {
        int partialWeight = seedValue * 2;
        return partialWeight + fieldCount;
    }

    int otherEntry(int seedValue) {
        int localTotal = seedValue;
        return localTotal;
    }
}
";
        let corpus = corpus_from(&[("Checker.java", src)]);
        let cfg = RetrievalConfig {
            freq_cutoff: 0,
            ..Default::default()
        };
        let ranked = rank_identifiers(&corpus, "Checker.java", 6, &cfg).unwrap();
        let accessible = find_accessible_ids(&corpus, "Checker.java", 6).unwrap();
        assert!(!ranked.is_empty());
        for r in &ranked {
            assert!(accessible.contains(&r.name), "{} accessible", r.name);
            let file = corpus.file(&r.donor.0).unwrap();
            let donor_line = file.line(r.donor.1).unwrap();
            let on_line = extract_ids(donor_line).iter().any(|(n, _)| n == &r.name);
            assert!(on_line, "{} on donor line", r.name);
        }
        // Ranks are 1..k in similarity order.
        for (i, r) in ranked.iter().enumerate() {
            assert_eq!(r.rank, (i + 1) as u32);
            if i > 0 {
                assert!(ranked[i - 1].similarity >= r.similarity);
            }
        }
    }

    /// Project scope candidates are a superset of file scope candidates.
    #[test]
    fn project_scope_is_superset() {
        let a = "\
class A {
    int localHelperValue;

    int run(int seedValue) {
        int partialCount = seedValue + localHelperValue;
        return partialCount;
    }
}
";
        let b = "\
class B {
    int run(int seedValue) {
        int partialCount = seedValue + 1;
        return remoteIngredient(partialCount);
    }

    int remoteIngredient(int partialCount) {
        return partialCount * 2;
    }
}
";
        let corpus = corpus_from(&[("A.java", a), ("B.java", b)]);
        let file_cfg = RetrievalConfig {
            freq_cutoff: 0,
            ..Default::default()
        };
        let proj_cfg = RetrievalConfig {
            scope: SearchScope::Project,
            freq_cutoff: 0,
            ..Default::default()
        };
        let file_ids = rank_identifiers(&corpus, "A.java", 5, &file_cfg).unwrap();
        let proj_ids = rank_identifiers(&corpus, "A.java", 5, &proj_cfg).unwrap();
        let file_names: BTreeSet<&str> = file_ids.iter().map(|r| r.name.as_str()).collect();
        let proj_names: BTreeSet<&str> = proj_ids.iter().map(|r| r.name.as_str()).collect();
        assert!(file_names.is_subset(&proj_names));
    }

    proptest::proptest! {
        /// Symmetry, bounds, and the identity criterion.
        #[test]
        fn ratio_symmetry_and_bounds(a in ".{0,24}", b in ".{0,24}") {
            let r1 = levenshtein_ratio(&a, &b);
            let r2 = levenshtein_ratio(&b, &a);
            proptest::prop_assert!((r1 - r2).abs() < 1e-12);
            proptest::prop_assert!((0.0..=1.0).contains(&r1));
            let equal_normalized = normalize_ws(&a) == normalize_ws(&b);
            proptest::prop_assert_eq!(r1 == 1.0, equal_normalized);
        }
    }
}
