//! Project ingestion: walk a source tree, lex each file, extract function
//! units, and index identifier occurrences.

pub mod functions;
pub mod lexer;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};
pub use functions::FunctionUnit;
pub use lexer::{lex, tokenize, LexOutput, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub relative_path: String,
    /// Lines without terminators, newline-normalized to LF.
    pub lines: Vec<String>,
    pub trailing_newline: bool,
    /// Original file used CRLF; preserved so patches can be written back
    /// faithfully.
    pub crlf: bool,
}

impl SourceFile {
    pub fn from_content(relative_path: &str, raw: &str) -> Self {
        let crlf = raw.contains("\r\n");
        let content = if crlf { raw.replace("\r\n", "\n") } else { raw.to_string() };
        let trailing_newline = content.ends_with('\n');
        let mut lines: Vec<String> = content.split('\n').map(str::to_string).collect();
        if trailing_newline {
            lines.pop();
        }
        SourceFile {
            relative_path: relative_path.to_string(),
            lines,
            trailing_newline,
            crlf,
        }
    }

    /// LF-joined content; equals the ingested bytes modulo newline encoding.
    pub fn content(&self) -> String {
        let mut s = self.lines.join("\n");
        if self.trailing_newline {
            s.push('\n');
        }
        s
    }

    pub fn line(&self, line_no: u32) -> Option<&str> {
        self.lines.get((line_no - 1) as usize).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub file: String,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Glob patterns relative to the root; files matching any are ingested.
    pub include: Vec<String>,
    /// Files matching any of these are skipped. Defaults to test trees.
    pub exclude: Vec<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            include: vec!["**/*.java".to_string()],
            exclude: vec!["**/test/**".to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectCorpus {
    pub root_path: PathBuf,
    pub files: Vec<SourceFile>,
    pub functions: Vec<FunctionUnit>,
    /// identifier text -> occurrence sites inside extracted functions.
    pub index: BTreeMap<String, Vec<Occurrence>>,
    /// Files skipped or tolerated with a note (e.g. non-UTF-8).
    pub warnings: Vec<String>,
    pub options: IngestOptions,
}

impl ProjectCorpus {
    pub fn file(&self, relative_path: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.relative_path == relative_path)
    }

    pub fn function_at(&self, file: &str, line: u32) -> Option<&FunctionUnit> {
        self.functions
            .iter()
            .find(|f| f.file == file && f.contains_line(line))
    }

    pub fn functions_in<'a>(&'a self, file: &'a str) -> impl Iterator<Item = &'a FunctionUnit> {
        self.functions.iter().filter(move |f| f.file == file)
    }

    /// Identifier frequency over all function tokens, most frequent first;
    /// ties alphabetical.
    pub fn identifier_frequencies(&self) -> Vec<(String, usize)> {
        let mut freqs: Vec<(String, usize)> = self
            .index
            .iter()
            .map(|(name, occ)| (name.clone(), occ.len()))
            .collect();
        freqs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        freqs
    }
}

fn build_globset(patterns: &[String]) -> Result<GlobSet> {
    let mut builder = GlobSetBuilder::new();
    for pat in patterns {
        let glob = Glob::new(pat).map_err(|e| Error::Config(format!("bad glob {pat:?}: {e}")))?;
        builder.add(glob);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("glob set: {e}")))
}

/// Walk `root`, ingest matching files, extract functions, build the index.
///
/// Deterministic: files are visited in path-lexicographic order and functions
/// are ordered by (path, start line).
pub fn ingest(root: &Path, options: IngestOptions) -> Result<ProjectCorpus> {
    if !root.is_dir() {
        return Err(Error::Ingest {
            root: root.to_path_buf(),
            reason: "not a readable directory".to_string(),
        });
    }
    let include = build_globset(&options.include)?;
    let exclude = build_globset(&options.exclude)?;

    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in walkdir::WalkDir::new(root).follow_links(false) {
        let entry = entry.map_err(|e| Error::Ingest {
            root: root.to_path_buf(),
            reason: e.to_string(),
        })?;
        if entry.file_type().is_file() {
            paths.push(entry.into_path());
        }
    }
    paths.sort();

    let mut files = Vec::new();
    let mut functions = Vec::new();
    let mut warnings = Vec::new();
    for path in paths {
        let rel = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .to_string_lossy()
            .replace('\\', "/");
        if !include.is_match(&rel) || exclude.is_match(&rel) {
            continue;
        }
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let raw = match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(_) => {
                warnings.push(format!("skipped (not valid UTF-8): {rel}"));
                continue;
            }
        };
        let file = SourceFile::from_content(&rel, &raw);
        functions.extend(functions::extract_functions(&rel, &file.content()));
        files.push(file);
    }

    let index = build_index(&functions);
    Ok(ProjectCorpus {
        root_path: root.to_path_buf(),
        files,
        functions,
        index,
        warnings,
        options,
    })
}

fn build_index(functions: &[FunctionUnit]) -> BTreeMap<String, Vec<Occurrence>> {
    let mut index: BTreeMap<String, Vec<Occurrence>> = BTreeMap::new();
    for f in functions {
        for tok in &f.tokens {
            if tok.kind == TokenKind::Identifier {
                index.entry(tok.text.clone()).or_default().push(Occurrence {
                    file: f.file.clone(),
                    line: tok.line,
                    col: tok.col,
                });
            }
        }
    }
    index
}

/// Non-blank, non-comment-only lines with their 1-based line numbers.
///
/// A line survives when at least one code token starts on or spans it, so
/// lines inside a block comment are excluded.
pub fn extract_lines(file: &SourceFile) -> Vec<(u32, String)> {
    let content = file.content();
    let tokens = tokenize(&content);
    let mut has_code = vec![false; file.lines.len() + 2];
    for tok in &tokens {
        if !tok.is_code() {
            continue;
        }
        let span = tok.text.matches('\n').count() as u32;
        for line in tok.line..=tok.line + span {
            if let Some(slot) = has_code.get_mut(line as usize) {
                *slot = true;
            }
        }
    }
    file.lines
        .iter()
        .enumerate()
        .filter(|(i, _)| has_code[i + 1])
        .map(|(i, text)| ((i + 1) as u32, text.clone()))
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CacheRecord {
    Meta {
        root_path: PathBuf,
        options: IngestOptions,
        warnings: Vec<String>,
    },
    File {
        path: String,
        lines: Vec<String>,
        trailing_newline: bool,
        crlf: bool,
    },
    Function {
        file: String,
        start_line: u32,
        end_line: u32,
        signature: String,
        name: String,
        body_open_line: u32,
    },
}

/// Cache the corpus as line-delimited records, one function per record.
pub fn write_cache(corpus: &ProjectCorpus, path: &Path) -> Result<()> {
    let mut out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut emit = |rec: &CacheRecord| -> Result<()> {
        let line = serde_json::to_string(rec).map_err(|e| Error::Config(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))
    };
    emit(&CacheRecord::Meta {
        root_path: corpus.root_path.clone(),
        options: corpus.options.clone(),
        warnings: corpus.warnings.clone(),
    })?;
    for f in &corpus.files {
        emit(&CacheRecord::File {
            path: f.relative_path.clone(),
            lines: f.lines.clone(),
            trailing_newline: f.trailing_newline,
            crlf: f.crlf,
        })?;
    }
    for func in &corpus.functions {
        emit(&CacheRecord::Function {
            file: func.file.clone(),
            start_line: func.start_line,
            end_line: func.end_line,
            signature: func.signature_text.clone(),
            name: func.name.clone(),
            body_open_line: func.body_open_line,
        })?;
    }
    Ok(())
}

/// Load a cached corpus. Function tokens are re-lexed from the cached file
/// lines, so the roundtrip invariant holds by construction.
pub fn read_cache(path: &Path) -> Result<ProjectCorpus> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut root_path = PathBuf::new();
    let mut options = IngestOptions::default();
    let mut warnings = Vec::new();
    let mut files: Vec<SourceFile> = Vec::new();
    let mut functions: Vec<FunctionUnit> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CacheRecord =
            serde_json::from_str(&line).map_err(|e| Error::DatasetFormat {
                line: line_no,
                reason: e.to_string(),
            })?;
        match record {
            CacheRecord::Meta {
                root_path: r,
                options: o,
                warnings: w,
            } => {
                root_path = r;
                options = o;
                warnings = w;
            }
            CacheRecord::File {
                path,
                lines,
                trailing_newline,
                crlf,
            } => files.push(SourceFile {
                relative_path: path,
                lines,
                trailing_newline,
                crlf,
            }),
            CacheRecord::Function {
                file,
                start_line,
                end_line,
                signature,
                name,
                body_open_line,
            } => {
                let source = files
                    .iter()
                    .find(|f| f.relative_path == file)
                    .ok_or_else(|| Error::DatasetFormat {
                        line: line_no,
                        reason: format!("function references unknown file {file}"),
                    })?;
                let slice = source.lines[(start_line - 1) as usize..=(end_line - 1) as usize]
                    .join("\n");
                let mut tokens = tokenize(&slice);
                lexer::offset_lines(&mut tokens, start_line - 1);
                functions.push(FunctionUnit {
                    file,
                    start_line,
                    end_line,
                    tokens,
                    signature_text: signature,
                    name,
                    body_open_line,
                });
            }
        }
    }

    let index = build_index(&functions);
    Ok(ProjectCorpus {
        root_path,
        files,
        functions,
        index,
        warnings,
        options,
    })
}
