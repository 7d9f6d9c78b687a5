//! Heuristic scope and declaration analysis, used to keep retrieved
//! identifiers that are actually reachable from the buggy line and to attach
//! type information to prompts.
//!
//! There is no type checker here: declarations are recognized by token shape
//! (`[modifiers] Type name [=;,:)]`), classes by `class/interface/enum Name
//! ... {` headers with brace matching, and a file without class headers is
//! treated as one file-level scope (which covers C sources). False inclusions
//! are tolerable; prompts are hints, not constraints.

use std::collections::BTreeSet;

use crate::corpus::{tokenize, FunctionUnit, ProjectCorpus, SourceFile, Token, TokenKind};
use crate::{Error, Result};

/// Join type tokens tightly: `Map<String, Integer>`, `int[]`,
/// `struct Ctx *`.
fn render_type<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for tok in tokens {
        let t = tok.as_ref();
        if let Some(p) = prev {
            let tight_before = matches!(t, "<" | ">" | ">>" | "[" | "]" | "," | ".");
            let tight_after = matches!(p, "<" | "[" | ".");
            if !tight_before && !tight_after {
                out.push(' ');
            }
        }
        out.push_str(t);
        prev = Some(t);
    }
    out
}

const DECL_MODIFIERS: &[&str] = &[
    "auto", "const", "extern", "final", "private", "protected", "public", "register", "signed",
    "static", "struct", "synchronized", "transient", "union", "unsigned", "volatile",
];

const PRIMITIVE_TYPES: &[&str] = &[
    "boolean", "byte", "char", "double", "float", "int", "long", "short", "void",
];

fn is_decl_modifier(tok: &Token) -> bool {
    tok.kind == TokenKind::Keyword && DECL_MODIFIERS.contains(&tok.text.as_str())
}

fn is_type_start(tok: &Token) -> bool {
    tok.kind == TokenKind::Identifier
        || (tok.kind == TokenKind::Keyword && PRIMITIVE_TYPES.contains(&tok.text.as_str()))
}

/// A declaration found on a line: rendered type text plus the declared name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declaration {
    pub type_text: String,
    pub name: String,
}

/// Scan one line's code tokens for variable declarations.
///
/// Declarations start at the line head or after `(`, `;` or `{`, and look
/// like `Type name` followed by `=`, `;`, `,`, `:` or `)`. Multi-declarators
/// (`int a, b;`) yield one entry per name.
pub fn scan_declarations(code: &[Token]) -> Vec<Declaration> {
    let mut out = Vec::new();
    let mut starts = vec![0usize];
    for (i, tok) in code.iter().enumerate() {
        if matches!(tok.text.as_str(), "(" | ";" | "{") {
            starts.push(i + 1);
        }
    }
    for &start in &starts {
        if let Some(mut found) = scan_one(code, start) {
            out.append(&mut found);
        }
    }
    out
}

fn scan_one(code: &[Token], mut i: usize) -> Option<Vec<Declaration>> {
    let mut type_struct_prefix: Option<&Token> = None;
    while i < code.len() && is_decl_modifier(&code[i]) {
        if code[i].text == "struct" || code[i].text == "union" {
            type_struct_prefix = Some(&code[i]);
        }
        i += 1;
    }
    if i >= code.len() || !is_type_start(&code[i]) {
        return None;
    }
    let type_start = i;
    i += 1;
    // Type suffix: generics, array brackets, dotted names, pointers.
    loop {
        if i >= code.len() {
            return None;
        }
        match code[i].text.as_str() {
            "<" => {
                let mut depth = 0i32;
                while i < code.len() {
                    match code[i].text.as_str() {
                        "<" => depth += 1,
                        ">" => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        ">>" => depth -= 2,
                        _ => {}
                    }
                    i += 1;
                }
                if i >= code.len() {
                    return None;
                }
                i += 1;
            }
            "[" => {
                if i + 1 < code.len() && code[i + 1].text == "]" {
                    i += 2;
                } else {
                    return None;
                }
            }
            "." => {
                if i + 1 < code.len() && code[i + 1].kind == TokenKind::Identifier {
                    i += 2;
                } else {
                    return None;
                }
            }
            "*" | "&" => i += 1,
            _ => break,
        }
    }
    // The declared name.
    if i >= code.len() || code[i].kind != TokenKind::Identifier {
        return None;
    }
    let mut type_tokens: Vec<&str> = Vec::new();
    if let Some(prefix) = type_struct_prefix {
        type_tokens.push(prefix.text.as_str());
    }
    type_tokens.extend(code[type_start..i].iter().map(|t| t.text.as_str()));
    let type_text = render_type(&type_tokens);

    let mut decls = Vec::new();
    loop {
        let name = &code[i];
        if name.kind != TokenKind::Identifier {
            break;
        }
        let after = code.get(i + 1).map(|t| t.text.as_str());
        match after {
            Some("=" | ";" | ":" | ")") | None => {
                decls.push(Declaration {
                    type_text: type_text.clone(),
                    name: name.text.clone(),
                });
                break;
            }
            Some(",") => {
                decls.push(Declaration {
                    type_text: type_text.clone(),
                    name: name.text.clone(),
                });
                i += 2;
            }
            _ => break,
        }
    }
    if decls.is_empty() {
        None
    } else {
        Some(decls)
    }
}

/// A `class`/`interface`/`enum` body in a file, located by brace matching.
#[derive(Debug, Clone)]
pub struct ClassRegion {
    pub name: String,
    pub start_line: u32,
    pub end_line: u32,
}

pub fn class_regions(file: &SourceFile) -> Vec<ClassRegion> {
    let tokens: Vec<Token> = tokenize(&file.content());
    let code: Vec<&Token> = tokens.iter().filter(|t| t.is_code()).collect();
    let mut regions = Vec::new();
    for (i, tok) in code.iter().enumerate() {
        if tok.kind != TokenKind::Keyword
            || !matches!(tok.text.as_str(), "class" | "interface" | "enum")
        {
            continue;
        }
        let name = match code.get(i + 1) {
            Some(t) if t.kind == TokenKind::Identifier => t.text.clone(),
            _ => continue,
        };
        // Skip extends/implements up to the body brace.
        let mut j = i + 2;
        let mut open = None;
        while j < code.len() {
            match code[j].text.as_str() {
                "{" => {
                    open = Some(j);
                    break;
                }
                ";" | "}" => break,
                _ => j += 1,
            }
        }
        let Some(open) = open else { continue };
        let mut depth = 0i32;
        for t in code.iter().skip(open) {
            match t.text.as_str() {
                "{" => depth += 1,
                "}" => {
                    depth -= 1;
                    if depth == 0 {
                        regions.push(ClassRegion {
                            name,
                            start_line: tok.line,
                            end_line: t.line,
                        });
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    regions
}

/// Parameter names declared by a function signature.
pub fn signature_params(signature_text: &str) -> Vec<Declaration> {
    let tokens: Vec<Token> = tokenize(signature_text)
        .into_iter()
        .filter(Token::is_code)
        .collect();
    let open = match tokens.iter().position(|t| t.text == "(") {
        Some(i) => i,
        None => return Vec::new(),
    };
    let mut depth = 0i32;
    let mut close = tokens.len();
    for (i, t) in tokens.iter().enumerate().skip(open) {
        match t.text.as_str() {
            "(" => depth += 1,
            ")" => {
                depth -= 1;
                if depth == 0 {
                    close = i;
                    break;
                }
            }
            _ => {}
        }
    }
    let mut params = Vec::new();
    let mut segment_start = open + 1;
    let mut level = 0i32;
    for i in open + 1..=close {
        let at_end = i == close;
        let text = tokens.get(i).map(|t| t.text.as_str()).unwrap_or(")");
        match text {
            "(" | "<" | "[" => level += 1,
            ")" | ">" | "]" if !at_end => level -= 1,
            _ => {}
        }
        if at_end || (text == "," && level == 0) {
            let segment = &tokens[segment_start..i];
            // Last identifier in the segment is the parameter name; what
            // precedes it renders as the type.
            if let Some(name_idx) = segment.iter().rposition(|t| t.kind == TokenKind::Identifier)
            {
                if name_idx > 0 {
                    let type_tokens: Vec<&str> = segment[..name_idx]
                        .iter()
                        .filter(|t| !is_decl_modifier(t) || t.text == "struct")
                        .map(|t| t.text.as_str())
                        .collect();
                    params.push(Declaration {
                        type_text: render_type(&type_tokens),
                        name: segment[name_idx].text.clone(),
                    });
                }
            }
            segment_start = i + 1;
        }
    }
    params
}

/// Names imported at the top of the file (`import a.b.C;` brings in `C`,
/// `import static a.b.C.m;` brings in `m`).
pub fn imported_names(file: &SourceFile) -> Vec<String> {
    let mut names = Vec::new();
    for line in &file.lines {
        let code: Vec<Token> = tokenize(line).into_iter().filter(Token::is_code).collect();
        if code.first().map(|t| t.text.as_str()) != Some("import") {
            continue;
        }
        let last_ident = code
            .iter()
            .rev()
            .find(|t| t.kind == TokenKind::Identifier && t.text != "static");
        if let Some(t) = last_ident {
            names.push(t.text.clone());
        }
    }
    names
}

fn line_code_tokens(file: &SourceFile, line_no: u32) -> Vec<Token> {
    file.line(line_no)
        .map(|text| tokenize(text).into_iter().filter(Token::is_code).collect())
        .unwrap_or_default()
}

/// Names in scope at `(file, buggy_line_no)`: enclosing-scope fields and
/// functions, the enclosing function's parameters, locals declared on earlier
/// lines, and imports.
pub fn find_accessible_ids(
    corpus: &ProjectCorpus,
    file: &str,
    buggy_line_no: u32,
) -> Result<BTreeSet<String>> {
    let source = corpus
        .file(file)
        .ok_or_else(|| Error::StageInput(format!("file {file} not in corpus")))?;
    let enclosing = corpus
        .function_at(file, buggy_line_no)
        .ok_or_else(|| Error::OutsideFunction {
            file: file.to_string(),
            line: buggy_line_no,
        })?;

    let mut names = BTreeSet::new();

    // Enclosing scope: the innermost class containing the line, or the whole
    // file when no class headers exist (C sources).
    let regions = class_regions(source);
    let scope: Option<&ClassRegion> = regions
        .iter()
        .filter(|r| r.start_line <= buggy_line_no && buggy_line_no <= r.end_line)
        .min_by_key(|r| r.end_line - r.start_line);
    let (scope_start, scope_end) = match scope {
        Some(r) => {
            names.insert(r.name.clone());
            (r.start_line, r.end_line)
        }
        None => (1, source.lines.len() as u32),
    };
    let nested: Vec<&ClassRegion> = regions
        .iter()
        .filter(|r| {
            r.start_line > scope_start
                && r.end_line < scope_end
                && !(r.start_line <= buggy_line_no && buggy_line_no <= r.end_line)
        })
        .collect();
    let in_nested =
        |line: u32| nested.iter().any(|r| r.start_line <= line && line <= r.end_line);

    // Member functions of the scope, plus every method name the scope
    // already invokes somewhere: a call site in the enclosing class means
    // the method is reachable there (its receiver is), even when the method
    // itself is declared in another file.
    let scope_functions: Vec<&FunctionUnit> = corpus
        .functions_in(file)
        .filter(|f| f.start_line >= scope_start && f.end_line <= scope_end)
        .filter(|f| !in_nested(f.start_line))
        .collect();
    for f in &scope_functions {
        names.insert(f.name.clone());
        for tok in f.code_tokens() {
            if tok.call_candidate && tok.kind == TokenKind::Identifier {
                names.insert(tok.text.clone());
            }
        }
    }

    // Fields: scope-level declaration lines outside member functions.
    let in_function = |line: u32| {
        corpus
            .functions_in(file)
            .any(|f| f.start_line <= line && line <= f.end_line)
    };
    for line_no in scope_start..=scope_end {
        if in_function(line_no) || in_nested(line_no) {
            continue;
        }
        for decl in scan_declarations(&line_code_tokens(source, line_no)) {
            names.insert(decl.name);
        }
    }

    // Parameters of the enclosing function.
    for p in signature_params(&enclosing.signature_text) {
        names.insert(p.name);
    }

    // Locals declared on earlier lines of the enclosing function.
    for line_no in enclosing.body_open_line..buggy_line_no {
        for decl in scan_declarations(&line_code_tokens(source, line_no)) {
            names.insert(decl.name);
        }
    }

    // Imports.
    for name in imported_names(source) {
        names.insert(name);
    }

    Ok(names)
}

/// Type information for one identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeInfo {
    pub type_text: Option<String>,
    pub is_method: bool,
    /// Multiple declarations with differing types; the first in file order
    /// won.
    pub ambiguous: bool,
}

/// Return type of a function, parsed from its signature text.
pub fn return_type(signature_text: &str) -> Option<String> {
    let code: Vec<Token> = tokenize(signature_text)
        .into_iter()
        .filter(Token::is_code)
        .collect();
    // The method name is the identifier right before the parameter paren.
    let open = code.iter().position(|t| t.text == "(")?;
    if open == 0 {
        return None;
    }
    let name_idx = open - 1;
    let mut type_tokens: Vec<&str> = Vec::new();
    let mut i = 0usize;
    while i < name_idx {
        let tok = &code[i];
        if tok.text == "@" {
            // Skip annotation: @Name or @Name(...)
            i += 2;
            if i < name_idx && code[i].text == "(" {
                let mut depth = 0i32;
                while i < name_idx {
                    match code[i].text.as_str() {
                        "(" => depth += 1,
                        ")" => {
                            depth -= 1;
                            if depth == 0 {
                                i += 1;
                                break;
                            }
                        }
                        _ => {}
                    }
                    i += 1;
                }
            }
            continue;
        }
        if is_decl_modifier(tok) && tok.text != "struct" && tok.text != "union" {
            i += 1;
            continue;
        }
        type_tokens.push(tok.text.as_str());
        i += 1;
    }
    if type_tokens.is_empty() {
        None
    } else {
        Some(render_type(&type_tokens))
    }
}

/// Find declared types for `names`, searching `prefer_file` first and then
/// the rest of the corpus in file order. Methods resolve to their return
/// type, variables to their declared type.
pub fn find_type_info(
    corpus: &ProjectCorpus,
    names: &[(String, bool)],
    prefer_file: &str,
) -> std::collections::BTreeMap<String, TypeInfo> {
    let mut ordered_files: Vec<&SourceFile> = Vec::new();
    if let Some(f) = corpus.file(prefer_file) {
        ordered_files.push(f);
    }
    for f in &corpus.files {
        if f.relative_path != prefer_file {
            ordered_files.push(f);
        }
    }

    let mut out = std::collections::BTreeMap::new();
    for (name, is_method) in names {
        let info = if *is_method {
            resolve_method(corpus, name, prefer_file)
        } else {
            resolve_variable(&ordered_files, corpus, name)
        };
        out.insert(name.clone(), info);
    }
    out
}

fn resolve_method(corpus: &ProjectCorpus, name: &str, prefer_file: &str) -> TypeInfo {
    let mut decls: Vec<&FunctionUnit> = corpus
        .functions
        .iter()
        .filter(|f| f.name == name)
        .collect();
    decls.sort_by_key(|f| (f.file != prefer_file, f.file.clone(), f.start_line));
    let mut types = decls.iter().filter_map(|f| return_type(&f.signature_text));
    match types.next() {
        None => TypeInfo {
            type_text: None,
            is_method: true,
            ambiguous: false,
        },
        Some(first) => {
            let ambiguous = types.any(|t| t != first);
            TypeInfo {
                type_text: Some(first),
                is_method: true,
                ambiguous,
            }
        }
    }
}

fn resolve_variable(
    ordered_files: &[&SourceFile],
    corpus: &ProjectCorpus,
    name: &str,
) -> TypeInfo {
    let mut found: Option<String> = None;
    let mut ambiguous = false;
    for file in ordered_files {
        for (idx, _) in file.lines.iter().enumerate() {
            let line_no = (idx + 1) as u32;
            for decl in scan_declarations(&line_code_tokens(file, line_no)) {
                if decl.name == name {
                    match &found {
                        None => found = Some(decl.type_text),
                        Some(first) if *first != decl.type_text => ambiguous = true,
                        _ => {}
                    }
                }
            }
        }
        // Parameters also declare variables.
        for f in corpus.functions_in(&file.relative_path) {
            for p in signature_params(&f.signature_text) {
                if p.name == name {
                    match &found {
                        None => found = Some(p.type_text),
                        Some(first) if *first != p.type_text => ambiguous = true,
                        _ => {}
                    }
                }
            }
        }
        if found.is_some() {
            break;
        }
    }
    TypeInfo {
        type_text: found,
        is_method: false,
        ambiguous,
    }
}
