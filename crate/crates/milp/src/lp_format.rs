//! CPLEX-style LP text format.
//!
//! The writer lists every variable in the objective (zero costs included) so
//! that variable order survives a round trip. Numbers use Rust's shortest
//! round-trip representation. Branching priorities, the objective offset and
//! the model name travel as structured comments.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{LpFormatError, ModelError};
use crate::model::{MilpModel, Sense, VarKind, Variable};

const MAX_NAME_LEN: usize = 255;
const TERMS_PER_LINE: usize = 8;

const RESERVED: &[&str] = &[
    "minimize", "minimise", "minimum", "min", "maximize", "maximise", "maximum", "max",
    "subject", "such", "st", "s.t.", "st.", "bounds", "bound", "binary", "binaries", "bin",
    "general", "generals", "gen", "end", "free", "inf", "infinity",
];

fn allowed_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_.!#$%&(){}?@'~|".contains(c)
}

/// Whether `name` can be written verbatim as an LP identifier.
pub fn is_lp_name(name: &str) -> bool {
    let Some(first) = name.chars().next() else {
        return false;
    };
    if name.len() > MAX_NAME_LEN || first.is_ascii_digit() || first == '.' {
        return false;
    }
    let mut chars = name.chars();
    if matches!(chars.next(), Some('e' | 'E'))
        && matches!(chars.next(), Some(c) if c.is_ascii_digit())
    {
        return false;
    }
    if RESERVED.contains(&name.to_ascii_lowercase().as_str()) {
        return false;
    }
    name.chars().all(allowed_char)
}

/// Replaces characters that the LP format does not accept with `_` and
/// prefixes names that would otherwise be ambiguous.
pub fn sanitize_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if allowed_char(c) { c } else { '_' })
        .collect();
    if !is_lp_name(&out) {
        out.insert(0, '_');
    }
    out
}

/// Copy of `model` with every name made LP-safe. Two names that sanitize to
/// the same identifier are an error.
pub fn sanitized(model: &MilpModel) -> Result<MilpModel, ModelError> {
    model.validate()?;
    let mut out = model.clone();
    let mut seen = HashSet::new();
    for v in &mut out.vars {
        if !is_lp_name(&v.name) {
            v.name = sanitize_name(&v.name);
        }
        if v.name.len() > MAX_NAME_LEN {
            return Err(ModelError::InvalidName(v.name.clone()));
        }
        if !seen.insert(v.name.clone()) {
            return Err(ModelError::DuplicateName(v.name.clone()));
        }
    }
    seen.clear();
    seen.insert("obj".to_string());
    for c in &mut out.constraints {
        if !is_lp_name(&c.name) {
            c.name = sanitize_name(&c.name);
        }
        if c.name.len() > MAX_NAME_LEN {
            return Err(ModelError::InvalidName(c.name.clone()));
        }
        if !seen.insert(c.name.clone()) {
            return Err(ModelError::DuplicateName(c.name.clone()));
        }
    }
    Ok(out)
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v)
    } else {
        format!("{:?}", v)
    }
}

fn push_term(out: &mut String, coef: f64, name: &str) {
    let sign = if coef < 0.0 { "-" } else { "+" };
    let mag = coef.abs();
    if mag == 1.0 {
        let _ = write!(out, " {sign} {name}");
    } else {
        let _ = write!(out, " {sign} {} {name}", num(mag));
    }
}

/// Renders `model` as LP text. Names must already be LP-safe; see
/// [`sanitized`].
pub fn to_lp_string(model: &MilpModel) -> Result<String, LpFormatError> {
    model.validate()?;
    for name in model
        .vars
        .iter()
        .map(|v| &v.name)
        .chain(model.constraints.iter().map(|c| &c.name))
    {
        if !is_lp_name(name) {
            return Err(ModelError::InvalidName(name.clone()).into());
        }
    }
    if model.vars.is_empty() {
        return Err(ModelError::InvalidName("<model has no variables>".into()).into());
    }
    let mut out = String::new();
    let _ = writeln!(out, "\\ model {}", model.name);
    if model.objective_offset != 0.0 {
        let _ = writeln!(out, "\\ offset {:?}", model.objective_offset);
    }
    for (family, p) in &model.branch_priority {
        let _ = writeln!(out, "\\ priority {family} {p}");
    }
    out.push_str("Minimize\n obj:");
    for (i, v) in model.vars.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        push_term(&mut out, v.cost, &v.name);
    }
    out.push_str("\nSubject To\n");
    let placeholder = &model.vars[0].name;
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        if c.terms.is_empty() {
            let _ = write!(out, " + 0 {placeholder}");
        }
        for (i, (v, coef)) in c.terms.iter().enumerate() {
            if i > 0 && i % TERMS_PER_LINE == 0 {
                out.push_str("\n   ");
            }
            push_term(&mut out, *coef, &model.vars[v.0].name);
        }
        let _ = writeln!(out, " {} {}", c.sense.symbol(), num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.vars {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, num(v.lower));
        } else if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
        }
    }
    let binaries: Vec<&str> = model
        .vars
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    Ok(out)
}

/// Writes `model` to `path` after sanitizing its names. Returns the model as
/// written, whose names are the ones an external solution file will use.
pub fn export_model(model: &MilpModel, path: &Path) -> Result<MilpModel, LpFormatError> {
    let safe = sanitized(model)?;
    let text = to_lp_string(&safe)?;
    fs::write(path, text).map_err(|source| LpFormatError::Write {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(safe)
}

pub fn read_lp(path: &Path) -> Result<MilpModel, LpFormatError> {
    let text = fs::read_to_string(path).map_err(|source| LpFormatError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_lp(&text)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Colon,
    Rel(Sense),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_keyword(line: &str) -> Option<(Section, bool)> {
    let lower = line.trim().to_ascii_lowercase();
    let compact: String = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    Some(match compact.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => (Section::Objective, false),
        "maximize" | "maximise" | "maximum" | "max" => (Section::Objective, true),
        "subject to" | "such that" | "st" | "s.t." | "st." => (Section::Constraints, false),
        "bounds" | "bound" => (Section::Bounds, false),
        "binary" | "binaries" | "bin" => (Section::Binaries, false),
        "general" | "generals" | "gen" => (Section::Generals, false),
        "end" => (Section::End, false),
        _ => return None,
    })
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<(Tok, usize)>, LpFormatError> {
    let bytes: Vec<char> = line.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '\\' {
            break;
        }
        match c {
            '+' => {
                toks.push((Tok::Plus, line_no));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, line_no));
                i += 1;
            }
            ':' => {
                toks.push((Tok::Colon, line_no));
                i += 1;
            }
            '<' | '>' | '=' => {
                let mut j = i + 1;
                if j < bytes.len() && matches!(bytes[j], '=' | '<' | '>') {
                    j += 1;
                }
                let op: String = bytes[i..j].iter().collect();
                let sense = match op.as_str() {
                    "<" | "<=" | "=<" => Sense::Le,
                    ">" | ">=" | "=>" => Sense::Ge,
                    "=" => Sense::Eq,
                    _ => {
                        return Err(LpFormatError::Parse {
                            line: line_no,
                            message: format!("unknown operator `{op}`"),
                        })
                    }
                };
                toks.push((Tok::Rel(sense), line_no));
                i = j;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == '.') {
                    j += 1;
                }
                if j < bytes.len() && matches!(bytes[j], 'e' | 'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && matches!(bytes[k], '+' | '-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text: String = bytes[i..j].iter().collect();
                let v: f64 = text.parse().map_err(|_| LpFormatError::Parse {
                    line: line_no,
                    message: format!("bad number `{text}`"),
                })?;
                toks.push((Tok::Num(v), line_no));
                i = j;
            }
            c if allowed_char(c) => {
                let mut j = i;
                while j < bytes.len() && allowed_char(bytes[j]) {
                    j += 1;
                }
                let text: String = bytes[i..j].iter().collect();
                match text.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" => toks.push((Tok::Num(f64::INFINITY), line_no)),
                    _ => toks.push((Tok::Name(text), line_no)),
                }
                i = j;
            }
            other => {
                return Err(LpFormatError::Parse {
                    line: line_no,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Builder {
    model: MilpModel,
    index: HashMap<String, usize>,
    explicit_bounds: HashSet<usize>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.model.vars.push(Variable {
            name: name.to_string(),
            lower: 0.0,
            upper: f64::INFINITY,
            kind: VarKind::Continuous,
            cost: 0.0,
        });
        let i = self.model.vars.len() - 1;
        self.index.insert(name.to_string(), i);
        i
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> LpFormatError {
    LpFormatError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses `coef name` terms until a relational operator or the end of input.
/// Returns the terms and the index of the first unconsumed token.
fn parse_expr(
    toks: &[(Tok, usize)],
    mut pos: usize,
    b: &mut Builder,
) -> Result<(Vec<(usize, f64)>, usize), LpFormatError> {
    let mut terms = Vec::new();
    while pos < toks.len() {
        if matches!(toks[pos].0, Tok::Rel(_)) {
            break;
        }
        let line = toks[pos].1;
        let mut sign = 1.0;
        while let Some((t, _)) = toks.get(pos) {
            match t {
                Tok::Plus => pos += 1,
                Tok::Minus => {
                    sign = -sign;
                    pos += 1;
                }
                _ => break,
            }
        }
        let mut coef = 1.0;
        if let Some((Tok::Num(v), _)) = toks.get(pos) {
            coef = *v;
            pos += 1;
        }
        match toks.get(pos) {
            Some((Tok::Name(n), _)) => {
                let i = b.var(n);
                terms.push((i, sign * coef));
                pos += 1;
            }
            Some((Tok::Rel(_), _)) | None => {
                return Err(parse_err(line, "constant terms are not supported"))
            }
            Some((t, l)) => return Err(parse_err(*l, format!("unexpected token {t:?}"))),
        }
    }
    Ok((terms, pos))
}

fn parse_signed(toks: &[(Tok, usize)], mut pos: usize) -> Option<(f64, usize)> {
    let mut sign = 1.0;
    loop {
        match toks.get(pos)? {
            (Tok::Plus, _) => pos += 1,
            (Tok::Minus, _) => {
                sign = -sign;
                pos += 1;
            }
            (Tok::Num(v), _) => return Some((sign * v, pos + 1)),
            _ => return None,
        }
    }
}

fn strip_label(toks: &[(Tok, usize)]) -> (Option<String>, usize) {
    match (toks.first(), toks.get(1)) {
        (Some((Tok::Name(n), _)), Some((Tok::Colon, _))) => (Some(n.clone()), 2),
        _ => (None, 0),
    }
}

fn parse_objective(toks: &[(Tok, usize)], maximize: bool, b: &mut Builder) -> Result<(), LpFormatError> {
    let (_, start) = strip_label(toks);
    let (terms, end) = parse_expr(toks, start, b)?;
    if end != toks.len() {
        return Err(parse_err(toks[end].1, "relational operator in objective"));
    }
    for (i, c) in terms {
        b.model.vars[i].cost += if maximize { -c } else { c };
    }
    Ok(())
}

fn parse_constraints(toks: &[(Tok, usize)], b: &mut Builder) -> Result<(), LpFormatError> {
    let mut pos = 0;
    let mut count = 0usize;
    while pos < toks.len() {
        let (label, skip) = strip_label(&toks[pos..]);
        pos += skip;
        let (terms, next) = parse_expr(toks, pos, b)?;
        let Some((Tok::Rel(sense), line)) = toks.get(next).cloned() else {
            let line = toks.get(pos).map_or(0, |t| t.1);
            return Err(parse_err(line, "constraint without relational operator"));
        };
        let (rhs, after) =
            parse_signed(toks, next + 1).ok_or_else(|| parse_err(line, "missing right-hand side"))?;
        count += 1;
        let name = label.unwrap_or_else(|| format!("R{count}"));
        let terms: Vec<_> = terms
            .into_iter()
            .map(|(i, c)| (crate::model::VarId(i), c))
            .collect();
        b.model.add_constraint(name, terms, sense, rhs);
        pos = after;
    }
    Ok(())
}

fn parse_bound_line(toks: &[(Tok, usize)], b: &mut Builder) -> Result<(), LpFormatError> {
    let line = toks[0].1;
    let bad = || parse_err(line, "malformed bound");
    // `x free`
    if let [(Tok::Name(n), _), (Tok::Name(kw), _)] = toks {
        if kw.eq_ignore_ascii_case("free") {
            let i = b.var(n);
            b.model.vars[i].lower = f64::NEG_INFINITY;
            b.model.vars[i].upper = f64::INFINITY;
            b.explicit_bounds.insert(i);
            return Ok(());
        }
        return Err(bad());
    }
    // `l <= x [<= u]` or `l >= x`
    if let Some((lhs, pos)) = parse_signed(toks, 0) {
        let (Some((Tok::Rel(s1), _)), Some((Tok::Name(n), _))) = (toks.get(pos), toks.get(pos + 1))
        else {
            return Err(bad());
        };
        let i = b.var(n);
        b.explicit_bounds.insert(i);
        apply_bound(&mut b.model.vars[i], flip(*s1), lhs);
        let rest = pos + 2;
        if rest < toks.len() {
            let Some((Tok::Rel(s2), _)) = toks.get(rest) else {
                return Err(bad());
            };
            let (rhs, end) = parse_signed(toks, rest + 1).ok_or_else(bad)?;
            if end != toks.len() {
                return Err(bad());
            }
            apply_bound(&mut b.model.vars[i], *s2, rhs);
        }
        return Ok(());
    }
    // `x <= u`, `x >= l`, `x = v`
    if let [(Tok::Name(n), _), (Tok::Rel(s), _), ..] = toks {
        let (v, end) = parse_signed(toks, 2).ok_or_else(bad)?;
        if end != toks.len() {
            return Err(bad());
        }
        let i = b.var(n);
        b.explicit_bounds.insert(i);
        apply_bound(&mut b.model.vars[i], *s, v);
        return Ok(());
    }
    Err(bad())
}

fn flip(s: Sense) -> Sense {
    match s {
        Sense::Le => Sense::Ge,
        Sense::Ge => Sense::Le,
        Sense::Eq => Sense::Eq,
    }
}

/// Applies `x <sense> v`.
fn apply_bound(var: &mut Variable, sense: Sense, v: f64) {
    match sense {
        Sense::Le => var.upper = v,
        Sense::Ge => var.lower = v,
        Sense::Eq => {
            var.lower = v;
            var.upper = v;
        }
    }
}

/// Parses LP text produced by [`to_lp_string`] or any file using the same
/// subset of the format (single objective, linear rows, bounds, binaries).
pub fn parse_lp(text: &str) -> Result<MilpModel, LpFormatError> {
    let mut b = Builder {
        model: MilpModel::new(""),
        index: HashMap::new(),
        explicit_bounds: HashSet::new(),
    };
    let mut priorities = BTreeMap::new();
    let mut section = Section::Preamble;
    let mut maximize = false;
    let mut buffers: BTreeMap<u8, Vec<(Tok, usize)>> = BTreeMap::new();
    let mut bound_lines: Vec<Vec<(Tok, usize)>> = Vec::new();
    let mut binaries: Vec<(String, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix('\\') {
            let mut parts = comment.split_whitespace();
            match parts.next() {
                Some("model") => b.model.name = parts.collect::<Vec<_>>().join(" "),
                Some("offset") => {
                    let v = parts.next().and_then(|s| s.parse::<f64>().ok());
                    b.model.objective_offset = v.ok_or_else(|| parse_err(line_no, "bad offset"))?;
                }
                Some("priority") => {
                    let fam = parts.next();
                    let p = parts.next().and_then(|s| s.parse::<u8>().ok());
                    match (fam, p) {
                        (Some(f), Some(p)) => {
                            priorities.insert(f.to_string(), p);
                        }
                        _ => return Err(parse_err(line_no, "bad priority comment")),
                    }
                }
                _ => {}
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        if let Some((s, max)) = section_keyword(trimmed) {
            section = s;
            if s == Section::Objective {
                maximize = max;
            }
            continue;
        }
        let toks = tokenize(raw, line_no)?;
        match section {
            Section::Preamble => return Err(parse_err(line_no, "content before objective section")),
            Section::Objective => buffers.entry(0).or_default().extend(toks),
            Section::Constraints => buffers.entry(1).or_default().extend(toks),
            Section::Bounds => {
                if !toks.is_empty() {
                    bound_lines.push(toks);
                }
            }
            Section::Binaries => {
                for (t, l) in toks {
                    match t {
                        Tok::Name(n) => binaries.push((n, l)),
                        _ => return Err(parse_err(l, "expected variable name in binaries")),
                    }
                }
            }
            Section::Generals => {
                return Err(parse_err(line_no, "general integer variables are not supported"))
            }
            Section::End => return Err(parse_err(line_no, "content after End")),
        }
    }

    if let Some(obj) = buffers.get(&0) {
        parse_objective(obj, maximize, &mut b)?;
    }
    if let Some(rows) = buffers.get(&1) {
        parse_constraints(rows, &mut b)?;
    }
    for line in &bound_lines {
        parse_bound_line(line, &mut b)?;
    }
    for (n, _) in &binaries {
        let i = b.var(n);
        let v = &mut b.model.vars[i];
        v.kind = VarKind::Binary;
        if !b.explicit_bounds.contains(&i) {
            v.lower = 0.0;
            v.upper = 1.0;
        }
    }
    b.model.branch_priority = priorities;
    b.model.validate()?;
    Ok(b.model)
}
