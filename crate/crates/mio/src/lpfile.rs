//! Reading and writing models in the CPLEX-style LP text format.
//!
//! The writer emits one `Bounds` line per variable so the variable order and
//! every bound survive a round trip. The reader accepts the common subset of
//! the format: a `Minimize` objective (constants allowed), `Subject To` rows
//! that may wrap across lines, `Bounds`, `Binary`, and `End`. Comments start
//! with a backslash.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::LpFileError;
use crate::model::{MioModel, Sense, VarId, VarKind};

/// Renders `model` as LP text.
pub fn write_lp_string(model: &MioModel) -> String {
    let vnames = unique_names(model.variables().iter().map(|v| v.name.as_str()), "x");
    let rnames = unique_names(model.constraints().iter().map(|c| c.name.as_str()), "r");
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let obj = model.objective();
    write_terms(&mut out, obj.terms.iter().map(|&(v, c)| (c, vnames[v.0].as_str())));
    if obj.constant != 0.0 {
        write_signed(&mut out, obj.constant);
    }
    out.push_str("\nSubject To\n");
    for (c, name) in model.constraints().iter().zip(&rnames) {
        let _ = write!(out, " {name}:");
        write_terms(&mut out, c.coefficients.iter().map(|&(v, a)| (a, vnames[v.0].as_str())));
        if c.coefficients.is_empty() {
            out.push_str(" 0 ");
            out.push_str(&vnames[0]);
        }
        let _ = writeln!(out, " {} {}", c.sense.symbol(), fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables().iter().zip(&vnames) {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", fmt_num(v.lower), fmt_num(v.upper));
        }
    }
    let bins: Vec<&str> = model
        .variables()
        .iter()
        .zip(&vnames)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binary\n");
        for chunk in bins.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

pub fn export_lp_file(model: &MioModel, path: impl AsRef<Path>) -> Result<(), LpFileError> {
    std::fs::write(path, write_lp_string(model))?;
    Ok(())
}

pub fn read_lp_file(path: impl AsRef<Path>) -> Result<MioModel, LpFileError> {
    let text = std::fs::read_to_string(path)?;
    parse_lp_str(&text)
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn write_signed(out: &mut String, v: f64) {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        let _ = write!(out, " - {}", fmt_num(-v));
    } else {
        let _ = write!(out, " + {}", fmt_num(v));
    }
}

fn write_terms<'a>(out: &mut String, terms: impl Iterator<Item = (f64, &'a str)>) {
    for (i, (c, name)) in terms.enumerate() {
        if i > 0 && i % 8 == 0 {
            out.push_str("\n   ");
        }
        write_signed(out, c);
        out.push(' ');
        out.push_str(name);
    }
}

fn valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    let lower = s.to_ascii_lowercase();
    if RESERVED.contains(&lower.as_str()) {
        return false;
    }
    s.chars().all(is_name_char)
}

const RESERVED: &[&str] = &[
    "inf", "infinity", "free", "end", "min", "minimize", "minimise", "minimum", "max", "maximize",
    "maximise", "maximum", "st", "s.t.", "subject", "such", "bound", "bounds", "bin", "binary",
    "binaries", "gen", "general", "generals", "integer", "integers",
];

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']' | '#' | '$' | '@')
}

/// Makes names valid LP identifiers and unique, keeping valid ones as-is.
fn unique_names<'a>(names: impl Iterator<Item = &'a str>, prefix: &str) -> Vec<String> {
    let names: Vec<&str> = names.collect();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for n in &names {
        if valid_name(n) {
            *seen.entry((*n).to_string()).or_default() += 1;
        }
    }
    let mut taken: std::collections::HashSet<String> = seen.keys().cloned().collect();
    names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            if valid_name(n) && seen[*n] == 1 {
                return (*n).to_string();
            }
            let mut k = i;
            loop {
                let cand = format!("{prefix}{k}");
                if !taken.contains(&cand) {
                    taken.insert(cand.clone());
                    return cand;
                }
                k += names.len();
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(String),
    Plus,
    Minus,
    Colon,
    Other(char),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Binary,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, LpFileError> {
    let mut toks = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('\\').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let s = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit: String = chars[s..i].iter().collect();
                let v = lit
                    .parse::<f64>()
                    .map_err(|_| LpFileError::parse(line_no, format!("invalid number `{lit}`")))?;
                toks.push((line_no, Tok::Num(v)));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let s = i;
                while i < chars.len() && is_name_char(chars[i]) {
                    i += 1;
                }
                toks.push((line_no, Tok::Name(chars[s..i].iter().collect())));
            } else if matches!(c, '<' | '>' | '=' | '!') {
                let s = i;
                while i < chars.len() && matches!(chars[i], '<' | '>' | '=' | '!') {
                    i += 1;
                }
                toks.push((line_no, Tok::Op(chars[s..i].iter().collect())));
            } else {
                let t = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    ':' => Tok::Colon,
                    other => Tok::Other(other),
                };
                toks.push((line_no, t));
                i += 1;
            }
        }
    }
    Ok(toks)
}

fn parse_sense(op: &str) -> Option<Sense> {
    match op {
        "<=" | "=<" | "<" => Some(Sense::Le),
        ">=" | "=>" | ">" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

fn is_inf(name: &str) -> bool {
    matches!(name.to_ascii_lowercase().as_str(), "inf" | "infinity")
}

struct RowData {
    name: String,
    terms: Vec<(String, f64)>,
    sense: Sense,
    rhs: f64,
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(_, t)| t)
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(1, |(l, _)| *l)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn err(&self, msg: impl Into<String>) -> LpFileError {
        LpFileError::parse(self.line(), msg)
    }

    /// Recognizes a section keyword at the cursor and consumes it.
    fn section_keyword(&mut self) -> Result<Option<Section>, LpFileError> {
        let Some(Tok::Name(n)) = self.peek() else {
            return Ok(None);
        };
        if matches!(self.peek_at(1), Some(Tok::Colon)) {
            return Ok(None);
        }
        let lower = n.to_ascii_lowercase();
        let next_lower = match self.peek_at(1) {
            Some(Tok::Name(m)) => m.to_ascii_lowercase(),
            _ => String::new(),
        };
        let (sec, width) = match lower.as_str() {
            "minimize" | "minimise" | "minimum" | "min" => (Section::Objective, 1),
            "maximize" | "maximise" | "maximum" | "max" => {
                return Err(self.err("maximization is not supported; negate the objective"))
            }
            "subject" | "such" if next_lower == "to" || next_lower == "that" => (Section::Constraints, 2),
            "st" | "s.t." => (Section::Constraints, 1),
            "bounds" | "bound" => (Section::Bounds, 1),
            "binary" | "binaries" | "bin" => (Section::Binary, 1),
            "general" | "generals" | "gen" | "integer" | "integers" => {
                return Err(self.err("general integer variables are not supported"))
            }
            "end" => (Section::End, 1),
            _ => return Ok(None),
        };
        self.pos += width;
        Ok(Some(sec))
    }

    fn at_section_start(&mut self) -> bool {
        let save = self.pos;
        let r = matches!(self.section_keyword(), Ok(Some(_)) | Err(_));
        self.pos = save;
        r
    }

    /// Parses `[+|-] [num] [name]` terms until a sense operator or a section.
    fn expression(&mut self, stop_at_sense: bool) -> Result<(Vec<(String, f64)>, f64), LpFileError> {
        let mut terms = Vec::new();
        let mut constant = 0.0;
        loop {
            if self.peek().is_none() || self.at_section_start() {
                break;
            }
            if stop_at_sense && matches!(self.peek(), Some(Tok::Op(_))) {
                break;
            }
            if !stop_at_sense && matches!(self.peek_at(1), Some(Tok::Colon)) {
                break;
            }
            let mut sign = 1.0;
            let mut saw_sign = false;
            while let Some(t) = self.peek() {
                match t {
                    Tok::Plus => {}
                    Tok::Minus => sign = -sign,
                    _ => break,
                }
                saw_sign = true;
                self.pos += 1;
            }
            match self.peek().cloned() {
                Some(Tok::Num(v)) => {
                    self.pos += 1;
                    match self.peek().cloned() {
                        Some(Tok::Name(n)) if !self.at_section_start() && !matches!(self.peek_at(1), Some(Tok::Colon)) => {
                            self.pos += 1;
                            terms.push((n, sign * v));
                        }
                        _ => constant += sign * v,
                    }
                }
                Some(Tok::Name(n)) => {
                    self.pos += 1;
                    terms.push((n, sign));
                }
                Some(Tok::Op(op)) if !stop_at_sense => {
                    return Err(self.err(format!("unexpected operator `{op}` in objective")))
                }
                Some(other) => {
                    return Err(self.err(format!("unexpected token {other:?} in expression")))
                }
                None if saw_sign => return Err(self.err("dangling sign at end of input")),
                None => break,
            }
        }
        Ok((terms, constant))
    }

    fn signed_value(&mut self) -> Result<f64, LpFileError> {
        let mut sign = 1.0;
        loop {
            match self.peek() {
                Some(Tok::Plus) => self.pos += 1,
                Some(Tok::Minus) => {
                    sign = -sign;
                    self.pos += 1
                }
                _ => break,
            }
        }
        match self.next() {
            Some(Tok::Num(v)) => Ok(sign * v),
            Some(Tok::Name(n)) if is_inf(&n) => Ok(sign * f64::INFINITY),
            _ => {
                self.pos -= 1;
                Err(self.err("expected a number"))
            }
        }
    }

    fn sense(&mut self) -> Result<Sense, LpFileError> {
        match self.next() {
            Some(Tok::Op(op)) => parse_sense(&op).ok_or_else(|| {
                self.pos -= 1;
                self.err(format!("malformed constraint sense `{op}`"))
            }),
            Some(other) => {
                self.pos -= 1;
                Err(self.err(format!("expected a constraint sense, found {other:?}")))
            }
            None => Err(self.err("expected a constraint sense, found end of input")),
        }
    }

    fn row(&mut self, index: usize) -> Result<RowData, LpFileError> {
        let mut name = format!("r{index}");
        if let (Some(Tok::Name(n)), Some(Tok::Colon)) = (self.peek().cloned(), self.peek_at(1)) {
            name = n;
            self.pos += 2;
        }
        let (terms, constant) = self.expression(true)?;
        let sense = self.sense()?;
        let rhs = self.signed_value()?;
        if !rhs.is_finite() {
            return Err(self.err("right-hand side must be finite"));
        }
        Ok(RowData {
            name,
            terms,
            sense,
            rhs: rhs - constant,
        })
    }
}

/// Parses LP text into a model.
pub fn parse_lp_str(text: &str) -> Result<MioModel, LpFileError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(LpFileError::parse(1, "empty LP file"));
    }
    let mut p = Parser { toks, pos: 0 };
    let mut section = match p.section_keyword()? {
        Some(Section::Objective) => Section::Objective,
        _ => return Err(p.err("expected `Minimize` at start of file")),
    };

    let mut obj_terms: Vec<(String, f64)> = Vec::new();
    let mut obj_const = 0.0;
    let mut rows: Vec<RowData> = Vec::new();
    let mut bounds: Vec<(String, Option<f64>, Option<f64>)> = Vec::new();
    let mut binaries: Vec<String> = Vec::new();
    let mut ended = false;

    while p.peek().is_some() {
        if let Some(s) = p.section_keyword()? {
            if s == Section::End {
                ended = true;
                break;
            }
            section = s;
            continue;
        }
        match section {
            Section::Objective => {
                if let (Some(Tok::Name(_)), Some(Tok::Colon)) = (p.peek(), p.peek_at(1)) {
                    p.pos += 2;
                }
                let (t, c) = p.expression(false)?;
                if t.is_empty() && c == 0.0 && p.peek().is_some() && !p.at_section_start() {
                    return Err(p.err("unexpected token in objective"));
                }
                obj_terms.extend(t);
                obj_const += c;
            }
            Section::Constraints => {
                let r = p.row(rows.len())?;
                rows.push(r);
            }
            Section::Bounds => {
                let b = bound_statement(&mut p)?;
                bounds.push(b);
            }
            Section::Binary => match p.next() {
                Some(Tok::Name(n)) => binaries.push(n),
                _ => {
                    p.pos -= 1;
                    return Err(p.err("expected a variable name in Binary section"));
                }
            },
            Section::End => unreachable!(),
        }
    }
    if !ended {
        return Err(p.err("missing `End`"));
    }
    if p.peek().is_some() {
        return Err(p.err("content after `End`"));
    }

    // Variable order: Bounds section first, then first appearance elsewhere.
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut note = |n: &str, order: &mut Vec<String>| {
        if !index.contains_key(n) {
            index.insert(n.to_string(), order.len());
            order.push(n.to_string());
        }
    };
    for (n, _, _) in &bounds {
        note(n, &mut order);
    }
    for (n, _) in &obj_terms {
        note(n, &mut order);
    }
    for r in &rows {
        for (n, _) in &r.terms {
            note(n, &mut order);
        }
    }
    for n in &binaries {
        note(n, &mut order);
    }
    let mut lo = vec![0.0; order.len()];
    let mut hi = vec![f64::INFINITY; order.len()];
    for (n, l, h) in &bounds {
        let k = index[n];
        if let Some(l) = l {
            lo[k] = *l;
        }
        if let Some(h) = h {
            hi[k] = *h;
        }
    }
    let mut is_bin = vec![false; order.len()];
    for n in &binaries {
        is_bin[index[n]] = true;
    }
    let mut model = MioModel::new();
    for (k, name) in order.iter().enumerate() {
        let kind = if is_bin[k] { VarKind::Binary } else { VarKind::Continuous };
        let (l, h) = if is_bin[k] && !bounds.iter().any(|(n, _, _)| n == name) {
            (0.0, 1.0)
        } else {
            (lo[k], hi[k])
        };
        model.add_var(kind, l, h, name.clone());
    }
    model.set_objective(obj_terms.iter().map(|(n, c)| (VarId(index[n]), *c)), obj_const);
    for r in rows {
        model.add_constraint(
            r.terms.iter().map(|(n, c)| (VarId(index[n]), *c)),
            r.sense,
            r.rhs,
            r.name,
        );
    }
    Ok(model)
}

fn bound_statement(p: &mut Parser) -> Result<(String, Option<f64>, Option<f64>), LpFileError> {
    let starts_with_value = match p.peek() {
        Some(Tok::Num(_) | Tok::Plus | Tok::Minus) => true,
        Some(Tok::Name(n)) => is_inf(n),
        _ => false,
    };
    if starts_with_value {
        let v = p.signed_value()?;
        let s1 = p.sense()?;
        let name = match p.next() {
            Some(Tok::Name(n)) => n,
            _ => {
                p.pos -= 1;
                return Err(p.err("expected a variable name in bound"));
            }
        };
        let (mut lo, mut hi) = (None, None);
        match s1 {
            Sense::Le => lo = Some(v),
            Sense::Ge => hi = Some(v),
            Sense::Eq => {
                lo = Some(v);
                hi = Some(v);
            }
        }
        if let Some(Tok::Op(_)) = p.peek() {
            let s2 = p.sense()?;
            let w = p.signed_value()?;
            match (s1, s2) {
                (Sense::Le, Sense::Le) => hi = Some(w),
                (Sense::Ge, Sense::Ge) => lo = Some(w),
                _ => return Err(p.err("inconsistent senses in double bound")),
            }
        }
        return Ok((name, lo, hi));
    }
    let name = match p.next() {
        Some(Tok::Name(n)) => n,
        _ => {
            p.pos -= 1;
            return Err(p.err("expected a bound statement"));
        }
    };
    if let Some(Tok::Name(f)) = p.peek() {
        if f.eq_ignore_ascii_case("free") {
            p.pos += 1;
            return Ok((name, Some(f64::NEG_INFINITY), Some(f64::INFINITY)));
        }
    }
    let s = p.sense()?;
    let v = p.signed_value()?;
    Ok(match s {
        Sense::Le => (name, None, Some(v)),
        Sense::Ge => (name, Some(v), None),
        Sense::Eq => (name, Some(v), Some(v)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_wrapped_rows_and_bounds() {
        let text = "\\ comment\nMinimize\n obj: 2 x - y + 3\nSubject To\n c1: x +\n  y <= 4\n c2: x - y >= -1\nBounds\n 0 <= x <= 5\n y free\nBinary\nEnd\n";
        let m = parse_lp_str(text).unwrap();
        assert_eq!(m.num_vars(), 2);
        assert_eq!(m.num_constraints(), 2);
        assert_eq!(m.objective().constant, 3.0);
        assert_eq!(m.variables()[1].lower, f64::NEG_INFINITY);
        assert_eq!(m.constraints()[1].rhs, -1.0);
    }

    #[test]
    fn malformed_sense_reports_line() {
        let text = "Minimize\n obj: x\nSubject To\n c1: x <> 4\nEnd\n";
        match parse_lp_str(text) {
            Err(LpFileError::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("sense"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse_lp_str(""), Err(LpFileError::Parse { line: 1, .. })));
        assert!(matches!(parse_lp_str("\\ only a comment\n"), Err(LpFileError::Parse { .. })));
    }

    #[test]
    fn invalid_names_are_replaced() {
        let names = unique_names(["a b", "ok", "ok", "1x", "inf"].into_iter(), "x");
        assert_eq!(names.len(), 5);
        let set: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(set.len(), 5);
        assert!(names.iter().all(|n| valid_name(n)));
    }
}
