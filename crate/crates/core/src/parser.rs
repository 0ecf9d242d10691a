//! Reader and writer for the line-oriented automaton format.
//!
//! ```text
//! system:<name>
//! clock:1:<id>
//! event:<id>
//! process:<id>
//! location:<proc>:<id>{initial: : invariant: <conj>}
//! edge:<proc>:<src>:<tgt>:<event>{provided: <conj> : do: <resets>}
//! ```
//!
//! `<conj>` is an `&&`-joined list of `c<op>m` with `op` one of `<`, `<=`,
//! `==`, `>=`, `>`; `<resets>` is a comma-joined list of `c=0`. `#` starts a
//! comment. Clocks, events and locations must be declared before use.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::dbm::Relation;
use crate::ta::{Constraint, Location, Subject, Switch, TimedAutomaton};

/// 1-based line/column position in the input document.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
}

fn err<T>(line: usize, column: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        span: SourceSpan { line, column },
        message: message.into(),
    })
}

/// A piece of a line together with its 1-based starting column.
#[derive(Clone, Copy)]
struct Piece<'a> {
    text: &'a str,
    column: usize,
}

impl<'a> Piece<'a> {
    /// Strip surrounding whitespace, adjusting the column.
    fn trim(self) -> Piece<'a> {
        let lead = self.text.len() - self.text.trim_start().len();
        Piece {
            text: self.text.trim(),
            column: self.column + self.text[..lead].chars().count(),
        }
    }

    /// Split on a separator string, tracking columns.
    fn split(self, sep: &str) -> Vec<Piece<'a>> {
        let mut out = Vec::new();
        let mut col = self.column;
        for part in self.text.split(sep) {
            out.push(Piece {
                text: part,
                column: col,
            });
            col += part.chars().count() + sep.chars().count();
        }
        out
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '\'')
}

struct Parser {
    ta: TimedAutomaton,
    line: usize,
    system_seen: bool,
    process_seen: bool,
    initial_span: Option<SourceSpan>,
    location_spans: Vec<SourceSpan>,
    switch_spans: Vec<SourceSpan>,
    decl_spans: HashMap<String, SourceSpan>,
}

impl Parser {
    fn identifier(&self, p: Piece<'_>, what: &str) -> Result<String, ParseError> {
        let p = p.trim();
        if is_identifier(p.text) {
            Ok(p.text.to_string())
        } else if p.text.is_empty() {
            err(self.line, p.column, format!("missing {what} identifier"))
        } else {
            err(self.line, p.column, format!("malformed {what} identifier '{}'", p.text))
        }
    }

    fn fields<'a>(&self, head: Piece<'a>, expected: usize, form: &str) -> Result<Vec<Piece<'a>>, ParseError> {
        let parts = head.split(":");
        if parts.len() != expected {
            return err(self.line, head.column, format!("expected `{form}`"));
        }
        Ok(parts)
    }

    fn declared_clock(&self, p: Piece<'_>) -> Result<String, ParseError> {
        let id = self.identifier(p, "clock")?;
        if !self.ta.clocks.contains(&id) {
            return err(self.line, p.trim().column, format!("undeclared clock {id}"));
        }
        Ok(id)
    }

    fn declared_location(&self, p: Piece<'_>) -> Result<String, ParseError> {
        let id = self.identifier(p, "location")?;
        if self.ta.location(&id).is_none() {
            return err(self.line, p.trim().column, format!("undeclared location {id}"));
        }
        Ok(id)
    }

    fn check_process(&self, p: Piece<'_>) -> Result<(), ParseError> {
        let id = self.identifier(p, "process")?;
        if !self.process_seen {
            return err(self.line, p.trim().column, "missing process declaration before use");
        }
        if id != self.ta.process {
            return err(self.line, p.trim().column, format!("unknown process {id}"));
        }
        Ok(())
    }

    fn fresh_name(&mut self, id: &str, span: SourceSpan) -> Result<(), ParseError> {
        if let Some(prev) = self.decl_spans.get(id) {
            return err(span.line, span.column, format!("{id} is already declared at {prev}"));
        }
        self.decl_spans.insert(id.to_string(), span);
        Ok(())
    }

    fn constraint(&self, p: Piece<'_>) -> Result<Vec<Constraint>, ParseError> {
        let p = p.trim();
        let malformed = || err(self.line, p.column, format!("malformed constraint '{}'", p.text));
        let ops = ["<=", ">=", "==", "<", ">"];
        let Some((pos, op)) = ops
            .iter()
            .filter_map(|op| p.text.find(op).map(|pos| (pos, *op)))
            .min_by_key(|(pos, op)| (*pos, std::cmp::Reverse(op.len())))
        else {
            return malformed();
        };
        let lhs = Piece {
            text: &p.text[..pos],
            column: p.column,
        };
        let rhs = p.text[pos + op.len()..].trim();
        let Ok(constant) = rhs.parse::<u32>() else {
            return malformed();
        };
        let relation = match op {
            "<" => Relation::Lt,
            "<=" => Relation::Le,
            ">=" => Relation::Ge,
            ">" => Relation::Gt,
            _ => Relation::Le,
        };
        let lhs_parts = lhs.split("-");
        let out = match lhs_parts.as_slice() {
            [c] => {
                let clock = self.declared_clock(*c)?;
                if op == "==" {
                    vec![
                        Constraint::atomic(clock.clone(), Relation::Le, constant),
                        Constraint::atomic(clock, Relation::Ge, constant),
                    ]
                } else {
                    vec![Constraint::atomic(clock, relation, constant)]
                }
            }
            [l, r] => {
                let left = self.declared_clock(*l)?;
                let right = self.declared_clock(*r)?;
                let mk = |relation| Constraint::Difference {
                    left: left.clone(),
                    right: right.clone(),
                    relation,
                    constant: constant as i64,
                };
                if op == "==" {
                    vec![mk(Relation::Le), mk(Relation::Ge)]
                } else {
                    vec![mk(relation)]
                }
            }
            _ => return malformed(),
        };
        Ok(out)
    }

    fn conjunction(&self, p: Piece<'_>) -> Result<Vec<Constraint>, ParseError> {
        let p = p.trim();
        if p.text.is_empty() {
            return err(self.line, p.column, "empty constraint");
        }
        let mut out = Vec::new();
        for atom in p.split("&&") {
            out.extend(self.constraint(atom)?);
        }
        Ok(out)
    }

    fn resets(&self, p: Piece<'_>) -> Result<Vec<String>, ParseError> {
        let p = p.trim();
        let mut out = Vec::new();
        if p.text.is_empty() {
            return Ok(out);
        }
        for r in p.split(",") {
            let r = r.trim();
            let parts = r.split("=");
            let [clock, value] = parts.as_slice() else {
                return err(self.line, r.column, format!("malformed reset '{}'", r.text));
            };
            if value.text.trim() != "0" {
                return err(self.line, value.trim().column, "clocks can only be reset to 0");
            }
            let clock = self.declared_clock(*clock)?;
            if !out.contains(&clock) {
                out.push(clock);
            }
        }
        Ok(out)
    }

    /// Split `{k: v : k: v}` into `(key, value)` pairs.
    fn attributes<'a>(&self, p: Option<Piece<'a>>) -> Result<Vec<(Piece<'a>, Piece<'a>)>, ParseError> {
        let Some(p) = p else { return Ok(Vec::new()) };
        if p.text.trim().is_empty() {
            return Ok(Vec::new());
        }
        let parts = p.split(":");
        if parts.len() % 2 != 0 {
            return err(self.line, p.column, "malformed attribute list");
        }
        Ok(parts.chunks(2).map(|kv| (kv[0].trim(), kv[1])).collect())
    }

    fn directive(&mut self, body: Piece<'_>) -> Result<(), ParseError> {
        let (head, attrs) = match body.text.find('{') {
            Some(open) => {
                let rest = &body.text[open..];
                let close = rest.rfind('}');
                let Some(close) = close.filter(|c| rest[c + 1..].trim().is_empty()) else {
                    return err(
                        self.line,
                        body.column + body.text[..open].chars().count(),
                        "unterminated attribute block",
                    );
                };
                let head = Piece {
                    text: &body.text[..open],
                    column: body.column,
                };
                let inner = Piece {
                    text: &rest[1..close],
                    column: body.column + body.text[..=open].chars().count(),
                };
                (head, Some(inner))
            }
            None => (body, None),
        };
        let kind = head.split(":")[0].trim();
        let attr_less = |p: &Parser| -> Result<(), ParseError> {
            if let Some(a) = attrs {
                if !a.text.trim().is_empty() {
                    return err(
                        p.line,
                        a.column,
                        format!("{} declarations take no attributes", kind.text),
                    );
                }
            }
            Ok(())
        };
        let here = |column| SourceSpan {
            line: self.line,
            column,
        };
        match kind.text {
            "system" => {
                attr_less(self)?;
                let f = self.fields(head, 2, "system:<name>")?;
                if self.system_seen {
                    return err(self.line, kind.column, "duplicate system declaration");
                }
                self.ta.name = self.identifier(f[1], "system")?;
                self.system_seen = true;
            }
            "clock" => {
                attr_less(self)?;
                let f = self.fields(head, 3, "clock:1:<id>")?;
                if f[1].text.trim() != "1" {
                    return err(self.line, f[1].trim().column, "only clocks of size 1 are supported");
                }
                let id = self.identifier(f[2], "clock")?;
                self.fresh_name(&id, here(f[2].trim().column))?;
                self.ta.clocks.push(id);
            }
            "event" => {
                attr_less(self)?;
                let f = self.fields(head, 2, "event:<id>")?;
                let id = self.identifier(f[1], "event")?;
                self.fresh_name(&id, here(f[1].trim().column))?;
                self.ta.alphabet.push(id);
            }
            "process" => {
                attr_less(self)?;
                let f = self.fields(head, 2, "process:<id>")?;
                if self.process_seen {
                    return err(self.line, kind.column, "only one process per file is supported");
                }
                self.ta.process = self.identifier(f[1], "process")?;
                self.process_seen = true;
            }
            "location" => {
                let f = self.fields(head, 3, "location:<process>:<id>{<attributes>}")?;
                self.check_process(f[1])?;
                let id = self.identifier(f[2], "location")?;
                let span = here(f[2].trim().column);
                if self.ta.location(&id).is_some() {
                    return err(span.line, span.column, format!("duplicate location {id}"));
                }
                let mut invariant = Vec::new();
                for (key, value) in self.attributes(attrs)? {
                    match key.text {
                        "initial" => {
                            if !value.text.trim().is_empty() {
                                return err(self.line, value.trim().column, "initial takes no value");
                            }
                            if let Some(prev) = self.initial_span {
                                return err(
                                    self.line,
                                    key.column,
                                    format!("second initial location (first at {prev})"),
                                );
                            }
                            self.ta.initial = id.clone();
                            self.initial_span = Some(span);
                        }
                        "invariant" => invariant.extend(self.conjunction(value)?),
                        other => return err(self.line, key.column, format!("unknown location attribute '{other}'")),
                    }
                }
                self.ta.locations.push(Location { id, invariant });
                self.location_spans.push(span);
            }
            "edge" => {
                let f = self.fields(head, 5, "edge:<process>:<source>:<target>:<event>{<attributes>}")?;
                self.check_process(f[1])?;
                let source = self.declared_location(f[2])?;
                let target = self.declared_location(f[3])?;
                let action = self.identifier(f[4], "event")?;
                if !self.ta.alphabet.contains(&action) {
                    return err(self.line, f[4].trim().column, format!("undeclared event {action}"));
                }
                let mut guard = Vec::new();
                let mut resets = Vec::new();
                for (key, value) in self.attributes(attrs)? {
                    match key.text {
                        "provided" => guard.extend(self.conjunction(value)?),
                        "do" => resets.extend(self.resets(value)?),
                        other => return err(self.line, key.column, format!("unknown edge attribute '{other}'")),
                    }
                }
                self.ta.switches.push(Switch {
                    source,
                    guard,
                    action,
                    resets,
                    target,
                });
                self.switch_spans.push(here(kind.column));
            }
            "" => return err(self.line, kind.column, "missing directive"),
            other => return err(self.line, kind.column, format!("unknown directive '{other}'")),
        }
        Ok(())
    }
}

/// Parse and validate an automaton document.
pub fn parse(text: &str) -> Result<TimedAutomaton, ParseError> {
    let mut p = Parser {
        ta: TimedAutomaton::new(""),
        line: 0,
        system_seen: false,
        process_seen: false,
        initial_span: None,
        location_spans: Vec::new(),
        switch_spans: Vec::new(),
        decl_spans: HashMap::new(),
    };
    p.ta.process.clear();
    let mut last_line = 1;
    for (n, raw) in text.lines().enumerate() {
        p.line = n + 1;
        last_line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let body = Piece {
            text: content,
            column: 1,
        }
        .trim();
        if body.text.is_empty() {
            continue;
        }
        p.directive(body)?;
    }
    if !p.process_seen {
        return err(1, 1, "missing process");
    }
    if p.initial_span.is_none() {
        return err(last_line, 1, "missing initial location");
    }
    if !p.system_seen {
        p.ta.name = p.ta.process.clone();
    }
    if let Err(violations) = p.ta.validate() {
        let v = &violations[0];
        let span = match v.subject {
            Subject::Location(i) => p.location_spans[i],
            Subject::Switch(i) => p.switch_spans[i],
            _ => p.initial_span.unwrap(),
        };
        return err(span.line, span.column, v.rule.clone());
    }
    Ok(p.ta)
}

fn conjunction_text(cs: &[Constraint]) -> String {
    cs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("&&")
}

/// Canonical textual form; `parse(serialize(a)) == a` for valid automata.
pub fn serialize(a: &TimedAutomaton) -> String {
    let mut out = String::new();
    out.push_str(&format!("system:{}\n", a.name));
    for c in &a.clocks {
        out.push_str(&format!("clock:1:{c}\n"));
    }
    for e in &a.alphabet {
        out.push_str(&format!("event:{e}\n"));
    }
    out.push_str(&format!("process:{}\n", a.process));
    for l in &a.locations {
        let mut attrs = Vec::new();
        if l.id == a.initial {
            attrs.push("initial:".to_string());
        }
        if !l.invariant.is_empty() {
            attrs.push(format!("invariant: {}", conjunction_text(&l.invariant)));
        }
        out.push_str(&format!("location:{}:{}{{{}}}\n", a.process, l.id, attrs.join(" : ")));
    }
    for s in &a.switches {
        let mut attrs = Vec::new();
        if !s.guard.is_empty() {
            attrs.push(format!("provided: {}", conjunction_text(&s.guard)));
        }
        if !s.resets.is_empty() {
            let r: Vec<String> = s.resets.iter().map(|c| format!("{c}=0")).collect();
            attrs.push(format!("do: {}", r.join(",")));
        }
        out.push_str(&format!(
            "edge:{}:{}:{}:{}{{{}}}\n",
            a.process,
            s.source,
            s.target,
            s.action,
            attrs.join(" : ")
        ));
    }
    out
}
