// SPDX-License-Identifier: Apache-2.0

//! GML export and import for [`CircuitGraph`].
//!
//! The writer emits a fixed layout (2-space indentation, LF endings):
//!
//! ```text
//! graph [
//!   directed 1
//!   node [
//!     id 0
//!     label "a"
//!     kind "INPUT"
//!   ]
//!   edge [
//!     source 0
//!     target 1
//!   ]
//! ]
//! ```
//!
//! The reader accepts any whitespace layout, `#` comments and unknown keys.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{CircuitGraph, GateKind, GraphNode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GmlError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {element} is missing required key `{key}`")]
    MissingKey {
        line: usize,
        element: &'static str,
        key: &'static str,
    },
    #[error("line {line}: key `{key}` has an invalid value")]
    InvalidValue { line: usize, key: &'static str },
    #[error("line {line}: duplicate node id {id}")]
    DuplicateId { line: usize, id: i64 },
    #[error("line {line}: edge endpoint {id} does not name a node")]
    DanglingEndpoint { line: usize, id: i64 },
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('"', "&quot;")
}

fn unescape(s: &str) -> String {
    s.replace("&quot;", "\"").replace("&amp;", "&")
}

/// Serialize a graph. Node ids are the graph's node indices.
pub fn export_gml(g: &CircuitGraph) -> String {
    let mut out = String::from("graph [\n  directed 1\n");
    for (id, node) in g.nodes().iter().enumerate() {
        let _ = write!(
            out,
            "  node [\n    id {id}\n    label \"{}\"\n    kind \"{}\"\n  ]\n",
            escape(&node.name),
            node.kind
        );
    }
    for &(s, t) in g.edges() {
        let _ = write!(out, "  edge [\n    source {s}\n    target {t}\n  ]\n");
    }
    out.push_str("]\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Int(i64),
    Real,
    Str(String),
    List(Vec<Entry>),
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: String,
    line: usize,
    value: Value,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    fn syntax(&self, message: impl Into<String>) -> GmlError {
        GmlError::Syntax {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while self.peek().is_some_and(&f) {
            self.bump();
        }
        &self.src[start..self.pos]
    }

    fn key(&mut self) -> Result<String, GmlError> {
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                Ok(self.take_while(|c| c.is_ascii_alphanumeric() || c == '_').to_string())
            }
            Some(c) => Err(self.syntax(format!("expected key, found {c:?}"))),
            None => Err(self.syntax("expected key, found end of input")),
        }
    }

    fn value(&mut self, depth: usize) -> Result<Value, GmlError> {
        self.skip_trivia();
        match self.peek() {
            Some('[') => {
                self.bump();
                let entries = self.entries(depth + 1, true)?;
                Ok(Value::List(entries))
            }
            Some('"') => {
                self.bump();
                let start = self.pos;
                loop {
                    match self.peek() {
                        Some('"') => break,
                        Some(_) => {
                            self.bump();
                        }
                        None => return Err(self.syntax("unterminated string")),
                    }
                }
                let s = unescape(&self.src[start..self.pos]);
                self.bump();
                Ok(Value::Str(s))
            }
            Some(c) if c == '-' || c == '+' || c == '.' || c.is_ascii_digit() => {
                let text = self.take_while(|c| {
                    c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E')
                });
                if let Ok(i) = text.parse::<i64>() {
                    Ok(Value::Int(i))
                } else if text.parse::<f64>().is_ok() {
                    Ok(Value::Real)
                } else {
                    Err(self.syntax(format!("malformed number `{text}`")))
                }
            }
            Some(c) => Err(self.syntax(format!("expected value, found {c:?}"))),
            None => Err(self.syntax("expected value, found end of input")),
        }
    }

    fn entries(&mut self, depth: usize, bracketed: bool) -> Result<Vec<Entry>, GmlError> {
        if depth > 64 {
            return Err(self.syntax("lists nested too deeply"));
        }
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            match self.peek() {
                Some(']') if bracketed => {
                    self.bump();
                    return Ok(out);
                }
                Some(']') => return Err(self.syntax("unbalanced `]`")),
                None if bracketed => return Err(self.syntax("missing `]`")),
                None => return Ok(out),
                Some(_) => {
                    let line = self.line;
                    let key = self.key()?;
                    let value = self.value(depth)?;
                    out.push(Entry { key, line, value });
                }
            }
        }
    }
}

fn lookup<'e>(entries: &'e [Entry], key: &str) -> Option<&'e Value> {
    entries.iter().find(|e| e.key == key).map(|e| &e.value)
}

fn required_int(
    entries: &[Entry],
    element: &'static str,
    key: &'static str,
    line: usize,
) -> Result<i64, GmlError> {
    match lookup(entries, key) {
        Some(Value::Int(i)) => Ok(*i),
        Some(_) => Err(GmlError::InvalidValue { line, key }),
        None => Err(GmlError::MissingKey { line, element, key }),
    }
}

fn required_str<'e>(
    entries: &'e [Entry],
    element: &'static str,
    key: &'static str,
    line: usize,
) -> Result<&'e str, GmlError> {
    match lookup(entries, key) {
        Some(Value::Str(s)) => Ok(s),
        Some(_) => Err(GmlError::InvalidValue { line, key }),
        None => Err(GmlError::MissingKey { line, element, key }),
    }
}

/// Parse GML text produced by [`export_gml`] (or any compatible writer).
///
/// Nodes keep their order of appearance; edges are resolved through the
/// `id` keys.
pub fn import_gml(text: &str) -> Result<CircuitGraph, GmlError> {
    let mut lexer = Lexer::new(text);
    let top = lexer.entries(0, false)?;
    let (graph_line, graph) = top
        .iter()
        .find(|e| e.key == "graph")
        .map(|e| (e.line, &e.value))
        .ok_or(GmlError::MissingKey {
            line: 1,
            element: "document",
            key: "graph",
        })?;
    let Value::List(items) = graph else {
        return Err(GmlError::InvalidValue {
            line: graph_line,
            key: "graph",
        });
    };

    let mut nodes = Vec::new();
    let mut ids: HashMap<i64, usize> = HashMap::new();
    for e in items.iter().filter(|e| e.key == "node") {
        let Value::List(fields) = &e.value else {
            return Err(GmlError::InvalidValue {
                line: e.line,
                key: "node",
            });
        };
        let id = required_int(fields, "node", "id", e.line)?;
        let label = required_str(fields, "node", "label", e.line)?;
        let kind = required_str(fields, "node", "kind", e.line)?
            .parse::<GateKind>()
            .map_err(|()| GmlError::InvalidValue {
                line: e.line,
                key: "kind",
            })?;
        if ids.insert(id, nodes.len()).is_some() {
            return Err(GmlError::DuplicateId { line: e.line, id });
        }
        nodes.push(GraphNode {
            name: label.to_string(),
            kind,
        });
    }

    let mut edges = Vec::new();
    for e in items.iter().filter(|e| e.key == "edge") {
        let Value::List(fields) = &e.value else {
            return Err(GmlError::InvalidValue {
                line: e.line,
                key: "edge",
            });
        };
        let endpoint = |key: &'static str| -> Result<usize, GmlError> {
            let id = required_int(fields, "edge", key, e.line)?;
            ids.get(&id)
                .copied()
                .ok_or(GmlError::DanglingEndpoint { line: e.line, id })
        };
        let s = endpoint("source")?;
        let t = endpoint("target")?;
        edges.push((s, t));
    }
    Ok(CircuitGraph::new(nodes, edges))
}
