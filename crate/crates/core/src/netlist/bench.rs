// SPDX-License-Identifier: Apache-2.0

//! Reader and writer for the `.bench` netlist dialect.
//!
//! One statement per line, `#` starts a comment:
//!
//! ```text
//! INPUT(a)
//! OUTPUT(z)
//! q = DFF(d)
//! d = AND(a, q)
//! z = BUF(q)
//! ```
//!
//! Identifiers match `[A-Za-z_][A-Za-z0-9_]*`. Keywords and gate kinds are
//! case-insensitive. Names may be referenced before they are declared.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::{comb_topo_order, output_cell_name, Cell, CellId, CombOrder, GateKind, Netlist};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown gate kind `{0}`")]
    UnknownGateKind(String),
    #[error("duplicate cell name `{0}`")]
    DuplicateCell(String),
    #[error("cell `{cell}` reads undefined net `{fanin}`")]
    UnresolvedFanin { cell: String, fanin: String },
    #[error("cell `{cell}` of kind {kind} has {got} fan-in(s)")]
    Arity {
        cell: String,
        kind: GateKind,
        got: usize,
    },
    #[error("combinational cycle through `{0}`")]
    CombinationalCycle(String),
}

/// A parse failure with its 1-based source location.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Loc {
    line: usize,
    column: usize,
}

impl Loc {
    fn err(self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Ident(&'a str),
    LParen,
    RParen,
    Comma,
    Eq,
}

impl fmt::Display for Tok<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eq => f.write_str("`=`"),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<(Tok<'_>, Loc)>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = line.char_indices().peekable();
    let mut column = 0;
    while let Some((start, c)) = chars.next() {
        column += 1;
        let loc = Loc {
            line: line_no,
            column,
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '=' => Tok::Eq,
            c if c.is_whitespace() => continue,
            c if is_ident_start(c) => {
                let mut end = start + c.len_utf8();
                while let Some(&(i, c)) = chars.peek() {
                    if !is_ident_char(c) {
                        break;
                    }
                    end = i + c.len_utf8();
                    column += 1;
                    chars.next();
                }
                Tok::Ident(&line[start..end])
            }
            other => {
                return Err(loc.err(ParseErrorKind::Syntax(format!(
                    "unexpected character {other:?}"
                ))))
            }
        };
        toks.push((tok, loc));
    }
    Ok(toks)
}

/// One source statement before name resolution.
struct Stmt<'a> {
    name: &'a str,
    name_loc: Loc,
    kind: GateKind,
    fanin: Vec<(&'a str, Loc)>,
}

struct Cursor<'t, 'a> {
    toks: &'t [(Tok<'a>, Loc)],
    pos: usize,
    end: Loc,
}

impl<'a> Cursor<'_, 'a> {
    fn next(&mut self, what: &str) -> Result<(Tok<'a>, Loc), ParseError> {
        match self.toks.get(self.pos) {
            Some((t, l)) => {
                self.pos += 1;
                Ok((t.clone(), *l))
            }
            None => Err(self
                .end
                .err(ParseErrorKind::Syntax(format!("expected {what}, found end of line")))),
        }
    }

    fn expect(&mut self, want: Tok<'static>) -> Result<Loc, ParseError> {
        let (t, l) = self.next(&want.to_string())?;
        if t == want {
            Ok(l)
        } else {
            Err(l.err(ParseErrorKind::Syntax(format!("expected {want}, found {t}"))))
        }
    }

    fn ident(&mut self) -> Result<(&'a str, Loc), ParseError> {
        match self.next("identifier")? {
            (Tok::Ident(s), l) => Ok((s, l)),
            (t, l) => Err(l.err(ParseErrorKind::Syntax(format!(
                "expected identifier, found {t}"
            )))),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.toks.get(self.pos) {
            None => Ok(()),
            Some((t, l)) => Err(l.err(ParseErrorKind::Syntax(format!(
                "unexpected {t} after end of statement"
            )))),
        }
    }
}

fn parse_statement<'a>(
    toks: &[(Tok<'a>, Loc)],
    end: Loc,
) -> Result<Stmt<'a>, ParseError> {
    let mut cur = Cursor { toks, pos: 0, end };
    let (head, head_loc) = cur.ident()?;
    let (sep, sep_loc) = cur.next("`(` or `=`")?;
    match sep {
        Tok::LParen => {
            let kind = if head.eq_ignore_ascii_case("INPUT") {
                GateKind::Input
            } else if head.eq_ignore_ascii_case("OUTPUT") {
                GateKind::Output
            } else {
                return Err(head_loc.err(ParseErrorKind::Syntax(format!(
                    "expected INPUT or OUTPUT declaration, found `{head}`"
                ))));
            };
            let (net, net_loc) = cur.ident()?;
            cur.expect(Tok::RParen)?;
            cur.finish()?;
            Ok(match kind {
                GateKind::Input => Stmt {
                    name: net,
                    name_loc: net_loc,
                    kind,
                    fanin: Vec::new(),
                },
                _ => Stmt {
                    name: net,
                    name_loc: net_loc,
                    kind,
                    fanin: vec![(net, net_loc)],
                },
            })
        }
        Tok::Eq => {
            let (kind_name, kind_loc) = cur.ident()?;
            let kind = match kind_name.parse::<GateKind>() {
                Ok(k) if !matches!(k, GateKind::Input | GateKind::Output) => k,
                _ => {
                    return Err(
                        kind_loc.err(ParseErrorKind::UnknownGateKind(kind_name.to_string()))
                    )
                }
            };
            cur.expect(Tok::LParen)?;
            let mut fanin = vec![cur.ident()?];
            loop {
                let (t, l) = cur.next("`,` or `)`")?;
                match t {
                    Tok::Comma => fanin.push(cur.ident()?),
                    Tok::RParen => break,
                    t => {
                        return Err(l.err(ParseErrorKind::Syntax(format!(
                            "expected `,` or `)`, found {t}"
                        ))))
                    }
                }
            }
            cur.finish()?;
            if !kind.accepts_arity(fanin.len()) {
                return Err(head_loc.err(ParseErrorKind::Arity {
                    cell: head.to_string(),
                    kind,
                    got: fanin.len(),
                }));
            }
            Ok(Stmt {
                name: head,
                name_loc: head_loc,
                kind,
                fanin,
            })
        }
        t => Err(sep_loc.err(ParseErrorKind::Syntax(format!(
            "expected `(` or `=`, found {t}"
        )))),
    }
}

/// Parse `.bench` text into a validated [`Netlist`].
///
/// Every input either parses or yields a located [`ParseError`]. Semantic
/// checks run after the whole text is read: duplicate names are reported at
/// their second declaration, then combinational cycles, then unresolved nets.
pub fn parse_bench(text: &str) -> Result<Netlist, ParseError> {
    let mut stmts = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("");
        let toks = tokenize(line, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let end = Loc {
            line: line_no,
            column: line.chars().count() + 1,
        };
        stmts.push(parse_statement(&toks, end)?);
    }

    let mut index: HashMap<String, CellId> = HashMap::with_capacity(stmts.len());
    let mut names = Vec::with_capacity(stmts.len());
    for s in &stmts {
        let name = match s.kind {
            GateKind::Output => output_cell_name(s.name),
            _ => s.name.to_string(),
        };
        if index.contains_key(&name) {
            let shown = if s.kind == GateKind::Output {
                name.clone()
            } else {
                s.name.to_string()
            };
            return Err(s.name_loc.err(ParseErrorKind::DuplicateCell(shown)));
        }
        index.insert(name.clone(), names.len());
        names.push(name);
    }

    // Resolve what can be resolved; unresolved pins are reported only after
    // the cycle check so that a self-referencing cell reports its cycle.
    let mut unresolved: Option<ParseError> = None;
    let fanin: Vec<Vec<CellId>> = stmts
        .iter()
        .map(|s| {
            s.fanin
                .iter()
                .filter_map(|(f, loc)| match index.get(*f) {
                    Some(&id) => Some(id),
                    None => {
                        unresolved.get_or_insert_with(|| {
                            loc.err(ParseErrorKind::UnresolvedFanin {
                                cell: s.name.to_string(),
                                fanin: f.to_string(),
                            })
                        });
                        None
                    }
                })
                .collect()
        })
        .collect();
    let kinds: Vec<GateKind> = stmts.iter().map(|s| s.kind).collect();
    let order = match comb_topo_order(&kinds, &fanin) {
        CombOrder::Acyclic(order) => order,
        CombOrder::Cycle(id) => {
            return Err(stmts[id]
                .name_loc
                .err(ParseErrorKind::CombinationalCycle(names[id].clone())))
        }
    };
    if let Some(e) = unresolved {
        return Err(e);
    }

    let cells = names
        .into_iter()
        .zip(kinds)
        .zip(fanin)
        .map(|((name, kind), fanin)| Cell { name, kind, fanin })
        .collect();
    Ok(Netlist::from_validated(cells, order))
}

/// Write a netlist back to `.bench` text. `parse_bench(write_bench(n)) == n`.
pub fn write_bench(n: &Netlist) -> String {
    let mut out = String::new();
    for (id, cell) in n.cells().iter().enumerate() {
        match cell.kind {
            GateKind::Input => writeln!(out, "INPUT({})", cell.name),
            GateKind::Output => writeln!(out, "OUTPUT({})", n.cell(cell.fanin[0]).name),
            kind => writeln!(out, "{} = {}({})", cell.name, kind, n.fanin_names(id).join(", ")),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const DFF_LOOP: &str = "INPUT(a)\nq = DFF(d)\nd = AND(a,q)\nOUTPUT(z)\nz = BUF(q)";

    fn err_kind(text: &str) -> ParseErrorKind {
        parse_bench(text).unwrap_err().kind
    }

    #[test]
    fn minimal_netlist() {
        let n = parse_bench("INPUT(a)\nOUTPUT(z)\nz = BUF(a)").unwrap();
        assert_eq!(n.len(), 3);
        assert_eq!(n.primary_input_names(), ["a"]);
        assert_eq!(n.primary_output_names(), ["z"]);
        assert_eq!(n.cell(1).name, "OUTPUT(z)");
        assert_eq!(n.fanin_names(1), ["z"]);
    }

    #[test]
    fn dff_feedback_through_and_is_legal() {
        let n = parse_bench(DFF_LOOP).unwrap();
        assert_eq!(n.len(), 5);
        assert_eq!(n.flip_flops(), vec![1]);
        assert_eq!(n.fanin_names(2), ["a", "q"]);
    }

    #[test]
    fn dff_driven_by_itself_is_legal() {
        let n = parse_bench("q = DFF(q)\nOUTPUT(q)").unwrap();
        assert_eq!(n.cell(0).fanin, vec![0]);
    }

    #[test]
    fn self_dependent_gate_is_a_cycle() {
        assert_eq!(
            err_kind("a = AND(a,b)"),
            ParseErrorKind::CombinationalCycle("a".into())
        );
    }

    #[test]
    fn longer_cycle_is_reported() {
        let e = parse_bench("INPUT(i)\nx = AND(i, y)\ny = NOT(x)").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::CombinationalCycle(_)));
    }

    #[test]
    fn kinds_are_case_insensitive() {
        let n = parse_bench("input(a)\ninput(b)\noutput(z)\nz = nAnD(a, b)").unwrap();
        assert_eq!(n.cell(3).kind, GateKind::Nand);
    }

    #[test]
    fn comments_and_blank_lines() {
        let n = parse_bench("# header\n\nINPUT(a) # the input\r\nOUTPUT(a)\n").unwrap();
        assert_eq!(n.len(), 2);
    }

    #[test]
    fn located_errors() {
        let e = parse_bench("INPUT(a)\nz = MUX(a, a)").unwrap_err();
        assert_eq!((e.line, e.column), (2, 5));
        assert_eq!(e.kind, ParseErrorKind::UnknownGateKind("MUX".into()));

        let e = parse_bench("INPUT(a)\n  z = AND(a b)").unwrap_err();
        assert_eq!((e.line, e.column), (2, 13));
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));

        let e = parse_bench("INPUT(a)\nz = AND(a, c)\nOUTPUT(z)").unwrap_err();
        assert_eq!((e.line, e.column), (2, 12));
        assert_eq!(
            e.kind,
            ParseErrorKind::UnresolvedFanin {
                cell: "z".into(),
                fanin: "c".into()
            }
        );
    }

    #[test]
    fn rejects_bad_arity() {
        assert!(matches!(
            err_kind("INPUT(a)\nz = AND(a)"),
            ParseErrorKind::Arity { got: 1, .. }
        ));
        assert!(matches!(
            err_kind("INPUT(a)\nz = NOT(a, a)"),
            ParseErrorKind::Arity { got: 2, .. }
        ));
        assert!(matches!(
            err_kind("INPUT(a)\nq = DFF(a, a)"),
            ParseErrorKind::Arity { .. }
        ));
    }

    #[test]
    fn rejects_duplicates() {
        assert_eq!(
            err_kind("INPUT(a)\na = NOT(a)"),
            ParseErrorKind::DuplicateCell("a".into())
        );
        assert_eq!(
            err_kind("INPUT(a)\nOUTPUT(a)\nOUTPUT(a)"),
            ParseErrorKind::DuplicateCell("OUTPUT(a)".into())
        );
    }

    #[test]
    fn rejects_misc_syntax() {
        for bad in [
            "INPUT(a",
            "INPUT()",
            "FOO(a)",
            "z = AND(a,)",
            "z AND(a,b)",
            "INPUT(a) extra",
            "INPUT(1a)",
            "z = AND(a,b))",
            "z = INPUT(a)",
            "é",
        ] {
            assert!(parse_bench(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn empty_text_is_empty_netlist() {
        assert!(parse_bench("").unwrap().is_empty());
        assert!(parse_bench("# nothing\n\n").unwrap().is_empty());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let n = parse_bench(DFF_LOOP).unwrap();
        assert_eq!(parse_bench(&write_bench(&n)).unwrap(), n);
    }
}
