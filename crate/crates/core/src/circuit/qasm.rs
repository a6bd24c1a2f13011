//! OpenQASM 2.0 subset: one `qreg`, at most one `creg`, gates
//! `h x sx rx rz cx swap barrier measure`, `//` comments.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Circuit, CircuitError, Gate, GateKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QasmError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported gate `{name}` at {line}:{column}")]
    UnsupportedGate {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("qubit index {index} out of range for qreg of size {size} at {line}:{column}")]
    QubitOutOfRange {
        index: usize,
        size: usize,
        line: usize,
        column: usize,
    },
    #[error("invalid statement at {line}:{column}: {source}")]
    Invalid {
        line: usize,
        column: usize,
        source: CircuitError,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Semi,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Arrow,
    Minus,
    Plus,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> QasmError {
    QasmError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, QasmError> {
    let mut out = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let line = li + 1;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line, column });
            match c {
                _ if c.is_whitespace() => i += 1,
                '/' if chars.get(i + 1) == Some(&'/') => break,
                ';' => {
                    push(&mut out, Tok::Semi);
                    i += 1
                }
                ',' => {
                    push(&mut out, Tok::Comma);
                    i += 1
                }
                '(' => {
                    push(&mut out, Tok::LParen);
                    i += 1
                }
                ')' => {
                    push(&mut out, Tok::RParen);
                    i += 1
                }
                '[' => {
                    push(&mut out, Tok::LBracket);
                    i += 1
                }
                ']' => {
                    push(&mut out, Tok::RBracket);
                    i += 1
                }
                '+' => {
                    push(&mut out, Tok::Plus);
                    i += 1
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    push(&mut out, Tok::Arrow);
                    i += 2
                }
                '-' => {
                    push(&mut out, Tok::Minus);
                    i += 1
                }
                '"' => {
                    let start = i + 1;
                    let end = chars[start..]
                        .iter()
                        .position(|&ch| ch == '"')
                        .ok_or_else(|| syntax(line, column, "unterminated string"))?;
                    push(&mut out, Tok::Str(chars[start..start + end].iter().collect()));
                    i = start + end + 1;
                }
                _ if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                    {
                        i += 1;
                    }
                    push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
                }
                _ if c.is_ascii_digit() || c == '.' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                        i += 1;
                    }
                    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                        i += 1;
                        if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                            i += 1;
                        }
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                    push(&mut out, Tok::Number(chars[start..i].iter().collect()));
                }
                _ => return Err(syntax(line, column, format!("unexpected character `{c}`"))),
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    qreg: Option<(String, usize)>,
    creg: Option<(String, usize)>,
    circuit: Option<Circuit>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn end_position(&self) -> (usize, usize) {
        self.toks
            .last()
            .map(|t| (t.line, t.column + 1))
            .unwrap_or((1, 1))
    }

    fn next(&mut self, what: &str) -> Result<Token, QasmError> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => {
                let (line, column) = self.end_position();
                Err(syntax(line, column, format!("unexpected end of input, expected {what}")))
            }
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, QasmError> {
        let t = self.next(what)?;
        if t.tok == tok {
            Ok(t)
        } else {
            Err(syntax(t.line, t.column, format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Token), QasmError> {
        let t = self.next(what)?;
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t)),
            _ => Err(syntax(t.line, t.column, format!("expected {what}"))),
        }
    }

    fn uint(&mut self) -> Result<usize, QasmError> {
        let t = self.next("integer")?;
        match &t.tok {
            Tok::Number(s) => s
                .parse::<usize>()
                .map_err(|_| syntax(t.line, t.column, format!("`{s}` is not an integer"))),
            _ => Err(syntax(t.line, t.column, "expected integer")),
        }
    }

    fn real(&mut self) -> Result<f64, QasmError> {
        let mut sign = 1.0;
        loop {
            let t = self.next("real number")?;
            match &t.tok {
                Tok::Minus => sign = -sign,
                Tok::Plus => {}
                Tok::Number(s) => {
                    return s
                        .parse::<f64>()
                        .map(|v| sign * v)
                        .map_err(|_| syntax(t.line, t.column, format!("malformed number `{s}`")))
                }
                Tok::Ident(s) => {
                    return Err(syntax(
                        t.line,
                        t.column,
                        format!("symbolic parameter `{s}` is not supported"),
                    ))
                }
                _ => return Err(syntax(t.line, t.column, "expected real number")),
            }
        }
    }

    /// `name[index]`, or bare `name` when `allow_whole` (barrier operands).
    fn operand(
        &mut self,
        reg: Option<&(String, usize)>,
        kind: &str,
        allow_whole: bool,
    ) -> Result<Vec<usize>, QasmError> {
        let (name, t) = self.ident(&format!("{kind} register operand"))?;
        let (reg_name, size) = match reg {
            Some((n, s)) if *n == name => (n.clone(), *s),
            Some(_) | None => {
                return Err(syntax(
                    t.line,
                    t.column,
                    format!("unknown {kind} register `{name}`"),
                ))
            }
        };
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::LBracket)) {
            self.pos += 1;
            let idx_tok = self.peek().cloned();
            let index = self.uint()?;
            self.expect(Tok::RBracket, "`]`")?;
            if index >= size {
                let (line, column) = idx_tok.map(|t| (t.line, t.column)).unwrap_or((t.line, t.column));
                return Err(if kind == "quantum" {
                    QasmError::QubitOutOfRange {
                        index,
                        size,
                        line,
                        column,
                    }
                } else {
                    syntax(
                        line,
                        column,
                        format!("index {index} out of range for {reg_name}[{size}]"),
                    )
                });
            }
            Ok(vec![index])
        } else if allow_whole {
            Ok((0..size).collect())
        } else {
            Err(syntax(t.line, t.column, "expected `[`"))
        }
    }

    fn circuit(&mut self, at: &Token) -> Result<&mut Circuit, QasmError> {
        if self.circuit.is_none() {
            let (_, nq) = self
                .qreg
                .clone()
                .ok_or_else(|| syntax(at.line, at.column, "gate before qreg declaration"))?;
            let nc = self.creg.as_ref().map(|(_, n)| *n).unwrap_or(0);
            self.circuit = Some(Circuit::new(nq, nc).with_name("qasm"));
        }
        Ok(self.circuit.as_mut().expect("initialised above"))
    }

    fn push(&mut self, at: &Token, gate: Gate) -> Result<(), QasmError> {
        self.circuit(at)?
            .push(gate)
            .map_err(|source| QasmError::Invalid {
                line: at.line,
                column: at.column,
                source,
            })
    }

    fn statement(&mut self) -> Result<(), QasmError> {
        let (word, t) = self.ident("statement")?;
        match word.as_str() {
            "OPENQASM" => Err(syntax(t.line, t.column, "repeated OPENQASM header")),
            "include" => {
                let s = self.next("include path")?;
                if !matches!(s.tok, Tok::Str(_)) {
                    return Err(syntax(s.line, s.column, "expected quoted include path"));
                }
                self.expect(Tok::Semi, "`;`")?;
                Ok(())
            }
            "qreg" | "creg" => {
                if self.circuit.is_some() {
                    return Err(syntax(t.line, t.column, "register declared after first gate"));
                }
                let (name, _) = self.ident("register name")?;
                self.expect(Tok::LBracket, "`[`")?;
                let size = self.uint()?;
                self.expect(Tok::RBracket, "`]`")?;
                self.expect(Tok::Semi, "`;`")?;
                let slot = if word == "qreg" {
                    &mut self.qreg
                } else {
                    &mut self.creg
                };
                if slot.is_some() {
                    return Err(syntax(t.line, t.column, format!("only one {word} is supported")));
                }
                *slot = Some((name, size));
                Ok(())
            }
            "measure" => {
                let q = self.operand(self.qreg.clone().as_ref(), "quantum", false)?[0];
                self.expect(Tok::Arrow, "`->`")?;
                let c = self.operand(self.creg.clone().as_ref(), "classical", false)?[0];
                self.expect(Tok::Semi, "`;`")?;
                self.push(&t, Gate::measure(q, c))
            }
            "barrier" => {
                let mut qubits = Vec::new();
                loop {
                    qubits.extend(self.operand(self.qreg.clone().as_ref(), "quantum", true)?);
                    let sep = self.next("`,` or `;`")?;
                    match sep.tok {
                        Tok::Comma => continue,
                        Tok::Semi => break,
                        _ => return Err(syntax(sep.line, sep.column, "expected `,` or `;`")),
                    }
                }
                self.push(&t, Gate::barrier(qubits))
            }
            "gate" | "opaque" => Err(syntax(
                t.line,
                t.column,
                "custom gate definitions are not supported",
            )),
            "if" => Err(syntax(t.line, t.column, "conditionals are not supported")),
            name => {
                let n_params = match name {
                    "rx" | "rz" => 1,
                    "h" | "x" | "sx" | "cx" | "swap" => 0,
                    _ => {
                        return Err(QasmError::UnsupportedGate {
                            name: name.to_string(),
                            line: t.line,
                            column: t.column,
                        })
                    }
                };
                let mut params = Vec::new();
                if matches!(self.peek().map(|t| &t.tok), Some(Tok::LParen)) {
                    self.pos += 1;
                    if !matches!(self.peek().map(|t| &t.tok), Some(Tok::RParen)) {
                        loop {
                            params.push(self.real()?);
                            let sep = self.next("`,` or `)`")?;
                            match sep.tok {
                                Tok::Comma => continue,
                                Tok::RParen => break,
                                _ => return Err(syntax(sep.line, sep.column, "expected `,` or `)`")),
                            }
                        }
                    } else {
                        self.pos += 1;
                    }
                }
                if params.len() != n_params {
                    return Err(syntax(
                        t.line,
                        t.column,
                        format!("`{name}` takes {n_params} parameter(s), got {}", params.len()),
                    ));
                }
                let mut qubits = Vec::new();
                loop {
                    qubits.extend(self.operand(self.qreg.clone().as_ref(), "quantum", false)?);
                    let sep = self.next("`,` or `;`")?;
                    match sep.tok {
                        Tok::Comma => continue,
                        Tok::Semi => break,
                        _ => return Err(syntax(sep.line, sep.column, "expected `,` or `;`")),
                    }
                }
                let kind = match name {
                    "h" => GateKind::H,
                    "x" => GateKind::X,
                    "sx" => GateKind::SX,
                    "rx" => GateKind::RX(params[0]),
                    "rz" => GateKind::RZ(params[0]),
                    "cx" => GateKind::CX,
                    _ => GateKind::Swap,
                };
                self.push(&t, Gate::new(kind, qubits))
            }
        }
    }
}

/// Parse the supported OpenQASM 2.0 subset. Gates keep source order.
pub fn parse_qasm(text: &str) -> Result<Circuit, QasmError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        qreg: None,
        creg: None,
        circuit: None,
    };

    let (word, t) = p.ident("`OPENQASM` header")?;
    if word != "OPENQASM" {
        return Err(syntax(t.line, t.column, "program must start with `OPENQASM 2.0;`"));
    }
    let v = p.next("version")?;
    match &v.tok {
        Tok::Number(s) if s == "2.0" || s == "2" => {}
        _ => return Err(syntax(v.line, v.column, "only OPENQASM 2.0 is supported")),
    }
    p.expect(Tok::Semi, "`;`")?;

    while p.peek().is_some() {
        p.statement()?;
    }

    match p.circuit.take() {
        Some(c) => Ok(c),
        None => {
            let (_, nq) = p.qreg.ok_or_else(|| {
                let (line, column) = p.toks.last().map(|t| (t.line, t.column)).unwrap_or((1, 1));
                syntax(line, column, "missing qreg declaration")
            })?;
            let nc = p.creg.map(|(_, n)| n).unwrap_or(0);
            Ok(Circuit::new(nq, nc).with_name("qasm"))
        }
    }
}

/// Deterministic OpenQASM text; angles are written with 17 significant
/// digits so that parsing reproduces them exactly.
pub fn emit_qasm(c: &Circuit) -> String {
    let mut s = String::new();
    s.push_str("OPENQASM 2.0;\n");
    s.push_str("include \"qelib1.inc\";\n");
    let _ = writeln!(s, "qreg q[{}];", c.num_qubits());
    if c.num_clbits() > 0 {
        let _ = writeln!(s, "creg c[{}];", c.num_clbits());
    }
    for g in c.gates() {
        let operands: Vec<String> = g.qubits.iter().map(|q| format!("q[{q}]")).collect();
        let operands = operands.join(",");
        match g.kind {
            GateKind::Measure => {
                let _ = writeln!(
                    s,
                    "measure {operands} -> c[{}];",
                    g.clbit.expect("validated measure has a clbit")
                );
            }
            GateKind::RX(theta) | GateKind::RZ(theta) => {
                let _ = writeln!(s, "{}({theta:.16e}) {operands};", g.kind.name());
            }
            _ => {
                let _ = writeln!(s, "{} {operands};", g.kind.name());
            }
        }
    }
    s
}
