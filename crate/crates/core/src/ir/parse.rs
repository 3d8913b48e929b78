// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for the textual IR format (`.cir`).

use super::{
    Assignment, Cell, CellKind, Component, Control, Group, InvokeArg, PortDir, PortRef, Program,
    ScalarPort,
};
use crate::floatlib::CmpOp;

#[derive(Debug, Clone, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub message: String,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(u64),
    Hex(u64),
    Punct(char),
    Eof,
}

struct Lexer {
    toks: Vec<(Tok, u32, u32)>,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, u32, u32)>, ParseError> {
    let mut toks = Vec::new();
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    let (mut line, mut col) = (1u32, 1u32);
    let err = |m: &str, line, col| ParseError { message: m.to_string(), line, col };
    while i < bytes.len() {
        let c = bytes[i];
        let (tline, tcol) = (line, col);
        let bump = |i: &mut usize, line: &mut u32, col: &mut u32| {
            if bytes[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };
        if c.is_whitespace() {
            bump(&mut i, &mut line, &mut col);
            continue;
        }
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == '/' {
            while i < bytes.len() && bytes[i] != '\n' {
                bump(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == '*' {
            bump(&mut i, &mut line, &mut col);
            bump(&mut i, &mut line, &mut col);
            loop {
                if i + 1 >= bytes.len() {
                    return Err(err("unterminated block comment", tline, tcol));
                }
                if bytes[i] == '*' && bytes[i + 1] == '/' {
                    bump(&mut i, &mut line, &mut col);
                    bump(&mut i, &mut line, &mut col);
                    break;
                }
                bump(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                s.push(bytes[i]);
                bump(&mut i, &mut line, &mut col);
            }
            toks.push((Tok::Ident(s), tline, tcol));
            continue;
        }
        if c.is_ascii_digit() {
            if c == '0' && i + 1 < bytes.len() && (bytes[i + 1] == 'x' || bytes[i + 1] == 'X') {
                bump(&mut i, &mut line, &mut col);
                bump(&mut i, &mut line, &mut col);
                let mut s = String::new();
                while i < bytes.len() && bytes[i].is_ascii_hexdigit() {
                    s.push(bytes[i]);
                    bump(&mut i, &mut line, &mut col);
                }
                if s.is_empty() {
                    return Err(err("expected hex digits after 0x", tline, tcol));
                }
                let v = u64::from_str_radix(&s, 16)
                    .map_err(|_| err("hex literal does not fit in 64 bits", tline, tcol))?;
                toks.push((Tok::Hex(v), tline, tcol));
            } else {
                let mut s = String::new();
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    s.push(bytes[i]);
                    bump(&mut i, &mut line, &mut col);
                }
                let v: u64 = s
                    .parse()
                    .map_err(|_| err("integer literal does not fit in 64 bits", tline, tcol))?;
                toks.push((Tok::Number(v), tline, tcol));
            }
            continue;
        }
        if "(){}[],;=.:".contains(c) {
            toks.push((Tok::Punct(c), tline, tcol));
            bump(&mut i, &mut line, &mut col);
            continue;
        }
        return Err(err(&format!("unexpected character '{c}'"), tline, tcol));
    }
    toks.push((Tok::Eof, line, col));
    Ok(toks)
}

impl Lexer {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn here(&self) -> (u32, u32) {
        let (_, l, c) = &self.toks[self.pos];
        (*l, *c)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError { message: msg.into(), line, col }
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ParseError> {
        match self.next() {
            Tok::Punct(p) if p == c => Ok(()),
            t => Err(self.err(format!("expected '{c}', found {t:?}"))),
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Tok::Ident(s) => Ok(s),
            t => Err(self.err(format!("expected identifier, found {t:?}"))),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.next() {
            Tok::Ident(s) if s == kw => Ok(()),
            t => Err(self.err(format!("expected '{kw}', found {t:?}"))),
        }
    }

    fn expect_number(&mut self) -> Result<u64, ParseError> {
        match self.next() {
            Tok::Number(n) => Ok(n),
            t => Err(self.err(format!("expected number, found {t:?}"))),
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.next();
            true
        } else {
            false
        }
    }
}

pub fn parse_ir(text: &str) -> Result<Program, ParseError> {
    let mut lx = Lexer { toks: lex(text)?, pos: 0 };
    lx.expect_keyword("entry")?;
    let entry = lx.expect_ident()?;
    lx.expect_punct(';')?;

    let mut components = Vec::new();
    let mut invoke_uses: Vec<(String, u32, u32)> = Vec::new();
    while !matches!(lx.peek(), Tok::Eof) {
        components.push(parse_component(&mut lx, &mut invoke_uses)?);
    }

    if !components.iter().any(|c| c.name == entry) {
        return Err(ParseError {
            message: format!("unresolved reference: entry component '{entry}'"),
            line: 1,
            col: 1,
        });
    }
    for (name, line, col) in invoke_uses {
        if !components.iter().any(|c| c.name == name) {
            return Err(ParseError {
                message: format!("unresolved reference: invoked component '{name}'"),
                line,
                col,
            });
        }
    }
    for c in &components {
        if components.iter().filter(|o| o.name == c.name).count() > 1 {
            return Err(ParseError {
                message: format!("duplicate component name '{}'", c.name),
                line: 1,
                col: 1,
            });
        }
    }
    Ok(Program { components, entry })
}

fn parse_component(
    lx: &mut Lexer,
    invoke_uses: &mut Vec<(String, u32, u32)>,
) -> Result<Component, ParseError> {
    lx.expect_keyword("component")?;
    let name = lx.expect_ident()?;
    lx.expect_punct('(')?;
    let mut scalar_ports = Vec::new();
    if !matches!(lx.peek(), Tok::Punct(')')) {
        loop {
            let pname = lx.expect_ident()?;
            lx.expect_punct(':')?;
            let dir = match lx.expect_ident()?.as_str() {
                "in" => PortDir::In,
                "out" => PortDir::Out,
                d => return Err(lx.err(format!("expected port direction in/out, found '{d}'"))),
            };
            let width = lx.expect_number()? as u32;
            scalar_ports.push(ScalarPort { name: pname, width, dir });
            if matches!(lx.peek(), Tok::Punct(',')) {
                lx.next();
            } else {
                break;
            }
        }
    }
    lx.expect_punct(')')?;
    lx.expect_punct('{')?;

    lx.expect_keyword("cells")?;
    lx.expect_punct('{')?;
    let mut cells: Vec<Cell> = Vec::new();
    while !matches!(lx.peek(), Tok::Punct('}')) {
        let (line, col) = lx.here();
        let cname = lx.expect_ident()?;
        lx.expect_punct('=')?;
        let kind = parse_cell_kind(lx)?;
        lx.expect_punct(';')?;
        if cells.iter().any(|c| c.name == cname) {
            return Err(ParseError { message: format!("duplicate cell name '{cname}'"), line, col });
        }
        cells.push(Cell { name: cname, kind });
    }
    lx.expect_punct('}')?;

    lx.expect_keyword("groups")?;
    lx.expect_punct('{')?;
    let mut groups: Vec<Group> = Vec::new();
    while !matches!(lx.peek(), Tok::Punct('}')) {
        let (line, col) = lx.here();
        lx.expect_keyword("group")?;
        let gname = lx.expect_ident()?;
        lx.expect_keyword("latency")?;
        let static_latency = lx.expect_number()?;
        lx.expect_punct('{')?;
        let mut assignments = Vec::new();
        while !matches!(lx.peek(), Tok::Punct('}')) {
            let (aline, acol) = lx.here();
            let dest = parse_port_ref(lx)?;
            lx.expect_punct('=')?;
            let src = parse_port_ref(lx)?;
            lx.expect_punct(';')?;
            for pr in [&dest, &src] {
                match cells.iter().find(|c| c.name == pr.cell) {
                    None => {
                        return Err(ParseError {
                            message: format!("unresolved reference: cell '{}'", pr.cell),
                            line: aline,
                            col: acol,
                        })
                    }
                    Some(c) if !c.kind.has_port(&pr.port) => {
                        return Err(ParseError {
                            message: format!("cell '{}' has no port '{}'", pr.cell, pr.port),
                            line: aline,
                            col: acol,
                        })
                    }
                    _ => {}
                }
            }
            assignments.push(Assignment { dest, src });
        }
        lx.expect_punct('}')?;
        if groups.iter().any(|g| g.name == gname) {
            return Err(ParseError {
                message: format!("duplicate group name '{gname}'"),
                line,
                col,
            });
        }
        groups.push(Group { name: gname, assignments, static_latency });
    }
    lx.expect_punct('}')?;

    lx.expect_keyword("control")?;
    lx.expect_punct('{')?;
    let control = parse_control(lx, &groups, invoke_uses)?;
    lx.expect_punct('}')?;
    lx.expect_punct('}')?;

    Ok(Component { name, scalar_ports, cells, groups, control })
}

fn parse_cell_kind(lx: &mut Lexer) -> Result<CellKind, ParseError> {
    let kw = lx.expect_ident()?;
    Ok(match kw.as_str() {
        "register" => {
            lx.expect_punct('(')?;
            let width = lx.expect_number()? as u32;
            lx.expect_punct(')')?;
            CellKind::Register { width }
        }
        "memory" => {
            lx.expect_punct('(')?;
            let (float, width) = parse_elem_type(lx)?;
            lx.expect_punct(',')?;
            lx.expect_punct('[')?;
            let mut extents = Vec::new();
            loop {
                extents.push(lx.expect_number()?);
                if matches!(lx.peek(), Tok::Punct(',')) {
                    lx.next();
                } else {
                    break;
                }
            }
            lx.expect_punct(']')?;
            lx.expect_punct(')')?;
            CellKind::Memory { float, width, extents }
        }
        "int_add" => CellKind::IntAdd,
        "int_sub" => CellKind::IntSub,
        "int_mul" => CellKind::IntMul,
        "int_div" => CellKind::IntDiv,
        "int_mod" => CellKind::IntMod,
        "float_add" => CellKind::FloatAdd,
        "float_mul" => CellKind::FloatMul,
        "float_div" => CellKind::FloatDiv,
        "float_exp" => CellKind::FloatExp,
        "int_cmp" | "float_cmp" => {
            lx.expect_punct('(')?;
            let opname = lx.expect_ident()?;
            let op = CmpOp::from_keyword(&opname)
                .ok_or_else(|| lx.err(format!("unknown compare op '{opname}'")))?;
            lx.expect_punct(')')?;
            if kw == "int_cmp" {
                CellKind::IntCmp(op)
            } else {
                CellKind::FloatCmp(op)
            }
        }
        "const" => {
            let (float, width) = parse_elem_type(lx)?;
            let bits = match lx.next() {
                Tok::Hex(v) => v,
                Tok::Number(v) => v,
                t => return Err(lx.err(format!("expected constant bits, found {t:?}"))),
            };
            if width < 64 && bits >> width != 0 {
                return Err(lx.err(format!("constant 0x{bits:X} does not fit in {width} bits")));
            }
            CellKind::Constant { float, width, bits }
        }
        other => return Err(lx.err(format!("unknown cell kind '{other}'"))),
    })
}

fn parse_elem_type(lx: &mut Lexer) -> Result<(bool, u32), ParseError> {
    let t = lx.expect_ident()?;
    if t == "f32" {
        return Ok((true, 32));
    }
    if let Some(rest) = t.strip_prefix('i') {
        if let Ok(w) = rest.parse::<u32>() {
            if (1..=64).contains(&w) {
                return Ok((false, w));
            }
        }
    }
    Err(lx.err(format!("expected element type f32 or i<width>, found '{t}'")))
}

fn parse_port_ref(lx: &mut Lexer) -> Result<PortRef, ParseError> {
    let cell = lx.expect_ident()?;
    lx.expect_punct('.')?;
    let port = lx.expect_ident()?;
    Ok(PortRef { cell, port })
}

fn parse_control(
    lx: &mut Lexer,
    groups: &[Group],
    invoke_uses: &mut Vec<(String, u32, u32)>,
) -> Result<Control, ParseError> {
    let (line, col) = lx.here();
    let kw = lx.expect_ident()?;
    Ok(match kw.as_str() {
        "enable" => {
            let g = lx.expect_ident()?;
            lx.expect_punct(';')?;
            if !groups.iter().any(|x| x.name == g) {
                return Err(ParseError {
                    message: format!("unresolved reference: group '{g}'"),
                    line,
                    col,
                });
            }
            Control::Enable(g)
        }
        "seq" | "par" => {
            lx.expect_punct('{')?;
            let mut children = Vec::new();
            while !matches!(lx.peek(), Tok::Punct('}')) {
                children.push(parse_control(lx, groups, invoke_uses)?);
            }
            lx.expect_punct('}')?;
            if kw == "seq" {
                Control::Seq(children)
            } else {
                Control::Par(children)
            }
        }
        "if" => {
            let cond = parse_port_ref(lx)?;
            lx.expect_punct('{')?;
            let then = Box::new(parse_control(lx, groups, invoke_uses)?);
            lx.expect_punct('}')?;
            let els = if lx.eat_keyword("else") {
                lx.expect_punct('{')?;
                let e = parse_control(lx, groups, invoke_uses)?;
                lx.expect_punct('}')?;
                Some(Box::new(e))
            } else {
                None
            };
            Control::If { cond, then, els }
        }
        "while" => {
            let cond = parse_port_ref(lx)?;
            lx.expect_punct('{')?;
            let body = Box::new(parse_control(lx, groups, invoke_uses)?);
            lx.expect_punct('}')?;
            Control::While { cond, body }
        }
        "invoke" => {
            let component = lx.expect_ident()?;
            invoke_uses.push((component.clone(), line, col));
            lx.expect_punct('(')?;
            let mut bindings = Vec::new();
            if !matches!(lx.peek(), Tok::Punct(')')) {
                loop {
                    let name = lx.expect_ident()?;
                    lx.expect_punct('=')?;
                    let target = lx.expect_ident()?;
                    let arg = if matches!(lx.peek(), Tok::Punct('.')) {
                        lx.next();
                        let port = lx.expect_ident()?;
                        InvokeArg::Port(PortRef { cell: target, port })
                    } else {
                        InvokeArg::Mem(target)
                    };
                    bindings.push((name, arg));
                    if matches!(lx.peek(), Tok::Punct(',')) {
                        lx.next();
                    } else {
                        break;
                    }
                }
            }
            lx.expect_punct(')')?;
            lx.expect_punct(';')?;
            Control::Invoke { component, bindings }
        }
        other => {
            return Err(ParseError {
                message: format!("expected control node, found '{other}'"),
                line,
                col,
            })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::print_ir;

    const SRC: &str = "entry main;\n\
                       \n\
                       component main() {\n\
                       cells {\n\
                       r = register(32);\n\
                       k = const i32 0x5;\n\
                       m = memory(i32, [4]);\n\
                       }\n\
                       groups {\n\
                       group g latency 2 {\n\
                       r.in = k.out;\n\
                       }\n\
                       }\n\
                       control {\n\
                       seq {\n\
                       enable g;\n\
                       if r.out {\n\
                       enable g;\n\
                       }\n\
                       else {\n\
                       while r.out {\n\
                       enable g;\n\
                       }\n\
                       }\n\
                       }\n\
                       }\n\
                       }\n";

    #[test]
    fn text_round_trips() {
        let p = parse_ir(SRC).expect("source parses");
        let again = parse_ir(&print_ir(&p)).expect("printed text parses");
        assert_eq!(p, again);
    }

    #[test]
    fn unresolved_group_reference_is_an_error() {
        let bad = SRC.replace("enable g;\n if", "enable nope;\n if");
        let bad = if bad == SRC { SRC.replacen("enable g;", "enable nope;", 1) } else { bad };
        let err = parse_ir(&bad).unwrap_err();
        assert!(err.to_string().contains("nope"), "unexpected error: {err}");
    }

    #[test]
    fn unknown_port_is_an_error() {
        let bad = SRC.replace("r.in = k.out;", "r.bogus = k.out;");
        assert!(parse_ir(&bad).is_err());
    }
}
