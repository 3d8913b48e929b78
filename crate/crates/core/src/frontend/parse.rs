// SPDX-License-Identifier: Apache-2.0

//! Parser and type checker for the `.aff` DSL. Surface syntax is C-like so
//! loop-nest fixtures read like ordinary kernels; float expressions are
//! desugared to three-address loads/computes during parsing, and integer
//! expressions are checked to be affine in the loop variables.

use std::collections::BTreeMap;

use super::{
    AffineCond, AffineExpr, CallArg, ComputeOp, ElemType, Function, MemRef, Operand, Stmt,
};
use crate::floatlib::{f32_encode, CmpOp};

#[derive(Debug, Clone, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct DslError {
    pub message: String,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(String),
    Punct(&'static str),
    Eof,
}

fn lex(text: &str) -> Result<Vec<(Tok, u32, u32)>, DslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let (mut line, mut col) = (1u32, 1u32);
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && i + 1 < chars.len() && chars[i + 1] == '/' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && i + 1 < chars.len() && chars[i + 1] == '*' {
            bump!();
            bump!();
            while i + 1 < chars.len() && !(chars[i] == '*' && chars[i + 1] == '/') {
                bump!();
            }
            if i + 1 >= chars.len() {
                return Err(DslError {
                    message: "unterminated block comment".into(),
                    line: tline,
                    col: tcol,
                });
            }
            bump!();
            bump!();
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                bump!();
            }
            toks.push((Tok::Ident(s), tline, tcol));
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            let mut is_float = false;
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || chars[i] == '.'
                    || chars[i] == 'e'
                    || chars[i] == 'E'
                    || ((chars[i] == '+' || chars[i] == '-')
                        && matches!(s.chars().last(), Some('e') | Some('E'))))
            {
                if chars[i] == '.' || chars[i] == 'e' || chars[i] == 'E' {
                    is_float = true;
                }
                s.push(chars[i]);
                bump!();
            }
            if is_float {
                toks.push((Tok::Float(s), tline, tcol));
            } else {
                let v: i64 = s.parse().map_err(|_| DslError {
                    message: "integer literal out of range".into(),
                    line: tline,
                    col: tcol,
                })?;
                toks.push((Tok::Int(v), tline, tcol));
            }
            continue;
        }
        let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let multi = ["++", "+=", "==", "!=", "<=", ">="];
        if let Some(m) = multi.iter().find(|m| two.starts_with(**m)) {
            toks.push((Tok::Punct(m), tline, tcol));
            bump!();
            bump!();
            continue;
        }
        let singles = "+-*/%<>=(){}[],;:";
        if let Some(pos) = singles.find(c) {
            let s = &singles[pos..pos + c.len_utf8()];
            // leak-free static mapping
            let p: &'static str = match s {
                "+" => "+",
                "-" => "-",
                "*" => "*",
                "/" => "/",
                "%" => "%",
                "<" => "<",
                ">" => ">",
                "=" => "=",
                "(" => "(",
                ")" => ")",
                "{" => "{",
                "}" => "}",
                "[" => "[",
                "]" => "]",
                "," => ",",
                ";" => ";",
                ":" => ":",
                _ => unreachable!(),
            };
            toks.push((Tok::Punct(p), tline, tcol));
            bump!();
            continue;
        }
        return Err(DslError {
            message: format!("unexpected character '{c}'"),
            line: tline,
            col: tcol,
        });
    }
    toks.push((Tok::Eof, line, col));
    Ok(toks)
}

#[derive(Clone, Copy, PartialEq)]
enum LocalKind {
    LoopVar,
    AffineInt,
    RuntimeInt,
    Float,
    ScalarIntParam,
    ScalarFloatParam,
}

struct Parser {
    toks: Vec<(Tok, u32, u32)>,
    pos: usize,
    mems: Vec<MemRef>,
    // name -> kind; affine locals also carry their (substituted) definition
    scope: BTreeMap<String, LocalKind>,
    affine_defs: BTreeMap<String, AffineExpr>,
    locals: Vec<(String, ElemType)>,
    temp_counter: u32,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn here(&self) -> (u32, u32) {
        let (_, l, c) = self.toks[self.pos];
        (l, c)
    }

    fn err(&self, msg: impl Into<String>) -> DslError {
        let (line, col) = self.here();
        DslError { message: msg.into(), line, col }
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), DslError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{p}', found {:?}", self.peek())))
        }
    }

    fn expect_ident(&mut self) -> Result<String, DslError> {
        match self.next() {
            Tok::Ident(s) => Ok(s),
            t => Err(self.err(format!("expected identifier, found {t:?}"))),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), DslError> {
        match self.next() {
            Tok::Ident(s) if s == kw => Ok(()),
            t => Err(self.err(format!("expected '{kw}', found {t:?}"))),
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

    fn expect_int(&mut self) -> Result<i64, DslError> {
        let neg = self.eat_punct("-");
        match self.next() {
            Tok::Int(v) => Ok(if neg { -v } else { v }),
            t => Err(self.err(format!("expected integer literal, found {t:?}"))),
        }
    }

    fn fresh_temp(&mut self, ty: ElemType) -> String {
        let name = format!("__t{}", self.temp_counter);
        self.temp_counter += 1;
        self.locals.push((name.clone(), ty));
        name
    }
}

pub fn parse_dsl(text: &str) -> Result<Vec<Function>, DslError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        mems: Vec::new(),
        scope: BTreeMap::new(),
        affine_defs: BTreeMap::new(),
        locals: Vec::new(),
        temp_counter: 0,
    };
    let mut funcs = Vec::new();
    while !matches!(p.peek(), Tok::Eof) {
        funcs.push(parse_function(&mut p)?);
    }
    // call targets must resolve
    let names: Vec<String> = funcs.iter().map(|f: &Function| f.name.clone()).collect();
    for f in &funcs {
        check_calls(f, &f.body, &funcs, &names)?;
    }
    Ok(funcs)
}

fn check_calls(
    f: &Function,
    body: &[Stmt],
    funcs: &[Function],
    names: &[String],
) -> Result<(), DslError> {
    for s in body {
        match s {
            Stmt::Call { func, args } => {
                let Some(callee) = funcs.iter().find(|g| g.name == *func) else {
                    return Err(DslError {
                        message: format!("call to undefined function '{func}'"),
                        line: 0,
                        col: 0,
                    });
                };
                let want = callee.scalar_params.len() + callee.mem_params.len();
                if args.len() != want {
                    return Err(DslError {
                        message: format!(
                            "call to '{func}' passes {} args, expected {want}",
                            args.len()
                        ),
                        line: 0,
                        col: 0,
                    });
                }
                let _ = f;
                let _ = names;
            }
            Stmt::For { body, .. } => check_calls(f, body, funcs, names)?,
            Stmt::ParArms { arms } => {
                for a in arms {
                    check_calls(f, a, funcs, names)?;
                }
            }
            Stmt::If { then, els, .. } => {
                check_calls(f, then, funcs, names)?;
                check_calls(f, els, funcs, names)?;
            }
            _ => {}
        }
    }
    Ok(())
}

fn parse_function(p: &mut Parser) -> Result<Function, DslError> {
    p.expect_keyword("func")?;
    let name = p.expect_ident()?;
    p.expect_punct("(")?;
    let mut scalar_params = Vec::new();
    let mut mem_params = Vec::new();
    p.mems.clear();
    p.scope.clear();
    p.affine_defs.clear();
    p.locals = Vec::new();
    p.temp_counter = 0;
    if !matches!(p.peek(), Tok::Punct(")")) {
        loop {
            let pname = p.expect_ident()?;
            p.expect_punct(":")?;
            let ty = p.expect_ident()?;
            let elem = match ty.as_str() {
                "int" => ElemType::Int32,
                "f32" => ElemType::F32,
                other => return Err(p.err(format!("unknown type '{other}'"))),
            };
            if matches!(p.peek(), Tok::Punct("[")) {
                let mut extents = Vec::new();
                while p.eat_punct("[") {
                    let e = p.expect_int()?;
                    if e < 1 {
                        return Err(p.err("memory extent must be positive"));
                    }
                    extents.push(e as u64);
                    p.expect_punct("]")?;
                }
                if mem_params.iter().any(|m: &MemRef| m.name == pname)
                    || scalar_params.iter().any(|(n, _): &(String, ElemType)| *n == pname)
                {
                    return Err(p.err(format!("duplicate parameter '{pname}'")));
                }
                mem_params.push(MemRef { name: pname, elem, extents });
            } else {
                if scalar_params.iter().any(|(n, _): &(String, ElemType)| *n == pname)
                    || mem_params.iter().any(|m: &MemRef| m.name == pname)
                {
                    return Err(p.err(format!("duplicate parameter '{pname}'")));
                }
                let kind = match elem {
                    ElemType::Int32 => LocalKind::ScalarIntParam,
                    ElemType::F32 => LocalKind::ScalarFloatParam,
                };
                p.scope.insert(pname.clone(), kind);
                scalar_params.push((pname, elem));
            }
            if !p.eat_punct(",") {
                break;
            }
        }
    }
    p.expect_punct(")")?;
    p.mems = mem_params.clone();
    p.expect_punct("{")?;
    let body = parse_block_body(p)?;
    Ok(Function { name, scalar_params, mem_params, locals: p.locals.clone(), body })
}

fn parse_block_body(p: &mut Parser) -> Result<Vec<Stmt>, DslError> {
    let mut stmts = Vec::new();
    while !matches!(p.peek(), Tok::Punct("}")) {
        parse_stmt(p, &mut stmts)?;
    }
    p.expect_punct("}")?;
    Ok(stmts)
}

fn parse_stmt(p: &mut Parser, out: &mut Vec<Stmt>) -> Result<(), DslError> {
    if p.eat_keyword("par") {
        p.expect_keyword("for")?;
        return parse_for(p, true, out);
    }
    if p.eat_keyword("for") {
        return parse_for(p, false, out);
    }
    if p.eat_keyword("parallel") {
        p.expect_punct("{")?;
        let mut arms = Vec::new();
        while p.eat_keyword("arm") {
            p.expect_punct("{")?;
            arms.push(parse_block_body(p)?);
        }
        p.expect_punct("}")?;
        out.push(Stmt::ParArms { arms });
        return Ok(());
    }
    if p.eat_keyword("if") {
        p.expect_punct("(")?;
        let cond = parse_cond(p)?;
        p.expect_punct(")")?;
        p.expect_punct("{")?;
        let then = parse_block_body(p)?;
        let els = if p.eat_keyword("else") {
            p.expect_punct("{")?;
            parse_block_body(p)?
        } else {
            Vec::new()
        };
        out.push(Stmt::If { cond, then, els });
        return Ok(());
    }
    if p.eat_keyword("call") {
        let func = p.expect_ident()?;
        p.expect_punct("(")?;
        let mut args = Vec::new();
        if !matches!(p.peek(), Tok::Punct(")")) {
            loop {
                if let Tok::Ident(name) = p.peek().clone() {
                    if p.mems.iter().any(|m| m.name == name)
                        && !matches!(p.peek2(), Tok::Punct("["))
                    {
                        p.next();
                        args.push(CallArg::Mem(name));
                        if !p.eat_punct(",") {
                            break;
                        }
                        continue;
                    }
                }
                let e = parse_int_expr(p)?;
                args.push(CallArg::Scalar(Operand::Affine(e)));
                if !p.eat_punct(",") {
                    break;
                }
            }
        }
        p.expect_punct(")")?;
        p.expect_punct(";")?;
        out.push(Stmt::Call { func, args });
        return Ok(());
    }
    if p.eat_keyword("int") {
        let name = p.expect_ident()?;
        if p.scope.contains_key(&name) {
            return Err(p.err(format!("redefinition of '{name}'")));
        }
        p.expect_punct("=")?;
        // memory load into a runtime int, or an affine definition
        if let Tok::Ident(m) = p.peek().clone() {
            if p.mems.iter().any(|mm| mm.name == m) {
                p.next();
                let idx = parse_indices(p, &m)?;
                p.expect_punct(";")?;
                check_mem_elem(p, &m, ElemType::Int32)?;
                p.scope.insert(name.clone(), LocalKind::RuntimeInt);
                p.locals.push((name.clone(), ElemType::Int32));
                out.push(Stmt::Load { dest: name, mem: m, idx });
                return Ok(());
            }
        }
        let e = parse_int_expr(p)?;
        p.expect_punct(";")?;
        p.scope.insert(name.clone(), LocalKind::AffineInt);
        p.affine_defs.insert(name.clone(), e.clone());
        p.locals.push((name.clone(), ElemType::Int32));
        out.push(Stmt::Compute { dest: name, op: ComputeOp::AffineId, operands: vec![Operand::Affine(e)] });
        return Ok(());
    }
    if p.eat_keyword("f32") {
        let name = p.expect_ident()?;
        if p.scope.contains_key(&name) {
            return Err(p.err(format!("redefinition of '{name}'")));
        }
        p.expect_punct("=")?;
        let operand = parse_float_expr(p, out)?;
        p.expect_punct(";")?;
        p.scope.insert(name.clone(), LocalKind::Float);
        p.locals.push((name.clone(), ElemType::F32));
        bind_float(p, out, name, operand);
        return Ok(());
    }

    // assignment: local or memory store
    let name = p.expect_ident()?;
    if matches!(p.peek(), Tok::Punct("[")) {
        let mem = name;
        if !p.mems.iter().any(|m| m.name == mem) {
            return Err(p.err(format!("unknown memory '{mem}'")));
        }
        let idx = parse_indices(p, &mem)?;
        p.expect_punct("=")?;
        let elem = p.mems.iter().find(|m| m.name == mem).unwrap().elem;
        let value = match elem {
            ElemType::Int32 => {
                // a bare runtime-int local is allowed as a stored value
                if let Tok::Ident(id) = p.peek().clone() {
                    if p.scope.get(&id) == Some(&LocalKind::RuntimeInt)
                        && matches!(p.peek2(), Tok::Punct(";"))
                    {
                        p.next();
                        Operand::Local(id)
                    } else {
                        Operand::Affine(parse_int_expr(p)?)
                    }
                } else {
                    Operand::Affine(parse_int_expr(p)?)
                }
            }
            ElemType::F32 => parse_float_expr(p, out)?,
        };
        p.expect_punct(";")?;
        out.push(Stmt::Store { mem, idx, value });
        return Ok(());
    }
    // local reassignment (float locals only; affine ints are single-assignment)
    match p.scope.get(&name) {
        Some(LocalKind::Float) => {
            p.expect_punct("=")?;
            let operand = parse_float_expr(p, out)?;
            p.expect_punct(";")?;
            bind_float(p, out, name, operand);
            Ok(())
        }
        Some(LocalKind::AffineInt) => {
            Err(p.err(format!("affine int local '{name}' is single-assignment")))
        }
        _ => Err(p.err(format!("cannot assign to '{name}'"))),
    }
}

// Copy propagation at parse time: when the value being bound is the fresh
// temporary produced by the statement just emitted, rename that statement's
// destination instead of emitting a register-to-register move.
fn bind_float(p: &mut Parser, out: &mut Vec<Stmt>, name: String, operand: Operand) {
    if let Operand::Local(t) = &operand {
        if t.starts_with("__t") {
            let retarget = match out.last() {
                Some(Stmt::Load { dest, .. }) | Some(Stmt::Compute { dest, .. }) => dest == t,
                _ => false,
            };
            if retarget {
                match out.last_mut() {
                    Some(Stmt::Load { dest, .. }) | Some(Stmt::Compute { dest, .. }) => {
                        *dest = name;
                    }
                    _ => unreachable!(),
                }
                p.locals.retain(|(n, _)| n != t);
                return;
            }
        }
    }
    out.push(float_assign(name, operand));
}

fn float_assign(dest: String, operand: Operand) -> Stmt {
    // copy-through is represented as fadd with +0.0 identity avoided: use a
    // dedicated single-operand fmax(x, x)? No: keep a plain move via FAdd
    // with -0.0, which is the IEEE identity (x + -0.0 == x for all x, and
    // preserves -0.0 itself).
    Stmt::Compute {
        dest,
        op: ComputeOp::FAdd,
        operands: vec![operand, Operand::F32Const(0x8000_0000)],
    }
}

fn parse_for(p: &mut Parser, par: bool, out: &mut Vec<Stmt>) -> Result<(), DslError> {
    p.expect_punct("(")?;
    p.expect_keyword("int")?;
    let var = p.expect_ident()?;
    if p.scope.contains_key(&var) {
        return Err(p.err(format!("loop variable '{var}' shadows an existing name")));
    }
    p.expect_punct("=")?;
    let lo = p.expect_int()?;
    p.expect_punct(";")?;
    let v2 = p.expect_ident()?;
    if v2 != var {
        return Err(p.err("loop condition must test the loop variable"));
    }
    p.expect_punct("<")?;
    let hi = p.expect_int()?;
    p.expect_punct(";")?;
    let step = if p.eat_punct("++") {
        let v3 = p.expect_ident()?;
        if v3 != var {
            return Err(p.err("loop increment must update the loop variable"));
        }
        1
    } else {
        let v3 = p.expect_ident()?;
        if v3 != var {
            return Err(p.err("loop increment must update the loop variable"));
        }
        if p.eat_punct("++") {
            1
        } else {
            p.expect_punct("+=")?;
            let s = p.expect_int()?;
            if s < 1 {
                return Err(p.err("loop step must be >= 1"));
            }
            s
        }
    };
    p.expect_punct(")")?;
    p.expect_punct("{")?;
    p.scope.insert(var.clone(), LocalKind::LoopVar);
    let body = parse_block_body(p)?;
    p.scope.remove(&var);
    out.push(Stmt::For { var, lo, hi, step, par, body });
    Ok(())
}

fn parse_indices(p: &mut Parser, mem: &str) -> Result<Vec<AffineExpr>, DslError> {
    let mut idx = Vec::new();
    while p.eat_punct("[") {
        idx.push(parse_int_expr(p)?);
        p.expect_punct("]")?;
    }
    let m = p.mems.iter().find(|m| m.name == mem).unwrap();
    if idx.len() != m.extents.len() {
        return Err(p.err(format!(
            "memory '{}' has {} dimensions, {} indices given",
            mem,
            m.extents.len(),
            idx.len()
        )));
    }
    for (e, ext) in idx.iter().zip(&m.extents) {
        if let Some(c) = e.as_const() {
            if c < 0 || c as u64 >= *ext {
                return Err(p.err(format!("constant index {c} out of range for extent {ext}")));
            }
        }
    }
    Ok(idx)
}

fn parse_cond(p: &mut Parser) -> Result<AffineCond, DslError> {
    let lhs = parse_int_expr(p)?;
    let op = if p.eat_punct("==") {
        CmpOp::Eq
    } else if p.eat_punct("!=") {
        CmpOp::Ne
    } else if p.eat_punct("<=") {
        CmpOp::Le
    } else if p.eat_punct(">=") {
        CmpOp::Ge
    } else if p.eat_punct("<") {
        CmpOp::Lt
    } else if p.eat_punct(">") {
        CmpOp::Gt
    } else {
        return Err(p.err("expected comparison operator"));
    };
    let rhs = parse_int_expr(p)?;
    Ok(AffineCond { lhs, op, rhs })
}

// integer (affine) expressions: + - on terms; * by constant; / % by positive
// constant literals
fn parse_int_expr(p: &mut Parser) -> Result<AffineExpr, DslError> {
    let mut acc = parse_int_term(p)?;
    loop {
        if p.eat_punct("+") {
            acc = acc.add(&parse_int_term(p)?);
        } else if p.eat_punct("-") {
            acc = acc.sub(&parse_int_term(p)?);
        } else {
            return Ok(acc);
        }
    }
}

fn parse_int_term(p: &mut Parser) -> Result<AffineExpr, DslError> {
    let mut acc = parse_int_primary(p)?;
    loop {
        if p.eat_punct("*") {
            let rhs = parse_int_primary(p)?;
            if let Some(c) = rhs.as_const() {
                acc = acc.scale(c);
            } else if let Some(c) = acc.as_const() {
                acc = rhs.scale(c);
            } else {
                return Err(p.err("non-affine index expression: product of two variables"));
            }
        } else if p.eat_punct("/") {
            let rhs = parse_int_primary(p)?;
            match rhs.as_const() {
                Some(c) if c > 0 => acc = acc.floor_div(c),
                _ => return Err(p.err("divisor must be a positive constant")),
            }
        } else if p.eat_punct("%") {
            let rhs = parse_int_primary(p)?;
            match rhs.as_const() {
                Some(c) if c > 0 => acc = acc.modulo(c),
                _ => return Err(p.err("modulus must be a positive constant")),
            }
        } else {
            return Ok(acc);
        }
    }
}

fn parse_int_primary(p: &mut Parser) -> Result<AffineExpr, DslError> {
    if p.eat_punct("(") {
        let e = parse_int_expr(p)?;
        p.expect_punct(")")?;
        return Ok(e);
    }
    if p.eat_punct("-") {
        return Ok(parse_int_primary(p)?.scale(-1));
    }
    match p.next() {
        Tok::Int(v) => Ok(AffineExpr::constant(v)),
        Tok::Ident(name) => match p.scope.get(&name) {
            Some(LocalKind::LoopVar) | Some(LocalKind::ScalarIntParam) => {
                Ok(AffineExpr::var(name))
            }
            Some(LocalKind::AffineInt) => Ok(p.affine_defs[&name].clone()),
            Some(LocalKind::RuntimeInt) => {
                Err(p.err(format!("'{name}' is a loaded value; not usable in an affine expression")))
            }
            Some(LocalKind::Float) | Some(LocalKind::ScalarFloatParam) => {
                Err(p.err(format!("'{name}' is a float; expected an integer expression")))
            }
            None => Err(p.err(format!("unknown identifier '{name}'"))),
        },
        t => Err(p.err(format!("expected integer expression, found {t:?}"))),
    }
}

// float expressions, desugared into three-address computes
fn parse_float_expr(p: &mut Parser, out: &mut Vec<Stmt>) -> Result<Operand, DslError> {
    let mut acc = parse_float_term(p, out)?;
    while p.eat_punct("+") {
        let rhs = parse_float_term(p, out)?;
        let dest = p.fresh_temp(ElemType::F32);
        out.push(Stmt::Compute { dest: dest.clone(), op: ComputeOp::FAdd, operands: vec![acc, rhs] });
        acc = Operand::Local(dest);
    }
    Ok(acc)
}

fn parse_float_term(p: &mut Parser, out: &mut Vec<Stmt>) -> Result<Operand, DslError> {
    let mut acc = parse_float_primary(p, out)?;
    loop {
        let op = if p.eat_punct("*") {
            ComputeOp::FMul
        } else if p.eat_punct("/") {
            ComputeOp::FDiv
        } else {
            return Ok(acc);
        };
        let rhs = parse_float_primary(p, out)?;
        let dest = p.fresh_temp(ElemType::F32);
        out.push(Stmt::Compute { dest: dest.clone(), op, operands: vec![acc, rhs] });
        acc = Operand::Local(dest);
    }
}

fn parse_float_primary(p: &mut Parser, out: &mut Vec<Stmt>) -> Result<Operand, DslError> {
    if p.eat_punct("(") {
        let e = parse_float_expr(p, out)?;
        p.expect_punct(")")?;
        return Ok(e);
    }
    if p.eat_punct("-") {
        match p.next() {
            Tok::Float(s) => {
                let bits = f32_encode(&format!("-{s}"))
                    .ok_or_else(|| p.err(format!("bad float literal '-{s}'")))?;
                return Ok(Operand::F32Const(bits.0));
            }
            Tok::Int(v) => {
                let bits = f32_encode(&format!("-{v}"))
                    .ok_or_else(|| p.err("bad float literal".to_string()))?;
                return Ok(Operand::F32Const(bits.0));
            }
            t => return Err(p.err(format!("expected float literal after '-', found {t:?}"))),
        }
    }
    match p.next() {
        Tok::Float(s) => {
            let bits =
                f32_encode(&s).ok_or_else(|| p.err(format!("bad float literal '{s}'")))?;
            Ok(Operand::F32Const(bits.0))
        }
        Tok::Int(v) => {
            let bits = f32_encode(&v.to_string()).unwrap();
            Ok(Operand::F32Const(bits.0))
        }
        Tok::Ident(name) => {
            // builtins
            let builtin = match name.as_str() {
                "fexp" => Some((ComputeOp::FExp, 1)),
                "fmax" => Some((ComputeOp::FMax, 2)),
                "fmin" => Some((ComputeOp::FMin, 2)),
                _ => None,
            };
            if let Some((op, arity)) = builtin {
                p.expect_punct("(")?;
                let mut operands = Vec::new();
                for k in 0..arity {
                    if k > 0 {
                        p.expect_punct(",")?;
                    }
                    operands.push(parse_float_expr(p, out)?);
                }
                p.expect_punct(")")?;
                let dest = p.fresh_temp(ElemType::F32);
                out.push(Stmt::Compute { dest: dest.clone(), op, operands });
                return Ok(Operand::Local(dest));
            }
            if p.mems.iter().any(|m| m.name == name) {
                check_mem_elem(p, &name, ElemType::F32)?;
                let idx = parse_indices(p, &name)?;
                let dest = p.fresh_temp(ElemType::F32);
                out.push(Stmt::Load { dest: dest.clone(), mem: name, idx });
                return Ok(Operand::Local(dest));
            }
            match p.scope.get(&name) {
                Some(LocalKind::Float) | Some(LocalKind::ScalarFloatParam) => {
                    Ok(Operand::Local(name))
                }
                Some(_) => Err(p.err(format!("'{name}' is not a float value"))),
                None => Err(p.err(format!("unknown identifier '{name}'"))),
            }
        }
        t => Err(p.err(format!("expected float expression, found {t:?}"))),
    }
}

fn check_mem_elem(p: &Parser, mem: &str, want: ElemType) -> Result<(), DslError> {
    let m = p.mems.iter().find(|m| m.name == mem).unwrap();
    if m.elem != want {
        return Err(p.err(format!("memory '{mem}' element type mismatch")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{print_dsl, Stmt};

    const FULL: &str = "func helper(n: int, a: f32[6]) {\n\
                        a[n] = 1.0;\n\
                        }\n\
                        func k(x: f32, m: f32[4][6], y: f32[6]) {\n\
                        for (int i = 0; i < 4; ++i) {\n\
                        par for (int j = 0; j < 6; ++j) {\n\
                        f32 v = m[i][j] * x + 1.0;\n\
                        if (j % 2 == 0) {\n\
                        y[j] = fmax(v, 0.0);\n\
                        } else {\n\
                        y[j] = fmin(v, 1.0) / 2.0;\n\
                        }\n\
                        }\n\
                        }\n\
                        int q = 2*3 + 1;\n\
                        y[q / 7] = fexp(x * -1.0);\n\
                        call helper(q, y);\n\
                        parallel {\n\
                        arm { y[0] = 1.0; }\n\
                        arm { y[1] = 2.0; }\n\
                        }\n\
                        }";

    #[test]
    fn full_surface_parses_and_prints() {
        let funcs = parse_dsl(FULL).expect("source parses");
        assert_eq!(funcs.len(), 2);
        let k = funcs.iter().find(|f| f.name == "k").unwrap();
        assert_eq!(k.scalar_params.len(), 1);
        assert_eq!(k.mem_params.len(), 2);
        assert!(k.body.iter().any(|s| matches!(s, Stmt::Call { .. })));
        // the printed dump names every function and memory parameter
        let text: String = funcs.iter().map(print_dsl).collect();
        for needle in ["func helper", "func k", "m: f32[4][6]", "par for", "fmax", "fexp"] {
            assert!(text.contains(needle), "dump is missing '{needle}':\n{text}");
        }
    }

    #[test]
    fn parallel_blocks_parse_to_explicit_arms() {
        let funcs = parse_dsl(FULL).unwrap();
        let k = funcs.iter().find(|f| f.name == "k").unwrap();
        assert!(k
            .body
            .iter()
            .any(|s| matches!(s, Stmt::ParArms { arms } if arms.len() == 2)));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_dsl("func k(m: int[2]) { m[0] = }").unwrap_err();
        assert!(err.to_string().contains(':'), "error lacks position: {err}");
        assert!(parse_dsl("func k(m: int[2]) { m[0] = 1 }").is_err()); // missing ';'
    }
}
