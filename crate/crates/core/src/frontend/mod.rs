// SPDX-License-Identifier: Apache-2.0

//! The affine loop-nest DSL: a small C-like surface language in which all
//! fixtures and benchmark kernels are written. Memory indices are affine
//! expressions of loop variables; loop bounds are compile-time constants.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::floatlib::CmpOp;

mod interp;
mod parse;
mod print;

pub use interp::{
    interpret, reference_interpret, Images, Inputs, InterpError, InterpOptions, MemImage, Value,
};
pub use parse::{parse_dsl, DslError};
pub use print::print_dsl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElemType {
    Int32,
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemRef {
    pub name: String,
    pub elem: ElemType,
    pub extents: Vec<u64>,
}

impl MemRef {
    pub fn total_size(&self) -> u64 {
        self.extents.iter().product()
    }
}

/// An atom inside an affine expression: a variable, or a floor-div / mod of
/// a nested affine expression by a positive constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Atom {
    Var(String),
    Div(Box<AffineExpr>, i64),
    Mod(Box<AffineExpr>, i64),
}

/// Linear combination of atoms plus a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(i64, Atom)>,
    pub constant: i64,
}

impl AffineExpr {
    pub fn constant(c: i64) -> AffineExpr {
        AffineExpr { terms: vec![], constant: c }
    }

    pub fn var(name: impl Into<String>) -> AffineExpr {
        AffineExpr { terms: vec![(1, Atom::Var(name.into()))], constant: 0 }
    }

    pub fn as_const(&self) -> Option<i64> {
        if self.terms.is_empty() {
            Some(self.constant)
        } else {
            None
        }
    }

    pub fn add(&self, other: &AffineExpr) -> AffineExpr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        AffineExpr { terms, constant: self.constant + other.constant }.normalize()
    }

    pub fn sub(&self, other: &AffineExpr) -> AffineExpr {
        self.add(&other.scale(-1))
    }

    pub fn scale(&self, k: i64) -> AffineExpr {
        AffineExpr {
            terms: self.terms.iter().map(|(c, a)| (c * k, a.clone())).collect(),
            constant: self.constant * k,
        }
        .normalize()
    }

    pub fn floor_div(&self, d: i64) -> AffineExpr {
        assert!(d > 0, "divisor must be positive");
        AffineExpr { terms: vec![(1, Atom::Div(Box::new(self.clone()), d))], constant: 0 }
            .simplify()
    }

    pub fn modulo(&self, d: i64) -> AffineExpr {
        assert!(d > 0, "divisor must be positive");
        AffineExpr { terms: vec![(1, Atom::Mod(Box::new(self.clone()), d))], constant: 0 }
            .simplify()
    }

    /// Merge duplicate atoms, drop zero coefficients.
    pub fn normalize(&self) -> AffineExpr {
        let mut terms: Vec<(i64, Atom)> = Vec::new();
        for (c, a) in &self.terms {
            if let Some(slot) = terms.iter_mut().find(|(_, b)| b == a) {
                slot.0 += c;
            } else {
                terms.push((*c, a.clone()));
            }
        }
        terms.retain(|(c, _)| *c != 0);
        AffineExpr { terms, constant: self.constant }
    }

    /// Constant folding only. Div/mod fold when the operand is fully
    /// constant; symbolic identities like `(2i) % 2 = 0` are deliberately
    /// NOT applied — branch-select hardware must survive unless unrolling
    /// makes the index an actual constant. The symbolic machinery lives in
    /// `split_divisible` for callers that explicitly want a decomposition.
    pub fn simplify(&self) -> AffineExpr {
        let mut out = AffineExpr::constant(self.constant);
        for (c, a) in &self.normalize().terms {
            let piece = match a {
                Atom::Var(_) => AffineExpr { terms: vec![(1, a.clone())], constant: 0 },
                Atom::Div(e, m) => {
                    let es = e.simplify();
                    match es.as_const() {
                        Some(v) => AffineExpr::constant(v.div_euclid(*m)),
                        None => AffineExpr {
                            terms: vec![(1, Atom::Div(Box::new(es), *m))],
                            constant: 0,
                        },
                    }
                }
                Atom::Mod(e, m) => {
                    let es = e.simplify();
                    match es.as_const() {
                        Some(v) => AffineExpr::constant(v.rem_euclid(*m)),
                        None => AffineExpr {
                            terms: vec![(1, Atom::Mod(Box::new(es), *m))],
                            constant: 0,
                        },
                    }
                }
            };
            out = out.add(&piece.scale(*c));
        }
        out.normalize()
    }

    /// Split `self` into `(q, r)` with `self = m*q + r`, where `q` collects
    /// the terms with coefficients divisible by `m` (divided through) and
    /// `r` holds the rest plus the constant reduced into `[0, m)`.
    pub fn split_divisible(&self, m: i64) -> (AffineExpr, AffineExpr) {
        let mut quot = AffineExpr::constant(self.constant.div_euclid(m));
        let mut rem = AffineExpr::constant(self.constant.rem_euclid(m));
        for (c, a) in &self.terms {
            if c % m == 0 {
                quot.terms.push((c / m, a.clone()));
            } else {
                rem.terms.push((*c, a.clone()));
            }
        }
        (quot.normalize(), rem.normalize())
    }

    pub fn substitute(&self, var: &str, replacement: &AffineExpr) -> AffineExpr {
        let mut out = AffineExpr::constant(self.constant);
        for (c, a) in &self.terms {
            let piece = match a {
                Atom::Var(v) if v == var => replacement.clone(),
                Atom::Var(_) => AffineExpr { terms: vec![(1, a.clone())], constant: 0 },
                Atom::Div(e, m) => AffineExpr {
                    terms: vec![(1, Atom::Div(Box::new(e.substitute(var, replacement)), *m))],
                    constant: 0,
                },
                Atom::Mod(e, m) => AffineExpr {
                    terms: vec![(1, Atom::Mod(Box::new(e.substitute(var, replacement)), *m))],
                    constant: 0,
                },
            };
            out = out.add(&piece.scale(*c));
        }
        out.simplify()
    }

    pub fn vars(&self) -> Vec<String> {
        let mut acc = Vec::new();
        self.collect_vars(&mut acc);
        acc
    }

    fn collect_vars(&self, acc: &mut Vec<String>) {
        for (_, a) in &self.terms {
            match a {
                Atom::Var(v) => {
                    if !acc.contains(v) {
                        acc.push(v.clone());
                    }
                }
                Atom::Div(e, _) | Atom::Mod(e, _) => e.collect_vars(acc),
            }
        }
    }

    /// Evaluate over an integer environment. Div/mod require a non-negative
    /// numerator (the DSL restricts bank-index math to non-negative values).
    pub fn eval(&self, env: &BTreeMap<String, i64>) -> Result<i64, String> {
        let mut total = self.constant;
        for (c, a) in &self.terms {
            let v = match a {
                Atom::Var(name) => *env
                    .get(name)
                    .ok_or_else(|| format!("unbound variable '{name}'"))?,
                Atom::Div(e, m) => {
                    let n = e.eval(env)?;
                    if n < 0 {
                        return Err(format!("negative operand {n} to division"));
                    }
                    n.div_euclid(*m)
                }
                Atom::Mod(e, m) => {
                    let n = e.eval(env)?;
                    if n < 0 {
                        return Err(format!("negative operand {n} to modulo"));
                    }
                    n.rem_euclid(*m)
                }
            };
            total += c * v;
        }
        Ok(total)
    }
}

impl std::fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for (c, a) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if *c != 1 {
                write!(f, "{c}*")?;
            }
            match a {
                Atom::Var(v) => write!(f, "{v}")?,
                Atom::Div(e, m) => write!(f, "({e}) / {m}")?,
                Atom::Mod(e, m) => write!(f, "({e}) % {m}")?,
            }
        }
        if self.constant != 0 || first {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "{}", self.constant)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineCond {
    pub lhs: AffineExpr,
    pub op: CmpOp,
    pub rhs: AffineExpr,
}

impl AffineCond {
    pub fn eval(&self, env: &BTreeMap<String, i64>) -> Result<bool, String> {
        Ok(self.op.eval_int(self.lhs.eval(env)?, self.rhs.eval(env)?))
    }

    /// Compile-time decidable when both sides are constant.
    pub fn as_const(&self) -> Option<bool> {
        Some(self.op.eval_int(self.lhs.as_const()?, self.rhs.as_const()?))
    }

    pub fn substitute(&self, var: &str, repl: &AffineExpr) -> AffineCond {
        AffineCond {
            lhs: self.lhs.substitute(var, repl),
            op: self.op,
            rhs: self.rhs.substitute(var, repl),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Affine(AffineExpr),
    Local(String),
    F32Const(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComputeOp {
    /// Integer local defined by an affine expression.
    AffineId,
    FAdd,
    FMul,
    FDiv,
    FExp,
    FMax,
    FMin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CallArg {
    Mem(String),
    Scalar(Operand),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stmt {
    For {
        var: String,
        lo: i64,
        hi: i64,
        step: i64,
        par: bool,
        body: Vec<Stmt>,
    },
    /// Explicit parallel block produced by par-loop unrolling.
    ParArms { arms: Vec<Vec<Stmt>> },
    If { cond: AffineCond, then: Vec<Stmt>, els: Vec<Stmt> },
    Load { dest: String, mem: String, idx: Vec<AffineExpr> },
    Store { mem: String, idx: Vec<AffineExpr>, value: Operand },
    Compute { dest: String, op: ComputeOp, operands: Vec<Operand> },
    Call { func: String, args: Vec<CallArg> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Function {
    pub name: String,
    pub scalar_params: Vec<(String, ElemType)>,
    pub mem_params: Vec<MemRef>,
    pub locals: Vec<(String, ElemType)>,
    pub body: Vec<Stmt>,
}

impl Function {
    pub fn mem(&self, name: &str) -> Option<&MemRef> {
        self.mem_params.iter().find(|m| m.name == name)
    }

    pub fn local_type(&self, name: &str) -> Option<ElemType> {
        self.locals.iter().find(|(n, _)| n == name).map(|(_, t)| *t)
    }
}

/// Map every statement list in a function body, bottom-up.
pub fn map_stmts(body: &[Stmt], f: &mut impl FnMut(Stmt) -> Vec<Stmt>) -> Vec<Stmt> {
    let mut out = Vec::new();
    for s in body {
        let mapped = match s {
            Stmt::For { var, lo, hi, step, par, body } => Stmt::For {
                var: var.clone(),
                lo: *lo,
                hi: *hi,
                step: *step,
                par: *par,
                body: map_stmts(body, f),
            },
            Stmt::ParArms { arms } => {
                Stmt::ParArms { arms: arms.iter().map(|a| map_stmts(a, f)).collect() }
            }
            Stmt::If { cond, then, els } => Stmt::If {
                cond: cond.clone(),
                then: map_stmts(then, f),
                els: map_stmts(els, f),
            },
            other => other.clone(),
        };
        out.extend(f(mapped));
    }
    out
}
