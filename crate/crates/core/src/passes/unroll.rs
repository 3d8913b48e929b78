// SPDX-License-Identifier: Apache-2.0

//! Par-loop unrolling: every `par for` becomes an explicit parallel block
//! with one arm per iteration, the loop variable substituted as a constant
//! into each arm. Required before lowering: hardware parallel arms need
//! statically known indices.
//!
//! Each arm also gets private copies of every loop variable and local it
//! writes, so concurrent arms never share a register. A local both read
//! from the enclosing scope and written inside an arm would already be a
//! cross-arm race, so privatization loses nothing.

use std::collections::BTreeSet;

use crate::frontend::{AffineExpr, CallArg, ElemType, Function, Operand, Stmt};

use super::{fresh_name, substitute_stmts, used_names};

pub fn unroll_par(f: &Function) -> Function {
    let mut used = used_names(f);
    let mut locals = f.locals.clone();
    let body = unroll_block(&f.body, &mut used, &mut locals);
    Function { body, locals, ..f.clone() }
}

fn unroll_block(
    body: &[Stmt],
    used: &mut BTreeSet<String>,
    locals: &mut Vec<(String, ElemType)>,
) -> Vec<Stmt> {
    let mut out = Vec::new();
    for s in body {
        match s {
            Stmt::For { var, lo, hi, step, par, body: inner } => {
                let inner = unroll_block(inner, used, locals);
                if !par {
                    out.push(Stmt::For {
                        var: var.clone(),
                        lo: *lo,
                        hi: *hi,
                        step: *step,
                        par: false,
                        body: inner,
                    });
                    continue;
                }
                let mut arms = Vec::new();
                let mut v = *lo;
                while v < *hi {
                    let mut arm = substitute_stmts(&inner, var, &AffineExpr::constant(v));
                    privatize(&mut arm, used, locals);
                    arms.push(arm);
                    v += *step;
                }
                match arms.len() {
                    0 => {}
                    1 => out.extend(arms.pop().unwrap()),
                    _ => out.push(Stmt::ParArms { arms }),
                }
            }
            Stmt::ParArms { arms } => out.push(Stmt::ParArms {
                arms: arms.iter().map(|a| unroll_block(a, used, locals)).collect(),
            }),
            Stmt::If { cond, then, els } => out.push(Stmt::If {
                cond: cond.clone(),
                then: unroll_block(then, used, locals),
                els: unroll_block(els, used, locals),
            }),
            other => out.push(other.clone()),
        }
    }
    out
}

/// Rename every loop variable and every written local inside `arm` to a
/// fresh name, registering new locals as needed.
fn privatize(
    arm: &mut Vec<Stmt>,
    used: &mut BTreeSet<String>,
    locals: &mut Vec<(String, ElemType)>,
) {
    let mut defs: Vec<String> = Vec::new();
    collect_defs(arm, &mut defs);
    for name in defs {
        let fresh = fresh_name(&name, used);
        if fresh == name {
            continue; // first (only) use of the name program-wide
        }
        if let Some(ty) = locals.iter().find(|(n, _)| n == &name).map(|(_, t)| *t) {
            locals.push((fresh.clone(), ty));
        }
        rename_var(arm, &name, &fresh);
    }
}

fn collect_defs(body: &[Stmt], defs: &mut Vec<String>) {
    for s in body {
        match s {
            Stmt::For { var, body, .. } => {
                if !defs.contains(var) {
                    defs.push(var.clone());
                }
                collect_defs(body, defs);
            }
            Stmt::ParArms { arms } => arms.iter().for_each(|a| collect_defs(a, defs)),
            Stmt::If { then, els, .. } => {
                collect_defs(then, defs);
                collect_defs(els, defs);
            }
            Stmt::Load { dest, .. } | Stmt::Compute { dest, .. } => {
                if !defs.contains(dest) {
                    defs.push(dest.clone());
                }
            }
            Stmt::Store { .. } | Stmt::Call { .. } => {}
        }
    }
}

/// Rename a variable everywhere: binding sites (For vars, Load/Compute
/// dests), affine uses, and local-operand uses. Unlike substitution this
/// intentionally rewrites shadowed bindings too — they all become the same
/// fresh name, which keeps the arm self-consistent.
pub(crate) fn rename_var(body: &mut [Stmt], old: &str, new: &str) {
    let repl = AffineExpr::var(new);
    let fix_op = |o: &mut Operand| match o {
        Operand::Affine(e) => *e = e.substitute(old, &repl),
        Operand::Local(n) if n == old => *n = new.to_string(),
        _ => {}
    };
    for s in body {
        match s {
            Stmt::For { var, body, .. } => {
                if var == old {
                    *var = new.to_string();
                }
                rename_var(body, old, new);
            }
            Stmt::ParArms { arms } => {
                arms.iter_mut().for_each(|a| rename_var(a, old, new));
            }
            Stmt::If { cond, then, els } => {
                *cond = cond.substitute(old, &repl);
                rename_var(then, old, new);
                rename_var(els, old, new);
            }
            Stmt::Load { dest, idx, .. } => {
                if dest == old {
                    *dest = new.to_string();
                }
                idx.iter_mut().for_each(|e| *e = e.substitute(old, &repl));
            }
            Stmt::Store { idx, value, .. } => {
                idx.iter_mut().for_each(|e| *e = e.substitute(old, &repl));
                fix_op(value);
            }
            Stmt::Compute { dest, operands, .. } => {
                if dest == old {
                    *dest = new.to_string();
                }
                operands.iter_mut().for_each(fix_op);
            }
            Stmt::Call { args, .. } => {
                for a in args {
                    if let CallArg::Scalar(o) = a {
                        fix_op(o);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{interpret, parse_dsl, Inputs, InterpOptions};

    #[test]
    fn par_loop_becomes_one_arm_per_iteration() {
        let src = "func k(m: int[3]) {\n\
                   par for (int j = 0; j < 3; ++j) {\n\
                   int t = j + 1;\n\
                   m[j] = t;\n\
                   } }";
        let f = parse_dsl(src).unwrap().remove(0);
        let g = unroll_par(&f);
        let [Stmt::ParArms { arms }] = g.body.as_slice() else { panic!("expected par arms") };
        assert_eq!(arms.len(), 3);
        // the loop variable is gone: every store index is a constant
        for (v, arm) in arms.iter().enumerate() {
            let Some(Stmt::Store { idx, .. }) = arm.last() else { panic!() };
            assert_eq!(idx[0].as_const(), Some(v as i64));
        }
        // locals written inside arms are privatized to distinct names
        let dests: Vec<&String> = arms
            .iter()
            .filter_map(|a| match a.first() {
                Some(Stmt::Compute { dest, .. }) => Some(dest),
                _ => None,
            })
            .collect();
        assert_eq!(dests.len(), 3);
        assert!(dests.iter().all(|d| dests.iter().filter(|e| e == &d).count() == 1));

        let x = interpret(std::slice::from_ref(&f), "k", &Inputs::default(), InterpOptions::default()).unwrap();
        let y = interpret(std::slice::from_ref(&g), "k", &Inputs::default(), InterpOptions::default()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn single_iteration_par_loop_dissolves() {
        let src = "func k(m: int[4]) { par for (int j = 0; j < 1; ++j) { m[j] = 5; } }";
        let f = parse_dsl(src).unwrap().remove(0);
        let g = unroll_par(&f);
        assert!(matches!(g.body.as_slice(), [Stmt::Store { .. }]));
    }
}
