// SPDX-License-Identifier: Apache-2.0

//! Program transformations over the DSL: strip-mining, the two banking
//! strategies (branch and dimension-embedding), predicate folding, loop-nest
//! restructuring, memory flattening, and the final lowering to the IR.
//! Every pass is a pure `Function -> Function` transform checked against the
//! golden-model interpreter.

mod bank;
mod flatten;
mod fold;
mod lower;
mod restructure;
mod strip_mine;
mod unroll;

pub use bank::{bank_branch, bank_embed};
pub use flatten::flatten_memories;
pub use fold::fold_bank_predicates;
pub use lower::lower_to_ir;
pub use restructure::{restructure_nest, synth_inputs};
pub use strip_mine::strip_mine;
pub use unroll::unroll_par;

/// Which banking strategy rewrites the accesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Branch,
    Embed,
}

/// Everything the pass pipeline needs to know, in application order:
/// strip-mine, bank, unroll, fold, restructure, flatten, lower.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PassConfig {
    /// (loop variable, factor) pairs, applied in order.
    #[serde(default)]
    pub strip_mine: Vec<(String, u64)>,
    #[serde(default)]
    pub bank_specs: Vec<crate::ir::BankSpec>,
    pub strategy: Strategy,
    #[serde(default)]
    pub restructure: bool,
    #[serde(default)]
    pub flatten: bool,
}

impl Default for PassConfig {
    fn default() -> PassConfig {
        PassConfig {
            strip_mine: Vec::new(),
            bank_specs: Vec::new(),
            strategy: Strategy::Embed,
            restructure: false,
            flatten: true,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum PassError {
    #[error("loop '{0}' not found")]
    LoopNotFound(String),
    #[error("loop '{0}' must have step 1 for strip-mining")]
    NonUnitStep(String),
    #[error("strip-mining factor must be >= 1")]
    BadFactor,
    #[error("memory '{0}' not found")]
    MemoryNotFound(String),
    #[error("bank spec for '{mem}': {message}")]
    BadBankSpec { mem: String, message: String },
    #[error("only cyclic partitioning is supported")]
    NonCyclicScheme,
    #[error(
        "access {mem}{index} is not decomposable for dimension-embedded banking \
         (dimension {dim}, factor {factor}); use the branch strategy instead"
    )]
    NotDecomposable { mem: String, index: String, dim: usize, factor: u64 },
    #[error("data race between parallel arms{0}; refusing to restructure")]
    RaceDetected(String),
    #[error("par loop over '{0}' must be unrolled before lowering")]
    UnUnrolledPar(String),
    #[error("{0}")]
    Interp(#[from] crate::frontend::InterpError),
    #[error("{0}")]
    Lower(String),
}

use crate::frontend::{AffineExpr, Stmt};

/// Substitute a variable throughout a statement tree (indices, store values,
/// conditions, affine computes).
pub(crate) fn substitute_stmts(body: &[Stmt], var: &str, repl: &AffineExpr) -> Vec<Stmt> {
    use crate::frontend::{CallArg, Operand};
    let subst_operand = |o: &Operand| match o {
        Operand::Affine(e) => Operand::Affine(e.substitute(var, repl)),
        other => other.clone(),
    };
    body.iter()
        .map(|s| match s {
            Stmt::For { var: v, lo, hi, step, par, body } => Stmt::For {
                var: v.clone(),
                lo: *lo,
                hi: *hi,
                step: *step,
                par: *par,
                body: if v == var {
                    body.clone() // shadowed
                } else {
                    substitute_stmts(body, var, repl)
                },
            },
            Stmt::ParArms { arms } => Stmt::ParArms {
                arms: arms.iter().map(|a| substitute_stmts(a, var, repl)).collect(),
            },
            Stmt::If { cond, then, els } => Stmt::If {
                cond: cond.substitute(var, repl),
                then: substitute_stmts(then, var, repl),
                els: substitute_stmts(els, var, repl),
            },
            Stmt::Load { dest, mem, idx } => Stmt::Load {
                dest: dest.clone(),
                mem: mem.clone(),
                idx: idx.iter().map(|e| e.substitute(var, repl)).collect(),
            },
            Stmt::Store { mem, idx, value } => Stmt::Store {
                mem: mem.clone(),
                idx: idx.iter().map(|e| e.substitute(var, repl)).collect(),
                value: subst_operand(value),
            },
            Stmt::Compute { dest, op, operands } => Stmt::Compute {
                dest: dest.clone(),
                op: *op,
                operands: operands.iter().map(subst_operand).collect(),
            },
            Stmt::Call { func, args } => Stmt::Call {
                func: func.clone(),
                args: args
                    .iter()
                    .map(|a| match a {
                        CallArg::Scalar(o) => CallArg::Scalar(subst_operand(o)),
                        m => m.clone(),
                    })
                    .collect(),
            },
        })
        .collect()
}

/// All identifiers used anywhere in a function, for fresh-name generation.
pub(crate) fn used_names(f: &crate::frontend::Function) -> std::collections::BTreeSet<String> {
    let mut names: std::collections::BTreeSet<String> = f
        .scalar_params
        .iter()
        .map(|(n, _)| n.clone())
        .chain(f.mem_params.iter().map(|m| m.name.clone()))
        .chain(f.locals.iter().map(|(n, _)| n.clone()))
        .collect();
    fn walk(body: &[Stmt], names: &mut std::collections::BTreeSet<String>) {
        for s in body {
            match s {
                Stmt::For { var, body, .. } => {
                    names.insert(var.clone());
                    walk(body, names);
                }
                Stmt::ParArms { arms } => arms.iter().for_each(|a| walk(a, names)),
                Stmt::If { then, els, .. } => {
                    walk(then, names);
                    walk(els, names);
                }
                Stmt::Load { dest, .. } | Stmt::Compute { dest, .. } => {
                    names.insert(dest.clone());
                }
                _ => {}
            }
        }
    }
    walk(&f.body, &mut names);
    names
}

pub(crate) fn fresh_name(base: &str, used: &mut std::collections::BTreeSet<String>) -> String {
    if used.insert(base.to_string()) {
        return base.to_string();
    }
    for k in 0.. {
        let cand = format!("{base}{k}");
        if used.insert(cand.clone()) {
            return cand;
        }
    }
    unreachable!()
}
