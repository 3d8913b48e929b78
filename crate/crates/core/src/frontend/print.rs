// SPDX-License-Identifier: Apache-2.0

//! DSL pretty-printer, used by the `--dump` pipeline stages. Output is for
//! inspection; unrolled parallel blocks print with a `parallel`/`arm` syntax
//! that has no surface-language equivalent.

use std::fmt::Write;

use super::{CallArg, ComputeOp, ElemType, Function, Operand, Stmt};
use crate::floatlib::{f32_decode, F32Bits};

pub fn print_dsl(f: &Function) -> String {
    let mut out = String::new();
    write!(out, "func {}(", f.name).unwrap();
    let mut first = true;
    for (n, t) in &f.scalar_params {
        if !first {
            out.push_str(", ");
        }
        first = false;
        write!(out, "{n}: {}", type_name(*t)).unwrap();
    }
    for m in &f.mem_params {
        if !first {
            out.push_str(", ");
        }
        first = false;
        write!(out, "{}: {}", m.name, type_name(m.elem)).unwrap();
        for e in &m.extents {
            write!(out, "[{e}]").unwrap();
        }
    }
    out.push_str(") {\n");
    print_block(&mut out, &f.body, 1);
    out.push_str("}\n");
    out
}

fn type_name(t: ElemType) -> &'static str {
    match t {
        ElemType::Int32 => "int",
        ElemType::F32 => "f32",
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_block(out: &mut String, stmts: &[Stmt], level: usize) {
    for s in stmts {
        print_stmt(out, s, level);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, level: usize) {
    indent(out, level);
    match s {
        Stmt::For { var, lo, hi, step, par, body } => {
            if *par {
                out.push_str("par ");
            }
            if *step == 1 {
                writeln!(out, "for (int {var} = {lo}; {var} < {hi}; ++{var}) {{").unwrap();
            } else {
                writeln!(out, "for (int {var} = {lo}; {var} < {hi}; {var} += {step}) {{").unwrap();
            }
            print_block(out, body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::ParArms { arms } => {
            out.push_str("parallel {\n");
            for arm in arms {
                indent(out, level + 1);
                out.push_str("arm {\n");
                print_block(out, arm, level + 2);
                indent(out, level + 1);
                out.push_str("}\n");
            }
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::If { cond, then, els } => {
            writeln!(out, "if ({} {} {}) {{", cond.lhs, cmp_symbol(cond.op), cond.rhs).unwrap();
            print_block(out, then, level + 1);
            indent(out, level);
            if els.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                print_block(out, els, level + 1);
                indent(out, level);
                out.push_str("}\n");
            }
        }
        Stmt::Load { dest, mem, idx } => {
            write!(out, "{dest} = {mem}").unwrap();
            for e in idx {
                write!(out, "[{e}]").unwrap();
            }
            out.push_str(";\n");
        }
        Stmt::Store { mem, idx, value } => {
            write!(out, "{mem}").unwrap();
            for e in idx {
                write!(out, "[{e}]").unwrap();
            }
            writeln!(out, " = {};", operand(value)).unwrap();
        }
        Stmt::Compute { dest, op, operands } => {
            let args: Vec<String> = operands.iter().map(operand).collect();
            match op {
                ComputeOp::AffineId => writeln!(out, "{dest} = {};", args[0]).unwrap(),
                _ => writeln!(out, "{dest} = {}({});", op_name(*op), args.join(", ")).unwrap(),
            }
        }
        Stmt::Call { func, args } => {
            let strs: Vec<String> = args
                .iter()
                .map(|a| match a {
                    CallArg::Mem(m) => m.clone(),
                    CallArg::Scalar(o) => operand(o),
                })
                .collect();
            writeln!(out, "call {func}({});", strs.join(", ")).unwrap();
        }
    }
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Affine(e) => format!("{e}"),
        Operand::Local(n) => n.clone(),
        Operand::F32Const(b) => f32_decode(F32Bits(*b)),
    }
}

fn op_name(op: ComputeOp) -> &'static str {
    match op {
        ComputeOp::AffineId => "id",
        ComputeOp::FAdd => "fadd",
        ComputeOp::FMul => "fmul",
        ComputeOp::FDiv => "fdiv",
        ComputeOp::FExp => "fexp",
        ComputeOp::FMax => "fmax",
        ComputeOp::FMin => "fmin",
    }
}

fn cmp_symbol(op: crate::floatlib::CmpOp) -> &'static str {
    use crate::floatlib::CmpOp::*;
    match op {
        Lt => "<",
        Le => "<=",
        Eq => "==",
        Ne => "!=",
        Gt => ">",
        Ge => ">=",
    }
}
