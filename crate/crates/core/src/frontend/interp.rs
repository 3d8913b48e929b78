// SPDX-License-Identifier: Apache-2.0

//! Golden-model interpreter for the DSL. Executes `par` loops sequentially
//! (valid for race-free programs) and optionally replays small parallel
//! blocks under every arm ordering to detect data races. Every
//! transformation pass is checked against this interpreter.

use std::collections::BTreeMap;

use super::{
    AffineExpr, CallArg, ComputeOp, ElemType, Function, MemRef, Operand, Stmt,
};
use crate::floatlib::{f32_add, f32_cmp, f32_div, f32_exp_table, f32_mul, CmpOp, F32Bits};

#[derive(Debug, Clone, thiserror::Error)]
pub enum InterpError {
    #[error("out-of-bounds access to '{mem}' at {index:?} (extents {extents:?})")]
    OutOfBounds { mem: String, index: Vec<i64>, extents: Vec<u64> },
    #[error("data race in parallel block: arm orderings disagree")]
    DataRace,
    #[error("{0}")]
    Eval(String),
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("input for '{name}' has {got} elements, expected {want}")]
    InputShape { name: String, got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    I(i64),
    F(F32Bits),
}

impl Value {
    pub fn bits(self) -> u64 {
        match self {
            Value::I(v) => v as u64,
            Value::F(b) => b.0 as u64,
        }
    }
}

/// Final contents of one memory, stored flat in row-major order. Integer
/// elements hold two's-complement values in the low bits; floats hold binary32
/// patterns.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MemImage {
    pub elem: ElemType,
    pub extents: Vec<u64>,
    pub data: Vec<u64>,
}

impl MemImage {
    pub fn zeroed(m: &MemRef) -> MemImage {
        MemImage {
            elem: m.elem,
            extents: m.extents.clone(),
            data: vec![0; m.total_size() as usize],
        }
    }

    pub fn flat_index(&self, idx: &[i64]) -> Option<usize> {
        if idx.len() != self.extents.len() {
            return None;
        }
        let mut flat: u64 = 0;
        for (i, ext) in idx.iter().zip(&self.extents) {
            if *i < 0 || *i as u64 >= *ext {
                return None;
            }
            flat = flat * ext + *i as u64;
        }
        Some(flat as usize)
    }
}

pub type Images = BTreeMap<String, MemImage>;

#[derive(Debug, Clone, Default)]
pub struct InterpOptions {
    pub check_races: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub scalars: BTreeMap<String, Value>,
    pub memories: BTreeMap<String, Vec<u64>>,
}

struct Frame {
    locals: BTreeMap<String, Value>,
    int_env: BTreeMap<String, i64>,
    mem_bind: BTreeMap<String, usize>,
}

struct Interp<'a> {
    funcs: &'a [Function],
    arena: Vec<MemImage>,
    opts: InterpOptions,
}

/// Run `entry` and return the final images of its memory parameters.
pub fn interpret(
    funcs: &[Function],
    entry: &str,
    inputs: &Inputs,
    opts: InterpOptions,
) -> Result<Images, InterpError> {
    let f = funcs
        .iter()
        .find(|f| f.name == entry)
        .ok_or_else(|| InterpError::UnknownFunction(entry.to_string()))?;

    let mut interp = Interp { funcs, arena: Vec::new(), opts };
    let mut frame = Frame {
        locals: BTreeMap::new(),
        int_env: BTreeMap::new(),
        mem_bind: BTreeMap::new(),
    };
    for (name, ty) in &f.scalar_params {
        let v = inputs.scalars.get(name).copied().unwrap_or(match ty {
            ElemType::Int32 => Value::I(0),
            ElemType::F32 => Value::F(F32Bits::ZERO),
        });
        frame.locals.insert(name.clone(), v);
        if let Value::I(i) = v {
            frame.int_env.insert(name.clone(), i);
        }
    }
    for m in &f.mem_params {
        let mut img = MemImage::zeroed(m);
        if let Some(data) = inputs.memories.get(&m.name) {
            if data.len() != img.data.len() {
                return Err(InterpError::InputShape {
                    name: m.name.clone(),
                    got: data.len(),
                    want: img.data.len(),
                });
            }
            img.data.clone_from(data);
        }
        frame.mem_bind.insert(m.name.clone(), interp.arena.len());
        interp.arena.push(img);
    }

    interp.exec_block(f, &mut frame, &f.body)?;

    let mut images = Images::new();
    for m in &f.mem_params {
        images.insert(m.name.clone(), interp.arena[frame.mem_bind[&m.name]].clone());
    }
    Ok(images)
}

/// Single-function convenience wrapper.
pub fn reference_interpret(
    f: &Function,
    inputs: &Inputs,
    opts: InterpOptions,
) -> Result<Images, InterpError> {
    interpret(std::slice::from_ref(f), &f.name, inputs, opts)
}

impl<'a> Interp<'a> {
    fn exec_block(
        &mut self,
        f: &Function,
        frame: &mut Frame,
        stmts: &[Stmt],
    ) -> Result<(), InterpError> {
        for s in stmts {
            self.exec_stmt(f, frame, s)?;
        }
        Ok(())
    }

    fn exec_stmt(&mut self, f: &Function, frame: &mut Frame, s: &Stmt) -> Result<(), InterpError> {
        match s {
            Stmt::For { var, lo, hi, step, par, body } => {
                if *par && self.opts.check_races {
                    let arms: Vec<Vec<Stmt>> = (*lo..*hi)
                        .step_by(*step as usize)
                        .map(|v| {
                            vec![Stmt::For {
                                var: var.clone(),
                                lo: v,
                                hi: v + 1,
                                step: 1,
                                par: false,
                                body: body.clone(),
                            }]
                        })
                        .collect();
                    return self.exec_par_arms(f, frame, &arms);
                }
                let mut v = *lo;
                while v < *hi {
                    frame.int_env.insert(var.clone(), v);
                    self.exec_block(f, frame, body)?;
                    v += *step;
                }
                frame.int_env.remove(var);
                Ok(())
            }
            Stmt::ParArms { arms } => self.exec_par_arms(f, frame, arms),
            Stmt::If { cond, then, els } => {
                let taken = cond.eval(&frame.int_env).map_err(InterpError::Eval)?;
                if taken {
                    self.exec_block(f, frame, then)
                } else {
                    self.exec_block(f, frame, els)
                }
            }
            Stmt::Load { dest, mem, idx } => {
                let v = self.mem_read(f, frame, mem, idx)?;
                frame.locals.insert(dest.clone(), v);
                if let Value::I(i) = v {
                    frame.int_env.insert(dest.clone(), i);
                }
                Ok(())
            }
            Stmt::Store { mem, idx, value } => {
                let v = self.eval_operand(f, frame, value)?;
                self.mem_write(f, frame, mem, idx, v)
            }
            Stmt::Compute { dest, op, operands } => {
                let v = self.eval_compute(f, frame, *op, operands)?;
                frame.locals.insert(dest.clone(), v);
                if let Value::I(i) = v {
                    frame.int_env.insert(dest.clone(), i);
                }
                Ok(())
            }
            Stmt::Call { func, args } => self.exec_call(f, frame, func, args),
        }
    }

    fn exec_par_arms(
        &mut self,
        f: &Function,
        frame: &mut Frame,
        arms: &[Vec<Stmt>],
    ) -> Result<(), InterpError> {
        if self.opts.check_races && arms.len() <= 4 && arms.len() >= 2 {
            let base_arena = self.arena.clone();
            let base_locals = frame.locals.clone();
            let base_env = frame.int_env.clone();

            let mut reference: Option<(Vec<MemImage>, BTreeMap<String, Value>)> = None;
            for perm in permutations(arms.len()) {
                self.arena = base_arena.clone();
                frame.locals = base_locals.clone();
                frame.int_env = base_env.clone();
                for k in &perm {
                    self.exec_block(f, frame, &arms[*k])?;
                }
                match &reference {
                    None => reference = Some((self.arena.clone(), frame.locals.clone())),
                    Some((a, l)) => {
                        if *a != self.arena || *l != frame.locals {
                            return Err(InterpError::DataRace);
                        }
                    }
                }
            }
            // leave state as produced by the identity ordering
            let (a, l) = reference.unwrap();
            self.arena = a;
            frame.locals = l;
            frame.int_env = base_env;
            Ok(())
        } else {
            for arm in arms {
                self.exec_block(f, frame, arm)?;
            }
            Ok(())
        }
    }

    fn exec_call(
        &mut self,
        f: &Function,
        frame: &mut Frame,
        func: &str,
        args: &[CallArg],
    ) -> Result<(), InterpError> {
        let callee_idx = self
            .funcs
            .iter()
            .position(|g| g.name == func)
            .ok_or_else(|| InterpError::UnknownFunction(func.to_string()))?;
        let callee = &self.funcs[callee_idx];

        // mem args bind by reference in declaration order; scalars likewise
        let mut mem_args = Vec::new();
        let mut scalar_args = Vec::new();
        for a in args {
            match a {
                CallArg::Mem(m) => mem_args.push(m.clone()),
                CallArg::Scalar(op) => scalar_args.push(self.eval_operand(f, frame, op)?),
            }
        }
        let mut callee_frame = Frame {
            locals: BTreeMap::new(),
            int_env: BTreeMap::new(),
            mem_bind: BTreeMap::new(),
        };
        for ((name, _), v) in callee.scalar_params.iter().zip(scalar_args) {
            callee_frame.locals.insert(name.clone(), v);
            if let Value::I(i) = v {
                callee_frame.int_env.insert(name.clone(), i);
            }
        }
        for (m, caller_name) in callee.mem_params.iter().zip(mem_args) {
            let idx = *frame
                .mem_bind
                .get(&caller_name)
                .ok_or_else(|| InterpError::Eval(format!("unbound memory '{caller_name}'")))?;
            callee_frame.mem_bind.insert(m.name.clone(), idx);
        }
        let callee = callee.clone();
        self.exec_block(&callee, &mut callee_frame, &callee.body)
    }

    fn eval_operand(
        &mut self,
        _f: &Function,
        frame: &Frame,
        op: &Operand,
    ) -> Result<Value, InterpError> {
        match op {
            Operand::Affine(e) => Ok(Value::I(e.eval(&frame.int_env).map_err(InterpError::Eval)?)),
            Operand::Local(n) => frame
                .locals
                .get(n)
                .copied()
                .ok_or_else(|| InterpError::Eval(format!("unbound local '{n}'"))),
            Operand::F32Const(b) => Ok(Value::F(F32Bits(*b))),
        }
    }

    fn eval_compute(
        &mut self,
        f: &Function,
        frame: &Frame,
        op: ComputeOp,
        operands: &[Operand],
    ) -> Result<Value, InterpError> {
        let vals: Vec<Value> = operands
            .iter()
            .map(|o| self.eval_operand(f, frame, o))
            .collect::<Result<_, _>>()?;
        let as_f = |v: &Value| match v {
            Value::F(b) => Ok(*b),
            Value::I(_) => Err(InterpError::Eval("integer operand to float op".into())),
        };
        Ok(match op {
            ComputeOp::AffineId => vals[0],
            ComputeOp::FAdd => Value::F(f32_add(as_f(&vals[0])?, as_f(&vals[1])?)),
            ComputeOp::FMul => Value::F(f32_mul(as_f(&vals[0])?, as_f(&vals[1])?)),
            ComputeOp::FDiv => Value::F(f32_div(as_f(&vals[0])?, as_f(&vals[1])?)),
            ComputeOp::FExp => Value::F(f32_exp_table(as_f(&vals[0])?)),
            ComputeOp::FMax => {
                let (a, b) = (as_f(&vals[0])?, as_f(&vals[1])?);
                Value::F(if f32_cmp(CmpOp::Ge, a, b) { a } else { b })
            }
            ComputeOp::FMin => {
                let (a, b) = (as_f(&vals[0])?, as_f(&vals[1])?);
                Value::F(if f32_cmp(CmpOp::Le, a, b) { a } else { b })
            }
        })
    }

    fn eval_indices(
        &self,
        frame: &Frame,
        mem: &str,
        idx: &[AffineExpr],
    ) -> Result<(usize, usize), InterpError> {
        let arena_idx = *frame
            .mem_bind
            .get(mem)
            .ok_or_else(|| InterpError::Eval(format!("unbound memory '{mem}'")))?;
        let img = &self.arena[arena_idx];
        let vals: Vec<i64> = idx
            .iter()
            .map(|e| e.eval(&frame.int_env).map_err(InterpError::Eval))
            .collect::<Result<_, _>>()?;
        let flat = img.flat_index(&vals).ok_or_else(|| InterpError::OutOfBounds {
            mem: mem.to_string(),
            index: vals.clone(),
            extents: img.extents.clone(),
        })?;
        Ok((arena_idx, flat))
    }

    fn mem_read(
        &mut self,
        _f: &Function,
        frame: &Frame,
        mem: &str,
        idx: &[AffineExpr],
    ) -> Result<Value, InterpError> {
        let (a, flat) = self.eval_indices(frame, mem, idx)?;
        let img = &self.arena[a];
        Ok(match img.elem {
            ElemType::Int32 => Value::I(img.data[flat] as i64),
            ElemType::F32 => Value::F(F32Bits(img.data[flat] as u32)),
        })
    }

    fn mem_write(
        &mut self,
        _f: &Function,
        frame: &Frame,
        mem: &str,
        idx: &[AffineExpr],
        v: Value,
    ) -> Result<(), InterpError> {
        let (a, flat) = self.eval_indices(frame, mem, idx)?;
        self.arena[a].data[flat] = v.bits();
        Ok(())
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for slot in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(slot, n - 1);
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floatlib::F32Bits;
    use crate::frontend::parse_dsl;

    #[test]
    fn float_arithmetic_matches_host_binary32() {
        let src = "func k(x: f32, y: f32[1]) {\n\
                   f32 v = x * 2.0 + 1.0;\n\
                   y[0] = fmax(v, 0.0);\n\
                   }";
        let funcs = parse_dsl(src).unwrap();
        for xv in [0.75f32, -3.5, 0.1, -0.25] {
            let mut inputs = Inputs::default();
            inputs.scalars.insert("x".into(), Value::F(F32Bits::from_f32(xv)));
            let imgs = interpret(&funcs, "k", &inputs, InterpOptions::default()).unwrap();
            let want = (xv * 2.0 + 1.0).max(0.0).to_bits() as u64;
            assert_eq!(imgs["y"].data[0], want, "x = {xv}");
        }
    }

    #[test]
    fn race_checking_flags_overlapping_par_writes() {
        let racy = "func k(m: int[4]) { par for (int i = 0; i < 2; ++i) { m[0] = i; } }";
        let funcs = parse_dsl(racy).unwrap();
        assert!(matches!(
            interpret(&funcs, "k", &Inputs::default(), InterpOptions { check_races: true }),
            Err(InterpError::DataRace)
        ));
        // disjoint writes are fine
        let ok = "func k(m: int[4]) { par for (int i = 0; i < 2; ++i) { m[i] = i; } }";
        let funcs = parse_dsl(ok).unwrap();
        assert!(interpret(&funcs, "k", &Inputs::default(), InterpOptions { check_races: true }).is_ok());
    }

    #[test]
    fn out_of_bounds_is_reported() {
        let src = "func k(m: int[2]) { for (int i = 0; i < 4; ++i) { m[i] = i; } }";
        let funcs = parse_dsl(src).unwrap();
        assert!(interpret(&funcs, "k", &Inputs::default(), InterpOptions::default()).is_err());
    }
}
