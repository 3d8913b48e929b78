// SPDX-License-Identifier: Apache-2.0

//! Lowering the DSL to the hardware IR. Each function becomes a component:
//! scalar parameters become input ports (latched into same-named registers),
//! memory parameters become memory cells, locals and loop counters become
//! registers. Every load/store/compute becomes one group; `for` becomes a
//! `while` over a counter register; explicit parallel blocks become `par`
//! control; calls become `invoke`.
//!
//! Affine index expressions lower to combinational trees of integer units.
//! No unit sharing is attempted: every operation site instantiates its own
//! cells, which keeps resource reports an honest reflection of program
//! structure.

use std::collections::BTreeMap;

use crate::floatlib::CmpOp;
use crate::frontend::{
    AffineExpr, Atom, CallArg, ComputeOp, ElemType, Function, Operand, Stmt,
};
use crate::ir::{
    derived_group_latency, Assignment, Cell, CellKind, Component, Control, Group, InvokeArg,
    PortRef, Program, ScalarPort, PortDir, DEFAULT_LATENCY,
};

use super::PassError;

pub fn lower_to_ir(funcs: &[Function], entry: &str) -> Result<Program, PassError> {
    if !funcs.iter().any(|f| f.name == entry) {
        return Err(PassError::Lower(format!("unknown entry function '{entry}'")));
    }
    let components = funcs
        .iter()
        .map(|f| Lower::new(f).lower(funcs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Program { components, entry: entry.to_string() })
}

struct Lower<'a> {
    f: &'a Function,
    cells: Vec<Cell>,
    groups: Vec<Group>,
    consts: BTreeMap<(bool, u64), String>,
    counter: usize,
}

impl<'a> Lower<'a> {
    fn new(f: &'a Function) -> Lower<'a> {
        Lower { f, cells: Vec::new(), groups: Vec::new(), consts: BTreeMap::new(), counter: 0 }
    }

    fn lower(mut self, funcs: &[Function]) -> Result<Component, PassError> {
        let scalar_ports: Vec<ScalarPort> = self
            .f
            .scalar_params
            .iter()
            .map(|(n, _)| ScalarPort { name: n.clone(), width: 32, dir: PortDir::In })
            .collect();

        // Scalar params latch into same-named registers; the simulator and
        // `invoke` both honor that convention.
        for (n, _) in &self.f.scalar_params {
            self.add_register(n.clone(), 32);
        }
        for m in &self.f.mem_params {
            self.cells.push(Cell {
                name: m.name.clone(),
                kind: CellKind::Memory {
                    float: m.elem == ElemType::F32,
                    width: 32,
                    extents: m.extents.clone(),
                },
            });
        }
        for (n, _) in &self.f.locals {
            self.add_register(n.clone(), 32);
        }

        let control = self.block(&self.f.body, funcs)?;

        let mut comp = Component {
            name: self.f.name.clone(),
            scalar_ports,
            cells: self.cells,
            groups: self.groups,
            control,
        };
        // Static latencies are derived from the finished cell graph.
        for i in 0..comp.groups.len() {
            let lat = derived_group_latency(&comp, &comp.groups[i], &DEFAULT_LATENCY)
                .ok_or_else(|| PassError::Lower("combinational cycle in lowered group".into()))?;
            comp.groups[i].static_latency = lat;
        }
        Ok(comp)
    }

    // ---- cell helpers -------------------------------------------------

    fn has_cell(&self, name: &str) -> bool {
        self.cells.iter().any(|c| c.name == name)
    }

    fn add_register(&mut self, name: String, width: u32) {
        if !self.has_cell(&name) {
            self.cells.push(Cell { name, kind: CellKind::Register { width } });
        }
    }

    fn fresh(&mut self, base: &str) -> String {
        loop {
            let name = format!("{base}{}", self.counter);
            self.counter += 1;
            if !self.has_cell(&name) {
                return name;
            }
        }
    }

    fn unit(&mut self, base: &str, kind: CellKind) -> String {
        let name = self.fresh(base);
        self.cells.push(Cell { name: name.clone(), kind });
        name
    }

    fn int_const(&mut self, v: i64) -> PortRef {
        self.const_cell(false, (v as u32) as u64)
    }

    fn const_cell(&mut self, float: bool, bits: u64) -> PortRef {
        if let Some(name) = self.consts.get(&(float, bits)) {
            return PortRef::new(name.clone(), "out");
        }
        let name = self.fresh("k");
        self.consts.insert((float, bits), name.clone());
        self.cells.push(Cell { name: name.clone(), kind: CellKind::Constant { float, width: 32, bits } });
        PortRef::new(name, "out")
    }

    /// A combinational tree computing an affine expression; returns the
    /// root output port, pushing input assignments into `asn`.
    fn affine(&mut self, e: &AffineExpr, asn: &mut Vec<Assignment>) -> Result<PortRef, PassError> {
        let e = e.simplify();
        if let Some(v) = e.as_const() {
            return Ok(self.int_const(v));
        }
        let mut acc: Option<PortRef> = None;
        for (coeff, atom) in &e.terms {
            let ap = self.atom(atom, asn)?;
            let term = if *coeff == 1 {
                ap
            } else {
                let k = self.int_const(*coeff);
                let m = self.unit("mul", CellKind::IntMul);
                asn.push(Assignment { dest: PortRef::new(m.clone(), "left"), src: k });
                asn.push(Assignment { dest: PortRef::new(m.clone(), "right"), src: ap });
                PortRef::new(m, "out")
            };
            acc = Some(match acc {
                None => term,
                Some(prev) => {
                    let a = self.unit("add", CellKind::IntAdd);
                    asn.push(Assignment { dest: PortRef::new(a.clone(), "left"), src: prev });
                    asn.push(Assignment { dest: PortRef::new(a.clone(), "right"), src: term });
                    PortRef::new(a, "out")
                }
            });
        }
        let mut root = acc.expect("non-constant affine expression has terms");
        if e.constant != 0 {
            let k = self.int_const(e.constant);
            let a = self.unit("add", CellKind::IntAdd);
            asn.push(Assignment { dest: PortRef::new(a.clone(), "left"), src: root });
            asn.push(Assignment { dest: PortRef::new(a.clone(), "right"), src: k });
            root = PortRef::new(a, "out");
        }
        Ok(root)
    }

    fn atom(&mut self, a: &Atom, asn: &mut Vec<Assignment>) -> Result<PortRef, PassError> {
        match a {
            Atom::Var(v) => {
                if !self.has_cell(v) {
                    return Err(PassError::Lower(format!("undefined variable '{v}'")));
                }
                Ok(PortRef::new(v.clone(), "out"))
            }
            Atom::Div(e, d) => self.divmod(e, *d, CellKind::IntDiv, "div", asn),
            Atom::Mod(e, d) => self.divmod(e, *d, CellKind::IntMod, "mod", asn),
        }
    }

    fn divmod(
        &mut self,
        e: &AffineExpr,
        d: i64,
        kind: CellKind,
        base: &str,
        asn: &mut Vec<Assignment>,
    ) -> Result<PortRef, PassError> {
        let num = self.affine(e, asn)?;
        let den = self.int_const(d);
        let u = self.unit(base, kind);
        asn.push(Assignment { dest: PortRef::new(u.clone(), "left"), src: num });
        asn.push(Assignment { dest: PortRef::new(u.clone(), "right"), src: den });
        Ok(PortRef::new(u, "out"))
    }

    fn operand(&mut self, o: &Operand, asn: &mut Vec<Assignment>) -> Result<PortRef, PassError> {
        match o {
            Operand::Affine(e) => self.affine(e, asn),
            Operand::Local(n) => {
                if !self.has_cell(n) {
                    return Err(PassError::Lower(format!("undefined local '{n}'")));
                }
                Ok(PortRef::new(n.clone(), "out"))
            }
            Operand::F32Const(bits) => Ok(self.const_cell(true, *bits as u64)),
        }
    }

    fn group(&mut self, base: &str, assignments: Vec<Assignment>) -> String {
        let name = {
            let mut n = format!("{base}{}", self.groups.len());
            while self.groups.iter().any(|g| g.name == n) {
                n.push('x');
            }
            n
        };
        self.groups.push(Group { name: name.clone(), assignments, static_latency: 0 });
        name
    }

    fn enable(&mut self, base: &str, assignments: Vec<Assignment>) -> Control {
        Control::Enable(self.group(base, assignments))
    }

    // ---- statements ---------------------------------------------------

    fn block(&mut self, body: &[Stmt], funcs: &[Function]) -> Result<Control, PassError> {
        let mut ctrls = Vec::new();
        for s in body {
            ctrls.push(self.stmt(s, funcs)?);
        }
        Ok(match ctrls.len() {
            0 => self.enable("nop", Vec::new()),
            1 => ctrls.pop().unwrap(),
            _ => Control::Seq(ctrls),
        })
    }

    fn mem_access(
        &mut self,
        mem: &str,
        idx: &[AffineExpr],
        asn: &mut Vec<Assignment>,
    ) -> Result<(), PassError> {
        let Some(m) = self.f.mem(mem) else {
            return Err(PassError::Lower(format!("undefined memory '{mem}'")));
        };
        if m.extents.len() != idx.len() {
            return Err(PassError::Lower(format!(
                "memory '{mem}' is {}-dimensional, indexed with {} subscripts",
                m.extents.len(),
                idx.len()
            )));
        }
        for (d, e) in idx.iter().enumerate() {
            let p = self.affine(e, asn)?;
            asn.push(Assignment { dest: PortRef::new(mem, format!("addr{d}")), src: p });
        }
        Ok(())
    }

    /// A comparison group writing a 1-bit predicate register; returns
    /// (group enable, predicate port).
    fn predicate(
        &mut self,
        kind: CellKind,
        base: &str,
        left: PortRef,
        right: PortRef,
        mut asn: Vec<Assignment>,
    ) -> (Control, PortRef) {
        let cmp = self.unit(base, kind);
        let pred = self.fresh("pred");
        self.add_register(pred.clone(), 1);
        asn.push(Assignment { dest: PortRef::new(cmp.clone(), "left"), src: left });
        asn.push(Assignment { dest: PortRef::new(cmp.clone(), "right"), src: right });
        asn.push(Assignment {
            dest: PortRef::new(pred.clone(), "in"),
            src: PortRef::new(cmp, "out"),
        });
        (self.enable("cmp", asn), PortRef::new(pred, "out"))
    }

    fn stmt(&mut self, s: &Stmt, funcs: &[Function]) -> Result<Control, PassError> {
        match s {
            Stmt::Load { dest, mem, idx } => {
                let mut asn = Vec::new();
                self.mem_access(mem, idx, &mut asn)?;
                asn.push(Assignment {
                    dest: PortRef::new(dest.clone(), "in"),
                    src: PortRef::new(mem.clone(), "read_data"),
                });
                Ok(self.enable("load", asn))
            }
            Stmt::Store { mem, idx, value } => {
                let mut asn = Vec::new();
                let v = self.operand(value, &mut asn)?;
                self.mem_access(mem, idx, &mut asn)?;
                asn.push(Assignment { dest: PortRef::new(mem.clone(), "write_data"), src: v });
                Ok(self.enable("store", asn))
            }
            Stmt::Compute { dest, op, operands } => self.compute(dest, *op, operands),
            Stmt::If { cond, then, els } => {
                let mut asn = Vec::new();
                let l = self.affine(&cond.lhs, &mut asn)?;
                let r = self.affine(&cond.rhs, &mut asn)?;
                let (cmp, pred) = self.predicate(CellKind::IntCmp(cond.op), "icmp", l, r, asn);
                let then_c = self.block(then, funcs)?;
                let els_c = if els.is_empty() {
                    None
                } else {
                    Some(Box::new(self.block(els, funcs)?))
                };
                Ok(Control::Seq(vec![
                    cmp,
                    Control::If { cond: pred, then: Box::new(then_c), els: els_c },
                ]))
            }
            Stmt::For { var, lo, hi, step, par, body } => {
                if *par {
                    return Err(PassError::UnUnrolledPar(var.clone()));
                }
                self.add_register(var.clone(), 32);
                let klo = self.int_const(*lo);
                let init = self.enable(
                    "init",
                    vec![Assignment { dest: PortRef::new(var.clone(), "in"), src: klo }],
                );
                let khi = self.int_const(*hi);
                let (cond0, pred) = self.predicate(
                    CellKind::IntCmp(CmpOp::Lt),
                    "lcmp",
                    PortRef::new(var.clone(), "out"),
                    khi,
                    Vec::new(),
                );
                // The loop check is re-evaluated by re-enabling the same
                // compare group at the tail of the body.
                let Control::Enable(cond_group) = cond0.clone() else { unreachable!() };

                let kstep = self.int_const(*step);
                let adder = self.unit("add", CellKind::IntAdd);
                let stepg = self.enable(
                    "step",
                    vec![
                        Assignment {
                            dest: PortRef::new(adder.clone(), "left"),
                            src: PortRef::new(var.clone(), "out"),
                        },
                        Assignment { dest: PortRef::new(adder.clone(), "right"), src: kstep },
                        Assignment {
                            dest: PortRef::new(var.clone(), "in"),
                            src: PortRef::new(adder, "out"),
                        },
                    ],
                );

                let body_c = self.block(body, funcs)?;
                Ok(Control::Seq(vec![
                    init,
                    cond0,
                    Control::While {
                        cond: pred,
                        body: Box::new(Control::Seq(vec![
                            body_c,
                            stepg,
                            Control::Enable(cond_group),
                        ])),
                    },
                ]))
            }
            Stmt::ParArms { arms } => {
                let children = arms
                    .iter()
                    .map(|a| self.block(a, funcs))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Control::Par(children))
            }
            Stmt::Call { func, args } => self.call(func, args, funcs),
        }
    }

    fn compute(
        &mut self,
        dest: &str,
        op: ComputeOp,
        operands: &[Operand],
    ) -> Result<Control, PassError> {
        if !self.has_cell(dest) {
            return Err(PassError::Lower(format!("undefined local '{dest}'")));
        }
        let dest_in = PortRef::new(dest, "in");
        match op {
            ComputeOp::AffineId => {
                let mut asn = Vec::new();
                let p = self.operand(&operands[0], &mut asn)?;
                asn.push(Assignment { dest: dest_in, src: p });
                Ok(self.enable("set", asn))
            }
            ComputeOp::FAdd | ComputeOp::FMul | ComputeOp::FDiv => {
                let (kind, base) = match op {
                    ComputeOp::FAdd => (CellKind::FloatAdd, "fadd"),
                    ComputeOp::FMul => (CellKind::FloatMul, "fmul"),
                    _ => (CellKind::FloatDiv, "fdiv"),
                };
                let mut asn = Vec::new();
                let a = self.operand(&operands[0], &mut asn)?;
                let b = self.operand(&operands[1], &mut asn)?;
                let u = self.unit(base, kind);
                asn.push(Assignment { dest: PortRef::new(u.clone(), "left"), src: a });
                asn.push(Assignment { dest: PortRef::new(u.clone(), "right"), src: b });
                asn.push(Assignment { dest: dest_in, src: PortRef::new(u, "out") });
                Ok(self.enable(base, asn))
            }
            ComputeOp::FExp => {
                let mut asn = Vec::new();
                let a = self.operand(&operands[0], &mut asn)?;
                let u = self.unit("fexp", CellKind::FloatExp);
                asn.push(Assignment { dest: PortRef::new(u.clone(), "in"), src: a });
                asn.push(Assignment { dest: dest_in, src: PortRef::new(u, "out") });
                Ok(self.enable("fexp", asn))
            }
            ComputeOp::FMax | ComputeOp::FMin => {
                // select via a float compare and an if: max(a,b) = a >= b ? a : b
                let cmp_op = if op == ComputeOp::FMax { CmpOp::Ge } else { CmpOp::Le };
                let mut asn = Vec::new();
                let a = self.operand(&operands[0], &mut asn)?;
                let b = self.operand(&operands[1], &mut asn)?;
                let (cmp, pred) =
                    self.predicate(CellKind::FloatCmp(cmp_op), "fcmp", a.clone(), b.clone(), asn);
                let take_a =
                    self.enable("sel", vec![Assignment { dest: dest_in.clone(), src: a }]);
                let take_b = self.enable("sel", vec![Assignment { dest: dest_in, src: b }]);
                Ok(Control::Seq(vec![
                    cmp,
                    Control::If {
                        cond: pred,
                        then: Box::new(take_a),
                        els: Some(Box::new(take_b)),
                    },
                ]))
            }
        }
    }

    fn call(
        &mut self,
        func: &str,
        args: &[CallArg],
        funcs: &[Function],
    ) -> Result<Control, PassError> {
        let Some(callee) = funcs.iter().find(|f| f.name == func) else {
            return Err(PassError::Lower(format!("call to undefined function '{func}'")));
        };
        let scalar_args: Vec<&Operand> = args
            .iter()
            .filter_map(|a| match a {
                CallArg::Scalar(o) => Some(o),
                CallArg::Mem(_) => None,
            })
            .collect();
        let mem_args: Vec<&String> = args
            .iter()
            .filter_map(|a| match a {
                CallArg::Mem(m) => Some(m),
                CallArg::Scalar(_) => None,
            })
            .collect();
        if scalar_args.len() != callee.scalar_params.len()
            || mem_args.len() != callee.mem_params.len()
        {
            return Err(PassError::Lower(format!(
                "call to '{func}': argument count mismatch"
            )));
        }

        let mut pre = Vec::new();
        let mut bindings = Vec::new();
        for ((pname, _), op) in callee.scalar_params.iter().zip(&scalar_args) {
            let mut asn = Vec::new();
            let p = self.operand(op, &mut asn)?;
            let p = if asn.is_empty() {
                p
            } else {
                // Materialize a computed argument into a register first.
                let tmp = self.fresh("arg");
                self.add_register(tmp.clone(), 32);
                asn.push(Assignment { dest: PortRef::new(tmp.clone(), "in"), src: p });
                pre.push(self.enable("argset", asn));
                PortRef::new(tmp, "out")
            };
            bindings.push((pname.clone(), InvokeArg::Port(p)));
        }
        for (m, arg) in callee.mem_params.iter().zip(&mem_args) {
            bindings.push((m.name.clone(), InvokeArg::Mem((*arg).clone())));
        }
        let inv = Control::Invoke { component: func.to_string(), bindings };
        if pre.is_empty() {
            Ok(inv)
        } else {
            pre.push(inv);
            Ok(Control::Seq(pre))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_dsl;
    use crate::ir::validate;

    #[test]
    fn lowered_program_validates() {
        let src = "func k(x: f32, m: f32[4], y: f32[4]) {\n\
                   for (int i = 0; i < 4; ++i) {\n\
                   f32 v = m[i] * x + 1.0;\n\
                   y[i] = fmax(v, 0.0);\n\
                   } }";
        let funcs = parse_dsl(src).unwrap();
        let p = lower_to_ir(&funcs, "k").unwrap();
        assert!(validate(&p).is_empty(), "diagnostics: {:?}", validate(&p));
        assert_eq!(p.entry, "k");
        let c = p.entry_component().unwrap();
        assert!(c.cells.iter().any(|cl| cl.kind.is_memory()));
        assert!(c.groups.iter().all(|g| g.static_latency >= 1));
    }

    #[test]
    fn calls_lower_to_invokes() {
        let src = "func inner(m: int[2]) { m[0] = 1; }\n\
                   func outer(m: int[2]) { call inner(m); }";
        let funcs = parse_dsl(src).unwrap();
        let p = lower_to_ir(&funcs, "outer").unwrap();
        let mut found = false;
        p.component("outer").unwrap().control.visit(&mut |c| {
            if let Control::Invoke { component, .. } = c {
                assert_eq!(component, "inner");
                found = true;
            }
        });
        assert!(found, "no invoke emitted for the call");
    }

    #[test]
    fn un_unrolled_par_loop_is_rejected() {
        let src = "func k(m: int[4]) { par for (int i = 0; i < 4; ++i) { m[i] = i; } }";
        let funcs = parse_dsl(src).unwrap();
        assert!(matches!(lower_to_ir(&funcs, "k"), Err(PassError::UnUnrolledPar(_))));
    }
}
