// SPDX-License-Identifier: Apache-2.0

//! Static resource and control-complexity estimation. Nothing here claims
//! LUT/FF fidelity; the point is structural proxies — FSM states, control
//! branches, functional units, banks — that make blow-up comparisons between
//! pipeline configurations meaningful.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ir::{CellKind, Component, Control, Program};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub fsm_states: u64,
    pub control_branches: u64,
    pub groups: u64,
    pub registers: u64,
    pub register_bits: u64,
    pub memories: u64,
    pub memory_bits: u64,
    pub int_units: BTreeMap<String, u64>,
    pub float_units: BTreeMap<String, u64>,
    pub constants: u64,
}

/// Distinct If-branch leaves instantiated in the control hardware: an `if`
/// multiplies the leaf count of everything nested under it.
pub fn count_branches(p: &Program) -> u64 {
    p.components.iter().map(|c| branch_leaves_of(&c.control)).sum()
}

fn branch_leaves_of(ctrl: &Control) -> u64 {
    // Leaves contributed by every `if` in the tree: each side of a branch
    // contributes its own alternatives (at least one), and alternatives
    // multiply through nesting.
    match ctrl {
        Control::If { then, els, .. } => {
            paths(then) + els.as_deref().map_or(0, paths)
        }
        Control::Seq(cs) | Control::Par(cs) => cs.iter().map(branch_leaves_of).sum(),
        Control::While { body, .. } => branch_leaves_of(body),
        Control::Enable(_) | Control::Invoke { .. } => 0,
    }
}

/// Number of alternative execution paths through a control subtree.
fn paths(ctrl: &Control) -> u64 {
    match ctrl {
        Control::Enable(_) | Control::Invoke { .. } => 1,
        Control::Seq(cs) | Control::Par(cs) => cs.iter().map(paths).product(),
        Control::If { then, els, .. } => paths(then) + els.as_deref().map_or(1, paths),
        Control::While { body, .. } => paths(body),
    }
}

/// Structural FSM state count. Each parallel arm carries its own private
/// sub-controller, so `par` sums its children and pays one join state.
pub fn count_fsm_states(p: &Program) -> u64 {
    p.components.iter().map(|c| fsm_states_of(&c.control)).sum()
}

fn fsm_states_of(ctrl: &Control) -> u64 {
    match ctrl {
        Control::Enable(_) => 1,
        Control::Invoke { .. } => 1,
        Control::Seq(cs) => cs.iter().map(fsm_states_of).sum(),
        Control::Par(cs) => cs.iter().map(fsm_states_of).sum::<u64>() + 1,
        Control::If { then, els, .. } => {
            1 + fsm_states_of(then) + els.as_deref().map_or(0, fsm_states_of)
        }
        Control::While { body, .. } => 1 + fsm_states_of(body),
    }
}

pub fn estimate(p: &Program) -> ResourceReport {
    let mut r = ResourceReport {
        fsm_states: count_fsm_states(p),
        control_branches: count_branches(p),
        groups: 0,
        registers: 0,
        register_bits: 0,
        memories: 0,
        memory_bits: 0,
        int_units: BTreeMap::new(),
        float_units: BTreeMap::new(),
        constants: 0,
    };
    for c in &p.components {
        tally_component(c, &mut r);
    }
    r
}

fn tally_component(c: &Component, r: &mut ResourceReport) {
    r.groups += c.groups.len() as u64;
    for cell in &c.cells {
        match &cell.kind {
            CellKind::Register { width } => {
                r.registers += 1;
                r.register_bits += *width as u64;
            }
            CellKind::Memory { width, extents, .. } => {
                r.memories += 1;
                r.memory_bits += *width as u64 * extents.iter().product::<u64>();
            }
            CellKind::Constant { .. } => r.constants += 1,
            CellKind::IntAdd => bump(&mut r.int_units, "add"),
            CellKind::IntSub => bump(&mut r.int_units, "sub"),
            CellKind::IntMul => bump(&mut r.int_units, "mul"),
            CellKind::IntDiv => bump(&mut r.int_units, "div"),
            CellKind::IntMod => bump(&mut r.int_units, "mod"),
            CellKind::IntCmp(_) => bump(&mut r.int_units, "cmp"),
            CellKind::FloatAdd => bump(&mut r.float_units, "add"),
            CellKind::FloatMul => bump(&mut r.float_units, "mul"),
            CellKind::FloatDiv => bump(&mut r.float_units, "div"),
            CellKind::FloatExp => bump(&mut r.float_units, "exp"),
            CellKind::FloatCmp(_) => bump(&mut r.float_units, "cmp"),
        }
    }
}

fn bump(m: &mut BTreeMap<String, u64>, k: &str) {
    *m.entry(k.to_string()).or_insert(0) += 1;
}

impl ResourceReport {
    /// Aligned two-column text rendering.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("fsm_states".into(), self.fsm_states.to_string()),
            ("control_branches".into(), self.control_branches.to_string()),
            ("groups".into(), self.groups.to_string()),
            ("registers".into(), self.registers.to_string()),
            ("register_bits".into(), self.register_bits.to_string()),
            ("memories".into(), self.memories.to_string()),
            ("memory_bits".into(), self.memory_bits.to_string()),
            ("constants".into(), self.constants.to_string()),
        ];
        for (k, v) in &self.int_units {
            rows.push((format!("int_{k}"), v.to_string()));
        }
        for (k, v) in &self.float_units {
            rows.push((format!("float_{k}"), v.to_string()));
        }
        let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<w$}  {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Control, PortRef};

    fn e(g: &str) -> Control {
        Control::Enable(g.to_string())
    }

    fn wrap(control: Control) -> Program {
        Program {
            components: vec![Component {
                name: "main".into(),
                scalar_ports: vec![],
                cells: vec![],
                groups: vec![],
                control,
            }],
            entry: "main".into(),
        }
    }

    #[test]
    fn branch_leaves_multiply_through_nesting() {
        let cond = PortRef::new("c", "out");
        // if { if {A} else {B} } else { C }: 2 + 1 leaves
        let p = wrap(Control::If {
            cond: cond.clone(),
            then: Box::new(Control::If {
                cond: cond.clone(),
                then: Box::new(e("a")),
                els: Some(Box::new(e("b"))),
            }),
            els: Some(Box::new(e("c"))),
        });
        assert_eq!(count_branches(&p), 3);
        // two independent 2-way ifs in sequence under one if: 2 * 2 leaves
        let two_way = |a: &str, b: &str| Control::If {
            cond: cond.clone(),
            then: Box::new(e(a)),
            els: Some(Box::new(e(b))),
        };
        let p = wrap(Control::If {
            cond: cond.clone(),
            then: Box::new(Control::Seq(vec![two_way("a", "b"), two_way("c", "d")])),
            els: None,
        });
        assert_eq!(count_branches(&p), 4);
        assert_eq!(count_branches(&wrap(Control::Seq(vec![e("a"), e("b")]))), 0);
    }

    #[test]
    fn fsm_states_sum_seq_and_pay_a_par_join() {
        assert_eq!(count_fsm_states(&wrap(Control::Seq(vec![e("a"), e("b"), e("c")]))), 3);
        assert_eq!(count_fsm_states(&wrap(Control::Par(vec![e("a"), e("b")]))), 3);
        let w = Control::While { cond: PortRef::new("c", "out"), body: Box::new(e("a")) };
        assert_eq!(count_fsm_states(&wrap(w)), 2);
    }
}
