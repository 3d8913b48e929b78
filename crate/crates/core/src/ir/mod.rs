// SPDX-License-Identifier: Apache-2.0

//! The hardware IR: structural cells and groups per component,
//! plus a software-style control tree (seq/par/if/while/invoke).

use serde::{Deserialize, Serialize};

use crate::floatlib::CmpOp;

mod parse;
mod print;
mod validate;

pub use parse::{parse_ir, ParseError};
pub use print::print_ir;
pub use validate::{validate, Diagnostic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub components: Vec<Component>,
    pub entry: String,
}

impl Program {
    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn entry_component(&self) -> Option<&Component> {
        self.component(&self.entry)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PortDir {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPort {
    pub name: String,
    pub width: u32,
    pub dir: PortDir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub scalar_ports: Vec<ScalarPort>,
    pub cells: Vec<Cell>,
    pub groups: Vec<Group>,
    pub control: Control,
}

impl Component {
    pub fn cell(&self, name: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.name == name)
    }

    pub fn group(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub kind: CellKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellKind {
    Register { width: u32 },
    Memory { float: bool, width: u32, extents: Vec<u64> },
    IntAdd,
    IntSub,
    IntMul,
    IntDiv,
    IntMod,
    IntCmp(CmpOp),
    FloatAdd,
    FloatMul,
    FloatDiv,
    FloatExp,
    FloatCmp(CmpOp),
    Constant { float: bool, width: u32, bits: u64 },
}

impl CellKind {
    pub fn is_memory(&self) -> bool {
        matches!(self, CellKind::Memory { .. })
    }

    /// Ports a cell of this kind exposes, with 1-bit flags widened to 1.
    pub fn ports(&self) -> Vec<String> {
        match self {
            CellKind::Register { .. } => vec!["in".into(), "out".into()],
            CellKind::Memory { extents, .. } => {
                let mut p: Vec<String> = (0..extents.len()).map(|d| format!("addr{d}")).collect();
                p.push("write_data".into());
                p.push("read_data".into());
                p
            }
            CellKind::IntAdd
            | CellKind::IntSub
            | CellKind::IntMul
            | CellKind::IntDiv
            | CellKind::IntMod
            | CellKind::IntCmp(_)
            | CellKind::FloatAdd
            | CellKind::FloatMul
            | CellKind::FloatDiv
            | CellKind::FloatCmp(_) => vec!["left".into(), "right".into(), "out".into()],
            CellKind::FloatExp => vec!["in".into(), "out".into()],
            CellKind::Constant { .. } => vec!["out".into()],
        }
    }

    pub fn has_port(&self, port: &str) -> bool {
        self.ports().iter().any(|p| p == port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PortRef {
    pub cell: String,
    pub port: String,
}

impl PortRef {
    pub fn new(cell: impl Into<String>, port: impl Into<String>) -> PortRef {
        PortRef { cell: cell.into(), port: port.into() }
    }
}

impl std::fmt::Display for PortRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.cell, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub dest: PortRef,
    pub src: PortRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub assignments: Vec<Assignment>,
    pub static_latency: u64,
}

/// Binding value in an `invoke`: a scalar driven from a caller port, or a
/// caller memory cell passed by reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InvokeArg {
    Port(PortRef),
    Mem(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Control {
    Enable(String),
    Seq(Vec<Control>),
    Par(Vec<Control>),
    If { cond: PortRef, then: Box<Control>, els: Option<Box<Control>> },
    While { cond: PortRef, body: Box<Control> },
    Invoke { component: String, bindings: Vec<(String, InvokeArg)> },
}

impl Control {
    pub fn seq(children: Vec<Control>) -> Control {
        Control::Seq(children)
    }

    /// Walk the tree, visiting every node.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Control)) {
        f(self);
        match self {
            Control::Seq(cs) | Control::Par(cs) => {
                for c in cs {
                    c.visit(f);
                }
            }
            Control::If { then, els, .. } => {
                then.visit(f);
                if let Some(e) = els {
                    e.visit(f);
                }
            }
            Control::While { body, .. } => body.visit(f),
            Control::Enable(_) | Control::Invoke { .. } => {}
        }
    }
}

/// Supported partitioning schemes. Cyclic is the only one: bank = index mod
/// factor, offset = index div factor, per partitioned dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BankScheme {
    Cyclic,
}

/// Per-memory partitioning configuration: one factor per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSpec {
    pub memory: String,
    pub factors: Vec<u64>,
    pub scheme: BankScheme,
}

impl BankSpec {
    pub fn cyclic(memory: impl Into<String>, factors: Vec<u64>) -> BankSpec {
        BankSpec { memory: memory.into(), factors, scheme: BankScheme::Cyclic }
    }

    pub fn bank_count(&self) -> u64 {
        self.factors.iter().product()
    }
}

/// Per-cell-kind latency table: the single source of timing truth. The
/// relative costs are FPGA-ish modeling constants; multiply, divide and
/// modulo are deliberately expensive so address arithmetic shows up in
/// cycle counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyTable {
    pub register_write: u64,
    pub mem_read: u64,
    pub mem_write: u64,
    pub int_add: u64,
    pub int_sub: u64,
    pub int_mul: u64,
    pub int_div: u64,
    pub int_mod: u64,
    pub int_cmp: u64,
    pub float_add: u64,
    pub float_mul: u64,
    pub float_div: u64,
    pub float_exp: u64,
    pub float_cmp: u64,
}

pub const DEFAULT_LATENCY: LatencyTable = LatencyTable {
    register_write: 1,
    mem_read: 1,
    mem_write: 1,
    int_add: 1,
    int_sub: 1,
    int_mul: 3,
    int_div: 8,
    int_mod: 8,
    int_cmp: 1,
    float_add: 5,
    float_mul: 4,
    float_div: 8,
    float_exp: 6,
    float_cmp: 2,
};

impl LatencyTable {
    fn dest_cost(&self, kind: &CellKind, writes_data: bool) -> u64 {
        match kind {
            CellKind::Register { .. } => self.register_write,
            CellKind::Memory { .. } => {
                if writes_data {
                    self.mem_write
                } else {
                    self.mem_read
                }
            }
            CellKind::IntAdd => self.int_add,
            CellKind::IntSub => self.int_sub,
            CellKind::IntMul => self.int_mul,
            CellKind::IntDiv => self.int_div,
            CellKind::IntMod => self.int_mod,
            CellKind::IntCmp(_) => self.int_cmp,
            CellKind::FloatAdd => self.float_add,
            CellKind::FloatMul => self.float_mul,
            CellKind::FloatDiv => self.float_div,
            CellKind::FloatExp => self.float_exp,
            CellKind::FloatCmp(_) => self.float_cmp,
            CellKind::Constant { .. } => 0,
        }
    }
}

/// Static latency of a group: critical path over the cells the group drives,
/// each weighted by its kind's cost, minimum 1. Returns None on a
/// combinational cycle (caught separately by the validator).
pub fn derived_group_latency(
    component: &Component,
    group: &Group,
    table: &LatencyTable,
) -> Option<u64> {
    use std::collections::HashMap;

    // cells that appear as assignment destinations in this group
    let mut dests: Vec<&str> = Vec::new();
    for a in &group.assignments {
        if !dests.contains(&a.dest.cell.as_str()) {
            dests.push(&a.dest.cell);
        }
    }
    let writes_data = |cell: &str| {
        group
            .assignments
            .iter()
            .any(|a| a.dest.cell == cell && a.dest.port == "write_data")
    };

    // edge u -> v when an assignment into v sources from u (u also a dest).
    // Reading a register's `out` is the stored value, not a combinational
    // function of the same group's write into it, so registers break paths.
    let mut preds: HashMap<&str, Vec<&str>> = HashMap::new();
    for d in &dests {
        preds.insert(d, Vec::new());
    }
    for a in &group.assignments {
        let through_register = matches!(
            component.cell(&a.src.cell).map(|c| &c.kind),
            Some(CellKind::Register { .. })
        ) && a.src.port == "out";
        if dests.contains(&a.src.cell.as_str()) && a.src.cell != a.dest.cell && !through_register {
            preds.get_mut(a.dest.cell.as_str()).unwrap().push(&a.src.cell);
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unseen,
        Active,
        Done(u64),
    }
    let mut marks: HashMap<&str, Mark> = dests.iter().map(|d| (*d, Mark::Unseen)).collect();

    fn longest<'a>(
        node: &'a str,
        component: &Component,
        preds: &HashMap<&'a str, Vec<&'a str>>,
        marks: &mut HashMap<&'a str, Mark>,
        table: &LatencyTable,
        writes_data: &dyn Fn(&str) -> bool,
    ) -> Option<u64> {
        match marks[node] {
            Mark::Done(v) => return Some(v),
            Mark::Active => return None, // cycle
            Mark::Unseen => {}
        }
        marks.insert(node, Mark::Active);
        let mut best = 0;
        for p in &preds[node] {
            best = best.max(longest(p, component, preds, marks, table, writes_data)?);
        }
        let kind = &component.cell(node)?.kind;
        let v = best + table.dest_cost(kind, writes_data(node));
        marks.insert(node, Mark::Done(v));
        Some(v)
    }

    let mut max = 0;
    for d in dests.clone() {
        max = max.max(longest(d, component, &preds, &mut marks, table, &writes_data)?);
    }
    Some(max.max(1))
}
