// SPDX-License-Identifier: Apache-2.0

//! Cycle-accurate interpreter for the IR. Timing follows the static group
//! latencies: `seq` sums, `par` takes the max, `if`/`while` pay one cycle
//! per condition evaluation, `invoke` costs the callee total. Each memory
//! cell (bank) supports a single read or write per cycle; violations are
//! recorded as conflicts and optionally fail the run.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::floatlib::{f32_add, f32_cmp, f32_div, f32_exp_table, f32_mul, F32Bits};
use crate::frontend::Inputs;
use crate::ir::{Cell, CellKind, Component, Control, Group, InvokeArg, PortRef, Program};

#[derive(Debug, Clone, thiserror::Error)]
pub enum SimError {
    #[error("unknown component '{0}'")]
    UnknownComponent(String),
    #[error("out-of-bounds access to '{mem}': address {addr} (capacity {cap})")]
    OutOfBounds { mem: String, addr: i64, cap: u64 },
    #[error("cycle budget of {0} exceeded; aborting (likely nontermination)")]
    BudgetExceeded(u64),
    #[error("group '{group}': assignment {dest} never resolved (combinational cycle?)")]
    Unresolved { group: String, dest: String },
    #[error("condition port {0} is not a readable register or constant")]
    BadCondPort(PortRef),
    #[error("input for '{name}' has {got} elements, expected {want}")]
    InputShape { name: String, got: usize, want: usize },
    #[error("memory conflict at cycle {cycle}: '{memory}' accessed by {groups:?}")]
    Conflict { cycle: u64, memory: String, groups: Vec<String> },
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub fail_on_conflict: bool,
    pub trace: bool,
    /// 0 means the default budget of 10^8 cycles.
    pub cycle_budget: u64,
}

const DEFAULT_BUDGET: u64 = 100_000_000;

fn mask(v: u64, width: u32) -> u64 {
    if width >= 64 { v } else { v & ((1u64 << width) - 1) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conflict {
    pub cycle: u64,
    pub memory: String,
    pub groups: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub cycles: u64,
    /// Final images of the entry component's memory cells, flat words.
    pub memories: BTreeMap<String, Vec<u64>>,
    pub conflicts: Vec<Conflict>,
    /// JSON-lines trace, one object per cycle, when requested.
    pub trace: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AccessKind {
    Read,
    Write,
}

/// One memory access occupying the owning group's full activity window.
struct Access {
    start: u64,
    end: u64,
    mem_id: usize,
    mem_name: String,
    addr: u64,
    kind: AccessKind,
    group: String,
}

struct Activation {
    start: u64,
    end: u64,
    group: String,
}

struct MemState {
    data: Vec<u64>,
}

struct Sim<'a> {
    p: &'a Program,
    budget: u64,
    arena: Vec<MemState>,
    accesses: Vec<Access>,
    activations: Vec<Activation>,
    record: bool,
}

/// Per-component-instance register file and memory bindings.
struct Instance {
    regs: HashMap<String, u64>,
    mems: HashMap<String, usize>,
}

pub fn simulate(p: &Program, inputs: &Inputs, opts: &SimOptions) -> Result<SimResult, SimError> {
    let entry = p
        .entry_component()
        .ok_or_else(|| SimError::UnknownComponent(p.entry.clone()))?;

    let mut sim = Sim {
        p,
        budget: if opts.cycle_budget == 0 { DEFAULT_BUDGET } else { opts.cycle_budget },
        arena: Vec::new(),
        accesses: Vec::new(),
        activations: Vec::new(),
        record: true,
    };

    let mut inst = Instance { regs: HashMap::new(), mems: HashMap::new() };
    init_instance(entry, &mut inst, &mut sim.arena);
    for (name, v) in &inputs.scalars {
        if inst.regs.contains_key(name) {
            inst.regs.insert(name.clone(), v.bits());
        }
    }
    for (name, data) in &inputs.memories {
        if let Some(&id) = inst.mems.get(name) {
            if data.len() != sim.arena[id].data.len() {
                return Err(SimError::InputShape {
                    name: name.clone(),
                    got: data.len(),
                    want: sim.arena[id].data.len(),
                });
            }
            sim.arena[id].data.clone_from(data);
        }
    }

    let cycles = sim.exec(entry, &mut inst, &Clock(0))?;

    let conflicts = find_conflicts(&sim.accesses);
    if opts.fail_on_conflict {
        if let Some(c) = conflicts.first() {
            return Err(SimError::Conflict {
                cycle: c.cycle,
                memory: c.memory.clone(),
                groups: c.groups.clone(),
            });
        }
    }

    let mut memories = BTreeMap::new();
    for cell in &entry.cells {
        if cell.kind.is_memory() {
            memories.insert(cell.name.clone(), sim.arena[inst.mems[&cell.name]].data.clone());
        }
    }

    let trace = opts.trace.then(|| render_trace(cycles, &sim.activations, &sim.accesses));
    Ok(SimResult { cycles, memories, conflicts, trace })
}

fn init_instance(c: &Component, inst: &mut Instance, arena: &mut Vec<MemState>) {
    for cell in &c.cells {
        match &cell.kind {
            CellKind::Register { .. } => {
                inst.regs.insert(cell.name.clone(), 0);
            }
            CellKind::Memory { extents, .. } => {
                let len: u64 = extents.iter().product();
                inst.mems.insert(cell.name.clone(), arena.len());
                arena.push(MemState { data: vec![0; len as usize] });
            }
            _ => {}
        }
    }
}

/// Wrapper so a start time is never confused with a duration.
struct Clock(u64);

impl<'a> Sim<'a> {
    fn exec(&mut self, c: &Component, inst: &mut Instance, t: &Clock) -> Result<u64, SimError> {
        self.exec_ctrl(c, inst, &c.control, t.0)
    }

    fn exec_ctrl(
        &mut self,
        c: &Component,
        inst: &mut Instance,
        ctrl: &Control,
        t: u64,
    ) -> Result<u64, SimError> {
        if t > self.budget {
            return Err(SimError::BudgetExceeded(self.budget));
        }
        match ctrl {
            Control::Enable(g) => {
                let group = c.group(g).expect("validated group reference");
                self.run_group(c, inst, group, t)
            }
            Control::Seq(children) => {
                let mut d = 0;
                for ch in children {
                    d += self.exec_ctrl(c, inst, ch, t + d)?;
                }
                Ok(d)
            }
            Control::Par(children) => {
                let mut d = 0;
                for ch in children {
                    d = d.max(self.exec_ctrl(c, inst, ch, t)?);
                }
                Ok(d)
            }
            Control::If { cond, then, els } => {
                let taken = self.read_port(c, inst, cond)? != 0;
                let body = if taken {
                    Some(&**then)
                } else {
                    els.as_deref()
                };
                let d = match body {
                    Some(b) => self.exec_ctrl(c, inst, b, t + 1)?,
                    None => 0,
                };
                Ok(1 + d)
            }
            Control::While { cond, body } => {
                let mut d = 0;
                loop {
                    if t + d > self.budget {
                        return Err(SimError::BudgetExceeded(self.budget));
                    }
                    let go = self.read_port(c, inst, cond)? != 0;
                    d += 1;
                    if !go {
                        break;
                    }
                    d += self.exec_ctrl(c, inst, body, t + d)?;
                }
                Ok(d)
            }
            Control::Invoke { component, bindings } => {
                let callee = self
                    .p
                    .component(component)
                    .ok_or_else(|| SimError::UnknownComponent(component.clone()))?;
                let mut sub = Instance { regs: HashMap::new(), mems: HashMap::new() };
                init_instance(callee, &mut sub, &mut self.arena);
                for (name, arg) in bindings {
                    match arg {
                        InvokeArg::Port(pr) => {
                            let v = self.read_port(c, inst, pr)?;
                            sub.regs.insert(name.clone(), v);
                        }
                        InvokeArg::Mem(m) => {
                            sub.mems.insert(name.clone(), inst.mems[m]);
                        }
                    }
                }
                self.exec_ctrl(callee, &mut sub, &callee.control, t)
            }
        }
    }

    /// A port readable outside any group: register out or constant out.
    fn read_port(&self, c: &Component, inst: &Instance, pr: &PortRef) -> Result<u64, SimError> {
        match c.cell(&pr.cell).map(|cl| &cl.kind) {
            Some(CellKind::Register { .. }) if pr.port == "out" => Ok(inst.regs[&pr.cell]),
            Some(CellKind::Constant { bits, .. }) if pr.port == "out" => Ok(*bits),
            _ => Err(SimError::BadCondPort(pr.clone())),
        }
    }

    /// Execute one group: combinational fixpoint, then end-of-group commit
    /// of register and memory writes. Returns the group latency.
    fn run_group(
        &mut self,
        c: &Component,
        inst: &mut Instance,
        group: &Group,
        t: u64,
    ) -> Result<u64, SimError> {
        let lat = group.static_latency;
        if self.record {
            self.activations.push(Activation {
                start: t,
                end: t + lat,
                group: group.name.clone(),
            });
        }

        // Combinational evaluation: iterate to fixpoint. Port values keyed
        // by (cell, port); unit outputs computed once inputs are known.
        let mut vals: HashMap<(String, String), u64> = HashMap::new();
        for cell in &c.cells {
            match &cell.kind {
                CellKind::Register { .. } => {
                    vals.insert((cell.name.clone(), "out".into()), inst.regs[&cell.name]);
                }
                CellKind::Constant { bits, .. } => {
                    vals.insert((cell.name.clone(), "out".into()), *bits);
                }
                _ => {}
            }
        }

        let limit = group.assignments.len() + c.cells.len() + 2;
        for _ in 0..limit {
            let mut changed = false;
            for a in &group.assignments {
                let key = (a.dest.cell.clone(), a.dest.port.clone());
                if vals.contains_key(&key) {
                    continue;
                }
                if let Some(&v) = vals.get(&(a.src.cell.clone(), a.src.port.clone())) {
                    vals.insert(key, v);
                    changed = true;
                }
            }
            for cell in &c.cells {
                if self.propagate_cell(c, inst, cell, &mut vals)? {
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        // Commit: register writes and memory writes take effect together at
        // the end of the group.
        let mut mem_writes: Vec<(usize, u64, u64)> = Vec::new();
        for a in &group.assignments {
            let Some(&v) = vals.get(&(a.dest.cell.clone(), a.dest.port.clone())) else {
                return Err(SimError::Unresolved {
                    group: group.name.clone(),
                    dest: a.dest.to_string(),
                });
            };
            let kind = &c.cell(&a.dest.cell).expect("validated cell").kind;
            match kind {
                CellKind::Register { width } if a.dest.port == "in" => {
                    inst.regs.insert(a.dest.cell.clone(), mask(v, *width));
                }
                CellKind::Memory { .. } if a.dest.port == "write_data" => {
                    let id = inst.mems[&a.dest.cell];
                    let addr = self.mem_addr(c, inst, &a.dest.cell, kind, &vals)?;
                    mem_writes.push((id, addr, v));
                }
                _ => {}
            }
        }
        for (id, addr, v) in mem_writes {
            self.arena[id].data[addr as usize] = v;
        }

        // Record one access per memory the group touched.
        if self.record {
            let mut touched: Vec<&str> = Vec::new();
            for a in &group.assignments {
                let mem = if c.cell(&a.dest.cell).map(|cl| cl.kind.is_memory()) == Some(true) {
                    &a.dest.cell
                } else if c.cell(&a.src.cell).map(|cl| cl.kind.is_memory()) == Some(true) {
                    &a.src.cell
                } else {
                    continue;
                };
                if !touched.contains(&mem.as_str()) {
                    touched.push(mem);
                }
            }
            for mem in touched {
                let kind = &c.cell(mem).expect("validated cell").kind;
                let addr = self.mem_addr(c, inst, mem, kind, &vals)?;
                let is_write = group
                    .assignments
                    .iter()
                    .any(|a| a.dest.cell == *mem && a.dest.port == "write_data");
                self.accesses.push(Access {
                    start: t,
                    end: t + lat,
                    mem_id: inst.mems[mem],
                    mem_name: mem.to_string(),
                    addr,
                    kind: if is_write { AccessKind::Write } else { AccessKind::Read },
                    group: group.name.clone(),
                });
            }
        }
        Ok(lat)
    }

    /// Flat row-major address from the addr0..addrN port values.
    fn mem_addr(
        &self,
        _c: &Component,
        _inst: &Instance,
        mem: &str,
        kind: &CellKind,
        vals: &HashMap<(String, String), u64>,
    ) -> Result<u64, SimError> {
        let CellKind::Memory { extents, .. } = kind else { unreachable!() };
        let mut flat: i64 = 0;
        for (d, e) in extents.iter().enumerate() {
            let raw = vals
                .get(&(mem.to_string(), format!("addr{d}")))
                .copied()
                .unwrap_or(0);
            let idx = (raw as u32) as i32 as i64;
            if idx < 0 || idx >= *e as i64 {
                return Err(SimError::OutOfBounds {
                    mem: mem.to_string(),
                    addr: idx,
                    cap: *e,
                });
            }
            flat = flat * *e as i64 + idx;
        }
        Ok(flat as u64)
    }

    /// Compute a functional unit's or memory's output once its inputs are
    /// available. Returns whether anything new was derived.
    fn propagate_cell(
        &self,
        _c: &Component,
        inst: &Instance,
        cell: &Cell,
        vals: &mut HashMap<(String, String), u64>,
    ) -> Result<bool, SimError> {
        let name = &cell.name;
        let get = |vals: &HashMap<(String, String), u64>, port: &str| {
            vals.get(&(name.clone(), port.to_string())).copied()
        };
        let out_key = (name.clone(), "out".to_string());
        match &cell.kind {
            CellKind::Memory { extents, .. } => {
                let key = (name.clone(), "read_data".to_string());
                if vals.contains_key(&key) {
                    return Ok(false);
                }
                if (0..extents.len()).all(|d| get(vals, &format!("addr{d}")).is_some()) {
                    // Only meaningful when some assignment actually reads it;
                    // harmless otherwise.
                    let addr = self.mem_addr(_c, inst, name, &cell.kind, vals)?;
                    let id = inst.mems[name];
                    vals.insert(key, self.arena[id].data[addr as usize]);
                    return Ok(true);
                }
                Ok(false)
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
            | CellKind::FloatCmp(_) => {
                if vals.contains_key(&out_key) {
                    return Ok(false);
                }
                let (Some(l), Some(r)) = (get(vals, "left"), get(vals, "right")) else {
                    return Ok(false);
                };
                let li = (l as u32) as i32;
                let ri = (r as u32) as i32;
                let lf = F32Bits(l as u32);
                let rf = F32Bits(r as u32);
                let v: u64 = match &cell.kind {
                    CellKind::IntAdd => li.wrapping_add(ri) as u32 as u64,
                    CellKind::IntSub => li.wrapping_sub(ri) as u32 as u64,
                    CellKind::IntMul => li.wrapping_mul(ri) as u32 as u64,
                    CellKind::IntDiv => {
                        if ri == 0 { 0 } else { li.wrapping_div(ri) as u32 as u64 }
                    }
                    CellKind::IntMod => {
                        if ri == 0 { 0 } else { li.wrapping_rem(ri) as u32 as u64 }
                    }
                    CellKind::IntCmp(op) => op.eval_int(li as i64, ri as i64) as u64,
                    CellKind::FloatAdd => f32_add(lf, rf).0 as u64,
                    CellKind::FloatMul => f32_mul(lf, rf).0 as u64,
                    CellKind::FloatDiv => f32_div(lf, rf).0 as u64,
                    CellKind::FloatCmp(op) => f32_cmp(*op, lf, rf) as u64,
                    _ => unreachable!(),
                };
                vals.insert(out_key, v);
                Ok(true)
            }
            CellKind::FloatExp => {
                if vals.contains_key(&out_key) {
                    return Ok(false);
                }
                let Some(x) = get(vals, "in") else { return Ok(false) };
                vals.insert(out_key, f32_exp_table(F32Bits(x as u32)).0 as u64);
                Ok(true)
            }
            CellKind::Register { .. } | CellKind::Constant { .. } => Ok(false),
        }
    }
}

/// Sweep all recorded accesses for overlaps on the same word. The model is
/// word-addressed: two accesses to one address whose activity windows share
/// at least one cycle conflict; distinct banks (and distinct words) never do.
fn find_conflicts(accesses: &[Access]) -> Vec<Conflict> {
    let mut by_mem: BTreeMap<(usize, u64), Vec<&Access>> = BTreeMap::new();
    for a in accesses {
        by_mem.entry((a.mem_id, a.addr)).or_default().push(a);
    }
    let mut out = Vec::new();
    for list in by_mem.values() {
        let mut sorted: Vec<&&Access> = list.iter().collect();
        sorted.sort_by_key(|a| (a.start, a.end));
        for (i, a) in sorted.iter().enumerate() {
            for b in sorted[i + 1..].iter() {
                if b.start >= a.end {
                    break;
                }
                // overlap at max(starts)
                out.push(Conflict {
                    cycle: a.start.max(b.start),
                    memory: a.mem_name.clone(),
                    groups: vec![a.group.clone(), b.group.clone()],
                });
            }
        }
    }
    out.sort_by(|x, y| (x.cycle, &x.memory).cmp(&(y.cycle, &y.memory)));
    out
}

/// A maximal run of cycles in which two or more trace accesses hit the same
/// word of the same memory. Derived purely from the JSON-lines trace, with no
/// knowledge of how the simulator detected conflicts.
#[derive(Debug, Clone, PartialEq)]
pub struct Collision {
    pub memory: String,
    pub addr: u64,
    /// First conflicting cycle, inclusive.
    pub start: u64,
    /// One past the last conflicting cycle.
    pub end: u64,
}

/// Re-derive memory conflicts by replaying a JSON-lines trace: any cycle
/// where a single word sees more than one access collides. Consecutive
/// colliding cycles on one word merge into one interval.
pub fn replay_collisions(trace: &str) -> Result<Vec<Collision>, String> {
    #[derive(serde::Deserialize)]
    struct Line {
        cycle: u64,
        mem_accesses: Vec<LineAccess>,
    }
    #[derive(serde::Deserialize)]
    struct LineAccess {
        mem: String,
        addr: u64,
    }

    let mut open: BTreeMap<(String, u64), Collision> = BTreeMap::new();
    let mut done: Vec<Collision> = Vec::new();
    for (n, raw) in trace.lines().enumerate() {
        let line: Line =
            serde_json::from_str(raw).map_err(|e| format!("trace line {}: {e}", n + 1))?;
        let mut counts: BTreeMap<(String, u64), u32> = BTreeMap::new();
        for a in &line.mem_accesses {
            *counts.entry((a.mem.clone(), a.addr)).or_insert(0) += 1;
        }
        // Close intervals whose word is no longer contended this cycle.
        let colliding: Vec<(String, u64)> = counts
            .iter()
            .filter(|(_, &n)| n >= 2)
            .map(|(k, _)| k.clone())
            .collect();
        let closed: Vec<(String, u64)> = open
            .keys()
            .filter(|k| !colliding.contains(k))
            .cloned()
            .collect();
        for k in closed {
            done.push(open.remove(&k).unwrap());
        }
        for key in colliding {
            open.entry(key.clone())
                .and_modify(|c| c.end = line.cycle + 1)
                .or_insert(Collision {
                    memory: key.0,
                    addr: key.1,
                    start: line.cycle,
                    end: line.cycle + 1,
                });
        }
    }
    done.extend(open.into_values());
    done.sort_by(|a, b| (a.start, &a.memory, a.addr).cmp(&(b.start, &b.memory, b.addr)));
    Ok(done)
}

/// Cross-check the simulator's reported conflicts against an independent
/// trace replay. Every reported conflict must land inside a replayed
/// collision interval on the same memory, and every replayed interval must
/// contain at least one reported conflict. Returns a description of the
/// first discrepancy, if any.
pub fn cross_check_conflicts(conflicts: &[Conflict], trace: &str) -> Result<(), String> {
    let collisions = replay_collisions(trace)?;
    for c in conflicts {
        let confirmed = collisions
            .iter()
            .any(|k| k.memory == c.memory && k.start <= c.cycle && c.cycle < k.end);
        if !confirmed {
            return Err(format!(
                "reported conflict on '{}' at cycle {} has no matching collision in the trace",
                c.memory, c.cycle
            ));
        }
    }
    for k in &collisions {
        let reported = conflicts
            .iter()
            .any(|c| c.memory == k.memory && k.start <= c.cycle && c.cycle < k.end);
        if !reported {
            return Err(format!(
                "trace shows a collision on '{}' word {} during cycles {}..{} with no reported conflict",
                k.memory, k.addr, k.start, k.end
            ));
        }
    }
    Ok(())
}

/// One JSON object per cycle listing active groups and memory accesses.
fn render_trace(cycles: u64, activations: &[Activation], accesses: &[Access]) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    for cycle in 0..cycles {
        let mut line = String::new();
        write!(line, "{{\"cycle\":{cycle},\"active_groups\":[").unwrap();
        let mut first = true;
        for a in activations {
            if a.start <= cycle && cycle < a.end {
                if !first {
                    line.push(',');
                }
                write!(line, "\"{}\"", a.group).unwrap();
                first = false;
            }
        }
        line.push_str("],\"mem_accesses\":[");
        let mut first = true;
        for a in accesses {
            if a.start <= cycle && cycle < a.end {
                if !first {
                    line.push(',');
                }
                let kind = if a.kind == AccessKind::Write { "write" } else { "read" };
                write!(line, "{{\"mem\":\"{}\",\"addr\":{},\"kind\":\"{kind}\"}}", a.mem_name, a.addr)
                    .unwrap();
                first = false;
            }
        }
        line.push_str("]}");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Assignment, Cell, Group};

    /// One component: a register fed by constants, two groups of latency 3
    /// and 5, a 4-word memory and two reader groups at fixed addresses.
    fn test_program(control: Control) -> Program {
        let cells = vec![
            Cell { name: "r".into(), kind: CellKind::Register { width: 32 } },
            Cell { name: "flag".into(), kind: CellKind::Register { width: 1 } },
            Cell { name: "k0".into(), kind: CellKind::Constant { float: false, width: 32, bits: 0 } },
            Cell { name: "k1".into(), kind: CellKind::Constant { float: false, width: 32, bits: 1 } },
            Cell { name: "m".into(), kind: CellKind::Memory { float: false, width: 32, extents: vec![4] } },
        ];
        let set_r = |name: &str, from: &str, latency: u64| Group {
            name: name.into(),
            assignments: vec![Assignment {
                dest: PortRef::new("r", "in"),
                src: PortRef::new(from, "out"),
            }],
            static_latency: latency,
        };
        let read_m = |name: &str, addr: &str| Group {
            name: name.into(),
            assignments: vec![
                Assignment { dest: PortRef::new("m", "addr0"), src: PortRef::new(addr, "out") },
                Assignment { dest: PortRef::new("r", "in"), src: PortRef::new("m", "read_data") },
            ],
            static_latency: 1,
        };
        let groups = vec![
            set_r("ga", "k0", 3),
            set_r("gb", "k1", 5),
            read_m("ra0", "k0"),
            read_m("rb0", "k0"),
            read_m("rb1", "k1"),
        ];
        let component = crate::ir::Component {
            name: "main".into(),
            scalar_ports: vec![],
            cells,
            groups,
            control,
        };
        Program { components: vec![component], entry: "main".into() }
    }

    fn run(control: Control) -> SimResult {
        let p = test_program(control);
        simulate(&p, &Inputs::default(), &SimOptions::default()).unwrap()
    }

    #[test]
    fn seq_sums_and_par_takes_max() {
        let seq = run(Control::Seq(vec![Control::Enable("ga".into()), Control::Enable("gb".into())]));
        assert_eq!(seq.cycles, 8);
        let par = run(Control::Par(vec![Control::Enable("ga".into()), Control::Enable("gb".into())]));
        assert_eq!(par.cycles, 5);
    }

    #[test]
    fn if_and_while_pay_one_cycle_per_condition() {
        // flag is 0: the else branch runs
        let c = Control::If {
            cond: PortRef::new("flag", "out"),
            then: Box::new(Control::Enable("ga".into())),
            els: Some(Box::new(Control::Enable("gb".into()))),
        };
        assert_eq!(run(c).cycles, 1 + 5);
        // flag is 0: the while body never runs, one condition check
        let w = Control::While {
            cond: PortRef::new("flag", "out"),
            body: Box::new(Control::Enable("ga".into())),
        };
        assert_eq!(run(w).cycles, 1);
    }

    #[test]
    fn same_word_reads_in_one_cycle_conflict() {
        let sim = run(Control::Par(vec![
            Control::Enable("ra0".into()),
            Control::Enable("rb0".into()),
        ]));
        assert_eq!(sim.conflicts.len(), 1);
        assert_eq!(sim.conflicts[0].cycle, 0);
        assert_eq!(sim.conflicts[0].memory, "m");
    }

    #[test]
    fn distinct_words_never_conflict() {
        let sim = run(Control::Par(vec![
            Control::Enable("ra0".into()),
            Control::Enable("rb1".into()),
        ]));
        assert!(sim.conflicts.is_empty());
    }

    #[test]
    fn fail_on_conflict_aborts_with_the_cycle() {
        let p = test_program(Control::Par(vec![
            Control::Enable("ra0".into()),
            Control::Enable("rb0".into()),
        ]));
        let opts = SimOptions { fail_on_conflict: true, ..SimOptions::default() };
        match simulate(&p, &Inputs::default(), &opts) {
            Err(SimError::Conflict { cycle: 0, .. }) => {}
            other => panic!("expected a cycle-0 conflict error, got {other:?}"),
        }
    }

    #[test]
    fn replay_merges_consecutive_collision_cycles() {
        let trace = "\
{\"cycle\":0,\"active_groups\":[],\"mem_accesses\":[{\"mem\":\"m\",\"addr\":2,\"kind\":\"write\"},{\"mem\":\"m\",\"addr\":2,\"kind\":\"read\"}]}
{\"cycle\":1,\"active_groups\":[],\"mem_accesses\":[{\"mem\":\"m\",\"addr\":2,\"kind\":\"write\"},{\"mem\":\"m\",\"addr\":2,\"kind\":\"read\"}]}
{\"cycle\":2,\"active_groups\":[],\"mem_accesses\":[{\"mem\":\"m\",\"addr\":2,\"kind\":\"read\"}]}
";
        let cols = replay_collisions(trace).unwrap();
        assert_eq!(cols.len(), 1);
        assert_eq!((cols[0].start, cols[0].end, cols[0].addr), (0, 2, 2));
    }

    #[test]
    fn cross_check_rejects_phantom_and_missed_conflicts() {
        let quiet = "{\"cycle\":0,\"active_groups\":[],\"mem_accesses\":[]}\n";
        let phantom =
            vec![Conflict { cycle: 0, memory: "m".into(), groups: vec!["a".into(), "b".into()] }];
        assert!(cross_check_conflicts(&phantom, quiet).is_err());

        let busy = "{\"cycle\":0,\"active_groups\":[],\"mem_accesses\":[{\"mem\":\"m\",\"addr\":0,\"kind\":\"write\"},{\"mem\":\"m\",\"addr\":0,\"kind\":\"write\"}]}\n";
        assert!(cross_check_conflicts(&[], busy).is_err());
        assert!(cross_check_conflicts(&phantom, busy).is_ok());
    }
}
