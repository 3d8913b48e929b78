// SPDX-License-Identifier: Apache-2.0

//! Structural validation. Every diagnostic carries component context; an
//! empty list means the program satisfies all IR invariants and can be
//! simulated without structural faults.

use std::collections::{HashMap, HashSet};

use super::{CellKind, Component, Control, InvokeArg, PortDir, Program, DEFAULT_LATENCY};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub context: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.context, self.message)
    }
}

pub fn validate(p: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = HashSet::new();
    for c in &p.components {
        if !seen.insert(c.name.as_str()) {
            diags.push(Diagnostic {
                context: "program".into(),
                message: format!("duplicate component name '{}'", c.name),
            });
        }
    }
    if p.component(&p.entry).is_none() {
        diags.push(Diagnostic {
            context: "program".into(),
            message: format!("entry component '{}' does not exist", p.entry),
        });
    }

    check_invoke_cycles(p, &mut diags);
    for c in &p.components {
        validate_component(p, c, &mut diags);
    }
    diags
}

fn check_invoke_cycles(p: &Program, diags: &mut Vec<Diagnostic>) {
    let mut edges: HashMap<&str, HashSet<&str>> = HashMap::new();
    for c in &p.components {
        let entry = edges.entry(c.name.as_str()).or_default();
        c.control.visit(&mut |node| {
            if let Control::Invoke { component, .. } = node {
                entry.insert(component.as_str());
            }
        });
    }
    // DFS cycle detection
    fn dfs<'a>(
        node: &'a str,
        edges: &HashMap<&'a str, HashSet<&'a str>>,
        active: &mut Vec<&'a str>,
        done: &mut HashSet<&'a str>,
        cycles: &mut Vec<String>,
    ) {
        if done.contains(node) {
            return;
        }
        if active.contains(&node) {
            let start = active.iter().position(|n| *n == node).unwrap();
            let mut path: Vec<&str> = active[start..].to_vec();
            path.push(node);
            cycles.push(path.join("->"));
            return;
        }
        active.push(node);
        if let Some(succs) = edges.get(node) {
            let mut sorted: Vec<&&str> = succs.iter().collect();
            sorted.sort();
            for s in sorted {
                dfs(s, edges, active, done, cycles);
            }
        }
        active.pop();
        done.insert(node);
    }
    let mut cycles = Vec::new();
    let mut done = HashSet::new();
    for c in &p.components {
        dfs(&c.name, &edges, &mut Vec::new(), &mut done, &mut cycles);
    }
    for cy in cycles {
        diags.push(Diagnostic {
            context: "program".into(),
            message: format!("recursive invocation: {cy}"),
        });
    }
}

fn validate_component(p: &Program, c: &Component, diags: &mut Vec<Diagnostic>) {
    let ctx = |sub: &str| {
        if sub.is_empty() {
            c.name.clone()
        } else {
            format!("{}/{}", c.name, sub)
        }
    };
    let mut push = |context: String, message: String| diags.push(Diagnostic { context, message });

    let mut names = HashSet::new();
    for cell in &c.cells {
        if !names.insert(cell.name.as_str()) {
            push(ctx(""), format!("duplicate cell name '{}'", cell.name));
        }
        match &cell.kind {
            CellKind::Memory { float, width, extents } => {
                if extents.iter().any(|e| *e == 0) {
                    push(ctx(&cell.name), "memory extent must be >= 1".into());
                }
                if *float && *width != 32 {
                    push(ctx(&cell.name), "float memory element width must be 32".into());
                }
                if !*float && !(1..=64).contains(width) {
                    push(ctx(&cell.name), "integer element width must be in 1..=64".into());
                }
            }
            CellKind::Constant { width, bits, float } => {
                if *float && *width != 32 {
                    push(ctx(&cell.name), "float constant width must be 32".into());
                }
                if *width < 64 && bits >> width != 0 {
                    push(
                        ctx(&cell.name),
                        format!("constant 0x{bits:X} does not fit in {width} bits"),
                    );
                }
            }
            _ => {}
        }
    }
    let mut gnames = HashSet::new();
    for g in &c.groups {
        if !gnames.insert(g.name.as_str()) {
            push(ctx(""), format!("duplicate group name '{}'", g.name));
        }
        let mut dest_ports = HashSet::new();
        for a in &g.assignments {
            for pr in [&a.dest, &a.src] {
                match c.cell(&pr.cell) {
                    None => push(ctx(&g.name), format!("unresolved cell '{}'", pr.cell)),
                    Some(cell) if !cell.kind.has_port(&pr.port) => {
                        push(ctx(&g.name), format!("cell '{}' has no port '{}'", pr.cell, pr.port))
                    }
                    _ => {}
                }
            }
            if !dest_ports.insert((&a.dest.cell, &a.dest.port)) {
                push(ctx(&g.name), format!("multiple assignments to {}", a.dest));
            }
        }
        match super::derived_group_latency(c, g, &DEFAULT_LATENCY) {
            None => push(ctx(&g.name), "combinational cycle in group assignments".into()),
            Some(derived) if derived != g.static_latency => push(
                ctx(&g.name),
                format!(
                    "static latency {} does not match derived latency {derived}",
                    g.static_latency
                ),
            ),
            _ => {}
        }
    }

    validate_control(p, c, &c.control, diags);
}

fn validate_control(p: &Program, c: &Component, ctrl: &Control, diags: &mut Vec<Diagnostic>) {
    let mut push =
        |message: String| diags.push(Diagnostic { context: c.name.clone(), message });
    match ctrl {
        Control::Enable(g) => {
            if c.group(g).is_none() {
                push(format!("enable of undeclared group '{g}'"));
            }
        }
        Control::Seq(cs) | Control::Par(cs) => {
            if cs.is_empty() {
                push("empty control block".into());
            }
            for child in cs {
                validate_control(p, c, child, diags);
            }
        }
        Control::If { cond, then, els } => {
            check_cond_port(c, cond, diags);
            validate_control(p, c, then, diags);
            if let Some(e) = els {
                validate_control(p, c, e, diags);
            }
        }
        Control::While { cond, body } => {
            check_cond_port(c, cond, diags);
            validate_control(p, c, body, diags);
        }
        Control::Invoke { component, bindings } => {
            let Some(callee) = p.component(component) else {
                push(format!("invoke of undeclared component '{component}'"));
                return;
            };
            for (name, arg) in bindings {
                match arg {
                    InvokeArg::Port(pr) => {
                        let port_ok = callee
                            .scalar_ports
                            .iter()
                            .any(|sp| sp.name == *name && sp.dir == PortDir::In);
                        if !port_ok {
                            push(format!(
                                "invoke {component}: no input port '{name}' on callee"
                            ));
                        }
                        match c.cell(&pr.cell) {
                            None => push(format!("invoke {component}: unresolved cell '{}'", pr.cell)),
                            Some(cell) if !cell.kind.has_port(&pr.port) => {
                                push(format!("invoke {component}: cell '{}' has no port '{}'", pr.cell, pr.port))
                            }
                            _ => {}
                        }
                    }
                    InvokeArg::Mem(m) => {
                        let callee_mem = callee.cell(name).map(|cl| &cl.kind);
                        let caller_mem = c.cell(m).map(|cl| &cl.kind);
                        match (callee_mem, caller_mem) {
                            (Some(CellKind::Memory { float: f1, width: w1, extents: e1 }),
                             Some(CellKind::Memory { float: f2, width: w2, extents: e2 })) => {
                                if (f1, w1, e1) != (f2, w2, e2) {
                                    push(format!(
                                        "invoke {component}: memory binding '{name}' = '{m}' shape mismatch"
                                    ));
                                }
                            }
                            _ => push(format!(
                                "invoke {component}: memory binding '{name}' = '{m}' does not name memories on both sides"
                            )),
                        }
                    }
                }
            }
        }
    }
}

fn check_cond_port(c: &Component, cond: &super::PortRef, diags: &mut Vec<Diagnostic>) {
    match c.cell(&cond.cell) {
        None => diags.push(Diagnostic {
            context: c.name.clone(),
            message: format!("condition references undeclared cell '{}'", cond.cell),
        }),
        Some(cell) if !cell.kind.has_port(&cond.port) => diags.push(Diagnostic {
            context: c.name.clone(),
            message: format!("condition cell '{}' has no port '{}'", cond.cell, cond.port),
        }),
        _ => {}
    }
}
