// SPDX-License-Identifier: Apache-2.0

//! Textual printer for the IR. `parse_ir(print_ir(p)) == p` structurally.

use std::fmt::Write;

use super::{CellKind, Component, Control, InvokeArg, PortDir, Program};
use crate::floatlib::{f32_decode, F32Bits};

pub fn print_ir(p: &Program) -> String {
    let mut out = String::new();
    writeln!(out, "entry {};", p.entry).unwrap();
    for c in &p.components {
        out.push('\n');
        print_component(&mut out, c);
    }
    out
}

fn print_component(out: &mut String, c: &Component) {
    write!(out, "component {}(", c.name).unwrap();
    for (i, p) in c.scalar_ports.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let dir = match p.dir {
            PortDir::In => "in",
            PortDir::Out => "out",
        };
        write!(out, "{}: {} {}", p.name, dir, p.width).unwrap();
    }
    out.push_str(") {\n");

    out.push_str("  cells {\n");
    for cell in &c.cells {
        write!(out, "    {} = ", cell.name).unwrap();
        print_cell_kind(out, &cell.kind);
        out.push_str(";\n");
    }
    out.push_str("  }\n");

    out.push_str("  groups {\n");
    for g in &c.groups {
        writeln!(out, "    group {} latency {} {{", g.name, g.static_latency).unwrap();
        for a in &g.assignments {
            writeln!(out, "      {} = {};", a.dest, a.src).unwrap();
        }
        out.push_str("    }\n");
    }
    out.push_str("  }\n");

    out.push_str("  control {\n");
    print_control(out, &c.control, 2);
    out.push_str("  }\n");
    out.push_str("}\n");
}

fn print_cell_kind(out: &mut String, kind: &CellKind) {
    match kind {
        CellKind::Register { width } => write!(out, "register({width})").unwrap(),
        CellKind::Memory { float, width, extents } => {
            let ty = if *float { "f32".to_string() } else { format!("i{width}") };
            let dims: Vec<String> = extents.iter().map(|e| e.to_string()).collect();
            write!(out, "memory({ty}, [{}])", dims.join(", ")).unwrap();
        }
        CellKind::IntAdd => out.push_str("int_add"),
        CellKind::IntSub => out.push_str("int_sub"),
        CellKind::IntMul => out.push_str("int_mul"),
        CellKind::IntDiv => out.push_str("int_div"),
        CellKind::IntMod => out.push_str("int_mod"),
        CellKind::IntCmp(op) => write!(out, "int_cmp({})", op.keyword()).unwrap(),
        CellKind::FloatAdd => out.push_str("float_add"),
        CellKind::FloatMul => out.push_str("float_mul"),
        CellKind::FloatDiv => out.push_str("float_div"),
        CellKind::FloatExp => out.push_str("float_exp"),
        CellKind::FloatCmp(op) => write!(out, "float_cmp({})", op.keyword()).unwrap(),
        CellKind::Constant { float: true, bits, .. } => {
            let dec = f32_decode(F32Bits(*bits as u32));
            write!(out, "const f32 0x{bits:08X} /* {dec} */").unwrap();
        }
        CellKind::Constant { float: false, width, bits } => {
            write!(out, "const i{width} 0x{bits:X}").unwrap();
        }
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_control(out: &mut String, ctrl: &Control, level: usize) {
    indent(out, level);
    match ctrl {
        Control::Enable(g) => writeln!(out, "enable {g};").unwrap(),
        Control::Seq(cs) => {
            out.push_str("seq {\n");
            for c in cs {
                print_control(out, c, level + 1);
            }
            indent(out, level);
            out.push_str("}\n");
        }
        Control::Par(cs) => {
            out.push_str("par {\n");
            for c in cs {
                print_control(out, c, level + 1);
            }
            indent(out, level);
            out.push_str("}\n");
        }
        Control::If { cond, then, els } => {
            writeln!(out, "if {cond} {{").unwrap();
            print_control(out, then, level + 1);
            indent(out, level);
            out.push_str("}\n");
            if let Some(e) = els {
                indent(out, level);
                out.push_str("else {\n");
                print_control(out, e, level + 1);
                indent(out, level);
                out.push_str("}\n");
            }
        }
        Control::While { cond, body } => {
            writeln!(out, "while {cond} {{").unwrap();
            print_control(out, body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        Control::Invoke { component, bindings } => {
            write!(out, "invoke {component}(").unwrap();
            for (i, (name, arg)) in bindings.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                match arg {
                    InvokeArg::Port(p) => write!(out, "{name} = {p}").unwrap(),
                    InvokeArg::Mem(m) => write!(out, "{name} = {m}").unwrap(),
                }
            }
            out.push_str(");\n");
        }
    }
}
