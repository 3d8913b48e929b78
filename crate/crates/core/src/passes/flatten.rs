// SPDX-License-Identifier: Apache-2.0

//! Memory flattening. The target IR only knows single-dimensional memories,
//! so every d-dimensional tensor becomes a 1-D buffer of the same total size
//! and every access index becomes its row-major linearization.

use crate::frontend::{map_stmts, AffineExpr, Function, MemRef, Stmt};
use std::collections::BTreeMap;

pub fn flatten_memories(f: &Function) -> Function {
    let mut strides: BTreeMap<String, Vec<i64>> = BTreeMap::new();
    let mem_params: Vec<MemRef> = f
        .mem_params
        .iter()
        .map(|m| {
            if m.extents.len() > 1 {
                let mut s = vec![1i64; m.extents.len()];
                for d in (0..m.extents.len() - 1).rev() {
                    s[d] = s[d + 1] * m.extents[d + 1] as i64;
                }
                strides.insert(m.name.clone(), s);
                MemRef {
                    name: m.name.clone(),
                    elem: m.elem,
                    extents: vec![m.extents.iter().product()],
                }
            } else {
                m.clone()
            }
        })
        .collect();

    let linearize = |mem: &str, idx: &[AffineExpr]| -> Vec<AffineExpr> {
        match strides.get(mem) {
            Some(s) => {
                let mut flat = AffineExpr::constant(0);
                for (e, k) in idx.iter().zip(s) {
                    flat = flat.add(&e.scale(*k));
                }
                vec![flat.simplify()]
            }
            None => idx.to_vec(),
        }
    };

    let body = map_stmts(&f.body, &mut |s| match s {
        Stmt::Load { dest, mem, idx } => {
            let idx = linearize(&mem, &idx);
            vec![Stmt::Load { dest, mem, idx }]
        }
        Stmt::Store { mem, idx, value } => {
            let idx = linearize(&mem, &idx);
            vec![Stmt::Store { mem, idx, value }]
        }
        other => vec![other],
    });

    Function { mem_params, body, ..f.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{interpret, parse_dsl, Inputs, InterpOptions};

    #[test]
    fn multi_dim_memory_becomes_row_major_1d() {
        let src = "func k(m: int[2][3]) {\n\
                   for (int i = 0; i < 2; ++i) {\n\
                   for (int j = 0; j < 3; ++j) {\n\
                   m[i][j] = 10*i + j;\n\
                   } } }";
        let f = parse_dsl(src).unwrap().remove(0);
        let g = flatten_memories(&f);
        assert_eq!(g.mem("m").unwrap().extents, [6]);
        // images agree element for element: both layouts are row-major
        let a = interpret(std::slice::from_ref(&f), "k", &Inputs::default(), InterpOptions::default()).unwrap();
        let b = interpret(std::slice::from_ref(&g), "k", &Inputs::default(), InterpOptions::default()).unwrap();
        assert_eq!(a["m"].data, b["m"].data);
        assert_eq!(b["m"].data, [0, 1, 2, 10, 11, 12]);
    }

    #[test]
    fn one_dimensional_memories_are_untouched() {
        let f = parse_dsl("func k(m: int[5]) { for (int i = 0; i < 5; ++i) { m[i] = i; } }")
            .unwrap()
            .remove(0);
        assert_eq!(flatten_memories(&f), f);
    }
}
