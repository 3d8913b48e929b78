// SPDX-License-Identifier: Apache-2.0

//! Predicate folding. After par-loop unrolling the bank-selection guards
//! introduced by the branch strategy usually compare two compile-time
//! constants (`(4*q + 1) % 2 == 0` and the like). Fold those `if`s away so
//! the schedule does not pay for branches that can never be taken.

use crate::frontend::{map_stmts, Function, Stmt};

pub fn fold_bank_predicates(f: &Function) -> Function {
    let body = map_stmts(&f.body, &mut |s| match s {
        Stmt::If { cond, then, els } => match cond.as_const() {
            Some(true) => then,
            Some(false) => els,
            None => vec![Stmt::If { cond, then, els }],
        },
        other => vec![other],
    });
    Function { body, ..f.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_dsl;

    fn count_ifs(body: &[Stmt]) -> usize {
        body.iter()
            .map(|s| match s {
                Stmt::If { then, els, .. } => 1 + count_ifs(then) + count_ifs(els),
                Stmt::For { body, .. } => count_ifs(body),
                Stmt::ParArms { arms } => arms.iter().map(|a| count_ifs(a)).sum(),
                _ => 0,
            })
            .sum()
    }

    #[test]
    fn constant_predicates_fold_to_taken_side() {
        let src = "func k(m: int[2]) {\n\
                   if (1 == 0) { m[0] = 7; } else { m[1] = 8; }\n\
                   if (0 == 0) { m[0] = 9; }\n\
                   }";
        let f = parse_dsl(src).unwrap().remove(0);
        let g = fold_bank_predicates(&f);
        assert_eq!(count_ifs(&g.body), 0);
        assert!(matches!(
            g.body.as_slice(),
            [Stmt::Store { .. }, Stmt::Store { .. }]
        ));
    }

    #[test]
    fn symbolic_predicates_survive() {
        let src = "func k(m: int[4]) {\n\
                   for (int i = 0; i < 4; ++i) {\n\
                   if (i % 2 == 0) { m[i] = i; }\n\
                   } }";
        let f = parse_dsl(src).unwrap().remove(0);
        assert_eq!(count_ifs(&fold_bank_predicates(&f).body), 1);
    }
}
