// SPDX-License-Identifier: Apache-2.0

//! Strip-mining / par materialization: split a sequential loop of trip count
//! N into an outer sequential loop of ceil(N/c) and an inner parallel loop
//! of c, substituting `lo + c*outer + inner` for the original variable. A
//! guard is inserted inside the par body when c does not divide N.

use crate::floatlib::CmpOp;
use crate::frontend::{AffineCond, AffineExpr, Function, Stmt};

use super::{fresh_name, substitute_stmts, used_names, PassError};

pub fn strip_mine(f: &Function, loop_var: &str, factor: u64) -> Result<Function, PassError> {
    if factor == 0 {
        return Err(PassError::BadFactor);
    }
    let mut used = used_names(f);
    let mut found = false;
    let body = rewrite(&f.body, loop_var, factor as i64, &mut used, &mut found)?;
    if !found {
        return Err(PassError::LoopNotFound(loop_var.to_string()));
    }
    Ok(Function { body, ..f.clone() })
}

fn rewrite(
    body: &[Stmt],
    loop_var: &str,
    factor: i64,
    used: &mut std::collections::BTreeSet<String>,
    found: &mut bool,
) -> Result<Vec<Stmt>, PassError> {
    let mut out = Vec::new();
    for s in body {
        match s {
            Stmt::For { var, lo, hi, step, par, body: inner } if var == loop_var => {
                if *step != 1 {
                    return Err(PassError::NonUnitStep(loop_var.to_string()));
                }
                *found = true;
                let trip = (hi - lo).max(0);
                let outer_trips = (trip + factor - 1) / factor;
                let outer = fresh_name(&format!("{var}_o"), used);
                let inner_var = fresh_name(&format!("{var}_i"), used);
                // var := lo + factor*outer + inner
                let repl = AffineExpr::var(&outer)
                    .scale(factor)
                    .add(&AffineExpr::var(&inner_var))
                    .add(&AffineExpr::constant(*lo));
                let substituted = substitute_stmts(inner, var, &repl);
                let par_body = if trip % factor == 0 {
                    substituted
                } else {
                    // tail guard: factor*outer + inner < trip
                    vec![Stmt::If {
                        cond: AffineCond {
                            lhs: AffineExpr::var(&outer)
                                .scale(factor)
                                .add(&AffineExpr::var(&inner_var)),
                            op: CmpOp::Lt,
                            rhs: AffineExpr::constant(trip),
                        },
                        then: substituted,
                        els: vec![],
                    }]
                };
                out.push(Stmt::For {
                    var: outer,
                    lo: 0,
                    hi: outer_trips,
                    step: 1,
                    par: *par,
                    body: vec![Stmt::For {
                        var: inner_var,
                        lo: 0,
                        hi: factor,
                        step: 1,
                        par: true,
                        body: par_body,
                    }],
                });
            }
            Stmt::For { var, lo, hi, step, par, body: inner } => {
                out.push(Stmt::For {
                    var: var.clone(),
                    lo: *lo,
                    hi: *hi,
                    step: *step,
                    par: *par,
                    body: rewrite(inner, loop_var, factor, used, found)?,
                });
            }
            Stmt::ParArms { arms } => {
                let arms = arms
                    .iter()
                    .map(|a| rewrite(a, loop_var, factor, used, found))
                    .collect::<Result<_, _>>()?;
                out.push(Stmt::ParArms { arms });
            }
            Stmt::If { cond, then, els } => out.push(Stmt::If {
                cond: cond.clone(),
                then: rewrite(then, loop_var, factor, used, found)?,
                els: rewrite(els, loop_var, factor, used, found)?,
            }),
            other => out.push(other.clone()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{interpret, parse_dsl, Inputs, InterpOptions};

    fn images_match(a: &Function, b: &Function) {
        let x = interpret(std::slice::from_ref(a), &a.name, &Inputs::default(), InterpOptions::default()).unwrap();
        let y = interpret(std::slice::from_ref(b), &b.name, &Inputs::default(), InterpOptions::default()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn divisible_factor_makes_outer_seq_inner_par() {
        let f = parse_dsl("func k(m: int[8]) { for (int i = 0; i < 8; ++i) { m[i] = 3*i; } }")
            .unwrap()
            .remove(0);
        let g = strip_mine(&f, "i", 4).unwrap();
        let [Stmt::For { par: outer_par, hi, body, .. }] = g.body.as_slice() else {
            panic!("expected a single outer loop");
        };
        assert!(!outer_par);
        assert_eq!(*hi, 2);
        let [Stmt::For { par: inner_par, hi: inner_hi, body: inner, .. }] = body.as_slice() else {
            panic!("expected a single inner loop");
        };
        assert!(inner_par);
        assert_eq!(*inner_hi, 4);
        // divisible trip count: no tail guard
        assert!(matches!(inner.as_slice(), [Stmt::Store { .. }]));
        images_match(&f, &g);
    }

    #[test]
    fn non_divisible_factor_inserts_tail_guard() {
        let f = parse_dsl("func k(m: int[7]) { for (int i = 0; i < 7; ++i) { m[i] = i + 1; } }")
            .unwrap()
            .remove(0);
        let g = strip_mine(&f, "i", 3).unwrap();
        let [Stmt::For { hi, body, .. }] = g.body.as_slice() else { panic!() };
        assert_eq!(*hi, 3); // ceil(7/3)
        let [Stmt::For { body: inner, .. }] = body.as_slice() else { panic!() };
        assert!(matches!(inner.as_slice(), [Stmt::If { .. }]));
        images_match(&f, &g);
    }

    #[test]
    fn missing_loop_and_zero_factor_are_errors() {
        let f = parse_dsl("func k(m: int[4]) { for (int i = 0; i < 4; ++i) { m[i] = i; } }")
            .unwrap()
            .remove(0);
        assert!(matches!(strip_mine(&f, "q", 2), Err(PassError::LoopNotFound(_))));
        assert!(matches!(strip_mine(&f, "i", 0), Err(PassError::BadFactor)));
    }
}
