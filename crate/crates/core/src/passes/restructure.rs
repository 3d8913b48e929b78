// SPDX-License-Identifier: Apache-2.0

//! Par/seq nest restructuring. A `par` loop whose body is a single `seq`
//! loop gives every parallel arm its own private sequential controller; the
//! interchanged form `seq { par }` shares one loop controller across all
//! arms and needs strictly fewer FSM states. The rewrite is only legal when
//! the arms are race-free, which we establish by replaying every arm
//! ordering in the golden-model interpreter at the (small) actual trip
//! counts, on pseudo-random inputs.

use crate::frontend::{
    interpret, ElemType, Function, Inputs, InterpError, InterpOptions, Stmt, Value,
};

use super::PassError;

/// Interchange `par for j { seq for i { B } }` into `seq for i { par for j
/// { B } }` wherever the pattern occurs. Also accepts the post-unroll shape
/// where the outer par is already an explicit arm list whose arms are copies
/// of the same sequential loop. Single-iteration par loops just lose the
/// `par` marker.
pub fn restructure_nest(funcs: &[Function], entry: &str) -> Result<Vec<Function>, PassError> {
    let f = funcs
        .iter()
        .find(|f| f.name == entry)
        .ok_or_else(|| PassError::Lower(format!("unknown function '{entry}'")))?;

    let rewritten = Function { body: rewrite_block(&f.body), ..f.clone() };
    let out: Vec<Function> = funcs
        .iter()
        .map(|g| if g.name == entry { rewritten.clone() } else { g.clone() })
        .collect();

    // Legality + oracle check: the original program must be race-free and
    // the interchange must not change the final images.
    let inputs = synth_inputs(f);
    let race_opts = InterpOptions { check_races: true };
    let before = match interpret(funcs, entry, &inputs, race_opts.clone()) {
        Err(InterpError::DataRace) => {
            return Err(PassError::RaceDetected(String::new()));
        }
        other => other?,
    };
    let after = match interpret(&out, entry, &inputs, race_opts) {
        Err(InterpError::DataRace) => {
            return Err(PassError::RaceDetected(" in restructured nest".into()));
        }
        other => other?,
    };
    if before != after {
        return Err(PassError::Lower(
            "restructured nest disagrees with the original program".into(),
        ));
    }
    Ok(out)
}

fn rewrite_block(body: &[Stmt]) -> Vec<Stmt> {
    body.iter().map(rewrite_stmt).collect()
}

fn rewrite_stmt(s: &Stmt) -> Stmt {
    match s {
        Stmt::For { var, lo, hi, step, par, body } => {
            let body = rewrite_block(body);
            let trip = if *step > 0 { (hi - lo + step - 1) / step } else { 0 };
            if *par && trip <= 1 {
                // One arm: nothing runs in parallel with anything.
                return Stmt::For {
                    var: var.clone(),
                    lo: *lo,
                    hi: *hi,
                    step: *step,
                    par: false,
                    body,
                };
            }
            if *par {
                if let [Stmt::For {
                    var: iv,
                    lo: ilo,
                    hi: ihi,
                    step: istep,
                    par: false,
                    body: inner,
                }] = body.as_slice()
                {
                    // Interchange: the inner bounds are compile-time
                    // constants, so they cannot depend on the par variable.
                    return Stmt::For {
                        var: iv.clone(),
                        lo: *ilo,
                        hi: *ihi,
                        step: *istep,
                        par: false,
                        body: vec![Stmt::For {
                            var: var.clone(),
                            lo: *lo,
                            hi: *hi,
                            step: *step,
                            par: true,
                            body: inner.clone(),
                        }],
                    };
                }
            }
            Stmt::For { var: var.clone(), lo: *lo, hi: *hi, step: *step, par: *par, body }
        }
        Stmt::ParArms { arms } => {
            let arms: Vec<Vec<Stmt>> = arms.iter().map(|a| rewrite_block(a)).collect();
            // Post-unroll shape: every arm is a sequential loop with the same
            // bounds (unrolling privatizes the loop variable per arm, so the
            // names differ). Canonicalize the names and hoist the shared loop
            // out of the par block.
            if arms.len() >= 2 {
                let mut heads = arms.iter().map(|a| match a.as_slice() {
                    [Stmt::For { var, lo, hi, step, par: false, body }] => {
                        Some((var, *lo, *hi, *step, body))
                    }
                    _ => None,
                });
                if let Some(Some(first)) = heads.next() {
                    let (var, lo, hi, step, _) = first;
                    if heads.all(|h| {
                        h.is_some_and(|(_, l, u, s, _)| l == lo && u == hi && s == step)
                    }) {
                        let inner_arms: Vec<Vec<Stmt>> = arms
                            .iter()
                            .map(|a| match a.as_slice() {
                                [Stmt::For { var: v, body, .. }] => {
                                    let mut body = body.clone();
                                    if v != var {
                                        super::unroll::rename_var(&mut body, v, var);
                                    }
                                    body
                                }
                                _ => unreachable!(),
                            })
                            .collect();
                        return Stmt::For {
                            var: var.clone(),
                            lo,
                            hi,
                            step,
                            par: false,
                            body: vec![Stmt::ParArms { arms: inner_arms }],
                        };
                    }
                }
            }
            Stmt::ParArms { arms }
        }
        Stmt::If { cond, then, els } => Stmt::If {
            cond: cond.clone(),
            then: rewrite_block(then),
            els: rewrite_block(els),
        },
        other => other.clone(),
    }
}

/// Deterministic synthetic inputs for a function: small ints and f32 values
/// in [-1, 1) from a fixed-seed LCG. Used for transformation legality checks
/// and corpus testing.
pub fn synth_inputs(f: &Function) -> Inputs {
    let mut state: u64 = 0x5eed_1234_abcd_0001;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        state
    };
    let mut inputs = Inputs::default();
    for (name, ty) in &f.scalar_params {
        let v = match ty {
            ElemType::Int32 => Value::I((next() >> 33) as i64 % 7),
            ElemType::F32 => Value::F(rand_f32(next())),
        };
        inputs.scalars.insert(name.clone(), v);
    }
    for m in &f.mem_params {
        let len: usize = m.extents.iter().product::<u64>() as usize;
        let data: Vec<u64> = (0..len)
            .map(|_| match m.elem {
                ElemType::Int32 => ((next() >> 33) % 17) as u64,
                ElemType::F32 => rand_f32(next()).0 as u64,
            })
            .collect();
        inputs.memories.insert(m.name.clone(), data);
    }
    inputs
}

/// Map 64 random bits onto an f32 in [-1, 1).
fn rand_f32(x: u64) -> crate::floatlib::F32Bits {
    let unit = (x >> 40) as f32 / (1u64 << 24) as f32; // [0, 1)
    crate::floatlib::F32Bits((unit * 2.0 - 1.0).to_bits())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_dsl;
    use crate::passes::unroll_par;

    #[test]
    fn par_around_seq_interchanges() {
        let src = "func k(m: int[2][4]) {\n\
                   par for (int h = 0; h < 2; ++h) {\n\
                   for (int t = 0; t < 4; ++t) {\n\
                   m[h][t] = 2*t + h;\n\
                   } } }";
        let f = parse_dsl(src).unwrap().remove(0);
        let out = restructure_nest(&[f], "k").unwrap();
        let [Stmt::For { par: false, body, .. }] = out[0].body.as_slice() else {
            panic!("expected an outer sequential loop, got {:?}", out[0].body);
        };
        assert!(matches!(body.as_slice(), [Stmt::For { par: true, .. }]));
    }

    #[test]
    fn post_unroll_arms_hoist_a_shared_loop() {
        let src = "func k(m: int[2][4]) {\n\
                   par for (int h = 0; h < 2; ++h) {\n\
                   for (int t = 0; t < 4; ++t) {\n\
                   m[h][t] = 2*t + h;\n\
                   } } }";
        let f = parse_dsl(src).unwrap().remove(0);
        // unrolling privatizes each arm's loop variable; the hoist must
        // still recognize the arms as copies of one loop
        let unrolled = unroll_par(&f);
        let out = restructure_nest(&[unrolled], "k").unwrap();
        let [Stmt::For { par: false, body, .. }] = out[0].body.as_slice() else {
            panic!("expected a hoisted sequential loop, got {:?}", out[0].body);
        };
        let [Stmt::ParArms { arms }] = body.as_slice() else { panic!("expected inner arms") };
        assert_eq!(arms.len(), 2);
    }

    #[test]
    fn racy_nest_is_refused() {
        let src = "func k(m: int[4]) {\n\
                   par for (int h = 0; h < 2; ++h) {\n\
                   for (int t = 0; t < 4; ++t) {\n\
                   m[t] = h;\n\
                   } } }";
        let f = parse_dsl(src).unwrap().remove(0);
        assert!(matches!(restructure_nest(&[f], "k"), Err(PassError::RaceDetected(_))));
    }
}
