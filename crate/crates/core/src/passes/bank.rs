// SPDX-License-Identifier: Apache-2.0

//! The two cyclic banking strategies.
//!
//! `bank_branch` splits a memory into physical banks and selects the bank
//! per access with an if/else chain on `index mod factor` for each
//! partitioned dimension. Naive but always applicable; the chain costs
//! factor^dims control branches per access site.
//!
//! `bank_embed` raises the memory's dimensionality instead: one leading bank
//! dimension per partitioned dimension, with the bank coordinate baked into
//! the access. Requires every access index to decompose as
//! `factor*q + r` with `r` a constant or a par-loop variable ranging inside
//! the factor; errors out otherwise rather than degrading silently.

use std::collections::BTreeMap;

use crate::floatlib::CmpOp;
use crate::frontend::{AffineCond, AffineExpr, Atom, Function, MemRef, Stmt};
use crate::ir::{BankScheme, BankSpec};

use super::PassError;

fn check_spec(f: &Function, spec: &BankSpec) -> Result<MemRef, PassError> {
    if spec.scheme != BankScheme::Cyclic {
        return Err(PassError::NonCyclicScheme);
    }
    let mem = f
        .mem(&spec.memory)
        .ok_or_else(|| PassError::MemoryNotFound(spec.memory.clone()))?
        .clone();
    if spec.factors.len() != mem.extents.len() {
        return Err(PassError::BadBankSpec {
            mem: spec.memory.clone(),
            message: format!(
                "{} factors given for a {}-dimensional memory",
                spec.factors.len(),
                mem.extents.len()
            ),
        });
    }
    for (c, e) in spec.factors.iter().zip(&mem.extents) {
        if *c == 0 {
            return Err(PassError::BadBankSpec {
                mem: spec.memory.clone(),
                message: "factor must be >= 1".into(),
            });
        }
        if c > e {
            return Err(PassError::BadBankSpec {
                mem: spec.memory.clone(),
                message: format!("factor {c} exceeds extent {e}"),
            });
        }
    }
    Ok(mem)
}

fn bank_extents(mem: &MemRef, spec: &BankSpec) -> Vec<u64> {
    mem.extents
        .iter()
        .zip(&spec.factors)
        .map(|(e, c)| e.div_ceil(*c))
        .collect()
}

/// Row-major linearization of per-dimension bank coordinates.
pub(crate) fn bank_index(coords: &[u64], factors: &[u64]) -> u64 {
    let mut k = 0;
    for (r, c) in coords.iter().zip(factors) {
        k = k * c + r;
    }
    k
}

pub fn bank_branch(f: &Function, spec: &BankSpec) -> Result<Function, PassError> {
    let mem = check_spec(f, spec)?;
    let extents = bank_extents(&mem, spec);
    let nbanks = spec.bank_count();

    let mut mem_params = Vec::new();
    for m in &f.mem_params {
        if m.name == spec.memory {
            for k in 0..nbanks {
                mem_params.push(MemRef {
                    name: format!("{}_bank_{}", m.name, k),
                    elem: m.elem,
                    extents: extents.clone(),
                });
            }
        } else {
            mem_params.push(m.clone());
        }
    }

    let body = crate::frontend::map_stmts(&f.body, &mut |s| match s {
        Stmt::Load { ref dest, ref mem, ref idx } if *mem == spec.memory => {
            vec![branch_chain(spec, idx, 0, &mut Vec::new(), &|coords, off| Stmt::Load {
                dest: dest.clone(),
                mem: format!("{}_bank_{}", spec.memory, bank_index(coords, &spec.factors)),
                idx: off.to_vec(),
            })]
        }
        Stmt::Store { ref mem, ref idx, ref value } if *mem == spec.memory => {
            vec![branch_chain(spec, idx, 0, &mut Vec::new(), &|coords, off| Stmt::Store {
                mem: format!("{}_bank_{}", spec.memory, bank_index(coords, &spec.factors)),
                idx: off.to_vec(),
                value: value.clone(),
            })]
        }
        other => vec![other],
    });

    Ok(Function { mem_params, body, ..f.clone() })
}

/// Nested if/else chain over the partitioned dimensions; `make` builds the
/// leaf access for a concrete bank-coordinate vector.
fn branch_chain(
    spec: &BankSpec,
    idx: &[AffineExpr],
    dim: usize,
    coords: &mut Vec<u64>,
    make: &dyn Fn(&[u64], &[AffineExpr]) -> Stmt,
) -> Stmt {
    if dim == idx.len() {
        let offsets: Vec<AffineExpr> = idx
            .iter()
            .zip(&spec.factors)
            .map(|(e, c)| if *c == 1 { e.simplify() } else { e.floor_div(*c as i64) })
            .collect();
        return make(coords, &offsets);
    }
    let c = spec.factors[dim];
    if c == 1 {
        coords.push(0);
        let s = branch_chain(spec, idx, dim + 1, coords, make);
        coords.pop();
        return s;
    }
    // if (idx % c == 0) {..} else if (idx % c == 1) {..} else {..}
    let mut arms: Vec<Stmt> = Vec::new();
    for r in 0..c {
        coords.push(r);
        arms.push(branch_chain(spec, idx, dim + 1, coords, make));
        coords.pop();
    }
    let mut chain = arms.pop().unwrap();
    for r in (0..c - 1).rev() {
        chain = Stmt::If {
            cond: AffineCond {
                lhs: idx[dim].modulo(c as i64),
                op: CmpOp::Eq,
                rhs: AffineExpr::constant(r as i64),
            },
            then: vec![arms.pop().unwrap()],
            els: vec![chain],
        };
    }
    chain
}

pub fn bank_embed(f: &Function, spec: &BankSpec) -> Result<Function, PassError> {
    let mem = check_spec(f, spec)?;
    let offsets = bank_extents(&mem, spec);
    let part_dims: Vec<usize> =
        (0..spec.factors.len()).filter(|d| spec.factors[*d] > 1).collect();
    if part_dims.is_empty() {
        return Ok(f.clone()); // all factors are 1: layout unchanged
    }

    let mut new_extents: Vec<u64> = part_dims.iter().map(|d| spec.factors[*d]).collect();
    new_extents.extend(offsets.iter().copied());

    let mem_params: Vec<MemRef> = f
        .mem_params
        .iter()
        .map(|m| {
            if m.name == spec.memory {
                MemRef { name: m.name.clone(), elem: m.elem, extents: new_extents.clone() }
            } else {
                m.clone()
            }
        })
        .collect();

    let body = rewrite_embed(&f.body, spec, &part_dims, &mut BTreeMap::new())?;
    Ok(Function { mem_params, body, ..f.clone() })
}

/// Decompose one index as `factor*q + r`; r must be a constant in range or a
/// par-loop variable with coefficient 1 ranging inside the factor.
fn decompose(
    e: &AffineExpr,
    factor: u64,
    par_ranges: &BTreeMap<String, (i64, i64)>,
) -> Option<(AffineExpr, AffineExpr)> {
    let c = factor as i64;
    let (quot, rem) = e.simplify().split_divisible(c);
    if let Some(r) = rem.as_const() {
        if (0..c).contains(&r) {
            return Some((rem, quot));
        }
        return None;
    }
    if rem.constant == 0 && rem.terms.len() == 1 && rem.terms[0].0 == 1 {
        if let Atom::Var(v) = &rem.terms[0].1 {
            if let Some((lo, hi)) = par_ranges.get(v) {
                if *lo >= 0 && *hi <= c {
                    return Some((rem.clone(), quot));
                }
            }
        }
    }
    None
}

fn rewrite_embed(
    body: &[Stmt],
    spec: &BankSpec,
    part_dims: &[usize],
    par_ranges: &mut BTreeMap<String, (i64, i64)>,
) -> Result<Vec<Stmt>, PassError> {
    let rewrite_idx = |idx: &[AffineExpr],
                       par_ranges: &BTreeMap<String, (i64, i64)>|
     -> Result<Vec<AffineExpr>, PassError> {
        let mut bank_coords = Vec::new();
        let mut offsets: Vec<AffineExpr> = Vec::new();
        for (d, e) in idx.iter().enumerate() {
            if part_dims.contains(&d) {
                let factor = spec.factors[d];
                let (r, q) = decompose(e, factor, par_ranges).ok_or_else(|| {
                    PassError::NotDecomposable {
                        mem: spec.memory.clone(),
                        index: format!("[{}]", e),
                        dim: d,
                        factor,
                    }
                })?;
                bank_coords.push(r);
                offsets.push(q);
            } else {
                offsets.push(e.simplify());
            }
        }
        bank_coords.extend(offsets);
        Ok(bank_coords)
    };

    let mut out = Vec::new();
    for s in body {
        match s {
            Stmt::For { var, lo, hi, step, par, body: inner } => {
                if *par {
                    par_ranges.insert(var.clone(), (*lo, *hi));
                }
                let inner = rewrite_embed(inner, spec, part_dims, par_ranges)?;
                par_ranges.remove(var);
                out.push(Stmt::For {
                    var: var.clone(),
                    lo: *lo,
                    hi: *hi,
                    step: *step,
                    par: *par,
                    body: inner,
                });
            }
            Stmt::ParArms { arms } => {
                let arms = arms
                    .iter()
                    .map(|a| rewrite_embed(a, spec, part_dims, par_ranges))
                    .collect::<Result<_, _>>()?;
                out.push(Stmt::ParArms { arms });
            }
            Stmt::If { cond, then, els } => out.push(Stmt::If {
                cond: cond.clone(),
                then: rewrite_embed(then, spec, part_dims, par_ranges)?,
                els: rewrite_embed(els, spec, part_dims, par_ranges)?,
            }),
            Stmt::Load { dest, mem, idx } if *mem == spec.memory => out.push(Stmt::Load {
                dest: dest.clone(),
                mem: mem.clone(),
                idx: rewrite_idx(idx, par_ranges)?,
            }),
            Stmt::Store { mem, idx, value } if *mem == spec.memory => out.push(Stmt::Store {
                mem: mem.clone(),
                idx: rewrite_idx(idx, par_ranges)?,
                value: value.clone(),
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

    #[test]
    fn branch_splits_memory_and_routes_by_residue() {
        let f = parse_dsl("func k(m: int[4]) { for (int i = 0; i < 4; ++i) { m[i] = i; } }")
            .unwrap()
            .remove(0);
        let g = bank_branch(&f, &BankSpec::cyclic("m", vec![2])).unwrap();
        let names: Vec<&str> = g.mem_params.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["m_bank_0", "m_bank_1"]);
        assert!(g.mem_params.iter().all(|m| m.extents == [2]));
        let imgs = interpret(std::slice::from_ref(&g), "k", &Inputs::default(), InterpOptions::default())
            .unwrap();
        assert_eq!(imgs["m_bank_0"].data, [0, 2]);
        assert_eq!(imgs["m_bank_1"].data, [1, 3]);
    }

    #[test]
    fn embed_adds_leading_bank_dimensions() {
        let src = "func k(m: int[4][6]) {\n\
                   for (int a = 0; a < 2; ++a) {\n\
                   par for (int p = 0; p < 2; ++p) {\n\
                   for (int b = 0; b < 3; ++b) {\n\
                   par for (int q = 0; q < 2; ++q) {\n\
                   m[2*a + p][2*b + q] = a + b;\n\
                   } } } } }";
        let f = parse_dsl(src).unwrap().remove(0);
        let g = bank_embed(&f, &BankSpec::cyclic("m", vec![2, 2])).unwrap();
        // one leading bank dimension per partitioned dimension, then offsets
        assert_eq!(g.mem("m").unwrap().extents, [2, 2, 2, 3]);
    }

    #[test]
    fn embed_rejects_sequential_index() {
        let f = parse_dsl("func k(m: int[4]) { for (int i = 0; i < 4; ++i) { m[i] = i; } }")
            .unwrap()
            .remove(0);
        assert!(matches!(
            bank_embed(&f, &BankSpec::cyclic("m", vec![2])),
            Err(PassError::NotDecomposable { .. })
        ));
    }

    #[test]
    fn spec_shape_errors() {
        let f = parse_dsl("func k(m: int[4]) { for (int i = 0; i < 4; ++i) { m[i] = i; } }")
            .unwrap()
            .remove(0);
        assert!(matches!(
            bank_branch(&f, &BankSpec::cyclic("m", vec![8])),
            Err(PassError::BadBankSpec { .. })
        ));
        assert!(matches!(
            bank_branch(&f, &BankSpec::cyclic("m", vec![2, 2])),
            Err(PassError::BadBankSpec { .. })
        ));
        assert!(matches!(
            bank_branch(&f, &BankSpec::cyclic("nope", vec![2])),
            Err(PassError::MemoryNotFound(_))
        ));
    }
}
