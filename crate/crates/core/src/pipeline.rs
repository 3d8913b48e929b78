// SPDX-License-Identifier: Apache-2.0

//! Pass pipeline orchestration: applies the configured transformations in
//! their one legal order (strip-mine, bank, unroll, fold, restructure,
//! flatten, lower), keeps per-stage dumps for inspection, and provides the
//! bank-content remapping that lets banked programs be checked against the
//! unbanked golden model.

use std::collections::BTreeMap;

use crate::frontend::{
    interpret, print_dsl, Function, Images, Inputs, InterpOptions, MemImage, MemRef,
};
use crate::ir::{print_ir, BankSpec, Program};
use crate::passes::{
    bank_branch, bank_embed, flatten_memories, fold_bank_predicates, lower_to_ir,
    restructure_nest, strip_mine, unroll_par, PassConfig, PassError, Strategy,
};
use crate::sim::{simulate, SimOptions, SimResult};

/// A named snapshot of the program after one pipeline stage.
#[derive(Debug, Clone)]
pub struct StageDump {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub program: Program,
    /// DSL right before lowering, after all source-level passes.
    pub final_dsl: Vec<Function>,
    pub dumps: Vec<StageDump>,
}

fn contains_loop(f: &Function, var: &str) -> bool {
    fn walk(body: &[crate::frontend::Stmt], var: &str) -> bool {
        use crate::frontend::Stmt;
        body.iter().any(|s| match s {
            Stmt::For { var: v, body, .. } => v == var || walk(body, var),
            Stmt::ParArms { arms } => arms.iter().any(|a| walk(a, var)),
            Stmt::If { then, els, .. } => walk(then, var) || walk(els, var),
            _ => false,
        })
    }
    walk(&f.body, var)
}

pub fn run_pipeline(
    funcs: &[Function],
    entry: &str,
    cfg: &PassConfig,
) -> Result<PipelineOutput, PassError> {
    let mut fs: Vec<Function> = funcs.to_vec();
    let mut dumps = Vec::new();
    let snap = |name: &str, fs: &[Function], dumps: &mut Vec<StageDump>| {
        let text = fs.iter().map(print_dsl).collect::<Vec<_>>().join("\n");
        dumps.push(StageDump { name: name.to_string(), text });
    };
    snap("00-input", &fs, &mut dumps);

    for (var, factor) in &cfg.strip_mine {
        let Some(i) = fs.iter().position(|f| contains_loop(f, var)) else {
            return Err(PassError::LoopNotFound(var.clone()));
        };
        fs[i] = strip_mine(&fs[i], var, *factor)?;
    }
    snap("01-strip-mine", &fs, &mut dumps);

    for spec in &cfg.bank_specs {
        let holders: Vec<usize> = (0..fs.len())
            .filter(|&i| fs[i].mem(&spec.memory).is_some())
            .collect();
        if holders.is_empty() {
            return Err(PassError::MemoryNotFound(spec.memory.clone()));
        }
        if holders.len() > 1 {
            return Err(PassError::BadBankSpec {
                mem: spec.memory.clone(),
                message: "memory shared across functions cannot be banked".into(),
            });
        }
        let i = holders[0];
        fs[i] = match cfg.strategy {
            Strategy::Branch => bank_branch(&fs[i], spec)?,
            Strategy::Embed => bank_embed(&fs[i], spec)?,
        };
    }
    snap("02-bank", &fs, &mut dumps);

    fs = fs.iter().map(unroll_par).collect();
    snap("03-unroll", &fs, &mut dumps);

    fs = fs.iter().map(fold_bank_predicates).collect();
    snap("04-fold", &fs, &mut dumps);

    if cfg.restructure {
        fs = restructure_nest(&fs, entry)?;
        snap("05-restructure", &fs, &mut dumps);
    }

    if cfg.flatten {
        fs = fs.iter().map(flatten_memories).collect();
        snap("06-flatten", &fs, &mut dumps);
    }

    let program = lower_to_ir(&fs, entry)?;
    dumps.push(StageDump { name: "07-lowered".into(), text: print_ir(&program) });

    Ok(PipelineOutput { program, final_dsl: fs, dumps })
}

// ---------------------------------------------------------------------
// Bank-content remapping
// ---------------------------------------------------------------------

fn row_major(coords: &[u64], extents: &[u64]) -> u64 {
    coords.iter().zip(extents).fold(0, |acc, (c, e)| acc * e + c)
}

fn multi_indices(extents: &[u64]) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for e in extents {
        let mut next = Vec::new();
        for prefix in &out {
            for v in 0..*e {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Where an element of the original memory lands after banking:
/// (target memory name, flat offset within it).
fn mapped_slot(
    mem: &MemRef,
    spec: &BankSpec,
    strategy: Strategy,
    idx: &[u64],
) -> (String, u64) {
    let factors = &spec.factors;
    let coords: Vec<u64> = idx.iter().zip(factors).map(|(i, c)| i % c).collect();
    let offs: Vec<u64> = idx.iter().zip(factors).map(|(i, c)| i / c).collect();
    let bank_extents: Vec<u64> =
        mem.extents.iter().zip(factors).map(|(e, c)| e.div_ceil(*c)).collect();
    match strategy {
        Strategy::Branch => {
            let k = row_major(&coords, factors);
            (format!("{}_bank_{}", mem.name, k), row_major(&offs, &bank_extents))
        }
        Strategy::Embed => {
            let part: Vec<usize> = (0..factors.len()).filter(|d| factors[*d] > 1).collect();
            if part.is_empty() {
                return (mem.name.clone(), row_major(idx, &mem.extents));
            }
            let mut new_coords: Vec<u64> = part.iter().map(|d| coords[*d]).collect();
            let mut new_extents: Vec<u64> = part.iter().map(|d| factors[*d]).collect();
            new_coords.extend(offs);
            new_extents.extend(bank_extents);
            (mem.name.clone(), row_major(&new_coords, &new_extents))
        }
    }
}

fn banked_len(mem: &MemRef, spec: &BankSpec) -> u64 {
    mem.extents.iter().zip(&spec.factors).map(|(e, c)| e.div_ceil(*c)).product()
}

/// Remap flat original-layout data into the post-banking memory layout(s).
fn remap_memory(
    mem: &MemRef,
    spec: Option<&BankSpec>,
    strategy: Strategy,
    data: &[u64],
) -> BTreeMap<String, Vec<u64>> {
    let mut out = BTreeMap::new();
    let Some(spec) = spec else {
        out.insert(mem.name.clone(), data.to_vec());
        return out;
    };
    match strategy {
        Strategy::Branch => {
            let per_bank = banked_len(mem, spec);
            for k in 0..spec.bank_count() {
                out.insert(format!("{}_bank_{}", mem.name, k), vec![0; per_bank as usize]);
            }
        }
        Strategy::Embed => {
            let part_product: u64 =
                spec.factors.iter().filter(|c| **c > 1).product();
            let len = banked_len(mem, spec) * part_product;
            out.insert(mem.name.clone(), vec![0; len as usize]);
        }
    }
    for idx in multi_indices(&mem.extents) {
        let flat = row_major(&idx, &mem.extents) as usize;
        let (name, slot) = mapped_slot(mem, spec, strategy, &idx);
        out.get_mut(&name).expect("remap target exists")[slot as usize] = data[flat];
    }
    out
}

/// Translate original-layout inputs into the layout the transformed program
/// expects.
pub fn banked_inputs(entry_fn: &Function, cfg: &PassConfig, inputs: &Inputs) -> Inputs {
    let mut out = Inputs { scalars: inputs.scalars.clone(), memories: BTreeMap::new() };
    for m in &entry_fn.mem_params {
        let len: usize = m.extents.iter().product::<u64>() as usize;
        let zero = vec![0u64; len];
        let data = inputs.memories.get(&m.name).unwrap_or(&zero);
        let spec = cfg.bank_specs.iter().find(|s| s.memory == m.name);
        out.memories.extend(remap_memory(m, spec, cfg.strategy, data));
    }
    out
}

/// Expected post-run images of the transformed program, derived from the
/// golden-model images of the original one.
pub fn remap_images(entry_fn: &Function, cfg: &PassConfig, images: &Images) -> BTreeMap<String, Vec<u64>> {
    let mut out = BTreeMap::new();
    for m in &entry_fn.mem_params {
        let img: &MemImage = &images[&m.name];
        let spec = cfg.bank_specs.iter().find(|s| s.memory == m.name);
        out.extend(remap_memory(m, spec, cfg.strategy, &img.data));
    }
    out
}

// ---------------------------------------------------------------------
// Oracle comparison
// ---------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct Mismatch {
    pub memory: String,
    pub addr: u64,
    pub expected: u64,
    pub got: u64,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub sim: SimResult,
    pub mismatches: Vec<Mismatch>,
}

impl OracleReport {
    pub fn matches(&self) -> bool {
        self.mismatches.is_empty()
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum OracleError {
    #[error("{0}")]
    Interp(#[from] crate::frontend::InterpError),
    #[error("{0}")]
    Sim(#[from] crate::sim::SimError),
}

/// Simulate `p` (produced from `funcs` via `cfg`) and compare its final
/// memory images against the golden-model run of the original functions.
pub fn compare_to_oracle(
    p: &Program,
    funcs: &[Function],
    entry: &str,
    inputs: &Inputs,
    cfg: &PassConfig,
    opts: &SimOptions,
) -> Result<OracleReport, OracleError> {
    let entry_fn = funcs
        .iter()
        .find(|f| f.name == entry)
        .ok_or_else(|| crate::frontend::InterpError::UnknownFunction(entry.to_string()))?;
    let oracle = interpret(funcs, entry, inputs, InterpOptions::default())?;
    let expected = remap_images(entry_fn, cfg, &oracle);

    let sim_inputs = banked_inputs(entry_fn, cfg, inputs);
    let sim = simulate(p, &sim_inputs, opts)?;

    let mut mismatches = Vec::new();
    for (name, want) in &expected {
        let got = sim.memories.get(name);
        for (addr, w) in want.iter().enumerate() {
            let g = got.and_then(|v| v.get(addr)).copied().unwrap_or(0);
            if g != *w {
                mismatches.push(Mismatch {
                    memory: name.clone(),
                    addr: addr as u64,
                    expected: *w,
                    got: g,
                });
            }
        }
    }
    Ok(OracleReport { sim, mismatches })
}

/// Build a [`PassConfig`] from the `//!` directive header of a fixture.
///
/// Fixtures declare which loops are strip-mined and which memories are
/// banked, with `*` standing for the sweep factor supplied at run time:
///
/// ```text
/// //! strip j *
/// //! bank w1 1 *
/// ```
///
/// Directives are ordinary line comments to the DSL parser, so the same
/// file carries both the kernel and its banking recipe.
pub fn fixture_config(
    src: &str,
    factor: u64,
    strategy: Strategy,
    restructure: bool,
    flatten: bool,
) -> Result<PassConfig, String> {
    let mut cfg = PassConfig {
        strip_mine: Vec::new(),
        bank_specs: Vec::new(),
        strategy,
        restructure,
        flatten,
    };
    let tok = |t: &str| -> Result<u64, String> {
        if t == "*" {
            Ok(factor)
        } else {
            t.parse::<u64>().map_err(|_| format!("bad factor token '{t}' in fixture directive"))
        }
    };
    for line in src.lines() {
        let Some(rest) = line.trim().strip_prefix("//!") else { continue };
        let words: Vec<&str> = rest.split_whitespace().collect();
        match words.as_slice() {
            ["strip", var, f] => cfg.strip_mine.push((var.to_string(), tok(f)?)),
            ["bank", mem, fs @ ..] if !fs.is_empty() => {
                let factors = fs.iter().map(|f| tok(f)).collect::<Result<Vec<_>, _>>()?;
                cfg.bank_specs.push(BankSpec::cyclic(*mem, factors));
            }
            ["entry", _] | ["factors", ..] => {}
            other => return Err(format!("unrecognized fixture directive '//!{}'", other.join(" "))),
        }
    }
    Ok(cfg)
}

/// The `//! entry <name>` directive of a fixture, if present.
pub fn fixture_entry(src: &str) -> Option<String> {
    for line in src.lines() {
        if let Some(rest) = line.trim().strip_prefix("//!") {
            let words: Vec<&str> = rest.split_whitespace().collect();
            if let ["entry", name] = words.as_slice() {
                return Some(name.to_string());
            }
        }
    }
    None
}

/// The `//! factors <f>...` directive of a fixture: the banking factors the
/// fixture's recipe supports (None means any).
pub fn fixture_factors(src: &str) -> Option<Vec<u64>> {
    for line in src.lines() {
        if let Some(rest) = line.trim().strip_prefix("//!") {
            let words: Vec<&str> = rest.split_whitespace().collect();
            if let ["factors", fs @ ..] = words.as_slice() {
                return fs.iter().map(|f| f.parse::<u64>().ok()).collect();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::passes::synth_inputs;
    use crate::sim::SimOptions;

    const SRC: &str = "//! entry fill\n\
                       //! factors 1 2 4\n\
                       //! strip i *\n\
                       //! bank m *\n\
                       func fill(m: int[8]) {\n\
                       for (int i = 0; i < 8; ++i) { m[i] = 3*i; }\n\
                       }";

    #[test]
    fn directives_parse_with_factor_substitution() {
        assert_eq!(fixture_entry(SRC).as_deref(), Some("fill"));
        assert_eq!(fixture_factors(SRC), Some(vec![1, 2, 4]));
        let cfg = fixture_config(SRC, 4, Strategy::Embed, false, true).unwrap();
        assert_eq!(cfg.strip_mine, [("i".to_string(), 4)]);
        assert_eq!(cfg.bank_specs, [BankSpec::cyclic("m", vec![4])]);
        assert!(fixture_config("//! frobnicate\n", 1, Strategy::Embed, false, true).is_err());
    }

    #[test]
    fn banked_pipeline_agrees_with_golden_model() {
        let funcs = crate::frontend::parse_dsl(SRC).unwrap();
        let inputs = synth_inputs(&funcs[0]);
        for strategy in [Strategy::Branch, Strategy::Embed] {
            let cfg = fixture_config(SRC, 2, strategy, false, true).unwrap();
            let out = run_pipeline(&funcs, "fill", &cfg).unwrap();
            let rep = compare_to_oracle(&out.program, &funcs, "fill", &inputs, &cfg, &SimOptions::default())
                .unwrap();
            assert!(rep.matches(), "{strategy:?}: {:?}", rep.mismatches);
        }
    }

    #[test]
    fn stage_dumps_cover_the_whole_pipeline() {
        let funcs = crate::frontend::parse_dsl(SRC).unwrap();
        let cfg = fixture_config(SRC, 2, Strategy::Embed, true, true).unwrap();
        let out = run_pipeline(&funcs, "fill", &cfg).unwrap();
        let names: Vec<&str> = out.dumps.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "00-input",
                "01-strip-mine",
                "02-bank",
                "03-unroll",
                "04-fold",
                "05-restructure",
                "06-flatten",
                "07-lowered"
            ]
        );
    }
}
