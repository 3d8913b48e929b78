// SPDX-License-Identifier: Apache-2.0

//! Desk-scale benchmark kernels and the banking-factor sweep.
//!
//! Three forward-pass kernels are generated as DSL source: a two-layer
//! feed-forward network (`ffnn`), a small convolutional network (`cnn`),
//! and a two-head attention block (`mha`). The sweep runs each kernel
//! through the pass pipeline at a list of banking factors, simulates the
//! lowered program, checks it against the golden-model interpreter, and
//! reports cycles plus a resource estimate per factor.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{parse_dsl, DslError, Function, Inputs};
use crate::ir::BankSpec;
use crate::passes::{PassConfig, PassError, Strategy};
use crate::pipeline::{compare_to_oracle, run_pipeline, OracleError, PipelineOutput};
use crate::resources::{estimate, ResourceReport};
use crate::sim::SimOptions;

/// Which benchmark kernel to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Ffnn,
    Cnn,
    Mha,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Model::Ffnn => "ffnn",
            Model::Cnn => "cnn",
            Model::Mha => "mha",
        };
        f.write_str(s)
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Model, String> {
        match s {
            "ffnn" => Ok(Model::Ffnn),
            "cnn" => Ok(Model::Cnn),
            "mha" => Ok(Model::Mha),
            other => Err(format!("unknown model '{other}' (expected ffnn, cnn, or mha)")),
        }
    }
}

/// A full sweep request: kernel, factors to try, and pipeline knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSpec {
    pub model: Model,
    pub factors: Vec<u64>,
    pub strategy: Strategy,
    pub seed: u64,
    #[serde(default)]
    pub restructure: bool,
    #[serde(default = "default_true")]
    pub flatten: bool,
}

fn default_true() -> bool {
    true
}

impl BenchSpec {
    pub fn new(model: Model) -> BenchSpec {
        BenchSpec {
            model,
            factors: vec![1, 2, 4],
            strategy: Strategy::Embed,
            seed: 1,
            restructure: false,
            flatten: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("kernel source failed to parse: {0}")]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Pass(#[from] PassError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("factor {factor}: {count} memory words differ from the golden model")]
    Mismatch { factor: u64, count: usize },
    #[error("cycle counts are not strictly decreasing across factors: {0:?}")]
    NonMonotone(Vec<u64>),
}

/// DSL source text for `model`, fixed desk-scale dimensions.
pub fn kernel_source(model: Model) -> &'static str {
    match model {
        Model::Ffnn => FFNN_SRC,
        Model::Cnn => CNN_SRC,
        Model::Mha => MHA_SRC,
    }
}

/// Parse the kernel for `model` into DSL functions.
pub fn generate(model: Model) -> Result<Vec<Function>, DslError> {
    parse_dsl(kernel_source(model))
}

/// Name of the entry function for `model`.
pub fn entry(model: Model) -> &'static str {
    match model {
        Model::Ffnn => "ffnn",
        Model::Cnn => "cnn",
        Model::Mha => "mha",
    }
}

// 64 -> 48 dense, ReLU, 48 -> 4 dense. The inner loops run over the output
// dimension so that concurrent arms touch distinct words; the left operand
// is hoisted into a register before the inner loop. The hidden activation
// is double-buffered (h1 accumulates, h2 holds the ReLU image) so every
// access to the banked h1 carries the par-loop variable and decomposes.
const FFNN_SRC: &str = "\
func ffnn(x: f32[64], w1: f32[64][48], h1: f32[48], h2: f32[48],
          w2: f32[48][4], y: f32[4]) {
  for (int i = 0; i < 64; ++i) {
    f32 xv = x[i];
    for (int j = 0; j < 48; ++j) {
      h1[j] = h1[j] + xv * w1[i][j];
    }
  }
  for (int r = 0; r < 48; ++r) {
    h2[r] = fmax(h1[r], 0.0);
  }
  for (int q = 0; q < 48; ++q) {
    f32 hv = h2[q];
    for (int k = 0; k < 4; ++k) {
      y[k] = y[k] + hv * w2[q][k];
    }
  }
}
";

// 16x12x3 input, four 5x5x3 kernels (valid padding, 12x8 output), ReLU,
// 2x3 max-pool down to 6x2x4, flatten, dense 48 -> 2. Parallelism is over
// the output channel; the kernel-row index is rotated by the channel
// ((a + o) % 5) so concurrent arms never read the same input word in the
// same cycle. The rotation permutes the reduction order only.
const CNN_SRC: &str = "\
func cnn(in: f32[16][12][3], k: f32[4][5][5][3], conv: f32[12][8][4],
         pool: f32[6][2][4], w: f32[48][2], y: f32[2]) {
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 8; ++c) {
      for (int o = 0; o < 4; ++o) {
        f32 acc = 0.0;
        for (int a = 0; a < 5; ++a) {
          int ar = (a + o) % 5;
          for (int b = 0; b < 5; ++b) {
            for (int ci = 0; ci < 3; ++ci) {
              acc = acc + in[r + ar][c + b][ci] * k[o][ar][b][ci];
            }
          }
        }
        conv[r][c][o] = fmax(acc, 0.0);
      }
    }
  }
  for (int p = 0; p < 6; ++p) {
    for (int q = 0; q < 2; ++q) {
      for (int o2 = 0; o2 < 4; ++o2) {
        f32 m = conv[2*p][3*q][o2];
        for (int a2 = 0; a2 < 2; ++a2) {
          for (int b2 = 0; b2 < 3; ++b2) {
            m = fmax(m, conv[2*p + a2][3*q + b2][o2]);
          }
        }
        pool[p][q][o2] = m;
      }
    }
  }
  for (int p2 = 0; p2 < 6; ++p2) {
    for (int q2 = 0; q2 < 2; ++q2) {
      for (int o3 = 0; o3 < 4; ++o3) {
        f32 pv = pool[p2][q2][o3];
        for (int t = 0; t < 2; ++t) {
          y[t] = y[t] + pv * w[8*p2 + 4*q2 + o3][t];
        }
      }
    }
  }
}
";

// Two heads over a length-8 sequence with a 42-dimensional embedding
// (21 per head): scores = QK^T with a causal mask, row softmax (table
// exponential), then the attention-weighted sum of V written into the
// per-head slice of the output. The head loop is the parallel axis; the
// score and probability scratch memories carry the head index in their
// leading dimension, so arms stay word-disjoint.
const MHA_SRC: &str = "\
func mha(q: f32[8][42], kk: f32[8][42], v: f32[8][42],
         s: f32[2][8][8], p: f32[2][8][8], o: f32[8][42]) {
  for (int h = 0; h < 2; ++h) {
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) {
        if (j <= i) {
          f32 acc = 0.0;
          for (int d = 0; d < 21; ++d) {
            acc = acc + q[i][21*h + d] * kk[j][21*h + d];
          }
          s[h][i][j] = acc;
        } else {
          s[h][i][j] = -1000000000.0;
        }
      }
      f32 m = s[h][i][0];
      for (int j2 = 0; j2 < 8; ++j2) {
        m = fmax(m, s[h][i][j2]);
      }
      f32 nm = m * -1.0;
      f32 z = 0.0;
      for (int j3 = 0; j3 < 8; ++j3) {
        f32 e = fexp(s[h][i][j3] + nm);
        p[h][i][j3] = e;
        z = z + e;
      }
      for (int j4 = 0; j4 < 8; ++j4) {
        p[h][i][j4] = p[h][i][j4] / z;
      }
      for (int d2 = 0; d2 < 21; ++d2) {
        f32 a2 = 0.0;
        for (int j5 = 0; j5 < 8; ++j5) {
          a2 = a2 + p[h][i][j5] * v[j5][21*h + d2];
        }
        o[i][21*h + d2] = a2;
      }
    }
  }
}
";

/// Pipeline configuration for `model` at banking factor `factor`.
///
/// Each model designates which loops are strip-mined and which memories
/// are banked; memories that are read sequentially (or shared at the same
/// word across arms by design) stay unbanked.
pub fn pass_config(
    model: Model,
    factor: u64,
    strategy: Strategy,
    restructure: bool,
    flatten: bool,
) -> PassConfig {
    let (strip, banks): (Vec<(&str, u64)>, Vec<BankSpec>) = match model {
        Model::Ffnn => (
            vec![("j", factor), ("r", factor), ("k", factor.min(4))],
            vec![
                BankSpec::cyclic("w1", vec![1, factor]),
                BankSpec::cyclic("h1", vec![factor]),
                BankSpec::cyclic("w2", vec![1, factor.min(4)]),
                BankSpec::cyclic("y", vec![factor.min(4)]),
            ],
        ),
        Model::Cnn => (
            vec![("o", factor), ("o2", factor), ("o3", factor)],
            vec![
                BankSpec::cyclic("k", vec![factor, 1, 1, 1]),
                BankSpec::cyclic("conv", vec![1, 1, factor]),
            ],
        ),
        Model::Mha => (
            vec![("h", factor.min(2))],
            vec![
                BankSpec::cyclic("s", vec![factor.min(2), 1, 1]),
                BankSpec::cyclic("p", vec![factor.min(2), 1, 1]),
            ],
        ),
    };
    PassConfig {
        strip_mine: strip.into_iter().map(|(v, f)| (v.to_string(), f)).collect(),
        bank_specs: banks,
        strategy,
        restructure,
        flatten,
    }
}

/// Deterministic input data for `model`.
///
/// Parameters and activations are drawn from a 64-bit LCG mapped into
/// [-1, 1); accumulator and scratch memories start at zero.
pub fn input_data(model: Model, seed: u64) -> Result<Inputs, DslError> {
    let funcs = generate(model)?;
    let f = funcs.iter().find(|f| f.name == entry(model)).expect("entry exists");
    let zeroed: &[&str] = match model {
        Model::Ffnn => &["h1", "h2", "y"],
        Model::Cnn => &["conv", "pool", "y"],
        Model::Mha => &["s", "p", "o"],
    };
    let mut rng = Lcg::new(seed);
    let mut memories = BTreeMap::new();
    for m in &f.mem_params {
        let total = m.total_size() as usize;
        let data = if zeroed.contains(&m.name.as_str()) {
            vec![0u64; total]
        } else {
            (0..total).map(|_| rng.next_f32_bits() as u64).collect()
        };
        memories.insert(m.name.clone(), data);
    }
    Ok(Inputs { scalars: BTreeMap::new(), memories })
}

/// Splitmix-style LCG used for all benchmark input data.
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Lcg {
        Lcg { state: seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.state
    }

    /// Bits of an f32 uniform in [-1, 1).
    pub fn next_f32_bits(&mut self) -> u32 {
        let x = self.next_u64() >> 40; // 24 bits
        let v = (x as f64 / (1u64 << 24) as f64) * 2.0 - 1.0;
        (v as f32).to_bits()
    }
}

/// One sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub factor: u64,
    pub cycles: u64,
    pub conflicts: usize,
    pub oracle_ok: bool,
    pub resources: ResourceReport,
}

/// Result of a full factor sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub model: Model,
    pub strategy: Strategy,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn cycles(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.cycles).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].cycles < w[0].cycles)
    }

    /// Cycle-count speedup between two swept factors, if both are present.
    pub fn speedup(&self, from: u64, to: u64) -> Option<f64> {
        let a = self.rows.iter().find(|r| r.factor == from)?.cycles;
        let b = self.rows.iter().find(|r| r.factor == to)?.cycles;
        Some(a as f64 / b as f64)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("model {} strategy {:?} seed {}\n", self.model, self.strategy, self.seed));
        out.push_str("factor      cycles  conflicts  fsm  branches  registers  oracle\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:>6}  {:>10}  {:>9}  {:>3}  {:>8}  {:>9}  {}\n",
                r.factor,
                r.cycles,
                r.conflicts,
                r.resources.fsm_states,
                r.resources.control_branches,
                r.resources.registers,
                if r.oracle_ok { "ok" } else { "MISMATCH" },
            ));
        }
        if let Some(s) = self.speedup(1, 2) {
            out.push_str(&format!("speedup 1 -> 2: {s:.2}x\n"));
        }
        if let Some(s) = self.speedup(1, 4) {
            out.push_str(&format!("speedup 1 -> 4: {s:.2}x\n"));
        }
        out
    }
}

/// Run one pipeline point for `model` and return the lowered program.
pub fn compile_point(
    model: Model,
    factor: u64,
    strategy: Strategy,
    restructure: bool,
    flatten: bool,
) -> Result<PipelineOutput, BenchError> {
    let funcs = generate(model)?;
    let cfg = pass_config(model, factor, strategy, restructure, flatten);
    Ok(run_pipeline(&funcs, entry(model), &cfg)?)
}

/// Run the full factor sweep described by `spec`.
///
/// Every point is simulated and checked against the golden-model
/// interpreter; a mismatch aborts the sweep. For the embed strategy on the
/// FFNN, the cycle counts must be strictly decreasing across factors.
pub fn sweep(spec: &BenchSpec) -> Result<SweepReport, BenchError> {
    let funcs = generate(spec.model)?;
    let inputs = input_data(spec.model, spec.seed)?;
    let mut rows = Vec::new();
    for &factor in &spec.factors {
        let cfg = pass_config(spec.model, factor, spec.strategy, spec.restructure, spec.flatten);
        let out = run_pipeline(&funcs, entry(spec.model), &cfg)?;
        let report = compare_to_oracle(
            &out.program,
            &funcs,
            entry(spec.model),
            &inputs,
            &cfg,
            &SimOptions::default(),
        )?;
        if !report.matches() {
            return Err(BenchError::Mismatch { factor, count: report.mismatches.len() });
        }
        rows.push(SweepRow {
            factor,
            cycles: report.sim.cycles,
            conflicts: report.sim.conflicts.len(),
            oracle_ok: true,
            resources: estimate(&out.program),
        });
    }
    let report = SweepReport { model: spec.model, strategy: spec.strategy, seed: spec.seed, rows };
    if spec.model == Model::Ffnn && spec.strategy == Strategy::Embed && !report.strictly_decreasing()
    {
        return Err(BenchError::NonMonotone(report.cycles()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{interpret, InterpOptions};

    #[test]
    fn kernels_parse() {
        for model in [Model::Ffnn, Model::Cnn, Model::Mha] {
            let funcs = generate(model).expect("kernel parses");
            assert!(funcs.iter().any(|f| f.name == entry(model)));
        }
    }

    #[test]
    fn kernels_interpret_cleanly() {
        for model in [Model::Ffnn, Model::Cnn, Model::Mha] {
            let funcs = generate(model).unwrap();
            let inputs = input_data(model, 7).unwrap();
            let images = interpret(&funcs, entry(model), &inputs, InterpOptions::default())
                .expect("golden model runs");
            // outputs must not be all zero: the kernel actually computed
            let out = match model {
                Model::Ffnn => "y",
                Model::Cnn => "y",
                Model::Mha => "o",
            };
            let img = &images[out];
            assert!(img.data.iter().any(|&w| w != 0), "{model}: output stayed zero");
        }
    }

    #[test]
    fn branch_banking_multiplies_memories_and_states() {
        use crate::resources::estimate;
        let r1 = estimate(&compile_point(Model::Ffnn, 1, Strategy::Branch, false, true).unwrap().program);
        let r4 = estimate(&compile_point(Model::Ffnn, 4, Strategy::Branch, false, true).unwrap().program);
        // four banked memories split into four banks each
        assert_eq!(r4.memories, r1.memories + 12);
        assert!(r4.fsm_states > 4 * r1.fsm_states);
        assert!(r4.control_branches > 10 * r1.control_branches.max(1));
    }

    #[test]
    fn input_data_is_deterministic() {
        let a = input_data(Model::Ffnn, 42).unwrap();
        let b = input_data(Model::Ffnn, 42).unwrap();
        assert_eq!(a.memories, b.memories);
        let c = input_data(Model::Ffnn, 43).unwrap();
        assert_ne!(a.memories, c.memories);
    }
}
