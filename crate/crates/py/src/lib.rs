// SPDX-License-Identifier: Apache-2.0

//! Python bindings for the minihls compiler and simulator.
//!
//! Programs cross the boundary as text (DSL or hardware IR) and structured
//! results cross as JSON strings, which keeps the interface small and the
//! word-level bit-exactness intact. See `python/smoke.py` at the repository
//! root for a usage example.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use minihls::frontend::{interpret, parse_dsl, InterpOptions, Inputs};
use minihls::ir::{parse_ir, print_ir, validate};
use minihls::passes::Strategy;
use minihls::pipeline::{compare_to_oracle, fixture_config, fixture_entry, run_pipeline};
use minihls::resources::{count_branches, count_fsm_states, estimate};
use minihls::sim::{simulate, SimOptions};

fn strategy_of(s: &str) -> PyResult<Strategy> {
    match s {
        "branch" => Ok(Strategy::Branch),
        "embed" => Ok(Strategy::Embed),
        other => Err(PyValueError::new_err(format!("unknown strategy '{other}'"))),
    }
}

fn val_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn inputs_from_json(text: &str) -> PyResult<Inputs> {
    #[derive(serde::Deserialize)]
    struct Raw {
        #[serde(default)]
        scalars: std::collections::BTreeMap<String, i64>,
        #[serde(default)]
        memories: std::collections::BTreeMap<String, Vec<u64>>,
    }
    let raw: Raw = serde_json::from_str(text).map_err(val_err)?;
    let mut inputs = Inputs::default();
    for (k, v) in raw.scalars {
        inputs.scalars.insert(k, minihls::frontend::Value::I(v));
    }
    inputs.memories = raw.memories;
    Ok(inputs)
}

/// A lowered hardware program.
#[pyclass]
struct Program {
    inner: minihls::ir::Program,
}

#[pymethods]
impl Program {
    /// Parse a program from its text form.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Program> {
        Ok(Program { inner: parse_ir(text).map_err(val_err)? })
    }

    /// The canonical text form (parse(print(p)) == p).
    fn print(&self) -> String {
        print_ir(&self.inner)
    }

    /// Well-formedness diagnostics; empty means valid.
    fn validate(&self) -> Vec<String> {
        validate(&self.inner).iter().map(|d| d.to_string()).collect()
    }

    /// Resource estimate as a JSON string.
    fn resources(&self) -> String {
        serde_json::to_string_pretty(&estimate(&self.inner)).expect("serializable")
    }

    fn fsm_states(&self) -> u64 {
        count_fsm_states(&self.inner)
    }

    fn branches(&self) -> u64 {
        count_branches(&self.inner)
    }

    /// Simulate with JSON inputs `{"scalars": {...}, "memories": {name: [words]}}`;
    /// returns `{"cycles", "conflicts", "memories"}` as a JSON string.
    #[pyo3(signature = (inputs_json="{}", trace=false, cycle_budget=0))]
    fn simulate(&self, inputs_json: &str, trace: bool, cycle_budget: u64) -> PyResult<String> {
        let inputs = inputs_from_json(inputs_json)?;
        let opts = SimOptions { fail_on_conflict: false, trace, cycle_budget };
        let sim = simulate(&self.inner, &inputs, &opts).map_err(val_err)?;
        serde_json::to_string_pretty(&serde_json::json!({
            "cycles": sim.cycles,
            "conflicts": sim.conflicts,
            "memories": sim.memories,
            "trace": sim.trace,
        }))
        .map_err(val_err)
    }
}

/// Compile DSL source through the pass pipeline. Strip-mine and banking
/// recipes come from the source's `//!` directives with `factor`
/// substituted for `*`.
#[pyfunction]
#[pyo3(signature = (src, factor=1, strategy="embed", restructure=false, flatten=true))]
fn compile(
    src: &str,
    factor: u64,
    strategy: &str,
    restructure: bool,
    flatten: bool,
) -> PyResult<Program> {
    let funcs = parse_dsl(src).map_err(val_err)?;
    if funcs.is_empty() {
        return Err(PyValueError::new_err("no functions in source"));
    }
    let entry = fixture_entry(src).unwrap_or_else(|| funcs[0].name.clone());
    let cfg = fixture_config(src, factor, strategy_of(strategy)?, restructure, flatten)
        .map_err(PyValueError::new_err)?;
    let out = run_pipeline(&funcs, &entry, &cfg).map_err(val_err)?;
    let diags = validate(&out.program);
    if !diags.is_empty() {
        return Err(PyRuntimeError::new_err(format!(
            "lowered program failed validation: {}",
            diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
        )));
    }
    Ok(Program { inner: out.program })
}

/// Run the golden-model interpreter on DSL source; returns final memory
/// images as a JSON string `{name: [words]}`.
#[pyfunction]
#[pyo3(signature = (src, inputs_json="{}"))]
fn reference_interpret(src: &str, inputs_json: &str) -> PyResult<String> {
    let funcs = parse_dsl(src).map_err(val_err)?;
    if funcs.is_empty() {
        return Err(PyValueError::new_err("no functions in source"));
    }
    let entry = fixture_entry(src).unwrap_or_else(|| funcs[0].name.clone());
    let inputs = inputs_from_json(inputs_json)?;
    let images = interpret(&funcs, &entry, &inputs, InterpOptions::default()).map_err(val_err)?;
    let flat: std::collections::BTreeMap<String, Vec<u64>> =
        images.into_iter().map(|(k, v)| (k, v.data)).collect();
    serde_json::to_string_pretty(&flat).map_err(val_err)
}

/// Compile, simulate, and check against the golden model in one shot;
/// returns `{"cycles", "conflicts", "oracle_ok", "mismatches"}` as JSON.
#[pyfunction]
#[pyo3(signature = (src, inputs_json="{}", factor=1, strategy="embed", restructure=false, flatten=true))]
fn check_oracle(
    src: &str,
    inputs_json: &str,
    factor: u64,
    strategy: &str,
    restructure: bool,
    flatten: bool,
) -> PyResult<String> {
    let funcs = parse_dsl(src).map_err(val_err)?;
    if funcs.is_empty() {
        return Err(PyValueError::new_err("no functions in source"));
    }
    let entry = fixture_entry(src).unwrap_or_else(|| funcs[0].name.clone());
    let cfg = fixture_config(src, factor, strategy_of(strategy)?, restructure, flatten)
        .map_err(PyValueError::new_err)?;
    let out = run_pipeline(&funcs, &entry, &cfg).map_err(val_err)?;
    let inputs = inputs_from_json(inputs_json)?;
    let report =
        compare_to_oracle(&out.program, &funcs, &entry, &inputs, &cfg, &SimOptions::default())
            .map_err(val_err)?;
    serde_json::to_string_pretty(&serde_json::json!({
        "cycles": report.sim.cycles,
        "conflicts": report.sim.conflicts,
        "memories": report.sim.memories,
        "oracle_ok": report.matches(),
        "mismatches": report.mismatches,
    }))
    .map_err(val_err)
}

/// Run a benchmark factor sweep; returns the sweep report as JSON.
#[pyfunction]
#[pyo3(signature = (model, factors=vec![1, 2, 4], strategy="embed", seed=1))]
fn bench_sweep(model: &str, factors: Vec<u64>, strategy: &str, seed: u64) -> PyResult<String> {
    let spec = minihls::bench::BenchSpec {
        model: model.parse().map_err(PyValueError::new_err)?,
        factors,
        strategy: strategy_of(strategy)?,
        seed,
        restructure: false,
        flatten: true,
    };
    let report = minihls::bench::sweep(&spec).map_err(val_err)?;
    serde_json::to_string_pretty(&report).map_err(val_err)
}

/// DSL source text of a benchmark kernel (ffnn, cnn, or mha).
#[pyfunction]
fn kernel_source(model: &str) -> PyResult<String> {
    let m: minihls::bench::Model = model.parse().map_err(PyValueError::new_err)?;
    Ok(minihls::bench::kernel_source(m).to_string())
}

/// Encode a decimal literal as IEEE-754 binary32 bits.
#[pyfunction]
fn f32_encode(text: &str) -> PyResult<u32> {
    minihls::floatlib::f32_encode(text)
        .map(|b| b.0)
        .ok_or_else(|| PyValueError::new_err(format!("bad float literal '{text}'")))
}

/// Bit-exact f32 addition on raw bits.
#[pyfunction]
fn f32_add(a: u32, b: u32) -> u32 {
    minihls::floatlib::f32_add(minihls::floatlib::F32Bits(a), minihls::floatlib::F32Bits(b)).0
}

/// Bit-exact f32 multiplication on raw bits.
#[pyfunction]
fn f32_mul(a: u32, b: u32) -> u32 {
    minihls::floatlib::f32_mul(minihls::floatlib::F32Bits(a), minihls::floatlib::F32Bits(b)).0
}

#[pymodule]
fn minihls_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Program>()?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(reference_interpret, m)?)?;
    m.add_function(wrap_pyfunction!(check_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(bench_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_source, m)?)?;
    m.add_function(wrap_pyfunction!(f32_encode, m)?)?;
    m.add_function(wrap_pyfunction!(f32_add, m)?)?;
    m.add_function(wrap_pyfunction!(f32_mul, m)?)?;
    Ok(())
}
