// SPDX-License-Identifier: Apache-2.0

//! Command-line driver: compile fixtures through the pass pipeline, simulate
//! lowered programs against JSON inputs, run benchmark sweeps, and report
//! resource estimates. All artifacts are written atomically and all JSON
//! output is deterministic (sorted keys, bit-exact words).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, BenchSpec, Model};
use crate::frontend::{parse_dsl, Function, Inputs};
use crate::ir::{parse_ir, print_ir, validate, BankSpec, Program};
use crate::passes::{PassConfig, Strategy};
use crate::pipeline::{
    compare_to_oracle, fixture_config, fixture_entry, run_pipeline, PipelineOutput,
};
use crate::resources::estimate;
use crate::sim::{simulate, SimOptions};

/// Exit statuses: 0 success, 1 user error, 2 internal invariant failure,
/// 3 oracle mismatch or hazard while checking was enabled.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "minihls", version, about = "Miniature HLS flow: banking, unrolling, cycle-accurate simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a DSL fixture through the pass pipeline and emit hardware IR.
    Compile(CompileArgs),
    /// Simulate a lowered program (or compile-and-simulate a fixture).
    Simulate(SimulateArgs),
    /// Generate a benchmark kernel and sweep banking factors.
    Bench(BenchArgs),
    /// Print a resource estimate for a lowered program.
    Resources(ResourcesArgs),
}

#[derive(Args, Debug, Clone)]
struct PassFlags {
    /// Banking factor substituted for `*` in the fixture's directives.
    #[arg(long, default_value_t = 1)]
    factor: u64,
    /// Banking strategy: branch or embed.
    #[arg(long, default_value = "embed")]
    strategy: String,
    /// Run the nest-restructuring pass.
    #[arg(long)]
    restructure: bool,
    /// Keep multi-dimensional memories instead of flattening to 1-D.
    #[arg(long)]
    no_flatten: bool,
    /// Extra strip-mine step, `var=factor`; repeatable, applied after the
    /// fixture's own directives.
    #[arg(long = "strip")]
    strip: Vec<String>,
    /// Extra cyclic banking, `mem=f1,f2,...`; repeatable.
    #[arg(long = "bank")]
    bank: Vec<String>,
    /// Entry function (defaults to the fixture's `//! entry` or the first
    /// function).
    #[arg(long)]
    entry: Option<String>,
}

#[derive(Args, Debug)]
struct CompileArgs {
    /// Input fixture (.aff).
    input: PathBuf,
    #[command(flatten)]
    flags: PassFlags,
    /// Directory for per-stage dumps (.aff per stage plus final .cir).
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Write the final IR here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Output format: text (IR only) or json (IR plus resource estimate).
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Lowered program (.cir) or fixture (.aff, compiled on the fly).
    input: PathBuf,
    /// JSON inputs: {"scalars": {...}, "memories": {...}}; memory words may
    /// be integers or {"bits": "0x..."} and arrays may be nested.
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Check the simulation against the golden-model interpreter run of
    /// this fixture (required when the input is a .cir so the banking
    /// recipe is known).
    #[arg(long)]
    check_oracle: Option<PathBuf>,
    #[command(flatten)]
    flags: PassFlags,
    /// Emit a JSON-lines execution trace to stdout alongside the result.
    #[arg(long)]
    trace: bool,
    /// Abort with an error on the first same-cycle memory conflict.
    #[arg(long)]
    fail_on_conflict: bool,
    /// Cycle budget (0 = default limit).
    #[arg(long, default_value_t = 0)]
    cycle_budget: u64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Benchmark kernel: ffnn, cnn, or mha.
    model: String,
    /// Comma-separated banking factors to sweep.
    #[arg(long, default_value = "1,2,4")]
    factors: String,
    /// Banking strategy: branch or embed.
    #[arg(long, default_value = "embed")]
    strategy: String,
    /// Seed for generated input data.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Run the nest-restructuring pass.
    #[arg(long)]
    restructure: bool,
    /// Keep multi-dimensional memories instead of flattening.
    #[arg(long)]
    no_flatten: bool,
    /// Directory for sweep.json and the generated kernel source.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ResourcesArgs {
    /// Lowered program (.cir).
    input: PathBuf,
    /// Output format: text or json.
    #[arg(long, default_value = "text")]
    format: String,
}

/// Run the CLI; returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // --help/--version are successes, not user errors
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.cmd {
        Cmd::Compile(a) => cmd_compile(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Resources(a) => cmd_resources(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Debug)]
struct CliError {
    message: String,
    code: i32,
}

impl CliError {
    fn user(message: impl Into<String>) -> CliError {
        CliError { message: message.into(), code: EXIT_USER }
    }

    fn internal(message: impl Into<String>) -> CliError {
        CliError { message: message.into(), code: EXIT_INTERNAL }
    }

    fn exit_code(&self) -> i32 {
        self.code
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn parse_strategy(s: &str) -> Result<Strategy, CliError> {
    match s {
        "branch" => Ok(Strategy::Branch),
        "embed" => Ok(Strategy::Embed),
        other => Err(CliError::user(format!("unknown strategy '{other}' (expected branch or embed)"))),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))
}

/// Write `data` atomically: temp file in the target directory, then rename.
fn write_atomic(path: &Path, data: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)
        .map_err(|e| CliError::user(format!("cannot create {}: {e}", dir.display())))?;
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::user(format!("cannot create temp file in {}: {e}", dir.display())))?;
    use std::io::Write;
    let mut f = tmp;
    f.write_all(data.as_bytes())
        .map_err(|e| CliError::user(format!("write failed: {e}")))?;
    f.persist(path).map_err(|e| CliError::user(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Build the effective PassConfig for a fixture from its directives plus
/// any explicit --strip/--bank overrides.
fn effective_config(src: &str, flags: &PassFlags) -> Result<PassConfig, CliError> {
    let strategy = parse_strategy(&flags.strategy)?;
    let mut cfg = fixture_config(src, flags.factor, strategy, flags.restructure, !flags.no_flatten)
        .map_err(CliError::user)?;
    for s in &flags.strip {
        let (var, f) = s
            .split_once('=')
            .ok_or_else(|| CliError::user(format!("--strip expects var=factor, got '{s}'")))?;
        let f: u64 = f.parse().map_err(|_| CliError::user(format!("bad factor in --strip {s}")))?;
        cfg.strip_mine.push((var.to_string(), f));
    }
    for b in &flags.bank {
        let (mem, fs) = b
            .split_once('=')
            .ok_or_else(|| CliError::user(format!("--bank expects mem=f1,f2,..., got '{b}'")))?;
        let factors = fs
            .split(',')
            .map(|t| t.parse::<u64>())
            .collect::<Result<Vec<u64>, _>>()
            .map_err(|_| CliError::user(format!("bad factors in --bank {b}")))?;
        cfg.bank_specs.push(BankSpec::cyclic(mem, factors));
    }
    Ok(cfg)
}

fn load_fixture(
    path: &Path,
    flags: &PassFlags,
) -> Result<(Vec<Function>, String, PassConfig), CliError> {
    let src = read(path)?;
    let funcs = parse_dsl(&src).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    if funcs.is_empty() {
        return Err(CliError::user(format!("{}: no functions", path.display())));
    }
    let entry = flags
        .entry
        .clone()
        .or_else(|| fixture_entry(&src))
        .unwrap_or_else(|| funcs[0].name.clone());
    let cfg = effective_config(&src, flags)?;
    Ok((funcs, entry, cfg))
}

fn compile_fixture(
    path: &Path,
    flags: &PassFlags,
) -> Result<(Vec<Function>, String, PassConfig, PipelineOutput), CliError> {
    let (funcs, entry, cfg) = load_fixture(path, flags)?;
    let out = run_pipeline(&funcs, &entry, &cfg)
        .map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    let diags = validate(&out.program);
    if !diags.is_empty() {
        let msgs: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(CliError::internal(format!(
            "lowered program failed validation: {}",
            msgs.join("; ")
        )));
    }
    Ok((funcs, entry, cfg, out))
}

fn cmd_compile(a: CompileArgs) -> Result<i32, CliError> {
    let (_funcs, _entry, _cfg, out) = compile_fixture(&a.input, &a.flags)?;
    let ir_text = print_ir(&out.program);
    if let Some(dir) = &a.dump {
        for d in &out.dumps {
            write_atomic(&dir.join(format!("{}.aff", d.name)), &d.text)?;
        }
        write_atomic(&dir.join("final.cir"), &ir_text)?;
    }
    let rendered = match a.format.as_str() {
        "text" => ir_text,
        "json" => {
            let v = serde_json::json!({
                "ir": ir_text,
                "resources": estimate(&out.program),
            });
            serde_json::to_string_pretty(&v).expect("serializable") + "\n"
        }
        other => return Err(CliError::user(format!("unknown format '{other}'"))),
    };
    match &a.output {
        Some(p) => write_atomic(p, &rendered)?,
        None => print!("{rendered}"),
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32, CliError> {
    let opts = SimOptions {
        fail_on_conflict: a.fail_on_conflict,
        trace: a.trace,
        cycle_budget: a.cycle_budget,
    };
    let is_fixture = a.input.extension().is_some_and(|e| e == "aff");

    let inputs = match &a.inputs {
        Some(p) => parse_inputs_json(&read(p)?)?,
        None => Inputs::default(),
    };

    // Resolve program + (optionally) the oracle fixture.
    let (program, oracle): (Program, Option<(Vec<Function>, String, PassConfig)>) = if is_fixture {
        let (funcs, entry, cfg, out) = compile_fixture(&a.input, &a.flags)?;
        (out.program, Some((funcs, entry, cfg)))
    } else {
        let text = read(&a.input)?;
        let program =
            parse_ir(&text).map_err(|e| CliError::user(format!("{}: {e}", a.input.display())))?;
        let oracle = match &a.check_oracle {
            Some(fp) => {
                let (funcs, entry, cfg, out) = compile_fixture(fp, &a.flags)?;
                // The provided program must be the one this recipe produces,
                // otherwise the remapping below would be meaningless.
                if print_ir(&out.program) != print_ir(&program) {
                    return Err(CliError::user(format!(
                        "{} was not produced from {} with these flags",
                        a.input.display(),
                        fp.display()
                    )));
                }
                Some((funcs, entry, cfg))
            }
            None => None,
        };
        (program, oracle)
    };

    match oracle {
        Some((funcs, entry, cfg)) => {
            let report = compare_to_oracle(&program, &funcs, &entry, &inputs, &cfg, &opts)
                .map_err(|e| CliError::user(e.to_string()))?;
            if let Some(t) = &report.sim.trace {
                print!("{t}");
            }
            let v = serde_json::json!({
                "cycles": report.sim.cycles,
                "conflicts": report.sim.conflicts,
                "memories": report.sim.memories,
                "oracle_ok": report.matches(),
                "mismatches": report.mismatches,
            });
            println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
            if !report.matches() || (a.fail_on_conflict && !report.sim.conflicts.is_empty()) {
                return Ok(EXIT_CHECK);
            }
            Ok(EXIT_OK)
        }
        None => {
            let sim = simulate(&program, &inputs, &opts)
                .map_err(|e| CliError::user(e.to_string()))?;
            if let Some(t) = &sim.trace {
                print!("{t}");
            }
            let v = serde_json::json!({
                "cycles": sim.cycles,
                "conflicts": sim.conflicts,
                "memories": sim.memories,
            });
            println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
            Ok(EXIT_OK)
        }
    }
}

fn cmd_bench(a: BenchArgs) -> Result<i32, CliError> {
    let model: Model = a.model.parse().map_err(CliError::user)?;
    let factors = a
        .factors
        .split(',')
        .map(|t| t.trim().parse::<u64>())
        .collect::<Result<Vec<u64>, _>>()
        .map_err(|_| CliError::user(format!("bad --factors '{}'", a.factors)))?;
    let spec = BenchSpec {
        model,
        factors,
        strategy: parse_strategy(&a.strategy)?,
        seed: a.seed,
        restructure: a.restructure,
        flatten: !a.no_flatten,
    };
    let report = match bench::sweep(&spec) {
        Ok(r) => r,
        Err(e @ bench::BenchError::Mismatch { .. }) | Err(e @ bench::BenchError::NonMonotone(_)) => {
            return Err(CliError { message: e.to_string(), code: EXIT_CHECK });
        }
        Err(e) => return Err(CliError::user(e.to_string())),
    };
    print!("{}", report.to_table());
    if let Some(dir) = &a.out {
        let json = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
        write_atomic(&dir.join("sweep.json"), &json)?;
        write_atomic(&dir.join(format!("{model}.aff")), bench::kernel_source(model))?;
    }
    Ok(EXIT_OK)
}

fn cmd_resources(a: ResourcesArgs) -> Result<i32, CliError> {
    let text = read(&a.input)?;
    let program =
        parse_ir(&text).map_err(|e| CliError::user(format!("{}: {e}", a.input.display())))?;
    let report = estimate(&program);
    match a.format.as_str() {
        "text" => print!("{}", report.to_table()),
        "json" => println!("{}", serde_json::to_string_pretty(&report).expect("serializable")),
        other => return Err(CliError::user(format!("unknown format '{other}'"))),
    }
    Ok(EXIT_OK)
}

/// Parse the simulation-inputs JSON schema.
///
/// Memory arrays may be nested (row-major) or flat; each word is either an
/// integer or `{"bits": "0x..."}` for bit-exact f32 values.
fn parse_inputs_json(text: &str) -> Result<Inputs, CliError> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::user(format!("bad inputs JSON: {e}")))?;
    let mut inputs = Inputs::default();
    if let Some(scalars) = v.get("scalars") {
        let obj = scalars
            .as_object()
            .ok_or_else(|| CliError::user("\"scalars\" must be an object"))?;
        for (k, val) in obj {
            let word = json_word(val)?;
            let value = if val.is_object() {
                crate::frontend::Value::F(crate::floatlib::F32Bits(word as u32))
            } else {
                crate::frontend::Value::I(word as i32 as i64)
            };
            inputs.scalars.insert(k.clone(), value);
        }
    }
    if let Some(mems) = v.get("memories") {
        let obj = mems
            .as_object()
            .ok_or_else(|| CliError::user("\"memories\" must be an object"))?;
        for (k, val) in obj {
            let mut words = Vec::new();
            flatten_words(val, &mut words)?;
            inputs.memories.insert(k.clone(), words);
        }
    }
    Ok(inputs)
}

fn json_word(v: &serde_json::Value) -> Result<u64, CliError> {
    if let Some(n) = v.as_u64() {
        return Ok(n);
    }
    if let Some(n) = v.as_i64() {
        return Ok((n as i32 as u32) as u64);
    }
    if let Some(obj) = v.as_object() {
        if let Some(bits) = obj.get("bits").and_then(|b| b.as_str()) {
            let hex = bits.strip_prefix("0x").unwrap_or(bits);
            return u64::from_str_radix(hex, 16)
                .map_err(|_| CliError::user(format!("bad bits literal '{bits}'")));
        }
    }
    Err(CliError::user(format!("cannot interpret {v} as a memory word")))
}

fn flatten_words(v: &serde_json::Value, out: &mut Vec<u64>) -> Result<(), CliError> {
    if let Some(arr) = v.as_array() {
        for e in arr {
            flatten_words(e, out)?;
        }
        Ok(())
    } else {
        out.push(json_word(v)?);
        Ok(())
    }
}
