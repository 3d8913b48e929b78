#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Smoke test for the minihls_py extension module.

Build the extension first, then run this script:

    cargo build -p minihls-py
    python3 python/smoke.py

The script locates the built cdylib in target/, exposes it as an importable
module, and checks a banked fixture end to end: compile, simulate, golden
model, resources, and the float library.
"""

import json
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def import_minihls_py():
    names = ["libminihls_py.so", "minihls_py.so", "libminihls_py.dylib", "minihls_py.pyd"]
    candidates = [ROOT / "target" / prof / n for prof in ("debug", "release") for n in names]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("minihls_py cdylib not found; run `cargo build -p minihls-py` first")
    tmp = pathlib.Path(tempfile.mkdtemp(prefix="minihls_py_"))
    shutil.copy2(built, tmp / "minihls_py.so")
    sys.path.insert(0, str(tmp))
    import minihls_py

    return minihls_py


FIXTURE = """\
//! entry fill
//! strip i *
//! bank mem *
func fill(mem: int[4]) {
  for (int i = 0; i < 4; ++i) {
    mem[i] = i;
  }
}
"""


def main():
    m = import_minihls_py()

    # compile at factor 2 with the embed strategy and simulate
    prog = m.compile(FIXTURE, factor=2, strategy="embed")
    assert prog.validate() == [], prog.validate()
    assert prog.branches() == 0, "embed banking must not add control branches"

    inputs = json.dumps({"memories": {"mem": [0, 0, 0, 0]}})
    sim = json.loads(prog.simulate(inputs))
    # cyclic banking by 2: bank 0 holds [0, 2], bank 1 holds [1, 3]
    assert sim["memories"]["mem"] == [0, 2, 1, 3], sim["memories"]
    assert sim["conflicts"] == [], sim["conflicts"]

    # branch strategy computes the same image but pays in control branches
    prog_b = m.compile(FIXTURE, factor=2, strategy="branch")
    assert prog_b.branches() > 0
    sim_b = json.loads(prog_b.simulate(inputs))
    assert sim_b["memories"]["mem_bank_0"] == [0, 2]
    assert sim_b["memories"]["mem_bank_1"] == [1, 3]
    assert sim_b["cycles"] > sim["cycles"], "branch chains must cost cycles"

    # one-shot oracle check and the golden model itself
    rep = json.loads(m.check_oracle(FIXTURE, inputs, factor=2, strategy="embed"))
    assert rep["oracle_ok"], rep["mismatches"]
    ref = json.loads(m.reference_interpret(FIXTURE, inputs))
    assert ref["mem"] == [0, 1, 2, 3]

    # round-trip and resources
    assert m.Program.parse(prog.print()).print() == prog.print()
    res = json.loads(prog.resources())
    assert res["memories"] == 1 and res["fsm_states"] == prog.fsm_states()

    # float library is bit-exact IEEE-754 binary32
    one = m.f32_encode("1.0")
    assert one == 0x3F800000
    assert m.f32_add(one, one) == m.f32_encode("2.0")
    assert m.f32_mul(m.f32_encode("1.5"), m.f32_encode("2.0")) == m.f32_encode("3.0")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
