import json
import shutil
import subprocess
import sys

import pytest

from queso.cli import EXIT_DIFFERENT, EXIT_ERROR, EXIT_OK, main

HDR = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'


def qasm(tmp_path, name, n, body):
    p = tmp_path / name
    p.write_text(HDR + f"qreg q[{n}];\n" + body)
    return str(p)


@pytest.fixture(scope="module")
def rules_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("rules") / "nam.json"
    assert main(["synth", "--gateset", "nam", "--max-qubits", "3", "--max-size", "3", "--jobs", "1",
                 "-o", str(out)]) == EXIT_OK
    return out


def test_verify_verdicts_and_exit_codes(tmp_path, capsys):
    hh = qasm(tmp_path, "hh.qasm", 1, "h q[0];\nh q[0];\n")
    empty = qasm(tmp_path, "e.qasm", 1, "")
    h = qasm(tmp_path, "h.qasm", 1, "h q[0];\n")
    x = qasm(tmp_path, "x.qasm", 1, "x q[0];\n")
    assert main(["verify", hh, empty]) == EXIT_OK
    assert capsys.readouterr().out.startswith("Equivalent")
    assert main(["verify", h, x]) == EXIT_DIFFERENT
    out = capsys.readouterr().out
    assert out.startswith("Counterexample") and "valuation" in out
    a = qasm(tmp_path, "a.qasm", 1, "rz(0.3) q[0];\nrz(0.4) q[0];\n")
    b = qasm(tmp_path, "b.qasm", 1, "rz(0.7) q[0];\n")
    c = qasm(tmp_path, "c.qasm", 1, "rz(0.8) q[0];\n")
    assert main(["verify", a, b, "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["verdict"] == "equivalent"
    assert main(["verify", a, c]) == EXIT_DIFFERENT


def test_verify_rotation_merge_through_cnots(tmp_path, capsys):
    lhs = qasm(tmp_path, "l.qasm", 2, "rz(pi) q[0];\ncx q[0],q[1];\nrz(pi/4) q[1];\ncx q[1],q[0];\n"
                                      "cx q[0],q[1];\nrz(pi/2) q[1];\n")
    rhs = qasm(tmp_path, "r.qasm", 2, "cx q[0],q[1];\nrz(pi/4) q[1];\ncx q[1],q[0];\ncx q[0],q[1];\n"
                                      "rz(3*pi/2) q[1];\n")
    assert main(["verify", lhs, rhs]) == EXIT_OK
    capsys.readouterr()


def test_errors_exit_with_two(tmp_path, capsys):
    one = qasm(tmp_path, "one.qasm", 1, "")
    two = qasm(tmp_path, "two.qasm", 2, "")
    assert main(["verify", one, two]) == EXIT_ERROR
    assert main(["verify", one, str(tmp_path / "missing.qasm")]) == EXIT_ERROR
    bad = qasm(tmp_path, "bad.qasm", 1, "foo q[0];\n")
    assert main(["verify", one, bad]) == EXIT_ERROR
    assert main(["fidelity", one]) == EXIT_ERROR
    assert main(["optimize", one]) == EXIT_ERROR
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"bogus": 1}')
    assert main(["verify", one, one, "--config", str(cfg)]) == EXIT_ERROR
    assert "queso: error:" in capsys.readouterr().err


def test_synth_is_deterministic_across_jobs(tmp_path, capsys):
    outs = []
    for jobs in ("1", "4"):
        p = tmp_path / f"r{jobs}.json"
        assert main(["synth", "--max-qubits", "2", "--max-size", "3", "--seed", "7", "--jobs", jobs,
                     "-o", str(p)]) == EXIT_OK
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    man = json.loads((tmp_path / "r1.json.manifest.json").read_text())
    assert man["command"] == "synth" and man["seed"] == 7 and man["config"]["max_size"] == 3
    capsys.readouterr()


def test_synth_size_zero(tmp_path, capsys):
    p = tmp_path / "z.json"
    assert main(["synth", "--max-size", "0", "--jobs", "1", "-o", str(p), "--json"]) == EXIT_OK
    res = json.loads(capsys.readouterr().out)
    assert res["rules"] == 0 and res["classes"] == 3
    assert json.loads(p.read_text())["rules"] == []


def test_manifest_rerun_is_byte_identical(tmp_path, capsys):
    p = tmp_path / "m.json"
    assert main(["synth", "--max-qubits", "2", "--max-size", "2", "--seed", "3", "-o", str(p)]) == EXIT_OK
    first = p.read_bytes()
    p.unlink()
    assert main(["synth", "--config", str(p) + ".manifest.json", "-o", str(p)]) == EXIT_OK
    assert p.read_bytes() == first
    capsys.readouterr()


def test_optimize_rotation_chain(tmp_path, rules_file, capsys):
    chain = qasm(tmp_path, "chain.qasm", 1, "rz(pi) q[0];\nrz(pi/2) q[0];\nrz(pi/3) q[0];\nrz(pi/4) q[0];\n")
    out = tmp_path / "o.qasm"
    assert main(["optimize", chain, "--rules", str(rules_file), "-o", str(out), "--jobs", "1",
                 "--json"]) == EXIT_OK
    res = json.loads(capsys.readouterr().out)
    assert res["cost_before"] == 4 and res["cost_after"] == 1
    body = [ln for ln in out.read_text().splitlines() if ln.startswith("rz")]
    assert len(body) == 1
    assert main(["verify", chain, str(out)]) == EXIT_OK
    capsys.readouterr()


def test_optimize_to_stdout_with_cost_and_device(tmp_path, rules_file, capsys):
    c = qasm(tmp_path, "c.qasm", 2, "h q[1];\ncx q[0],q[1];\nh q[1];\nh q[1];\ncx q[0],q[1];\nh q[1];\n"
                                    "rz(pi/3) q[0];\n")
    assert main(["optimize", c, "--rules", str(rules_file), "--cost", "2q", "--device", "toronto",
                 "--jobs", "1"]) == EXIT_OK
    cap = capsys.readouterr()
    assert cap.out.startswith("OPENQASM 2.0;")
    assert "cx" not in cap.out
    assert "(2q)" in cap.err and "fidelity" in cap.err


def test_optimize_honours_timeout(tmp_path, rules_file, capsys):
    import random
    rng = random.Random(0)
    lines = []
    for _ in range(400):
        if rng.random() < 0.4:
            a, b = rng.sample(range(6), 2)
            lines.append(f"cx q[{a}],q[{b}];")
        else:
            g = rng.choice(["h", "x", "rz(pi/4)"])
            lines.append(f"{g} q[{rng.randrange(6)}];")
    big = qasm(tmp_path, "big.qasm", 6, "\n".join(lines) + "\n")
    assert main(["optimize", big, "--rules", str(rules_file), "--timeout", "1", "--jobs", "1",
                 "--json"]) == EXIT_OK
    res = json.loads(capsys.readouterr().out)
    assert res["timed_out"]
    assert res["elapsed"] < 3
    assert res["cost_after"] <= res["cost_before"]


def test_fidelity_command(tmp_path, capsys):
    c = qasm(tmp_path, "f.qasm", 2, "cx q[0],q[1];\nh q[0];\nrz(0.2) q[1];\n")
    assert main(["fidelity", c, "--device", "toronto"]) == EXIT_OK
    assert float(capsys.readouterr().out) == pytest.approx(0.98719 * 0.999606, rel=1e-12)


def test_console_script_runs():
    exe = shutil.which("queso")
    cmd = [exe] if exe else [sys.executable, "-c", "import sys; from queso.cli import main; sys.exit(main())"]
    r = subprocess.run(cmd + ["--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "queso" in r.stdout
