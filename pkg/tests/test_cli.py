import csv
import io
import json
import random
import subprocess
import sys
from fractions import Fraction

import pytest

from multidisc.cli import CHERNOFF_HEADER, SCALING_HEADER, main
from multidisc.core import (
    Allocation,
    Coloring,
    SetSystem,
    parse_coloring,
    parse_set_system,
    serialize_allocation,
    serialize_coloring,
    serialize_instance,
    serialize_set_system,
)
from multidisc.discrepancy import discrepancy
from multidisc.fairness import min_d
from multidisc.generators import ConstructionParams, gen_ef_instance


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_bytes(data)
    return path


def test_gen_disc(tmp_path, capsys):
    out = tmp_path / "s.json"
    code, stdout, _ = run(capsys, "gen", "--construction", "disc", "--n", 5, "--k", 2,
                          "--constant", 1, "--seed", 7, "--out", out)
    assert code == 0
    assert stdout.strip() == "m=11 d=sqrt(11/2)"
    assert parse_set_system(out.read_bytes()).universe_size == 11


def test_gen_missing_n_is_usage_error(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--construction", "disc", "--k", 2, "--constant", 1,
                       "--out", tmp_path / "x.json")
    assert code == 2 and "n is required" in err


def test_gen_theorem_constant_is_parameter_error(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--construction", "ef", "--n", 50, "--out", tmp_path / "x.json")
    assert code == 2 and "needs n >=" in err


def test_gen_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["gen", "--bogus"])
    assert info.value.code == 2


def test_gen_propnew_warns(tmp_path, capsys):
    code, stdout, err = run(capsys, "gen", "--construction", "propnew", "--k", 3,
                            "--group-sizes", "6,6,6", "--constant", 1, "--out", tmp_path / "p.json")
    assert code == 0 and "warning" in err and stdout.startswith("m=")


def test_gen_is_deterministic(tmp_path, capsys):
    for name in ("a.json", "b.json"):
        run(capsys, "gen", "--construction", "ef", "--n", 12, "--k", 3, "--constant", 0.5,
            "--seed", 9, "--out", tmp_path / name)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_check_examples(tmp_path, capsys):
    s = write(tmp_path, "s.json", serialize_set_system(SetSystem(4, (frozenset(range(4)),))))
    c = write(tmp_path, "c.json", serialize_coloring(Coloring(2, (0, 0, 1, 1))))
    code, out, _ = run(capsys, "check", "--instance", s, "--witness", c, "--d", 0)
    assert code == 0 and "value=0" in out and "PASS" in out

    s3 = write(tmp_path, "s3.json", serialize_set_system(SetSystem(3, (frozenset(range(3)),))))
    c3 = write(tmp_path, "c3.json", serialize_coloring(Coloring(2, (0, 1, 1))))
    code, out, _ = run(capsys, "check", "--instance", s3, "--witness", c3, "--d", "1/4")
    assert code == 1 and "value=1/2" in out and "FAIL" in out


def test_check_schema_mismatch(tmp_path, capsys):
    s = write(tmp_path, "s.json", serialize_set_system(SetSystem(2, (frozenset({0}),))))
    code, _, _ = run(capsys, "check", "--instance", s, "--witness", s, "--d", 0)
    assert code == 2
    bad = write(tmp_path, "bad.json", b'{"universe_size": 2, "sets": [[0, 5]]}')
    c = write(tmp_path, "c.json", serialize_coloring(Coloring(2, (0, 1))))
    code, _, err = run(capsys, "check", "--instance", bad, "--witness", c, "--d", 0)
    assert code == 2 and "set 0" in err
    broken = write(tmp_path, "broken.json", b'{"universe_size": 2,')
    code, _, err = run(capsys, "check", "--instance", broken, "--witness", c, "--d", 0)
    assert code == 2 and "byte" in err


def test_check_agrees_with_library(tmp_path, capsys):
    rng = random.Random(41)
    for case in range(100):
        m = rng.randint(1, 8)
        k = rng.randint(2, 3)
        s = SetSystem(m, tuple(frozenset(j for j in range(m) if rng.random() < 0.5)
                               for _ in range(rng.randint(1, 4))))
        chi = Coloring(k, tuple(rng.randrange(k) for _ in range(m)))
        d = Fraction(rng.randint(0, 6), rng.choice((1, 2, 3)))
        sp = write(tmp_path, "s.json", serialize_set_system(s))
        cp = write(tmp_path, "c.json", serialize_coloring(chi))
        code, out, _ = run(capsys, "check", "--instance", sp, "--witness", cp, "--d", d)
        value = discrepancy(chi, s).value
        assert code == (0 if value <= d else 1)
        assert f"value={value} " in out
    for case in range(100):
        inst, _ = gen_ef_instance(ConstructionParams(n=6, k=2, constant_c=Fraction(1, 2), seed=case))
        a = Allocation.from_assignment([rng.randrange(2) for _ in range(inst.num_items)], 2)
        notion = rng.choice(("cd", "ef", "prop"))
        d = rng.randint(0, 4)
        ip = write(tmp_path, "i.json", serialize_instance(inst))
        ap = write(tmp_path, "a.json", serialize_allocation(a))
        code, out, _ = run(capsys, "check", "--instance", ip, "--witness", ap, "--notion", notion, "--d", d)
        value = min_d(inst, a, notion)
        assert code == (0 if value <= d else 1) and f"value={value} " in out


def test_solve_exact_and_search(tmp_path, capsys):
    s = SetSystem(5, (frozenset(range(5)), frozenset({0, 1, 2})))
    sp = write(tmp_path, "s.json", serialize_set_system(s))
    out = tmp_path / "c.json"
    code, stdout, _ = run(capsys, "solve", "--instance", sp, "--k", 2, "--exact", "--out", out)
    summary = json.loads(stdout)
    assert code == 0 and summary["optimal"] is True and summary["value"] == "1/2"
    assert discrepancy(parse_coloring(out.read_bytes()), s).value == Fraction(1, 2)

    code, first, _ = run(capsys, "solve", "--instance", sp, "--k", 2, "--search", "--seed", 4)
    code2, second, _ = run(capsys, "solve", "--instance", sp, "--k", 2, "--search", "--seed", 4)
    assert first == second
    assert Fraction(json.loads(first)["value"]) >= Fraction(1, 2)
    assert json.loads(first)["optimal"] is False


def test_solve_capacity_exit_3(tmp_path, capsys):
    sp = write(tmp_path, "s.json", serialize_set_system(SetSystem(10, (frozenset(range(10)),))))
    code, _, err = run(capsys, "solve", "--instance", sp, "--k", 3, "--state-cap", 10)
    assert code == 3 and "9842" in err


def test_solve_fairness(tmp_path, capsys):
    s = SetSystem(3, (frozenset(range(3)),))
    sp = write(tmp_path, "s.json", serialize_set_system(s))
    code, stdout, _ = run(capsys, "solve", "--instance", sp, "--notion", "cd", "--k", 2)
    assert code == 0 and json.loads(stdout)["value"] == "1"


def test_scaling_csv_format(tmp_path, capsys):
    out = tmp_path / "scaling.csv"
    code, _, _ = run(capsys, "scaling", "--k", 2, "--n", "4,6", "--samples", 3, "--seed", 5, "--out", out)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert tuple(rows[0]) == SCALING_HEADER
    assert all(len(r) == 7 for r in rows)
    assert [r[3] for r in rows[1:]] == ["0", "1", "2", "median"] * 2
    first = out.read_bytes()
    run(capsys, "scaling", "--k", 2, "--n", "4,6", "--samples", 3, "--seed", 5, "--out", out)
    assert out.read_bytes() == first


def test_scaling_same_with_threads(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "scaling", "--n", "4,6", "--samples", 2, "--out", a)
    run(capsys, "--threads", 2, "scaling", "--n", "4,6", "--samples", 2, "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_scaling_capacity(tmp_path, capsys):
    code, _, err = run(capsys, "scaling", "--n", "8", "--samples", 1, "--solver", "enumerate",
                       "--state-cap", 100, "--out", tmp_path / "x.csv")
    assert code == 3 and "required" in err


def test_chernoff_default_grid(tmp_path, capsys):
    out = tmp_path / "ch.csv"
    code, _, _ = run(capsys, "chernoff", "--report", out)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert tuple(rows[0]) == CHERNOFF_HEADER
    assert {r[4] for r in rows[1:]} <= {"true", "skipped"}
    assert sum(r[4] == "true" for r in rows[1:]) > 2000


def test_chernoff_narrow_grid_skips(tmp_path, capsys):
    code, out, _ = run(capsys, "chernoff", "--t-min", 10, "--t-max", 23, "--eps-step", "1/2")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert all(r[4] == "skipped" and r[3] == "" for r in rows[1:])


def test_no_color_in_pipes(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("NO_COLOR", "1")
    s = write(tmp_path, "s.json", serialize_set_system(SetSystem(2, (frozenset({0, 1}),))))
    c = write(tmp_path, "c.json", serialize_coloring(Coloring(2, (0, 1))))
    _, out, _ = run(capsys, "check", "--instance", s, "--witness", c, "--d", 0)
    assert "\033[" not in out


def test_module_entry_point():
    argv = ["chernoff", "--t-min", "24", "--t-max", "24", "--eps-step", "1/2"]
    proc = subprocess.run([sys.executable, "-m", "multidisc.cli", *argv], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1].endswith(",true")
