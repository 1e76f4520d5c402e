"""Acceptance criteria, each asserted at its stated tolerance.

One full ``verify-all`` run is done serially (honest wall times) and a second
one with several workers; the two reports must be byte-identical.
"""
import json
from fractions import Fraction

import pytest

from gravanom import cli

CS_GROUP = ["background-shift", "background-shift-refinement", "cs-orientation-flip", "exterior-d-squared", "stokes"]
LEDGER_GROUP = ["counterterm-oriented", "eta-k3", "ledger-multiples", "nu-mapping-torus", "nu-multiplicity", "nu-oriented"]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    first, second = out / "first.json", out / "second.json"
    code = cli.main(["verify-all", "--out", str(first)])
    cli.main(["verify-all", "--out", str(second), "--jobs", "4"])
    report = json.loads(first.read_text())
    timings = json.loads(first.with_suffix(".timings.json").read_text())
    return {
        "code": code,
        "report": report,
        "checks": {c["id"]: c for c in report["checks"]},
        "timings": timings,
        "bytes": (first.read_bytes(), second.read_bytes()),
    }


@pytest.fixture
def criterion(capsys):
    def emit(number, label, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {label}: {detail}")
        assert ok, f"criterion {number} ({label}): {detail}"

    return emit


def test_verify_all_exit_and_size(runs, criterion):
    n = len(runs["report"]["checks"])
    criterion(0, "verify-all exits 0 with >= 20 checks", runs["code"] == 0 and n >= 20, f"exit={runs['code']} checks={n} failed={runs['report']['summary']['failed']}")


def test_c01_background_shift(runs, criterion):
    rows = runs["checks"]["background-shift"]["values"]["rows"]
    worst = max(abs(r["cs_a1"] - r["cs_a0"] - r["shift"]) for r in rows)
    ref = runs["checks"]["background-shift-refinement"]["values"]
    decays = ref["fine"] <= max(ref["coarse"] / 16, 1e-12)
    seconds = sum(runs["timings"][i] for i in CS_GROUP)
    ok = worst < 1e-6 and decays and seconds < 30 and len({r["metric"] for r in rows}) == 2
    criterion(1, "background shift", ok, f"residual={worst:.2e} refinement {ref['coarse']:.1e}->{ref['fine']:.1e} runtime={seconds:.1f}s")


def test_c02_metric_independence(runs, criterion):
    vals = list(runs["checks"]["delta-independence"]["values"]["delta"].values())
    spread = max(vals) - min(vals)
    seconds = runs["timings"]["delta-independence"]
    order = runs["checks"]["delta-refinement-order"]["values"]["order"]
    criterion(2, "delta independent of g", spread < 1e-4 and seconds < 120 and order >= 3.5, f"spread={spread:.2e} runtime={seconds:.1f}s refinement order={order:.2f}")


def test_c03_cocycle(runs, criterion):
    v = runs["checks"]["delta-cocycle"]["values"]
    r = abs(v["delta_composite"] - v["delta_first"] - v["delta_second"])
    criterion(3, "cocycle additivity", r < 1e-4, f"residual={r:.2e}")


def test_c04_isotopy(runs, criterion):
    vals = runs["checks"]["delta-isotopy"]["values"]["delta"]
    worst = max(abs(v) for v in vals.values())
    criterion(4, "isotopic maps give zero", worst < 1e-4 and len(vals) == 3, f"max|delta|={worst:.2e} over {len(vals)} flows")


def test_c05_mapping_torus(runs, criterion):
    rows = runs["checks"]["mapping-torus-agreement"]["values"]["rows"]
    worst = max(max(abs(r["delta"] - r["characteristic_number"]), abs(r["delta"]), abs(r["characteristic_number"])) for r in rows)
    covered = {(r["metric"], r["diffeo"], r["eps"]) for r in rows}
    criterion(5, "delta equals mapping-torus number", worst < 1e-4 and len(covered) == 8, f"worst={worst:.2e} cases={len(covered)}")


def test_c06_orientation_reversing(runs, criterion):
    v = runs["checks"]["orientation-reversing"]["values"]
    r = abs(v["delta"] - 0.5 * v["delta_squared"])
    criterion(6, "reversing map is half its square", r < 1e-4, f"residual={r:.2e}")


def test_c07_basic(runs, criterion):
    vals = runs["checks"]["sigma-basic"]["values"]["pairings"]
    worst = max(abs(v) for v in vals)
    criterion(7, "variation vanishes along diffeomorphisms", worst < 1e-4 and len(vals) == 3, f"max|sigma(L_X g)|={worst:.2e}")


def test_c08_cotton(runs, criterion):
    v = runs["checks"]["cotton-two-route"]["values"]
    rel = abs(v["variational"] - v["classical"]) / abs(v["classical"])
    c = runs["checks"]["cotton-conformal-flat"]["values"]
    flat = max(abs(c["variational"]), abs(c["classical"]))
    criterion(8, "Cotton two routes", rel < 1e-3 and flat < 1e-4, f"relative={rel:.2e} conformally flat={flat:.2e}")


def test_c09_paths(runs, criterion):
    v = runs["checks"]["path-independence"]["values"]
    r = max(abs(v["straight"] - v["bent"]), abs(v["straight"] - v["delta"]), abs(v["bent"] - v["delta"]))
    criterion(9, "path integral independent of path", r < 1e-4, f"residual={r:.2e} (delta={v['delta']:.2e})")


def test_c10_ledger(runs, criterion):
    c = runs["checks"]
    eta = c["eta-k3"]["values"]
    ok = (
        Fraction(eta["eta_quarter"]) == Fraction(1, 2)
        and eta["strong_condition"] is False
        and Fraction(c["counterterm-oriented"]["values"]["counterterm"]) == Fraction(1, 96)
        and c["nu-multiplicity"]["values"]["nu"] == 16
        and c["nu-mapping-torus"]["values"]["nu"] == 8
    )
    seconds = sum(runs["timings"][i] for i in LEDGER_GROUP)
    criterion(10, "exact ledger", ok and seconds < 1.0, f"K3 eta/4={eta['eta_quarter']} c={c['counterterm-oriented']['values']['counterterm']} nu={c['nu-multiplicity']['values']['nu']} mapping-torus nu={c['nu-mapping-torus']['values']['nu']} runtime={seconds:.3f}s")


def test_c11_determinism(runs, criterion):
    a, b = runs["bytes"]
    criterion(11, "byte-identical reports", a == b, f"{len(a)} bytes, serial vs 4 workers")
