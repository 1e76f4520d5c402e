from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gravanom.ledger import (
    CONDITIONS,
    Counterterm,
    Ledger,
    LedgerEntry,
    LedgerError,
    OperatorFamily,
    check_condition,
    eta_quarter,
    frac,
    load_ledger,
    min_multiplicity,
    mod1,
    solve_counterterm,
)

LEDGER = load_ledger()
MAJORANA = LEDGER.family("majorana")
ORIENTED = LEDGER.select(["K3", "S4", "CP2"])


def oriented(name, sigma, torus=False):
    return LedgerEntry(name, 4, True, signature=sigma, is_mapping_torus=torus)


# -- values quoted in the source ------------------------------------------------------


def test_k3_quarter_eta_is_half():
    assert eta_quarter(MAJORANA, LEDGER["K3"]) == Fraction(1, 2)


def test_rp4_quarter_eta_from_table():
    assert eta_quarter(MAJORANA, LEDGER["RP4"]) == Fraction(1, 16)


def test_k3_fails_without_counterterm():
    verdict = check_condition(LEDGER, "AnnomFinalW", MAJORANA, Fraction(1, 96), [LEDGER["K3"]])
    assert not verdict.passed
    assert verdict.counterterm == 0
    assert verdict.entries[0].residue == Fraction(1, 2)


def test_counterterm_for_oriented_entries():
    assert check_condition(LEDGER, "AnnomFinalU", MAJORANA, Counterterm(Fraction(1, 96)), ORIENTED).passed
    assert solve_counterterm(LEDGER, MAJORANA, "AnnomFinalU", ORIENTED) == Fraction(1, 96)
    result = min_multiplicity(LEDGER, MAJORANA, "AnnomFinalU", ORIENTED)
    assert (result.nu, result.counterterm) == (1, Fraction(1, 96))


def test_rp4_blocks_eight_copies():
    entries = LEDGER.select(["K3", "S4", "CP2", "RP4"])
    assert solve_counterterm(LEDGER, MAJORANA, "AnnomFinalU2", entries, nu=8) is None
    for c in (Fraction(0), Fraction(1, 96), Fraction(1, 2)):
        assert not check_condition(LEDGER, "AnnomFinalU2", MAJORANA, c, entries, nu=8).passed


def test_sixteen_copies_needed_with_rp4():
    entries = LEDGER.select(["K3", "S4", "CP2", "RP4"])
    result = min_multiplicity(LEDGER, MAJORANA, "AnnomFinalU2", entries)
    assert result.nu == 16
    assert check_condition(LEDGER, "AnnomFinalU2", MAJORANA, result.counterterm, entries, nu=16).passed


def test_mapping_torus_scope_needs_eight():
    assert min_multiplicity(LEDGER, MAJORANA, "AnnomFinalU2", LEDGER.select(), mapping_torus_only=True).nu == 8
    assert min_multiplicity(LEDGER, MAJORANA, "Anomaly2", LEDGER.select()).nu == 8


# -- validation -------------------------------------------------------------------------


def test_frac_rejects_floats():
    with pytest.raises(LedgerError):
        frac(0.5)
    assert frac("3/6") == Fraction(1, 2)
    assert frac(-2) == Fraction(-2)


def test_mod1_range():
    assert mod1(Fraction(-1, 3)) == Fraction(2, 3)
    assert mod1(Fraction(5, 2)) == Fraction(1, 2)
    assert mod1(Fraction(3)) == 0


def test_entry_signature_p1_consistency():
    assert oriented("X", 2).p1 == 6
    assert LedgerEntry("Y", 4, True, p1=-9).signature == -3
    with pytest.raises(LedgerError):
        LedgerEntry("Z", 4, True, signature=1, p1=4)
    with pytest.raises(LedgerError):
        LedgerEntry("Z", 4, True)


def test_unorientable_entry_needs_cover():
    with pytest.raises(LedgerError):
        LedgerEntry("Q", 4, False)
    with pytest.raises(LedgerError):
        Ledger([LedgerEntry("Q", 4, False, double_cover="missing")])
    bad_cover = LedgerEntry("R", 4, False, double_cover="Q2")
    with pytest.raises(LedgerError):
        Ledger([bad_cover, LedgerEntry("Q2", 4, False, double_cover="R")])


def test_external_source_needs_reference():
    with pytest.raises(LedgerError):
        LedgerEntry("E", 4, True, signature=0, source="external")


def test_duplicate_and_unknown_entries():
    with pytest.raises(LedgerError):
        Ledger([oriented("A", 0), oriented("A", 1)])
    with pytest.raises(LedgerError):
        LEDGER["nope"]
    with pytest.raises(LedgerError):
        LEDGER.family("dirac")


def test_family_validation():
    with pytest.raises(LedgerError):
        OperatorFamily("f", 4, 0)
    with pytest.raises(LedgerError):
        OperatorFamily("f", 4, 1, rule={"euler": "1"})
    fam = OperatorFamily("f", 4, 1, table={"S4": "1/3"})
    assert eta_quarter(fam, LEDGER["S4"]) == Fraction(1, 3)
    with pytest.raises(LedgerError):
        eta_quarter(OperatorFamily("g", 4), LEDGER["K3"])


def test_condition_scoping():
    with pytest.raises(LedgerError, match="oriented"):
        check_condition(LEDGER, "AnnomFinalU", MAJORANA, 0, LEDGER.select(["RP4"]))
    with pytest.raises(LedgerError):
        check_condition(LEDGER, "Unknown", MAJORANA, 0)
    verdict = check_condition(LEDGER, "AnnomFinal", MAJORANA, 0, ORIENTED)
    assert verdict.entries == ()
    assert verdict.passed


def test_verdict_serializes_exactly():
    d = check_condition(LEDGER, "AnnomFinalU", MAJORANA, Fraction(1, 96), ORIENTED).as_dict()
    assert d["counterterm"] == "1/96"
    assert {e["name"]: e["eta_quarter"] for e in d["entries"]}["K3"] == "1/2"


def test_weight_of_unorientable_entry_uses_cover():
    assert LEDGER.weight(LEDGER["RP4"]) == LEDGER["S4"].p1 / 2
    assert LEDGER.weight(LEDGER["K3"]) == -48


def test_load_ledger_from_path(tmp_path):
    path = tmp_path / "l.yaml"
    path.write_text("entries:\n  - {name: A, orientable: true, signature: '2'}\nfamilies:\n  - {name: f, rule: {signature: '1/4'}}\n")
    L = load_ledger(path)
    assert eta_quarter(L.family("f"), L["A"]) == Fraction(1, 2)


# -- properties -------------------------------------------------------------------------

signatures = st.lists(st.integers(-40, 40), min_size=1, max_size=5)
rules = st.fractions(min_value=-2, max_value=2, max_denominator=64)


def synthetic(sigmas, torus=False):
    return [oriented(f"N{i}", s, torus) for i, s in enumerate(sigmas)]


@given(sigmas=signatures, rule=rules, k=st.integers(1, 6))
def test_multiples_of_passing_multiplicity_pass(sigmas, rule, k):
    entries = synthetic(sigmas)
    fam = OperatorFamily("f", 4, 1, rule={"signature": rule})
    L = Ledger(entries, [fam])
    found = min_multiplicity(L, fam, "AnnomFinalU", entries, bound=32)
    if found.nu is None:
        return
    c = found.counterterm
    assert check_condition(L, "AnnomFinalU", fam, c * k, entries, nu=found.nu * k).passed


@given(sigmas=signatures, rule=rules)
def test_solution_satisfies_every_congruence(sigmas, rule):
    entries = synthetic(sigmas)
    fam = OperatorFamily("f", 4, 1, rule={"signature": rule})
    L = Ledger(entries, [fam])
    c = solve_counterterm(L, fam, "AnnomFinalU", entries)
    # a linear rule in σ = p1/3 always has the solution c = rule/3
    assert c is not None
    assert check_condition(L, "AnnomFinalU", fam, c, entries).passed
    assert abs(c) <= abs(rule / 3)


@given(sigmas=signatures, rule=rules)
def test_orientation_reversal_preserves_verdict(sigmas, rule):
    fam = OperatorFamily("f", 4, 1, rule={"signature": rule})
    forward = synthetic(sigmas)
    reversed_ = synthetic([-s for s in sigmas])
    L1, L2 = Ledger(forward, [fam]), Ledger(reversed_, [fam])
    for c in (Fraction(0), rule / 3, Fraction(1, 7)):
        assert check_condition(L1, "AnnomFinalU", fam, c, forward).passed == check_condition(L2, "AnnomFinalU", fam, c, reversed_).passed


@given(sigmas=signatures, rule=rules)
def test_w_implies_u_with_zero_counterterm(sigmas, rule):
    entries = synthetic(sigmas)
    fam = OperatorFamily("f", 4, 1, rule={"signature": rule})
    L = Ledger(entries, [fam])
    if check_condition(L, "AnnomFinalW", fam, 0, entries).passed:
        assert check_condition(L, "AnnomFinalU", fam, 0, entries).passed
        assert solve_counterterm(L, fam, "AnnomFinalW", entries) == 0


@pytest.mark.parametrize("condition", CONDITIONS)
def test_empty_selection_needs_no_counterterm(condition):
    assert solve_counterterm(LEDGER, MAJORANA, condition, []) == 0
