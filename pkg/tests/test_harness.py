import json

import pytest

from fvm import harness
from fvm.harness import (
    FvmCase,
    HarnessError,
    REGISTRY,
    apply_operation,
    premise,
    conclusion,
    registered,
    replay,
    run_fvm,
    run_translated_fvm,
    sample_operands,
    search_counterexample,
    square_holds,
    witness_operands,
)
from fvm.structures import Structure


def test_case_defaults():
    c = FvmCase("merge", "modal", "pe", 2)
    assert c.k_out == 3 and c.relation == "E" and c.pointed
    assert FvmCase("product", "ef", "full", 1).sizes == 2
    assert FvmCase("disjoint-union", "ef", "full", 1).sizes == 3
    assert FvmCase("merge", "modal", "pe", 1, translation="weak").relation == "S"
    assert FvmCase("reduct", "ef", "pe", 1).arity == 1


def test_case_validation():
    with pytest.raises(HarnessError, match="unknown operation"):
        FvmCase("meld", "ef", "pe", 1)
    with pytest.raises(HarnessError, match="k_out"):
        FvmCase("merge", "modal", "pe", 1, k_out=1)
    with pytest.raises(HarnessError, match="no registered case"):
        FvmCase("merge", "ef", "pe", 1)
    with pytest.raises(HarnessError):
        FvmCase("disjoint-union", "ef", "pe", 0)


def test_registry_contents():
    assert registered("pointed-coproduct", "modal", "pe").status == harness.COUNTEREXAMPLE
    assert all(r.status in (harness.THEOREM, harness.COUNTEREXAMPLE) for r in REGISTRY.values())
    assert registered("merge", "modal", "full").bump == 1


def test_sampling_is_deterministic():
    c = FvmCase("disjoint-union", "ef", "full", 2, samples=20, seed=5)
    assert sample_operands(c, 3) == sample_operands(c, 3)
    a = run_fvm(c).as_dict(timing=False)
    b = run_fvm(c).as_dict(timing=False)
    assert a == b
    assert a["elapsed_ms"] is None


def test_theorem_case_passes():
    rep = run_fvm(FvmCase("disjoint-union", "ef", "pe", 1, samples=30))
    assert rep.status == "pass" and rep.premise_hits == 30 and not rep.violations
    assert len(rep.trace) == rep.samples
    assert json.loads(rep.to_json())["status"] == "pass"


def test_inconclusive_when_budget_is_too_small():
    rep = run_fvm(FvmCase("disjoint-union", "ef", "count", 3, samples=5, budget=0))
    assert rep.status == "inconclusive"


def test_counterexample_is_found_and_replays():
    c = FvmCase("pointed-coproduct", "modal", "pe", 1, samples=10)
    rep = run_fvm(c)
    assert rep.status == "pass" and rep.violations
    w = {key: v for key, v in rep.violations[0].items() if key != "sample"}
    assert replay(c, w)
    As, Bs = witness_operands(w)
    assert premise(c, As, Bs) and not conclusion(c, As, Bs)


def test_search_counterexample_is_deterministic():
    c = FvmCase("pointed-coproduct", "modal", "pe", 1, sizes=2)
    w1, w2 = search_counterexample(c), search_counterexample(c)
    assert w1 is not None and w1 == w2
    assert replay(c, w1)
    assert search_counterexample(FvmCase("disjoint-union", "ef", "pe", 1, sizes=2)) is None


def test_search_respects_check_budget():
    assert search_counterexample(FvmCase("pointed-coproduct", "modal", "pe", 1, sizes=2), max_checks=0) is None


def test_apply_operation():
    A = Structure.build({"E": 2}, 2, {"E": [(0, 1)]})
    c = FvmCase("disjoint-union", "ef", "pe", 1)
    assert apply_operation(c, [A, A]).size == 4
    c = FvmCase("product", "ef", "pe", 1)
    assert apply_operation(c, [A, A]).size == 4


@pytest.mark.parametrize("translation", ["equality", "connectivity"])
def test_translated_runs(translation):
    c = FvmCase("disjoint-union", "ef", "full", 1, translation=translation, samples=20)
    rep = run_translated_fvm(c)
    assert rep.status == "pass" and not rep.square_failures
    As, _ = sample_operands(c, 0)
    assert square_holds(c, As)


def test_translated_run_needs_translation():
    with pytest.raises(HarnessError):
        run_translated_fvm(FvmCase("disjoint-union", "ef", "pe", 1))


def test_weak_merge_case():
    rep = run_fvm(FvmCase("merge", "modal", "pe", 1, translation="weak", samples=15))
    assert rep.status == "pass"
