import os
from pathlib import Path

import pytest

import foray

DATA = Path(os.environ.get("FORAY_TEST_DATA", Path(__file__).resolve().parents[1] / "data"))

GOLDEN = (
    "for (int i12=0; i12<2; i12++)\n"
    " for (int i15=0; i15<3; i15++)\n"
    "  A4002a0[2147440948+1*i15+103*i12]\n"
)


def test_analyze_file_emits_model():
    model = foray.analyze_file(str(DATA / "pointer_walk.ftrace"), n_exec=1, n_loc=1)
    assert model.emit_c() == GOLDEN
    assert model.memory_events == 6
    assert model.stats()["included"]["references"] == 1


def test_synth_then_analyze_text():
    text = foray.synth(foray.pointer_walk_spec())
    assert text == (DATA / "pointer_walk.ftrace").read_text()
    assert foray.analyze_text(text, n_exec=1, n_loc=1).emit_c() == GOLDEN


def test_report_round_trip():
    model = foray.analyze_text(foray.synth(foray.shared_callee_spec()))
    rep = foray.report(model)
    assert rep["schema"] == "foray-report"
    assert len(rep["hints"]) == 1
    assert len(rep["hints"][0]["contexts"]) == 2
    assert rep["stats"]["total"] == model.stats()["total"]


def test_check_random_specs():
    for seed in range(20):
        refs, mismatches = foray.check(foray.random_spec(seed), seed)
        assert refs > 0
        assert mismatches == []


def test_errors():
    with pytest.raises(foray.TraceError, match="line 7: malformed record"):
        foray.analyze_file(str(DATA / "corrupt.ftrace"))
    with pytest.raises(foray.SpecError, match="used twice"):
        foray.synth((DATA / "dup-checkpoint.spec.json").read_text())
    with pytest.raises(ValueError):
        foray.analyze_text("", n_exec=0)
