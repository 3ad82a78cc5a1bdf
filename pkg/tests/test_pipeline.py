import math

import pytest

from subnsw.conflp import approximation_constant
from subnsw.errors import InputError
from subnsw.harness.io import instance_from_dict
from subnsw.harness.pipeline import PipelineConfig, bench, run_pipeline


def test_triad_pipeline(triad):
    rep = run_pipeline(triad, trials=2000, seed=3)
    assert rep.status == "ok"
    assert rep.opt == pytest.approx(math.sqrt(4 * 4))
    assert rep.lp_bound >= rep.opt - 1e-9
    assert rep.nsw_max <= rep.opt + 1e-9
    assert rep.ratio_mean >= 1 / approximation_constant(0)
    assert rep.samples.shape[0] == 2000


def test_pipeline_deterministic(mixed):
    a = run_pipeline(mixed, trials=500, seed=9).to_dict()
    b = run_pipeline(mixed, trials=500, seed=9).to_dict()
    assert a == b


def test_pipeline_infeasible():
    inst = instance_from_dict({"items": ["j1", "j2"], "agents": [
        {"id": "a", "weight": 0.5, "valuation": {"type": "additive", "values": {"j1": 1, "j2": 0}}},
        {"id": "b", "weight": 0.5, "valuation": {"type": "additive", "values": {"j1": 1, "j2": 0}}}]})
    rep = run_pipeline(inst, trials=10, seed=0)
    assert rep.status == "infeasible" and rep.opt == 0.0


def test_config_validation():
    with pytest.raises(InputError):
        PipelineConfig(mode="simplex")
    with pytest.raises(InputError):
        PipelineConfig(trials=0)


def test_bench_rows():
    rows = bench("additive-uniform", 2, 4, 3, seed=10, cfg=PipelineConfig(trials=200, seed=10))
    assert [r.name for r in rows] == [f"additive-uniform-n2-m4-s{10 + k}" for k in range(3)]
    assert all(r.status == "ok" and r.ratio_mean <= 1 + 1e-9 for r in rows)
    assert "seconds" not in rows[0].to_dict()
