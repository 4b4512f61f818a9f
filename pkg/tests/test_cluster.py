import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lpsim.cluster import ClusterConfig, run_lp, run_nmp_emulation, run_pp_emulation
from lpsim.denoise import BoxDenoiser, ConditioningVector, Denoiser, GlobalDenoiser, SamplerConfig, run_centralized
from lpsim.errors import ConfigError, WorkerFailure
from lpsim.latent import ModelPreset, PatchGeometry, random_latent
from lpsim.ledger import CommLedger
from lpsim.partition import build_plan, extract_sublatents

PROMPT = ConditioningVector.from_seed(3)
GEOM = PatchGeometry(1, 2, 2)


class FailsOnSmallInput(Denoiser):
    def predict(self, z, t, cond):
        if z.shape[1] < 8:
            raise RuntimeError("boom")
        return z


def test_single_worker_matches_centralized_bitwise():
    z_T = random_latent((2, 6, 8, 8), seed=0)
    cfg = SamplerConfig(6)
    lp = run_lp(GlobalDenoiser(), z_T, cfg, PROMPT, ClusterConfig(K=1, r=0.0), GEOM)
    ref, _ = run_centralized(GlobalDenoiser(), z_T, cfg, PROMPT)
    assert lp.ledger.grand_total == 0
    assert len(lp.ledger) == 0
    assert lp.z0.tobytes() == ref.tobytes()


def test_per_step_bytes_match_sublatent_sizes():
    z_T = random_latent((2, 8, 8, 8), seed=0)
    cfg = SamplerConfig(6)
    res = run_lp(BoxDenoiser((1, 1, 1)), z_T, cfg, PROMPT, ClusterConfig(K=4, r=0.5, threads=0), GEOM)
    per_step = res.ledger.per_step()
    for i, plan in enumerate(res.plans, start=1):
        subs = extract_sublatents(z_T, build_plan(z_T.shape, GEOM, i, 4, 0.5))
        assert per_step[i] == 4 * sum(s.size for s in subs[1:]) * z_T.itemsize
    kinds = res.ledger.by_kind()
    assert kinds["scatter"] == kinds["gather"]
    assert sum(res.ledger.per_worker().values()) == 2 * res.ledger.grand_total


@pytest.mark.parametrize("threads", ["0", "1", "3"])
def test_threaded_and_serial_runs_agree(threads, monkeypatch):
    z_T = random_latent((2, 8, 8, 8), seed=11)
    cfg = SamplerConfig(5)
    monkeypatch.setenv("LPSIM_THREADS", threads)
    a = run_lp(GlobalDenoiser(), z_T, cfg, PROMPT, ClusterConfig(K=4, r=0.5), GEOM)
    b = run_lp(GlobalDenoiser(), z_T, cfg, PROMPT, ClusterConfig(K=4, r=0.5, threads=0), GEOM)
    assert a.z0.tobytes() == b.z0.tobytes()
    assert a.ledger.to_csv_text() == b.ledger.to_csv_text()


def test_bad_thread_env(monkeypatch):
    monkeypatch.setenv("LPSIM_THREADS", "many")
    with pytest.raises(ConfigError):
        run_lp(GlobalDenoiser(), random_latent((1, 4, 4, 4), 0), SamplerConfig(1), PROMPT, ClusterConfig(K=2), GEOM)


def test_worker_failure_is_reported():
    z_T = random_latent((1, 8, 4, 4), seed=0)
    with pytest.raises(WorkerFailure) as info:
        run_lp(FailsOnSmallInput(), z_T, SamplerConfig(2), PROMPT, ClusterConfig(K=2, r=0.0, threads=0), GEOM)
    assert info.value.step == 1
    assert isinstance(info.value.cause, RuntimeError)


def test_null_prompt_rejected():
    with pytest.raises(ValueError):
        run_lp(GlobalDenoiser(), random_latent((1, 4, 4, 4), 0), SamplerConfig(1),
               ConditioningVector.null(), ClusterConfig(K=2), GEOM)


def nmp_setup(K):
    preset = ModelPreset("unit", hidden_dim=25, dtype_bytes=4)  # S_H = 10 * 25 * 4 = 1000
    return ClusterConfig(K=K, preset=preset), (1, 10, 1, 1), PatchGeometry(1, 1, 1)


def test_nmp_total_example():
    cluster, shape, geom = nmp_setup(4)
    ledger = run_nmp_emulation(30, shape, SamplerConfig(60), cluster, geom)
    assert ledger.grand_total == 360_000
    assert ledger.per_step()[1] == 6000


def test_pp_total_equals_nmp_but_order_differs():
    cluster, shape, geom = nmp_setup(4)
    nmp = run_nmp_emulation(30, shape, SamplerConfig(2), cluster, geom)
    pp = run_pp_emulation(30, shape, SamplerConfig(2), cluster, geom)
    assert pp.grand_total == nmp.grand_total
    assert len(pp) == len(nmp)
    first = [(r.pass_, r.src) for r in pp.records[:3]]
    assert first == [("cond", 1), ("uncond", 1), ("cond", 2)]


def test_emulation_needs_enough_layers():
    cluster, shape, geom = nmp_setup(4)
    with pytest.raises(ConfigError):
        run_nmp_emulation(3, shape, SamplerConfig(1), cluster, geom)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_ledger_csv_round_trip(K, T, seed):
    z_T = random_latent((1, 6, 4, 4), seed=seed)
    res = run_lp(GlobalDenoiser(), z_T, SamplerConfig(T), PROMPT, ClusterConfig(K=K, r=0.0, threads=0), GEOM)
    text = res.ledger.to_csv_text()
    back = CommLedger.from_csv(io.StringIO(text))
    assert back.grand_total == res.ledger.grand_total
    assert back.to_csv_text() == text


def test_ledger_rejects_inconsistent_bytes():
    with pytest.raises(ValueError):
        CommLedger().record(1, "cond", "scatter", 1, 2, 10, 4, nbytes=41)
