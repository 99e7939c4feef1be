import math
import os

import numpy as np
import pytest

import plight


def test_builtin_flows_and_counts():
    names = plight.builtin_flows()
    assert names == ["jn1", "jn2", "jn3", "hz1", "hz2", "hz3", "hz4"]
    jn3 = plight.flow("jn3")
    assert jn3.grid == (3, 4)
    assert jn3.expected_spawns(14) == pytest.approx(8190.0)
    assert plight.published_vehicle_count("jn3") == 8186
    assert plight.count_spawns(3, 4, "jn3", 1) > 0


def test_flow_text_round_trip():
    f = plight.parse_flow("name = x\nturn_probs = 0.2 0.3 0.5\nphase = 3600 7\n")
    assert f.name == "x"
    assert f.phases == [(3600.0, 7.0)]
    assert plight.parse_flow(f.to_text()).turn_probs == f.turn_probs
    with pytest.raises(plight.ParseError):
        plight.parse_flow("name = x\nturn_probs = 0.5 0.5\nphase = 3600 7\n")


def test_simulator_episode():
    sim = plight.Simulator(2, 2, "jn1", seed=3)
    assert sim.intersections == 4
    obs = sim.observations()
    assert obs.shape == (4, 16)
    steps = 0
    done = False
    while not done:
        obs, rewards, done = sim.step([steps % 4] * 4)
        c = sim.counts()
        assert c["spawned"] == c["on_links"] + c["queued"] + c["exited"]
        assert len(rewards) == 4 and all(r <= 0 for r in rewards)
        steps += 1
    assert steps == 360
    m = sim.metrics()
    assert m["m_tt"] >= 30.0
    with pytest.raises(plight.StateError):
        sim.step([0] * 4)
    with pytest.raises(plight.Error):
        sim.reset()
        sim.step([7] * 4)


def test_analytics():
    assert abs(plight.cnt_entropy([0.2, 0.3, 0.5]) - 0.9644) < 5e-4
    assert abs(plight.cnt_entropy([0.3, 0.2, 0.5]) - 1.0211) < 5e-4
    v, t = plight.route_feature("S|L", 0.9, 12.0)
    assert list(v) == [1.0, 0.0, 0.9] and t == 12.0
    rng = np.random.default_rng(0)
    data = rng.normal(size=(300, 4)) * np.array([1.0, 2.0, 3.0, 4.0])
    res = plight.pca(data, 3)
    c = res["components"]
    assert np.allclose(c @ c.T, np.eye(3), atol=1e-8)
    cov = np.cov(data, rowvar=False)
    ref = np.sort(np.linalg.eigvalsh(cov))[::-1][:3]
    assert np.allclose(res["eigenvalues"], ref, rtol=1e-8)


def test_similarity():
    p = plight.guide_distribution([0.0, -1.0])
    assert p[0] == pytest.approx(1 / (1 + math.exp(-1)))
    assert sum(p) == pytest.approx(1.0)
    assert plight.temporal_weight([1.0, 1.0], 0.5) == pytest.approx(-1.5)


def test_pretrain_and_load(tmp_path):
    cfg = tmp_path / "p.cfg"
    cfg.write_text(
        "mode = pretrain\nflow = jn1\ngrid = 1 2\nepisodes = 3\nseeds = 1\n"
        "horizon = 300\nwarmup = 32\nbatch_size = 8\nthreads = 1\noutput = out\n"
    )
    records = plight.run(str(cfg))
    assert len(records) == 1 and len(records[0]["m_tt"]) == 3
    assert "ar" in records[0]
    agent = plight.Agent.load(str(tmp_path / "out/PLight/jn1/seed1/checkpoint.json"))
    assert agent.has_decoder and agent.source_flow == "jn1"
    q = agent.q_values([1, 0, 0, 0] + [0.1] * 12, [[0, 1, 0, 0] + [0.0] * 12])
    assert len(q) == 4
    with pytest.raises(plight.ConfigError):
        bad = tmp_path / "bad.cfg"
        bad.write_text("mode = pretrain\nflow = jn1\nnope = 1\n")
        plight.run(str(bad))
