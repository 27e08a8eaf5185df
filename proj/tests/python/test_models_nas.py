import itertools

import numpy as np
import pytest

import pvkit


def test_models_forward_and_predict():
    pc = pvkit.generate_scene(seed=1)
    for kind in ("pvcnn", "spvcnn", "pointmlp"):
        model = pvkit.Model(kind, seed=3)
        logits = model.forward(pc)
        assert logits.shape == (len(pc), 4)
        assert np.isfinite(logits).all()
        assert model.predict(pc).shape == (len(pc),)
        assert model.num_parameters > 0
    with pytest.raises(pvkit.ConfigError):
        pvkit.Model("transformer")


def test_training_reduces_loss():
    scenes = [pvkit.generate_scene(seed=s) for s in range(3)]
    model = pvkit.Model("pvcnn", seed=0)
    losses = model.fit(scenes, epochs=4, lr=3e-3)
    assert len(losses) == 4
    assert losses[-1] < losses[0]
    report = model.evaluate(scenes)
    assert 0.0 <= report["miou"] <= 1.0


def test_evaluate_labels():
    labels = np.array([0, 1, 1, 2, 2, 2], dtype=np.uint32)
    assert pvkit.evaluate_labels(labels, labels, 3)["miou"] == 1.0
    pred = np.array([0, 1, 2, 2, 2, 1], dtype=np.uint32)
    report = pvkit.evaluate_labels(pred, labels, 3)
    ious = [c["iou"] for c in report["classes"]]
    assert ious == pytest.approx([1.0, 1 / 3, 2 / 4])


def toy_space():
    return pvkit.SearchSpace({"stages": [{"max_depth": 2, "channels": [4, 8, 12]},
                                         {"max_depth": 2, "channels": [8, 16], "stride": 2}]})


def all_archs():
    per_stage = []
    for channels in ([4, 8, 12], [8, 16]):
        options = []
        for d in (1, 2):
            options += [list(c) for c in itertools.product(channels, repeat=d)]
        per_stage.append(options)
    for a, b in itertools.product(*per_stage):
        yield {"depths": [len(a), len(b)], "channels": [a, b]}


def fitness(arch):
    # Peaks at a specific width pattern; ties broken by the depth term.
    flat = [c for stage in arch["channels"] for c in stage]
    return -abs(sum(flat) - 30) - 0.1 * abs(arch["depths"][0] - 2) + 0.01 * flat[-1]


def test_search_space_encoding_round_trip():
    space = toy_space()
    archs = list(all_archs())
    assert space.size == len(archs) == 12 * 6
    for arch in archs:
        assert space.is_valid(arch)
        assert space.decode(space.encode(arch)) == arch


def test_evolutionary_search_finds_enumerated_optimum():
    space = toy_space()
    best = max(all_archs(), key=fitness)
    result = pvkit.evolutionary_search(space, fitness, population=16, parents=4, generations=10, seed=1)
    assert result["best"] == best
    assert result["fitness"] == pytest.approx(fitness(best))


def test_constrained_search_never_exceeds_budget():
    space = toy_space()
    usage = lambda arch: float(sum(c for s in arch["channels"] for c in s))
    seen = []

    def tracked(arch):
        seen.append(usage(arch))
        return fitness(arch)

    result = pvkit.evolutionary_search(space, tracked, usage=usage, budget=24.0, population=8, parents=4,
                                       generations=5, seed=2)
    assert result["usage"] <= 24.0
    assert max(seen) <= 24.0
    with pytest.raises(pvkit.InfeasibleError):
        pvkit.evolutionary_search(space, fitness, usage=usage, budget=1.0, generations=2)


def test_latency_predictor_fits_linear_latency(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.random((200, 4))
    y = 1.0 + x @ np.array([0.5, 1.0, 0.25, 2.0])
    pred, report = pvkit.LatencyPredictor.fit(x.tolist(), y.tolist(), epochs=1500, seed=1)
    assert report["holdout_mre"] < 0.02
    path = str(tmp_path / "p.json")
    pred.save(path)
    again = pvkit.LatencyPredictor.load(path)
    assert again.predict(list(x[0])) == pred.predict(list(x[0]))
