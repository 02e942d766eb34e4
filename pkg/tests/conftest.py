import numpy as np
import pytest

from distinf import nets


CONV_ARCH = (
    nets.Conv2D(3, 2, 2, 3), nets.Relu(), nets.Conv2D(2, 2, 3, 2), nets.Relu(),
    nets.Flatten(), nets.Dense(2 * 2 * 2, 4), nets.Relu(), nets.Dense(4, 1), nets.SigmoidOutput(),
)
CONV_INPUT = (5, 4, 2)


def dense_arch(*widths):
    arch = []
    for a, b in zip(widths[:-1], widths[1:]):
        arch += [nets.Dense(a, b), nets.Relu()]
    arch[-1] = nets.SigmoidOutput()
    return tuple(arch)


def random_net(arch, seed, input_shape=None, bias_scale=0.3):
    """Random weights and nonzero biases, so every row of every layer is distinct."""
    net = nets.init(arch, seed, input_shape)
    rng = np.random.default_rng(seed + 1)
    return net.replace([(w, rng.normal(0, bias_scale, b.shape)) for w, b in net.layers])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


STRONG = dict(signal_strength=2.0, label_property_coupling=1.0)


def small_config(**kw):
    from distinf import harness
    from distinf import synthdata as sd
    from distinf.attacks import meta

    base = dict(
        underlying=sd.UnderlyingSpec(**STRONG), alpha_grid=(0.0, 1.0), dataset_size=200, test_size=200,
        n_victim=10, n_shadow=10, train_cfg=nets.TrainConfig(epochs=15),
        meta_cfg=meta.MetaConfig(latent=32, rho_hidden=32, epochs=60, weight_decay=0.1, layers=(0,)), master_seed=99,
    )
    base.update(kw)
    return harness.ExperimentConfig(**base)


@pytest.fixture(scope="session")
def extreme_pools():
    """Adversary and victim pools at alpha 0 and 1 from the shipped extreme-pair config."""
    import dataclasses
    import pathlib

    from distinf import harness
    from distinf import synthdata as sd

    path = pathlib.Path(__file__).resolve().parents[1] / "configs" / "extreme.json"
    cfg = dataclasses.replace(harness.load_config(path), n_victim=10)
    cache = harness.PoolCache(cfg)
    return cfg, {
        (a, role): cache.models(a, role, 0) for a in (0.0, 1.0) for role in (sd.Pool.ADVERSARY, sd.Pool.VICTIM)
    }


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("abc")), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<3} {'PASS' if ok else 'FAIL'}  {detail}")
