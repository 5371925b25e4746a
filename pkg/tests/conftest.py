from __future__ import annotations

import numpy as np
import pytest

from torusmatch import ConfigPair, PointConfig, TorusSpec, sample_conditioned_pair


@pytest.fixture
def spec2() -> TorusSpec:
    return TorusSpec(d=2, L=4.0, G=16)


@pytest.fixture
def spec3() -> TorusSpec:
    return TorusSpec(d=3, L=2.0, G=8)


def make_pair(d: int, G: int, n: int, seed: int, L: float | None = None) -> ConfigPair:
    spec = TorusSpec(d=d, L=float(G) / 4 if L is None else L, G=G)
    return sample_conditioned_pair(spec, n, seed)


def manual_config(spec: TorusSpec, points, label: int = 1) -> PointConfig:
    return PointConfig(spec=spec, label=label,
                       points=np.asarray(points, dtype=np.float64))
