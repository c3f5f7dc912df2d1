import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def toy():
    """Quadratic reward with Y uniform on {0, 0, 3}."""
    from drocal import EmpiricalDistribution, QuadraticModel

    return QuadraticModel(1), EmpiricalDistribution(np.array([0.0, 0.0, 3.0]))


@pytest.fixture
def kl():
    from drocal import relative_entropy

    return relative_entropy()


@pytest.fixture
def chi2():
    from drocal import modified_chi_square

    return modified_chi_square()


@pytest.fixture(scope="session")
def wdbc_path(tmp_path_factory):
    """WDBC table written by the export script (needs scikit-learn)."""
    pytest.importorskip("sklearn")
    sys.path.insert(0, str(ROOT / "scripts"))
    try:
        import export_wdbc
    finally:
        sys.path.pop(0)
    out = tmp_path_factory.mktemp("wdbc") / "wdbc.csv"
    export_wdbc.main([str(out)])
    return out
