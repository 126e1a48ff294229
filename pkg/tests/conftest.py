import warnings

import pytest

import mmlsh


@pytest.fixture(scope="session")
def small_dataset():
    return mmlsh.synth_dataset(S=20, points_per_object=8, d=6, cluster_spread=0.15, seed=11)


@pytest.fixture(scope="session")
def small_index(small_dataset):
    params = mmlsh.derive_params(0.25, 0.5, c=2, w=2.184)
    return mmlsh.build_index(small_dataset, params, seed=3)


@pytest.fixture(scope="session")
def synth200():
    return mmlsh.synth_dataset(S=200, points_per_object=20, d=32, cluster_spread=0.1, seed=42)


@pytest.fixture(autouse=True)
def _silence_bound_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="gamma=.*below the guarantee bound")
        yield
