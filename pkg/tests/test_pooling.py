"""Block partitioning and mean pooling, full and incremental."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from misa import build_block_summary, incremental_append

import oracles


def test_uneven_partition_boundaries():
    keys = np.arange(10, dtype=float).reshape(5, 2)
    summary = build_block_summary(keys, 2)
    assert summary.n_blocks == 3
    assert summary.boundaries.tolist() == [[0, 2], [2, 4], [4, 5]]


def test_single_block_is_global_mean():
    rng = np.random.default_rng(0)
    keys = rng.standard_normal((7, 3))
    summary = build_block_summary(keys, 16)
    assert summary.n_blocks == 1
    np.testing.assert_allclose(summary.pooled_keys[0], keys.mean(axis=0), atol=1e-12)


def test_identical_keys_pool_to_themselves():
    v = np.array([1.5, -2.0, 0.25])
    keys = np.tile(v, (9, 1))
    summary = build_block_summary(keys, 4)
    for pooled in summary.pooled_keys:
        np.testing.assert_allclose(pooled, v, atol=1e-12)


def test_pooled_keys_match_loop_oracle():
    rng = np.random.default_rng(3)
    keys = rng.standard_normal((11, 4))
    summary = build_block_summary(keys, 3)
    np.testing.assert_allclose(
        summary.pooled_keys, oracles.loop_block_means(keys, 3), atol=1e-12
    )


@settings(deadline=None, max_examples=50)
@given(
    prefix_len=st.integers(min_value=1, max_value=200),
    block_size=st.integers(min_value=1, max_value=64),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_mass_conservation(prefix_len, block_size, seed):
    # Sum over blocks of (length * pooled key) equals the sum of all keys.
    keys = np.random.default_rng(seed).standard_normal((prefix_len, 3))
    summary = build_block_summary(keys, block_size)
    lengths = summary.boundaries[:, 1] - summary.boundaries[:, 0]
    recovered = (summary.pooled_keys * lengths[:, None]).sum(axis=0)
    np.testing.assert_allclose(recovered, keys.sum(axis=0), atol=1e-9)


def test_append_to_full_block_opens_new_block():
    keys = np.ones((4, 2))
    summary = build_block_summary(keys, 2)
    grown = incremental_append(summary, np.array([5.0, 5.0]))
    assert grown.n_blocks == summary.n_blocks + 1
    assert grown.boundaries[-1].tolist() == [4, 5]
    np.testing.assert_allclose(grown.pooled_keys[-1], [5.0, 5.0])


def test_append_to_partial_block_is_running_mean():
    rng = np.random.default_rng(5)
    keys = rng.standard_normal((5, 3))
    new_key = rng.standard_normal(3)
    grown = incremental_append(build_block_summary(keys, 4), new_key)
    rebuilt = build_block_summary(np.vstack([keys, new_key]), 4)
    np.testing.assert_allclose(grown.pooled_keys, rebuilt.pooled_keys, atol=1e-9)
    assert grown.boundaries.tolist() == rebuilt.boundaries.tolist()


def test_append_to_empty_summary():
    empty = build_block_summary(np.empty((0, 2)), 4)
    assert empty.n_blocks == 0 and empty.prefix_len == 0
    grown = incremental_append(empty, np.array([2.0, 3.0]))
    assert grown.n_blocks == 1
    assert grown.boundaries.tolist() == [[0, 1]]
    np.testing.assert_array_equal(grown.pooled_keys[0], [2.0, 3.0])


@settings(deadline=None, max_examples=25)
@given(
    prefix_len=st.integers(min_value=1, max_value=60),
    block_size=st.integers(min_value=1, max_value=9),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_appends_from_empty_match_full_rebuild(prefix_len, block_size, seed):
    keys = np.random.default_rng(seed).standard_normal((prefix_len, 2))
    summary = build_block_summary(np.empty((0, 2)), block_size)
    for row in keys:
        summary = incremental_append(summary, row)
    rebuilt = build_block_summary(keys, block_size)
    assert summary.boundaries.tolist() == rebuilt.boundaries.tolist()
    np.testing.assert_allclose(summary.pooled_keys, rebuilt.pooled_keys, atol=1e-9)


def test_invalid_inputs_rejected():
    with pytest.raises(ValueError):
        build_block_summary(np.zeros((4, 2)), 0)
    with pytest.raises(ValueError):
        build_block_summary(np.zeros(4), 2)
    summary = build_block_summary(np.zeros((4, 2)), 2)
    with pytest.raises(ValueError):
        incremental_append(summary, np.zeros(3))
