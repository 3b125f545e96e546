import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from apsim.cam import CamArray, ContractError, KeyMask, TagVector, cam_new, compare, load_field, read_field, write


def bits(s):
    """MSB-left string to LSB-first list."""
    return [int(c) for c in reversed(s)]


def test_compare_example():
    cam = cam_new(3, 3)
    for i, row in enumerate(["011", "001", "111"]):
        cam.cells[i] = bits(row)
    tags = compare(cam, KeyMask(bits("001"), bits("011")))
    assert tags.bits.tolist() == [0, 1, 0] and tags.popcount == 1


def test_zero_mask_matches_everything():
    cam = cam_new(5, 4)
    cam.cells[:] = np.random.default_rng(0).integers(0, 2, (5, 4))
    assert compare(cam, KeyMask([1, 0, 1, 0], [0, 0, 0, 0])).popcount == 5


def test_key_canonicalised_under_mask():
    a = KeyMask([1, 1, 1], [1, 0, 0])
    b = KeyMask([1, 0, 0], [1, 0, 0])
    assert a == b and a.key.tolist() == [1, 0, 0]


def test_write_only_tagged_rows_and_counts():
    cam = cam_new(4, 3)
    cam.cells[:, 0] = [1, 0, 1, 0]
    compare(cam, KeyMask.sparse(3, {0: 1}))
    write(cam, KeyMask.sparse(3, {1: 1, 2: 0}))
    assert cam.cells[:, 1].tolist() == [1, 0, 1, 0]
    assert cam.write_counts.sum() == 4  # 2 rows x 2 columns driven
    assert cam.flip_counts.sum() == 2  # column 2 already held 0
    # untagged write is a no-op
    write(cam, KeyMask.sparse(3, {0: 1}), TagVector(np.zeros(4)))
    assert cam.write_counts.sum() == 4


def test_load_and_read_are_free():
    cam = cam_new(3, 8)
    load_field(cam, range(0, 4), [1, 15, 6])
    assert [read_field(cam, range(0, 4), i) for i in range(3)] == [1, 15, 6]
    assert cam.write_counts.sum() == 0
    assert cam.read_all(range(0, 4)) == [1, 15, 6]


def test_contract_errors():
    cam = cam_new(2, 4)
    with pytest.raises(ContractError):
        compare(cam, KeyMask([0, 1], [1, 1]))
    with pytest.raises(ContractError):
        load_field(cam, range(0, 2), [4, 0])
    with pytest.raises(ContractError):
        load_field(cam, range(0, 2), [1])
    with pytest.raises(ContractError):
        read_field(cam, range(3, 6), 0)
    with pytest.raises(ContractError):
        read_field(cam, range(0, 2), 2)
    with pytest.raises(ContractError):
        KeyMask([2, 0], [1, 1])
    with pytest.raises(ContractError):
        CamArray(0, 3)
    with pytest.raises(ContractError):
        KeyMask.sparse(3, {3: 1})


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12), st.integers(1, 10), st.data())
def test_compare_matches_brute_force(rows, cols, data):
    cells = data.draw(arrays(np.uint8, (rows, cols), elements=st.integers(0, 1)))
    key = data.draw(arrays(np.uint8, cols, elements=st.integers(0, 1)))
    mask = data.draw(arrays(np.uint8, cols, elements=st.integers(0, 1)))
    cam = CamArray(rows, cols)
    cam.cells[:] = cells
    tags = cam.compare(KeyMask(key, mask))
    want = [int(all(cells[r, c] == key[c] for c in range(cols) if mask[c])) for r in range(rows)]
    assert tags.bits.tolist() == want
    assert tags.popcount == sum(want)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10), st.integers(1, 8), st.data())
def test_write_then_compare_hits_tagged_rows(rows, cols, data):
    cells = data.draw(arrays(np.uint8, (rows, cols), elements=st.integers(0, 1)))
    tags = data.draw(arrays(np.uint8, rows, elements=st.integers(0, 1)))
    key = data.draw(arrays(np.uint8, cols, elements=st.integers(0, 1)))
    mask = data.draw(arrays(np.uint8, cols, elements=st.integers(0, 1)))
    cam = CamArray(rows, cols)
    cam.cells[:] = cells
    km = KeyMask(key, mask)
    cam.write(km, TagVector(tags))
    hit = cam.compare(km).bits
    assert np.all(hit[tags == 1] == 1)
    # cells outside the mask or in untagged rows are untouched
    untouched = np.ones((rows, cols), bool)
    untouched[np.ix_(tags == 1, mask == 1)] = False
    assert np.array_equal(cam.cells[untouched], cells[untouched])
    assert cam.write_counts.sum() == int(tags.sum()) * int(mask.sum())
    assert np.all(cam.flip_counts <= cam.write_counts)
