"""Path management tests: negotiation, connection IDs, validation."""

import random

import pytest

from mpquicsim.path import (
    CidRegistry,
    PathManager,
    PathState,
    negotiate,
)
from mpquicsim.sendtrack import MULTI_SPACE, SINGLE_SPACE, ProtocolError


def mgr() -> PathManager:
    return PathManager(random.Random(1))


def test_negotiate_prefers_multi_space():
    assert negotiate({SINGLE_SPACE, MULTI_SPACE}, {SINGLE_SPACE, MULTI_SPACE}) == MULTI_SPACE
    assert negotiate({MULTI_SPACE}, {SINGLE_SPACE, MULTI_SPACE}) == MULTI_SPACE


def test_negotiate_falls_back_to_single_space():
    assert negotiate({SINGLE_SPACE}, {SINGLE_SPACE, MULTI_SPACE}) == SINGLE_SPACE
    assert negotiate({SINGLE_SPACE, MULTI_SPACE}, {SINGLE_SPACE}) == SINGLE_SPACE


def test_negotiate_disjoint_disables_multipath():
    assert negotiate({SINGLE_SPACE}, {MULTI_SPACE}) is None
    assert negotiate(set(), {MULTI_SPACE}) is None


def test_cid_registry_take_lowest_unused():
    reg = CidRegistry()
    reg.on_new_connection_id(2, b"bb")
    reg.on_new_connection_id(0, b"aa")
    reg.on_new_connection_id(1, b"cc")
    assert reg.take() == 0
    assert reg.take() == 1
    assert reg.take() == 2
    with pytest.raises(ProtocolError):
        reg.take()


def test_cid_registry_rejects_reissue_with_new_value():
    reg = CidRegistry()
    reg.on_new_connection_id(0, b"aa")
    reg.on_new_connection_id(0, b"aa")  # identical retransmission is fine
    with pytest.raises(ProtocolError):
        reg.on_new_connection_id(0, b"zz")


def test_cid_registry_active_limit():
    reg = CidRegistry(active_limit=2)
    reg.on_new_connection_id(0, b"aa")
    reg.on_new_connection_id(1, b"bb")
    with pytest.raises(ProtocolError):
        reg.on_new_connection_id(2, b"cc")


def test_validation_round_trip():
    pm = mgr()
    pm.add_path(1)
    data = pm.start_validation(1, now=0.5)
    assert len(data) == 8
    assert pm.get(1).state is PathState.PROBING
    assert not pm.on_response(1, b"\x00" * 8, now=0.6)  # wrong echo ignored
    assert pm.get(1).state is PathState.PROBING
    assert pm.on_response(1, data, now=0.7)
    assert pm.get(1).state is PathState.VALIDATED
    assert pm.validated_rtt_hint(1, now=1.0) == pytest.approx(0.2)


def test_start_validation_rejects_validated_path():
    pm = mgr()
    pm.add_path(1)
    pm.mark_validated(1, now=0.1)
    with pytest.raises(ProtocolError):
        pm.start_validation(1, now=0.2)


def test_challenge_creates_unknown_path_and_queues_response():
    pm = mgr()
    pm.on_challenge(3, b"12345678")
    assert pm.take_pending_response(3) == b"12345678"
    assert pm.take_pending_response(3) is None


def test_usable_paths_sorted_and_filtered():
    pm = mgr()
    pm.add_path(0)
    pm.add_path(1)
    pm.add_path(2)
    pm.mark_validated(2, now=0.1)
    pm.mark_validated(0, now=0.1)
    pm.mark_active(0)
    assert pm.usable_paths() == [0, 2]
    pm.start_validation(1, now=0.2)
    assert pm.usable_paths() == [0, 2]  # probing is not usable for data


def test_unknown_path_raises():
    pm = mgr()
    with pytest.raises(ProtocolError):
        pm.get(9)
