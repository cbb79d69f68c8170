import math

import numpy as np
import pytest

from clockbench.simcore import (
    ClockSpec,
    ClusterSpec,
    CollectiveSpec,
    DeadlockError,
    DistSpec,
    NetworkSpec,
    SimInstance,
    run_programs,
)


def quiet_cluster(p, **net):
    return ClusterSpec(
        p=p,
        clock=ClockSpec(skews=tuple([0.0] * p), read_noise_sigma=0.0),
        network=NetworkSpec(**net),
        collectives={"bcast": CollectiveSpec(alpha=1e-5, rounds="one")},
    )


def test_pingpong_arrival_time():
    inst = SimInstance(quiet_cluster(2, base_latency=2e-6), seed=1, perturb=False)
    trace = run_programs(
        inst,
        {
            0: [("send", 1, "ping"), ("recv", 1, "pong")],
            1: [("recv", 0, "ping"), ("send", 0, "pong")],
        },
    )
    recvs = trace.filter("recv")
    assert recvs[0].rank == 1 and recvs[0].true_time == pytest.approx(2e-6)
    assert recvs[1].rank == 0 and recvs[1].true_time == pytest.approx(4e-6)


def programs_for_dissemination(p, rounds):
    progs = {}
    for r in range(p):
        steps = []
        for k in range(rounds):
            steps.append(("send", (r + 2**k) % p, ("bar", k)))
            steps.append(("recv", (r - 2**k) % p, ("bar", k)))
        progs[r] = steps
    return progs


def test_dissemination_barrier_p4():
    inst = SimInstance(quiet_cluster(4, base_latency=2e-6), seed=1, perturb=False)
    trace = run_programs(inst, programs_for_dissemination(4, 2))
    assert np.allclose(inst.now, 2 * 2e-6)


def test_determinism_same_seed_same_trace():
    cluster = quiet_cluster(2, base_latency=2e-6, jitter=DistSpec("exponential", mean=1e-6))
    progs = {
        0: [("send", 1, 0), ("recv", 1, 1), ("read_clock",), ("compute", 1e-6), ("collective", "bcast", 8)],
        1: [("recv", 0, 0), ("send", 0, 1), ("read_clock",), ("collective", "bcast", 8)],
    }
    t1 = run_programs(SimInstance(cluster, seed=42), progs)
    t2 = run_programs(SimInstance(cluster, seed=42), progs)
    assert [(r.rank, r.kind, r.true_time, r.local_time) for r in t1.records] == [
        (r.rank, r.kind, r.true_time, r.local_time) for r in t2.records
    ]


def test_deadlock_names_blocked_ranks():
    inst = SimInstance(quiet_cluster(2), seed=1)
    with pytest.raises(DeadlockError) as err:
        run_programs(inst, {0: [("recv", 1, 0)], 1: [("recv", 0, 0)]})
    assert "rank 0" in str(err.value) and "rank 1" in str(err.value)


def test_causality_recv_after_send():
    cluster = quiet_cluster(2, base_latency=2e-6, jitter=DistSpec("exponential", mean=5e-7))
    inst = SimInstance(cluster, seed=9)
    trace = run_programs(
        inst,
        {
            0: [("send", 1, i) for i in range(20)],
            1: [("recv", 0, i) for i in range(20)],
        },
    )
    sends = [r.true_time for r in trace.filter("send")]
    recvs = [r.true_time for r in trace.filter("recv")]
    for s, rv in zip(sends, recvs):
        assert rv >= s + 2e-6


def test_collective_rendezvous_and_ground_truth():
    inst = SimInstance(quiet_cluster(3, base_latency=1e-6), seed=2, perturb=False)
    progs = {
        0: [("compute", 5e-6), ("collective", "bcast", 64)],
        1: [("collective", "bcast", 64)],
        2: [("compute", 2e-6), ("collective", "bcast", 64)],
    }
    run_programs(inst, progs)
    rec = inst.collective_log[-1]
    assert rec.ground_truth == pytest.approx(5e-6 + 1e-5)
    assert np.allclose(inst.now, 5e-6 + 1e-5)


def test_wait_until_local():
    inst = SimInstance(quiet_cluster(1), seed=3, perturb=False)
    run_programs(inst, {0: [("wait_until_local", 1e-3), ("read_clock",)]})
    assert inst.now[0] == pytest.approx(1e-3, abs=2e-9)


def test_trace_csv_roundtrip(tmp_path):
    inst = SimInstance(quiet_cluster(2), seed=4, perturb=False)
    trace = run_programs(inst, {0: [("read_clock",), ("send", 1, 0)], 1: [("recv", 0, 0)]})
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "rank,event_kind,true_time,local_time"
    assert len(lines) == len(trace.records) + 1
    for line in lines[1:]:
        rank, kind, tt, lt = line.split(",")
        int(rank)
        float(tt)
        assert kind in {"clock_read", "send", "recv"}


def test_mpirun_factor_resamples_offsets():
    cluster = quiet_cluster(4)
    a = SimInstance(cluster, seed=1, perturb=True)
    b = SimInstance(cluster, seed=2, perturb=True)
    assert a.clocks[0].offset0 != b.clocks[0].offset0
    assert a.latency_factor != b.latency_factor
    # same seed => identical parameters
    c = SimInstance(cluster, seed=1, perturb=True)
    assert c.clocks[0].offset0 == a.clocks[0].offset0
    assert math.isclose(c.latency_factor, a.latency_factor)
