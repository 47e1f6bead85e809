import numpy as np
import pytest

from seqate.designs import BernoulliDesign, EfronDesign, WeiDesign
from seqate.experiment import (
    AssignmentTrace,
    TraceError,
    assignment_uniforms,
    read_trace,
    run_experiment,
    write_trace,
)
from seqate.population import PotentialOutcomes, make_nonadditive_population


class GenericOnly:
    """Wraps a design but hides its kernel spec, forcing the per-unit loop."""

    def __init__(self, inner):
        self.inner = inner

    def next_probability(self, state):
        return self.inner.next_probability(state)


def test_efron_hand_trace():
    pop = PotentialOutcomes([10.0, 20.0], [11.0, 21.0])
    tr = run_experiment(pop, EfronDesign(0.7), uniforms=[0.3, 0.9])
    assert tr.p.tolist() == [0.5, pytest.approx(0.3)]
    assert tr.k.tolist() == [1, 0]
    assert tr.y_obs.tolist() == [11.0, 20.0]


def test_strict_inequality_draw():
    pop = PotentialOutcomes([0.0], [1.0])
    assert run_experiment(pop, BernoulliDesign(0.5), uniforms=[0.5]).k[0] == 0
    assert run_experiment(pop, BernoulliDesign(0.5), uniforms=[0.4999]).k[0] == 1


def test_near_deterministic_constant_design():
    pop = PotentialOutcomes(np.zeros(200), np.full(200, 7.0))
    tr = run_experiment(pop, BernoulliDesign(1 - 1e-9), seed=3)
    assert np.all(tr.y_obs == 7.0)


def test_same_seed_identical_trace(tmp_path):
    pop = make_nonadditive_population(300, seed=1)
    a = run_experiment(pop, WeiDesign(), seed=42)
    b = run_experiment(pop, WeiDesign(), seed=42)
    write_trace(a, tmp_path / "a.csv")
    write_trace(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    back = read_trace(tmp_path / "a.csv")
    assert np.array_equal(back.p, a.p) and np.array_equal(back.k, a.k)
    assert np.array_equal(back.y_obs, a.y_obs)


@pytest.mark.parametrize("design", [WeiDesign(0.01), WeiDesign(0.2), EfronDesign(0.7),
                                    EfronDesign(0.5), BernoulliDesign(0.3)])
def test_kernel_path_matches_generic_loop(design):
    pop = make_nonadditive_population(500, seed=9)
    u = assignment_uniforms(77, pop.n)
    fast = run_experiment(pop, design, uniforms=u)
    slow = run_experiment(pop, GenericOnly(design), uniforms=u)
    assert np.array_equal(fast.p, slow.p)
    assert np.array_equal(fast.k, slow.k)
    assert np.array_equal(fast.y_obs, slow.y_obs)


@pytest.mark.parametrize("design", [WeiDesign(), EfronDesign(0.7), BernoulliDesign()])
def test_trace_consistent_with_population(design):
    pop = make_nonadditive_population(1000, seed=2)
    tr = run_experiment(pop, design, seed=5)
    assert tr.n == pop.n
    tr.check_against(pop)
    assert tr.n0 + tr.n1 == tr.n


def test_balance_under_efron_and_wei():
    pop = PotentialOutcomes(np.zeros(100_000), np.ones(100_000))
    efron = run_experiment(pop, EfronDesign(0.7), seed=1)
    assert abs(efron.n1 / efron.n - 0.5) < 0.01
    wei = run_experiment(pop, WeiDesign(0.01), seed=1)
    assert abs(wei.p.mean() - 0.5) < 0.01


def test_trace_validation():
    with pytest.raises(TraceError):
        AssignmentTrace([0.5, 1.0], [1, 0], [1.0, 2.0])
    with pytest.raises(TraceError):
        AssignmentTrace([0.5], [2], [1.0])
    with pytest.raises(TraceError):
        AssignmentTrace([0.5, 0.5], [1], [1.0])
    pop = PotentialOutcomes([1.0, 2.0], [3.0, 4.0])
    tr = AssignmentTrace([0.5, 0.5], [1, 1], [3.0, 2.0])
    with pytest.raises(TraceError):
        tr.check_against(pop)
    with pytest.raises(TraceError):
        run_experiment(pop, BernoulliDesign(), uniforms=[0.1])


def test_read_trace_rejects_bad_header(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("p,k,y\n0.5,1,2\n")
    with pytest.raises(TraceError):
        read_trace(path)
