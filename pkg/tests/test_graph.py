"""Factor graph runtime: node rules, schedules, marginals vs quadrature."""

import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from hlcbayes import graph as fg
from hlcbayes.messages import (
    DeltaMessage,
    GammaMessage,
    GaussianMessage,
)


def _two_input_equality():
    g = fg.Graph()
    for e in ("a", "b", "c"):
        g.add_edge(e)
    g.add_node(fg.FactorNode("pa", fg.PRIOR, ("a",), value=GaussianMessage(0.0, 1.0)))
    g.add_node(fg.FactorNode("pb", fg.PRIOR, ("b",), value=GaussianMessage(0.0, 1.0)))
    g.add_node(fg.FactorNode("eq", fg.EQUALITY, ("a", "b", "c")))
    g.seed_sources()
    return g


class TestNodeRules:
    def test_equality_fuses_equal_precisions(self):
        g = _two_input_equality()
        out = fg.compute_message(g, "eq", "c")
        assert out.mean == pytest.approx(0.0, abs=1e-15)
        assert out.variance == pytest.approx(0.5, rel=1e-15)

    def test_equality_missing_input(self):
        g = fg.Graph()
        for e in ("a", "b", "c"):
            g.add_edge(e)
        g.add_node(fg.FactorNode("pa", fg.PRIOR, ("a",), value=GaussianMessage(0.0, 1.0)))
        g.add_node(fg.FactorNode("eq", fg.EQUALITY, ("a", "b", "c")))
        g.seed_sources()
        with pytest.raises(fg.MissingInputError):
            fg.compute_message(g, "eq", "c")

    def test_equality_delta_shortcut(self):
        # A clamped copy fixes all copies, so one missing branch is fine.
        g = fg.Graph()
        for e in ("a", "b", "c"):
            g.add_edge(e)
        g.add_node(fg.FactorNode("clamp", fg.CLAMP, ("a",), value=2.5))
        g.add_node(fg.FactorNode("eq", fg.EQUALITY, ("a", "b", "c")))
        g.seed_sources()
        out = fg.compute_message(g, "eq", "c")
        assert out == DeltaMessage(2.5)

    def test_addition_forward(self):
        g = fg.Graph()
        for e in ("x", "y", "z"):
            g.add_edge(e)
        g.add_node(fg.FactorNode("px", fg.PRIOR, ("x",), value=GaussianMessage(1.0, 2.0)))
        g.add_node(fg.FactorNode("py", fg.PRIOR, ("y",), value=GaussianMessage(3.0, 4.0)))
        g.add_node(fg.FactorNode("add", fg.ADDITION, ("x", "y", "z")))
        g.seed_sources()
        out = fg.compute_message(g, "add", "z")
        assert out.mean == pytest.approx(4.0)
        assert out.variance == pytest.approx(6.0)

    def test_addition_backward_matches_quadrature(self):
        # Frozen oracle: brute-force 2-d quadrature of the constraint
        # z = x + y with z ~ N(4, 6) and y ~ N(3, 4) gives the message
        # toward x mean 1.0 and variance 10.0 (to 1e-12).
        g = fg.Graph()
        for e in ("x", "y", "z"):
            g.add_edge(e)
        g.add_node(fg.FactorNode("py", fg.PRIOR, ("y",), value=GaussianMessage(3.0, 4.0)))
        g.add_node(fg.FactorNode("pz", fg.PRIOR, ("z",), value=GaussianMessage(4.0, 6.0)))
        g.add_node(fg.FactorNode("add", fg.ADDITION, ("x", "y", "z")))
        g.seed_sources()
        out = fg.compute_message(g, "add", "x")
        assert out.mean == pytest.approx(1.0, abs=1e-9)
        assert out.variance == pytest.approx(10.0, rel=1e-9)

    def test_noise_node_needs_clamped_scale_for_sum_product(self):
        g = fg.Graph()
        for e in ("out", "mean", "scale"):
            g.add_edge(e)
        g.add_node(fg.FactorNode("pm", fg.PRIOR, ("mean",), value=GaussianMessage(0.0, 1.0)))
        g.add_node(
            fg.FactorNode("ps", fg.PRIOR, ("scale",), value=GammaMessage(2.0, 2.0))
        )
        g.add_node(
            fg.FactorNode("noise", fg.GAUSSIAN_NOISE, ("out", "mean", "scale"), scale_kind="precision")
        )
        g.seed_sources()
        with pytest.raises(fg.UnsupportedRuleError):
            fg.compute_message(g, "noise", "out")

    def test_noise_scale_sum_product_unsupported(self):
        g = fg.Graph()
        for e in ("out", "mean", "scale"):
            g.add_edge(e)
        g.add_node(fg.FactorNode("pm", fg.PRIOR, ("mean",), value=GaussianMessage(0.0, 1.0)))
        g.add_node(fg.FactorNode("cs", fg.CLAMP, ("scale",), value=2.0))
        g.add_node(
            fg.FactorNode("noise", fg.GAUSSIAN_NOISE, ("out", "mean", "scale"), scale_kind="variance")
        )
        g.seed_sources()
        with pytest.raises(fg.UnsupportedRuleError):
            fg.compute_message(g, "noise", "scale")


class TestMarginal:
    def test_forward_with_vague_backward(self):
        e = fg.Edge("e", "e")
        e.forward = GaussianMessage(0.0, 1.0)
        e.backward = GaussianMessage.vague()
        out = fg.marginal(e)
        assert out == GaussianMessage(0.0, 1.0)

    def test_colliding_gaussians(self):
        e = fg.Edge("e", "e")
        e.forward = GaussianMessage(1.0, 2.0)
        e.backward = GaussianMessage(3.0, 2.0)
        out = fg.marginal(e)
        assert out.mean == pytest.approx(2.0)
        assert out.variance == pytest.approx(1.0)

    def test_colliding_gammas(self):
        e = fg.Edge("e", "e")
        e.forward = GammaMessage(10.0, 1.0)
        e.backward = GammaMessage(110.45, 117.5)
        out = fg.marginal(e)
        assert out.shape == pytest.approx(119.45)
        assert out.rate == pytest.approx(118.5)

    def test_missing_direction_errors(self):
        e = fg.Edge("e", "e")
        e.forward = GaussianMessage(0.0, 1.0)
        with pytest.raises(fg.MissingInputError):
            fg.marginal(e)


def _build_toy_chain():
    """Three-factor chain with a branch: x1 -> x2, x5 = x2 + x3, x4 = x5 + noise.

    x1 ~ N(1, 2); x2 | x1 ~ N(x1, 0.5); x3 ~ N(-2, 3); x4 | x5 ~ N(x5, 1.5),
    observed x4 = 0.8.
    """
    g = fg.Graph()
    for e in ("x1", "x2", "x3", "x4", "x5", "va", "vc"):
        g.add_edge(e)
    g.add_node(fg.FactorNode("p1", fg.PRIOR, ("x1",), value=GaussianMessage(1.0, 2.0)))
    g.add_node(fg.FactorNode("ca", fg.CLAMP, ("va",), value=0.5))
    g.add_node(fg.FactorNode("fa", fg.GAUSSIAN_NOISE, ("x2", "x1", "va"), scale_kind="variance"))
    g.add_node(fg.FactorNode("p3", fg.PRIOR, ("x3",), value=GaussianMessage(-2.0, 3.0)))
    g.add_node(fg.FactorNode("fb", fg.ADDITION, ("x2", "x3", "x5")))
    g.add_node(fg.FactorNode("cc", fg.CLAMP, ("vc",), value=1.5))
    g.add_node(fg.FactorNode("fc", fg.GAUSSIAN_NOISE, ("x4", "x5", "vc"), scale_kind="variance"))
    g.add_node(fg.FactorNode("c4", fg.CLAMP, ("x4",), value=0.8))
    g.seed_sources()
    schedule = fg.Schedule(
        [
            fg.ScheduleStep("fa", "x2"),
            fg.ScheduleStep("fb", "x5"),
            fg.ScheduleStep("fc", "x5"),
        ]
    )
    schedule.validate(g)
    return g, schedule


class TestScheduleExecution:
    # Frozen quadrature oracle for the toy chain (dense Simpson grids over
    # x1, x2 and the x5 axis): mean 0.4142857142857143, variance
    # 1.1785714285714286. The analytic values are 29/70 and 33/28.
    ORACLE_MEAN = 0.4142857142857143
    ORACLE_VAR = 1.1785714285714286

    def test_toy_chain_marginal_matches_quadrature(self):
        g, schedule = _build_toy_chain()
        fg.execute_schedule(g, schedule)
        marg = fg.marginal(g.edges["x5"])
        assert marg.mean == pytest.approx(self.ORACLE_MEAN, abs=1e-6)
        assert marg.variance == pytest.approx(self.ORACLE_VAR, rel=1e-4)

    def test_empty_schedule_leaves_graph_unchanged(self):
        g, _ = _build_toy_chain()
        before = {
            eid: (e.forward, e.backward, e.marginal) for eid, e in g.edges.items()
        }
        fg.execute_schedule(g, fg.Schedule([]))
        after = {eid: (e.forward, e.backward, e.marginal) for eid, e in g.edges.items()}
        assert before == after

    def test_reexecution_is_idempotent(self):
        g, schedule = _build_toy_chain()
        fg.execute_schedule(g, schedule)
        snapshot = {
            eid: (e.forward, e.backward) for eid, e in g.edges.items()
        }
        fg.execute_schedule(g, schedule)
        for eid, (fwd, bwd) in snapshot.items():
            edge = g.edges[eid]
            for old, new in ((fwd, edge.forward), (bwd, edge.backward)):
                if isinstance(old, GaussianMessage) and not old.improper:
                    assert abs(new.mean - old.mean) < 1e-12
                    assert abs(new.variance - old.variance) < 1e-12
                else:
                    assert new == old

    def test_all_stored_messages_valid(self):
        g, schedule = _build_toy_chain()
        fg.execute_schedule(g, schedule)
        for edge in g.edges.values():
            for msg in (edge.forward, edge.backward, edge.marginal):
                if isinstance(msg, GaussianMessage) and not msg.improper:
                    assert math.isfinite(msg.mean)
                    assert msg.variance > 0.0

    def test_step_errors_carry_the_index(self):
        g, _ = _build_toy_chain()
        bad = fg.Schedule([fg.ScheduleStep("fb", "x5"), fg.ScheduleStep("fc", "x5")])
        with pytest.raises(fg.ScheduleExecutionError) as err:
            fg.execute_schedule(g, bad)
        assert err.value.step_index == 0

    def test_validate_rejects_unknown_node(self):
        g, _ = _build_toy_chain()
        with pytest.raises(fg.GraphError):
            fg.Schedule([fg.ScheduleStep("nope", "x5")]).validate(g)


class TestRandomTreesAgainstQuadrature:
    """Random chains x1 -> x2 -> ... with an observation at the end."""

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_chain_marginal(self, seed):
        rng = np.random.default_rng(seed)
        m0, v0 = rng.uniform(-3, 3), rng.uniform(0.5, 3.0)
        va, vc = rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)
        obs = rng.uniform(-3, 3)

        g = fg.Graph()
        for e in ("x1", "x2", "x3", "va", "vc"):
            g.add_edge(e)
        g.add_node(fg.FactorNode("p1", fg.PRIOR, ("x1",), value=GaussianMessage(m0, v0)))
        g.add_node(fg.FactorNode("ca", fg.CLAMP, ("va",), value=va))
        g.add_node(fg.FactorNode("fa", fg.GAUSSIAN_NOISE, ("x2", "x1", "va"), scale_kind="variance"))
        g.add_node(fg.FactorNode("cc", fg.CLAMP, ("vc",), value=vc))
        g.add_node(fg.FactorNode("fc", fg.GAUSSIAN_NOISE, ("x3", "x2", "vc"), scale_kind="variance"))
        g.add_node(fg.FactorNode("c3", fg.CLAMP, ("x3",), value=obs))
        g.seed_sources()
        fg.execute_schedule(
            g,
            fg.Schedule([fg.ScheduleStep("fa", "x2"), fg.ScheduleStep("fc", "x2")]),
        )
        marg = fg.marginal(g.edges["x2"])

        # Dense quadrature over x1 for the forward density of x2 times the
        # backward likelihood N(obs | x2, vc).
        x1 = np.linspace(m0 - 12 * math.sqrt(v0), m0 + 12 * math.sqrt(v0), 4001)
        x2 = np.linspace(m0 - 14, m0 + 14, 4001)

        def npdf(x, m, v):
            return np.exp(-0.5 * (x - m) ** 2 / v) / np.sqrt(2 * np.pi * v)

        fwd = trapezoid(
            npdf(x1[None, :], m0, v0) * npdf(x2[:, None], x1[None, :], va), x1, axis=1
        )
        dens = fwd * npdf(obs, x2, vc)
        z = trapezoid(dens, x2)
        mean = trapezoid(dens * x2, x2) / z
        var = trapezoid(dens * x2 * x2, x2) / z - mean * mean
        assert marg.mean == pytest.approx(mean, abs=1e-6)
        assert marg.variance == pytest.approx(var, rel=1e-4)


class TestDump:
    def test_dump_lists_everything(self):
        g, schedule = _build_toy_chain()
        text = fg.dump(g, schedule)
        assert "nodes:" in text and "edges:" in text and "steps:" in text
        assert "fa" in text and "x5" in text
        assert "[sum-product]" in text
