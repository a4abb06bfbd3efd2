"""Forney-style factor graph runtime with a schedule executor.

Edges carry variables, nodes carry factors, and inference is a sequence
of message updates replayed from an explicit :class:`Schedule`. Two update
rules are supported per step: exact sum-product, and the mean-field
variational rule that extracts moments from the posterior summaries
arriving on the node's other edges.

Graphs here are static structures. Builders assemble a graph once, a
schedule names the message order, and ``execute_schedule`` replays it.
Schedules are plain data so they can be validated, dumped and tested like
any other value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .messages import (
    DeltaMessage,
    GammaMessage,
    GaussianMessage,
    InverseGammaMessage,
    InvalidMessageError,
    Message,
    product,
)

SUM_PRODUCT = "sum-product"
VARIATIONAL = "variational"

EQUALITY = "equality"
ADDITION = "addition"
GAUSSIAN_NOISE = "gaussian-noise"
ZUREK = "zurek"
CLAMP = "clamp"
PRIOR = "prior"

_ARITY = {EQUALITY: 3, ADDITION: 3, GAUSSIAN_NOISE: 3, ZUREK: 3, CLAMP: 1, PRIOR: 1}


class GraphError(Exception):
    """Structural problem in a graph, node or schedule."""


class MissingInputError(GraphError):
    """A rule fired before its required incoming messages existed."""


class UnsupportedRuleError(GraphError):
    """No update rule registered for this node kind and direction."""


class ScheduleExecutionError(GraphError):
    """A step failed during schedule execution; carries the step index."""

    def __init__(self, step_index: int, step: "ScheduleStep", cause: Exception):
        super().__init__(f"step {step_index} ({step.node_id} -> {step.edge_id}): {cause}")
        self.step_index = step_index
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class PairMessage:
    """Two scalar messages traveling together on one edge.

    The loss-curve node exposes its slope and offset through a single
    parameter edge; the pair keeps both component beliefs while equality
    nodes combine them componentwise.
    """

    first: Message
    second: Message


@dataclass
class Edge:
    """A variable of the model. Messages flow in both directions.

    ``forward`` is the message emitted by the tail node, ``backward`` the
    one emitted by the head node. ``marginal`` caches the product of the
    two whenever both exist.
    """

    id: str
    name: str
    tail: str | None = None
    head: str | None = None
    forward: Message | PairMessage | None = None
    backward: Message | PairMessage | None = None
    marginal: Message | PairMessage | None = None

    def other_end(self, node_id: str) -> str | None:
        if node_id == self.tail:
            return self.head
        if node_id == self.head:
            return self.tail
        raise GraphError(f"node {node_id} is not an endpoint of edge {self.id}")

    def incoming(self, node_id: str) -> Message | PairMessage | None:
        """Message arriving at ``node_id`` along this edge."""
        if node_id == self.tail:
            return self.backward
        if node_id == self.head:
            return self.forward
        raise GraphError(f"node {node_id} is not an endpoint of edge {self.id}")

    def outgoing(self, node_id: str) -> Message | PairMessage | None:
        """Message emitted by ``node_id`` along this edge."""
        if node_id == self.tail:
            return self.forward
        if node_id == self.head:
            return self.backward
        raise GraphError(f"node {node_id} is not an endpoint of edge {self.id}")

    def set_outgoing(self, node_id: str, msg: Message | PairMessage) -> None:
        """Store the message emitted by ``node_id`` along this edge."""
        if node_id == self.tail:
            self.forward = msg
        elif node_id == self.head:
            self.backward = msg
        else:
            raise GraphError(f"node {node_id} is not an endpoint of edge {self.id}")

    def belief(self) -> Message | PairMessage:
        """Product of whatever directed messages are present.

        This is the working belief variational rules read. It degrades to
        a single directed message on open chain ends.
        """
        if self.forward is not None and self.backward is not None:
            return _pairwise_product(self.forward, self.backward)
        if self.forward is not None:
            return self.forward
        if self.backward is not None:
            return self.backward
        raise MissingInputError(f"edge {self.id} carries no messages yet")


@dataclass
class FactorNode:
    """A factor. ``edge_ids`` is role-ordered per kind.

    equality:       (any, any, any)
    addition:       (in1, in2, out) with out = in1 + in2
    gaussian-noise: (out, mean, scale); ``scale_kind`` says whether the
                    scale edge carries a precision or a variance
    zurek:          (out, in, params) with out = L(in; slope, offset)
    clamp / prior:  (edge,)
    """

    id: str
    kind: str
    edge_ids: tuple[str, ...]
    value: object = None  # clamp point, pair of points, or prior message
    scale_kind: str | None = None  # "precision" | "variance"
    level_for_slope: float | None = None  # observed level that picks the loss branch
    anchor_input: float | None = None  # linearization point for the loss input

    def __post_init__(self):
        expected = _ARITY[self.kind]
        if len(self.edge_ids) != expected:
            raise GraphError(
                f"{self.kind} node {self.id} needs {expected} edges, got {len(self.edge_ids)}"
            )
        if self.kind == GAUSSIAN_NOISE and self.scale_kind not in ("precision", "variance"):
            raise GraphError(f"gaussian-noise node {self.id} needs a scale_kind")


@dataclass(frozen=True)
class ScheduleStep:
    node_id: str
    edge_id: str
    rule: str = SUM_PRODUCT


@dataclass
class Schedule:
    steps: list[ScheduleStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def validate(self, graph: "Graph") -> None:
        """Check that every step targets a real node/edge pairing."""
        for i, step in enumerate(self.steps):
            if step.node_id not in graph.nodes:
                raise GraphError(f"step {i}: unknown node {step.node_id}")
            node = graph.nodes[step.node_id]
            if step.edge_id not in node.edge_ids:
                raise GraphError(
                    f"step {i}: edge {step.edge_id} not attached to node {step.node_id}"
                )
            if step.rule not in (SUM_PRODUCT, VARIATIONAL):
                raise GraphError(f"step {i}: unknown rule {step.rule}")


class Graph:
    """A static factor graph plus the mutable messages on its edges."""

    def __init__(self):
        self.nodes: dict[str, FactorNode] = {}
        self.edges: dict[str, Edge] = {}

    def add_edge(self, edge_id: str, name: str | None = None) -> Edge:
        if edge_id in self.edges:
            raise GraphError(f"duplicate edge id {edge_id}")
        edge = Edge(id=edge_id, name=name or edge_id)
        self.edges[edge_id] = edge
        return edge

    def add_node(self, node: FactorNode) -> FactorNode:
        if node.id in self.nodes:
            raise GraphError(f"duplicate node id {node.id}")
        for slot, edge_id in enumerate(node.edge_ids):
            if edge_id not in self.edges:
                raise GraphError(f"node {node.id} references unknown edge {edge_id}")
            edge = self.edges[edge_id]
            # The tail/head split only anchors which storage slot a node's
            # emission lands in; take the preferred end, else the free one.
            prefer_tail = self._slot_is_outgoing(node, slot)
            if prefer_tail and edge.tail is None:
                edge.tail = node.id
            elif not prefer_tail and edge.head is None:
                edge.head = node.id
            elif edge.tail is None:
                edge.tail = node.id
            elif edge.head is None:
                edge.head = node.id
            else:
                raise GraphError(f"edge {edge_id} already connects two nodes")
        self.nodes[node.id] = node
        return node

    @staticmethod
    def _slot_is_outgoing(node: FactorNode, slot: int) -> bool:
        # Edge direction is only a naming anchor; it fixes which stored
        # slot (forward/backward) a node's emission lands in.
        if node.kind in (CLAMP, PRIOR):
            return True
        if node.kind == ADDITION:
            return slot == 2
        if node.kind == GAUSSIAN_NOISE:
            return slot == 0
        if node.kind == ZUREK:
            return slot == 0
        if node.kind == EQUALITY:
            return slot == 2
        raise GraphError(f"unknown node kind {node.kind}")

    def seed_sources(self) -> None:
        """Push every clamp and prior message onto its edge."""
        for node in self.nodes.values():
            if node.kind in (CLAMP, PRIOR):
                self.edges[node.edge_ids[0]].set_outgoing(node.id, _source_message(node))

    def marginals_refresh(self, edge: Edge) -> None:
        if edge.forward is not None and edge.backward is not None:
            edge.marginal = _pairwise_product(edge.forward, edge.backward)


def _source_message(node: FactorNode) -> Message | PairMessage:
    if node.kind == CLAMP:
        if isinstance(node.value, tuple):
            return PairMessage(DeltaMessage(float(node.value[0])), DeltaMessage(float(node.value[1])))
        return DeltaMessage(float(node.value))
    if node.kind == PRIOR:
        if node.value is None:
            raise GraphError(f"prior node {node.id} has no distribution")
        return node.value
    raise GraphError(f"node {node.id} is not a source")


def _pairwise_product(a: Message | PairMessage, b: Message | PairMessage):
    if isinstance(a, PairMessage) and isinstance(b, PairMessage):
        return PairMessage(product(a.first, b.first), product(a.second, b.second))
    if isinstance(a, PairMessage) or isinstance(b, PairMessage):
        raise InvalidMessageError("cannot multiply a pair message with a scalar message")
    return product(a, b)


def marginal(edge: Edge) -> Message | PairMessage:
    """Normalized product of the two colliding messages on an edge."""
    if edge.forward is None or edge.backward is None:
        raise MissingInputError(
            f"edge {edge.id} is missing a directed message "
            f"(forward={'set' if edge.forward is not None else 'missing'}, "
            f"backward={'set' if edge.backward is not None else 'missing'})"
        )
    return _pairwise_product(edge.forward, edge.backward)


# ---------------------------------------------------------------------------
# Message helpers
# ---------------------------------------------------------------------------


def _as_mean_var(msg: Message) -> tuple[float, float]:
    if isinstance(msg, DeltaMessage):
        return msg.point, 0.0
    if isinstance(msg, GaussianMessage):
        if msg.improper:
            raise MissingInputError("vague Gaussian carries no location")
        return msg.mean, msg.variance
    raise UnsupportedRuleError(f"expected a location message, got {type(msg).__name__}")


def _gaussian_or_delta(mean: float, variance: float) -> Message:
    if variance <= 0.0:
        return DeltaMessage(mean)
    return GaussianMessage(mean, variance)


def _scale_as_variance(node: FactorNode, msg: Message) -> float:
    if not isinstance(msg, DeltaMessage):
        raise UnsupportedRuleError(
            f"sum-product through {node.id} needs a clamped scale edge"
        )
    value = msg.point
    if value <= 0.0:
        raise InvalidMessageError(f"scale value must be > 0, got {value}")
    return 1.0 / value if node.scale_kind == "precision" else value


def _belief_mean_var(msg: Message | PairMessage) -> tuple[float, float]:
    if isinstance(msg, DeltaMessage):
        return msg.point, 0.0
    if isinstance(msg, GaussianMessage):
        if msg.improper:
            raise MissingInputError("vague belief carries no moments")
        return msg.mean, msg.variance
    raise UnsupportedRuleError(f"no moments for {type(msg).__name__}")


def _expected_inverse_scale(node: FactorNode, belief: Message | PairMessage) -> float:
    """E[precision] of the noise, whichever way the scale edge is parametrized."""
    if isinstance(belief, DeltaMessage):
        v = belief.point
        return v if node.scale_kind == "precision" else 1.0 / v
    if isinstance(belief, GammaMessage) and node.scale_kind == "precision":
        return belief.mean()
    if isinstance(belief, InverseGammaMessage) and node.scale_kind == "variance":
        return belief.mean_inverse()
    raise UnsupportedRuleError(
        f"scale edge of {node.id} carries {type(belief).__name__}, "
        f"incompatible with scale_kind={node.scale_kind}"
    )


# ---------------------------------------------------------------------------
# Node update rules
# ---------------------------------------------------------------------------


def compute_message(graph: Graph, node_id: str, out_edge_id: str, rule: str = SUM_PRODUCT):
    """Closed-form outgoing message from ``node_id`` along ``out_edge_id``.

    Sum-product steps consume the directed messages arriving on the other
    edges and integrate them against the factor. Variational steps use the
    same incoming messages as moment sources for the neighboring
    variables' current posteriors.
    """
    node = graph.nodes.get(node_id)
    if node is None:
        raise GraphError(f"unknown node {node_id}")
    if out_edge_id not in node.edge_ids:
        raise GraphError(f"edge {out_edge_id} is not attached to node {node_id}")

    if node.kind in (CLAMP, PRIOR):
        return _source_message(node)
    if node.kind == EQUALITY:
        return _equality_message(graph, node, out_edge_id)
    if node.kind == ADDITION:
        return _addition_message(graph, node, out_edge_id)
    if node.kind == GAUSSIAN_NOISE:
        if rule == VARIATIONAL:
            return _noise_variational(graph, node, out_edge_id)
        return _noise_sum_product(graph, node, out_edge_id)
    if node.kind == ZUREK:
        if rule == VARIATIONAL:
            return _zurek_variational(graph, node, out_edge_id)
        return _zurek_sum_product(graph, node, out_edge_id)
    raise UnsupportedRuleError(f"no rules registered for node kind {node.kind}")


def _incoming(graph: Graph, node: FactorNode, edge_id: str):
    return graph.edges[edge_id].incoming(node.id)


def _equality_message(graph: Graph, node: FactorNode, out_edge_id: str):
    others = [e for e in node.edge_ids if e != out_edge_id]
    incoming = [(_incoming(graph, node, e), e) for e in others]
    present = [(m, e) for m, e in incoming if m is not None]
    # A point mass forces both remaining copies to the same point, so the
    # update may fire before the slower branch has reported.
    for msg, _ in present:
        if isinstance(msg, DeltaMessage):
            deltas = [m for m, _ in present if isinstance(m, DeltaMessage)]
            out = deltas[0]
            for other in deltas[1:]:
                out = product(out, other)
            return out
    if len(present) < len(incoming):
        missing = [e for m, e in incoming if m is None]
        raise MissingInputError(f"equality node {node.id} is missing input on {missing}")
    out = present[0][0]
    for msg, _ in present[1:]:
        out = _pairwise_product(out, msg)
    return out


def _addition_message(graph: Graph, node: FactorNode, out_edge_id: str):
    in1_id, in2_id, out_id = node.edge_ids
    if out_edge_id == out_id:
        a = _incoming(graph, node, in1_id)
        b = _incoming(graph, node, in2_id)
        if a is None or b is None:
            raise MissingInputError(f"addition node {node.id} needs both inputs")
        if isinstance(a, GaussianMessage) and a.improper:
            return GaussianMessage.vague()
        if isinstance(b, GaussianMessage) and b.improper:
            return GaussianMessage.vague()
        m1, v1 = _as_mean_var(a)
        m2, v2 = _as_mean_var(b)
        return _gaussian_or_delta(m1 + m2, v1 + v2)
    # Backward through the constraint out = in1 + in2: the sought input is
    # the output minus the other input, so means subtract and variances add.
    other_in = in2_id if out_edge_id == in1_id else in1_id
    out_msg = _incoming(graph, node, out_id)
    other_msg = _incoming(graph, node, other_in)
    if out_msg is None or other_msg is None:
        raise MissingInputError(
            f"addition node {node.id} needs the output and the opposite input"
        )
    if isinstance(out_msg, GaussianMessage) and out_msg.improper:
        return GaussianMessage.vague()
    if isinstance(other_msg, GaussianMessage) and other_msg.improper:
        return GaussianMessage.vague()
    mo, vo = _as_mean_var(out_msg)
    mi, vi = _as_mean_var(other_msg)
    return _gaussian_or_delta(mo - mi, vo + vi)


def _noise_sum_product(graph: Graph, node: FactorNode, out_edge_id: str):
    out_id, mean_id, scale_id = node.edge_ids
    scale_msg = _incoming(graph, node, scale_id)
    if scale_msg is None:
        raise MissingInputError(f"noise node {node.id} needs its scale message")
    variance = _scale_as_variance(node, scale_msg)
    if out_edge_id == out_id:
        mean_msg = _incoming(graph, node, mean_id)
        if mean_msg is None:
            raise MissingInputError(f"noise node {node.id} needs its mean message")
        m, v = _as_mean_var(mean_msg)
        return GaussianMessage(m, v + variance)
    if out_edge_id == mean_id:
        out_msg = _incoming(graph, node, out_id)
        if out_msg is None:
            raise MissingInputError(f"noise node {node.id} needs its output message")
        m, v = _as_mean_var(out_msg)
        return GaussianMessage(m, v + variance)
    raise UnsupportedRuleError(
        f"sum-product toward the scale edge of {node.id} leaves the closed families; "
        "schedule a variational step instead"
    )


def _variational_moment_source(graph: Graph, node: FactorNode, edge_id: str):
    """The neighbor's current summary on an edge, for moment extraction.

    Mean-field steps read the posterior of each neighboring variable from
    the message arriving at the node, which on parameter chains is the
    current posterior pushed down by the chain equality. The stored edge
    product would double-count the fragment this node itself emitted
    earlier in the sweep.
    """
    msg = graph.edges[edge_id].incoming(node.id)
    if msg is None:
        raise MissingInputError(
            f"variational step at {node.id} needs the incoming message on {edge_id}"
        )
    return msg


def _noise_variational(graph: Graph, node: FactorNode, out_edge_id: str):
    out_id, mean_id, scale_id = node.edge_ids
    if out_edge_id == scale_id:
        # Likelihood kernel in the scale parameter given the neighbors'
        # summaries of output and mean: exp(-E[(out-mean)^2]/2 * precision)
        # times the half-power of the precision.
        mo, vo = _belief_mean_var(_variational_moment_source(graph, node, out_id))
        mm, vm = _belief_mean_var(_variational_moment_source(graph, node, mean_id))
        expected_sq = (mo - mm) ** 2 + vo + vm
        if node.scale_kind == "precision":
            return GammaMessage.likelihood_fragment(1.5, expected_sq / 2.0)
        return InverseGammaMessage.likelihood_fragment(-0.5, expected_sq / 2.0)
    precision = _expected_inverse_scale(
        node, _variational_moment_source(graph, node, scale_id)
    )
    if out_edge_id == out_id:
        mm, _ = _belief_mean_var(_variational_moment_source(graph, node, mean_id))
        return GaussianMessage(mm, 1.0 / precision)
    if out_edge_id == mean_id:
        mo, _ = _belief_mean_var(_variational_moment_source(graph, node, out_id))
        return GaussianMessage(mo, 1.0 / precision)
    raise UnsupportedRuleError(f"unknown edge {out_edge_id} on noise node {node.id}")


# --- loss-curve node -------------------------------------------------------
#
# The node realizes t = L(u) for the piecewise-linear loudness loss
#
#          0            below the hearing threshold,
#   L(u) = a*u + b      in the recruitment band,
#          u            above the recruitment threshold.
#
# Sum-product messages through a piecewise function would leave the
# Gaussian family, so the node works on one linear piece at a time:
#
#   * the slope is picked by the observed level stored in
#     ``level_for_slope`` (slope vs. unity, strict comparison against the
#     recruitment threshold), matching the closed-form gain recursion;
#   * the intercept is anchored so the line passes through the true curve
#     at ``anchor_input`` (the incoming input-level estimate). With
#     anchor x0: t = a*u + L(x0) - a*x0.
#
# Backward through the line: u = (t - c)/a, so an arriving N(mt, vt) on
# the output edge maps to N((mt - c)/a, vt/a^2) on the input edge. With
# the anchor at the current input estimate this reproduces, after the
# downstream equality product, exactly the innovation-form update
# g <- g + K*(s - L(s + g)) of the one-step gain filter, including steps
# where the estimate and the observed level sit on different linear
# pieces. Without an anchor the line of the selected branch itself is
# used.


def _zurek_params(graph: Graph, node: FactorNode) -> tuple[float, float]:
    params_msg = _incoming(graph, node, node.edge_ids[2])
    if params_msg is None:
        raise MissingInputError(f"loss node {node.id} needs its parameter message")
    if not isinstance(params_msg, PairMessage):
        raise UnsupportedRuleError("loss node parameters must travel as a pair")
    a = params_msg.first
    b = params_msg.second
    if not isinstance(a, DeltaMessage) or not isinstance(b, DeltaMessage):
        raise UnsupportedRuleError(
            "sum-product through the loss node needs clamped parameters"
        )
    return a.point, b.point


def _active_line(
    slope: float, offset: float, level: float, anchor: float | None
) -> tuple[float, float]:
    """Slope and intercept of the linear piece in force.

    The branch test compares the observed level against the recruitment
    threshold; the intercept follows the anchor point when one is set.
    """
    a = slope if (slope != 1.0 and level < offset / (1.0 - slope)) else 1.0
    if anchor is None:
        c = offset if a == slope and a != 1.0 else 0.0
    else:
        c = _piecewise_loss(anchor, slope, offset) - a * anchor
    return a, c


def _piecewise_loss(x: float, slope: float, offset: float) -> float:
    if x < -offset / slope:
        return 0.0
    if slope != 1.0 and x < -offset / (slope - 1.0):
        return slope * x + offset
    return x


def _zurek_sum_product(graph: Graph, node: FactorNode, out_edge_id: str):
    out_id, in_id, params_id = node.edge_ids
    slope, offset = _zurek_params(graph, node)
    if out_edge_id == out_id:
        in_msg = _incoming(graph, node, in_id)
        if in_msg is None:
            raise MissingInputError(f"loss node {node.id} needs its input message")
        if isinstance(in_msg, DeltaMessage):
            return DeltaMessage(_piecewise_loss(in_msg.point, slope, offset))
        m, v = _as_mean_var(in_msg)
        level = node.level_for_slope if node.level_for_slope is not None else m
        anchor = node.anchor_input if node.anchor_input is not None else m
        a, c = _active_line(slope, offset, level, anchor)
        return _gaussian_or_delta(a * m + c, a * a * v)
    if out_edge_id == in_id:
        out_msg = _incoming(graph, node, out_id)
        if out_msg is None:
            raise MissingInputError(f"loss node {node.id} needs its output message")
        if node.level_for_slope is None:
            raise UnsupportedRuleError(
                f"loss node {node.id} needs level_for_slope to invert a linear piece"
            )
        a, c = _active_line(slope, offset, node.level_for_slope, node.anchor_input)
        m, v = _as_mean_var(out_msg)
        return _gaussian_or_delta((m - c) / a, v / (a * a))
    raise UnsupportedRuleError(
        "sum-product toward the loss parameters is not closed form; "
        "schedule a variational step instead"
    )


def _pair_moments(msg: Message | PairMessage) -> tuple[float, float, float, float]:
    if not isinstance(msg, PairMessage):
        raise UnsupportedRuleError("parameter edge must carry a pair message")
    ma, va = _belief_mean_var(msg.first)
    mb, vb = _belief_mean_var(msg.second)
    return ma, va, mb, vb


def _zurek_variational(graph: Graph, node: FactorNode, out_edge_id: str):
    out_id, in_id, params_id = node.edge_ids
    e_slope, v_slope, e_offset, v_offset = _pair_moments(
        _variational_moment_source(graph, node, params_id)
    )
    mu, vu = _belief_mean_var(_variational_moment_source(graph, node, in_id))
    level = node.level_for_slope if node.level_for_slope is not None else mu

    flat = level < -e_offset / e_slope
    recruit = (not flat) and (e_slope != 1.0 and level < e_offset / (1.0 - e_slope))

    if out_edge_id == out_id:
        # Push the input belief through the active piece, widening it by
        # the parameter uncertainty.
        if flat:
            return DeltaMessage(0.0)
        if recruit:
            mean = e_slope * mu + e_offset
            e_u2 = mu * mu + vu
            e_a2 = e_slope * e_slope + v_slope
            var = e_a2 * e_u2 - (e_slope * mu) ** 2 + v_offset
            return _gaussian_or_delta(mean, var)
        return _gaussian_or_delta(mu, vu)

    if out_edge_id == params_id:
        # Likelihood kernels for slope and offset given the innovation
        # arriving on the output edge. Outside the recruitment band the
        # curve does not depend on them, so the messages are vague.
        out_msg = _incoming(graph, node, out_id)
        if out_msg is None:
            raise MissingInputError(
                f"loss node {node.id} needs the incoming output message"
            )
        if flat or not recruit:
            return PairMessage(GaussianMessage.vague(), GaussianMessage.vague())
        mt, vt = _belief_mean_var(out_msg)
        if vt <= 0.0:
            raise UnsupportedRuleError(
                "parameter update needs a noisy output message; clamp reached the loss node"
            )
        e_u2 = mu * mu + vu
        if e_u2 <= 0.0:
            return PairMessage(GaussianMessage.vague(), GaussianMessage.vague())
        var_slope_msg = vt / e_u2
        mean_slope_msg = mu * (mt - e_offset) / e_u2
        slope_msg = GaussianMessage(mean_slope_msg, var_slope_msg)
        offset_msg = GaussianMessage(mt - e_slope * mu, vt)
        return PairMessage(slope_msg, offset_msg)

    if out_edge_id == in_id:
        out_msg = _incoming(graph, node, out_id)
        if out_msg is None:
            raise MissingInputError(
                f"loss node {node.id} needs the incoming output message"
            )
        mt, vt = _belief_mean_var(out_msg)
        if flat:
            return GaussianMessage.vague()
        a = e_slope if recruit else 1.0
        c = e_offset if recruit else 0.0
        return _gaussian_or_delta((mt - c) / a, vt / (a * a))

    raise UnsupportedRuleError(f"unknown edge {out_edge_id} on loss node {node.id}")


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def execute_schedule(graph: Graph, schedule: Schedule) -> Graph:
    """Replay a schedule, storing each message and refreshing marginals."""
    for i, step in enumerate(schedule):
        try:
            msg = compute_message(graph, step.node_id, step.edge_id, step.rule)
            edge = graph.edges[step.edge_id]
            edge.set_outgoing(step.node_id, msg)
            _check_stored(msg)
            graph.marginals_refresh(edge)
        except Exception as exc:  # noqa: BLE001 - annotate with the step index
            if isinstance(exc, ScheduleExecutionError):
                raise
            raise ScheduleExecutionError(i, step, exc) from exc
    return graph


def _check_stored(msg: Message | PairMessage) -> None:
    if isinstance(msg, PairMessage):
        _check_stored(msg.first)
        _check_stored(msg.second)
        return
    if isinstance(msg, GaussianMessage) and not msg.improper:
        if not (math.isfinite(msg.mean) and math.isfinite(msg.variance) and msg.variance > 0):
            raise InvalidMessageError(f"stored Gaussian is invalid: {msg}")
    if isinstance(msg, DeltaMessage) and not math.isfinite(msg.point):
        raise InvalidMessageError(f"stored point mass is invalid: {msg}")


def dump(graph: Graph, schedule: Schedule | None = None) -> str:
    """Human-readable description of a graph and optional schedule."""
    lines = ["nodes:"]
    for node in graph.nodes.values():
        extra = ""
        if node.kind in (CLAMP, PRIOR):
            extra = f" value={node.value}"
        if node.kind == GAUSSIAN_NOISE:
            extra = f" scale_kind={node.scale_kind}"
        lines.append(f"  {node.id}  kind={node.kind}  edges={','.join(node.edge_ids)}{extra}")
    lines.append("edges:")
    for edge in graph.edges.values():
        lines.append(
            f"  {edge.id}  name={edge.name}  tail={edge.tail}  head={edge.head}  "
            f"fwd={'set' if edge.forward is not None else '-'}  "
            f"bwd={'set' if edge.backward is not None else '-'}"
        )
    if schedule is not None:
        lines.append("steps:")
        for i, step in enumerate(schedule):
            lines.append(f"  {i + 1:2d}. {step.node_id} -> {step.edge_id}  [{step.rule}]")
    return "\n".join(lines)
