"""(1,1)-tangle diagrams in Morse position and the label state sum.

A diagram is an ordered word of events read top to bottom: crossings acting
on two adjacent strand positions ("xp" applies R, "xn" applies R^-1), cups
(local maxima, width +2) and caps (local minima, width -2).  The open string
enters at the top and leaves at the bottom; both open edges carry label 0.

Extremum dressing: the "_lr" events are the ones traversed left to right by
the strand and carry the twist pairings (a cap_lr consumes adjacent labels
(a, b) with weight mu[a, b], a cup_lr creates (a, b) with weight
mu^-1[a, b]); the "_rl" events are traversed right to left and pair with a
plain Kronecker delta, which is the identity dressing forced by invariance.
Construction threads the strand through the word and rejects diagrams whose
direction tags disagree with the actual travel, that ascend into a crossing,
or that describe more than one component.

Three summation routes are provided and must agree: `state_sum` (a top-down
vectorized contraction; crossings at large N are applied through an FFT
cyclic-convolution kernel exploiting the translation invariance of the
R entries in label space), `brute_force_sum` (the literal sum of weight
products over all labelings), and `pruned_sum` (brute force restricted to
labelings satisfying the three angle conditions).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .qkernel import QContext
from .yang_baxter import (crossing_angles, mu_matrix, r_difference_kernel,
                          r_entry, r_tensor)

__all__ = [
    "Event",
    "TangleDiagram",
    "DiagramStructureError",
    "BudgetExceededError",
    "Region",
    "RegionData",
    "AngleConditions",
    "PrunedSumResult",
    "InvariantRecord",
    "figure_eight_diagram",
    "trefoil_diagram",
    "unknot_diagram",
    "kink_diagram",
    "builtin_diagram",
    "BUILTIN_NAMES",
    "state_sum",
    "brute_force_sum",
    "pruned_sum",
    "derive_regions",
    "check_angle_conditions",
    "labeling_weight",
    "weight_factors",
    "label_classes",
    "enumerate_labelings",
    "evaluate_invariant",
    "diagram_to_json",
    "diagram_from_json",
]

CROSSING_OPS = ("xp", "xn")
CUP_OPS = ("cup_lr", "cup_rl")
CAP_OPS = ("cap_lr", "cap_rl")
ALL_OPS = CROSSING_OPS + CUP_OPS + CAP_OPS

#: Arrival side of the strand at an extremum implied by each direction tag:
#: an "_lr" extremum is entered on its left leg, an "_rl" one on its right.
_TAG_ARRIVAL = {"lr": "L", "rl": "R"}

#: Default cap on the dense state vector size N**width used by state_sum.
DEFAULT_STATE_BUDGET = 40_000_000

#: Default cap on the number of labelings brute force will enumerate.
DEFAULT_LABELING_BUDGET = 2_000_000


class DiagramStructureError(ValueError):
    """The Morse word does not describe a valid single-strand (1,1)-tangle."""


class BudgetExceededError(RuntimeError):
    """A requested computation exceeds its configured size budget."""


@dataclass(frozen=True)
class Event:
    """One slice of the Morse word: an operation acting at strand position `at`."""

    op: str
    at: int

    def __post_init__(self):
        if self.op not in ALL_OPS:
            raise DiagramStructureError(f"unknown event op {self.op!r}")
        if self.at < 0:
            raise DiagramStructureError(f"negative event position {self.at}")


class _Crossing:
    """Crossing vertex: sign and the four incident segment ids.

    k, n are the upper-left/upper-right segments (consumed from above),
    l, m the lower-left/lower-right segments (emitted downward).
    """

    __slots__ = ("sign", "k", "n", "l", "m")

    def __init__(self, sign, k, n, l, m):
        self.sign, self.k, self.n, self.l, self.m = sign, k, n, l, m


class _Extremum:
    """Cup or cap vertex: direction tag and its left/right segment ids."""

    __slots__ = ("tag", "left", "right")

    def __init__(self, tag, left, right):
        self.tag, self.left, self.right = tag, left, right


class TangleDiagram:
    """A validated (1,1)-tangle diagram given as an ordered Morse word.

    Construction sweeps the word once to build the incidence structure
    (segments, crossings, extrema), computes the width profile, and threads
    the strand from the top endpoint to check that the word describes a
    single descending-at-crossings strand whose extremum tags match its
    travel directions.
    """

    def __init__(self, name: str, events):
        self.name = str(name)
        self.events = tuple(Event(e.op, e.at) if isinstance(e, Event)
                            else Event(*e) for e in events)
        self._sweep()
        self._thread()
        self._regions = None
        self._classes = None

    # -- structure ---------------------------------------------------------

    def _sweep(self):
        seg_top: list = []   # upper-end attachment of each segment
        seg_bot: list = []   # lower-end attachment, filled when consumed
        crossings: list[_Crossing] = []
        cups: list[_Extremum] = []
        caps: list[_Extremum] = []

        def new_seg(attach):
            seg_top.append(attach)
            seg_bot.append(None)
            return len(seg_top) - 1

        def close_seg(s, attach):
            seg_bot[s] = attach

        open_segs = [new_seg(("bnd", 0, "top"))]
        widths = [1]
        for idx, ev in enumerate(self.events):
            w = len(open_segs)
            i = ev.at
            if ev.op in CROSSING_OPS:
                if not 0 <= i < w - 1:
                    raise DiagramStructureError(
                        f"event {idx}: crossing at {i} needs positions "
                        f"{i},{i + 1} inside width {w}")
                ci = len(crossings)
                kseg, nseg = open_segs[i], open_segs[i + 1]
                close_seg(kseg, ("x", ci, "NW"))
                close_seg(nseg, ("x", ci, "NE"))
                lseg = new_seg(("x", ci, "SW"))
                mseg = new_seg(("x", ci, "SE"))
                crossings.append(_Crossing(+1 if ev.op == "xp" else -1,
                                           kseg, nseg, lseg, mseg))
                open_segs[i], open_segs[i + 1] = lseg, mseg
            elif ev.op in CUP_OPS:
                if not 0 <= i <= w:
                    raise DiagramStructureError(
                        f"event {idx}: cup at {i} outside insertable range "
                        f"0..{w}")
                ui = len(cups)
                a = new_seg(("cup", ui, "L"))
                b = new_seg(("cup", ui, "R"))
                cups.append(_Extremum(ev.op[-2:], a, b))
                open_segs[i:i] = [a, b]
            else:  # cap
                if not 0 <= i <= w - 2:
                    raise DiagramStructureError(
                        f"event {idx}: cap at {i} needs positions "
                        f"{i},{i + 1} inside width {w}")
                if w == 2:
                    raise DiagramStructureError(
                        f"event {idx}: cap would leave width 0")
                pi = len(caps)
                close_seg(open_segs[i], ("cap", pi, "L"))
                close_seg(open_segs[i + 1], ("cap", pi, "R"))
                caps.append(_Extremum(ev.op[-2:],
                                      open_segs[i], open_segs[i + 1]))
                del open_segs[i:i + 2]
            widths.append(len(open_segs))
        if len(open_segs) != 1:
            raise DiagramStructureError(
                f"word ends at width {len(open_segs)}, expected 1")
        close_seg(open_segs[0], ("bnd", 0, "bot"))

        self.widths = tuple(widths)
        self._seg_top = seg_top
        self._seg_bot = seg_bot
        self._crossings = crossings
        self._cups = cups
        self._caps = caps

    def _thread(self):
        """Walk the strand from the top endpoint, validating travel."""
        n_segs = len(self._seg_top)
        visited = [False] * n_segs
        seg, going_down = 0, True
        order = []
        for _ in range(2 * n_segs + 2):
            if visited[seg]:
                raise DiagramStructureError("strand revisits a segment")
            visited[seg] = True
            order.append(seg)
            if going_down:
                kind, j, port = self._seg_bot[seg]
                if kind == "bnd":
                    break
                if kind == "x":
                    c = self._crossings[j]
                    seg = c.m if port == "NW" else c.l
                elif kind == "cap":
                    cap = self._caps[j]
                    arrived = "L" if port == "L" else "R"
                    if _TAG_ARRIVAL[cap.tag] != arrived:
                        raise DiagramStructureError(
                            f"cap_{cap.tag} entered on its "
                            f"{'left' if arrived == 'L' else 'right'} leg; "
                            f"direction tag disagrees with strand travel")
                    seg = cap.right if port == "L" else cap.left
                    going_down = False
            else:
                kind, j, port = self._seg_top[seg]
                if kind == "x":
                    raise DiagramStructureError(
                        "strand ascends into a crossing; all crossing arcs "
                        "must descend")
                if kind == "bnd":
                    raise DiagramStructureError(
                        "strand returned to the top endpoint")
                cup = self._cups[j]
                arrived = "L" if port == "L" else "R"
                if _TAG_ARRIVAL[cup.tag] != arrived:
                    raise DiagramStructureError(
                        f"cup_{cup.tag} entered on its "
                        f"{'left' if arrived == 'L' else 'right'} leg; "
                        f"direction tag disagrees with strand travel")
                seg = cup.right if port == "L" else cup.left
                going_down = True
        else:
            raise DiagramStructureError("strand walk did not terminate")
        if not all(visited):
            raise DiagramStructureError(
                "diagram has more than one component; only knots are "
                "supported")
        self._strand_order = tuple(order)

    # -- convenience -------------------------------------------------------

    @property
    def crossing_count(self) -> int:
        return len(self._crossings)

    @property
    def writhe(self) -> int:
        return sum(c.sign for c in self._crossings)

    @property
    def max_width(self) -> int:
        return max(self.widths)

    @property
    def edge_count(self) -> int:
        return len(self._seg_top)

    def __repr__(self):
        return (f"TangleDiagram({self.name!r}, crossings={self.crossing_count}, "
                f"max_width={self.max_width})")


# -- JSON interchange -------------------------------------------------------

def diagram_to_json(d: TangleDiagram) -> str:
    """Serialize to the interchange form {"name", "events": [{"op","at"}]}."""
    return json.dumps({
        "name": d.name,
        "events": [{"op": e.op, "at": e.at} for e in d.events],
    })


def diagram_from_json(text: str) -> TangleDiagram:
    """Parse and validate a diagram from its JSON interchange form."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DiagramStructureError(f"invalid diagram JSON: {exc}") from exc
    if not isinstance(obj, dict) or "events" not in obj:
        raise DiagramStructureError(
            'diagram JSON must be an object with an "events" list')
    events = []
    for entry in obj["events"]:
        if not isinstance(entry, dict) or "op" not in entry or "at" not in entry:
            raise DiagramStructureError(
                'each event must be an object with "op" and "at"')
        events.append(Event(entry["op"], int(entry["at"])))
    return TangleDiagram(obj.get("name", "diagram"), events)


# -- built-in diagrams -------------------------------------------------------

def unknot_diagram() -> TangleDiagram:
    """Crossing-free unknot: one cup and one cap (the snake move)."""
    return TangleDiagram("unknot", [("cup_lr", 1), ("cap_lr", 0)])


def kink_diagram(sign: int = +1) -> TangleDiagram:
    """Unknot with a single curl; contraction equals a unit-modulus scalar."""
    op = "xp" if sign >= 0 else "xn"
    return TangleDiagram("kink", [("cup_rl", 1), (op, 0), ("cap_lr", 1)])


def trefoil_diagram() -> TangleDiagram:
    """Trefoil as the closed 2-braid with three equal crossings."""
    return TangleDiagram("trefoil", [
        ("cup_rl", 1),
        ("xp", 0), ("xp", 0), ("xp", 0),
        ("cap_lr", 1),
    ])


def figure_eight_diagram() -> TangleDiagram:
    """The 4-crossing figure-eight knot (1,1)-tangle.

    Width-3 Morse word whose nonzero-weight labelings reproduce the worked
    weight product: two R^-1 factors, two R factors, one mu and one mu^-1,
    with all remaining extrema traversed right to left (identity pairing).
    """
    return TangleDiagram("figure-eight", _FIGURE_EIGHT_EVENTS)


# Canonical figure-eight Morse word: both cups, the four alternating
# crossings, both caps.  Its 55 nonzero labelings at N=5 carry exactly the
# entry pattern of the worked reduction: (R^-1)_{0,i}^{0,0},
# (R^-1)_{0,1}^{j,i}, R_{N-1,0}^{k,0}, R_{k,j}^{0,0} with one mu consuming
# the label pair (1, 0) and one mu^-1 creating (N-1, 0).
_FIGURE_EIGHT_EVENTS = (
    ("cup_rl", 1), ("cup_lr", 0),
    ("xn", 2), ("xp", 1), ("xn", 2), ("xp", 1),
    ("cap_rl", 0), ("cap_lr", 1),
)

BUILTIN_NAMES = ("figure-eight", "trefoil", "unknot", "kink")


def builtin_diagram(name: str) -> TangleDiagram:
    """Look up a built-in diagram by CLI name; unknown names raise ValueError."""
    builders = {
        "figure-eight": figure_eight_diagram,
        "trefoil": trefoil_diagram,
        "unknot": unknot_diagram,
        "kink": kink_diagram,
    }
    if name not in builders:
        raise ValueError(
            f"unknown builtin diagram {name!r}; choose from {BUILTIN_NAMES}")
    return builders[name]()


# -- label classes and weights -----------------------------------------------

def label_classes(d: TangleDiagram):
    """Partition segments into label classes and identify pinned classes.

    Right-to-left extrema carry the identity pairing, so their two segments
    always share a label; they are merged into one class.  Classes holding
    the top or bottom open segment are pinned to label 0.

    Returns (class_of_segment, free_classes, pinned_classes) where
    class_of_segment maps each segment id to a class id.
    """
    n = d.edge_count
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        parent[find(x)] = find(y)

    for ext in itertools.chain(d._cups, d._caps):
        if ext.tag == "rl":
            union(ext.left, ext.right)

    class_ids = {}
    class_of = []
    for s in range(n):
        r = find(s)
        if r not in class_ids:
            class_ids[r] = len(class_ids)
        class_of.append(class_ids[r])
    pinned = {class_of[0], class_of[d._seg_bot.index(("bnd", 0, "bot"))]}
    free = [c for c in range(len(class_ids)) if c not in pinned]
    return class_of, free, sorted(pinned)


def enumerate_labelings(ctx: QContext, d: TangleDiagram,
                        budget: int = DEFAULT_LABELING_BUDGET):
    """Yield per-segment label arrays for every labeling, respecting pins.

    The iteration order is deterministic: free classes are swept in class
    order, each over 0..N-1, least significant last.
    """
    class_of, free, _pinned = label_classes(d)
    total = ctx.N ** len(free)
    if total > budget:
        raise BudgetExceededError(
            f"{total} labelings exceed the budget of {budget} "
            f"(N={ctx.N}, free classes={len(free)})")
    n = d.edge_count
    values = [0] * (max(class_of) + 1)
    for combo in itertools.product(range(ctx.N), repeat=len(free)):
        for c, v in zip(free, combo):
            values[c] = v
        yield [values[class_of[s]] for s in range(n)]


def weight_factors(ctx: QContext, d: TangleDiagram, labels):
    """The individual factors of a labeling's weight product.

    Returns a list of (kind, data, value) triples: one R^{+-1} entry per
    crossing (data = (k, n, l, m) labels), one twist or delta pairing per
    extremum (data = (left, right) labels).
    """
    out = []
    for c in d._crossings:
        kk, nn, ll, mm = (labels[c.k], labels[c.n], labels[c.l], labels[c.m])
        val = r_entry(ctx, kk, nn, ll, mm, c.sign)
        out.append(("xp" if c.sign > 0 else "xn", (kk, nn, ll, mm), val))
    for kind, ext in itertools.chain(
            (("cup", e) for e in d._cups), (("cap", e) for e in d._caps)):
        a, b = labels[ext.left], labels[ext.right]
        if ext.tag == "rl":
            val = 1.0 + 0.0j if a == b else 0.0 + 0.0j
        elif kind == "cup":  # creation pairing mu^-1[a, b]
            val = -ctx.q_half.conjugate() if b == (a + 1) % ctx.N else 0.0 + 0.0j
        else:                # annihilation pairing mu[a, b]
            val = -ctx.q_half if a == (b + 1) % ctx.N else 0.0 + 0.0j
        out.append((f"{kind}_{ext.tag}", (a, b), val))
    return out


def labeling_weight(ctx: QContext, d: TangleDiagram, labels) -> complex:
    """Product of all crossing and extremum factors for one labeling."""
    w = 1.0 + 0.0j
    for _, _, val in weight_factors(ctx, d, labels):
        if val == 0:
            return 0.0 + 0.0j
        w *= val
    return w


def brute_force_sum(ctx: QContext, d: TangleDiagram,
                    budget: int = DEFAULT_LABELING_BUDGET) -> complex:
    """Literal sum of weight products over all labelings (oracle route)."""
    total = 0.0 + 0.0j
    for labels in enumerate_labelings(ctx, d, budget):
        total += labeling_weight(ctx, d, labels)
    return total


# -- planar regions and angle conditions --------------------------------------

@dataclass(frozen=True)
class Region:
    """A face of the planar projection: its crossing corners and boundedness."""

    corners: tuple
    bounded: bool


@dataclass(frozen=True)
class RegionData:
    """All faces of the diagram, with the two unbounded ones marked."""

    regions: tuple

    @property
    def bounded(self):
        return tuple(r for r in self.regions if r.bounded)

    @property
    def unbounded(self):
        return tuple(r for r in self.regions if not r.bounded)


#: Crossing corner between consecutive counterclockwise ports, and the label
#: angle sitting in it: N = [k-n], W = [l-k], S = [m-l-1], E = [n-m].
_CORNER_OF = {("NE", "NW"): "N", ("NW", "SW"): "W",
              ("SW", "SE"): "S", ("SE", "NE"): "E"}


def derive_regions(d: TangleDiagram) -> RegionData:
    """Faces of the underlying 4-valent planar projection.

    The two open ends are joined through a virtual boundary vertex, so the
    plane's outer area splits into exactly two unbounded faces.  Faces are
    orbits of the combinatorial-map permutation (rotate after reversing);
    each visit to a crossing records which of its four corner wedges the
    face occupies.
    """
    if d._regions is not None:
        return d._regions

    # Rotation system: counterclockwise dart order at every vertex.
    # Darts are (segment, end) with end 0 = upper, 1 = lower.
    rotations = {}
    for ci, c in enumerate(d._crossings):
        # ports NE(45), NW(135), SW(225), SE(315); upper ends of l, m are
        # at the crossing; lower ends of k, n are at the crossing.
        rotations[("x", ci)] = [(c.n, 1), (c.k, 1), (c.l, 0), (c.m, 0)]
    for ui, cup in enumerate(d._cups):
        rotations[("cup", ui)] = [(cup.left, 0), (cup.right, 0)]
    for pi, cap in enumerate(d._caps):
        rotations[("cap", pi)] = [(cap.right, 1), (cap.left, 1)]
    top_seg = 0
    bot_seg = d._seg_bot.index(("bnd", 0, "bot"))
    rotations[("bnd",)] = [(top_seg, 0), (bot_seg, 1)]

    port_names = {}
    for key, darts in rotations.items():
        if key[0] == "x":
            for dart, port in zip(darts, ("NE", "NW", "SW", "SE")):
                port_names[dart] = port

    vertex_of = {}
    position = {}
    for key, darts in rotations.items():
        for idx, dart in enumerate(darts):
            vertex_of[dart] = key
            position[dart] = idx

    def rotate(dart):
        key = vertex_of[dart]
        darts = rotations[key]
        return darts[(position[dart] + 1) % len(darts)]

    def reverse(dart):
        seg, end = dart
        return (seg, 1 - end)

    all_darts = [(s, e) for s in range(d.edge_count) for e in (0, 1)]
    seen = set()
    regions = []
    for start in all_darts:
        if start in seen:
            continue
        corners = []
        touches_boundary = False
        dart = start
        while True:
            seen.add(dart)
            nxt = rotate(reverse(dart))
            v = vertex_of[nxt]
            if v == ("bnd",):
                touches_boundary = True
            elif v[0] == "x":
                pair = (port_names[reverse(dart)], port_names[nxt])
                corner = _CORNER_OF.get(pair)
                if corner is not None:
                    corners.append((v[1], corner))
            dart = nxt
            if dart == start:
                break
        regions.append(Region(tuple(corners), bounded=not touches_boundary))

    data = RegionData(tuple(regions))
    d._regions = data
    return data


@dataclass(frozen=True)
class AngleConditions:
    """Truth of the three vanishing conditions for one labeling."""

    crossing_sums: bool
    bounded_regions: bool
    unbounded_zero: bool

    @property
    def all(self) -> bool:
        return self.crossing_sums and self.bounded_regions and self.unbounded_zero


def _corner_angles(ctx: QContext, d: TangleDiagram, labels):
    """Per-crossing dict of corner -> angle residue for a labeling."""
    out = []
    for c in d._crossings:
        a_e, a_n, a_w, a_s = crossing_angles(
            ctx, labels[c.k], labels[c.n], labels[c.l], labels[c.m])
        out.append({"E": a_e, "N": a_n, "W": a_w, "S": a_s})
    return out


def check_angle_conditions(ctx: QContext, d: TangleDiagram,
                           labels) -> AngleConditions:
    """Evaluate the three angle conditions for a full edge labeling.

    (1) the four angles at every crossing sum to N-1;
    (2) the angles in every bounded region sum to N-1;
    (3) every angle lying in one of the two unbounded regions is zero.
    """
    regions = derive_regions(d)
    angles = _corner_angles(ctx, d, labels)
    cond1 = all(sum(a.values()) == ctx.N - 1 for a in angles)
    cond2 = True
    cond3 = True
    for region in regions.regions:
        corner_vals = [angles[ci][corner] for ci, corner in region.corners]
        if region.bounded:
            if region.corners and sum(corner_vals) != ctx.N - 1:
                cond2 = False
        else:
            if any(v != 0 for v in corner_vals):
                cond3 = False
    return AngleConditions(cond1, cond2, cond3)


@dataclass(frozen=True)
class PrunedSumResult:
    """Invariant value summed over angle-condition-passing labelings only."""

    value: complex
    surviving: int
    total: int

    @property
    def pruning_ratio(self) -> float:
        return self.surviving / self.total if self.total else 0.0


def pruned_sum(ctx: QContext, d: TangleDiagram,
               budget: int = DEFAULT_LABELING_BUDGET) -> PrunedSumResult:
    """Sum weights only over labelings passing the three angle conditions.

    Equals brute_force_sum because the conditions are necessary for a
    nonzero weight; the surviving/total counts expose the pruning power.
    """
    total = 0
    surviving = 0
    acc = 0.0 + 0.0j
    for labels in enumerate_labelings(ctx, d, budget):
        total += 1
        if check_angle_conditions(ctx, d, labels).all:
            surviving += 1
            acc += labeling_weight(ctx, d, labels)
    return PrunedSumResult(acc, surviving, total)


# -- state-sum contraction -----------------------------------------------------

def _crossing_kernel_hat(ctx: QContext, sign: int) -> np.ndarray:
    """FFT of the difference kernel K[d, t, u] along its convolution axis.

    In skew coordinates (n = k+u on input, m = l+t on output) a crossing
    acts, for each (t, u), as a cyclic convolution over the left label with
    kernel K[l-k, t, u]; applying it in Fourier space costs O(N^3 * batch)
    instead of the O(N^4 * batch) dense contraction.
    """
    key = ("khat", sign)
    cached = ctx._kernel_cache.get(key)
    if cached is not None:
        return cached
    khat = np.fft.fft(r_difference_kernel(ctx, sign), axis=0)
    ctx._kernel_cache[key] = khat
    return khat


def _apply_crossing_fft(ctx: QContext, state: np.ndarray, i: int,
                        sign: int) -> np.ndarray:
    """Apply R^{sign} on axes (i, i+1) through the convolution kernel."""
    N = ctx.N
    khat = _crossing_kernel_hat(ctx, sign)
    moved = np.moveaxis(state, (i, i + 1), (0, 1))
    tail_shape = moved.shape[2:]
    S = moved.reshape(N, N, -1)
    rows = np.arange(N)[:, None]
    cols = np.arange(N)[None, :]
    skew_in = S[rows, (rows + cols) % N, :]          # [k, u, c]
    f_in = np.fft.fft(skew_in, axis=0)               # [p, u, c]
    f_out = np.einsum("ptu,puc->ptc", khat, f_in)
    skew_out = np.fft.ifft(f_out, axis=0)            # [l, t, c]
    out = skew_out[rows, (cols - rows) % N, :]       # [l, m, c]
    out = out.reshape((N, N) + tail_shape)
    return np.moveaxis(out, (0, 1), (i, i + 1))


def _apply_crossing_dense(ctx: QContext, state: np.ndarray, i: int,
                          sign: int) -> np.ndarray:
    """Apply R^{sign} on axes (i, i+1) by dense tensor contraction."""
    r4 = r_tensor(ctx, sign)
    N = ctx.N
    moved = np.moveaxis(state, (i, i + 1), (0, 1))
    tail_shape = moved.shape[2:]
    S = moved.reshape(N, N, -1)
    out = np.einsum("knlm,knc->lmc", r4, S)
    out = out.reshape((N, N) + tail_shape)
    return np.moveaxis(out, (0, 1), (i, i + 1))


def _network_sum(ctx: QContext, d: TangleDiagram) -> complex:
    """Contract the whole labeled tensor network with an optimized path.

    One rank-4 R tensor per crossing and one twist matrix per left-to-right
    extremum, sharing indices along the diagram's label classes (delta
    pairings merge classes, pinned classes are sliced to label 0).
    numpy's einsum path optimizer then finds a contraction tree far below
    the naive slice order; for the built-in figure-eight word it reaches
    O(N^5) work with O(N^3) intermediates, against O(N^6) for slices.
    """
    class_of, _free, pinned = label_classes(d)
    terms = []
    for c in d._crossings:
        terms.append((r_tensor(ctx, c.sign),
                      [class_of[c.k], class_of[c.n], class_of[c.l], class_of[c.m]]))
    for kind, exts in (("cup", d._cups), ("cap", d._caps)):
        for e in exts:
            if e.tag == "lr":
                mat = mu_matrix(ctx, -1 if kind == "cup" else +1)
                terms.append((mat, [class_of[e.left], class_of[e.right]]))
    if not terms:
        # crossing-free diagram with only delta extrema: weight is 1
        return 1.0 + 0.0j
    args = []
    for tensor, idxs in terms:
        for ax in reversed(range(len(idxs))):
            if idxs[ax] in pinned:
                tensor = np.take(tensor, 0, axis=ax)
                idxs = idxs[:ax] + idxs[ax + 1:]
        args.append(tensor)
        args.append(idxs)
    args.append([])
    return complex(np.einsum(*args, optimize="greedy"))


#: Below this N the dense crossing tensor is small and cheapest.
_FFT_THRESHOLD = 12
#: Above this N the rank-4 crossing tensors of the network method get large
#: (N^4 complex entries each); fall back to the slice engine.
_NETWORK_MAX_N = 72


def state_sum(ctx: QContext, d: TangleDiagram, method: str = "auto",
              state_budget: int = DEFAULT_STATE_BUDGET) -> complex:
    """Top-down contraction of the diagram's state sum.

    Conceptually maintains a state vector over the labels of the currently
    open strands (top label pinned to 0), applies R^{+-1} at crossings, the
    twist pairings at left-to-right extrema and delta pairings at
    right-to-left ones, and reads off the amplitude of bottom label 0.

    method:
      "auto"  - einsum network contraction up to moderate N, slice engine
                with the FFT crossing kernel beyond;
      "net"   - force the einsum network path;
      "dense" / "fft" - force the slice engine with the dense or FFT
                crossing kernel (independent routes used as cross-checks).
    """
    if method not in ("auto", "net", "dense", "fft"):
        raise ValueError(f"unknown contraction method {method!r}")
    N = ctx.N
    if method == "net" or (method == "auto" and N <= _NETWORK_MAX_N):
        return _network_sum(ctx, d)

    peak = N ** d.max_width
    if peak > state_budget:
        raise BudgetExceededError(
            f"state vector would reach {peak} amplitudes "
            f"(N={N}, width {d.max_width}); budget is {state_budget}")
    use_fft = (N > _FFT_THRESHOLD) if method == "auto" else (method == "fft")

    mu_pair = mu_matrix(ctx, +1)       # cap_lr pairing mu[a, b]
    mu_inv_pair = mu_matrix(ctx, -1)   # cup_lr pairing mu^-1[a, b]
    delta = np.eye(N, dtype=np.complex128)

    state = np.zeros(N, dtype=np.complex128)
    state[0] = 1.0
    for ev in d.events:
        i = ev.at
        if ev.op in CROSSING_OPS:
            sign = +1 if ev.op == "xp" else -1
            if use_fft:
                state = _apply_crossing_fft(ctx, state, i, sign)
            else:
                state = _apply_crossing_dense(ctx, state, i, sign)
        elif ev.op in CUP_OPS:
            pair = mu_inv_pair if ev.op == "cup_lr" else delta
            state = np.moveaxis(
                np.multiply.outer(state, pair),
                (state.ndim, state.ndim + 1), (i, i + 1))
        else:
            pair = mu_pair if ev.op == "cap_lr" else delta
            state = np.tensordot(state, pair, axes=([i, i + 1], [0, 1]))
    return complex(state[0])


# -- invariant records ---------------------------------------------------------

@dataclass(frozen=True)
class InvariantRecord:
    """One evaluation of the invariant: raw value, modulus, log-modulus."""

    N: int
    value: complex
    modulus: float
    log_modulus: float

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "value": {"re": self.value.real, "im": self.value.imag},
            "modulus": self.modulus,
            "log_modulus": self.log_modulus,
        }


def evaluate_invariant(ctx: QContext, d: TangleDiagram,
                       method: str = "auto",
                       state_budget: int = DEFAULT_STATE_BUDGET) -> InvariantRecord:
    """state_sum plus the derived modulus and log-modulus, as a record."""
    value = state_sum(ctx, d, method=method, state_budget=state_budget)
    modulus = abs(value)
    log_modulus = math.log(modulus) if modulus > 0 else float("-inf")
    return InvariantRecord(N=ctx.N, value=value, modulus=modulus,
                           log_modulus=log_modulus)
