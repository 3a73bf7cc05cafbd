"""Exact finite-volume computations by exhaustive enumeration.

Percolation
-----------
Connection probabilities inside a finite region are polynomial in the edge
weights.  We therefore enumerate every bond configuration once, label its
clusters, and tally integer *count tables*: for each target vertex and each
vector of per-weight-class open-edge counts, the number of configurations
connecting the base point to the target.  A count table is independent of
the parameter, so a single enumeration supports arbitrarily many evaluations
(bisection on p or beta costs nothing extra) and the final evaluation is one
compensated sum of count * weight-monomial terms.

The enumeration is vectorized: configurations are processed in chunks, with
cluster labels obtained by min-label propagation over the open edges until a
fixed point.  A plain-Python reference enumerator (``naive_event_prob``) with
independent BFS connectivity is kept alongside as the oracle.

Ising
-----
Finite-volume Gibbs expectations are computed by summing over all spin
assignments.  The Hamiltonian is

    H(sigma) = -beta * sum_{internal pairs {x,y}} J_xy sigma_x sigma_y
               - h * sum_x sigma_x,

with each unordered pair counted once and the Gibbs weight exp(-H)
normalized against the all-plus ground state so every weight lies in (0, 1].
A plain-Python ``naive_ising_observables`` is the oracle.

Both engines refuse (``CapExceeded``) beyond configurable caps chosen so the
worst-case enumeration stays near 1e8 elementary steps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapExceeded
from .lattice import LatticeSpec, Region, Vertex, edge_weight

EDGE_CAP_DEFAULT = 26
SPIN_CAP_DEFAULT = 22

_CHUNK_BITS = 18  # configurations per vectorized chunk


# ---------------------------------------------------------------------------
# generic bond-configuration enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightClass:
    """Edges sharing one open-probability.

    ``fold > 1`` marks a collapsed bundle of ``fold`` parallel bonds with
    coupling ``j`` each: the merged bond is open with probability
    ``1 - (1 - w)**fold``, which is probabilistically exact for connection
    events into a merged target.
    """

    j: float
    fold: int = 1

    def weight(self, lattice: LatticeSpec, param: float) -> float:
        w = edge_weight(lattice, self.j, param)
        if self.fold == 1:
            return w
        return 1.0 - (1.0 - w) ** self.fold


class ConnectivityTables:
    """Count tables for connection events on a fixed finite edge set.

    ``counts[t][k0, k1, ...]`` = number of bond configurations with ``k_c``
    open edges in weight class ``c`` in which node ``t`` is connected to
    ``base``.  ``totals[k0, k1, ...]`` counts all configurations (for
    normalization checks).
    """

    def __init__(self, n_nodes: int, edges: list[tuple[int, int, int]],
                 classes: list[WeightClass], base: int, targets: list[int],
                 cap: int = EDGE_CAP_DEFAULT):
        m = len(edges)
        if m > cap:
            raise CapExceeded("bond enumeration", m, cap)
        self.n_nodes = n_nodes
        self.edges = list(edges)
        self.classes = list(classes)
        self.base = base
        self.targets = list(targets)
        self.class_sizes = [0] * len(classes)
        for _, _, c in edges:
            self.class_sizes[c] += 1
        shape = tuple(s + 1 for s in self.class_sizes)
        self.counts = {t: np.zeros(shape, dtype=np.int64) for t in self.targets}
        self._enumerate()

    def _enumerate(self) -> None:
        m = len(self.edges)
        ea = np.array([e[0] for e in self.edges], dtype=np.int64)
        eb = np.array([e[1] for e in self.edges], dtype=np.int64)
        ecls = [e[2] for e in self.edges]
        n_cfg = 1 << m
        chunk = min(n_cfg, 1 << _CHUNK_BITS)
        shape = tuple(s + 1 for s in self.class_sizes)
        flat_strides = np.zeros(len(self.edges), dtype=np.int64)
        # per-edge contribution to the flattened class-count index
        stride_of_class = []
        acc = 1
        for s in reversed(shape):
            stride_of_class.append(acc)
            acc *= s
        stride_of_class.reverse()
        for i, c in enumerate(ecls):
            flat_strides[i] = stride_of_class[c]
        total_states = acc

        for start in range(0, n_cfg, chunk):
            idx = np.arange(start, min(start + chunk, n_cfg), dtype=np.uint64)
            nloc = idx.size
            open_edges = np.empty((m, nloc), dtype=bool)
            for e in range(m):
                open_edges[e] = (idx >> np.uint64(e)) & np.uint64(1) != 0
            labels = np.broadcast_to(
                np.arange(self.n_nodes, dtype=np.int16), (nloc, self.n_nodes)
            ).copy()
            # min-label propagation to a fixed point
            changed = True
            while changed:
                changed = False
                for e in range(m):
                    sel = open_edges[e]
                    la = labels[sel, ea[e]]
                    lb = labels[sel, eb[e]]
                    lo = np.minimum(la, lb)
                    if (la != lo).any():
                        labels[sel, ea[e]] = lo
                        changed = True
                    if (lb != lo).any():
                        labels[sel, eb[e]] = lo
                        changed = True
            flat = np.zeros(nloc, dtype=np.int64)
            for e in range(m):
                flat += flat_strides[e] * open_edges[e]
            base_labels = labels[:, self.base]
            for t in self.targets:
                connected = labels[:, t] == base_labels
                binned = np.bincount(flat[connected], minlength=total_states)
                self.counts[t] += binned.reshape(shape)

    def prob(self, t: int, lattice: LatticeSpec, param: float) -> float:
        """P[base <-> t] at the given parameter (compensated final sum)."""
        weights = [wc.weight(lattice, param) for wc in self.classes]
        pw = []
        for c, w in enumerate(weights):
            k = np.arange(self.class_sizes[c] + 1, dtype=float)
            pw.append(np.power(w, k) * np.power(1.0 - w, self.class_sizes[c] - k))
        counts = np.atleast_1d(self.counts[t])
        nz = np.nonzero(counts)
        terms = counts[nz].astype(float)
        for c in range(len(self.classes)):
            terms = terms * pw[c][nz[c]]
        return math.fsum(terms.tolist())


# ---------------------------------------------------------------------------
# percolation inside a region
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactConnectivity:
    """All P[base <-> x within S] for one region at one parameter."""

    region: Region
    param: float
    probs: dict[Vertex, float]

    def __getitem__(self, v: Vertex) -> float:
        return self.probs[tuple(v)]


def _region_classes(region: Region) -> tuple[list[WeightClass], dict[float, int]]:
    classes: list[WeightClass] = []
    index: dict[float, int] = {}
    for _, _, j in region.internal_edges:
        if j not in index:
            index[j] = len(classes)
            classes.append(WeightClass(j))
    return classes, index


@lru_cache(maxsize=256)
def _region_tables(region: Region, cap: int) -> ConnectivityTables:
    classes, cindex = _region_classes(region)
    edges = [(a, b, cindex[j]) for a, b, j in region.internal_edges]
    targets = list(range(len(region)))
    return ConnectivityTables(len(region), edges, classes, base=0,
                              targets=targets, cap=cap)


def perc_connect_probs(region: Region, param: float,
                       cap: int = EDGE_CAP_DEFAULT) -> ExactConnectivity:
    """Exact P[base point <-> x inside S] for every x in S.

    The region's base point maps to index 0 in canonical order, so the count
    tables are built once per region and reused across parameters.
    """
    tables = _region_tables(region, cap)
    probs = {v: tables.prob(i, region.lattice, param)
             for i, v in enumerate(region.vertices)}
    return ExactConnectivity(region, param, probs)


def exit_problem(lattice: LatticeSpec, n: int):
    """Node/edge layout for the event "origin connected outside ball(n)".

    Returns (ball region, number of nodes, edges with class ids, classes,
    exterior node index).  All exterior endpoints are merged into one node;
    parallel bonds from a boundary vertex are collapsed into fold-classes,
    which leaves the exit event's distribution unchanged.
    """
    from .lattice import ball as _ball

    region = _ball(lattice, n)
    classes, cindex = _region_classes(region)
    edges = [(a, b, cindex[j]) for a, b, j in region.internal_edges]
    ext = len(region)
    bundle: dict[tuple[int, float], int] = {}
    for i, _, j in region.boundary_pairs:
        bundle[(i, j)] = bundle.get((i, j), 0) + 1
    fold_index: dict[tuple[float, int], int] = {}
    for (i, j), fold in sorted(bundle.items()):
        key = (j, fold)
        if key not in fold_index:
            fold_index[key] = len(classes)
            classes.append(WeightClass(j, fold))
        edges.append((i, ext, fold_index[key]))
    return region, ext + 1, edges, classes, ext


@lru_cache(maxsize=64)
def _exit_tables(lattice: LatticeSpec, n: int, cap: int) -> tuple:
    region, n_nodes, edges, classes, ext = exit_problem(lattice, n)
    tables = ConnectivityTables(n_nodes, edges, classes, base=0,
                                targets=[ext], cap=cap)
    return tables, ext


def perc_exit_prob(lattice: LatticeSpec, n: int, param: float,
                   cap: int = EDGE_CAP_DEFAULT) -> float:
    """Exact P[origin <-> complement of ball(n)]."""
    tables, ext = _exit_tables(lattice, n, cap)
    return tables.prob(ext, lattice, param)


# ---------------------------------------------------------------------------
# naive reference enumerators (oracles; no vectorization, no count tables)
# ---------------------------------------------------------------------------

def naive_event_prob(n_nodes: int, edges: list[tuple[int, int, float]],
                     base: int, targets: list[int]) -> dict[int, float]:
    """Reference P[base <-> t] by direct product-of-weights enumeration.

    ``edges`` carry explicit open-probabilities.  Connectivity is decided by
    BFS, independently of the optimized path's label propagation.
    """
    m = len(edges)
    probs = {t: [] for t in targets}
    for config in itertools.product((0, 1), repeat=m):
        weight = 1.0
        adj: dict[int, list[int]] = {}
        for bit, (a, b, w) in zip(config, edges):
            weight *= w if bit else (1.0 - w)
            if bit:
                adj.setdefault(a, []).append(b)
                adj.setdefault(b, []).append(a)
        reached = {base}
        queue = [base]
        while queue:
            v = queue.pop()
            for w_ in adj.get(v, ()):
                if w_ not in reached:
                    reached.add(w_)
                    queue.append(w_)
        for t in targets:
            if t in reached:
                probs[t].append(weight)
    return {t: math.fsum(v) for t, v in probs.items()}


def naive_connect_probs(region: Region, param: float) -> dict[Vertex, float]:
    edges = [(a, b, edge_weight(region.lattice, j, param))
             for a, b, j in region.internal_edges]
    raw = naive_event_prob(len(region), edges, 0, list(range(len(region))))
    return {v: raw[i] for i, v in enumerate(region.vertices)}


# ---------------------------------------------------------------------------
# Ising observables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactIsing:
    """Finite-volume Gibbs expectations on a region.

    ``correlations[x]`` = <sigma_base sigma_x>, ``magnetizations[x]`` =
    <sigma_x>, ``log_z`` the log partition function relative to exp(-H) of
    the all-plus configuration.
    """

    region: Region
    beta: float
    h: float
    correlations: dict[Vertex, float]
    magnetizations: dict[Vertex, float]
    log_z: float


def all_plus_energy(region: Region, beta: float, h: float) -> float:
    """H of the all-plus configuration: -beta * sum_int J - h * |S|.

    Guards the single-count pair convention; enumeration normalizes against
    this ground-state weight.
    """
    j_sum = math.fsum(j for _, _, j in region.internal_edges)
    return -beta * j_sum - h * len(region)


def ising_observables(region: Region, beta: float, h: float,
                      cap: int = SPIN_CAP_DEFAULT) -> ExactIsing:
    """Exact expectations by vectorized enumeration of all 2^|S| spin states."""
    if beta < 0.0:
        raise ValueError("beta must be non-negative")
    n = len(region)
    if n > cap:
        raise CapExceeded("spin enumeration", n, cap)
    edges = region.internal_edges
    ea = np.array([e[0] for e in edges], dtype=np.int64)
    eb = np.array([e[1] for e in edges], dtype=np.int64)
    ej = np.array([e[2] for e in edges], dtype=float)
    e_plus = all_plus_energy(region, beta, h)

    n_cfg = 1 << n
    chunk = min(n_cfg, 1 << _CHUNK_BITS)
    z_parts: list[float] = []
    mag_parts: list[np.ndarray] = []
    corr_parts: list[np.ndarray] = []
    for start in range(0, n_cfg, chunk):
        idx = np.arange(start, min(start + chunk, n_cfg), dtype=np.uint64)
        spins = np.empty((idx.size, n), dtype=np.int8)
        for v in range(n):
            spins[:, v] = 1 - 2 * ((idx >> np.uint64(v)) & np.uint64(1)).astype(np.int8)
        s = spins.astype(np.float64)
        energy = -beta * ((s[:, ea] * s[:, eb]) @ ej) - h * s.sum(axis=1)
        # relative weight <= 1: the all-plus state is the ferromagnetic ground
        # state at h >= 0, so no overflow for any beta
        w = np.exp(e_plus - energy)
        z_parts.append(float(w.sum()))
        mag_parts.append(w @ s)
        corr_parts.append((w * s[:, 0]) @ s)
    z = math.fsum(z_parts)
    mags = [math.fsum(float(part[v]) for part in mag_parts) / z for v in range(n)]
    corrs = [math.fsum(float(part[v]) for part in corr_parts) / z for v in range(n)]
    return ExactIsing(
        region, beta, h,
        correlations={v: corrs[i] for i, v in enumerate(region.vertices)},
        magnetizations={v: mags[i] for i, v in enumerate(region.vertices)},
        log_z=math.log(z) - e_plus,
    )


def naive_ising_observables(region: Region, beta: float, h: float) -> ExactIsing:
    """Reference implementation: plain Python loop over spin assignments."""
    n = len(region)
    if n > 14:
        raise CapExceeded("naive spin enumeration", n, 14)
    z_terms, mag_terms, corr_terms = [], [[] for _ in range(n)], [[] for _ in range(n)]
    e_plus = all_plus_energy(region, beta, h)
    for assignment in itertools.product((1, -1), repeat=n):
        energy = 0.0
        for a, b, j in region.internal_edges:
            energy -= beta * j * assignment[a] * assignment[b]
        energy -= h * sum(assignment)
        w = math.exp(e_plus - energy)
        z_terms.append(w)
        for v in range(n):
            mag_terms[v].append(w * assignment[v])
            corr_terms[v].append(w * assignment[0] * assignment[v])
    z = math.fsum(z_terms)
    return ExactIsing(
        region, beta, h,
        correlations={v: math.fsum(corr_terms[i]) / z
                      for i, v in enumerate(region.vertices)},
        magnetizations={v: math.fsum(mag_terms[i]) / z
                        for i, v in enumerate(region.vertices)},
        log_z=math.log(z) - e_plus,
    )
