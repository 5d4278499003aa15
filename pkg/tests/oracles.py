"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written with different algorithms and data
structures than the library (union-find instead of DFS, Tarjan bridges
instead of removal probes, direct lattice sums instead of theta integrals)
so that agreement is evidence, not tautology.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# ---------------------------------------------------------------------------
# Lattice / spectral references
# ---------------------------------------------------------------------------


def brute_mode_sum(n: int, dim: int, period: float, r: float) -> float:
    """Direct lattice sum (1/L^d) sum_k e^{-2 r lam_k} / lam_k over the full
    frequency cube, no factorization tricks."""
    freqs = np.fft.fftfreq(n, d=1.0 / n)
    total = 0.0
    for k in itertools.product(freqs, repeat=dim):
        lam = 1.0 + sum((2.0 * math.pi / period * ki) ** 2 for ki in k)
        total += math.exp(-2.0 * r * lam) / lam
    return total / period**dim


def naive_convolution_product(*signals: np.ndarray) -> np.ndarray:
    """Alias-free product of 1-d periodic signals by direct spectral
    convolution over exact integer frequency sums (no wraparound), keeping
    only the output modes representable on the original grid (O(n^factors))."""
    n = len(signals[0])
    freqs = list(np.fft.fftfreq(n, d=1.0 / n).astype(int))
    index = {k: i for i, k in enumerate(freqs)}
    specs = [np.fft.fft(s) / n for s in signals]
    out = {k: 0.0 + 0.0j for k in freqs}
    for combo in itertools.product(*(range(n) for _ in specs)):
        ktot = sum(freqs[i] for i in combo)
        if ktot in index:
            term = 1.0 + 0.0j
            for spec, i in zip(specs, combo):
                term *= spec[i]
            out[ktot] += term
    fc = np.array([out[k] for k in freqs])
    return np.real(np.fft.ifft(fc * n))


# ---------------------------------------------------------------------------
# Graph-theory references (independent of powercount internals)
# ---------------------------------------------------------------------------


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _contract(g, edge_subset):
    """(nodes, multi-edge list) of the subgraph with triples contracted to
    their star name; triples are completed by membership."""
    member_of = {}
    for t in g.triples:
        for m in (t.star, t.leg1, t.leg2):
            member_of[m] = t.name
    nodes = set()
    links = []
    for e in edge_subset:
        a = member_of.get(e.a, e.a)
        b = member_of.get(e.b, e.b)
        nodes.update((a, b))
        links.append((a, b))
    return nodes, links


def _tarjan_bridges(nodes, links):
    """Bridges of a multigraph via low-link numbering (iterative)."""
    adj = {v: [] for v in nodes}
    for idx, (a, b) in enumerate(links):
        adj[a].append((b, idx))
        adj[b].append((a, idx))
    visited, disc, low = set(), {}, {}
    bridges = []
    counter = itertools.count()
    for root in nodes:
        if root in visited:
            continue
        stack = [(root, -1, iter(adj[root]))]
        visited.add(root)
        disc[root] = low[root] = next(counter)
        while stack:
            v, in_edge, it = stack[-1]
            advanced = False
            for w, idx in it:
                if idx == in_edge:
                    continue
                if w not in visited:
                    visited.add(w)
                    disc[w] = low[w] = next(counter)
                    stack.append((w, idx, iter(adj[w])))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if not advanced:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[v])
                    if low[v] > disc[parent]:
                        bridges.append(in_edge)
        # note: multigraph parallel edges carry distinct indices, so a
        # doubled edge is never a bridge
    return bridges


def reference_relevant_subgraphs(g):
    """All edge subsets (size >= 2, triples completed) that are connected,
    contain a loop, and have no bridge — computed with union-find and
    Tarjan bridges."""
    out = []
    edges = list(g.edges)
    for size in range(2, len(edges) + 1):
        for subset in itertools.combinations(edges, size):
            nodes, links = _contract(g, subset)
            uf = _UnionFind(nodes)
            for a, b in links:
                uf.union(a, b)
            roots = {uf.find(v) for v in nodes}
            if len(roots) != 1:
                continue
            b1 = len(links) - len(nodes) + len(roots)
            if b1 <= 0:
                continue
            if _tarjan_bridges(nodes, links):
                continue
            out.append(frozenset(subset))
    return out


# ---------------------------------------------------------------------------
# Statistics references
# ---------------------------------------------------------------------------


def gaussian_field_1d(rng: np.random.Generator, n: int, variance_per_mode):
    """Real Gaussian field on Z_n with prescribed spectral variance,
    assembled mode by mode (slow, explicit Hermitian symmetry)."""
    coeffs = np.zeros(n, dtype=complex)
    freqs = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    index = {int(k): i for i, k in enumerate(freqs)}
    for k in range(1, n // 2):
        var = variance_per_mode(k)
        z = (rng.normal() + 1j * rng.normal()) * math.sqrt(var / 2.0)
        coeffs[index[k]] = z
        coeffs[index[-k]] = np.conj(z)
    coeffs[index[0]] = rng.normal() * math.sqrt(variance_per_mode(0))
    if n % 2 == 0:
        kn = n // 2
        coeffs[index[-kn]] = rng.normal() * math.sqrt(variance_per_mode(kn))
    return np.real(np.fft.ifft(coeffs * n))
