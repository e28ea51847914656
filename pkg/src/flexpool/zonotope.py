"""PE zonotopes: generators, facet normals, membership and Minkowski sums.

A zonotope is stored as ``Z(G, c, betabar) = {c + G beta : |beta| <= betabar}``
where ``G`` is fixed by a family tag. The ``"pe"`` family has the ``2N - 1``
unit generators

* ``e_i`` for ``i = 1..N`` (axis generators), then
* ``(e_{j+1} - e_j) / sqrt(2)`` for ``j = 1..N-1`` (difference generators).

The ``"box"`` family uses the identity, so a box zonotope is an axis-aligned
box with half-edges ``betabar``.

Every facet of a full-dimensional PE zonotope has a normal of the form
``(e_j + ... + e_k) / sqrt(k - j + 1)``. Stacking those ``N(N+1)/2``
directions as columns gives ``F``, and membership reduces to
``|F.T (p - c)| <= |F.T G| betabar``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BetaOutOfRange, DimensionMismatch, FamilyMismatch, NegativeBeta

FAMILIES = ("pe", "box")
TOL_FEAS = 1e-8


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@functools.lru_cache(maxsize=None)
def pe_generators(n: int) -> np.ndarray:
    """The ``N x (2N-1)`` PE generator matrix (read-only, cached)."""
    if n < 1:
        raise ValueError("N must be at least 1")
    G = np.zeros((n, 2 * n - 1))
    G[:, :n] = np.eye(n)
    s = math.sqrt(0.5)
    for j in range(n - 1):
        G[j, n + j] = -s
        G[j + 1, n + j] = s
    return _frozen(G)


@functools.lru_cache(maxsize=None)
def facet_normals(n: int) -> np.ndarray:
    """Unit normals ``(e_j+...+e_k)/sqrt(k-j+1)`` as columns, ``(j, k)`` lexicographic."""
    if n < 1:
        raise ValueError("N must be at least 1")
    cols = []
    for j in range(n):
        for k in range(j, n):
            f = np.zeros(n)
            f[j:k + 1] = 1.0 / math.sqrt(k - j + 1)
            cols.append(f)
    return _frozen(np.column_stack(cols))


@functools.lru_cache(maxsize=None)
def window_index(n: int) -> np.ndarray:
    """``(q, 2)`` array of the 0-based ``(j, k)`` window of each facet normal."""
    return _frozen(np.array([(j, k) for j in range(n) for k in range(j, n)], dtype=np.int64))


@functools.lru_cache(maxsize=None)
def generators(family: str, n: int) -> np.ndarray:
    if family == "pe":
        return pe_generators(n)
    if family == "box":
        return _frozen(np.eye(n))
    raise FamilyMismatch(f"unknown generator family {family!r}")


def family_normals(family: str, n: int) -> np.ndarray:
    """Facet-normal directions sufficient for exact membership in ``family``."""
    if family == "pe":
        return facet_normals(n)
    if family == "box":
        return generators("box", n)
    raise FamilyMismatch(f"unknown generator family {family!r}")


@functools.lru_cache(maxsize=None)
def _abs_ftg(family: str, n: int, normals: str) -> np.ndarray:
    F = facet_normals(n) if normals == "full" else family_normals(family, n)
    return _frozen(np.abs(F.T @ generators(family, n)))


def support_matrix(family: str, n: int, F: np.ndarray | None = None) -> np.ndarray:
    """``|F.T G|``; cached for the standard normal sets."""
    if F is None:
        return _abs_ftg(family, n, "family")
    if F is facet_normals(n):
        return _abs_ftg(family, n, "full")
    return np.abs(F.T @ generators(family, n))


@dataclass(frozen=True, eq=False)
class Zonotope:
    """``Z(G, c, betabar)`` with ``G`` determined by ``family``."""

    family: str
    center: np.ndarray
    betabar: np.ndarray

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise FamilyMismatch(f"unknown generator family {self.family!r}")
        c = np.array(self.center, dtype=float).ravel()
        bb = np.array(self.betabar, dtype=float).ravel()
        n = c.size
        g = 2 * n - 1 if self.family == "pe" else n
        if bb.size != g:
            raise DimensionMismatch(f"{self.family} family in N={n} needs {g} betabar entries, got {bb.size}")
        if np.any(bb < 0):
            raise NegativeBeta("betabar must be non-negative")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(bb))):
            raise ValueError("zonotope data must be finite")
        object.__setattr__(self, "center", _frozen(c))
        object.__setattr__(self, "betabar", _frozen(bb))

    @property
    def N(self) -> int:
        return self.center.size

    @property
    def G(self) -> np.ndarray:
        return generators(self.family, self.N)

    @property
    def n_generators(self) -> int:
        return self.betabar.size

    def widths(self, F: np.ndarray | None = None) -> np.ndarray:
        """Distances between parallel supporting hyperplanes, ``2|F.T G| betabar``."""
        F = facet_normals(self.N) if F is None else F
        return 2.0 * support_matrix(self.family, self.N, F) @ self.betabar

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "N": self.N,
            "c": [float(v) for v in self.center],
            "betabar": [float(v) for v in self.betabar],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Zonotope":
        z = cls(data.get("family", "pe"), data["c"], data["betabar"])
        if "N" in data and int(data["N"]) != z.N:
            raise DimensionMismatch(f"N={data['N']} does not match center length {z.N}")
        return z

    def __eq__(self, other):
        if not isinstance(other, Zonotope):
            return NotImplemented
        return (self.family == other.family and np.array_equal(self.center, other.center)
                and np.array_equal(self.betabar, other.betabar))

    __hash__ = None


def _membership_slack(Z: Zonotope, F: np.ndarray | None, p) -> tuple[np.ndarray, float]:
    p = np.asarray(p, dtype=float).ravel()
    if p.size != Z.N:
        raise DimensionMismatch(f"point has {p.size} entries, zonotope has N={Z.N}")
    if F is None:
        F = family_normals(Z.family, Z.N)
    limit = support_matrix(Z.family, Z.N, F) @ Z.betabar
    lhs = np.abs(F.T @ (p - Z.center))
    scale = max(1.0, float(limit.max(initial=0.0)), float(np.abs(F.T @ Z.center).max(initial=0.0)))
    return lhs - limit, TOL_FEAS * scale


def contains_point(Z: Zonotope, F: np.ndarray | None, p) -> bool:
    """Whether ``p`` lies in ``Z``, via ``q`` facet-direction inequalities.

    ``F`` defaults to the family's own facet normals; for the PE family that
    set covers every possible facet, so the test is exact.
    """
    slack, tol = _membership_slack(Z, F, p)
    return bool(np.all(slack <= tol))


def contains_points(zs, points) -> np.ndarray:
    """Batched :func:`contains_point` for same-family zonotopes, one point each."""
    zs = list(zs)
    family, n = check_family(zs)
    P = np.asarray(points, dtype=float).reshape(len(zs), n)
    F = family_normals(family, n)
    C = np.array([z.center for z in zs])
    limit = np.array([z.betabar for z in zs]) @ support_matrix(family, n).T
    lhs = np.abs((P - C) @ F)
    scale = np.maximum(1.0, np.maximum(limit.max(axis=1, initial=0.0), np.abs(C @ F).max(axis=1, initial=0.0)))
    return np.all(lhs - limit <= TOL_FEAS * scale[:, None], axis=1)


def violated_facet(Z: Zonotope, p, F: np.ndarray | None = None) -> int | None:
    """Index of the most violated facet direction, or ``None`` if ``p`` is inside."""
    slack, tol = _membership_slack(Z, F, p)
    worst = int(np.argmax(slack))
    return worst if slack[worst] > tol else None


def is_inside_polytope(Z: Zonotope, P) -> bool:
    """``A c + |A G| betabar <= b`` (exact zonotope-in-polytope test)."""
    if P.N != Z.N:
        raise DimensionMismatch("zonotope and polytope dimensions differ")
    lhs = P.A @ Z.center + np.abs(P.A @ Z.G) @ Z.betabar
    return bool(np.all(lhs <= P.b + TOL_FEAS * (1.0 + np.abs(P.b))))


def check_family(zs) -> tuple[str, int]:
    if not zs:
        raise ValueError("need at least one zonotope")
    family, n = zs[0].family, zs[0].N
    for z in zs[1:]:
        if z.family != family or z.N != n:
            raise FamilyMismatch("all zonotopes must share N and generator family")
    return family, n


def minkowski_sum(zs) -> Zonotope:
    """Exact Minkowski sum of same-family zonotopes: centers and bounds add."""
    zs = list(zs)
    family, _ = check_family(zs)
    if len(zs) == 1:
        return zs[0]
    c = np.sum([z.center for z in zs], axis=0)
    bb = np.sum([z.betabar for z in zs], axis=0)
    return Zonotope(family, c, bb)


def update_aggregate(zagg: Zonotope, add=(), remove=()) -> Zonotope:
    """Add and remove members from an aggregate without recomputing the sum.

    Raises :class:`NegativeBeta` if a removal drives any bound below
    ``-TOL_FEAS``, which means the caller's bookkeeping is inconsistent.
    Tiny negative round-off is clamped to zero.
    """
    add, remove = list(add), list(remove)
    check_family([zagg, *add, *remove])
    c = zagg.center.copy()
    bb = zagg.betabar.copy()
    for z in add:
        c += z.center
        bb += z.betabar
    for z in remove:
        c -= z.center
        bb -= z.betabar
    if np.any(bb < -TOL_FEAS * max(1.0, float(zagg.betabar.max(initial=0.0)))):
        raise NegativeBeta("removal drives an aggregate bound negative")
    return Zonotope(zagg.family, c, np.maximum(bb, 0.0))


def realize(Z: Zonotope, beta) -> np.ndarray:
    """The point ``c + G beta`` of ``Z``."""
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.size != Z.n_generators:
        raise DimensionMismatch(f"beta has {beta.size} entries, expected {Z.n_generators}")
    tol = TOL_FEAS * max(1.0, float(Z.betabar.max(initial=0.0)))
    if np.any(np.abs(beta) > Z.betabar + tol):
        raise BetaOutOfRange("beta exceeds its bounds")
    return Z.center + Z.G @ beta


def save_zonotopes(path, zs) -> None:
    from .io import atomic_write_json

    atomic_write_json(path, {"version": 1, "zonotopes": [z.to_dict() for z in zs]})


def load_zonotopes(path) -> list[Zonotope]:
    import json

    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "zonotopes" in data:
        data = data["zonotopes"]
    elif isinstance(data, dict):
        data = [data]
    return [Zonotope.from_dict(d) for d in data]
