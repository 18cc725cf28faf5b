"""Discrete harmonic measure on a node grid and its Dirichlet energy.

The grid carries unit conductances on every 4-neighbour edge between
non-excluded nodes.  Edges to excluded nodes are simply absent, which makes
the corresponding faces insulating.  In two dimensions the edge sum
``sum (h_u - h_v)**2`` approximates ``integral |grad h|**2`` with no
grid-spacing factor, so the energy of the harmonic measure is directly the
extremal width between the source and sink node sets.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, InputError
from .geometry import EXCLUDED, ISLAND_BASE, OUTER_BOUNDARY, GridDomain

DEFAULT_TOL = 1e-10
CACHE_ENV = "QAMOD_CACHE_DIR"

_FACES = ("left", "right", "top", "bottom")


@dataclass(frozen=True, eq=False)
class PotentialField:
    values: np.ndarray
    grid: GridDomain
    source_id: str
    sink_id: str
    free_islands: tuple[int, ...]
    residual: float
    iterations: int
    energy: float
    tol: float
    residual_history: tuple[float, ...] = field(default=(), repr=False)

    def diagnostics(self) -> dict:
        return {
            "source": self.source_id,
            "sink": self.sink_id,
            "free_islands": list(self.free_islands),
            "iterations": self.iterations,
            "residual": self.residual,
            "energy": self.energy,
            "residual_history": list(self.residual_history),
        }


def select_nodes(grid: GridDomain, selector) -> tuple[np.ndarray, str]:
    """Resolve a node-set selector to ``(mask, id)``.

    A selector is a boolean mask or a ``+``-joined string of tokens:
    ``outer``, ``islands``, ``island:K``, or a bounding-box face
    (``left``, ``right``, ``top``, ``bottom``).
    """
    labels = grid.labels
    if isinstance(selector, np.ndarray):
        if selector.shape != labels.shape or selector.dtype != bool:
            raise InputError("mask selector must be a boolean array shaped like the grid")
        digest = hashlib.sha256(np.packbits(selector).tobytes()).hexdigest()[:12]
        return selector & (labels != EXCLUDED), f"mask:{digest}"
    if not isinstance(selector, str) or not selector:
        raise InputError(f"bad node-set selector {selector!r}")
    mask = np.zeros(labels.shape, dtype=bool)
    for token in selector.split("+"):
        token = token.strip()
        if token == "outer":
            mask |= labels == OUTER_BOUNDARY
        elif token == "islands":
            mask |= labels >= ISLAND_BASE
        elif token.startswith("island:"):
            try:
                k = int(token.split(":", 1)[1])
            except ValueError:
                raise InputError(f"bad island index in selector {token!r}") from None
            if not 0 <= k < grid.n_islands:
                raise InputError(f"selector {token!r}: scene has {grid.n_islands} islands")
            mask |= labels == ISLAND_BASE + k
        elif token in _FACES:
            if grid.periodic:
                raise InputError("face selectors are not defined on log-polar grids")
            face = np.zeros(labels.shape, dtype=bool)
            if token == "left":
                face[:, 0] = True
            elif token == "right":
                face[:, -1] = True
            elif token == "bottom":
                face[0, :] = True
            else:
                face[-1, :] = True
            mask |= face
        else:
            raise InputError(
                f"unknown selector token {token!r}; use outer, islands, island:K, left, right, top, bottom"
            )
    return mask & (labels != EXCLUDED), selector


def _edge_energy(values: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    flat = values.ravel()
    d = flat[u] - flat[v]
    return float(np.dot(d, d))


def _pcg(A, b, diag, tol, maxiter):
    x = np.zeros_like(b)
    bnorm = math.sqrt(float(np.dot(b, b)))
    if bnorm == 0.0:
        return x, 0.0, 0, []
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(np.dot(r, z))
    history = []
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / float(np.dot(p, Ap))
        x += alpha * p
        r -= alpha * Ap
        rel = math.sqrt(float(np.dot(r, r))) / bnorm
        history.append(rel)
        if rel <= tol:
            return x, rel, it, history
        z = r / diag
        rz_new = float(np.dot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach relative residual {tol:g} in {maxiter} iterations (last {history[-1]:.3g})",
        residuals=history,
        iterations=maxiter,
    )


def solve_potential(grid: GridDomain, source, sink, tol: float = DEFAULT_TOL) -> PotentialField:
    """Discrete harmonic function equal to 1 on ``source`` and 0 on ``sink``.

    All other non-excluded nodes are free, including nodes of islands that
    belong to neither set.  Free components touching only the source are set
    to 1, those touching only the sink or neither set are set to 0.
    """
    if not tol > 0:
        raise InputError("tol must be > 0")
    src, src_id = select_nodes(grid, source)
    snk, snk_id = select_nodes(grid, sink)
    if not src.any():
        raise InputError(f"source {src_id!r} selects no nodes")
    if not snk.any():
        raise InputError(f"sink {snk_id!r} selects no nodes")
    if (src & snk).any():
        raise InputError(f"source {src_id!r} and sink {snk_id!r} overlap")

    labels = grid.labels
    free_islands = tuple(
        k for k in range(grid.n_islands) if not (src | snk)[labels == ISLAND_BASE + k].any()
    )
    cached = _cache_load(grid, src, snk, tol)
    if cached is not None:
        values, residual, iterations, history = cached
    else:
        values, residual, iterations, history = _solve(grid, src, snk, tol)
        _cache_store(grid, src, snk, tol, values, residual, iterations, history)
    u, v = grid.edges()
    energy = _edge_energy(np.nan_to_num(values), u, v)
    values.setflags(write=False)
    return PotentialField(
        values=values,
        grid=grid,
        source_id=src_id,
        sink_id=snk_id,
        free_islands=free_islands,
        residual=residual,
        iterations=iterations,
        energy=energy,
        tol=tol,
        residual_history=tuple(history),
    )


def _solve(grid, src, snk, tol):
    labels = grid.labels
    n = labels.size
    live = (labels != EXCLUDED).ravel()
    srcf = src.ravel()
    fixed = srcf | snk.ravel()
    free = live & ~fixed
    u, v = grid.edges()
    deg = np.bincount(u, minlength=n) + np.bincount(v, minlength=n)

    ff = free[u] & free[v]
    adj = csr_matrix((np.ones(int(ff.sum())), (u[ff], v[ff])), shape=(n, n))
    _, comp = connected_components(adj, directed=False)
    # Free components touching only one fixed set are constant on it.
    snkf = snk.ravel()
    n_comp = comp.max() + 1
    hits_src = np.zeros(n_comp, dtype=bool)
    hits_snk = np.zeros(n_comp, dtype=bool)
    for a, b in ((u, v), (v, u)):
        e = free[a] & srcf[b]
        hits_src[comp[a[e]]] = True
        e = free[a] & snkf[b]
        hits_snk[comp[a[e]]] = True
    unknown = free & (hits_src & hits_snk)[comp]
    lifted = free & (hits_src & ~hits_snk)[comp]

    idx = np.full(n, -1, dtype=np.int64)
    unk = np.flatnonzero(unknown)
    idx[unk] = np.arange(unk.size)
    m = unk.size

    values = np.zeros(n)
    values[srcf | lifted] = 1.0
    values[~live] = np.nan
    if m == 0:
        return values.reshape(labels.shape), 0.0, 0, []

    uu = unknown[u] & unknown[v]
    rows = np.concatenate([idx[u[uu]], idx[v[uu]], np.arange(m)])
    cols = np.concatenate([idx[v[uu]], idx[u[uu]], np.arange(m)])
    diag = deg[unk].astype(float)
    data = np.concatenate([-np.ones(2 * int(uu.sum())), diag])
    A = csr_matrix((data, (rows, cols)), shape=(m, m))

    b = np.zeros(m)
    e1 = unknown[u] & srcf[v]
    e2 = unknown[v] & srcf[u]
    np.add.at(b, idx[u[e1]], 1.0)
    np.add.at(b, idx[v[e2]], 1.0)

    maxiter = max(100, int(50 * math.sqrt(m)))
    x, residual, iterations, history = _pcg(A, b, diag, tol, maxiter)
    values[unk] = x
    return values.reshape(labels.shape), residual, iterations, history


def dirichlet_energy(field: PotentialField) -> float:
    """Edge sum of squared differences of ``field`` (unit conductances)."""
    u, v = field.grid.edges()
    return _edge_energy(np.nan_to_num(field.values), u, v)


def extremal_width(grid: GridDomain, source, sink, tol: float = DEFAULT_TOL) -> float:
    """Extremal width between two node sets: energy of their harmonic measure."""
    return dirichlet_energy(solve_potential(grid, source, sink, tol))


# ---------------------------------------------------------------------------
# Optional on-disk cache, enabled by QAMOD_CACHE_DIR
# ---------------------------------------------------------------------------


def _cache_key(grid, src, snk, tol) -> str:
    h = hashlib.sha256()
    h.update(grid.scene.to_json().encode())
    h.update(json.dumps([grid.resolution, grid.coords, tol, list(grid.labels.shape)]).encode())
    h.update(np.packbits(src).tobytes())
    h.update(np.packbits(snk).tobytes())
    return h.hexdigest()


def _cache_dir() -> Path | None:
    d = os.environ.get(CACHE_ENV)
    return Path(d) if d else None


def _cache_load(grid, src, snk, tol):
    d = _cache_dir()
    if d is None:
        return None
    path = d / f"{_cache_key(grid, src, snk, tol)}.npz"
    if not path.exists():
        return None
    with np.load(path) as data:
        values = data["values"].copy()
        if values.shape != grid.labels.shape:
            return None
        return values, float(data["residual"]), int(data["iterations"]), list(data["history"])


def _cache_store(grid, src, snk, tol, values, residual, iterations, history):
    d = _cache_dir()
    if d is None:
        return
    d.mkdir(parents=True, exist_ok=True)
    key = _cache_key(grid, src, snk, tol)
    tmp = d / f"{key}.{os.getpid()}.tmp.npz"
    np.savez(tmp, values=values, residual=residual, iterations=iterations, history=np.asarray(history, dtype=float))
    os.replace(tmp, d / f"{key}.npz")
