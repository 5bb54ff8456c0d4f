"""Communication graph, Laplacians and spectral helpers.

Graphs are undirected with 0/1 edge weights. Indices are 0-based here; the
config layer converts from the 1-based unit numbering used in scenario files.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DisconnectedGraphError, InvalidTopologyError, SpectralError

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Topology:
    """Undirected communication graph plus the leader indicator ``b``."""

    adjacency: np.ndarray
    leader: np.ndarray = field(default=None)

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=np.int64)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] == 0:
            raise InvalidTopologyError(f"adjacency must be a non-empty square matrix, got shape {adj.shape}")
        if not np.isin(adj, (0, 1)).all():
            raise InvalidTopologyError("adjacency entries must be 0 or 1")
        if np.any(np.diag(adj)):
            raise InvalidTopologyError("adjacency has self-loops")
        if not np.array_equal(adj, adj.T):
            raise InvalidTopologyError("adjacency is not symmetric")
        n = adj.shape[0]
        lead = np.zeros(n, dtype=np.int64) if self.leader is None else np.array(self.leader, dtype=np.int64)
        if lead.shape != (n,) or not np.isin(lead, (0, 1)).all():
            raise InvalidTopologyError("leader must be a length-n 0/1 vector")
        adj.setflags(write=False)
        lead.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "leader", lead)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def has_leader(self) -> bool:
        return bool(self.leader.any())

    @cached_property
    def laplacian(self) -> np.ndarray:
        L = laplacian(self)
        L.setflags(write=False)
        return L

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency))
        return list(zip(i.tolist(), j.tolist()))

    @classmethod
    def from_edges(cls, n: int, edges, leaders=()) -> "Topology":
        adj = np.zeros((n, n), dtype=np.int64)
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidTopologyError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise InvalidTopologyError(f"self-loop at node {i}")
            adj[i, j] = adj[j, i] = 1
        lead = np.zeros(n, dtype=np.int64)
        for k in leaders:
            if not 0 <= k < n:
                raise InvalidTopologyError(f"leader {k} out of range for n={n}")
            lead[k] = 1
        return cls(adj, lead)

    @classmethod
    def ring(cls, n: int, leaders=(0,)) -> "Topology":
        if n < 3:
            return cls.path(n, leaders)
        return cls.from_edges(n, [(i, (i + 1) % n) for i in range(n)], leaders)

    @classmethod
    def path(cls, n: int, leaders=(0,)) -> "Topology":
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)], leaders)

    @classmethod
    def complete(cls, n: int, leaders=(0,)) -> "Topology":
        return cls.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)], leaders)


PRESETS = {
    "ring": Topology.ring,
    "path": Topology.path,
    "complete": Topology.complete,
}


def laplacian(topology: Topology) -> np.ndarray:
    """Graph Laplacian ``D - A`` as a float array."""
    adj = np.asarray(topology.adjacency, dtype=float)
    return np.diag(adj.sum(axis=1)) - adj


def decomposed_laplacian(L: np.ndarray) -> np.ndarray:
    """Laplacian of the graph in which every node gets one private twin.

    Block form ``[[L + I, -I], [-I, I]]``; the first n coordinates are the
    shared sub-states, the last n their hidden twins.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise InvalidTopologyError("Laplacian must be square")
    if not np.allclose(L, L.T, rtol=0.0, atol=SYMMETRY_TOL) or np.any(np.abs(L.sum(axis=1)) > SYMMETRY_TOL):
        raise InvalidTopologyError("not a valid undirected Laplacian")
    eye = np.eye(L.shape[0])
    return np.block([[L + eye, -eye], [-eye, eye]])


def jacobi_eigh(M: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a dense symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, Q)`` with ascending ``w`` and ``M ~= Q @ diag(w) @ Q.T``.
    """
    A = np.array(M, dtype=float)
    n = A.shape[0]
    Q = np.eye(n)
    scale = np.linalg.norm(A)
    if n < 2 or scale == 0.0:
        return np.diag(A).copy(), Q
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        # summed directly: sum(A*A) - sum(diag**2) cancels catastrophically near convergence
        off = np.linalg.norm(A[offdiag])
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) Givens rotation
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                qp = Q[:, p].copy()
                qq = Q[:, q].copy()
                Q[:, p] = c * qp - s * qq
                Q[:, q] = s * qp + c * qq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], Q[:, order]


@dataclass(frozen=True)
class SpectralSummary:
    eigenvalues: np.ndarray
    fiedler: float
    zero_multiplicity: int

    @property
    def connected(self) -> bool:
        return self.fiedler > 0.0


def spectral_summary(M: np.ndarray, tol: float | None = None) -> SpectralSummary:
    """Sorted spectrum and algebraic connectivity of a Laplacian-like matrix.

    ``fiedler`` is the smallest eigenvalue above ``tol`` when zero is a simple
    eigenvalue, and 0.0 when it is repeated (disconnected graph). ``tol``
    defaults to ``1e-9 * max(1, ||M||_F)``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise SpectralError("matrix must be square")
    if not np.allclose(M, M.T, rtol=0.0, atol=SYMMETRY_TOL):
        raise SpectralError("matrix is not symmetric")
    if tol is None:
        tol = 1e-9 * max(1.0, float(np.linalg.norm(M)))
    w, _ = jacobi_eigh(M)
    positive = w[w > tol]
    if positive.size == 0:
        raise DisconnectedGraphError("no strictly positive eigenvalue")
    zeros = int(np.sum(np.abs(w) <= tol))
    fiedler = float(positive[0]) if zeros <= 1 else 0.0
    return SpectralSummary(eigenvalues=w, fiedler=fiedler, zero_multiplicity=zeros)


def validate_connected(topology: Topology) -> bool:
    """Breadth-first reachability from node 0."""
    adj = topology.adjacency
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(adj[i]):
            if not seen[j]:
                seen[j] = True
                queue.append(int(j))
    return bool(seen.all())


def leader_matrix_min_eig(topology: Topology) -> float:
    """Smallest eigenvalue of ``L + diag(b)``; the leader-follower decay rate per unit gain."""
    M = topology.laplacian + np.diag(topology.leader.astype(float))
    return float(jacobi_eigh(M)[0][0])
