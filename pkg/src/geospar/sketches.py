"""Sketched Laplacian multiply and solve maintained under updates.

Both structures keep an m x m sketch L~ = Phi * L_H * Psi^T of the
sparsifier's Laplacian plus a sketched vector, and refresh them from the
sparsifier's sparse diff after every graph update.  The incremental state
must match a from-scratch recompute exactly up to float accumulation;
accuracy against the *exact* graph is audited unsketched with dense
oracles, because the eps guarantees are statements about L_H, not about
the sketched image.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, NumericalFailure, SingularMatrix
from .kernels import KernelFunction, PointSet, dense_laplacian
from .projection import DEFAULT_C_SK, SketchMatrix, make_sketch_pair
from .sparsifier import DynamicGeoSpar

PINV_RCOND = 1e-10


def _diff_sketch(phi: SketchMatrix, psi: SketchMatrix, diff: list) -> np.ndarray:
    """Phi * (sum of signed edge updates) * Psi^T as a sum of rank-1 terms."""
    m = phi.m
    if not diff:
        return np.zeros((m, m))
    ii = np.fromiter((e[0] for e in diff), dtype=np.int64, count=len(diff))
    jj = np.fromiter((e[1] for e in diff), dtype=np.int64, count=len(diff))
    ww = np.fromiter((e[2] for e in diff), dtype=np.float64, count=len(diff))
    u = (phi.matrix[:, ii] - phi.matrix[:, jj]) * ww
    v = psi.matrix[:, ii] - psi.matrix[:, jj]
    return u @ v.T


def _sparse_apply(mat: np.ndarray, delta) -> np.ndarray:
    """mat @ delta for delta given as [(index, value), ...] or a dense vector."""
    if isinstance(delta, np.ndarray):
        return mat @ delta
    out = np.zeros(mat.shape[0])
    for idx, val in delta:
        out += mat[:, int(idx)] * float(val)
    return out


def _densify(n: int, delta) -> np.ndarray:
    if isinstance(delta, np.ndarray):
        return delta
    out = np.zeros(n)
    for idx, val in delta:
        out[int(idx)] += float(val)
    return out


class MultiplyState:
    """Maintains z~ = L~ v~, a sketch of L_H v."""

    def __init__(self, dgs: DynamicGeoSpar, phi, psi, v):
        self.dgs = dgs
        self.phi = phi
        self.psi = psi
        self.v = np.array(v, dtype=np.float64)
        self.lt = phi.matrix @ dgs.get_laplacian() @ psi.matrix.T
        self.vt = psi.apply(self.v)
        self.zt = self.lt @ self.vt

    @property
    def m(self) -> int:
        return self.phi.m

    def update_g(self, i: int, z):
        self.dgs.update(i, z)
        self.apply_graph_diff(self.dgs.get_diff())

    def apply_graph_diff(self, diff: list):
        """Fold a batch of signed edge updates into the sketches."""
        dlt = _diff_sketch(self.phi, self.psi, diff)
        self.zt = self.zt + dlt @ self.vt
        self.lt = self.lt + dlt

    def update_v(self, delta):
        dvt = _sparse_apply(self.psi.matrix, delta)
        self.v = self.v + _densify(self.dgs.n, delta)
        self.vt = self.vt + dvt
        self.zt = self.zt + self.lt @ dvt

    def query(self) -> np.ndarray:
        return self.zt.copy()

    def scratch_recompute(self):
        """(L~, v~, z~) rebuilt from the current graph and vector."""
        lt = self.phi.matrix @ self.dgs.get_laplacian() @ self.psi.matrix.T
        vt = self.psi.apply(self.v)
        return lt, vt, lt @ vt


class SolveState:
    """Maintains z~ = pinv(L~) b~, a sketch of L_H^+ b."""

    def __init__(self, dgs: DynamicGeoSpar, phi, psi, b):
        self.dgs = dgs
        self.phi = phi
        self.psi = psi
        self.b = np.array(b, dtype=np.float64)
        self.lt = phi.matrix @ dgs.get_laplacian() @ psi.matrix.T
        self.lt_pinv = _pinv(self.lt)
        self.bt = phi.apply(self.b)
        self.zt = self.lt_pinv @ self.bt

    @property
    def m(self) -> int:
        return self.phi.m

    def update_g(self, i: int, z):
        self.dgs.update(i, z)
        self.apply_graph_diff(self.dgs.get_diff())

    def apply_graph_diff(self, diff: list):
        self.lt = self.lt + _diff_sketch(self.phi, self.psi, diff)
        self.lt_pinv = _pinv(self.lt)
        self.zt = self.lt_pinv @ self.bt

    def update_b(self, delta):
        dbt = _sparse_apply(self.phi.matrix, delta)
        self.b = self.b + _densify(self.dgs.n, delta)
        self.bt = self.bt + dbt
        self.zt = self.zt + self.lt_pinv @ dbt

    def query(self) -> np.ndarray:
        return self.zt.copy()

    def scratch_recompute(self):
        lt = self.phi.matrix @ self.dgs.get_laplacian() @ self.psi.matrix.T
        bt = self.phi.apply(self.b)
        return lt, bt, _pinv(lt) @ bt


def _pinv(mat: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.pinv(mat, rcond=PINV_RCOND)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"pseudoinverse failed: {exc}") from exc


def _make_states(pset: PointSet, kernel: KernelFunction, eps, delta, k, seed,
                 c_sk, dgs_kwargs):
    ss_dgs, ss_sketch = np.random.SeedSequence(seed).spawn(2)
    dgs = DynamicGeoSpar.initialize(pset, kernel, eps, delta, k,
                                    int(ss_dgs.generate_state(1)[0]),
                                    **dgs_kwargs)
    phi, psi = make_sketch_pair(pset.n, eps, delta,
                                int(ss_sketch.generate_state(1)[0]), c_sk)
    return dgs, phi, psi


def multiply_init(pset: PointSet, kernel: KernelFunction, v, eps: float,
                  delta: float, k: int, seed: int, c_sk: float = DEFAULT_C_SK,
                  **dgs_kwargs) -> MultiplyState:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (pset.n,):
        raise DimensionMismatch(f"v must have length {pset.n}")
    dgs, phi, psi = _make_states(pset, kernel, eps, delta, k, seed, c_sk,
                                 dgs_kwargs)
    return MultiplyState(dgs, phi, psi, v)


def solve_init(pset: PointSet, kernel: KernelFunction, b, eps: float,
               delta: float, k: int, seed: int, c_sk: float = DEFAULT_C_SK,
               **dgs_kwargs) -> SolveState:
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (pset.n,):
        raise DimensionMismatch(f"b must have length {pset.n}")
    dgs, phi, psi = _make_states(pset, kernel, eps, delta, k, seed, c_sk,
                                 dgs_kwargs)
    return SolveState(dgs, phi, psi, b)


@dataclass(frozen=True)
class AuditReport:
    multiply_error: float
    solve_error: float
    eps: float
    multiply_ok: bool
    solve_ok: bool

    def as_dict(self):
        return {
            "multiply_error": self.multiply_error,
            "solve_error": self.solve_error,
            "eps": self.eps,
            "multiply_ok": self.multiply_ok,
            "solve_ok": self.solve_ok,
        }


def approximation_audit(state, vector: Optional[np.ndarray] = None) -> AuditReport:
    """Unsketched accuracy audit against the exact kernel graph.

    Measures ||L_H v - L_G v|| and ||L_H^+ b - L_G^+ b|| in the norms
    natural to each statement (L_G^+ and L_G respectively), normalized by
    the exact quantity.  The multiply side must come in at <= eps and the
    solve side at <= 2 eps / (1 - eps) whenever H is an eps-sparsifier.
    Dense-oracle computation; desk scale only.
    """
    dgs = state.dgs
    if vector is not None:
        vec = np.asarray(vector, dtype=np.float64)
    elif isinstance(state, MultiplyState):
        vec = state.v
    else:
        vec = state.b
    lap_g = dense_laplacian(dgs.pset.points, dgs.kernel)
    lap_h = dgs.get_laplacian()
    eigvals = np.linalg.eigvalsh(lap_g)
    zero_cut = 1e-9 * max(1.0, float(abs(eigvals).max()))
    if int(np.sum(eigvals < zero_cut)) > 1:
        raise SingularMatrix("exact graph is disconnected")
    g_pinv = np.linalg.pinv(lap_g)
    # multiply side, measured in the L_G^+ norm
    r = (lap_h - lap_g) @ vec
    num = float(np.sqrt(max(r @ g_pinv @ r, 0.0)))
    den = float(np.sqrt(max(vec @ lap_g @ vec, 0.0)))
    mul_err = num / den if den > 0 else 0.0
    # solve side, measured in the L_G norm, on the all-ones complement
    b = vec - vec.mean()
    h_pinv = np.linalg.pinv(lap_h)
    d = (h_pinv - g_pinv) @ b
    num = float(np.sqrt(max(d @ lap_g @ d, 0.0)))
    den = float(np.sqrt(max(b @ g_pinv @ b, 0.0)))
    solve_err = num / den if den > 0 else 0.0
    eps = dgs.eps
    bound = 2.0 * eps / (1.0 - eps)
    return AuditReport(mul_err, solve_err, eps,
                       mul_err <= eps, solve_err <= bound)
