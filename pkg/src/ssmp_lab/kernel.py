"""Flat-table MAP encoding and the replica-batch dispatcher.

``build_tables`` lowers a :class:`~ssmp_lab.map_core.MapSpec` into
plain contiguous arrays (rates, cumulative destination tables, a
pooled jump-law atom store) that both event-loop kernels — the
compiled ``_kernel_cy`` and the pure-Python ``_kernel_py`` reference —
consume identically.  ``run_replicas`` fans a batch of independent
replicas over the selected kernel and returns columnar results.

Reproducibility contract: replica ``r`` of a batch with master seed
``s`` always draws from ``PCG64(SeedSequence((s, r)))``, regardless of
kernel, chunking or thread count; batch outputs are therefore a pure
function of ``(spec, arguments, seed)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernel_py
from .map_core import MapSpec
from .numerics import DomainError

try:  # pragma: no cover - absence is a legitimate install state
    from . import _kernel_cy
except ImportError:  # pragma: no cover
    _kernel_cy = None

__all__ = [
    "KernelTables",
    "ReplicaBatch",
    "build_tables",
    "run_replicas",
    "active_kernel_name",
    "available_kernel_names",
    "REASON_NAMES",
    "CROSS_NAMES",
]

REASON_NAMES = _kernel_py.REASON_NAMES
CROSS_NAMES = _kernel_py.CROSS_NAMES

_CHUNK = 4096

_ATOM_POINT = 0
_ATOM_EXP = 1


@dataclass(frozen=True)
class KernelTables:
    """Flat encoding of a simulable MapSpec (drift + CP only).

    Jump laws are pooled and deduplicated; ``law_offset[l]`` /
    ``law_offset[l+1]`` bracket law ``l``'s atoms in the atom arrays.
    ``atom_wcum`` holds the running mixture weights in atom order, the
    exact partial sums the reference sampler compares against.
    """

    n_states: int
    drift: np.ndarray
    switch_rate: np.ndarray
    cp_rate: np.ndarray
    cp_law: np.ndarray
    dest_cum: np.ndarray
    dest_idx: np.ndarray
    switch_law: np.ndarray
    law_offset: np.ndarray
    atom_kind: np.ndarray
    atom_param: np.ndarray
    atom_sign: np.ndarray
    atom_wcum: np.ndarray


def build_tables(spec: MapSpec) -> KernelTables:
    """Lower ``spec`` to kernel tables; rejects Gaussian components."""
    n = spec.n_states
    for i, comp in enumerate(spec.components):
        if comp.gaussian_sd != 0.0:
            raise DomainError(
                f"state {i} has gaussian_sd={comp.gaussian_sd}: exact event-driven "
                "simulation requires gaussian_sd = 0"
            )
    q = spec.q

    law_ids: dict = {}
    laws: list = []

    def law_id(law) -> int:
        key = (law.weights, law.atoms)
        if key not in law_ids:
            law_ids[key] = len(laws)
            laws.append(law)
        return law_ids[key]

    drift = np.array([c.drift for c in spec.components], dtype=np.float64)
    cp_rate = np.array([c.cp_rate for c in spec.components], dtype=np.float64)
    switch_rate = -q.diagonal().copy()
    cp_law = np.array(
        [law_id(c.cp_jump_law) if c.cp_rate > 0.0 else -1 for c in spec.components],
        dtype=np.int64,
    )

    dest_cum = np.zeros((n, n - 1), dtype=np.float64)
    dest_idx = np.zeros((n, n - 1), dtype=np.int64)
    switch_law = np.full((n, n), -1, dtype=np.int64)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        dest_idx[i] = others
        dest_cum[i] = np.cumsum(q[i, others] / switch_rate[i])
        for j in others:
            switch_law[i, j] = law_id(spec.switch_jumps[i][j])

    law_offset = np.zeros(len(laws) + 1, dtype=np.int64)
    kinds: list[int] = []
    params: list[float] = []
    signs: list[int] = []
    wcum: list[float] = []
    for l, law in enumerate(laws):
        acc = 0.0
        for w, atom in zip(law.weights, law.atoms):
            acc += w
            wcum.append(acc)
            if atom[0] == "point":
                kinds.append(_ATOM_POINT)
                params.append(atom[1])
                signs.append(0)
            else:
                kinds.append(_ATOM_EXP)
                params.append(atom[1])
                signs.append(atom[2])
        law_offset[l + 1] = len(kinds)

    return KernelTables(
        n_states=n,
        drift=drift,
        switch_rate=np.ascontiguousarray(switch_rate, dtype=np.float64),
        cp_rate=cp_rate,
        cp_law=cp_law,
        dest_cum=dest_cum,
        dest_idx=dest_idx,
        switch_law=switch_law,
        law_offset=law_offset,
        atom_kind=np.array(kinds, dtype=np.int8),
        atom_param=np.array(params, dtype=np.float64),
        atom_sign=np.array(signs, dtype=np.int8),
        atom_wcum=np.array(wcum, dtype=np.float64),
    )


@dataclass(frozen=True)
class ReplicaBatch:
    """Columnar terminal records of a replica batch.

    ``reason`` indexes :data:`REASON_NAMES`; ``cross_kind`` indexes
    :data:`CROSS_NAMES` (-1 when the run did not end on a level).
    ``exp_integral`` is ``integral_0^t exp(alpha xi(u)) du`` when the
    batch ran with ``alpha > 0``, else zeros.  ``occupation`` holds the
    per-state time spent inside ``occ_window``, or ``None``.
    """

    t_end: np.ndarray
    xi_end: np.ndarray
    state_end: np.ndarray
    reason: np.ndarray
    n_events: np.ndarray
    xi_pre: np.ndarray
    cross_kind: np.ndarray
    exp_integral: np.ndarray
    max_xi: np.ndarray
    min_xi: np.ndarray
    occupation: np.ndarray | None
    seed: int
    kernel: str

    @property
    def n(self) -> int:
        return len(self.t_end)


def available_kernel_names() -> tuple[str, ...]:
    return ("compiled", "python") if _kernel_cy is not None else ("python",)


def active_kernel_name() -> str:
    """Kernel selected by default: compiled when built, unless
    ``SSMP_LAB_KERNEL=python`` overrides."""
    forced = os.environ.get("SSMP_LAB_KERNEL", "").strip().lower()
    if forced in ("py", "python"):
        return "python"
    if forced == "compiled" and _kernel_cy is None:
        raise DomainError("SSMP_LAB_KERNEL=compiled but the compiled kernel is not built")
    return "compiled" if _kernel_cy is not None else "python"


def _kernel_module(name: str | None):
    if name is None:
        name = active_kernel_name()
    if name in ("py", "python"):
        return _kernel_py, "python"
    if name == "compiled":
        if _kernel_cy is None:
            raise DomainError("compiled kernel requested but not built")
        return _kernel_cy, "compiled"
    raise DomainError(f"unknown kernel {name!r}; expected 'compiled' or 'python'")


def _as_start_array(value, n: int, dtype) -> np.ndarray:
    arr = np.asarray(value, dtype=dtype)
    if arr.ndim == 0:
        return np.full(n, arr[()], dtype=dtype)
    if arr.shape != (n,):
        raise DomainError(f"per-replica start array must have shape ({n},), got {arr.shape}")
    return np.ascontiguousarray(arr)


def run_replicas(
    spec: MapSpec | KernelTables,
    *,
    n: int,
    seed: int,
    x0=0.0,
    i0=0,
    horizon: float = math.inf,
    up_level: float = math.inf,
    down_level: float = -math.inf,
    clock_target: float = math.inf,
    alpha: float = 0.0,
    occ_window: tuple[float, float] | None = None,
    event_cap: int = 10**8,
    threads: int = 1,
    kernel: str | None = None,
) -> ReplicaBatch:
    """Run ``n`` independent replicas and collect terminal records.

    ``x0`` / ``i0`` may be scalars or per-replica arrays (the latter
    supports composite estimators that restart from recorded states).
    At least one stop rule must be active; ``clock_target`` requires
    ``alpha > 0``.  Results do not depend on ``threads``.
    """
    tab = spec if isinstance(spec, KernelTables) else build_tables(spec)
    if n <= 0:
        raise DomainError("need n >= 1 replicas")
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise DomainError("seed must be a non-negative integer")
    if alpha < 0.0:
        raise DomainError("alpha must be >= 0")
    if math.isfinite(clock_target) and (alpha <= 0.0 or clock_target <= 0.0):
        raise DomainError("a clock stop needs alpha > 0 and clock_target > 0")
    has_stop = (
        math.isfinite(horizon)
        or math.isfinite(up_level)
        or math.isfinite(down_level)
        or math.isfinite(clock_target)
    )
    if not has_stop:
        raise DomainError("no stop rule can ever trigger")
    if math.isfinite(horizon) and horizon <= 0.0:
        raise DomainError("horizon must be > 0")
    if event_cap <= 0:
        raise DomainError("event_cap must be >= 1")

    x0_arr = _as_start_array(x0, n, np.float64)
    i0_arr = _as_start_array(i0, n, np.int64)
    if np.any((i0_arr < 0) | (i0_arr >= tab.n_states)):
        raise DomainError("start state out of range")
    if np.any(x0_arr >= up_level) or np.any(x0_arr <= down_level):
        raise DomainError("replicas must start strictly between the level rules")

    if occ_window is not None:
        occ_lo, occ_hi = float(occ_window[0]), float(occ_window[1])
        if not occ_lo < occ_hi:
            raise DomainError("occ_window must be an interval (lo, hi)")
        occ = np.zeros((n, tab.n_states), dtype=np.float64)
    else:
        occ_lo = occ_hi = math.nan
        occ = None

    mod, mod_name = _kernel_module(kernel)
    out = np.empty((n, _kernel_py.N_FIELDS), dtype=np.float64)
    stop = (float(horizon), float(up_level), float(down_level), float(clock_target))
    seed = int(seed)

    def run_chunk(r0: int, r1: int) -> None:
        mod.run_batch(
            tab, x0_arr, i0_arr, stop, float(alpha), occ_lo, occ_hi,
            int(event_cap), seed, r0, r1, out, occ,
        )

    bounds = list(range(0, n, _CHUNK)) + [n]
    chunks = list(zip(bounds[:-1], bounds[1:]))
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_chunk, r0, r1) for r0, r1 in chunks]
            for fut in futures:
                fut.result()
    else:
        for r0, r1 in chunks:
            run_chunk(r0, r1)

    return ReplicaBatch(
        t_end=out[:, 0].copy(),
        xi_end=out[:, 1].copy(),
        state_end=out[:, 2].astype(np.int64),
        reason=out[:, 3].astype(np.int64),
        n_events=out[:, 4].astype(np.int64),
        xi_pre=out[:, 5].copy(),
        cross_kind=out[:, 6].astype(np.int64),
        exp_integral=out[:, 7].copy(),
        max_xi=out[:, 8].copy(),
        min_xi=out[:, 9].copy(),
        occupation=occ,
        seed=seed,
        kernel=mod_name,
    )
