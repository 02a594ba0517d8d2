"""Three-pulse delay scans over the dissipative polariton chain.

The measured object is

    S(t1, t2, t3) = Tr[ P_e(j) G(t3) { (G(t2) [A^n G(t1) rho0]) (A^dag)^n } ]

with rho0 the phonon superfluid, A the collective raising kick, n the
kick order, and P_e(j) the excited projector on the readout ion. Exactly
two of the three delays are gridded per scan; the third is held fixed.

Everything is computed in the vectorized (row-major) representation.
Stages before the first gridded delay collapse into one prefix vector,
stages between the two gridded delays into one matrix, and stages after
the second into the readout covector, so the scan itself is a chain of
matrix-vector products. Each row of the output grid is swept
independently, which keeps results bit-identical for any thread count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .hilbert import Basis, BasisSpec, build_basis, full_local_operator
from .model import ModelParams, PhononNetwork, equilibrium_positions, phonon_network, build_polariton_hamiltonian
from .states import phonon_superfluid
from .dynamics import HealthLog, Liouvillian, build_liouvillian, collective_dephasing, kick_operator

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class DelayAxis:
    """One pulse delay: either a fixed value or a uniform grid, in ms."""

    fixed: float | None = None
    start: float = 0.0
    step: float = 0.0
    count: int = 0

    @classmethod
    def fixed_delay(cls, value: float) -> "DelayAxis":
        return cls(fixed=float(value))

    @classmethod
    def grid(cls, start: float, step: float, count: int) -> "DelayAxis":
        return cls(fixed=None, start=float(start), step=float(step), count=int(count))

    def __post_init__(self):
        if self.fixed is not None:
            if self.fixed < 0:
                raise ValueError(f"fixed delay must be >= 0 ms, got {self.fixed}")
            return
        if self.count < 1:
            raise ValueError(f"grid count must be >= 1, got {self.count}")
        if self.step <= 0:
            raise ValueError(f"grid step must be > 0 ms, got {self.step}")
        if self.start < 0:
            raise ValueError(f"grid start must be >= 0 ms, got {self.start}")

    @property
    def is_grid(self) -> bool:
        return self.fixed is None

    def values(self) -> np.ndarray:
        if not self.is_grid:
            return np.array([self.fixed])
        return self.start + self.step * np.arange(self.count)

    def describe(self):
        if self.is_grid:
            return {"start": self.start, "step": self.step, "count": self.count}
        return self.fixed


_AXIS_NAMES = ("t1", "t2", "t3")


@dataclass(frozen=True)
class SequenceConfig:
    """Delay layout plus readout choices for one scan."""

    t1: DelayAxis
    t2: DelayAxis
    t3: DelayAxis
    readout_ion: int = 1
    n_kicks: int = 2

    def __post_init__(self):
        gridded = [ax.is_grid for ax in (self.t1, self.t2, self.t3)]
        if sum(gridded) != 2:
            held = [n for n, g in zip(_AXIS_NAMES, gridded) if not g]
            raise ValueError(
                "exactly two delays must be gridded; "
                f"got grids on {[n for n, g in zip(_AXIS_NAMES, gridded) if g]} "
                f"with {held} fixed"
            )
        if self.readout_ion < 1:
            raise ValueError(f"readout_ion is 1-based, got {self.readout_ion}")
        if self.n_kicks < 1:
            raise ValueError(f"n_kicks must be >= 1, got {self.n_kicks}")

    @property
    def axes(self) -> tuple[str, str]:
        """Names of the gridded delays, scan order (earlier pulse first)."""
        return tuple(
            n for n, ax in zip(_AXIS_NAMES, (self.t1, self.t2, self.t3)) if ax.is_grid
        )

    @property
    def fixed_name(self) -> str:
        (name,) = tuple(
            n
            for n, ax in zip(_AXIS_NAMES, (self.t1, self.t2, self.t3))
            if not ax.is_grid
        )
        return name

    @property
    def kind(self) -> str:
        """Scan label: s23, s13 or s12 by which delays are gridded."""
        a, b = self.axes
        return "s" + a[1] + b[1]

    def axis(self, name: str) -> DelayAxis:
        return {"t1": self.t1, "t2": self.t2, "t3": self.t3}[name]


@dataclass
class ModelContext:
    """Everything a scan needs, assembled once per parameter set."""

    params: ModelParams
    spec: BasisSpec
    basis: Basis
    network: PhononNetwork
    hamiltonian: np.ndarray
    liouvillian: Liouvillian
    kick: np.ndarray
    health: HealthLog = field(default_factory=HealthLog)

    def initial_state(self) -> np.ndarray:
        psi = phonon_superfluid(self.spec, self.network, basis=self.basis)
        return np.outer(psi, psi.conj())

    def readout_projector(self, ion: int) -> np.ndarray:
        if not 1 <= ion <= self.spec.n_ions:
            raise ValueError(
                f"readout ion {ion} outside chain of {self.spec.n_ions}"
            )
        up = full_local_operator("sigma_plus", ion, self.spec)
        down = full_local_operator("sigma_minus", ion, self.spec)
        return self.basis.project(up @ down)


def build_context(
    params: ModelParams,
    n_ions: int = 2,
    n_max: int | None = None,
    sector: bool = True,
) -> ModelContext:
    """Assemble basis, phonon network, generator and kick for a chain.

    sector=True restricts everything to the filling-one excitation
    sector, where the phonon truncation is exact; full-space mode is
    supported but quadratically larger.
    """
    spec = BasisSpec(
        n_ions=n_ions,
        phonon_cutoff=n_max,
        sector=n_ions if sector else None,
    )
    basis = build_basis(spec)
    network = phonon_network(equilibrium_positions(n_ions), params)
    h = build_polariton_hamiltonian(network, params, spec)
    jumps = []
    if params.gamma > 0:
        jumps.append(collective_dephasing(spec, params.gamma, basis=basis))
    liouv = build_liouvillian(h, jumps)
    kick = kick_operator(network, spec, basis=basis)
    return ModelContext(
        params=params,
        spec=spec,
        basis=basis,
        network=network,
        hamiltonian=h,
        liouvillian=liouv,
        kick=kick,
    )


def _prop(liouv: Liouvillian, t: float) -> np.ndarray:
    return expm(liouv.matrix * t)


def _super_stages(ctx: ModelContext, seq: SequenceConfig):
    """Ordered scan stages in the vectorized representation.

    Propagation stages carry their DelayAxis; kick stages are dense
    superoperator matrices."""
    d = ctx.basis.dim
    eye = np.eye(d)
    a_n = np.linalg.matrix_power(ctx.kick, seq.n_kicks)
    left = np.kron(a_n, eye)  # rho -> A^n rho
    right = np.kron(eye, a_n.conj())  # rho -> rho (A^dag)^n
    return [
        ("prop", seq.t1),
        ("mat", left),
        ("prop", seq.t2),
        ("mat", right),
        ("prop", seq.t3),
    ]


def _readout_covector(ctx: ModelContext, seq: SequenceConfig) -> np.ndarray:
    # Tr[P rho] = vec(P^T) . vec(rho) in row-major vectorization.
    return ctx.readout_projector(seq.readout_ion).T.reshape(-1)


def signal_point(
    ctx: ModelContext, seq: SequenceConfig, t1: float, t2: float, t3: float
) -> complex:
    """Single delay triple, composed stage by stage. Spot checks only;
    scans should go through scan_signal."""
    delays = iter((t1, t2, t3))
    x = ctx.initial_state().reshape(-1)
    for stage in _super_stages(ctx, seq):
        if stage[0] == "prop":
            x = _prop(ctx.liouvillian, next(delays)) @ x
        else:
            x = stage[1] @ x
    return complex(_readout_covector(ctx, seq) @ x)


@dataclass
class SignalGrid:
    """Scan output: complex values over two delay axes."""

    axis_a: np.ndarray
    axis_b: np.ndarray
    values: np.ndarray
    labels: tuple[str, str]
    fixed: dict
    metadata: dict

    @property
    def shape(self):
        return self.values.shape


def _row_sweep(x_row, m_mid, gb0, gbd, w_eff, count_b):
    y = gb0 @ (m_mid @ x_row)
    out = np.empty(count_b, dtype=complex)
    for j in range(count_b):
        out[j] = w_eff @ y
        if j + 1 < count_b:
            y = gbd @ y
    return out


def _load_checkpoint(path: Path, header: dict):
    """Completed rows from an interrupted scan, keyed by row index.

    A checkpoint written against a different grid or parameter set is
    silently discarded rather than trusted."""
    rows = {}
    if not path.exists():
        return rows
    with open(path) as fh:
        first = fh.readline()
        if not first:
            return {}
        try:
            stored = json.loads(first)
        except json.JSONDecodeError:
            return {}
        if stored != header:
            return {}
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                rows[int(rec["row"])] = np.array(rec["re"]) + 1j * np.array(rec["im"])
            except (json.JSONDecodeError, KeyError, ValueError):
                break  # torn tail write; everything before it still counts
    return rows


def scan_signal(
    ctx: ModelContext,
    seq: SequenceConfig,
    threads: int = 1,
    checkpoint_path: str | Path | None = None,
) -> SignalGrid:
    """Sweep the two gridded delays and return the complex signal grid.

    Rows (first gridded axis) are computed independently; with
    threads > 1 they run on a thread pool, and the values are identical
    to a serial run byte for byte. If checkpoint_path is given, one
    record per finished row is appended there, a matching file from an
    interrupted run is resumed, and the file is removed once the scan
    completes. Non-finite points are zeroed and reported under
    metadata["failed_points"] instead of aborting the scan.
    """
    stages = _super_stages(ctx, seq)
    grid_positions = [
        i for i, s in enumerate(stages) if s[0] == "prop" and s[1].is_grid
    ]
    ia, ib = grid_positions
    ax_a = stages[ia][1]
    ax_b = stages[ib][1]

    def stage_matrix(stage):
        if stage[0] == "mat":
            return stage[1]
        return _prop(ctx.liouvillian, stage[1].fixed)

    x = ctx.initial_state().reshape(-1)
    for stage in stages[:ia]:
        x = stage_matrix(stage) @ x

    m_mid = np.eye(ctx.liouvillian.superop_dim, dtype=complex)
    for stage in stages[ia + 1 : ib]:
        m_mid = stage_matrix(stage) @ m_mid

    w_eff = _readout_covector(ctx, seq)
    m_post = np.eye(ctx.liouvillian.superop_dim, dtype=complex)
    for stage in stages[ib + 1 :]:
        m_post = stage_matrix(stage) @ m_post
    w_eff = w_eff @ m_post

    ga0 = _prop(ctx.liouvillian, ax_a.start)
    gad = _prop(ctx.liouvillian, ax_a.step)
    gb0 = _prop(ctx.liouvillian, ax_b.start)
    gbd = _prop(ctx.liouvillian, ax_b.step)

    count_a, count_b = ax_a.count, ax_b.count
    row_states = []
    x = ga0 @ x
    for _ in range(count_a):
        row_states.append(x)
        x = gad @ x

    header = {
        "version": CHECKPOINT_VERSION,
        "kind": seq.kind,
        "shape": [count_a, count_b],
        "axis_a": [ax_a.start, ax_a.step],
        "axis_b": [ax_b.start, ax_b.step],
        "n_kicks": seq.n_kicks,
        "readout_ion": seq.readout_ion,
        "params": asdict(ctx.params),
    }
    done = {}
    ckpt = Path(checkpoint_path) if checkpoint_path is not None else None
    if ckpt is not None:
        done = _load_checkpoint(ckpt, header)
    resumed = sorted(done)

    values = np.zeros((count_a, count_b), dtype=complex)
    todo = [i for i in range(count_a) if i not in done]
    for i, row in done.items():
        if row.shape == (count_b,):
            values[i] = row
        else:
            todo.append(i)
    todo.sort()

    def work(i):
        return _row_sweep(row_states[i], m_mid, gb0, gbd, w_eff, count_b)

    ckpt_fh = None
    if ckpt is not None and todo:
        ckpt.parent.mkdir(parents=True, exist_ok=True)
        fresh = not resumed
        ckpt_fh = open(ckpt, "w" if fresh else "a")
        if fresh:
            ckpt_fh.write(json.dumps(header, sort_keys=True) + "\n")

    try:
        if threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = pool.map(work, todo)
                for i, row in zip(todo, results):
                    values[i] = row
                    if ckpt_fh is not None:
                        ckpt_fh.write(_row_record(i, row))
                        ckpt_fh.flush()
        else:
            for i in todo:
                row = work(i)
                values[i] = row
                if ckpt_fh is not None:
                    ckpt_fh.write(_row_record(i, row))
                    ckpt_fh.flush()
    finally:
        if ckpt_fh is not None:
            ckpt_fh.close()

    failed = [
        [int(i), int(j)] for i, j in zip(*np.nonzero(~np.isfinite(values)))
    ]
    if failed:
        values[~np.isfinite(values)] = 0.0

    if ckpt is not None and ckpt.exists():
        ckpt.unlink()

    name_a, name_b = seq.axes
    metadata = {
        "kind": seq.kind,
        "axes": {name_a: ax_a.describe(), name_b: ax_b.describe()},
        "fixed": {seq.fixed_name: seq.axis(seq.fixed_name).fixed},
        "readout_ion": seq.readout_ion,
        "n_kicks": seq.n_kicks,
        "params": asdict(ctx.params),
        "n_ions": ctx.spec.n_ions,
        "failed_points": failed,
        "resumed_rows": len(resumed),
    }
    return SignalGrid(
        axis_a=ax_a.values(),
        axis_b=ax_b.values(),
        values=values,
        labels=(name_a, name_b),
        fixed={seq.fixed_name: seq.axis(seq.fixed_name).fixed},
        metadata=metadata,
    )


def _row_record(i: int, row: np.ndarray) -> str:
    return (
        json.dumps(
            {"row": int(i), "re": list(row.real), "im": list(row.imag)},
            sort_keys=True,
        )
        + "\n"
    )


def write_signal_csv(grid: SignalGrid, path: str | Path) -> None:
    """Delimited dump, one line per grid point, row-major in the a axis."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write("t_a_ms,t_b_ms,re,im\n")
        for i, ta in enumerate(grid.axis_a):
            for j, tb in enumerate(grid.axis_b):
                v = grid.values[i, j]
                fh.write(
                    f"{float(ta)!r},{float(tb)!r},"
                    f"{float(v.real)!r},{float(v.imag)!r}\n"
                )


def write_signal_sidecar(grid: SignalGrid, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(grid.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
