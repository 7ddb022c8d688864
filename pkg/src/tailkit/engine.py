"""Forward, backward and running-maximum simulation of affine-type recursions.

Randomness is pinned to numpy's Philox counter-based generator. Chain block i
of a batch draws from Generator(Philox(SeedSequence(seed, spawn_key=(i,)))),
and blocks are merged in index order, so a batch is bit-identical for any
worker count and across platforms.
"""

from __future__ import annotations

import hashlib
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .cramer import NotContracting
from .measure import AtomicMeasure, ParametricDriver, TailkitError, validate

Driver = Union[AtomicMeasure, ParametricDriver]


class NonFiniteValue(TailkitError):
    """A trajectory left the representable range."""

    def __init__(self, step: int):
        super().__init__(f"non-finite value at step {step}")
        self.step = step


class MapFamily:
    """A family of random Lipschitz maps indexed by driver atoms."""

    name: str = "base"
    needs_c: bool = False

    def apply(self, a, b, c, x):
        raise NotImplementedError

    def minorant(self, a, b):
        """Coefficients (A, B) of the declared affine lower bound A*x + B."""
        return a, b


class AffineFamily(MapFamily):
    name = "affine"

    def apply(self, a, b, c, x):
        return a * x + b


class ExtremalFamily(MapFamily):
    name = "extremal"

    def apply(self, a, b, c, x):
        return np.maximum(a * x, b)

    def minorant(self, a, b):
        # max(ax, b) >= ax >= ax - |b|
        return a, -np.abs(b)


class LetacFamily(MapFamily):
    name = "letac"
    needs_c = True

    def apply(self, a, b, c, x):
        return np.maximum(a * x + b, a * c + b)


class MaxZeroFamily(MapFamily):
    name = "maxzero"

    def apply(self, a, b, c, x):
        return np.maximum(a * x + b, 0.0)


@dataclass
class UserLipschitzFamily(MapFamily):
    """User-supplied map with a declared per-atom Lipschitz bound and affine
    minorant; the declarations are trusted, only the minorant is checkable
    (see pathwise_domination_check)."""

    name: str = "user"
    apply_fn: Callable = None
    lipschitz_fn: Callable = None
    minorant_fn: Callable = None
    needs_c: bool = False

    def apply(self, a, b, c, x):
        return self.apply_fn(a, b, c, x)

    def minorant(self, a, b):
        return self.minorant_fn(a, b)


FAMILIES: dict[str, MapFamily] = {
    f.name: f
    for f in (AffineFamily(), ExtremalFamily(), LetacFamily(), MaxZeroFamily())
}


def get_family(name: str) -> MapFamily:
    try:
        return FAMILIES[name]
    except KeyError:
        raise TailkitError(
            f"unknown family {name!r}; choose from {sorted(FAMILIES)}"
        ) from None


@dataclass(frozen=True)
class SimConfig:
    n_samples: int = 10_000
    burn_in: Optional[int] = None  # None = a-priori contraction default
    chains: int = 16
    seed: int = 0
    truncation_eps: float = 1e-12
    pi_floor: float = 1e-8
    max_steps: int = 100_000

    def __post_init__(self) -> None:
        if self.n_samples < 1 or self.chains < 1:
            raise TailkitError("n_samples and chains must be >= 1")
        if self.burn_in is not None and self.burn_in < 1:
            raise TailkitError("burn_in must be >= 1")
        if not (0.0 < self.truncation_eps < 1.0 and 0.0 < self.pi_floor < 1.0):
            raise TailkitError("truncation_eps and pi_floor must lie in (0, 1)")

    def digest(self) -> str:
        return hashlib.sha256(repr(self).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SampleBatch:
    values: np.ndarray
    family: str
    measure_label: str
    config: SimConfig
    burn_in_used: int
    subseed_keys: tuple[int, ...]
    coupling_gap: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.values).tobytes())
        h.update(self.config.digest().encode())
        h.update(self.family.encode())
        return h.hexdigest()[:16]


def mean_log_a_of(driver: Driver) -> float:
    if isinstance(driver, ParametricDriver):
        return driver.mean_log_a()
    return validate(driver).mean_log_a


def default_burn_in(driver: Driver) -> int:
    """Steps driving the a-priori contraction factor below 1e-40."""
    mla = mean_log_a_of(driver)
    if mla >= 0.0:
        raise NotContracting(f"E log A = {mla:.6g} >= 0")
    return math.ceil(40.0 * math.log(10.0) / abs(mla))


def _block_rng(seed: int, key: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(key,)))
    )


def _draw_coeffs(driver, arrays, cumw, rng, n):
    """One step of i.i.d. coefficients (a, b, c) for n parallel chains."""
    if isinstance(driver, ParametricDriver):
        a, b = driver.draw(rng, n)
        return a, b, np.zeros(n)
    a, b, c, _ = arrays
    idx = np.searchsorted(cumw, rng.random(n), side="right")
    return a[idx], b[idx], c[idx]


def _prepare(driver):
    if isinstance(driver, ParametricDriver):
        return None, None
    arrays = driver.arrays()
    cumw = np.cumsum(arrays[3])
    cumw[-1] = 1.0
    return arrays, cumw


def iterate_forward(
    family: MapFamily,
    driver: Driver,
    x0: float,
    n: int,
    rng: np.random.Generator,
    record: bool = False,
):
    """Run one chain n steps from x0; returns (final, trajectory or None)."""
    if family.needs_c and not driver.has_c:
        raise TailkitError(f"family {family.name!r} needs atoms with a threshold c")
    arrays, cumw = _prepare(driver)
    x = np.array([float(x0)])
    traj = [x0] if record else None
    for step in range(n):
        a, b, c = _draw_coeffs(driver, arrays, cumw, rng, 1)
        x = family.apply(a, b, c, x)
        if not math.isfinite(x[0]):
            raise NonFiniteValue(step + 1)
        if record:
            traj.append(float(x[0]))
    return float(x[0]), traj


def _block_sizes(n_samples: int, chains: int) -> list[int]:
    base, extra = divmod(n_samples, chains)
    return [base + (1 if i < extra else 0) for i in range(chains)]


def _run_blocks(worker, chains: int, n_workers: int) -> list:
    if n_workers <= 1:
        return [worker(i) for i in range(chains)]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(worker, range(chains)))


def sample_stationary(
    family: MapFamily,
    driver: Driver,
    config: SimConfig,
    n_workers: int = 1,
) -> SampleBatch:
    """n_samples independent-chain draws from the stationary law.

    Every sample is the endpoint of its own chain of length burn_in started
    at 0, so samples are i.i.d. up to burn-in bias. A two-start coupling gap
    (chains from +-1e6 under a shared atom stream) ships with the batch as a
    convergence diagnostic.
    """
    if family.needs_c and not driver.has_c:
        raise TailkitError(f"family {family.name!r} needs atoms with a threshold c")
    mla = mean_log_a_of(driver)
    if mla >= 0.0:
        raise NotContracting(f"E log A = {mla:.6g} >= 0")
    burn_in = config.burn_in if config.burn_in is not None else default_burn_in(driver)
    arrays, cumw = _prepare(driver)
    sizes = _block_sizes(config.n_samples, config.chains)

    def run_block(i: int) -> np.ndarray:
        n = sizes[i]
        if n == 0:
            return np.empty(0)
        rng = _block_rng(config.seed, i)
        x = np.zeros(n)
        for step in range(burn_in):
            a, b, c = _draw_coeffs(driver, arrays, cumw, rng, n)
            x = family.apply(a, b, c, x)
            if not np.all(np.isfinite(x)):
                raise NonFiniteValue(step + 1)
        return x

    blocks = _run_blocks(run_block, config.chains, n_workers)
    values = np.concatenate(blocks) if blocks else np.empty(0)

    # Coupling diagnostic on a dedicated subseed: same atoms, extreme starts.
    rng = _block_rng(config.seed, config.chains)
    x = np.array([1e6, -1e6])
    for _ in range(burn_in):
        a, b, c = _draw_coeffs(driver, arrays, cumw, rng, 1)
        x = family.apply(a[[0, 0]], b[[0, 0]], c[[0, 0]], x)
    gap = float(abs(x[0] - x[1]))

    return SampleBatch(
        values=values,
        family=family.name,
        measure_label=driver.label,
        config=config,
        burn_in_used=burn_in,
        subseed_keys=tuple(range(config.chains)),
        coupling_gap=gap,
    )


@dataclass(frozen=True)
class PerpetuityDraw:
    value: float
    pi_reached: float
    steps: int
    hit_max_steps: bool


def backward_perpetuity(
    driver: Driver, config: SimConfig, rng: np.random.Generator
) -> PerpetuityDraw:
    """One draw of the perpetuity sum B1 + A1 B2 + A1 A2 B3 + ...

    Accumulation stops once the product of multipliers falls below
    truncation_eps, which bounds the bias of the truncated sum; the level
    actually reached is reported.
    """
    mla = mean_log_a_of(driver)
    if mla >= 0.0:
        raise NotContracting(f"E log A = {mla:.6g} >= 0")
    arrays, cumw = _prepare(driver)
    y, pi = 0.0, 1.0
    steps = 0
    while pi >= config.truncation_eps and steps < config.max_steps:
        a, b, _ = _draw_coeffs(driver, arrays, cumw, rng, 1)
        y += pi * float(b[0])
        pi *= float(a[0])
        steps += 1
    return PerpetuityDraw(
        value=y,
        pi_reached=pi,
        steps=steps,
        hit_max_steps=pi >= config.truncation_eps,
    )


def sample_perpetuity(
    driver: Driver, config: SimConfig, n_workers: int = 1
) -> SampleBatch:
    """n_samples truncated perpetuity draws, blocked and seeded like
    sample_stationary."""
    mla = mean_log_a_of(driver)
    if mla >= 0.0:
        raise NotContracting(f"E log A = {mla:.6g} >= 0")
    arrays, cumw = _prepare(driver)
    sizes = _block_sizes(config.n_samples, config.chains)
    n_truncated = 0

    def run_block(i: int) -> tuple[np.ndarray, int]:
        n = sizes[i]
        if n == 0:
            return np.empty(0), 0
        rng = _block_rng(config.seed, i)
        y = np.zeros(n)
        pi = np.ones(n)
        active = np.ones(n, dtype=bool)
        for _ in range(config.max_steps):
            if not active.any():
                break
            a, b, _ = _draw_coeffs(driver, arrays, cumw, rng, n)
            y = np.where(active, y + pi * b, y)
            pi = np.where(active, pi * a, pi)
            active = active & (pi >= config.truncation_eps)
        return y, int(active.sum())

    results = _run_blocks(run_block, config.chains, n_workers)
    values = np.concatenate([r[0] for r in results])
    n_truncated = sum(r[1] for r in results)
    return SampleBatch(
        values=values,
        family="perpetuity",
        measure_label=driver.label,
        config=config,
        burn_in_used=0,
        subseed_keys=tuple(range(config.chains)),
        meta={"hit_max_steps": n_truncated},
    )


@dataclass(frozen=True)
class SupPiDraw:
    value: float
    stop_step: int
    hit_max_steps: bool


def sup_pi(
    driver: Driver, config: SimConfig, rng: np.random.Generator
) -> SupPiDraw:
    """One draw of M = max_n A1...An (with the empty product 1 included).

    Stops once the running product falls below pi_floor * current max; later
    excursions above the max are then very unlikely. M >= 1 always.
    """
    mla = mean_log_a_of(driver)
    if mla >= 0.0:
        raise NotContracting(f"E log A = {mla:.6g} >= 0")
    arrays, cumw = _prepare(driver)
    pi, m = 1.0, 1.0
    steps = 0
    while pi >= config.pi_floor * m and steps < config.max_steps:
        a, _, _ = _draw_coeffs(driver, arrays, cumw, rng, 1)
        pi *= float(a[0])
        m = max(m, pi)
        steps += 1
    return SupPiDraw(value=m, stop_step=steps, hit_max_steps=pi >= config.pi_floor * m)


def sample_sup_pi(
    driver: Driver, config: SimConfig, n_workers: int = 1
) -> SampleBatch:
    """n_samples draws of the running-maximum M, blocked and seeded like
    sample_stationary."""
    mla = mean_log_a_of(driver)
    if mla >= 0.0:
        raise NotContracting(f"E log A = {mla:.6g} >= 0")
    arrays, cumw = _prepare(driver)
    sizes = _block_sizes(config.n_samples, config.chains)

    def run_block(i: int) -> tuple[np.ndarray, int]:
        n = sizes[i]
        if n == 0:
            return np.empty(0), 0
        rng = _block_rng(config.seed, i)
        pi = np.ones(n)
        m = np.ones(n)
        active = np.ones(n, dtype=bool)
        for _ in range(config.max_steps):
            if not active.any():
                break
            a, _, _ = _draw_coeffs(driver, arrays, cumw, rng, n)
            pi = np.where(active, pi * a, pi)
            m = np.maximum(m, pi)
            active = active & (pi >= config.pi_floor * m)
        return m, int(active.sum())

    results = _run_blocks(run_block, config.chains, n_workers)
    values = np.concatenate([r[0] for r in results])
    n_truncated = sum(r[1] for r in results)
    return SampleBatch(
        values=values,
        family="sup_pi",
        measure_label=driver.label,
        config=config,
        burn_in_used=0,
        subseed_keys=tuple(range(config.chains)),
        meta={"hit_max_steps": n_truncated},
    )


def pathwise_domination_check(
    family_high: MapFamily,
    driver: Driver,
    n_paths: int,
    n_steps: int,
    seed: int,
    family_low: Optional[MapFamily] = None,
    x0: float = 0.0,
) -> float:
    """Max over paths and steps of (affine minorant iterate - high iterate).

    Both recursions consume the identical atom stream; a correct minorant
    declaration keeps the result <= 0 (up to rounding).
    """
    if family_high.needs_c and not driver.has_c:
        raise TailkitError(f"family {family_high.name!r} needs a threshold c")
    arrays, cumw = _prepare(driver)
    rng = _block_rng(seed, 0)
    xh = np.full(n_paths, float(x0))
    xl = np.full(n_paths, float(x0))
    worst = -math.inf
    for _ in range(n_steps):
        a, b, c = _draw_coeffs(driver, arrays, cumw, rng, n_paths)
        xh = family_high.apply(a, b, c, xh)
        if family_low is None:
            am, bm = family_high.minorant(a, b)
            xl = am * xl + bm
        else:
            xl = family_low.apply(a, b, c, xl)
        worst = max(worst, float(np.max(xl - xh)))
    return worst


_MAGIC = b"TKSB"
_VERSION = 1
_HEADER = struct.Struct("<4sIQq16s")


def save_batch(path: str | Path, batch: SampleBatch, fmt: str = "text") -> None:
    """Write batch values: 'text' is one value per line (repr-exact),
    'binary' is a small header + little-endian float64 payload."""
    path = Path(path)
    if fmt == "text":
        with path.open("w") as fh:
            for v in batch.values:
                fh.write(f"{float(v)!r}\n")
    elif fmt == "binary":
        header = _HEADER.pack(
            _MAGIC,
            _VERSION,
            len(batch.values),
            batch.config.seed,
            batch.config.digest().encode(),
        )
        with path.open("wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(batch.values, dtype="<f8").tobytes())
    else:
        raise TailkitError(f"unknown batch format {fmt!r}")


def load_samples(path: str | Path) -> np.ndarray:
    """Read a sample file written by save_batch (either format)."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == _MAGIC:
        magic, version, count, _seed, _digest = _HEADER.unpack_from(raw)
        if version != _VERSION:
            raise TailkitError(f"unsupported batch version {version}")
        values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=count)
        return values.astype(float)
    try:
        return np.array(
            [float(line) for line in raw.decode("utf-8").split() if line.strip()]
        )
    except ValueError as exc:
        raise TailkitError(f"cannot parse sample file {path}: {exc}") from exc
