"""Stochastic integrator for the doubled phase-space equations.

Each lattice mode carries two independent complex fields (alpha_j, beta_j);
beta is NOT the conjugate of alpha. In reduced units (energies in units of
the loss rate, times in units of its inverse) the Ito equations read

    d alpha_j = [ i D_j alpha_j - i U alpha_j^2 beta_j - i F_j
                  - alpha_j / 2 + i sum_{j'} J_{jj'} alpha_{j'} ] dt
                + sqrt(U) e^{-i pi/4} alpha_j  xi_j^a  sqrt(dt)
    d beta_j  = [ -i D_j beta_j + i U alpha_j beta_j^2 + i F_j^*
                  - beta_j / 2 - i sum_{j'} J^*_{jj'} beta_{j'} ] dt
                + sqrt(U) e^{+i pi/4} beta_j  xi_j^b  sqrt(dt)

with D_j the per-site detuning and xi real unit Gaussians. The multiplier
branch sqrt(-iU) = sqrt(U) e^{-i pi/4} is fixed for reproducibility; either
sign gives statistically identical ensembles.

Per step each trajectory consumes exactly 2 N normals, drawn as all
alpha-site noises (site order) followed by all beta-site noises. Every
trajectory k owns an independent generator PCG64(SeedSequence(seed,
spawn_key=(k,))) whose stream runs continuously across internal step
blocks, so results are bitwise independent of chunking and scheduling.

Default scheme: semi-implicit midpoint, iterating m = x + dt/2 * drift(m)
a fixed number of times, then x' = 2 m - x plus the explicit Ito noise
evaluated at the pre-step amplitude. Explicit Euler-Maruyama is available
as an option for cross-checks.

Trajectories whose fields leave |value| <= divergence_threshold or go
non-finite are marked diverged and excluded from records; the run fails
hard when the diverged fraction exceeds max_divergence_fraction.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, asdict
from typing import Iterator, NamedTuple

import numpy as np

from .lattice import Lattice, lattice_hash
from .model import DriveScheme, ModelParams, site_detunings

SQRT_HALF = math.sqrt(0.5)
# sqrt(-i) and sqrt(+i), principal branch
BRANCH_ALPHA = complex(SQRT_HALF, -SQRT_HALF)
BRANCH_BETA = complex(SQRT_HALF, SQRT_HALF)

_SCHEMES = ("midpoint", "euler")


class ConfigError(ValueError):
    """Invalid integration configuration."""


class DivergenceError(RuntimeError):
    """Raised when too many trajectories diverge, signalling departure
    from the sampling method's validity regime."""


@dataclass(frozen=True)
class IntegrationConfig:
    """Time stepping and ensemble parameters (times in reduced units)."""

    dt: float = 1e-3
    t_burn: float = 20.0
    t_end: float = 120.0
    sample_interval: float = 0.05
    n_trajectories: int = 2000
    seed: int = 0
    scheme: str = "midpoint"
    fixed_point_iters: int = 3
    divergence_threshold: float = 1e6
    max_divergence_fraction: float = 1e-3
    chunk_size: int = 50
    block_steps: int = 4000
    deterministic_reduction: bool = False

    def __post_init__(self):
        if not 0 < self.dt <= self.sample_interval:
            raise ConfigError("need 0 < dt <= sample_interval")
        if not 0 <= self.t_burn < self.t_end:
            raise ConfigError("need 0 <= t_burn < t_end")
        if self.n_trajectories < 1:
            raise ConfigError("need n_trajectories >= 1")
        if self.scheme not in _SCHEMES:
            raise ConfigError(f"scheme must be one of {_SCHEMES}")
        if self.fixed_point_iters < 1:
            raise ConfigError("need fixed_point_iters >= 1")
        stride = self.sample_interval / self.dt
        if abs(stride - round(stride)) > 1e-9:
            raise ConfigError("sample_interval must be a multiple of dt")

    @property
    def stride(self) -> int:
        return int(round(self.sample_interval / self.dt))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def burn_steps(self) -> int:
        return int(round(self.t_burn / self.dt))

    @property
    def n_samples(self) -> int:
        # grid length floor((t_end - t_burn) / sample_interval) + 1
        return (self.n_steps - self.burn_steps) // self.stride + 1

    def sample_times(self) -> np.ndarray:
        return (
            self.burn_steps + self.stride * np.arange(self.n_samples)
        ) * self.dt


class PhaseSpaceState(NamedTuple):
    """Doubled phase-space snapshot; beta independent of alpha."""

    alpha: np.ndarray
    beta: np.ndarray
    t: float = 0.0


@dataclass
class TrajectoryBatch:
    """A contiguous chunk of recorded trajectories.

    alpha/beta have shape (n_chunk, n_samples, n_sites); diverged rows
    contain unusable data and must be excluded by consumers.
    """

    indices: np.ndarray
    times: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    diverged: np.ndarray


# -- pure drift / noise (contract functions, used directly by tests) ------


def _coefficients(lattice: Lattice, model: ModelParams, drive: DriveScheme):
    deltas = site_detunings(model, lattice)
    c_alpha = 1j * deltas - 0.5
    f_alpha = -1j * drive.array
    return c_alpha, f_alpha, lattice.adjacency()


def drift(
    state: PhaseSpaceState,
    lattice: Lattice,
    model: ModelParams,
    drive: DriveScheme,
) -> tuple:
    """Deterministic parts (d alpha/dt, d beta/dt) of the doubled equations."""
    c_alpha, f_alpha, adj = _coefficients(lattice, model, drive)
    a, b = np.asarray(state.alpha), np.asarray(state.beta)
    da = c_alpha * a - 1j * model.u * a * a * b + f_alpha + 1j * (adj @ a)
    db = (
        np.conj(c_alpha) * b
        + 1j * model.u * a * b * b
        + np.conj(f_alpha)
        - 1j * (adj.conj() @ b)
    )
    return da, db


def noise_amplitudes(state: PhaseSpaceState, model: ModelParams) -> tuple:
    """Multiplicative noise prefactors (b_alpha, b_beta); the Ito increment
    is b * xi * sqrt(dt) with xi a real unit Gaussian."""
    root = math.sqrt(model.u)
    return (
        root * BRANCH_ALPHA * np.asarray(state.alpha),
        root * BRANCH_BETA * np.asarray(state.beta),
    )


def step(
    state: PhaseSpaceState,
    dt: float,
    rng: np.random.Generator,
    lattice: Lattice,
    model: ModelParams,
    drive: DriveScheme,
    scheme: str = "midpoint",
    fixed_point_iters: int = 3,
) -> PhaseSpaceState:
    """Advance one Ito step, consuming exactly 2 N normals from rng
    (alpha-site noises first, then beta-site noises)."""
    a, b = np.asarray(state.alpha), np.asarray(state.beta)
    xi = rng.standard_normal((2, lattice.n_sites))
    ba, bb = noise_amplitudes(state, model)
    sq = math.sqrt(dt)
    if scheme == "euler":
        da, db = drift(state, lattice, model, drive)
        a_new = a + dt * da + ba * xi[0] * sq
        b_new = b + dt * db + bb * xi[1] * sq
    else:
        am, bm = a, b
        for _ in range(fixed_point_iters):
            da, db = drift(PhaseSpaceState(am, bm), lattice, model, drive)
            am = a + 0.5 * dt * da
            bm = b + 0.5 * dt * db
        a_new = 2.0 * am - a + ba * xi[0] * sq
        b_new = 2.0 * bm - b + bb * xi[1] * sq
    return PhaseSpaceState(a_new, b_new, state.t + dt)


# -- block kernels ---------------------------------------------------------


def _kernel_body(
    alpha,
    beta,
    noise,
    indptr,
    indices,
    hop,
    c_alpha,
    f_alpha,
    u,
    dt,
    sqdt,
    fp_iters,
    use_euler,
    threshold,
    rec_flags,
    out_alpha,
    out_beta,
    rec_offset,
    diverged,
):
    """Advance a block of steps for every trajectory in the chunk.

    Plain-python body compiled with numba when available; hop sums use the
    CSR adjacency (hop[p] couples row j to column indices[p]).
    """
    n_traj, n_sites = alpha.shape
    n_steps = noise.shape[1]
    na = math.sqrt(u) * BRANCH_ALPHA
    nb = math.sqrt(u) * BRANCH_BETA
    if use_euler:
        iters = 1
        half = dt
    else:
        iters = fp_iters
        half = 0.5 * dt
    for k in range(n_traj):
        if diverged[k]:
            continue
        am = np.empty(n_sites, dtype=np.complex128)
        bm = np.empty(n_sites, dtype=np.complex128)
        an = np.empty(n_sites, dtype=np.complex128)
        bn = np.empty(n_sites, dtype=np.complex128)
        rec = rec_offset
        for s in range(n_steps):
            for j in range(n_sites):
                am[j] = alpha[k, j]
                bm[j] = beta[k, j]
            for _ in range(iters):
                for j in range(n_sites):
                    hop_a = 0.0 + 0.0j
                    hop_b = 0.0 + 0.0j
                    for p in range(indptr[j], indptr[j + 1]):
                        jj = indices[p]
                        hop_a += hop[p] * am[jj]
                        hop_b += np.conj(hop[p]) * bm[jj]
                    da = (
                        c_alpha[j] * am[j]
                        - 1j * u * am[j] * am[j] * bm[j]
                        + f_alpha[j]
                        + 1j * hop_a
                    )
                    db = (
                        np.conj(c_alpha[j]) * bm[j]
                        + 1j * u * am[j] * bm[j] * bm[j]
                        + np.conj(f_alpha[j])
                        - 1j * hop_b
                    )
                    an[j] = alpha[k, j] + half * da
                    bn[j] = beta[k, j] + half * db
                am, an = an, am
                bm, bn = bn, bm
            for j in range(n_sites):
                if use_euler:
                    base_a = am[j]
                    base_b = bm[j]
                else:
                    base_a = 2.0 * am[j] - alpha[k, j]
                    base_b = 2.0 * bm[j] - beta[k, j]
                alpha[k, j] = base_a + na * alpha[k, j] * noise[k, s, 0, j] * sqdt
                beta[k, j] = base_b + nb * beta[k, j] * noise[k, s, 1, j] * sqdt
            if rec_flags[s]:
                ok = True
                for j in range(n_sites):
                    a_val = alpha[k, j]
                    b_val = beta[k, j]
                    if (
                        not np.isfinite(a_val.real)
                        or not np.isfinite(a_val.imag)
                        or not np.isfinite(b_val.real)
                        or not np.isfinite(b_val.imag)
                        or abs(a_val) > threshold
                        or abs(b_val) > threshold
                    ):
                        ok = False
                if not ok:
                    diverged[k] = True
                    break
                for j in range(n_sites):
                    out_alpha[k, rec, j] = alpha[k, j]
                    out_beta[k, rec, j] = beta[k, j]
                rec += 1


def _build_kernel():
    if os.environ.get("LIEBPP_DISABLE_NUMBA") or os.environ.get(
        "NUMBA_DISABLE_JIT"
    ):
        return _kernel_body
    try:
        import numba
    except ImportError:
        return _kernel_body
    return numba.njit(cache=True)(_kernel_body)


_kernel = _build_kernel()


# -- ensemble driver -------------------------------------------------------


def _trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
    )


def run_ensemble(
    lattice: Lattice,
    model: ModelParams,
    drive: DriveScheme,
    config: IntegrationConfig,
) -> Iterator[TrajectoryBatch]:
    """Integrate the ensemble from vacuum, yielding recorded chunks.

    Raises DivergenceError as soon as the diverged count exceeds
    max_divergence_fraction of the full ensemble.
    """
    c_alpha, f_alpha, adj = _coefficients(lattice, model, drive)
    n_sites = lattice.n_sites
    n_steps = config.n_steps
    stride = config.stride
    n_samples = config.n_samples
    # sample m sits after step (burn_steps + m*stride); the t=0 sample of a
    # zero burn-in is the vacuum initial state, pre-filled in the buffers
    rec_flags = np.zeros(n_steps, dtype=np.int8)
    first_sample = 0 if config.burn_steps > 0 else 1
    for m in range(first_sample, n_samples):
        rec_flags[config.burn_steps + m * stride - 1] = 1
    times = config.sample_times()
    use_euler = config.scheme == "euler"
    sqdt = math.sqrt(config.dt)
    max_allowed = int(config.max_divergence_fraction * config.n_trajectories)
    total_diverged = 0

    done = 0
    while done < config.n_trajectories:
        n_chunk = min(config.chunk_size, config.n_trajectories - done)
        alpha = np.zeros((n_chunk, n_sites), dtype=np.complex128)
        beta = np.zeros((n_chunk, n_sites), dtype=np.complex128)
        out_alpha = np.zeros((n_chunk, n_samples, n_sites), dtype=np.complex128)
        out_beta = np.zeros((n_chunk, n_samples, n_sites), dtype=np.complex128)
        diverged = np.zeros(n_chunk, dtype=np.bool_)
        rngs = [
            _trajectory_rng(config.seed, done + k) for k in range(n_chunk)
        ]
        step_idx = 0
        rec_offset = first_sample  # a zero burn-in pre-fills the vacuum t=0 slot
        while step_idx < n_steps:
            span = min(config.block_steps, n_steps - step_idx)
            noise = np.empty((n_chunk, span, 2, n_sites))
            for k, rng in enumerate(rngs):
                noise[k] = rng.standard_normal((span, 2, n_sites))
            flags = rec_flags[step_idx : step_idx + span]
            _kernel(
                alpha,
                beta,
                noise,
                adj.indptr,
                adj.indices,
                adj.data,
                c_alpha,
                f_alpha,
                float(model.u),
                config.dt,
                sqdt,
                config.fixed_point_iters,
                use_euler,
                config.divergence_threshold,
                flags,
                out_alpha,
                out_beta,
                rec_offset,
                diverged,
            )
            rec_offset += int(flags.sum())
            step_idx += span
        total_diverged += int(diverged.sum())
        if total_diverged > max_allowed:
            raise DivergenceError(
                f"{total_diverged} of {config.n_trajectories} trajectories "
                f"diverged, exceeding the allowed fraction "
                f"{config.max_divergence_fraction}"
            )
        yield TrajectoryBatch(
            indices=np.arange(done, done + n_chunk),
            times=times,
            alpha=out_alpha,
            beta=out_beta,
            diverged=diverged,
        )
        done += n_chunk


def collect_records(
    lattice: Lattice,
    model: ModelParams,
    drive: DriveScheme,
    config: IntegrationConfig,
) -> TrajectoryBatch:
    """Run the full ensemble and stack the chunks (small systems only)."""
    batches = list(run_ensemble(lattice, model, drive, config))
    return TrajectoryBatch(
        indices=np.concatenate([b.indices for b in batches]),
        times=batches[0].times,
        alpha=np.concatenate([b.alpha for b in batches]),
        beta=np.concatenate([b.beta for b in batches]),
        diverged=np.concatenate([b.diverged for b in batches]),
    )


# -- raw record dump -------------------------------------------------------

_DUMP_MAGIC = b"PPDUMP1\n"


class RecordDumpWriter:
    """Streaming binary dump of raw trajectory records.

    Layout: magic line, 8-byte little-endian unsigned header length, UTF-8
    JSON header (lattice hash, config, seed, shapes), then per trajectory:
    one status byte (1 = diverged) followed by the alpha block and the beta
    block, each n_samples x n_sites complex values stored as little-endian
    IEEE-754 double pairs (real, imag), sample-major.
    """

    def __init__(self, path, lattice: Lattice, config: IntegrationConfig):
        self.path = path
        header = {
            "lattice_hash": lattice_hash(lattice),
            "n_sites": lattice.n_sites,
            "n_samples": config.n_samples,
            "n_trajectories": config.n_trajectories,
            "seed": config.seed,
            "config": asdict(config),
            "site_names": lattice.names,
        }
        blob = json.dumps(header, sort_keys=True).encode()
        self._fh = open(path, "wb")
        self._fh.write(_DUMP_MAGIC)
        self._fh.write(struct.pack("<Q", len(blob)))
        self._fh.write(blob)

    def append(self, batch: TrajectoryBatch) -> None:
        for row in range(batch.alpha.shape[0]):
            self._fh.write(struct.pack("<B", int(batch.diverged[row])))
            self._fh.write(
                np.ascontiguousarray(batch.alpha[row], dtype="<c16").tobytes()
            )
            self._fh.write(
                np.ascontiguousarray(batch.beta[row], dtype="<c16").tobytes()
            )

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_record_dump(path):
    """Read a dump written by RecordDumpWriter.

    Returns (header dict, alpha, beta, diverged) with alpha/beta shaped
    (n_trajectories, n_samples, n_sites).
    """
    with open(path, "rb") as fh:
        if fh.read(len(_DUMP_MAGIC)) != _DUMP_MAGIC:
            raise ValueError("not a record dump file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode())
        n_t = header["n_trajectories"]
        n_s = header["n_samples"]
        n_j = header["n_sites"]
        alpha = np.empty((n_t, n_s, n_j), dtype=complex)
        beta = np.empty((n_t, n_s, n_j), dtype=complex)
        diverged = np.zeros(n_t, dtype=bool)
        block = n_s * n_j
        for k in range(n_t):
            (flag,) = struct.unpack("<B", fh.read(1))
            diverged[k] = bool(flag)
            alpha[k] = np.frombuffer(
                fh.read(16 * block), dtype="<c16"
            ).reshape(n_s, n_j)
            beta[k] = np.frombuffer(
                fh.read(16 * block), dtype="<c16"
            ).reshape(n_s, n_j)
    return header, alpha, beta, diverged
