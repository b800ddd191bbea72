"""Reduction of trajectory records to physical observables.

Estimator conventions
---------------------
Quantum expectations map to ensemble averages of field products: the
occupation of site j is the mean of Re(alpha_j beta_j) over trajectories
and steady-state sample times, and the normalized equal-time second-order
correlation is <alpha^2 beta^2> / <alpha beta>^2 over the same sample set.
Imaginary parts vanish only in expectation and are reported as diagnostics.

Statistical units are (trajectory x time-batch) pairs: the record window is
split into consecutive batches of batch_time (default 5 time units) to
respect autocorrelation, each batch of each non-diverged trajectory
contributes one partial mean, and standard errors are computed across
units. Ratios use the delta method including the numerator/denominator
covariance. Sites whose occupation is indistinguishable from zero
(|n| < 3 stderr) get NaN correlations (undefined), not a crash.

Delayed correlations average the cross product w(t) w(t+tau), w = alpha
beta, over all valid time origins within each unit's batch; the tau = 0
column of that machinery is bit-for-bit the same stored array used for the
equal-time correlation, so the two estimators agree exactly by
construction. The normalization uses the full-window occupation mean
(time-translation invariance of the steady state makes window restriction
a no-op in expectation). Curves are computed for tau >= 0 and mirror to
negative delays.

Accumulators store per-unit partial means, so merging is an exact
concatenation: accumulating a concatenated sample set and merging two
accumulators yield bit-identical statistics, and reductions always sum in
sorted (trajectory, batch) order, independent of merge or chunk order.

The momentum-frequency occupation spectrum follows the quasi-1D transform

    alpha~(k, w) = (1 / (N N_t)) sum_j sum_t e^{+i w t}
        [ (alpha_C,j + alpha_B,j) e^{+i k (j - 1/2) d} + alpha_A,j e^{+i k j d} ]

with the conjugated phase kernels for beta~, n~(k, w) = <alpha~ beta~>
averaged over trajectories, k on the N-point grid 2 pi m / (N d) reported
shifted to (-pi/d, pi/d], and w on the N_t-point FFT grid of the sampling
stride. Sublattice-resolved products are stored so tight-binding band
projections can be formed after the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .integrator import TrajectoryBatch
from .lattice import Lattice
from .model import ModelParams

DEFAULT_BATCH_TIME = 5.0
_SUBLATTICE_ORDER = ("B", "A", "C")


class ObservableError(ValueError):
    """Invalid estimator inputs (empty ensemble, bad tau grid, ...)."""


# -- equal-time and delayed-correlation accumulation ------------------------


@dataclass
class OccupationResult:
    sites: list
    n: np.ndarray
    stderr: np.ndarray
    imag: np.ndarray
    imag_stderr: np.ndarray
    n_units: int
    diverged: int


@dataclass
class G2Result:
    sites: list
    g2: np.ndarray
    stderr: np.ndarray
    defined: np.ndarray


@dataclass
class TauCurve:
    """One site's delayed correlation on the non-negative tau grid."""

    site: str
    tau: np.ndarray
    g2: np.ndarray
    stderr: np.ndarray

    def symmetric(self) -> tuple:
        """Mirror to negative delays: g2(-tau) = g2(tau) in steady state."""
        tau = np.concatenate([-self.tau[:0:-1], self.tau])
        g2 = np.concatenate([self.g2[:0:-1], self.g2])
        err = np.concatenate([self.stderr[:0:-1], self.stderr])
        return tau, g2, err


def _ratio_stats(num_units, den_units):
    """Delta-method mean and stderr of <num> / <den>^2 over paired units."""
    m = num_units.shape[0]
    num = num_units.real.mean(axis=0)
    den = den_units.real.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        g2 = num / den**2
    if m < 2:
        return g2, np.full_like(g2, np.nan)
    var_n = num_units.real.var(axis=0, ddof=1) / m
    var_d = den_units.real.var(axis=0, ddof=1) / m
    cov = (
        np.einsum(
            "us,us->s", num_units.real - num, den_units.real - den
        )
        / (m - 1)
        / m
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        dn = 1.0 / den**2
        dd = -2.0 * num / den**3
        var = dn * dn * var_n + dd * dd * var_d + 2.0 * dn * dd * cov
    return g2, np.sqrt(np.clip(var, 0.0, None))


class MomentAccumulator:
    """Streaming accumulator of per-(trajectory, batch) partial means.

    Stores, for every unit: the batch mean of w = alpha beta per site (u1),
    of w^2 per site (u2, which is also the tau = 0 lag product), and of the
    lag products w(t) w(t+tau) for every positive tau in tau_grid on the
    requested tau_sites. Batches whose time origins all fall outside a
    lag's valid range are dropped for that lag only.
    """

    def __init__(
        self,
        lattice: Lattice,
        times: np.ndarray,
        batch_time: float = DEFAULT_BATCH_TIME,
        tau_grid=None,
        tau_sites=None,
    ):
        self.sites = list(lattice.names)
        self.times = np.asarray(times, dtype=float)
        n_samples = len(self.times)
        if n_samples < 2:
            raise ObservableError("need at least two samples")
        self.sample_interval = float(self.times[1] - self.times[0])
        self.batch_len = int(round(batch_time / self.sample_interval))
        self.n_batches = n_samples // self.batch_len
        if self.n_batches < 1:
            raise ObservableError(
                "record window shorter than one error-estimation batch"
            )
        self.tau_sites = list(tau_sites) if tau_sites is not None else []
        self._tau_ids = [lattice.site_id(s) for s in self.tau_sites]
        self.tau_strides = []
        if tau_grid is not None:
            for tau in tau_grid:
                ratio = float(tau) / self.sample_interval
                if abs(ratio - round(ratio)) > 1e-9 or tau < 0:
                    raise ObservableError(
                        "tau values must be non-negative multiples of the "
                        "sample interval"
                    )
                ell = int(round(ratio))
                if ell >= n_samples:
                    raise ObservableError("tau exceeds the record window")
                self.tau_strides.append(ell)
            if self.tau_strides and not self.tau_sites:
                raise ObservableError("tau_grid given without tau_sites")
        self.n_samples = n_samples
        # per-chunk lists of unit arrays, concatenated at reduction time
        self._ids: list = []
        self._u1: list = []
        self._u2: list = []
        self._lag: dict = {
            ell: [] for ell in self.tau_strides if ell > 0
        }
        self.diverged = 0

    # number of batches with at least one valid origin for lag ell
    def _lag_batches(self, ell: int) -> int:
        last_origin = self.n_samples - 1 - ell
        return min(self.n_batches, last_origin // self.batch_len + 1)

    def add(self, batch: TrajectoryBatch) -> None:
        good = ~batch.diverged
        self.diverged += int(batch.diverged.sum())
        if not good.any():
            return
        w = batch.alpha[good] * batch.beta[good]
        ids = batch.indices[good]
        bl, nb = self.batch_len, self.n_batches
        wb = w[:, : nb * bl].reshape(w.shape[0], nb, bl, w.shape[2])
        self._ids.append(np.asarray(ids))
        self._u1.append(wb.mean(axis=2))
        self._u2.append((wb * wb).mean(axis=2))
        if self._lag:
            ws = w[:, :, self._tau_ids]
            for ell in self._lag:
                prod = ws[:, : self.n_samples - ell] * ws[:, ell:]
                nbl = self._lag_batches(ell)
                rows = []
                for b in range(nbl):
                    rows.append(
                        prod[:, b * bl : (b + 1) * bl].mean(axis=1)
                    )
                self._lag[ell].append(np.stack(rows, axis=1))

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Pure merge; statistics equal accumulation over the concatenated
        sample sets exactly (unit reduction is order-insensitive)."""
        if (
            self.sites != other.sites
            or self.n_batches != other.n_batches
            or self.tau_strides != other.tau_strides
            or self.tau_sites != other.tau_sites
        ):
            raise ObservableError("incompatible accumulators")
        out = object.__new__(MomentAccumulator)
        out.__dict__.update(self.__dict__)
        out._ids = self._ids + other._ids
        out._u1 = self._u1 + other._u1
        out._u2 = self._u2 + other._u2
        out._lag = {
            ell: self._lag[ell] + other._lag[ell] for ell in self._lag
        }
        out.diverged = self.diverged + other.diverged
        return out

    def _gather(self, chunks, nb=None):
        arr = np.concatenate(chunks, axis=0)
        ids = np.concatenate(self._ids)
        order = np.argsort(ids, kind="stable")
        arr = arr[order]
        if nb is not None:
            arr = arr[:, :nb]
        return arr.reshape(-1, arr.shape[-1])

    def _require_units(self):
        if not self._ids:
            raise ObservableError("empty ensemble: no usable trajectories")

    def occupation(self) -> OccupationResult:
        self._require_units()
        u1 = self._gather(self._u1)
        m = u1.shape[0]
        n = u1.real.mean(axis=0)
        err = (
            u1.real.std(axis=0, ddof=1) / math.sqrt(m)
            if m > 1
            else np.full(n.shape, np.nan)
        )
        imag = u1.imag.mean(axis=0)
        imag_err = (
            u1.imag.std(axis=0, ddof=1) / math.sqrt(m)
            if m > 1
            else np.full(n.shape, np.nan)
        )
        return OccupationResult(
            self.sites, n, err, imag, imag_err, m, self.diverged
        )

    def _defined_mask(self, occ: OccupationResult, idx) -> np.ndarray:
        # an exactly zero occupation (vacuum) is also undefined
        n = np.abs(occ.n[idx])
        return (n >= 3.0 * occ.stderr[idx]) & (n > 0.0)

    def _ratio_site(self, sid: int) -> tuple:
        """Shared single-site path: identical reductions for g2_zero and
        the tau = 0 lag point, so the two agree bit for bit."""
        u1 = self._gather(self._u1)[:, [sid]]
        num = self._gather(self._u2)[:, [sid]]
        g2, err = _ratio_stats(num, u1)
        return g2[0], err[0]

    def g2_zero(self) -> G2Result:
        self._require_units()
        occ = self.occupation()
        g2 = np.empty(len(self.sites))
        err = np.empty(len(self.sites))
        for sid in range(len(self.sites)):
            g2[sid], err[sid] = self._ratio_site(sid)
        defined = self._defined_mask(occ, slice(None))
        g2 = np.where(defined, g2, np.nan)
        err = np.where(defined, err, np.nan)
        return G2Result(self.sites, g2, err, defined)

    def g2_tau(self) -> dict:
        """Curves keyed by site name; tau = 0 reuses the u2 storage."""
        self._require_units()
        if not self.tau_strides:
            raise ObservableError("accumulator built without a tau grid")
        occ = self.occupation()
        taus = np.array(self.tau_strides) * self.sample_interval
        curves = {}
        for col, site in enumerate(self.tau_sites):
            sid = self._tau_ids[col]
            g2s, errs = [], []
            for ell in self.tau_strides:
                if ell == 0:
                    point = self._ratio_site(sid)
                else:
                    nbl = self._lag_batches(ell)
                    u1 = self._gather(self._u1, nb=nbl)[:, [sid]]
                    num = self._gather(self._lag[ell], nb=nbl)[:, [col]]
                    g2, err = _ratio_stats(num, u1)
                    point = (g2[0], err[0])
                g2s.append(point[0])
                errs.append(point[1])
            defined = self._defined_mask(occ, sid)
            g2_arr = np.array(g2s) if defined else np.full(len(g2s), np.nan)
            err_arr = np.array(errs) if defined else np.full(len(errs), np.nan)
            curves[site] = TauCurve(site, taus, g2_arr, err_arr)
        return curves


def _as_batches(records) -> list:
    if isinstance(records, TrajectoryBatch):
        return [records]
    return list(records)


def _accumulate(records, lattice, **kwargs) -> MomentAccumulator:
    batches = _as_batches(records)
    if not batches:
        raise ObservableError("empty ensemble: no records")
    acc = MomentAccumulator(lattice, batches[0].times, **kwargs)
    for b in batches:
        acc.add(b)
    return acc


def occupation(records, lattice: Lattice) -> OccupationResult:
    """Per-site occupation with batch-mean standard errors."""
    return _accumulate(records, lattice).occupation()


def g2_zero(records, lattice: Lattice) -> G2Result:
    """Per-site equal-time normalized second-order correlation."""
    return _accumulate(records, lattice).g2_zero()


def g2_tau(records, lattice: Lattice, tau_grid, sites) -> dict:
    """Delayed correlation curves for the requested sites."""
    acc = _accumulate(
        records, lattice, tau_grid=tau_grid, tau_sites=list(sites)
    )
    return acc.g2_tau()


# -- oscillation period ------------------------------------------------------


def oscillation_period(curve: TauCurve) -> float:
    """Delay gap between the two maxima flanking tau = 0.

    The curve is smoothed with a centered moving average (window 3) and the
    first interior local maximum at positive delay is located; by the
    mirror symmetry of steady-state correlations the flanking maxima sit at
    +-tau_max, so the gap is 2 tau_max. Correlations of the kind measured
    here dip at tau = 0, for which the gap equals the oscillation period
    (a pure 1 - cos(2 pi tau / T) signal returns exactly T).
    """
    g2 = np.asarray(curve.g2, dtype=float)
    if len(g2) < 3 or not np.all(np.isfinite(g2)):
        raise ObservableError("curve too short or undefined")
    smooth = g2.copy()
    smooth[1:-1] = (g2[:-2] + g2[1:-1] + g2[2:]) / 3.0
    for i in range(1, len(smooth) - 1):
        if smooth[i] >= smooth[i - 1] and smooth[i] > smooth[i + 1]:
            return 2.0 * float(curve.tau[i])
    raise ObservableError("no resolvable maximum flanking tau = 0")


# -- occupation spectrum -----------------------------------------------------


@dataclass
class SpectrumGrid:
    """Momentum-frequency occupation spectrum of a quasi-1D chain.

    n_tilde is the trajectory-averaged product alpha~ beta~ on the
    (k, omega) grid (complex; the imaginary part is a sampling diagnostic).
    sublattice holds the 3 x 3 cross products between per-sublattice
    transforms in (B, A, C) order, enabling band projections; mean_alpha /
    mean_beta are the per-sublattice ensemble means of the transforms.
    """

    k: np.ndarray
    omega: np.ndarray
    n_tilde: np.ndarray
    sublattice: np.ndarray
    mean_alpha: np.ndarray
    mean_beta: np.ndarray
    n_cells: int
    n_times: int
    d: float
    t_start: float
    sample_interval: float
    n_trajectories: int
    window: str = "none"

    def coherent(self) -> np.ndarray:
        """Mean-field (first-order coherent) part <alpha~><beta~> summed
        over sublattice pairs."""
        return np.einsum("ikw,jkw->kw", self.mean_alpha, self.mean_beta)


class SpectrumAccumulator:
    """Streaming spectrum accumulation over trajectory chunks."""

    def __init__(self, lattice: Lattice, times, window: str = "none"):
        if lattice.kind != "quasi1d":
            raise ObservableError(
                "occupation spectrum requires a quasi-1D chain"
            )
        if window not in ("none", "hann"):
            raise ObservableError("window must be 'none' or 'hann'")
        times = np.asarray(times, dtype=float)
        steps = np.diff(times)
        if len(times) < 2 or not np.allclose(steps, steps[0], rtol=1e-9):
            raise ObservableError("spectrum needs a uniform sample grid")
        self.lattice = lattice
        self.times = times
        self.window = window
        self.n_cells = int(lattice.params["n_cells"])
        self.d = float(lattice.params["d"])
        self.n_times = len(times)
        n, nt = self.n_cells, self.n_times
        m = np.arange(n)
        self.k_raw = 2.0 * np.pi * m / (n * self.d)
        # per-sublattice site ids and cell slots (missing smooth-edge sites
        # contribute zero)
        self._slots = {}
        for lab in _SUBLATTICE_ORDER:
            ids = [s.id for s in lattice.sites if s.sublattice == lab]
            cells = [lattice.sites[i].cell[0] - 1 for i in ids]
            self._slots[lab] = (np.array(ids, int), np.array(cells, int))
        # spatial phase kernels exp(+i k x) per sublattice on cell slots;
        # slots for smooth-edge-removed sites keep the formula value but
        # only ever multiply zeros
        cell_idx = np.arange(1, n + 1)
        x = {
            "B": (cell_idx - 0.5) * self.d,
            "C": (cell_idx - 0.5) * self.d,
            "A": cell_idx * self.d,
        }
        for lab in _SUBLATTICE_ORDER:
            ids, cells = self._slots[lab]
            built = np.array([lattice.sites[i].position[0] for i in ids])
            if not np.allclose(built, x[lab][cells]):
                raise ObservableError("lattice positions off the cell grid")
        self._phase = {
            lab: np.exp(1j * np.outer(self.k_raw, x[lab]))
            for lab in _SUBLATTICE_ORDER
        }
        self._win = (
            np.hanning(nt) if window == "hann" else np.ones(nt)
        )
        self._sum_pair = np.zeros((3, 3, n, nt), dtype=complex)
        self._sum_a = np.zeros((3, n, nt), dtype=complex)
        self._sum_b = np.zeros((3, n, nt), dtype=complex)
        self.n_trajectories = 0
        self.diverged = 0

    def _transform(self, block, conjugate_phases: bool):
        """Space/time transform per sublattice -> (3, n_traj, n_k, n_omega)."""
        out = []
        pref = 1.0 / (self.n_cells * self.n_times)
        for lab in _SUBLATTICE_ORDER:
            ids, cells = self._slots[lab]
            full = np.zeros(
                (block.shape[0], self.n_times, self.n_cells), dtype=complex
            )
            full[:, :, cells] = block[:, :, ids]
            full *= self._win[None, :, None]
            phase = self._phase[lab]
            if conjugate_phases:
                phase = phase.conj()
            spatial = full @ phase.T  # (traj, t, k)
            if conjugate_phases:
                ft = np.fft.fft(spatial, axis=1) * pref
            else:
                ft = np.fft.ifft(spatial, axis=1) * (self.n_times * pref)
            out.append(np.transpose(ft, (0, 2, 1)))  # (traj, k, omega)
        return np.stack(out, axis=0)

    def add(self, batch: TrajectoryBatch) -> None:
        good = ~batch.diverged
        self.diverged += int(batch.diverged.sum())
        if not good.any():
            return
        fa = self._transform(batch.alpha[good], conjugate_phases=False)
        fb = self._transform(batch.beta[good], conjugate_phases=True)
        self._sum_pair += np.einsum("iukw,jukw->ijkw", fa, fb)
        self._sum_a += fa.sum(axis=1)
        self._sum_b += fb.sum(axis=1)
        self.n_trajectories += int(good.sum())

    def result(self) -> SpectrumGrid:
        if self.n_trajectories == 0:
            raise ObservableError("empty ensemble: no usable trajectories")
        m = self.n_trajectories
        pair = self._sum_pair / m
        mean_a = self._sum_a / m
        mean_b = self._sum_b / m
        omega_raw = 2.0 * np.pi * np.fft.fftfreq(
            self.n_times, d=float(self.times[1] - self.times[0])
        )
        # shift k into (-pi/d, pi/d] and omega ascending
        k = self.k_raw.copy()
        k[k > np.pi / self.d + 1e-12] -= 2.0 * np.pi / self.d
        k_order = np.argsort(k, kind="stable")
        w_order = np.argsort(omega_raw, kind="stable")
        pair = pair[:, :, k_order][:, :, :, w_order]
        mean_a = mean_a[:, k_order][:, :, w_order]
        mean_b = mean_b[:, k_order][:, :, w_order]
        return SpectrumGrid(
            k=k[k_order],
            omega=omega_raw[w_order],
            n_tilde=pair.sum(axis=(0, 1)),
            sublattice=pair,
            mean_alpha=mean_a,
            mean_beta=mean_b,
            n_cells=self.n_cells,
            n_times=self.n_times,
            d=self.d,
            t_start=float(self.times[0]),
            sample_interval=float(self.times[1] - self.times[0]),
            n_trajectories=m,
            window=self.window,
        )


def occupation_spectrum(
    records, lattice: Lattice, window: str = "none"
) -> SpectrumGrid:
    """Momentum-frequency occupation spectrum of quasi-1D records."""
    batches = _as_batches(records)
    if not batches:
        raise ObservableError("empty ensemble: no records")
    acc = SpectrumAccumulator(lattice, batches[0].times, window=window)
    for b in batches:
        acc.add(b)
    return acc.result()


# -- tight-binding bands and ridge extraction --------------------------------


def bloch_matrix(k, hopping: float, deltas: dict) -> np.ndarray:
    """3 x 3 Bloch Hamiltonian of the quasi-1D chain in the (B, A, C)
    sublattice basis at momentum k (cell pitch d = 2); on-site energies are
    the negated detunings."""
    d = 2.0
    c = 2.0 * hopping * math.cos(k * d / 2.0)
    return np.array(
        [
            [-deltas["B"], -c, -hopping],
            [-c, -deltas["A"], 0.0],
            [-hopping, 0.0, -deltas["C"]],
        ]
    )


def _sublattice_deltas(model: ModelParams) -> dict:
    return {lab: model.sublattice_detuning(lab) for lab in ("A", "B", "C")}


def single_particle_bands(
    model: ModelParams, hopping: float, k: np.ndarray
) -> np.ndarray:
    """Eigenvalues (3, n_k), ascending, of the Bloch Hamiltonian. With a
    uniform detuning the middle band is exactly flat at its negation."""
    deltas = _sublattice_deltas(model)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    out = np.empty((3, len(k)))
    for i, kv in enumerate(k):
        out[:, i] = np.linalg.eigvalsh(bloch_matrix(kv, hopping, deltas))
    return out


def _band_eigvecs(model: ModelParams, hopping: float, k: np.ndarray):
    deltas = _sublattice_deltas(model)
    vals = np.empty((len(k), 3))
    vecs = np.empty((len(k), 3, 3))
    for i, kv in enumerate(k):
        w, v = np.linalg.eigh(bloch_matrix(kv, hopping, deltas))
        vals[i] = w
        vecs[i] = v.T
    return vals, vecs


@dataclass
class RidgeResult:
    k: np.ndarray
    centroid: np.ndarray
    spread: float
    band: int


def ridge_frequencies(
    grid: SpectrumGrid,
    model: ModelParams,
    hopping: float,
    band: int = 1,
) -> RidgeResult:
    """Per-momentum centroid frequency of the fluctuation spectrum.

    The sublattice-resolved spectrum is projected onto one tight-binding
    Bloch band (default the middle band, index 1 of the ascending
    eigenvalues) to isolate that band's fluctuation weight; the zero-
    frequency bin, which carries the time-independent coherent response,
    is excluded; the centroid is the intensity-weighted mean frequency per
    momentum with negative weights clipped; the spread is max - min of the
    centroids across the zone. A frequency-locked band yields a small
    spread, a dispersive one a large spread.
    """
    _, vecs = _band_eigvecs(model, hopping, grid.k)
    v = vecs[:, band, :]  # (n_k, 3) components in (B, A, C) order
    proj = np.einsum("ki,kj,ijkw->kw", v.conj(), v, grid.sublattice).real
    weights = proj.copy()
    weights[:, np.argmin(np.abs(grid.omega))] = 0.0
    weights = np.clip(weights, 0.0, None)
    totals = weights.sum(axis=1)
    if not np.all(totals > 0):
        raise ObservableError("no spectral weight off the coherent line")
    centroid = (weights * grid.omega[None, :]).sum(axis=1) / totals
    return RidgeResult(
        k=grid.k,
        centroid=centroid,
        spread=float(centroid.max() - centroid.min()),
        band=band,
    )
