"""Non-Hermitian multi-atom dynamics and collective loss rates.

The computational frame is the rotating frame, where the Hamiltonian is
time independent: each ``|q>`` or ``|e>`` atom sits at ``-(delta_p + delta_l)``
(two-photon resonance of the coupling beam), the Rydberg excitation at
``-delta_s``, and the decay terms enter as ``-i gamma/2`` on the diagonal.
The literal interaction-picture form, with the explicit laser phases, is
kept for cross-validation only.

The loss rate of an ``N``-atom ensemble is ``gamma_e * P_e`` where ``P_e`` is
the plateau of ``<sigma_ee>`` on the renormalized no-jump state.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from . import __version__
from .basis import DEFAULT_ATOM_CAP, collective_operator, enumerate_basis, SymmetricState
from .errors import ConvergenceError, DomainError, SolverError
from .params import stark_shift_exact, to_hz

log = logging.getLogger(__name__)

ROTATING = "rotating"
INTERACTION = "interaction"

# half-width of the laser-shift grid, in units of the noise standard deviation
GRID_HALF_WIDTH_SIGMAS = 5.0
MIN_GRID_POINTS = 9


@dataclass(frozen=True)
class SolverSettings:
    """Plateau detection and basis truncation controls.

    ``max_excitations`` caps the number of atoms outside ``|g>``; ``None``
    keeps the full basis.  Populations converge very fast in this cap since
    each extra excitation costs a factor of order ``(omega_p/omega_c)**2``.
    """

    plateau_tol: float = 1e-4
    max_horizon_factor: float = 200.0
    window_factor: float = 5.0
    consecutive_windows: int = 3
    max_excitations: int | None = 12
    atom_cap: int = DEFAULT_ATOM_CAP

    def __post_init__(self):
        if not self.plateau_tol > 0:
            raise DomainError("plateau_tol must be > 0")
        if not self.max_horizon_factor > self.window_factor > 0:
            raise DomainError("need max_horizon_factor > window_factor > 0")
        if self.consecutive_windows < 1:
            raise DomainError("consecutive_windows must be >= 1")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Hamiltonian:
    """Multi-atom Hamiltonian in units of hbar (rad/s).

    In the rotating frame ``matrix`` holds the time-independent operator.
    In the interaction picture ``matrix`` is the static part and
    ``probe``/``dressing`` are the operators multiplying
    ``exp(-i (delta_p + delta_l) t)`` and ``exp(-i delta_s t)``; their
    adjoints carry the conjugate phases.
    """

    atom_count: int
    frame: str
    basis: object
    delta_l: float
    matrix: np.ndarray
    probe: np.ndarray | None = None
    dressing: np.ndarray | None = None
    probe_frequency: float = 0.0
    dressing_frequency: float = 0.0

    @property
    def dim(self):
        return self.matrix.shape[0]

    def at(self, t):
        if self.frame == ROTATING:
            return self.matrix
        p = np.exp(-1j * self.probe_frequency * t) * self.probe
        s = np.exp(-1j * self.dressing_frequency * t) * self.dressing
        return self.matrix + p + p.conj().T + s + s.conj().T


def rotating_hamiltonian(basis, omega_p, omega_c, omega_s, probe_detuning, delta_s, gamma_e, gamma_r):
    """Rotating-frame matrix over ``basis`` from raw couplings and detunings."""
    nq = basis.occupation("q")
    ne = basis.occupation("e")
    nr = basis.occupation("r")
    diag = -probe_detuning * (nq + ne) - delta_s * nr - 0.5j * gamma_e * ne - 0.5j * gamma_r * nr
    h = np.diag(diag.astype(complex))
    for omega, mu, nu in ((omega_p, "e", "g"), (omega_c, "e", "q"), (omega_s, "r", "g")):
        if omega == 0:
            continue
        op = collective_operator(basis, mu, nu).matrix
        h -= 0.5 * omega * (op + op.conj().T)
    return h


def build_hamiltonian(params, n, delta_l=0.0, frame=ROTATING, max_excitations=None, atom_cap=DEFAULT_ATOM_CAP):
    """Hamiltonian of ``n`` atoms with the laser shift ``delta_l`` on the probe."""
    if n < 1:
        raise DomainError(f"need at least one atom, got {n}")
    basis = enumerate_basis(n, max_excitations=max_excitations, cap=atom_cap)
    if frame == ROTATING:
        h = rotating_hamiltonian(
            basis,
            params.omega_p,
            params.omega_c,
            params.omega_s,
            params.delta_p + delta_l,
            params.delta_s,
            params.gamma_e,
            params.gamma_r,
        )
        return Hamiltonian(n, frame, basis, delta_l, h)
    if frame == INTERACTION:
        static = rotating_hamiltonian(
            basis, 0.0, params.omega_c, 0.0, 0.0, 0.0, params.gamma_e, params.gamma_r
        )
        probe = -0.5 * params.omega_p * collective_operator(basis, "e", "g").matrix
        dressing = -0.5 * params.omega_s * collective_operator(basis, "r", "g").matrix
        return Hamiltonian(
            n,
            frame,
            basis,
            delta_l,
            static,
            probe=probe,
            dressing=dressing,
            probe_frequency=params.delta_p + delta_l,
            dressing_frequency=params.delta_s,
        )
    raise DomainError(f"unknown frame {frame!r}")


@dataclass(frozen=True)
class Propagation:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dim)

    def norms(self):
        return np.sum(np.abs(self.states) ** 2, axis=1)

    def populations(self, diag, normalize=True):
        """Expectation of a diagonal observable along the trajectory."""
        w = np.abs(self.states) ** 2
        vals = w @ diag
        return vals / np.sum(w, axis=1) if normalize else vals


def propagate(hamiltonian, psi0, t_final, tol=1e-8, samples=101):
    """Integrate ``d psi/dt = -i H psi`` and sample on a uniform grid.

    The rotating frame uses exact matrix-exponential steps between samples.
    The interaction picture uses an adaptive Runge-Kutta integrator with
    relative tolerance ``tol``.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if not tol > 0:
        raise DomainError("tol must be > 0")
    if abs(np.vdot(psi0, psi0).real - 1.0) > 1e-9:
        raise DomainError("initial state must be normalized")
    times = np.linspace(0.0, t_final, samples)
    if hamiltonian.frame == ROTATING:
        states = np.empty((samples, psi0.size), dtype=complex)
        states[0] = psi0
        if samples > 1:
            step = expm(-1j * hamiltonian.matrix * (times[1] - times[0]))
            for k in range(1, samples):
                states[k] = step @ states[k - 1]
        return Propagation(times, states)

    def rhs(t, y):
        return -1j * (hamiltonian.at(t) @ y)

    sol = solve_ivp(rhs, (0.0, t_final), psi0, method="DOP853", t_eval=times, rtol=tol, atol=tol * 1e-3)
    if not sol.success:
        raise SolverError(
            f"integration failed: {sol.message}",
            {"t_reached": float(sol.t[-1]) if sol.t.size else 0.0, "nfev": sol.nfev, "tol": tol},
        )
    return Propagation(sol.t, sol.y.T.copy())


def dressed_ground_state(basis, omega_s, delta_s):
    """Adiabatically dressed ``|g^N>``: the light-shifted eigenvector of the
    two-state block ``{|g^N>, |g^(N-1) r>}``."""
    n = basis.atom_count
    psi = np.zeros(len(basis), dtype=complex)
    partner = SymmetricState(n - 1, 0, 0, 1)
    coupling = math.sqrt(n) * omega_s
    if n == 0 or coupling == 0 or partner not in basis:
        psi[0] = 1.0
        return psi
    shift = stark_shift_exact(n, omega_s, delta_s)
    amp = np.array([1.0, -2.0 * shift / coupling])
    amp /= np.linalg.norm(amp)
    psi[0] = amp[0]
    psi[basis.index(partner)] = amp[1]
    return psi


@dataclass(frozen=True)
class PlateauResult:
    value: float
    time: float
    windows: int
    state: np.ndarray


def plateau_population(h, psi0, observable, window, tol, max_windows, consecutive=3):
    """Evolve under ``h`` with renormalization until ``<observable>`` settles.

    The expectation is sampled once per ``window``; the plateau is declared
    when its relative change stays within ``tol`` for ``consecutive``
    successive windows.
    """
    step = expm(-1j * h * window)
    psi = np.asarray(psi0, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    prev = float(np.abs(psi) ** 2 @ observable)
    calm = 0
    for k in range(1, max_windows + 1):
        psi = step @ psi
        norm = np.linalg.norm(psi)
        if norm == 0 or not np.isfinite(norm):
            raise ConvergenceError(f"state norm collapsed after {k} windows")
        psi /= norm
        val = float(np.abs(psi) ** 2 @ observable)
        if abs(val - prev) <= tol * abs(val):
            calm += 1
            if calm >= consecutive:
                return PlateauResult(val, k * window, k, psi)
        else:
            calm = 0
        prev = val
    raise ConvergenceError(
        f"no plateau within {max_windows} windows (last change {abs(val - prev):.3g}, value {val:.6g})"
    )


@dataclass(frozen=True)
class QuasiSteadyState:
    atom_count: int
    delta_l: float
    p_e: float
    p_r: float
    time: float
    windows: int
    state: np.ndarray
    basis: object


def _plateau_for(h, basis, params, settings):
    window = settings.window_factor / params.gamma_e
    max_windows = int(round(settings.max_horizon_factor / settings.window_factor))
    psi0 = dressed_ground_state(basis, params.omega_s, params.delta_s)
    return plateau_population(
        h,
        psi0,
        basis.occupation("e"),
        window,
        settings.plateau_tol,
        max_windows,
        settings.consecutive_windows,
    )


def quasi_steady_state(params, n, delta_l=0.0, settings=None):
    """Renormalized no-jump state whose ``<sigma_ee>`` has plateaued."""
    settings = settings or SolverSettings()
    ham = build_hamiltonian(
        params, n, delta_l, max_excitations=settings.max_excitations, atom_cap=settings.atom_cap
    )
    res = _plateau_for(ham.matrix, ham.basis, params, settings)
    weights = np.abs(res.state) ** 2
    return QuasiSteadyState(
        n,
        delta_l,
        res.value,
        float(weights @ ham.basis.occupation("r")),
        res.time,
        res.windows,
        res.state,
        ham.basis,
    )


def quasi_steady_pe(params, n, delta_l=0.0, settings=None):
    """Total excited-state population of the quasi-steady ``n``-atom state."""
    return quasi_steady_state(params, n, delta_l, settings).p_e


def loss_rate(params, n, delta_l=0.0, settings=None):
    """Collective atom loss rate ``gamma_e * branching * P_e`` in 1/s."""
    if n == 0:
        return 0.0
    return params.gamma_e * params.loss_branching * quasi_steady_pe(params, n, delta_l, settings)


def bloch_pe(params, n):
    """Three-level optical-Bloch estimate of ``P_e`` for ``n`` atoms.

    The single-atom stationary population is scaled by ``n`` and evaluated
    at the mismatch ``2 (N_T - n) delta``; it vanishes at the target.
    """
    if n < 1:
        raise DomainError(f"need at least one atom, got {n}")
    d = 2.0 * (params.n_target - n) * params.delta
    d2 = 4.0 * d * d
    num = d2 * params.omega_p * params.gamma_e
    den = (params.omega_c**2 - d2) ** 2 + d2 * params.gamma_e**2
    return n * (params.omega_p / params.gamma_e) * num / den


class MonotoneHermite:
    """Row-wise cubic Hermite interpolation in the laser shift.

    Node slopes come from second-order finite differences.  Inside monotone
    stretches they are limited (Fritsch-Carlson) so the interpolant stays
    monotone; at data extrema the finite-difference slope is kept, which
    avoids the flattening a plain PCHIP applies there.
    """

    def __init__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if x.ndim != 1 or y.shape[1] != x.size:
            raise DomainError("grid and value shapes disagree")
        self.x = x
        self.y = y
        self.slopes = self._slopes(x, y) if x.size > 1 else np.zeros_like(y)

    @staticmethod
    def _slopes(x, y):
        if x.size == 2:
            s = np.diff(y, axis=1) / np.diff(x)
            return np.repeat(s, 2, axis=1)
        d = np.gradient(y, x, axis=1, edge_order=2)
        secant = np.diff(y, axis=1) / np.diff(x)
        left, right = secant[:, :-1], secant[:, 1:]
        inner = d[:, 1:-1]
        mono = left * right > 0
        bound = 3.0 * np.minimum(np.abs(left), np.abs(right))
        limited = np.sign(right) * np.minimum(np.abs(inner), bound)
        flat = (left == 0) | (right == 0)
        inner[:] = np.where(mono, limited, np.where(flat, 0.0, inner))
        # end slopes must not point against the first/last secant
        d[:, 0] = np.where(d[:, 0] * secant[:, 0] < 0, 0.0, d[:, 0])
        d[:, -1] = np.where(d[:, -1] * secant[:, -1] < 0, 0.0, d[:, -1])
        return d

    def __call__(self, xq):
        x = self.x
        if x.size == 1:
            if xq != x[0]:
                raise DomainError("single-column table only answers delta_l = 0")
            return self.y[:, 0].copy()
        if not (x[0] <= xq <= x[-1]):
            raise DomainError(
                f"delta_l = {to_hz(xq):.6g} Hz lies outside the table grid "
                f"[{to_hz(x[0]):.6g}, {to_hz(x[-1]):.6g}] Hz"
            )
        i = int(np.searchsorted(x, xq, side="right")) - 1
        if x[i] == xq:
            return self.y[:, i].copy()
        h = x[i + 1] - x[i]
        t = (xq - x[i]) / h
        t2, t3 = t * t, t * t * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        return (
            h00 * self.y[:, i]
            + h10 * h * self.slopes[:, i]
            + h01 * self.y[:, i + 1]
            + h11 * h * self.slopes[:, i + 1]
        )


def make_delta_l_grid(sigma, points=25):
    """Uniform laser-shift grid over ``+-5 sigma``; a single node when ``sigma = 0``."""
    if sigma < 0:
        raise DomainError("sigma must be >= 0")
    if sigma == 0:
        return np.array([0.0])
    if points < MIN_GRID_POINTS:
        raise DomainError(f"need at least {MIN_GRID_POINTS} grid points, got {points}")
    if points % 2 == 0:
        points += 1  # keep delta_l = 0 on a node
    half = GRID_HALF_WIDTH_SIGMAS * sigma
    return np.linspace(-half, half, points)


@dataclass
class LossRateTable:
    """Loss rates over atom number ``0..n_max`` and a laser-shift grid.

    ``rates[n, j]`` is ``Gamma_n`` at ``delta_l_grid[j]``; row 0 is zero.
    """

    n_target: int
    delta_l_grid: np.ndarray
    rates: np.ndarray
    metadata: dict = field(default_factory=dict)
    _interp: MonotoneHermite = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.delta_l_grid = np.asarray(self.delta_l_grid, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        if self.rates.shape != (self.rates.shape[0], self.delta_l_grid.size):
            raise DomainError("rates must have one column per grid node")
        if np.any(self.rates < 0):
            raise DomainError("loss rates must be non-negative")
        self._interp = MonotoneHermite(self.delta_l_grid, self.rates)

    @property
    def n_max(self):
        return self.rates.shape[0] - 1

    def rates_at(self, delta_l):
        """Vector of ``Gamma_n(delta_l)`` for ``n = 0..n_max`` (clipped at 0)."""
        return np.maximum(self._interp(delta_l), 0.0)

    def rate(self, n, delta_l=0.0):
        if not 0 <= n <= self.n_max:
            raise DomainError(f"N = {n} is outside the table range 0..{self.n_max}")
        return float(self.rates_at(delta_l)[n])

    def column(self, delta_l=0.0):
        j = np.flatnonzero(self.delta_l_grid == delta_l)
        if j.size == 0:
            raise DomainError(f"delta_l = {to_hz(delta_l):.6g} Hz is not a grid node")
        return self.rates[:, j[0]].copy()

    def argmin(self, delta_l=0.0, n_min=1):
        col = self.rates_at(delta_l)
        return n_min + int(np.argmin(col[n_min:]))

    def rows(self):
        for n in range(1, self.n_max + 1):
            for j, d in enumerate(self.delta_l_grid):
                yield n, to_hz(d), self.rates[n, j]

    def content_hash(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.delta_l_grid).tobytes())
        h.update(np.ascontiguousarray(self.rates).tobytes())
        return h.hexdigest()

    def sidecar(self):
        meta = dict(self.metadata)
        meta.update(
            n_target=self.n_target,
            n_max=self.n_max,
            delta_l_grid_hz=[to_hz(d) for d in self.delta_l_grid],
            content_sha256=self.content_hash(),
            tool_version=__version__,
        )
        return meta


def _rates_for_n(args):
    params, n, grid, settings = args
    basis = enumerate_basis(n, max_excitations=settings.max_excitations, cap=settings.atom_cap)
    h0 = rotating_hamiltonian(
        basis,
        params.omega_p,
        params.omega_c,
        params.omega_s,
        params.delta_p,
        params.delta_s,
        params.gamma_e,
        params.gamma_r,
    )
    shift_diag = basis.occupation("q") + basis.occupation("e")
    out = np.empty(len(grid))
    for j, dl in enumerate(grid):
        h = h0 - dl * np.diag(shift_diag)
        try:
            res = _plateau_for(h, basis, params, settings)
        except ConvergenceError as exc:
            raise ConvergenceError(f"N = {n}, delta_l = {to_hz(dl):.6g} Hz: {exc}") from None
        out[j] = params.gamma_e * params.loss_branching * res.value
    return out


def build_rate_table(params, n_max, delta_l_grid, settings=None, threads=1):
    """Tabulate ``Gamma_n(delta_l)`` for ``n = 1..n_max`` over the grid.

    Work is split per atom number; results are assembled in ``n`` order, so
    the table does not depend on ``threads``.
    """
    settings = settings or SolverSettings()
    if n_max < params.n_target:
        raise DomainError(f"n_max = {n_max} is below the target {params.n_target}")
    grid = np.asarray(delta_l_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("delta_l grid must be a non-empty increasing 1-D array")
    tasks = [(params, n, grid, settings) for n in range(1, n_max + 1)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_rates_for_n, tasks))
    else:
        rows = [_rates_for_n(t) for t in tasks]
    rates = np.vstack([np.zeros(grid.size)] + rows)
    meta = {
        "params": params_provenance(params),
        "solver": settings.to_dict(),
    }
    return LossRateTable(params.n_target, grid, rates, meta)


def params_provenance(params):
    """Parameter record in Hz plus a stable hash."""
    record = {
        k: (to_hz(v) if k not in ("n_target", "loss_branching") else v)
        for k, v in params.to_dict().items()
    }
    blob = json.dumps(record, sort_keys=True).encode()
    return {"values_hz": record, "sha256": hashlib.sha256(blob).hexdigest()}


def loss_rate_scan(params, n_values, delta_l=0.0, settings=None):
    """``(n, Gamma_n, P_e, P_r)`` for each ``n`` at a single laser shift."""
    out = []
    for n in n_values:
        st = quasi_steady_state(params, n, delta_l, settings)
        out.append((n, params.gamma_e * params.loss_branching * st.p_e, st.p_e, st.p_r))
    return out
