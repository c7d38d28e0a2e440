"""Physical parameters and closed-form light-shift relations.

All frequencies and rates are angular (rad/s) internally.  Configuration
files quote plain frequencies in Hz (the ``X`` of a ``2*pi*X`` value); use
:func:`hz` to convert once at ingestion.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.constants import hbar

from .errors import DomainError

TWO_PI = 2.0 * math.pi

# 5P decay and 70P Rydberg decay of rubidium (no black-body contribution).
RUBIDIUM_GAMMA_E = TWO_PI * 6e6
RUBIDIUM_GAMMA_R = TWO_PI * 100.0


def hz(value):
    """Convert a plain frequency in Hz to angular frequency in rad/s."""
    return TWO_PI * value


def to_hz(value):
    """Convert an angular frequency in rad/s to a plain frequency in Hz."""
    return value / TWO_PI


@dataclass(frozen=True)
class PhysicalParams:
    """Laser and atom parameters of the dressed EIT scheme (rad/s).

    ``omega_p`` may be zero (a dark ensemble); every other coupling check
    follows the regime the scheme is designed for: a strong coupling beam
    and a far-detuned dressing beam.
    """

    omega_p: float
    omega_c: float
    omega_s: float
    delta_s: float
    delta_p: float
    gamma_e: float
    gamma_r: float
    n_target: int
    loss_branching: float = 1.0

    def __post_init__(self):
        if not self.omega_p >= 0:
            raise DomainError(f"omega_p must be >= 0, got {self.omega_p}")
        if not self.omega_c > 0:
            raise DomainError(f"omega_c must be > 0, got {self.omega_c}")
        if not self.omega_s >= 0:
            raise DomainError(f"omega_s must be >= 0, got {self.omega_s}")
        if not self.gamma_e > 0:
            raise DomainError(f"gamma_e must be > 0, got {self.gamma_e}")
        if not self.gamma_r >= 0:
            raise DomainError(f"gamma_r must be >= 0, got {self.gamma_r}")
        if not (0.0 < self.loss_branching <= 1.0):
            raise DomainError(
                f"loss_branching must lie in (0, 1], got {self.loss_branching}"
            )
        if int(self.n_target) != self.n_target or self.n_target < 1:
            raise DomainError(f"n_target must be a positive integer, got {self.n_target}")
        object.__setattr__(self, "n_target", int(self.n_target))

        ratio = math.inf if self.omega_p == 0 else self.omega_c / self.omega_p
        if ratio < 2.0:
            raise DomainError(
                f"omega_c/omega_p = {ratio:.3g}; the EIT regime needs at least 2"
            )
        if ratio < 5.0:
            warnings.warn(
                f"omega_c/omega_p = {ratio:.3g} is below 5; EIT suppression is weak",
                stacklevel=3,
            )
        if not abs(self.delta_s) > self.omega_s:
            raise DomainError(
                f"|delta_s| = {abs(self.delta_s):.6g} must exceed omega_s = {self.omega_s:.6g}"
            )
        if self.omega_s > 0 and abs(self.delta_s) / self.omega_s < 3.0:
            warnings.warn(
                f"|delta_s|/omega_s = {abs(self.delta_s) / self.omega_s:.3g} is below 3; "
                "dressing is barely perturbative",
                stacklevel=3,
            )

    @property
    def delta(self):
        """Characteristic interaction shift (rad/s)."""
        return characteristic_shift(self.omega_s, self.delta_s)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class NoiseModel:
    """Per-trajectory laser shift spread and the initial Poisson mean."""

    sigma_delta_l: float
    nbar_initial: float

    def __post_init__(self):
        if not self.sigma_delta_l >= 0:
            raise DomainError(f"sigma_delta_l must be >= 0, got {self.sigma_delta_l}")
        if not self.nbar_initial > 0:
            raise DomainError(f"nbar_initial must be > 0, got {self.nbar_initial}")


def characteristic_shift(omega_s, delta_s):
    """Return ``omega_s**4 / (16 delta_s**3)``, the per-step interaction shift."""
    if delta_s == 0:
        raise DomainError("delta_s must be non-zero")
    return omega_s**4 / (16.0 * delta_s**3)


def solve_omega_s(delta, delta_s):
    """Dressing Rabi frequency that produces the interaction shift ``delta``."""
    if not (delta > 0 and delta_s > 0):
        raise DomainError(
            f"delta and delta_s must both be positive, got {delta!r}, {delta_s!r}"
        )
    return (16.0 * delta * delta_s**3) ** 0.25


def stark_shift_exact(n, omega_s, delta_s):
    """Ground-connected eigenvalue of the blockaded two-state dressing block.

    The block couples ``|g^N>`` to ``|g^(N-1) r>`` with ``sqrt(N) omega_s``;
    the eigenvalue is written in the cancellation-free form
    ``sign(delta_s) N omega_s**2 / (2 (sqrt(delta_s**2 + N omega_s**2) + |delta_s|))``.
    Works elementwise on arrays of ``n``.
    """
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise DomainError("atom number must be >= 0")
    x = n * omega_s**2
    root = np.sqrt(delta_s**2 + x)
    out = math.copysign(1.0, delta_s) * x / (2.0 * (root + abs(delta_s)))
    return float(out) if out.ndim == 0 else out


def stark_shift_perturbative(n, omega_s, delta_s):
    """Second-order light shift ``(Os^2/4Ds) N - (Os^4/16Ds^3) N^2``."""
    if delta_s == 0:
        raise DomainError("delta_s must be non-zero")
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise DomainError("atom number must be >= 0")
    out = omega_s**2 / (4.0 * delta_s) * n - characteristic_shift(omega_s, delta_s) * n**2
    return float(out) if out.ndim == 0 else out


def probe_detuning(n_target, omega_s, delta_s):
    """Probe detuning resonant with ``|g^NT> <-> |g^(NT-1) e>`` (exact shifts)."""
    if n_target < 1:
        raise DomainError(f"n_target must be >= 1, got {n_target}")
    return stark_shift_exact(n_target - 1, omega_s, delta_s) - stark_shift_exact(
        n_target, omega_s, delta_s
    )


def probe_detuning_second_order(n_target, omega_s, delta_s):
    """Truncated form ``-Os^2/(4 Ds) + (2 NT - 1) delta``."""
    if n_target < 1:
        raise DomainError(f"n_target must be >= 1, got {n_target}")
    return -(omega_s**2) / (4.0 * delta_s) + (2 * n_target - 1) * characteristic_shift(
        omega_s, delta_s
    )


def transition_mismatch(n, params, shifts="exact"):
    """Probe detuning from the ``|g^N> <-> |g^(N-1) e>`` transition.

    ``shifts`` selects ``"exact"`` or ``"perturbative"`` light shifts for the
    transition energy; ``params.delta_p`` is used as given.
    """
    if n < 1:
        raise DomainError(f"atom number must be >= 1, got {n}")
    if shifts == "exact":
        shift = stark_shift_exact
    elif shifts == "perturbative":
        shift = stark_shift_perturbative
    else:
        raise DomainError(f"unknown shift model {shifts!r}")
    transition = shift(n - 1, params.omega_s, params.delta_s) - shift(
        n, params.omega_s, params.delta_s
    )
    return params.delta_p - transition


def rydberg_fraction(n, omega_s, delta_s):
    """Perturbative Rydberg population ``N omega_s**2 / (4 delta_s**2)``."""
    if n < 0:
        raise DomainError("atom number must be >= 0")
    return n * omega_s**2 / (4.0 * delta_s**2)


def dressing_critical_distance(c6, delta_s):
    """Critical dressing distance ``|C6 / (2 hbar delta_s)|**(1/6)`` in metres.

    ``c6`` is in J m^6 and ``delta_s`` in rad/s.
    """
    if delta_s == 0:
        raise DomainError("delta_s must be non-zero")
    return abs(c6 / (2.0 * hbar * delta_s)) ** (1.0 / 6.0)


def dressed_params(
    *,
    omega_p,
    omega_c,
    delta_s,
    n_target,
    omega_s=None,
    delta=None,
    gamma_e=RUBIDIUM_GAMMA_E,
    gamma_r=RUBIDIUM_GAMMA_R,
    delta_p=None,
    loss_branching=1.0,
    consistency=0.01,
):
    """Build :class:`PhysicalParams`, deriving the dressing and probe settings.

    Exactly one of ``omega_s`` / ``delta`` is normally given.  When both are
    present they must agree to ``consistency`` (relative).  ``delta_p``
    defaults to the exact resonance :func:`probe_detuning`.
    """
    if omega_s is None and delta is None:
        raise DomainError("give omega_s or delta")
    if delta is not None:
        derived = solve_omega_s(delta, delta_s)
        if omega_s is not None and abs(derived - omega_s) > consistency * abs(omega_s):
            raise DomainError(
                f"omega_s = {to_hz(omega_s):.6g} Hz and delta = {to_hz(delta):.6g} Hz "
                f"disagree (delta implies omega_s = {to_hz(derived):.6g} Hz)"
            )
        if omega_s is None:
            omega_s = derived
    if delta_p is None:
        delta_p = probe_detuning(n_target, omega_s, delta_s)
    return PhysicalParams(
        omega_p=omega_p,
        omega_c=omega_c,
        omega_s=omega_s,
        delta_s=delta_s,
        delta_p=delta_p,
        gamma_e=gamma_e,
        gamma_r=gamma_r,
        n_target=n_target,
        loss_branching=loss_branching,
    )
