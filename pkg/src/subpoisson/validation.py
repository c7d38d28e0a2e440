"""Self-checks run by ``subpoisson validate``.

Each check returns a :class:`CheckResult`; :func:`run_all` bundles them into
a JSON-serializable report.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .basis import brute_force_oracle
from .dynamics import (
    INTERACTION,
    ROTATING,
    SolverSettings,
    build_hamiltonian,
    bloch_pe,
    dressed_ground_state,
    loss_rate_scan,
    plateau_population,
    propagate,
)
from .params import (
    PhysicalParams,
    dressed_params,
    hz,
    stark_shift_exact,
    stark_shift_perturbative,
    to_hz,
)

ORACLE_SETTINGS = SolverSettings(plateau_tol=1e-7, max_horizon_factor=2000.0, max_excitations=None)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict

    def to_dict(self):
        return asdict(self)


def reference_params():
    """The N_T = 8 parameter set used throughout the checks."""
    return dressed_params(
        omega_p=hz(400e3), omega_c=hz(2e6), delta_s=hz(300e6), delta=hz(20e3), n_target=8
    )


def random_params(rng):
    """A random parameter draw inside the validated regime."""
    omega_p = hz(rng.uniform(0.1e6, 0.5e6))
    return PhysicalParams(
        omega_p=omega_p,
        omega_c=omega_p * rng.uniform(5.0, 10.0),
        omega_s=hz(rng.uniform(10e6, 60e6)),
        delta_s=hz(rng.choice([-1.0, 1.0]) * rng.uniform(200e6, 400e6)),
        delta_p=hz(rng.uniform(-3e6, 3e6)),
        gamma_e=hz(6e6),
        gamma_r=hz(rng.uniform(0.0, 1e3)),
        n_target=int(rng.integers(1, 10)),
    )


def oracle_equivalence(n_values=(1, 2, 3), draws=10, seed=2024, perturb=None,
                       h_tol=1e-10, pe_tol=1e-8):
    """Compare the collective Hamiltonian and quasi-steady ``P_e`` with the
    product-space construction.

    ``perturb`` (test hook) receives and returns the collective matrix before
    the comparison.
    """
    rng = np.random.default_rng(seed)
    worst_h = worst_pe = 0.0
    settings = ORACLE_SETTINGS
    for _ in range(draws):
        params = random_params(rng)
        delta_l = hz(rng.uniform(-50e3, 50e3))
        for n in n_values:
            oracle = brute_force_oracle(n, params, delta_l)
            h = build_hamiltonian(params, n, delta_l).matrix
            if perturb is not None:
                h = perturb(h.copy())
            scale = max(np.abs(h).max(), 1.0)
            worst_h = max(worst_h, float(np.abs(oracle.restricted() - h).max() / scale))

            window = settings.window_factor / params.gamma_e
            windows = int(round(settings.max_horizon_factor / settings.window_factor))
            psi0 = dressed_ground_state(oracle.basis, params.omega_s, params.delta_s)
            sym = plateau_population(
                h, psi0, oracle.basis.occupation("e"), window, settings.plateau_tol, windows
            )
            prod = plateau_population(
                oracle.hamiltonian,
                oracle.isometry @ psi0,
                oracle.excited_population_diag(),
                window,
                settings.plateau_tol,
                windows,
            )
            worst_pe = max(worst_pe, abs(sym.value - prod.value))
    return CheckResult(
        "oracle_equivalence",
        bool(worst_h <= h_tol and worst_pe <= pe_tol),
        {"max_rel_h_diff": worst_h, "max_pe_diff": worst_pe, "h_tol": h_tol, "pe_tol": pe_tol},
    )


def stark_expansion(params=None, n=8, max_rel=0.02, slope_window=(2.7, 3.3)):
    """Exact and second-order light shifts: closeness at ``n`` and cubic scaling
    of their difference in ``n omega_s**2 / delta_s**2``."""
    params = params or reference_params()
    exact = stark_shift_exact(n, params.omega_s, params.delta_s)
    pert = stark_shift_perturbative(n, params.omega_s, params.delta_s)
    rel = abs(exact - pert) / abs(exact)
    ns = np.array([1, 2, 4, 8, 16])
    x = ns * params.omega_s**2 / params.delta_s**2
    diff = np.abs(
        stark_shift_exact(ns, params.omega_s, params.delta_s)
        - stark_shift_perturbative(ns, params.omega_s, params.delta_s)
    )
    slope = float(np.polyfit(np.log(x), np.log(diff), 1)[0])
    ok = rel <= max_rel and slope_window[0] <= slope <= slope_window[1]
    return CheckResult("stark_expansion", bool(ok), {"rel_diff_at_n": rel, "loglog_slope": slope})


def frame_equivalence(params=None, n=3, t_final=None, tol=1e-6):
    """Level populations agree between the rotating frame and the
    interaction picture (the frame change is a diagonal phase).

    ``t_final`` defaults to ``5 / gamma_e``.
    """
    params = params or reference_params()
    t_final = t_final or 5.0 / params.gamma_e
    hr = build_hamiltonian(params, n, frame=ROTATING)
    hi = build_hamiltonian(params, n, frame=INTERACTION)
    psi0 = np.zeros(hr.dim, dtype=complex)
    psi0[0] = 1.0
    a = propagate(hr, psi0, t_final, samples=21)
    b = propagate(hi, psi0, t_final, tol=1e-10, samples=21)
    diff = 0.0
    for level in ("e", "q", "r"):
        occ = hr.basis.occupation(level)
        diff = max(diff, float(np.abs(a.populations(occ, False) - b.populations(occ, False)).max()))
    return CheckResult("frame_equivalence", bool(diff <= tol), {"max_population_diff": diff})


def bloch_trend(params=None, n_max=20, min_rho=0.9, settings=None):
    """The optical-Bloch estimate and the full rate share their minimum and ranking."""
    params = params or reference_params()
    settings = settings or SolverSettings(plateau_tol=1e-7, max_horizon_factor=2000.0)
    ns = list(range(1, n_max + 1))
    rates = np.array([row[1] for row in loss_rate_scan(params, ns, settings=settings)])
    approx = np.array([bloch_pe(params, n) for n in ns])
    keep = np.array(ns) != params.n_target
    rho = float(stats.spearmanr(rates[keep], approx[keep]).statistic)
    argmin_rate = ns[int(np.argmin(rates))]
    argmin_bloch = ns[int(np.argmin(approx))]
    ok = argmin_rate == argmin_bloch and rho > min_rho
    return CheckResult(
        "bloch_trend",
        bool(ok),
        {"spearman": rho, "argmin_rate": argmin_rate, "argmin_bloch": argmin_bloch},
    )


DRESSING_TABLE = (
    # (label, omega_p, omega_c, delta_s, delta, n_target, omega_s, delta_p, rel_omega_s, rel_delta_p)
    ("n_target_8", 400e3, 2e6, 300e6, 20e3, 8, 54e6, -2.2e6, 0.03, 0.05),
    ("n_target_4", 400e3, 2e6, 200e6, 50e3, 4, 50e6, -2.9e6, 0.03, 0.05),
    ("n_target_20", 200e3, 1e6, 300e6, 5e3, 20, 38e6, -1.0e6, 0.08, 0.08),
)


def dressing_table():
    """Derived dressing Rabi frequency and probe detuning against quoted values."""
    rows = {}
    ok = True
    for label, op, oc, ds, d, nt, os_ref, dp_ref, tol_s, tol_p in DRESSING_TABLE:
        p = dressed_params(omega_p=hz(op), omega_c=hz(oc), delta_s=hz(ds), delta=hz(d), n_target=nt)
        es = abs(to_hz(p.omega_s) - os_ref) / abs(os_ref)
        ep = abs(to_hz(p.delta_p) - dp_ref) / abs(dp_ref)
        rows[label] = {
            "omega_s_hz": to_hz(p.omega_s),
            "delta_p_hz": to_hz(p.delta_p),
            "omega_s_rel_err": es,
            "delta_p_rel_err": ep,
        }
        ok &= es <= tol_s and ep <= tol_p
    return CheckResult("dressing_table", bool(ok), rows)


def run_all(perturb=None, include_slow=True):
    checks = [
        dressing_table(),
        stark_expansion(),
        oracle_equivalence(perturb=perturb),
        frame_equivalence(),
    ]
    if include_slow:
        checks.append(bloch_trend())
    return {
        "passed": all(c.passed for c in checks),
        "checks": [c.to_dict() for c in checks],
    }


__all__ = [
    "CheckResult",
    "bloch_trend",
    "dressing_table",
    "frame_equivalence",
    "oracle_equivalence",
    "run_all",
    "stark_expansion",
]
