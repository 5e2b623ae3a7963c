"""Open-system dynamics of the four-level donor model.

The density matrix evolves under

    drho/dt = -i [H(t), rho] + sum_k ( C_k rho C_k+ - {C_k+ C_k, rho}/2 )

with the jump operators supplied by :class:`DissipatorSet`: radiative
decay from each excited level into both ground states, slow population
exchange between the ground spin states, pure ground-spin dephasing,
and a laser-activated dephasing of the excited manifold whose rate
follows the instantaneous Rabi envelope,

    gamma(t) = beta1 * Omega_R(t) + beta2 * Omega_R(t)^2.

Two integration methods are provided. The adaptive embedded Runge-Kutta
method follows the vectorized master equation directly. The fixed-step
method advances with the matrix exponential of the instantaneous
generator, which is exact for piecewise-constant dynamics. Pulse-free
stretches are never integrated numerically: with the drive off the
generator is constant and block-diagonal, so populations advance with a
small matrix exponential and each coherence picks up an exact
phase-and-decay factor. That removes the stiffness of picosecond pulses
separated by microsecond delays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import IntegrationFailure, NumericsError, ValidationError
from .hamiltonian import (
    EXCITED_LOWER,
    EXCITED_UPPER,
    GROUND_DOWN,
    GROUND_UP,
    LevelScheme,
    PulseSpec,
    build_hamiltonian,
    envelope_value,
)

__all__ = [
    "DensityMatrix",
    "DissipatorSet",
    "IntegratorConfig",
    "lindblad_rhs",
    "liouvillian",
    "dissipator_superoperator",
    "integrate_master",
    "evolve",
    "pulse_window_propagator",
    "SilencePropagator",
    "t1_rate_model",
    "EvolutionResult",
]

_DIM = 4
_IDX = np.arange(16).reshape(4, 4)  # element (i, j) -> flat index


# ---------------------------------------------------------------------------
# state


@dataclass
class DensityMatrix:
    """A 4x4 density matrix tagged with the time it refers to."""

    matrix: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (_DIM, _DIM):
            raise ValidationError(f"density matrix must be 4x4, got {m.shape}")
        self.matrix = m

    # -- constructors ------------------------------------------------
    @classmethod
    def pure(cls, index: int, time: float = 0.0) -> "DensityMatrix":
        m = np.zeros((_DIM, _DIM), dtype=complex)
        m[index, index] = 1.0
        return cls(m, time)

    @classmethod
    def ground_down(cls, time: float = 0.0) -> "DensityMatrix":
        return cls.pure(GROUND_DOWN, time)

    @classmethod
    def scrambled(cls, time: float = 0.0) -> "DensityMatrix":
        """Equal ground-state populations with no coherence."""
        m = np.zeros((_DIM, _DIM), dtype=complex)
        m[GROUND_DOWN, GROUND_DOWN] = 0.5
        m[GROUND_UP, GROUND_UP] = 0.5
        return cls(m, time)

    # -- observables -------------------------------------------------
    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix))

    @property
    def p_down(self) -> float:
        return float(self.matrix[GROUND_DOWN, GROUND_DOWN].real)

    @property
    def p_up(self) -> float:
        return float(self.matrix[GROUND_UP, GROUND_UP].real)

    @property
    def excited_population(self) -> float:
        return float(self.matrix[EXCITED_LOWER, EXCITED_LOWER].real
                     + self.matrix[EXCITED_UPPER, EXCITED_UPPER].real)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def trace_error(self) -> float:
        return abs(np.trace(self.matrix) - 1.0)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        sym = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(sym)[0])

    def validate(self, trace_tol=1e-9, herm_tol=1e-10, positivity_floor=-1e-7):
        problems = []
        if self.trace_error() > trace_tol:
            problems.append(f"trace deviates by {self.trace_error():.3e}")
        if self.hermiticity_error() > herm_tol:
            problems.append(f"hermiticity violated by {self.hermiticity_error():.3e}")
        if self.min_eigenvalue() < positivity_floor:
            problems.append(f"negative eigenvalue {self.min_eigenvalue():.3e}")
        if problems:
            raise ValidationError("unphysical density matrix: " + "; ".join(problems),
                                  problems)
        return self

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.matrix.copy(), self.time)


# ---------------------------------------------------------------------------
# dissipators


@dataclass(frozen=True)
class DissipatorSet:
    """Rates of the dissipation channels, all in 1/s.

    ``branching`` gives the weight of each radiative channel, indexed
    [excited][ground]; each row must sum to one. ``laser_dephasing_linear``
    and ``laser_dephasing_quadratic`` are the envelope coefficients of
    the excited-state dephasing rate (dimensionless and seconds).
    """

    radiative_rate: float = 0.0
    branching: tuple = ((0.5, 0.5), (0.5, 0.5))
    t1_rate: float = 0.0
    ground_dephasing_rate: float = 0.0
    laser_dephasing_linear: float = 0.0
    laser_dephasing_quadratic: float = 0.0

    def __post_init__(self):
        problems = []
        for attr in ("radiative_rate", "t1_rate", "ground_dephasing_rate",
                     "laser_dephasing_linear", "laser_dephasing_quadratic"):
            if getattr(self, attr) < 0:
                problems.append(f"{attr} must be non-negative")
        b = np.asarray(self.branching, dtype=float)
        if b.shape != (2, 2):
            problems.append("branching must be 2x2 (excited by ground)")
        else:
            if np.any(b < 0):
                problems.append("branching weights must be non-negative")
            if not np.allclose(b.sum(axis=1), 1.0, atol=1e-12):
                problems.append("branching weights must sum to 1 for each excited state")
            object.__setattr__(self, "branching", tuple(map(tuple, b)))
        if problems:
            raise ValidationError("invalid dissipator set: " + "; ".join(problems),
                                  problems)

    def laser_dephasing_rate(self, rabi: float) -> float:
        """gamma(t) evaluated at the instantaneous Rabi rate."""
        return (self.laser_dephasing_linear * rabi
                + self.laser_dephasing_quadratic * rabi * rabi)

    def jump_operators(self, rabi: float = 0.0) -> list[np.ndarray]:
        ops = []
        b = np.asarray(self.branching)
        if self.radiative_rate > 0:
            for e in (EXCITED_LOWER, EXCITED_UPPER):
                for g in (GROUND_DOWN, GROUND_UP):
                    w = self.radiative_rate * b[e - 2, g]
                    if w > 0:
                        c = np.zeros((_DIM, _DIM), dtype=complex)
                        c[g, e] = math.sqrt(w)
                        ops.append(c)
        if self.t1_rate > 0:
            for src, dst in ((GROUND_UP, GROUND_DOWN), (GROUND_DOWN, GROUND_UP)):
                c = np.zeros((_DIM, _DIM), dtype=complex)
                c[dst, src] = math.sqrt(self.t1_rate / 2.0)
                ops.append(c)
        if self.ground_dephasing_rate > 0:
            c = np.zeros((_DIM, _DIM), dtype=complex)
            c[GROUND_DOWN, GROUND_DOWN] = math.sqrt(self.ground_dephasing_rate / 2.0)
            c[GROUND_UP, GROUND_UP] = -math.sqrt(self.ground_dephasing_rate / 2.0)
            ops.append(c)
        gamma = self.laser_dephasing_rate(rabi)
        if gamma > 0:
            c = np.zeros((_DIM, _DIM), dtype=complex)
            c[EXCITED_LOWER, EXCITED_LOWER] = math.sqrt(gamma)
            c[EXCITED_UPPER, EXCITED_UPPER] = math.sqrt(gamma)
            ops.append(c)
        return ops


def _excited_projector_superop() -> np.ndarray:
    pe = np.zeros((_DIM, _DIM))
    pe[EXCITED_LOWER, EXCITED_LOWER] = 1.0
    pe[EXCITED_UPPER, EXCITED_UPPER] = 1.0
    eye = np.eye(_DIM)
    return (np.kron(pe, pe) - 0.5 * np.kron(pe, eye) - 0.5 * np.kron(eye, pe)).astype(complex)


# ---------------------------------------------------------------------------
# generators


def lindblad_rhs(rho: np.ndarray, hamiltonian: np.ndarray,
                 dissipators: DissipatorSet, rabi: float = 0.0) -> np.ndarray:
    """Right-hand side of the master equation at one instant.

    ``rabi`` is the instantaneous Rabi rate feeding the laser-activated
    dephasing channel. The result is traceless and maps Hermitian
    matrices to Hermitian matrices.
    """
    rho = np.asarray(rho, dtype=complex)
    out = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    for c in dissipators.jump_operators(rabi):
        cdc = c.conj().T @ c
        out += c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def dissipator_superoperator(c: np.ndarray) -> np.ndarray:
    """Superoperator of one jump operator in row-major vectorization."""
    c = np.asarray(c, dtype=complex)
    cdc = c.conj().T @ c
    eye = np.eye(c.shape[0])
    return (np.kron(c, c.conj())
            - 0.5 * np.kron(cdc, eye)
            - 0.5 * np.kron(eye, cdc.T))


def hamiltonian_superoperator(h: np.ndarray) -> np.ndarray:
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def liouvillian(hamiltonian: np.ndarray, dissipators: DissipatorSet,
                rabi: float = 0.0) -> np.ndarray:
    """Full 16x16 generator acting on the row-major vectorized state."""
    gen = hamiltonian_superoperator(np.asarray(hamiltonian, dtype=complex))
    for c in dissipators.jump_operators(rabi):
        gen += dissipator_superoperator(c)
    return gen


# ---------------------------------------------------------------------------
# integrators


_METHODS = ("adaptive-rk", "fixed-expm")


@dataclass(frozen=True)
class IntegratorConfig:
    """Numerical controls for time integration.

    ``max_step`` bounds the step of the adaptive method and sets the
    step of the fixed matrix-exponential method (an automatic step is
    chosen when it is infinite). Tolerances must lie in (0, 1e-3].
    """

    method: str = "adaptive-rk"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    min_step: float = 0.0

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValidationError(
                f"unknown integration method {self.method!r}; choose from {_METHODS}"
            )
        for attr in ("rel_tol", "abs_tol"):
            v = getattr(self, attr)
            if not 0.0 < v <= 1e-3:
                raise ValidationError(f"{attr} must lie in (0, 1e-3], got {v}")
        if self.max_step <= 0:
            raise ValidationError("max_step must be positive")
        if self.min_step < 0 or self.min_step >= self.max_step:
            raise ValidationError("min_step must satisfy 0 <= min_step < max_step")


@dataclass
class EvolutionResult:
    times: np.ndarray
    states: list
    final: DensityMatrix


def _rho_in(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return np.asarray(rho.matrix, dtype=complex)
    return np.asarray(rho, dtype=complex)


def integrate_master(rho0, hamiltonian, dissipators: DissipatorSet,
                     config: IntegratorConfig, t_span, t_eval=None,
                     rabi=None) -> EvolutionResult:
    """Integrate the master equation over ``t_span``.

    Args:
        rho0: initial state, array or :class:`DensityMatrix`.
        hamiltonian: constant (4, 4) array or a callable ``h(t)``.
        dissipators: channel rates.
        config: integration controls.
        t_span: pair (t0, t1), t1 > t0.
        t_eval: optional increasing sample times inside the span.
        rabi: optional callable giving the Rabi envelope feeding the
            laser dephasing rate (defaults to zero).

    Raises:
        IntegrationFailure: the step size underflowed; the exception
            carries the last successfully reached time.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 <= t0:
        raise ValidationError(f"t_span must be increasing, got {t_span}")
    rho = _rho_in(rho0)
    h_func = hamiltonian if callable(hamiltonian) else (lambda t: hamiltonian)
    rabi_func = rabi if rabi is not None else (lambda t: 0.0)

    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(t_eval) <= 0) or t_eval[0] < t0 or t_eval[-1] > t1:
            raise ValidationError("t_eval must be increasing and inside t_span")

    if config.method == "fixed-expm":
        times, states = _integrate_expm(rho, h_func, dissipators, rabi_func,
                                        config, t0, t1, t_eval)
    else:
        times, states = _integrate_adaptive(rho, h_func, dissipators, rabi_func,
                                            config, t0, t1, t_eval)
    final = DensityMatrix(states[-1], times[-1])
    return EvolutionResult(np.asarray(times), states, final)


def _integrate_adaptive(rho, h_func, dissipators, rabi_func, config, t0, t1, t_eval):
    def rhs(t, y):
        return lindblad_rhs(y.reshape(_DIM, _DIM), h_func(t), dissipators,
                            rabi_func(t)).ravel()

    kwargs = {}
    if math.isfinite(config.max_step):
        kwargs["max_step"] = config.max_step
    sol = solve_ivp(rhs, (t0, t1), rho.ravel(), method="DOP853",
                    rtol=config.rel_tol, atol=config.abs_tol,
                    t_eval=t_eval, dense_output=False, **kwargs)
    if not sol.success:
        last = float(sol.t[-1]) if sol.t.size else t0
        raise IntegrationFailure(f"adaptive integration failed: {sol.message}", last)
    if config.min_step > 0 and sol.t.size > 1:
        steps = np.diff(sol.t)
        if steps.size and steps.min() < config.min_step:
            where = float(sol.t[int(np.argmin(steps))])
            raise IntegrationFailure(
                f"step size fell below min_step={config.min_step:.3e} s", where)
    times = sol.t
    states = [sol.y[:, k].reshape(_DIM, _DIM) for k in range(sol.y.shape[1])]
    return times, states


def _integrate_expm(rho, h_func, dissipators, rabi_func, config, t0, t1, t_eval):
    span = t1 - t0
    step = config.max_step if math.isfinite(config.max_step) else span / 1024.0
    n = max(1, int(math.ceil(span / step)))
    h = span / n
    sample = list(t_eval) if t_eval is not None else [t1]
    times, states = [], []
    vec = rho.ravel().copy()
    next_sample = 0
    t = t0
    for k in range(n):
        tm = t0 + (k + 0.5) * h
        om = float(rabi_func(tm))
        gen = liouvillian(h_func(tm), dissipators, om)
        vec = expm(gen * h) @ vec
        t = t0 + (k + 1) * h
        while next_sample < len(sample) and sample[next_sample] <= t + 1e-15 * span:
            times.append(sample[next_sample])
            states.append(vec.reshape(_DIM, _DIM).copy())
            next_sample += 1
    if not times or times[-1] < t1:
        times.append(t1)
        states.append(vec.reshape(_DIM, _DIM))
    return np.asarray(times), states


# ---------------------------------------------------------------------------
# pulse windows and silences


def pulse_liouvillian_parts(levels: LevelScheme, pulse: PulseSpec,
                            dissipators: DissipatorSet,
                            spin_detuning: float = 0.0):
    """Split the generator into constant, drive, and dephasing parts.

    During a pulse window the generator is

        L(t) = L_const + Omega_R(t) * L_drive + gamma(t) * L_deph

    which lets propagators reuse three precomputed matrices.
    """
    h0 = np.diag(levels.diagonal(spin_detuning)).astype(complex)
    l_const = liouvillian(h0, dissipators, rabi=0.0)
    w = np.asarray(pulse.coupling_weights, dtype=complex)
    k = np.zeros((_DIM, _DIM), dtype=complex)
    for g in (GROUND_DOWN, GROUND_UP):
        for e in (EXCITED_LOWER, EXCITED_UPPER):
            k[g, e] = -0.5 * w[g, e - 2]
            k[e, g] = np.conj(k[g, e])
    l_drive = hamiltonian_superoperator(k)
    l_deph = _excited_projector_superop()
    return l_const, l_drive, l_deph


def pulse_window_propagator(levels: LevelScheme, pulse: PulseSpec,
                            dissipators: DissipatorSet,
                            config: IntegratorConfig | None = None,
                            spin_detuning: float = 0.0,
                            expm_steps: int = 1024) -> np.ndarray:
    """Superoperator advancing the state across one pulse window.

    The window spans the pulse support (five FWHM on each side for
    shaped pulses). The default method steps the matrix exponential of
    the midpoint generator on a fixed grid, which resolves the optical
    phases exactly and converges quadratically in the envelope; the
    adaptive method integrates the 16x16 propagator equation instead.
    """
    config = config or IntegratorConfig(method="fixed-expm")
    t0, t1 = pulse.window()
    l_const, l_drive, l_deph = pulse_liouvillian_parts(
        levels, pulse, dissipators, spin_detuning)

    def generator(t):
        om = float(envelope_value(pulse, t))
        gamma = dissipators.laser_dephasing_rate(om)
        return l_const + om * l_drive + gamma * l_deph

    if config.method == "fixed-expm":
        n = expm_steps
        if math.isfinite(config.max_step):
            n = max(n, int(math.ceil((t1 - t0) / config.max_step)))
        h = (t1 - t0) / n
        w = np.eye(16, dtype=complex)
        for k in range(n):
            tm = t0 + (k + 0.5) * h
            w = expm(generator(tm) * h) @ w
        return w

    # adaptive method on the propagator equation dW/dt = L(t) W
    max_step = min(config.max_step, pulse.duration / 50.0)

    def rhs(t, y):
        return (generator(t) @ y.reshape(16, 16)).ravel()

    sol = solve_ivp(rhs, (t0, t1), np.eye(16, dtype=complex).ravel(),
                    method="DOP853", rtol=config.rel_tol, atol=config.abs_tol,
                    max_step=max_step)
    if not sol.success:
        last = float(sol.t[-1]) if sol.t.size else t0
        raise IntegrationFailure(f"pulse window integration failed: {sol.message}",
                                 last)
    return sol.y[:, -1].reshape(16, 16)


class SilencePropagator:
    """Exact evolution between pulses, where the drive is off.

    With no drive the generator is constant and decouples: populations
    obey a 4x4 rate equation, and every coherence evolves independently
    with a complex rate (phase plus damping). Both facts are checked
    against the assembled generator at construction time.

    The spin-up level may carry a per-donor Overhauser detuning; it
    enters only through the phase of coherences involving that level,
    with sensitivity recorded in :attr:`detuning_sign`.
    """

    def __init__(self, levels: LevelScheme, dissipators: DissipatorSet):
        h0 = np.diag(levels.diagonal()).astype(complex)
        gen = liouvillian(h0, dissipators, rabi=0.0)

        pop_idx = np.diag(_IDX)
        off_mask = np.ones(16, dtype=bool)
        off_mask[pop_idx] = False

        self.pop_generator = np.real(gen[np.ix_(pop_idx, pop_idx)]).copy()

        # structural checks: populations feed only populations, each
        # coherence only itself
        resid = np.max(np.abs(gen[np.ix_(pop_idx, np.where(off_mask)[0])]))
        off_rows = gen[off_mask][:, :]
        off_diag = np.zeros((16, 16), dtype=complex)
        off_ids = np.where(off_mask)[0]
        for row, flat in enumerate(off_ids):
            off_diag[flat, flat] = off_rows[row, flat]
        resid = max(resid, float(np.max(np.abs(
            off_rows - off_diag[off_ids, :]))))
        scale = max(1.0, float(np.max(np.abs(gen))))
        if resid > 1e-12 * scale:
            raise NumericsError(
                "silence generator is not element-diagonal; integrate instead")

        self.coherence_rate = np.zeros((_DIM, _DIM), dtype=complex)
        for i in range(_DIM):
            for j in range(_DIM):
                if i != j:
                    flat = _IDX[i, j]
                    self.coherence_rate[i, j] = gen[flat, flat]

        # phase sensitivity to a shift of the spin-up level:
        # d(rate_ij)/d(detuning) = -i (delta_{i,up} - delta_{j,up})
        sign = np.zeros((_DIM, _DIM))
        sign[GROUND_UP, :] -= 1.0
        sign[:, GROUND_UP] += 1.0
        np.fill_diagonal(sign, 0.0)
        self.detuning_sign = 1j * sign  # multiply by detuning, add to rate

        self._pop_cache: dict[float, np.ndarray] = {}

    def population_matrix(self, dt: float) -> np.ndarray:
        got = self._pop_cache.get(dt)
        if got is None:
            got = expm(self.pop_generator * dt)
            self._pop_cache[dt] = got
        return got

    def coherence_factors(self, dt: float, detuning: float = 0.0) -> np.ndarray:
        rate = self.coherence_rate + detuning * self.detuning_sign
        fac = np.exp(rate * dt)
        np.fill_diagonal(fac, 0.0)
        return fac

    def propagate(self, rho: np.ndarray, dt: float,
                  detuning: float = 0.0) -> np.ndarray:
        """Advance a state across a silent gap of length ``dt``."""
        if dt < 0:
            raise ValidationError(f"silence duration must be non-negative, got {dt}")
        if dt == 0:
            return np.array(rho, dtype=complex)
        rho = np.asarray(rho, dtype=complex)
        out = rho * self.coherence_factors(dt, detuning)
        pops = self.population_matrix(dt) @ np.real(np.diag(rho))
        out[np.arange(_DIM), np.arange(_DIM)] = pops
        return out


def evolve(rho0, levels: LevelScheme, pulses, dissipators: DissipatorSet,
           config: IntegratorConfig | None = None, t_span=(0.0, 0.0),
           t_eval=None, spin_detuning: float = 0.0) -> EvolutionResult:
    """Evolve a state through a train of pulses and the gaps between them.

    Pulse windows are integrated numerically with the configured
    method; the silent gaps between windows are advanced with the exact
    constant-generator propagator. Trajectory samples requested inside
    a silent gap are evaluated analytically.

    Args:
        rho0: initial state at ``t_span[0]``.
        levels: rotating-frame diagonal.
        pulses: iterable of :class:`PulseSpec` whose windows must lie
            inside the span and must not overlap.
        dissipators: channel rates.
        config: integration controls (adaptive RK by default).
        t_span: (t0, t1) with t1 > t0.
        t_eval: optional increasing sample times.
        spin_detuning: frozen Overhauser shift of the spin-up level.

    Returns:
        :class:`EvolutionResult` with sampled times, states, and the
        final tagged state.
    """
    config = config or IntegratorConfig()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 <= t0:
        raise ValidationError(f"t_span must be increasing, got {t_span}")

    pulses = sorted(pulses, key=lambda p: p.arrival_time)
    windows = []
    for p in pulses:
        w0, w1 = p.window()
        if w0 < t0 - 1e-18 or w1 > t1 + 1e-18:
            raise ValidationError(
                f"pulse window [{w0:.3e}, {w1:.3e}] s lies outside the span")
        if windows and w0 < windows[-1][1]:
            raise ValidationError("pulse windows overlap; merge pulses instead")
        windows.append((w0, w1, p))

    silence = SilencePropagator(levels, dissipators)
    samples = np.asarray(t_eval, dtype=float) if t_eval is not None else np.array([t1])
    if np.any(np.diff(samples) <= 0) or samples[0] < t0 or samples[-1] > t1:
        raise ValidationError("t_eval must be increasing and inside t_span")

    rho = _rho_in(rho0)
    out_t, out_s = [], []
    cursor = t0
    sample_pos = 0

    def silent_advance(upto):
        nonlocal rho, cursor, sample_pos
        while sample_pos < len(samples) and samples[sample_pos] <= upto + 1e-18:
            ts = samples[sample_pos]
            out_t.append(ts)
            out_s.append(silence.propagate(rho, ts - cursor, spin_detuning))
            sample_pos += 1
        rho = silence.propagate(rho, upto - cursor, spin_detuning)
        cursor = upto

    for w0, w1, pulse in windows:
        if w0 > cursor:
            silent_advance(w0)
        inner = samples[(samples > cursor) & (samples <= w1)]
        h_func = lambda t, _p=pulse: build_hamiltonian(levels, [_p], t, spin_detuning)
        rabi_func = lambda t, _p=pulse: float(envelope_value(_p, t))
        cfg = config
        if config.method == "adaptive-rk":
            cap = min(config.max_step, pulse.duration / 50.0)
            cfg = IntegratorConfig(method=config.method, rel_tol=config.rel_tol,
                                   abs_tol=config.abs_tol, max_step=cap,
                                   min_step=config.min_step)
        res = integrate_master(rho, h_func, dissipators, cfg, (cursor, w1),
                               t_eval=inner if inner.size else None,
                               rabi=rabi_func)
        for ts, st in zip(res.times, res.states):
            if inner.size and ts in inner:
                out_t.append(float(ts))
                out_s.append(st)
        sample_pos += int(inner.size)
        rho = res.final.matrix
        cursor = w1

    if cursor < t1 or sample_pos < len(samples):
        silent_advance(t1)

    if not out_t or out_t[-1] < t1:
        out_t.append(t1)
        out_s.append(rho)
    return EvolutionResult(np.asarray(out_t), out_s, DensityMatrix(rho, t1))


# ---------------------------------------------------------------------------
# relaxation phenomenology


def t1_rate_model(field: float, reference_time: float = 0.1,
                  reference_field: float = 2.25,
                  exponent: float = 3.5) -> float:
    """Ground-spin relaxation rate with a power-law field dependence.

    1/T1(B) = (1/reference_time) * (B / reference_field) ** exponent,
    anchored by default at 0.1 s for 2.25 T.
    """
    if field < 0:
        raise ValidationError(f"field must be non-negative, got {field} T")
    if reference_time <= 0 or reference_field <= 0:
        raise ValidationError("reference time and field must be positive")
    return (field / reference_field) ** exponent / reference_time
