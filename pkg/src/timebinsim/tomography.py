"""Fringe fitting and single-qubit state reconstruction.

The interferometer's middle-slot counts versus phase follow
``N(phi) = A * (1 + V * cos(phi + phi0))``.  Fitting a reference scan and a
phase-modulated scan gives the programmed qubit phase as
``phi0_ref - phi0_mod``; together with the bin occupations and the fringe
visibility this fixes the Bloch vector of the emitted time-bin qubit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .core import BlochVector, TimeBinState, validate, write_csv
from .measurement import FringeScan


@dataclass(frozen=True)
class FringeFit:
    amplitude: float
    visibility: float
    phase: float  # fringe offset phi0, wrapped to (-pi, pi]
    amplitude_err: float
    visibility_err: float
    phase_err: float
    phase_defined: bool
    n_points: int


def _fringe_model(phi, amplitude, visibility, phase0):
    return amplitude * (1.0 + visibility * np.cos(phi + phase0))


def _wrap(phi: float) -> float:
    w = float(np.mod(phi + np.pi, 2.0 * np.pi) - np.pi)
    return np.pi if w == -np.pi else w


def fit_fringe(phases, counts=None, *, sigma=None) -> FringeFit:
    """Least-squares fit of ``A * (1 + V cos(phi + phi0))`` to count data.

    Accepts either a :class:`~timebinsim.measurement.FringeScan` or explicit
    (phases, counts) arrays.  Poisson weighting
    (``sigma = sqrt(max(counts, 1))``) is applied unless explicit
    uncertainties are given.  The result is canonicalised to ``V`` in
    ``[0, 1]`` and ``phi0`` in ``(-pi, pi]``.  Perfectly flat data fits a
    fringe of zero visibility with an undefined phase.
    """
    if isinstance(phases, FringeScan):
        if counts is not None:
            raise ValueError("pass either a FringeScan or (phases, counts), not both")
        phases, counts = phases.phases, phases.middle_counts
    phases = np.asarray(phases, float)
    counts = np.asarray(counts, float)
    if phases.shape != counts.shape or phases.ndim != 1:
        raise ValueError("phases and counts must be 1-d arrays of equal length")
    if phases.size < 4:
        raise ValueError("need at least 4 points to fit a fringe")
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")

    amp0 = float(counts.mean())
    if np.ptp(counts) == 0:
        return FringeFit(amplitude=amp0, visibility=0.0, phase=0.0,
                         amplitude_err=0.0, visibility_err=0.0,
                         phase_err=float("nan"), phase_defined=False,
                         n_points=phases.size)

    # Harmonic projections give a robust starting point.
    c1 = 2.0 * float(np.mean(counts * np.cos(phases)))
    s1 = 2.0 * float(np.mean(counts * np.sin(phases)))
    v0 = min(1.0, float(np.hypot(c1, s1)) / amp0) if amp0 > 0 else 0.5
    phi0 = float(np.arctan2(-s1, c1))

    if sigma is None:
        sigma = np.sqrt(np.maximum(counts, 1.0))
    try:
        with warnings.catch_warnings():
            # noiseless inputs make the covariance singular; the errors are
            # then reported as inf, which is the right answer
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(_fringe_model, phases, counts,
                                   p0=[amp0, max(v0, 1e-3), phi0],
                                   sigma=sigma, absolute_sigma=True,
                                   maxfev=20000)
    except RuntimeError as exc:
        raise RuntimeError(f"fringe fit did not converge: {exc}") from exc

    amp, vis, ph = (float(x) for x in popt)
    errs = np.sqrt(np.abs(np.diag(pcov)))
    if amp < 0:  # A and V are only fixed up to a joint sign
        amp, vis = -amp, -vis
    if vis < 0:
        vis = -vis
        ph += np.pi
    vis = min(vis, 1.0)
    ph = _wrap(ph)
    defined = vis > 1e-9
    return FringeFit(amplitude=amp, visibility=vis, phase=ph,
                     amplitude_err=float(errs[0]), visibility_err=float(errs[1]),
                     phase_err=float(errs[2]) if defined else float("nan"),
                     phase_defined=defined, n_points=phases.size)


def qubit_phase(reference: FringeFit, modulated: FringeFit) -> float:
    """Programmed qubit phase from a reference and a modulated fringe fit,
    wrapped to ``(-pi, pi]``."""
    if not (reference.phase_defined and modulated.phase_defined):
        raise ValueError("qubit phase needs two fits with defined fringe phases")
    return _wrap(reference.phase - modulated.phase)


def unwrap_phases(values) -> np.ndarray:
    """Remove 2*pi jumps from a monotonically scanned phase series."""
    return np.unwrap(np.asarray(values, float))


def reconstruct(p_early: float, p_late: float, visibility: float,
                phase: float) -> BlochVector:
    """Bloch vector of the normalised qubit from measured ingredients.

    ``phase`` is the qubit phase (late-bin amplitude phase), so ``phase=0``
    maps to +x and ``phase=pi/2`` to +y.
    """
    if p_early < 0 or p_late < 0:
        raise ValueError("bin occupations must be >= 0")
    total = p_early + p_late
    if total <= 0:
        raise ValueError("cannot reconstruct a state with no photons")
    if total > 1.0 + 1e-6:
        raise ValueError("bin occupations must sum to at most 1")
    if not 0 <= visibility <= 1:
        raise ValueError("visibility must lie in [0, 1]")
    q0 = p_early / total
    q1 = p_late / total
    r = visibility * np.sqrt(q0 * q1)
    vec = BlochVector(x=2.0 * r * np.cos(phase), y=2.0 * r * np.sin(phase),
                      z=q0 - q1)
    validate(vec)
    return vec


def bloch_of_state(state: TimeBinState) -> BlochVector:
    """Bloch vector of a sub-normalised two-bin state, conditioned on a
    photon being present (vacuum weight divided out)."""
    total = state.p_early + state.p_late
    if total <= 0:
        raise ValueError("state has no photonic weight")
    vec = BlochVector(x=2.0 * state.coherence.real / total,
                      y=-2.0 * state.coherence.imag / total,
                      z=(state.p_early - state.p_late) / total)
    validate(vec)
    return vec


def fidelity(measured: BlochVector, target: BlochVector) -> float:
    """Overlap of a (possibly mixed) measured state with a pure target:
    ``F = (1 + m . t) / 2``.  The target must be unit length."""
    if abs(target.norm - 1.0) > 1e-9:
        raise ValueError("fidelity target must be a pure state (unit Bloch vector)")
    return 0.5 * (1.0 + measured.dot(target))


def direction_fidelity(measured: BlochVector, target: BlochVector) -> float:
    """Fidelity between the directions of two Bloch vectors, ignoring their
    lengths.  Useful when depolarisation is understood and only the qubit's
    orientation is under test."""
    return fidelity(measured.normalized(), target.normalized())


def write_states_csv(rows, path) -> None:
    """Per-setpoint reconstruction table.

    Each row is ``(bloch_vector, fidelity, visibility, phase_rad)``; the
    emitted columns are ``x,y,z,fidelity,visibility,phase_rad``.
    """
    flat = [(v.x, v.y, v.z, fid, vis, ph) for v, fid, vis, ph in rows]
    write_csv(path, "x,y,z,fidelity,visibility,phase_rad", flat)
