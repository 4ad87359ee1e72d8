"""Real-time NMPC controllers: RTI, AS-RTI (levels A-D) and plain SQP.

One controller instance is a strict prepare -> feedback state machine.
The preparation phase predicts the next state, runs the configured inner
iterations on the advanced problem, evaluates the QP data at the
resulting linearization point and caches the condensing matrix phase.
The feedback phase performs a single vector-phase solve for the measured
state and touches no model callbacks (audited through the NLP evaluation
counters).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .mli import (
    MliConfig,
    PreparedLinearization,
    level_a,
    level_b,
    level_c,
    level_d,
    prepare_linearization,
    sqp_solve,
)
from .nlp import Iterate, OcpNlp, eval_kkt
from .qp import QpInfeasibleError, QpSolverError, condense_rhs_and_solve

__all__ = [
    "ControllerConfig",
    "PhaseTimings",
    "CycleLog",
    "AsRtiController",
    "predict_state",
]


@dataclass
class ControllerConfig:
    """Algorithm selection for one closed-loop controller.

    ``mode`` is one of ``"rti"``, ``"as-rti"`` (with an :class:`MliConfig`
    describing the inner iterations) or ``"sqp"`` (``inner_iterations``
    SQP steps in the feedback phase, no prepared work).
    """

    name: str
    mode: str
    mli: Optional[MliConfig] = None
    inner_iterations: int = 1
    prediction: str = "internal"
    predictor: Optional[Callable] = None
    sqp_tol: float = 1e-8
    qp_max_iter: int = 200

    def __post_init__(self):
        if self.mode not in ("rti", "as-rti", "sqp"):
            raise ValueError(f"unknown controller mode {self.mode!r}")
        if self.mode == "as-rti" and self.mli is None:
            raise ValueError("as-rti mode requires an MliConfig")
        if self.inner_iterations < 1:
            raise ValueError("inner_iterations must be >= 1")
        if self.prediction not in ("internal", "external"):
            raise ValueError(f"unknown prediction strategy {self.prediction!r}")
        if self.prediction == "external" and self.predictor is None:
            raise ValueError("external prediction requires a predictor callback")

    @classmethod
    def from_name(cls, name: str, **kwargs) -> "ControllerConfig":
        """Parse labels like ``rti``, ``as-rti-b-2``, ``sqp-100``."""
        label = name.strip().lower()
        if label == "rti":
            return cls(name=label, mode="rti", **kwargs)
        if label.startswith("as-rti-"):
            rest = label[len("as-rti-") :]
            parts = rest.split("-")
            level = parts[0]
            n = int(parts[1]) if len(parts) > 1 else 1
            return cls(name=label, mode="as-rti", mli=MliConfig(level, n), **kwargs)
        if label.startswith("sqp"):
            n = int(label.split("-")[1]) if "-" in label else 1
            return cls(name=label, mode="sqp", inner_iterations=n, **kwargs)
        raise ValueError(f"cannot parse controller name {name!r}")


@dataclass
class PhaseTimings:
    """Wall-clock seconds spent in each phase of one cycle."""

    preparation_s: float
    feedback_s: float


@dataclass
class CycleLog:
    """Plain per-cycle record for the benchmark harness."""

    cycle: int
    preparation_s: float
    feedback_s: float
    fallback: bool
    feedback_evals: int
    inner_trace: Optional[list] = None
    feedback_residuals: Optional[tuple] = None


def predict_state(nlp: OcpNlp, strategy, x, z: Iterate, predictor=None):
    """Predict the state one sampling interval ahead.

    The internal strategy simulates the first-interval discrete dynamics
    at the iterate's first-stage control; the external strategy delegates
    to a user callback ``predictor(x, z)``.
    """
    if strategy == "internal":
        u0 = nlp.first_control(z.w)
        nlp.counters["dynamics"] += 1
        return np.asarray(
            nlp.spec.dynamics[0].propagate(np.asarray(x, dtype=float), u0, sensitivities=False)[0],
            dtype=float,
        )
    if strategy == "external":
        return np.asarray(predictor(np.asarray(x, dtype=float), z), dtype=float)
    raise ValueError(f"unknown prediction strategy {strategy!r}")


class AsRtiController:
    """Closed-loop controller executing the prepare/feedback cycle.

    On the first ``prepare`` call the iterate is cold-started (states
    interpolated from the measured state to the origin, zero controls and
    multipliers) and one extra linearization is prepared so that the
    inexact levels have a frozen reference available; the first cycle
    predicts with the measured state itself.
    """

    def __init__(self, nlp: OcpNlp, config: ControllerConfig, collect_traces=False):
        self.nlp = nlp
        self.config = config
        self.collect_traces = collect_traces
        self.fallbacks = 0
        self.cycle_logs: List[CycleLog] = []
        self._z: Optional[Iterate] = None
        self._prep: Optional[PreparedLinearization] = None
        self._phase = "prepare"
        self._warm = None
        self._cycle = 0
        self._pending_prep_s = 0.0
        self._pending_trace = None
        self._pending_fallback = False

    @property
    def iterate(self) -> Iterate:
        """Most recent output iterate."""
        return self._z

    def prepare(self, x) -> float:
        """Run the preparation phase for the current measured state."""
        if self._phase != "prepare":
            raise RuntimeError("prepare called twice without an intervening feedback")
        x = np.asarray(x, dtype=float)
        trace = [] if self.collect_traces else None
        fallback = False
        t0 = time.perf_counter()
        if self.config.mode == "sqp":
            if self._z is None:
                self._z = self.nlp.cold_start(x)
            elapsed = time.perf_counter() - t0
        else:
            if self._z is None:
                self._z = self.nlp.cold_start(x)
                self._prep = prepare_linearization(self.nlp, self._z, x)
                x_pred = x.copy()
            else:
                x_pred = predict_state(
                    self.nlp, self.config.prediction, x, self._z, self.config.predictor
                )
            z_lin = self._z
            mli = self.config.mli
            try:
                if self.config.mode == "rti":
                    pass
                elif mli.level == "A":
                    z_lin = level_a(
                        self._prep, x_pred, warm_active=self._warm, trace_nlp=self.nlp, trace=trace
                    )
                elif mli.level == "B":
                    z_lin = level_b(
                        self._prep, self.nlp, x_pred, self._z, mli.inner_iterations,
                        warm_active=self._warm, trace=trace,
                    )
                elif mli.level == "C":
                    z_lin = level_c(
                        self._prep, self.nlp, x_pred, self._z, mli.inner_iterations,
                        warm_active=self._warm, trace=trace,
                    )
                else:
                    z_lin = level_d(
                        self.nlp, x_pred, self._z, mli.inner_iterations,
                        warm_active=self._warm, trace=trace,
                    )
            except (QpInfeasibleError, QpSolverError):
                z_lin = self._z
                fallback = True
                self.fallbacks += 1
            self._prep = prepare_linearization(self.nlp, z_lin, x_pred)
            elapsed = time.perf_counter() - t0
        self._phase = "feedback"
        self._pending_prep_s = elapsed
        self._pending_trace = trace
        self._pending_fallback = fallback
        return elapsed

    def feedback(self, x_next) -> Tuple[np.ndarray, PhaseTimings]:
        """Compute the control for the newly measured state.

        For RTI/AS-RTI this is a single vector-phase solve of the
        prepared QP; infeasibility is escalated to the caller.  In SQP
        mode the configured number of full SQP iterations runs here
        instead and the preparation phase is empty.
        """
        if self._phase != "feedback":
            raise RuntimeError("feedback called without a completed prepare")
        x_next = np.asarray(x_next, dtype=float)
        counters0 = sum(self.nlp.counters.values())
        t0 = time.perf_counter()
        if self.config.mode == "sqp":
            res = sqp_solve(
                self.nlp, x_next, self._z,
                tol=self.config.sqp_tol, max_iter=self.config.inner_iterations,
            )
            z_new = res.iterate
        else:
            sol = condense_rhs_and_solve(
                self._prep.lhs, self._prep.data, x_next,
                warm_active=self._warm, max_iter=self.config.qp_max_iter,
            )
            self._warm = sol.active_set
            z_new = Iterate(self._prep.ref.w + sol.dw, sol.lam.copy(), sol.mu.copy())
        elapsed = time.perf_counter() - t0
        evals = sum(self.nlp.counters.values()) - counters0

        fb_res = None
        if self.collect_traces:
            kkt = eval_kkt(self.nlp, z_new, x_next)
            fb_res = (max(kkt.eq, kkt.ineq), kkt.stat)
        self._z = z_new
        self._phase = "prepare"
        self.cycle_logs.append(
            CycleLog(
                cycle=self._cycle,
                preparation_s=self._pending_prep_s,
                feedback_s=elapsed,
                fallback=self._pending_fallback,
                feedback_evals=evals,
                inner_trace=self._pending_trace,
                feedback_residuals=fb_res,
            )
        )
        self._cycle += 1
        return self.nlp.first_control(z_new.w), PhaseTimings(self._pending_prep_s, elapsed)
