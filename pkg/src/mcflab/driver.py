"""Checkpointed flow runs: expansion, centering and mode recording."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PinchDetected
from .modes import ConformalTransform, centering
from .normal_form import linear_mode_coefficients, quad_coeff_matrix
from .rmcf import GraphState, SolverConfig, advance_to, curvature_diagnostics, expand_domain


@dataclass
class RunResult:
    """Everything a checkpointed run produced."""

    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    times: list = field(default_factory=list)
    quad_mats: list = field(default_factory=list)
    const_coeffs: list = field(default_factory=list)
    y_coeffs: list = field(default_factory=list)
    transforms: list = field(default_factory=list)  # (t, ConformalTransform)
    status: str = "completed"
    pinch_state: GraphState | None = None
    final: GraphState | None = None

    @property
    def mode_series(self):
        return np.asarray(self.times), self.quad_mats

    def transform_totals(self):
        """Accumulated unrescaled-frame displacement of the singular center.

        Each dilation lam at rescaled time t moves the presumed singular
        time by e^{-t}(1/lam^2 - 1); each axis translation d moves the
        center by e^{-t/2} d.
        """
        dx = None
        dT = 0.0
        size = 0.0
        for t, tr in self.transforms:
            size += tr.size()
            if dx is None:
                dx = np.zeros_like(np.asarray(tr.d, dtype=float))
            dx = dx + math.exp(-t / 2.0) * np.asarray(tr.d, dtype=float)
            dT += math.exp(-t) * (1.0 / tr.lam**2 - 1.0)
        if dx is None:
            dx = np.zeros(1)
        return {"dx": dx, "dT": dT, "total_size": size}


def run_flow(
    state: GraphState,
    config: SolverConfig,
    t_end: float,
    checkpoint: float = 1.0,
    center: tuple = (),
    keep_states: bool = False,
    state_stride: int = 1,
    diagnostics: bool = True,
    record_modes: bool = True,
    on_checkpoint=None,
) -> RunResult:
    """Advance an RMCF state to t_end with unit-cadence bookkeeping.

    At every checkpoint the domain is regridded to track K*sqrt(t) when
    needed, diagnostics and neutral-mode projections are recorded, and the
    centering map (``center`` names the killed mode families, e.g.
    ("const",) or ("const", "axis")) is applied.  A pinch stops the run and
    marks the result.
    """
    res = RunResult()
    ncheck = 0

    def record(s):
        res.times.append(s.t)
        if record_modes:
            res.quad_mats.append(quad_coeff_matrix(s).M)
            c, b = linear_mode_coefficients(s)
            res.const_coeffs.append(c)
            res.y_coeffs.append(b)
        if diagnostics:
            res.diagnostics.append(curvature_diagnostics(s, eps0=config.eps0))
        if keep_states and (ncheck % state_stride == 0):
            res.states.append(s.copy())
        if on_checkpoint is not None:
            on_checkpoint(s, res)

    record(state)
    try:
        while state.t < t_end - 1e-9:
            t_next = min(state.t + checkpoint, t_end)
            needed = config.K * math.sqrt(t_next)
            if needed > state.grid.radius:
                state = expand_domain(state, config, target_radius=needed * config.regrid_headroom)
            state = advance_to(state, t_next, config)
            if center:
                tr, state = centering(state, kill=center)
                if not tr.is_identity():
                    res.transforms.append((state.t, tr))
            ncheck += 1
            record(state)
    except PinchDetected as exc:
        res.status = "pinched"
        res.pinch_state = exc.state
        res.final = exc.state
        return res
    res.final = state
    return res
