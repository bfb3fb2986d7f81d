from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from penalized.errors import InvalidParameter


@dataclass(frozen=True)
class Segment:
    """One deterministic piece of a PDMP path: mode ``mode`` on [t_enter, t_exit)."""

    mode: int
    t_enter: float
    x_enter: np.ndarray
    t_exit: float

    @property
    def duration(self) -> float:
        return self.t_exit - self.t_enter


@dataclass(frozen=True)
class Trajectory:
    """A simulated path.

    Discrete paths keep X_0..X_n in ``states`` (Python numbers, exact when the
    start was exact). PDMP paths keep their segments and evaluate densely by
    flowing from the segment entry point.
    """

    kind: str
    times: np.ndarray
    states: List[Any]
    segments: Tuple[Segment, ...] = ()
    model: Optional[Any] = None

    def __len__(self) -> int:
        return len(self.states)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def state_at(self, t: float):
        if self.kind == "discrete":
            return self.states[int(t)]
        if not 0 <= t <= self.horizon:
            raise InvalidParameter(f"time {t} outside [0, {self.horizon}]")
        for segment in self.segments:
            if t <= segment.t_exit:
                x = self.model.flow(segment.x_enter[None, :], np.array([segment.mode]), np.array([t - segment.t_enter]))[0]
                return np.append(x, segment.mode)
        raise InvalidParameter(f"time {t} not covered")

    def segment_integrals(self, penalty) -> np.ndarray:
        """∫ρ over every segment (PDMP only)."""
        from penalized.process.pdmp import integrate_rho

        x = np.array([s.x_enter for s in self.segments])
        modes = np.array([s.mode for s in self.segments])
        durations = np.array([s.duration for s in self.segments])
        return integrate_rho(self.model, penalty, x, modes, durations)

    def to_frame(self, penalty=None) -> pd.DataFrame:
        """Rows (time, state components, mode, cumulative log-weight)."""
        if self.kind == "discrete":
            frame = pd.DataFrame({"time": self.times, "x": np.asarray(self.states, dtype=float), "mode": ""})
            if penalty is not None:
                log_p = penalty.log_survival(frame["x"].to_numpy())
                frame["log_weight"] = np.concatenate([[0.0], np.cumsum(log_p[:-1])])
            return frame

        rows = np.array([np.append(s.x_enter, s.mode) for s in self.segments] + [self.states[-1]])
        columns = {"time": self.times}
        for i in range(rows.shape[1] - 1):
            columns[f"x{i + 1}"] = rows[:, i]
        columns["mode"] = rows[:, -1].astype(int)
        frame = pd.DataFrame(columns)
        if penalty is not None:
            frame["log_weight"] = np.concatenate([[0.0], -np.cumsum(self.segment_integrals(penalty))])
        return frame

    def to_csv(self, path: Union[str, Path], penalty=None) -> None:
        self.to_frame(penalty).to_csv(path, index=False, float_format="%.17g")
