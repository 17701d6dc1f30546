"""Canonical run configurations for each figure panel id.

Every curve is an ordinary :class:`RunConfig`, so ``figure`` output is the
same as running ``evolve`` on each config in turn. Surfaces are stored as
one curve per slice of the swept parameter.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .esd import TimeGrid
from .model import SystemParams

__all__ = ["Figure", "FIGURES", "get_figure"]

GRID = TimeGrid(0.0, 100.0, 4001)  # 40 samples per unit tau


@dataclass(frozen=True)
class Figure:
    id: str
    initial: str
    kind: str  # "curves" or "surface"
    curves: tuple  # (label, RunConfig) pairs
    axis: str | None = None

    def manifest(self) -> dict:
        return {
            "id": self.id,
            "initial": self.initial,
            "kind": self.kind,
            "axis": self.axis,
            "curves": [{"label": label, "file": f"{self.id}_{k:02d}.csv", "config": cfg.to_dict()}
                       for k, (label, cfg) in enumerate(self.curves)],
        }


def _cfg(initial, lambda2=0.0, detuning=0.0, nbar=100.0, grid=GRID):
    return RunConfig(SystemParams(lambda2=float(lambda2), detuning=float(detuning),
                                  nbar=float(nbar)), initial, grid)


def _label(**kw):
    return ",".join(f"{k}={v:g}" for k, v in kw.items())


def _nbar_panel(fid, initial, nbars=(20, 50, 100)):
    return Figure(fid, initial, "curves",
                  tuple((_label(nbar=n), _cfg(initial, nbar=n)) for n in nbars))


def _pairs_panel(fid, initial, pairs, nbar=100):
    return Figure(fid, initial, "curves",
                  tuple((_label(lambda2=l2, detuning=d), _cfg(initial, l2, d, nbar)) for l2, d in pairs))


def _surface(fid, initial, axis, values, **fixed):
    curves = []
    for v in values:
        kw = dict(fixed, **{axis: float(v)})
        curves.append((_label(**{axis: float(v)}), _cfg(initial, **kw)))
    return Figure(fid, initial, "surface", tuple(curves), axis)


def _build():
    figs = [
        _nbar_panel("fig2a", "bell_correlated"),
        _pairs_panel("fig2b", "bell_correlated", [(0, 0)]),
        _pairs_panel("fig2c", "bell_correlated", [(0, 1), (0, 3), (0, 5), (0, 7)]),
        _pairs_panel("fig2d", "bell_correlated", [(0, 0), (3, 0), (5, 0), (7, 0)]),
        _pairs_panel("fig3a", "bell_correlated", [(5, 0), (5, 1), (5, 2), (5, -2)]),
        _pairs_panel("fig3b", "bell_correlated", [(0, 0), (5, 0), (5, 2), (5, -2)]),
        _nbar_panel("fig4a", "bell_anticorrelated"),
        _pairs_panel("fig4b", "bell_anticorrelated", [(0, 0)]),
        _pairs_panel("fig4c", "bell_anticorrelated", [(0, 0), (0, 1), (0, 3), (0, 5)]),
        _pairs_panel("fig4d", "bell_anticorrelated", [(0, 0), (1, 0), (3, 0), (5, 0)]),
        _pairs_panel("fig5a", "bell_anticorrelated", [(3, 0), (3, 2), (3, 4), (5, 4)]),
        _pairs_panel("fig5b", "bell_anticorrelated", [(0, 0), (3, 0), (3, 2), (3, 4)]),
        _nbar_panel("fig6a", "w_like"),
        _pairs_panel("fig6b", "w_like", [(0, 0), (1, 0), (3, 0), (5, 0)]),
        _pairs_panel("fig6c", "w_like", [(0, 0), (0, 1), (0, 3), (0, 5)]),
        _pairs_panel("fig6d", "w_like", [(1, 0), (5, 0), (1, 5), (5, 5)]),
        _nbar_panel("fig7a", "w_like"),
        _pairs_panel("fig7b", "w_like", [(0, 0), (5, 0), (0, 5), (5, 5)]),
        _surface("fig8", "w_like", "detuning", np.linspace(-5, 5, 21), lambda2=2.0),
        _nbar_panel("fig9a", "excited_excited"),
        _nbar_panel("fig9b", "excited_excited"),
        _pairs_panel("fig9c", "excited_excited", [(0, 0), (5, 0), (0, 5), (5, 5)]),
        _pairs_panel("fig9d", "excited_excited", [(0, 0), (5, 0), (0, 5), (5, 5)]),
        _surface("fig10", "excited_excited", "lambda2", np.linspace(0, 10, 21), detuning=5.0),
        Figure("fig11a", "uniform_L", "curves", (
            (_label(lambda2=0, detuning=0, nbar=20), _cfg("uniform_L", 0, 0, 20)),
            (_label(lambda2=0, detuning=0, nbar=100), _cfg("uniform_L", 0, 0, 100)),
            (_label(lambda2=0, detuning=2, nbar=100), _cfg("uniform_L", 0, 2, 100)),
            (_label(lambda2=0.2, detuning=0, nbar=100), _cfg("uniform_L", 0.2, 0, 100)),
        )),
        _pairs_panel("fig11b", "uniform_L", [(2, 0), (5, 0), (5, 2), (5, 5)]),
        _nbar_panel("fig11c", "uniform_L"),
        _pairs_panel("fig11d", "uniform_L", [(0, 0), (5, 0), (0, 2), (5, 3)]),
        _surface("fig12a", "uniform_L", "lambda2", np.linspace(0, 5, 21), detuning=2.0),
        _surface("fig12b", "uniform_L", "detuning", np.linspace(-5, 5, 21), lambda2=5.0),
    ]
    return {f.id: f for f in figs}


FIGURES = _build()


def get_figure(fid: str) -> Figure:
    try:
        return FIGURES[fid]
    except KeyError:
        raise KeyError(f"unknown figure {fid!r}; available: {', '.join(FIGURES)}") from None
