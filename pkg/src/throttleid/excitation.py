"""Excitation input design: discretized thrust levels, a 4-D
trigonometric excitation spanning the operating envelope, and a fixed
step/ramp family for transient coverage.

The core signal is a unit 4-vector S(t) tracing a dense path on the
3-sphere; biasing it at a thrust level and scaling by an amplitude
yields four decorrelated frequency-modulated engine commands per level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .plant import CommandTrace


@dataclass
class ExcitationConfig:
    e_min: float = 240.0     # [N]
    e_max: float = 800.0     # [N]
    m_levels: int = 8        # number of discrete bias levels
    a_amp: float = 100.0     # excitation amplitude [N]
    duration: float = 30.0   # per-segment duration [s]
    dt: float = 0.01         # [s]
    seed: int = 0            # permutes corpus segment order only

    def __post_init__(self):
        if self.m_levels < 1:
            raise ValueError("m_levels must be >= 1")
        if self.a_amp < 0.0:
            raise ValueError("a_amp must be >= 0")
        if not (0.0 < self.e_min < self.e_max):
            raise ValueError("need 0 < e_min < e_max")
        if self.duration <= 0.0 or self.dt <= 0.0:
            raise ValueError("duration and dt must be positive")


def thrust_levels(cfg: ExcitationConfig) -> np.ndarray:
    """Discrete bias levels E_k = e_min + (k/M)(e_max - e_min), k = 0..M-1.

    Note the top of the range is deliberately not in this list; the
    step/ramp family of the corpus covers e_max.
    """
    k = np.arange(cfg.m_levels, dtype=float)
    return cfg.e_min + (k / cfg.m_levels) * (cfg.e_max - cfg.e_min)


def excitation_basis(t):
    """Unit 4-vector excitation direction at time t [s].

    With r = pi*t, theta = pi*sin(2*sin(2t)), phi = pi*sin(2t):

        S = (cos r cos theta cos phi,
             cos r cos theta sin phi,
             cos r sin theta,
             sin r)

    ||S|| = 1 identically. Scalar t gives shape (4,); an array of
    shape (N,) gives shape (N, 4).
    """
    t = np.asarray(t, dtype=float)
    r = np.pi * t
    phi = np.pi * np.sin(2.0 * t)
    theta = np.pi * np.sin(2.0 * np.sin(2.0 * t))
    cr = np.cos(r)
    ct = np.cos(theta)
    out = np.stack([cr * ct * np.cos(phi),
                    cr * ct * np.sin(phi),
                    cr * np.sin(theta),
                    np.sin(r)], axis=-1)
    return out


def excitation_segment(e_bias: float, cfg: ExcitationConfig) -> CommandTrace:
    """Biased, scaled excitation: clamp(e_bias + a_amp * S(t)), all engines on."""
    if not (cfg.e_min <= e_bias <= cfg.e_max):
        raise ValueError(f"e_bias {e_bias} outside [{cfg.e_min}, {cfg.e_max}]")
    n = int(round(cfg.duration / cfg.dt))
    t = np.arange(n) * cfg.dt
    cmd = np.clip(e_bias + cfg.a_amp * excitation_basis(t), cfg.e_min, cfg.e_max)
    return CommandTrace(dt=cfg.dt, commands=cmd, status=np.ones((n, 4)),
                        name=f"excite_b{e_bias:g}")


def step_stair_trace(levels, hold: float, cfg: ExcitationConfig) -> CommandTrace:
    """Piecewise-constant stair: each level held `hold` seconds on all engines.

    A level of 0 means engines off (status 0); nonzero levels must lie
    in [e_min, e_max].
    """
    levels = np.asarray(levels, dtype=float)
    if levels.size == 0:
        raise ValueError("empty level list")
    ok = (levels == 0.0) | ((levels >= cfg.e_min) & (levels <= cfg.e_max))
    if not ok.all():
        raise ValueError(f"stair levels must be 0 or within [{cfg.e_min}, {cfg.e_max}]")
    n_hold = int(round(hold / cfg.dt))
    cmd = np.repeat(levels, n_hold)[:, None] * np.ones((1, 4))
    status = (cmd > 0.0).astype(float)
    return CommandTrace(dt=cfg.dt, commands=cmd, status=status, name="stair")


def ramp_trace(start: float, end: float, rate: float, cfg: ExcitationConfig) -> CommandTrace:
    """Linear command from start to end at `rate` N/s, then hold at end.

    The trace lasts cfg.duration, or just past the ramp when the ramp
    itself is longer.
    """
    if rate <= 0.0:
        raise ValueError("rate must be > 0")
    for v in (start, end):
        if not (cfg.e_min <= v <= cfg.e_max):
            raise ValueError(f"ramp endpoint {v} outside [{cfg.e_min}, {cfg.e_max}]")
    t_ramp = abs(end - start) / rate
    total = max(cfg.duration, t_ramp + cfg.dt)
    n = int(round(total / cfg.dt))
    t = np.arange(n) * cfg.dt
    sign = 1.0 if end >= start else -1.0
    level = np.clip(start + sign * rate * t, min(start, end), max(start, end))
    cmd = level[:, None] * np.ones((1, 4))
    return CommandTrace(dt=cfg.dt, commands=cmd, status=np.ones((n, 4)), name="ramp")


def _pair_stair(levels, hold: float, cfg: ExcitationConfig,
                engines: tuple = (0, 2)) -> CommandTrace:
    """Stair on one engine pair with the other pair shut down."""
    base = step_stair_trace(levels, hold, cfg)
    cmd = base.commands.copy()
    status = base.status.copy()
    off = [j for j in range(4) if j not in engines]
    cmd[:, off] = 0.0
    status[:, off] = 0.0
    return CommandTrace(dt=cfg.dt, commands=cmd, status=status, name="pair_stair")


def _pair_shutdown(cfg: ExcitationConfig, hold: float = 6.0) -> CommandTrace:
    """Live pair shutdowns and restarts while the other pair keeps
    burning (the engine-count transition of a descent profile)."""
    lo, hi = cfg.e_min, cfg.e_max
    mid = 0.5 * (lo + hi)
    n_hold = int(round(hold / cfg.dt))
    phases = [
        (mid, mid), (mid, 0.0), (mid, mid), (hi, hi), (hi, 0.0),
        (0.0, hi), (lo, lo), (lo, 0.0), (mid, lo),
    ]
    cmd = np.zeros((n_hold * len(phases), 4))
    status = np.zeros_like(cmd)
    for i, (lvl13, lvl24) in enumerate(phases):
        rows = slice(i * n_hold, (i + 1) * n_hold)
        cmd[rows, 0] = cmd[rows, 2] = lvl13
        cmd[rows, 1] = cmd[rows, 3] = lvl24
        status[rows, 0] = status[rows, 2] = 1.0 if lvl13 > 0 else 0.0
        status[rows, 1] = status[rows, 3] = 1.0 if lvl24 > 0 else 0.0
    return CommandTrace(dt=cfg.dt, commands=cmd, status=status, name="pair_shutdown")


def build_corpus(cfg: ExcitationConfig) -> list[CommandTrace]:
    """Training corpus: one excitation segment per bias level plus the
    fixed step/ramp family.

    The family (documented, not randomized) anchors the quasi-static
    operating manifold and the large-step transients that the
    fast-swinging excitation segments underweight:
      - coarse and fine stairs up/down spanning e_min..e_max,
      - full-range rise and fall steps,
      - medium ramps (56 / 112 N/s) and slow near-static ramps (18 N/s),
      - an all-off segment (zero-input fixed point),
      - stairs on one engine pair with the other pair shut down.

    The seed permutes segment order only; contents are deterministic.
    """
    lo, hi = cfg.e_min, cfg.e_max
    grid = lambda f: lo + f * (hi - lo)
    # family hold lengths scale with the configured segment duration so
    # reduced configurations produce proportionally smaller corpora
    scale = cfg.duration / 30.0
    hold = lambda seconds: max(seconds * scale, 4.0 * cfg.dt)
    segments = [excitation_segment(b, cfg) for b in thrust_levels(cfg)]
    hold_levels = [grid(k / 11.0) for k in range(12)]  # 12 levels incl. both ends
    # Long mixed-level stair: anchors the steady operating manifold
    # against the fast-swinging excitation rows and walks the
    # cumulative ejected mass out to powered-descent scale, so the
    # inverse-mass feature is trained over its deployment range.
    endurance_levels = [grid(f) for f in
                        (0.0, 0.25, 0.5, 0.75, 1.0, 0.625, 0.375, 0.125,
                         0.875, 0.0, 0.5, 1.0, 0.25, 0.75, 0.0, 0.375,
                         0.625, 0.875, 0.125, 0.5)]
    family = [
        ("endurance_stair", step_stair_trace(endurance_levels, hold(28.0), cfg)),
        ("hold_ladder", step_stair_trace(hold_levels, hold(8.0), cfg)),
        ("stair_updown", step_stair_trace(
            [lo, grid(0.25), grid(0.5), grid(0.75), hi,
             grid(0.75), grid(0.5), grid(0.25), lo], hold(8.0), cfg)),
        ("stair_fine", step_stair_trace(
            [grid(0.125), grid(0.375), grid(0.625), grid(0.875),
             grid(0.625), grid(0.375), grid(0.125)], hold(8.0), cfg)),
        ("rise_step", step_stair_trace([lo, hi], hold(8.0), cfg)),
        ("fall_step", step_stair_trace([hi, lo], hold(8.0), cfg)),
        ("ramp_up", ramp_trace(lo, hi, 56.0, cfg)),
        ("ramp_down", ramp_trace(hi, lo, 112.0, cfg)),
        ("slow_ramp_up", ramp_trace(lo, hi, 18.0 / max(scale, 0.25), cfg)),
        ("slow_ramp_down", ramp_trace(hi, lo, 18.0 / max(scale, 0.25), cfg)),
        ("step_battery", step_stair_trace(
            [lo, grid(0.5), lo, hi, grid(0.5), hi, lo, grid(0.25),
             grid(0.75), grid(0.25), hi, grid(0.75), lo, grid(0.375),
             grid(0.875), grid(0.375), lo, grid(0.625), hi, lo], hold(4.0), cfg)),
        ("ignition_battery", step_stair_trace(
            [0.0, grid(0.3), 0.0, grid(0.65), 0.0, lo, 0.0, hi,
             0.0, grid(0.5), 0.0, grid(0.8), 0.0, grid(0.15), 0.0,
             grid(0.4)], hold(4.0), cfg)),
        ("all_off", step_stair_trace([0.0], hold(10.0), cfg)),
        ("pair_stair", _pair_stair(
            [grid(0.3), grid(0.5), hi, grid(0.75), lo], hold(8.0), cfg)),
        ("pair_stair_24", _pair_stair(
            [grid(0.5), grid(0.3), grid(0.75), lo], hold(8.0), cfg, engines=(1, 3))),
        ("pair_shutdown", _pair_shutdown(cfg, hold(6.0))),
    ]
    for name, trace in family:
        trace.name = name
        segments.append(trace)
    order = np.random.default_rng(cfg.seed).permutation(len(segments))
    return [segments[i] for i in order]


def corpus_manifest(corpus: list[CommandTrace], cfg: ExcitationConfig) -> dict:
    """JSON-ready manifest describing a corpus (segment kind, bias, duration)."""
    entries = []
    for i, trace in enumerate(corpus):
        kind = "excitation" if trace.name.startswith("excite") else trace.name
        e_bias = float(trace.name.split("_b")[1]) if trace.name.startswith("excite_b") else None
        entries.append({
            "index": i,
            "name": trace.name or f"segment_{i:03d}",
            "kind": kind,
            "e_bias": e_bias,
            "duration": trace.duration,
            "samples": len(trace),
        })
    return {"dt": cfg.dt, "segments": entries}


def save_corpus(corpus: list[CommandTrace], cfg: ExcitationConfig,
                out_dir: str | Path) -> dict:
    """Write one command CSV per trace plus the JSON manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = corpus_manifest(corpus, cfg)
    for entry, trace in zip(manifest["segments"], corpus):
        fname = f"{entry['index']:03d}_{entry['name']}.csv"
        entry["file"] = fname
        trace.to_csv(out / fname)
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


__all__ = [
    "ExcitationConfig", "thrust_levels", "excitation_basis",
    "excitation_segment", "step_stair_trace", "ramp_trace", "build_corpus",
    "corpus_manifest", "save_corpus",
]
