"""Command-line front end: build chains from a config file, verify them, and
regenerate the figure curves as CSV plus PNG.

Config files are YAML::

    v0: zero                  # zero | oscillator | file:<csv with x,V columns>
    window: [-15, 15, 3001]   # optional
    steps:
      - {kind: simple, epsilon: -4, seed: S, shift: 0}
      - {kind: simple, epsilon: -1, seed: R, shift: 0}
    outputs:
      - {potential_csv: V2.csv}
      - {beta_csv: beta2.csv, level: 2}
      - {report: report.txt}
    tolerances: {riccati: 1.0e-8}
    perturb_beta: 0.0         # adds c*x to every superpotential before checking

A step's ``param`` is a number, ``inf`` (particular solution) or
``derivative`` (confluent step through the energy derivative).  Relative
output paths resolve against the config file's directory.

Exit codes: 0 all checks pass, 1 a check failed, 2 bad config, 3 a
construction error (its class name is printed).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml
from scipy.interpolate import CubicSpline

from .backlund import build_chain
from .catalog import SQRT_PI_2, oscillator_potential, zero_potential
from .confluent import iterated_confluent
from .core import DEFAULT_WINDOW, ChainStep, Grid, RealFunction, SusyChain, exclusion_windows
from .errors import ConfigError, SusyError
from .plotting import plot_curves
from .verify import DEFAULT_TOLERANCES, verify_chain

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_CONSTRUCTION = 0, 1, 2, 3

_STEP_KEYS = {"kind", "epsilon", "param", "seed", "shift", "ic"}
_OUTPUT_KEYS = {"potential_csv", "beta_csv", "report", "level"}


@dataclass
class RunConfig:
    v0: str
    window: tuple[float, float, int]
    steps: list[ChainStep]
    outputs: list[dict] = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    perturb_beta: float = 0.0
    base: Path = Path(".")

    @property
    def grid(self) -> Grid:
        return Grid.uniform(*self.window)


# ---------------------------------------------------------------- config


def _number(value, what: str) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a number, got {value!r}") from None


def _parse_window(raw) -> tuple[float, float, int]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise ConfigError("window must be [x_min, x_max, n_points]")
    lo, hi = _number(raw[0], "window x_min"), _number(raw[1], "window x_max")
    n = int(_number(raw[2], "window n_points"))
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo and n >= 9):
        raise ConfigError("window needs finite x_min < x_max and at least 9 points")
    return lo, hi, n


def _parse_step(raw, i: int) -> ChainStep:
    if not isinstance(raw, dict):
        raise ConfigError(f"step {i} must be a mapping")
    unknown = set(raw) - _STEP_KEYS
    if unknown:
        raise ConfigError(f"step {i}: unknown keys {sorted(unknown)}")
    if "kind" not in raw or "epsilon" not in raw:
        raise ConfigError(f"step {i}: 'kind' and 'epsilon' are required")
    kind = str(raw["kind"]).lower()
    if kind not in ("simple", "confluent"):
        raise ConfigError(f"step {i}: kind must be simple or confluent")
    p = raw.get("param", "inf")
    param = None if isinstance(p, str) and p.lower() == "derivative" else _number(p, f"step {i} param")
    ic = raw.get("ic")
    if ic is not None:
        if not isinstance(ic, (list, tuple)) or len(ic) != 2:
            raise ConfigError(f"step {i}: ic must be [u, du]")
        ic = (_number(ic[0], "ic"), _number(ic[1], "ic"))
    try:
        return ChainStep(
            kind,
            _number(raw["epsilon"], f"step {i} epsilon"),
            param,
            None if raw.get("seed") is None else str(raw["seed"]),
            _number(raw.get("shift", 0.0), f"step {i} shift"),
            ic,
        )
    except ValueError as exc:
        raise ConfigError(f"step {i}: {exc}") from None


def parse_tolerances(items: Sequence[str]) -> dict:
    """``name=value`` pairs as given to ``--tol``."""
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or name not in DEFAULT_TOLERANCES:
            raise ConfigError(f"bad tolerance {item!r}; known names: {', '.join(DEFAULT_TOLERANCES)}")
        out[name] = _number(value, f"tolerance {name}")
    return out


def load_config(path: Path, window=None, tolerances: dict | None = None, require_steps: bool = True) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - {"v0", "window", "steps", "outputs", "tolerances", "perturb_beta"}
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")

    v0 = str(raw.get("v0", "zero"))
    if v0 not in ("zero", "oscillator") and not v0.startswith("file:"):
        raise ConfigError("v0 must be zero, oscillator or file:<path>")
    win = _parse_window(window) if window is not None else _parse_window(raw.get("window", list(DEFAULT_WINDOW)))

    steps_raw = raw.get("steps") or []
    if not isinstance(steps_raw, list):
        raise ConfigError("steps must be a list")
    if require_steps and not steps_raw:
        raise ConfigError("a chain needs at least one step")
    steps = [_parse_step(s, i) for i, s in enumerate(steps_raw, start=1)]

    outputs = raw.get("outputs") or []
    if isinstance(outputs, dict):
        outputs = [outputs]
    for o in outputs:
        if not isinstance(o, dict) or set(o) - _OUTPUT_KEYS:
            raise ConfigError(f"bad output entry {o!r}")

    tol = {}
    for name, value in (raw.get("tolerances") or {}).items():
        if name not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {name!r}")
        tol[name] = _number(value, f"tolerance {name}")
    tol.update(tolerances or {})

    return RunConfig(
        v0=v0,
        window=win,
        steps=steps,
        outputs=list(outputs),
        tolerances=tol,
        perturb_beta=_number(raw.get("perturb_beta", 0.0), "perturb_beta"),
        base=path.parent,
    )


def potential_from_csv(path: Path) -> RealFunction:
    """Cubic-spline potential through an ``x,V`` table."""
    try:
        data = np.atleast_2d(np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float))
    except OSError as exc:
        raise ConfigError(f"cannot read potential table {path}: {exc}") from None
    if data.shape[1] < 2 or data.shape[0] < 4 or not np.all(np.isfinite(data[:, :2])):
        raise ConfigError(f"potential table {path} needs at least 4 finite x,V rows")
    spline = CubicSpline(data[:, 0], data[:, 1])
    return RealFunction(lambda x, n: [spline(x, k) for k in range(n + 1)], order=3, name=f"table:{path.name}")


def make_v0(cfg: RunConfig) -> RealFunction:
    if cfg.v0 == "zero":
        return zero_potential()
    if cfg.v0 == "oscillator":
        return oscillator_potential()
    p = Path(cfg.v0[len("file:"):])
    return potential_from_csv(p if p.is_absolute() else cfg.base / p)


# ---------------------------------------------------------------- output


def _atomic_write(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def curve_csv(f: RealFunction, grid: Grid, column: str = "V") -> str:
    """CSV text on every grid point; points inside an exclusion window read ``nan``."""
    x = grid.points
    with np.errstate(all="ignore"):
        y = np.asarray(f(x), dtype=float)
    keep = grid.mask_outside(exclusion_windows(f, grid.delta_sing))
    y = np.where(keep & np.isfinite(y), y, np.nan)
    lines = [f"x,{column}"]
    lines += [f"{xi:.17g},{'nan' if np.isnan(yi) else format(yi, '.17g')}" for xi, yi in zip(x, y)]
    return "\n".join(lines) + "\n"


def write_curve(path: Path, f: RealFunction, grid: Grid, column: str = "V") -> Path:
    return _atomic_write(path, curve_csv(f, grid, column))


def nan_clusters(path: Path) -> list[tuple[float, float]]:
    """``[x_first, x_last]`` of each run of consecutive ``nan`` rows in a curve CSV."""
    data = np.atleast_2d(np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float))
    bad = np.isnan(data[:, 1])
    runs, start = [], None
    for i, b in enumerate(bad):
        if b and start is None:
            start = i
        if not b and start is not None:
            runs.append((data[start, 0], data[i - 1, 0]))
            start = None
    if start is not None:
        runs.append((data[start, 0], data[-1, 0]))
    return runs


def _perturbed(chain: SusyChain, c: float) -> SusyChain:
    def shifted(b: RealFunction) -> RealFunction:
        def jet(x, n):
            out = [v.copy() for v in b.jet(x, n)]
            out[0] = out[0] + c * x
            if n >= 1:
                out[1] = out[1] + c
            return out

        return b.replace(jet=jet, name=f"{b.name}+{c:g}x")

    steps = [(shifted(b), s) for b, s in chain.steps]
    return SusyChain(chain.v0, steps, chain.potentials, chain.omegas, chain.grid, None, chain.parity_potential, chain.memo)


# ---------------------------------------------------------------- commands


def _build(cfg: RunConfig) -> SusyChain:
    chain = build_chain(make_v0(cfg), cfg.steps, grid=cfg.grid, verify=False)
    if cfg.perturb_beta:
        chain = _perturbed(chain, cfg.perturb_beta)
    chain.report = verify_chain(chain, cfg.tolerances)
    return chain


def _resolve(cfg: RunConfig, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else cfg.base / path


def cmd_chain(cfg: RunConfig) -> int:
    chain = _build(cfg)
    for out in cfg.outputs:
        level = int(out.get("level", chain.n))
        if not 0 <= level <= chain.n:
            raise ConfigError(f"output level {level} outside 0..{chain.n}")
        if "potential_csv" in out:
            write_curve(_resolve(cfg, out["potential_csv"]), chain.potentials[level], chain.grid, "V")
        if "beta_csv" in out:
            if level == 0:
                raise ConfigError("there is no superpotential at level 0")
            write_curve(_resolve(cfg, out["beta_csv"]), chain.betas[level - 1], chain.grid, "beta")
        if "report" in out:
            _atomic_write(_resolve(cfg, out["report"]), chain.report.format())
    sys.stdout.write(chain.report.format())
    return EXIT_OK if chain.report.passed else EXIT_CHECK


def cmd_verify(cfg: RunConfig) -> int:
    chain = _build(cfg)
    for out in cfg.outputs:
        if "report" in out:
            _atomic_write(_resolve(cfg, out["report"]), chain.report.format())
    sys.stdout.write(chain.report.format())
    return EXIT_OK if chain.report.passed else EXIT_CHECK


# figure parameters: shifts (a, b) of the three double wells, Gamma pair, periodic data
FIG1_WELLS = {"a": (0.0, 0.0), "b": (0.254, -1.018), "c": (0.565, -2.262)}
FIG2_GAMMAS = (SQRT_PI_2, 0.308)
FIG3_ENERGY = 0.25


def fig1_steps(a: float, b: float) -> list[ChainStep]:
    """coth seed at ``x = -b`` (eps -4) then tanh seed centred at ``x = a`` (eps -1)."""
    return [ChainStep("simple", -4.0, seed="S", shift=-b), ChainStep("simple", -1.0, seed="R", shift=-a)]


def fig2_steps(g1: float = FIG2_GAMMAS[0], g2: float = FIG2_GAMMAS[1]) -> list[ChainStep]:
    return [ChainStep("confluent", -0.5, param=g1, seed="osc"), ChainStep("confluent", -0.5, param=g2)]


def fig3_steps(a: float, order: int) -> list[ChainStep]:
    first = ChainStep("simple", FIG3_ENERGY, seed="P", shift=a)
    return [first] + [ChainStep("confluent", FIG3_ENERGY, param=None)] * (order - 1)


def cmd_figure(n: int, out: Path, window=None) -> list[Path]:
    """Write the CSV curves of figure ``n`` and a PNG of them; returns the CSV paths."""
    out = Path(out)
    grid = Grid.uniform(*(window or DEFAULT_WINDOW))
    written: list[Path] = []
    if n == 1:
        for tag, (a, b) in FIG1_WELLS.items():
            chain = build_chain(zero_potential(), fig1_steps(a, b), grid=grid, verify=False)
            written.append(write_curve(out / f"fig1_{tag}.csv", chain.current_potential, grid))
        labels = [f"({t}) a={a:g}, b={b:g}" for t, (a, b) in FIG1_WELLS.items()]
        plot_curves(list(zip(labels, written)), out / "fig1.png", "Two-soliton double wells (eps = -4, -1)")
    elif n == 2:
        chain = build_chain(oscillator_potential(), fig2_steps(), grid=grid, verify=False)
        written.append(write_curve(out / "fig2_am2.csv", chain.current_potential, grid))
        written.append(write_curve(out / "fig2_oscillator.csv", oscillator_potential(), grid))
        plot_curves(
            [(f"Gamma1 = {FIG2_GAMMAS[0]:.4f}, Gamma2 = {FIG2_GAMMAS[1]:g}", written[0]), ("x^2/2", written[1])],
            out / "fig2.png",
            "Second-order confluent oscillator partner",
            ylim=(-4.0, 12.0),
            xlim=(-6.0, 6.0),
            styles=["-", "--"],
        )
    elif n == 3:
        v2 = build_chain(zero_potential(), fig3_steps(7.0, 2), grid=grid, verify=False)
        v4 = build_chain(zero_potential(), fig3_steps(-7.0, 4), grid=grid, verify=False)
        lit = iterated_confluent("P", FIG3_ENERGY, -7.0, 4, grid=grid, literal=True)
        written.append(write_curve(out / "fig3_V2conf.csv", v2.current_potential, grid))
        written.append(write_curve(out / "fig3_V4conf.csv", v4.current_potential, grid))
        written.append(write_curve(out / "fig3_V4conf_literal.csv", lit.potential, grid))
        plot_curves(
            [("V2conf, a = 7", written[0]), ("V4conf, a = -7", written[1]), ("V4conf literal iteration, a = -7", written[2])],
            out / "fig3.png",
            "Periodic-branch confluent potentials (eps = 0.25)",
            ylim=(-5.0, 20.0),
            styles=["--", "-", ":"],
        )
    else:
        raise ConfigError("figure number must be 1, 2 or 3")
    return written


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="susyfd", description="Higher-order SUSY chains by finite differences.")
    p.add_argument("--window", nargs=3, metavar=("X_MIN", "X_MAX", "N"), help="sampling window override")
    p.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE", help="tolerance override (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("chain", help="build a chain and write its curves and report")
    c.add_argument("--config", required=True, type=Path)
    v = sub.add_parser("verify", help="run the residual suite on a chain")
    v.add_argument("--config", required=True, type=Path)
    f = sub.add_parser("figure", help="regenerate a figure's curves (CSV and PNG)")
    f.add_argument("number", type=int, choices=(1, 2, 3))
    f.add_argument("--out", required=True, type=Path)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        window = _parse_window(args.window) if args.window else None
        tol = parse_tolerances(args.tol)
        if args.command == "figure":
            for path in cmd_figure(args.number, args.out, window):
                print(path)
            return EXIT_OK
        cfg = load_config(args.config, window, tol)
        return cmd_chain(cfg) if args.command == "chain" else cmd_verify(cfg)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SusyError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
