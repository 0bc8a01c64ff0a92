"""Monte Carlo sweeps over channel draws and parameter grids, CSV output and the CLI.

A run is the Cartesian product of the sweep axes of a ``ScenarioConfig``;
each cell is solved on ``realizations`` downlink channel draws. Realization
``r`` always uses the generator seeded by ``SeedSequence(seed, spawn_key=(r,))``,
so every cell sees the same draws regardless of grid size or order.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import re
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from fdisac.beams import (
    DEFAULT_DIRECTIONS,
    RX_BEAMWIDTHS,
    TX_BEAMWIDTHS,
    ArrayGeometry,
    build_codebook,
)
from fdisac.channels import (
    CommChannelParams,
    SensingParams,
    SiUncertainty,
    build_channel_set,
    rician_channel,
)
from fdisac.metrics import evaluate_schedule
from fdisac.milp import build_milp, export_lp, precompute
from fdisac.solver import solve_structured

SCENARIOS = ("I", "II", "III", "IV", "custom")
AXES = (
    "theta_deg",
    "sinr_threshold",
    "upsilon_nominal",
    "upsilon_radius",
    "min_sensing_slots",
    "n_slots",
    "reflection_coeff",
    "center_separation_m",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str = "custom"
    bandwidth_hz: float = 200e6
    slot_s: float = 1e-3
    n_tx: int = 8
    n_rx: int = 16
    carrier_ghz: float = 41.0
    distance_m: float = 60.0
    user_angle_deg: float = 90.0
    k_factor: float = 100.0
    comm_noise_dbw: float = -114.0
    sense_noise_dbw: float = -74.0
    tx_power_w: float = 1.0
    rx_power_w: float = 0.25
    element_spacing: float = 0.5
    layout_angle_deg: float = 0.0
    si_cap: float = 1.0
    directions: tuple[float, ...] = DEFAULT_DIRECTIONS
    tx_beamwidths: tuple[tuple[float, int], ...] = TX_BEAMWIDTHS
    rx_beamwidths: tuple[tuple[float, int], ...] = RX_BEAMWIDTHS
    # sweep axes
    theta_deg: tuple[float, ...] = (90.0,)
    sinr_threshold: tuple[float, ...] = (3.0,)
    upsilon_nominal: tuple[float, ...] = (0.0,)
    upsilon_radius: tuple[float, ...] = (0.0,)
    min_sensing_slots: tuple[int, ...] = (1,)
    n_slots: tuple[int, ...] = (1,)
    reflection_coeff: tuple[float, ...] = (6e-4,)
    center_separation_m: tuple[float, ...] = (0.15,)
    realizations: int = 50
    seed: int = 0
    per_realization: bool = False
    compare_si_blind: bool = False

    def __post_init__(self):
        if self.scenario_id not in SCENARIOS:
            raise ConfigError(f"scenario_id must be one of {SCENARIOS}, got {self.scenario_id!r}")
        for name in AXES:
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"sweep axis {name} is empty")
        if self.realizations < 1:
            raise ConfigError(f"realizations must be >= 1, got {self.realizations}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")

    @property
    def n_cells(self) -> int:
        return math.prod(len(getattr(self, a)) for a in AXES)

    def cells(self):
        """Axis-value dicts in row-major order over ``AXES``."""
        for values in itertools.product(*(getattr(self, a) for a in AXES)):
            yield dict(zip(AXES, values))


def preset(name: str) -> ScenarioConfig:
    """Parameter grids of the four reference scenarios."""
    key = name.strip().upper()
    if key == "I":
        return ScenarioConfig(
            scenario_id="I", theta_deg=(90.0, 110.0, 130.0), sinr_threshold=(3.0, 4.0, 5.0),
            min_sensing_slots=(1,), n_slots=(1,), per_realization=True,
        )
    if key == "II":
        return ScenarioConfig(
            scenario_id="II", theta_deg=(100.0,), sinr_threshold=(1.0, 2.0, 3.0),
            upsilon_nominal=_linspace(0.0, 0.95, 20), upsilon_radius=(0.05,),
            min_sensing_slots=(4,), n_slots=(8,), reflection_coeff=(6e-4, 9e-4),
        )
    if key == "III":
        return ScenarioConfig(
            scenario_id="III", theta_deg=(100.0,), sinr_threshold=(3.0,),
            upsilon_nominal=_linspace(0.0, 0.95, 20), upsilon_radius=(0.05,),
            min_sensing_slots=tuple(range(1, 9)), n_slots=(8,), reflection_coeff=(6e-4,),
            compare_si_blind=True,
        )
    if key == "IV":
        return ScenarioConfig(
            scenario_id="IV", theta_deg=(100.0,), sinr_threshold=(1.0, 2.0, 3.0, 4.0, 5.0),
            upsilon_nominal=(1.0,), upsilon_radius=(0.0,), min_sensing_slots=(4,), n_slots=(8,),
            reflection_coeff=(6e-4,), center_separation_m=(0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0, 1000.0),
        )
    raise ConfigError(f"unknown scenario {name!r}; expected one of i, ii, iii, iv")


def _linspace(a: float, b: float, n: int) -> tuple[float, ...]:
    return tuple(float(v) for v in np.linspace(a, b, n))


# ---------------------------------------------------------------------------
# config text format

_SCALAR_TYPES = {
    "scenario_id": str, "n_tx": int, "n_rx": int, "realizations": int, "seed": int,
    "per_realization": bool, "compare_si_blind": bool,
}
_INT_AXES = {"min_sensing_slots", "n_slots"}
_MAPS = {"tx_beamwidths", "rx_beamwidths"}
_LISTS = set(AXES) | {"directions"}


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_number_list(text: str, kind) -> tuple:
    m = re.fullmatch(r"linspace\(([^,]+),([^,]+),([^,]+)\)", text.replace(" ", ""))
    if m:
        a, b, n = float(m[1]), float(m[2]), int(m[3])
        if n < 1:
            raise ValueError("linspace needs at least one point")
        values = _linspace(a, b, n)
        return tuple(kind(v) for v in values) if kind is float else tuple(_as_int(v) for v in values)
    items = [t.strip() for t in text.split(",") if t.strip()]
    return tuple(kind(t) if kind is float else _as_int(float(t)) for t in items)


def _as_int(v: float) -> int:
    if v != int(v):
        raise ValueError(f"expected an integer, got {v}")
    return int(v)


def _parse_map(text: str) -> tuple[tuple[float, int], ...]:
    out = []
    for item in (t.strip() for t in text.split(",") if t.strip()):
        bw, _, n = item.partition(":")
        if not n:
            raise ValueError(f"expected beamwidth:n_active, got {item!r}")
        out.append((float(bw), _as_int(float(n))))
    return tuple(out)


def _parse_value(key: str, text: str):
    if key in _MAPS:
        return _parse_map(text)
    if key in _LISTS:
        return _parse_number_list(text, int if key in _INT_AXES else float)
    kind = _SCALAR_TYPES.get(key, float)
    if kind is bool:
        return _parse_bool(text)
    if kind is int:
        return _as_int(float(text))
    if kind is str:
        return text
    return float(text)


def parse_config(document: str) -> ScenarioConfig:
    """Build a config from flat ``key = value`` lines.

    ``#`` starts a comment. An optional ``preset = i|ii|iii|iv`` line picks
    the starting grid; every other omitted key keeps its default. Lists are
    comma separated or ``linspace(a, b, n)``; beamwidth maps are written
    ``13:8, 17:6``. Unknown keys and ill-typed values raise ConfigError.
    """
    known = {f.name for f in fields(ScenarioConfig)}
    values: dict = {}
    base = ScenarioConfig()
    for lineno, raw in enumerate(document.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, text = line.partition("=")
        key, text = key.strip(), text.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key in values or (key == "preset" and "preset" in values):
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key == "preset":
            values["preset"] = text
            continue
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(key, text)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    if "preset" in values:
        base = preset(values.pop("preset"))
    try:
        return replace(base, **values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{_fmt_value(a)}:{_fmt_value(b)}" for a, b in v)
        return ", ".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(config: ScenarioConfig) -> str:
    """Every key of ``config`` as ``key = value`` text that parses back to an equal config."""
    return "".join(f"{k} = {_fmt_value(v)}\n" for k, v in asdict(config).items())


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class ResultRow:
    scenario_id: str
    mode: str
    theta_deg: float
    sinr_threshold: float
    upsilon_nominal: float
    upsilon_radius: float
    min_sensing_slots: int
    n_slots: int
    reflection_coeff: float
    center_separation_m: float
    realization: str
    n_realizations: int
    mean_throughput_bits: float
    feasibility_fraction: float
    declared_feasible_fraction: float
    mean_worst_case_sinr: float
    modal_tx_direction_deg: float
    modal_tx_beamwidth_deg: float
    modal_rx_direction_deg: float
    modal_rx_beamwidth_deg: float
    note: str = ""


CSV_HEADER = tuple(f.name for f in fields(ResultRow))


@dataclass
class _Outcome:
    """One realization of one cell."""

    declared: bool
    feasible: bool
    bits: float
    worst_sinr: float
    tx: int | None
    rx: int | None


class _Sweep:
    def __init__(self, config: ScenarioConfig):
        self.cfg = config
        self.tx_geom = ArrayGeometry(config.n_tx, config.element_spacing, 0.0)
        self.tx_cb = build_codebook(self.tx_geom, config.directions, config.tx_beamwidths, config.tx_power_w)
        rx0 = ArrayGeometry(config.n_rx, config.element_spacing, 0.0)
        self.rx_cb = build_codebook(rx0, config.directions, config.rx_beamwidths, config.rx_power_w)
        self.comm = CommChannelParams(
            config.k_factor, config.user_angle_deg, config.distance_m, config.carrier_ghz, config.comm_noise_dbw
        )
        self.h = [
            rician_channel(self.tx_geom, self.comm, np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(r,))))
            for r in range(config.realizations)
        ]
        self._base: dict = {}

    def base(self, r: int, theta: float, sep: float):
        """Channel set and coefficient table of realization r at SI-free defaults (cached)."""
        key = (r, theta, sep)
        if key not in self._base:
            c = self.cfg
            rx_geom = ArrayGeometry(c.n_rx, c.element_spacing, sep)
            sensing = SensingParams(theta, c.reflection_coeff[0], c.sense_noise_dbw, c.sinr_threshold[0], 0)
            ch = build_channel_set(
                self.tx_geom, rx_geom, self.comm, sensing, SiUncertainty(0.0, 0.0, c.si_cap), self.h[r],
                layout_angle_deg=c.layout_angle_deg,
            )
            self._base[key] = (ch, precompute(ch, self.tx_cb, self.rx_cb, c.bandwidth_hz, c.slot_s))
        return self._base[key]

    def solve_raw(self, r: int, cell: dict, si: SiUncertainty, si_blind: bool):
        """(channel set under the true SI interval, solution) for one realization of one cell."""
        ch, table = self.base(r, cell["theta_deg"], cell["center_separation_m"])
        lam, psi = cell["sinr_threshold"], cell["reflection_coeff"]
        S, M = cell["n_slots"], cell["min_sensing_slots"]
        design_si = SiUncertainty(0.0, 0.0, self.cfg.si_cap) if si_blind else si
        sol = solve_structured(table.with_scenario(si=design_si, sinr_threshold=lam, reflection_coeff=psi), S, M)
        true_ch = ch.with_uncertainty(si).with_sensing(sinr_threshold=lam, reflection_coeff=psi, min_sensing_slots=M)
        return true_ch, sol

    def solve(self, r: int, cell: dict, si: SiUncertainty, si_blind: bool) -> _Outcome:
        true_ch, sol = self.solve_raw(r, cell, si, si_blind)
        if not sol.optimal:
            return _Outcome(False, False, float("nan"), float("nan"), None, None)
        S, M = cell["n_slots"], cell["min_sensing_slots"]
        report = evaluate_schedule(true_ch, sol.schedule, self.tx_cb, self.rx_cb, self.cfg.bandwidth_hz,
                                   self.cfg.slot_s, M, S)
        if not math.isclose(report.total_bits, sol.objective_bits, rel_tol=1e-9, abs_tol=1e-9):
            raise RuntimeError(f"solver objective {sol.objective_bits} disagrees with re-evaluation {report.total_bits}")
        if not si_blind and not report.feasible:
            raise RuntimeError(f"robust schedule failed re-validation: {report.violation}")
        sinrs = [v for v in report.worst_sinr if not math.isnan(v)]
        first = sol.schedule[0]
        return _Outcome(True, report.feasible, report.total_bits, min(sinrs) if sinrs else float("nan"),
                        first.tx_index, first.rx_index)

    def row(self, cell: dict, mode: str, label: str, outcomes: list[_Outcome], note: str = "") -> ResultRow:
        n = len(outcomes)
        ok = [o for o in outcomes if o.feasible]
        declared = [o for o in outcomes if o.declared]
        sinrs = [o.worst_sinr for o in declared if not math.isnan(o.worst_sinr)]
        tx_dir, tx_bw = self._modal(self.tx_cb, [o.tx for o in declared])
        rx_dir, rx_bw = self._modal(self.rx_cb, [o.rx for o in declared])
        return ResultRow(
            scenario_id=self.cfg.scenario_id,
            mode=mode,
            **{a: cell[a] for a in AXES},
            realization=label,
            n_realizations=n,
            mean_throughput_bits=float(np.mean([o.bits for o in ok])) if ok else float("nan"),
            feasibility_fraction=len(ok) / n,
            declared_feasible_fraction=len(declared) / n,
            mean_worst_case_sinr=float(np.mean(sinrs)) if sinrs else float("nan"),
            modal_tx_direction_deg=tx_dir,
            modal_tx_beamwidth_deg=tx_bw,
            modal_rx_direction_deg=rx_dir,
            modal_rx_beamwidth_deg=rx_bw,
            note=note,
        )

    @staticmethod
    def _modal(cb, indices):
        indices = [i for i in indices if i is not None]
        if not indices:
            return float("nan"), float("nan")
        values, counts = np.unique(indices, return_counts=True)
        cw = cb[int(values[np.argmax(counts)])]  # ties go to the lowest index
        return cw.direction_deg, cw.beamwidth_deg


def _run(config: ScenarioConfig, si_blind: bool) -> list[ResultRow]:
    sweep = _Sweep(config)
    mode = "si_blind" if si_blind else "robust"
    rows = []
    for cell in config.cells():
        try:
            si = SiUncertainty(cell["upsilon_nominal"], cell["upsilon_radius"], config.si_cap)
        except ValueError as exc:
            empty = [_Outcome(False, False, float("nan"), float("nan"), None, None)] * config.realizations
            rows.append(sweep.row(cell, mode, "mean", empty, note=str(exc)))
            continue
        outcomes = [sweep.solve(r, cell, si, si_blind) for r in range(config.realizations)]
        note = ""
        if cell["min_sensing_slots"] > cell["n_slots"]:
            note = "min_sensing_slots exceeds n_slots"
        if config.per_realization:
            rows += [sweep.row(cell, mode, str(r), [o], note) for r, o in enumerate(outcomes)]
        rows.append(sweep.row(cell, mode, "mean", outcomes, note))
    return rows


def iter_solutions(config: ScenarioConfig, si_blind: bool = False):
    """Yield ``(cell, realization, channels, tx_cb, rx_cb, solution)`` over the whole grid.

    ``channels`` carries the configured SI interval and threshold, so the
    schedule can be re-checked with the functions in ``fdisac.metrics``.
    Cells with an invalid SI interval are skipped.
    """
    sweep = _Sweep(config)
    for cell in config.cells():
        try:
            si = SiUncertainty(cell["upsilon_nominal"], cell["upsilon_radius"], config.si_cap)
        except ValueError:
            continue
        for r in range(config.realizations):
            ch, sol = sweep.solve_raw(r, cell, si, si_blind)
            yield cell, r, ch, sweep.tx_cb, sweep.rx_cb, sol


def run(config: ScenarioConfig) -> list[ResultRow]:
    """Robust optimum for every cell, averaged over channel realizations."""
    return _run(config, si_blind=False)


def run_nonrobust_comparison(config: ScenarioConfig) -> list[ResultRow]:
    """Schedules designed as if SI were perfectly cancelled, judged under the configured SI interval.

    ``feasibility_fraction`` counts realizations whose schedule still meets
    the threshold at the true worst case; ``declared_feasible_fraction``
    counts those the SI-blind design considered solvable.
    """
    return _run(config, si_blind=True)


def run_all(config: ScenarioConfig) -> list[ResultRow]:
    rows = run(config)
    if config.compare_si_blind:
        rows += run_nonrobust_comparison(config)
    return rows


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def emit_csv(rows: list[ResultRow], destination=None) -> str:
    """Write rows as UTF-8 CSV with header ``CSV_HEADER``; returns the text."""
    if not rows:
        raise ValueError("no rows to write")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow([_csv_cell(getattr(row, k)) for k in CSV_HEADER])
    text = buf.getvalue()
    if destination is None:
        return text
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text, encoding="utf-8")
    else:
        destination.write(text)
    return text


def first_cell_model(config: ScenarioConfig, realization: int = 0):
    """MILP of the first grid cell on one channel draw."""
    sweep = _Sweep(replace(config, realizations=realization + 1))
    cell = next(config.cells())
    _, table = sweep.base(realization, cell["theta_deg"], cell["center_separation_m"])
    si = SiUncertainty(cell["upsilon_nominal"], cell["upsilon_radius"], config.si_cap)
    table = table.with_scenario(si=si, sinr_threshold=cell["sinr_threshold"], reflection_coeff=cell["reflection_coeff"])
    return build_milp(table, cell["n_slots"], cell["min_sensing_slots"])


# ---------------------------------------------------------------------------
# CLI


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdisac", description="Full-duplex ISAC timeslot and beam allocation sweeps.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--realizations", type=int, help="channel draws per cell (overrides the config)")
    common.add_argument("--out", help="output file (default: stdout)")
    sub = p.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scenario", parents=[common], help="run a reference scenario")
    sc.add_argument("name", choices=["i", "ii", "iii", "iv"], type=str.lower)
    cu = sub.add_parser("custom", parents=[common], help="run a grid from a config file")
    cu.add_argument("--config", required=True)
    ex = sub.add_parser("export-lp", parents=[common], help="write the MILP of the first grid cell")
    ex.add_argument("--config", required=True)
    ex.add_argument("--realization", type=int, default=0)
    sub.add_parser("show-config", parents=[common], help="print a config with every key").add_argument(
        "name", nargs="?", default=None)
    return p


def _load(args) -> ScenarioConfig:
    if args.command == "scenario":
        cfg = preset(args.name)
    elif args.command == "show-config":
        cfg = preset(args.name) if args.name else ScenarioConfig()
    else:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = parse_config(text)
    over = {k: getattr(args, k) for k in ("seed", "realizations") if getattr(args, k) is not None}
    return replace(cfg, **over)


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"fdisac: config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "show-config":
        _write(format_config(cfg), args.out)
    elif args.command == "export-lp":
        if args.realization < 0:
            print("fdisac: --realization must be non-negative", file=sys.stderr)
            return 2
        try:
            model = first_cell_model(cfg, args.realization)
        except ValueError as exc:
            print(f"fdisac: config error: {exc}", file=sys.stderr)
            return 2
        _write(export_lp(model), args.out)
    else:
        _write(emit_csv(run_all(cfg)), args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
