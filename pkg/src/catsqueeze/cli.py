"""Command-line front end.

Every subcommand reads an optional JSON scenario (``--config``), applies
command-line overrides, writes plot-ready files into ``--out`` and prints a
one-line summary. Failures print one JSON line on stderr and exit with 2
(bad configuration) or 3 (numerical failure).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import states as st
from . import tomography as tm
from .channels import ChannelSpec, gaussian_env_channel, pure_loss
from .errors import NoNegativityError, TruncationError
from .metrics import decay_curve, fock_rd_ladder, optimal_squeezing, rate_of_decay
from .wigner import DEFAULT_NODES, cross_section_csv, wigner_grid, wigner_minimum

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


@dataclass
class StateSpec:
    kind: str = "cat"
    alpha2: float = 2.1
    parity: str = "even"
    s_db: float = 4.0
    angle: float = 0.0
    n: int = 1
    nbar: float = 0.0
    coeffs: list = field(default_factory=lambda: [1.0])
    dim: int = st.DEFAULT_DIM


@dataclass
class ChannelConfig:
    eta: float = 1.0
    env_db: float = 0.0
    phase: float = 0.0


@dataclass
class SweepConfig:
    start: float = 0.9
    stop: float = 0.5
    step: float = 0.05


@dataclass
class TomoConfig:
    samples: int = 50000
    phases: int = 12
    efficiency: float = 1.0
    correct: bool = False
    tomo_dim: int = 25
    delay_tau: float = 0.0
    gamma: float = 1.0


@dataclass
class Fig2Config:
    alpha2_min: float = 0.5
    alpha2_max: float = 3.0
    alpha2_step: float = 0.25
    n_max: int = 6
    fig2_parity: str = "odd"
    s_max: float = 10.0
    s_step: float = 0.1
    objective: str = "min_rd"


@dataclass
class ScenarioConfig:
    state: StateSpec = field(default_factory=StateSpec)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    tomo: TomoConfig = field(default_factory=TomoConfig)
    fig2: Fig2Config = field(default_factory=Fig2Config)
    seed: int = 0
    out: str = "out"
    nodes: int = DEFAULT_NODES
    half_width: float = 6.0

    SECTIONS = ("state", "channel", "sweep", "tomo", "fig2")

    @classmethod
    def build(cls, document: dict, overrides: dict) -> "ScenarioConfig":
        cfg = cls()
        for key, value in document.items():
            if key in cls.SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(f"section {key!r} must be an object")
                for k, v in value.items():
                    _assign(getattr(cfg, key), k, v)
            else:
                _assign(cfg, key, value)
        for key, value in overrides.items():
            if value is None:
                continue
            for section in cls.SECTIONS:
                target = getattr(cfg, section)
                if key in {f.name for f in fields(target)}:
                    setattr(target, key, value)
                    break
            else:
                if key == "dim":
                    cfg.state.dim = value
                elif hasattr(cfg, key):
                    setattr(cfg, key, value)
        return cfg

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items()}


def _assign(obj, key, value):
    names = {f.name: f for f in fields(obj)}
    if key not in names:
        raise ConfigError(f"unknown configuration key {key!r}")
    setattr(obj, key, value)


def build_state(spec: StateSpec) -> st.DensityMatrix:
    kind = spec.kind
    if kind == "fock":
        rho = st.fock(int(spec.n), spec.dim)
    elif kind == "vacuum":
        rho = st.vacuum(spec.dim)
    elif kind == "coherent":
        rho = st.coherent(math.sqrt(spec.alpha2), spec.dim)
    elif kind == "cat":
        rho = st.cat(math.sqrt(spec.alpha2), spec.parity, spec.dim)
    elif kind == "thermal":
        rho = st.thermal(spec.nbar, spec.dim)
    elif kind == "superposition":
        rho = st.fock_superposition(spec.coeffs, spec.dim)
    else:
        raise ConfigError(f"unknown state kind {kind!r}")
    if spec.s_db:
        rho = st.squeeze(rho, st.SqueezeParams(spec.s_db, spec.angle))
    return rho


def apply_channel(rho: st.DensityMatrix, ch: ChannelConfig) -> st.DensityMatrix:
    if ch.env_db == 0 and ch.phase == 0:
        return pure_loss(rho, ch.eta)
    gain = 10.0 ** (-ch.env_db / 10.0)
    return gaussian_env_channel(rho, ChannelSpec(ch.eta, env_gain=gain, phase=ch.phase))


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _csv_text(header_lines, columns, rows) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _summary(rho: st.DensityMatrix) -> dict:
    pt, w = wigner_minimum(rho)
    return {
        "purity": st.purity(rho),
        "mean_photon": st.mean_photon(rho),
        "w_min": w,
        "x_min": pt.x,
        "p_min": pt.p,
    }


def _print_summary(values: dict):
    print(" ".join(f"{k}={_fmt(v) if isinstance(v, float) else v}" for k, v in values.items()))


def _descriptor(spec: StateSpec) -> str:
    return " ".join(f"{k}={v}" for k, v in asdict(spec).items())


def _sweep(cfg: SweepConfig) -> list:
    if cfg.step <= 0 or not 0 <= cfg.stop <= cfg.start <= 1:
        raise ConfigError("sweep needs 1 >= start >= stop >= 0 and step > 0")
    n = int(math.floor((cfg.start - cfg.stop) / cfg.step + 1e-9)) + 1
    return [round(cfg.start - i * cfg.step, 12) for i in range(n)]


def cmd_state(cfg: ScenarioConfig) -> int:
    rho = build_state(cfg.state)
    _write(Path(cfg.out), "state.json", rho.to_json())
    _print_summary(_summary(rho))
    return 0


def cmd_channel(cfg: ScenarioConfig) -> int:
    rho = apply_channel(build_state(cfg.state), cfg.channel)
    _write(Path(cfg.out), "channel_state.json", rho.to_json())
    _print_summary({"eta": float(cfg.channel.eta), **_summary(rho)})
    return 0


def cmd_wigner(cfg: ScenarioConfig) -> int:
    rho = apply_channel(build_state(cfg.state), cfg.channel)
    hw = cfg.half_width
    grid = wigner_grid(rho, (-hw, hw, -hw, hw), cfg.nodes, cfg.nodes)
    out = Path(cfg.out)
    _write(out, "wigner.csv", grid.to_csv())
    ps, cut = grid.cross_section(x=0.0)
    _write(out, "wigner_cut_x0.csv", cross_section_csv(ps, cut, "p"))
    _print_summary({"integral": grid.integral(), **_summary(rho)})
    return 0


def cmd_decay(cfg: ScenarioConfig) -> int:
    etas = _sweep(cfg.sweep)
    squeezed_spec = cfg.state
    plain_spec = StateSpec(**{**asdict(cfg.state), "s_db": 0.0})
    out = Path(cfg.out)
    curves = {}
    for label, spec in (("squeezed", squeezed_spec), ("plain", plain_spec)):
        curve = decay_curve(build_state(spec), etas, "pure_loss", _descriptor(spec))
        curves[label] = curve
        _write(out, f"decay_{label}.csv", curve.to_csv())
        _write(out, f"decay_{label}.json", curve.sidecar_json())
    plain = {p.eta: p.rd for p in curves["plain"].points}
    rows = []
    for p in curves["squeezed"].points:
        if p.eta in plain:
            rows.append((p.eta, plain[p.eta], p.rd, plain[p.eta] / p.rd))
    _write(out, "decay_report.csv", _csv_text([_descriptor(squeezed_spec)], ["eta", "rd_plain", "rd_squeezed", "factor"], rows))
    near = min(rows, key=lambda r: (abs(r[0] - 0.8), -r[0])) if rows else None
    report = {"points": len(rows)}
    if near is not None:
        report.update({"eta_ref": near[0], "factor": near[3]})
    for label, curve in curves.items():
        if curve.positivity_threshold is not None:
            report[f"threshold_{label}"] = curve.positivity_threshold
    _print_summary(report)
    return 0


def _alpha2_grid(f: Fig2Config) -> list:
    n = int(math.floor((f.alpha2_max - f.alpha2_min) / f.alpha2_step + 1e-9)) + 1
    return [round(f.alpha2_min + i * f.alpha2_step, 12) for i in range(n)]


def cmd_fig2(cfg: ScenarioConfig) -> int:
    f = cfg.fig2
    rows = []
    for a2 in _alpha2_grid(f):
        rho = st.cat(math.sqrt(a2), f.fig2_parity, cfg.state.dim)
        res = optimal_squeezing(rho, 1.0, f.objective, s_max=f.s_max, step=f.s_step)
        rows.append((a2, res.plain_value, res.value, res.params.s_db))
    out = Path(cfg.out)
    head = [f"parity={f.fig2_parity} eta=1 objective={f.objective}"]
    _write(out, "fig2.csv", _csv_text(head, ["alpha2", "rd_plain", "rd_opt", "s_opt"], rows))
    ladder = fock_rd_ladder(f.n_max)
    _write(out, "fig2_fock.csv", _csv_text(["Fock reference lines, eta=1"], ["n", "rd"], [(n + 1, v) for n, v in enumerate(ladder)]))
    ordered = all(r[2] < r[1] for r in rows)
    _print_summary({"rows": len(rows), "ordered": ordered, "rd_fock1": ladder[0]})
    return 0


def cmd_optimize(cfg: ScenarioConfig) -> int:
    spec = StateSpec(**{**asdict(cfg.state), "s_db": 0.0})
    rho = build_state(spec)
    f = cfg.fig2
    res = optimal_squeezing(rho, cfg.channel.eta, f.objective, s_max=f.s_max, step=f.s_step)
    rows = [(float(s), float(v)) for s, v in zip(res.scan_s_db, res.scan_values)]
    head = [_descriptor(spec), f"eta={cfg.channel.eta} objective={f.objective}"]
    _write(Path(cfg.out), "optimize_scan.csv", _csv_text(head, ["s_db", "value"], rows))
    _print_summary(
        {
            "s_opt": res.params.s_db,
            "angle": res.params.angle,
            "value": res.value,
            "plain_value": res.plain_value,
            "dw_dg": res.dw_dg,
            "degenerate": res.degenerate,
        }
    )
    return 0


def cmd_tomo(cfg: ScenarioConfig) -> int:
    t = cfg.tomo
    truth = build_state(cfg.state)
    mode = tm.TemporalMode(t.gamma, t.delay_tau)
    eta_eff = tm.effective_eta(mode)
    delayed = tm.delayed_mode_state(truth, mode)
    detected = pure_loss(delayed, t.efficiency)
    per_phase = int(math.ceil(t.samples / t.phases))
    data = tm.sample_homodyne(detected, tm.default_phases(t.phases), per_phase, cfg.seed, _descriptor(cfg.state))
    efficiency = t.efficiency if t.correct else 1.0
    rec = tm.maxlik_reconstruct(data, tm.TomographyConfig(dim=t.tomo_dim, efficiency=efficiency))
    reference = delayed if t.correct else detected
    fid = tm.compare_fidelity(rec.state, reference)
    _, w_rec = wigner_minimum(rec.state)
    _, w_ref = wigner_minimum(reference)
    out = Path(cfg.out)
    _write(out, "tomo_samples.csv", data.to_csv())
    _write(out, "tomo_state.json", rec.state.to_json())
    report = {
        "fidelity": fid,
        "eta_eff": eta_eff,
        "w_min_reconstructed": w_rec,
        "w_min_reference": w_ref,
        **rec.report(),
    }
    _write(out, "tomo_report.json", json.dumps(report, indent=2, sort_keys=True))
    _print_summary({k: report[k] for k in ("fidelity", "eta_eff", "w_min_reconstructed", "w_min_reference", "converged", "iterations")})
    return 0


COMMANDS = {
    "state": cmd_state,
    "channel": cmd_channel,
    "wigner": cmd_wigner,
    "decay": cmd_decay,
    "fig2": cmd_fig2,
    "optimize": cmd_optimize,
    "tomo": cmd_tomo,
}


class _Parser(argparse.ArgumentParser):
    """Routes usage errors through the JSON error path instead of printing usage."""

    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--config", help="JSON scenario file")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("--dim", type=int, help="Fock cutoff")

    s = common.add_argument_group("state")
    s.add_argument("--kind", choices=["fock", "vacuum", "coherent", "cat", "thermal", "superposition"])
    s.add_argument("--alpha2", type=float)
    s.add_argument("--parity", choices=["even", "odd"])
    s.add_argument("--squeeze-db", dest="s_db", type=float)
    s.add_argument("--angle", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--nbar", type=float)
    s.add_argument("--coeffs", type=lambda v: [complex(c) for c in v.split(",")])

    c = common.add_argument_group("channel")
    c.add_argument("--eta", type=float)
    c.add_argument("--env-db", type=float)
    c.add_argument("--phase", type=float)
    c.add_argument("--eta-start", dest="start", type=float)
    c.add_argument("--eta-stop", dest="stop", type=float)
    c.add_argument("--eta-step", dest="step", type=float)

    w = common.add_argument_group("wigner")
    w.add_argument("--nodes", type=int)
    w.add_argument("--half-width", type=float)

    f = common.add_argument_group("optimization")
    f.add_argument("--alpha2-min", type=float)
    f.add_argument("--alpha2-max", type=float)
    f.add_argument("--alpha2-step", type=float)
    f.add_argument("--n-max", type=int)
    f.add_argument("--fig2-parity", choices=["even", "odd"])
    f.add_argument("--s-max", type=float)
    f.add_argument("--s-step", type=float)
    f.add_argument("--objective", choices=["min_rd", "min_w_value"])

    t = common.add_argument_group("tomography")
    t.add_argument("--samples", type=int)
    t.add_argument("--phases", type=int)
    t.add_argument("--efficiency", type=float)
    t.add_argument("--correct", action="store_true", default=None)
    t.add_argument("--tomo-dim", type=int)
    t.add_argument("--delay-tau", type=float)
    t.add_argument("--gamma", type=float)

    parser = _Parser(prog="catsqueeze", description="Squeezing protection of cat-state negativity.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMANDS[name].__name__.removeprefix("cmd_"))
    return parser


def _fail(code: int, exc: BaseException) -> int:
    msg = json.dumps({"exit": code, "error": type(exc).__name__, "message": str(exc).replace("\n", " ")})
    print(msg, file=sys.stderr)
    return code


def load_document(path: str) -> dict:
    """Read a JSON or TOML (by ``.toml`` suffix) scenario document."""
    try:
        text = Path(path).read_text()
        document = tomllib.loads(text) if path.endswith(".toml") else json.loads(text)
    except (OSError, json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError("config must be an object at top level")
    return document


def main(argv=None) -> int:
    try:
        args = vars(_parser().parse_args(argv))
        command = args.pop("command")
        config_path = args.pop("config")
        document = load_document(config_path) if config_path else {}
        cfg = ScenarioConfig.build(document, args)
        np.seterr(all="ignore")
        return COMMANDS[command](cfg)
    except (TruncationError, NoNegativityError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    except (ValueError, TypeError, KeyError) as exc:
        return _fail(EXIT_CONFIG, exc)


if __name__ == "__main__":
    sys.exit(main())
