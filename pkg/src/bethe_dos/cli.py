"""Command line front end: ``bethe-dos {coeffs,transforms,dos,mc-compare,verify}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import oracle, treewalk
from .expansion import DosValue, Expansion, ExpansionParams, dos_density, remainder_budget
from .stieltjes import AnalyticWindow, DomainError, Law, law_from_json, s_continued_all
from .treewalk import CoefficientTable, spectrum_window
from .verify import run_checks

log = logging.getLogger("bethe_dos")

COMMANDS = ("coeffs", "transforms", "dos", "mc-compare", "verify")


@dataclass
class RunConfig:
    command: str = "dos"
    law: dict = field(default_factory=lambda: {"law": "uniform", "a": 1.0})
    window: dict = field(default_factory=lambda: {"I": [-0.5, 0.5], "delta0": 0.3, "delta": 0.15})
    q: int = 2
    lam: float = 100.0
    order: int = 3
    grid_points: int = 101
    xi_range: Optional[Tuple[float, float]] = None
    zeta: Tuple[float, float] = (0.0, 0.4)
    depth: int = 20
    samples: int = 100_000
    seed: int = 42
    stderr_ceiling: Optional[float] = None
    sharp_norm: bool = False
    out: Optional[str] = None
    format: Optional[str] = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if self.grid_points < 1:
            raise ValueError("grid needs at least one point")

    def window_obj(self) -> AnalyticWindow:
        return AnalyticWindow.from_json(self.window)

    def law_obj(self) -> Law:
        return law_from_json(self.law, self.window_obj())

    def xi_grid(self) -> np.ndarray:
        b1, b2 = self.window_obj().I
        if self.xi_range is None:
            return np.linspace(b1, b2, self.grid_points + 2)[1:-1]
        lo, hi = self.xi_range
        if not (b1 < lo <= hi < b2):
            raise DomainError(f"grid [{lo}, {hi}] must lie strictly inside I=({b1}, {b2})")
        return np.linspace(lo, hi, self.grid_points)


# --- formatting -------------------------------------------------------------------

def fmt(x: float) -> str:
    """17 significant digits, scientific."""
    return f"{float(x):.16e}"


def dos_header(order: int) -> List[str]:
    return ["xi", "E", "value", "remainder_bound", "rigorous"] + [f"a{n}" for n in range(0, order + 1, 2)]


def dos_to_csv(rows: Sequence[DosValue], order: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(dos_header(order))
    for d in rows:
        w.writerow([fmt(d.xi), fmt(d.energy), fmt(d.value), fmt(d.remainder_bound),
                    "true" if d.rigorous else "false"]
                   + [fmt(d.coefficients[n]) for n in range(0, order + 1, 2)])
    return buf.getvalue()


def dos_from_csv(text: str, lam: Optional[float] = None) -> List[DosValue]:
    """Parse a sweep back into ``DosValue`` records.

    A sweep shares one ``lambda``; it is recovered from ``E / xi`` on any row with
    ``xi != 0`` unless given.  ``terms`` are rebuilt as ``lam**(-n-1) a_n``; the
    quadrature estimate is not part of the CSV and comes back as 0.
    """
    reader = csv.DictReader(io.StringIO(text))
    cols = [c for c in reader.fieldnames if c.startswith("a")]
    order = max(int(c[1:]) for c in cols)
    records = list(reader)
    if lam is None:
        ratios = [float(r["E"]) / float(r["xi"]) for r in records if float(r["xi"]) != 0.0]
        lam = ratios[0] if ratios else float("nan")
    out = []
    for r in records:
        a = tuple(float(r[f"a{n}"]) if n % 2 == 0 else 0.0 for n in range(order + 1))
        out.append(DosValue(xi=float(r["xi"]), lam=lam,
                            terms=tuple(lam ** (-n - 1) * an for n, an in enumerate(a)),
                            value=float(r["value"]), remainder_bound=float(r["remainder_bound"]),
                            rigorous=r["rigorous"] == "true", coefficients=a))
    return out


def dos_to_json(rows: Sequence[DosValue]) -> str:
    return json.dumps([
        {"xi": d.xi, "lambda": d.lam, "E": d.energy, "value": d.value,
         "remainder_bound": d.remainder_bound, "rigorous": d.rigorous, "a": list(d.coefficients),
         "terms": list(d.terms), "numerical_error": d.numerical_error}
        for d in rows
    ], indent=1)


def dos_from_json(text: str) -> List[DosValue]:
    return [
        DosValue(xi=r["xi"], lam=r["lambda"], terms=tuple(r["terms"]), value=r["value"],
                 remainder_bound=r["remainder_bound"], rigorous=r["rigorous"],
                 coefficients=tuple(r["a"]), numerical_error=r["numerical_error"])
        for r in json.loads(text)
    ]


def transforms_from_text(text: str) -> Tuple[np.ndarray, np.ndarray]:
    """Inverse of the ``transforms`` output: ``(xi, s)`` with ``s[k-1, i] = s_k(xi_i)``."""
    if text.lstrip().startswith("["):
        recs = json.loads(text)
        xs = np.array([r["xi"] for r in recs])
        vals = np.array([[complex(re, im) for re, im in r["s"]] for r in recs]).T
        return xs, vals
    rows = list(csv.DictReader(io.StringIO(text)))
    xs = np.array(sorted({float(r["xi"]) for r in rows}))
    kmax = max(int(r["k"]) for r in rows)
    vals = np.empty((kmax, xs.shape[0]), dtype=complex)
    pos = {x: i for i, x in enumerate(xs)}
    for r in rows:
        vals[int(r["k"]) - 1, pos[float(r["xi"])]] = complex(float(r["re"]), float(r["im"]))
    return xs, vals


# --- commands -------------------------------------------------------------------

def cmd_coeffs(n_max: int) -> dict:
    table = CoefficientTable.build(n_max)
    return {"n_max": n_max, "rows": table.to_json_rows()}


def cmd_transforms(cfg: RunConfig) -> str:
    window, law = cfg.window_obj(), cfg.law_obj()
    xs = cfg.xi_grid()
    kmax = cfg.order + 1
    vals = s_continued_all(law, kmax, xs + 0j, window)
    if (cfg.format or "csv") == "json":
        return json.dumps([
            {"xi": float(x), "s": [[v.real, v.imag] for v in vals[:, i]]} for i, x in enumerate(xs)
        ], indent=1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["xi", "k", "re", "im"])
    for i, x in enumerate(xs):
        for k in range(1, kmax + 1):
            v = vals[k - 1, i]
            w.writerow([fmt(x), k, fmt(v.real), fmt(v.imag)])
    return buf.getvalue()


def _spectrum_check(cfg: RunConfig, law: Law, window: AnalyticWindow) -> None:
    lo, hi = spectrum_window(cfg.q, cfg.lam, law.support)
    b1, b2 = window.I
    if not (lo <= cfg.lam * b1 and cfg.lam * b2 <= hi):
        log.warning("lambda*I = [%g, %g] is not inside the spectrum [%g, %g]",
                    cfg.lam * b1, cfg.lam * b2, lo, hi)


def cmd_dos(cfg: RunConfig) -> Tuple[List[DosValue], str]:
    window, law = cfg.window_obj(), cfg.law_obj()
    _spectrum_check(cfg, law, window)
    params = ExpansionParams(cfg.q, cfg.lam, cfg.order, window, law, cfg.sharp_norm)
    exp = Expansion(law, window, cfg.q, cfg.order)
    rows = [dos_density(params, float(x), exp) for x in cfg.xi_grid()]
    text = dos_to_json(rows) if cfg.format == "json" else dos_to_csv(rows, cfg.order)
    return rows, text


def cmd_mc_compare(cfg: RunConfig) -> dict:
    zeta = complex(*cfg.zeta)
    if not zeta.imag > 0:
        raise DomainError("mc-compare needs Im zeta > 0 (the oracle cannot reach the real axis)")
    window, law = cfg.window_obj(), cfg.law_obj()
    exp = Expansion(law, window, cfg.q, cfg.order)
    part = exp.partial(cfg.lam, zeta, cfg.order, cfg.sharp_norm)
    est = oracle.mc_average(oracle.MCConfig(
        cfg.q, cfg.lam, cfg.lam * zeta, cfg.depth, cfg.samples, cfg.seed, law,
        stderr_ceiling=cfg.stderr_ceiling))
    diff = abs(est.mean - part.value)
    return {
        "zeta": [zeta.real, zeta.imag],
        "lambda": cfg.lam,
        "q": cfg.q,
        "order": cfg.order,
        "mc": est.to_json(),
        "expansion": {"value": [part.value.real, part.value.imag],
                      "remainder_bound": part.remainder_bound, "rigorous": part.rigorous},
        "difference": diff,
        "stderr": est.stderr,
        "pass": bool(diff <= 3 * est.stderr),
        "flagged": est.flagged,
    }


def cmd_verify(table: Optional[CoefficientTable] = None, stream=None) -> int:
    stream = stream or sys.stdout
    results = run_checks(table)
    width = max(map(len, results))
    for name, (ok, detail) in results.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}", file=stream)
    failed = sum(not ok for ok, _ in results.values())
    print(f"{len(results) - failed}/{len(results)} checks passed", file=stream)
    return 0 if failed == 0 else 1


# --- argument handling ----------------------------------------------------------

_PAIR_FLAGS = ("--I", "--xi-range", "--zeta")


def _pair(text: str) -> Tuple[float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return parts[0], parts[1]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bethe-dos", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--q", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--order", type=int)
    p.add_argument("--law", choices=("uniform", "generic"))
    p.add_argument("--a", type=float)
    p.add_argument("--density", help="generic density: 'semicircle' or 'uniform'")
    p.add_argument("--I", dest="I", type=_pair)
    p.add_argument("--delta0", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--grid", dest="grid_points", type=int)
    p.add_argument("--xi-range", dest="xi_range", type=_pair)
    p.add_argument("--zeta", type=_pair, help="RE,IM of the scaled spectral parameter")
    p.add_argument("--depth", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--stderr-ceiling", dest="stderr_ceiling", type=float)
    p.add_argument("--sharp-norm", dest="sharp_norm", action="store_true", default=None,
                   help="use ||A|| = 2 sqrt(q) in the budget (non-rigorous)")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _merge_pairs(argv: Sequence[str]) -> List[str]:
    # "--I -0.5,0.5" would otherwise be read as an unknown option
    out: List[str] = []
    it = iter(range(len(argv)))
    skip = False
    for i in it:
        if skip:
            skip = False
            continue
        tok = argv[i]
        if tok in _PAIR_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            skip = True
        else:
            out.append(tok)
    return out


def config_from_args(argv: Sequence[str]) -> RunConfig:
    args = build_parser().parse_args(_merge_pairs(list(argv)))
    cfg = RunConfig(command=args.command)
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        names = {f.name for f in fields(RunConfig)}
        for k, v in data.items():
            if k not in names:
                raise ValueError(f"unknown config key {k!r}")
            setattr(cfg, k, tuple(v) if k in ("xi_range", "zeta") and v is not None else v)
    for name in ("q", "lam", "order", "grid_points", "xi_range", "zeta", "depth", "samples",
                 "seed", "stderr_ceiling", "sharp_norm", "out", "format"):
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, v)
    law = dict(cfg.law)
    if args.law is not None:
        law = {"law": args.law, **({"a": law["a"]} if "a" in law else {})}
    if args.a is not None:
        law["a"] = args.a
    if args.density is not None:
        law["density"] = args.density
    cfg.law = law
    win = dict(cfg.window)
    if args.I is not None:
        win["I"] = list(args.I)
    if args.delta0 is not None:
        win["delta0"] = args.delta0
    if args.delta is not None:
        win["delta"] = args.delta
    cfg.window = win
    cfg.validate()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    return cfg


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = config_from_args(argv)
        if cfg.command == "coeffs":
            _emit(json.dumps(cmd_coeffs(cfg.order), indent=1), cfg.out)
        elif cfg.command == "transforms":
            _emit(cmd_transforms(cfg), cfg.out)
        elif cfg.command == "dos":
            rows, text = cmd_dos(cfg)
            _emit(text, cfg.out)
            budget = remainder_budget(cfg.window_obj(), cfg.q, cfg.law_obj(), cfg.order, cfg.sharp_norm)
            print(f"lambda0={budget.lambda0:.6g} truncation bound={rows[0].remainder_bound:.3e} "
                  f"max quadrature error={max(r.numerical_error for r in rows):.3e} "
                  f"rigorous={all(r.rigorous for r in rows)}", file=sys.stderr)
        elif cfg.command == "mc-compare":
            report = cmd_mc_compare(cfg)
            _emit(json.dumps(report, indent=1, sort_keys=True), cfg.out)
            return 0 if report["pass"] else 1
        else:
            return cmd_verify()
    except (ValueError, DomainError, treewalk.OrderCapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
