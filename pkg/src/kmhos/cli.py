"""Command-line interface: ``kmhos {hos,metrics,validate,convergence}``.

Settings come from, in increasing priority, a named preset (``--preset``),
a flat ``key = value`` config file (``--config``) and command-line flags.
SNRs are given in dB here and converted to linear scale before reaching
the library.

Exit codes: 0 success, 1 validation failure, 2 usage/config error,
3 numerical failure (rows are still emitted, with diagnostics in ``notes``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConvergenceError, DegenerateError, DivergenceError, DomainError
from .fading import (
    BandParams,
    ChannelModel,
    CorrelatedKappaMuShadowed,
    CorrelationSpec,
    IidKappaMu,
    IidKappaMuShadowed,
    InidKappaMu,
    ShadowParams,
    at_snr,
)
from .hos import hos_exact, hos_high_snr, hos_low_snr, hos_oracle
from .mcsim import SimConfig, estimate_hos_orders, model_sampler
from .metrics import aod_peak, metrics
from .series import SeriesControl

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
COLUMNS = ("model", "snr_db", "n", "regime", "value", "terms", "tail", "notes")
MODELS = ("iid-km", "inid-km", "iid-kms", "corr-kms")
NUMERIC_ERRORS = (ConvergenceError, DegenerateError, DomainError, ArithmeticError)

KEYS = (
    "model", "kappa", "mu", "omega_db", "gamma_bar_db", "m", "M", "rho", "rho_matrix_file",
    "xi", "beta", "orders", "snr_db", "tol", "max_terms", "samples", "seed", "streams",
    "workers", "out", "format", "inid_sweep", "regimes", "peak", "layout", "quad_tol", "rel_tol",
)

# Parameter sets of the published tables and figures.  Table presets carry
# ``sets``: one override dict per column group.
PRESETS: dict[str, dict] = {
    "fig2": dict(model="iid-km", kappa="1", mu="1", M="3", orders="1,2,3,4", snr_db="-30:30:2"),
    "fig3": dict(model="inid-km", kappa="2.5,3.5,4.75", mu="1,1,2", omega_db="0,1,1", orders="1,2,3,4",
                 snr_db="0:24:1", inid_sweep="first", peak="true", max_terms="50000"),
    "fig3-m1": dict(model="iid-km", kappa="2.5", mu="1", M="1", orders="1,2,3,4", snr_db="0:20:1", peak="true"),
    "fig4": dict(model="iid-kms", kappa="2", mu="2", m="1", M="1", snr_db="-10:20:2"),
    "fig4-m3": dict(model="iid-kms", kappa="2", mu="2", m="1", M="3", snr_db="-10:20:2"),
    "fig5": dict(model="iid-kms", kappa="1", mu="2", m="1", M="2", snr_db="-10:20:2"),
    "fig5-m2": dict(model="iid-kms", kappa="1", mu="2", m="2", M="2", snr_db="-10:20:2"),
    "fig6": dict(model="corr-kms", kappa="1", mu="2", m="1", M="3", rho="0.5", snr_db="-10:20:2",
                 max_terms="50000"),
    "table1": dict(model="iid-km", M="3", tol="1e-5", orders="1,4", snr_db="-10,0,10", layout="table",
                   sets=[dict(kappa="1", mu="1"), dict(kappa="1", mu="2"), dict(kappa="2", mu="1")]),
    "table2": dict(model="corr-kms", kappa="1,5", mu="1,2", m="1", M="2", tol="1e-3", orders="1,2",
                   snr_db="-10,0,10", layout="table", max_terms="50000",
                   sets=[dict(rho="0.9"), dict(rho="0.5"), dict(rho="0.1")]),
}


class ConfigError(ValueError):
    """Invalid configuration (exit code 2)."""


# ---------------------------------------------------------------- config parsing


def read_config_file(path: str) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS and key != "preset":
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _floats(text, name: str) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    parts = [p for p in str(text).replace(" ", ",").split(",") if p]
    if not parts:
        raise ConfigError(f"{name}: empty list")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r} as numbers") from None


def _float(cfg: dict, key: str, default=None) -> float | None:
    if cfg.get(key) in (None, ""):
        return default
    vals = _floats(cfg[key], key)
    if len(vals) != 1:
        raise ConfigError(f"{key}: expected a single number")
    return vals[0]


def _int(cfg: dict, key: str, default=None) -> int | None:
    v = _float(cfg, key)
    if v is None:
        return default
    if v != int(v):
        raise ConfigError(f"{key}: expected an integer")
    return int(v)


def _bool(cfg: dict, key: str) -> bool:
    v = str(cfg.get(key) or "false").lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false")


def parse_orders(text) -> list[int]:
    if text is None or str(text).strip() == "":
        raise ConfigError("orders: empty list")
    vals = _floats(text, "orders")
    if any(v != int(v) or v < 0 for v in vals):
        raise ConfigError("orders must be nonnegative integers")
    return [int(v) for v in vals]


def parse_grid(text) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list of dB values."""
    s = str(text).strip()
    if not s:
        raise ConfigError("snr_db: empty grid")
    if ":" in s:
        try:
            start, stop, step = (float(p) for p in s.split(":"))
        except ValueError:
            raise ConfigError(f"snr_db: expected start:stop:step, got {s!r}") from None
        if not step > 0:
            raise ConfigError("snr_db: step must be > 0")
        if start > stop:
            raise ConfigError("snr_db: start must be <= stop")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    return _floats(s, "snr_db")


def _broadcast(vals: list[float], M: int, name: str) -> list[float]:
    if len(vals) == 1:
        return vals * M
    if len(vals) != M:
        raise ConfigError(f"{name}: expected 1 or {M} values, got {len(vals)}")
    return vals


def _db(x: float) -> float:
    return 10.0 ** (x / 10.0)


def build_model(cfg: dict) -> tuple[ChannelModel, float]:
    """Channel model and its nominal SNR in dB from a config dict."""
    kind = cfg.get("model")
    if kind not in MODELS:
        raise ConfigError(f"model must be one of {', '.join(MODELS)}")
    if cfg.get("kappa") in (None, "") or cfg.get("mu") in (None, ""):
        raise ConfigError("kappa and mu are required")
    kappa = _floats(cfg["kappa"], "kappa")
    mu = _floats(cfg["mu"], "mu")
    try:
        if kind in ("iid-km", "iid-kms"):
            if len(kappa) != 1 or len(mu) != 1:
                raise ConfigError(f"{kind}: kappa and mu must be single values")
            M = _int(cfg, "M", 1)
            if kind == "iid-km":
                snr = _float(cfg, "omega_db", 0.0)
                return IidKappaMu(BandParams(kappa[0], mu[0], _db(snr)), M), snr
            snr = _float(cfg, "gamma_bar_db", 0.0)
            shadow = ShadowParams(_float(cfg, "m", 1.0))
            return IidKappaMuShadowed(BandParams(kappa[0], mu[0]), shadow, M, _db(snr)), snr
        M = _int(cfg, "M", max(len(kappa), len(mu)))
        kappa, mu = _broadcast(kappa, M, "kappa"), _broadcast(mu, M, "mu")
        if kind == "inid-km":
            om = _broadcast(_floats(cfg.get("omega_db") or "0", "omega_db"), M, "omega_db")
            bands = tuple(BandParams(k, u, _db(o)) for k, u, o in zip(kappa, mu, om))
            return InidKappaMu(bands, xi=_float(cfg, "xi"), beta=_float(cfg, "beta")), om[0]
        snr = _float(cfg, "gamma_bar_db", 0.0)
        if cfg.get("rho_matrix_file"):
            try:
                mat = np.atleast_2d(np.loadtxt(cfg["rho_matrix_file"], dtype=float))
            except (OSError, ValueError) as exc:
                raise ConfigError(f"rho_matrix_file: {exc}") from None
            corr = CorrelationSpec(rho_matrix=mat)
        elif cfg.get("rho") not in (None, ""):
            corr = CorrelationSpec(exponential=_float(cfg, "rho"))
        else:
            raise ConfigError("corr-kms needs rho or rho_matrix_file")
        bands = tuple(BandParams(k, u) for k, u in zip(kappa, mu))
        return CorrelatedKappaMuShadowed(bands, ShadowParams(_float(cfg, "m", 1.0)), corr, _db(snr)), snr
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def series_control(cfg: dict) -> SeriesControl:
    try:
        return SeriesControl(tol=_float(cfg, "tol", 1e-5), max_terms=_int(cfg, "max_terms", 500))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def sim_config(cfg: dict) -> SimConfig:
    kw = {k: _int(cfg, k) for k in ("samples", "seed", "streams", "workers")}
    try:
        return SimConfig(**{k: v for k, v in kw.items() if v is not None})
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(f"{v:.12g}") if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def render(records: Sequence[dict], fmt: str, columns: Sequence[str] = COLUMNS) -> str:
    """Serialize records as CSV (fixed columns, header always present) or JSON."""
    if fmt == "json":
        return json.dumps([{c: _json_value(r.get(c)) for c in columns} for r in records], indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _emit(text: str, cfg: dict) -> None:
    out = cfg.get("out")
    if out in (None, "", "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _record(model: str, snr, n, regime, value=None, terms=None, tail=None, notes="") -> dict:
    return dict(model=model, snr_db=snr, n=n, regime=regime, value=value, terms=terms, tail=tail, notes=notes)


def _pmap(fn: Callable, items: Iterable, workers: int) -> list:
    """Order-preserving map, optionally on a thread pool."""
    items = list(items)
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- commands

REGIME_FUNCS = {"exact": hos_exact, "high": hos_high_snr, "low": hos_low_snr}


def cmd_hos(cfg: dict) -> int:
    model, nominal = build_model(cfg)
    orders = parse_orders(cfg.get("orders", "1"))
    grid = parse_grid(cfg["snr_db"]) if "snr_db" in cfg else [nominal]
    regimes = [r for r in str(cfg.get("regimes") or "exact,high,low").split(",") if r]
    if not regimes or any(r not in REGIME_FUNCS for r in regimes):
        raise ConfigError("regimes must be a list drawn from exact, high, low")
    ctrl = series_control(cfg)
    mode = cfg.get("inid_sweep") or "first"
    tasks = [(s, n, r) for s in grid for n in orders for r in regimes]

    def run(task):
        s, n, r = task
        try:
            res = REGIME_FUNCS[r](at_snr(model, s, mode), n, ctrl)
            return _record(cfg["model"], s, n, r, res.value, res.terms_used, res.tail_estimate), False
        except DivergenceError as exc:
            # asymptotic expansion outside its range: reported, not a failure of the exact path
            return _record(cfg["model"], s, n, r, notes=f"diverges: {exc}"), r == "exact"
        except NUMERIC_ERRORS as exc:
            return _record(cfg["model"], s, n, r, notes=f"{type(exc).__name__}: {exc}"), True

    out = _pmap(run, tasks, _int(cfg, "workers", 1))
    _emit(render([r for r, _ in out], cfg.get("format") or "csv"), cfg)
    return EXIT_NUMERIC if any(bad for _, bad in out) else EXIT_OK


METRIC_FIELDS = ("ergodic", "variance", "aof", "aod", "reliability", "skewness", "kurtosis")


def cmd_metrics(cfg: dict) -> int:
    model, nominal = build_model(cfg)
    grid = parse_grid(cfg["snr_db"]) if "snr_db" in cfg else [nominal]
    ctrl = series_control(cfg)
    mode = cfg.get("inid_sweep") or "first"

    def run(s):
        try:
            m = metrics(at_snr(model, s, mode), ctrl)
            return [_record(cfg["model"], s, None, f, getattr(m, f)) for f in METRIC_FIELDS], False
        except NUMERIC_ERRORS as exc:
            return [_record(cfg["model"], s, None, "metrics", notes=f"{type(exc).__name__}: {exc}")], True

    out = _pmap(run, grid, _int(cfg, "workers", 1))
    records = [r for rows, _ in out for r in rows]
    failed = any(bad for _, bad in out)
    if _bool(cfg, "peak"):
        try:
            s, aod, rel = aod_peak(lambda x: at_snr(model, x, mode), grid, ctrl)
            records.append(_record(cfg["model"], s, None, "aod_peak", aod, notes=f"reliability={rel:.12g}"))
        except NUMERIC_ERRORS as exc:
            records.append(_record(cfg["model"], None, None, "aod_peak", notes=f"{type(exc).__name__}: {exc}"))
            failed = True
    _emit(render(records, cfg.get("format") or "csv"), cfg)
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_validate(cfg: dict) -> int:
    """Three-way check: series vs quadrature (rel_tol) vs Monte-Carlo (3 sigma)."""
    model, _ = build_model(cfg)
    orders = parse_orders(cfg["orders"] if "orders" in cfg else "1,2,3,4")
    grid = parse_grid(cfg["snr_db"] if "snr_db" in cfg else "-10,0,10")
    ctrl = series_control(cfg)
    sim = sim_config(cfg)
    rel_tol = _float(cfg, "rel_tol", 1e-4)
    quad_tol = _float(cfg, "quad_tol", 1e-10)
    mode = cfg.get("inid_sweep") or "first"
    name = cfg["model"]
    records, any_fail, numeric = [], False, False
    for s in grid:
        mdl = at_snr(model, s, mode)
        try:
            mc = estimate_hos_orders(model_sampler(mdl), orders, sim)
        except DomainError as exc:
            mc, mc_note = None, f"no sampler: {exc}"
        for n in orders:
            notes = []
            try:
                ex = hos_exact(mdl, n, ctrl)
                records.append(_record(name, s, n, "exact", ex.value, ex.terms_used, ex.tail_estimate))
            except NUMERIC_ERRORS as exc:
                records.append(_record(name, s, n, "exact", notes=f"{type(exc).__name__}: {exc}"))
                numeric = any_fail = True
                continue
            row = records[-1]
            try:
                orc = hos_oracle(mdl, n, quad_tol)
                records.append(_record(name, s, n, "oracle", orc.value, None, orc.tail_estimate))
                rel = abs(ex.value - orc.value) / max(abs(orc.value), 1e-300)
                ok = rel < rel_tol
                notes.append(f"rel_oracle={rel:.3g}")
            except NUMERIC_ERRORS as exc:
                records.append(_record(name, s, n, "oracle", notes=f"{type(exc).__name__}: {exc}"))
                numeric, ok = True, False
            if mc is not None:
                e = mc[n]
                records.append(_record(name, s, n, "mc", e.mean, e.samples_used, e.std_error, "tail=std_error"))
                if e.std_error > 0:
                    z = (ex.value - e.mean) / e.std_error
                    notes.append(f"z_mc={z:.3g}")
                    ok = ok and abs(z) < 3
                else:
                    ok = ok and ex.value == e.mean
            else:
                notes.append(mc_note)
            if ex.terms_used >= ctrl.max_terms:
                notes.append("term cap reached")
            notes.append("pass" if ok else "FAIL")
            any_fail |= not ok
            row["notes"] = ";".join(notes)
    _emit(render(records, cfg.get("format") or "csv"), cfg)
    if numeric:
        return EXIT_NUMERIC
    return EXIT_VALIDATION if any_fail else EXIT_OK


def cmd_convergence(cfg: dict) -> int:
    """Term counts; ``layout=table`` emits the SNR x (n, parameter set) matrix."""
    orders = parse_orders(cfg["orders"] if "orders" in cfg else "1")
    grid = parse_grid(cfg["snr_db"] if "snr_db" in cfg else "-10,0,10")
    sets = cfg.get("sets") or [{}]
    mode = cfg.get("inid_sweep") or "first"
    records, failed, columns = [], False, []
    counts: dict = {}
    for si, over in enumerate(sets):
        sub = {**cfg, **over}
        model, _ = build_model(sub)
        ctrl = series_control(sub)
        label = " ".join(f"{k}={v}" for k, v in over.items())
        for n in orders:
            columns.append((n, si, label))
            for s in grid:
                try:
                    res = hos_exact(at_snr(model, s, mode), n, ctrl)
                    rec = _record(cfg["model"], s, n, "exact", res.value, res.terms_used, res.tail_estimate, label)
                except NUMERIC_ERRORS as exc:
                    rec = _record(cfg["model"], s, n, "exact", notes=f"{label} {type(exc).__name__}: {exc}".strip())
                    failed = True
                records.append(rec)
                counts[(n, si, s)] = rec["terms"]
    fmt = cfg.get("format") or "csv"
    if (cfg.get("layout") or "records") == "table":
        columns.sort(key=lambda c: (c[0], c[1]))
        heads = ["snr_db"] + [f"n={n} {lab}".strip() for n, _, lab in columns]
        rows = [dict(zip(heads, [s] + [counts[(n, si, s)] for n, si, _ in columns])) for s in grid]
        _emit(render(rows, fmt, heads), cfg)
    else:
        _emit(render(records, fmt), cfg)
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {"hos": cmd_hos, "metrics": cmd_metrics, "validate": cmd_validate, "convergence": cmd_convergence}


# ---------------------------------------------------------------- argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration")
    g.add_argument("--config", help="flat key = value file; flags override it")
    g.add_argument("--preset", choices=sorted(PRESETS), help="start from a published parameter set")
    g = common.add_argument_group("model")
    g.add_argument("--model", choices=MODELS)
    g.add_argument("--kappa", help="kappa value or comma list (one per band)")
    g.add_argument("--mu", help="mu value or comma list")
    g.add_argument("--omega-db", dest="omega_db", help="per-band mean SNR in dB (kappa-mu models)")
    g.add_argument("--gamma-bar-db", dest="gamma_bar_db", help="total mean SNR in dB (shadowed models)")
    g.add_argument("--m", dest="m", help="shadowing shape m")
    g.add_argument("--M", dest="M", help="number of bands")
    g.add_argument("--rho", help="exponential correlation coefficient (rho^|p-q|)")
    g.add_argument("--rho-matrix-file", dest="rho_matrix_file", help="whitespace-separated M x M matrix")
    g.add_argument("--xi", help="i.n.i.d. expansion parameter xi (default U)")
    g.add_argument("--beta", help="i.n.i.d. expansion parameter beta (default min a_i)")
    g = common.add_argument_group("evaluation")
    g.add_argument("--orders", help="comma list of orders n")
    g.add_argument("--snr-db", dest="snr_db", help="start:stop:step or comma list in dB")
    g.add_argument("--inid-sweep", dest="inid_sweep", choices=("first", "all"),
                   help="i.n.i.d. sweeps set Omega_1 only (first) or scale all bands (all)")
    g.add_argument("--tol", help="series truncation tolerance")
    g.add_argument("--max-terms", dest="max_terms", help="series term cap")
    g.add_argument("--workers", help="threads for sweep points and Monte-Carlo streams")
    g = common.add_argument_group("Monte-Carlo")
    g.add_argument("--samples")
    g.add_argument("--seed")
    g.add_argument("--streams")
    g = common.add_argument_group("output")
    g.add_argument("--out", help="output path (default stdout)")
    g.add_argument("--format", choices=("csv", "json"))

    p = argparse.ArgumentParser(prog="kmhos", description="Higher-order capacity statistics over kappa-mu fading sums.")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("hos", parents=[common], help="Lambda_n, exact and asymptotic")
    sp.add_argument("--regimes", help="comma list from exact, high, low (default all)")
    sp = sub.add_parser("metrics", parents=[common], help="AoF, AoD, reliability, skewness, kurtosis")
    sp.add_argument("--peak", action="store_const", const="true", help="append the AoD peak row")
    sp = sub.add_parser("validate", parents=[common], help="series vs quadrature vs Monte-Carlo")
    sp.add_argument("--rel-tol", dest="rel_tol", help="series/quadrature tolerance (default 1e-4)")
    sp.add_argument("--quad-tol", dest="quad_tol", help="quadrature tolerance (default 1e-10)")
    sp = sub.add_parser("convergence", parents=[common], help="series term counts")
    sp.add_argument("--layout", choices=("records", "table"))
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    file_cfg = read_config_file(args.config) if args.config else {}
    preset = args.preset or file_cfg.pop("preset", None)
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        cfg.update(PRESETS[preset])
    cfg.update(file_cfg)
    for key in KEYS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"kmhos: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
