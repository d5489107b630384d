"""Command-line experiment runner.

Every subcommand writes one CSV table.  The table is preceded by comment
lines holding the package version, a hash of the resolved configuration
and the configuration itself, so a file identifies the run that made it.
Settings resolve as defaults, then command-line flags, then the
``--config`` file (``key = value`` lines), the last one winning.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import sys
from typing import Callable

import numpy as np

from . import __version__
from ._rng import child_seed, run_replicates
from .diagrams import PointConfig, ad_transform_series, diagram_count_report, enumerate_diagrams, format_catalog
from .ensembles import (
    ConfigError,
    GraphSpec,
    band,
    complete,
    parse_config,
    sample_matrix,
    write_matrix_csv,
)
from .moments import (
    PolynomialFamily,
    erdos_turan_bracket,
    modified_trace_moments,
    replicate_mean,
    semicircle_moment,
    semicircle_quadrature,
    trace_power_moments,
)
from .paths import verify_nb_identity
from .spectra import (
    DEFAULT_EIG_TOL,
    EmpiricalMeasure,
    edge_value,
    eigenvalues,
    ks_two_sample,
    largest_eigenvalue,
    write_spectrum_csv,
)

__all__ = ["BAND_THETAS", "ks_critical_value", "main", "run"]

BAND_THETAS = (0.5, 0.6, 0.7, 5.0 / 6.0, 0.9)

# config keys that name ensemble settings with a dotted prefix
_ALIASES = {
    "ensemble.kind": "ensemble",
    "ensemble.n": "n",
    "ensemble.w": "w",
    "diag.kind": "diag",
    "offdiag.kind": "offdiag",
    "statistics.replicates": "replicates",
    "statistics.seed": "seed",
}


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _points(text: str) -> tuple[tuple[float, ...], ...]:
    return tuple(_floats(p) for p in str(text).split(";") if p.strip())


def _flag(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_COMMON = {"seed": (int, 1), "threads": (int, 1), "out": (str, "-"), "eig_tol": (float, DEFAULT_EIG_TOL), "eig_method": (str, "lapack")}
_ENSEMBLE = {
    "ensemble": (str, "complete"),
    "n": (int, 1000),
    "w": (int, 0),
    "diag": (str, "zero"),
    "offdiag": (str, "rademacher"),
}

_SETTINGS: dict[str, dict[str, tuple[Callable, object]]] = {
    "gen": {**_ENSEMBLE, "n": (int, 10), "spectrum": (_flag, False)},
    "moments": {**_ENSEMBLE, "replicates": (int, 200), "m_max": (int, 8), "kappa": (int, 0)},
    "modified-moments": {**_ENSEMBLE, "replicates": (int, 200), "n_max": (int, 6), "family": (str, "nb"), "kappa": (int, 0)},
    "edge-mc": {**_ENSEMBLE, "n": (int, 400), "compare": (str, "real_gaussian"), "replicates": (int, 2000)},
    "band-scan": {**_ENSEMBLE, "thetas": (_floats, BAND_THETAS), "replicates": (int, 60)},
    "et-report": {
        **_ENSEMBLE,
        "source": (str, "wigner"),
        "atoms": (int, 1000),
        "n0": (int, 20),
        "xi_points": (int, 201),
        "kappa": (int, 0),
    },
    "nb-verify": {**_ENSEMBLE, "n": (int, 4), "n_max": (int, 5), "offdiag": (str, "rademacher"), "replicates": (int, 20)},
    "diagrams": {"k": (int, 1), "s_max": (int, 3), "catalog": (_flag, False)},
    "ad-series": {
        "k": (int, 2),
        "s_max": (int, 3),
        "beta": (int, 1),
        "alpha": (_floats, (1.0, 1.0)),
        "points": (_points, ((0.0,), (0.0,))),
        "p": (float, 2.0),
    },
}


def _key_line(text: str, key: str) -> int:
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw.split("#", 1)[0].split("=", 1)[0].strip() == key:
            return lineno
    return 0


def resolve(command: str, flags: dict, config_text: str | None = None) -> dict:
    """Defaults, then non-``None`` flags, then config-file values."""
    spec = {**_COMMON, **_SETTINGS[command]}
    cfg = {name: default for name, (_, default) in spec.items()}
    for name, value in flags.items():
        if name in spec and value is not None:
            cfg[name] = spec[name][0](value)
    if config_text is not None:
        raw = parse_config(config_text)
        for key, value in raw.items():
            name = _ALIASES.get(key, key).replace("-", "_")
            if name not in spec:
                raise ConfigError(f"line {_key_line(config_text, key)}: unknown key {key!r} for {command}")
            try:
                cfg[name] = spec[name][0](value)
            except ValueError as exc:
                raise ConfigError(f"line {_key_line(config_text, key)}: bad value for {key!r}: {exc}") from None
    if "replicates" in cfg and cfg["replicates"] < 1:
        raise ConfigError("replicates must be >= 1")
    return cfg


def _graph(cfg: dict) -> GraphSpec:
    kind = cfg["ensemble"].lower()
    if kind == "complete":
        return complete(cfg["n"])
    if kind == "band":
        return band(cfg["n"], cfg["w"])
    raise ConfigError(f"unsupported ensemble {kind!r}")


def _header(command: str, cfg: dict) -> str:
    items = [f"{k}={_fmt_cfg(v)}" for k, v in sorted(cfg.items()) if k not in ("out", "threads")]
    text = f"command={command};" + ";".join(items)
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    return f"# rmtmoments {__version__} config_sha256={digest}\n# {text}\n"


def _fmt_cfg(v) -> str:
    if isinstance(v, tuple):
        return "[" + ",".join(_fmt_cfg(x) for x in v) + "]"
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _table(columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def ks_critical_value(n_a: int, n_b: int, c: float = 1.36) -> float:
    """Asymptotic two-sample KS critical value ``c sqrt((n_a + n_b) / (n_a n_b))`` (5% for c = 1.36)."""
    return c * math.sqrt((n_a + n_b) / (n_a * n_b))


def _iqr(x) -> float:
    q1, q3 = np.percentile(np.asarray(x, dtype=float), [25, 75])
    return float(q3 - q1)


# ------------------------------------------------------------------ experiments


def _kappa(cfg, g: GraphSpec) -> int:
    # 0 selects the graph degree; K_N with kappa = N gives the Wigner scale 2 sqrt(N-1)
    return cfg["kappa"] or g.degree


def _gen(cfg):
    g = _graph(cfg)
    h = sample_matrix(g, cfg["diag"], cfg["offdiag"], cfg["seed"])
    if cfg["spectrum"]:
        return write_spectrum_csv(eigenvalues(h, cfg["eig_method"], cfg["eig_tol"]))
    return write_matrix_csv(h)


def _moments(cfg):
    g = _graph(cfg)
    kappa = _kappa(cfg, g)

    def one(seed):
        return trace_power_moments(sample_matrix(g, cfg["diag"], cfg["offdiag"], seed), kappa, cfg["m_max"])

    res = replicate_mean(one, cfg["replicates"], cfg["seed"], cfg["threads"])
    rows = [[m, res.mean[m], float(semicircle_moment(m)), res.stderr[m]] for m in range(cfg["m_max"] + 1)]
    return _table(["m", "empirical", "reference", "stderr"], rows)


def _modified_moments(cfg):
    g = _graph(cfg)
    kappa = _kappa(cfg, g)
    fam = cfg["family"].lower()
    if fam == "nb":
        family = PolynomialFamily.non_backtracking(kappa)
    elif fam == "chebyshev":
        family = PolynomialFamily.chebyshev_u()
    else:
        raise ConfigError(f"unknown family {fam!r}")

    def one(seed):
        h = sample_matrix(g, cfg["diag"], cfg["offdiag"], seed)
        return modified_trace_moments(h, kappa, family, cfg["n_max"])

    res = replicate_mean(one, cfg["replicates"], cfg["seed"], cfg["threads"])
    rows = [[n, res.mean[n], res.stderr[n]] for n in range(cfg["n_max"] + 1)]
    return _table(["n", "modified_moment", "stderr"], rows)


def edge_samples(g: GraphSpec, diag, offdiag, replicates: int, seed: int, threads: int = 1, w: int | None = None):
    """Edge-rescaled largest eigenvalue for each replicate."""

    def one(s):
        lam = largest_eigenvalue(sample_matrix(g, diag, offdiag, s))
        return float(edge_value(lam, g.n, w))

    return np.array(run_replicates(one, replicates, seed, threads))


def _edge_mc(cfg):
    g = _graph(cfg)
    a = edge_samples(g, cfg["diag"], cfg["offdiag"], cfg["replicates"], child_seed(cfg["seed"], 0), cfg["threads"])
    b = edge_samples(g, cfg["diag"], cfg["compare"], cfg["replicates"], child_seed(cfg["seed"], 1), cfg["threads"])
    ks = ks_two_sample(a, b)
    crit = ks_critical_value(len(a), len(b))
    rows = [[cfg["offdiag"], cfg["compare"], g.n, cfg["replicates"], a.mean(), b.mean(), ks, crit]]
    return _table(["ensemble_a", "ensemble_b", "n", "replicates", "mean_a", "mean_b", "ks", "critical_5pct"], rows)


def band_width(n: int, theta: float) -> int:
    """``round(N^theta)`` capped at the widest band ``N/2 - 1``."""
    return max(1, min(int(round(n**theta)), (n - 1) // 2))


def band_scan(n: int, thetas, replicates: int, seed: int, diag="zero", offdiag="rademacher", threads: int = 1):
    """IQR of the band-edge-rescaled largest eigenvalue per width.

    Returns rows ``(theta, w, median, iqr, eta_ref)``; the last row uses the
    widest band ``W = N/2 - 1`` and has ``theta = nan``.
    """
    widths = [(t, band_width(n, t)) for t in thetas] + [(float("nan"), (n - 1) // 2)]
    rows = []
    for i, (t, w) in enumerate(widths):
        g = band(n, w)
        x = edge_samples(g, diag, offdiag, replicates, child_seed(seed, 2, i), threads, w=w)
        eta = min(w**0.4 / n, n ** (-2.0 / 3.0))
        rows.append((t, w, float(np.median(x)), _iqr(x), eta))
    return rows


def _band_scan(cfg):
    rows = band_scan(cfg["n"], cfg["thetas"], cfg["replicates"], cfg["seed"], cfg["diag"], cfg["offdiag"], cfg["threads"])
    full = rows[-1][3]
    out = [[t, w, cfg["replicates"], med, iqr, iqr / full, eta] for t, w, med, iqr, eta in rows]
    return _table(["theta", "w", "replicates", "median", "iqr", "iqr_ratio_to_full", "eta_ref"], out)


def _et_report(cfg):
    src = cfg["source"].lower()
    if src == "wigner":
        g = _graph(cfg)
        h = sample_matrix(g, cfg["diag"], cfg["offdiag"], cfg["seed"])
        ev = eigenvalues(h, cfg["eig_method"], cfg["eig_tol"]).eigenvalues / (2.0 * math.sqrt(_kappa(cfg, g) - 1))
        mu = EmpiricalMeasure.uniform(ev)
    elif src == "quadrature":
        mu = semicircle_quadrature(cfg["atoms"])
    else:
        raise ConfigError(f"unknown source {src!r}")
    xi = np.linspace(-1.0, 1.0, cfg["xi_points"])
    r = erdos_turan_bracket(mu, xi, cfg["n0"])
    rows = [[x, d, b, d / b] for x, d, b in zip(xi, r.discrepancy, r.bracket)]
    return _table(["xi", "discrepancy", "bracket", "ratio"], rows)


def _nb_verify(cfg):
    g = _graph(cfg)
    if cfg["offdiag"] not in ("rademacher", "complex_unimodular"):
        raise ConfigError("nb-verify needs unimodular entries (rademacher or complex_unimodular)")
    worst = np.zeros(cfg["n_max"] + 1)

    def one(seed):
        h = sample_matrix(g, "zero", cfg["offdiag"], seed)
        return [verify_nb_identity(h, g.degree, n).max_abs_error for n in range(cfg["n_max"] + 1)]

    for errs in run_replicates(one, cfg["replicates"], cfg["seed"], cfg["threads"]):
        worst = np.maximum(worst, errs)
    rows = [[n, cfg["replicates"], worst[n]] for n in range(cfg["n_max"] + 1)]
    return _table(["n", "replicates", "max_abs_error"], rows)


def _diagrams(cfg):
    if cfg["catalog"]:
        return format_catalog(enumerate_diagrams(cfg["k"], cfg["s_max"]))
    rows = [[cfg["k"], r.s, r.labelled, r.orientable, r.classes, r.c_min] for r in diagram_count_report(cfg["k"], cfg["s_max"])]
    return _table(["k", "s", "labelled", "orientable", "classes_mod_symmetry", "c_min"], rows)


def _ad_series(cfg):
    pts = PointConfig(np.array(cfg["points"], dtype=float), cfg["p"])
    res = ad_transform_series(cfg["k"], pts, cfg["alpha"], cfg["beta"], cfg["s_max"])
    rows = [[s, res.partial_sums[s], res.per_s[s]] for s in sorted(res.per_s)]
    return _table(["s", "partial_sum", "term"], rows)


_RUNNERS = {
    "gen": _gen,
    "moments": _moments,
    "modified-moments": _modified_moments,
    "edge-mc": _edge_mc,
    "band-scan": _band_scan,
    "et-report": _et_report,
    "nb-verify": _nb_verify,
    "diagrams": _diagrams,
    "ad-series": _ad_series,
}


# ------------------------------------------------------------------ argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (default 1)")
    common.add_argument("--threads", type=int, help="worker threads for replicates (default 1)")
    common.add_argument("--out", help="output file, '-' for stdout")
    common.add_argument("--config", help="key = value file; overrides flags")
    common.add_argument("--eig-tol", type=float, help="QL convergence tolerance")
    common.add_argument("--eig-method", choices=["lapack", "ql"], help="eigensolver")

    p = argparse.ArgumentParser(prog="rmtmoments", description="Moment-method experiments for random matrices.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def ens(sp):
        sp.add_argument("--ensemble", choices=["complete", "band"])
        sp.add_argument("--n", type=int)
        sp.add_argument("--w", type=int)
        sp.add_argument("--diag")
        sp.add_argument("--offdiag")

    sp = sub.add_parser("gen", parents=[common], help="sample one matrix")
    ens(sp)
    sp.add_argument("--spectrum", action="store_const", const=True, help="write eigenvalues instead of entries")

    for name, extra in (("moments", "--m-max"), ("modified-moments", "--n-max")):
        sp = sub.add_parser(name, parents=[common], help=f"{name} scan over replicates")
        ens(sp)
        sp.add_argument("--replicates", type=int)
        sp.add_argument(extra, type=int)
        sp.add_argument("--kappa", type=int, help="scale 2 sqrt(kappa-1); default the graph degree")
        if name == "modified-moments":
            sp.add_argument("--family", choices=["nb", "chebyshev"])

    sp = sub.add_parser("edge-mc", parents=[common], help="compare edge statistics of two entry laws")
    ens(sp)
    sp.add_argument("--compare")
    sp.add_argument("--replicates", type=int)

    sp = sub.add_parser("band-scan", parents=[common], help="edge fluctuations versus band width")
    ens(sp)
    sp.add_argument("--thetas")
    sp.add_argument("--replicates", type=int)

    sp = sub.add_parser("et-report", parents=[common], help="CDF discrepancy and modified-moment bracket")
    ens(sp)
    sp.add_argument("--source", choices=["wigner", "quadrature"])
    sp.add_argument("--atoms", type=int)
    sp.add_argument("--n0", type=int)
    sp.add_argument("--xi-points", type=int)
    sp.add_argument("--kappa", type=int, help="scale 2 sqrt(kappa-1); default the graph degree")

    sp = sub.add_parser("nb-verify", parents=[common], help="check the non-backtracking walk identity")
    ens(sp)
    sp.add_argument("--n-max", type=int)
    sp.add_argument("--replicates", type=int)

    sp = sub.add_parser("diagrams", parents=[common], help="diagram counts or catalog")
    sp.add_argument("--k", type=int)
    sp.add_argument("--s-max", type=int)
    sp.add_argument("--catalog", action="store_const", const=True, help="write the catalog instead of counts")

    sp = sub.add_parser("ad-series", parents=[common], help="truncated edge transform series")
    sp.add_argument("--k", type=int)
    sp.add_argument("--s-max", type=int)
    sp.add_argument("--beta", type=int, choices=[1, 2])
    sp.add_argument("--alpha", help="comma-separated, one per walk")
    sp.add_argument("--points", help="points separated by ';', coordinates by ','")
    sp.add_argument("--p", type=float)
    return p


def run(argv: list[str] | None = None, stdout=None) -> int:
    """Parse ``argv``, run the experiment and write its CSV; returns the exit status."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        text = None
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = resolve(args.command, flags, text)
        body = _RUNNERS[args.command](cfg)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"rmtmoments {args.command}: error: {exc}", file=sys.stderr)
        return 2
    out = _header(args.command, cfg) + body
    if cfg["out"] == "-":
        stdout.write(out)
    else:
        with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
            fh.write(out)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
