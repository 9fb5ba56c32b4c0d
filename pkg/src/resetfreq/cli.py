"""Command line driver: frequency sweeps, sweep comparison and stability checks.

Usage::

    resetfreq sweep --system ppcid --analyses closedloop,pseudo --out out/ppcid
    resetfreq sweep --config sweep.yaml
    resetfreq compare out/spcid out/ppcid --out out/diff
    resetfreq stability --system cg1

The worker count of a sweep is read from the ``RESETFREQ_WORKERS``
environment variable (default 1).  Results are always written in increasing
frequency order.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys as _sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import tables
from .closedloop import SensitivitySpectrum, disturbance_spectrum, reference_spectrum
from .config import parse_number, load_system
from .hifreq import DEFAULT_EPSILON, OmegaHError, approx_spectra, estimate_omega_h
from .openloop import DEFAULT_NMAX, open_loop_spectrum
from .pseudo import PSEUDO_KINDS, pseudo_from_solution
from .simulator import (PeriodicInput, SimConfig, extract_period, fourier_coefficients,
                        settle_time, simulate)
from .stability import assess_stability
from .steadystate import solve_steady_state

__all__ = ["ANALYSES", "SweepSpec", "SweepResult", "load_sweep_spec", "run_sweep", "compare",
           "omega_grid", "main", "WORKERS_ENV"]

log = logging.getLogger(__name__)

ANALYSES = ("openloop", "closedloop", "pseudo", "hifreq", "stability", "simulate")
WORKERS_ENV = "RESETFREQ_WORKERS"
_PER_OMEGA = ("openloop", "closedloop", "pseudo", "hifreq", "simulate")


def omega_grid(start, stop, points_per_decade):
    """Logarithmic grid from ``start`` to ``stop`` rad/s, both included."""
    count = int(round(math.log10(stop / start) * points_per_decade)) + 1
    return np.logspace(math.log10(start), math.log10(stop), max(count, 2))


@dataclass(frozen=True)
class SweepSpec:
    """Everything a sweep needs; frequencies in rad/s."""

    system: str
    omega_start: float = 2 * math.pi
    omega_stop: float = 2000 * math.pi
    points_per_decade: int = 10
    analyses: tuple = ("closedloop", "pseudo")
    n_max: int = DEFAULT_NMAX
    out: Path = Path("resetfreq-out")
    epsilon: float = DEFAULT_EPSILON
    skip_stability: bool = False
    continue_on_error: bool = False

    def __post_init__(self):
        object.__setattr__(self, "analyses", tuple(self.analyses))
        object.__setattr__(self, "out", Path(self.out))
        if not self.analyses:
            raise ValueError("at least one analysis is required")
        unknown = sorted(set(self.analyses) - set(ANALYSES))
        if unknown:
            raise ValueError(f"unknown analyses {unknown}; choose from {list(ANALYSES)}")
        if not 0 < self.omega_start < self.omega_stop:
            raise ValueError("omega grid must be positive and increasing")
        if self.points_per_decade < 1:
            raise ValueError("points per decade must be at least 1")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")

    @property
    def omegas(self):
        return omega_grid(self.omega_start, self.omega_stop, self.points_per_decade)


def load_sweep_spec(path, **overrides):
    """Read a sweep description file; ``overrides`` that are not ``None`` win.

    The file holds ``system`` (bundled name or a path relative to the file),
    ``omega: {start, stop, points_per_decade}``, ``analyses``, ``n_max``,
    ``epsilon`` and ``out``.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict) or "system" not in data:
        raise ValueError(f"{path}: a sweep file needs a 'system' entry")
    system = str(data["system"])
    candidate = path.parent / system
    if candidate.exists():
        system = str(candidate)
    omega = data.get("omega", {})
    kw = {"system": system}
    if "start" in omega:
        kw["omega_start"] = parse_number(omega["start"])
    if "stop" in omega:
        kw["omega_stop"] = parse_number(omega["stop"])
    if "points_per_decade" in omega:
        kw["points_per_decade"] = int(omega["points_per_decade"])
    if "analyses" in data:
        kw["analyses"] = tuple(data["analyses"])
    for key in ("n_max", "epsilon", "out", "skip_stability", "continue_on_error"):
        if key in data:
            kw[key] = data[key]
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return SweepSpec(**kw)


@dataclass
class SweepResult:
    files: dict = field(default_factory=dict)
    summary: list = field(default_factory=list)
    stability: str = "skipped"
    omega_h: float | None = None

    @property
    def failures(self):
        return [s for s in self.summary if s[2] != "ok"]


def _evaluate(args):
    """All per-frequency analyses at one ``omega``; never raises."""
    system, omega, analyses, n_max, omega_h = args
    rows = {a: [] for a in analyses}
    status = []
    sols = {}

    def solution(channel):
        if channel not in sols:
            sols[channel] = solve_steady_state(system, omega, channel)
        return sols[channel]

    def q_of(channel):
        return sols[channel].q if channel in sols else ""

    for a in analyses:
        try:
            if a == "openloop":
                rows[a] = tables.openloop_rows(open_loop_spectrum(system.reset, omega, n_max))
            elif a == "closedloop":
                ref = reference_spectrum(system, solution("reference"), n_max)
                dist = disturbance_spectrum(system, solution("disturbance"), n_max)
                spec = SensitivitySpectrum(omega, n_max, ref.T, ref.S, ref.CS, dist.PS, dist.CS_d)
                rows[a] = tables.spectrum_rows(spec)
            elif a == "pseudo":
                pts = [pseudo_from_solution(solution(ch), system, kind)
                       for kind, (ch, _) in PSEUDO_KINDS.items()]
                rows[a] = tables.pseudo_rows(pts)
            elif a == "hifreq":
                if omega_h is not None and omega >= omega_h:
                    T = approx_spectra(system, omega, "reference", n_max)
                    PS = approx_spectra(system, omega, "disturbance", n_max)
                    approx = True
                else:
                    T = reference_spectrum(system, solution("reference"), n_max).T
                    PS = disturbance_spectrum(system, solution("disturbance"), n_max).PS
                    approx = False
                spec = SensitivitySpectrum.from_harmonics(system, omega, T, PS)
                rows[a] = tables.spectrum_rows(spec, approx)
            elif a == "simulate":
                rows[a] = _simulate_rows(system, omega, n_max)
            status.append((omega, a, "ok", q_of("reference"), q_of("disturbance"), ""))
        except Exception as exc:  # reported per frequency, see run_sweep
            log.debug("%s failed at omega=%g", a, omega, exc_info=True)
            status.append((omega, a, "failed", q_of("reference"), q_of("disturbance"),
                           f"{type(exc).__name__}: {exc}"))
    return omega, rows, status


def _simulate_rows(system, omega, n_max, samples_per_period=512):
    inp = PeriodicInput.sinusoid(omega)
    period = inp.period
    n_settle = int(math.ceil(settle_time(system) / period))
    trace = simulate(system, inp, (n_settle + 2) * period,
                     SimConfig(samples_per_period=samples_per_period))
    wf = extract_period(trace, period, n_settle)
    T = [fourier_coefficients((wf.times, wf.signal("y")), omega, n) for n in range(1, n_max + 1)]
    S = [fourier_coefficients((wf.times, wf.signal("e")), omega, n) for n in range(1, n_max + 1)]
    return tables.simulate_rows(omega, T, S, wf.residual)


_HEADERS = {
    "openloop": tables.OPENLOOP_HEADER,
    "closedloop": tables.SPECTRUM_HEADER,
    "pseudo": tables.PSEUDO_HEADER,
    "hifreq": tables.HIFREQ_HEADER,
    "simulate": tables.SIMULATE_HEADER,
}

SUMMARY_HEADER = ["omega", "analysis", "status", "q_reference", "q_disturbance", "message"]


def _workers():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _stability_rows(report):
    cert = report.certificate
    if cert is None:
        return [[report.status, "", "", ""]]
    return [[report.status, ";".join(fmt_list(cert.rho)), ";".join(fmt_list(cert.beta)),
             cert.spr_margin]]


def fmt_list(a):
    return [tables.fmt(v) for v in np.ravel(a)]


def run_sweep(spec):
    """Run every requested analysis over the grid and write one CSV per analysis.

    All frequencies are evaluated even when some fail; failures are listed in
    ``summary.csv``.  The caller decides the exit status from
    :attr:`SweepResult.failures` and ``spec.continue_on_error``.
    """
    system = load_system(spec.system).system
    out = spec.out
    out.mkdir(parents=True, exist_ok=True)
    result = SweepResult()

    if system.is_identity_reset or not spec.skip_stability:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            report = assess_stability(system)
        result.stability = report.status
        if "stability" in spec.analyses:
            result.files["stability"] = tables.write_csv(
                out / "stability.csv", ["status", "rho", "beta", "spr_margin"],
                _stability_rows(report))
        if report.status == "no certificate found":
            log.warning("no H-beta certificate found for %s; continuing", spec.system)
        result.summary.append(("", "stability", "failed" if report.status == "unstable" else "ok",
                               "", "", report.status))
    elif "stability" in spec.analyses:
        result.summary.append(("", "stability", "ok", "", "", "skipped"))

    omegas = spec.omegas
    if "hifreq" in spec.analyses:
        try:
            model = estimate_omega_h(system, spec.epsilon,
                                     omega_start=min(omegas[0], 2 * math.pi),
                                     omega_stop=max(omegas[-1], 2 * math.pi * 1e4))
            result.omega_h = model.omega_h
        except OmegaHError as exc:
            log.warning("%s", exc)

    per_omega = tuple(a for a in spec.analyses if a in _PER_OMEGA)
    jobs = [(system, float(w), per_omega, spec.n_max, result.omega_h) for w in omegas]
    workers = _workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate, jobs))
    else:
        results = [_evaluate(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    for a in per_omega:
        rows = [row for _, r, _ in results for row in r[a]]
        result.files[a] = tables.write_csv(out / f"{a}.csv", _HEADERS[a], rows)
    for _, _, status in results:
        result.summary.extend(status)
    if result.omega_h is not None:
        result.summary.append(("", "hifreq", "ok", "", "", f"omega_h={result.omega_h!r}"))
    result.files["summary"] = tables.write_csv(out / "summary.csv", SUMMARY_HEADER,
                                               result.summary)
    return result


# -- comparison ---------------------------------------------------------------

COMPARE_HEADER = ["analysis", "omega", "key", "quantity", "db_a", "db_b", "delta_db",
                  "delta_deg"]


def _wrap_deg(d):
    out = math.remainder(d, 360.0)
    return 180.0 if out == -180.0 else out


def _index(path, keycol):
    header, rows = tables.read_csv(path)
    col = {h: i for i, h in enumerate(header)}
    table = {}
    for r in rows:
        table[(float(r[col["omega"]]), r[col[keycol]])] = r
    return header, col, table


def _compare_table(analysis, path_a, path_b):
    keycol = "kind" if analysis == "pseudo" else "n"
    _, col, ta = _index(path_a, keycol)
    _, _, tb = _index(path_b, keycol)
    wa = sorted({k[0] for k in ta})
    wb = sorted({k[0] for k in tb})
    if len(wa) != len(wb) or not np.allclose(wa, wb, rtol=1e-12, atol=0):
        raise ValueError(f"{analysis}: frequency grids differ")
    if analysis == "pseudo":
        quantities = [("", "magnitude_db", "phase_deg")]
    else:
        names = [h[:-3] for h in col if h.endswith("_db")]
        quantities = [(q, f"{q}_db", f"{q}_deg") for q in names]
    ka, kb = sorted(ta), sorted(tb)
    if [k[1] for k in ka] != [k[1] for k in kb]:
        raise ValueError(f"{analysis}: the two sweeps list different harmonics or kinds")
    rows = []
    for key_a, key_b in zip(ka, kb):
        ra, rb = ta[key_a], tb[key_b]
        for q, dbc, degc in quantities:
            da, dbv = float(ra[col[dbc]]), float(rb[col[dbc]])
            if math.isfinite(da) and math.isfinite(dbv):
                delta = dbv - da
            else:
                delta = 0.0 if da == dbv else math.nan
            rows.append([analysis, key_a[0], key_a[1], q or ra[col["kind"]], da, dbv, delta,
                         _wrap_deg(float(rb[col[degc]]) - float(ra[col[degc]]))])
    return rows


def _as_output_dir(path, tmp_root):
    path = Path(path)
    if path.is_dir():
        return path
    spec = load_sweep_spec(path, out=tmp_root / path.stem)
    run_sweep(spec)
    return spec.out


def compare(path_a, path_b, out):
    """Per-frequency differences (``b - a``) in dB and degrees between two sweeps.

    ``path_a`` and ``path_b`` are sweep output directories or sweep files
    (which are run first, into ``out``).  Only analyses present in both are
    compared.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    da = _as_output_dir(path_a, out / "a")
    db_ = _as_output_dir(path_b, out / "b")
    rows = []
    for analysis in ("openloop", "closedloop", "pseudo", "hifreq"):
        fa, fb = da / f"{analysis}.csv", db_ / f"{analysis}.csv"
        if fa.exists() and fb.exists():
            rows += _compare_table(analysis, fa, fb)
    if not rows:
        raise ValueError("the two sweeps have no analysis in common")
    return tables.write_csv(out / "compare.csv", COMPARE_HEADER, rows)


# -- entry point ----------------------------------------------------------------

def _build_parser():
    p = argparse.ArgumentParser(prog="resetfreq", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="frequency sweep of one closed loop")
    sw.add_argument("--config", help="sweep description file (YAML)")
    sw.add_argument("--system", help="system file or bundled name; overrides the config")
    sw.add_argument("--analyses", help=f"comma separated subset of {','.join(ANALYSES)}")
    sw.add_argument("--omega-start", help="first frequency in rad/s (e.g. 2*pi)")
    sw.add_argument("--omega-stop", help="last frequency in rad/s")
    sw.add_argument("--ppd", type=int, help="points per decade")
    sw.add_argument("--nmax", type=int, help="highest harmonic")
    sw.add_argument("--epsilon", type=float, help="first-harmonic dominance threshold")
    sw.add_argument("--skip-stability", action="store_true", default=None)
    sw.add_argument("--continue-on-error", action="store_true", default=None)
    sw.add_argument("--out", help="output directory")

    cp = sub.add_parser("compare", help="difference of two sweeps")
    cp.add_argument("a", help="sweep output directory or sweep file")
    cp.add_argument("b", help="sweep output directory or sweep file")
    cp.add_argument("--out", default="resetfreq-compare", help="output directory")

    st = sub.add_parser("stability", help="H-beta certificate search")
    st.add_argument("--config", help="sweep description file (YAML)")
    st.add_argument("--system", help="system file or bundled name")
    st.add_argument("--out", help="write stability.csv into this directory")
    return p


def _sweep_from_args(args):
    overrides = {
        "system": args.system,
        "analyses": tuple(a.strip() for a in args.analyses.split(",") if a.strip())
        if args.analyses is not None else None,
        "omega_start": parse_number(args.omega_start) if args.omega_start else None,
        "omega_stop": parse_number(args.omega_stop) if args.omega_stop else None,
        "points_per_decade": args.ppd,
        "n_max": args.nmax,
        "epsilon": args.epsilon,
        "skip_stability": args.skip_stability,
        "continue_on_error": args.continue_on_error,
        "out": args.out,
    }
    if args.config:
        return load_sweep_spec(args.config, **overrides)
    if not args.system:
        raise ValueError("either --config or --system is required")
    return SweepSpec(**{k: v for k, v in overrides.items() if v is not None})


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sweep":
            spec = _sweep_from_args(args)
            res = run_sweep(spec)
            print(f"stability: {res.stability}")
            if res.omega_h is not None:
                print(f"omega_h: {res.omega_h:.6g} rad/s")
            for name, path in res.files.items():
                print(f"wrote {name}: {path}")
            for f in res.failures:
                print(f"FAILED {f[1]} at omega={f[0]}: {f[5]}", file=_sys.stderr)
            return 1 if res.failures and not spec.continue_on_error else 0
        if args.command == "compare":
            print(f"wrote {compare(args.a, args.b, args.out)}")
            return 0
        if args.command == "stability":
            if args.config:
                name = load_sweep_spec(args.config).system
            elif args.system:
                name = args.system
            else:
                raise ValueError("either --config or --system is required")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                report = assess_stability(load_system(name).system)
            print(f"status: {report.status}")
            if report.certificate is not None:
                c = report.certificate
                print(f"rho: {np.ravel(c.rho).tolist()}  beta: {np.ravel(c.beta).tolist()}  "
                      f"spr margin: {c.spr_margin:.6e}")
            if args.out:
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                tables.write_csv(out / "stability.csv", ["status", "rho", "beta", "spr_margin"],
                                 _stability_rows(report))
            return 0 if report.ok else 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
