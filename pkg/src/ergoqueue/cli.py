"""Configuration-driven command line front end.

Experiments are described in a TOML file with three tables:
``[environment]``, ``[service]``, and ``[experiment]`` (see
``docs/config.md``).  Every run writes its outputs plus a
``manifest.json`` capturing the resolved configuration, seed, backend,
and wall clock, so the manifest alone reproduces any output file.

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration
error, 3 stability or certification error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__, certify, env_processes, estimate, lindley, service_laws
from ._kernels import backend
from .errors import CertifyError, ConfigError, ErgoqueueError, StabilityError

KINDS = ("simulate", "certify", "tv-decay", "lln", "loynes-compare", "borovkov", "ge-limit")

_ENV_KEYS = {
    "iid": {"family", "iid_law"},
    "markov_modulated": {"family", "states", "transition"},
    "copula_ar1": {"family", "ar_coefficient", "marginal"},
}
_MARGINAL_KEYS = {
    "constant": {"family", "value"},
    "exponential": {"family", "rate"},
    "uniform": {"family", "a", "b"},
    "double_exp_tail": {"family", "c2", "c3"},
}
_SERVICE_KEYS = {
    "exponential": {"family", "rate", "theorem_mode"},
    "gamma": {"family", "shape", "rate", "theorem_mode"},
    "uniform_shifted": {"family", "a", "b", "theorem_mode"},
    "exponential_mixture": {"family", "weights", "rates", "theorem_mode"},
    "deterministic": {"family", "value", "theorem_mode"},
}
_EXPERIMENT_KEYS = {
    "kind", "seed", "out_dir", "workers", "horizon", "replicas", "n_grid",
    "w0", "theta", "n_star", "alphas", "cgf_n", "loynes_horizon", "ks_tol",
    "grid_step", "precision", "drift_grid", "minor_intervals", "minor_w_points",
    "reference",
}
_REQUIRED = {"kind", "seed"}


def _check_keys(table: dict, allowed: set, where: str, errors: list):
    for key in table:
        if key not in allowed:
            errors.append(f"{where}: unknown key {key!r}")


def _build_marginal(table: dict, where: str, errors: list):
    fam = table.get("family")
    if fam not in _MARGINAL_KEYS:
        errors.append(f"{where}: unknown marginal family {fam!r}")
        return None
    _check_keys(table, _MARGINAL_KEYS[fam], where, errors)
    try:
        return env_processes.Marginal(
            family=fam,
            value=float(table.get("value", 0.0)),
            rate=float(table.get("rate", 0.0)),
            a=float(table.get("a", 0.0)),
            b=float(table.get("b", 0.0)),
            c2=float(table.get("c2", 0.0)),
            c3=float(table.get("c3", 0.0)),
        )
    except ErgoqueueError as exc:
        errors.append(f"{where}: {exc}")
        return None


def _build_environment(table: dict, errors: list):
    fam = table.get("family")
    if fam not in _ENV_KEYS:
        errors.append(f"environment: unknown family {fam!r}")
        return None
    _check_keys(table, _ENV_KEYS[fam], "environment", errors)
    try:
        if fam == "iid":
            law = _build_marginal(table.get("iid_law", {}), "environment.iid_law", errors)
            if law is None:
                return None
            return env_processes.EnvironmentSpec(family=fam, iid_law=law)
        if fam == "markov_modulated":
            return env_processes.EnvironmentSpec(
                family=fam,
                states=tuple(float(z) for z in table.get("states", ())),
                transition=tuple(
                    tuple(float(p) for p in row) for row in table.get("transition", ())
                ),
            )
        marg = _build_marginal(table.get("marginal", {}), "environment.marginal", errors)
        if marg is None:
            return None
        return env_processes.EnvironmentSpec(
            family=fam,
            ar_coefficient=float(table.get("ar_coefficient", 0.0)),
            marginal=marg,
        )
    except ErgoqueueError as exc:
        errors.append(f"environment: {exc}")
        return None


def _build_service(table: dict, errors: list):
    fam = table.get("family")
    if fam not in _SERVICE_KEYS:
        errors.append(f"service: unknown family {fam!r}")
        return None
    _check_keys(table, _SERVICE_KEYS[fam], "service", errors)
    try:
        return service_laws.ServiceSpec(
            family=fam,
            rate=float(table.get("rate", 0.0)),
            shape=float(table.get("shape", 1.0)),
            a=float(table.get("a", 0.0)),
            b=float(table.get("b", 0.0)),
            weights=tuple(float(w) for w in table.get("weights", ())),
            rates=tuple(float(r) for r in table.get("rates", ())),
            value=float(table.get("value", 0.0)),
            theorem_mode=table.get("theorem_mode"),
        )
    except ErgoqueueError as exc:
        errors.append(f"service: {exc}")
        return None


class ExperimentConfig:
    """Validated experiment description built from a TOML document."""

    def __init__(self, doc: dict):
        errors: list[str] = []
        for section in ("environment", "service", "experiment"):
            if section not in doc:
                errors.append(f"missing [{section}] table")
        for key in doc:
            if key not in ("environment", "service", "experiment"):
                errors.append(f"unknown table [{key}]")
        self.env = _build_environment(doc.get("environment", {}), errors)
        self.service = _build_service(doc.get("service", {}), errors)
        exp = doc.get("experiment", {})
        _check_keys(exp, _EXPERIMENT_KEYS, "experiment", errors)
        for key in _REQUIRED:
            if key not in exp:
                errors.append(f"experiment: missing required key {key!r}")
        kind = exp.get("kind")
        if kind is not None and kind not in KINDS:
            errors.append(f"experiment: unknown kind {kind!r} (choose from {KINDS})")
        self.experiment = exp
        self.errors = errors

    @property
    def model(self) -> lindley.QueueModel:
        return lindley.QueueModel(env=self.env, service=self.service)

    def require_valid(self):
        if self.errors:
            raise ConfigError("; ".join(self.errors))


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, "rb") as f:
        doc = tomllib.load(f)
    return ExperimentConfig(doc)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def _fmt_grid(exp: dict, key: str, default) -> list[int]:
    return [int(v) for v in exp.get(key, default)]


# ---------------------------------------------------------------------------
# experiment runners: each returns (pass_flag, output file names)
# ---------------------------------------------------------------------------


def _run_simulate(cfg: ExperimentConfig, out: Path, seed: int, workers: int):
    exp = cfg.experiment
    cfg.model.require_subcritical()
    n = int(exp.get("horizon", 1000))
    traj = lindley.simulate(cfg.model, float(exp.get("w0", 0.0)), n, seed)
    _write_csv(out / "trajectory.csv", ["step", "wait"], enumerate(traj.waits.tolist()))
    return True, ["trajectory.csv"]


def _run_certify(cfg: ExperimentConfig, out: Path, seed: int, workers: int):
    exp = cfg.experiment
    cert = certify.build_certificate(
        cfg.env,
        cfg.service,
        theta=exp.get("theta"),
        grid_step=float(exp.get("grid_step", 0.01)),
        seed=seed,
    )
    precision = float(exp.get("precision", 1e-8))
    n_drift = int(exp.get("drift_grid", 40))
    z_hi = cfg.env.bound if math.isfinite(cfg.env.bound) else 4.0 * cfg.env.stationary_mean()
    z_grid = np.linspace(0.0, z_hi, n_drift)
    w_grid = np.linspace(0.0, 2.0 * cert.h + 1.0, n_drift)
    drift = certify.verify_drift(cert, cfg.env, cfg.service, z_grid, w_grid, precision)
    z_samples = env_processes.sample_path(cfg.env, 50, seed).values
    minor = certify.verify_minorization(
        cert,
        cfg.env,
        cfg.service,
        z_samples,
        n_intervals=int(exp.get("minor_intervals", 32)),
        w_points=int(exp.get("minor_w_points", 50)),
    )
    reports = [drift.to_dict(), minor.to_dict()]
    doc = {"certificate": cert.to_dict(), "reports": reports}
    (out / "certificate.json").write_text(json.dumps(doc, indent=2))
    return all(r["passed"] for r in reports), ["certificate.json"]


def _run_tv_decay(cfg: ExperimentConfig, out: Path, seed: int, workers: int):
    exp = cfg.experiment
    res = estimate.tv_decay_curve(
        cfg.model,
        _fmt_grid(exp, "n_grid", [1, 2, 5, 10, 20, 50]),
        int(exp.get("replicas", 10_000)),
        n_star=exp.get("n_star"),
        seeds=seed,
        workers=workers,
        reference=exp.get("reference", "forward"),
    )
    _write_csv(
        out / "tv_decay.csv",
        ["n", "tv", "stderr"],
        [(p.n, p.tv, p.stderr) for p in res.points],
    )
    ref_binned = estimate.binned_law(res.reference.samples, res.edges)
    edges, masses = ref_binned.binning
    _write_csv(
        out / "reference_binned.csv",
        ["bin_lo", "bin_hi", "mass"],
        [
            (float(edges[i]), float(edges[i + 1]), float(masses[i]))
            for i in range(masses.size)
        ],
    )
    summary = {"noise_floor": res.noise_floor, "reference": res.reference_kind}
    ok = True
    try:
        fit = estimate.fit_rate(res, exponent=1.0 / 3.0)
        summary["fit"] = {
            "c1": fit.c1,
            "c2": fit.c2,
            "exponent": fit.exponent,
            "r_squared": fit.r_squared,
            "n_points": fit.n_points,
        }
    except ErgoqueueError as exc:
        summary["fit"] = {"error": str(exc)}
        ok = False
    (out / "tv_decay.json").write_text(json.dumps(summary, indent=2))
    return ok, ["tv_decay.csv", "tv_decay.json", "reference_binned.csv"]


def _run_lln(cfg: ExperimentConfig, out: Path, seed: int, workers: int):
    exp = cfg.experiment
    replicas = int(exp.get("replicas", 1000))
    n_grid = _fmt_grid(exp, "n_grid", [100, 1000, 10_000])
    ref_replicas = max(10 * replicas, 20_000)
    loynes = lindley.loynes_backward(
        cfg.model,
        int(exp.get("loynes_horizon", 1000)),
        ref_replicas,
        seed,
        workers=workers,
    )
    rows = estimate.lln_curve(
        cfg.model,
        float(exp.get("w0", 1.0)),
        n_grid,
        replicas,
        seeds=seed,
        reference=loynes.law,
        workers=workers,
    )
    _write_csv(
        out / "lln.csv",
        ["n", "mean", "stdev", "ref"],
        [(r["n"], r["mean"], r["stdev"], r["ref"]) for r in rows],
    )
    last = rows[-1]
    se_mean = last["stdev"] / math.sqrt(replicas)
    se_ref = math.sqrt(max(last["ref"] * (1.0 - last["ref"]), 0.0) / ref_replicas)
    ok = abs(last["mean"] - last["ref"]) <= max(0.01, 5.0 * math.hypot(se_mean, se_ref))
    return ok, ["lln.csv"]


def _run_loynes_compare(cfg: ExperimentConfig, out: Path, seed: int, workers: int):
    exp = cfg.experiment
    replicas = int(exp.get("replicas", 10_000))
    horizon = int(exp.get("horizon", 10_000))
    res = lindley.loynes_backward(
        cfg.model, int(exp.get("loynes_horizon", 1000)), replicas, seed, workers=workers
    )
    fwd = lindley.wait_snapshots(cfg.model, [horizon], replicas, seed, workers=workers)[:, 0]
    fwd_law = estimate.EmpiricalLaw.from_samples(fwd)
    ks = estimate.ks_distance(res.law, fwd_law)
    # default threshold: asymptotic two-sample KS critical value at alpha = 0.01
    ks_tol = float(exp.get("ks_tol", 1.63 * math.sqrt(2.0 / replicas)))
    doc = {
        "ks": ks,
        "ks_tol": ks_tol,
        "late_fraction": res.late_fraction,
        "stabilized": res.stabilized,
        "forward_mean": float(fwd.mean()),
        "loynes_mean": res.law.mean(),
    }
    (out / "loynes_compare.json").write_text(json.dumps(doc, indent=2))
    _write_csv(out / "loynes_law.csv", ["sample"], [(float(v),) for v in res.law.samples])
    return bool(res.stabilized and ks <= ks_tol), [
        "loynes_compare.json",
        "loynes_law.csv",
    ]


def _run_borovkov(cfg: ExperimentConfig, out: Path, seed: int, workers: int):
    exp = cfg.experiment
    rows = estimate.borovkov_compare(
        cfg.model,
        _fmt_grid(exp, "n_grid", [2, 5, 10, 20]),
        int(exp.get("replicas", 10_000)),
        seeds=seed,
        n_star=exp.get("n_star"),
        loynes_horizon=int(exp.get("loynes_horizon", 1000)),
        workers=workers,
    )
    _write_csv(
        out / "borovkov.csv",
        ["n", "tv", "rhs", "margin"],
        [(r["n"], r["tv"], r["rhs"], r["margin"]) for r in rows],
    )
    return all(r["passed"] for r in rows), ["borovkov.csv"]


def _run_ge_limit(cfg: ExperimentConfig, out: Path, seed: int, workers: int):
    exp = cfg.experiment
    alphas = [float(a) for a in exp.get("alphas", [-0.5, -0.2, 0.2, 0.5])]
    n = int(exp.get("cgf_n", 20))
    replicas = int(exp.get("replicas", 100_000))
    rows = []
    ok = True
    for a in alphas:
        est_val, se = env_processes.mc_cgf_estimate(cfg.env, a, n, replicas, seed)
        try:
            exact = env_processes.exact_cgf_limit(cfg.env, a)
            passed = abs(est_val - exact) <= 3.0 * se
            ok = ok and passed
        except ErgoqueueError:
            exact = math.nan
        rows.append((a, exact, est_val, se))
    _write_csv(out / "ge_limit.csv", ["alpha", "exact", "estimate", "stderr"], rows)
    return ok, ["ge_limit.csv"]


_RUNNERS = {
    "simulate": _run_simulate,
    "certify": _run_certify,
    "tv-decay": _run_tv_decay,
    "lln": _run_lln,
    "loynes-compare": _run_loynes_compare,
    "borovkov": _run_borovkov,
    "ge-limit": _run_ge_limit,
}


def validate(config_path: str | Path) -> list[str]:
    """Full validation without execution; returns the violation list."""
    try:
        cfg = load_config(config_path)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return cfg.errors


def run(config_path: str | Path, overrides: dict | None = None) -> int:
    """Execute the configured experiment; returns the process exit code."""
    try:
        cfg = load_config(config_path)
        cfg.require_valid()
    except (OSError, tomllib.TOMLDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    overrides = overrides or {}
    exp = dict(cfg.experiment)
    exp.update({k: v for k, v in overrides.items() if v is not None})
    cfg.experiment = exp

    seed = int(exp["seed"])
    workers = int(exp.get("workers", 1))
    out = Path(exp.get("out_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    kind = exp["kind"]

    t0 = time.time()
    try:
        passed, files = _RUNNERS[kind](cfg, out, seed, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StabilityError, CertifyError) as exc:
        print(f"stability/certification error: {exc}", file=sys.stderr)
        return 3
    except ErgoqueueError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    manifest = {
        "tool": "ergoqueue",
        "version": __version__,
        "backend": backend(),
        "config": {
            "environment": _asdict_section(cfg, "environment"),
            "service": _asdict_section(cfg, "service"),
            "experiment": exp,
        },
        "seed": seed,
        "workers": workers,
        "wall_clock_s": round(time.time() - t0, 3),
        "outputs": files,
        "passed": bool(passed),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))
    if not passed:
        print(f"{kind}: checks failed (see {out})", file=sys.stderr)
        return 1
    print(f"{kind}: ok ({out})")
    return 0


def _asdict_section(cfg: ExperimentConfig, which: str) -> dict:
    import dataclasses

    obj = cfg.env if which == "environment" else cfg.service
    return dataclasses.asdict(obj)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ergoqueue",
        description="simulate and certify Lindley queues with dependent arrivals",
    )
    parser.add_argument("command", choices=list(KINDS) + ["validate"])
    parser.add_argument("--config", required=True, help="TOML experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="bound on kernel-internal threads; never changes results",
    )
    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            violations = validate(args.config)
        except ConfigError as exc:
            print(exc, file=sys.stderr)
            return 2
        for v in violations:
            print(v)
        return 0 if not violations else 2

    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "workers": args.workers,
        "kind": args.command,  # the subcommand wins over the config's kind
    }
    return run(args.config, overrides)


if __name__ == "__main__":
    sys.exit(main())
