"""Command-line interface.

Settings resolve in the order defaults < ``--config`` JSON file < ``SIMGAP_*``
environment variables < command-line flags. Exit codes: 0 success,
2 invalid input, 3 numerical failure, 4 file errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields

from . import io as sio
from ._certified import DEFAULT_MESH, DEFAULT_SLACK_CAP
from ._validation import alpha_grid as parse_alpha_grid
from ._validation import check_eta, check_gamma, check_positive
from .calibration import DEFAULT_ETA, band_table
from .confidence_sets import DEFAULT_GAMMA
from .discrepancy import parse_mode
from .domain import BoundedScalar, Empirical1D, Simplex
from .estimators import SimToRealCalibrator, PairwiseComparator
from .exceptions import NumericalError, ValidationError
from .synthetic import EXPERIMENTS, GeneratorConfig

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
ENV_PREFIX = "SIMGAP_"
SUBCOMMANDS = ("calibrate", "compare", "band", "new-scenario", "simulate")


@dataclass
class RunConfig:
    subcommand: str = "calibrate"
    input: str = None
    out: str = "simgap_out"
    gamma: float = DEFAULT_GAMMA
    eta: float = DEFAULT_ETA
    loss: str = "auto"
    smoothing: float = 0.0
    sigma: float = None
    mode: str = "sim_estimate"
    alpha_grid: object = None
    mesh: float = DEFAULT_MESH
    slack_cap: float = DEFAULT_SLACK_CAP
    n_jobs: int = None
    seed: int = None
    # new-scenario
    q_hat: object = None
    alpha: float = None
    # band
    taus: object = None
    # simulate
    experiment: str = None
    generator: dict = field(default_factory=dict)
    experiment_params: dict = field(default_factory=dict)

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValidationError(f"subcommand must be one of {SUBCOMMANDS}")
        check_gamma(self.gamma)
        check_eta(self.eta)
        check_positive(self.mesh, "mesh")
        check_positive(self.slack_cap, "slack_cap")
        if self.sigma is not None:
            check_positive(self.sigma, "sigma")
        if self.smoothing < 0:
            raise ValidationError(f"smoothing must be >= 0, got {self.smoothing}")
        parse_mode(self.mode)
        parse_alpha_grid(self.alpha_grid)
        if self.subcommand == "simulate":
            if self.experiment not in EXPERIMENTS:
                raise ValidationError(f"--experiment must be one of {sorted(EXPERIMENTS)}")
        elif self.input is None:
            raise ValidationError(f"{self.subcommand} needs an input file")
        if self.subcommand == "new-scenario" and (self.q_hat is None or self.alpha is None):
            raise ValidationError("new-scenario needs --q-hat and --alpha")
        return self

    def to_dict(self):
        return asdict(self)


_FIELDS = {f.name: f for f in fields(RunConfig)}
# keys that may come from a config file or the environment
_FILE_KEYS = set(_FIELDS) - {"subcommand"}


def _coerce(name, value):
    """Convert an environment string to the field's type."""
    if name in ("gamma", "eta", "smoothing", "sigma", "mesh", "slack_cap", "alpha"):
        return float(value)
    if name in ("n_jobs", "seed"):
        return int(value)
    if name in ("generator", "experiment_params", "q_hat"):
        return json.loads(value)
    return value


def load_config_file(path):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    unknown = sorted(set(data) - _FILE_KEYS)
    if unknown:
        raise ValidationError(f"unknown config keys: {unknown}")
    return data


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    out = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower()
        if name not in _FILE_KEYS:
            raise ValidationError(f"unknown environment setting {key}")
        try:
            out[name] = _coerce(name, value)
        except ValueError as exc:
            raise ValidationError(f"{key}: {exc}") from None
    return out


def resolve_config(args, environ=None) -> RunConfig:
    merged = {}
    if args.config:
        merged.update(load_config_file(args.config))
    merged.update(env_overrides(environ))
    merged.update({k: v for k, v in vars(args).items() if k in _FIELDS and v is not None})
    merged["subcommand"] = args.subcommand
    if args.subcommand == "simulate" and args.seed is not None:
        merged["generator"] = {**merged.get("generator", {}), "seed": args.seed}
    return RunConfig(**merged).validate()


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with run settings")
    common.add_argument("--out", help="output directory")
    common.add_argument("--gamma", type=float, help="per-scenario confidence level (default 0.5)")
    common.add_argument("--eta", type=float, help="failure probability of the coverage statement (default 0.05)")
    common.add_argument("--loss", help="squared, absolute, kl, tv, w1 or auto")
    common.add_argument("--smoothing", type=float, help="additive smoothing for the KL loss")
    common.add_argument("--sigma", type=float, help="sub-Gaussian parameter for W1 sets")
    common.add_argument("--mode", help="sim_estimate or true_sim")
    common.add_argument("--alpha-grid", dest="alpha_grid", help="'a:b:step' or comma list (default 0.01:0.99:0.01)")
    common.add_argument("--mesh", type=float, help="certified search resolution")
    common.add_argument("--slack-cap", dest="slack_cap", type=float, help="largest tolerated certified slack")
    common.add_argument("--n-jobs", dest="n_jobs", type=int, help="parallel workers")

    parser = argparse.ArgumentParser(prog="simgap", description="Calibrate and compare simulators against real data.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, text in (("calibrate", "calibrated quantile curve, coverage table and summaries"),
                       ("compare", "certify that simulator 1 is at least as good as simulator 2"),
                       ("band", "two-sided quantile band")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("input", help="JSON Lines scenario file")
        if name == "band":
            p.add_argument("--taus", help="comma list of levels (default 0.1, ..., 0.9)")
    p = sub.add_parser("new-scenario", parents=[common], help="plausible real parameters for a new scenario")
    p.add_argument("input", help="JSON Lines scenario file used for calibration")
    p.add_argument("--q-hat", dest="q_hat", type=json.loads, help="new simulator estimate as JSON (number or list)")
    p.add_argument("--alpha", type=float, help="coverage level alpha_bar in (0, 1]")
    p = sub.add_parser("simulate", parents=[common], help="run a synthetic experiment")
    p.add_argument("--experiment", choices=sorted(EXPERIMENTS))
    p.add_argument("--seed", type=int, help="generator seed")
    p.set_defaults(input=None)
    return parser


def _calibrator(cfg):
    return SimToRealCalibrator(gamma=cfg.gamma, eta=cfg.eta, loss=cfg.loss, smoothing=cfg.smoothing, sigma=cfg.sigma,
                               mode=cfg.mode, mesh=cfg.mesh, slack_cap=cfg.slack_cap, alpha_grid=cfg.alpha_grid,
                               n_jobs=cfg.n_jobs)


def _metadata(data):
    return {"dataset_sha256": sio.dataset_hash(data), "m": data.m, "variant": data.variant}


def _new_point(template, q_hat):
    if isinstance(template, BoundedScalar):
        return BoundedScalar(float(q_hat), template.low, template.high)
    if isinstance(template, Simplex):
        if not isinstance(q_hat, list):
            q_hat = [float(q_hat), 1.0 - float(q_hat)]
        return Simplex(tuple(q_hat))
    return Empirical1D.from_samples(q_hat, template.sigma)


def _parse_taus(taus):
    if taus is None:
        return None
    if isinstance(taus, str):
        taus = [t for t in taus.split(",") if t.strip()]
    try:
        return tuple(float(t) for t in taus)
    except ValueError:
        raise ValidationError(f"taus must be numbers, got {taus!r}") from None


def run(cfg: RunConfig):
    rc = cfg.to_dict()
    if cfg.subcommand == "simulate":
        gen = GeneratorConfig.from_dict(cfg.generator)
        fn = EXPERIMENTS[cfg.experiment]
        kwargs = dict(cfg.experiment_params)
        kwargs.setdefault("n_jobs", cfg.n_jobs)
        if cfg.experiment != "tightness":
            kwargs.setdefault("eta", cfg.eta)
        kwargs.setdefault("gamma", cfg.gamma)
        if cfg.loss != "auto":
            kwargs.setdefault("loss", cfg.loss)
        try:
            result = fn(gen, **kwargs)
        except TypeError as exc:
            raise ValidationError(f"experiment_params: {exc}") from None
        sio.emit_experiment(result, cfg.out, rc)
        return result
    data = sio.ingest(cfg.input)
    if cfg.subcommand == "compare":
        est = PairwiseComparator(gamma=cfg.gamma, eta=cfg.eta, loss=cfg.loss, smoothing=cfg.smoothing,
                                 sigma=cfg.sigma, mesh=cfg.mesh, slack_cap=cfg.slack_cap,
                                 alpha_grid=cfg.alpha_grid, n_jobs=cfg.n_jobs).fit(data)
        est.report_.metadata.update(_metadata(data))
        sio.emit_pairwise(est.report_, cfg.out, rc)
        return est.report_
    est = _calibrator(cfg).fit(data)
    if cfg.subcommand == "calibrate":
        report = est.report(_metadata(data))
        sio.emit_calibration(report, cfg.out, rc)
        return report
    if cfg.subcommand == "band":
        report = band_table(est.curve_, est.lower_curve_, cfg.gamma, _parse_taus(cfg.taus))
        sio.emit_band(report, cfg.out, rc, {"metadata": _metadata(data)})
        return report
    point = _new_point(data.records[0].q_hat, cfg.q_hat)
    region = est.predict_set(point, cfg.alpha)
    os.makedirs(cfg.out, exist_ok=True)
    sio.write_json(cfg.out, "report.json", {"new_scenario": region.to_dict(), "metadata": _metadata(data),
                                            "run_config": rc})
    text = f"alpha_bar = {region.alpha_bar!r}: L(u, q_hat) <= {region.tau!r} ({region.kind})\n"
    if region.interval is not None:
        text += f"interval = [{region.interval[0]!r}, {region.interval[1]!r}]\n"
    sio._write(cfg.out, "summary.txt", text)
    return region


def main(argv=None, environ=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args, environ)
        run(cfg)
    except ValidationError as exc:
        print(f"simgap: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"simgap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"simgap: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
