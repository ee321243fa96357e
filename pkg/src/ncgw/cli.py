"""Command-line entry point: ``ncgw <subcommand> [--config PATH] [--out DIR] ...``.

Exit codes: 0 when every oracle check passes (printed-formula mismatches are
reported but allowed), 1 on an oracle failure, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import checks
from . import invariant as inv
from . import observables as obs
from . import outputs
from .params import ParameterError, PhysicalParams, derive_constants, params_from_mapping
from .report import DiscrepancyReport, encode
from .states import DomainError, NormalizationError, lr_solution, phi_lambda, psi_packet, write_dump
from .tdse import PropagatorConfig, invariant_drift, lr_grid, propagate, random_gaussian_mixture, verify_lr_solution

EXIT_OK, EXIT_ORACLE, EXIT_CONFIG = 0, 1, 2

# regime R0: the reference parameter set; tau = pi/(4 omega) avoids the
# degenerate printed constants, kappa = hbar keeps the packet normalizable
R0 = {"m": 1.0, "g": 1.0, "hbar": 1.0, "theta": 0.05, "eta": 0.1, "tau": math.pi / 4 / 0.1, "kappa": 1.0}
# regime R1: unit frequency and width, used for grid propagation
R1 = {"m": 1.0, "g": 0.1, "hbar": 1.0, "theta": 0.05, "eta": 1.0, "tau": math.pi / 4, "kappa": 1.0}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: PhysicalParams = field(default_factory=lambda: PhysicalParams(**R0))
    grid_n: int = 128
    padding_sigmas: float = 12.0
    t0: float = 0.0
    t1: float | None = None
    samples: int = 129
    expect_samples: int = 9
    n_cut: int = 16
    propagation: PhysicalParams = field(default_factory=lambda: PhysicalParams(**R1))
    prop_periods: float = 1.0
    per_period: int = 1000
    lam: float = 0.0
    fixtures_dir: str | None = None
    output_dir: str = "ncgw-out"

    @property
    def t_end(self) -> float:
        if self.t1 is not None:
            return self.t1
        return self.t0 + 2 * math.pi / derive_constants(self.params).omega

    def hashable(self) -> dict:
        """Everything that affects numbers (output locations excluded)."""
        return {
            "params": self.params.to_dict(),
            "grid": {"n": self.grid_n, "padding_sigmas": self.padding_sigmas},
            "times": {"t0": self.t0, "t1": self.t_end, "samples": self.samples, "expect_samples": self.expect_samples},
            "n_cut": self.n_cut,
            "propagation": {
                "params": self.propagation.to_dict(),
                "periods": self.prop_periods,
                "per_period": self.per_period,
                "lambda": self.lam,
            },
        }

    def hash(self) -> str:
        return outputs.config_hash(self.hashable())

    def fixtures(self) -> Path:
        default = self.fixtures_dir or str(Path(self.output_dir) / "fixtures")
        return outputs.fixtures_dir(default)


PARAM_KEYS = set(R0)
TOP_KEYS = {"params", "grid", "times", "n_cut", "propagation", "fixtures_dir", "output_dir"}


def _params(block, base: dict, where: str) -> PhysicalParams:
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    unknown = set(block) - PARAM_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(sorted(unknown))}")
    merged = dict(base, **block)
    try:
        return params_from_mapping(merged)
    except ParameterError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _sub(block: dict, allowed: set, where: str) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(sorted(unknown))}")
    return block


def config_from_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse a run configuration.

    Either a flat parameter object ({"m", "g", "hbar", "theta", "eta", "tau",
    "kappa"}, missing keys taken from regime R0) or an object with a
    ``params`` block and optional ``grid``, ``times``, ``propagation``,
    ``n_cut``, ``fixtures_dir``, ``output_dir``.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    if not set(data) & TOP_KEYS:
        return RunConfig(params=_params(data, R0, f"{source}: params"))
    _sub(data, TOP_KEYS, source)
    cfg = RunConfig(params=_params(data.get("params", {}), R0, f"{source}: params"))
    g = _sub(data.get("grid", {}), {"n", "padding_sigmas"}, f"{source}: grid")
    t = _sub(data.get("times", {}), {"t0", "t1", "samples", "expect_samples"}, f"{source}: times")
    pr = _sub(data.get("propagation", {}), {"params", "periods", "per_period", "lambda"}, f"{source}: propagation")
    try:
        cfg = replace(
            cfg,
            grid_n=int(g.get("n", cfg.grid_n)),
            padding_sigmas=float(g.get("padding_sigmas", cfg.padding_sigmas)),
            t0=float(t.get("t0", cfg.t0)),
            t1=None if t.get("t1") is None else float(t["t1"]),
            samples=int(t.get("samples", cfg.samples)),
            expect_samples=int(t.get("expect_samples", cfg.expect_samples)),
            n_cut=int(data.get("n_cut", cfg.n_cut)),
            propagation=_params(pr.get("params", {}), R1, f"{source}: propagation.params"),
            prop_periods=float(pr.get("periods", cfg.prop_periods)),
            per_period=int(pr.get("per_period", cfg.per_period)),
            lam=float(pr.get("lambda", cfg.lam)),
            fixtures_dir=data.get("fixtures_dir"),
            output_dir=str(data.get("output_dir", cfg.output_dir)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    check_config(cfg)
    return cfg


def check_config(cfg: RunConfig) -> None:
    if cfg.samples < 2:
        raise ConfigError("times.samples must be >= 2")
    if cfg.expect_samples < 1:
        raise ConfigError("times.expect_samples must be >= 1")
    if cfg.t_end <= cfg.t0:
        raise ConfigError("times.t1 must exceed times.t0")
    if cfg.grid_n < 64 or cfg.grid_n & (cfg.grid_n - 1):
        raise ConfigError("grid.n must be a power of two >= 64")
    if cfg.n_cut < 8:
        raise ConfigError("n_cut must be >= 8")


def load_config(args) -> RunConfig:
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        cfg = config_from_text(text, str(path))
    else:
        cfg = RunConfig()
    if args.tau is not None:
        try:
            cfg = replace(cfg, params=cfg.params.replace(tau=args.tau))
        except ParameterError as exc:
            raise ConfigError(f"--tau: {exc}") from exc
    if args.grid is not None:
        cfg = replace(cfg, grid_n=args.grid)
    if getattr(args, "samples", None) is not None:
        cfg = replace(cfg, samples=args.samples)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    check_config(cfg)
    return cfg


# ---------------------------------------------------------------------------
# output builders


def coeff_rows(cfg: RunConfig):
    cf = inv.closed_form_coeffs(cfg.params)
    for t in np.linspace(cfg.t0, cfg.t_end, cfg.samples):
        row = [float(t)]
        for v in cf.vector(float(t)):
            row += [v.real, v.imag]
        yield row


COEFF_HEADER = ["t"] + [f"{c}_{part}" for c in inv.COMPONENTS for part in ("re", "im")]
EXPECT_QUANTITIES = list(obs.MOMENT_KEYS) + list(obs.SECOND_KEYS) + ["dx", "dpx", "product"]
EXPECT_HEADER = ["t", "source", "status"] + [f"{q}_{part}" for q in EXPECT_QUANTITIES for part in ("re", "im")]
UNCERT_HEADER = ["t", "product_oracle", "product_paper", "f_paper", "flag"]


def expect_times(cfg: RunConfig) -> np.ndarray:
    return np.linspace(cfg.t0, cfg.t_end, cfg.expect_samples)


def expectation_rows(cfg: RunConfig):
    p = cfg.params
    for t in expect_times(cfg):
        t = float(t)
        w = psi_packet(None, t, p, n_min=cfg.grid_n, pad=cfg.padding_sigmas)
        o = obs.oracle_expectations(w, p.hbar, p.tau)
        yield _expect_row(t, "oracle", "ok", o.row())
        try:
            pe = obs.paper_expectations(t, p)
            yield _expect_row(t, "paper", "ok", pe.row())
        except obs.DegenerateError:
            yield _expect_row(t, "paper", "paper-degenerate", [complex(math.nan, math.nan)] * len(EXPECT_QUANTITIES))


def _expect_row(t, source, status, vals):
    row = [t, source, status]
    for v in vals:
        v = complex(v)
        row += [v.real, v.imag]
    return row


def run_uncertainty(cfg: RunConfig):
    return obs.uncertainty_scan((cfg.t0, cfg.t_end), cfg.samples, cfg.params, n_min=cfg.grid_n)


def uncertainty_rows(tr):
    for t, po, pp, f, flag in zip(tr.times, tr.product_oracle, tr.product_paper, tr.f_paper, tr.flags):
        yield [float(t), float(po), float(pp), float(f), flag or "ok"]


def full_report(cfg: RunConfig, trace=None) -> tuple[DiscrepancyReport, dict]:
    """Every oracle check and printed-formula comparison."""
    p = cfg.params
    rep, alg, lad = checks.algebra_checks(p, cfg.n_cut)
    checks.phase_checks(p, rep)
    checks.state_checks(p, n_min=max(cfg.grid_n, 256), rep=rep)
    _, scans = checks.kappa_checks(p, rep)
    _, tr = checks.squeezing_checks(p, n_min=cfg.grid_n, rep=rep)
    rep.extend(obs.discrepancy_report(p, expect_times(cfg), n_min=cfg.grid_n))
    fid = lr_check(cfg, rep)
    extra = {
        "algebra": alg.to_dict(),
        "ladder": lad.to_dict(),
        "kappa_scans": {k: {"kappa": s.kappa, "half_widths": s.half_widths.tolist(), "log_norms": s.log_norms.tolist()} for k, s in scans.items()},
        "uncertainty_minima": {"oracle": tr.minima, "paper": tr.paper_minima},
        "lr_fidelity": fid,
    }
    return rep, extra


def lr_check(cfg: RunConfig, rep: DiscrepancyReport) -> dict:
    """Propagate psi_lambda in the propagation regime and compare with the exact solution."""
    q = cfg.propagation
    period = 2 * math.pi / derive_constants(q).omega
    t_end = cfg.prop_periods * period
    pc = PropagatorConfig.default(q, t_end, per_period=cfg.per_period)
    fr = verify_lr_solution(cfg.lam, t_end, q, pc)
    rep.check("tdse.lr_fidelity", 1 - fr.fidelity, 1e-5, note=f"lambda = {cfg.lam:g}, propagation regime")
    rep.check("tdse.norm_drift", fr.norm_drift, 1e-8 * max(1.0, fr.steps / 1000))
    rep.add(
        "tdse.printed_profile_fidelity",
        1.0,
        fr.printed_profile_fidelity,
        time=t_end,
        note="fidelity of the propagated state with the printed eigenfunction (no drift factor)",
    )
    rep.add(
        "tdse.phase_increment",
        fr.printed_phase_increment,
        fr.numeric_phase_increment,
        time=t_end,
        note=f"printed Re(nu) increment vs propagated global phase (exact {fr.exact_phase_increment:.10g})",
    )
    return fr.to_dict()


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(cfg, args) -> int:
    rep, alg, lad = checks.algebra_checks(cfg.params, cfg.n_cut)
    checks.phase_checks(cfg.params, rep)
    checks.squeezing_checks(cfg.params, method="gaussian", rep=rep)
    print(rep.summary())
    if args.out:
        outputs.write_json(
            Path(cfg.output_dir) / "validate.json",
            {"config_sha256": cfg.hash(), "algebra": alg.to_dict(), "ladder": lad.to_dict(), "report": rep.to_dict()},
        )
    return EXIT_OK if rep.oracle_ok else EXIT_ORACLE


def cmd_coeffs(cfg, args) -> int:
    path = outputs.write_csv(Path(cfg.output_dir) / "coeffs.csv", COEFF_HEADER, coeff_rows(cfg), cfg.hash())
    print(path)
    return EXIT_OK


def cmd_state(cfg, args) -> int:
    p = cfg.params
    if args.mode == "phi":
        w = phi_lambda(None, args.lam, inv.closed_form_coeffs(p), args.t, n_min=cfg.grid_n)
    else:
        w = psi_packet(None, args.t, p, mode=args.mode, n_min=cfg.grid_n, pad=cfg.padding_sigmas)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path, side = write_dump(w, out / f"state_{args.mode}.bin")
    o = obs.oracle_expectations(w, p.hbar, p.tau)
    print(json.dumps(encode({"dump": str(path), "grid": w.grid.to_dict(), "norm": w.norm(), "means": o.means, "product": o.product}), sort_keys=True))
    return EXIT_OK


def cmd_expect(cfg, args) -> int:
    path = outputs.write_csv(Path(cfg.output_dir) / "expectations.csv", EXPECT_HEADER, expectation_rows(cfg), cfg.hash())
    print(path)
    return EXIT_OK


def cmd_uncertainty(cfg, args) -> int:
    tr = run_uncertainty(cfg)
    path = outputs.write_csv(Path(cfg.output_dir) / "uncertainty.csv", UNCERT_HEADER, uncertainty_rows(tr), cfg.hash())
    print(path)
    for t, v in tr.minima:
        print(f"oracle minimum t = {t:.12g}  product = {v:.12g}")
    ok = np.nanmin(tr.product_oracle) >= cfg.params.hbar / 2 * (1 - 1e-9)
    return EXIT_OK if ok else EXIT_ORACLE


def cmd_evolve(cfg, args) -> int:
    q = cfg.propagation
    period = 2 * math.pi / derive_constants(q).omega
    t_end = args.t_end if args.t_end is not None else cfg.prop_periods * period
    dt = args.dt if args.dt is not None else period / cfg.per_period
    n = max(1, math.ceil(round(t_end / dt, 9)))
    pc = PropagatorConfig(dt=t_end / n, n_steps=n, scheme=args.scheme, order=args.order)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    gs = lr_grid(args.lam, t_end, q, n_min=cfg.grid_n)
    if args.random:
        w0 = random_gaussian_mixture(gs, np.random.default_rng(args.seed))
    else:
        w0 = lr_solution(gs, args.lam, 0.0, q).normalized()
    dumps = []

    def cb(i, w):
        if args.dump_every and i % args.dump_every == 0:
            dumps.append(str(write_dump(w, out / f"evolve_{i:07d}.bin")[0]))

    if args.dump_every and args.dump_every % 10:
        pc = replace(pc, check_every=math.gcd(10, args.dump_every))
    result: dict = {"t_end": t_end, "dt": pc.dt, "n_steps": n, "scheme": args.scheme, "grid": gs.to_dict()}
    if args.random:
        d = invariant_drift(w0, q, pc)
        result.update(invariant_drift=d.drift, energy_drift=d.energy_drift, norm_drift=d.norm_drift)
        ok = d.drift < 1e-6
        if args.dump_every:
            propagate(w0, q, pc, callback=cb)
    else:
        fr = verify_lr_solution(args.lam, t_end, q, pc, gs)
        result.update(fr.to_dict())
        ok = fr.ok
        if args.dump_every:
            propagate(w0, q, pc, callback=cb)
    result["dumps"] = dumps
    outputs.write_json(out / "evolve.json", encode(result))
    print(json.dumps(encode({k: v for k, v in result.items() if k != "dumps"}), sort_keys=True))
    return EXIT_OK if ok else EXIT_ORACLE


def cmd_report(cfg, args) -> int:
    rep, extra = full_report(cfg)
    doc = {"config_sha256": cfg.hash(), **rep.to_dict(), "details": encode(extra)}
    outputs.write_json(Path(cfg.output_dir) / "discrepancies.json", doc)
    print(rep.summary())
    return EXIT_OK if rep.oracle_ok else EXIT_ORACLE


def cmd_pipeline(cfg, args) -> int:
    out = Path(cfg.output_dir)
    h = cfg.hash()
    started = time.perf_counter()
    outputs.write_csv(out / "coeffs.csv", COEFF_HEADER, coeff_rows(cfg), h)
    outputs.write_csv(out / "expectations.csv", EXPECT_HEADER, list(expectation_rows(cfg)), h)
    tr = run_uncertainty(cfg)
    outputs.write_csv(out / "uncertainty.csv", UNCERT_HEADER, uncertainty_rows(tr), h)
    rep, extra = full_report(cfg)

    golden = {"product_t0": float(tr.product_oracle[0])}
    for i, (t, v) in enumerate(tr.minima):
        golden[f"min{i}_t"], golden[f"min{i}_value"] = t, v
    fx = outputs.check_or_record(cfg.fixtures(), f"pipeline-{h[:12]}", golden, rtol=1e-8)
    rep.check("fixtures.regression", 0.0 if fx["status"] != "mismatch" else 1.0, 0.0, note=fx["status"])

    doc = {"config_sha256": h, **rep.to_dict(), "details": encode(extra), "fixtures": encode(fx)}
    outputs.write_json(out / "discrepancies.json", doc)
    _plots(cfg, tr, out)
    print(rep.summary())
    print(f"pipeline finished in {time.perf_counter() - started:.1f} s; outputs in {out}")
    return EXIT_OK if rep.oracle_ok else EXIT_ORACLE


def _plots(cfg, tr, out: Path) -> None:
    p = cfg.params
    outputs.plot_lines(
        out / "uncertainty.svg",
        tr.times,
        {"oracle": tr.product_oracle, "printed": tr.product_paper},
        "t",
        "dx dpx",
        hline=p.hbar / 2,
    )
    cf = inv.closed_form_coeffs(p)
    ts = np.linspace(cfg.t0, cfg.t_end, cfg.samples)
    vals = np.array([cf.vector(float(t)) for t in ts])
    outputs.plot_lines(out / "coeffs.svg", ts, {n: np.abs(vals[:, i]) for i, n in enumerate(inv.COMPONENTS)}, "t", "modulus")
    for i, t in enumerate(np.linspace(cfg.t0, cfg.t_end, 3)):
        w = psi_packet(None, float(t), p, n_min=cfg.grid_n, pad=cfg.padding_sigmas, check_convergence=False)
        outputs.plot_density(out / f"density_{i}.svg", w, f"t = {t:.4g}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed for random test packets")
    common.add_argument("--grid", type=int, help="grid points per axis (power of two)")
    common.add_argument("--tau", type=float, help="override the phase parameter tau")
    common.add_argument("--samples", type=int, help="override the number of time samples")

    parser = argparse.ArgumentParser(prog="ncgw", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="algebraic oracle checks")
    sub.add_parser("coeffs", parents=[common], help="write coeffs.csv")
    st = sub.add_parser("state", parents=[common], help="sample a state and write a binary dump")
    st.add_argument("--t", type=float, default=0.0)
    st.add_argument("--mode", choices=["lambda_quadrature", "closed_form", "phi"], default="lambda_quadrature")
    st.add_argument("--lam", type=float, default=0.0)
    sub.add_parser("expect", parents=[common], help="write expectations.csv")
    sub.add_parser("uncertainty", parents=[common], help="write uncertainty.csv")
    ev = sub.add_parser("evolve", parents=[common], help="grid propagation in the propagation regime")
    ev.add_argument("--t-end", type=float)
    ev.add_argument("--dt", type=float)
    ev.add_argument("--scheme", choices=["split_operator_4way", "crank_nicolson"], default="split_operator_4way")
    ev.add_argument("--order", type=int, choices=[2, 4], default=2)
    ev.add_argument("--dump-every", type=int, default=0)
    ev.add_argument("--lam", type=float, default=0.0)
    ev.add_argument("--random", action="store_true", help="start from a seeded random Gaussian mixture")
    sub.add_parser("report", parents=[common], help="write discrepancies.json")
    sub.add_parser("pipeline", parents=[common], help="run everything")
    return parser


COMMANDS = {
    "validate": cmd_validate,
    "coeffs": cmd_coeffs,
    "state": cmd_state,
    "expect": cmd_expect,
    "uncertainty": cmd_uncertainty,
    "evolve": cmd_evolve,
    "report": cmd_report,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args)
    except (DomainError, NormalizationError, obs.DegenerateError) as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
