"""Command-line front end: ``quditgates <command> --config job.toml --out DIR``.

Exit codes: 0 success, 2 invalid input or failed validation, 3 solver did not converge.
"""

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
import tomli
from threadpoolctl import threadpool_limits

from . import echo as echo_mod
from .chain import InstabilityError, SolverError, TrapConfig, normal_modes
from .juggling import cyclic_shift_swaps, to_native_rotations
from .oracle import CutoffError, OracleConfig, integrate_ls, integrate_ms, mode_subset, \
    operator_deviation
from .phases import (LSAmplitudeProfile, PulseBasis, default_basis, ls_evolution, ls_phase_table,
                     ms_evolution, ms_phases)
from .shaping import (ConvergenceError, InfeasibleError, StabilizationConfig, optimize_pulse,
                      read_pulse_csv, result_metadata, sensitivity_scan, write_pulse_csv)

log = logging.getLogger("quditgates")

THREADS_ENV = "QUDITGATES_THREADS"
EXIT_OK, EXIT_INVALID, EXIT_NOCONV = 0, 2, 3


class ConfigError(ValueError):
    pass


# --- configuration -----------------------------------------------------------

def load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _get(cfg, dotted, kind, default=...):
    node = cfg
    for key in dotted.split("."):
        if not isinstance(node, dict) or key not in node:
            if default is ...:
                raise ConfigError(f"missing field {dotted}")
            return default
        node = node[key]
    if kind is float and isinstance(node, int) and not isinstance(node, bool):
        node = float(node)
    if kind is not None and not isinstance(node, kind):
        raise ConfigError(f"field {dotted}: expected {kind.__name__}, got {node!r}")
    return node


def trap_from(cfg):
    kw = {
        "num_ions": _get(cfg, "trap.num_ions", int),
        "axial_freq": _get(cfg, "trap.axial_freq", float),
        "radial_freq": _get(cfg, "trap.radial_freq", float),
        "branch": _get(cfg, "trap.branch", str, "radial"),
    }
    for key in ("ion_mass", "wavevector"):
        val = _get(cfg, f"trap.{key}", float, None)
        if val is not None:
            kw[key] = val
    try:
        return TrapConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"[trap]: {exc}") from None


def ions_from(cfg, trap):
    ions = _get(cfg, "target.ions", list)
    if len(ions) != 2 or any(not isinstance(i, int) or not 0 <= i < trap.num_ions for i in ions):
        raise ConfigError(f"field target.ions: need two indices in [0, {trap.num_ions - 1}], got {ions}")
    if ions[0] == ions[1]:
        raise ConfigError("field target.ions: the two ions must differ")
    return tuple(ions)


def basis_from(cfg, modes):
    tau = _get(cfg, "basis.duration", float)
    tones = _get(cfg, "basis.num_tones", int)
    n_min = _get(cfg, "basis.n_min", int, None)
    try:
        if n_min is None:
            return default_basis(modes, tau, tones)
        return PulseBasis(tau, tones, n_min)
    except ValueError as exc:
        raise ConfigError(f"[basis]: {exc}") from None


def stabilization_from(cfg):
    try:
        return StabilizationConfig(
            projected_per_mode=_get(cfg, "stabilization.projected_per_mode", int, 0),
            phases=tuple(_get(cfg, "stabilization.phases", list, ["12"])),
            moment_order=_get(cfg, "stabilization.moment_order", int, 0),
        )
    except ValueError as exc:
        raise ConfigError(f"[stabilization]: {exc}") from None


def scan_grid(cfg):
    offsets = _get(cfg, "scan.offsets_hz", list, None)
    if offsets is not None:
        grid = np.array(offsets, dtype=float)
    else:
        lo = _get(cfg, "scan.min_hz", float, 1.0)
        hi = _get(cfg, "scan.max_hz", float, 1000.0)
        num = _get(cfg, "scan.num", int, 16)
        if not 0 < lo < hi or num < 2:
            raise ConfigError("[scan]: need 0 < min_hz < max_hz and num >= 2")
        pos = np.geomspace(lo, hi, num)
        grid = np.concatenate([-pos[::-1], pos])
    if not np.all(np.isfinite(grid)):
        raise ConfigError("[scan]: offsets must be finite")
    return grid


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


# --- output helpers ----------------------------------------------------------

class Outputs:
    def __init__(self, out_dir, command, cfg, seed):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.cfg = cfg
        self.seed = seed
        self.artifacts = []

    def path(self, name):
        self.artifacts.append(name)
        return self.dir / name

    def write_json(self, name, data):
        with open(self.path(name), "w") as fh:
            json.dump(data, fh, sort_keys=True, indent=2)
            fh.write("\n")

    def write_text(self, name, text):
        with open(self.path(name), "w") as fh:
            fh.write(text)

    def finish(self, status):
        """Merge this run into ``manifest.json`` so several commands can share a directory."""
        path = self.dir / "manifest.json"
        manifest = {}
        if path.exists():
            try:
                manifest = json.loads(path.read_text())
            except json.JSONDecodeError:
                log.warning("replacing unreadable %s", path)
        runs = manifest.get("commands", {})
        runs[self.command] = {
            "config_hash": config_hash(self.cfg),
            "seed": self.seed,
            "status": status,
            "artifacts": sorted(set(self.artifacts)),
        }
        manifest = {
            "config_hash": config_hash(self.cfg),
            "commands": runs,
            "artifacts": sorted({a for r in runs.values() for a in r["artifacts"]}),
        }
        with open(path, "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")


def _csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# --- commands ----------------------------------------------------------------

def cmd_modes(args, cfg, out):
    from .plotting import plot_modes
    modes = normal_modes(trap_from(cfg))
    modes.to_csv(out.path("modes.csv"))
    plot_modes(modes, out.path("modes.png"))
    return EXIT_OK


def _setup_target(cfg):
    trap = trap_from(cfg)
    modes = normal_modes(trap)
    ions = ions_from(cfg, trap)
    basis = basis_from(cfg, modes)
    return trap, modes, ions, basis


def cmd_shape(args, cfg, out):
    from .plotting import plot_pulse
    trap, modes, ions, basis = _setup_target(cfg)
    chi = _get(cfg, "target.chi", float)
    stab = stabilization_from(cfg)
    status = EXIT_OK
    try:
        res = optimize_pulse(basis, modes, ions, chi, stab, seed=out.seed)
    except ConvergenceError as exc:
        log.error("%s", exc)
        if exc.best is None:
            return EXIT_NOCONV
        res, status = exc.best, EXIT_NOCONV
    write_pulse_csv(res.pulse, out.path("pulse.csv"))
    meta = result_metadata(res, chi)
    meta["config_hash"] = config_hash(cfg)
    meta["basis"] = {"duration": basis.duration, "num_tones": basis.num_tones, "n_min": basis.n_min}
    meta["ions"] = list(ions)
    meta["stabilization"] = {"projected_per_mode": stab.projected_per_mode,
                             "phases": list(stab.phases), "moment_order": stab.moment_order}
    out.write_json("result.json", meta)
    plot_pulse(res.pulse, out.path("pulse.png"))
    log.info("chi_12 = %.12g, max|alpha| = %.3e, Omega_max/2pi = %.1f kHz",
             meta["chi_12"], meta["max_alpha"], meta["max_rabi_hz"] / 1e3)
    if not res.converged:
        status = EXIT_NOCONV
    return status


def _load_pulse(args, cfg, modes, out):
    path = Path(args.pulse) if args.pulse else out.dir / "pulse.csv"
    if not path.exists():
        raise ConfigError(f"pulse file {path} not found; run `shape` first or pass --pulse")
    try:
        return read_pulse_csv(path, basis_from(cfg, modes))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_scan(args, cfg, out):
    from .plotting import plot_scan
    trap, modes, ions, basis = _setup_target(cfg)
    pulse = _load_pulse(args, cfg, modes, out)
    grid = scan_grid(cfg)
    ref = _get(cfg, "target.chi", float) if _get(cfg, "scan.relative", bool, False) else None
    table = sensitivity_scan(pulse, trap, ions, grid, normalize=ref)
    rows = [[r[0] / 1e3, *r[1:]] for r in table]
    _csv(out.path("scan.csv"), ["offset_khz", "dchi_11", "dchi_12", "dchi_22", "max_alpha"], rows)
    plot_scan(table, out.path("scan.png"))
    return EXIT_OK


def _profile_from(cfg, d, seed):
    theta = _get(cfg, "echo.theta", list, None)
    ac = _get(cfg, "echo.ac_phases", list, None)
    try:
        if theta is None:
            prof = echo_mod.generic_profile(d, np.random.default_rng(seed))
            theta = prof.theta
        return LSAmplitudeProfile(np.array(theta, dtype=float),
                                  None if ac is None else np.array(ac, dtype=float))
    except ValueError as exc:
        raise ConfigError(f"[echo]: {exc}") from None


def cmd_echo(args, cfg, out):
    from .plotting import plot_ledger
    kind = _get(cfg, "echo.type", str)
    d = _get(cfg, "echo.d", int)
    try:
        if kind == "c_partial":
            seq = echo_mod.build_partial(d)
        else:
            shift = tuple(_get(cfg, "echo.final_shift", list, [1, -1]))
            seq = echo_mod.build_sequence(kind, d, final_shift=shift)
    except echo_mod.SequenceError as exc:
        hint = ' (set echo.type = "c_partial")' if kind == "c" and d % 2 else ""
        raise ConfigError(f"{exc}{hint}") from None
    prof = _profile_from(cfg, d, out.seed)
    if prof.d != d:
        raise ConfigError(f"[echo]: theta has {prof.d} entries but d = {d}")
    table = ls_phase_table(_get(cfg, "echo.chi_12", float, math.pi / 8),
                           _get(cfg, "echo.chi_11", float, 0.0),
                           _get(cfg, "echo.chi_22", float, 0.0), prof)
    ledger = echo_mod.simulate_ledger(seq, table)
    blocks = echo_mod.distinct_phases(ledger)
    uni = echo_mod.nonentangling_uniformity(seq, table)
    _, native = echo_mod.expand_to_native(seq)
    out.write_text("program.txt", seq.to_text())
    ledger.to_csv(out.path("ledger.csv"))
    out.write_json("echo_report.json", {
        "type": seq.type_tag,
        "d": d,
        "theta": [float(x) for x in prof.theta],
        "ls_applications": seq.num_ls,
        "native_rotations_per_ion": list(native),
        "distinct_phases": len(blocks),
        "blocks": [{"phase": b.phase, "states": [list(s) for s in b.states]} for b in blocks],
        "nonentangling_global": uni.is_global,
        "nonentangling_spread": uni.spread,
    })
    plot_ledger(ledger, out.path("ledger.png"))
    print(f"{len(blocks)} distinct entangling phases over {d * d} states")
    return EXIT_OK


def cmd_shift(args, cfg, out):
    seq = cyclic_shift_swaps(args.d, args.m)
    lines = [f"# X_{seq.m} on d = {seq.d}: {len(seq)} swaps with level 0",
             " ".join(str(s) for s in seq.swaps)]
    lines += [r.text() for r in to_native_rotations(seq)]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if out is not None:
        out.write_text("shift.txt", text)
    return EXIT_OK


def cmd_validate(args, cfg, out):
    trap, modes, ions, basis = _setup_target(cfg)
    pulse = _load_pulse(args, cfg, modes, out)
    try:
        ocfg = OracleConfig(
            fock_cutoff=_get(cfg, "oracle.fock_cutoff", int, 8),
            included_modes=tuple(_get(cfg, "oracle.modes", list, [0, 1])),
            steps_per_period=_get(cfg, "oracle.steps_per_period", int, 20),
            d=_get(cfg, "oracle.d", int, 2),
            ions=ions,
        )
        sub = mode_subset(modes, ocfg.included_modes)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"[oracle]: {exc}") from None
    tol = _get(cfg, "oracle.tolerance", float, 1e-3)
    report = {"modes": list(ocfg.included_modes), "fock_cutoff": ocfg.fock_cutoff,
              "tolerance": tol}
    ok = True
    try:
        res = integrate_ms(pulse, modes, ocfg)
        ref = ms_evolution(ms_phases(pulse, sub, ions), ocfg.d)
        dev = operator_deviation(res.operator, ref)
        report["ms"] = {"deviation": dev, "leakage": res.leakage, "steps": res.steps,
                        "unitarity_error": res.unitarity_error,
                        "truncation_population": res.max_truncation_population}
        ok &= dev < tol and res.leakage < 1e-4
        theta = _get(cfg, "oracle.theta", list, None)
        if theta is not None:
            prof = LSAmplitudeProfile(np.array(theta, dtype=float))
            lcfg = OracleConfig(ocfg.fock_cutoff, ocfg.included_modes, ocfg.steps_per_period,
                                prof.d, ions)
            lres = integrate_ls(pulse, modes, prof, lcfg)
            ph = ms_phases(pulse, sub, ions)
            lref = ls_evolution(ls_phase_table(ph.chi_12, ph.chi_11, ph.chi_22, prof))
            ldev = operator_deviation(lres.operator, lref)
            report["ls"] = {"deviation": ldev, "leakage": lres.leakage, "steps": lres.steps}
            ok &= ldev < tol and lres.leakage < 1e-4
    except CutoffError as exc:
        report["error"] = str(exc)
        ok = False
    report["passed"] = bool(ok)
    out.write_json("validation.json", report)
    print(json.dumps(report, sort_keys=True, indent=2))
    return EXIT_OK if ok else EXIT_INVALID


COMMANDS = {
    "modes": cmd_modes,
    "shape": cmd_shape,
    "scan": cmd_scan,
    "echo": cmd_echo,
    "shift": cmd_shift,
    "validate": cmd_validate,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="quditgates", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "shift":
            p.add_argument("d", type=int)
            p.add_argument("m", type=int)
            p.add_argument("--out", default=None)
        else:
            p.add_argument("--config", required=True)
            p.add_argument("--out", default="out")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        if name in ("scan", "validate"):
            p.add_argument("--pulse", default=None, help="pulse CSV (default OUT/pulse.csv)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads or int(os.environ.get(THREADS_ENV, "1"))
    try:
        if args.command == "shift":
            if args.d < 2:
                raise ConfigError("d must be at least 2")
            cfg = {"shift": {"d": args.d, "m": args.m}}
            out = Outputs(args.out, "shift", cfg, args.seed) if args.out else None
            code = cmd_shift(args, cfg, out)
        else:
            cfg = load_config(args.config)
            seed = args.seed if args.seed is not None else _get(cfg, "seed", int, 0)
            cfg = {**cfg, "seed": seed}
            out = Outputs(args.out, args.command, cfg, seed)
            with threadpool_limits(limits=threads):
                code = COMMANDS[args.command](args, cfg, out)
        if out is not None:
            out.finish(code)
        return code
    except (ConfigError, InfeasibleError, InstabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
