"""End-to-end acceptance criteria, one test each.

Every test records a ``CRITERION n: PASS|FAIL ...`` line that the terminal
summary prints in order, then asserts.
"""

import json
import time
from math import gcd
from pathlib import Path

import numpy as np
import pytest

from quditgates.cli import main
from quditgates.echo import (build_partial, build_sequence, class_sums, distinct_phases,
                             embedded_zz_check, generic_profile, nonentangling_uniformity,
                             simulate_ledger, smallest_prime_divisor)
from quditgates.juggling import apply_swaps, cyclic_shift_swaps, normalize_shift
from quditgates.oracle import OracleConfig, integrate_ls, integrate_ms, operator_deviation
from quditgates.phases import (LSAmplitudeProfile, PulseBasis, PulseShape, displacements,
                               ls_evolution, ls_phase_table, ms_evolution, ms_phases)
from quditgates.shaping import existence_theta, sensitivity_scan

import conftest
from conftest import CHAIN_CHI, CHAIN_IONS, CHAIN_TRAP, SMALL_CHI
from oracles import alpha_quad, random_modes, theta_ode

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def record(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    conftest.ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def test_criterion_1_decoupling(tmp_path):
    text = (CONFIGS / "chain10.toml").read_text()
    cfg = tmp_path / "none.toml"
    cfg.write_text(text.replace("projected_per_mode = 5", "projected_per_mode = 0")
                       .replace("moment_order = 1", "moment_order = 0"))
    t0 = time.perf_counter()
    code = main(["shape", "--config", str(cfg), "--out", str(tmp_path / "out")])
    elapsed = time.perf_counter() - t0
    meta = json.loads((tmp_path / "out" / "result.json").read_text())
    ok = (code == 0 and meta["converged"] and meta["max_alpha"] < 1e-8
          and abs(meta["chi_12"] - CHAIN_CHI) < 1e-9
          and abs(meta["chi_11"]) < 1e-9 and abs(meta["chi_22"]) < 1e-9 and elapsed < 300)
    record(1, ok, f"max|alpha|={meta['max_alpha']:.1e} chi_12-pi/8={meta['chi_12'] - CHAIN_CHI:.1e} "
                  f"chi_11={meta['chi_11']:.1e} chi_22={meta['chi_22']:.1e} time={elapsed:.0f}s")


def test_criterion_2_table_ordering(chain_results):
    khz = {k: r.max_rabi / (2 * np.pi) / 1e3 for k, r in chain_results.items()}
    ref = {"none": 121.0, "chi12": 322.0, "all": 431.0}
    within = all(0.5 * ref[k] <= khz[k] <= 1.5 * ref[k] for k in ref)
    strict = khz["none"] < khz["chi12"] < khz["all"]
    conv = all(r.converged for r in chain_results.values())
    record(2, within and strict and conv,
           "Omega_max/2pi kHz " + " ".join(f"{k}={v:.2f}" for k, v in khz.items())
           + f" within50%={within} strict_order={strict}")


def test_criterion_3_sensitivity(chain_results):
    grid = np.geomspace(10.0, 100.0, 6)
    plain = sensitivity_scan(chain_results["none"].pulse, CHAIN_TRAP, CHAIN_IONS, np.r_[grid, 200.0])
    stab = sensitivity_scan(chain_results["chi12"].pulse, CHAIN_TRAP, CHAIN_IONS, [200.0])
    slope = np.polyfit(np.log(grid), np.log(plain[:-1, 2]), 1)[0]
    ratio = plain[-1, 2] / stab[0, 2]
    record(3, ratio >= 100 and abs(slope - 1.0) <= 0.2,
           f"ratio at 200 Hz={ratio:.1f} (need >=100) slope 10-100 Hz={slope:.2f} (need 1.0+-0.2)")


def test_criterion_4_closed_forms_vs_quadrature():
    rng = np.random.default_rng(2024)
    worst_a = worst_c = 0.0
    for _ in range(100):
        tones = int(rng.integers(1, 33))
        b = PulseBasis(1.0, tones, int(rng.integers(1, 20)))
        p = PulseShape(b, rng.normal(size=tones))
        m = random_modes(rng, int(rng.integers(1, 4)), n_ions=2, f_lo=0.5, f_hi=b.harmonics[-1] + 2)
        a = displacements(p, m)
        a_ref = np.array([[alpha_quad(p, w, e) for e in row]
                          for w, row in zip(m.frequencies, m.lamb_dicke)])
        worst_a = max(worst_a, np.max(np.abs(a - a_ref)) / np.max(np.abs(a_ref)))
        th = np.array([theta_ode(p, w) for w in m.frequencies])
        eta = m.lamb_dicke
        c_ref = np.array([np.sum(eta[:, 0] ** 2 * th), np.sum(eta[:, 0] * eta[:, 1] * th),
                          np.sum(eta[:, 1] ** 2 * th)])
        c = ms_phases(p, m, (0, 1)).as_array()
        worst_c = max(worst_c, np.max(np.abs(c - c_ref)) / np.max(np.abs(c_ref)))
    record(4, worst_a < 1e-9 and worst_c < 1e-6,
           f"worst relative alpha error={worst_a:.1e} chi error={worst_c:.1e} over 100 pulses")


def test_criterion_5_oracle(small_setup, small_pulse):
    modes, pulse = small_setup["modes"], small_pulse.pulse
    ph = ms_phases(pulse, modes, (0, 1))
    cfg = OracleConfig(fock_cutoff=8, included_modes=(0, 1), steps_per_period=10, d=3)
    ms = integrate_ms(pulse, modes, cfg)
    dev_ms = operator_deviation(ms.operator, ms_evolution(ph, 3))
    prof = LSAmplitudeProfile(np.array([1.0, -0.6, 0.25]))
    ls = integrate_ls(pulse, modes, prof, cfg)
    dev_ls = operator_deviation(ls.operator,
                                ls_evolution(ls_phase_table(ph.chi_12, ph.chi_11, ph.chi_22, prof)))
    coarse = integrate_ms(pulse, modes, OracleConfig(steps_per_period=5, d=2))
    fine = integrate_ms(pulse, modes, OracleConfig(steps_per_period=10, d=2))
    ref2 = ms_evolution(ph, 2)
    gain = operator_deviation(coarse.operator, ref2) / operator_deviation(fine.operator, ref2)
    leak = max(ms.leakage, ls.leakage)
    ok = dev_ms < 1e-3 and dev_ls < 1e-3 and leak < 1e-4 and gain >= 8
    record(5, ok, f"chi={SMALL_CHI:.4f} MS dev={dev_ms:.1e} LS dev={dev_ls:.1e} leakage={leak:.1e} "
                  f"step-halving gain={gain:.1f}")


def test_criterion_6_distinct_phase_counts():
    rng = np.random.default_rng(6)
    fails = []
    partial = {}
    for d in range(2, 9):
        seq_a, seq_b = build_sequence("a", d), build_sequence("b", d)
        seq_c = build_sequence("c", d) if d % 2 == 0 else None
        seq_p = build_partial(d) if d % 2 else None
        for _ in range(100):
            prof = generic_profile(d, rng)
            table = ls_phase_table(rng.uniform(0.1, 1.0), 0.0, 0.0, prof)
            if len(distinct_phases(simulate_ledger(seq_a, table))) != d // 2 + 1:
                fails.append(("a", d))
            if seq_c is not None:
                led = simulate_ledger(seq_c, table)
                sums = class_sums(table)
                even, odd = sums[0::2].sum(), sums[1::2].sum()
                s, sp = np.indices((d, d))
                expect = np.where((s - sp) % 2 == 0, even, odd)
                if len(distinct_phases(led)) != 2 or np.max(np.abs(led.entangling - expect)) > 1e-12:
                    fails.append(("c", d))
            if seq_p is not None:
                n = len(distinct_phases(simulate_ledger(seq_p, table)))
                partial.setdefault(d, set()).add(n)
                if n != smallest_prime_divisor(d):
                    fails.append(("partial", d))
        zero = ls_phase_table(0.7, 0.0, 0.0, LSAmplitudeProfile(np.eye(d)[0]))
        s, sp = np.indices((d, d))
        pattern = np.where(s == sp, zero.entangling[0, 0], 0.0)
        for seq in (seq_a, seq_b):
            led = simulate_ledger(seq, zero)
            if len(distinct_phases(led)) != 2 or np.max(np.abs(led.entangling - pattern)) > 1e-12:
                fails.append((seq.type_tag + "-zero", d))
    kinds = sorted({k for k, _ in fails})
    detail = ("all counts as stated" if not fails else
              f"mismatches in {kinds}; partial odd-d counts observed "
              + ", ".join(f"d={d}:{sorted(v)} (p={smallest_prime_divisor(d)})" for d, v in partial.items()))
    record(6, not fails, detail)


def test_criterion_7_nonentangling_uniformity():
    rng = np.random.default_rng(7)
    worst = 0.0
    for d in range(2, 9):
        kinds = ["a"] + (["c"] if d % 2 == 0 else [])
        for _ in range(20):
            prof = LSAmplitudeProfile(generic_profile(d, rng).theta, rng.uniform(-np.pi, np.pi, d))
            table = ls_phase_table(*rng.uniform(-1, 1, 3), prof)
            for k in kinds:
                worst = max(worst, nonentangling_uniformity(build_sequence(k, d), table).spread)
        zero = ls_phase_table(0.4, 0.3, -0.2, LSAmplitudeProfile(np.eye(d)[0]))
        worst = max(worst, nonentangling_uniformity(build_sequence("b", d), zero).spread)
    record(7, worst < 1e-9, f"largest level dependence of single-ion phases={worst:.1e}")


def test_criterion_8_embedded_zz():
    rng = np.random.default_rng(8)
    worst = max(embedded_zz_check(d, chi) for d in (2, 4, 8) for chi in rng.uniform(-np.pi, np.pi, 10))
    record(8, worst < 1e-9, f"max deviation from ZZ(chi) up to global phase={worst:.1e}")


def test_criterion_9_juggling():
    bad = 0
    for d in range(2, 17):
        for m in range(-2 * d, 2 * d + 1):
            seq = cyclic_shift_swaps(d, m)
            mn = normalize_shift(d, m)
            ok_perm = apply_swaps(seq).tolist() == [(j + m) % d for j in range(d)]
            ok_len = len(seq) == (0 if mn == 0 else d + gcd(abs(mn), d) - 2)
            bad += not (ok_perm and ok_len)
    n62 = len(cyclic_shift_swaps(6, 2))
    record(9, bad == 0 and n62 == 6, f"failures={bad} over d in [2,16], m in [-2d,2d]; d=6 m=2 swaps={n62}")


def test_criterion_10_existence(chain_setup):
    modes = chain_setup["modes"]
    th = existence_theta(modes, CHAIN_IONS, CHAIN_CHI)
    eta = modes.lamb_dicke
    j, k = CHAIN_IONS
    sub = np.array([eta[:, j] @ (eta[:, k] * th), eta[:, j] @ (eta[:, j] * th), eta[:, k] @ (eta[:, k] * th)])
    res = np.max(np.abs(sub - [CHAIN_CHI, 0, 0]))
    record(10, res < 1e-10, f"residual of (chi_12, chi_11, chi_22) system={res:.1e}")
