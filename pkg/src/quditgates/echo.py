"""Spin-echo sequences for the qudit LS gate and their phase bookkeeping.

Sequences are lists of three kinds of step: an LS gate application, a local
cyclic shift ``X_{m1} (x) X_{m2}``, and a 0<->s transposition applied to both
ions.  The ledger follows every two-qudit basis state through the sequence and
adds the LS phases of the states it visits.
"""

from dataclasses import dataclass, field
import numpy as np

from .juggling import Rotation, cyclic_shift_swaps, to_native_rotations
from .phases import LSAmplitudeProfile, ls_phase_table

LS, SHIFT, ROT = "apply_ls", "local_permutation", "local_transposition_pair"
TYPES = ("a", "b", "c", "c_partial")


class SequenceError(ValueError):
    pass


@dataclass(frozen=True)
class EchoStep:
    kind: str
    shifts: tuple = (0, 0)
    level: int = 0
    axis: str = "+x"

    def text(self):
        if self.kind == LS:
            return "LS"
        if self.kind == SHIFT:
            return f"SHIFT {self.shifts[0]} {self.shifts[1]}"
        return f"ROT 0 {self.level} {self.axis} pi"


_LS = EchoStep(LS)


def _shift(d, m1, m2):
    return EchoStep(SHIFT, (m1 % d, m2 % d))


@dataclass(frozen=True)
class EchoSequence:
    d: int
    steps: tuple
    type_tag: str

    @property
    def num_ls(self):
        return sum(s.kind == LS for s in self.steps)

    def net_shift(self):
        """Net level permutation of each ion, as image arrays."""
        perms = [np.arange(self.d), np.arange(self.d)]
        for st in self.steps:
            perms = [_step_image(st, ion, p, self.d) for ion, p in enumerate(perms)]
        return perms

    def to_text(self):
        head = f"# echo type {self.type_tag}, d = {self.d}"
        return "\n".join([head] + [st.text() for st in self.steps]) + "\n"


def _step_image(step, ion, levels, d):
    if step.kind == SHIFT:
        return (levels + step.shifts[ion]) % d
    if step.kind == ROT:
        out = levels.copy()
        out[levels == 0] = step.level
        out[levels == step.level] = 0
        return out
    return levels


def _correct(d, steps, tag):
    seq = EchoSequence(d, tuple(steps), tag)
    p1, p2 = seq.net_shift()
    r1, r2 = int(p1[0]), int(p2[0])  # net shifts are cyclic, so the image of 0 fixes them
    if r1 or r2:
        steps.append(_shift(d, -r1, -r2))
    return EchoSequence(d, tuple(steps), tag)


def build_sequence(kind, d, final_shift=(1, -1)):
    """Echo sequence of type ``a``, ``b`` or ``c`` for qudit dimension ``d``."""
    if d < 2:
        raise SequenceError("qudit dimension must be at least 2")
    if kind == "a":
        steps = [_LS, _shift(d, 1, 1)] * d
        return EchoSequence(d, tuple(steps), "a")
    if kind == "b":
        steps = []
        for s in range(d):
            if s == 0:
                steps.append(_LS)
            else:
                steps += [EchoStep(ROT, level=s, axis="+x"), _LS, EchoStep(ROT, level=s, axis="-x")]
        return EchoSequence(d, tuple(steps), "b")
    if kind == "c":
        if d % 2:
            raise SequenceError(
                f"type c needs even d, got d = {d}; use build_partial for odd dimensions")
        cycle = [_LS, _shift(d, 1, 1)] * (d - 1) + [_LS, _shift(d, *final_shift)]
        return _correct(d, cycle * (d // 2), "c")
    raise SequenceError(f"unknown sequence type {kind!r}; expected a, b or c")


def smallest_prime_divisor(n):
    for p in range(2, int(n**0.5) + 1):
        if n % p == 0:
            return p
    return n


def build_partial(d):
    """Odd-d reduction: cycles end with ``X_{1+p} (x) X_1`` so the class (s - s') mod d steps by p."""
    if d < 3 or d % 2 == 0:
        raise SequenceError(f"partial reduction needs odd d >= 3, got {d}; use type c for even d")
    p = smallest_prime_divisor(d)
    cycle = [_LS, _shift(d, 1, 1)] * (d - 1) + [_LS, _shift(d, 1 + p, 1)]
    return _correct(d, cycle * (d // p), "c_partial")


@dataclass
class PhaseLedger:
    """Accumulated phases per initial basis state (unwrapped sums)."""

    entangling: np.ndarray  # (d, d)
    nonentangling: np.ndarray  # (2, d), per ion and initial level

    @property
    def d(self):
        return self.entangling.shape[0]

    def total(self):
        return (self.entangling + self.nonentangling[0][:, None]
                + self.nonentangling[1][None, :])

    def to_csv(self, path):
        lines = ["s,s_prime,entangling,total"]
        tot = self.total()
        for s in range(self.d):
            for sp in range(self.d):
                lines.append(f"{s},{sp},{float(self.entangling[s, sp])!r},{float(tot[s, sp])!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def simulate_ledger(seq, table):
    if seq.d != table.d:
        raise SequenceError(f"sequence d = {seq.d} but table d = {table.d}")
    d = seq.d
    pos = [np.repeat(np.arange(d), d), np.tile(np.arange(d), d)]
    ent = np.zeros(d * d)
    single = [np.zeros(d * d), np.zeros(d * d)]
    for st in seq.steps:
        if st.kind == LS:
            ent += table.entangling[pos[0], pos[1]]
            for ion in (0, 1):
                single[ion] += table.nonentangling[ion][pos[ion]]
        else:
            pos = [_step_image(st, ion, p, d) for ion, p in enumerate(pos)]
    ent = ent.reshape(d, d)
    # a single ion's trajectory does not depend on its partner's level
    non = np.vstack([single[0].reshape(d, d)[:, 0], single[1].reshape(d, d)[0, :]])
    return PhaseLedger(ent, non)


@dataclass
class PhaseBlock:
    phase: float
    states: list = field(default_factory=list)


def _wrap(x):
    return np.mod(x, 2 * np.pi)


def distinct_phases(ledger, tol=1e-9, include_local=False):
    """Partition basis states by accumulated phase modulo 2 pi, sorted by phase."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    values = ledger.total() if include_local else ledger.entangling
    d = ledger.d
    blocks = []
    for s in range(d):
        for sp in range(d):
            v = _wrap(values[s, sp])
            for b in blocks:
                gap = abs(v - b.phase)
                if min(gap, 2 * np.pi - gap) <= tol:
                    b.states.append((s, sp))
                    break
            else:
                blocks.append(PhaseBlock(float(v), [(s, sp)]))
    return sorted(blocks, key=lambda b: b.phase)


@dataclass(frozen=True)
class UniformityReport:
    is_global: bool
    spread: float


def nonentangling_uniformity(seq, table, tol=1e-9):
    led = simulate_ledger(seq, table)
    spread = 0.0
    for ion in (0, 1):
        w = _wrap(led.nonentangling[ion] - led.nonentangling[ion][0])
        w = np.minimum(w, 2 * np.pi - w)
        spread = max(spread, float(np.max(w)))
    return UniformityReport(spread <= tol, spread)


def _shift_matrix(d, m):
    u = np.zeros((d, d))
    u[(np.arange(d) + m) % d, np.arange(d)] = 1.0
    return u


def dense_unitary(seq, table, native=False):
    """Multiply the sequence out as dense d^2 x d^2 matrices.

    With ``native`` the shifts and transpositions are the exact pi rotations,
    including their -i phases.
    """
    d = seq.d
    eye = np.eye(d)
    ls = np.diag(np.exp(1j * table.state_phases().ravel()))
    u = np.eye(d * d, dtype=complex)
    for st in seq.steps:
        if st.kind == LS:
            op = ls
        elif st.kind == SHIFT:
            ops = []
            for m in st.shifts:
                if native:
                    loc = eye.astype(complex)
                    for r in to_native_rotations(cyclic_shift_swaps(d, m)):
                        loc = r.matrix(d) @ loc
                    ops.append(loc)
                else:
                    ops.append(_shift_matrix(d, m))
            op = np.kron(ops[0], ops[1])
        else:
            if native:
                loc = Rotation(st.level, st.axis).matrix(d)
            else:
                loc = eye.copy()
                loc[[0, st.level]] = loc[[st.level, 0]]
            op = np.kron(loc, loc)
        u = op @ u
    return u


@dataclass(frozen=True)
class NativeOp:
    kind: str  # "LS" or "ROT"
    ion: int = None
    level: int = 0
    axis: str = "+x"

    def text(self):
        if self.kind == "LS":
            return "LS"
        return f"ROT {self.ion} 0 {self.level} {self.axis} pi"


def expand_to_native(seq):
    """Flatten shifts into per-ion 0<->s pi rotations; returns (ops, rotations per ion)."""
    ops = []
    counts = [0, 0]
    for st in seq.steps:
        if st.kind == LS:
            ops.append(NativeOp("LS"))
            continue
        for ion in (0, 1):
            if st.kind == SHIFT:
                rots = to_native_rotations(cyclic_shift_swaps(seq.d, st.shifts[ion]))
                ops += [NativeOp("ROT", ion, r.level, r.axis) for r in rots]
                counts[ion] += len(rots)
            else:
                ops.append(NativeOp("ROT", ion, st.level, st.axis))
                counts[ion] += 1
    return ops, tuple(counts)


def embedded_zz_table(d, chi):
    """Rank-one table whose type-c ledger is +chi on even and -chi on odd (s - s')."""
    theta = (-1.0) ** np.arange(d)
    return ls_phase_table(chi / d**2, 0.0, 0.0, LSAmplitudeProfile(theta))


def embedded_zz_check(d, chi):
    """Max deviation between the type-c unitary and ZZ(chi) on the last embedded qubits."""
    if d not in (2, 4, 8, 16):
        raise ValueError(f"d must be a power of two between 2 and 16, got {d}")
    u = np.diag(dense_unitary(build_sequence("c", d), embedded_zz_table(d, chi)))
    z = 1.0 - 2.0 * (np.arange(d) % 2)  # Z eigenvalue of the least significant bit
    target = np.exp(1j * chi * np.kron(z, z))
    ratio = u / target
    glob = ratio[0]
    return float(np.max(np.abs(ratio - glob)))


def class_sums(table):
    """phi_l^echo = sum_s phi_{s, (s + l) mod d}, the type-a ledger of subspace G_l."""
    d = table.d
    s = np.arange(d)
    return np.array([table.entangling[s, (s + l) % d].sum() for l in range(d)])


def generic_profile(d, rng, min_gap=1e-6, max_tries=1000):
    """Random theta profile whose class sums are pairwise distinct beyond symmetry."""
    for _ in range(max_tries):
        th = rng.uniform(-1, 1, d)
        th[0] = 1.0
        th[1:] = th[1:][np.argsort(-np.abs(th[1:]), kind="stable")]
        prof = LSAmplitudeProfile(th)
        sums = class_sums(ls_phase_table(1.0, 0.0, 0.0, prof))
        reps = sums[: d // 2 + 1]
        gaps = np.abs(reps[:, None] - reps[None, :])[np.triu_indices(len(reps), 1)]
        if gaps.size == 0 or gaps.min() > min_gap:
            return prof
    raise RuntimeError("could not draw a generic profile")

