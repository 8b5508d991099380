"""Gate sequences, probability tables, and the sequence families under test.

A probability table is the complete prepare/evolve/measure data set for one
sequence: entry ``(k, i)`` is the probability of the monitored outcome when
preparation ``i`` is followed by the sequence and then measurement setting
``k``.  Tables come in two flavors, exact (``shots is None``) and sampled
(every entry a multiple of ``1/shots``).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence as TypingSequence

import numpy as np

from .noise import GateSpec, TwoQubitModel, UnknownGate
from .rng import substream

__all__ = [
    "Sequence",
    "ProbabilityTable",
    "SequenceFamily",
    "sequence_ptm",
    "table_from_ptm",
    "prob_table",
    "sample_table",
    "permutation_family",
    "random_permutation_family",
    "cyclic_family",
    "repetition_family",
    "family_tables",
    "write_table_csv",
    "read_table_csv",
]


@dataclass(frozen=True)
class Sequence:
    """An ordered list of gate instructions; the empty sequence is the
    SPAM-only reference experiment."""

    gates: tuple[GateSpec, ...]
    label: str

    def __len__(self) -> int:
        return len(self.gates)


@dataclass
class ProbabilityTable:
    """Outcome probabilities, rows = measurement settings, columns = preparations.

    ``shots is None`` marks an exact table; otherwise entries are empirical
    frequencies out of ``shots`` repetitions per cell.
    """

    entries: np.ndarray
    shots: int | None
    label: str

    @property
    def is_exact(self) -> bool:
        return self.shots is None


@dataclass(frozen=True)
class SequenceFamily:
    """A set of related sequences evaluated together by one test.

    ``kind`` is "permutation" (members are rearrangements of one gate
    multiset), "cyclic" (members are rotations of one list) or "repetition"
    (members are a block repeated ``m_values[j]`` times).
    """

    members: tuple[Sequence, ...]
    kind: str
    description: str
    m_values: tuple[int, ...] | None = None


def sequence_ptm(seq: Sequence, model: TwoQubitModel) -> np.ndarray:
    """Total transfer matrix of a sequence (time order = list order)."""
    total = np.eye(model.basis.size)
    for gate in seq.gates:
        if not isinstance(gate, GateSpec):
            raise UnknownGate(f"not a gate instruction: {gate!r}")
        total = model.gate_ptm(gate) @ total
    return total


def table_from_ptm(ptm: np.ndarray, model: TwoQubitModel, label: str) -> ProbabilityTable:
    """Exact table for a precomputed sequence transfer matrix."""
    return ProbabilityTable(
        entries=model.spam_out @ ptm @ model.spam_in.T, shots=None, label=label
    )


def prob_table(seq: Sequence, model: TwoQubitModel) -> ProbabilityTable:
    """Exact probability table of a sequence under the model."""
    return table_from_ptm(sequence_ptm(seq, model), model, seq.label)


def sample_table(table: ProbabilityTable, shots: int, seed: int) -> ProbabilityTable:
    """Finite-shot version of an exact table.

    Each cell is an independent binomial frequency drawn from a substream
    keyed on ``(seed, label, k, i)``, so the result does not depend on the
    order in which cells or tables are evaluated.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not table.is_exact:
        raise ValueError("can only sample an exact table")
    p = np.asarray(table.entries)
    if p.min() < -1e-9 or p.max() > 1 + 1e-9:
        raise ValueError("table entries outside [0, 1]; not a physical table")
    p = np.clip(p, 0.0, 1.0)
    out = np.empty_like(p)
    for k in range(p.shape[0]):
        for i in range(p.shape[1]):
            gen = substream(seed, "cell", table.label, k, i)
            out[k, i] = gen.binomial(shots, p[k, i]) / shots
    return ProbabilityTable(entries=out, shots=shots, label=table.label)


def resample_cells(
    table: ProbabilityTable, resamples: int, seed: int, tag: str = "boot"
) -> np.ndarray:
    """Stack of ``resamples`` parametric-bootstrap tables around ``table``.

    For an exact table the stack is just the table repeated.  Substreams are
    keyed per cell and indexed by the resample axis, preserving the
    schedule-independence contract.
    """
    p = np.asarray(table.entries)
    if table.is_exact:
        return np.broadcast_to(p, (resamples,) + p.shape)
    p = np.clip(p, 0.0, 1.0)
    out = np.empty((resamples,) + p.shape)
    for k in range(p.shape[0]):
        for i in range(p.shape[1]):
            gen = substream(seed, tag, table.label, k, i)
            out[:, k, i] = gen.binomial(table.shots, p[k, i], size=resamples) / table.shots
    return out


def permutation_family(a: GateSpec, b: GateSpec, n: int) -> SequenceFamily:
    """The ``n + 1`` rearrangements interpolating ``a^n b^n`` into ``(b a)^n``.

    Member ``k`` (1-based) is ``a^(n-k+1) b^(n-k+1)`` followed by ``k - 1``
    copies of the pair ``(b, a)``; every member uses the same multiset of
    ``n`` copies of each gate, differing only in their arrangement.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    members = []
    for k in range(1, n + 2):
        gates = (a,) * (n - k + 1) + (b,) * (n - k + 1) + (b, a) * (k - 1)
        members.append(Sequence(gates=gates, label=f"perm{k:03d}"))
    return SequenceFamily(
        members=tuple(members),
        kind="permutation",
        description=f"rearrangements of {a.label}^{n} {b.label}^{n}",
    )


def random_permutation_family(
    a: GateSpec, b: GateSpec, n: int, count: int, seed: int
) -> SequenceFamily:
    """``count`` seeded random shuffles of the same ``a^n b^n`` multiset."""
    if n < 1 or count < 1:
        raise ValueError("n and count must be >= 1")
    base = np.array([0] * n + [1] * n)
    gates_by_id = (a, b)
    members = []
    for j in range(count):
        order = substream(seed, "perm", j).permutation(base)
        gates = tuple(gates_by_id[i] for i in order)
        members.append(Sequence(gates=gates, label=f"shuf{j:03d}"))
    return SequenceFamily(
        members=tuple(members),
        kind="permutation",
        description=f"random shuffles of {a.label}^{n} {b.label}^{n}",
    )


def cyclic_family(seq: Sequence) -> SequenceFamily:
    """All rotations of a sequence, ordered by the offset of the rotation."""
    if len(seq) < 1:
        raise ValueError("need a non-empty sequence")
    length = len(seq)
    members = []
    for j in range(length):
        gates = seq.gates[length - j :] + seq.gates[: length - j]
        members.append(Sequence(gates=gates, label=f"rot{j:03d}"))
    return SequenceFamily(
        members=tuple(members),
        kind="cyclic",
        description=f"rotations of {seq.label}",
    )


def repetition_family(
    block: TypingSequence[GateSpec], m_values: Iterable[int]
) -> SequenceFamily:
    """The block repeated ``m`` times for each requested ``m``."""
    ms = tuple(int(m) for m in m_values)
    if any(m < 0 for m in ms):
        raise ValueError("m values must be >= 0")
    if any(b >= a for a, b in zip(ms[1:], ms)):
        raise ValueError("m values must be strictly increasing")
    block = tuple(block)
    block_label = "".join(g.label for g in block)
    members = tuple(
        Sequence(gates=block * m, label=f"{block_label}_m{m:04d}") for m in ms
    )
    return SequenceFamily(
        members=members,
        kind="repetition",
        description=f"({block_label})^m",
        m_values=ms,
    )


def family_tables(
    family: SequenceFamily,
    model: TwoQubitModel,
    shots: int | None = None,
    seed: int = 0,
) -> list[ProbabilityTable]:
    """Tables for every member, sampled at ``shots`` unless exact is requested."""
    tables = [prob_table(seq, model) for seq in family.members]
    if shots is None:
        return tables
    return [sample_table(t, shots, seed) for t in tables]


def write_table_csv(table: ProbabilityTable, path) -> None:
    """Write a table as CSV with ``#`` metadata lines for label and shots."""
    with open(path, "w", newline="") as fh:
        fh.write(_table_csv_text(table))


def _table_csv_text(table: ProbabilityTable) -> str:
    buf = io.StringIO()
    buf.write(f"# label = {table.label}\n")
    buf.write(f"# shots = {'exact' if table.is_exact else table.shots}\n")
    writer = csv.writer(buf, lineterminator="\n")
    n_rows, n_cols = table.entries.shape
    writer.writerow(["setting"] + [f"prep{i}" for i in range(n_cols)])
    for k in range(n_rows):
        writer.writerow([f"meas{k}"] + [repr(float(v)) for v in table.entries[k]])
    return buf.getvalue()


def read_table_csv(path) -> ProbabilityTable:
    """Read a table written by :func:`write_table_csv` (exact round trip)."""
    label = ""
    shots: int | None = None
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                key = key.strip()
                value = value.strip()
                if key == "label":
                    label = value
                elif key == "shots":
                    shots = None if value == "exact" else int(value)
                continue
            rows.append(line)
    reader = csv.reader(rows)
    header = next(reader)
    n_cols = len(header) - 1
    entries = []
    for row in reader:
        if not row:
            continue
        entries.append([float(v) for v in row[1 : n_cols + 1]])
    return ProbabilityTable(entries=np.array(entries), shots=shots, label=label)
