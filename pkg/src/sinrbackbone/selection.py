"""Construction, certification and round-scheduling of selection families.

Two kinds of families drive every protocol here: (N,c) strongly selective
families (every member of any subset of size <= c gets a round where it is
the unique selected member) and (k,m,N)-selectors. Families are built by
seeded random inclusion and grown until certification passes, so only the
selection property - not any particular construction - is load-bearing.

Certification is exact wherever tractable: by subset enumeration when the
subset space is small, and otherwise (for label spaces up to
EXACT_LABEL_CUTOFF) by a per-element cover argument: element e is isolated
in every admissible subset iff the sets containing e admit no small hitting
set avoiding e. Larger spaces fall back to seeded random spot-checks, which
never mark a family as certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from hashlib import blake2b
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .errors import CursorExhaustedError, FamilySizeCapError

ENUM_CUTOFF = 10**6  # exhaustive subset-enumeration budget
EXACT_LABEL_CUTOFF = 64  # per-element exact proof forced up to this label space
LAZY_LABEL_THRESHOLD = 16384  # above this, membership is evaluated on demand
SAMPLES_MATERIALIZED = 100_000
SAMPLES_LAZY = 1024
SIZE_CAP = 200_000
NODE_CAP = 5_000_000


def derive_seed(base: int, *tags: object) -> int:
    """Stable 63-bit seed derived from a base seed and a tag tuple."""
    h = blake2b(repr((int(base),) + tags).encode("ascii"), digest_size=8)
    return int.from_bytes(h.digest(), "big") >> 1


def _membership_column(seed: int, label: int, size: int, prob: float) -> np.ndarray:
    """Boolean inclusion column for one label over `size` candidate sets.

    Philox is counter-based and keyed per (seed, label), so columns are
    platform-stable, independent across labels, and prefix-stable when the
    family grows.
    """
    gen = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), label]))
    return gen.random(size) < prob


@lru_cache(maxsize=4096)
def _lazy_column_cached(seed: int, label: int, size: int, prob: float) -> np.ndarray:
    return _membership_column(seed, label, size, prob)


def _bits_to_int(bits: np.ndarray) -> int:
    """Bool array -> int with bit i equal to bits[i]."""
    packed = np.packbits(bits, bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


@dataclass
class SelectionFamily:
    """Ordered family of label subsets realizing a selector or ssf.

    Materialized families carry a packed t x n_labels bit matrix; lazy
    families (huge pair-label spaces) evaluate membership on demand from
    the seed.
    """

    kind: str  # "ssf" | "selector"
    n_labels: int
    seed: int
    size: int
    c: Optional[int] = None  # ssf parameter
    k: Optional[int] = None  # selector parameters
    m: Optional[int] = None
    certified: bool = False
    verification: str = "none"  # "exhaustive" | "spot-checked" | "none"
    _matrix: Optional[np.ndarray] = field(default=None, repr=False)  # packed bits
    _prob: float = field(default=0.0, repr=False)

    @property
    def is_lazy(self) -> bool:
        return self._matrix is None

    @property
    def selection_c(self) -> Optional[int]:
        """Subset size whose members must all be isolated, if ssf-like.

        Selectors with m >= k are (m,m,N)-selectors, whose property is
        exactly that of an (N,m)-ssf.
        """
        if self.kind == "ssf":
            return self.c
        if self.m is not None and self.k is not None and self.m >= self.k:
            return self.m
        return None

    def contains(self, index: int, label: int) -> bool:
        if not (0 <= index < self.size):
            raise IndexError(index)
        if self._matrix is not None:
            col = label - 1
            return bool((self._matrix[index, col >> 3] >> (7 - (col & 7))) & 1)
        return bool(_lazy_column_cached(self.seed, label, self.size, self._prob)[index])

    def rounds_for(self, label: int) -> np.ndarray:
        """Indices of sets containing the label, ascending."""
        if self._matrix is not None:
            col = label - 1
            bits = (self._matrix[:, col >> 3] >> (7 - (col & 7))) & 1
            return np.flatnonzero(bits)
        return np.flatnonzero(
            _lazy_column_cached(self.seed, label, self.size, self._prob)
        )

    def set_members(self, index: int) -> tuple[int, ...]:
        """Ascending labels of one set. Materialized families only."""
        if self._matrix is None:
            raise ValueError("lazy family does not materialize sets")
        row = np.unpackbits(self._matrix[index])[: self.n_labels]
        return tuple(int(i) + 1 for i in np.flatnonzero(row))

    @property
    def sets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self.set_members(j) for j in range(self.size))

    def label_rows(self) -> dict[int, int]:
        """label -> int with bit j set iff the label is in set j."""
        if self._matrix is None:
            raise ValueError("lazy family does not materialize rows")
        unpacked = np.unpackbits(self._matrix, axis=1)[:, : self.n_labels]
        return {
            col + 1: _bits_to_int(unpacked[:, col]) for col in range(self.n_labels)
        }

    def set_masks(self) -> list[int]:
        """Per set: int with bit (label-1) set iff the label is a member."""
        if self._matrix is None:
            raise ValueError("lazy family does not materialize sets")
        unpacked = np.unpackbits(self._matrix, axis=1)[:, : self.n_labels]
        return [_bits_to_int(unpacked[j]) for j in range(self.size)]


def _build_matrix(seed: int, n_labels: int, size: int, prob: float) -> np.ndarray:
    cols = np.empty((size, n_labels), dtype=bool)
    for label in range(1, n_labels + 1):
        cols[:, label - 1] = _membership_column(seed, label, size, prob)
    return np.packbits(cols, axis=1)


# ---------------------------------------------------------------------------
# Exact certification machinery.


def _greedy_hitting(masks: Sequence[int]) -> list[int]:
    """Greedy hitting set over label-bitmask sets; returns bit positions."""
    remaining = list(masks)
    chosen: list[int] = []
    while remaining:
        degree: dict[int, int] = {}
        for sm in remaining:
            x = sm
            while x:
                low = x & -x
                lab = low.bit_length() - 1
                degree[lab] = degree.get(lab, 0) + 1
                x ^= low
        best = min(degree, key=lambda lab: (-degree[lab], lab))
        chosen.append(best)
        bit = 1 << best
        remaining = [sm for sm in remaining if not (sm & bit)]
    return chosen


def _greedy_packing(masks: Sequence[int], target: int) -> int:
    """Count of pairwise-disjoint sets found greedily, capped at target."""
    count = 0
    used = 0
    for sm in sorted(masks, key=lambda s: s.bit_count()):
        if sm and not (sm & used):
            used |= sm
            count += 1
            if count >= target:
                break
    return count


class _NodeBudgetExceeded(Exception):
    pass


def _decide_hitting(
    masks: list[int], budget: int, node_cap: int
) -> Optional[list[int]]:
    """Find a hitting set of size <= budget over label-bitmask sets, or prove
    none exists (None).

    Branch and bound: branch on the labels of a smallest unhit set (any
    hitting set must intersect it), ordered by how many remaining sets each
    label would hit; prune by the pigeonhole bound budget * max_degree.
    """
    nsets = len(masks)
    if nsets == 0:
        return []
    if budget <= 0:
        return None
    hits: dict[int, int] = {}
    set_labels: list[list[int]] = []
    for idx, sm in enumerate(masks):
        labs = []
        x = sm
        while x:
            low = x & -x
            lab = low.bit_length() - 1
            labs.append(lab)
            hits[lab] = hits.get(lab, 0) | (1 << idx)
            x ^= low
        set_labels.append(labs)
    order_by_size = sorted(range(nsets), key=lambda i: len(set_labels[i]))
    full = (1 << nsets) - 1
    max_deg_static = max((h.bit_count() for h in hits.values()), default=0)
    nodes = 0
    infeasible: dict[int, int] = {}  # remaining-mask -> largest budget proven hopeless

    def rec(rem: int, budget: int) -> Optional[list[int]]:
        nonlocal nodes
        if rem == 0:
            return []
        if budget == 0:
            return None
        if infeasible.get(rem, -1) >= budget:
            return None
        nodes += 1
        if nodes > node_cap:
            raise _NodeBudgetExceeded
        if budget * max_deg_static < rem.bit_count():
            return None
        branch = next(i for i in order_by_size if rem & (1 << i))
        cand = sorted(
            set_labels[branch],
            key=lambda lab: (-(hits[lab] & rem).bit_count(), lab),
        )
        for lab in cand:
            sol = rec(rem & ~hits[lab], budget - 1)
            if sol is not None:
                return [lab] + sol
        if len(infeasible) < 1_000_000 and budget > infeasible.get(rem, -1):
            infeasible[rem] = budget
        return None

    return rec(full, budget)


def _element_cover_check(
    rows: dict[int, int],
    set_masks: list[int],
    c: int,
    node_cap: int,
    only: Optional[set[int]] = None,
) -> tuple[set[int], Optional[tuple[int, ...]]]:
    """Exact per-element ssf check via hitting sets.

    Element e is isolated in every subset of size <= c containing it iff the
    family holds the singleton {e}, or the sets containing e (e removed)
    admit no hitting set of at most c-1 other labels. Returns the set of
    elements proven good plus the first counterexample subset found, if any.
    """
    good: set[int] = set()
    labels = sorted(rows) if only is None else sorted(only)
    for e in labels:
        e_bit = 1 << (e - 1)
        row = rows.get(e, 0)
        if row == 0:
            return good, (e,)
        fe = []
        singleton = False
        x = row
        while x:
            low = x & -x
            j = low.bit_length() - 1
            sm = set_masks[j] & ~e_bit
            if sm == 0:
                singleton = True
                break
            fe.append(sm)
            x ^= low
        if singleton:
            good.add(e)
            continue
        if _greedy_packing(fe, c) >= c:
            good.add(e)
            continue
        greedy = _greedy_hitting(fe)
        if len(greedy) <= c - 1:
            return good, tuple(sorted([e] + [lab + 1 for lab in greedy]))
        sol = _decide_hitting(fe, c - 1, node_cap)
        if sol is None:
            good.add(e)
        else:
            return good, tuple(sorted([e] + [lab + 1 for lab in sol]))
    return good, None


def _others_or(row_list: list[int]) -> list[int]:
    """For each position i, OR of all rows except i (prefix/suffix scan)."""
    n = len(row_list)
    pre = [0] * (n + 1)
    for i, r in enumerate(row_list):
        pre[i + 1] = pre[i] | r
    suf = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suf[i] = suf[i + 1] | row_list[i]
    return [pre[i] | suf[i + 1] for i in range(n)]


def _enum_check_ssf(
    rows: dict[int, int], n_labels: int, c: int
) -> Optional[tuple[int, ...]]:
    """Exhaustive check over all subsets of size exactly c.

    Isolation for size-c subsets implies it for smaller ones (extend any
    smaller subset to size c; an isolating set for the extension isolates
    in the restriction), so enumerating size c alone is complete.
    """
    for combo in combinations(range(1, n_labels + 1), c):
        row_list = [rows.get(e, 0) for e in combo]
        others = _others_or(row_list)
        for i in range(c):
            if row_list[i] & ~others[i] == 0:
                return tuple(combo)
    return None


def _enum_check_selector(
    rows: dict[int, int], n_labels: int, k: int, m: int
) -> Optional[tuple[int, ...]]:
    """Exhaustive (k,m,N)-selector check: every k-subset needs at least m
    distinct members, each isolated by some set."""
    for combo in combinations(range(1, n_labels + 1), k):
        row_list = [rows.get(e, 0) for e in combo]
        others = _others_or(row_list)
        isolated = sum(1 for i in range(k) if row_list[i] & ~others[i])
        if isolated < m:
            return tuple(combo)
    return None


def _sample_subsets(
    family: SelectionFamily, subset_size: int, samples: int, seed: int
) -> Optional[tuple[int, ...]]:
    """Spot-check isolation on seeded random subsets; returns a violation."""
    gen = np.random.default_rng(seed)
    n = family.n_labels
    if family.is_lazy:
        for _ in range(samples):
            combo = sorted(
                int(x) + 1 for x in gen.choice(n, size=subset_size, replace=False)
            )
            cols = {
                e: _lazy_column_cached(family.seed, e, family.size, family._prob)
                for e in combo
            }
            union = np.zeros(family.size, dtype=np.int32)
            for e in combo:
                union += cols[e]
            for e in combo:
                if not np.any(cols[e] & (union == 1)):
                    return tuple(combo)
        return None
    rows = family.label_rows()
    for _ in range(samples):
        combo = sorted(
            int(x) + 1 for x in gen.choice(n, size=subset_size, replace=False)
        )
        row_list = [rows.get(e, 0) for e in combo]
        others = _others_or(row_list)
        for i, e in enumerate(combo):
            if row_list[i] & ~others[i] == 0:
                return tuple(combo)
    return None


def _sample_selector(
    family: SelectionFamily, k: int, m: int, samples: int, seed: int
) -> Optional[tuple[int, ...]]:
    gen = np.random.default_rng(seed)
    rows = family.label_rows()
    for _ in range(samples):
        combo = sorted(
            int(x) + 1 for x in gen.choice(family.n_labels, size=k, replace=False)
        )
        row_list = [rows.get(e, 0) for e in combo]
        others = _others_or(row_list)
        isolated = sum(1 for i in range(k) if row_list[i] & ~others[i])
        if isolated < m:
            return tuple(combo)
    return None


@dataclass(frozen=True)
class CertifyResult:
    ok: bool
    mode: str  # "exhaustive" | "spot-checked"
    counterexample: Optional[tuple[int, ...]] = None
    samples: Optional[int] = None


def certify(
    family: SelectionFamily,
    *,
    enum_cutoff: int = ENUM_CUTOFF,
    exact_label_cutoff: int = EXACT_LABEL_CUTOFF,
    samples: Optional[int] = None,
    sample_seed: int = 0,
    node_cap: int = NODE_CAP,
) -> CertifyResult:
    """Verify the family's selection property.

    Exact ("exhaustive") verification runs when the subset space is
    enumerable within the cutoff, or when the label space is small enough
    for the per-element cover proof. Otherwise a seeded random spot-check
    runs; a positive outcome is then labeled spot-checked, never certified.
    """
    c_eff = family.selection_c
    if c_eff is not None:
        if not family.is_lazy:
            if family.n_labels <= exact_label_cutoff:
                rows = family.label_rows()
                masks = family.set_masks()
                try:
                    _, witness = _element_cover_check(rows, masks, c_eff, node_cap)
                except _NodeBudgetExceeded:
                    pass  # fall through to sampling
                else:
                    return CertifyResult(witness is None, "exhaustive", witness)
            elif math.comb(family.n_labels, c_eff) <= enum_cutoff:
                rows = family.label_rows()
                witness = _enum_check_ssf(rows, family.n_labels, c_eff)
                return CertifyResult(witness is None, "exhaustive", witness)
        n_samples = samples or (
            SAMPLES_LAZY if family.is_lazy else SAMPLES_MATERIALIZED
        )
        witness = _sample_subsets(
            family,
            min(c_eff, family.n_labels),
            n_samples,
            derive_seed(family.seed, "spot", sample_seed),
        )
        return CertifyResult(witness is None, "spot-checked", witness, n_samples)

    # genuine (k,m,N)-selector with m < k
    assert family.k is not None and family.m is not None
    if not family.is_lazy and math.comb(family.n_labels, family.k) <= enum_cutoff:
        rows = family.label_rows()
        witness = _enum_check_selector(rows, family.n_labels, family.k, family.m)
        return CertifyResult(witness is None, "exhaustive", witness)
    n_samples = samples or SAMPLES_MATERIALIZED
    witness = _sample_selector(
        family,
        family.k,
        family.m,
        n_samples,
        derive_seed(family.seed, "spot", sample_seed),
    )
    return CertifyResult(witness is None, "spot-checked", witness, n_samples)


# ---------------------------------------------------------------------------
# Construction: seeded random inclusion, grown until certification passes.


def _initial_size(c: int, n_labels: int) -> int:
    lg = max(1.0, math.log2(n_labels))
    return max(16, min(math.ceil(c * c * lg), math.ceil(2 * n_labels * lg)))


def _construct(
    kind: str,
    n_labels: int,
    prob_den: int,
    check,
    seed: int,
    size_cap: int,
    lazy: bool,
    **params,
) -> SelectionFamily:
    prob = 1.0 / prob_den
    size = _initial_size(prob_den, n_labels)
    proven: set[int] = set()
    while True:
        if size > size_cap:
            raise FamilySizeCapError(
                f"no certified family within {size_cap} sets "
                f"(kind={kind}, n_labels={n_labels}, params={params})"
            )
        fam = SelectionFamily(
            kind=kind,
            n_labels=n_labels,
            seed=seed,
            size=size,
            certified=False,
            verification="none",
            _matrix=None if lazy else _build_matrix(seed, n_labels, size, prob),
            _prob=prob,
            **params,
        )
        ok, mode, proven = check(fam, proven)
        if ok:
            fam.certified = mode == "exhaustive"
            fam.verification = mode
            return fam
        size = size + max(16, size // 4)


def _ssf_style_check(c: int, samples: Optional[int]):
    """Check callback for ssf-property families, incremental where exact."""

    def check(fam: SelectionFamily, proven: set[int]):
        if fam.is_lazy or fam.n_labels > EXACT_LABEL_CUTOFF:
            res = certify(fam, samples=samples)
            return res.ok, res.mode, set()
        # per-element exact proof; appended sets never invalidate passes
        rows = fam.label_rows()
        masks = fam.set_masks()
        todo = set(range(1, fam.n_labels + 1)) - proven
        try:
            good, witness = _element_cover_check(rows, masks, c, NODE_CAP, only=todo)
        except _NodeBudgetExceeded:
            return False, "exhaustive", proven
        ok = witness is None and not (todo - good)
        return ok, "exhaustive", proven | good

    return check


def construct_ssf(
    n_labels: int,
    c: int,
    seed: int,
    *,
    size_cap: int = SIZE_CAP,
    samples: Optional[int] = None,
) -> SelectionFamily:
    """Certified (n_labels, c) strongly selective family.

    Deterministic for a given (n_labels, c, seed): candidate sets include
    each label independently with probability 1/c, and sets are appended
    until certification passes.
    """
    if not (1 <= c <= n_labels):
        raise ValueError(f"need 1 <= c <= n_labels, got c={c}, n_labels={n_labels}")
    lazy = n_labels > LAZY_LABEL_THRESHOLD
    return _construct(
        "ssf", n_labels, c, _ssf_style_check(c, samples), seed, size_cap, lazy, c=c
    )


def construct_selector(
    k: int,
    m: int,
    n_labels: int,
    seed: int,
    *,
    size_cap: int = SIZE_CAP,
    samples: Optional[int] = None,
) -> SelectionFamily:
    """Certified (k, m, n_labels)-selector.

    The m > k case is rewritten to an (m, m, n_labels)-selector, whose
    property coincides with that of an (n_labels, m)-ssf, so certification
    goes through the exact ssf machinery there.
    """
    if not (1 <= m and 1 <= k <= n_labels):
        raise ValueError(f"need 1 <= k <= n_labels and m >= 1, got k={k}, m={m}")
    if m > n_labels:
        raise ValueError(f"selector needs m <= n_labels, got m={m}, n={n_labels}")
    if m > k:
        k = m
    lazy = n_labels > LAZY_LABEL_THRESHOLD

    if m == k:
        check = _ssf_style_check(m, samples)
    else:

        def check(fam: SelectionFamily, proven: set[int]):
            res = certify(fam, samples=samples)
            return res.ok, res.mode, set()

    return _construct(
        "selector", n_labels, k, check, seed, size_cap, lazy, k=k, m=m
    )


# ---------------------------------------------------------------------------
# Pair-label encoding for the (N*N, c*c)-ssf over ordered label pairs.


def pair_index(s: int, t: int, n_labels: int) -> int:
    """Row-major 1-based bijection (s, t) -> s*N + t - N."""
    if not (1 <= s <= n_labels and 1 <= t <= n_labels):
        raise ValueError(f"pair ({s},{t}) outside [1..{n_labels}]^2")
    return (s - 1) * n_labels + t


def pair_unindex(idx: int, n_labels: int) -> tuple[int, int]:
    s, t = divmod(idx - 1, n_labels)
    return s + 1, t + 1


# ---------------------------------------------------------------------------
# Round scheduling.


@dataclass
class RoundSchedule:
    """Cursor over a family's total order of sets, one set per round."""

    family: SelectionFamily
    cursor: int = 0

    def advance(self) -> None:
        self.cursor += 1


def selected(schedule: RoundSchedule, label: int) -> bool:
    """Whether the label transmits in the schedule's current round."""
    if schedule.cursor >= schedule.family.size:
        raise CursorExhaustedError(
            f"cursor {schedule.cursor} past family of size {schedule.family.size}"
        )
    return schedule.family.contains(schedule.cursor, label)


# ---------------------------------------------------------------------------
# Serialization: header line, then one line of ascending labels per set.


def serialize_family(family: SelectionFamily) -> str:
    if family.is_lazy:
        raise ValueError("lazy family cannot be serialized")
    if family.kind == "ssf":
        head = f"ssf c={family.c}"
    else:
        head = f"selector k={family.k} m={family.m}"
    lines = [
        f"{head} n_labels={family.n_labels} seed={family.seed} "
        f"size={family.size} certified={str(family.certified).lower()} "
        f"verification={family.verification}"
    ]
    for j in range(family.size):
        lines.append(" ".join(str(x) for x in family.set_members(j)))
    return "\n".join(lines) + "\n"


def parse_family(text: str) -> SelectionFamily:
    lines = text.splitlines()
    kind = lines[0].split()[0]
    head = dict(part.split("=", 1) for part in lines[0].split()[1:] if "=" in part)
    n_labels = int(head["n_labels"])
    size = int(head["size"])
    matrix = np.zeros((size, n_labels), dtype=bool)
    for j, line in enumerate(lines[1 : size + 1]):
        for tok in line.split():
            matrix[j, int(tok) - 1] = True
    return SelectionFamily(
        kind=kind,
        n_labels=n_labels,
        seed=int(head["seed"]),
        size=size,
        c=int(head["c"]) if "c" in head else None,
        k=int(head["k"]) if "k" in head else None,
        m=int(head["m"]) if "m" in head else None,
        certified=head.get("certified") == "true",
        verification=head.get("verification", "none"),
        _matrix=np.packbits(matrix, axis=1),
        _prob=0.0,
    )
