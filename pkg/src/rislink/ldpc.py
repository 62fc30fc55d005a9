"""Systematic regular LDPC code: construction, encoding, sum-product decoding.

Construction is the classic random regular recipe: fixed column weight 3,
row weights balanced to ceil/floor of 3n/m, greedy removal of length-4
cycles by degree-preserving edge swaps, and bounded re-seeding until the
parity-check matrix has full row rank. Columns are permuted so the codeword
is ``[message | parity]``; the stored check matrix matches that order.

The decoder is a flooding sum-product (belief propagation) pass over the
factor graph, vectorized over an arbitrary batch of frames. LLR convention:
positive means bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LLR_CLIP = 50.0
_TANH_EPS = 1e-12


@dataclass
class DecodeResult:
    hard_bits: np.ndarray       # same leading shape as the input LLRs
    extrinsic_llrs: np.ndarray  # posterior minus channel LLRs, clipped
    converged: np.ndarray       # bool per frame (parity satisfied)
    iterations: int


@dataclass
class LdpcCode:
    """Immutable code object; safe to share across parallel trials."""

    n: int
    rate: float
    seed: int
    check_rows: np.ndarray = field(repr=False)   # edge row indices, check-major
    check_cols: np.ndarray = field(repr=False)   # edge col indices, check-major
    encode_matrix: np.ndarray = field(repr=False)  # (m, k) uint8, parity = P @ u

    # decoder index plumbing, derived in __post_init__
    _row_starts: np.ndarray = field(init=False, repr=False)
    _col_starts: np.ndarray = field(init=False, repr=False)
    _vm_perm: np.ndarray = field(init=False, repr=False)
    _vm_cols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        rows, cols = self.check_rows, self.check_cols
        if not np.all(np.diff(rows) >= 0):
            raise ValueError("edges must be sorted by check index")
        counts = np.bincount(rows, minlength=self.num_checks)
        self._row_starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        self._vm_perm = np.lexsort((rows, cols))
        self._vm_cols = cols[self._vm_perm]
        col_counts = np.bincount(cols, minlength=self.n)
        self._col_starts = np.concatenate(([0], np.cumsum(col_counts)[:-1]))

    @property
    def num_checks(self) -> int:
        return self.encode_matrix.shape[0]

    @property
    def message_len(self) -> int:
        return self.n - self.num_checks

    @property
    def column_weights(self) -> np.ndarray:
        return np.bincount(self.check_cols, minlength=self.n)

    @property
    def row_weights(self) -> np.ndarray:
        return np.bincount(self.check_rows, minlength=self.num_checks)

    def parity_check_dense(self) -> np.ndarray:
        h = np.zeros((self.num_checks, self.n), dtype=np.uint8)
        h[self.check_rows, self.check_cols] = 1
        return h


def _regular_edge_assignment(n: int, m: int, col_weight: int,
                             rng: np.random.Generator) -> np.ndarray:
    """Assign ``col_weight`` distinct check rows to every column.

    Returns (n, col_weight) row indices. Row weights are balanced by drawing
    from a shuffled multiset of row slots; duplicate rows within a column are
    repaired by swapping slots with other columns.
    """
    n_edges = n * col_weight
    base, extra = divmod(n_edges, m)
    row_weights = np.full(m, base)
    row_weights[:extra] += 1
    slots = np.repeat(np.arange(m), row_weights)
    rng.shuffle(slots)
    cols = slots.reshape(n, col_weight)

    for _ in range(1000):
        dup_mask = np.zeros(n, dtype=bool)
        srt = np.sort(cols, axis=1)
        dup_mask = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
        bad = np.nonzero(dup_mask)[0]
        if bad.size == 0:
            return cols
        for c in bad:
            # swap one duplicated entry with a random slot elsewhere
            vals, counts = np.unique(cols[c], return_counts=True)
            dup_val = vals[np.argmax(counts)]
            pos = int(np.nonzero(cols[c] == dup_val)[0][0])
            other = int(rng.integers(n))
            opos = int(rng.integers(col_weight))
            cols[c, pos], cols[other, opos] = cols[other, opos], cols[c, pos]
    raise RuntimeError("failed to build a duplicate-free regular assignment")


def _break_short_cycles(cols: np.ndarray, rng: np.random.Generator,
                        max_passes: int = 30) -> np.ndarray:
    """Reduce length-4 cycles (two columns sharing two rows) by edge swaps.

    Swaps preserve both row and column weights. Best effort: stops when no
    4-cycles remain or after ``max_passes``.
    """
    n, w = cols.shape
    for _ in range(max_passes):
        pair_map: dict[tuple[int, int], int] = {}
        conflicts = []
        for c in range(n):
            r = np.sort(cols[c])
            for i in range(w):
                for j in range(i + 1, w):
                    key = (int(r[i]), int(r[j]))
                    if key in pair_map:
                        conflicts.append(c)
                        break
                    pair_map[key] = c
                else:
                    continue
                break
        if not conflicts:
            return cols
        for c in conflicts:
            pos = int(rng.integers(w))
            for _ in range(20):
                other = int(rng.integers(n))
                opos = int(rng.integers(w))
                a, b = cols[c, pos], cols[other, opos]
                if a == b or b in cols[c] or a in cols[other]:
                    continue
                cols[c, pos], cols[other, opos] = b, a
                break
    return cols


def _gf2_systematize(h: np.ndarray):
    """Gauss-Jordan over GF(2); returns (pivot_cols, reduced_rows) or None.

    ``reduced_rows[i]`` is the fully reduced row whose pivot sits at
    ``pivot_cols[i]``. None when the matrix is row-rank deficient.
    """
    m, n = h.shape
    work = h.copy()
    pivot_cols = []
    pivot_rows = []
    row_used = np.zeros(m, dtype=bool)
    for col in range(n):
        cand = np.nonzero(work[:, col] & ~row_used)[0]
        if cand.size == 0:
            continue
        piv = cand[0]
        others = np.nonzero(work[:, col])[0]
        others = others[others != piv]
        if others.size:
            work[others] ^= work[piv]
        row_used[piv] = True
        pivot_cols.append(col)
        pivot_rows.append(piv)
        if len(pivot_cols) == m:
            break
    if len(pivot_cols) < m:
        return None
    return np.array(pivot_cols), work[np.array(pivot_rows)]


def build_code(n: int, rate: float, seed: int, col_weight: int = 3,
               max_attempts: int = 10) -> LdpcCode:
    """Build a reproducible regular code with a systematic encoder.

    Raises RuntimeError when no full-rank construction is found within
    ``max_attempts`` re-seedings (derived deterministically from ``seed``).
    """
    k = n * rate
    if abs(k - round(k)) > 1e-9:
        raise ValueError(f"n * rate must be integral, got {n} * {rate}")
    k = int(round(k))
    m = n - k

    for attempt in range(max_attempts):
        rng = np.random.default_rng(np.random.SeedSequence((seed, attempt)))
        cols = _regular_edge_assignment(n, m, col_weight, rng)
        cols = _break_short_cycles(cols, rng)

        h = np.zeros((m, n), dtype=np.uint8)
        col_idx = np.repeat(np.arange(n), col_weight)
        h[cols.ravel(), col_idx] = 1

        sys_form = _gf2_systematize(h)
        if sys_form is None:
            continue
        pivot_cols, reduced = sys_form
        is_pivot = np.zeros(n, dtype=bool)
        is_pivot[pivot_cols] = True
        message_cols = np.nonzero(~is_pivot)[0]
        perm = np.concatenate([message_cols, pivot_cols])

        h_perm = h[:, perm]
        encode_matrix = reduced[:, message_cols]

        rows, cols_e = np.nonzero(h_perm)
        order = np.lexsort((cols_e, rows))
        return LdpcCode(n=n, rate=rate, seed=seed,
                        check_rows=rows[order].astype(np.int64),
                        check_cols=cols_e[order].astype(np.int64),
                        encode_matrix=encode_matrix.astype(np.uint8))
    raise RuntimeError(
        f"no full-rank parity-check matrix after {max_attempts} attempts")


def encode(code: LdpcCode, message_bits: np.ndarray) -> np.ndarray:
    """Systematic encoding: codeword = [message | parity].

    Accepts (k,) or (B, k) arrays of 0/1.
    """
    u = np.asarray(message_bits)
    squeeze = u.ndim == 1
    u = np.atleast_2d(u).astype(np.uint8)
    if u.shape[1] != code.message_len:
        raise ValueError(
            f"message length {u.shape[1]} != expected {code.message_len}")
    parity = (u.astype(np.int64) @ code.encode_matrix.T.astype(np.int64)) % 2
    cw = np.concatenate([u, parity.astype(np.uint8)], axis=1)
    return cw[0] if squeeze else cw


def syndrome(code: LdpcCode, bits: np.ndarray) -> np.ndarray:
    """Parity checks of one or more words: (B, m) of 0/1."""
    b = np.atleast_2d(np.asarray(bits)).astype(np.int64)
    edge_bits = b[:, code.check_cols]
    sums = np.add.reduceat(edge_bits, code._row_starts, axis=1)
    return (sums % 2).astype(np.uint8)


def decode(code: LdpcCode, channel_llrs: np.ndarray, max_iters: int = 10) -> DecodeResult:
    """Flooding sum-product decoding with early stop on satisfied parity.

    ``channel_llrs``: (n,) or (B, n). Non-convergence is reported via the
    ``converged`` flags, never as an exception.
    """
    llrs = np.asarray(channel_llrs, dtype=np.float64)
    squeeze = llrs.ndim == 1
    llrs = np.atleast_2d(llrs)
    if llrs.shape[1] != code.n:
        raise ValueError(f"LLR length {llrs.shape[1]} != n = {code.n}")
    B = llrs.shape[0]
    lc = np.clip(llrs, -LLR_CLIP, LLR_CLIP)

    if max_iters <= 0:
        hard = (lc < 0).astype(np.uint8)
        conv = ~np.any(syndrome(code, hard), axis=1)
        ext = np.zeros_like(lc)
        if squeeze:
            return DecodeResult(hard[0], ext[0], conv, 0)
        return DecodeResult(hard, ext, conv, 0)

    rows, cols = code.check_rows, code.check_cols
    row_starts, col_starts = code._row_starts, code._col_starts
    vm_perm, vm_cols = code._vm_perm, code._vm_cols

    v2c = lc[:, cols].copy()
    posterior = lc.copy()
    iters_done = 0

    for it in range(1, max_iters + 1):
        t = np.tanh(0.5 * v2c)
        small = np.abs(t) < _TANH_EPS
        if np.any(small):
            t = np.where(small, np.where(t < 0, -_TANH_EPS, _TANH_EPS), t)
        row_prod = np.multiply.reduceat(t, row_starts, axis=1)
        excl = row_prod[:, rows] / t
        excl = np.clip(excl, -1.0 + 1e-15, 1.0 - 1e-15)
        c2v = 2.0 * np.arctanh(excl)

        c2v_vm = c2v[:, vm_perm]
        col_sums = np.add.reduceat(c2v_vm, col_starts, axis=1)
        posterior = np.clip(lc + col_sums, -LLR_CLIP, LLR_CLIP)
        v2c_vm = posterior[:, vm_cols] - c2v_vm
        v2c[:, vm_perm] = np.clip(v2c_vm, -LLR_CLIP, LLR_CLIP)

        iters_done = it
        hard = (posterior < 0).astype(np.uint8)
        conv = ~np.any(syndrome(code, hard), axis=1)
        if bool(np.all(conv)):
            break

    hard = (posterior < 0).astype(np.uint8)
    conv = ~np.any(syndrome(code, hard), axis=1)
    extrinsic = np.clip(posterior - lc, -LLR_CLIP, LLR_CLIP)
    if squeeze:
        return DecodeResult(hard[0], extrinsic[0], conv, iters_done)
    return DecodeResult(hard, extrinsic, conv, iters_done)


def export_parity_text(code: LdpcCode) -> str:
    """One line per check row: space-separated column indices."""
    lines = [f"{code.n} {code.num_checks}"]
    for r in range(code.num_checks):
        start = code._row_starts[r]
        end = code._row_starts[r + 1] if r + 1 < code.num_checks else len(code.check_cols)
        lines.append(" ".join(str(c) for c in code.check_cols[start:end]))
    return "\n".join(lines) + "\n"


def parity_text_to_dense(text: str) -> np.ndarray:
    """Inverse of export_parity_text, as a dense 0/1 matrix."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    n, m = (int(v) for v in lines[0].split())
    h = np.zeros((m, n), dtype=np.uint8)
    for r, ln in enumerate(lines[1:]):
        for c in ln.split():
            h[r, int(c)] = 1
    return h
