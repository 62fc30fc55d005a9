"""QPSK Gray modem, encoded-pilot packets, and reflection-phase schedules.

Frame layout on the wire (one codeword per user, QPSK, M_c = 2 bits/symbol):

    [ parity symbols | pilot symbols | info symbols ]
        N_ps              N_p            N_info

Pilot symbols are drawn from orthogonal user signatures (Hadamard rows at a
fixed constellation point). Their hard-demodulated bits sit at the head of
the systematic payload, so systematic encoding leaves the pilot symbols
bit-exact on the wire while granting them code protection.

The surface-phase schedule is column-aligned with the symbol stream: a DFT
sounding block over the parity segment, a designed pilot block, and the
optimized reflection vector held constant over the info segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

from .ldpc import LdpcCode, encode


# ---------------------------------------------------------------------------
# QPSK Gray modem


def qpsk_modulate(bits: np.ndarray, symbol_energy: float = 1.0) -> np.ndarray:
    """Gray-mapped QPSK: pairs (b0, b1) -> a*((1-2b0) + 1j(1-2b1)).

    ``bits``: (..., 2T) of 0/1; returns (..., T) complex with
    E|x|^2 = symbol_energy.
    """
    b = np.asarray(bits)
    if b.shape[-1] % 2:
        raise ValueError("bit count must be even for QPSK")
    amp = np.sqrt(symbol_energy / 2.0)
    b0 = b[..., 0::2].astype(np.float64)
    b1 = b[..., 1::2].astype(np.float64)
    return amp * ((1.0 - 2.0 * b0) + 1j * (1.0 - 2.0 * b1))


def qpsk_hard_demod(symbols: np.ndarray) -> np.ndarray:
    """Hard decisions back to interleaved bit pairs (sign rule, LLR>0 -> 0)."""
    s = np.asarray(symbols)
    out = np.empty(s.shape[:-1] + (2 * s.shape[-1],), dtype=np.uint8)
    out[..., 0::2] = (s.real < 0).astype(np.uint8)
    out[..., 1::2] = (s.imag < 0).astype(np.uint8)
    return out


def qpsk_soft_demod(symbol_estimates: np.ndarray, noise_var: float,
                    symbol_energy: float = 1.0) -> np.ndarray:
    """Per-bit LLRs under a Gaussian channel, positive = bit 0.

    ``noise_var`` is the total complex noise variance seen per symbol.
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    y = np.asarray(symbol_estimates)
    scale = 2.0 * np.sqrt(2.0 * symbol_energy) / noise_var
    llrs = np.empty(y.shape[:-1] + (2 * y.shape[-1],), dtype=np.float64)
    llrs[..., 0::2] = scale * y.real
    llrs[..., 1::2] = scale * y.imag
    return llrs


# ---------------------------------------------------------------------------
# Pilot signatures


def hadamard_order(num_users: int) -> int:
    """Smallest power of two >= max(2, num_users)."""
    order = 2
    while order < num_users:
        order *= 2
    return order


def pilot_symbol_matrix(num_users: int, n_pilot: int, scenario: str,
                        symbol_energy: float = 1.0) -> np.ndarray:
    """Per-user pilot symbol rows, (K, N_p).

    Rows are tiled Hadamard signatures at the bits-00 constellation point,
    mutually orthogonal across users. The direct-path scenario repeats the
    first half so the receiver can split the direct and reflected sums.
    """
    order = hadamard_order(num_users)
    anchor = qpsk_modulate(np.zeros(2, dtype=np.uint8), symbol_energy)[0]
    if scenario == "los":
        half = n_pilot // 2
        if 2 * half != n_pilot:
            raise ValueError("pilot length must be even in the los scenario")
        if half % order:
            raise ValueError(
                f"half pilot length {half} must be a multiple of the "
                f"Hadamard order {order}")
        base = hadamard(order)[:num_users]
        aux = np.tile(base, (1, half // order)) * anchor
        return np.concatenate([aux, aux], axis=1)
    if scenario == "nlos":
        if n_pilot % order:
            raise ValueError(
                f"pilot length {n_pilot} must be a multiple of the "
                f"Hadamard order {order}")
        base = hadamard(order)[:num_users]
        return np.tile(base, (1, n_pilot // order)) * anchor
    raise ValueError(f"unknown scenario {scenario!r}")


# ---------------------------------------------------------------------------
# Packets


@dataclass
class Packet:
    """One user's systematically encoded frame and its wire symbols."""

    user_index: int
    scenario: str
    codeword_bits: np.ndarray   # [pilot bits | data bits | parity bits]
    symbols: np.ndarray         # wire order [parity | pilot | info]
    n_sounding: int
    n_pilot: int
    n_info: int
    data_bits: np.ndarray
    symbol_energy: float

    @property
    def total_symbols(self) -> int:
        return self.n_sounding + self.n_pilot + self.n_info

    @property
    def sounding_slice(self) -> slice:
        return slice(0, self.n_sounding)

    @property
    def pilot_slice(self) -> slice:
        return slice(self.n_sounding, self.n_sounding + self.n_pilot)

    @property
    def info_slice(self) -> slice:
        return slice(self.n_sounding + self.n_pilot, self.total_symbols)

    @property
    def pilot_symbols(self) -> np.ndarray:
        return self.symbols[self.pilot_slice]


def build_packet(user_index: int, data_bits: np.ndarray, scenario: str,
                 code: LdpcCode, symbol_energy: float = 1.0,
                 num_users: int | None = None) -> Packet:
    """Assemble one user's frame around an orthogonal encoded pilot.

    The pilot length is implied by the code: pilot bits fill the systematic
    payload left over once ``data_bits`` is placed. ``num_users`` fixes the
    signature alphabet shared by all users of a frame; it defaults to
    ``user_index + 1`` which is only safe for single-user experiments.
    """
    data = np.asarray(data_bits).astype(np.uint8)
    if data.ndim != 1:
        raise ValueError("data_bits must be one-dimensional")
    n_pilot_bits = code.message_len - data.size
    if n_pilot_bits <= 0 or n_pilot_bits % 2:
        raise ValueError(
            f"data length {data.size} leaves {n_pilot_bits} pilot bits; "
            "need a positive even count")
    n_pilot = n_pilot_bits // 2
    total_users = num_users if num_users is not None else user_index + 1
    if user_index >= total_users:
        raise ValueError("user_index out of range for num_users")
    pilots = pilot_symbol_matrix(total_users, n_pilot, scenario, symbol_energy)
    pilot_syms = pilots[user_index]

    pilot_bits = qpsk_hard_demod(pilot_syms)
    message = np.concatenate([pilot_bits, data])
    codeword = encode(code, message)

    n_parity_bits = code.n - code.message_len
    if n_parity_bits % 2:
        raise ValueError("parity bit count must be even for QPSK framing")
    n_sounding = n_parity_bits // 2
    n_info = data.size // 2 if data.size % 2 == 0 else None
    if n_info is None:
        raise ValueError("data bit count must be even for QPSK framing")

    pilot_region = qpsk_modulate(codeword[:n_pilot_bits], symbol_energy)
    info_region = qpsk_modulate(
        codeword[n_pilot_bits:code.message_len], symbol_energy)
    parity_region = qpsk_modulate(codeword[code.message_len:], symbol_energy)
    symbols = np.concatenate([parity_region, pilot_region, info_region])

    return Packet(user_index=user_index, scenario=scenario,
                  codeword_bits=codeword, symbols=symbols,
                  n_sounding=n_sounding, n_pilot=n_pilot, n_info=n_info,
                  data_bits=data, symbol_energy=symbol_energy)


def wire_bit_order(packet: Packet) -> np.ndarray:
    """Codeword bits rearranged to match the wire symbol order."""
    n_pb = 2 * packet.n_pilot
    msg_len = n_pb + packet.data_bits.size
    return np.concatenate([
        packet.codeword_bits[msg_len:],        # parity
        packet.codeword_bits[:n_pb],           # pilot
        packet.codeword_bits[n_pb:msg_len],    # info
    ])


def codeword_from_wire_bits(wire_bits: np.ndarray, n_sounding: int,
                            n_pilot: int) -> np.ndarray:
    """Inverse of wire_bit_order (works on LLR arrays too)."""
    w = np.asarray(wire_bits)
    n_par = 2 * n_sounding
    n_pb = 2 * n_pilot
    return np.concatenate(
        [w[..., n_par:n_par + n_pb], w[..., n_par + n_pb:], w[..., :n_par]],
        axis=-1)


def wire_from_codeword(codeword: np.ndarray, n_pilot: int,
                       n_info: int) -> np.ndarray:
    """Codeword-order array (bits or LLRs) rearranged to wire order."""
    c = np.asarray(codeword)
    n_pb = 2 * n_pilot
    msg_len = n_pb + 2 * n_info
    return np.concatenate(
        [c[..., msg_len:], c[..., :n_pb], c[..., n_pb:msg_len]], axis=-1)


# ---------------------------------------------------------------------------
# Phase schedules


def _dft_columns(size: int, count: int) -> np.ndarray:
    """Concatenated size-point DFT matrices truncated to ``count`` columns."""
    blocks = -(-count // size)
    l = np.arange(size)[:, None]
    i = np.arange(size)[None, :]
    dft = np.exp(-2j * np.pi * l * i / size)
    return np.tile(dft, (1, blocks))[:, :count]


@dataclass
class PhaseSchedule:
    """Column-aligned surface phases for one frame."""

    theta_sounding: np.ndarray    # (L_e, N_ps), DFT rows
    theta_star: np.ndarray        # (L_e, N_p/2)
    theta_pilot: np.ndarray       # (L_e, N_p) = [theta_star, -theta_star]
    theta_pilot_joint: np.ndarray | None  # (L_e, N_p) user-aligned design
    theta_data: np.ndarray        # (L_e, N_info), optimized vector repeated
    q: int

    def frame_phases(self, scenario: str) -> np.ndarray:
        """Full (L_e, T) phase sequence in wire order."""
        if scenario == "los" or self.theta_pilot_joint is None:
            pilot = self.theta_pilot
        else:
            pilot = self.theta_pilot_joint
        return np.concatenate(
            [self.theta_sounding, pilot, self.theta_data], axis=1)


def phase_schedule(n_sounding: int, n_pilot: int, n_info: int,
                   num_elements: int, data_phase: np.ndarray,
                   num_users: int | None = None) -> PhaseSchedule:
    """Build the per-frame phase schedule.

    ``data_phase`` is the unit-modulus reflection vector used over the info
    segment. ``num_users`` (optional) aligns the pilot-segment phase blocks
    with the pilot symbol signatures so the pilot regression matrix keeps
    full column rank in the blocked scenario.
    """
    if n_pilot % 2:
        raise ValueError("pilot segment length must be even")
    phi = np.asarray(data_phase, dtype=np.complex128).reshape(-1)
    if phi.size != num_elements:
        raise ValueError(
            f"data phase length {phi.size} != element count {num_elements}")
    if not np.allclose(np.abs(phi), 1.0, atol=1e-9):
        raise ValueError("data phase entries must be unit modulus")

    le = num_elements
    i = np.arange(n_sounding)[None, :]
    l = np.arange(le)[:, None]
    theta_sounding = np.exp(-2j * np.pi * l * i / max(n_sounding, 1))

    half = n_pilot // 2
    if le >= half:
        cols = np.arange(half)[None, :]
        theta_star = np.exp(-4j * np.pi * l * cols / max(n_pilot, 1))
        q = 1
    else:
        theta_star = _dft_columns(le, half)
        q = -(-half // le)
    theta_pilot = np.concatenate([theta_star, -theta_star], axis=1)

    theta_pilot_joint = None
    if num_users is not None and n_pilot > 0:
        order = hadamard_order(num_users)
        if n_pilot % order == 0:
            blocks = n_pilot // order
            base = _dft_columns(le, le)
            col_idx = np.arange(blocks) % le
            theta_pilot_joint = np.repeat(base[:, col_idx], order, axis=1)

    theta_data = np.repeat(phi[:, None], n_info, axis=1)
    return PhaseSchedule(theta_sounding=theta_sounding, theta_star=theta_star,
                         theta_pilot=theta_pilot,
                         theta_pilot_joint=theta_pilot_joint,
                         theta_data=theta_data, q=q)


# ---------------------------------------------------------------------------
# Kronecker regression matrix


@dataclass
class LambdaMatrix:
    """Stacked per-instant Kronecker columns x^(i) kron phi^(i).

    Row (k, l) sits at index k * L_e + l; column i covers instant i of the
    aligned symbol/phase pair.
    """

    matrix: np.ndarray
    variant: str
    num_users: int
    num_elements: int


def build_lambda(symbols_by_user: np.ndarray, phases: np.ndarray,
                 variant: str = "full") -> LambdaMatrix:
    """Khatri-Rao product of the symbol rows and phase rows.

    ``symbols_by_user``: (K, C); ``phases``: (L_e, C) with matching column
    count. ``variant`` is a bookkeeping tag: one of pilot / full / decoder /
    error-model.
    """
    x = np.asarray(symbols_by_user, dtype=np.complex128)
    p = np.asarray(phases, dtype=np.complex128)
    if x.ndim != 2 or p.ndim != 2:
        raise ValueError("symbols and phases must be 2-D")
    if x.shape[1] != p.shape[1]:
        raise ValueError(
            f"column mismatch: symbols {x.shape[1]} vs phases {p.shape[1]}")
    k, cols = x.shape
    le = p.shape[0]
    lam = (x[:, None, :] * p[None, :, :]).reshape(k * le, cols)
    return LambdaMatrix(matrix=lam, variant=variant,
                        num_users=k, num_elements=le)
