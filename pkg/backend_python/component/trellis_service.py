import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from component.signal_service import IsiChannel, ReceivedFrame
from utils.errors import StateCapError
from utils.llr_utils import L_MAX, clamp_llr

logger = logging.getLogger(__name__)

DEFAULT_STATE_CAP = 64
# Finite stand-in for log(0) so sums of forbidden metrics never produce nan
NEG_INF = -1e30


class LlrRole(str, Enum):
    A_PRIORI = "a_priori"
    EXTRINSIC = "extrinsic"
    POSTERIOR = "posterior"


@dataclass(frozen=True)
class LlrFrame:
    """ln Pr(x=+1)/Pr(x=-1) per symbol, clamped to +-L_MAX"""
    values: np.ndarray
    role: LlrRole

    def __post_init__(self):
        object.__setattr__(self, "values", clamp_llr(self.values))

    def __len__(self) -> int:
        return len(self.values)

    def with_role(self, role: LlrRole) -> "LlrFrame":
        return LlrFrame(self.values, role)

    @classmethod
    def zeros(cls, n: int, role: LlrRole = LlrRole.A_PRIORI) -> "LlrFrame":
        return cls(np.zeros(n), role)


@dataclass(frozen=True)
class RscCode:
    """Rate-1/2 recursive systematic code, feedback 1+D+D^2, parity 1+D^2"""
    feedback_poly: Tuple[int, ...] = (1, 1, 1)
    parity_poly: Tuple[int, ...] = (1, 0, 1)
    memory: int = 2

    def __post_init__(self):
        if self.feedback_poly != (1, 1, 1) or self.parity_poly != (1, 0, 1):
            raise ValueError("Only the (1+D^2)/(1+D+D^2) code is supported")

    @property
    def rate(self) -> float:
        return 0.5

    @property
    def num_states(self) -> int:
        return 1 << self.memory

    def coded_length(self, message_len: int) -> int:
        return 2 * (message_len + self.memory)


@dataclass(frozen=True)
class TrellisSpec:
    """
    Complete transition tables indexed [state, input].

    outputs holds the bits (code trellis) or the noiseless channel sample
    (channel trellis) emitted on each branch. prev_state/prev_input list the
    two branches entering every state.
    """
    next_state: np.ndarray
    outputs: np.ndarray
    prev_state: np.ndarray
    prev_input: np.ndarray

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]


def _with_predecessors(next_state: np.ndarray, outputs: np.ndarray) -> TrellisSpec:
    S = next_state.shape[0]
    prev_state = np.zeros((S, 2), dtype=np.int64)
    prev_input = np.zeros((S, 2), dtype=np.int64)
    fill = np.zeros(S, dtype=np.int64)
    for s in range(S):
        for u in range(2):
            ns = next_state[s, u]
            if fill[ns] >= 2:
                raise ValueError("Trellis state has more than two predecessors")
            prev_state[ns, fill[ns]] = s
            prev_input[ns, fill[ns]] = u
            fill[ns] += 1
    if np.any(fill != 2):
        raise ValueError("Incomplete trellis")
    return TrellisSpec(next_state, outputs, prev_state, prev_input)


def code_trellis(code: RscCode) -> TrellisSpec:
    """State (a_{k-1}, a_{k-2}) packed as a_{k-1} | a_{k-2} << 1; outputs [u, p]"""
    S = code.num_states
    next_state = np.zeros((S, 2), dtype=np.int64)
    outputs = np.zeros((S, 2, 2), dtype=np.int64)
    for s in range(S):
        a1, a2 = s & 1, (s >> 1) & 1
        for u in range(2):
            a = u ^ a1 ^ a2
            p = a ^ a2
            next_state[s, u] = a | (a1 << 1)
            outputs[s, u] = (u, p)
    return _with_predecessors(next_state, outputs)


def _termination_input(state: int) -> int:
    a1, a2 = state & 1, (state >> 1) & 1
    return a1 ^ a2


def rsc_encode(bits, code: Optional[RscCode] = None) -> np.ndarray:
    """Systematic and parity bits multiplexed per step, two tail steps back to state 0"""
    code = code or RscCode()
    trellis = code_trellis(code)
    bits = np.asarray(bits, dtype=np.int64).ravel()
    out = np.zeros(code.coded_length(len(bits)), dtype=np.int64)
    state = 0
    for k in range(len(bits) + code.memory):
        u = int(bits[k]) if k < len(bits) else _termination_input(state)
        out[2 * k:2 * k + 2] = trellis.outputs[state, u]
        state = int(trellis.next_state[state, u])
    return out


@dataclass(frozen=True)
class Interleaver:
    permutation: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=np.int64)
        if not np.array_equal(np.sort(perm), np.arange(len(perm))):
            raise ValueError("Interleaver permutation must cover 0..N-1 exactly once")
        object.__setattr__(self, "permutation", perm)

    def __len__(self) -> int:
        return len(self.permutation)

    @classmethod
    def identity(cls, n: int) -> "Interleaver":
        return cls(np.arange(n))

    @classmethod
    def random(cls, n: int, seed: Union[int, np.random.SeedSequence]) -> "Interleaver":
        bitgen = np.random.Philox(seed)
        perm = np.random.Generator(bitgen).permutation(n)
        return cls(perm, seed if isinstance(seed, int) else None)


def _values(frame) -> np.ndarray:
    return frame.values if isinstance(frame, LlrFrame) else np.asarray(frame)


def _rewrap(frame, values):
    return LlrFrame(values, frame.role) if isinstance(frame, LlrFrame) else values


def interleave(frame, pi: Interleaver):
    vals = _values(frame)
    if len(vals) != len(pi):
        raise ValueError(f"Frame length {len(vals)} does not match interleaver length {len(pi)}")
    return _rewrap(frame, vals[pi.permutation])


def deinterleave(frame, pi: Interleaver):
    vals = _values(frame)
    if len(vals) != len(pi):
        raise ValueError(f"Frame length {len(vals)} does not match interleaver length {len(pi)}")
    out = np.empty_like(vals)
    out[pi.permutation] = vals
    return _rewrap(frame, out)


def _forward_backward(trellis: TrellisSpec, gamma: np.ndarray, final_state: Optional[int] = 0):
    """
    Log-domain alpha/beta recursions for gamma[k, s, u]. Starts in state 0,
    ends in final_state (None = free end). Returns branch metrics
    alpha_k(s) + gamma_k(s,u) + beta_{k+1}(next(s,u)).
    """
    K, S = gamma.shape[0], trellis.num_states
    alpha = np.full((K + 1, S), NEG_INF)
    beta = np.full((K + 1, S), NEG_INF)
    alpha[0, 0] = 0.0
    if final_state is None:
        beta[K, :] = 0.0
    else:
        beta[K, final_state] = 0.0

    ps, pu = trellis.prev_state, trellis.prev_input
    ns = trellis.next_state
    for k in range(K):
        a = alpha[k]
        g = gamma[k]
        nxt = np.logaddexp(a[ps[:, 0]] + g[ps[:, 0], pu[:, 0]], a[ps[:, 1]] + g[ps[:, 1], pu[:, 1]])
        alpha[k + 1] = nxt - np.max(nxt)
    for k in range(K - 1, -1, -1):
        g = gamma[k]
        b = np.logaddexp(g[:, 0] + beta[k + 1][ns[:, 0]], g[:, 1] + beta[k + 1][ns[:, 1]])
        beta[k] = b - np.max(b)

    return alpha[:-1, :, None] + gamma + beta[1:][:, ns]


def _split_llr(metrics: np.ndarray, bit_table: np.ndarray) -> np.ndarray:
    """LLR of bit==0 vs bit==1 from per-branch metrics [k, s, u]"""
    zero = np.where(bit_table[None] == 0, metrics, NEG_INF)
    one = np.where(bit_table[None] == 1, metrics, NEG_INF)
    return logsumexp(zero, axis=(1, 2)) - logsumexp(one, axis=(1, 2))


def bcjr_decode(code: RscCode, coded_llr: LlrFrame) -> Tuple[LlrFrame, LlrFrame]:
    """
    Exact log-MAP decoding of the terminated RSC code.

    coded_llr carries a priori LLRs on the multiplexed coded bits (bit 0 <-> +1).
    Returns (extrinsic on coded bits, posterior on message bits).
    """
    L = coded_llr.values
    if len(L) % 2 or len(L) < 2 * code.memory:
        raise ValueError(f"Coded frame length {len(L)} is not 2*(K+{code.memory})")
    steps = len(L) // 2
    n_msg = steps - code.memory
    trellis = code_trellis(code)

    half = 0.5 * L.reshape(steps, 2)
    bit_sign = 1 - 2 * trellis.outputs
    gamma = np.einsum("kb,sub->ksu", half, bit_sign).astype(float)

    # tail steps only allow the input that zeroes the feedback register
    for s in range(trellis.num_states):
        forbidden = 1 - _termination_input(s)
        gamma[n_msg:, s, forbidden] = NEG_INF

    metrics = _forward_backward(trellis, gamma, final_state=0)
    post_sys = _split_llr(metrics, trellis.outputs[:, :, 0])
    post_par = _split_llr(metrics, trellis.outputs[:, :, 1])

    posterior_coded = np.stack([post_sys, post_par], axis=1).ravel()
    extrinsic = LlrFrame(posterior_coded - L, LlrRole.EXTRINSIC)
    message = LlrFrame(post_sys[:n_msg], LlrRole.POSTERIOR)
    return extrinsic, message


def channel_trellis(ch: IsiChannel, state_cap: int = DEFAULT_STATE_CAP) -> TrellisSpec:
    """
    State holds the last L_h-1 symbols, newest in bit 0 (bit value 1 <-> symbol -1).
    outputs[s, u] is the noiseless sample sum_k h_k x_{n-k}.
    """
    memory = ch.length - 1
    S = 1 << memory
    if S > state_cap:
        raise StateCapError(S, state_cap)
    mask = S - 1
    next_state = np.zeros((S, 2), dtype=np.int64)
    outputs = np.zeros((S, 2))
    for s in range(S):
        past = np.array([1.0 - 2.0 * ((s >> j) & 1) for j in range(memory)])
        isi = float(np.dot(ch.taps[1:], past)) if memory else 0.0
        for u in range(2):
            next_state[s, u] = ((s << 1) | u) & mask
            outputs[s, u] = ch.taps[0] * (1.0 - 2.0 * u) + isi
    if memory == 0:
        # single state: both inputs loop back, give it a two-predecessor layout
        return TrellisSpec(next_state, outputs, np.zeros((1, 2), dtype=np.int64), np.array([[0, 1]]))
    return _with_predecessors(next_state, outputs)


def bcjr_equalize(ch: IsiChannel, rx: ReceivedFrame, apriori: LlrFrame,
                  state_cap: int = DEFAULT_STATE_CAP) -> LlrFrame:
    """
    Symbol-wise MAP equalizer over the 2^(L_h-1)-state channel trellis.

    apriori covers the whole frame. Guard positions and the virtual symbols
    past the frame end are pinned to +1; the trellis starts and ends in the
    all-(+1) state. Returns extrinsic LLRs over the whole frame.
    """
    trellis = channel_trellis(ch, state_cap)
    T = rx.layout.total_len
    if len(apriori) != T:
        raise ValueError(f"A priori frame has {len(apriori)} values, frame has {T} symbols")
    r = rx.samples
    steps = len(r)

    gamma = -((r[:, None, None] - trellis.outputs[None]) ** 2) / (2.0 * rx.noise_variance)
    La = np.zeros(steps)
    La[:T] = apriori.values
    gamma = gamma + 0.5 * La[:, None, None] * np.array([1.0, -1.0])[None, None, :]

    pinned = np.ones(steps, dtype=bool)
    pinned[:T] = rx.layout.known_mask()
    gamma[pinned, :, 1] = NEG_INF

    metrics = _forward_backward(trellis, gamma, final_state=0)
    input_bits = np.broadcast_to(np.array([0, 1]), trellis.next_state.shape)
    posterior = _split_llr(metrics[:T], input_bits)

    extrinsic = np.where(rx.layout.known_mask(), 0.0, posterior - apriori.values)
    return LlrFrame(extrinsic, LlrRole.EXTRINSIC)


class MapEqualizer:
    """BCJR channel equalizer with the same call shape as the filter equalizers"""

    def __init__(self, channel: IsiChannel, state_cap: int = DEFAULT_STATE_CAP):
        self.channel = channel
        self.state_cap = state_cap
        channel_trellis(channel, state_cap)
        logger.debug(f"🔧 MapEqualizer ready: {1 << (channel.length - 1)} states")

    def equalize(self, rx: ReceivedFrame, apriori_payload: LlrFrame, **_) -> LlrFrame:
        layout = rx.layout
        full = np.zeros(layout.total_len)
        full[layout.payload_slice] = apriori_payload.values
        ext = bcjr_equalize(self.channel, rx, LlrFrame(full, LlrRole.A_PRIORI), self.state_cap)
        return LlrFrame(ext.values[layout.payload_slice], LlrRole.EXTRINSIC)

    def diagnostics(self) -> dict:
        return {}
