"""Start-to-end span-pair scoring head.

A span is represented only through the vectors of its start and end tokens,
so the head never materialises per-span vectors. For a span ``q`` and an
earlier span ``c``::

    f_m(q)   = v_s . m_s + v_e . m_e + m_s^T B_m m_e
    f_a(c,q) = a_s(c)^T B_ss a_s(q) + a_s(c)^T B_se a_e(q)
             + a_e(c)^T B_es a_s(q) + a_e(c)^T B_ee a_e(q)
    F(c,q)   = f_m(c) + f_m(q) + f_a(c,q),    F(null, q) = 0

where ``m_s = gelu(W_s h_start + b_s)`` etc. All arithmetic is float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .domain import Span, span_precedes
from .encoder import Xoshiro256

GELU_C = math.sqrt(2.0 / math.pi)
GELU_A = 0.044715

MENTION_FIELDS = ("W_s", "b_s", "W_e", "b_e", "v_s", "v_e", "B_m")
ANTECEDENT_FIELDS = ("U_s", "c_s", "U_e", "c_e", "B_ss", "B_se", "B_es", "B_ee")


def gelu(x):
    return 0.5 * x * (1.0 + np.tanh(GELU_C * (x + GELU_A * (x * x * x))))


def gelu_grad(x):
    x2 = x * x
    t = np.tanh(GELU_C * (x + GELU_A * (x2 * x)))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x2)


class ConfigurationError(ValueError):
    pass


@dataclass(eq=False)
class HeadParams:
    W_s: np.ndarray
    b_s: np.ndarray
    W_e: np.ndarray
    b_e: np.ndarray
    v_s: np.ndarray
    v_e: np.ndarray
    B_m: np.ndarray
    U_s: np.ndarray
    c_s: np.ndarray
    U_e: np.ndarray
    c_e: np.ndarray
    B_ss: np.ndarray
    B_se: np.ndarray
    B_es: np.ndarray
    B_ee: np.ndarray

    def __post_init__(self):
        p, d = self.W_s.shape
        expect = {
            "W_s": (p, d), "b_s": (p,), "W_e": (p, d), "b_e": (p,), "v_s": (p,), "v_e": (p,),
            "B_m": (p, p), "U_s": (p, d), "c_s": (p,), "U_e": (p, d), "c_e": (p,),
            "B_ss": (p, p), "B_se": (p, p), "B_es": (p, p), "B_ee": (p, p),
        }
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise ConfigurationError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def proj_dim(self) -> int:
        return self.W_s.shape[0]

    @property
    def d(self) -> int:
        return self.W_s.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def zeros(cls, d: int, p: int) -> "HeadParams":
        shapes = {"W_s": (p, d), "W_e": (p, d), "U_s": (p, d), "U_e": (p, d),
                  "B_m": (p, p), "B_ss": (p, p), "B_se": (p, p), "B_es": (p, p), "B_ee": (p, p)}
        return cls(**{f.name: np.zeros(shapes.get(f.name, (p,))) for f in fields(cls)})


def init_head(seed: int, d: int, p: int = 32) -> HeadParams:
    """Uniform fan-in scaled init from its own xoshiro stream; biases start at zero."""
    rng = Xoshiro256(seed ^ 0x5EED_4EAD)
    proj = 1.0 / math.sqrt(d)
    vec = 1.0 / math.sqrt(p)
    bil = 0.1 / math.sqrt(p)
    z = np.zeros(p)
    return HeadParams(
        W_s=rng.uniform(-proj, proj, (p, d)), b_s=z.copy(),
        W_e=rng.uniform(-proj, proj, (p, d)), b_e=z.copy(),
        v_s=rng.uniform(-vec, vec, (p,)), v_e=rng.uniform(-vec, vec, (p,)),
        B_m=rng.uniform(-bil, bil, (p, p)),
        U_s=rng.uniform(-proj, proj, (p, d)), c_s=z.copy(),
        U_e=rng.uniform(-proj, proj, (p, d)), c_e=z.copy(),
        B_ss=rng.uniform(-bil, bil, (p, p)), B_se=rng.uniform(-bil, bil, (p, p)),
        B_es=rng.uniform(-bil, bil, (p, p)), B_ee=rng.uniform(-bil, bil, (p, p)),
    )


# -- single-span API ---------------------------------------------------------

def _check_dims(h: np.ndarray, params: HeadParams):
    if h.ndim != 2 or h.shape[1] != params.d:
        raise ConfigurationError(f"token vectors have shape {h.shape}, head expects d={params.d}")


def mention_score(h: np.ndarray, q: Span, params: HeadParams) -> float:
    _check_dims(h, params)
    m_s = gelu(params.W_s @ h[q.start] + params.b_s)
    m_e = gelu(params.W_e @ h[q.end] + params.b_e)
    return float(params.v_s @ m_s + params.v_e @ m_e + m_s @ params.B_m @ m_e)


def antecedent_score(h: np.ndarray, c: Span, q: Span, params: HeadParams) -> float:
    _check_dims(h, params)
    if not span_precedes(c, q):
        raise ValueError(f"candidate {c.as_tuple()} does not precede query {q.as_tuple()}")
    P = params

    def proj(i, U, b):
        return gelu(U @ h[i] + b)

    cs, ce = proj(c.start, P.U_s, P.c_s), proj(c.end, P.U_e, P.c_e)
    qs, qe = proj(q.start, P.U_s, P.c_s), proj(q.end, P.U_e, P.c_e)
    return float(cs @ P.B_ss @ qs + cs @ P.B_se @ qe + ce @ P.B_es @ qs + ce @ P.B_ee @ qe)


def pair_score(h: np.ndarray, c: Span | None, q: Span, params: HeadParams) -> float:
    """``F(c, q)``; ``c=None`` is the null antecedent and scores exactly 0."""
    if c is None:
        return 0.0
    return (mention_score(h, c, params) + mention_score(h, q, params)
            + antecedent_score(h, c, q, params))


def softmax_with_null(scores) -> np.ndarray:
    """Softmax over ``scores + [0.0]``; the last entry is the null antecedent."""
    z = np.append(np.asarray(scores, dtype=np.float64), 0.0)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def antecedent_distribution(h, q: Span, candidates, params: HeadParams) -> np.ndarray:
    """Probabilities over ``candidates`` followed by the null antecedent."""
    if len(set(candidates)) != len(candidates):
        raise ValueError("duplicate candidates")
    scores = [pair_score(h, c, q, params) for c in candidates]
    return softmax_with_null(scores)


# -- vectorised document scoring ---------------------------------------------

class TokenFeatures:
    """Per-token start/end projections for one document."""

    def __init__(self, h: np.ndarray, params: HeadParams):
        _check_dims(h, params)
        self.h = h
        self.z_ms = h @ params.W_s.T + params.b_s
        self.z_me = h @ params.W_e.T + params.b_e
        self.z_as = h @ params.U_s.T + params.c_s
        self.z_ae = h @ params.U_e.T + params.c_e
        self.ms = gelu(self.z_ms)
        self.me = gelu(self.z_me)
        self.as_ = gelu(self.z_as)
        self.ae = gelu(self.z_ae)


def mention_scores(feats: TokenFeatures, starts, ends, params: HeadParams) -> np.ndarray:
    S = feats.ms[starts]
    E = feats.me[ends]
    return S @ params.v_s + E @ params.v_e + np.einsum("np,np->n", S @ params.B_m, E)


def antecedent_matrix(feats: TokenFeatures, starts, ends, params: HeadParams) -> np.ndarray:
    """``f_a[c, q]`` for all pairs of the given spans (rows are candidates)."""
    As, Ae = feats.as_[starts], feats.ae[ends]
    P = params
    return (As @ P.B_ss @ As.T + As @ P.B_se @ Ae.T
            + Ae @ P.B_es @ As.T + Ae @ P.B_ee @ Ae.T)


def pair_matrix(fm: np.ndarray, fa: np.ndarray) -> np.ndarray:
    """``F[c, q]``; only the strict upper triangle (c before q) is meaningful."""
    return fm[:, None] + fm[None, :] + fa


def head_backward(params: HeadParams, feats: TokenFeatures,
                  all_starts, all_ends, g_fm_all,
                  pruned_starts, pruned_ends, g_F):
    """Backpropagate gradients of ``f_m`` over all spans and ``F`` over pruned pairs.

    ``g_F`` is a ``k x k`` matrix over the pruned spans (zeros outside the
    upper triangle). Returns ``(grads, g_h)``.
    """
    P = params
    p = P.proj_dim
    T = feats.h.shape[0]
    g = {name: np.zeros_like(arr) for name, arr in P.arrays().items()}
    g_ms = np.zeros((T, p))
    g_me = np.zeros((T, p))
    g_as = np.zeros((T, p))
    g_ae = np.zeros((T, p))

    # F -> f_m over pruned spans and f_a
    g_fm_all = np.array(g_fm_all, dtype=np.float64, copy=True) if g_fm_all is not None else None
    starts_all = np.asarray(all_starts, dtype=np.int64)
    ends_all = np.asarray(all_ends, dtype=np.int64)
    if g_F is not None and len(pruned_starts):
        ps = np.asarray(pruned_starts, dtype=np.int64)
        pe = np.asarray(pruned_ends, dtype=np.int64)
        g_fm_pruned = g_F.sum(axis=1) + g_F.sum(axis=0)
        As, Ae = feats.as_[ps], feats.ae[pe]
        # f_a = As Bss As^T + As Bse Ae^T + Ae Bes As^T + Ae Bee Ae^T
        g["B_ss"] += As.T @ g_F @ As
        g["B_se"] += As.T @ g_F @ Ae
        g["B_es"] += Ae.T @ g_F @ As
        g["B_ee"] += Ae.T @ g_F @ Ae
        g_As = g_F @ (As @ P.B_ss.T + Ae @ P.B_se.T) + g_F.T @ (As @ P.B_ss + Ae @ P.B_es)
        g_Ae = g_F @ (As @ P.B_es.T + Ae @ P.B_ee.T) + g_F.T @ (As @ P.B_se + Ae @ P.B_ee)
        np.add.at(g_as, ps, g_As)
        np.add.at(g_ae, pe, g_Ae)
        # mention-score gradient of the pruned spans
        fm_terms = (ps, pe, g_fm_pruned)
    else:
        fm_terms = None

    def mention_back(starts, ends, gf):
        S = feats.ms[starts]
        E = feats.me[ends]
        g["v_s"] += gf @ S
        g["v_e"] += gf @ E
        g["B_m"] += (S * gf[:, None]).T @ E
        np.add.at(g_ms, starts, gf[:, None] * (P.v_s[None, :] + E @ P.B_m.T))
        np.add.at(g_me, ends, gf[:, None] * (P.v_e[None, :] + S @ P.B_m))

    if g_fm_all is not None and len(starts_all):
        mention_back(starts_all, ends_all, g_fm_all)
    if fm_terms is not None:
        mention_back(*fm_terms)

    # gelu + projections
    g_h = np.zeros_like(feats.h)
    for gz_src, z, W, b in (
        (g_ms, feats.z_ms, "W_s", "b_s"),
        (g_me, feats.z_me, "W_e", "b_e"),
        (g_as, feats.z_as, "U_s", "c_s"),
        (g_ae, feats.z_ae, "U_e", "c_e"),
    ):
        if not gz_src.any():
            continue
        gz = gz_src * gelu_grad(z)
        g[W] += gz.T @ feats.h
        g[b] += gz.sum(axis=0)
        g_h += gz @ getattr(P, W)
    return g, g_h
