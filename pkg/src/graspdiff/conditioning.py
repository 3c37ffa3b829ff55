"""Condition pathway: per-frame shape/motion/identity tokens -> features.

Each frame contributes three tokens (object shape from the flattened BPS
deltas, object motion, human identity). Tokens get an additive sinusoidal
part encoding (which of the three streams) followed by an additive frame
encoding, and the 3T-token sequence is encoded by a self-attention stack.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .nn import Mlp, ParamStore, TransformerEncoder, sinusoidal_encoding

N_PARTS = 3  # shape, motion, identity


class ConditionEncoder:
    def __init__(self, store: ParamStore, rng: np.random.Generator,
                 width: int = 256, heads: int = 4, ffn: int = 512, depth: int = 8,
                 shape_dim: int = 3072, motion_dim: int = 12, identity_dim: int = 4,
                 name: str = "cond"):
        self.width = width
        self.shape_dim = shape_dim
        self.motion_dim = motion_dim
        self.identity_dim = identity_dim
        self.embed_shape = Mlp(store, f"{name}.embed_shape", shape_dim, width, width, rng)
        self.embed_motion = Mlp(store, f"{name}.embed_motion", motion_dim, width, width, rng)
        self.embed_identity = Mlp(store, f"{name}.embed_identity", identity_dim, width, width, rng)
        self.encoder = TransformerEncoder(store, f"{name}.encoder", width, heads, ffn, depth, rng)

    # -- token construction --------------------------------------------------

    def embed(self, shape_feat, motion_feat, identity_feat):
        """Three MLP embeddings -> (B, T, 3, width) raw tokens (no PE yet)."""
        shape_feat = np.asarray(shape_feat)
        motion_feat = np.asarray(motion_feat)
        identity_feat = np.asarray(identity_feat)
        if shape_feat.shape[-1] != self.shape_dim:
            raise ShapeError(f"shape feature dim {shape_feat.shape[-1]} != {self.shape_dim}")
        if motion_feat.shape[-1] != self.motion_dim:
            raise ShapeError(f"motion feature dim {motion_feat.shape[-1]} != {self.motion_dim}")
        if identity_feat.shape[-1] != self.identity_dim:
            raise ShapeError(f"identity feature dim {identity_feat.shape[-1]} != {self.identity_dim}")
        B, T = shape_feat.shape[:2]
        tok_v, cv = self.embed_shape.forward(shape_feat)
        tok_w, cw = self.embed_motion.forward(motion_feat)
        ident = np.broadcast_to(identity_feat[:, None, :], (B, T, self.identity_dim))
        tok_s, cs = self.embed_identity.forward(np.ascontiguousarray(ident))
        tokens = np.stack([tok_v, tok_w, tok_s], axis=2)  # (B, T, 3, width)
        return tokens, (cv, cw, cs, B, T)

    def embed_backward(self, d_tokens, cache):
        cv, cw, cs, B, T = cache
        d_shape = self.embed_shape.backward(d_tokens[:, :, 0], cv)
        d_motion = self.embed_motion.backward(d_tokens[:, :, 1], cw)
        d_ident = self.embed_identity.backward(d_tokens[:, :, 2], cs)
        return d_shape, d_motion, d_ident.sum(axis=1)

    def positional_encode(self, tokens: np.ndarray) -> np.ndarray:
        """Additive sinusoidal encodings: part index first, then frame index."""
        B, T, P, D = tokens.shape
        if P != N_PARTS:
            raise ShapeError(f"expected {N_PARTS} parts, got {P}")
        pe_part = sinusoidal_encoding(np.arange(P), D)          # (3, D)
        pe_frame = sinusoidal_encoding(np.arange(T), D)         # (T, D)
        return tokens + pe_part[None, None] + pe_frame[None, :, None]

    # -- full pathway ---------------------------------------------------------

    def forward(self, shape_feat, motion_feat, identity_feat, capture=None):
        """Raw conditions -> encoded features c, shape (B, 3T, width)."""
        tokens, ec = self.embed(shape_feat, motion_feat, identity_feat)
        raw = self.positional_encode(tokens)
        B, T = raw.shape[:2]
        seq = raw.reshape(B, T * N_PARTS, self.width)
        c, enc_cache = self.encoder.forward(seq, capture)
        return c, (ec, enc_cache, B, T)

    def backward(self, d_c, cache):
        ec, enc_cache, B, T = cache
        d_seq = self.encoder.backward(d_c, enc_cache)
        d_tokens = d_seq.reshape(B, T, N_PARTS, self.width)
        return self.embed_backward(d_tokens, ec)
