"""A miniature DiT-style video denoiser used as the reference capture target.

This is not a trained model: weights are seeded random projections and the
"denoising" loop just iterates attention blocks over a latent grid.  What it
shares with the real thing is the part the hook cares about: per-frame
multi-head self-attention over latent positions, cross-attention from latent
positions to prompt tokens with an additive bias hook on the pre-softmax
scores, a step loop, and a tokenizer.  Runs are deterministic per seed.
"""

import numpy as np

BOS = "<s>"


def tokenize(prompt):
    return [BOS] + prompt.lower().split()


class ToyVideoDiT:
    """Deterministic numpy stand-in for a diffusion-transformer video model.

    guidance_fn, when set, is called per cross-attention site as
    ``guidance_fn(scores, step, layer, frame)`` with the [N, L] pre-softmax
    score matrix and must return the matrix to softmax.
    """

    def __init__(self, grid_h=8, grid_w=8, frames=2, heads=2, layers=4,
                 steps=12, dim=32, seed=0):
        self.grid_h = grid_h
        self.grid_w = grid_w
        self.frames = frames
        self.heads = heads
        self.layers = layers
        self.steps = steps
        self.dim = dim
        self.seed = seed
        self.head_dim = dim // heads
        if dim % heads:
            raise ValueError("dim must divide evenly into heads")
        rng = np.random.Generator(np.random.Philox(seed))
        scale = 1.0 / np.sqrt(dim)
        shape = (layers, heads, dim, self.head_dim)
        self.w_sq = rng.normal(0, scale, shape)
        self.w_sk = rng.normal(0, scale, shape)
        self.w_sv = rng.normal(0, scale, shape)
        self.w_cq = rng.normal(0, scale, shape)
        self.w_ck = rng.normal(0, scale, shape)
        self.w_cv = rng.normal(0, scale, shape)
        self.w_out = rng.normal(0, scale, (layers, heads, self.head_dim, dim))
        self.guidance_fn = None

    # --- embeddings ----------------------------------------------------------

    def _token_embeddings(self, tokens):
        # stable per-token embeddings derived from a hash-seeded stream
        vecs = []
        for tok in tokens:
            h = np.uint64(2166136261)
            for ch in tok.encode("utf-8"):
                h = np.uint64((int(h) ^ ch) * 16777619 & 0xFFFFFFFFFFFFFFFF)
            trng = np.random.Generator(np.random.Philox(int(h)))
            vecs.append(trng.normal(0, 1.0, self.dim))
        return np.stack(vecs)

    def _init_latent(self, rng):
        n = self.grid_h * self.grid_w
        return rng.normal(0, 1.0, (self.frames, n, self.dim))

    @staticmethod
    def _softmax(x):
        e = np.exp(x - x.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)

    @staticmethod
    def _rms_normalize(x):
        return x / np.sqrt((x * x).mean(axis=-1, keepdims=True) + 1e-6)

    # --- forward -------------------------------------------------------------

    def run(self, prompt, stop_after_step=None, capture_layer=None,
            capture_step=None, record_cross=False):
        """Iterate the denoising loop.

        Returns (final latent, capture dict).  When ``capture_layer`` and
        ``capture_step`` are set, the capture dict holds the self/cross/
        pre-softmax tensors of that site; ``record_cross`` additionally logs
        every (step, layer) post-softmax cross attention and its pre-softmax
        input (small models only).
        """
        tokens = tokenize(prompt)
        text = self._token_embeddings(tokens)
        rng = np.random.Generator(np.random.Philox(self.seed + 1))
        x = self._init_latent(rng)
        n = self.grid_h * self.grid_w
        length = len(tokens)
        capture = {"tokens": tokens}
        sqrt_d = np.sqrt(self.head_dim)
        for t in range(self.steps):
            for layer in range(self.layers):
                grab = t == capture_step and layer == capture_layer
                if grab:
                    capture["self"] = np.zeros(
                        (self.frames, self.heads, n, n), dtype=np.float32)
                    capture["cross"] = np.zeros(
                        (self.frames, self.heads, n, length), dtype=np.float32)
                    capture["pre"] = np.zeros(
                        (self.frames, self.heads, n, length), dtype=np.float32)
                for f in range(self.frames):
                    update = np.zeros((n, self.dim))
                    for h in range(self.heads):
                        q = x[f] @ self.w_sq[layer, h]
                        k = x[f] @ self.w_sk[layer, h]
                        v = x[f] @ self.w_sv[layer, h]
                        attn = self._softmax(q @ k.T / sqrt_d)
                        if grab:
                            capture["self"][f, h] = attn
                        update += (attn @ v) @ self.w_out[layer, h]
                    x[f] = self._rms_normalize(x[f] + 0.1 * update)
                    update = np.zeros((n, self.dim))
                    for h in range(self.heads):
                        q = x[f] @ self.w_cq[layer, h]
                        k = text @ self.w_ck[layer, h]
                        v = text @ self.w_cv[layer, h]
                        scores = q @ k.T / sqrt_d
                        if grab:
                            capture["pre"][f, h] = scores
                        if self.guidance_fn is not None:
                            scores = self.guidance_fn(scores, t, layer, f)
                        attn = self._softmax(scores)
                        if grab:
                            capture["cross"][f, h] = attn
                        if record_cross:
                            capture.setdefault("trace", {})[(t, layer, f, h)] = (
                                scores.copy(), attn.copy())
                        update += (attn @ v) @ self.w_out[layer, h]
                    x[f] = self._rms_normalize(x[f] + 0.1 * update)
            if stop_after_step is not None and t >= stop_after_step:
                return x, capture
        return x, capture
