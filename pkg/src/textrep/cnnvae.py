"""Convolutional document encoder with a variational latent layer.

The encoder runs valid (no padding) convolutions down the row axis of a
pad_len x dim document matrix, one kernel per configured width, applies the
activation, max-pools each filter to a single feature, and concatenates the
pooled features.  After dropout (train mode only, inverted scaling) two
affine heads produce mu and log-variance; sampling z = mu + eps * sigma and
a two-layer affine decoder (latent -> hidden ReLU -> rows*cols) reconstructs
the input.  Loss = KL(q(z|x) || N(0, I)) + squared-error reconstruction.

The "ae" variant is the plain autoencoder baseline: z = mu deterministically
and only the reconstruction term is optimized.  All gradients are computed
analytically by backpropagation; max-pool gradients route to the argmax
position only.  Arithmetic runs in 32-bit floats by default, with a 64-bit
mode used for gradient verification.
"""

import csv
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConfigError, DomainError, ShapeError, TrainingDivergedError
from .io import dump_json, load_json
from .validation import check_is_fitted, check_random_state

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def reparameterize(mu, sigma, eps):
    """z = mu + eps * sigma, elementwise."""
    mu, sigma, eps = np.asarray(mu), np.asarray(sigma), np.asarray(eps)
    if mu.shape != sigma.shape or mu.shape != eps.shape:
        raise ShapeError("mu, sigma and eps must share one shape")
    return mu + eps * sigma


def kl_divergence(mu, sigma):
    """KL(N(mu, diag sigma^2) || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - log sigma^2)."""
    mu, sigma = np.asarray(mu, dtype=np.float64), np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise DomainError("sigma must be > 0 elementwise")
    return 0.5 * float(np.sum(mu**2 + sigma**2 - 1.0 - 2.0 * np.log(sigma)))


def reconstruction_loss(x, xhat):
    """Half squared error 1/2 sum (x - xhat)^2 over all entries."""
    x, xhat = np.asarray(x), np.asarray(xhat)
    if x.shape != xhat.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {xhat.shape}")
    diff = (x - xhat).astype(np.float64)
    return 0.5 * float(np.sum(diff * diff))


def encoder_forward(x, model, mode="eval", dropout_mask=None, rng=None):
    """Run one document through the encoder; returns (mu, sigma, trace)."""
    x = np.asarray(x)
    if x.shape != (model.input_rows, model.input_cols):
        raise ShapeError(
            f"document matrix shape {x.shape} != {(model.input_rows, model.input_cols)}"
        )
    trace = model._forward(x[None], eps=None, mode=mode, dropout_mask=dropout_mask, rng=rng)
    return trace["mu"][0], trace["sigma"][0], trace


def loss(x, model, eps, mode="eval", dropout_mask=None, rng=None):
    """(total, kl, recon) for one document with a fixed latent noise draw."""
    x = np.asarray(x)
    eps = np.asarray(eps)
    trace = model._forward(x[None], eps[None], mode=mode, dropout_mask=dropout_mask, rng=rng)
    kl, recon = model._loss_parts(trace, x[None])
    total = (kl + recon) if model.variant == "vae" else recon
    return float(total), float(kl), float(recon)


class CnnVae(BaseEstimator, TransformerMixin):
    """CNN encoder + variational (or plain) autoencoder over document matrices.

    fit() consumes an (n_docs, input_rows, input_cols) array and trains with
    minibatch Adam; transform() returns the latent mean vectors, computed in
    eval mode with no sampling, so repeated calls are bit-identical.
    """

    def __init__(
        self,
        variant="vae",
        input_rows=100,
        input_cols=128,
        kernel_widths=(3, 4, 5),
        filters_per_width=42,
        latent_dim=128,
        hidden_dim=256,
        learning_rate=0.001,
        epochs=30,
        dropout_keep=0.5,
        batch_size=32,
        activation="relu",
        dtype="float32",
        random_state=0,
    ):
        self.variant = variant
        self.input_rows = input_rows
        self.input_cols = input_cols
        self.kernel_widths = kernel_widths
        self.filters_per_width = filters_per_width
        self.latent_dim = latent_dim
        self.hidden_dim = hidden_dim
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.dropout_keep = dropout_keep
        self.batch_size = batch_size
        self.activation = activation
        self.dtype = dtype
        self.random_state = random_state

    # -- construction -----------------------------------------------------

    def _check_params(self):
        if self.variant not in ("vae", "ae"):
            raise ConfigError(f"variant must be 'vae' or 'ae', got {self.variant!r}")
        if self.latent_dim < 1 or self.hidden_dim < 1 or self.filters_per_width < 1:
            raise ConfigError("latent_dim, hidden_dim and filters_per_width must be >= 1")
        if not 0 < self.dropout_keep <= 1:
            raise ConfigError(f"dropout_keep must be in (0, 1], got {self.dropout_keep}")
        widths = list(self.kernel_widths)
        if not widths or any(k < 1 or k > self.input_rows for k in widths):
            raise ConfigError(f"kernel widths {widths} must lie in [1, input_rows={self.input_rows}]")
        if self.activation not in ("relu", "identity"):
            raise ConfigError(f"activation must be 'relu' or 'identity', got {self.activation!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be 'float32' or 'float64', got {self.dtype!r}")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("learning_rate > 0, batch_size >= 1 and epochs >= 0 required")

    @property
    def _np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def pooled_dim(self):
        return len(list(self.kernel_widths)) * self.filters_per_width

    def param_names(self):
        names = []
        for k in self.kernel_widths:
            names += [f"conv_w{k}", f"conv_b{k}"]
        names += ["mu_w", "mu_b", "lv_w", "lv_b", "dec_w1", "dec_b1", "dec_w2", "dec_b2"]
        return names

    def initialize(self, rng=None):
        """Draw fresh parameters; fit() calls this before training."""
        self._check_params()
        rng = rng if rng is not None else check_random_state(self.random_state)
        r, c = self.input_rows, self.input_cols
        f, p, latent, hidden = self.filters_per_width, self.pooled_dim, self.latent_dim, self.hidden_dim

        def glorot(fan_in, fan_out, shape):
            a = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-a, a, shape)

        params = {}
        for k in self.kernel_widths:
            params[f"conv_w{k}"] = glorot(k * c, f, (f, k, c))
            params[f"conv_b{k}"] = np.zeros(f)
        params["mu_w"] = glorot(p, latent, (p, latent))
        params["mu_b"] = np.zeros(latent)
        params["lv_w"] = glorot(p, latent, (p, latent))
        params["lv_b"] = np.zeros(latent)
        params["dec_w1"] = glorot(latent, hidden, (latent, hidden))
        params["dec_b1"] = np.zeros(hidden)
        params["dec_w2"] = glorot(hidden, r * c, (hidden, r * c))
        params["dec_b2"] = np.zeros(r * c)
        self.params_ = {name: params[name].astype(self._np_dtype) for name in self.param_names()}
        return self

    # -- forward / backward ----------------------------------------------

    def _forward(self, x, eps, mode, dropout_mask=None, rng=None):
        """Batched forward pass; x is (n, rows, cols).  Returns the trace.

        eps=None leaves z/decoder unset (encoder-only pass).  In train mode
        with dropout_keep < 1 a mask is drawn from rng unless one is given;
        eval mode never applies dropout.
        """
        check_is_fitted(self, "params_")
        dt = self._np_dtype
        x = np.ascontiguousarray(x, dtype=dt)
        if x.ndim != 3 or x.shape[1:] != (self.input_rows, self.input_cols):
            raise ShapeError(
                f"batch shape {x.shape} != (n, {self.input_rows}, {self.input_cols})"
            )
        p = self.params_
        trace = {"x": x, "mode": mode, "conv": {}}
        pooled_parts = []
        for k in self.kernel_widths:
            windows = sliding_window_view(x, (k, self.input_cols), axis=(1, 2))[:, :, 0]
            pre = np.tensordot(windows, p[f"conv_w{k}"], axes=([2, 3], [1, 2]))
            pre = pre + p[f"conv_b{k}"]
            act = np.maximum(pre, 0) if self.activation == "relu" else pre
            arg = np.argmax(act, axis=1)
            pooled = np.take_along_axis(act, arg[:, None, :], axis=1)[:, 0, :]
            trace["conv"][k] = {"windows": windows, "pre": pre, "act": act, "argmax": arg}
            pooled_parts.append(pooled)
        pooled = np.concatenate(pooled_parts, axis=1)
        trace["pooled"] = pooled

        if mode == "train" and self.dropout_keep < 1:
            if dropout_mask is None:
                if rng is None:
                    rng = np.random.default_rng(0)
                dropout_mask = (rng.random(pooled.shape) < self.dropout_keep).astype(dt)
                dropout_mask /= dt(self.dropout_keep)
            h = pooled * dropout_mask
        else:
            dropout_mask = None
            h = pooled
        trace["dropout_mask"] = dropout_mask
        trace["h"] = h

        mu = h @ p["mu_w"] + p["mu_b"]
        logvar = h @ p["lv_w"] + p["lv_b"]
        sigma = np.exp(0.5 * logvar)
        trace.update(mu=mu, logvar=logvar, sigma=sigma)
        if eps is None:
            return trace
        eps = np.asarray(eps, dtype=dt)
        z = mu if self.variant == "ae" else mu + eps * sigma
        h1_pre = z @ p["dec_w1"] + p["dec_b1"]
        h1 = np.maximum(h1_pre, 0)
        xhat = (h1 @ p["dec_w2"] + p["dec_b2"]).reshape(x.shape)
        trace.update(eps=eps, z=z, h1_pre=h1_pre, h1=h1, xhat=xhat)
        return trace

    def _loss_parts(self, trace, x):
        """(kl_sum, recon_sum) over the batch in float64."""
        mu = trace["mu"].astype(np.float64)
        logvar = trace["logvar"].astype(np.float64)
        diff = (trace["xhat"].astype(np.float64) - x.astype(np.float64)).reshape(x.shape[0], -1)
        recon = 0.5 * float(np.sum(diff * diff))
        kl = 0.5 * float(np.sum(mu**2 + np.exp(logvar) - 1.0 - logvar))
        return kl, recon

    def _loss_and_grads(self, x, eps, dropout_mask=None, mode="train", rng=None):
        """Mean-per-document loss and its exact parameter gradients.

        Returns (total, kl, recon, grads) where the means divide by the batch
        size and grads differentiates total (recon-only for the ae variant).
        """
        p = self.params_
        dt = self._np_dtype
        trace = self._forward(x, eps, mode, dropout_mask=dropout_mask, rng=rng)
        x = trace["x"]
        n = x.shape[0]
        kl_sum, recon_sum = self._loss_parts(trace, x)
        scale = dt(1.0 / n)

        grads = {}
        # decoder
        g_xhat = (trace["xhat"] - x).reshape(n, -1) * scale
        grads["dec_w2"] = trace["h1"].T @ g_xhat
        grads["dec_b2"] = g_xhat.sum(axis=0)
        g_h1 = g_xhat @ p["dec_w2"].T
        g_h1 = np.where(trace["h1_pre"] > 0, g_h1, dt(0))
        grads["dec_w1"] = trace["z"].T @ g_h1
        grads["dec_b1"] = g_h1.sum(axis=0)
        g_z = g_h1 @ p["dec_w1"].T

        # latent heads; KL gradients enter here for the vae variant
        if self.variant == "vae":
            g_mu = g_z + trace["mu"] * scale
            sig2 = np.exp(trace["logvar"])
            g_logvar = g_z * trace["eps"] * trace["sigma"] * dt(0.5) + (sig2 - dt(1)) * (dt(0.5) * scale)
        else:
            g_mu = g_z
            g_logvar = np.zeros_like(g_z)
        h = trace["h"]
        grads["mu_w"] = h.T @ g_mu
        grads["mu_b"] = g_mu.sum(axis=0)
        grads["lv_w"] = h.T @ g_logvar
        grads["lv_b"] = g_logvar.sum(axis=0)
        g_h = g_mu @ p["mu_w"].T + g_logvar @ p["lv_w"].T

        if trace["dropout_mask"] is not None:
            g_pooled = g_h * trace["dropout_mask"]
        else:
            g_pooled = g_h

        # split pooled gradient back to each kernel width, route through argmax
        offset = 0
        for k in self.kernel_widths:
            f = self.filters_per_width
            part = g_pooled[:, offset : offset + f]
            offset += f
            conv = trace["conv"][k]
            g_act = np.zeros_like(conv["act"])
            np.put_along_axis(g_act, conv["argmax"][:, None, :], part[:, None, :], axis=1)
            if self.activation == "relu":
                g_pre = np.where(conv["pre"] > 0, g_act, dt(0))
            else:
                g_pre = g_act
            grads[f"conv_w{k}"] = np.tensordot(g_pre, conv["windows"], axes=([0, 1], [0, 1]))
            grads[f"conv_b{k}"] = g_pre.sum(axis=(0, 1))

        recon = recon_sum / n
        kl = kl_sum / n
        total = (kl + recon) if self.variant == "vae" else recon
        return total, kl, recon, grads

    # -- training ---------------------------------------------------------

    def fit(self, X, y=None, validation=None):
        """Train on an (n_docs, rows, cols) array of document matrices.

        validation, if given, is a second such array; its eval-mode loss
        (latent noise fixed at zero) is logged per epoch.
        """
        self._check_params()
        X = np.asarray(X)
        if X.ndim != 3 or X.shape[0] == 0:
            raise ShapeError("X must be a nonempty (n_docs, rows, cols) array")
        rng = check_random_state(self.random_state)
        self.initialize(rng)
        dt = self._np_dtype
        X = X.astype(dt)
        n = X.shape[0]

        adam_m = {name: np.zeros_like(v) for name, v in self.params_.items()}
        adam_v = {name: np.zeros_like(v) for name, v in self.params_.items()}
        step = 0
        self.log_ = []
        for epoch in range(1, self.epochs + 1):
            order = rng.permutation(n)
            kl_total = recon_total = 0.0
            for start in range(0, n, self.batch_size):
                batch = X[order[start : start + self.batch_size]]
                b = batch.shape[0]
                if self.variant == "vae":
                    eps = rng.standard_normal((b, self.latent_dim)).astype(dt)
                else:
                    eps = np.zeros((b, self.latent_dim), dtype=dt)
                if self.dropout_keep < 1:
                    mask = (rng.random((b, self.pooled_dim)) < self.dropout_keep).astype(dt)
                    mask /= dt(self.dropout_keep)
                else:
                    mask = None
                total, kl, recon, grads = self._loss_and_grads(batch, eps, dropout_mask=mask)
                if not np.isfinite(total):
                    raise TrainingDivergedError(epoch)
                kl_total += kl * b
                recon_total += recon * b
                step += 1
                lr_t = self.learning_rate * np.sqrt(1 - ADAM_BETA2**step) / (1 - ADAM_BETA1**step)
                for name, g in grads.items():
                    m = adam_m[name]
                    v = adam_v[name]
                    m += (1 - ADAM_BETA1) * (g - m)
                    v += (1 - ADAM_BETA2) * (g * g - v)
                    self.params_[name] -= dt(lr_t) * m / (np.sqrt(v) + dt(ADAM_EPS))
            row = {
                "epoch": epoch,
                "kl": kl_total / n,
                "recon": recon_total / n,
            }
            row["total"] = (row["kl"] + row["recon"]) if self.variant == "vae" else row["recon"]
            row["validation_total"] = (
                self.evaluate_loss(validation) if validation is not None else None
            )
            self.log_.append(row)
        return self

    def evaluate_loss(self, X):
        """Mean per-document eval-mode loss with latent noise fixed at zero."""
        check_is_fitted(self, "params_")
        X = np.asarray(X, dtype=self._np_dtype)
        total = 0.0
        for start in range(0, X.shape[0], max(1, self.batch_size)):
            batch = X[start : start + self.batch_size]
            eps = np.zeros((batch.shape[0], self.latent_dim), dtype=self._np_dtype)
            trace = self._forward(batch, eps, mode="eval")
            kl, recon = self._loss_parts(trace, trace["x"])
            total += (kl + recon) if self.variant == "vae" else recon
        return total / X.shape[0]

    def transform(self, X):
        """Latent mean vectors, eval mode: deterministic document encodings."""
        check_is_fitted(self, "params_")
        X = np.asarray(X, dtype=self._np_dtype)
        out = []
        for start in range(0, X.shape[0], max(1, self.batch_size)):
            trace = self._forward(X[start : start + self.batch_size], None, mode="eval")
            out.append(trace["mu"])
        return np.concatenate(out, axis=0)

    encode = transform

    def write_training_log(self, path):
        """CSV of per-epoch losses: epoch,total,kl,recon,validation_total."""
        check_is_fitted(self, "log_")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "total", "kl", "recon", "validation_total"])
            for row in self.log_:
                val = row["validation_total"]
                writer.writerow(
                    [
                        row["epoch"],
                        f"{row['total']:.6f}",
                        f"{row['kl']:.6f}",
                        f"{row['recon']:.6f}",
                        "" if val is None else f"{val:.6f}",
                    ]
                )

    # -- checkpoints ------------------------------------------------------

    def save(self, path):
        """JSON sidecar + raw little-endian parameter blob; bit-exact."""
        check_is_fitted(self, "params_")
        path = Path(path)
        code = "<f4" if self.dtype == "float32" else "<f8"
        manifest = []
        offset = 0
        chunks = []
        for name in self.param_names():
            arr = np.ascontiguousarray(self.params_[name], dtype=code)
            manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
            chunk = arr.tobytes()
            chunks.append(chunk)
            offset += len(chunk)
        dump_json({"params": self.get_params(), "manifest": manifest, "total_bytes": offset}, path)
        with open(str(path) + ".blob", "wb") as fh:
            fh.write(b"".join(chunks))

    @classmethod
    def load(cls, path):
        path = Path(path)
        meta = load_json(path)
        params = dict(meta["params"])
        if isinstance(params.get("kernel_widths"), list):
            params["kernel_widths"] = tuple(params["kernel_widths"])
        est = cls(**params)
        est._check_params()
        code = "<f4" if est.dtype == "float32" else "<f8"
        blob = Path(str(path) + ".blob").read_bytes()
        est.params_ = {}
        itemsize = np.dtype(code).itemsize
        for entry in meta["manifest"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            start = entry["offset"]
            arr = np.frombuffer(blob, dtype=code, count=count, offset=start).reshape(shape)
            est.params_[entry["name"]] = arr.astype(est._np_dtype).copy()
        est.log_ = []
        return est


def documents_to_matrices(X, word_vectors, dtype=np.float32):
    """Stack per-token word vectors into (n_docs, pad_len, dim) CNN input.

    X holds pad-encoded id rows; the pad row of word_vectors is zero, so pad
    positions become zero rows automatically.
    """
    X = np.asarray(X)
    vectors = np.asarray(word_vectors)
    return vectors[X].astype(dtype)
