"""Autoencoder/classifier assembly, parameter management, checkpoints.

Encoder: S^2 conv -> ReLU -> [SO(3) conv -> ReLU]... -> invariant pooling
(-> dense to the latent).  Because pooling reads off the degree-0
coefficient, the latent vector of the pure-linear path is exactly rotation
invariant; with grid ReLUs it is invariant up to a discretization error that
shrinks with bandwidth.

Decoder: dense from the latent to the packed spectrum of an SO(3) feature
map (conjugate symmetry imposed by orthogonal projection), SO(3) conv stack
back up the bandwidth schedule, then integration over gamma to land on S^2.

Parameters live in an ordered name -> array dict; complex spectral weights
are re-projected onto the real-signal symmetric subspace after each
optimizer step via `project_params`.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import loss as loss_mod
from . import nn
from .exceptions import CheckpointError, DimensionMismatchError
from .spectral import (
    S2Signal,
    order_mask_so3,
    so3_synthesize_arr,
    so3_synthesize_vjp,
    symmetrize_spectrum,
)

# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelConfig:
    b_in: int = 30
    in_channels: int = 1
    enc_channels: tuple = (20, 40)
    enc_bandwidths: tuple = (12, 6)
    latent_dim: int = 120
    use_latent_dense: bool = True
    dec_channels: tuple = (20, 1)
    dec_bandwidths: tuple = (12, 30)
    use_relu: bool = True

    def __post_init__(self):
        object.__setattr__(self, "enc_channels", tuple(int(c) for c in self.enc_channels))
        object.__setattr__(self, "enc_bandwidths", tuple(int(b) for b in self.enc_bandwidths))
        object.__setattr__(self, "dec_channels", tuple(int(c) for c in self.dec_channels))
        object.__setattr__(self, "dec_bandwidths", tuple(int(b) for b in self.dec_bandwidths))
        if len(self.enc_channels) != len(self.enc_bandwidths) or len(self.enc_channels) < 2:
            raise DimensionMismatchError("encoder needs matching channel/bandwidth tuples (>= 2 layers)")
        if len(self.dec_channels) != len(self.dec_bandwidths) or not self.dec_channels:
            raise DimensionMismatchError("decoder needs matching channel/bandwidth tuples")
        if self.dec_channels[-1] != self.in_channels or self.dec_bandwidths[-1] != self.b_in:
            raise DimensionMismatchError("decoder must end at (in_channels, b_in)")
        if self.latent_dim < 1:
            raise DimensionMismatchError("latent_dim must be >= 1")
        if not self.use_latent_dense and self.latent_dim != self.enc_channels[-1]:
            raise DimensionMismatchError(
                "without the latent dense layer, latent_dim must equal the last encoder channel count"
            )
        if min(self.enc_bandwidths) < 1 or min(self.dec_bandwidths) < 1 or self.b_in < 1:
            raise DimensionMismatchError("bandwidths must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(**d)


def scaled_config(b_in: int, latent_dim: int = 120, channels: tuple = (20, 40), use_relu: bool = True) -> ModelConfig:
    """Paper-shaped schedule rescaled to a smaller input bandwidth."""
    b1 = max(2, round(0.4 * b_in))
    b2 = max(2, round(0.2 * b_in))
    return ModelConfig(
        b_in=b_in,
        enc_channels=tuple(channels),
        enc_bandwidths=(b1, b2),
        latent_dim=latent_dim,
        dec_channels=(channels[0], 1),
        dec_bandwidths=(b1, b_in),
        use_relu=use_relu,
    )


# ---------------------------------------------------------------------------
# packed spectrum <-> real vector (decoder head)
# ---------------------------------------------------------------------------


def _pack_indices(b: int) -> np.ndarray:
    return np.flatnonzero(order_mask_so3(b).ravel())


def n_spectrum_reals(b: int, channels: int) -> int:
    """Length of the real vector parameterizing a (channels, b) block spectrum."""
    return 2 * channels * int(order_mask_so3(b).sum())


def unpack_spectrum(v: np.ndarray, b: int, channels: int) -> np.ndarray:
    """(..., 2*C*n_valid) reals -> (..., C, b, 2b-1, 2b-1) complex (unsymmetrized)."""
    idx = _pack_indices(b)
    M = 2 * b - 1
    lead = v.shape[:-1]
    pairs = v.reshape(lead + (channels, idx.size, 2))
    z = pairs[..., 0] + 1j * pairs[..., 1]
    out = np.zeros(lead + (channels, b * M * M), dtype=np.complex128)
    out[..., idx] = z
    return out.reshape(lead + (channels, b, M, M))


def pack_spectrum_grad(gS: np.ndarray, b: int, channels: int) -> np.ndarray:
    """Adjoint of unpack_spectrum under grad_z = dL/dRe + i dL/dIm."""
    idx = _pack_indices(b)
    M = 2 * b - 1
    lead = gS.shape[:-4]
    flat = gS.reshape(lead + (channels, b * M * M))[..., idx]
    return np.stack([flat.real, flat.imag], axis=-1).reshape(lead + (-1,))


# ---------------------------------------------------------------------------
# the autoencoder
# ---------------------------------------------------------------------------


class Model:
    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray] | None = None, seed: int = 0):
        self.config = config
        self.params = params if params is not None else self._init_params(seed)
        self._validate_params()

    # -- construction ------------------------------------------------------

    def _enc_specs(self):
        cfg = self.config
        chans = (cfg.in_channels,) + cfg.enc_channels
        bws = (cfg.b_in,) + cfg.enc_bandwidths
        return [
            (chans[i], chans[i + 1], min(bws[i], bws[i + 1]), bws[i + 1])
            for i in range(len(cfg.enc_channels))
        ]

    def _dec_specs(self):
        cfg = self.config
        chans = (cfg.enc_channels[-1],) + cfg.dec_channels
        bws = (cfg.enc_bandwidths[-1],) + cfg.dec_bandwidths
        return [
            (chans[i], chans[i + 1], min(bws[i], bws[i + 1]), bws[i + 1])
            for i in range(len(cfg.dec_channels))
        ]

    def _init_params(self, seed: int) -> dict[str, np.ndarray]:
        cfg = self.config
        rng = np.random.default_rng(seed)
        p: dict[str, np.ndarray] = {}
        for i, (c_in, c_out, b_f, _) in enumerate(self._enc_specs()):
            if i == 0:
                layer = nn.init_s2conv(rng, c_out, c_in, b_f)
            else:
                layer = nn.init_so3conv(rng, c_out, c_in, b_f)
            p[f"enc{i}_w"] = layer.weight
            p[f"enc{i}_b"] = layer.bias
        if cfg.use_latent_dense:
            fc = nn.init_dense(rng, cfg.latent_dim, cfg.enc_channels[-1])
            p["enc_fc_W"] = fc.weight
            p["enc_fc_b"] = fc.bias
        head = nn.init_dense(
            rng, n_spectrum_reals(cfg.enc_bandwidths[-1], cfg.enc_channels[-1]), cfg.latent_dim
        )
        p["dec_fc_W"] = head.weight
        p["dec_fc_b"] = head.bias
        for i, (c_in, c_out, b_f, _) in enumerate(self._dec_specs()):
            layer = nn.init_so3conv(rng, c_out, c_in, b_f)
            p[f"dec{i}_w"] = layer.weight
            p[f"dec{i}_b"] = layer.bias
        return p

    def _validate_params(self) -> None:
        ref = self._init_params(seed=0)
        if list(ref) != list(self.params):
            raise CheckpointError(f"parameter names {list(self.params)} do not match config")
        for name, arr in ref.items():
            if self.params[name].shape != arr.shape or self.params[name].dtype != arr.dtype:
                raise CheckpointError(
                    f"parameter {name}: shape/dtype {self.params[name].shape}/{self.params[name].dtype} "
                    f"conflicts with config ({arr.shape}/{arr.dtype})"
                )

    def project_params(self) -> None:
        """Re-impose the real-signal conjugate symmetry on spectral filters."""
        for name, arr in self.params.items():
            if np.iscomplexobj(arr):
                mats = 2 if arr.ndim == 5 else 1
                self.params[name] = symmetrize_spectrum(arr, mats=mats)

    # -- forward / backward ------------------------------------------------

    def _conv_params(self, prefix: str, i: int, kind: str):
        w = self.params[f"{prefix}{i}_w"]
        b = self.params[f"{prefix}{i}_b"]
        return (nn.S2ConvParams if kind == "s2" else nn.SO3ConvParams)(weight=w, bias=b)

    def encode_arr(self, x: np.ndarray, record: bool = False):
        cfg = self.config
        tape = []
        h = np.asarray(x, dtype=np.float64)
        for i, (_, _, _, b_out) in enumerate(self._enc_specs()):
            if i == 0:
                h, ctx = nn.s2conv_forward(h, self._conv_params("enc", i, "s2"), b_out)
            else:
                h, ctx = nn.so3conv_forward(h, self._conv_params("enc", i, "so3"), b_out)
            tape.append(("conv", f"enc{i}", ctx))
            if cfg.use_relu:
                h, mask = nn.relu_forward(h)
                tape.append(("relu", None, mask))
        z, pctx = nn.invariant_pool_forward(h)
        tape.append(("pool", None, pctx))
        if cfg.use_latent_dense:
            z, dctx = nn.dense_forward(
                z, nn.DenseParams(self.params["enc_fc_W"], self.params["enc_fc_b"])
            )
            tape.append(("dense", "enc_fc", dctx))
        return (z, tape) if record else z

    def encode_backward(self, gz: np.ndarray, tape, grads: dict[str, np.ndarray]) -> np.ndarray:
        g = gz
        for kind, name, ctx in reversed(tape):
            if kind == "dense":
                g, gW, gb = nn.dense_backward(g, ctx)
                grads[f"{name}_W"] = gW
                grads[f"{name}_b"] = gb
            elif kind == "pool":
                g = nn.invariant_pool_backward(g, ctx)
            elif kind == "relu":
                g = nn.relu_backward(g, ctx)
            elif kind == "conv":
                backward = nn.s2conv_backward if name == "enc0" else nn.so3conv_backward
                g, gW, gb = backward(g, ctx)
                grads[f"{name}_w"] = gW
                grads[f"{name}_b"] = gb
            else:
                raise RuntimeError(f"unknown tape entry {kind!r}")
        return g

    def decode_arr(self, z: np.ndarray, record: bool = False):
        cfg = self.config
        tape = []
        b0 = cfg.enc_bandwidths[-1]
        c0 = cfg.enc_channels[-1]
        v, dctx = nn.dense_forward(z, nn.DenseParams(self.params["dec_fc_W"], self.params["dec_fc_b"]))
        tape.append(("dense", "dec_fc", dctx))
        S = symmetrize_spectrum(unpack_spectrum(v, b0, c0), mats=2)
        h = so3_synthesize_arr(S)
        tape.append(("head", (b0, c0), None))
        specs = self._dec_specs()
        for i, (_, _, _, b_out) in enumerate(specs):
            h, ctx = nn.so3conv_forward(h, self._conv_params("dec", i, "so3"), b_out)
            tape.append(("conv", f"dec{i}", ctx))
            if cfg.use_relu and i < len(specs) - 1:
                h, mask = nn.relu_forward(h)
                tape.append(("relu", None, mask))
        y, gctx = nn.gamma_integrate_forward(h)
        tape.append(("gamma", None, gctx))
        return (y, tape) if record else y

    def decode_backward(self, gy: np.ndarray, tape, grads: dict[str, np.ndarray]) -> np.ndarray:
        g = gy
        for kind, name, ctx in reversed(tape):
            if kind == "gamma":
                g = nn.gamma_integrate_backward(g, ctx)
            elif kind == "relu":
                g = nn.relu_backward(g, ctx)
            elif kind == "conv":
                g, gW, gb = nn.so3conv_backward(g, ctx)
                grads[f"{name}_w"] = gW
                grads[f"{name}_b"] = gb
            elif kind == "head":
                b0, c0 = name
                gS = symmetrize_spectrum(so3_synthesize_vjp(g), mats=2)
                g = pack_spectrum_grad(gS, b0, c0)
            elif kind == "dense":
                g, gW, gb = nn.dense_backward(g, ctx)
                grads[f"{name}_W"] = gW
                grads[f"{name}_b"] = gb
            else:
                raise RuntimeError(f"unknown tape entry {kind!r}")
        return g

    def forward_loss(self, x: np.ndarray, loss_kind: str = "rotinv", b_corr: int | None = None):
        """Mean loss over the batch plus gradients for every parameter.

        Returns (loss, grads, extras) with extras carrying the reconstruction
        and, for the invariant loss, the per-sample aligning rotations.
        """
        x = np.asarray(x, dtype=np.float64)
        z, enc_tape = self.encode_arr(x, record=True)
        y, dec_tape = self.decode_arr(z, record=True)
        if loss_kind == "l2":
            losses, gy = loss_mod.l2_loss_arr(x, y)
            rots = None
        elif loss_kind == "rotinv":
            losses, gy, rots = loss_mod.rotinv_loss_arr(x, y, b_corr)
        else:
            raise ValueError(f"unknown loss kind {loss_kind!r}")
        n = x.shape[0]
        grads: dict[str, np.ndarray] = {}
        gz = self.decode_backward(gy / n, dec_tape, grads)
        self.encode_backward(gz, enc_tape, grads)
        extras = {"recon": y, "rotations": rots, "losses": losses}
        return float(losses.mean()), grads, extras

    # -- spec-facing single-sample API --------------------------------------

    def encode(self, f: S2Signal) -> np.ndarray:
        if f.b != self.config.b_in or f.channels != self.config.in_channels:
            raise DimensionMismatchError(
                f"model expects (C={self.config.in_channels}, b={self.config.b_in}), "
                f"got (C={f.channels}, b={f.b})"
            )
        return self.encode_arr(f.values[None])[0]

    def decode(self, z: np.ndarray) -> S2Signal:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.config.latent_dim,):
            raise DimensionMismatchError(f"latent must have shape ({self.config.latent_dim},)")
        y = self.decode_arr(z[None])[0]
        return S2Signal(values=y, b=self.config.b_in)


# ---------------------------------------------------------------------------
# supervised classifier sharing the encoder trunk
# ---------------------------------------------------------------------------


class Classifier:
    def __init__(self, config: ModelConfig, n_classes: int = 10,
                 params: dict[str, np.ndarray] | None = None, seed: int = 0):
        self.config = config
        self.n_classes = n_classes
        self._trunk = Model(config, seed=seed)  # reuse encoder init/shapes
        if params is None:
            rng = np.random.default_rng(seed + 1)
            head = nn.init_dense(rng, n_classes, config.enc_channels[-1])
            params = {
                k: v for k, v in self._trunk.params.items() if k.startswith("enc") and "fc" not in k
            }
            params["head_W"] = head.weight
            params["head_b"] = head.bias
        self.params = params
        self._trunk.params.update({k: v for k, v in params.items() if k.startswith("enc")})

    def _sync_trunk(self):
        for k in self.params:
            if k.startswith("enc"):
                self._trunk.params[k] = self.params[k]

    def logits_arr(self, x: np.ndarray, record: bool = False):
        self._sync_trunk()
        cfg = self.config
        tape = []
        h = np.asarray(x, dtype=np.float64)
        for i, (_, _, _, b_out) in enumerate(self._trunk._enc_specs()):
            if i == 0:
                h, ctx = nn.s2conv_forward(h, self._trunk._conv_params("enc", i, "s2"), b_out)
            else:
                h, ctx = nn.so3conv_forward(h, self._trunk._conv_params("enc", i, "so3"), b_out)
            tape.append(("conv", f"enc{i}", ctx))
            if cfg.use_relu:
                h, mask = nn.relu_forward(h)
                tape.append(("relu", None, mask))
        feats, pctx = nn.invariant_pool_forward(h)
        tape.append(("pool", None, pctx))
        logits, dctx = nn.dense_forward(feats, nn.DenseParams(self.params["head_W"], self.params["head_b"]))
        tape.append(("dense", "head", dctx))
        return (logits, tape) if record else logits

    def forward_loss(self, x: np.ndarray, labels: np.ndarray):
        logits, tape = self.logits_arr(x, record=True)
        losses, glogits = loss_mod.softmax_cross_entropy(logits, labels)
        grads: dict[str, np.ndarray] = {}
        g = glogits / x.shape[0]
        for kind, name, ctx in reversed(tape):
            if kind == "dense":
                g, gW, gb = nn.dense_backward(g, ctx)
                grads[f"{name}_W"] = gW
                grads[f"{name}_b"] = gb
            elif kind == "pool":
                g = nn.invariant_pool_backward(g, ctx)
            elif kind == "relu":
                g = nn.relu_backward(g, ctx)
            elif kind == "conv":
                backward = nn.s2conv_backward if name == "enc0" else nn.so3conv_backward
                g, gW, gb = backward(g, ctx)
                grads[f"{name}_w"] = gW
                grads[f"{name}_b"] = gb
        return float(losses.mean()), grads, {"logits": logits}

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits_arr(x), axis=-1)

    def project_params(self) -> None:
        for name, arr in self.params.items():
            if np.iscomplexobj(arr):
                mats = 2 if arr.ndim == 5 else 1
                self.params[name] = symmetrize_spectrum(arr, mats=mats)


def build_classifier(config: ModelConfig, n_classes: int = 10, seed: int = 0) -> Classifier:
    return Classifier(config, n_classes=n_classes, seed=seed)


# ---------------------------------------------------------------------------
# checkpoints
#
# layout: 8-byte magic, uint32 version, uint64 metadata length, UTF-8
# metadata ("key=value" lines: kind, config JSON, step, seed, one "array="
# line per tensor in order), then each array's raw little-endian bytes.
# ---------------------------------------------------------------------------

MAGIC = b"SPHAECP1"
VERSION = 1
_DTYPES = {"float64": "<f8", "complex128": "<c16"}


def _meta_lines(kind: str, config: ModelConfig, arrays: dict[str, np.ndarray],
                step: int, seed: int, n_classes: int | None) -> str:
    lines = [
        f"kind={kind}",
        "config=" + json.dumps(config.to_dict(), sort_keys=True),
        f"step={step}",
        f"seed={seed}",
    ]
    if n_classes is not None:
        lines.append(f"n_classes={n_classes}")
    for name, arr in arrays.items():
        shape = ",".join(str(s) for s in arr.shape)
        lines.append(f"array={name}:{arr.dtype.name}:{shape}")
    return "\n".join(lines) + "\n"


def save_checkpoint(path, model, opt_state=None, step: int = 0, seed: int = 0) -> None:
    kind = "classifier" if isinstance(model, Classifier) else "autoencoder"
    arrays = dict(model.params)
    if opt_state is not None:
        for name, arr in opt_state.m.items():
            arrays[f"adam_m.{name}"] = arr
        for name, arr in opt_state.v.items():
            arrays[f"adam_v.{name}"] = arr
        arrays["adam_t"] = np.array([float(opt_state.t)])
    n_classes = model.n_classes if kind == "classifier" else None
    meta = _meta_lines(kind, model.config, arrays, step, seed, n_classes).encode()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<Q", len(meta)))
    buf.write(meta)
    for name, arr in arrays.items():
        if arr.dtype.name not in _DTYPES:
            raise CheckpointError(f"array {name} has unsupported dtype {arr.dtype}")
        buf.write(np.ascontiguousarray(arr).astype(_DTYPES[arr.dtype.name]).tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


@dataclass
class Checkpoint:
    """Parsed checkpoint: format version, config, tensors, optimizer state."""

    version: int
    kind: str  # "autoencoder" | "classifier"
    config: ModelConfig
    params: dict
    opt_state: object | None
    step: int
    seed: int
    n_classes: int | None = None

    def restore_model(self):
        if self.kind == "classifier":
            return Classifier(self.config, n_classes=self.n_classes, params=self.params)
        return Model(self.config, params=self.params)


def load_checkpoint(path, expect_config: ModelConfig | None = None) -> Checkpoint:
    """Parse and validate a checkpoint file."""
    from .train import AdamState  # deferred: train imports model

    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 12 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<I", raw, off)
    off += 4
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    (meta_len,) = struct.unpack_from("<Q", raw, off)
    off += 8
    if off + meta_len > len(raw):
        raise CheckpointError("truncated checkpoint (metadata)")
    meta = raw[off : off + meta_len].decode()
    off += meta_len
    fields: dict[str, str] = {}
    array_decls: list[tuple[str, str, tuple[int, ...]]] = []
    for line in meta.splitlines():
        key, _, val = line.partition("=")
        if key == "array":
            name, dtype, shape_s = val.split(":")
            shape = tuple(int(s) for s in shape_s.split(",")) if shape_s else ()
            array_decls.append((name, dtype, shape))
        else:
            fields[key] = val
    config = ModelConfig.from_dict(json.loads(fields["config"]))
    if expect_config is not None and config != expect_config:
        raise CheckpointError("checkpoint config conflicts with the expected config")
    arrays: dict[str, np.ndarray] = {}
    for name, dtype, shape in array_decls:
        if dtype not in _DTYPES:
            raise CheckpointError(f"array {name}: unsupported dtype {dtype}")
        nbytes = int(np.prod(shape, dtype=np.int64)) * np.dtype(_DTYPES[dtype]).itemsize
        if off + nbytes > len(raw):
            raise CheckpointError(f"truncated checkpoint (array {name})")
        arrays[name] = (
            np.frombuffer(raw[off : off + nbytes], dtype=_DTYPES[dtype]).reshape(shape).copy()
        )
        off += nbytes
    if off != len(raw):
        raise CheckpointError(f"{len(raw) - off} trailing bytes after declared arrays")
    params = {k: v for k, v in arrays.items() if not k.startswith("adam_")}
    opt_state = None
    if "adam_t" in arrays:
        m = {k[len("adam_m.") :]: v for k, v in arrays.items() if k.startswith("adam_m.")}
        v = {k[len("adam_v.") :]: v for k, v in arrays.items() if k.startswith("adam_v.")}
        opt_state = AdamState(m=m, v=v, t=int(arrays["adam_t"][0]))
    ckpt = Checkpoint(
        version=version,
        kind=fields["kind"],
        config=config,
        params=params,
        opt_state=opt_state,
        step=int(fields["step"]),
        seed=int(fields["seed"]),
        n_classes=int(fields["n_classes"]) if "n_classes" in fields else None,
    )
    ckpt.restore_model()  # validates parameter names/shapes against the config
    return ckpt
