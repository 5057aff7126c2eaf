"""Model stacks: the two domain encoders and decoders, the latent
transmitter, the multi-task regressor, the small WGAN critic, and
per-block freeze bookkeeping for gradual unfreezing.

Architecture defaults follow the reference configuration: 128-d latent
code, [512, 256, 128] encoder widths with SELU + layer norm + dropout in
the middle and a layer-normed last block, mirrored decoder with a linear
output, a two-layer transmitter, and [128, 128] shared regressor layers
with [64, 16, 1] sigmoid heads per task.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .layers import DenseBlock, GaussianHead, reparameterize
from .tensor import (
    Rng,
    Tensor,
    add,
    affine,
    concat_cols,
    matmul,
    mul,
    ravel,
    scale_cols,
    square,
    tanh,
    transpose,
)

logger = logging.getLogger("cleit")


@dataclass
class Architecture:
    """Widths and regularization knobs shared by every stack."""

    z_dim: int = 128
    encoder_widths: tuple[int, ...] = (512, 256, 128)
    decoder_widths: tuple[int, ...] = (128, 256, 512)
    transmitter_widths: tuple[int, ...] = (128, 128)
    regressor_shared: tuple[int, ...] = (128, 128)
    regressor_head: tuple[int, ...] = (64, 16, 1)
    dropout: float = 0.1
    ln_eps: float = 1e-5

    def validate(self) -> "Architecture":
        for name in (
            "encoder_widths",
            "decoder_widths",
            "transmitter_widths",
            "regressor_shared",
            "regressor_head",
        ):
            widths = getattr(self, name)
            if not widths or any(w <= 0 for w in widths):
                raise ConfigError(f"{name} must be positive, got {widths}")
        if self.z_dim <= 0:
            raise ConfigError("z_dim must be positive")
        if self.regressor_head[-1] != 1:
            raise ConfigError("per-task heads must end in a single output unit")
        return self


class EncoderStack:
    """Feature encoder ending in a Gaussian head over the latent code."""

    def __init__(self, d_in: int, arch: Architecture, rng: Rng, name: str, dtype=np.float32):
        if d_in <= 0:
            raise ConfigError("encoder input width must be positive")
        self.d_in = d_in
        self.name = name
        self.arch = arch
        widths = list(arch.encoder_widths)
        self.blocks: list[DenseBlock] = []
        prev = d_in
        for i, w in enumerate(widths):
            last = i == len(widths) - 1
            self.blocks.append(
                DenseBlock(
                    prev,
                    w,
                    rng.derive(name, "block", i),
                    activation="linear" if last else "selu",
                    has_layer_norm=True,
                    dropout_p=0.0 if last else arch.dropout,
                    name=f"{name}.block{i}",
                    dtype=dtype,
                    ln_eps=arch.ln_eps,
                )
            )
            prev = w
        self.head = GaussianHead(prev, arch.z_dim, rng.derive(name, "head"), name=f"{name}.head", dtype=dtype)

    def parameters(self) -> list[Tensor]:
        ps = [p for blk in self.blocks for p in blk.parameters()]
        return ps + self.head.parameters()

    def encode(
        self, x: Tensor, mode: str = "train", rng: Rng | None = None
    ) -> tuple[Tensor, Tensor, Tensor]:
        """Returns (z, mu, logvar); z is a reparameterized sample in train
        mode and the deterministic mean in eval mode."""
        if x.data.ndim != 2 or x.shape[1] != self.d_in:
            raise DimensionError(f"{self.name}: input width {x.shape} != {self.d_in}")
        h = x
        for blk in self.blocks:
            h = blk.forward(h, mode=mode, rng=rng)
        mu, logvar = self.head.forward(h)
        z = reparameterize(mu, logvar, rng=rng) if mode == "train" else mu
        return z, mu, logvar

    def freeze_groups(self) -> list[tuple[str, list[Tensor]]]:
        """Input-to-output block groups; the Gaussian head belongs to the
        last block for unfreezing purposes."""
        groups = []
        for i, blk in enumerate(self.blocks):
            params = blk.parameters()
            if i == len(self.blocks) - 1:
                params = params + self.head.parameters()
            groups.append((f"{self.name}.block{i}", params))
        return groups

    def topology(self) -> dict:
        return {
            "kind": "encoder",
            "d_in": self.d_in,
            "widths": list(self.arch.encoder_widths),
            "z_dim": self.arch.z_dim,
            "dropout": self.arch.dropout,
        }


class DecoderStack:
    """Latent-to-feature decoder with a linear reconstruction layer."""

    def __init__(self, d_out: int, arch: Architecture, rng: Rng, name: str, dtype=np.float32):
        if d_out <= 0:
            raise ConfigError("decoder output width must be positive")
        self.d_out = d_out
        self.name = name
        self.arch = arch
        self.blocks = []
        prev = arch.z_dim
        for i, w in enumerate(arch.decoder_widths):
            self.blocks.append(
                DenseBlock(
                    prev,
                    w,
                    rng.derive(name, "block", i),
                    activation="selu",
                    has_layer_norm=True,
                    dropout_p=arch.dropout,
                    name=f"{name}.block{i}",
                    dtype=dtype,
                    ln_eps=arch.ln_eps,
                )
            )
            prev = w
        self.out = DenseBlock(
            prev, d_out, rng.derive(name, "out"), activation="linear", name=f"{name}.out", dtype=dtype
        )

    def parameters(self) -> list[Tensor]:
        return [p for blk in self.blocks for p in blk.parameters()] + self.out.parameters()

    def forward(self, z: Tensor, mode: str = "train", rng: Rng | None = None) -> Tensor:
        h = z
        for blk in self.blocks:
            h = blk.forward(h, mode=mode, rng=rng)
        return self.out.forward(h, mode=mode, rng=rng)

    def topology(self) -> dict:
        return {
            "kind": "decoder",
            "d_out": self.d_out,
            "widths": list(self.arch.decoder_widths),
            "z_dim": self.arch.z_dim,
        }


class Transmitter:
    """Two-layer latent-to-latent map; the identity in the ablated variant."""

    def __init__(
        self, arch: Architecture, rng: Rng, name: str = "transmitter", identity: bool = False, dtype=np.float32
    ):
        self.name = name
        self.identity = identity
        self.arch = arch
        self.blocks = []
        if identity:
            return
        widths = list(arch.transmitter_widths)
        prev = arch.z_dim
        for i, w in enumerate(widths):
            last = i == len(widths) - 1
            self.blocks.append(
                DenseBlock(
                    prev,
                    w,
                    rng.derive(name, "block", i),
                    activation="linear" if last else "selu",
                    has_layer_norm=last,
                    name=f"{name}.block{i}",
                    dtype=dtype,
                    ln_eps=arch.ln_eps,
                )
            )
            prev = w
        if prev != arch.z_dim:
            raise ConfigError("transmitter must preserve the latent width")

    def parameters(self) -> list[Tensor]:
        return [p for blk in self.blocks for p in blk.parameters()]

    def forward(self, z: Tensor, mode: str = "train", rng: Rng | None = None) -> Tensor:
        if self.identity:
            return z
        h = z
        for blk in self.blocks:
            h = blk.forward(h, mode=mode, rng=rng)
        return h

    def freeze_groups(self) -> list[tuple[str, list[Tensor]]]:
        return [] if self.identity else [(self.name, self.parameters())]

    def topology(self) -> dict:
        return {
            "kind": "transmitter",
            "identity": self.identity,
            "widths": [] if self.identity else list(self.arch.transmitter_widths),
        }


def transmit(transmitter: Transmitter, z_low: Tensor, mode: str = "train", rng: Rng | None = None) -> Tensor:
    """Map a low-domain latent batch into high-domain latent space."""
    return transmitter.forward(z_low, mode=mode, rng=rng)


class MultiTaskRegressor:
    """Shared trunk plus one small sigmoid head per task."""

    def __init__(self, arch: Architecture, n_tasks: int, rng: Rng, name: str = "regressor", dtype=np.float32):
        if n_tasks < 1:
            raise ConfigError("task count must be >= 1")
        self.name = name
        self.n_tasks = n_tasks
        self.arch = arch
        self.shared = []
        prev = arch.z_dim
        for i, w in enumerate(arch.regressor_shared):
            self.shared.append(
                DenseBlock(
                    prev, w, rng.derive(name, "shared", i), activation="selu",
                    name=f"{name}.shared{i}", dtype=dtype,
                )
            )
            prev = w
        self.heads: list[list[DenseBlock]] = []
        for t in range(n_tasks):
            head = []
            hp = prev
            for j, w in enumerate(arch.regressor_head):
                last = j == len(arch.regressor_head) - 1
                head.append(
                    DenseBlock(
                        hp, w, rng.derive(name, "head", t, j),
                        activation="sigmoid" if last else "selu",
                        name=f"{name}.task{t}.layer{j}", dtype=dtype,
                    )
                )
                hp = w
            self.heads.append(head)

    def parameters(self) -> list[Tensor]:
        ps = [p for blk in self.shared for p in blk.parameters()]
        for head in self.heads:
            ps += [p for blk in head for p in blk.parameters()]
        return ps

    def predict(self, z: Tensor, mode: str = "eval", rng: Rng | None = None) -> Tensor:
        """Per-task sigmoid scores, concatenated to [n, k]."""
        h = z
        for blk in self.shared:
            h = blk.forward(h, mode=mode, rng=rng)
        outs = []
        for head in self.heads:
            t = h
            for blk in head:
                t = blk.forward(t, mode=mode, rng=rng)
            outs.append(t)
        return concat_cols(outs)

    def freeze_groups(self) -> list[tuple[str, list[Tensor]]]:
        return [(self.name, self.parameters())]

    def topology(self) -> dict:
        return {
            "kind": "regressor",
            "n_tasks": self.n_tasks,
            "shared": list(self.arch.regressor_shared),
            "head": list(self.arch.regressor_head),
        }


class Critic:
    """Two-layer tanh critic over latent codes for the WGAN variant.

    The fixed depth keeps the input gradient available in closed form, so
    the gradient penalty differentiates through first-order ops only.
    """

    def __init__(self, d_in: int, hidden: int, rng: Rng, name: str = "critic", dtype=np.float32):
        self.name = name
        self.W1 = Tensor(
            (rng.derive(name, "W1").normal((d_in, hidden)) / np.sqrt(d_in)).astype(dtype),
            requires_grad=True, name=f"{name}.W1",
        )
        self.b1 = Tensor(np.zeros(hidden, dtype=dtype), requires_grad=True, name=f"{name}.b1")
        self.W2 = Tensor(
            (rng.derive(name, "W2").normal((hidden, 1)) / np.sqrt(hidden)).astype(dtype),
            requires_grad=True, name=f"{name}.W2",
        )
        self.b2 = Tensor(np.zeros(1, dtype=dtype), requires_grad=True, name=f"{name}.b2")

    def parameters(self) -> list[Tensor]:
        return [self.W1, self.b1, self.W2, self.b2]

    def forward(self, x: Tensor) -> Tensor:
        return ravel(affine(tanh(affine(x, self.W1, self.b1)), self.W2, self.b2))

    def input_gradient(self, x: Tensor) -> Tensor:
        """d critic / d input per row: (1 - tanh^2(xW1 + b1)) * W2^T @ W1^T."""
        h = affine(x, self.W1, self.b1)
        gate = add(mul(square(tanh(h)), -1.0), 1.0)
        return matmul(scale_cols(gate, ravel(self.W2)), transpose(self.W1))


@dataclass
class FreezeGroup:
    name: str
    params: list[Tensor]
    trainable: bool = False


class FreezeState:
    """Ordered (input to output) trainability flags over parameter groups.

    Unfreezing always releases the output-nearest frozen group. Flags are
    mirrored onto the parameters' ``requires_grad`` so frozen subgraphs do
    not even compute gradients.
    """

    def __init__(self, groups: list[FreezeGroup]):
        self.groups = groups
        self._apply()

    def _apply(self) -> None:
        for g in self.groups:
            for p in g.params:
                p.requires_grad = g.trainable

    @property
    def n_frozen(self) -> int:
        return sum(not g.trainable for g in self.groups)

    def trainable_params(self) -> list[Tensor]:
        return [p for g in self.groups if g.trainable for p in g.params]

    def flags(self) -> dict[str, bool]:
        return {g.name: g.trainable for g in self.groups}

    def unfreeze_top(self) -> str | None:
        """Release the highest (output-nearest) frozen group; no-op with a
        warning when everything is already trainable."""
        for g in reversed(self.groups):
            if not g.trainable:
                g.trainable = True
                for p in g.params:
                    p.requires_grad = True
                return g.name
        logger.warning("unfreeze_top: no frozen groups remain")
        return None


def unfreeze_top(state: FreezeState) -> FreezeState:
    state.unfreeze_top()
    return state


@dataclass
class ModelStack:
    """Everything the four training phases touch, keyed by role."""

    encoder_high: EncoderStack
    decoder_high: DecoderStack
    encoder_low: EncoderStack
    decoder_low: DecoderStack
    transmitter: Transmitter
    regressor: MultiTaskRegressor
    dtype: type = np.float32

    def modules(self) -> dict[str, object]:
        return {
            "encoder_high": self.encoder_high,
            "decoder_high": self.decoder_high,
            "encoder_low": self.encoder_low,
            "decoder_low": self.decoder_low,
            "transmitter": self.transmitter,
            "regressor": self.regressor,
        }

    def topology(self) -> dict:
        return {name: mod.topology() for name, mod in self.modules().items()}


def named_parameters(module_or_modules) -> dict[str, Tensor]:
    """Stable name -> parameter map; names must be unique."""
    if hasattr(module_or_modules, "parameters"):
        mods = [module_or_modules]
    else:
        mods = list(module_or_modules)
    out: dict[str, Tensor] = {}
    for mod in mods:
        for p in mod.parameters():
            if p.name is None or p.name in out:
                raise ConfigError(f"parameter name missing or duplicated: {p.name!r}")
            out[p.name] = p
    return out


def build(
    d_high: int,
    d_low: int,
    n_tasks: int,
    seed: int,
    arch: Architecture | None = None,
    use_transmitter: bool = True,
    dtype=np.float32,
) -> ModelStack:
    """Freshly initialized stack; bit-identical for identical seeds."""
    arch = (arch or Architecture()).validate()
    rng = Rng(seed).derive("model-init")
    return ModelStack(
        encoder_high=EncoderStack(d_high, arch, rng, "enc_h", dtype=dtype),
        decoder_high=DecoderStack(d_high, arch, rng, "dec_h", dtype=dtype),
        encoder_low=EncoderStack(d_low, arch, rng, "enc_l", dtype=dtype),
        decoder_low=DecoderStack(d_low, arch, rng, "dec_l", dtype=dtype),
        transmitter=Transmitter(arch, rng, identity=not use_transmitter, dtype=dtype),
        regressor=MultiTaskRegressor(arch, n_tasks, rng, dtype=dtype),
        dtype=dtype,
    )
