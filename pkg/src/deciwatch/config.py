from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyper-parameters shared by both subnets.

    ``joints * dims`` is the pose width; a window holds ``N*Q + 1`` frames of
    which ``Q + 1`` are visible. ``ffn_width`` defaults to ``4 * channels``.
    ``init="identity"`` starts both subnets as exact pass-throughs so an
    untrained model performs linear interpolation of its inputs;
    ``init="xavier"`` draws every projection at random. With
    ``centering="window"`` each window is shifted by the mean of its visible
    inputs before the networks, which makes the model translation
    equivariant; ``"global"`` subtracts a fixed per-coordinate mean instead.
    """

    joints: int = 15
    dims: int = 2
    N: int = 10
    Q: int = 10
    channels: int = 64
    blocks: int = 5
    heads: int = 4
    ffn_width: int | None = None
    kernel_size: int = 5
    dropout: float = 0.0
    pos_embedding: str = "learned"
    norm_first: bool = True
    init: str = "identity"
    centering: str = "window"
    eps: float = 1e-5

    def __post_init__(self):
        if self.joints < 1 or self.dims not in (2, 3):
            raise ConfigError(f"bad pose shape K={self.joints}, D={self.dims}")
        if self.N < 1 or self.Q < 1:
            raise ConfigError(f"N and Q must be >= 1, got N={self.N}, Q={self.Q}")
        if self.channels < 1 or self.channels % self.heads:
            raise ConfigError(f"channels={self.channels} must be divisible by heads={self.heads}")
        if self.blocks < 0:
            raise ConfigError("blocks must be >= 0")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd, got {self.kernel_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.pos_embedding not in ("learned", "sinusoidal"):
            raise ConfigError(f"unknown pos_embedding {self.pos_embedding!r}")
        if self.init not in ("identity", "xavier"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.centering not in ("window", "global"):
            raise ConfigError(f"unknown centering {self.centering!r}")
        if self.ffn_width is None:
            object.__setattr__(self, "ffn_width", 4 * self.channels)

    @property
    def pose_width(self) -> int:
        return self.joints * self.dims

    @property
    def window_length(self) -> int:
        return self.N * self.Q + 1

    @property
    def visible_count(self) -> int:
        return self.Q + 1

    @property
    def head_dim(self) -> int:
        return self.channels // self.heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]
