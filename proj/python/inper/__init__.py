"""InPer: entropy-guided intervention training (EnIn) and homeostatic
test-time prototype adaptation (HoPer) on a small from-scratch ConvNet."""

from ._inper import (
    ConfigError,
    ConvNet,
    DomainDataset,
    DomainSpec,
    EnInConfig,
    FormatError,
    HoPerConfig,
    MemoryBank,
    Method,
    Texture,
    TrainConfig,
    adapt_stream,
    default_domain_specs,
    enin_transform,
    entropy_mask,
    generate,
    homeo_score,
    leave_one_out,
    load_bank,
    load_model,
    read_dataset,
    read_tdf,
    run_single,
    train,
    write_dataset,
    write_tdf,
)

__all__ = [
    "ConfigError",
    "ConvNet",
    "DomainDataset",
    "DomainSpec",
    "EnInConfig",
    "FormatError",
    "HoPerConfig",
    "MemoryBank",
    "Method",
    "Texture",
    "TrainConfig",
    "adapt_stream",
    "default_domain_specs",
    "enin_transform",
    "entropy_mask",
    "generate",
    "homeo_score",
    "leave_one_out",
    "load_bank",
    "load_model",
    "read_dataset",
    "read_tdf",
    "run_single",
    "train",
    "write_dataset",
    "write_tdf",
]
