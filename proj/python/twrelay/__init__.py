"""Power allocation for MIMO decode-and-forward two-way relaying."""

from ._core import (
    ChannelSet,
    ConfigError,
    InvalidInput,
    PowerLimits,
    Solution,
    Subcase,
    audit,
    bisection_bound,
    generate_channels,
    network_optimize,
    run_sweep_csv,
    scalar_oracle,
)

__all__ = [
    "ChannelSet",
    "ConfigError",
    "InvalidInput",
    "PowerLimits",
    "Solution",
    "Subcase",
    "audit",
    "bisection_bound",
    "generate_channels",
    "network_optimize",
    "run_sweep_csv",
    "scalar_oracle",
]
