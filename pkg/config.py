"""
Gurarii Toolkit - Configuration Module

Centralized configuration for all components of the exact ultrametric toolkit.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Tuple


TOOL_VERSION = "1.0.0"


class Backend(Enum):
    """Valued-field backends"""
    # Q with the p-adic absolute value, value group p^Z
    PADIC = "padic"

    # Truncated Hahn series Q((t^Q)) with |t| = 1/p, value group p^Q
    HAHN = "hahn"


@dataclass
class ArithmeticConfig:
    """Exact arithmetic settings"""
    # Interval refinement of logarithms in mag_cmp
    initial_log_bits: int = 64
    max_log_bits: int = 1 << 16

    # Hahn truncation, relative to the leading exponent
    default_tail_order: Fraction = Fraction(8)


@dataclass
class ConstructionConfig:
    """Settings for the stage constructions"""
    # Representatives of cosets live in (r, 1]; r = 1/p for discrete groups
    dense_r: Fraction = Fraction(3, 4)

    # t used by the approx-then-patch mode
    approx_t: Fraction = Fraction(1, 2)

    default_epsilon: Fraction = Fraction(1, 4)
    eps_samples: int = 500


@dataclass
class VerifyConfig:
    """Oracle caps and suite settings"""
    valuation_window: int = 4
    digit_depth: int = 1
    max_ambient_dim: int = 3
    max_subspace_dim: int = 2

    adversary_candidates: int = 1000
    ortho_samples: int = 1000

    workers: int = 4
    golden_dir: str = "golden"

    # Cases that run out of Hahn precision are retried with a doubled
    # truncation order up to this bound
    max_tail_order: Fraction = Fraction(32)

    # Hypothesis-style primes used by the generators
    primes: Tuple[int, ...] = (2, 3, 5)


@dataclass
class LoggingConfig:
    """Logging configuration"""
    ledger_file: Optional[str] = None
    log_level: str = "INFO"
    console_output: bool = True
    log_certified: bool = True
    log_refuted: bool = True
    # "csv", "jsonl" or None to pick by the ledger file suffix
    ledger_format: Optional[str] = None


@dataclass
class Config:
    """Main configuration container"""
    arithmetic: ArithmeticConfig = field(default_factory=ArithmeticConfig)
    construction: ConstructionConfig = field(default_factory=ConstructionConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)


# Default configuration instance
DEFAULT_CONFIG = Config()


def get_backend_name(value) -> str:
    """Get human-readable name for a backend value"""
    try:
        return Backend(value).name
    except ValueError:
        return f"UNKNOWN_BACKEND_{value}"
