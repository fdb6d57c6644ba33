"""htforge: function-preserving hardware-Trojan benchmark synthesis."""

__version__ = "0.1.0"
