"""Signature coding for the multiple-access OR channel."""
from .core import Code, CodeGenParams, Codeword, boolean_sum, covers, generate_code
from .zfd import ZfdBudgetExceeded, ZfdReport, check_zfd, sync_decode

__all__ = [
    "Code",
    "CodeGenParams",
    "Codeword",
    "ZfdBudgetExceeded",
    "ZfdReport",
    "boolean_sum",
    "check_zfd",
    "covers",
    "generate_code",
    "sync_decode",
]
__version__ = "0.1.0"
