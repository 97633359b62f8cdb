"""Classical distillation: sifting, Cascade reconciliation, privacy amplification."""
from .cascade import (
    ParityMessage,
    ReconciliationError,
    ReconciliationResult,
    cascade_reconcile,
    decode_transcript,
    encode_transcript,
)
from .length import final_length, live_final_length
from .privacy import SecretKeyBlock, privacy_amplify, toeplitz_hash
from .sifting import SiftedKeyPair, sift
from .verification import KeyComparison, verify_keys

__all__ = [
    "KeyComparison",
    "ParityMessage",
    "ReconciliationError",
    "ReconciliationResult",
    "SecretKeyBlock",
    "SiftedKeyPair",
    "cascade_reconcile",
    "decode_transcript",
    "encode_transcript",
    "final_length",
    "live_final_length",
    "privacy_amplify",
    "sift",
    "toeplitz_hash",
    "verify_keys",
]
