"""Device-integrity monitoring simulator.

Thin Python layer over the C++ core: hashing/measurement, the dispute and
APDU wire codecs, the attestation-applet state machine, the tamper-evident
store, the permissioned ledger, dispute adjudication and the scenario runner.
"""

from ._dimsim import (  # noqa: F401
    LOG_RING_CAPACITY,
    SW_CONDITIONS_NOT_SATISFIED,
    SW_NOT_FOUND,
    SW_OK,
    SW_WRONG_DATA,
    ActionCode,
    Applet,
    ApduCommand,
    ApduResponse,
    Digest,
    DimsimError,
    DisputeDecision,
    DisputePacket,
    InclusionProof,
    Ledger,
    MeasurementReport,
    Mode,
    Receipt,
    Role,
    RootDigest,
    ScanOutcome,
    SigningKey,
    Store,
    Verifier,
    VerifyKey,
    __version__,
    action_name,
    bench_hash,
    compare,
    decode_apdu,
    decode_dispute,
    encode_apdu,
    encode_dispute,
    hash_bytes,
    make_receipt,
    measure_files,
    run_scenario,
    verify_proof,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
