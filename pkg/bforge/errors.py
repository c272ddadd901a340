from typing import Dict, Optional, Sequence


class BforgeError(Exception):
    pass


class InvalidInput(BforgeError):
    """Raised for anything wrong with what the caller handed in"""


class VerificationFailed(BforgeError):
    pass


class ZeroOperator(InvalidInput):
    def __init__(self, msg: Optional[str] = None) -> None:
        super().__init__(msg or "zero operator")


class DimensionMismatch(InvalidInput):
    def __init__(self, expected, actual, msg: Optional[str] = None) -> None:
        if msg is None:
            msg = f"dimension mismatch: expected {expected}, got {actual}"
        super().__init__(msg)
        self.expected = expected
        self.actual = actual


class NotUnitary(InvalidInput):
    def __init__(self, residual: float, msg: Optional[str] = None) -> None:
        if msg is None:
            msg = f"operator is not unitary (|U^dag U - I| = {residual:.3e})"
        super().__init__(msg)
        self.residual = residual


class NotDensity(InvalidInput):
    def __init__(self, check: str, value: float, msg: Optional[str] = None) -> None:
        if msg is None:
            msg = f"not a density matrix: {check} check failed ({value:.3e})"
        super().__init__(msg)
        self.check = check
        self.value = value


class NotPermutation(InvalidInput):
    def __init__(self, complex_ok: bool = False, msg: Optional[str] = None) -> None:
        if msg is None:
            kind = "complex permutation" if complex_ok else "permutation"
            msg = f"operator is not a {kind} unitary"
        super().__init__(msg)
        self.complex_ok = complex_ok


class RankMismatch(InvalidInput):
    def __init__(self, expected: Sequence[int], actual: int, msg: Optional[str] = None) -> None:
        if msg is None:
            want = " or ".join(str(e) for e in expected)
            msg = f"Schmidt rank {actual} where {want} is required"
        super().__init__(msg)
        self.expected = list(expected)
        self.actual = actual


class NotControlled(InvalidInput):
    def __init__(self, side, msg: Optional[str] = None) -> None:
        if msg is None:
            msg = f"operator is not controlled from side {side} in the computational basis"
        super().__init__(msg)
        self.side = side


class FixtureError(InvalidInput):
    def __init__(self, name: str, reason: str, msg: Optional[str] = None) -> None:
        if msg is None:
            msg = f"fixture {name}: {reason}"
        super().__init__(msg)
        self.name = name
        self.reason = reason


class InputError(InvalidInput):
    def __init__(self, source: str, detail: str, msg: Optional[str] = None) -> None:
        if msg is None:
            msg = f"cannot parse {source}: {detail}"
        super().__init__(msg)
        self.source = source
        self.detail = detail


class CapExceeded(InvalidInput):
    def __init__(self, size: int, cap: int, msg: Optional[str] = None) -> None:
        if msg is None:
            msg = f"input of size {size} exceeds the configured cap of {cap}"
        super().__init__(msg)
        self.size = size
        self.cap = cap


class GaugeFailure(BforgeError):
    def __init__(self, residuals: Dict[str, float], msg: Optional[str] = None) -> None:
        if msg is None:
            worst = ", ".join(f"{k}={v:.3e}" for k, v in sorted(residuals.items()))
            msg = f"standard form invariants not met: {worst}"
        super().__init__(msg)
        self.residuals = residuals


class ProtocolError(BforgeError):
    def __init__(self, protocol, step: str, msg: Optional[str] = None) -> None:
        if msg is None:
            msg = f"{protocol}: failed at {step}"
        super().__init__(msg)
        self.protocol = protocol
        self.step = step


class LocalityViolation(ProtocolError):
    pass


class LedgerMismatch(VerificationFailed):
    def __init__(self, protocol, expected, actual, msg: Optional[str] = None) -> None:
        if msg is None:
            msg = f"{protocol}: ledger {actual} does not match {expected}"
        super().__init__(msg)
        self.protocol = protocol
        self.expected = expected
        self.actual = actual


class GroupError(InvalidInput):
    pass


class ExpansionResidual(BforgeError):
    def __init__(self, residual: float, msg: Optional[str] = None) -> None:
        if msg is None:
            msg = f"group expansion does not reproduce the operator (residual {residual:.3e})"
        super().__init__(msg)
        self.residual = residual


class SynthesisError(VerificationFailed):
    def __init__(self, regime, bits: str, msg: Optional[str] = None) -> None:
        if msg is None:
            msg = f"{regime} synthesis disagrees with the table on input {bits}"
        super().__init__(msg)
        self.regime = regime
        self.bits = bits
