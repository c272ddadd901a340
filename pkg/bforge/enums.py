from __future__ import annotations

from enum import Enum, IntFlag, auto


class Side(str, Enum):
    A = "A"
    B = "B"

    @property
    def other(self) -> "Side":
        return Side.B if self is Side.A else Side.A

    def __str__(self) -> str:
        return self.name


class Party(str, Enum):
    ALICE = "Alice"
    BOB = "Bob"

    @property
    def other(self) -> "Party":
        return Party.BOB if self is Party.ALICE else Party.ALICE

    @property
    def side(self) -> Side:
        return Side.A if self is Party.ALICE else Side.B

    def __str__(self) -> str:
        return self.value


class Role(str, Enum):
    DATA = "data"
    ANCILLA = "ancilla"
    RESOURCE = "resource-half"
    OUTPUT = "output"

    def __str__(self) -> str:
        return self.value


class Mode(str, Enum):
    ENUMERATE = "enumerate"
    SAMPLE = "sample"

    def __str__(self) -> str:
        return self.value


class Regime(str, Enum):
    RESTORE = "restore"
    NO_RESTORE = "no_restore"

    def __str__(self) -> str:
        return self.value


class ProtocolId(str, Enum):
    CT = "ct"
    CT_EXT = "ct-ext"
    TWO_LEVEL = "two-level"
    TWO_LEVEL_MIXED = "two-level-mixed"
    GROUP = "group"
    PTL2 = "ptl2"
    PTL3 = "ptl3"
    TELEPORT = "teleport"
    LOCAL = "local"
    NONE = "none"

    def __str__(self) -> str:
        return self.value


class Rank3Kind(str, Enum):
    A_DIRECT_SUM = "A-direct-sum"
    B_DIRECT_SUM = "B-direct-sum"

    def __str__(self) -> str:
        return self.value


class PermClass(str, Enum):
    CONTROLLED_3 = "controlled-3-term"
    CONTROLLED_4 = "controlled-4-term"
    PRODUCT_PLUS_TWO = "product+two-term"

    def __str__(self) -> str:
        return self.value


class TypeKind(str, Enum):
    INPUT_A = "input_A"
    RELATIVE_OUTPUT_A = "relative_output_A"
    OUTPUT_B = "output_B"
    LOOSE_A = "loose_A"
    LOOSE_B = "loose_B"

    def __str__(self) -> str:
        return self.value


class EntCase(str, Enum):
    I1 = "I.1"
    I3 = "I.3"
    II = "II"
    III = "III"

    def __str__(self) -> str:
        return self.value


class OutputFormat(str, Enum):
    JSON = "json"
    TEXT = "text"

    def __str__(self) -> str:
        return self.value


class NiceFlag(IntFlag):
    @property
    def contents(self):
        if self.is_compound:
            all_flags = []
            for flag_name, flag_obj in self.__class__.__members__.items():
                if flag_obj.value == 0:
                    # skip null flags on compound objects
                    continue
                if flag_obj in self:
                    all_flags.append(flag_obj)
        else:
            all_flags = [self]

        return all_flags

    @property
    def is_compound(self) -> bool:
        return bin(int(self)).count("1") > 1

    def __str__(self) -> str:
        if self.is_compound:
            return ", ".join([str(f) for f in self.contents])
        return self.name or "NONE"


class Traits(NiceFlag):
    NONE = 0
    UNITARY = auto()
    COMPLEX_PERMUTATION = auto()
    PERMUTATION = auto()
    DIAGONAL = auto()
    CONTROLLED_A = auto()
    CONTROLLED_B = auto()
    PRODUCT = auto()
