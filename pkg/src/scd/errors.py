"""Typed errors shared across the package.

Exit-code mapping for the CLI: validation errors exit 2, infeasibility
exits 3, I/O problems exit 4.
"""
from __future__ import annotations


class SCDError(Exception):
    exit_code = 2


class InfeasibleError(SCDError):
    exit_code = 3


# ---------------------------------------------------------------- containers

class StoreError(SCDError):
    pass


class BadMagic(StoreError):
    pass


class InvalidHeader(StoreError):
    pass


class TruncatedPayload(StoreError):
    pass


class NonFiniteValue(StoreError):
    def __init__(self, row: int, msg: str | None = None):
        self.row = row
        super().__init__(msg or f"non-finite value in row {row}")


class ZeroNormRow(StoreError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"row {row} has zero L2 norm")


class DuplicateLemma(StoreError):
    def __init__(self, lemma: str, line_no: int | None = None):
        self.lemma = lemma
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"duplicate lemma {lemma!r}{where}")


class MalformedLine(StoreError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class MetaValidationError(StoreError):
    pass


# ------------------------------------------------------------------- solvers

class NonFiniteCost(SCDError):
    pass


class Infeasible(InfeasibleError):
    def __init__(self, msg: str, cut_nodes: list[int] | None = None):
        self.cut_nodes = cut_nodes or []
        super().__init__(msg)


# ---------------------------------------------------------------- clustering

class KTooLarge(SCDError):
    pass


class TooManyLabeledClasses(SCDError):
    pass


class InfeasibleSizeConstraint(InfeasibleError):
    pass


# -------------------------------------------------------------------- naming

class DimMismatch(SCDError):
    pass


class CandidatePoolTooSmall(SCDError):
    pass


class MissingGroundTruthName(SCDError):
    pass


# ------------------------------------------------------------------ taxonomy

class TaxonomyError(SCDError):
    pass


class ParseError(TaxonomyError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class CyclicTaxonomy(TaxonomyError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("hypernym cycle: " + " -> ".join(cycle))


class Disconnected(TaxonomyError):
    pass


class UnknownLemma(TaxonomyError):
    def __init__(self, lemma: str):
        self.lemma = lemma
        super().__init__(f"lemma {lemma!r} not in taxonomy")


class UnknownSynset(TaxonomyError):
    def __init__(self, synset_id: str):
        self.synset_id = synset_id
        super().__init__(f"synset {synset_id!r} not in taxonomy")


# ------------------------------------------------------------------- metrics

class LengthMismatch(SCDError):
    pass


class ModelPredictsTooManyClasses(SCDError):
    pass


# ----------------------------------------------------------------------- cli

class ConfigError(SCDError):
    pass


class ManifestConflict(SCDError):
    pass
