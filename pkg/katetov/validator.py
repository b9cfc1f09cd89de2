"""Validation results and report printing.

Every check in the package that can fail on *content* (rather than on a broken
precondition) returns a :class:`ValidationResult` instead of raising, so
callers can decide whether a failure is a counterexample or a defect.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List


@dataclass
class ValidationResult:
    """Result of a validation check."""

    is_valid: bool
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.is_valid

    @classmethod
    def ok(cls, warnings: List[str] | None = None) -> "ValidationResult":
        return cls(True, [], list(warnings or []))

    @classmethod
    def fail(cls, error: str, warnings: List[str] | None = None) -> "ValidationResult":
        return cls(False, [error], list(warnings or []))

    @property
    def first_error(self) -> str | None:
        return self.errors[0] if self.errors else None

    def merge(self, other: "ValidationResult") -> "ValidationResult":
        return ValidationResult(
            self.is_valid and other.is_valid,
            self.errors + other.errors,
            self.warnings + other.warnings,
        )

    def summary(self) -> str:
        """Generate human-readable summary."""
        status = "✅ PASS" if self.is_valid else "❌ FAIL"
        lines = [status]

        if self.errors:
            lines.append(f"  Errors ({len(self.errors)}):")
            for error in self.errors:
                lines.append(f"    - {error}")

        if self.warnings:
            lines.append(f"  Warnings ({len(self.warnings)}):")
            for warning in self.warnings:
                lines.append(f"    - {warning}")

        return "\n".join(lines)

    def to_json(self) -> Dict[str, object]:
        return {"valid": self.is_valid, "errors": list(self.errors), "warnings": list(self.warnings)}


def print_validation_report(results: Dict[str, ValidationResult]) -> bool:
    """Print a grouped report and return True when every check passed."""
    print("\n" + "=" * 60)
    print("Verification Report")
    print("=" * 60)

    all_valid = True
    for name, result in results.items():
        print(f"\n[{name}]")
        print(result.summary())
        if not result.is_valid:
            all_valid = False

    print("\n" + "=" * 60)
    if all_valid:
        print("✅ All checks passed")
    else:
        print("❌ Some checks failed")
    print("=" * 60 + "\n")

    return all_valid
