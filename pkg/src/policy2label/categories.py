"""The closed set of high-level data-practice categories."""

from __future__ import annotations

import enum


class DataPracticeCategory(enum.Enum):
    """One of the 12 high-level classes a policy segment can be labeled with.

    The string values are the canonical serialized names and must stay stable:
    schema files, score sidecars, and saved classifiers all refer to them.
    """

    FIRST_PARTY_COLLECTION_USE = "First-Party Collection/Use"
    THIRD_PARTY_SHARING_COLLECTION = "Third-Party Sharing/Collection"
    USER_ACCESS_EDIT_DELETION = "User Access, Edit and Deletion"
    DATA_RETENTION = "Data Retention"
    DATA_SECURITY = "Data Security"
    INTERNATIONAL_SPECIFIC_AUDIENCES = "International & Specific Audiences"
    DO_NOT_TRACK = "Do Not Track"
    POLICY_CHANGE = "Policy Change"
    USER_CHOICE_CONTROL = "User Choice/Control"
    INTRODUCTORY_GENERIC = "Introductory/Generic"
    PRACTICE_NOT_COVERED = "Practice not covered"
    PRIVACY_CONTACT_INFORMATION = "Privacy contact information"

    def __str__(self) -> str:
        return self.value


#: Fixed iteration order used for score maps and classifier weight rows.
CATEGORIES: tuple[DataPracticeCategory, ...] = tuple(DataPracticeCategory)


def category_from_name(name: str) -> DataPracticeCategory:
    """Resolve a serialized category name, raising ValueError if unknown."""
    try:
        return DataPracticeCategory(name)
    except ValueError:
        raise ValueError(f"unknown data practice category: {name!r}") from None
