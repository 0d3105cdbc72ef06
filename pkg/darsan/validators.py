"""
Input validation utilities shared by the engine, agents and harness
"""

import math
from typing import FrozenSet, Iterable, Union

from .exceptions import ArgumentError, RangeError

# Symbolic spelling accepted wherever a slope is parsed from text
NEG_INF_TOKENS = ("neg-inf", "-inf", "neginfinity", "-infinity")


def validate_unit_interval(value: float, name: str) -> float:
    """
    Validate that a rating, review, prediction or demand lies in [0, 1].

    Args:
        value: Value to validate
        name: Field name used in the error message

    Returns:
        The value as a float

    Raises:
        RangeError: If the value is not a finite number in [0, 1]
    """
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise RangeError(f"Invalid {name}: {value!r}. Expected a number in [0, 1]")
    if math.isnan(number) or number < 0.0 or number > 1.0:
        raise RangeError(f"Invalid {name}: {value!r}. Expected a number in [0, 1]")
    return number


def validate_nonnegative(value: float, name: str) -> float:
    """
    Validate that an expertise amount or difference is nonnegative.

    Raises:
        ArgumentError: If the value is negative or NaN
    """
    number = float(value)
    if math.isnan(number) or number < 0.0:
        raise ArgumentError(f"Invalid {name}: {value!r}. Expected a nonnegative number")
    return number


def validate_area_tags(tags: Iterable[str]) -> FrozenSet[str]:
    """
    Validate the area tags attached to an asset.

    Raises:
        ArgumentError: If no tags are given or a tag is empty
    """
    tag_set = frozenset(tags)
    if not tag_set:
        raise ArgumentError("An asset needs at least one area tag")
    for tag in tag_set:
        if not isinstance(tag, str) or not tag.strip():
            raise ArgumentError(f"Invalid area tag: {tag!r}")
    return tag_set


def parse_slope(value: Union[str, float]) -> float:
    """
    Parse a slope parameter given as a number or as ``neg-inf``.

    Returns:
        The slope as a float; ``-math.inf`` for the symbolic form

    Raises:
        ArgumentError: If the slope is positive or cannot be parsed
    """
    if isinstance(value, str):
        token = value.strip().lower()
        if token in NEG_INF_TOKENS:
            return -math.inf
        try:
            slope = float(token)
        except ValueError:
            raise ArgumentError(f"Invalid slope: {value!r}. Expected a number <= 0 or 'neg-inf'")
    else:
        slope = float(value)
    if math.isnan(slope) or slope > 0:
        raise ArgumentError(f"Invalid slope: {value!r}. Slope must lie in (-inf, 0]")
    return slope


def format_slope(slope: float) -> str:
    """Format a slope the way parse_slope reads it back"""
    if math.isinf(slope):
        return "neg-inf"
    return repr(float(slope))
