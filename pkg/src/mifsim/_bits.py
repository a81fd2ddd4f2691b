"""Mixed-radix packing used for fixed-width state encodings."""

from math import prod


def capacity(radices):
    return prod(radices)


def width(radices):
    """Bits needed to hold any value packed with these radices."""
    return (capacity(radices) - 1).bit_length()


def pack(digits, radices):
    code = 0
    for digit, radix in zip(digits, radices):
        if not 0 <= digit < radix:
            raise ValueError(f"digit {digit} outside radix {radix}")
        code = code * radix + digit
    return code


def unpack(code, radices):
    digits = []
    for radix in reversed(radices):
        code, digit = divmod(code, radix)
        digits.append(digit)
    if code:
        raise ValueError("code exceeds capacity")
    return digits[::-1]


def ceil_log2(x):
    """Exact ceil(log2 x) for a positive integer."""
    if x < 1:
        raise ValueError("ceil_log2 needs x >= 1")
    return (x - 1).bit_length()


def lowest_zero(mask):
    return (~mask & (mask + 1)).bit_length() - 1
