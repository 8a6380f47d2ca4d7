"""Unsigned LEB128 varints."""


def encode(value: int) -> bytes:
    if value < 0:
        raise ValueError(f"cannot encode negative value {value}")
    out = bytearray()
    while value > 0x7F:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    out.append(value)
    return bytes(out)


def write(buf: bytearray, value: int) -> None:
    if value < 0:
        raise ValueError(f"cannot encode negative value {value}")
    while value > 0x7F:
        buf.append((value & 0x7F) | 0x80)
        value >>= 7
    buf.append(value)


def decode(data, offset: int = 0) -> tuple[int, int]:
    """Decode one varint at ``offset``; return ``(value, next_offset)``.

    Raises IndexError when the buffer ends inside a varint; callers translate
    that into their own truncation error.
    """
    result = 0
    shift = 0
    while True:
        byte = data[offset]
        offset += 1
        result |= (byte & 0x7F) << shift
        if byte < 0x80:
            return result, offset
        shift += 7
