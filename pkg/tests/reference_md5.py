"""Independent MD5 used only as a test oracle for the environment goldens.

Pure-Python RFC 1321 implementation, deliberately separate from the
runtime's hashlib-based mapping so the golden file is produced and checked
by a different code path.
"""

import math
import struct

_SHIFTS = ([7, 12, 17, 22] * 4 + [5, 9, 14, 20] * 4
           + [4, 11, 16, 23] * 4 + [6, 10, 15, 21] * 4)
_SINES = [int(abs(math.sin(i + 1)) * 2 ** 32) & 0xFFFFFFFF for i in range(64)]


def _rotate_left(value: int, amount: int) -> int:
    value &= 0xFFFFFFFF
    return ((value << amount) | (value >> (32 - amount))) & 0xFFFFFFFF


def md5_hex(message: bytes) -> str:
    length = len(message)
    message = message + b"\x80"
    message += b"\x00" * ((56 - len(message) % 64) % 64)
    message += struct.pack("<Q", length * 8)

    a0, b0, c0, d0 = 0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476

    for offset in range(0, len(message), 64):
        chunk = struct.unpack("<16I", message[offset:offset + 64])
        a, b, c, d = a0, b0, c0, d0
        for i in range(64):
            if i < 16:
                f = (b & c) | (~b & d)
                g = i
            elif i < 32:
                f = (d & b) | (~d & c)
                g = (5 * i + 1) % 16
            elif i < 48:
                f = b ^ c ^ d
                g = (3 * i + 5) % 16
            else:
                f = c ^ (b | ~d)
                g = (7 * i) % 16
            rotated = _rotate_left(a + f + _SINES[i] + chunk[g], _SHIFTS[i])
            a, b, c, d = d, (b + rotated) & 0xFFFFFFFF, b, c
        a0 = (a0 + a) & 0xFFFFFFFF
        b0 = (b0 + b) & 0xFFFFFFFF
        c0 = (c0 + c) & 0xFFFFFFFF
        d0 = (d0 + d) & 0xFFFFFFFF

    return struct.pack("<4I", a0, b0, c0, d0).hex()


# RFC 1321 appendix A.5 test suite.
RFC1321_VECTORS = {
    b"": "d41d8cd98f00b204e9800998ecf8427e",
    b"a": "0cc175b9c0f1b6a831c399e269772661",
    b"abc": "900150983cd24fb0d6963f7d28e17f72",
    b"message digest": "f96b697d7cb7938d525a2f31aaf161d0",
    b"abcdefghijklmnopqrstuvwxyz": "c3fcd3d76192e4007dfb496cca67e13b",
    b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789":
        "d174ab98d277d9f5a5611c2c9f419d9f",
    b"1234567890123456789012345678901234567890123456789012345678901234567890"
    b"1234567890": "57edf4a22be3c955ac49da2e2107b67a",
}


def reference_solution(salt: int, key_text: str, valid_options: list[str]) -> str:
    digest = md5_hex(f"{salt}:{key_text}".encode("ascii"))
    return valid_options[int(digest[:8], 16) % len(valid_options)]
