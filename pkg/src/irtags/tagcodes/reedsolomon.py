"""Reed-Solomon coding over GF(256) with the QR field polynomial 0x11D.

Codeword polynomials are stored highest degree first, which matches the
order codewords are laid out in a QR symbol.
"""

from __future__ import annotations

from ..errors import EccFailure

PRIMITIVE = 0x11D

EXP = [0] * 512
LOG = [0] * 256
_x = 1
for _i in range(255):
    EXP[_i] = _x
    LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= PRIMITIVE
for _i in range(255, 512):
    EXP[_i] = EXP[_i - 255]
del _x, _i


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return EXP[(LOG[a] - LOG[b]) % 255]


def gf_pow(a: int, n: int) -> int:
    if a == 0:
        return 0
    return EXP[(LOG[a] * n) % 255]


def gf_inverse(a: int) -> int:
    return EXP[255 - LOG[a]]


def poly_mul(p: list[int], q: list[int]) -> list[int]:
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] ^= gf_mul(a, b)
    return out


def poly_eval(p: list[int], x: int) -> int:
    y = 0
    for c in p:
        y = gf_mul(y, x) ^ c
    return y


def generator_poly(n_ecc: int) -> list[int]:
    g = [1]
    for i in range(n_ecc):
        g = poly_mul(g, [1, EXP[i]])
    return g


def rs_encode(data: list[int] | bytes, n_ecc: int) -> list[int]:
    """Return the ``n_ecc`` parity codewords for ``data``."""
    gen = generator_poly(n_ecc)
    rem = list(data) + [0] * n_ecc
    for i in range(len(data)):
        coef = rem[i]
        if coef:
            for j in range(1, len(gen)):
                rem[i + j] ^= gf_mul(gen[j], coef)
    return rem[len(data):]


def _syndromes(msg: list[int], n_ecc: int) -> list[int]:
    return [poly_eval(msg, EXP[i]) for i in range(n_ecc)]


def _berlekamp_massey(synd: list[int]) -> list[int]:
    # error locator, lowest degree first
    c = [1]
    b = [1]
    length = 0
    m = 1
    bb = 1
    for n, s in enumerate(synd):
        d = s
        for i in range(1, length + 1):
            if i < len(c):
                d ^= gf_mul(c[i], synd[n - i])
        if d == 0:
            m += 1
            continue
        coef = gf_div(d, bb)
        t = c[:]
        shifted = [0] * m + [gf_mul(coef, x) for x in b]
        if len(shifted) > len(c):
            c = c + [0] * (len(shifted) - len(c))
        for i, x in enumerate(shifted):
            c[i] ^= x
        if 2 * length <= n:
            length = n + 1 - length
            b = t
            bb = d
            m = 1
        else:
            m += 1
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c


def rs_correct(codeword: list[int] | bytes, n_ecc: int) -> tuple[list[int], int]:
    """Correct up to ``n_ecc // 2`` symbol errors.

    Returns the corrected data part and the number of symbols fixed.
    Raises EccFailure when the word is not decodable.
    """
    msg = list(codeword)
    n = len(msg)
    if n > 255:
        raise ValueError("codeword longer than 255 symbols")
    synd = _syndromes(msg, n_ecc)
    if not any(synd):
        return msg[: n - n_ecc], 0

    locator = _berlekamp_massey(synd)
    n_err = len(locator) - 1
    if n_err == 0 or 2 * n_err > n_ecc:
        raise EccFailure(f"too many errors ({n_err}) for {n_ecc} parity symbols")

    # Chien search: position p (0 = last symbol) is an error when
    # locator(alpha^-p) == 0.
    positions = []
    for p in range(n):
        x_inv = EXP[(255 - p) % 255]
        acc = 0
        for k in range(len(locator) - 1, -1, -1):
            acc = gf_mul(acc, x_inv) ^ locator[k]
        if acc == 0:
            positions.append(p)
    if len(positions) != n_err:
        raise EccFailure("error locator roots do not match its degree")

    # Forney: omega = (S(x) * Lambda(x)) mod x^n_ecc, low degree first
    omega = [0] * n_ecc
    for i, s in enumerate(synd):
        for j, l in enumerate(locator):
            if i + j < n_ecc:
                omega[i + j] ^= gf_mul(s, l)
    # formal derivative of the locator
    deriv = [locator[k] if k % 2 == 1 else 0 for k in range(1, len(locator))]
    for p in positions:
        x = EXP[p]
        x_inv = gf_inverse(x)
        num = 0
        for k in range(len(omega) - 1, -1, -1):
            num = gf_mul(num, x_inv) ^ omega[k]
        den = 0
        for k in range(len(deriv) - 1, -1, -1):
            den = gf_mul(den, x_inv) ^ deriv[k]
        if den == 0:
            raise EccFailure("zero derivative in Forney step")
        magnitude = gf_mul(x, gf_div(num, den))
        msg[n - 1 - p] ^= magnitude

    if any(_syndromes(msg, n_ecc)):
        raise EccFailure("residual syndrome after correction")
    return msg[: n - n_ecc], n_err
