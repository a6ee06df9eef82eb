"""Pure numpy versions of the hot loops; used when the compiled module is absent."""
import itertools

import numpy as np

NAME = "python"


def scatter_half(dest, src, weight, row_map, N):
    if weight is None:
        dest[row_map, : N + 1] = src[:, N:]
    else:
        dest[row_map, : N + 1] = src[:, N:] * weight[:, N:]


def gather_half(out, spec, row_map, N):
    out[:, N:] = spec[row_map, : N + 1]
    out[:, :N] = np.conj(out[::-1, :N:-1])


def accumulate_product(acc, w, a, b):
    acc += w * (a * b)


def direct_sum(table, f, d, N):
    n = 2 * N + 1
    beta = table.reshape((n,) * (2 * d))
    fl = f.reshape((n,) * d)
    out = np.zeros((n,) * d, dtype=np.complex128)
    for l in itertools.product(range(n), repeat=d):
        fl_l = fl[l]
        if fl_l == 0:
            continue
        # m - N in [-N - (l - N), N - (l - N)] intersected with [-N, N]
        msl = tuple(slice(max(0, N - li), min(n, 3 * N + 1 - li)) for li in l)
        ksl = tuple(slice(s.start + li - N, s.stop + li - N) for s, li in zip(msl, l))
        out[ksl] += fl_l * (beta[l][msl] * fl[msl])
    return out.reshape(-1)
