"""Two reset designs with the same describing function but different harmonics.

Run with ``python3 demos/tracking_comparison.py``.  The ``cg1`` and ``cg2``
loops share their first-harmonic behaviour, so a describing-function
analysis cannot tell them apart.  The third harmonic of the sensitivity and
the peak tracking error over a period (the pseudo-sensitivity) do.
"""

import numpy as np

from resetfreq import load_system, pseudo_point, sensitivity_spectrum


def db(z):
    return 20 * np.log10(abs(z))


if __name__ == "__main__":
    a, b = load_system("cg1").system, load_system("cg2").system
    print(f"{'f [Hz]':>8} | {'S1 cg1':>8} {'S1 cg2':>8} | {'S3 cg1':>8} {'S3 cg2':>8} | "
          f"{'Sinf cg1':>9} {'Sinf cg2':>9}")
    for f in (5, 10, 20, 50, 100, 150):
        w = 2 * np.pi * f
        sa, sb = sensitivity_spectrum(a, w, 3), sensitivity_spectrum(b, w, 3)
        pa, pb = pseudo_point(a, w, "S"), pseudo_point(b, w, "S")
        print(f"{f:8.0f} | {db(sa.S[0]):8.2f} {db(sb.S[0]):8.2f} | {db(sa.S[2]):8.2f} "
              f"{db(sb.S[2]):8.2f} | {pa.db:9.2f} {pb.db:9.2f}")
