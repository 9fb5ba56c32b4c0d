"""Open-loop harmonics of a Clegg integrator and of a partial-reset first-order element.

Run with ``python3 demos/clegg_harmonics.py``.  The Clegg integrator has a
frequency-independent phase lead of about 38 degrees over the plain
integrator, and its higher harmonics fall off roughly as 1/n.
"""

import numpy as np

from resetfreq import clegg, fore, open_loop_spectrum


def show(title, element, omegas, n_max=7):
    print(title)
    print(f"{'omega':>10} {'|H1| dB':>9} {'arg H1':>8} {'|H3| dB':>9} {'|H5| dB':>9} {'|H7| dB':>9}")
    for w in omegas:
        H = open_loop_spectrum(element, w, n_max).H
        # even harmonics are exactly zero
        db = 20 * np.log10(np.abs(H[::2]))
        print(f"{w:10.3g} {db[0]:9.2f} {np.degrees(np.angle(H[0])):8.2f} "
              f"{db[1]:9.2f} {db[2]:9.2f} {db[3]:9.2f}")
    print()


if __name__ == "__main__":
    omegas = np.logspace(-1, 2, 4)
    show("Clegg integrator", clegg(1.0), omegas)
    show("first-order reset element, corner 1 rad/s, gamma = 0.2", fore(1.0, 0.2), omegas)
