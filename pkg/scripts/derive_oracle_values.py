"""High-precision oracle values for frozen test expectations.

Run once; the printed values are frozen into the test suite. Uses mpmath at
50 significant digits so double rounding cannot contaminate the expectations.
"""
import mpmath as mp

mp.mp.dps = 50


def tsallis_conf(p, q):
    q = mp.mpf(q)
    h = (1 - sum(mp.mpf(pi) ** q for pi in p)) / (q - 1)
    hmax = (1 - mp.mpf(len(p)) ** (1 - q)) / (q - 1)
    conf = (mp.e ** (-h) - mp.e ** (-hmax)) / (1 - mp.e ** (-hmax))
    return h, hmax, conf


def main():
    h, hmax, conf = tsallis_conf(["0.9", "0.1"], "0.33")
    print("tsallis p=(0.9,0.1) q=0.33:")
    print("  H      =", mp.nstr(h, 20))
    print("  H_max  =", mp.nstr(hmax, 20))
    print("  conf   =", mp.nstr(conf, 20))

    gm = mp.e ** ((mp.log(mp.mpf("0.25")) * 2 + mp.log(1)) / 3)
    print("geometric mean [0.25, 0.25, 1.0] =", mp.nstr(gm, 20))

    print("pcm16 max-code amplitude 32767/32768 =", mp.nstr(mp.mpf(32767) / 32768, 20))


if __name__ == "__main__":
    main()
