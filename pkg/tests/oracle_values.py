"""Reference values frozen from tests/oracles/compute_oracles.py.

The oracle script shares no code with the package: fixed-step RK4 with
Richardson extrapolation, scipy DOP853 shooting, hand-written Simpson and
golden-section search.  Re-run it to regenerate.
"""

# Mathieu (q = 1, p = pi) monodromy at lambda = 1, RK4 N = 4000/8000 + Richardson
MATHIEU_M_LAMBDA1 = [[-2.198333867399705, -1.7128475869250155],
                     [-2.2376023540061527, -2.1983338673999997]]

# band edges by Brent root finding on the oracle discriminant
MATHIEU_A0 = -0.4551386041074971
MATHIEU_B1 = -0.1102488169921693
MATHIEU_A1 = 1.859108072514238
MATHIEU_B2 = 3.9170247729982064

# midpoint of the first Mathieu band and its discriminant
LAMBDA0 = -0.2826937105498332
DISC_LAMBDA0 = -0.2888430510097827

# sup 2 (1+|x|)^2 sech^2 x: 1e5-point scan on [-20, 20] + golden section
XBETA_EXAMPLE = 3.669762201238917
# sup bump_[1,2](x) (1+x)^2
XBETA_BUMP = 6.4872022067716735

# composite Simpson, 4e5 panels on [-40, 40]
INT_SECH4 = 1.3333333333333333

# ground state of -u'' + (1 - 2 sech^2 + lambda0 + eps sech^2) u = lambda u by DOP853 shooting
SHOOT_LAMBDA_EPS0 = -0.28269371054982506
SHOOT_LAMBDA_EPS001 = -0.2760307558402524
FD_SLOPES = {0.01: 0.6662954709572677, 0.005: 0.6664812754335725, 0.0025: 0.6665740225978434}
RICHARDSON_SLOPE = 0.6666666663795265
# log-derivative u'/u at x = 0 of the left-decaying sech-block solution at lambda0 + 0.1;
# nonzero, so the even ground state is not matched there
SHOOT_LOGDERIV_OFF = -0.10540925533893977
