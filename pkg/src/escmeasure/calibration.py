"""Constants fixed by pilot runs (beta = 0.2, defaults elsewhere).

Pilot values are kept next to the constants so a rerun can be compared.
"""

# max |log|f| - prediction| / (eps^2 r^rho) over 17 angles in [pi/2, 3pi/2]
# with 10**5 zeros: 24.50 at r = 1e2, 12.77 at 1e3, 9.35 at 1e4
C_DEV = 30.0
PILOT_DEVIATION = {1e2: 24.50, 1e3: 12.77, 1e4: 9.35}

# escape density of sin z on [-3, 3]^2, 512^2 pixel centres, R_esc = 1e3:
# 0.3055 at n = 5, 0.3404 at n = 10, 0.3440 at n = 25
SIN_ESCAPE_FLOOR = 0.25
PILOT_SIN_ESCAPE_N25 = 0.3440
