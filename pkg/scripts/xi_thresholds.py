"""Largest tolerable excess noise for a few transmissions and reconciliation efficiencies."""

from cvqkd_rr.keyrate import NoRootError, markov_rate, xi_threshold

GAINS = (0.5, 0.1, 0.01, 0.001)
GAMMAS = (1.0, 0.9, 0.5)

print(f"{'G':>8}{'rate(xi=0)':>14}" + "".join(f"{'gamma=' + str(g):>13}" for g in GAMMAS))
for g in GAINS:
    cells = []
    for gamma in GAMMAS:
        try:
            cells.append(f"{xi_threshold(g, 500.0, gamma):13.4f}")
        except NoRootError:
            cells.append(f"{'none':>13}")
    print(f"{g:8g}{markov_rate(g, 500.0):14.6f}" + "".join(cells))
