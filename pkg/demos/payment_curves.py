"""What does one more bidder earn the seller?

Tabulates the expected second-price payment (and its spread) as the
competition level rises, for three bid laws. For uniform bids the exact
answer is (xi - 1) / (xi + 1), so the quadrature column can be checked by
eye; the Monte Carlo column is there to show both routes land on the same
numbers.
"""

import numpy as np

from pgrtb.auction import BidModel, mc_second_price


def main():
    rng = np.random.default_rng(7)
    models = {
        "uniform[0,1]": BidModel.uniform(0.0, 1.0),
        "lognormal(0,0.5)": BidModel.lognormal(0.0, 0.5),
        "empirical (5k draws)": BidModel.empirical(rng.lognormal(0.0, 0.4, 5000)),
    }
    for name, model in models.items():
        print(f"\n{name}")
        print(f"{'xi':>4} {'payment':>9} {'spread':>8} {'monte carlo':>16}")
        for xi in range(2, 9):
            mean = model.payment_mean(float(xi))
            std = model.payment_std(float(xi))
            mc_mean, _, se = mc_second_price(float(xi), model, 200_000, seed=xi)
            print(f"{xi:>4} {mean:>9.4f} {std:>8.4f} "
                  f"{mc_mean:>10.4f} +/- {se:.4f}")
        if name == "uniform[0,1]":
            worst = max(abs(model.payment_mean(float(x)) - (x - 1) / (x + 1))
                        for x in range(2, 9))
            print(f"   closed-form check: max deviation {worst:.1e}")


if __name__ == "__main__":
    main()
