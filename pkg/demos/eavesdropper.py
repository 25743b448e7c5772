"""What an intercept-resend attacker does to the error rate and the key.

The attacker measures a fraction of the pulses with her own two-state
receiver and resends her best guess. Every resent pulse she guessed
blind has a 50% chance of being the wrong state, and wrong states leak
into the receiver's conclusive counts as errors. Error estimation sees
the attack long before the key is gone.
"""

import dataclasses

from b92sim.analytic import expected_link_budget
from b92sim.config import SimConfig
from b92sim.engine import run_trial


def main() -> None:
    base = SimConfig(n_slots=20_000_000)
    print("attacked   QBER       QBER       sifted    secret   secret")
    print("fraction   expected   measured   bits      bits     bit/s")
    for fraction in (0.0, 0.1, 0.25, 0.5, 1.0):
        cfg = dataclasses.replace(base, eve_fraction=fraction)
        report = run_trial(cfg)
        budget = expected_link_budget(cfg)
        print(f"  {fraction:4.2f}    {budget.qber_total:.5f}    "
              f"{report.qber_measured:.5f}    {report.sifted_length:6d}    "
              f"{report.secret_length:5d}    {report.r_net_cps:8.0f}")

    print()
    print("a full intercept pins the error rate near one half: the attacker's")
    print("inconclusive slots force coin-flip resends, and those are wrong")
    print("half the time. The secret rate hits zero well before that, at the")
    print("point where correction plus compression eat the whole sifted key.")


if __name__ == "__main__":
    main()
