"""Walk the closed-form link budget from fiber loss to net key rate.

Prints every intermediate quantity for the shipped default link, then
shows how the budget moves with distance and where the key rate dies.
"""

import dataclasses

from b92sim.analytic import expected_link_budget, max_secure_distance_km
from b92sim.config import SimConfig
from b92sim.optics import transmittance


def describe(cfg: SimConfig) -> None:
    budget = expected_link_budget(cfg)
    t_ch = transmittance(cfg.channel())
    loss_db = cfg.distance_km * cfg.attenuation_db_per_km + cfg.fixed_loss_db
    print(f"distance {cfg.distance_km:g} km at {cfg.clock_ghz:g} GHz, "
          f"{cfg.detector_profile} detectors")
    print(f"  channel loss        {loss_db:7.2f} dB  (transmittance {t_ch:.5f})")
    print(f"  mean photons launched per pulse {cfg.mu:g}, detected fraction "
          f"{t_ch * cfg.efficiency:.5f}")
    print(f"  conclusive prob     {budget.p_conclusive:10.3e} per slot")
    print(f"  double clicks       {budget.p_double:10.3e} per slot")
    print(f"  effective jitter    {budget.fwhm_effective_ps:7.1f} ps FWHM, "
          f"slot misassignment {budget.misassignment_fraction:.4f}")
    print(f"  dead-time factor    {budget.deadtime_factor:7.4f}")
    print(f"  error rate split: optical {budget.qber_optical:.4f} "
          f"+ timing {budget.qber_timing:.4f} + dark {budget.qber_dark:.4f} "
          f"= {budget.qber_total:.4f}")
    print(f"  sifted rate         {budget.r_sift_cps:12.0f} bit/s")
    print(f"  net secret rate     {budget.r_net_cps:12.0f} bit/s")
    print()


def main() -> None:
    base = SimConfig()
    describe(base)
    describe(dataclasses.replace(base, distance_km=11.0))
    describe(dataclasses.replace(base, distance_km=0.0, dead_time_ps=0.0))

    horizon = max_secure_distance_km(base)
    print(f"net rate reaches zero at {horizon:.2f} km for this configuration")
    print("rate vs distance:")
    for km in (0.0, 2.0, 4.0, 6.55, 9.0, 11.0, 13.0):
        b = expected_link_budget(dataclasses.replace(base, distance_km=km))
        bar = "#" * max(1, int(round(40 * b.r_net_cps / 2.5e6))) if b.r_net_cps else ""
        print(f"  {km:5.2f} km  {b.r_net_cps:12.0f} bit/s  {bar}")


if __name__ == "__main__":
    main()
