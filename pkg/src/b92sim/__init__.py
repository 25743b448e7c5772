"""Monte Carlo and closed-form simulator of a GHz-clocked polarization
B92 key distribution link over optical fiber.

Layout:
    optics    -- polarization states, weak pulses, fiber loss, Malus statistics
    detector  -- SPAD timing jitter, dark counts, dead time, slot assignment
    protocol  -- B92 encode/measure/sift, error estimation, cascade, hashing
    analytic  -- closed-form link budget for cross-checking the simulation
    config    -- run configuration with TOML round-trip
    engine    -- vectorized end-to-end trial runner and parameter sweeps
    cli       -- command-line front end (simulate / sweep / analytic / histogram)
"""

__version__ = "0.1.0"
