"""Tour of the field model and the SNR-based noise calibrations.

The sensed quantity is a Gaussian bell over a rectangular area: an amplitude,
two axis spreads, and a center.  Sensor noise and channel noise are not set
directly; they are derived from target SNRs so that experiments stay
comparable when the field or the area changes.
"""

import numpy as np

from fieldest import (
    GAUSSIAN_BELL,
    Area,
    BitMapper,
    FieldParams,
    calibrate_eta_analog,
    calibrate_eta_quantized,
    calibrate_sigma,
    make_uniform_quantizer,
)

truth = FieldParams(h=8.0, rho_x=2.0, rho_y=2.0, x_c=4.0, y_c=4.0)
area = Area(0.0, 8.0, 0.0, 8.0)

print("field parameters:", dict(zip(("h", "rho_x", "rho_y", "x_c", "y_c"), truth.as_array())))

# a coarse look at the surface: values on a 9x9 lattice
xs = np.linspace(area.x_min, area.x_max, 9)
ys = np.linspace(area.y_min, area.y_max, 9)
gx, gy = np.meshgrid(xs, ys, indexing="ij")
g = GAUSSIAN_BELL.value(truth, gx.ravel(), gy.ravel()).reshape(9, 9)
print("\nfield values on a 9x9 grid (rows: x, cols: y):")
for row in g:
    print("  " + " ".join(f"{v:5.2f}" for v in row))
print(f"peak {g.max():.3f} at grid point {np.unravel_index(g.argmax(), g.shape)}")

# observation-noise calibration: average field power over the area vs SNR_O
print("\nobservation noise variance by SNR_O:")
for snr in (5.0, 10.0, 15.0, 20.0):
    sigma2 = calibrate_sigma(GAUSSIAN_BELL, truth, area, snr)
    print(f"  SNR_O = {snr:4.1f} dB  ->  sigma^2 = {sigma2:.6f}")

# channel-noise calibration differs between the two transmission modes:
# the analog channel carries the raw reading (signal power = field power +
# sensor noise), the quantized channel carries unit-amplitude bits but is
# calibrated against the average quantized-reading power.
sigma2 = calibrate_sigma(GAUSSIAN_BELL, truth, area, 15.0)
eta2_analog = calibrate_eta_analog(GAUSSIAN_BELL, truth, area, sigma2, 15.0)
print(f"\nanalog channel at SNR_C = 15 dB: eta^2 = {eta2_analog:.6f}")

print("quantized channel at SNR_C = 15 dB:")
for m in (2, 4, 8, 16):
    quantizer = make_uniform_quantizer(m, 0.0, 12.0)
    eta2 = calibrate_eta_quantized(GAUSSIAN_BELL, truth, area, quantizer, sigma2, 15.0)
    alpha = BitMapper(int(np.log2(m))).alpha
    print(f"  M = {m:2d} ({alpha} bits/reading)  ->  eta^2 = {eta2:.6f}")
