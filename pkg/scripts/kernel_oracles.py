"""Print each feature kernel's value next to its analytic or brute-force reference."""

import numpy as np

from lfi_ident.features_freq import WaveletConfig, dwt, idwt, welch_psd
from lfi_ident.features_time import LleConfig, hurst_dfa, lyapunov_rosenstein, tkeo
from lfi_ident.synth import LORENZ_LYAPUNOV, OracleSignal, generate_oracle


def main() -> None:
    white = [hurst_dfa(generate_oracle(OracleSignal("white_noise", seed=s), 2 ** 14)).hurst for s in range(10)]
    walk = [hurst_dfa(generate_oracle(OracleSignal("fgn_cumsum", seed=s), 2 ** 14)).hurst for s in range(10)]
    print(f"DFA H, white noise      {np.mean(white):.3f}  (0.5)")
    print(f"DFA H, cumulative sum   {np.mean(walk):.3f}  (1.5)")

    x = generate_oracle(OracleSignal("lorenz_x", {"dt": 0.01}), 2 ** 15)
    cfg = LleConfig(embed_dim=5, delay=15, theiler_exclusion=100, horizon=3000, max_reference_points=1000)
    res = lyapunov_rosenstein(x, cfg, rate_hz=100.0)
    print(f"Lorenz-x LLE            {res.exponent:.3f}  ({LORENZ_LYAPUNOV}), fit R^2 {res.r_squared:.3f}")

    A, omega = 2.0, 0.3
    psi = tkeo(A * np.cos(omega * np.arange(1000))).psi
    print(f"TKEO of A cos(wt)       max error {np.max(np.abs(psi - A ** 2 * np.sin(omega) ** 2)):.1e}")

    noise = generate_oracle(OracleSignal("white_noise", seed=1), 2 ** 16)
    psd = welch_psd(noise, 1000.0)
    print(f"Welch sum(P) df / var   {psd.power.sum() * psd.resolution_hz / noise.var():.4f}  (1)")

    v = np.random.default_rng(2).standard_normal(5000)
    rec = idwt(dwt(v, WaveletConfig()))
    print(f"DWT reconstruction RMS  {np.sqrt(np.mean((rec - v) ** 2)):.1e}")


if __name__ == "__main__":
    main()
