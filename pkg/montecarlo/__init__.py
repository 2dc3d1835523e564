# Monte Carlo validation of the expansion exponents
