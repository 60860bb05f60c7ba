K_B = 1.380649e-23  # J/K
C_LIGHT = 2.998e8  # m/s
