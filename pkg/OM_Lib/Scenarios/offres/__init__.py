from .offres import OffResonanceCooling, dip_depth, run_offres_cooling
