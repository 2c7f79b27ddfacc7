from cerebellar_control.coding.population import Assembly, TuningCurve, decode_central, encode
from cerebellar_control.coding.soa import SoaConfig, soa_fit

__all__ = ['Assembly', 'SoaConfig', 'TuningCurve', 'decode_central', 'encode', 'soa_fit']
