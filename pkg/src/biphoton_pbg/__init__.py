"""Photon-pair generation in nonlinear one-dimensional photonic-band-gap multilayers."""
from .biphoton import (
    AntisymProfile,
    ConditionalProbability,
    GFunction,
    HOMTrace,
    TemporalAmplitude,
    antisym_decompose,
    conditional_detection,
    g_function,
    hom_rate,
    hom_rate_general,
    support_width,
    temporal_amplitude,
)
from .design import DesignScanResult, design_scan, stack_spectrum
from .materials import Chi2Tensor, DispersionModel, Material, MaterialLibrary, chi2_coupling, refractive_index
from .spdc import (
    EmissionGeometry,
    JointSpectralAmplitude,
    PhysicalConstants,
    PumpConfig,
    RateMap,
    SchemeConfig,
    direction_pair_amplitudes,
    generation_rate_map,
    idler_geometry,
    jsa_cw,
    jsa_pulsed,
    layer_overlap_integral,
    symmetric_signal_grid,
)
from .stack import (
    FieldDistribution,
    Layer,
    Multilayer,
    PlaneWaveContext,
    SpectralCurve,
    build_stack,
    find_transmission_peaks,
    internal_fields,
    transfer_matrix,
    transmission_spectrum,
    transmittance,
)

__version__ = "0.1.0"
