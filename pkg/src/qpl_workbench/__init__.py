"""Design-and-analysis workbench for plasmon-launcher single-photon
sources: a stratified-media emission engine with channel partitioning,
geometry sweeps, the measurement-analysis pipeline, and a Monte Carlo
photon-stream oracle."""

__version__ = "0.1.0"

from .materials import MaterialModel, MaterialRegistry, builtin_registry, permittivity
from .stratified import (
    GuidedMode,
    Layer,
    LayerStack,
    SearchWindow,
    find_tm_poles,
    fresnel_interface,
    mode_propagation_length,
    stack_reflection,
)
from .emission import (
    DecayChannels,
    EmitterConfig,
    FarFieldPattern,
    PowerSpectrum,
    collection_efficiency,
    compute_decay_channels,
    dissipated_power_spectrum,
    far_field_pattern,
    partition_channels,
    spp_ff_ratio,
    total_decay_rate,
)
from .design import (
    DesignMap,
    PositionScan,
    SetupConstants,
    SweepGrid,
    build_launcher_stack,
    predict_observables,
    scan_dipole_position,
    sweep_geometry,
)
from .streamsim import DetectorModel, EmitterModel, SimConfig, simulate_cw, simulate_pulsed
from .timetags import Histogram, TimeTagStream
