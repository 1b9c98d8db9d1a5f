"""embernet: temporal interaction-network analytics for viral misinformation.

Reconstructs the full measurement pipeline for a digital-wildfire event:
ingest timestamped user contacts, slice the temporal graph (temporal or
accumulative), compute structural observables (degrees, ANND, communities,
power-law fits), and detect the phase transition and its precursors.
"""

from .ingest import (ContactEvent, EventTable, Kind, ParseStats, TemporalGraph,
                     build_underlying_graph, deduplicate, filter_window,
                     load_osf_interactions, parse_contacts, read_events_binary,
                     write_csv, write_events_binary, write_jsonl)
from .slicing import (ACCUMULATIVE, TEMPORAL, GraphView, Slice, SliceSpec,
                      accumulative_slices, build_view, iter_views, slice_view,
                      temporal_slices)
from .metrics import (CONTACTS, UNIQUE_NEIGHBORS, AnndCurve, TimeSeries,
                      annd_curve, annd_points, contact_user_series,
                      degree_centrality, degree_distribution,
                      top_active_fraction)
from .community import (CommunityPartition, cluster_size_distribution,
                        connected_components, largest_cluster_series,
                        leiden_partition, partition_slices,
                        top_decile_cluster_fraction, track_largest_cluster)
from .powerlaw import (DistributionFit, fit_power_law, goodness_of_fit,
                       sample_power_law)
from .transition import (PrecursorConfig, TransitionConfig, TransitionReport,
                         annd_by_phase, detect_precursors, detect_transition,
                         phase_windows)
from .synth import CommunitySpec, RampConfig, SynthConfig, SynthLedger, generate
from .report import RunConfig, run_report

__version__ = "0.1.0"
