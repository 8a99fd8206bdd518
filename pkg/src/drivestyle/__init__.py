"""Driving style analysis for roundabout trajectory recordings.

Computes per-driver speed and acceleration volatility measures, clusters
drivers into styles with k-means, and contrasts the style mix of drivers
that came close to pedestrians or cyclists against those that did not.
"""

from .cluster import (ClusterModel, ElbowCurve, ElbowEntry, Standardizer,
                      elbow_scan, kmeans, kmeans_best_of, load_model,
                      nearest_assignments, save_model, standardize)
from .config import CONFIG_ENV_VAR, PipelineConfig, build_config, parse_config_file
from .errors import (ConfigError, DataError, DriveStyleError, NumericError,
                     StageFailure)
from .features import (FeatureMatrix, FeatureVector, KinematicSeries,
                       MEASURE_NAMES, VolatilityOptions, build_matrix,
                       compute_volatility, percentile, read_features_csv,
                       split_series, track_features, write_features_csv)
from .ingest import (Recording, RecordingMeta, TrackSeries, ValidationVerdict,
                     VEHICLE_CLASSES, VRU_CLASSES, derive_kinematics,
                     find_recording_files, load_recording, load_recordings,
                     validate_track, write_recording)
from .interact import (InteractionParams, InteractionRecord, find_interactions,
                       find_interactions_all, partition_drivers,
                       read_interactions_csv, write_interactions_csv)
from .label import (LabeledDriver, STYLES, StyleAssignment, StyleMap,
                    assign_styles, label_drivers, load_style_map_file,
                    read_assignments_csv, score_clusters, write_assignments_csv,
                    write_style_map_file)
from .pipeline import (calibrate_radius, run_pipeline, run_stage,
                       stage_cluster, stage_features, stage_ingest,
                       stage_interact, stage_label, stage_report)
from .report import (RunReport, build_report, emit, format_percentage,
                     read_elbow_csv, render_centers_table,
                     render_distribution_table, write_elbow_csv)
from .synthgen import (DEFAULT_PROFILES, GenConfig, StyleProfile,
                       generate_dataset, generate_track, write_dataset)

__version__ = "0.1.0"
