"""IoT sensor ingestion, hand-hygiene episode detection, and energy
aggregation."""

from .schemas import (  # noqa: F401
    ChannelSpec,
    DeviceSchema,
    Reading,
    SchemaMismatch,
    TimeSeries,
    default_schema,
    ingest,
    load_schema_json,
)
from .detect import (  # noqa: F401
    DetectionParams,
    EmptySeries,
    HygieneEpisode,
    OutOfRange,
    detect_hygiene_episodes,
    dispense_amount,
)
from .energy import EnergySummary, EmptyWindow, Stay, energy_summary  # noqa: F401
