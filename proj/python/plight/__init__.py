"""Traffic signal control pretraining and transfer, C++ core."""

from plight._plight import (
    Agent,
    CompatibilityError,
    ConfigError,
    ContractError,
    Error,
    FlowSpec,
    ParseError,
    ShapeError,
    Simulator,
    StateError,
    analyze,
    builtin_flows,
    cnt_entropy,
    count_spawns,
    flow,
    flow_density,
    guide_distribution,
    parse_flow,
    pca,
    published_vehicle_count,
    route_feature,
    run,
    temporal_weight,
)

__all__ = [name for name in dir() if not name.startswith("_")]
