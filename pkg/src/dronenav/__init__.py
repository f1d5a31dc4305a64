"""Context-aware drone navigation stack.

Subpackages by concern: mapping (grid map model and JSON schema), fields
(cost fields and planning), commands (flight command compilation), llm
(chat providers and the map-adjustment protocol), evaluation (benchmark
scenarios and judging), placement (edge/cloud placement model), service
(mission HTTP service), cli (command-line entry points).
"""

__version__ = "0.1.0"

from .mapping import (  # noqa: F401
    GridCoord, GridMap, Obstacle, OccupancyGrid,
    MalformedDocument, InvalidBounds,
    parse_map, serialize_map, rasterize, render_ascii,
)
from .fields import (  # noqa: F401
    ContextZone, CostField, FlightPath, NoPath,
    build_cost_field, dilate_region, zone_from_anchor,
    plan_astar, oracle_cheapest_cost,
)
from .commands import (  # noqa: F401
    Command, CommandSequence, Heading,
    CollisionOrEscape, DegeneratePath, MalformedSequence,
    compile_commands, simulate_commands, narrate,
    command_text, parse_command_text,
)
