"""Container types exchanged during a simulation run.

dataTypeId registry (1-99 framework, 100+ user):

    1 DISCOVER, 2 CONFIG-RESPONSE, 3 PULSE     (dmcp)
    100 scan result                             (sensors)
    101 vehicle state, 102 vehicle command      (this module)
"""
from __future__ import annotations

from dataclasses import dataclass

from .serialization import Int32, message
from .vehicle import VehicleCommand, VehicleState

VEHICLE_STATE_TYPE = 101
VEHICLE_COMMAND_TYPE = 102


@message(VEHICLE_STATE_TYPE)
@dataclass(frozen=True)
class VehicleStateMsg:
    vehicle_id: Int32 = 0
    external: bool = False  # driven by a system under test
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    speed: float = 0.0
    steering: float = 0.0
    timestamp: int = 0

    @classmethod
    def from_state(cls, vehicle_id: int, state: VehicleState, external: bool) -> "VehicleStateMsg":
        return cls(vehicle_id, external, state.x, state.y, state.heading, state.speed, state.steering,
                   state.timestamp)

    def to_state(self) -> VehicleState:
        return VehicleState(self.x, self.y, self.heading, self.speed, self.steering, self.timestamp)


@message(VEHICLE_COMMAND_TYPE)
@dataclass(frozen=True)
class VehicleCommandMsg:
    vehicle_id: Int32 = 0
    acceleration: float = 0.0
    steering: float = 0.0

    def to_command(self) -> VehicleCommand:
        return VehicleCommand(self.acceleration, self.steering)
