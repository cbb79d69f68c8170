from .clock import LocalClock, quantize
from .collective import CollectiveModel, CollectiveRecord, CollectiveSpec
from .dists import DistSpec, dist_from_config
from .engine import (
    Collective,
    Compute,
    DeadlockError,
    Engine,
    EventTrace,
    ReadClock,
    Recv,
    Send,
    WaitUntilLocal,
    run_programs,
)
from .instance import ClockSpec, ClusterSpec, SimInstance
from .network import NetworkModel, NetworkSpec

__all__ = [
    "ClockSpec",
    "ClusterSpec",
    "Collective",
    "CollectiveModel",
    "CollectiveRecord",
    "CollectiveSpec",
    "Compute",
    "DeadlockError",
    "DistSpec",
    "Engine",
    "EventTrace",
    "LocalClock",
    "NetworkModel",
    "NetworkSpec",
    "ReadClock",
    "Recv",
    "Send",
    "SimInstance",
    "WaitUntilLocal",
    "dist_from_config",
    "quantize",
    "run_programs",
]
