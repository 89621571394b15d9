"""Top-level module for pyoblivious"""

# Import pyoblivious sub-modules
from .server_store import ServerStore
from .square_root import SquareRootStore
from .cuckoo import CuckooLayout, CuckooTable
from .recursive import OsClient, build
from .pricing import PricingModel, estimate_cost, estimate_time
from .workload import run_workload
