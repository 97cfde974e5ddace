from .byzantine import Strategy
from .client import ClientSession, TxRecord
from .cluster import (
    BlockchainReport,
    Cluster,
    ClusterConfig,
    RunTranscript,
    Submission,
    Violation,
    assert_blockchain_problem,
    explore,
    run,
)
from .network import LinkModel, Network
from .node import EPOCH_MS, GENESIS_TIMESTAMP, Node, NodeConfig
from .scheduler import ExploringScheduler, SimScheduler, ThreadedLoop

__all__ = [
    "EPOCH_MS",
    "GENESIS_TIMESTAMP",
    "BlockchainReport",
    "ClientSession",
    "Cluster",
    "ClusterConfig",
    "ExploringScheduler",
    "LinkModel",
    "Network",
    "Node",
    "NodeConfig",
    "RunTranscript",
    "SimScheduler",
    "Strategy",
    "Submission",
    "ThreadedLoop",
    "TxRecord",
    "Violation",
    "assert_blockchain_problem",
    "explore",
    "run",
]
