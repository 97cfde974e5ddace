from .binary import BinaryAgreement, DBFTBinary
from .engine import ConsensusEngine, ConsensusInstance
from .messages import Kind, Message
from .rbc import ReliableBroadcast

__all__ = [
    "BinaryAgreement",
    "ConsensusEngine",
    "ConsensusInstance",
    "DBFTBinary",
    "Kind",
    "Message",
    "ReliableBroadcast",
]
